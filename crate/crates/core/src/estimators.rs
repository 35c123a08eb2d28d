//! Channel estimation from cyclic statistics: CD delay, PMD matrix, DGD and
//! PSP, and reconstruction of the timing-free PMD matrix.

use std::f64::consts::PI;

use num_complex::Complex;

use crate::channel::{dl_from_delay, pmd_matrix};
use crate::cyclostats::{CafMatrix, CyclicMatrixEstimate};
use crate::error::{invalid, Error, Result};
use crate::jones::{pauli, JonesUnitary, Mat2, StokesVector};
use crate::scalar::Real;

type C = Complex<f64>;

/// Peak-to-median ratio below which a CD peak is reported as unreliable.
pub const CD_CONFIDENCE_RATIO: f64 = 3.0;

/// Normalized PSP-observability proxy (`|sin(2 pi alpha dgd)| / 2` for an
/// exact unitary) below which the PSP is indeterminate.
pub const PSP_THRESHOLD: f64 = 1e-3;

/// Condition number above which a PMD matrix estimate is unreliable.
pub const PMD_CONDITION_LIMIT: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CdEstimate {
    /// Delay of the grid maximum, s.
    pub tau_cd: f64,
    /// `c T0 / lambda^2 * tau_cd` in s/m (numerically ns/nm).
    pub dl: f64,
    pub peak_metric: f64,
    pub grid_step: f64,
    /// Parabolic three-point refinement of `tau_cd`.
    pub tau_refined: f64,
    pub peak_to_median: f64,
    pub low_confidence: bool,
}

fn peak_search(
    metric: &[f64],
    delays: &[f64],
    alpha: f64,
    wavelength: f64,
    grid_step: f64,
) -> Result<CdEstimate> {
    if metric.is_empty() {
        return invalid("empty CAF");
    }
    let (imax, &peak) = metric
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |best, cur| {
            if *cur.1 > *best.1 {
                cur
            } else {
                best
            }
        });
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::Numerical("CAF metric is zero or non-finite".into()));
    }
    let mut sorted = metric.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = sorted[sorted.len() / 2];
    let ratio = if median > 0.0 {
        peak / median
    } else {
        f64::INFINITY
    };
    let tau = delays[imax];
    let tau_refined = if imax > 0 && imax + 1 < metric.len() {
        let (l, c, r) = (metric[imax - 1], peak, metric[imax + 1]);
        let den = l - 2.0 * c + r;
        if den < 0.0 {
            tau + 0.5 * (l - r) / den * grid_step
        } else {
            tau
        }
    } else {
        tau
    };
    Ok(CdEstimate {
        tau_cd: tau,
        dl: dl_from_delay(tau, wavelength, alpha),
        peak_metric: peak,
        grid_step,
        tau_refined,
        peak_to_median: ratio,
        low_confidence: ratio < CD_CONFIDENCE_RATIO,
    })
}

/// Peak of `|R_xx(tau)|^2` (single polarization).
pub fn estimate_cd_single<T: Real>(caf: &CafMatrix<T>, wavelength: f64) -> Result<CdEstimate> {
    let metric: Vec<f64> = caf
        .entries
        .iter()
        .map(|m| m.get(0, 0).norm_sqr().as_f64())
        .collect();
    peak_search(&metric, &caf.delays, caf.alpha, wavelength, caf.grid_step())
}

/// Peak of `|R_xx(tau)|^2 + |R_yx(tau)|^2`, the energy of the first column,
/// which no left unitary can change.
pub fn estimate_cd_robust<T: Real>(caf: &CafMatrix<T>, wavelength: f64) -> Result<CdEstimate> {
    let metric: Vec<f64> = caf
        .entries
        .iter()
        .map(|m| m.column_energy(0).as_f64())
        .collect();
    peak_search(&metric, &caf.delays, caf.alpha, wavelength, caf.grid_step())
}

/// Timing-phase-bearing PMD matrix estimate `U_T ~ e^{-j phi0} U`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PmdMatrixEstimate {
    pub u_t: Mat2<f64>,
    pub condition: f64,
    pub low_confidence: bool,
}

/// Scales `C(tau_CD)` to unit average singular value.
pub fn estimate_pmd_matrix<T: Real>(c: &CyclicMatrixEstimate<T>) -> Result<PmdMatrixEstimate> {
    c.validate()?;
    let m = c.m.cast::<f64>();
    let [s1, s2] = m.singular_values();
    let mean = 0.5 * (s1 + s2);
    if !(mean > 0.0) {
        return Err(Error::Singular("cyclic matrix is zero".into()));
    }
    let condition = if s2 > 0.0 { s1 / s2 } else { f64::INFINITY };
    Ok(PmdMatrixEstimate {
        u_t: m.scale_re(1.0 / mean),
        condition,
        low_confidence: condition > PMD_CONDITION_LIMIT,
    })
}

fn widen<T: Real>(m: &Mat2<T>) -> Mat2<f64> {
    m.cast::<f64>()
}

/// `|arg(rho1 conj(rho2))| / (2 pi alpha)` from the eigenvalues of `u_t`, in
/// `[0, T0/2]`.
pub fn estimate_dgd<T: Real>(u_t: &Mat2<T>, alpha: f64) -> Result<f64> {
    let m = widen(u_t);
    if !m.is_finite() {
        return Err(Error::Numerical("non-finite matrix".into()));
    }
    let scale = m.frobenius_sq();
    if !(scale > 0.0) || m.det().norm() < 1e-12 * scale {
        return Err(Error::Singular("PMD matrix estimate is singular".into()));
    }
    let [r1, r2] = m.eigenvalues();
    Ok((r1 * r2.conj()).arg().abs() / (2.0 * PI * alpha))
}

/// Un-normalized PSP direction `Im[tr(sigma_i U_T) conj(tr U_T)]`, which
/// equals `-2 sin(2 pi alpha dgd) p` for an exact `e^{j theta} U`.
pub fn psp_raw<T: Real>(u_t: &Mat2<T>) -> [f64; 3] {
    let m = widen(u_t);
    let tr = m.trace();
    let mut r = [0.0; 3];
    for (i, v) in r.iter_mut().enumerate() {
        *v = ((pauli::<f64>(i + 1) * m).trace() * tr.conj()).im;
    }
    r
}

fn psp_observability(m: &Mat2<f64>, raw: &[f64; 3]) -> f64 {
    let mut den = m.trace().norm_sqr();
    for i in 1..=3 {
        den += (pauli::<f64>(i) * *m).trace().norm_sqr();
    }
    let num = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// PSP estimate with the sign that best reconstructs `u_t`.
pub fn estimate_psp<T: Real>(u_t: &Mat2<T>, alpha: f64) -> Result<StokesVector<f64>> {
    estimate_psp_with_threshold(u_t, alpha, PSP_THRESHOLD)
}

pub fn estimate_psp_with_threshold<T: Real>(
    u_t: &Mat2<T>,
    alpha: f64,
    threshold: f64,
) -> Result<StokesVector<f64>> {
    let m = widen(u_t);
    let raw = psp_raw(u_t);
    let obs = psp_observability(&m, &raw);
    if !(obs >= threshold) {
        return Err(Error::IndeterminatePsp(obs));
    }
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    let minus = StokesVector::normalized(-raw[0] / norm, -raw[1] / norm, -raw[2] / norm)?;
    let plus = minus.neg();
    let dgd = estimate_dgd(u_t, alpha)?;
    let fit = |p: &StokesVector<f64>| -> Result<f64> {
        let u = reconstruct_u(dgd, p, alpha)?.matrix();
        Ok((m * u.adjoint()).trace().norm())
    };
    // for dgd in (0, T0/2) the natural sign is -raw; prefer it on ties
    Ok(if fit(&plus)? > fit(&minus)? * (1.0 + 1e-12) {
        plus
    } else {
        minus
    })
}

/// First-order PMD matrix at the estimates. Unique up to sign only when the
/// true DGD is below half a symbol.
pub fn reconstruct_u(
    dgd_hat: f64,
    psp_hat: &StokesVector<f64>,
    alpha: f64,
) -> Result<JonesUnitary<f64>> {
    pmd_matrix(dgd_hat, psp_hat, alpha)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PmdEstimate {
    pub u_t: Mat2<f64>,
    pub dgd_hat: f64,
    /// `None` when the PSP is unobservable (DGD near 0 or T0/2).
    pub psp_hat: Option<StokesVector<f64>>,
    pub u_hat: JonesUnitary<f64>,
    pub low_confidence: bool,
}

/// Full PMD estimate. When the PSP is unobservable near zero DGD the
/// reconstruction falls back to the identity.
pub fn estimate_pmd<T: Real>(c: &CyclicMatrixEstimate<T>) -> Result<PmdEstimate> {
    let pm = estimate_pmd_matrix(c)?;
    let dgd_hat = estimate_dgd(&pm.u_t, c.alpha)?;
    let psp_hat = match estimate_psp(&pm.u_t, c.alpha) {
        Ok(p) => Some(p),
        Err(Error::IndeterminatePsp(_)) => None,
        Err(e) => return Err(e),
    };
    let u_hat = match &psp_hat {
        Some(p) => reconstruct_u(dgd_hat, p, c.alpha)?,
        None => JonesUnitary::identity(),
    };
    Ok(PmdEstimate {
        u_t: pm.u_t,
        dgd_hat,
        psp_hat,
        u_hat,
        low_confidence: pm.low_confidence || psp_hat.is_none(),
    })
}

/// Matrix distance between `a` and `b` after removing the best global phase.
pub fn distance_up_to_phase(a: &Mat2<f64>, b: &Mat2<f64>) -> f64 {
    let inner = (*a * b.adjoint()).trace();
    let ph = if inner.norm() > 0.0 {
        inner / inner.norm()
    } else {
        C::new(1.0, 0.0)
    };
    a.max_abs_diff(&b.scale(ph))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cis;

    const ALPHA: f64 = 32e9;

    fn est(m: Mat2<f64>) -> CyclicMatrixEstimate<f64> {
        CyclicMatrixEstimate::new(m, ALPHA)
    }

    #[test]
    fn pmd_matrix_estimate_examples() {
        let r = estimate_pmd_matrix(&est(Mat2::identity())).unwrap();
        assert!(r.u_t.max_abs_diff(&Mat2::identity()) < 1e-15);

        let p = StokesVector::new(1.0, 0.0, 0.0).unwrap();
        let u = pmd_matrix(5e-12, &p, ALPHA).unwrap().matrix();
        let r = estimate_pmd_matrix(&est(u.scale_re(0.7))).unwrap();
        let want = Mat2::diag(cis(-0.16 * PI), cis(0.16 * PI));
        assert!(r.u_t.max_abs_diff(&want) < 1e-12);

        let shifted = u.scale(cis(-PI / 4.0));
        let r = estimate_pmd_matrix(&est(shifted)).unwrap();
        assert!(r.u_t.max_abs_diff(&want.scale(cis(-PI / 4.0))) < 1e-12);

        let bad = Mat2::diag(C::new(1.0, 0.0), C::new(1e-3, 0.0));
        assert!(estimate_pmd_matrix(&est(bad)).unwrap().low_confidence);
    }

    #[test]
    fn dgd_examples() {
        assert!(estimate_dgd(&Mat2::<f64>::identity(), ALPHA).unwrap().abs() < 1e-20);
        let p = StokesVector::normalized(0.3, 0.4, -0.5).unwrap();
        let u = pmd_matrix(5e-12, &p, ALPHA).unwrap().matrix();
        assert!((estimate_dgd(&u, ALPHA).unwrap() - 5e-12).abs() < 1e-21);
        let u = pmd_matrix(20e-12, &p, ALPHA).unwrap().matrix();
        assert!((estimate_dgd(&u, ALPHA).unwrap() - 11.25e-12).abs() < 1e-20);
        assert!(estimate_dgd(&Mat2::<f64>::zero(), ALPHA).is_err());
    }

    #[test]
    fn psp_examples() {
        let p = StokesVector::new(1.0, 0.0, 0.0).unwrap();
        let u = pmd_matrix(5e-12, &p, ALPHA).unwrap().matrix();
        let got = estimate_psp(&u, ALPHA).unwrap();
        assert!((got.p1 - 1.0).abs() < 1e-9 && got.p2.abs() < 1e-9 && got.p3.abs() < 1e-9);

        let s = 0.5f64.sqrt();
        let p = StokesVector::new(0.0, s, s).unwrap();
        let u = pmd_matrix(5e-12, &p, ALPHA).unwrap().matrix();
        let got = estimate_psp(&u.scale(cis(1.234)), ALPHA).unwrap();
        assert!(got.p1.abs() < 1e-9 && (got.p2 - s).abs() < 1e-9 && (got.p3 - s).abs() < 1e-9);

        assert!(matches!(
            estimate_psp(&Mat2::<f64>::identity(), ALPHA),
            Err(Error::IndeterminatePsp(_))
        ));
        let raw = psp_raw(&u);
        let want = -2.0 * (2.0 * PI * ALPHA * 5e-12).sin();
        assert!((raw[1] - want * s).abs() < 1e-12);
    }

    #[test]
    fn round_trip_14ps() {
        let p = StokesVector::normalized(-0.2, 0.9, 0.3).unwrap();
        let u = pmd_matrix(14e-12, &p, ALPHA).unwrap().matrix();
        let ut = u.scale(cis(-0.9));
        let dgd = estimate_dgd(&ut, ALPHA).unwrap();
        let psp = estimate_psp(&ut, ALPHA).unwrap();
        let uh = reconstruct_u(dgd, &psp, ALPHA).unwrap().matrix();
        assert!(((ut * uh.adjoint()).trace().norm() - 2.0).abs() < 1e-9);
        assert!(distance_up_to_phase(&uh, &u) < 1e-9);
    }

    #[test]
    fn wrapped_dgd_breaks_round_trip() {
        let p = StokesVector::normalized(0.1, 0.7, -0.7).unwrap();
        let u = pmd_matrix(20e-12, &p, ALPHA).unwrap().matrix();
        let dgd = estimate_dgd(&u, ALPHA).unwrap();
        let psp = estimate_psp(&u, ALPHA).unwrap();
        let uh = reconstruct_u(dgd, &psp, ALPHA).unwrap().matrix();
        // recovers U only up to a sign that depends on the wrapping
        assert!((distance_up_to_phase(&uh, &u)).abs() < 1e-9);
        assert!((uh - u).frobenius() > 1.0);
    }

    #[test]
    fn pmd_estimate_falls_back_to_identity() {
        let r = estimate_pmd(&est(Mat2::identity())).unwrap();
        assert!(r.psp_hat.is_none());
        assert_eq!(r.u_hat, JonesUnitary::identity());
        assert!(r.low_confidence);
    }
}
