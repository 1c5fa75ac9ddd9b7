//! Closed-form quantities of the invasion model
//!
//! ```text
//! u_t = ((1 - v) u_x)_x + u (1 - u - v)
//! v_t = -gamma u v
//! ```
//!
//! together with the eigenstructure of its travelling-wave equilibria and the
//! threshold quantities that govern wave-speed selection.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Death rate of the resident population and its far-field density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub gamma: f64,
    pub v_inf: f64,
}

impl ModelParams {
    pub fn new(gamma: f64, v_inf: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return domain(format!("gamma must be positive and finite, got {gamma}"));
        }
        check_resident(v_inf)?;
        Ok(Self { gamma, v_inf })
    }
}

fn check_resident(v: f64) -> Result<()> {
    if !(0.0..1.0).contains(&v) {
        return domain(format!("resident density must lie in [0, 1), got {v}"));
    }
    Ok(())
}

/// Long-time speed of a front growing from `u0 = exp(-a x)` into a resident
/// density `v0`, from the linear analysis at the leading edge.
pub fn dispersion_speed(a: f64, v0: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return domain(format!("decay rate must be positive, got {a}"));
    }
    check_resident(v0)?;
    let c = if a >= 1.0 { 2.0 } else { a + 1.0 / a };
    Ok(c * (1.0 - v0))
}

/// Decay rate below which the dispersion speed exceeds the Fisher-KPP value 2.
///
/// Smaller root of `(a + 1/a)(1 - v0) = 2`. For `a < a_star(v0)` the speed
/// `dispersion_speed(a, v0)` is larger than 2 and is observed for every gamma.
pub fn a_star(v0: f64) -> Result<f64> {
    check_resident(v0)?;
    let k = 1.0 / (1.0 - v0);
    // k - sqrt(k^2 - 1) rewritten without cancellation
    Ok(1.0 / (k + (k * k - 1.0).sqrt()))
}

/// Eigenstructure of the rear equilibrium `(U, V, W) = (1, 0, 0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RearEigenData {
    /// `gamma / c`, the growth rate of the resident perturbation.
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Unit eigenvector for `lambda1`. Dominated by its V component; it has
    /// a U, W part of relative size `1/(lambda1^2 + c lambda1 - 1)`.
    pub e1: [f64; 3],
    pub e2: [f64; 3],
    pub e3: [f64; 3],
}

pub fn eig_rear(c: f64, gamma: f64) -> Result<RearEigenData> {
    if !(c > 0.0 && c.is_finite()) {
        return domain(format!("wave speed must be positive, got {c}"));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return domain(format!("gamma must be positive, got {gamma}"));
    }
    let disc = (c * c + 4.0).sqrt();
    let lambda1 = gamma / c;
    let lambda2 = 0.5 * (disc - c);
    // product of the roots of l^2 + c l - 1 is -1
    let lambda3 = -1.0 / lambda2;
    let resonance = lambda1 * lambda1 + c * lambda1 - 1.0;
    if resonance.abs() < 1e-12 * (1.0 + lambda1 * lambda1) {
        return domain(format!(
            "gamma/c = {lambda1} coincides with the U-W eigenvalue; the V eigenvector is defective"
        ));
    }
    let u = 1.0 / resonance;
    Ok(RearEigenData {
        lambda1,
        lambda2,
        lambda3,
        e1: normalize([u, 1.0, lambda1 * u]),
        e2: [1.0, 0.0, lambda2],
        e3: [1.0, 0.0, lambda3],
    })
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Eigenstructure of a V-axis equilibrium `(0, V_inf, 0)`.
///
/// `lambda1p` is the zero eigenvalue along the axis itself. The other two are
/// `-C ± sqrt(C^2 - 1)` with `C = c / (2 (1 - V_inf))`; they form a complex
/// pair when `C < 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrontEigenData {
    pub cee: f64,
    pub lambda1p: f64,
    /// Slow root (`-C + sqrt(C^2 - 1)`), or `-C + i omega` in the spiral case.
    pub lambda2p: Complex64,
    /// Fast root (`-C - sqrt(C^2 - 1)`), or `-C - i omega`.
    pub lambda3p: Complex64,
    pub e2p: [Complex64; 3],
    pub e3p: [Complex64; 3],
}

impl FrontEigenData {
    /// Trajectories spiral into the axis point (complex pair).
    pub fn is_spiral(&self) -> bool {
        self.cee < 1.0
    }

    /// `(lambda2p, lambda3p)` when both are real.
    pub fn real_pair(&self) -> Option<(f64, f64)> {
        (!self.is_spiral()).then(|| (self.lambda2p.re, self.lambda3p.re))
    }

    /// Real eigenvectors `(e2p, e3p)` when the roots are real.
    pub fn real_vectors(&self) -> Option<([f64; 3], [f64; 3])> {
        (!self.is_spiral()).then(|| (self.e2p.map(|z| z.re), self.e3p.map(|z| z.re)))
    }
}

pub fn eig_front(c: f64, v_inf: f64, gamma: f64) -> Result<FrontEigenData> {
    if !(c > 0.0 && c.is_finite()) {
        return domain(format!("wave speed must be positive, got {c}"));
    }
    if v_inf >= 1.0 {
        return domain(format!("V_inf = {v_inf} >= 1 gives degenerate diffusion"));
    }
    check_resident(v_inf)?;
    let cee = c / (2.0 * (1.0 - v_inf));
    let disc = Complex64::new(cee * cee - 1.0, 0.0).sqrt();
    let lambda2p = -cee + disc;
    let lambda3p = -cee - disc;
    let v_comp = Complex64::new(gamma * v_inf / c, 0.0);
    let vec = |l: Complex64| [l, v_comp, l * l];
    Ok(FrontEigenData {
        cee,
        lambda1p: 0.0,
        lambda2p,
        lambda3p,
        e2p: vec(lambda2p),
        e3p: vec(lambda3p),
    })
}

/// Critical far-field density `1 - c/2` where the front eigenvalues turn complex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VCritical {
    pub value: f64,
    /// True when `c > 2`, so no spiral regime exists and `value` is clamped to 0.
    pub clamped: bool,
}

pub fn v_critical(c: f64) -> Result<VCritical> {
    if !(c > 0.0 && c.is_finite()) {
        return domain(format!("wave speed must be positive, got {c}"));
    }
    Ok(if c > 2.0 {
        VCritical { value: 0.0, clamped: true }
    } else {
        VCritical { value: 1.0 - 0.5 * c, clamped: false }
    })
}

/// Fast front eigenvalue of the large-gamma inner problem (the `c -> 2` limit
/// of `lambda3p`).
pub fn lambda_inner(v_inf: f64) -> Result<f64> {
    if !(v_inf > 0.0 && v_inf < 1.0) {
        return domain(format!("V_inf must lie in (0, 1), got {v_inf}"));
    }
    let m = 1.0 - v_inf;
    Ok(-(1.0 / m) * (1.0 + (1.0 - m * m).sqrt()))
}

/// One- and two-term predictions of the speed deficit `delta = 2 - c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeltaPrediction {
    pub one_term: f64,
    pub two_term: f64,
    /// `pi^2 / log((A0 / A_I) gamma)^2`, undefined when the log argument is <= 1.
    pub unexpanded: Option<f64>,
}

pub fn predict_delta(gamma: f64, a0: f64, a_i: f64) -> Result<DeltaPrediction> {
    if !(gamma > 1.0 && gamma.is_finite()) {
        return domain(format!("gamma must exceed 1, got {gamma}"));
    }
    if !(a0 > 0.0 && a_i > 0.0) {
        return domain(format!("prefactors must be positive, got A0 = {a0}, A_I = {a_i}"));
    }
    let lg = gamma.ln();
    let pi2 = PI * PI;
    let one_term = pi2 / (lg * lg);
    let two_term = one_term + 2.0 * pi2 * (a_i / a0).ln() / (lg * lg * lg);
    let arg = (a0 / a_i * gamma).ln();
    let unexpanded = (arg > 0.0).then(|| pi2 / (arg * arg));
    Ok(DeltaPrediction { one_term, two_term, unexpanded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dispersion_examples() {
        assert_relative_eq!(dispersion_speed(2.0, 0.5).unwrap(), 1.0);
        assert_relative_eq!(dispersion_speed(1.0, 0.0).unwrap(), 2.0);
        // (0.27 + 1/0.27) * 0.25
        assert_relative_eq!(
            dispersion_speed(0.27, 0.75).unwrap(),
            0.993_425_925_925_925_9,
            epsilon = 1e-12
        );
        assert_relative_eq!(dispersion_speed(0.25, 0.5).unwrap(), 2.125);
    }

    #[test]
    fn dispersion_rejects_bad_input() {
        assert!(dispersion_speed(0.0, 0.5).is_err());
        assert!(dispersion_speed(-1.0, 0.5).is_err());
        assert!(dispersion_speed(0.5, 1.0).is_err());
        assert!(dispersion_speed(0.5, -0.1).is_err());
    }

    #[test]
    fn a_star_examples() {
        assert_relative_eq!(a_star(0.0).unwrap(), 1.0);
        assert_relative_eq!(a_star(0.5).unwrap(), 2.0 - 3f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(a_star(0.75).unwrap(), 4.0 - 15f64.sqrt(), epsilon = 1e-14);
        assert!(a_star(1.0).is_err());
    }

    #[test]
    fn rear_examples() {
        let e = eig_rear(2.0, 2.0).unwrap();
        assert_relative_eq!(e.lambda1, 1.0);
        assert_relative_eq!(e.lambda2, 2f64.sqrt() - 1.0, epsilon = 1e-14);
        assert_relative_eq!(e.lambda3, -(2f64.sqrt()) - 1.0, epsilon = 1e-14);

        let e = eig_rear(1.0, 1.0).unwrap();
        assert_relative_eq!(e.lambda1, 1.0);
        assert_relative_eq!(e.lambda2, (5f64.sqrt() - 1.0) / 2.0, epsilon = 1e-14);
        assert_relative_eq!(e.lambda2 * e.lambda3, -1.0, epsilon = 1e-14);
        assert!(eig_rear(0.0, 1.0).is_err());
    }

    #[test]
    fn front_examples() {
        let e = eig_front(2.0, 0.5, 3.0).unwrap();
        let (l2, l3) = e.real_pair().unwrap();
        assert_relative_eq!(l2, -2.0 + 3f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(l3, -2.0 - 3f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(l2 * l3, 1.0, epsilon = 1e-13);

        let c = 1.3;
        let e = eig_front(c, 1.0 - c / 2.0, 5.0).unwrap();
        assert_relative_eq!(e.cee, 1.0, epsilon = 1e-14);
        assert_relative_eq!(e.lambda2p.re, -1.0, epsilon = 1e-7);
        assert_relative_eq!(e.lambda3p.re, -1.0, epsilon = 1e-7);

        let e = eig_front(1.0, 0.25, 1.0).unwrap();
        assert_relative_eq!(e.cee, 2.0 / 3.0, epsilon = 1e-14);
        assert!(e.is_spiral());
        assert!(e.lambda2p.im.abs() > 0.0);
        assert_relative_eq!(e.lambda2p.im, -e.lambda3p.im);
        assert!(eig_front(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn critical_density() {
        assert_eq!(v_critical(2.0).unwrap().value, 0.0);
        assert_eq!(v_critical(1.0).unwrap().value, 0.5);
        assert_relative_eq!(v_critical(1.24).unwrap().value, 0.38, epsilon = 1e-14);
        let v = v_critical(2.2).unwrap();
        assert!(v.clamped);
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn inner_eigenvalue() {
        assert_relative_eq!(lambda_inner(1e-12).unwrap(), -1.0, epsilon = 1e-5);
        assert_relative_eq!(lambda_inner(0.5).unwrap(), -2.0 - 3f64.sqrt(), epsilon = 1e-13);
        assert_relative_eq!(lambda_inner(0.75).unwrap(), -4.0 - 15f64.sqrt(), epsilon = 1e-13);
        assert!(lambda_inner(0.0).is_err());
        assert!(lambda_inner(1.0).is_err());
    }

    #[test]
    fn delta_examples() {
        let p = predict_delta(10f64.exp(), 0.3, 0.3).unwrap();
        assert_relative_eq!(p.one_term, PI * PI / 100.0, epsilon = 1e-14);
        assert_relative_eq!(p.two_term, p.one_term, epsilon = 1e-15);

        // pi^2/ln(1e6)^2 + 2 pi^2 ln(1.485/0.1419)/ln(1e6)^3
        let p = predict_delta(1e6, 0.1419, 1.485).unwrap();
        assert_relative_eq!(p.two_term, 0.069_275, epsilon = 5e-5);
        assert_relative_eq!(2.0 - p.two_term, 1.931, epsilon = 1e-3);

        let p = predict_delta(1e11, 0.1419, 1.485).unwrap();
        assert_relative_eq!(p.one_term, 0.015_38, epsilon = 1e-5);
        assert!(p.two_term > p.one_term);
        assert!(predict_delta(1.0, 0.1, 0.1).is_err());
        assert!(predict_delta(10.0, 0.0, 0.1).is_err());
    }
}
