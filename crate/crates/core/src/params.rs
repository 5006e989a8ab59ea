//! Model parameters, the boosted ODE blow-up family and everything that is
//! given in closed form: profiles, the potential and the symmetry modes.
//!
//! The profile family is
//!
//! ```text
//! κ_d(y) = κ_0 (1 − |d|²)^{1/(p−1)} (1 + d·y)^{−s_p},   s_p = 2/(p−1),
//! κ_0    = (2(p+1)/(p−1)²)^{1/(p−1)},
//! ```
//!
//! and the linearization around `κ_d` carries the potential
//! `V_d = p κ_d^{p−1} = (s_p+1)(s_p+2)(1−|d|²)(1+d·y)^{−2}`.

use std::sync::Arc;

use serde::Serialize;

use crate::discretization::{Discretization, Geometry, StateVector};
use crate::error::{Error, Result};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `γ(d) = (1 − |d|²)^{−1/2}`.
pub fn gamma(d: &[f64]) -> Result<f64> {
    let dd = dot(d, d);
    if !(dd < 1.0) {
        return Err(Error::ParameterDomain(format!(
            "|d| < 1 required, got |d| = {}",
            dd.sqrt()
        )));
    }
    Ok(1.0 / (1.0 - dd).sqrt())
}

/// Validated physical and functional parameters with derived constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    /// Spatial dimension.
    pub n: usize,
    /// Nonlinearity exponent.
    pub p: f64,
    /// Sobolev index.
    pub k: usize,
    /// Radius of the backward light cone section.
    pub r: f64,
    /// Base boost.
    pub d0: Vec<f64>,
    /// Spectral gap abscissa.
    pub omega0: f64,
    pub s_p: f64,
    pub omega_p: f64,
    pub kappa0: f64,
    /// Lower end of the admissible `ω_0` window.
    pub omega_npk: f64,
    /// `p > 1 + 4/(N−1)` (always true for N = 1).
    pub superconformal: bool,
    /// `R > 1` runs are accepted but the boundary is no longer characteristic.
    pub experimental_radius: bool,
}

/// Validate parameters and populate the derived constants.
pub fn make_params(n: usize, p: f64, k: usize, r: f64, d0: &[f64], omega0: f64) -> Result<ModelParams> {
    if n == 0 {
        return Err(Error::ParameterDomain("N ≥ 1".into()));
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::ParameterDomain(format!("p > 1 violated (p = {p})")));
    }
    if !(2 * k > n) {
        return Err(Error::ParameterDomain(format!("k > N/2 violated (k = {k}, N = {n})")));
    }
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::ParameterDomain(format!("R ≥ 1 violated (R = {r})")));
    }
    if d0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: d0.len(),
        });
    }
    let d0_norm = norm2(d0);
    if !(d0_norm < 1.0) {
        return Err(Error::ParameterDomain(format!("|d0| < 1 violated (|d0| = {d0_norm})")));
    }
    if !(r * d0_norm < 1.0) {
        return Err(Error::ParameterDomain(format!(
            "R·|d0| < 1 violated (R·|d0| = {})",
            r * d0_norm
        )));
    }
    let s_p = 2.0 / (p - 1.0);
    let half_n = n as f64 / 2.0;
    if !(half_n - s_p - (k as f64) < 0.0) {
        return Err(Error::ParameterDomain(format!(
            "N/2 − s_p − k < 0 violated ({})",
            half_n - s_p - k as f64
        )));
    }
    let omega_npk = (-1.0f64).max(half_n - s_p - k as f64).max(-s_p);
    if !(omega_npk < omega0 && omega0 < 0.0) {
        return Err(Error::ParameterDomain(format!(
            "max{{−1, N/2−s_p−k, −s_p}} < ω_0 < 0 violated (window ({omega_npk}, 0), ω_0 = {omega0})"
        )));
    }
    let kappa0 = (2.0 * (p + 1.0) / ((p - 1.0) * (p - 1.0))).powf(1.0 / (p - 1.0));
    let superconformal = n == 1 || p > 1.0 + 4.0 / (n as f64 - 1.0);
    Ok(ModelParams {
        n,
        p,
        k,
        r,
        d0: d0.to_vec(),
        omega0,
        s_p,
        omega_p: s_p.min(1.0),
        kappa0,
        omega_npk,
        superconformal,
        experimental_radius: r > 1.0,
    })
}

impl ModelParams {
    /// Same physics with a different Sobolev index (used for norm studies).
    pub fn with_k(&self, k: usize) -> Result<Self> {
        make_params(self.n, self.p, k, self.r, &self.d0, self.omega0)
    }

    /// Checks the boost is admissible on the ball of radius R.
    pub fn check_boost(&self, d: &[f64]) -> Result<f64> {
        if d.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: d.len(),
            });
        }
        let g = gamma(d)?;
        let nd = norm2(d);
        if !(self.r * nd < 1.0) {
            return Err(Error::ParameterDomain(format!(
                "R·|d| < 1 violated (R·|d| = {})",
                self.r * nd
            )));
        }
        Ok(g)
    }
}

fn one_plus_dy(y: &[f64], d: &[f64]) -> Result<f64> {
    let a = 1.0 + dot(d, y);
    if !(a > 0.0) {
        return Err(Error::SingularDomain(format!("1 + d·y = {a} ≤ 0 at y = {y:?}")));
    }
    Ok(a)
}

/// The boosted blow-up profile `κ_d(y)`.
pub fn kappa_d(y: &[f64], params: &ModelParams, d: &[f64]) -> Result<f64> {
    let g = gamma(d)?;
    let a = one_plus_dy(y, d)?;
    Ok(params.kappa0 * g.powf(-params.s_p) * a.powf(-params.s_p))
}

/// Physical-space boosted blow-up solution `u*_{T,x0,d}(t, x)`.
pub fn u_star(t: f64, x: &[f64], params: &ModelParams, big_t: f64, x0: &[f64], d: &[f64]) -> Result<f64> {
    let g = gamma(d)?;
    let shifted: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
    let denom = big_t - t + dot(d, &shifted);
    if !(denom > 0.0) {
        return Err(Error::SingularDomain(format!("T − t + d·(x − x0) = {denom} ≤ 0")));
    }
    Ok(params.kappa0 * g.powf(-params.s_p) * denom.powf(-params.s_p))
}

/// The potential `V_d(y)`.
pub fn potential_v(y: &[f64], params: &ModelParams, d: &[f64]) -> Result<f64> {
    let g = gamma(d)?;
    let a = one_plus_dy(y, d)?;
    let s = params.s_p;
    Ok((s + 1.0) * (s + 2.0) / (g * g) / (a * a))
}

/// Pointwise value of the time-translation mode `f_{1,d}`, eigenvalue 1.
pub fn mode_f1(y: &[f64], params: &ModelParams, d: &[f64]) -> Result<(f64, f64)> {
    let g = gamma(d)?;
    let a = one_plus_dy(y, d)?;
    let s = params.s_p;
    let c = s * params.kappa0 * g.powf(-s);
    Ok((c * a.powf(-s - 1.0), c * (s + 1.0) * a.powf(-s - 2.0)))
}

/// Pointwise value of the Lorentz mode `f_{0,d,i}`, eigenvalue 0.
pub fn mode_f0(y: &[f64], i: usize, params: &ModelParams, d: &[f64]) -> Result<(f64, f64)> {
    let g = gamma(d)?;
    let a = one_plus_dy(y, d)?;
    let s = params.s_p;
    let c = s * params.kappa0 * g.powf(-s);
    let first = c * a.powf(-s - 1.0) * y[i] + c * g * g * a.powf(-s) * d[i];
    let second = c * (s + 1.0) * a.powf(-s - 2.0) * y[i] + c * s * g * g * a.powf(-s - 1.0) * d[i];
    Ok((first, second))
}

/// Pointwise value of the profile pair `f_d = (κ_d, (y·∇ + s_p) κ_d)`.
pub fn profile_pair(y: &[f64], params: &ModelParams, d: &[f64]) -> Result<(f64, f64)> {
    let kd = kappa_d(y, params, d)?;
    let a = one_plus_dy(y, d)?;
    Ok((kd, params.s_p * kd / a))
}

/// Which closed form a sample represents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ProfileKind {
    Kappa { d: Vec<f64> },
    Potential { d: Vec<f64> },
    ModeZero { d: Vec<f64>, i: usize },
    ModeOne { d: Vec<f64> },
}

/// A closed-form field sampled on a node set.
#[derive(Debug, Clone)]
pub struct ProfileSample {
    pub kind: ProfileKind,
    pub values: Vec<f64>,
}

/// The symmetry modes sampled on a discretization.
///
/// On the interval every mode is present. A radial sector only carries the
/// modes whose angular dependence lives in it: `f_1` in `ℓ = 0`, a single
/// representative of the `N` Lorentz modes in `ℓ = 1`.
#[derive(Debug, Clone)]
pub struct SymmetryModes {
    pub f0: Vec<StateVector>,
    pub f1: Option<StateVector>,
}

pub fn symmetry_modes(params: &ModelParams, d: &[f64], disc: &Arc<Discretization>) -> Result<SymmetryModes> {
    params.check_boost(d)?;
    match disc.geometry() {
        Geometry::Interval => {
            let f1 = disc.sample_pair(|y| mode_f1(&[y], params, d))?;
            let f0 = disc.sample_pair(|y| mode_f0(&[y], 0, params, d))?;
            Ok(SymmetryModes {
                f0: vec![f0],
                f1: Some(f1),
            })
        }
        Geometry::Radial { ell, .. } => {
            if norm2(d) != 0.0 {
                return Err(Error::Capability(
                    "radial sectors only represent d = 0; use the Lorentz pushforward for d ≠ 0".into(),
                ));
            }
            let s = params.s_p;
            let c = s * params.kappa0;
            // reduced amplitudes H with q = r^ℓ H(r²) Y_ℓ
            let constant = |a: f64, b: f64| disc.sample_pair(|_| Ok((a, b)));
            match ell {
                0 => Ok(SymmetryModes {
                    f0: vec![],
                    f1: Some(constant(c, c * (s + 1.0))?),
                }),
                1 => Ok(SymmetryModes {
                    f0: vec![constant(c, c * (s + 1.0))?],
                    f1: None,
                }),
                _ => Ok(SymmetryModes { f0: vec![], f1: None }),
            }
        }
    }
}

/// Lower bound of `κ_d` over `|y| ≤ R` and `|d − center| ≤ radius`.
///
/// Reported as a diagnostic only.
pub fn kappa_lower_bound(params: &ModelParams, center: &[f64], radius: f64) -> Result<f64> {
    let m = norm2(center) + radius;
    if !(m * params.r < 1.0) {
        return Err(Error::ParameterDomain(format!(
            "R·sup|d| < 1 violated (R·sup|d| = {})",
            m * params.r
        )));
    }
    let s = params.s_p;
    Ok(params.kappa0 * (1.0 - m * m).powf(s / 2.0) / (1.0 + m * params.r).powf(s))
}

#[cfg(test)]
#[allow(clippy::excessive_precision, clippy::approx_constant)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // 50-digit references evaluated offline from the closed form
    const KAPPA0_P3: f64 = 1.414_213_562_373_095_048_801_688_724_209_7;
    const KAPPA0_P5: f64 = 0.930_604_859_102_099_598_941_218_746_983_23;

    #[test]
    fn derived_constants() {
        let p = make_params(1, 3.0, 1, 1.0, &[0.0], -0.4).unwrap();
        assert_abs_diff_eq!(p.s_p, 1.0);
        assert_abs_diff_eq!(p.omega_p, 1.0);
        assert_abs_diff_eq!(p.kappa0, KAPPA0_P3, epsilon = 1e-15);

        let p = make_params(3, 5.0, 2, 1.0, &[0.0; 3], -0.25).unwrap();
        assert_abs_diff_eq!(p.s_p, 0.5);
        assert_abs_diff_eq!(p.omega_p, 0.5);
        assert_abs_diff_eq!(p.kappa0, KAPPA0_P5, epsilon = 1e-15);
        assert!(p.superconformal);
    }

    #[test]
    fn rejects_boost_outside_cone() {
        let err = make_params(1, 3.0, 1, 2.0, &[0.8], -0.4).unwrap_err();
        assert!(err.to_string().contains("R·|d0| < 1"), "{err}");
        let err = make_params(2, 3.0, 1, 1.0, &[0.0, 0.0], -0.4).unwrap_err();
        assert!(err.to_string().contains("k > N/2"), "{err}");
        let err = make_params(1, 3.0, 1, 1.0, &[0.0], -1.2).unwrap_err();
        assert!(err.to_string().contains("ω_0"), "{err}");
    }

    #[test]
    fn subconformal_flagged() {
        let p = make_params(3, 2.0, 2, 1.0, &[0.0; 3], -0.5).unwrap();
        assert!(!p.superconformal);
    }

    #[test]
    fn kappa_values() {
        let p = make_params(1, 3.0, 1, 1.0, &[0.0], -0.4).unwrap();
        assert_eq!(kappa_d(&[0.7], &p, &[0.0]).unwrap(), p.kappa0);
        assert_abs_diff_eq!(
            kappa_d(&[0.0], &p, &[0.6]).unwrap(),
            1.131_370_849_898_476_039,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            kappa_d(&[0.5], &p, &[0.6]).unwrap(),
            0.870_285_269_152_673_876,
            epsilon = 1e-14
        );
        assert!(matches!(kappa_d(&[-2.0], &p, &[0.6]), Err(Error::SingularDomain(_))));
    }

    #[test]
    fn u_star_values() {
        let p = make_params(1, 3.0, 1, 1.0, &[0.0], -0.4).unwrap();
        let v = u_star(0.5, &[0.3], &p, 1.0, &[0.0], &[0.0]).unwrap();
        assert_abs_diff_eq!(v, 2.0 * 2f64.sqrt(), epsilon = 1e-14);
        let mut last = 0.0;
        for t in [0.0, 0.5, 0.9, 0.99, 0.999] {
            let v = u_star(t, &[0.0], &p, 1.0, &[0.0], &[0.0]).unwrap();
            assert!(v > last);
            last = v;
        }
        assert!(u_star(1.0, &[0.0], &p, 1.0, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn potential_values() {
        let p = make_params(1, 3.0, 1, 1.0, &[0.0], -0.4).unwrap();
        assert_abs_diff_eq!(potential_v(&[0.2], &p, &[0.0]).unwrap(), 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            potential_v(&[0.2], &p, &[0.0]).unwrap(),
            3.0 * p.kappa0 * p.kappa0,
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(potential_v(&[-0.5], &p, &[0.5]).unwrap(), 8.0, epsilon = 1e-13);
        let q = make_params(1, 2.5, 1, 1.0, &[0.0], -0.4).unwrap();
        let s = q.s_p;
        assert_abs_diff_eq!(
            potential_v(&[0.9], &q, &[0.0]).unwrap(),
            (s + 1.0) * (s + 2.0),
            epsilon = 1e-13
        );
    }

    #[test]
    fn modes_at_zero_boost() {
        let p = make_params(3, 5.0, 2, 1.0, &[0.0; 3], -0.25).unwrap();
        let s = p.s_p;
        let y = [0.1, -0.2, 0.3];
        let (a, b) = mode_f1(&y, &p, &[0.0; 3]).unwrap();
        assert_abs_diff_eq!(a, s * p.kappa0, epsilon = 1e-15);
        assert_abs_diff_eq!(b, s * (s + 1.0) * p.kappa0, epsilon = 1e-15);
        for i in 0..3 {
            let (a, b) = mode_f0(&y, i, &p, &[0.0; 3]).unwrap();
            assert_abs_diff_eq!(a, s * p.kappa0 * y[i], epsilon = 1e-15);
            assert_abs_diff_eq!(b, s * (s + 1.0) * p.kappa0 * y[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn lower_bound_is_below_samples() {
        let p = make_params(1, 3.0, 1, 1.0, &[0.3], -0.4).unwrap();
        let c = kappa_lower_bound(&p, &[0.3], 0.2).unwrap();
        assert!(c > 0.0);
        for d in [0.1, 0.3, 0.5] {
            for y in [-1.0, 0.0, 1.0] {
                assert!(kappa_d(&[y], &p, &[d]).unwrap() >= c - 1e-15);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn kappa0_identity(p in 1.05f64..20.0) {
                let prm = make_params(1, p, 1, 1.0, &[0.0], -(1.0f64.min(2.0 / (p - 1.0))) / 2.0).unwrap();
                let lhs = prm.kappa0.powf(p - 1.0) * (p - 1.0).powi(2) / (2.0 * (p + 1.0));
                prop_assert!((lhs - 1.0).abs() <= 1e-14);
            }

            #[test]
            fn potential_matches_kappa(d in -0.8f64..0.8, y in -1.0f64..1.0) {
                let prm = make_params(1, 3.0, 1, 1.0, &[0.0], -0.4).unwrap();
                let v = potential_v(&[y], &prm, &[d]).unwrap();
                let k = kappa_d(&[y], &prm, &[d]).unwrap();
                prop_assert!((v - 3.0 * k * k).abs() <= 1e-12 * v.max(1.0));
            }

            #[test]
            fn f1_ratio_identity(d in -0.8f64..0.8, y in -1.0f64..1.0, p in 1.5f64..9.0) {
                let prm = make_params(1, p, 1, 1.0, &[0.0], -(1.0f64.min(2.0 / (p - 1.0))) / 2.0).unwrap();
                let (a, b) = mode_f1(&[y], &prm, &[d]).unwrap();
                let ratio = (prm.s_p + 1.0) / (1.0 + d * y);
                prop_assert!((b - ratio * a).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }
}
