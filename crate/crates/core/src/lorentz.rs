//! Lorentz boosts in physical coordinates and in similarity variables.
//!
//! With `γ = (1 − |β|²)^{−1/2}` the self-similar boost of a field `U(s, y)` is
//!
//! ```text
//! (T_β U)(s', y') = (γ (1 − β·y'))^{−s_p} U(s, y),
//! s = s' − log(1 − β·y'),
//! y = (y' − γβ + γ²(β·y') β / (1 + γ)) / (γ (1 − β·y')).
//! ```
//!
//! `T_β` maps the unit ball onto itself and sends `κ_β` to the constant `κ_0`.
//! The boosts do not form a group in these variables: composing with the
//! opposite boost gives back `U` only up to a shift of the time origin,
//! `T_{−β} T_β U (s, y) = U(s + 2 log γ, y)`. [`BoostChart::inverse`] accounts
//! for that shift.

use crate::discretization::{Discretization, Geometry};
use crate::error::{Error, Result};
use crate::params::{dot, gamma, kappa_d, ModelParams};
use nalgebra::DVector;
use std::sync::Arc;

/// Which way a chart maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `d`-frame to rest frame.
    Forward,
    /// Rest frame back to the `d`-frame.
    Inverse,
}

/// A boost with velocity `β`, `|β| < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostChart {
    beta: Vec<f64>,
    gamma: f64,
    direction: Direction,
}

impl BoostChart {
    pub fn new(beta: &[f64]) -> Result<Self> {
        let gamma = gamma(beta)?;
        Ok(BoostChart {
            beta: beta.to_vec(),
            gamma,
            direction: Direction::Forward,
        })
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// The chart undoing this one.
    pub fn inverse(&self) -> Self {
        let direction = match self.direction {
            Direction::Forward => Direction::Inverse,
            Direction::Inverse => Direction::Forward,
        };
        BoostChart {
            beta: self.beta.clone(),
            gamma: self.gamma,
            direction,
        }
    }

    // velocity actually applied
    fn velocity(&self) -> Vec<f64> {
        match self.direction {
            Direction::Forward => self.beta.clone(),
            Direction::Inverse => self.beta.iter().map(|b| -b).collect(),
        }
    }

    fn time_shift(&self) -> f64 {
        match self.direction {
            Direction::Forward => 0.0,
            Direction::Inverse => -2.0 * self.gamma.ln(),
        }
    }

    /// The point `(s, y)` whose value feeds `(s', y')`, and the prefactor.
    pub fn pull_back(&self, s_prime: f64, y_prime: &[f64], s_p: f64) -> Result<(f64, Vec<f64>, f64)> {
        if y_prime.len() != self.beta.len() {
            return Err(Error::Dimension {
                expected: self.beta.len(),
                got: y_prime.len(),
            });
        }
        let b = self.velocity();
        let g = self.gamma;
        let by = dot(&b, y_prime);
        let a = 1.0 - by;
        if !(a > 0.0) {
            return Err(Error::SingularDomain(format!("1 − β·y' = {a} ≤ 0")));
        }
        let y: Vec<f64> = y_prime
            .iter()
            .zip(&b)
            .map(|(yi, bi)| (yi - g * bi + g * g * by * bi / (1.0 + g)) / (g * a))
            .collect();
        let s = s_prime + self.time_shift() - a.ln();
        Ok((s, y, (g * a).powf(-s_p)))
    }
}

/// Physical Lorentz boost `(t, x) ↦ (t', x')`.
pub fn boost_physical(t: f64, x: &[f64], chart: &BoostChart) -> Result<(f64, Vec<f64>)> {
    if x.len() != chart.beta.len() {
        return Err(Error::Dimension {
            expected: chart.beta.len(),
            got: x.len(),
        });
    }
    let b = chart.velocity();
    let g = chart.gamma;
    let bb = dot(&b, &b);
    let bx = dot(&b, x);
    let tp = g * (t - bx);
    let xp = x
        .iter()
        .zip(&b)
        .map(|(xi, bi)| {
            let par = if bb > 0.0 { (g - 1.0) * bx * bi / bb } else { 0.0 };
            xi + par - g * bi * t
        })
        .collect();
    Ok((tp, xp))
}

/// A scalar field of the spatial similarity variable.
pub trait Field: Sync {
    fn eval(&self, y: &[f64]) -> Result<f64>;
}

impl<F> Field for F
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    fn eval(&self, y: &[f64]) -> Result<f64> {
        self(y)
    }
}

/// A field of `(s, y)`.
pub trait SelfSimField: Sync {
    fn eval(&self, s: f64, y: &[f64]) -> Result<f64>;
}

impl<F> SelfSimField for F
where
    F: Fn(f64, &[f64]) -> Result<f64> + Sync,
{
    fn eval(&self, s: f64, y: &[f64]) -> Result<f64> {
        self(s, y)
    }
}

/// A time-independent field viewed as a field of `(s, y)`.
pub struct Stationary<F>(pub F);

impl<F: Field> SelfSimField for Stationary<F> {
    fn eval(&self, _s: f64, y: &[f64]) -> Result<f64> {
        self.0.eval(y)
    }
}

/// Grid samples on the interval, evaluated by barycentric interpolation.
#[derive(Debug, Clone)]
pub struct GridField {
    disc: Arc<Discretization>,
    values: DVector<f64>,
}

impl GridField {
    pub fn new(disc: Arc<Discretization>, values: DVector<f64>) -> Result<Self> {
        if disc.geometry() != Geometry::Interval {
            return Err(Error::Capability("grid fields need the interval geometry".into()));
        }
        if values.len() != disc.len() {
            return Err(Error::Dimension {
                expected: disc.len(),
                got: values.len(),
            });
        }
        Ok(GridField { disc, values })
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    /// Size of the two highest Chebyshev coefficients, a proxy for the
    /// interpolation error of the field.
    pub fn interpolation_error(&self) -> f64 {
        let m = self.disc.m();
        let r = self.disc.radius();
        let t: Vec<f64> = self
            .disc
            .nodes()
            .iter()
            .map(|y| (y / r).clamp(-1.0, 1.0).acos())
            .collect();
        let coef = |k: usize| {
            let mut acc = 0.0;
            for (j, (th, v)) in t.iter().zip(self.values.iter()).enumerate() {
                let w = if j == 0 || j == m { 0.5 } else { 1.0 };
                acc += w * v * (k as f64 * th).cos();
            }
            let scale = if k == m { 1.0 } else { 2.0 };
            (scale * acc / m as f64).abs()
        };
        coef(m).max(coef(m - 1))
    }
}

impl Field for GridField {
    fn eval(&self, y: &[f64]) -> Result<f64> {
        if y.len() != 1 {
            return Err(Error::Dimension {
                expected: 1,
                got: y.len(),
            });
        }
        self.disc.interpolate(&self.values, y[0])
    }
}

/// `T_β U`, evaluated lazily.
pub struct Boosted<U> {
    u: U,
    chart: BoostChart,
    s_p: f64,
}

impl<U: SelfSimField> SelfSimField for Boosted<U> {
    fn eval(&self, s_prime: f64, y_prime: &[f64]) -> Result<f64> {
        let (s, y, pre) = self.chart.pull_back(s_prime, y_prime, self.s_p)?;
        Ok(pre * self.u.eval(s, &y)?)
    }
}

/// The Lorentz transform of `u` in similarity variables.
pub fn boost_selfsim<U: SelfSimField>(u: U, chart: &BoostChart, params: &ModelParams) -> Boosted<U> {
    Boosted {
        u,
        chart: chart.clone(),
        s_p: params.s_p,
    }
}

/// `ψ(y') = (1 − d·y')^{−λ} (γ(1 − d·y'))^{−s_p} φ(y(y'))`.
pub struct Pushforward<F> {
    phi: F,
    chart: BoostChart,
    lambda: f64,
    scale: f64,
    s_p: f64,
    radius: f64,
}

impl<F: Field> Field for Pushforward<F> {
    fn eval(&self, y_prime: &[f64]) -> Result<f64> {
        let (_, y, pre) = self.chart.pull_back(0.0, y_prime, self.s_p)?;
        let ny = dot(&y, &y).sqrt();
        if ny > self.radius * (1.0 + 1e-12) {
            return Err(Error::Extrapolation(format!(
                "pulled-back point |y| = {ny} outside the ball of radius {}",
                self.radius
            )));
        }
        let a = 1.0 - dot(&self.chart.velocity(), y_prime);
        Ok(self.scale * a.powf(-self.lambda) * pre * self.phi.eval(&y)?)
    }
}

/// Transport an eigenfunction of the `d`-frame problem to the rest frame.
pub fn eigenfunction_pushforward<F: Field>(
    phi: F,
    lambda: f64,
    params: &ModelParams,
    d: &[f64],
) -> Result<Pushforward<F>> {
    params.check_boost(d)?;
    Ok(Pushforward {
        phi,
        chart: BoostChart::new(d)?,
        lambda,
        scale: 1.0,
        s_p: params.s_p,
        radius: params.r,
    })
}

/// Transport a rest-frame eigenfunction to the `d`-frame; inverse of
/// [`eigenfunction_pushforward`] at the same `λ`.
pub fn eigenfunction_pullback<F: Field>(
    psi: F,
    lambda: f64,
    params: &ModelParams,
    d: &[f64],
) -> Result<Pushforward<F>> {
    params.check_boost(d)?;
    let g = gamma(d)?;
    let minus: Vec<f64> = d.iter().map(|x| -x).collect();
    Ok(Pushforward {
        phi: psi,
        chart: BoostChart::new(&minus)?,
        lambda,
        scale: g.powf(-2.0 * lambda),
        s_p: params.s_p,
        radius: params.r,
    })
}

/// Sample any field on the interval nodes.
pub fn sample_field<F: Field>(f: &F, disc: &Discretization) -> Result<DVector<f64>> {
    disc.sample_function(|y| f.eval(&[y]))
}

/// `max |T_d κ_d − κ_0|` over `points` at `s' = 0`.
pub fn boost_identity_defect(params: &ModelParams, d: &[f64], points: &[Vec<f64>]) -> Result<f64> {
    let prm = params.clone();
    let dv = d.to_vec();
    let kd = Stationary(move |y: &[f64]| kappa_d(y, &prm, &dv));
    let v = boost_selfsim(kd, &BoostChart::new(d)?, params);
    points
        .iter()
        .try_fold(0.0f64, |m, y| Ok(m.max((v.eval(0.0, y)? - params.kappa0).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_disc;
    use crate::params::{kappa_d, make_params, mode_f0, mode_f1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p3() -> ModelParams {
        make_params(1, 3.0, 1, 1.0, &[0.0], -0.4).unwrap()
    }

    #[test]
    fn physical_example() {
        let c = BoostChart::new(&[0.6]).unwrap();
        let (t, x) = boost_physical(1.0, &[0.0], &c).unwrap();
        assert!((t - 1.25).abs() < 1e-15);
        assert!((x[0] + 0.75).abs() < 1e-15);
    }

    #[test]
    fn physical_identity_and_domain() {
        let c = BoostChart::new(&[0.0, 0.0]).unwrap();
        let (t, x) = boost_physical(0.3, &[0.1, -0.2], &c).unwrap();
        assert_eq!((t, x), (0.3, vec![0.1, -0.2]));
        assert!(matches!(BoostChart::new(&[1.0]), Err(Error::ParameterDomain(_))));
    }

    #[test]
    fn physical_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = BoostChart::new(&[0.3, -0.5, 0.2]).unwrap();
        let inv = c.inverse();
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let t: f64 = rng.gen_range(-2.0..2.0);
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (tp, xp) = boost_physical(t, &x, &c).unwrap();
            let (tb, xb) = boost_physical(tp, &xp, &inv).unwrap();
            worst = worst.max((tb - t).abs());
            for (a, b) in xb.iter().zip(&x) {
                worst = worst.max((a - b).abs());
            }
        }
        assert!(worst <= 1e-12, "{worst}");
    }

    #[test]
    fn kappa_boosts_to_constant() {
        let prm = p3();
        let disc = build_disc(Geometry::Interval, 32, 1.0, 1).unwrap();
        for d in [0.3, 0.6] {
            let prm2 = prm.clone();
            let kd = Stationary(move |y: &[f64]| kappa_d(y, &prm2, &[d]));
            let c = BoostChart::new(&[d]).unwrap();
            let v = boost_selfsim(kd, &c, &prm);
            for y in disc.nodes() {
                assert!((v.eval(0.0, &[*y]).unwrap() - prm.kappa0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn boost_zero_is_identity() {
        let prm = p3();
        let c = BoostChart::new(&[0.0]).unwrap();
        let u = |s: f64, y: &[f64]| Ok((s * y[0]).sin() + y[0]);
        let v = boost_selfsim(u, &c, &prm);
        assert_eq!(v.eval(0.7, &[0.2]).unwrap(), u(0.7, &[0.2]).unwrap());
    }

    #[test]
    fn selfsim_round_trip_on_grid() {
        let prm = p3();
        let disc = build_disc(Geometry::Interval, 48, 1.0, 1).unwrap();
        let u0 = disc.sample_function(|y| Ok((2.0 * y).cos() + 0.3 * y)).unwrap();
        let grid = GridField::new(disc.clone(), u0.clone()).unwrap();
        let c = BoostChart::new(&[0.4]).unwrap();
        let there = boost_selfsim(Stationary(grid), &c, &prm);
        let back = boost_selfsim(there, &c.inverse(), &prm);
        for (y, v) in disc.nodes().iter().zip(u0.iter()) {
            if y.abs() <= 0.9 {
                assert!((back.eval(0.0, &[*y]).unwrap() - v).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn pushforward_maps_modes() {
        let prm = p3();
        let d = [0.4];
        let disc = build_disc(Geometry::Interval, 48, 1.0, 1).unwrap();
        let f1 = disc.sample_function(|y| Ok(mode_f1(&[y], &prm, &d)?.0)).unwrap();
        let psi = eigenfunction_pushforward(GridField::new(disc.clone(), f1).unwrap(), 1.0, &prm, &d).unwrap();
        let vals = sample_field(&psi, &disc).unwrap();
        let mean = vals.mean();
        assert!((vals.add_scalar(-mean)).amax() <= 1e-10 * mean.abs());
        // flat value γ² s κ_0
        let g2 = 1.0 / (1.0 - 0.16);
        assert!((mean - g2 * prm.s_p * prm.kappa0).abs() <= 1e-10);

        let f0 = disc.sample_function(|y| Ok(mode_f0(&[y], 0, &prm, &d)?.0)).unwrap();
        let psi = eigenfunction_pushforward(GridField::new(disc.clone(), f0).unwrap(), 0.0, &prm, &d).unwrap();
        let vals = sample_field(&psi, &disc).unwrap();
        let slope = vals[disc.m()] - vals[disc.m() / 2];
        for (y, v) in disc.nodes().iter().zip(vals.iter()) {
            assert!((v - slope * y).abs() <= 1e-10);
        }
    }

    #[test]
    fn pushforward_pullback_compose() {
        let prm = p3();
        let d = [0.4];
        let disc = build_disc(Geometry::Interval, 48, 1.0, 1).unwrap();
        let phi = disc.sample_function(|y| Ok((1.0 + 0.5 * y).exp())).unwrap();
        let lambda = -0.7;
        let psi =
            eigenfunction_pushforward(GridField::new(disc.clone(), phi.clone()).unwrap(), lambda, &prm, &d).unwrap();
        let psi_grid = GridField::new(disc.clone(), sample_field(&psi, &disc).unwrap()).unwrap();
        let back = eigenfunction_pullback(psi_grid, lambda, &prm, &d).unwrap();
        for (y, v) in disc.nodes().iter().zip(phi.iter()) {
            if y.abs() <= 0.9 {
                assert!((back.eval(&[*y]).unwrap() - v).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn pushforward_zero_boost_identity() {
        let prm = p3();
        let f = |y: &[f64]| Ok(y[0].powi(3) - 0.2);
        let psi = eigenfunction_pushforward(f, 0.3, &prm, &[0.0]).unwrap();
        assert_eq!(psi.eval(&[0.5]).unwrap(), f(&[0.5]).unwrap());
    }

    #[test]
    fn pushforward_extrapolates_outside() {
        let disc = build_disc(Geometry::Interval, 16, 1.0, 1).unwrap();
        let g = GridField::new(disc.clone(), DVector::from_element(17, 1.0)).unwrap();
        assert!(matches!(g.eval(&[1.5]), Err(Error::Extrapolation(_))));
        assert!(g.interpolation_error() < 1e-14);
    }
}
