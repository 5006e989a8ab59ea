//! Choosing the blow-up time and rapidity for perturbed data.
//!
//! Data `(U, ∂_t U)` close to the ODE profile are written in similarity
//! variables around `κ_d` after dilating by `T` and boosting by `d`:
//!
//! ```text
//! Q_{d,T}(f) = (f + f_{d0})^T − f_d,   g^T(y) = (T^s g1(T y), T^{s+1} g2(T y)).
//! ```
//!
//! The stabilized flow attaches a correction `C_d(Q, q)` in the span of the
//! symmetry modes. Shooting solves `C = 0` for `(T, d)` with Newton's method
//! on the coordinates of `C`. Only `N = 1` is implemented.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretization::{build_disc, Discretization, Geometry, StateVector};
use crate::error::{Error, Result};
use crate::evolution::{
    evolve_nonlinear, fit_decay_rate, stabilized_fixed_point, DecayFit, EvolutionTrace, FpOpts, LinearContext, Rk4Opts,
};
use crate::params::{mode_f0, mode_f1, profile_pair, ModelParams};

/// A pair-valued function of `y`, evaluated wherever the dilation needs it.
pub type PairFn<'a> = dyn Fn(f64) -> Result<(f64, f64)> + Sync + 'a;

/// A random trigonometric pair with decaying coefficients.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothPair {
    pub c1: Vec<(f64, f64)>,
    pub c2: Vec<(f64, f64)>,
}

impl SmoothPair {
    pub fn random(seed: u64, modes: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |j: usize| {
            let w = 1.0 / (1.0 + j as f64).powi(2);
            (rng.gen_range(-1.0..1.0) * w, rng.gen_range(-1.0..1.0) * w)
        };
        let c1 = (0..modes).map(&mut draw).collect();
        let c2 = (0..modes).map(&mut draw).collect();
        SmoothPair { c1, c2 }
    }

    pub fn eval(&self, y: f64) -> (f64, f64) {
        let f = |c: &[(f64, f64)]| {
            c.iter()
                .enumerate()
                .map(|(j, (a, b))| a * (j as f64 * y).cos() + b * (j as f64 * y).sin())
                .sum::<f64>()
        };
        (f(&self.c1), f(&self.c2))
    }

    /// Rescale so the sampled pair has norm `target` on `disc`.
    pub fn normalized(mut self, disc: &Arc<Discretization>, target: f64) -> Result<Self> {
        let n = disc.sample_pair(|y| Ok(self.eval(y)))?.norm()?;
        if !(n > 0.0) {
            return Err(Error::Degenerate("zero perturbation cannot be normalized".into()));
        }
        let a = target / n;
        for c in self.c1.iter_mut().chain(self.c2.iter_mut()) {
            c.0 *= a;
            c.1 *= a;
        }
        Ok(self)
    }
}

fn require_interval(params: &ModelParams) -> Result<()> {
    if params.n != 1 {
        return Err(Error::Capability(format!(
            "shooting is implemented for N = 1 only (got N = {})",
            params.n
        )));
    }
    Ok(())
}

/// `Q_{d,T}(f)` sampled on `disc`.
pub fn initial_data_q(
    f: &PairFn,
    params: &ModelParams,
    d: f64,
    t: f64,
    disc: &Arc<Discretization>,
) -> Result<StateVector> {
    require_interval(params)?;
    if !(t > 0.0) {
        return Err(Error::ParameterDomain(format!("T > 0 required, got {t}")));
    }
    params.check_boost(&[d])?;
    let s = params.s_p;
    let (ts, ts1) = (t.powf(s), t.powf(s + 1.0));
    let d0 = params.d0.clone();
    disc.sample_pair(|y| {
        let (a, b) = f(t * y)?;
        let (k0, k1) = profile_pair(&[t * y], params, &d0)?;
        let (kd, kd1) = profile_pair(&[y], params, &[d])?;
        Ok((ts * (a + k0) - kd, ts1 * (b + k1) - kd1))
    })
}

/// `‖Q_{d,T}(0) − (T−1) f_{1,d} − (d−d0) f_{0,d}‖`.
pub fn expansion_remainder(params: &ModelParams, d: f64, t: f64, disc: &Arc<Discretization>) -> Result<f64> {
    let zero = |_: f64| Ok((0.0, 0.0));
    let q = initial_data_q(&zero, params, d, t, disc)?;
    let dd = d - params.d0[0];
    let lin = disc.sample_pair(|y| {
        let (a1, b1) = mode_f1(&[y], params, &[d])?;
        let (a0, b0) = mode_f0(&[y], 0, params, &[d])?;
        Ok(((t - 1.0) * a1 + dd * a0, (t - 1.0) * b1 + dd * b0))
    })?;
    q.axpy(-1.0, &lin).norm()
}

/// Fitted order of the expansion remainder along `(T, d) = (1 + a ε, d0 + b ε)`.
pub fn expansion_order(params: &ModelParams, disc: &Arc<Discretization>, dir: (f64, f64), eps: &[f64]) -> Result<f64> {
    if eps.len() < 2 {
        return Err(Error::Precondition("at least two step sizes required".into()));
    }
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .map(|e| {
            let r = expansion_remainder(params, params.d0[0] + dir.1 * e, 1.0 + dir.0 * e, disc)?;
            Ok((e.ln(), r.ln()))
        })
        .collect::<Result<_>>()?;
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// Which map Newton's method drives to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShootingMode {
    /// Coordinates of the correction `C_d(Q, q)` of the stabilized flow.
    Stabilized,
    /// Coordinates of `q(S)` from plain RK4, with the growing one scaled by `e^{−S}`.
    Direct,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShootOpts {
    pub m: usize,
    pub h: f64,
    pub fp: FpOpts,
    pub mode: ShootingMode,
    pub direct_horizon: f64,
    pub tol_shoot: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    /// Smallness budget: `‖f‖ ≤ delta / c_const²`.
    pub delta: f64,
    pub c_const: f64,
    /// Decay is certified as `‖q(s)‖ ≤ decay_factor ‖f‖ e^{(−ω_p + epsilon) s}` up to `s_check`.
    pub epsilon: f64,
    pub decay_factor: f64,
    pub s_check: f64,
}

impl Default for ShootOpts {
    fn default() -> Self {
        ShootOpts {
            m: 32,
            h: 0.02,
            fp: FpOpts::default(),
            mode: ShootingMode::Stabilized,
            direct_horizon: 8.0,
            tol_shoot: 1e-10,
            max_iter: 20,
            fd_step: 1e-6,
            delta: 1e-2,
            c_const: 1.0,
            epsilon: 0.1,
            decay_factor: 2.0,
            s_check: 10.0,
        }
    }
}

/// Decay of the trajectory at the shooting solution.
#[derive(Debug, Clone, Serialize)]
pub struct DecayCheck {
    /// `max_s ‖q(s)‖ e^{(ω_p − ε) s} / ‖f‖` over `[0, s_check]`.
    pub constant: f64,
    pub verified: bool,
    pub fit: Option<DecayFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShootingResult {
    pub t_star: f64,
    pub d_star: f64,
    pub amplitudes: Vec<f64>,
    pub iterations: usize,
    /// `[T, d, max |a|]` per Newton iterate.
    pub history: Vec<[f64; 3]>,
    pub f_norm: f64,
    pub decay: DecayCheck,
    pub trace: EvolutionTrace,
}

struct Shooter<'a> {
    f: &'a PairFn<'a>,
    params: &'a ModelParams,
    disc: Arc<Discretization>,
    opts: &'a ShootOpts,
}

impl Shooter<'_> {
    fn context(&self, d: f64) -> Result<LinearContext> {
        LinearContext::new(self.params, &[d], &self.disc, self.opts.h)
    }

    fn amplitudes(&self, t: f64, d: f64) -> Result<Vec<f64>> {
        let ctx = self.context(d)?;
        let u = initial_data_q(self.f, self.params, d, t, &self.disc)?;
        match self.opts.mode {
            ShootingMode::Stabilized => Ok(stabilized_fixed_point(&u, &ctx, &self.opts.fp)?.amplitudes),
            ShootingMode::Direct => {
                let s = self.opts.direct_horizon;
                let tr = evolve_nonlinear(&u, &ctx.generator, s, &Rk4Opts::default(), Some(&ctx.frame))?;
                if tr.diverged {
                    return Err(Error::Overflow {
                        s: *tr.s.last().unwrap_or(&0.0),
                        detail: "direct shooting trajectory left the perturbative regime".into(),
                    });
                }
                let q = tr.states.last().expect("trace has states");
                let mut a = ctx.frame.amplitudes(q);
                a[0] *= (-s).exp();
                Ok(a)
            }
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton iteration for `(T*, d*)` with a finite-difference Jacobian.
pub fn solve_parameters(f: &PairFn, params: &ModelParams, opts: &ShootOpts) -> Result<ShootingResult> {
    require_interval(params)?;
    let disc = build_disc(Geometry::Interval, opts.m, params.r, params.k)?;
    let f_norm = disc.sample_pair(f)?.norm()?;
    let budget = opts.delta / (opts.c_const * opts.c_const);
    if f_norm > budget {
        return Err(Error::Precondition(format!(
            "‖f‖ = {f_norm:e} exceeds δ/C² = {budget:e}"
        )));
    }
    let sh = Shooter {
        f,
        params,
        disc: disc.clone(),
        opts,
    };
    let d0 = params.d0[0];

    // linear prediction: C ≈ P f + (T − 1) f_1 + (d − d0) f_0
    let ctx0 = sh.context(d0)?;
    let pf = ctx0
        .frame
        .amplitudes(&(&ctx0.projectors.pfull * disc.sample_pair(f)?.stacked()));
    let (mut t, mut d) = (1.0 - pf[0], d0 - pf[1]);

    let mut a = sh.amplitudes(t, d)?;
    let mut history = vec![[t, d, max_abs(&a)]];
    let mut it = 0;
    while max_abs(&a) > opts.tol_shoot {
        if it == opts.max_iter {
            return Err(Error::ShootingFailure {
                iterations: it,
                history: history.iter().map(|h| h.to_vec()).collect(),
            });
        }
        it += 1;
        // the direct map amplifies (T, d) offsets by e^S before nonlinear effects set in
        let e = match opts.mode {
            ShootingMode::Stabilized => opts.fd_step,
            ShootingMode::Direct => opts.fd_step * (-opts.direct_horizon).exp(),
        };
        let (ja, jb) = rayon::join(|| sh.amplitudes(t + e, d), || sh.amplitudes(t, d + e));
        let (ja, jb) = (ja?, jb?);
        let j = nalgebra::Matrix2::new(
            (ja[0] - a[0]) / e,
            (jb[0] - a[0]) / e,
            (ja[1] - a[1]) / e,
            (jb[1] - a[1]) / e,
        );
        let step = j.try_inverse().ok_or_else(|| Error::ShootingFailure {
            iterations: it,
            history: history.iter().map(|h| h.to_vec()).collect(),
        })? * nalgebra::Vector2::new(a[0], a[1]);
        // damped update
        let mut lam = 1.0;
        let mut accepted = None;
        for _ in 0..6 {
            let (tn, dn) = (t - lam * step[0], d - lam * step[1]);
            if tn > 0.0 && dn.abs() < 1.0 {
                if let Ok(an) = sh.amplitudes(tn, dn) {
                    if max_abs(&an) < max_abs(&a) {
                        accepted = Some((tn, dn, an));
                        break;
                    }
                }
            }
            lam /= 2.0;
        }
        match accepted {
            Some((tn, dn, an)) => {
                t = tn;
                d = dn;
                a = an;
                history.push([t, d, max_abs(&a)]);
            }
            None => {
                return Err(Error::ShootingFailure {
                    iterations: it,
                    history: history.iter().map(|h| h.to_vec()).collect(),
                })
            }
        }
    }

    // decay of the stabilized trajectory at the solution
    let ctx = sh.context(d)?;
    let u = initial_data_q(f, params, d, t, &disc)?;
    let sol = stabilized_fixed_point(&u, &ctx, &opts.fp)?;
    let rate = -params.omega_p + opts.epsilon;
    let scale = if f_norm > 0.0 { f_norm } else { 1.0 };
    let constant = sol
        .trace
        .s
        .iter()
        .zip(&sol.trace.norms)
        .filter(|(s, _)| **s <= opts.s_check + 1e-12)
        .map(|(s, v)| v * (-rate * s).exp() / scale)
        .fold(0.0, f64::max);
    let fit = fit_decay_rate(&sol.trace.s, &sol.trace.norms, 2.0).ok();
    Ok(ShootingResult {
        t_star: t,
        d_star: d,
        amplitudes: a,
        iterations: it,
        history,
        f_norm,
        decay: DecayCheck {
            constant,
            verified: constant <= opts.decay_factor,
            fit,
        },
        trace: sol.trace,
    })
}

/// Fate of a solution near the ODE blow-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TrappingKind {
    Trapped,
    BlowUp,
    Decay,
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectObservation {
    pub diverged: bool,
    pub decayed: bool,
    pub s_end: f64,
    pub final_norm: f64,
    /// Norm of the full solution `f_{d0} + q` at the end relative to the start.
    pub relative_size: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub kind: TrappingKind,
    pub b_star: f64,
    pub t_star: f64,
    pub d_star: f64,
    pub direct: DirectObservation,
    pub consistent: bool,
    pub decay_constant: f64,
    pub decay_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyOpts {
    pub shoot: ShootOpts,
    pub tol_b: f64,
    pub horizon: f64,
    pub decay_threshold: f64,
}

impl Default for ClassifyOpts {
    fn default() -> Self {
        ClassifyOpts {
            shoot: ShootOpts::default(),
            tol_b: 1e-6,
            horizon: 30.0,
            decay_threshold: 1e-6,
        }
    }
}

/// Classify data `(U, ∂_s U)` given in similarity variables at `s = 0`.
///
/// `f = (U − κ_{d0}, ∂_s U + y ∂_y U + s U − s κ_{d0}/(1 + d0 y))`.
pub fn classify_trapping(u0: &PairFn, params: &ModelParams, opts: &ClassifyOpts) -> Result<Classification> {
    require_interval(params)?;
    let s = params.s_p;
    let d0 = params.d0.clone();
    let d0f = d0.clone();
    let hfd = 1e-4;
    let f = move |y: f64| -> Result<(f64, f64)> {
        let (u, us) = u0(y)?;
        let du = {
            let g = |x: f64| u0(x).map(|v| v.0);
            (8.0 * (g(y + hfd)? - g(y - hfd)?) - (g(y + 2.0 * hfd)? - g(y - 2.0 * hfd)?)) / (12.0 * hfd)
        };
        let (k, k2) = profile_pair(&[y], params, &d0f)?;
        Ok((u - k, us + y * du + s * u - k2))
    };
    let sh = solve_parameters(&f, params, &opts.shoot)?;
    let b_star = 1.0 / sh.t_star - 1.0;
    let kind = if b_star.abs() <= opts.tol_b {
        TrappingKind::Trapped
    } else if b_star > 0.0 {
        TrappingKind::BlowUp
    } else {
        TrappingKind::Decay
    };

    // direct nonlinear evolution around κ_{d0}
    let disc = build_disc(Geometry::Interval, opts.shoot.m, params.r, params.k)?;
    let ctx = LinearContext::new(params, &d0, &disc, opts.shoot.h)?;
    let q0 = disc.sample_pair(&f)?;
    let tr = evolve_nonlinear(&q0, &ctx.generator, opts.horizon, &Rk4Opts::default(), None)?;
    let kap = disc.sample_pair(|y| profile_pair(&[y], params, &d0))?;
    let full =
        |q: &DVector<f64>| -> Result<f64> { StateVector::from_stacked(disc.clone(), &(q + kap.stacked()))?.norm() };
    let start = full(&tr.states[0])?;
    let end = full(tr.states.last().expect("trace has states"))?;
    let relative_size = end / start;
    let decayed = !tr.diverged && relative_size <= opts.decay_threshold;
    let direct = DirectObservation {
        diverged: tr.diverged,
        decayed,
        s_end: *tr.s.last().unwrap_or(&0.0),
        final_norm: *tr.norms.last().unwrap_or(&0.0),
        relative_size,
    };
    let consistent = match kind {
        TrappingKind::BlowUp => direct.diverged,
        TrappingKind::Decay => direct.decayed,
        TrappingKind::Trapped => !direct.diverged && !direct.decayed,
    };
    if !consistent {
        return Err(Error::Inconsistency(format!(
            "shooting predicts {kind:?} (b* = {b_star:e}) but direct evolution gave diverged = {}, relative size {relative_size:e}",
            direct.diverged
        )));
    }
    Ok(Classification {
        kind,
        b_star,
        t_star: sh.t_star,
        d_star: sh.d_star,
        direct,
        consistent,
        decay_constant: sh.decay.constant,
        decay_rate: sh.decay.fit.map(|f| f.rate),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::make_params;

    fn prm(d0: f64) -> ModelParams {
        make_params(1, 3.0, 1, 1.0, &[d0], -0.4).unwrap()
    }

    #[test]
    fn zero_data_at_rest_is_zero() {
        let p = prm(0.3);
        let disc = build_disc(Geometry::Interval, 24, 1.0, 1).unwrap();
        let q = initial_data_q(&|_| Ok((0.0, 0.0)), &p, 0.3, 1.0, &disc).unwrap();
        assert!(q.max_abs() <= 1e-14);
    }

    #[test]
    fn expansion_is_second_order() {
        let p = prm(0.3);
        let disc = build_disc(Geometry::Interval, 24, 1.0, 1).unwrap();
        for dir in [(1.0, 0.0), (0.0, 1.0), (0.7, -0.5)] {
            let o = expansion_order(&p, &disc, dir, &[1e-2, 5e-3, 2.5e-3, 1.25e-3]).unwrap();
            assert!((1.9..=2.1).contains(&o), "{dir:?} {o}");
        }
    }

    #[test]
    fn constant_data_match_ode_blowup_time() {
        // u'' = u³ from u = (1 ± h)√2, u' = (1 ± h)√2 blows up at
        // T = ∫_{u0}^∞ du / sqrt(2E + u⁴/2), evaluated to 40 digits
        let p = prm(0.0);
        for (h, exact) in [(1e-3, 0.999_200_666_092_815_2), (-1e-3, 1.000_800_667_241_534_1)] {
            let f = |_: f64| Ok((h * p.kappa0, h * p.kappa0 * p.s_p));
            let r = solve_parameters(&f, &p, &ShootOpts::default()).unwrap();
            assert!((r.t_star - exact).abs() <= 1e-9, "{} {}", r.t_star, exact);
            assert!(r.d_star.abs() <= 1e-12);
        }
    }

    #[test]
    fn random_data_shoot_and_decay() {
        let p = prm(0.3);
        let disc = build_disc(Geometry::Interval, 32, 1.0, 1).unwrap();
        let g = SmoothPair::random(7, 6).normalized(&disc, 1e-4).unwrap();
        let f = move |y: f64| Ok(g.eval(y));
        let r = solve_parameters(&f, &p, &ShootOpts::default()).unwrap();
        assert!(max_abs(&r.amplitudes) <= 1e-10);
        assert!(r.iterations <= 6, "{:?}", r.history);
        assert!(r.decay.verified, "{}", r.decay.constant);
        let direct = solve_parameters(
            &f,
            &p,
            &ShootOpts {
                mode: ShootingMode::Direct,
                ..ShootOpts::default()
            },
        )
        .unwrap();
        assert!(
            (direct.t_star - r.t_star).abs() <= 1e-6,
            "{} {}",
            direct.t_star,
            r.t_star
        );
        assert!((direct.d_star - r.d_star).abs() <= 1e-6);
    }

    #[test]
    fn large_data_is_rejected() {
        let p = prm(0.0);
        let r = solve_parameters(&|_| Ok((1.0, 0.0)), &p, &ShootOpts::default());
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn trichotomy() {
        for d0 in [0.0, 0.3] {
            let p = prm(d0);
            for (h, want) in [
                (0.0, TrappingKind::Trapped),
                (1e-3, TrappingKind::BlowUp),
                (-1e-3, TrappingKind::Decay),
            ] {
                let pp = p.clone();
                let u0 = move |y: f64| Ok(((1.0 + h) * crate::params::kappa_d(&[y], &pp, &pp.d0)?, 0.0));
                let c = classify_trapping(&u0, &p, &ClassifyOpts::default()).unwrap();
                assert_eq!(c.kind, want, "d0 = {d0}, h = {h}: {c:?}");
                assert!(c.consistent);
            }
        }
    }
}
