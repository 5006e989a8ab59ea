//! Time evolution in similarity variables.
//!
//! The perturbation `q` of `κ_d` obeys `∂_s q = L_d q + N_d(q)` with
//!
//! ```text
//! N_d(q) = (0, |κ_d + q1|^{p−1}(κ_d + q1) − κ_d^p − p κ_d^{p−1} q1).
//! ```
//!
//! Linear runs use the dense exponential `exp(hG)`; nonlinear runs use
//! classical RK4. The stabilized problem replaces the initial data `u` by
//! `u − C_d(u, q)` so that the components of `q` along the eigenvalues `0`
//! and `1` are integrals over the future,
//!
//! ```text
//! P_0 q(s) = −∫_s^∞ P_0 N(q(s')) ds',   P_1 q(s) = −∫_s^∞ e^{s−s'} P_1 N(q(s')) ds',
//! ```
//!
//! while the stable part is ordinary Duhamel evolution. The three pieces
//! are advanced separately, which avoids subtracting numbers of size `e^s`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::discretization::{Discretization, Geometry, StateVector};
use crate::error::{Error, Result};
use crate::operator::{assemble_generator, GeneratorMatrix};
use crate::params::{kappa_d, symmetry_modes, ModelParams};
use crate::spectrum::{eigendecompose, riesz_projectors, RieszProjectors};

/// Pointwise nonlinearity with `κ_d` cached on the grid.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    kappa: DVector<f64>,
    p: f64,
}

impl Nonlinearity {
    pub fn new(params: &ModelParams, d: &[f64], disc: &Discretization) -> Result<Self> {
        let kappa = match disc.geometry() {
            Geometry::Interval => disc.sample_function(|y| kappa_d(&[y], params, d))?,
            Geometry::Radial { ell: 0, .. } => {
                DVector::from_element(disc.len(), kappa_d(&vec![0.0; params.n], params, &vec![0.0; params.n])?)
            }
            Geometry::Radial { .. } => {
                return Err(Error::Capability(
                    "the nonlinearity couples harmonics; only ℓ = 0 sectors are closed under it".into(),
                ))
            }
        };
        Ok(Nonlinearity { kappa, p: params.p })
    }

    pub fn kappa(&self) -> &DVector<f64> {
        &self.kappa
    }

    /// Second component of `N_d(q)` from `q1`; `s` is only used in errors.
    pub fn eval(&self, q1: &DVector<f64>, s: f64) -> Result<DVector<f64>> {
        let p = self.p;
        let mut out = DVector::zeros(q1.len());
        for (j, (k, q)) in self.kappa.iter().zip(q1.iter()).enumerate() {
            let u = k + q;
            let v = taylor_remainder(*k, *q, p);
            if !v.is_finite() {
                return Err(Error::Overflow {
                    s,
                    detail: format!("non-finite nonlinearity at node {j} (κ + q1 = {u})"),
                });
            }
            out[j] = v;
        }
        Ok(out)
    }

    /// Number of nodes where `κ_d + q1 < 0`.
    pub fn sign_changes(&self, q1: &DVector<f64>) -> usize {
        self.kappa.iter().zip(q1.iter()).filter(|(k, q)| *k + *q < 0.0).count()
    }

    /// `max p |κ + q1|^{p−1}`, the stiffness of the nonlinear term.
    pub fn stiffness(&self, q1: &DVector<f64>) -> f64 {
        self.kappa
            .iter()
            .zip(q1.iter())
            .map(|(k, q)| self.p * (k + q).abs().powf(self.p - 1.0))
            .fold(0.0, f64::max)
    }
}

// |k+q|^{p−1}(k+q) − k^p − p k^{p−1} q without cancellation for small q/k
fn taylor_remainder(k: f64, q: f64, p: f64) -> f64 {
    let t = q / k;
    if k > 0.0 && t.abs() < 1e-2 {
        // generalized binomial series from the quadratic term on
        let mut coef = p * (p - 1.0) / 2.0;
        let mut pow = t * t;
        let mut acc = 0.0;
        for j in 2..12 {
            acc += coef * pow;
            coef *= (p - j as f64) / (j as f64 + 1.0);
            pow *= t;
        }
        return k.powf(p) * acc;
    }
    let u = k + q;
    u.abs().powf(p - 1.0) * u - k.powf(p) - p * k.powf(p - 1.0) * q
}

/// `N_d(q)` as a state.
pub fn nonlinearity(sv: &StateVector, params: &ModelParams, d: &[f64]) -> Result<StateVector> {
    let nl = Nonlinearity::new(params, d, sv.disc())?;
    let n2 = nl.eval(&sv.q1, 0.0)?;
    Ok(StateVector::new(sv.disc().clone(), DVector::zeros(sv.q1.len()), n2))
}

/// Coordinates along the symmetry modes: `a = (Wᵀ F)⁻¹ Wᵀ q` with `F` the
/// sampled modes `[f_1, f_{0,1}, …]` and `W` the left eigenvectors.
#[derive(Debug, Clone)]
pub struct ModeFrame {
    pub coords: DMatrix<f64>,
    pub modes: DMatrix<f64>,
}

impl ModeFrame {
    pub fn new(proj: &RieszProjectors, params: &ModelParams, d: &[f64], disc: &Arc<Discretization>) -> Result<Self> {
        let m = symmetry_modes(params, d, disc)?;
        let mut cols = vec![];
        if let Some(f1) = &m.f1 {
            cols.push(f1.stacked());
        }
        cols.extend(m.f0.iter().map(|f| f.stacked()));
        if cols.len() != proj.left.ncols() {
            return Err(Error::Dimension {
                expected: proj.left.ncols(),
                got: cols.len(),
            });
        }
        let f = DMatrix::from_columns(&cols);
        let wt = proj.left.transpose();
        let g = &wt * &f;
        let ginv = g
            .try_inverse()
            .ok_or_else(|| Error::Conditioning("symmetry modes do not span the unstable subspace".into()))?;
        Ok(ModeFrame {
            coords: ginv * wt,
            modes: f,
        })
    }

    /// `(a_1, a_{0,1..N})`.
    pub fn amplitudes(&self, q: &DVector<f64>) -> Vec<f64> {
        (&self.coords * q).iter().copied().collect()
    }
}

/// Time series produced by every evolution routine.
#[derive(Debug, Clone, Serialize)]
pub struct EvolutionTrace {
    pub s: Vec<f64>,
    pub norms: Vec<f64>,
    pub a1: Vec<f64>,
    /// `a0[i][n]`: amplitude of `f_{0,i}` at checkpoint `n`.
    pub a0: Vec<Vec<f64>>,
    pub steps: Vec<f64>,
    pub diverged: bool,
    pub notices: Vec<String>,
    /// Stacked states at the checkpoints.
    #[serde(skip)]
    pub states: Vec<DVector<f64>>,
}

impl EvolutionTrace {
    fn new(n_modes: usize) -> Self {
        EvolutionTrace {
            s: vec![],
            norms: vec![],
            a1: vec![],
            a0: vec![vec![]; n_modes],
            steps: vec![],
            diverged: false,
            notices: vec![],
            states: vec![],
        }
    }

    fn record(&mut self, s: f64, q: &DVector<f64>, disc: &Discretization, frame: Option<&ModeFrame>) -> Result<f64> {
        let n = disc.len();
        let norm = disc.pair_norm(&q.rows(0, n).into_owned(), &q.rows(n, n).into_owned())?;
        self.s.push(s);
        self.norms.push(norm);
        if let Some(f) = frame {
            let a = f.amplitudes(q);
            self.a1.push(a[0]);
            for (i, v) in a[1..].iter().enumerate() {
                self.a0[i].push(*v);
            }
        }
        self.states.push(q.clone());
        Ok(norm)
    }

    pub fn last_state(&self, disc: &Arc<Discretization>) -> Option<StateVector> {
        self.states
            .last()
            .and_then(|v| StateVector::from_stacked(disc.clone(), v).ok())
    }
}

/// How linear evolutions are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LinearMethod {
    Exponential,
    Rk4,
}

fn frame_modes(frame: Option<&ModeFrame>) -> usize {
    frame.map_or(0, |f| f.coords.nrows().saturating_sub(1))
}

/// `q(s) = exp(sG) q0` at checkpoints `0, Δ, 2Δ, …, s_end`.
pub fn evolve_linear(
    q0: &StateVector,
    g: &GeneratorMatrix,
    s_end: f64,
    checkpoint: f64,
    method: LinearMethod,
    frame: Option<&ModeFrame>,
) -> Result<EvolutionTrace> {
    if q0.disc().len() != g.disc.len() {
        return Err(Error::Dimension {
            expected: g.dim(),
            got: 2 * q0.disc().len(),
        });
    }
    let disc = q0.disc().clone();
    let n_chk = (s_end / checkpoint).round().max(1.0) as usize;
    let h = s_end / n_chk as f64;
    let mut trace = EvolutionTrace::new(frame_modes(frame));
    let mut q = q0.stacked();
    trace.record(0.0, &q, &disc, frame)?;
    match method {
        LinearMethod::Exponential => {
            let e = (&g.matrix * h).exp();
            for n in 1..=n_chk {
                q = &e * q;
                trace.steps.push(h);
                trace.record(n as f64 * h, &q, &disc, frame)?;
            }
        }
        LinearMethod::Rk4 => {
            let m = disc.m() as f64;
            let sub = (h / (0.5 / (m * m))).ceil().max(1.0) as usize;
            let dt = h / sub as f64;
            if dt < 1e-14 {
                return Err(Error::StepUnderflow { s: 0.0, step: dt });
            }
            for n in 1..=n_chk {
                for _ in 0..sub {
                    let k1 = &g.matrix * &q;
                    let k2 = &g.matrix * (&q + &k1 * (dt / 2.0));
                    let k3 = &g.matrix * (&q + &k2 * (dt / 2.0));
                    let k4 = &g.matrix * (&q + &k3 * dt);
                    q += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
                }
                trace.steps.push(dt);
                trace.record(n as f64 * h, &q, &disc, frame)?;
            }
        }
    }
    Ok(trace)
}

/// Result of a log-linear fit `‖q(s)‖ ≈ A e^{rate·s}`.
#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub prefactor: f64,
    pub r2: f64,
    pub samples: usize,
    /// The fit stopped early because the norm fell below the underflow floor.
    pub truncated: bool,
}

pub const UNDERFLOW_FLOOR: f64 = 1e-14;

/// Least-squares slope of `log ‖q(s)‖` on `[s_min, s_end]`.
pub fn fit_decay_rate(s: &[f64], norms: &[f64], s_min: f64) -> Result<DecayFit> {
    let mut xs = vec![];
    let mut ys = vec![];
    let mut truncated = false;
    for (&t, &v) in s.iter().zip(norms) {
        if t < s_min {
            continue;
        }
        if !(v > UNDERFLOW_FLOOR) {
            truncated = true;
            break;
        }
        xs.push(t);
        ys.push(v.ln());
    }
    if xs.len() < 10 {
        return Err(Error::Precondition(format!(
            "at least 10 positive samples beyond s = {s_min} required, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let rate = sxy / sxx;
    let icpt = my - rate * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    Ok(DecayFit {
        rate,
        prefactor: icpt.exp(),
        r2,
        samples: xs.len(),
        truncated,
    })
}

/// Knobs of the method-of-lines integrator.
#[derive(Debug, Clone, Serialize)]
pub struct Rk4Opts {
    /// `Δs = dt_factor / M²`.
    pub dt_factor: f64,
    /// Extra cap `Δs ≤ stiff_cap / max p|κ + q1|^{p−1}` near blow-up.
    pub stiff_cap: f64,
    pub blowup_threshold: f64,
    pub checkpoint: f64,
}

impl Default for Rk4Opts {
    fn default() -> Self {
        Rk4Opts {
            dt_factor: 0.5,
            stiff_cap: 0.05,
            blowup_threshold: 1e6,
            checkpoint: 0.05,
        }
    }
}

/// RK4 method of lines for `∂_s q = L_d q + N_d(q)`.
pub fn evolve_nonlinear(
    q0: &StateVector,
    g: &GeneratorMatrix,
    s_end: f64,
    opts: &Rk4Opts,
    frame: Option<&ModeFrame>,
) -> Result<EvolutionTrace> {
    let disc = q0.disc().clone();
    let nl = Nonlinearity::new(&g.params, &g.d, &disc)?;
    let n = disc.len();
    let m = disc.m() as f64;
    let base_dt = opts.dt_factor / (m * m);
    let mut trace = EvolutionTrace::new(frame_modes(frame));
    let mut q = q0.stacked();
    let norm0 = trace.record(0.0, &q, &disc, frame)?;
    if !(norm0 < opts.blowup_threshold) {
        return Err(Error::Precondition(format!(
            "‖q0‖ = {norm0:e} is not below the blow-up threshold"
        )));
    }
    let rhs = |q: &DVector<f64>, s: f64| -> Result<DVector<f64>> {
        let mut out = &g.matrix * q;
        let n2 = nl.eval(&q.rows(0, n).into_owned(), s)?;
        for i in 0..n {
            out[n + i] += n2[i];
        }
        Ok(out)
    };
    let mut s = 0.0;
    let mut next_chk = opts.checkpoint;
    let mut sign_noted = false;
    while s < s_end - 1e-12 {
        let q1 = q.rows(0, n).into_owned();
        let stiff = nl.stiffness(&q1);
        let mut dt = base_dt.min(opts.stiff_cap / stiff.max(1e-300));
        dt = dt.min(next_chk - s).min(s_end - s);
        if dt < 1e-16 {
            return Err(Error::StepUnderflow { s, step: dt });
        }
        let k1 = rhs(&q, s)?;
        let k2 = rhs(&(&q + &k1 * (dt / 2.0)), s)?;
        let k3 = rhs(&(&q + &k2 * (dt / 2.0)), s)?;
        let k4 = rhs(&(&q + &k3 * dt), s)?;
        q += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        s += dt;
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::Overflow {
                s,
                detail: "state became non-finite".into(),
            });
        }
        if !sign_noted && nl.sign_changes(&q.rows(0, n).into_owned()) > 0 {
            trace.notices.push(format!("κ_d + q1 changed sign at s = {s:.4}"));
            sign_noted = true;
        }
        let at_chk = (s - next_chk).abs() < 1e-12 || s >= s_end - 1e-12;
        let big = q.amax() > opts.blowup_threshold.sqrt();
        if at_chk || big {
            let norm = trace.record(s, &q, &disc, frame)?;
            trace.steps.push(dt);
            if at_chk {
                next_chk += opts.checkpoint;
            }
            if norm > opts.blowup_threshold {
                trace.diverged = true;
                break;
            }
        }
    }
    Ok(trace)
}

/// Everything needed to evolve perturbations of one `κ_d`.
#[derive(Debug, Clone)]
pub struct LinearContext {
    pub params: ModelParams,
    pub d: Vec<f64>,
    pub disc: Arc<Discretization>,
    pub generator: GeneratorMatrix,
    pub projectors: RieszProjectors,
    pub frame: ModeFrame,
    pub nonlinearity: Nonlinearity,
    /// `exp(hG)` for the Duhamel grid.
    pub step: DMatrix<f64>,
    pub h: f64,
}

impl LinearContext {
    pub fn new(params: &ModelParams, d: &[f64], disc: &Arc<Discretization>, h: f64) -> Result<Self> {
        let generator = assemble_generator(params, d, disc)?;
        let report = eigendecompose(&generator.matrix)?;
        let projectors = riesz_projectors(&report, params)?;
        let frame = ModeFrame::new(&projectors, params, d, disc)?;
        let nonlinearity = Nonlinearity::new(params, d, disc)?;
        let step = (&generator.matrix * h).exp();
        Ok(LinearContext {
            params: params.clone(),
            d: d.to_vec(),
            disc: disc.clone(),
            generator,
            projectors,
            frame,
            nonlinearity,
            step,
            h,
        })
    }

    fn n_eval(&self, q: &DVector<f64>, s: f64) -> Result<DVector<f64>> {
        let n = self.disc.len();
        let n2 = self.nonlinearity.eval(&q.rows(0, n).into_owned(), s)?;
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(n, n).copy_from(&n2);
        Ok(out)
    }
}

fn composite_simpson(h: f64, vals: &[DVector<f64>]) -> DVector<f64> {
    let k = vals.len();
    let mut acc = DVector::zeros(vals[0].len());
    if k < 2 {
        return acc;
    }
    // Simpson on an even number of panels, trapezoid on a leftover panel
    let panels = k - 1;
    let even = panels - panels % 2;
    let mut i = 0;
    while i + 2 <= even {
        acc += (&vals[i] + &vals[i + 1] * 4.0 + &vals[i + 2]) * (h / 3.0);
        i += 2;
    }
    if even < panels {
        acc += (&vals[panels - 1] + &vals[panels]) * (h / 2.0);
    }
    acc
}

fn tail_rate(s: &[f64], norms: &[f64]) -> Result<Option<f64>> {
    let k = norms.len();
    let start = k - (k / 3).max(3).min(k);
    let (xs, ys): (Vec<f64>, Vec<f64>) = s[start..]
        .iter()
        .zip(&norms[start..])
        .filter(|(_, v)| **v > 0.0)
        .map(|(x, v)| (*x, v.ln()))
        .unzip();
    if xs.len() < 2 {
        // nothing left to extrapolate
        return Ok(None);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let rate = sxy / sxx;
    if !(rate < 0.0) {
        return Err(Error::TailDivergence(format!("fitted tail rate {rate:.3} ≥ 0")));
    }
    Ok(Some(rate))
}

/// Value of the correction term and the size of its extrapolated tail.
#[derive(Debug, Clone)]
pub struct Correction {
    pub value: StateVector,
    pub tail: f64,
}

/// `C_d(f, q) = P f + P_0 ∫_0^∞ N(q) + P_1 ∫_0^∞ e^{−s} N(q)` from a trace on
/// a uniform grid, composite Simpson plus an exponential tail.
pub fn correction_term(f: &StateVector, trace: &EvolutionTrace, ctx: &LinearContext) -> Result<Correction> {
    let pr = &ctx.projectors;
    let mut value = &pr.pfull * f.stacked();
    let mut tail = 0.0;
    if trace.states.len() >= 2 {
        let h = trace.s[1] - trace.s[0];
        let ns: Vec<DVector<f64>> = trace
            .states
            .iter()
            .zip(&trace.s)
            .map(|(q, s)| ctx.n_eval(q, *s))
            .collect::<Result<_>>()?;
        let nnorm: Vec<f64> = ns.iter().map(|v| v.norm()).collect();
        let weighted: Vec<DVector<f64>> = ns.iter().zip(&trace.s).map(|(v, s)| v * (-s).exp()).collect();
        let mut i0 = composite_simpson(h, &ns);
        let mut i1 = composite_simpson(h, &weighted);
        if let Some(rate) = tail_rate(&trace.s, &nnorm)? {
            let last = ns.last().expect("nonempty");
            let s_end = *trace.s.last().expect("nonempty");
            let t0 = last / (-rate);
            let t1 = last * ((-s_end).exp() / (1.0 - rate));
            tail = t0.norm() + t1.norm();
            i0 += t0;
            i1 += t1;
        }
        value += &pr.p0.matrix * i0 + &pr.p1.matrix * i1;
    }
    Ok(Correction {
        value: StateVector::from_stacked(f.disc().clone(), &value)?,
        tail,
    })
}

/// Knobs of the stabilized Picard iteration.
#[derive(Debug, Clone, Serialize)]
pub struct FpOpts {
    pub horizon: f64,
    pub tol_fp: f64,
    pub max_iter: usize,
}

impl Default for FpOpts {
    fn default() -> Self {
        FpOpts {
            horizon: 15.0,
            tol_fp: 1e-13,
            max_iter: 30,
        }
    }
}

/// A fixed point of the stabilized Duhamel map.
#[derive(Debug, Clone)]
pub struct StabilizedSolution {
    pub trace: EvolutionTrace,
    pub correction: StateVector,
    /// Coordinates of the correction along `(f_1, f_{0,1..N})`.
    pub amplitudes: Vec<f64>,
    pub iterations: usize,
    pub differences: Vec<f64>,
    pub tail: f64,
}

struct Sweep {
    states: Vec<DVector<f64>>,
    correction: DVector<f64>,
    tail: f64,
}

// one application of the stabilized Duhamel map on the grid s_n = n h
fn sweep(u: &DVector<f64>, prev: &[DVector<f64>], ctx: &LinearContext, s: &[f64]) -> Result<Sweep> {
    let pr = &ctx.projectors;
    let k = prev.len();
    let h = ctx.h;
    let ns: Vec<DVector<f64>> = prev
        .iter()
        .zip(s)
        .map(|(q, t)| ctx.n_eval(q, *t))
        .collect::<Result<_>>()?;
    let qs = DMatrix::identity(u.len(), u.len()) - &pr.pfull;
    let stable_n: Vec<DVector<f64>> = ns.iter().map(|v| &qs * v).collect();
    let p0n: Vec<DVector<f64>> = ns.iter().map(|v| &pr.p0.matrix * v).collect();
    let p1n: Vec<DVector<f64>> = ns.iter().map(|v| &pr.p1.matrix * v).collect();

    // tails beyond the horizon
    let nnorm: Vec<f64> = ns.iter().map(|v| v.norm()).collect();
    let (mut a, mut b, mut tail) = (DVector::zeros(u.len()), DVector::zeros(u.len()), 0.0);
    if let Some(rate) = tail_rate(s, &nnorm)? {
        a = &p0n[k - 1] / (-rate);
        b = &p1n[k - 1] / (1.0 - rate);
        tail = a.norm() + b.norm();
    }
    let eh = (-h).exp();
    let mut a_n = vec![DVector::zeros(u.len()); k];
    let mut b_n = vec![DVector::zeros(u.len()); k];
    a_n[k - 1] = a;
    b_n[k - 1] = b;
    for n in (0..k - 1).rev() {
        a_n[n] = &a_n[n + 1] + (&p0n[n] + &p0n[n + 1]) * (h / 2.0);
        b_n[n] = &b_n[n + 1] * eh + (&p1n[n] + &p1n[n + 1] * eh) * (h / 2.0);
    }
    let mut x = &qs * u;
    let mut states = Vec::with_capacity(k);
    states.push(&x - &a_n[0] - &b_n[0]);
    for n in 0..k - 1 {
        x = &ctx.step * (&x + &stable_n[n] * (h / 2.0)) + &stable_n[n + 1] * (h / 2.0);
        // rounding leaks into the growing mode otherwise
        x = &qs * x;
        states.push(&x - &a_n[n + 1] - &b_n[n + 1]);
    }
    let correction = &pr.pfull * u + &a_n[0] + &b_n[0];
    Ok(Sweep {
        states,
        correction,
        tail,
    })
}

fn weighted_sup(a: &[DVector<f64>], b: &[DVector<f64>], s: &[f64], omega0: f64, disc: &Discretization) -> Result<f64> {
    let n = disc.len();
    let mut worst: f64 = 0.0;
    for ((x, y), t) in a.iter().zip(b).zip(s) {
        let dlt = x - y;
        let v = disc.pair_norm(&dlt.rows(0, n).into_owned(), &dlt.rows(n, n).into_owned())?;
        worst = worst.max((-omega0 * t).exp() * v);
    }
    Ok(worst)
}

/// Picard iteration on the stabilized Duhamel map from data `u`.
pub fn stabilized_fixed_point(u: &StateVector, ctx: &LinearContext, opts: &FpOpts) -> Result<StabilizedSolution> {
    let k = (opts.horizon / ctx.h).round() as usize + 1;
    let s: Vec<f64> = (0..k).map(|i| i as f64 * ctx.h).collect();
    let ud = u.stacked();
    let mut prev = vec![DVector::zeros(ud.len()); k];
    let mut diffs: Vec<f64> = vec![];
    let mut last = None;
    for it in 1..=opts.max_iter {
        let sw = sweep(&ud, &prev, ctx, &s)?;
        let diff = weighted_sup(&sw.states, &prev, &s, ctx.params.omega0, &ctx.disc)?;
        diffs.push(diff);
        prev = sw.states.clone();
        let done = diff <= opts.tol_fp;
        last = Some(sw);
        if done {
            return finish(last.expect("set"), it, diffs, ctx, &s);
        }
        if diffs.len() >= 3 {
            let r = diffs[diffs.len() - 1] / diffs[diffs.len() - 2];
            if r >= 1.0 {
                let ratios = diffs.windows(2).map(|w| w[1] / w[0]).collect();
                return Err(Error::ContractionFailure { ratios });
            }
        }
    }
    let _ = last;
    let ratios = diffs.windows(2).map(|w| w[1] / w[0]).collect();
    Err(Error::ContractionFailure { ratios })
}

fn finish(
    sw: Sweep,
    iterations: usize,
    differences: Vec<f64>,
    ctx: &LinearContext,
    s: &[f64],
) -> Result<StabilizedSolution> {
    let mut trace = EvolutionTrace::new(ctx.params.n);
    for (t, q) in s.iter().zip(&sw.states) {
        trace.record(*t, q, &ctx.disc, Some(&ctx.frame))?;
        trace.steps.push(ctx.h);
    }
    let amplitudes = ctx.frame.amplitudes(&sw.correction);
    Ok(StabilizedSolution {
        trace,
        correction: StateVector::from_stacked(ctx.disc.clone(), &sw.correction)?,
        amplitudes,
        iterations,
        differences,
        tail: sw.tail,
    })
}

/// Largest deviation from the discrete Duhamel identity
/// `q_n = E(s_n)(u − C) + Σ trapezoid E(s_n − s_m) N(q_m)` at the given checkpoints.
pub fn duhamel_defect(
    u: &StateVector,
    sol: &StabilizedSolution,
    ctx: &LinearContext,
    checkpoints: &[usize],
) -> Result<f64> {
    let states = &sol.trace.states;
    let h = ctx.h;
    let k = states.len();
    let mut e = u.stacked() - sol.correction.stacked();
    let mut integral = DVector::zeros(e.len());
    let mut worst: f64 = 0.0;
    let n = ctx.disc.len();
    let mut nprev = ctx.n_eval(&states[0], 0.0)?;
    for idx in 0..k {
        if checkpoints.contains(&idx) {
            let d = &states[idx] - (&e + &integral);
            let v = ctx
                .disc
                .pair_norm(&d.rows(0, n).into_owned(), &d.rows(n, n).into_owned())?;
            worst = worst.max(v);
        }
        if idx + 1 < k {
            let nnext = ctx.n_eval(&states[idx + 1], sol.trace.s[idx + 1])?;
            integral = &ctx.step * (&integral + &nprev * (h / 2.0)) + &nnext * (h / 2.0);
            e = &ctx.step * e;
            nprev = nnext;
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_disc;
    use crate::params::make_params;

    fn setup(m: usize) -> (ModelParams, Arc<Discretization>) {
        (
            make_params(1, 3.0, 1, 1.0, &[0.0], -0.4).unwrap(),
            build_disc(Geometry::Interval, m, 1.0, 1).unwrap(),
        )
    }

    fn smooth(disc: &Arc<Discretization>, scale: f64) -> StateVector {
        disc.sample_pair(|y| Ok((scale * (1.0 + y).cos(), scale * (0.5 * y * y - y))))
            .unwrap()
    }

    #[test]
    fn nonlinearity_zero_and_cubic() {
        let (prm, disc) = setup(24);
        let d = [0.3];
        let z = nonlinearity(&StateVector::zeros(disc.clone()), &prm, &d).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        let q = smooth(&disc, 0.2);
        let nq = nonlinearity(&q, &prm, &d).unwrap();
        for (j, y) in disc.nodes().iter().enumerate() {
            let k = kappa_d(&[*y], &prm, &d).unwrap();
            let q1 = q.q1[j];
            assert!((nq.q2[j] - (3.0 * k * q1 * q1 + q1 * q1 * q1)).abs() <= 1e-12);
            assert_eq!(nq.q1[j], 0.0);
        }
    }

    #[test]
    fn nonlinearity_is_quadratic() {
        let (prm, disc) = setup(32);
        let f = smooth(&disc, 1.0);
        let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|e| nonlinearity(&f.scaled(*e), &prm, &[0.3]).unwrap().norm().unwrap() / (e * e))
            .collect();
        let (lo, hi) = ratios
            .iter()
            .fold((f64::MAX, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
        assert!(hi / lo - 1.0 <= 0.1, "{ratios:?}");
    }

    #[test]
    fn decay_fit_exact() {
        let s: Vec<f64> = (0..50).map(|i| i as f64 * 0.2).collect();
        let n: Vec<f64> = s.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let f = fit_decay_rate(&s, &n, 0.0).unwrap();
        assert!((f.rate + 0.7).abs() <= 1e-10);
        assert!((f.prefactor - 3.0).abs() <= 1e-9);
        assert!(matches!(
            fit_decay_rate(&s[..5], &n[..5], 0.0),
            Err(Error::Precondition(_))
        ));
        let under: Vec<f64> = s.iter().map(|t| (-8.0 * t).exp()).collect();
        assert!(fit_decay_rate(&s, &under, 0.0).unwrap().truncated);
    }

    #[test]
    fn symmetry_modes_evolve_exactly() {
        let (prm, disc) = setup(32);
        let d = [0.3];
        let g = assemble_generator(&prm, &d, &disc).unwrap();
        let m = symmetry_modes(&prm, &d, &disc).unwrap();
        let f1 = m.f1.unwrap();
        let t = evolve_linear(&f1, &g, 2.0, 0.1, LinearMethod::Exponential, None).unwrap();
        for (s, nrm) in t.s.iter().zip(&t.norms) {
            assert!((nrm / (s.exp() * t.norms[0]) - 1.0).abs() <= 1e-6);
        }
        let fit = fit_decay_rate(&t.s, &t.norms, 0.0).unwrap();
        assert!((fit.rate - 1.0).abs() <= 1e-4);
        let t = evolve_linear(&m.f0[0], &g, 5.0, 0.25, LinearMethod::Exponential, None).unwrap();
        let q0 = m.f0[0].stacked();
        for q in &t.states {
            let dq = StateVector::from_stacked(disc.clone(), &(q - &q0)).unwrap();
            assert!(dq.norm().unwrap() <= 1e-6);
        }
    }

    #[test]
    fn semigroup_law_and_rk4_agree() {
        let (prm, disc) = setup(24);
        let g = assemble_generator(&prm, &[0.2], &disc).unwrap();
        let q0 = smooth(&disc, 1.0);
        let e = |s: f64| (&g.matrix * s).exp();
        let a = e(0.7) * q0.stacked();
        let b = e(0.3) * (e(0.4) * q0.stacked());
        assert!((&a - &b).norm() <= 1e-8 * a.norm().max(1.0));
        let t1 = evolve_linear(&q0, &g, 0.5, 0.1, LinearMethod::Exponential, None).unwrap();
        let t2 = evolve_linear(&q0, &g, 0.5, 0.1, LinearMethod::Rk4, None).unwrap();
        let diff = (t1.states.last().unwrap() - t2.states.last().unwrap()).norm();
        assert!(diff <= 1e-8 * t1.states.last().unwrap().norm(), "{diff}");
    }

    #[test]
    fn nonlinear_zero_stays_zero() {
        let (prm, disc) = setup(16);
        let g = assemble_generator(&prm, &[0.0], &disc).unwrap();
        let t = evolve_nonlinear(&StateVector::zeros(disc.clone()), &g, 1.0, &Rk4Opts::default(), None).unwrap();
        assert!(t.norms.iter().all(|v| *v == 0.0));
        assert!(!t.diverged);
    }

    #[test]
    fn stabilized_zero_data() {
        let (prm, disc) = setup(24);
        let ctx = LinearContext::new(&prm, &[0.3], &disc, 0.05).unwrap();
        let sol = stabilized_fixed_point(&StateVector::zeros(disc.clone()), &ctx, &FpOpts::default()).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(sol.trace.norms.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn correction_of_zero_trace_is_projection() {
        let (prm, disc) = setup(24);
        let ctx = LinearContext::new(&prm, &[0.3], &disc, 0.05).unwrap();
        let f = smooth(&disc, 1e-3);
        let mut tr = EvolutionTrace::new(1);
        for i in 0..40 {
            tr.s.push(i as f64 * 0.1);
            tr.states.push(DVector::zeros(2 * disc.len()));
        }
        let c = correction_term(&f, &tr, &ctx).unwrap();
        let pf = &ctx.projectors.pfull * f.stacked();
        assert!((c.value.stacked() - &pf).norm() <= 1e-15 * pf.norm().max(1.0));
        let off = (DMatrix::identity(pf.len(), pf.len()) - &ctx.projectors.pfull) * c.value.stacked();
        assert!(off.norm() <= 1e-9 * c.value.stacked().norm());
    }

    #[test]
    fn projected_semigroup() {
        let (prm, disc) = setup(32);
        let ctx = LinearContext::new(&prm, &[0.3], &disc, 0.05).unwrap();
        let g = &ctx.generator.matrix;
        let pr = &ctx.projectors;
        let mut worst: f64 = 0.0;
        for s in [0.5, 1.0, 2.0] {
            let e = (g * s).exp();
            let d1 = &pr.p1.matrix * &e - &pr.p1.matrix * s.exp();
            let d0 = &pr.p0.matrix * &e - &pr.p0.matrix;
            worst = worst
                .max(d1.norm() / (s.exp() * pr.p1.matrix.norm()))
                .max(d0.norm() / pr.p0.matrix.norm());
        }
        assert!(worst <= 1e-7, "{worst}");
        let qs = DMatrix::identity(g.nrows(), g.nrows()) - &pr.pfull;
        let f = smooth(&disc, 1.0);
        let x = StateVector::from_stacked(disc.clone(), &(&qs * f.stacked())).unwrap();
        let t = evolve_linear(&x, &ctx.generator, 12.0, 0.1, LinearMethod::Exponential, None).unwrap();
        let fit = fit_decay_rate(&t.s, &t.norms, 4.0).unwrap();
        assert!(fit.rate <= prm.omega0 + 0.05, "{}", fit.rate);
    }

    #[test]
    fn stabilized_small_data_converges() {
        let (prm, disc) = setup(32);
        let ctx = LinearContext::new(&prm, &[0.3], &disc, 0.02).unwrap();
        let f = smooth(&disc, 1e-4);
        let sol = stabilized_fixed_point(&f, &ctx, &FpOpts::default()).unwrap();
        assert!(sol.iterations <= 10, "{:?}", sol.differences);
        let q0 = sol.trace.norms[0];
        for (s, v) in sol.trace.s.iter().zip(&sol.trace.norms) {
            assert!(*v <= 2.0 * q0.max(1e-4) * (prm.omega0 * s).exp() * 10.0, "s={s} {v}");
        }
        let fit = fit_decay_rate(&sol.trace.s, &sol.trace.norms, 3.0).unwrap();
        assert!(fit.rate <= prm.omega0 + 0.05, "{}", fit.rate);
        let chk: Vec<usize> = (0..sol.trace.s.len()).step_by(50).collect();
        let defect = duhamel_defect(&f, &sol, &ctx, &chk).unwrap();
        assert!(defect <= 1e-10, "{defect}");
        // unstable parts of q are quadratically small
        let qmax = sol.trace.norms.iter().cloned().fold(0.0, f64::max);
        for (st, s) in sol.trace.states.iter().zip(&sol.trace.s) {
            let a = ctx.frame.amplitudes(st);
            let bound = 10.0 * qmax * qmax * (prm.omega0 * s).exp();
            assert!(a.iter().all(|x| x.abs() <= bound), "s={s} {a:?} {bound}");
        }
        // the correction agrees with the independent quadrature
        let c = correction_term(&f, &sol.trace, &ctx).unwrap();
        let integral = (sol.correction.stacked() - &ctx.projectors.pfull * f.stacked()).norm();
        let diff = (c.value.stacked() - sol.correction.stacked()).norm();
        // the trapezoid Duhamel grid is second order
        assert!(diff <= 5e-3 * integral, "{diff} vs {integral}");
        let ctx2 = LinearContext::new(&prm, &[0.3], &disc, 0.01).unwrap();
        let sol2 = stabilized_fixed_point(&f, &ctx2, &FpOpts::default()).unwrap();
        let c2 = correction_term(&f, &sol2.trace, &ctx2).unwrap();
        let diff2 = (c2.value.stacked() - sol2.correction.stacked()).norm();
        assert!(diff2 <= diff / 3.0, "{diff2} vs {diff}");
    }
}
