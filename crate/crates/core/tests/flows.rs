//! Flows that cross several modules: spectrum into evolution into shooting.

use std::sync::Arc;

use blowlab::discretization::{build_disc, Discretization, Geometry, StateVector};
use blowlab::evolution::{
    evolve_linear, evolve_nonlinear, stabilized_fixed_point, FpOpts, LinearContext, LinearMethod, Rk4Opts,
};
use blowlab::params::{make_params, u_star, ModelParams};
use blowlab::shooting::{
    classify_trapping, initial_data_q, solve_parameters, ClassifyOpts, ShootOpts, SmoothPair, TrappingKind,
};
use nalgebra::DMatrix;
use rayon::prelude::*;

fn setup(d0: f64, m: usize) -> (ModelParams, Arc<Discretization>) {
    let params = make_params(1, 3.0, 1, 1.0, &[d0], -0.4).unwrap();
    let disc = build_disc(Geometry::Interval, m, params.r, params.k).unwrap();
    (params, disc)
}

fn random_state(disc: &Arc<Discretization>, seed: u64, norm: f64) -> StateVector {
    let f = SmoothPair::random(seed, 8).normalized(disc, norm).unwrap();
    disc.sample_pair(|y| Ok(f.eval(y))).unwrap()
}

#[test]
fn riesz_projectors_commute_with_the_semigroup() {
    let (params, disc) = setup(0.3, 32);
    let ctx = LinearContext::new(&params, &[0.3], &disc, 0.02).unwrap();
    let g = &ctx.generator.matrix;
    let (p0, p1) = (&ctx.projectors.p0.matrix, &ctx.projectors.p1.matrix);
    for s in [0.1, 0.5, 1.0] {
        let e = (g * s).exp();
        let r1 = (p1 * &e - p1 * s.exp()).norm() / (s.exp() * p1.norm());
        let r0 = (p0 * &e - p0).norm() / p0.norm();
        assert!(r1 <= 1e-7, "P1 at s = {s}: {r1:e}");
        assert!(r0 <= 1e-7, "P0 at s = {s}: {r0:e}");
    }
}

#[test]
fn stable_part_decays_uniformly() {
    let (params, disc) = setup(0.0, 32);
    let ctx = LinearContext::new(&params, &[0.0], &disc, 0.02).unwrap();
    let n = ctx.generator.matrix.nrows();
    let qs = DMatrix::identity(n, n) - &ctx.projectors.pfull;
    // fitted M in ‖E(s) Q v‖ ≤ M e^{ω0 s} ‖Q v‖ stays bounded over many states
    let worst = (0..50u64)
        .into_par_iter()
        .map(|i| {
            let v = random_state(&disc, 100 + i, 1.0);
            let x = StateVector::from_stacked(disc.clone(), &(&qs * v.stacked())).unwrap();
            let tr = evolve_linear(&x, &ctx.generator, 10.0, 0.5, LinearMethod::Exponential, None).unwrap();
            tr.s.iter()
                .zip(&tr.norms)
                .map(|(s, q)| q / (tr.norms[0] * (params.omega0 * s).exp()))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    assert!(worst < 10.0, "M = {worst}");
}

#[test]
fn nonlinear_flow_is_quadratically_close_to_linear() {
    let (params, disc) = setup(0.3, 32);
    let ctx = LinearContext::new(&params, &[0.3], &disc, 0.02).unwrap();
    let unit = random_state(&disc, 7, 1.0);
    let ratios: Vec<f64> = [1e-3, 1e-4]
        .iter()
        .map(|eps| {
            let q0 = unit.scaled(*eps);
            let nl = evolve_nonlinear(
                &q0,
                &ctx.generator,
                1.0,
                &Rk4Opts {
                    checkpoint: 0.25,
                    ..Rk4Opts::default()
                },
                None,
            )
            .unwrap();
            let lin = evolve_linear(&q0, &ctx.generator, 1.0, 0.25, LinearMethod::Exponential, None).unwrap();
            assert_eq!(nl.s, lin.s);
            nl.states
                .iter()
                .zip(&lin.states)
                .map(|(a, b)| {
                    StateVector::from_stacked(disc.clone(), &(a - b))
                        .unwrap()
                        .norm()
                        .unwrap()
                })
                .fold(0.0, f64::max)
                / (eps * eps)
        })
        .collect();
    assert!(ratios.iter().all(|r| r.is_finite() && *r > 0.0));
    assert!((ratios[0] / ratios[1] - 1.0).abs() < 0.1, "{ratios:?}");
}

#[test]
fn stabilized_trajectory_matches_direct_evolution() {
    // RK4 started from the stabilized q(0) follows the Duhamel trajectory until the
    // unstable direction amplifies the discretization gap
    let (params, disc) = setup(0.3, 32);
    let ctx = LinearContext::new(&params, &[0.3], &disc, 0.01).unwrap();
    let u = random_state(&disc, 11, 1e-4);
    let sol = stabilized_fixed_point(&u, &ctx, &FpOpts::default()).unwrap();
    let q0 = StateVector::from_stacked(disc.clone(), &sol.trace.states[0]).unwrap();
    let opts = Rk4Opts {
        checkpoint: 0.01,
        ..Rk4Opts::default()
    };
    let direct = evolve_nonlinear(&q0, &ctx.generator, 2.0, &opts, None).unwrap();
    let scale = sol.trace.norms.iter().cloned().fold(0.0, f64::max);
    for (s, q) in direct.s.iter().zip(&direct.states) {
        let n = (s / 0.01).round() as usize;
        let gap = StateVector::from_stacked(disc.clone(), &(q - &sol.trace.states[n]))
            .unwrap()
            .norm()
            .unwrap();
        assert!(gap <= 1e-3 * scale, "s = {s}: gap {gap:e}");
    }
}

#[test]
fn doubling_the_horizon_keeps_the_shooting_solution() {
    let (params, disc) = setup(0.3, 32);
    let pair = SmoothPair::random(5, 8).normalized(&disc, 1e-4).unwrap();
    let f = move |y: f64| Ok(pair.eval(y));
    let opts = ShootOpts::default();
    let r = solve_parameters(&f, &params, &opts).unwrap();
    let ctx = LinearContext::new(&params, &[r.d_star], &disc, opts.h).unwrap();
    let u = initial_data_q(&f, &params, r.d_star, r.t_star, &disc).unwrap();
    let fp = FpOpts {
        horizon: 2.0 * opts.fp.horizon,
        ..opts.fp.clone()
    };
    let long = stabilized_fixed_point(&u, &ctx, &fp).unwrap();
    for (a, b) in long.amplitudes.iter().zip(&r.amplitudes) {
        assert!((a - b).abs() <= 2.0 * opts.tol_shoot, "{a:e} vs {b:e}");
    }
}

#[test]
fn converged_parameters_are_proportional_to_the_perturbation() {
    let (params, disc) = setup(0.3, 32);
    let opts = ShootOpts::default();
    let norm = 1e-4;
    let drifts: Vec<f64> = (0..20u64)
        .into_par_iter()
        .map(|i| {
            let pair = SmoothPair::random(300 + i, 8).normalized(&disc, norm).unwrap();
            let r = solve_parameters(&move |y: f64| Ok(pair.eval(y)), &params, &opts).unwrap();
            (r.t_star - 1.0).abs() + (r.d_star - 0.3).abs()
        })
        .collect();
    for d in &drifts {
        assert!(*d <= 50.0 * norm, "drift {d:e}");
    }
}

#[test]
fn time_shifted_profile_recovers_its_blowup_time() {
    // data of the exact solution with blow-up time T: shooting must return T* = T,
    // and b* = 1/T − 1 decides between blow-up and decay
    let d0 = 0.3;
    let (params, _) = setup(d0, 32);
    let s = params.s_p;
    for (t_blow, kind) in [(0.999, TrappingKind::BlowUp), (1.001, TrappingKind::Decay)] {
        let p = params.clone();
        let data = move |y: f64| {
            let u = u_star(0.0, &[y], &p, t_blow, &[0.0], &[d0])?;
            // ∂_s U = u_t − y u_x − s_p u with u = c (T − t + d0 x)^{−s_p}
            let base = t_blow + d0 * y;
            let ut = s * u / base;
            let ux = -d0 * ut;
            Ok((u, ut - y * ux - s * u))
        };
        let c = classify_trapping(&data, &params, &ClassifyOpts::default()).unwrap();
        assert!((c.t_star - t_blow).abs() <= 1e-8, "T* = {} for T = {t_blow}", c.t_star);
        assert!((c.d_star - d0).abs() <= 1e-8, "d* = {}", c.d_star);
        assert!((c.b_star - (1.0 / t_blow - 1.0)).abs() <= 1e-8);
        assert_eq!(c.kind, kind);
        assert!(c.consistent);
    }
}
