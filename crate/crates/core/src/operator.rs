//! The discrete generator of the linearized flow around `κ_d`,
//!
//! ```text
//! L_d (q1, q2) = ( −y·∇q1 − s_p q1 + q2,
//!                  Δq1 + V_d q1 − y·∇q2 − (s_p + 1) q2 ),
//! ```
//!
//! and residuals of the second-order eigen-equation
//!
//! ```text
//! (c(λ) − V_d) φ + (2λ + 2s_p + 2) y·∇φ + (y_i y_j − δ_ij) ∂_i ∂_j φ = 0,
//! c(λ) = λ² + (2s_p + 1) λ + s_p (s_p + 1).
//! ```

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::discretization::{Discretization, Geometry, StateVector};
use crate::error::{Error, Result};
use crate::lorentz::Field;
use crate::params::{norm2, potential_v, symmetry_modes, ModelParams};

/// Dense matrix of `L_d` on stacked `(q1, q2)`.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub matrix: DMatrix<f64>,
    /// The potential row block `V_d` (diagonal), kept so the free part can be
    /// recovered exactly.
    pub potential: DVector<f64>,
    pub params: ModelParams,
    pub d: Vec<f64>,
    pub disc: Arc<Discretization>,
}

impl GeneratorMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `L_d − L'_d`.
    pub fn free_part(&self) -> DMatrix<f64> {
        let n = self.disc.len();
        let mut m = self.matrix.clone();
        for i in 0..n {
            m[(n + i, i)] -= self.potential[i];
        }
        m
    }
}

/// `V_d` at the nodes; constant on a radial sector.
pub fn potential_samples(params: &ModelParams, d: &[f64], disc: &Discretization) -> Result<DVector<f64>> {
    match disc.geometry() {
        Geometry::Interval => disc.sample_function(|y| potential_v(&[y], params, d)),
        Geometry::Radial { .. } => {
            let v = potential_v(&vec![0.0; params.n], params, &vec![0.0; params.n])?;
            Ok(DVector::from_element(disc.len(), v))
        }
    }
}

fn check_geometry(params: &ModelParams, d: &[f64], disc: &Discretization) -> Result<()> {
    params.check_boost(d)?;
    match disc.geometry() {
        Geometry::Interval if params.n != 1 => Err(Error::Capability(format!(
            "the interval grid represents N = 1 only (N = {})",
            params.n
        ))),
        Geometry::Radial { dim, .. } if dim != params.n => Err(Error::Dimension {
            expected: params.n,
            got: dim,
        }),
        Geometry::Radial { .. } if norm2(d) != 0.0 => Err(Error::Capability(
            "direct assembly for N ≥ 2 and d ≠ 0 is unsupported; transport eigenfunctions with the Lorentz pushforward"
                .into(),
        )),
        _ => Ok(()),
    }
}

fn assemble(params: &ModelParams, disc: &Arc<Discretization>, potential: DVector<f64>, d: &[f64]) -> GeneratorMatrix {
    let n = disc.len();
    let s = params.s_p;
    let e = disc.euler();
    let id = DMatrix::<f64>::identity(n, n);
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    g.view_mut((0, 0), (n, n)).copy_from(&(-&e - &id * s));
    g.view_mut((0, n), (n, n)).copy_from(&id);
    g.view_mut((n, 0), (n, n))
        .copy_from(&(disc.laplacian() + DMatrix::from_diagonal(&potential)));
    g.view_mut((n, n), (n, n)).copy_from(&(-&e - &id * (s + 1.0)));
    GeneratorMatrix {
        matrix: g,
        potential,
        params: params.clone(),
        d: d.to_vec(),
        disc: disc.clone(),
    }
}

/// Assemble `L_d` on a discretization.
pub fn assemble_generator(params: &ModelParams, d: &[f64], disc: &Arc<Discretization>) -> Result<GeneratorMatrix> {
    check_geometry(params, d, disc)?;
    let v = potential_samples(params, d, disc)?;
    Ok(assemble(params, disc, v, d))
}

/// The free wave generator (`V ≡ 0`).
pub fn assemble_free(params: &ModelParams, disc: &Arc<Discretization>) -> Result<GeneratorMatrix> {
    let d = vec![0.0; params.n];
    check_geometry(params, &d, disc)?;
    Ok(assemble(params, disc, DVector::zeros(disc.len()), &d))
}

/// `L_d q`.
pub fn apply_generator(g: &GeneratorMatrix, sv: &StateVector) -> Result<StateVector> {
    if sv.disc().len() != g.disc.len() {
        return Err(Error::Dimension {
            expected: g.dim(),
            got: 2 * sv.disc().len(),
        });
    }
    let out = &g.matrix * sv.stacked();
    StateVector::from_stacked(sv.disc().clone(), &out)
}

/// Discrete `H^k` norms of `L_d f_{0,d,i}` and `(I − L_d) f_{1,d}`.
#[derive(Debug, Clone, Serialize)]
pub struct SymmetryResidual {
    pub res0: Vec<f64>,
    pub res1: Option<f64>,
}

pub fn symmetry_residual(params: &ModelParams, d: &[f64], disc: &Arc<Discretization>) -> Result<SymmetryResidual> {
    let g = assemble_generator(params, d, disc)?;
    let modes = symmetry_modes(params, d, disc)?;
    let res0 = modes
        .f0
        .iter()
        .map(|f| apply_generator(&g, f)?.norm())
        .collect::<Result<Vec<_>>>()?;
    let res1 = match &modes.f1 {
        Some(f) => Some(f.axpy(-1.0, &apply_generator(&g, f)?).norm()?),
        None => None,
    };
    Ok(SymmetryResidual { res0, res1 })
}

fn eigen_coefficients(lambda: Complex64, s: f64) -> (Complex64, Complex64) {
    let c = lambda * lambda + lambda * (2.0 * s + 1.0) + s * (s + 1.0);
    let b = lambda * 2.0 + 2.0 * s + 2.0;
    (c, b)
}

/// Left side of the eigen-equation applied to grid samples.
pub fn eigen_equation_lhs(
    phi: &DVector<Complex64>,
    lambda: Complex64,
    params: &ModelParams,
    d: &[f64],
    disc: &Discretization,
) -> Result<DVector<Complex64>> {
    if phi.len() != disc.len() {
        return Err(Error::Dimension {
            expected: disc.len(),
            got: phi.len(),
        });
    }
    check_geometry(params, d, disc)?;
    let v = potential_samples(params, d, disc)?;
    let (c, b) = eigen_coefficients(lambda, params.s_p);
    let e = disc.euler().map(|x| Complex64::new(x, 0.0));
    let pr = disc.principal().map(|x| Complex64::new(x, 0.0));
    let ephi = &e * phi;
    let pphi = &pr * phi;
    Ok(DVector::from_fn(phi.len(), |i, _| {
        (c - v[i]) * phi[i] + b * ephi[i] + pphi[i]
    }))
}

/// `‖lhs‖_{L²} / ‖φ‖_{L²}` of the eigen-equation.
pub fn eigen_equation_residual(
    phi: &DVector<Complex64>,
    lambda: Complex64,
    params: &ModelParams,
    d: &[f64],
    disc: &Discretization,
) -> Result<f64> {
    let nphi = disc.l2_norm_complex(phi);
    if !(nphi > 0.0) {
        return Err(Error::Degenerate("‖φ‖ = 0".into()));
    }
    let lhs = eigen_equation_lhs(phi, lambda, params, d, disc)?;
    Ok(disc.l2_norm_complex(&lhs) / nphi)
}

/// Real-valued convenience wrapper of [`eigen_equation_residual`].
pub fn eigen_equation_residual_real(
    phi: &DVector<f64>,
    lambda: f64,
    params: &ModelParams,
    d: &[f64],
    disc: &Discretization,
) -> Result<f64> {
    let z = phi.map(|x| Complex64::new(x, 0.0));
    eigen_equation_residual(&z, Complex64::new(lambda, 0.0), params, d, disc)
}

// fourth-order accurate first and second derivatives along e_i, e_j
fn fd_derivs<F: Field>(phi: &F, y: &[f64], h: f64) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
    let n = y.len();
    let at = |shifts: &[(usize, f64)]| -> Result<f64> {
        let mut z = y.to_vec();
        for &(i, t) in shifts {
            z[i] += t;
        }
        phi.eval(&z)
    };
    let f0 = phi.eval(y)?;
    let mut grad = vec![0.0; n];
    let mut hess = vec![vec![0.0; n]; n];
    for i in 0..n {
        let (p1, m1, p2, m2) = (
            at(&[(i, h)])?,
            at(&[(i, -h)])?,
            at(&[(i, 2.0 * h)])?,
            at(&[(i, -2.0 * h)])?,
        );
        grad[i] = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
        hess[i][i] = (-p2 + 16.0 * p1 - 30.0 * f0 + 16.0 * m1 - m2) / (12.0 * h * h);
        for j in 0..i {
            let mixed = |h: f64| -> Result<f64> {
                Ok(
                    (at(&[(i, h), (j, h)])? - at(&[(i, h), (j, -h)])? - at(&[(i, -h), (j, h)])?
                        + at(&[(i, -h), (j, -h)])?)
                        / (4.0 * h * h),
                )
            };
            let v = (4.0 * mixed(h / 2.0)? - mixed(h)?) / 3.0;
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    Ok((f0, grad, hess))
}

/// Eigen-equation residual of a field of `y ∈ R^N` at scattered interior
/// points, by finite differences. Returns `max |lhs| / max |φ|`.
pub fn eigen_equation_residual_pointwise<F: Field>(
    phi: &F,
    lambda: f64,
    params: &ModelParams,
    d: &[f64],
    points: &[Vec<f64>],
) -> Result<f64> {
    params.check_boost(d)?;
    let s = params.s_p;
    let c = lambda * lambda + (2.0 * s + 1.0) * lambda + s * (s + 1.0);
    let b = 2.0 * lambda + 2.0 * s + 2.0;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for y in points {
        if y.len() != params.n {
            return Err(Error::Dimension {
                expected: params.n,
                got: y.len(),
            });
        }
        let (f, g, h) = fd_derivs(phi, y, 2e-3)?;
        let v = potential_v(y, params, d)?;
        let mut lhs = (c - v) * f;
        for i in 0..y.len() {
            lhs += b * y[i] * g[i] - h[i][i];
            for j in 0..y.len() {
                lhs += y[i] * y[j] * h[i][j];
            }
        }
        worst = worst.max(lhs.abs());
        scale = scale.max(f.abs());
    }
    if !(scale > 0.0) {
        return Err(Error::Degenerate("φ vanishes at every sample point".into()));
    }
    Ok(worst / scale)
}
