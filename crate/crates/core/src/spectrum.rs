//! Dense nonsymmetric eigendecomposition, spurious-mode rejection, mode
//! stability, Riesz projections and spectral equivalence.
//!
//! Eigenvalues come from a complex Schur form `Q T Qᴴ` of the balanced
//! matrix. Right and left eigenvectors are obtained by back substitution in
//! `T`, so every eigenvalue carries its left/right pair and the condition
//! number `|wᴴv| / (|w| |v|)`; a tiny value flags a (nearly) defective
//! eigenvalue.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::discretization::{build_disc, Discretization, Geometry};
use crate::error::{Error, Result};
use crate::lorentz::{eigenfunction_pullback, sample_field, GridField};
use crate::operator::{
    assemble_generator, eigen_equation_residual_pointwise, eigen_equation_residual_real, GeneratorMatrix,
};
use crate::params::{norm2, ModelParams};

type CMat = DMatrix<Complex64>;

const MAX_QR_ITER: usize = 10_000;

/// Full eigendecomposition with diagnostics.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    /// Right eigenvectors as columns, unit Euclidean norm.
    pub right: CMat,
    /// Left eigenvectors as columns, unit Euclidean norm.
    pub left: CMat,
    /// `‖(G − λ)v‖ / ‖v‖`.
    pub residuals: Vec<f64>,
    /// `|wᴴv|` for the normalized pair.
    pub condition: Vec<f64>,
    /// Resolution-stability flags; all `true` until [`filter_stable_eigs`].
    pub stable: Vec<bool>,
    /// Size of the matrix norm used to scale residual thresholds.
    pub matrix_norm: f64,
}

/// A group of eigenvalues closer than the clustering tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct Cluster {
    pub re: f64,
    pub im: f64,
    pub members: Vec<usize>,
    pub residual: f64,
    pub stable: bool,
}

impl Cluster {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn multiplicity(&self) -> usize {
        self.members.len()
    }
}

impl SpectrumReport {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvalue `i` is (numerically) defective.
    pub fn defective(&self, i: usize) -> bool {
        self.condition[i] < 1e-6
    }

    /// Indices of flagged eigenvalues with `Re λ ≥ omega`, sorted by decreasing real part.
    pub fn unstable(&self, omega: f64) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.stable[i] && self.eigenvalues[i].re >= omega)
            .collect();
        idx.sort_by(|&a, &b| self.eigenvalues[b].re.total_cmp(&self.eigenvalues[a].re));
        idx
    }

    /// Group eigenvalues within `tol` of each other (single linkage).
    pub fn clusters(&self, tol: f64) -> Vec<Cluster> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (self.eigenvalues[a], self.eigenvalues[b]);
            y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im))
        });
        let mut seen = vec![false; self.len()];
        let mut out = vec![];
        for &i in &order {
            if seen[i] {
                continue;
            }
            seen[i] = true;
            let mut members = vec![i];
            let mut k = 0;
            while k < members.len() {
                let c = self.eigenvalues[members[k]];
                for j in 0..self.len() {
                    if !seen[j] && (self.eigenvalues[j] - c).norm() <= tol {
                        seen[j] = true;
                        members.push(j);
                    }
                }
                k += 1;
            }
            let n = members.len() as f64;
            let mean = members.iter().map(|&j| self.eigenvalues[j]).sum::<Complex64>() / n;
            out.push(Cluster {
                re: mean.re,
                im: mean.im,
                residual: members.iter().map(|&j| self.residuals[j]).fold(0.0, f64::max),
                stable: members.iter().all(|&j| self.stable[j]),
                members,
            });
        }
        out
    }
}

// diagonal similarity D⁻¹ A D with power-of-two entries
fn balance(a: &mut DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows();
    let mut d = DVector::from_element(n, 1.0);
    let radix = 2.0f64;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let (mut cc, mut rr) = (c, r);
            while cc < rr / radix {
                cc *= radix;
                rr /= radix;
                f *= radix;
            }
            while cc >= rr * radix {
                cc /= radix;
                rr *= radix;
                f /= radix;
            }
            if (cc + rr) < 0.95 * s {
                converged = false;
                d[i] *= f;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
    }
    d
}

fn unit(v: &mut DVector<Complex64>) {
    let n = v.norm();
    if n > 0.0 {
        *v /= Complex64::new(n, 0.0);
    }
}

/// Eigendecomposition of a real square matrix.
pub fn eigendecompose(g: &DMatrix<f64>) -> Result<SpectrumReport> {
    let n = g.nrows();
    if n != g.ncols() {
        return Err(Error::Dimension {
            expected: n,
            got: g.ncols(),
        });
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("matrix has non-finite entries".into()));
    }
    let mut b = g.clone();
    let scale = balance(&mut b);
    let cb = b.map(|x| Complex64::new(x, 0.0));
    let schur = nalgebra::linalg::Schur::try_new(cb, f64::EPSILON, MAX_QR_ITER).ok_or_else(|| {
        Error::NumericalFailure(format!(
            "shifted QR did not converge within {MAX_QR_ITER} iterations (n = {n}, ‖G‖₁ = {:e})",
            g.lp_norm(1)
        ))
    })?;
    let (q, t) = schur.unpack();
    let tnorm = t.norm().max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * tnorm;
    let lambdas: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();

    let guard = |z: Complex64| {
        if z.norm() < small {
            Complex64::new(small, 0.0)
        } else {
            z
        }
    };
    let columns: Vec<(DVector<Complex64>, DVector<Complex64>)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let lam = lambdas[k];
            // right: (T − λ) x = 0, x_k = 1, x_j = 0 for j > k
            let mut x = DVector::from_element(n, Complex64::new(0.0, 0.0));
            x[k] = Complex64::new(1.0, 0.0);
            for i in (0..k).rev() {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in i + 1..=k {
                    acc += t[(i, j)] * x[j];
                }
                x[i] = -acc / guard(t[(i, i)] - lam);
            }
            // left: yᴴ (T − λ) = 0, y_k = 1, y_j = 0 for j < k
            let mut y = DVector::from_element(n, Complex64::new(0.0, 0.0));
            y[k] = Complex64::new(1.0, 0.0);
            for i in k + 1..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in k..i {
                    acc += y[j].conj() * t[(j, i)];
                }
                y[i] = (-acc / guard(t[(i, i)] - lam)).conj();
            }
            let mut v = &q * x;
            let mut w = &q * y;
            for i in 0..n {
                v[i] *= scale[i];
                w[i] /= scale[i];
            }
            unit(&mut v);
            unit(&mut w);
            (v, w)
        })
        .collect();
    let mut right = CMat::zeros(n, n);
    let mut left = CMat::zeros(n, n);
    for (k, (v, w)) in columns.into_iter().enumerate() {
        right.set_column(k, &v);
        left.set_column(k, &w);
    }
    let gc = g.map(|x| Complex64::new(x, 0.0));
    let gv = &gc * &right;
    let residuals = (0..n)
        .map(|k| (gv.column(k) - right.column(k) * lambdas[k]).norm())
        .collect();
    let condition = (0..n).map(|k| left.column(k).dotc(&right.column(k)).norm()).collect();
    Ok(SpectrumReport {
        eigenvalues: lambdas,
        right,
        left,
        residuals,
        condition,
        stable: vec![true; n],
        matrix_norm: g.lp_norm(1).max(g.transpose().lp_norm(1)),
    })
}

/// Keep eigenvalues of `fine`'s coarse partner that reappear at the finer
/// resolution within `tol_match`; the rest are marked spurious.
pub fn filter_stable_eigs(coarse: &SpectrumReport, fine: &SpectrumReport, tol_match: f64) -> SpectrumReport {
    let mut out = coarse.clone();
    for (i, lam) in coarse.eigenvalues.iter().enumerate() {
        let best = fine
            .eigenvalues
            .iter()
            .map(|mu| (mu - lam).norm())
            .fold(f64::INFINITY, f64::min);
        out.stable[i] = coarse.stable[i] && best <= tol_match;
    }
    out
}

/// Knobs shared by the spectral experiments.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralOpts {
    pub m: usize,
    pub ell_max: usize,
    pub tol_match: f64,
    pub tol_eig: f64,
    /// Relative residual bound `‖(G − λ)v‖ ≤ tol_resid ‖G‖`.
    pub tol_resid: f64,
    pub omega_cmp: f64,
}

impl Default for SpectralOpts {
    fn default() -> Self {
        SpectralOpts {
            m: 48,
            ell_max: 8,
            tol_match: 1e-6,
            tol_eig: 1e-6,
            tol_resid: 1e-10,
            omega_cmp: -0.5,
        }
    }
}

/// A generator solved at `M` and `2M` and filtered.
#[derive(Debug, Clone)]
pub struct ResolvedSpectrum {
    pub generator: GeneratorMatrix,
    pub report: SpectrumReport,
}

fn geometry_for(params: &ModelParams, ell: usize) -> Geometry {
    if params.n == 1 {
        Geometry::Interval
    } else {
        Geometry::Radial { dim: params.n, ell }
    }
}

/// Solve `L_d` at `M` and `2M` and flag resolution-stable eigenvalues.
pub fn resolved_spectrum(params: &ModelParams, d: &[f64], ell: usize, opts: &SpectralOpts) -> Result<ResolvedSpectrum> {
    let geo = geometry_for(params, ell);
    let coarse_disc = build_disc(geo, opts.m, params.r, params.k)?;
    let fine_disc = build_disc(geo, 2 * opts.m, params.r, params.k)?;
    let (gc, gf) = rayon::join(
        || assemble_generator(params, d, &coarse_disc),
        || assemble_generator(params, d, &fine_disc),
    );
    let (gc, gf) = (gc?, gf?);
    let (rc, rf) = rayon::join(|| eigendecompose(&gc.matrix), || eigendecompose(&gf.matrix));
    let mut report = filter_stable_eigs(&rc?, &rf?, opts.tol_match);
    let bound = opts.tol_resid * report.matrix_norm;
    for i in 0..report.len() {
        report.stable[i] &= report.residuals[i] <= bound;
    }
    Ok(ResolvedSpectrum { generator: gc, report })
}

/// One row of the unstable-set table.
#[derive(Debug, Clone, Serialize)]
pub struct UnstableEntry {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
    pub sector: Option<usize>,
    pub residual: f64,
}

/// Outcome of the mode-stability check.
#[derive(Debug, Clone, Serialize)]
pub struct ModeStabilityVerdict {
    pub pass: bool,
    pub unstable: Vec<UnstableEntry>,
    /// Total multiplicity found at `λ = 0` and `λ = 1`.
    pub mult0: usize,
    pub mult1: usize,
    /// Worst distance of the symmetry eigenvalues from `0` and `1`.
    pub max_error: f64,
    /// Every cluster of every sector, for reporting.
    #[serde(skip)]
    pub table: Vec<(Option<usize>, Cluster)>,
}

/// Dimension of degree-`ℓ` spherical harmonics on `S^{N−1}`.
pub fn harmonic_dimension(n: usize, ell: usize) -> usize {
    fn binom(a: i64, b: i64) -> i64 {
        if b < 0 || a < b {
            return 0;
        }
        (0..b).fold(1i64, |acc, i| acc * (a - i) / (i + 1))
    }
    let (n, l) = (n as i64, ell as i64);
    (binom(l + n - 1, n - 1) - binom(l + n - 3, n - 1)) as usize
}

/// Decide mode stability of `κ_d`: the resolution-stable spectrum in
/// `Re λ ≥ ω_0` must be exactly `{0, 1}` with multiplicities `(N, 1)`.
pub fn mode_stability_verdict(params: &ModelParams, d: &[f64], opts: &SpectralOpts) -> Result<ModeStabilityVerdict> {
    params.check_boost(d)?;
    if params.n >= 2 && norm2(d) != 0.0 {
        return Err(Error::Capability(
            "direct mode-stability solves for N ≥ 2 need d = 0; use the equivalence check for d ≠ 0".into(),
        ));
    }
    let sectors: Vec<Option<usize>> = if params.n == 1 {
        vec![None]
    } else {
        (0..=opts.ell_max).map(Some).collect()
    };
    let solved: Vec<(Option<usize>, ResolvedSpectrum)> = sectors
        .par_iter()
        .map(|&sec| Ok((sec, resolved_spectrum(params, d, sec.unwrap_or(0), opts)?)))
        .collect::<Result<_>>()?;
    let mut unstable = vec![];
    let mut table = vec![];
    let (mut mult0, mut mult1) = (0, 0);
    let mut max_error: f64 = 0.0;
    let mut extra = false;
    for (sec, rs) in &solved {
        let weight = sec.map_or(1, |l| harmonic_dimension(params.n, l));
        for c in rs.report.clusters(opts.tol_match) {
            if c.stable && c.re >= params.omega0 {
                let mult = c.multiplicity() * weight;
                let e0 = c.value().norm();
                let e1 = (c.value() - 1.0).norm();
                if e0 <= opts.tol_eig {
                    mult0 += mult;
                    max_error = max_error.max(e0);
                } else if e1 <= opts.tol_eig {
                    mult1 += mult;
                    max_error = max_error.max(e1);
                } else {
                    extra = true;
                }
                unstable.push(UnstableEntry {
                    re: c.re,
                    im: c.im,
                    multiplicity: mult,
                    sector: *sec,
                    residual: c.residual,
                });
            }
            table.push((*sec, c));
        }
    }
    unstable.sort_by(|a, b| b.re.total_cmp(&a.re));
    let pass = !extra && mult0 == params.n && mult1 == 1;
    Ok(ModeStabilityVerdict {
        pass,
        unstable,
        mult0,
        mult1,
        max_error,
        table,
    })
}

/// A spectral projector.
#[derive(Debug, Clone)]
pub struct Projector {
    pub matrix: DMatrix<f64>,
    pub target: Complex64,
    pub rank: usize,
}

impl Projector {
    /// `‖P² − P‖₂`.
    pub fn idempotence_defect(&self) -> f64 {
        (&self.matrix * &self.matrix - &self.matrix).norm()
    }
}

/// Riesz projections onto the eigenvalues `0` and `1`.
#[derive(Debug, Clone)]
pub struct RieszProjectors {
    pub p0: Projector,
    pub p1: Projector,
    pub pfull: DMatrix<f64>,
    /// Right eigenvectors of the cluster at 0 then 1 (real parts after phase fixing).
    pub right: DMatrix<f64>,
    /// Matching left vectors, normalized so that `leftᵀ right = I`.
    pub left: DMatrix<f64>,
}

fn real_basis(cols: &[DVector<Complex64>]) -> DMatrix<f64> {
    let n = cols.first().map_or(0, |c| c.len());
    let mut out = DMatrix::zeros(n, cols.len());
    for (k, c) in cols.iter().enumerate() {
        // rotate so the largest entry is real, then keep the real part
        let big = c
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap_or_default();
        let phase = if big.norm() > 0.0 {
            big.conj() / big.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            out[(i, k)] = (c[i] * phase).re;
        }
    }
    out
}

fn cluster_near(report: &SpectrumReport, target: f64, radius: f64) -> Vec<usize> {
    (0..report.len())
        .filter(|&i| report.stable[i] && (report.eigenvalues[i] - target).norm() <= radius)
        .collect()
}

/// Build `P_0`, `P_1` from bi-orthogonalized eigenvectors.
pub fn riesz_projectors(report: &SpectrumReport, params: &ModelParams) -> Result<RieszProjectors> {
    let radius = (params.omega0.abs() / 2.0).min(0.25);
    let i0 = cluster_near(report, 0.0, radius);
    let i1 = cluster_near(report, 1.0, radius);
    if i0.is_empty() || i1.is_empty() {
        return Err(Error::Precondition(format!(
            "eigenvalues 0 and 1 must be present and resolution-stable (found {} near 0, {} near 1)",
            i0.len(),
            i1.len()
        )));
    }
    let idx: Vec<usize> = i0.iter().chain(&i1).copied().collect();
    let v = real_basis(
        &idx.iter()
            .map(|&i| report.right.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    let w = real_basis(
        &idx.iter()
            .map(|&i| report.left.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    let gram = w.transpose() * &v;
    let sv = gram.clone().svd(false, false).singular_values;
    let smin = sv.min();
    if smin < 1e-10 * sv.max() || smin < 1e-12 {
        return Err(Error::Conditioning(format!(
            "left/right inner products nearly singular (σ_min = {smin:e})"
        )));
    }
    let ginv = gram
        .try_inverse()
        .ok_or_else(|| Error::Conditioning("singular left/right Gram matrix".into()))?;
    // left vectors dual to the right ones
    let left = w * ginv.transpose();
    let n0 = i0.len();
    let part = |range: std::ops::Range<usize>| {
        let vr = v.columns(range.start, range.len());
        let wr = left.columns(range.start, range.len());
        vr * wr.transpose()
    };
    let p0 = part(0..n0);
    let p1 = part(n0..idx.len());
    Ok(RieszProjectors {
        pfull: &p0 + &p1,
        p0: Projector {
            matrix: p0,
            target: Complex64::new(0.0, 0.0),
            rank: n0,
        },
        p1: Projector {
            matrix: p1,
            target: Complex64::new(1.0, 0.0),
            rank: idx.len() - n0,
        },
        right: v,
        left,
    })
}

/// Riesz projector by trapezoidal quadrature of the resolvent on a circle.
pub fn riesz_by_contour(g: &DMatrix<f64>, center: Complex64, radius: f64, points: usize) -> Result<DMatrix<f64>> {
    let n = g.nrows();
    let gc = g.map(|x| Complex64::new(x, 0.0));
    let terms: Vec<CMat> = (0..points)
        .into_par_iter()
        .map(|j| {
            let e = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / points as f64);
            let z = center + e * radius;
            let a = CMat::identity(n, n) * z - &gc;
            let inv = a
                .lu()
                .try_inverse()
                .ok_or_else(|| Error::NumericalFailure(format!("resolvent singular at z = {z}")))?;
            Ok(inv * (e * radius / points as f64))
        })
        .collect::<Result<_>>()?;
    let sum = terms.into_iter().fold(CMat::zeros(n, n), |a, b| a + b);
    Ok(sum.map(|z| z.re))
}

/// Smallest singular value of `z − G` along `Re z = ω`, `|Im z| ≤ height`,
/// skipping points within `|ω|/2` of 0 and 1. Euclidean norm on grid values.
pub fn resolvent_proxy(g: &DMatrix<f64>, omega: f64, height: f64, samples: usize) -> f64 {
    let n = g.nrows();
    let gc = g.map(|x| Complex64::new(x, 0.0));
    let excl = omega.abs() / 2.0;
    (0..samples)
        .into_par_iter()
        .filter_map(|j| {
            let t = -height + 2.0 * height * j as f64 / (samples.max(2) - 1) as f64;
            let z = Complex64::new(omega, t);
            if z.norm() < excl || (z - 1.0).norm() < excl {
                return None;
            }
            let a = CMat::identity(n, n) * z - &gc;
            Some(a.singular_values().min())
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// One row of the spectral-equivalence table.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceRow {
    pub d: Vec<f64>,
    /// `(λ_d, nearest λ_0)` pairs as `[re_d, im_d, re_0, im_0]`.
    pub matched: Vec<[f64; 4]>,
    /// Stable eigenvalues of `L_d` above `ω_cmp` with no partner, `[re, im, residual]`.
    pub unmatched: Vec<[f64; 3]>,
    pub max_mismatch: f64,
    /// Eigen-equation residuals of rest-frame eigenfunctions pulled back to `d`, per `λ ∈ {0, 1}`.
    pub pullback_residuals: Vec<(f64, f64)>,
}

fn grid_eigenfunction(report: &SpectrumReport, idx: usize, disc: &Arc<Discretization>) -> Result<GridField> {
    let n = disc.len();
    let col = report.right.column(idx).rows(0, n).into_owned();
    let basis = real_basis(&[col]);
    GridField::new(disc.clone(), basis.column(0).into_owned())
}

/// Compare resolution-stable spectra of `L_d` with `L_0` above `ω_cmp` and
/// transport the rest-frame symmetry eigenfunctions to every `d`.
pub fn spectral_equivalence_check(
    params: &ModelParams,
    d_list: &[Vec<f64>],
    opts: &SpectralOpts,
) -> Result<Vec<EquivalenceRow>> {
    if params.n == 1 {
        let zero = vec![0.0];
        let base = resolved_spectrum(params, &zero, 0, opts)?;
        let ref_vals: Vec<Complex64> = (0..base.report.len())
            .filter(|&i| base.report.stable[i])
            .map(|i| base.report.eigenvalues[i])
            .collect();
        let disc = base.generator.disc.clone();
        let mut rest = vec![];
        for target in [0.0, 1.0] {
            let i = cluster_near(&base.report, target, 1e-3)
                .into_iter()
                .next()
                .ok_or_else(|| Error::Precondition(format!("λ = {target} missing in σ(L_0)")))?;
            rest.push((target, grid_eigenfunction(&base.report, i, &disc)?));
        }
        d_list
            .par_iter()
            .map(|d| {
                let rs = resolved_spectrum(params, d, 0, opts)?;
                let mut row = EquivalenceRow {
                    d: d.clone(),
                    matched: vec![],
                    unmatched: vec![],
                    max_mismatch: 0.0,
                    pullback_residuals: vec![],
                };
                for i in 0..rs.report.len() {
                    let lam = rs.report.eigenvalues[i];
                    if !rs.report.stable[i] || lam.re <= opts.omega_cmp {
                        continue;
                    }
                    let (best, dist) = ref_vals
                        .iter()
                        .map(|mu| (*mu, (mu - lam).norm()))
                        .min_by(|a, b| a.1.total_cmp(&b.1))
                        .unwrap_or((Complex64::new(f64::NAN, f64::NAN), f64::INFINITY));
                    if dist <= opts.tol_match {
                        row.matched.push([lam.re, lam.im, best.re, best.im]);
                        row.max_mismatch = row.max_mismatch.max(dist);
                    } else {
                        row.unmatched.push([lam.re, lam.im, rs.report.residuals[i]]);
                    }
                }
                for (lam, f) in &rest {
                    let phi = sample_field(&eigenfunction_pullback(f.clone(), *lam, params, d)?, &disc)?;
                    let r = eigen_equation_residual_real(&phi, *lam, params, d, &disc)?;
                    row.pullback_residuals.push((*lam, r));
                }
                Ok(row)
            })
            .collect()
    } else {
        // closed-form rest-frame eigenfunctions, residuals at scattered points
        let pts = interior_points(params.n, 24, 0.6 * params.r);
        d_list
            .iter()
            .map(|d| {
                let mut row = EquivalenceRow {
                    d: d.clone(),
                    matched: vec![],
                    unmatched: vec![],
                    max_mismatch: 0.0,
                    pullback_residuals: vec![],
                };
                let one = |_: &[f64]| Ok(1.0);
                let phi = eigenfunction_pullback(one, 1.0, params, d)?;
                row.pullback_residuals
                    .push((1.0, eigen_equation_residual_pointwise(&phi, 1.0, params, d, &pts)?));
                let mut worst: f64 = 0.0;
                for i in 0..params.n {
                    let yi = move |y: &[f64]| Ok(y[i]);
                    let phi = eigenfunction_pullback(yi, 0.0, params, d)?;
                    worst = worst.max(eigen_equation_residual_pointwise(&phi, 0.0, params, d, &pts)?);
                }
                row.pullback_residuals.push((0.0, worst));
                Ok(row)
            })
            .collect()
    }
}

// deterministic low-discrepancy points in the ball of radius rho
fn interior_points(n: usize, count: usize, rho: f64) -> Vec<Vec<f64>> {
    let primes = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0];
    let halton = |mut i: usize, b: f64| {
        let (mut f, mut r) = (1.0, 0.0);
        while i > 0 {
            f /= b;
            r += f * (i as f64 % b);
            i = (i as f64 / b) as usize;
        }
        r
    };
    (1..=count)
        .map(|i| {
            let v: Vec<f64> = (0..n)
                .map(|k| 2.0 * halton(i, primes[k % primes.len()]) - 1.0)
                .collect();
            let nv = norm2(&v).max(1e-12);
            let scale = if nv > 1.0 { rho / nv } else { rho };
            v.iter().map(|x| x * scale).collect()
        })
        .collect()
}
