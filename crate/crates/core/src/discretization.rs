//! Chebyshev–Gauss–Lobatto collocation, Clenshaw–Curtis quadrature and the
//! discrete `H^k × H^{k−1}` norm.
//!
//! Two geometries are supported. The *interval* is the ball `B^1_R = [−R, R]`.
//! A *radial sector* of degree `ℓ` in dimension `N` represents fields
//! `q(y) = r^ℓ H(r²) Y_ℓ(y/r)` with `Y_ℓ` an `L²(S^{N−1})`-normalized spherical
//! harmonic; the unknown is the reduced amplitude `H` sampled at nodes
//! `x = r² ∈ [0, R²]`. In that variable every operator of the linearization
//! has polynomial coefficients and no `1/r` singularity:
//!
//! ```text
//! y·∇  ↦  ℓ + 2x ∂_x
//! Δ    ↦  4x ∂_x² + (4ℓ + 2N) ∂_x
//! ```

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Which collocation geometry a discretization lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Geometry {
    /// `N = 1`, nodes on `[−R, R]`.
    Interval,
    /// Spherical-harmonic sector of degree `ell` in dimension `dim ≥ 2`.
    Radial { dim: usize, ell: usize },
}

#[derive(Debug, Clone)]
struct RadialQuadrature {
    // samples of native fields at x = r_j², r_j Clenshaw–Curtis nodes on [0, R]
    interp: DMatrix<f64>,
    r: Vec<f64>,
    weights: Vec<f64>,
}

/// Immutable collocation data for one geometry and resolution.
#[derive(Debug, Clone)]
pub struct Discretization {
    geometry: Geometry,
    m: usize,
    radius: f64,
    k: usize,
    nodes: Vec<f64>,
    bary: Vec<f64>,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
    weights: Vec<f64>,
    radial: Option<RadialQuadrature>,
    terms_q1: Vec<(DVector<f64>, DMatrix<f64>)>,
    terms_q2: Vec<(DVector<f64>, DMatrix<f64>)>,
}

/// Chebyshev–Gauss–Lobatto nodes on `[a, b]` in ascending order.
pub fn cgl_nodes(m: usize, a: f64, b: f64) -> Vec<f64> {
    (0..=m)
        .map(|j| {
            let c = -(j as f64 * PI / m as f64).cos();
            // symmetric evaluation keeps the midpoint exact
            let c = if 2 * j == m { 0.0 } else { c };
            a + (b - a) * (c + 1.0) / 2.0
        })
        .collect()
}

fn cgl_bary_weights(m: usize) -> Vec<f64> {
    (0..=m)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == m {
                0.5 * sign
            } else {
                sign
            }
        })
        .collect()
}

/// Clenshaw–Curtis weights for the CGL nodes on `[a, b]`.
pub fn clenshaw_curtis(m: usize, a: f64, b: f64) -> Vec<f64> {
    let mf = m as f64;
    let mut w = vec![0.0; m + 1];
    let theta: Vec<f64> = (0..=m).map(|j| j as f64 * PI / mf).collect();
    let mut v = vec![1.0; m.saturating_sub(1)];
    if m.is_multiple_of(2) {
        w[0] = 1.0 / (mf * mf - 1.0);
        w[m] = w[0];
        for k in 1..m / 2 {
            let kf = k as f64;
            for (j, vj) in v.iter_mut().enumerate() {
                *vj -= 2.0 * (2.0 * kf * theta[j + 1]).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        for (j, vj) in v.iter_mut().enumerate() {
            *vj -= (mf * theta[j + 1]).cos() / (mf * mf - 1.0);
        }
    } else {
        w[0] = 1.0 / (mf * mf);
        w[m] = w[0];
        for k in 1..=(m - 1) / 2 {
            let kf = k as f64;
            for (j, vj) in v.iter_mut().enumerate() {
                *vj -= 2.0 * (2.0 * kf * theta[j + 1]).cos() / (4.0 * kf * kf - 1.0);
            }
        }
    }
    for j in 1..m {
        w[j] = 2.0 * v[j - 1] / mf;
    }
    let scale = (b - a) / 2.0;
    w.iter().map(|x| x * scale).collect()
}

fn diff_matrix(nodes: &[f64], bary: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                let v = (bary[j] / bary[i]) / (nodes[i] - nodes[j]);
                d[(i, j)] = v;
                row_sum += v;
            }
        }
        d[(i, i)] = -row_sum;
    }
    d
}

// make every row sum to `target` exactly up to the final addition, the
// value the operator takes on constants
fn pin_row_sums(mut a: DMatrix<f64>, target: f64) -> DMatrix<f64> {
    for i in 0..a.nrows() {
        let off: f64 = (0..a.ncols()).filter(|&j| j != i).map(|j| a[(i, j)]).sum();
        a[(i, i)] = target - off;
    }
    a
}

fn bary_row(nodes: &[f64], bary: &[f64], x: f64) -> Vec<f64> {
    let n = nodes.len();
    let mut row = vec![0.0; n];
    for j in 0..n {
        if x == nodes[j] {
            row[j] = 1.0;
            return row;
        }
    }
    let mut denom = 0.0;
    for j in 0..n {
        let t = bary[j] / (x - nodes[j]);
        row[j] = t;
        denom += t;
    }
    for v in &mut row {
        *v /= denom;
    }
    row
}

/// Build a discretization at polynomial resolution `m`.
pub fn build_disc(geometry: Geometry, m: usize, radius: f64, k: usize) -> Result<Arc<Discretization>> {
    if m < 8 {
        return Err(Error::Resolution(format!("M ≥ 8 required, got {m}")));
    }
    if !(radius >= 1.0) {
        return Err(Error::ParameterDomain(format!("R ≥ 1 violated (R = {radius})")));
    }
    if let Geometry::Radial { dim, .. } = geometry {
        if dim < 2 {
            return Err(Error::Capability("radial sectors need N ≥ 2".into()));
        }
    }
    let (a, b) = match geometry {
        Geometry::Interval => (-radius, radius),
        Geometry::Radial { .. } => (0.0, radius * radius),
    };
    let nodes = cgl_nodes(m, a, b);
    let bary = cgl_bary_weights(m);
    let d1 = diff_matrix(&nodes, &bary);
    let mut d2 = &d1 * &d1;
    // rows of D² annihilate constants exactly
    for i in 0..=m {
        let off: f64 = (0..=m).filter(|&j| j != i).map(|j| d2[(i, j)]).sum();
        d2[(i, i)] = -off;
    }
    let weights = clenshaw_curtis(m, a, b);
    let radial = match geometry {
        Geometry::Interval => None,
        Geometry::Radial { .. } => {
            let r = cgl_nodes(m, 0.0, radius);
            let w = clenshaw_curtis(m, 0.0, radius);
            let mut interp = DMatrix::zeros(m + 1, m + 1);
            for (i, ri) in r.iter().enumerate() {
                let x = (ri * ri).min(b);
                for (j, v) in bary_row(&nodes, &bary, x).into_iter().enumerate() {
                    interp[(i, j)] = v;
                }
            }
            Some(RadialQuadrature { interp, r, weights: w })
        }
    };
    let mut disc = Discretization {
        geometry,
        m,
        radius,
        k,
        nodes,
        bary,
        d1,
        d2,
        weights,
        radial,
        terms_q1: vec![],
        terms_q2: vec![],
    };
    disc.rebuild_terms();
    Ok(Arc::new(disc))
}

impl Discretization {
    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.m + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Native collocation nodes (`y` on the interval, `x = r²` on a sector).
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Physical coordinate of every node (`y`, or `r = √x`).
    pub fn physical_nodes(&self) -> Vec<f64> {
        match self.geometry {
            Geometry::Interval => self.nodes.clone(),
            Geometry::Radial { .. } => self.nodes.iter().map(|x| x.max(0.0).sqrt()).collect(),
        }
    }

    pub fn d1(&self) -> &DMatrix<f64> {
        &self.d1
    }

    pub fn d2(&self) -> &DMatrix<f64> {
        &self.d2
    }

    /// Clenshaw–Curtis weights in the native variable.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same grid shape with a different Sobolev index.
    pub fn with_k(&self, k: usize) -> Arc<Discretization> {
        let mut disc = Discretization { k, ..self.clone() };
        disc.rebuild_terms();
        Arc::new(disc)
    }

    fn rebuild_terms(&mut self) {
        self.terms_q1 = self.build_terms(self.k);
        self.terms_q2 = if self.k >= 1 {
            self.build_terms(self.k - 1)
        } else {
            vec![]
        };
    }

    /// The matrix of `y·∇` acting on native samples.
    pub fn euler(&self) -> DMatrix<f64> {
        match self.geometry {
            Geometry::Interval => DMatrix::from_diagonal(&DVector::from_column_slice(&self.nodes)) * &self.d1,
            Geometry::Radial { ell, .. } => {
                let x = DMatrix::from_diagonal(&DVector::from_column_slice(&self.nodes));
                let e = x * &self.d1 * 2.0 + DMatrix::identity(self.len(), self.len()) * ell as f64;
                pin_row_sums(e, ell as f64)
            }
        }
    }

    /// The matrix of `Δ` acting on native samples.
    pub fn laplacian(&self) -> DMatrix<f64> {
        match self.geometry {
            Geometry::Interval => self.d2.clone(),
            Geometry::Radial { dim, ell } => {
                let x = DMatrix::from_diagonal(&DVector::from_column_slice(&self.nodes));
                pin_row_sums(
                    x * &self.d2 * 4.0 + &self.d1 * (4.0 * ell as f64 + 2.0 * dim as f64),
                    0.0,
                )
            }
        }
    }

    /// The matrix of `(y_i y_j − δ_ij) ∂_i ∂_j`.
    pub fn principal(&self) -> DMatrix<f64> {
        match self.geometry {
            Geometry::Interval => {
                let c = DVector::from_iterator(self.len(), self.nodes.iter().map(|y| y * y - 1.0));
                DMatrix::from_diagonal(&c) * &self.d2
            }
            Geometry::Radial { ell, .. } => {
                // y_i y_j ∂_ij = (y·∇)² − y·∇
                let e = self.euler();
                let l = ell as f64;
                pin_row_sums(&e * &e - &e - self.laplacian(), l * l - l)
            }
        }
    }

    /// Barycentric interpolation weights at a native coordinate.
    pub fn interp_row(&self, x: f64) -> Result<Vec<f64>> {
        let (a, b) = (self.nodes[0], self.nodes[self.m]);
        let slack = 1e-12 * (b - a);
        if x < a - slack || x > b + slack || !x.is_finite() {
            return Err(Error::Extrapolation(format!("point {x} outside [{a}, {b}]")));
        }
        Ok(bary_row(&self.nodes, &self.bary, x.clamp(a, b)))
    }

    /// Evaluate the interpolant of `field` at a native coordinate.
    pub fn interpolate(&self, field: &DVector<f64>, x: f64) -> Result<f64> {
        let row = self.interp_row(x)?;
        Ok(row.iter().zip(field.iter()).map(|(a, b)| a * b).sum())
    }

    /// Interpolation matrix from the nodes to a set of native coordinates.
    pub fn interp_matrix(&self, targets: &[f64]) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(targets.len(), self.len());
        for (i, &x) in targets.iter().enumerate() {
            for (j, v) in self.interp_row(x)?.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    /// Quadratic-form pieces of the `s`-th derivative term: the term equals
    /// `Σ_t Σ_i c_t[i] (L_t h)[i]²`.
    fn derivative_terms(&self, s: usize) -> Vec<(DVector<f64>, DMatrix<f64>)> {
        match self.geometry {
            Geometry::Interval => {
                let mut l = DMatrix::identity(self.len(), self.len());
                for _ in 0..s {
                    l = &self.d1 * l;
                }
                vec![(DVector::from_column_slice(&self.weights), l)]
            }
            Geometry::Radial { dim, ell } => {
                let rq = self.radial.as_ref().expect("radial quadrature");
                let lap = self.laplacian();
                let mut base = DMatrix::identity(self.len(), self.len());
                for _ in 0..s / 2 {
                    base = &lap * base;
                }
                let measure = |extra: i32| {
                    DVector::from_iterator(
                        rq.r.len(),
                        rq.r.iter()
                            .zip(&rq.weights)
                            .map(|(r, w)| w * r.powi(dim as i32 - 1 + extra)),
                    )
                };
                let l = ell as i32;
                if s.is_multiple_of(2) {
                    vec![(measure(2 * l), &rq.interp * base)]
                } else if ell == 0 {
                    // g' = 2 r H'(r²)
                    vec![(measure(2), &rq.interp * &self.d1 * base * 2.0)]
                } else {
                    // |g'|² + ℓ(ℓ+N−2) g²/r² with g = r^ℓ H(r²)
                    let x = DMatrix::from_diagonal(&DVector::from_column_slice(&self.nodes));
                    let radial = (x * &self.d1 * 2.0 + DMatrix::identity(self.len(), self.len()) * ell as f64) * &base;
                    let ang = (ell * (ell + dim - 2)) as f64;
                    vec![
                        (measure(2 * l - 2), &rq.interp * radial),
                        (measure(2 * l - 2) * ang, &rq.interp * base),
                    ]
                }
            }
        }
    }

    fn build_terms(&self, order: usize) -> Vec<(DVector<f64>, DMatrix<f64>)> {
        (0..=order).flat_map(|s| self.derivative_terms(s)).collect()
    }

    fn eval_terms(terms: &[(DVector<f64>, DMatrix<f64>)], h: &DVector<f64>) -> f64 {
        terms
            .iter()
            .map(|(c, l)| {
                let v = l * h;
                c.iter().zip(v.iter()).map(|(c, v)| c * v * v).sum::<f64>()
            })
            .sum()
    }

    fn terms_for(&self, order: usize) -> std::borrow::Cow<'_, [(DVector<f64>, DMatrix<f64>)]> {
        if order == self.k {
            std::borrow::Cow::Borrowed(&self.terms_q1)
        } else if order + 1 == self.k {
            std::borrow::Cow::Borrowed(&self.terms_q2)
        } else {
            std::borrow::Cow::Owned(self.build_terms(order))
        }
    }

    fn level_term(&self, h: &DVector<f64>) -> f64 {
        Self::eval_terms(&self.derivative_terms(0), h)
    }

    fn seminorms_sq(&self, field: &DVector<f64>, order: usize) -> f64 {
        Self::eval_terms(&self.terms_for(order), field)
    }

    /// `L²(B^N_R)` norm of a scalar field.
    pub fn l2_norm(&self, field: &DVector<f64>) -> f64 {
        self.level_term(field).max(0.0).sqrt()
    }

    /// `L²` norm for complex samples.
    pub fn l2_norm_complex(&self, field: &DVector<num_complex::Complex64>) -> f64 {
        let re = field.map(|z| z.re);
        let im = field.map(|z| z.im);
        (self.level_term(&re) + self.level_term(&im)).max(0.0).sqrt()
    }

    /// Discrete `H^k × H^{k−1}` norm of the pair `(q1, q2)` with this grid's `k`.
    pub fn pair_norm(&self, q1: &DVector<f64>, q2: &DVector<f64>) -> Result<f64> {
        self.pair_norm_k(q1, q2, self.k)
    }

    pub fn pair_norm_k(&self, q1: &DVector<f64>, q2: &DVector<f64>, k: usize) -> Result<f64> {
        if 2 * k > self.m {
            return Err(Error::Resolution(format!(
                "k ≤ M/2 required for derivative accuracy (k = {k}, M = {})",
                self.m
            )));
        }
        if k == 0 {
            return Err(Error::ParameterDomain("k ≥ 1".into()));
        }
        let a = self.seminorms_sq(q1, k);
        let b = self.seminorms_sq(q2, k - 1);
        Ok((a + b).max(0.0).sqrt())
    }

    /// Gram matrix `W` with `‖v‖² = vᵀ W v` for stacked pairs.
    pub fn pair_gram(&self) -> Result<DMatrix<f64>> {
        let n = self.len();
        if 2 * self.k > self.m {
            return Err(Error::Resolution(format!(
                "k ≤ M/2 required for derivative accuracy (k = {}, M = {})",
                self.k, self.m
            )));
        }
        let block = |terms: &[(DVector<f64>, DMatrix<f64>)]| {
            let mut g = DMatrix::zeros(n, n);
            for (c, l) in terms {
                g += l.transpose() * DMatrix::from_diagonal(c) * l;
            }
            g
        };
        let mut g = DMatrix::zeros(2 * n, 2 * n);
        g.view_mut((0, 0), (n, n)).copy_from(&block(&self.terms_q1));
        g.view_mut((n, n), (n, n)).copy_from(&block(&self.terms_q2));
        Ok(g)
    }

    /// Sample a scalar function of the physical coordinate.
    pub fn sample_function<F>(&self, f: F) -> Result<DVector<f64>>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let pts = self.physical_nodes();
        let vals: Vec<f64> = pts.into_iter().map(f).collect::<Result<_>>()?;
        if let Some(j) = vals.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!("non-finite sample at node {j}")));
        }
        Ok(DVector::from_vec(vals))
    }

    /// Sample a pair-valued function into a state.
    pub fn sample_pair<F>(self: &Arc<Self>, f: F) -> Result<StateVector>
    where
        F: Fn(f64) -> Result<(f64, f64)>,
    {
        let pts = self.physical_nodes();
        let mut q1 = DVector::zeros(self.len());
        let mut q2 = DVector::zeros(self.len());
        for (j, y) in pts.into_iter().enumerate() {
            let (a, b) = f(y)?;
            q1[j] = a;
            q2[j] = b;
        }
        Ok(StateVector::new(self.clone(), q1, q2))
    }

    /// Spectral derivative of order 0, 1 or 2 in the native variable.
    pub fn differentiate(&self, field: &DVector<f64>, order: usize) -> Result<DVector<f64>> {
        if field.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: field.len(),
            });
        }
        match order {
            0 => Ok(field.clone()),
            1 => Ok(&self.d1 * field),
            2 => Ok(&self.d2 * field),
            _ => Err(Error::Capability(format!("derivative order {order} > 2"))),
        }
    }
}

/// A pair `(q1, q2)` sampled on a discretization.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub q1: DVector<f64>,
    pub q2: DVector<f64>,
    disc: Arc<Discretization>,
}

impl StateVector {
    pub fn new(disc: Arc<Discretization>, q1: DVector<f64>, q2: DVector<f64>) -> Self {
        assert_eq!(q1.len(), disc.len());
        assert_eq!(q2.len(), disc.len());
        StateVector { q1, q2, disc }
    }

    pub fn zeros(disc: Arc<Discretization>) -> Self {
        let n = disc.len();
        StateVector::new(disc, DVector::zeros(n), DVector::zeros(n))
    }

    pub fn from_stacked(disc: Arc<Discretization>, v: &DVector<f64>) -> Result<Self> {
        let n = disc.len();
        if v.len() != 2 * n {
            return Err(Error::Dimension {
                expected: 2 * n,
                got: v.len(),
            });
        }
        Ok(StateVector::new(
            disc,
            v.rows(0, n).into_owned(),
            v.rows(n, n).into_owned(),
        ))
    }

    pub fn stacked(&self) -> DVector<f64> {
        let n = self.disc.len();
        let mut v = DVector::zeros(2 * n);
        v.rows_mut(0, n).copy_from(&self.q1);
        v.rows_mut(n, n).copy_from(&self.q2);
        v
    }

    pub fn disc(&self) -> &Arc<Discretization> {
        &self.disc
    }

    /// Discrete `H^k × H^{k−1}` norm.
    pub fn norm(&self) -> Result<f64> {
        sobolev_norm(self)
    }

    pub fn scaled(&self, a: f64) -> Self {
        StateVector::new(self.disc.clone(), &self.q1 * a, &self.q2 * a)
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &StateVector) -> Self {
        StateVector::new(self.disc.clone(), &self.q1 + &other.q1 * a, &self.q2 + &other.q2 * a)
    }

    pub fn max_abs(&self) -> f64 {
        self.q1.amax().max(self.q2.amax())
    }
}

/// Discrete `H^k × H^{k−1}` norm of a state.
pub fn sobolev_norm(sv: &StateVector) -> Result<f64> {
    sv.disc.pair_norm(&sv.q1, &sv.q2)
}

#[cfg(test)]
#[allow(clippy::excessive_precision, clippy::approx_constant)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn interval(m: usize) -> Arc<Discretization> {
        build_disc(Geometry::Interval, m, 1.0, 1).unwrap()
    }

    #[test]
    fn rejects_coarse_grids() {
        assert!(matches!(
            build_disc(Geometry::Interval, 6, 1.0, 1),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn derivative_exact_on_polynomials() {
        let d = interval(8);
        let f = d.sample_function(|y| Ok(y.powi(3))).unwrap();
        let df = d.differentiate(&f, 1).unwrap();
        for (y, v) in d.nodes().iter().zip(df.iter()) {
            assert_abs_diff_eq!(*v, 3.0 * y * y, epsilon = 1e-12);
        }
        let d = interval(16);
        let f = d.sample_function(|y| Ok(y.powi(4))).unwrap();
        let ddf = d.differentiate(&f, 2).unwrap();
        for (y, v) in d.nodes().iter().zip(ddf.iter()) {
            assert_abs_diff_eq!(*v, 12.0 * y * y, epsilon = 1e-10);
        }
        assert!(d.differentiate(&f, 3).is_err());
    }

    #[test]
    fn derivative_of_exponential() {
        let d = interval(32);
        let f = d.sample_function(|y| Ok(y.exp())).unwrap();
        let df = d.differentiate(&f, 1).unwrap();
        let err = (df - &f).amax();
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn constants_differentiate_to_zero() {
        let d = interval(20);
        let f = d.sample_function(|_| Ok(3.5)).unwrap();
        assert!(d.differentiate(&f, 1).unwrap().amax() < 1e-12);
        assert!(d.differentiate(&f, 2).unwrap().amax() < 1e-10);
    }

    #[test]
    fn quadrature_exactness() {
        for m in [8, 9, 16, 17] {
            let d = interval(m);
            let w = d.weights();
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
            // degree ≤ M for Clenshaw–Curtis
            let s: f64 = w.iter().zip(d.nodes()).map(|(w, y)| w * y.powi(6)).sum();
            assert_abs_diff_eq!(s, 2.0 / 7.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn norm_examples() {
        let d = interval(32);
        let one = d.sample_pair(|_| Ok((1.0, 0.0))).unwrap();
        assert_abs_diff_eq!(one.norm().unwrap(), 2f64.sqrt(), epsilon = 1e-14);
        assert_eq!(StateVector::zeros(d.clone()).norm().unwrap(), 0.0);
        let s = d.sample_pair(|y| Ok(((PI * y).sin(), 0.0))).unwrap();
        assert_abs_diff_eq!(s.norm().unwrap(), 3.296_908_309_475_615_158_76, epsilon = 1e-10);
    }

    #[test]
    fn norm_guard() {
        let d = build_disc(Geometry::Interval, 8, 1.0, 5).unwrap();
        let z = StateVector::zeros(d);
        assert!(matches!(z.norm(), Err(Error::Resolution(_))));
    }

    #[test]
    fn interpolation_is_identity_at_nodes() {
        let d = interval(24);
        let f = d.sample_function(|y| Ok((2.0 * y).sin() + 0.1)).unwrap();
        for (j, &x) in d.nodes().iter().enumerate() {
            let v = d.interpolate(&f, x).unwrap();
            assert!((v - f[j]).abs() <= 1e-13);
        }
        assert!(matches!(d.interpolate(&f, 1.5), Err(Error::Extrapolation(_))));
    }

    #[test]
    fn spectral_interpolation_convergence() {
        let err = |m: usize| {
            let d = interval(m);
            let f = d.sample_function(|y| Ok(1.0 / (2.0 + y))).unwrap();
            (0..200)
                .map(|i| -1.0 + 2.0 * (i as f64 + 0.37) / 200.0)
                .map(|y| (d.interpolate(&f, y).unwrap() - 1.0 / (2.0 + y)).abs())
                .fold(0.0, f64::max)
        };
        let (e16, e32) = (err(16), err(32));
        assert!(e32 / e16 <= 1e-3, "{e16} {e32}");
    }

    #[test]
    fn radial_norm_of_constant_matches_ball_volume() {
        // ‖1‖²_{L²(B³)} = 4π/3 / |S²| with L²-normalised Y_0 = 1/√(4π): ∫ r² dr = 1/3
        let d = build_disc(Geometry::Radial { dim: 3, ell: 0 }, 16, 1.0, 2).unwrap();
        let f = d.sample_function(|_| Ok(1.0)).unwrap();
        assert_abs_diff_eq!(d.l2_norm(&f), (1.0f64 / 3.0).sqrt(), epsilon = 1e-13);
        // q = r Y_1: ∫ r² · r² dr = 1/5, ∫|∇q|² = ∫ (1 + 2) r² dr = 1
        let d = build_disc(Geometry::Radial { dim: 3, ell: 1 }, 16, 1.0, 1).unwrap();
        let h = d.sample_function(|_| Ok(1.0)).unwrap();
        let z = DVector::zeros(d.len());
        let n = d.pair_norm(&h, &z).unwrap();
        assert_abs_diff_eq!(n * n, 0.2 + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn radial_laplacian_of_solid_polynomial() {
        // q = r^ℓ r² Y_ℓ in N = 3: Δ q = (2(2ℓ+3)) r^ℓ Y_ℓ, i.e. H = x ↦ 4ℓ+6
        for ell in 0..4 {
            let d = build_disc(Geometry::Radial { dim: 3, ell }, 12, 1.0, 1).unwrap();
            let h = DVector::from_column_slice(d.nodes());
            let lap = d.laplacian() * h;
            for v in lap.iter() {
                assert_abs_diff_eq!(*v, 4.0 * ell as f64 + 6.0, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn norm_monotone_in_k() {
        let d = interval(32);
        let s = d.sample_pair(|y| Ok(((3.0 * y).cos(), y * y))).unwrap();
        let mut last = 0.0;
        for k in 1..=4 {
            let n = d.pair_norm_k(&s.q1, &s.q2, k).unwrap();
            assert!(n >= last);
            last = n;
        }
    }

    #[test]
    fn gram_reproduces_norm() {
        let d = interval(10);
        let g = d.pair_gram().unwrap();
        let s = d.sample_pair(|y| Ok((y.sin(), y.cos()))).unwrap();
        let v = s.stacked();
        let q = (v.transpose() * &g * &v)[(0, 0)];
        assert_abs_diff_eq!(q.sqrt(), s.norm().unwrap(), epsilon = 1e-12);
    }
}
