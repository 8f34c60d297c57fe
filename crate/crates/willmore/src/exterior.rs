//! Exterior algebra on R^n up to degree two and the Grassmannian G(2,n)
//! of oriented 2-planes, embedded as the unit decomposable bivectors.
//!
//! Conventions:
//!
//! ```text
//! <v1∧w1, v2∧w2> = <v1,v2><w1,w2> - <v1,w2><v2,w1>
//! (v∧u)⌟w        = (v·w)u - (u·w)v
//! T_P G(2,n)     = span{ e_i∧e_a : i in {1,2}, a >= 3 }
//! ```
//!
//! for an orthonormal frame (e_1, e_2) of the plane P completed to an
//! orthonormal basis of R^n. Bivectors are stored densely in the strictly
//! upper triangular index pairs i < j; the ambient dimension stays small
//! (n <= 8) so no sparsity is attempted.

use crate::{Error, Result};

/// Threshold below which a Gram-Schmidt candidate counts as dependent.
const GS_EPS: f64 = 1e-8;

/// Ambient vector in R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Vector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|a| a * s).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn axpy(&mut self, s: f64, other: &Vector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|a| a.is_finite())
    }
}

/// Element of Λ²(R^n), coefficients w_ij for i < j.
#[derive(Debug, Clone, PartialEq)]
pub struct Bivector {
    dim: usize,
    coeffs: Vec<f64>,
}

fn pair_index(dim: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < dim);
    // Row-major over the strictly upper triangle.
    i * dim - i * (i + 1) / 2 + (j - i - 1)
}

impl Bivector {
    pub fn zeros(dim: usize) -> Self {
        Bivector {
            dim,
            coeffs: vec![0.0; dim * (dim - 1) / 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        use std::cmp::Ordering;
        match i.cmp(&j) {
            Ordering::Less => self.coeffs[pair_index(self.dim, i, j)],
            Ordering::Greater => -self.coeffs[pair_index(self.dim, j, i)],
            Ordering::Equal => 0.0,
        }
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        use std::cmp::Ordering;
        match i.cmp(&j) {
            Ordering::Less => self.coeffs[pair_index(self.dim, i, j)] = value,
            Ordering::Greater => self.coeffs[pair_index(self.dim, j, i)] = -value,
            Ordering::Equal => panic!("diagonal bivector entry"),
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn scale(&self, s: f64) -> Bivector {
        Bivector {
            dim: self.dim,
            coeffs: self.coeffs.iter().map(|a| a * s).collect(),
        }
    }

    pub fn add(&self, other: &Bivector) -> Bivector {
        Bivector {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Bivector) -> Bivector {
        Bivector {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn axpy(&mut self, s: f64, other: &Bivector) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    pub fn norm(&self) -> f64 {
        bivector_inner(self, self).sqrt()
    }

    /// The antisymmetric matrix M with M_ij = w_ij (i<j), M_ji = -w_ij.
    pub fn as_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim;
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.get(i, j);
                m[(i, j)] = w;
                m[(j, i)] = -w;
            }
        }
        m
    }
}

/// Skew matrix S in so(n), stored by its strictly upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix {
    dim: usize,
    upper: Vec<f64>,
}

impl SkewMatrix {
    pub fn zeros(dim: usize) -> Self {
        SkewMatrix {
            dim,
            upper: vec![0.0; dim * (dim - 1) / 2],
        }
    }

    /// S = (E_ij - E_ji)/sqrt(2): unit norm under <A,B> = tr(A Bᵀ).
    pub fn unit_basis(dim: usize, i: usize, j: usize) -> Self {
        let mut s = SkewMatrix::zeros(dim);
        s.set(i, j, 1.0 / std::f64::consts::SQRT_2);
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        use std::cmp::Ordering;
        match i.cmp(&j) {
            Ordering::Less => self.upper[pair_index(self.dim, i, j)],
            Ordering::Greater => -self.upper[pair_index(self.dim, j, i)],
            Ordering::Equal => 0.0,
        }
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        use std::cmp::Ordering;
        match i.cmp(&j) {
            Ordering::Less => self.upper[pair_index(self.dim, i, j)] = value,
            Ordering::Greater => self.upper[pair_index(self.dim, j, i)] = -value,
            Ordering::Equal => panic!("diagonal skew entry"),
        }
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        let n = self.dim;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.get(i, j) * v.0[j];
            }
            out[i] = acc;
        }
        Vector(out)
    }

    /// <A,B> = tr(A Bᵀ) = 2 Σ_{i<j} a_ij b_ij.
    pub fn inner(&self, other: &SkewMatrix) -> f64 {
        2.0 * self
            .upper
            .iter()
            .zip(&other.upper)
            .map(|(a, b)| a * b)
            .sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> SkewMatrix {
        SkewMatrix {
            dim: self.dim,
            upper: self.upper.iter().map(|a| a * s).collect(),
        }
    }

    pub fn as_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim;
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    pub fn from_matrix(m: &nalgebra::DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut s = SkewMatrix::zeros(n);
        for i in 0..n {
            for j in (i + 1)..n {
                s.set(i, j, 0.5 * (m[(i, j)] - m[(j, i)]));
            }
        }
        s
    }
}

/// Oriented 2-plane with an orthonormal basis and its Plücker bivector.
#[derive(Debug, Clone)]
pub struct GrassmannPoint {
    pub e1: Vector,
    pub e2: Vector,
    pub bivector: Bivector,
    /// Set when the dominant 2-plane of a projection was not unique.
    pub ambiguous: bool,
}

impl GrassmannPoint {
    pub fn new(e1: Vector, e2: Vector) -> Result<Self> {
        if e1.dim() != e2.dim() {
            return Err(Error::DimMismatch(e1.dim(), e2.dim()));
        }
        let tol = 1e-10;
        if (e1.norm() - 1.0).abs() > tol || (e2.norm() - 1.0).abs() > tol {
            return Err(Error::Degenerate("plane basis not unit".into()));
        }
        if e1.dot(&e2).abs() > tol {
            return Err(Error::Degenerate("plane basis not orthogonal".into()));
        }
        let bivector = wedge(&e1, &e2)?;
        Ok(GrassmannPoint {
            e1,
            e2,
            bivector,
            ambiguous: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.e1.dim()
    }

    /// Orthonormal completion e_3..e_n of the plane basis: Gram-Schmidt
    /// against the standard basis in index order, skipping near-dependent
    /// candidates. Deterministic given the plane.
    pub fn completion(&self) -> Result<Vec<Vector>> {
        let n = self.dim();
        let mut frame = vec![self.e1.clone(), self.e2.clone()];
        for i in 0..n {
            if frame.len() == n {
                break;
            }
            let mut cand = Vector::basis(n, i);
            for f in &frame {
                let c = cand.dot(f);
                cand.axpy(-c, f);
            }
            let nrm = cand.norm();
            if nrm > GS_EPS {
                frame.push(cand.scale(1.0 / nrm));
            }
        }
        if frame.len() != n {
            return Err(Error::Degenerate("orthonormal completion failed".into()));
        }
        Ok(frame.split_off(2))
    }
}

/// v ∧ w.
pub fn wedge(v: &Vector, w: &Vector) -> Result<Bivector> {
    if v.dim() != w.dim() {
        return Err(Error::DimMismatch(v.dim(), w.dim()));
    }
    let n = v.dim();
    let mut b = Bivector::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            b.set(i, j, v.0[i] * w.0[j] - v.0[j] * w.0[i]);
        }
    }
    Ok(b)
}

/// <B1, B2> = Σ_{i<j} w1_ij w2_ij.
pub fn bivector_inner(b1: &Bivector, b2: &Bivector) -> f64 {
    b1.coeffs
        .iter()
        .zip(&b2.coeffs)
        .map(|(a, b)| a * b)
        .sum()
}

/// Interior product B ⌟ w, the linear extension of (v∧u)⌟w = (v·w)u - (u·w)v.
pub fn interior(b: &Bivector, w: &Vector) -> Result<Vector> {
    if b.dim() != w.dim() {
        return Err(Error::DimMismatch(b.dim(), w.dim()));
    }
    let n = b.dim();
    let mut out = vec![0.0; n];
    for j in 0..n {
        let mut acc = 0.0;
        for i in 0..n {
            acc += b.get(i, j) * w.0[i];
        }
        out[j] = acc;
    }
    Ok(Vector(out))
}

/// Component of B tangent to G(2,n) at P: span{e_i ∧ e_a, i in {1,2}, a >= 3}.
pub fn grassmann_tangent_project(p: &GrassmannPoint, b: &Bivector) -> Result<Bivector> {
    if p.dim() != b.dim() {
        return Err(Error::DimMismatch(p.dim(), b.dim()));
    }
    let completion = p.completion()?;
    let mut out = Bivector::zeros(b.dim());
    for ei in [&p.e1, &p.e2] {
        for ea in &completion {
            let basis = wedge(ei, ea)?;
            let c = bivector_inner(b, &basis);
            out.axpy(c, &basis);
        }
    }
    Ok(out)
}

/// Component of B normal to G(2,n) at P: span{e_1∧e_2, e_a∧e_b (a,b >= 3)}.
pub fn grassmann_normal_project(p: &GrassmannPoint, b: &Bivector) -> Result<Bivector> {
    Ok(b.sub(&grassmann_tangent_project(p, b)?))
}

/// Relative gap below which the two largest plane weights count as tied.
const TIE_EPS: f64 = 1e-10;

/// Nearest point of G(2,n): the dominant 2-plane of the antisymmetric matrix
/// of B, oriented so that <result, B> > 0. For n = 3 every bivector is
/// decomposable and this is plain normalization.
///
/// The ambiguity flag is set when the two largest plane weights coincide to
/// within relative TIE_EPS; an exactly zero inner product with the input is
/// an error rather than a guessed orientation.
pub fn nearest_grassmann(b: &Bivector) -> Result<GrassmannPoint> {
    let n = b.dim();
    let norm = b.norm();
    if norm == 0.0 {
        return Err(Error::Degenerate("zero bivector".into()));
    }
    let m = b.as_matrix();
    // -M² = M Mᵀ is symmetric PSD; eigenvalues come in pairs σ² per plane.
    let mm = &m * m.transpose();
    let eig = nalgebra::SymmetricEigen::new(mm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| {
        eig.eigenvalues[c]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
    });
    let top = eig.eigenvalues[order[0]];
    if top <= 0.0 {
        return Err(Error::Degenerate("zero bivector".into()));
    }
    // The third-largest eigenvalue heads the next plane; compare block weights.
    let ambiguous = n >= 4 && {
        let next = eig.eigenvalues[order[2]].max(0.0);
        (top - next).abs() <= TIE_EPS * top
    };
    let sigma = top.sqrt();
    let u: Vec<f64> = (0..n).map(|i| eig.eigenvectors[(i, order[0])]).collect();
    let u = Vector(u);
    let mu = {
        let mut out = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                out[i] += m[(i, j)] * u.0[j];
            }
        }
        Vector(out)
    };
    let w = mu.scale(1.0 / sigma);
    // u, w span the dominant plane; M u = ±σ w makes them orthogonal.
    let e1 = u.scale(1.0 / u.norm());
    let mut e2 = w.clone();
    let c = e2.dot(&e1);
    e2.axpy(-c, &e1);
    let nrm = e2.norm();
    if nrm < 1e-12 {
        return Err(Error::Degenerate("dominant plane collapsed".into()));
    }
    let e2 = e2.scale(1.0 / nrm);
    let candidate = wedge(&e1, &e2)?;
    let alignment = bivector_inner(&candidate, b);
    if alignment == 0.0 {
        return Err(Error::Degenerate(
            "orientation undetermined: candidate plane orthogonal to input".into(),
        ));
    }
    let (e1, e2) = if alignment > 0.0 { (e1, e2) } else { (e2, e1) };
    let mut p = GrassmannPoint::new(e1, e2)?;
    p.ambiguous = ambiguous;
    Ok(p)
}
