//! Linear algebra of the odd-symplectic group Sp(2n+1,R).
//!
//! The group is realized on R^{2n+2} with coordinates ordered (t, x_1..x_n,
//! y_1..y_n, z): symplectic matrices for the extended form that fix the z
//! basis vector. Its Lie algebra elements are block matrices built from a
//! Hamiltonian matrix A in sp(2n,R), a drift vector v and a scalar k.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

/// Default tolerance for algebra/group membership tests.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-10;

/// The standard symplectic form J on R^{2n}, coordinates (x_1..x_n, y_1..y_n).
///
/// J[i, n+i] = 1 and J[n+i, i] = -1; J^T = -J and J^2 = -I.
#[derive(Debug, Clone)]
pub struct SymplecticFormStd {
    n: usize,
    matrix: DMatrix<f64>,
}

impl SymplecticFormStd {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Skew product J(v, w) = v^T J w.
    pub fn product(&self, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        (v.transpose() * &self.matrix * w)[(0, 0)]
    }
}

/// The symplectic form on R^{2n+2} obtained by extending J with the t-z pair,
/// coordinates (t, x_1..x_n, y_1..y_n, z).
#[derive(Debug, Clone)]
pub struct SymplecticFormExt {
    n: usize,
    matrix: DMatrix<f64>,
}

impl SymplecticFormExt {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// Build the standard symplectic form on R^{2n}.
pub fn standard_symplectic_form(n: usize) -> SymplecticFormStd {
    assert!(n >= 1, "dimension n must be at least 1");
    let mut matrix = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        matrix[(i, n + i)] = 1.0;
        matrix[(n + i, i)] = -1.0;
    }
    SymplecticFormStd { n, matrix }
}

/// Build the extended symplectic form on R^{2n+2}.
///
/// The t-z pairing carries the sign Omega[t, z] = +1; this is the unique
/// choice under which every embedded generator U satisfies
/// U^T Omega + Omega U = 0.
pub fn extended_symplectic_form(n: usize) -> SymplecticFormExt {
    assert!(n >= 1, "dimension n must be at least 1");
    let dim = 2 * n + 2;
    let mut matrix = DMatrix::zeros(dim, dim);
    matrix[(0, dim - 1)] = 1.0;
    matrix[(dim - 1, 0)] = -1.0;
    let j = standard_symplectic_form(n);
    matrix.view_mut((1, 1), (2 * n, 2 * n)).copy_from(j.matrix());
    SymplecticFormExt { n, matrix }
}

/// Apply the standard J to a 2n-vector: (x, y) -> (y, -x).
pub(crate) fn j_apply(n: usize, v: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(v.len(), 2 * n);
    let mut out = DVector::zeros(2 * n);
    for i in 0..n {
        out[i] = v[n + i];
        out[n + i] = -v[i];
    }
    out
}

/// Test whether A lies in sp(2n,R), i.e. |A^T J + J A|_max <= tol.
pub fn is_hamiltonian_matrix(a: &DMatrix<f64>, tol: f64) -> Result<bool> {
    let (rows, cols) = a.shape();
    if rows != cols || rows == 0 || rows % 2 != 0 {
        return Err(Error::BadMatrixShape { rows, cols });
    }
    let j = standard_symplectic_form(rows / 2);
    let residual = (a.transpose() * j.matrix() + j.matrix() * a).amax();
    Ok(residual <= tol)
}

/// An element u of sp(2n+1,R), stored by its blocks: a Hamiltonian matrix A,
/// a drift vector v in R^{2n} and a scalar k.
///
/// The embedded matrix has rows (0 0 0; v A 0; k (Jv)^T 0) in coordinates
/// (t, w, z) with w = (x, y).
#[derive(Debug, Clone)]
pub struct GeneratorU {
    n: usize,
    a: DMatrix<f64>,
    v: DVector<f64>,
    k: f64,
}

impl GeneratorU {
    /// Build a generator, validating that `a` is in sp(2n,R).
    pub fn new(n: usize, a: DMatrix<f64>, v: DVector<f64>, k: f64) -> Result<Self> {
        Self::with_tol(n, a, v, k, DEFAULT_MEMBERSHIP_TOL)
    }

    pub fn with_tol(n: usize, a: DMatrix<f64>, v: DVector<f64>, k: f64, tol: f64) -> Result<Self> {
        if a.shape() != (2 * n, 2 * n) {
            return Err(Error::BadMatrixShape {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if v.len() != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                got: v.len(),
            });
        }
        let j = standard_symplectic_form(n);
        let residual = (a.transpose() * j.matrix() + j.matrix() * &a).amax();
        if residual > tol {
            return Err(Error::NotHamiltonianMatrix { residual, tol });
        }
        if !k.is_finite() || v.iter().any(|x| !x.is_finite()) || a.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "generator blocks".into(),
            });
        }
        Ok(Self { n, a, v, k })
    }

    /// Draw a generator with A = J S (S symmetric), |A|_max scaled below
    /// `a_norm_bound`, and v, k uniform in [-1, 1].
    pub fn random<R: Rng + ?Sized>(n: usize, a_norm_bound: f64, rng: &mut R) -> Self {
        let dim = 2 * n;
        let mut s = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for jj in i..dim {
                let e = rng.random_range(-1.0..1.0);
                s[(i, jj)] = e;
                s[(jj, i)] = e;
            }
        }
        let j = standard_symplectic_form(n);
        let mut a = j.matrix() * s;
        let amax = a.amax();
        if amax > 0.0 {
            let target = a_norm_bound * rng.random_range(0.2..1.0);
            a *= target / amax;
        }
        let v = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let k = rng.random_range(-1.0..1.0);
        Self::new(n, a, v, k).expect("J*S construction is always in sp(2n,R)")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn v(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// The blocks (alpha, beta, gamma) of JA = [[-gamma, alpha], [alpha^T, beta]].
    pub fn quadratic_blocks(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let n = self.n;
        let j = standard_symplectic_form(n);
        let ja = j.matrix() * &self.a;
        let gamma = -ja.view((0, 0), (n, n)).into_owned();
        let alpha = ja.view((0, n), (n, n)).into_owned();
        let beta = ja.view((n, n), (n, n)).into_owned();
        (alpha, beta, gamma)
    }
}

/// Embed a generator into its (2n+2)x(2n+2) matrix form.
///
/// The last column is identically zero, so U annihilates the z direction.
pub fn embed_generator(u: &GeneratorU) -> DMatrix<f64> {
    let n = u.n;
    let dim = 2 * n + 2;
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..2 * n {
        m[(1 + i, 0)] = u.v[i];
    }
    m.view_mut((1, 1), (2 * n, 2 * n)).copy_from(&u.a);
    m[(dim - 1, 0)] = u.k;
    let jv = j_apply(n, &u.v);
    for i in 0..2 * n {
        m[(dim - 1, 1 + i)] = jv[i];
    }
    m
}

/// An element of the ambient matrix group on R^{2n+2}; membership in
/// Sp(2n+1,R) is checked by [`GroupElement::is_odd_symplectic`].
#[derive(Debug, Clone)]
pub struct GroupElement {
    n: usize,
    matrix: DMatrix<f64>,
}

impl GroupElement {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols || rows < 4 || rows % 2 != 0 {
            return Err(Error::BadMatrixShape { rows, cols });
        }
        Ok(Self {
            n: (rows - 2) / 2,
            matrix,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// True iff the matrix preserves the extended form and fixes e_z:
    /// |M^T Omega M - Omega|_max <= tol and |M e_z - e_z|_max <= tol.
    pub fn is_odd_symplectic(&self, tol: f64) -> bool {
        let omega = extended_symplectic_form(self.n);
        let form_residual =
            (self.matrix.transpose() * omega.matrix() * &self.matrix - omega.matrix()).amax();
        let dim = 2 * self.n + 2;
        let mut ez = DVector::zeros(dim);
        ez[dim - 1] = 1.0;
        let fix_residual = (&self.matrix * &ez - ez).amax();
        form_residual <= tol && fix_residual <= tol
    }

    /// Affine action on the t = 1 slice: maps (w, z) to the (w, z) part of
    /// M (1, w, z).
    pub fn apply_affine(&self, w: &DVector<f64>, z: f64) -> Result<(DVector<f64>, f64)> {
        let n = self.n;
        if w.len() != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                got: w.len(),
            });
        }
        let dim = 2 * n + 2;
        let mut p = DVector::zeros(dim);
        p[0] = 1.0;
        p.rows_mut(1, 2 * n).copy_from(w);
        p[dim - 1] = z;
        let q = &self.matrix * p;
        Ok((q.rows(1, 2 * n).into_owned(), q[dim - 1]))
    }
}

/// Raw-matrix variant of the odd-symplectic membership test.
pub fn is_odd_symplectic(m: &DMatrix<f64>, tol: f64) -> Result<bool> {
    Ok(GroupElement::from_matrix(m.clone())?.is_odd_symplectic(tol))
}

// Series order for the scaled exponential; with |X|_1 <= 1/2 the truncation
// error of the degree-14 Taylor polynomial is below 1e-17.
const EXP_SERIES_ORDER: usize = 14;

fn norm_1(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// exp(s u) by scaling and squaring with a truncated Taylor series.
pub fn matrix_exponential(u: &GeneratorU, s: f64) -> GroupElement {
    let m = embed_generator(u) * s;
    let dim = m.nrows();
    let norm = norm_1(&m);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = &m / 2f64.powi(squarings as i32);

    let mut result = DMatrix::identity(dim, dim);
    let mut term = DMatrix::identity(dim, dim);
    for order in 1..=EXP_SERIES_ORDER {
        term = &term * &scaled / order as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    GroupElement {
        n: u.n,
        matrix: result,
    }
}

/// The affine vector field of a generator on the t = 1 slice:
/// wdot = v + A w, zdot = k + (Jv)^T w.
pub fn generator_field_at(u: &GeneratorU, w: &DVector<f64>, _z: f64) -> (DVector<f64>, f64) {
    assert_eq!(w.len(), 2 * u.n, "w must have length 2n");
    let wdot = &u.v + &u.a * w;
    let zdot = u.k + j_apply(u.n, &u.v).dot(w);
    (wdot, zdot)
}
