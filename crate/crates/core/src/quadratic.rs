//! Quadratic first-order PDEs and their algebra generators.
//!
//! A quadratic PDE on R^n is
//!
//! ```text
//! y^T c y + y^T b x + x^T a x + e.y + f.x = h0,      y = grad z,
//! ```
//!
//! with a, c symmetric. Its characteristic field is affine in (x, y), so it
//! is generated by an element of sp(2n+1,R): `to_generator` produces the
//! unique generator whose affine field matches the characteristic field in
//! the (x, y) components. The z components of the two fields differ by a
//! density that vanishes identically exactly when a = 0, b = 0 and f = 0;
//! `commutator_density` evaluates it in closed form.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::jet_contact::{Hamiltonian, JetPoint, TangentVector, VectorField};
use crate::odd_symplectic::GeneratorU;

/// Coefficients of a quadratic PDE; see the module docs for the normal form.
#[derive(Debug, Clone)]
pub struct QuadraticPDE {
    n: usize,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    e: DVector<f64>,
    f: DVector<f64>,
    h0: f64,
}

fn check_symmetric(m: &DMatrix<f64>, name: &'static str) -> Result<()> {
    let asymmetry = (m - m.transpose()).amax();
    let tol = 1e-12 * m.amax().max(1.0);
    if asymmetry > tol {
        return Err(Error::NotSymmetric {
            name: name.into(),
            asymmetry,
        });
    }
    Ok(())
}

impl QuadraticPDE {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        e: DVector<f64>,
        f: DVector<f64>,
        h0: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::InvalidInput {
                reason: "quadratic PDE needs at least one base dimension".into(),
            });
        }
        for (m, name) in [(&a, "a"), (&b, "b"), (&c, "c")] {
            if m.shape() != (n, n) {
                return Err(Error::BadMatrixShape {
                    rows: m.nrows(),
                    cols: m.ncols(),
                });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("coefficient block {name}"),
                });
            }
        }
        for (v, name) in [(&e, "e"), (&f, "f")] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("coefficient vector {name}"),
                });
            }
        }
        if !h0.is_finite() {
            return Err(Error::NonFinite {
                context: "level h0".into(),
            });
        }
        check_symmetric(&a, "a")?;
        check_symmetric(&c, "c")?;
        Ok(Self { n, a, b, c, e, f, h0 })
    }

    /// Draw a PDE with all blocks uniform in [-1, 1] (a, c symmetrized).
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let sym = |rng: &mut R| {
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let v = rng.random_range(-1.0..1.0);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            m
        };
        let a = sym(rng);
        let c = sym(rng);
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let e = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let f = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let h0 = rng.random_range(-1.0..1.0);
        Self::new(a, b, c, e, f, h0).expect("randomly drawn blocks are valid")
    }

    /// Draw a PDE satisfying the commutation condition: a = 0, b = 0, f = 0.
    pub fn random_commuting<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut c = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = rng.random_range(-1.0..1.0);
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        let e = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let h0 = rng.random_range(-1.0..1.0);
        Self::new(
            DMatrix::zeros(n, n),
            DMatrix::zeros(n, n),
            c,
            e,
            DVector::zeros(n),
            h0,
        )
        .expect("commuting blocks are valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn e(&self) -> &DVector<f64> {
        &self.e
    }

    pub fn f(&self) -> &DVector<f64> {
        &self.f
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    /// Left-hand side minus the level: y^T c y + y^T b x + x^T a x + e.y + f.x - h0.
    pub fn eval_h(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        assert_eq!(x.len(), self.n, "x dimension mismatch");
        assert_eq!(y.len(), self.n, "y dimension mismatch");
        y.dot(&(&self.c * y))
            + y.dot(&(&self.b * x))
            + x.dot(&(&self.a * x))
            + self.e.dot(y)
            + self.f.dot(x)
            - self.h0
    }

    /// dh/dx = b^T y + 2 a x + f.
    pub fn grad_x(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        self.b.transpose() * y + &self.a * x * 2.0 + &self.f
    }

    /// dh/dy = 2 c y + b x + e.
    pub fn grad_y(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        &self.c * y * 2.0 + &self.b * x + &self.e
    }

    /// The symmetric 2n x 2n block matrix (a, b/2; b^T/2, c).
    pub fn assemble_b(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.a);
        m.view_mut((0, n), (n, n)).copy_from(&(&self.b / 2.0));
        m.view_mut((n, 0), (n, n))
            .copy_from(&(self.b.transpose() / 2.0));
        m.view_mut((n, n), (n, n)).copy_from(&self.c);
        m
    }

    /// View the PDE as a z-independent [`Hamiltonian`] with analytic gradients.
    pub fn hamiltonian(&self) -> Hamiltonian {
        let fe = self.clone();
        let fx = self.clone();
        let fy = self.clone();
        Hamiltonian::analytic_z_independent(
            self.n,
            move |x, y, _| fe.eval_h(x, y),
            move |x, y, _| fx.grad_x(x, y),
            move |x, y, _| fy.grad_y(x, y),
        )
    }

    /// The algebra generator whose affine field matches the characteristic
    /// field of the PDE in the (x, y) components:
    ///
    /// ```text
    /// A = ( b    2c  )        v = (e, -f),      k = h0.
    ///     ( -2a  -b^T)
    /// ```
    ///
    /// A seeded 20-point self-check compares v + A w against the
    /// characteristic field and fails loudly on any convention drift.
    pub fn to_generator(&self) -> Result<GeneratorU> {
        let n = self.n;
        let mut a_block = DMatrix::zeros(2 * n, 2 * n);
        a_block.view_mut((0, 0), (n, n)).copy_from(&self.b);
        a_block.view_mut((0, n), (n, n)).copy_from(&(&self.c * 2.0));
        a_block
            .view_mut((n, 0), (n, n))
            .copy_from(&(&self.a * -2.0));
        a_block
            .view_mut((n, n), (n, n))
            .copy_from(&(-self.b.transpose()));
        let mut v = DVector::zeros(2 * n);
        v.rows_mut(0, n).copy_from(&self.e);
        v.rows_mut(n, n).copy_from(&(-&self.f));
        let u = GeneratorU::new(n, a_block, v, self.h0)?;

        let mut rng = ChaCha8Rng::seed_from_u64(0x71AD);
        let mut residual: f64 = 0.0;
        for _ in 0..20 {
            let x = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let mut w = DVector::zeros(2 * n);
            w.rows_mut(0, n).copy_from(&x);
            w.rows_mut(n, n).copy_from(&y);
            let affine = u.v() + u.a() * &w;
            let dx = self.grad_y(&x, &y);
            let dy = -self.grad_x(&x, &y);
            residual = residual
                .max((affine.rows(0, n) - dx).amax())
                .max((affine.rows(n, n) - dy).amax());
        }
        if residual > 1e-10 {
            return Err(Error::ConventionMismatch { residual });
        }
        Ok(u)
    }

    /// True iff a = 0, b = 0 and f = 0, the closed-form criterion for the
    /// characteristic field and the generator field to commute.
    pub fn commutation_condition(&self) -> bool {
        self.a.amax() <= 1e-12 && self.b.amax() <= 1e-12 && self.f.amax() <= 1e-12
    }

    /// The z-component of the bracket of the generator field with the
    /// characteristic field at (x, y):
    ///
    /// ```text
    /// (b^T y + f).(2 c y + b x + e) - (4 c y + b x + 2 e).(2 a x + b^T y + f)
    /// ```
    ///
    /// The (x, y) components of that bracket vanish identically, so this
    /// scalar is the full obstruction to commutation.
    pub fn commutator_density(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        assert_eq!(x.len(), self.n, "x dimension mismatch");
        assert_eq!(y.len(), self.n, "y dimension mismatch");
        let bty_f = self.b.transpose() * y + &self.f;
        let dx = self.grad_y(x, y); // 2cy + bx + e
        let grad_y_density = &self.c * y * 4.0 + &self.b * x + &self.e * 2.0;
        let dy_neg = &self.a * x * 2.0 + &bty_f; // 2ax + b^T y + f
        bty_f.dot(&dx) - grad_y_density.dot(&dy_neg)
    }

    pub fn characteristic_field(&self) -> QuadraticField {
        QuadraticField {
            pde: self.clone(),
            variant: QuadraticVariant::Characteristic,
        }
    }

    pub fn contact_field(&self) -> QuadraticField {
        QuadraticField {
            pde: self.clone(),
            variant: QuadraticVariant::Contact,
        }
    }
}

/// Which of the two canonical fields of a quadratic PDE a
/// [`QuadraticField`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadraticVariant {
    Characteristic,
    Contact,
}

/// Characteristic or contact field of a quadratic PDE, with exact Jacobians.
#[derive(Debug, Clone)]
pub struct QuadraticField {
    pde: QuadraticPDE,
    variant: QuadraticVariant,
}

impl VectorField for QuadraticField {
    fn dim(&self) -> usize {
        self.pde.n
    }

    fn value(&self, p: &JetPoint) -> Result<TangentVector> {
        if p.n() != self.pde.n {
            return Err(Error::DimensionMismatch {
                expected: self.pde.n,
                got: p.n(),
            });
        }
        let q = &self.pde;
        let dx = q.grad_y(&p.x, &p.y);
        let dy = -q.grad_x(&p.x, &p.y);
        let dz = match self.variant {
            QuadraticVariant::Characteristic => p.y.dot(&dx),
            QuadraticVariant::Contact => {
                p.y.dot(&(&q.c * &p.y)) - p.x.dot(&(&q.a * &p.x)) - q.f.dot(&p.x) + q.h0
            }
        };
        TangentVector::new(dx, dy, dz)
    }

    fn jacobian(&self, p: &JetPoint) -> Option<DMatrix<f64>> {
        let q = &self.pde;
        let n = q.n;
        let dim = 2 * n + 1;
        let mut m = DMatrix::zeros(dim, dim);
        m.view_mut((0, 0), (n, n)).copy_from(&q.b);
        m.view_mut((0, n), (n, n)).copy_from(&(&q.c * 2.0));
        m.view_mut((n, 0), (n, n)).copy_from(&(&q.a * -2.0));
        m.view_mut((n, n), (n, n)).copy_from(&(-q.b.transpose()));
        let (dz_dx, dz_dy) = match self.variant {
            QuadraticVariant::Characteristic => (
                q.b.transpose() * &p.y,
                &q.c * &p.y * 4.0 + &q.b * &p.x + &q.e,
            ),
            QuadraticVariant::Contact => {
                (-(&q.a * &p.x * 2.0) - &q.f, &q.c * &p.y * 2.0)
            }
        };
        for i in 0..n {
            m[(2 * n, i)] = dz_dx[i];
            m[(2 * n, n + i)] = dz_dy[i];
        }
        Some(m)
    }
}
