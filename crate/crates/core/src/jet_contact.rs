//! The 1-jet space J^1(R^n) with coordinates (x, y, z), its contact form
//! theta = dz - y.dx, and the vector fields attached to a Hamiltonian
//! function h(x, y, z):
//!
//! * the characteristic field X_c, which drives the method of
//!   characteristics for h(x, grad z) = 0;
//! * the contact field X_h (defined for z-independent h), which satisfies
//!   X_h = X_c - h d/dz, so the two coincide exactly on the zero level;
//! * the lifted field on the symplectization R_+ x J^1, whose restriction
//!   to any t-slice reproduces the contact field.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::odd_symplectic::{j_apply, GeneratorU};

/// A point of J^1(R^n): base coordinates x, momenta y = grad z, and value z.
#[derive(Debug, Clone, PartialEq)]
pub struct JetPoint {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: f64,
}

impl JetPoint {
    pub fn new(x: DVector<f64>, y: DVector<f64>, z: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::InvalidInput {
                reason: "jet point needs at least one base dimension".into(),
            });
        }
        let p = Self { x, y, z };
        if !p.is_finite() {
            return Err(Error::NonFinite {
                context: "jet point coordinates".into(),
            });
        }
        Ok(p)
    }

    /// Convenience constructor for literals; panics on mismatched lengths.
    pub fn from_slices(x: &[f64], y: &[f64], z: f64) -> Self {
        Self::new(DVector::from_row_slice(x), DVector::from_row_slice(y), z)
            .expect("valid jet point literal")
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.z.is_finite()
            && self.x.iter().all(|v| v.is_finite())
            && self.y.iter().all(|v| v.is_finite())
    }

    /// Flatten to (x_1..x_n, y_1..y_n, z).
    pub fn flat(&self) -> DVector<f64> {
        let n = self.n();
        let mut out = DVector::zeros(2 * n + 1);
        out.rows_mut(0, n).copy_from(&self.x);
        out.rows_mut(n, n).copy_from(&self.y);
        out[2 * n] = self.z;
        out
    }

    pub fn from_flat(n: usize, flat: &DVector<f64>) -> Self {
        assert_eq!(flat.len(), 2 * n + 1, "flat jet coordinates have length 2n+1");
        Self {
            x: flat.rows(0, n).into_owned(),
            y: flat.rows(n, n).into_owned(),
            z: flat[2 * n],
        }
    }
}

/// A tangent vector to J^1(R^n), components (dx, dy, dz).
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub dx: DVector<f64>,
    pub dy: DVector<f64>,
    pub dz: f64,
}

impl TangentVector {
    pub fn new(dx: DVector<f64>, dy: DVector<f64>, dz: f64) -> Result<Self> {
        if dx.len() != dy.len() {
            return Err(Error::DimensionMismatch {
                expected: dx.len(),
                got: dy.len(),
            });
        }
        Ok(Self { dx, dy, dz })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            dx: DVector::zeros(n),
            dy: DVector::zeros(n),
            dz: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.dx.len()
    }

    pub fn flat(&self) -> DVector<f64> {
        let n = self.n();
        let mut out = DVector::zeros(2 * n + 1);
        out.rows_mut(0, n).copy_from(&self.dx);
        out.rows_mut(n, n).copy_from(&self.dy);
        out[2 * n] = self.dz;
        out
    }

    pub fn from_flat(n: usize, flat: &DVector<f64>) -> Self {
        assert_eq!(flat.len(), 2 * n + 1, "flat tangent components have length 2n+1");
        Self {
            dx: flat.rows(0, n).into_owned(),
            dy: flat.rows(n, n).into_owned(),
            dz: flat[2 * n],
        }
    }

    pub fn amax(&self) -> f64 {
        let mut m = self.dz.abs();
        for v in self.dx.iter().chain(self.dy.iter()) {
            m = m.max(v.abs());
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.dz.is_finite()
            && self.dx.iter().all(|v| v.is_finite())
            && self.dy.iter().all(|v| v.is_finite())
    }
}

/// A point of the symplectization R_+ x J^1(R^n), with conformal factor t > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplPoint {
    pub t: f64,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: f64,
}

impl SymplPoint {
    pub fn new(t: f64, x: DVector<f64>, y: DVector<f64>, z: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::InvalidInput {
                reason: format!("conformal factor t must be positive and finite, got {t}"),
            });
        }
        let jet = JetPoint::new(x, y, z)?;
        Ok(Self {
            t,
            x: jet.x,
            y: jet.y,
            z: jet.z,
        })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn jet_part(&self) -> JetPoint {
        JetPoint {
            x: self.x.clone(),
            y: self.y.clone(),
            z: self.z,
        }
    }
}

type ScalarFn = dyn Fn(&DVector<f64>, &DVector<f64>, f64) -> f64 + Send + Sync;
type GradFn = dyn Fn(&DVector<f64>, &DVector<f64>, f64) -> DVector<f64> + Send + Sync;

#[derive(Clone)]
enum DerivativeMode {
    Analytic {
        grad_x: Arc<GradFn>,
        grad_y: Arc<GradFn>,
        grad_z: Arc<ScalarFn>,
    },
    FiniteDifference,
}

/// A Hamiltonian function h(x, y, z) on the 1-jet space.
///
/// Gradients are either supplied analytically or approximated by central
/// differences with step eps = cbrt(machine epsilon) * max(1, |coordinate|).
/// The `z_independent` flag is declarative: it gates the operations that are
/// only defined when dh/dz = 0 (contact field, lifts, initial strips).
#[derive(Clone)]
pub struct Hamiltonian {
    n: usize,
    f: Arc<ScalarFn>,
    mode: DerivativeMode,
    z_independent: bool,
}

impl std::fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Hamiltonian")
            .field("n", &self.n)
            .field("z_independent", &self.z_independent)
            .field(
                "mode",
                &match self.mode {
                    DerivativeMode::Analytic { .. } => "analytic",
                    DerivativeMode::FiniteDifference => "finite-difference",
                },
            )
            .finish()
    }
}

impl Hamiltonian {
    pub fn analytic(
        n: usize,
        f: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> f64 + Send + Sync + 'static,
        grad_x: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> DVector<f64> + Send + Sync + 'static,
        grad_y: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> DVector<f64> + Send + Sync + 'static,
        grad_z: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            f: Arc::new(f),
            mode: DerivativeMode::Analytic {
                grad_x: Arc::new(grad_x),
                grad_y: Arc::new(grad_y),
                grad_z: Arc::new(grad_z),
            },
            z_independent: false,
        }
    }

    pub fn analytic_z_independent(
        n: usize,
        f: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> f64 + Send + Sync + 'static,
        grad_x: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> DVector<f64> + Send + Sync + 'static,
        grad_y: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            f: Arc::new(f),
            mode: DerivativeMode::Analytic {
                grad_x: Arc::new(grad_x),
                grad_y: Arc::new(grad_y),
                grad_z: Arc::new(|_, _, _| 0.0),
            },
            z_independent: true,
        }
    }

    pub fn finite_difference(
        n: usize,
        f: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            f: Arc::new(f),
            mode: DerivativeMode::FiniteDifference,
            z_independent: false,
        }
    }

    pub fn finite_difference_z_independent(
        n: usize,
        f: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            f: Arc::new(f),
            mode: DerivativeMode::FiniteDifference,
            z_independent: true,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn z_independent(&self) -> bool {
        self.z_independent
    }

    pub fn eval(&self, p: &JetPoint) -> f64 {
        assert_eq!(p.n(), self.n, "jet point dimension mismatch");
        (self.f)(&p.x, &p.y, p.z)
    }

    pub fn eval_parts(&self, x: &DVector<f64>, y: &DVector<f64>, z: f64) -> f64 {
        (self.f)(x, y, z)
    }

    pub fn grad_x(&self, p: &JetPoint) -> DVector<f64> {
        match &self.mode {
            DerivativeMode::Analytic { grad_x, .. } => grad_x(&p.x, &p.y, p.z),
            DerivativeMode::FiniteDifference => self.fd_grad_x(p),
        }
    }

    pub fn grad_y(&self, p: &JetPoint) -> DVector<f64> {
        match &self.mode {
            DerivativeMode::Analytic { grad_y, .. } => grad_y(&p.x, &p.y, p.z),
            DerivativeMode::FiniteDifference => self.fd_grad_y(p),
        }
    }

    pub fn grad_z(&self, p: &JetPoint) -> f64 {
        if self.z_independent {
            return 0.0;
        }
        match &self.mode {
            DerivativeMode::Analytic { grad_z, .. } => grad_z(&p.x, &p.y, p.z),
            DerivativeMode::FiniteDifference => self.fd_grad_z(p),
        }
    }

    /// Central-difference gradients, regardless of the derivative mode.
    /// Exposed so callers can cross-check analytic derivatives.
    pub fn finite_difference_gradients(&self, p: &JetPoint) -> (DVector<f64>, DVector<f64>, f64) {
        (self.fd_grad_x(p), self.fd_grad_y(p), self.fd_grad_z(p))
    }

    fn fd_grad_x(&self, p: &JetPoint) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        let mut x = p.x.clone();
        for i in 0..self.n {
            let eps = central_step(p.x[i]);
            x[i] = p.x[i] + eps;
            let f_plus = (self.f)(&x, &p.y, p.z);
            x[i] = p.x[i] - eps;
            let f_minus = (self.f)(&x, &p.y, p.z);
            x[i] = p.x[i];
            out[i] = (f_plus - f_minus) / (2.0 * eps);
        }
        out
    }

    fn fd_grad_y(&self, p: &JetPoint) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        let mut y = p.y.clone();
        for i in 0..self.n {
            let eps = central_step(p.y[i]);
            y[i] = p.y[i] + eps;
            let f_plus = (self.f)(&p.x, &y, p.z);
            y[i] = p.y[i] - eps;
            let f_minus = (self.f)(&p.x, &y, p.z);
            y[i] = p.y[i];
            out[i] = (f_plus - f_minus) / (2.0 * eps);
        }
        out
    }

    fn fd_grad_z(&self, p: &JetPoint) -> f64 {
        let eps = central_step(p.z);
        let f_plus = (self.f)(&p.x, &p.y, p.z + eps);
        let f_minus = (self.f)(&p.x, &p.y, p.z - eps);
        (f_plus - f_minus) / (2.0 * eps)
    }
}

/// Central-difference step for a coordinate of the given magnitude.
pub(crate) fn central_step(coord: f64) -> f64 {
    f64::EPSILON.cbrt() * coord.abs().max(1.0)
}

type LiftedFn = dyn Fn(f64, &DVector<f64>, &DVector<f64>) -> f64 + Send + Sync;
type LiftedGradFn = dyn Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync;
type LiftedScalarFn = dyn Fn(f64, &DVector<f64>, &DVector<f64>) -> f64 + Send + Sync;

#[derive(Clone)]
enum LiftedDerivativeMode {
    Analytic {
        d_t: Arc<LiftedScalarFn>,
        grad_x: Arc<LiftedGradFn>,
        grad_y: Arc<LiftedGradFn>,
    },
    FiniteDifference,
}

/// A function hhat(t, x, y) on the symplectization, independent of z.
#[derive(Clone)]
pub struct LiftedHamiltonian {
    n: usize,
    f: Arc<LiftedFn>,
    mode: LiftedDerivativeMode,
}

impl std::fmt::Debug for LiftedHamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LiftedHamiltonian").field("n", &self.n).finish()
    }
}

impl LiftedHamiltonian {
    pub fn analytic(
        n: usize,
        f: impl Fn(f64, &DVector<f64>, &DVector<f64>) -> f64 + Send + Sync + 'static,
        d_t: impl Fn(f64, &DVector<f64>, &DVector<f64>) -> f64 + Send + Sync + 'static,
        grad_x: impl Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        grad_y: impl Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            f: Arc::new(f),
            mode: LiftedDerivativeMode::Analytic {
                d_t: Arc::new(d_t),
                grad_x: Arc::new(grad_x),
                grad_y: Arc::new(grad_y),
            },
        }
    }

    pub fn finite_difference(
        n: usize,
        f: impl Fn(f64, &DVector<f64>, &DVector<f64>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            f: Arc::new(f),
            mode: LiftedDerivativeMode::FiniteDifference,
        }
    }

    /// The degree-1 homogeneous lift hhat(t, x, y) = t h(x, y) of a
    /// z-independent Hamiltonian.
    pub fn from_contact(h: &Hamiltonian) -> Result<Self> {
        if !h.z_independent() {
            return Err(Error::ZDependentHamiltonian);
        }
        let n = h.n();
        let hf = h.clone();
        let hx = h.clone();
        let hy = h.clone();
        let ht = h.clone();
        Ok(Self {
            n,
            f: Arc::new(move |t, x, y| t * hf.eval_parts(x, y, 0.0)),
            mode: LiftedDerivativeMode::Analytic {
                d_t: Arc::new(move |_t, x, y| ht.eval_parts(x, y, 0.0)),
                grad_x: Arc::new(move |t, x, y| {
                    let p = JetPoint::new(x.clone(), y.clone(), 0.0).expect("valid point");
                    hx.grad_x(&p) * t
                }),
                grad_y: Arc::new(move |t, x, y| {
                    let p = JetPoint::new(x.clone(), y.clone(), 0.0).expect("valid point");
                    hy.grad_y(&p) * t
                }),
            },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eval(&self, q: &SymplPoint) -> f64 {
        assert_eq!(q.n(), self.n, "symplectization point dimension mismatch");
        (self.f)(q.t, &q.x, &q.y)
    }

    pub fn d_t(&self, q: &SymplPoint) -> f64 {
        match &self.mode {
            LiftedDerivativeMode::Analytic { d_t, .. } => d_t(q.t, &q.x, &q.y),
            LiftedDerivativeMode::FiniteDifference => {
                let eps = central_step(q.t);
                let f_plus = (self.f)(q.t + eps, &q.x, &q.y);
                let f_minus = (self.f)(q.t - eps, &q.x, &q.y);
                (f_plus - f_minus) / (2.0 * eps)
            }
        }
    }

    pub fn grad_x(&self, q: &SymplPoint) -> DVector<f64> {
        match &self.mode {
            LiftedDerivativeMode::Analytic { grad_x, .. } => grad_x(q.t, &q.x, &q.y),
            LiftedDerivativeMode::FiniteDifference => {
                let mut out = DVector::zeros(self.n);
                let mut x = q.x.clone();
                for i in 0..self.n {
                    let eps = central_step(q.x[i]);
                    x[i] = q.x[i] + eps;
                    let f_plus = (self.f)(q.t, &x, &q.y);
                    x[i] = q.x[i] - eps;
                    let f_minus = (self.f)(q.t, &x, &q.y);
                    x[i] = q.x[i];
                    out[i] = (f_plus - f_minus) / (2.0 * eps);
                }
                out
            }
        }
    }

    pub fn grad_y(&self, q: &SymplPoint) -> DVector<f64> {
        match &self.mode {
            LiftedDerivativeMode::Analytic { grad_y, .. } => grad_y(q.t, &q.x, &q.y),
            LiftedDerivativeMode::FiniteDifference => {
                let mut out = DVector::zeros(self.n);
                let mut y = q.y.clone();
                for i in 0..self.n {
                    let eps = central_step(q.y[i]);
                    y[i] = q.y[i] + eps;
                    let f_plus = (self.f)(q.t, &q.x, &y);
                    y[i] = q.y[i] - eps;
                    let f_minus = (self.f)(q.t, &q.x, &y);
                    y[i] = q.y[i];
                    out[i] = (f_plus - f_minus) / (2.0 * eps);
                }
                out
            }
        }
    }
}

/// Pairing of the contact form theta = dz - y.dx with a tangent vector.
pub fn contact_form_at(p: &JetPoint, v: &TangentVector) -> f64 {
    assert_eq!(p.n(), v.n(), "point and vector dimensions must agree");
    v.dz - p.y.dot(&v.dx)
}

/// Pairing of d theta = sum_i dx^i wedge dy_i with two tangent vectors.
pub fn d_contact_form_at(_p: &JetPoint, v: &TangentVector, w: &TangentVector) -> f64 {
    assert_eq!(v.n(), w.n(), "vector dimensions must agree");
    v.dx.dot(&w.dy) - v.dy.dot(&w.dx)
}

fn check_gradients_finite(
    hx: &DVector<f64>,
    hy: &DVector<f64>,
    hz: f64,
    context: &str,
) -> Result<()> {
    if hz.is_finite() && hx.iter().all(|v| v.is_finite()) && hy.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context: context.into(),
        })
    }
}

/// The characteristic vector field of h at p:
/// dx = dh/dy, dy = -dh/dx - y dh/dz, dz = y . dh/dy.
pub fn characteristic_field(h: &Hamiltonian, p: &JetPoint) -> Result<TangentVector> {
    if p.n() != h.n() {
        return Err(Error::DimensionMismatch {
            expected: h.n(),
            got: p.n(),
        });
    }
    let hx = h.grad_x(p);
    let hy = h.grad_y(p);
    let hz = h.grad_z(p);
    check_gradients_finite(&hx, &hy, hz, "characteristic field gradients")?;
    let dz = p.y.dot(&hy);
    TangentVector::new(hy, -hx - &p.y * hz, dz)
}

/// The contact vector field of a z-independent h at p:
/// dx = dh/dy, dy = -dh/dx, dz = -h + y . dh/dy.
pub fn contact_field(h: &Hamiltonian, p: &JetPoint) -> Result<TangentVector> {
    if !h.z_independent() {
        return Err(Error::ZDependentHamiltonian);
    }
    if p.n() != h.n() {
        return Err(Error::DimensionMismatch {
            expected: h.n(),
            got: p.n(),
        });
    }
    let hx = h.grad_x(p);
    let hy = h.grad_y(p);
    check_gradients_finite(&hx, &hy, 0.0, "contact field gradients")?;
    let dz = -h.eval(p) + p.y.dot(&hy);
    TangentVector::new(hy, -hx, dz)
}

/// A tangent vector to the symplectization, components (dt, dx, dy, dz).
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedTangent {
    pub dt: f64,
    pub dx: DVector<f64>,
    pub dy: DVector<f64>,
    pub dz: f64,
}

impl LiftedTangent {
    pub fn jet_part(&self) -> TangentVector {
        TangentVector {
            dx: self.dx.clone(),
            dy: self.dy.clone(),
            dz: self.dz,
        }
    }
}

/// The Hamiltonian field of hhat on the symplectization:
/// dt = 0, dx = (1/t) dhhat/dy, dy = -(1/t) dhhat/dx,
/// dz = -dhhat/dt + (y/t) . dhhat/dy.
pub fn lifted_field(hhat: &LiftedHamiltonian, q: &SymplPoint) -> Result<LiftedTangent> {
    if q.n() != hhat.n() {
        return Err(Error::DimensionMismatch {
            expected: hhat.n(),
            got: q.n(),
        });
    }
    let gx = hhat.grad_x(q);
    let gy = hhat.grad_y(q);
    let gt = hhat.d_t(q);
    check_gradients_finite(&gx, &gy, gt, "lifted field gradients")?;
    let dz = -gt + q.y.dot(&gy) / q.t;
    Ok(LiftedTangent {
        dt: 0.0,
        dx: &gy / q.t,
        dy: -&gx / q.t,
        dz,
    })
}

/// A vector field on J^1(R^n): a value at each point and, when available in
/// closed form, a Jacobian in the flat (x, y, z) coordinates.
pub trait VectorField {
    fn dim(&self) -> usize;

    fn value(&self, p: &JetPoint) -> Result<TangentVector>;

    /// Closed-form Jacobian of the flat field, if the field carries one.
    fn jacobian(&self, _p: &JetPoint) -> Option<DMatrix<f64>> {
        None
    }
}

/// The characteristic field of a Hamiltonian, as a [`VectorField`].
pub struct CharacteristicField<'a> {
    h: &'a Hamiltonian,
}

impl<'a> CharacteristicField<'a> {
    pub fn new(h: &'a Hamiltonian) -> Self {
        Self { h }
    }
}

impl VectorField for CharacteristicField<'_> {
    fn dim(&self) -> usize {
        self.h.n()
    }

    fn value(&self, p: &JetPoint) -> Result<TangentVector> {
        characteristic_field(self.h, p)
    }
}

/// The contact field of a z-independent Hamiltonian, as a [`VectorField`].
pub struct ContactField<'a> {
    h: &'a Hamiltonian,
}

impl<'a> ContactField<'a> {
    pub fn new(h: &'a Hamiltonian) -> Self {
        Self { h }
    }
}

impl VectorField for ContactField<'_> {
    fn dim(&self) -> usize {
        self.h.n()
    }

    fn value(&self, p: &JetPoint) -> Result<TangentVector> {
        contact_field(self.h, p)
    }
}

/// An affine field flat_dot = M flat + b on the flat (x, y, z) coordinates,
/// with its exact (constant) Jacobian M.
#[derive(Debug, Clone)]
pub struct AffineJetField {
    n: usize,
    matrix: DMatrix<f64>,
    offset: DVector<f64>,
}

impl AffineJetField {
    pub fn new(n: usize, matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let dim = 2 * n + 1;
        if matrix.shape() != (dim, dim) {
            return Err(Error::BadMatrixShape {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        if offset.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: offset.len(),
            });
        }
        Ok(Self { n, matrix, offset })
    }

    /// The affine field of an algebra generator on the t = 1 slice, written
    /// in jet coordinates: wdot = v + A w, zdot = k + (Jv)^T w.
    pub fn from_generator(u: &GeneratorU) -> Self {
        let n = u.n();
        let dim = 2 * n + 1;
        let mut matrix = DMatrix::zeros(dim, dim);
        matrix.view_mut((0, 0), (2 * n, 2 * n)).copy_from(u.a());
        let jv = j_apply(n, u.v());
        for i in 0..2 * n {
            matrix[(2 * n, i)] = jv[i];
        }
        let mut offset = DVector::zeros(dim);
        offset.rows_mut(0, 2 * n).copy_from(u.v());
        offset[2 * n] = u.k();
        Self { n, matrix, offset }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }
}

impl VectorField for AffineJetField {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, p: &JetPoint) -> Result<TangentVector> {
        if p.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: p.n(),
            });
        }
        let flat = &self.matrix * p.flat() + &self.offset;
        Ok(TangentVector::from_flat(self.n, &flat))
    }

    fn jacobian(&self, _p: &JetPoint) -> Option<DMatrix<f64>> {
        Some(self.matrix.clone())
    }
}

/// How [`commutator`] obtains the Jacobians of the two fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BracketScheme {
    /// Use the closed-form Jacobians the fields carry; error if either
    /// field has none.
    ExactAffine,
    /// Approximate both Jacobians by central differences.
    FiniteDifference,
}

/// Central-difference Jacobian of a vector field in flat coordinates.
pub fn fd_jacobian(field: &dyn VectorField, p: &JetPoint) -> Result<DMatrix<f64>> {
    let n = field.dim();
    let dim = 2 * n + 1;
    let flat = p.flat();
    let mut jac = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let eps = central_step(flat[j]);
        let mut fp = flat.clone();
        fp[j] += eps;
        let vp = field.value(&JetPoint::from_flat(n, &fp))?.flat();
        let mut fm = flat.clone();
        fm[j] -= eps;
        let vm = field.value(&JetPoint::from_flat(n, &fm))?.flat();
        jac.set_column(j, &((vp - vm) / (2.0 * eps)));
    }
    Ok(jac)
}

/// The Lie bracket [X, Y](p) = DY(p) X(p) - DX(p) Y(p).
pub fn commutator(
    x: &dyn VectorField,
    y: &dyn VectorField,
    p: &JetPoint,
    scheme: BracketScheme,
) -> Result<TangentVector> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        });
    }
    if p.n() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: p.n(),
        });
    }
    let xv = x.value(p)?.flat();
    let yv = y.value(p)?.flat();
    let (dx, dy) = match scheme {
        BracketScheme::ExactAffine => {
            let dx = x.jacobian(p).ok_or(Error::JacobianUnavailable {
                which: "first field".into(),
            })?;
            let dy = y.jacobian(p).ok_or(Error::JacobianUnavailable {
                which: "second field".into(),
            })?;
            (dx, dy)
        }
        BracketScheme::FiniteDifference => (fd_jacobian(x, p)?, fd_jacobian(y, p)?),
    };
    let flat = &dy * xv - &dx * yv;
    Ok(TangentVector::from_flat(p.n(), &flat))
}

/// An orthonormal basis of the characteristic plane ker theta ∩ ker dh at p,
/// returned as 2n - 1 tangent vectors.
///
/// Fails with [`Error::DegeneratePoint`] when dh vanishes or is proportional
/// to the contact form, since the intersection then drops dimension.
pub fn characteristic_plane_basis(h: &Hamiltonian, p: &JetPoint) -> Result<Vec<TangentVector>> {
    if p.n() != h.n() {
        return Err(Error::DimensionMismatch {
            expected: h.n(),
            got: p.n(),
        });
    }
    let n = p.n();
    let dim = 2 * n + 1;

    // Row vectors of the two constraints in flat coordinates.
    let mut theta_row = DVector::zeros(dim);
    for i in 0..n {
        theta_row[i] = -p.y[i];
    }
    theta_row[2 * n] = 1.0;

    let hx = h.grad_x(p);
    let hy = h.grad_y(p);
    let hz = h.grad_z(p);
    check_gradients_finite(&hx, &hy, hz, "plane basis gradients")?;
    let mut dh_row = DVector::zeros(dim);
    dh_row.rows_mut(0, n).copy_from(&hx);
    dh_row.rows_mut(n, n).copy_from(&hy);
    dh_row[2 * n] = hz;

    let dh_norm = dh_row.norm();
    if dh_norm <= 1e-12 {
        return Err(Error::DegeneratePoint {
            reason: "the differential of h vanishes at the base point".into(),
        });
    }

    let q1 = theta_row.normalize();
    let mut q2 = &dh_row - &q1 * q1.dot(&dh_row);
    q2 -= &q1 * q1.dot(&q2);
    if q2.norm() <= 1e-10 * dh_norm {
        return Err(Error::DegeneratePoint {
            reason: "the differential of h is proportional to the contact form at the base point"
                .into(),
        });
    }
    q2.normalize_mut();

    let mut kept: Vec<DVector<f64>> = Vec::with_capacity(dim - 2);
    for k in 0..dim {
        let mut e = DVector::zeros(dim);
        e[k] = 1.0;
        // Two projection sweeps for numerical stability.
        for _ in 0..2 {
            e -= &q1 * q1.dot(&e);
            e -= &q2 * q2.dot(&e);
            for b in &kept {
                e -= b * b.dot(&e);
            }
        }
        if e.norm() >= 1e-8 {
            kept.push(e.normalize());
        }
        if kept.len() == dim - 2 {
            break;
        }
    }
    if kept.len() != dim - 2 {
        return Err(Error::DegeneratePoint {
            reason: format!(
                "characteristic plane collapsed: found {} of {} directions",
                kept.len(),
                dim - 2
            ),
        });
    }
    Ok(kept
        .into_iter()
        .map(|v| TangentVector::from_flat(n, &v))
        .collect())
}

/// The residuals of the identity X_contact = X_characteristic - h d/dz at p.
#[derive(Debug, Clone)]
pub struct CoincidenceReport {
    /// Value of h at the point.
    pub h_value: f64,
    /// Sup-norm of X_contact - (X_characteristic - h d/dz); zero up to
    /// rounding for any z-independent h.
    pub identity_residual: f64,
    /// Sup-norm of X_contact - X_characteristic; equals |h| up to rounding,
    /// so it vanishes exactly on the zero level.
    pub difference_norm: f64,
}

/// Evaluate both fields of a z-independent h at p and report how far apart
/// they are, together with the residual of the exact relation between them.
pub fn verify_coincidence(h: &Hamiltonian, p: &JetPoint) -> Result<CoincidenceReport> {
    let ch = characteristic_field(h, p)?;
    let co = contact_field(h, p)?;
    let h_value = h.eval(p);

    let mut shifted = ch.flat();
    let dim = shifted.len();
    shifted[dim - 1] -= h_value;
    let identity_residual = (co.flat() - shifted).amax();
    let difference_norm = (co.flat() - ch.flat()).amax();
    Ok(CoincidenceReport {
        h_value,
        identity_residual,
        difference_norm,
    })
}

/// Find c > 0 with h(x, c y_dir, z) = level by bracketing and bisection.
///
/// Scans c in (0, 2^60] for a sign change of h - level and bisects it to
/// machine precision. Fails when the scan never brackets the level.
pub fn find_level_point(
    h: &Hamiltonian,
    x: &DVector<f64>,
    z: f64,
    y_dir: &DVector<f64>,
    level: f64,
) -> Result<JetPoint> {
    if x.len() != h.n() || y_dir.len() != h.n() {
        return Err(Error::DimensionMismatch {
            expected: h.n(),
            got: if x.len() != h.n() { x.len() } else { y_dir.len() },
        });
    }
    if y_dir.amax() == 0.0 {
        return Err(Error::InvalidInput {
            reason: "direction vector for the momentum scan is zero".into(),
        });
    }
    let g = |c: f64| -> f64 { h.eval_parts(x, &(y_dir * c), z) - level };

    let mut lo = 0.0;
    let mut g_lo = g(lo);
    if !g_lo.is_finite() {
        return Err(Error::NonFinite {
            context: "level scan at c = 0".into(),
        });
    }
    if g_lo == 0.0 {
        return JetPoint::new(x.clone(), DVector::zeros(h.n()), z);
    }
    let mut hi = 1.0;
    let mut g_hi = g(hi);
    let mut bracketed = g_hi == 0.0 || (g_lo > 0.0) != (g_hi > 0.0);
    let mut tries = 0;
    while !bracketed && tries < 60 {
        lo = hi;
        g_lo = g_hi;
        hi *= 2.0;
        g_hi = g(hi);
        if !g_hi.is_finite() {
            return Err(Error::NonFinite {
                context: "level scan expansion".into(),
            });
        }
        bracketed = g_hi == 0.0 || (g_lo > 0.0) != (g_hi > 0.0);
        tries += 1;
    }
    if !bracketed {
        return Err(Error::InvalidInput {
            reason: format!("could not bracket the level {level} along the given direction"),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let g_mid = g(mid);
        if g_mid == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (g_mid > 0.0) == (g_lo > 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    JetPoint::new(x.clone(), y_dir * c, z)
}
