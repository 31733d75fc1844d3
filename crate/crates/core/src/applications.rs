//! Two worked applications of the characteristic machinery.
//!
//! Hamilton-Jacobi: a mechanical H(q, p, t) lifts to the extended base
//! x = (q, t~), y = (p, E) as h = H(q, p, t~) + E, whose zero level is the
//! Hamilton-Jacobi equation. Its characteristics run at dt~/ds = 1 (s is
//! physical time), obey Hamilton's equations in (q, p), and accumulate the
//! Lagrangian action in z.
//!
//! Layered media: an eikonal h = |y|^2/2 - N with N piecewise constant
//! across planar, axis-aligned interfaces. Per layer the equation is
//! quadratic, so the layer owns a symmetry generator; rays are straight
//! inside a layer and refract (or totally reflect) at interfaces by
//! tangential-momentum continuity plus re-imposition of the level.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::csv;
use crate::error::{Error, Result};
use crate::flows::{integrate, IntegratorConfig, JetFieldSpec, Trajectory};
use crate::jet_contact::{central_step, Hamiltonian, JetPoint};
use crate::odd_symplectic::{matrix_exponential, GeneratorU};
use crate::quadratic::QuadraticPDE;

type MechFn = dyn Fn(&DVector<f64>, &DVector<f64>, f64) -> f64 + Send + Sync;
type MechGradFn = dyn Fn(&DVector<f64>, &DVector<f64>, f64) -> DVector<f64> + Send + Sync;
type MechScalarFn = dyn Fn(&DVector<f64>, &DVector<f64>, f64) -> f64 + Send + Sync;

#[derive(Clone)]
enum MechDerivatives {
    Analytic {
        d_q: Arc<MechGradFn>,
        d_p: Arc<MechGradFn>,
        d_t: Arc<MechScalarFn>,
    },
    FiniteDifference,
}

/// A mechanical Hamiltonian H(q, p, t) on R^{2 n_q} x R.
#[derive(Clone)]
pub struct MechanicalHamiltonian {
    n_q: usize,
    h: Arc<MechFn>,
    mode: MechDerivatives,
}

impl std::fmt::Debug for MechanicalHamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MechanicalHamiltonian")
            .field("n_q", &self.n_q)
            .finish()
    }
}

impl MechanicalHamiltonian {
    pub fn analytic(
        n_q: usize,
        h: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> f64 + Send + Sync + 'static,
        d_q: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> DVector<f64> + Send + Sync + 'static,
        d_p: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> DVector<f64> + Send + Sync + 'static,
        d_t: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            n_q,
            h: Arc::new(h),
            mode: MechDerivatives::Analytic {
                d_q: Arc::new(d_q),
                d_p: Arc::new(d_p),
                d_t: Arc::new(d_t),
            },
        }
    }

    pub fn finite_difference(
        n_q: usize,
        h: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            n_q,
            h: Arc::new(h),
            mode: MechDerivatives::FiniteDifference,
        }
    }

    pub fn n_q(&self) -> usize {
        self.n_q
    }

    pub fn eval(&self, q: &DVector<f64>, p: &DVector<f64>, t: f64) -> f64 {
        (self.h)(q, p, t)
    }

    pub fn d_q(&self, q: &DVector<f64>, p: &DVector<f64>, t: f64) -> DVector<f64> {
        match &self.mode {
            MechDerivatives::Analytic { d_q, .. } => d_q(q, p, t),
            MechDerivatives::FiniteDifference => {
                let mut out = DVector::zeros(self.n_q);
                let mut qq = q.clone();
                for i in 0..self.n_q {
                    let eps = central_step(q[i]);
                    qq[i] = q[i] + eps;
                    let plus = (self.h)(&qq, p, t);
                    qq[i] = q[i] - eps;
                    let minus = (self.h)(&qq, p, t);
                    qq[i] = q[i];
                    out[i] = (plus - minus) / (2.0 * eps);
                }
                out
            }
        }
    }

    pub fn d_p(&self, q: &DVector<f64>, p: &DVector<f64>, t: f64) -> DVector<f64> {
        match &self.mode {
            MechDerivatives::Analytic { d_p, .. } => d_p(q, p, t),
            MechDerivatives::FiniteDifference => {
                let mut out = DVector::zeros(self.n_q);
                let mut pp = p.clone();
                for i in 0..self.n_q {
                    let eps = central_step(p[i]);
                    pp[i] = p[i] + eps;
                    let plus = (self.h)(q, &pp, t);
                    pp[i] = p[i] - eps;
                    let minus = (self.h)(q, &pp, t);
                    pp[i] = p[i];
                    out[i] = (plus - minus) / (2.0 * eps);
                }
                out
            }
        }
    }

    pub fn d_t(&self, q: &DVector<f64>, p: &DVector<f64>, t: f64) -> f64 {
        match &self.mode {
            MechDerivatives::Analytic { d_t, .. } => d_t(q, p, t),
            MechDerivatives::FiniteDifference => {
                let eps = central_step(t);
                ((self.h)(q, p, t + eps) - (self.h)(q, p, t - eps)) / (2.0 * eps)
            }
        }
    }
}

fn split_qt(x: &DVector<f64>, n_q: usize) -> (DVector<f64>, f64) {
    (x.rows(0, n_q).into_owned(), x[n_q])
}

/// Lift H(q, p, t) to the jet Hamiltonian h(x, y) = H(q, p, t~) + E on the
/// extended base x = (q, t~), y = (p, E). Its zero level set is the
/// Hamilton-Jacobi equation H(q, dS/dq, t) + dS/dt = 0, and the lift is
/// z-independent even for time-dependent H.
pub fn hj_lift(h: &MechanicalHamiltonian) -> Hamiltonian {
    let n_q = h.n_q;
    let n = n_q + 1;
    let hf = h.clone();
    let hx = h.clone();
    let hy = h.clone();
    Hamiltonian::analytic_z_independent(
        n,
        move |x, y, _| {
            let (q, t) = split_qt(x, n_q);
            let (p, e) = split_qt(y, n_q);
            hf.eval(&q, &p, t) + e
        },
        move |x, y, _| {
            let (q, t) = split_qt(x, n_q);
            let (p, _) = split_qt(y, n_q);
            let dq = hx.d_q(&q, &p, t);
            let mut out = DVector::zeros(n);
            out.rows_mut(0, n_q).copy_from(&dq);
            out[n_q] = hx.d_t(&q, &p, t);
            out
        },
        move |x, y, _| {
            let (q, t) = split_qt(x, n_q);
            let (p, _) = split_qt(y, n_q);
            let dp = hy.d_p(&q, &p, t);
            let mut out = DVector::zeros(n);
            out.rows_mut(0, n_q).copy_from(&dp);
            out[n_q] = 1.0;
            out
        },
    )
}

/// Integrate the characteristics of the lifted Hamilton-Jacobi equation
/// from (q0, p0) over physical time t_span.
///
/// The initial co-state is completed with E0 = -H(q0, p0, t0), so the
/// trajectory starts (and stays) on the zero level. Along it the (q, p)
/// block obeys Hamilton's equations, the t~ coordinate advances at unit
/// rate, and z accumulates the Lagrangian action from z(t0) = 0.
pub fn hj_characteristics(
    h: &MechanicalHamiltonian,
    q0: &DVector<f64>,
    p0: &DVector<f64>,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let n_q = h.n_q;
    if q0.len() != n_q || p0.len() != n_q {
        return Err(Error::DimensionMismatch {
            expected: n_q,
            got: if q0.len() != n_q { q0.len() } else { p0.len() },
        });
    }
    let lifted = hj_lift(h);
    let e0 = -h.eval(q0, p0, t_span.0);
    let mut x = DVector::zeros(n_q + 1);
    x.rows_mut(0, n_q).copy_from(q0);
    x[n_q] = t_span.0;
    let mut y = DVector::zeros(n_q + 1);
    y.rows_mut(0, n_q).copy_from(p0);
    y[n_q] = e0;
    let start = JetPoint::new(x, y, 0.0)?;
    integrate(&JetFieldSpec::Characteristic(&lifted), &start, t_span, cfg)
}

/// A stack of constant-coefficient layers along one coordinate axis.
///
/// Layer k (0-based) occupies the slab between interfaces[k-1] and
/// interfaces[k] in the stacking coordinate, with the outer layers
/// unbounded. N holds the layer coefficients of the eikonal equation
/// |grad S|^2 / 2 = N: squared refractive index over c^2 in optics,
/// potential minus energy in the WKB reading.
#[derive(Debug, Clone)]
pub struct LayeredMedium {
    n: usize,
    axis: usize,
    interfaces: Vec<f64>,
    n_values: Vec<f64>,
}

impl LayeredMedium {
    pub fn new(n: usize, axis: usize, interfaces: Vec<f64>, n_values: Vec<f64>) -> Result<Self> {
        if n == 0 || axis >= n {
            return Err(Error::InvalidInput {
                reason: format!("stacking axis {axis} out of range for dimension {n}"),
            });
        }
        if n_values.is_empty() || n_values.len() != interfaces.len() + 1 {
            return Err(Error::InvalidInput {
                reason: format!(
                    "{} layer values need {} interfaces, got {}",
                    n_values.len(),
                    n_values.len().max(1) - 1,
                    interfaces.len()
                ),
            });
        }
        if interfaces.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput {
                reason: "interfaces must be strictly increasing".into(),
            });
        }
        if interfaces.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "interface positions".into(),
            });
        }
        if n_values.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::InvalidInput {
                reason: "layer coefficients must be positive".into(),
            });
        }
        Ok(Self {
            n,
            axis,
            interfaces,
            n_values,
        })
    }

    /// Stack along the last coordinate.
    pub fn stack(n: usize, interfaces: Vec<f64>, n_values: Vec<f64>) -> Result<Self> {
        Self::new(n, n - 1, interfaces, n_values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn interfaces(&self) -> &[f64] {
        &self.interfaces
    }

    pub fn num_layers(&self) -> usize {
        self.n_values.len()
    }

    pub fn n_value(&self, k: usize) -> Result<f64> {
        self.n_values.get(k).copied().ok_or(Error::LayerOutOfRange {
            k,
            layers: self.n_values.len(),
        })
    }

    /// Layer index containing x; points on an interface belong to the
    /// layer above it.
    pub fn layer_of(&self, x: &DVector<f64>) -> Result<usize> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let c = x[self.axis];
        Ok(self.interfaces.partition_point(|&xi| xi <= c))
    }
}

/// The eikonal equation of layer k as a quadratic PDE:
/// h = |y|^2 / 2 - N_k, i.e. c = I/2, h0 = N_k, all other blocks zero.
pub fn layer_quadratic(med: &LayeredMedium, k: usize) -> Result<QuadraticPDE> {
    let nk = med.n_value(k)?;
    let n = med.n;
    QuadraticPDE::new(
        DMatrix::zeros(n, n),
        DMatrix::zeros(n, n),
        DMatrix::identity(n, n) * 0.5,
        DVector::zeros(n),
        DVector::zeros(n),
        nk,
    )
}

/// The symmetry generator owned by layer k (the quadratic layer equation
/// satisfies the commutation condition, so its generator flow preserves
/// the layer's characteristics).
pub fn layer_generator(med: &LayeredMedium, k: usize) -> Result<GeneratorU> {
    layer_quadratic(med, k)?.to_generator()
}

/// Why a ray segment ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayEvent {
    InterfaceCrossing,
    TotalInternalReflection,
    Terminal,
}

impl std::fmt::Display for RayEvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            RayEvent::InterfaceCrossing => "interface-crossing",
            RayEvent::TotalInternalReflection => "total-internal-reflection",
            RayEvent::Terminal => "terminal",
        };
        f.write_str(name)
    }
}

/// One straight piece of a ray inside a single layer.
#[derive(Debug, Clone)]
pub struct RaySegment {
    pub layer: usize,
    pub s_start: f64,
    pub s_end: f64,
    pub entry: JetPoint,
    pub exit: JetPoint,
    pub event: RayEvent,
}

/// A piecewise-straight characteristic through a layered medium.
#[derive(Debug, Clone)]
pub struct Ray {
    pub segments: Vec<RaySegment>,
}

impl Ray {
    pub fn endpoint(&self) -> &JetPoint {
        &self.segments.last().expect("ray has at least one segment").exit
    }

    /// CSV with one row per segment (its exit state):
    /// segment, k, s_start, s_end, x1..xn, y1..yn, z, event.
    pub fn to_csv(&self) -> String {
        let n = self.segments[0].exit.n();
        let mut buf = String::new();
        let mut header = vec![
            "segment".to_string(),
            "k".to_string(),
            "s_start".to_string(),
            "s_end".to_string(),
        ];
        header.extend(csv::indexed_labels("x", n));
        header.extend(csv::indexed_labels("y", n));
        header.push("z".to_string());
        header.push("event".to_string());
        csv::push_row(&mut buf, header);
        for (i, seg) in self.segments.iter().enumerate() {
            let mut fields = vec![
                i.to_string(),
                seg.layer.to_string(),
                csv::float(seg.s_start),
                csv::float(seg.s_end),
            ];
            fields.extend(seg.exit.x.iter().map(|v| csv::float(*v)));
            fields.extend(seg.exit.y.iter().map(|v| csv::float(*v)));
            fields.push(csv::float(seg.exit.z));
            fields.push(seg.event.to_string());
            csv::push_row(&mut buf, fields);
        }
        buf
    }
}

/// Hard cap on ray segments, against rays trapped between interfaces with
/// an s_max far beyond the interesting range.
pub const RAY_SEGMENT_CAP: usize = 100_000;

/// Tolerance for the per-segment cross-check of the straight-line flow
/// against the layer generator's matrix exponential (on the (x, y) block;
/// the generator's z row realizes the symmetry, not the characteristic z).
pub const RAY_EXP_CROSSCHECK_TOL: f64 = 1e-12;

fn straight_exit(x: &DVector<f64>, y: &DVector<f64>, z: f64, ds: f64) -> (DVector<f64>, DVector<f64>, f64) {
    (x + y * ds, y.clone(), z + ds * y.dot(y))
}

fn crosscheck_segment(
    med: &LayeredMedium,
    k: usize,
    x: &DVector<f64>,
    y: &DVector<f64>,
    ds: f64,
    x_exit: &DVector<f64>,
) -> Result<()> {
    let u = layer_generator(med, k)?;
    let g = matrix_exponential(&u, ds);
    let n = med.n;
    let mut w = DVector::zeros(2 * n);
    w.rows_mut(0, n).copy_from(x);
    w.rows_mut(n, n).copy_from(y);
    let (w_exp, _) = g.apply_affine(&w, 0.0)?;
    let mut residual: f64 = 0.0;
    for i in 0..n {
        residual = residual.max((w_exp[i] - x_exit[i]).abs());
        residual = residual.max((w_exp[n + i] - y[i]).abs());
    }
    let scale = 1.0 + x_exit.amax().max(y.amax());
    if residual > RAY_EXP_CROSSCHECK_TOL * scale {
        return Err(Error::ConventionMismatch {
            residual: residual / scale,
        });
    }
    Ok(())
}

/// Trace the eikonal characteristic from (x0, y0) through the medium up to
/// parameter s_max, starting from z = 0.
///
/// Within a layer the exact straight-line flow x + s y is used (and
/// cross-checked against the layer generator's exponential); z grows at
/// rate |y|^2. At an interface the tangential momentum is kept and the
/// axis component re-imposes the next layer's level with unchanged travel
/// direction; if the next level cannot absorb the tangential energy the
/// ray totally reflects instead. A refracted axis component of exactly
/// zero is grazing incidence and is an error.
pub fn trace_ray(
    med: &LayeredMedium,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    s_max: f64,
    _cfg: &IntegratorConfig,
) -> Result<Ray> {
    let n = med.n;
    if x0.len() != n || y0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if x0.len() != n { x0.len() } else { y0.len() },
        });
    }
    if !(s_max.is_finite() && s_max > 0.0) {
        return Err(Error::InvalidInput {
            reason: "s_max must be positive and finite".into(),
        });
    }
    let mut k = med.layer_of(x0)?;
    let level_gap = (y0.dot(y0) - 2.0 * med.n_value(k)?).abs();
    if level_gap > 1e-8 {
        return Err(Error::InvalidInput {
            reason: format!(
                "|y0|^2 = {} is off the layer level 2N = {} by {level_gap:.3e}",
                y0.dot(y0),
                2.0 * med.n_value(k)?
            ),
        });
    }

    let axis = med.axis;
    let mut s = 0.0;
    let mut x = x0.clone();
    let mut y = y0.clone();
    let mut z = 0.0;
    let mut segments = Vec::new();

    loop {
        if segments.len() >= RAY_SEGMENT_CAP {
            return Err(Error::InvalidInput {
                reason: format!("ray exceeded {RAY_SEGMENT_CAP} segments before s_max"),
            });
        }
        let d = y[axis];
        // Next interface in the direction of travel, if any.
        let boundary = if d > 0.0 && k < med.num_layers() - 1 {
            Some(med.interfaces[k])
        } else if d < 0.0 && k > 0 {
            Some(med.interfaces[k - 1])
        } else {
            None
        };
        let s_cross = boundary.map(|b| s + (b - x[axis]) / d);

        match s_cross {
            Some(sc) if sc < s_max => {
                let b = boundary.unwrap();
                let ds = sc - s;
                let (mut x_exit, y_exit, z_exit) = straight_exit(&x, &y, z, ds);
                x_exit[axis] = b; // crossing located exactly; snap over rounding
                crosscheck_segment(med, k, &x, &y, ds, &x_exit)?;

                let k_next = if d > 0.0 { k + 1 } else { k - 1 };
                let tangential_sq = y.dot(&y) - d * d;
                let headroom = 2.0 * med.n_value(k_next)? - tangential_sq;
                // A vanishing refracted axis component leaves the ray
                // parallel to the interface; judged against the energy
                // scales so roundoff in the balance still counts.
                let grazing = 1e-12 * tangential_sq.max(2.0 * med.n_value(k_next)?).max(1.0);
                let mut y_new = y_exit.clone();
                let event;
                if headroom.abs() <= grazing {
                    return Err(Error::GrazingIncidence { s: sc });
                } else if headroom > 0.0 {
                    y_new[axis] = d.signum() * headroom.sqrt();
                    event = RayEvent::InterfaceCrossing;
                } else {
                    y_new[axis] = -d;
                    event = RayEvent::TotalInternalReflection;
                }

                segments.push(RaySegment {
                    layer: k,
                    s_start: s,
                    s_end: sc,
                    entry: JetPoint::new(x.clone(), y.clone(), z)?,
                    exit: JetPoint::new(x_exit.clone(), y_exit, z_exit)?,
                    event,
                });
                if event == RayEvent::InterfaceCrossing {
                    k = k_next;
                }
                s = sc;
                x = x_exit;
                y = y_new;
                z = z_exit;
            }
            _ => {
                let ds = s_max - s;
                let (x_exit, y_exit, z_exit) = straight_exit(&x, &y, z, ds);
                crosscheck_segment(med, k, &x, &y, ds, &x_exit)?;
                segments.push(RaySegment {
                    layer: k,
                    s_start: s,
                    s_end: s_max,
                    entry: JetPoint::new(x, y, z)?,
                    exit: JetPoint::new(x_exit, y_exit, z_exit)?,
                    event: RayEvent::Terminal,
                });
                return Ok(Ray { segments });
            }
        }
    }
}
