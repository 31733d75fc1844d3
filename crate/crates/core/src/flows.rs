//! Fixed-step RK4 integration of the jet-space vector fields, conservation
//! diagnostics, and the exp-vs-flow equivalence check for algebra
//! generators.

use nalgebra::DVector;

use crate::csv;
use crate::error::{Error, Result};
use crate::jet_contact::{
    characteristic_field, contact_field, lifted_field, Hamiltonian, JetPoint, LiftedHamiltonian,
    SymplPoint, TangentVector,
};
use crate::odd_symplectic::{generator_field_at, matrix_exponential, GeneratorU};

/// Which field a trajectory follows; carried as metadata and in CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Characteristic,
    Contact,
    Lifted,
}

impl std::fmt::Display for FieldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FieldKind::Characteristic => "characteristic",
            FieldKind::Contact => "contact",
            FieldKind::Lifted => "lifted",
        })
    }
}

/// A field to integrate: the Hamiltonian together with which of its fields
/// to follow. The lifted variant integrates on a fixed t-slice of the
/// symplectization.
#[derive(Clone)]
pub enum JetFieldSpec<'a> {
    Characteristic(&'a Hamiltonian),
    Contact(&'a Hamiltonian),
    Lifted { hhat: &'a LiftedHamiltonian, t: f64 },
}

impl JetFieldSpec<'_> {
    pub fn kind(&self) -> FieldKind {
        match self {
            JetFieldSpec::Characteristic(_) => FieldKind::Characteristic,
            JetFieldSpec::Contact(_) => FieldKind::Contact,
            JetFieldSpec::Lifted { .. } => FieldKind::Lifted,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            JetFieldSpec::Characteristic(h) | JetFieldSpec::Contact(h) => h.n(),
            JetFieldSpec::Lifted { hhat, .. } => hhat.n(),
        }
    }

    fn derivative(&self, p: &JetPoint) -> Result<TangentVector> {
        match self {
            JetFieldSpec::Characteristic(h) => characteristic_field(h, p),
            JetFieldSpec::Contact(h) => contact_field(h, p),
            JetFieldSpec::Lifted { hhat, t } => {
                let q = SymplPoint::new(*t, p.x.clone(), p.y.clone(), p.z)?;
                Ok(lifted_field(hhat, &q)?.jet_part())
            }
        }
    }

    /// The conserved quantity recorded along trajectories: h itself, or
    /// hhat at the fixed t for the lifted variant.
    fn h_value(&self, p: &JetPoint) -> Result<f64> {
        match self {
            JetFieldSpec::Characteristic(h) | JetFieldSpec::Contact(h) => Ok(h.eval(p)),
            JetFieldSpec::Lifted { hhat, t } => {
                let q = SymplPoint::new(*t, p.x.clone(), p.y.clone(), p.z)?;
                Ok(hhat.eval(&q))
            }
        }
    }
}

/// Settings for the fixed-step classical RK4 integrator (the only method
/// in scope).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub step: f64,
    pub max_steps: usize,
}

impl IntegratorConfig {
    pub fn new(step: f64, max_steps: usize) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidInput {
                reason: format!("integrator step must be positive and finite, got {step}"),
            });
        }
        if max_steps == 0 {
            return Err(Error::InvalidInput {
                reason: "max_steps must be at least 1".into(),
            });
        }
        Ok(Self { step, max_steps })
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            max_steps: 10_000_000,
        }
    }
}

/// A sampled integral curve: parameter values (strictly increasing), points,
/// and the recorded h along the way.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub s_values: Vec<f64>,
    pub points: Vec<JetPoint>,
    pub h_values: Vec<f64>,
    pub field_kind: FieldKind,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.s_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_values.is_empty()
    }

    pub fn n(&self) -> usize {
        self.points[0].n()
    }

    pub fn endpoint(&self) -> &JetPoint {
        self.points.last().expect("trajectory has at least one sample")
    }

    /// Serialize as CSV with columns s, x1..xn, y1..yn, z, h.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut buf = String::new();
        let mut header = vec!["s".to_string()];
        header.extend(csv::indexed_labels("x", n));
        header.extend(csv::indexed_labels("y", n));
        header.push("z".to_string());
        header.push("h".to_string());
        csv::push_row(&mut buf, header);
        for i in 0..self.len() {
            let p = &self.points[i];
            let mut row = vec![csv::float(self.s_values[i])];
            row.extend(p.x.iter().map(|v| csv::float(*v)));
            row.extend(p.y.iter().map(|v| csv::float(*v)));
            row.push(csv::float(p.z));
            row.push(csv::float(self.h_values[i]));
            csv::push_row(&mut buf, row);
        }
        buf
    }
}

/// One classical RK4 step of size `step` on the flat (x, y, z) coordinates.
fn rk4_step(
    field: &JetFieldSpec<'_>,
    n: usize,
    flat: &DVector<f64>,
    step: f64,
) -> Result<DVector<f64>> {
    let eval = |state: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(field.derivative(&JetPoint::from_flat(n, state))?.flat())
    };
    let k1 = eval(flat)?;
    let k2 = eval(&(flat + &k1 * (step / 2.0)))?;
    let k3 = eval(&(flat + &k2 * (step / 2.0)))?;
    let k4 = eval(&(flat + &k3 * step))?;
    Ok(flat + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (step / 6.0))
}

/// Integrate a field from p0 over s_span = (s0, s1) with s1 >= s0.
///
/// Samples are taken at s0, s0 + step, ... and finally at s1 itself (the
/// last step may be shorter). h is recorded at every sample.
pub fn integrate(
    field: &JetFieldSpec<'_>,
    p0: &JetPoint,
    s_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let (s0, s1) = s_span;
    if !s0.is_finite() || !s1.is_finite() {
        return Err(Error::InvalidInput {
            reason: "integration span must be finite".into(),
        });
    }
    if s1 < s0 {
        return Err(Error::InvalidInput {
            reason: format!("integration span is reversed: s0 = {s0}, s1 = {s1}"),
        });
    }
    if p0.n() != field.n() {
        return Err(Error::DimensionMismatch {
            expected: field.n(),
            got: p0.n(),
        });
    }
    let n = field.n();
    let total = s1 - s0;
    let full_steps = (total / cfg.step).floor() as usize;
    let remainder = total - full_steps as f64 * cfg.step;
    let has_tail = remainder > cfg.step * 1e-12;
    let needed = full_steps + usize::from(has_tail);
    if needed > cfg.max_steps {
        return Err(Error::StepBudgetExceeded {
            s0,
            s1,
            needed,
            max_steps: cfg.max_steps,
        });
    }

    let mut s_values = Vec::with_capacity(needed + 1);
    let mut points = Vec::with_capacity(needed + 1);
    let mut h_values = Vec::with_capacity(needed + 1);

    let mut flat = p0.flat();
    let mut s = s0;
    s_values.push(s);
    h_values.push(field.h_value(p0)?);
    points.push(p0.clone());

    for i in 0..needed {
        let (target, len) = if i + 1 <= full_steps {
            (s0 + (i + 1) as f64 * cfg.step, cfg.step)
        } else {
            (s1, s1 - s)
        };
        flat = rk4_step(field, n, &flat, len).map_err(|e| match e {
            // A field evaluation that left the finite range is a divergence
            // of the flow; report the last parameter with a valid state.
            Error::NonFinite { .. } => Error::IntegrationDiverged { last_s: s },
            other => other,
        })?;
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { last_s: s });
        }
        s = if i + 1 == needed { s1 } else { target };
        let p = JetPoint::from_flat(n, &flat);
        s_values.push(s);
        h_values.push(field.h_value(&p)?);
        points.push(p);
    }

    Ok(Trajectory {
        s_values,
        points,
        h_values,
        field_kind: field.kind(),
    })
}

/// Maximum drift of the recorded h from its initial value.
pub fn conservation_report(tr: &Trajectory) -> f64 {
    let h0 = tr.h_values[0];
    tr.h_values
        .iter()
        .map(|h| (h - h0).abs())
        .fold(0.0, f64::max)
}

/// Integrate the affine generator field from (w0, z0) over [0, s] (s may be
/// negative) and compare the endpoint with the affine action of exp(s u);
/// returns the sup-norm difference of the (w, z) parts.
pub fn flow_vs_exponential(
    u: &GeneratorU,
    w0: &DVector<f64>,
    z0: f64,
    s: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let n = u.n();
    if w0.len() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            got: w0.len(),
        });
    }
    if !s.is_finite() {
        return Err(Error::InvalidInput {
            reason: "flow parameter must be finite".into(),
        });
    }

    // Signed fixed-step RK4 on the (w, z) state.
    let dim = 2 * n + 1;
    let deriv = |state: &DVector<f64>| -> DVector<f64> {
        let w = state.rows(0, 2 * n).into_owned();
        let (wdot, zdot) = generator_field_at(u, &w, state[dim - 1]);
        let mut out = DVector::zeros(dim);
        out.rows_mut(0, 2 * n).copy_from(&wdot);
        out[dim - 1] = zdot;
        out
    };
    let count = (s.abs() / cfg.step).ceil().max(1.0) as usize;
    if count > cfg.max_steps {
        return Err(Error::StepBudgetExceeded {
            s0: 0.0,
            s1: s,
            needed: count,
            max_steps: cfg.max_steps,
        });
    }
    let h = s / count as f64;
    let mut state = DVector::zeros(dim);
    state.rows_mut(0, 2 * n).copy_from(w0);
    state[dim - 1] = z0;
    for i in 0..count {
        let k1 = deriv(&state);
        let k2 = deriv(&(&state + &k1 * (h / 2.0)));
        let k3 = deriv(&(&state + &k2 * (h / 2.0)));
        let k4 = deriv(&(&state + &k3 * h));
        state += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged {
                last_s: i as f64 * h,
            });
        }
    }

    let (w_exp, z_exp) = matrix_exponential(u, s).apply_affine(w0, z0)?;
    let w_res = (state.rows(0, 2 * n) - w_exp).amax();
    let z_res = (state[dim - 1] - z_exp).abs();
    Ok(w_res.max(z_res))
}
