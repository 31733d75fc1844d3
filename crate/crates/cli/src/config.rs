//! Run configuration: TOML grammar, validation, and the typed RunConfig.
//!
//! Grammar sketch (see the repository README for the full reference):
//!
//! ```toml
//! task = "verify"            # verify | characteristics | cauchy | algebra | eikonal | hj
//! n = 2
//! out = "runs/demo"          # optional output prefix, overridden by --out
//! seed = 7                   # optional RNG seed, overridden by --seed
//!
//! [hamiltonian]              # quadratic blocks (row-major) or a builtin name
//! builtin = "eikonal"        # eikonal | oscillator | transport
//! # c = [0.5]                # or explicit blocks: a, b, c (n*n), e, f (n), h0
//!
//! [characteristics]
//! x0 = [0.0, 0.0]
//! y0 = [0.6, 0.8]
//! s_span = [0.0, 2.0]
//! step = 0.001
//! ```

use anyhow::{anyhow, bail, Context, Result};
use charflow_core::applications::LayeredMedium;
use charflow_core::QuadraticPDE;
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Verify,
    Characteristics,
    Cauchy,
    Algebra,
    Eikonal,
    Hj,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Verify => "verify",
            Task::Characteristics => "characteristics",
            Task::Cauchy => "cauchy",
            Task::Algebra => "algebra",
            Task::Eikonal => "eikonal",
            Task::Hj => "hj",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldChoice {
    Characteristic,
    Contact,
    Lifted,
}

#[derive(Debug, Clone)]
pub struct CharacteristicsSpec {
    pub x0: DVector<f64>,
    pub y0: DVector<f64>,
    pub z0: f64,
    pub field: FieldChoice,
    /// Symplectization slice for the lifted field.
    pub t: f64,
    pub s_span: (f64, f64),
    pub step: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone)]
pub enum GammaSpec {
    /// One ascending coefficient list per coordinate, plus the phi trace
    /// polynomial, all in the scalar parameter.
    Polynomial {
        coords: Vec<Vec<f64>>,
        phi: Vec<f64>,
        lambda: Vec<f64>,
    },
    /// Piecewise-linear curve through listed points.
    Grid {
        lambda: Vec<f64>,
        points: Vec<Vec<f64>>,
        phi_values: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct CauchySpec {
    pub level: f64,
    pub gamma: GammaSpec,
    pub p_guess: DVector<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub s_span: (f64, f64),
    pub step: f64,
    pub skip_characteristic: bool,
}

#[derive(Debug, Clone)]
pub struct EikonalSpec {
    pub medium: LayeredMedium,
    pub x0: DVector<f64>,
    pub y0: DVector<f64>,
    pub s_max: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HjBuiltin {
    Oscillator,
    Free,
}

#[derive(Debug, Clone)]
pub struct HjSpec {
    pub builtin: HjBuiltin,
    pub q0: DVector<f64>,
    pub p0: DVector<f64>,
    pub t_span: (f64, f64),
    pub step: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone)]
pub enum TaskSpec {
    Verify,
    Characteristics(CharacteristicsSpec),
    Cauchy(CauchySpec),
    Algebra { s_values: Vec<f64> },
    Eikonal(EikonalSpec),
    Hj(HjSpec),
}

/// A validated run request.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub task: Task,
    pub n: usize,
    /// The configured PDE; present for every task except eikonal/hj, which
    /// build their Hamiltonians internally.
    pub pde: Option<QuadraticPDE>,
    pub out: Option<String>,
    pub seed: Option<u64>,
    pub spec: TaskSpec,
}

// ---------------------------------------------------------------------------
// Raw deserialization layer.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    task: Option<String>,
    n: Option<usize>,
    out: Option<String>,
    seed: Option<u64>,
    hamiltonian: Option<RawHamiltonian>,
    characteristics: Option<RawCharacteristics>,
    cauchy: Option<RawCauchy>,
    algebra: Option<RawAlgebra>,
    eikonal: Option<RawEikonal>,
    hj: Option<RawHj>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHamiltonian {
    builtin: Option<String>,
    a: Option<Vec<f64>>,
    b: Option<Vec<f64>>,
    c: Option<Vec<f64>>,
    e: Option<Vec<f64>>,
    f: Option<Vec<f64>>,
    h0: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCharacteristics {
    x0: Option<Vec<f64>>,
    y0: Option<Vec<f64>>,
    z0: Option<f64>,
    field: Option<String>,
    t: Option<f64>,
    s_span: Option<[f64; 2]>,
    step: Option<f64>,
    max_steps: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLambdaRange {
    start: f64,
    stop: f64,
    count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCauchy {
    level: Option<f64>,
    gamma: Option<Vec<Vec<f64>>>,
    phi: Option<Vec<f64>>,
    lambda: Option<RawLambdaRange>,
    lambda_values: Option<Vec<f64>>,
    gamma_points: Option<Vec<Vec<f64>>>,
    phi_values: Option<Vec<f64>>,
    p_guess: Option<Vec<f64>>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    s_span: Option<[f64; 2]>,
    step: Option<f64>,
    skip_characteristic: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlgebra {
    s_values: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEikonal {
    interfaces: Option<Vec<f64>>,
    n_values: Option<Vec<f64>>,
    axis: Option<usize>,
    x0: Option<Vec<f64>>,
    y0: Option<Vec<f64>>,
    s_max: Option<f64>,
    step: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHj {
    builtin: Option<String>,
    q0: Option<Vec<f64>>,
    p0: Option<Vec<f64>>,
    t_span: Option<[f64; 2]>,
    step: Option<f64>,
    max_steps: Option<usize>,
}

// ---------------------------------------------------------------------------
// Validation helpers.

fn need<T>(value: Option<T>, key: &str, task: &str) -> Result<T> {
    value.ok_or_else(|| anyhow!("missing key `{key}` for task {task}"))
}

fn vector(values: Vec<f64>, len: usize, key: &str) -> Result<DVector<f64>> {
    if values.len() != len {
        bail!("key `{key}` has {} entries, expected {len}", values.len());
    }
    Ok(DVector::from_vec(values))
}

fn square(values: Option<Vec<f64>>, n: usize, key: &str) -> Result<DMatrix<f64>> {
    match values {
        None => Ok(DMatrix::zeros(n, n)),
        Some(v) => {
            if v.len() != n * n {
                bail!("key `{key}` has {} entries, expected {} (row-major {n}x{n})", v.len(), n * n);
            }
            Ok(DMatrix::from_row_slice(n, n, &v))
        }
    }
}

fn builtin_pde(name: &str, n: usize) -> Result<QuadraticPDE> {
    let zeros_m = DMatrix::zeros(n, n);
    let zeros_v = DVector::zeros(n);
    let pde = match name {
        // |y|^2/2 - 1/2
        "eikonal" => QuadraticPDE::new(
            zeros_m.clone(),
            zeros_m,
            DMatrix::identity(n, n) * 0.5,
            zeros_v.clone(),
            zeros_v,
            0.5,
        ),
        // (|x|^2 + |y|^2)/2 - 1
        "oscillator" => QuadraticPDE::new(
            DMatrix::identity(n, n) * 0.5,
            zeros_m,
            DMatrix::identity(n, n) * 0.5,
            zeros_v.clone(),
            zeros_v,
            1.0,
        ),
        // y_1 - 1
        "transport" => {
            let mut e = zeros_v.clone();
            e[0] = 1.0;
            QuadraticPDE::new(zeros_m.clone(), zeros_m, DMatrix::zeros(n, n), e, zeros_v, 1.0)
        }
        other => bail!("unknown hamiltonian builtin `{other}` (expected eikonal, oscillator, or transport)"),
    };
    Ok(pde?)
}

fn build_pde(raw: Option<RawHamiltonian>, n: usize, task: &str) -> Result<QuadraticPDE> {
    let raw = need(raw, "hamiltonian", task)?;
    if let Some(name) = raw.builtin {
        let explicit = raw.a.is_some()
            || raw.b.is_some()
            || raw.c.is_some()
            || raw.e.is_some()
            || raw.f.is_some()
            || raw.h0.is_some();
        if explicit {
            bail!("hamiltonian gives both `builtin` and explicit blocks; pick one");
        }
        return builtin_pde(&name, n);
    }
    let a = square(raw.a, n, "hamiltonian.a")?;
    let b = square(raw.b, n, "hamiltonian.b")?;
    let c = square(raw.c, n, "hamiltonian.c")?;
    let e = match raw.e {
        None => DVector::zeros(n),
        Some(v) => vector(v, n, "hamiltonian.e")?,
    };
    let f = match raw.f {
        None => DVector::zeros(n),
        Some(v) => vector(v, n, "hamiltonian.f")?,
    };
    Ok(QuadraticPDE::new(a, b, c, e, f, raw.h0.unwrap_or(0.0))?)
}

fn span(values: [f64; 2], key: &str) -> Result<(f64, f64)> {
    if !(values[0].is_finite() && values[1].is_finite()) {
        bail!("key `{key}` must be two finite numbers");
    }
    Ok((values[0], values[1]))
}

/// Parse and validate a TOML run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).context("config is not valid TOML")?;
    let task_name = need(raw.task, "task", "any")?;
    let task = match task_name.as_str() {
        "verify" => Task::Verify,
        "characteristics" => Task::Characteristics,
        "cauchy" => Task::Cauchy,
        "algebra" => Task::Algebra,
        "eikonal" => Task::Eikonal,
        "hj" => Task::Hj,
        other => bail!(
            "unknown task `{other}` (expected verify, characteristics, cauchy, algebra, eikonal, or hj)"
        ),
    };
    let t = task.name();
    let n = need(raw.n, "n", t)?;
    if n == 0 {
        bail!("key `n` must be at least 1");
    }

    let (pde, spec) = match task {
        Task::Verify => (Some(build_pde(raw.hamiltonian, n, t)?), TaskSpec::Verify),
        Task::Characteristics => {
            let pde = build_pde(raw.hamiltonian, n, t)?;
            let c = need(raw.characteristics, "characteristics", t)?;
            let field = match c.field.as_deref() {
                None | Some("characteristic") => FieldChoice::Characteristic,
                Some("contact") => FieldChoice::Contact,
                Some("lifted") => FieldChoice::Lifted,
                Some(other) => bail!(
                    "unknown field `{other}` (expected characteristic, contact, or lifted)"
                ),
            };
            let spec = CharacteristicsSpec {
                x0: vector(need(c.x0, "characteristics.x0", t)?, n, "characteristics.x0")?,
                y0: vector(need(c.y0, "characteristics.y0", t)?, n, "characteristics.y0")?,
                z0: c.z0.unwrap_or(0.0),
                field,
                t: c.t.unwrap_or(1.0),
                s_span: span(need(c.s_span, "characteristics.s_span", t)?, "characteristics.s_span")?,
                step: need(c.step, "characteristics.step", t)?,
                max_steps: c.max_steps.unwrap_or(10_000_000),
            };
            (Some(pde), TaskSpec::Characteristics(spec))
        }
        Task::Cauchy => {
            if n != 2 {
                bail!("task cauchy is configured for n = 2 (a curve in the plane); got n = {n}");
            }
            let pde = build_pde(raw.hamiltonian, n, t)?;
            let c = need(raw.cauchy, "cauchy", t)?;
            let gamma = match (c.gamma, c.gamma_points) {
                (Some(coords), None) => {
                    if coords.len() != n {
                        bail!(
                            "key `cauchy.gamma` lists {} coordinate polynomials, expected {n}",
                            coords.len()
                        );
                    }
                    let lr = need(c.lambda, "cauchy.lambda", t)?;
                    if lr.count < 2 {
                        bail!("key `cauchy.lambda.count` must be at least 2");
                    }
                    let lambda: Vec<f64> = (0..lr.count)
                        .map(|i| {
                            lr.start + (lr.stop - lr.start) * i as f64 / (lr.count - 1) as f64
                        })
                        .collect();
                    GammaSpec::Polynomial {
                        coords,
                        phi: c.phi.unwrap_or_else(|| vec![0.0]),
                        lambda,
                    }
                }
                (None, Some(points)) => {
                    let lambda = need(c.lambda_values, "cauchy.lambda_values", t)?;
                    if lambda.len() < 2 {
                        bail!("key `cauchy.lambda_values` needs at least 2 entries");
                    }
                    if lambda.windows(2).any(|w| w[0] >= w[1]) {
                        bail!("key `cauchy.lambda_values` must be strictly increasing");
                    }
                    if points.len() != lambda.len() {
                        bail!(
                            "key `cauchy.gamma_points` has {} points for {} lambda values",
                            points.len(),
                            lambda.len()
                        );
                    }
                    if points.iter().any(|p| p.len() != n) {
                        bail!("each entry of `cauchy.gamma_points` needs {n} coordinates");
                    }
                    let phi_values = need(c.phi_values, "cauchy.phi_values", t)?;
                    if phi_values.len() != lambda.len() {
                        bail!(
                            "key `cauchy.phi_values` has {} entries for {} lambda values",
                            phi_values.len(),
                            lambda.len()
                        );
                    }
                    GammaSpec::Grid {
                        lambda,
                        points,
                        phi_values,
                    }
                }
                (Some(_), Some(_)) => {
                    bail!("cauchy gives both `gamma` polynomials and `gamma_points`; pick one")
                }
                (None, None) => bail!("missing key `cauchy.gamma` (or `cauchy.gamma_points`) for task cauchy"),
            };
            let spec = CauchySpec {
                level: c.level.unwrap_or(0.0),
                gamma,
                p_guess: vector(need(c.p_guess, "cauchy.p_guess", t)?, n, "cauchy.p_guess")?,
                tol: c.tol.unwrap_or(1e-10),
                max_iter: c.max_iter.unwrap_or(50),
                s_span: span(need(c.s_span, "cauchy.s_span", t)?, "cauchy.s_span")?,
                step: need(c.step, "cauchy.step", t)?,
                skip_characteristic: c.skip_characteristic.unwrap_or(false),
            };
            (Some(pde), TaskSpec::Cauchy(spec))
        }
        Task::Algebra => {
            let pde = build_pde(raw.hamiltonian, n, t)?;
            let s_values = raw
                .algebra
                .and_then(|a| a.s_values)
                .unwrap_or_else(|| vec![1.0]);
            if s_values.is_empty() {
                bail!("key `algebra.s_values` must not be empty");
            }
            (Some(pde), TaskSpec::Algebra { s_values })
        }
        Task::Eikonal => {
            let e = need(raw.eikonal, "eikonal", t)?;
            let interfaces = e.interfaces.unwrap_or_default();
            let n_values = need(e.n_values, "eikonal.n_values", t)?;
            let axis = e.axis.unwrap_or(n - 1);
            let medium = LayeredMedium::new(n, axis, interfaces, n_values)
                .context("invalid layered medium")?;
            let spec = EikonalSpec {
                medium,
                x0: vector(need(e.x0, "eikonal.x0", t)?, n, "eikonal.x0")?,
                y0: vector(need(e.y0, "eikonal.y0", t)?, n, "eikonal.y0")?,
                s_max: need(e.s_max, "eikonal.s_max", t)?,
                step: e.step.unwrap_or(1e-3),
            };
            (None, TaskSpec::Eikonal(spec))
        }
        Task::Hj => {
            let h = need(raw.hj, "hj", t)?;
            let builtin = match need(h.builtin, "hj.builtin", t)?.as_str() {
                "oscillator" => HjBuiltin::Oscillator,
                "free" => HjBuiltin::Free,
                other => bail!("unknown hj builtin `{other}` (expected oscillator or free)"),
            };
            let spec = HjSpec {
                builtin,
                q0: vector(need(h.q0, "hj.q0", t)?, n, "hj.q0")?,
                p0: vector(need(h.p0, "hj.p0", t)?, n, "hj.p0")?,
                t_span: span(need(h.t_span, "hj.t_span", t)?, "hj.t_span")?,
                step: need(h.step, "hj.step", t)?,
                max_steps: h.max_steps.unwrap_or(10_000_000),
            };
            (None, TaskSpec::Hj(spec))
        }
    };

    Ok(RunConfig {
        task,
        n,
        pde,
        out: raw.out,
        seed: raw.seed,
        spec,
    })
}
