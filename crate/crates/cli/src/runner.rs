//! Task execution: run a validated RunConfig, write artifacts, build the
//! report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use charflow_core::applications::{
    hj_characteristics, trace_ray, MechanicalHamiltonian, RayEvent,
};
use charflow_core::cauchy::{
    propagate, residual_on_sheet, solve_strip, CharacteristicPolicy, InitialDataManifold,
};
use charflow_core::csv;
use charflow_core::flows::{
    conservation_report, flow_vs_exponential, integrate, IntegratorConfig, JetFieldSpec,
};
use charflow_core::jet_contact::{
    commutator, find_level_point, verify_coincidence, BracketScheme, JetPoint,
    LiftedHamiltonian,
};
use charflow_core::odd_symplectic::{embed_generator, extended_symplectic_form, matrix_exponential};
use charflow_core::QuadraticPDE;

use crate::config::{
    CauchySpec, CharacteristicsSpec, EikonalSpec, FieldChoice, GammaSpec, HjBuiltin, HjSpec,
    RunConfig, TaskSpec,
};

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone)]
pub struct Overrides {
    pub out: Option<String>,
    pub seed: Option<u64>,
    pub tol_scale: f64,
}

impl Default for Overrides {
    fn default() -> Self {
        Self {
            out: None,
            seed: None,
            tol_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    Info,
}

#[derive(Debug, Clone)]
struct CheckLine {
    status: Status,
    text: String,
}

impl CheckLine {
    fn pass(text: String) -> Self {
        Self {
            status: Status::Pass,
            text,
        }
    }
    fn fail(text: String) -> Self {
        Self {
            status: Status::Fail,
            text,
        }
    }
    fn info(text: String) -> Self {
        Self {
            status: Status::Info,
            text,
        }
    }
    fn check(ok: bool, text: String) -> Self {
        if ok {
            Self::pass(text)
        } else {
            Self::fail(text)
        }
    }
}

/// Outcome of a run: the rendered report, its failure count, and the
/// artifact files written.
#[derive(Debug)]
pub struct RunSummary {
    pub report: String,
    pub failures: usize,
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

const DEFAULT_SEED: u64 = 7;
const DEFAULT_PREFIX: &str = "charflow";

/// Execute the configured task. Writes `<prefix>_report.txt` plus the
/// task's CSV artifacts; the returned summary carries the same report.
pub fn run(cfg: &RunConfig, overrides: &Overrides) -> Result<RunSummary> {
    if !(overrides.tol_scale.is_finite() && overrides.tol_scale > 0.0) {
        bail!("--tol-scale must be positive and finite");
    }
    let prefix = overrides
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| DEFAULT_PREFIX.to_string());
    let seed = overrides.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let ts = overrides.tol_scale;

    let (lines, artifacts) = match &cfg.spec {
        TaskSpec::Verify => (verify_task(cfg.pde.as_ref().unwrap(), seed, ts)?, vec![]),
        TaskSpec::Characteristics(spec) => {
            characteristics_task(cfg.pde.as_ref().unwrap(), spec, ts)?
        }
        TaskSpec::Cauchy(spec) => cauchy_task(cfg.pde.as_ref().unwrap(), spec, ts)?,
        TaskSpec::Algebra { s_values } => {
            algebra_task(cfg.pde.as_ref().unwrap(), s_values, ts)?
        }
        TaskSpec::Eikonal(spec) => eikonal_task(spec, ts)?,
        TaskSpec::Hj(spec) => hj_task(cfg.n, spec, ts)?,
    };

    let mut report = String::new();
    let mut failures = 0;
    for line in &lines {
        let tag = match line.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failures += 1;
                "FAIL"
            }
            Status::Info => "INFO",
        };
        writeln!(report, "{tag} {}", line.text).unwrap();
    }
    let passed = lines
        .iter()
        .filter(|l| l.status == Status::Pass)
        .count();
    writeln!(report, "result: {passed} passed, {failures} failed").unwrap();

    if let Some(parent) = Path::new(&prefix).parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating output directory {}", parent.display()))?;
        }
    }
    let mut files = Vec::new();
    for (suffix, content) in artifacts {
        let path = PathBuf::from(format!("{prefix}_{suffix}"));
        std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        files.push(path);
    }
    let report_path = PathBuf::from(format!("{prefix}_report.txt"));
    std::fs::write(&report_path, &report)
        .with_context(|| format!("writing {}", report_path.display()))?;
    files.push(report_path);

    Ok(RunSummary {
        report,
        failures,
        files,
    })
}

type Artifacts = Vec<(&'static str, String)>;

fn random_vec<R: Rng + ?Sized>(n: usize, rng: &mut R, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(lo..hi))
}

// ---------------------------------------------------------------------------
// verify

fn verify_task(pde: &QuadraticPDE, seed: u64, ts: f64) -> Result<Vec<CheckLine>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = pde.hamiltonian();
    let n = pde.n();
    let mut lines = Vec::new();

    // Coincidence of the two fields on the zero level.
    let tol_on = 1e-10 * ts;
    let mut on_level_points = Vec::new();
    let mut worst_on: f64 = 0.0;
    let mut attempts = 0;
    while on_level_points.len() < 100 && attempts < 5000 {
        attempts += 1;
        let x = random_vec(n, &mut rng, -2.0, 2.0);
        let z = rng.random_range(-1.0..1.0);
        let y_dir = random_vec(n, &mut rng, -1.0, 1.0);
        if y_dir.norm() < 0.1 {
            continue;
        }
        let Ok(p) = find_level_point(&h, &x, z, &y_dir, 0.0) else {
            continue;
        };
        let report = verify_coincidence(&h, &p)?;
        worst_on = worst_on.max(report.difference_norm);
        on_level_points.push(p);
    }
    if on_level_points.len() < 100 {
        lines.push(CheckLine::fail(format!(
            "coincidence_on_level sampled only {} level-set points in {attempts} attempts",
            on_level_points.len()
        )));
    } else {
        lines.push(CheckLine::check(
            worst_on <= tol_on,
            format!("coincidence_on_level max={worst_on:.3e} tol={tol_on:.1e} points=100"),
        ));
    }

    // The exact relation between the fields, off the level set.
    let tol_id = 1e-12 * ts;
    let mut worst_id: f64 = 0.0;
    for _ in 0..100 {
        let p = JetPoint::new(
            random_vec(n, &mut rng, -2.0, 2.0),
            random_vec(n, &mut rng, -2.0, 2.0),
            rng.random_range(-1.0..1.0),
        )?;
        worst_id = worst_id.max(verify_coincidence(&h, &p)?.identity_residual);
    }
    lines.push(CheckLine::check(
        worst_id <= tol_id,
        format!("coincidence_identity max={worst_id:.3e} tol={tol_id:.1e}"),
    ));

    // The fields commute; exact affine Jacobians.
    let tol_br = 1e-12 * ts;
    let xc = pde.characteristic_field();
    let xh = pde.contact_field();
    let mut worst_br: f64 = 0.0;
    for _ in 0..100 {
        let p = JetPoint::new(
            random_vec(n, &mut rng, -2.0, 2.0),
            random_vec(n, &mut rng, -2.0, 2.0),
            rng.random_range(-1.0..1.0),
        )?;
        let bracket = commutator(&xc, &xh, &p, BracketScheme::ExactAffine)?;
        worst_br = worst_br.max(bracket.amax());
    }
    lines.push(CheckLine::check(
        worst_br <= tol_br,
        format!("bracket_exact max={worst_br:.3e} tol={tol_br:.1e}"),
    ));

    // h is constant along its own contact flow.
    let tol_cons = 1e-8 * ts;
    if let Some(p0) = on_level_points.first() {
        let cfg = IntegratorConfig::new(1e-3, 10_000_000)?;
        let tr = integrate(&JetFieldSpec::Contact(&h), p0, (0.0, 1.0), &cfg)?;
        let drift = conservation_report(&tr);
        lines.push(CheckLine::check(
            drift <= tol_cons,
            format!("conservation drift={drift:.3e} tol={tol_cons:.1e}"),
        ));
    }

    // The generator sits in the algebra and exponentiates into the group.
    let u = pde.to_generator()?;
    let tol_alg = 1e-12 * ts;
    let m = embed_generator(&u);
    let omega = extended_symplectic_form(n);
    let algebra_residual = (m.transpose() * omega.matrix() + omega.matrix() * &m).amax();
    lines.push(CheckLine::check(
        algebra_residual <= tol_alg,
        format!("algebra_membership residual={algebra_residual:.3e} tol={tol_alg:.1e}"),
    ));

    let tol_grp = 1e-10 * ts;
    let mut worst_grp: f64 = 0.0;
    for s in [0.5, -0.5, 2.0, -2.0] {
        let g = matrix_exponential(&u, s);
        let gm = g.matrix();
        let residual = (gm.transpose() * omega.matrix() * gm - omega.matrix()).amax();
        let dim = 2 * n + 2;
        let mut e_z = DVector::zeros(dim);
        e_z[dim - 1] = 1.0;
        let fixed = (gm * &e_z - &e_z).amax();
        worst_grp = worst_grp.max(residual.max(fixed));
    }
    lines.push(CheckLine::check(
        worst_grp <= tol_grp,
        format!("group_membership max={worst_grp:.3e} tol={tol_grp:.1e}"),
    ));

    // RK4 of the generator field converges to the exponential at 4th order.
    if let Some(p0) = on_level_points.first() {
        let mut w0 = DVector::zeros(2 * n);
        w0.rows_mut(0, n).copy_from(&p0.x);
        w0.rows_mut(n, n).copy_from(&p0.y);
        let coarse =
            flow_vs_exponential(&u, &w0, p0.z, 1.0, &IntegratorConfig::new(1e-2, 1_000_000)?)?;
        let fine =
            flow_vs_exponential(&u, &w0, p0.z, 1.0, &IntegratorConfig::new(5e-3, 1_000_000)?)?;
        // Nilpotent or tiny A makes RK4 exact; both residuals are then
        // accumulated rounding and their ratio carries no order information.
        let rounding_floor = 1e-12 * (1.0 + w0.amax().max(p0.z.abs()));
        if fine <= rounding_floor {
            lines.push(CheckLine::pass(format!(
                "exp_vs_flow exact to rounding (residual={fine:.3e})"
            )));
        } else {
            let ratio = coarse / fine;
            lines.push(CheckLine::check(
                (12.0..=20.0).contains(&ratio),
                format!("exp_vs_flow ratio={ratio:.2} range=[12,20]"),
            ));
        }
    }

    lines.push(CheckLine::info(format!(
        "commutation_condition = {}",
        pde.commutation_condition()
    )));
    Ok(lines)
}

// ---------------------------------------------------------------------------
// characteristics

fn characteristics_task(
    pde: &QuadraticPDE,
    spec: &CharacteristicsSpec,
    ts: f64,
) -> Result<(Vec<CheckLine>, Artifacts)> {
    let h = pde.hamiltonian();
    let cfg = IntegratorConfig::new(spec.step, spec.max_steps)?;
    let p0 = JetPoint::new(spec.x0.clone(), spec.y0.clone(), spec.z0)?;

    let lifted;
    let field = match spec.field {
        FieldChoice::Characteristic => JetFieldSpec::Characteristic(&h),
        FieldChoice::Contact => JetFieldSpec::Contact(&h),
        FieldChoice::Lifted => {
            lifted = LiftedHamiltonian::from_contact(&h)?;
            JetFieldSpec::Lifted {
                hhat: &lifted,
                t: spec.t,
            }
        }
    };
    let tr = integrate(&field, &p0, spec.s_span, &cfg)?;
    let drift = conservation_report(&tr);
    let tol = 1e-6 * ts;
    let end = tr.endpoint();

    let lines = vec![
        CheckLine::check(
            drift <= tol,
            format!("conservation drift={drift:.3e} tol={tol:.1e}"),
        ),
        CheckLine::info(format!(
            "trajectory kind={} samples={} final_z={}",
            tr.field_kind,
            tr.len(),
            csv::float(end.z)
        )),
    ];
    Ok((lines, vec![("trajectory.csv", tr.to_csv())]))
}

// ---------------------------------------------------------------------------
// cauchy

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_deriv(coeffs: &[f64]) -> Vec<f64> {
    if coeffs.len() <= 1 {
        return vec![0.0];
    }
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| i as f64 * c)
        .collect()
}

/// Piecewise-linear interpolation over a sorted node list, extrapolating
/// with the end segments.
fn lerp(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    let m = nodes.len();
    let seg = nodes[..m - 1].partition_point(|&v| v <= x).min(m - 2);
    let t = (x - nodes[seg]) / (nodes[seg + 1] - nodes[seg]);
    values[seg] + t * (values[seg + 1] - values[seg])
}

fn cauchy_task(
    pde: &QuadraticPDE,
    spec: &CauchySpec,
    ts: f64,
) -> Result<(Vec<CheckLine>, Artifacts)> {
    let h = pde.hamiltonian();
    let n = pde.n();

    let manifold = match &spec.gamma {
        GammaSpec::Polynomial {
            coords,
            phi,
            lambda,
        } => {
            let grid: Vec<DVector<f64>> =
                lambda.iter().map(|&l| DVector::from_element(1, l)).collect();
            let coords_x = coords.clone();
            let coords_t: Vec<Vec<f64>> = coords.iter().map(|c| poly_deriv(c)).collect();
            let phi_x = phi.clone();
            let phi_t = poly_deriv(phi);
            InitialDataManifold::analytic(
                n,
                grid,
                move |l| DVector::from_fn(coords_x.len(), |i, _| poly_eval(&coords_x[i], l[0])),
                move |l| {
                    DMatrix::from_fn(coords_t.len(), 1, |i, _| poly_eval(&coords_t[i], l[0]))
                },
                move |l| poly_eval(&phi_x, l[0]),
                move |l| DVector::from_element(1, poly_eval(&phi_t, l[0])),
            )?
        }
        GammaSpec::Grid {
            lambda,
            points,
            phi_values,
        } => {
            let grid: Vec<DVector<f64>> =
                lambda.iter().map(|&l| DVector::from_element(1, l)).collect();
            let (nodes_x, pts) = (lambda.clone(), points.clone());
            let (nodes_p, phis) = (lambda.clone(), phi_values.clone());
            let dim = n;
            InitialDataManifold::finite_difference(
                n,
                grid,
                move |l| {
                    DVector::from_fn(dim, |i, _| {
                        let coord: Vec<f64> = pts.iter().map(|p| p[i]).collect();
                        lerp(&nodes_x, &coord, l[0])
                    })
                },
                move |l| lerp(&nodes_p, &phis, l[0]),
            )?
        }
    };

    let strip = solve_strip(
        &h,
        &manifold,
        spec.level,
        &spec.p_guess,
        spec.tol,
        spec.max_iter,
    )?;
    let mut strip_residual: f64 = 0.0;
    for sample in &strip.samples {
        strip_residual =
            strip_residual.max((h.eval_parts(&sample.x0, &sample.p0, sample.z0) - spec.level).abs());
    }
    let policy = if spec.skip_characteristic {
        CharacteristicPolicy::Skip
    } else {
        CharacteristicPolicy::Error
    };
    let cfg = IntegratorConfig::new(spec.step, 10_000_000)?;
    let sheet = propagate(&h, &strip, spec.s_span, &cfg, policy)?;
    let report = residual_on_sheet(&h, &sheet, spec.level)?;

    let tol_strip = spec.tol.max(1e-14) * ts;
    let tol_level = 1e-6 * ts;
    let mut lines = vec![
        CheckLine::check(
            strip_residual <= tol_strip,
            format!("strip_level max={strip_residual:.3e} tol={tol_strip:.1e}"),
        ),
        CheckLine::check(
            report.max_level_residual <= tol_level,
            format!(
                "sheet_level max={:.3e} tol={tol_level:.1e}",
                report.max_level_residual
            ),
        ),
        CheckLine::info(match report.max_graph_defect {
            Some(d) => format!("graph_defect max={d:.3e} folds={}", report.fold_count),
            None => format!("graph_defect not-applicable folds={}", report.fold_count),
        }),
    ];
    if !sheet.skipped_lambda_indices.is_empty() {
        lines.push(CheckLine::info(format!(
            "skipped_characteristic_lambdas = {:?}",
            sheet.skipped_lambda_indices
        )));
    }
    Ok((lines, vec![("sheet.csv", sheet.to_csv())]))
}

// ---------------------------------------------------------------------------
// algebra

fn matrix_csv_rows(buf: &mut String, m: &DMatrix<f64>, prefix: &[String]) {
    for i in 0..m.nrows() {
        let mut fields = prefix.to_vec();
        fields.push(i.to_string());
        fields.extend(m.row(i).iter().map(|v| csv::float(*v)));
        csv::push_row(buf, fields);
    }
}

fn algebra_task(
    pde: &QuadraticPDE,
    s_values: &[f64],
    ts: f64,
) -> Result<(Vec<CheckLine>, Artifacts)> {
    let n = pde.n();
    let u = pde.to_generator()?;
    let m = embed_generator(&u);
    let omega = extended_symplectic_form(n);
    let dim = 2 * n + 2;

    let mut gen_csv = String::new();
    let mut header = vec!["row".to_string()];
    header.extend(csv::indexed_labels("c", dim));
    csv::push_row(&mut gen_csv, header);
    matrix_csv_rows(&mut gen_csv, &m, &[]);

    let mut exp_csv = String::new();
    let mut header = vec!["s".to_string(), "row".to_string()];
    header.extend(csv::indexed_labels("c", dim));
    csv::push_row(&mut exp_csv, header);

    let tol_alg = 1e-12 * ts;
    let algebra_residual = (m.transpose() * omega.matrix() + omega.matrix() * &m).amax();
    let mut lines = vec![CheckLine::check(
        algebra_residual <= tol_alg,
        format!("algebra_membership residual={algebra_residual:.3e} tol={tol_alg:.1e}"),
    )];

    let tol_grp = 1e-10 * ts;
    let mut worst: f64 = 0.0;
    for &s in s_values {
        let g = matrix_exponential(&u, s);
        matrix_csv_rows(&mut exp_csv, g.matrix(), &[csv::float(s)]);
        let gm = g.matrix();
        let residual = (gm.transpose() * omega.matrix() * gm - omega.matrix()).amax();
        let mut e_z = DVector::zeros(dim);
        e_z[dim - 1] = 1.0;
        let fixed = (gm * &e_z - &e_z).amax();
        worst = worst.max(residual.max(fixed));
    }
    lines.push(CheckLine::check(
        worst <= tol_grp,
        format!("group_membership max={worst:.3e} tol={tol_grp:.1e} s_values={s_values:?}"),
    ));
    lines.push(CheckLine::info(format!(
        "commutation_condition = {}",
        pde.commutation_condition()
    )));
    Ok((
        lines,
        vec![("generator.csv", gen_csv), ("exponential.csv", exp_csv)],
    ))
}

// ---------------------------------------------------------------------------
// eikonal

fn eikonal_task(spec: &EikonalSpec, ts: f64) -> Result<(Vec<CheckLine>, Artifacts)> {
    let cfg = IntegratorConfig::new(spec.step, 10_000_000)?;
    let ray = trace_ray(&spec.medium, &spec.x0, &spec.y0, spec.s_max, &cfg)?;

    let tol = 1e-10 * ts;
    let mut worst: f64 = 0.0;
    let mut crossings = 0;
    let mut reflections = 0;
    for seg in &ray.segments {
        let nk = spec.medium.n_value(seg.layer)?;
        let y = &seg.entry.y;
        worst = worst.max((y.dot(y) - 2.0 * nk).abs());
        match seg.event {
            RayEvent::InterfaceCrossing => crossings += 1,
            RayEvent::TotalInternalReflection => reflections += 1,
            RayEvent::Terminal => {}
        }
    }
    let end = ray.endpoint();
    let lines = vec![
        CheckLine::check(
            worst <= tol,
            format!("segment_level max={worst:.3e} tol={tol:.1e}"),
        ),
        CheckLine::info(format!(
            "ray segments={} crossings={crossings} reflections={reflections} final_z={}",
            ray.segments.len(),
            csv::float(end.z)
        )),
    ];
    Ok((lines, vec![("ray.csv", ray.to_csv())]))
}

// ---------------------------------------------------------------------------
// hj

fn hj_task(n_q: usize, spec: &HjSpec, ts: f64) -> Result<(Vec<CheckLine>, Artifacts)> {
    let h = match spec.builtin {
        HjBuiltin::Oscillator => MechanicalHamiltonian::analytic(
            n_q,
            |q, p, _| 0.5 * (p.dot(p) + q.dot(q)),
            |q, _, _| q.clone(),
            |_, p, _| p.clone(),
            |_, _, _| 0.0,
        ),
        HjBuiltin::Free => MechanicalHamiltonian::analytic(
            n_q,
            |_, p, _| 0.5 * p.dot(p),
            move |_, _, _| DVector::zeros(n_q),
            |_, p, _| p.clone(),
            |_, _, _| 0.0,
        ),
    };
    let cfg = IntegratorConfig::new(spec.step, spec.max_steps)?;
    let tr = hj_characteristics(&h, &spec.q0, &spec.p0, spec.t_span, &cfg)?;
    let drift = conservation_report(&tr);
    let tol = 1e-6 * ts;
    let end = tr.endpoint();
    let lines = vec![
        CheckLine::check(
            drift <= tol,
            format!("hj_level drift={drift:.3e} tol={tol:.1e}"),
        ),
        CheckLine::info(format!(
            "hj samples={} final_action={}",
            tr.len(),
            csv::float(end.z)
        )),
    ];
    Ok((lines, vec![("trajectory.csv", tr.to_csv())]))
}
