//! Cauchy problems for h(x, grad z) = level: build the initial strip over a
//! parametrized hypersurface, test the non-characteristic condition, and
//! propagate the strip into a solution sheet along characteristics.
//!
//! The data is a map gamma: lambda in R^{n-1} -> x in R^n together with the
//! prescribed trace phi(lambda) of z along gamma. The strip completes this
//! to first order: at each grid point, p0 solves
//!
//! ```text
//! h(x_gamma(lambda), p0) = level,
//! p0 . d x_gamma / d lambda_j = d (phi) / d lambda_j        (j < n),
//! ```
//!
//! so the sheet produced by the characteristic flow interpolates phi as a
//! C^1 graph near gamma. Multiple p0 branches are disambiguated by a guess
//! vector and lambda-continuation.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::csv;
use crate::error::{Error, Result};
use crate::flows::{integrate, IntegratorConfig, JetFieldSpec, Trajectory};
use crate::jet_contact::{central_step, Hamiltonian, JetPoint};

/// Determinant tolerance (relative to column scales) below which the
/// non-characteristic test fails.
pub const NONCHARACTERISTIC_DET_TOL: f64 = 1e-10;

/// Determinant tolerance (relative to column scales) below which a sheet
/// node is flagged as lying on a fold (caustic).
pub const FOLD_DET_TOL: f64 = 1e-8;

type PointFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type TangentFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;
type TraceFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
type TraceGradFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

#[derive(Clone)]
enum ManifoldDerivatives {
    Analytic {
        tangent: Arc<TangentFn>,
        phi_grad: Arc<TraceGradFn>,
    },
    FiniteDifference,
}

/// Cauchy data: a parametrized (n-1)-manifold gamma in R^n carrying the
/// trace phi of the unknown, sampled on a finite lambda-grid.
///
/// For n = 1 the manifold is a single point; its lambda-grid is one empty
/// parameter vector.
#[derive(Clone)]
pub struct InitialDataManifold {
    n: usize,
    lambda_grid: Vec<DVector<f64>>,
    x_gamma: Arc<PointFn>,
    phi: Arc<TraceFn>,
    mode: ManifoldDerivatives,
}

impl std::fmt::Debug for InitialDataManifold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InitialDataManifold")
            .field("n", &self.n)
            .field("grid_points", &self.lambda_grid.len())
            .finish()
    }
}

impl InitialDataManifold {
    pub fn analytic(
        n: usize,
        lambda_grid: Vec<DVector<f64>>,
        x_gamma: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        tangent: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
        phi: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        phi_grad: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::build(
            n,
            lambda_grid,
            Arc::new(x_gamma),
            Arc::new(phi),
            ManifoldDerivatives::Analytic {
                tangent: Arc::new(tangent),
                phi_grad: Arc::new(phi_grad),
            },
        )
    }

    pub fn finite_difference(
        n: usize,
        lambda_grid: Vec<DVector<f64>>,
        x_gamma: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        phi: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::build(
            n,
            lambda_grid,
            Arc::new(x_gamma),
            Arc::new(phi),
            ManifoldDerivatives::FiniteDifference,
        )
    }

    /// The n = 1 case: gamma is the single point x0 with z = phi0.
    pub fn single_point(x0: DVector<f64>, phi0: f64) -> Result<Self> {
        let n = x0.len();
        if n != 1 {
            return Err(Error::InvalidInput {
                reason: "a point manifold is the n = 1 case; higher n needs a parametrized gamma"
                    .into(),
            });
        }
        Self::build(
            n,
            vec![DVector::zeros(0)],
            Arc::new(move |_: &DVector<f64>| x0.clone()),
            Arc::new(move |_: &DVector<f64>| phi0),
            ManifoldDerivatives::Analytic {
                tangent: Arc::new(|_: &DVector<f64>| DMatrix::zeros(1, 0)),
                phi_grad: Arc::new(|_: &DVector<f64>| DVector::zeros(0)),
            },
        )
    }

    fn build(
        n: usize,
        lambda_grid: Vec<DVector<f64>>,
        x_gamma: Arc<PointFn>,
        phi: Arc<TraceFn>,
        mode: ManifoldDerivatives,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput {
                reason: "manifold needs at least one ambient dimension".into(),
            });
        }
        if lambda_grid.is_empty() {
            return Err(Error::InvalidInput {
                reason: "lambda grid is empty".into(),
            });
        }
        for (i, l) in lambda_grid.iter().enumerate() {
            if l.len() != n - 1 {
                return Err(Error::InvalidInput {
                    reason: format!(
                        "lambda grid point {i} has dimension {}, expected {}",
                        l.len(),
                        n - 1
                    ),
                });
            }
        }
        let m = Self {
            n,
            lambda_grid,
            x_gamma,
            phi,
            mode,
        };
        // Probe the callbacks once so shape bugs surface early.
        let x0 = m.x_at(&m.lambda_grid[0])?;
        if x0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x0.len(),
            });
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda_grid(&self) -> &[DVector<f64>] {
        &self.lambda_grid
    }

    pub fn x_at(&self, lambda: &DVector<f64>) -> Result<DVector<f64>> {
        let x = (self.x_gamma)(lambda);
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "gamma point".into(),
            });
        }
        Ok(x)
    }

    pub fn phi_at(&self, lambda: &DVector<f64>) -> f64 {
        (self.phi)(lambda)
    }

    /// Columns d x_gamma / d lambda_j, an n x (n-1) matrix.
    pub fn tangent_at(&self, lambda: &DVector<f64>) -> Result<DMatrix<f64>> {
        match &self.mode {
            ManifoldDerivatives::Analytic { tangent, .. } => {
                let t = tangent(lambda);
                if t.shape() != (self.n, self.n - 1) {
                    return Err(Error::BadMatrixShape {
                        rows: t.nrows(),
                        cols: t.ncols(),
                    });
                }
                Ok(t)
            }
            ManifoldDerivatives::FiniteDifference => {
                let mut t = DMatrix::zeros(self.n, self.n - 1);
                let mut l = lambda.clone();
                for j in 0..self.n - 1 {
                    let eps = central_step(lambda[j]);
                    l[j] = lambda[j] + eps;
                    let xp = self.x_at(&l)?;
                    l[j] = lambda[j] - eps;
                    let xm = self.x_at(&l)?;
                    l[j] = lambda[j];
                    t.set_column(j, &((xp - xm) / (2.0 * eps)));
                }
                Ok(t)
            }
        }
    }

    /// The gradient d (phi) / d lambda, an (n-1)-vector.
    pub fn phi_grad_at(&self, lambda: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.mode {
            ManifoldDerivatives::Analytic { phi_grad, .. } => {
                let g = phi_grad(lambda);
                if g.len() != self.n - 1 {
                    return Err(Error::DimensionMismatch {
                        expected: self.n - 1,
                        got: g.len(),
                    });
                }
                Ok(g)
            }
            ManifoldDerivatives::FiniteDifference => {
                let mut g = DVector::zeros(self.n - 1);
                let mut l = lambda.clone();
                for j in 0..self.n - 1 {
                    let eps = central_step(lambda[j]);
                    l[j] = lambda[j] + eps;
                    let fp = self.phi_at(&l);
                    l[j] = lambda[j] - eps;
                    let fm = self.phi_at(&l);
                    l[j] = lambda[j];
                    g[j] = (fp - fm) / (2.0 * eps);
                }
                Ok(g)
            }
        }
    }
}

/// Uniform scalar parameter grid for curves (n = 2 Cauchy data).
pub fn scalar_grid(a: f64, b: f64, count: usize) -> Vec<DVector<f64>> {
    assert!(count >= 1, "grid needs at least one point");
    (0..count)
        .map(|i| {
            let t = if count == 1 {
                a
            } else {
                a + (b - a) * i as f64 / (count - 1) as f64
            };
            DVector::from_element(1, t)
        })
        .collect()
}

/// One solved point of the initial strip.
#[derive(Debug, Clone, PartialEq)]
pub struct StripSample {
    pub lambda: DVector<f64>,
    pub x0: DVector<f64>,
    pub z0: f64,
    pub p0: DVector<f64>,
    /// Columns d x_gamma / d lambda at this lambda.
    pub tangent: DMatrix<f64>,
    /// d (phi) / d lambda at this lambda.
    pub phi_grad: DVector<f64>,
}

/// The initial strip: first-order Cauchy data (x0, z0, p0) per grid point.
#[derive(Debug, Clone)]
pub struct InitialStrip {
    pub level: f64,
    pub tol: f64,
    pub samples: Vec<StripSample>,
}

impl InitialStrip {
    pub fn n(&self) -> usize {
        self.samples[0].x0.len()
    }
}

/// Solve for the strip momenta by damped Newton with lambda-continuation.
///
/// At each grid point the n unknowns p solve the level equation together
/// with the n-1 strip conditions. The first grid point starts from
/// `p_guess`; each subsequent point starts from its predecessor's solution,
/// which keeps the branch consistent along the grid.
pub fn solve_strip(
    h: &Hamiltonian,
    m: &InitialDataManifold,
    level: f64,
    p_guess: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<InitialStrip> {
    let n = m.n();
    if h.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: h.n(),
        });
    }
    if p_guess.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: p_guess.len(),
        });
    }
    if !(tol.is_finite() && tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidInput {
            reason: "strip tolerance must be positive and max_iter at least 1".into(),
        });
    }

    let mut samples = Vec::with_capacity(m.lambda_grid().len());
    let mut seed = p_guess.clone();
    for (idx, lambda) in m.lambda_grid().iter().enumerate() {
        let x0 = m.x_at(lambda)?;
        let z0 = m.phi_at(lambda);
        let tangent = m.tangent_at(lambda)?;
        let phi_grad = m.phi_grad_at(lambda)?;

        if n > 1 {
            let svd = tangent.clone().svd(false, false);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            if smin <= 1e-10 * smax.max(1.0) {
                return Err(Error::DegeneratePoint {
                    reason: format!(
                        "tangent columns are linearly dependent at lambda index {idx}"
                    ),
                });
            }
        }

        let residual = |p: &DVector<f64>| -> DVector<f64> {
            let mut r = DVector::zeros(n);
            r[0] = h.eval_parts(&x0, p, z0) - level;
            let strip = tangent.transpose() * p - &phi_grad;
            for j in 0..n - 1 {
                r[1 + j] = strip[j];
            }
            r
        };

        let mut p = seed.clone();
        let mut r = residual(&p);
        let mut converged = r.amax() <= tol;
        let mut iter = 0;
        while !converged && iter < max_iter {
            let grad = h.grad_y(&JetPoint::new(x0.clone(), p.clone(), z0)?);
            let mut jac = DMatrix::zeros(n, n);
            for j in 0..n {
                jac[(0, j)] = grad[j];
            }
            jac.view_mut((1, 0), (n - 1, n))
                .copy_from(&tangent.transpose());
            let lu = jac.lu();
            let Some(step) = lu.solve(&(-&r)) else {
                return Err(Error::NoStripSolution {
                    lambda_index: idx,
                    reason: "Newton matrix is singular".into(),
                });
            };

            // Damping: halve until the residual norm decreases.
            let r_norm = r.norm();
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let trial = &p + &step * alpha;
                let r_trial = residual(&trial);
                if r_trial.iter().all(|v| v.is_finite()) && r_trial.norm() < r_norm {
                    p = trial;
                    r = r_trial;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                return Err(Error::NoStripSolution {
                    lambda_index: idx,
                    reason: format!(
                        "Newton stalled at residual {:.3e}; the level may be unreachable from \
                         this Cauchy data",
                        r.amax()
                    ),
                });
            }
            converged = r.amax() <= tol;
            iter += 1;
        }
        if !converged {
            return Err(Error::NewtonNonConvergence {
                lambda_index: idx,
                residual: r.amax(),
                iterations: max_iter,
            });
        }

        seed = p.clone();
        samples.push(StripSample {
            lambda: lambda.clone(),
            x0,
            z0,
            p0: p,
            tangent,
            phi_grad,
        });
    }

    Ok(InitialStrip {
        level,
        tol,
        samples,
    })
}

/// Scale against which a determinant is judged small: the largest column
/// norm raised to the matrix dimension. (The product of column norms would
/// vanish together with a degenerating column and mask exactly the
/// singularity being tested for.)
fn det_scale(m: &DMatrix<f64>) -> f64 {
    let mut largest: f64 = 0.0;
    for j in 0..m.ncols() {
        largest = largest.max(m.column(j).norm());
    }
    largest.powi(m.ncols() as i32)
}

fn noncharacteristic_det(
    h: &Hamiltonian,
    sample: &StripSample,
    tangent: &DMatrix<f64>,
) -> Result<(f64, f64)> {
    let n = sample.x0.len();
    let p = JetPoint::new(sample.x0.clone(), sample.p0.clone(), sample.z0)?;
    let dx = h.grad_y(&p);
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n - 1 {
        m.set_column(j, &tangent.column(j).into_owned());
    }
    m.set_column(n - 1, &dx);
    Ok((m.determinant(), det_scale(&m)))
}

/// Transversality test: at each lambda, the determinant of
/// [tangent columns | characteristic dx] measured against the column scales.
pub fn is_noncharacteristic(
    h: &Hamiltonian,
    strip: &InitialStrip,
    m: &InitialDataManifold,
    tol: f64,
) -> Result<Vec<bool>> {
    if m.n() != strip.n() {
        return Err(Error::DimensionMismatch {
            expected: strip.n(),
            got: m.n(),
        });
    }
    let mut out = Vec::with_capacity(strip.samples.len());
    for sample in &strip.samples {
        let tangent = m.tangent_at(&sample.lambda)?;
        let (det, scale) = noncharacteristic_det(h, sample, &tangent)?;
        out.push(det.abs() > tol * scale.max(f64::MIN_POSITIVE));
    }
    Ok(out)
}

/// What `propagate` does at a strip point that fails the
/// non-characteristic test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharacteristicPolicy {
    /// Abort with [`Error::CharacteristicPoint`].
    Error,
    /// Drop the point, recording its index in the sheet.
    Skip,
}

/// One node of a solution sheet.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetNode {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: f64,
    pub h: f64,
}

/// The characteristic flow-out of an initial strip on a common (s, lambda)
/// grid. `rows[i][j]` is the node at lambda index i, parameter s_values[j].
#[derive(Debug, Clone)]
pub struct SolutionSheet {
    pub level: f64,
    pub s_values: Vec<f64>,
    pub lambdas: Vec<DVector<f64>>,
    pub rows: Vec<Vec<SheetNode>>,
    /// Indices into the original strip that were skipped as characteristic.
    pub skipped_lambda_indices: Vec<usize>,
}

impl SolutionSheet {
    pub fn n(&self) -> usize {
        self.rows[0][0].x.len()
    }

    /// Serialize as CSV with columns s, lambda1.., x1..xn, z, y1..yn, h;
    /// rows grouped by lambda, then ordered by s.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let n_lambda = if self.lambdas.is_empty() {
            0
        } else {
            self.lambdas[0].len()
        };
        let mut buf = String::new();
        let mut header = vec!["s".to_string()];
        header.extend(csv::indexed_labels("lambda", n_lambda));
        header.extend(csv::indexed_labels("x", n));
        header.push("z".to_string());
        header.extend(csv::indexed_labels("y", n));
        header.push("h".to_string());
        csv::push_row(&mut buf, header);
        for (i, row) in self.rows.iter().enumerate() {
            for (j, node) in row.iter().enumerate() {
                let mut fields = vec![csv::float(self.s_values[j])];
                fields.extend(self.lambdas[i].iter().map(|v| csv::float(*v)));
                fields.extend(node.x.iter().map(|v| csv::float(*v)));
                fields.push(csv::float(node.z));
                fields.extend(node.y.iter().map(|v| csv::float(*v)));
                fields.push(csv::float(node.h));
                csv::push_row(&mut buf, fields);
            }
        }
        buf
    }
}

/// Flow the strip along the characteristic field of h over s_span.
///
/// Each strip point seeds one characteristic trajectory with initial
/// z = z0 and y = p0; all trajectories share the s-grid, and the first
/// sheet column reproduces the strip exactly.
pub fn propagate(
    h: &Hamiltonian,
    strip: &InitialStrip,
    s_span: (f64, f64),
    cfg: &IntegratorConfig,
    policy: CharacteristicPolicy,
) -> Result<SolutionSheet> {
    let n = strip.n();
    if h.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: h.n(),
        });
    }
    let mut lambdas = Vec::new();
    let mut rows: Vec<Vec<SheetNode>> = Vec::new();
    let mut skipped = Vec::new();
    let mut s_values: Option<Vec<f64>> = None;

    for (idx, sample) in strip.samples.iter().enumerate() {
        let (det, scale) = noncharacteristic_det(h, sample, &sample.tangent)?;
        if det.abs() <= NONCHARACTERISTIC_DET_TOL * scale.max(f64::MIN_POSITIVE) {
            match policy {
                CharacteristicPolicy::Error => {
                    return Err(Error::CharacteristicPoint { lambda_index: idx })
                }
                CharacteristicPolicy::Skip => {
                    skipped.push(idx);
                    continue;
                }
            }
        }
        let p0 = JetPoint::new(sample.x0.clone(), sample.p0.clone(), sample.z0)?;
        let tr: Trajectory = integrate(&JetFieldSpec::Characteristic(h), &p0, s_span, cfg)?;
        let row: Vec<SheetNode> = tr
            .points
            .iter()
            .zip(tr.h_values.iter())
            .map(|(p, h_val)| SheetNode {
                x: p.x.clone(),
                y: p.y.clone(),
                z: p.z,
                h: *h_val,
            })
            .collect();
        if let Some(ref s) = s_values {
            debug_assert_eq!(s.len(), tr.s_values.len());
        } else {
            s_values = Some(tr.s_values);
        }
        lambdas.push(sample.lambda.clone());
        rows.push(row);
    }

    let Some(s_values) = s_values else {
        return Err(Error::InvalidInput {
            reason: "every strip point was characteristic; nothing to propagate".into(),
        });
    };
    Ok(SolutionSheet {
        level: strip.level,
        s_values,
        lambdas,
        rows,
        skipped_lambda_indices: skipped,
    })
}

/// Residual diagnostics for a sheet.
#[derive(Debug, Clone)]
pub struct SheetResidualReport {
    /// max |h(x, y) - level| over all nodes.
    pub max_level_residual: f64,
    /// max over unflagged nodes of |finite-difference grad z - stored y|,
    /// or None where the check does not apply (flat lambda listings with
    /// n > 2, grids too small to difference, or every node folded).
    pub max_graph_defect: Option<f64>,
    /// Per-node fold flags, same layout as `SolutionSheet::rows`.
    pub fold_flags: Vec<Vec<bool>>,
    /// Number of flagged nodes.
    pub fold_count: usize,
}

fn stencil(i: usize, len: usize) -> (usize, usize) {
    if i == 0 {
        (0, 1)
    } else if i == len - 1 {
        (len - 2, len - 1)
    } else {
        (i - 1, i + 1)
    }
}

/// Evaluate |h - level| at every node, flag folds of the (s, lambda) -> x
/// map, and, where the sheet is an unfolded graph, compare the stored y
/// against a least-squares finite-difference estimate of grad z.
///
/// The fold test and graph estimate difference along the s-grid and (for
/// n = 2) the scalar lambda listing; for n > 2 the flat lambda listing has
/// no grid structure, so those diagnostics are reported as not applicable.
pub fn residual_on_sheet(
    h: &Hamiltonian,
    sheet: &SolutionSheet,
    level: f64,
) -> Result<SheetResidualReport> {
    let n = sheet.n();
    if h.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: h.n(),
        });
    }
    let n_lambda = sheet.rows.len();
    let n_s = sheet.s_values.len();

    let mut max_level_residual: f64 = 0.0;
    for row in &sheet.rows {
        for node in row {
            let p = JetPoint::new(node.x.clone(), node.y.clone(), node.z)?;
            max_level_residual = max_level_residual.max((h.eval(&p) - level).abs());
        }
    }

    let mut fold_flags = vec![vec![false; n_s]; n_lambda];
    let gridded = n == 1 || (n == 2 && n_lambda >= 2);
    if !gridded || n_s < 2 {
        return Ok(SheetResidualReport {
            max_level_residual,
            max_graph_defect: None,
            fold_flags,
            fold_count: 0,
        });
    }

    let mut fold_count = 0;
    let mut max_defect: f64 = 0.0;
    let mut defect_nodes = 0usize;
    for i in 0..n_lambda {
        for j in 0..n_s {
            // d/ds by differencing along the row.
            let (jm, jp) = stencil(j, n_s);
            let ds = sheet.s_values[jp] - sheet.s_values[jm];
            let dxds = (&sheet.rows[i][jp].x - &sheet.rows[i][jm].x) / ds;
            let dzds = (sheet.rows[i][jp].z - sheet.rows[i][jm].z) / ds;

            let mut jac = DMatrix::zeros(n, n);
            jac.set_column(0, &dxds);
            let mut rhs = DVector::zeros(n);
            rhs[0] = dzds;

            if n == 2 {
                let (im, ip) = stencil(i, n_lambda);
                let dl = sheet.lambdas[ip][0] - sheet.lambdas[im][0];
                if dl == 0.0 {
                    return Err(Error::InvalidInput {
                        reason: "lambda listing has repeated values; cannot difference".into(),
                    });
                }
                let dxdl = (&sheet.rows[ip][j].x - &sheet.rows[im][j].x) / dl;
                let dzdl = (sheet.rows[ip][j].z - sheet.rows[im][j].z) / dl;
                jac.set_column(1, &dxdl);
                rhs[1] = dzdl;
            }

            let scale = det_scale(&jac);
            let det = jac.determinant();
            if det.abs() <= FOLD_DET_TOL * scale.max(f64::MIN_POSITIVE) {
                fold_flags[i][j] = true;
                fold_count += 1;
                continue;
            }

            // Solve jac^T grad = rhs for the finite-difference gradient of z
            // over x, and compare with the stored momentum.
            if let Some(grad) = jac.transpose().lu().solve(&rhs) {
                let defect = (grad - &sheet.rows[i][j].y).amax();
                max_defect = max_defect.max(defect);
                defect_nodes += 1;
            } else {
                fold_flags[i][j] = true;
                fold_count += 1;
            }
        }
    }

    Ok(SheetResidualReport {
        max_level_residual,
        max_graph_defect: if defect_nodes > 0 { Some(max_defect) } else { None },
        fold_flags,
        fold_count,
    })
}
