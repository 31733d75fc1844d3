//! Acceptance gate: one test per shipped guarantee, each printing a
//! [PASS] line with the measured extremes. Every tolerance is pinned here
//! as a named constant so a regression shows up as a hard failure, not a
//! silently loosened bound.

use charflow_core::applications::{
    hj_characteristics, layer_generator, trace_ray, LayeredMedium, MechanicalHamiltonian,
    RayEvent,
};
use charflow_core::cauchy::{
    propagate, residual_on_sheet, scalar_grid, solve_strip, CharacteristicPolicy,
    InitialDataManifold,
};
use charflow_core::flows::{
    conservation_report, flow_vs_exponential, integrate, IntegratorConfig, JetFieldSpec,
};
use charflow_core::jet_contact::{
    characteristic_field, characteristic_plane_basis, commutator, contact_form_at,
    d_contact_form_at, find_level_point, verify_coincidence, BracketScheme,
    CharacteristicField, ContactField, Hamiltonian, JetPoint, VectorField,
};
use charflow_core::odd_symplectic::{
    embed_generator, extended_symplectic_form, matrix_exponential, GeneratorU,
};
use charflow_core::quadratic::QuadraticPDE;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const COINCIDENCE_ON_LEVEL_TOL: f64 = 1e-10;
const COINCIDENCE_IDENTITY_TOL: f64 = 1e-12;
const BRACKET_EXACT_TOL: f64 = 1e-12;
const BRACKET_FD_RELATIVE_TOL: f64 = 1e-6;
const DENSITY_COMMUTING_TOL: f64 = 1e-10;
const DENSITY_NONCOMMUTING_FLOOR: f64 = 1e-4;
const ALGEBRA_TOL: f64 = 1e-12;
const GROUP_MEMBERSHIP_TOL: f64 = 1e-10;
const FIXED_VECTOR_TOL: f64 = 1e-14;
const CONVERGENCE_RATIO_RANGE: (f64, f64) = (12.0, 20.0);
const CONSERVATION_TOL: f64 = 1e-9;
const FLAT_FRONT_TOL: f64 = 1e-10;
const SHEET_LEVEL_TOL: f64 = 1e-8;
const ACTION_TOL: f64 = 1e-6;
const HJ_DRIFT_TOL: f64 = 1e-8;
const SNELL_TOL: f64 = 1e-10;
const TIR_LEVEL_TOL: f64 = 1e-12;
const LAYER_EXP_TOL: f64 = 1e-12;
const PLANE_FORM_TOL: f64 = 1e-12;
const PLANE_PAIRING_TOL: f64 = 1e-10;

fn eikonal(n: usize) -> Hamiltonian {
    Hamiltonian::analytic_z_independent(
        n,
        |_, y, _| 0.5 * y.dot(y) - 0.5,
        move |_, _, _| DVector::zeros(n),
        |_, y, _| y.clone(),
    )
}

fn transport2() -> Hamiltonian {
    Hamiltonian::analytic_z_independent(
        2,
        |_, y, _| y[0] + 2.0 * y[1] - 1.0,
        |_, _, _| DVector::zeros(2),
        |_, _, _| DVector::from_vec(vec![1.0, 2.0]),
    )
}

fn random_vec<R: Rng + ?Sized>(n: usize, rng: &mut R, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(lo..hi))
}

/// Criterion 1: the contact and characteristic fields coincide on the zero
/// level, and differ by exactly h in the z slot everywhere else.
#[test]
fn criterion_1_field_coincidence() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let quad = QuadraticPDE::random(2, &mut rng);
    let cases: Vec<(String, Hamiltonian)> = vec![
        ("eikonal n=1".into(), eikonal(1)),
        ("eikonal n=2".into(), eikonal(2)),
        ("eikonal n=3".into(), eikonal(3)),
        ("transport n=2".into(), transport2()),
        ("random quadratic n=2".into(), quad.hamiltonian()),
    ];

    let mut worst_on_level: f64 = 0.0;
    let mut worst_identity: f64 = 0.0;
    for (name, h) in &cases {
        let n = h.n();
        let mut found = 0;
        while found < 100 {
            let x = random_vec(n, &mut rng, -2.0, 2.0);
            let z = rng.random_range(-1.0..1.0);
            let y_dir = random_vec(n, &mut rng, -1.0, 1.0);
            if y_dir.norm() < 0.1 {
                continue;
            }
            let Ok(p) = find_level_point(h, &x, z, &y_dir, 0.0) else {
                continue;
            };
            let report = verify_coincidence(h, &p).unwrap();
            assert!(
                report.difference_norm <= COINCIDENCE_ON_LEVEL_TOL,
                "{name}: on-level difference {} at h = {}",
                report.difference_norm,
                report.h_value
            );
            worst_on_level = worst_on_level.max(report.difference_norm);
            found += 1;
        }
        for _ in 0..100 {
            let p = JetPoint::new(
                random_vec(n, &mut rng, -2.0, 2.0),
                random_vec(n, &mut rng, -2.0, 2.0),
                rng.random_range(-1.0..1.0),
            )
            .unwrap();
            let report = verify_coincidence(h, &p).unwrap();
            assert!(
                report.identity_residual <= COINCIDENCE_IDENTITY_TOL,
                "{name}: identity residual {}",
                report.identity_residual
            );
            worst_identity = worst_identity.max(report.identity_residual);
        }
    }
    println!(
        "[PASS] criterion 1: coincidence on-level max {worst_on_level:.2e} (tol {COINCIDENCE_ON_LEVEL_TOL:.0e}), identity max {worst_identity:.2e} (tol {COINCIDENCE_IDENTITY_TOL:.0e})"
    );
}

/// Criterion 2: the characteristic and contact fields commute for
/// z-independent h — exactly (affine Jacobians) on quadratics, by finite
/// differences on a non-polynomial Hamiltonian.
#[test]
fn criterion_2_field_commutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_exact: f64 = 0.0;
    for _ in 0..10 {
        let q = QuadraticPDE::random(2, &mut rng);
        let xc = q.characteristic_field();
        let xh = q.contact_field();
        for _ in 0..20 {
            let p = JetPoint::new(
                random_vec(2, &mut rng, -2.0, 2.0),
                random_vec(2, &mut rng, -2.0, 2.0),
                rng.random_range(-1.0..1.0),
            )
            .unwrap();
            let bracket = commutator(&xc, &xh, &p, BracketScheme::ExactAffine).unwrap();
            assert!(
                bracket.amax() <= BRACKET_EXACT_TOL,
                "exact bracket {}",
                bracket.amax()
            );
            worst_exact = worst_exact.max(bracket.amax());
        }
    }

    // Non-polynomial case: h = sin(x) y + y^2/2 - 1 with finite differences.
    let h = Hamiltonian::analytic_z_independent(
        1,
        |x, y, _| x[0].sin() * y[0] + 0.5 * y[0] * y[0] - 1.0,
        |x, y, _| DVector::from_element(1, x[0].cos() * y[0]),
        |x, y, _| DVector::from_element(1, x[0].sin() + y[0]),
    );
    let xc = CharacteristicField::new(&h);
    let xh = ContactField::new(&h);
    let mut worst_fd: f64 = 0.0;
    for _ in 0..50 {
        let p = JetPoint::new(
            random_vec(1, &mut rng, -2.0, 2.0),
            random_vec(1, &mut rng, -2.0, 2.0),
            rng.random_range(-1.0..1.0),
        )
        .unwrap();
        let bracket = commutator(&xc, &xh, &p, BracketScheme::FiniteDifference).unwrap();
        // Relative to the product of the field magnitudes, the natural
        // scale of a bracket of two first-order differencings.
        let scale = 1.0 + xc.value(&p).unwrap().amax() * xh.value(&p).unwrap().amax();
        let rel = bracket.amax() / scale;
        assert!(rel <= BRACKET_FD_RELATIVE_TOL, "fd bracket rel {rel}");
        worst_fd = worst_fd.max(rel);
    }
    println!(
        "[PASS] criterion 2: exact bracket max {worst_exact:.2e} (tol {BRACKET_EXACT_TOL:.0e}), finite-difference relative max {worst_fd:.2e} (tol {BRACKET_FD_RELATIVE_TOL:.0e})"
    );
}

/// Criterion 3: the commutation dichotomy — density identically zero when
/// a = b = 0, f = 0, and visibly nonzero otherwise.
#[test]
fn criterion_3_commutation_dichotomy() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_commuting: f64 = 0.0;
    for _ in 0..20 {
        let q = QuadraticPDE::random_commuting(2, &mut rng);
        assert!(q.commutation_condition());
        for _ in 0..100 {
            let x = random_vec(2, &mut rng, -2.0, 2.0);
            let y = random_vec(2, &mut rng, -2.0, 2.0);
            let d = q.commutator_density(&x, &y).abs();
            assert!(d <= DENSITY_COMMUTING_TOL, "commuting density {d}");
            worst_commuting = worst_commuting.max(d);
        }
    }

    let mut smallest_peak = f64::INFINITY;
    for _ in 0..20 {
        // Resample until the obstruction is visibly nonzero (a random
        // draw can be accidentally near-degenerate).
        let mut attempts = 0;
        loop {
            attempts += 1;
            let q = QuadraticPDE::random(2, &mut rng);
            if q.commutation_condition() {
                continue; // needs at least one of a, b, f nonzero
            }
            let mut peak: f64 = 0.0;
            for _ in 0..100 {
                let x = random_vec(2, &mut rng, -2.0, 2.0);
                let y = random_vec(2, &mut rng, -2.0, 2.0);
                peak = peak.max(q.commutator_density(&x, &y).abs());
            }
            if peak >= DENSITY_NONCOMMUTING_FLOOR {
                smallest_peak = smallest_peak.min(peak);
                break;
            }
            assert!(attempts < 100, "could not sample a non-degenerate PDE");
        }
    }
    println!(
        "[PASS] criterion 3: commuting density max {worst_commuting:.2e} (tol {DENSITY_COMMUTING_TOL:.0e}), non-commuting peak min {smallest_peak:.2e} (floor {DENSITY_NONCOMMUTING_FLOOR:.0e})"
    );
}

/// Criterion 4: random generators lie in the algebra of the extended form
/// and their exponentials in the group stabilizing e_z.
#[test]
fn criterion_4_algebra_and_group() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst_algebra: f64 = 0.0;
    let mut worst_fixed: f64 = 0.0;
    for i in 0..100 {
        let n = 1 + i % 3;
        let u = GeneratorU::random(n, 2.0, &mut rng);
        let m = embed_generator(&u);
        let omega = extended_symplectic_form(n);
        let algebra = (m.transpose() * omega.matrix() + omega.matrix() * &m).amax();
        assert!(algebra <= ALGEBRA_TOL, "algebra residual {algebra}");
        worst_algebra = worst_algebra.max(algebra);

        for s in [0.5, -0.5, 2.0, -2.0] {
            let g = matrix_exponential(&u, s);
            assert!(
                g.is_odd_symplectic(GROUP_MEMBERSHIP_TOL),
                "exp({s} U) leaves the group at n = {n}"
            );
            let dim = 2 * n + 2;
            let mut e_z = DVector::zeros(dim);
            e_z[dim - 1] = 1.0;
            let fixed = (g.matrix() * &e_z - &e_z).amax();
            assert!(fixed <= FIXED_VECTOR_TOL, "e_z moved by {fixed}");
            worst_fixed = worst_fixed.max(fixed);
        }
    }
    println!(
        "[PASS] criterion 4: algebra max {worst_algebra:.2e} (tol {ALGEBRA_TOL:.0e}), membership at {GROUP_MEMBERSHIP_TOL:.0e}, e_z fixed max {worst_fixed:.2e} (tol {FIXED_VECTOR_TOL:.0e})"
    );
}

/// Criterion 5: integrating the generator field converges to the matrix
/// exponential at fourth order in the step.
#[test]
fn criterion_5_exp_vs_flow_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut ratios = Vec::new();
    for i in 0..10 {
        let n = 1 + i % 2;
        let u = GeneratorU::random(n, 1.5, &mut rng);
        let w0 = random_vec(2 * n, &mut rng, -1.0, 1.0);
        let z0 = rng.random_range(-1.0..1.0);
        let coarse = flow_vs_exponential(
            &u,
            &w0,
            z0,
            1.0,
            &IntegratorConfig::new(1e-2, 1_000_000).unwrap(),
        )
        .unwrap();
        let fine = flow_vs_exponential(
            &u,
            &w0,
            z0,
            1.0,
            &IntegratorConfig::new(5e-3, 1_000_000).unwrap(),
        )
        .unwrap();
        let ratio = coarse / fine;
        assert!(
            ratio >= CONVERGENCE_RATIO_RANGE.0 && ratio <= CONVERGENCE_RATIO_RANGE.1,
            "step-halving ratio {ratio} outside {CONVERGENCE_RATIO_RANGE:?}"
        );
        ratios.push(ratio);
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
    println!(
        "[PASS] criterion 5: step-halving ratios in [{lo:.2}, {hi:.2}] (required {CONVERGENCE_RATIO_RANGE:?})"
    );
}

/// Criterion 6: h is conserved along its own contact flow.
#[test]
fn criterion_6_conservation() {
    let h = Hamiltonian::analytic_z_independent(
        1,
        |x, y, _| 0.5 * (x[0] * x[0] + y[0] * y[0]) - 1.0,
        |x, _, _| x.clone(),
        |_, y, _| y.clone(),
    );
    let p0 = JetPoint::from_slices(&[1.0], &[1.0], 0.0);
    let cfg = IntegratorConfig::new(1e-3, 10_000_000).unwrap();
    let tr = integrate(
        &JetFieldSpec::Contact(&h),
        &p0,
        (0.0, std::f64::consts::TAU),
        &cfg,
    )
    .unwrap();
    let drift = conservation_report(&tr);
    assert!(drift <= CONSERVATION_TOL, "conservation drift {drift}");
    println!(
        "[PASS] criterion 6: contact-flow drift {drift:.2e} over one period (tol {CONSERVATION_TOL:.0e})"
    );
}

/// Criterion 7: Cauchy propagation — the flat front reproduces z = x2, the
/// focusing circle keeps the level and flags its caustic.
#[test]
fn criterion_7_cauchy_fronts() {
    let h = eikonal(2);

    // Flat front along the x1-axis, unit normal data.
    let m = InitialDataManifold::analytic(
        2,
        scalar_grid(-1.0, 1.0, 21),
        |l| DVector::from_vec(vec![l[0], 0.0]),
        |_| DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        |_| 0.0,
        |_| DVector::zeros(1),
    )
    .unwrap();
    let strip = solve_strip(&h, &m, 0.0, &DVector::from_vec(vec![0.0, 1.0]), 1e-12, 50).unwrap();
    let cfg = IntegratorConfig::new(0.05, 100_000).unwrap();
    let sheet = propagate(&h, &strip, (0.0, 1.5), &cfg, CharacteristicPolicy::Error).unwrap();
    let mut worst_flat: f64 = 0.0;
    for row in &sheet.rows {
        for node in row {
            worst_flat = worst_flat.max((node.z - node.x[1]).abs());
        }
    }
    assert!(worst_flat <= FLAT_FRONT_TOL, "flat front defect {worst_flat}");

    // Unit circle focusing inward: caustic at the center, level held.
    let count = 32;
    let mc = InitialDataManifold::analytic(
        2,
        scalar_grid(
            0.0,
            std::f64::consts::TAU * (count as f64 - 1.0) / count as f64,
            count,
        ),
        |l| DVector::from_vec(vec![l[0].cos(), l[0].sin()]),
        |l| DMatrix::from_column_slice(2, 1, &[-l[0].sin(), l[0].cos()]),
        |_| 0.0,
        |_| DVector::zeros(1),
    )
    .unwrap();
    let strip_c = solve_strip(
        &h,
        &mc,
        0.0,
        &DVector::from_vec(vec![-1.0, -0.05]),
        1e-12,
        50,
    )
    .unwrap();
    let sheet_c = propagate(&h, &strip_c, (0.0, 2.0), &cfg, CharacteristicPolicy::Error).unwrap();
    let report = residual_on_sheet(&h, &sheet_c, 0.0).unwrap();
    assert!(
        report.max_level_residual <= SHEET_LEVEL_TOL,
        "level residual {}",
        report.max_level_residual
    );
    let j_focus = sheet_c
        .s_values
        .iter()
        .position(|&s| (s - 1.0).abs() < 1e-12)
        .expect("s = 1 on the grid");
    let all_flagged = (0..sheet_c.rows.len()).all(|i| report.fold_flags[i][j_focus]);
    assert!(all_flagged, "caustic at the center must be flagged");
    println!(
        "[PASS] criterion 7: flat-front max |z - x2| {worst_flat:.2e} (tol {FLAT_FRONT_TOL:.0e}); circular front level residual {:.2e} (tol {SHEET_LEVEL_TOL:.0e}), fold flagged at focus",
        report.max_level_residual
    );
}

/// Criterion 8: oscillator Hamilton-Jacobi action values and level drift.
#[test]
fn criterion_8_hamilton_jacobi_action() {
    let h = MechanicalHamiltonian::analytic(
        1,
        |q, p, _| 0.5 * (p[0] * p[0] + q[0] * q[0]),
        |q, _, _| q.clone(),
        |_, p, _| p.clone(),
        |_, _, _| 0.0,
    );
    let cfg = IntegratorConfig::new(1e-3, 10_000_000).unwrap();
    let q0 = DVector::from_element(1, 1.0);
    let p0 = DVector::zeros(1);

    let half = hj_characteristics(&h, &q0, &p0, (0.0, std::f64::consts::FRAC_PI_2), &cfg).unwrap();
    let quarter =
        hj_characteristics(&h, &q0, &p0, (0.0, std::f64::consts::FRAC_PI_4), &cfg).unwrap();
    let err_half = half.endpoint().z.abs();
    let err_quarter = (quarter.endpoint().z + 0.25).abs();
    assert!(err_half <= ACTION_TOL, "z(pi/2) error {err_half}");
    assert!(err_quarter <= ACTION_TOL, "z(pi/4) error {err_quarter}");
    let drift = conservation_report(&half).max(conservation_report(&quarter));
    assert!(drift <= HJ_DRIFT_TOL, "lifted level drift {drift}");
    println!(
        "[PASS] criterion 8: action errors z(pi/2) {err_half:.2e}, z(pi/4) {err_quarter:.2e} (tol {ACTION_TOL:.0e}); drift {drift:.2e} (tol {HJ_DRIFT_TOL:.0e})"
    );
}

/// Criterion 9: layered eikonal — Snell refraction, total internal
/// reflection on the level set, and the per-layer exponential cross-check.
#[test]
fn criterion_9_layered_eikonal() {
    let cfg = IntegratorConfig::default();

    // Snell: N = 1/2 then 2, tangential momentum 0.6.
    let med = LayeredMedium::stack(2, vec![1.0], vec![0.5, 2.0]).unwrap();
    let ray = trace_ray(
        &med,
        &DVector::from_vec(vec![0.0, 0.0]),
        &DVector::from_vec(vec![0.6, 0.8]),
        2.0,
        &cfg,
    )
    .unwrap();
    let snell_err = (ray.segments[1].entry.y[1] - 3.64f64.sqrt()).abs();
    assert!(snell_err <= SNELL_TOL, "Snell exit error {snell_err}");

    // TIR: the reflected ray stays on its layer's level set.
    let med_tir = LayeredMedium::stack(2, vec![1.0], vec![2.0, 0.1]).unwrap();
    let axis0 = (4.0f64 - 3.24).sqrt();
    let ray_tir = trace_ray(
        &med_tir,
        &DVector::from_vec(vec![0.0, 0.0]),
        &DVector::from_vec(vec![1.8, axis0]),
        3.0,
        &cfg,
    )
    .unwrap();
    assert_eq!(ray_tir.segments[0].event, RayEvent::TotalInternalReflection);
    let mut worst_level: f64 = 0.0;
    for seg in &ray_tir.segments {
        let y = &seg.entry.y;
        worst_level = worst_level.max((y.dot(y) - 4.0).abs());
    }
    assert!(worst_level <= TIR_LEVEL_TOL, "TIR level drift {worst_level}");

    // Per-layer straight flow against the layer generator's exponential,
    // on the (x, y) block (the generator's z row realizes the symmetry,
    // not the characteristic z rate).
    let mut worst_exp: f64 = 0.0;
    for (ray_ref, med_ref) in [(&ray, &med), (&ray_tir, &med_tir)] {
        for seg in &ray_ref.segments {
            let ds = seg.s_end - seg.s_start;
            let u = layer_generator(med_ref, seg.layer).unwrap();
            let g = matrix_exponential(&u, ds);
            let mut w = DVector::zeros(4);
            w.rows_mut(0, 2).copy_from(&seg.entry.x);
            w.rows_mut(2, 2).copy_from(&seg.entry.y);
            let (w_end, _) = g.apply_affine(&w, seg.entry.z).unwrap();
            let mut residual: f64 = 0.0;
            for i in 0..2 {
                // The segment exit keeps the pre-refraction momentum.
                residual = residual.max((w_end[i] - seg.exit.x[i]).abs());
                residual = residual.max((w_end[2 + i] - seg.entry.y[i]).abs());
            }
            assert!(residual <= LAYER_EXP_TOL, "exp cross-check {residual}");
            worst_exp = worst_exp.max(residual);
        }
    }
    println!(
        "[PASS] criterion 9: Snell error {snell_err:.2e} (tol {SNELL_TOL:.0e}), TIR level drift {worst_level:.2e} (tol {TIR_LEVEL_TOL:.0e}), exp cross-check max {worst_exp:.2e} (tol {LAYER_EXP_TOL:.0e})"
    );
}

/// Criterion 10: the characteristic plane has dimension 2n-1, is
/// annihilated by both defining forms, and is skew-orthogonal to the
/// characteristic direction.
#[test]
fn criterion_10_characteristic_planes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut worst_form: f64 = 0.0;
    let mut worst_pairing: f64 = 0.0;
    let mut built = 0;
    while built < 50 {
        let n = 1 + built % 3;
        let q = QuadraticPDE::random(n, &mut rng);
        let h = q.hamiltonian();
        let p = JetPoint::new(
            random_vec(n, &mut rng, -2.0, 2.0),
            random_vec(n, &mut rng, -2.0, 2.0),
            rng.random_range(-1.0..1.0),
        )
        .unwrap();
        let Ok(basis) = characteristic_plane_basis(&h, &p) else {
            continue; // degenerate draw; resample
        };
        assert_eq!(basis.len(), 2 * n - 1, "plane dimension at n = {n}");

        let grad_x = h.grad_x(&p);
        let grad_y = h.grad_y(&p);
        let grad_z = h.grad_z(&p);
        let xc = characteristic_field(&h, &p).unwrap();
        for v in &basis {
            let theta = contact_form_at(&p, v).abs();
            let dh = (grad_x.dot(&v.dx) + grad_y.dot(&v.dy) + grad_z * v.dz).abs();
            assert!(theta <= PLANE_FORM_TOL, "theta(V) = {theta}");
            assert!(dh <= PLANE_FORM_TOL, "dh(V) = {dh}");
            worst_form = worst_form.max(theta.max(dh));

            let pairing = d_contact_form_at(&p, &xc, v).abs();
            assert!(pairing <= PLANE_PAIRING_TOL, "dtheta(X_c, V) = {pairing}");
            worst_pairing = worst_pairing.max(pairing);
        }
        built += 1;
    }
    println!(
        "[PASS] criterion 10: 50 bases of dimension 2n-1; form residual max {worst_form:.2e} (tol {PLANE_FORM_TOL:.0e}), pairing max {worst_pairing:.2e} (tol {PLANE_PAIRING_TOL:.0e})"
    );
}
