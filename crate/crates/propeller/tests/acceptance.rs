//! End-to-end acceptance gate. Each test pins one requirement of the
//! laboratory, prints a single PASS/FAIL line, and asserts it. The heavy
//! reference flow (default parameters, converged or 100k-step cap) runs once
//! and is shared by every test that needs it.

use propeller::analysis::{
    check_courant_lebesgue, containment, courant_lebesgue_bound, find_equator_points,
    harmonic_residual, map_degree,
};
use propeller::flow::{
    detect_bubble, dissipation, max_tension_norm, run_flow, tension_field, FlowConfig, FlowReport,
};
use propeller::geometry::{
    build_surface, icosphere, CotanLaplacian, SpherePoint, SurfaceMesh, SurfaceParams, Vec3,
};
use propeller::initmap::{
    build_u0, check_equivariance, dirichlet_energy_with, energy_bound, MapField,
};
use propeller::io::write_history_csv;
use propeller::region::{
    antipodal_obstruction_check, check_sweepout_separation, great_circle_obstruction_check,
    PropellerRegion,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

const SEED: u64 = 42;
const EPSILON: f64 = 0.05;
const TENSION_TOL: f64 = 1e-4;
const EQUIVARIANCE_TOL: f64 = 1e-9;
const DEGREE_RESIDUAL_TOL: f64 = 0.05;
const EQUATOR_TOL: f64 = 1e-6;
const ENERGY_BUDGET_FRACTION: f64 = 1e-8;
const BUBBLE_ENERGY_CAP: f64 = 4.0 * PI / 100.0;
const MAX_FLOW_SECONDS: f64 = 1800.0;
const MAX_REGION_CHECK_SECONDS: f64 = 60.0;
const MAX_BUILD_SECONDS: f64 = 1.0;

struct Reference {
    params: SurfaceParams,
    mesh: Arc<SurfaceMesh>,
    lap: CotanLaplacian,
    u0: MapField,
    region: PropellerRegion,
    report: FlowReport,
    build_seconds: f64,
    flow_seconds: f64,
}

static REFERENCE: OnceLock<Reference> = OnceLock::new();

fn reference() -> &'static Reference {
    REFERENCE.get_or_init(|| {
        let params = SurfaceParams::default();
        let build_start = Instant::now();
        let mesh = Arc::new(build_surface(&params).expect("reference surface"));
        let build_seconds = build_start.elapsed().as_secs_f64();
        let lap = CotanLaplacian::new(&mesh);
        let u0 = build_u0(&mesh, &params).expect("reference initial map");
        let region = PropellerRegion::standard(EPSILON).expect("reference region");
        let flow_start = Instant::now();
        let report = run_flow(&u0, &FlowConfig::default(), &region).expect("reference flow");
        let flow_seconds = flow_start.elapsed().as_secs_f64();
        Reference { params, mesh, lap, u0, region, report, build_seconds, flow_seconds }
    })
}

/// Prints the one-line verdict for a criterion, then enforces it.
fn verdict(number: u32, name: &str, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {number:02} {tag} {name}: {detail}");
    assert!(pass, "acceptance {number:02} {name}: {detail}");
}

fn edge_face_incidence_is_two(mesh: &SurfaceMesh) -> bool {
    let mut count: HashMap<(usize, usize), u32> = HashMap::new();
    for f in &mesh.faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    count.values().all(|&c| c == 2)
}

#[test]
fn criterion_01_surface_topology() {
    let r = reference();
    let p2 = SurfaceParams { half_genus: 2, ..SurfaceParams::default() };
    let p2_start = Instant::now();
    let mesh_p2 = build_surface(&p2).expect("five-tube surface");
    let p2_seconds = p2_start.elapsed().as_secs_f64();

    let chi1 = r.mesh.euler_characteristic();
    let chi2 = mesh_p2.euler_characteristic();
    let closed = edge_face_incidence_is_two(&r.mesh) && edge_face_incidence_is_two(&mesh_p2);
    let fast = r.build_seconds < MAX_BUILD_SECONDS && p2_seconds < MAX_BUILD_SECONDS;
    verdict(
        1,
        "surface-topology",
        chi1 == -2 && chi2 == -6 && closed && fast,
        format!(
            "chi = {chi1} (3 tubes) and {chi2} (5 tubes), closed: {closed}, \
             built in {:.3}s and {p2_seconds:.3}s",
            r.build_seconds
        ),
    );
}

#[test]
fn criterion_02_initial_energy_bound() {
    let r = reference();
    let e_med = dirichlet_energy_with(&r.lap, &r.u0);
    let bound = energy_bound(&r.params);

    let high = SurfaceParams { resolution: 3, ..r.params };
    let mesh_high = Arc::new(build_surface(&high).expect("high-resolution surface"));
    let u0_high = build_u0(&mesh_high, &high).expect("high-resolution initial map");
    let e_high = dirichlet_energy_with(&CotanLaplacian::new(&mesh_high), &u0_high);

    let med_ok = e_med > 0.0 && e_med <= 1.5 * bound;
    let high_ok = e_high / bound <= 1.1;
    verdict(
        2,
        "initial-energy-bound",
        med_ok && high_ok,
        format!(
            "analytic bound {bound:.6}; E(u0) medium {e_med:.6} (ratio {:.2}), \
             high {e_high:.6} (ratio {:.2})",
            e_med / bound,
            e_high / bound
        ),
    );
}

#[test]
fn criterion_03_energy_below_bubble_scale() {
    let r = reference();
    let e0 = r.report.initial_energy;
    let alarms = detect_bubble(&r.report.history, &FlowConfig::default());
    verdict(
        3,
        "energy-below-bubble-scale",
        e0 < BUBBLE_ENERGY_CAP && alarms.is_empty(),
        format!(
            "E(u0) = {e0:.6} vs threshold {BUBBLE_ENERGY_CAP:.6}; {} bubble alarms",
            alarms.len()
        ),
    );
}

#[test]
fn criterion_04_energy_monotone_run() {
    let r = reference();
    let budget = ENERGY_BUDGET_FRACTION * r.report.initial_energy;
    let worst_rise = r
        .report
        .history
        .windows(2)
        .map(|w| w[1].energy - w[0].energy)
        .fold(f64::NEG_INFINITY, f64::max);
    let within_budget = worst_rise <= budget;
    let monotone = worst_rise <= 0.0;
    let in_cap = r.report.steps_taken <= 100_000;
    let in_time = r.flow_seconds < MAX_FLOW_SECONDS;
    verdict(
        4,
        "energy-monotone-run",
        within_budget && monotone && in_cap && in_time,
        format!(
            "largest step change {worst_rise:+.3e} (budget {budget:.3e}), \
             {} steps in {:.0}s",
            r.report.steps_taken, r.flow_seconds
        ),
    );
}

#[test]
fn criterion_05_convergence_to_harmonic() {
    let r = reference();
    let last = r.report.history.last().expect("history");
    let residual = harmonic_residual(&r.lap, &r.report.final_field);
    verdict(
        5,
        "convergence-to-harmonic",
        r.report.converged && last.max_tension < TENSION_TOL && residual < TENSION_TOL,
        format!(
            "converged: {}, final max tension {:.3e}, harmonic residual {residual:.3e}, \
             tolerance {TENSION_TOL:.1e}",
            r.report.converged, last.max_tension
        ),
    );
}

#[test]
fn criterion_06_equivariance_preserved() {
    let r = reference();
    let mut worst = check_equivariance(&r.u0).max(check_equivariance(&r.report.final_field));
    for snap in &r.report.snapshots {
        worst = worst.max(check_equivariance(&snap.field));
    }
    verdict(
        6,
        "equivariance-preserved",
        r.report.symmetry_ok && worst < EQUIVARIANCE_TOL,
        format!(
            "worst drift {worst:.3e} over {} snapshots, tolerance {EQUIVARIANCE_TOL:.1e}",
            r.report.snapshots.len()
        ),
    );
}

#[test]
fn criterion_07_degree_zero() {
    let r = reference();
    let d0 = map_degree(&r.u0).expect("degree of the initial map");
    let df = map_degree(&r.report.final_field).expect("degree of the final map");
    verdict(
        7,
        "degree-zero",
        d0.degree == 0
            && df.degree == 0
            && d0.residual < DEGREE_RESIDUAL_TOL
            && df.residual < DEGREE_RESIDUAL_TOL,
        format!(
            "degree {} -> {} with residuals {:.2e} and {:.2e} (tolerance {DEGREE_RESIDUAL_TOL})",
            d0.degree, df.degree, d0.residual, df.residual
        ),
    );
}

#[test]
fn criterion_08_containment_and_equator_orbit() {
    let r = reference();
    let cont = containment(&r.report.final_field, &r.region);
    let eq = find_equator_points(&r.report.final_field, EQUATOR_TOL);
    let (pass, detail) = match &eq {
        Ok(eq) => (
            cont.min_margin > 0.0 && eq.points.len() == 3 && eq.max_cycle_error < EQUATOR_TOL,
            format!(
                "min margin {:.4}, {} equator points, |x3| <= {:.1e}, cycle gap {:.1e}",
                cont.min_margin,
                eq.points.len(),
                eq.max_z,
                eq.max_cycle_error
            ),
        ),
        Err(e) => (false, format!("equator points: {e}")),
    };
    verdict(8, "containment-and-equator-orbit", pass, detail);
}

#[test]
fn criterion_09_courant_lebesgue() {
    let r = reference();
    let formula = courant_lebesgue_bound(1.0 / (8.0 * PI), (-1.0f64).exp()).expect("bound");
    let formula_ok = (formula - 1.0).abs() <= 1e-12;

    let delta = r.params.tube_radius * r.params.tube_radius;
    let eq = find_equator_points(&r.report.final_field, EQUATOR_TOL).expect("equator points");
    let mut all_pass = true;
    let mut detail = format!("closed-form bound at (1/8pi, 1/e) = {formula:.15}");
    for (i, &(v, _)) in eq.points.iter().enumerate() {
        let rep = check_courant_lebesgue(&r.lap, &r.report.final_field, v, delta)
            .expect("annulus check");
        all_pass &= rep.pass;
        detail.push_str(&format!(
            "; p{}: diameter {:.3e} vs bound {:.3e} ({} annuli)",
            i + 1,
            rep.diameter,
            rep.bound,
            rep.annuli_scored
        ));
    }
    verdict(9, "courant-lebesgue", formula_ok && all_pass, detail);
}

#[test]
fn criterion_10_region_obstructions() {
    let region = PropellerRegion::standard(EPSILON).expect("region");
    let anti_start = Instant::now();
    let anti = antipodal_obstruction_check(&region, 10_000, SEED).expect("antipodal check");
    let anti_seconds = anti_start.elapsed().as_secs_f64();
    let circ_start = Instant::now();
    let circ = great_circle_obstruction_check(&region, 10_000, 1e-3, SEED).expect("circle check");
    let circ_seconds = circ_start.elapsed().as_secs_f64();
    verdict(
        10,
        "region-obstructions",
        anti.pass
            && circ.pass
            && anti_seconds < MAX_REGION_CHECK_SECONDS
            && circ_seconds < MAX_REGION_CHECK_SECONDS,
        format!(
            "antipodal: {} witnesses in {anti_seconds:.1}s; great circles: deepest entry \
             {:.4} in {circ_seconds:.1}s",
            anti.witnesses.len(),
            circ.min_violation_distance
        ),
    );
}

#[test]
fn criterion_11_sweepout_separation() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let equator = |lon: f64| {
        let (s, c) = lon.sin_cos();
        SpherePoint::project(Vec3::new(c, s, 0.0)).expect("equator point")
    };

    let arc: Vec<SpherePoint> = (0..12).map(|i| equator(PI / 2.0 * i as f64 / 11.0)).collect();
    let arc_radii = vec![0.2; arc.len()];
    let arc_samples = sample_tube(&arc, &arc_radii, 6_000, &mut rng);
    let open = check_sweepout_separation(&arc_samples, &arc, &arc_radii).expect("open arc");

    let circle: Vec<SpherePoint> = (0..44).map(|i| equator(2.0 * PI * i as f64 / 44.0)).collect();
    let circle_radii = vec![0.2; circle.len()];
    let circle_samples = sample_tube(&circle, &circle_radii, 8_000, &mut rng);
    let closed =
        check_sweepout_separation(&circle_samples, &circle, &circle_radii).expect("closed circle");

    verdict(
        11,
        "sweepout-separation",
        open.pass && !closed.pass,
        format!(
            "open quarter circle separates: {}; closed circle separates: {} \
             (failing index {:?})",
            open.pass, closed.pass, closed.failing_index
        ),
    );
}

fn sample_tube(
    curve: &[SpherePoint],
    radii: &[f64],
    target: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<SpherePoint> {
    let mut out = Vec::with_capacity(target);
    while out.len() < target {
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi: f64 = rng.gen_range(0.0..2.0 * PI);
        let s = (1.0 - z * z).sqrt();
        let p = SpherePoint::project(Vec3::new(s * phi.cos(), s * phi.sin(), z)).expect("unit");
        if curve.iter().zip(radii).any(|(&c, &r)| p.geodesic_distance(c) <= r) {
            out.push(p);
        }
    }
    out
}

#[test]
fn criterion_12_discretization_consistency() {
    // identity map on the round sphere: its tension is purely normal in the
    // continuum, so the tangential residual must shrink under refinement
    let mut residuals = Vec::new();
    for level in [2, 3, 4] {
        let mesh = Arc::new(icosphere(level));
        let values: Vec<SpherePoint> = mesh
            .vertices
            .iter()
            .map(|&v| SpherePoint::project(v).expect("unit vertex"))
            .collect();
        let field = MapField::new(Arc::clone(&mesh), values).expect("identity field");
        let lap = CotanLaplacian::new(&mesh);
        residuals.push(max_tension_norm(&tension_field(&lap, &field)));
    }
    let decays = residuals.windows(2).all(|w| w[1] < 0.6 * w[0]);
    let residual_list =
        residuals.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>().join(", ");

    // moving along the tension field must lose energy at the dissipation rate
    let r = reference();
    let tau = tension_field(&r.lap, &r.u0);
    let rate = dissipation(&r.lap, &tau);
    let h = 1e-5;
    let probe = |s: f64| {
        let values: Vec<SpherePoint> = r
            .u0
            .values
            .iter()
            .zip(&tau)
            .map(|(&u, &t)| SpherePoint::project(u.vec() + t.scale(s)).expect("perturbed"))
            .collect();
        let field = MapField::new(Arc::clone(&r.mesh), values).expect("perturbed field");
        dirichlet_energy_with(&r.lap, &field)
    };
    let fd = (probe(h) - probe(-h)) / (2.0 * h);
    let rel = (fd + rate).abs() / rate.max(f64::MIN_POSITIVE);

    verdict(
        12,
        "discretization-consistency",
        decays && rel < 1e-5,
        format!(
            "identity tension residuals [{residual_list}] across refinement; \
             energy slope {fd:.6e} vs -dissipation {:.6e} (rel err {rel:.2e})",
            -rate
        ),
    );
}

#[test]
fn criterion_13_deterministic_logs() {
    let run_once = || {
        let params = SurfaceParams { resolution: 1, ..SurfaceParams::default() };
        let mesh = Arc::new(build_surface(&params).expect("surface"));
        let u0 = build_u0(&mesh, &params).expect("initial map");
        let region = PropellerRegion::standard(EPSILON).expect("region");
        let config = FlowConfig {
            max_steps: 500,
            snapshot_every: 250,
            deterministic_reduction: true,
            ..FlowConfig::default()
        };
        run_flow(&u0, &config, &region).expect("flow")
    };
    let a = run_once();
    let b = run_once();

    let dir = tempfile::tempdir().expect("tempdir");
    let path_a = dir.path().join("a.csv");
    let path_b = dir.path().join("b.csv");
    write_history_csv(&path_a, &a.history).expect("log a");
    write_history_csv(&path_b, &b.history).expect("log b");
    let bytes_a = std::fs::read(&path_a).expect("read a");
    let bytes_b = std::fs::read(&path_b).expect("read b");

    verdict(
        13,
        "deterministic-logs",
        a.history == b.history && bytes_a == bytes_b,
        format!(
            "two identical runs: {} log rows, byte-identical: {}",
            a.history.len(),
            bytes_a == bytes_b
        ),
    );
}
