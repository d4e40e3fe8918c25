//! One full laboratory run: target-region obstruction checks, surface and
//! initial map construction, the heat flow, post-flow analysis, and the
//! artifact tree (mesh.obj, u0.vtk, snapshots/, flow_log.csv,
//! checkpoint.json, analysis_report.txt, summary.txt).

use crate::analysis::{
    check_courant_lebesgue, containment, find_equator_points, harmonic_residual, map_degree,
};
use crate::config::{CheckSelection, ConfigError, RunConfig};
use crate::flow::{run_flow, FlowError, FlowReport};
use crate::geometry::{build_surface, CotanLaplacian, MeshError, SpherePoint, Vec3};
use crate::initmap::{build_u0, dirichlet_energy_with, energy_bound, InitError, MapField};
use crate::io::{save_checkpoint, write_history_csv, write_obj, write_vtk, Checkpoint, IoError};
use crate::io::CHECKPOINT_VERSION;
use crate::region::{
    antipodal_obstruction_check, check_sweepout_separation, great_circle_obstruction_check,
    PropellerRegion, RegionError,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("surface construction failed: {0}")]
    Mesh(#[from] MeshError),
    #[error("initial map construction failed: {0}")]
    Init(#[from] InitError),
    #[error("heat flow failed: {0}")]
    Flow(#[from] FlowError),
    #[error("region check could not run: {0}")]
    Region(#[from] RegionError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// One named verification with its verdict and a one-line explanation.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn outcome(name: &'static str, pass: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, pass, detail }
}

#[derive(Debug, Default)]
pub struct RunSummary {
    pub outcomes: Vec<CheckOutcome>,
    /// Key = value pairs mirrored into summary.txt, in write order.
    pub quantities: Vec<(String, String)>,
}

impl RunSummary {
    pub fn all_pass(&self) -> bool {
        self.outcomes.iter().all(|c| c.pass)
    }

    fn record<T: std::fmt::Display>(&mut self, key: &str, value: T) {
        self.quantities.push((key.to_string(), value.to_string()));
    }
}

const ANTIPODAL_SAMPLES: usize = 10_000;
const GREAT_CIRCLES: usize = 10_000;
const CIRCLE_TRACE_STEP: f64 = 1e-3;
const EQUATOR_TOL: f64 = 1e-6;
const DEGREE_RESIDUAL_TOL: f64 = 0.05;

/// Obstruction checks on the target region alone: alternation of the removed
/// arcs (every kept point has a forbidden antipode) and the great-circle
/// sweep (every great circle meets the forbidden set).
pub fn region_outcomes(
    region: &PropellerRegion,
    seed: u64,
) -> Result<Vec<CheckOutcome>, RunError> {
    let anti = antipodal_obstruction_check(region, ANTIPODAL_SAMPLES, seed)?;
    let circ = great_circle_obstruction_check(region, GREAT_CIRCLES, CIRCLE_TRACE_STEP, seed)?;
    Ok(vec![
        outcome(
            "region-antipodal",
            anti.pass,
            format!(
                "{} kept-arc samples, {} with an escaping antipode",
                ANTIPODAL_SAMPLES,
                anti.witnesses.len()
            ),
        ),
        outcome(
            "region-great-circle",
            circ.pass,
            format!(
                "{} circles traced at step {}, deepest forbidden-set entry {:.4}",
                GREAT_CIRCLES, CIRCLE_TRACE_STEP, circ.min_violation_distance
            ),
        ),
    ])
}

/// Paired control for the sweep-out separation check: removing a ball
/// from a quarter-great-circle tube must disconnect its ends, and the same
/// operation on a closed great-circle tube must not.
pub fn sweepout_outcome(seed: u64) -> Result<CheckOutcome, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let equator = |lon: f64| {
        let (s, c) = lon.sin_cos();
        SpherePoint::project(Vec3::new(c, s, 0.0)).expect("unit")
    };

    // curve spacing about 0.14: each ball removal cuts a gap much wider than
    // the knn neighbor radius while the end caps stay thick and connected
    let arc: Vec<SpherePoint> =
        (0..12).map(|i| equator(PI / 2.0 * i as f64 / 11.0)).collect();
    let arc_radii = vec![0.2; arc.len()];
    let arc_samples = sample_tube(&arc, &arc_radii, 6_000, &mut rng);
    let open = check_sweepout_separation(&arc_samples, &arc, &arc_radii)?;

    let circle: Vec<SpherePoint> =
        (0..44).map(|i| equator(2.0 * PI * i as f64 / 44.0)).collect();
    let circle_radii = vec![0.2; circle.len()];
    let circle_samples = sample_tube(&circle, &circle_radii, 8_000, &mut rng);
    let closed = check_sweepout_separation(&circle_samples, &circle, &circle_radii)?;

    Ok(outcome(
        "sweepout-separation",
        open.pass && !closed.pass,
        format!(
            "open arc separates: {}; closed circle separates: {} (must not)",
            open.pass, closed.pass
        ),
    ))
}

/// Rejection-samples points covering the union of balls around the curve.
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

/// Executes the run described by `config` and writes the artifact tree into
/// `config.out`. Check failures are reported in the summary, not as errors;
/// `Err` means the run could not be carried out at all.
pub fn run(config: &RunConfig) -> Result<RunSummary, RunError> {
    config.validate()?;
    let region = config.region.build()?;
    std::fs::create_dir_all(&config.out).map_err(IoError::from)?;

    let mut summary = RunSummary::default();
    summary.record("seed", config.seed);
    summary.record("epsilon", region.epsilon);

    summary.outcomes.extend(region_outcomes(&region, config.seed)?);
    summary.outcomes.push(sweepout_outcome(config.seed)?);

    if config.checks == CheckSelection::All {
        run_pipeline(config, &region, &mut summary)?;
    }

    for c in &summary.outcomes {
        let key = format!("check_{}", c.name.replace('-', "_"));
        summary.quantities.push((key, c.pass.to_string()));
    }
    summary.record("all_pass", summary.all_pass());

    write_report(config, &summary)?;
    Ok(summary)
}

fn run_pipeline(
    config: &RunConfig,
    region: &PropellerRegion,
    summary: &mut RunSummary,
) -> Result<(), RunError> {
    let out = config.out.as_path();

    let started = Instant::now();
    let mesh = Arc::new(build_surface(&config.surface)?);
    let build_seconds = started.elapsed().as_secs_f64();
    write_obj(&out.join("mesh.obj"), &mesh)?;

    let expected_chi = 2 - 2 * mesh.genus();
    let chi = mesh.euler_characteristic();
    let edges = mesh.undirected_edges().len();
    summary.outcomes.push(outcome(
        "mesh-topology",
        chi == expected_chi && 3 * mesh.face_count() == 2 * edges,
        format!(
            "chi {} (genus {}), {} vertices, {} faces, built in {:.2}s",
            chi,
            mesh.genus(),
            mesh.vertex_count(),
            mesh.face_count(),
            build_seconds
        ),
    ));
    summary.record("vertices", mesh.vertex_count());
    summary.record("faces", mesh.face_count());
    summary.record("euler_characteristic", chi);
    summary.record("genus", mesh.genus());
    summary.record("mesh_build_seconds", build_seconds);

    let u0 = build_u0(&mesh, &config.surface)?;
    write_vtk(&out.join("u0.vtk"), &u0, Some(region))?;
    let lap = CotanLaplacian::new(&mesh);
    let e0 = dirichlet_energy_with(&lap, &u0);
    let bound = energy_bound(&config.surface);
    summary.outcomes.push(outcome(
        "initial-energy-bound",
        e0 > 0.0 && e0 <= 1.5 * bound,
        format!("E(u0) = {e0:.6}, analytic tube bound {bound:.6}, ratio {:.2}", e0 / bound),
    ));
    summary.outcomes.push(outcome(
        "bubble-headroom",
        e0 < 4.0 * PI / 100.0,
        format!("E(u0) = {e0:.6} vs bubble scale 4*pi/100 = {:.6}", 4.0 * PI / 100.0),
    ));
    summary.record("initial_energy", e0);
    summary.record("energy_bound", bound);
    summary.record("energy_ratio", e0 / bound);
    summary.record("initial_equivariance", u0.equivariance_error());

    let report = run_flow(&u0, &config.flow, region)?;
    write_history_csv(&out.join("flow_log.csv"), &report.history)?;
    let snap_dir = out.join("snapshots");
    std::fs::create_dir_all(&snap_dir).map_err(IoError::from)?;
    for snap in &report.snapshots {
        let path = snap_dir.join(format!("step_{:06}.vtk", snap.step));
        write_vtk(&path, &snap.field, Some(region))?;
    }
    let last = *report.history.last().expect("nonempty history");
    save_checkpoint(
        &out.join("checkpoint.json"),
        &Checkpoint {
            version: CHECKPOINT_VERSION,
            step: report.steps_taken,
            time: last.t,
            params: config.surface,
            values: report.final_field.values.clone(),
        },
    )?;

    flow_outcomes(config, &report, summary);
    analysis_outcomes(config, region, &lap, &u0, &report, summary);
    Ok(())
}

fn flow_outcomes(config: &RunConfig, report: &FlowReport, summary: &mut RunSummary) {
    let last = *report.history.last().expect("nonempty history");
    summary.outcomes.push(outcome(
        "flow-converged",
        report.converged,
        format!(
            "{} steps, final max tension {:.3e} vs tolerance {:.1e}",
            report.steps_taken, last.max_tension, config.flow.tension_tol
        ),
    ));

    let increase = report
        .history
        .windows(2)
        .map(|w| w[1].energy - w[0].energy)
        .fold(f64::NEG_INFINITY, f64::max);
    summary.outcomes.push(outcome(
        "energy-monotone",
        report.history.len() < 2 || increase <= 0.0,
        format!(
            "energy {:.6} -> {:.6}, largest step change {:+.3e}",
            report.initial_energy, report.final_energy, increase
        ),
    ));

    let drift = report
        .history
        .iter()
        .map(|r| r.equivariance_error)
        .fold(0.0f64, f64::max);
    summary.outcomes.push(outcome(
        "equivariance",
        report.symmetry_ok && drift < config.flow.equivariance_tol,
        format!("worst symmetry drift {:.3e} vs tolerance {:.1e}", drift, config.flow.equivariance_tol),
    ));

    summary.outcomes.push(outcome(
        "no-bubbles",
        report.bubble_alarms.is_empty(),
        format!("{} bubble alarms: {:?}", report.bubble_alarms.len(), report.bubble_alarms),
    ));

    let series_min = report.history.iter().map(|r| r.min_margin).fold(f64::INFINITY, f64::min);
    summary.record("steps", report.steps_taken);
    summary.record("converged", report.converged);
    summary.record("final_energy", report.final_energy);
    summary.record("dt_final", report.dt_final);
    summary.record("max_tension", last.max_tension);
    summary.record("equivariance_max", drift);
    summary.record("margin_series_min", series_min);
    summary.record("margin_final", last.min_margin);
    summary.record("bubble_alarms", report.bubble_alarms.len());
}

fn analysis_outcomes(
    config: &RunConfig,
    region: &PropellerRegion,
    lap: &CotanLaplacian,
    u0: &MapField,
    report: &FlowReport,
    summary: &mut RunSummary,
) {
    let final_field = &report.final_field;

    let residual = harmonic_residual(lap, final_field);
    summary.outcomes.push(outcome(
        "harmonic-residual",
        residual < config.flow.tension_tol,
        format!("sup |tension| = {:.3e} at the final state", residual),
    ));
    summary.record("harmonic_residual", residual);

    // degree 0 at the start, the end, and every snapshot in between
    let mut degree_detail = String::new();
    let mut degree_ok;
    let mut final_degree = None;
    match (map_degree(u0), map_degree(final_field)) {
        (Ok(d0), Ok(df)) => {
            degree_ok = d0.degree == 0
                && df.degree == 0
                && d0.residual < DEGREE_RESIDUAL_TOL
                && df.residual < DEGREE_RESIDUAL_TOL;
            final_degree = Some(df);
            let _ = write!(
                degree_detail,
                "degree {} -> {} (residuals {:.2e}, {:.2e})",
                d0.degree, df.degree, d0.residual, df.residual
            );
            for snap in &report.snapshots {
                match map_degree(&snap.field) {
                    Ok(d) if d.degree == 0 => {}
                    Ok(d) => {
                        degree_ok = false;
                        let _ = write!(degree_detail, "; step {} has degree {}", snap.step, d.degree);
                    }
                    Err(e) => {
                        degree_ok = false;
                        let _ = write!(degree_detail, "; step {}: {e}", snap.step);
                    }
                }
            }
        }
        (a, b) => {
            degree_ok = false;
            let _ = write!(degree_detail, "degree computation failed: {a:?} / {b:?}");
        }
    }
    summary.outcomes.push(outcome("degree-zero", degree_ok, degree_detail));
    if let Some(df) = final_degree {
        summary.record("degree", df.degree);
        summary.record("degree_residual", df.residual);
    }

    let cont = containment(final_field, region);
    summary.outcomes.push(outcome(
        "containment",
        cont.min_margin > 0.0,
        format!(
            "min margin {:.4} over vertices and edge midpoints, {} offending",
            cont.min_margin,
            cont.offending_vertices.len()
        ),
    ));
    summary.record("min_margin", cont.min_margin);

    let delta = config.surface.tube_radius * config.surface.tube_radius;
    match find_equator_points(final_field, EQUATOR_TOL) {
        Ok(eq) => {
            summary.outcomes.push(outcome(
                "equator-points",
                true,
                format!(
                    "{} waist images on the equator (|x3| <= {:.1e}), cycle gap {:.1e}",
                    eq.points.len(),
                    eq.max_z,
                    eq.max_cycle_error
                ),
            ));
            summary.record("equator_max_z", eq.max_z);
            summary.record("equator_cycle_error", eq.max_cycle_error);

            let mut cl_ok = true;
            let mut worst_diam: f64 = 0.0;
            let mut cl_bound = 0.0;
            let mut detail = String::new();
            for (i, &(v, _)) in eq.points.iter().enumerate() {
                match check_courant_lebesgue(lap, final_field, v, delta) {
                    Ok(r) => {
                        cl_ok &= r.pass;
                        worst_diam = worst_diam.max(r.diameter);
                        cl_bound = r.bound;
                        let _ = write!(
                            detail,
                            "{}p{}: diam {:.3e} at s = {:.3} ({})",
                            if i == 0 { "" } else { "; " },
                            i + 1,
                            r.diameter,
                            r.s_found,
                            if r.pass { "ok" } else { "over bound" }
                        );
                    }
                    Err(e) => {
                        cl_ok = false;
                        let _ = write!(detail, "; p{}: {e}", i + 1);
                    }
                }
            }
            let _ = write!(detail, "; bound {cl_bound:.3e}");
            summary.outcomes.push(outcome("courant-lebesgue", cl_ok, detail));
            summary.record("cl_bound", cl_bound);
            summary.record("cl_worst_diameter", worst_diam);
        }
        Err(e) => {
            summary.outcomes.push(outcome("equator-points", false, e.to_string()));
            summary.outcomes.push(outcome(
                "courant-lebesgue",
                false,
                "no equator points to center the annuli on".into(),
            ));
        }
    }
}

fn write_report(config: &RunConfig, summary: &RunSummary) -> Result<(), IoError> {
    let mut report = String::new();
    let _ = writeln!(report, "run report");
    let _ = writeln!(report, "==========");
    let _ = writeln!(report);
    let _ = writeln!(report, "quantities:");
    for (k, v) in &summary.quantities {
        let _ = writeln!(report, "  {k} = {v}");
    }
    let _ = writeln!(report);
    let _ = writeln!(report, "checks:");
    for c in &summary.outcomes {
        let _ = writeln!(report, "  [{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let passed = summary.outcomes.iter().filter(|c| c.pass).count();
    let _ = writeln!(report);
    let _ = writeln!(report, "verdict: {passed} of {} checks passed", summary.outcomes.len());
    std::fs::write(config.out.join("analysis_report.txt"), report)?;

    let mut kv = String::new();
    for (k, v) in &summary.quantities {
        let _ = writeln!(kv, "{k}={v}");
    }
    std::fs::write(config.out.join("summary.txt"), kv)?;
    Ok(())
}
