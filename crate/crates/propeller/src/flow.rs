//! Sphere-constrained harmonic map heat flow: projected explicit Euler steps
//! of the tension field, with an energy-monotonicity guard, per-step symmetry
//! and containment records, and bubble detection.

use crate::geometry::{rotate_z_vec, CotanLaplacian, SpherePoint, Vec3};
use crate::initmap::{dirichlet_energy_with, MapField};
use crate::region::PropellerRegion;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("time step {dt} violates the stability bound 1/{stiffness}")]
    UnstableTimeStep { dt: f64, stiffness: f64 },
    #[error(
        "energy would not decrease after {halvings} halvings at step {step}: \
         dt {dt:.3e}, energy {energy:.12e}, trial {trial_energy:.12e}, max tension {max_tension:.3e}"
    )]
    Stiffness {
        step: usize,
        dt: f64,
        halvings: usize,
        energy: f64,
        trial_energy: f64,
        max_tension: f64,
    },
    #[error("numerical blowup at step {step}")]
    Blowup { step: usize },
}

/// Explicit time step: a fixed positive value or the automatic stability
/// bound (reciprocal of the worst weight-to-mass row ratio).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum TimeStep {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FlowConfig {
    pub dt: TimeStep,
    pub max_steps: usize,
    /// Stop once the max tension norm falls below this.
    pub tension_tol: f64,
    /// Single-step energy drop that triggers a bubble alarm.
    pub energy_drop_alarm: f64,
    /// Symmetry drift beyond this marks the run as symmetry-broken.
    pub equivariance_tol: f64,
    pub snapshot_every: usize,
    /// Sum energies in fixed edge order so identical runs log identical bits.
    pub deterministic_reduction: bool,
    /// Carried along for downstream randomized checks; the flow itself is
    /// deterministic.
    pub seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            dt: TimeStep::Auto,
            max_steps: 100_000,
            tension_tol: 1e-4,
            energy_drop_alarm: 2.0 * PI,
            equivariance_tol: 1e-9,
            snapshot_every: 500,
            deterministic_reduction: true,
            seed: 42,
        }
    }
}

/// One logged state of the flow. Row `step` describes the field after that
/// many accepted steps; `max_tension` is measured at that same state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    pub max_tension: f64,
    pub equivariance_error: f64,
    pub min_margin: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub field: MapField,
    pub min_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BubbleAlarm {
    /// Energy fell by at least the alarm threshold in one step.
    EnergyDrop { step: usize, drop: f64 },
    /// More than a quarter of the total energy sits in one vertex 2-ring.
    Concentration { step: usize, vertex: usize, share: f64 },
}

#[derive(Debug, Clone)]
pub struct FlowReport {
    pub final_field: MapField,
    pub history: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub converged: bool,
    pub steps_taken: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub dt_final: f64,
    pub bubble_alarms: Vec<BubbleAlarm>,
    pub symmetry_ok: bool,
}

/// Tension field: the tangential part of the weighted Laplacian, one vector
/// per vertex. Each vertex sums its neighbors in fixed ascending order.
pub fn tension_field(lap: &CotanLaplacian, field: &MapField) -> Vec<Vec3> {
    (0..field.values.len())
        .into_par_iter()
        .map(|i| {
            let ui = field.values[i].vec();
            let mut acc = Vec3::ZERO;
            for &(j, w) in lap.neighbors(i) {
                acc += (field.values[j].vec() - ui).scale(w);
            }
            let lu = acc.scale(1.0 / lap.mass[i]);
            lu - ui.scale(ui.dot(lu))
        })
        .collect()
}

pub fn max_tension_norm(tension: &[Vec3]) -> f64 {
    tension
        .par_iter()
        .map(|t| t.norm2())
        .reduce(|| 0.0, f64::max)
        .sqrt()
}

/// Flow rate of energy loss: sum of m_i |tau_i|^2.
pub fn dissipation(lap: &CotanLaplacian, tension: &[Vec3]) -> f64 {
    let mut total = 0.0;
    for (i, t) in tension.iter().enumerate() {
        total += lap.mass[i] * t.norm2();
    }
    total
}

fn energy_of(lap: &CotanLaplacian, field: &MapField, deterministic: bool) -> f64 {
    if deterministic {
        dirichlet_energy_with(lap, field)
    } else {
        0.5 * lap
            .edges
            .par_iter()
            .map(|e| {
                let d = field.values[e.a].vec() - field.values[e.b].vec();
                e.w * d.norm2()
            })
            .sum::<f64>()
    }
}

pub struct FlowState {
    pub field: MapField,
    pub lap: Arc<CotanLaplacian>,
    pub region: PropellerRegion,
    pub time: f64,
    pub step: usize,
    pub energy: f64,
    pub dt: f64,
    pub initial_energy: f64,
    /// Precomputed rotation of the target by one symmetry turn.
    rot_sin_cos: (f64, f64),
}

impl FlowState {
    pub fn new(
        u0: &MapField,
        config: &FlowConfig,
        region: &PropellerRegion,
    ) -> Result<FlowState, FlowError> {
        let lap = Arc::new(CotanLaplacian::new(&u0.mesh));
        let stiffness = lap.max_stiffness();
        let dt = match config.dt {
            TimeStep::Auto => 1.0 / stiffness,
            TimeStep::Fixed(dt) => {
                if !(dt > 0.0) || dt * stiffness > 1.0 + 1e-12 {
                    return Err(FlowError::UnstableTimeStep { dt, stiffness });
                }
                dt
            }
        };
        let energy = energy_of(&lap, u0, config.deterministic_reduction);
        if !energy.is_finite() {
            return Err(FlowError::Blowup { step: 0 });
        }
        let angle = 2.0 * PI / u0.mesh.symmetry_order as f64;
        Ok(FlowState {
            field: u0.clone(),
            lap,
            region: region.clone(),
            time: 0.0,
            step: 0,
            energy,
            dt,
            initial_energy: energy,
            rot_sin_cos: angle.sin_cos(),
        })
    }

    /// Symmetry drift and containment margin of the current field, in one
    /// parallel pass. Max reductions are order-independent.
    pub fn measure(&self) -> (f64, f64) {
        let mesh = &self.field.mesh;
        let values = &self.field.values;
        let (s, c) = self.rot_sin_cos;
        let eps = self.region.epsilon;
        let (chord2, worst_closeness) = (0..values.len())
            .into_par_iter()
            .map(|v| {
                let u = values[v].vec();
                let rot_dev = (values[mesh.rotation_map[v]].vec() - rotate_z_vec(u, s, c)).norm2();
                let mir_dev = (values[mesh.mirror_map[v]].vec() - values[v].mirror_z().vec()).norm2();
                let lon = values[v].longitude();
                let cos_lat = (1.0 - u.z * u.z).max(0.0).sqrt();
                // distance to the forbidden bands is acos of this, monotone
                let closeness = self
                    .region
                    .removed_arcs()
                    .iter()
                    .map(|arc| {
                        let mut delta = (lon - arc.center) % (2.0 * PI);
                        if delta > PI {
                            delta -= 2.0 * PI;
                        } else if delta < -PI {
                            delta += 2.0 * PI;
                        }
                        let excess = (delta.abs() - arc.half_length).max(0.0);
                        cos_lat * excess.cos()
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                (rot_dev.max(mir_dev), closeness)
            })
            .reduce(
                || (0.0, f64::NEG_INFINITY),
                |a, b| (a.0.max(b.0), a.1.max(b.1)),
            );
        let equiv = 2.0 * (chord2.sqrt() / 2.0).clamp(0.0, 1.0).asin();
        let min_margin = worst_closeness.clamp(-1.0, 1.0).acos() - eps;
        (equiv, min_margin)
    }

    pub fn record(&self, max_tension: f64) -> StepRecord {
        let (equivariance_error, min_margin) = self.measure();
        StepRecord {
            step: self.step,
            t: self.time,
            energy: self.energy,
            max_tension,
            equivariance_error,
            min_margin,
        }
    }
}

/// One projected Euler step along the given tension field, halving dt until
/// the energy stops increasing (up to 20 times). Returns the accepted dt.
pub fn flow_step(
    state: &mut FlowState,
    config: &FlowConfig,
    tension: &[Vec3],
) -> Result<f64, FlowError> {
    let budget = 1e-8 * state.initial_energy;
    for halvings in 0..=20 {
        let dt = state.dt;
        let trial: Vec<SpherePoint> = state
            .field
            .values
            .par_iter()
            .zip(tension.par_iter())
            .map(|(u, tau)| {
                // |u + dt tau| >= 1 because tau is tangent, so this never fails
                SpherePoint::project(u.vec() + tau.scale(dt)).expect("unit-plus norm")
            })
            .collect();
        let trial_field = MapField { mesh: Arc::clone(&state.field.mesh), values: trial };
        let trial_energy = energy_of(&state.lap, &trial_field, config.deterministic_reduction);
        if !trial_energy.is_finite() {
            return Err(FlowError::Blowup { step: state.step });
        }
        if trial_energy <= state.energy + budget {
            state.field = trial_field;
            state.energy = trial_energy;
            state.time += dt;
            state.step += 1;
            return Ok(dt);
        }
        if halvings == 20 {
            return Err(FlowError::Stiffness {
                step: state.step,
                dt,
                halvings,
                energy: state.energy,
                trial_energy,
                max_tension: max_tension_norm(tension),
            });
        }
        state.dt *= 0.5;
    }
    unreachable!()
}

/// Runs the flow from `u0` until the tension tolerance or the step budget is
/// reached. The returned history has one record per state, starting with the
/// initial one.
pub fn run_flow(
    u0: &MapField,
    config: &FlowConfig,
    region: &PropellerRegion,
) -> Result<FlowReport, FlowError> {
    let mut state = FlowState::new(u0, config, region)?;
    let mut history = Vec::with_capacity(config.max_steps.min(1 << 20) + 1);
    let mut snapshots = Vec::new();
    let mut alarms = Vec::new();
    let mut symmetry_ok = true;

    let mut tension = tension_field(&state.lap, &state.field);
    let mut max_t = max_tension_norm(&tension);
    if !max_t.is_finite() {
        return Err(FlowError::Blowup { step: 0 });
    }
    let rec = state.record(max_t);
    symmetry_ok &= rec.equivariance_error <= config.equivariance_tol;
    history.push(rec);
    snapshot(&state, &mut snapshots, &mut alarms, rec.min_margin);

    while state.step < config.max_steps && max_t > config.tension_tol {
        flow_step(&mut state, config, &tension)?;
        tension = tension_field(&state.lap, &state.field);
        max_t = max_tension_norm(&tension);
        if !max_t.is_finite() {
            return Err(FlowError::Blowup { step: state.step });
        }
        let rec = state.record(max_t);
        symmetry_ok &= rec.equivariance_error <= config.equivariance_tol;
        history.push(rec);
        if state.step % config.snapshot_every.max(1) == 0 || max_t <= config.tension_tol {
            snapshot(&state, &mut snapshots, &mut alarms, rec.min_margin);
        }
    }

    if snapshots.last().map_or(true, |s| s.step != state.step) {
        let margin = history.last().expect("nonempty history").min_margin;
        snapshot(&state, &mut snapshots, &mut alarms, margin);
    }

    alarms.extend(detect_bubble(&history, config));
    alarms.sort_by_key(|a| match *a {
        BubbleAlarm::EnergyDrop { step, .. } => step,
        BubbleAlarm::Concentration { step, .. } => step,
    });

    Ok(FlowReport {
        converged: max_t <= config.tension_tol,
        steps_taken: state.step,
        initial_energy: state.initial_energy,
        final_energy: state.energy,
        dt_final: state.dt,
        final_field: state.field,
        history,
        snapshots,
        bubble_alarms: alarms,
        symmetry_ok,
    })
}

fn snapshot(
    state: &FlowState,
    snapshots: &mut Vec<Snapshot>,
    alarms: &mut Vec<BubbleAlarm>,
    min_margin: f64,
) {
    if let Some(alarm) = detect_concentration(&state.lap, &state.field, state.step) {
        alarms.push(alarm);
    }
    snapshots.push(Snapshot {
        step: state.step,
        t: state.time,
        field: state.field.clone(),
        min_margin,
    });
}

/// Scans a step history for single-step energy drops at or above the alarm
/// threshold.
pub fn detect_bubble(history: &[StepRecord], config: &FlowConfig) -> Vec<BubbleAlarm> {
    history
        .windows(2)
        .filter_map(|w| {
            let drop = w[0].energy - w[1].energy;
            (drop >= config.energy_drop_alarm).then_some(BubbleAlarm::EnergyDrop {
                step: w[1].step,
                drop,
            })
        })
        .collect()
}

/// Flags a vertex whose 2-ring holds more than a quarter of the total energy.
/// The proxy sums the 1-ring edge energies of the closed neighborhood, which
/// covers exactly the edges within two hops of the vertex.
pub fn detect_concentration(
    lap: &CotanLaplacian,
    field: &MapField,
    step: usize,
) -> Option<BubbleAlarm> {
    let nv = field.values.len();
    let mut ring1 = vec![0.0f64; nv];
    let mut total = 0.0;
    for e in &lap.edges {
        let d = field.values[e.a].vec() - field.values[e.b].vec();
        let energy = 0.5 * e.w * d.norm2();
        ring1[e.a] += energy;
        ring1[e.b] += energy;
        total += energy;
    }
    if total <= 0.0 {
        return None;
    }
    let mut worst = (0usize, 0.0f64);
    for v in 0..nv {
        let mut around = ring1[v];
        for &(j, _) in lap.neighbors(v) {
            around += ring1[j];
        }
        let share = around / (2.0 * total);
        if share > worst.1 {
            worst = (v, share);
        }
    }
    (worst.1 > 0.25).then_some(BubbleAlarm::Concentration {
        step,
        vertex: worst.0,
        share: worst.1,
    })
}
