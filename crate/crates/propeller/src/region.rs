//! Kendall's propeller region on the target sphere: alternating forbidden
//! bands around equatorial arcs, distance queries, the antipodal and
//! great-circle obstruction checks, and the sweep-out separation checker.

use crate::geometry::SpherePoint;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::VecDeque;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("invalid region: {0}")]
    InvalidLayout(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("sample graph is not connected")]
    DisconnectedSamples,
}

/// One closed equatorial arc, stored as (center longitude, half length).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Arc {
    pub center: f64,
    pub half_length: f64,
}

/// The region Omega_eps: the sphere minus epsilon-bands around `arc_count`
/// removed equatorial arcs that alternate with kept arcs of equal length.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PropellerRegion {
    pub epsilon: f64,
    pub arc_count: usize,
    /// Longitude of the center of the first kept arc.
    pub phase: f64,
    removed: Vec<Arc>,
}

fn wrap_angle(a: f64) -> f64 {
    let mut x = a % (2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    } else if x < -PI {
        x += 2.0 * PI;
    }
    x
}

impl PropellerRegion {
    /// Standard layout: 2m equal equatorial pieces of length pi/m, alternating
    /// removed and kept; kept-arc centers at phase + 2 pi k / m.
    pub fn new(epsilon: f64, arc_count: usize, phase: f64) -> Result<Self, RegionError> {
        if arc_count < 2 {
            return Err(RegionError::InvalidLayout("need at least 2 removed arcs".into()));
        }
        let half = PI / (2.0 * arc_count as f64);
        if !(epsilon > 0.0 && epsilon < half) {
            return Err(RegionError::InvalidLayout(format!(
                "epsilon must lie in (0, {half:.6}) so the widened bands do not swallow the kept arcs"
            )));
        }
        let removed = (0..arc_count)
            .map(|k| Arc {
                center: phase + PI / arc_count as f64 + 2.0 * PI * k as f64 / arc_count as f64,
                half_length: half,
            })
            .collect();
        Ok(PropellerRegion { epsilon, arc_count, phase, removed })
    }

    pub fn standard(epsilon: f64) -> Result<Self, RegionError> {
        PropellerRegion::new(epsilon, 3, 0.0)
    }

    /// Arbitrary removed-arc layout, for negative controls. Arcs must be
    /// pairwise disjoint.
    pub fn with_arcs(epsilon: f64, removed: Vec<Arc>) -> Result<Self, RegionError> {
        if epsilon <= 0.0 {
            return Err(RegionError::InvalidLayout("epsilon must be positive".into()));
        }
        if removed.len() < 2 {
            return Err(RegionError::InvalidLayout("need at least 2 removed arcs".into()));
        }
        let mut spans: Vec<(f64, f64)> = removed
            .iter()
            .map(|a| (wrap_angle(a.center), a.half_length))
            .collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        for i in 0..spans.len() {
            let (c0, h0) = spans[i];
            let (c1, h1) = spans[(i + 1) % spans.len()];
            let gap = if i + 1 == spans.len() { c1 + 2.0 * PI - c0 } else { c1 - c0 };
            if gap < h0 + h1 {
                return Err(RegionError::InvalidLayout("removed arcs overlap".into()));
            }
        }
        let arc_count = removed.len();
        Ok(PropellerRegion { epsilon, arc_count, phase: 0.0, removed })
    }

    pub fn removed_arcs(&self) -> &[Arc] {
        &self.removed
    }

    /// Geodesic distance from `q` to the union of the closed removed arcs.
    ///
    /// For an equatorial arc, the closest arc point either shares q's
    /// longitude (distance |latitude|) or is an arc endpoint; both cases are
    /// d = acos(cos(lat) * cos(longitude excess)).
    pub fn distance_to_forbidden(&self, q: SpherePoint) -> f64 {
        let lon = q.longitude();
        let cos_lat = (1.0 - q.z() * q.z()).max(0.0).sqrt();
        let mut best = f64::INFINITY;
        for arc in &self.removed {
            let excess = (wrap_angle(lon - arc.center).abs() - arc.half_length).max(0.0);
            let d = (cos_lat * excess.cos()).clamp(-1.0, 1.0).acos();
            best = best.min(d);
        }
        best
    }

    /// Membership in the closed region: at geodesic distance >= epsilon from
    /// every removed arc.
    pub fn contains(&self, q: SpherePoint) -> bool {
        self.distance_to_forbidden(q) >= self.epsilon
    }

    /// Longitude lies within a removed arc (closed), i.e. the point of the
    /// Equator at this longitude belongs to the forbidden set itself.
    fn longitude_in_removed(&self, lon: f64, slack: f64) -> bool {
        self.removed
            .iter()
            .any(|arc| wrap_angle(lon - arc.center).abs() <= arc.half_length + slack)
    }
}

#[derive(Debug, Clone)]
pub struct ObstructionReport {
    pub pass: bool,
    /// Sampled equator points whose antipode escapes the removed arcs.
    pub witnesses: Vec<SpherePoint>,
}

/// Samples points on the kept (open) equatorial arcs and verifies each
/// antipode lands inside the closed union of removed arcs. This is what
/// rules out a closed geodesic running through the Equator's kept part.
pub fn antipodal_obstruction_check(
    region: &PropellerRegion,
    n_samples: usize,
    seed: u64,
) -> Result<ObstructionReport, RegionError> {
    if n_samples < 1 {
        return Err(RegionError::Precondition("n_samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut witnesses = Vec::new();
    let mut drawn = 0usize;
    let mut budget = n_samples.saturating_mul(64);
    while drawn < n_samples && budget > 0 {
        budget -= 1;
        let lon = rng.gen_range(-PI..PI);
        // kept part of the Equator: outside every closed removed arc
        if region.longitude_in_removed(lon, 0.0) {
            continue;
        }
        drawn += 1;
        if !region.longitude_in_removed(lon + PI, 1e-12) {
            let (s, c) = lon.sin_cos();
            witnesses.push(SpherePoint::project(crate::geometry::Vec3::new(c, s, 0.0)).expect("equator point"));
        }
    }
    if drawn < n_samples {
        return Err(RegionError::Precondition(
            "kept part of the Equator has negligible measure; cannot sample".into(),
        ));
    }
    Ok(ObstructionReport { pass: witnesses.is_empty(), witnesses })
}

#[derive(Debug, Clone)]
pub struct CircleCheckReport {
    pub pass: bool,
    /// Minimum over circles of that circle's deepest entry into the forbidden
    /// bands (positive means every circle genuinely crosses a band).
    pub min_violation_distance: f64,
}

/// Traces `n_circles` random great circles and confirms each one enters the
/// open forbidden set (distance_to_forbidden < epsilon somewhere).
pub fn great_circle_obstruction_check(
    region: &PropellerRegion,
    n_circles: usize,
    angular_step: f64,
    seed: u64,
) -> Result<CircleCheckReport, RegionError> {
    if n_circles < 1 {
        return Err(RegionError::Precondition("n_circles must be at least 1".into()));
    }
    if !(angular_step > 0.0 && angular_step <= 1e-3) {
        return Err(RegionError::Precondition("trace step must lie in (0, 1e-3]".into()));
    }
    let n_points = (2.0 * PI / angular_step).ceil() as usize;
    let depths: Vec<f64> = (0..n_circles)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let z: f64 = rng.gen_range(-1.0..1.0);
            let phi: f64 = rng.gen_range(0.0..2.0 * PI);
            let s = (1.0 - z * z).max(0.0).sqrt();
            let n = crate::geometry::Vec3::new(s * phi.cos(), s * phi.sin(), z);
            // orthonormal frame spanning the circle's plane
            let pick = if n.z.abs() < 0.9 {
                crate::geometry::Vec3::new(0.0, 0.0, 1.0)
            } else {
                crate::geometry::Vec3::new(1.0, 0.0, 0.0)
            };
            let mut e1 = pick - n.scale(pick.dot(n));
            e1 = e1.scale(1.0 / e1.norm());
            let e2 = n.cross(e1);
            let mut deepest = f64::NEG_INFINITY;
            for k in 0..n_points {
                let t = angular_step * k as f64;
                let (st, ct) = t.sin_cos();
                let p = SpherePoint::project(e1.scale(ct) + e2.scale(st)).expect("unit circle point");
                deepest = deepest.max(region.epsilon - region.distance_to_forbidden(p));
            }
            deepest
        })
        .collect();
    let min_violation = depths.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(CircleCheckReport { pass: min_violation > 0.0, min_violation_distance: min_violation })
}

#[derive(Debug, Clone)]
pub struct SweepoutReport {
    pub pass: bool,
    /// First interior curve index whose ball removal fails to separate the
    /// remaining samples into exactly the two end components.
    pub failing_index: Option<usize>,
}

/// Verifies the sweep-out separation property on a sampled tube region: for
/// every interior curve time, deleting the ball around the curve point splits
/// the samples into exactly two components, one per curve end.
pub fn check_sweepout_separation(
    samples: &[SpherePoint],
    curve: &[SpherePoint],
    radii: &[f64],
) -> Result<SweepoutReport, RegionError> {
    if curve.len() < 3 {
        return Err(RegionError::Precondition("curve must have at least 3 samples".into()));
    }
    if curve.len() != radii.len() {
        return Err(RegionError::Precondition("curve and radii must have equal length".into()));
    }
    if let Some(r) = radii.iter().find(|&&r| !(r > 0.0 && r < PI / 2.0)) {
        return Err(RegionError::Precondition(format!(
            "radius {r} outside (0, pi/2); pi/2 is the convexity radius of the unit sphere"
        )));
    }
    if samples.len() < 16 {
        return Err(RegionError::Precondition("need a dense sample cloud".into()));
    }

    let adjacency = knn_graph(samples, 8);
    if !connected(&adjacency, &vec![false; samples.len()]) {
        return Err(RegionError::DisconnectedSamples);
    }

    let near_start: Vec<usize> = (0..samples.len())
        .filter(|&i| samples[i].geodesic_distance(curve[0]) <= radii[0])
        .collect();
    let near_end: Vec<usize> = (0..samples.len())
        .filter(|&i| samples[i].geodesic_distance(curve[curve.len() - 1]) <= radii[radii.len() - 1])
        .collect();
    if near_start.is_empty() || near_end.is_empty() {
        return Err(RegionError::Precondition("sample cloud does not cover the curve ends".into()));
    }

    for t0 in 1..curve.len() - 1 {
        let removed: Vec<bool> = samples
            .iter()
            .map(|&p| p.geodesic_distance(curve[t0]) <= radii[t0])
            .collect();
        let labels = component_labels(&adjacency, &removed);
        // Separation means the two end neighborhoods land in exactly two
        // distinct components, one each. Tiny boundary slivers orphaned by
        // the ball removal touch neither end and are sampling artifacts.
        let mut start_labels: Vec<usize> = near_start.iter().filter_map(|&i| labels[i]).collect();
        let mut end_labels: Vec<usize> = near_end.iter().filter_map(|&i| labels[i]).collect();
        start_labels.sort_unstable();
        start_labels.dedup();
        end_labels.sort_unstable();
        end_labels.dedup();
        let separated = start_labels.len() == 1
            && end_labels.len() == 1
            && start_labels[0] != end_labels[0];
        if !separated {
            return Ok(SweepoutReport { pass: false, failing_index: Some(t0) });
        }
    }
    Ok(SweepoutReport { pass: true, failing_index: None })
}

/// Symmetrized k-nearest-neighbor adjacency by chordal (equivalently geodesic)
/// proximity.
fn knn_graph(samples: &[SpherePoint], k: usize) -> Vec<Vec<usize>> {
    let n = samples.len();
    let nearest: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut by_dist: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (-samples[i].vec().dot(samples[j].vec()), j))
                .collect();
            let keep = k.min(by_dist.len());
            by_dist.select_nth_unstable_by(keep - 1, |a, b| a.0.total_cmp(&b.0));
            by_dist.truncate(keep);
            by_dist.into_iter().map(|(_, j)| j).collect()
        })
        .collect();
    let mut adj = vec![Vec::new(); n];
    for (i, neigh) in nearest.iter().enumerate() {
        for &j in neigh {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for row in &mut adj {
        row.sort_unstable();
        row.dedup();
    }
    adj
}

fn connected(adj: &[Vec<usize>], removed: &[bool]) -> bool {
    let labels = component_labels(adj, removed);
    let n_components = labels.iter().filter_map(|&l| l).max().map_or(0, |m| m + 1);
    n_components <= 1
}

/// BFS component labels over the samples that survive removal; removed
/// samples get None.
fn component_labels(adj: &[Vec<usize>], removed: &[bool]) -> Vec<Option<usize>> {
    let n = adj.len();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut next = 0usize;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if removed[start] || labels[start].is_some() {
            continue;
        }
        labels[start] = Some(next);
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !removed[w] && labels[w].is_none() {
                    labels[w] = Some(next);
                    queue.push_back(w);
                }
            }
        }
        next += 1;
    }
    labels
}
