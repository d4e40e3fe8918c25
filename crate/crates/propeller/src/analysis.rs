//! Post-flow verification: harmonic residual, mapping degree, image
//! containment in the allowed region, equator point extraction, and the
//! Courant-Lebesgue diameter bound on intrinsic annuli.

use crate::flow::{max_tension_norm, tension_field};
use crate::geometry::{CotanLaplacian, RegionTag, SpherePoint};
use crate::initmap::{dirichlet_energy_with, MapField};
use crate::region::PropellerRegion;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("degree estimate unreliable: area sum is {residual:.4} turns away from an integer (image triangles degenerate or under-resolved)")]
    DegreeUnreliable { residual: f64 },
    #[error("equator point extraction failed: {0}")]
    Inconsistent(String),
    #[error("invalid parameter: {0}")]
    Domain(String),
    #[error("all {0} sampled annuli are empty; the mesh cannot resolve radii this small")]
    Resolution(usize),
}

/// Sup-norm of the discrete tension field; zero exactly at discrete harmonic
/// maps, and the quantity the flow drives below its stopping tolerance.
pub fn harmonic_residual(lap: &CotanLaplacian, field: &MapField) -> f64 {
    max_tension_norm(&tension_field(lap, field))
}

#[derive(Debug, Clone, Copy)]
pub struct DegreeReport {
    pub degree: i64,
    /// Distance of the raw area sum (in units of full covers) from `degree`.
    pub residual: f64,
}

/// Mapping degree via signed spherical areas: each face contributes the
/// oriented solid angle of its image triangle, and the total is 4 pi times
/// the degree. Exact integer output with a quantified rounding residual.
pub fn map_degree(field: &MapField) -> Result<DegreeReport, AnalysisError> {
    let mut total = 0.0;
    for f in &field.mesh.faces {
        let a = field.values[f[0]].vec();
        let b = field.values[f[1]].vec();
        let c = field.values[f[2]].vec();
        // van Oosterom-Strackee: half the solid angle of the triangle (a,b,c)
        let num = a.dot(b.cross(c));
        let den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
        total += 2.0 * num.atan2(den);
    }
    let turns = total / (4.0 * PI);
    let degree = turns.round();
    let residual = (turns - degree).abs();
    if residual > 0.1 {
        return Err(AnalysisError::DegreeUnreliable { residual });
    }
    Ok(DegreeReport { degree: degree as i64, residual })
}

#[derive(Debug, Clone)]
pub struct ContainmentReport {
    /// Smallest margin over all samples; positive iff the image stays inside
    /// the allowed region with room to spare.
    pub min_margin: f64,
    /// Vertices whose image, or an incident edge midpoint image, has margin
    /// <= 0. Sorted, deduplicated.
    pub offending_vertices: Vec<usize>,
    /// Minimum margin per region tag, in first-encounter vertex order.
    pub margin_by_tag: Vec<(RegionTag, f64)>,
}

/// Checks that the image avoids the forbidden set with margin
/// distance_to_forbidden - epsilon, sampling every vertex image and every
/// edge midpoint image (geodesic midpoint of the endpoint images). An edge
/// whose endpoints map antipodally has no midpoint; it is scored with the
/// worst possible margin.
pub fn containment(field: &MapField, region: &PropellerRegion) -> ContainmentReport {
    let eps = region.epsilon;
    let mesh = &field.mesh;
    let mut min_margin = f64::INFINITY;
    let mut offending = Vec::new();
    let mut by_tag: Vec<(RegionTag, f64)> = Vec::new();

    let bump = |by_tag: &mut Vec<(RegionTag, f64)>, tag: RegionTag, margin: f64| {
        match by_tag.iter_mut().find(|(t, _)| *t == tag) {
            Some((_, m)) => *m = m.min(margin),
            None => by_tag.push((tag, margin)),
        }
    };

    for (v, img) in field.values.iter().enumerate() {
        let margin = region.distance_to_forbidden(*img) - eps;
        min_margin = min_margin.min(margin);
        bump(&mut by_tag, mesh.region_tags[v], margin);
        if margin <= 0.0 {
            offending.push(v);
        }
    }
    for (a, b) in mesh.undirected_edges() {
        let margin = match SpherePoint::project(field.values[a].vec() + field.values[b].vec()) {
            Ok(mid) => region.distance_to_forbidden(mid) - eps,
            Err(_) => -eps,
        };
        min_margin = min_margin.min(margin);
        bump(&mut by_tag, mesh.region_tags[a], margin);
        bump(&mut by_tag, mesh.region_tags[b], margin);
        if margin <= 0.0 {
            offending.push(a);
            offending.push(b);
        }
    }
    offending.sort_unstable();
    offending.dedup();
    ContainmentReport { min_margin, offending_vertices: offending, margin_by_tag: by_tag }
}

#[derive(Debug, Clone)]
pub struct EquatorReport {
    /// One reflection-fixed waist vertex per tube with its image, ordered so
    /// that the source rotation carries each entry to the next.
    pub points: Vec<(usize, SpherePoint)>,
    /// Worst |x3| among the selected images (how far off the equator).
    pub max_z: f64,
    /// Worst geodesic gap in the cycle image(p_i) rotated vs image(p_{i+1}).
    pub max_cycle_error: f64,
}

/// On each tube waist loop (the reflection-fixed circles), picks the vertex
/// whose image is closest to the equator, follows the rotation map across
/// tubes, and verifies that the images lie on the equator and are cyclically
/// permuted by the target rotation.
pub fn find_equator_points(field: &MapField, tol: f64) -> Result<EquatorReport, AnalysisError> {
    let mesh = &field.mesh;
    let order = mesh.symmetry_order as u32;
    if mesh.tube_waists.is_empty() {
        return Err(AnalysisError::Inconsistent("mesh has no tube waists".into()));
    }
    let p0 = *mesh.tube_waists[0]
        .iter()
        .min_by(|&&a, &&b| field.values[a].z().abs().total_cmp(&field.values[b].z().abs()))
        .expect("waist loops are nonempty");
    let mut points = Vec::with_capacity(mesh.tube_waists.len());
    let mut v = p0;
    let mut max_z: f64 = 0.0;
    for tube in 0..mesh.tube_waists.len() {
        let img = field.values[v];
        if img.z().abs() >= tol {
            return Err(AnalysisError::Inconsistent(format!(
                "no waist vertex on tube {tube} maps near the equator (best |x3| = {:.3e})",
                img.z().abs()
            )));
        }
        max_z = max_z.max(img.z().abs());
        points.push((v, img));
        v = mesh.rotation_map[v];
    }
    let mut max_cycle_error: f64 = 0.0;
    for i in 0..points.len() {
        let rotated = points[i].1.rotate_z(1, order);
        let gap = rotated.geodesic_distance(points[(i + 1) % points.len()].1);
        max_cycle_error = max_cycle_error.max(gap);
    }
    if max_cycle_error >= tol {
        return Err(AnalysisError::Inconsistent(format!(
            "target rotation does not permute the equator images (worst gap {max_cycle_error:.3e})"
        )));
    }
    Ok(EquatorReport { points, max_z, max_cycle_error })
}

/// The Courant-Lebesgue diameter bound sqrt(8 pi C) / sqrt(log(1/delta)) for
/// a map of energy at most C on a disk, evaluated on the circle of some
/// radius s in (delta, sqrt(delta)).
pub fn courant_lebesgue_bound(energy: f64, delta: f64) -> Result<f64, AnalysisError> {
    if !(energy >= 0.0) {
        return Err(AnalysisError::Domain(format!("energy must be nonnegative, got {energy}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AnalysisError::Domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok((8.0 * PI * energy).sqrt() / (1.0 / delta).ln().sqrt())
}

#[derive(Debug, Clone, Copy)]
pub struct CourantLebesgueReport {
    /// True iff some sampled annulus has image diameter within the bound,
    /// matching the lemma's existential quantifier.
    pub pass: bool,
    /// Radius achieving the smallest image diameter.
    pub s_found: f64,
    /// That smallest diameter (chordal, ambient).
    pub diameter: f64,
    pub bound: f64,
    /// How many of the 32 sampled annuli contained enough vertices to score.
    pub annuli_scored: usize,
}

const CL_RADIUS_SAMPLES: usize = 32;

/// Tests the Courant-Lebesgue conclusion around `center`: among 32 radii
/// s in (delta, sqrt(delta)), measured by intrinsic (Dijkstra) distance, some
/// annulus of vertices at distance close to s must have image diameter within
/// courant_lebesgue_bound(E(field), delta).
pub fn check_courant_lebesgue(
    lap: &CotanLaplacian,
    field: &MapField,
    center: usize,
    delta: f64,
) -> Result<CourantLebesgueReport, AnalysisError> {
    let bound = courant_lebesgue_bound(dirichlet_energy_with(lap, field), delta)?;
    let mesh = &field.mesh;
    let dist = dijkstra(lap, mesh.vertices.as_slice(), center);

    // Annulus half-width: wide enough to catch at least one vertex ring near
    // the center even on coarse meshes, but never more than a 1/64 slice of
    // the sampled radius range.
    let sqrt_delta = delta.sqrt();
    let mean_edge = {
        let row = lap.neighbors(center);
        let total: f64 = row
            .iter()
            .map(|&(n, _)| (mesh.vertices[n] - mesh.vertices[center]).norm())
            .sum();
        total / row.len() as f64
    };
    let band = ((sqrt_delta - delta) / 64.0).max(0.75 * mean_edge);

    let mut best: Option<(f64, f64)> = None;
    let mut annuli_scored = 0;
    for k in 1..=CL_RADIUS_SAMPLES {
        let s = delta + k as f64 * (sqrt_delta - delta) / (CL_RADIUS_SAMPLES + 1) as f64;
        let ring: Vec<usize> = (0..mesh.vertex_count())
            .filter(|&v| dist[v] > 0.0 && (dist[v] - s).abs() <= band)
            .collect();
        // a one-vertex "circle" has diameter zero by accident, not by merit
        if ring.len() < 2 {
            continue;
        }
        annuli_scored += 1;
        let mut diam: f64 = 0.0;
        for (i, &a) in ring.iter().enumerate() {
            for &b in &ring[i + 1..] {
                diam = diam.max((field.values[a].vec() - field.values[b].vec()).norm());
            }
        }
        if best.is_none_or(|(_, d)| diam < d) {
            best = Some((s, diam));
        }
    }
    let Some((s_found, diameter)) = best else {
        return Err(AnalysisError::Resolution(CL_RADIUS_SAMPLES));
    };
    Ok(CourantLebesgueReport { pass: diameter <= bound, s_found, diameter, bound, annuli_scored })
}

/// Single-source intrinsic distances along mesh edges.
fn dijkstra(lap: &CotanLaplacian, positions: &[crate::geometry::Vec3], source: usize) -> Vec<f64> {
    struct Entry {
        dist: f64,
        v: usize,
    }
    impl PartialEq for Entry {
        fn eq(&self, o: &Self) -> bool {
            self.cmp(o) == Ordering::Equal
        }
    }
    impl Eq for Entry {}
    impl PartialOrd for Entry {
        fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Entry {
        // reversed: BinaryHeap is a max-heap, we want the smallest distance
        fn cmp(&self, o: &Self) -> Ordering {
            o.dist.total_cmp(&self.dist).then_with(|| o.v.cmp(&self.v))
        }
    }

    let mut dist = vec![f64::INFINITY; lap.vertex_count()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Entry { dist: 0.0, v: source });
    while let Some(Entry { dist: d, v }) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(n, _) in lap.neighbors(v) {
            let nd = d + (positions[n] - positions[v]).norm();
            if nd < dist[n] {
                dist[n] = nd;
                heap.push(Entry { dist: nd, v: n });
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_surface, icosphere, SurfaceMesh, SurfaceParams, Vec3};
    use crate::initmap::build_u0;
    use std::sync::Arc;

    fn identity_field(mesh: SurfaceMesh) -> MapField {
        let mesh = Arc::new(mesh);
        let values = mesh.vertices.iter().map(|&v| SpherePoint::project(v).unwrap()).collect();
        MapField::new(Arc::clone(&mesh), values).unwrap()
    }

    fn reference_u0() -> MapField {
        let params = SurfaceParams { resolution: 1, ..SurfaceParams::default() };
        let mesh = Arc::new(build_surface(&params).unwrap());
        build_u0(&mesh, &params).unwrap()
    }

    #[test]
    fn constant_map_has_zero_residual() {
        let mesh = Arc::new(icosphere(1));
        let lap = CotanLaplacian::new(&mesh);
        let field = MapField::constant(mesh, SpherePoint::NORTH);
        assert_eq!(harmonic_residual(&lap, &field), 0.0);
    }

    #[test]
    fn initial_map_is_not_harmonic() {
        let field = reference_u0();
        let lap = CotanLaplacian::new(&field.mesh);
        assert!(harmonic_residual(&lap, &field) > 1e-2);
    }

    #[test]
    fn degree_of_identity_is_one() {
        let report = map_degree(&identity_field(icosphere(1))).unwrap();
        assert_eq!(report.degree, 1);
        assert!(report.residual < 1e-9);
    }

    #[test]
    fn degree_of_constant_is_zero() {
        let mesh = Arc::new(icosphere(1));
        let field = MapField::constant(mesh, SpherePoint::NORTH);
        let report = map_degree(&field).unwrap();
        assert_eq!(report.degree, 0);
        assert!(report.residual < 1e-12);
    }

    #[test]
    fn degree_respects_target_isometries() {
        // orientation-preserving rotation keeps the degree, a mirror flips it
        let field = identity_field(icosphere(1));
        let rotated = MapField::new(
            Arc::clone(&field.mesh),
            field.values.iter().map(|p| p.rotate_z(1, 3)).collect(),
        )
        .unwrap();
        let mirrored = MapField::new(
            Arc::clone(&field.mesh),
            field.values.iter().map(|p| p.mirror_z()).collect(),
        )
        .unwrap();
        assert_eq!(map_degree(&rotated).unwrap().degree, 1);
        assert_eq!(map_degree(&mirrored).unwrap().degree, -1);
    }

    #[test]
    fn degree_of_initial_map_is_zero() {
        // the image is three meridians plus the poles: every face image is
        // degenerate, so the area sum vanishes outright
        let report = map_degree(&reference_u0()).unwrap();
        assert_eq!(report.degree, 0);
        assert!(report.residual < 1e-9, "residual {}", report.residual);
    }

    #[test]
    fn antipodal_face_makes_the_degree_unreliable() {
        let mut field = identity_field(icosphere(0));
        // vertices 0 and 11 share two faces; an exactly antipodal image pair
        // collapses both image triangles to atan2(0, 0)
        field.values[11] = field.values[0].antipode();
        match map_degree(&field) {
            Err(AnalysisError::DegreeUnreliable { residual }) => assert!(residual > 0.1),
            other => panic!("expected unreliable degree, got {other:?}"),
        }
    }

    #[test]
    fn constant_north_containment_margin_is_a_quarter_turn() {
        let params = SurfaceParams { resolution: 1, ..SurfaceParams::default() };
        let mesh = Arc::new(build_surface(&params).unwrap());
        let field = MapField::constant(mesh, SpherePoint::NORTH);
        let region = PropellerRegion::standard(0.05).unwrap();
        let report = containment(&field, &region);
        let expected = PI / 2.0 - 0.05;
        assert!((report.min_margin - expected).abs() < 1e-12);
        assert!(report.offending_vertices.is_empty());
        // all four tag kinds appear (upper, lower, three tubes, junction)
        assert_eq!(report.margin_by_tag.len(), 6);
        for (_, m) in &report.margin_by_tag {
            assert!((m - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn initial_map_containment_margin_is_the_kept_arc_gap() {
        // the image meridians run along kept-arc centers; the binding samples
        // are the waist images on the equator, a sixth turn from the bands
        let field = reference_u0();
        let region = PropellerRegion::standard(0.05).unwrap();
        let report = containment(&field, &region);
        let expected = PI / 6.0 - 0.05;
        assert!((report.min_margin - expected).abs() < 1e-12, "margin {}", report.min_margin);
        assert!(report.offending_vertices.is_empty());
        let tube_min = report
            .margin_by_tag
            .iter()
            .filter(|(t, _)| matches!(t, RegionTag::Tube(_)))
            .map(|&(_, m)| m)
            .fold(f64::INFINITY, f64::min);
        assert!((tube_min - expected).abs() < 1e-12);
    }

    #[test]
    fn antipodal_edge_scores_worst_containment_margin() {
        let mut field = identity_field(icosphere(0));
        field.values[11] = field.values[0].antipode();
        let region = PropellerRegion::standard(0.05).unwrap();
        let report = containment(&field, &region);
        assert_eq!(report.min_margin, -0.05);
        assert!(report.offending_vertices.contains(&0));
        assert!(report.offending_vertices.contains(&11));
    }

    #[test]
    fn equator_points_of_initial_map() {
        let field = reference_u0();
        let report = find_equator_points(&field, 1e-6).unwrap();
        assert_eq!(report.points.len(), 3);
        assert_eq!(report.max_z, 0.0);
        assert!(report.max_cycle_error < 1e-15);
        let first = report.points[0].1;
        assert_eq!((first.x(), first.y(), first.z()), (1.0, 0.0, 0.0));
        for (i, &(v, _)) in report.points.iter().enumerate() {
            assert!(field.mesh.tube_waists[i].contains(&v));
        }
    }

    #[test]
    fn equator_points_reject_broken_symmetry() {
        let mut field = reference_u0();
        let waist1: Vec<usize> = field.mesh.tube_waists[1].clone();
        for v in waist1 {
            field.values[v] = SpherePoint::NORTH;
        }
        assert!(matches!(
            find_equator_points(&field, 1e-6),
            Err(AnalysisError::Inconsistent(_))
        ));
        let no_waists = identity_field(icosphere(0));
        assert!(matches!(
            find_equator_points(&no_waists, 1e-6),
            Err(AnalysisError::Inconsistent(_))
        ));
    }

    #[test]
    fn diameter_bound_frozen_values() {
        // energy 1/(8 pi) at delta 1/e: both factors are exactly 1
        let unit = courant_lebesgue_bound(1.0 / (8.0 * PI), (-1.0f64).exp()).unwrap();
        assert!((unit - 1.0).abs() < 1e-12);
        let desk = courant_lebesgue_bound(0.002, 0.01).unwrap();
        assert!((desk - 0.10447492919707929).abs() < 1e-15);
    }

    #[test]
    fn diameter_bound_monotone_and_scaling() {
        let at = |d: f64| courant_lebesgue_bound(0.002, d).unwrap();
        assert!(at(0.001) < at(0.01));
        assert!(at(0.01) < at(0.1));
        let single = courant_lebesgue_bound(0.37, 0.2).unwrap();
        let doubled = courant_lebesgue_bound(0.74, 0.2).unwrap();
        assert!((doubled / single - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn diameter_bound_domain_errors() {
        assert!(matches!(courant_lebesgue_bound(1.0, 1.0), Err(AnalysisError::Domain(_))));
        assert!(matches!(courant_lebesgue_bound(1.0, 1.5), Err(AnalysisError::Domain(_))));
        assert!(matches!(courant_lebesgue_bound(1.0, 0.0), Err(AnalysisError::Domain(_))));
        assert!(matches!(courant_lebesgue_bound(-1.0, 0.5), Err(AnalysisError::Domain(_))));
    }

    /// Planar disk of radius `scale` around the origin: a center vertex, four
    /// rings of 16 vertices at 0.7..1.0 of the radius, fan plus quad strips.
    fn disk_mesh(scale: f64) -> SurfaceMesh {
        let mut vertices = vec![Vec3::new(0.0, 0.0, 0.0)];
        for ring in [0.7, 0.8, 0.9, 1.0] {
            for j in 0..16 {
                let th = 2.0 * PI * j as f64 / 16.0;
                vertices.push(Vec3::new(
                    scale * ring * th.cos(),
                    scale * ring * th.sin(),
                    0.0,
                ));
            }
        }
        let mut faces = Vec::new();
        for j in 0..16 {
            faces.push([0, 1 + j, 1 + (j + 1) % 16]);
        }
        for ring in 0..3usize {
            for j in 0..16 {
                let a = 1 + 16 * ring + j;
                let b = 1 + 16 * ring + (j + 1) % 16;
                faces.push([a, b, b + 16]);
                faces.push([a, b + 16, a + 16]);
            }
        }
        let n = vertices.len();
        SurfaceMesh {
            vertices,
            faces,
            region_tags: vec![RegionTag::UpperSphere; n],
            rotation_map: (0..n).collect(),
            mirror_map: (0..n).collect(),
            tube_waists: Vec::new(),
            symmetry_order: 1,
        }
    }

    /// Field that swings the north pole through angle kappa * x about the
    /// second axis: enormous gradient, modest energy on a tiny disk.
    fn twist_field(mesh: Arc<SurfaceMesh>, kappa: f64) -> MapField {
        let values = mesh
            .vertices
            .iter()
            .map(|v| {
                let (s, c) = (kappa * v.x).sin_cos();
                SpherePoint::new(s, 0.0, c).unwrap()
            })
            .collect();
        MapField::new(mesh, values).unwrap()
    }

    #[test]
    fn annulus_check_passes_constant_fields() {
        let mesh = Arc::new(disk_mesh(1e-8));
        let lap = CotanLaplacian::new(&mesh);
        let field = MapField::constant(Arc::clone(&mesh), SpherePoint::NORTH);
        let report = check_courant_lebesgue(&lap, &field, 0, 1e-16).unwrap();
        assert!(report.pass);
        assert_eq!(report.diameter, 0.0);
        assert_eq!(report.bound, 0.0);
        assert!(report.annuli_scored > 0);
    }

    #[test]
    fn annulus_check_fails_a_wild_map_at_deep_scale() {
        // energy ~0.25 gives a bound ~0.41, but every resolvable annulus
        // swings the image through a chord over 0.55: honestly out of bounds
        let mesh = Arc::new(disk_mesh(1e-8));
        let lap = CotanLaplacian::new(&mesh);
        let field = twist_field(Arc::clone(&mesh), 4e7);
        let energy = dirichlet_energy_with(&lap, &field);
        assert!((0.2..0.3).contains(&energy), "energy {energy}");
        let report = check_courant_lebesgue(&lap, &field, 0, 1e-16).unwrap();
        assert!(!report.pass);
        assert!((0.3..0.5).contains(&report.bound), "bound {}", report.bound);
        assert!(report.diameter > 0.5, "diameter {}", report.diameter);
    }

    #[test]
    fn annulus_check_reports_unresolvable_radii() {
        let mesh = Arc::new(disk_mesh(1e-8));
        let lap = CotanLaplacian::new(&mesh);
        let field = twist_field(Arc::clone(&mesh), 4e7);
        // sqrt(delta) = 1e-15 sits far inside the innermost ring
        assert!(matches!(
            check_courant_lebesgue(&lap, &field, 0, 1e-30),
            Err(AnalysisError::Resolution(_))
        ));
        assert!(matches!(
            check_courant_lebesgue(&lap, &field, 0, 1.0),
            Err(AnalysisError::Domain(_))
        ));
    }
}
