//! The initial sphere-valued map: poles on the spheres, meridians along the
//! tubes, plus the discrete Dirichlet energy and equivariance measurements
//! used throughout the flow.

use crate::geometry::{CotanLaplacian, RegionTag, SpherePoint, SurfaceMesh, SurfaceParams};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InitError {
    #[error("mesh does not match parameters: {0}")]
    MeshMismatch(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// A sphere-valued vertex field over a fixed surface mesh.
#[derive(Debug, Clone)]
pub struct MapField {
    pub mesh: Arc<SurfaceMesh>,
    pub values: Vec<SpherePoint>,
}

impl MapField {
    pub fn new(mesh: Arc<SurfaceMesh>, values: Vec<SpherePoint>) -> Result<Self, InitError> {
        if values.len() != mesh.vertex_count() {
            return Err(InitError::MeshMismatch(format!(
                "{} values for {} vertices",
                values.len(),
                mesh.vertex_count()
            )));
        }
        Ok(MapField { mesh, values })
    }

    pub fn constant(mesh: Arc<SurfaceMesh>, value: SpherePoint) -> Self {
        let values = vec![value; mesh.vertex_count()];
        MapField { mesh, values }
    }

    /// Worst deviation from exact equivariance: the geodesic mismatch between
    /// mapping then rotating (resp. reflecting) and rotating (resp.
    /// reflecting) then mapping, maximized over vertices and both symmetries.
    pub fn equivariance_error(&self) -> f64 {
        let order = self.mesh.symmetry_order as u32;
        let mut worst: f64 = 0.0;
        for v in 0..self.values.len() {
            let rot = self.values[self.mesh.rotation_map[v]]
                .geodesic_distance(self.values[v].rotate_z(1, order));
            let mir = self.values[self.mesh.mirror_map[v]]
                .geodesic_distance(self.values[v].mirror_z());
            worst = worst.max(rot).max(mir);
        }
        worst
    }
}

/// Builds the initial map: upper sphere to the north pole, lower sphere to the
/// south pole, tube k to the k-th rotated copy of the prime meridian, with the
/// waist pinned to the Equator. The lower half is assigned as the exact mirror
/// of the upper half so the reflection symmetry holds bitwise.
pub fn build_u0(mesh: &Arc<SurfaceMesh>, params: &SurfaceParams) -> Result<MapField, InitError> {
    params
        .validate()
        .map_err(|e| InitError::InvalidParams(e.to_string()))?;
    if mesh.symmetry_order != params.tube_count() {
        return Err(InitError::MeshMismatch(format!(
            "mesh symmetry order {} vs {} tubes",
            mesh.symmetry_order,
            params.tube_count()
        )));
    }
    if mesh.tube_waists.len() != params.tube_count() {
        return Err(InitError::MeshMismatch(format!(
            "{} waist loops for {} tubes",
            mesh.tube_waists.len(),
            params.tube_count()
        )));
    }

    let r_half = params.tube_half_height;
    let order = params.tube_count();
    let mut values = vec![SpherePoint::NORTH; mesh.vertex_count()];
    for v in 0..mesh.vertex_count() {
        let z = mesh.vertices[v].z;
        if z < 0.0 {
            continue; // assigned by the mirror pass below
        }
        values[v] = match mesh.region_tags[v] {
            RegionTag::UpperSphere => SpherePoint::NORTH,
            RegionTag::LowerSphere => {
                return Err(InitError::MeshMismatch(format!(
                    "lower-sphere vertex {v} at nonnegative height"
                )))
            }
            RegionTag::Junction => SpherePoint::NORTH,
            RegionTag::Tube(k) => meridian_point(k, order, z, r_half),
        };
    }
    for v in 0..mesh.vertex_count() {
        let m = mesh.mirror_map[v];
        if m != v && mesh.vertices[v].z > 0.0 {
            values[m] = values[v].mirror_z();
        }
    }
    Ok(MapField { mesh: Arc::clone(mesh), values })
}

/// Point at arc parameter t in [-R, R] along the meridian of tube k: latitude
/// angle pi t / (2R) from the Equator, at longitude 2 pi k / order. At t = 0
/// this is exactly on the Equator (z component bitwise zero).
fn meridian_point(k: usize, order: usize, t: f64, r_half: f64) -> SpherePoint {
    let (s_lat, c_lat) = (PI * t / (2.0 * r_half)).sin_cos();
    let (s_lon, c_lon) = (2.0 * PI * k as f64 / order as f64).sin_cos();
    SpherePoint::from_unit_unchecked(crate::geometry::Vec3::new(
        c_lon * c_lat,
        s_lon * c_lat,
        s_lat,
    ))
}

/// Discrete Dirichlet energy: half the weighted sum of squared edge
/// differences. Edges are traversed in their fixed sorted order so the sum is
/// reproducible bit for bit.
pub fn dirichlet_energy_with(lap: &CotanLaplacian, field: &MapField) -> f64 {
    let mut total = 0.0;
    for e in &lap.edges {
        let d = field.values[e.a].vec() - field.values[e.b].vec();
        total += e.w * d.norm2();
    }
    0.5 * total
}

pub fn dirichlet_energy(field: &MapField) -> f64 {
    let lap = CotanLaplacian::new(&field.mesh);
    dirichlet_energy_with(&lap, field)
}

/// Energy split by the source region an edge touches, for junction-overhead
/// diagnostics. Edges with endpoints in different regions count as `crossing`.
#[derive(Debug, Clone, Copy, Default)]
pub struct EnergyByRegion {
    pub sphere: f64,
    pub tube: f64,
    pub junction: f64,
    pub crossing: f64,
}

pub fn energy_by_region(lap: &CotanLaplacian, field: &MapField) -> EnergyByRegion {
    let mut out = EnergyByRegion::default();
    for e in &lap.edges {
        let d = field.values[e.a].vec() - field.values[e.b].vec();
        let half = 0.5 * e.w * d.norm2();
        let ta = field.mesh.region_tags[e.a];
        let tb = field.mesh.region_tags[e.b];
        let slot = match (ta, tb) {
            (RegionTag::Tube(i), RegionTag::Tube(j)) if i == j => &mut out.tube,
            (RegionTag::UpperSphere, RegionTag::UpperSphere) => &mut out.sphere,
            (RegionTag::LowerSphere, RegionTag::LowerSphere) => &mut out.sphere,
            (RegionTag::Junction, RegionTag::Junction) => &mut out.junction,
            _ => &mut out.crossing,
        };
        *slot += half;
    }
    out
}

/// Closed-form ceiling for the initial map's tube energy: each of the 2p+1
/// tubes contributes pi^3 r^2 / (4R).
pub fn energy_bound(params: &SurfaceParams) -> f64 {
    let tubes = params.tube_count() as f64;
    tubes * PI.powi(3) * params.tube_radius * params.tube_radius / (4.0 * params.tube_half_height)
}

/// Maximum geodesic deviation of the field from exact equivariance under the
/// mesh's rotation and reflection symmetries.
pub fn check_equivariance(field: &MapField) -> f64 {
    field.equivariance_error()
}
