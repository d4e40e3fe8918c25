//! Artifact writers and readers: Wavefront OBJ for the surface, legacy ASCII
//! VTK for map snapshots, the flow history CSV, and a JSON checkpoint.
//!
//! Floats are written with the shortest round-trip representation, so every
//! artifact is byte-identical across runs of the same configuration and the
//! checkpoint restores field values bitwise.

use crate::flow::StepRecord;
use crate::geometry::{SurfaceMesh, SurfaceParams, UNIT_NORM_TOL};
use crate::initmap::MapField;
use crate::region::PropellerRegion;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("checkpoint is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint version {got} is not supported (expected {expected})")]
    Version { got: u32, expected: u32 },
    #[error("checkpoint is corrupt: {0}")]
    Corrupt(String),
}

/// Wavefront OBJ: vertex positions and 1-based triangle faces.
pub fn write_obj(path: &Path, mesh: &SurfaceMesh) -> Result<(), IoError> {
    let mut out = BufWriter::new(File::create(path)?);
    for v in &mesh.vertices {
        writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for f in &mesh.faces {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    out.flush()?;
    Ok(())
}

/// Legacy ASCII VTK polydata: the surface with the mapped image attached as
/// a point vector field and, when a region is given, the containment margin
/// of each vertex image as a point scalar.
pub fn write_vtk(
    path: &Path,
    field: &MapField,
    region: Option<&PropellerRegion>,
) -> Result<(), IoError> {
    let mesh = &field.mesh;
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "sphere-valued map on the model surface")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET POLYDATA")?;
    writeln!(out, "POINTS {} double", mesh.vertex_count())?;
    for v in &mesh.vertices {
        writeln!(out, "{} {} {}", v.x, v.y, v.z)?;
    }
    writeln!(out, "POLYGONS {} {}", mesh.face_count(), 4 * mesh.face_count())?;
    for f in &mesh.faces {
        writeln!(out, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    writeln!(out, "POINT_DATA {}", mesh.vertex_count())?;
    writeln!(out, "VECTORS image double")?;
    for p in &field.values {
        writeln!(out, "{} {} {}", p.x(), p.y(), p.z())?;
    }
    if let Some(region) = region {
        writeln!(out, "SCALARS margin double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for p in &field.values {
            writeln!(out, "{}", region.distance_to_forbidden(*p) - region.epsilon)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub const HISTORY_HEADER: &str = "step,t,energy,max_tension,equivariance_error,min_margin";

/// Flow history as CSV, one row per recorded step.
pub fn write_history_csv(path: &Path, history: &[StepRecord]) -> Result<(), IoError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{HISTORY_HEADER}")?;
    for r in history {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.step, r.t, r.energy, r.max_tension, r.equivariance_error, r.min_margin
        )?;
    }
    out.flush()?;
    Ok(())
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to rebuild a run state: the surface parameters (the mesh
/// is deterministic given these), the flow clock, and the field values.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub step: usize,
    pub time: f64,
    pub params: SurfaceParams,
    pub values: Vec<crate::geometry::SpherePoint>,
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<(), IoError> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, checkpoint)?;
    out.flush()?;
    Ok(())
}

/// Loads and revalidates a checkpoint. Deserialization bypasses the sphere
/// point constructor, so unit norms are checked here.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, IoError> {
    let file = File::open(path)?;
    let checkpoint: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
    if checkpoint.version != CHECKPOINT_VERSION {
        return Err(IoError::Version { got: checkpoint.version, expected: CHECKPOINT_VERSION });
    }
    for (i, p) in checkpoint.values.iter().enumerate() {
        let norm = p.vec().norm();
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(IoError::Corrupt(format!("value {i} has norm {norm}, not a sphere point")));
        }
    }
    checkpoint.params.validate().map_err(|e| IoError::Corrupt(e.to_string()))?;
    Ok(checkpoint)
}
