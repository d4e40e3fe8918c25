use super::sphere::rotate_z_vec;
use super::Vec3;
use std::collections::HashMap;
use thiserror::Error;

/// Where a vertex sits on the built surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum RegionTag {
    UpperSphere,
    LowerSphere,
    /// On tube `i` (0-based); the vertex height coordinate is its ambient z.
    Tube(usize),
    /// On a junction sleeve between a sphere hole rim and a tube end.
    Junction,
}

/// Construction parameters for the genus-2p surface.
///
/// The surface is two unit spheres with centers 2 + d apart on the x3-axis
/// (placed symmetrically about z = 0), joined by 2p+1 vertical cylindrical
/// tubes of radius r and height 2R. Each tube attaches through a geodesic
/// hole of radius `hole_radius` cut around an equatorial attachment point;
/// attachment longitudes are 2 pi k / (2p+1).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SurfaceParams {
    /// Tube radius r, in (0, 1).
    pub tube_radius: f64,
    /// Tube half-height R, in (1, inf); the tube spans z in [-R, R].
    pub tube_half_height: f64,
    /// Gap d > 0 between the two spheres along the axis (centers are 2+d apart).
    pub sphere_gap: f64,
    /// Geodesic radius of each attachment hole, in (0, pi/12); must exceed r.
    pub hole_radius: f64,
    /// p >= 1; the surface has 2p+1 tubes and genus 2p.
    pub half_genus: usize,
    /// Subdivision level >= 1 (1 = coarse, 2 = medium, 3 = fine, ...).
    pub resolution: u32,
}

impl Default for SurfaceParams {
    /// Reference configuration: r = 0.1, R = 5, three tubes, medium resolution.
    /// d = 2(R-1) lines the sphere equators up with the tube end planes, which
    /// keeps the junction sleeves short and the explicit flow step usable.
    fn default() -> Self {
        SurfaceParams {
            tube_radius: 0.1,
            tube_half_height: 5.0,
            sphere_gap: 8.0,
            hole_radius: 0.2,
            half_genus: 1,
            resolution: 2,
        }
    }
}

impl SurfaceParams {
    pub fn tube_count(&self) -> usize {
        2 * self.half_genus + 1
    }

    /// Segments around each tube (and around each hole rim) at this resolution.
    pub fn tube_segments(&self) -> usize {
        4 * (self.resolution as usize + 2)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let constraint = |c: &str| Err(MeshError::InvalidParams { constraint: c.to_string() });
        if !(self.tube_radius > 0.0 && self.tube_radius < 1.0) {
            return constraint("tube_radius must lie in (0, 1)");
        }
        if !(self.tube_half_height > 1.0 && self.tube_half_height.is_finite()) {
            return constraint("tube_half_height must lie in (1, inf)");
        }
        if !(self.sphere_gap > 0.0 && self.sphere_gap.is_finite()) {
            return constraint("sphere_gap must be positive");
        }
        let eps_max = std::f64::consts::PI / 12.0;
        if !(self.hole_radius > 0.0 && self.hole_radius < eps_max) {
            return constraint("hole_radius must lie in (0, pi/12)");
        }
        if self.tube_radius >= self.hole_radius {
            return constraint("tube_radius must be smaller than hole_radius (tube must fit through its attachment hole)");
        }
        if self.half_genus < 1 {
            return constraint("half_genus must be at least 1");
        }
        if self.resolution < 1 {
            return constraint("resolution must be at least 1");
        }
        // 2p+1 removed arcs of length pi/(2p+1), each widened by the hole
        // radius on both sides, must not swallow the kept arcs between them.
        let spacing_bound = std::f64::consts::PI / (2.0 * self.tube_count() as f64);
        if self.hole_radius >= spacing_bound {
            return constraint("hole_radius too large: widened attachment arcs would overlap");
        }
        if self.tube_segments() < 12 {
            return constraint("resolution too coarse: fewer than 12 segments around each tube");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid surface parameters: {constraint}")]
    InvalidParams { constraint: String },
    #[error("mesh is not a closed oriented surface: {reason}")]
    NotClosed { reason: String },
    #[error("degenerate face {face} with area {area:.3e}")]
    DegenerateFace { face: usize, area: f64 },
    #[error("symmetry bookkeeping broken: {reason}")]
    BrokenSymmetry { reason: String },
    #[error("unexpected Euler characteristic {got}, expected {expected}")]
    WrongEulerCharacteristic { got: i64, expected: i64 },
}

/// A closed oriented triangle mesh with exact symmetry permutations.
///
/// `rotation_map` realizes the order-`symmetry_order` rotation about the
/// x3-axis as a vertex permutation; `mirror_map` realizes (x, y, z) ->
/// (x, y, -z). Both are exact index maps produced by the builder, never
/// recovered by position snapping.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SurfaceMesh {
    pub vertices: Vec<Vec3>,
    /// Triangles, consistently oriented with outward normals.
    pub faces: Vec<[usize; 3]>,
    pub region_tags: Vec<RegionTag>,
    pub rotation_map: Vec<usize>,
    pub mirror_map: Vec<usize>,
    /// For each tube, the cyclically ordered vertex loop at z = 0. The loops
    /// are aligned: `rotation_map[tube_waists[k][j]] == tube_waists[k+1][j]`.
    pub tube_waists: Vec<Vec<usize>>,
    /// Order of the cyclic symmetry (2p+1 for built surfaces, 1 otherwise).
    pub symmetry_order: usize,
}

impl SurfaceMesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Undirected edge list, each pair once with a < b, sorted.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::with_capacity(self.faces.len() * 3 / 2);
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if a < b {
                    edges.push((a, b));
                } else {
                    edges.push((b, a));
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn euler_characteristic(&self) -> i64 {
        let v = self.vertex_count() as i64;
        let e = self.undirected_edges().len() as i64;
        let f = self.face_count() as i64;
        v - e + f
    }

    pub fn genus(&self) -> i64 {
        (2 - self.euler_characteristic()) / 2
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f];
        let u = self.vertices[b] - self.vertices[a];
        let v = self.vertices[c] - self.vertices[a];
        u.cross(v).norm() / 2.0
    }

    pub fn total_area(&self) -> f64 {
        (0..self.face_count()).map(|f| self.face_area(f)).sum()
    }

    /// Max deviation of the vertex permutations from the exact isometries they
    /// are supposed to realize, in ambient Euclidean norm.
    pub fn symmetry_residual(&self) -> f64 {
        let angle = 2.0 * std::f64::consts::PI / self.symmetry_order as f64;
        let (s, c) = angle.sin_cos();
        let mut worst: f64 = 0.0;
        for (v, &p) in self.vertices.iter().enumerate() {
            let rot_image = self.vertices[self.rotation_map[v]];
            worst = worst.max(rot_image.distance(rotate_z_vec(p, s, c)));
            let mir_image = self.vertices[self.mirror_map[v]];
            worst = worst.max(mir_image.distance(Vec3::new(p.x, p.y, -p.z)));
        }
        worst
    }

    /// Structural validation: closed, consistently oriented, non-degenerate,
    /// permutations and tags coherent, Euler characteristic as implied by the
    /// tube count.
    pub fn validate(&self) -> Result<(), MeshError> {
        let nv = self.vertex_count();
        if self.region_tags.len() != nv || self.rotation_map.len() != nv || self.mirror_map.len() != nv {
            return Err(MeshError::BrokenSymmetry {
                reason: "per-vertex table lengths disagree with vertex count".into(),
            });
        }

        // Each directed edge must appear exactly once: closed + oriented.
        let mut directed: HashMap<(usize, usize), u32> = HashMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::DegenerateFace { face: fi, area: 0.0 });
            }
            for k in 0..3 {
                *directed.entry((f[k], f[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        for (&(a, b), &n) in &directed {
            if n != 1 {
                return Err(MeshError::NotClosed {
                    reason: format!("directed edge ({a}, {b}) appears {n} times"),
                });
            }
            if !directed.contains_key(&(b, a)) {
                return Err(MeshError::NotClosed {
                    reason: format!("edge ({a}, {b}) has no opposite face"),
                });
            }
        }

        for f in 0..self.face_count() {
            let area = self.face_area(f);
            if !(area > 1e-14) {
                return Err(MeshError::DegenerateFace { face: f, area });
            }
        }

        // Permutation structure.
        let order = self.symmetry_order.max(1);
        let mut seen = vec![false; nv];
        for &im in &self.rotation_map {
            if im >= nv || seen[im] {
                return Err(MeshError::BrokenSymmetry { reason: "rotation_map is not a permutation".into() });
            }
            seen[im] = true;
        }
        for v in 0..nv {
            let mut w = v;
            for _ in 0..order {
                w = self.rotation_map[w];
            }
            if w != v {
                return Err(MeshError::BrokenSymmetry {
                    reason: format!("rotation_map^{order} != id at vertex {v}"),
                });
            }
            if self.mirror_map[self.mirror_map[v]] != v {
                return Err(MeshError::BrokenSymmetry {
                    reason: format!("mirror_map is not an involution at vertex {v}"),
                });
            }
        }

        // Tag coherence under the symmetries.
        let tubes = self.tube_waists.len();
        for v in 0..nv {
            let rot_ok = match (self.region_tags[v], self.region_tags[self.rotation_map[v]]) {
                (RegionTag::Tube(i), RegionTag::Tube(j)) => tubes == 0 || j == (i + 1) % tubes,
                (a, b) => a == b,
            };
            if !rot_ok {
                return Err(MeshError::BrokenSymmetry {
                    reason: format!("rotation does not permute tube tags cyclically at vertex {v}"),
                });
            }
            let mir_ok = if self.mirror_map[v] == v {
                // only vertices on the z = 0 plane (or control meshes with the
                // identity mirror) may be fixed
                true
            } else {
                match (self.region_tags[v], self.region_tags[self.mirror_map[v]]) {
                    (RegionTag::UpperSphere, RegionTag::LowerSphere) => true,
                    (RegionTag::LowerSphere, RegionTag::UpperSphere) => true,
                    (RegionTag::Tube(i), RegionTag::Tube(j)) => i == j,
                    (RegionTag::Junction, RegionTag::Junction) => true,
                    _ => false,
                }
            };
            if !mir_ok {
                return Err(MeshError::BrokenSymmetry {
                    reason: format!("mirror does not swap sphere tags at vertex {v}"),
                });
            }
        }

        // Waist loops: fixed pointwise by the mirror, aligned under rotation,
        // and actual edge loops of the mesh.
        for (k, waist) in self.tube_waists.iter().enumerate() {
            let next = &self.tube_waists[(k + 1) % tubes.max(1)];
            for (j, &w) in waist.iter().enumerate() {
                if self.mirror_map[w] != w {
                    return Err(MeshError::BrokenSymmetry {
                        reason: format!("waist vertex {w} of tube {k} not fixed by mirror"),
                    });
                }
                if tubes > 0 && self.rotation_map[w] != next[j] {
                    return Err(MeshError::BrokenSymmetry {
                        reason: format!("waist of tube {k} not aligned with tube {}", (k + 1) % tubes),
                    });
                }
                let succ = waist[(j + 1) % waist.len()];
                if !directed.contains_key(&(w, succ)) && !directed.contains_key(&(succ, w)) {
                    return Err(MeshError::BrokenSymmetry {
                        reason: format!("waist loop of tube {k} is not an edge loop at vertex {w}"),
                    });
                }
            }
        }

        let expected_chi = if tubes > 0 { 2 - 2 * (tubes as i64 - 1) } else { 2 };
        let chi = self.euler_characteristic();
        if chi != expected_chi {
            return Err(MeshError::WrongEulerCharacteristic { got: chi, expected: expected_chi });
        }
        Ok(())
    }
}
