use super::mesh::SurfaceMesh;
use std::collections::HashMap;

/// One undirected edge with its cotangent weight.
#[derive(Debug, Clone, Copy)]
pub struct WeightedEdge {
    pub a: usize,
    pub b: usize,
    pub w: f64,
}

/// Cotangent Laplacian with lumped (barycentric) vertex masses.
///
/// Edge order and neighbor order are sorted by index, so every sum taken over
/// this structure is bitwise reproducible across runs.
#[derive(Debug, Clone)]
pub struct CotanLaplacian {
    /// Undirected edges, a < b, sorted lexicographically.
    pub edges: Vec<WeightedEdge>,
    /// Lumped vertex mass: one third of the incident face area.
    pub mass: Vec<f64>,
    /// Number of edges whose cotangent weight came out negative (obtuse
    /// pairs); diagnostic only, the weights are used as-is.
    pub negative_weight_edges: usize,
    offsets: Vec<usize>,
    neighbors: Vec<(usize, f64)>,
}

impl CotanLaplacian {
    pub fn new(mesh: &SurfaceMesh) -> Self {
        let nv = mesh.vertex_count();
        let mut weights: HashMap<(usize, usize), f64> = HashMap::with_capacity(mesh.face_count() * 3 / 2);
        let mut mass = vec![0.0f64; nv];

        for f in &mesh.faces {
            let p = [mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]];
            for corner in 0..3 {
                let (i, j, k) = (f[corner], f[(corner + 1) % 3], f[(corner + 2) % 3]);
                let u = p[(corner + 1) % 3] - p[corner];
                let v = p[(corner + 2) % 3] - p[corner];
                let cross = u.cross(v).norm();
                let cot = u.dot(v) / cross.max(f64::MIN_POSITIVE);
                // half-cotangent of the corner angle goes to the opposite edge
                let key = if j < k { (j, k) } else { (k, j) };
                *weights.entry(key).or_insert(0.0) += 0.5 * cot;
                // face area is cross/2; barycentric lumping gives each corner a third
                mass[i] += cross / 6.0;
            }
        }

        let mut edges: Vec<WeightedEdge> = weights
            .into_iter()
            .map(|((a, b), w)| WeightedEdge { a, b, w })
            .collect();
        edges.sort_unstable_by_key(|e| (e.a, e.b));
        let negative_weight_edges = edges.iter().filter(|e| e.w < 0.0).count();

        let mut degree = vec![0usize; nv];
        for e in &edges {
            degree[e.a] += 1;
            degree[e.b] += 1;
        }
        let mut offsets = vec![0usize; nv + 1];
        for v in 0..nv {
            offsets[v + 1] = offsets[v] + degree[v];
        }
        let mut cursor = offsets.clone();
        let mut neighbors = vec![(0usize, 0.0f64); offsets[nv]];
        for e in &edges {
            neighbors[cursor[e.a]] = (e.b, e.w);
            cursor[e.a] += 1;
            neighbors[cursor[e.b]] = (e.a, e.w);
            cursor[e.b] += 1;
        }
        for v in 0..nv {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable_by_key(|&(n, _)| n);
        }

        CotanLaplacian { edges, mass, negative_weight_edges, offsets, neighbors }
    }

    pub fn vertex_count(&self) -> usize {
        self.mass.len()
    }

    /// Weighted neighbors of `v`, ascending by index.
    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Stability bound for explicit stepping: max over vertices of
    /// (sum of |weights|) / mass.
    pub fn max_stiffness(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for v in 0..self.vertex_count() {
            let row: f64 = self.neighbors(v).iter().map(|&(_, w)| w.abs()).sum();
            worst = worst.max(row / self.mass[v]);
        }
        worst
    }
}
