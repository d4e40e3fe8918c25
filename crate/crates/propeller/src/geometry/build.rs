use super::mesh::{MeshError, RegionTag, SurfaceMesh, SurfaceParams};
use super::Vec3;
use std::collections::HashMap;
use std::f64::consts::PI;

const UNASSIGNED: usize = usize::MAX;

/// Accumulates the upper half of the surface (z >= 0) plus symmetry
/// bookkeeping; the lower half is produced by exact reflection afterwards.
struct Builder {
    verts: Vec<Vec3>,
    tags: Vec<RegionTag>,
    faces: Vec<[usize; 3]>,
    /// Image under the 2 pi / order rotation, assigned piece by piece.
    rot: Vec<usize>,
}

impl Builder {
    fn vertex(&mut self, p: Vec3, tag: RegionTag) -> usize {
        self.verts.push(p);
        self.tags.push(tag);
        self.rot.push(UNASSIGNED);
        self.verts.len() - 1
    }

    fn tri(&mut self, a: usize, b: usize, c: usize) {
        self.faces.push([a, b, c]);
    }

    /// Quads between two closed rings of equal length (ring_b index-aligned
    /// with ring_a). Winding is repaired globally later.
    fn strip(&mut self, ring_a: &[usize], ring_b: &[usize]) {
        let n = ring_a.len();
        for j in 0..n {
            let (a0, a1) = (ring_a[j], ring_a[(j + 1) % n]);
            let (b0, b1) = (ring_b[j], ring_b[(j + 1) % n]);
            self.tri(a0, a1, b1);
            self.tri(a0, b1, b0);
        }
    }

    /// Connects a ring to one of half its length (outer[2j] aligned with
    /// inner[j]), used when climbing toward a pole.
    fn reduction_strip(&mut self, outer: &[usize], inner: &[usize]) {
        let n = inner.len();
        for j in 0..n {
            let o0 = outer[2 * j];
            let o1 = outer[2 * j + 1];
            let o2 = outer[(2 * j + 2) % (2 * n)];
            let i0 = inner[j];
            let i1 = inner[(j + 1) % n];
            self.tri(o0, o1, i0);
            self.tri(o1, i1, i0);
            self.tri(o1, o2, i1);
        }
    }

    fn fan(&mut self, ring: &[usize], apex: usize) {
        let n = ring.len();
        for j in 0..n {
            self.tri(ring[j], ring[(j + 1) % n], apex);
        }
    }
}

/// Sizing constants derived from the parameters once per build.
struct Sizing {
    order: usize,
    n_seg: usize,
    n_top: usize,
    n_side: usize,
    /// Half angular width of one attachment sector.
    delta: f64,
    /// Half latitude of the equatorial band that carries the O-grids.
    lam0: f64,
    /// Target edge length on the spheres.
    h_sphere: f64,
    /// Target ring spacing along the tubes and sleeves.
    h_tube: f64,
    /// Height of the upper sphere center.
    zc: f64,
}

fn sizing(p: &SurfaceParams) -> Result<Sizing, MeshError> {
    let order = p.tube_count();
    let n_seg = p.tube_segments();
    let delta = PI / order as f64;
    let lam0 = (1.7 * p.hole_radius).clamp(0.35f64.min(0.75 * delta), 0.75 * delta);
    if p.hole_radius > 0.85 * lam0 {
        return Err(MeshError::InvalidParams {
            constraint: "hole_radius too large for the equatorial band at this tube count".into(),
        });
    }
    let half = n_seg / 2;
    let frac = delta / (delta + lam0);
    let n_top = ((half as f64 * frac).round() as usize).clamp(2, half - 2);
    let n_side = half - n_top;
    let h_sphere = 0.9 * (2.0 * delta / n_top as f64).min(2.0 * lam0 / n_side as f64);
    let chord = 2.0 * p.tube_radius * (PI / n_seg as f64).sin();
    let h_tube = 2.0 * chord;
    let zc = 1.0 + p.sphere_gap / 2.0;
    Ok(Sizing { order, n_seg, n_top, n_side, delta, lam0, h_sphere, h_tube, zc })
}

/// Latitude ring on the upper sphere: vertex j at azimuth
/// `start_az + 2 pi j / n`.
fn sphere_ring(b: &mut Builder, zc: f64, lat: f64, n: usize, start_az: f64, tag: RegionTag) -> Vec<usize> {
    let (sl, cl) = lat.sin_cos();
    (0..n)
        .map(|j| {
            let az = start_az + 2.0 * PI * j as f64 / n as f64;
            let (sa, ca) = az.sin_cos();
            b.vertex(Vec3::new(cl * ca, cl * sa, zc + sl), tag)
        })
        .collect()
}

fn assign_ring_rotation(b: &mut Builder, ring: &[usize], order: usize) {
    let shift = ring.len() / order;
    for (j, &v) in ring.iter().enumerate() {
        b.rot[v] = ring[(j + shift) % ring.len()];
    }
}

/// Climbs from a base latitude ring to the pole, halving ring counts as the
/// circles shrink. Every created ring keeps a length divisible by `order`.
fn cap(b: &mut Builder, base: &[usize], base_lat: f64, dir: f64, zc: f64, s: &Sizing) {
    let h = s.h_sphere;
    let mut ring = base.to_vec();
    let mut lat = base_lat;
    loop {
        let rem = PI / 2.0 - dir * lat;
        if rem <= 1.7 * h || ring.len() <= 2 * s.order || ring.len() < 4 {
            let apex = b.vertex(Vec3::new(0.0, 0.0, zc + dir), RegionTag::UpperSphere);
            b.rot[apex] = apex;
            b.fan(&ring, apex);
            return;
        }
        let dlat = h.min(rem - h);
        let next_lat = lat + dir * dlat;
        let n = ring.len();
        let width_next = next_lat.cos() * 2.0 * PI / n as f64;
        let halve = n % 2 == 0 && (n / 2) % s.order == 0 && n / 2 >= 4 && width_next < 0.6 * h;
        let n_next = if halve { n / 2 } else { n };
        let next = sphere_ring(b, zc, next_lat, n_next, -s.delta, RegionTag::UpperSphere);
        assign_ring_rotation(b, &next, s.order);
        if halve {
            b.reduction_strip(&ring, &next);
        } else {
            b.strip(&ring, &next);
        }
        ring = next;
        lat = next_lat;
    }
}

/// Spherical interpolation between two unit directions.
fn slerp(a: Vec3, c: Vec3, t: f64) -> Vec3 {
    let dot = a.dot(c).clamp(-1.0, 1.0);
    let omega = dot.acos();
    if omega < 1e-9 {
        let v = a.scale(1.0 - t) + c.scale(t);
        return v.scale(1.0 / v.norm());
    }
    let so = omega.sin();
    a.scale(((1.0 - t) * omega).sin() / so) + c.scale((t * omega).sin() / so)
}

pub fn build_surface(params: &SurfaceParams) -> Result<SurfaceMesh, MeshError> {
    params.validate()?;
    let s = sizing(params)?;
    let (r, eps, zc) = (params.tube_radius, params.hole_radius, s.zc);
    let big_r = params.tube_half_height;
    let mut b = Builder { verts: Vec::new(), tags: Vec::new(), faces: Vec::new(), rot: Vec::new() };

    // Shared latitude rings bounding the equatorial band of the upper sphere.
    let t_tot = s.order * s.n_top;
    let top_ring = sphere_ring(&mut b, zc, s.lam0, t_tot, -s.delta, RegionTag::UpperSphere);
    let bot_ring = sphere_ring(&mut b, zc, -s.lam0, t_tot, -s.delta, RegionTag::UpperSphere);
    assign_ring_rotation(&mut b, &top_ring, s.order);
    assign_ring_rotation(&mut b, &bot_ring, s.order);

    // Shared sector-boundary meridians (interior vertices only), meridian k at
    // longitude theta_k - delta.
    let mut meridians: Vec<Vec<usize>> = Vec::with_capacity(s.order);
    for k in 0..s.order {
        let az = 2.0 * PI * k as f64 / s.order as f64 - s.delta;
        let (sa, ca) = az.sin_cos();
        let mut ids = Vec::with_capacity(s.n_side - 1);
        for i in 1..s.n_side {
            let lat = -s.lam0 + 2.0 * s.lam0 * i as f64 / s.n_side as f64;
            let (sl, cl) = lat.sin_cos();
            ids.push(b.vertex(Vec3::new(cl * ca, cl * sa, zc + sl), RegionTag::UpperSphere));
        }
        meridians.push(ids);
    }
    for k in 0..s.order {
        let next = &meridians[(k + 1) % s.order];
        for (i, &v) in meridians[k].iter().enumerate() {
            b.rot[v] = next[i];
        }
    }

    // Per-sector pieces. `sector_rims[k][j]`: hole rim vertex at angle
    // t_j = 2 pi j / n_seg measured from +z toward increasing longitude.
    let mut sector_rims: Vec<Vec<usize>> = Vec::with_capacity(s.order);
    let mut ogrid: Vec<Vec<Vec<usize>>> = Vec::with_capacity(s.order);
    let mut sleeves: Vec<Vec<Vec<usize>>> = Vec::with_capacity(s.order);
    let mut tubes: Vec<Vec<Vec<usize>>> = Vec::with_capacity(s.order);

    let n_tube_rings = ((big_r / s.h_tube).ceil() as usize).max(2);
    let rim_center_off = eps.cos();
    let sleeve_path = {
        let rim_center = Vec3::new(rim_center_off, 0.0, zc);
        let tube_end = Vec3::new(1.0, 0.0, big_r);
        rim_center.distance(tube_end) + (PI / 2.0) * 0.5 * (eps.sin() + r)
    };
    let n_sleeve = ((sleeve_path / s.h_tube).ceil() as usize).max(2);

    for k in 0..s.order {
        let theta = 2.0 * PI * k as f64 / s.order as f64;
        let (st, ct) = theta.sin_cos();
        let p_hat = Vec3::new(ct, st, 0.0);
        let e2 = Vec3::new(-st, ct, 0.0);

        // Hole rim on the sphere.
        let rim: Vec<usize> = (0..s.n_seg)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / s.n_seg as f64;
                let q = p_hat.scale(eps.cos()) + (Vec3::new(0.0, 0.0, t.cos()) + e2.scale(t.sin())).scale(eps.sin());
                b.vertex(Vec3::new(q.x, q.y, zc + q.z), RegionTag::UpperSphere)
            })
            .collect();

        // Rectangular sector boundary, walked in the same rotational sense as
        // the rim: along the top toward increasing longitude, down the right
        // meridian, back along the bottom, up the left meridian.
        let mut bnd: Vec<usize> = Vec::with_capacity(s.n_seg);
        for j in 0..=s.n_top {
            bnd.push(top_ring[(k * s.n_top + j) % t_tot]);
        }
        let right = &meridians[(k + 1) % s.order];
        for i in (0..s.n_side - 1).rev() {
            bnd.push(right[i]);
        }
        for j in (0..=s.n_top).rev() {
            bnd.push(bot_ring[(k * s.n_top + j) % t_tot]);
        }
        for &v in &meridians[k] {
            bnd.push(v);
        }
        debug_assert_eq!(bnd.len(), s.n_seg);

        // Align rim index 0 (top of the rim) with the middle of the top side.
        let off = s.n_top / 2;

        let center = Vec3::new(0.0, 0.0, zc);
        let gaps: Vec<f64> = (0..s.n_seg)
            .map(|j| {
                let a = b.verts[rim[j]] - center;
                let c = b.verts[bnd[(j + off) % s.n_seg]] - center;
                a.dot(c).clamp(-1.0, 1.0).acos()
            })
            .collect();
        let max_gap = gaps.iter().cloned().fold(0.0f64, f64::max);
        let n_rings = ((max_gap / s.h_sphere).ceil() as usize).clamp(3, 80);

        let mut rings: Vec<Vec<usize>> = Vec::with_capacity(n_rings + 1);
        rings.push(rim.clone());
        for i in 1..n_rings {
            let t = i as f64 / n_rings as f64;
            let ring: Vec<usize> = (0..s.n_seg)
                .map(|j| {
                    let a = b.verts[rim[j]] - center;
                    let c = b.verts[bnd[(j + off) % s.n_seg]] - center;
                    let dir = slerp(a, c, t);
                    b.vertex(center + dir, RegionTag::UpperSphere)
                })
                .collect();
            rings.push(ring);
        }
        let outer: Vec<usize> = (0..s.n_seg).map(|j| bnd[(j + off) % s.n_seg]).collect();
        rings.push(outer);
        for i in 0..n_rings {
            b.strip(&rings[i], &rings[i + 1]);
        }

        // Tube rings from the waist (exactly z = 0) up to the end plane z = R.
        let tube: Vec<Vec<usize>> = (0..=n_tube_rings)
            .map(|i| {
                let z = if i == n_tube_rings { big_r } else { big_r * i as f64 / n_tube_rings as f64 };
                (0..s.n_seg)
                    .map(|j| {
                        let t = 2.0 * PI * j as f64 / s.n_seg as f64;
                        let pos = p_hat.scale(1.0 - r * t.cos()) + e2.scale(r * t.sin());
                        b.vertex(Vec3::new(pos.x, pos.y, z), RegionTag::Tube(k))
                    })
                    .collect()
            })
            .collect();
        for i in 0..n_tube_rings {
            b.strip(&tube[i], &tube[i + 1]);
        }

        // Junction sleeve: quarter-turn elbow from the rim circle (in the
        // sphere surface) to the tube end circle (horizontal).
        let rim_center = Vec3::new(p_hat.x * rim_center_off, p_hat.y * rim_center_off, zc);
        let tube_end_center = Vec3::new(p_hat.x, p_hat.y, big_r);
        let mut sleeve: Vec<Vec<usize>> = Vec::with_capacity(n_sleeve + 1);
        sleeve.push(rim.clone());
        for i in 1..n_sleeve {
            let f = i as f64 / n_sleeve as f64;
            let beta = f * PI / 2.0;
            let (sb, cb) = beta.sin_cos();
            let m = Vec3::new(-p_hat.x * sb, -p_hat.y * sb, cb);
            let c = rim_center.scale(1.0 - f) + tube_end_center.scale(f);
            let rho = (1.0 - f) * eps.sin() + f * r;
            let ring: Vec<usize> = (0..s.n_seg)
                .map(|j| {
                    let t = 2.0 * PI * j as f64 / s.n_seg as f64;
                    b.vertex(c + m.scale(rho * t.cos()) + e2.scale(rho * t.sin()), RegionTag::Junction)
                })
                .collect();
            sleeve.push(ring);
        }
        sleeve.push(tube[n_tube_rings].clone());
        for i in 0..n_sleeve {
            b.strip(&sleeve[i], &sleeve[i + 1]);
        }

        sector_rims.push(rim);
        ogrid.push(rings);
        sleeves.push(sleeve);
        tubes.push(tube);
    }

    // Rotation images for all per-sector vertices: sector k maps to k+1 with
    // local indices preserved.
    for k in 0..s.order {
        let kn = (k + 1) % s.order;
        for (j, &v) in sector_rims[k].iter().enumerate() {
            b.rot[v] = sector_rims[kn][j];
        }
        for (i, ring) in ogrid[k].iter().enumerate() {
            for (j, &v) in ring.iter().enumerate() {
                if b.rot[v] == UNASSIGNED {
                    b.rot[v] = ogrid[kn][i][j];
                }
            }
        }
        for (i, ring) in tubes[k].iter().enumerate() {
            for (j, &v) in ring.iter().enumerate() {
                b.rot[v] = tubes[kn][i][j];
            }
        }
        for (i, ring) in sleeves[k].iter().enumerate().skip(1).take(n_sleeve - 1) {
            for (j, &v) in ring.iter().enumerate() {
                b.rot[v] = sleeves[kn][i][j];
            }
        }
    }

    // Polar caps of the upper sphere.
    cap(&mut b, &top_ring, s.lam0, 1.0, zc, &s);
    cap(&mut b, &bot_ring, -s.lam0, -1.0, zc, &s);

    if b.rot.iter().any(|&x| x == UNASSIGNED) {
        return Err(MeshError::BrokenSymmetry { reason: "internal: vertex missing a rotation image".into() });
    }

    // Reflect the upper half. Waist rings (z exactly 0) are shared, everything
    // else gets an exact mirrored copy.
    let upper_count = b.verts.len();
    let upper_faces = b.faces.len();
    let mut is_waist = vec![false; upper_count];
    for tube in &tubes {
        for &v in &tube[0] {
            is_waist[v] = true;
        }
    }
    let mut mirror = vec![UNASSIGNED; upper_count];
    for v in 0..upper_count {
        if is_waist[v] {
            mirror[v] = v;
            continue;
        }
        let p = b.verts[v];
        let tag = match b.tags[v] {
            RegionTag::UpperSphere => RegionTag::LowerSphere,
            other => other,
        };
        let m = b.vertex(Vec3::new(p.x, p.y, -p.z), tag);
        mirror.push(v);
        mirror[v] = m;
    }
    for v in 0..upper_count {
        if mirror[v] != v {
            b.rot[mirror[v]] = mirror[b.rot[v]];
        }
    }
    for f in 0..upper_faces {
        let [x, y, z] = b.faces[f];
        b.tri(mirror[z], mirror[y], mirror[x]);
    }

    orient_faces(&mut b.faces, &b.verts)?;

    let tube_waists: Vec<Vec<usize>> = tubes.iter().map(|t| t[0].clone()).collect();
    let mesh = SurfaceMesh {
        vertices: b.verts,
        faces: b.faces,
        region_tags: b.tags,
        rotation_map: b.rot,
        mirror_map: mirror,
        tube_waists,
        symmetry_order: s.order,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Makes face windings mutually consistent by flood fill, then flips the whole
/// surface outward (positive enclosed volume).
fn orient_faces(faces: &mut [[usize; 3]], verts: &[Vec3]) -> Result<(), MeshError> {
    let nf = faces.len();
    let mut by_edge: HashMap<(usize, usize), Vec<(usize, bool)>> = HashMap::with_capacity(nf * 3 / 2);
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            let (a, c) = (f[k], f[(k + 1) % 3]);
            let key = if a < c { (a, c) } else { (c, a) };
            by_edge.entry(key).or_default().push((fi, a < c));
        }
    }
    for (key, inc) in &by_edge {
        if inc.len() != 2 {
            return Err(MeshError::NotClosed {
                reason: format!("edge {key:?} lies on {} faces", inc.len()),
            });
        }
    }

    let mut flip = vec![false; nf];
    let mut visited = vec![false; nf];
    let mut queue = std::collections::VecDeque::new();
    visited[0] = true;
    queue.push_back(0usize);
    let mut reached = 1usize;
    while let Some(f) = queue.pop_front() {
        let tri = faces[f];
        for k in 0..3 {
            let (a, c) = (tri[k], tri[(k + 1) % 3]);
            let key = if a < c { (a, c) } else { (c, a) };
            for &(g, dir_g) in &by_edge[&key] {
                if g == f || visited[g] {
                    continue;
                }
                let dir_f = a < c;
                // shared edge must be traversed in opposite effective senses
                flip[g] = !(dir_g ^ dir_f ^ flip[f]);
                visited[g] = true;
                reached += 1;
                queue.push_back(g);
            }
        }
    }
    if reached != nf {
        return Err(MeshError::NotClosed { reason: "surface is not connected".into() });
    }
    for (f, flipped) in flip.iter().enumerate() {
        if *flipped {
            faces[f].swap(1, 2);
        }
    }

    let volume: f64 = faces
        .iter()
        .map(|f| verts[f[0]].cross(verts[f[1]]).dot(verts[f[2]]) / 6.0)
        .sum();
    if volume < 0.0 {
        for f in faces.iter_mut() {
            f.swap(1, 2);
        }
    }
    Ok(())
}
