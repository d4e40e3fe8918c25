use super::Vec3;
use thiserror::Error;

/// How far a stored point may drift from unit norm before construction fails.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// Vectors at least this long can be projected onto the sphere.
pub const PROJECTION_MIN_NORM: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("point norm {norm} is outside 1 ± {UNIT_NORM_TOL}")]
    NotUnit { norm: f64 },
    #[error("degenerate projection: |v| = {norm} <= {PROJECTION_MIN_NORM}")]
    DegenerateProjection { norm: f64 },
}

/// A point on the unit sphere. The constructor enforces |v| = 1 to 1e-12;
/// arithmetic that can leave the sphere goes through [`SpherePoint::project`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpherePoint(Vec3);

impl SpherePoint {
    pub const NORTH: SpherePoint = SpherePoint(Vec3 { x: 0.0, y: 0.0, z: 1.0 });
    pub const SOUTH: SpherePoint = SpherePoint(Vec3 { x: 0.0, y: 0.0, z: -1.0 });

    pub fn new(x: f64, y: f64, z: f64) -> Result<SpherePoint, GeometryError> {
        let v = Vec3::new(x, y, z);
        let norm = v.norm();
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(GeometryError::NotUnit { norm });
        }
        Ok(SpherePoint(v))
    }

    /// Radial projection of an ambient vector onto the sphere.
    pub fn project(v: Vec3) -> Result<SpherePoint, GeometryError> {
        let norm = v.norm();
        if norm <= PROJECTION_MIN_NORM {
            return Err(GeometryError::DegenerateProjection { norm });
        }
        Ok(SpherePoint(v.scale(1.0 / norm)))
    }

    /// For internal hot paths that have already normalized. Debug builds verify.
    pub(crate) fn from_unit_unchecked(v: Vec3) -> SpherePoint {
        debug_assert!((v.norm() - 1.0).abs() <= 1e-9, "norm {}", v.norm());
        SpherePoint(v)
    }

    pub fn vec(self) -> Vec3 {
        self.0
    }

    pub fn x(self) -> f64 {
        self.0.x
    }
    pub fn y(self) -> f64 {
        self.0.y
    }
    pub fn z(self) -> f64 {
        self.0.z
    }

    /// Intrinsic (great-circle) distance. The atan2 of chord lengths is
    /// accurate at both ends of the range: identical points give exactly 0,
    /// antipodal points exactly pi.
    pub fn geodesic_distance(self, o: SpherePoint) -> f64 {
        2.0 * (self.0 - o.0).norm().atan2((self.0 + o.0).norm())
    }

    pub fn antipode(self) -> SpherePoint {
        SpherePoint(-self.0)
    }

    /// The mirror (a, b, c) -> (a, b, -c); an exact involution in floats.
    pub fn mirror_z(self) -> SpherePoint {
        SpherePoint(Vec3::new(self.0.x, self.0.y, -self.0.z))
    }

    /// Rotation by 2 pi k / order about the x3-axis.
    pub fn rotate_z(self, k: i64, order: u32) -> SpherePoint {
        let angle = 2.0 * std::f64::consts::PI * (k as f64) / (order as f64);
        let (s, c) = angle.sin_cos();
        SpherePoint(rotate_z_vec(self.0, s, c))
    }

    /// Longitude in (-pi, pi], measured from the +x axis. The poles return 0.
    pub fn longitude(self) -> f64 {
        self.0.y.atan2(self.0.x)
    }

    /// Latitude in [-pi/2, pi/2].
    pub fn latitude(self) -> f64 {
        self.0.z.clamp(-1.0, 1.0).asin()
    }
}

pub(crate) fn rotate_z_vec(v: Vec3, s: f64, c: f64) -> Vec3 {
    Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sp(x: f64, y: f64, z: f64) -> SpherePoint {
        SpherePoint::project(Vec3::new(x, y, z)).unwrap()
    }

    #[test]
    fn construction_rejects_off_sphere_points() {
        assert!(SpherePoint::new(1.0, 0.0, 0.0).is_ok());
        assert!(matches!(
            SpherePoint::new(1.0, 1.0, 0.0),
            Err(GeometryError::NotUnit { .. })
        ));
    }

    #[test]
    fn projection_of_near_zero_vector_is_degenerate() {
        let err = SpherePoint::project(Vec3::new(1e-13, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, GeometryError::DegenerateProjection { .. }));
    }

    #[test]
    fn antipodal_distance_is_pi() {
        let p = sp(0.3, -0.4, 0.5);
        assert!((p.geodesic_distance(p.antipode()) - std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(p.geodesic_distance(p), 0.0);
    }

    #[test]
    fn rotate_z_by_one_third_moves_x_axis_to_known_point() {
        let q = SpherePoint::new(1.0, 0.0, 0.0).unwrap().rotate_z(1, 3);
        assert!((q.x() - (-0.5)).abs() < 1e-15, "x = {}", q.x());
        assert!((q.y() - 3f64.sqrt() / 2.0).abs() < 1e-15, "y = {}", q.y());
        assert_eq!(q.z(), 0.0);
    }

    #[test]
    fn mirror_z_is_an_exact_involution() {
        let p = sp(0.1, 0.7, -0.7);
        assert_eq!(p.mirror_z().mirror_z(), p);
    }

    proptest! {
        // Oracle: the chord length determines the geodesic distance as
        // 2 asin(|a-b|/2); agreement to 1e-12 on random pairs.
        #[test]
        fn geodesic_distance_matches_chord_oracle(
            ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0,
            bx in -1.0f64..1.0, by in -1.0f64..1.0, bz in -1.0f64..1.0,
        ) {
            let a = Vec3::new(ax, ay, az);
            let b = Vec3::new(bx, by, bz);
            prop_assume!(a.norm() > 1e-3 && b.norm() > 1e-3);
            let pa = SpherePoint::project(a).unwrap();
            let pb = SpherePoint::project(b).unwrap();
            let chord = (pa.vec() - pb.vec()).norm();
            let oracle = 2.0 * (chord / 2.0).clamp(-1.0, 1.0).asin();
            prop_assert!((pa.geodesic_distance(pb) - oracle).abs() <= 1e-12);
        }

        // Rotations about x3 are isometries and preserve latitude.
        #[test]
        fn rotate_z_preserves_distances(
            ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0,
            bx in -1.0f64..1.0, by in -1.0f64..1.0, bz in -1.0f64..1.0,
            k in 0i64..7,
        ) {
            let a = Vec3::new(ax, ay, az);
            let b = Vec3::new(bx, by, bz);
            prop_assume!(a.norm() > 1e-3 && b.norm() > 1e-3);
            let pa = SpherePoint::project(a).unwrap();
            let pb = SpherePoint::project(b).unwrap();
            let d0 = pa.geodesic_distance(pb);
            let d1 = pa.rotate_z(k, 7).geodesic_distance(pb.rotate_z(k, 7));
            prop_assert!((d0 - d1).abs() <= 1e-12);
            prop_assert!((pa.rotate_z(k, 7).z() - pa.z()).abs() == 0.0);
        }
    }
}
