//! Right-hand side `F(X)` of the toric differential inclusion: the polar of
//! the intersection of all fan sectors within distance δ of `X = log x`.

use crate::fan_geometry::{
    dist_to_cone, dot, fan_2d_cones, r_count_log, rot270, rot90, Cone2, Fan, LogPoint, PosPoint,
};
use thiserror::Error;

/// Slack in strip coordinates below which the fast path refuses to decide.
pub const CLASSIFY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RhsError {
    #[error("point lies within tolerance of a strip boundary; use the brute force")]
    AmbiguousClassification,
    #[error("generator {0:?} of the sub-fan is not in the fan")]
    NotASubfan((i64, i64)),
}

/// Cone of admissible x-space velocities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConeRHS {
    FullPlane,
    /// `{v : v·normal ≤ 0}`.
    HalfPlane { normal: [f64; 2] },
    /// A pointed cone with opening below π.
    ProperCone { cone: Cone2 },
    /// Lower-dimensional values that only arise for one-generator fans.
    Degenerate(Cone2),
}

impl ConeRHS {
    pub fn from_cone(c: Cone2) -> ConeRHS {
        match c {
            Cone2::FullPlane => ConeRHS::FullPlane,
            Cone2::HalfPlane(normal) => ConeRHS::HalfPlane { normal },
            Cone2::Sector { .. } => ConeRHS::ProperCone { cone: c },
            c => ConeRHS::Degenerate(c),
        }
    }

    pub fn as_cone(&self) -> Cone2 {
        match *self {
            ConeRHS::FullPlane => Cone2::FullPlane,
            ConeRHS::HalfPlane { normal } => Cone2::HalfPlane(normal),
            ConeRHS::ProperCone { cone } | ConeRHS::Degenerate(cone) => cone,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ConeRHS::FullPlane => "FullPlane",
            ConeRHS::HalfPlane { .. } => "HalfPlane",
            ConeRHS::ProperCone { .. } => "ProperCone",
            ConeRHS::Degenerate(Cone2::Line(_)) => "Line",
            ConeRHS::Degenerate(Cone2::Ray(_)) => "Ray",
            ConeRHS::Degenerate(_) => "Origin",
        }
    }

    pub fn contains(&self, v: [f64; 2], tol: f64) -> bool {
        self.as_cone().contains(v, tol)
    }

    pub fn violation(&self, v: [f64; 2]) -> f64 {
        self.as_cone().violation(v)
    }

    /// Outward normals of the constraints `v·n ≤ 0` defining the cone.
    pub fn normals(&self) -> Vec<[f64; 2]> {
        match *self {
            ConeRHS::FullPlane => vec![],
            ConeRHS::HalfPlane { normal } => vec![normal],
            _ => self.as_cone().polar().generators(),
        }
    }

    /// Boundary rays (empty for the full plane).
    pub fn extreme_rays(&self) -> Vec<[f64; 2]> {
        self.as_cone().extreme_rays()
    }

    /// `sup { v·n : v in the cone, |v| = 1 }` for a unit vector `n`.
    pub fn worst_dot(&self, n: [f64; 2]) -> f64 {
        let c = self.as_cone();
        if c == Cone2::Origin {
            return -1.0;
        }
        if c.violation(n) == 0.0 {
            return 1.0;
        }
        c.extreme_rays()
            .iter()
            .map(|&r| dot(r, n))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The `data` field of the one-line textual form.
    pub fn data_string(&self) -> String {
        let f = |v: [f64; 2]| format!("{:.12},{:.12}", v[0], v[1]);
        match *self {
            ConeRHS::FullPlane => String::new(),
            ConeRHS::HalfPlane { normal } => format!("normal={}", f(normal)),
            _ => format!(
                "rays={}",
                self.extreme_rays().into_iter().map(f).collect::<Vec<_>>().join("|")
            ),
        }
    }

    /// Same tag and boundary rays within `tol`.
    pub fn approx_eq(&self, other: &ConeRHS, tol: f64) -> bool {
        if self.tag() != other.tag() {
            return false;
        }
        let close = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol;
        let (ra, rb) = (self.extreme_rays(), other.extreme_rays());
        match (self.as_cone(), other.as_cone()) {
            (Cone2::Line(u), Cone2::Line(w)) => close(u, w) || close(u, [-w[0], -w[1]]),
            _ => ra.len() == rb.len() && ra.iter().zip(&rb).all(|(a, b)| close(*a, *b)),
        }
    }
}

/// Definitional evaluation from the fan sectors.
pub fn rhs_bruteforce(point: PosPoint, fan: &Fan, delta: f64) -> ConeRHS {
    rhs_bruteforce_log(point.to_log(), fan, delta)
}

pub fn rhs_bruteforce_log(pt: LogPoint, fan: &Fan, delta: f64) -> ConeRHS {
    let mut acc = Cone2::FullPlane;
    for sector in fan_2d_cones(fan) {
        if dist_to_cone(pt, &sector) <= delta {
            acc = acc.intersect(&sector);
            if acc == Cone2::Origin {
                break;
            }
        }
    }
    ConeRHS::from_cone(acc.polar())
}

/// Fast evaluation by counting the strips that contain the point.
pub fn rhs_classified(point: PosPoint, fan: &Fan, delta: f64) -> Result<ConeRHS, RhsError> {
    rhs_classified_log(point.to_log(), fan, delta)
}

pub fn rhs_classified_log(pt: LogPoint, fan: &Fan, delta: f64) -> Result<ConeRHS, RhsError> {
    for i in 0..fan.len() {
        if (fan.sv(i, pt).abs() - fan.di(i, delta)).abs() <= CLASSIFY_TOL {
            return Err(RhsError::AmbiguousClassification);
        }
    }
    let r = r_count_log(pt, fan, delta);
    if r >= 2 {
        return Ok(ConeRHS::FullPlane);
    }
    if fan.len() == 1 {
        let d = fan.generators()[0].direction();
        if r == 1 {
            return Ok(ConeRHS::Degenerate(Cone2::Line(rot90(d))));
        }
        let s = fan.sv(0, pt).signum();
        return Ok(ConeRHS::Degenerate(Cone2::Ray(rot270([s * d[0], s * d[1]]))));
    }
    if r == 1 {
        let i = (0..fan.len())
            .find(|&i| fan.sv(i, pt).abs() < fan.di(i, delta))
            .expect("r = 1");
        let d = fan.generators()[i].direction();
        let proj = dot(pt.as_array(), d);
        if proj.abs() <= CLASSIFY_TOL {
            return Err(RhsError::AmbiguousClassification);
        }
        let s = proj.signum();
        return Ok(ConeRHS::HalfPlane {
            normal: [s * d[0], s * d[1]],
        });
    }
    let k = fan.gap_of(pt).ok_or(RhsError::AmbiguousClassification)?;
    let arms = fan.arms();
    let sector = Cone2::Sector {
        a: arms[k].dir,
        b: arms[(k + 1) % arms.len()].dir,
    };
    Ok(ConeRHS::from_cone(sector.polar()))
}

/// The classified value, falling back to the brute force near strip
/// boundaries.
pub fn rhs_log(pt: LogPoint, fan: &Fan, delta: f64) -> ConeRHS {
    rhs_classified_log(pt, fan, delta).unwrap_or_else(|_| rhs_bruteforce_log(pt, fan, delta))
}

/// Whether the sub-fan's right-hand side is contained in the fan's.
pub fn rhs_subfan_subset(
    point: PosPoint,
    fan: &Fan,
    subfan: &Fan,
    delta: f64,
) -> Result<bool, RhsError> {
    rhs_subfan_subset_log(point.to_log(), fan, subfan, delta)
}

pub fn rhs_subfan_subset_log(
    pt: LogPoint,
    fan: &Fan,
    subfan: &Fan,
    delta: f64,
) -> Result<bool, RhsError> {
    if let Some(g) = subfan.generators().iter().find(|g| fan.index_of(g).is_none()) {
        return Err(RhsError::NotASubfan(g.as_pair()));
    }
    let big = rhs_bruteforce_log(pt, fan, delta).as_cone();
    let small = rhs_bruteforce_log(pt, subfan, delta).as_cone();
    Ok(big.contains_cone(&small, 1e-9))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cross_fan() -> Fan {
        Fan::new(&[(1, 1), (-1, 1)]).unwrap()
    }

    #[test]
    fn origin_is_full_plane() {
        let w = Fan::new(&crate::WORKED_FAN).unwrap();
        let one = PosPoint::new(1.0, 1.0).unwrap();
        assert_eq!(rhs_bruteforce(one, &w, 3.0), ConeRHS::FullPlane);
        assert_eq!(rhs_classified(one, &w, 3.0).unwrap(), ConeRHS::FullPlane);
    }

    #[test]
    fn half_plane_example() {
        let f = cross_fan();
        let pt = LogPoint::new(10.0, 10.0);
        let s = 0.5f64.sqrt();
        for c in [
            rhs_bruteforce_log(pt, &f, 1.0),
            rhs_classified_log(pt, &f, 1.0).unwrap(),
        ] {
            match c {
                ConeRHS::HalfPlane { normal } => {
                    assert!((normal[0] - s).abs() < 1e-12 && (normal[1] - s).abs() < 1e-12)
                }
                c => panic!("unexpected {c:?}"),
            }
            assert!(c.contains([1.0, -1.0], 1e-12));
            assert!(!c.contains([1.0, 0.0], 1e-12));
        }
    }

    #[test]
    fn proper_cone_example() {
        let f = cross_fan();
        let pt = LogPoint::new(10.0, 0.0);
        let b = rhs_bruteforce_log(pt, &f, 1.0);
        let c = rhs_classified_log(pt, &f, 1.0).unwrap();
        assert!(b.approx_eq(&c, 1e-12));
        assert!(matches!(b, ConeRHS::ProperCone { .. }));
        // {v·(1,1) ≤ 0, v·(1,−1) ≤ 0}
        assert!(b.contains([-1.0, 0.0], 1e-12));
        assert!(b.contains([-1.0, 1.0], 1e-12));
        assert!(!b.contains([0.0, 1.0], 1e-12));
    }

    #[test]
    fn single_generator_is_degenerate() {
        let f = Fan::new(&[(1, 1)]).unwrap();
        let one = LogPoint::ORIGIN;
        let b = rhs_bruteforce_log(one, &f, 1.0);
        assert!(matches!(b, ConeRHS::Degenerate(Cone2::Line(_))));
        assert!(b.approx_eq(&rhs_classified_log(one, &f, 1.0).unwrap(), 1e-12));
        let far = LogPoint::new(0.0, 5.0);
        let b = rhs_bruteforce_log(far, &f, 1.0);
        assert!(matches!(b, ConeRHS::Degenerate(Cone2::Ray(_))));
        assert!(b.approx_eq(&rhs_classified_log(far, &f, 1.0).unwrap(), 1e-12));
    }

    #[test]
    fn boundary_is_ambiguous() {
        let f = cross_fan();
        // exactly on the upper boundary of the (1,1) strip: Y − X = √2
        let pt = LogPoint::new(3.0, 3.0 + 2f64.sqrt());
        assert_eq!(
            rhs_classified_log(pt, &f, 1.0),
            Err(RhsError::AmbiguousClassification)
        );
    }

    #[test]
    fn subfan_checks() {
        let f = cross_fan();
        let sub = Fan::new(&[(1, 1)]).unwrap();
        let pt = PosPoint::new(2.0, 7.0).unwrap();
        assert!(rhs_subfan_subset(pt, &f, &f, 1.0).unwrap());
        assert!(rhs_subfan_subset(pt, &f, &sub, 1.0).unwrap());
        let bad = Fan::new(&[(2, 1)]).unwrap();
        assert_eq!(
            rhs_subfan_subset(pt, &f, &bad, 1.0),
            Err(RhsError::NotASubfan((2, 1)))
        );
    }
}
