//! Fans of lines in log space, their uncertainty strips, and planar cones.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use thiserror::Error;

/// Angular slack used when comparing cone boundary rays.
pub const ANGLE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("generator (0,0) does not define a line")]
    ZeroGenerator,
    #[error("delta must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("generators {0:?} and {1:?} are parallel")]
    ParallelGenerators((i64, i64), (i64, i64)),
    #[error("a fan needs at least one generator")]
    EmptyFan,
    #[error("point ({0}, {1}) is not in the open positive quadrant")]
    NonPositivePoint(f64, f64),
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// The line `q·Y = p·X` through the log origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LineGenerator {
    pub p: i64,
    pub q: i64,
}

pub fn normalize_generator(p: i64, q: i64) -> Result<LineGenerator, GeometryError> {
    if p == 0 && q == 0 {
        return Err(GeometryError::ZeroGenerator);
    }
    let g = gcd(p, q);
    let (mut p, mut q) = (p / g, q / g);
    if q < 0 || (q == 0 && p < 0) {
        p = -p;
        q = -q;
    }
    Ok(LineGenerator { p, q })
}

impl LineGenerator {
    pub fn new(p: i64, q: i64) -> Result<Self, GeometryError> {
        normalize_generator(p, q)
    }

    /// `p/q`, or `None` for the vertical line `X = 0`.
    pub fn slope(&self) -> Option<f64> {
        (self.q != 0).then(|| self.p as f64 / self.q as f64)
    }

    pub fn is_horizontal(&self) -> bool {
        self.p == 0
    }

    pub fn is_vertical(&self) -> bool {
        self.q == 0
    }

    pub fn norm(&self) -> f64 {
        (self.p as f64).hypot(self.q as f64)
    }

    /// Unit direction `(q, p)/‖·‖` of the line in the (X, Y) plane.
    pub fn direction(&self) -> [f64; 2] {
        let n = self.norm();
        [self.q as f64 / n, self.p as f64 / n]
    }

    /// Angle of the line in `[0, π)`; the horizontal line has angle 0.
    pub fn angle(&self) -> f64 {
        let a = (self.p as f64).atan2(self.q as f64);
        if a < 0.0 {
            a + PI
        } else {
            a
        }
    }

    /// `p_i q_j − p_j q_i`; zero iff the lines coincide.
    pub fn det(&self, other: &LineGenerator) -> i64 {
        self.p * other.q - other.p * self.q
    }

    pub fn as_pair(&self) -> (i64, i64) {
        (self.p, self.q)
    }
}

pub fn delta_i(gen: &LineGenerator, delta: f64) -> Result<f64, GeometryError> {
    if !(delta > 0.0) {
        return Err(GeometryError::NonPositiveDelta(delta));
    }
    Ok(delta * gen.norm())
}

/// A point given by its logarithmic coordinates `(X, Y)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LogPoint {
    pub x: f64,
    pub y: f64,
}

/// A point of the open positive quadrant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosPoint {
    pub x: f64,
    pub y: f64,
}

impl LogPoint {
    pub const ORIGIN: LogPoint = LogPoint { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        LogPoint { x, y }
    }

    /// Exponentiates; coordinates beyond `e^709` become infinite.
    pub fn to_pos(self) -> PosPoint {
        PosPoint {
            x: self.x.exp(),
            y: self.y.exp(),
        }
    }

    pub fn dist(self, o: LogPoint) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    pub fn as_array(self) -> [f64; 2] {
        [self.x, self.y]
    }
}

impl PosPoint {
    pub fn new(x: f64, y: f64) -> Result<Self, GeometryError> {
        if x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite() {
            Ok(PosPoint { x, y })
        } else {
            Err(GeometryError::NonPositivePoint(x, y))
        }
    }

    pub fn to_log(self) -> LogPoint {
        LogPoint {
            x: self.x.ln(),
            y: self.y.ln(),
        }
    }
}

/// The strip `|q·Y − p·X| ≤ δ_i` around one generator line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyRegion {
    pub generator: LineGenerator,
    pub delta_i: f64,
    pub index: usize,
}

impl UncertaintyRegion {
    pub fn strip_coordinate(&self, pt: LogPoint) -> f64 {
        strip_coordinate(pt, self)
    }

    /// Strict interior membership.
    pub fn contains_interior(&self, pt: LogPoint) -> bool {
        self.strip_coordinate(pt).abs() < self.delta_i
    }
}

pub fn strip_coordinate(pt: LogPoint, region: &UncertaintyRegion) -> f64 {
    let g = region.generator;
    g.q as f64 * pt.y - g.p as f64 * pt.x
}

/// Unit vector orthogonal to the generator, pointing from the `side`
/// component of the complement towards the strip.
pub fn attracting_direction(region: &UncertaintyRegion, side: i8) -> [f64; 2] {
    let g = region.generator;
    let n = g.norm();
    let s = if side >= 0 { 1.0 } else { -1.0 };
    [s * g.p as f64 / n, -s * g.q as f64 / n]
}

/// One of the `2b` rays `±(q, p)` of a fan, in counter-clockwise order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub angle: f64,
    pub gen: usize,
    /// `+1` for `(q, p)`, `-1` for `-(q, p)`. Counter-clockwise of the arm
    /// the strip coordinate has sign `eps`.
    pub eps: i8,
    pub dir: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fan {
    gens: Vec<LineGenerator>,
    arms: Vec<Arm>,
}

impl Fan {
    /// Normalizes, rejects duplicates/parallels and sorts by line angle.
    pub fn new(pairs: &[(i64, i64)]) -> Result<Self, GeometryError> {
        let gens = pairs
            .iter()
            .map(|&(p, q)| normalize_generator(p, q))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_generators(gens)
    }

    pub fn from_generators(mut gens: Vec<LineGenerator>) -> Result<Self, GeometryError> {
        if gens.is_empty() {
            return Err(GeometryError::EmptyFan);
        }
        for i in 0..gens.len() {
            for j in i + 1..gens.len() {
                if gens[i].det(&gens[j]) == 0 {
                    return Err(GeometryError::ParallelGenerators(
                        gens[i].as_pair(),
                        gens[j].as_pair(),
                    ));
                }
            }
        }
        gens.sort_by(|a, b| a.angle().total_cmp(&b.angle()));
        let mut arms = Vec::with_capacity(2 * gens.len());
        for (i, g) in gens.iter().enumerate() {
            let d = g.direction();
            for eps in [1i8, -1] {
                let e = eps as f64;
                let dir = [e * d[0], e * d[1]];
                let mut angle = dir[1].atan2(dir[0]);
                if angle < 0.0 {
                    angle += TAU;
                }
                arms.push(Arm {
                    angle,
                    gen: i,
                    eps,
                    dir,
                });
            }
        }
        arms.sort_by(|a, b| a.angle.total_cmp(&b.angle));
        Ok(Fan { gens, arms })
    }

    pub fn generators(&self) -> &[LineGenerator] {
        &self.gens
    }

    pub fn len(&self) -> usize {
        self.gens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gens.is_empty()
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn index_of(&self, g: &LineGenerator) -> Option<usize> {
        self.gens.iter().position(|h| h == g)
    }

    pub fn region(&self, i: usize, delta: f64) -> UncertaintyRegion {
        UncertaintyRegion {
            generator: self.gens[i],
            delta_i: delta * self.gens[i].norm(),
            index: i,
        }
    }

    pub fn regions(&self, delta: f64) -> Vec<UncertaintyRegion> {
        (0..self.len()).map(|i| self.region(i, delta)).collect()
    }

    /// Strip coordinate of generator `i` at a log point.
    pub fn sv(&self, i: usize, pt: LogPoint) -> f64 {
        let g = self.gens[i];
        g.q as f64 * pt.y - g.p as f64 * pt.x
    }

    pub fn di(&self, i: usize, delta: f64) -> f64 {
        delta * self.gens[i].norm()
    }

    /// Index `k` of the open gap between arm `k` and arm `k+1` containing
    /// the direction of `pt`; `None` on an arm or at the origin.
    pub fn gap_of(&self, pt: LogPoint) -> Option<usize> {
        if pt.x == 0.0 && pt.y == 0.0 {
            return None;
        }
        let mut a = pt.y.atan2(pt.x);
        if a < 0.0 {
            a += TAU;
        }
        self.gap_of_angle(a)
    }

    pub fn gap_of_angle(&self, a: f64) -> Option<usize> {
        let n = self.arms.len();
        for k in 0..n {
            let lo = self.arms[k].angle;
            let mut hi = self.arms[(k + 1) % n].angle;
            if k + 1 == n {
                hi += TAU;
            }
            let aa = if a >= lo { a } else { a + TAU };
            if lo < aa && aa < hi {
                return Some(k);
            }
        }
        None
    }

    /// Whether every generator of `sub` belongs to this fan.
    pub fn contains_all(&self, sub: &Fan) -> bool {
        sub.gens.iter().all(|g| self.gens.contains(g))
    }

    pub fn pairs(&self) -> Vec<(i64, i64)> {
        self.gens.iter().map(|g| g.as_pair()).collect()
    }
}

/// Number of strips containing the point in their open interior.
pub fn r_count(point: PosPoint, fan: &Fan, delta: f64) -> usize {
    r_count_log(point.to_log(), fan, delta)
}

pub fn r_count_log(pt: LogPoint, fan: &Fan, delta: f64) -> usize {
    (0..fan.len())
        .filter(|&i| fan.sv(i, pt).abs() < fan.di(i, delta))
        .count()
}

fn norm_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

fn angle_of(v: [f64; 2]) -> f64 {
    norm_angle(v[1].atan2(v[0]))
}

fn unit(a: f64) -> [f64; 2] {
    [a.cos(), a.sin()]
}

fn normalized(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

pub(crate) fn rot90(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

pub(crate) fn rot270(v: [f64; 2]) -> [f64; 2] {
    [v[1], -v[0]]
}

pub(crate) fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// A closed convex cone in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cone2 {
    Origin,
    Ray([f64; 2]),
    /// The one-dimensional subspace spanned by a unit vector.
    Line([f64; 2]),
    /// Counter-clockwise from `a` to `b`, opening strictly inside `(0, π)`.
    Sector { a: [f64; 2], b: [f64; 2] },
    /// `{v : v·n ≤ 0}` for the unit outward normal `n`.
    HalfPlane([f64; 2]),
    FullPlane,
}

impl Cone2 {
    pub fn sector(a: [f64; 2], b: [f64; 2]) -> Cone2 {
        Cone2::Sector {
            a: normalized(a),
            b: normalized(b),
        }
    }

    /// Closed arcs `(start, width)` of the unit circle covered by the cone.
    fn arcs(&self) -> Vec<(f64, f64)> {
        match *self {
            Cone2::Origin => vec![],
            Cone2::Ray(u) => vec![(angle_of(u), 0.0)],
            Cone2::Line(u) => {
                let a = angle_of(u);
                vec![(a, 0.0), (norm_angle(a + PI), 0.0)]
            }
            Cone2::Sector { a, b } => {
                let s = angle_of(a);
                vec![(s, norm_angle(angle_of(b) - s))]
            }
            Cone2::HalfPlane(n) => vec![(norm_angle(angle_of(n) + FRAC_PI_2), PI)],
            Cone2::FullPlane => vec![(0.0, TAU)],
        }
    }

    fn from_arcs(mut arcs: Vec<(f64, f64)>) -> Cone2 {
        if arcs.iter().any(|&(_, w)| w >= TAU - ANGLE_TOL) {
            return Cone2::FullPlane;
        }
        arcs.sort_by(|a, b| b.1.total_cmp(&a.1));
        match arcs.as_slice() {
            [] => Cone2::Origin,
            [(s, w), rest @ ..] => {
                if *w <= ANGLE_TOL {
                    if let Some((s2, _)) = rest.first() {
                        let d = norm_angle(s2 - s);
                        if (d - PI).abs() <= 1e-9 {
                            return Cone2::Line(unit(*s));
                        }
                    }
                    Cone2::Ray(unit(*s))
                } else if (*w - PI).abs() <= ANGLE_TOL {
                    Cone2::HalfPlane(unit(*s - FRAC_PI_2))
                } else {
                    Cone2::Sector {
                        a: unit(*s),
                        b: unit(*s + *w),
                    }
                }
            }
        }
    }

    /// Intersection, clipping angular intervals.
    pub fn intersect(&self, other: &Cone2) -> Cone2 {
        match (self, other) {
            (Cone2::FullPlane, c) | (c, Cone2::FullPlane) => return *c,
            (Cone2::Origin, _) | (_, Cone2::Origin) => return Cone2::Origin,
            _ => {}
        }
        let mut out: Vec<(f64, f64)> = Vec::new();
        for &(s1, w1) in &self.arcs() {
            for &(s2, w2) in &other.arcs() {
                if w1 >= TAU - ANGLE_TOL {
                    out.push((s2, w2));
                    continue;
                }
                if w2 >= TAU - ANGLE_TOL {
                    out.push((s1, w1));
                    continue;
                }
                let d = norm_angle(s2 - s1);
                for off in [d, d - TAU] {
                    let lo = off.max(0.0);
                    let hi = (off + w2).min(w1);
                    if lo <= hi + ANGLE_TOL {
                        let piece = (norm_angle(s1 + lo), (hi - lo).max(0.0));
                        let dup = out.iter().any(|&(s, w)| {
                            let ds = norm_angle(s - piece.0);
                            (ds.min(TAU - ds) <= 1e-9) && (w - piece.1).abs() <= 1e-9
                        });
                        if !dup {
                            out.push(piece);
                        }
                    }
                }
            }
        }
        Cone2::from_arcs(out)
    }

    pub fn polar(&self) -> Cone2 {
        match *self {
            Cone2::Origin => Cone2::FullPlane,
            Cone2::FullPlane => Cone2::Origin,
            Cone2::Ray(u) => Cone2::HalfPlane(u),
            Cone2::HalfPlane(n) => Cone2::Ray(n),
            Cone2::Line(u) => Cone2::Line(rot90(u)),
            Cone2::Sector { a, b } => Cone2::Sector {
                a: rot90(b),
                b: rot270(a),
            },
        }
    }

    /// Largest normalized amount by which `v` leaves the cone (0 if inside).
    pub fn violation(&self, v: [f64; 2]) -> f64 {
        let n = v[0].hypot(v[1]);
        if n == 0.0 {
            return 0.0;
        }
        let v = [v[0] / n, v[1] / n];
        match *self {
            Cone2::Origin => 1.0,
            Cone2::FullPlane => 0.0,
            Cone2::HalfPlane(nrm) => dot(v, nrm).max(0.0),
            Cone2::Line(u) => cross(u, v).abs(),
            Cone2::Ray(u) => {
                if dot(u, v) >= 0.0 {
                    cross(u, v).abs()
                } else {
                    1.0
                }
            }
            Cone2::Sector { a, b } => (-cross(a, v)).max(-cross(v, b)).max(0.0),
        }
    }

    pub fn contains(&self, v: [f64; 2], tol: f64) -> bool {
        self.violation(v) <= tol
    }

    /// Vectors whose conic hull is the cone.
    pub fn generators(&self) -> Vec<[f64; 2]> {
        match *self {
            Cone2::Origin => vec![],
            Cone2::Ray(u) => vec![u],
            Cone2::Line(u) => vec![u, [-u[0], -u[1]]],
            Cone2::Sector { a, b } => vec![a, b],
            Cone2::HalfPlane(n) => vec![rot90(n), rot270(n), [-n[0], -n[1]]],
            Cone2::FullPlane => vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
        }
    }

    /// `other ⊆ self` up to `tol`.
    pub fn contains_cone(&self, other: &Cone2, tol: f64) -> bool {
        other.generators().iter().all(|&g| self.contains(g, tol))
    }

    /// Extreme rays (boundary directions) for reporting.
    pub fn extreme_rays(&self) -> Vec<[f64; 2]> {
        match *self {
            Cone2::HalfPlane(n) => vec![rot90(n), rot270(n)],
            Cone2::FullPlane => vec![],
            _ => self.generators(),
        }
    }

    /// Opening angle in radians.
    pub fn opening(&self) -> f64 {
        self.arcs().iter().map(|a| a.1).fold(0.0, f64::max)
    }
}

/// The full-dimensional sectors of the fan, counter-clockwise.
pub fn fan_2d_cones(fan: &Fan) -> Vec<Cone2> {
    let arms = fan.arms();
    if arms.len() == 2 {
        return arms.iter().map(|a| Cone2::HalfPlane(rot270(a.dir))).collect();
    }
    (0..arms.len())
        .map(|k| Cone2::Sector {
            a: arms[k].dir,
            b: arms[(k + 1) % arms.len()].dir,
        })
        .collect()
}

fn dist_to_ray(pt: [f64; 2], u: [f64; 2]) -> f64 {
    let t = dot(pt, u);
    if t <= 0.0 {
        pt[0].hypot(pt[1])
    } else {
        cross(u, pt).abs()
    }
}

/// Euclidean distance from a log point to a cone.
pub fn dist_to_cone(pt: LogPoint, cone: &Cone2) -> f64 {
    let v = pt.as_array();
    match *cone {
        Cone2::FullPlane => 0.0,
        Cone2::Origin => v[0].hypot(v[1]),
        Cone2::HalfPlane(n) => dot(v, n).max(0.0),
        Cone2::Line(u) => cross(u, v).abs(),
        Cone2::Ray(u) => dist_to_ray(v, u),
        Cone2::Sector { a, b } => {
            if cross(a, v) >= 0.0 && cross(v, b) >= 0.0 {
                0.0
            } else {
                dist_to_ray(v, a).min(dist_to_ray(v, b))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: [f64; 2], b: [f64; 2]) -> bool {
        (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_generator(2, 4).unwrap(), LineGenerator { p: 1, q: 2 });
        assert_eq!(normalize_generator(1, -1).unwrap(), LineGenerator { p: -1, q: 1 });
        assert_eq!(normalize_generator(-3, 0).unwrap(), LineGenerator { p: 1, q: 0 });
        assert_eq!(normalize_generator(0, 0), Err(GeometryError::ZeroGenerator));
    }

    #[test]
    fn delta_i_examples() {
        let g = LineGenerator { p: 3, q: 4 };
        assert_eq!(delta_i(&g, 2.0).unwrap(), 10.0);
        let g = LineGenerator { p: 1, q: 2 };
        assert!((delta_i(&g, 3.0).unwrap() - 3.0 * 5f64.sqrt()).abs() < 1e-12);
        assert!(delta_i(&g, 0.0).is_err());
    }

    #[test]
    fn strip_coordinate_examples() {
        let fan = Fan::new(&[(1, 1)]).unwrap();
        let r = fan.region(0, 1.0);
        assert_eq!(strip_coordinate(LogPoint::new(0.0, 5.0), &r), 5.0);
        assert_eq!(strip_coordinate(LogPoint::new(3.0, 3.0), &r), 0.0);
        assert_eq!(strip_coordinate(LogPoint::ORIGIN, &r), 0.0);
    }

    #[test]
    fn r_count_examples() {
        let one = Fan::new(&[(1, 1)]).unwrap();
        assert_eq!(r_count_log(LogPoint::new(10.0, 0.0), &one, 1.0), 0);
        let two = Fan::new(&[(1, 1), (-1, 1)]).unwrap();
        assert_eq!(r_count_log(LogPoint::new(0.1, 0.0), &two, 1.0), 2);
        let w = Fan::new(&crate::WORKED_FAN).unwrap();
        assert_eq!(r_count(PosPoint::new(1.0, 1.0).unwrap(), &w, 0.3), 3);
    }

    #[test]
    fn attracting_direction_examples() {
        let fan = Fan::new(&[(1, 1), (0, 1)]).unwrap();
        let h = fan.index_of(&LineGenerator { p: 0, q: 1 }).unwrap();
        let d = fan.index_of(&LineGenerator { p: 1, q: 1 }).unwrap();
        let s = 0.5f64.sqrt();
        assert!(close(attracting_direction(&fan.region(d, 1.0), 1), [s, -s]));
        assert!(close(attracting_direction(&fan.region(d, 1.0), -1), [-s, s]));
        assert!(close(attracting_direction(&fan.region(h, 1.0), 1), [0.0, -1.0]));
    }

    #[test]
    fn polar_examples() {
        assert_eq!(Cone2::Ray([1.0, 0.0]).polar(), Cone2::HalfPlane([1.0, 0.0]));
        assert_eq!(Cone2::FullPlane.polar(), Cone2::Origin);
        match Cone2::sector([1.0, 0.0], [0.0, 1.0]).polar() {
            Cone2::Sector { a, b } => {
                assert!(close(a, [-1.0, 0.0]));
                assert!(close(b, [0.0, -1.0]));
            }
            c => panic!("unexpected {c:?}"),
        }
    }

    #[test]
    fn fan_cones_count() {
        assert_eq!(fan_2d_cones(&Fan::new(&[(0, 1)]).unwrap()).len(), 2);
        assert!(matches!(
            fan_2d_cones(&Fan::new(&[(0, 1)]).unwrap())[0],
            Cone2::HalfPlane(_)
        ));
        assert_eq!(fan_2d_cones(&Fan::new(&[(1, 1), (-1, 1)]).unwrap()).len(), 4);
        assert_eq!(fan_2d_cones(&Fan::new(&crate::WORKED_FAN).unwrap()).len(), 6);
    }

    #[test]
    fn dist_examples() {
        let c = Cone2::sector([1.0, 0.0], [0.0, 1.0]);
        assert_eq!(dist_to_cone(LogPoint::new(1.0, 1.0), &c), 0.0);
        assert!((dist_to_cone(LogPoint::new(-3.0, 4.0), &c) - 3.0).abs() < 1e-12);
        assert!((dist_to_cone(LogPoint::new(-1.0, -1.0), &c) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn intersections() {
        let h1 = Cone2::HalfPlane([0.0, -1.0]);
        let h2 = Cone2::HalfPlane([0.0, 1.0]);
        assert!(matches!(h1.intersect(&h2), Cone2::Line(_)));
        let q1 = Cone2::sector([1.0, 0.0], [0.0, 1.0]);
        let q2 = Cone2::sector([0.0, 1.0], [-1.0, 0.0]);
        match q1.intersect(&q2) {
            Cone2::Ray(u) => assert!(close(u, [0.0, 1.0])),
            c => panic!("unexpected {c:?}"),
        }
        let q3 = Cone2::sector([-1.0, 0.0], [0.0, -1.0]);
        assert_eq!(q1.intersect(&q3), Cone2::Origin);
        assert_eq!(q1.intersect(&Cone2::FullPlane), q1);
    }

    #[test]
    fn fan_order() {
        let f = Fan::new(&[(-1, 1), (2, 1), (0, 1), (1, 2), (1, 0)]).unwrap();
        assert_eq!(f.pairs(), vec![(0, 1), (1, 2), (2, 1), (1, 0), (-1, 1)]);
        assert!(Fan::new(&[(1, 2), (2, 4)]).is_err());
    }
}
