//! Construction of the boundary of the minimal invariant region.
//!
//! The boundary is a closed counter-clockwise loop made of x-space straight
//! segments (each crossing one strip along its attracting direction) and
//! arcs of strip boundary curves `y^q = e^{±δ_i} x^p`, which are straight in
//! log space.

use crate::fan_geometry::{
    cross, dot, rot270, rot90, Fan, GeometryError, LineGenerator, LogPoint, PosPoint,
};
use crate::logline::{other, side, LogLine};
use crate::tdi_rhs::rhs_bruteforce_log;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

/// Bound on the driving parameter when searching for a crossing.
const MAX_PARAM: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("unsupported fan: {0}")]
    UnsupportedFan(String),
    #[error("construction failed at {step}: {reason}")]
    ConstructionFailed { step: String, reason: String },
    #[error("arcs closing gap {0} do not meet between the terminals")]
    ArcsDontMeet(usize),
    #[error("delta too small: {0}")]
    DeltaTooSmall(String),
    #[error("no crossing with the curve along the ray")]
    NoCrossing,
    #[error("point is outside the [delta_lo, delta_hi] band")]
    OutOfBand,
}

fn failed(step: impl Into<String>, reason: impl Into<String>) -> ConstructionError {
    ConstructionError::ConstructionFailed {
        step: step.into(),
        reason: reason.into(),
    }
}

/// A pairwise intersection of strip boundary lines, stored through its
/// δ-independent exponents: log coordinates are `(c·δ, d·δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntersectionPoint {
    pub c: f64,
    pub d: f64,
    pub i: usize,
    pub si: i8,
    pub j: usize,
    pub sj: i8,
}

impl IntersectionPoint {
    pub fn log(&self, delta: f64) -> LogPoint {
        LogPoint::new(self.c * delta, self.d * delta)
    }
}

/// All `4·C(b,2)` points where `q_iY − p_iX = ±δ_i` meets `q_jY − p_jX = ±δ_j`.
pub fn intersection_points(fan: &Fan) -> Vec<IntersectionPoint> {
    let g = fan.generators();
    let mut out = Vec::with_capacity(2 * g.len() * g.len());
    for i in 0..g.len() {
        for j in i + 1..g.len() {
            let (pi, qi) = (g[i].p as f64, g[i].q as f64);
            let (pj, qj) = (g[j].p as f64, g[j].q as f64);
            let det = pi * qj - pj * qi;
            for si in [1i8, -1] {
                for sj in [1i8, -1] {
                    let a = si as f64 * g[i].norm();
                    let b = sj as f64 * g[j].norm();
                    out.push(IntersectionPoint {
                        c: (qi * b - qj * a) / det,
                        d: (pi * b - pj * a) / det,
                        i,
                        si,
                        j,
                        sj,
                    });
                }
            }
        }
    }
    out
}

const TIE: f64 = 1e-12;

fn pick_by_keys<K: Fn(&IntersectionPoint) -> [f64; 3]>(
    pts: &[IntersectionPoint],
    skip: Option<usize>,
    key: K,
) -> Option<usize> {
    let mut cands: Vec<usize> = (0..pts.len()).filter(|&k| Some(k) != skip).collect();
    for level in 0..3 {
        let best = cands
            .iter()
            .map(|&k| key(&pts[k])[level])
            .fold(f64::INFINITY, f64::min);
        cands.retain(|&k| key(&pts[k])[level] <= best + TIE);
    }
    cands.first().copied()
}

/// Indices of `(N,M)` and `(n,m)` in `pts`.
///
/// `(N,M)` maximises `max(X,Y)`, ties toward the diagonal, then toward a
/// y-maximum. `(n,m)` minimises `max(X,Y)` (or `min(X,Y)` when every
/// generator has negative slope), ties toward the diagonal, then by
/// emission order.
pub fn choose_start_points(pts: &[IntersectionPoint], all_negative: bool) -> (usize, usize) {
    let nm_big = pick_by_keys(pts, None, |p| {
        [
            -p.c.max(p.d),
            (p.c - p.d).abs(),
            if p.d >= p.c { 0.0 } else { 1.0 },
        ]
    })
    .expect("S^uc is nonempty");
    let skip = (pts.len() > 1).then_some(nm_big);
    let nm_small = pick_by_keys(pts, skip, |p| {
        let m = if all_negative { p.c.min(p.d) } else { p.c.max(p.d) };
        [m, (p.c - p.d).abs(), 0.0]
    })
    .unwrap_or(nm_big);
    (nm_big, nm_small)
}

/// Slope classes of the fan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlopeClasses {
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
    pub s3: Vec<usize>,
}

pub fn slope_classes(fan: &Fan) -> SlopeClasses {
    let mut c = SlopeClasses {
        s1: vec![],
        s2: vec![],
        s3: vec![],
    };
    for (i, g) in fan.generators().iter().enumerate() {
        if g.p * g.q < 0 {
            c.s1.push(i);
        } else if g.p * g.q > 0 {
            if g.q.abs() > g.p.abs() {
                c.s2.push(i);
            } else {
                c.s3.push(i);
            }
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FanKind {
    /// Negative, shallow positive and steep positive slopes all present.
    Standard,
    AllPositive,
    AllNegative,
    /// Contains a horizontal or vertical generator.
    AxisParallel,
}

pub fn classify_fan(fan: &Fan) -> Result<FanKind, ConstructionError> {
    if fan.len() < 2 {
        return Err(ConstructionError::UnsupportedFan(
            "at least two generators are required".into(),
        ));
    }
    let g = fan.generators();
    if g.iter().any(|g| g.p == 0 || g.q == 0) {
        return Ok(FanKind::AxisParallel);
    }
    if g.iter().all(|g| g.p * g.q > 0) {
        return Ok(FanKind::AllPositive);
    }
    if g.iter().all(|g| g.p * g.q < 0) {
        return Ok(FanKind::AllNegative);
    }
    let c = slope_classes(fan);
    if c.s1.is_empty() || c.s2.is_empty() || c.s3.is_empty() {
        return Err(ConstructionError::UnsupportedFan(format!(
            "mixed-sign slopes need a negative, a (0,1) and a [1,∞) slope; got {:?}",
            fan.pairs()
        )));
    }
    Ok(FanKind::Standard)
}

/// First crossing of the ray from `start` with the given x-space slope and
/// the curve `y^q = h·x^p`; the nearer of the two orientations wins.
pub fn segment_curve_intersection(
    start: PosPoint,
    slope: f64,
    gen: LineGenerator,
    h: f64,
) -> Result<PosPoint, ConstructionError> {
    let s0 = start.to_log();
    let lh = h.ln();
    let g = |pt: LogPoint| gen.q as f64 * pt.y - gen.p as f64 * pt.x - lh;
    let dirs: [[f64; 2]; 2] = if slope.is_infinite() {
        [[0.0, 1.0], [0.0, -1.0]]
    } else {
        [[1.0, slope], [-1.0, -slope]]
    };
    let mut best: Option<(f64, PosPoint)> = None;
    for d in dirs {
        if let Some(p) = LogLine::new(s0, d).first_root(g, MAX_PARAM) {
            let pp = p.to_pos();
            let dist = (pp.x - start.x).hypot(pp.y - start.y);
            if dist > 0.0 && best.is_none_or(|(b, _)| dist < b) {
                best = Some((dist, pp));
            }
        }
    }
    best.map(|b| b.1).ok_or(ConstructionError::NoCrossing)
}

/// An x-space straight piece crossing strip `region` along its attracting
/// direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub from: LogPoint,
    pub to: LogPoint,
    /// x-space direction of travel (unit).
    pub dir: [f64; 2],
    pub region: usize,
}

/// A piece of the line `q·Y − p·X = level`, i.e. `y^q = e^{level} x^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcPiece {
    pub gen: usize,
    pub level: f64,
    pub from: LogPoint,
    pub to: LogPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum BoundaryPiece {
    Segment(Segment),
    Arc(ArcPiece),
}

impl Segment {
    pub fn reversed(&self) -> Segment {
        Segment {
            from: self.to,
            to: self.from,
            dir: [-self.dir[0], -self.dir[1]],
            region: self.region,
        }
    }

    /// x-space slope `dy/dx` (infinite for vertical pieces).
    pub fn slope(&self) -> f64 {
        if self.dir[0] == 0.0 {
            f64::INFINITY
        } else {
            self.dir[1] / self.dir[0]
        }
    }

    /// Point at fraction `s` of the way, driving by the coordinate with the
    /// larger log-space span.
    pub fn point_at(&self, s: f64) -> LogPoint {
        let (a, b) = (self.from, self.to);
        if (b.x - a.x).abs() >= (b.y - a.y).abs() {
            let x = a.x + s * (b.x - a.x);
            LogPoint::new(x, other(a.x, a.y, self.dir[0], self.dir[1], x))
        } else {
            let y = a.y + s * (b.y - a.y);
            LogPoint::new(other(a.y, a.x, self.dir[1], self.dir[0], y), y)
        }
    }

    /// X on the segment's line at log height `y` (needs `dir[1] ≠ 0`).
    fn x_at(&self, y: f64) -> f64 {
        other(self.from.y, self.from.x, self.dir[1], self.dir[0], y)
    }

    fn y_at(&self, x: f64) -> f64 {
        other(self.from.x, self.from.y, self.dir[0], self.dir[1], x)
    }
}

fn scaled_unit(a: f64, ea: f64, b: f64, eb: f64) -> [f64; 2] {
    // normalizes (a·e^{ea}, b·e^{eb}) without overflow
    let m = ea.max(eb);
    let v = [a * (ea - m).exp(), b * (eb - m).exp()];
    let n = v[0].hypot(v[1]);
    if n == 0.0 {
        [0.0, 0.0]
    } else {
        [v[0] / n, v[1] / n]
    }
}

impl BoundaryPiece {
    pub fn start(&self) -> LogPoint {
        match self {
            BoundaryPiece::Segment(s) => s.from,
            BoundaryPiece::Arc(a) => a.from,
        }
    }

    pub fn end(&self) -> LogPoint {
        match self {
            BoundaryPiece::Segment(s) => s.to,
            BoundaryPiece::Arc(a) => a.to,
        }
    }

    pub fn point_at(&self, s: f64) -> LogPoint {
        match self {
            BoundaryPiece::Segment(g) => g.point_at(s),
            BoundaryPiece::Arc(a) => LogPoint::new(
                a.from.x + s * (a.to.x - a.from.x),
                a.from.y + s * (a.to.y - a.from.y),
            ),
        }
    }

    /// Unit log-space tangent in the direction of travel at `pt`.
    pub fn log_tangent(&self, pt: LogPoint) -> [f64; 2] {
        match self {
            BoundaryPiece::Segment(g) => scaled_unit(g.dir[0], -pt.x, g.dir[1], -pt.y),
            BoundaryPiece::Arc(a) => {
                let v = [a.to.x - a.from.x, a.to.y - a.from.y];
                let n = v[0].hypot(v[1]);
                [v[0] / n, v[1] / n]
            }
        }
    }

    /// Unit outward normal in x-space at `pt` (loop is counter-clockwise).
    pub fn x_normal(&self, pt: LogPoint) -> [f64; 2] {
        match self {
            BoundaryPiece::Segment(g) => rot270(g.dir),
            BoundaryPiece::Arc(_) => {
                let t = self.log_tangent(pt);
                // log normal (t_y, −t_x) pushed forward by diag(e^{-X}, e^{-Y})
                scaled_unit(t[1], -pt.x, -t[0], -pt.y)
            }
        }
    }

    /// Unit outward normal in log space at `pt`.
    pub fn log_normal(&self, pt: LogPoint) -> [f64; 2] {
        rot270(self.log_tangent(pt))
    }

    /// Samples at fractions `(k + 1/2)/m`.
    pub fn samples(&self, m: usize) -> Vec<LogPoint> {
        (0..m)
            .map(|k| self.point_at((k as f64 + 0.5) / m as f64))
            .collect()
    }

    /// Log-space length of the chord between the endpoints.
    pub fn chord(&self) -> f64 {
        self.start().dist(self.end())
    }
}

/// How a pair of paths is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Closure {
    /// Two arcs in gap `gap` meeting at `meet`.
    Arcs { gap: usize, meet: LogPoint },
    /// A segment across the axis-parallel strip of arm `arm`, meeting the
    /// other path's extension at `meet`.
    Join { arm: usize, meet: LogPoint },
}

impl Closure {
    pub fn meet(&self) -> LogPoint {
        match self {
            Closure::Arcs { meet, .. } | Closure::Join { meet, .. } => *meet,
        }
    }
}

/// Named points of the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchors {
    #[serde(rename = "NM")]
    pub nm_big: LogPoint,
    #[serde(rename = "nm")]
    pub nm_small: LogPoint,
    #[serde(rename = "Aq")]
    pub aq: LogPoint,
    #[serde(rename = "Bu")]
    pub bu: LogPoint,
    #[serde(rename = "Cr")]
    pub cr: LogPoint,
    #[serde(rename = "Ds")]
    pub ds: LogPoint,
    #[serde(rename = "P_i1i2")]
    pub p12: LogPoint,
    #[serde(rename = "P_i3i4")]
    pub p34: LogPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Containment {
    Inside,
    Boundary,
    Outside,
}

/// Outcome of the post-construction checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub closure_gap: f64,
    pub simple: bool,
    pub suc_contained: bool,
    pub max_r: usize,
    pub nagumo_worst: f64,
    pub nagumo_witness: Option<LogPoint>,
    pub origin_interior: bool,
    pub samples: usize,
}

impl ValidityReport {
    pub fn failures(&self, tol: f64) -> Vec<String> {
        let mut f = vec![];
        if self.closure_gap > 1e-9 {
            f.push(format!("loop not closed (gap {:.3e})", self.closure_gap));
        }
        if !self.simple {
            f.push("loop self-intersects".into());
        }
        if !self.suc_contained {
            f.push("an intersection point lies outside".into());
        }
        if self.max_r > 1 {
            f.push(format!("boundary point in {} strips", self.max_r));
        }
        if self.nagumo_worst > tol {
            f.push(format!(
                "inward condition violated (v·n = {:.3e} at {:?})",
                self.nagumo_worst, self.nagumo_witness
            ));
        }
        if !self.origin_interior {
            f.push("(1,1) is not interior".into());
        }
        f
    }
}

/// The closed boundary `C` of the region together with its construction data.
#[derive(Debug, Clone)]
pub struct RegionBoundary {
    pub fan: Fan,
    pub delta: f64,
    pub kind: FanKind,
    /// Counter-clockwise loop.
    pub pieces: Vec<BoundaryPiece>,
    pub anchors: Anchors,
    /// `I1..I4`, each oriented away from its start point.
    pub paths: [Vec<Segment>; 4],
    pub closures: [Closure; 2],
    pub suc: Vec<IntersectionPoint>,
    pub nm_big_index: usize,
    pub nm_small_index: usize,
    pub report: Option<ValidityReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Arcs(usize),
    Join(usize),
}

struct Builder<'a> {
    fan: &'a Fan,
    delta: f64,
}

impl Builder<'_> {
    fn n(&self) -> usize {
        self.fan.arms().len()
    }

    /// One segment out of gap `k`, crossing the arm ahead.
    fn step(&self, from: LogPoint, k: usize, ccw: bool) -> Option<(Segment, usize)> {
        let n = self.n();
        let arm_k = if ccw { (k + 1) % n } else { k };
        let arm = self.fan.arms()[arm_k];
        let u = arm.dir;
        let i = arm.gen;
        let di = self.fan.di(i, self.delta);
        let (t, level) = if ccw {
            (rot90(u), arm.eps as f64 * di)
        } else {
            (rot270(u), -(arm.eps as f64) * di)
        };
        let line = LogLine::new(from, t);
        let to = line.first_root(|p| self.fan.sv(i, p) - level, MAX_PARAM)?;
        if dot(to.as_array(), u) <= self.delta {
            return None;
        }
        let clear = (0..self.fan.len())
            .all(|j| j == i || self.fan.sv(j, to).abs() >= self.fan.di(j, self.delta));
        if !clear {
            return None;
        }
        let next = if ccw { (k + 1) % n } else { (k + n - 1) % n };
        Some((
            Segment {
                from,
                to,
                dir: t,
                region: i,
            },
            next,
        ))
    }

    fn build(
        &self,
        name: &str,
        start: LogPoint,
        mut k: usize,
        ccw: bool,
        stop: usize,
    ) -> Result<Vec<Segment>, ConstructionError> {
        let mut at = start;
        let mut segs = vec![];
        for _ in 0..=self.n() {
            if k == stop {
                return Ok(segs);
            }
            let (seg, next) = self
                .step(at, k, ccw)
                .ok_or_else(|| failed(name, format!("segment out of gap {k} has no valid landing")))?;
            at = seg.to;
            segs.push(seg);
            k = next;
        }
        Err(failed(name, "traversal did not reach its stop gap"))
    }

    fn where_angle(&self, theta: f64, exact: [f64; 2]) -> Option<Target> {
        if let Some(k) = self.fan.arms().iter().position(|a| a.dir == exact) {
            return Some(Target::Join(k));
        }
        self.fan.gap_of_angle(theta).map(Target::Arcs)
    }

    fn targets(&self) -> Result<[Target; 2], ConstructionError> {
        let a = self.where_angle(PI, [-1.0, 0.0]);
        let mut b = self.where_angle(3.0 * FRAC_PI_2, [0.0, -1.0]);
        if a == b {
            b = self.where_angle(0.0, [1.0, 0.0]);
        }
        match (a, b) {
            (Some(a), Some(b)) if a != b => Ok([a, b]),
            _ => Err(failed("targets", "closing directions coincide")),
        }
    }

    fn cw_gap(&self, t: Target) -> usize {
        match t {
            Target::Arcs(k) => k,
            Target::Join(k) => (k + self.n() - 1) % self.n(),
        }
    }

    fn ccw_gap(&self, t: Target) -> usize {
        match t {
            Target::Arcs(k) | Target::Join(k) => k,
        }
    }

    fn arm_line_point(&self, ia: usize, la: f64, ib: usize, lb: f64) -> LogPoint {
        let g = self.fan.generators();
        let (pi, qi) = (g[ia].p as f64, g[ia].q as f64);
        let (pj, qj) = (g[ib].p as f64, g[ib].q as f64);
        let det = pi * qj - pj * qi;
        LogPoint::new((qi * lb - qj * la) / det, (pi * lb - pj * la) / det)
    }

    /// Where the x-ray from `e` along `t` meets the x-line through `e2`
    /// along `t2`, ahead of `e2`.
    fn ray_meet(&self, e: LogPoint, t: [f64; 2], e2: LogPoint, t2: [f64; 2]) -> Option<LogPoint> {
        let q = LogLine::new(e, t).first_root(|p| side(p, e2, t2), MAX_PARAM)?;
        (LogLine::new(e2, t2).progress(q) >= -1e-9).then_some(q)
    }

    /// Closes `pa` (arriving counter-clockwise) against `pb` (arriving
    /// clockwise) at target `t`.
    fn close(
        &self,
        t: Target,
        pa: &mut Vec<Segment>,
        pb: &mut Vec<Segment>,
        a0: LogPoint,
        b0: LogPoint,
    ) -> Result<(Closure, Vec<ArcPiece>), ConstructionError> {
        let n = self.n();
        let ea = pa.last().map_or(a0, |s| s.to);
        let eb = pb.last().map_or(b0, |s| s.to);
        match t {
            Target::Arcs(g) => {
                let arm_a = self.fan.arms()[g];
                let arm_b = self.fan.arms()[(g + 1) % n];
                let la = arm_a.eps as f64 * self.fan.di(arm_a.gen, self.delta);
                let lb = -(arm_b.eps as f64) * self.fan.di(arm_b.gen, self.delta);
                let meet = self.arm_line_point(arm_a.gen, la, arm_b.gen, lb);
                if dot(ea.as_array(), arm_a.dir) < dot(meet.as_array(), arm_a.dir)
                    || dot(eb.as_array(), arm_b.dir) < dot(meet.as_array(), arm_b.dir)
                {
                    return Err(ConstructionError::ArcsDontMeet(g));
                }
                let arcs = vec![
                    ArcPiece {
                        gen: arm_a.gen,
                        level: la,
                        from: ea,
                        to: meet,
                    },
                    ArcPiece {
                        gen: arm_b.gen,
                        level: lb,
                        from: meet,
                        to: eb,
                    },
                ];
                Ok((Closure::Arcs { gap: g, meet }, arcs))
            }
            Target::Join(k) => {
                let arm = self.fan.arms()[k];
                let u = arm.dir;
                let (Some(la), Some(lb)) = (pa.last().copied(), pb.last().copied()) else {
                    return Err(failed("join", "both paths must be nonempty"));
                };
                let meet = if dot(ea.as_array(), u) >= dot(eb.as_array(), u) {
                    let t = rot90(u);
                    let q = self
                        .ray_meet(ea, t, eb, lb.dir)
                        .ok_or_else(|| failed("join", "extension does not meet"))?;
                    pa.push(Segment {
                        from: ea,
                        to: q,
                        dir: t,
                        region: arm.gen,
                    });
                    pb.push(Segment {
                        from: eb,
                        to: q,
                        dir: lb.dir,
                        region: lb.region,
                    });
                    q
                } else {
                    let t = rot270(u);
                    let q = self
                        .ray_meet(eb, t, ea, la.dir)
                        .ok_or_else(|| failed("join", "extension does not meet"))?;
                    pb.push(Segment {
                        from: eb,
                        to: q,
                        dir: t,
                        region: arm.gen,
                    });
                    pa.push(Segment {
                        from: ea,
                        to: q,
                        dir: la.dir,
                        region: la.region,
                    });
                    q
                };
                Ok((Closure::Join { arm: k, meet }, vec![]))
            }
        }
    }
}

/// Runs the construction without the post-construction checks.
pub fn build_region(fan: &Fan, delta: f64) -> Result<RegionBoundary, ConstructionError> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(GeometryError::NonPositiveDelta(delta).into());
    }
    let kind = classify_fan(fan)?;
    let suc = intersection_points(fan);
    let all_negative = kind == FanKind::AllNegative;
    let (ib, is) = choose_start_points(&suc, all_negative);
    let nm_big = suc[ib].log(delta);
    let nm_small = suc[is].log(delta);
    let b = Builder { fan, delta };
    let [ta, tb] = b.targets()?;
    let n = b.n();
    let g0 = fan
        .gap_of(nm_big)
        .ok_or_else(|| failed("start", "(N,M) lies on an arm"))?;
    let gc = fan
        .gap_of(nm_small)
        .ok_or_else(|| failed("start", "(n,m) lies on an arm"))?;
    let dist = |t: Target| (b.cw_gap(t) + n - g0) % n;
    let (t1, t2) = if dist(ta) <= dist(tb) { (ta, tb) } else { (tb, ta) };

    let mut i1 = b.build("I1", nm_big, g0, true, b.cw_gap(t1))?;
    let mut i4 = b.build("I4", nm_big, g0, false, b.ccw_gap(t2))?;
    let mut i2 = b.build("I2", nm_small, gc, false, b.ccw_gap(t1))?;
    let mut i3 = b.build("I3", nm_small, gc, true, b.cw_gap(t2))?;
    let end = |p: &Vec<Segment>, s: LogPoint| p.last().map_or(s, |g| g.to);
    let (aq, cr, ds, bu) = (
        end(&i1, nm_big),
        end(&i2, nm_small),
        end(&i3, nm_small),
        end(&i4, nm_big),
    );
    let (j1, arcs1) = b.close(t1, &mut i1, &mut i2, nm_big, nm_small)?;
    let (j2, arcs2) = b.close(t2, &mut i3, &mut i4, nm_small, nm_big)?;

    let mut pieces: Vec<BoundaryPiece> = vec![];
    pieces.extend(i1.iter().map(|s| BoundaryPiece::Segment(*s)));
    pieces.extend(arcs1.iter().map(|a| BoundaryPiece::Arc(*a)));
    pieces.extend(i2.iter().rev().map(|s| BoundaryPiece::Segment(s.reversed())));
    pieces.extend(i3.iter().map(|s| BoundaryPiece::Segment(*s)));
    pieces.extend(arcs2.iter().map(|a| BoundaryPiece::Arc(*a)));
    pieces.extend(i4.iter().rev().map(|s| BoundaryPiece::Segment(s.reversed())));
    pieces.retain(|p| p.start() != p.end());

    Ok(RegionBoundary {
        fan: fan.clone(),
        delta,
        kind,
        pieces,
        anchors: Anchors {
            nm_big,
            nm_small,
            aq,
            bu,
            cr,
            ds,
            p12: j1.meet(),
            p34: j2.meet(),
        },
        paths: [i1, i2, i3, i4],
        closures: [j1, j2],
        suc,
        nm_big_index: ib,
        nm_small_index: is,
        report: None,
    })
}

/// Builds the boundary and runs the post-construction checks; any failure
/// means δ is not yet large enough for this fan.
pub fn construct_region(fan: &Fan, delta: f64) -> Result<RegionBoundary, ConstructionError> {
    let mut region = build_region(fan, delta).map_err(|e| match e {
        ConstructionError::ConstructionFailed { .. } | ConstructionError::ArcsDontMeet(_) => {
            ConstructionError::DeltaTooSmall(e.to_string())
        }
        e => e,
    })?;
    let samples = (1000 / region.pieces.len().max(1) + 1).max(64);
    let report = region.validate(samples);
    let fails = report.failures(1e-9);
    if !fails.is_empty() {
        return Err(ConstructionError::DeltaTooSmall(fails.join("; ")));
    }
    region.report = Some(report);
    Ok(region)
}

impl RegionBoundary {
    pub fn suc_log(&self) -> Vec<LogPoint> {
        self.suc.iter().map(|p| p.log(self.delta)).collect()
    }

    /// Largest mismatch between consecutive piece endpoints.
    pub fn closure_gap(&self) -> f64 {
        let n = self.pieces.len();
        (0..n)
            .map(|k| self.pieces[k].end().dist(self.pieces[(k + 1) % n].start()))
            .fold(0.0, f64::max)
    }

    /// Dense log-space polyline of the loop (endpoints plus `m` samples per
    /// piece).
    pub fn polyline(&self, m: usize) -> Vec<LogPoint> {
        let mut out = Vec::with_capacity(self.pieces.len() * (m + 1));
        for p in &self.pieces {
            out.push(p.start());
            out.extend(p.samples(m));
        }
        out
    }

    /// Pairwise test of non-adjacent polyline edges.
    pub fn is_simple(&self, m: usize) -> bool {
        let poly = self.polyline(m);
        let n = poly.len();
        let seg = |k: usize| (poly[k].as_array(), poly[(k + 1) % n].as_array());
        for a in 0..n {
            let (p1, p2) = seg(a);
            for b in a + 2..n {
                if a == 0 && b == n - 1 {
                    continue;
                }
                let (q1, q2) = seg(b);
                if segments_cross(p1, p2, q1, q2) {
                    return false;
                }
            }
        }
        true
    }

    /// Signed log-space area (positive for counter-clockwise loops).
    pub fn log_area(&self) -> f64 {
        let poly = self.polyline(64);
        let n = poly.len();
        0.5 * (0..n)
            .map(|k| {
                let (a, b) = (poly[k], poly[(k + 1) % n]);
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
    }

    /// Ray casting in log space with a boundary band of width `band`.
    pub fn classify_log(&self, pt: LogPoint, band: f64) -> Containment {
        let mut inside = false;
        let mut dmin = f64::INFINITY;
        for piece in &self.pieces {
            let (a, b) = (piece.start(), piece.end());
            dmin = dmin.min(pt.dist(a)).min(pt.dist(b));
            match piece {
                BoundaryPiece::Arc(_) => {
                    let (dx, dy) = (b.x - a.x, b.y - a.y);
                    let l2 = dx * dx + dy * dy;
                    let t = (((pt.x - a.x) * dx + (pt.y - a.y) * dy) / l2).clamp(0.0, 1.0);
                    dmin = dmin.min((pt.x - a.x - t * dx).hypot(pt.y - a.y - t * dy));
                    if (a.y > pt.y) != (b.y > pt.y) {
                        let xc = a.x + (pt.y - a.y) * dx / dy;
                        if xc > pt.x {
                            inside = !inside;
                        }
                    }
                }
                BoundaryPiece::Segment(s) => {
                    let in_y = (a.y.min(b.y)..=a.y.max(b.y)).contains(&pt.y) && a.y != b.y;
                    let in_x = (a.x.min(b.x)..=a.x.max(b.x)).contains(&pt.x) && a.x != b.x;
                    let h = if in_y { (pt.x - s.x_at(pt.y)).abs() } else { f64::INFINITY };
                    let v = if in_x { (pt.y - s.y_at(pt.x)).abs() } else { f64::INFINITY };
                    let d = if h.is_finite() && v.is_finite() {
                        if h == 0.0 || v == 0.0 {
                            0.0
                        } else {
                            h * v / h.hypot(v)
                        }
                    } else {
                        h.min(v)
                    };
                    // axis-parallel pieces are straight in log space too
                    let d = if a.x == b.x && in_band(pt.y, a.y, b.y) {
                        d.min((pt.x - a.x).abs())
                    } else if a.y == b.y && in_band(pt.x, a.x, b.x) {
                        d.min((pt.y - a.y).abs())
                    } else {
                        d
                    };
                    dmin = dmin.min(d);
                    if (a.y > pt.y) != (b.y > pt.y) {
                        let xc = if a.x == b.x { a.x } else { s.x_at(pt.y) };
                        if xc > pt.x {
                            inside = !inside;
                        }
                    }
                }
            }
        }
        if dmin <= band {
            Containment::Boundary
        } else if inside {
            Containment::Inside
        } else {
            Containment::Outside
        }
    }

    pub fn region_contains(&self, point: PosPoint) -> Containment {
        self.classify_log(point.to_log(), 1e-9)
    }

    /// Runs the post-construction checks with `m` samples per piece.
    pub fn validate(&self, m: usize) -> ValidityReport {
        let mut max_r = 0;
        let mut worst = f64::NEG_INFINITY;
        let mut witness = None;
        let mut samples = 0;
        for piece in &self.pieces {
            for pt in piece.samples(m) {
                samples += 1;
                max_r = max_r.max(crate::fan_geometry::r_count_log(pt, &self.fan, self.delta));
                let w = self.nagumo_at(piece, pt);
                if w > worst {
                    worst = w;
                    witness = Some(pt);
                }
            }
        }
        let band = 1e-9 * self.delta.max(1.0);
        ValidityReport {
            closure_gap: self.closure_gap(),
            simple: self.is_simple(32),
            suc_contained: self
                .suc_log()
                .iter()
                .all(|&p| self.classify_log(p, band) != Containment::Outside),
            max_r,
            nagumo_worst: worst,
            nagumo_witness: witness,
            origin_interior: self.classify_log(LogPoint::ORIGIN, 1e-9) == Containment::Inside,
            samples,
        }
    }

    /// Largest `v·n` over unit `v` in the right-hand side, evaluated just
    /// outside the boundary at `pt`.
    pub fn nagumo_at(&self, piece: &BoundaryPiece, pt: LogPoint) -> f64 {
        let nl = piece.log_normal(pt);
        let probe = LogPoint::new(pt.x + 1e-7 * nl[0], pt.y + 1e-7 * nl[1]);
        let cone = rhs_bruteforce_log(probe, &self.fan, self.delta);
        cone.worst_dot(piece.x_normal(pt))
    }

    /// x-space convex hull of the region (counter-clockwise), from segment
    /// endpoints and `arc_samples` points per arc.
    pub fn conv_hull(&self, arc_samples: usize) -> Vec<[f64; 2]> {
        let mut pts = vec![];
        for p in &self.pieces {
            let s = p.start().to_pos();
            pts.push([s.x, s.y]);
            if let BoundaryPiece::Arc(_) = p {
                for k in 1..arc_samples {
                    let q = p.point_at(k as f64 / arc_samples as f64).to_pos();
                    pts.push([q.x, q.y]);
                }
            }
        }
        convex_hull(pts)
    }
}

fn in_band(v: f64, a: f64, b: f64) -> bool {
    v >= a.min(b) && v <= a.max(b)
}

fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let sub = |a: [f64; 2], b: [f64; 2]| [a[0] - b[0], a[1] - b[1]];
    let d1 = cross(sub(p2, p1), sub(q1, p1));
    let d2 = cross(sub(p2, p1), sub(q2, p1));
    let d3 = cross(sub(q2, q1), sub(p1, q1));
    let d4 = cross(sub(q2, q1), sub(p2, q1));
    (d1 > 0.0 && d2 < 0.0 || d1 < 0.0 && d2 > 0.0) && (d3 > 0.0 && d4 < 0.0 || d3 < 0.0 && d4 > 0.0)
}

/// Andrew's monotone chain; counter-clockwise, no repeated endpoint.
pub fn convex_hull(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.retain(|p| p[0].is_finite() && p[1].is_finite());
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let turn = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Convex polygon membership with a relative tolerance (boundary counts).
pub fn in_convex_polygon(poly: &[[f64; 2]], p: [f64; 2], rel_tol: f64) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    (0..n).all(|k| {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        let e = [b[0] - a[0], b[1] - a[1]];
        let w = [p[0] - a[0], p[1] - a[1]];
        cross(e, w) >= -rel_tol * e[0].hypot(e[1]) * w[0].hypot(w[1])
    })
}

/// `n` points spread along the perimeter of a closed polygon.
pub fn sample_polygon(poly: &[[f64; 2]], n: usize) -> Vec<[f64; 2]> {
    let m = poly.len();
    let lens: Vec<f64> = (0..m)
        .map(|k| {
            let (a, b) = (poly[k], poly[(k + 1) % m]);
            (b[0] - a[0]).hypot(b[1] - a[1])
        })
        .collect();
    let total: f64 = lens.iter().sum();
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    let mut acc = 0.0;
    for s in 0..n {
        let target = total * (s as f64 + 0.5) / n as f64;
        while k + 1 < m && acc + lens[k] < target {
            acc += lens[k];
            k += 1;
        }
        let f = if lens[k] > 0.0 { ((target - acc) / lens[k]).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (poly[k], poly[(k + 1) % m]);
        out.push([a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]);
    }
    out
}

/// The level `δ ∈ [lo, hi]` whose convex boundary passes through `point`.
pub fn phi_level(
    point: PosPoint,
    fan: &Fan,
    delta_lo: f64,
    delta_hi: f64,
) -> Result<f64, ConstructionError> {
    let p = [point.x, point.y];
    let inside = |d: f64| -> Result<bool, ConstructionError> {
        let hull = build_region(fan, d)?.conv_hull(256);
        Ok(in_convex_polygon(&hull, p, 1e-12))
    };
    let strictly_inside = |d: f64| -> Result<bool, ConstructionError> {
        let hull = build_region(fan, d)?.conv_hull(256);
        Ok(in_convex_polygon(&hull, p, -1e-9))
    };
    if !inside(delta_hi)? || strictly_inside(delta_lo)? {
        return Err(ConstructionError::OutOfBand);
    }
    let (mut lo, mut hi) = (delta_lo, delta_hi);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if inside(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suc_of_the_cross_fan() {
        let fan = Fan::new(&[(1, 1), (-1, 1)]).unwrap();
        let s = 2f64.sqrt();
        let pts: Vec<(f64, f64)> = intersection_points(&fan).iter().map(|p| (p.c, p.d)).collect();
        for want in [(0.0, s), (s, 0.0), (-s, 0.0), (0.0, -s)] {
            assert!(pts
                .iter()
                .any(|p| (p.0 - want.0).abs() < 1e-12 && (p.1 - want.1).abs() < 1e-12));
        }
        let pts = intersection_points(&fan);
        let (big, small) = choose_start_points(&pts, false);
        assert!((pts[big].c).abs() < 1e-12 && (pts[big].d - s).abs() < 1e-12);
        assert!((pts[small].c + s).abs() < 1e-12 && pts[small].d.abs() < 1e-12);
    }

    #[test]
    fn curve_intersection_examples() {
        let e = std::f64::consts::E;
        let p = segment_curve_intersection(
            PosPoint::new(3.0, 4.0).unwrap(),
            -1.0,
            LineGenerator { p: 1, q: 1 },
            e,
        )
        .unwrap();
        assert!((p.x - 7.0 / (1.0 + e)).abs() < 1e-9);
        assert!((p.y - 7.0 * e / (1.0 + e)).abs() < 1e-9);
        let p = segment_curve_intersection(
            PosPoint::new(4.0, 0.5).unwrap(),
            1.0,
            LineGenerator { p: 1, q: 2 },
            1.0,
        )
        .unwrap();
        let r = 15f64.sqrt();
        assert!((p.x - (8.0 + r) / 2.0).abs() < 1e-9);
        assert!((p.y - (1.0 + r) / 2.0).abs() < 1e-9);
        // tangent start on y = x
        let t = segment_curve_intersection(
            PosPoint::new(2.0, 2.0).unwrap(),
            1.0,
            LineGenerator { p: 1, q: 1 },
            1.0,
        );
        assert_eq!(t, Err(ConstructionError::NoCrossing));
    }

    #[test]
    fn gating() {
        assert!(classify_fan(&Fan::new(&[(-1, 1), (2, 1)]).unwrap()).is_err());
        assert_eq!(
            classify_fan(&Fan::new(&crate::WORKED_FAN).unwrap()).unwrap(),
            FanKind::Standard
        );
        assert_eq!(
            classify_fan(&Fan::new(&[(1, 2), (2, 1)]).unwrap()).unwrap(),
            FanKind::AllPositive
        );
    }

    #[test]
    fn hull_basics() {
        let h = convex_hull(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]]);
        assert_eq!(h.len(), 4);
        assert!(in_convex_polygon(&h, [0.5, 0.5], 0.0));
        assert!(in_convex_polygon(&h, [1.0, 0.5], 1e-12));
        assert!(!in_convex_polygon(&h, [1.1, 0.5], 1e-12));
    }
}
