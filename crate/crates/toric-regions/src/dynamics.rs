//! Solutions of the inclusion under pluggable velocity selections, the
//! reversible mass-action systems that embed into it, and reachability
//! witnesses.

use crate::fan_geometry::{cross, dot, rot270, rot90, Cone2, Fan, LogPoint, PosPoint};
use crate::logline::log_sum_exp;
use crate::region_construction::{
    choose_start_points, classify_fan, intersection_points, ConstructionError,
    Containment, FanKind, RegionBoundary, Segment,
};
use crate::tdi_rhs::{rhs_bruteforce_log, rhs_log, ConeRHS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

/// Monomials with `|log|` above this are treated as having left the box.
pub const LOG_CAP: f64 = 700.0;

/// Default minimum speed of the strict wrapper, relative to `min(x, y)`.
pub const DEFAULT_RHO: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("monomial exponent {0:.3} exceeds the log-magnitude cap")]
    Overflow(f64),
    #[error("edge {0} has no reverse edge")]
    NotReversible(usize),
    #[error("rate {0} is not positive and finite")]
    BadRate(f64),
    #[error("step collapsed at t = {t}: velocity leaves the cone by {violation:.3e} at log point ({x:.6}, {y:.6})")]
    StepCollapse { t: f64, x: f64, y: f64, violation: f64 },
    #[error("witness leg `{leg}` failed: {reason}")]
    WitnessFailed { leg: String, reason: String },
    #[error(transparent)]
    Construction(#[from] ConstructionError),
}

/// One reaction `source → target` with a piecewise-constant rate schedule
/// `(from_time, k)`, sorted by time.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub source: [f64; 2],
    pub target: [f64; 2],
    pub rates: Vec<(f64, f64)>,
}

impl Edge {
    pub fn constant(source: [f64; 2], target: [f64; 2], k: f64) -> Edge {
        Edge {
            source,
            target,
            rates: vec![(f64::NEG_INFINITY, k)],
        }
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        self.rates
            .iter()
            .take_while(|r| r.0 <= t)
            .last()
            .or(self.rates.first())
            .map_or(0.0, |r| r.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassActionSystem {
    pub edges: Vec<Edge>,
    /// Largest `ε` with every rate in `[ε, 1/ε]`.
    pub eps: f64,
}

impl MassActionSystem {
    pub fn new(edges: Vec<Edge>) -> Result<Self, DynamicsError> {
        let mut eps: f64 = 1.0;
        for (k, e) in edges.iter().enumerate() {
            for &(_, r) in &e.rates {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(DynamicsError::BadRate(r));
                }
                eps = eps.min(r).min(1.0 / r);
            }
            if !edges
                .iter()
                .any(|f| f.source == e.target && f.target == e.source)
            {
                return Err(DynamicsError::NotReversible(k));
            }
        }
        Ok(MassActionSystem { edges, eps })
    }

    /// Vertex set in first-appearance order.
    pub fn vertices(&self) -> Vec<[f64; 2]> {
        let mut out: Vec<[f64; 2]> = vec![];
        for e in &self.edges {
            for v in [e.source, e.target] {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }

    /// `Σ k x^y (y' − y)` at a log point.
    pub fn field_log(&self, pt: LogPoint, t: f64) -> Result<[f64; 2], DynamicsError> {
        let mut v = [0.0, 0.0];
        for e in &self.edges {
            let ex = e.source[0] * pt.x + e.source[1] * pt.y + e.rate_at(t).ln();
            if ex.abs() > LOG_CAP {
                return Err(DynamicsError::Overflow(ex));
            }
            let m = ex.exp();
            v[0] += m * (e.target[0] - e.source[0]);
            v[1] += m * (e.target[1] - e.source[1]);
        }
        Ok(v)
    }
}

pub fn mass_action_field(
    system: &MassActionSystem,
    point: PosPoint,
    t: f64,
) -> Result<[f64; 2], DynamicsError> {
    system.field_log(point.to_log(), t)
}

/// `max_v |in − out| / (in + out)` over vertices, at `t = 0` rates.
pub fn complex_balance_residual(system: &MassActionSystem, point: PosPoint) -> f64 {
    complex_balance_residual_log(system, point.to_log())
}

pub fn complex_balance_residual_log(system: &MassActionSystem, pt: LogPoint) -> f64 {
    let mono = |e: &Edge| e.source[0] * pt.x + e.source[1] * pt.y + e.rate_at(0.0).ln();
    let mut worst: f64 = 0.0;
    for v in system.vertices() {
        let out: Vec<f64> = system.edges.iter().filter(|e| e.source == v).map(mono).collect();
        let inn: Vec<f64> = system.edges.iter().filter(|e| e.target == v).map(mono).collect();
        // |a − b|/(a + b) = |tanh((log a − log b)/2)|
        let d = log_sum_exp(&inn) - log_sum_exp(&out);
        let r = if d.is_nan() { 1.0 } else { (0.5 * d).tanh().abs() };
        worst = worst.max(r);
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EmbedTarget {
    /// Every reaction pair at unit rates; balanced at `(1,1)`.
    Origin11,
    /// The two pairs generating `(N,M)`, balanced there.
    PointNM,
}

/// Reaction pair `qY ⇌ pX` for generator `(p, q)`: vertices `(0, q)` and
/// `(p, 0)`, reverse rate `k`. Negative `p` stays as a negative exponent.
fn pair(p: f64, q: f64, k: f64) -> [Edge; 2] {
    let a = [0.0, q];
    let b = [p, 0.0];
    [Edge::constant(a, b, 1.0), Edge::constant(b, a, k)]
}

pub fn embedded_system_for_target(
    fan: &Fan,
    delta: f64,
    target: EmbedTarget,
) -> Result<MassActionSystem, DynamicsError> {
    let g = fan.generators();
    let edges: Vec<Edge> = match target {
        EmbedTarget::Origin11 => g
            .iter()
            .flat_map(|g| pair(g.p as f64, g.q as f64, 1.0))
            .collect(),
        EmbedTarget::PointNM => {
            let kind = classify_fan(fan)?;
            let pts = intersection_points(fan);
            let (big, _) = choose_start_points(&pts, kind == FanKind::AllNegative);
            let ip = pts[big];
            // y^q / x^p = k at (N,M): the signed boundary level of each strip
            let ki = (ip.si as f64 * fan.di(ip.i, delta)).exp();
            let kj = (ip.sj as f64 * fan.di(ip.j, delta)).exp();
            let (gi, gj) = (g[ip.i], g[ip.j]);
            let mut e = pair(gi.p as f64, gi.q as f64, ki).to_vec();
            e.extend(pair(gj.p as f64, gj.q as f64, kj));
            e
        }
    };
    MassActionSystem::new(edges)
}

/// `(N,M)` in log coordinates.
pub fn nm_point(fan: &Fan, delta: f64) -> Result<LogPoint, DynamicsError> {
    let kind = classify_fan(fan)?;
    let pts = intersection_points(fan);
    let (big, _) = choose_start_points(&pts, kind == FanKind::AllNegative);
    Ok(pts[big].log(delta))
}

/// A rule selecting an x-space velocity from the right-hand side.
pub trait Strategy: Send {
    fn name(&self) -> String;
    fn velocity(&mut self, pt: LogPoint, cone: &ConeRHS, t: f64) -> [f64; 2];
    /// Whether `velocity` reads its cone argument.
    fn needs_cone(&self) -> bool {
        true
    }
}

fn rotate(v: [f64; 2], a: f64) -> [f64; 2] {
    let (s, c) = a.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Scales an x-space direction to unit log-space speed at `pt`.
pub fn unit_log_speed(pt: LogPoint, u: [f64; 2]) -> [f64; 2] {
    let w = [u[0] * (-pt.x).exp(), u[1] * (-pt.y).exp()];
    let n = w[0].hypot(w[1]);
    if n == 0.0 || !n.is_finite() {
        return [0.0, 0.0];
    }
    [u[0] / n, u[1] / n]
}

/// x-space velocity whose log-space image is the unit vector `w`.
pub fn from_log_direction(pt: LogPoint, w: [f64; 2]) -> [f64; 2] {
    [w[0] * pt.x.exp(), w[1] * pt.y.exp()]
}

/// Counter-clockwise boundary rays `(a, b)` and opening of a pointed or
/// half-plane cone.
fn cone_edges(c: &ConeRHS) -> Option<([f64; 2], [f64; 2], f64)> {
    match c.as_cone() {
        Cone2::Sector { a, b } => Some((a, b, cross(a, b).atan2(dot(a, b)))),
        Cone2::HalfPlane(n) => Some((rot90(n), rot270(n), std::f64::consts::PI)),
        Cone2::Ray(u) => Some((u, u, 0.0)),
        _ => None,
    }
}

/// An interior direction of the cone (zero for the origin cone).
pub fn interior_direction(c: &ConeRHS) -> [f64; 2] {
    match cone_edges(c) {
        Some((a, _, w)) => rotate(a, 0.5 * w),
        None => match c.as_cone() {
            Cone2::Line(u) => u,
            Cone2::FullPlane => [1.0, 0.0],
            _ => [0.0, 0.0],
        },
    }
}

fn unit_scaled(a: f64, ea: f64, b: f64, eb: f64) -> [f64; 2] {
    let m = ea.max(eb);
    let v = [a * (ea - m).exp(), b * (eb - m).exp()];
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

/// Image of an x-space velocity cone under `v ↦ (v_x / x, v_y / y)`.
pub fn log_image(pt: LogPoint, cone: &ConeRHS) -> ConeRHS {
    let to_log = |u: [f64; 2]| unit_scaled(u[0], -pt.x, u[1], -pt.y);
    let c = match cone.as_cone() {
        Cone2::HalfPlane(n) => Cone2::HalfPlane(unit_scaled(n[0], pt.x, n[1], pt.y)),
        Cone2::Sector { a, b } => Cone2::Sector {
            a: to_log(a),
            b: to_log(b),
        },
        Cone2::Ray(u) => Cone2::Ray(to_log(u)),
        Cone2::Line(u) => Cone2::Line(to_log(u)),
        c => c,
    };
    ConeRHS::from_cone(c)
}

/// Radially away from `(1,1)` in log space, at unit log speed.
fn radial_out(pt: LogPoint) -> [f64; 2] {
    let r = pt.x.hypot(pt.y);
    let w = if r < 1e-12 { [1.0, 0.0] } else { [pt.x / r, pt.y / r] };
    from_log_direction(pt, w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Boundary rays of the cone's log-space image, tilted inward by `tilt` of
/// the opening, at unit log speed; in full-plane zones the walker heads
/// radially outward.
#[derive(Debug, Clone)]
pub struct ExtremeRay {
    pub side: Side,
    pub tilt: f64,
}

impl ExtremeRay {
    fn pick(&self, pt: LogPoint, cone: &ConeRHS, side: Side) -> [f64; 2] {
        if let ConeRHS::FullPlane = cone {
            return radial_out(pt);
        }
        let lc = log_image(pt, cone);
        let w = match cone_edges(&lc) {
            Some((a, b, w)) => match side {
                Side::Right => rotate(a, self.tilt * w),
                Side::Left => rotate(b, -self.tilt * w),
            },
            None => interior_direction(&lc),
        };
        from_log_direction(pt, w)
    }
}

impl Strategy for ExtremeRay {
    fn name(&self) -> String {
        match self.side {
            Side::Left => "extreme_left".into(),
            Side::Right => "extreme_right".into(),
        }
    }

    fn velocity(&mut self, pt: LogPoint, cone: &ConeRHS, _t: f64) -> [f64; 2] {
        self.pick(pt, cone, self.side)
    }
}

/// Switches between the left and right rays every `period`.
#[derive(Debug, Clone)]
pub struct Alternating {
    pub inner: ExtremeRay,
    pub period: f64,
}

impl Strategy for Alternating {
    fn name(&self) -> String {
        "alternating".into()
    }

    fn velocity(&mut self, pt: LogPoint, cone: &ConeRHS, t: f64) -> [f64; 2] {
        let side = if ((t / self.period).floor() as i64) % 2 == 0 {
            Side::Left
        } else {
            Side::Right
        };
        self.inner.pick(pt, cone, side)
    }
}

/// A uniformly drawn direction of the cone's log-space image, held for
/// `hold` time units or until it leaves the current cone.
#[derive(Debug, Clone)]
pub struct RandomInCone {
    rng: ChaCha8Rng,
    pub hold: f64,
    current: Option<([f64; 2], f64)>,
}

impl RandomInCone {
    pub fn new(seed: u64, hold: f64) -> Self {
        RandomInCone {
            rng: ChaCha8Rng::seed_from_u64(seed),
            hold,
            current: None,
        }
    }

    fn draw(&mut self, cone: &ConeRHS) -> [f64; 2] {
        match cone_edges(cone) {
            Some((a, _, w)) => rotate(a, self.rng.gen_range(0.0..=1.0) * w),
            None => match cone.as_cone() {
                Cone2::Line(u) => {
                    if self.rng.gen_bool(0.5) {
                        u
                    } else {
                        [-u[0], -u[1]]
                    }
                }
                Cone2::Origin => [0.0, 0.0],
                _ => rotate([1.0, 0.0], self.rng.gen_range(0.0..std::f64::consts::TAU)),
            },
        }
    }
}

impl Strategy for RandomInCone {
    fn name(&self) -> String {
        "random".into()
    }

    fn velocity(&mut self, pt: LogPoint, cone: &ConeRHS, t: f64) -> [f64; 2] {
        let lc = log_image(pt, cone);
        let keep = match self.current {
            Some((w, until)) => t < until && lc.contains(w, 1e-12),
            None => false,
        };
        if !keep {
            let w = self.draw(&lc);
            self.current = Some((w, t + self.hold));
        }
        from_log_direction(pt, self.current.unwrap().0)
    }
}

/// Flow of an embedded mass-action system (ignores the cone).
#[derive(Debug, Clone)]
pub struct MassActionFlow {
    pub system: MassActionSystem,
    pub label: String,
}

impl Strategy for MassActionFlow {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn velocity(&mut self, pt: LogPoint, _cone: &ConeRHS, t: f64) -> [f64; 2] {
        self.system
            .field_log(pt, t)
            .unwrap_or([f64::NAN, f64::NAN])
    }

    fn needs_cone(&self) -> bool {
        false
    }
}

/// Fixed x-space velocity regardless of the cone.
#[derive(Debug, Clone)]
pub struct Constant(pub [f64; 2]);

impl Strategy for Constant {
    fn name(&self) -> String {
        "constant".into()
    }

    fn velocity(&mut self, _pt: LogPoint, _cone: &ConeRHS, _t: f64) -> [f64; 2] {
        self.0
    }

    fn needs_cone(&self) -> bool {
        false
    }
}

/// Radially outward in log space everywhere; leaves the cone as soon as the
/// right-hand side is restricted.
#[derive(Debug, Clone)]
pub struct Escape;

impl Strategy for Escape {
    fn name(&self) -> String {
        "escape".into()
    }

    fn velocity(&mut self, pt: LogPoint, _cone: &ConeRHS, _t: f64) -> [f64; 2] {
        radial_out(pt)
    }

    fn needs_cone(&self) -> bool {
        false
    }
}

/// Stops dead wherever no strip contains the point; otherwise like the
/// right extreme ray. Not strict.
#[derive(Debug, Clone)]
pub struct IdleOutside(pub ExtremeRay);

impl Strategy for IdleOutside {
    fn name(&self) -> String {
        "idle_r0".into()
    }

    fn velocity(&mut self, pt: LogPoint, cone: &ConeRHS, t: f64) -> [f64; 2] {
        if let ConeRHS::ProperCone { .. } = cone {
            return [0.0, 0.0];
        }
        self.0.velocity(pt, cone, t)
    }
}

/// Raises the speed to at least `rho · min(x, y)` wherever the cone is
/// restricted; the bound is a positive constant on every compact set.
pub struct Strict<S> {
    pub inner: S,
    pub rho: f64,
}

impl Strategy for Box<dyn Strategy> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn velocity(&mut self, pt: LogPoint, cone: &ConeRHS, t: f64) -> [f64; 2] {
        (**self).velocity(pt, cone, t)
    }

    fn needs_cone(&self) -> bool {
        (**self).needs_cone()
    }
}

impl<S: Strategy> Strategy for Strict<S> {
    fn name(&self) -> String {
        format!("strict({})", self.inner.name())
    }

    fn velocity(&mut self, pt: LogPoint, cone: &ConeRHS, t: f64) -> [f64; 2] {
        let v = self.inner.velocity(pt, cone, t);
        if matches!(cone, ConeRHS::FullPlane) {
            return v;
        }
        let floor = self.rho * pt.x.min(pt.y).exp();
        let n = v[0].hypot(v[1]);
        if n >= floor {
            return v;
        }
        let u = if n > 0.0 { [v[0] / n, v[1] / n] } else { interior_direction(cone) };
        [u[0] * floor, u[1] * floor]
    }

    fn needs_cone(&self) -> bool {
        true
    }
}

/// Hands the inner strategy the intersection of the right-hand sides at all
/// points within log distance `eta` (sampled on two rings). The result is
/// a subset of the local cone, so trajectories remain solutions, while
/// selections no longer flip at zone boundaries.
///
/// The ring intersection is cached and reused while the point stays within
/// `eta / 4` of the ring centre (the local cone is always intersected in).
pub struct Buffered<S> {
    pub inner: S,
    pub fan: Fan,
    pub delta: f64,
    pub eta: f64,
    cache: Option<(LogPoint, Cone2)>,
}

impl<S> Buffered<S> {
    pub fn new(inner: S, fan: Fan, delta: f64, eta: f64) -> Self {
        Buffered {
            inner,
            fan,
            delta,
            eta,
            cache: None,
        }
    }
}

impl<S: Strategy> Buffered<S> {
    fn rings(&self, pt: LogPoint) -> Cone2 {
        let mut acc = rhs_log(pt, &self.fan, self.delta).as_cone();
        for ring in [self.eta, 0.5 * self.eta] {
            for k in 0..12 {
                let (s, c) = (std::f64::consts::TAU * k as f64 / 12.0).sin_cos();
                let q = LogPoint::new(pt.x + ring * c, pt.y + ring * s);
                acc = acc.intersect(&rhs_log(q, &self.fan, self.delta).as_cone());
            }
        }
        acc
    }

    pub fn buffered_cone(&mut self, pt: LogPoint, cone: &ConeRHS) -> ConeRHS {
        let ring = match self.cache {
            Some((c, r)) if c.dist(pt) <= 0.25 * self.eta => r,
            _ => {
                let r = self.rings(pt);
                self.cache = Some((pt, r));
                r
            }
        };
        let acc = ring.intersect(&cone.as_cone());
        match acc {
            Cone2::FullPlane | Cone2::HalfPlane(_) => ConeRHS::from_cone(acc),
            Cone2::Sector { .. } if acc.opening() > 1e-3 => ConeRHS::from_cone(acc),
            _ => *cone,
        }
    }
}

impl<S: Strategy> Strategy for Buffered<S> {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn velocity(&mut self, pt: LogPoint, cone: &ConeRHS, t: f64) -> [f64; 2] {
        let b = self.buffered_cone(pt, cone);
        self.inner.velocity(pt, &b, t)
    }
}

/// Buffer radius used by the registered adversarial strategies.
pub const DEFAULT_ETA: f64 = 0.05;

pub const STRATEGY_NAMES: [&str; 8] = [
    "origin_11",
    "point_NM",
    "extreme_left",
    "extreme_right",
    "alternating",
    "random",
    "idle_r0",
    "escape",
];

/// Default inward tilt of the adversarial rays, as a fraction of the opening.
pub const DEFAULT_TILT: f64 = 0.05;

/// Builds a registered strategy by name.
pub fn strategy_by_name(
    name: &str,
    fan: &Fan,
    delta: f64,
    seed: u64,
) -> Result<Option<Box<dyn Strategy>>, DynamicsError> {
    let ray = |side| ExtremeRay {
        side,
        tilt: DEFAULT_TILT,
    };
    let rho = DEFAULT_RHO;
    let buf = |inner: Box<dyn Strategy>| -> Box<dyn Strategy> {
        Box::new(Buffered::new(inner, fan.clone(), delta, DEFAULT_ETA))
    };
    Ok(Some(match name {
        "origin_11" | "point_NM" => {
            let target = if name == "origin_11" { EmbedTarget::Origin11 } else { EmbedTarget::PointNM };
            Box::new(MassActionFlow {
                system: embedded_system_for_target(fan, delta, target)?,
                label: name.into(),
            })
        }
        "extreme_left" => buf(Box::new(Strict { inner: ray(Side::Left), rho })),
        "extreme_right" => buf(Box::new(Strict { inner: ray(Side::Right), rho })),
        "alternating" => buf(Box::new(Strict {
            inner: Alternating {
                inner: ray(Side::Left),
                period: 1.0,
            },
            rho,
        })),
        "random" => buf(Box::new(Strict {
            inner: RandomInCone::new(seed, 1.0),
            rho,
        })),
        "idle_r0" => Box::new(IdleOutside(ray(Side::Right))),
        "escape" => Box::new(Escape),
        _ => return Ok(None),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub x: LogPoint,
    /// x-space velocity used from this sample (the step's first stage).
    pub v: [f64; 2],
    pub cone_tag: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    Completed,
    Stopped,
    MaxSteps,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub dt: f64,
    pub strategy: String,
    pub termination: Termination,
    /// Steps that fell back to a single first-stage Euler step.
    pub euler_steps: usize,
    /// Worst relative cone violation over accepted stage velocities.
    pub worst_violation: f64,
}

impl Trajectory {
    pub fn last(&self) -> LogPoint {
        self.samples.last().map(|s| s.x).unwrap_or(LogPoint::ORIGIN)
    }

    pub fn points(&self) -> Vec<PosPoint> {
        self.samples.iter().map(|s| s.x.to_pos()).collect()
    }

    /// Re-checks every recorded velocity against the brute-force cone at its
    /// sample; returns the worst relative violation.
    pub fn recheck(&self, fan: &Fan, delta: f64) -> f64 {
        self.samples
            .iter()
            .map(|s| rhs_bruteforce_log(s.x, fan, delta).violation(s.v))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Relative cone-membership tolerance for stage velocities.
    pub tol: f64,
    /// Largest log-space displacement of one step; the step shrinks below
    /// `dt` where the field is fast.
    pub max_log_step: f64,
    /// Smallest step is the current step cap over `min_factor`.
    pub min_factor: f64,
    /// Local error tolerance (log space) for step-doubling control.
    pub err_tol: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 1e-2,
            t_end: 10.0,
            tol: 1e-9,
            max_log_step: 0.05,
            min_factor: 1024.0,
            err_tol: None,
            max_steps: 5_000_000,
        }
    }
}

struct Stepper<'a> {
    strategy: &'a mut dyn Strategy,
    fan: &'a Fan,
    delta: f64,
}

impl Stepper<'_> {
    fn cone(&self, pt: LogPoint) -> ConeRHS {
        rhs_bruteforce_log(pt, self.fan, self.delta)
    }

    fn vel(&mut self, pt: LogPoint, t: f64) -> [f64; 2] {
        let cone = if self.strategy.needs_cone() {
            rhs_log(pt, self.fan, self.delta)
        } else {
            ConeRHS::FullPlane
        };
        self.strategy.velocity(pt, &cone, t)
    }

    /// One classical RK4 step in log space; returns the end point and the
    /// worst relative violation of the stage velocities against `cone0`.
    fn rk4(&mut self, x0: LogPoint, t: f64, h: f64, v1: [f64; 2], cone0: &ConeRHS) -> (LogPoint, f64) {
        let lv = |p: LogPoint, v: [f64; 2]| [v[0] * (-p.x).exp(), v[1] * (-p.y).exp()];
        let at = |k: [f64; 2], s: f64| LogPoint::new(x0.x + s * k[0], x0.y + s * k[1]);
        let k1 = lv(x0, v1);
        let p2 = at(k1, 0.5 * h);
        let v2 = self.vel(p2, t + 0.5 * h);
        let k2 = lv(p2, v2);
        let p3 = at(k2, 0.5 * h);
        let v3 = self.vel(p3, t + 0.5 * h);
        let k3 = lv(p3, v3);
        let p4 = at(k3, h);
        let v4 = self.vel(p4, t + h);
        let k4 = lv(p4, v4);
        let viol = [v2, v3, v4]
            .iter()
            .map(|&v| {
                if v[0].is_finite() && v[1].is_finite() {
                    cone0.violation(v)
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max);
        let end = LogPoint::new(
            x0.x + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            x0.y + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        );
        let viol = if end.x.is_finite() && end.y.is_finite() { viol } else { f64::INFINITY };
        (end, viol)
    }
}

/// Integrates from `start` for `t_end` with nominal step `dt`.
pub fn integrate(
    strategy: &mut dyn Strategy,
    start: PosPoint,
    fan: &Fan,
    delta: f64,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, DynamicsError> {
    let cfg = IntegratorConfig {
        dt,
        t_end,
        ..Default::default()
    };
    integrate_with(strategy, start.to_log(), fan, delta, &cfg, &mut |_, _| false)
}

/// Integration with full control; `stop(t, X)` ends the run early.
pub fn integrate_with(
    strategy: &mut dyn Strategy,
    start: LogPoint,
    fan: &Fan,
    delta: f64,
    cfg: &IntegratorConfig,
    stop: &mut dyn FnMut(f64, LogPoint) -> bool,
) -> Result<Trajectory, DynamicsError> {
    let name = strategy.name();
    let mut st = Stepper {
        strategy,
        fan,
        delta,
    };
    let mut samples = Vec::new();
    let mut x = start;
    let mut t = 0.0;
    let mut h = cfg.dt;
    let mut euler_steps = 0;
    let mut worst: f64 = 0.0;
    let mut termination = Termination::Completed;
    let collapse = |t: f64, p: LogPoint, violation: f64| DynamicsError::StepCollapse {
        t,
        x: p.x,
        y: p.y,
        violation,
    };
    loop {
        let cone0 = st.cone(x);
        let v1 = {
            let cone = if st.strategy.needs_cone() { cone0 } else { ConeRHS::FullPlane };
            st.strategy.velocity(x, &cone, t)
        };
        if !(v1[0].is_finite() && v1[1].is_finite()) {
            return Err(collapse(t, x, f64::INFINITY));
        }
        let viol1 = cone0.violation(v1);
        if viol1 > cfg.tol {
            return Err(collapse(t, x, viol1));
        }
        worst = worst.max(viol1);
        samples.push(Sample {
            t,
            x,
            v: v1,
            cone_tag: cone0.tag(),
        });
        if t >= cfg.t_end {
            break;
        }
        if stop(t, x) {
            termination = Termination::Stopped;
            break;
        }
        if samples.len() >= cfg.max_steps {
            termination = Termination::MaxSteps;
            break;
        }
        if v1 == [0.0, 0.0] && !st.strategy.needs_cone() {
            // resting point of an autonomous field
            let end = cfg.t_end;
            samples.push(Sample { t: end, x, v: v1, cone_tag: cone0.tag() });
            break;
        }
        let speed = (v1[0] * (-x.x).exp()).hypot(v1[1] * (-x.y).exp());
        let cap = if speed > 0.0 { cfg.dt.min(cfg.max_log_step / speed) } else { cfg.dt };
        let h_min = cap / cfg.min_factor;
        h = h.min(cap).min(cfg.t_end - t).max(0.0);
        loop {
            if h < h_min {
                let hs = h_min.min(cfg.t_end - t);
                x = LogPoint::new(
                    x.x + hs * v1[0] * (-x.x).exp(),
                    x.y + hs * v1[1] * (-x.y).exp(),
                );
                t += hs;
                euler_steps += 1;
                h = 2.0 * h_min;
                break;
            }
            let (end, viol) = st.rk4(x, t, h, v1, &cone0);
            let mut ok = viol <= cfg.tol;
            if ok {
                if let Some(tol) = cfg.err_tol {
                    let (mid, va) = st.rk4(x, t, 0.5 * h, v1, &cone0);
                    let vm = st.vel(mid, t + 0.5 * h);
                    let cm = st.cone(mid);
                    let (end2, vb) = st.rk4(mid, t + 0.5 * h, 0.5 * h, vm, &cm);
                    let err = end.dist(end2);
                    let scale = tol * (1.0 + end2.x.abs().max(end2.y.abs()));
                    ok = va <= cfg.tol && vb <= cfg.tol && cm.violation(vm) <= cfg.tol && err <= scale;
                    if ok {
                        worst = worst.max(viol).max(va);
                        x = end2;
                        t += h;
                        let grow = if err == 0.0 { 2.0 } else { (0.9 * (scale / err).powf(0.2)).clamp(0.2, 2.0) };
                        h = (h * grow).min(cfg.dt);
                        break;
                    }
                    if va <= cfg.tol && vb <= cfg.tol && err > scale {
                        h *= (0.9 * (scale / err).powf(0.2)).clamp(0.1, 0.5);
                        continue;
                    }
                } else {
                    worst = worst.max(viol);
                    x = end;
                    t += h;
                    h = (2.0 * h).min(cfg.dt);
                    break;
                }
            }
            h *= 0.5;
        }
        if t > cfg.t_end - 1e-12 * cfg.t_end.max(1.0) {
            t = cfg.t_end;
        }
    }
    Ok(Trajectory {
        samples,
        dt: cfg.dt,
        strategy: name,
        termination,
        euler_steps,
        worst_violation: worst,
    })
}

/// Centroids of greedy radius-`1e-3` clusters of the last `tail_fraction`
/// of the samples (log space). An estimator of the ω-limit set.
pub fn omega_limit_estimate(traj: &Trajectory, tail_fraction: f64) -> Vec<PosPoint> {
    omega_clusters(&traj.samples.iter().map(|s| s.x).collect::<Vec<_>>(), tail_fraction)
        .into_iter()
        .map(|p| p.to_pos())
        .collect()
}

pub fn omega_clusters(pts: &[LogPoint], tail_fraction: f64) -> Vec<LogPoint> {
    const R: f64 = 1e-3;
    let n = pts.len();
    let k = ((n as f64) * tail_fraction.clamp(0.0, 1.0)).ceil() as usize;
    let mut centers: Vec<(LogPoint, [f64; 2], usize)> = vec![];
    for &p in &pts[n - k.min(n)..] {
        match centers.iter_mut().find(|c| c.0.dist(p) <= R) {
            Some(c) => {
                c.1[0] += p.x;
                c.1[1] += p.y;
                c.2 += 1;
            }
            None => centers.push((p, [p.x, p.y], 1)),
        }
    }
    centers
        .into_iter()
        .map(|(_, s, m)| LogPoint::new(s[0] / m as f64, s[1] / m as f64))
        .collect()
}

/// How a witness leg moves between its endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LegKind {
    /// Straight in log space.
    LogStraight,
    /// Straight in x-space.
    XStraight,
    /// Integrated embedded flow.
    Flow,
}

#[derive(Debug, Clone, Serialize)]
pub struct Leg {
    pub name: String,
    pub kind: LegKind,
    pub trajectory: Trajectory,
}

/// A piecewise trajectory from one point of the region to another.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub legs: Vec<Leg>,
    pub worst_violation: f64,
}

impl Witness {
    /// All legs concatenated with a continuous clock.
    pub fn trajectory(&self) -> Trajectory {
        let mut samples: Vec<Sample> = vec![];
        let mut t0 = 0.0;
        for leg in &self.legs {
            for s in &leg.trajectory.samples {
                let mut s = *s;
                s.t += t0;
                if samples.last().is_none_or(|l| s.t > l.t) {
                    samples.push(s);
                }
            }
            t0 = samples.last().map_or(0.0, |s| s.t);
        }
        Trajectory {
            samples,
            dt: WITNESS_STEP,
            strategy: "witness".into(),
            termination: Termination::Completed,
            euler_steps: 0,
            worst_violation: self.worst_violation,
        }
    }

    pub fn end(&self) -> LogPoint {
        self.legs.last().map_or(LogPoint::ORIGIN, |l| l.trajectory.last())
    }
}

/// Log-space spacing of witness samples.
pub const WITNESS_STEP: f64 = 1e-2;

/// Samples a straight leg at unit log speed, the velocity at each sample
/// being the leg's direction there.
fn straight_leg(a: LogPoint, b: LogPoint, kind: LegKind) -> Vec<Sample> {
    let xa = [a.x.exp(), a.y.exp()];
    let xb = [b.x.exp(), b.y.exp()];
    let xdir = [xb[0] - xa[0], xb[1] - xa[1]];
    let along = |s: f64| match kind {
        LegKind::XStraight => {
            // drive by the log coordinate with the larger span, as pieces do
            Segment {
                from: a,
                to: b,
                dir: xdir,
                region: 0,
            }
            .point_at(s)
        }
        _ => LogPoint::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)),
    };
    let n = ((a.dist(b) / WITNESS_STEP).ceil() as usize).max(1);
    let mut out = Vec::with_capacity(n + 1);
    let mut t = 0.0;
    let mut prev = a;
    for k in 0..=n {
        let p = if k == n { b } else { along(k as f64 / n as f64) };
        t += prev.dist(p);
        prev = p;
        let v = match kind {
            LegKind::XStraight => unit_log_speed(p, xdir),
            _ => {
                let d = a.dist(b);
                if d == 0.0 {
                    [0.0, 0.0]
                } else {
                    from_log_direction(p, [(b.x - a.x) / d, (b.y - a.y) / d])
                }
            }
        };
        out.push(Sample {
            t,
            x: p,
            v,
            cone_tag: "",
        });
    }
    out
}

/// Worst relative violation of the leg's velocities, excluding the final
/// sample (where the leg hands over to the next one).
fn validate_leg(samples: &mut [Sample], fan: &Fan, delta: f64) -> (f64, Option<LogPoint>) {
    let n = samples.len();
    let mut worst: f64 = 0.0;
    let mut at = None;
    for (k, s) in samples.iter_mut().enumerate() {
        let cone = rhs_bruteforce_log(s.x, fan, delta);
        s.cone_tag = cone.tag();
        if k + 1 == n && n > 1 {
            continue;
        }
        let v = cone.violation(s.v);
        if v > worst {
            worst = v;
            at = Some(s.x);
        }
    }
    (worst, at)
}

fn make_leg(
    name: &str,
    a: LogPoint,
    b: LogPoint,
    kind: LegKind,
    fan: &Fan,
    delta: f64,
) -> (Leg, f64, Option<LogPoint>) {
    let mut samples = straight_leg(a, b, kind);
    let (w, at) = validate_leg(&mut samples, fan, delta);
    (
        Leg {
            name: name.into(),
            kind,
            trajectory: Trajectory {
                samples,
                dt: WITNESS_STEP,
                strategy: name.into(),
                termination: Termination::Completed,
                euler_steps: 0,
                worst_violation: w,
            },
        },
        w,
        at,
    )
}

/// Forward-traversable boundary paths: each starts at a seed corner.
fn boundary_routes(region: &RegionBoundary) -> Vec<(LogPoint, Vec<Segment>)> {
    let a = region.anchors;
    vec![
        (a.nm_big, region.paths[0].clone()),
        (a.nm_big, region.paths[3].clone()),
        (a.nm_small, region.paths[1].clone()),
        (a.nm_small, region.paths[2].clone()),
    ]
}

/// Candidate hand-over points: boundary points sampled on the forward
/// paths, paired with the waypoints leading there. A path is only used up
/// to its first segment that cannot be traversed (nor is it used at all
/// when its corner cannot be reached from `(1,1)`).
fn handover_candidates(
    region: &RegionBoundary,
    fan: &Fan,
    delta: f64,
    per_segment: usize,
) -> Vec<(LogPoint, Vec<LogPoint>)> {
    let mut out = vec![];
    for (corner, path) in boundary_routes(region) {
        let mut leg = straight_leg(LogPoint::ORIGIN, corner, LegKind::LogStraight);
        if validate_leg(&mut leg, fan, delta).0 > WITNESS_TOL {
            continue;
        }
        let mut way = vec![corner];
        for seg in &path {
            let mut leg = straight_leg(*way.last().unwrap(), seg.to, LegKind::XStraight);
            if validate_leg(&mut leg, fan, delta).0 > WITNESS_TOL {
                break;
            }
            for k in 1..=per_segment {
                let q = seg.point_at(k as f64 / per_segment as f64);
                let mut w = way.clone();
                w.push(q);
                out.push((corner, w));
            }
            way.push(seg.to);
        }
    }
    out
}

/// Tolerance for witness velocities.
pub const WITNESS_TOL: f64 = 1e-9;

/// Cheap screen of a final x-straight hop.
fn hop_ok(a: LogPoint, b: LogPoint, fan: &Fan, delta: f64) -> bool {
    let mut s = straight_leg(a, b, LegKind::XStraight);
    validate_leg(&mut s, fan, delta).0 <= WITNESS_TOL
}

/// A validated trajectory from `from` to `to`, both in the region.
///
/// Legs: the `(1,1)` flow (skipped when starting there), a log-straight run
/// inside the full-plane zone, forward along a boundary path from one of
/// the seed corners, then one or two x-straight hops to the target.
pub fn reach_witness(
    from: PosPoint,
    to: PosPoint,
    fan: &Fan,
    delta: f64,
    region: &RegionBoundary,
) -> Result<Witness, DynamicsError> {
    reach_witness_log(from.to_log(), to.to_log(), fan, delta, region)
}

pub fn reach_witness_log(
    from: LogPoint,
    to: LogPoint,
    fan: &Fan,
    delta: f64,
    region: &RegionBoundary,
) -> Result<Witness, DynamicsError> {
    let fail = |leg: &str, reason: String| DynamicsError::WitnessFailed {
        leg: leg.into(),
        reason,
    };
    for (nm, p) in [("from", from), ("to", to)] {
        if region.classify_log(p, 1e-9) == Containment::Outside {
            return Err(fail(nm, format!("({:.6}, {:.6}) is outside the region", p.x, p.y)));
        }
    }
    let mut legs = vec![];
    let mut worst: f64 = 0.0;
    if from.dist(LogPoint::ORIGIN) > 0.0 {
        let mut flow = MassActionFlow {
            system: embedded_system_for_target(fan, delta, EmbedTarget::Origin11)?,
            label: "origin_11".into(),
        };
        let cfg = IntegratorConfig {
            t_end: 400.0,
            err_tol: Some(1e-10),
            ..Default::default()
        };
        let traj = integrate_with(&mut flow, from, fan, delta, &cfg, &mut |_, p| {
            p.dist(LogPoint::ORIGIN) < 1e-3
        })
        .map_err(|e| fail("approach", e.to_string()))?;
        let end = traj.last();
        worst = worst.max(traj.worst_violation);
        legs.push(Leg {
            name: "approach".into(),
            kind: LegKind::Flow,
            trajectory: traj,
        });
        let (leg, w, at) = make_leg("settle", end, LogPoint::ORIGIN, LegKind::LogStraight, fan, delta);
        if w > WITNESS_TOL {
            return Err(fail("settle", format!("violation {w:.3e} at {at:?}")));
        }
        legs.push(leg);
    }
    let r = crate::fan_geometry::r_count_log(to, fan, delta);
    if r >= 2 {
        let (leg, w, at) = make_leg("interior", LogPoint::ORIGIN, to, LegKind::LogStraight, fan, delta);
        if w > WITNESS_TOL {
            return Err(fail("interior", format!("violation {w:.3e} at {at:?}")));
        }
        legs.push(leg);
        return Ok(Witness {
            legs,
            worst_violation: worst.max(w),
        });
    }
    // last hop from a reachable boundary point, else via one intermediate
    let cands = handover_candidates(region, fan, delta, 16);
    let mut route: Option<(Vec<LogPoint>, Vec<LogPoint>)> = None;
    for (_, way) in &cands {
        if hop_ok(*way.last().unwrap(), to, fan, delta) {
            route = Some((way.clone(), vec![to]));
            break;
        }
    }
    if route.is_none() {
        'outer: for mid in intermediate_points(to, fan, delta, region) {
            for (_, way) in &cands {
                if hop_ok(mid, to, fan, delta) && hop_ok(*way.last().unwrap(), mid, fan, delta) {
                    route = Some((way.clone(), vec![mid, to]));
                    break 'outer;
                }
            }
        }
    }
    let (way, hops) = route.ok_or_else(|| {
        fail(
            "handover",
            format!("no validated hop reaches ({:.6}, {:.6})", to.x, to.y),
        )
    })?;
    let (leg, w, at) = make_leg("corner", LogPoint::ORIGIN, way[0], LegKind::LogStraight, fan, delta);
    if w > WITNESS_TOL {
        return Err(fail("corner", format!("violation {w:.3e} at {at:?}")));
    }
    worst = worst.max(w);
    legs.push(leg);
    let mut prev = way[0];
    let mut steps: Vec<(String, LogPoint)> = way[1..]
        .iter()
        .enumerate()
        .map(|(k, &p)| (format!("boundary{k}"), p))
        .collect();
    steps.extend(hops.iter().enumerate().map(|(k, &p)| (format!("hop{k}"), p)));
    for (name, p) in steps {
        let (leg, w, at) = make_leg(&name, prev, p, LegKind::XStraight, fan, delta);
        if w > WITNESS_TOL {
            return Err(fail(&name, format!("violation {w:.3e} at {at:?}")));
        }
        worst = worst.max(w);
        legs.push(leg);
        prev = p;
    }
    Ok(Witness {
        legs,
        worst_violation: worst,
    })
}

/// Candidate intermediate points for two-hop routes: along x-rays from the
/// target in directions spread over the half-plane facing away from the
/// origin, stopping before the region's boundary.
fn intermediate_points(to: LogPoint, fan: &Fan, delta: f64, region: &RegionBoundary) -> Vec<LogPoint> {
    let mut out = vec![];
    let base = [to.x, to.y];
    let r = base[0].hypot(base[1]).max(1e-12);
    let outward = [base[0] / r, base[1] / r];
    for k in 0..32 {
        let ang = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * (k as f64 + 0.5) / 32.0;
        // log-space direction, mapped to x-space at the target
        let w = rotate(outward, ang);
        let u = from_log_direction(to, w);
        let line = crate::logline::LogLine::new(to, u);
        for s in [0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2] {
            let s = if line.forward_up { s } else { -s };
            let Some(p) = line.at(s) else { break };
            if region.classify_log(p, 1e-9) != Containment::Inside {
                break;
            }
            if crate::fan_geometry::r_count_log(p, fan, delta) >= 1 {
                out.push(p);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region_construction::construct_region;
    use crate::WORKED_FAN;

    fn worked() -> Fan {
        Fan::new(&WORKED_FAN).unwrap()
    }

    fn swap_system() -> MassActionSystem {
        MassActionSystem::new(vec![
            Edge::constant([0.0, 1.0], [1.0, 0.0], 1.0),
            Edge::constant([1.0, 0.0], [0.0, 1.0], 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn field_of_the_swap_system() {
        let s = swap_system();
        let v = mass_action_field(&s, PosPoint::new(2.0, 3.0).unwrap(), 0.0).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-14 && (v[1] + 1.0).abs() < 1e-14);
        for x in [0.1, 1.0, 7.5] {
            let v = mass_action_field(&s, PosPoint::new(x, x).unwrap(), 0.0).unwrap();
            assert_eq!(v, [0.0, 0.0]);
        }
    }

    #[test]
    fn residuals() {
        let s = swap_system();
        assert_eq!(complex_balance_residual(&s, PosPoint::new(2.5, 2.5).unwrap()), 0.0);
        assert!(complex_balance_residual(&s, PosPoint::new(2.0, 3.0).unwrap()) > 0.1);
        let fan = worked();
        let o = embedded_system_for_target(&fan, 3.0, EmbedTarget::Origin11).unwrap();
        assert_eq!(complex_balance_residual_log(&o, LogPoint::ORIGIN), 0.0);
        let nm = embedded_system_for_target(&fan, 3.0, EmbedTarget::PointNM).unwrap();
        let p = nm_point(&fan, 3.0).unwrap();
        assert!(complex_balance_residual_log(&nm, p) <= 1e-12);
        let v = nm.field_log(p, 0.0).unwrap();
        let scale = (p.x.max(p.y) * 2.0).exp();
        assert!(v[0].hypot(v[1]) <= 1e-10 * scale);
    }

    #[test]
    fn irreversible_and_bad_rates_are_refused() {
        let e = Edge::constant([0.0, 1.0], [1.0, 0.0], 1.0);
        assert_eq!(MassActionSystem::new(vec![e.clone()]), Err(DynamicsError::NotReversible(0)));
        let r = Edge::constant([1.0, 0.0], [0.0, 1.0], 0.0);
        assert!(matches!(MassActionSystem::new(vec![e, r]), Err(DynamicsError::BadRate(_))));
    }

    #[test]
    fn overflow_past_the_cap() {
        let s = swap_system();
        assert!(matches!(s.field_log(LogPoint::new(800.0, 0.0), 0.0), Err(DynamicsError::Overflow(_))));
    }

    #[test]
    fn constant_velocity_is_exact() {
        let fan = worked();
        let mut s = Constant([1.0, 0.0]);
        let tr = integrate(&mut s, PosPoint::new(1.0, 1.0).unwrap(), &fan, 3.0, 0.5, 0.5).unwrap();
        let end = tr.last().to_pos();
        // log-space RK4 is not exact for 1/x, only close
        assert!((end.x - 1.5).abs() < 1e-7, "{}", end.x);
        assert!((end.y - 1.0).abs() < 1e-15);
        assert!(tr.samples.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(tr.samples.last().unwrap().t, 0.5);
    }

    #[test]
    fn origin_flow_from_the_spec_start() {
        let fan = worked();
        let mut s = strategy_by_name("origin_11", &fan, 3.0, 0).unwrap().unwrap();
        let start = PosPoint::new(3f64.exp(), (-2f64).exp()).unwrap();
        let tr = integrate(s.as_mut(), start, &fan, 3.0, 200.0, 1e-2).unwrap();
        let end = tr.last().to_pos();
        assert!((end.x - 1.0).abs() < 1e-6 && (end.y - 1.0).abs() < 1e-6, "{end:?}");
        assert!(tr.recheck(&fan, 3.0) <= 1e-9);
    }

    #[test]
    fn escaping_strategy_collapses() {
        let fan = worked();
        let mut s = Escape;
        let err = integrate(&mut s, PosPoint::new(1.0, 1.0).unwrap(), &fan, 3.0, 100.0, 1e-2).unwrap_err();
        assert!(matches!(err, DynamicsError::StepCollapse { .. }));
    }

    #[test]
    fn strict_wrapper_has_a_floor() {
        let fan = worked();
        let mut s = Strict { inner: IdleOutside(ExtremeRay { side: Side::Left, tilt: 0.05 }), rho: 1e-3 };
        let (pt, cone) = (0..36)
            .map(|k| {
                let (s, c) = (k as f64 * 0.17).sin_cos();
                let pt = LogPoint::new(20.0 * c, 20.0 * s);
                (pt, rhs_bruteforce_log(pt, &fan, 3.0))
            })
            .find(|(_, c)| matches!(c, ConeRHS::ProperCone { .. }))
            .unwrap();
        let v = s.velocity(pt, &cone, 0.0);
        assert!(v[0].hypot(v[1]) >= 1e-3 * pt.x.min(pt.y).exp() * (1.0 - 1e-12));
        assert!(cone.violation(v) <= 1e-9);
    }

    #[test]
    fn log_image_matches_pointwise_mapping() {
        let fan = worked();
        for pt in [LogPoint::new(8.0, -8.0), LogPoint::new(-3.0, 5.0), LogPoint::new(0.3, 9.0)] {
            let c = rhs_bruteforce_log(pt, &fan, 3.0);
            let lc = log_image(pt, &c);
            for r in c.extreme_rays() {
                let w = [r[0] * (-pt.x).exp(), r[1] * (-pt.y).exp()];
                assert!(lc.violation(w) <= 1e-9, "{pt:?}");
            }
        }
    }

    #[test]
    fn adversaries_stay_inside_from_the_boundary() {
        let fan = worked();
        let region = construct_region(&fan, 3.0).unwrap();
        let cfg = IntegratorConfig { t_end: 30.0, ..Default::default() };
        for (k, piece) in region.pieces.iter().enumerate().step_by(2) {
            let start = piece.point_at(0.5);
            for name in ["extreme_left", "extreme_right"] {
                let mut s = strategy_by_name(name, &fan, 3.0, k as u64).unwrap().unwrap();
                let tr = integrate_with(s.as_mut(), start, &fan, 3.0, &cfg, &mut |_, _| false).unwrap();
                for smp in &tr.samples {
                    assert_ne!(region.classify_log(smp.x, 1e-6), Containment::Outside, "{name} from {start:?}");
                }
            }
        }
    }

    #[test]
    fn omega_of_a_constant_and_a_circle() {
        let p = LogPoint::new(0.7, -0.2);
        let om = omega_clusters(&vec![p; 200], 0.5);
        assert_eq!(om.len(), 1);
        assert!(om[0].dist(p) < 1e-12);
        let n = 200_000;
        let circle: Vec<LogPoint> = (0..n)
            .map(|k| {
                let (s, c) = (std::f64::consts::TAU * k as f64 / 20_000.0).sin_cos();
                LogPoint::new(c, s)
            })
            .collect();
        let cs = omega_clusters(&circle, 0.5);
        for c in &cs {
            assert!((c.x.hypot(c.y) - 1.0).abs() < 1e-3);
        }
        for q in circle.iter().step_by(97) {
            assert!(cs.iter().any(|c| c.dist(*q) <= 1e-3));
        }
    }

    #[test]
    fn omega_of_the_origin_flow() {
        let fan = worked();
        let mut s = strategy_by_name("origin_11", &fan, 3.0, 0).unwrap().unwrap();
        let tr = integrate(s.as_mut(), PosPoint::new(5.0, 0.2).unwrap(), &fan, 3.0, 200.0, 1e-2).unwrap();
        let om = omega_limit_estimate(&tr, 0.2);
        assert_eq!(om.len(), 1);
        assert!((om[0].x - 1.0).abs() < 1e-3 && (om[0].y - 1.0).abs() < 1e-3);
    }

    #[test]
    fn witness_shapes() {
        let fan = worked();
        let region = construct_region(&fan, 3.0).unwrap();
        let w = reach_witness_log(LogPoint::ORIGIN, LogPoint::ORIGIN, &fan, 3.0, &region).unwrap();
        assert_eq!(w.legs.len(), 1);
        for p in region.suc_log().into_iter().filter(|p| region.classify_log(*p, 1e-6) == Containment::Inside) {
            let w = reach_witness_log(LogPoint::ORIGIN, p, &fan, 3.0, &region).unwrap();
            assert!(w.end().dist(p) < 1e-12);
            assert!(w.worst_violation <= WITNESS_TOL);
        }
        let far = LogPoint::new(40.0, 40.0);
        assert!(matches!(
            reach_witness_log(LogPoint::ORIGIN, far, &fan, 3.0, &region),
            Err(DynamicsError::WitnessFailed { .. })
        ));
    }

    #[test]
    fn witness_from_an_interior_point() {
        let fan = worked();
        let region = construct_region(&fan, 3.0).unwrap();
        let from = LogPoint::new(1.5, -0.5);
        let to = region.anchors.nm_big;
        let to = LogPoint::new(0.9 * to.x, 0.9 * to.y);
        let w = reach_witness_log(from, to, &fan, 3.0, &region).unwrap();
        assert_eq!(w.legs[0].kind, LegKind::Flow);
        let tr = w.trajectory();
        assert!(tr.samples.windows(2).all(|p| p[1].t > p[0].t));
        assert!(w.end().dist(to) < 1e-12);
    }
}
