//! Named empirical checks over a constructed region, each producing a
//! [`CheckReport`], and the battery that runs them all.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{
    omega_clusters, reach_witness_log, strategy_by_name, integrate_with, DynamicsError,
    IntegratorConfig, Trajectory, WITNESS_TOL,
};
use crate::fan_geometry::{r_count_log, Fan, LogPoint};
use crate::logline::log_abs_diff;
use crate::region_construction::{
    build_region, classify_fan, construct_region, in_convex_polygon, phi_level, sample_polygon,
    segment_curve_intersection, ArcPiece, BoundaryPiece, ConstructionError, Containment, FanKind,
    RegionBoundary, Segment,
};
use crate::tdi_rhs::{rhs_bruteforce_log, rhs_classified_log, rhs_subfan_subset_log};

/// Tolerance for purely geometric checks.
pub const GEOMETRIC_TOL: f64 = 1e-9;
/// Tolerance for checks polluted by time integration.
pub const DYNAMIC_TOL: f64 = 1e-6;

/// Outcome of one check. Reports contain no timings, so they are
/// reproducible for fixed inputs and seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    /// The property checked, in words.
    pub property: String,
    pub pass: bool,
    /// `false` when the property's hypotheses fail for this fan; such
    /// reports count as passing.
    pub applicable: bool,
    /// Largest violation (check-specific units; ≤ 0 is good for margins).
    pub worst: f64,
    /// Log-space points where the worst or failing cases occurred.
    pub witnesses: Vec<[f64; 2]>,
    pub samples: usize,
    pub params: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(name: &str, property: &str) -> Self {
        CheckReport {
            name: name.into(),
            property: property.into(),
            pass: true,
            applicable: true,
            worst: 0.0,
            witnesses: vec![],
            samples: 0,
            params: BTreeMap::new(),
            notes: vec![],
        }
    }

    pub fn param(mut self, k: &str, v: impl ToString) -> Self {
        self.params.insert(k.into(), v.to_string());
        self
    }

    fn not_applicable(mut self, why: &str) -> Self {
        self.applicable = false;
        self.pass = true;
        self.notes.push(why.into());
        self
    }

    fn witness(&mut self, p: LogPoint) {
        if self.witnesses.len() < 16 {
            self.witnesses.push([p.x, p.y]);
        }
    }

    fn fail(&mut self, note: String) {
        self.pass = false;
        if self.notes.len() < 32 {
            self.notes.push(note);
        }
    }

    /// One-line summary.
    pub fn line(&self) -> String {
        let status = match (self.applicable, self.pass) {
            (false, _) => "n/a ",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        format!(
            "{status} {:<22} worst={:.3e} samples={}",
            self.name, self.worst, self.samples
        )
    }
}

/// Whether every applicable report passed.
pub fn all_pass(reports: &[CheckReport]) -> bool {
    reports.iter().all(|r| r.pass)
}

// -- frame handling ---------------------------------------------------------

/// The slope chains and cone lemmas are stated for `M ≥ N`; otherwise they
/// are read in the frame reflected across `y = x`.
#[derive(Debug, Clone, Copy)]
struct Frame {
    swap: bool,
}

impl Frame {
    fn of(region: &RegionBoundary) -> Frame {
        let a = region.anchors.nm_big;
        Frame { swap: a.x > a.y }
    }

    fn pt(&self, p: LogPoint) -> LogPoint {
        if self.swap {
            LogPoint::new(p.y, p.x)
        } else {
            p
        }
    }

    /// Path `I_{k+1}` as seen in the frame.
    fn path<'a>(&self, region: &'a RegionBoundary, k: usize) -> &'a [Segment] {
        let k = if self.swap { 3 - k } else { k };
        &region.paths[k]
    }

    fn slope(&self, s: &Segment) -> f64 {
        let d = if self.swap { [s.dir[1], s.dir[0]] } else { s.dir };
        d[1] / d[0]
    }
}

/// Sign and `log|slope|` of the x-space chord between two log points.
fn chord_slope(a: LogPoint, b: LogPoint) -> (f64, f64) {
    let sy = (b.y - a.y).signum();
    let sx = (b.x - a.x).signum();
    (sy * sx, log_abs_diff(b.y, a.y) - log_abs_diff(b.x, a.x))
}

/// The x-space straight chord from `a` to `b` as a segment.
fn chord(a: LogPoint, b: LogPoint) -> Segment {
    let m = a.x.max(a.y).max(b.x).max(b.y);
    let d = [(b.x - m).exp() - (a.x - m).exp(), (b.y - m).exp() - (a.y - m).exp()];
    let n = d[0].hypot(d[1]);
    Segment {
        from: a,
        to: b,
        dir: [d[0] / n, d[1] / n],
        region: 0,
    }
}

fn strictly_increasing(v: &[f64]) -> Option<usize> {
    v.windows(2).position(|w| !(w[0] < w[1]))
}

// -- construction checks ----------------------------------------------------

/// Closed simple loop with `(1,1)` in its interior.
pub fn check_loop(region: &RegionBoundary) -> CheckReport {
    let mut r = CheckReport::new("closed_simple_loop", "the boundary is a closed simple loop around (1,1)");
    r.worst = region.closure_gap();
    r.samples = region.pieces.len();
    if r.worst > GEOMETRIC_TOL {
        r.fail(format!("closure gap {:.3e}", r.worst));
    }
    if !region.is_simple(32) {
        r.fail("loop self-intersects".into());
    }
    if region.classify_log(LogPoint::ORIGIN, GEOMETRIC_TOL) != Containment::Inside {
        r.fail("(1,1) is not interior".into());
        r.witness(LogPoint::ORIGIN);
    }
    r.param("pieces", region.pieces.len())
}

/// Every intersection point of strip boundaries lies in the region.
pub fn check_suc_contained(region: &RegionBoundary) -> CheckReport {
    let mut r = CheckReport::new(
        "suc_contained",
        "all pairwise strip-boundary intersection points lie in the region",
    );
    let band = GEOMETRIC_TOL * region.delta.max(1.0);
    for p in region.suc_log() {
        r.samples += 1;
        if region.classify_log(p, band) == Containment::Outside {
            r.witness(p);
            r.fail(format!("({:.6}, {:.6}) is outside", p.x, p.y));
        }
    }
    r.param("band", band)
}

/// Samples spread over the loop by log-space chord length, at least `n`.
fn boundary_samples(region: &RegionBoundary, n: usize) -> Vec<(usize, LogPoint)> {
    let total: f64 = region.pieces.iter().map(|p| p.chord()).sum();
    let mut out = vec![];
    for (k, p) in region.pieces.iter().enumerate() {
        let m = ((n as f64 * p.chord() / total).ceil() as usize).max(2);
        out.extend(p.samples(m).into_iter().map(|q| (k, q)));
    }
    out
}

/// Each boundary point lies in the open interior of at most one strip.
pub fn check_boundary_strips(region: &RegionBoundary, fan: &Fan, delta: f64, samples: usize) -> CheckReport {
    let mut r = CheckReport::new("boundary_single_strip", "every boundary point lies in at most one strip");
    let mut worst = 0;
    for (_, p) in boundary_samples(region, samples) {
        r.samples += 1;
        let c = r_count_log(p, fan, delta);
        if c > 1 {
            r.witness(p);
            r.fail(format!("r = {c} at ({:.6}, {:.6})", p.x, p.y));
        }
        worst = worst.max(c);
    }
    r.worst = worst as f64;
    r.param("max_r", worst)
}

/// Nagumo inward condition: at each boundary sample, the largest `v·n` over
/// unit velocities `v` of the right-hand side (evaluated just outside) is
/// at most the tolerance.
pub fn check_invariance(region: &RegionBoundary, fan: &Fan, delta: f64, samples: usize) -> CheckReport {
    let mut r = CheckReport::new(
        "invariance",
        "every admissible velocity on the boundary points into the region",
    );
    let mut worst = f64::NEG_INFINITY;
    let mut at = None;
    for (k, p) in boundary_samples(region, samples) {
        r.samples += 1;
        let piece = &region.pieces[k];
        let nl = piece.log_normal(p);
        let probe = LogPoint::new(p.x + 1e-7 * nl[0], p.y + 1e-7 * nl[1]);
        let w = rhs_bruteforce_log(probe, fan, delta).worst_dot(piece.x_normal(p));
        if w > worst {
            worst = w;
            at = Some(p);
        }
    }
    r.worst = worst;
    if let Some(p) = at {
        r.witness(p);
        if worst > GEOMETRIC_TOL {
            r.fail(format!("v·n = {worst:.3e} at ({:.6}, {:.6})", p.x, p.y));
        }
    }
    r.param("tol", GEOMETRIC_TOL).param("delta", delta)
}

/// A copy of the loop scaled by `factor` about the log origin, each piece
/// replaced by `per_piece` log-straight chords.
pub fn scaled_region(region: &RegionBoundary, factor: f64, per_piece: usize) -> RegionBoundary {
    let sc = |p: LogPoint| LogPoint::new(factor * p.x, factor * p.y);
    let mut pieces = vec![];
    for p in &region.pieces {
        for k in 0..per_piece {
            let a = sc(p.point_at(k as f64 / per_piece as f64));
            let b = sc(p.point_at((k + 1) as f64 / per_piece as f64));
            pieces.push(BoundaryPiece::Arc(ArcPiece {
                gen: 0,
                level: f64::NAN,
                from: a,
                to: b,
            }));
        }
    }
    RegionBoundary {
        pieces,
        report: None,
        ..region.clone()
    }
}

/// Slope orderings along the paths: `I4` back from its x-extreme vertex
/// then `I1` strictly increasing; the rest of `I4` positive and increasing
/// toward that vertex; `I2` reversed then `I3` increasing and negative.
pub fn check_slope_chains(region: &RegionBoundary) -> CheckReport {
    let r = CheckReport::new("slope_chains", "segment slopes follow the traversal order");
    if region.kind != FanKind::Standard {
        return r.not_applicable("stated for fans with negative, shallow and steep slopes");
    }
    let mut r = r;
    let f = Frame::of(region);
    let (i1, i2, i3, i4) = (f.path(region, 0), f.path(region, 1), f.path(region, 2), f.path(region, 3));
    // vertex with the largest frame-x on I4
    let mut xs = vec![f.pt(region.anchors.nm_big).x];
    xs.extend(i4.iter().map(|s| f.pt(s.to).x));
    let p = (0..xs.len()).max_by(|&a, &b| xs[a].total_cmp(&xs[b])).unwrap();
    let s = |v: &[Segment]| v.iter().map(|s| f.slope(s)).collect::<Vec<f64>>();
    let mut c1: Vec<f64> = s(&i4[..p]).into_iter().rev().collect();
    c1.extend(s(i1));
    let c3: Vec<f64> = s(&i4[p..]).into_iter().rev().collect();
    let mut c2: Vec<f64> = s(i2).into_iter().rev().collect();
    c2.extend(s(i3));
    for (name, c) in [("chain 1", &c1), ("chain 2", &c2), ("chain 3", &c3)] {
        r.samples += c.len();
        if let Some(k) = strictly_increasing(c) {
            r.fail(format!("{name} not increasing at {k}: {c:?}"));
        }
    }
    if c3.iter().any(|&v| !(v > 0.0)) {
        r.fail(format!("chain 3 has a non-positive slope: {c3:?}"));
    }
    if c2.iter().any(|&v| !(v < 0.0)) {
        r.fail(format!("chain 2 has a non-negative slope: {c2:?}"));
    }
    r.worst = if r.pass { 0.0 } else { 1.0 };
    r.param("chain1", format!("{c1:?}"))
        .param("chain2", format!("{c2:?}"))
        .param("chain3", format!("{c3:?}"))
        .param("reflected", f.swap)
}

/// Chords `l1..l4` from the seed corners to the path ends: `l2`, `l3` and
/// `l4` have negative slope, `A_q` lies left of `(N,M)`, and the chords'
/// quartile points lie in the region.
pub fn check_cone_containment(region: &RegionBoundary) -> CheckReport {
    let r = CheckReport::new(
        "cone_containment",
        "the corner cones contain the quadrant above (n,m) and the ray below (N,M)",
    );
    if region.kind != FanKind::Standard {
        return r.not_applicable("stated for fans with negative, shallow and steep slopes");
    }
    let mut r = r;
    let f = Frame::of(region);
    let a = region.anchors;
    let end = |k: usize, start: LogPoint| f.path(region, k).last().map_or(start, |s| s.to);
    let (aq, cr, ds, bu) = (end(0, a.nm_big), end(1, a.nm_small), end(2, a.nm_small), end(3, a.nm_big));
    let chords = [("l1", a.nm_big, aq), ("l2", a.nm_small, cr), ("l3", a.nm_small, ds), ("l4", a.nm_big, bu)];
    for (name, from, to) in chords {
        if from == to {
            r.notes.push(format!("{name} is degenerate"));
            continue;
        }
        let (sg, _) = chord_slope(f.pt(from), f.pt(to));
        if name != "l1" && !(sg < 0.0) {
            r.fail(format!("{name} slope is not negative"));
            r.witness(to);
        }
        let seg = chord(from, to);
        for s in [0.25, 0.5, 0.75] {
            r.samples += 1;
            let q = seg.point_at(s);
            if region.classify_log(q, GEOMETRIC_TOL * region.delta) == Containment::Outside {
                r.fail(format!("{name} leaves the region at ({:.6}, {:.6})", q.x, q.y));
                r.witness(q);
            }
        }
    }
    let (xq, n) = (f.pt(aq).x, f.pt(a.nm_big).x);
    r.worst = xq - n;
    if !(xq < n) {
        r.fail(format!("A_q is not left of (N,M): {xq:.6} ≥ {n:.6}"));
    }
    r.param("reflected", f.swap)
}

/// Along every arc the x-space tangent slope is strictly monotone; for the
/// standard case it increases in loop order.
pub fn check_arc_tangents(region: &RegionBoundary, samples: usize) -> CheckReport {
    let mut r = CheckReport::new("arc_tangent_monotone", "tangent slopes along the closing arcs are monotone");
    let mut arcs = 0;
    for p in &region.pieces {
        let BoundaryPiece::Arc(a) = p else { continue };
        let g = region.fan.generators()[a.gen];
        if g.p == 0 || g.q == 0 {
            continue;
        }
        arcs += 1;
        // slope = (p/q)·y/x, so its motion follows sign(p/q)·d(Y − X)
        let sgn = (g.p * g.q).signum() as f64;
        let v: Vec<f64> = (0..=samples)
            .map(|k| {
                let q = p.point_at(k as f64 / samples as f64);
                sgn * (q.y - q.x)
            })
            .collect();
        r.samples += v.len();
        let inc = strictly_increasing(&v).is_none();
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let dec = strictly_increasing(&neg).is_none();
        let ok = if region.kind == FanKind::Standard { inc } else { inc || dec };
        if !ok {
            r.fail(format!("arc on generator {:?} is not monotone as required", g.as_pair()));
            r.witness(a.from);
        }
    }
    if arcs == 0 {
        return r.not_applicable("no curved closing pieces");
    }
    r.param("arcs", arcs)
}

/// `log x_u − log M` (in the frame), the offset of the knee of `I4`.
pub fn knee_offset(region: &RegionBoundary) -> f64 {
    let f = Frame::of(region);
    let bu = f.path(region, 3).last().map_or(region.anchors.nm_big, |s| s.to);
    f.pt(bu).x - f.pt(region.anchors.nm_big).y
}

/// Knee offsets stay within an additive band of width `log 10`.
pub fn check_knee(fan: &Fan, deltas: &[f64]) -> CheckReport {
    let mut r = CheckReport::new("knee_scaling", "log x_u − log M stays in a band of width log 10");
    let mut vals = vec![];
    for &d in deltas {
        match construct_region(fan, d) {
            Ok(reg) => {
                if reg.kind != FanKind::Standard {
                    return r.not_applicable("stated for fans with negative, shallow and steep slopes");
                }
                vals.push(knee_offset(&reg));
            }
            Err(e) => r.fail(format!("δ = {d}: {e}")),
        }
    }
    r.samples = vals.len();
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    r.worst = hi - lo;
    if !(r.worst <= 10f64.ln()) {
        r.fail(format!("band width {:.6} exceeds log 10", r.worst));
    }
    r.param("deltas", format!("{deltas:?}")).param("offsets", format!("{vals:?}"))
}

/// `log|slope|` of chords from `(N,M)` to each other intersection point,
/// one row per point, one column per δ. Points coinciding with `(N,M)` or
/// level with it are skipped.
pub fn chord_slope_sweep(fan: &Fan, deltas: &[f64]) -> Result<Vec<Vec<f64>>, ConstructionError> {
    let regions: Vec<RegionBoundary> = deltas
        .iter()
        .map(|&d| build_region(fan, d))
        .collect::<Result<_, _>>()?;
    let n = regions[0].suc.len();
    let ib = regions[0].nm_big_index;
    let mut rows = vec![];
    for k in (0..n).filter(|&k| k != ib) {
        let row: Vec<f64> = regions
            .iter()
            .map(|reg| {
                let a = reg.suc[ib].log(reg.delta);
                let b = reg.suc[k].log(reg.delta);
                chord_slope(a, b).1
            })
            .collect();
        if row.iter().all(|v| v.is_finite()) {
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Chord slopes from `(N,M)` to the intersection points diverge (every
/// `|slope|` strictly increasing in δ) or all converge to 0 (strictly
/// decreasing). With `require_hypothesis`, single-sign fans and fans whose
/// `(N,M)` lies on the diagonal (where the limits are 1) are reported not
/// applicable.
pub fn check_limit_slopes(fan: &Fan, deltas: &[f64], require_hypothesis: bool) -> CheckReport {
    let mut r = CheckReport::new(
        "limit_slopes",
        "chord slopes from (N,M) to the intersection points all diverge or all vanish",
    );
    if require_hypothesis {
        if let Ok(reg) = build_region(fan, deltas[0]) {
            if matches!(reg.kind, FanKind::AllPositive | FanKind::AllNegative) {
                return r.not_applicable("stated for fans with slopes of both signs");
            }
            let a = reg.anchors.nm_big;
            if (a.x - a.y).abs() <= GEOMETRIC_TOL * reg.delta {
                return r.not_applicable("(N,M) lies on the diagonal, where every chord slope tends to 1");
            }
        }
    }
    let rows = match chord_slope_sweep(fan, deltas) {
        Ok(rows) => rows,
        Err(e) => {
            r.fail(e.to_string());
            return r;
        }
    };
    r.samples = rows.len() * deltas.len();
    // worst wrong-way step for each direction; the better direction decides
    let wrong = |dir: f64| {
        rows.iter()
            .flat_map(|row| row.windows(2).map(move |w| dir * (w[0] - w[1])))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (up, down) = (wrong(1.0), wrong(-1.0));
    r.worst = up.min(down);
    if !(r.worst < 0.0) {
        r.fail(format!(
            "no consistent direction: worst wrong-way step {:.3e} (diverging) / {:.3e} (vanishing)",
            up, down
        ));
    }
    let last: Vec<f64> = rows.iter().map(|row| *row.last().unwrap()).collect();
    r.param("deltas", format!("{deltas:?}"))
        .param("log_abs_slopes_at_largest_delta", format!("{last:?}"))
}

/// `conv(P(δ_k)) ⊆ conv(P(δ_{k+1}))`, checked at `samples` perimeter points
/// of each smaller hull.
pub fn check_hull_nesting(fan: &Fan, deltas: &[f64], samples: usize) -> CheckReport {
    let mut r = CheckReport::new("hull_nesting", "convex hulls grow with δ");
    let hulls: Vec<Vec<[f64; 2]>> = match deltas
        .iter()
        .map(|&d| build_region(fan, d).map(|reg| reg.conv_hull(256)))
        .collect::<Result<_, _>>()
    {
        Ok(h) => h,
        Err(e) => {
            r.fail(e.to_string());
            return r;
        }
    };
    for w in hulls.windows(2) {
        for p in sample_polygon(&w[0], samples) {
            r.samples += 1;
            if !in_convex_polygon(&w[1], p, GEOMETRIC_TOL) {
                let lp = LogPoint::new(p[0].ln(), p[1].ln());
                r.witness(lp);
                r.fail(format!("hull point ({:.6e}, {:.6e}) escapes the next hull", p[0], p[1]));
            }
        }
    }
    r.param("deltas", format!("{deltas:?}"))
}

// -- right-hand side checks --------------------------------------------------

/// Re-locates every intersection point numerically: bisection along one
/// boundary curve on the gap to the other curve, the gap being measured by
/// shooting an axis-parallel ray to it.
pub fn check_suc_refind(fan: &Fan, delta: f64) -> CheckReport {
    let mut r = CheckReport::new(
        "suc_refind",
        "closed-form intersection points agree with numerical curve intersection",
    );
    let g = fan.generators();
    let mut worst: f64 = 0.0;
    for ip in crate::region_construction::intersection_points(fan) {
        r.samples += 1;
        let want = ip.log(delta);
        match refind(fan, delta, ip.i, ip.si, ip.j, ip.sj) {
            Some(p) => {
                let e = p.dist(want);
                if e > worst {
                    worst = e;
                }
                if e > GEOMETRIC_TOL {
                    r.witness(want);
                    r.fail(format!(
                        "{:?}/{:?}: off by {e:.3e}",
                        g[ip.i].as_pair(),
                        g[ip.j].as_pair()
                    ));
                }
            }
            None => {
                r.witness(want);
                r.fail(format!("{:?}/{:?}: not found", g[ip.i].as_pair(), g[ip.j].as_pair()));
            }
        }
    }
    r.worst = worst;
    r.param("delta", delta)
}

fn refind(fan: &Fan, delta: f64, i: usize, si: i8, j: usize, sj: i8) -> Option<LogPoint> {
    let g = fan.generators();
    let (gi, gj) = (g[i], g[j]);
    let li = si as f64 * fan.di(i, delta);
    let lj = sj as f64 * fan.di(j, delta);
    // curve i in log space: base + t·(q_i, p_i)/|g_i|
    let n = gi.norm();
    let dir = [gi.q as f64 / n, gi.p as f64 / n];
    let base = LogPoint::new(-gi.p as f64 * li / (n * n), gi.q as f64 * li / (n * n));
    let at = |t: f64| LogPoint::new(base.x + t * dir[0], base.y + t * dir[1]);
    let h = lj.exp();
    // gap to curve j along a vertical (or horizontal) x-ray
    let gap = |t: f64| -> Option<f64> {
        let p = at(t);
        let s = gj.q as f64 * p.y - gj.p as f64 * p.x - lj;
        if s == 0.0 {
            return Some(0.0);
        }
        let slope = if gj.q != 0 { f64::INFINITY } else { 0.0 };
        let hit = segment_curve_intersection(p.to_pos(), slope, gj, h).ok()?.to_log();
        Some(if gj.q != 0 { hit.y - p.y } else { hit.x - p.x })
    };
    let mut lo = -1.0;
    let mut hi = 1.0;
    let (mut glo, mut ghi) = (gap(lo)?, gap(hi)?);
    while glo.signum() == ghi.signum() && glo != 0.0 {
        lo *= 2.0;
        hi *= 2.0;
        if hi > 600.0 {
            return None;
        }
        glo = gap(lo)?;
        ghi = gap(hi)?;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let gm = gap(mid)?;
        if gm == 0.0 {
            return Some(at(mid));
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Some(at(0.5 * (lo + hi)))
}

/// The fast classification agrees with the brute force at `points` random
/// log points in `[−5δ, 5δ]²`; points too close to a strip boundary for the
/// fast path are excluded.
pub fn check_rhs_oracle(fan: &Fan, delta: f64, points: usize, seed: u64) -> CheckReport {
    let mut r = CheckReport::new("rhs_oracle", "classified right-hand side equals the brute force");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut excluded = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let p = LogPoint::new(rng.gen_range(-5.0 * delta..5.0 * delta), rng.gen_range(-5.0 * delta..5.0 * delta));
        let Ok(fast) = rhs_classified_log(p, fan, delta) else {
            excluded += 1;
            continue;
        };
        r.samples += 1;
        let slow = rhs_bruteforce_log(p, fan, delta);
        if !fast.approx_eq(&slow, GEOMETRIC_TOL) {
            r.witness(p);
            r.fail(format!("{} vs {} at ({:.6}, {:.6})", fast.tag(), slow.tag(), p.x, p.y));
            worst = f64::INFINITY;
            continue;
        }
        for (a, b) in fast.extreme_rays().iter().zip(slow.extreme_rays()) {
            worst = worst.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
        }
    }
    r.worst = worst;
    r.param("fan", format!("{:?}", fan.pairs()))
        .param("delta", delta)
        .param("seed", seed)
        .param("excluded", excluded)
}

/// A random fan of 2–6 generators with entries in `[-4, 4]`.
pub fn random_fan(rng: &mut ChaCha8Rng) -> Fan {
    loop {
        let n = rng.gen_range(2..=6);
        let pairs: Vec<(i64, i64)> = (0..n)
            .map(|_| (rng.gen_range(-4..=4), rng.gen_range(-4..=4)))
            .collect();
        if let Ok(f) = Fan::new(&pairs) {
            if f.len() == n {
                return f;
            }
        }
    }
}

/// Every 1- and 2-generator sub-fan has a right-hand side contained in the
/// fan's, at `points` random log points in `[−5δ, 5δ]²`.
pub fn check_subfans(fan: &Fan, delta: f64, points: usize, seed: u64) -> CheckReport {
    let mut r = CheckReport::new("subfan_monotone", "a sub-fan's right-hand side lies inside the fan's");
    let pairs = fan.pairs();
    let mut subs: Vec<Vec<(i64, i64)>> = pairs.iter().map(|&p| vec![p]).collect();
    for a in 0..pairs.len() {
        for b in a + 1..pairs.len() {
            subs.push(vec![pairs[a], pairs[b]]);
        }
    }
    subs.retain(|s| s.len() < pairs.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<LogPoint> = (0..points)
        .map(|_| LogPoint::new(rng.gen_range(-5.0 * delta..5.0 * delta), rng.gen_range(-5.0 * delta..5.0 * delta)))
        .collect();
    for s in &subs {
        let sub = Fan::new(s).expect("sub-fan of a valid fan");
        for &p in &pts {
            r.samples += 1;
            match rhs_subfan_subset_log(p, fan, &sub, delta) {
                Ok(true) => {}
                Ok(false) => {
                    r.witness(p);
                    r.fail(format!("{s:?} not contained at ({:.6}, {:.6})", p.x, p.y));
                }
                Err(e) => r.fail(e.to_string()),
            }
        }
    }
    r.worst = if r.pass { 0.0 } else { 1.0 };
    r.param("subfans", subs.len()).param("seed", seed)
}

// -- dynamics checks ---------------------------------------------------------

/// Time bound for entering the hull: `50·δ·max|(p,q)|`.
pub fn attraction_horizon(fan: &Fan, delta: f64) -> f64 {
    let g = fan.generators().iter().map(|g| g.norm()).fold(0.0, f64::max);
    50.0 * delta * g
}

/// `k × k` grid on `[−half, half]²` in log space.
pub fn log_grid(k: usize, half: f64) -> Vec<LogPoint> {
    let step = if k > 1 { 2.0 * half / (k - 1) as f64 } else { 0.0 };
    let mut out = vec![];
    for i in 0..k {
        for j in 0..k {
            out.push(LogPoint::new(-half + step * i as f64, -half + step * j as f64));
        }
    }
    out
}

/// Per-trajectory outcome of the attraction check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractionRun {
    pub start: [f64; 2],
    pub strategy: String,
    pub entered_hull_at: Option<f64>,
    pub entered_region_at: Option<f64>,
    pub outside_after_entry: usize,
    pub phi_evaluations: usize,
    /// Largest increase of Φ between consecutive evaluations.
    pub phi_increase: f64,
    pub final_phi: Option<f64>,
    pub omega_outside: usize,
    pub not_strict: bool,
    pub error: Option<String>,
}

/// Time spacing of Φ evaluations along a trajectory.
pub const PHI_EVERY: f64 = 0.5;

fn attraction_run(
    region: &RegionBoundary,
    hull: &[[f64; 2]],
    fan: &Fan,
    delta: f64,
    start: LogPoint,
    name: &str,
    seed: u64,
) -> AttractionRun {
    let mut out = AttractionRun {
        start: [start.x, start.y],
        strategy: name.into(),
        entered_hull_at: None,
        entered_region_at: None,
        outside_after_entry: 0,
        phi_evaluations: 0,
        phi_increase: f64::NEG_INFINITY,
        final_phi: None,
        omega_outside: 0,
        not_strict: false,
        error: None,
    };
    let run = || -> Result<Trajectory, DynamicsError> {
        let mut s = strategy_by_name(name, fan, delta, seed)?
            .ok_or_else(|| DynamicsError::WitnessFailed { leg: name.into(), reason: "unknown strategy".into() })?;
        let cfg = IntegratorConfig {
            t_end: attraction_horizon(fan, delta),
            ..Default::default()
        };
        integrate_with(s.as_mut(), start, fan, delta, &cfg, &mut |_, _| false)
    };
    let tr = match run() {
        Ok(t) => t,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    out.not_strict = tr
        .samples
        .iter()
        .any(|s| s.cone_tag == "ProperCone" && s.v == [0.0, 0.0]);
    let phi_hi = 20.0 * delta;
    let mut next_phi = 0.0;
    let mut last_phi: Option<f64> = None;
    for s in &tr.samples {
        let p = s.x.to_pos();
        let in_hull = in_convex_polygon(hull, [p.x, p.y], 1e-12);
        if in_hull && out.entered_hull_at.is_none() {
            out.entered_hull_at = Some(s.t);
        }
        match region.classify_log(s.x, DYNAMIC_TOL) {
            Containment::Outside => {
                if out.entered_region_at.is_some() {
                    out.outside_after_entry += 1;
                }
            }
            _ => {
                out.entered_region_at.get_or_insert(s.t);
            }
        }
        if !in_hull && s.t >= next_phi {
            next_phi = s.t + PHI_EVERY;
            if let Ok(f) = phi_level(p, fan, delta, phi_hi) {
                out.phi_evaluations += 1;
                if let Some(l) = last_phi {
                    out.phi_increase = out.phi_increase.max(f - l);
                }
                last_phi = Some(f);
            }
        }
    }
    out.final_phi = last_phi;
    let pts: Vec<LogPoint> = tr.samples.iter().map(|s| s.x).collect();
    out.omega_outside = omega_clusters(&pts, 0.05)
        .into_iter()
        .filter(|&c| region.classify_log(c, DYNAMIC_TOL) == Containment::Outside)
        .count();
    out
}

/// Integrates strategy `strategies[k % len]` from `starts[k]`; each strict
/// run must enter `conv(M)` within the horizon, never classify outside `M`
/// after first entering it, and have non-increasing Φ while outside
/// `conv(M)`. Runs whose selection is zero in a pointed-cone zone are
/// flagged not strict and excluded.
pub fn check_attraction(
    region: &RegionBoundary,
    fan: &Fan,
    delta: f64,
    starts: &[LogPoint],
    strategies: &[&str],
    seed: u64,
) -> (CheckReport, Vec<AttractionRun>) {
    let mut r = CheckReport::new(
        "attraction",
        "strict trajectories enter the convex hull, stay in the region, and Φ never increases",
    );
    let hull = region.conv_hull(256);
    let jobs: Vec<(usize, LogPoint, &str)> = starts
        .iter()
        .enumerate()
        .map(|(k, &p)| (k, p, strategies[k % strategies.len()]))
        .collect();
    let runs: Vec<AttractionRun> = crate::with_pool(|| {
        jobs.par_iter()
            .map(|&(k, p, name)| attraction_run(region, &hull, fan, delta, p, name, seed.wrapping_add(k as u64)))
            .collect()
    });
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut excluded = 0;
    for run in &runs {
        let p = LogPoint::new(run.start[0], run.start[1]);
        let tag = format!("{} from ({:.3}, {:.3})", run.strategy, p.x, p.y);
        if run.not_strict {
            excluded += 1;
            r.notes.push(format!("NotStrict: {tag} excluded"));
            continue;
        }
        r.samples += 1;
        if let Some(e) = &run.error {
            r.witness(p);
            r.fail(format!("{tag}: {e}"));
            continue;
        }
        if run.entered_hull_at.is_none() {
            r.witness(p);
            r.fail(format!("{tag}: never entered conv(M); final Φ {:?}", run.final_phi));
        }
        if run.outside_after_entry > 0 {
            r.witness(p);
            r.fail(format!("{tag}: {} samples outside after entry", run.outside_after_entry));
        }
        if run.omega_outside > 0 {
            r.witness(p);
            r.fail(format!("{tag}: ω-estimate outside the region"));
        }
        if run.phi_increase > DYNAMIC_TOL {
            r.witness(p);
            r.fail(format!("{tag}: Φ increased by {:.3e}", run.phi_increase));
        }
        worst = worst.max(run.phi_increase);
    }
    r.worst = if worst.is_finite() { worst } else { 0.0 };
    let r = r
        .param("horizon", attraction_horizon(fan, delta))
        .param("strategies", strategies.join(","))
        .param("starts", starts.len())
        .param("excluded", excluded)
        .param("seed", seed);
    (r, runs)
}

/// Deterministic targets inside the region, stratified by strip count
/// (`r = 0`, `1`, `≥ 2`) where available.
pub fn sample_targets(region: &RegionBoundary, fan: &Fan, delta: f64, n: usize, seed: u64) -> Vec<LogPoint> {
    let poly = region.polyline(16);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in &poly {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pools: [Vec<LogPoint>; 3] = [vec![], vec![], vec![]];
    let mut draws = 0;
    while pools.iter().map(|p| p.len().min(n)).sum::<usize>() < 3 * n && draws < 2000 * n {
        draws += 1;
        let p = LogPoint::new(rng.gen_range(x0..x1), rng.gen_range(y0..y1));
        if region.classify_log(p, DYNAMIC_TOL) != Containment::Inside {
            continue;
        }
        let c = r_count_log(p, fan, delta).min(2);
        pools[c].push(p);
    }
    let mut out = vec![];
    let mut idx = [0usize; 3];
    while out.len() < n && (0..3).any(|c| idx[c] < pools[c].len()) {
        for c in 0..3 {
            if out.len() < n && idx[c] < pools[c].len() {
                out.push(pools[c][idx[c]]);
                idx[c] += 1;
            }
        }
    }
    out
}

/// Log points in the pairwise strip intersections, on a `k × k` grid of
/// strip coordinates inside `(−δ_i, δ_i) × (−δ_j, δ_j)`.
pub fn strip_intersection_samples(fan: &Fan, delta: f64, k: usize) -> Vec<LogPoint> {
    let g = fan.generators();
    let mut out = vec![];
    for i in 0..g.len() {
        for j in i + 1..g.len() {
            let (pi, qi, pj, qj) = (g[i].p as f64, g[i].q as f64, g[j].p as f64, g[j].q as f64);
            // solve q·Y − p·X = u for both strips
            let det = -pi * qj + pj * qi;
            for a in 0..k {
                for b in 0..k {
                    let ui = fan.di(i, delta) * (-1.0 + 2.0 * (a as f64 + 0.5) / k as f64);
                    let uj = fan.di(j, delta) * (-1.0 + 2.0 * (b as f64 + 0.5) / k as f64);
                    let x = (ui * qj - uj * qi) / det;
                    let y = (-pi * uj + pj * ui) / det;
                    out.push(LogPoint::new(x, y));
                }
            }
        }
    }
    out
}

/// `targets` sampled points of the region each receive a validated
/// witness trajectory from `(1,1)`, and every strip-intersection sample
/// lies in the region.
pub fn check_minimality(region: &RegionBoundary, fan: &Fan, delta: f64, targets: usize, seed: u64) -> CheckReport {
    let mut r = CheckReport::new(
        "minimality",
        "every region point is reachable from (1,1) and strip intersections lie inside",
    );
    let pts = sample_targets(region, fan, delta, targets, seed);
    if pts.len() < targets {
        r.notes.push(format!("only {} targets found", pts.len()));
    }
    let results: Vec<Result<f64, DynamicsError>> = crate::with_pool(|| {
        pts.par_iter()
            .map(|&p| {
                let w = reach_witness_log(LogPoint::ORIGIN, p, fan, delta, region)?;
                let tr = w.trajectory();
                if tr.samples.windows(2).any(|s| !(s[1].t > s[0].t)) {
                    return Err(DynamicsError::WitnessFailed { leg: "clock".into(), reason: "time not increasing".into() });
                }
                let miss = w.end().dist(p);
                if miss > GEOMETRIC_TOL {
                    return Err(DynamicsError::WitnessFailed { leg: "end".into(), reason: format!("ends {miss:.3e} away") });
                }
                Ok(w.worst_violation)
            })
            .collect()
    });
    let mut worst: f64 = 0.0;
    let mut counts = [0usize; 3];
    for (p, res) in pts.iter().zip(&results) {
        r.samples += 1;
        counts[r_count_log(*p, fan, delta).min(2)] += 1;
        match res {
            Ok(w) => worst = worst.max(*w),
            Err(e) => {
                r.witness(*p);
                r.fail(format!("({:.6}, {:.6}): {e}", p.x, p.y));
            }
        }
    }
    if worst > WITNESS_TOL {
        r.fail(format!("witness violation {worst:.3e}"));
    }
    let band = GEOMETRIC_TOL * delta.max(1.0);
    let strips = strip_intersection_samples(fan, delta, 7);
    for &p in &strips {
        r.samples += 1;
        if region.classify_log(p, band) == Containment::Outside {
            r.witness(p);
            r.fail(format!("strip intersection sample ({:.6}, {:.6}) is outside", p.x, p.y));
        }
    }
    r.worst = worst;
    r.param("targets", pts.len())
        .param("targets_by_r", format!("{counts:?}"))
        .param("strip_samples", strips.len())
        .param("seed", seed)
}

// -- battery -----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatteryConfig {
    pub seed: u64,
    pub boundary_samples: usize,
    pub attraction_grid: usize,
    pub attraction_half_width: f64,
    pub strategies: Vec<String>,
    pub minimality_targets: usize,
    pub oracle_points: usize,
    pub subfan_points: usize,
    pub hull_samples: usize,
    /// Multipliers of δ for the asymptotic checks.
    pub sweep: Vec<f64>,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            seed: 0,
            boundary_samples: 1000,
            attraction_grid: 8,
            attraction_half_width: 8.0,
            strategies: ["extreme_left", "extreme_right", "alternating", "random"]
                .map(String::from)
                .to_vec(),
            minimality_targets: 50,
            oracle_points: 10_000,
            subfan_points: 10_000,
            hull_samples: 512,
            sweep: vec![1.0, 2.0, 4.0],
        }
    }
}

/// Construction plus every check. An unsupported fan yields a single
/// failing `UnsupportedFan` report; a failed construction a single
/// `construction` report.
pub fn run_battery(fan: &Fan, delta: f64, cfg: &BatteryConfig) -> Vec<CheckReport> {
    if let Err(e) = classify_fan(fan) {
        let mut r = CheckReport::new("UnsupportedFan", "the fan admits the construction");
        r.fail(e.to_string());
        return vec![r.param("fan", format!("{:?}", fan.pairs()))];
    }
    let region = match construct_region(fan, delta) {
        Ok(reg) => reg,
        Err(e) => {
            let name = match e {
                ConstructionError::DeltaTooSmall(_) => "DeltaTooSmall",
                _ => "construction",
            };
            let mut r = CheckReport::new(name, "the region can be constructed at this δ");
            r.fail(e.to_string());
            return vec![r.param("delta", delta)];
        }
    };
    let deltas: Vec<f64> = cfg.sweep.iter().map(|m| m * delta).collect();
    let n = cfg.boundary_samples;
    let mut out = vec![
        check_loop(&region),
        check_suc_contained(&region),
        check_boundary_strips(&region, fan, delta, n),
        check_invariance(&region, fan, delta, n),
        check_slope_chains(&region),
        check_cone_containment(&region),
        check_arc_tangents(&region, 64),
        check_knee(fan, &deltas),
        check_limit_slopes(fan, &deltas, true),
        check_hull_nesting(fan, &deltas, cfg.hull_samples),
        check_suc_refind(fan, delta),
        check_rhs_oracle(fan, delta, cfg.oracle_points, cfg.seed),
        check_subfans(fan, delta, cfg.subfan_points, cfg.seed),
    ];
    let starts = log_grid(cfg.attraction_grid, cfg.attraction_half_width);
    let names: Vec<&str> = cfg.strategies.iter().map(|s| s.as_str()).collect();
    out.push(check_attraction(&region, fan, delta, &starts, &names, cfg.seed).0);
    out.push(check_minimality(&region, fan, delta, cfg.minimality_targets, cfg.seed));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::WORKED_FAN;

    fn worked() -> (Fan, RegionBoundary) {
        let fan = Fan::new(&WORKED_FAN).unwrap();
        let reg = construct_region(&fan, 3.0).unwrap();
        (fan, reg)
    }

    #[test]
    fn invariance_on_the_worked_fan() {
        let (fan, reg) = worked();
        let r = check_invariance(&reg, &fan, 3.0, 1000);
        assert!(r.pass, "{r:?}");
        assert!(r.worst <= 1e-9 && r.samples >= 1000);
    }

    #[test]
    fn shrunken_region_leaks() {
        let (fan, reg) = worked();
        let small = scaled_region(&reg, 0.5, 8);
        let r = check_invariance(&small, &fan, 3.0, 1000);
        assert!(!r.pass);
        assert!(r.worst > 0.1 && !r.witnesses.is_empty());
    }

    #[test]
    fn structural_checks_pass() {
        let (fan, reg) = worked();
        for r in [
            check_loop(&reg),
            check_suc_contained(&reg),
            check_boundary_strips(&reg, &fan, 3.0, 1000),
            check_slope_chains(&reg),
            check_cone_containment(&reg),
            check_arc_tangents(&reg, 64),
            check_suc_refind(&fan, 3.0),
        ] {
            assert!(r.pass && r.applicable, "{r:?}");
        }
    }

    #[test]
    fn limit_slopes_on_the_diagonal() {
        let fan = Fan::new(&WORKED_FAN).unwrap();
        let r = check_limit_slopes(&fan, &[3.0, 6.0, 12.0], true);
        assert!(!r.applicable && r.pass);
        let r = check_limit_slopes(&fan, &[3.0, 6.0, 12.0], false);
        assert!(!r.pass);
    }

    #[test]
    fn strip_samples_solve_both_strips() {
        let fan = Fan::new(&WORKED_FAN).unwrap();
        let pts = strip_intersection_samples(&fan, 3.0, 3);
        assert_eq!(pts.len(), 3 * 9);
        for p in pts {
            assert!(r_count_log(p, &fan, 3.0) >= 2);
        }
    }

    #[test]
    fn non_strict_runs_are_excluded() {
        let (fan, reg) = worked();
        let starts = [LogPoint::new(20.0, -20.0), LogPoint::new(-20.0, 20.0)];
        let (r, runs) = check_attraction(&reg, &fan, 3.0, &starts, &["idle_r0"], 0);
        assert!(runs.iter().all(|run| run.not_strict));
        assert!(r.pass);
        assert_eq!(r.samples, 0);
        assert!(r.notes.iter().all(|n| n.starts_with("NotStrict")));
    }

    #[test]
    fn unsupported_fan_gives_one_report() {
        for pairs in [vec![(1, 1)], vec![(1, 2), (-1, 1)]] {
            let fan = Fan::new(&pairs).unwrap();
            let reps = run_battery(&fan, 3.0, &BatteryConfig::default());
            assert_eq!(reps.len(), 1);
            assert_eq!(reps[0].name, "UnsupportedFan");
            assert!(!reps[0].pass);
        }
    }

    #[test]
    fn small_delta_is_reported() {
        let fan = Fan::new(&WORKED_FAN).unwrap();
        let reps = run_battery(&fan, 0.05, &BatteryConfig::default());
        assert_eq!(reps.len(), 1);
        assert!(!reps[0].pass);
    }

    #[test]
    fn grid_shape() {
        let g = log_grid(8, 8.0);
        assert_eq!(g.len(), 64);
        assert_eq!(g[0], LogPoint::new(-8.0, -8.0));
        assert_eq!(g[63], LogPoint::new(8.0, 8.0));
    }
}
