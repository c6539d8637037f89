//! File formats (spec JSON, boundary JSON, trajectory CSV, report JSON),
//! SVG rendering and the command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{integrate_with, strategy_by_name, DynamicsError, IntegratorConfig, Trajectory, STRATEGY_NAMES};
use crate::fan_geometry::{r_count_log, Fan, GeometryError, LogPoint};
use crate::region_construction::{construct_region, Anchors, BoundaryPiece, ConstructionError, FanKind, RegionBoundary};
use crate::tdi_rhs::rhs_log;
use crate::verification::{all_pass, run_battery, BatteryConfig, CheckReport};

pub const FORMAT_VERSION: &str = "1.0";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DELTA_TOO_SMALL: i32 = 2;
pub const EXIT_UNSUPPORTED_FAN: i32 = 3;
pub const EXIT_STEP_COLLAPSE: i32 = 4;
/// `verify` ran but some applicable check failed.
pub const EXIT_CHECKS_FAILED: i32 = 5;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("unsupported format_version {0:?} (this build reads {FORMAT_VERSION})")]
    Version(String),
    #[error("{0}")]
    Invalid(String),
}

fn read_file(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, data: &str) -> Result<(), FormatError> {
    std::fs::write(path, data).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Accepts any `1.x`.
pub fn check_version(v: &str) -> Result<(), FormatError> {
    match v.split('.').next() {
        Some("1") => Ok(()),
        _ => Err(FormatError::Version(v.into())),
    }
}

#[derive(Deserialize)]
struct Versioned {
    format_version: Option<String>,
}

fn check_json_version(text: &str, required: bool) -> Result<(), FormatError> {
    let v: Versioned = serde_json::from_str(text)?;
    match v.format_version {
        Some(v) => check_version(&v),
        None if required => Err(FormatError::Invalid("missing field `format_version`".into())),
        None => Ok(()),
    }
}

// -- spec file ---------------------------------------------------------------

/// Optional sample counts overriding the battery defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub boundary: Option<usize>,
    pub attraction_grid: Option<usize>,
    pub attraction_half_width: Option<f64>,
    pub strategies: Option<Vec<String>>,
    pub minimality_targets: Option<usize>,
    pub oracle_points: Option<usize>,
    pub subfan_points: Option<usize>,
    pub hull_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative cone-membership tolerance for integrator stage velocities.
    pub velocity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanSpec {
    #[serde(default = "default_version")]
    pub format_version: String,
    pub generators: Vec<[i64; 2]>,
    pub delta: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub samples: SampleCounts,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_version() -> String {
    FORMAT_VERSION.into()
}

const SPEC_KEYS: &[&str] = &["format_version", "generators", "delta", "seed", "samples", "tolerances"];
const SAMPLE_KEYS: &[&str] = &[
    "boundary",
    "attraction_grid",
    "attraction_half_width",
    "strategies",
    "minimality_targets",
    "oracle_points",
    "subfan_points",
    "hull_samples",
];
const TOLERANCE_KEYS: &[&str] = &["velocity"];

fn unknown_keys(v: &serde_json::Value, known: &[&str], prefix: &str, out: &mut Vec<String>) {
    if let Some(obj) = v.as_object() {
        for k in obj.keys().filter(|k| !known.contains(&k.as_str())) {
            out.push(format!("{prefix}{k}"));
        }
    }
}

impl FanSpec {
    /// Parses a spec document. Unknown keys are ignored and returned so the
    /// caller can warn about them.
    pub fn parse(text: &str) -> Result<(FanSpec, Vec<String>), FormatError> {
        check_json_version(text, false)?;
        let spec: FanSpec = serde_json::from_str(text)?;
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let mut unknown = vec![];
        unknown_keys(&raw, SPEC_KEYS, "", &mut unknown);
        unknown_keys(&raw["samples"], SAMPLE_KEYS, "samples.", &mut unknown);
        unknown_keys(&raw["tolerances"], TOLERANCE_KEYS, "tolerances.", &mut unknown);
        if !(spec.delta.is_finite() && spec.delta > 0.0) {
            return Err(FormatError::Invalid(format!("key `delta`: must be positive, got {}", spec.delta)));
        }
        Ok((spec, unknown))
    }

    pub fn load(path: &Path) -> Result<(FanSpec, Vec<String>), FormatError> {
        let text = read_file(path)?;
        FanSpec::parse(&text).map_err(|e| match e {
            FormatError::Io { .. } => e,
            e => FormatError::Invalid(format!("{}: {e}", path.display())),
        })
    }

    pub fn fan(&self) -> Result<Fan, GeometryError> {
        let pairs: Vec<(i64, i64)> = self.generators.iter().map(|g| (g[0], g[1])).collect();
        Fan::new(&pairs)
    }

    pub fn battery_config(&self, seed: u64) -> BatteryConfig {
        let d = BatteryConfig::default();
        let s = &self.samples;
        BatteryConfig {
            seed,
            boundary_samples: s.boundary.unwrap_or(d.boundary_samples),
            attraction_grid: s.attraction_grid.unwrap_or(d.attraction_grid),
            attraction_half_width: s.attraction_half_width.unwrap_or(d.attraction_half_width),
            strategies: s.strategies.clone().unwrap_or(d.strategies),
            minimality_targets: s.minimality_targets.unwrap_or(d.minimality_targets),
            oracle_points: s.oracle_points.unwrap_or(d.oracle_points),
            subfan_points: s.subfan_points.unwrap_or(d.subfan_points),
            hull_samples: s.hull_samples.unwrap_or(d.hull_samples),
            sweep: d.sweep,
        }
    }
}

// -- boundary JSON -----------------------------------------------------------

/// Serialized form of a constructed boundary. Coordinates are log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDoc {
    pub format_version: String,
    pub generators: Vec<[i64; 2]>,
    pub delta: f64,
    pub kind: FanKind,
    /// Counter-clockwise loop.
    pub pieces: Vec<BoundaryPiece>,
    pub anchors: Anchors,
    /// Pairwise intersections of the strip boundary lines.
    pub intersections: Vec<LogPoint>,
}

impl BoundaryDoc {
    pub fn from_region(r: &RegionBoundary) -> Self {
        BoundaryDoc {
            format_version: FORMAT_VERSION.into(),
            generators: r.fan.pairs().into_iter().map(|(p, q)| [p, q]).collect(),
            delta: r.delta,
            kind: r.kind,
            pieces: r.pieces.clone(),
            anchors: r.anchors,
            intersections: r.suc_log(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("boundary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        check_json_version(text, true)?;
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        let text = read_file(path)?;
        Self::from_json(&text).map_err(|e| FormatError::Invalid(format!("{}: {e}", path.display())))
    }

    /// Log-space polyline of the loop with `m` interior samples per piece.
    pub fn polyline(&self, m: usize) -> Vec<LogPoint> {
        let mut out = vec![];
        for p in &self.pieces {
            out.push(p.start());
            out.extend(p.samples(m));
        }
        out
    }

    pub fn anchor_list(&self) -> [(&'static str, LogPoint); 8] {
        let a = &self.anchors;
        [
            ("NM", a.nm_big),
            ("nm", a.nm_small),
            ("Aq", a.aq),
            ("Bu", a.bu),
            ("Cr", a.cr),
            ("Ds", a.ds),
            ("P_i1i2", a.p12),
            ("P_i3i4", a.p34),
        ]
    }
}

// -- trajectory CSV ----------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub log_x: f64,
    pub log_y: f64,
    pub strategy: String,
    pub cone_tag: String,
}

const CSV_VERSION_PREFIX: &str = "# format_version=";

/// CSV with a leading `# format_version=…` comment line.
pub fn trajectory_to_csv(traj: &Trajectory) -> Result<String, FormatError> {
    let mut w = csv::Writer::from_writer(vec![]);
    for s in &traj.samples {
        let p = s.x.to_pos();
        w.serialize(TrajectoryRow {
            t: s.t,
            x: p.x,
            y: p.y,
            log_x: s.x.x,
            log_y: s.x.y,
            strategy: traj.strategy.clone(),
            cone_tag: s.cone_tag.into(),
        })?;
    }
    let body = w.into_inner().map_err(|e| FormatError::Invalid(e.to_string()))?;
    let body = String::from_utf8(body).map_err(|e| FormatError::Invalid(e.to_string()))?;
    Ok(format!("{CSV_VERSION_PREFIX}{FORMAT_VERSION}\n{body}"))
}

pub fn trajectory_from_csv(text: &str) -> Result<Vec<TrajectoryRow>, FormatError> {
    let first = text.lines().next().unwrap_or("");
    let v = first
        .strip_prefix(CSV_VERSION_PREFIX)
        .ok_or_else(|| FormatError::Invalid(format!("line 1: expected `{CSV_VERSION_PREFIX}<version>`")))?;
    check_version(v.trim())?;
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let rows = r.deserialize().collect::<Result<Vec<TrajectoryRow>, _>>()?;
    Ok(rows)
}

pub fn load_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>, FormatError> {
    let text = read_file(path)?;
    trajectory_from_csv(&text).map_err(|e| FormatError::Invalid(format!("{}: {e}", path.display())))
}

// -- report JSON -------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub format_version: String,
    pub generators: Vec<[i64; 2]>,
    pub delta: f64,
    pub seed: u64,
    pub config: BatteryConfig,
    pub pass: bool,
    pub checks: Vec<CheckReport>,
}

// -- SVG ---------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct RenderOptions {
    /// Draw in `(x, y)` instead of `(log x, log y)`.
    pub x_space: bool,
    /// Draw the uncertainty strips.
    pub show_regions: bool,
    /// Log-space polylines.
    pub trajectories: Vec<Vec<LogPoint>>,
}

/// Largest log coordinate drawn in the x-space view.
pub const X_SPACE_CAP: f64 = 10.0;

const PLOT: f64 = 640.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

type Rect = [f64; 4];

/// Sutherland–Hodgman clip of a polygon against `[u0, u1] × [v0, v1]`.
pub fn clip_polygon(poly: &[[f64; 2]], r: Rect) -> Vec<[f64; 2]> {
    let [u0, u1, v0, v1] = r;
    let edges: [(usize, f64, bool); 4] = [(0, u0, true), (0, u1, false), (1, v0, true), (1, v1, false)];
    let mut out = poly.to_vec();
    for (axis, c, keep_above) in edges {
        if out.is_empty() {
            break;
        }
        let inside = |p: &[f64; 2]| if keep_above { p[axis] >= c } else { p[axis] <= c };
        let cut = |a: [f64; 2], b: [f64; 2]| {
            let t = (c - a[axis]) / (b[axis] - a[axis]);
            let mut p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            p[axis] = c;
            p
        };
        let input = std::mem::take(&mut out);
        for k in 0..input.len() {
            let a = input[(k + input.len() - 1) % input.len()];
            let b = input[k];
            match (inside(&a), inside(&b)) {
                (true, true) => out.push(b),
                (true, false) => out.push(cut(a, b)),
                (false, true) => {
                    out.push(cut(a, b));
                    out.push(b);
                }
                (false, false) => {}
            }
        }
    }
    out
}

/// Liang–Barsky clip of one segment.
fn clip_segment(a: [f64; 2], b: [f64; 2], r: Rect) -> Option<([f64; 2], [f64; 2])> {
    let d = [b[0] - a[0], b[1] - a[1]];
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [
        (-d[0], a[0] - r[0]),
        (d[0], r[1] - a[0]),
        (-d[1], a[1] - r[2]),
        (d[1], r[3] - a[1]),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    (t0 <= t1).then(|| {
        (
            [a[0] + t0 * d[0], a[1] + t0 * d[1]],
            [a[0] + t1 * d[0], a[1] + t1 * d[1]],
        )
    })
}

/// Splits a polyline into the runs that lie inside `r`.
fn clip_polyline(pts: &[[f64; 2]], r: Rect) -> Vec<Vec<[f64; 2]>> {
    let mut runs: Vec<Vec<[f64; 2]>> = vec![];
    let mut open = false;
    for w in pts.windows(2) {
        match clip_segment(w[0], w[1], r) {
            Some((a, b)) => {
                let joined = open && runs.last().and_then(|run| run.last()) == Some(&a);
                if !joined {
                    runs.push(vec![a]);
                }
                runs.last_mut().unwrap().push(b);
                open = b == w[1];
            }
            None => open = false,
        }
    }
    runs
}

struct Canvas {
    view: Rect,
    sx: f64,
    sy: f64,
    width: f64,
    height: f64,
    x_space: bool,
}

impl Canvas {
    fn px(&self, p: [f64; 2]) -> (f64, f64) {
        (
            MARGIN + (p[0] - self.view[0]) * self.sx,
            MARGIN + (self.view[3] - p[1]) * self.sy,
        )
    }

    /// Plot coordinates of a log point (clamped so `exp` stays finite).
    fn map(&self, p: LogPoint) -> [f64; 2] {
        if self.x_space {
            [p.x.clamp(-60.0, 60.0).exp(), p.y.clamp(-60.0, 60.0).exp()]
        } else {
            [p.x, p.y]
        }
    }

    fn path(&self, pts: &[[f64; 2]], close: bool) -> String {
        let mut d = String::new();
        for (k, &p) in pts.iter().enumerate() {
            let (x, y) = self.px(p);
            let _ = write!(d, "{}{x:.2},{y:.2} ", if k == 0 { "M" } else { "L" });
        }
        if close {
            d.push('Z');
        }
        d
    }
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 100.0).round() / 100.0)
    }
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders strips, loop, anchors and trajectories as a standalone SVG.
pub fn render_svg(fan: &Fan, delta: f64, doc: &BoundaryDoc, opts: &RenderOptions) -> String {
    let poly = doc.polyline(32);
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in poly.iter().chain(doc.anchor_list().iter().map(|(_, p)| p)) {
        lo = [lo[0].min(p.x), lo[1].min(p.y)];
        hi = [hi[0].max(p.x), hi[1].max(p.y)];
    }
    let mut notes = vec![];
    let canvas = if opts.x_space {
        let cap = |h: f64, axis: &str, notes: &mut Vec<String>| {
            if h > X_SPACE_CAP {
                notes.push(format!(
                    "{axis} clipped at e^{X_SPACE_CAP}; the loop reaches {axis} = e^{h:.2}"
                ));
                X_SPACE_CAP.exp()
            } else {
                1.1 * h.exp()
            }
        };
        let xm = cap(hi[0], "x", &mut notes);
        let ym = cap(hi[1], "y", &mut notes);
        Canvas {
            view: [0.0, xm, 0.0, ym],
            sx: PLOT / xm,
            sy: PLOT / ym,
            width: PLOT + 2.0 * MARGIN,
            height: PLOT + 2.0 * MARGIN,
            x_space: true,
        }
    } else {
        let pad = (0.15 * (hi[0] - lo[0]).max(hi[1] - lo[1])).max(1.0);
        let view = [lo[0] - pad, hi[0] + pad, lo[1] - pad, hi[1] + pad];
        let s = PLOT / (view[1] - view[0]).max(view[3] - view[2]);
        Canvas {
            view,
            sx: s,
            sy: s,
            width: (view[1] - view[0]) * s + 2.0 * MARGIN,
            height: (view[3] - view[2]) * s + 2.0 * MARGIN,
            x_space: false,
        }
    };
    let view = canvas.view;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="12">"#,
        w = canvas.width,
        h = canvas.height
    );
    let pairs: Vec<String> = fan.pairs().iter().map(|(p, q)| format!("({p},{q})")).collect();
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="24" font-size="14">fan {{{}}}, δ = {delta}, {} view</text>"#,
        pairs.join(", "),
        if opts.x_space { "x-space" } else { "log-space" }
    );

    if opts.show_regions {
        let log_view = if opts.x_space {
            [view[1].ln() - 30.0, view[1].ln(), view[3].ln() - 30.0, view[3].ln()]
        } else {
            view
        };
        let reach = [log_view[0], log_view[1]]
            .iter()
            .flat_map(|&u| [log_view[2], log_view[3]].map(|v| u.hypot(v)))
            .fold(0.0, f64::max)
            + 1.0;
        for (i, g) in fan.generators().iter().enumerate() {
            let (p, q) = g.as_pair();
            let (p, q) = (p as f64, q as f64);
            let n2 = p * p + q * q;
            let u = [q / n2.sqrt(), p / n2.sqrt()];
            let di = fan.di(i, delta);
            // Points with q·Y − p·X = c.
            let edge = |c: f64, t: f64| LogPoint::new(-c * p / n2 + t * u[0], c * q / n2 + t * u[1]);
            let k = if opts.x_space { 400 } else { 1 };
            let ts: Vec<f64> = (0..=k).map(|j| -reach + 2.0 * reach * j as f64 / k as f64).collect();
            let mut band: Vec<[f64; 2]> = ts.iter().map(|&t| canvas.map(edge(di, t))).collect();
            band.extend(ts.iter().rev().map(|&t| canvas.map(edge(-di, t))));
            let clipped = clip_polygon(&band, view);
            if clipped.len() < 3 {
                continue;
            }
            let _ = writeln!(
                svg,
                r#"<path class="band" d="{}" fill="{}" fill-opacity="0.25" stroke="none"><title>strip of ({},{})</title></path>"#,
                canvas.path(&clipped, true),
                PALETTE[i % PALETTE.len()],
                p,
                q
            );
        }
    }

    // Frame and ticks.
    let (fx0, fy0) = canvas.px([view[0], view[3]]);
    let (fx1, fy1) = canvas.px([view[1], view[2]]);
    let _ = writeln!(
        svg,
        r#"<rect class="axis" x="{fx0:.2}" y="{fy0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        fx1 - fx0,
        fy1 - fy0
    );
    for j in 0..=4 {
        let f = j as f64 / 4.0;
        let u = view[0] + f * (view[1] - view[0]);
        let v = view[2] + f * (view[3] - view[2]);
        let (x, _) = canvas.px([u, view[2]]);
        let (_, y) = canvas.px([view[0], v]);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            fy1 + 16.0,
            tick_label(u)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            fx0 - 6.0,
            y + 4.0,
            tick_label(v)
        );
    }
    let (xl, yl) = if opts.x_space { ("x", "y") } else { ("X = log x", "Y = log y") };
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xl}</text>"#,
        (fx0 + fx1) / 2.0,
        fy1 + 36.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="10" y="{:.2}" text-anchor="middle" transform="rotate(-90 10 {:.2})">{yl}</text>"#,
        (fy0 + fy1) / 2.0,
        (fy0 + fy1) / 2.0
    );

    let mut closed: Vec<[f64; 2]> = poly.iter().map(|&p| canvas.map(p)).collect();
    if let Some(&first) = closed.first() {
        closed.push(first);
    }
    for run in clip_polyline(&closed, view) {
        let _ = writeln!(
            svg,
            r#"<path class="loop" d="{}" fill="none" stroke="black" stroke-width="2"/>"#,
            canvas.path(&run, false)
        );
    }

    for (k, traj) in opts.trajectories.iter().enumerate() {
        let pts: Vec<[f64; 2]> = traj.iter().map(|&p| canvas.map(p)).collect();
        for run in clip_polyline(&pts, view) {
            let _ = writeln!(
                svg,
                r#"<path class="trajectory" d="{}" fill="none" stroke="{}" stroke-width="1"/>"#,
                canvas.path(&run, false),
                PALETTE[(k + 3) % PALETTE.len()]
            );
        }
    }

    for (name, p) in doc.anchor_list() {
        let q = canvas.map(p);
        if q[0] < view[0] || q[0] > view[1] || q[1] < view[2] || q[1] > view[3] {
            continue;
        }
        let (x, y) = canvas.px(q);
        let _ = writeln!(
            svg,
            r#"<circle class="anchor" cx="{x:.2}" cy="{y:.2}" r="3" fill="crimson"/><text x="{:.2}" y="{:.2}">{name}</text>"#,
            x + 5.0,
            y - 5.0
        );
    }
    let one = canvas.map(LogPoint::ORIGIN);
    if one[0] >= view[0] && one[0] <= view[1] && one[1] >= view[2] && one[1] <= view[3] {
        let (x, y) = canvas.px(one);
        let _ = writeln!(
            svg,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="none" stroke="black"/><text x="{:.2}" y="{:.2}">(1,1)</text>"#,
            x + 5.0,
            y + 14.0
        );
    }
    for (k, n) in notes.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text class="annotation" x="{MARGIN}" y="{:.2}" fill="dimgray">{}</text>"#,
            canvas.height - 8.0 - 14.0 * k as f64,
            escape_xml(n)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

// -- command line ------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(name = "toric-regions", version, about = "Minimal invariant regions of planar toric differential inclusions")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Build the region boundary and write it as JSON.
    Construct {
        spec: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Print the right-hand side cone at a point as `tag;r;data`.
    #[command(allow_negative_numbers = true)]
    Rhs {
        spec: PathBuf,
        x: f64,
        y: f64,
        /// Read the coordinates as (log x, log y).
        #[arg(long)]
        log: bool,
    },
    /// Integrate one strategy and write the trajectory as CSV.
    #[command(allow_negative_numbers = true)]
    Simulate {
        spec: PathBuf,
        #[arg(long)]
        strategy: String,
        #[arg(long)]
        x0: f64,
        #[arg(long)]
        y0: f64,
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-2)]
        dt: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Read x0, y0 as log coordinates.
        #[arg(long)]
        log: bool,
        /// Local error tolerance (log space) for step-doubling control;
        /// defaults to 1e-10 for the mass-action strategies, off otherwise.
        #[arg(long)]
        err_tol: Option<f64>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run the verification battery and write a JSON report.
    Verify {
        spec: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Draw a boundary (and optionally strips and trajectories) as SVG.
    Render {
        spec: PathBuf,
        boundary: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        x_space: bool,
        #[arg(long)]
        show_regions: bool,
        /// Trajectory CSV written by `simulate`; may be repeated.
        #[arg(long = "trajectory")]
        trajectories: Vec<PathBuf>,
    },
}

#[derive(Debug)]
struct Failure {
    code: i32,
    msg: String,
}

fn usage(msg: impl ToString) -> Failure {
    Failure {
        code: EXIT_USAGE,
        msg: msg.to_string(),
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        usage(e)
    }
}

impl From<ConstructionError> for Failure {
    fn from(e: ConstructionError) -> Self {
        let code = match e {
            ConstructionError::UnsupportedFan(_) => EXIT_UNSUPPORTED_FAN,
            ConstructionError::Geometry(_) => EXIT_USAGE,
            _ => EXIT_DELTA_TOO_SMALL,
        };
        Failure { code, msg: e.to_string() }
    }
}

impl From<DynamicsError> for Failure {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::StepCollapse { .. } => Failure {
                code: EXIT_STEP_COLLAPSE,
                msg: e.to_string(),
            },
            DynamicsError::Construction(c) => c.into(),
            e => usage(e),
        }
    }
}

fn load_spec(path: &Path) -> Result<(FanSpec, Fan), Failure> {
    let (spec, unknown) = FanSpec::load(path)?;
    if !unknown.is_empty() {
        eprintln!("warning: {}: ignoring unknown keys: {}", path.display(), unknown.join(", "));
    }
    let fan = spec.fan().map_err(|e| usage(format!("{}: key `generators`: {e}", path.display())))?;
    Ok((spec, fan))
}

fn cmd_construct(spec: &Path, out: &Path) -> Result<i32, Failure> {
    let (spec, fan) = load_spec(spec)?;
    let region = construct_region(&fan, spec.delta)?;
    write_file(out, &BoundaryDoc::from_region(&region).to_json())?;
    println!("{} pieces written to {}", region.pieces.len(), out.display());
    Ok(EXIT_OK)
}

fn cmd_rhs(spec: &Path, x: f64, y: f64, log: bool) -> Result<i32, Failure> {
    let (spec, fan) = load_spec(spec)?;
    let pt = if log {
        if !(x.is_finite() && y.is_finite()) {
            return Err(usage("log coordinates must be finite"));
        }
        LogPoint::new(x, y)
    } else {
        crate::PosPoint::new(x, y).map_err(usage)?.to_log()
    };
    let cone = rhs_log(pt, &fan, spec.delta);
    let r = r_count_log(pt, &fan, spec.delta);
    println!("{};{};{}", cone.tag(), r, cone.data_string());
    Ok(EXIT_OK)
}

/// Smooth but stiff far from (1,1); these get step-doubling control.
const MASS_ACTION_STRATEGIES: [&str; 2] = ["origin_11", "point_NM"];

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    spec: &Path,
    strategy: &str,
    x0: f64,
    y0: f64,
    t_end: f64,
    dt: f64,
    seed: Option<u64>,
    log: bool,
    err_tol: Option<f64>,
    out: &Path,
) -> Result<i32, Failure> {
    let (spec, fan) = load_spec(spec)?;
    let seed = seed.or(spec.seed).unwrap_or(0);
    let start = if log {
        LogPoint::new(x0, y0)
    } else {
        crate::PosPoint::new(x0, y0).map_err(usage)?.to_log()
    };
    if !(start.x.is_finite() && start.y.is_finite()) {
        return Err(usage("start point must be finite"));
    }
    if !(t_end.is_finite() && t_end > 0.0 && dt.is_finite() && dt > 0.0) {
        return Err(usage("--t-end and --dt must be positive"));
    }
    let mut strat = strategy_by_name(strategy, &fan, spec.delta, seed)?.ok_or_else(|| {
        usage(format!(
            "unknown strategy {strategy:?}; registered: {}",
            STRATEGY_NAMES.join(", ")
        ))
    })?;
    let mut cfg = IntegratorConfig {
        dt,
        t_end,
        ..Default::default()
    };
    if let Some(tol) = spec.tolerances.velocity {
        cfg.tol = tol;
    }
    cfg.err_tol = err_tol.or(MASS_ACTION_STRATEGIES.contains(&strategy).then_some(1e-10));
    let traj = integrate_with(strat.as_mut(), start, &fan, spec.delta, &cfg, &mut |_, _| false)?;
    write_file(out, &trajectory_to_csv(&traj)?)?;
    let end = traj.last();
    println!(
        "{} samples, end ({:.6e}, {:.6e}), written to {}",
        traj.samples.len(),
        end.x.exp(),
        end.y.exp(),
        out.display()
    );
    Ok(EXIT_OK)
}

fn cmd_verify(spec_path: &Path, out: &Path, seed: Option<u64>) -> Result<i32, Failure> {
    let (spec, fan) = load_spec(spec_path)?;
    let seed = seed.or(spec.seed).unwrap_or(0);
    let cfg = spec.battery_config(seed);
    let checks = run_battery(&fan, spec.delta, &cfg);
    for c in &checks {
        println!("{}", c.line());
    }
    let pass = all_pass(&checks);
    let code = if pass {
        EXIT_OK
    } else {
        match checks.first().map(|c| c.name.as_str()) {
            Some("UnsupportedFan") => EXIT_UNSUPPORTED_FAN,
            Some("DeltaTooSmall") => EXIT_DELTA_TOO_SMALL,
            _ => EXIT_CHECKS_FAILED,
        }
    };
    let report = VerifyReport {
        format_version: FORMAT_VERSION.into(),
        generators: spec.generators.clone(),
        delta: spec.delta,
        seed,
        config: cfg,
        pass,
        checks,
    };
    let json = serde_json::to_string_pretty(&report).map_err(usage)?;
    write_file(out, &json)?;
    println!("{}", if pass { "all checks pass" } else { "some checks FAIL" });
    Ok(code)
}

fn cmd_render(
    spec: &Path,
    boundary: &Path,
    out: &Path,
    x_space: bool,
    show_regions: bool,
    trajectories: &[PathBuf],
) -> Result<i32, Failure> {
    let (spec, fan) = load_spec(spec)?;
    let doc = BoundaryDoc::load(boundary)?;
    let trajectories = trajectories
        .iter()
        .map(|p| {
            load_trajectory(p).map(|rows| rows.iter().map(|r| LogPoint::new(r.log_x, r.log_y)).collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let opts = RenderOptions {
        x_space,
        show_regions,
        trajectories,
    };
    write_file(out, &render_svg(&fan, spec.delta, &doc, &opts))?;
    println!("written to {}", out.display());
    Ok(EXIT_OK)
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.cmd {
        Cmd::Construct { spec, out } => cmd_construct(spec, out),
        Cmd::Rhs { spec, x, y, log } => cmd_rhs(spec, *x, *y, *log),
        Cmd::Simulate {
            spec,
            strategy,
            x0,
            y0,
            t_end,
            dt,
            seed,
            log,
            err_tol,
            out,
        } => cmd_simulate(spec, strategy, *x0, *y0, *t_end, *dt, *seed, *log, *err_tol, out),
        Cmd::Verify { spec, out, seed } => cmd_verify(spec, out, *seed),
        Cmd::Render {
            spec,
            boundary,
            out,
            x_space,
            show_regions,
            trajectories,
        } => cmd_render(spec, boundary, out, *x_space, *show_regions, trajectories),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::WORKED_FAN;

    #[test]
    fn spec_defaults_and_unknown_keys() {
        let (s, unknown) = FanSpec::parse(
            r#"{"generators": [[-1,1],[1,2],[2,1]], "delta": 3, "colour": "red", "samples": {"boundary": 10, "foo": 1}}"#,
        )
        .unwrap();
        assert_eq!(s.format_version, "1.0");
        assert_eq!(s.samples.boundary, Some(10));
        assert_eq!(unknown, vec!["colour".to_string(), "samples.foo".to_string()]);
        assert_eq!(s.battery_config(7).boundary_samples, 10);
        assert_eq!(s.battery_config(7).seed, 7);
    }

    #[test]
    fn spec_errors_name_the_problem() {
        let e = FanSpec::parse(r#"{"generators": [[1,2]]}"#).unwrap_err().to_string();
        assert!(e.contains("delta"), "{e}");
        let e = FanSpec::parse("{\n\"generators\": [[1,2]],\n\"delta\": \"x\"}").unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
        let e = FanSpec::parse(r#"{"generators": [[1,2]], "delta": -1}"#).unwrap_err().to_string();
        assert!(e.contains("delta"), "{e}");
        assert!(matches!(
            FanSpec::parse(r#"{"format_version": "2.0", "generators": [[1,2]], "delta": 1}"#),
            Err(FormatError::Version(_))
        ));
    }

    #[test]
    fn boundary_round_trip_is_exact() {
        let fan = Fan::new(&WORKED_FAN).unwrap();
        let reg = construct_region(&fan, 3.0).unwrap();
        let doc = BoundaryDoc::from_region(&reg);
        let json = doc.to_json();
        assert!(json.contains(r#""type": "segment""#) && json.contains(r#""type": "arc""#));
        for a in ["NM", "nm", "Aq", "Bu", "Cr", "Ds", "P_i1i2", "P_i3i4"] {
            assert!(json.contains(&format!("\"{a}\"")), "{a}");
        }
        let back = BoundaryDoc::from_json(&json).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.to_json(), json);
        let bumped = json.replace("\"format_version\": \"1.0\"", "\"format_version\": \"3.1\"");
        assert!(matches!(BoundaryDoc::from_json(&bumped), Err(FormatError::Version(_))));
    }

    #[test]
    fn polygon_clipping() {
        let sq = [[-1.0, -1.0], [2.0, -1.0], [2.0, 2.0], [-1.0, 2.0]];
        let c = clip_polygon(&sq, [0.0, 1.0, 0.0, 1.0]);
        assert_eq!(c.len(), 4);
        for p in c {
            assert!(p[0] == 0.0 || p[0] == 1.0);
            assert!(p[1] == 0.0 || p[1] == 1.0);
        }
        let far = [[5.0, 5.0], [6.0, 5.0], [6.0, 6.0]];
        assert!(clip_polygon(&far, [0.0, 1.0, 0.0, 1.0]).is_empty());
    }

    #[test]
    fn polyline_clipping_splits_runs() {
        let pts = [[-1.0, 0.5], [0.5, 0.5], [2.0, 0.5], [2.0, 0.7], [0.5, 0.7]];
        let runs = clip_polyline(&pts, [0.0, 1.0, 0.0, 1.0]);
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[0], vec![[0.0, 0.5], [0.5, 0.5], [1.0, 0.5]]);
        assert_eq!(runs[1], vec![[1.0, 0.7], [0.5, 0.7]]);
    }
}
