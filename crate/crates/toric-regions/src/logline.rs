//! Straight lines of the positive quadrant seen in log coordinates.
//!
//! A line through `(e^{X0}, e^{Y0})` with x-space direction `(a, b)` becomes a
//! monotone curve in the (X, Y) plane. Everything here is written so that
//! neither coordinate is ever exponentiated on its own.

use crate::fan_geometry::LogPoint;

/// `log Σ e^{v_i}`; `-∞` for an empty slice.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|a| (a - m).exp()).sum::<f64>().ln()
}

/// `log |e^a − e^b|`.
pub fn log_abs_diff(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == lo {
        return f64::NEG_INFINITY;
    }
    hi + (-(lo - hi).exp_m1()).ln()
}

/// Along an x-space line through `(c0, o0)` (log coordinates, `c` the
/// driving coordinate) with direction components `tc` (driving) and `to`,
/// the other log coordinate when the driving one equals `c`.
pub fn other(c0: f64, o0: f64, tc: f64, to: f64, c: f64) -> f64 {
    let r = (to / tc) * (c0 - o0).exp();
    let d = c - c0;
    if r > 0.0 && d > 0.0 {
        o0 + d + (r + (1.0 - r) * (-d).exp()).ln()
    } else {
        o0 + (r * d.exp_m1()).ln_1p()
    }
}

/// An x-space ray/line parametrized by one of its log coordinates.
#[derive(Debug, Clone, Copy)]
pub struct LogLine {
    pub origin: LogPoint,
    /// x-space direction.
    pub dir: [f64; 2],
    /// Whether the driving parameter is `X` (else `Y`).
    pub by_x: bool,
    /// Whether increasing the parameter moves forward along `dir`.
    pub forward_up: bool,
}

impl LogLine {
    /// Chooses the driving coordinate so that the forward ray is covered
    /// until it leaves the open quadrant.
    pub fn new(origin: LogPoint, dir: [f64; 2]) -> Self {
        let [a, b] = dir;
        let by_x = if a < 0.0 && b < 0.0 {
            // both shrinking: drive by whichever reaches zero first
            origin.x - (-a).ln() <= origin.y - (-b).ln()
        } else {
            a != 0.0 && b >= 0.0
        };
        let forward_up = if by_x { a > 0.0 } else { b > 0.0 };
        LogLine {
            origin,
            dir,
            by_x,
            forward_up,
        }
    }

    /// Point at parameter offset `w` (driving coordinate = origin + w).
    /// `None` when the line has left the quadrant.
    pub fn at(&self, w: f64) -> Option<LogPoint> {
        let o = self.origin;
        let p = if self.by_x {
            LogPoint::new(o.x + w, other(o.x, o.y, self.dir[0], self.dir[1], o.x + w))
        } else {
            LogPoint::new(other(o.y, o.x, self.dir[1], self.dir[0], o.y + w), o.y + w)
        };
        (p.x.is_finite() && p.y.is_finite()).then_some(p)
    }

    /// Parameter offset of a point known to lie on the line.
    pub fn param_of(&self, p: LogPoint) -> f64 {
        if self.by_x {
            p.x - self.origin.x
        } else {
            p.y - self.origin.y
        }
    }

    /// Signed forward progress: positive iff `p` is ahead of the origin.
    pub fn progress(&self, p: LogPoint) -> f64 {
        let w = self.param_of(p);
        if self.forward_up {
            w
        } else {
            -w
        }
    }

    /// First forward root of `g` along the ray, by doubling then bisection.
    /// Domain failures (left the quadrant) count as a bracket end.
    pub fn first_root(&self, g: impl Fn(LogPoint) -> f64, max_param: f64) -> Option<LogPoint> {
        let eval = |w: f64| self.at(w).map(&g).filter(|v| v.is_finite());
        let g0 = eval(0.0)?;
        if g0 == 0.0 {
            return None;
        }
        let sgn = if self.forward_up { 1.0 } else { -1.0 };
        let mut lo = 0.0;
        let mut hi = 1e-3 * sgn;
        loop {
            match eval(hi) {
                None => break,
                Some(v) if v * g0 <= 0.0 => break,
                _ => {}
            }
            lo = hi;
            hi *= 2.0;
            if hi.abs() > max_param {
                return None;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            match eval(mid) {
                Some(v) if v * g0 > 0.0 => lo = mid,
                _ => hi = mid,
            }
        }
        // `hi` is on the far side; reject pure domain boundaries
        let v = eval(hi)?;
        if v * g0 > 0.0 {
            return None;
        }
        self.at(hi)
    }
}

/// Log-difference sign of `cross(t, x(P) − x(L))` in x-space:
/// `> 0` means `P` lies counter-clockwise of the x-line through `L` with
/// direction `t`. Returned as `log(pos terms) − log(neg terms)`.
pub fn side(p: LogPoint, l: LogPoint, t: [f64; 2]) -> f64 {
    let mut pos = Vec::with_capacity(4);
    let mut neg = Vec::with_capacity(4);
    let mut add = |c: f64, e: f64| {
        if c > 0.0 {
            pos.push(c.ln() + e);
        } else if c < 0.0 {
            neg.push((-c).ln() + e);
        }
    };
    add(t[0], p.y);
    add(-t[0], l.y);
    add(-t[1], p.x);
    add(t[1], l.x);
    match (pos.is_empty(), neg.is_empty()) {
        (true, true) => 0.0,
        (true, false) => f64::NEG_INFINITY,
        (false, true) => f64::INFINITY,
        _ => log_sum_exp(&pos) - log_sum_exp(&neg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_points_are_collinear_in_x_space() {
        let o = LogPoint::new(1.0, 2.0);
        for dir in [[1.0, -0.5], [-1.0, -2.0], [-2.0, -1.0], [0.0, -1.0], [1.0, 0.0], [-3.0, 1.0]] {
            let l = LogLine::new(o, dir);
            for w in [0.1, 0.5, 1.0] {
                let w = if l.forward_up { w } else { -w };
                if let Some(p) = l.at(w) {
                    let (x0, y0) = (o.x.exp(), o.y.exp());
                    let (x, y) = (p.x.exp(), p.y.exp());
                    let c = dir[0] * (y - y0) - dir[1] * (x - x0);
                    assert!(c.abs() < 1e-9, "{dir:?} {c}");
                    assert!(l.progress(p) > 0.0);
                    assert!(dir[0] * (x - x0) + dir[1] * (y - y0) > 0.0);
                }
            }
        }
    }

    #[test]
    fn log_helpers() {
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((log_abs_diff(2f64.ln(), 0.0)).abs() < 1e-15);
        assert!(side(LogPoint::new(0.0, 1.0), LogPoint::ORIGIN, [1.0, 0.0]) > 0.0);
    }
}
