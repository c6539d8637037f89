use std::f64::consts::TAU;

use proptest::prelude::*;
use toric_regions::cli_io::{clip_polygon, trajectory_from_csv, trajectory_to_csv, BoundaryDoc};
use toric_regions::dynamics::{Sample, Termination, Trajectory};
use toric_regions::fan_geometry::r_count_log;
use toric_regions::region_construction::Containment;
use toric_regions::tdi_rhs::{rhs_bruteforce_log, rhs_classified_log, rhs_subfan_subset_log};
use toric_regions::{construct_region, Cone2, Fan, LogPoint, WORKED_FAN};

fn worked() -> Fan {
    Fan::new(&WORKED_FAN).unwrap()
}

fn unit(a: f64) -> [f64; 2] {
    [a.cos(), a.sin()]
}

fn log_point(r: f64) -> impl Strategy<Value = LogPoint> {
    (-r..r, -r..r).prop_map(|(x, y)| LogPoint::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn classified_rhs_matches_brute_force(p in log_point(15.0), delta in 1.0f64..6.0) {
        let fan = worked();
        if let Ok(fast) = rhs_classified_log(p, &fan, delta) {
            let slow = rhs_bruteforce_log(p, &fan, delta);
            prop_assert!(fast.approx_eq(&slow, 1e-9), "{fast:?} vs {slow:?}");
        }
    }

    #[test]
    fn fan_ignores_order_sign_and_scale(k in 1i64..5, flip in any::<[bool; 3]>(), rot in 0usize..3) {
        let mut pairs: Vec<(i64, i64)> = WORKED_FAN
            .iter()
            .zip(flip)
            .map(|(&(p, q), f)| if f { (-k * p, -k * q) } else { (k * p, k * q) })
            .collect();
        pairs.rotate_left(rot);
        prop_assert_eq!(Fan::new(&pairs).unwrap(), worked());
    }

    #[test]
    fn polar_of_a_sector_is_its_dual(a in 0.0..TAU, w in 0.05f64..3.0, v in 0.0..TAU) {
        let c = Cone2::sector(unit(a), unit(a + w));
        let pc = c.polar();
        let u = unit(v);
        // u is in the polar iff u·g ≤ 0 for both generators of c.
        let dual = c.generators().iter().all(|g| g[0] * u[0] + g[1] * u[1] <= 1e-12);
        let margin = c.generators().iter().map(|g| (g[0] * u[0] + g[1] * u[1]).abs()).fold(f64::INFINITY, f64::min);
        if margin > 1e-9 {
            prop_assert_eq!(pc.contains(u, 1e-12), dual);
        }
        let back = pc.polar();
        prop_assert!(back.contains(unit(a + 0.5 * w), 1e-12));
    }

    #[test]
    fn subfan_rhs_is_contained(p in log_point(15.0), which in 0usize..3) {
        let fan = worked();
        let sub = Fan::new(&[WORKED_FAN[which]]).unwrap();
        prop_assert!(rhs_subfan_subset_log(p, &fan, &sub, 3.0).unwrap());
    }

    #[test]
    fn clipped_polygon_stays_in_the_window(pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..8)) {
        let poly: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
        for p in clip_polygon(&poly, [-1.0, 2.0, -3.0, 0.5]) {
            prop_assert!((-1.0..=2.0).contains(&p[0]) && (-3.0..=0.5).contains(&p[1]), "{p:?}");
        }
    }

    #[test]
    fn trajectory_csv_round_trips(xs in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..20)) {
        let samples = xs
            .iter()
            .enumerate()
            .map(|(k, &(x, y))| Sample { t: k as f64 * 0.1, x: LogPoint::new(x, y), v: [0.0, 0.0], cone_tag: "ProperCone" })
            .collect();
        let tr = Trajectory {
            samples,
            dt: 0.1,
            strategy: "random".into(),
            termination: Termination::Completed,
            euler_steps: 0,
            worst_violation: 0.0,
        };
        let rows = trajectory_from_csv(&trajectory_to_csv(&tr).unwrap()).unwrap();
        prop_assert_eq!(rows.len(), tr.samples.len());
        for (r, s) in rows.iter().zip(&tr.samples) {
            prop_assert_eq!((r.t, r.log_x, r.log_y), (s.t, s.x.x, s.x.y));
            prop_assert_eq!(r.cone_tag.as_str(), "ProperCone");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn region_boundary_properties(delta in 3.0f64..8.0, s in 0.0f64..1.0) {
        let fan = worked();
        let reg = construct_region(&fan, delta).unwrap();
        prop_assert_eq!(reg.classify_log(LogPoint::ORIGIN, 1e-9), Containment::Inside);
        for piece in &reg.pieces {
            let p = piece.point_at(s);
            prop_assert!(r_count_log(p, &fan, delta) <= 1);
            prop_assert_ne!(reg.classify_log(p, 1e-9 * delta), Containment::Outside);
        }
        for p in reg.suc_log() {
            prop_assert_ne!(reg.classify_log(p, 1e-9 * delta), Containment::Outside);
        }
        let doc = BoundaryDoc::from_region(&reg);
        prop_assert_eq!(BoundaryDoc::from_json(&doc.to_json()).unwrap(), doc);
    }

    #[test]
    fn region_grows_with_delta(delta in 3.0f64..6.0, factor in 1.1f64..2.0) {
        let fan = worked();
        let small = construct_region(&fan, delta).unwrap();
        let big = construct_region(&fan, delta * factor).unwrap();
        for p in small.polyline(8) {
            prop_assert_eq!(big.classify_log(p, 1e-9), Containment::Inside);
        }
    }
}
