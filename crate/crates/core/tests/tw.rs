use invasion_core::model::v_critical;
use invasion_core::tw::*;

#[test]
fn tail_kinds_at_unit_gamma_and_speed() {
    let pos = rear_orbit_to(1.0, 1.0, 0.75).unwrap();
    assert!((pos.v_end - 0.75).abs() < 1e-6);
    assert_eq!(classify_tail(&pos).unwrap().kind, TailKind::PosApproach);
    let spiral = rear_orbit_to(1.0, 1.0, 0.3).unwrap();
    assert_eq!(classify_tail(&spiral).unwrap().kind, TailKind::Spiral);
}

#[test]
fn just_above_critical_density_approaches_from_below() {
    let vc = v_critical(1.24).unwrap().value;
    assert!((vc - 0.38).abs() < 1e-12);
    let t = rear_orbit_to(10.0, 1.24, 0.40).unwrap();
    let cls = classify_tail(&t).unwrap();
    assert_eq!(cls.kind, TailKind::NegApproach);
    assert_eq!(cls.r2_sign, 1);
}

#[test]
fn separating_density_at_gamma_ten() {
    let vs = find_vs(10.0, 1.24).unwrap().value.unwrap();
    assert!((vs - 0.5).abs() < 5e-3, "V_s = {vs}");
    // rear shooting finds the same threshold
    let rear = find_vs_rear(10.0, 1.24).unwrap().value.unwrap();
    assert!((vs - rear).abs() < 1e-6, "{vs} vs {rear}");
    // the classification flips across it
    let below = rear_orbit_to(10.0, 1.24, vs - 1e-3).unwrap();
    let above = rear_orbit_to(10.0, 1.24, vs + 1e-3).unwrap();
    assert_eq!(classify_tail(&below).unwrap().kind, TailKind::NegApproach);
    assert_eq!(classify_tail(&above).unwrap().kind, TailKind::PosApproach);
}

#[test]
fn no_separating_density_at_unit_gamma() {
    let s = find_vs(1.0, 1.0).unwrap();
    assert_eq!(s.value, None);
    assert!(!s.above_range);
    assert_eq!(find_vs_rear(1.0, 1.0).unwrap().value, None);
}

#[test]
fn separating_density_merges_with_critical_at_small_gamma() {
    let s = find_vs(0.1, 1.2).unwrap();
    if let Some(v) = s.value {
        assert!(v - s.v_c < 1e-2, "V_s = {v}, V_c = {}", s.v_c);
    }
}

#[test]
fn front_shots_bracket_the_branch() {
    let lo = shoot_from_front(10.0, 1.15, 0.5, SEED_EPS).unwrap().front_miss.unwrap();
    let hi = shoot_from_front(10.0, 1.35, 0.5, SEED_EPS).unwrap().front_miss.unwrap();
    assert_eq!(lo, FrontMiss::Undershoot);
    assert_eq!(hi, FrontMiss::Overshoot);
    // the connecting speed is 1.24 to two places
    let bp = branch_speed(10.0, 0.5).unwrap();
    assert!((bp.c - 1.24).abs() < 5e-3);
    assert!(connection_residual(&branch_orbit(&bp).unwrap()).unwrap() < 1e-6);
}

#[test]
fn axis_value_grows_with_mix() {
    // at (1, 1) the whole fan of axis orbits sits in log mix between -20 and 0
    let mut last = 0.0;
    let mut seen = 0;
    for k in 0..400 {
        let mix = (-20.0 + 0.05 * k as f64).exp();
        let t = match shoot_from_rear(1.0, 1.0, mix, SEED_EPS) {
            Ok(t) if t.rear_end == Some(RearEnd::Axis) => t,
            Ok(_) | Err(invasion_core::Error::Singularity(_)) => break,
            Err(e) => panic!("{e}"),
        };
        assert!(t.v_end > last, "mix = {mix}: V_end {} after {last}", t.v_end);
        last = t.v_end;
        seen += 1;
    }
    assert!(seen >= 100 && last > 0.75, "{seen} axis orbits, last V_end {last}");
}

// V increases along the orbit while U > 0, and W < 0 across the front.
fn assert_monotone(t: &TwTrajectory) {
    let mut pts = t.samples.clone();
    pts.sort_by(|a, b| a.z.total_cmp(&b.z));
    for w in pts.windows(2) {
        // deep in the rear V underflows to 0 (it is integrated as log V)
        if w[0].u > 0.0 && w[1].u > 0.0 && w[0].v > 0.0 {
            assert!(w[1].v > w[0].v, "V not increasing at z = {}", w[1].z);
        }
    }
    for p in &pts {
        if p.u > 1e-2 && p.u < 1.0 - 1e-2 {
            assert!(p.w < 0.0, "W = {} at U = {}", p.w, p.u);
        }
    }
}

#[test]
fn orbits_are_monotone() {
    assert_monotone(&rear_orbit_to(1.0, 1.0, 0.75).unwrap());
    assert_monotone(&rear_orbit_to(10.0, 1.3, 0.6).unwrap());
    for g in [10.0, 1e3, 1e6] {
        assert_monotone(&branch_orbit(&branch_speed(g, 0.5).unwrap()).unwrap());
    }
}

// V and W at common U levels, so no z-alignment is needed.
fn at_levels(t: &TwTrajectory, levels: &[f64]) -> Vec<(f64, f64)> {
    let mut pts = t.samples.clone();
    pts.sort_by(|a, b| a.z.total_cmp(&b.z));
    levels
        .iter()
        .map(|&lv| {
            let i = pts.windows(2).position(|w| w[0].u >= lv && w[1].u < lv).expect("level crossed");
            // refine on the dense output
            let (mut a, mut b) = (pts[i].z, pts[i + 1].z);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if t.at(m).unwrap().u >= lv {
                    a = m;
                } else {
                    b = m;
                }
            }
            let p = t.at(0.5 * (a + b)).unwrap();
            (p.v, p.w)
        })
        .collect()
}

#[test]
fn shooting_directions_agree() {
    let bp = branch_speed(10.0, 0.5).unwrap();
    assert_eq!(bp.regime, Regime::VsLimited);
    let front = branch_orbit(&bp).unwrap();
    let rear = rear_orbit_to(10.0, bp.c, 0.5).unwrap();
    let levels: Vec<f64> = (1..100).map(|k| k as f64 / 100.0).collect();
    let a = at_levels(&front, &levels);
    let b = at_levels(&rear, &levels);
    let sup = a.iter().zip(&b).map(|(p, q)| (p.0 - q.0).abs().max((p.1 - q.1).abs())).fold(0.0, f64::max);
    assert!(sup <= 1e-5, "sup distance {sup:e}");
}

#[test]
fn branch_points_connect() {
    for g in [10.0, 1e2, 1e4, 1e8] {
        let bp = branch_speed(g, 0.5).unwrap();
        assert_eq!(bp.regime, Regime::VsLimited);
        let r = connection_residual(&branch_orbit(&bp).unwrap()).unwrap();
        assert!(r < 1e-6, "gamma = {g}: residual {r:e}");
        assert!(bp.c > 1.0 && bp.c < 2.0);
    }
}

#[test]
fn branch_speed_increases_with_gamma() {
    for v in [0.25, 0.5, 0.75] {
        let mut prev: Option<f64> = None;
        for g in [1e2, 1e3, 1e4, 1e6, 1e8] {
            let bp = branch_speed(g, v).unwrap();
            if bp.regime != Regime::VsLimited {
                continue;
            }
            assert!(bp.c < 2.0);
            if let Some(p) = prev {
                assert!(bp.c > p, "V = {v}, gamma = {g}: {} after {p}", bp.c);
            }
            prev = Some(bp.c);
        }
        assert!(prev.is_some());
    }
}

#[test]
fn small_gamma_plateau() {
    for v in [0.25, 0.5, 0.75] {
        let bp = branch_speed(0.1, v).unwrap();
        assert!((bp.c - 2.0 * (1.0 - v)).abs() < 1e-2, "V = {v}: c = {}", bp.c);
    }
    let bp = branch_speed(1.0, 0.5).unwrap();
    assert_eq!(bp.regime, Regime::VcLimited);
    assert!((bp.c - 1.0).abs() < 1e-2);
}

#[test]
fn selection_between_tail_and_compact_speed() {
    assert!((selected_speed(0.1, 0.5, InvaderTail::Exponential { a: 0.25 }).unwrap() - 2.125).abs() < 1e-12);
    assert_eq!(selected_speed(3.0, 0.0, InvaderTail::Exponential { a: 1.0 }).unwrap(), 2.0);
    assert_eq!(selected_speed(3.0, 0.0, InvaderTail::Exponential { a: 2.0 }).unwrap(), 2.0);
    assert_eq!(selected_speed(3.0, 0.0, InvaderTail::Exponential { a: 0.5 }).unwrap(), 2.5);
    let compact = selected_speed(1e4, 0.5, InvaderTail::Compact).unwrap();
    let steep = selected_speed(1e4, 0.5, InvaderTail::Exponential { a: 0.5 }).unwrap();
    assert_eq!(compact, steep);
    // every density up to the search ceiling is excluded at c = 1.25
    let s = find_vs(1e4, 1.25).unwrap();
    assert!(s.value.is_none() && s.above_range);
}

#[test]
fn gap_grows_like_log_gamma() {
    let w = |g: f64| gap_width(&branch_orbit(&branch_speed(g, 0.5).unwrap()).unwrap(), 0.05).unwrap();
    let (w1, w4, w6, w8) = (w(10.0), w(1e4), w(1e6), w(1e8));
    assert!(w4 > w1 && w6 > w4 && w8 > w6);
    let step = 2.0 * 10f64.ln();
    assert!(((w6 - w4) - step).abs() < 0.25 * step, "{}", w6 - w4);
    assert!(((w8 - w6) - step).abs() < 0.25 * step, "{}", w8 - w6);
}

#[test]
fn gap_needs_a_resident() {
    let fkpp = shoot_from_rear(1.0, 2.0, 0.0, SEED_EPS).unwrap();
    assert!(gap_width(&fkpp, 0.05).is_err());
    let t = rear_orbit_to(1.0, 1.0, 0.75).unwrap();
    assert!(gap_width(&t, 0.5).is_err());
}
