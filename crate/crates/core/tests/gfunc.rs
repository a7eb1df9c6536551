use lifshitz_core::geometry::point;
use lifshitz_core::gfunc::{convexity_defect, ground_energy, GroundSolver, WellCombination};
use lifshitz_core::potential::{RadialProfile, SingleSitePotential, Well};

fn delta(c: f64) -> SingleSitePotential {
    SingleSitePotential::single(RadialProfile::Delta { c })
}

fn square() -> SingleSitePotential {
    SingleSitePotential::single(RadialProfile::Square { depth: 1.0, radius: 1.0 })
}

/// `E_−` of the 1D well of depth `g` on `[−1, 1]`: the even ground state
/// solves `k tan k = √(g − k²)`.
fn square_well_oracle(g: f64) -> f64 {
    let top = g.sqrt().min(std::f64::consts::FRAC_PI_2) * (1.0 - 1e-15);
    let f = |k: f64| k * k.tan() - (g - k * k).sqrt();
    let (mut lo, mut hi) = (0.0, top);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    g - k * k
}

#[test]
fn delta_well_energy_matches_closed_form() {
    let s = GroundSolver::new(1, 1e-3);
    for g in [5.0, 20.0, 50.0] {
        let grid = s.grid(40.0 / g).unwrap();
        let e = ground_energy(&delta(1.0), g, &grid).unwrap();
        let exact = -g * g / 4.0;
        assert!(((e - exact) / exact).abs() < 0.02, "g={g}: {e} vs {exact}");
    }
}

#[test]
fn square_well_matches_transcendental_root() {
    let s = GroundSolver::new(1, 2e-3);
    for g in [10.0, 20.0, 40.0] {
        let e = s.e_minus(&square(), g).unwrap();
        let exact = square_well_oracle(g);
        assert!(((e - exact) / exact).abs() < 0.01, "g={g}: {e} vs {exact}");
    }
}

#[test]
fn delta_inverse_is_two_sqrt_e() {
    let s = GroundSolver::new(1, 1e-3);
    let g = s.g_of_e(&delta(1.0), 25.0, 1e-4).unwrap();
    assert!((g - 10.0).abs() / 10.0 < 0.02, "g={g}");
}

#[test]
fn inverse_round_trip_and_monotone() {
    let s = GroundSolver::new(1, 5e-3);
    let v = square();
    let tol = 1e-4;
    let es: Vec<f64> = (1..=20).map(|i| 0.5 * i as f64).collect();
    let mut prev = 0.0;
    for &e in &es {
        let g = s.g_of_e(&v, e, tol).unwrap();
        assert!(g > prev, "E={e}");
        prev = g;
        let grid = s.solve_auto(&v, &WellCombination::trivial(), g).unwrap().grid;
        let back = -ground_energy(&v, g, &grid).unwrap();
        assert!((back - e).abs() <= 5.0 * tol * e + 2e-3 * e, "E={e}: {back}");
    }
}

#[test]
fn g_of_e_is_concave_up_to_noise() {
    let s = GroundSolver::new(1, 2e-3);
    let v = delta(1.0);
    let gs: Vec<f64> = (1..=10).map(|i| s.g_of_e(&v, i as f64, 1e-5).unwrap()).collect();
    assert!(convexity_defect(&gs) <= 1e-2, "{}", convexity_defect(&gs));
}

#[test]
fn doubling_weights_halves_g() {
    let s = GroundSolver::new(1, 1e-3);
    let g1 = s.g_of_e(&delta(1.0), 9.0, 1e-4).unwrap();
    let g2 = s.g_of_e(&delta(2.0), 9.0, 1e-4).unwrap();
    assert!((g2 / g1 - 0.5).abs() < 0.03 * 0.5, "{g1} {g2}");
}

#[test]
fn separated_wells_act_like_half_strength() {
    let s = GroundSolver::new(1, 1e-3);
    let v = delta(1.0);
    let comb = WellCombination::new(vec![0.5, 0.5], vec![vec![-10.0], vec![10.0]]).unwrap();
    let g = 12.0;
    let both = s.combined_e_minus(&v, &comb, g).unwrap();
    let half = s.e_minus(&v, g / 2.0).unwrap();
    assert!((both - half).abs() / half < 1e-2, "{both} {half}");
    let e = 16.0;
    let ratio = s.combined_g_of_e(&v, &comb, e, 1e-4).unwrap() / s.g_of_e(&v, e, 1e-4).unwrap();
    assert!((ratio - 2.0).abs() < 0.04, "{ratio}");
}

#[test]
fn trivial_combination_never_binds_for_repulsive_potential() {
    let s = GroundSolver::new(1, 0.05);
    let mut v = SingleSitePotential::from_wells(vec![]);
    v.v5 = Some(RadialProfile::Table { radii: vec![0.0, 1.0], values: vec![1.0, 0.0] });
    let comb = WellCombination::trivial();
    assert!(s.combined_g_of_e(&v, &comb, 1.0, 1e-3).is_err());
}

#[test]
fn combined_wells_obey_weighted_lower_bound() {
    // V = 2δ(· + 3) + δ(· − 3); shifts x_j = −y_j put both wells at 0
    let s = GroundSolver::new(1, 1e-3);
    let wells = vec![
        Well { center: vec![-3.0], b: 2.0, profile: RadialProfile::Delta { c: 1.0 } },
        Well { center: vec![3.0], b: 1.0, profile: RadialProfile::Delta { c: 1.0 } },
    ];
    let v = SingleSitePotential::from_wells(wells);
    let comb = WellCombination::new(vec![0.5, 0.5], vec![vec![3.0], vec![-3.0]]).unwrap();
    let e = 25.0;
    let g3 = s.g_of_e(&delta(1.0), e, 1e-4).unwrap();
    let gc = s.combined_g_of_e(&v, &comb, e, 1e-4).unwrap();
    let bound = 0.5 * 2.0 + 0.5 * 1.0;
    assert!(g3 / gc >= 0.9 * bound, "{}", g3 / gc);
}

#[test]
fn square_well_ground_state_decays_in_sqrt_g() {
    let s = GroundSolver::new(1, 0.01);
    let probes = [point(&[2.0]), point(&[3.0])];
    let r = s.decay_profile(&square(), &[25.0, 50.0, 100.0], &probes).unwrap();
    for k in 0..2 {
        assert!(r.slopes[k] < 0.0);
        assert!(r.r_squared[k] >= 0.95, "{:?}", r.r_squared);
    }
    for i in 0..3 {
        assert!(r.log_abs[1][i] < r.log_abs[0][i]);
    }
}

#[test]
fn curve_is_increasing_after_onset() {
    let s = GroundSolver::new(1, 0.01);
    let c = s
        .curve(&square(), &WellCombination::trivial(), &[0.5, 1.0, 2.0, 4.0, 8.0])
        .unwrap();
    assert!(c.is_increasing());
    assert_eq!(c.onset(), Some(0.5));
    let g = c.invert(c.points[2].e_minus).unwrap();
    assert!((g - 2.0).abs() < 1e-9);
}
