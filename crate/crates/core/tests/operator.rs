use lifshitz_core::geometry::Cube;
use lifshitz_core::operator::{build_hamiltonian, HamiltonianMatrix, SparseHermitian};
use lifshitz_core::potential::{assemble_field, GridSpec, RadialProfile, SingleSitePotential};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use std::f64::consts::PI;

fn sparse_symmetric() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
    (1usize..=60).prop_flat_map(|n| {
        let diag = prop::collection::vec(-4.0f64..4.0, n);
        let off = prop::collection::vec((0..n, 0..n, -2.0f64..2.0), 0..3 * n);
        (Just(n), diag, off).prop_map(|(n, d, off)| {
            let mut t: Vec<(usize, usize, f64)> = d.into_iter().enumerate().map(|(i, v)| (i, i, v)).collect();
            for (i, j, v) in off {
                if i != j {
                    t.push((i, j, v));
                    t.push((j, i, v));
                }
            }
            (n, t)
        })
    })
}

fn dense_eigs(n: usize, t: &[(usize, usize, f64)]) -> Vec<f64> {
    let mut m = DMatrix::<f64>::zeros(n, n);
    for &(i, j, v) in t {
        m[(i, j)] += v;
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn inertia_matches_dense_counts((n, t) in sparse_symmetric(), shifts in prop::collection::vec(-9.0f64..9.0, 5)) {
        let ev = dense_eigs(n, &t);
        let h = HamiltonianMatrix::from_real(SparseHermitian::from_triplets(n, &t).unwrap());
        prop_assert_eq!(h.hermiticity_defect(), 0.0);
        for s in shifts {
            if ev.iter().any(|l| (l - s).abs() < 1e-9) {
                continue;
            }
            let got = h.count_below(s).unwrap();
            prop_assert_eq!(got.count, ev.iter().filter(|&&l| l < s).count());
            prop_assert!(got.count <= n);
        }
    }

    #[test]
    fn bracket_brackets_the_ground_state((n, t) in sparse_symmetric()) {
        let h = HamiltonianMatrix::from_real(SparseHermitian::from_triplets(n, &t).unwrap());
        let tol = 1e-9;
        let p = h.smallest_eigenpair(tol).unwrap();
        let eps = 10.0 * tol * h.scale();
        prop_assert_eq!(h.count_below(p.value - eps).unwrap().count, 0);
        prop_assert!(h.count_below(p.value + eps).unwrap().count >= 1);
        let ev = dense_eigs(n, &t);
        prop_assert!((p.value - ev[0]).abs() <= eps);
    }
}

#[test]
fn dirichlet_square_counts_match_discrete_spectrum() {
    let (side, h) = (2.0, 0.1);
    let grid = GridSpec::dirichlet(Cube::centered(2, side).unwrap(), h).unwrap();
    let m = grid.nodes_per_axis();
    let hm = build_hamiltonian(&grid, &vec![0.0; m * m]).unwrap();
    let mode = |k: usize| (2.0 - 2.0 * (k as f64 * PI / (m + 1) as f64).cos()) / (h * h);
    let mut ev = Vec::new();
    for a in 1..=m {
        for b in 1..=m {
            ev.push(mode(a) + mode(b));
        }
    }
    for e in [5.0, 20.0, 100.0, 410.0, 1000.0] {
        let want = ev.iter().filter(|&&l| l < e).count();
        assert_eq!(hm.count_below(e).unwrap().count, want, "E={e}");
    }
}

#[test]
fn ground_state_is_insensitive_to_bloch_phase_for_a_small_well() {
    let torus = Cube::torus(1, 20.0).unwrap();
    let v = SingleSitePotential::single(RadialProfile::Square { depth: 4.0, radius: 0.5 });
    let base = GridSpec::periodic(torus, 0.05).unwrap();
    let field = assemble_field(&v, &[[0.0; 3]], &base, None).unwrap();
    let mut energies = Vec::new();
    for k in 0..5 {
        let theta = k as f64 / 5.0 * 2.0 * PI / 20.0;
        let grid = GridSpec::bloch(torus, 0.05, [theta, 0.0, 0.0]).unwrap();
        let h = build_hamiltonian(&grid, &field.values).unwrap();
        assert_eq!(h.hermiticity_defect(), 0.0);
        energies.push(h.smallest_eigenpair(1e-10).unwrap().value);
    }
    let lo = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!((hi - lo) / lo.abs() < 0.05, "{energies:?}");
}

#[test]
fn eigenpair_residual_is_small() {
    let grid = GridSpec::dirichlet(Cube::centered(2, 4.0).unwrap(), 0.1).unwrap();
    let v = SingleSitePotential::single(RadialProfile::Square { depth: 10.0, radius: 0.5 });
    let field = assemble_field(&v, &[[0.0; 3]], &grid, None).unwrap();
    let h = build_hamiltonian(&grid, &field.values).unwrap();
    let p = h.smallest_eigenpair(1e-9).unwrap();
    assert!(p.residual <= 1e-9 * h.scale());
    assert!(p.value < 0.0);
    let x = p.vector.abs();
    let center = grid.nearest_node(&[0.0; 3]).unwrap();
    assert!(x.iter().all(|&a| a <= x[center] + 1e-12));
}
