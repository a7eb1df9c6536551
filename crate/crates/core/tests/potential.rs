use lifshitz_core::geometry::{Cube, Point};
use lifshitz_core::potential::{assemble_field, GridSpec, RadialProfile, SingleSitePotential, Well};
use proptest::prelude::*;

fn wells() -> SingleSitePotential {
    SingleSitePotential::from_wells(vec![
        Well { center: vec![0.0], b: 1.0, profile: RadialProfile::Square { depth: 1.5, radius: 0.4 } },
        Well { center: vec![0.75], b: 0.5, profile: RadialProfile::Square { depth: 2.0, radius: 0.25 } },
    ])
}

fn line(xs: &[f64]) -> Vec<Point> {
    xs.iter().map(|&x| [x, 0.0, 0.0]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn field_is_additive_over_disjoint_configurations(
        a in prop::collection::vec(-4.9f64..4.9, 0..10),
        b in prop::collection::vec(-4.9f64..4.9, 0..10),
    ) {
        let grid = GridSpec::dirichlet(Cube::centered(1, 10.0).unwrap(), 0.125).unwrap();
        let v = wells();
        let union: Vec<f64> = a.iter().chain(&b).copied().collect();
        let fa = assemble_field(&v, &line(&a), &grid, None).unwrap();
        let fb = assemble_field(&v, &line(&b), &grid, None).unwrap();
        let fu = assemble_field(&v, &line(&union), &grid, None).unwrap();
        for i in 0..fu.values.len() {
            prop_assert_eq!(fu.values[i], fa.values[i] + fb.values[i]);
        }
    }

    #[test]
    fn lattice_translation_shifts_periodic_field(
        xs in prop::collection::vec(-3.9f64..3.9, 0..8),
        m in 0usize..64,
    ) {
        let h = 0.125;
        let grid = GridSpec::periodic(Cube::torus(1, 8.0).unwrap(), h).unwrap();
        let v = wells();
        let torus = Cube::torus(1, 8.0).unwrap();
        let moved: Vec<Point> = line(&xs).iter().map(|p| torus.wrap(&[p[0] + m as f64 * h, 0.0, 0.0])).collect();
        let f0 = assemble_field(&v, &line(&xs), &grid, None).unwrap();
        let f1 = assemble_field(&v, &moved, &grid, None).unwrap();
        let n = f0.values.len();
        // a node within rounding of a well edge may flip under the shift
        let on_edge = (0..n).any(|k| {
            let node = grid.node_position(k);
            xs.iter().any(|x| {
                [(0.0, 0.4), (0.75, 0.25)]
                    .iter()
                    .any(|(c, r)| (torus.torus_dist(&node, &[x + c, 0.0, 0.0]) - r).abs() < 1e-9)
            })
        });
        for k in 0..n {
            let d = (f1.values[(k + m) % n] - f0.values[k]).abs();
            prop_assert!(on_edge || d < 1e-12, "node {}: {}", k, d);
        }
    }

    #[test]
    fn regularized_delta_keeps_its_mass(hk in 2usize..9, c in 0.1f64..5.0, x in -1.0f64..1.0) {
        let h = 1.0 / (1u32 << hk) as f64;
        let grid = GridSpec::dirichlet(Cube::centered(1, 4.0).unwrap(), h).unwrap();
        let v = SingleSitePotential::single(RadialProfile::Delta { c });
        let f = assemble_field(&v, &line(&[x]), &grid, None).unwrap();
        let mass: f64 = f.values.iter().sum::<f64>() * h;
        prop_assert!((mass + c).abs() < 1e-12 * c.max(1.0), "{}", mass);
    }
}

#[test]
fn screened_coulomb_cutoff_bounds_the_truncation() {
    let v = SingleSitePotential::single(RadialProfile::ScreenedCoulomb {});
    let grid = GridSpec::dirichlet(Cube::centered(3, 4.0).unwrap(), 0.5).unwrap();
    let near = assemble_field(&v, &[[0.1, 0.2, 0.3]], &grid, Some(5.0)).unwrap();
    let far = assemble_field(&v, &[[0.1, 0.2, 0.3]], &grid, Some(12.0)).unwrap();
    let worst = near.values.iter().zip(&far.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst <= near.truncation_bound, "{worst} > {}", near.truncation_bound);
    assert!(assemble_field(&v, &[[0.0; 3]], &grid, Some(1.0)).is_err());
}
