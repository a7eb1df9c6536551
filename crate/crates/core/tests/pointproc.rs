use lifshitz_core::geometry::{dist, Configuration, Cube, Point};
use lifshitz_core::pointproc::{
    conditional_energy, local_energy, periodic_energy, total_energy, InteractionModel, PairPotential,
};
use proptest::prelude::*;

fn models() -> Vec<InteractionModel> {
    vec![
        InteractionModel::strauss(1.0, 1.0, 2.0).unwrap(),
        InteractionModel::strauss(0.25, 0.5, 0.5).unwrap(),
        InteractionModel::pairwise(
            PairPotential::RadialTable { radii: vec![0.3, 0.8], values: vec![2.0, 0.5], support: 0.8 },
            3.0,
        )
        .unwrap(),
        InteractionModel::area(1.0, 1.5).unwrap(),
        InteractionModel::poisson(2.0).unwrap(),
    ]
}

fn pts() -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec(prop::array::uniform3(-0.5f64..0.5), 0..25)
}

/// Points of `p` scaled by `s`, with coordinates beyond `dim` cleared.
fn scaled(p: &[Point], s: f64, dim: usize) -> Vec<Point> {
    p.iter()
        .map(|q| {
            let mut m = [0.0; 3];
            for k in 0..dim {
                m[k] = q[k] * s;
            }
            m
        })
        .collect()
}

/// `½ Σ φ(|x−y|) − #ω log z` over all pairs, without local energies.
fn pair_sum(points: &[Point], phi: &PairPotential, z: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            s += phi.eval(dist(&points[i], &points[j]));
        }
    }
    s - points.len() as f64 * z.ln()
}

#[test]
fn boxes_are_half_open() {
    let c = Cube::centered(1, 2.0).unwrap();
    assert!(c.contains(&[1.0, 0.0, 0.0]));
    assert!(!c.contains(&[-1.0, 0.0, 0.0]));
    let left = Cube::new(1, 1.0, [-0.5, 0.0, 0.0]).unwrap();
    let right = Cube::new(1, 1.0, [0.5, 0.0, 0.0]).unwrap();
    for x in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let p = [x, 0.0, 0.0];
        assert_eq!(left.contains(&p) as u8 + right.contains(&p) as u8, c.contains(&p) as u8, "x={x}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn periodic_energy_is_stable(dim in 1usize..=2, side in 2.5f64..8.0, raw in pts(), which in 0usize..5) {
        let model = &models()[which];
        let torus = Cube::torus(dim, side).unwrap();
        let p = scaled(&raw, side * 0.999, dim);
        let omega = Configuration::new(torus, p.clone()).unwrap();
        let u = periodic_energy(&omega, model).unwrap();
        prop_assert!(u >= model.stability_constant(dim) * p.len() as f64);
    }

    #[test]
    fn periodic_energy_is_translation_invariant(
        dim in 1usize..=2, raw in pts(), shift in prop::array::uniform3(-10.0f64..10.0), which in 0usize..4,
    ) {
        let side = 4.0;
        let model = &models()[which];
        let torus = Cube::torus(dim, side).unwrap();
        let p = scaled(&raw, side * 0.999, dim);
        let moved: Vec<Point> = p
            .iter()
            .map(|q| {
                let mut m = *q;
                for k in 0..dim {
                    m[k] += shift[k];
                }
                torus.wrap(&m)
            })
            .collect();
        // a pair within rounding of a step of φ may flip under the shift
        let on_step = p.iter().enumerate().any(|(i, x)| {
            p[i + 1..].iter().any(|y| {
                let d = torus.torus_dist(x, y);
                [0.3, 0.5, 0.8, 1.0].iter().any(|r| (d - r).abs() < 1e-9)
            })
        });
        let a = periodic_energy(&Configuration::new(torus, p).unwrap(), model).unwrap();
        let b = periodic_energy(&Configuration::new(torus, moved).unwrap(), model).unwrap();
        prop_assert!(on_step || (a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{} vs {}", a, b);
    }

    #[test]
    fn conditional_energy_is_local(dim in 1usize..=2, inner in pts(), outer in pts(), which in 0usize..4) {
        let model = &models()[which];
        let region = Cube::centered(dim, 2.0).unwrap();
        let omega = Configuration::new(region, scaled(&inner, 1.999, dim)).unwrap();
        let far = Cube::centered(dim, 8.0).unwrap();
        let gamma = Configuration::new(far, scaled(&outer, 7.99, dim)).unwrap();
        let reach = region.concentric(2.0 + 2.0 * model.range()).unwrap();
        let near: Vec<Point> = gamma
            .points
            .iter()
            .filter(|p| !region.contains(p) && region.distance_to(p) <= model.range())
            .copied()
            .collect();
        let gamma_near = Configuration::new(far, near).unwrap();
        let full = conditional_energy(&omega, &gamma, &region, model).unwrap();
        let local = conditional_energy(&omega, &gamma_near, &region, model).unwrap();
        prop_assert_eq!(full, local);
        prop_assert!(reach.volume() > 0.0);
    }

    #[test]
    fn conditional_energy_matches_pair_sum(dim in 1usize..=2, inner in pts(), outer in pts(), which in 0usize..3) {
        let model = &models()[which];
        let (phi, z) = match &model.law {
            lifshitz_core::pointproc::Interaction::Pairwise { phi, z } => (phi.clone(), *z),
            _ => unreachable!(),
        };
        let region = Cube::centered(dim, 2.0).unwrap();
        let omega = Configuration::new(region, scaled(&inner, 1.999, dim)).unwrap();
        let far = Cube::centered(dim, 4.0).unwrap();
        let gamma: Vec<Point> = scaled(&outer, 3.99, dim).into_iter().filter(|p| !region.contains(p)).collect();
        let gamma = Configuration::new(far, gamma).unwrap();
        let got = conditional_energy(&omega, &gamma, &region, model).unwrap();
        let mut direct = pair_sum(&omega.points, &phi, z);
        for x in &omega.points {
            for y in &gamma.points {
                direct += phi.eval(dist(x, y));
            }
        }
        prop_assert!((got - direct).abs() <= 1e-12 * (1.0 + direct.abs()), "{} vs {}", got, direct);
    }

    #[test]
    fn total_energy_telescopes(dim in 1usize..=2, raw in pts(), which in 0usize..5) {
        let model = &models()[which];
        let region = Cube::centered(dim, 3.0).unwrap();
        let p = scaled(&raw, 2.999, dim);
        let mut acc = 0.0;
        for k in 0..p.len() {
            let before = Configuration::new(region, p[..k].to_vec()).unwrap();
            acc += local_energy(&p[k], &before, model);
        }
        let u = total_energy(&Configuration::new(region, p).unwrap(), model);
        prop_assert!((acc - u).abs() <= 1e-9 * (1.0 + u.abs()), "{} vs {}", acc, u);
    }
}
