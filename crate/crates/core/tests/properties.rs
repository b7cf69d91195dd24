use proptest::prelude::*;

use hardy_core::exterior::robin_exterior_constant;
use hardy_core::functional::{dirichlet_energy_p, functional_q, weighted_norm_pp};
use hardy_core::mesh::{build_interval_mesh, build_polygon_mesh};
use hardy_core::oracles::{lemma1_sides, theorem2_bound, Profile1D};
use hardy_core::{
    cp_constant, weight_at, BoundaryPartition, Condition, Discretization, Domain, Field, HardyWeight, Mesh,
};

fn hexagon() -> Domain {
    let v = (0..6)
        .map(|k| {
            let t = std::f64::consts::PI * k as f64 / 3.0;
            [2.0 * t.cos(), t.sin()]
        })
        .collect();
    Domain::polygon(v).unwrap()
}

fn inside(d: &Domain, x: [f64; 2]) -> bool {
    d.distance_to_boundary(&x).map(|r| r > 0.0).unwrap_or(false)
}

fn square_setup(p: f64) -> (Discretization, HardyWeight) {
    let sq = Domain::unit_square();
    let robin = Condition::Robin { sigma: 2.0 };
    let part = BoundaryPartition::new(&sq, vec![Condition::Dirichlet, robin, robin, robin]).unwrap();
    let mesh = Mesh::Triangles(build_polygon_mesh(&sq, 0.25, &[], 0.0).unwrap());
    let disc = Discretization::new(&sq, &mesh, &part, p).unwrap();
    let w = HardyWeight::build(&sq, &part, p, &disc.quad_positions()).unwrap();
    (disc, w)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn distance_is_one_lipschitz(ax in -2.0..2.0f64, ay in -1.0..1.0f64, bx in -2.0..2.0f64, by in -1.0..1.0f64) {
        let d = hexagon();
        prop_assume!(inside(&d, [ax, ay]) && inside(&d, [bx, by]));
        let da = d.distance_to_boundary(&[ax, ay]).unwrap();
        let db = d.distance_to_boundary(&[bx, by]).unwrap();
        prop_assert!((da - db).abs() <= (ax - bx).hypot(ay - by) + 1e-14);
    }

    #[test]
    fn distance_matches_projection(x in 0.001..0.999f64, y in 0.001..0.999f64) {
        let d = Domain::unit_square();
        let pr = d.boundary_projection(&[x, y]).unwrap();
        let dist = d.distance_to_boundary(&[x, y]).unwrap();
        prop_assert!((dist - (pr.point[0] - x).hypot(pr.point[1] - y)).abs() <= 1e-14);
        prop_assert!((dist - x.min(y).min(1.0 - x).min(1.0 - y)).abs() <= 1e-15);
    }

    #[test]
    fn weight_is_monotone_in_sigma(x in 0.01..0.99f64, s in 0.0..50.0f64, ds in 0.0..50.0f64, p in 1.1..6.0f64) {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let lo = BoundaryPartition::all_robin(&d, s).unwrap();
        let hi = BoundaryPartition::all_robin(&d, s + ds).unwrap();
        prop_assert!(weight_at(&d, &hi, p, &[x]).unwrap() >= weight_at(&d, &lo, p, &[x]).unwrap());
        let dir = BoundaryPartition::all_dirichlet(&d);
        prop_assert!(weight_at(&d, &dir, p, &[x]).unwrap() >= weight_at(&d, &hi, p, &[x]).unwrap());
    }

    #[test]
    fn cp_is_in_unit_interval_and_increasing(p in 1.01..9.0f64, dp in 0.01..1.0f64) {
        let c = cp_constant(p).unwrap();
        prop_assert!(c > 0.0 && c < 1.0);
        prop_assert!(cp_constant(p + dp).unwrap() > c);
    }

    #[test]
    fn theorem2_exceeds_cp(p in 1.1..6.0f64, r in 0.05..5.0f64, s in 1e-3..1e4f64) {
        prop_assert!(theorem2_bound(p, r, s).unwrap() >= cp_constant(p).unwrap());
    }

    #[test]
    fn robin_exterior_constant_is_monotone(
        p in 2.1..6.0f64,
        s in 1e-3..10.0f64,
        ds in 0.0..10.0f64,
        r in 0.1..5.0f64,
        dr in 0.0..5.0f64,
    ) {
        let c = robin_exterior_constant(2, p, s, r).unwrap();
        prop_assert!(robin_exterior_constant(2, p, s + ds, r).unwrap() >= c);
        prop_assert!(robin_exterior_constant(2, p, s, r + dr).unwrap() >= c);
    }

    #[test]
    fn lemma1_holds_on_random_profiles(
        steps in prop::collection::vec(0.01..0.5f64, 1..19),
        values in prop::collection::vec(-1.0..1.0f64, 20),
        s in 0.0..10.0f64,
        p in prop::sample::select(vec![1.5, 2.0, 3.0]),
    ) {
        let mut b = vec![0.0];
        for h in &steps {
            b.push(b[b.len() - 1] + h);
        }
        let v = values[..b.len()].to_vec();
        let (lhs, rhs) = lemma1_sides(&Profile1D::new(b, v).unwrap(), s, p).unwrap();
        prop_assert!(lhs >= rhs - 1e-9 * lhs.max(1.0), "{lhs} < {rhs}");
    }

    #[test]
    fn quotient_is_p_homogeneous(
        values in prop::collection::vec(-1.0..1.0f64, 25),
        c in prop::sample::select(vec![-3.0, -0.5, 0.1, 2.0, 7.0]),
        p in prop::sample::select(vec![1.5, 2.0, 3.0]),
    ) {
        let (disc, w) = square_setup(p);
        let vals = (0..disc.num_nodes()).map(|i| values[i % values.len()]).collect();
        let u = Field::new(&disc, vals).unwrap();
        prop_assume!(u.max_abs() > 1e-3);
        let cu = u.scaled(c);
        let k = c.abs().powf(p);
        let q = functional_q(&disc, &u, p).unwrap();
        let n = weighted_norm_pp(&disc, &u, &w, p).unwrap();
        prop_assert!((functional_q(&disc, &cu, p).unwrap() - k * q).abs() <= 1e-12 * k * q.max(1.0));
        prop_assert!((weighted_norm_pp(&disc, &cu, &w, p).unwrap() - k * n).abs() <= 1e-12 * k * n.max(1.0));
    }
}

#[test]
fn refinement_error_is_second_order() {
    // nodal interpolant of x^2: int (u_h')^2 = 4/3 - h^2/3 on a uniform mesh
    let d = Domain::interval(0.0, 1.0).unwrap();
    let part = BoundaryPartition::all_robin(&d, 1.0).unwrap();
    let errs: Vec<f64> = [10, 20, 40, 80]
        .iter()
        .map(|&n| {
            let mesh = Mesh::Interval(build_interval_mesh(&d, n, 1.0, &[]).unwrap());
            let disc = Discretization::new(&d, &mesh, &part, 2.0).unwrap();
            let u = Field::from_fn(&disc, |x| x[0] * x[0]).unwrap();
            (dirichlet_energy_p(&disc, &u, 2.0).unwrap() - 4.0 / 3.0).abs()
        })
        .collect();
    for w in errs.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!((rate - 2.0).abs() < 0.05, "{errs:?}");
    }
}

#[test]
fn singular_set_has_measure_zero() {
    use rand::{Rng, SeedableRng};
    let d = hexagon();
    let mut rng = rand::rngs::StdRng::seed_from_u64(5);
    let mut ties = 0;
    let mut drawn = 0;
    while drawn < 100_000 {
        let x = [rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0)];
        if !inside(&d, x) {
            continue;
        }
        drawn += 1;
        if d.nearest_count(&x, 1e-9).unwrap() > 1 {
            ties += 1;
        }
    }
    assert_eq!(ties, 0);
}
