use graphcollide::cftp::{estimate_moment, expected_sample_probability, SampleMode};
use graphcollide::graph::{self, GraphSpec};
use graphcollide::moments::{solve_moment_ode, solve_stationary_recurrence, solve_stationary_recurrence_exact};
use graphcollide::partition::{enumerate_partitions, multinomial};
use graphcollide::{MomentValue, PartitionVector, SimplexPoint};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn small_graphs() -> Vec<GraphSpec> {
    vec![
        graph::path(3).unwrap(),
        graph::star(3).unwrap(),
        graph::cycle(5).unwrap(),
        graph::complete_bipartite(2, 2).unwrap(),
        graph::complete(4).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sample_probabilities_sum_to_one(which in 0usize..5, num in 1i64..9, den in 1i64..9, n in 1u32..5) {
        let g = &small_graphs()[which];
        let alpha = BigRational::new(num.into(), den.into());
        let table = solve_stationary_recurrence_exact(g, &alpha, n).unwrap();
        let mut total = BigRational::zero();
        for a in enumerate_partitions(n, g.vertex_count(), false).unwrap() {
            let m = table.get(&a).unwrap().as_exact().unwrap().clone();
            total += BigRational::from_integer(BigInt::from(multinomial(&a))) * m;
        }
        prop_assert_eq!(total, BigRational::one());
    }

    #[test]
    fn simulation_matches_recurrence(which in 0usize..5, alpha in 0.3f64..3.0, seed in 0u64..1000, pick in 0usize..1000) {
        let g = &small_graphs()[which];
        let states = enumerate_partitions(3, g.vertex_count(), false).unwrap();
        let a = &states[pick % states.len()];
        let exact = solve_stationary_recurrence(g, alpha, 3).unwrap().value(a).unwrap();
        let est = estimate_moment(g, a, alpha, 40_000, seed).unwrap();
        prop_assert!((est.mean - exact).abs() < 5.0 * est.std_error + 1e-12, "{} vs {exact}", est.mean);
    }
}

#[test]
fn large_alpha_recovers_multinomial_limit() {
    // strong drift pins x at the barycentre
    for g in small_graphs() {
        let r = g.vertex_count();
        let table = solve_stationary_recurrence(&g, 1e7, 3).unwrap();
        for (a, v) in table.entries() {
            let limit = (r as f64).powi(-(a.order() as i32));
            assert!((v.to_f64() / limit - 1.0).abs() < 1e-5, "{} {a}", g.label());
        }
    }
}

#[test]
fn time_dependent_moments_at_zero_are_monomials() {
    let g = graph::petersen().unwrap();
    let x = SimplexPoint::normalized((1..=10).map(f64::from).collect()).unwrap();
    let table = &solve_moment_ode(&g, &x, 2, &[0.0]).unwrap()[0];
    for (a, v) in table.entries() {
        let mono: f64 = a.counts().iter().enumerate().map(|(i, &k)| x[i].powi(k as i32)).product();
        assert!((v.to_f64() - mono).abs() < 1e-14);
    }
}

#[test]
fn exact_and_float_sample_probabilities_agree() {
    let g = graph::cycle(6).unwrap();
    let a = PartitionVector::new(vec![1, 0, 2, 0, 1, 0]);
    let alpha = BigRational::new(3.into(), 4.into());
    let exact = expected_sample_probability(&g, &a, &alpha, SampleMode::Exact).unwrap();
    let MomentValue::Exact(p) = &exact.value else {
        panic!("exact mode returned a float");
    };
    let float = solve_stationary_recurrence(&g, 0.75, 4).unwrap().value(&a).unwrap() * 12.0;
    let p: f64 = num_traits::ToPrimitive::to_f64(p).unwrap();
    assert!((p - float).abs() < 1e-14);
    let mc = expected_sample_probability(&g, &a, &alpha, SampleMode::MonteCarlo { samples: 100_000, seed: 5 }).unwrap();
    assert!((mc.value.to_f64() - p).abs() < 4.0 * mc.std_error.unwrap());
}
