mod common;

use common::{brute_force_n, mean_sd};
use proptest::prelude::*;
use qprobe::measure::{
    cumulative_measure, delta_d, delta_n, positive_variation, reference_rate, Increment,
    TRUE_RATE_FACTOR,
};
use qprobe::{estimate_true_n, nonmarkovianity, DistanceSeries, ModelParams, Simulator, TimeGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn series(values: &[f64]) -> DistanceSeries {
    let grid = TimeGrid::uniform(1.0, values.len()).unwrap();
    DistanceSeries::noiseless(grid, values.to_vec()).unwrap()
}

fn n_of(values: &[f64]) -> f64 {
    nonmarkovianity(&series(values), 1.0).unwrap().value
}

fn distances() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, 2..200)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn refinement_never_lowers_the_measure(values in distances(), stride in 2usize..6) {
        let coarse: Vec<f64> = values.iter().copied().step_by(stride).collect();
        prop_assume!(coarse.len() >= 2);
        let fine = positive_variation(&values[..(coarse.len() - 1) * stride + 1]);
        prop_assert!(fine >= positive_variation(&coarse));
    }

    #[test]
    fn measure_equals_brute_force_scan(values in distances()) {
        let result = nonmarkovianity(&series(&values), 1.0).unwrap();
        prop_assert_eq!(result.value, brute_force_n(&values));
        let total_variation: f64 = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        prop_assert!(result.value >= 0.0 && result.value <= total_variation);
    }
}

proptest! {
    #[test]
    fn zero_exactly_when_non_increasing(values in distances(), sort in any::<bool>()) {
        let mut values = values;
        if sort {
            values.sort_by(|a, b| b.partial_cmp(a).unwrap());
        }
        let non_increasing = values.windows(2).all(|w| w[1] <= w[0]);
        prop_assert_eq!(n_of(&values) == 0.0, non_increasing);
    }

    #[test]
    fn scaling_the_distance_scales_the_measure(values in distances(), c in 0.01..10.0f64) {
        let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
        let (a, b) = (n_of(&values) * c, n_of(&scaled));
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn non_increasing_tail_changes_nothing(values in distances(), drops in prop::collection::vec(0.0..0.1f64, 1..20)) {
        let mut extended = values.clone();
        let mut last = *values.last().unwrap();
        for d in drops {
            last -= d;
            extended.push(last);
        }
        prop_assert_eq!(positive_variation(&extended), positive_variation(&values));
    }

    #[test]
    fn delta_n_grows_with_each_uncertainty(
        incs in prop::collection::vec((-0.5..0.5f64, 0.0..0.1f64, 0.0..0.1f64), 1..30),
        which in any::<prop::sample::Index>(),
        bump in 0.0..0.1f64,
    ) {
        let mut list: Vec<Increment> = incs
            .iter()
            .map(|&(change, a, b)| Increment { change, sigma_prev: a, sigma_curr: b })
            .collect();
        let before = delta_n(&list);
        let i = which.index(list.len());
        list[i].sigma_curr += bump;
        prop_assert!(delta_n(&list) >= before);
    }

    #[test]
    fn cumulative_measure_ends_at_total(values in distances()) {
        let cum = cumulative_measure(&values);
        prop_assert_eq!(cum.len(), values.len());
        prop_assert!(cum.windows(2).all(|w| w[1] >= w[0]));
        prop_assert_eq!(*cum.last().unwrap(), positive_variation(&values));
    }
}

#[test]
fn hand_series() {
    assert!((n_of(&[1.0, 0.6, 0.8, 0.3, 0.5]) - 0.4).abs() < 1e-15);
    assert_eq!(n_of(&[1.0, 0.9, 0.5, 0.5, 0.1]), 0.0);
    let single = [Increment { change: 0.2, sigma_prev: 0.01, sigma_curr: 0.01 }];
    assert!((delta_n(&single) - 0.014_142_135_623_730_95).abs() < 1e-15);
}

#[test]
fn dense_reference_matches_brute_force_and_refinement() {
    let p = ModelParams::reference();
    let t_max = 9.0 * p.tau();
    let gamma0 = reference_rate(&p);
    let sim = Simulator::new(&p).unwrap();
    let dense = sim
        .distance_series(&TimeGrid::with_rate(t_max, TRUE_RATE_FACTOR * gamma0).unwrap())
        .1;
    let est = estimate_true_n(&p, t_max, gamma0).unwrap();
    assert_eq!(est.n_true, brute_force_n(&dense.distance));
    assert_eq!(est.n_true, nonmarkovianity(&dense, t_max).unwrap().value);
    assert!(((est.n_refined - est.n_true) / est.n_true).abs() < 1e-3);
    assert!(est.convergence_ratio < 1e-3);
    assert!((est.gamma_used * p.tau() - 1500.0).abs() < 1e-6);
}

#[test]
fn propagated_delta_d_matches_monte_carlo() {
    let v1 = [0.31, -0.42, 0.55];
    let v2 = [-0.12, 0.27, -0.61];
    let s1 = [0.03, 0.02, 0.025];
    let s2 = [0.015, 0.035, 0.02];
    let predicted = delta_d(&v1, &v2, &s1, &s2).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let samples: Vec<f64> = (0..100_000)
        .map(|_| {
            let mut diff = [0.0; 3];
            for l in 0..3 {
                let a = v1[l] + s1[l] * std_normal.sample(&mut rng);
                let b = v2[l] + s2[l] * std_normal.sample(&mut rng);
                diff[l] = a - b;
            }
            0.5 * diff.iter().map(|x| x * x).sum::<f64>().sqrt()
        })
        .collect();
    let (_, sd) = mean_sd(&samples);
    assert!((sd - predicted).abs() / sd < 0.02, "{predicted} vs {sd}");
}
