use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rnml_core::criteria::Criterion;
use rnml_core::harness::{
    benefit, generate_gmm_data, generate_true_model, generate_true_model_with, run_sweep, run_theta_sweep, SweepConfig,
    TrueModel, COVARIANCE_EIGEN_RANGE,
};
use rnml_core::Error;

#[test]
fn means_are_separated() {
    for seed in 0..50 {
        for m in [1, 2, 5] {
            let model = generate_true_model(m, 3, 6.0, seed).unwrap();
            for i in 0..3 {
                for j in 0..i {
                    let d = (&model.means[i] - &model.means[j]).norm();
                    assert!(d >= 6.0 * 2f64.sqrt(), "seed {seed}, m={m}: distance {d}");
                }
            }
            for cov in &model.covariances {
                let eig = cov.clone().symmetric_eigen().eigenvalues;
                let (lo, hi) = COVARIANCE_EIGEN_RANGE;
                assert!(eig.iter().all(|&e| e >= lo - 1e-9 && e <= hi + 1e-9));
            }
        }
    }
}

#[test]
fn one_component_and_determinism() {
    let model = generate_true_model(3, 1, 6.0, 4).unwrap();
    assert_eq!(model.k(), 1);
    assert_eq!(model.weights, vec![1.0]);
    assert_eq!(generate_true_model(3, 2, 6.0, 4).unwrap(), generate_true_model(3, 2, 6.0, 4).unwrap());
}

#[test]
fn impossible_packing_is_a_config_error() {
    assert!(matches!(generate_true_model_with(1, 5, 6.0, Some(1.0), 0), Err(Error::Config(_))));
}

#[test]
fn sample_mean_converges() {
    let mean = DVector::from_vec(vec![3.0, -1.0]);
    let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    let model = TrueModel::new(vec![1.0], vec![mean.clone()], vec![cov.clone()]).unwrap();
    let n = 10_000;
    let (data, z) = generate_gmm_data(&model, n, 99).unwrap();
    assert!(z.iter().all(|&l| l == 1));
    for j in 0..2 {
        let avg = data.column(j).sum() / n as f64;
        let se = (cov[(j, j)] / n as f64).sqrt();
        assert!((avg - mean[j]).abs() < 5.0 * se, "coordinate {j}: {avg}");
    }
}

#[test]
fn sampling_is_seeded() {
    let model = generate_true_model(2, 3, 6.0, 1).unwrap();
    assert_eq!(generate_gmm_data(&model, 50, 2).unwrap(), generate_gmm_data(&model, 50, 2).unwrap());
    assert!(matches!(generate_gmm_data(&model, 0, 2), Err(Error::Input(_))));
}

fn tiny_config(seed: u64) -> SweepConfig {
    SweepConfig::from_toml_str(&format!(
        "master_seed = {seed}\nm_list = [2]\nk_true_list = [2]\nn_list = [60, 120]\ntrials = 3\nrestarts = 3\n\
         theta_list = [100.0, 1e6]"
    ))
    .unwrap()
}

#[test]
fn degenerate_sweep() {
    let config = SweepConfig::from_toml_str(
        "master_seed = 3\nm_list = [1]\nk_true_list = [2]\nn_list = [200]\ntrials = 1\nrestarts = 2\n\
         k_min = 2\nk_max = 2\ntheta_list = []",
    )
    .unwrap();
    let tables = run_sweep(&config).unwrap();
    assert_eq!(tables.accuracy.len(), Criterion::ALL.len());
    for row in &tables.accuracy {
        assert_eq!(row.accuracy, 1.0);
        assert_eq!(row.mean_benefit, 1.0);
    }
    assert!(tables.theta.is_empty());
}

#[test]
fn sweep_is_reproducible() {
    let a = run_sweep(&tiny_config(17)).unwrap();
    let b = run_sweep(&tiny_config(17)).unwrap();
    assert_eq!(a.accuracy_csv(), b.accuracy_csv());
    assert_eq!(a.least_n_csv(), b.least_n_csv());
    assert_eq!(a.theta_csv(), b.theta_csv());
    let theta = run_theta_sweep(&tiny_config(17)).unwrap();
    assert_eq!(theta.theta_csv(), a.theta_csv());
    for row in &a.accuracy {
        assert!((0.0..=1.0).contains(&row.mean_benefit));
    }
    assert!(a.least_n_csv().lines().skip(1).all(|l| l.ends_with("never") || l.split(',').last().unwrap().parse::<usize>().is_ok()));
}

#[test]
fn sweep_ignores_thread_count() {
    let config = tiny_config(5);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = one.install(|| run_sweep(&config)).unwrap();
    let b = three.install(|| run_sweep(&config)).unwrap();
    assert_eq!(a.accuracy_csv(), b.accuracy_csv());
    assert_eq!(a.theta_csv(), b.theta_csv());
}

#[test]
fn config_round_trips_through_toml() {
    let config = tiny_config(8);
    let back = SweepConfig::from_toml_str(&config.to_toml_string()).unwrap();
    assert_eq!(back.to_toml_string(), config.to_toml_string());
    assert!(matches!(SweepConfig::from_toml_str("master_seed = 1\nbogus = 2"), Err(Error::Parse(_))));
    assert!(matches!(SweepConfig::from_toml_str("master_seed = 1\ntrials = 0"), Err(Error::Config(_))));
}

proptest! {
    #[test]
    fn benefit_is_bounded(k_star in 1usize..20, k_true in 1usize..20, t in 0.5f64..10.0) {
        let b = benefit(k_star, k_true, t);
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert_eq!(b == 1.0, k_star == k_true);
        prop_assert_eq!(b, benefit(k_true, k_star, t));
    }
}
