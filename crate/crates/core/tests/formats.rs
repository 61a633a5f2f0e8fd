use paal::datagen::{generate_cohort, load_dataset_csv, write_dataset_csv, CohortSpec};
use paal::harness::{read_curves, run_experiment, summarize, write_outputs, DataSource, ExperimentConfig};
use paal::model::ModelConfig;
use paal::pool::{Dataset, Sample};

#[test]
fn full_size_pool_loads() {
    // synthetic rows at the size of the full OCT train+unlabeled pool
    let n = 54_589;
    let samples = (0..n)
        .map(|id| Sample {
            id,
            patient_id: (id % 1852) as u64,
            features: vec![id as f64 * 1e-3, -(id as f64).sqrt(), 1.0 / (1.0 + id as f64)],
            label: id % 3,
        })
        .collect();
    let ds = Dataset::new(samples, 3, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.csv");
    write_dataset_csv(&ds, &path).unwrap();
    let back = load_dataset_csv(&path, Some(3)).unwrap();
    assert_eq!(back.len(), 54_589);
    assert_eq!(back, ds);
}

#[test]
fn cohort_csv_round_trip() {
    let cohort = generate_cohort(&CohortSpec { seed: 21, ..Default::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (name, ds) in [("train.csv", &cohort.train), ("test.csv", &cohort.test)] {
        let path = dir.path().join(name);
        write_dataset_csv(ds, &path).unwrap();
        assert_eq!(&load_dataset_csv(&path, None).unwrap(), ds);
    }
}

#[test]
fn curves_read_back_into_the_same_summary() {
    let cfg = ExperimentConfig {
        data: DataSource::Generated(CohortSpec { num_patients: 24, seed: 2, ..Default::default() }),
        initial_budget: 5,
        per_round_k: 3,
        num_rounds: 4,
        seeds: vec![9, 3, 7, 1, 5],
        model: ModelConfig { learning_rate: 0.02, max_epochs: 25, ..Default::default() },
        ..Default::default()
    };
    let (train, test) = cfg.load_data().unwrap();
    let result = run_experiment(&cfg, &train, &test).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(dir.path(), &result, &train).unwrap();

    let curves = read_curves(dir.path()).unwrap();
    assert_eq!(curves.iter().map(|c| c.0).collect::<Vec<_>>(), vec![1, 3, 5, 7, 9]);
    let from_disk = summarize(&curves.into_iter().map(|c| c.1).collect::<Vec<_>>()).unwrap();
    assert_eq!(from_disk.to_csv(), result.summary().unwrap().to_csv());
    assert_eq!(std::fs::read_to_string(dir.path().join("summary.csv")).unwrap(), from_disk.to_csv());
}

#[test]
fn summary_matches_independent_statistics() {
    use paal::harness::CurvePoint;
    use rand::Rng;
    let mut rng = paal::rng::seeded(77);
    let curves: Vec<Vec<CurvePoint>> = (0..5)
        .map(|_| {
            (0..6)
                .map(|round| CurvePoint { round, labeled_count: 24 + 24 * round, test_accuracy: rng.random() })
                .collect()
        })
        .collect();
    let summary = summarize(&curves).unwrap();
    for (r, row) in summary.rows.iter().enumerate() {
        // one-pass sum-of-squares form, independent of the two-pass implementation
        let xs: Vec<f64> = curves.iter().map(|c| c[r].test_accuracy).collect();
        let n = xs.len() as f64;
        let sum_sq: f64 = xs.iter().map(|x| x * x).sum();
        let sum: f64 = xs.iter().sum();
        let mean = sum / n;
        let var = (sum_sq - n * mean * mean) / (n - 1.0);
        let se = (var / n).sqrt();
        assert!((row.mean_accuracy - mean).abs() < 1e-12);
        assert!((row.standard_error - se).abs() < 1e-12);
        assert_eq!(row.labeled_count, 24 + 24 * r);
    }
}

#[test]
fn full_scale_budget_reaches_3000_at_round_23() {
    let cfg = ExperimentConfig { initial_budget: 128, per_round_k: 128, num_rounds: 23, ..Default::default() };
    assert_eq!(cfg.final_labeled_count(), 3072);
    let first_over = (0..).find(|&r| 128 + 128 * r >= 3000).unwrap();
    assert_eq!(first_over, 23);
    assert!(ExperimentConfig { num_rounds: 22, ..cfg }.final_labeled_count() < 3000);
}
