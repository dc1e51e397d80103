use rank1_spectra::moments::{limiting_even_moments, moment_table, FiniteInputs};
use rank1_spectra::radius::{build_pencil, pencil_moments, sdp_lower_bound, DEFAULT_TOL};
use rank1_spectra::sigma::{limiting_averages, parse_sigma_spec, sigma_stats, sigma_values};
use rank1_spectra::validation::{formula_simulation_gaps, run_validation, ValidationOptions};
use rank1_spectra::Error;

#[test]
fn constant_profile_recovers_semicircle_edge() {
    let spec = parse_sigma_spec("const:1").unwrap();
    let lambdas = limiting_averages(&spec, 40, 1e-12).unwrap().values;
    let mut last = 0.0;
    for s_bar in [2, 6, 10, 14] {
        let pencil = build_pencil(&pencil_moments(&lambdas, s_bar).unwrap(), s_bar).unwrap();
        let sol = sdp_lower_bound(&pencil, DEFAULT_TOL).unwrap();
        assert!(sol.sqrt_beta > last && sol.sqrt_beta < 2.0);
        last = sol.sqrt_beta;
    }
    assert!(last > 1.95, "{last}");
}

#[test]
fn expression_profile_through_table() {
    let spec = parse_sigma_spec("expr:exp(-4*i/n)").unwrap();
    let lambdas = limiting_averages(&spec, 10, 1e-12).unwrap().values;
    let values = sigma_values(&spec, 400).unwrap();
    let stats = sigma_stats(&values, 10).unwrap();
    assert!((stats.normalized_sums()[0] - lambdas[0]).abs() < 5e-3);
    let rows = moment_table(&lambdas, 5, Some(FiniteInputs { values: &values, k: stats.sigma_max })).unwrap();
    let limits = limiting_even_moments(&lambdas, 5).unwrap();
    for (row, m) in rows.iter().zip(&limits) {
        assert_eq!(row.limit, *m);
        let lower = row.lower.unwrap();
        assert!(lower.value <= row.limit * 1.01);
        assert!(row.upper.unwrap().value >= row.limit);
    }
}

#[test]
fn explicit_vector_has_no_limit() {
    let spec = parse_sigma_spec("const:2").unwrap();
    assert!(limiting_averages(&spec, 3, 1e-12).unwrap().all_converged());
    let dir = std::env::temp_dir().join("rank1-spectra-pipeline-test.txt");
    std::fs::write(&dir, "1.0\n0.5\n0.25\n").unwrap();
    let explicit = parse_sigma_spec(&format!("file:{}", dir.display())).unwrap();
    assert!(matches!(limiting_averages(&explicit, 3, 1e-12), Err(Error::NoLimit)));
    let _ = std::fs::remove_file(dir);
}

#[test]
fn fast_validation_passes() {
    let options = ValidationOptions {
        walk_trials: 5_000,
        ..ValidationOptions::default()
    };
    let report = run_validation(&options).unwrap();
    assert!(report.passed(), "{report}");
    assert_eq!(report.checks.len(), 7);
}

#[test]
fn formula_gap_rows_are_finite() {
    let spec = parse_sigma_spec("expr:exp(-4*i/n)").unwrap();
    let gaps = formula_simulation_gaps(&spec, 60, 30, 4, 5).unwrap();
    assert_eq!(gaps.iter().map(|g| g.order).collect::<Vec<_>>(), vec![4, 6, 8]);
    assert!(gaps.iter().all(|g| g.stderr > 0.0 && g.gap_in_stderr().is_finite()));
}
