use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rank1_spectra::combinatorics::{closed_form_count, enumerate_degree_profiles, tree_count, CountMode};
use rank1_spectra::ensemble::{
    eigenvalues, esd_histogram, run_trials, summarize_samples, Distribution, MonteCarloReport, Sampler,
};
use rank1_spectra::moments::{limiting_even_moment, limiting_even_moment_exact, rational_as_u64, unit_averages};
use rank1_spectra::numeric::Dd;
use rank1_spectra::radius::{
    build_pencil, pencil_moments, radius_lower_bound, radius_upper_bound, sdp_lower_bound, DEFAULT_SBAR,
    DEFAULT_TOL,
};
use rank1_spectra::sigma::{limiting_averages, sigma_values, SigmaSpec};
use rank1_spectra::validation::{check_catalan_partition, check_scaling, walk_oracle_comparisons};
use rank1_spectra::combinatorics::catalan;

const SEED: u64 = 20_240_611;

struct Outcome {
    passed: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Outcome {
        Outcome {
            passed: true,
            lines: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.lines.push(format!("{} {line}", if ok { "ok  " } else { "miss" }));
    }

    fn info(&mut self, line: String) {
        self.lines.push(format!("     {line}"));
    }
}

fn report(id: usize, title: &str, budget: Duration, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut outcome = run();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    outcome.passed &= in_time;
    println!(
        "criterion {id}: {} {title} ({:.1} s, budget {} s)",
        if outcome.passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    for line in &outcome.lines {
        println!("    {line}");
    }
    outcome.passed
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn exp_spec() -> SigmaSpec {
    SigmaSpec::expression("exp(-4*i/n)").unwrap()
}

fn exp_lambdas(k_max: usize) -> Vec<f64> {
    let lim = limiting_averages(&exp_spec(), k_max, 1e-13).unwrap();
    assert!(lim.all_converged());
    lim.values
}

fn exp_report(n: usize, trials: usize, seed: u64) -> MonteCarloReport {
    let values = sigma_values(&exp_spec(), n).unwrap();
    let sampler = Sampler::new(values, Distribution::Rademacher, 1.0).unwrap();
    summarize_samples(&run_trials(&sampler, seed, trials).unwrap(), 10)
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    let c = check_catalan_partition(8).unwrap();
    o.require(c.passed, c.to_string());
    let mut profiles = 0;
    let mut mismatch = None;
    for s in 1..=8 {
        for p in enumerate_degree_profiles(s).unwrap() {
            profiles += 1;
            let e = tree_count(&p, CountMode::Enumeration).unwrap();
            let f = closed_form_count(p.counts());
            if e != f && mismatch.is_none() {
                mismatch = Some(format!("{:?}: closed {f}, enum {e}", p.counts()));
            }
        }
    }
    o.require(
        mismatch.is_none(),
        match mismatch {
            None => format!("closed form = enumeration on all {profiles} profiles, s=1..8"),
            Some(m) => format!("closed form differs on {m}"),
        },
    );
    o
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    let expect = [1u64, 2, 5, 14, 42, 132, 429, 1430];
    let mut got = Vec::new();
    for s in 1..=8 {
        let m = limiting_even_moment_exact(&unit_averages(s), s).unwrap();
        got.push(rational_as_u64(&m));
    }
    let ok = got.iter().zip(expect).all(|(g, e)| *g == Some(e));
    o.require(ok, format!("exact m_2s = {got:?}"));
    let catalan_ok = (1..=8).all(|s| catalan(s).unwrap() == expect[s - 1].into());
    o.require(catalan_ok, "agrees with C_s".into());
    o
}

fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    let rows = walk_oracle_comparisons(&[2, 3, 4], &[2, 4, 6], 100_000, SEED).unwrap();
    for r in rows {
        o.require(
            r.z_score() <= 4.0,
            format!(
                "n={} k={}: exact {:.6}, mc {:.6} ± {:.1e} (|z| = {:.2})",
                r.n,
                r.k,
                r.exact,
                r.mean,
                r.stderr,
                r.z_score()
            ),
        );
    }
    let odd = walk_oracle_comparisons(&[2, 3, 4], &[1, 3, 5], 1, SEED).unwrap();
    o.require(
        odd.iter().all(|r| r.exact == 0.0),
        "odd k = 1, 3, 5 exactly zero".into(),
    );
    o
}

const REFERENCE_MEAN: [f64; 4] = [1.591e-2, 5.700e-3, 2.368e-3, 1.071e-3];

fn criterion_4(mc: &MonteCarloReport, lambdas: &[f64]) -> Outcome {
    let mut o = Outcome::new();
    for (i, &target) in REFERENCE_MEAN.iter().enumerate() {
        let s = i + 2;
        let emp = mc.moments[2 * s - 1];
        let se = emp.stderr.unwrap();
        let formula = limiting_even_moment(lambdas, s).unwrap();
        o.require(
            rel(emp.mean, target) <= 0.10,
            format!(
                "m{}: mean {:.4e} ± {:.1e} vs {target:.3e} ({:+.1}%)",
                2 * s,
                emp.mean,
                se,
                100.0 * (emp.mean / target - 1.0)
            ),
        );
        let gap = (emp.mean - formula).abs() / se;
        let flag = if gap > 3.0 { " [flag: formula-vs-simulation gap]" } else { "" };
        o.info(format!("m{}: formula {formula:.4e}, gap {gap:.1} stderr{flag}", 2 * s));
    }
    o
}

fn criterion_5(mc: &MonteCarloReport, lambdas: &[f64], n: usize) -> Outcome {
    let mut o = Outcome::new();
    let values = sigma_values(&exp_spec(), n).unwrap();
    let hi = values.iter().copied().fold(0.0, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let s = 30;
    let lower = radius_lower_bound(&values, s).unwrap();
    let m = limiting_even_moment(lambdas, s).unwrap();
    let upper = radius_upper_bound(n, s, hi, hi, lo, m).unwrap();
    let sdp = sdp_lower_bound(
        &build_pencil(&pencil_moments(lambdas, DEFAULT_SBAR).unwrap(), DEFAULT_SBAR).unwrap(),
        DEFAULT_TOL,
    )
    .unwrap();
    let emp = mc.radius.mean;
    for (name, got, target) in [
        ("empirical radius", emp, 0.7679),
        ("lower bound s=30", lower.value, 0.6913),
        ("upper bound s=30", upper.value, 0.7757),
        ("sdp sqrt(beta)", sdp.sqrt_beta, 0.7578),
    ] {
        o.require(
            rel(got, target) <= 0.05,
            format!("{name}: {got:.4} vs {target} ({:+.1}%)", 100.0 * (got / target - 1.0)),
        );
    }
    o.info(format!(
        "upper bound: ln theta = {:.1}, m_60 = {m:.4e}, m_60^(1/60) = {:.4}",
        upper.moment.ln_theta,
        m.powf(1.0 / 60.0)
    ));
    o.require(
        lower.value < emp && emp < upper.value,
        format!("ordering {:.4} < {emp:.4} < {:.4}", lower.value, upper.value),
    );
    o
}

fn random_moments(rng: &mut ChaCha8Rng, s_bar: usize) -> Vec<Dd> {
    let atoms = rng.random_range(s_bar + 1..=s_bar + 8);
    let support: Vec<(f64, f64)> = (0..atoms)
        .map(|_| (rng.random_range(0.05..2.0), rng.random_range(0.1..1.0)))
        .collect();
    let total: f64 = support.iter().map(|a| a.1).sum();
    (1..=2 * s_bar + 1)
        .map(|k| {
            support.iter().fold(Dd::ZERO, |acc, &(x, w)| {
                acc + Dd::from_f64(w / total) * Dd::from_f64(x).powi(k as u32)
            })
        })
        .collect()
}

fn criterion_6(lambdas: &[f64]) -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..50 {
        let s_bar = rng.random_range(1..=6);
        match build_pencil(&random_moments(&mut rng, s_bar), s_bar).and_then(|p| sdp_lower_bound(&p, DEFAULT_TOL)) {
            Ok(sol) => worst = worst.max(sol.method_agreement),
            Err(_) => failures += 1,
        }
    }
    o.require(
        failures == 0 && worst <= 10.0 * DEFAULT_TOL,
        format!("50 random sequences: max disagreement {worst:.2e}, {failures} solver errors"),
    );

    let mut catalan_nu = Vec::new();
    for s in 1..=2 * DEFAULT_SBAR + 1 {
        catalan_nu.push(Dd::from_biguint(&catalan(s).unwrap()));
    }
    let exp_pencil = build_pencil(&pencil_moments(lambdas, DEFAULT_SBAR).unwrap(), DEFAULT_SBAR).unwrap();
    for (name, pencil) in [
        ("semicircle", build_pencil(&catalan_nu, DEFAULT_SBAR).unwrap()),
        ("exp profile", exp_pencil.clone()),
    ] {
        let sol = sdp_lower_bound(&pencil, DEFAULT_TOL).unwrap();
        o.require(
            sol.method_agreement <= 10.0 * DEFAULT_TOL,
            format!("{name}: beta {:.12}, disagreement {:.2e}", sol.beta, sol.method_agreement),
        );
    }

    let mut betas = Vec::new();
    for s_bar in 1..=DEFAULT_SBAR {
        betas.push(sdp_lower_bound(&exp_pencil.truncate(s_bar).unwrap(), DEFAULT_TOL).unwrap().beta);
    }
    let monotone = betas.windows(2).all(|w| w[1] >= w[0] - DEFAULT_TOL);
    o.require(
        monotone,
        format!(
            "beta monotone in s_bar=1..14: {:.4} .. {:.4}",
            betas[0],
            betas[betas.len() - 1]
        ),
    );
    o
}

fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let c = check_scaling().unwrap();
    o.require(c.passed, c.to_string());

    let values = sigma_values(&exp_spec(), 60).unwrap();
    let sampler = Sampler::new(values, Distribution::Uniform, 3f64.sqrt()).unwrap();
    let a = run_trials(&sampler, SEED, 20).unwrap();
    let b = run_trials(&sampler, SEED, 20).unwrap();
    let identical = a.iter().zip(&b).all(|(x, y)| {
        x.seed_used == y.seed_used
            && x.eigenvalues
                .iter()
                .zip(&y.eigenvalues)
                .all(|(p, q)| p.to_bits() == q.to_bits())
    });
    o.require(identical, "monte carlo reruns bit-identical (20 trials)".into());

    let mut worst: f64 = 0.0;
    for (t, dist) in [Distribution::Rademacher, Distribution::Uniform, Distribution::TruncatedGaussian]
        .into_iter()
        .enumerate()
    {
        let vals = sigma_values(&exp_spec(), 150).unwrap();
        let s = Sampler::new(vals, dist, dist.default_bound(1.0)).unwrap();
        let m = s.sample(SEED + t as u64);
        let eig = eigenvalues(&m).unwrap();
        let trace: f64 = (0..m.nrows()).map(|i| m[(i, i)]).sum();
        let frob: f64 = m.iter().map(|x| x * x).sum();
        let e1: f64 = eig.iter().sum();
        let e2: f64 = eig.iter().map(|x| x * x).sum();
        worst = worst.max((e1 - trace).abs() / frob.sqrt()).max(rel(e2, frob));
    }
    o.require(worst <= 1e-9, format!("trace/frobenius identities: worst relative {worst:.1e}"));

    let eig: Vec<f64> = a.iter().flat_map(|s| s.eigenvalues.iter().copied()).collect();
    let full = esd_histogram(&eig, 40, None).unwrap();
    let clipped = esd_histogram(&eig, 40, Some((-0.5, 0.5))).unwrap();
    o.require(
        full.total() == eig.len() as u64 && clipped.total() + clipped.outside == eig.len() as u64,
        format!(
            "histogram counts conserved: {} binned; {} binned + {} outside of {}",
            full.total(),
            clipped.total(),
            clipped.outside,
            eig.len()
        ),
    );
    o
}

fn criterion_8(lambdas: &[f64]) -> Outcome {
    let mut o = Outcome::new();
    let limit = limiting_even_moment(lambdas, 2).unwrap();
    let mut prev: Option<(f64, f64)> = None;
    for n in [250, 500, 1000, 2000] {
        let mc = exp_report(n, 50, SEED ^ n as u64);
        let m4 = mc.moments[3];
        let se = m4.stderr.unwrap();
        let err = (m4.mean - limit).abs();
        let line = format!("n={n}: m4 {:.5e} ± {se:.1e}, |error| {err:.2e}", m4.mean);
        match prev {
            None => o.info(line),
            Some((e0, s0)) => {
                let slack = 2.0 * (s0 * s0 + se * se).sqrt();
                o.require(err <= e0 + slack, format!("{line} (slack {slack:.1e})"));
            }
        }
        prev = Some((err, se));
    }
    o
}

fn main() -> ExitCode {
    let lambdas = exp_lambdas(2 * (2 * DEFAULT_SBAR + 1));
    let mut ok = true;
    ok &= report(1, "tree counts and catalan partition", Duration::from_secs(5), criterion_1);
    ok &= report(2, "semicircle specialization", Duration::from_secs(5), criterion_2);
    ok &= report(3, "walk oracle vs monte carlo", Duration::from_secs(120), criterion_3);

    let start = Instant::now();
    let n = 1000;
    let mc = exp_report(n, 100, SEED);
    let shared = start.elapsed();
    println!("shared n={n} run: 100 trials in {:.1} s", shared.as_secs_f64());
    ok &= report(4, "exp profile moments, n=1000", Duration::from_secs(600).saturating_sub(shared), || {
        criterion_4(&mc, &lambdas)
    });
    ok &= report(5, "exp profile radius numbers", Duration::from_secs(600), || {
        criterion_5(&mc, &lambdas, n)
    });
    ok &= report(6, "sdp dual-method contract", Duration::from_secs(60), || criterion_6(&lambdas));
    ok &= report(7, "invariant suite", Duration::from_secs(300), criterion_7);
    ok &= report(8, "convergence trend of m4", Duration::from_secs(900), || criterion_8(&lambdas));
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
