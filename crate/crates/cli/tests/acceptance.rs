//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- 4 5`.

use std::time::Instant;

use cfx_core::eval::{
    compare_plausibility_modes, evaluate_batch, synth_dataset, BatchEvaluation, SynthSpec,
};
use cfx_core::models::{
    build_rule_model, LofDetector, PredictiveModel, RuleExpr, ThresholdRuleModel,
};
use cfx_core::policy::PolicyNetwork;
use cfx_core::{
    feature_changes, generate, proximity, sparsity, FeatureKind, FeatureSchema, FeatureSpec,
    Mutability, NamedSample, Problem, SearchConfig, SearchReport, SeriesSample, TargetSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances and thresholds.
const C1_SAMPLES: usize = 25;
const C1_MAX_SPARSITY: f64 = 52.0;
const C1_MAX_PROXIMITY: f64 = 174.0;
const C2_MIN_SUCCESS: f64 = 90.0;
const C4_TRIPLES: usize = 200;
const C4_STEP: f64 = 1e-5;
const C4_MAX_RELATIVE: f64 = 1e-4;
const C4_ABSOLUTE_FLOOR: f64 = 1e-6;
const C4_MAX_SECONDS: f64 = 30.0;
const C5_PAIRS: usize = 1000;
const C5_MAX_RELATIVE: f64 = 1e-9;
const C7_REFERENCES: usize = 200;
const C8_SEEDS: u64 = 20;
const C8_WEIGHT_RATIO: f64 = 10.0;
const C8_MAX_P: f64 = 0.05;

const DATA_SEED: u64 = 0;

/// Every counterfactual seen across the suite, checked for validity.
#[derive(Default)]
struct Audit {
    checked: usize,
    violations: Vec<String>,
}

impl Audit {
    fn report(
        &mut self,
        model: &dyn PredictiveModel<f64>,
        problem: &Problem<f64>,
        original: &SeriesSample<f64>,
        report: &SearchReport<f64>,
        tag: &str,
    ) {
        for (i, c) in report.cfe_set.iter().enumerate() {
            self.checked += 1;
            match model.predict(c) {
                Ok(p) if problem.target.is_satisfied(p) => {}
                Ok(p) => self.violations.push(format!("{tag}: cfe {i} predicts {p}")),
                Err(e) => self.violations.push(format!("{tag}: cfe {i} errors: {e}")),
            }
            for d in problem.schema.immutable() {
                if !c.column(d).eq(original.column(d)) {
                    self.violations
                        .push(format!("{tag}: cfe {i} changed immutable feature {d}"));
                }
            }
        }
    }

    fn batch(
        &mut self,
        model: &dyn PredictiveModel<f64>,
        problem: &Problem<f64>,
        samples: &[NamedSample<f64>],
        batch: &BatchEvaluation<f64>,
        tag: &str,
    ) {
        for r in &batch.samples {
            let original = &samples
                .iter()
                .find(|s| s.id == r.id)
                .expect("sample present")
                .sample;
            if let Some(report) = &r.report {
                self.report(model, problem, original, report, &format!("{tag}/{}", r.id));
            }
        }
    }
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "---".into(), |x| format!("{x:.2}"))
}

/// First `count` samples of a synthetic set that the model gets wrong.
fn invalid_samples(
    rule: &ThresholdRuleModel<f64>,
    steps: usize,
    features: usize,
    count: usize,
    seed: u64,
) -> Vec<NamedSample<f64>> {
    let spec = SynthSpec::new(steps, features, count * 8, seed);
    let out: Vec<_> = synth_dataset(&spec, rule)
        .expect("synthesis")
        .into_iter()
        .filter(|s| s.label != Some(rule.target_label))
        .take(count)
        .collect();
    assert_eq!(out.len(), count, "not enough invalid samples");
    out
}

fn ering_batch(variant: u8, audit: &mut Audit) -> BatchEvaluation<f64> {
    let (steps, features) = (65, 4);
    let rule = build_rule_model::<f64>("ering", variant, steps, features).unwrap();
    let samples = invalid_samples(&rule, steps, features, C1_SAMPLES, DATA_SEED);
    let problem = Problem::unconstrained(
        FeatureSchema::all_continuous(features).unwrap(),
        TargetSpec::class(1),
    )
    .unwrap();
    let config = SearchConfig::default();
    let batch = evaluate_batch(&rule, &samples, &problem, &config, None).unwrap();
    audit.batch(
        &rule,
        &problem,
        &samples,
        &batch,
        &format!("ering-{variant}"),
    );
    batch
}

fn criterion_1(audit: &mut Audit) -> Outcome {
    let m = ering_batch(2, audit).summary;
    let passed = m.success_rate == Some(100.0)
        && m.validity_rate == Some(100.0)
        && m.mean_sparsity.is_some_and(|s| s <= C1_MAX_SPARSITY)
        && m.mean_proximity.is_some_and(|p| p < C1_MAX_PROXIMITY);
    outcome(
        passed,
        format!(
            "success {} validity {} sparsity {} (<= {C1_MAX_SPARSITY}) proximity {} (< {C1_MAX_PROXIMITY})",
            fmt(m.success_rate),
            fmt(m.validity_rate),
            fmt(m.mean_sparsity),
            fmt(m.mean_proximity)
        ),
    )
}

fn criterion_2(audit: &mut Audit) -> Outcome {
    let m = ering_batch(1, audit).summary;
    let passed = m.success_rate.is_some_and(|s| s >= C2_MIN_SUCCESS);
    outcome(
        passed,
        format!(
            "success {} (>= {C2_MIN_SUCCESS}) over {} samples",
            fmt(m.success_rate),
            m.n_invalid
        ),
    )
}

/// Three features must all be positive over the last 10 of 20 steps while
/// the fourth feature is frozen.
fn hard_task() -> (ThresholdRuleModel<f64>, Problem<f64>, Vec<NamedSample<f64>>) {
    let expr = RuleExpr::All(vec![
        RuleExpr::gt(0, 0.0),
        RuleExpr::gt(1, 0.0),
        RuleExpr::gt(2, 0.0),
    ]);
    let rule = ThresholdRuleModel::over_last(expr, 20, 10).unwrap();
    let schema = FeatureSchema::all_continuous(4)
        .unwrap()
        .with_mutability(3, Mutability::Immutable)
        .unwrap();
    let problem = Problem::unconstrained(schema, TargetSpec::class(1)).unwrap();
    let samples = invalid_samples(&rule, 20, 4, 20, DATA_SEED + 3);
    (rule, problem, samples)
}

fn criterion_3(audit: &mut Audit) -> Outcome {
    let (rule, problem, samples) = hard_task();
    let mut rates = Vec::new();
    for (episodes, interventions) in [(10, 10), (100, 100), (300, 300)] {
        let config = SearchConfig::default()
            .with_hidden([64, 32])
            .with_budget(episodes, interventions);
        let batch = evaluate_batch(&rule, &samples, &problem, &config, None).unwrap();
        audit.batch(
            &rule,
            &problem,
            &samples,
            &batch,
            &format!("budget-{episodes}"),
        );
        rates.push(batch.summary.success_rate.unwrap());
    }
    let monotone = rates.windows(2).all(|w| w[0] <= w[1]);
    let strict = rates.windows(2).any(|w| w[0] < w[1]);
    outcome(
        monotone && strict,
        format!(
            "success (10,10) {:.2} -> (100,100) {:.2} -> (300,300) {:.2}",
            rates[0], rates[1], rates[2]
        ),
    )
}

fn criterion_4() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(DATA_SEED + 4);
    let mut worst: f64 = 0.0;
    let mut worst_abs: f64 = 0.0;
    let mut failures = 0;
    let mut checked = 0;
    for _ in 0..C4_TRIPLES {
        let steps = rng.random_range(1..=4);
        let features: Vec<FeatureSpec<f64>> = (0..rng.random_range(1..=3))
            .map(|_| {
                if rng.random_bool(0.3) {
                    FeatureSpec::discrete("d", rng.random_range(2..=4))
                } else {
                    FeatureSpec::continuous("c")
                }
            })
            .collect();
        let schema = FeatureSchema::new(features).unwrap();
        let hidden = [rng.random_range(2..=12), rng.random_range(2..=8)];
        let net = PolicyNetwork::<f64>::new(schema.action_layout(steps), hidden, &mut rng);
        let values = (0..steps)
            .flat_map(|_| schema.features().iter().map(|f| f.kind).collect::<Vec<_>>())
            .map(|kind| match kind {
                FeatureKind::Continuous => rng.random_range(-2.0..2.0),
                FeatureKind::Discrete { cardinality } => rng.random_range(0..cardinality) as f64,
            })
            .collect();
        let state = SeriesSample::new(steps, schema.len(), values).unwrap();
        let action = net.forward(&state).unwrap().sample_action(&mut rng);
        let analytic = net.grad_log_prob(&state, &action).unwrap();
        for (i, &g) in analytic.iter().enumerate() {
            let mut plus = net.clone();
            plus.params_mut()[i] += C4_STEP;
            let mut minus = net.clone();
            minus.params_mut()[i] -= C4_STEP;
            let numeric = (plus.log_prob(&state, &action).unwrap()
                - minus.log_prob(&state, &action).unwrap())
                / (2.0 * C4_STEP);
            let err = (g - numeric).abs();
            checked += 1;
            worst_abs = worst_abs.max(err);
            if err <= C4_ABSOLUTE_FLOOR {
                continue;
            }
            let rel = err / g.abs().max(numeric.abs());
            worst = worst.max(rel);
            if rel > C4_MAX_RELATIVE {
                failures += 1;
            }
        }
    }
    let seconds = started.elapsed().as_secs_f64();
    outcome(
        failures == 0 && seconds < C4_MAX_SECONDS,
        format!(
            "{C4_TRIPLES} triples, {checked} partials, max absolute error {worst_abs:.2e} (floor {C4_ABSOLUTE_FLOOR:e}), max relative error above the floor {worst:.2e} (<= {C4_MAX_RELATIVE:e}), {seconds:.1}s (< {C4_MAX_SECONDS}s)"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(DATA_SEED + 5);
    let mut worst: f64 = 0.0;
    let mut sparsity_mismatches = 0;
    for _ in 0..C5_PAIRS {
        let steps = rng.random_range(1..=12);
        let specs: Vec<FeatureSpec<f64>> = (0..rng.random_range(1..=6))
            .map(|_| {
                let w = rng.random_range(0.1..10.0);
                if rng.random_bool(0.3) {
                    FeatureSpec::discrete("d", rng.random_range(2..=5)).with_weight(w)
                } else {
                    FeatureSpec::continuous("c").with_weight(w)
                }
            })
            .collect();
        let schema = FeatureSchema::new(specs).unwrap();
        let draw = |rng: &mut ChaCha8Rng| -> SeriesSample<f64> {
            let values = (0..steps * schema.len())
                .map(|i| match schema.feature(i % schema.len()).kind {
                    FeatureKind::Continuous => rng.random_range(-5.0..5.0),
                    FeatureKind::Discrete { cardinality } => {
                        rng.random_range(0..cardinality) as f64
                    }
                })
                .collect();
            SeriesSample::new(steps, schema.len(), values).unwrap()
        };
        let x = draw(&mut rng);
        let mut c = draw(&mut rng);
        // keep some cells identical so sparsity is exercised
        for i in 0..steps * schema.len() {
            if rng.random_bool(0.4) {
                c.set(
                    i / schema.len(),
                    i % schema.len(),
                    x.get(i / schema.len(), i % schema.len()),
                );
            }
        }
        let mut oracle = 0.0;
        let mut changed = 0;
        for k in 0..steps {
            for d in 0..schema.len() {
                let (a, b) = (x.get(k, d), c.get(k, d));
                let beta = schema.feature(d).feasibility_weight;
                oracle += match schema.feature(d).kind {
                    FeatureKind::Continuous => beta * (a - b).abs(),
                    FeatureKind::Discrete { .. } => beta * f64::from(u8::from(a != b)),
                };
                changed += usize::from((a - b).abs() > 1e-9);
            }
        }
        let got = proximity(&x, &c, &schema).unwrap();
        if oracle > 0.0 {
            worst = worst.max((got - oracle).abs() / oracle);
        } else if got != 0.0 {
            worst = f64::INFINITY;
        }
        if sparsity(&x, &c, 1e-9).unwrap() != changed {
            sparsity_mismatches += 1;
        }
    }
    outcome(
        worst <= C5_MAX_RELATIVE && sparsity_mismatches == 0,
        format!("{C5_PAIRS} pairs, max relative proximity error {worst:.2e} (<= {C5_MAX_RELATIVE:e}), sparsity mismatches {sparsity_mismatches}"),
    )
}

fn criterion_7(audit: &mut Audit) -> Outcome {
    // either of two features positive over the last 3 of 20 steps
    let expr = RuleExpr::Any(vec![RuleExpr::gt(1, 0.0), RuleExpr::gt(2, 0.0)]);
    let rule = ThresholdRuleModel::over_last(expr, 20, 3).unwrap();
    let pool = synth_dataset(&SynthSpec::new(20, 4, 2000, DATA_SEED + 7), &rule).unwrap();
    let references: Vec<_> = pool
        .iter()
        .filter(|s| s.label == Some(1))
        .take(C7_REFERENCES)
        .map(|s| s.sample.clone())
        .collect();
    let samples: Vec<_> = pool
        .iter()
        .filter(|s| s.label == Some(0))
        .take(20)
        .cloned()
        .collect();
    assert_eq!(references.len(), C7_REFERENCES);
    let detector = LofDetector::fitted(references, 20, 1.5).unwrap();
    let problem = Problem::unconstrained(
        FeatureSchema::all_continuous(4).unwrap(),
        TargetSpec::class(1),
    )
    .unwrap();
    let config = SearchConfig::default().with_hidden([128, 64]);
    let cmp = compare_plausibility_modes(&rule, &samples, &problem, &config, &detector).unwrap();
    audit.batch(&rule, &problem, &samples, &cmp.ungated, "ungated");
    audit.batch(&rule, &problem, &samples, &cmp.gated, "gated");
    let (off, on) = (&cmp.ungated.summary, &cmp.gated.summary);
    let gated_plausible =
        on.success_rate.unwrap_or(0.0) == 0.0 || on.plausibility_rate == Some(100.0);
    let not_better = on.success_rate.unwrap_or(0.0) <= off.success_rate.unwrap_or(0.0);
    outcome(
        gated_plausible && not_better,
        format!(
            "ungated success {} plausibility {}; gated success {} plausibility {}",
            fmt(off.success_rate),
            fmt(off.plausibility_rate),
            fmt(on.success_rate),
            fmt(on.plausibility_rate)
        ),
    )
}

/// Upper tail `P(X >= k)` of `Binomial(n, p)`.
fn binomial_upper_tail(k: u64, n: u64, p: f64) -> f64 {
    let ln_choose = |n: u64, i: u64| -> f64 {
        (1..=i)
            .map(|j| ((n - i + j) as f64).ln() - (j as f64).ln())
            .sum()
    };
    (k..=n)
        .map(|i| (ln_choose(n, i) + i as f64 * p.ln() + (n - i) as f64 * (1.0 - p).ln()).exp())
        .sum::<f64>()
        .min(1.0)
}

fn criterion_8(audit: &mut Audit) -> Outcome {
    // either feature 1 or feature 2 positive over the last 5 of 20 steps
    let expr = RuleExpr::Any(vec![RuleExpr::gt(1, 0.0), RuleExpr::gt(2, 0.0)]);
    let rule = ThresholdRuleModel::over_last(expr, 20, 5).unwrap();
    let (costly, cheap) = (1, 2);
    let mut x0 = SeriesSample::zeros(20, 4).unwrap();
    for k in 0..20 {
        x0.set(k, costly, -0.5);
        x0.set(k, cheap, -0.5);
    }
    let base = FeatureSchema::all_continuous(4)
        .unwrap()
        .with_mutability(0, Mutability::Immutable)
        .unwrap();
    let weighted = base.with_weight(costly, C8_WEIGHT_RATIO).unwrap();

    let mut count_cheap = |schema: &FeatureSchema<f64>, tag: &str| -> (u64, u64) {
        let problem = Problem::unconstrained(schema.clone(), TargetSpec::class(1)).unwrap();
        let mut hits = 0;
        let mut found = 0;
        for seed in 0..C8_SEEDS {
            let config = SearchConfig::default()
                .with_hidden([128, 64])
                .with_seed(seed);
            let report = generate(&rule, &problem, &x0, &config, None).unwrap();
            audit.report(&rule, &problem, &x0, &report, &format!("{tag}-{seed}"));
            let Some(best) = &report.best else { continue };
            found += 1;
            let changes = feature_changes(&x0, best, schema).unwrap();
            let dominant =
                (0..changes.len()).fold(0, |m, d| if changes[d] > changes[m] { d } else { m });
            hits += u64::from(dominant == cheap);
        }
        (hits, found)
    };
    let (baseline_hits, baseline_found) = count_cheap(&base, "equal");
    let (steered_hits, steered_found) = count_cheap(&weighted, "steered");
    let p0 = (baseline_hits as f64 / baseline_found.max(1) as f64).max(0.5);
    let p_value = binomial_upper_tail(steered_hits, steered_found, p0);
    let majority = 2 * steered_hits > steered_found;
    outcome(
        majority && steered_hits > baseline_hits && p_value < C8_MAX_P,
        format!(
            "cheap feature dominant: equal weights {baseline_hits}/{baseline_found}, {C8_WEIGHT_RATIO}:1 weights {steered_hits}/{steered_found}; one-sided binomial p = {p_value:.2e} vs p0 = {p0:.2} (< {C8_MAX_P})"
        ),
    )
}

fn criterion_9(audit: &mut Audit) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.to_str().unwrap();
    assert_eq!(
        cfx_cli::run([
            "cfx",
            "synth",
            "--dataset-id",
            "ering",
            "--variant",
            "2",
            "--n",
            "6",
            "--seed",
            "9",
            "--out",
            data
        ]),
        0
    );
    let config = d.join("run.toml");
    std::fs::write(
        &config,
        "workers = 2\n[search]\nseed = 17\nhidden = [64, 32]\nmax_episodes = 30\nmax_interventions = 50\n\
         [target]\nmode = \"classification\"\nclass = 1\n[model]\nkind = \"rule\"\ndefinition = \"ering.rule.json\"\n",
    )
    .unwrap();
    let run = |out: &str| {
        let out = d.join(out);
        let code = cfx_cli::run([
            "cfx",
            "evaluate",
            "--config",
            config.to_str().unwrap(),
            "--input",
            d.join("ering.csv").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        (code, std::fs::read(out).unwrap_or_default())
    };
    let (code_a, a) = run("a.json");
    let (code_b, b) = run("b.json");

    let rule = build_rule_model::<f64>("ering", 2, 65, 4).unwrap();
    let problem = Problem::unconstrained(
        FeatureSchema::all_continuous(4).unwrap(),
        TargetSpec::class(1),
    )
    .unwrap();
    let samples =
        cfx_core::io::load_dataset::<f64>(d.join("ering.csv"), d.join("ering.schema.json"))
            .unwrap()
            .samples;
    let batch: BatchEvaluation<f64> = serde_json::from_slice(&a).unwrap();
    audit.batch(&rule, &problem, &samples, &batch, "cli");
    outcome(
        code_a == 0 && code_b == 0 && !a.is_empty() && a == b,
        format!(
            "exit codes {code_a}/{code_b}, reports of {} and {} bytes, identical: {}",
            a.len(),
            b.len(),
            a == b
        ),
    )
}

fn main() {
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let wanted = |n: u32| selected.is_empty() || selected.contains(&n);
    let mut audit = Audit::default();
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut record = |n: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        if wanted(n) {
            let started = Instant::now();
            let o = f();
            let secs = started.elapsed().as_secs_f64();
            println!(
                "criterion {n} [{name}] {} ({secs:.1}s): {}",
                if o.passed { "PASS" } else { "FAIL" },
                o.detail
            );
            results.push((n, name, o, secs));
        }
    };

    record(4, "policy gradient vs finite differences", &mut criterion_4);
    record(
        5,
        "proximity/sparsity vs cell-loop oracle",
        &mut criterion_5,
    );
    record(1, "eRing disjunctive rule", &mut || {
        criterion_1(&mut audit)
    });
    record(2, "eRing conjunctive rule", &mut || criterion_2(&mut audit));
    record(3, "success grows with budget", &mut || {
        criterion_3(&mut audit)
    });
    record(7, "plausibility gate", &mut || criterion_7(&mut audit));
    record(8, "feasibility-weight steering", &mut || {
        criterion_8(&mut audit)
    });
    record(9, "byte-identical CLI reports", &mut || {
        criterion_9(&mut audit)
    });
    if wanted(6) {
        let passed = audit.violations.is_empty() && audit.checked > 0;
        let detail = format!(
            "{} counterfactuals re-checked across the runs above, {} violations{}",
            audit.checked,
            audit.violations.len(),
            audit
                .violations
                .first()
                .map(|v| format!(" (first: {v})"))
                .unwrap_or_default()
        );
        println!(
            "criterion 6 [validity by construction] {}: {detail}",
            if passed { "PASS" } else { "FAIL" }
        );
        results.push((6, "validity by construction", outcome(passed, detail), 0.0));
    }

    let failed: Vec<u32> = results
        .iter()
        .filter(|r| !r.2.passed)
        .map(|r| r.0)
        .collect();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
