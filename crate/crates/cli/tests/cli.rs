use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cfx_core::eval::BatchEvaluation;
use cfx_core::io::load_json;
use cfx_core::SearchReport;

const SEARCH: &str =
    "[search]\nseed = 3\nhidden = [32, 16]\nmax_episodes = 20\nmax_interventions = 40\n";
const TARGET: &str = "[target]\nmode = \"classification\"\nclass = 1\n";

// eRing rule 1 over the JSON line protocol: features 1 and 2 positive over the last 10 steps.
const ERING_STUB: &str = r#"
import json, sys
for line in sys.stdin:
    q = json.loads(line)
    k, d, v = q["steps"], q["features"], q["values"]
    ok = all(v[t * d + 1] > 0 and v[t * d + 2] > 0 for t in range(k - 10, k))
    print(1.0 if ok else 0.0, flush=True)
"#;

fn cfx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfx"))
        .args(args)
        .env_remove("CFX_SEED")
        .env_remove("CFX_WORKERS")
        .output()
        .expect("cfx runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    /// Synthetic eRing data (rule 1) with `n` samples.
    fn ering(n: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap().to_owned();
        let o = cfx(&[
            "synth",
            "--dataset-id",
            "ering",
            "--n",
            &n.to_string(),
            "--seed",
            "4",
            "--out",
            &out,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_owned()
    }

    fn config(&self, name: &str, model: &str, extra: &str) -> String {
        let path = self.path(name);
        std::fs::write(&path, format!("{SEARCH}{TARGET}[model]\n{model}\n{extra}")).unwrap();
        path.to_str().unwrap().to_owned()
    }

    fn rule_config(&self) -> String {
        self.config(
            "rule.toml",
            "kind = \"rule\"\ndefinition = \"ering.rule.json\"",
            "",
        )
    }

    fn stub_config(&self, name: &str, script: &str) -> String {
        let stub = self.path(&format!("{name}.py"));
        std::fs::write(&stub, script).unwrap();
        let model = format!(
            "kind = \"external-command\"\ncommand = [\"python3\", {:?}]",
            stub.to_str().unwrap()
        );
        self.config(&format!("{name}.toml"), &model, "")
    }

    fn first_invalid(&self) -> String {
        let data = cfx_core::io::load_dataset::<f64>(
            self.path("ering.csv"),
            self.path("ering.schema.json"),
        )
        .unwrap();
        data.samples
            .iter()
            .find(|s| s.label == Some(0))
            .unwrap()
            .id
            .clone()
    }
}

fn read_report(path: &Path) -> SearchReport<f64> {
    load_json(path).unwrap()
}

#[test]
fn synth_writes_catalog_shapes() {
    for (id, steps, features) in [("ering", 65, 4), ("natops", 51, 24), ("libras", 45, 2)] {
        let dir = tempfile::tempdir().unwrap();
        let o = cfx(&[
            "synth",
            "--dataset-id",
            id,
            "--n",
            "3",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{id}");
        let data = cfx_core::io::load_dataset::<f64>(
            dir.path().join(format!("{id}.csv")),
            dir.path().join(format!("{id}.schema.json")),
        )
        .unwrap();
        assert_eq!(data.samples.len(), 3);
        assert_eq!(data.samples[0].sample.steps(), steps, "{id}");
        assert_eq!(data.samples[0].sample.features(), features, "{id}");
        assert!(dir.path().join(format!("{id}.rule.json")).exists());
    }
}

#[test]
fn unknown_dataset_and_bad_usage_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = cfx(&[
        "synth",
        "--dataset-id",
        "nope",
        "--n",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(cfx(&["generate"]).status.code(), Some(1));
    assert_eq!(cfx(&["--help"]).status.code(), Some(0));
}

#[test]
fn generate_writes_a_report() {
    let ws = Workspace::ering(8);
    let id = ws.first_invalid();
    let out = ws.path("out/report.json");
    let o = cfx(&[
        "generate",
        "--config",
        &ws.rule_config(),
        "--input",
        &ws.p("ering.csv"),
        "--sample-id",
        &id,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report = read_report(&out);
    assert!(report.succeeded);
    assert_eq!(report.cfe_set.len(), report.cfe_proximities.len());
    assert!(stdout(&o).contains("best counterfactual"));

    let summary = cfx(&["report", "--input", out.to_str().unwrap()]);
    assert!(summary.status.success());
    assert!(stdout(&summary).contains("best counterfactual"));
}

#[test]
fn missing_sample_or_schema_exit_one() {
    let ws = Workspace::ering(4);
    let config = ws.rule_config();
    let o = cfx(&[
        "generate",
        "--config",
        &config,
        "--input",
        &ws.p("ering.csv"),
        "--sample-id",
        "absent",
    ]);
    assert_eq!(o.status.code(), Some(1));
    std::fs::remove_file(ws.path("ering.schema.json")).unwrap();
    let o = cfx(&[
        "generate",
        "--config",
        &config,
        "--input",
        &ws.p("ering.csv"),
        "--sample-id",
        "s0",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unreachable_target_exits_two() {
    let ws = Workspace::ering(4);
    let config = ws.stub_config(
        "never",
        "import sys\nfor line in sys.stdin:\n    print(0, flush=True)\n",
    );
    let out = ws.path("never.json");
    let o = cfx(&[
        "generate",
        "--config",
        &config,
        "--input",
        &ws.p("ering.csv"),
        "--sample-id",
        "s0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let report = read_report(&out);
    assert!(!report.succeeded);
    assert!(report.cfe_set.is_empty());
    assert_eq!(report.total_interventions, 20 * 40);
}

#[test]
fn always_valid_stub_succeeds_after_one_intervention() {
    let ws = Workspace::ering(4);
    // the first query is the unperturbed input
    let script = "import sys\nfor i, line in enumerate(sys.stdin):\n    print(0 if i == 0 else 1, flush=True)\n";
    let config = ws.stub_config("echo", script);
    let out = ws.path("echo.json");
    let o = cfx(&[
        "generate",
        "--config",
        &config,
        "--input",
        &ws.p("ering.csv"),
        "--sample-id",
        "s1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report = read_report(&out);
    assert!(report.episodes.iter().all(|e| e.interventions == 1));
    assert_eq!(report.cfe_set.len(), 20);
}

#[test]
fn garbage_from_the_model_is_an_error() {
    let ws = Workspace::ering(4);
    let config = ws.stub_config(
        "garbage",
        "import sys\nfor line in sys.stdin:\n    print('maybe', flush=True)\n",
    );
    let o = cfx(&[
        "generate",
        "--config",
        &config,
        "--input",
        &ws.p("ering.csv"),
        "--sample-id",
        "s0",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn external_model_matches_the_built_in_rule() {
    let ws = Workspace::ering(6);
    let run = |config: &str, out: &str| {
        let o = cfx(&[
            "evaluate",
            "--config",
            config,
            "--input",
            &ws.p("ering.csv"),
            "--out",
            &ws.p(out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        load_json::<BatchEvaluation<f64>>(ws.path(out)).unwrap()
    };
    let built_in = run(&ws.rule_config(), "rule.json");
    let external = run(&ws.stub_config("ering_stub", ERING_STUB), "stub.json");
    assert_eq!(built_in, external);
    assert!(built_in.summary.n_invalid > 0);
}

#[test]
fn evaluate_table_marks_undefined_rates() {
    let ws = Workspace::ering(3);
    // every sample already predicts the target
    let config = ws.stub_config(
        "yes",
        "import sys\nfor line in sys.stdin:\n    print(1, flush=True)\n",
    );
    let table = ws.path("table.txt");
    let o = cfx(&[
        "evaluate",
        "--config",
        &config,
        "--input",
        &ws.p("ering.csv"),
        "--out",
        &ws.p("yes.json"),
        "--table",
        table.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&table).unwrap();
    assert_eq!(text, stdout(&o));
    assert!(text.contains("---"));
    let batch: BatchEvaluation<f64> = load_json(ws.path("yes.json")).unwrap();
    assert_eq!(batch.summary.n_invalid, 0);
}

#[test]
fn plausibility_compare_prints_both_rows() {
    let ws = Workspace::ering(10);
    // disjunctive-rule pool, about 5% labelled 1
    let refs = ws.p("refs");
    let o = cfx(&[
        "synth",
        "--dataset-id",
        "ering",
        "--variant",
        "2",
        "--n",
        "300",
        "--seed",
        "5",
        "--out",
        &refs,
    ]);
    assert!(o.status.success());
    let extra = "[plausibility]\nreferences = \"refs/ering.csv\"\nneighbors = 3\n";
    let config = ws.config(
        "plaus.toml",
        "kind = \"rule\"\ndefinition = \"ering.rule.json\"",
        extra,
    );
    let out = ws.path("cmp.json");
    let o = cfx(&[
        "evaluate",
        "--config",
        &config,
        "--input",
        &ws.p("ering.csv"),
        "--plausibility-compare",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("cfx ")));
    assert!(text.lines().any(|l| l.starts_with("cfx-plausible")));
    let report = cfx(&["report", "--input", out.to_str().unwrap()]);
    assert_eq!(stdout(&report), text);
}

#[test]
fn plausibility_compare_needs_a_detector() {
    let ws = Workspace::ering(3);
    let o = cfx(&[
        "evaluate",
        "--config",
        &ws.rule_config(),
        "--input",
        &ws.p("ering.csv"),
        "--plausibility-compare",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn seed_and_workers_come_from_the_environment() {
    let ws = Workspace::ering(6);
    let config = ws.rule_config();
    let run = |seed: &str, workers: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_cfx"))
            .args([
                "evaluate",
                "--config",
                &config,
                "--input",
                &ws.p("ering.csv"),
                "--out",
                &ws.p(out),
            ])
            .env("CFX_SEED", seed)
            .env("CFX_WORKERS", workers)
            .output()
            .unwrap();
        assert!(o.status.success());
        std::fs::read(ws.path(out)).unwrap()
    };
    let a = run("11", "1", "a.json");
    let b = run("11", "3", "b.json");
    let c = run("12", "1", "c.json");
    assert_eq!(a, b);
    assert_ne!(a, c);
    let o = Command::new(env!("CARGO_BIN_EXE_cfx"))
        .args([
            "evaluate",
            "--config",
            &config,
            "--input",
            &ws.p("ering.csv"),
        ])
        .env("CFX_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn saved_policy_resumes() {
    let ws = Workspace::ering(6);
    let id = ws.first_invalid();
    let config = ws.rule_config();
    let policy = ws.path("policy.json");
    let base = [
        "generate",
        "--config",
        &config,
        "--input",
        &ws.p("ering.csv"),
        "--sample-id",
        &id,
    ];
    let first = cfx(&[
        &base[..],
        &[
            "--save-policy",
            policy.to_str().unwrap(),
            "--out",
            &ws.p("r1.json"),
        ],
    ]
    .concat());
    assert!(first.status.code().is_some_and(|c| c != 1));
    let second = cfx(&[
        &base[..],
        &[
            "--resume",
            policy.to_str().unwrap(),
            "--out",
            &ws.p("r2.json"),
        ],
    ]
    .concat());
    assert!(second.status.code().is_some_and(|c| c != 1));
    assert_ne!(
        read_report(&ws.path("r1.json")),
        read_report(&ws.path("r2.json"))
    );

    std::fs::write(&policy, "{}").unwrap();
    let broken = cfx(&[&base[..], &["--resume", policy.to_str().unwrap()]].concat());
    assert_eq!(broken.status.code(), Some(1));
}
