//! Acceptance suite. Runs every criterion and prints one PASS/FAIL line each;
//! exits non-zero if any criterion fails.
//!
//! Criterion 11 talks to a live chat-completions endpoint and only runs when
//! `ANNOT_API_KEY` and `SEMPROX_LIVE_DEV` (a gold dev split TSV) are set.

mod support;

#[path = "../../core/tests/support/oracle.rs"]
mod oracle;
#[path = "../../core/tests/support/stub_server.rs"]
mod stub_server;

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::Write as _;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use semprox_core::corpus::{
    filter_gold, label_distribution, parse_gold, parse_instances, parse_judgments, parse_tutorial, split, SplitSizes,
};
use semprox_core::guidelines::{load_guidelines, normalize_guidelines, render_tutorial, NormalizeOptions, TableMarkers};
use semprox_core::metrics::{krippendorff_alpha, percentage_agreement, Metric, ReliabilityData};
use semprox_core::prompt::{validate_finetune_file, PromptBuilder, Strategy};
use semprox_core::provider::{
    Credential, HttpChatProvider, ModelConfig, Provider, ProviderError, RetryPolicy, ScriptedGoldProvider,
    SeededNoiseProvider, API_KEY_ENV,
};
use semprox_core::runner::{annotate_split, sweep, summarize_trials, Grid, RunOptions};
use semprox_core::{parse_judgment, CompletionResult, GoldInstance, Label, PromptSpec};

use oracle::OracleMetric;
use stub_server::{Reply, StubServer};
use support::{code, p, semprox, stderr, stdout, synthetic_gold, write_config};

/// Relative error allowed between the matrix α and the enumeration oracle.
const ORACLE_TOLERANCE: f64 = 1e-12;
/// Absolute tolerance for the pinned fixture α.
const PINNED_TOLERANCE: f64 = 1e-9;
/// Wall-clock budget for the oracle comparison.
const ORACLE_BUDGET: Duration = Duration::from_secs(10);
const ORACLE_INSTANCES: usize = 1200;
const FUZZ_CASES: usize = 20_000;
/// Sanity band for the optional live run.
const LIVE_ALPHA_BAND: (f64, f64) = (0.45, 0.90);

type Check = Result<String, String>;
type Entry = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn label(v: u8) -> Label {
    Label::new(v).unwrap()
}

fn core_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests").join(rel)
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn metric_pairs() -> [(Metric, OracleMetric); 3] {
    [
        (Metric::Nominal, OracleMetric::Nominal),
        (Metric::Ordinal, OracleMetric::Ordinal),
        (Metric::Interval, OracleMetric::Interval),
    ]
}

fn to_data(units: &[Vec<u8>]) -> ReliabilityData {
    ReliabilityData::new(units.iter().map(|u| u.iter().map(|&v| label(v)).collect()).collect())
}

fn criterion_1() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let started = Instant::now();
    let mut compared = 0;
    for _ in 0..ORACLE_INSTANCES {
        let units: Vec<Vec<u8>> = (0..rng.random_range(1..=6))
            .map(|_| (0..rng.random_range(0..=3)).map(|_| rng.random_range(1..=4u8)).collect())
            .collect();
        let data = to_data(&units);
        for (metric, oracle_metric) in metric_pairs() {
            let expected = oracle::alpha(&units, oracle_metric);
            let got = krippendorff_alpha(&data, metric).ok().map(|a| a.value);
            match (got, expected) {
                (Some(g), Some(e)) => {
                    ensure!(oracle::close(g, e, ORACLE_TOLERANCE), "{metric:?} on {units:?}: {g} vs oracle {e}");
                    compared += 1;
                }
                (None, None) => {}
                other => return Err(format!("{metric:?} on {units:?}: definedness differs {other:?}")),
            }
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < ORACLE_BUDGET, "took {elapsed:?}");
    Ok(format!("{ORACLE_INSTANCES} instances, {compared} defined values, {elapsed:.2?}"))
}

fn criterion_2() -> Check {
    let units = vec![vec![1, 1], vec![1, 2], vec![2, 2]];
    let expected = oracle::alpha(&units, OracleMetric::Ordinal).unwrap();
    let got = krippendorff_alpha(&to_data(&units), Metric::Ordinal).map_err(|e| e.to_string())?.value;
    ensure!((got - expected).abs() <= PINNED_TOLERANCE, "alpha {got} vs oracle {expected}");
    ensure!((got - 0.444).abs() < 0.0005, "alpha {got} is not ~0.444");
    let gold = [label(1), label(1), label(2)];
    let pred = [Some(label(1)), Some(label(2)), Some(label(2))];
    let pct = percentage_agreement(&gold, &pred).map_err(|e| e.to_string())?;
    ensure!((pct - 2.0 / 3.0).abs() <= PINNED_TOLERANCE, "percent {pct}");

    let perfect = vec![vec![1, 1], vec![3, 3], vec![4, 4], vec![2, 2]];
    let a = krippendorff_alpha(&to_data(&perfect), Metric::Ordinal).map_err(|e| e.to_string())?.value;
    ensure!(a == 1.0, "perfect alpha {a}");
    let gold: Vec<Label> = perfect.iter().map(|u| label(u[0])).collect();
    let pred: Vec<Option<Label>> = gold.iter().copied().map(Some).collect();
    let pct = percentage_agreement(&gold, &pred).map_err(|e| e.to_string())?;
    ensure!(pct == 1.0, "perfect percent {pct}");
    Ok(format!("alpha {got:.12}, percent 2/3, perfect fixture 1/1"))
}

fn criterion_3() -> Check {
    let pairs = parse_instances(&read(&core_path("fixtures/pairs.tsv"))).map_err(|e| e.to_string())?;
    let doc = load_guidelines(&read(&core_path("fixtures/guidelines.md")), TableMarkers::default())
        .map_err(|e| e.to_string())?;
    let norm = normalize_guidelines(&doc, NormalizeOptions { remove_cannot_decide: true, linearize_tables: true });
    let tutorial = parse_tutorial(&read(&core_path("fixtures/tutorial.tsv"))).map_err(|e| e.to_string())?;
    let tutorial = render_tutorial(&tutorial);
    let mut all = String::new();
    for strategy in Strategy::ALL {
        let builder = PromptBuilder::new(strategy, Some(norm.clone()), Some(tutorial.clone())).map_err(|e| e.to_string())?;
        let lemma = if strategy.needs_guidelines() { "eat" } else { "bank" };
        let pair = pairs.iter().find(|p| p.lemma == lemma).unwrap();
        let spec = builder.build(pair).map_err(|e| e.to_string())?;
        let rendered = format!("[system]\n{}\n[user]\n{}\n", spec.system_message, spec.user_message);
        let golden = read(&core_path(&format!("golden/{}.txt", strategy.name())));
        ensure!(rendered == golden, "{} differs from its golden file", strategy.name());
        all.push_str(&golden);
    }
    for phrase in [
        "align with a human's succinct judgment",
        "Annotate this pair of given sentences",
        "provide a judgment as a single integer",
    ] {
        ensure!(all.contains(phrase), "golden files lack {phrase:?}");
    }
    Ok(format!("{} templates byte-identical", Strategy::ALL.len()))
}

/// Instances and judgments covering every filter outcome, plus a replay
/// fixture with clean, wrapped and unparseable responses.
fn write_pipeline_inputs(dir: &Path) {
    let mut instances = String::from("instance_id\tlemma\tsentence1\tsentence2\ttarget_offsets1\ttarget_offsets2\n");
    let mut judgments = String::from("instance_id\tannotator\tlabel\n");
    let mut replay = String::new();
    for i in 0..60 {
        let id = format!("u{i:02}");
        instances.push_str(&format!("{id}\tword{}\tA first sentence {i}.\tA second sentence {i}.\t\t\n", i % 7));
        let l = i % 4 + 1;
        let labels: Vec<String> = match i % 6 {
            0 | 5 => vec![l.to_string(), l.to_string()],
            1 => vec![l.to_string(); 3],
            2 => vec!["1".into(), "3".into()],
            3 => vec![l.to_string(), "-".into()],
            _ => vec![l.to_string()],
        };
        for (a, lab) in labels.iter().enumerate() {
            judgments.push_str(&format!("{id}\tann{a}\t{lab}\n"));
        }
        let response = match i % 5 {
            0 => format!("{l}"),
            1 => format!("Judgment: {}", (i + 1) % 4 + 1),
            2 => "I would rather not say.".into(),
            _ => format!("{}", (i * 7) % 4 + 1),
        };
        replay.push_str(&serde_json::to_string(&json!({"instance_id": id, "response": response})).unwrap());
        replay.push('\n');
    }
    fs::write(dir.join("instances.tsv"), instances).unwrap();
    fs::write(dir.join("judgments.tsv"), judgments).unwrap();
    fs::write(dir.join("replay.jsonl"), replay).unwrap();
}

fn run_pipeline(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    write_pipeline_inputs(dir);
    let step = |args: &[&str]| -> Result<String, String> {
        let out = semprox(args);
        if code(&out) != 0 {
            return Err(format!("{args:?} exited {}: {}", code(&out), stderr(&out)));
        }
        Ok(stdout(&out))
    };
    let path = |name: &str| dir.join(name);
    step(&["ingest", "--instances", p(&path("instances.tsv")), "--judgments", p(&path("judgments.tsv")), "--out", p(&path("gold.tsv"))])?;
    step(&[
        "split", "--gold", p(&path("gold.tsv")), "--dev", "5", "--train", "10", "--test", "15", "--seed", "42",
        "--out-dir", p(&path("split")),
    ])?;
    let config = write_config(
        dir,
        &json!({
            "provider": {"kind": "replay", "fixture": "replay.jsonl"},
            "model": "gpt-4-0125-preview",
            "temperature": 0.9,
            "top_p": 0.9,
            "strategy": "custom2",
            "data": "split/test.tsv",
            "output_dir": "runs",
            "run_id": "replay",
            "trials": 3,
            "concurrency": 4
        }),
    );
    step(&["annotate", "--config", p(&config)])?;
    let report = step(&["report", "--run-dir", p(&path("runs/replay"))])?;
    let report_json = step(&["report", "--run-dir", p(&path("runs/replay")), "--json"])?;

    let mut files = vec![("report stdout".to_string(), report.into_bytes()), ("report --json".to_string(), report_json.into_bytes())];
    let mut names = vec!["gold.tsv".to_string()];
    for part in ["dev", "train", "test"] {
        names.push(format!("split/{part}.tsv"));
    }
    names.push("runs/replay/summary.json".into());
    names.push("runs/replay/summary.txt".into());
    for t in 1..=3 {
        for f in ["responses.jsonl", "report.json", "report.txt"] {
            names.push(format!("runs/replay/trial-{t}/{f}"));
        }
    }
    for name in names {
        let bytes = fs::read(dir.join(&name)).map_err(|e| format!("{name}: {e}"))?;
        files.push((name, bytes));
    }
    Ok(files)
}

fn criterion_4() -> Check {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_pipeline(a.path())?;
    let second = run_pipeline(b.path())?;
    for ((name, x), (_, y)) in first.iter().zip(&second) {
        ensure!(x == y, "{name} differs between runs");
    }
    let gold = parse_gold(&String::from_utf8_lossy(&first[2].1)).map_err(|e| e.to_string())?;
    ensure!(gold.len() == 30, "expected 30 gold rows, got {}", gold.len());
    Ok(format!("{} artefacts bit-identical across two runs", first.len()))
}

fn fixture_gold() -> Result<Vec<GoldInstance>, String> {
    let pairs = parse_instances(&read(&support::fixture("instances.tsv"))).map_err(|e| e.to_string())?;
    let records = parse_judgments(&read(&support::fixture("judgments.tsv"))).map_err(|e| e.to_string())?;
    filter_gold(&pairs, &records).map_err(|e| e.to_string())
}

fn criterion_5() -> Check {
    // p1 {4,4} kept; p2 {1,2} disagreement; p3 {2,CannotDecide}; p4 {1} alone;
    // p5 {1,1,1} kept; p6 {4,4} kept.
    let gold = fixture_gold()?;
    let kept: Vec<(&str, u8, usize)> =
        gold.iter().map(|g| (g.instance_id(), g.gold_label.value(), g.annotator_count)).collect();
    ensure!(kept == [("p1", 4, 2), ("p5", 1, 3), ("p6", 4, 2)], "kept {kept:?}");

    let rows = parse_gold(&synthetic_gold(930)).map_err(|e| e.to_string())?;
    let sizes = SplitSizes { dev: 46, train: 140, test: 744 };
    let parts = split(&rows, sizes, 2024).map_err(|e| e.to_string())?;
    ensure!(
        (parts.dev.len(), parts.train.len(), parts.test.len()) == (46, 140, 744),
        "sizes {}/{}/{}",
        parts.dev.len(),
        parts.train.len(),
        parts.test.len()
    );
    let mut seen = HashSet::new();
    for g in parts.dev.iter().chain(&parts.train).chain(&parts.test) {
        ensure!(seen.insert(g.instance_id().to_string()), "{} appears twice", g.instance_id());
    }
    let all: HashSet<String> = rows.iter().map(|g| g.instance_id().to_string()).collect();
    ensure!(seen == all, "split does not cover the gold set");
    let again = split(&rows, sizes, 2024).map_err(|e| e.to_string())?;
    ensure!(again == parts, "same seed gave a different split");
    Ok("kept {p1,p5,p6}; 46/140/744 disjoint and exhaustive".into())
}

fn criterion_6() -> Check {
    let builder = PromptBuilder::new(Strategy::Custom2, None, None).map_err(|e| e.to_string())?;
    let config = ModelConfig::new("echo", 0.9, 0.9);
    let synthetic = parse_gold(&synthetic_gold(200)).map_err(|e| e.to_string())?;
    for gold in [fixture_gold()?, synthetic] {
        let provider = ScriptedGoldProvider::new(&gold);
        let options = RunOptions { trials: 2, concurrency: 3, run_dir: None };
        let trials = annotate_split(&gold, &builder, &config, &provider, &options).map_err(|e| e.to_string())?;
        let expected_hist = label_distribution(&gold.iter().map(|g| g.gold_label).collect::<Vec<_>>());
        for t in &trials {
            let r = &t.report;
            ensure!(r.alpha == Some(1.0), "alpha {:?}", r.alpha);
            ensure!(r.percent == Some(1.0), "percent {:?}", r.percent);
            ensure!(r.pred_histogram == r.gold_histogram, "histograms differ");
            ensure!(r.gold_histogram == expected_hist, "gold histogram wrong");
        }
    }
    Ok("alpha 1.00, percent 1.00, histograms equal".into())
}

/// Exact answers at (0.9, 0.9), 70 % accurate everywhere else.
struct PlantedPeak {
    exact: ScriptedGoldProvider,
    noisy: SeededNoiseProvider,
}

impl Provider for PlantedPeak {
    fn complete(&self, prompt: &PromptSpec, config: &ModelConfig) -> Result<CompletionResult, ProviderError> {
        if config.temperature == 0.9 && config.top_p == 0.9 {
            self.exact.complete(prompt, config)
        } else {
            self.noisy.complete(prompt, config)
        }
    }
}

fn criterion_7() -> Check {
    let dev = parse_gold(&synthetic_gold(46)).map_err(|e| e.to_string())?;
    let builder = PromptBuilder::new(Strategy::Custom2, None, None).map_err(|e| e.to_string())?;
    let base = ModelConfig::new("m", 0.5, 0.5);
    let options = RunOptions { trials: 2, concurrency: 4, run_dir: None };
    let grid = Grid::full();
    ensure!(grid.cells().count() == 100, "grid has {} cells", grid.cells().count());

    let peak = PlantedPeak {
        exact: ScriptedGoldProvider::new(&dev),
        noisy: SeededNoiseProvider::new(17, 0.7, &dev).map_err(|e| e.to_string())?,
    };
    let result = sweep(&dev, &builder, &base, &peak, &grid, &options).map_err(|e| e.to_string())?;
    ensure!(
        (result.best.temperature, result.best.top_p) == (0.9, 0.9),
        "picked ({}, {})",
        result.best.temperature,
        result.best.top_p
    );
    let perfect = result.grid.iter().filter(|c| c.mean_alpha == Some(1.0)).count();
    ensure!(perfect == 1, "{perfect} cells reached alpha 1");

    let ties = ScriptedGoldProvider::new(&dev);
    let result = sweep(&dev, &builder, &base, &ties, &grid, &options).map_err(|e| e.to_string())?;
    ensure!(
        (result.best.temperature, result.best.top_p) == (0.1, 0.1),
        "all-ties grid picked ({}, {})",
        result.best.temperature,
        result.best.top_p
    );
    Ok("peak (0.9, 0.9) selected; all-ties grid selects (0.1, 0.1)".into())
}

fn random_text(rng: &mut ChaCha8Rng) -> String {
    const POOL: &[char] = &[
        '0', '1', '2', '3', '4', '5', '6', '7', '8', '9', ' ', '\n', '\t', '-', '+', '.', ',', ':', '/', 'a', 'J', 'z',
        '½', '٣', '４', 'é', '…', '🙂', '\u{0}', '\u{200b}',
    ];
    (0..rng.random_range(0..40)).map(|_| POOL[rng.random_range(0..POOL.len())]).collect()
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut accepted = 0;
    for _ in 0..FUZZ_CASES {
        let text = random_text(&mut rng);
        let outcome = panic::catch_unwind(|| parse_judgment(&text)).map_err(|_| format!("panicked on {text:?}"))?;
        if let Ok(j) = outcome {
            ensure!((1..=4).contains(&j.value()), "{text:?} parsed to {j}");
            accepted += 1;
        }
    }
    for l in Label::ALL {
        ensure!(parse_judgment(&l.to_string()) == Ok(l), "round trip failed for {l}");
    }
    Ok(format!("{FUZZ_CASES} random inputs ({accepted} accepted), 4 round trips"))
}

fn criterion_9() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.tsv");
    fs::write(&train, synthetic_gold(140)).unwrap();
    let out_path = dir.path().join("train.jsonl");
    let out = semprox(&["finetune-prep", "--train", p(&train), "--out", p(&out_path)]);
    ensure!(code(&out) == 0, "finetune-prep failed: {}", stderr(&out));
    let text = read(&out_path);
    let gold = parse_gold(&synthetic_gold(140)).map_err(|e| e.to_string())?;
    let n = validate_finetune_file(&text).map_err(|e| e.to_string())?;
    ensure!(n == 140 && text.lines().count() == 140, "{n} records");
    let allowed: BTreeSet<&str> = ["1", "2", "3", "4"].into();
    for (line, g) in text.lines().zip(&gold) {
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let obj = v.as_object().ok_or("record is not an object")?;
        ensure!(obj.len() == 1, "record has extra keys");
        let messages = v["messages"].as_array().ok_or("messages missing")?;
        ensure!(messages.len() == 3, "{} messages", messages.len());
        let roles: Vec<&str> = messages.iter().filter_map(|m| m["role"].as_str()).collect();
        ensure!(roles == ["system", "user", "assistant"], "roles {roles:?}");
        for m in messages {
            ensure!(m.as_object().map(|o| o.len()) == Some(2), "message has extra keys");
            ensure!(m["content"].as_str().is_some_and(|c| !c.is_empty()), "empty content");
        }
        let answer = messages[2]["content"].as_str().unwrap();
        ensure!(allowed.contains(answer), "assistant content {answer:?}");
        ensure!(answer == g.gold_label.to_string(), "assistant content disagrees with gold");
    }
    Ok("140 records, 3 messages each, labels in 1-4".into())
}

fn criterion_10() -> Check {
    let mut key = tempfile::NamedTempFile::new().unwrap();
    writeln!(key, "sk-acceptance").unwrap();
    let credential = Credential::File(key.path().to_path_buf());
    let policy = RetryPolicy {
        max_attempts: 4,
        base_delay: Duration::from_millis(25),
        factor: 2.0,
        max_delay: Duration::from_millis(100),
        timeout: Duration::from_secs(5),
    };
    let gold = fixture_gold()?;
    let builder = PromptBuilder::new(Strategy::Custom2, None, None).map_err(|e| e.to_string())?;
    let prompt = builder.build(&gold[0].pair).map_err(|e| e.to_string())?;
    let config = ModelConfig::new("gpt-4-0125-preview", 0.9, 0.9);

    let server = StubServer::start(vec![Reply::new(429, "{}"), Reply::completion("4")]);
    let provider = HttpChatProvider::new(&server.base_url, &credential, policy).map_err(|e| e.to_string())?;
    let started = Instant::now();
    let result = provider.complete(&prompt, &config).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure!(result.text == "4" && result.attempt_count == 2, "got {result:?}");
    ensure!(elapsed >= policy.base_delay, "no backoff before retry ({elapsed:?})");
    let requests = server.requests();
    ensure!(requests.len() == 2, "{} requests", requests.len());
    for req in &requests {
        ensure!(req.path == "/v1/chat/completions", "path {}", req.path);
        ensure!(req.header("authorization") == Some("Bearer sk-acceptance"), "bearer header missing");
        let body = req.json();
        let keys: BTreeSet<&str> = body.as_object().ok_or("body not an object")?.keys().map(String::as_str).collect();
        ensure!(keys == BTreeSet::from(["model", "messages", "temperature", "top_p", "max_tokens"]), "fields {keys:?}");
        let roles: Vec<&str> = body["messages"].as_array().unwrap().iter().filter_map(|m| m["role"].as_str()).collect();
        ensure!(roles == ["system", "user"], "message order {roles:?}");
        ensure!(body["messages"][0]["content"] == prompt.system_message.as_str(), "system content differs");
        ensure!(body["messages"][1]["content"] == prompt.user_message.as_str(), "user content differs");
        ensure!(body["model"] == "gpt-4-0125-preview" && body["temperature"] == 0.9 && body["top_p"] == 0.9, "sampling fields");
    }

    let server = StubServer::start(vec![Reply::new(401, r#"{"error":{"message":"bad key"}}"#)]);
    let provider = HttpChatProvider::new(&server.base_url, &credential, policy).map_err(|e| e.to_string())?;
    match provider.complete(&prompt, &config) {
        Err(ProviderError::AuthError(_)) => {}
        other => return Err(format!("401 gave {other:?}")),
    }
    ensure!(server.requests().len() == 1, "401 was retried");
    Ok("fields and order exact; 429 retried after backoff; 401 fails at once".into())
}

/// `None` when the live run is not configured.
fn criterion_11() -> Option<Check> {
    std::env::var(API_KEY_ENV).ok()?;
    let dev = PathBuf::from(std::env::var("SEMPROX_LIVE_DEV").ok()?);
    Some((|| {
        let endpoint = std::env::var("SEMPROX_LIVE_ENDPOINT").unwrap_or_else(|_| "https://api.openai.com/v1".into());
        let model = std::env::var("SEMPROX_LIVE_MODEL").unwrap_or_else(|_| "gpt-4-0125-preview".into());
        let gold = parse_gold(&read(&dev)).map_err(|e| e.to_string())?;
        let provider = HttpChatProvider::new(&endpoint, &Credential::Env(API_KEY_ENV.into()), RetryPolicy::default())
            .map_err(|e| e.to_string())?;
        let builder = PromptBuilder::new(Strategy::Custom2, None, None).map_err(|e| e.to_string())?;
        let config = ModelConfig::new(model, 0.9, 0.9);
        let options = RunOptions { trials: 1, concurrency: 4, run_dir: None };
        let trials = annotate_split(&gold, &builder, &config, &provider, &options).map_err(|e| e.to_string())?;
        let mean = summarize_trials(&trials).map_err(|e| e.to_string())?;
        let alpha = mean.alpha.ok_or("alpha undefined")?;
        let (lo, hi) = LIVE_ALPHA_BAND;
        ensure!((lo..=hi).contains(&alpha), "alpha {alpha:.3} outside [{lo}, {hi}]");
        Ok(format!("alpha {alpha:.3} on {} dev instances", gold.len()))
    })())
}

fn report(n: usize, name: &str, check: Check) -> bool {
    match check {
        Ok(detail) => {
            println!("PASS criterion {n}: {name} ({detail})");
            true
        }
        Err(why) => {
            println!("FAIL criterion {n}: {name}: {why}");
            false
        }
    }
}

fn guarded(f: fn() -> Check) -> Check {
    panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    })
}

fn main() -> ExitCode {
    let criteria: [Entry; 10] = [
        ("metric oracle equivalence", criterion_1),
        ("pinned metric values", criterion_2),
        ("golden prompts", criterion_3),
        ("pipeline determinism", criterion_4),
        ("filter and split correctness", criterion_5),
        ("echo end-to-end", criterion_6),
        ("sweep argmax and tie order", criterion_7),
        ("parser totality", criterion_8),
        ("fine-tune file validity", criterion_9),
        ("wire-protocol conformance", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        if !report(i + 1, name, guarded(f)) {
            failed += 1;
        }
    }
    match criterion_11() {
        Some(check) => {
            // Not gating: a live model can drift out of the band.
            report(11, "live dev-split sanity band (optional)", check);
        }
        None => println!("SKIP criterion 11: live dev-split sanity band (set ANNOT_API_KEY and SEMPROX_LIVE_DEV)"),
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
