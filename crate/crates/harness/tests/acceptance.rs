//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any criterion fails.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::process::Command;
use std::time::{Duration, Instant};

use common::{client, oracle_handler, Env};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rusqlite::Connection;
use splitlink::exec::{execution_accuracy, ExecOutcome};
use splitlink::orchestrate::read_traces;
use splitlink::{emit_sft_dataset, evaluate, run_pipeline, EvalOptions};
use splitlink_core::evalx::{exact_set_match, InferenceMode};
use splitlink_core::linker::{score_linking, summarize_linking};
use splitlink_core::promptgen::{prompt_table_blocks, PromptRecord, PromptTemplateSet, Stage};
use splitlink_core::sqlast::extract_link_targets;
use splitlink_core::{parse_sql, DatabaseCatalog, LinkTarget};
use splitlink_testkit::pairs::{safe_pair, unsafe_pair};
use splitlink_testkit::{corpus, fixture_dbs, write_examples, FixtureWorkspace, GeneratedQuery, MockReply, MockServer};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, ok: impl Into<String>, bad: impl Into<String>) -> Outcome {
    if cond {
        Ok(ok.into())
    } else {
        Err(bad.into())
    }
}

fn catalogs_of(ws: &FixtureWorkspace) -> HashMap<String, DatabaseCatalog> {
    ws.dbs.iter().map(|d| (d.db_id.to_string(), d.catalog())).collect()
}

/// 1. Extraction matches generator ground truth on >= 1000 queries.
fn extraction() -> Outcome {
    let start = Instant::now();
    let dbs = fixture_dbs();
    let cats: HashMap<_, _> = dbs.iter().map(|d| (d.db_id.to_string(), d.catalog())).collect();
    let queries = corpus(&dbs, 350, 1001);
    let mut mismatches = Vec::new();
    for q in &queries {
        match parse_sql(&q.sql, &cats[&q.db_id]) {
            Ok(ast) if extract_link_targets(&ast) == q.link => {}
            Ok(_) => mismatches.push(format!("mismatch: {}", q.sql)),
            Err(e) => mismatches.push(format!("{e}: {}", q.sql)),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let schemas: BTreeSet<&str> = queries.iter().map(|q| q.db_id.as_str()).collect();
    if let Some(first) = mismatches.first() {
        return Err(format!("{}/{} wrong, first: {first}", mismatches.len(), queries.len()));
    }
    check(
        queries.len() >= 1000 && schemas.len() >= 3 && secs < 30.0,
        format!("{} queries over {} schemas, {secs:.1}s", queries.len(), schemas.len()),
        format!("{} queries, {} schemas, {secs:.1}s", queries.len(), schemas.len()),
    )
}

fn pair_set(
    queries: &[GeneratedQuery],
    ws: &FixtureWorkspace,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(String, String, String)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let q = queries.choose(rng).unwrap();
        let (left, right) = match i % 3 {
            0 => {
                let p = safe_pair(q, rng);
                (p.left, p.right)
            }
            1 => {
                let p = unsafe_pair(q, ws.db(&q.db_id), rng);
                (p.left, p.right)
            }
            _ => {
                let same_db: Vec<&GeneratedQuery> = queries.iter().filter(|o| o.db_id == q.db_id).collect();
                (q.sql.clone(), same_db.choose(rng).unwrap().sql.clone())
            }
        };
        let (left, right) = if rng.gen_bool(0.5) {
            (left, right)
        } else {
            (right, left)
        };
        out.push((q.db_id.clone(), left, right));
    }
    out
}

/// 2. Value-sensitive EM implies EX on the populated fixture databases.
fn soundness() -> Outcome {
    let start = Instant::now();
    let ws = FixtureWorkspace::create().map_err(|e| e.to_string())?;
    let cats = catalogs_of(&ws);
    let queries = corpus(&ws.dbs, 200, 2002);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pairs = pair_set(&queries, &ws, 1800, &mut rng);
    let (mut em_true, mut violations, mut gold_failed) = (0, Vec::new(), 0);
    let mut dbs_hit = BTreeSet::new();
    for (db, pred, gold) in &pairs {
        let m = exact_set_match(pred, gold, &cats[db], false).map_err(|e| format!("gold failed to parse: {e}"))?;
        if !m.matched {
            continue;
        }
        em_true += 1;
        dbs_hit.insert(db.clone());
        match execution_accuracy(pred, gold, &ws.db_file(db), 10_000).map_err(|e| e.to_string())? {
            ExecOutcome::Compared(Ok(true)) => {}
            ExecOutcome::GoldFailed(_) => gold_failed += 1,
            other => violations.push(format!("{other:?}: {pred} | {gold}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if let Some(v) = violations.first() {
        return Err(format!("{} violations, first: {v}", violations.len()));
    }
    check(
        gold_failed == 0 && dbs_hit.len() == 3 && em_true > 0 && secs < 60.0,
        format!(
            "{} pairs, {em_true} EM-equal, 0 violations on {} dbs, {secs:.1}s",
            pairs.len(),
            dbs_hit.len()
        ),
        format!(
            "gold failures {gold_failed}, dbs {}, EM-equal {em_true}, {secs:.1}s",
            dbs_hit.len()
        ),
    )
}

/// 3. Reflexive on the corpus; symmetric over 500 pairs.
fn reflexivity_symmetry() -> Outcome {
    let ws = FixtureWorkspace::create().map_err(|e| e.to_string())?;
    let cats = catalogs_of(&ws);
    let queries = corpus(&ws.dbs, 350, 3003);
    for q in &queries {
        let m = exact_set_match(&q.sql, &q.sql, &cats[&q.db_id], false).map_err(|e| e.to_string())?;
        if !m.matched {
            return Err(format!("not reflexive: {}", q.sql));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pairs = pair_set(&queries, &ws, 500, &mut rng);
    let mut matched = 0;
    for (db, a, b) in &pairs {
        let ab = exact_set_match(a, b, &cats[db], false)
            .map_err(|e| e.to_string())?
            .matched;
        let ba = exact_set_match(b, a, &cats[db], false)
            .map_err(|e| e.to_string())?
            .matched;
        if ab != ba {
            return Err(format!("asymmetric: {a} | {b}"));
        }
        matched += ab as usize;
    }
    Ok(format!(
        "{} reflexive, {} symmetric pairs ({matched} equal)",
        queries.len(),
        pairs.len()
    ))
}

/// 4. oracle-link with a gold-echo endpoint scores EX = EM = 1.
fn upper_bound_identity() -> Outcome {
    let env = Env::new(100, 4004);
    let server = MockServer::start(oracle_handler(env.answers()));
    let (traces, summary) = run_pipeline(
        InferenceMode::OracleLink,
        &env.split,
        &env.catalogs,
        &PromptTemplateSet::default(),
        &client(server.base_url(), 0),
        false,
    );
    let report = evaluate(&traces, &env.split, &env.catalogs, &EvalOptions::default()).map_err(|e| e.to_string())?;
    check(
        report.n == 100 && summary.failed == 0 && report.ex_accuracy == 1.0 && report.em_accuracy == 1.0,
        format!(
            "n = {}, EX = {}, EM = {}",
            report.n, report.ex_accuracy, report.em_accuracy
        ),
        format!(
            "n = {}, failed = {}, EX = {}, EM = {}",
            report.n, summary.failed, report.ex_accuracy, report.em_accuracy
        ),
    )
}

/// 5. A perfect linker makes dts stage-2 prompts equal oracle-link's.
fn mode_collapse() -> Outcome {
    let env = Env::new(100, 5005);
    let server = MockServer::start(oracle_handler(env.answers()));
    let c = client(server.base_url(), 0);
    let t = PromptTemplateSet::default();
    let (dts, _) = run_pipeline(InferenceMode::Dts, &env.split, &env.catalogs, &t, &c, false);
    let (oracle, _) = run_pipeline(InferenceMode::OracleLink, &env.split, &env.catalogs, &t, &c, false);
    if dts.len() != 100 || oracle.len() != 100 {
        return Err(format!("{} / {} traces", dts.len(), oracle.len()));
    }
    let differing: Vec<&str> = dts
        .iter()
        .zip(&oracle)
        .filter(|(d, o)| d.stage2_prompt.is_none() || d.stage2_prompt != o.stage2_prompt)
        .map(|(d, _)| d.example_id.as_str())
        .collect();
    check(
        differing.is_empty(),
        "100/100 stage-2 prompts byte-identical",
        format!("{} differ, first {}", differing.len(), differing.first().unwrap_or(&"")),
    )
}

/// 6. Gen prompts show the gold tables, full prompts show all tables, and
///    emission is reproducible.
fn dataset_contract() -> Outcome {
    let ws = FixtureWorkspace::create().map_err(|e| e.to_string())?;
    let queries = corpus(&ws.dbs, 60, 6006);
    let rows: Vec<_> = queries
        .iter()
        .enumerate()
        .map(|(i, q)| (q.db_id.clone(), format!("Question number {i}?"), q.sql.clone()))
        .collect();
    let examples = ws.root().join("train.json");
    write_examples(&examples, &rows).map_err(|e| e.to_string())?;
    let mut cats = splitlink::load_catalogs(&ws.tables_json()).map_err(|e| e.to_string())?;
    for (id, c) in cats.iter_mut() {
        splitlink::attach_samples(c, &ws.db_file(id), 3).map_err(|e| e.to_string())?;
    }
    let split = splitlink::load_split(&examples, "train", &cats, &ws.db_root()).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t = PromptTemplateSet::default();
    let read = |stage: Stage, name: &str| -> Result<(Vec<PromptRecord>, String, Vec<u8>), String> {
        let path = dir.path().join(name);
        let emitted = emit_sft_dataset(&split, &cats, stage, &t, &path).map_err(|e| e.to_string())?;
        let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
        let recs = String::from_utf8_lossy(&bytes)
            .lines()
            .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        Ok((recs, emitted.manifest.sha256, bytes))
    };
    let (gen, gen_hash, gen_bytes) = read(Stage::Gen, "gen-1.jsonl")?;
    let (_, gen_hash2, gen_bytes2) = read(Stage::Gen, "gen-2.jsonl")?;
    let (full, full_hash, _) = read(Stage::Full, "full-1.jsonl")?;
    let (_, full_hash2, _) = read(Stage::Full, "full-2.jsonl")?;
    if gen.len() != queries.len() || full.len() != queries.len() {
        return Err(format!(
            "{} gen / {} full records for {} examples",
            gen.len(),
            full.len(),
            queries.len()
        ));
    }
    for (rec, q) in gen.iter().zip(&queries) {
        let blocks: BTreeSet<String> = prompt_table_blocks(&rec.prompt)
            .iter()
            .map(|b| b.to_lowercase())
            .collect();
        if blocks != q.link.tables {
            return Err(format!(
                "{}: blocks {blocks:?}, gold {:?}",
                rec.example_id, q.link.tables
            ));
        }
    }
    for rec in &full {
        let blocks: BTreeSet<String> = prompt_table_blocks(&rec.prompt)
            .iter()
            .map(|b| b.to_lowercase())
            .collect();
        let all: BTreeSet<String> = cats[&rec.db_id].table_names().map(String::from).collect();
        if blocks != all {
            return Err(format!("{}: full prompt shows {blocks:?}", rec.example_id));
        }
    }
    check(
        gen_hash == gen_hash2 && full_hash == full_hash2 && gen_bytes == gen_bytes2,
        format!("{} gen + {} full records, reruns hash-equal", gen.len(), full.len()),
        "rerun hashes differ",
    )
}

fn random_target(cat: &DatabaseCatalog, rng: &mut ChaCha8Rng) -> LinkTarget {
    let mut t = LinkTarget::default();
    for table in &cat.tables {
        if rng.gen_bool(0.4) {
            t.tables.insert(table.name.normal.clone());
            for c in &table.columns {
                if rng.gen_bool(0.3) {
                    t.columns.insert((table.name.normal.clone(), c.name.normal.clone()));
                }
            }
        }
    }
    t
}

/// Precision and recall by counting list elements, sharing no code with
/// the scorer.
fn recount(pred: &[String], gold: &[String]) -> (f64, f64) {
    let hits = pred.iter().filter(|p| gold.contains(p)).count() as f64;
    match (pred.len(), gold.len()) {
        (0, 0) => (1.0, 1.0),
        (0, _) | (_, 0) => (0.0, 0.0),
        (p, g) => (hits / p as f64, hits / g as f64),
    }
}

fn elements(t: &LinkTarget) -> Vec<String> {
    t.tables
        .iter()
        .cloned()
        .chain(t.columns.iter().map(|(a, b)| format!("{a}.{b}")))
        .collect()
}

/// 7. Linking scores agree with a brute-force recount.
fn linking_metrics() -> Outcome {
    let cats: Vec<DatabaseCatalog> = fixture_dbs().iter().map(|d| d.catalog()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut scores = Vec::new();
    let (mut sum_p, mut sum_r) = (0.0, 0.0);
    for i in 0..200 {
        let cat = &cats[i % cats.len()];
        let gold = random_target(cat, &mut rng);
        let pred = if i % 10 == 0 {
            gold.clone()
        } else {
            random_target(cat, &mut rng)
        };
        let s = score_linking(&pred, &gold);
        let (p, r) = recount(&elements(&pred), &elements(&gold));
        let exact = elements(&pred) == elements(&gold);
        if (s.precision - p).abs() > 1e-9 || (s.recall - r).abs() > 1e-9 || s.exact_match != exact {
            return Err(format!("pair {i}: scored {s:?}, recount ({p}, {r}, {exact})"));
        }
        sum_p += p;
        sum_r += r;
        scores.push(s);
        let id = score_linking(&gold, &gold);
        if !(id.precision == 1.0 && id.recall == 1.0 && id.exact_match) {
            return Err(format!("identity pair {i} scored {id:?}"));
        }
    }
    let summary = summarize_linking(&scores).ok_or("no scores")?;
    check(
        (summary.precision - sum_p / 200.0).abs() <= 1e-9 && (summary.recall - sum_r / 200.0).abs() <= 1e-9,
        format!(
            "200 pairs, macro PR {:.4} RE {:.4} match recount",
            summary.precision, summary.recall
        ),
        "macro averages differ from recount",
    )
}

/// 8. Row order matters only when the gold query orders its output.
fn ordering_semantics() -> Outcome {
    let ws = FixtureWorkspace::create().map_err(|e| e.to_string())?;
    let db = ws.db_file("concert_singer");
    let conn = Connection::open(&db).map_err(|e| e.to_string())?;
    let names = |sql: &str| -> Result<Vec<String>, String> {
        let mut s = conn.prepare(sql).map_err(|e| e.to_string())?;
        let rows = s.query_map([], |r| r.get::<_, String>(0)).map_err(|e| e.to_string())?;
        rows.collect::<Result<_, _>>().map_err(|e| e.to_string())
    };
    let unordered_gold = "SELECT Name FROM singer";
    let permuted = "SELECT Name FROM singer ORDER BY Name DESC";
    let ordered_gold = "SELECT Name FROM singer ORDER BY Singer_ID";
    let reordered = "SELECT Name FROM singer ORDER BY Singer_ID DESC";
    if names(unordered_gold)? == names(permuted)? || names(ordered_gold)? == names(reordered)? {
        return Err("fixture rows do not actually change order".into());
    }
    let run = |p: &str, g: &str| execution_accuracy(p, g, &db, 5_000).map_err(|e| e.to_string());
    let accepts = run(permuted, unordered_gold)? == ExecOutcome::Compared(Ok(true));
    let rejects = run(reordered, ordered_gold)? == ExecOutcome::Compared(Ok(false));
    check(
        accepts && rejects,
        "unordered gold accepts permutation; ORDER BY gold rejects it",
        format!("accepts = {accepts}, rejects = {rejects}"),
    )
}

/// 9. 10% endpoint failures: the run completes, exits 0, counts failures
///    and every non-failed example is scored.
fn resilience() -> Outcome {
    let env = Env::new(100, 9009);
    let answers = env.answers();
    let oracle = oracle_handler(answers);
    let server = MockServer::start(move |r| {
        if r.sequence % 10 == 0 {
            MockReply::Status(500)
        } else {
            oracle(r)
        }
    });
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let common_args = |sub: &str| -> Vec<String> {
        [
            sub,
            "--tables",
            &env.ws.tables_json().display().to_string(),
            "--examples",
            &env.examples.display().to_string(),
            "--db-root",
            &env.ws.db_root().display().to_string(),
            "--out",
            &out.path().display().to_string(),
        ]
        .map(String::from)
        .to_vec()
    };
    let bin = env!("CARGO_BIN_EXE_splitlink");
    let mut infer = common_args("infer");
    infer.extend(
        [
            "--mode",
            "dts",
            "--base-url",
            &server.base_url(),
            "--model",
            "m",
            "--max-retries",
            "0",
            "--max-parallel",
            "4",
        ]
        .map(String::from),
    );
    let status = Command::new(bin).args(&infer).output().map_err(|e| e.to_string())?;
    if status.status.code() != Some(0) {
        return Err(format!(
            "infer exited {:?}: {}",
            status.status.code(),
            String::from_utf8_lossy(&status.stderr)
        ));
    }
    let traces = read_traces(&out.path().join("traces.jsonl")).map_err(|e| e.to_string())?;
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("run_summary.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let failed = traces.iter().filter(|t| t.failure.is_some()).count();
    let mut eval = common_args("eval");
    eval.extend([
        "--traces".to_string(),
        out.path().join("traces.jsonl").display().to_string(),
    ]);
    let status = Command::new(bin).args(&eval).output().map_err(|e| e.to_string())?;
    if status.status.code() != Some(0) {
        return Err(format!("eval exited {:?}", status.status.code()));
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("report.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let verdicts = report["verdicts"].as_array().ok_or("no verdicts")?;
    let ok_ids: BTreeSet<&str> = traces
        .iter()
        .filter(|t| t.failure.is_none())
        .map(|t| t.example_id.as_str())
        .collect();
    let scored_ok = verdicts
        .iter()
        .filter(|v| ok_ids.contains(v["example_id"].as_str().unwrap_or("")))
        .filter(|v| v["execution_match"] == true)
        .count();
    check(
        traces.len() == 100
            && failed > 0
            && summary["failed"] == failed
            && verdicts.len() == 100
            && scored_ok == ok_ids.len(),
        format!(
            "{} requests, {failed} examples failed and counted, {} others all scored correct",
            server.request_count(),
            ok_ids.len()
        ),
        format!(
            "traces {}, failed {failed}, summary {}, verdicts {}, scored ok {scored_ok}/{}",
            traces.len(),
            summary["failed"],
            verdicts.len(),
            ok_ids.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("extraction oracle", extraction),
        ("metric soundness (EM implies EX)", soundness),
        ("reflexivity and symmetry", reflexivity_symmetry),
        ("upper-bound identity", upper_bound_identity),
        ("mode collapse under perfect linking", mode_collapse),
        ("dataset contract", dataset_contract),
        ("linking metrics", linking_metrics),
        ("ordering semantics", ordering_semantics),
        ("resilience", resilience),
    ];
    let start = Instant::now();
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: {name}: PASS ({detail}) [{secs:.1}s]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {}: {name}: FAIL ({detail}) [{secs:.1}s]", i + 1);
            }
        }
    }
    let total = start.elapsed();
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        criteria.len() - failures,
        criteria.len(),
        total.as_secs_f64()
    );
    if total > Duration::from_secs(180) {
        println!("acceptance: over the 3 minute budget");
        failures += 1;
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
