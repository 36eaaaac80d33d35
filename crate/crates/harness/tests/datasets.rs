mod common;

use std::collections::BTreeSet;

use rusqlite::Connection;
use splitlink::catalog_io::{attach_samples, load_catalogs};
use splitlink::emit_sft_dataset;
use splitlink::ingest::load_split;
use splitlink_core::promptgen::{prompt_table_blocks, PromptRecord, PromptTemplateSet, Stage};
use splitlink_core::ForeignKey;
use splitlink_testkit::{corpus, write_examples, FixtureWorkspace};

#[test]
fn fixture_catalogs_resolve() {
    let ws = FixtureWorkspace::create().unwrap();
    let a = load_catalogs(&ws.tables_json()).unwrap();
    let b = load_catalogs(&ws.tables_json()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 3);
    let cs = &a["concert_singer"];
    // fixture pairs [[18, 1], [20, 15], [21, 8]] resolved by hand
    assert_eq!(
        cs.foreign_keys,
        [
            ForeignKey::new("concert", "stadium_id", "stadium", "stadium_id"),
            ForeignKey::new("singer_in_concert", "concert_id", "concert", "concert_id"),
            ForeignKey::new("singer_in_concert", "singer_id", "singer", "singer_id"),
        ]
    );
    for c in a.values() {
        c.validate().unwrap();
    }
}

#[test]
fn samples_are_the_first_rowids() {
    let ws = FixtureWorkspace::create().unwrap();
    let mut cats = load_catalogs(&ws.tables_json()).unwrap();
    for (id, cat) in cats.iter_mut() {
        let before = cat.clone();
        attach_samples(cat, &ws.db_file(id), 3).unwrap();
        let conn = Connection::open(ws.db_file(id)).unwrap();
        for (t, b) in cat.tables.iter().zip(&before.tables) {
            assert_eq!(t.columns, b.columns);
            let first_col = &t.columns[0].name.original;
            let mut stmt = conn
                .prepare(&format!(
                    "SELECT \"{first_col}\" FROM \"{}\" ORDER BY rowid LIMIT 3",
                    t.name.original
                ))
                .unwrap();
            let expected: Vec<String> = stmt
                .query_map([], |r| r.get::<_, rusqlite::types::Value>(0))
                .unwrap()
                .map(|v| match v.unwrap() {
                    rusqlite::types::Value::Integer(i) => i.to_string(),
                    rusqlite::types::Value::Text(s) => s,
                    other => format!("{other:?}"),
                })
                .collect();
            let got: Vec<String> = t.sample_rows.iter().map(|r| r[0].clone()).collect();
            assert_eq!(got, expected, "{id}.{}", t.name.original);
        }
    }
}

#[test]
fn gen_prompts_show_exactly_the_used_tables() {
    let ws = FixtureWorkspace::create().unwrap();
    let queries = corpus(&ws.dbs, 40, 77);
    let rows: Vec<_> = queries
        .iter()
        .enumerate()
        .map(|(i, q)| (q.db_id.clone(), format!("question {i}"), q.sql.clone()))
        .collect();
    let examples = ws.root().join("train.json");
    write_examples(&examples, &rows).unwrap();
    let cats = load_catalogs(&ws.tables_json()).unwrap();
    let split = load_split(&examples, "train", &cats, &ws.db_root()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gen.jsonl");
    let emitted = emit_sft_dataset(&split, &cats, Stage::Gen, &PromptTemplateSet::default(), &out).unwrap();
    assert_eq!(emitted.manifest.count, queries.len());
    let text = std::fs::read_to_string(&out).unwrap();
    for (line, q) in text.lines().zip(&queries) {
        let rec: PromptRecord = serde_json::from_str(line).unwrap();
        let blocks: BTreeSet<String> = prompt_table_blocks(&rec.prompt)
            .into_iter()
            .map(|b| b.to_lowercase())
            .collect();
        // ground truth recorded by the generator, not re-extracted
        assert_eq!(blocks, q.link.tables, "{}", q.sql);
        assert_eq!(rec.completion, q.sql);
    }
}
