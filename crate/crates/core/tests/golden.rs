//! Byte-exact snapshots of prompt rendering. Set `SPLITLINK_BLESS=1` to
//! rewrite the files after an intended change, then review the diff.

use std::path::PathBuf;

use splitlink_core::catalog::{ColumnType, DatabaseCatalog, ForeignKey, TableDef};
use splitlink_core::promptgen::{build_prompt, render_schema, PromptTemplateSet, Stage};

fn catalog() -> DatabaseCatalog {
    use ColumnType::*;
    let mut tables = vec![
        TableDef::new(
            "stadium",
            &[
                ("Stadium_ID", Number),
                ("Location", Text),
                ("Name", Text),
                ("Capacity", Number),
            ],
            &["Stadium_ID"],
        ),
        TableDef::new(
            "singer",
            &[
                ("Singer_ID", Number),
                ("Name", Text),
                ("Country", Text),
                ("Age", Number),
            ],
            &["Singer_ID"],
        ),
        TableDef::new(
            "singer_in_concert",
            &[("concert_ID", Number), ("Singer_ID", Number)],
            &["concert_ID", "Singer_ID"],
        ),
    ];
    let s = |row: &[&str]| row.iter().map(|c| c.to_string()).collect::<Vec<_>>();
    tables[0]
        .set_sample_rows(vec![
            s(&["1", "Raith Rovers", "Stark's Park", "10104"]),
            s(&["2", "Ayr United", "Somerset Park", "11998"]),
            s(&["3", "East Fife", "Bayview Stadium", "2000"]),
        ])
        .unwrap();
    tables[1]
        .set_sample_rows(vec![
            s(&["1", "Joe Sharp", "Netherlands", "52"]),
            s(&["2", "Timbaland", "United States", "NULL"]),
        ])
        .unwrap();
    DatabaseCatalog::new(
        "concert_singer",
        tables,
        vec![ForeignKey::new("singer_in_concert", "singer_id", "singer", "singer_id")],
    )
    .unwrap()
}

fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    if std::env::var_os("SPLITLINK_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(
        actual, expected,
        "{name} changed; rerun with SPLITLINK_BLESS=1 if intended"
    );
}

#[test]
fn schema_rendering_snapshot() {
    golden("schema.txt", &render_schema(&catalog(), None));
}

#[test]
fn link_prompt_snapshot() {
    let prompt = build_prompt(
        Stage::Link,
        "How many singers performed in each stadium?",
        &catalog(),
        None,
        &PromptTemplateSet::default(),
    )
    .unwrap();
    golden("link_prompt.txt", &prompt);
}
