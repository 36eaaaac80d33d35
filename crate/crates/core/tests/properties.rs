use proptest::prelude::*;
use splitlink_core::catalog::{ColumnType, DatabaseCatalog, ForeignKey, TableDef};
use splitlink_core::linker::{parse_linker_output, score_linking};
use splitlink_core::LinkTarget;

fn catalog() -> DatabaseCatalog {
    use ColumnType::*;
    DatabaseCatalog::new(
        "concert_singer",
        vec![
            TableDef::new(
                "stadium",
                &[("Stadium_ID", Number), ("Name", Text), ("Capacity", Number)],
                &["Stadium_ID"],
            ),
            TableDef::new(
                "singer",
                &[("Singer_ID", Number), ("Name", Text), ("Is_male", Boolean)],
                &["Singer_ID"],
            ),
            TableDef::new(
                "concert",
                &[("concert_ID", Number), ("Stadium_ID", Number), ("Year", Time)],
                &["concert_ID"],
            ),
            TableDef::new("Song Titles", &[("Title", Text), ("Singer ID", Number)], &[]),
        ],
        vec![ForeignKey::new("concert", "stadium_id", "stadium", "stadium_id")],
    )
    .unwrap()
}

/// A consistent target: a random subset of tables, and random columns of
/// the chosen tables.
fn target() -> impl Strategy<Value = LinkTarget> {
    let cat = catalog();
    let n_cols: usize = cat.tables.iter().map(|t| t.columns.len()).sum();
    (
        proptest::collection::vec(any::<bool>(), cat.tables.len()),
        proptest::collection::vec(any::<bool>(), n_cols),
    )
        .prop_map(move |(tables, cols)| {
            let mut t = LinkTarget::default();
            let mut k = 0;
            for (table, keep) in cat.tables.iter().zip(tables) {
                for c in &table.columns {
                    if keep && cols[k] {
                        t.columns.insert((table.name.normal.clone(), c.name.normal.clone()));
                    }
                    k += 1;
                }
                if keep {
                    t.tables.insert(table.name.normal.clone());
                }
            }
            t
        })
}

proptest! {
    #[test]
    fn serialize_then_parse_is_identity(t in target()) {
        let cat = catalog();
        let parsed = parse_linker_output(&t.serialize(&cat), &cat);
        prop_assert_eq!(&parsed.target, &t);
        prop_assert!(parsed.warnings.is_empty(), "{:?}", parsed.warnings);
    }

    #[test]
    fn self_score_is_perfect(t in target()) {
        let s = score_linking(&t, &t);
        prop_assert!(s.exact_match);
        prop_assert_eq!((s.precision, s.recall), (1.0, 1.0));
    }

    #[test]
    fn exact_match_implies_full_scores(a in target(), b in target()) {
        let s = score_linking(&a, &b);
        if s.exact_match {
            prop_assert_eq!((s.precision, s.recall), (1.0, 1.0));
        }
        prop_assert!((0.0..=1.0).contains(&s.precision) && (0.0..=1.0).contains(&s.recall));
        // scores mirror when the roles swap
        let r = score_linking(&b, &a);
        prop_assert_eq!((s.precision, s.recall), (r.recall, r.precision));
    }

    #[test]
    fn parser_is_total(text in ".{0,200}") {
        let cat = catalog();
        let parsed = parse_linker_output(&text, &cat);
        prop_assert!(parsed.target.is_consistent());
    }
}
