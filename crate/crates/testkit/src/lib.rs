//! Test support for splitlink: fixture databases, a query generator with
//! ground truth, labeled query pairs and a mock completion endpoint.

pub mod fixtures;
pub mod mock;
pub mod pairs;
pub mod querygen;

pub use fixtures::{fixture_dbs, write_examples, FixtureDb, FixtureWorkspace};
pub use mock::{ChatRequest, MockReply, MockServer};
pub use pairs::{labeled_pairs, PairLabel, QueryPair};
pub use querygen::{corpus, GeneratedQuery, QueryGenerator};

/// A split of `n` generated examples spread over the fixture databases, as
/// `(db_id, question, query)`. Questions are unique.
pub fn generated_split(dbs: &[FixtureDb], n: usize, seed: u64) -> Vec<(String, String, String)> {
    let per_db = n.div_ceil(dbs.len());
    let queries = corpus(dbs, per_db, seed);
    (0..n)
        .map(|i| {
            // Interleave databases.
            let q = &queries[(i % dbs.len()) * per_db + i / dbs.len()];
            (
                q.db_id.clone(),
                format!("What does query {i} on {} return?", q.db_id),
                q.sql.clone(),
            )
        })
        .collect()
}
