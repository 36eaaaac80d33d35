//! Supervised fine-tuning datasets for the three prompt stages.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use splitlink_core::evalx::Excluded;
use splitlink_core::promptgen::{build_prompt, PromptRecord, PromptTemplateSet, Stage};

use crate::catalog_io::Catalogs;
use crate::ingest::Split;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub count: usize,
    pub quarantined: Vec<String>,
    /// Hex SHA-256 of the dataset file.
    pub sha256: String,
}

#[derive(Debug, Clone)]
pub struct Emitted {
    pub manifest: Manifest,
    /// Quarantined examples with their reasons.
    pub quarantine: Vec<Excluded>,
}

/// Renders one record per example whose gold query parses. Rendering runs in
/// parallel; lines are written in split order by this thread alone.
pub fn emit_sft_dataset(
    split: &Split,
    catalogs: &Catalogs,
    stage: Stage,
    templates: &PromptTemplateSet,
    out: &Path,
) -> std::io::Result<Emitted> {
    let rendered: Vec<Result<PromptRecord, String>> = split
        .examples
        .par_iter()
        .map(|ex| {
            let catalog = &catalogs[&ex.db_id];
            let link = ex.gold_link(catalog)?;
            let prompt =
                build_prompt(stage, &ex.question, catalog, Some(&link.tables), templates).map_err(|e| e.to_string())?;
            let completion = match stage {
                Stage::Link => link.serialize(catalog),
                Stage::Full | Stage::Gen => ex.gold_sql.trim().to_string(),
            };
            Ok(PromptRecord {
                example_id: ex.example_id.clone(),
                stage,
                prompt,
                completion,
                db_id: ex.db_id.clone(),
            })
        })
        .collect();

    let mut hasher = Sha256::new();
    let mut w = BufWriter::new(File::create(out)?);
    let mut count = 0;
    let mut quarantine = Vec::new();
    for (ex, rec) in split.examples.iter().zip(rendered) {
        match rec {
            Ok(rec) => {
                let mut line = serde_json::to_string(&rec).expect("records serialize");
                line.push('\n');
                hasher.update(line.as_bytes());
                w.write_all(line.as_bytes())?;
                count += 1;
            }
            Err(reason) => quarantine.push(Excluded {
                example_id: ex.example_id.clone(),
                reason,
            }),
        }
    }
    w.flush()?;
    Ok(Emitted {
        manifest: Manifest {
            count,
            quarantined: quarantine.iter().map(|q| q.example_id.clone()).collect(),
            sha256: hex::encode(hasher.finalize()),
        },
        quarantine,
    })
}
