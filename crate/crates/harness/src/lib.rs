//! File formats, SQLite access, the completion client and the command line
//! for the splitlink text-to-SQL harness. The pure pieces live in
//! `splitlink-core`.

pub mod catalog_io;
pub mod cli;
pub mod client;
pub mod dataset;
pub mod evaluate;
pub mod exec;
pub mod ingest;
pub mod orchestrate;

use std::path::Path;

use splitlink_core::promptgen::{PromptError, PromptTemplateSet};

pub use catalog_io::{attach_samples, load_catalogs, Catalogs};
pub use client::{Client, EndpointConfig, RetryPolicy};
pub use dataset::{emit_sft_dataset, Manifest};
pub use evaluate::{evaluate, EvalOptions};
pub use exec::{execution_accuracy, ExecOutcome};
pub use ingest::{load_split, Example, Split};
pub use orchestrate::{extract_sql, run_pipeline, RunSummary, TwoStageTrace};

/// File names looked up in a template directory. Missing files keep the
/// built-in text.
pub const TEMPLATE_FILES: [&str; 4] = [
    "generation.txt",
    "linking.txt",
    "generation_system.txt",
    "linking_system.txt",
];

#[derive(Debug, thiserror::Error)]
pub enum TemplateLoadError {
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error("{0}: {1}")]
    Template(String, PromptError),
}

pub fn load_templates(dir: &Path) -> Result<PromptTemplateSet, TemplateLoadError> {
    use splitlink_core::promptgen::{
        DEFAULT_GENERATION_SYSTEM, DEFAULT_GENERATION_TEMPLATE, DEFAULT_LINKING_SYSTEM, DEFAULT_LINKING_TEMPLATE,
    };
    let defaults = [
        DEFAULT_GENERATION_TEMPLATE,
        DEFAULT_LINKING_TEMPLATE,
        DEFAULT_GENERATION_SYSTEM,
        DEFAULT_LINKING_SYSTEM,
    ];
    let mut sources = Vec::new();
    for (name, default) in TEMPLATE_FILES.iter().zip(defaults) {
        let path = dir.join(name);
        sources.push(if path.is_file() {
            std::fs::read_to_string(&path).map_err(|e| TemplateLoadError::Io(path.display().to_string(), e))?
        } else {
            default.to_string()
        });
    }
    PromptTemplateSet::from_sources(&sources[0], &sources[1], &sources[2], &sources[3])
        .map_err(|e| TemplateLoadError::Template(dir.display().to_string(), e))
}
