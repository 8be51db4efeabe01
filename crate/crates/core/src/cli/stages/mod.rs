//! Pipeline stages. Each reads only configuration and the artifacts of
//! earlier stages under the output directory.

mod analyze;
mod detect;
mod ingest;
mod simulate;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::manifest::{format_timestamp, relative, CallStats, StageRecord, StageStatus};
use super::{CliError, Context};
use crate::gateway::Gateway;
use crate::io::{file_digest, write_json_pretty, write_jsonl, CsvTable};

pub use analyze::cmd_analyze;
pub use detect::cmd_detect;
pub use ingest::cmd_ingest;
pub use simulate::cmd_simulate;

/// Tracks a stage's inputs and written files for its manifest record.
pub(crate) struct StageLog<'a> {
    ctx: &'a Context,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    notes: Vec<String>,
}

impl<'a> StageLog<'a> {
    fn new(ctx: &'a Context) -> Self {
        StageLog {
            ctx,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn name(&self, path: &Path) -> String {
        if path.starts_with(&self.ctx.out) {
            relative(&self.ctx.out, path)
        } else if path.starts_with(&self.ctx.cfg.base_dir) && !self.ctx.cfg.base_dir.as_os_str().is_empty() {
            relative(&self.ctx.cfg.base_dir, path)
        } else {
            path.display().to_string()
        }
    }

    /// Records an input's digest; a missing artifact names the stage to run.
    fn input(&mut self, path: &Path, producer: &str) -> Result<PathBuf, CliError> {
        if !path.is_file() {
            return Err(CliError::Runtime(format!(
                "missing artifact {}; run `threadsim {producer}` first",
                path.display()
            )));
        }
        self.inputs.insert(self.name(path), file_digest(path)?);
        Ok(path.to_path_buf())
    }

    fn wrote(&mut self, path: &Path) {
        self.outputs.push(self.name(path));
    }

    fn jsonl<T: Serialize>(&mut self, path: &Path, items: impl IntoIterator<Item = T>) -> Result<(), CliError> {
        write_jsonl(path, items)?;
        self.wrote(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, path: &Path, value: &T) -> Result<(), CliError> {
        write_json_pretty(path, value)?;
        self.wrote(path);
        Ok(())
    }

    fn csv(&mut self, path: &Path, table: &CsvTable) -> Result<(), CliError> {
        table.write(path)?;
        self.wrote(path);
        Ok(())
    }

    fn bytes(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        crate::io::write_atomic(path, bytes)?;
        self.wrote(path);
        Ok(())
    }

    fn note(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        self.notes.push(msg);
    }

    fn finish(mut self, stage: &str, status: StageStatus, gateway: Option<&Gateway>) -> Result<(), CliError> {
        let calls = gateway.map(|g| {
            let c = g.counters();
            CallStats {
                backend_calls: c.backend_calls,
                cache_hits: c.cache_hits,
                cache_misses: c.cache_misses,
                budget_used: g.budget().used(),
                budget_max: g.budget().max_calls(),
            }
        });
        if let Some(g) = gateway {
            g.cache().compact()?;
        }
        self.outputs.sort();
        self.outputs.dedup();
        self.ctx.record_stage(
            stage,
            StageRecord {
                status,
                timestamp: format_timestamp(self.ctx.timestamp),
                inputs: self.inputs,
                outputs: self.outputs,
                calls,
                notes: self.notes,
            },
        )
    }
}

pub(crate) fn stage_dir(ctx: &Context, stage: &str, sub: &str) -> PathBuf {
    ctx.out.join(stage).join(sub)
}

pub(crate) fn temp_dir(ctx: &Context, stage: &str, sub: &str, t: f64) -> PathBuf {
    stage_dir(ctx, stage, sub).join(super::config::temperature_tag(t))
}

pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    crate::io::read_jsonl(path).map_err(|e| CliError::Runtime(e.to_string()))
}
