use std::path::Path;

use trig_core::pipeline::{compute_stats, load_benchmark};

use crate::error::{CliError, CliResult, Outcome};
use crate::report::{
    digest_file, table_path, write_json, write_text, Conventions, ReportDocument, RunConfig, ToolInfo,
};

pub fn cmd_stats(bench: &Path, out: &Path) -> CliResult {
    let samples = load_benchmark(bench).map_err(|e| CliError::bench(bench, e))?;
    let table = compute_stats(&samples).map_err(|e| CliError::Schema(format!("{}: {e}", bench.display())))?;
    let doc = ReportDocument {
        tool: ToolInfo::default(),
        command: "stats".into(),
        config: RunConfig {
            paths: [("bench".to_string(), bench.display().to_string())].into(),
            ..RunConfig::default()
        },
        conventions: Conventions::new(false),
        inputs: vec![digest_file("bench", bench)?],
        missing_responses: vec![],
        skipped: vec![],
        provenance: None,
        result: table,
    };
    write_json(out, &doc)?;
    write_text(&table_path(out), &doc.result.render_text())?;
    Ok(Outcome::Success)
}
