use std::fs;
use std::path::{Path, PathBuf};

use crate::experiments::{execute, Experiment};
use crate::manifest::{Manifest, ARTIFACT_VERSION};
use crate::report::{
    append_record, summary_path, unix_ms, write_file, DiagnosticKind, Format, RunRecord, Status, Summary, RUN_FORMAT,
    RUN_FORMAT_VERSION,
};
use crate::{CliError, EXIT_INFEASIBLE, EXIT_OK};

pub const RUN_LOG: &str = "runs.jsonl";

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Output root; each run writes to `<out>/<name>-<hash>/`.
    pub out: PathBuf,
    pub format: Format,
    pub gnuplot: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            out: PathBuf::from("runs"),
            format: Format::Csv,
            gnuplot: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub summary: Summary,
}

impl RunOutcome {
    /// 0, or 3 when some instance hit an unachievable tolerance or a
    /// rejected claim.
    pub fn exit_code(&self) -> i32 {
        match self.summary.status {
            Status::Ok => EXIT_OK,
            Status::Infeasible => EXIT_INFEASIBLE,
        }
    }

    pub fn table_path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

/// Runs one subcommand. The run directory is rewritten in full; the run log
/// in the output root gets one appended line, also for failed runs.
pub fn run(exp: Experiment, manifest: &Manifest, opts: &RunOptions) -> Result<RunOutcome, CliError> {
    manifest.validate()?;
    let hash = manifest.hash(exp.name())?;
    let dir = opts.out.join(format!("{}-{hash}", manifest.name));
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let log = opts.out.join(RUN_LOG);
    let started = unix_ms();
    let mut record = RunRecord {
        subcommand: exp.name().into(),
        manifest_hash: hash.clone(),
        manifest: manifest.clone(),
        run_dir: Some(dir.clone()),
        started_unix_ms: started,
        finished_unix_ms: started,
        status: String::new(),
        tables: Vec::new(),
        certificates: Vec::new(),
        diagnostics: Vec::new(),
        error: None,
    };
    let output = match execute(exp, manifest) {
        Ok(o) => o,
        Err(e) => {
            record.finished_unix_ms = unix_ms();
            record.status = e.kind().into();
            record.error = Some(e.to_string());
            append_record(&log, &record)?;
            return Err(e);
        }
    };
    let mut tables = Vec::new();
    for t in &output.tables {
        tables.extend(t.write(&dir, opts.format, opts.gnuplot)?);
    }
    let infeasible = output
        .diagnostics
        .iter()
        .any(|d| matches!(d.kind, DiagnosticKind::ToleranceUnachievable | DiagnosticKind::ClaimRejected));
    let summary = Summary {
        format: RUN_FORMAT.into(),
        version: RUN_FORMAT_VERSION,
        artifact_version: ARTIFACT_VERSION.into(),
        subcommand: exp.name().into(),
        manifest_hash: hash,
        manifest: manifest.clone(),
        status: if infeasible { Status::Infeasible } else { Status::Ok },
        tables: tables.clone(),
        certificates: output.certificates,
        diagnostics: output.diagnostics,
        checks: output.checks,
    };
    let json = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    write_file(&dir, "summary.json", &json)?;
    record.finished_unix_ms = unix_ms();
    record.status = if infeasible { "infeasible" } else { "ok" }.into();
    record.tables = tables;
    record.certificates = summary.certificates.clone();
    record.diagnostics = summary.diagnostics.clone();
    append_record(&log, &record)?;
    Ok(RunOutcome { dir, summary })
}

/// Reads the summary of a finished run.
pub fn load_summary(dir: &Path) -> Result<Summary, CliError> {
    let path = summary_path(dir);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Corrupt(format!("{}: {e}", path.display())))
}
