use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use narrowops_cli::{run, verify_run, CliError, Experiment, Format, Manifest, RunOptions, EXIT_CERTIFICATE, EXIT_OK};

#[derive(Parser)]
#[command(name = "narrowops", version, about = "Certified experiments with narrow operators on dyadic L_p")]
struct Cli {
    /// TOML experiment manifest; defaults apply when omitted.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Overrides the manifest seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root (the manifest's `output`, else `runs`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the parallel searches.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Largest atom count searched by exact enumeration.
    #[arg(long = "exact-cap", global = true)]
    exact_cap: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Also write whitespace-separated `.dat` columns for gnuplot.
    #[arg(long, global = true)]
    gnuplot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimal ‖Tf‖ over signs on the whole space.
    Defect,
    /// Haar-like tree with small images node by node.
    Tree,
    /// Sign defect maximized over coarse equal-block partitions.
    Hpp,
    /// Unconditional constant of the classical Haar system per depth.
    Uncond,
    /// Table of the martingale-transform constants.
    Burkholder,
    /// Blocking factorization T̃ = U + V of sliced random operators.
    Factorize,
    /// Lower-bound claim check on the Haar slicing of the identity.
    LbCheck,
    /// Unconditional norm of Haar slicings across exponents.
    Thm33,
    /// Sign with small image for operators from L_1 with an unconditional target.
    Thm43,
    /// As thm43, validating the target basis first.
    Cor44,
    /// Averaging operator separating the two narrowness notions.
    Counterexample,
    /// Bounded-coefficient sign construction over step counts and depths.
    Signbuild,
    /// Rechecks the certificates stored in a run directory or summary file.
    Verify { record: PathBuf },
}

fn experiment(c: &Command) -> Option<Experiment> {
    Some(match c {
        Command::Defect => Experiment::Defect,
        Command::Tree => Experiment::Tree,
        Command::Hpp => Experiment::Hpp,
        Command::Uncond => Experiment::Uncond,
        Command::Burkholder => Experiment::Burkholder,
        Command::Factorize => Experiment::Factorize,
        Command::LbCheck => Experiment::LbCheck,
        Command::Thm33 => Experiment::Thm33,
        Command::Thm43 => Experiment::Thm43,
        Command::Cor44 => Experiment::Cor44,
        Command::Counterexample => Experiment::Counterexample,
        Command::Signbuild => Experiment::Signbuild,
        Command::Verify { .. } => return None,
    })
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.diagnostic());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", serde_json::json!({"status": "warning", "message": e.to_string()}));
        }
    }
    if let Command::Verify { record } = &cli.command {
        return match verify_run(record) {
            Ok(rep) if rep.passed() => {
                println!("{}", serde_json::json!({"status": "pass", "checked": rep.checked}));
                ExitCode::from(EXIT_OK as u8)
            }
            Ok(rep) => {
                let failures: Vec<_> = rep
                    .failures
                    .iter()
                    .map(|f| serde_json::json!({"certificate": f.certificate, "detail": f.detail}))
                    .collect();
                eprintln!("{}", serde_json::json!({"status": "fail", "checked": rep.checked, "failures": failures}));
                ExitCode::from(EXIT_CERTIFICATE as u8)
            }
            Err(e) => fail(&e),
        };
    }
    let exp = experiment(&cli.command).expect("verify handled above");
    let mut manifest = match &cli.manifest {
        Some(path) => match Manifest::load(path) {
            Ok(m) => m,
            Err(e) => return fail(&e),
        },
        None => Manifest {
            name: exp.name().into(),
            ..Manifest::default()
        },
    };
    if let Some(seed) = cli.seed {
        manifest.seed = seed;
    }
    if let Some(cap) = cli.exact_cap {
        manifest.budget.exact_cap = cap;
    }
    let opts = RunOptions {
        out: cli.out.or_else(|| manifest.output.clone()).unwrap_or_else(|| PathBuf::from("runs")),
        format: cli.format,
        gnuplot: cli.gnuplot,
    };
    match run(exp, &manifest, &opts) {
        Ok(outcome) => {
            let s = &outcome.summary;
            println!(
                "{}",
                serde_json::json!({
                    "status": s.status,
                    "run_dir": outcome.dir,
                    "tables": s.tables,
                    "certificates": s.certificates.len(),
                })
            );
            if !s.diagnostics.is_empty() {
                eprintln!("{}", serde_json::json!({"status": "infeasible", "diagnostics": s.diagnostics}));
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => fail(&e),
    }
}
