use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use llproj::harness::{self, ConfigMap, Mode, StudyConfig};

#[derive(Parser)]
#[command(
    name = "llproj",
    version,
    about = "Landau-Lifshitz BDF2 projection solver studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence against the manufactured solution (1-D or 3-D).
    ConvergeMms(StudyArgs),
    /// Self-convergence against a fine reference run (1-D).
    ConvergeRef(StudyArgs),
    /// err_inf over a grid of time steps and mesh sizes.
    Stability(StudyArgs),
    /// One run, optionally writing the final field.
    Run(StudyArgs),
    /// Least-squares order of a two-column CSV of (step, error).
    FitOrder {
        file: PathBuf,
        /// Header name of the error column; the step is the first column.
        #[arg(long)]
        column: Option<String>,
    },
}

/// Flags mirror the configuration keys and override the file.
#[derive(Args)]
struct StudyArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Stop 3-D ladders at k = 1/128.
    #[arg(long)]
    quick: bool,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    nx: Option<String>,
    #[arg(long)]
    ny: Option<String>,
    #[arg(long)]
    nz: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long = "t_final")]
    t_final: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    solver: Option<String>,
    #[arg(long = "solver_tol")]
    solver_tol: Option<String>,
    #[arg(long = "solver_max_iter")]
    solver_max_iter: Option<String>,
    #[arg(long = "out_table")]
    out_table: Option<String>,
    #[arg(long = "out_field")]
    out_field: Option<String>,
    #[arg(long = "h_app_x")]
    h_app_x: Option<String>,
    #[arg(long = "h_app_y")]
    h_app_y: Option<String>,
    #[arg(long = "h_app_z")]
    h_app_z: Option<String>,
    #[arg(long)]
    reference: Option<String>,
    #[arg(long = "ref_dt")]
    ref_dt: Option<String>,
    #[arg(long = "ref_nx")]
    ref_nx: Option<String>,
    #[arg(long = "forcing_time")]
    forcing_time: Option<String>,
    #[arg(long = "start_history")]
    start_history: Option<String>,
    #[arg(long)]
    problem: Option<String>,
}

impl StudyArgs {
    fn overrides(&self) -> [(&'static str, &Option<String>); 22] {
        [
            ("mode", &self.mode),
            ("dim", &self.dim),
            ("nx", &self.nx),
            ("ny", &self.ny),
            ("nz", &self.nz),
            ("dt", &self.dt),
            ("t_final", &self.t_final),
            ("alpha", &self.alpha),
            ("solver", &self.solver),
            ("solver_tol", &self.solver_tol),
            ("solver_max_iter", &self.solver_max_iter),
            ("out_table", &self.out_table),
            ("out_field", &self.out_field),
            ("h_app_x", &self.h_app_x),
            ("h_app_y", &self.h_app_y),
            ("h_app_z", &self.h_app_z),
            ("reference", &self.reference),
            ("ref_dt", &self.ref_dt),
            ("ref_nx", &self.ref_nx),
            ("forcing_time", &self.forcing_time),
            ("start_history", &self.start_history),
            ("problem", &self.problem),
        ]
    }

    fn config(&self, allowed: &[Mode]) -> Result<StudyConfig> {
        let mut map = match &self.config {
            Some(p) => ConfigMap::load(p)?,
            None => ConfigMap::new(),
        };
        for (key, value) in self.overrides() {
            if let Some(v) = value {
                map.set(key, v.as_str())?;
            }
        }
        if self.quick {
            map.set("quick", "true")?;
        }
        let three_d = map.get("dim").is_some_and(|d| d.trim() == "3");
        let default = if three_d && allowed.len() > 1 {
            allowed[1]
        } else {
            allowed[0]
        };
        let mut cfg = StudyConfig::from_map(&map, default)?;
        if !allowed.contains(&cfg.mode) {
            bail!("mode {} does not belong to this subcommand", cfg.mode);
        }
        cfg.threads = harness::thread_count();
        Ok(cfg)
    }
}

fn write_table(cfg: &StudyConfig, table: &harness::ConvergenceTable) -> Result<()> {
    print!("{table}");
    if let Some(p) = &cfg.out_table {
        table.export_csv(p)?;
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ConvergeMms(args) => {
            let cfg = args.config(&[Mode::Mms1d, Mode::Mms3d])?;
            write_table(&cfg, &harness::converge_mms(&cfg)?)
        }
        Command::ConvergeRef(args) => {
            let cfg = args.config(&[Mode::Reference1d])?;
            write_table(&cfg, &harness::converge_reference(&cfg)?)
        }
        Command::Stability(args) => {
            let cfg = args.config(&[Mode::Stability1d, Mode::Stability3d])?;
            let table = harness::stability_table(&cfg)?;
            print!("{table}");
            if let Some(p) = &cfg.out_table {
                table.export_csv(p)?;
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Run(args) => {
            let cfg = args.config(&[Mode::SingleRun])?;
            let report = harness::single_run(&cfg)?;
            let s = &report.state;
            println!(
                "steps {}  t = {:.6}  last residual {:.3e}",
                s.step(),
                s.time(),
                s.last_residual()
            );
            println!(
                "exchange energy {:.9e}",
                llproj::ops::exchange_energy(s.current())
            );
            if let Some(e) = report.errors {
                println!(
                    "err_inf {:.6e}  err_l2 {:.6e}  err_h1 {:.6e}",
                    e.err_inf, e.err_l2, e.err_h1
                );
            }
            if let Some(p) = &cfg.out_field {
                harness::export_field(s.current(), p)?;
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::FitOrder { file, column } => {
            let text = std::fs::read_to_string(&file)
                .with_context(|| format!("reading {}", file.display()))?;
            let pts = harness::read_pairs(&text, column.as_deref())?;
            println!("{:.6}", harness::fit_order(&pts)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
