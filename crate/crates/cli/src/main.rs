use clap::{Args, Parser, Subcommand};
use neseek::async_seek::max_stepsize;
use neseek_cli::config::{ExperimentConfig, Overrides};
use neseek_cli::log::TrajectoryLog;
use neseek_cli::runner::{describe, frequency_violations, run_experiment, Prepared};
use neseek_cli::study::{run_study, write_report};
use neseek_cli::{io_at, plot, CliError};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "neseek", version, about = "Nash equilibrium seeking experiments")]
struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Replaces `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces `run.out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces `run.horizon`.
    #[arg(long)]
    horizon: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            seed: self.seed,
            out: self.out.clone(),
            horizon: self.horizon,
        })?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured algorithm and write trajectory.csv, summary.txt and config.toml.
    Run(Common),
    /// Print the Nash equilibrium and the game constants.
    Ne(Common),
    /// Print the sampling schedule as k,t,agent_mask rows.
    Schedule {
        #[command(flatten)]
        common: Common,
        /// Epochs to print.
        #[arg(long, default_value_t = 1)]
        epochs: usize,
    },
    /// Check the configured or generated frequencies against the resonance conditions.
    ValidateFreqs(Common),
    /// Averaging study at a frozen point.
    Avg(Common),
    /// Render SVG plots from a trajectory log.
    Plot {
        /// Trajectory CSV written by `run`.
        #[arg(long)]
        log: PathBuf,
        /// Output directory; defaults to the log's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_at(path))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Run(c) => {
            let cfg = c.load()?;
            let out = run_experiment(&cfg)?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            let dir = &cfg.run.out;
            std::fs::create_dir_all(dir).map_err(io_at(dir))?;
            out.log.write_csv(create(&dir.join("trajectory.csv"))?)?;
            let summary = out.summary.render();
            std::fs::write(dir.join("summary.txt"), &summary).map_err(io_at(dir.join("summary.txt")))?;
            std::fs::write(dir.join("config.toml"), cfg.to_toml()).map_err(io_at(dir.join("config.toml")))?;
            if !quiet {
                print!("{summary}");
                println!("wrote {}", dir.display());
            }
        }
        Command::Ne(c) => {
            let cfg = c.load()?;
            let prep = Prepared::new(&cfg)?;
            println!("dims = {:?}", prep.game.dims());
            println!("mu = {}", prep.game.mu_f());
            println!("L = {}", prep.game.lip_l());
            let x: Vec<String> = prep.x_star.iter().map(|v| format!("{v:.15}")).collect();
            println!("x_star = [{}]", x.join(", "));
            if let Some(s) = &prep.schedule {
                let b = max_stepsize(prep.game.mu_f(), prep.game.lip_l(), s)?;
                println!("alpha_max = {:.6e}", b.alpha);
                println!("eta = {:.6e}", b.eta);
            }
        }
        Command::Schedule { common, epochs } => {
            let cfg = common.load()?;
            let spec = cfg
                .schedule
                .as_ref()
                .ok_or_else(|| CliError::Config("config has no [schedule] section".into()))?;
            let s = spec.build()?;
            if !quiet {
                eprintln!("ratios = {:?}, r_i = {:?}, r = {}", s.ratios(), s.r_i(), s.r());
            }
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            s.write_csv(&mut lock, epochs)?;
            lock.flush()?;
        }
        Command::ValidateFreqs(c) => {
            let cfg = c.load()?;
            let prep = Prepared::new(&cfg)?;
            let weights = prep.weights(&cfg);
            let a = &cfg.algorithm;
            let freqs = neseek_cli::runner::frequencies(&cfg, &prep);
            let freqs = match freqs {
                Ok(f) => f,
                Err(CliError::Resonant(_)) => {
                    let f = a.frequencies.clone().unwrap_or_default();
                    for v in frequency_violations(&f, &weights, a.frequency_tol, a.alias_margin) {
                        println!("violation: {}", describe(&v));
                    }
                    return Err(CliError::Resonant("see violations above".into()));
                }
                Err(e) => return Err(e),
            };
            let f: Vec<String> = freqs.iter().map(|v| format!("{v:.12}")).collect();
            println!("weights = {weights:?}");
            println!("frequencies = [{}]", f.join(", "));
            println!("aliasing_margin = {:.6}", neseek::sync::aliasing_margin(&freqs));
            println!("ok");
        }
        Command::Avg(c) => {
            let cfg = c.load()?;
            let report = run_study(&cfg)?;
            let dir = cfg.run.out.join("avg");
            write_report(&report, &dir)?;
            if !quiet {
                print!("{}", report.render());
                println!("wrote {}", dir.display());
            }
        }
        Command::Plot { log, out } => {
            let file = File::open(&log).map_err(io_at(&log))?;
            let traj = TrajectoryLog::read_csv(file)?;
            let dir = out.unwrap_or_else(|| log.parent().map(Path::to_path_buf).unwrap_or_default());
            std::fs::create_dir_all(&dir).map_err(io_at(&dir))?;
            for n in plot::plot_log(&traj, &dir)? {
                eprintln!("notice: {n}");
            }
            if !quiet {
                println!("wrote {}", dir.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
