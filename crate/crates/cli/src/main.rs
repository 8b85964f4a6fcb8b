use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use biphoton_core::spectral::{read_jsa_csv, schmidt_decompose, schmidt_number};
use biphoton_sim::config::ScenarioConfig;
use biphoton_sim::error::{CliError, Result};
use biphoton_sim::figures::{figure, Figure};
use biphoton_sim::output::fmt_float;
use biphoton_sim::scenario::run_scenario;
use biphoton_sim::with_pool;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "biphoton-sim", version, about = "Detection statistics of biphoton Gaussian states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON scenario and write the result table as CSV.
    Run {
        config: PathBuf,
        /// Write here instead of the configured output (`-` for stdout).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Emit the data set of a standard figure (fig1 .. fig4).
    Figure {
        name: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Number of sweep samples.
        #[arg(long)]
        points: Option<usize>,
        /// Also write an SVG plot.
        #[arg(long)]
        svg: bool,
    },
    /// Schmidt decomposition of a JSA stored as CSV.
    Schmidt {
        jsa: PathBuf,
        #[arg(long)]
        rank: Option<usize>,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn emit(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match path {
        Some(p) if p != Path::new("-") => {
            let mut w = create(p)?;
            f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(p, e))
        }
        _ => {
            let mut w = io::stdout().lock();
            f(&mut w).map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ScenarioConfig::load(&config)?;
            let table = with_pool(|| run_scenario(&cfg))??;
            let dest = out.or_else(|| cfg.output.csv.clone());
            emit(dest.as_deref(), |w| table.write_csv(w, cfg.output.precision))
        }
        Command::Figure { name, out, points, svg } => {
            let fig: Figure = name.parse()?;
            let data = with_pool(|| figure(fig, points))??;
            std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
            let csv = out.join(format!("{fig}.csv"));
            emit(Some(&csv), |w| data.write_csv(w, 16))?;
            log::info!("wrote {}", csv.display());
            if svg {
                let path = out.join(format!("{fig}.svg"));
                let (lx, ly) = fig.log_axes();
                emit(Some(&path), |w| data.write_svg(w, fig.title(), lx, ly))?;
                log::info!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Schmidt { jsa, rank } => {
            let file = File::open(&jsa).map_err(|e| CliError::io(&jsa, e))?;
            let grid = read_jsa_csv(BufReader::new(file))?;
            let spectrum = schmidt_decompose(&grid, rank)?;
            let k = schmidt_number(&spectrum)?;
            emit(None, |w| {
                writeln!(w, "# schmidt_number={}", fmt_float(k, 16))?;
                writeln!(w, "# truncation_tail={}", fmt_float(spectrum.truncation_tail(), 16))?;
                writeln!(w, "j,lambda")?;
                for (j, l) in spectrum.lambdas().iter().enumerate() {
                    writeln!(w, "{},{}", j + 1, fmt_float(*l, 16))?;
                }
                Ok(())
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
