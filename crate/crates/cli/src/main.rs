use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use log::info;

use gaitmod_core::report::{exit_code, prepare, run_scenario};
use gaitmod_core::scenario::Scenario;
use gaitmod_core::sweep::{parse_grid_deg, sweep_compensation, SweepSpec};

#[derive(Parser)]
#[command(name = "gaitmod", version, about = "Biped gait modification and ZMP balance evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the ZMP trace, footprint plot and report.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Scenario whose footprints are drawn dashed for comparison.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Grid search over compensation offsets.
    Sweep {
        scenario: PathBuf,
        /// Comma-separated joint ids, e.g. 3,4.
        #[arg(long, value_delimiter = ',', required = true)]
        joints: Vec<usize>,
        /// Offsets in degrees as start:step:end or a,b,c. Give once for all
        /// joints or once per joint.
        #[arg(long, required = true)]
        grid: Vec<String>,
        /// Largest |offset| in degrees.
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Parse and check a scenario without running it.
    Validate { scenario: PathBuf },
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load(path: &Path) -> anyhow::Result<Scenario> {
    Scenario::load(path).with_context(|| format!("loading scenario {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Run {
            scenario,
            out_dir,
            baseline,
        } => {
            let s = load(&scenario)?;
            let b = baseline.as_deref().map(load).transpose()?;
            let outcome = run_scenario(&s, &base_dir(&scenario), &out_dir, b.as_ref())?;
            let r = &outcome.report.balance;
            println!(
                "verdict {:?}  min_margin {:.4} m  fraction_inside {:.3}  dispersion {:.4} m",
                r.verdict, r.min_margin, r.fraction_inside, r.dispersion
            );
            info!(
                "wrote {}, {}, {}",
                outcome.csv_path.display(),
                outcome.svg_path.display(),
                outcome.report_path.display()
            );
            Ok(outcome.exit_code())
        }
        Command::Sweep {
            scenario,
            joints,
            grid,
            budget,
        } => {
            let s = load(&scenario)?;
            let grids = grid
                .iter()
                .map(|g| parse_grid_deg(g))
                .collect::<Result<Vec<_>, _>>()?;
            let grids = match grids.len() {
                1 => vec![grids[0].clone(); joints.len()],
                n if n == joints.len() => grids,
                n => bail!("{n} grids given for {} joints", joints.len()),
            };
            let spec = SweepSpec {
                joints,
                grids,
                budget: budget.map(f64::to_radians),
            };
            let prepared = prepare(&s, &base_dir(&scenario))?;
            let table = sweep_compensation(&prepared, &prepared.stack, s.n_steps, &spec)?;
            let head: Vec<String> = table.joints.iter().map(|j| format!("q{j}_deg")).collect();
            println!("{},min_margin,fraction_inside,verdict", head.join(","));
            for row in &table.rows {
                let offs: Vec<String> = row.offsets.iter().map(|v| format!("{:.3}", v.to_degrees())).collect();
                println!(
                    "{},{:.8e},{:.4},{:?}",
                    offs.join(","),
                    row.min_margin,
                    row.fraction_inside,
                    row.verdict
                );
            }
            let best = table.best_row();
            let offs: Vec<String> = table
                .joints
                .iter()
                .zip(&best.offsets)
                .map(|(j, v)| format!("q{j}={:.3}", v.to_degrees()))
                .collect();
            println!("best {} min_margin {:.4} m", offs.join(" "), best.min_margin);
            Ok(exit_code(best.verdict))
        }
        Command::Validate { scenario } => {
            let s = load(&scenario)?;
            s.build_model(&base_dir(&scenario))?;
            println!("{}: ok ({} half-steps)", scenario.display(), s.n_steps);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GAITMOD_LOG", "error")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
