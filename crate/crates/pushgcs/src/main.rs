use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pushgcs::io::batch::run_batch;
use pushgcs::io::planfile::PlanFile;
use pushgcs::io::stats::problem_stats;
use pushgcs::io::taskfile::{preset_geometry, TaskFile};
use pushgcs::io::{sdpa, svg};
use pushgcs::planner::{plan, PlanError, PlanOptions};
use pushgcs::ClarabelSolver;

const EXIT_INPUT: u8 = 1;
const EXIT_NO_PLAN: u8 = 2;

#[derive(Parser)]
#[command(name = "pushgcs", version, about = "Planar pushing planner over a graph of convex sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Box,
    Tee,
}

impl Preset {
    fn name(self) -> &'static str {
        match self {
            Preset::Box => "box",
            Preset::Tee => "tee",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Plan one task and write the plan JSON and an SVG strip.
    Plan {
        task: PathBuf,
        /// Rounding seed; overrides the task file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        knots: Option<usize>,
        #[arg(long)]
        timestep: Option<f64>,
        #[arg(long)]
        rounding_attempts: Option<usize>,
        /// Conic solver feasibility and gap tolerance.
        #[arg(long)]
        solver_tol: Option<f64>,
        /// Plan JSON path; the SVG goes next to it.
        #[arg(long, default_value = "plan.json")]
        out: PathBuf,
        /// Leave wall-clock timings out so output is reproducible byte for byte.
        #[arg(long)]
        no_timings: bool,
    },
    /// Plan random instances and write one CSV row per instance.
    Batch {
        #[arg(value_enum)]
        geometry: Preset,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "batch.csv")]
        out_csv: PathBuf,
        /// Instances planned concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        no_timings: bool,
    },
    /// Build the relaxation without solving and report its size.
    Stats {
        task: PathBuf,
        #[arg(long)]
        knots: Option<usize>,
        /// Also write the relaxation in SDPA sparse format.
        #[arg(long)]
        export_sdpa: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl std::fmt::Display) -> Self {
        Self { code: EXIT_INPUT, message: message.to_string() }
    }
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        let code = if e.is_input_error() { EXIT_INPUT } else { EXIT_NO_PLAN };
        let mut message = e.to_string();
        if let PlanError::NoFeasiblePlan(reports) = &e {
            for r in reports {
                if let Some(m) = &r.message {
                    message.push_str(&format!("\n  candidate {:?}: {m}", r.vertices));
                }
            }
        }
        Self { code, message }
    }
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_task(path: &Path) -> Result<TaskFile, Failure> {
    TaskFile::load(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Plan { task, seed, knots, timestep, rounding_attempts, solver_tol, out, no_timings } => {
            let file = load_task(&task)?;
            let mut spec = file.to_task().map_err(Failure::input)?;
            if let Some(n) = knots {
                spec.knots = n;
            }
            if let Some(h) = timestep {
                spec.timestep = h;
            }
            let mut opts = PlanOptions::default();
            if let Some(k) = rounding_attempts {
                opts.rounding_attempts = k;
            }
            if let Some(tol) = solver_tol {
                if !(tol.is_finite() && tol > 0.0) {
                    return Err(Failure::input(format!("--solver-tol must be positive, got {tol}")));
                }
                opts.solver.feasibility_tol = tol;
                opts.solver.gap_tol = tol;
            }
            let seed = seed.unwrap_or(file.seed);
            let result = plan(&spec, seed, &ClarabelSolver, &opts)?;
            write(&out, &PlanFile::new(&result, seed, !no_timings).to_json())?;
            let picture =
                svg::render(&spec.geometry, spec.pusher.radius, spec.workspace_side, &result.segments, &result.scaled_forces);
            write(&out.with_extension("svg"), &picture)?;
            eprintln!(
                "modes {}  C_relax {:.6}  C_round {:.6}  gap {:.2}%",
                result.mode_labels.join(" "),
                result.c_relax,
                result.c_round,
                100.0 * result.gap
            );
            Ok(())
        }
        Command::Batch { geometry, count, seed, out_csv, jobs, no_timings } => {
            let g = preset_geometry(geometry.name()).expect("preset exists");
            let report = run_batch(&g, count, seed, jobs, &ClarabelSolver, &PlanOptions::default(), &|row| match &row.error {
                None => eprintln!("instance {}: gap {:.4}", row.instance, row.gap.unwrap_or(f64::NAN)),
                Some(e) => eprintln!("instance {}: failed: {e}", row.instance),
            });
            write(&out_csv, &report.to_csv(!no_timings))?;
            let m = report.mean();
            eprintln!("success {:.0}%  median gap {:.2}%", 100.0 * m.success_rate, 100.0 * report.median().gap);
            Ok(())
        }
        Command::Stats { task, knots, export_sdpa } => {
            let file = load_task(&task)?;
            let mut spec = file.to_task().map_err(Failure::input)?;
            if let Some(n) = knots {
                spec.knots = n;
            }
            let box_n3 = file.geometry.preset.as_deref() == Some("box") && spec.knots == 3;
            let (stats, program) = problem_stats(&spec, box_n3)?;
            print!("{}", stats.to_json());
            if let Some(path) = export_sdpa {
                write(&path, &sdpa::export(&program))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
