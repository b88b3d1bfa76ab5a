use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use semflow_cli::case::MeshSource;
use semflow_cli::convergence::{run_suite, SUITES};
use semflow_cli::{run_case, CaseConfig, RunOptions};
use semflow_core::mesh::write_mesh;

#[derive(Parser)]
#[command(
    name = "semflow",
    version,
    about = "Spectral-element incompressible flow solver"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = "output")]
    output_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a case file.
    Run {
        case: PathBuf,
        /// Report mean and std of the last 100 step wall times.
        #[arg(long)]
        benchmark: bool,
        /// Continue from a checkpoint file.
        #[arg(long)]
        restart: Option<PathBuf>,
        /// Stop after this step.
        #[arg(long)]
        stop_at: Option<u64>,
    },
    /// Generate a mesh from a TOML table like a case's `[mesh]` section.
    Meshgen {
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run a convergence suite.
    Convergence {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
        suite: String,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    match cli.command {
        Command::Run {
            case,
            benchmark,
            restart,
            stop_at,
        } => {
            let cfg = CaseConfig::load(&case)?;
            let opts = RunOptions {
                output_dir: cli.output_dir,
                benchmark,
                restart,
                stop_at,
            };
            let s = run_case(&cfg, &opts)?;
            println!(
                "{} steps, t = {:.6}, CFL {:.3}..{:.3}",
                s.steps, s.final_time, s.min_cfl, s.max_cfl
            );
            for f in &s.forces {
                println!(
                    "{}: cd {:.5} +- {:.5}, cl {:.5} +- {:.5}",
                    f.tag, f.cd_mean, f.cd_std, f.cl_mean, f.cl_std
                );
            }
            if benchmark {
                println!(
                    "wall time per step over last {}: {:.4e} s +- {:.4e} s",
                    s.timed_steps, s.wall_mean, s.wall_std
                );
            }
        }
        Command::Meshgen { spec, output } => {
            let text = std::fs::read_to_string(&spec)
                .with_context(|| format!("reading {}", spec.display()))?;
            let src: MeshSource = toml::from_str(&text).context("parsing mesh spec")?;
            let mesh = match src {
                MeshSource::File { .. } => {
                    anyhow::bail!("meshgen needs type = \"box\" or \"cylinder\"")
                }
                MeshSource::Box(b) => semflow_core::mesh::gen_box_mesh(&b)?,
                MeshSource::Cylinder(c) => semflow_core::mesh::gen_cylinder_box_mesh(&c)?,
            };
            write_mesh(&mesh, &output)?;
            println!(
                "{} elements written to {}",
                mesh.num_elements(),
                output.display()
            );
        }
        Command::Convergence { suite } => run_suite(&suite, &cli.output_dir)?,
    }
    Ok(())
}
