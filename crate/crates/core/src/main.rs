use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lfstatic::pipeline::{self, io, ReconstructArgs, RunConfig, SynthArgs};
use lfstatic::Result;

/// Static-background disparity and see-through refocusing for multi-camera
/// light fields.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate disparity and refocus one light-field frame.
    Reconstruct(ReconstructCmd),
    /// Render a synthetic dataset with ground truth.
    Synth(SynthCmd),
    /// Score a reconstruction against a synthetic dataset.
    Evaluate(EvaluateCmd),
}

#[derive(Args)]
struct ReconstructCmd {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    calib: Option<PathBuf>,
    /// Directory holding view_{k}.ppm.
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Directory holding prior_{k}.pgm.
    #[arg(long)]
    priors: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    ref_index: Option<usize>,
    /// Solve only pixels the reference prior marks dynamic.
    #[arg(long)]
    dynamic_only: bool,
    #[arg(long)]
    threads: Option<usize>,
    /// Also write the triangulation as a Wavefront OBJ.
    #[arg(long)]
    debug: bool,
}

#[derive(Args)]
struct SynthCmd {
    /// Scene description (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scene: two-plane, occluder, noisy-occluder or low-texture.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvaluateCmd {
    /// Output directory of `reconstruct`.
    #[arg(long)]
    pred: PathBuf,
    /// Dataset directory written by `synth`.
    #[arg(long)]
    truth: PathBuf,
    /// Run configuration (threshold, minimum static rays, reference view).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    ref_index: Option<usize>,
    /// Where to write the key=value report (printed to stdout as well).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Reconstruct(c) => {
            let args = ReconstructArgs {
                config: c.config,
                calib: c.calib,
                frames: c.frames,
                priors: c.priors,
                out: c.out,
                ref_index: c.ref_index,
                dynamic_only: c.dynamic_only,
                threads: c.threads,
                debug: c.debug,
            };
            let cfg = args.resolve()?;
            let rec = pipeline::cmd_reconstruct(&cfg, args.debug)?;
            println!(
                "{} EM iterations, {:.3}s, output in {}",
                rec.report.iterations,
                rec.timings.total(),
                cfg.out.as_deref().unwrap_or_else(|| ".".as_ref()).display()
            );
        }
        Command::Synth(c) => {
            let spec = pipeline::cmd_synth(&SynthArgs {
                scene: c.config,
                preset: c.preset,
                out: c.out.clone(),
                seed: c.seed,
            })?;
            println!(
                "{} views of {}x{} written to {}",
                spec.rig.num_cameras,
                spec.rig.width,
                spec.rig.height,
                c.out.display()
            );
        }
        Command::Evaluate(c) => {
            let mut cfg = match &c.config {
                Some(p) => RunConfig::read(p)?,
                None => RunConfig::default(),
            };
            cfg.ref_index = c.ref_index.or(cfg.ref_index);
            let text = pipeline::cmd_evaluate(&c.pred, &c.truth, &cfg)?.to_text();
            print!("{text}");
            if let Some(out) = &c.out {
                io::write_text(out, &text)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(pipeline::exit_code(&e) as u8)
        }
    }
}
