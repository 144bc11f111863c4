use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nerfmt::cli::{self, CliError, Config};

/// Metamorphic testing of image-processing systems with a fitted radiance
/// field as test-image generator.
///
/// Every configuration field can be overridden with `--key.path=value`
/// after the subcommand, e.g. `nerfmt fit --train.steps=500`.
#[derive(Parser)]
#[command(name = "nerfmt", version)]
struct Cli {
    /// JSON configuration file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Raytrace the synthetic scene along the trajectory into a posed dataset.
    Synth(Overrides),
    /// Fit the radiance field to the training frames.
    Fit(Overrides),
    /// Render eval frames from the fitted field (`--frame ID` for one).
    Render(Overrides),
    /// Render one frame under every pose transformation (`--frame ID`).
    Transform(Overrides),
    /// Apply the configured mutations to one real frame (`--frame ID`).
    Mutate(Overrides),
    /// Run the metamorphic test campaign.
    Test(Overrides),
    /// Summarize a stored campaign report and its correlation table.
    Analyze(Overrides),
    /// Measure rendering frame rate at several resolutions.
    Bench(Overrides),
}

#[derive(clap::Args)]
struct Overrides {
    /// `--key.path=value` configuration overrides.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDE")]
    overrides: Vec<String>,
}

/// Split `--frame ID` / `--frame=ID` off the override list.
fn take_frame(args: &[String]) -> Result<(Option<String>, Vec<String>), CliError> {
    let (mut frame, mut rest) = (None, Vec::new());
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--frame" {
            frame = Some(it.next().ok_or_else(|| CliError::Usage("--frame needs a value".into()))?.clone());
        } else if let Some(v) = a.strip_prefix("--frame=") {
            frame = Some(v.to_string());
        } else {
            rest.push(a.clone());
        }
    }
    Ok((frame, rest))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (Command::Synth(o)
    | Command::Fit(o)
    | Command::Test(o)
    | Command::Analyze(o)
    | Command::Bench(o)
    | Command::Render(o)
    | Command::Transform(o)
    | Command::Mutate(o)) = &cli.command;
    let (frame, overrides) = take_frame(&o.overrides)?;
    let frame = frame.as_deref();
    let cfg = Config::load(cli.config.as_deref(), &overrides).map_err(|e| CliError::Usage(format!("{e:#}")))?;
    let print_paths = |paths: Vec<PathBuf>| paths.iter().for_each(|p| println!("{}", p.display()));
    match &cli.command {
        Command::Synth(_) => println!("{}", cli::cmd_synth(&cfg)?),
        Command::Fit(_) => {
            let m = cli::cmd_fit(&cfg, |step, loss| eprintln!("step {step:>6}  loss {loss:.6}"))?;
            println!(
                "held-out PSNR {:.2} dB (init {:.2}), SSIM {:.4}; {:.1} s",
                m.heldout_psnr, m.init_psnr, m.heldout_ssim, m.wall_time_s
            );
        }
        Command::Render(_) => print_paths(cli::cmd_render(&cfg, frame)?),
        Command::Transform(_) => print_paths(cli::cmd_transform(&cfg, frame)?),
        Command::Mutate(_) => print_paths(cli::cmd_mutate(&cfg, frame)?),
        Command::Test(_) => {
            match cli::cmd_test(&cfg) {
                Ok(r) => print!("{}", nerfmt::mt::summary_table(&r)),
                Err(e @ CliError::SutBudget { .. }) => {
                    // the report is on disk regardless
                    if let Ok(s) = std::fs::read_to_string(cfg.test_dir().join("summary.txt")) {
                        print!("{s}");
                    }
                    return Err(e);
                }
                Err(e) => return Err(e),
            }
        }
        Command::Analyze(_) => print!("{}", cli::cmd_analyze(&cfg)?),
        Command::Bench(_) => print!("{}", cli::bench_table(&cli::cmd_bench(&cfg)?)),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
