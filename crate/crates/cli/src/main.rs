use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use corrfade::dof::DecoderKind;
use corrfade_cli::{cmd_check, cmd_simulate, cmd_sweep, parse_grid, CliError, ExperimentSpec, Overrides};

#[derive(Parser)]
#[command(name = "corrfade", version, about = "Noncoherent decoding over correlatively changing fading")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the recovery conditions of a profile.
    Check(Common),
    /// Run trials and stream one JSON record per trial.
    Simulate(Common),
    /// Sweep SNR and estimate the pre-log slope.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Skip the channel: rate = D ln snr exactly.
        #[arg(long)]
        synthetic: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated SNR values in dB.
    #[arg(long)]
    snr_grid: Option<String>,
    #[arg(long)]
    decoder: Option<DecoderKind>,
    #[arg(long)]
    noiseless: bool,
    /// Run even when the recovery conditions fail.
    #[arg(long)]
    force: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentSpec, CliError> {
        let snr_grid_db = self.snr_grid.as_deref().map(parse_grid).transpose().map_err(CliError::Usage)?;
        let mut spec = ExperimentSpec::load(&self.spec)?;
        spec.apply(&Overrides {
            seed: self.seed,
            trials: self.trials,
            snr_grid_db,
            decoder: self.decoder,
            noiseless: self.noiseless,
            out: self.out.clone(),
        });
        Ok(spec)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, synthetic) = match &cli.command {
        Command::Check(c) | Command::Simulate(c) => (c, false),
        Command::Sweep { common, synthetic } => (common, *synthetic),
    };
    let mut spec = common.load()?;
    spec.synthetic |= synthetic;
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut data: Box<dyn Write> = match &spec.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", path.display())))?,
        )),
        None => Box::new(stdout.lock()),
    };
    // with the data on stdout, human-readable text goes to stderr
    let mut log: Box<dyn Write> = if spec.out.is_some() || matches!(cli.command, Command::Check(_)) {
        Box::new(io::stdout())
    } else {
        Box::new(stderr.lock())
    };
    let result = match cli.command {
        Command::Check(_) => cmd_check(&spec, &mut data, &mut log).and_then(|passed| {
            if passed {
                Ok(())
            } else {
                Err(CliError::Failure("recovery conditions fail".into()))
            }
        }),
        Command::Simulate(ref c) => cmd_simulate(&spec, c.force, &mut data, &mut log).map(|_| ()),
        Command::Sweep { ref common, .. } => cmd_sweep(&spec, common.force, &mut data, &mut log).map(|_| ()),
    };
    data.flush()?;
    log.flush()?;
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
