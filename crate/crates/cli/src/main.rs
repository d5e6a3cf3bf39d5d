use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use plantnav::commands::{self, PredictionSource, TrainTarget};
use plantnav::io::kv::{parse_over, scenario_fields};
use plantnav::io::{load_pipeline_config, read_text};
use plantnav::navsim::{MapMode, Scenario};
use plantnav::pipeline::PipelineConfig;
use plantnav::{Error, Result};

#[derive(Parser)]
#[command(name = "plantnav", version, about = "Traversable-plant recognition and navigation experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the worlds and render every dataset split.
    World {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep the traversal trajectory and render traversability masks.
    Masks {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model into the models directory.
    Train {
        #[arg(value_enum)]
        target: Target,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        masks: Option<PathBuf>,
        #[arg(long)]
        models: PathBuf,
    },
    /// Fit the class and traversability sensor likelihoods.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        models: PathBuf,
    },
    /// Score predictions on the test split.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Models to run over the test split.
        #[arg(long, conflicts_with = "predictions", required_unless_present = "predictions")]
        models: Option<PathBuf>,
        /// Existing prediction rasters to score instead.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one navigation episode.
    Simulate {
        /// Overrides applied on top of the preset.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Preset::Overhung)]
        preset: Preset,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Required in proposed mode.
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate summary and episode CSVs found under the input directories.
    Report {
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Every stage in order into one output tree.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Ssm,
    Tem,
    Seg4,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Overhung,
    Walled,
    Clear,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Baseline,
    Proposed,
}

fn config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => load_pipeline_config(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn scenario(path: Option<&Path>, preset: Preset, seed: u64) -> Result<Scenario> {
    let base = match preset {
        Preset::Overhung => Scenario::overhung(seed),
        Preset::Walled => Scenario::walled(seed),
        Preset::Clear => Scenario::clear(seed),
    };
    let s = match path {
        Some(p) => parse_over(base, &read_text(p)?, p, scenario_fields)?,
        None => base,
    };
    s.validate()?;
    Ok(s)
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::World { config: c, out } => commands::world(&config(c.as_deref())?, &out),
        Cmd::Masks { config: c, data, out } => commands::masks(&config(c.as_deref())?, &data, &out),
        Cmd::Train { target, config: c, data, masks, models } => {
            let t = match target {
                Target::Ssm => TrainTarget::Ssm,
                Target::Tem => TrainTarget::Tem,
                Target::Seg4 => TrainTarget::Seg4,
            };
            let masks = match (t, masks) {
                (_, Some(m)) => m,
                (TrainTarget::Ssm, None) => PathBuf::new(),
                (_, None) => return Err(Error::InvalidInput(format!("training {} needs --masks", t.name()))),
            };
            commands::train(&config(c.as_deref())?, t, &data, &masks, &models)
        }
        Cmd::Calibrate { config: c, data, masks, models } => {
            commands::calibrate(&config(c.as_deref())?, &data, &masks, &models)
        }
        Cmd::Eval { config: c, data, models, predictions, out } => {
            let source = match (models, predictions) {
                (_, Some(p)) => PredictionSource::Rasters(p),
                (Some(m), None) => PredictionSource::Models(m),
                (None, None) => unreachable!("clap requires one source"),
            };
            commands::eval(&config(c.as_deref())?, &data, &source, &out)
        }
        Cmd::Simulate { scenario: path, preset, seed, mode, models, out } => {
            let s = scenario(path.as_deref(), preset, seed)?;
            let mode = match mode {
                Mode::Baseline => MapMode::Baseline,
                Mode::Proposed => MapMode::Proposed,
            };
            commands::simulate(&s, mode, models.as_deref(), &out)
        }
        Cmd::Report { inputs, out } => commands::report(&inputs, &out),
        Cmd::Run { config: c, out } => commands::run(&config(c.as_deref())?, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("plantnav: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(1))
        }
    }
}
