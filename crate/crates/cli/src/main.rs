//! `saclab` command-line front end.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use saclab::sim::Controller;

#[derive(Parser)]
#[command(
    name = "saclab",
    version,
    about = "Simple adaptive control (SAC / CL-SAC) toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct ConfigArg {
    /// Scenario file (JSON). Defaults to the built-in CL-SAC MAV scenario.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct SimArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Step size override, seconds.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time override, seconds.
    #[arg(long = "t-final")]
    pub t_final: Option<f64>,
    /// Keep every n-th row in trace files.
    #[arg(long)]
    pub decimate: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ControllerArg {
    Sac,
    Clsac,
}

impl From<ControllerArg> for Controller {
    fn from(c: ControllerArg) -> Self {
        match c {
            ControllerArg::Sac => Controller::Sac,
            ControllerArg::Clsac => Controller::ClSac,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print T(s), and D(s) and F(s) = T(s) + D(s) when a PFC is configured.
    Tf {
        #[command(flatten)]
        config: ConfigArg,
        /// Also write the listing to <dir>/tf.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sufficient W-ASPR test on the plant and on the PFC-augmented plant.
    CheckWaspr {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Build D(s) = 1/C(s), form F(s) and sweep static output feedback gains.
    SynthesizePfc {
        #[command(flatten)]
        config: ConfigArg,
        /// Write <dir>/gain_sweep.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate one controller and write trace.csv and metrics.txt.
    Run {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, value_enum, default_value = "clsac")]
        controller: ControllerArg,
    },
    /// Run SAC and CL-SAC on the same scenario and compare them.
    Compare {
        #[command(flatten)]
        sim: SimArgs,
    },
    /// CL-SAC over several output-error feedback gains.
    SweepLv {
        #[command(flatten)]
        sim: SimArgs,
        /// Comma-separated gains.
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = vec![10.0, 50.0, 100.0])]
        values: Vec<f64>,
    },
    /// Solve the command generator tracker equations and check them.
    CgtCheck {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Output-error bound report from a trace's final gains.
    Bounds {
        #[command(flatten)]
        config: ConfigArg,
        /// Trace CSV; when absent the scenario is simulated.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Built-in scenario library.
    Scenarios {
        #[command(subcommand)]
        action: ScenariosAction,
    },
}

#[derive(Subcommand)]
enum ScenariosAction {
    /// Write every built-in scenario as <dir>/<name>.json.
    Export { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Tf { config, out } => commands::tf(&config, out.as_deref()),
        Command::CheckWaspr { config } => commands::check_waspr(&config),
        Command::SynthesizePfc { config, out } => commands::synthesize_pfc(&config, out.as_deref()),
        Command::Run { sim, controller } => commands::run(&sim, controller.into()),
        Command::Compare { sim } => commands::compare(&sim),
        Command::SweepLv { sim, values } => commands::sweep_lv(&sim, &values),
        Command::CgtCheck { config } => commands::cgt_check(&config),
        Command::Bounds { config, trace } => commands::bounds(&config, trace.as_deref()),
        Command::Scenarios {
            action: ScenariosAction::Export { dir },
        } => commands::export_scenarios(&dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
