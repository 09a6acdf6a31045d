use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use links_core::channel::draw_realization;
use links_core::harness::{
    eval_accuracy, run_pipeline, sweep_tau, write_eval_csv, write_sweep_csv, EvalFixture, EvalQuery, PipelineInputs,
};
use links_core::planner::{plan_accuracy, run_planning, BackendError, LiveBackend, LlmBackend, MockBackend};
use links_core::rrm::{build_problem, reflexion_solve_with, SolverChoice};
use links_core::scenario::{load_scenario, Scenario};
use links_core::traffic::{load_traffic_csv, nrmse, patch_plan, predict, rescale, PredictorKind};

#[derive(Parser)]
#[command(name = "links", version, about = "Sensor-data retrieval planning and uplink scheduling")]
struct Cli {
    /// Scenario file. Overrides the one named in a pipeline config.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = BackendKind::Mock)]
    backend: BackendKind,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Mock,
    Live,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Auto,
    Exact,
    Heuristic,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one channel realization and print gains, SINR and rates at full power.
    Simulate,
    /// Schedule the scenario's devices with the repair loop.
    Solve {
        #[arg(long, value_enum, default_value_t = SolverArg::Auto)]
        solver: SolverArg,
        #[arg(long, default_value_t = 10)]
        max_rounds: usize,
    },
    /// Run only the planning conversation.
    Plan {
        #[arg(long)]
        config: PathBuf,
        /// Mock script; defaults to the config's.
        #[arg(long)]
        script: Option<PathBuf>,
    },
    /// Forecast one cell's load over a horizon.
    Predict {
        #[arg(long)]
        traffic: PathBuf,
        #[arg(long)]
        cell: String,
        /// Raw volume of a fully loaded cell.
        #[arg(long)]
        capacity: f64,
        #[arg(long, default_value_t = 600)]
        horizon: u32,
        #[arg(long, default_value = "naive-last")]
        predictor: PredictorKind,
        /// Hold out the last horizon of the series and report NRMSE against it.
        #[arg(long)]
        holdout: bool,
    },
    /// Full run: plan, convert, forecast and gate, schedule.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        script: Option<PathBuf>,
    },
    /// Max latency over a list of thresholds, as CSV.
    SweepTau {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6,0.8,1")]
        taus: Vec<f64>,
    },
    /// Plan every query of a fixture and score it, as CSV.
    EvalAccuracy {
        #[arg(long)]
        fixture: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn output(cli: &Cli) -> Result<Box<dyn Write>> {
    Ok(match &cli.out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json(cli: &Cli, value: serde_json::Value) -> Result<()> {
    let mut out = output(cli)?;
    serde_json::to_writer_pretty(&mut out, &value)?;
    writeln!(out)?;
    Ok(())
}

fn scenario_of(cli: &Cli) -> Result<Scenario> {
    let path = cli.scenario.as_ref().ok_or_else(|| anyhow!("scenario: --scenario is required"))?;
    load_scenario(path).with_context(|| format!("scenario: {}", path.display()))
}

fn backend(cli: &Cli, script: Option<&Path>) -> Result<Box<dyn LlmBackend>> {
    Ok(match cli.backend {
        BackendKind::Mock => {
            let path = script.ok_or_else(|| anyhow!("planning: the mock backend needs a script"))?;
            Box::new(MockBackend::load(path).context("planning")?)
        }
        BackendKind::Live => Box::new(LiveBackend::from_env().context("planning")?),
    })
}

fn pipeline_inputs(cli: &Cli, config: &Path, script: &Option<PathBuf>) -> Result<(PipelineInputs, Box<dyn LlmBackend>)> {
    let mut inputs = PipelineInputs::load(config, cli.scenario.as_deref())?;
    if let Some(s) = script {
        inputs.mock_script = Some(s.clone());
    }
    let backend = backend(cli, inputs.mock_script.as_deref())?;
    Ok((inputs, backend))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate => {
            let scenario = scenario_of(cli)?;
            let realization = draw_realization(&scenario, cli.seed);
            let problem = build_problem(&scenario, &realization, &vec![scenario.p_max_w; scenario.num_devices()])
                .context("rrm")?;
            emit_json(
                cli,
                json!({
                    "seed": cli.seed,
                    "devices": scenario.devices.iter().map(|d| &d.id).collect::<Vec<_>>(),
                    "power_w": scenario.p_max_w,
                    "gains": realization.gains,
                    "interference_w": realization.interference_w,
                    "sinr": problem.sinr,
                    "rates_bps": problem.rates_bps,
                }),
            )
        }
        Command::Solve { solver, max_rounds } => {
            let scenario = scenario_of(cli)?;
            let realization = draw_realization(&scenario, cli.seed);
            let choice = match solver {
                SolverArg::Auto => SolverChoice::Auto,
                SolverArg::Exact => SolverChoice::Exact,
                SolverArg::Heuristic => SolverChoice::Heuristic,
            };
            let solution = reflexion_solve_with(&scenario, &realization, *max_rounds, choice).context("rrm")?;
            emit_json(cli, serde_json::to_value(solution.to_report())?)
        }
        Command::Plan { config, script } => {
            let (inputs, backend) = pipeline_inputs(cli, config, script)?;
            let (plan, transcript) =
                run_planning(&inputs.query, &inputs.cards, &inputs.tools, backend.as_ref(), inputs.step_limit)
                    .context("planning")?;
            let accuracy = inputs.gold.as_ref().map(|g| plan_accuracy(&plan, g)).transpose()?;
            emit_json(cli, json!({"plan": plan, "plan_accuracy": accuracy, "transcript": transcript}))
        }
        Command::Predict {
            traffic,
            cell,
            capacity,
            horizon,
            predictor,
            holdout,
        } => {
            let cells = load_traffic_csv(traffic).context("forecast")?;
            let series = cells.get(cell).ok_or_else(|| anyhow!("forecast: no cell `{cell}` in {}", traffic.display()))?;
            let load = series.to_fraction(*capacity).context("forecast")?;
            let bucketed = rescale(&load, *horizon).context("forecast")?;
            let steps = patch_plan(bucketed.bucket_minutes(), *horizon)?.horizon_steps;
            let (history, actual) = if *holdout {
                if bucketed.len() <= steps {
                    bail!("forecast: series too short to hold out {steps} buckets");
                }
                let (h, a) = bucketed.split_at(bucketed.len() - steps)?;
                (h, Some(a))
            } else {
                (bucketed, None)
            };
            let model = predictor.build(history.bucket_minutes()).context("forecast")?;
            let forecast = predict(model.as_ref(), &history, steps).context("forecast")?;
            let error = actual.as_ref().map(|a| nrmse(forecast.values(), a.values())).transpose()?;
            emit_json(
                cli,
                json!({
                    "cell": cell,
                    "predictor": model.name(),
                    "bucket_minutes": forecast.bucket_minutes(),
                    "start_time": forecast.start_time(),
                    "forecast": forecast.values(),
                    "peak": forecast.peak(),
                    "nrmse": error,
                }),
            )
        }
        Command::Pipeline { config, script } => {
            let (inputs, backend) = pipeline_inputs(cli, config, script)?;
            let result = run_pipeline(&inputs, backend.as_ref(), cli.seed)?;
            let mut out = output(cli)?;
            writeln!(out, "{}", result.to_json())?;
            Ok(())
        }
        Command::SweepTau { config, script, taus } => {
            let (inputs, backend) = pipeline_inputs(cli, config, script)?;
            let rows = sweep_tau(&inputs, backend.as_ref(), taus, cli.seed)?;
            write_sweep_csv(&rows, output(cli)?)?;
            Ok(())
        }
        Command::EvalAccuracy { fixture } => {
            let fixture = EvalFixture::load(fixture)?;
            let live = cli.backend == BackendKind::Live;
            let backend_for = |q: &EvalQuery| -> Result<Box<dyn LlmBackend>, BackendError> {
                if live {
                    Ok(Box::new(LiveBackend::from_env()?))
                } else {
                    Ok(Box::new(MockBackend::new(q.script.clone())?))
                }
            };
            let rows = eval_accuracy(&fixture, &backend_for);
            write_eval_csv(&rows, output(cli)?)?;
            Ok(())
        }
    }
}
