use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ssakit::evaluation::EvalPlan;
use ssakit::series::embed;
use ssakit::{decompose, TimeSeries, WindowSpec};
use ssakit_cli::{
    emit, load_series, parse_grouping, parse_window, render_decompose_csv, render_forecast_csv,
    render_json, render_report_csv, render_strategy_csv, render_sweep_csv, resolve_window,
    CliError, ColumnMap, ConfigEcho, DecomposeDoc, ForecastDoc, GroupingArg, WindowEcho,
};

#[derive(Parser)]
#[command(
    name = "ssakit",
    version,
    about = "Singular spectrum analysis: decomposition, forecasting, evaluation",
    propagate_version = true
)]
struct Cli {
    /// Worker threads for the evaluation protocol (falls back to the
    /// SSAKIT_JOBS environment variable, then to all cores). Reports are
    /// byte-identical regardless of this setting.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputArgs {
    /// Input CSV file with a header row
    input: PathBuf,
    /// Column holding ISO-8601 dates (optional in the file)
    #[arg(long, default_value = "date")]
    date_column: String,
    /// Column holding the series values
    #[arg(long, default_value = "value")]
    value_column: String,
}

impl InputArgs {
    fn load(&self) -> Result<TimeSeries, CliError> {
        let map = ColumnMap { date: self.date_column.clone(), value: self.value_column.clone() };
        load_series(&self.input, &map)
    }

    fn display(&self) -> String {
        self.input.display().to_string()
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Write the report to this file instead of stdout
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Report format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose the series and report the singular spectrum
    Decompose {
        #[command(flatten)]
        input: InputArgs,
        /// Window method: auto-ma | confband[:level] | log-lo | log-hi | big | fixed:<L>
        #[arg(long, default_value = "auto-ma")]
        window: String,
        /// Keep only the leading components in the report
        #[arg(long)]
        components: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Select a window length and print it
    SelectWindow {
        #[command(flatten)]
        input: InputArgs,
        /// Window method: auto-ma | confband[:level] | log-lo | log-hi | big | fixed:<L>
        #[arg(long, default_value = "auto-ma")]
        method: String,
    },
    /// Forecast future values by linear-recurrence continuation
    Forecast {
        #[command(flatten)]
        input: InputArgs,
        /// Window method: auto-ma | confband[:level] | log-lo | log-hi | big | fixed:<L>
        #[arg(long, default_value = "auto-ma")]
        window: String,
        /// Grouping policy: auto-wcor[:k] | prefix:<M> | prefix:full | set:<i,j,...>
        #[arg(long, default_value = "auto-wcor")]
        grouping: String,
        /// Steps ahead
        #[arg(long, default_value_t = 30)]
        horizon: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Rolling-origin forecast errors over the final calendar year
    Evaluate {
        #[command(flatten)]
        input: InputArgs,
        /// Window method, re-selected on every forecasting day's history
        #[arg(long, default_value = "auto-ma")]
        window: String,
        /// Grouping policy, repeatable; `sweep` runs the whole prefix sweep
        #[arg(long = "grouping")]
        groupings: Vec<String>,
        /// Largest horizon
        #[arg(long, default_value_t = 30)]
        h_max: usize,
        /// Seed for the random-walk baseline
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Error surface over all prefix groupings [1], ..., [min_j L_j]
    Sweep {
        #[command(flatten)]
        input: InputArgs,
        /// Window method, re-selected on every forecasting day's history
        #[arg(long, default_value = "auto-ma")]
        window: String,
        /// Largest horizon
        #[arg(long, default_value_t = 30)]
        h_max: usize,
        /// Seed for the random-walk baseline
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Train/test grouping selection, then a forecast from the full series
    Strategy {
        #[command(flatten)]
        input: InputArgs,
        /// Window method, selected separately on the training and full series
        #[arg(long, default_value = "auto-ma")]
        window: String,
        /// Forecast horizon, also the per-candidate scoring depth
        #[arg(long, default_value_t = 30)]
        h_max: usize,
        /// Held-out suffix length for candidate scoring
        #[arg(long, default_value_t = 365)]
        test_suffix: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn main() {
    // Parallelism belongs to the day loop; keep BLAS single-threaded unless
    // the user says otherwise.
    for var in ["OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS"] {
        if std::env::var_os(var).is_none() {
            std::env::set_var(var, "1");
        }
    }
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error[{}]: {e}", e.module());
        eprintln!("hint: {}", e.hint());
        std::process::exit(i32::from(e.exit_code()));
    }
}

fn configure_jobs(flag: Option<usize>) -> Result<(), CliError> {
    let jobs = match flag {
        Some(j) => Some(j),
        None => match std::env::var("SSAKIT_JOBS") {
            Ok(raw) => Some(raw.trim().parse::<usize>().map_err(|_| {
                CliError::Usage(format!("SSAKIT_JOBS must be a positive integer, got {raw:?}"))
            })?),
            Err(_) => None,
        },
    };
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))?;
    }
    Ok(())
}

fn warn_fallback(fell_back: bool, l: usize) {
    if fell_back {
        eprintln!(
            "warning: selector found no usable autocorrelation structure; \
             using the logarithmic lower bound L = {l}"
        );
    }
}

/// Calendar dates for forecast steps 1..=h, when the series is dated.
fn forecast_dates(series: &TimeSeries, h: usize) -> Option<Vec<chrono::NaiveDate>> {
    let d0 = series.start_date()?;
    let n = series.len() as u64;
    Some((1..=h as u64).map(|s| d0 + chrono::Days::new(n - 1 + s)).collect())
}

fn require_dates(series: &TimeSeries, subcommand: &'static str) -> Result<(), CliError> {
    if series.start_date().is_none() {
        Err(CliError::MissingDates { subcommand })
    } else {
        Ok(())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_jobs(cli.jobs)?;
    match cli.command {
        Command::Decompose { input, window, components, output } => {
            let series = input.load()?;
            let spec = parse_window(&window)?;
            let (l, fell_back) = resolve_window(&series, &spec)?;
            warn_fallback(fell_back, l);
            let d = decompose(&embed(&series, l)?)?;
            let doc = DecomposeDoc::new(
                WindowEcho { length: l, method: spec.label(), fallback: fell_back },
                series.len(),
                d.singular_values().to_vec(),
                components,
            );
            let config = ConfigEcho {
                subcommand: "decompose".into(),
                input: input.display(),
                window: spec.label(),
                grouping: "-".into(),
                h_max: None,
                seed: None,
            };
            let text = match output.format {
                Format::Csv => render_decompose_csv(&doc, &config),
                Format::Json => render_json("decompose", &config, &doc)?,
            };
            emit(output.output.as_deref(), &text)
        }
        Command::SelectWindow { input, method } => {
            let series = input.load()?;
            let spec = parse_window(&method)?;
            let (l, fell_back) = resolve_window(&series, &spec)?;
            warn_fallback(fell_back, l);
            println!("{l}");
            Ok(())
        }
        Command::Forecast { input, window, grouping, horizon, output } => {
            let series = input.load()?;
            let wspec = parse_window(&window)?;
            let gspec = match parse_grouping(&grouping)? {
                GroupingArg::Spec(spec) => spec,
                GroupingArg::Sweep | GroupingArg::Strategy => {
                    return Err(CliError::Usage(
                        "sweep and strategy are whole pipelines; use the `sweep` and `strategy` subcommands".into(),
                    ))
                }
            };
            let (l, fell_back) = resolve_window(&series, &wspec)?;
            warn_fallback(fell_back, l);
            let d = decompose(&embed(&series, l)?)?;
            let group = gspec.resolve(&d)?;
            let result = ssakit::vector_forecast(&d, &group, horizon)?;
            let doc = ForecastDoc {
                window: WindowEcho { length: l, method: wspec.label(), fallback: fell_back },
                grouping: group.to_string(),
                horizon,
                dates: forecast_dates(&series, horizon),
                values: result.values,
            };
            let config = ConfigEcho {
                subcommand: "forecast".into(),
                input: input.display(),
                window: wspec.label(),
                grouping: gspec.label(),
                h_max: Some(horizon),
                seed: None,
            };
            let text = match output.format {
                Format::Csv => render_forecast_csv(&doc, &config),
                Format::Json => render_json("forecast", &config, &doc)?,
            };
            emit(output.output.as_deref(), &text)
        }
        Command::Evaluate { input, window, groupings, h_max, seed, output } => {
            let series = input.load()?;
            require_dates(&series, "evaluate")?;
            let wspec = parse_window(&window)?;
            let raw = if groupings.is_empty() { vec!["auto-wcor".to_string()] } else { groupings };
            let parsed = raw
                .iter()
                .map(|s| parse_grouping(s))
                .collect::<Result<Vec<_>, _>>()?;
            if parsed.contains(&GroupingArg::Strategy) {
                return Err(CliError::Usage(
                    "the strategy pipeline has its own subcommand; run `ssakit strategy`".into(),
                ));
            }
            if parsed.contains(&GroupingArg::Sweep) {
                if parsed.len() > 1 {
                    return Err(CliError::Usage(
                        "--grouping sweep covers every prefix and cannot be combined".into(),
                    ));
                }
                return run_sweep(&series, input.display(), wspec, h_max, seed, &output);
            }
            let specs = parsed
                .into_iter()
                .map(|arg| match arg {
                    GroupingArg::Spec(spec) => spec,
                    _ => unreachable!("sweep and strategy handled above"),
                })
                .collect::<Vec<_>>();
            let labels =
                specs.iter().map(|s| s.label()).collect::<Vec<_>>().join(";");
            let plan = EvalPlan::new(wspec, specs, seed).with_h_max(h_max);
            let report = ssakit::rolling_eval(&series, &plan)?;
            let config = ConfigEcho {
                subcommand: "evaluate".into(),
                input: input.display(),
                window: wspec.label(),
                grouping: labels,
                h_max: Some(h_max),
                seed: Some(seed),
            };
            let text = match output.format {
                Format::Csv => render_report_csv(&report, &config),
                Format::Json => render_json("evaluate", &config, &report)?,
            };
            emit(output.output.as_deref(), &text)
        }
        Command::Sweep { input, window, h_max, seed, output } => {
            let series = input.load()?;
            require_dates(&series, "sweep")?;
            let wspec = parse_window(&window)?;
            run_sweep(&series, input.display(), wspec, h_max, seed, &output)
        }
        Command::Strategy { input, window, h_max, test_suffix, output } => {
            let series = input.load()?;
            let wspec = parse_window(&window)?;
            let plan = EvalPlan::new(wspec, vec![], 0).with_h_max(h_max);
            let report = ssakit::practitioner_strategy(&series, &plan, test_suffix)?;
            let dates = forecast_dates(&series, report.forecast.len());
            let config = ConfigEcho {
                subcommand: "strategy".into(),
                input: input.display(),
                window: wspec.label(),
                grouping: "strategy".into(),
                h_max: Some(h_max),
                seed: None,
            };
            let text = match output.format {
                Format::Csv => render_strategy_csv(&report, dates.as_deref(), &config),
                Format::Json => render_json("strategy", &config, &report)?,
            };
            emit(output.output.as_deref(), &text)
        }
    }
}

fn run_sweep(
    series: &TimeSeries,
    input: String,
    wspec: WindowSpec,
    h_max: usize,
    seed: u64,
    output: &OutputArgs,
) -> Result<(), CliError> {
    let plan = EvalPlan::new(wspec, vec![], seed).with_h_max(h_max);
    let surface = ssakit::sweep_prefix(series, &plan)?;
    let config = ConfigEcho {
        subcommand: "sweep".into(),
        input,
        window: wspec.label(),
        grouping: "sweep".into(),
        h_max: Some(h_max),
        seed: Some(seed),
    };
    let text = match output.format {
        Format::Csv => render_sweep_csv(&surface, &config),
        Format::Json => render_json("sweep", &config, &surface)?,
    };
    emit(output.output.as_deref(), &text)
}
