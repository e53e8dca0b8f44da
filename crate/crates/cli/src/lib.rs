//! Input parsing, flag grammars, and report serialization for the ssakit
//! binary.
//!
//! Exit codes: 0 success, 2 usage (bad flags or flag grammar), 3 input
//! (missing file, malformed CSV, calendar gaps), 4 computation (any error
//! from the analysis itself). Diagnostics name the originating module and
//! end with a remediation hint.
//!
//! Report files carry the resolved configuration as `#` comment lines (CSV)
//! or a `config` object (JSON); numbers are written with 17 significant
//! digits so they round-trip exactly.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Serialize;
use ssakit::evaluation::{ErrorReport, GroupingSpec, StrategyReport, SweepSurface};
use ssakit::window::log_bounds;
use ssakit::{Error as CoreError, Grouping, TimeSeries, WindowSpec};

pub const ARTIFACT: &str = "ssakit";
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// CLI-level failures, including wrapped analysis errors.
#[derive(Debug)]
pub enum CliError {
    Io { path: PathBuf, detail: String },
    Parse { line: usize, detail: String },
    Gap { line: usize, expected: NaiveDate, found: NaiveDate },
    EmptyInput,
    MissingColumn { name: String },
    MissingDates { subcommand: &'static str },
    Usage(String),
    Core(CoreError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, detail } => write!(f, "{}: {detail}", path.display()),
            CliError::Parse { line, detail } => write!(f, "line {line}: {detail}"),
            CliError::Gap { line, expected, found } => {
                write!(f, "line {line}: dates must be contiguous, expected {expected}, found {found}")
            }
            CliError::EmptyInput => write!(f, "input contains no data rows"),
            CliError::MissingColumn { name } => write!(f, "input has no {name:?} column"),
            CliError::MissingDates { subcommand } => {
                write!(f, "`{subcommand}` needs dated input, but the series has no date column")
            }
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn module(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.module(),
            CliError::Usage(_) => "config",
            _ => "input",
        }
    }

    pub fn hint(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "check the path and permissions",
            CliError::Parse { .. } => "fix the offending row; expected ISO dates and decimal values",
            CliError::Gap { .. } => "the protocol needs daily cadence; fill or split the series",
            CliError::EmptyInput => "the file needs a header row plus at least one data row",
            CliError::MissingColumn { .. } => {
                "name the columns with --date-column/--value-column if they differ"
            }
            CliError::MissingDates { .. } => {
                "add an ISO-8601 date column; the final-year protocol is calendar-based"
            }
            CliError::Usage(_) => "see --help for the accepted grammar",
            CliError::Core(e) => e.hint(),
        }
    }

    /// Stable exit code: 2 usage, 3 input, 4 computation.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(_) => 4,
            _ => 3,
        }
    }
}

/// Input column names; both default to the schema names.
#[derive(Debug, Clone)]
pub struct ColumnMap {
    pub date: String,
    pub value: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap { date: "date".into(), value: "value".into() }
    }
}

/// Reads a CSV with a header into a series. The value column is required;
/// the date column is optional but, when present, must advance by exactly
/// one day per row. Line numbers count the header as line 1.
pub fn load_series(path: &Path, map: &ColumnMap) -> Result<TimeSeries, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| CliError::Parse { line: 1, detail: e.to_string() })?
        .clone();
    let value_idx = headers
        .iter()
        .position(|h| h == map.value)
        .ok_or_else(|| CliError::MissingColumn { name: map.value.clone() })?;
    let date_idx = headers.iter().position(|h| h == map.date);

    let mut values = Vec::new();
    let mut start: Option<NaiveDate> = None;
    let mut prev: Option<NaiveDate> = None;
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| CliError::Parse { line, detail: e.to_string() })?;
        let raw = record
            .get(value_idx)
            .ok_or_else(|| CliError::Parse { line, detail: "missing value field".into() })?;
        let v: f64 = raw
            .parse()
            .map_err(|_| CliError::Parse { line, detail: format!("{raw:?} is not a number") })?;
        if !v.is_finite() {
            return Err(CliError::Parse { line, detail: format!("non-finite value {raw:?}") });
        }
        if let Some(di) = date_idx {
            let raw_date = record
                .get(di)
                .ok_or_else(|| CliError::Parse { line, detail: "missing date field".into() })?;
            let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| {
                CliError::Parse { line, detail: format!("{raw_date:?} is not an ISO-8601 date") }
            })?;
            if let Some(p) = prev {
                let expected = p + chrono::Days::new(1);
                if date != expected {
                    return Err(CliError::Gap { line, expected, found: date });
                }
            }
            start.get_or_insert(date);
            prev = Some(date);
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::EmptyInput);
    }
    let mut series = TimeSeries::new(values)?;
    if let Some(d0) = start {
        series = series.with_start_date(d0);
    }
    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
        series = series.with_name(stem);
    }
    Ok(series)
}

/// `--window` grammar: auto-ma | confband[:level] | log-lo | log-hi | big |
/// fixed:<L>.
pub fn parse_window(arg: &str) -> Result<WindowSpec, CliError> {
    match arg {
        "auto-ma" => Ok(WindowSpec::AutoMa),
        "confband" => Ok(WindowSpec::Confband { level: 0.95 }),
        "log-lo" => Ok(WindowSpec::LogLo),
        "log-hi" => Ok(WindowSpec::LogHi),
        "big" => Ok(WindowSpec::Big),
        _ => {
            if let Some(raw) = arg.strip_prefix("confband:") {
                let level: f64 = raw.parse().map_err(|_| bad_window(arg))?;
                if !(0.0 < level && level < 1.0) {
                    return Err(CliError::Usage(format!(
                        "confidence level must lie in (0, 1), got {raw}"
                    )));
                }
                return Ok(WindowSpec::Confband { level });
            }
            if let Some(raw) = arg.strip_prefix("fixed:") {
                let length: usize = raw.parse().map_err(|_| bad_window(arg))?;
                if length < 2 {
                    return Err(CliError::Usage(format!(
                        "fixed window must be at least 2, got {length}"
                    )));
                }
                return Ok(WindowSpec::Fixed { length });
            }
            Err(bad_window(arg))
        }
    }
}

fn bad_window(arg: &str) -> CliError {
    CliError::Usage(format!(
        "unknown window method {arg:?} (expected auto-ma | confband[:level] | log-lo | log-hi | big | fixed:<L>)"
    ))
}

/// One `--grouping` argument. `sweep` and `strategy` select whole pipelines,
/// everything else names a per-day grouping rule.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupingArg {
    Spec(GroupingSpec),
    Sweep,
    Strategy,
}

/// `--grouping` grammar: auto-wcor[:k] | prefix:<M> | prefix:full |
/// set:<i,j,...> | sweep | strategy.
pub fn parse_grouping(arg: &str) -> Result<GroupingArg, CliError> {
    match arg {
        "sweep" => return Ok(GroupingArg::Sweep),
        "strategy" => return Ok(GroupingArg::Strategy),
        "auto-wcor" => return Ok(GroupingArg::Spec(GroupingSpec::Auto { n_clusters: 2 })),
        "prefix:full" => return Ok(GroupingArg::Spec(GroupingSpec::FullPrefix)),
        _ => {}
    }
    if let Some(raw) = arg.strip_prefix("auto-wcor:") {
        let k: usize = raw.parse().map_err(|_| bad_grouping(arg))?;
        if k < 1 {
            return Err(CliError::Usage("auto-wcor needs at least one cluster".into()));
        }
        return Ok(GroupingArg::Spec(GroupingSpec::Auto { n_clusters: k }));
    }
    if let Some(raw) = arg.strip_prefix("prefix:") {
        let m: usize = raw.parse().map_err(|_| bad_grouping(arg))?;
        if m < 1 {
            return Err(CliError::Usage("prefix groupings start at [1]".into()));
        }
        return Ok(GroupingArg::Spec(GroupingSpec::Prefix { m }));
    }
    if let Some(raw) = arg.strip_prefix("set:") {
        let mut indices = Vec::new();
        for part in raw.split(',') {
            let k: usize = part
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("set element {part:?} is not an index")))?;
            indices.push(k);
        }
        let group = Grouping::new(indices)
            .map_err(|e| CliError::Usage(format!("invalid component set: {e}")))?;
        return Ok(GroupingArg::Spec(GroupingSpec::Fixed { indices: group }));
    }
    Err(bad_grouping(arg))
}

fn bad_grouping(arg: &str) -> CliError {
    CliError::Usage(format!(
        "unknown grouping policy {arg:?} (expected auto-wcor[:k] | prefix:<M> | prefix:full | set:<i,j,...> | sweep | strategy)"
    ))
}

/// Window length after applying the documented fallback: when the selector
/// reports no usable autocorrelation structure, use the logarithmic lower
/// bound instead. Returns (length, fell_back).
pub fn resolve_window(series: &TimeSeries, spec: &WindowSpec) -> Result<(usize, bool), CliError> {
    match spec.select(series) {
        Ok(choice) => Ok((choice.length, false)),
        Err(CoreError::NoSignChange { .. }) | Err(CoreError::NoCrossing { .. }) => {
            let (lo, _) = log_bounds(series.len())?;
            Ok((lo, true))
        }
        Err(e) => Err(e.into()),
    }
}

/// 17 significant digits: enough for f64 to round-trip exactly.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Resolved run parameters, echoed into every report. Execution details
/// like --jobs are deliberately absent: reports must be byte-identical
/// across thread counts.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub subcommand: String,
    pub input: String,
    pub window: String,
    pub grouping: String,
    pub h_max: Option<usize>,
    pub seed: Option<u64>,
}

impl ConfigEcho {
    fn comment(&self) -> String {
        let h_max = self.h_max.map(|h| h.to_string()).unwrap_or_else(|| "-".into());
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
        format!(
            "# config: subcommand={} input={} window={} grouping={} h_max={} seed={}",
            self.subcommand, self.input, self.window, self.grouping, h_max, seed
        )
    }
}

#[derive(Serialize)]
struct ReportFile<'a, T: Serialize> {
    artifact: &'static str,
    version: &'static str,
    kind: &'static str,
    config: &'a ConfigEcho,
    report: &'a T,
}

/// JSON document: metadata wrapper around the serialized report.
pub fn render_json<T: Serialize>(
    kind: &'static str,
    config: &ConfigEcho,
    report: &T,
) -> Result<String, CliError> {
    let file = ReportFile { artifact: ARTIFACT, version: ARTIFACT_VERSION, kind, config, report };
    let mut out = serde_json::to_string_pretty(&file)
        .map_err(|e| CliError::Usage(format!("serialization failed: {e}")))?;
    out.push('\n');
    Ok(out)
}

fn header_comment(kind: &str) -> String {
    format!("# {ARTIFACT} {kind} report v{ARTIFACT_VERSION}")
}

fn day_comments(days: &[ssakit::evaluation::DayRecord], out: &mut String) {
    for d in days {
        let date = d.date.map(|x| x.to_string()).unwrap_or_else(|| "-".into());
        let window = d.window.map(|w| w.to_string()).unwrap_or_else(|| "-".into());
        let groupings: Vec<String> = d
            .groupings
            .iter()
            .map(|g| g.clone().unwrap_or_else(|| "-".into()))
            .collect();
        out.push_str(&format!(
            "# day: index={} date={} window={} fallback={} groupings={}\n",
            d.index,
            date,
            window,
            d.window_fallback,
            groupings.join(";")
        ));
    }
}

fn csv_rows(rows: Vec<Vec<String>>) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf8 csv")
}

/// CSV rendering of a rolling-origin report: comment metadata, then one data
/// row per (method, grouping, horizon).
pub fn render_report_csv(report: &ErrorReport, config: &ConfigEcho) -> String {
    let mut out = header_comment("evaluate");
    out.push('\n');
    out.push_str(&config.comment());
    out.push('\n');
    out.push_str(&format!(
        "# series: name={} n={} span={} h_max={} seed={} days={} decompositions={} window_fallbacks={}\n",
        report.series_name.as_deref().unwrap_or("-"),
        report.n,
        fmt_num(report.span),
        report.h_max,
        report.seed,
        report.day_count,
        report.decompositions,
        report.window_fallbacks
    ));
    day_comments(&report.days, &mut out);
    let mut rows = vec![vec![
        "method".into(),
        "grouping".into(),
        "horizon".into(),
        "days".into(),
        "failed".into(),
        "mean_abs".into(),
        "max_abs".into(),
        "mean_rel".into(),
        "max_rel".into(),
    ]];
    for c in &report.cells {
        rows.push(vec![
            c.method.clone(),
            c.grouping.clone(),
            c.horizon.to_string(),
            c.days.to_string(),
            c.failed.to_string(),
            fmt_num(c.mean_abs),
            fmt_num(c.max_abs),
            fmt_num(c.mean_rel),
            fmt_num(c.max_rel),
        ]);
    }
    out.push_str(&csv_rows(rows));
    out
}

/// CSV rendering of a sweep surface: exactly l_min * h_max data rows; the
/// baseline cells ride along as comments so the data block stays plot-ready.
pub fn render_sweep_csv(surface: &SweepSurface, config: &ConfigEcho) -> String {
    let mut out = header_comment("sweep");
    out.push('\n');
    out.push_str(&config.comment());
    out.push('\n');
    out.push_str(&format!(
        "# series: name={} n={} span={} h_max={} seed={} l_min={} m_mean={} m_max={} days={} decompositions={} window_fallbacks={}\n",
        surface.series_name.as_deref().unwrap_or("-"),
        surface.n,
        fmt_num(surface.span),
        surface.h_max,
        surface.seed,
        surface.l_min,
        surface.m_mean,
        surface.m_max,
        surface.day_count,
        surface.decompositions,
        surface.window_fallbacks
    ));
    for b in &surface.baselines {
        out.push_str(&format!(
            "# baseline: method={} horizon={} days={} failed={} mean_abs={} max_abs={} mean_rel={} max_rel={}\n",
            b.method,
            b.horizon,
            b.days,
            b.failed,
            fmt_num(b.mean_abs),
            fmt_num(b.max_abs),
            fmt_num(b.mean_rel),
            fmt_num(b.max_rel)
        ));
    }
    day_comments(&surface.days, &mut out);
    let mut rows = vec![vec![
        "m".into(),
        "horizon".into(),
        "days".into(),
        "failed".into(),
        "mean_rel".into(),
        "max_rel".into(),
    ]];
    for c in &surface.cells {
        rows.push(vec![
            c.m.to_string(),
            c.horizon.to_string(),
            c.days.to_string(),
            c.failed.to_string(),
            c.mean_rel.map(fmt_num).unwrap_or_default(),
            c.max_rel.map(fmt_num).unwrap_or_default(),
        ]);
    }
    out.push_str(&csv_rows(rows));
    out
}

/// Window line echoed by decompose/forecast reports.
#[derive(Debug, Clone, Serialize)]
pub struct WindowEcho {
    pub length: usize,
    pub method: String,
    pub fallback: bool,
}

/// Forecast report payload.
#[derive(Debug, Clone, Serialize)]
pub struct ForecastDoc {
    pub window: WindowEcho,
    pub grouping: String,
    pub horizon: usize,
    pub values: Vec<f64>,
    pub dates: Option<Vec<NaiveDate>>,
}

pub fn render_forecast_csv(doc: &ForecastDoc, config: &ConfigEcho) -> String {
    let mut out = header_comment("forecast");
    out.push('\n');
    out.push_str(&config.comment());
    out.push('\n');
    out.push_str(&format!(
        "# window: length={} method={} fallback={}\n# grouping: {}\n",
        doc.window.length, doc.window.method, doc.window.fallback, doc.grouping
    ));
    let dated = doc.dates.is_some();
    let mut rows = vec![if dated {
        vec!["step".to_string(), "date".into(), "value".into()]
    } else {
        vec!["step".to_string(), "value".into()]
    }];
    for (i, v) in doc.values.iter().enumerate() {
        let mut row = vec![(i + 1).to_string()];
        if let Some(dates) = &doc.dates {
            row.push(dates[i].to_string());
        }
        row.push(fmt_num(*v));
        rows.push(row);
    }
    out.push_str(&csv_rows(rows));
    out
}

/// Decomposition summary payload.
#[derive(Debug, Clone, Serialize)]
pub struct DecomposeDoc {
    pub window: WindowEcho,
    pub n: usize,
    pub sigmas: Vec<f64>,
    pub energy_share: Vec<f64>,
    pub energy_cumulative: Vec<f64>,
}

impl DecomposeDoc {
    pub fn new(window: WindowEcho, n: usize, sigmas: Vec<f64>, keep: Option<usize>) -> Self {
        let total: f64 = sigmas.iter().map(|s| s * s).sum();
        let mut share = Vec::with_capacity(sigmas.len());
        let mut cumulative = Vec::with_capacity(sigmas.len());
        let mut acc = 0.0;
        for s in &sigmas {
            let e = if total > 0.0 { s * s / total } else { 0.0 };
            acc += e;
            share.push(e);
            cumulative.push(acc);
        }
        let keep = keep.unwrap_or(sigmas.len()).min(sigmas.len());
        DecomposeDoc {
            window,
            n,
            sigmas: sigmas[..keep].to_vec(),
            energy_share: share[..keep].to_vec(),
            energy_cumulative: cumulative[..keep].to_vec(),
        }
    }
}

pub fn render_decompose_csv(doc: &DecomposeDoc, config: &ConfigEcho) -> String {
    let mut out = header_comment("decompose");
    out.push('\n');
    out.push_str(&config.comment());
    out.push('\n');
    out.push_str(&format!(
        "# window: length={} method={} fallback={}\n# series: n={}\n",
        doc.window.length, doc.window.method, doc.window.fallback, doc.n
    ));
    let mut rows = vec![vec![
        "component".to_string(),
        "sigma".into(),
        "energy_share".into(),
        "energy_cumulative".into(),
    ]];
    for (i, s) in doc.sigmas.iter().enumerate() {
        rows.push(vec![
            (i + 1).to_string(),
            fmt_num(*s),
            fmt_num(doc.energy_share[i]),
            fmt_num(doc.energy_cumulative[i]),
        ]);
    }
    out.push_str(&csv_rows(rows));
    out
}

pub fn render_strategy_csv(
    report: &StrategyReport,
    dates: Option<&[NaiveDate]>,
    config: &ConfigEcho,
) -> String {
    let mut out = header_comment("strategy");
    out.push('\n');
    out.push_str(&config.comment());
    out.push('\n');
    let fmt_err = |e: Option<f64>| e.map(fmt_num).unwrap_or_else(|| "-".into());
    out.push_str(&format!(
        "# train: len={} window={}\n# test: len={}\n# full: window={}\n",
        report.train_len, report.window_train, report.test_len, report.window_full
    ));
    out.push_str(&format!(
        "# search: g_train={} mg={} e_mg={} m2={} e_m2={}\n",
        report.g_train,
        report.mg_set,
        fmt_err(report.e_mg),
        report.m2_set,
        fmt_err(report.e_m2)
    ));
    let moves: Vec<String> = report.moves_g.iter().map(|m| m.to_string()).collect();
    out.push_str(&format!(
        "# chosen: set={} source={} g_full={} moves={}\n",
        report.chosen,
        report.chosen_source,
        report.g_full.as_deref().unwrap_or("-"),
        if moves.is_empty() { "-".into() } else { moves.join(";") }
    ));
    let mut rows = vec![if dates.is_some() {
        vec!["step".to_string(), "date".into(), "value".into()]
    } else {
        vec!["step".to_string(), "value".into()]
    }];
    for (i, v) in report.forecast.iter().enumerate() {
        let mut row = vec![(i + 1).to_string()];
        if let Some(dates) = dates {
            row.push(dates[i].to_string());
        }
        row.push(fmt_num(*v));
        rows.push(row);
    }
    out.push_str(&csv_rows(rows));
    out
}

/// Writes to the path, or stdout when no path is given.
pub fn emit(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, content).map_err(|e| CliError::Io {
            path: p.to_path_buf(),
            detail: e.to_string(),
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|e| CliError::Io { path: PathBuf::from("<stdout>"), detail: e.to_string() })
        }
    }
}
