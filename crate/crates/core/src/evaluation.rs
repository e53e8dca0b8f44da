//! Rolling-origin evaluation: forecasting-day sets over the final calendar
//! year, per-horizon error summaries against the naive baselines, prefix
//! grouping sweeps with a-posteriori argmin selection, the neighborhood
//! local-minimum check, and the train/test practitioner strategy.
//!
//! For every origin day j the series prefix is decomposed exactly once and
//! every requested grouping forecasts all horizons from that decomposition.
//! Day results are computed independently (optionally in parallel) and
//! aggregated in day order, so reports are bitwise reproducible regardless
//! of worker count.

use std::sync::atomic::{AtomicUsize, Ordering};

use chrono::{Datelike, NaiveDate};
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{constant_forecast, polyreg_forecast, random_forecast};
use crate::decomposition::{decompose, Decomposition};
use crate::error::{Error, Result};
use crate::forecast::{fit_lre_complement, vector_forecast};
use crate::grouping::{auto_group_wcor, neighborhood, neighborhood_of, Grouping};
use crate::series::{embed, TimeSeries};
use crate::window::{log_bounds, WindowSpec};

/// Which summary drives an argmin or local-minimum comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorMetric {
    MeanRel,
    MaxRel,
}

impl ErrorMetric {
    pub fn label(&self) -> &'static str {
        match self {
            ErrorMetric::MeanRel => "mean_rel",
            ErrorMetric::MaxRel => "max_rel",
        }
    }
}

/// How the grouping for each forecasting day is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy")]
pub enum GroupingSpec {
    /// w-correlation clustering, recomputed on every day's decomposition.
    Auto { n_clusters: usize },
    /// Fixed prefix [m].
    Prefix { m: usize },
    /// The largest forecastable prefix [L_j - 1] of that day's window.
    FullPrefix,
    /// An explicit index set.
    Fixed { indices: Grouping },
}

impl GroupingSpec {
    pub fn label(&self) -> String {
        match self {
            GroupingSpec::Auto { n_clusters } => format!("auto-wcor:{n_clusters}"),
            GroupingSpec::Prefix { m } => format!("prefix:{m}"),
            GroupingSpec::FullPrefix => "prefix:full".into(),
            GroupingSpec::Fixed { indices } => format!("set:{indices}"),
        }
    }

    /// Concrete index set under this policy for one decomposition.
    pub fn resolve(&self, d: &Decomposition) -> Result<Grouping> {
        match self {
            GroupingSpec::Auto { n_clusters } => auto_group_wcor(d, *n_clusters),
            GroupingSpec::Prefix { m } => {
                if *m > d.window() {
                    return Err(Error::IndexOutOfRange { index: *m, bound: d.window() });
                }
                Grouping::prefix(*m)
            }
            GroupingSpec::FullPrefix => Grouping::prefix(d.window() - 1),
            GroupingSpec::Fixed { indices } => {
                if indices.max_index() > d.window() {
                    return Err(Error::IndexOutOfRange {
                        index: indices.max_index(),
                        bound: d.window(),
                    });
                }
                Ok(indices.clone())
            }
        }
    }
}

/// Evaluation plan: horizons 1..=h_max, a window selection method, the
/// groupings to score, and the seed driving the random baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalPlan {
    pub h_max: usize,
    pub window: WindowSpec,
    pub groupings: Vec<GroupingSpec>,
    pub seed: u64,
}

impl EvalPlan {
    pub fn new(window: WindowSpec, groupings: Vec<GroupingSpec>, seed: u64) -> Self {
        EvalPlan { h_max: 30, window, groupings, seed }
    }

    pub fn with_h_max(mut self, h_max: usize) -> Self {
        self.h_max = h_max;
        self
    }
}

/// Forecasting days D_h (origins) and forecasted days F_h (targets), as
/// 1-based sample indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForecastingDays {
    pub horizon: usize,
    pub origins: Vec<usize>,
    pub targets: Vec<usize>,
}

impl ForecastingDays {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }
}

/// Origins for horizon h: the days of the final calendar year except
/// December 31, truncated so that j + h stays inside the data. Without
/// dates, the final year means the last 365 samples and leap handling is
/// disabled.
pub fn forecasting_days(series: &TimeSeries, h: usize) -> Result<ForecastingDays> {
    if h == 0 {
        return Err(Error::InvalidHorizon);
    }
    let n = series.len();
    let origins: Vec<usize> = match series.start_date() {
        Some(d0) => {
            let last = d0 + chrono::Days::new(n as u64 - 1);
            let year = last.year();
            let jan1 = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid date");
            if d0 >= jan1 {
                return Err(Error::TooShort {
                    detail: "evaluation needs data before the final calendar year".into(),
                });
            }
            let dec31 = NaiveDate::from_ymd_opt(year, 12, 31).expect("valid date");
            let first_j = (jan1 - d0).num_days() as usize + 1;
            (first_j..=n)
                .filter(|&j| {
                    let dj = d0 + chrono::Days::new(j as u64 - 1);
                    dj != dec31 && j + h <= n
                })
                .collect()
        }
        None => {
            if n < 730 {
                return Err(Error::TooShort {
                    detail: format!("dateless evaluation needs N >= 730, got {n}"),
                });
            }
            (n - 364..=n.saturating_sub(h)).collect()
        }
    };
    if origins.is_empty() {
        return Err(Error::TooShort {
            detail: format!("no forecasting days remain at horizon {h}"),
        });
    }
    let targets = origins.iter().map(|j| j + h).collect();
    Ok(ForecastingDays { horizon: h, origins, targets })
}

/// One (method, grouping, horizon) summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub method: String,
    pub grouping: String,
    pub horizon: usize,
    pub days: usize,
    pub failed: usize,
    pub mean_abs: f64,
    pub max_abs: f64,
    pub mean_rel: f64,
    pub max_rel: f64,
}

/// Per-origin bookkeeping: selected window and resolved groupings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub index: usize,
    pub date: Option<NaiveDate>,
    pub window: Option<usize>,
    pub window_fallback: bool,
    pub groupings: Vec<Option<String>>,
}

/// Full rolling-origin error report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub series_name: Option<String>,
    pub n: usize,
    pub span: f64,
    pub h_max: usize,
    pub seed: u64,
    pub day_count: usize,
    pub decompositions: usize,
    pub window_fallbacks: usize,
    pub cells: Vec<ReportCell>,
    pub days: Vec<DayRecord>,
}

impl ErrorReport {
    pub fn cell(&self, method: &str, grouping: &str, horizon: usize) -> Option<&ReportCell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.grouping == grouping && c.horizon == horizon)
    }

    /// Mean over horizons of the chosen metric for one (method, grouping).
    pub fn horizon_average(&self, method: &str, grouping: &str, metric: ErrorMetric) -> Option<f64> {
        let picked: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.method == method && c.grouping == grouping)
            .map(|c| match metric {
                ErrorMetric::MeanRel => c.mean_rel,
                ErrorMetric::MaxRel => c.max_rel,
            })
            .collect();
        if picked.is_empty() {
            None
        } else {
            Some(picked.iter().sum::<f64>() / picked.len() as f64)
        }
    }
}

/// mean/max absolute errors and their span-relative forms.
pub(crate) fn summarize(errors: &[f64], span: f64) -> (f64, f64, f64, f64) {
    let mean_abs = errors.iter().map(|e| e.abs()).sum::<f64>() / errors.len() as f64;
    let max_abs = errors.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
    (mean_abs, max_abs, mean_abs / span, max_abs / span)
}

/// Compact rendering for day records: prefixes become "1..M" so reports for
/// very wide windows stay small; other sets list their elements.
fn compact_label(g: &Grouping) -> String {
    if g.is_prefix() && g.len() > 2 {
        format!("1..{}", g.len())
    } else {
        format!("{g}")
    }
}

const DAY_SEED_MIX: u64 = 0x9E3779B97F4A7C15;

/// Windows at least this long with a single-column complement skip the full
/// SVD in favor of the bottom eigenpair of the lag-covariance matrix.
pub(crate) const PARTIAL_MIN_WINDOW: usize = 1024;

struct DayOutcome {
    j: usize,
    window: Option<usize>,
    window_fallback: bool,
    resolved: Vec<Option<String>>,
    ssa: Vec<Result<Vec<f64>>>,
    constant: Result<Vec<f64>>,
    random: Result<Vec<f64>>,
    polyreg: Result<Vec<f64>>,
}

fn select_window_with_fallback(prefix: &TimeSeries, spec: &WindowSpec) -> Result<(usize, bool)> {
    match spec.select(prefix) {
        Ok(choice) => Ok((choice.length, false)),
        Err(Error::NoSignChange { .. }) | Err(Error::NoCrossing { .. }) => {
            let (lo, _) = log_bounds(prefix.len())?;
            Ok((lo, true))
        }
        Err(e) => Err(e),
    }
}

fn run_day(
    series: &TimeSeries,
    plan: &EvalPlan,
    specs: &[GroupingSpec],
    j: usize,
    decompositions: &AtomicUsize,
) -> DayOutcome {
    let h = plan.h_max;
    let prefix = series.prefix(j).expect("origin day inside series");
    let day_seed = plan.seed ^ (j as u64).wrapping_mul(DAY_SEED_MIX);
    let constant = constant_forecast(&prefix, h).map(|f| f.values);
    let random = random_forecast(&prefix, h, day_seed).map(|f| f.values);
    let polyreg = polyreg_forecast(&prefix, h, 4).map(|f| f.values);

    let mut outcome = DayOutcome {
        j,
        window: None,
        window_fallback: false,
        resolved: vec![None; specs.len()],
        ssa: Vec::with_capacity(specs.len()),
        constant,
        random,
        polyreg,
    };

    let (l, fallback) = match select_window_with_fallback(&prefix, &plan.window) {
        Ok(pair) => pair,
        Err(e) => {
            outcome.ssa = specs.iter().map(|_| Err(e.clone())).collect();
            return outcome;
        }
    };
    outcome.window = Some(l);
    outcome.window_fallback = fallback;

    let only_full_prefix = specs.iter().all(|s| matches!(s, GroupingSpec::FullPrefix));
    if only_full_prefix && l >= PARTIAL_MIN_WINDOW {
        decompositions.fetch_add(1, Ordering::Relaxed);
        let run = || -> Result<Vec<f64>> {
            let x = prefix.values();
            let gram = hankel_gram(x, l);
            let (_, v) = bottom_eigenpair(&gram)?;
            let group = Grouping::prefix(l - 1)?;
            let cols = v.insert_axis(ndarray::Axis(1));
            let model = fit_lre_complement(group, (l, j - l + 1, j), cols)?;
            let x_tail = Array1::from_iter(x[j - l..].iter().copied());
            let seed = model.seed_column(&x_tail);
            model.values_from_seed(seed, h)
        };
        let result = run();
        let label = format!("1..{}", l - 1);
        for si in outcome.resolved.iter_mut() {
            *si = Some(label.clone());
        }
        outcome.ssa = specs.iter().map(|_| result.clone()).collect();
        return outcome;
    }

    let d = match embed(&prefix, l).and_then(|traj| decompose(&traj)) {
        Ok(d) => {
            decompositions.fetch_add(1, Ordering::Relaxed);
            d
        }
        Err(e) => {
            outcome.ssa = specs.iter().map(|_| Err(e.clone())).collect();
            return outcome;
        }
    };
    for (si, spec) in specs.iter().enumerate() {
        let forecast = spec.resolve(&d).and_then(|g| {
            outcome.resolved[si] = Some(compact_label(&g));
            vector_forecast(&d, &g, h).map(|f| f.values)
        });
        outcome.ssa.push(forecast);
    }
    outcome
}

struct EngineOutput {
    outcomes: Vec<DayOutcome>,
    decompositions: usize,
    window_fallbacks: usize,
    span: f64,
}

fn evaluate_days(series: &TimeSeries, plan: &EvalPlan, specs: &[GroupingSpec]) -> Result<EngineOutput> {
    if plan.h_max == 0 {
        return Err(Error::InvalidHorizon);
    }
    let span = series.span();
    if !(span > 0.0) {
        return Err(Error::SpanDegenerate);
    }
    let days = forecasting_days(series, 1)?;
    let counter = AtomicUsize::new(0);
    let outcomes: Vec<DayOutcome> = days
        .origins
        .par_iter()
        .map(|&j| run_day(series, plan, specs, j, &counter))
        .collect();
    let window_fallbacks = outcomes.iter().filter(|o| o.window_fallback).count();
    Ok(EngineOutput {
        outcomes,
        decompositions: counter.into_inner(),
        window_fallbacks,
        span,
    })
}

/// Cell values for one forecaster across horizons; None when every day in
/// D_h failed.
type CellSeries = Vec<Option<ReportCell>>;

fn collect_cells(
    method: &str,
    grouping: &str,
    h_max: usize,
    n: usize,
    span: f64,
    x: &[f64],
    outcomes: &[DayOutcome],
    pick: impl Fn(&DayOutcome) -> &Result<Vec<f64>>,
) -> CellSeries {
    (1..=h_max)
        .map(|h| {
            let mut errors = Vec::new();
            let mut failed = 0usize;
            for o in outcomes.iter().filter(|o| o.j + h <= n) {
                match pick(o) {
                    Ok(values) => errors.push(values[h - 1] - x[o.j + h - 1]),
                    Err(_) => failed += 1,
                }
            }
            if errors.is_empty() {
                return None;
            }
            let (mean_abs, max_abs, mean_rel, max_rel) = summarize(&errors, span);
            Some(ReportCell {
                method: method.into(),
                grouping: grouping.into(),
                horizon: h,
                days: errors.len(),
                failed,
                mean_abs,
                max_abs,
                mean_rel,
                max_rel,
            })
        })
        .collect()
}

fn day_records(series: &TimeSeries, outcomes: &[DayOutcome]) -> Vec<DayRecord> {
    outcomes
        .iter()
        .map(|o| DayRecord {
            index: o.j,
            date: series.date_of(o.j),
            window: o.window,
            window_fallback: o.window_fallback,
            groupings: o.resolved.clone(),
        })
        .collect()
}

/// Runs the rolling protocol and aggregates per (method, grouping, horizon).
/// A cell whose every day failed is an error; partial failures are recorded
/// in the cell's `failed` count.
pub fn rolling_eval(series: &TimeSeries, plan: &EvalPlan) -> Result<ErrorReport> {
    if plan.groupings.is_empty() {
        return Err(Error::InvalidParameter("no groupings requested".into()));
    }
    let engine = evaluate_days(series, plan, &plan.groupings)?;
    let x = series.values();
    let n = series.len();
    let mut cells = Vec::new();
    for (si, spec) in plan.groupings.iter().enumerate() {
        let label = spec.label();
        let series_cells = collect_cells(
            "ssa",
            &label,
            plan.h_max,
            n,
            engine.span,
            x,
            &engine.outcomes,
            |o| &o.ssa[si],
        );
        for cell in series_cells {
            cells.push(cell.ok_or(Error::AllCellsFailed)?);
        }
    }
    let baselines: [(&str, fn(&DayOutcome) -> &Result<Vec<f64>>); 3] = [
        ("constant", |o| &o.constant),
        ("random", |o| &o.random),
        ("polyreg", |o| &o.polyreg),
    ];
    for (name, pick) in baselines {
        for cell in collect_cells(name, "-", plan.h_max, n, engine.span, x, &engine.outcomes, pick)
        {
            cells.push(cell.ok_or(Error::AllCellsFailed)?);
        }
    }
    Ok(ErrorReport {
        series_name: series.name().map(str::to_owned),
        n,
        span: engine.span,
        h_max: plan.h_max,
        seed: plan.seed,
        day_count: engine.outcomes.len(),
        decompositions: engine.decompositions,
        window_fallbacks: engine.window_fallbacks,
        days: day_records(series, &engine.outcomes),
        cells,
    })
}

/// One point of the prefix sweep surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub m: usize,
    pub horizon: usize,
    pub days: usize,
    pub failed: usize,
    pub mean_rel: Option<f64>,
    pub max_rel: Option<f64>,
}

/// Errors of every prefix grouping [M], M in [min_j L_j], per horizon, with
/// the baselines scored on the same days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSurface {
    pub series_name: Option<String>,
    pub n: usize,
    pub span: f64,
    pub h_max: usize,
    pub l_min: usize,
    pub seed: u64,
    pub day_count: usize,
    pub decompositions: usize,
    pub window_fallbacks: usize,
    pub m_mean: usize,
    pub m_max: usize,
    pub cells: Vec<SweepCell>,
    pub baselines: Vec<ReportCell>,
    pub days: Vec<DayRecord>,
}

impl SweepSurface {
    pub fn cell(&self, m: usize, horizon: usize) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.m == m && c.horizon == horizon)
    }

    /// Mean over horizons of the metric for prefix [m]; None when the whole
    /// column is unavailable.
    pub fn column_average(&self, m: usize, metric: ErrorMetric) -> Option<f64> {
        let picked: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.m == m)
            .filter_map(|c| match metric {
                ErrorMetric::MeanRel => c.mean_rel,
                ErrorMetric::MaxRel => c.max_rel,
            })
            .collect();
        if picked.is_empty() {
            None
        } else {
            Some(picked.iter().sum::<f64>() / picked.len() as f64)
        }
    }
}

/// Smallest per-day window across the protocol; phase one of the sweep.
fn minimal_window(series: &TimeSeries, plan: &EvalPlan) -> Result<usize> {
    let days = forecasting_days(series, 1)?;
    let mut l_min = usize::MAX;
    for &j in &days.origins {
        let prefix = series.prefix(j)?;
        let (l, _) = select_window_with_fallback(&prefix, &plan.window)?;
        l_min = l_min.min(l);
    }
    Ok(l_min)
}

/// Rolls the full protocol once per prefix grouping [1], ..., [min_j L_j]
/// and tabulates the error surface. Prefix columns that fail on some days
/// keep reduced day counts; a column may be entirely absent (None cells)
/// when it failed everywhere, as [L_j] does on days where L_j hits the
/// minimum.
pub fn sweep_prefix(series: &TimeSeries, plan: &EvalPlan) -> Result<SweepSurface> {
    let l_min = minimal_window(series, plan)?;
    let specs: Vec<GroupingSpec> = (1..=l_min).map(|m| GroupingSpec::Prefix { m }).collect();
    let engine = evaluate_days(series, plan, &specs)?;
    let x = series.values();
    let n = series.len();

    let mut cells = Vec::with_capacity(l_min * plan.h_max);
    let mut any_data = false;
    for (si, m) in (1..=l_min).enumerate() {
        let column = collect_cells("ssa", "", plan.h_max, n, engine.span, x, &engine.outcomes, |o| {
            &o.ssa[si]
        });
        for (h, cell) in column.into_iter().enumerate() {
            let (days, failed, mean_rel, max_rel) = match cell {
                Some(c) => {
                    any_data = true;
                    (c.days, c.failed, Some(c.mean_rel), Some(c.max_rel))
                }
                None => {
                    let failed = engine.outcomes.iter().filter(|o| o.j + h + 1 <= n).count();
                    (0, failed, None, None)
                }
            };
            cells.push(SweepCell { m, horizon: h + 1, days, failed, mean_rel, max_rel });
        }
    }
    if !any_data {
        return Err(Error::AllCellsFailed);
    }

    let mut baselines = Vec::new();
    let picks: [(&str, fn(&DayOutcome) -> &Result<Vec<f64>>); 3] = [
        ("constant", |o| &o.constant),
        ("random", |o| &o.random),
        ("polyreg", |o| &o.polyreg),
    ];
    for (name, pick) in picks {
        for cell in collect_cells(name, "-", plan.h_max, n, engine.span, x, &engine.outcomes, pick)
        {
            baselines.push(cell.ok_or(Error::AllCellsFailed)?);
        }
    }

    let mut surface = SweepSurface {
        series_name: series.name().map(str::to_owned),
        n,
        span: engine.span,
        h_max: plan.h_max,
        l_min,
        seed: plan.seed,
        day_count: engine.outcomes.len(),
        decompositions: engine.decompositions,
        window_fallbacks: engine.window_fallbacks,
        m_mean: 0,
        m_max: 0,
        cells,
        baselines,
        days: day_records(series, &engine.outcomes),
    };
    let (m_mean, m_max) = optimal_prefix(&surface);
    surface.m_mean = m_mean;
    surface.m_max = m_max;
    Ok(surface)
}

/// A-posteriori optimal prefixes: argmin over M of the horizon-averaged
/// mean_rel (first) and max_rel (second). Ties break toward the smallest M;
/// columns without data are skipped.
pub fn optimal_prefix(surface: &SweepSurface) -> (usize, usize) {
    let argmin = |metric: ErrorMetric| -> usize {
        let mut best = (f64::INFINITY, 1usize);
        for m in 1..=surface.l_min {
            if let Some(avg) = surface.column_average(m, metric) {
                if avg < best.0 {
                    best = (avg, m);
                }
            }
        }
        best.1
    };
    (argmin(ErrorMetric::MeanRel), argmin(ErrorMetric::MaxRel))
}

/// A neighbor grouping's rolled error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborOutcome {
    pub grouping: String,
    pub error: Option<f64>,
}

/// Result of the neighborhood local-minimum check around a prefix [M*].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMinReport {
    pub m_star: usize,
    pub l_min: usize,
    pub metric: ErrorMetric,
    pub center_error: f64,
    pub neighbors: Vec<NeighborOutcome>,
    pub is_local_min: bool,
}

/// Rolls the protocol over [M*] and its full one-element neighborhood and
/// checks that every neighbor's horizon-averaged error strictly exceeds the
/// center's. Neighbors without any successful day count as exceeding.
pub fn local_min_check(
    series: &TimeSeries,
    plan: &EvalPlan,
    m_star: usize,
    metric: ErrorMetric,
) -> Result<LocalMinReport> {
    let l_min = minimal_window(series, plan)?;
    if m_star < 1 || m_star > l_min {
        return Err(Error::InvalidParameter(format!(
            "M* must lie in [1, {l_min}], got {m_star}"
        )));
    }
    let neighbors = neighborhood(m_star, l_min)?;
    let mut specs = vec![GroupingSpec::Prefix { m: m_star }];
    specs.extend(
        neighbors
            .iter()
            .map(|g| GroupingSpec::Fixed { indices: g.clone() }),
    );
    let engine = evaluate_days(series, plan, &specs)?;
    let x = series.values();
    let n = series.len();

    let average = |si: usize| -> Option<f64> {
        let column =
            collect_cells("ssa", "", plan.h_max, n, engine.span, x, &engine.outcomes, |o| {
                &o.ssa[si]
            });
        let picked: Vec<f64> = column
            .iter()
            .flatten()
            .map(|c| match metric {
                ErrorMetric::MeanRel => c.mean_rel,
                ErrorMetric::MaxRel => c.max_rel,
            })
            .collect();
        if picked.is_empty() {
            None
        } else {
            Some(picked.iter().sum::<f64>() / picked.len() as f64)
        }
    };

    let center_error = average(0).ok_or(Error::AllCellsFailed)?;
    let outcomes: Vec<NeighborOutcome> = neighbors
        .iter()
        .enumerate()
        .map(|(i, g)| NeighborOutcome { grouping: format!("{g}"), error: average(i + 1) })
        .collect();
    let is_local_min = outcomes
        .iter()
        .all(|o| o.error.map_or(true, |e| e > center_error));
    Ok(LocalMinReport {
        m_star,
        l_min,
        metric,
        center_error,
        neighbors: outcomes,
        is_local_min,
    })
}

/// One accepted move of the grouping local search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "op", content = "index")]
pub enum SearchMove {
    Add(usize),
    Remove(usize),
}

impl std::fmt::Display for SearchMove {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SearchMove::Add(k) => write!(f, "+{k}"),
            SearchMove::Remove(k) => write!(f, "-{k}"),
        }
    }
}

/// Replays recorded moves on another starting set, skipping moves that do
/// not apply (already present, absent, out of bounds, or emptying the set).
pub(crate) fn apply_moves(start: &Grouping, moves: &[SearchMove], bound: usize) -> Grouping {
    let mut current = start.clone();
    for mv in moves {
        match *mv {
            SearchMove::Add(k) => {
                if k <= bound && !current.contains(k) {
                    current = current.with(k).expect("k validated");
                }
            }
            SearchMove::Remove(k) => {
                if current.len() > 1 && current.contains(k) {
                    current = current.without(k).expect("nonempty after removal");
                }
            }
        }
    }
    current
}

/// Steepest-descent local search over one-element neighborhoods. Returns
/// the final set, its error and the accepted moves. `eval` returns None for
/// candidates that cannot be scored (treated as infinitely bad).
fn local_search(
    start: &Grouping,
    bound: usize,
    cap: usize,
    eval: impl Fn(&Grouping) -> Option<f64>,
) -> (Grouping, Option<f64>, Vec<SearchMove>) {
    let mut current = start.clone();
    let mut current_err = eval(&current);
    let mut moves = Vec::new();
    for _ in 0..cap {
        let neighbors = match neighborhood_of(&current, bound) {
            Ok(list) => list,
            Err(_) => break,
        };
        let mut best: Option<(f64, &Grouping)> = None;
        for g in &neighbors {
            if let Some(e) = eval(g) {
                if best.map_or(true, |(be, _)| e < be) {
                    best = Some((e, g));
                }
            }
        }
        let Some((best_err, best_group)) = best else { break };
        let improves = match current_err {
            Some(ce) => best_err < ce,
            None => true,
        };
        if !improves {
            break;
        }
        // derive the single add/remove separating the two sets
        let mv = if best_group.len() > current.len() {
            let added = best_group
                .indices()
                .iter()
                .find(|k| !current.contains(**k))
                .expect("one added element");
            SearchMove::Add(*added)
        } else {
            let removed = current
                .indices()
                .iter()
                .find(|k| !best_group.contains(**k))
                .expect("one removed element");
            SearchMove::Remove(*removed)
        };
        moves.push(mv);
        current = best_group.clone();
        current_err = Some(best_err);
    }
    (current, current_err, moves)
}

/// Audit trail of [`practitioner_strategy`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyReport {
    pub train_len: usize,
    pub test_len: usize,
    pub window_train: usize,
    pub window_full: usize,
    /// auto grouping on the training data.
    pub g_train: String,
    /// Local-search result around g_train and its error.
    pub mg_set: String,
    pub e_mg: Option<f64>,
    /// Local-search result around {1, 2} and its error.
    pub m2_set: String,
    pub e_m2: Option<f64>,
    pub moves_g: Vec<SearchMove>,
    /// auto grouping on the full series (step 6 only).
    pub g_full: Option<String>,
    pub chosen: String,
    pub chosen_source: String,
    pub forecast: Vec<f64>,
    pub horizon: usize,
}

const STRATEGY_SEARCH_CAP: usize = 20;

/// Train/test selection strategy: hold out a suffix, locally search for the
/// best grouping around the automatic one and around {1, 2} on the training
/// data, then forecast from the full series with whichever wins (ties favor
/// the prefix search; the auto winner is translated onto the full-series
/// auto grouping by replaying its search moves).
pub fn practitioner_strategy(
    series: &TimeSeries,
    plan: &EvalPlan,
    test_suffix_len: usize,
) -> Result<StrategyReport> {
    let n = series.len();
    let h = plan.h_max;
    if test_suffix_len < h {
        return Err(Error::InvalidParameter(format!(
            "test suffix ({test_suffix_len}) must cover the forecast horizon ({h})"
        )));
    }
    if test_suffix_len >= n {
        return Err(Error::InsufficientData { needed: test_suffix_len + 1, actual: n });
    }
    let span = series.span();
    if !(span > 0.0) {
        return Err(Error::SpanDegenerate);
    }
    let train_len = n - test_suffix_len;
    let train = series.prefix(train_len)?;
    let (l_train, _) = select_window_with_fallback(&train, &plan.window)?;
    let d_train = decompose(&embed(&train, l_train)?)?;
    let test = &series.values()[train_len..train_len + h];

    // horizon-averaged span-relative error of a candidate on the held-out data
    let eval = |g: &Grouping| -> Option<f64> {
        let f = vector_forecast(&d_train, g, h).ok()?;
        let total: f64 = f
            .values
            .iter()
            .zip(test)
            .map(|(a, b)| (a - b).abs() / span)
            .sum();
        Some(total / h as f64)
    };

    let g_train = auto_group_wcor(&d_train, 2)?;
    let (mg_set, e_mg, moves_g) = local_search(&g_train, l_train, STRATEGY_SEARCH_CAP, &eval);
    let start2 = Grouping::new(vec![1, 2])?;
    let (m2_set, e_m2, _) = local_search(&start2, l_train, STRATEGY_SEARCH_CAP, &eval);

    let (l_full, _) = select_window_with_fallback(series, &plan.window)?;
    let d_full = decompose(&embed(series, l_full)?)?;

    let prefer_m2 = match (e_m2, e_mg) {
        (Some(a), Some(b)) => a <= b,
        (Some(_), None) => true,
        (None, Some(_)) => false,
        (None, None) => true,
    };
    let (chosen, chosen_source, g_full) = if prefer_m2 {
        (m2_set.clone(), "prefix-search".to_string(), None)
    } else {
        let g_full = auto_group_wcor(&d_full, 2)?;
        let translated = apply_moves(&g_full, &moves_g, l_full);
        (translated, "translated-auto".to_string(), Some(format!("{g_full}")))
    };
    let forecast = vector_forecast(&d_full, &chosen, h)?;

    Ok(StrategyReport {
        train_len,
        test_len: test_suffix_len,
        window_train: l_train,
        window_full: l_full,
        g_train: format!("{g_train}"),
        mg_set: format!("{mg_set}"),
        e_mg,
        m2_set: format!("{m2_set}"),
        e_m2,
        moves_g,
        g_full,
        chosen: format!("{chosen}"),
        chosen_source,
        forecast: forecast.values,
        horizon: h,
    })
}

/// Lag-covariance (Gram) matrix X Xᵀ of the trajectory matrix, built by the
/// Hankel shift recurrence C[i+1,j+1] = C[i,j] - x_i x_j + x_{i+K} x_{j+K}
/// without forming X.
pub(crate) fn hankel_gram(x: &[f64], l: usize) -> Array2<f64> {
    let n = x.len();
    let k = n - l + 1;
    let mut c = Array2::<f64>::zeros((l, l));
    for j in 0..l {
        let mut s = 0.0;
        for m in 0..k {
            s += x[m] * x[j + m];
        }
        c[(0, j)] = s;
    }
    for i in 0..l - 1 {
        for j in i..l - 1 {
            c[(i + 1, j + 1)] = c[(i, j)] - x[i] * x[j] + x[i + k] * x[j + k];
        }
    }
    for i in 1..l {
        for j in 0..i {
            c[(i, j)] = c[(j, i)];
        }
    }
    c
}

const INVERSE_ITERATION_CAP: usize = 200;

/// Smallest eigenpair of a symmetric positive semidefinite matrix by
/// inverse iteration on its Cholesky factorization. The ridge grows from
/// zero only if factorization fails at the numerically semidefinite corner.
pub(crate) fn bottom_eigenpair(c: &Array2<f64>) -> Result<(f64, Array1<f64>)> {
    use ndarray_linalg::cholesky::{FactorizeC, SolveC, UPLO};

    let l = c.nrows();
    let scale = c.diag().iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut ridge = 0.0;
    let factor = loop {
        let shifted = if ridge == 0.0 {
            c.to_owned()
        } else {
            c + &(Array2::<f64>::eye(l) * ridge)
        };
        match shifted.factorizec(UPLO::Lower) {
            Ok(f) => break f,
            Err(_) => {
                ridge = if ridge == 0.0 { scale * 1e-14 } else { ridge * 100.0 };
                if ridge > scale * 1e-2 {
                    return Err(Error::NumericalFailure(
                        "lag-covariance factorization failed".into(),
                    ));
                }
            }
        }
    };

    // deterministic start with nonzero overlap against any fixed direction
    let mut v = Array1::from_shape_fn(l, |i| 0.7 + (0.37 * i as f64).cos());
    let norm = v.dot(&v).sqrt();
    v.mapv_inplace(|z| z / norm);
    for _ in 0..INVERSE_ITERATION_CAP {
        let mut w = factor
            .solvec(&v)
            .map_err(|e| Error::NumericalFailure(format!("inverse iteration solve: {e}")))?;
        let norm = w.dot(&w).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NumericalFailure("inverse iteration degenerated".into()));
        }
        w.mapv_inplace(|z| z / norm);
        let overlap = v.dot(&w).abs();
        v = w;
        if 1.0 - overlap < 1e-14 {
            break;
        }
    }
    // fix the sign the same way decompose() orients singular vectors
    let mut lead = 0usize;
    let mut lead_abs = 0.0_f64;
    for (i, z) in v.iter().enumerate() {
        if z.abs() > lead_abs {
            lead_abs = z.abs();
            lead = i;
        }
    }
    if v[lead] < 0.0 {
        v.mapv_inplace(|z| -z);
    }
    let lambda = v.dot(&c.dot(&v));
    Ok((lambda, v))
}
