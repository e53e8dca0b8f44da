//! End-to-end acceptance gate. Each test pins one externally visible
//! contract of the toolkit, from exact recurrence continuation through
//! protocol bookkeeping to byte-level report determinism. Tolerances are
//! deliberate and written next to each assertion.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use ndarray::{s, Array1, Array2};
use ndarray_linalg::{JobSvd, SVDDC};
use rand::prelude::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ssakit::decomposition::{elementary_matrix, hankelize};
use ssakit::evaluation::{
    local_min_check, rolling_eval, sweep_prefix, ErrorMetric, EvalPlan, GroupingSpec,
    SweepSurface,
};
use ssakit::forecast::fit_lre;
use ssakit::grouping::{all_elementary, wcor_matrix};
use ssakit::series::{antidiagonal_weights, embed};
use ssakit::window::{log_bounds, log_bounds_rounded, select_window_ma};
use ssakit::{decompose, vector_forecast, Grouping, TimeSeries, WindowSpec};

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

fn noise_series(rng: &mut ChaCha8Rng, n: usize) -> TimeSeries {
    TimeSeries::new((0..n).map(|_| gaussian(rng)).collect()).unwrap()
}

// ---------------------------------------------------------------------------
// Exact linear-recurrence continuation: polynomial (degree <= 2) plus up to
// two sinusoids, recurrence order d <= 7. With L = 2d and the prefix [d],
// the vector forecast must reproduce the analytic signal.

#[test]
fn lre_signals_continue_analytically() {
    const N: usize = 500;
    const H: usize = 30;
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9001);
    let periods = [7.3, 11.9, 17.6, 29.4, 53.1, 88.7, 120.4];

    for case in 0..25 {
        let poly_order = rng.random_range(0..=2usize);
        let n_sin = rng.random_range(0..=2usize);
        let d = poly_order + 1 + 2 * n_sin;

        let sign = |rng: &mut ChaCha8Rng| if rng.random::<bool>() { 1.0 } else { -1.0 };
        let a0 = sign(&mut rng) * rng.random_range(1.0..5.0);
        let a1 = if poly_order >= 1 { sign(&mut rng) * rng.random_range(1e-3..1e-2) } else { 0.0 };
        let a2 = if poly_order >= 2 { sign(&mut rng) * rng.random_range(1e-6..2e-5) } else { 0.0 };
        let chosen: Vec<f64> = periods.choose_multiple(&mut rng, n_sin).copied().collect();
        let sins: Vec<(f64, f64, f64)> = chosen
            .iter()
            .map(|&p| (rng.random_range(0.5..3.0), p, rng.random_range(0.0..2.0 * PI)))
            .collect();

        let signal = |t: usize| -> f64 {
            let tf = t as f64;
            let mut v = a0 + a1 * tf + a2 * tf * tf;
            for &(amp, period, phase) in &sins {
                v += amp * (2.0 * PI * tf / period + phase).sin();
            }
            v
        };

        let values: Vec<f64> = (1..=N).map(signal).collect();
        let scale = (1..=N + H).map(signal).fold(0.0_f64, |m, v| m.max(v.abs()));
        let series = TimeSeries::new(values).unwrap();
        let decomp = decompose(&embed(&series, 2 * d).unwrap()).unwrap();
        let group = Grouping::prefix(d).unwrap();
        let forecast = vector_forecast(&decomp, &group, H).unwrap();
        for (step, &got) in forecast.values.iter().enumerate() {
            let want = signal(N + step + 1);
            assert!(
                (got - want).abs() <= 1e-6 * scale,
                "case {case} (d = {d}) step {}: {got} vs {want} at scale {scale}",
                step + 1
            );
        }
    }
    assert!(t0.elapsed() < Duration::from_secs(10), "took {:?}", t0.elapsed());
}

// ---------------------------------------------------------------------------
// The fitted recurrence equals the Moore-Penrose solution of the grouped
// trajectory system: R^T = (last row of X_I) * pinv(X_I without last row).

fn pseudo_inverse(a: &Array2<f64>) -> Array2<f64> {
    let (u, sv, vt) = a.svddc(JobSvd::Some).unwrap();
    let u = u.unwrap();
    let vt = vt.unwrap();
    let cutoff = sv[0].max(0.0) * 1e-12;
    let mut sinv = Array2::zeros((sv.len(), sv.len()));
    for (i, &s) in sv.iter().enumerate() {
        if s > cutoff {
            sinv[(i, i)] = 1.0 / s;
        }
    }
    vt.t().dot(&sinv).dot(&u.t())
}

#[test]
fn recurrence_matches_pseudo_inverse_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(42_000);
    let mut done = 0;
    let mut attempts = 0;
    while done < 20 {
        attempts += 1;
        assert!(attempts < 200, "too many vertical draws");
        let n = rng.random_range(40..=90usize);
        let l = rng.random_range(4..=14usize.min((n + 1) / 2));
        let series = noise_series(&mut rng, n);
        let d = decompose(&embed(&series, l).unwrap()).unwrap();

        let size = rng.random_range(1..=l - 2);
        let mut all: Vec<usize> = (1..=l).collect();
        for i in (1..all.len()).rev() {
            all.swap(i, rng.random_range(0..=i));
        }
        let group = Grouping::new(all[..size].to_vec()).unwrap();
        let Ok(model) = fit_lre(&d, &group) else { continue };

        let mut grouped: Array2<f64> = Array2::zeros((l, d.lag_count()));
        for &i in group.indices() {
            grouped += &elementary_matrix(&d, i).unwrap();
        }
        let a = grouped.slice(s![..l - 1, ..]).to_owned();
        let b = grouped.row(l - 1).to_owned();
        let oracle: Array1<f64> = pseudo_inverse(&a).t().dot(&b);

        let r = model.r();
        let diff = (r - &oracle).mapv(|v| v * v).sum().sqrt();
        let norm = r.mapv(|v| v * v).sum().sqrt();
        assert!(
            diff <= 1e-6 * norm,
            "relative gap {} on n = {n}, l = {l}, I = {group}",
            diff / norm
        );
        done += 1;
    }
}

// ---------------------------------------------------------------------------
// Logarithmic window bounds on decade-scale daily series land in the
// documented ranges.

#[test]
fn log_window_bounds_for_decade_scale_series() {
    for n in [14245usize, 14610, 13880] {
        let (lo, hi) = log_bounds_rounded(n).unwrap();
        assert!((29..=30).contains(&lo), "L_lo = {lo} for N = {n}");
        assert!((281..=285).contains(&hi), "L_hi = {hi} for N = {n}");
        // the ceil/floor form may differ from the table values by one
        let (lo_cf, hi_cf) = log_bounds(n).unwrap();
        assert!(lo_cf.abs_diff(lo) <= 1 && hi_cf.abs_diff(hi) <= 1);
    }
}

// ---------------------------------------------------------------------------
// The sign-change selector on sinusoid-plus-noise equals a brute-force scan
// of the autocorrelation and sits near a quarter period.

#[test]
fn sign_change_selector_matches_oracle_on_sinusoids() {
    for period in [14usize, 28, 365] {
        let n = 40 * period;
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + period as u64);
        // signal variance 1/2, noise variance 1/20: ratio 10
        let sigma = (0.5_f64 / 10.0).sqrt();
        let values: Vec<f64> = (1..=n)
            .map(|t| (2.0 * PI * t as f64 / period as f64).sin() + sigma * gaussian(&mut rng))
            .collect();

        // independent re-derivation: R(tau) over the first n - tau samples
        // with mean and variance recomputed per lag
        let autocorr = |tau: usize| -> f64 {
            let m = n - tau;
            let mean = values[..m].iter().sum::<f64>() / m as f64;
            let var = values[..m].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64;
            (0..m).map(|i| (values[i + tau] - mean) * (values[i] - mean)).sum::<f64>() / var
        };
        let mut oracle = None;
        for tau in 2..=n / 2 {
            if autocorr(tau) * autocorr(tau + 1) < 0.0 {
                oracle = Some(tau);
                break;
            }
        }
        let oracle = oracle.expect("sinusoid autocorrelation must change sign");

        let series = TimeSeries::new(values).unwrap();
        let choice = select_window_ma(&series).unwrap();
        assert_eq!(choice.length, oracle, "period {period}");
        let quarter = period as f64 / 4.0;
        assert!(
            (choice.length as f64 - quarter).abs() <= 2.0,
            "period {period}: window {} vs quarter {quarter}",
            choice.length
        );
    }
}

// ---------------------------------------------------------------------------
// Rolling-origin protocol counts: |D_h| = 365 - h when the final calendar
// year is ordinary, 366 - h when it is a leap year.

#[test]
fn final_year_day_counts() {
    let start = NaiveDate::from_ymd_opt(1979, 1, 1).unwrap();
    for (end_year, expected_base) in [(2017, 365usize), (2016, 366)] {
        let end = NaiveDate::from_ymd_opt(end_year, 12, 31).unwrap();
        let n = (end - start).num_days() as usize + 1;
        let values: Vec<f64> = (0..n).map(|t| (t as f64 * 0.01).sin() + t as f64 * 1e-4).collect();
        let series = TimeSeries::new(values).unwrap().with_start_date(start);
        for h in (1..=30).chain([100, 364]) {
            let days = ssakit::evaluation::forecasting_days(&series, h).unwrap();
            assert_eq!(
                days.len(),
                expected_base - h,
                "final year {end_year}, horizon {h}"
            );
        }
    }
}

// ---------------------------------------------------------------------------
// The fixed synthetic seasonal corpus: an annual sinusoid (amplitude 10)
// plus a gentle trend and 5 percent Gaussian noise over 20 years of daily
// data, 1998-01-01 through 2017-12-31.

const CORPUS_SEED: u64 = 35;
const EVAL_SEED: u64 = 2024;

fn seasonal_corpus() -> TimeSeries {
    let n = 7305usize;
    let mut rng = ChaCha8Rng::seed_from_u64(CORPUS_SEED);
    let values: Vec<f64> = (1..=n)
        .map(|t| {
            10.0 * (2.0 * PI * t as f64 / 365.25).sin() + 5.0 * t as f64 / n as f64
                + 0.5 * gaussian(&mut rng)
        })
        .collect();
    TimeSeries::new(values)
        .unwrap()
        .with_start_date(NaiveDate::from_ymd_opt(1998, 1, 1).unwrap())
        .with_name("seasonal-corpus")
}

fn corpus_plan() -> EvalPlan {
    EvalPlan::new(WindowSpec::AutoMa, vec![], EVAL_SEED).with_h_max(30)
}

fn corpus_sweep() -> &'static (TimeSeries, SweepSurface) {
    static SWEEP: OnceLock<(TimeSeries, SweepSurface)> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let series = seasonal_corpus();
        let surface = sweep_prefix(&series, &corpus_plan()).unwrap();
        (series, surface)
    })
}

#[test]
fn seasonal_corpus_baseline_ordering() {
    let t0 = Instant::now();
    let (series, surface) = corpus_sweep();

    let ssa_best = surface
        .column_average(surface.m_mean, ErrorMetric::MeanRel)
        .expect("optimal prefix column has data");
    let baseline_avg = |name: &str| -> f64 {
        let picked: Vec<f64> = surface
            .baselines
            .iter()
            .filter(|c| c.method == name)
            .map(|c| c.mean_rel)
            .collect();
        assert_eq!(picked.len(), surface.h_max, "{name} cells");
        picked.iter().sum::<f64>() / picked.len() as f64
    };
    for name in ["random", "constant", "polyreg"] {
        let b = baseline_avg(name);
        assert!(
            ssa_best < b,
            "best prefix [{}] at {ssa_best} must beat {name} at {b}",
            surface.m_mean
        );
    }

    // The huge multiple-of-a-year window with the full prefix grouping sinks
    // to the random baseline's level: no better than 1.1x random.
    let plan_big =
        EvalPlan::new(WindowSpec::Big, vec![GroupingSpec::FullPrefix], EVAL_SEED).with_h_max(30);
    let report = rolling_eval(series, &plan_big).unwrap();
    let big = report
        .horizon_average("ssa", "prefix:full", ErrorMetric::MeanRel)
        .expect("full-prefix cells");
    let random = report
        .horizon_average("random", "-", ErrorMetric::MeanRel)
        .expect("random cells");
    assert!(
        big >= random / 1.1,
        "L_big full-prefix error {big} should not beat random {random} by more than 1.1x"
    );
    assert!(
        t0.elapsed() < Duration::from_secs(900),
        "corpus evaluation took {:?}",
        t0.elapsed()
    );
}

// Strictness caveat: this asserts that ~90 day-averaged margins are all
// positive at once. Additions of deep-spectrum components carry a noise
// penalty that is second order in their size, while their margins fluctuate
// at first order, so on a white-noise corpus a fraction of them land below
// zero for any seed; the local-minimum phenomenon belongs to data whose
// residual has real structure. The check is pinned here in its strict form
// deliberately, and its failure message lists the undercutting neighbors.
#[test]
fn optimal_prefix_is_local_minimum() {
    let (series, surface) = corpus_sweep();
    let report =
        local_min_check(series, &corpus_plan(), surface.m_mean, ErrorMetric::MeanRel).unwrap();
    // full one-element neighborhood: every removal from [M] plus every
    // addition up to the smallest per-day window
    let expected = surface.m_mean + (report.l_min - surface.m_mean)
        - usize::from(surface.m_mean == 1);
    assert_eq!(report.neighbors.len(), expected);
    assert_eq!(report.l_min, surface.l_min);

    let mut improving: Vec<(f64, &str)> = report
        .neighbors
        .iter()
        .filter_map(|n| n.error.map(|e| (e - report.center_error, n.grouping.as_str())))
        .filter(|(margin, _)| *margin <= 0.0)
        .collect();
    improving.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let summary: Vec<String> = improving
        .iter()
        .take(5)
        .map(|(m, g)| format!("{{{g}}} by {:.2e}", -m))
        .collect();
    assert!(
        report.is_local_min,
        "[{}] (err {:.5}) is undercut by {} of {} neighbors, e.g. {}",
        report.m_star,
        report.center_error,
        improving.len(),
        report.neighbors.len(),
        summary.join(", ")
    );
}

// ---------------------------------------------------------------------------
// Randomized invariant suites, 50 instances each.

#[test]
fn decomposition_invariants_hold_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(8_100);
    for _ in 0..50 {
        let n = rng.random_range(20..=80usize);
        let l = rng.random_range(2..=(n + 1) / 2);
        let series = noise_series(&mut rng, n);
        let traj = embed(&series, l).unwrap();
        let d = decompose(&traj).unwrap();

        let x = traj.matrix();
        let frob = x.mapv(|v| v * v).sum();
        let energy: f64 = d.singular_values().iter().map(|s| s * s).sum();
        assert!((energy - frob).abs() <= 1e-9 * frob, "energy {energy} vs {frob}");

        let u = d.left_vectors();
        let gram = u.t().dot(u);
        for i in 0..l {
            for j in 0..l {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - want).abs() <= 1e-9, "U^T U at ({i}, {j})");
            }
        }

        let mut sum: Array2<f64> = Array2::zeros(x.dim());
        for k in 1..=l {
            sum += &elementary_matrix(&d, k).unwrap();
        }
        let gap = (&sum - x).mapv(|v| v * v).sum().sqrt();
        assert!(gap <= 1e-9 * frob.sqrt(), "completeness gap {gap}");
    }
}

#[test]
fn hankelization_is_the_nearest_hankel_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(8_200);
    for _ in 0..50 {
        let m = Array2::from_shape_fn((3, 4), |_| gaussian(&mut rng));
        let h = hankelize(&m);

        // oracle: enumerate each anti-diagonal and average it directly
        for (i, j) in [(0usize, 0usize), (2, 3), (1, 2)] {
            let k = i + j;
            let mut sum = 0.0;
            let mut count = 0.0;
            for p in 0..3 {
                for q in 0..4 {
                    if p + q == k {
                        sum += m[(p, q)];
                        count += 1.0;
                    }
                }
            }
            assert!((h[(i, j)] - sum / count).abs() <= 1e-12);
        }
        // anti-diagonals are constant
        for p in 0..3usize {
            for q in 0..4usize {
                if p + 1 < 3 && q >= 1 {
                    assert_eq!(h[(p, q)], h[(p + 1, q - 1)]);
                }
            }
        }
        // no sampled Hankel competitor comes closer in Frobenius norm
        let dist = (&m - &h).mapv(|v| v * v).sum();
        for _ in 0..20 {
            let diag: Vec<f64> = (0..6).map(|_| gaussian(&mut rng)).collect();
            let competitor = Array2::from_shape_fn((3, 4), |(p, q)| diag[p + q]);
            let other = (&m - &competitor).mapv(|v| v * v).sum();
            assert!(dist <= other + 1e-12, "{dist} vs {other}");
        }
    }
}

#[test]
fn wcor_matrix_is_a_correlation_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(8_300);
    for _ in 0..50 {
        let n = rng.random_range(20..=60usize);
        let l = rng.random_range(2..=(n + 1) / 2);
        let series = noise_series(&mut rng, n);
        let d = decompose(&embed(&series, l).unwrap()).unwrap();
        let parts = all_elementary(&d).unwrap();
        let w = antidiagonal_weights(d.window(), d.lag_count());
        let wcor = wcor_matrix(&parts, &w).unwrap();
        let s = wcor.entries();
        for i in 0..l {
            assert_eq!(s[(i, i)], 1.0);
            for j in 0..l {
                assert_eq!(s[(i, j)], s[(j, i)]);
                assert!(s[(i, j)].abs() <= 1.0 + 1e-9, "entry ({i}, {j}) = {}", s[(i, j)]);
            }
        }
    }
}

#[test]
fn forecasts_scale_with_the_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(8_400);
    let factors = [1e-6, 0.37, 1e5];
    for case in 0..50 {
        let n = rng.random_range(40..=90usize);
        let l = rng.random_range(4..=12usize.min((n + 1) / 2));
        let m = rng.random_range(1..=l - 2);
        let base = noise_series(&mut rng, n);
        let c = factors[case % factors.len()];
        let scaled = TimeSeries::new(base.values().iter().map(|v| c * v).collect()).unwrap();
        let group = Grouping::prefix(m).unwrap();

        let run_forecast = |s: &TimeSeries| -> Option<Vec<f64>> {
            let d = decompose(&embed(s, l).unwrap()).unwrap();
            vector_forecast(&d, &group, 10).ok().map(|r| r.values)
        };
        let (Some(plain), Some(grown)) = (run_forecast(&base), run_forecast(&scaled)) else {
            continue; // near-vertical draw fails identically on both
        };
        for (a, b) in plain.iter().zip(&grown) {
            assert!(
                (c * a - b).abs() <= 1e-9 * c * a.abs().max(1.0),
                "scale {c}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn optimal_prefix_argmin_is_scale_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(8_500);
    for _ in 0..50 {
        let n = 740usize;
        let period = rng.random_range(9.0..15.0);
        let amp = rng.random_range(2.0..6.0);
        let sigma = rng.random_range(0.2..1.2);
        let values: Vec<f64> = (1..=n)
            .map(|t| {
                amp * (2.0 * PI * t as f64 / period).sin()
                    + 0.002 * t as f64
                    + sigma * gaussian(&mut rng)
            })
            .collect();
        let base = TimeSeries::new(values).unwrap();
        let c = 10f64.powf(rng.random_range(-3.0..3.0));
        let scaled = TimeSeries::new(base.values().iter().map(|v| c * v).collect()).unwrap();

        let plan = EvalPlan::new(WindowSpec::Fixed { length: 4 }, vec![], 7).with_h_max(2);
        let a = sweep_prefix(&base, &plan).unwrap();
        let b = sweep_prefix(&scaled, &plan).unwrap();
        assert_eq!((a.m_mean, a.m_max), (b.m_mean, b.m_max), "scale {c}");
    }
}

// ---------------------------------------------------------------------------
// Byte-identical reports: same config and seed, any thread count.

#[test]
fn evaluate_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("series.csv");
    let mut rows = String::from("date,value\n");
    let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for t in 0..731 {
        let date = start + chrono::Days::new(t);
        let v = 5.0 * (2.0 * PI * t as f64 / 365.25).sin() + 0.4 * gaussian(&mut rng);
        rows.push_str(&format!("{date},{v:.10}\n"));
    }
    std::fs::write(&input, rows).unwrap();

    let run = |format: &str, jobs: &str, out: &PathBuf| {
        let status = Command::new(env!("CARGO_BIN_EXE_ssakit"))
            .args([
                "evaluate",
                input.to_str().unwrap(),
                "--window",
                "fixed:8",
                "--grouping",
                "prefix:2",
                "--grouping",
                "auto-wcor",
                "--h-max",
                "2",
                "--seed",
                "7",
                "--jobs",
                jobs,
                "--format",
                format,
                "--output",
                out.to_str().unwrap(),
            ])
            .env_remove("SSAKIT_JOBS")
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };

    for format in ["csv", "json"] {
        let out1 = dir.path().join(format!("r1.{format}"));
        let out2 = dir.path().join(format!("r2.{format}"));
        let out3 = dir.path().join(format!("r3.{format}"));
        let first = run(format, "2", &out1);
        let second = run(format, "2", &out2);
        let third = run(format, "1", &out3);
        assert!(!first.is_empty());
        assert_eq!(first, second, "{format}: identical reruns");
        assert_eq!(first, third, "{format}: --jobs must not affect bytes");
    }
}
