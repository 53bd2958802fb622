//! Acceptance suite. Prints one line per criterion and fails if any is red.

use chrono::NaiveDate;
use cojump_core::analysis::{gls_ratio_regression, logit_cojump, ols_wald};
use cojump_core::estimators::{realized_covariance, wavelet_realized_covariance};
use cojump_core::ingest::{Session, Tick, TickSeries};
use cojump_core::jumps::{cojump_variation, JumpDetector};
use cojump_core::pipeline::{analyze_panel, PipelineConfig};
use cojump_core::rng::stream_rng;
use cojump_core::simulate::{
    run_experiment, simulate_full_day, CellResult, EstimatorKind, ExperimentConfig, JumpPlan, JumpSizeRule, SimConfig,
};
use cojump_core::stats::{dot, mean, sample_variance};
use cojump_core::sync::refresh_time;
use cojump_core::wavelet::{covariance_by_scale, max_levels, modwt, Boundary, WaveletFilter};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(n: usize, o: &Outcome) {
    let verdict = if o.pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stdout(), "criterion {n:>2}: {verdict}  {}", o.detail);
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Within three Monte Carlo standard errors of `truth`.
fn within_3se(draws: &[f64], truth: f64) -> bool {
    let se = (sample_variance(draws) / draws.len() as f64).sqrt();
    (mean(draws) - truth).abs() <= 3.0 * se
}

fn wrc_identity() -> Outcome {
    let f = WaveletFilter::d4();
    let start = Instant::now();
    let worst = (0..1000u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(101, &[k]);
            let n = (64f64 * 256f64.powf(rng.random::<f64>())).round() as usize;
            let levels = rng.random_range(1..=max_levels(n, &f).min(6));
            let x: Vec<f64> = (0..n).map(|_| 1e-3 * normal(&mut rng)).collect();
            let y: Vec<f64> = x.iter().map(|v| 0.7 * v + 7e-4 * normal(&mut rng)).collect();
            let cx = modwt(&x, levels, &f, Boundary::Circular).unwrap();
            let cy = modwt(&y, levels, &f, Boundary::Circular).unwrap();
            let wrc = wavelet_realized_covariance(&cx, &cy).unwrap().total;
            let rc = realized_covariance(&x, &y).unwrap();
            (wrc - rc).abs() / rc.abs().max(1.0)
        })
        .reduce(|| 0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst <= 1e-12 && secs < 10.0,
        detail: format!("1000 panels, max |WRC-RC|/max(1,|RC|) = {worst:.2e} (<= 1e-12), {secs:.2} s (< 10 s)"),
    }
}

fn energy_and_reconstruction() -> Outcome {
    let f = WaveletFilter::d4();
    let (energy, recon) = (0..1000u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(102, &[k]);
            let n = rng.random_range(16..2048);
            let levels = rng.random_range(1..=max_levels(n, &f).min(8));
            let x: Vec<f64> = (0..n).map(|_| normal(&mut rng) + 0.3).collect();
            let y: Vec<f64> = x.iter().map(|v| 0.5 * v + normal(&mut rng)).collect();
            let c = modwt(&x, levels, &f, Boundary::Circular).unwrap();
            let bands: f64 =
                (1..=levels).map(|j| dot(c.wavelet(j), c.wavelet(j))).sum::<f64>() + dot(c.scaling(), c.scaling());
            let e = (bands - dot(&x, &x)).abs() / dot(&x, &x);
            let (per_scale, scaling) = covariance_by_scale(&x, &y, levels, &f).unwrap();
            let (mx, my) = (mean(&x), mean(&y));
            let cov = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n as f64;
            let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n as f64).sqrt();
            let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n as f64).sqrt();
            let r = (per_scale.iter().sum::<f64>() + scaling - cov).abs() / (sx * sy);
            (e, r)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    Outcome {
        pass: energy <= 1e-10 && recon <= 1e-10,
        detail: format!(
            "1000 series, max relative energy error {energy:.2e}, covariance reconstruction {recon:.2e} (<= 1e-10)"
        ),
    }
}

/// Refresh times by direct recursion over the definition.
fn brute_refresh(series: &[TickSeries]) -> (Vec<i64>, Vec<Vec<f64>>) {
    let first_after = |s: &TickSeries, t: Option<i64>| s.timestamps().find(|&x| t.map_or(true, |t| x > t));
    let price_at = |s: &TickSeries, t: i64| s.ticks.iter().rev().find(|k| k.timestamp <= t).unwrap().price;
    let mut times = Vec::new();
    let mut last = None;
    while let Some(next) = series
        .iter()
        .map(|s| first_after(s, last))
        .collect::<Option<Vec<i64>>>()
    {
        let tau = *next.iter().max().unwrap();
        times.push(tau);
        last = Some(tau);
    }
    let prices = series
        .iter()
        .map(|s| times.iter().map(|&t| price_at(s, t)).collect())
        .collect();
    (times, prices)
}

fn refresh_oracle() -> Outcome {
    let mismatches = (0..10_000u64)
        .into_par_iter()
        .filter(|&k| {
            let mut rng = stream_rng(103, &[k]);
            let assets = rng.random_range(2..=3);
            let series: Vec<TickSeries> = (0..assets)
                .map(|i| {
                    let mut stamps: Vec<i64> = (0..rng.random_range(1..=20)).map(|_| rng.random_range(0..60)).collect();
                    stamps.sort_unstable();
                    stamps.dedup();
                    let ticks = stamps
                        .into_iter()
                        .map(|t| Tick::new(t, rng.random_range(0.5..2.0)))
                        .collect();
                    TickSeries::new(format!("A{i}"), ticks)
                })
                .collect();
            let refs: Vec<&TickSeries> = series.iter().collect();
            let got = refresh_time(&refs).unwrap();
            (got.times, got.prices) != brute_refresh(&series)
        })
        .count();
    Outcome {
        pass: mismatches == 0,
        detail: format!("10000 instances, {mismatches} mismatches against the brute-force recursion"),
    }
}

fn cell<'a>(r: &'a [CellResult], plan: &str, sampling: usize, noise: f64, k: EstimatorKind) -> &'a CellResult {
    r.iter()
        .find(|c| c.plan == plan && c.sampling == sampling && c.noise == noise && c.estimator == k)
        .expect("cell present")
}

fn desk_scale(r: &[CellResult]) -> Outcome {
    let reps = r[0].replications as f64;
    let zero_ok = EstimatorKind::ALL
        .iter()
        .all(|&k| cell(r, "0cj-0ij", 60, 0.0, k).bias.abs() <= 0.05);
    let zero: Vec<String> = EstimatorKind::ALL
        .iter()
        .map(|&k| format!("{}={:+.4}", k.as_str(), cell(r, "0cj-0ij", 60, 0.0, k).bias))
        .collect();
    let cj_rc = cell(r, "1cj-0ij", 60, 0.0, EstimatorKind::Rc).bias;
    let cj_jwc = cell(r, "1cj-0ij", 60, 0.0, EstimatorKind::Jwc).bias;
    let ij_jwc = cell(r, "0cj-1ij", 60, 0.0, EstimatorKind::Jwc).bias;
    let ij_rc = cell(r, "0cj-1ij", 60, 0.0, EstimatorKind::Rc);
    let base_rc = cell(r, "0cj-0ij", 60, 0.0, EstimatorKind::Rc);
    let ij_rc_bias_ok = ij_rc.bias.abs() <= 3.0 * (ij_rc.variance / reps).sqrt();
    let inflation = ij_rc.variance / base_rc.variance;
    let pass = zero_ok
        && (0.7..=1.3).contains(&cj_rc)
        && cj_jwc.abs() <= 0.05
        && ij_jwc.abs() <= 0.05
        && ij_rc_bias_ok
        && inflation >= 2.0;
    Outcome {
        pass,
        detail: format!(
            "R={reps}, 1-min, bias x1e4: no jumps [{}]; co-jump RC={cj_rc:+.4} JWC={cj_jwc:+.4}; idiosyncratic JWC={ij_jwc:+.4} RC12={:+.4} RC var x{inflation:.2}",
            zero.join(" "),
            ij_rc.bias
        ),
    }
}

fn spot_correlation(r: &[CellResult]) -> Outcome {
    let c = cell(r, "0cj-0ij", 60, 0.0, EstimatorKind::Jwc).mean_correlation;
    Outcome {
        pass: (c - 0.91).abs() <= 0.02,
        detail: format!("mean JWC continuous correlation {c:.4} (0.91 +/- 0.02)"),
    }
}

fn noise_robustness() -> Outcome {
    let cfg = ExperimentConfig {
        noise_levels: vec![0.0, 0.0015],
        plans: vec![JumpPlan::none()],
        samplings: vec![1],
        replications: 150,
        ..ExperimentConfig::default()
    };
    let r = run_experiment(&cfg, 105).unwrap();
    let b = |noise: f64, k: EstimatorKind| cell(&r, "0cj-0ij", 1, noise, k);
    let rc = b(0.0015, EstimatorKind::Rc).bias_11;
    let robust = b(0.0015, EstimatorKind::Tscv)
        .bias_11
        .abs()
        .max(b(0.0015, EstimatorKind::Jwc).bias_11.abs());
    let noisy_ok = rc > 0.0 && rc > 10.0 * robust;
    let quiet: Vec<(EstimatorKind, f64, f64)> = EstimatorKind::ALL
        .iter()
        .map(|&k| {
            let c = b(0.0, k);
            (k, c.bias_11, 3.0 * (c.variance_11 / c.replications as f64).sqrt())
        })
        .collect();
    let quiet_ok = quiet.iter().all(|(_, bias, tol)| bias.abs() <= *tol);
    let quiet_s: Vec<String> = quiet
        .iter()
        .map(|(k, bias, tol)| format!("{}={bias:+.4}(+/-{tol:.4})", k.as_str()))
        .collect();
    Outcome {
        pass: noisy_ok && quiet_ok,
        detail: format!(
            "1-s sampling, R=150, variance bias x1e4 at noise 0.0015: RC={rc:+.3} vs max(TSCV,JWC)={robust:.3}; zero noise [{}]",
            quiet_s.join(" ")
        ),
    }
}

fn bootstrap_test() -> Outcome {
    let cfg = PipelineConfig {
        bootstrap_reps: 499,
        seed: 9,
        ..PipelineConfig::default()
    };
    let date = NaiveDate::from_ymd_opt(2015, 1, 7).unwrap();
    let rate = |cojumps: usize| {
        let sim = SimConfig {
            jumps: JumpPlan {
                cojumps,
                size_rule: JumpSizeRule::OneSd,
                ..JumpPlan::default()
            },
            ..SimConfig::default()
        };
        let rejected = (0..500u64)
            .into_par_iter()
            .filter(|&d| {
                let day = simulate_full_day(&sim, 107, &[d]).unwrap();
                let panel = day.sampled_returns(60).unwrap();
                analyze_panel(&panel, date + chrono::Days::new(d), Session::Us, &cfg)
                    .unwrap()
                    .day
                    .rejected
            })
            .count();
        rejected as f64 / 500.0
    };
    let (size, power) = (rate(0), rate(1));
    Outcome {
        pass: (0.03..=0.08).contains(&size) && power >= 0.9,
        detail: format!("1-min, B=499, 500 days each: size {size:.3} (in [0.03, 0.08]), power {power:.3} (>= 0.9)"),
    }
}

fn jump_localization() -> Outcome {
    let sim = SimConfig::default();
    let det = JumpDetector::default();
    let days: Vec<(bool, usize, usize, usize)> = (0..1000u64)
        .into_par_iter()
        .map(|d| {
            let day = simulate_full_day(&sim, 108, &[d]).unwrap();
            let p = day.sampled_returns(60).unwrap();
            let false_flags = det.locate(&p.r1).len() + det.locate(&p.r2).len();
            let mut rng = stream_rng(108, &[d, 99]);
            let idx = rng.random_range(0..p.len());
            let asset = (d % 2) as usize;
            let mut r = [p.r1.clone(), p.r2.clone()];
            let sd = sample_variance(&r[asset]).sqrt();
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            r[asset][idx] += sign * 10.0 * sd;
            let j = [det.locate(&r[0]), det.locate(&r[1])];
            let (_, cojumps) = cojump_variation(&j[0], &j[1]).unwrap();
            (j[asset].indices.contains(&idx), false_flags, 2 * p.len(), cojumps.len())
        })
        .collect();
    let hits = days.iter().filter(|d| d.0).count();
    let flagged: usize = days.iter().map(|d| d.1).sum();
    let indices: usize = days.iter().map(|d| d.2).sum();
    let false_rate = flagged as f64 / indices as f64;
    let cojump_days = days.iter().filter(|d| d.3 > 0).count();
    Outcome {
        pass: hits >= 990 && false_rate <= 0.02 && cojump_days == 0,
        detail: format!(
            "1000 days: exact index {hits}/1000 (>= 990), false-flag rate {false_rate:.5} (<= 0.02), co-jump records on idiosyncratic days {cojump_days} (0)"
        ),
    }
}

fn regressions() -> Outcome {
    let mut rng = stream_rng(109, &[]);
    let x: Vec<f64> = (0..200).map(|_| 0.5 + 0.3 * normal(&mut rng)).collect();
    let id = ols_wald(&x, &x).unwrap();
    let identity_ok = id.coefficients == [0.0, 1.0] && id.wald == 0.0;

    let (a, b) = (0.05, 0.9);
    let (ols, gls): (Vec<[f64; 2]>, Vec<[f64; 2]>) = (0..400u64)
        .map(|k| {
            let mut rng = stream_rng(110, &[k]);
            let x: Vec<f64> = (0..100).map(|_| 0.05 + rng.random::<f64>()).collect();
            let y: Vec<f64> = x.iter().map(|v| a + b * v + v * 0.05 * normal(&mut rng)).collect();
            (
                ols_wald(&y, &x).unwrap().coefficients,
                gls_ratio_regression(&y, &x).unwrap().coefficients,
            )
        })
        .unzip();
    let col = |v: &[[f64; 2]], i: usize| v.iter().map(|c| c[i]).collect::<Vec<_>>();
    let ls_ok = within_3se(&col(&ols, 0), a)
        && within_3se(&col(&ols, 1), b)
        && within_3se(&col(&gls, 0), a)
        && within_3se(&col(&gls, 1), b);

    let (b0, b1) = (-0.5, 40.0);
    let logit: Vec<[f64; 2]> = (0..300u64)
        .map(|k| {
            let mut rng = stream_rng(111, &[k]);
            let x: Vec<f64> = (0..400).map(|_| 0.02 * normal(&mut rng)).collect();
            let y: Vec<bool> = x
                .iter()
                .map(|v| rng.random::<f64>() < 1.0 / (1.0 + (-(b0 + b1 * v)).exp()))
                .collect();
            logit_cojump(&y, &x).unwrap().coefficients
        })
        .collect();
    let logit_ok = within_3se(&col(&logit, 0), b0) && within_3se(&col(&logit, 1), b1);

    let runs = 400u64;
    let rejections = (0..runs)
        .filter(|&k| {
            let mut rng = stream_rng(112, &[k]);
            let x: Vec<f64> = (0..300).map(|_| rng.random::<f64>().powi(2)).collect();
            let y: Vec<bool> = (0..300).map(|_| rng.random::<bool>()).collect();
            logit_cojump(&y, &x).unwrap().p_value < 0.05
        })
        .count();
    let size = rejections as f64 / runs as f64;
    Outcome {
        pass: identity_ok && ls_ok && logit_ok && size <= 0.07,
        detail: format!(
            "y=x fit {:?} Wald {}; OLS/GLS within 3 SE: {ls_ok}; logit within 3 SE: {logit_ok}; independent-indicator rejection {size:.3} (<= 0.07)",
            id.coefficients, id.wald
        ),
    }
}

fn cojump(args: &[&str], threads: usize) -> bool {
    Command::new(env!("CARGO_BIN_EXE_cojump"))
        .args(args)
        .arg("--threads")
        .arg(threads.to_string())
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

/// Names and bytes of every file in `dir`.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut same = true;
    let mut compared = 0;
    let mut ok = true;
    let mut run = |label: &str, args: &dyn Fn(&Path) -> Vec<String>| {
        let mut shots = Vec::new();
        for threads in [1, 8] {
            let out = root.path().join(format!("{label}-{threads}"));
            let a = args(&out);
            let a: Vec<&str> = a.iter().map(String::as_str).collect();
            ok &= cojump(&a, threads);
            shots.push(snapshot(&out));
        }
        compared += shots[0].len();
        same &= !shots[0].is_empty() && shots[0] == shots[1];
    };
    let ticks = root.path().join("ticks-1");
    run("mc", &|out| {
        ["simulate", "--seed", "5", "--replications", "12", "--out"]
            .iter()
            .map(|s| s.to_string())
            .chain([out.display().to_string()])
            .collect()
    });
    run("ticks", &|out| {
        ["simulate", "--emit-ticks", "--days", "2", "--seed", "5", "--out"]
            .iter()
            .map(|s| s.to_string())
            .chain([out.display().to_string()])
            .collect()
    });
    run("est", &|out| {
        vec![
            "estimate".into(),
            ticks.join("ticks_A.csv").display().to_string(),
            ticks.join("ticks_B.csv").display().to_string(),
            "--bootstrap-reps".into(),
            "99".into(),
            "--seed".into(),
            "5".into(),
            "--out".into(),
            out.display().to_string(),
        ]
    });
    Outcome {
        pass: ok && same,
        detail: format!(
            "simulate (grid and ticks) and estimate, 1 vs 8 threads: {compared} files, byte-identical: {same}"
        ),
    }
}

fn main() {
    let desk = ExperimentConfig {
        noise_levels: vec![0.0],
        samplings: vec![60],
        replications: 1000,
        ..ExperimentConfig::default()
    };
    let start = Instant::now();
    let table = run_experiment(&desk, 104).unwrap();
    let desk_secs = start.elapsed().as_secs_f64();

    let mut results = Vec::new();
    let mut check = |n: usize, o: Outcome| {
        report(n, &o);
        results.push(o.pass);
    };
    check(1, wrc_identity());
    check(2, energy_and_reconstruction());
    check(3, refresh_oracle());
    let mut desk_outcome = desk_scale(&table);
    desk_outcome.detail.push_str(&format!(", {desk_secs:.0} s (< 600 s)"));
    desk_outcome.pass &= desk_secs < 600.0;
    check(4, desk_outcome);
    check(5, noise_robustness());
    check(6, spot_correlation(&table));
    check(7, bootstrap_test());
    check(8, jump_localization());
    check(9, regressions());
    check(10, determinism());
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, p)| !**p)
        .map(|(i, _)| i + 1)
        .collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
