//! Bivariate factor stochastic volatility model with jumps and noise.
//!
//! Time is measured in trading days, discretized into `steps` Euler steps.
//! For each asset `i`
//!
//! ```text
//! dX_i = μ_i dt + γ_i σ_i dB_i + √(1 − γ_i²) σ_i dW + jumps
//! σ_i  = s · exp(β₀ + β₁ v_i)
//! dv_i = α v_i dt + dB_i
//! ```
//!
//! with independent Brownian motions `B₁, B₂, W`, `v_i(0) ~ N(0, −1/(2α))`
//! and a volatility scale `s`. The default parameters give `E σ² = s²`, so
//! with `s = 0.01` the daily return standard deviation is about 1%.
//! Observed log prices are `Y = X + ε` with i.i.d. Gaussian noise.

use crate::estimators::{self, EstimatorSettings, GridRule};
use crate::ingest::{SessionCalendar, Tick, TickSeries};
use crate::matrix::Sym2;
use crate::rng::stream_rng;
use crate::sync::ReturnPanel;
use chrono::NaiveDate;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SimError {
    #[error("invalid model parameter: {0}")]
    Parameter(String),
    #[error("{jumps} jumps do not fit in {steps} steps")]
    TooManyJumps { jumps: usize, steps: usize },
    #[error("sampling interval {0} must be between 1 and the number of steps")]
    Sampling(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub mu: [f64; 2],
    pub beta0: f64,
    pub beta1: f64,
    /// Mean reversion of the volatility factor, per day (negative).
    pub alpha: f64,
    pub gamma: [f64; 2],
    pub vol_scale: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            mu: [0.0, 0.0],
            beta0: -5.0 / 16.0,
            beta1: 1.0 / 8.0,
            alpha: -1.0 / 40.0,
            gamma: [-0.3, -0.3],
            vol_scale: 0.01,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.alpha < 0.0) {
            return Err(SimError::Parameter(format!(
                "alpha must be negative, got {}",
                self.alpha
            )));
        }
        for g in self.gamma {
            if !(g.abs() < 1.0) {
                return Err(SimError::Parameter(format!("|gamma| must be below 1, got {g}")));
            }
        }
        if !(self.vol_scale > 0.0 && self.vol_scale.is_finite()) {
            return Err(SimError::Parameter(format!(
                "vol_scale must be positive, got {}",
                self.vol_scale
            )));
        }
        Ok(())
    }

    /// Correlation of the two diffusive increments.
    pub fn spot_correlation(&self) -> f64 {
        ((1.0 - self.gamma[0].powi(2)) * (1.0 - self.gamma[1].powi(2))).sqrt()
    }

    /// Stationary `√(E σ²)`, the unconditional daily return standard deviation.
    pub fn unconditional_daily_sd(&self) -> f64 {
        let var_v = -1.0 / (2.0 * self.alpha);
        self.vol_scale * (self.beta0 + self.beta1 * self.beta1 * var_v).exp()
    }
}

/// How jump sizes are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpSizeRule {
    /// `N(0, σ_J²)` with `σ_J` the unconditional daily return standard
    /// deviation. Both legs of a co-jump share one standard normal draw.
    #[default]
    Unconditional,
    /// Like `Unconditional`, but `σ_J` of each asset is the square root of
    /// that day's integrated variance.
    PerDay,
    /// Exactly one standard deviation (`±σ_J` with random common sign).
    OneSd,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum JumpTiming {
    /// The plan's counts, at uniformly drawn distinct steps.
    #[default]
    Fixed,
    /// Poisson counts per day with the given intensities.
    Poisson {
        cojump_intensity: f64,
        idiosyncratic_intensity: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JumpPlan {
    pub cojumps: usize,
    /// Idiosyncratic jumps per asset.
    pub idiosyncratic: usize,
    pub size_rule: JumpSizeRule,
    pub timing: JumpTiming,
}

impl JumpPlan {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn cojumps(n: usize) -> Self {
        Self {
            cojumps: n,
            ..Self::default()
        }
    }

    pub fn idiosyncratic(n: usize) -> Self {
        Self {
            idiosyncratic: n,
            ..Self::default()
        }
    }

    /// Short label such as `0cj-1ij`.
    pub fn label(&self) -> String {
        match self.timing {
            JumpTiming::Fixed => format!("{}cj-{}ij", self.cojumps, self.idiosyncratic),
            JumpTiming::Poisson {
                cojump_intensity,
                idiosyncratic_intensity,
            } => format!("poisson-{cojump_intensity}cj-{idiosyncratic_intensity}ij"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub model: ModelParams,
    /// Euler steps per day.
    pub steps: usize,
    /// Length of one step in seconds (only used for labels and tick export).
    pub step_seconds: f64,
    /// Standard deviation of the additive log-price noise.
    pub noise_std: f64,
    pub jumps: JumpPlan,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            model: ModelParams::default(),
            steps: 23_400,
            step_seconds: 1.0,
            noise_std: 0.0,
            jumps: JumpPlan::none(),
        }
    }
}

/// One injected jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    /// The jump is added to the increment from observation `step` to `step + 1`.
    pub step: usize,
    pub size_1: f64,
    pub size_2: f64,
}

/// One simulated day with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDay {
    /// Latent log prices, `steps + 1` points starting at 0.
    pub x: [Vec<f64>; 2],
    /// Observed log prices.
    pub y: [Vec<f64>; 2],
    /// Spot volatility of each asset at the start of each step.
    pub sigma: [Vec<f64>; 2],
    /// Left-point Riemann sum of the spot covariance matrix.
    pub true_ic: Sym2,
    /// Exact sums of jump products.
    pub true_cj: Sym2,
    pub jumps: Vec<JumpEvent>,
}

impl SimDay {
    pub fn steps(&self) -> usize {
        self.x[0].len() - 1
    }

    pub fn true_qv(&self) -> Sym2 {
        self.true_ic + self.true_cj
    }

    /// Observation indices `0, m, 2m, …` plus the final observation.
    pub fn sample_indices(&self, m: usize) -> Result<Vec<usize>, SimError> {
        let n = self.steps();
        if m == 0 || m > n {
            return Err(SimError::Sampling(m));
        }
        let mut idx: Vec<usize> = (0..=n).step_by(m).collect();
        if *idx.last().expect("non-empty") != n {
            idx.push(n);
        }
        Ok(idx)
    }

    /// Observed returns sampled every `m` steps. Refresh times are the
    /// observation indices.
    pub fn sampled_returns(&self, m: usize) -> Result<ReturnPanel, SimError> {
        let idx = self.sample_indices(m)?;
        let diff = |p: &[f64]| idx.windows(2).map(|w| p[w[1]] - p[w[0]]).collect::<Vec<_>>();
        Ok(ReturnPanel {
            refresh_times: idx.iter().map(|&i| i as i64).collect(),
            r1: diff(&self.y[0]),
            r2: diff(&self.y[1]),
            asset_ids: ["1".into(), "2".into()],
        })
    }

    /// Index of the sampled return containing jump `step`.
    pub fn sampled_index(&self, step: usize, m: usize) -> usize {
        step / m
    }

    /// Ticks `p0 · exp(Y)` stamped `start + k · step_nanos`.
    pub fn tick_series(&self, asset: usize, id: &str, start: i64, step_nanos: i64, p0: f64) -> TickSeries {
        let ticks = self.y[asset]
            .iter()
            .enumerate()
            .map(|(k, y)| Tick::new(start + k as i64 * step_nanos, p0 * y.exp()))
            .collect();
        TickSeries::new(id, ticks)
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Simulates the diffusive part of one day.
pub fn simulate_day<R: Rng>(cfg: &SimConfig, rng: &mut R) -> Result<SimDay, SimError> {
    cfg.model.validate()?;
    let m = &cfg.model;
    let n = cfg.steps;
    if n == 0 {
        return Err(SimError::Parameter("steps must be positive".into()));
    }
    let dt = 1.0 / n as f64;
    let sdt = dt.sqrt();
    let sd_v0 = (-1.0 / (2.0 * m.alpha)).sqrt();
    let mut v = [sd_v0 * standard_normal(rng), sd_v0 * standard_normal(rng)];
    let load = [(1.0 - m.gamma[0].powi(2)).sqrt(), (1.0 - m.gamma[1].powi(2)).sqrt()];
    let mut x = [Vec::with_capacity(n + 1), Vec::with_capacity(n + 1)];
    let mut sigma = [Vec::with_capacity(n), Vec::with_capacity(n)];
    x[0].push(0.0);
    x[1].push(0.0);
    let (mut ic11, mut ic12, mut ic22) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let db = [sdt * standard_normal(rng), sdt * standard_normal(rng)];
        let dw = sdt * standard_normal(rng);
        let s = [
            m.vol_scale * (m.beta0 + m.beta1 * v[0]).exp(),
            m.vol_scale * (m.beta0 + m.beta1 * v[1]).exp(),
        ];
        for i in 0..2 {
            let last = *x[i].last().expect("starts with one point");
            x[i].push(last + m.mu[i] * dt + m.gamma[i] * s[i] * db[i] + load[i] * s[i] * dw);
            sigma[i].push(s[i]);
            v[i] += m.alpha * v[i] * dt + db[i];
        }
        ic11 += s[0] * s[0] * dt;
        ic12 += s[0] * s[1] * load[0] * load[1] * dt;
        ic22 += s[1] * s[1] * dt;
    }
    Ok(SimDay {
        y: x.clone(),
        x,
        sigma,
        true_ic: Sym2::new(ic11, ic12, ic22),
        true_cj: Sym2::ZERO,
        jumps: Vec::new(),
    })
}

fn add_jump(day: &mut SimDay, ev: JumpEvent) {
    for (i, size) in [ev.size_1, ev.size_2].into_iter().enumerate() {
        if size != 0.0 {
            for p in &mut day.x[i][ev.step + 1..] {
                *p += size;
            }
            for p in &mut day.y[i][ev.step + 1..] {
                *p += size;
            }
        }
    }
    day.true_cj = day.true_cj + Sym2::new(ev.size_1 * ev.size_1, ev.size_1 * ev.size_2, ev.size_2 * ev.size_2);
    day.jumps.push(ev);
}

/// Adds the plan's jumps at distinct random steps.
pub fn inject_jumps<R: Rng>(
    mut day: SimDay,
    plan: &JumpPlan,
    model: &ModelParams,
    rng: &mut R,
) -> Result<SimDay, SimError> {
    let n = day.steps();
    let (cojumps, idio) = match plan.timing {
        JumpTiming::Fixed => (plan.cojumps, plan.idiosyncratic),
        JumpTiming::Poisson {
            cojump_intensity,
            idiosyncratic_intensity,
        } => {
            let draw = |lambda: f64, rng: &mut R| -> Result<usize, SimError> {
                if lambda == 0.0 {
                    return Ok(0);
                }
                let p = Poisson::new(lambda).map_err(|e| SimError::Parameter(format!("intensity {lambda}: {e}")))?;
                Ok(p.sample(rng) as usize)
            };
            (draw(cojump_intensity, rng)?, draw(idiosyncratic_intensity, rng)?)
        }
    };
    let total = cojumps + 2 * idio;
    if total > n {
        return Err(SimError::TooManyJumps { jumps: total, steps: n });
    }
    if total == 0 {
        return Ok(day);
    }
    let sd = match plan.size_rule {
        JumpSizeRule::Unconditional | JumpSizeRule::OneSd => {
            let s = model.unconditional_daily_sd();
            [s, s]
        }
        JumpSizeRule::PerDay => [day.true_ic.a11.sqrt(), day.true_ic.a22.sqrt()],
    };
    let draw = |rng: &mut R| -> f64 {
        match plan.size_rule {
            JumpSizeRule::OneSd => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            _ => standard_normal(rng),
        }
    };
    let steps = sample(rng, n, total).into_vec();
    for &step in &steps[..cojumps] {
        let z = draw(rng);
        add_jump(
            &mut day,
            JumpEvent {
                step,
                size_1: sd[0] * z,
                size_2: sd[1] * z,
            },
        );
    }
    for (k, &step) in steps[cojumps..].iter().enumerate() {
        let z = draw(rng);
        let ev = if k < idio {
            JumpEvent {
                step,
                size_1: sd[0] * z,
                size_2: 0.0,
            }
        } else {
            JumpEvent {
                step,
                size_1: 0.0,
                size_2: sd[1] * z,
            }
        };
        add_jump(&mut day, ev);
    }
    day.jumps.sort_by_key(|e| e.step);
    Ok(day)
}

/// Adds i.i.d. `N(0, std²)` noise to the observed log prices.
pub fn add_noise<R: Rng>(mut day: SimDay, std: f64, rng: &mut R) -> Result<SimDay, SimError> {
    if !(std >= 0.0 && std.is_finite()) {
        return Err(SimError::Parameter(format!(
            "noise std must be non-negative, got {std}"
        )));
    }
    if std == 0.0 {
        return Ok(day);
    }
    let normal = Normal::new(0.0, std).map_err(|e| SimError::Parameter(e.to_string()))?;
    for i in 0..2 {
        for (y, x) in day.y[i].iter_mut().zip(&day.x[i]) {
            *y = x + normal.sample(rng);
        }
    }
    Ok(day)
}

/// Simulates a complete day (diffusion, jumps, noise) from the streams
/// keyed by `(seed, key…, component)`. The diffusion, jump and noise
/// streams are separate, so cells that differ only in jumps or noise share
/// the same diffusion path.
pub fn simulate_full_day(cfg: &SimConfig, seed: u64, key: &[u64]) -> Result<SimDay, SimError> {
    let stream = |c: u64| {
        let mut k = key.to_vec();
        k.push(c);
        stream_rng(seed, &k)
    };
    let day = simulate_day(cfg, &mut stream(0))?;
    let day = inject_jumps(day, &cfg.jumps, &cfg.model, &mut stream(1))?;
    add_noise(day, cfg.noise_std, &mut stream(2))
}

/// Keeps each tick with probability `p` (the first and last always kept),
/// producing asynchronous trading.
pub fn thin_ticks<R: Rng>(series: &TickSeries, p: f64, rng: &mut R) -> TickSeries {
    let last = series.ticks.len().saturating_sub(1);
    let ticks = series
        .ticks
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let u: f64 = rng.random();
            *k == 0 || *k == last || u < p
        })
        .map(|(_, t)| *t)
        .collect();
    TickSeries::new(series.asset_id.clone(), ticks)
}

/// Multi-day asynchronous tick panel on a session calendar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TickPanelConfig {
    pub sim: SimConfig,
    pub start: NaiveDate,
    /// Trading days to generate; excluded dates are skipped, not counted.
    pub days: usize,
    /// Probability that each simulated price is observed as a trade.
    pub trade_probability: [f64; 2],
    pub initial_price: [f64; 2],
    pub asset_ids: [String; 2],
}

impl Default for TickPanelConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig {
                steps: 16_560,
                step_seconds: 5.0,
                ..SimConfig::default()
            },
            start: NaiveDate::from_ymd_opt(2015, 1, 5).expect("valid date"),
            days: 5,
            trade_probability: [0.6, 0.4],
            initial_price: [1.5, 1.1],
            asset_ids: ["A".into(), "B".into()],
        }
    }
}

/// A simulated tick panel with the truth of every day.
#[derive(Debug, Clone, PartialEq)]
pub struct TickPanel {
    pub series: [TickSeries; 2],
    pub days: Vec<(NaiveDate, SimDay)>,
}

/// Simulates `cfg.days` trading days. Day `d` uses the streams
/// `(seed, d, …)`, the thinning of asset `i` the stream `(seed, d, 3 + i)`.
/// Step `k` of a day is stamped `origin + k · step_seconds`; steps at or
/// after the close are dropped.
pub fn simulate_tick_panel(cfg: &TickPanelConfig, cal: &SessionCalendar, seed: u64) -> Result<TickPanel, SimError> {
    for p in cfg.trade_probability {
        if !(p > 0.0 && p <= 1.0) {
            return Err(SimError::Parameter(format!(
                "trade probability must be in (0, 1], got {p}"
            )));
        }
    }
    if !(cfg.sim.step_seconds > 0.0) {
        return Err(SimError::Parameter(format!(
            "step_seconds must be positive, got {}",
            cfg.sim.step_seconds
        )));
    }
    let step_nanos = (cfg.sim.step_seconds * 1e9).round() as i64;
    let close = cal.boundaries()[3] * 1_000_000_000;
    let mut series = cfg.asset_ids.clone().map(|id| TickSeries::new(id, Vec::new()));
    let mut days = Vec::with_capacity(cfg.days);
    let mut date = cfg.start;
    while days.len() < cfg.days {
        if !cal.is_excluded_date(date) {
            let d = days.len() as u64;
            let day = simulate_full_day(&cfg.sim, seed, &[d])?;
            let origin = cal.day_origin(date);
            for (i, s) in series.iter_mut().enumerate() {
                let mut full = day.tick_series(i, &cfg.asset_ids[i], origin, step_nanos, cfg.initial_price[i]);
                full.ticks.retain(|t| t.timestamp - origin < close);
                let thinned = thin_ticks(
                    &full,
                    cfg.trade_probability[i],
                    &mut stream_rng(seed, &[d, 3 + i as u64]),
                );
                s.ticks.extend(thinned.ticks);
            }
            days.push((date, day));
        }
        date = date
            .succ_opt()
            .ok_or_else(|| SimError::Parameter("date out of range".into()))?;
    }
    Ok(TickPanel { series, days })
}

/// Estimators scored by [`run_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Rc,
    Bc,
    Tscv,
    Jwc,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Rc,
        EstimatorKind::Bc,
        EstimatorKind::Tscv,
        EstimatorKind::Jwc,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Rc => "RC",
            EstimatorKind::Bc => "BC",
            EstimatorKind::Tscv => "TSCV",
            EstimatorKind::Jwc => "JWC",
        }
    }
}

/// Monte Carlo grid: noise levels × jump plans × sampling intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    pub steps: usize,
    pub step_seconds: f64,
    pub noise_levels: Vec<f64>,
    pub plans: Vec<JumpPlan>,
    /// Sampling intervals in steps.
    pub samplings: Vec<usize>,
    pub replications: usize,
    pub grid: GridRule,
    pub levels: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelParams::default(),
            steps: 23_400,
            step_seconds: 1.0,
            noise_levels: vec![0.0, 0.0015],
            plans: vec![JumpPlan::none(), JumpPlan::cojumps(1), JumpPlan::idiosyncratic(1)],
            samplings: vec![60, 300, 1800, 3600],
            replications: 1000,
            grid: GridRule::default(),
            levels: None,
        }
    }
}

/// Bias and variance of one estimator in one cell, in units of `10⁻⁴`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub noise: f64,
    pub plan: String,
    pub sampling: usize,
    pub estimator: EstimatorKind,
    /// Mean of `(estimate − true IC₁₂) · 10⁴`.
    pub bias: f64,
    /// Sample variance of the scaled error.
    pub variance: f64,
    /// Same for the variance of asset 1 against true `IC₁₁`.
    pub bias_11: f64,
    pub variance_11: f64,
    /// Mean estimated correlation `est₁₂ / √(est₁₁ est₂₂)` over replications
    /// where both diagonals are positive.
    pub mean_correlation: f64,
    pub replications: usize,
}

/// Estimates per replication for one cell: `[kind][0 = 12, 1 = 11, 2 = 22]`.
type CellDraw = [[f64; 3]; 4];

fn estimate_cell(panel: &ReturnPanel, settings: &EstimatorSettings) -> Result<CellDraw, crate::Error> {
    let rc = estimators::realized_matrix(panel)?;
    let bc = estimators::bipower_matrix(panel)?;
    let g = settings.grid.resolve(&panel.r1, &panel.r2);
    let ts = Sym2::new(
        estimators::tscv(&panel.r1, &panel.r1, g)?,
        estimators::tscv(&panel.r1, &panel.r2, g)?,
        estimators::tscv(&panel.r2, &panel.r2, g)?,
    );
    let jwc = estimators::estimate_pair(panel, settings)?.ic;
    let row = |m: Sym2| [m.a12, m.a11, m.a22];
    Ok([row(rc), row(bc), row(ts), row(jwc)])
}

/// Runs the grid. Replication `r` uses the streams `(seed, r, …)` in every
/// cell, and results are reduced in replication order, so the output is a
/// pure function of `(cfg, seed)` regardless of thread count.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<CellResult>, crate::Error> {
    cfg.model.validate()?;
    for &m in &cfg.samplings {
        if m == 0 || m > cfg.steps {
            return Err(SimError::Sampling(m).into());
        }
    }
    if cfg.replications < 2 {
        return Err(SimError::Parameter("need at least two replications".into()).into());
    }
    let settings = EstimatorSettings {
        grid: cfg.grid,
        levels: cfg.levels,
        ..EstimatorSettings::default()
    };
    let cells: Vec<(usize, usize, usize)> = (0..cfg.noise_levels.len())
        .flat_map(|a| (0..cfg.plans.len()).flat_map(move |b| (0..cfg.samplings.len()).map(move |c| (a, b, c))))
        .collect();
    // per replication: (truth IC, draws for every cell)
    let per_rep: Vec<Result<Vec<(Sym2, CellDraw)>, crate::Error>> = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| {
            let base = SimConfig {
                model: cfg.model.clone(),
                steps: cfg.steps,
                step_seconds: cfg.step_seconds,
                noise_std: 0.0,
                jumps: JumpPlan::none(),
            };
            let diffusion = simulate_day(&base, &mut stream_rng(seed, &[r, 0]))?;
            let mut out = Vec::with_capacity(cells.len());
            for &(a, b, c) in &cells {
                let day = inject_jumps(
                    diffusion.clone(),
                    &cfg.plans[b],
                    &cfg.model,
                    &mut stream_rng(seed, &[r, 1]),
                )?;
                let day = add_noise(day, cfg.noise_levels[a], &mut stream_rng(seed, &[r, 2]))?;
                let panel = day.sampled_returns(cfg.samplings[c])?;
                out.push((day.true_ic, estimate_cell(&panel, &settings)?));
            }
            Ok(out)
        })
        .collect();
    let per_rep: Vec<Vec<(Sym2, CellDraw)>> = per_rep.into_iter().collect::<Result<_, _>>()?;
    let mut results = Vec::new();
    for (ci, &(a, b, c)) in cells.iter().enumerate() {
        for (k, kind) in EstimatorKind::ALL.iter().enumerate() {
            let err12: Vec<f64> = per_rep
                .iter()
                .map(|rep| (rep[ci].1[k][0] - rep[ci].0.a12) * 1e4)
                .collect();
            let err11: Vec<f64> = per_rep
                .iter()
                .map(|rep| (rep[ci].1[k][1] - rep[ci].0.a11) * 1e4)
                .collect();
            let corr: Vec<f64> = per_rep
                .iter()
                .filter_map(|rep| Sym2::new(rep[ci].1[k][1], rep[ci].1[k][0], rep[ci].1[k][2]).correlation())
                .collect();
            results.push(CellResult {
                noise: cfg.noise_levels[a],
                plan: cfg.plans[b].label(),
                sampling: cfg.samplings[c],
                estimator: *kind,
                bias: crate::stats::mean(&err12),
                variance: crate::stats::sample_variance(&err12),
                bias_11: crate::stats::mean(&err11),
                variance_11: crate::stats::sample_variance(&err11),
                mean_correlation: crate::stats::mean(&corr),
                replications: cfg.replications,
            });
        }
    }
    Ok(results)
}

/// Writes experiment results as CSV, one row per cell and estimator.
pub fn write_experiment_csv<W: std::io::Write>(results: &[CellResult], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| std::io::Error::other(e);
    w.write_record([
        "noise",
        "plan",
        "sampling",
        "estimator",
        "bias",
        "variance",
        "bias_11",
        "variance_11",
        "mean_correlation",
        "replications",
    ])
    .map_err(err)?;
    for r in results {
        w.write_record([
            format!("{}", r.noise),
            r.plan.clone(),
            r.sampling.to_string(),
            r.estimator.as_str().to_string(),
            format!("{}", r.bias),
            format!("{}", r.variance),
            format!("{}", r.bias_11),
            format!("{}", r.variance_11),
            format!("{}", r.mean_correlation),
            r.replications.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush()
}
