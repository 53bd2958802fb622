//! Refresh-time synchronization and log returns.
//!
//! The first refresh time is the moment every asset has traded at least
//! once. Each later refresh time is the first moment after the previous one
//! at which every asset has traded again. Prices at a refresh time are the
//! last observed (previous-tick) prices.

use crate::ingest::TickSeries;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SyncError {
    #[error("asset `{0}` has no ticks")]
    EmptySeries(String),
    #[error("asset `{0}` timestamps are not strictly increasing; dedupe first")]
    Unsorted(String),
    #[error("need at least two refresh times to form returns, got {0}")]
    TooFewStamps(usize),
    #[error("need at least one asset")]
    NoAssets,
}

/// Refresh times with the previous-tick price of every asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refreshed {
    pub times: Vec<i64>,
    /// `prices[i][v]` is the price of asset `i` at `times[v]`.
    pub prices: Vec<Vec<f64>>,
    pub asset_ids: Vec<String>,
}

/// Synchronized log returns for a pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnPanel {
    /// `N + 1` refresh stamps bounding `N` returns.
    pub refresh_times: Vec<i64>,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub asset_ids: [String; 2],
}

impl ReturnPanel {
    /// Panel built directly from returns, with refresh times `0..=N`.
    pub fn from_returns(r1: Vec<f64>, r2: Vec<f64>) -> Self {
        assert_eq!(r1.len(), r2.len(), "return series must have equal length");
        Self {
            refresh_times: (0..=r1.len() as i64).collect(),
            r1,
            r2,
            asset_ids: ["1".into(), "2".into()],
        }
    }

    pub fn len(&self) -> usize {
        self.r1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r1.is_empty()
    }

    /// Sub-panel of returns `range`, keeping the bounding stamps.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            refresh_times: self.refresh_times[range.start..=range.end].to_vec(),
            r1: self.r1[range.clone()].to_vec(),
            r2: self.r2[range].to_vec(),
            asset_ids: self.asset_ids.clone(),
        }
    }
}

/// Computes refresh times across `series`.
pub fn refresh_time(series: &[&TickSeries]) -> Result<Refreshed, SyncError> {
    if series.is_empty() {
        return Err(SyncError::NoAssets);
    }
    for s in series {
        if s.is_empty() {
            return Err(SyncError::EmptySeries(s.asset_id.clone()));
        }
        if !s.is_strictly_increasing() {
            return Err(SyncError::Unsorted(s.asset_id.clone()));
        }
    }
    let d = series.len();
    // cursor[i] = index of the next unused tick of asset i
    let mut cursor = vec![0usize; d];
    let mut times = Vec::new();
    let mut prices = vec![Vec::new(); d];
    loop {
        let tau = series
            .iter()
            .zip(&cursor)
            .map(|(s, &c)| s.ticks.get(c).map(|t| t.timestamp))
            .try_fold(i64::MIN, |acc, t| t.map(|t| acc.max(t)));
        let Some(tau) = tau else { break };
        for (i, s) in series.iter().enumerate() {
            // advance past every tick at or before tau; the last one is the previous tick
            let ticks = &s.ticks;
            let mut c = cursor[i];
            while c < ticks.len() && ticks[c].timestamp <= tau {
                c += 1;
            }
            prices[i].push(ticks[c - 1].price);
            cursor[i] = c;
        }
        times.push(tau);
    }
    Ok(Refreshed {
        times,
        prices,
        asset_ids: series.iter().map(|s| s.asset_id.clone()).collect(),
    })
}

/// Log returns between consecutive refresh times of the first two assets.
pub fn log_returns(refreshed: &Refreshed) -> Result<ReturnPanel, SyncError> {
    let n = refreshed.times.len();
    if n < 2 {
        return Err(SyncError::TooFewStamps(n));
    }
    if refreshed.prices.len() < 2 {
        return Err(SyncError::NoAssets);
    }
    let diff = |p: &[f64]| p.windows(2).map(|w| w[1].ln() - w[0].ln()).collect::<Vec<_>>();
    Ok(ReturnPanel {
        refresh_times: refreshed.times.clone(),
        r1: diff(&refreshed.prices[0]),
        r2: diff(&refreshed.prices[1]),
        asset_ids: [refreshed.asset_ids[0].clone(), refreshed.asset_ids[1].clone()],
    })
}

/// Refresh-time synchronizes a pair and returns its log returns.
pub fn synchronize_pair(a: &TickSeries, b: &TickSeries) -> Result<ReturnPanel, SyncError> {
    log_returns(&refresh_time(&[a, b])?)
}
