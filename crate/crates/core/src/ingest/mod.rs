//! Tick loading and cleaning.
//!
//! Tick files are UTF-8 CSV with a header `timestamp,price[,volume]`. The
//! timestamp is either an integer count of nanoseconds on the exchange-local
//! clock or an ISO-8601 date-time. A date-time without an offset is read as
//! exchange-local; one carrying an offset (or `Z`) is converted to UTC and
//! then shifted by the calendar's UTC offset.

pub mod calendar;

pub use calendar::{CalendarError, Session, SessionCalendar};

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};
use std::io::Read;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: price must be positive and finite, got {price}")]
    NonPositivePrice { line: u64, price: f64 },
    #[error("line {line}: volume must be non-negative, got {volume}")]
    NegativeVolume { line: u64, volume: f64 },
    #[error("missing or malformed header: expected `timestamp,price[,volume]`, got `{0}`")]
    Header(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tick {
    /// Nanoseconds on the exchange-local clock.
    pub timestamp: i64,
    pub price: f64,
    pub volume: Option<f64>,
}

impl Tick {
    pub fn new(timestamp: i64, price: f64) -> Self {
        Self {
            timestamp,
            price,
            volume: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TickSeries {
    pub asset_id: String,
    pub ticks: Vec<Tick>,
}

impl TickSeries {
    pub fn new(asset_id: impl Into<String>, ticks: Vec<Tick>) -> Self {
        Self {
            asset_id: asset_id.into(),
            ticks,
        }
    }

    /// Builds a series from `(timestamp, price)` pairs.
    pub fn from_pairs(asset_id: impl Into<String>, pairs: &[(i64, f64)]) -> Self {
        Self::new(asset_id, pairs.iter().map(|&(t, p)| Tick::new(t, p)).collect())
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn timestamps(&self) -> impl Iterator<Item = i64> + '_ {
        self.ticks.iter().map(|t| t.timestamp)
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.ticks.windows(2).all(|w| w[0].timestamp < w[1].timestamp)
    }
}

/// How to interpret the timestamp column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimestampFormat {
    /// Integer nanoseconds if the field parses as an integer, ISO-8601 otherwise.
    #[default]
    Auto,
    Nanos,
    Iso8601,
}

/// Format descriptor passed to [`load_ticks`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TickFormat {
    pub timestamp: TimestampFormat,
    /// Added to UTC instants parsed from offset-carrying date-times.
    pub utc_offset_secs: i32,
}

impl TickFormat {
    pub fn for_calendar(cal: &SessionCalendar) -> Self {
        Self {
            timestamp: TimestampFormat::Auto,
            utc_offset_secs: cal.utc_offset_secs,
        }
    }
}

fn parse_timestamp(field: &str, fmt: &TickFormat) -> Result<i64, String> {
    let field = field.trim();
    let as_int = || {
        field
            .parse::<i64>()
            .map_err(|e| format!("bad integer timestamp `{field}`: {e}"))
    };
    let as_iso = || -> Result<i64, String> {
        let nanos = |dt: NaiveDateTime| {
            dt.and_utc()
                .timestamp_nanos_opt()
                .ok_or_else(|| format!("timestamp `{field}` out of range"))
        };
        if let Ok(dt) = DateTime::parse_from_rfc3339(field) {
            let utc = nanos(dt.naive_utc())?;
            return Ok(utc + fmt.utc_offset_secs as i64 * 1_000_000_000);
        }
        for pattern in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
            if let Ok(dt) = NaiveDateTime::parse_from_str(field, pattern) {
                return nanos(dt);
            }
        }
        Err(format!("bad ISO-8601 timestamp `{field}`"))
    };
    match fmt.timestamp {
        TimestampFormat::Nanos => as_int(),
        TimestampFormat::Iso8601 => as_iso(),
        TimestampFormat::Auto => as_int().or_else(|_| as_iso()),
    }
}

/// Reads a tick file in file order. No cleaning is applied.
pub fn load_ticks<R: Read>(
    source: R,
    asset_id: impl Into<String>,
    fmt: &TickFormat,
) -> Result<TickSeries, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let mut records = reader.records();
    let mut series = TickSeries::new(asset_id, Vec::new());
    let header = match records.next() {
        None => return Ok(series),
        Some(r) => r.map_err(|e| IngestError::Parse {
            line: 1,
            message: e.to_string(),
        })?,
    };
    let cols: Vec<String> = header.iter().map(|c| c.to_ascii_lowercase()).collect();
    let has_volume = match cols.as_slice() {
        [t, p] if t == "timestamp" && p == "price" => false,
        [t, p, v] if t == "timestamp" && p == "price" && v == "volume" => true,
        _ => return Err(IngestError::Header(cols.join(","))),
    };
    for record in records {
        let record = record.map_err(|e| IngestError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let expected = if has_volume { 3 } else { 2 };
        if record.len() != expected && !(has_volume && record.len() == 2) {
            return Err(IngestError::Parse {
                line,
                message: format!("expected {expected} fields, found {}", record.len()),
            });
        }
        let timestamp = parse_timestamp(&record[0], fmt).map_err(|message| IngestError::Parse { line, message })?;
        let price: f64 = record[1].parse().map_err(|e| IngestError::Parse {
            line,
            message: format!("bad price `{}`: {e}", &record[1]),
        })?;
        if !(price > 0.0 && price.is_finite()) {
            return Err(IngestError::NonPositivePrice { line, price });
        }
        let volume = match record.get(2) {
            Some(v) if !v.is_empty() => {
                let v: f64 = v.parse().map_err(|e| IngestError::Parse {
                    line,
                    message: format!("bad volume `{v}`: {e}"),
                })?;
                if !(v >= 0.0) {
                    return Err(IngestError::NegativeVolume { line, volume: v });
                }
                Some(v)
            }
            _ => None,
        };
        series.ticks.push(Tick {
            timestamp,
            price,
            volume,
        });
    }
    Ok(series)
}

/// Writes ticks in the format read by [`load_ticks`], with integer
/// nanosecond timestamps. Prices round-trip exactly.
pub fn write_ticks<W: std::io::Write>(series: &TickSeries, out: W) -> Result<(), IngestError> {
    let with_volume = series.ticks.iter().any(|t| t.volume.is_some());
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| IngestError::Io(std::io::Error::other(e));
    if with_volume {
        w.write_record(["timestamp", "price", "volume"]).map_err(map)?;
    } else {
        w.write_record(["timestamp", "price"]).map_err(map)?;
    }
    for t in &series.ticks {
        let ts = t.timestamp.to_string();
        let p = format!("{}", t.price);
        if with_volume {
            let v = t.volume.map(|v| format!("{v}")).unwrap_or_default();
            w.write_record([ts, p, v]).map_err(map)?;
        } else {
            w.write_record([ts, p]).map_err(map)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Collapses ticks sharing a timestamp into one tick at the mean price.
/// Volumes at the same stamp are summed.
pub fn dedupe_timestamps(mut series: TickSeries) -> TickSeries {
    series.ticks.sort_by_key(|t| t.timestamp);
    let mut out: Vec<Tick> = Vec::with_capacity(series.ticks.len());
    let mut i = 0;
    let ticks = &series.ticks;
    while i < ticks.len() {
        let ts = ticks[i].timestamp;
        let mut j = i;
        let mut sum = 0.0;
        let mut volume: Option<f64> = None;
        while j < ticks.len() && ticks[j].timestamp == ts {
            sum += ticks[j].price;
            if let Some(v) = ticks[j].volume {
                volume = Some(volume.unwrap_or(0.0) + v);
            }
            j += 1;
        }
        let price = if j - i == 1 {
            ticks[i].price
        } else {
            sum / (j - i) as f64
        };
        out.push(Tick {
            timestamp: ts,
            price,
            volume,
        });
        i = j;
    }
    series.ticks = out;
    series
}

/// Drops ticks on excluded trading dates and in the daily maintenance gap.
pub fn filter_calendar(mut series: TickSeries, cal: &SessionCalendar) -> TickSeries {
    series.ticks.retain(|t| cal.assign_session(t.timestamp).is_ok());
    series
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(s: &str) -> Result<TickSeries, IngestError> {
        load_ticks(s.as_bytes(), "X", &TickFormat::default())
    }

    #[test]
    fn loads_rows_in_order() {
        let s = load("timestamp,price\n1,1.50\n2,1.51\n").unwrap();
        assert_eq!(s.ticks, vec![Tick::new(1, 1.50), Tick::new(2, 1.51)]);
    }

    #[test]
    fn empty_file_is_empty_series() {
        assert!(load("").unwrap().is_empty());
        assert!(load("timestamp,price\n").unwrap().is_empty());
    }

    #[test]
    fn negative_price_is_rejected() {
        let err = load("timestamp,price\n1,-1.0\n").unwrap_err();
        assert!(matches!(err, IngestError::NonPositivePrice { line: 2, .. }));
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = load("timestamp,price\n1,1.5\n2,abc\n").unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 3, .. }), "{err}");
        let err = load("timestamp,price\n1,1.5\n2\n").unwrap_err();
        assert!(matches!(err, IngestError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn iso_timestamps() {
        let fmt = TickFormat {
            timestamp: TimestampFormat::Auto,
            utc_offset_secs: -6 * 3600,
        };
        let csv = "timestamp,price,volume\n2015-01-07T10:00:00.5,1.2,3\n2015-01-07T16:00:00Z,1.3,\n";
        let s = load_ticks(csv.as_bytes(), "X", &fmt).unwrap();
        let base = NaiveDateTime::parse_from_str("2015-01-07 10:00:00", "%Y-%m-%d %H:%M:%S")
            .unwrap()
            .and_utc()
            .timestamp_nanos_opt()
            .unwrap();
        assert_eq!(s.ticks[0].timestamp, base + 500_000_000);
        assert_eq!(s.ticks[0].volume, Some(3.0));
        // 16:00 UTC is 10:00 CST
        assert_eq!(s.ticks[1].timestamp, base);
        assert_eq!(s.ticks[1].volume, None);
    }

    #[test]
    fn write_then_load_round_trips() {
        let s = TickSeries::from_pairs("X", &[(5, 1.234_567_890_123), (9, 0.1 + 0.2)]);
        let mut buf = Vec::new();
        write_ticks(&s, &mut buf).unwrap();
        assert_eq!(load(std::str::from_utf8(&buf).unwrap()).unwrap(), s);
    }

    #[test]
    fn dedupe_averages_common_stamps() {
        let s = TickSeries::from_pairs("X", &[(1, 1.0), (1, 3.0), (2, 2.0)]);
        assert_eq!(dedupe_timestamps(s).ticks, vec![Tick::new(1, 2.0), Tick::new(2, 2.0)]);
        let five: Vec<(i64, f64)> = (1..=5).map(|p| (7, p as f64)).collect();
        let mean = five.iter().map(|p| p.1).sum::<f64>() / 5.0;
        assert_eq!(
            dedupe_timestamps(TickSeries::from_pairs("X", &five)).ticks,
            vec![Tick::new(7, mean)]
        );
    }

    #[test]
    fn dedupe_sorts_and_leaves_unique_input() {
        let s = TickSeries::from_pairs("X", &[(1, 1.0), (2, 2.0)]);
        assert_eq!(dedupe_timestamps(s.clone()), s);
        let s = TickSeries::from_pairs("X", &[(3, 1.0), (1, 2.0)]);
        assert!(dedupe_timestamps(s).is_strictly_increasing());
    }

    #[test]
    fn calendar_filter() {
        let cal = SessionCalendar::default();
        let at = |s: &str| {
            NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M")
                .unwrap()
                .and_utc()
                .timestamp_nanos_opt()
                .unwrap()
        };
        let s = TickSeries::from_pairs(
            "X",
            &[
                (at("2014-12-25 10:00"), 1.0),
                (at("2015-01-07 10:00"), 1.0),
                (at("2015-01-07 16:30"), 1.0),
            ],
        );
        let kept = filter_calendar(s, &cal);
        assert_eq!(kept.timestamps().collect::<Vec<_>>(), vec![at("2015-01-07 10:00")]);
    }
}
