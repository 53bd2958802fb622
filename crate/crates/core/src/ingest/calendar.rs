//! Trading-session calendar for a 23-hour futures day.
//!
//! Timestamps are exchange-local nanoseconds. A trading day starts at the
//! configured origin (17:00 by default) and is labelled with the calendar
//! date on which it closes, so Sunday 17:00 opens Monday's trading day.
//! Offsets inside the day are measured from the origin and split into
//! half-open session intervals; the boundary instant belongs to the later
//! session.

use chrono::{Datelike, NaiveDate, NaiveTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

const NANOS_PER_SEC: i64 = 1_000_000_000;
const SECS_PER_DAY: i64 = 86_400;
pub(crate) const NANOS_PER_DAY: i64 = SECS_PER_DAY * NANOS_PER_SEC;

/// A session window. `Total` is the whole trading day and is never returned
/// by [`SessionCalendar::assign_session`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Session {
    Asia,
    Eu,
    Us,
    Total,
}

impl Session {
    pub const INTRADAY: [Session; 3] = [Session::Asia, Session::Eu, Session::Us];
    pub const ALL: [Session; 4] = [Session::Asia, Session::Eu, Session::Us, Session::Total];

    pub fn as_str(&self) -> &'static str {
        match self {
            Session::Asia => "asia",
            Session::Eu => "eu",
            Session::Us => "us",
            Session::Total => "total",
        }
    }

    pub(crate) fn index(&self) -> u64 {
        match self {
            Session::Asia => 0,
            Session::Eu => 1,
            Session::Us => 2,
            Session::Total => 3,
        }
    }
}

impl fmt::Display for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Session {
    type Err = CalendarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "asia" => Ok(Session::Asia),
            "eu" | "europe" => Ok(Session::Eu),
            "us" | "u.s." => Ok(Session::Us),
            "total" | "day" => Ok(Session::Total),
            other => Err(CalendarError::UnknownSession(other.to_string())),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CalendarError {
    #[error("timestamp {0} falls on an excluded date or outside trading hours")]
    Excluded(i64),
    #[error("unknown session name `{0}`")]
    UnknownSession(String),
    #[error("invalid time of day `{0}` (expected HH:MM or HH:MM:SS)")]
    InvalidTime(String),
    #[error("invalid UTC offset `{0}` (expected +HH:MM or -HH:MM)")]
    InvalidOffset(String),
    #[error("session boundaries must be strictly increasing from the day origin: {0}")]
    Boundaries(String),
    #[error("calendar file: {0}")]
    Parse(String),
}

/// Session boundaries, UTC offset and date exclusion rules.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionCalendar {
    /// Offset of exchange-local time from UTC, in seconds (CST is -21600).
    pub utc_offset_secs: i32,
    day_start: i64,
    eu_start: i64,
    us_start: i64,
    close: i64,
    /// Trading dates (closing dates) to drop, e.g. US federal holidays.
    pub holidays: BTreeSet<NaiveDate>,
    pub exclude_weekends: bool,
    /// Drop December 24–26 and December 31 – January 2.
    pub exclude_year_end: bool,
}

impl Default for SessionCalendar {
    /// CME Globex FX hours in CST: Asia 17:00–02:00, EU 02:00–08:00,
    /// US 08:00–16:00, fixed UTC−6, no holidays listed.
    fn default() -> Self {
        Self {
            utc_offset_secs: -6 * 3600,
            day_start: 17 * 3600,
            eu_start: 2 * 3600,
            us_start: 8 * 3600,
            close: 16 * 3600,
            holidays: BTreeSet::new(),
            exclude_weekends: true,
            exclude_year_end: true,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalendarFile {
    utc_offset: Option<String>,
    exclude_weekends: Option<bool>,
    exclude_year_end: Option<bool>,
    #[serde(default)]
    holidays: Vec<toml::Value>,
    sessions: Option<SessionsFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionsFile {
    asia: Option<String>,
    eu: Option<String>,
    us: Option<String>,
    close: Option<String>,
}

fn parse_time_of_day(s: &str) -> Result<i64, CalendarError> {
    let t = NaiveTime::parse_from_str(s, "%H:%M:%S")
        .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M"))
        .map_err(|_| CalendarError::InvalidTime(s.to_string()))?;
    Ok(t.num_seconds_from_midnight() as i64)
}

fn parse_offset(s: &str) -> Result<i32, CalendarError> {
    let bad = || CalendarError::InvalidOffset(s.to_string());
    let (sign, rest) = match s.as_bytes().first() {
        Some(b'+') => (1, &s[1..]),
        Some(b'-') => (-1, &s[1..]),
        _ => return Err(bad()),
    };
    let (h, m) = rest.split_once(':').unwrap_or((rest, "0"));
    let h: i32 = h.parse().map_err(|_| bad())?;
    let m: i32 = m.parse().map_err(|_| bad())?;
    if h > 23 || m > 59 {
        return Err(bad());
    }
    Ok(sign * (h * 3600 + m * 60))
}

impl SessionCalendar {
    /// Builds a calendar from times of day (seconds after midnight).
    pub fn new(
        asia_start: i64,
        eu_start: i64,
        us_start: i64,
        close: i64,
        utc_offset_secs: i32,
    ) -> Result<Self, CalendarError> {
        let cal = Self {
            utc_offset_secs,
            day_start: asia_start,
            eu_start,
            us_start,
            close,
            ..Self::default()
        };
        cal.validate()?;
        Ok(cal)
    }

    /// Parses the key-value calendar file. Missing keys keep their defaults.
    ///
    /// ```toml
    /// utc_offset = "-06:00"
    /// exclude_weekends = true
    /// exclude_year_end = true
    /// holidays = [2015-01-19, 2015-02-16]
    ///
    /// [sessions]
    /// asia = "17:00"
    /// eu = "02:00"
    /// us = "08:00"
    /// close = "16:00"
    /// ```
    pub fn from_toml_str(s: &str) -> Result<Self, CalendarError> {
        let file: CalendarFile = toml::from_str(s).map_err(|e| CalendarError::Parse(e.to_string()))?;
        let mut cal = Self::default();
        if let Some(off) = file.utc_offset {
            cal.utc_offset_secs = parse_offset(&off)?;
        }
        if let Some(w) = file.exclude_weekends {
            cal.exclude_weekends = w;
        }
        if let Some(y) = file.exclude_year_end {
            cal.exclude_year_end = y;
        }
        for h in file.holidays {
            let text = match h {
                toml::Value::Datetime(d) => d.to_string(),
                toml::Value::String(s) => s,
                other => return Err(CalendarError::Parse(format!("holiday `{other}` is not a date"))),
            };
            let date = NaiveDate::parse_from_str(&text, "%Y-%m-%d")
                .map_err(|_| CalendarError::Parse(format!("holiday `{text}` is not a date")))?;
            cal.holidays.insert(date);
        }
        if let Some(s) = file.sessions {
            if let Some(t) = s.asia {
                cal.day_start = parse_time_of_day(&t)?;
            }
            if let Some(t) = s.eu {
                cal.eu_start = parse_time_of_day(&t)?;
            }
            if let Some(t) = s.us {
                cal.us_start = parse_time_of_day(&t)?;
            }
            if let Some(t) = s.close {
                cal.close = parse_time_of_day(&t)?;
            }
        }
        cal.validate()?;
        Ok(cal)
    }

    /// Writes the calendar in the format read by [`Self::from_toml_str`].
    pub fn to_toml_string(&self) -> String {
        let hms = |s: i64| format!("{:02}:{:02}:{:02}", s / 3600, s % 3600 / 60, s % 60);
        let off = self.utc_offset_secs.abs();
        let sign = if self.utc_offset_secs < 0 { '-' } else { '+' };
        let holidays: Vec<String> = self.holidays.iter().map(|d| d.to_string()).collect();
        format!(
            "utc_offset = \"{sign}{:02}:{:02}\"\nexclude_weekends = {}\nexclude_year_end = {}\nholidays = [{}]\n\n[sessions]\nasia = \"{}\"\neu = \"{}\"\nus = \"{}\"\nclose = \"{}\"\n",
            off / 3600,
            off % 3600 / 60,
            self.exclude_weekends,
            self.exclude_year_end,
            holidays.join(", "),
            hms(self.day_start),
            hms(self.eu_start),
            hms(self.us_start),
            hms(self.close),
        )
    }

    pub fn with_holidays<I: IntoIterator<Item = NaiveDate>>(mut self, dates: I) -> Self {
        self.holidays.extend(dates);
        self
    }

    fn since_origin(&self, time_of_day: i64) -> i64 {
        (time_of_day - self.day_start).rem_euclid(SECS_PER_DAY)
    }

    /// Session boundaries as second offsets from the day origin:
    /// `[0, eu, us, close]`.
    pub fn boundaries(&self) -> [i64; 4] {
        let close = match self.since_origin(self.close) {
            0 => SECS_PER_DAY,
            c => c,
        };
        [
            0,
            self.since_origin(self.eu_start),
            self.since_origin(self.us_start),
            close,
        ]
    }

    fn validate(&self) -> Result<(), CalendarError> {
        let b = self.boundaries();
        if b.windows(2).all(|w| w[0] < w[1]) {
            Ok(())
        } else {
            Err(CalendarError::Boundaries(format!("{b:?}")))
        }
    }

    /// Length of each intraday session in seconds (Asia, EU, US).
    pub fn session_lengths(&self) -> [i64; 3] {
        let b = self.boundaries();
        [b[1] - b[0], b[2] - b[1], b[3] - b[2]]
    }

    /// Converts a UTC epoch in nanoseconds to the exchange-local clock.
    pub fn utc_to_local(&self, utc_nanos: i64) -> i64 {
        utc_nanos + self.utc_offset_secs as i64 * NANOS_PER_SEC
    }

    fn origin_split(&self, ts: i64) -> (i64, i64) {
        let shifted = ts - self.day_start * NANOS_PER_SEC;
        (shifted.div_euclid(NANOS_PER_DAY), shifted.rem_euclid(NANOS_PER_DAY))
    }

    /// Calendar date on which the trading day containing `ts` closes.
    pub fn trading_date(&self, ts: i64) -> NaiveDate {
        let (day, _) = self.origin_split(ts);
        // the day rolls over at the origin; it closes on the next date when
        // the origin is later in the clock day than the close
        let roll = i64::from(self.day_start > self.close);
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
        epoch + chrono::TimeDelta::days(day + roll)
    }

    /// Nanoseconds elapsed since the trading-day origin.
    pub fn offset_in_day(&self, ts: i64) -> i64 {
        self.origin_split(ts).1
    }

    /// Local timestamp of the origin of the trading day that closes on `date`.
    pub fn day_origin(&self, date: NaiveDate) -> i64 {
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
        let days = (date - epoch).num_days() - i64::from(self.day_start > self.close);
        days * NANOS_PER_DAY + self.day_start * NANOS_PER_SEC
    }

    pub fn is_excluded_date(&self, date: NaiveDate) -> bool {
        if self.exclude_weekends && matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            return true;
        }
        if self.exclude_year_end {
            let (m, d) = (date.month(), date.day());
            if (m == 12 && matches!(d, 24..=26 | 31)) || (m == 1 && matches!(d, 1 | 2)) {
                return true;
            }
        }
        self.holidays.contains(&date)
    }

    /// Session of a local timestamp, or `Excluded` for excluded dates and
    /// the daily maintenance gap.
    pub fn assign_session(&self, ts: i64) -> Result<Session, CalendarError> {
        if self.is_excluded_date(self.trading_date(ts)) {
            return Err(CalendarError::Excluded(ts));
        }
        let secs = self.offset_in_day(ts) / NANOS_PER_SEC;
        let b = self.boundaries();
        if secs < b[1] {
            Ok(Session::Asia)
        } else if secs < b[2] {
            Ok(Session::Eu)
        } else if secs < b[3] {
            Ok(Session::Us)
        } else {
            Err(CalendarError::Excluded(ts))
        }
    }
}
