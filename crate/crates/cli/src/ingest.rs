//! CSV ingestion of timed observations.
//!
//! Input has a header row `time,value`, or just `time` for event data. Times
//! are plain numbers, passed through untouched, or ISO-8601 timestamps,
//! converted to the configured unit relative to the configured epoch or, by
//! default, to the first timestamp in the stream.

use std::io::Read;

use chrono::{DateTime, NaiveDateTime};
use pomp::TimedObservation;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TimeSpec {
    /// Seconds per unit of model time.
    pub unit_seconds: f64,
    pub epoch: Option<NaiveDateTime>,
}

impl TimeSpec {
    pub fn seconds() -> Self {
        TimeSpec {
            unit_seconds: 1.0,
            epoch: None,
        }
    }
}

/// Parses `2016-07-01 00:00:41`, `2016-07-01T00:00:41.5` or an RFC 3339
/// timestamp with offset (converted to UTC).
pub fn parse_datetime(s: &str) -> Option<NaiveDateTime> {
    for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t);
        }
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.naive_utc());
    }
    chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
}

/// Streaming reader of observations, checking that times never decrease.
pub struct Observations<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    spec: TimeSpec,
    reference: Option<NaiveDateTime>,
    previous: Option<f64>,
    events: bool,
    value_col: Option<usize>,
}

fn data_err(line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("line {line}: {msg}"))
}

impl<R: Read> Observations<R> {
    /// `events` reads event times only; otherwise a `value` column is
    /// required.
    pub fn new(reader: R, spec: TimeSpec, events: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(reader);
        let header = rdr.headers().map_err(|e| data_err(1, e))?.clone();
        if header.get(0) != Some("time") {
            return Err(data_err(1, format!("expected a header starting with `time`, got {:?}", header.as_slice())));
        }
        let value_col = header.iter().position(|h| h == "value");
        if !events && value_col.is_none() {
            return Err(data_err(1, "expected a `value` column"));
        }
        Ok(Observations {
            records: rdr.into_records(),
            spec,
            reference: spec.epoch,
            previous: None,
            events,
            value_col,
        })
    }

    fn parse_time(&mut self, s: &str, line: u64) -> Result<f64> {
        if let Ok(v) = s.parse::<f64>() {
            if !v.is_finite() {
                return Err(data_err(line, format!("time is not finite: {s}")));
            }
            return Ok(v);
        }
        let t = parse_datetime(s).ok_or_else(|| data_err(line, format!("cannot parse time {s:?}")))?;
        let reference = *self.reference.get_or_insert(t);
        let d = t - reference;
        let secs = d.num_seconds() as f64 + d.subsec_nanos() as f64 * 1e-9;
        Ok(secs / self.spec.unit_seconds)
    }
}

impl<R: Read> Iterator for Observations<R> {
    type Item = Result<TimedObservation>;

    fn next(&mut self) -> Option<Self::Item> {
        let rec = match self.records.next()? {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Some(Err(data_err(line, e)));
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        Some((|| {
            let time = self.parse_time(rec.get(0).unwrap_or(""), line)?;
            if let Some(p) = self.previous {
                if time < p {
                    return Err(data_err(line, format!("time {time} precedes {p}")));
                }
            }
            self.previous = Some(time);
            let value = if self.events {
                time
            } else {
                let col = self.value_col.expect("checked in new");
                let s = rec.get(col).unwrap_or("");
                s.parse::<f64>().map_err(|_| data_err(line, format!("cannot parse value {s:?}")))?
            };
            Ok(TimedObservation::new(time, value))
        })())
    }
}

/// Reads every observation into memory.
pub fn read_all<R: Read>(reader: R, spec: TimeSpec, events: bool) -> Result<Vec<TimedObservation>> {
    Observations::new(reader, spec, events)?.collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, spec: TimeSpec, events: bool) -> Result<Vec<TimedObservation>> {
        read_all(text.as_bytes(), spec, events)
    }

    #[test]
    fn iso_timestamps_become_offsets() {
        let d = read("time,value\n2016-07-01 00:00:41,10.9\n2016-07-01 00:01:40,10.9\n", TimeSpec::seconds(), false).unwrap();
        assert_eq!(d[0].time, 0.0);
        assert_eq!(d[1].time - d[0].time, 59.0);
        assert_eq!(d[1].value, 10.9);
    }

    #[test]
    fn units_and_epoch() {
        let spec = TimeSpec {
            unit_seconds: 3600.0,
            epoch: parse_datetime("2016-07-01T00:00:00"),
        };
        let d = read("time,value\n2016-07-01T01:30:00,3\n", spec, false).unwrap();
        assert_eq!(d[0].time, 1.5);
        let d = read("time,value\n2016-07-01T01:30:00+01:00,3\n", spec, false).unwrap();
        assert_eq!(d[0].time, 0.5);
    }

    #[test]
    fn numeric_times_pass_through() {
        let spec = TimeSpec {
            unit_seconds: 3600.0,
            epoch: None,
        };
        let d = read("time,value\n0.25,1\n7.5,2\n", spec, false).unwrap();
        assert_eq!((d[0].time, d[1].time), (0.25, 7.5));
    }

    #[test]
    fn out_of_order_row_names_its_line() {
        let e = read("time,value\n1,0\n3,0\n2,0\n", TimeSpec::seconds(), false).unwrap_err();
        assert!(matches!(&e, CliError::Data(m) if m.starts_with("line 4")), "{e}");
    }

    #[test]
    fn malformed_input() {
        assert!(read("t,value\n1,0\n", TimeSpec::seconds(), false).is_err());
        assert!(read("time\n1\n", TimeSpec::seconds(), false).is_err());
        let e = read("time,value\n1,x\n", TimeSpec::seconds(), false).unwrap_err();
        assert!(e.to_string().contains("line 2"));
        let d = read("time\n0.5\n1.25\n", TimeSpec::seconds(), true).unwrap();
        assert_eq!(d[1], TimedObservation::event(1.25));
    }
}
