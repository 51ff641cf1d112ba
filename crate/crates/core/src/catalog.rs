//! Catalog data model: marked spatio-temporal events, CSV ingestion,
//! window splitting and the planar study region.
//!
//! Coordinates are treated as planar throughout (longitude/latitude degrees
//! or projected km work equally, as long as one catalog is consistent); no
//! great-circle correction is applied. Times are decimal days relative to
//! the catalog origin.

use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};

use crate::error::{EtasError, Result};
use crate::linalg2::Vec2;
use crate::num::Scalar;

/// One earthquake: occurrence time in days, magnitude, planar location.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event<F = f64> {
    pub t: F,
    pub m: F,
    pub x: F,
    pub y: F,
}

impl<F: Scalar> Event<F> {
    pub fn new(t: F, m: F, x: F, y: F) -> Self {
        Event { t, m, x, y }
    }

    pub fn position(&self) -> Vec2<F> {
        Vec2::new(self.x, self.y)
    }
}

/// Axis-aligned planar study region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region<F = f64> {
    pub x_min: F,
    pub x_max: F,
    pub y_min: F,
    pub y_max: F,
}

impl<F: Scalar> Region<F> {
    pub fn new(x_min: F, x_max: F, y_min: F, y_max: F) -> Result<Self> {
        if !(x_min < x_max && y_min < y_max) {
            return Err(EtasError::InvalidParameter(format!(
                "region bounds must satisfy x_min < x_max and y_min < y_max, got \
                 [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        let r = Region {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        if !(r.area() > F::zero()) || !r.area().is_finite() {
            return Err(EtasError::InvalidParameter(
                "region must have positive finite area".to_string(),
            ));
        }
        Ok(r)
    }

    pub fn area(&self) -> F {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn contains(&self, x: F, y: F) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    /// Region scaled by `factor` about its centre.
    pub fn scaled(&self, factor: F) -> Region<F> {
        let two = F::of(2.0);
        let cx = (self.x_min + self.x_max) / two;
        let cy = (self.y_min + self.y_max) / two;
        let hx = (self.x_max - self.x_min) / two * factor;
        let hy = (self.y_max - self.y_min) / two * factor;
        Region {
            x_min: cx - hx,
            x_max: cx + hx,
            y_min: cy - hy,
            y_max: cy + hy,
        }
    }
}

/// A time-ordered earthquake catalog on the window `[0, t_end]`.
///
/// Construction sorts events by time and makes the ordering strict: the k-th
/// member of a run of duplicated timestamps is nudged forward by k * 1e-9
/// days (one microsecond-scale step) so that "happened before" comparisons
/// are unambiguous. Nudged times at the very end of the window may exceed
/// `t_end` by that same hair's breadth.
///
/// The catalog is immutable after construction and safe to share across
/// threads.
#[derive(Clone, Debug)]
pub struct Catalog<F = f64> {
    events: Vec<Event<F>>,
    t_end: F,
    m0: F,
    region: Region<F>,
}

/// Deterministic spacing inserted between duplicated timestamps, in days.
const TIME_JITTER_DAYS: f64 = 1e-9;

impl<F: Scalar> Catalog<F> {
    pub fn new(mut events: Vec<Event<F>>, t_end: F, m0: F, region: Region<F>) -> Result<Self> {
        if !(t_end > F::zero()) || !t_end.is_finite() {
            return Err(EtasError::InvalidParameter(format!(
                "observation window length must be positive and finite, got {t_end}"
            )));
        }
        for (i, ev) in events.iter().enumerate() {
            if !(ev.t.is_finite() && ev.m.is_finite() && ev.x.is_finite() && ev.y.is_finite()) {
                return Err(EtasError::InvalidParameter(format!(
                    "event {i} has a non-finite field"
                )));
            }
            if ev.t < F::zero() || ev.t > t_end {
                return Err(EtasError::InvalidParameter(format!(
                    "event {i} time {} outside the window [0, {t_end}]",
                    ev.t
                )));
            }
            if ev.m < m0 {
                return Err(EtasError::InvalidParameter(format!(
                    "event {i} magnitude {} below the completeness threshold {m0}",
                    ev.m
                )));
            }
        }
        events.sort_by(|a, b| a.t.partial_cmp(&b.t).expect("finite times"));
        strictify_times(&mut events);
        Ok(Catalog {
            events,
            t_end,
            m0,
            region,
        })
    }

    /// Internal constructor for event lists that are already sorted, strict
    /// and validated (e.g. slices of an existing catalog).
    pub(crate) fn from_sorted_unchecked(
        events: Vec<Event<F>>,
        t_end: F,
        m0: F,
        region: Region<F>,
    ) -> Self {
        debug_assert!(events.windows(2).all(|w| w[0].t < w[1].t));
        Catalog {
            events,
            t_end,
            m0,
            region,
        }
    }

    pub fn events(&self) -> &[Event<F>] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn t_end(&self) -> F {
        self.t_end
    }

    pub fn m0(&self) -> F {
        self.m0
    }

    pub fn region(&self) -> Region<F> {
        self.region
    }

    pub fn positions(&self) -> Vec<Vec2<F>> {
        self.events.iter().map(Event::position).collect()
    }

    /// Splits the catalog at `t_split` into a training window `[0, t_split)`
    /// and a test window `[t_split, t_end)`.
    ///
    /// Test-window times keep the original origin (they are not shifted), so
    /// triggering from training events into the test window stays directly
    /// computable. The training catalog's window length becomes `t_split`;
    /// the test catalog keeps `t_end`.
    pub fn split(&self, t_split: F) -> Result<(Catalog<F>, Catalog<F>)> {
        if !(t_split > F::zero() && t_split < self.t_end) {
            return Err(EtasError::InvalidWindow(format!(
                "split time {t_split} must lie strictly inside (0, {})",
                self.t_end
            )));
        }
        let cut = self.events.partition_point(|ev| ev.t < t_split);
        let train = Catalog::from_sorted_unchecked(
            self.events[..cut].to_vec(),
            t_split,
            self.m0,
            self.region,
        );
        let test = Catalog::from_sorted_unchecked(
            self.events[cut..].to_vec(),
            self.t_end,
            self.m0,
            self.region,
        );
        Ok((train, test))
    }

    /// Writes the catalog in the `time,magnitude,x,y` CSV schema with times
    /// as decimal days. Values survive a write/read cycle bit-exactly.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path_str = path.as_ref().display().to_string();
        let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| io_err(&path_str, e))?;
        w.write_record(["time", "magnitude", "x", "y"])
            .map_err(|e| io_err(&path_str, e))?;
        for ev in &self.events {
            w.write_record([
                format!("{}", ev.t),
                format!("{}", ev.m),
                format!("{}", ev.x),
                format!("{}", ev.y),
            ])
            .map_err(|e| io_err(&path_str, e))?;
        }
        w.flush().map_err(|e| EtasError::Io {
            path: path_str,
            source: e,
        })?;
        Ok(())
    }
}

fn strictify_times<F: Scalar>(events: &mut [Event<F>]) {
    let jitter = F::of(TIME_JITTER_DAYS);
    for i in 1..events.len() {
        let prev = events[i - 1].t;
        if events[i].t <= prev {
            let mut bumped = prev + jitter;
            if bumped <= prev {
                // The jitter underflowed at this magnitude; take one ulp.
                bumped = if prev > F::zero() {
                    prev * (F::one() + F::epsilon())
                } else {
                    F::min_positive_value()
                };
            }
            events[i].t = bumped;
        }
    }
}

fn io_err(path: &str, e: csv::Error) -> EtasError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => EtasError::Io {
            path: path.to_string(),
            source: io,
        },
        other => EtasError::MalformedRow {
            path: path.to_string(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Loads a catalog from a `time,magnitude,x,y` CSV file (header required).
///
/// Times may be decimal days (taken as days since the origin directly) or
/// ISO-8601 dates/datetimes, which requires `origin` to be given. Rows with
/// magnitude below `m0`, location outside `region`, or time outside the
/// observation window are dropped. `t_end` fixes the window length in days;
/// when omitted it is taken as the time of the last surviving event.
pub fn load_catalog<F: Scalar, P: AsRef<Path>>(
    path: P,
    m0: F,
    region: Region<F>,
    origin: Option<NaiveDateTime>,
    t_end: Option<F>,
) -> Result<Catalog<F>> {
    let path_str = path.as_ref().display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path.as_ref())
        .map_err(|e| io_err(&path_str, e))?;

    {
        let headers = reader.headers().map_err(|e| io_err(&path_str, e))?;
        let expect = ["time", "magnitude", "x", "y"];
        let got: Vec<&str> = headers.iter().collect();
        if got != expect {
            return Err(EtasError::MalformedRow {
                path: path_str,
                line: 1,
                message: format!("expected header `time,magnitude,x,y`, found `{}`", got.join(",")),
            });
        }
    }

    let mut events = Vec::new();
    let mut max_t = F::zero();
    for rec in reader.records() {
        let rec = rec.map_err(|e| io_err(&path_str, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row_err = |message: String| EtasError::MalformedRow {
            path: path_str.clone(),
            line,
            message,
        };
        if rec.len() != 4 {
            return Err(row_err(format!("expected 4 fields, found {}", rec.len())));
        }
        let t: F = parse_time(&rec[0], origin).map_err(&row_err)?;
        let m: F = parse_number(&rec[1]).map_err(|e| row_err(format!("magnitude: {e}")))?;
        let x: F = parse_number(&rec[2]).map_err(|e| row_err(format!("x: {e}")))?;
        let y: F = parse_number(&rec[3]).map_err(|e| row_err(format!("y: {e}")))?;

        if m < m0 || !region.contains(x, y) || t < F::zero() {
            continue;
        }
        if let Some(horizon) = t_end {
            if t > horizon {
                continue;
            }
        }
        max_t = max_t.max(t);
        events.push(Event::new(t, m, x, y));
    }

    if events.is_empty() {
        return Err(EtasError::EmptyCatalog);
    }
    let horizon = t_end.unwrap_or(max_t);
    Catalog::new(events, horizon, m0, region)
}

fn parse_number<F: Scalar>(s: &str) -> std::result::Result<F, String> {
    s.parse::<f64>()
        .map(F::of)
        .map_err(|_| format!("`{s}` is not a number"))
}

fn parse_time<F: Scalar>(
    s: &str,
    origin: Option<NaiveDateTime>,
) -> std::result::Result<F, String> {
    if let Ok(days) = s.parse::<f64>() {
        return Ok(F::of(days));
    }
    let dt = parse_datetime(s).ok_or_else(|| {
        format!("time `{s}` is neither decimal days nor an ISO-8601 date/datetime")
    })?;
    let origin =
        origin.ok_or_else(|| format!("time `{s}` is a date but no origin was supplied"))?;
    let millis = (dt - origin).num_milliseconds();
    Ok(F::of(millis as f64 / 86_400_000.0))
}

/// Parses an ISO-8601 date or datetime (`YYYY-MM-DD`, `YYYY-MM-DDTHH:MM:SS`,
/// optionally with fractional seconds or a trailing `Z`).
pub fn parse_datetime(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim().trim_end_matches('Z');
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt);
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight is valid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn region() -> Region {
        Region::new(0.0, 4.0, 0.0, 6.0).unwrap()
    }

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn magnitude_filter_drops_rows() {
        let f = write_temp("time,magnitude,x,y\n1.0,3.0,1.0,1.0\n2.0,1.9,1.0,1.0\n3.0,2.6,2.0,2.0\n");
        let cat: Catalog = load_catalog(f.path(), 2.5, region(), None, Some(10.0)).unwrap();
        assert_eq!(cat.len(), 2);
        assert!(cat.events().iter().all(|e| e.m >= 2.5));
    }

    #[test]
    fn out_of_order_rows_are_sorted() {
        let f = write_temp("time,magnitude,x,y\n5.0,3.0,1.0,1.0\n1.0,3.2,1.0,1.0\n3.0,3.1,2.0,2.0\n");
        let cat: Catalog = load_catalog(f.path(), 2.5, region(), None, Some(10.0)).unwrap();
        let times: Vec<f64> = cat.events().iter().map(|e| e.t).collect();
        assert_eq!(times, vec![1.0, 3.0, 5.0]);
    }

    #[test]
    fn iso_dates_convert_to_days() {
        let f = write_temp(
            "time,magnitude,x,y\n2000-01-01,3.0,1.0,1.0\n2000-01-03T12:00:00,3.0,1.0,1.0\n",
        );
        let origin = parse_datetime("2000-01-01").unwrap();
        let cat: Catalog = load_catalog(f.path(), 2.5, region(), Some(origin), Some(10.0)).unwrap();
        assert_eq!(cat.len(), 2);
        assert!((cat.events()[0].t - 0.0).abs() < 1e-9);
        assert!((cat.events()[1].t - 2.5).abs() < 1e-9);
    }

    #[test]
    fn iso_without_origin_is_an_error_with_line() {
        let f = write_temp("time,magnitude,x,y\n2000-01-01,3.0,1.0,1.0\n");
        let err = load_catalog::<f64, _>(f.path(), 2.5, region(), None, Some(10.0)).unwrap_err();
        match err {
            EtasError::MalformedRow { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_line_number() {
        let f = write_temp("time,magnitude,x,y\n1.0,3.0,1.0,1.0\n2.0,not_a_number,1.0,1.0\n");
        let err = load_catalog::<f64, _>(f.path(), 2.5, region(), None, Some(10.0)).unwrap_err();
        match err {
            EtasError::MalformedRow { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_after_filtering_is_an_error() {
        let f = write_temp("time,magnitude,x,y\n1.0,1.0,1.0,1.0\n");
        let err = load_catalog::<f64, _>(f.path(), 2.5, region(), None, Some(10.0)).unwrap_err();
        assert!(matches!(err, EtasError::EmptyCatalog));
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let f = write_temp(
            "time,magnitude,x,y\n0.12345678901234567,3.00000000001,1.9999999999999998,5.1\n2.5,2.6,0.1,0.2\n",
        );
        let cat: Catalog = load_catalog(f.path(), 2.5, region(), None, Some(10.0)).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        cat.write_csv(out.path()).unwrap();
        let back: Catalog = load_catalog(out.path(), 2.5, region(), None, Some(10.0)).unwrap();
        assert_eq!(cat.len(), back.len());
        for (a, b) in cat.events().iter().zip(back.events()) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            assert_eq!(a.m.to_bits(), b.m.to_bits());
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
        }
    }

    #[test]
    fn duplicate_times_get_deterministic_spacing() {
        let events = vec![
            Event::new(1.0, 3.0, 1.0, 1.0),
            Event::new(1.0, 3.1, 1.1, 1.0),
            Event::new(1.0, 3.2, 1.2, 1.0),
        ];
        let cat = Catalog::new(events, 10.0, 2.5, region()).unwrap();
        let t: Vec<f64> = cat.events().iter().map(|e| e.t).collect();
        assert!(t[0] < t[1] && t[1] < t[2]);
        assert!((t[1] - 1.0 - 1e-9).abs() < 1e-15);
        assert!((t[2] - 1.0 - 2e-9).abs() < 1e-15);
        // Ties keep input order.
        assert!((cat.events()[0].m - 3.0).abs() < 1e-12);
        assert!((cat.events()[2].m - 3.2).abs() < 1e-12);
    }

    #[test]
    fn split_partitions_events() {
        let events: Vec<Event> = (1..=9)
            .map(|i| Event::new(i as f64 * 30.0, 3.0, 1.0, 1.0))
            .collect();
        let cat = Catalog::new(events, 350.0, 2.5, region()).unwrap();
        let (train, test) = cat.split(300.0).unwrap();
        assert_eq!(train.len() + test.len(), cat.len());
        assert_eq!(train.t_end(), 300.0);
        assert_eq!(test.t_end(), 350.0);
        assert!(train.events().iter().all(|e| e.t < 300.0));
        assert!(test.events().iter().all(|e| e.t >= 300.0));
    }

    #[test]
    fn split_beyond_last_event_gives_empty_test() {
        let events = vec![Event::new(1.0, 3.0, 1.0, 1.0)];
        let cat = Catalog::new(events, 10.0, 2.5, region()).unwrap();
        let (train, test) = cat.split(9.5).unwrap();
        assert_eq!(train.len(), 1);
        assert!(test.is_empty());
    }

    #[test]
    fn split_at_zero_is_an_error() {
        let events = vec![Event::new(1.0, 3.0, 1.0, 1.0)];
        let cat = Catalog::new(events, 10.0, 2.5, region()).unwrap();
        assert!(cat.split(0.0).is_err());
        assert!(cat.split(10.0).is_err());
        assert!(cat.split(-1.0).is_err());
    }

    #[test]
    fn region_validation() {
        assert!(Region::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(Region::new(2.0, 1.0, 0.0, 1.0).is_err());
        assert!(Region::new(0.0, 1.0, 0.0, 1.0).is_ok());
    }
}
