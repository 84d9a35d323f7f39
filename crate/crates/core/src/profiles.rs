//! Irradiance, temperature and load time series.
//!
//! CSV layout: a `time_s,<quantity>` header, comma separated, dot decimal,
//! one sample per row, timestamps strictly increasing.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    /// W/m², must be non-negative.
    Irradiance,
    /// °C.
    Temperature,
    /// W, must be non-negative.
    Load,
}

impl Quantity {
    /// CSV column name.
    pub fn column(self) -> &'static str {
        match self {
            Quantity::Irradiance => "irradiance_w_m2",
            Quantity::Temperature => "temperature_c",
            Quantity::Load => "load_w",
        }
    }

    /// Load switches discretely; the weather varies smoothly.
    pub fn default_interpolation(self) -> Interpolation {
        match self {
            Quantity::Load => Interpolation::StepHold,
            _ => Interpolation::Linear,
        }
    }

    fn must_be_non_negative(self) -> bool {
        !matches!(self, Quantity::Temperature)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    StepHold,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Error,
    HoldEnds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesProfile {
    quantity: Quantity,
    times: Vec<f64>,
    values: Vec<f64>,
    pub interpolation: Interpolation,
    pub boundary: Boundary,
}

impl TimeSeriesProfile {
    /// Validated profile; rows in errors are 1-based data rows.
    pub fn new(quantity: Quantity, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Domain(format!(
                "{} timestamps but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::Domain("profile needs at least one sample".into()));
        }
        for (idx, (&t, &v)) in times.iter().zip(&values).enumerate() {
            let row = idx + 1;
            if !t.is_finite() || !v.is_finite() {
                return Err(Error::BadRow {
                    row,
                    message: "non-finite value".into(),
                });
            }
            if idx > 0 && t <= times[idx - 1] {
                return Err(Error::NonMonotonic { row });
            }
            if quantity.must_be_non_negative() && v < 0.0 {
                return Err(Error::BadRow {
                    row,
                    message: format!("domain error: negative {} {v}", quantity.column()),
                });
            }
        }
        Ok(Self {
            quantity,
            times,
            values,
            interpolation: quantity.default_interpolation(),
            boundary: Boundary::Error,
        })
    }

    pub fn constant(quantity: Quantity, value: f64, t_end: f64) -> Result<Self> {
        let mut p = Self::new(quantity, vec![0.0, t_end], vec![value, value])?;
        p.boundary = Boundary::HoldEnds;
        Ok(p)
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn quantity(&self) -> Quantity {
        self.quantity
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn first_time(&self) -> f64 {
        self.times[0]
    }

    pub fn last_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Value at time `t`: exact at knots, interpolated between them.
    pub fn sample(&self, t: f64) -> Result<f64> {
        let (first, last) = (self.first_time(), self.last_time());
        if !(t >= first && t <= last) {
            return match self.boundary {
                Boundary::HoldEnds if t < first => Ok(self.values[0]),
                Boundary::HoldEnds if t > last => Ok(self.values[self.values.len() - 1]),
                _ => Err(Error::OutOfRange { t, first, last }),
            };
        }
        // Index of the last knot at or before t.
        let idx = self.times.partition_point(|&k| k <= t) - 1;
        if self.times[idx] == t || idx + 1 == self.times.len() {
            return Ok(self.values[idx]);
        }
        match self.interpolation {
            Interpolation::StepHold => Ok(self.values[idx]),
            Interpolation::Linear => {
                let (t0, t1) = (self.times[idx], self.times[idx + 1]);
                let (v0, v1) = (self.values[idx], self.values[idx + 1]);
                Ok(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
            }
        }
    }

    /// Parse from a CSV reader whose header must be `time_s,<quantity column>`.
    pub fn read_csv<R: Read>(reader: R, quantity: Quantity) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
        let time_col = headers
            .iter()
            .position(|h| h.trim() == "time_s")
            .ok_or_else(|| Error::MissingColumn("time_s".into()))?;
        let value_col = headers
            .iter()
            .position(|h| h.trim() == quantity.column())
            .ok_or_else(|| Error::MissingColumn(quantity.column().into()))?;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (idx, record) in rdr.records().enumerate() {
            let row = idx + 1;
            let record = record.map_err(|e| Error::BadRow {
                row,
                message: e.to_string(),
            })?;
            let field = |col: usize| -> Result<f64> {
                let raw = record.get(col).ok_or_else(|| Error::BadRow {
                    row,
                    message: "missing field".into(),
                })?;
                let value: f64 = raw.trim().parse().map_err(|_| Error::BadRow {
                    row,
                    message: format!("cannot parse `{raw}` as a number"),
                })?;
                if value.is_nan() {
                    return Err(Error::BadRow {
                        row,
                        message: "NaN value".into(),
                    });
                }
                Ok(value)
            };
            times.push(field(time_col)?);
            values.push(field(value_col)?);
        }
        Self::new(quantity, times, values)
    }

    pub fn load_csv(path: impl AsRef<Path>, quantity: Quantity) -> Result<Self> {
        let path = path.as_ref();
        let file =
            std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::read_csv(std::io::BufReader::new(file), quantity)
    }

    /// Write in the same layout [`read_csv`](Self::read_csv) accepts; values
    /// use the shortest representation that round-trips exactly.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time_s,{}", self.quantity.column())?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(out, "{t},{v}")?;
        }
        Ok(())
    }
}

/// A constant load between `start_s` (inclusive) and `end_s` (exclusive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadBlock {
    pub start_s: f64,
    pub end_s: f64,
    pub watts: f64,
}

impl LoadBlock {
    pub fn new(start_s: f64, end_s: f64, watts: f64) -> Self {
        Self {
            start_s,
            end_s,
            watts,
        }
    }
}

/// Generator for an illustrative clear-sky day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticDay {
    /// Irradiance at solar noon [W/m²].
    pub g_peak: f64,
    pub t_min_c: f64,
    pub t_max_c: f64,
    pub sunrise_s: f64,
    pub sunset_s: f64,
    /// Delay of the temperature curve behind the irradiance curve [s].
    pub temperature_lag_s: f64,
    /// Knot spacing of the generated weather profiles [s].
    pub resolution_s: f64,
    pub day_length_s: f64,
    pub load_blocks: Vec<LoadBlock>,
}

impl Default for SyntheticDay {
    fn default() -> Self {
        let h = 3600.0;
        Self {
            g_peak: 1000.0,
            t_min_c: 15.0,
            t_max_c: 35.0,
            sunrise_s: 6.0 * h,
            sunset_s: 18.0 * h,
            temperature_lag_s: 2.0 * h,
            resolution_s: 60.0,
            day_length_s: 24.0 * h,
            load_blocks: default_load_blocks(),
        }
    }
}

/// Household-like day with morning and evening peaks.
pub fn default_load_blocks() -> Vec<LoadBlock> {
    let h = 3600.0;
    vec![
        LoadBlock::new(0.0, 6.0 * h, 80.0),
        LoadBlock::new(6.0 * h, 9.0 * h, 300.0),
        LoadBlock::new(9.0 * h, 12.0 * h, 150.0),
        LoadBlock::new(12.0 * h, 14.0 * h, 250.0),
        LoadBlock::new(14.0 * h, 18.0 * h, 150.0),
        LoadBlock::new(18.0 * h, 22.0 * h, 450.0),
        LoadBlock::new(22.0 * h, 24.0 * h, 100.0),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayProfiles {
    pub irradiance: TimeSeriesProfile,
    pub temperature: TimeSeriesProfile,
    pub load: TimeSeriesProfile,
}

impl SyntheticDay {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let key = |k: &str| format!("{prefix}{k}");
        if !(self.g_peak >= 0.0 && self.g_peak.is_finite()) {
            return Err(Error::config(key("g_peak"), "must be >= 0"));
        }
        if !(self.t_min_c <= self.t_max_c) {
            return Err(Error::config(key("t_min_c"), "must be <= t_max_c"));
        }
        if !(self.day_length_s > 0.0) {
            return Err(Error::config(key("day_length_s"), "must be > 0"));
        }
        if !(0.0 <= self.sunrise_s
            && self.sunrise_s < self.sunset_s
            && self.sunset_s <= self.day_length_s)
        {
            return Err(Error::config(
                key("sunrise_s"),
                "need 0 <= sunrise_s < sunset_s <= day_length_s",
            ));
        }
        if !(self.resolution_s > 0.0) {
            return Err(Error::config(key("resolution_s"), "must be > 0"));
        }
        let mut blocks = self.load_blocks.clone();
        for (idx, b) in blocks.iter().enumerate() {
            if !(b.start_s < b.end_s && b.watts >= 0.0) {
                return Err(Error::config(
                    format!("{prefix}load_blocks[{idx}]"),
                    "need start_s < end_s and watts >= 0",
                ));
            }
        }
        blocks.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        if blocks.windows(2).any(|w| w[1].start_s < w[0].end_s) {
            return Err(Error::config(key("load_blocks"), "load blocks overlap"));
        }
        Ok(())
    }

    /// Half-sine shape in [0, 1] between sunrise and sunset.
    fn daylight_shape(&self, t: f64) -> f64 {
        if t <= self.sunrise_s || t >= self.sunset_s {
            return 0.0;
        }
        (std::f64::consts::PI * (t - self.sunrise_s) / (self.sunset_s - self.sunrise_s)).sin()
    }

    fn irradiance_at(&self, t: f64) -> f64 {
        self.g_peak * self.daylight_shape(t)
    }

    fn temperature_at(&self, t: f64) -> f64 {
        let normalized = if self.g_peak > 0.0 {
            self.daylight_shape(t - self.temperature_lag_s)
        } else {
            0.0
        };
        self.t_min_c + (self.t_max_c - self.t_min_c) * normalized
    }

    fn load_at(&self, t: f64) -> f64 {
        self.load_blocks
            .iter()
            .filter(|b| b.start_s <= t && t < b.end_s)
            .map(|b| b.watts)
            .sum()
    }

    fn knots(&self) -> Vec<f64> {
        let mut knots: Vec<f64> = (0..)
            .map(|k| k as f64 * self.resolution_s)
            .take_while(|&t| t < self.day_length_s)
            .collect();
        knots.extend([
            self.sunrise_s,
            self.sunset_s,
            0.5 * (self.sunrise_s + self.sunset_s),
        ]);
        knots.push(self.day_length_s);
        sorted_unique(knots)
    }

    pub fn generate(&self) -> Result<DayProfiles> {
        self.validate("profiles.synthetic.")?;
        let knots = self.knots();
        let irradiance = knots.iter().map(|&t| self.irradiance_at(t)).collect();
        let temperature = knots.iter().map(|&t| self.temperature_at(t)).collect();

        let mut load_knots = vec![0.0, self.day_length_s];
        for b in &self.load_blocks {
            load_knots.extend([b.start_s, b.end_s]);
        }
        let load_knots: Vec<f64> = sorted_unique(load_knots)
            .into_iter()
            .filter(|&t| (0.0..=self.day_length_s).contains(&t))
            .collect();
        let load = load_knots.iter().map(|&t| self.load_at(t)).collect();

        Ok(DayProfiles {
            irradiance: TimeSeriesProfile::new(Quantity::Irradiance, knots.clone(), irradiance)?
                .with_boundary(Boundary::HoldEnds),
            temperature: TimeSeriesProfile::new(Quantity::Temperature, knots, temperature)?
                .with_boundary(Boundary::HoldEnds),
            load: TimeSeriesProfile::new(Quantity::Load, load_knots, load)?
                .with_boundary(Boundary::HoldEnds),
        })
    }
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Default-shaped day with the given peak irradiance, temperature range and
/// load blocks.
pub fn synthetic_day(
    g_peak: f64,
    t_min_c: f64,
    t_max_c: f64,
    load_blocks: Vec<LoadBlock>,
) -> Result<DayProfiles> {
    SyntheticDay {
        g_peak,
        t_min_c,
        t_max_c,
        load_blocks,
        ..SyntheticDay::default()
    }
    .generate()
}
