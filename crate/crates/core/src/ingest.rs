//! Loading, validation, and synthesis of weekly inflow series.
//!
//! Inflow is an average power over the week (MW). Years are normalized to
//! exactly 52 weeks; a raw 53rd week is averaged into week 52. The day clock
//! advances 7 days per week, so a year covers 364 days against the seasonal
//! period of 365.25 — the ~1.25-day annual slip is accepted and documented;
//! the basis frequency is configurable if exact 364-day periodicity is wanted.

use std::io::Read;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::WEEKS_PER_YEAR;

/// One validated weekly observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InflowRecord {
    pub year: i32,
    /// 1..=52.
    pub week_of_year: u32,
    /// Days since series start: 7·(global week index − 1).
    pub t_days: f64,
    /// Average MW over the week; ≥ 0.
    pub inflow_mw: f64,
}

/// Ordered weekly inflow series with 52-week years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflowSeries {
    pub records: Vec<InflowRecord>,
    /// True when the last year has fewer than 52 weeks.
    pub partial_final_year: bool,
}

impl InflowSeries {
    /// Validates ordering, ranges, and the t_days convention, then assigns
    /// t_days from scratch.
    pub fn from_observations(obs: Vec<(i32, u32, f64)>) -> Result<Self> {
        if obs.is_empty() {
            return Err(Error::Validation("inflow series is empty".into()));
        }
        let mut records = Vec::with_capacity(obs.len());
        let mut prev: Option<(i32, u32)> = None;
        for (idx, &(year, week, inflow)) in obs.iter().enumerate() {
            if !(1..=WEEKS_PER_YEAR as u32).contains(&week) {
                return Err(Error::MalformedRow {
                    line: idx + 2,
                    reason: format!("week out of range: {week} (must be 1..52)"),
                });
            }
            if !inflow.is_finite() || inflow < 0.0 {
                return Err(Error::MalformedRow {
                    line: idx + 2,
                    reason: format!("inflow must be finite and nonnegative, got {inflow}"),
                });
            }
            if let Some(p) = prev {
                if (year, week) <= p {
                    return Err(Error::MalformedRow {
                        line: idx + 2,
                        reason: format!(
                            "records must be strictly ordered by (year, week); {:?} follows {:?}",
                            (year, week),
                            p
                        ),
                    });
                }
            }
            prev = Some((year, week));
            records.push(InflowRecord {
                year,
                week_of_year: week,
                t_days: 7.0 * idx as f64,
                inflow_mw: inflow,
            });
        }
        // week indices must run in complete 1..52 cycles except a final partial year
        let mut expected_week = records[0].week_of_year;
        for (idx, r) in records.iter().enumerate() {
            if r.week_of_year != expected_week {
                return Err(Error::MalformedRow {
                    line: idx + 2,
                    reason: format!(
                        "gap in weekly record: expected week {expected_week}, found {}",
                        r.week_of_year
                    ),
                });
            }
            expected_week = expected_week % WEEKS_PER_YEAR as u32 + 1;
        }
        let partial_final_year = records.last().unwrap().week_of_year != WEEKS_PER_YEAR as u32;
        if partial_final_year {
            log::warn!(
                "final year {} is partial (ends at week {})",
                records.last().unwrap().year,
                records.last().unwrap().week_of_year
            );
        }
        Ok(InflowSeries {
            records,
            partial_final_year,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Writes the canonical `year,week,inflow` CSV.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        let mut out = String::from("year,week,inflow\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{}\n", r.year, r.week_of_year, r.inflow_mw));
        }
        w.write_all(out.as_bytes())
            .map_err(|e| Error::Io { path: "<writer>".into(), source: e })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(&mut f)
    }
}

/// Unit of the inflow column in a source CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InflowUnits {
    /// Already average MW.
    Mw,
    /// GWh per week; converted by ×1000/168.
    GwhPerWeek,
    /// Volumetric flow with a user-supplied MW-per-unit factor.
    Cumecs { mw_per_cumec: f64 },
}

impl InflowUnits {
    pub fn to_mw_factor(self) -> f64 {
        match self {
            InflowUnits::Mw => 1.0,
            InflowUnits::GwhPerWeek => 1000.0 / crate::HOURS_PER_WEEK,
            InflowUnits::Cumecs { mw_per_cumec } => mw_per_cumec,
        }
    }

    /// Parses the CLI syntax `mw`, `gwh-per-week`, or `cumecs:<factor>`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mw" => Ok(InflowUnits::Mw),
            "gwh-per-week" => Ok(InflowUnits::GwhPerWeek),
            other => {
                if let Some(f) = other.strip_prefix("cumecs:") {
                    let factor: f64 = f
                        .parse()
                        .map_err(|_| Error::Validation(format!("bad cumecs factor: {f}")))?;
                    if !(factor.is_finite() && factor > 0.0) {
                        return Err(Error::Validation(format!("cumecs factor must be positive, got {f}")));
                    }
                    Ok(InflowUnits::Cumecs { mw_per_cumec: factor })
                } else {
                    Err(Error::Validation(format!(
                        "unknown inflow units '{other}' (expected mw, gwh-per-week, or cumecs:<factor>)"
                    )))
                }
            }
        }
    }
}

/// Loads a `year,week,inflow` CSV, multiplying inflow by the unit factor.
pub fn load_inflow_csv(path: &Path, units: InflowUnits) -> Result<InflowSeries> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    file.read_to_string(&mut text).map_err(|e| Error::io(path, e))?;
    parse_inflow_csv(&text, units)
}

pub fn parse_inflow_csv(text: &str, units: InflowUnits) -> Result<InflowSeries> {
    let factor = units.to_mw_factor();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    {
        let headers = rdr
            .headers()
            .map_err(|e| Error::MalformedRow { line: 1, reason: e.to_string() })?;
        let expect = ["year", "week", "inflow"];
        if headers.len() != 3 || !headers.iter().zip(expect).all(|(h, e)| h.eq_ignore_ascii_case(e)) {
            return Err(Error::MalformedRow {
                line: 1,
                reason: format!("header must be 'year,week,inflow', got '{}'", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
    }
    let mut obs = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::MalformedRow { line, reason: e.to_string() })?;
        if row.len() != 3 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected 3 fields, got {}", row.len()),
            });
        }
        let year: i32 = row[0]
            .parse()
            .map_err(|_| Error::MalformedRow { line, reason: format!("bad year '{}'", &row[0]) })?;
        let week: u32 = row[1]
            .parse()
            .map_err(|_| Error::MalformedRow { line, reason: format!("bad week '{}'", &row[1]) })?;
        let inflow: f64 = row[2]
            .parse()
            .map_err(|_| Error::MalformedRow { line, reason: format!("bad inflow '{}'", &row[2]) })?;
        obs.push((year, week, inflow * factor));
    }
    InflowSeries::from_observations(obs)
}

/// A raw dated observation before calendar normalization; `week` may be 53.
#[derive(Debug, Clone, Copy)]
pub struct RawWeek {
    pub year: i32,
    pub week: u32,
    pub inflow_mw: f64,
}

/// Normalizes calendar years to exactly 52 weeks: a 53rd week is averaged
/// into week 52. Years with fewer than 52 raw weeks are an error, except a
/// trailing partial year which passes through (and is flagged downstream).
pub fn truncate_year53(raw: &[RawWeek]) -> Result<InflowSeries> {
    if raw.is_empty() {
        return Err(Error::Validation("no raw records".into()));
    }
    let mut obs: Vec<(i32, u32, f64)> = Vec::new();
    let mut i = 0;
    let last_year = raw.last().unwrap().year;
    while i < raw.len() {
        let year = raw[i].year;
        let mut weeks: Vec<RawWeek> = Vec::new();
        while i < raw.len() && raw[i].year == year {
            weeks.push(raw[i]);
            i += 1;
        }
        weeks.sort_by_key(|w| w.week);
        let contiguous = weeks
            .iter()
            .enumerate()
            .all(|(k, w)| w.week == k as u32 + 1);
        if !contiguous || (weeks.len() < 52 && year != last_year) {
            return Err(Error::IncompleteYear {
                year,
                weeks: weeks.len(),
            });
        }
        if weeks.len() > 53 {
            return Err(Error::Validation(format!(
                "year {year} has {} raw weeks; at most 53 supported",
                weeks.len()
            )));
        }
        for w in &weeks[..weeks.len().min(51)] {
            obs.push((year, w.week, w.inflow_mw));
        }
        if weeks.len() == 53 {
            let merged = 0.5 * (weeks[51].inflow_mw + weeks[52].inflow_mw);
            obs.push((year, 52, merged));
        } else if weeks.len() == 52 {
            obs.push((year, 52, weeks[51].inflow_mw));
        } else {
            // trailing partial year
            for w in &weeks[weeks.len().min(51)..] {
                obs.push((year, w.week, w.inflow_mw));
            }
        }
    }
    InflowSeries::from_observations(obs)
}

/// Parameters of the synthetic seasonal inflow generator.
///
/// `inflow(t) = max(floor, mean + amplitude·cos(ω t + phase) + σ(t)·x_t)` with
/// `σ(t) = max(0, noise_sd + noise_sd_amplitude·cos(ω t + phase))` and `x_t`
/// a stationary AR(1) sequence with unit variance. `noise_ar1 = 0` gives
/// independent weekly noise.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SyntheticSpec {
    pub mean_mw: f64,
    pub amplitude_mw: f64,
    pub phase_rad: f64,
    pub noise_sd_mw: f64,
    pub noise_sd_amplitude_mw: f64,
    pub noise_ar1: f64,
    pub floor_mw: f64,
    pub omega: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        // A snow-fed catchment: pronounced winter minimum near week 31 with
        // multi-week dry spells, wetter and more volatile summers. The
        // week-locked frequency keeps every synthetic year in phase with the
        // 52-week grid.
        SyntheticSpec {
            mean_mw: 650.0,
            amplitude_mw: 250.0,
            phase_rad: -0.47,
            noise_sd_mw: 110.0,
            noise_sd_amplitude_mw: -30.0,
            noise_ar1: 0.75,
            floor_mw: 0.0,
            omega: crate::OMEGA_WEEKLY,
        }
    }
}

/// Generates a deterministic synthetic series: `years`×52 weekly records.
pub fn synthesize_inflow(spec: &SyntheticSpec, years: u32, seed: u64) -> Result<InflowSeries> {
    if years < 1 {
        return Err(Error::Validation("years must be >= 1".into()));
    }
    if spec.noise_sd_mw < 0.0 {
        return Err(Error::Validation("noise scale must be >= 0".into()));
    }
    if !(0.0..1.0).contains(&spec.noise_ar1) {
        return Err(Error::Validation("noise_ar1 must lie in [0, 1)".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let ar = spec.noise_ar1;
    let innovation_sd = (1.0 - ar * ar).sqrt();
    // burn in the AR state so the series starts at stationarity
    let mut x = if ar > 0.0 { normal.sample(&mut rng) } else { 0.0 };
    for _ in 0..64 {
        x = ar * x + innovation_sd * normal.sample(&mut rng);
    }
    let mut obs = Vec::with_capacity(years as usize * WEEKS_PER_YEAR);
    for y in 0..years {
        for w in 1..=WEEKS_PER_YEAR as u32 {
            let idx = y as usize * WEEKS_PER_YEAR + (w as usize - 1);
            let t = 7.0 * idx as f64;
            let c = (spec.omega * t + spec.phase_rad).cos();
            let seasonal = spec.mean_mw + spec.amplitude_mw * c;
            let sd = (spec.noise_sd_mw + spec.noise_sd_amplitude_mw * c).max(0.0);
            x = ar * x + innovation_sd * normal.sample(&mut rng);
            let inflow = (seasonal + sd * x).max(spec.floor_mw).max(0.0);
            obs.push((2000 + y as i32, w, inflow));
        }
    }
    InflowSeries::from_observations(obs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_row_file_gets_t_days() {
        let csv = "year,week,inflow\n1990,1,100\n1990,2,200\n1990,3,300\n";
        let s = parse_inflow_csv(csv, InflowUnits::Mw).unwrap();
        assert_eq!(s.len(), 3);
        let t: Vec<f64> = s.records.iter().map(|r| r.t_days).collect();
        assert_eq!(t, vec![0.0, 7.0, 14.0]);
        assert!(s.partial_final_year);
    }

    #[test]
    fn week_53_rejected() {
        let csv = "year,week,inflow\n1990,53,100\n";
        let err = parse_inflow_csv(csv, InflowUnits::Mw).unwrap_err();
        assert!(err.to_string().contains("week out of range"), "{err}");
    }

    #[test]
    fn duplicate_week_rejected() {
        let csv = "year,week,inflow\n1990,1,100\n1990,1,100\n";
        assert!(parse_inflow_csv(csv, InflowUnits::Mw).is_err());
    }

    #[test]
    fn negative_inflow_rejected_with_line() {
        let csv = "year,week,inflow\n1990,1,100\n1990,2,-5\n";
        let err = parse_inflow_csv(csv, InflowUnits::Mw).unwrap_err();
        assert!(matches!(err, Error::MalformedRow { line: 3, .. }), "{err}");
    }

    #[test]
    fn unit_conversion_applies() {
        let csv = "year,week,inflow\n1990,1,16.8\n";
        let s = parse_inflow_csv(csv, InflowUnits::GwhPerWeek).unwrap();
        assert!((s.records[0].inflow_mw - 100.0).abs() < 1e-9);
    }

    #[test]
    fn synthetic_74_years_has_3848_records() {
        let s = synthesize_inflow(&SyntheticSpec::default(), 74, 42).unwrap();
        assert_eq!(s.len(), 3848);
        assert!(!s.partial_final_year);
    }

    #[test]
    fn degenerate_spec_constant_series() {
        let spec = SyntheticSpec {
            mean_mw: 500.0,
            amplitude_mw: 0.0,
            noise_sd_mw: 0.0,
            noise_sd_amplitude_mw: 0.0,
            floor_mw: 0.0,
            ..SyntheticSpec::default()
        };
        let s = synthesize_inflow(&spec, 2, 1).unwrap();
        assert!(s.records.iter().all(|r| (r.inflow_mw - 500.0).abs() < 1e-12));
    }

    #[test]
    fn same_seed_same_series() {
        let spec = SyntheticSpec::default();
        let a = synthesize_inflow(&spec, 5, 7).unwrap();
        let b = synthesize_inflow(&spec, 5, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cosine_amplitude_spans_on_weekly_grid() {
        let spec = SyntheticSpec {
            mean_mw: 500.0,
            amplitude_mw: 200.0,
            phase_rad: 0.0,
            noise_sd_mw: 0.0,
            noise_sd_amplitude_mw: 0.0,
            floor_mw: 0.0,
            ..SyntheticSpec::default()
        };
        let s = synthesize_inflow(&spec, 1, 1).unwrap();
        let max = s.records.iter().map(|r| r.inflow_mw).fold(f64::MIN, f64::max);
        let min = s.records.iter().map(|r| r.inflow_mw).fold(f64::MAX, f64::min);
        // the weekly grid need not hit the exact extrema of the cosine
        let omega = crate::OMEGA_DEFAULT;
        let expected: f64 = (0..52)
            .map(|i| 500.0 + 200.0 * (omega * 7.0 * i as f64).cos())
            .fold(f64::MIN, f64::max)
            - (0..52)
                .map(|i| 500.0 + 200.0 * (omega * 7.0 * i as f64).cos())
                .fold(f64::MAX, f64::min);
        assert!((max - min - expected).abs() < 1e-9);
        assert!((max - min - 400.0).abs() < 5.0, "span {} vs 400", max - min);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let s = synthesize_inflow(&SyntheticSpec::default(), 3, 9).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let round = parse_inflow_csv(std::str::from_utf8(&buf).unwrap(), InflowUnits::Mw).unwrap();
        assert_eq!(s, round);
    }

    #[test]
    fn truncate_53rd_week_averages_into_52() {
        let mut raw: Vec<RawWeek> = (1..=53)
            .map(|w| RawWeek { year: 1990, week: w, inflow_mw: 100.0 })
            .collect();
        raw[51].inflow_mw = 100.0;
        raw[52].inflow_mw = 300.0;
        let s = truncate_year53(&raw).unwrap();
        assert_eq!(s.len(), 52);
        assert!((s.records[51].inflow_mw - 200.0).abs() < 1e-12);
    }

    #[test]
    fn truncate_passes_complete_years_unchanged() {
        let raw: Vec<RawWeek> = (0..2)
            .flat_map(|y| {
                (1..=52).map(move |w| RawWeek {
                    year: 1990 + y,
                    week: w,
                    inflow_mw: (w as f64) * 10.0,
                })
            })
            .collect();
        let s = truncate_year53(&raw).unwrap();
        assert_eq!(s.len(), 104);
        assert!((s.records[0].inflow_mw - 10.0).abs() < 1e-12);
        assert!((s.records[103].inflow_mw - 520.0).abs() < 1e-12);
    }

    #[test]
    fn truncate_rejects_short_interior_year() {
        let mut raw: Vec<RawWeek> = (1..=40)
            .map(|w| RawWeek { year: 1990, week: w, inflow_mw: 1.0 })
            .collect();
        raw.extend((1..=52).map(|w| RawWeek { year: 1991, week: w, inflow_mw: 1.0 }));
        let err = truncate_year53(&raw).unwrap_err();
        assert!(matches!(err, Error::IncompleteYear { year: 1990, weeks: 40 }), "{err}");
    }
}
