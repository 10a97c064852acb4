//! Grid sweeps over `(a, b, p, q)`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{estimate_entropy, threshold_uniform_n};
use crate::error::{Error, Result};
use crate::greedy::greedy_policy;
use crate::local::{local_search_random, matches, point_seed};
use crate::policy::{Cut, Orientation, Policy};
use crate::search::{find_optimal_threshold, RegionLabel};
use crate::special::{SpecialModel, DEGENERATE_TOL};

/// Column order of the sweep CSV.
pub const CSV_HEADER: [&str; 13] = [
    "a",
    "b",
    "p",
    "q",
    "region",
    "orientation",
    "t_opt",
    "H_opt",
    "H_greedy",
    "greedy_gap_rel",
    "local_match_count",
    "error_code",
    "runtime_ms",
];

/// Greedy counts as non-optimal above this relative gap.
pub const GAP_TOL: f64 = 1e-12;

/// `start, start + step, …` with `count` values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl Grid {
    /// Cell midpoints of [0,1] at spacing `step`.
    pub fn midpoints(step: f64) -> Result<Self> {
        if !(step > 0.0 && step <= 0.5) {
            return Err(Error::InvalidArgument(format!("grid step {step} not in (0, 0.5]")));
        }
        Ok(Grid {
            start: step / 2.0,
            step,
            count: (1.0 / step).round() as usize,
        })
    }

    /// Grid values, rounded to 12 decimals so that shared points of
    /// different grids compare equal.
    pub fn values(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| ((self.start + k as f64 * self.step) * 1e12).round() / 1e12)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tasks {
    pub regions: bool,
    pub local: bool,
    pub greedy: bool,
}

impl Tasks {
    pub fn parse(list: &str) -> Result<Self> {
        let mut t = Tasks {
            regions: false,
            local: false,
            greedy: false,
        };
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name {
                "regions" => t.regions = true,
                "local" => t.local = true,
                "greedy" => t.greedy = true,
                "all" => {
                    t = Tasks {
                        regions: true,
                        local: true,
                        greedy: true,
                    }
                }
                _ => return Err(Error::InvalidArgument(format!("unknown sweep task {name:?}"))),
            }
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Grids for a, b, p, q.
    pub grids: [Grid; 4],
    pub eps: f64,
    pub tasks: Tasks,
    pub seed: u64,
    pub local_starts: usize,
    /// Record wall-clock time per point (breaks byte reproducibility).
    pub timing: bool,
}

impl SweepConfig {
    pub fn with_step(step: f64) -> Result<Self> {
        let g = Grid::midpoints(step)?;
        Ok(SweepConfig {
            grids: [g; 4],
            eps: 1e-8,
            tasks: Tasks {
                regions: true,
                local: false,
                greedy: true,
            },
            seed: 0,
            local_starts: 10,
            timing: false,
        })
    }

    /// Valid grid points in lexicographic order.
    pub fn points(&self) -> Vec<[f64; 4]> {
        let [ga, gb, gp, gq] = self.grids.map(|g| g.values());
        let mut out = Vec::new();
        for &a in &ga {
            for &b in &gb {
                if (a + b - 1.0).abs() < DEGENERATE_TOL {
                    continue;
                }
                for &p in &gp {
                    for &q in &gq {
                        out.push([a, b, p, q]);
                    }
                }
            }
        }
        out
    }
}

mod cut_text {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::policy::Cut;

    pub fn serialize<S: Serializer>(cut: &Option<Cut>, s: S) -> Result<S::Ok, S::Error> {
        match cut {
            Some(c) => s.serialize_str(&c.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Cut>, D::Error> {
        let s: Option<String> = Option::deserialize(d)?;
        match s.as_deref() {
            None | Some("") => Ok(None),
            Some(t) => t.parse().map(Some).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
    pub region: Option<RegionLabel>,
    pub orientation: Option<Orientation>,
    #[serde(with = "cut_text")]
    pub t_opt: Option<Cut>,
    #[serde(rename = "H_opt")]
    pub h_opt: Option<f64>,
    #[serde(rename = "H_greedy")]
    pub h_greedy: Option<f64>,
    pub greedy_gap_rel: Option<f64>,
    pub local_match_count: Option<usize>,
    pub error_code: Option<String>,
    pub runtime_ms: Option<f64>,
}

impl SweepRow {
    fn empty(x: [f64; 4]) -> Self {
        SweepRow {
            a: x[0],
            b: x[1],
            p: x[2],
            q: x[3],
            region: None,
            orientation: None,
            t_opt: None,
            h_opt: None,
            h_greedy: None,
            greedy_gap_rel: None,
            local_match_count: None,
            error_code: None,
            runtime_ms: None,
        }
    }
}

/// Everything computed at one grid point. Errors are recorded in the row.
pub fn sweep_point(x: [f64; 4], config: &SweepConfig) -> SweepRow {
    let started = Instant::now();
    let mut row = SweepRow::empty(x);
    if let Err(e) = fill_row(&mut row, config) {
        row.error_code = Some(e.code().to_string());
    }
    if config.timing {
        row.runtime_ms = Some(started.elapsed().as_secs_f64() * 1e3);
    }
    row
}

fn fill_row(row: &mut SweepRow, config: &SweepConfig) -> Result<()> {
    let model = SpecialModel::new(row.a, row.b, row.p, row.q)?;
    let opt = find_optimal_threshold(&model, config.eps)?;
    let h_opt = opt.best_entropy.value;
    let tp = *opt.best_policy.as_threshold().expect("threshold search");
    row.orientation = Some(tp.orientation);
    row.t_opt = Some(tp.cut);
    row.h_opt = Some(h_opt);
    if config.tasks.regions {
        row.region = opt.region;
    }
    if config.tasks.greedy {
        let greedy: Policy = greedy_policy(&model)?.into();
        let n = threshold_uniform_n(&model, config.eps)?;
        let h = estimate_entropy(&model, &greedy, n)?.value;
        row.h_greedy = Some(h);
        row.greedy_gap_rel = Some((h - h_opt) / h_opt);
    }
    if config.tasks.local {
        let seed = point_seed(&model, config.seed);
        let found = local_search_random(&model, config.local_starts, seed, config.eps)?;
        row.local_match_count = Some(found.iter().filter(|r| matches(r.best_entropy.value, h_opt)).count());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub points: usize,
    pub errors: usize,
    pub error_codes: BTreeMap<String, usize>,
    pub region_histogram: BTreeMap<String, usize>,
    pub greedy_points: usize,
    pub greedy_non_optimal: usize,
    pub greedy_non_optimal_fraction: Option<f64>,
    pub greedy_gap_mean: Option<f64>,
    pub greedy_gap_max: Option<f64>,
    pub greedy_gap_max_at: Option<[f64; 4]>,
    pub greedy_gap_min: Option<f64>,
    pub local_points: usize,
    pub local_match_rate_mean: Option<f64>,
}

pub fn summarize(rows: &[SweepRow]) -> SummaryStats {
    let mut s = SummaryStats {
        points: rows.len(),
        errors: 0,
        error_codes: BTreeMap::new(),
        region_histogram: BTreeMap::new(),
        greedy_points: 0,
        greedy_non_optimal: 0,
        greedy_non_optimal_fraction: None,
        greedy_gap_mean: None,
        greedy_gap_max: None,
        greedy_gap_max_at: None,
        greedy_gap_min: None,
        local_points: 0,
        local_match_rate_mean: None,
    };
    let (mut gap_sum, mut match_sum) = (0.0, 0.0);
    for r in rows {
        if let Some(code) = &r.error_code {
            s.errors += 1;
            *s.error_codes.entry(code.clone()).or_default() += 1;
        }
        if let Some(region) = r.region {
            *s.region_histogram.entry(region.to_string()).or_default() += 1;
        }
        if let Some(g) = r.greedy_gap_rel {
            s.greedy_points += 1;
            gap_sum += g;
            if g > GAP_TOL {
                s.greedy_non_optimal += 1;
            }
            if s.greedy_gap_max.is_none_or(|m| g > m) {
                s.greedy_gap_max = Some(g);
                s.greedy_gap_max_at = Some([r.a, r.b, r.p, r.q]);
            }
            s.greedy_gap_min = Some(s.greedy_gap_min.map_or(g, |m: f64| m.min(g)));
        }
        if let Some(c) = r.local_match_count {
            s.local_points += 1;
            match_sum += c as f64;
        }
    }
    if s.greedy_points > 0 {
        s.greedy_non_optimal_fraction = Some(s.greedy_non_optimal as f64 / s.greedy_points as f64);
        s.greedy_gap_mean = Some(gap_sum / s.greedy_points as f64);
    }
    if s.local_points > 0 {
        s.local_match_rate_mean = Some(match_sum / s.local_points as f64);
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub summary: SummaryStats,
}

/// Runs every grid point on the current rayon pool. Rows come back in
/// lexicographic `(a, b, p, q)` order.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutput> {
    if !(config.eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {}",
            config.eps
        )));
    }
    for g in &config.grids {
        if g.values().iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::InvalidArgument(format!("grid {g:?} leaves (0,1)")));
        }
    }
    let points = config.points();
    log::info!("sweeping {} points", points.len());
    let rows: Vec<SweepRow> = points.par_iter().map(|&x| sweep_point(x, config)).collect();
    let summary = summarize(&rows);
    Ok(SweepOutput { rows, summary })
}

pub fn write_rows<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Io(format!("unexpected sweep header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(step: f64) -> SweepConfig {
        let mut c = SweepConfig::with_step(step).unwrap();
        c.grids[0] = Grid {
            start: 0.75,
            step: 0.1,
            count: 2,
        };
        c.grids[1] = Grid {
            start: 0.25,
            step: 0.5,
            count: 2,
        };
        c
    }

    #[test]
    fn grid_construction() {
        let g = Grid::midpoints(0.05).unwrap();
        assert_eq!(g.count, 20);
        let v = g.values();
        assert_eq!(v[0], 0.025);
        assert_eq!(v[19], 0.975);
        let c = SweepConfig::with_step(0.05).unwrap();
        assert_eq!(c.points().len(), 152_000);
        assert_eq!(SweepConfig::with_step(0.1).unwrap().points().len(), 9000);
        assert!(Grid::midpoints(0.0).is_err());
    }

    #[test]
    fn summary_arithmetic() {
        let mut r1 = SweepRow::empty([0.1, 0.2, 0.3, 0.4]);
        r1.greedy_gap_rel = Some(0.0);
        let s = summarize(std::slice::from_ref(&r1));
        assert_eq!(s.greedy_non_optimal_fraction, Some(0.0));
        let mut r2 = r1.clone();
        r2.greedy_gap_rel = Some(0.02);
        let s = summarize(&[r1, r2]);
        assert_eq!(s.greedy_non_optimal_fraction, Some(0.5));
        assert_eq!(s.greedy_gap_mean, Some(0.01));
        assert_eq!(s.greedy_gap_max, Some(0.02));
    }

    #[test]
    fn csv_round_trip_and_reproducibility() {
        let cfg = tiny(0.5);
        let out = run_sweep(&cfg).unwrap();
        // (0.75, 0.25) has a + b = 1
        assert_eq!(out.rows.len(), 3 * 4);
        let mut a = Vec::new();
        write_rows(&out.rows, &mut a).unwrap();
        let again = run_sweep(&cfg).unwrap();
        let mut b = Vec::new();
        write_rows(&again.rows, &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a.clone()).unwrap();
        assert!(text.starts_with(&(CSV_HEADER.join(",") + "\n")));
        let back = read_rows(&a[..]).unwrap();
        assert_eq!(back, out.rows);
        assert_eq!(summarize(&back), out.summary);
    }

    #[test]
    fn rows_are_sorted_and_gaps_nonnegative() {
        let out = run_sweep(&tiny(0.5)).unwrap();
        let keys: Vec<[f64; 4]> = out.rows.iter().map(|r| [r.a, r.b, r.p, r.q]).collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        for r in &out.rows {
            assert!(r.error_code.is_none(), "{r:?}");
            assert!(r.greedy_gap_rel.unwrap() >= -2e-8 / r.h_opt.unwrap());
            assert!(r.runtime_ms.is_none());
        }
    }

    #[test]
    fn bad_rows_record_errors() {
        let mut cfg = tiny(0.5);
        cfg.grids[1] = Grid {
            start: 0.25,
            step: 0.5,
            count: 1,
        };
        cfg.grids[0] = Grid {
            start: 0.75,
            step: 0.1,
            count: 1,
        };
        let row = sweep_point([0.5, 0.5 + 1e-14, 0.5, 0.5], &cfg);
        assert_eq!(row.error_code.as_deref(), Some("InvalidModel"));
    }
}
