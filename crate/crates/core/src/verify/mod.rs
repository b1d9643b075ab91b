//! The inequality harness: seeded corpora, per-item ratios and the fitted
//! summaries that decide whether a measured family is "bounded".
//!
//! An inequality `A ≲ B` with an unknown constant is checked by computing
//! `A / B` over a sweep and requiring the ratios to stay within a fixed
//! factor of their median, plus a slope bound where a parameter drifts.

mod checks;
mod corpus;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use checks::*;
pub use corpus::{Corpus, CorpusItem, CorpusKind};

/// Every pass/fail threshold used by the checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Allowed `max / median` of a ratio family.
    pub spread: f64,
    /// Largest allowed log-slope of domination ratios against `log r'`.
    pub domination_slope: f64,
    /// Largest allowed slope of `log₂ ‖T - T_l‖` against `l`.
    pub decay_slope: f64,
    /// Slack when checking that norm estimates do not grow with `l`.
    pub decay_slack: f64,
}

pub const THRESHOLDS: Thresholds = Thresholds {
    spread: 3.0,
    domination_slope: 0.1,
    decay_slope: -0.2,
    decay_slack: 1e-9,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitItem {
    pub name: String,
    pub ratio: f64,
}

/// Summary of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub check: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub items: Vec<FitItem>,
    pub max: f64,
    pub median: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub slope: Option<f64>,
    pub pass: bool,
}

/// Middle order statistic (mean of the two middle values for even length).
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// `max ≤ factor · median`.
pub fn spread_ok(ratios: &[f64], factor: f64) -> bool {
    let max = ratios.iter().copied().fold(0.0, f64::max);
    ratios.iter().all(|r| r.is_finite()) && max <= factor * median(ratios)
}

impl FitReport {
    /// Builds the summary; `pass` is the spread test on the ratios combined
    /// with `extra` (the slope or trend part of the criterion).
    pub fn new(
        check: &str,
        params: BTreeMap<String, serde_json::Value>,
        items: Vec<FitItem>,
        slope: Option<f64>,
        extra: bool,
    ) -> Self {
        let ratios: Vec<f64> = items.iter().map(|i| i.ratio).collect();
        let max = ratios.iter().copied().fold(0.0, f64::max);
        let median = median(&ratios);
        let pass = !items.is_empty() && spread_ok(&ratios, THRESHOLDS.spread) && extra;
        Self {
            check: check.to_string(),
            params,
            items,
            max,
            median,
            slope,
            pass,
        }
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.items.iter().map(|i| i.ratio).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Flat `check,name,ratio` rows.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["check", "name", "ratio"])?;
        for item in &self.items {
            w.write_record([self.check.as_str(), item.name.as_str(), &item.ratio.to_string()])?;
        }
        let bytes = w.into_inner().map_err(|e| crate::Error::Format(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Shorthand for building `params` maps.
#[macro_export]
#[doc(hidden)]
macro_rules! params {
    ($($k:expr => $v:expr),* $(,)?) => {{
        let mut m = std::collections::BTreeMap::new();
        $(m.insert($k.to_string(), serde_json::json!($v));)*
        m
    }};
}
