//! Sigma-finite excursion-measure estimators and the statistical checks.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::pathsim::ReflectedHeight;
use crate::rng::{derive_seed, rng_from_seed};
use crate::snake::{ExcursionSource, HeightExcursion};
use crate::stats::KahanSum;

pub mod engines;
pub mod ode;
pub mod checks;

/// Resolution parameters shared by the snake-based estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub dt: f64,
    pub dh: f64,
    pub eps: f64,
    pub beta: f64,
}

impl SimParams {
    /// dh = sqrt(dt)/4 and eps = 2 sqrt(dt).
    pub fn for_dt(dt: f64) -> Self {
        SimParams { dt, dh: dt.sqrt() / 4.0, eps: 2.0 * dt.sqrt(), beta: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dh > 0.0 && self.beta > 0.0) {
            return domain("dt, dh and beta must be > 0");
        }
        if !(self.eps > self.dh) {
            return Err(crate::Error::Resolution(format!("eps = {} must exceed dh = {}", self.eps, self.dh)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaFiniteEstimate {
    pub value: f64,
    pub half_width: f64,
    pub n_excursions: u64,
    pub local_time_window: f64,
    /// Set when no excursion contributed, so the interval is degenerate.
    pub degenerate: bool,
}

/// Accumulates (1/L) sum F over the excursions of a window of local time L.
/// The interval uses the compound-Poisson variance sum F^2 / L^2.
#[derive(Debug, Clone, Default)]
pub struct SigmaFiniteAccumulator {
    sum: KahanSum,
    sum_sq: KahanSum,
    n: u64,
    nonzero: u64,
}

impl SigmaFiniteAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, f: f64) {
        self.sum.add(f);
        self.sum_sq.add(f * f);
        self.n += 1;
        if f != 0.0 {
            self.nonzero += 1;
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.sum.add(other.sum.value());
        self.sum_sq.add(other.sum_sq.value());
        self.n += other.n;
        self.nonzero += other.nonzero;
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn finish(&self, window: f64) -> SigmaFiniteEstimate {
        let z = crate::stats::z_two_sided(0.05);
        SigmaFiniteEstimate {
            value: self.sum.value() / window,
            half_width: z * self.sum_sq.value().sqrt() / window,
            n_excursions: self.n,
            local_time_window: window,
            degenerate: self.nonzero == 0,
        }
    }
}

/// Simulates the reflected height process until its local time at 0 reaches
/// `window`, evaluating `f` on every excursion started before that (excursions longer
/// than `max_steps` are passed as `None`).
pub fn estimate_excursion_functional(
    f: &mut dyn FnMut(Option<&HeightExcursion>) -> f64,
    window: f64,
    params: &SimParams,
    max_steps: usize,
    seed: u64,
) -> Result<SigmaFiniteEstimate> {
    params.validate()?;
    if !(window > 0.0) {
        return domain("window must be > 0");
    }
    let mut rng = rng_from_seed(seed);
    let mut src = ExcursionSource::new(ReflectedHeight::new(params.beta, params.dt)?);
    let mut acc = SigmaFiniteAccumulator::new();
    // an excursion belongs to the window when its starting local time is below it
    loop {
        src.open(&mut rng);
        if src.local_time >= window {
            break;
        }
        let e = src.sample(max_steps, &mut rng);
        acc.push(f(e.as_ref()));
    }
    Ok(acc.finish(window))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

impl CheckStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            CheckStatus::Pass => 0,
            CheckStatus::Fail => 2,
            CheckStatus::Inconclusive => 3,
        }
    }

    pub fn all(statuses: &[CheckStatus]) -> CheckStatus {
        if statuses.contains(&CheckStatus::Fail) {
            CheckStatus::Fail
        } else if statuses.contains(&CheckStatus::Inconclusive) {
            CheckStatus::Inconclusive
        } else {
            CheckStatus::Pass
        }
    }
}

/// One verified criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckCriterion {
    pub name: String,
    pub status: CheckStatus,
    pub statistic: f64,
    pub threshold: String,
    pub effect_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub status: CheckStatus,
    pub criteria: Vec<CheckCriterion>,
    pub seeds: Vec<u64>,
    pub parameters: serde_json::Value,
    pub details: serde_json::Value,
    /// Raw per-excursion statistics (header plus rows) for CSV export.
    #[serde(skip)]
    pub raw: Option<(Vec<String>, Vec<Vec<f64>>)>,
}

impl CheckReport {
    pub fn new(name: &str, criteria: Vec<CheckCriterion>, seeds: Vec<u64>, parameters: serde_json::Value, details: serde_json::Value) -> Self {
        let status = CheckStatus::all(&criteria.iter().map(|c| c.status).collect::<Vec<_>>());
        CheckReport { name: name.to_string(), status, criteria, seeds, parameters, details, raw: None }
    }

    pub fn with_raw(mut self, header: Vec<String>, rows: Vec<Vec<f64>>) -> Self {
        self.raw = Some((header, rows));
        self
    }

    pub fn raw_csv(&self) -> Option<String> {
        let (h, rows) = self.raw.as_ref()?;
        let mut s = h.join(",");
        s.push('\n');
        for r in rows {
            s.push_str(&r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        Some(s)
    }
}

pub(crate) fn criterion(name: &str, pass: bool, statistic: f64, threshold: impl Into<String>, effect_size: f64) -> CheckCriterion {
    CheckCriterion {
        name: name.to_string(),
        status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
        statistic,
        threshold: threshold.into(),
        effect_size,
    }
}

pub(crate) fn inconclusive(name: &str, statistic: f64, threshold: impl Into<String>) -> CheckCriterion {
    CheckCriterion { name: name.to_string(), status: CheckStatus::Inconclusive, statistic, threshold: threshold.into(), effect_size: 0.0 }
}

/// Seed of replica `i` of a check.
pub fn replica_seed(master: u64, i: u64) -> u64 {
    derive_seed(master, i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_functional_is_exactly_zero() {
        let p = SimParams::for_dt(1e-3);
        let e = estimate_excursion_functional(&mut |_| 0.0, 5.0, &p, 1_000_000, 1).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.degenerate);
        assert!(e.n_excursions > 0);
    }

    #[test]
    fn height_tail_matches_excursion_measure() {
        // N(sup H > h) = 1/h
        let p = SimParams::for_dt(1e-4);
        let h = 0.5;
        let e = estimate_excursion_functional(
            &mut |e| match e {
                Some(e) => (e.heights.iter().cloned().fold(0.0, f64::max) > h) as u8 as f64,
                None => 1.0,
            },
            200.0,
            &p,
            10_000_000,
            2,
        )
        .unwrap();
        // single seed: three standard errors
        let se = e.half_width / crate::stats::z_two_sided(0.05);
        assert!((e.value - 1.0 / h).abs() < 3.0 * se, "{e:?}");
    }
}
