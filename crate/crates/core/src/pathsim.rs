//! Lattice paths of spectrally positive Levy processes, random-walk skeletons,
//! running infima and excursion slicing.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::rng::{rng_from_seed, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticePath {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl LatticePath {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return domain(format!("dt must be > 0, got {dt}"));
        }
        if values.is_empty() {
            return domain("a lattice path needs at least one value");
        }
        Ok(LatticePath { dt, values })
    }

    pub fn origin(&self) -> f64 {
        self.values[0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Span [0, (len-1) dt].
    pub fn horizon(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    /// Linear interpolation at time t within the span.
    pub fn at(&self, t: f64) -> f64 {
        let x = t / self.dt;
        let k = x.floor() as usize;
        if k + 1 >= self.values.len() {
            return *self.values.last().unwrap();
        }
        let f = x - k as f64;
        self.values[k] + f * (self.values[k + 1] - self.values[k])
    }

    /// CSV text with header `t,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.values.len() * 24 + 8);
        s.push_str("t,value\n");
        for (k, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{},{}\n", self.time(k), v));
        }
        s
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return domain(format!("{name} must be finite and > 0, got {v}"));
    }
    Ok(())
}

fn n_steps(horizon: f64, dt: f64) -> usize {
    (horizon / dt + 1e-9).floor() as usize
}

/// Brownian Levy path with increments N(0, 2 beta dt), so that
/// E[exp(-l X_t)] = exp(t beta l^2).
pub fn sample_brownian_levy(beta: f64, horizon: f64, dt: f64, seed: u64) -> Result<LatticePath> {
    check_positive("beta", beta)?;
    check_positive("horizon", horizon)?;
    check_positive("dt", dt)?;
    let n = n_steps(horizon, dt);
    let sd = (2.0 * beta * dt).sqrt();
    let mut rng = rng_from_seed(seed);
    let mut values = Vec::with_capacity(n + 1);
    let mut x = 0.0;
    values.push(x);
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        x += sd * z;
        values.push(x);
    }
    LatticePath::new(dt, values)
}

/// One draw of a spectrally positive strictly stable variable Y with
/// E[exp(-l Y)] = exp(c l^a), a in (1,2) (Chambers-Mallows-Stuck).
pub fn stable_increment<R: Rng + ?Sized>(a: f64, c: f64, rng: &mut R) -> f64 {
    use std::f64::consts::FRAC_PI_2;
    let tan_pa = (std::f64::consts::PI * a / 2.0).tan();
    let b = tan_pa.atan() / a;
    let s = (1.0 + tan_pa * tan_pa).powf(1.0 / (2.0 * a));
    let v = (rng.random::<f64>() - 0.5) * std::f64::consts::PI;
    let v = v.clamp(-FRAC_PI_2 + 1e-15, FRAC_PI_2 - 1e-15);
    let w: f64 = rng.sample(Exp1);
    let x = s * (a * (v + b)).sin() / v.cos().powf(1.0 / a) * ((v - a * (v + b)).cos() / w).powf((1.0 - a) / a);
    let sigma = (c * (std::f64::consts::PI * a / 2.0).cos().abs()).powf(1.0 / a);
    sigma * x
}

pub fn sample_stable_levy(index: f64, scale: f64, horizon: f64, dt: f64, seed: u64) -> Result<LatticePath> {
    if !(index > 1.0 && index < 2.0) {
        return domain(format!("stable index must lie in (1,2), got {index}"));
    }
    check_positive("scale", scale)?;
    check_positive("horizon", horizon)?;
    check_positive("dt", dt)?;
    let n = n_steps(horizon, dt);
    let mut rng = rng_from_seed(seed);
    let mut values = Vec::with_capacity(n + 1);
    let mut x = 0.0;
    values.push(x);
    let c = scale * dt;
    for _ in 0..n {
        x += stable_increment(index, c, &mut rng);
        values.push(x);
    }
    LatticePath::new(dt, values)
}

/// Lukasiewicz-type walk: steps are (offspring count - 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkSkeleton {
    pub steps: Vec<i64>,
    pub partial_sums: Vec<i64>,
}

impl WalkSkeleton {
    pub fn from_steps(steps: Vec<i64>) -> Result<Self> {
        if steps.iter().any(|&s| s < -1) {
            return domain("walk steps must be >= -1");
        }
        let mut partial_sums = Vec::with_capacity(steps.len() + 1);
        let mut s = 0i64;
        partial_sums.push(0);
        for &d in &steps {
            s += d;
            partial_sums.push(s);
        }
        Ok(WalkSkeleton { steps, partial_sums })
    }

    pub fn from_partial_sums(partial_sums: Vec<i64>) -> Result<Self> {
        if partial_sums.first() != Some(&0) {
            return domain("partial sums must start at 0");
        }
        let steps: Vec<i64> = partial_sums.windows(2).map(|w| w[1] - w[0]).collect();
        Self::from_steps(steps)
    }
}

/// Offspring law with a fast sampler.
#[derive(Debug, Clone)]
pub struct OffspringLaw {
    weights: Vec<f64>,
    index: WeightedIndex<f64>,
    /// Values attached to each weight slot (usually 0..len, plus an optional far atom).
    support: Vec<u64>,
}

impl OffspringLaw {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return domain("offspring weights must be finite and nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return domain(format!("offspring weights must sum to 1, got {total}"));
        }
        let support: Vec<u64> = (0..weights.len() as u64).collect();
        Self::with_support(weights.to_vec(), support)
    }

    fn with_support(weights: Vec<f64>, support: Vec<u64>) -> Result<Self> {
        let mean: f64 = weights.iter().zip(&support).map(|(w, &k)| w * k as f64).sum();
        if mean > 1.0 + 1e-9 {
            return domain(format!("supercritical offspring mean {mean} > 1"));
        }
        let index = WeightedIndex::new(&weights).map_err(|e| crate::error::Error::Domain(e.to_string()))?;
        Ok(OffspringLaw { weights, index, support })
    }

    /// Geometric law P(k) = (1-p) p^k truncated far in the tail, mean restored.
    pub fn geometric_half() -> Self {
        let kmax = 64;
        let mut w: Vec<f64> = (0..kmax).map(|k| 0.5f64.powi(k as i32 + 1)).collect();
        let tail: f64 = 1.0 - w.iter().sum::<f64>();
        w[0] += tail;
        let mut support: Vec<u64> = (0..kmax as u64).collect();
        // restore criticality with a single far atom carrying the missing mean
        let mean: f64 = w.iter().zip(&support).map(|(a, &k)| a * k as f64).sum();
        let deficit = 1.0 - mean;
        if deficit > 0.0 {
            let far = 1u64 << 20;
            let mass = deficit / far as f64;
            w[0] -= mass;
            w.push(mass);
            support.push(far);
        }
        Self::with_support(w, support).expect("valid law")
    }

    /// Critical law with generating function s + (2/3)(1-s)^{3/2}; in the
    /// domain of attraction of the stable 3/2 mechanism (2/3) l^{3/2}.
    pub fn stable_three_halves(kmax: usize) -> Self {
        Self::stable(1.5, kmax).expect("valid index")
    }

    /// Critical law with generating function s + (1-s)^a / a, a in (1,2);
    /// in the domain of attraction of the mechanism l^a / a.
    /// Truncated at `kmax`; the tail is replaced by one atom with the same
    /// mass and mean, so the law stays exactly critical.
    pub fn stable(a: f64, kmax: usize) -> Result<Self> {
        if !(a > 1.0 && a < 2.0) {
            return domain(format!("stable index must lie in (1,2), got {a}"));
        }
        if kmax < 2 {
            return domain("kmax must be >= 2");
        }
        let mut p = vec![0.0; kmax + 1];
        p[0] = 1.0 / a;
        // (-1)^k binom(a, k) via the ratio recursion
        let mut b = 1.0f64;
        for (k, slot) in p.iter_mut().enumerate().skip(1) {
            b *= -(a - (k as f64 - 1.0)) / k as f64;
            if k >= 2 {
                *slot = b / a;
            }
        }
        let mass: f64 = p.iter().sum();
        let mean: f64 = p.iter().enumerate().map(|(k, w)| k as f64 * w).sum();
        let tail_mass = 1.0 - mass;
        let tail_mean = 1.0 - mean;
        let mut support: Vec<u64> = (0..=kmax as u64).collect();
        if tail_mass > 0.0 && tail_mean > 0.0 {
            let far = (tail_mean / tail_mass).ceil().max(kmax as f64 + 1.0);
            // keep the mean exact by adjusting the atom mass
            let m = tail_mean / far;
            p[0] += tail_mass - m;
            p.push(m);
            support.push(far as u64);
        }
        Self::with_support(p, support)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.support).map(|(w, &k)| w * k as f64).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.support[self.index.sample(rng)]
    }
}

pub fn sample_skip_free_walk(offspring_weights: &[f64], n_steps: usize, seed: u64) -> Result<WalkSkeleton> {
    let law = OffspringLaw::new(offspring_weights)?;
    Ok(sample_walk_with_law(&law, n_steps, seed))
}

pub fn sample_walk_with_law(law: &OffspringLaw, n_steps: usize, seed: u64) -> WalkSkeleton {
    let mut rng = rng_from_seed(seed);
    let steps: Vec<i64> = (0..n_steps).map(|_| law.sample(&mut rng) as i64 - 1).collect();
    WalkSkeleton::from_steps(steps).expect("steps are >= -1")
}

/// Walk coding one Galton-Watson tree: stops when the sum first hits -1.
/// Returns `None` if the tree exceeds `max_vertices`.
pub fn sample_gw_tree_walk<R: Rng + ?Sized>(law: &OffspringLaw, max_vertices: usize, rng: &mut R) -> Option<WalkSkeleton> {
    let mut steps = Vec::new();
    let mut s = 0i64;
    while s >= 0 {
        if steps.len() >= max_vertices {
            return None;
        }
        let d = law.sample(rng) as i64 - 1;
        steps.push(d);
        s += d;
    }
    steps.pop();
    Some(WalkSkeleton::from_steps(steps).expect("steps are >= -1"))
}

pub fn running_infimum(p: &LatticePath) -> LatticePath {
    let mut m = f64::INFINITY;
    let values = p
        .values
        .iter()
        .map(|&v| {
            m = m.min(v);
            m
        })
        .collect();
    LatticePath { dt: p.dt, values }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcursionSlice {
    /// Last index with X = I before the path goes strictly above I.
    pub start_index: usize,
    /// Index where X returns to I, or one past the last index if the path
    /// ends inside the excursion.
    pub end_index: usize,
    pub local_time_mark: f64,
    pub complete: bool,
}

pub fn excursions_above_infimum(p: &LatticePath) -> Vec<ExcursionSlice> {
    let inf = running_infimum(p);
    let mut out = Vec::new();
    let n = p.values.len();
    let mut k = 0;
    while k + 1 < n {
        if p.values[k + 1] - inf.values[k + 1] > 0.0 {
            let start = k;
            let mut j = k + 1;
            while j < n && p.values[j] - inf.values[j] > 0.0 {
                j += 1;
            }
            out.push(ExcursionSlice {
                start_index: start,
                end_index: j,
                local_time_mark: p.origin() - inf.values[start],
                complete: j < n,
            });
            k = j;
        } else {
            k += 1;
        }
    }
    out
}

/// Output of one step of the reflected height sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightStep {
    pub h: f64,
    /// Minimum of the height over the step (0 when the step touched 0).
    pub min: f64,
    /// Increment of the local time at 0 (in units of -I).
    pub local_time: f64,
}

/// Exact-in-law stepper for H = (X - I)/beta in the Brownian case: a
/// reflected Brownian motion with variance 2 dt / beta per step. The local
/// time increment and the within-step minimum come from the Brownian bridge.
#[derive(Debug, Clone, Copy)]
pub struct ReflectedHeight {
    pub dt: f64,
    pub beta: f64,
    sd: f64,
    var: f64,
}

impl ReflectedHeight {
    pub fn new(beta: f64, dt: f64) -> Result<Self> {
        check_positive("beta", beta)?;
        check_positive("dt", dt)?;
        let var = 2.0 * dt / beta;
        Ok(ReflectedHeight { dt, beta, sd: var.sqrt(), var })
    }

    pub fn step_sd(&self) -> f64 {
        self.sd
    }

    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, h: f64, rng: &mut R) -> HeightStep {
        let z: f64 = rng.sample(StandardNormal);
        let b = h + self.sd * z;
        let u: f64 = 1.0 - rng.random::<f64>();
        let d = b - h;
        let m = 0.5 * (h + b - (d * d - 2.0 * self.var * u.ln()).sqrt());
        if m >= 0.0 {
            HeightStep { h: b, min: m, local_time: 0.0 }
        } else {
            HeightStep { h: b - m, min: 0.0, local_time: -m * self.beta }
        }
    }

    /// Same as `step`, with an additional mirror at height `ceiling`.
    #[inline]
    pub fn step_with_ceiling<R: Rng + ?Sized>(&self, h: f64, ceiling: f64, rng: &mut R) -> HeightStep {
        let mut s = self.step(h, rng);
        if s.h > ceiling {
            s.h = (2.0 * ceiling - s.h).max(0.0);
            s.min = s.min.min(s.h);
        }
        s
    }
}

/// Height path and local time at 0 of the reflected sampler, from 0 for
/// `n` steps.
pub fn sample_reflected_height(beta: f64, dt: f64, n: usize, seed: u64) -> Result<(LatticePath, LatticePath)> {
    let st = ReflectedHeight::new(beta, dt)?;
    let mut rng: SimRng = rng_from_seed(seed);
    let mut h = Vec::with_capacity(n + 1);
    let mut l = Vec::with_capacity(n + 1);
    let (mut x, mut lt) = (0.0, 0.0);
    h.push(x);
    l.push(lt);
    for _ in 0..n {
        let s = st.step(x, &mut rng);
        x = s.h;
        lt += s.local_time;
        h.push(x);
        l.push(lt);
    }
    Ok((LatticePath::new(dt, h)?, LatticePath::new(dt, l)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_shape_and_determinism() {
        let p = sample_brownian_levy(1.0, 1.0, 1.0, 3).unwrap();
        assert_eq!(p.len(), 2);
        let a = sample_brownian_levy(1.0, 1.0, 1e-3, 9).unwrap();
        let b = sample_brownian_levy(1.0, 1.0, 1e-3, 9).unwrap();
        assert_eq!(a, b);
        assert!(sample_brownian_levy(0.0, 1.0, 1e-3, 9).is_err());
    }

    #[test]
    fn brownian_increment_variance() {
        let beta = 0.7;
        let dt = 1e-3;
        let p = sample_brownian_levy(beta, 1000.0, dt, 11).unwrap();
        let inc: Vec<f64> = p.values.windows(2).map(|w| w[1] - w[0]).collect();
        let n = inc.len() as f64;
        let v = inc.iter().map(|x| x * x).sum::<f64>() / n;
        let target = 2.0 * beta * dt;
        // sd of the variance estimator is target * sqrt(2/n)
        assert!((v - target).abs() < 3.0 * target * (2.0 / n).sqrt(), "v={v} target={target}");
    }

    #[test]
    fn stable_laplace_transform() {
        let (a, c) = (1.5, 0.8);
        let mut rng = rng_from_seed(5);
        let xs: Vec<f64> = (0..1_000_000).map(|_| stable_increment(a, c, &mut rng)).collect();
        for &l in &[0.5, 1.0, 2.0] {
            let vals: Vec<f64> = xs.iter().map(|x| (-l * x).exp()).collect();
            let n = vals.len() as f64;
            let m = vals.iter().sum::<f64>() / n;
            let sd = (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt();
            let target = (c * f64::powf(l, a)).exp();
            assert!((m - target).abs() < 4.0 * sd / n.sqrt(), "l={l} m={m} target={target}");
        }
    }

    #[test]
    fn stable_rejects_bad_index_and_is_deterministic() {
        assert!(sample_stable_levy(2.5, 1.0, 1.0, 0.1, 1).is_err());
        assert!(sample_stable_levy(1.0, 1.0, 1.0, 0.1, 1).is_err());
        let a = sample_stable_levy(1.5, 1.0, 1.0, 0.01, 4).unwrap();
        let b = sample_stable_levy(1.5, 1.0, 1.0, 0.01, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stable_left_tail_is_light() {
        // spectrally positive: P(Y < -k) decays like exp(-k^{a/(a-1)})
        let mut rng = rng_from_seed(8);
        let dt: f64 = 1e-2;
        let scale = dt.powf(1.0 / 1.5);
        let worst = (0..200_000).map(|_| stable_increment(1.5, dt, &mut rng) / scale).fold(f64::INFINITY, f64::min);
        assert!(worst > -12.0, "worst = {worst}");
    }

    #[test]
    fn walk_examples() {
        let w = sample_skip_free_walk(&[1.0], 10, 1).unwrap();
        assert!(w.steps.iter().all(|&s| s == -1));
        let w = sample_skip_free_walk(&[0.5, 0.0, 0.5], 100_000, 2).unwrap();
        assert!(w.steps.iter().all(|&s| s == -1 || s == 1));
        let m = w.steps.iter().sum::<i64>() as f64 / 1e5;
        assert!(m.abs() < 4.0 / 1e5f64.sqrt());
        assert!(sample_skip_free_walk(&[0.2, 0.0, 0.8], 10, 1).is_err());
    }

    #[test]
    fn geometric_walk_is_critical() {
        let law = OffspringLaw::geometric_half();
        assert!((law.mean() - 1.0).abs() < 1e-12);
        let w = sample_walk_with_law(&law, 200_000, 3);
        let m = w.steps.iter().sum::<i64>() as f64 / 2e5;
        // the far atom is essentially never drawn; step variance is 2
        assert!(m.abs() < 4.0 * (2.0f64 / 2e5).sqrt(), "mean step {m}");
    }

    #[test]
    fn stable_three_halves_law() {
        let law = OffspringLaw::stable_three_halves(1 << 16);
        let w = law.weights();
        assert!((w[1]).abs() < 1e-15);
        assert!((w[2] - 0.25).abs() < 1e-15);
        assert!((w[3] - 1.0 / 24.0).abs() < 1e-15);
        assert!((law.mean() - 1.0).abs() < 1e-9);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn stable_law_family() {
        for a in [1.1, 1.5, 1.9] {
            let law = OffspringLaw::stable(a, 1 << 16).unwrap();
            let w = law.weights();
            assert!((w[0] - 1.0 / a).abs() < 1e-6);
            assert!((w[2] - (a - 1.0) / 2.0).abs() < 1e-15);
            assert!((law.mean() - 1.0).abs() < 1e-9);
            assert!(w.iter().all(|&x| x >= 0.0));
        }
        assert!(OffspringLaw::stable(2.0, 100).is_err());
        assert!(OffspringLaw::stable(1.5, 1).is_err());
    }

    #[test]
    fn infimum_examples() {
        let p = LatticePath::new(1.0, vec![0.0, 1.0, -1.0, 2.0]).unwrap();
        assert_eq!(running_infimum(&p).values, vec![0.0, 0.0, -1.0, -1.0]);
        let p = LatticePath::new(1.0, vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(running_infimum(&p).values, vec![0.0, 0.0, 0.0]);
        let p = LatticePath::new(1.0, vec![0.0, -1.0, -2.0]).unwrap();
        assert_eq!(running_infimum(&p).values, vec![0.0, -1.0, -2.0]);
    }

    #[test]
    fn excursion_examples() {
        let p = LatticePath::new(1.0, vec![0.0, 1.0, 0.0, 2.0, 0.0]).unwrap();
        let e = excursions_above_infimum(&p);
        assert_eq!(e.iter().map(|s| (s.start_index, s.end_index)).collect::<Vec<_>>(), vec![(0, 2), (2, 4)]);

        let p = LatticePath::new(1.0, vec![0.0, -1.0, -2.0, -3.0]).unwrap();
        assert!(excursions_above_infimum(&p).is_empty());

        let p = LatticePath::new(1.0, vec![0.0, 2.0, 1.0, 3.0, 0.0, -1.0, 1.0, -1.0]).unwrap();
        let e = excursions_above_infimum(&p);
        assert_eq!(e.iter().map(|s| (s.start_index, s.end_index)).collect::<Vec<_>>(), vec![(0, 4), (5, 7)]);
        assert_eq!(e[0].local_time_mark, 0.0);
        assert_eq!(e[1].local_time_mark, 1.0);
    }

    #[test]
    fn reflected_height_local_time_matches_infimum_law() {
        // E[L_t] for the reflected sampler equals E[-I_t] = sqrt(4 beta t / pi) for X with variance 2 beta
        let (beta, dt, n) = (1.0, 1e-3, 1000);
        let reps = 4000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for r in 0..reps {
            let (_, l) = sample_reflected_height(beta, dt, n, 100 + r).unwrap();
            let v = *l.values.last().unwrap();
            acc += v;
            acc2 += v * v;
        }
        let m = acc / reps as f64;
        let sd = ((acc2 / reps as f64 - m * m) / reps as f64).sqrt();
        let t = dt * n as f64;
        let target = (4.0 * beta * t / std::f64::consts::PI).sqrt();
        assert!((m - target).abs() < 4.0 * sd, "m={m} target={target} sd={sd}");
    }

    #[test]
    fn csv_header() {
        let p = LatticePath::new(0.5, vec![1.0, 2.0]).unwrap();
        assert_eq!(p.to_csv(), "t,value\n0,1\n0.5,2\n");
    }
}
