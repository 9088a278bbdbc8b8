//! Small statistics toolbox: compensated sums, KS tests, chi-square tests.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    let mut s = KahanSum::new();
    xs.iter().for_each(|&x| s.add(x));
    s.value() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let mut s = KahanSum::new();
    xs.iter().for_each(|&x| s.add((x - m) * (x - m)));
    s.value() / (xs.len() as f64 - 1.0)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Two-sided normal quantile z_{1 - alpha/2}.
pub fn z_two_sided(alpha: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - alpha / 2.0)
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // small-x series of the CDF
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let y = -pi2 / (8.0 * x * x);
        let mut s = 0.0;
        for k in 0..50 {
            let j = (2 * k + 1) as f64;
            s += (j * j * y).exp();
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / x * s;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_eff: f64,
}

fn ks_p(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    KsResult { statistic: d, p_value: ks_p(d, n), n_eff: n }
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.partial_cmp(q).unwrap());
    y.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = x[i].min(y[j]);
        while i < n && x[i] <= t {
            i += 1;
        }
        while j < m && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let n_eff = (n * m) as f64 / (n + m) as f64;
    KsResult { statistic: d, p_value: ks_p(d, n_eff), n_eff }
}

pub fn chi2_sf(stat: f64, df: f64) -> f64 {
    if df <= 0.0 {
        return f64::NAN;
    }
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Homogeneity test for two samples of counts over the same cells; cells
/// with zero total are dropped.
pub fn chi2_two_sample(a: &[f64], b: &[f64]) -> ChiSquareResult {
    let na: f64 = a.iter().sum();
    let nb: f64 = b.iter().sum();
    let n = na + nb;
    let mut stat = 0.0;
    let mut cells = 0;
    for (&x, &y) in a.iter().zip(b) {
        let t = x + y;
        if t == 0.0 {
            continue;
        }
        cells += 1;
        let ea = t * na / n;
        let eb = t * nb / n;
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let df = (cells as f64 - 1.0).max(1.0);
    ChiSquareResult { statistic: stat, df, p_value: chi2_sf(stat, df) }
}

/// Goodness of fit of observed counts against expected counts; `fitted` is
/// the number of parameters estimated from the data.
pub fn chi2_gof(observed: &[f64], expected: &[f64], fitted: usize) -> ChiSquareResult {
    let stat: f64 = observed.iter().zip(expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = (observed.len() as f64 - 1.0 - fitted as f64).max(1.0);
    ChiSquareResult { statistic: stat, df, p_value: chi2_sf(stat, df) }
}

/// Merges adjacent cells from the right until each expected count is at least `min_expected`.
pub fn pool_cells(observed: &[f64], expected: &[f64], min_expected: f64) -> (Vec<f64>, Vec<f64>) {
    let mut o = Vec::new();
    let mut e = Vec::new();
    let (mut co, mut ce) = (0.0, 0.0);
    for (&x, &y) in observed.iter().zip(expected) {
        co += x;
        ce += y;
        if ce >= min_expected {
            o.push(co);
            e.push(ce);
            co = 0.0;
            ce = 0.0;
        }
    }
    if ce > 0.0 || co > 0.0 {
        if let (Some(lo), Some(le)) = (o.last_mut(), e.last_mut()) {
            *lo += co;
            *le += ce;
        } else {
            o.push(co);
            e.push(ce);
        }
    }
    (o, e)
}
