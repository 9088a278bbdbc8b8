//! Height process, exploration measure, its dual, pruning and the local time
//! of the height process at 0.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::pathsim::{running_infimum, sample_walk_with_law, LatticePath, OffspringLaw, WalkSkeleton};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeightMode {
    BrownianExact,
    DiscreteSkeleton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightPath {
    pub base: LatticePath,
    pub mode: HeightMode,
}

/// Finite measure on [0, inf): atoms plus a constant density on [0, density_top].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ExplorationMeasure {
    pub atoms: Vec<(f64, f64)>,
    pub continuous_density: f64,
    pub density_top: f64,
}

impl ExplorationMeasure {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>() + self.continuous_density * self.density_top
    }

    /// Supremum of the support (0 for the zero measure).
    pub fn top(&self) -> f64 {
        let a = self.atoms.last().map(|a| a.0).unwrap_or(0.0);
        let d = if self.continuous_density > 0.0 { self.density_top } else { 0.0 };
        a.max(d)
    }

    pub fn is_zero(&self) -> bool {
        self.total_mass() == 0.0
    }
}

pub fn height_brownian(x: &LatticePath, beta: f64) -> Result<HeightPath> {
    if !(beta > 0.0) {
        return domain(format!("beta must be > 0, got {beta}"));
    }
    let inf = running_infimum(x);
    let values = x.values.iter().zip(&inf.values).map(|(a, i)| (a - i) / beta).collect();
    Ok(HeightPath { base: LatticePath::new(x.dt, values)?, mode: HeightMode::BrownianExact })
}

/// Record-count heights: H_k = #{ j < k : S_j = min_{j<=l<=k} S_l }, one value
/// per vertex (per step of the walk).
pub fn height_discrete(w: &WalkSkeleton) -> HeightPath {
    let s = &w.partial_sums;
    let n = w.steps.len().max(1);
    let mut stack: Vec<i64> = Vec::new();
    let mut values = Vec::with_capacity(n);
    for &sk in s.iter().take(n) {
        while let Some(&top) = stack.last() {
            if top > sk {
                stack.pop();
            } else {
                break;
            }
        }
        values.push(stack.len() as f64);
        stack.push(sk);
    }
    HeightPath { base: LatticePath { dt: 1.0, values }, mode: HeightMode::DiscreteSkeleton }
}

/// Lattice approximation of the stable mechanism l^a: the Lukasiewicz walk
/// S of a critical forest with offspring generating function s + (1-s)^a / a,
/// with n = 1/dt vertices per unit time. Returns X_t = c S_{nt} / n^{1/a} and
/// H_t = (n^{1/a} / n) Hd_{nt} / c where Hd is the record-count height and
/// c = a^{1/a} turns the mechanism l^a / a into l^a.
pub fn stable_skeleton(index: f64, horizon: f64, dt: f64, seed: u64) -> Result<(LatticePath, HeightPath)> {
    if !(horizon > 0.0 && dt > 0.0 && dt <= horizon) {
        return domain(format!("need 0 < dt <= horizon, got dt = {dt}, horizon = {horizon}"));
    }
    let law = OffspringLaw::stable(index, 1 << 16)?;
    let steps = (horizon / dt + 1e-9).floor() as usize;
    let w = sample_walk_with_law(&law, steps + 1, seed);
    let n = 1.0 / dt;
    let an = n.powf(1.0 / index);
    let c = index.powf(1.0 / index);
    let x: Vec<f64> = w.partial_sums[..=steps].iter().map(|&s| c * s as f64 / an).collect();
    let hd = height_discrete(&w);
    let h: Vec<f64> = hd.base.values[..=steps].iter().map(|&v| an / n * v / c).collect();
    Ok((LatticePath::new(dt, x)?, HeightPath { base: LatticePath::new(dt, h)?, mode: HeightMode::DiscreteSkeleton }))
}

/// Ancestor scan shared by the discrete exploration measure and its dual:
/// for each j <= k with S_{j-1} <= min_{j<=l<=k} S_l, returns
/// (H_j, min - S_{j-1}, S_j - min) in increasing height order.
fn ladder_scan(w: &WalkSkeleton, h: &HeightPath, k: usize) -> Vec<(f64, f64, f64)> {
    let s = &w.partial_sums;
    let mut out = Vec::new();
    let mut m = s[k];
    let mut j = k;
    while j >= 1 {
        m = m.min(s[j]);
        if s[j - 1] <= m {
            out.push((h.base.values[j], (m - s[j - 1]) as f64, (s[j] - m) as f64));
        }
        j -= 1;
    }
    out.reverse();
    out
}

fn check_discrete(w: &WalkSkeleton, h: &HeightPath, k: usize) -> Result<()> {
    if h.mode != HeightMode::DiscreteSkeleton {
        return domain("expected a discrete-skeleton height path");
    }
    if k >= h.base.values.len() || k >= w.partial_sums.len() {
        return domain(format!("index {k} out of range"));
    }
    Ok(())
}

pub fn exploration_at_discrete(w: &WalkSkeleton, h: &HeightPath, k: usize) -> Result<ExplorationMeasure> {
    check_discrete(w, h, k)?;
    let atoms = ladder_scan(w, h, k).into_iter().filter(|a| a.1 > 0.0).map(|a| (a.0, a.1)).collect();
    Ok(ExplorationMeasure { atoms, continuous_density: 0.0, density_top: 0.0 })
}

pub fn dual_at_discrete(w: &WalkSkeleton, h: &HeightPath, k: usize) -> Result<ExplorationMeasure> {
    check_discrete(w, h, k)?;
    let atoms = ladder_scan(w, h, k).into_iter().filter(|a| a.2 > 0.0).map(|a| (a.0, a.2)).collect();
    Ok(ExplorationMeasure { atoms, continuous_density: 0.0, density_top: 0.0 })
}

/// Total masses (<rho_k,1>, <eta_k,1>) without building the measures.
pub fn discrete_masses(w: &WalkSkeleton, k: usize) -> (f64, f64) {
    let s = &w.partial_sums;
    let (mut r, mut e) = (0i64, 0i64);
    let mut m = s[k];
    let mut j = k;
    while j >= 1 {
        m = m.min(s[j]);
        if s[j - 1] <= m {
            r += m - s[j - 1];
            e += s[j] - m;
        }
        j -= 1;
    }
    (r as f64, e as f64)
}

/// Brownian case: rho_k is beta times Lebesgue measure on [0, H_k].
pub fn exploration_at_brownian(h: &HeightPath, beta: f64, k: usize) -> Result<ExplorationMeasure> {
    if h.mode != HeightMode::BrownianExact {
        return domain("expected a Brownian height path");
    }
    let hk = *h.base.values.get(k).ok_or_else(|| Error::Domain(format!("index {k} out of range")))?;
    if hk == 0.0 {
        return Ok(ExplorationMeasure::zero());
    }
    Ok(ExplorationMeasure { atoms: vec![], continuous_density: beta, density_top: hk })
}

pub fn dual_at_brownian(h: &HeightPath, beta: f64, k: usize) -> Result<ExplorationMeasure> {
    exploration_at_brownian(h, beta, k)
}

/// Removes mass `a` from the top of the support.
pub fn prune(m: &ExplorationMeasure, a: f64) -> Result<ExplorationMeasure> {
    if !(a >= 0.0) {
        return domain(format!("prune amount must be >= 0, got {a}"));
    }
    let total = m.total_mass();
    let mut remaining = (total - a).max(0.0);
    if remaining <= 0.0 {
        return Ok(ExplorationMeasure::zero());
    }
    if a == 0.0 {
        return Ok(m.clone());
    }
    let d = m.continuous_density;
    let top = if d > 0.0 { m.density_top } else { 0.0 };
    let mut atoms = Vec::new();
    let mut new_top = 0.0;
    let mut prev = 0.0f64;
    let mut done = false;
    for &(h, w) in &m.atoms {
        let seg = d * (h.min(top) - prev.min(top)).max(0.0);
        if seg >= remaining && seg > 0.0 {
            new_top = prev.min(top) + remaining / d;
            done = true;
            break;
        }
        remaining -= seg;
        new_top = h.min(top).max(new_top);
        if w >= remaining {
            atoms.push((h, remaining));
            done = true;
            break;
        }
        atoms.push((h, w));
        remaining -= w;
        prev = h;
    }
    if !done && d > 0.0 {
        new_top = prev.min(top) + remaining / d;
    }
    let density_top = if d > 0.0 { new_top.min(top) } else { 0.0 };
    Ok(ExplorationMeasure { atoms, continuous_density: d, density_top })
}

/// L_k = (1/eps) * sum_{i<k} dt 1{H_i < eps}.
pub fn local_time_h_at_zero(h: &HeightPath, eps: f64) -> Result<LatticePath> {
    let dt = h.base.dt;
    if !(eps > dt) {
        return Err(Error::Resolution(format!("eps = {eps} must exceed dt = {dt}")));
    }
    let mut acc = 0.0;
    let mut values = Vec::with_capacity(h.base.len());
    values.push(0.0);
    for &v in &h.base.values[..h.base.len() - 1] {
        if v < eps {
            acc += dt;
        }
        values.push(acc / eps);
    }
    LatticePath::new(dt, values)
}

pub fn default_eps_for(dt: f64) -> f64 {
    10.0 * dt.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walk(s: &[i64]) -> WalkSkeleton {
        WalkSkeleton::from_partial_sums(s.to_vec()).unwrap()
    }

    #[test]
    fn stable_skeleton_laplace_and_shape() {
        let (a, lambda) = (1.5, 0.7);
        let reps = 3000;
        let mut acc = 0.0;
        for seed in 0..reps {
            let (x, h) = stable_skeleton(a, 1.0, 1e-3, seed).unwrap();
            assert_eq!(x.len(), 1001);
            assert_eq!(h.base.len(), 1001);
            assert!(h.base.values.iter().all(|&v| v >= 0.0));
            acc += (-lambda * x.values[1000]).exp();
        }
        let est = acc / reps as f64;
        let exact = (lambda as f64).powf(a).exp();
        assert!((est / exact - 1.0).abs() < 0.04, "{est} vs {exact}");
        assert!(stable_skeleton(2.5, 1.0, 1e-3, 1).is_err());
        assert_eq!(stable_skeleton(1.5, 1.0, 1e-3, 3).unwrap(), stable_skeleton(1.5, 1.0, 1e-3, 3).unwrap());
    }

    #[test]
    fn brownian_height_examples() {
        let x = LatticePath::new(1.0, vec![0.0, 2.0, 1.0]).unwrap();
        assert_eq!(height_brownian(&x, 1.0).unwrap().base.values, vec![0.0, 2.0, 1.0]);
        let x = LatticePath::new(1.0, vec![0.0, -1.0, 1.0]).unwrap();
        assert_eq!(height_brownian(&x, 2.0).unwrap().base.values, vec![0.0, 0.0, 1.0]);
        assert!(height_brownian(&x, 0.0).is_err());
    }

    #[test]
    fn discrete_height_examples() {
        assert_eq!(height_discrete(&walk(&[0, 1, 0, -1])).base.values, vec![0.0, 1.0, 1.0]);
        assert_eq!(height_discrete(&walk(&[0, -1])).base.values, vec![0.0]);
        // root with 3 children, the second of which has one child
        let h = height_discrete(&walk(&[0, 2, 1, 1, 0, -1]));
        assert_eq!(h.base.values, vec![0.0, 1.0, 1.0, 2.0, 1.0]);
    }

    #[test]
    fn discrete_exploration_example() {
        let w = walk(&[0, 2, 1]);
        let h = height_discrete(&WalkSkeleton::from_partial_sums(vec![0, 2, 1, 0]).unwrap());
        let r = exploration_at_discrete(&w, &h, 2).unwrap();
        assert_eq!(r.atoms, vec![(1.0, 1.0)]);
        let e = dual_at_discrete(&w, &h, 2).unwrap();
        assert_eq!(e.atoms, vec![(1.0, 1.0)]);
        // at the root (an excursion endpoint) both vanish
        assert!(exploration_at_discrete(&w, &h, 0).unwrap().is_zero());
        assert!(dual_at_discrete(&w, &h, 0).unwrap().is_zero());
    }

    #[test]
    fn brownian_exploration_example() {
        let h = HeightPath { base: LatticePath::new(1.0, vec![0.0, 2.0]).unwrap(), mode: HeightMode::BrownianExact };
        let r = exploration_at_brownian(&h, 1.0, 1).unwrap();
        assert_eq!(r.total_mass(), 2.0);
        assert!(r.atoms.is_empty());
        assert_eq!(r.top(), 2.0);
        assert_eq!(dual_at_brownian(&h, 1.0, 1).unwrap(), r);
        assert!(exploration_at_brownian(&h, 1.0, 0).unwrap().is_zero());
    }

    #[test]
    fn prune_examples() {
        let m = ExplorationMeasure { atoms: vec![(1.0, 2.0), (3.0, 2.0)], ..Default::default() };
        assert_eq!(prune(&m, 0.0).unwrap(), m);
        assert!(prune(&m, 4.0).unwrap().is_zero());
        assert!(prune(&m, 9.0).unwrap().is_zero());
        assert_eq!(prune(&m, 3.0).unwrap().atoms, vec![(1.0, 1.0)]);
        let d = ExplorationMeasure { atoms: vec![], continuous_density: 1.0, density_top: 2.0 };
        let p = prune(&d, 0.5).unwrap();
        assert!((p.density_top - 1.5).abs() < 1e-15 && p.total_mass() == 1.5);
    }

    #[test]
    fn local_time_examples() {
        let h = HeightPath { base: LatticePath::new(0.1, vec![0.0; 11]).unwrap(), mode: HeightMode::BrownianExact };
        let l = local_time_h_at_zero(&h, 0.5).unwrap();
        assert!((l.values.last().unwrap() - 1.0 / 0.5).abs() < 1e-12);
        let h = HeightPath { base: LatticePath::new(0.1, vec![1.0; 11]).unwrap(), mode: HeightMode::BrownianExact };
        assert!(local_time_h_at_zero(&h, 0.5).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(matches!(local_time_h_at_zero(&h, 0.1), Err(Error::Resolution(_))));
    }

    #[test]
    fn masses_match_measures() {
        let w = crate::pathsim::sample_skip_free_walk(&[0.5, 0.0, 0.5], 400, 3).unwrap();
        let h = height_discrete(&w);
        for k in 0..400 {
            let r = exploration_at_discrete(&w, &h, k).unwrap();
            let e = dual_at_discrete(&w, &h, k).unwrap();
            let (rm, em) = discrete_masses(&w, k);
            assert_eq!(r.total_mass(), rm);
            assert_eq!(e.total_mass(), em);
        }
    }
}
