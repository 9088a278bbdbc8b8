//! Exit-local-time family over levels of the spatial local time, the
//! additive functional A built two ways, its right inverse and the
//! subordinate height process.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::pathsim::LatticePath;
use crate::snake::SnakeState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AScheme {
    LevelIntegral,
    TipLocaltime,
}

/// Rows L^{r_j} stored sparsely as (time index, increment) events; the
/// increment at index k is the mass added between k and k + 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitFamily {
    pub dt: f64,
    pub n_times: usize,
    pub level_grid: Vec<f64>,
    pub events: Vec<Vec<(u32, f64)>>,
}

impl ExitFamily {
    /// Dense row j on the time lattice.
    pub fn row(&self, j: usize) -> LatticePath {
        let mut v = vec![0.0; self.n_times];
        for &(k, inc) in &self.events[j] {
            v[k as usize + 1] += inc;
        }
        for k in 1..v.len() {
            v[k] += v[k - 1];
        }
        LatticePath { dt: self.dt, values: v }
    }

    pub fn total(&self, j: usize) -> f64 {
        self.events[j].iter().map(|e| e.1).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveFunctional {
    pub a: LatticePath,
    pub scheme: AScheme,
}

impl AdditiveFunctional {
    pub fn total(&self) -> f64 {
        self.a.values.last().copied().unwrap_or(0.0)
    }
}

fn check_eps(st: &SnakeState, eps: f64) -> Result<()> {
    if !(eps > st.motion.dh) {
        return Err(Error::Resolution(format!("eps = {eps} must exceed dh = {}", st.motion.dh)));
    }
    Ok(())
}

/// Max of the tip local time over the run.
pub fn max_tip_local_time(st: &SnakeState) -> f64 {
    (0..st.len()).map(|k| st.tip_values(k).1).fold(f64::NEG_INFINITY, f64::max)
}

/// Uniform grid 0, dr, ..., m dr with m = ceil(max / dr).
pub fn uniform_level_grid(max: f64, dr: f64) -> Result<Vec<f64>> {
    if !(dr > 0.0) {
        return domain("level spacing must be > 0");
    }
    let m = (max.max(0.0) / dr).ceil() as usize;
    Ok((0..=m).map(|j| j as f64 * dr).collect())
}

/// L^{D_r} for every r in the grid: at time k >= 1, every node of the tip path
/// with height in (H_k - eps, H_k) adds dt/eps to the levels r in
/// (loc_parent, loc_node], i.e. the levels whose exit height lies in that
/// window. The mass is recorded on the cell (k - 1, k).
pub fn exit_family(st: &SnakeState, level_grid: &[f64], eps: f64) -> Result<ExitFamily> {
    if level_grid.is_empty() {
        return domain("empty level grid");
    }
    if level_grid.windows(2).any(|w| !(w[1] > w[0])) || level_grid[0] < 0.0 {
        return domain("level grid must be increasing and nonnegative");
    }
    check_eps(st, eps)?;
    let dh = st.motion.dh;
    let w = st.dt / eps;
    let mut events: Vec<Vec<(u32, f64)>> = vec![Vec::new(); level_grid.len()];
    let root = st.nodes[0];
    let root_exits_at = |r: f64| r == root.loc && root.xi.abs() < st.motion.band();
    for k in 1..st.len() {
        let h = st.heights[k];
        let lo = h - eps;
        let mut n = st.tips[k];
        loop {
            let node = st.nodes[n as usize];
            let tau = node.depth as f64 * dh;
            if tau <= lo {
                break;
            }
            if tau < h {
                if node.depth == 0 {
                    for (j, &r) in level_grid.iter().enumerate() {
                        if root_exits_at(r) {
                            events[j].push((k as u32 - 1, w));
                        }
                    }
                } else {
                    let pl = st.nodes[node.parent as usize].loc;
                    if node.loc > pl {
                        // levels r with pl < r <= loc
                        let a = level_grid.partition_point(|&r| r <= pl);
                        let b = level_grid.partition_point(|&r| r <= node.loc);
                        for ev in &mut events[a..b] {
                            ev.push((k as u32 - 1, w));
                        }
                    }
                }
            }
            if node.depth == 0 {
                break;
            }
            n = node.parent;
        }
    }
    for ev in events.iter_mut() {
        ev.sort_by_key(|e| e.0);
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(ev.len());
        for &(k, v) in ev.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == k => last.1 += v,
                _ => merged.push((k, v)),
            }
        }
        *ev = merged;
    }
    Ok(ExitFamily { dt: st.dt, n_times: st.len(), level_grid: level_grid.to_vec(), events })
}

/// Trapezoid weights of a level grid.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut w = vec![0.0; n];
    for j in 0..n.saturating_sub(1) {
        let d = grid[j + 1] - grid[j];
        w[j] += d / 2.0;
        w[j + 1] += d / 2.0;
    }
    w
}

/// A_t = integral over r of L^r_t, trapezoid rule on the level grid.
pub fn additive_a_levels(f: &ExitFamily) -> AdditiveFunctional {
    let w = trapezoid_weights(&f.level_grid);
    let mut inc = vec![0.0; f.n_times];
    for (j, ev) in f.events.iter().enumerate() {
        for &(k, v) in ev {
            inc[k as usize] += w[j] * v;
        }
    }
    let mut values = Vec::with_capacity(f.n_times);
    let mut acc = 0.0;
    for k in 0..f.n_times {
        values.push(acc);
        acc += inc[k];
    }
    AdditiveFunctional { a: LatticePath { dt: f.dt, values }, scheme: AScheme::LevelIntegral }
}

/// Increment of the tip scheme at time k: (dt/eps)(Lambda_hat_k - Lambda_k((H_k - eps)+)).
#[inline]
pub fn tip_increment(st: &SnakeState, k: usize, eps: f64) -> f64 {
    let h = st.heights[k];
    let tip = st.tips[k];
    let top = st.nodes[tip as usize].loc;
    let low = st.loc_at_height(k, (h - eps).max(0.0));
    (st.dt / eps) * (top - low)
}

pub fn additive_a_tip(st: &SnakeState, eps: f64) -> Result<AdditiveFunctional> {
    check_eps(st, eps)?;
    let mut values = Vec::with_capacity(st.len());
    let mut acc = 0.0;
    for k in 0..st.len() {
        acc += tip_increment(st, k, eps);
        values.push(acc);
    }
    Ok(AdditiveFunctional { a: LatticePath { dt: st.dt, values }, scheme: AScheme::TipLocaltime })
}

/// Right inverse of the linearly interpolated A, rounded to the lattice: the
/// left end of the first cell on which A rises above t, i.e. the last index
/// with A <= t. Equals the last index (sigma) for t >= A_infinity.
pub fn inverse_index(a: &AdditiveFunctional, t: f64) -> usize {
    let k = a.a.values.partition_point(|&x| x <= t);
    k.saturating_sub(1)
}

/// Right inverse sampled on the grid 0, da, 2 da, ..., up to A_infinity.
pub fn right_inverse(a: &AdditiveFunctional, da: f64) -> Result<Vec<usize>> {
    if !(da > 0.0) {
        return domain("da must be > 0");
    }
    let n = (a.total() / da).floor() as usize;
    Ok((0..=n).map(|j| inverse_index(a, j as f64 * da)).collect())
}

/// H^A_t = Lambda_hat at the right inverse of t, on the A-time grid of step da.
/// Empty when A is identically 0.
pub fn subordinate_height(st: &SnakeState, a: &AdditiveFunctional, da: f64) -> Result<LatticePath> {
    if a.total() <= 0.0 {
        return Ok(LatticePath { dt: da, values: Vec::new() });
    }
    let inv = right_inverse(a, da)?;
    let values = inv.iter().map(|&k| st.tip_values(k).1).collect();
    Ok(LatticePath { dt: da, values })
}

/// Distance between A_s and A_u in the tree coded by H^A, computed exactly
/// from the lattice: the right inverse visits the increase points of A.
pub fn subordinate_tree_distance(st: &SnakeState, a: &AdditiveFunctional, s: usize, u: usize) -> f64 {
    let (s, u) = if s <= u { (s, u) } else { (u, s) };
    let v = &a.a.values;
    let ks = inverse_index(a, v[s]);
    let ku = inverse_index(a, v[u]);
    let lam = |k: usize| st.tip_values(k).1;
    let mut m = lam(ks).min(lam(ku));
    for k in ks + 1..ku {
        if v[k + 1] > v[k] {
            m = m.min(lam(k));
        }
    }
    (lam(ks) + lam(ku) - 2.0 * m).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportTolerances {
    pub tol_a: f64,
    pub tol_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub symm_diff_measure: f64,
    pub symm_diff_fraction: f64,
    pub hausdorff_gap: f64,
    pub support_a_measure: f64,
    pub support_lambda_measure: f64,
    pub sigma: f64,
    pub tolerances: SupportTolerances,
}

/// Lattice comparison of supp dA with the complement of the constancy
/// intervals of Lambda_hat. Sets are unions of lattice cells [k, k+1].
pub fn support_diagnostic(st: &SnakeState, a: &AdditiveFunctional, tol: &SupportTolerances) -> SupportReport {
    let n = st.len().saturating_sub(1);
    let dt = st.dt;
    let s1: Vec<bool> = (0..n).map(|k| a.a.values[k + 1] - a.a.values[k] > tol.tol_a).collect();
    let lam: Vec<f64> = (0..st.len()).map(|k| st.tip_values(k).1).collect();
    let s2 = nonconstancy_cells(&lam, tol.tol_lambda);
    let diff = s1.iter().zip(&s2).filter(|(x, y)| x != y).count();
    let gap = hausdorff_cells(&s1, &s2) * dt;
    let sigma = n as f64 * dt;
    SupportReport {
        symm_diff_measure: diff as f64 * dt,
        symm_diff_fraction: if n > 0 { diff as f64 / n as f64 } else { 0.0 },
        hausdorff_gap: gap,
        support_a_measure: s1.iter().filter(|&&x| x).count() as f64 * dt,
        support_lambda_measure: s2.iter().filter(|&&x| x).count() as f64 * dt,
        sigma,
        tolerances: tol.clone(),
    }
}

/// Cells not covered by a maximal run on which the oscillation of `lam`
/// stays within `tol`; runs must contain at least one full cell.
pub fn nonconstancy_cells(lam: &[f64], tol: f64) -> Vec<bool> {
    let n = lam.len().saturating_sub(1);
    let mut out = vec![true; n];
    let mut i = 0;
    while i < n {
        let (mut lo, mut hi) = (lam[i], lam[i]);
        let mut j = i;
        while j < n {
            let x = lam[j + 1];
            let (nlo, nhi) = (lo.min(x), hi.max(x));
            if nhi - nlo > tol {
                break;
            }
            lo = nlo;
            hi = nhi;
            j += 1;
        }
        if j > i {
            for c in out.iter_mut().take(j).skip(i) {
                *c = false;
            }
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

/// Hausdorff distance, in cells, between two cell sets (0 if both are
/// empty, the full length if exactly one is).
pub fn hausdorff_cells(a: &[bool], b: &[bool]) -> f64 {
    let n = a.len();
    let ea = a.iter().any(|&x| x);
    let eb = b.iter().any(|&x| x);
    match (ea, eb) {
        (false, false) => return 0.0,
        (true, false) | (false, true) => return n as f64,
        _ => {}
    }
    let dist_to = |set: &[bool]| -> Vec<usize> {
        let mut d = vec![usize::MAX; n];
        let mut last = None;
        for i in 0..n {
            if set[i] {
                last = Some(i);
            }
            if let Some(l) = last {
                d[i] = i - l;
            }
        }
        last = None;
        for i in (0..n).rev() {
            if set[i] {
                last = Some(i);
            }
            if let Some(l) = last {
                d[i] = d[i].min(l - i);
            }
        }
        d
    };
    let da = dist_to(a);
    let db = dist_to(b);
    let h1 = (0..n).filter(|&i| a[i]).map(|i| db[i]).max().unwrap_or(0);
    let h2 = (0..n).filter(|&i| b[i]).map(|i| da[i]).max().unwrap_or(0);
    h1.max(h2) as f64
}

/// CSV with header `t,A`.
pub fn a_csv(a: &AdditiveFunctional) -> String {
    let mut s = String::from("t,A\n");
    for (k, v) in a.a.values.iter().enumerate() {
        s.push_str(&format!("{},{}\n", k as f64 * a.a.dt, v));
    }
    s
}

/// CSV with header `t,H_A`.
pub fn h_a_csv(h: &LatticePath) -> String {
    let mut s = String::from("t,H_A\n");
    for (k, v) in h.values.iter().enumerate() {
        s.push_str(&format!("{},{}\n", k as f64 * h.dt, v));
    }
    s
}
