//! Snake driven by a height path, with spatial motion a linear Brownian
//! motion carrying its local time at 0. Paths live on a height grid of step
//! `dh`; the path of time s is the chain of ancestors of its tip node.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exploration::HeightPath;
use crate::pathsim::{HeightStep, LatticePath, ReflectedHeight};
use crate::rng::{rng_from_seed, SimRng};

/// How the local time at 0 is accumulated along a spatial path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalTimeScheme {
    /// Exact joint law of (endpoint, local time) of the Brownian bridge on
    /// each grid segment (semimartingale normalization).
    BridgeExact,
    /// (1/(2 eps_loc)) * occupation time of (-eps_loc, eps_loc).
    Occupation { eps_loc: f64 },
}

impl LocalTimeScheme {
    pub fn occupation_default(dh: f64) -> Self {
        LocalTimeScheme::Occupation { eps_loc: 5.0 * dh.sqrt() }
    }
}

/// Brownian motion plus local time at 0, stepped on a height grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialMotion {
    pub dh: f64,
    pub scheme: LocalTimeScheme,
}

impl SpatialMotion {
    pub fn new(dh: f64, scheme: LocalTimeScheme) -> Result<Self> {
        if !(dh > 0.0) || !dh.is_finite() {
            return domain(format!("dh must be > 0, got {dh}"));
        }
        if let LocalTimeScheme::Occupation { eps_loc } = scheme {
            if !(eps_loc > 0.0) {
                return domain("eps_loc must be > 0");
            }
        }
        Ok(SpatialMotion { dh, scheme })
    }

    pub fn bridge_exact(dh: f64) -> Result<Self> {
        Self::new(dh, LocalTimeScheme::BridgeExact)
    }

    /// Half-width of the band in which the spatial value counts as "at 0".
    pub fn band(&self) -> f64 {
        0.5 * self.dh.sqrt()
    }

    #[inline]
    pub fn next<R: Rng + ?Sized>(&self, xi: f64, loc: f64, rng: &mut R) -> (f64, f64) {
        let z: f64 = rng.sample(StandardNormal);
        let b = xi + self.dh.sqrt() * z;
        match self.scheme {
            LocalTimeScheme::BridgeExact => {
                let e: f64 = rng.sample(Exp1);
                let d = b - xi;
                let l = (d * d + 2.0 * self.dh * e).sqrt() - xi.abs() - b.abs();
                (b, if l > 0.0 { loc + l } else { loc })
            }
            LocalTimeScheme::Occupation { eps_loc } => {
                let inc = if xi.abs() < eps_loc { self.dh / (2.0 * eps_loc) } else { 0.0 };
                (b, loc + inc)
            }
        }
    }

    #[inline]
    pub fn depth_of(&self, h: f64) -> usize {
        let d = (h / self.dh).floor();
        if d <= 0.0 {
            0
        } else {
            d as usize
        }
    }
}

/// One spatial path sampled directly on `n` grid steps.
pub fn sample_spatial_path<R: Rng + ?Sized>(motion: &SpatialMotion, x0: f64, loc0: f64, n: usize, rng: &mut R) -> SpatialPath {
    let mut xi = Vec::with_capacity(n + 1);
    let mut loc = Vec::with_capacity(n + 1);
    let (mut x, mut l) = (x0, loc0);
    xi.push(x);
    loc.push(l);
    for _ in 0..n {
        let (a, b) = motion.next(x, l, rng);
        x = a;
        l = b;
        xi.push(x);
        loc.push(l);
    }
    SpatialPath { dh: motion.dh, xi, loc }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialPath {
    pub dh: f64,
    pub xi: Vec<f64>,
    pub loc: Vec<f64>,
}

impl SpatialPath {
    pub fn lifetime(&self) -> f64 {
        (self.xi.len() - 1) as f64 * self.dh
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    /// Complement of the single point (0, r) in space x local time.
    PuncturedLevel { r: f64 },
    /// Complement of the point 0 in space.
    PuncturedSpace,
}

/// Exit test for a node given the previous node on the same path. `first`
/// marks the root of the path.
#[inline]
fn node_exits(d: &DomainSpec, motion: &SpatialMotion, prev: Option<(f64, f64)>, xi: f64, loc: f64) -> bool {
    match (d, prev) {
        (DomainSpec::PuncturedLevel { r }, None) => loc == *r && xi.abs() < motion.band(),
        (DomainSpec::PuncturedLevel { r }, Some((_, pl))) => pl < *r && loc >= *r,
        (DomainSpec::PuncturedSpace, None) => xi.abs() < motion.band(),
        (DomainSpec::PuncturedSpace, Some((_, pl))) => match motion.scheme {
            LocalTimeScheme::BridgeExact => loc > pl,
            LocalTimeScheme::Occupation { .. } => xi.abs() < motion.band(),
        },
    }
}

/// First grid height at which the path leaves the domain, or +infinity.
pub fn exit_time(p: &SpatialPath, d: &DomainSpec, motion: &SpatialMotion) -> f64 {
    for j in 0..p.xi.len() {
        let prev = if j == 0 { None } else { Some((p.xi[j - 1], p.loc[j - 1])) };
        if node_exits(d, motion, prev, p.xi[j], p.loc[j]) {
            return j as f64 * p.dh;
        }
    }
    f64::INFINITY
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub xi: f64,
    pub loc: f64,
    pub parent: u32,
    pub depth: u32,
}

pub const NO_EXIT: u32 = u32::MAX;

/// Stored snake: heights, within-step minima, a persistent node arena and
/// the tip node of every time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnakeState {
    pub dt: f64,
    pub motion: SpatialMotion,
    pub heights: Vec<f64>,
    pub step_min: Vec<f64>,
    pub nodes: Vec<Node>,
    pub tips: Vec<u32>,
}

impl SnakeState {
    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    pub fn sigma(&self) -> f64 {
        (self.heights.len().max(1) - 1) as f64 * self.dt
    }

    pub fn root(&self) -> (f64, f64) {
        (self.nodes[0].xi, self.nodes[0].loc)
    }

    pub fn ancestor_at_depth(&self, mut n: u32, depth: u32) -> u32 {
        while self.nodes[n as usize].depth > depth {
            n = self.nodes[n as usize].parent;
        }
        n
    }

    /// Spatial path W_s (root to tip).
    pub fn path_at(&self, s: usize) -> SpatialPath {
        let mut chain = Vec::new();
        let mut n = self.tips[s];
        loop {
            chain.push(n);
            if n == 0 {
                break;
            }
            n = self.nodes[n as usize].parent;
        }
        chain.reverse();
        SpatialPath {
            dh: self.motion.dh,
            xi: chain.iter().map(|&i| self.nodes[i as usize].xi).collect(),
            loc: chain.iter().map(|&i| self.nodes[i as usize].loc).collect(),
        }
    }

    pub fn tip_values(&self, s: usize) -> (f64, f64) {
        let n = &self.nodes[self.tips[s] as usize];
        (n.xi, n.loc)
    }

    /// Local time carried by the path of time s at height h <= H_s.
    pub fn loc_at_height(&self, s: usize, h: f64) -> f64 {
        let d = self.motion.depth_of(h.max(0.0)) as u32;
        let n = self.ancestor_at_depth(self.tips[s], d);
        self.nodes[n as usize].loc
    }

    /// Per-node exit depth from `d` (NO_EXIT when the path to the node stays inside).
    pub fn exit_depths(&self, d: &DomainSpec) -> Vec<u32> {
        let mut out = vec![NO_EXIT; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if i == 0 {
                if node_exits(d, &self.motion, None, n.xi, n.loc) {
                    out[0] = 0;
                }
                continue;
            }
            let p = &self.nodes[n.parent as usize];
            out[i] = if out[n.parent as usize] != NO_EXIT {
                out[n.parent as usize]
            } else if node_exits(d, &self.motion, Some((p.xi, p.loc)), n.xi, n.loc) {
                n.depth
            } else {
                NO_EXIT
            };
        }
        out
    }

    /// Per-time exit height tau_D(W_s) (+infinity when none).
    pub fn exit_heights(&self, d: &DomainSpec) -> Vec<f64> {
        let ed = self.exit_depths(d);
        self.tips
            .iter()
            .map(|&t| {
                let e = ed[t as usize];
                if e == NO_EXIT {
                    f64::INFINITY
                } else {
                    e as f64 * self.motion.dh
                }
            })
            .collect()
    }

    /// CSV text with header `t,H,W_hat,Lambda_hat`.
    pub fn tips_csv(&self) -> String {
        let mut s = String::from("t,H,W_hat,Lambda_hat\n");
        for k in 0..self.len() {
            let (w, l) = self.tip_values(k);
            s.push_str(&format!("{},{},{},{}\n", k as f64 * self.dt, self.heights[k], w, l));
        }
        s
    }
}

/// Grows a snake along `heights` with within-step minima `step_min`
/// (length one less than `heights`), starting from the point (x0, loc0).
pub fn grow_snake_with_minima(
    heights: &[f64],
    step_min: &[f64],
    dt: f64,
    motion: SpatialMotion,
    x0: f64,
    loc0: f64,
    seed: u64,
) -> Result<SnakeState> {
    if heights.is_empty() {
        return domain("need at least one height");
    }
    if step_min.len() + 1 != heights.len() {
        return domain("step_min must have one entry per step");
    }
    if heights.iter().any(|&h| !(h >= 0.0)) {
        return domain("heights must be nonnegative");
    }
    let mut rng = rng_from_seed(seed);
    let mut nodes = vec![Node { xi: x0, loc: loc0, parent: 0, depth: 0 }];
    let mut tips = Vec::with_capacity(heights.len());
    let mut tip: u32 = 0;
    let grow = |nodes: &mut Vec<Node>, from: u32, to_depth: u32, rng: &mut SimRng| -> u32 {
        let mut cur = from;
        while nodes[cur as usize].depth < to_depth {
            let c = nodes[cur as usize];
            let (xi, loc) = motion.next(c.xi, c.loc, rng);
            nodes.push(Node { xi, loc, parent: cur, depth: c.depth + 1 });
            cur = (nodes.len() - 1) as u32;
        }
        cur
    };
    tip = grow(&mut nodes, tip, motion.depth_of(heights[0]) as u32, &mut rng);
    tips.push(tip);
    let mut state = SnakeState { dt, motion, heights: heights.to_vec(), step_min: step_min.to_vec(), nodes: Vec::new(), tips: Vec::new() };
    for k in 0..step_min.len() {
        let m = step_min[k].min(heights[k]).min(heights[k + 1]).max(0.0);
        let keep = motion.depth_of(m) as u32;
        let mut n = tip;
        while nodes[n as usize].depth > keep {
            n = nodes[n as usize].parent;
        }
        tip = grow(&mut nodes, n, motion.depth_of(heights[k + 1]) as u32, &mut rng);
        tips.push(tip);
    }
    state.nodes = nodes;
    state.tips = tips;
    Ok(state)
}

/// Grows a snake from the point (0, 0) along a height path, using the
/// endpoint minimum of each step.
pub fn grow_snake(h: &HeightPath, motion: SpatialMotion, seed: u64) -> Result<SnakeState> {
    let v = &h.base.values;
    let mins: Vec<f64> = v.windows(2).map(|w| w[0].min(w[1])).collect();
    grow_snake_with_minima(v, &mins, h.base.dt, motion, 0.0, 0.0, seed)
}

pub fn tip_processes(st: &SnakeState) -> (LatticePath, LatticePath) {
    let (w, l): (Vec<f64>, Vec<f64>) = (0..st.len()).map(|k| st.tip_values(k)).unzip();
    (LatticePath { dt: st.dt, values: w }, LatticePath { dt: st.dt, values: l })
}

/// Keeps the times s with H_s <= tau_D(W_s), in order.
pub fn truncate(st: &SnakeState, d: &DomainSpec) -> SnakeState {
    let tau = st.exit_heights(d);
    let keep: Vec<usize> = (0..st.len()).filter(|&k| st.heights[k] <= tau[k]).collect();
    let mut heights = Vec::with_capacity(keep.len());
    let mut tips = Vec::with_capacity(keep.len());
    let mut step_min = Vec::with_capacity(keep.len().saturating_sub(1));
    for (i, &k) in keep.iter().enumerate() {
        heights.push(st.heights[k]);
        tips.push(st.tips[k]);
        if i > 0 {
            let prev = keep[i - 1];
            let m = st.step_min[prev..k].iter().cloned().fold(f64::INFINITY, f64::min);
            step_min.push(m);
        }
    }
    SnakeState { dt: st.dt, motion: st.motion, heights, step_min, nodes: st.nodes.clone(), tips }
}

/// L_s = (1/eps) * sum_{u <= s} dt 1{tau(W_u) < H_u < tau(W_u) + eps}.
pub fn exit_local_time(st: &SnakeState, d: &DomainSpec, eps: f64) -> Result<LatticePath> {
    if !(eps > st.motion.dh) {
        return Err(Error::Resolution(format!("eps = {eps} must exceed dh = {}", st.motion.dh)));
    }
    let tau = st.exit_heights(d);
    let mut values = Vec::with_capacity(st.len());
    let mut acc = 0.0;
    for k in 0..st.len() {
        let h = st.heights[k];
        if tau[k] < h && h < tau[k] + eps {
            acc += st.dt / eps;
        }
        values.push(acc);
    }
    LatticePath::new(st.dt, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainExcursion {
    /// Last index before the excursion (H <= tau there).
    pub a: usize,
    /// First index after the excursion.
    pub b: usize,
    /// Exit point (spatial value, local time) from which the excursion starts.
    pub boundary_point: (f64, f64),
    pub exit_height: f64,
    #[serde(skip)]
    pub state: Option<SnakeState>,
}

/// Maximal time intervals on which H_s > tau_D(W_s) with the same exit node.
/// Each sub-state is re-rooted at the exit node and translated so that it
/// starts exactly at the boundary point ((0, r) for a punctured level).
pub fn excursions_from_domain(st: &SnakeState, d: &DomainSpec, with_states: bool) -> Vec<DomainExcursion> {
    let ed = st.exit_depths(d);
    let dh = st.motion.dh;
    let exit_node = |k: usize| -> Option<u32> {
        let t = st.tips[k];
        let e = ed[t as usize];
        if e == NO_EXIT || (st.heights[k] <= e as f64 * dh) {
            None
        } else {
            Some(st.ancestor_at_depth(t, e))
        }
    };
    let mut out = Vec::new();
    let n = st.len();
    let mut k = 0;
    while k < n {
        let Some(en) = exit_node(k) else {
            k += 1;
            continue;
        };
        let start = k;
        let tau = st.nodes[en as usize].depth as f64 * dh;
        let mut j = k + 1;
        while j < n && st.step_min[j - 1] > tau && exit_node(j) == Some(en) {
            j += 1;
        }
        let a = start.saturating_sub(1);
        let b = j.min(n - 1);
        let node = st.nodes[en as usize];
        let boundary = match d {
            DomainSpec::PuncturedLevel { r } => (0.0, *r),
            DomainSpec::PuncturedSpace => (0.0, node.loc),
        };
        let state = if with_states { Some(reroot(st, en, start, j, boundary)) } else { None };
        out.push(DomainExcursion { a, b, boundary_point: boundary, exit_height: tau, state });
        k = j;
    }
    out
}

fn reroot(st: &SnakeState, en: u32, start: usize, end: usize, boundary: (f64, f64)) -> SnakeState {
    let base = st.nodes[en as usize];
    let (dx, dl) = (boundary.0 - base.xi, boundary.1 - base.loc);
    let tau = base.depth as f64 * st.motion.dh;
    let mut map = std::collections::HashMap::new();
    let mut nodes = vec![Node { xi: boundary.0, loc: boundary.1, parent: 0, depth: 0 }];
    map.insert(en, 0u32);
    let mut tips = vec![0u32];
    let mut heights = vec![0.0];
    let mut step_min = Vec::new();
    for k in start..end {
        let mut chain = Vec::new();
        let mut c = st.tips[k];
        while !map.contains_key(&c) {
            chain.push(c);
            c = st.nodes[c as usize].parent;
        }
        for &old in chain.iter().rev() {
            let o = st.nodes[old as usize];
            let parent = map[&o.parent];
            nodes.push(Node { xi: o.xi + dx, loc: o.loc + dl, parent, depth: o.depth - base.depth });
            map.insert(old, (nodes.len() - 1) as u32);
        }
        tips.push(map[&st.tips[k]]);
        step_min.push(if k == start { 0.0 } else { (st.step_min[k - 1] - tau).max(0.0) });
        heights.push((st.heights[k] - tau).max(0.0));
    }
    heights.push(0.0);
    tips.push(0);
    step_min.push(0.0);
    SnakeState { dt: st.dt, motion: st.motion, heights, step_min, nodes, tips }
}

/// Atoms (exit point, mass) of the exit measure; consecutive increments with
/// the same exit node are merged.
pub fn exit_measure(st: &SnakeState, d: &DomainSpec, eps: f64) -> Result<Vec<((f64, f64), f64)>> {
    let l = exit_local_time(st, d, eps)?;
    let ed = st.exit_depths(d);
    let mut atoms: Vec<((f64, f64), f64)> = Vec::new();
    let mut last_node = NO_EXIT;
    for k in 0..st.len().saturating_sub(1) {
        let dl = l.values[k + 1] - l.values[k];
        if dl <= 0.0 {
            continue;
        }
        let t = st.tips[k + 1];
        let en = st.ancestor_at_depth(t, ed[t as usize]);
        let n = st.nodes[en as usize];
        if en == last_node {
            atoms.last_mut().unwrap().1 += dl;
        } else {
            atoms.push(((n.xi, n.loc), dl));
            last_node = en;
        }
    }
    Ok(atoms)
}

/// Streaming path storage for Monte Carlo: only the current path is kept,
/// indexed by depth.
#[derive(Debug, Clone)]
pub struct PathStack {
    pub motion: SpatialMotion,
    pub xi: Vec<f64>,
    pub loc: Vec<f64>,
}

impl PathStack {
    pub fn new(motion: SpatialMotion, x0: f64, loc0: f64) -> Self {
        PathStack { motion, xi: vec![x0], loc: vec![loc0] }
    }

    pub fn reset(&mut self, x0: f64, loc0: f64) {
        self.xi.clear();
        self.loc.clear();
        self.xi.push(x0);
        self.loc.push(loc0);
    }

    #[inline]
    pub fn tip_depth(&self) -> usize {
        self.xi.len() - 1
    }

    #[inline]
    pub fn tip(&self) -> (f64, f64) {
        (*self.xi.last().unwrap(), *self.loc.last().unwrap())
    }

    #[inline]
    pub fn truncate_to_depth(&mut self, d: usize) {
        if d + 1 < self.xi.len() {
            self.xi.truncate(d + 1);
            self.loc.truncate(d + 1);
        }
    }

    #[inline]
    pub fn grow_to_depth<R: Rng + ?Sized>(&mut self, d: usize, rng: &mut R) {
        while self.xi.len() <= d {
            let (x, l) = self.tip();
            let (nx, nl) = self.motion.next(x, l, rng);
            self.xi.push(nx);
            self.loc.push(nl);
        }
    }

    /// Applies one height step: erase down to the step minimum, grow to the new height.
    #[inline]
    pub fn apply<R: Rng + ?Sized>(&mut self, step_min: f64, new_h: f64, rng: &mut R) {
        self.truncate_to_depth(self.motion.depth_of(step_min));
        self.grow_to_depth(self.motion.depth_of(new_h), rng);
    }

    #[inline]
    pub fn loc_at_height(&self, h: f64) -> f64 {
        let d = self.motion.depth_of(h.max(0.0)).min(self.tip_depth());
        self.loc[d]
    }
}

/// One excursion of the reflected height process above 0, with its step
/// minima: heights start and end at 0.
#[derive(Debug, Clone)]
pub struct HeightExcursion {
    pub heights: Vec<f64>,
    pub step_min: Vec<f64>,
}

/// Splits the reflected height process into excursions. The state after a
/// step that touched 0 opens the next excursion.
pub struct ExcursionSource {
    pub stepper: ReflectedHeight,
    pub h: f64,
    pub local_time: f64,
    /// Mirror for the height (+infinity for none).
    pub ceiling: f64,
}

impl ExcursionSource {
    pub fn new(stepper: ReflectedHeight) -> Self {
        ExcursionSource { stepper, h: 0.0, local_time: 0.0, ceiling: f64::INFINITY }
    }

    pub fn with_ceiling(stepper: ReflectedHeight, ceiling: f64) -> Self {
        ExcursionSource { stepper, h: 0.0, local_time: 0.0, ceiling }
    }

    #[inline]
    fn raw_step<R: Rng + ?Sized>(&self, h: f64, rng: &mut R) -> HeightStep {
        if self.ceiling.is_finite() {
            self.stepper.step_with_ceiling(h, self.ceiling, rng)
        } else {
            self.stepper.step(h, rng)
        }
    }

    /// Starts the next excursion and returns its first positive height. The
    /// state left by the step that closed the previous excursion is reused;
    /// from a cold start (or after `abandon`) a step from 0 is taken.
    pub fn open<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        if self.h <= 0.0 {
            let s = self.raw_step(0.0, rng);
            self.local_time += s.local_time;
            self.h = s.h;
        }
        self.h
    }

    /// Records a step that touched 0, closing the current excursion.
    #[inline]
    pub fn close(&mut self, s: HeightStep) {
        self.local_time += s.local_time;
        self.h = s.h;
    }

    /// Drops the rest of the current excursion; the next one starts at the root.
    pub fn abandon(&mut self) {
        self.h = 0.0;
    }

    /// Advances inside the current excursion. `None` means the excursion ended
    /// during this step (the step touched 0).
    #[inline]
    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<HeightStep> {
        let s = self.raw_step(self.h, rng);
        if s.local_time > 0.0 {
            self.close(s);
            None
        } else {
            self.h = s.h;
            Some(s)
        }
    }

    /// Same as `advance`, after the caller moved the height to `h`.
    #[inline]
    pub fn advance_from<R: Rng + ?Sized>(&mut self, h: f64, rng: &mut R) -> Option<HeightStep> {
        self.h = h;
        self.advance(rng)
    }

    /// Samples a complete excursion; gives up (returns `None`) past `max_steps`.
    pub fn sample<R: Rng + ?Sized>(&mut self, max_steps: usize, rng: &mut R) -> Option<HeightExcursion> {
        let mut heights = vec![0.0, self.open(rng)];
        let mut step_min = vec![0.0];
        loop {
            if heights.len() > max_steps {
                self.abandon();
                return None;
            }
            match self.advance(rng) {
                Some(s) => {
                    heights.push(s.h);
                    step_min.push(s.min);
                }
                None => {
                    heights.push(0.0);
                    step_min.push(0.0);
                    return Some(HeightExcursion { heights, step_min });
                }
            }
        }
    }
}

/// Samples excursions until one reaches height `min_height` (and stays below
/// `max_steps` steps). Returns the excursion and the number rejected.
pub fn sample_tall_excursion<R: Rng + ?Sized>(
    source: &mut ExcursionSource,
    min_height: f64,
    max_steps: usize,
    rng: &mut R,
) -> (HeightExcursion, usize) {
    let mut rejected = 0;
    loop {
        match source.sample(max_steps, rng) {
            Some(e) if e.heights.iter().cloned().fold(0.0, f64::max) >= min_height => return (e, rejected),
            _ => rejected += 1,
        }
    }
}
