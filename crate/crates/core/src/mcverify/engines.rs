//! Streaming snake engines: one excursion at a time, only the current path
//! in memory.

use rand::Rng;

use crate::snake::{ExcursionSource, PathStack};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassRun {
    pub a: f64,
    pub steps: usize,
    pub sigma: f64,
    pub stopped: bool,
    pub capped: bool,
}

/// Tip-scheme increment at the current state of the stack.
#[inline]
pub fn tip_a_increment(stack: &PathStack, h: f64, dt: f64, eps: f64) -> f64 {
    let (_, top) = stack.tip();
    (dt / eps) * (top - stack.loc_at_height(h - eps))
}

/// Runs one excursion of the snake started from (0, 0), accumulating the
/// additive functional A; stops once A >= `a_stop` (the rest of the
/// excursion is discarded) or after `max_steps` steps.
pub fn total_mass_excursion<R: Rng + ?Sized>(
    src: &mut ExcursionSource,
    stack: &mut PathStack,
    eps: f64,
    a_stop: f64,
    max_steps: usize,
    rng: &mut R,
) -> MassRun {
    let dt = src.stepper.dt;
    let h1 = src.open(rng);
    stack.reset(0.0, 0.0);
    stack.apply(0.0, h1, rng);
    let mut a = tip_a_increment(stack, h1, dt, eps);
    let mut steps = 1;
    loop {
        if a >= a_stop {
            src.abandon();
            return MassRun { a, steps, sigma: steps as f64 * dt, stopped: true, capped: false };
        }
        if steps >= max_steps {
            src.abandon();
            return MassRun { a, steps, sigma: steps as f64 * dt, stopped: false, capped: true };
        }
        steps += 1;
        match src.advance(rng) {
            Some(s) => {
                stack.apply(s.min, s.h, rng);
                a += tip_a_increment(stack, s.h, dt, eps);
            }
            None => return MassRun { a, steps, sigma: steps as f64 * dt, stopped: false, capped: false },
        }
    }
}

/// First exit depth along a stack path, kept up to date as the stack is
/// truncated and grown. With `level = None` the domain is the punctured
/// space (exit at the first visit of 0); with `Some(r)` it is the
/// punctured level (exit when the local time reaches r).
#[derive(Debug, Clone, Copy, Default)]
pub struct ExitTracker {
    pub level: Option<f64>,
    pub depth: Option<usize>,
    scanned: usize,
}

impl ExitTracker {
    pub fn new(level: Option<f64>) -> Self {
        ExitTracker { level, depth: None, scanned: 0 }
    }

    pub fn reset(&mut self, stack: &PathStack) {
        let in_band = stack.xi[0].abs() < stack.motion.band();
        let root = match self.level {
            None => in_band,
            Some(r) => in_band && stack.loc[0] == r,
        };
        self.depth = if root { Some(0) } else { None };
        self.scanned = 0;
    }

    #[inline]
    fn crosses(&self, prev: f64, cur: f64) -> bool {
        match self.level {
            None => cur > prev,
            Some(r) => prev < r && cur >= r,
        }
    }

    /// Call after `stack` changed; `kept` is the depth down to which the
    /// path was preserved.
    #[inline]
    pub fn update(&mut self, stack: &PathStack, kept: usize) {
        if let Some(d) = self.depth {
            if d <= kept {
                return;
            }
            self.depth = None;
        }
        self.scanned = self.scanned.min(kept);
        let top = stack.tip_depth();
        for j in self.scanned + 1..=top {
            if self.crosses(stack.loc[j - 1], stack.loc[j]) {
                self.depth = Some(j);
                self.scanned = j;
                return;
            }
        }
        self.scanned = top;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitRun {
    /// Exit local time L^{E*}_sigma.
    pub l: f64,
    pub steps: usize,
    pub capped: bool,
}

/// One excursion of the snake started from (y, 0), with the height mirrored
/// at tau(W) + eps once the current path has left the domain (the excised
/// time does not contribute to the exit local time) and at the fixed
/// ceiling `k_max`.
#[allow(clippy::too_many_arguments)]
pub fn exit_local_time_excursion<R: Rng + ?Sized>(
    src: &mut ExcursionSource,
    stack: &mut PathStack,
    level: Option<f64>,
    y: f64,
    eps: f64,
    k_max: f64,
    max_steps: usize,
    rng: &mut R,
) -> ExitRun {
    let stepper = src.stepper;
    let dt = stepper.dt;
    let dh = stack.motion.dh;
    stack.reset(y, 0.0);
    let mut tr = ExitTracker::new(level);
    tr.reset(stack);
    let mut h = src.open(rng).min(k_max);
    let mut min = 0.0;
    let mut l = 0.0;
    let mut steps = 0;
    loop {
        let kept = stack.motion.depth_of(min).min(stack.tip_depth());
        stack.truncate_to_depth(kept);
        tr.update(stack, kept);
        let target = stack.motion.depth_of(h);
        if tr.depth.is_none() {
            let before = stack.tip_depth();
            stack.grow_to_depth(target, rng);
            tr.update(stack, before);
        } else {
            stack.grow_to_depth(target, rng);
        }
        if let Some(d) = tr.depth {
            let tau = d as f64 * dh;
            let b = tau + eps;
            if h > b {
                // excursion above the barrier started inside this step
                h = (2.0 * b - h).max(tau);
                stack.truncate_to_depth(stack.motion.depth_of(h));
            }
            if tau < h && h < b {
                l += dt / eps;
            }
        }
        steps += 1;
        if steps >= max_steps {
            src.abandon();
            return ExitRun { l, steps, capped: true };
        }
        let ceiling = match tr.depth {
            Some(d) => (d as f64 * dh + eps).min(k_max),
            None => k_max,
        };
        let s = stepper.step_with_ceiling(h, ceiling, rng);
        if s.local_time > 0.0 {
            src.close(s);
            return ExitRun { l, steps, capped: false };
        }
        h = s.h;
        min = s.min;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecialMarkovRun {
    /// Exit local time from the punctured level r.
    pub exit_local_time: f64,
    /// Sub-excursions outside the domain whose tip local time rises by delta
    /// above the exit point.
    pub count: u32,
    /// Time spent inside the domain.
    pub inside_time: f64,
    pub steps: usize,
    pub capped: bool,
}

/// One excursion of the snake from (0, 0) for the special Markov check.
/// Sub-excursions above the exit height are followed until they either
/// return to it or reach local time delta above their starting point; the
/// latter are counted and the rest of them is excised (the height is put
/// back at the exit height).
pub fn special_markov_excursion<R: Rng + ?Sized>(
    src: &mut ExcursionSource,
    stack: &mut PathStack,
    r: f64,
    delta: f64,
    eps: f64,
    max_inside_steps: usize,
    max_steps: usize,
    rng: &mut R,
) -> SpecialMarkovRun {
    let dt = src.stepper.dt;
    let dh = stack.motion.dh;
    stack.reset(0.0, 0.0);
    let mut tr = ExitTracker::new(Some(r));
    tr.reset(stack);
    let mut h = src.open(rng);
    let mut min = 0.0;
    let (mut l, mut count, mut inside, mut steps) = (0.0, 0u32, 0usize, 0usize);
    loop {
        let kept = stack.motion.depth_of(min).min(stack.tip_depth());
        stack.truncate_to_depth(kept);
        tr.update(stack, kept);
        let before = stack.tip_depth();
        stack.grow_to_depth(stack.motion.depth_of(h), rng);
        tr.update(stack, before);
        match tr.depth {
            Some(d) if h > d as f64 * dh => {
                let tau = d as f64 * dh;
                if h < tau + eps {
                    l += dt / eps;
                }
                if stack.tip().1 >= stack.loc[d] + delta {
                    count += 1;
                    h = tau;
                    stack.truncate_to_depth(d);
                }
            }
            _ => inside += 1,
        }
        steps += 1;
        if inside >= max_inside_steps || steps >= max_steps {
            src.abandon();
            return SpecialMarkovRun { exit_local_time: l, count, inside_time: inside as f64 * dt, steps, capped: true };
        }
        match src.advance_from(h, rng) {
            Some(s) => {
                h = s.h;
                min = s.min;
            }
            None => {
                return SpecialMarkovRun { exit_local_time: l, count, inside_time: inside as f64 * dt, steps, capped: false };
            }
        }
    }
}

/// Leaf values and consecutive minima of the tree spanned by marks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarkRun {
    pub leaves: Vec<f64>,
    pub mins: Vec<f64>,
    pub a: f64,
    pub steps: usize,
    pub capped: bool,
}

/// Runs one snake excursion from (0, 0) and records the subordinate height
/// at the A-values `marks` (increasing). The increment of A at a step is
/// spread uniformly over the local-time levels between Λ(H - ε) and the tip
/// value; a mark is sent to the level at its position inside the increment.
/// Minima between marks are taken over the tip values at left ends of cells
/// where A increases. Stops after the last mark.
pub fn marked_excursion<R: Rng + ?Sized>(
    src: &mut ExcursionSource,
    stack: &mut PathStack,
    eps: f64,
    marks: &[f64],
    max_steps: usize,
    rng: &mut R,
) -> MarkRun {
    let dt = src.stepper.dt;
    let mut run = MarkRun::default();
    let h1 = src.open(rng);
    stack.reset(0.0, 0.0);
    let mut prev = 0.0;
    let mut running = f64::INFINITY;
    let mut h = h1;
    let mut min = 0.0;
    loop {
        stack.apply(min, h, rng);
        let top = stack.tip().1;
        let low = stack.loc_at_height(h - eps);
        let inc = (dt / eps) * (top - low);
        run.steps += 1;
        if inc > 0.0 {
            running = running.min(prev);
            let next = run.a + inc;
            while run.leaves.len() < marks.len() && marks[run.leaves.len()] < next {
                let m = marks[run.leaves.len()];
                let level = low + (m - run.a) / inc * (top - low);
                if let Some(&last) = run.leaves.last() {
                    run.mins.push(running.min(level).min(last));
                }
                run.leaves.push(level);
                running = f64::INFINITY;
            }
            run.a = next;
        }
        prev = top;
        if run.leaves.len() == marks.len() {
            src.abandon();
            return run;
        }
        if run.steps >= max_steps {
            run.capped = true;
            src.abandon();
            return run;
        }
        match src.advance(rng) {
            Some(s) => {
                h = s.h;
                min = s.min;
            }
            None => return run,
        }
    }
}

/// Streams one Galton-Watson tree through its Lukasiewicz path and records
/// the scaled heights of vertices carrying marks (each vertex is marked with
/// probability `p_mark`), up to `max_marks` of them. Heights are multiplied
/// by `height_scale`.
pub fn gw_marked_tree<R: Rng + ?Sized>(
    law: &crate::pathsim::OffspringLaw,
    p_mark: f64,
    height_scale: f64,
    max_marks: usize,
    max_vertices: usize,
    rng: &mut R,
) -> MarkRun {
    let mut run = MarkRun::default();
    let mut stack: Vec<i64> = Vec::new();
    let mut s = 0i64;
    let mut running = usize::MAX;
    while s >= 0 {
        while stack.last().is_some_and(|&t| t > s) {
            stack.pop();
        }
        let height = stack.len();
        running = running.min(height);
        if rng.random::<f64>() < p_mark {
            if !run.leaves.is_empty() {
                run.mins.push(running as f64 * height_scale);
            }
            run.leaves.push(height as f64 * height_scale);
            running = height;
            if run.leaves.len() == max_marks {
                break;
            }
        }
        stack.push(s);
        run.steps += 1;
        if run.steps >= max_vertices {
            run.capped = true;
            break;
        }
        s += law.sample(rng) as i64 - 1;
    }
    run
}

/// exp(-int_0^T V(B_s) ds) for a standard Brownian motion from 0 run until
/// its local time at 0 reaches `ell` (bridge-exact local time per step).
/// The step is `dt` near 0 and grows like (rel |x|)^2 away from it. Stops
/// early once the integral exceeds `kill`.
pub fn brownian_potential_weight<R: Rng + ?Sized>(
    v: &dyn Fn(f64) -> f64,
    ell: f64,
    dt: f64,
    rel: f64,
    kill: f64,
    rng: &mut R,
) -> f64 {
    use rand_distr::{Distribution, Exp1, StandardNormal};
    let (mut x, mut loc, mut int) = (0.0f64, 0.0f64, 0.0f64);
    let mut vx = v(0.0);
    while loc < ell {
        let h = dt.max((rel * x).powi(2));
        let z: f64 = StandardNormal.sample(rng);
        let y = x + h.sqrt() * z;
        let e: f64 = Exp1.sample(rng);
        loc += (((y - x) * (y - x) + 2.0 * h * e).sqrt() - x.abs() - y.abs()).max(0.0);
        let vy = v(y);
        int += 0.5 * h * (vx + vy);
        if int > kill {
            return 0.0;
        }
        x = y;
        vx = vy;
    }
    (-int).exp()
}
