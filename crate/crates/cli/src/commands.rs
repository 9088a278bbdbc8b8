use levytree::additive::{a_csv, additive_a_tip, h_a_csv, max_tip_local_time, subordinate_height, support_diagnostic, SupportTolerances};
use levytree::exploration::{height_brownian, stable_skeleton};
use levytree::mcverify::checks::*;
use levytree::mcverify::{CheckReport, CheckStatus};
use levytree::pathsim::{excursions_above_infimum, running_infimum, sample_brownian_levy};
use levytree::rng::derive_seed;
use levytree::snake::{grow_snake, LocalTimeScheme, SpatialMotion};
use levytree::LatticePath;
use serde_json::json;

use crate::config::{positive, Options, Psi};
use crate::manifest::{csv_text, Run};
use crate::UsageError;

fn horizon_and_dt(o: &Options) -> anyhow::Result<(f64, f64)> {
    let horizon = o.horizon.unwrap_or(1.0);
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(UsageError(format!("--horizon must be >= 0, got {horizon}")).into());
    }
    let dt = positive("dt", o.dt.unwrap_or(1e-4))?;
    if horizon > 0.0 && dt > horizon {
        return Err(UsageError(format!("--dt = {dt} exceeds --horizon = {horizon}")).into());
    }
    Ok((horizon, dt))
}

fn path_csv(column: &str, p: &LatticePath) -> anyhow::Result<Vec<u8>> {
    csv_text(&["t", column], p.values.iter().enumerate().map(|(k, &v)| vec![p.time(k), v]))
}

fn empty_csv(header: &[&str]) -> anyhow::Result<Vec<u8>> {
    csv_text(header, std::iter::empty())
}

pub fn simulate_tree(flags: Options) -> anyhow::Result<i32> {
    flags.reject("simulate-tree", &["dh", "eps", "eps-loc", "levels", "lambda-grid", "window", "replicas"])?;
    let o = flags.resolve()?;
    let psi = o.psi()?;
    let (horizon, dt) = horizon_and_dt(&o)?;
    let seed = o.seed();
    let mut run = Run::new(&o.out_dir(), "simulate-tree")?;
    if horizon == 0.0 {
        run.write("X.csv", &empty_csv(&["t", "X"])?)?;
        run.write("I.csv", &empty_csv(&["t", "I"])?)?;
        run.write("H.csv", &empty_csv(&["t", "H"])?)?;
    } else {
        let (x, h) = match psi {
            Psi::Brownian => {
                let x = sample_brownian_levy(1.0, horizon, dt, seed)?;
                let h = height_brownian(&x, 1.0)?;
                (x, h)
            }
            Psi::Stable { index } => stable_skeleton(index, horizon, dt, seed)?,
        };
        run.write("X.csv", &path_csv("X", &x)?)?;
        run.write("I.csv", &path_csv("I", &running_infimum(&x))?)?;
        run.write("H.csv", &path_csv("H", &h.base)?)?;
    }
    let params = json!({ "psi": psi, "horizon": horizon, "dt": dt, "seed": seed });
    run.finish(params, vec![seed], o.workers())?;
    Ok(0)
}

pub fn run_snake(flags: Options) -> anyhow::Result<i32> {
    flags.reject("run-snake", &["levels", "lambda-grid", "window", "replicas"])?;
    let o = flags.resolve()?;
    if o.psi()? != Psi::Brownian {
        return Err(UsageError("run-snake supports --psi brownian only".into()).into());
    }
    let (horizon, dt) = horizon_and_dt(&o)?;
    let dh = positive("dh", o.dh.unwrap_or(dt.sqrt() / 4.0))?;
    let eps = positive("eps", o.eps.unwrap_or(2.0 * dt.sqrt()))?;
    if eps <= dh {
        return Err(UsageError(format!("--eps = {eps} must exceed --dh = {dh}")).into());
    }
    let scheme = match o.eps_loc {
        Some(e) => LocalTimeScheme::Occupation { eps_loc: positive("eps-loc", e)? },
        None => LocalTimeScheme::BridgeExact,
    };
    let motion = SpatialMotion::new(dh, scheme)?;
    let seed = o.seed();
    let mut run = Run::new(&o.out_dir(), "run-snake")?;
    let diagnostics = if horizon == 0.0 {
        run.write("tips.csv", &empty_csv(&["t", "H", "W_hat", "Lambda_hat"])?)?;
        run.write("A.csv", &empty_csv(&["t", "A"])?)?;
        run.write("H_A.csv", &empty_csv(&["t", "H_A"])?)?;
        json!({ "points": 0, "sigma": 0.0, "excursions": 0, "max_height": 0.0, "max_local_time": 0.0, "a_total": 0.0, "h_a_points": 0 })
    } else {
        let x = sample_brownian_levy(1.0, horizon, dt, seed)?;
        let h = height_brownian(&x, 1.0)?;
        let st = grow_snake(&h, motion, derive_seed(seed, 1))?;
        let a = additive_a_tip(&st, eps)?;
        let ha = subordinate_height(&st, &a, dt)?;
        run.write("tips.csv", st.tips_csv().as_bytes())?;
        run.write("A.csv", a_csv(&a).as_bytes())?;
        run.write("H_A.csv", h_a_csv(&ha).as_bytes())?;
        let support = support_diagnostic(&st, &a, &SupportTolerances { tol_a: 0.0, tol_lambda: 0.0 });
        json!({
            "points": st.len(),
            "sigma": st.sigma(),
            "excursions": excursions_above_infimum(&x).iter().filter(|e| e.complete).count(),
            "max_height": h.base.values.iter().cloned().fold(0.0, f64::max),
            "max_local_time": max_tip_local_time(&st),
            "a_total": a.total(),
            "h_a_points": ha.len(),
            "support": support,
        })
    };
    run.write_json("diagnostics.json", &diagnostics)?;
    let params = json!({
        "psi": Psi::Brownian, "horizon": horizon, "dt": dt, "dh": dh, "eps": eps,
        "local_time_scheme": scheme, "seed": seed, "snake_seed": derive_seed(seed, 1),
    });
    run.finish(params, vec![seed], o.workers())?;
    Ok(0)
}

fn eps_factor(o: &Options, dt: f64, default: f64) -> f64 {
    o.eps.map(|e| e / dt.sqrt()).unwrap_or(default)
}

fn stored(o: &Options, mut base: StoredConfig) -> StoredConfig {
    base.dt = o.dt.unwrap_or(base.dt);
    base.eps_factor = eps_factor(o, base.dt, base.eps_factor);
    base.excursions = o.replicas.unwrap_or(base.excursions);
    base.seed = o.seed.unwrap_or(base.seed);
    base.workers = o.workers.unwrap_or(base.workers);
    base
}

fn psi_fit(o: &Options, mut c: PsiTildeConfig) -> PsiTildeConfig {
    c.dt = o.dt.unwrap_or(c.dt);
    c.eps_factor = eps_factor(o, c.dt, c.eps_factor);
    c.window = o.window.unwrap_or(c.window);
    c.replicas = o.replicas.unwrap_or(c.replicas);
    c.lambda_grid = o.lambda_grid.clone().unwrap_or(c.lambda_grid);
    c.seed = o.seed.unwrap_or(c.seed);
    c.workers = o.workers.unwrap_or(c.workers);
    c
}

/// Runs one named check with the overrides that apply to it.
pub fn run_check(name: &str, o: &Options) -> anyhow::Result<CheckReport> {
    let report = match name {
        "psi-tilde-fit" => check_psi_tilde_fit(&psi_fit(o, PsiTildeConfig::default()))?,
        "many-to-one" => {
            let mut c = ManyToOneConfig::default();
            c.dt = o.dt.unwrap_or(c.dt);
            c.levels = o.levels.clone().unwrap_or(c.levels);
            c.window = o.window.unwrap_or(c.window);
            c.replicas = o.replicas.unwrap_or(c.replicas);
            c.seed = o.seed.unwrap_or(c.seed);
            c.workers = o.workers.unwrap_or(c.workers);
            check_many_to_one(&c)?
        }
        "exit-first-moment" => {
            let mut c = ExitMomentConfig::default();
            c.dt = o.dt.unwrap_or(c.dt);
            c.eps_factor = eps_factor(o, c.dt, c.eps_factor);
            c.starts = o.levels.clone().unwrap_or(c.starts);
            c.window = o.window.unwrap_or(c.window);
            c.replicas = o.replicas.unwrap_or(c.replicas);
            c.seed = o.seed.unwrap_or(c.seed);
            c.workers = o.workers.unwrap_or(c.workers);
            check_exit_first_moment(&c)?
        }
        "special-markov" => {
            let mut c = SpecialMarkovConfig::default();
            c.dt = o.dt.unwrap_or(c.dt);
            c.eps_factor = eps_factor(o, c.dt, c.eps_factor);
            c.window = o.window.unwrap_or(c.window);
            c.replicas = o.replicas.unwrap_or(c.replicas);
            c.seed = o.seed.unwrap_or(c.seed);
            c.workers = o.workers.unwrap_or(c.workers);
            check_special_markov(&c)?
        }
        "support" => {
            let c = SupportConfig::default();
            check_support(&SupportConfig { base: stored(o, c.base), ..c })?
        }
        "isometry" => {
            let c = IsometryConfig::default();
            check_isometry(&IsometryConfig { base: stored(o, c.base), ..c })?
        }
        "scheme-equivalence" => {
            let c = SchemeConfig::default();
            check_scheme_equivalence(&SchemeConfig { base: stored(o, c.base), ..c })?
        }
        "spine-law" => {
            let mut c = SpineConfig::default();
            c.dt = o.dt.unwrap_or(c.dt);
            c.eps_factor = eps_factor(o, c.dt, c.eps_factor);
            c.window = o.window.unwrap_or(c.window);
            c.replicas = o.replicas.unwrap_or(c.replicas);
            c.seed = o.seed.unwrap_or(c.seed);
            c.workers = o.workers.unwrap_or(c.workers);
            check_spine_law(&c)?
        }
        "duality" => {
            let mut c = DualityConfig::default();
            c.replicas = o.replicas.unwrap_or(c.replicas);
            c.seed = o.seed.unwrap_or(c.seed);
            c.workers = o.workers.unwrap_or(c.workers);
            check_duality(&c)?
        }
        "identities" => {
            let mut c = IdentitiesConfig::default();
            c.dt = o.dt.unwrap_or(c.dt);
            c.replicas = o.replicas.unwrap_or(c.replicas);
            c.seed = o.seed.unwrap_or(c.seed);
            c.workers = o.workers.unwrap_or(c.workers);
            c.fit = psi_fit(o, c.fit);
            check_psi_tilde_identities(&c)?
        }
        "tree-algebra" => {
            let mut c = TreeAlgebraConfig::default();
            c.excursions = o.replicas.unwrap_or(c.excursions);
            c.seed = o.seed.unwrap_or(c.seed);
            check_tree_algebra(&c)?
        }
        other => {
            return Err(UsageError(format!("unknown check '{other}' (expected one of: all, {})", CHECK_NAMES.join(", "))).into())
        }
    };
    Ok(report)
}

pub fn verify(name: &str, flags: Options) -> anyhow::Result<i32> {
    flags.reject("verify", &["horizon", "dh", "eps-loc"])?;
    let o = flags.resolve()?;
    if o.psi()? != Psi::Brownian {
        return Err(UsageError("verify runs on the Brownian base case; use --psi brownian".into()).into());
    }
    let names: Vec<&str> = if name == "all" {
        CHECK_NAMES.to_vec()
    } else if CHECK_NAMES.contains(&name) {
        vec![name]
    } else {
        return Err(UsageError(format!("unknown check '{name}' (expected one of: all, {})", CHECK_NAMES.join(", "))).into());
    };
    let mut run = Run::new(&o.out_dir(), &format!("verify {name}"))?;
    let mut statuses = Vec::new();
    let mut seeds = Vec::new();
    let mut params = serde_json::Map::new();
    for n in names {
        let report = run_check(n, &o)?;
        println!("{n}: {:?}", report.status);
        for c in &report.criteria {
            println!("  {} {:?} statistic={} effect_size={} ({})", c.name, c.status, c.statistic, c.effect_size, c.threshold);
        }
        run.write_json(&format!("{n}.report.json"), &report)?;
        if let Some(raw) = report.raw_csv() {
            run.write(&format!("{n}.raw.csv"), raw.as_bytes())?;
        }
        statuses.push(report.status);
        seeds.extend(&report.seeds);
        params.insert(n.to_string(), report.parameters.clone());
    }
    run.finish(serde_json::Value::Object(params), seeds, o.workers())?;
    Ok(CheckStatus::all(&statuses).exit_code())
}
