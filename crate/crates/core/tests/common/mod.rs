//! Model generators and property checks shared by the proptest suites and
//! the acceptance runner. Each check returns `Err(description)` on the first
//! violation.

#![allow(dead_code)]

use hmmmop::entropy::{estimate_entropy, threshold_uniform_n};
use hmmmop::greedy::greedy_crossings;
use hmmmop::local::local_search;
use hmmmop::orbit::orbit_table;
use hmmmop::search::ClassEval;
use hmmmop::simulate::{simulate_with, SimOptions};
use hmmmop::{
    evolve_measure, filter, find_optimal_threshold, find_optimal_threshold_descent, Cut, DiscreteMeasure, GeneralModel,
    InfoState, Orientation, Policy, SpecialModel, ThresholdPolicy, TruncatedPolicy,
};
use rand::Rng;

pub type Check = Result<(), String>;

pub const LO: f64 = 0.025;
pub const HI: f64 = 0.975;
/// Minimum |a+b-1| for random models.
pub const DRIFT_MIN: f64 = 0.01;

pub fn model_from(x: [f64; 4]) -> Option<SpecialModel> {
    if (x[0] + x[1] - 1.0).abs() < DRIFT_MIN {
        return None;
    }
    SpecialModel::new(x[0], x[1], x[2], x[3]).ok()
}

pub fn random_model<R: Rng>(rng: &mut R) -> SpecialModel {
    loop {
        let x = [(); 4].map(|_| rng.gen_range(LO..=HI));
        if let Some(m) = model_from(x) {
            return m;
        }
    }
}

pub fn random_threshold<R: Rng>(rng: &mut R) -> ThresholdPolicy {
    let orientation = if rng.gen_bool(0.5) {
        Orientation::ZeroLeft
    } else {
        Orientation::OneLeft
    };
    let cut = if rng.gen_bool(0.05) {
        Cut::RightEmpty
    } else {
        Cut::At(rng.gen_range(0.0..=1.0))
    };
    ThresholdPolicy::new(orientation, cut)
}

/// Row-stochastic random matrix, `rows × cols`, row-major, with a few zeros.
fn random_stochastic<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let mut row: Vec<f64> = (0..cols)
            .map(|_| {
                if rng.gen_bool(0.2) {
                    0.0
                } else {
                    rng.gen_range(0.01..1.0)
                }
            })
            .collect();
        if row.iter().all(|&v| v == 0.0) {
            row[rng.gen_range(0..cols)] = 1.0;
        }
        let s: f64 = row.iter().sum();
        out.extend(row.iter().map(|v| v / s));
    }
    out
}

pub fn random_general<R: Rng>(rng: &mut R) -> GeneralModel {
    let n = rng.gen_range(2..=4);
    let m = rng.gen_range(2..=3);
    let procs = rng.gen_range(1..=3);
    let t = random_stochastic(rng, n, n);
    let ms = (0..procs).map(|_| random_stochastic(rng, n, m)).collect();
    GeneralModel::new(n, m, procs, t, ms).expect("random stochastic model is valid")
}

pub fn random_info_state<R: Rng>(rng: &mut R, n: usize) -> InfoState {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0) + 1e-9).collect();
    let s: f64 = raw.iter().sum();
    InfoState::new(raw.iter().map(|v| v / s).collect()).expect("normalized")
}

// ---------- hmm-core ----------

/// r is a distribution whenever the observation has positive probability.
pub fn check_r_normalized(model: &GeneralModel, z: &InfoState) -> Check {
    for proc in 0..model.num_procs() {
        for obs in 0..model.m() {
            if model.alpha_function(proc, obs, z) <= 1e-300 {
                continue;
            }
            let r = model.r_function(proc, obs, z).map_err(|e| e.to_string())?;
            let sum: f64 = r.as_slice().iter().sum();
            if (sum - 1.0).abs() > 1e-12 || r.as_slice().iter().any(|&v| v < 0.0) {
                return Err(format!("r({proc},{obs}) = {:?} sums to {sum}", r.as_slice()));
            }
        }
    }
    Ok(())
}

pub fn check_alpha_sums(model: &GeneralModel, z: &InfoState) -> Check {
    for proc in 0..model.num_procs() {
        let s: f64 = (0..model.m()).map(|y| model.alpha_function(proc, y, z)).sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(format!("sum over y of alpha({proc}, y) = {s}"));
        }
    }
    Ok(())
}

pub fn check_anchor_reset(model: &GeneralModel, z: &InfoState) -> Check {
    for a in model.find_anchor_pairs() {
        if model.alpha_function(a.proc, a.obs, z) <= 1e-300 {
            continue;
        }
        let r = model.r_function(a.proc, a.obs, z).map_err(|e| e.to_string())?;
        if r != InfoState::dirac(model.n(), a.state) {
            return Err(format!("anchor {a:?} gives {:?}", r.as_slice()));
        }
    }
    Ok(())
}

pub fn check_filter_replay(model: &GeneralModel, seed: u64) -> Check {
    let x0 = (seed as usize) % model.n();
    let policy = |z: &InfoState| usize::from(z[0] < 0.5) % model.num_procs();
    let trace = simulate_with(model, &policy, &SimOptions::new(300, seed, x0)).map_err(|e| e.to_string())?;
    let replay = filter(model, &trace.initial, &trace.proc_indices, &trace.obs).map_err(|e| e.to_string())?;
    if replay != trace.info_states {
        return Err("offline filter differs from the simulated information states".into());
    }
    Ok(())
}

// ---------- special case ----------

fn grid(points: usize) -> impl Iterator<Item = f64> {
    (0..points).map(move |j| j as f64 / (points - 1) as f64)
}

pub fn check_r0_above_r1(m: &SpecialModel) -> Check {
    for z in grid(1000) {
        if m.r0(z) <= m.r1(z) {
            return Err(format!("r0({z}) = {} <= r1 = {}", m.r0(z), m.r1(z)));
        }
    }
    Ok(())
}

pub fn check_monotone(m: &SpecialModel) -> Check {
    let up = m.a() + m.b() > 1.0;
    for proc in 0..2 {
        let v: Vec<f64> = grid(1000).map(|z| m.r(proc, z)).collect();
        for w in v.windows(2) {
            if (up && w[1] <= w[0]) || (!up && w[1] >= w[0]) {
                return Err(format!(
                    "r{proc} not strictly {}",
                    if up { "increasing" } else { "decreasing" }
                ));
            }
        }
    }
    Ok(())
}

pub fn check_fixed_point_order(m: &SpecialModel) -> Check {
    let f = m.fixed_points().map_err(|e| e.to_string())?;
    if !(0.0 < f.eta1 && f.eta1 < f.eta0 && f.eta0 < 1.0) {
        return Err(format!("eta1 = {}, eta0 = {}", f.eta1, f.eta0));
    }
    if (m.r0(f.eta0) - f.eta0).abs() > 1e-12 || (m.r1(f.eta1) - f.eta1).abs() > 1e-12 {
        return Err("eta is not a fixed point".into());
    }
    Ok(())
}

/// Distance to the fixed point never grows along the orbit when the maps
/// increase (a+b>1); when they decrease the orbit alternates sides and the
/// distance is compared two steps apart.
pub fn check_attraction(m: &SpecialModel) -> Check {
    let f = m.fixed_points().map_err(|e| e.to_string())?;
    let lag = if m.a() + m.b() > 1.0 { 1 } else { 2 };
    for (proc, eta) in [(0, f.eta0), (1, f.eta1)] {
        for z0 in [0.0, 0.5, 1.0] {
            let mut dist = vec![(z0 - eta).abs()];
            let mut z = z0;
            for _ in 0..10_000 {
                z = m.r(proc, z);
                dist.push((z - eta).abs());
            }
            if let Some(k) = (lag..dist.len()).find(|&k| dist[k] > dist[k - lag] + 1e-15) {
                return Err(format!("r{proc} orbit from {z0} moved away from {eta} at step {k}"));
            }
            if dist.iter().all(|&d| d >= 1e-10) {
                return Err(format!(
                    "r{proc} orbit from {z0} ends {} from {eta}",
                    dist[dist.len() - 1]
                ));
            }
        }
    }
    Ok(())
}

pub fn check_closed_forms(m: &SpecialModel, z: f64) -> Check {
    let g = m.to_general();
    let s = InfoState::binary(z);
    for proc in 0..2 {
        let obs = proc;
        let (alpha, r) = (
            g.alpha_function(proc, obs, &s),
            g.r_function(proc, obs, &s).map_err(|e| e.to_string())?,
        );
        if (alpha - m.alpha(proc, z)).abs() > 1e-14 || (r[0] - m.r(proc, z)).abs() > 1e-14 {
            return Err(format!(
                "process {proc} at z={z}: general ({alpha}, {}) vs closed ({}, {})",
                r[0],
                m.alpha(proc, z),
                m.r(proc, z)
            ));
        }
    }
    Ok(())
}

/// Telescoping prefix identity and per-step mass decay of the orbit table.
pub fn check_telescoping(m: &SpecialModel, policy: &ThresholdPolicy, depth: usize) -> Check {
    let p: Policy = (*policy).into();
    let t = orbit_table(m, &p, depth);
    let sup = m.alpha_sup();
    for i in 0..2 {
        let (z, c) = (&t.z[i], &t.c[i]);
        let mut escaped = 0.0;
        for k in 0..depth {
            let a = m.alpha(t.choice[i][k], z[k]);
            escaped += c[k] * (1.0 - a);
            if (escaped + c[k + 1] - 1.0).abs() > 1e-12 {
                return Err(format!("orbit {i}: prefix {k} gives {}", escaped + c[k + 1]));
            }
            if !(c[k + 1] > 0.0 && c[k + 1] <= c[k] * sup * (1.0 + 1e-15)) {
                return Err(format!("orbit {i}: c[{}] = {} vs c[{k}] = {}", k + 1, c[k + 1], c[k]));
            }
        }
    }
    Ok(())
}

// ---------- entropy ----------

pub fn check_bound_sound(m: &SpecialModel, policy: &ThresholdPolicy, n: usize) -> Check {
    let p: Policy = (*policy).into();
    let a = estimate_entropy(m, &p, n).map_err(|e| e.to_string())?;
    let b = estimate_entropy(m, &p, 4 * n).map_err(|e| e.to_string())?;
    if (a.value - b.value).abs() > a.bound {
        return Err(format!("N={n}: |{} - {}| > bound {}", a.value, b.value, a.bound));
    }
    Ok(())
}

pub fn check_q_monotone(m: &SpecialModel, policy: &ThresholdPolicy) -> Check {
    let p: Policy = (*policy).into();
    let mut prev = 0.0;
    for n in 1..200 {
        let q = estimate_entropy(m, &p, n).map(|e| e.q).unwrap_or(0.0);
        // closed-form cycle sums may round one ulp either way
        if q < prev * (1.0 - 1e-14) {
            return Err(format!("Q({n}) = {q} < Q({}) = {prev}", n - 1));
        }
        prev = q;
    }
    Ok(())
}

/// Mass that has not yet been reset to an anchor sits off the two orbits
/// and decays at least like `alpha_sup^t`.
pub fn check_off_orbit_decay(m: &SpecialModel, policy: &ThresholdPolicy, steps: usize) -> Check {
    let p: Policy = (*policy).into();
    let t = orbit_table(m, &p, steps);
    let orbit_points: Vec<f64> = t.z.iter().flatten().copied().collect();
    let mut mu = DiscreteMeasure::dirac(0.5);
    for step in 1..=steps {
        mu = evolve_measure(&mu, m, &p).map_err(|e| e.to_string())?;
        let off = mu.total_mass() - mu.mass_near(&orbit_points, 1e-12);
        if off > m.alpha_sup().powi(step as i32) + 1e-12 {
            return Err(format!("step {step}: off-orbit mass {off}"));
        }
    }
    Ok(())
}

// ---------- policy search ----------

pub fn check_greedy_single_crossing(m: &SpecialModel) -> Check {
    let c = greedy_crossings(m);
    if c.len() > 1 {
        return Err(format!("{} crossings at {c:?}", c.len()));
    }
    Ok(())
}

/// The classes read around the circle: the first orientation's arc from
/// 1+ leftwards, then the second's.
pub fn circle_minima(trace: &[ClassEval], eps: f64) -> usize {
    let mut signs = Vec::new();
    let n = trace.len();
    for j in 0..n {
        let d = trace[(j + 1) % n].entropy - trace[j].entropy;
        if d > 2.0 * eps {
            signs.push(1);
        } else if d < -2.0 * eps {
            signs.push(-1);
        }
    }
    if signs.is_empty() {
        return 1;
    }
    let k = signs.len();
    (0..k).filter(|&j| signs[j] == -1 && signs[(j + 1) % k] == 1).count()
}

pub fn check_unimodal(m: &SpecialModel, eps: f64) -> Check {
    let r = find_optimal_threshold(m, eps).map_err(|e| e.to_string())?;
    match circle_minima(&r.trace, eps) {
        1 => Ok(()),
        k => Err(format!("{k} local minima over {} classes", r.trace.len())),
    }
}

/// Random thresholds inside each class evaluate to the class entropy.
pub fn check_class_exactness<R: Rng>(m: &SpecialModel, eps: f64, draws: usize, rng: &mut R) -> Check {
    let r = find_optimal_threshold(m, eps).map_err(|e| e.to_string())?;
    let n = threshold_uniform_n(m, eps).map_err(|e| e.to_string())?;
    for _ in 0..draws {
        let class = &r.trace[rng.gen_range(0..r.trace.len())];
        let (Cut::At(hi), Some(lo)) = (class.cut, class.lower) else {
            continue;
        };
        let t = lo + (hi - lo) * rng.gen_range(f64::EPSILON..=1.0);
        if !(t > lo && t <= hi) {
            continue;
        }
        let p: Policy = ThresholdPolicy::new(class.orientation, Cut::At(t)).into();
        let h = estimate_entropy(m, &p, n).map_err(|e| e.to_string())?.value;
        if (h - class.entropy).abs() > 2.0 * eps {
            return Err(format!("t={t} in ({lo}, {hi}]: {h} vs class {}", class.entropy));
        }
    }
    Ok(())
}

pub fn check_search_bounds(m: &SpecialModel, eps: f64) -> Check {
    let r = find_optimal_threshold(m, eps).map_err(|e| e.to_string())?;
    for c in &r.trace {
        if c.entropy < r.best_entropy.value - 2.0 * eps {
            return Err(format!("class {c:?} beats reported {}", r.best_entropy.value));
        }
    }
    Ok(())
}

pub fn check_descent_agrees(m: &SpecialModel, eps: f64) -> Check {
    let full = find_optimal_threshold(m, eps).map_err(|e| e.to_string())?;
    let fast = find_optimal_threshold_descent(m, eps).map_err(|e| e.to_string())?;
    let d = (full.best_entropy.value - fast.best_entropy.value).abs();
    if d > 2.0 * eps {
        return Err(format!(
            "enumeration {} vs descent {}",
            full.best_entropy.value, fast.best_entropy.value
        ));
    }
    Ok(())
}

pub fn check_local_monotone(m: &SpecialModel, words: [u64; 2], eps: f64) -> Check {
    let start = TruncatedPolicy::from_words(words);
    let r = local_search(m, start, eps).map_err(|e| e.to_string())?;
    for w in r.history.windows(2) {
        if w[1] >= w[0] {
            return Err(format!("accepted flip moved entropy {} -> {}", w[0], w[1]));
        }
    }
    if let Some(&last) = r.history.last() {
        if last != r.best_entropy.value {
            return Err("final entropy is not the last accepted value".into());
        }
    }
    Ok(())
}
