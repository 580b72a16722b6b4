//! Capacity of the continuous-time limit.
//!
//! IID capacity is a 1-D search over `p`; feedback capacity searches the box
//! `[0,1]^n` of state-conditioned policies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{BirthDeathChannel, ChannelKind, FeedbackPolicy, ReceptorKinetics};
use crate::entropy::{continuous_objective, mi_rate_continuous, per_receptor_iid_rate};
use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Optimizer settings. Defaults are the documented ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Points in the initial scan of the IID search.
    pub scan_points: usize,
    /// Bracket width at which golden-section search stops.
    pub p_tolerance: f64,
    /// Grid points per axis for the coarse feedback stage.
    pub grid_points: usize,
    /// Largest dimension that uses a full grid; above it, Latin hypercube.
    pub grid_max_dim: usize,
    pub lhs_samples: usize,
    /// Largest `n` accepted by the feedback optimizer.
    pub max_dim: usize,
    /// Coordinate ascent stops once a full sweep improves by less than this.
    pub sweep_tolerance: f64,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            scan_points: 64,
            p_tolerance: 1e-9,
            grid_points: 21,
            grid_max_dim: 3,
            lhs_samples: 4096,
            max_dim: 16,
            sweep_tolerance: 1e-12,
            max_sweeps: 10_000,
            seed: 0x5EED_CAFE,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scan_points < 3 {
            return Err(Error::Config("scan_points must be at least 3".into()));
        }
        if !(self.p_tolerance > 0.0 && self.p_tolerance < 1.0) {
            return Err(Error::Config("p_tolerance must lie in (0, 1)".into()));
        }
        if self.grid_points < 2 {
            return Err(Error::Config("grid_points must be at least 2".into()));
        }
        if self.lhs_samples == 0 {
            return Err(Error::Config("lhs_samples must be positive".into()));
        }
        if self.sweep_tolerance.is_nan() || self.sweep_tolerance < 0.0 {
            return Err(Error::Config("sweep_tolerance must be nonnegative".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Config("max_sweeps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    /// Capacity in nats per second.
    pub capacity: f64,
    pub argmax: FeedbackPolicy,
    /// The optimal scalar `p` when the search was over IID policies.
    pub iid_p: Option<f64>,
    /// Golden-section iterations (IID) or coordinate sweeps (feedback).
    pub iterations: usize,
    pub converged: bool,
    /// Last bracket width (IID) or largest coordinate move in the last sweep.
    pub final_step: f64,
    pub evaluations: usize,
}

struct GoldenOutcome {
    x: f64,
    fx: f64,
    iterations: usize,
    width: f64,
}

/// Maximizes `f` on `[lo, hi]` by golden-section search down to `tol`.
fn golden_section_max<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64, evals: &mut usize) -> Result<GoldenOutcome>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    *evals += 2;
    let mut iterations = 0;
    while hi - lo > tol {
        iterations += 1;
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        }
        *evals += 1;
    }
    let (x, fx) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    Ok(GoldenOutcome {
        x,
        fx,
        iterations,
        width: hi - lo,
    })
}

fn degenerate_result(n: usize) -> CapacityResult {
    CapacityResult {
        capacity: 0.0,
        argmax: FeedbackPolicy::iid(n, 0.5).expect("0.5 is a valid probability"),
        iid_p: Some(0.5),
        iterations: 0,
        converged: true,
        final_step: 0.0,
        evaluations: 0,
    }
}

/// Best IID rate `max_p I(1p)`, found by a coarse scan bracketing a
/// golden-section search.
///
/// For independent channels the search runs on the single-receptor rate and
/// scales by `n`, so the optimizer is the same for every `n`.
pub fn capacity_iid(ch: &BirthDeathChannel, cfg: &OptimizerConfig) -> Result<CapacityResult> {
    cfg.validate()?;
    let n = ch.n();
    if ch.is_input_independent() {
        return Ok(degenerate_result(n));
    }
    let (scale, objective): (f64, Box<dyn Fn(f64) -> Result<f64>>) = match (ch.kind(), ch.kinetics()) {
        (ChannelKind::Independent, Some(kin)) => {
            let kin = *kin;
            (n as f64, Box::new(move |p| Ok(per_receptor_iid_rate(&kin, p))))
        }
        _ => (
            1.0,
            Box::new(move |p| continuous_objective(ch, &FeedbackPolicy::iid(n, p)?)),
        ),
    };

    let last = cfg.scan_points - 1;
    let grid = |i: usize| i as f64 / last as f64;
    let mut evaluations = 0;
    let (mut best_i, mut best_f) = (0, f64::NEG_INFINITY);
    for i in 0..=last {
        let v = objective(grid(i))?;
        evaluations += 1;
        if v > best_f {
            best_i = i;
            best_f = v;
        }
    }
    let lo = grid(best_i.saturating_sub(1));
    let hi = grid((best_i + 1).min(last));
    let g = golden_section_max(&objective, lo, hi, cfg.p_tolerance, &mut evaluations)?;
    let (p, value) = if g.fx >= best_f {
        (g.x, g.fx)
    } else {
        (grid(best_i), best_f)
    };
    let capacity = (scale * value).max(0.0);
    Ok(CapacityResult {
        capacity,
        argmax: FeedbackPolicy::iid(n, p)?,
        iid_p: Some(p),
        iterations: g.iterations,
        converged: g.width <= cfg.p_tolerance,
        final_step: g.width,
        evaluations,
    })
}

fn coarse_candidates(n: usize, cfg: &OptimizerConfig) -> Vec<Vec<f64>> {
    if n <= cfg.grid_max_dim {
        let m = cfg.grid_points;
        let total = m.pow(n as u32);
        (0..total)
            .map(|mut idx| {
                let mut point = vec![0.0; n];
                for coord in point.iter_mut().rev() {
                    *coord = (idx % m) as f64 / (m - 1) as f64;
                    idx /= m;
                }
                point
            })
            .collect()
    } else {
        latin_hypercube(n, cfg.lhs_samples, cfg.seed)
    }
}

/// Latin-hypercube sample of `[0,1]^dim`: each axis hits every one of the
/// `samples` strata exactly once.
pub fn latin_hypercube(dim: usize, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![vec![0.0; dim]; samples];
    let mut strata: Vec<usize> = (0..samples).collect();
    for axis in 0..dim {
        // Fisher-Yates with a fixed draw order keeps runs reproducible.
        for i in (1..samples).rev() {
            let j = rng.random_range(0..=i);
            strata.swap(i, j);
        }
        for (point, &s) in points.iter_mut().zip(&strata) {
            point[axis] = (s as f64 + rng.random::<f64>()) / samples as f64;
        }
    }
    points
}

struct AscentOutcome {
    point: Vec<f64>,
    value: f64,
    sweeps: usize,
    converged: bool,
    last_move: f64,
}

fn coordinate_ascent(
    ch: &BirthDeathChannel,
    start: Vec<f64>,
    cfg: &OptimizerConfig,
    evaluations: &mut usize,
) -> Result<AscentOutcome> {
    let mut point = start;
    let mut value = continuous_objective(ch, &FeedbackPolicy::new(point.clone())?)?;
    *evaluations += 1;
    let mut sweeps = 0;
    let mut last_move = 0.0;
    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let before = value;
        last_move = 0.0f64;
        for k in 0..point.len() {
            let mut trial = point.clone();
            let g = golden_section_max(
                |x| {
                    trial[k] = x;
                    continuous_objective(ch, &FeedbackPolicy::new(trial.clone())?)
                },
                0.0,
                1.0,
                cfg.p_tolerance,
                evaluations,
            )?;
            if g.fx > value {
                last_move = last_move.max((g.x - point[k]).abs());
                point[k] = g.x;
                value = g.fx;
            }
        }
        if value - before < cfg.sweep_tolerance {
            return Ok(AscentOutcome {
                point,
                value,
                sweeps,
                converged: true,
                last_move,
            });
        }
    }
    Ok(AscentOutcome {
        point,
        value,
        sweeps,
        converged: false,
        last_move,
    })
}

/// Feedback capacity over policies `(p_0, ..., p_{n-1})`.
///
/// A coarse grid (or Latin hypercube for larger `n`) picks a start; coordinate
/// ascent then refines both that start and the IID optimum, keeping the best.
pub fn capacity_feedback(ch: &BirthDeathChannel, cfg: &OptimizerConfig) -> Result<CapacityResult> {
    cfg.validate()?;
    let n = ch.n();
    if n > cfg.max_dim {
        return Err(Error::Config(format!(
            "feedback optimization supports n <= {} (got n = {n}); use IID mode, \
             which is capacity-achieving for independent receptors",
            cfg.max_dim
        )));
    }
    if ch.is_input_independent() {
        return Ok(degenerate_result(n));
    }

    let mut evaluations = 0;
    let mut coarse_best: Option<(Vec<f64>, f64)> = None;
    for point in coarse_candidates(n, cfg) {
        let v = continuous_objective(ch, &FeedbackPolicy::new(point.clone())?)?;
        evaluations += 1;
        if coarse_best.as_ref().is_none_or(|(_, best)| v > *best) {
            coarse_best = Some((point, v));
        }
    }
    let (coarse_point, _) = coarse_best.expect("coarse stage evaluates at least one point");

    let iid = capacity_iid(ch, cfg)?;
    evaluations += iid.evaluations;

    let mut best: Option<AscentOutcome> = None;
    for start in [coarse_point, iid.argmax.probs().to_vec()] {
        let run = coordinate_ascent(ch, start, cfg, &mut evaluations)?;
        if best.as_ref().is_none_or(|b| run.value > b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("two starts were refined");
    Ok(CapacityResult {
        capacity: best.value.max(0.0),
        argmax: FeedbackPolicy::new(best.point)?,
        iid_p: None,
        iterations: best.sweeps,
        converged: best.converged,
        final_step: best.last_move,
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    /// IID capacity from the closed form.
    pub capacity: f64,
    /// Edge-sum rate evaluated at the closed-form optimizer.
    pub edge_sum_capacity: f64,
    pub argmax_p: f64,
    /// `C(n) / (n C(1))`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub kinetics: ReceptorKinetics,
    pub rows: Vec<ScalingRow>,
}

/// Relative tolerance on `C(n) = n C(1)` and on the edge-sum cross-check.
pub const SCALING_RATIO_TOLERANCE: f64 = 1e-10;
/// Tolerance on the optimizer `p_*` agreeing across `n`.
pub const SCALING_ARGMAX_TOLERANCE: f64 = 1e-9;

/// Computes IID capacity for `n = 1..=n_max` and checks that it scales
/// linearly in `n` with an `n`-independent optimizer.
pub fn verify_n_scaling(kin: &ReceptorKinetics, n_max: usize, cfg: &OptimizerConfig) -> Result<ScalingReport> {
    if n_max < 2 {
        return Err(Error::Config(format!("n_max must be at least 2, got {n_max}")));
    }
    let mut rows = Vec::with_capacity(n_max);
    let mut single: Option<(f64, f64)> = None;
    for n in 1..=n_max {
        let ch = BirthDeathChannel::independent(n, *kin)?;
        let res = capacity_iid(&ch, cfg)?;
        let p = res.iid_p.expect("IID search reports its scalar optimizer");
        let edge = mi_rate_continuous(&ch, &res.argmax)?.value();
        let (c1, p1) = *single.get_or_insert((res.capacity, p));
        let ratio = if c1 == 0.0 {
            if res.capacity == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            res.capacity / (n as f64 * c1)
        };
        if (ratio - 1.0).abs() > SCALING_RATIO_TOLERANCE {
            return Err(Error::Consistency(format!("C({n}) / ({n} C(1)) = {ratio}, expected 1")));
        }
        if (p - p1).abs() > SCALING_ARGMAX_TOLERANCE {
            return Err(Error::Consistency(format!(
                "optimizer p_* = {p} at n = {n} differs from {p1} at n = 1"
            )));
        }
        if (edge - res.capacity).abs() > SCALING_RATIO_TOLERANCE * res.capacity.max(1e-300) {
            return Err(Error::Consistency(format!(
                "edge-sum rate {edge} disagrees with closed form {} at n = {n}",
                res.capacity
            )));
        }
        rows.push(ScalingRow {
            n,
            capacity: res.capacity,
            edge_sum_capacity: edge,
            argmax_p: p,
            ratio,
        });
    }
    Ok(ScalingReport { kinetics: *kin, rows })
}
