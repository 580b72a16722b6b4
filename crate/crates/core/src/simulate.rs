//! Monte Carlo oracle for the discrete-time channel.
//!
//! # Random stream
//!
//! Trajectories are reproducible from `(channel, policy, config)`. The
//! generator is ChaCha8 (`rand_chacha`), seeded with `seed_from_u64(seed)`.
//! Uniforms are 53-bit floats, `(next_u64 >> 11) * 2^-53`. The draw order is:
//!
//! 1. one uniform selects the initial state by inverting the stationary CDF;
//! 2. per step, one uniform `u` gives the input (`High` iff `u < p_prev`,
//!    where the fully bound state reuses `p_{n-1}`), then one uniform `v`
//!    picks the move: up if `v < tau a`, down if `v < tau (a + b)`, else stay.
//!
//! The block bootstrap uses a second ChaCha8 stream seeded with
//! `seed ^ BOOTSTRAP_STREAM`.

use std::io::{self, Read, Write};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::channel::{stationary, BirthDeathChannel, Concentration, FeedbackPolicy, StationaryDistribution};
use crate::error::{Error, Result};

pub const BOOTSTRAP_STREAM: u64 = 0xB007_57A9_0000_0001;
pub const BOOTSTRAP_BLOCKS: usize = 50;
pub const BOOTSTRAP_REPLICATES: usize = 200;
/// Fewest post-burn-in transitions accepted by the estimator.
pub const MIN_ESTIMATION_STEPS: usize = 10_000;
/// Rows with more stationary mass than this should have been visited.
pub const UNVISITED_MASS_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub steps: usize,
    pub tau: f64,
    pub seed: u64,
    /// Transitions discarded before estimation.
    pub burn_in: usize,
}

impl SimulationConfig {
    pub fn validate(&self, ch: &BirthDeathChannel) -> Result<()> {
        if self.steps <= self.burn_in {
            return Err(Error::Simulation(format!(
                "steps ({}) must exceed burn_in ({})",
                self.steps, self.burn_in
            )));
        }
        if self.steps > u32::MAX as usize * 16 {
            return Err(Error::Simulation(format!("steps = {} is too large", self.steps)));
        }
        ch.check_tau(self.tau)
    }
}

/// Inputs and states of one simulated run. `states[i]` follows `inputs[i]`;
/// the state before the first step is `initial_state`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n: usize,
    tau: f64,
    seed: u64,
    burn_in: usize,
    initial_state: u32,
    inputs: Vec<u8>,
    states: Vec<u32>,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn initial_state(&self) -> u32 {
        self.initial_state
    }

    pub fn inputs(&self) -> &[u8] {
        &self.inputs
    }

    pub fn states(&self) -> &[u32] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    fn prev_state(&self, step: usize) -> usize {
        if step == 0 {
            self.initial_state as usize
        } else {
            self.states[step - 1] as usize
        }
    }

    /// Writes `step,input,state` rows; step 0 carries the initial state.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "step,input,state")?;
        writeln!(w, "0,,{}", self.initial_state)?;
        for (i, (x, y)) in self.inputs.iter().zip(&self.states).enumerate() {
            writeln!(w, "{},{},{}", i + 1, x, y)?;
        }
        Ok(())
    }

    const MAGIC: &'static [u8; 4] = b"BNDT";

    /// Little-endian binary layout: magic `BNDT`, `u32` version (1), `u32 n`,
    /// `f64 tau`, `u64 seed`, `u64 burn_in`, `u32` initial state, `u64` step
    /// count, then per step one `u8` input and one `u32` state.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&self.tau.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.burn_in as u64).to_le_bytes())?;
        w.write_all(&self.initial_state.to_le_bytes())?;
        w.write_all(&(self.states.len() as u64).to_le_bytes())?;
        for (x, y) in self.inputs.iter().zip(&self.states) {
            w.write_all(&[*x])?;
            w.write_all(&y.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> io::Result<Self> {
        fn take<const N: usize, R: Read>(r: &mut R) -> io::Result<[u8; N]> {
            let mut buf = [0u8; N];
            r.read_exact(&mut buf)?;
            Ok(buf)
        }
        let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
        if &take::<4, _>(&mut r)? != Self::MAGIC {
            return Err(bad("not a trajectory file"));
        }
        if u32::from_le_bytes(take(&mut r)?) != 1 {
            return Err(bad("unsupported trajectory version"));
        }
        let n = u32::from_le_bytes(take(&mut r)?) as usize;
        let tau = f64::from_le_bytes(take(&mut r)?);
        let seed = u64::from_le_bytes(take(&mut r)?);
        let burn_in = u64::from_le_bytes(take(&mut r)?) as usize;
        let initial_state = u32::from_le_bytes(take(&mut r)?);
        let len = u64::from_le_bytes(take(&mut r)?) as usize;
        let mut inputs = Vec::with_capacity(len);
        let mut states = Vec::with_capacity(len);
        for _ in 0..len {
            let [x] = take::<1, _>(&mut r)?;
            inputs.push(x);
            states.push(u32::from_le_bytes(take(&mut r)?));
        }
        Ok(Self {
            n,
            tau,
            seed,
            burn_in,
            initial_state,
            inputs,
            states,
        })
    }
}

fn sample_index(cdf_probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, p) in cdf_probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    cdf_probs.len() - 1
}

/// Simulates the discrete-time channel driven by a feedback policy.
pub fn simulate_trajectory(
    ch: &BirthDeathChannel,
    policy: &FeedbackPolicy,
    cfg: &SimulationConfig,
) -> Result<Trajectory> {
    cfg.validate(ch)?;
    let st = stationary(ch, policy)?;
    let n = ch.n();
    let tau = cfg.tau;
    let input_prob: Vec<f64> = (0..=n).map(|k| policy.get(k.min(n - 1))).collect();
    let up: [Vec<f64>; 2] = [
        (0..=n).map(|k| tau * ch.up_rate(k, Concentration::Low)).collect(),
        (0..=n).map(|k| tau * ch.up_rate(k, Concentration::High)).collect(),
    ];
    let down: Vec<f64> = (0..=n).map(|k| tau * ch.down_rate(k)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let initial = sample_index(st.probs(), rng.random::<f64>());
    let mut inputs = Vec::with_capacity(cfg.steps);
    let mut states = Vec::with_capacity(cfg.steps);
    let mut state = initial;
    for _ in 0..cfg.steps {
        let x = (rng.random::<f64>() < input_prob[state]) as usize;
        let v: f64 = rng.random();
        let a = up[x][state];
        if v < a {
            state += 1;
        } else if v < a + down[state] {
            state -= 1;
        }
        inputs.push(x as u8);
        states.push(state as u32);
    }
    Ok(Trajectory {
        n,
        tau,
        seed: cfg.seed,
        burn_in: cfg.burn_in,
        initial_state: initial as u32,
        inputs,
        states,
    })
}

/// Transition counts indexed by `(prev_state, input, next_state)`.
///
/// Only adjacent moves are possible, so each `(prev, input)` row stores the
/// down/stay/up counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCounts {
    n: usize,
    data: Vec<u64>,
}

impl TransitionCounts {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            data: vec![0; (n + 1) * 6],
        }
    }

    fn slot(prev: usize, input: u8, next: usize) -> Option<usize> {
        let dir = match next as isize - prev as isize {
            -1 => 0,
            0 => 1,
            1 => 2,
            _ => return None,
        };
        Some(prev * 6 + input as usize * 3 + dir)
    }

    fn record(&mut self, prev: usize, input: u8, next: usize) {
        let i = Self::slot(prev, input, next).expect("channel only moves to adjacent states");
        self.data[i] += 1;
    }

    fn add(&mut self, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, prev: usize, input: u8, next: usize) -> u64 {
        Self::slot(prev, input, next)
            .filter(|_| prev <= self.n && next <= self.n && input <= 1)
            .map_or(0, |i| self.data[i])
    }

    pub fn total(&self) -> u64 {
        self.data.iter().sum()
    }

    fn row(&self, prev: usize, input: u8) -> &[u64] {
        let start = prev * 6 + input as usize * 3;
        &self.data[start..start + 3]
    }

    /// Plug-in `H(Y | Y_prev) - H(Y | X, Y_prev)` in nats per step.
    pub fn plug_in_mi(&self) -> f64 {
        let total = self.total() as f64;
        if total == 0.0 {
            return 0.0;
        }
        let entropy = |counts: &[u64]| -> (f64, f64) {
            let sum: u64 = counts.iter().sum();
            if sum == 0 {
                return (0.0, 0.0);
            }
            let s = sum as f64;
            let h = counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let q = c as f64 / s;
                    -q * q.ln()
                })
                .sum::<f64>();
            (s, h)
        };
        let mut h_given_prev = 0.0;
        let mut h_given_both = 0.0;
        for prev in 0..=self.n {
            let (lo, hi) = (self.row(prev, 0), self.row(prev, 1));
            let merged = [lo[0] + hi[0], lo[1] + hi[1], lo[2] + hi[2]];
            let (w, h) = entropy(&merged);
            h_given_prev += w / total * h;
            for row in [lo, hi] {
                let (w, h) = entropy(row);
                h_given_both += w / total * h;
            }
        }
        (h_given_prev - h_given_both).max(0.0)
    }

    /// Writes `prev_state,input,next_state,count` rows for every reachable
    /// transition.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "prev_state,input,next_state,count")?;
        for prev in 0..=self.n {
            for input in 0..=1u8 {
                for next in prev.saturating_sub(1)..=(prev + 1).min(self.n) {
                    writeln!(w, "{prev},{input},{next},{}", self.get(prev, input, next))?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalEstimate {
    pub mi_per_second: f64,
    pub mi_per_step: f64,
    /// Block-bootstrap standard error of `mi_per_second`.
    pub stderr: f64,
    pub counts: TransitionCounts,
    /// `(state, input)` rows never visited after burn-in.
    pub unvisited_rows: Vec<(usize, u8)>,
}

impl EmpiricalEstimate {
    /// Unvisited rows whose stationary mass `pi_k Pr{x | k}` exceeds
    /// [`UNVISITED_MASS_THRESHOLD`]. The fully bound state reuses `p_{n-1}`.
    pub fn significant_unvisited(&self, st: &StationaryDistribution, policy: &FeedbackPolicy) -> Vec<(usize, u8, f64)> {
        let n = policy.len();
        self.unvisited_rows
            .iter()
            .filter_map(|&(k, x)| {
                let p = policy.get(k.min(n - 1));
                let mass = st.get(k) * if x == 1 { p } else { 1.0 - p };
                (mass > UNVISITED_MASS_THRESHOLD).then_some((k, x, mass))
            })
            .collect()
    }
}

/// Plug-in MI-rate estimate from a trajectory, with a 50-block bootstrap
/// standard error.
pub fn estimate_mi(traj: &Trajectory) -> Result<EmpiricalEstimate> {
    let start = traj.burn_in;
    let used = traj.len().saturating_sub(start);
    if used < MIN_ESTIMATION_STEPS {
        return Err(Error::Simulation(format!(
            "estimation needs at least {MIN_ESTIMATION_STEPS} transitions after burn-in, got {used}"
        )));
    }
    let block_len = used / BOOTSTRAP_BLOCKS;
    let mut blocks = vec![TransitionCounts::new(traj.n); BOOTSTRAP_BLOCKS];
    let mut counts = TransitionCounts::new(traj.n);
    for step in start..traj.len() {
        let block = ((step - start) / block_len).min(BOOTSTRAP_BLOCKS - 1);
        blocks[block].record(traj.prev_state(step), traj.inputs[step], traj.states[step] as usize);
    }
    for b in &blocks {
        counts.add(b);
    }

    let mi_per_step = counts.plug_in_mi();
    let mut rng = ChaCha8Rng::seed_from_u64(traj.seed ^ BOOTSTRAP_STREAM);
    let replicates: Vec<f64> = (0..BOOTSTRAP_REPLICATES)
        .map(|_| {
            let mut resampled = TransitionCounts::new(traj.n);
            for _ in 0..BOOTSTRAP_BLOCKS {
                resampled.add(&blocks[rng.random_range(0..BOOTSTRAP_BLOCKS)]);
            }
            resampled.plug_in_mi() / traj.tau
        })
        .collect();
    let mean = replicates.iter().sum::<f64>() / replicates.len() as f64;
    let var = replicates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (replicates.len() - 1) as f64;

    let unvisited_rows = (0..=traj.n)
        .flat_map(|k| [(k, 0u8), (k, 1u8)])
        .filter(|&(k, x)| counts.row(k, x).iter().all(|&c| c == 0))
        .collect();

    Ok(EmpiricalEstimate {
        mi_per_second: mi_per_step / traj.tau,
        mi_per_step,
        stderr: var.sqrt(),
        counts,
        unvisited_rows,
    })
}

/// Histogram of visited states after burn-in.
pub fn occupancy(traj: &Trajectory) -> Vec<u64> {
    let mut hist = vec![0u64; traj.n + 1];
    for &s in &traj.states[traj.burn_in.min(traj.len())..] {
        hist[s as usize] += 1;
    }
    hist
}

/// Spectral gap of the policy-averaged generator, in Hz.
///
/// The birth-death generator is similar to a symmetric tridiagonal matrix,
/// whose second-largest eigenvalue is `-gap`.
pub fn spectral_gap(ch: &BirthDeathChannel, policy: &FeedbackPolicy) -> Result<f64> {
    ch.check_policy(policy)?;
    let d = ch.n() + 1;
    let mut sym = DMatrix::<f64>::zeros(d, d);
    for k in 0..d {
        sym[(k, k)] = -(ch.mean_up_rate(policy, k) + ch.down_rate(k));
        if k + 1 < d {
            let off = (ch.mean_up_rate(policy, k) * ch.down_rate(k + 1)).sqrt();
            sym[(k, k + 1)] = off;
            sym[(k + 1, k)] = off;
        }
    }
    let mut eig: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let gap = -eig[1];
    if gap > 0.0 {
        Ok(gap)
    } else {
        Err(Error::Irreducible {
            state: 0,
            direction: "up",
        })
    }
}

/// Steps between nearly independent samples: `ceil(10 / (tau * gap))`.
pub fn decorrelation_stride(ch: &BirthDeathChannel, policy: &FeedbackPolicy, tau: f64) -> Result<usize> {
    let gap = spectral_gap(ch, policy)?;
    Ok((10.0 / (tau * gap)).ceil().max(1.0) as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquaredTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub samples: usize,
    pub stride: usize,
}

impl ChiSquaredTest {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

/// Pearson goodness-of-fit of visited states against `expected`.
///
/// States are sampled every `stride` steps after burn-in so that samples are
/// close to independent. Bins expecting fewer than five samples are pooled.
pub fn occupancy_chi_squared(
    traj: &Trajectory,
    expected: &StationaryDistribution,
    stride: usize,
) -> Result<ChiSquaredTest> {
    if stride == 0 {
        return Err(Error::Simulation("stride must be positive".into()));
    }
    let mut hist = vec![0u64; traj.n + 1];
    let mut samples = 0usize;
    for &s in traj.states[traj.burn_in.min(traj.len())..].iter().step_by(stride) {
        hist[s as usize] += 1;
        samples += 1;
    }
    let total = samples as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (obs, p) in hist.iter().zip(expected.probs()) {
        let exp = p * total;
        if exp < 5.0 {
            pooled_obs += *obs as f64;
            pooled_exp += exp;
        } else {
            bins.push((*obs as f64, exp));
        }
    }
    if pooled_exp > 0.0 || pooled_obs > 0.0 {
        bins.push((pooled_obs, pooled_exp));
    }
    if bins.len() < 2 {
        return Err(Error::Simulation(format!(
            "only {samples} decorrelated samples; too few for a chi-squared test"
        )));
    }
    let statistic: f64 = bins
        .iter()
        .map(|(o, e)| if *e > 0.0 { (o - e).powi(2) / e } else { f64::INFINITY })
        .sum();
    let dof = bins.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Consistency(e.to_string()))?;
    Ok(ChiSquaredTest {
        statistic,
        dof,
        p_value: dist.sf(statistic),
        samples,
        stride,
    })
}
