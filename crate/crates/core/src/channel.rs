//! Receptor channel models.
//!
//! A channel is a birth-death chain on the number of bound receptors
//! `0..=n`. Binding (up) rates depend on the binary ligand concentration,
//! unbinding (down) rates do not. All rates are totals out of a state, in Hz.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::{ln_binomial, ln_factorial};

use crate::error::{Error, Result};

/// Above this many receptors the stationary products are accumulated in
/// log-space.
pub const LOG_SPACE_THRESHOLD: usize = 30;

/// Binary ligand concentration presented to the receptors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Concentration {
    Low,
    High,
}

impl Concentration {
    pub fn as_bit(self) -> u8 {
        match self {
            Concentration::Low => 0,
            Concentration::High => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            Concentration::Low
        } else {
            Concentration::High
        }
    }
}

/// Per-receptor rate constants in Hz.
///
/// `alpha_low = k_on * L`, `alpha_high = k_on * H` and `beta = k_off`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceptorKinetics {
    alpha_low: f64,
    alpha_high: f64,
    beta: f64,
}

impl ReceptorKinetics {
    pub fn new(alpha_low: f64, alpha_high: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha_L", alpha_low), ("alpha_H", alpha_high), ("beta", beta)] {
            if !v.is_finite() {
                return Err(Error::InvalidKinetics(format!("{name} must be finite, got {v}")));
            }
        }
        if alpha_low < 0.0 || alpha_high < 0.0 {
            return Err(Error::InvalidKinetics(format!(
                "binding rates must be nonnegative, got alpha_L={alpha_low}, alpha_H={alpha_high}"
            )));
        }
        if beta <= 0.0 {
            return Err(Error::InvalidKinetics(format!("beta must be positive, got {beta}")));
        }
        if alpha_low > alpha_high {
            return Err(Error::InvalidKinetics(format!(
                "alpha_L={alpha_low} exceeds alpha_H={alpha_high}"
            )));
        }
        Ok(Self {
            alpha_low,
            alpha_high,
            beta,
        })
    }

    /// Builds kinetics from mass-action constants and the two concentrations.
    pub fn from_mass_action(k_on: f64, k_off: f64, low: f64, high: f64) -> Result<Self> {
        Self::new(k_on * low, k_on * high, k_off)
    }

    pub fn alpha_low(&self) -> f64 {
        self.alpha_low
    }

    pub fn alpha_high(&self) -> f64 {
        self.alpha_high
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Per-capita binding rate when the input is high with probability `p`.
    pub fn mean_alpha(&self, p: f64) -> f64 {
        self.alpha_low + p * (self.alpha_high - self.alpha_low)
    }

    /// Returns a copy with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.alpha_low * factor, self.alpha_high * factor, self.beta * factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Independent,
    Cooperative,
    Custom,
}

impl ChannelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChannelKind::Independent => "independent",
            ChannelKind::Cooperative => "cooperative",
            ChannelKind::Custom => "custom",
        }
    }
}

impl std::str::FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(ChannelKind::Independent),
            "cooperative" => Ok(ChannelKind::Cooperative),
            "custom" => Ok(ChannelKind::Custom),
            other => Err(Error::InvalidChannel(format!(
                "unknown channel kind `{other}` (expected independent, cooperative or custom)"
            ))),
        }
    }
}

impl std::fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Birth-death channel on states `0..=n`.
///
/// `up_high[k]`, `up_low[k]` are the total binding rates out of state `k`
/// (`k < n`); `down[k - 1]` is the total unbinding rate out of state `k`
/// (`k >= 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeathChannel {
    n: usize,
    up_high: Vec<f64>,
    up_low: Vec<f64>,
    down: Vec<f64>,
    kind: ChannelKind,
    kinetics: Option<ReceptorKinetics>,
}

impl BirthDeathChannel {
    /// `n` independent, indistinguishable receptors obeying mass action:
    /// `a_k = (n - k) * alpha`, `b_k = k * beta`.
    pub fn independent(n: usize, kinetics: ReceptorKinetics) -> Result<Self> {
        check_receptor_count(n)?;
        let up = |alpha: f64| (0..n).map(|k| (n - k) as f64 * alpha).collect();
        Ok(Self {
            n,
            up_high: up(kinetics.alpha_high),
            up_low: up(kinetics.alpha_low),
            down: (1..=n).map(|k| k as f64 * kinetics.beta).collect(),
            kind: ChannelKind::Independent,
            kinetics: Some(kinetics),
        })
    }

    /// Cooperative binding: total rates do not scale with occupancy.
    pub fn cooperative(n: usize, kinetics: ReceptorKinetics) -> Result<Self> {
        check_receptor_count(n)?;
        Ok(Self {
            n,
            up_high: vec![kinetics.alpha_high; n],
            up_low: vec![kinetics.alpha_low; n],
            down: vec![kinetics.beta; n],
            kind: ChannelKind::Cooperative,
            kinetics: Some(kinetics),
        })
    }

    /// Arbitrary tridiagonal kinetics given by explicit total rates.
    pub fn custom(up_high: Vec<f64>, up_low: Vec<f64>, down: Vec<f64>) -> Result<Self> {
        let n = up_high.len();
        check_receptor_count(n)?;
        if up_low.len() != n || down.len() != n {
            return Err(Error::InvalidChannel(format!(
                "rate vectors must all have length n: up_H={}, up_L={}, down={}",
                n,
                up_low.len(),
                down.len()
            )));
        }
        for (name, rates) in [("up_H", &up_high), ("up_L", &up_low)] {
            if let Some((k, v)) = rates.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidChannel(format!(
                    "{name}[{k}] = {v} must be finite and nonnegative"
                )));
            }
        }
        if let Some((k, v)) = down.iter().enumerate().find(|(_, v)| !v.is_finite() || **v <= 0.0) {
            return Err(Error::InvalidChannel(format!(
                "down rate out of state {} is {v}; down rates must be finite and positive",
                k + 1
            )));
        }
        Ok(Self {
            n,
            up_high,
            up_low,
            down,
            kind: ChannelKind::Custom,
            kinetics: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    /// Per-receptor kinetics, absent for custom channels.
    pub fn kinetics(&self) -> Option<&ReceptorKinetics> {
        self.kinetics.as_ref()
    }

    pub fn up_high(&self) -> &[f64] {
        &self.up_high
    }

    pub fn up_low(&self) -> &[f64] {
        &self.up_low
    }

    /// Down rates `b_1..=b_n`.
    pub fn down(&self) -> &[f64] {
        &self.down
    }

    /// Total binding rate out of `state` under `input`; zero at `state == n`.
    pub fn up_rate(&self, state: usize, input: Concentration) -> f64 {
        if state >= self.n {
            return 0.0;
        }
        match input {
            Concentration::High => self.up_high[state],
            Concentration::Low => self.up_low[state],
        }
    }

    /// Total unbinding rate out of `state`; zero at `state == 0`.
    pub fn down_rate(&self, state: usize) -> f64 {
        if state == 0 {
            0.0
        } else {
            self.down[state - 1]
        }
    }

    /// Policy-averaged binding rate out of `state`.
    pub fn mean_up_rate(&self, policy: &FeedbackPolicy, state: usize) -> f64 {
        if state >= self.n {
            return 0.0;
        }
        let p = policy.probs[state];
        p * self.up_high[state] + (1.0 - p) * self.up_low[state]
    }

    /// True when the binding rates do not depend on the input.
    pub fn is_input_independent(&self) -> bool {
        self.up_high == self.up_low
    }

    /// Largest total exit rate over all states and both inputs.
    pub fn max_exit_rate(&self) -> f64 {
        (0..=self.n)
            .map(|k| {
                let up = self
                    .up_rate(k, Concentration::High)
                    .max(self.up_rate(k, Concentration::Low));
                up + self.down_rate(k)
            })
            .fold(0.0, f64::max)
    }

    /// Supremum of admissible time steps.
    pub fn max_tau(&self) -> f64 {
        1.0 / self.max_exit_rate()
    }

    /// Checks `tau > 0` and `tau * (a_k + b_k) < 1` for every state. The error
    /// names the worst state.
    pub fn check_tau(&self, tau: f64) -> Result<()> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::Domain(format!("tau must be positive and finite, got {tau}")));
        }
        let (state, product) = (0..=self.n)
            .map(|k| {
                let up = self
                    .up_rate(k, Concentration::High)
                    .max(self.up_rate(k, Concentration::Low));
                (k, tau * (up + self.down_rate(k)))
            })
            .fold(
                (0, f64::NEG_INFINITY),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
        if product >= 1.0 {
            return Err(Error::StepSize {
                tau,
                state,
                product,
                max_tau: self.max_tau(),
            });
        }
        Ok(())
    }

    pub fn check_policy(&self, policy: &FeedbackPolicy) -> Result<()> {
        if policy.len() != self.n {
            return Err(Error::InvalidPolicy(format!(
                "policy has {} entries but the channel has n={} free states",
                policy.len(),
                self.n
            )));
        }
        Ok(())
    }
}

fn check_receptor_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidChannel("n must be at least 1".into()));
    }
    Ok(())
}

/// High-input probabilities conditioned on the previous output state,
/// `p_k = Pr{X = H | Y_prev = k}` for `k < n`.
///
/// There is no `p_n`: from the fully bound state the input has no effect.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackPolicy {
    probs: Vec<f64>,
}

impl FeedbackPolicy {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidPolicy("policy must have at least one entry".into()));
        }
        if let Some((k, p)) = probs.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidPolicy(format!("p_{k} = {p} is not in [0, 1]")));
        }
        Ok(Self { probs })
    }

    /// The state-independent policy `(p, ..., p)`.
    pub fn iid(n: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n])
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, state: usize) -> f64 {
        self.probs[state]
    }

    pub fn is_iid(&self) -> bool {
        self.probs.windows(2).all(|w| w[0] == w[1])
    }
}

/// Row-stochastic tridiagonal matrix on states `0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalStochastic {
    up: Vec<f64>,
    stay: Vec<f64>,
    down: Vec<f64>,
}

impl TridiagonalStochastic {
    fn from_probabilities(up: Vec<f64>, down: Vec<f64>) -> Self {
        let stay = up.iter().zip(&down).map(|(u, d)| 1.0 - u - d).collect();
        Self { up, stay, down }
    }

    pub fn dim(&self) -> usize {
        self.stay.len()
    }

    /// `P[k][k+1]`, zero for the last row.
    pub fn up(&self, k: usize) -> f64 {
        self.up[k]
    }

    pub fn stay(&self, k: usize) -> f64 {
        self.stay[k]
    }

    /// `P[k][k-1]`, zero for the first row.
    pub fn down(&self, k: usize) -> f64 {
        self.down[k]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if col == row {
            self.stay[row]
        } else if col == row + 1 {
            self.up[row]
        } else if col + 1 == row {
            self.down[row]
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..d).map(|i| (0..d).map(|j| self.get(i, j)).collect()).collect()
    }

    /// Computes `x * P` for a row vector `x`.
    pub fn left_multiply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        assert_eq!(x.len(), d, "vector length must match matrix dimension");
        (0..d)
            .map(|j| {
                let mut acc = x[j] * self.stay[j];
                if j > 0 {
                    acc += x[j - 1] * self.up[j - 1];
                }
                if j + 1 < d {
                    acc += x[j + 1] * self.down[j + 1];
                }
                acc
            })
            .collect()
    }
}

/// The pair of one-step transition matrices `P_H`, `P_L` for a time step `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteChannelMatrices {
    tau: f64,
    high: TridiagonalStochastic,
    low: TridiagonalStochastic,
}

impl DiscreteChannelMatrices {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn high(&self) -> &TridiagonalStochastic {
        &self.high
    }

    pub fn low(&self) -> &TridiagonalStochastic {
        &self.low
    }

    pub fn for_input(&self, input: Concentration) -> &TridiagonalStochastic {
        match input {
            Concentration::High => &self.high,
            Concentration::Low => &self.low,
        }
    }
}

fn down_probabilities(ch: &BirthDeathChannel, tau: f64) -> Vec<f64> {
    (0..=ch.n).map(|k| tau * ch.down_rate(k)).collect()
}

pub fn discretize(ch: &BirthDeathChannel, tau: f64) -> Result<DiscreteChannelMatrices> {
    ch.check_tau(tau)?;
    let up = |input| (0..=ch.n).map(|k| tau * ch.up_rate(k, input)).collect();
    Ok(DiscreteChannelMatrices {
        tau,
        high: TridiagonalStochastic::from_probabilities(up(Concentration::High), down_probabilities(ch, tau)),
        low: TridiagonalStochastic::from_probabilities(up(Concentration::Low), down_probabilities(ch, tau)),
    })
}

/// Transition matrix of the output process `Y` under a feedback policy.
pub fn output_chain(ch: &BirthDeathChannel, policy: &FeedbackPolicy, tau: f64) -> Result<TridiagonalStochastic> {
    ch.check_policy(policy)?;
    ch.check_tau(tau)?;
    let up = (0..=ch.n).map(|k| tau * ch.mean_up_rate(policy, k)).collect();
    Ok(TridiagonalStochastic::from_probabilities(
        up,
        down_probabilities(ch, tau),
    ))
}

/// Stationary law of the output chain and its normalizer.
///
/// The unnormalized weights are `A_k = prod_{j<k} a_j * prod_{j>k} b_j`,
/// divided by `n!` for independent channels so that `A_0 = beta^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    probs: Vec<f64>,
    log_normalizer: f64,
}

impl StationaryDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, state: usize) -> f64 {
        self.probs[state]
    }

    /// `ln Z`; always finite.
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    /// `Z`, which overflows to infinity for large channels.
    pub fn normalizer(&self) -> f64 {
        self.log_normalizer.exp()
    }

    /// Expected number of bound receptors.
    pub fn mean_occupancy(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }
}

/// Stationary distribution via detailed balance, `pi_k a_k = pi_{k+1} b_{k+1}`.
///
/// Independent of the time step. Fails when some policy-averaged binding
/// rate is zero.
pub fn stationary(ch: &BirthDeathChannel, policy: &FeedbackPolicy) -> Result<StationaryDistribution> {
    ch.check_policy(policy)?;
    let up: Vec<f64> = (0..ch.n).map(|k| ch.mean_up_rate(policy, k)).collect();
    if let Some(k) = up.iter().position(|&a| a <= 0.0) {
        return Err(Error::Irreducible {
            state: k,
            direction: "up",
        });
    }
    Ok(stationary_from_rates(ch, &up))
}

/// Detailed-balance solve restricted to `0..=up.len()`; `up` must be positive.
pub(crate) fn stationary_from_rates(ch: &BirthDeathChannel, up: &[f64]) -> StationaryDistribution {
    let m = up.len();
    let down = &ch.down[..m];
    let mut log_a0: f64 = down.iter().map(|b| b.ln()).sum();
    if ch.kind == ChannelKind::Independent && m == ch.n {
        log_a0 -= ln_factorial(ch.n as u64);
    }

    if m <= LOG_SPACE_THRESHOLD {
        let mut ratios = Vec::with_capacity(m + 1);
        let mut r = 1.0;
        ratios.push(r);
        for k in 0..m {
            r *= up[k] / down[k];
            ratios.push(r);
        }
        let total: f64 = ratios.iter().sum();
        if total.is_finite() && total > 0.0 {
            return StationaryDistribution {
                probs: ratios.iter().map(|r| r / total).collect(),
                log_normalizer: log_a0 + total.ln(),
            };
        }
    }

    let mut log_ratios = Vec::with_capacity(m + 1);
    let mut lr = 0.0;
    log_ratios.push(lr);
    for k in 0..m {
        lr += up[k].ln() - down[k].ln();
        log_ratios.push(lr);
    }
    let max = log_ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_ratios.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    StationaryDistribution {
        probs: weights.iter().map(|w| w / total).collect(),
        log_normalizer: log_a0 + max + total.ln(),
    }
}

/// Binomial occupancy `C(n,k) q^k (1-q)^(n-k)` with `q = alpha / (alpha + beta)`.
pub fn binomial_occupancy(n: usize, alpha_bar: f64, beta: f64) -> Vec<f64> {
    let total = alpha_bar + beta;
    if alpha_bar == 0.0 {
        let mut probs = vec![0.0; n + 1];
        probs[0] = 1.0;
        return probs;
    }
    let (ln_q, ln_r) = ((alpha_bar / total).ln(), (beta / total).ln());
    (0..=n)
        .map(|k| (ln_binomial(n as u64, k as u64) + k as f64 * ln_q + (n - k) as f64 * ln_r).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_kinetics() -> ReceptorKinetics {
        ReceptorKinetics::new(1.0, 10.0, 20.0).unwrap()
    }

    #[test]
    fn independent_rates_follow_occupancy_scaling() {
        let ch = BirthDeathChannel::independent(2, reference_kinetics()).unwrap();
        assert_eq!(ch.up_high(), &[20.0, 10.0]);
        assert_eq!(ch.up_low(), &[2.0, 1.0]);
        assert_eq!(ch.down(), &[20.0, 40.0]);

        let single = BirthDeathChannel::independent(1, reference_kinetics()).unwrap();
        assert_eq!(single.up_high(), &[10.0]);
        assert_eq!(single.up_low(), &[1.0]);
        assert_eq!(single.down(), &[20.0]);

        let k = ReceptorKinetics::new(2.0, 4.0, 5.0).unwrap();
        let ch3 = BirthDeathChannel::independent(3, k).unwrap();
        assert_eq!(ch3.up_high(), &[12.0, 8.0, 4.0]);
        assert_eq!(ch3.down(), &[5.0, 10.0, 15.0]);
    }

    #[test]
    fn cooperative_rates_are_flat() {
        let ch = BirthDeathChannel::cooperative(2, reference_kinetics()).unwrap();
        assert_eq!(ch.up_high(), &[10.0, 10.0]);
        assert_eq!(ch.up_low(), &[1.0, 1.0]);
        assert_eq!(ch.down(), &[20.0, 20.0]);

        let k = ReceptorKinetics::new(1.0, 2.0, 3.0).unwrap();
        let ch4 = BirthDeathChannel::cooperative(4, k).unwrap();
        assert!(ch4.up_high().iter().all(|&a| a == 2.0));
        assert!(ch4.down().iter().all(|&b| b == 3.0));

        let coop1 = BirthDeathChannel::cooperative(1, k).unwrap();
        let ind1 = BirthDeathChannel::independent(1, k).unwrap();
        assert_eq!(coop1.up_high(), ind1.up_high());
        assert_eq!(coop1.up_low(), ind1.up_low());
        assert_eq!(coop1.down(), ind1.down());
    }

    #[test]
    fn kinetics_validation() {
        assert!(matches!(
            ReceptorKinetics::new(-1.0, 1.0, 1.0),
            Err(Error::InvalidKinetics(_))
        ));
        assert!(matches!(
            ReceptorKinetics::new(2.0, 1.0, 1.0),
            Err(Error::InvalidKinetics(_))
        ));
        assert!(matches!(
            ReceptorKinetics::new(1.0, 2.0, 0.0),
            Err(Error::InvalidKinetics(_))
        ));
        assert!(ReceptorKinetics::new(0.0, 2.0, 1.0).is_ok());
        let k = ReceptorKinetics::from_mass_action(2.0, 20.0, 0.5, 5.0).unwrap();
        assert_eq!((k.alpha_low(), k.alpha_high(), k.beta()), (1.0, 10.0, 20.0));
    }

    #[test]
    fn custom_channel_validation() {
        assert!(BirthDeathChannel::custom(vec![1.0], vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(BirthDeathChannel::custom(vec![1.0], vec![1.0], vec![0.0]).is_err());
        assert!(BirthDeathChannel::custom(vec![], vec![], vec![]).is_err());
        assert!(BirthDeathChannel::independent(0, reference_kinetics()).is_err());
        let ch = BirthDeathChannel::custom(vec![3.0, 1.0], vec![1.0, 0.5], vec![2.0, 4.0]).unwrap();
        assert_eq!(ch.kind(), ChannelKind::Custom);
        assert!(ch.kinetics().is_none());
    }

    #[test]
    fn discretize_matches_transition_matrix() {
        let ch = BirthDeathChannel::independent(2, reference_kinetics()).unwrap();
        let m = discretize(&ch, 1e-3).unwrap();
        let row0: Vec<f64> = (0..3).map(|j| m.high().get(0, j)).collect();
        assert_relative_eq!(row0[0], 0.98, epsilon = 1e-15);
        assert_relative_eq!(row0[1], 0.02, epsilon = 1e-15);
        assert_eq!(row0[2], 0.0);
        for mat in [m.high(), m.low()] {
            for row in mat.to_dense() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|&x| x >= 0.0));
            }
        }
        assert_relative_eq!(m.low().get(1, 1), 1.0 - 1e-3 * (20.0 + 1.0), epsilon = 1e-15);
    }

    #[test]
    fn discretize_rejects_large_steps() {
        let ch = BirthDeathChannel::independent(2, reference_kinetics()).unwrap();
        match discretize(&ch, 0.05) {
            Err(Error::StepSize { state, product, .. }) => {
                // Rows: 0.05*20, 0.05*(10+20), 0.05*40; the fully bound row is worst.
                assert_eq!(state, 2);
                assert_relative_eq!(product, 2.0, max_relative = 1e-12);
            }
            other => panic!("expected step-size error, got {other:?}"),
        }
        assert!(discretize(&ch, 0.0).is_err());
        assert!(discretize(&ch, ch.max_tau()).is_err());
        assert!(discretize(&ch, 0.99 * ch.max_tau()).is_ok());
        assert_relative_eq!(ch.max_tau(), 1.0 / 40.0);
    }

    #[test]
    fn output_chain_degenerate_policies() {
        let ch = BirthDeathChannel::independent(3, reference_kinetics()).unwrap();
        let tau = 1e-3;
        let m = discretize(&ch, tau).unwrap();
        let all_high = output_chain(&ch, &FeedbackPolicy::iid(3, 1.0).unwrap(), tau).unwrap();
        let all_low = output_chain(&ch, &FeedbackPolicy::iid(3, 0.0).unwrap(), tau).unwrap();
        assert_eq!(&all_high, m.high());
        assert_eq!(&all_low, m.low());

        let ch2 = BirthDeathChannel::independent(2, reference_kinetics()).unwrap();
        let half = output_chain(&ch2, &FeedbackPolicy::iid(2, 0.5).unwrap(), tau).unwrap();
        assert_relative_eq!(half.up(0), 0.011, epsilon = 1e-15);
        assert_relative_eq!(half.up(1), 0.0055, epsilon = 1e-15);

        let short = FeedbackPolicy::iid(1, 0.5).unwrap();
        assert!(matches!(output_chain(&ch2, &short, tau), Err(Error::InvalidPolicy(_))));
    }

    #[test]
    fn policy_validation() {
        assert!(FeedbackPolicy::new(vec![0.2, 1.2]).is_err());
        assert!(FeedbackPolicy::new(vec![f64::NAN]).is_err());
        assert!(FeedbackPolicy::new(vec![]).is_err());
        assert!(FeedbackPolicy::iid(3, 0.3).unwrap().is_iid());
        assert!(!FeedbackPolicy::new(vec![0.3, 0.4]).unwrap().is_iid());
    }

    #[test]
    fn stationary_two_receptor_closed_form() {
        let ch = BirthDeathChannel::independent(2, reference_kinetics()).unwrap();
        let pol = FeedbackPolicy::new(vec![0.2, 0.8]).unwrap();
        let st = stationary(&ch, &pol).unwrap();
        // alpha_0 = 2.8, alpha_1 = 8.2, Z = beta^2 + 2 alpha_0 beta + alpha_0 alpha_1.
        let z = 400.0 + 112.0 + 2.8 * 8.2;
        assert_relative_eq!(z, 534.96, epsilon = 1e-12);
        assert_relative_eq!(st.normalizer(), z, max_relative = 1e-12);
        assert_relative_eq!(st.get(0), 400.0 / z, max_relative = 1e-12);
        assert_relative_eq!(st.get(1), 112.0 / z, max_relative = 1e-12);
        assert_relative_eq!(st.get(2), 2.8 * 8.2 / z, max_relative = 1e-12);
    }

    #[test]
    fn stationary_symmetric_binomial() {
        let k = ReceptorKinetics::new(3.0, 3.0, 3.0).unwrap();
        let ch = BirthDeathChannel::independent(2, k).unwrap();
        let st = stationary(&ch, &FeedbackPolicy::iid(2, 0.4).unwrap()).unwrap();
        assert_relative_eq!(st.get(0), 0.25, epsilon = 1e-15);
        assert_relative_eq!(st.get(1), 0.5, epsilon = 1e-15);
        assert_relative_eq!(st.get(2), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn stationary_single_receptor_occupancy() {
        let ch = BirthDeathChannel::independent(1, reference_kinetics()).unwrap();
        let st = stationary(&ch, &FeedbackPolicy::iid(1, 0.3).unwrap()).unwrap();
        let a = reference_kinetics().mean_alpha(0.3);
        assert_relative_eq!(st.get(0), 20.0 / (a + 20.0), max_relative = 1e-14);
        assert_relative_eq!(st.get(1), a / (a + 20.0), max_relative = 1e-14);
    }

    #[test]
    fn stationary_rejects_absorbing_chain() {
        let k = ReceptorKinetics::new(0.0, 5.0, 1.0).unwrap();
        let ch = BirthDeathChannel::independent(3, k).unwrap();
        let pol = FeedbackPolicy::new(vec![0.5, 0.0, 0.5]).unwrap();
        assert_eq!(
            stationary(&ch, &pol),
            Err(Error::Irreducible {
                state: 1,
                direction: "up"
            })
        );
        assert!(stationary(&ch, &FeedbackPolicy::iid(3, 0.1).unwrap()).is_ok());
    }

    #[test]
    fn log_space_matches_linear_near_threshold() {
        let k = ReceptorKinetics::new(0.7, 3.1, 1.9).unwrap();
        let pol_n = |n| FeedbackPolicy::iid(n, 0.35).unwrap();
        for n in [LOG_SPACE_THRESHOLD, LOG_SPACE_THRESHOLD + 1] {
            let ch = BirthDeathChannel::independent(n, k).unwrap();
            let st = stationary(&ch, &pol_n(n)).unwrap();
            let binom = binomial_occupancy(n, k.mean_alpha(0.35), 1.9);
            for (a, b) in st.probs().iter().zip(&binom) {
                assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
            // Z = (alpha_bar + beta)^n under IID inputs.
            let expect = n as f64 * (k.mean_alpha(0.35) + 1.9).ln();
            assert_relative_eq!(st.log_normalizer(), expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn huge_receptor_population_stays_finite() {
        let ch = BirthDeathChannel::independent(80_000, reference_kinetics()).unwrap();
        let st = stationary(&ch, &FeedbackPolicy::iid(80_000, 0.371696).unwrap()).unwrap();
        assert!(st.probs().iter().all(|p| p.is_finite() && *p >= 0.0));
        assert!((st.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(st.log_normalizer().is_finite());
        assert!(st.normalizer().is_infinite());
        let q = reference_kinetics().mean_alpha(0.371696) / (reference_kinetics().mean_alpha(0.371696) + 20.0);
        assert_relative_eq!(st.mean_occupancy(), 80_000.0 * q, max_relative = 1e-10);
    }
}
