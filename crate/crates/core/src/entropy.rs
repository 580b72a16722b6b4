//! Entropy primitives and exact mutual information rates.
//!
//! All quantities are in nats. The discrete-time rate is per step of length
//! `tau`; the continuous-time limit is per second.

use crate::channel::{stationary, stationary_from_rates, BirthDeathChannel, ChannelKind, FeedbackPolicy};
use crate::error::{Error, Result};
use crate::ReceptorKinetics;

/// Negative round-off below this (relative to the magnitude of the summed
/// terms) is clamped to zero.
pub const NEGATIVE_TOLERANCE: f64 = 1e-12;

/// `-p ln p`, with `phi(0) = 0`. Caller guarantees `p >= 0`.
#[inline]
pub(crate) fn phi(p: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        -p * p.ln()
    }
}

/// Entropy of `(p, q, 1 - p - q)`. Caller guarantees a valid triple.
#[inline]
pub(crate) fn h3(p: f64, q: f64) -> f64 {
    let s = p + q;
    let rest = if s >= 1.0 { 0.0 } else { -(1.0 - s) * (-s).ln_1p() };
    phi(p) + phi(q) + rest
}

/// The partial entropy `phi(p) = -p ln p`, `phi(0) = 0`.
///
/// Defined for every `p >= 0`; rates larger than one are valid arguments.
pub fn partial_entropy(p: f64) -> Result<f64> {
    if !(p >= 0.0 && p.is_finite()) {
        return Err(Error::Domain(format!(
            "partial entropy needs a finite nonnegative argument, got {p}"
        )));
    }
    Ok(phi(p))
}

/// Entropy of the three-outcome distribution `(p, q, 1 - p - q)`.
pub fn triple_entropy(p: f64, q: f64) -> Result<f64> {
    if !(p >= 0.0 && q >= 0.0 && p.is_finite() && q.is_finite()) {
        return Err(Error::Domain(format!(
            "triple entropy needs nonnegative arguments, got ({p}, {q})"
        )));
    }
    if p + q > 1.0 + 1e-12 {
        return Err(Error::Domain(format!(
            "triple entropy needs p + q <= 1, got {p} + {q} = {}",
            p + q
        )));
    }
    Ok(h3(p, q))
}

/// Binary entropy of `p`, in nats.
pub fn binary_entropy(p: f64) -> Result<f64> {
    triple_entropy(p, 0.0)
}

/// Per-receptor information density
/// `Psi(p) = phi(p a_H + (1-p) a_L) - p phi(a_H) - (1-p) phi(a_L)`.
pub fn psi(kinetics: &ReceptorKinetics, p: f64) -> f64 {
    let (lo, hi) = (kinetics.alpha_low(), kinetics.alpha_high());
    phi(kinetics.mean_alpha(p)) - p * phi(hi) - (1.0 - p) * phi(lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateBasis {
    PerSecond,
    PerStep,
}

impl RateBasis {
    pub fn as_str(self) -> &'static str {
        match self {
            RateBasis::PerSecond => "nats/s",
            RateBasis::PerStep => "nats/step",
        }
    }
}

/// A mutual information rate tagged with its time basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiRate {
    value: f64,
    basis: RateBasis,
    tau: Option<f64>,
}

impl MiRate {
    pub fn per_second(value: f64) -> Self {
        Self {
            value,
            basis: RateBasis::PerSecond,
            tau: None,
        }
    }

    pub fn per_step(value: f64, tau: f64) -> Self {
        Self {
            value,
            basis: RateBasis::PerStep,
            tau: Some(tau),
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn basis(&self) -> RateBasis {
        self.basis
    }

    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    /// The rate in nats per second; per-step values are divided by `tau`.
    pub fn nats_per_second(&self) -> f64 {
        match self.tau {
            Some(tau) => self.value / tau,
            None => self.value,
        }
    }
}

/// Clamps tiny negative round-off to zero and rejects anything larger.
pub(crate) fn clamp_nonnegative(value: f64, scale: f64) -> Result<f64> {
    if value >= 0.0 {
        return Ok(value);
    }
    if value >= -NEGATIVE_TOLERANCE * scale.max(1.0) {
        Ok(0.0)
    } else if value.is_nan() {
        Err(Error::Consistency("mutual information rate is NaN".into()))
    } else {
        Err(Error::Consistency(format!(
            "mutual information rate {value} is negative beyond round-off"
        )))
    }
}

/// Continuous-time information contributed by the edge `k -> k+1`, before
/// weighting by occupancy: `phi(a_bar) - p phi(a_H) - (1-p) phi(a_L)`.
fn edge_density(ch: &BirthDeathChannel, policy: &FeedbackPolicy, k: usize) -> (f64, f64) {
    let p = policy.get(k);
    let (hi, lo) = (ch.up_high()[k], ch.up_low()[k]);
    let mean = p * hi + (1.0 - p) * lo;
    let (a, b, c) = (phi(mean), p * phi(hi), (1.0 - p) * phi(lo));
    (a - b - c, a.abs() + b.abs() + c.abs())
}

fn edge_sum(ch: &BirthDeathChannel, policy: &FeedbackPolicy, probs: &[f64]) -> Result<f64> {
    let (mut total, mut scale) = (0.0, 0.0);
    for (k, pi) in probs.iter().enumerate().take(ch.n()) {
        if *pi == 0.0 {
            continue;
        }
        let (density, magnitude) = edge_density(ch, policy, k);
        total += pi * density;
        scale += pi * magnitude;
    }
    clamp_nonnegative(total, scale)
}

/// Continuous-time (tau -> 0) MI rate: `sum_k pi_k Phi_k` over edges
/// `k -> k+1`, using total binding rates.
pub fn mi_rate_continuous(ch: &BirthDeathChannel, policy: &FeedbackPolicy) -> Result<MiRate> {
    let st = stationary(ch, policy)?;
    Ok(MiRate::per_second(edge_sum(ch, policy, st.probs())?))
}

/// Per-edge contributions `I_k = pi_k Phi_k`, `k = 0..n-1`.
pub fn edge_contributions(ch: &BirthDeathChannel, policy: &FeedbackPolicy) -> Result<Vec<f64>> {
    let st = stationary(ch, policy)?;
    Ok((0..ch.n()).map(|k| st.get(k) * edge_density(ch, policy, k).0).collect())
}

/// Continuous-time rate extended to reducible chains.
///
/// Matches [`mi_rate_continuous`] on irreducible chains. When some averaged
/// binding rate is zero, the states above it are transient and the rate is
/// that of the closed class `0..=k`, which is also the limit from the
/// interior of the policy box.
pub fn mi_rate_continuous_limit(ch: &BirthDeathChannel, policy: &FeedbackPolicy) -> Result<MiRate> {
    ch.check_policy(policy)?;
    Ok(MiRate::per_second(continuous_objective(ch, policy)?))
}

pub(crate) fn continuous_objective(ch: &BirthDeathChannel, policy: &FeedbackPolicy) -> Result<f64> {
    let up: Vec<f64> = (0..ch.n()).map(|k| ch.mean_up_rate(policy, k)).collect();
    let closed = up.iter().position(|&a| a <= 0.0).unwrap_or(ch.n());
    let st = stationary_from_rates(ch, &up[..closed]);
    edge_sum(ch, policy, st.probs())
}

/// Closed-form IID rate for independent receptors:
/// `n Psi(p) beta / (alpha_bar + beta)`.
pub fn mi_rate_iid(ch: &BirthDeathChannel, p: f64) -> Result<MiRate> {
    let kin = match (ch.kind(), ch.kinetics()) {
        (ChannelKind::Independent, Some(kin)) => kin,
        (kind, _) => {
            return Err(Error::KindMismatch {
                operation: "mi_rate_iid",
                kind: kind.as_str(),
            })
        }
    };
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidPolicy(format!("p = {p} is not in [0, 1]")));
    }
    let value = ch.n() as f64 * per_receptor_iid_rate(kin, p);
    Ok(MiRate::per_second(clamp_nonnegative(
        value,
        phi(kin.alpha_high()).abs() * ch.n() as f64,
    )?))
}

/// `Psi(p) beta / (alpha_bar + beta)`: the single-receptor IID rate.
pub(crate) fn per_receptor_iid_rate(kin: &ReceptorKinetics, p: f64) -> f64 {
    psi(kin, p) * kin.beta() / (kin.mean_alpha(p) + kin.beta())
}

/// Exact discrete-time MI rate per step of length `tau`.
///
/// Sums `pi_k [H3(tau a_bar_k, tau b_k) - p_k H3(tau a_kH, tau b_k) - (1-p_k) H3(tau a_kL, tau b_k)]`
/// over `k < n`; the fully bound state carries no information.
pub fn mi_rate_discrete(ch: &BirthDeathChannel, policy: &FeedbackPolicy, tau: f64) -> Result<MiRate> {
    ch.check_tau(tau)?;
    let st = stationary(ch, policy)?;
    let (mut total, mut scale) = (0.0, 0.0);
    for k in 0..ch.n() {
        let p = policy.get(k);
        let down = tau * ch.down_rate(k);
        let (hi, lo) = (tau * ch.up_high()[k], tau * ch.up_low()[k]);
        let mean = p * hi + (1.0 - p) * lo;
        let (a, b, c) = (h3(mean, down), p * h3(hi, down), (1.0 - p) * h3(lo, down));
        total += st.get(k) * (a - b - c);
        scale += st.get(k) * (a + b + c);
    }
    Ok(MiRate::per_step(clamp_nonnegative(total, scale)?, tau))
}
