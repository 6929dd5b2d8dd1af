use serde::{Deserialize, Serialize};

use super::stream::{FeatureMap, Signal, SALIENCE_SLOT};
use crate::attention::{
    attention_weights, update_belief_active, update_belief_baseline, AttentionInputs, BeliefState,
};
use crate::error::{Error, Result};
use crate::numerics::Mat;
use crate::precision::{
    active_precision, assemble_context, effective_rate, ContextAssembly, PrecisionMatrix,
};
use crate::tpn::{MentalState, RegimeParams, TransferConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    Baseline,
    Co4,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Co4 => "co4",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub variant: Variant,
    /// Attention budget, signals per step.
    pub s_c: usize,
    /// Fraction of the estimate/position gap closed per step.
    pub controller_gain: f64,
    /// Fraction of the precision-weighted belief error absorbed per step.
    pub belief_gain: f64,
    /// Attention logit gained by a reading that agrees exactly with the belief.
    pub query_scale: f64,
    /// Width (m) of the belief/reading similarity used by attention.
    pub query_bandwidth: f64,
    /// Attention logit gained per unit of salience (`|payload| / salience_scale`).
    pub salience_weight: f64,
    /// Co4 only.
    pub pi_min: f64,
    /// Co4 only.
    pub retain_threshold: f64,
    /// Co4 only.
    pub regime: RegimeParams,
    /// Co4 only. MOD equals `coherence_gain · r_gain · c_gain · kernel(Δ)`.
    pub coherence_gain: f64,
    /// Co4 only. Feedback weight on the context channel.
    pub lambda: f64,
}

impl AgentConfig {
    pub fn baseline(s_c: usize) -> Self {
        Self {
            variant: Variant::Baseline,
            ..Self::co4(s_c)
        }
    }

    pub fn co4(s_c: usize) -> Self {
        Self {
            variant: Variant::Co4,
            s_c,
            controller_gain: 0.1,
            belief_gain: 0.8,
            query_scale: 10.0,
            query_bandwidth: 1.0,
            salience_weight: 1.0,
            pi_min: crate::precision::DEFAULT_PI_MIN,
            retain_threshold: 0.3,
            regime: RegimeParams::preset(MentalState::AwakeThought),
            coherence_gain: 1.0,
            lambda: crate::precision::DEFAULT_LAMBDA,
        }
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        Self {
            variant,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s_c == 0 {
            return Err(Error::param("s_c", "must be at least 1"));
        }
        for (name, v) in [
            ("controller_gain", self.controller_gain),
            ("belief_gain", self.belief_gain),
            ("query_bandwidth", self.query_bandwidth),
            ("coherence_gain", self.coherence_gain),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("query_scale", self.query_scale),
            ("salience_weight", self.salience_weight),
            ("lambda", self.lambda),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(
                    name,
                    format!("must be finite and nonnegative, got {v}"),
                ));
            }
        }
        if !(self.pi_min > 0.0 && self.pi_min < 1.0) {
            return Err(Error::param(
                "pi_min",
                format!("must lie in (0, 1), got {}", self.pi_min),
            ));
        }
        if !(self.pi_min..=1.0).contains(&self.retain_threshold) {
            return Err(Error::param(
                "retain_threshold",
                format!("must lie in [pi_min, 1], got {}", self.retain_threshold),
            ));
        }
        Ok(())
    }

    pub(crate) fn transfer(&self, features: &FeatureMap) -> Result<TransferConfig> {
        // undo the 1/d normalisation of g so MOD is the kernel itself
        TransferConfig::interaction_only(
            features.dim(),
            self.coherence_gain * features.dim() as f64,
        )
    }
}

/// Lateral position plus the agent's belief about the lane offset.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub position: f64,
    pub belief: f64,
    /// Belief one step earlier; gives the trend context.
    pub previous_belief: f64,
    /// Last attention estimate; feeds back into context when `lambda > 0`.
    pub last_estimate: f64,
}

impl AgentState {
    pub fn at(position: f64) -> Self {
        Self {
            position,
            belief: position,
            previous_belief: position,
            last_estimate: position,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// Steering delta applied to the lateral position.
    pub action: f64,
    /// Lane-offset estimate the agent steered towards.
    pub estimate: f64,
    /// Indices into the step's signals, at most `s_c` of them.
    pub attended: Vec<usize>,
    /// Post-gate signals per step (`s_r` for the baseline).
    pub effective_s_r: f64,
    /// No signal cleared the retain threshold; steered on prediction alone.
    pub fallback: bool,
    pub next_state: AgentState,
}

fn query(cfg: &AgentConfig, features: &FeatureMap, belief: f64) -> Result<Mat> {
    // logits are divided by √d downstream
    let root_d = (features.dim() as f64).sqrt();
    let mut q: Vec<f64> = features
        .probe(belief, cfg.query_bandwidth)
        .iter()
        .map(|c| cfg.query_scale * root_d * c)
        .collect();
    q[SALIENCE_SLOT] = cfg.salience_weight * root_d;
    Mat::new(1, q.len(), q)
}

fn keys_and_values(signals: &[Signal], picked: &[usize]) -> Result<(Mat, Mat)> {
    let rows: Vec<&[f64]> = picked
        .iter()
        .map(|&i| signals[i].features.as_slice())
        .collect();
    let k = Mat::from_rows(&rows)?;
    let v = Mat::new(
        picked.len(),
        1,
        picked.iter().map(|&i| signals[i].payload).collect(),
    )?;
    Ok((k, v))
}

fn attend(
    cfg: &AgentConfig,
    features: &FeatureMap,
    state: &AgentState,
    signals: &[Signal],
    picked: &[usize],
    pi: Option<&PrecisionMatrix>,
) -> Result<(f64, Vec<f64>)> {
    let (k, v) = keys_and_values(signals, picked)?;
    let inputs = AttentionInputs::new(query(cfg, features, state.belief)?, k, v)?;
    let w = attention_weights(&inputs, pi)?;
    let estimate = w.matmul(&inputs.v)?.get(0, 0);
    Ok((estimate, w.into_values()))
}

/// One perception–action step.
pub fn agent_step(
    state: &AgentState,
    signals: &[Signal],
    cfg: &AgentConfig,
    features: &FeatureMap,
) -> Result<StepOutcome> {
    if signals.is_empty() {
        return Err(Error::domain("agent_step needs at least one signal"));
    }
    let s_r = signals.len();
    let mu = state.belief;
    let (estimate, attended, effective_s_r, fallback, belief) = match cfg.variant {
        Variant::Baseline => {
            // Salience first: the budget is spent on the loudest signals.
            let mut order: Vec<usize> = (0..s_r).collect();
            order.sort_by(|&a, &b| {
                signals[b]
                    .payload
                    .abs()
                    .total_cmp(&signals[a].payload.abs())
                    .then(a.cmp(&b))
            });
            order.truncate(cfg.s_c);
            let (estimate, weights) = attend(cfg, features, state, signals, &order, None)?;
            // Post-hoc weighting: attention weights act as the precisions.
            let errors: Vec<f64> = order.iter().map(|&i| signals[i].payload - mu).collect();
            let b = BeliefState::new(vec![mu], cfg.belief_gain)?;
            let b = update_belief_baseline(&b, &errors, &weights)?;
            (estimate, order, s_r as f64, false, b.mu[0])
        }
        Variant::Co4 => {
            // Coherence first: precision over every signal, then the budget.
            let transfer = cfg.transfer(features)?;
            let feedback = features.context(state.last_estimate);
            let trend = mu + (mu - state.previous_belief);
            let contexts = [
                assemble_context(&ContextAssembly::new(
                    features.context(mu),
                    feedback.clone(),
                    cfg.lambda,
                )?)?,
                assemble_context(&ContextAssembly::new(
                    features.context(trend),
                    feedback,
                    cfg.lambda,
                )?)?,
            ];
            let evidence: Vec<&[f64]> = signals.iter().map(|s| s.features.as_slice()).collect();
            let pi = active_precision(&evidence, &contexts, &transfer, &cfg.regime, cfg.pi_min)?;
            let eff = effective_rate(&pi, cfg.retain_threshold, s_r as f64)?;
            let best = pi.row_max();
            let mut order: Vec<usize> = (0..s_r)
                .filter(|&i| best[i] >= cfg.retain_threshold)
                .collect();
            order.sort_by(|&a, &b| best[b].total_cmp(&best[a]).then(a.cmp(&b)));
            order.truncate(cfg.s_c);
            if order.is_empty() {
                (mu, order, eff, true, mu)
            } else {
                let row: Vec<f64> = order.iter().map(|&i| best[i]).collect();
                let total: f64 = row.iter().sum();
                let gate = PrecisionMatrix::new(Mat::new(1, row.len(), row)?, cfg.pi_min)?;
                let (estimate, _) = attend(cfg, features, state, signals, &order, Some(&gate))?;
                let errors = Mat::new(
                    1,
                    order.len(),
                    order.iter().map(|&i| signals[i].payload - mu).collect(),
                )?;
                let b = BeliefState::new(vec![mu], cfg.belief_gain / total)?;
                let b = update_belief_active(&b, &errors, &gate)?;
                (estimate, order, eff, false, b.mu[0])
            }
        }
    };
    let action = cfg.controller_gain * (estimate - state.position);
    Ok(StepOutcome {
        action,
        estimate,
        attended,
        effective_s_r,
        fallback,
        next_state: AgentState {
            position: state.position + action,
            belief,
            previous_belief: mu,
            last_estimate: estimate,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::stream::{generate_signals, SignalStream, StreamConfig, TrackEnv};

    fn signal(fm: &FeatureMap, payload: f64, relevant: bool, ch: usize) -> Signal {
        Signal {
            features: fm.evidence(payload, ch),
            is_relevant: relevant,
            payload,
        }
    }

    #[test]
    fn all_distractor_burst_falls_back_to_prediction() {
        let fm = FeatureMap::default();
        let signals: Vec<Signal> = (0..6)
            .map(|k| signal(&fm, 3.0 + k as f64 * 0.1, false, k))
            .collect();
        let mut state = AgentState::at(0.0);
        state.belief = 0.2;
        state.previous_belief = 0.2;
        let out = agent_step(&state, &signals, &AgentConfig::co4(4), &fm).unwrap();
        assert!(out.fallback);
        assert!(out.attended.is_empty());
        assert_eq!(out.estimate, 0.2);
        assert!(out.action > 0.0);
        assert_eq!(out.effective_s_r, 0.0);
    }

    #[test]
    fn noiseless_perfect_stream_estimates_truth() {
        let fm = FeatureMap::default();
        let env = TrackEnv::new(vec![0.3; 4], 1.5, 4).unwrap();
        let cfg = StreamConfig::new(8, 1.0, 0.0, 3.0).unwrap();
        let mut stream = SignalStream::new(cfg, fm.clone(), 4).unwrap();
        let signals = generate_signals(0, &env, &mut stream).unwrap();
        let mut state = AgentState::at(0.0);
        state.belief = 0.25;
        for agent in [AgentConfig::baseline(5), AgentConfig::co4(5)] {
            let out = agent_step(&state, &signals, &agent, &fm).unwrap();
            assert!((out.estimate - 0.3).abs() < 1e-12, "{:?}", agent.variant);
            assert_eq!(out.attended.len(), 5);
        }
    }

    #[test]
    fn baseline_spends_budget_on_salience() {
        let fm = FeatureMap::default();
        let signals = vec![
            signal(&fm, 0.1, true, 0),
            signal(&fm, -4.0, false, 1),
            signal(&fm, 0.0, true, 2),
            signal(&fm, 3.5, false, 3),
        ];
        let out = agent_step(
            &AgentState::at(0.0),
            &signals,
            &AgentConfig::baseline(2),
            &fm,
        )
        .unwrap();
        assert_eq!(out.attended, vec![1, 3]);
        let out = agent_step(&AgentState::at(0.0), &signals, &AgentConfig::co4(2), &fm).unwrap();
        let mut picked = out.attended.clone();
        picked.sort_unstable();
        assert_eq!(picked, vec![0, 2]);
        assert_eq!(out.effective_s_r, 2.0);
    }

    #[test]
    fn empty_signal_list_is_an_error() {
        let fm = FeatureMap::default();
        assert!(agent_step(&AgentState::at(0.0), &[], &AgentConfig::co4(2), &fm).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = AgentConfig::co4(3);
        assert!(c.validate().is_ok());
        c.retain_threshold = 0.01;
        assert!(c.validate().is_err());
        let mut c = AgentConfig::co4(0);
        assert!(c.validate().is_err());
        c.s_c = 1;
        c.controller_gain = 0.0;
        assert!(c.validate().is_err());
    }
}
