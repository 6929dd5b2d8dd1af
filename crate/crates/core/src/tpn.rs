//! Two-point-neuron modulation transfer.
//!
//! A unit receives an evidence vector `R` at its basal site and a context
//! vector `C` at its apical site. Their modulatory cooperation is
//!
//! ```text
//! MOD(R, C) = f_r(R) + f_c(C) + g(R, C)
//! f_r(R)    = r_gain · (w_r · R) / d
//! f_c(C)    = c_gain · (w_c · C) / d
//! g(R, C)   = interaction_scale · r_gain · c_gain · (R · C) / d
//! ```
//!
//! where `d` is the vector dimension and the gains come from the active
//! [`RegimeParams`]. `MOD` is unbounded here; clamping into a precision lives
//! in [`crate::precision`].

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::numerics::{dot, ensure_finite};

/// Lower edge of the "high" band for regime gains.
pub const HIGH: f64 = 0.7;
/// Upper edge of the "low" band for regime gains.
pub const LOW: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MentalState {
    /// Context is disconnected from the output.
    SWSleep,
    /// Evidence-driven with moderate contextual modulation.
    Wakefulness,
    /// Context drives output with weak evidence.
    REMSleep,
    /// Strong evidence and strong context; maximal amplification.
    AwakeThought,
}

impl MentalState {
    pub const ALL: [MentalState; 4] = [
        MentalState::SWSleep,
        MentalState::Wakefulness,
        MentalState::REMSleep,
        MentalState::AwakeThought,
    ];
}

/// Strength ladder for the two awake regimes: routine perception
/// (moderate–high) versus deliberate imaginative thought (high–maximal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrengthLadder {
    ModHigh,
    HighMax,
}

/// R/C gain configuration for one mental state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRegime")]
pub struct RegimeParams {
    state: MentalState,
    r_gain: f64,
    c_gain: f64,
}

#[derive(Deserialize)]
struct RawRegime {
    state: MentalState,
    r_gain: f64,
    c_gain: f64,
}

impl TryFrom<RawRegime> for RegimeParams {
    type Error = Error;

    fn try_from(raw: RawRegime) -> Result<Self> {
        RegimeParams::new(raw.state, raw.r_gain, raw.c_gain)
    }
}

impl RegimeParams {
    /// Validates that the gains are in `[0, 1]` and consistent with `state`.
    pub fn new(state: MentalState, r_gain: f64, c_gain: f64) -> Result<Self> {
        for (name, g) in [("r_gain", r_gain), ("c_gain", c_gain)] {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::domain(format!("{name} must be in [0, 1], got {g}")));
            }
        }
        let ok = match state {
            MentalState::SWSleep => c_gain == 0.0,
            MentalState::Wakefulness => r_gain >= HIGH && (LOW..HIGH).contains(&c_gain),
            MentalState::REMSleep => c_gain >= HIGH && r_gain <= LOW,
            MentalState::AwakeThought => r_gain >= HIGH && c_gain >= HIGH,
        };
        if !ok {
            return Err(Error::domain(format!(
                "gains (r={r_gain}, c={c_gain}) are inconsistent with {state:?}"
            )));
        }
        Ok(Self {
            state,
            r_gain,
            c_gain,
        })
    }

    /// Representative gains for each state.
    pub fn preset(state: MentalState) -> Self {
        let (r_gain, c_gain) = match state {
            MentalState::SWSleep => (1.0, 0.0),
            MentalState::Wakefulness => (0.85, 0.5),
            MentalState::REMSleep => (0.2, 0.9),
            MentalState::AwakeThought => (1.0, 1.0),
        };
        Self {
            state,
            r_gain,
            c_gain,
        }
    }

    pub fn ladder(level: StrengthLadder) -> Self {
        match level {
            StrengthLadder::ModHigh => Self::preset(MentalState::Wakefulness),
            StrengthLadder::HighMax => Self::preset(MentalState::AwakeThought),
        }
    }

    pub fn state(&self) -> MentalState {
        self.state
    }

    pub fn r_gain(&self) -> f64 {
        self.r_gain
    }

    pub fn c_gain(&self) -> f64 {
        self.c_gain
    }
}

/// Readout weights and interaction scale for `MOD`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub w_r: Vec<f64>,
    pub w_c: Vec<f64>,
    pub interaction_scale: f64,
}

impl TransferConfig {
    pub fn new(w_r: Vec<f64>, w_c: Vec<f64>, interaction_scale: f64) -> Result<Self> {
        let cfg = Self {
            w_r,
            w_c,
            interaction_scale,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Pure interaction: zero readout weights.
    pub fn interaction_only(dim: usize, interaction_scale: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![0.0; dim], interaction_scale)
    }

    pub fn dim(&self) -> usize {
        self.w_r.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_len("TransferConfig w_c", self.w_r.len(), self.w_c.len())?;
        if self.w_r.is_empty() {
            return Err(Error::domain("TransferConfig dimension must be positive"));
        }
        ensure_finite("TransferConfig w_r", &self.w_r)?;
        ensure_finite("TransferConfig w_c", &self.w_c)?;
        if !(self.interaction_scale > 0.0 && self.interaction_scale.is_finite()) {
            return Err(Error::domain(format!(
                "interaction_scale must be positive, got {}",
                self.interaction_scale
            )));
        }
        Ok(())
    }
}

/// Integrated evidence drive.
pub fn f_r(evidence: &[f64], cfg: &TransferConfig, regime: &RegimeParams) -> Result<f64> {
    check_len("f_r", cfg.w_r.len(), evidence.len())?;
    Ok(regime.r_gain * dot(&cfg.w_r, evidence) / evidence.len() as f64)
}

/// Integrated contextual drive.
pub fn f_c(context: &[f64], cfg: &TransferConfig, regime: &RegimeParams) -> Result<f64> {
    check_len("f_c", cfg.w_c.len(), context.len())?;
    Ok(regime.c_gain * dot(&cfg.w_c, context) / context.len() as f64)
}

/// Multiplicative evidence–context interaction.
pub fn g_interact(
    evidence: &[f64],
    context: &[f64],
    cfg: &TransferConfig,
    regime: &RegimeParams,
) -> Result<f64> {
    check_len("g_interact", evidence.len(), context.len())?;
    if evidence.is_empty() {
        return Err(Error::dim("g_interact", 1, 0));
    }
    Ok(
        cfg.interaction_scale * regime.r_gain * regime.c_gain * dot(evidence, context)
            / evidence.len() as f64,
    )
}

pub fn mod_transfer(
    evidence: &[f64],
    context: &[f64],
    cfg: &TransferConfig,
    regime: &RegimeParams,
) -> Result<f64> {
    let r = f_r(evidence, cfg, regime)?;
    let c = f_c(context, cfg, regime)?;
    let g = g_interact(evidence, context, cfg, regime)?;
    Ok(r + c + g)
}

/// Maps R/C strengths in `[0, 1]²` onto a regime. The unclassified middle
/// band falls back to wakefulness.
pub fn classify_regime(r_strength: f64, c_strength: f64) -> Result<MentalState> {
    for (name, v) in [("r_strength", r_strength), ("c_strength", c_strength)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::domain(format!("{name} must be in [0, 1], got {v}")));
        }
    }
    let state = if c_strength < LOW {
        MentalState::SWSleep
    } else if c_strength >= HIGH && r_strength <= LOW {
        MentalState::REMSleep
    } else if r_strength >= HIGH && c_strength >= HIGH {
        MentalState::AwakeThought
    } else {
        MentalState::Wakefulness
    };
    Ok(state)
}
