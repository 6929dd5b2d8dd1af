//! Lateral lane following under information overload.
//!
//! Each step the environment emits `s_r` signals: a fraction `rho` are noisy
//! readings of the lane centre, the rest are distractors with slowly varying
//! sinusoidal structure and large magnitude. An agent may attend at most
//! `s_c` of them. The baseline agent picks the most salient signals (largest
//! magnitude) and then runs plain attention over them. The coherence-first
//! agent scores every signal against its current belief with active
//! precision, keeps the best `s_c` above a retain threshold, and runs gated
//! attention over those.
//!
//! `S_C` is measured as an attention budget in signals per step.

mod agent;
mod episode;
mod stream;

pub use agent::{agent_step, AgentConfig, AgentState, StepOutcome, Variant};
pub use episode::{
    drift_metric, overload_ratio, run_episode, run_episode_observed, EpisodeMetrics, OverloadClass,
    Trajectory, TrajectoryRecord, BURN_IN_STEPS,
};
pub use stream::{
    generate_signals, FeatureMap, Signal, SignalStream, StreamConfig, TrackEnv, TrackSpec,
};
