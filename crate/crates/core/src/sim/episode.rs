use std::io;

use serde::{Deserialize, Serialize};

use super::agent::{agent_step, AgentConfig, AgentState, StepOutcome, Variant};
use super::stream::{generate_signals, FeatureMap, Signal, SignalStream, StreamConfig, TrackEnv};
use crate::error::{Error, Result};
use crate::numerics::rms;

/// Steps excluded from the retention statistics while the belief settles.
pub const BURN_IN_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OverloadClass {
    Synchrony,
    Overload,
}

/// `γ = s_c / s_r`; `γ ≥ 1` is synchrony, `γ < 1` overload.
pub fn overload_ratio(s_c: f64, s_r: f64) -> Result<(f64, OverloadClass)> {
    if !(s_c > 0.0 && s_r > 0.0 && s_c.is_finite() && s_r.is_finite()) {
        return Err(Error::domain(format!(
            "rates must be positive, got s_c={s_c}, s_r={s_r}"
        )));
    }
    let gamma = s_c / s_r;
    let class = if gamma >= 1.0 {
        OverloadClass::Synchrony
    } else {
        OverloadClass::Overload
    };
    Ok((gamma, class))
}

pub fn drift_metric(trajectory: &[f64], centerline: &[f64]) -> Result<f64> {
    rms(trajectory, centerline)
}

/// One row of the trajectory dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub position: f64,
    pub centerline: f64,
    pub attended_count: usize,
    pub attended_relevant: usize,
    pub effective_s_r: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
}

impl Trajectory {
    pub fn positions(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.position).collect()
    }

    pub fn centerline(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.centerline).collect()
    }

    pub fn write_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(r)?;
        }
        if self.records.is_empty() {
            out.write_record([
                "step",
                "position",
                "centerline",
                "attended_count",
                "attended_relevant",
                "effective_s_r",
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(r: R) -> csv::Result<Self> {
        let records = csv::Reader::from_reader(r)
            .deserialize()
            .collect::<csv::Result<Vec<TrajectoryRecord>>>()?;
        Ok(Self { records })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub variant: Variant,
    pub s_r: usize,
    pub s_c: usize,
    pub seed: u64,
    pub gamma: f64,
    pub classification: OverloadClass,
    pub rms_drift: f64,
    pub off_track_steps: usize,
    /// Mean post-gate signals per step.
    pub effective_s_r: f64,
    /// Fraction of presented relevant signals that were attended, after burn-in.
    pub relevant_recall: f64,
    /// Fraction of presented distractors that were attended, after burn-in.
    pub distractor_retention: f64,
}

impl EpisodeMetrics {
    /// Aggregates a finished trajectory. Everything here is recomputable from
    /// the CSV dump plus the run parameters.
    pub fn from_trajectory(
        traj: &Trajectory,
        half_width: f64,
        agent: &AgentConfig,
        stream: &StreamConfig,
        seed: u64,
    ) -> Result<Self> {
        let (gamma, classification) = overload_ratio(agent.s_c as f64, stream.s_r as f64)?;
        let n = traj.records.len();
        let rms_drift = drift_metric(&traj.positions(), &traj.centerline())?;
        let off_track_steps = traj
            .records
            .iter()
            .filter(|r| (r.position - r.centerline).abs() > half_width)
            .count();
        let effective_s_r = if n == 0 {
            0.0
        } else {
            traj.records.iter().map(|r| r.effective_s_r).sum::<f64>() / n as f64
        };
        let settled = &traj.records[BURN_IN_STEPS.min(n)..];
        let (mut rel, mut dis) = (0usize, 0usize);
        for r in settled {
            rel += r.attended_relevant;
            dis += r.attended_count - r.attended_relevant;
        }
        let ratio = |hit: usize, per_step: usize| {
            let total = per_step * settled.len();
            if total == 0 {
                0.0
            } else {
                hit as f64 / total as f64
            }
        };
        Ok(Self {
            variant: agent.variant,
            s_r: stream.s_r,
            s_c: agent.s_c,
            seed,
            gamma,
            classification,
            rms_drift,
            off_track_steps,
            effective_s_r,
            relevant_recall: ratio(rel, stream.n_relevant()),
            distractor_retention: ratio(dis, stream.n_distractors()),
        })
    }
}

/// Runs one episode from a lane-centred start. Deterministic given `seed`;
/// the signal stream depends only on `seed`, `env` and `stream_cfg`, so two
/// agents run with the same seed see identical input.
pub fn run_episode(
    env: &TrackEnv,
    agent: &AgentConfig,
    stream_cfg: &StreamConfig,
    features: &FeatureMap,
    seed: u64,
) -> Result<(EpisodeMetrics, Trajectory)> {
    run_episode_observed(env, agent, stream_cfg, features, seed, |_, _, _| {})
}

/// [`run_episode`] with a per-step observer of the signals and the agent's
/// response.
pub fn run_episode_observed<F>(
    env: &TrackEnv,
    agent: &AgentConfig,
    stream_cfg: &StreamConfig,
    features: &FeatureMap,
    seed: u64,
    mut observe: F,
) -> Result<(EpisodeMetrics, Trajectory)>
where
    F: FnMut(usize, &[Signal], &StepOutcome),
{
    agent.validate()?;
    let mut stream = SignalStream::new(stream_cfg.clone(), features.clone(), seed)?;
    let start = env.centerline().first().copied().unwrap_or(0.0);
    let mut state = AgentState::at(start);
    let mut traj = Trajectory {
        records: Vec::with_capacity(env.horizon()),
    };
    for step in 0..env.horizon() {
        let signals = generate_signals(step, env, &mut stream)?;
        let out = agent_step(&state, &signals, agent, features)?;
        observe(step, &signals, &out);
        state = out.next_state.clone();
        if !state.position.is_finite() {
            return Err(Error::NonFinite("agent position"));
        }
        traj.records.push(TrajectoryRecord {
            step,
            position: state.position,
            centerline: env.centerline()[step],
            attended_count: out.attended.len(),
            attended_relevant: out
                .attended
                .iter()
                .filter(|&&i| signals[i].is_relevant)
                .count(),
            effective_s_r: out.effective_s_r,
        });
    }
    let metrics =
        EpisodeMetrics::from_trajectory(&traj, env.half_width(), agent, stream_cfg, seed)?;
    Ok((metrics, traj))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_examples() {
        assert_eq!(
            overload_ratio(2.0, 1.0).unwrap(),
            (2.0, OverloadClass::Synchrony)
        );
        assert_eq!(
            overload_ratio(1.0, 1.0).unwrap(),
            (1.0, OverloadClass::Synchrony)
        );
        assert_eq!(
            overload_ratio(1.0, 4.0).unwrap(),
            (0.25, OverloadClass::Overload)
        );
        assert!(overload_ratio(0.0, 1.0).is_err());
        assert!(overload_ratio(1.0, -2.0).is_err());
    }

    #[test]
    fn drift_examples() {
        assert_eq!(drift_metric(&[0.5, -0.2], &[0.5, -0.2]).unwrap(), 0.0);
        assert_eq!(
            drift_metric(&[1.0, 2.0, 0.0], &[0.0, 1.0, -1.0]).unwrap(),
            1.0
        );
        assert!((drift_metric(&[3.0, 4.0], &[0.0, 0.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(drift_metric(&[1.0], &[]).is_err());
    }

    #[test]
    fn zero_horizon_is_empty() {
        let env = TrackEnv::straight(0, 1.0).unwrap();
        let stream = StreamConfig::new(10, 0.5, 0.1, 3.0).unwrap();
        for agent in [AgentConfig::baseline(5), AgentConfig::co4(5)] {
            let (m, t) = run_episode(&env, &agent, &stream, &FeatureMap::default(), 1).unwrap();
            assert!(t.records.is_empty());
            assert_eq!(m.rms_drift, 0.0);
            assert_eq!(m.off_track_steps, 0);
            assert_eq!(m.effective_s_r, 0.0);
        }
    }

    #[test]
    fn straight_noiseless_lane_is_tracked_exactly() {
        let env = TrackEnv::straight(300, 1.0).unwrap();
        let stream = StreamConfig::new(10, 1.0, 0.0, 3.0).unwrap();
        for agent in [AgentConfig::baseline(4), AgentConfig::co4(4)] {
            let (m, _) = run_episode(&env, &agent, &stream, &FeatureMap::default(), 5).unwrap();
            assert!(m.rms_drift < 1e-6, "{:?}: {}", agent.variant, m.rms_drift);
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let env = TrackEnv::straight(20, 1.0).unwrap();
        let stream = StreamConfig::new(10, 0.5, 0.2, 3.0).unwrap();
        let (_, t) = run_episode(
            &env,
            &AgentConfig::co4(3),
            &stream,
            &FeatureMap::default(),
            2,
        )
        .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(
            b"step,position,centerline,attended_count,attended_relevant,effective_s_r\n"
        ));
        assert_eq!(Trajectory::read_csv(buf.as_slice()).unwrap(), t);
    }
}
