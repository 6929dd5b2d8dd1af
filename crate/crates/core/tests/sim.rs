use co4_core::sim::{
    overload_ratio, run_episode, run_episode_observed, AgentConfig, FeatureMap, Signal,
    StreamConfig, TrackEnv, TrackSpec, Variant, BURN_IN_STEPS,
};

fn track(horizon: usize) -> TrackSpec {
    TrackSpec {
        horizon,
        half_width: 1.5,
        amplitudes: vec![1.0, 0.5],
        periods: vec![400.0, 150.0],
    }
}

fn fingerprint(signals: &[Signal]) -> Vec<u64> {
    signals
        .iter()
        .flat_map(|s| {
            std::iter::once(s.payload.to_bits())
                .chain(std::iter::once(s.is_relevant as u64))
                .chain(s.features.iter().map(|f| f.to_bits()))
        })
        .collect()
}

#[test]
fn paired_agents_see_identical_streams() {
    let fm = FeatureMap::default();
    let env = TrackEnv::from_spec(&track(300), 5).unwrap();
    let stream = StreamConfig::new(120, 0.25, 0.1, 4.0).unwrap();
    let mut seen = Vec::new();
    for variant in [Variant::Baseline, Variant::Co4] {
        let mut steps = Vec::new();
        run_episode_observed(
            &env,
            &AgentConfig::co4(40).with_variant(variant),
            &stream,
            &fm,
            5,
            |_, s, _| steps.push(fingerprint(s)),
        )
        .unwrap();
        seen.push(steps);
    }
    assert_eq!(seen[0].len(), 300);
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn budget_and_rate_bounds_hold_every_step() {
    let fm = FeatureMap::default();
    for (s_r, s_c, seed) in [(10, 50, 1), (50, 50, 2), (200, 50, 3), (60, 7, 4)] {
        let env = TrackEnv::from_spec(&track(250), seed).unwrap();
        let stream = StreamConfig::new(s_r, 0.25, 0.1, 4.0).unwrap();
        for variant in [Variant::Baseline, Variant::Co4] {
            let agent = AgentConfig::co4(s_c).with_variant(variant);
            run_episode_observed(&env, &agent, &stream, &fm, seed, |step, s, out| {
                assert_eq!(s.len(), s_r);
                assert!(
                    out.attended.len() <= s_c,
                    "step {step}: {} > {s_c}",
                    out.attended.len()
                );
                assert!(out.effective_s_r <= s_r as f64);
            })
            .unwrap();
        }
    }
}

#[test]
fn clean_stream_is_retained_exactly_after_burn_in() {
    let fm = FeatureMap::default();
    let env = TrackEnv::from_spec(&track(600), 9).unwrap();
    let stream = StreamConfig::new(30, 1.0, 0.0, 4.0).unwrap();
    let mut retained = 0;
    run_episode_observed(
        &env,
        &AgentConfig::co4(30),
        &stream,
        &fm,
        9,
        |step, s, out| {
            if step >= BURN_IN_STEPS {
                assert!(out.attended.iter().all(|&i| s[i].is_relevant));
                retained += out.attended.len();
            }
        },
    )
    .unwrap();
    assert!(retained > 0);
}

#[test]
fn reported_gamma_is_the_overload_ratio() {
    let fm = FeatureMap::default();
    let env = TrackEnv::from_spec(&track(20), 0).unwrap();
    for (s_r, s_c) in [(25, 50), (50, 50), (200, 50), (3, 7)] {
        let stream = StreamConfig::new(s_r, 0.5, 0.1, 4.0).unwrap();
        let (m, _) = run_episode(&env, &AgentConfig::co4(s_c), &stream, &fm, 0).unwrap();
        let (gamma, class) = overload_ratio(s_c as f64, s_r as f64).unwrap();
        assert_eq!(m.gamma, gamma);
        assert_eq!(m.classification, class);
    }
}

#[test]
fn episodes_replay_exactly() {
    let fm = FeatureMap::default();
    let env = TrackEnv::from_spec(&track(200), 4).unwrap();
    let stream = StreamConfig::new(100, 0.25, 0.1, 4.0).unwrap();
    for variant in [Variant::Baseline, Variant::Co4] {
        let agent = AgentConfig::co4(50).with_variant(variant);
        let a = run_episode(&env, &agent, &stream, &fm, 4).unwrap();
        let b = run_episode(&env, &agent, &stream, &fm, 4).unwrap();
        assert_eq!(a, b);
        let c = run_episode(&env, &agent, &stream, &fm, 5).unwrap();
        assert_ne!(a.1, c.1);
    }
}
