use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Incoming signal stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    /// Signals per step.
    pub s_r: usize,
    /// Fraction of signals that read the lane centre.
    pub rho: f64,
    /// Standard deviation of relevant readings (m).
    pub obs_noise: f64,
    /// Typical distractor amplitude (m).
    pub distractor_scale: f64,
    /// White jitter on distractor payloads, as a fraction of `distractor_scale`.
    #[serde(default = "StreamConfig::default_jitter")]
    pub distractor_jitter: f64,
    /// Distractor periods are drawn uniformly from this range (steps).
    #[serde(default = "StreamConfig::default_periods")]
    pub distractor_periods: [f64; 2],
}

impl StreamConfig {
    fn default_jitter() -> f64 {
        0.05
    }

    fn default_periods() -> [f64; 2] {
        [150.0, 600.0]
    }

    pub fn new(s_r: usize, rho: f64, obs_noise: f64, distractor_scale: f64) -> Result<Self> {
        let cfg = Self {
            s_r,
            rho,
            obs_noise,
            distractor_scale,
            distractor_jitter: Self::default_jitter(),
            distractor_periods: Self::default_periods(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.s_r == 0 {
            return Err(Error::param("s_r", "must be at least 1"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::param(
                "rho",
                format!("must lie in (0, 1], got {}", self.rho),
            ));
        }
        if self.n_relevant() == 0 {
            return Err(Error::param(
                "rho",
                format!(
                    "rho * s_r = {} yields no relevant signal per step",
                    self.rho * self.s_r as f64
                ),
            ));
        }
        for (name, v) in [
            ("obs_noise", self.obs_noise),
            ("distractor_scale", self.distractor_scale),
            ("distractor_jitter", self.distractor_jitter),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(
                    name,
                    format!("must be finite and nonnegative, got {v}"),
                ));
            }
        }
        let [lo, hi] = self.distractor_periods;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::param(
                "distractor_periods",
                format!("must satisfy 0 < lo <= hi, got [{lo}, {hi}]"),
            ));
        }
        Ok(())
    }

    /// Relevant signals per step, `round(rho · s_r)`.
    pub fn n_relevant(&self) -> usize {
        ((self.rho * self.s_r as f64).round() as usize).min(self.s_r)
    }

    pub fn n_distractors(&self) -> usize {
        self.s_r - self.n_relevant()
    }
}

/// Parameters for a curving centerline built from sinusoids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackSpec {
    pub horizon: usize,
    pub half_width: f64,
    pub amplitudes: Vec<f64>,
    pub periods: Vec<f64>,
}

impl TrackSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::param(
                "half_width",
                format!("must be positive, got {}", self.half_width),
            ));
        }
        if self.amplitudes.len() != self.periods.len() {
            return Err(Error::param(
                "periods",
                format!(
                    "{} periods for {} amplitudes",
                    self.periods.len(),
                    self.amplitudes.len()
                ),
            ));
        }
        if self.periods.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::param("periods", "must be positive"));
        }
        if self.amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::param("amplitudes", "must be finite"));
        }
        Ok(())
    }
}

/// A centerline of lateral offsets, one per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackEnv {
    centerline: Vec<f64>,
    half_width: f64,
    horizon: usize,
}

impl TrackEnv {
    pub fn new(centerline: Vec<f64>, half_width: f64, horizon: usize) -> Result<Self> {
        if centerline.len() < horizon {
            return Err(Error::dim("TrackEnv centerline", horizon, centerline.len()));
        }
        if centerline.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("TrackEnv centerline"));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::domain(format!(
                "half_width must be positive, got {half_width}"
            )));
        }
        Ok(Self {
            centerline,
            half_width,
            horizon,
        })
    }

    /// Straight lane at offset zero.
    pub fn straight(horizon: usize, half_width: f64) -> Result<Self> {
        Self::new(vec![0.0; horizon], half_width, horizon)
    }

    /// Sum of sinusoids with seed-drawn phases, shifted so the lane starts at
    /// offset zero.
    pub fn from_spec(spec: &TrackSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = Rng::with_stream(seed, TRACK_STREAM);
        let phases: Vec<f64> = spec
            .amplitudes
            .iter()
            .map(|_| rng.uniform_in(0.0, TAU))
            .collect();
        let centerline = (0..spec.horizon)
            .map(|t| {
                spec.amplitudes
                    .iter()
                    .zip(&spec.periods)
                    .zip(&phases)
                    .map(|((a, p), ph)| a * ((TAU * t as f64 / p + ph).sin() - ph.sin()))
                    .sum()
            })
            .collect();
        Self::new(centerline, spec.half_width, spec.horizon)
    }

    pub fn centerline(&self) -> &[f64] {
        &self.centerline[..self.horizon]
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

pub(crate) const TRACK_STREAM: u64 = 1;
pub(crate) const SIGNAL_STREAM: u64 = 2;

/// One incoming signal. `is_relevant` is ground truth for metrics only.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub features: Vec<f64>,
    pub is_relevant: bool,
    pub payload: f64,
}

/// Embeds a scalar lateral reading and its channel into a feature vector
///
/// ```text
/// [1, |x| / salience_scale, cos θ, sin θ, √w₁ cos ω₁x, √w₁ sin ω₁x, …, √w_K cos ω_K x, √w_K sin ω_K x]
/// ```
///
/// with θ encoding the channel id, harmonics `ω_k = 2πk / period` and weights
/// `w_k ∝ exp(-(ω_k·bandwidth)²/2)` normalised to sum to one. A context
/// vector built from a predicted offset zeroes the first four slots, so
///
/// ```text
/// R · C = Σ_k w_k cos(ω_k (x − prediction)) = kernel(x − prediction)
/// ```
///
/// a periodised Gaussian of width `bandwidth` (minus its mean) with
/// `kernel(0) = 1`. The period must exceed the span of payloads for the
/// agreement to be unambiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureMap {
    /// Kernel width (m).
    pub bandwidth: f64,
    /// Period of the lowest harmonic (m).
    pub period: f64,
    pub harmonics: usize,
    pub salience_scale: f64,
}

impl Default for FeatureMap {
    fn default() -> Self {
        Self {
            bandwidth: 0.35,
            period: 16.0,
            harmonics: 24,
            salience_scale: 4.0,
        }
    }
}

pub(crate) const SALIENCE_SLOT: usize = 1;
const FIXED_SLOTS: usize = 4;

impl FeatureMap {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("bandwidth", self.bandwidth),
            ("period", self.period),
            ("salience_scale", self.salience_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if self.harmonics == 0 {
            return Err(Error::param("harmonics", "must be at least 1"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        FIXED_SLOTS + 2 * self.harmonics
    }

    /// `(ω_k, w_k)` for a kernel of the given width, weights summing to one.
    fn harmonic_weights(&self, bandwidth: f64) -> impl Iterator<Item = (f64, f64)> {
        let base = TAU / self.period;
        let raw = move |k: usize| {
            let w = base * k as f64 * bandwidth;
            (-0.5 * w * w).exp()
        };
        let total: f64 = (1..=self.harmonics).map(raw).sum();
        (1..=self.harmonics).map(move |k| (base * k as f64, raw(k) / total))
    }

    /// `R · C` for readings `delta` apart.
    pub fn kernel(&self, delta: f64) -> f64 {
        self.kernel_with(self.bandwidth, delta)
    }

    /// Same family of kernel at another width.
    pub fn kernel_with(&self, bandwidth: f64, delta: f64) -> f64 {
        self.harmonic_weights(bandwidth)
            .map(|(w, a)| a * (w * delta).cos())
            .sum()
    }

    fn push_phase(&self, x: f64, out: &mut Vec<f64>) {
        for (w, a) in self.harmonic_weights(self.bandwidth) {
            let (s, c) = (w * x).sin_cos();
            let a = a.sqrt();
            out.push(a * c);
            out.push(a * s);
        }
    }

    /// Probe vector whose dot product with `evidence(x, _)` equals
    /// `kernel_with(bandwidth, x - prediction)`; lets a reader compare
    /// readings at a width other than the encoding's own. Fixed slots are zero.
    pub fn probe(&self, prediction: f64, bandwidth: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        out.extend([0.0; FIXED_SLOTS]);
        for ((w, own), (_, target)) in self
            .harmonic_weights(self.bandwidth)
            .zip(self.harmonic_weights(bandwidth))
        {
            let (s, c) = (w * prediction).sin_cos();
            let a = target / own.sqrt();
            out.push(a * c);
            out.push(a * s);
        }
        out
    }

    pub fn evidence(&self, payload: f64, channel: usize) -> Vec<f64> {
        let theta = TAU * (channel as f64 * GOLDEN).fract();
        let (s, c) = theta.sin_cos();
        let mut out = Vec::with_capacity(self.dim());
        out.extend([1.0, payload.abs() / self.salience_scale, c, s]);
        self.push_phase(payload, &mut out);
        out
    }

    pub fn context(&self, prediction: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        out.extend([0.0; FIXED_SLOTS]);
        self.push_phase(prediction, &mut out);
        out
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone)]
struct DistractorChannel {
    amplitude: f64,
    period: f64,
    phase: f64,
}

/// Episode-long generator of the signal stream. Owns its own random stream,
/// so what it emits never depends on agent behaviour.
#[derive(Debug, Clone)]
pub struct SignalStream {
    cfg: StreamConfig,
    features: FeatureMap,
    distractors: Vec<DistractorChannel>,
    rng: Rng,
}

impl SignalStream {
    pub fn new(cfg: StreamConfig, features: FeatureMap, seed: u64) -> Result<Self> {
        cfg.validate()?;
        features.validate()?;
        let mut rng = Rng::with_stream(seed, SIGNAL_STREAM);
        let [lo, hi] = cfg.distractor_periods;
        let distractors = (0..cfg.n_distractors())
            .map(|_| DistractorChannel {
                amplitude: cfg.distractor_scale * rng.uniform_in(0.5, 1.5),
                period: rng.uniform_in(lo, hi),
                phase: rng.uniform_in(0.0, TAU),
            })
            .collect();
        Ok(Self {
            cfg,
            features,
            distractors,
            rng,
        })
    }

    pub fn config(&self) -> &StreamConfig {
        &self.cfg
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }
}

/// Emits the `s_r` signals for `step`, shuffled.
pub fn generate_signals(
    step: usize,
    env: &TrackEnv,
    stream: &mut SignalStream,
) -> Result<Vec<Signal>> {
    if step >= env.horizon() {
        return Err(Error::domain(format!(
            "step {step} beyond horizon {}",
            env.horizon()
        )));
    }
    let truth = env.centerline()[step];
    let n_rel = stream.cfg.n_relevant();
    let mut out = Vec::with_capacity(stream.cfg.s_r);
    for k in 0..n_rel {
        let payload = truth + stream.cfg.obs_noise * stream.rng.normal();
        out.push(Signal {
            features: stream.features.evidence(payload, k),
            is_relevant: true,
            payload,
        });
    }
    let jitter = stream.cfg.distractor_jitter * stream.cfg.distractor_scale;
    for (k, ch) in stream.distractors.iter().enumerate() {
        let base = ch.amplitude * (TAU * step as f64 / ch.period + ch.phase).sin();
        let payload = base + jitter * stream.rng.normal();
        out.push(Signal {
            features: stream.features.evidence(payload, n_rel + k),
            is_relevant: false,
            payload,
        });
    }
    stream.rng.shuffle(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> TrackEnv {
        TrackEnv::from_spec(
            &TrackSpec {
                horizon: 50,
                half_width: 1.5,
                amplitudes: vec![1.0, 0.4],
                periods: vec![300.0, 90.0],
            },
            3,
        )
        .unwrap()
    }

    #[test]
    fn all_relevant_when_rho_is_one() {
        let cfg = StreamConfig::new(12, 1.0, 0.1, 3.0).unwrap();
        let mut s = SignalStream::new(cfg, FeatureMap::default(), 1).unwrap();
        let sig = generate_signals(0, &env(), &mut s).unwrap();
        assert_eq!(sig.len(), 12);
        assert!(sig.iter().all(|x| x.is_relevant));
    }

    #[test]
    fn relevant_count_is_rounded_fraction() {
        let cfg = StreamConfig::new(100, 0.2, 0.1, 3.0).unwrap();
        let mut s = SignalStream::new(cfg, FeatureMap::default(), 1).unwrap();
        let e = env();
        for step in 0..10 {
            let sig = generate_signals(step, &e, &mut s).unwrap();
            assert_eq!(sig.iter().filter(|x| x.is_relevant).count(), 20);
            assert_eq!(sig.len(), 100);
        }
    }

    #[test]
    fn noiseless_relevant_payloads_read_the_centre() {
        let cfg = StreamConfig::new(10, 0.5, 0.0, 3.0).unwrap();
        let mut s = SignalStream::new(cfg, FeatureMap::default(), 9).unwrap();
        let e = env();
        for step in [0, 7, 49] {
            let sig = generate_signals(step, &e, &mut s).unwrap();
            for x in sig.iter().filter(|x| x.is_relevant) {
                assert_eq!(x.payload, e.centerline()[step]);
            }
        }
        assert!(generate_signals(50, &e, &mut s).is_err());
    }

    #[test]
    fn stream_validation() {
        assert!(StreamConfig::new(0, 0.5, 0.1, 1.0).is_err());
        assert!(StreamConfig::new(10, 0.0, 0.1, 1.0).is_err());
        assert!(StreamConfig::new(10, 1.2, 0.1, 1.0).is_err());
        assert!(StreamConfig::new(10, 0.01, 0.1, 1.0).is_err());
        assert!(StreamConfig::new(10, 0.5, -0.1, 1.0).is_err());
    }

    #[test]
    fn context_agreement_is_a_kernel() {
        let fm = FeatureMap::default();
        let c = fm.context(0.4);
        let dot = |x: f64| crate::numerics::dot(&fm.evidence(x, 17), &c);
        assert!((dot(0.4) - 1.0).abs() < 1e-12);
        assert!((fm.kernel(0.0) - 1.0).abs() < 1e-12);
        for x in [0.6, -1.5, 5.0] {
            assert!((dot(x) - fm.kernel(x - 0.4)).abs() < 1e-12);
        }
        // decays monotonically out to several metres, no aliasing
        let mut prev = fm.kernel(0.0);
        for i in 1..20 {
            let k = fm.kernel(0.05 * i as f64);
            assert!(k < prev);
            prev = k;
        }
        for i in 0..70 {
            assert!(fm.kernel(1.5 + 0.1 * i as f64) < 0.05);
        }
        assert_eq!(fm.evidence(2.0, 0).len(), fm.dim());
    }

    #[test]
    fn probe_reads_at_its_own_width() {
        let fm = FeatureMap::default();
        for bw in [0.35, 0.8, 1.5] {
            let p = fm.probe(-0.7, bw);
            for x in [-0.7, 0.0, 1.3, 4.0] {
                let got = crate::numerics::dot(&fm.evidence(x, 3), &p);
                assert!((got - fm.kernel_with(bw, x + 0.7)).abs() < 1e-12);
            }
        }
        assert!(fm.kernel_with(1.5, 1.0) > fm.kernel(1.0));
    }

    #[test]
    fn track_starts_at_zero() {
        let e = env();
        assert_eq!(e.centerline()[0], 0.0);
        assert_eq!(e.centerline().len(), 50);
        assert!(TrackEnv::new(vec![0.0; 3], 1.0, 4).is_err());
        assert!(TrackEnv::new(vec![0.0; 3], 0.0, 3).is_err());
    }
}
