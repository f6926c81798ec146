//! Labelled synthetic CC/CV sessions with known per-EV battery signatures.
//!
//! A session is a flat constant-current plateau at `pilot_level - cc_gap`
//! followed by an exponential constant-voltage tail carrying periodic
//! single-sample spikes, then a run of exact zeros once the decay envelope
//! drops below [`ZERO_CUTOFF`].
//!
//! Besides per-sample Gaussian noise, each session perturbs its signature's
//! `cc_gap`, `decay_rate` and `spike_amplitude` by noise of the same scale,
//! so noisy signatures overlap between sessions while noiseless ones repeat
//! exactly.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{ChargingSession, Corpus};
use crate::rng::{derive_seed, rng_from};
use crate::series::TimeSeries;

/// Envelope level (A) below which the current is switched off.
pub const ZERO_CUTOFF: f64 = 1.0;
/// Spikes are only added while the envelope is at least this high (A).
pub const SPIKE_FLOOR: f64 = 3.0;
pub const MIN_SESSION_LEN: usize = 120;

const PILOT_LEVELS: [f64; 3] = [16.0, 24.0, 32.0];
const DECAY_RANGE: (f64, f64) = (0.07, 0.11);
const DECAY_STEPS: usize = 25;
const GAP_RANGE: (f64, f64) = (0.75, 3.75);
const GAP_STEPS: usize = 13;
const SPIKE_AMPLITUDE_RANGE: (f64, f64) = (0.5, 2.5);
const SPIKE_PERIOD_RANGE: (usize, usize) = (8, 20);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Separation {
    WellSeparated,
    Overlapping,
}

impl std::str::FromStr for Separation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "well-separated" => Ok(Self::WellSeparated),
            "overlapping" => Ok(Self::Overlapping),
            other => Err(Error::Config(format!("unknown separation `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSignature {
    pub pilot_level: f64,
    pub cc_gap: f64,
    pub decay_rate: f64,
    pub spike_period: usize,
    pub spike_amplitude: f64,
    pub noise_sigma: f64,
    pub cv_onset_fraction: f64,
}

impl SyntheticSignature {
    pub fn validate(&self) -> Result<()> {
        let ok = self.pilot_level > self.cc_gap
            && self.cc_gap >= 0.0
            && self.decay_rate > 0.0
            && self.noise_sigma >= 0.0
            && self.spike_period >= 1
            && (0.6..=0.8).contains(&self.cv_onset_fraction);
        if ok {
            Ok(())
        } else {
            Err(Error::Param(format!("invalid signature {self:?}")))
        }
    }

    /// Current level during the constant-current phase.
    pub fn plateau(&self) -> f64 {
        self.pilot_level - self.cc_gap
    }
}

fn grid_value(range: (f64, f64), steps: usize, i: usize) -> f64 {
    range.0 + (range.1 - range.0) * i as f64 / (steps - 1) as f64
}

/// Grid spacing of decay rates in well-separated mode.
pub fn decay_grid_step() -> f64 {
    (DECAY_RANGE.1 - DECAY_RANGE.0) / (DECAY_STEPS - 1) as f64
}

/// Deterministic signature for EV `ev_index`.
///
/// Well-separated signatures place `(decay_rate, cc_gap)` on distinct grid
/// cells (the first 25 EVs all have distinct decay rates) and use little
/// noise. Overlapping signatures draw every parameter from continuous ranges.
pub fn generate_signature(ev_index: usize, seed: u64, separation: Separation) -> SyntheticSignature {
    let mut rng = rng_from(derive_seed(&[seed, ev_index as u64, 0x516]));
    let pilot_level = PILOT_LEVELS[rng.random_range(0..PILOT_LEVELS.len())];
    let spike_period = rng.random_range(SPIKE_PERIOD_RANGE.0..=SPIKE_PERIOD_RANGE.1);
    let spike_amplitude = rng.random_range(SPIKE_AMPLITUDE_RANGE.0..=SPIKE_AMPLITUDE_RANGE.1);
    let cv_onset_fraction = rng.random_range(0.6..=0.8);
    match separation {
        Separation::WellSeparated => {
            let mut grid_rng = rng_from(derive_seed(&[seed, 0x6121D]));
            let mut decay_perm: Vec<usize> = (0..DECAY_STEPS).collect();
            decay_perm.shuffle(&mut grid_rng);
            let mut gap_perm: Vec<usize> = (0..GAP_STEPS).collect();
            gap_perm.shuffle(&mut grid_rng);
            let (round, slot) = (ev_index / DECAY_STEPS, ev_index % DECAY_STEPS);
            SyntheticSignature {
                pilot_level,
                cc_gap: grid_value(GAP_RANGE, GAP_STEPS, gap_perm[(slot + round) % GAP_STEPS]),
                decay_rate: grid_value(DECAY_RANGE, DECAY_STEPS, decay_perm[slot]),
                spike_period,
                spike_amplitude,
                noise_sigma: 0.05,
                cv_onset_fraction,
            }
        }
        Separation::Overlapping => SyntheticSignature {
            pilot_level,
            cc_gap: rng.random_range(GAP_RANGE.0..=GAP_RANGE.1),
            decay_rate: rng.random_range(DECAY_RANGE.0..=DECAY_RANGE.1),
            spike_period,
            spike_amplitude,
            noise_sigma: rng.random_range(0.1..=0.3),
            cv_onset_fraction,
        },
    }
}

/// Ground truth planted in a generated session.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub cv_onset: usize,
    /// First index of the terminal zero run; `None` for truncated sessions.
    pub zero_onset: Option<usize>,
    pub truncated: bool,
}

/// Raw `(pilot, current)` samples and the planted boundaries.
pub fn generate_signals(
    signature: &SyntheticSignature,
    session_seed: u64,
    length: usize,
    truncate_prob: f64,
) -> Result<(Vec<f64>, Vec<f64>, PlantedTruth)> {
    signature.validate()?;
    if length < MIN_SESSION_LEN {
        return Err(Error::Param(format!(
            "session length must be >= {MIN_SESSION_LEN}, got {length}"
        )));
    }
    if !(0.0..=1.0).contains(&truncate_prob) {
        return Err(Error::Param(format!(
            "truncate probability must be in [0, 1], got {truncate_prob}"
        )));
    }
    let mut rng = rng_from(session_seed);
    let noise = Normal::new(0.0, signature.noise_sigma)
        .map_err(|e| Error::Param(format!("noise sigma: {e}")))?;
    let cv_onset = (signature.cv_onset_fraction * length as f64).floor() as usize;
    // session-to-session variation, proportional to the noise level
    let cc_gap = (signature.cc_gap + noise.sample(&mut rng)).clamp(0.0, signature.pilot_level - 1.0);
    let decay_rate = signature.decay_rate * (1.0 + 0.1 * noise.sample(&mut rng));
    let spike_amplitude = (signature.spike_amplitude + noise.sample(&mut rng)).max(0.0);
    let level = signature.pilot_level - cc_gap;
    let mut current = Vec::with_capacity(length);
    let mut zero_onset = None;
    for t in 0..length {
        let v = if t < cv_onset {
            level + noise.sample(&mut rng)
        } else if zero_onset.is_some() {
            0.0
        } else {
            let k = t - cv_onset;
            let envelope = level * (-decay_rate * k as f64).exp();
            if envelope < ZERO_CUTOFF {
                zero_onset = Some(t);
                0.0
            } else {
                let spike = if k > 0 && k.is_multiple_of(signature.spike_period) && envelope >= SPIKE_FLOOR {
                    spike_amplitude
                } else {
                    0.0
                };
                envelope + spike + noise.sample(&mut rng)
            }
        };
        current.push(v.max(0.0));
    }
    let truncated = truncate_prob > 0.0 && rng.random_bool(truncate_prob);
    if truncated {
        let cut = rng.random_range(cv_onset / 4..cv_onset.max(cv_onset / 4 + 1));
        current.truncate(cut.max(1));
        zero_onset = None;
    }
    let pilot = vec![signature.pilot_level; current.len()];
    Ok((
        pilot,
        current,
        PlantedTruth {
            cv_onset,
            zero_onset,
            truncated,
        },
    ))
}

pub fn generate_session(
    signature: &SyntheticSignature,
    session_seed: u64,
    length: usize,
    truncate_prob: f64,
) -> Result<ChargingSession> {
    generate_session_with_truth(signature, session_seed, length, truncate_prob, "SYN", "SYN-0")
        .map(|(s, _)| s)
}

pub fn generate_session_with_truth(
    signature: &SyntheticSignature,
    session_seed: u64,
    length: usize,
    truncate_prob: f64,
    ev_label: &str,
    session_id: &str,
) -> Result<(ChargingSession, PlantedTruth)> {
    let (pilot, current, truth) = generate_signals(signature, session_seed, length, truncate_prob)?;
    let session = ChargingSession::new(
        session_id,
        Some(ev_label.to_string()),
        "SYN-STATION",
        None,
        TimeSeries::from_values(pilot)?,
        TimeSeries::from_values(current)?,
    )?;
    Ok((session, truth))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub separation: Separation,
    pub min_len: usize,
    pub max_len: usize,
    pub truncate_prob: f64,
    /// Replaces every signature's noise level when set.
    pub noise_sigma: Option<f64>,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            separation: Separation::WellSeparated,
            min_len: 300,
            max_len: 1200,
            truncate_prob: 0.0,
            noise_sigma: None,
        }
    }
}

/// A generated corpus together with each session's planted truth.
#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub truth: Vec<PlantedTruth>,
    pub signatures: Vec<SyntheticSignature>,
}

pub fn generate_corpus(
    n_evs: usize,
    sessions_per_ev: usize,
    seed: u64,
    options: &SynthOptions,
) -> Result<SyntheticCorpus> {
    if n_evs == 0 || sessions_per_ev == 0 {
        return Err(Error::Param("n_evs and sessions_per_ev must be >= 1".into()));
    }
    if options.min_len < MIN_SESSION_LEN || options.max_len < options.min_len {
        return Err(Error::Param(format!(
            "invalid length bounds [{}, {}]",
            options.min_len, options.max_len
        )));
    }
    let signatures: Vec<SyntheticSignature> = (0..n_evs)
        .map(|i| {
            let mut s = generate_signature(i, seed, options.separation);
            if let Some(sigma) = options.noise_sigma {
                s.noise_sigma = sigma;
            }
            s
        })
        .collect();
    let generated: Vec<(ChargingSession, PlantedTruth)> = (0..n_evs * sessions_per_ev)
        .into_par_iter()
        .map(|k| {
            let (ev, j) = (k / sessions_per_ev, k % sessions_per_ev);
            let session_seed = derive_seed(&[seed, ev as u64, j as u64, 0x5E55]);
            let length = rng_from(session_seed ^ 0x1E6).random_range(options.min_len..=options.max_len);
            generate_session_with_truth(
                &signatures[ev],
                session_seed,
                length,
                options.truncate_prob,
                &format!("SYN-{ev}"),
                &format!("SYN-{ev}-{j}"),
            )
        })
        .collect::<Result<_>>()?;
    let (sessions, truth): (Vec<_>, Vec<_>) = generated.into_iter().unzip();
    Ok(SyntheticCorpus {
        corpus: Corpus::new(sessions, format!("synth:seed={seed}"))?,
        truth,
        signatures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::FilterParams;
    use crate::tail::{segment_session, RejectionCode, TailParams};

    fn quiet(sig: SyntheticSignature) -> SyntheticSignature {
        SyntheticSignature { noise_sigma: 0.0, ..sig }
    }

    #[test]
    fn signature_is_deterministic() {
        for sep in [Separation::WellSeparated, Separation::Overlapping] {
            assert_eq!(generate_signature(3, 11, sep), generate_signature(3, 11, sep));
            generate_signature(3, 11, sep).validate().unwrap();
        }
    }

    #[test]
    fn well_separated_decay_rates_are_distinct() {
        let sigs: Vec<_> = (0..25).map(|i| generate_signature(i, 5, Separation::WellSeparated)).collect();
        for a in 0..25 {
            for b in a + 1..25 {
                let d = (sigs[a].decay_rate - sigs[b].decay_rate).abs();
                assert!(d >= decay_grid_step() - 1e-12);
            }
        }
    }

    #[test]
    fn overlapping_gaps_collide() {
        let sigs: Vec<_> = (0..100).map(|i| generate_signature(i, 5, Separation::Overlapping)).collect();
        let close = (0..100).any(|a| {
            (a + 1..100).any(|b| (sigs[a].cc_gap - sigs[b].cc_gap).abs() < sigs[a].noise_sigma)
        });
        assert!(close);
    }

    #[test]
    fn noiseless_session_shape() {
        let sig = quiet(generate_signature(0, 1, Separation::WellSeparated));
        let (pilot, current, truth) = generate_signals(&sig, 9, 400, 0.0).unwrap();
        assert!(pilot.iter().all(|&p| p == sig.pilot_level));
        assert!(current[..truth.cv_onset].iter().all(|&c| c == sig.plateau()));
        let z = truth.zero_onset.unwrap();
        assert!(current[z..].iter().all(|&c| c == 0.0));
        assert!(current[z - 1] >= ZERO_CUTOFF);
        assert_eq!(truth.cv_onset, (sig.cv_onset_fraction * 400.0).floor() as usize);
    }

    #[test]
    fn noiseless_boundaries_are_recovered() {
        let params = TailParams::default();
        for ev in 0..30 {
            for sep in [Separation::WellSeparated, Separation::Overlapping] {
                let sig = quiet(generate_signature(ev, 2, sep));
                for len in [300, 777, 1200] {
                    let (s, truth) = generate_session_with_truth(&sig, ev as u64, len, 0.0, "A", "a").unwrap();
                    let seg = segment_session(&s, &FilterParams::default(), &params).unwrap();
                    assert!(seg.t_start.abs_diff(truth.cv_onset) <= params.t_max, "{sig:?} {seg:?}");
                    assert!(seg.t_s.abs_diff(truth.zero_onset.unwrap()) <= 1);
                }
            }
        }
    }

    #[test]
    fn truncated_session_has_no_anchor() {
        let sig = generate_signature(0, 1, Separation::Overlapping);
        let (s, truth) = generate_session_with_truth(&sig, 4, 500, 1.0, "A", "a").unwrap();
        assert!(truth.truncated);
        let err = segment_session(&s, &FilterParams::default(), &TailParams::default()).unwrap_err();
        assert_eq!(err.code, RejectionCode::NoZeroAnchor);
    }

    #[test]
    fn seeds_perturb_around_the_signature() {
        let sig = generate_signature(2, 1, Separation::Overlapping);
        let (_, a, _) = generate_signals(&sig, 1, 500, 0.0).unwrap();
        let (_, b, _) = generate_signals(&sig, 2, 500, 0.0).unwrap();
        assert_ne!(a, b);
        let mean = |v: &[f64]| v[..200].iter().sum::<f64>() / 200.0;
        assert!((mean(&a) - mean(&b)).abs() < 4.0 * sig.noise_sigma + 0.05);
    }

    #[test]
    fn short_length_is_error() {
        let sig = generate_signature(0, 1, Separation::Overlapping);
        assert!(generate_signals(&sig, 1, 119, 0.0).is_err());
    }

    #[test]
    fn corpus_counts_and_determinism() {
        let opts = SynthOptions::default();
        let a = generate_corpus(4, 5, 3, &opts).unwrap();
        assert_eq!(a.corpus.len(), 20);
        assert_eq!(a.corpus.sessions_per_ev().len(), 4);
        let b = generate_corpus(4, 5, 3, &opts).unwrap();
        assert_eq!(a.corpus.sessions, b.corpus.sessions);
    }
}
