use proptest::prelude::*;

use evprof_core::ingest::{apply_primary_filters, parse_sessions, write_sessions, ChargingSession, Corpus, Format};
use evprof_core::signal::FilterParams;
use evprof_core::synth::{generate_session_with_truth, generate_signature, Separation, SyntheticSignature};
use evprof_core::tail::{segment_session, TailParams};
use evprof_core::TimeSeries;

type RawSession = (Option<String>, Vec<f64>, Vec<f64>, f64, bool);

fn session() -> impl Strategy<Value = RawSession> {
    (
        prop::option::of("[A-Z]{1,3}[0-9]{0,3}"),
        prop::collection::vec(0.0f64..64.0, 1..60),
        prop::collection::vec(0.0f64..40.0, 1..60),
        prop::sample::select(vec![0.5, 1.0, 4.0]),
        any::<bool>(),
    )
}

fn build(raw: Vec<RawSession>) -> Vec<ChargingSession> {
    raw.into_iter()
        .enumerate()
        .map(|(i, (label, pilot, current, period, timed))| {
            let time = timed.then(|| chrono::DateTime::parse_from_rfc3339("2019-05-01T08:30:00-07:00").unwrap());
            ChargingSession::new(
                format!("S{i}"),
                label,
                format!("ST{}", i % 3),
                time,
                TimeSeries::new(pilot, period).unwrap(),
                TimeSeries::new(current, period).unwrap(),
            )
            .unwrap()
        })
        .collect()
}

proptest! {
    #[test]
    fn sessions_round_trip_through_both_formats(raw in prop::collection::vec(session(), 0..12), csv in any::<bool>()) {
        let sessions = build(raw);
        let format = if csv { Format::Csv } else { Format::AcnJson };
        let mut buf = Vec::new();
        write_sessions(&sessions, &mut buf, format).unwrap();
        let back = parse_sessions(buf.as_slice(), format, "mem").unwrap();
        prop_assert_eq!(back.sessions, sessions);
        prop_assert_eq!(back.provenance.stats.dropped_missing, 0);
    }

    #[test]
    fn admission_filters_are_idempotent(raw in prop::collection::vec(session(), 0..30), min_points in 1usize..50, min_sessions in 1usize..4) {
        let corpus = Corpus::new(build(raw), "mem").unwrap();
        let once = apply_primary_filters(&corpus, min_points, min_sessions);
        let twice = apply_primary_filters(&once, min_points, min_sessions);
        prop_assert_eq!(&once, &twice);
        prop_assert!(once.sessions.iter().all(|s| s.label().is_some() && s.len() >= min_points));
        prop_assert!(once.sessions_per_ev().values().all(|&n| n >= min_sessions));
    }
}

fn quiet(ev: usize, seed: u64, sep: Separation) -> SyntheticSignature {
    SyntheticSignature {
        noise_sigma: 0.0,
        spike_amplitude: 0.0,
        ..generate_signature(ev, seed, sep)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn segmentation_is_deterministic_and_ordered(ev in 0usize..50, seed in any::<u64>(), len in 300usize..1200, overlap in any::<bool>()) {
        let sep = if overlap { Separation::Overlapping } else { Separation::WellSeparated };
        let sig = generate_signature(ev, seed, sep);
        let (s, _) = generate_session_with_truth(&sig, seed, len, 0.0, "EV", "s").unwrap();
        let a = segment_session(&s, &FilterParams::default(), &TailParams::default());
        let b = segment_session(&s, &FilterParams::default(), &TailParams::default());
        prop_assert_eq!(&a, &b);
        if let Ok(seg) = a {
            prop_assert!(seg.t_start < seg.t_s && seg.t_s <= len);
            prop_assert_eq!(seg.tail.len(), seg.t_s - seg.t_start);
            prop_assert_eq!(seg.delta.len(), seg.t_start);
        }
    }

    #[test]
    fn short_spikes_in_the_tail_move_the_boundary_little(
        ev in 0usize..50,
        seed in any::<u64>(),
        len in 400usize..1200,
        spikes in prop::collection::vec((0.05f64..0.95, 1usize..=2, 0.5f64..10.0), 1..=3),
    ) {
        let params = TailParams::default();
        let sig = quiet(ev, seed, Separation::WellSeparated);
        let (clean, truth) = generate_session_with_truth(&sig, seed, len, 0.0, "EV", "s").unwrap();
        let base = segment_session(&clean, &FilterParams::default(), &params).unwrap();
        let zero = truth.zero_onset.unwrap();
        let mut current = clean.current.values().to_vec();
        let span = zero - truth.cv_onset;
        let placed: Vec<(usize, usize, f64)> = spikes
            .iter()
            .map(|&(at, width, amp)| {
                let start = truth.cv_onset + ((span as f64 * at) as usize).min(span.saturating_sub(width + 1));
                (start, width, amp)
            })
            .collect();
        let gap = 2 * params.max_spike_len;
        for (i, a) in placed.iter().enumerate() {
            for b in &placed[..i] {
                prop_assume!(a.0 >= b.0 + b.1 + gap || b.0 >= a.0 + a.1 + gap);
            }
        }
        let mut bound = 0;
        for &(start, width, amp) in &placed {
            for v in &mut current[start..start + width] {
                *v += amp;
            }
            bound += params.t_max + 2 * width;
        }
        let spiked = ChargingSession {
            current: TimeSeries::from_values(current).unwrap(),
            ..clean
        };
        let seg = segment_session(&spiked, &FilterParams::default(), &params).unwrap();
        prop_assert!(seg.t_start.abs_diff(base.t_start) <= bound, "{} vs {} (bound {})", seg.t_start, base.t_start, bound);
    }
}
