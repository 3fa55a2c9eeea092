use std::collections::HashMap;

use orderlab::book::replay;
use orderlab::order::{LimitOrder, Normalization, OrderType, Stream, StreamConfig};
use orderlab::sampler::{max_spaced, sample_batch, windows, write_batches, BatchSpec, SamplerError};
use orderlab::stream_io::normalize;
use orderlab_testkit::max_spaced_exhaustive;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Alternating buy/sell stream of `len` orders spread over the day.
fn stream(len: usize, delta_ms: u64) -> Stream {
    let cfg = StreamConfig {
        symbol: "T".into(),
        tick_size: 0.01,
        price_min: 900,
        price_max: 1100,
        qty_max: 100,
        day_start_ms: 0,
        day_end_ms: 24 * 3_600_000,
        normalization: Some(Normalization {
            price_lo: 900,
            price_hi: 1100,
        }),
    };
    let orders: Vec<LimitOrder> = (0..len)
        .map(|i| {
            let (t, p) = if i % 2 == 0 { (OrderType::Buy, 990) } else { (OrderType::Sell, 1010) };
            LimitOrder::new(delta_ms, t, p, 1)
        })
        .collect();
    replay(&orders, &cfg).unwrap()
}

#[test]
fn window_counts_and_targets() {
    let s = stream(1000, 1);
    let w = windows(&s, 20).unwrap();
    assert_eq!(w.len(), 980);
    for (j, win) in w.iter().enumerate() {
        assert_eq!(win.start_index, j);
        assert_eq!(win.target_index(), j + 20);
        assert_eq!(win.history.len(), 20);
        assert_eq!(win.target, &s.observations[j + 20]);
        assert_eq!(win.bucket(), s.observations[j + 20].bucket);
    }
    assert_eq!(windows(&stream(21, 1), 20).unwrap().len(), 1);
    assert_eq!(windows(&stream(20, 1), 20), Err(SamplerError::TooShort { len: 20, k: 20 }));
}

#[test]
fn default_batch_feasibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let spec = BatchSpec::default();
    assert_eq!(sample_batch(&stream(10_000, 1), &spec, &mut rng).unwrap().len(), 64);
    let short = stream(1400, 1);
    let err = sample_batch(&short, &spec, &mut rng).unwrap_err();
    assert_eq!(
        err,
        SamplerError::Infeasible {
            requested: 64,
            min_gap: 21,
            max_feasible: 63
        }
    );
    let spec63 = BatchSpec { batch_size: 63, ..spec };
    assert_eq!(sample_batch(&short, &spec63, &mut rng).unwrap().len(), 63);
}

#[test]
fn feasibility_bound_matches_exhaustive_search() {
    for n_windows in 1..=16 {
        for min_gap in 1..=6 {
            let starts: Vec<usize> = (0..n_windows).collect();
            assert_eq!(max_spaced(starts.clone(), min_gap), max_spaced_exhaustive(&starts, min_gap));
        }
    }
    // irregular start sets, as left over by the per-bucket filter
    for mask in (1u32..(1 << 14)).step_by(37) {
        let starts: Vec<usize> = (0..14).filter(|i| mask & (1 << i) != 0).collect();
        for min_gap in 1..=4 {
            assert_eq!(max_spaced(starts.clone(), min_gap), max_spaced_exhaustive(&starts, min_gap));
        }
    }
}

#[test]
fn infeasible_requests_report_the_exhaustive_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for len in 4..=20 {
        let s = stream(len, 1);
        for k in 1..=3 {
            if len <= k {
                continue;
            }
            let min_gap = k + 1;
            let starts: Vec<usize> = (0..len - k).collect();
            let best = max_spaced_exhaustive(&starts, min_gap);
            let ok = BatchSpec {
                k,
                batch_size: best,
                min_gap,
                per_bucket: false,
            };
            assert_eq!(sample_batch(&s, &ok, &mut rng).unwrap().len(), best);
            let too_many = BatchSpec { batch_size: best + 1, ..ok };
            assert_eq!(
                sample_batch(&s, &too_many, &mut rng),
                Err(SamplerError::Infeasible {
                    requested: best + 1,
                    min_gap,
                    max_feasible: best
                })
            );
        }
    }
}

#[test]
fn gap_below_history_is_rejected() {
    let spec = BatchSpec {
        k: 20,
        batch_size: 2,
        min_gap: 20,
        per_bucket: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(
        sample_batch(&stream(500, 1), &spec, &mut rng),
        Err(SamplerError::GapTooSmall { min_gap: 20, k: 20 })
    );
}

#[test]
fn placements_are_uniform() {
    // 8 windows, gaps > 2, pairs: every feasible pair of starts should be drawn
    // equally often
    let s = stream(9, 1);
    let spec = BatchSpec {
        k: 1,
        batch_size: 2,
        min_gap: 2,
        per_bucket: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
    let draws = 30_000;
    for _ in 0..draws {
        let b = sample_batch(&s, &spec, &mut rng).unwrap();
        let (x, y) = (b[0].start_index.min(b[1].start_index), b[0].start_index.max(b[1].start_index));
        *counts.entry((x, y)).or_default() += 1;
    }
    let feasible = (0..8).flat_map(|x| (x + 3..8).map(move |y| (x, y))).count();
    assert_eq!(counts.len(), feasible);
    let expected = draws as f64 / feasible as f64;
    for (pair, c) in counts {
        assert!((c as f64 - expected).abs() < 0.1 * expected, "{pair:?}: {c} vs {expected}");
    }
}

#[test]
fn per_bucket_windows_stay_in_one_bucket() {
    // one order every 10 minutes: six per hour-long bucket
    let s = stream(144, 600_000);
    let spec = BatchSpec {
        k: 3,
        batch_size: 10,
        min_gap: 4,
        per_bucket: true,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        for w in sample_batch(&s, &spec, &mut rng).unwrap() {
            assert!(w.history.iter().all(|h| h.bucket == w.target.bucket));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn batches_are_spaced_and_seeded(len in 30usize..600, k in 1usize..10, extra in 0usize..5, batch in 1usize..8, seed: u64) {
        let s = stream(len, 1);
        let spec = BatchSpec { k, batch_size: batch, min_gap: k + 1 + extra, per_bucket: false };
        let a = sample_batch(&s, &spec, &mut ChaCha8Rng::seed_from_u64(seed));
        let b = sample_batch(&s, &spec, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(&a, &b);
        match a {
            Ok(windows) => {
                prop_assert_eq!(windows.len(), batch);
                for (i, x) in windows.iter().enumerate() {
                    for y in &windows[i + 1..] {
                        prop_assert!(x.start_index.abs_diff(y.start_index) > spec.min_gap);
                    }
                }
            }
            Err(SamplerError::Infeasible { max_feasible, .. }) => {
                prop_assert!(max_feasible < batch);
                prop_assert_eq!(max_feasible, max_spaced(0..len - k, spec.min_gap));
            }
            Err(e) => prop_assert!(false, "unexpected error {}", e),
        }
    }
}

#[test]
fn batch_export_layout() {
    let s = stream(400, 1);
    let norm = normalize(&s).unwrap();
    let spec = BatchSpec {
        k: 5,
        batch_size: 4,
        min_gap: 6,
        per_bucket: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let batches: Vec<_> = (0..3).map(|_| sample_batch(&s, &spec, &mut rng).unwrap()).collect();
    let mut out = Vec::new();
    write_batches(&norm, &batches, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 16);
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3 * 4 * 6);
    for r in &rows {
        let (start, pos) = (r[2] as usize, r[3] as usize);
        let n = &norm[start + pos];
        assert_eq!(r[5], n.p);
        assert!(r[4..11].iter().all(|v| (-1.0..=1.0).contains(v)));
        assert_eq!(r[11..15].iter().sum::<f64>(), 1.0);
    }
}
