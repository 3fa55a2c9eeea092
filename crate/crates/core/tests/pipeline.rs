use std::fs;

use orderlab::eval::{compare, EvalConfig, Statistic};
use orderlab::markov::{coarsen_stream, MarkovModel, ALPHABET_SIZE};
use orderlab::order::Quote;
use orderlab::sim::{simulate, SimConfig};
use orderlab::stream_io::{denormalize, normalize, read_stream, sidecar_path, write_stream};
use orderlab::surrogate::{export_pairs, read_pairs, score_surrogate, write_pairs};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sim(seed: u64, n: u64) -> orderlab::order::Stream {
    let cfg = SimConfig {
        seed,
        n_orders_target: n,
        ..SimConfig::default()
    };
    simulate(&cfg).unwrap()
}

#[test]
fn stream_file_round_trip_is_byte_stable() {
    let stream = sim(3, 300_000);
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    write_stream(&stream, &a).unwrap();
    let back = read_stream(&a).unwrap();
    assert_eq!(back, stream);
    write_stream(&back, &b).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read(sidecar_path(&a)).unwrap(), fs::read(sidecar_path(&b)).unwrap());
}

#[test]
fn normalization_round_trips_within_one_unit() {
    let stream = sim(8, 20_000);
    let back = denormalize(&normalize(&stream).unwrap(), &stream.config).unwrap();
    for (x, y) in stream.observations.iter().zip(&back.observations) {
        assert_eq!(x.order.otype, y.order.otype);
        assert!(x.order.price_ticks.abs_diff(y.order.price_ticks) <= 1);
        assert!(x.order.quantity.abs_diff(y.order.quantity) <= 1);
        assert!(x.best_bid.price_ticks.abs_diff(y.best_bid.price_ticks) <= 1);
        assert!(x.best_ask.price_ticks.abs_diff(y.best_ask.price_ticks) <= 1);
    }
}

#[test]
fn markov_fit_generate_compare() {
    let stream = sim(2, 40_000);
    let model = MarkovModel::fit(&stream, 3, 0.1).unwrap();
    let seed = &stream.observations[stream.len() - 20..];
    let a = model.generate(seed, 5000, &stream.config, &mut ChaCha8Rng::seed_from_u64(1));
    let b = model.generate(seed, 5000, &stream.config, &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(a, b);
    a.validate().unwrap();
    assert!(coarsen_stream(&a).iter().all(|s| (s.index() as usize) < ALPHABET_SIZE));

    // generated files read back through the same validation as real ones
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gen.csv");
    write_stream(&a, &path).unwrap();
    assert_eq!(read_stream(&path).unwrap(), a);

    let report = compare(&stream, &a, &EvalConfig::default()).unwrap();
    assert_eq!(report.ks.len(), 3 * 5);
    for s in Statistic::ALL {
        let d = report.ks(s, None).unwrap();
        assert!((0.0..=1.0).contains(&d));
    }
    assert_eq!(report.ks(Statistic::Quantity, None), Some(0.0));
}

#[test]
fn surrogate_pairs_from_simulated_stream() {
    let stream = sim(6, 30_000);
    let pairs = export_pairs(&stream);
    assert_eq!(pairs.len(), stream.len());
    // labels chain: each pair's next quotes are the following pair's previous quotes
    for w in pairs.windows(2) {
        assert_eq!((w[0].next_bid, w[0].next_ask), (w[1].prev_bid, w[1].prev_ask));
    }
    for (p, obs) in pairs.iter().zip(&stream.observations) {
        assert_eq!((p.next_bid, p.next_ask), (obs.best_bid, obs.best_ask));
    }
    let frac = pairs.iter().filter(|p| p.recoverable).count() as f64 / pairs.len() as f64;
    assert!(frac > 0.5 && frac < 1.0, "recoverable share {frac}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.csv");
    write_pairs(&pairs, &stream.config, &path).unwrap();
    let (back, cfg) = read_pairs(&path).unwrap();
    assert_eq!(back, pairs);
    assert_eq!(cfg, stream.config);

    // predicting "quotes never change" is right exactly when the label says so
    let stay: Vec<(Quote, Quote)> = pairs.iter().map(|p| (p.prev_bid, p.prev_ask)).collect();
    let score = score_surrogate(&stay, &pairs, &cfg).unwrap();
    let unchanged = pairs
        .iter()
        .filter(|p| (p.prev_bid, p.prev_ask) == (p.next_bid, p.next_ask))
        .count() as f64
        / pairs.len() as f64;
    assert!((score.top_level_accuracy - unchanged).abs() < 1e-12);
    assert!((score.recoverable_fraction - frac).abs() < 1e-12);
}
