//! Training pairs for a learned best-quote transition, labelled by the exact
//! engine, and scoring of a surrogate's predictions against those labels.
//!
//! Pair CSV columns (integers, `recoverable` is 0/1):
//!
//! ```text
//! seq,delta_ms,type_code,price_ticks,qty,prev_bid_px,prev_bid_qty,prev_ask_px,prev_ask_qty,next_bid_px,next_bid_qty,next_ask_px,next_ask_qty,recoverable
//! ```
//!
//! The stream config travels in a JSON sidecar next to the CSV, as for
//! stream files.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::book::OrderBook;
use crate::order::{LimitOrder, OrderType, Quote, Stream, StreamConfig};
use crate::stream_io::{self, io_err, parse_field, parse_type, read_table, sidecar_path, StreamIoError};

pub const PAIR_HEADER: &str = "seq,delta_ms,type_code,price_ticks,qty,prev_bid_px,prev_bid_qty,prev_ask_px,prev_ask_qty,next_bid_px,next_bid_qty,next_ask_px,next_ask_qty,recoverable";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurrogatePair {
    pub order: LimitOrder,
    pub prev_bid: Quote,
    pub prev_ask: Quote,
    pub next_bid: Quote,
    pub next_ask: Quote,
    /// The label follows from the order and the two previous quotes alone.
    pub recoverable: bool,
}

impl SurrogatePair {
    pub fn label(&self) -> (Quote, Quote) {
        (self.next_bid, self.next_ask)
    }
}

/// Applies `order` to a book holding nothing but the two given quotes and
/// returns the resulting best bid and ask.
pub fn two_quote_transition(order: &LimitOrder, bid: Quote, ask: Quote, cfg: &StreamConfig) -> (Quote, Quote) {
    let mut book = OrderBook::for_config(cfg);
    if bid.is_present() {
        book.apply(&LimitOrder::new(0, OrderType::Buy, bid.price_ticks, bid.quantity));
    }
    if ask.is_present() {
        book.apply(&LimitOrder::new(0, OrderType::Sell, ask.price_ticks, ask.quantity));
    }
    book.apply(order);
    (book.best_bid(), book.best_ask())
}

/// One pair per observation. The stream's orders are replayed from an empty
/// book, so recorded quote fields are ignored.
pub fn export_pairs(stream: &Stream) -> Vec<SurrogatePair> {
    let cfg = &stream.config;
    let mut book = OrderBook::for_config(cfg);
    stream
        .orders()
        .map(|order| {
            let (prev_bid, prev_ask) = (book.best_bid(), book.best_ask());
            book.apply(order);
            let (next_bid, next_ask) = (book.best_bid(), book.best_ask());
            SurrogatePair {
                order: *order,
                prev_bid,
                prev_ask,
                next_bid,
                next_ask,
                recoverable: two_quote_transition(order, prev_bid, prev_ask, cfg) == (next_bid, next_ask),
            }
        })
        .collect()
}

pub fn write_pairs(pairs: &[SurrogatePair], cfg: &StreamConfig, path: &Path) -> Result<(), StreamIoError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> io::Result<()> {
        writeln!(out, "{PAIR_HEADER}")?;
        for (i, p) in pairs.iter().enumerate() {
            let o = &p.order;
            writeln!(
                out,
                "{i},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                o.interarrival_ms,
                o.otype.code(),
                o.price_ticks,
                o.quantity,
                p.prev_bid.price_ticks,
                p.prev_bid.quantity,
                p.prev_ask.price_ticks,
                p.prev_ask.quantity,
                p.next_bid.price_ticks,
                p.next_bid.quantity,
                p.next_ask.price_ticks,
                p.next_ask.quantity,
                u8::from(p.recoverable)
            )?;
        }
        out.flush()
    };
    write(&mut out).map_err(io_err(path))?;
    stream_io::write_config(cfg, &sidecar_path(path))
}

fn parse_pair_row(line: &str, expected_seq: usize) -> Result<SurrogatePair, String> {
    let mut f = line.split(',');
    let seq: usize = parse_field(f.next(), "seq")?;
    if seq != expected_seq {
        return Err(format!("seq {seq} out of order, expected {expected_seq}"));
    }
    let order = LimitOrder {
        interarrival_ms: parse_field(f.next(), "delta_ms")?,
        otype: parse_type(parse_field(f.next(), "type_code")?)?,
        price_ticks: parse_field(f.next(), "price_ticks")?,
        quantity: parse_field(f.next(), "qty")?,
    };
    let mut quote = |px: &str, qty: &str| -> Result<Quote, String> {
        Ok(Quote::new(parse_field(f.next(), px)?, parse_field(f.next(), qty)?))
    };
    let prev_bid = quote("prev_bid_px", "prev_bid_qty")?;
    let prev_ask = quote("prev_ask_px", "prev_ask_qty")?;
    let next_bid = quote("next_bid_px", "next_bid_qty")?;
    let next_ask = quote("next_ask_px", "next_ask_qty")?;
    let recoverable = match parse_field::<u8>(f.next(), "recoverable")? {
        0 => false,
        1 => true,
        v => return Err(format!("column recoverable: expected 0 or 1, found {v}")),
    };
    if f.next().is_some() {
        return Err("too many columns".into());
    }
    Ok(SurrogatePair {
        order,
        prev_bid,
        prev_ask,
        next_bid,
        next_ask,
        recoverable,
    })
}

pub fn read_pairs(path: &Path) -> Result<(Vec<SurrogatePair>, StreamConfig), StreamIoError> {
    let cfg = stream_io::read_config(&sidecar_path(path))?;
    Ok((read_table(path, PAIR_HEADER, parse_pair_row)?, cfg))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("{predictions} predictions for {pairs} pairs")]
    LengthMismatch { predictions: usize, pairs: usize },
    #[error("stream config has no usable price range")]
    NoPriceRange,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurrogateScore {
    pub rows: usize,
    /// Mean squared error of the two predicted prices, in normalized units.
    pub mse_price: f64,
    /// Mean squared error of the two predicted quantities, in normalized units.
    pub mse_qty: f64,
    /// Share of rows where both predicted quotes match exactly.
    pub top_level_accuracy: f64,
    pub recoverable_accuracy: Option<f64>,
    pub non_recoverable_accuracy: Option<f64>,
    pub recoverable_fraction: f64,
}

/// Scores predicted `(best_bid, best_ask)` pairs against exported labels.
/// Prices are normalized with the config's normalization range (or its price
/// bounds when none is set) and quantities with `[0, qty_max]`.
pub fn score_surrogate(
    predictions: &[(Quote, Quote)],
    pairs: &[SurrogatePair],
    cfg: &StreamConfig,
) -> Result<SurrogateScore, ScoreError> {
    if predictions.len() != pairs.len() {
        return Err(ScoreError::LengthMismatch {
            predictions: predictions.len(),
            pairs: pairs.len(),
        });
    }
    let (lo, hi) = cfg
        .normalization
        .map_or((cfg.price_min, cfg.price_max), |n| (n.price_lo, n.price_hi));
    if lo >= hi {
        return Err(ScoreError::NoPriceRange);
    }
    let price = |p: i64| 2.0 * (p - lo) as f64 / (hi - lo) as f64 - 1.0;
    let qty = |q: u64| 2.0 * q as f64 / cfg.qty_max.max(1) as f64 - 1.0;
    let (mut se_p, mut se_q) = (0.0, 0.0);
    let mut hits = [0usize; 2];
    let mut counts = [0usize; 2];
    for ((pb, pa), pair) in predictions.iter().zip(pairs) {
        for (p, l) in [(pb, &pair.next_bid), (pa, &pair.next_ask)] {
            se_p += (price(p.price_ticks) - price(l.price_ticks)).powi(2);
            se_q += (qty(p.quantity) - qty(l.quantity)).powi(2);
        }
        let class = usize::from(pair.recoverable);
        counts[class] += 1;
        if (*pb, *pa) == pair.label() {
            hits[class] += 1;
        }
    }
    let n = pairs.len();
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    Ok(SurrogateScore {
        rows: n,
        mse_price: if n == 0 { 0.0 } else { se_p / (2 * n) as f64 },
        mse_qty: if n == 0 { 0.0 } else { se_q / (2 * n) as f64 },
        top_level_accuracy: ratio(hits[0] + hits[1], n).unwrap_or(1.0),
        recoverable_accuracy: ratio(hits[1], counts[1]),
        non_recoverable_accuracy: ratio(hits[0], counts[0]),
        recoverable_fraction: ratio(counts[1], n).unwrap_or(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::replay;
    use OrderType::*;

    fn cfg() -> StreamConfig {
        StreamConfig {
            symbol: "T".into(),
            tick_size: 0.01,
            price_min: 900,
            price_max: 1100,
            qty_max: 500,
            day_start_ms: 0,
            day_end_ms: 100_000,
            normalization: None,
        }
    }

    fn pairs(orders: &[LimitOrder]) -> Vec<SurrogatePair> {
        export_pairs(&replay(orders, &cfg()).unwrap())
    }

    #[test]
    fn improving_bid_is_recoverable() {
        let p = pairs(&[
            LimitOrder::new(1, Buy, 999, 5),
            LimitOrder::new(1, Sell, 1003, 5),
            LimitOrder::new(1, Buy, 1001, 7),
        ]);
        let last = p[2];
        assert_eq!(last.next_bid, Quote::new(1001, 7));
        assert_eq!(last.next_ask, Quote::new(1003, 5));
        assert!(last.recoverable);
    }

    #[test]
    fn clearing_the_best_ask_depends_on_depth() {
        let p = pairs(&[
            LimitOrder::new(1, Buy, 999, 100),
            LimitOrder::new(1, Sell, 1001, 100),
            LimitOrder::new(1, Sell, 1002, 50),
            LimitOrder::new(1, Buy, 1001, 100),
        ]);
        let last = p[3];
        assert_eq!(last.next_ask, Quote::new(1002, 50));
        assert!(!last.recoverable);
    }

    #[test]
    fn order_below_the_best_bid_leaves_quotes_unchanged() {
        let p = pairs(&[
            LimitOrder::new(1, Buy, 999, 5),
            LimitOrder::new(1, Sell, 1003, 5),
            LimitOrder::new(1, Buy, 990, 2),
            LimitOrder::new(1, Sell, 1010, 2),
        ]);
        for last in &p[2..] {
            assert_eq!((last.prev_bid, last.prev_ask), (last.next_bid, last.next_ask));
            assert!(last.recoverable);
        }
    }

    #[test]
    fn labels_ignore_recorded_quotes() {
        let mut s = replay(&[LimitOrder::new(1, Buy, 999, 5)], &cfg()).unwrap();
        s.observations[0].best_bid = Quote::new(950, 1);
        assert_eq!(export_pairs(&s)[0].next_bid, Quote::new(999, 5));
    }

    #[test]
    fn perfect_predictions_score_one() {
        let p = pairs(&[
            LimitOrder::new(1, Buy, 999, 100),
            LimitOrder::new(1, Sell, 1001, 100),
            LimitOrder::new(1, Sell, 1002, 50),
            LimitOrder::new(1, Buy, 1001, 100),
        ]);
        let preds: Vec<_> = p.iter().map(|x| x.label()).collect();
        let s = score_surrogate(&preds, &p, &cfg()).unwrap();
        assert_eq!(s.mse_price, 0.0);
        assert_eq!(s.mse_qty, 0.0);
        assert_eq!(s.top_level_accuracy, 1.0);
        assert_eq!(s.recoverable_accuracy, Some(1.0));
        assert_eq!(s.non_recoverable_accuracy, Some(1.0));
        assert_eq!(s.recoverable_fraction, 0.75);
        assert!(matches!(
            score_surrogate(&preds[1..], &p, &cfg()),
            Err(ScoreError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let p = pairs(&[
            LimitOrder::new(1, Buy, 999, 100),
            LimitOrder::new(3, Sell, 1001, 100),
            LimitOrder::new(1, CancelBuy, 999, 30),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        write_pairs(&p, &cfg(), &path).unwrap();
        let (back, c) = read_pairs(&path).unwrap();
        assert_eq!(back, p);
        assert_eq!(c, cfg());
    }
}
