//! Ten-level relevance filter.
//!
//! Pass one replays the raw sequence and marks every order that either trades
//! on arrival or, while any part of it rests, sits at a level among the ten
//! best of its side. Pass two drops the unmarked limit orders together with
//! the cancels that only touched them, then replays the survivors so quotes
//! and deltas are recomputed.
//!
//! A kept cancel is rewritten to the quantity it actually removed from kept
//! orders. Without that, a cancel that removed a dropped chunk ahead of a kept
//! one would eat further into the kept queue on the second replay.

use crate::book::{replay, OrderBook, ReplayError};
use crate::order::{LimitOrder, Side, Stream, StreamConfig};

pub const RELEVANCE_LEVELS: usize = 10;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PreprocessReport {
    pub input_orders: usize,
    pub kept_orders: usize,
    pub dropped_limit_orders: usize,
    pub dropped_cancels: usize,
    /// Kept cancels whose quantity was reduced to what they removed from
    /// kept orders.
    pub rewritten_cancels: usize,
}

/// Per-order verdict of the first pass: `Some(order)` to keep (cancels
/// possibly with a reduced quantity), `None` to drop.
pub fn relevant_orders(orders: &[LimitOrder], cfg: &StreamConfig) -> Vec<Option<LimitOrder>> {
    let mut book = OrderBook::for_config(cfg);
    let mut marked = vec![false; orders.len()];
    let mut cancel_hits: Vec<(usize, Vec<(u64, u64)>)> = Vec::new();

    for (i, order) in orders.iter().enumerate() {
        debug_assert_eq!(book.next_seq(), i as u64);
        let outcome = book.apply(order);
        if order.otype.is_cancel() {
            let hits = outcome.removed.iter().map(|e| (e.seq, e.quantity)).collect();
            cancel_hits.push((i, hits));
        } else if !outcome.transactions.is_empty() {
            marked[i] = true;
        }
        for side in [Side::Buy, Side::Sell] {
            let top: Vec<i64> = book.prices(side).take(RELEVANCE_LEVELS).collect();
            for price in top {
                // unmarked chunks always form a suffix of the level queue
                for entry in book.entries_at(side, price).rev() {
                    let m = &mut marked[entry.seq as usize];
                    if *m {
                        break;
                    }
                    *m = true;
                }
            }
        }
    }

    let mut verdict: Vec<Option<LimitOrder>> = orders
        .iter()
        .zip(&marked)
        .map(|(o, &m)| (!o.otype.is_cancel() && m).then_some(*o))
        .collect();
    for (i, hits) in cancel_hits {
        let kept: u64 = hits
            .iter()
            .filter(|(seq, _)| marked[*seq as usize])
            .map(|(_, q)| q)
            .sum();
        if kept > 0 {
            let mut c = orders[i];
            c.quantity = kept;
            verdict[i] = Some(c);
        }
    }
    verdict
}

/// Drops orders that never reach the ten best levels of their side and
/// replays the survivors. Deltas of dropped orders are carried into the next
/// surviving order so survivors keep their absolute arrival times.
pub fn preprocess(raw_orders: &[LimitOrder], cfg: &StreamConfig) -> Result<(Stream, PreprocessReport), ReplayError> {
    cfg.validate()?;
    let verdict = relevant_orders(raw_orders, cfg);
    let mut report = PreprocessReport {
        input_orders: raw_orders.len(),
        ..Default::default()
    };
    let mut survivors = Vec::with_capacity(raw_orders.len());
    let mut carried: u64 = 0;
    for (raw, kept) in raw_orders.iter().zip(verdict) {
        match kept {
            Some(mut order) => {
                if order.quantity != raw.quantity {
                    report.rewritten_cancels += 1;
                }
                order.interarrival_ms += carried;
                carried = 0;
                survivors.push(order);
            }
            None => {
                carried += raw.interarrival_ms;
                if raw.otype.is_cancel() {
                    report.dropped_cancels += 1;
                } else {
                    report.dropped_limit_orders += 1;
                }
            }
        }
    }
    report.kept_orders = survivors.len();
    Ok((replay(&survivors, cfg)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::OrderType::*;
    use crate::order::Quote;

    fn cfg() -> StreamConfig {
        StreamConfig {
            symbol: "T".into(),
            tick_size: 0.01,
            price_min: 0,
            price_max: 5000,
            qty_max: 1000,
            day_start_ms: 0,
            day_end_ms: 10_000_000,
            normalization: None,
        }
    }

    fn lo(d: u64, t: crate::order::OrderType, p: i64, q: u64) -> LimitOrder {
        LimitOrder::new(d, t, p, q)
    }

    #[test]
    fn best_bid_order_is_kept() {
        let orders = [lo(1, Buy, 1000, 5)];
        let (s, r) = preprocess(&orders, &cfg()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(r.dropped_limit_orders, 0);
        assert_eq!(s.observations[0].best_bid, Quote::new(1000, 5));
    }

    #[test]
    fn deep_order_and_its_cancel_are_dropped() {
        let mut orders: Vec<_> = (0..10).map(|i| lo(1, Buy, 1000 - i, 5)).collect();
        orders.push(lo(7, Buy, 950, 3)); // 11th level, never reaches the top ten
        orders.push(lo(2, Sell, 1005, 1));
        orders.push(lo(4, CancelBuy, 950, 3));
        orders.push(lo(1, Sell, 1006, 1));
        let (s, r) = preprocess(&orders, &cfg()).unwrap();
        assert_eq!(r.dropped_limit_orders, 1);
        assert_eq!(r.dropped_cancels, 1);
        assert_eq!(s.len(), orders.len() - 2);
        // deltas of the dropped orders are carried forward
        assert_eq!(s.total_ms(), orders.iter().map(|o| o.interarrival_ms).sum::<u64>());
        assert_eq!(s.observations[10].order.interarrival_ms, 7 + 2);
        assert_eq!(s.observations[11].order.interarrival_ms, 4 + 1);
    }

    #[test]
    fn deep_order_promoted_later_is_kept() {
        let mut orders: Vec<_> = (0..10).map(|i| lo(1, Buy, 1000 - i, 1)).collect();
        orders.push(lo(1, Buy, 950, 1));
        // sweep the best level, promoting 950 into the top ten
        orders.push(lo(1, Sell, 1000, 1));
        let (_, r) = preprocess(&orders, &cfg()).unwrap();
        assert_eq!(r.dropped_limit_orders, 0);
    }

    #[test]
    fn mixed_cancel_is_reduced_to_its_kept_part() {
        let mut orders: Vec<_> = (0..10).map(|i| lo(1, Buy, 1000 - i, 1)).collect();
        orders.push(lo(1, Buy, 950, 2)); // dropped: deep while resting
        orders.push(lo(1, CancelBuy, 950, 2));
        orders.push(lo(1, Buy, 950, 1)); // rests at 950 alone, then promoted
        orders.push(lo(1, Sell, 1000, 1));
        let v = relevant_orders(&orders, &cfg());
        assert!(v[10].is_none());
        assert!(v[11].is_none());
        assert!(v[12].is_some());

        // now a dropped chunk ahead of a kept chunk at the same level
        let mut orders: Vec<_> = (0..10).map(|i| lo(1, Buy, 1000 - i, 1)).collect();
        orders.push(lo(1, Buy, 950, 2)); // seq 10, deep
        orders.push(lo(1, CancelBuy, 950, 2)); // seq 11 removes seq 10 only
        orders.push(lo(1, Buy, 950, 2)); // seq 12
        orders.push(lo(1, Sell, 1000, 1)); // promotes 950 -> seq 12 kept
        orders.push(lo(1, Buy, 950, 1)); // seq 14, kept (level in top ten)
        orders.push(lo(1, CancelBuy, 950, 5)); // removes 12 and 14 entirely
        let v = relevant_orders(&orders, &cfg());
        assert!(v[10].is_none());
        assert!(v[11].is_none());
        assert_eq!(v[15].map(|o| o.quantity), Some(3));
        let (s, r) = preprocess(&orders, &cfg()).unwrap();
        assert_eq!(r.rewritten_cancels, 1);
        let (again, r2) = preprocess(&s.orders().copied().collect::<Vec<_>>(), &cfg()).unwrap();
        assert_eq!(again, s);
        assert_eq!(r2.kept_orders, r2.input_orders);
    }

    #[test]
    fn marketable_order_is_kept_even_if_fully_filled() {
        let orders = [lo(1, Sell, 1000, 1), lo(1, Buy, 1000, 1)];
        let (s, _) = preprocess(&orders, &cfg()).unwrap();
        assert_eq!(s.len(), 2);
    }
}
