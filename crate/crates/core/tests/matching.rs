use orderlab::book::{replay, OrderBook};
use orderlab::eval::quote_series;
use orderlab::order::{LimitOrder, OrderType, Side, StreamConfig};
use orderlab_testkit::{prefix_quotes, random_orders, NaiveBook, WALKTHROUGH, WALKTHROUGH_QUOTES};
use proptest::prelude::*;

fn cfg() -> StreamConfig {
    StreamConfig {
        symbol: "T".into(),
        tick_size: 0.01,
        price_min: 0,
        price_max: 5000,
        qty_max: 1_000_000,
        day_start_ms: 0,
        day_end_ms: 1_000_000_000,
        normalization: None,
    }
}

fn to_order(&(code, price, qty): &(u8, i64, u64)) -> LimitOrder {
    LimitOrder::new(1, OrderType::from_code(code).unwrap(), price, qty)
}

fn order_strategy(levels: i64) -> impl Strategy<Value = (u8, i64, u64)> {
    (0u8..4, 1000..1000 + levels, 1u64..=5)
}

/// Runs both books side by side and checks every observable after each order.
fn check_against_naive(orders: &[(u8, i64, u64)]) -> Result<(), TestCaseError> {
    let mut book = OrderBook::for_config(&cfg());
    let mut naive = NaiveBook::new();
    for (i, t) in orders.iter().enumerate() {
        let had_level = book.quantity_at(to_order(t).otype.side(), t.1) > 0;
        let out = book.apply(&to_order(t));
        let expect = naive.apply(t.0, t.1, t.2);

        let fills: Vec<(i64, u64)> = out.transactions.iter().map(|x| (x.price_ticks, x.quantity)).collect();
        prop_assert_eq!(&fills, &expect.fills, "fills at order {}", i);
        let removed: Vec<(usize, u64)> = out.removed.iter().map(|e| (e.seq as usize, e.quantity)).collect();
        prop_assert_eq!(&removed, &expect.removed, "removed chunks at order {}", i);

        for side in [Side::Buy, Side::Sell] {
            let buy = side == Side::Buy;
            prop_assert_eq!(book.prices(side).collect::<Vec<_>>(), naive.levels(buy));
            for p in naive.levels(buy) {
                let q: u64 = naive.resting.iter().filter(|r| r.buy == buy && r.price == p).map(|r| r.qty).sum();
                prop_assert_eq!(book.quantity_at(side, p), q);
            }
        }
        let (bid, ask) = (book.best_bid(), book.best_ask());
        if bid.is_present() && ask.is_present() {
            prop_assert!(bid.price_ticks < ask.price_ticks, "crossed after order {}", i);
        }

        let o = to_order(t);
        if o.otype.is_cancel() {
            prop_assert_eq!(out.cancelled, expect.removed.iter().map(|r| r.1).sum::<u64>());
            prop_assert!(out.cancelled <= o.quantity);
            prop_assert_eq!(out.noop_cancel, !had_level);
            prop_assert!(out.transactions.is_empty());
        } else {
            prop_assert_eq!(out.traded() + out.rested, o.quantity);
            // all fills at the resting price, never worse than the limit
            for x in &out.transactions {
                let within_limit = if o.otype == OrderType::Buy {
                    x.price_ticks <= o.price_ticks
                } else {
                    x.price_ticks >= o.price_ticks
                };
                prop_assert!(within_limit);
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn engine_matches_naive_book(orders in prop::collection::vec(order_strategy(10), 0..50)) {
        check_against_naive(&orders)?;
    }

    #[test]
    fn engine_matches_naive_book_on_two_levels(orders in prop::collection::vec(order_strategy(2), 0..80)) {
        check_against_naive(&orders)?;
    }

    #[test]
    fn quote_series_matches_prefix_replay(orders in prop::collection::vec(order_strategy(10), 1..50)) {
        let limit: Vec<LimitOrder> = orders.iter().map(to_order).collect();
        let stream = replay(&limit, &cfg()).unwrap();
        let series = quote_series(&stream);
        let expect = prefix_quotes(&orders);
        let c = cfg();
        for (i, (bid, ask)) in expect.iter().enumerate() {
            prop_assert_eq!(series.bid[i], bid.map_or(c.price_min, |b| b.0));
            prop_assert_eq!(series.ask[i], ask.map_or(c.price_max, |a| a.0));
            prop_assert_eq!(stream.observations[i].best_bid.quantity, bid.map_or(0, |b| b.1));
            prop_assert_eq!(stream.observations[i].best_ask.quantity, ask.map_or(0, |a| a.1));
        }
    }

    #[test]
    fn resting_quantity_is_conserved(orders in prop::collection::vec(order_strategy(6), 0..60)) {
        let mut book = OrderBook::for_config(&cfg());
        let (mut rested, mut cancelled, mut consumed) = ([0u64; 2], [0u64; 2], [0u64; 2]);
        for t in &orders {
            let o = to_order(t);
            let out = book.apply(&o);
            let s = o.otype.side() as usize;
            if o.otype.is_cancel() {
                cancelled[s] += out.cancelled;
            } else {
                rested[s] += out.rested;
                consumed[1 - s] += out.traded();
            }
        }
        for side in [Side::Buy, Side::Sell] {
            let s = side as usize;
            prop_assert_eq!(book.total_quantity(side), rested[s] - cancelled[s] - consumed[s]);
        }
    }
}

#[test]
fn many_seeded_sequences_match_naive_book() {
    for seed in 0..2000 {
        let orders = random_orders(seed, 1 + (seed as usize % 50), 10);
        check_against_naive(&orders).unwrap();
    }
}

#[test]
fn walkthrough_quotes() {
    let orders: Vec<LimitOrder> = WALKTHROUGH
        .iter()
        .map(|&(d, c, p, q)| LimitOrder::new(d, OrderType::from_code(c).unwrap(), p, q))
        .collect();
    let stream = replay(&orders, &cfg()).unwrap();
    let series = quote_series(&stream);
    for (i, (bid, ask)) in WALKTHROUGH_QUOTES.iter().enumerate() {
        assert_eq!(series.bid[i], bid.unwrap_or(0));
        assert_eq!(series.ask[i], ask.unwrap_or(5000));
    }
    // the closing sell leaves 30 of its 80 units resting at 1000
    let last = stream.observations.last().unwrap();
    assert_eq!((last.best_ask.price_ticks, last.best_ask.quantity), (1000, 30));
}
