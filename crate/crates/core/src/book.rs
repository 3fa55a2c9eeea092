//! Exact continuous double auction.
//!
//! Price-time priority: an incoming buy (sell) trades against the lowest ask
//! (highest bid) while its limit is satisfied, consuming resting quantity at a
//! level oldest-first, each fill priced at the resting level. Any remainder
//! rests at the order's limit. Cancels carry no order id; they remove up to
//! their quantity from the named side's level at their price, oldest-first.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::order::{
    bucket_of, validate_order, LimitOrder, MarketObservation, OrderType, Quote, Side, Stream,
    StreamConfig, Violation,
};

/// Default number of levels kept in a [`BookSnapshot`].
pub const SNAPSHOT_LEVELS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Transaction {
    pub price_ticks: i64,
    pub quantity: u64,
    pub aggressor_side: Side,
}

/// A resting chunk of quantity. `seq` is the book's arrival counter at the
/// time the originating order was applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RestingEntry {
    pub seq: u64,
    pub quantity: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Level {
    queue: VecDeque<RestingEntry>,
    total: u64,
}

impl Level {
    fn push(&mut self, entry: RestingEntry) {
        self.total += entry.quantity;
        self.queue.push_back(entry);
    }

    /// Takes up to `want` units oldest-first, reporting each chunk taken.
    fn take(&mut self, mut want: u64, mut on_take: impl FnMut(RestingEntry)) -> u64 {
        let mut taken = 0;
        while want > 0 {
            let Some(front) = self.queue.front_mut() else {
                break;
            };
            let q = front.quantity.min(want);
            on_take(RestingEntry {
                seq: front.seq,
                quantity: q,
            });
            front.quantity -= q;
            if front.quantity == 0 {
                self.queue.pop_front();
            }
            want -= q;
            taken += q;
        }
        self.total -= taken;
        taken
    }
}

/// What one `apply` did to the book.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ApplyOutcome {
    pub transactions: Vec<Transaction>,
    /// Resting chunks consumed, by fill or by cancel, in consumption order.
    pub removed: Vec<RestingEntry>,
    /// Quantity left resting from this order (zero for cancels).
    pub rested: u64,
    /// Quantity a cancel actually removed.
    pub cancelled: u64,
    /// Set when a cancel found no level at its price.
    pub noop_cancel: bool,
}

impl ApplyOutcome {
    pub fn traded(&self) -> u64 {
        self.transactions.iter().map(|t| t.quantity).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BookSnapshot {
    /// `(price, quantity)` best-first.
    pub bid_levels: Vec<(i64, u64)>,
    pub ask_levels: Vec<(i64, u64)>,
}

/// Two-sided price-level store. Bids are keyed by price and read from the
/// top; asks from the bottom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderBook {
    bids: BTreeMap<i64, Level>,
    asks: BTreeMap<i64, Level>,
    next_seq: u64,
    bid_floor: i64,
    ask_ceiling: i64,
}

impl OrderBook {
    /// `price_min`/`price_max` only determine the absent-side sentinel quotes.
    pub fn new(price_min: i64, price_max: i64) -> Self {
        OrderBook {
            bids: BTreeMap::new(),
            asks: BTreeMap::new(),
            next_seq: 0,
            bid_floor: price_min,
            ask_ceiling: price_max,
        }
    }

    pub fn for_config(cfg: &StreamConfig) -> Self {
        OrderBook::new(cfg.price_min, cfg.price_max)
    }

    /// Number of orders applied so far; the `seq` the next order will carry.
    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty() && self.asks.is_empty()
    }

    pub fn best_bid(&self) -> Quote {
        self.bids
            .iter()
            .next_back()
            .map(|(&p, l)| Quote::new(p, l.total))
            .unwrap_or(Quote::absent(self.bid_floor))
    }

    pub fn best_ask(&self) -> Quote {
        self.asks
            .iter()
            .next()
            .map(|(&p, l)| Quote::new(p, l.total))
            .unwrap_or(Quote::absent(self.ask_ceiling))
    }

    pub fn level_count(&self, side: Side) -> usize {
        self.side(side).len()
    }

    pub fn total_quantity(&self, side: Side) -> u64 {
        self.side(side).values().map(|l| l.total).sum()
    }

    /// Aggregate quantity resting at `price` on `side` (zero if no level).
    pub fn quantity_at(&self, side: Side, price: i64) -> u64 {
        self.side(side).get(&price).map_or(0, |l| l.total)
    }

    /// Resting chunks at one level, oldest first.
    pub fn entries_at(&self, side: Side, price: i64) -> impl DoubleEndedIterator<Item = &RestingEntry> + '_ {
        self.side(side)
            .get(&price)
            .into_iter()
            .flat_map(|l| l.queue.iter())
    }

    /// Level prices on `side`, best-first.
    pub fn prices(&self, side: Side) -> Box<dyn Iterator<Item = i64> + '_> {
        match side {
            Side::Buy => Box::new(self.bids.keys().rev().copied()),
            Side::Sell => Box::new(self.asks.keys().copied()),
        }
    }

    pub fn snapshot_top(&self, levels: usize) -> BookSnapshot {
        let levels = levels.max(1);
        BookSnapshot {
            bid_levels: self
                .bids
                .iter()
                .rev()
                .take(levels)
                .map(|(&p, l)| (p, l.total))
                .collect(),
            ask_levels: self
                .asks
                .iter()
                .take(levels)
                .map(|(&p, l)| (p, l.total))
                .collect(),
        }
    }

    fn side(&self, side: Side) -> &BTreeMap<i64, Level> {
        match side {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        }
    }

    fn side_mut(&mut self, side: Side) -> &mut BTreeMap<i64, Level> {
        match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        }
    }

    /// Applies one order. Never fails; a cancel that finds no level is
    /// reported through [`ApplyOutcome::noop_cancel`].
    pub fn apply(&mut self, order: &LimitOrder) -> ApplyOutcome {
        let seq = self.next_seq;
        self.next_seq += 1;
        let mut out = ApplyOutcome::default();
        if order.quantity == 0 {
            out.noop_cancel = order.otype.is_cancel();
            return out;
        }
        match order.otype {
            OrderType::Buy | OrderType::Sell => self.submit(seq, order, &mut out),
            OrderType::CancelBuy | OrderType::CancelSell => self.cancel(order, &mut out),
        }
        out
    }

    fn submit(&mut self, seq: u64, order: &LimitOrder, out: &mut ApplyOutcome) {
        let side = order.otype.side();
        let limit = order.price_ticks;
        let mut remaining = order.quantity;
        let book = self.side_mut(side.opposite());
        while remaining > 0 {
            let best = match side {
                Side::Buy => book.first_key_value().map(|(&p, _)| p),
                Side::Sell => book.last_key_value().map(|(&p, _)| p),
            };
            let Some(price) = best else { break };
            let crosses = match side {
                Side::Buy => price <= limit,
                Side::Sell => price >= limit,
            };
            if !crosses {
                break;
            }
            let level = book.get_mut(&price).expect("best level exists");
            let taken = level.take(remaining, |e| {
                out.transactions.push(Transaction {
                    price_ticks: price,
                    quantity: e.quantity,
                    aggressor_side: side,
                });
                out.removed.push(e);
            });
            remaining -= taken;
            if level.total == 0 {
                book.remove(&price);
            }
        }
        if remaining > 0 {
            self.side_mut(side)
                .entry(limit)
                .or_default()
                .push(RestingEntry {
                    seq,
                    quantity: remaining,
                });
            out.rested = remaining;
        }
    }

    fn cancel(&mut self, order: &LimitOrder, out: &mut ApplyOutcome) {
        let book = self.side_mut(order.otype.side());
        let Some(level) = book.get_mut(&order.price_ticks) else {
            out.noop_cancel = true;
            return;
        };
        let removed = &mut out.removed;
        out.cancelled = level.take(order.quantity, |e| removed.push(e));
        if level.total == 0 {
            book.remove(&order.price_ticks);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("order {index}: {violation}")]
    InvalidOrder { index: usize, violation: Violation },
    #[error("order {index}: cumulative time {total_ms} ms runs past the end of the day")]
    DayOverrun { index: usize, total_ms: u64 },
    #[error(transparent)]
    Config(#[from] crate::order::ConfigError),
}

/// Incremental replay: one exact book plus the running clock.
#[derive(Debug, Clone)]
pub struct Replayer {
    cfg: StreamConfig,
    book: OrderBook,
    elapsed_ms: u64,
    applied: usize,
}

impl Replayer {
    pub fn new(cfg: &StreamConfig) -> Result<Self, ReplayError> {
        cfg.validate()?;
        Ok(Replayer {
            cfg: cfg.clone(),
            book: OrderBook::for_config(cfg),
            elapsed_ms: 0,
            applied: 0,
        })
    }

    pub fn book(&self) -> &OrderBook {
        &self.book
    }

    pub fn elapsed_ms(&self) -> u64 {
        self.elapsed_ms
    }

    /// Validates and applies one order, returning its observation and the
    /// engine outcome.
    pub fn push(&mut self, order: &LimitOrder) -> Result<(MarketObservation, ApplyOutcome), ReplayError> {
        let index = self.applied;
        if let Some(&violation) = validate_order(order, &self.cfg).violations.first() {
            return Err(ReplayError::InvalidOrder { index, violation });
        }
        let total_ms = self.elapsed_ms + order.interarrival_ms;
        if total_ms > self.cfg.day_length_ms() {
            return Err(ReplayError::DayOverrun { index, total_ms });
        }
        let outcome = self.book.apply(order);
        self.elapsed_ms = total_ms;
        self.applied += 1;
        let bucket = bucket_of(self.cfg.day_start_ms + total_ms as i64, &self.cfg)
            .expect("elapsed time checked against the day length");
        let obs = MarketObservation {
            order: *order,
            best_bid: self.book.best_bid(),
            best_ask: self.book.best_ask(),
            bucket,
        };
        Ok((obs, outcome))
    }
}

/// Replays a full order sequence from an empty book.
pub fn replay(orders: &[LimitOrder], cfg: &StreamConfig) -> Result<Stream, ReplayError> {
    let mut replayer = Replayer::new(cfg)?;
    let mut observations = Vec::with_capacity(orders.len());
    for order in orders {
        observations.push(replayer.push(order)?.0);
    }
    Ok(Stream::new(cfg.clone(), observations))
}
