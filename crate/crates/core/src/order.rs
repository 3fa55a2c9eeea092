//! Order-stream data model.
//!
//! One [`MarketObservation`] is a single limit order together with the best
//! quotes it leaves behind and the intraday time bucket it arrived in. Prices
//! are integer ticks throughout; conversion to real values only happens at the
//! normalization boundary (see [`crate::stream_io::normalize`]).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of equal intraday intervals a trading day is divided into.
pub const BUCKETS_PER_DAY: u8 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }
}

/// The four order kinds, serialized as a 2-bit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OrderType {
    Buy,
    Sell,
    CancelBuy,
    CancelSell,
}

impl OrderType {
    pub const ALL: [OrderType; 4] = [
        OrderType::Buy,
        OrderType::Sell,
        OrderType::CancelBuy,
        OrderType::CancelSell,
    ];

    pub fn code(self) -> u8 {
        match self {
            OrderType::Buy => 0,
            OrderType::Sell => 1,
            OrderType::CancelBuy => 2,
            OrderType::CancelSell => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<OrderType> {
        OrderType::ALL.get(code as usize).copied()
    }

    /// The book side this order rests on or removes from.
    pub fn side(self) -> Side {
        match self {
            OrderType::Buy | OrderType::CancelBuy => Side::Buy,
            OrderType::Sell | OrderType::CancelSell => Side::Sell,
        }
    }

    pub fn is_cancel(self) -> bool {
        matches!(self, OrderType::CancelBuy | OrderType::CancelSell)
    }

    pub fn name(self) -> &'static str {
        match self {
            OrderType::Buy => "buy",
            OrderType::Sell => "sell",
            OrderType::CancelBuy => "cancel_buy",
            OrderType::CancelSell => "cancel_sell",
        }
    }
}

impl fmt::Display for OrderType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A single order as submitted. Cancels carry the `(price, quantity)` they
/// target rather than an order id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LimitOrder {
    /// Milliseconds since the previous order.
    pub interarrival_ms: u64,
    pub otype: OrderType,
    pub price_ticks: i64,
    pub quantity: u64,
}

impl LimitOrder {
    pub fn new(interarrival_ms: u64, otype: OrderType, price_ticks: i64, quantity: u64) -> Self {
        LimitOrder {
            interarrival_ms,
            otype,
            price_ticks,
            quantity,
        }
    }
}

/// Best level of one book side. A quantity of zero marks the side as absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Quote {
    pub price_ticks: i64,
    pub quantity: u64,
}

impl Quote {
    pub fn new(price_ticks: i64, quantity: u64) -> Self {
        Quote {
            price_ticks,
            quantity,
        }
    }

    /// Sentinel for an empty book side, pinned to that side's extreme bound.
    pub fn absent(price_ticks: i64) -> Self {
        Quote {
            price_ticks,
            quantity: 0,
        }
    }

    pub fn is_absent(&self) -> bool {
        self.quantity == 0
    }

    pub fn is_present(&self) -> bool {
        self.quantity > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MarketObservation {
    pub order: LimitOrder,
    pub best_bid: Quote,
    pub best_ask: Quote,
    /// Intraday interval index in `0..24`.
    pub bucket: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub price_lo: i64,
    pub price_hi: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub symbol: String,
    pub tick_size: f64,
    pub price_min: i64,
    pub price_max: i64,
    pub qty_max: u64,
    pub day_start_ms: i64,
    pub day_end_ms: i64,
    #[serde(default)]
    pub normalization: Option<Normalization>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("price_min ({min}) must be below price_max ({max})")]
    PriceRange { min: i64, max: i64 },
    #[error("day_start_ms ({start}) must be below day_end_ms ({end})")]
    DayRange { start: i64, end: i64 },
    #[error("qty_max must be at least 1")]
    QtyMax,
    #[error("normalization price_lo ({lo}) must be below price_hi ({hi})")]
    NormalizationRange { lo: i64, hi: i64 },
}

impl StreamConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.price_min >= self.price_max {
            return Err(ConfigError::PriceRange {
                min: self.price_min,
                max: self.price_max,
            });
        }
        if self.day_start_ms >= self.day_end_ms {
            return Err(ConfigError::DayRange {
                start: self.day_start_ms,
                end: self.day_end_ms,
            });
        }
        if self.qty_max < 1 {
            return Err(ConfigError::QtyMax);
        }
        if let Some(n) = self.normalization {
            if n.price_lo >= n.price_hi {
                return Err(ConfigError::NormalizationRange {
                    lo: n.price_lo,
                    hi: n.price_hi,
                });
            }
        }
        Ok(())
    }

    pub fn day_length_ms(&self) -> u64 {
        (self.day_end_ms - self.day_start_ms) as u64
    }

    pub fn absent_bid(&self) -> Quote {
        Quote::absent(self.price_min)
    }

    pub fn absent_ask(&self) -> Quote {
        Quote::absent(self.price_max)
    }

    /// Bucket index for an absolute timestamp within the trading day.
    pub fn bucket_of(&self, elapsed_ms: i64) -> Result<u8, BucketError> {
        bucket_of(elapsed_ms, self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("timestamp {elapsed_ms} ms lies outside the trading day [{day_start_ms}, {day_end_ms}]")]
pub struct BucketError {
    pub elapsed_ms: i64,
    pub day_start_ms: i64,
    pub day_end_ms: i64,
}

/// Maps an absolute timestamp to one of 24 equal intraday intervals. The right
/// endpoint of the day belongs to the last interval.
pub fn bucket_of(elapsed_ms: i64, cfg: &StreamConfig) -> Result<u8, BucketError> {
    if elapsed_ms < cfg.day_start_ms || elapsed_ms > cfg.day_end_ms || cfg.day_start_ms >= cfg.day_end_ms {
        return Err(BucketError {
            elapsed_ms,
            day_start_ms: cfg.day_start_ms,
            day_end_ms: cfg.day_end_ms,
        });
    }
    let offset = (elapsed_ms - cfg.day_start_ms) as i128;
    let span = (cfg.day_end_ms - cfg.day_start_ms) as i128;
    let raw = offset * BUCKETS_PER_DAY as i128 / span;
    Ok(raw.min(BUCKETS_PER_DAY as i128 - 1) as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Violation {
    QuantityBelowOne,
    QuantityAboveMax { quantity: u64, max: u64 },
    PriceOutOfRange { price: i64 },
    InterarrivalExceedsDay { interarrival_ms: u64 },
    CrossedQuotes { bid: i64, ask: i64 },
    QuoteOutOfRange { price: i64 },
    BucketOutOfRange { bucket: u8 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::QuantityBelowOne => write!(f, "quantity < 1"),
            Violation::QuantityAboveMax { quantity, max } => {
                write!(f, "quantity {quantity} exceeds qty_max {max}")
            }
            Violation::PriceOutOfRange { price } => write!(f, "price {price} out of bounds"),
            Violation::InterarrivalExceedsDay { interarrival_ms } => {
                write!(f, "interarrival {interarrival_ms} ms exceeds the day length")
            }
            Violation::CrossedQuotes { bid, ask } => {
                write!(f, "crossed quotes (bid {bid} >= ask {ask})")
            }
            Violation::QuoteOutOfRange { price } => write!(f, "quote price {price} out of bounds"),
            Violation::BucketOutOfRange { bucket } => write!(f, "bucket {bucket} out of range"),
        }
    }
}

/// Outcome of [`validate_observation`]: violations are data, not failures.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationResult {
    pub violations: Vec<Violation>,
}

impl ValidationResult {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Order-level checks only: bounds on price, quantity and interarrival.
pub fn validate_order(order: &LimitOrder, cfg: &StreamConfig) -> ValidationResult {
    let mut violations = Vec::new();
    if order.quantity < 1 {
        violations.push(Violation::QuantityBelowOne);
    } else if order.quantity > cfg.qty_max {
        violations.push(Violation::QuantityAboveMax {
            quantity: order.quantity,
            max: cfg.qty_max,
        });
    }
    if order.price_ticks < cfg.price_min || order.price_ticks > cfg.price_max {
        violations.push(Violation::PriceOutOfRange {
            price: order.price_ticks,
        });
    }
    if order.interarrival_ms > cfg.day_length_ms() {
        violations.push(Violation::InterarrivalExceedsDay {
            interarrival_ms: order.interarrival_ms,
        });
    }
    ValidationResult { violations }
}

pub fn validate_observation(obs: &MarketObservation, cfg: &StreamConfig) -> ValidationResult {
    let mut result = validate_order(&obs.order, cfg);
    for quote in [obs.best_bid, obs.best_ask] {
        if quote.price_ticks < cfg.price_min || quote.price_ticks > cfg.price_max {
            result.violations.push(Violation::QuoteOutOfRange {
                price: quote.price_ticks,
            });
        }
    }
    if obs.best_bid.is_present()
        && obs.best_ask.is_present()
        && obs.best_bid.price_ticks >= obs.best_ask.price_ticks
    {
        result.violations.push(Violation::CrossedQuotes {
            bid: obs.best_bid.price_ticks,
            ask: obs.best_ask.price_ticks,
        });
    }
    if obs.bucket >= BUCKETS_PER_DAY {
        result
            .violations
            .push(Violation::BucketOutOfRange { bucket: obs.bucket });
    }
    result
}

/// An ordered day of observations for one symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub config: StreamConfig,
    pub observations: Vec<MarketObservation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StreamError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("observation {index}: {violation}")]
    Observation { index: usize, violation: Violation },
    #[error("cumulative interarrival time {total_ms} ms exceeds the day length {day_ms} ms")]
    DayOverrun { total_ms: u64, day_ms: u64 },
    #[error("bucket decreases at observation {index} ({prev} -> {next})")]
    BucketOrder { index: usize, prev: u8, next: u8 },
}

impl Stream {
    pub fn new(config: StreamConfig, observations: Vec<MarketObservation>) -> Self {
        Stream {
            config,
            observations,
        }
    }

    pub fn empty(config: StreamConfig) -> Self {
        Stream::new(config, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn orders(&self) -> impl Iterator<Item = &LimitOrder> + '_ {
        self.observations.iter().map(|o| &o.order)
    }

    /// Total elapsed time covered by the stream's interarrival deltas.
    pub fn total_ms(&self) -> u64 {
        self.orders().map(|o| o.interarrival_ms).sum()
    }

    /// Largest number of observations falling in any single bucket.
    pub fn max_per_bucket(&self) -> usize {
        let mut counts = [0usize; BUCKETS_PER_DAY as usize];
        for obs in &self.observations {
            counts[(obs.bucket as usize).min(counts.len() - 1)] += 1;
        }
        counts.into_iter().max().unwrap_or(0)
    }

    /// Checks every per-observation invariant plus the stream-level ones
    /// (bounded total time, non-decreasing buckets). Stops at the first problem.
    pub fn validate(&self) -> Result<(), StreamError> {
        self.config.validate()?;
        let day_ms = self.config.day_length_ms();
        let mut total: u64 = 0;
        let mut prev_bucket = 0u8;
        for (index, obs) in self.observations.iter().enumerate() {
            if let Some(&violation) = validate_observation(obs, &self.config).violations.first() {
                return Err(StreamError::Observation { index, violation });
            }
            total = total.saturating_add(obs.order.interarrival_ms);
            if total > day_ms {
                return Err(StreamError::DayOverrun {
                    total_ms: total,
                    day_ms,
                });
            }
            if obs.bucket < prev_bucket {
                return Err(StreamError::BucketOrder {
                    index,
                    prev: prev_bucket,
                    next: obs.bucket,
                });
            }
            prev_bucket = obs.bucket;
        }
        Ok(())
    }
}
