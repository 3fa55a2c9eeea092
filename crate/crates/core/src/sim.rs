//! Background-trader market simulator.
//!
//! A single fundamental value follows a discrete mean-reverting recursion with
//! Gaussian shocks. Traders arrive as a homogeneous Poisson process; each one
//! picks a side with a fair coin and either cancels a uniformly chosen resting
//! unit on that side or submits a unit limit order priced at the current
//! fundamental plus a Gaussian offset. Orders run through the exact engine.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::{replay, OrderBook, ReplayError};
use crate::order::{LimitOrder, Normalization, OrderType, Side, Stream, StreamConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FundamentalConfig {
    /// Long-run mean, in ticks.
    pub mean: f64,
    pub initial: f64,
    /// Fraction of the gap to the mean closed per arrival, in `[0, 1]`.
    pub mean_reversion: f64,
    /// Standard deviation of the per-arrival shock, in ticks.
    pub shock_std: f64,
}

impl Default for FundamentalConfig {
    fn default() -> Self {
        FundamentalConfig {
            mean: 1000.0,
            initial: 1000.0,
            mean_reversion: 0.05,
            shock_std: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Poisson arrival rate per second. When absent it is derived from
    /// `n_orders_target / horizon_s`.
    pub arrival_rate: Option<f64>,
    /// Standard deviation of the limit price around the fundamental, in ticks.
    pub surplus_offset_std: f64,
    pub buy_probability: f64,
    pub cancel_probability: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            arrival_rate: None,
            surplus_offset_std: 2.0,
            buy_probability: 0.5,
            cancel_probability: 0.25,
        }
    }
}

/// Simulator settings. Read from TOML; every key is optional:
///
/// ```toml
/// symbol = "SIM"
/// tick_size = 0.01
/// horizon_s = 1000.0
/// n_orders_target = 300000
/// seed = 7
///
/// [fundamental]
/// mean = 1000.0
/// initial = 1000.0
/// mean_reversion = 0.05
/// shock_std = 0.5
///
/// [agent]
/// arrival_rate = 300.0
/// surplus_offset_std = 2.0
/// buy_probability = 0.5
/// cancel_probability = 0.25
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub symbol: String,
    pub tick_size: f64,
    pub horizon_s: f64,
    pub n_orders_target: u64,
    pub seed: u64,
    pub fundamental: FundamentalConfig,
    pub agent: AgentConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            symbol: "SIM".into(),
            tick_size: 0.01,
            horizon_s: 1000.0,
            n_orders_target: 300_000,
            seed: 0,
            fundamental: FundamentalConfig::default(),
            agent: AgentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

impl SimConfig {
    pub fn arrival_rate(&self) -> f64 {
        self.agent
            .arrival_rate
            .unwrap_or(self.n_orders_target as f64 / self.horizon_s)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.into()));
        let f = &self.fundamental;
        let a = &self.agent;
        if !(self.horizon_s.is_finite() && self.horizon_s > 0.0) {
            return bad("horizon_s must be positive");
        }
        if !(self.tick_size.is_finite() && self.tick_size > 0.0) {
            return bad("tick_size must be positive");
        }
        let rate = self.arrival_rate();
        if !(rate.is_finite() && rate > 0.0) {
            return bad("arrival rate must be positive");
        }
        if !(0.0..=1.0).contains(&f.mean_reversion) {
            return bad("mean_reversion must lie in [0, 1]");
        }
        if !(f.shock_std >= 0.0 && f.shock_std.is_finite()) {
            return bad("shock_std must be non-negative");
        }
        if !(f.mean.is_finite() && f.initial.is_finite()) {
            return bad("fundamental mean and initial value must be finite");
        }
        if !(a.surplus_offset_std > 0.0 && a.surplus_offset_std.is_finite()) {
            return bad("surplus_offset_std must be positive");
        }
        if !(0.0..=1.0).contains(&a.buy_probability) {
            return bad("buy_probability must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&a.cancel_probability) {
            return bad("cancel_probability must lie in [0, 1)");
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

const FUNDAMENTAL_STREAM: u64 = 1;
const ARRIVAL_STREAM: u64 = 2;
const AGENT_STREAM: u64 = 3;

/// Fundamental value at each of `steps` arrivals, starting from the initial
/// value: `f[t+1] = f[t] + kappa * (mean - f[t]) + shock`.
pub fn fundamental_path(cfg: &SimConfig, steps: usize) -> Vec<f64> {
    let f = &cfg.fundamental;
    let mut rng = cfg.rng(FUNDAMENTAL_STREAM);
    let shock = Normal::new(0.0, f.shock_std).expect("finite, non-negative std");
    let mut value = f.initial;
    let mut path = Vec::with_capacity(steps);
    for _ in 0..steps {
        path.push(value);
        value += f.mean_reversion * (f.mean - value) + shock.sample(&mut rng);
    }
    path
}

/// Poisson arrival times over the horizon, in whole milliseconds.
fn arrival_times_ms(cfg: &SimConfig) -> Vec<u64> {
    let mut rng = cfg.rng(ARRIVAL_STREAM);
    let gap = Exp::new(cfg.arrival_rate()).expect("positive rate");
    let mut t = 0.0;
    let mut times = Vec::with_capacity((cfg.arrival_rate() * cfg.horizon_s * 1.01) as usize);
    loop {
        t += gap.sample(&mut rng);
        if t > cfg.horizon_s {
            break;
        }
        times.push((t * 1000.0).floor() as u64);
    }
    times
}

/// Picks the price of a uniformly chosen resting unit on `side`.
fn random_resting_price<R: Rng>(book: &OrderBook, side: Side, rng: &mut R) -> Option<i64> {
    let total = book.total_quantity(side);
    if total == 0 {
        return None;
    }
    let mut r = rng.random_range(0..total);
    for price in book.prices(side) {
        let q = book.quantity_at(side, price);
        if r < q {
            return Some(price);
        }
        r -= q;
    }
    unreachable!("r < total resting quantity")
}

/// Raw order flow before bounds are known.
pub fn simulate_orders(cfg: &SimConfig) -> Result<Vec<LimitOrder>, SimError> {
    cfg.validate()?;
    let times = arrival_times_ms(cfg);
    let path = fundamental_path(cfg, times.len());
    let mut rng = cfg.rng(AGENT_STREAM);
    let offset = Normal::new(0.0, cfg.agent.surplus_offset_std).expect("validated std");
    let mut book = OrderBook::new(i64::MIN, i64::MAX);
    let mut orders = Vec::with_capacity(times.len());
    let mut prev_ms = 0;
    for (&t_ms, &fundamental) in times.iter().zip(&path) {
        let side = if rng.random_bool(cfg.agent.buy_probability) {
            Side::Buy
        } else {
            Side::Sell
        };
        let wants_cancel = rng.random_bool(cfg.agent.cancel_probability);
        let cancel_price = if wants_cancel {
            random_resting_price(&book, side, &mut rng)
        } else {
            None
        };
        let (otype, price) = match (side, cancel_price) {
            (Side::Buy, Some(p)) => (OrderType::CancelBuy, p),
            (Side::Sell, Some(p)) => (OrderType::CancelSell, p),
            (Side::Buy, None) => (OrderType::Buy, (fundamental + offset.sample(&mut rng)).round() as i64),
            (Side::Sell, None) => (OrderType::Sell, (fundamental + offset.sample(&mut rng)).round() as i64),
        };
        let order = LimitOrder::new(t_ms - prev_ms, otype, price, 1);
        prev_ms = t_ms;
        book.apply(&order);
        orders.push(order);
    }
    Ok(orders)
}

/// Runs the simulator and replays its orders into a [`Stream`].
///
/// The stream's price bounds and normalization range are the observed order
/// price range, so every normalized price lies in `[-1, 1]`. `qty_max` is the
/// largest quantity seen in any order or best quote.
pub fn simulate(cfg: &SimConfig) -> Result<Stream, SimError> {
    let orders = simulate_orders(cfg)?;
    let lo = orders.iter().map(|o| o.price_ticks).min().unwrap_or(0);
    let hi = orders.iter().map(|o| o.price_ticks).max().unwrap_or(0).max(lo + 1);
    let mut stream_cfg = StreamConfig {
        symbol: cfg.symbol.clone(),
        tick_size: cfg.tick_size,
        price_min: lo,
        price_max: hi,
        qty_max: u64::MAX,
        day_start_ms: 0,
        day_end_ms: (cfg.horizon_s * 1000.0).round().max(1.0) as i64,
        normalization: Some(Normalization {
            price_lo: lo,
            price_hi: hi,
        }),
    };
    let mut stream = replay(&orders, &stream_cfg)?;
    stream_cfg.qty_max = stream
        .observations
        .iter()
        .flat_map(|o| [o.order.quantity, o.best_bid.quantity, o.best_ask.quantity])
        .max()
        .unwrap_or(1)
        .max(1);
    stream.config = stream_cfg;
    Ok(stream)
}
