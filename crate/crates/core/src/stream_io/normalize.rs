use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::order::{LimitOrder, MarketObservation, OrderType, Quote, Stream, StreamConfig};

/// Real-valued view of one observation, every continuous field in `[-1, 1]`.
///
/// Prices use the config's normalization range, quantities `[0, qty_max]` and
/// the interarrival delta `[0, day length]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedObservation {
    pub d: f64,
    pub p: f64,
    pub q: f64,
    pub a_p: f64,
    pub a_q: f64,
    pub b_p: f64,
    pub b_q: f64,
    /// One-hot over buy, sell, cancel buy, cancel sell.
    pub otype: [f64; 4],
    pub bucket: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error("stream config has no normalization bounds")]
    MissingBounds,
    #[error("normalization bounds are empty ({lo} >= {hi})")]
    EmptyRange { lo: i64, hi: i64 },
}

#[derive(Debug, Clone, Copy)]
struct Affine {
    lo: f64,
    hi: f64,
}

impl Affine {
    fn forward(&self, v: f64) -> f64 {
        (2.0 * (v - self.lo) / (self.hi - self.lo) - 1.0).clamp(-1.0, 1.0)
    }

    fn back(&self, x: f64) -> f64 {
        let x = if x.is_nan() { 0.0 } else { x.clamp(-1.0, 1.0) };
        (self.lo + (x + 1.0) * 0.5 * (self.hi - self.lo)).round()
    }
}

struct Maps {
    price: Affine,
    qty: Affine,
    delta: Affine,
}

impl Maps {
    fn new(cfg: &StreamConfig) -> Result<Self, NormalizeError> {
        let n = cfg.normalization.ok_or(NormalizeError::MissingBounds)?;
        if n.price_lo >= n.price_hi {
            return Err(NormalizeError::EmptyRange {
                lo: n.price_lo,
                hi: n.price_hi,
            });
        }
        Ok(Maps {
            price: Affine {
                lo: n.price_lo as f64,
                hi: n.price_hi as f64,
            },
            qty: Affine {
                lo: 0.0,
                hi: cfg.qty_max.max(1) as f64,
            },
            delta: Affine {
                lo: 0.0,
                hi: cfg.day_length_ms().max(1) as f64,
            },
        })
    }
}

pub fn normalize(stream: &Stream) -> Result<Vec<NormalizedObservation>, NormalizeError> {
    let maps = Maps::new(&stream.config)?;
    Ok(stream
        .observations
        .iter()
        .map(|obs| {
            let mut otype = [0.0; 4];
            otype[obs.order.otype.code() as usize] = 1.0;
            NormalizedObservation {
                d: maps.delta.forward(obs.order.interarrival_ms as f64),
                p: maps.price.forward(obs.order.price_ticks as f64),
                q: maps.qty.forward(obs.order.quantity as f64),
                a_p: maps.price.forward(obs.best_bid.price_ticks as f64),
                a_q: maps.qty.forward(obs.best_bid.quantity as f64),
                b_p: maps.price.forward(obs.best_ask.price_ticks as f64),
                b_q: maps.qty.forward(obs.best_ask.quantity as f64),
                otype,
                bucket: obs.bucket,
            }
        })
        .collect())
}

/// Inverse of [`normalize`]: clips to `[-1, 1]`, maps back and rounds to the
/// nearest tick or unit. The order type is the arg-max of the one-hot block.
pub fn denormalize(seq: &[NormalizedObservation], cfg: &StreamConfig) -> Result<Stream, NormalizeError> {
    let maps = Maps::new(cfg)?;
    let observations = seq
        .iter()
        .map(|n| {
            let code = n
                .otype
                .iter()
                .enumerate()
                .fold((0usize, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                .0;
            MarketObservation {
                order: LimitOrder {
                    interarrival_ms: maps.delta.back(n.d) as u64,
                    otype: OrderType::from_code(code as u8).expect("code in 0..4"),
                    price_ticks: maps.price.back(n.p) as i64,
                    quantity: maps.qty.back(n.q) as u64,
                },
                best_bid: Quote::new(maps.price.back(n.a_p) as i64, maps.qty.back(n.a_q) as u64),
                best_ask: Quote::new(maps.price.back(n.b_p) as i64, maps.qty.back(n.b_q) as u64),
                bucket: n.bucket.min(crate::order::BUCKETS_PER_DAY - 1),
            }
        })
        .collect();
    Ok(Stream::new(cfg.clone(), observations))
}
