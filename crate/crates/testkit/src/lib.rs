//! Slow, obviously-correct reference implementations used as test oracles.
//!
//! Nothing here depends on the library under test: orders are plain tuples
//! `(type_code, price, quantity)` with codes 0 = buy, 1 = sell, 2 = cancel
//! buy, 3 = cancel sell.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BUY: u8 = 0;
pub const SELL: u8 = 1;
pub const CANCEL_BUY: u8 = 2;
pub const CANCEL_SELL: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resting {
    /// Index of the order that created this entry.
    pub id: usize,
    pub buy: bool,
    pub price: i64,
    pub qty: u64,
}

/// What one order did to the naive book.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NaiveOutcome {
    /// `(price, quantity)` per consumed resting entry, in fill order.
    pub fills: Vec<(i64, u64)>,
    /// `(id, quantity)` removed from resting entries by a cancel, or consumed
    /// by a fill.
    pub removed: Vec<(usize, u64)>,
}

/// Order book kept as a flat list in arrival order; every operation rescans
/// the whole list.
#[derive(Debug, Clone, Default)]
pub struct NaiveBook {
    pub resting: Vec<Resting>,
    applied: usize,
}

impl NaiveBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn apply(&mut self, code: u8, price: i64, qty: u64) -> NaiveOutcome {
        let id = self.applied;
        self.applied += 1;
        let mut out = NaiveOutcome::default();
        if qty == 0 {
            return out;
        }
        match code {
            BUY | SELL => {
                let buy = code == BUY;
                let mut left = qty;
                while left > 0 {
                    // best opposite entry: best price, then earliest arrival
                    let mut best: Option<usize> = None;
                    for (i, r) in self.resting.iter().enumerate() {
                        if r.buy == buy {
                            continue;
                        }
                        let crosses = if buy { r.price <= price } else { r.price >= price };
                        if !crosses {
                            continue;
                        }
                        let better = match best {
                            None => true,
                            Some(b) => {
                                let rb = &self.resting[b];
                                if buy {
                                    r.price < rb.price
                                } else {
                                    r.price > rb.price
                                }
                            }
                        };
                        if better {
                            best = Some(i);
                        }
                    }
                    let Some(b) = best else { break };
                    let take = left.min(self.resting[b].qty);
                    out.fills.push((self.resting[b].price, take));
                    out.removed.push((self.resting[b].id, take));
                    left -= take;
                    self.resting[b].qty -= take;
                    if self.resting[b].qty == 0 {
                        self.resting.remove(b);
                    }
                }
                if left > 0 {
                    self.resting.push(Resting {
                        id,
                        buy,
                        price,
                        qty: left,
                    });
                }
            }
            CANCEL_BUY | CANCEL_SELL => {
                let buy = code == CANCEL_BUY;
                let mut left = qty;
                let mut i = 0;
                while left > 0 && i < self.resting.len() {
                    let r = &mut self.resting[i];
                    if r.buy == buy && r.price == price {
                        let take = left.min(r.qty);
                        out.removed.push((r.id, take));
                        r.qty -= take;
                        left -= take;
                        if r.qty == 0 {
                            self.resting.remove(i);
                            continue;
                        }
                    }
                    i += 1;
                }
            }
            _ => panic!("type code {code} out of range"),
        }
        out
    }

    /// Distinct resting prices on a side, best first.
    pub fn levels(&self, buy: bool) -> Vec<i64> {
        let mut p: Vec<i64> = self.resting.iter().filter(|r| r.buy == buy).map(|r| r.price).collect();
        p.sort_unstable();
        p.dedup();
        if buy {
            p.reverse();
        }
        p
    }

    /// Best level as `(price, total quantity)`.
    pub fn best(&self, buy: bool) -> Option<(i64, u64)> {
        let price = *self.levels(buy).first()?;
        let qty = self
            .resting
            .iter()
            .filter(|r| r.buy == buy && r.price == price)
            .map(|r| r.qty)
            .sum();
        Some((price, qty))
    }
}

/// `(best bid, best ask)` as `(price, quantity)`, `None` for an empty side.
pub type Quotes = (Option<(i64, u64)>, Option<(i64, u64)>);

/// Best quotes after each order of `orders`, starting from an empty book.
pub fn prefix_quotes(orders: &[(u8, i64, u64)]) -> Vec<Quotes> {
    // deliberately rebuilds the book from scratch for every prefix
    (1..=orders.len())
        .map(|n| {
            let mut book = NaiveBook::new();
            for &(c, p, q) in &orders[..n] {
                book.apply(c, p, q);
            }
            (book.best(true), book.best(false))
        })
        .collect()
}

/// Per-order lifetime-depth verdict for the ten-level filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthVerdict {
    /// Limit orders that traded on arrival or had a resting part inside the
    /// `levels` best prices of their side after some order was applied.
    pub relevant: Vec<bool>,
    /// For cancels: `(order id, quantity)` removed from resting entries.
    pub cancel_removed: Vec<Vec<(usize, u64)>>,
}

pub fn lifetime_depth(orders: &[(u8, i64, u64)], levels: usize) -> DepthVerdict {
    let mut book = NaiveBook::new();
    let mut relevant = vec![false; orders.len()];
    let mut cancel_removed = vec![Vec::new(); orders.len()];
    for (i, &(c, p, q)) in orders.iter().enumerate() {
        let out = book.apply(c, p, q);
        if c == CANCEL_BUY || c == CANCEL_SELL {
            cancel_removed[i] = out.removed;
        } else if !out.fills.is_empty() {
            relevant[i] = true;
        }
        for buy in [true, false] {
            let top: Vec<i64> = book.levels(buy).into_iter().take(levels).collect();
            for r in book.resting.iter().filter(|r| r.buy == buy) {
                if top.contains(&r.price) {
                    relevant[r.id] = true;
                }
            }
        }
    }
    DepthVerdict {
        relevant,
        cancel_removed,
    }
}

/// KS distance by evaluating both empirical CDFs at every sample value.
pub fn brute_ks(a: &[f64], b: &[f64]) -> f64 {
    let cdf = |s: &[f64], v: f64| s.iter().filter(|&&x| x <= v).count() as f64 / s.len() as f64;
    a.iter()
        .chain(b)
        .map(|&v| (cdf(a, v) - cdf(b, v)).abs())
        .fold(0.0, f64::max)
}

/// `|X_k|` for `k = 0..=N/2` of the de-meaned series, summed term by term.
pub fn naive_dft_magnitudes(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let angle = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                re += (v - mean) * angle.cos();
                im += (v - mean) * angle.sin();
            }
            re.hypot(im)
        })
        .collect()
}

/// Largest subset of `starts` whose pairwise distances all exceed `min_gap`,
/// by trying every subset. Only for short inputs.
pub fn max_spaced_exhaustive(starts: &[usize], min_gap: usize) -> usize {
    assert!(starts.len() <= 20, "exhaustive search is exponential");
    let mut best = 0;
    for mask in 0u32..(1 << starts.len()) {
        let chosen: Vec<usize> = (0..starts.len()).filter(|i| mask & (1 << i) != 0).map(|i| starts[i]).collect();
        let ok = chosen
            .iter()
            .enumerate()
            .all(|(i, a)| chosen[i + 1..].iter().all(|b| a.abs_diff(*b) > min_gap));
        if ok {
            best = best.max(chosen.len());
        }
    }
    best
}

/// Small book walkthrough: three resting orders set the scene, then a buy
/// exactly matches the best ask, a buy rests inside the spread, and a sell
/// partially fills against that new best bid. Rows are
/// `(delta_ms, type_code, price, qty)`.
pub const WALKTHROUGH: [(u64, u8, i64, u64); 6] = [
    (10, BUY, 999, 100),
    (10, SELL, 1001, 100),
    (10, SELL, 1002, 200),
    (10, BUY, 1001, 100),
    (10, BUY, 1000, 50),
    (10, SELL, 1000, 80),
];

/// Hand-traced best `(bid, ask)` prices after each walkthrough order; `None`
/// marks an empty side.
pub const WALKTHROUGH_QUOTES: [(Option<i64>, Option<i64>); 6] = [
    (Some(999), None),
    (Some(999), Some(1001)),
    (Some(999), Some(1001)),
    (Some(999), Some(1002)),
    (Some(1000), Some(1002)),
    (Some(999), Some(1000)),
];

/// Sample skewness `m3 / m2^(3/2)` with population moments.
pub fn skewness(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// Random order tuples over `levels` adjacent prices starting at 1000, all
/// four types, quantities 1..=5.
pub fn random_orders(seed: u64, len: usize, levels: i64) -> Vec<(u8, i64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            (
                rng.random_range(0..4u8),
                1000 + rng.random_range(0..levels),
                rng.random_range(1..=5u64),
            )
        })
        .collect()
}

/// A stream with planted orders that can never reach the ten best levels.
#[derive(Debug, Clone)]
pub struct PlantedStream {
    /// `(delta_ms, type_code, price, qty)`.
    pub orders: Vec<(u64, u8, i64, u64)>,
    pub planted: Vec<bool>,
    /// Cancels that only ever touch planted orders.
    pub planted_cancel: Vec<bool>,
}

/// Builds `n` orders around a book whose ten best levels per side
/// (bids 990..=999, asks 1001..=1010) are pinned by huge opening orders.
/// `planted` limit orders go to bids 900..950 or asks 1051..1101 and
/// `planted_cancels` cancels later remove part of them. The remaining flow
/// rests inside the pinned levels, crosses for small fills, or cancels small
/// amounts there.
pub fn planted_deep_stream(seed: u64, n: usize, planted: usize, planted_cancels: usize) -> PlantedStream {
    assert!(20 + planted + planted_cancels <= n);
    assert!(planted_cancels <= planted);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut orders = Vec::with_capacity(n);
    let mut is_planted = Vec::with_capacity(n);
    let mut is_cancel = Vec::with_capacity(n);
    for i in 0..10 {
        orders.push((5, BUY, 990 + i, 1_000_000));
        orders.push((5, SELL, 1001 + i, 1_000_000));
    }
    is_planted.resize(20, false);
    is_cancel.resize(20, false);

    // slot kinds for the rest: 1 = planted order, 2 = planted cancel, 0 = flow;
    // a planted cancel is placed after at least one more planted order than
    // cancels so far, so it always has something to remove
    let rest = n - 20;
    let mut kinds = vec![0u8; rest];
    let mut slots: Vec<usize> = (0..rest).collect();
    slots.shuffle(&mut rng);
    let mut chosen: Vec<usize> = slots[..planted + planted_cancels].to_vec();
    chosen.sort_unstable();
    let mut pattern = vec![1u8; planted];
    pattern.extend(std::iter::repeat_n(2u8, planted_cancels));
    loop {
        pattern.shuffle(&mut rng);
        let mut balance = 0i64;
        if pattern.iter().all(|&k| {
            balance += if k == 1 { 1 } else { -1 };
            balance >= 0
        }) {
            break;
        }
    }
    for (&slot, &k) in chosen.iter().zip(&pattern) {
        kinds[slot] = k;
    }

    // planted quantity still resting, per (side, price)
    let mut deep: Vec<(bool, i64, u64)> = Vec::new();
    for kind in kinds {
        let delta = rng.random_range(1..=50);
        let buy = rng.random_bool(0.5);
        let (order, p, c) = match kind {
            1 => {
                let price = if buy { rng.random_range(900..950) } else { rng.random_range(1051..1101) };
                let qty = rng.random_range(1..=10);
                match deep.iter_mut().find(|d| d.0 == buy && d.1 == price) {
                    Some(d) => d.2 += qty,
                    None => deep.push((buy, price, qty)),
                }
                ((delta, if buy { BUY } else { SELL }, price, qty), true, false)
            }
            2 => {
                let live: Vec<usize> = (0..deep.len()).filter(|&i| deep[i].2 > 0).collect();
                let d = &mut deep[live[rng.random_range(0..live.len())]];
                let qty = rng.random_range(1..=d.2);
                d.2 -= qty;
                ((delta, if d.0 { CANCEL_BUY } else { CANCEL_SELL }, d.1, qty), false, true)
            }
            _ => {
                let qty = rng.random_range(1..=5);
                let order = match rng.random_range(0..3) {
                    0 => {
                        let price = if buy { rng.random_range(990..1000) } else { rng.random_range(1001..1011) };
                        (delta, if buy { BUY } else { SELL }, price, qty)
                    }
                    1 => {
                        let price = if buy { 1001 } else { 999 };
                        (delta, if buy { BUY } else { SELL }, price, qty)
                    }
                    _ => {
                        let price = if buy { rng.random_range(990..1000) } else { rng.random_range(1001..1011) };
                        (delta, if buy { CANCEL_BUY } else { CANCEL_SELL }, price, qty)
                    }
                };
                (order, false, false)
            }
        };
        orders.push(order);
        is_planted.push(p);
        is_cancel.push(c);
    }
    PlantedStream {
        orders,
        planted: is_planted,
        planted_cancel: is_cancel,
    }
}
