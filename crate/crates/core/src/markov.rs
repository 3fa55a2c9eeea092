//! Finite-memory baseline generator.
//!
//! Observations are coarsened to a small symbol alphabet (order type, price
//! offset from the best same-side quote, log-scale quantity and interarrival
//! buckets) and a per-time-bucket, order-`k` Markov model is estimated from
//! counts. Probabilities interpolate down to order zero with weight
//! `n / (n + alpha)` on a context seen `n` times, and the order-zero
//! distribution is Laplace-smoothed with the same `alpha`:
//!
//! ```text
//! p0(x)        = (c(x) + alpha) / (N + alpha * V)
//! pj(x | ctx)  = (c(ctx, x) + alpha * p(j-1)(x | ctx')) / (c(ctx) + alpha)
//! ```
//!
//! Generation samples symbols autoregressively, turns each back into a
//! concrete order relative to the live book and pushes it through the exact
//! engine, so emitted quotes are always exact.

use std::collections::HashMap;
use std::io;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::book::OrderBook;
use crate::order::{bucket_of, LimitOrder, MarketObservation, OrderType, Quote, Side, Stream, StreamConfig, BUCKETS_PER_DAY};

pub const REL_PRICE_LIMIT: i8 = 4;
pub const REL_PRICE_BUCKETS: usize = 2 * REL_PRICE_LIMIT as usize + 1;
pub const QTY_BUCKETS: usize = 11;
pub const DT_BUCKETS: usize = 6;
pub const ALPHABET_SIZE: usize = 4 * REL_PRICE_BUCKETS * QTY_BUCKETS * DT_BUCKETS;
pub const DEFAULT_ORDER: usize = 3;
pub const MAX_ORDER: usize = 5;

const SYMBOL_BITS: u32 = 12;
const POOLED: usize = BUCKETS_PER_DAY as usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoarseSymbol {
    pub otype: OrderType,
    /// Price minus the reference quote, clamped to `-4..=4`.
    pub rel_price: i8,
    /// `floor(log2(quantity))`, clamped to `0..=10`.
    pub qty_bucket: u8,
    /// Decade of the interarrival time in ms, clamped to `0..=5`.
    pub dt_bucket: u8,
}

impl CoarseSymbol {
    pub fn index(&self) -> u16 {
        let rel = (self.rel_price + REL_PRICE_LIMIT) as usize;
        let i = ((self.otype.code() as usize * REL_PRICE_BUCKETS + rel) * QTY_BUCKETS + self.qty_bucket as usize)
            * DT_BUCKETS
            + self.dt_bucket as usize;
        i as u16
    }

    pub fn from_index(index: u16) -> CoarseSymbol {
        let mut i = index as usize;
        let dt_bucket = (i % DT_BUCKETS) as u8;
        i /= DT_BUCKETS;
        let qty_bucket = (i % QTY_BUCKETS) as u8;
        i /= QTY_BUCKETS;
        let rel_price = (i % REL_PRICE_BUCKETS) as i8 - REL_PRICE_LIMIT;
        i /= REL_PRICE_BUCKETS;
        CoarseSymbol {
            otype: OrderType::from_code(i as u8).expect("index below alphabet size"),
            rel_price,
            qty_bucket,
            dt_bucket,
        }
    }
}

pub fn qty_bucket(quantity: u64) -> u8 {
    if quantity == 0 {
        return 0;
    }
    (63 - quantity.leading_zeros()).min(QTY_BUCKETS as u32 - 1) as u8
}

/// Number of decimal digits minus one; zero and one-digit gaps share bucket 0.
pub fn dt_bucket(interarrival_ms: u64) -> u8 {
    let mut bucket = 0u8;
    let mut v = interarrival_ms;
    while v >= 10 && (bucket as usize) < DT_BUCKETS - 1 {
        v /= 10;
        bucket += 1;
    }
    bucket
}

/// Price the offset of an order on `side` is measured from: the best quote
/// on that side, else the opposite best, else nothing (empty book).
pub fn reference_price(side: Side, best_bid: Quote, best_ask: Quote) -> Option<i64> {
    let (same, other) = match side {
        Side::Buy => (best_bid, best_ask),
        Side::Sell => (best_ask, best_bid),
    };
    if same.is_present() {
        Some(same.price_ticks)
    } else if other.is_present() {
        Some(other.price_ticks)
    } else {
        None
    }
}

/// Coarsens an observation against the quotes that were live when its order
/// arrived (the previous observation's quotes).
pub fn coarsen(obs: &MarketObservation, prev_bid: Quote, prev_ask: Quote) -> CoarseSymbol {
    let order = &obs.order;
    let rel = reference_price(order.otype.side(), prev_bid, prev_ask)
        .map_or(0, |r| order.price_ticks.saturating_sub(r))
        .clamp(-(REL_PRICE_LIMIT as i64), REL_PRICE_LIMIT as i64);
    CoarseSymbol {
        otype: order.otype,
        rel_price: rel as i8,
        qty_bucket: qty_bucket(order.quantity),
        dt_bucket: dt_bucket(order.interarrival_ms),
    }
}

pub fn coarsen_stream(stream: &Stream) -> Vec<CoarseSymbol> {
    let mut bid = stream.config.absent_bid();
    let mut ask = stream.config.absent_ask();
    stream
        .observations
        .iter()
        .map(|obs| {
            let s = coarsen(obs, bid, ask);
            bid = obs.best_bid;
            ask = obs.best_ask;
            s
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum MarkovError {
    #[error("cannot fit on an empty stream")]
    EmptyStream,
    #[error("stream of length {len} is too short for order {order}")]
    TooShort { len: usize, order: usize },
    #[error("smoothing alpha must be positive and finite, got {0}")]
    BadAlpha(f64),
    #[error("model order must be in 0..={MAX_ORDER}, got {0}")]
    BadOrder(usize),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Continuation counts for one context, sorted by symbol.
#[derive(Debug, Clone, Default, PartialEq)]
struct Counts {
    total: u64,
    next: Vec<(u16, u64)>,
}

impl Counts {
    fn from_map(map: HashMap<u16, u64>) -> Self {
        let mut next: Vec<_> = map.into_iter().collect();
        next.sort_unstable();
        Counts {
            total: next.iter().map(|e| e.1).sum(),
            next,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u16 {
        let mut r = rng.random_range(0..self.total);
        for &(sym, c) in &self.next {
            if r < c {
                return sym;
            }
            r -= c;
        }
        unreachable!("r below total")
    }

    fn get(&self, sym: u16) -> u64 {
        self.next
            .binary_search_by_key(&sym, |e| e.0)
            .map_or(0, |i| self.next[i].1)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Table {
    unigram: Counts,
    /// `contexts[j - 1]` holds order-`j` contexts keyed by packed symbols.
    contexts: Vec<HashMap<u64, Counts>>,
}

fn pack(ctx: &[u16]) -> u64 {
    ctx.iter().fold(0u64, |k, &s| (k << SYMBOL_BITS) | s as u64)
}

/// Per-bucket representatives used to turn symbols back into orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representatives {
    /// Offset from the reference quote used for the open-ended price
    /// buckets, per order type as `[low, high]`: the training mean offset of
    /// the orders in that bucket, `-4` / `+4` for a bucket never seen.
    pub open_price: [[i64; 2]; 4],
    pub quantity: [u64; QTY_BUCKETS],
    pub interarrival_ms: [u64; DT_BUCKETS],
}

fn qty_range(b: usize) -> (u64, u64) {
    let lo = 1u64 << b;
    let hi = if b + 1 == QTY_BUCKETS { u64::MAX } else { (1u64 << (b + 1)) - 1 };
    (lo, hi)
}

fn dt_range(b: usize) -> (u64, u64) {
    let lo = if b == 0 { 0 } else { 10u64.pow(b as u32) };
    let hi = if b + 1 == DT_BUCKETS { u64::MAX } else { 10u64.pow(b as u32 + 1) - 1 };
    (lo, hi)
}

impl Default for Representatives {
    fn default() -> Self {
        let mid = |(lo, hi): (u64, u64)| lo + (hi.min(lo.saturating_mul(10).max(lo + 1)) - lo) / 2;
        Representatives {
            open_price: [[-(REL_PRICE_LIMIT as i64), REL_PRICE_LIMIT as i64]; 4],
            quantity: std::array::from_fn(|b| {
                let (lo, hi) = qty_range(b);
                lo + (hi.min(2 * lo) - lo) / 2
            }),
            interarrival_ms: std::array::from_fn(|b| mid(dt_range(b))),
        }
    }
}

#[derive(Default)]
struct Mean {
    sum: f64,
    n: u64,
}

impl Mean {
    fn add(&mut self, v: f64) {
        self.sum += v;
        self.n += 1;
    }

    fn get(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    order: usize,
    alpha: f64,
    /// One table per intraday bucket plus a pooled table for buckets with no
    /// training data.
    tables: Vec<Table>,
    representatives: Representatives,
}

impl MarkovModel {
    pub fn fit(stream: &Stream, order: usize, alpha: f64) -> Result<MarkovModel, MarkovError> {
        if stream.is_empty() {
            return Err(MarkovError::EmptyStream);
        }
        if order > MAX_ORDER {
            return Err(MarkovError::BadOrder(order));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(MarkovError::BadAlpha(alpha));
        }
        if stream.len() <= order {
            return Err(MarkovError::TooShort {
                len: stream.len(),
                order,
            });
        }
        let symbols = coarsen_stream(stream);
        let idx: Vec<u16> = symbols.iter().map(|s| s.index()).collect();

        let mut unigrams: Vec<HashMap<u16, u64>> = vec![HashMap::new(); POOLED + 1];
        let mut contexts: Vec<Vec<HashMap<u64, HashMap<u16, u64>>>> = vec![vec![HashMap::new(); order]; POOLED + 1];
        for (i, obs) in stream.observations.iter().enumerate() {
            let x = idx[i];
            for t in [obs.bucket as usize, POOLED] {
                *unigrams[t].entry(x).or_default() += 1;
                for j in 1..=order.min(i) {
                    let key = pack(&idx[i - j..i]);
                    *contexts[t][j - 1].entry(key).or_default().entry(x).or_default() += 1;
                }
            }
        }
        let tables = unigrams
            .into_iter()
            .zip(contexts)
            .map(|(u, cs)| Table {
                unigram: Counts::from_map(u),
                contexts: cs
                    .into_iter()
                    .map(|m| m.into_iter().map(|(k, v)| (k, Counts::from_map(v))).collect())
                    .collect(),
            })
            .collect();

        Ok(MarkovModel {
            order,
            alpha,
            tables,
            representatives: fit_representatives(stream, &symbols),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn representatives(&self) -> &Representatives {
        &self.representatives
    }

    fn table(&self, bucket: u8) -> &Table {
        let t = &self.tables[(bucket as usize).min(POOLED - 1)];
        if t.unigram.total > 0 {
            t
        } else {
            &self.tables[POOLED]
        }
    }

    /// Context counts used for a history, highest order first.
    fn chain<'a>(&'a self, table: &'a Table, history: &[u16]) -> Vec<&'a Counts> {
        let max = self.order.min(history.len());
        (1..=max)
            .rev()
            .filter_map(|j| table.contexts[j - 1].get(&pack(&history[history.len() - j..])))
            .collect()
    }

    /// Full conditional distribution over the alphabet (symbol index order).
    pub fn conditional(&self, bucket: u8, history: &[CoarseSymbol]) -> Vec<f64> {
        let hist: Vec<u16> = history.iter().map(|s| s.index()).collect();
        let table = self.table(bucket);
        let n = table.unigram.total as f64;
        let v = ALPHABET_SIZE as f64;
        let mut p: Vec<f64> = (0..ALPHABET_SIZE as u16)
            .map(|x| (table.unigram.get(x) as f64 + self.alpha) / (n + self.alpha * v))
            .collect();
        for counts in self.chain(table, &hist).into_iter().rev() {
            let denom = counts.total as f64 + self.alpha;
            for (x, px) in p.iter_mut().enumerate() {
                *px = (counts.get(x as u16) as f64 + self.alpha * *px) / denom;
            }
        }
        p
    }

    /// Draws one symbol from the interpolated conditional without building
    /// the full distribution.
    pub fn sample<R: Rng + ?Sized>(&self, bucket: u8, history: &[CoarseSymbol], rng: &mut R) -> CoarseSymbol {
        let hist: Vec<u16> = history.iter().map(|s| s.index()).collect();
        let table = self.table(bucket);
        for counts in self.chain(table, &hist) {
            let n = counts.total as f64;
            if rng.random::<f64>() < n / (n + self.alpha) {
                return CoarseSymbol::from_index(counts.sample(rng));
            }
        }
        let n = table.unigram.total as f64;
        let keep = n / (n + self.alpha * ALPHABET_SIZE as f64);
        if table.unigram.total > 0 && rng.random::<f64>() < keep {
            CoarseSymbol::from_index(table.unigram.sample(rng))
        } else {
            CoarseSymbol::from_index(rng.random_range(0..ALPHABET_SIZE as u16))
        }
    }

    /// Concrete order for a symbol, relative to the live book.
    pub fn decoarsen(&self, sym: &CoarseSymbol, book: &OrderBook, anchor: i64, cfg: &StreamConfig) -> LimitOrder {
        let reps = &self.representatives;
        let side = sym.otype.side();
        let reference = reference_price(side, book.best_bid(), book.best_ask()).unwrap_or(anchor);
        let open = |i: usize| reps.open_price[sym.otype.code() as usize][i];
        let offset = match sym.rel_price {
            r if r <= -REL_PRICE_LIMIT => open(0),
            r if r >= REL_PRICE_LIMIT => open(1),
            r => r as i64,
        };
        let mut price = reference.saturating_add(offset);
        if sym.otype.is_cancel() && sym.rel_price.abs() == REL_PRICE_LIMIT {
            // an open-ended cancel targets the live level in its bucket
            // closest to the representative price
            let edge = REL_PRICE_LIMIT as i64;
            let low = sym.rel_price < 0;
            let target = price;
            let in_bucket = |p: &i64| if low { *p <= reference - edge } else { *p >= reference + edge };
            if let Some(p) = book.prices(side).filter(in_bucket).min_by_key(|p| (p - target).abs()) {
                price = p;
            }
        }
        LimitOrder {
            interarrival_ms: reps.interarrival_ms[sym.dt_bucket as usize],
            otype: sym.otype,
            price_ticks: price.clamp(cfg.price_min, cfg.price_max),
            quantity: reps.quantity[sym.qty_bucket as usize].clamp(1, cfg.qty_max),
        }
    }

    /// Autoregressive continuation of `seed_history`.
    ///
    /// The seed orders are replayed from an empty book to build the book the
    /// continuation starts from, and their last `order` symbols form the
    /// initial context. Generated time continues from the end of the seed and
    /// stops advancing at the end of the day.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        seed_history: &[MarketObservation],
        n: usize,
        cfg: &StreamConfig,
        rng: &mut R,
    ) -> Stream {
        let mut book = OrderBook::for_config(cfg);
        let mut context: Vec<CoarseSymbol> = Vec::with_capacity(seed_history.len() + n);
        let day = cfg.day_length_ms();
        let mut elapsed: u64 = 0;
        let mut anchor = (cfg.price_min + cfg.price_max) / 2;
        for obs in seed_history {
            let (bid, ask) = (book.best_bid(), book.best_ask());
            book.apply(&obs.order);
            context.push(coarsen(obs, bid, ask));
            elapsed = (elapsed + obs.order.interarrival_ms).min(day);
            anchor = obs.order.price_ticks;
        }
        let keep = context.len().saturating_sub(self.order);
        context.drain(..keep);

        let mut observations = Vec::with_capacity(n);
        for _ in 0..n {
            let bucket = bucket_of(cfg.day_start_ms + elapsed as i64, cfg).expect("elapsed within the day");
            let sym = self.sample(bucket, &context, rng);
            let mut order = self.decoarsen(&sym, &book, anchor, cfg);
            order.interarrival_ms = order.interarrival_ms.min(day - elapsed);
            elapsed += order.interarrival_ms;
            let (bid, ask) = (book.best_bid(), book.best_ask());
            book.apply(&order);
            let obs = MarketObservation {
                order,
                best_bid: book.best_bid(),
                best_ask: book.best_ask(),
                bucket: bucket_of(cfg.day_start_ms + elapsed as i64, cfg).expect("elapsed within the day"),
            };
            anchor = order.price_ticks;
            if self.order > 0 {
                if context.len() == self.order {
                    context.remove(0);
                }
                context.push(coarsen(&obs, bid, ask));
            }
            observations.push(obs);
        }
        Stream::new(cfg.clone(), observations)
    }

    pub fn save(&self, path: &Path) -> Result<(), MarkovError> {
        let file = ModelFile::from(self);
        let json = serde_json::to_string(&file).map_err(|e| MarkovError::Format(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<MarkovModel, MarkovError> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| MarkovError::Format(e.to_string()))?;
        MarkovModel::try_from(file)
    }
}

fn fit_representatives(stream: &Stream, symbols: &[CoarseSymbol]) -> Representatives {
    let mut reps = Representatives::default();
    let mut open: [[Mean; 2]; 4] = Default::default();
    let mut qty: [Mean; QTY_BUCKETS] = Default::default();
    let mut dt: [Mean; DT_BUCKETS] = Default::default();
    let mut bid = stream.config.absent_bid();
    let mut ask = stream.config.absent_ask();
    for (obs, sym) in stream.observations.iter().zip(symbols) {
        let o = &obs.order;
        if sym.rel_price.abs() == REL_PRICE_LIMIT {
            if let Some(r) = reference_price(o.otype.side(), bid, ask) {
                let side = usize::from(sym.rel_price > 0);
                open[o.otype.code() as usize][side].add((o.price_ticks - r) as f64);
            }
        }
        qty[sym.qty_bucket as usize].add(o.quantity as f64);
        dt[sym.dt_bucket as usize].add(o.interarrival_ms as f64);
        bid = obs.best_bid;
        ask = obs.best_ask;
    }
    for (t, sides) in open.iter().enumerate() {
        for (s, m) in sides.iter().enumerate() {
            if let Some(v) = m.get() {
                reps.open_price[t][s] = v.round() as i64;
            }
        }
    }
    for (b, m) in qty.iter().enumerate() {
        if let Some(v) = m.get() {
            let (lo, hi) = qty_range(b);
            reps.quantity[b] = (v.round() as u64).clamp(lo, hi);
        }
    }
    for (b, m) in dt.iter().enumerate() {
        if let Some(v) = m.get() {
            let (lo, hi) = dt_range(b);
            reps.interarrival_ms[b] = (v.round() as u64).clamp(lo, hi);
        }
    }
    reps
}

pub const MODEL_FORMAT: &str = "orderlab-markov-v1";

/// On-disk model layout (JSON). `tables[b]` for `b < 24` is the table of
/// intraday bucket `b`; `tables[24]` is pooled over the whole day. Counts are
/// `[symbol_index, count]` pairs; a context lists its symbol indices oldest
/// first. Symbol index = `((type * 9 + rel_price + 4) * 11 + qty_bucket) * 6 + dt_bucket`.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    order: usize,
    alpha: f64,
    representatives: Representatives,
    tables: Vec<TableFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TableFile {
    unigram: Vec<(u16, u64)>,
    contexts: Vec<ContextFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ContextFile {
    context: Vec<u16>,
    counts: Vec<(u16, u64)>,
}

fn unpack(key: u64, len: usize) -> Vec<u16> {
    (0..len)
        .rev()
        .map(|i| ((key >> (SYMBOL_BITS as usize * i)) & ((1 << SYMBOL_BITS) - 1)) as u16)
        .collect()
}

impl From<&MarkovModel> for ModelFile {
    fn from(m: &MarkovModel) -> Self {
        let tables = m
            .tables
            .iter()
            .map(|t| {
                let mut contexts: Vec<ContextFile> = t
                    .contexts
                    .iter()
                    .enumerate()
                    .flat_map(|(j, map)| {
                        map.iter().map(move |(&k, c)| ContextFile {
                            context: unpack(k, j + 1),
                            counts: c.next.clone(),
                        })
                    })
                    .collect();
                contexts.sort_by(|a, b| (a.context.len(), &a.context).cmp(&(b.context.len(), &b.context)));
                TableFile {
                    unigram: t.unigram.next.clone(),
                    contexts,
                }
            })
            .collect();
        ModelFile {
            format: MODEL_FORMAT.into(),
            order: m.order,
            alpha: m.alpha,
            representatives: m.representatives.clone(),
            tables,
        }
    }
}

impl TryFrom<ModelFile> for MarkovModel {
    type Error = MarkovError;

    fn try_from(f: ModelFile) -> Result<Self, MarkovError> {
        let bad = |m: String| Err(MarkovError::Format(m));
        if f.format != MODEL_FORMAT {
            return bad(format!("unknown format {:?}", f.format));
        }
        if f.order > MAX_ORDER {
            return Err(MarkovError::BadOrder(f.order));
        }
        if !(f.alpha > 0.0 && f.alpha.is_finite()) {
            return Err(MarkovError::BadAlpha(f.alpha));
        }
        if f.tables.len() != POOLED + 1 {
            return bad(format!("expected {} tables, found {}", POOLED + 1, f.tables.len()));
        }
        let check = |counts: &[(u16, u64)]| counts.iter().all(|&(s, c)| (s as usize) < ALPHABET_SIZE && c > 0);
        let mut tables = Vec::with_capacity(f.tables.len());
        for t in f.tables {
            if !check(&t.unigram) {
                return bad("unigram entry out of range".into());
            }
            let mut contexts = vec![HashMap::new(); f.order];
            for c in t.contexts {
                let len = c.context.len();
                if len == 0 || len > f.order || !c.context.iter().all(|&s| (s as usize) < ALPHABET_SIZE) || !check(&c.counts) {
                    return bad(format!("malformed context {:?}", c.context));
                }
                contexts[len - 1].insert(pack(&c.context), Counts::from_map(c.counts.into_iter().collect()));
            }
            tables.push(Table {
                unigram: Counts::from_map(t.unigram.into_iter().collect()),
                contexts,
            });
        }
        Ok(MarkovModel {
            order: f.order,
            alpha: f.alpha,
            tables,
            representatives: f.representatives,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::replay;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> StreamConfig {
        StreamConfig {
            symbol: "T".into(),
            tick_size: 0.01,
            price_min: 0,
            price_max: 5000,
            qty_max: 5000,
            day_start_ms: 0,
            day_end_ms: 10_000_000,
            normalization: None,
        }
    }

    #[test]
    fn alphabet_indexing_is_a_bijection() {
        assert_eq!(ALPHABET_SIZE, 4 * 9 * 11 * 6);
        for i in 0..ALPHABET_SIZE as u16 {
            assert_eq!(CoarseSymbol::from_index(i).index(), i);
        }
    }

    #[test]
    fn bucket_edges() {
        assert_eq!(qty_bucket(1), 0);
        assert_eq!(qty_bucket(3), 1);
        assert_eq!(qty_bucket(1023), 9);
        assert_eq!(qty_bucket(1024), 10);
        assert_eq!(qty_bucket(1 << 40), 10);
        assert_eq!(dt_bucket(0), 0);
        assert_eq!(dt_bucket(9), 0);
        assert_eq!(dt_bucket(10), 1);
        assert_eq!(dt_bucket(999), 2);
        assert_eq!(dt_bucket(1000), 3);
        assert_eq!(dt_bucket(10_000_000), 5);
    }

    #[test]
    fn buy_at_best_bid_has_zero_offset() {
        let obs = MarketObservation {
            order: LimitOrder::new(5, OrderType::Buy, 1000, 1),
            best_bid: Quote::new(1000, 2),
            best_ask: Quote::new(1003, 1),
            bucket: 0,
        };
        let s = coarsen(&obs, Quote::new(1000, 1), Quote::new(1003, 1));
        assert_eq!(s.rel_price, 0);
        let s = coarsen(&obs, Quote::new(990, 1), Quote::new(1003, 1));
        assert_eq!(s.rel_price, 4);
        let s = coarsen(&obs, Quote::absent(0), Quote::new(1002, 1));
        assert_eq!(s.rel_price, -2);
    }

    /// Buy at the best bid, sell at the best ask, cancel one unit at the best
    /// bid: a three-symbol cycle that keeps both sides non-empty. The two
    /// opening orders are slow so their symbols never occur inside the cycle.
    fn cycle_stream(reps: usize) -> Stream {
        let mut orders = vec![
            LimitOrder::new(5000, OrderType::Buy, 1000, 1),
            LimitOrder::new(5000, OrderType::Sell, 1002, 1),
        ];
        for _ in 0..reps {
            orders.push(LimitOrder::new(5, OrderType::Buy, 1000, 1));
            orders.push(LimitOrder::new(5, OrderType::Sell, 1002, 1));
            orders.push(LimitOrder::new(5, OrderType::CancelBuy, 1000, 1));
        }
        replay(&orders, &cfg()).unwrap()
    }

    #[test]
    fn cycle_conditional_concentrates() {
        let s = cycle_stream(200);
        let syms = coarsen_stream(&s);
        let (a, b) = (syms[2], syms[3]);
        let m = MarkovModel::fit(&s, 1, 1e-9).unwrap();
        let p = m.conditional(0, &[a]);
        assert!(p[b.index() as usize] > 1.0 - 1e-6);
        let uniform = MarkovModel::fit(&s, 1, 1e12).unwrap().conditional(0, &[a]);
        for v in uniform {
            assert!((v - 1.0 / ALPHABET_SIZE as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn rows_sum_to_one() {
        let s = cycle_stream(50);
        let syms = coarsen_stream(&s);
        for alpha in [1e-6, 0.5, 10.0] {
            let m = MarkovModel::fit(&s, 3, alpha).unwrap();
            for hist in [&syms[..0], &syms[..1], &syms[5..8], &[CoarseSymbol::from_index(17); 3][..]] {
                let total: f64 = m.conditional(0, hist).iter().sum();
                assert!((total - 1.0).abs() < 1e-12, "{total}");
            }
            // unseen bucket falls back to the pooled table
            let total: f64 = m.conditional(20, &syms[5..8]).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn generation_reproduces_the_cycle() {
        let s = cycle_stream(300);
        let syms = coarsen_stream(&s);
        let m = MarkovModel::fit(&s, 1, 1e-12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = m.generate(&s.observations, 600, &s.config, &mut rng);
        let gen_syms: Vec<_> = {
            let mut bid = s.observations.last().unwrap().best_bid;
            let mut ask = s.observations.last().unwrap().best_ask;
            g.observations
                .iter()
                .map(|o| {
                    let c = coarsen(o, bid, ask);
                    bid = o.best_bid;
                    ask = o.best_ask;
                    c
                })
                .collect()
        };
        let period = &syms[2..5];
        let last = *syms.last().unwrap();
        let phase = period.iter().position(|&x| x == last).unwrap();
        for (i, sym) in gen_syms.iter().enumerate() {
            assert_eq!(*sym, period[(phase + 1 + i) % 3], "position {i}");
        }
        g.validate().unwrap();
    }

    #[test]
    fn zero_length_generation_is_empty() {
        let s = cycle_stream(10);
        let m = MarkovModel::fit(&s, 3, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(m.generate(&s.observations, 0, &s.config, &mut rng).is_empty());
    }

    #[test]
    fn fit_errors() {
        let empty = Stream::empty(cfg());
        assert!(matches!(MarkovModel::fit(&empty, 3, 0.1), Err(MarkovError::EmptyStream)));
        let s = cycle_stream(0);
        assert!(matches!(MarkovModel::fit(&s, 3, 0.1), Err(MarkovError::TooShort { .. })));
        assert!(matches!(MarkovModel::fit(&cycle_stream(5), 3, 0.0), Err(MarkovError::BadAlpha(_))));
    }

    #[test]
    fn model_file_round_trip() {
        let s = cycle_stream(40);
        let m = MarkovModel::fit(&s, 3, 0.25).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        let back = MarkovModel::load(&path).unwrap();
        assert_eq!(back, m);
        let first = std::fs::read(&path).unwrap();
        back.save(&path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }
}
