//! Realism statistics for order streams and two-stream comparisons.
//!
//! Per stream: price, quantity and interarrival histograms (per order type
//! and pooled), order intensity over fixed-length chunks, and the best
//! bid/ask series with its spectral density. A comparison adds KS distances
//! between the two streams' samples.

mod ks;
mod report;
mod spectral;

use serde::Serialize;
use thiserror::Error;

use crate::order::{OrderType, Stream};

pub use ks::ks_distance;
pub use report::{write_panels, write_report};
pub use spectral::{spectral_density, SpectralDensity};

pub const DEFAULT_CHUNK_S: f64 = 100.0;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("stream is empty")]
    EmptyStream,
    #[error("KS distance needs two non-empty samples")]
    EmptySample,
    #[error("sample contains NaN")]
    NanSample,
    #[error("chunk length must be positive, got {0} s")]
    BadChunk(f64),
    #[error("interarrival bin width must be positive")]
    BadBinWidth,
    #[error("spectral density needs at least 2 points, got {0}")]
    SeriesTooShort(usize),
    #[error("cannot write {path}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Price,
    Quantity,
    Interarrival,
}

impl Statistic {
    pub const ALL: [Statistic; 3] = [Statistic::Price, Statistic::Quantity, Statistic::Interarrival];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Price => "price",
            Statistic::Quantity => "quantity",
            Statistic::Interarrival => "interarrival",
        }
    }

    fn value(self, stream: &Stream, i: usize) -> i64 {
        let o = &stream.observations[i].order;
        match self {
            Statistic::Price => o.price_ticks,
            Statistic::Quantity => o.quantity.min(i64::MAX as u64) as i64,
            Statistic::Interarrival => o.interarrival_ms.min(i64::MAX as u64) as i64,
        }
    }
}

/// How interarrival times are binned. Prices and quantities always use unit
/// bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalBins {
    /// `[0, 1), [1, 2), [2, 4), [4, 8), ...` milliseconds.
    Log2,
    Linear(u64),
}

/// Normalized histogram over contiguous integer bins `[edges[i], edges[i+1])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `None` for the histogram pooled over all order types.
    pub otype: Option<OrderType>,
    pub edges: Vec<i64>,
    pub mass: Vec<f64>,
    pub count: usize,
}

impl Histogram {
    fn build(otype: Option<OrderType>, values: &[i64], edges_for: impl Fn(i64, i64) -> Vec<i64>) -> Histogram {
        if values.is_empty() {
            return Histogram {
                otype,
                edges: Vec::new(),
                mass: Vec::new(),
                count: 0,
            };
        }
        let lo = *values.iter().min().expect("non-empty");
        let hi = *values.iter().max().expect("non-empty");
        let edges = edges_for(lo, hi);
        let mut counts = vec![0u64; edges.len() - 1];
        for &v in values {
            counts[bin_index(&edges, v)] += 1;
        }
        let n = values.len() as f64;
        Histogram {
            otype,
            mass: counts.iter().map(|&c| c as f64 / n).collect(),
            edges,
            count: values.len(),
        }
    }

    /// Mass of the bin containing `value`, zero outside the histogram.
    pub fn mass_at(&self, value: i64) -> f64 {
        if self.edges.is_empty() || value < self.edges[0] || value >= *self.edges.last().expect("non-empty") {
            return 0.0;
        }
        self.mass[bin_index(&self.edges, value)]
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }
}

fn bin_index(edges: &[i64], v: i64) -> usize {
    edges.partition_point(|&e| e <= v) - 1
}

fn unit_edges(lo: i64, hi: i64) -> Vec<i64> {
    (lo..=hi + 1).collect()
}

fn log2_edges(_lo: i64, hi: i64) -> Vec<i64> {
    let mut edges = vec![0, 1];
    while *edges.last().expect("non-empty") <= hi && hi < i64::MAX / 2 {
        let next = edges.last().expect("non-empty") * 2;
        edges.push(next);
    }
    edges
}

fn linear_edges(width: i64) -> impl Fn(i64, i64) -> Vec<i64> {
    move |lo, hi| {
        let start = lo.div_euclid(width) * width;
        let mut edges = vec![start];
        while *edges.last().expect("non-empty") <= hi {
            edges.push(edges.last().expect("non-empty") + width);
        }
        edges
    }
}

/// One statistic's histograms: pooled plus one per order type, indexed by
/// type code. Types absent from the stream get an empty histogram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histograms {
    pub statistic: Statistic,
    pub pooled: Histogram,
    pub by_type: [Histogram; 4],
}

impl Histograms {
    pub fn all(&self) -> impl Iterator<Item = &Histogram> {
        std::iter::once(&self.pooled).chain(&self.by_type)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatHistograms {
    pub price: Histograms,
    pub quantity: Histograms,
    pub interarrival: Histograms,
}

impl StatHistograms {
    pub fn get(&self, s: Statistic) -> &Histograms {
        match s {
            Statistic::Price => &self.price,
            Statistic::Quantity => &self.quantity,
            Statistic::Interarrival => &self.interarrival,
        }
    }
}

/// Values of a statistic, optionally restricted to one order type.
pub fn samples(stream: &Stream, statistic: Statistic, otype: Option<OrderType>) -> Vec<i64> {
    (0..stream.len())
        .filter(|&i| otype.is_none_or(|t| stream.observations[i].order.otype == t))
        .map(|i| statistic.value(stream, i))
        .collect()
}

pub fn stat_histograms(stream: &Stream, bins: IntervalBins) -> Result<StatHistograms, EvalError> {
    if stream.is_empty() {
        return Err(EvalError::EmptyStream);
    }
    if bins == IntervalBins::Linear(0) {
        return Err(EvalError::BadBinWidth);
    }
    let build = |statistic: Statistic| {
        let one = |otype: Option<OrderType>| {
            let values = samples(stream, statistic, otype);
            match (statistic, bins) {
                (Statistic::Interarrival, IntervalBins::Log2) => Histogram::build(otype, &values, log2_edges),
                (Statistic::Interarrival, IntervalBins::Linear(w)) => {
                    Histogram::build(otype, &values, linear_edges(w.min(i64::MAX as u64) as i64))
                }
                _ => Histogram::build(otype, &values, unit_edges),
            }
        };
        Histograms {
            statistic,
            pooled: one(None),
            by_type: OrderType::ALL.map(|t| one(Some(t))),
        }
    };
    Ok(StatHistograms {
        price: build(Statistic::Price),
        quantity: build(Statistic::Quantity),
        interarrival: build(Statistic::Interarrival),
    })
}

/// Share of the stream's orders arriving in each consecutive chunk of the
/// day. The chunk count covers the whole configured day.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntensitySeries {
    pub chunk_s: f64,
    pub values: Vec<f64>,
}

pub fn intensity(stream: &Stream, chunk_s: f64) -> Result<IntensitySeries, EvalError> {
    if !(chunk_s > 0.0 && chunk_s.is_finite()) {
        return Err(EvalError::BadChunk(chunk_s));
    }
    if stream.is_empty() {
        return Err(EvalError::EmptyStream);
    }
    let chunk_ms = chunk_s * 1000.0;
    let day = stream.config.day_length_ms().max(stream.total_ms()) as f64;
    let chunks = ((day / chunk_ms).ceil() as usize).max(1);
    let mut counts = vec![0u64; chunks];
    let mut t = 0u64;
    for o in stream.orders() {
        t += o.interarrival_ms;
        counts[((t as f64 / chunk_ms) as usize).min(chunks - 1)] += 1;
    }
    let n = stream.len() as f64;
    Ok(IntensitySeries {
        chunk_s,
        values: counts.iter().map(|&c| c as f64 / n).collect(),
    })
}

/// Best bid and ask price after each order, indexed by arrival. An absent
/// side shows its sentinel price.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuoteSeries {
    pub bid: Vec<i64>,
    pub ask: Vec<i64>,
}

pub fn quote_series(stream: &Stream) -> QuoteSeries {
    QuoteSeries {
        bid: stream.observations.iter().map(|o| o.best_bid.price_ticks).collect(),
        ask: stream.observations.iter().map(|o| o.best_ask.price_ticks).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalConfig {
    pub chunk_s: f64,
    pub interarrival_bins: IntervalBins,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            chunk_s: DEFAULT_CHUNK_S,
            interarrival_bins: IntervalBins::Log2,
        }
    }
}

/// Everything computed for a single stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamStats {
    pub orders: usize,
    pub histograms: StatHistograms,
    pub intensity: IntensitySeries,
    pub quotes: QuoteSeries,
    pub bid_spectrum: SpectralDensity,
    pub ask_spectrum: SpectralDensity,
}

fn as_f64(v: &[i64]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

pub fn stream_stats(stream: &Stream, cfg: &EvalConfig) -> Result<StreamStats, EvalError> {
    let quotes = quote_series(stream);
    Ok(StreamStats {
        orders: stream.len(),
        histograms: stat_histograms(stream, cfg.interarrival_bins)?,
        intensity: intensity(stream, cfg.chunk_s)?,
        bid_spectrum: spectral_density(&as_f64(&quotes.bid))?,
        ask_spectrum: spectral_density(&as_f64(&quotes.ask))?,
        quotes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsEntry {
    pub statistic: Statistic,
    /// `None` for the pooled comparison.
    pub otype: Option<OrderType>,
    /// `None` when one of the streams has no orders of this type.
    pub ks: Option<f64>,
}

/// Reference KS distances of a neural generator against real data, carried
/// along so reports can be read against them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceValue {
    pub dataset: &'static str,
    pub statistic: Statistic,
    pub ks: f64,
}

pub const REFERENCE_VALUES: [ReferenceValue; 5] = [
    ReferenceValue {
        dataset: "synthetic",
        statistic: Statistic::Price,
        ks: 0.108,
    },
    ReferenceValue {
        dataset: "synthetic",
        statistic: Statistic::Interarrival,
        ks: 0.18,
    },
    ReferenceValue {
        dataset: "GOOG",
        statistic: Statistic::Price,
        ks: 0.126,
    },
    ReferenceValue {
        dataset: "GOOG",
        statistic: Statistic::Quantity,
        ks: 0.182,
    },
    ReferenceValue {
        dataset: "GOOG",
        statistic: Statistic::Interarrival,
        ks: 0.066,
    },
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub reference: StreamStats,
    pub candidate: StreamStats,
    pub ks: Vec<KsEntry>,
    pub reference_values: Vec<ReferenceValue>,
}

impl EvalReport {
    pub fn ks(&self, statistic: Statistic, otype: Option<OrderType>) -> Option<f64> {
        self.ks
            .iter()
            .find(|e| e.statistic == statistic && e.otype == otype)
            .and_then(|e| e.ks)
    }
}

pub fn compare(reference: &Stream, candidate: &Stream, cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    let mut ks = Vec::new();
    for statistic in Statistic::ALL {
        for otype in std::iter::once(None).chain(OrderType::ALL.map(Some)) {
            let a = as_f64(&samples(reference, statistic, otype));
            let b = as_f64(&samples(candidate, statistic, otype));
            let value = match ks_distance(&a, &b) {
                Ok(v) => Some(v),
                Err(EvalError::EmptySample) => None,
                Err(e) => return Err(e),
            };
            ks.push(KsEntry {
                statistic,
                otype,
                ks: value,
            });
        }
    }
    Ok(EvalReport {
        config: *cfg,
        reference: stream_stats(reference, cfg)?,
        candidate: stream_stats(candidate, cfg)?,
        ks,
        reference_values: REFERENCE_VALUES.to_vec(),
    })
}
