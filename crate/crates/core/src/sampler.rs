//! Conditioning windows and spaced mini-batches.
//!
//! A window is `k` consecutive observations followed by the target
//! observation. Windows inside one batch are kept more than `min_gap` start
//! indices apart; with `min_gap >= k + 1` no two of them share an
//! observation, which is what makes batch members approximately independent.

use std::io::{self, Write};

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::order::{MarketObservation, Stream};
use crate::stream_io::NormalizedObservation;

pub const DEFAULT_HISTORY: usize = 20;
pub const DEFAULT_BATCH: usize = 64;

const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryWindow<'a> {
    pub start_index: usize,
    pub history: &'a [MarketObservation],
    pub target: &'a MarketObservation,
}

impl HistoryWindow<'_> {
    pub fn bucket(&self) -> u8 {
        self.target.bucket
    }

    pub fn target_index(&self) -> usize {
        self.start_index + self.history.len()
    }

    fn within_one_bucket(&self) -> bool {
        self.history.first().is_none_or(|h| h.bucket == self.target.bucket)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SamplerError {
    #[error("stream of length {len} is too short for history length {k}")]
    TooShort { len: usize, k: usize },
    #[error("min_gap {min_gap} must be at least k + 1 = {}", k + 1)]
    GapTooSmall { min_gap: usize, k: usize },
    #[error("cannot place {requested} windows with gap > {min_gap}; at most {max_feasible} fit")]
    Infeasible {
        requested: usize,
        min_gap: usize,
        max_feasible: usize,
    },
    #[error("no spaced placement found after {0} attempts")]
    Exhausted(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchSpec {
    pub k: usize,
    pub batch_size: usize,
    pub min_gap: usize,
    /// Reject windows whose history and target fall in different buckets.
    pub per_bucket: bool,
}

impl BatchSpec {
    pub fn new(k: usize, batch_size: usize) -> Self {
        BatchSpec {
            k,
            batch_size,
            min_gap: k + 1,
            per_bucket: false,
        }
    }
}

impl Default for BatchSpec {
    fn default() -> Self {
        BatchSpec::new(DEFAULT_HISTORY, DEFAULT_BATCH)
    }
}

fn window_at(obs: &[MarketObservation], start: usize, k: usize) -> HistoryWindow<'_> {
    HistoryWindow {
        start_index: start,
        history: &obs[start..start + k],
        target: &obs[start + k],
    }
}

/// Every window of the stream, in order. Window `j` targets index `j + k`.
pub fn windows(stream: &Stream, k: usize) -> Result<Vec<HistoryWindow<'_>>, SamplerError> {
    let obs = &stream.observations;
    if obs.len() <= k {
        return Err(SamplerError::TooShort { len: obs.len(), k });
    }
    Ok((0..obs.len() - k).map(|s| window_at(obs, s, k)).collect())
}

/// Largest number of starts drawn from the sorted `starts` whose pairwise
/// distance exceeds `min_gap`. Greedy leftmost placement is optimal on a line.
pub fn max_spaced(starts: impl IntoIterator<Item = usize>, min_gap: usize) -> usize {
    let mut count = 0;
    let mut last: Option<usize> = None;
    for s in starts {
        if last.is_none_or(|l| s > l + min_gap) {
            count += 1;
            last = Some(s);
        }
    }
    count
}

/// Draws `batch_size` windows with pairwise start distance above `min_gap`,
/// uniformly over all such placements.
///
/// Placements over a contiguous range of starts are drawn exactly by
/// compressing the gaps: pick sorted distinct slots from the shrunken range
/// and re-insert `min_gap` after each. With `per_bucket`, placements that
/// contain a bucket-straddling window are rejected and redrawn.
pub fn sample_batch<'a, R: Rng + ?Sized>(
    stream: &'a Stream,
    spec: &BatchSpec,
    rng: &mut R,
) -> Result<Vec<HistoryWindow<'a>>, SamplerError> {
    let BatchSpec {
        k,
        batch_size,
        min_gap,
        per_bucket,
    } = *spec;
    if min_gap < k + 1 {
        return Err(SamplerError::GapTooSmall { min_gap, k });
    }
    let all = windows(stream, k)?;
    let max_feasible = if per_bucket {
        max_spaced(
            all.iter().filter(|w| w.within_one_bucket()).map(|w| w.start_index),
            min_gap,
        )
    } else {
        max_spaced(0..all.len(), min_gap)
    };
    if batch_size > max_feasible {
        return Err(SamplerError::Infeasible {
            requested: batch_size,
            min_gap,
            max_feasible,
        });
    }
    if batch_size == 0 {
        return Ok(Vec::new());
    }
    let slots = all.len() - (batch_size - 1) * min_gap;
    for _ in 0..MAX_REJECTIONS {
        let mut picks = index::sample(rng, slots, batch_size).into_vec();
        picks.sort_unstable();
        let mut batch: Vec<HistoryWindow<'a>> = picks
            .iter()
            .enumerate()
            .map(|(i, &y)| all[y + i * min_gap])
            .collect();
        if per_bucket && !batch.iter().all(|w| w.within_one_bucket()) {
            continue;
        }
        batch.shuffle(rng);
        return Ok(batch);
    }
    Err(SamplerError::Exhausted(MAX_REJECTIONS))
}

pub const BATCH_HEADER: &str = "batch,window,start_index,pos,d,p,q,a_p,a_q,b_p,b_q,t_buy,t_sell,t_cancel_buy,t_cancel_sell,bucket";

/// Writes batches as normalized numeric rows, one per observation. `pos`
/// runs `0..k` over the history and equals `k` on the target row.
/// `normalized` must be [`crate::stream_io::normalize`] of the stream the windows came from.
pub fn write_batches<W: Write>(
    normalized: &[NormalizedObservation],
    batches: &[Vec<HistoryWindow<'_>>],
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "{BATCH_HEADER}")?;
    for (b, batch) in batches.iter().enumerate() {
        for (w, window) in batch.iter().enumerate() {
            for pos in 0..=window.history.len() {
                let n = &normalized[window.start_index + pos];
                writeln!(
                    out,
                    "{b},{w},{},{pos},{},{},{},{},{},{},{},{},{},{},{},{}",
                    window.start_index,
                    n.d,
                    n.p,
                    n.q,
                    n.a_p,
                    n.a_q,
                    n.b_p,
                    n.b_q,
                    n.otype[0],
                    n.otype[1],
                    n.otype[2],
                    n.otype[3],
                    n.bucket
                )?;
            }
        }
    }
    out.flush()
}
