//! Stream files, normalization and the ten-level relevance filter.
//!
//! A stream is stored as two files: a comma-separated table of integers
//!
//! ```text
//! seq,delta_ms,type_code,price_ticks,qty,bid_px,bid_qty,ask_px,ask_qty,bucket
//! 0,12,0,1000,1,1000,1,5000,0,0
//! ```
//!
//! (UTF-8, LF line endings, `seq` counting from zero) and a JSON sidecar
//! holding the [`StreamConfig`], written next to it with a `.json` extension.

mod normalize;
mod preprocess;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::order::{LimitOrder, MarketObservation, OrderType, Quote, Stream, StreamConfig, StreamError};

pub use normalize::{denormalize, normalize, NormalizeError, NormalizedObservation};
pub use preprocess::{preprocess, relevant_orders, PreprocessReport, RELEVANCE_LEVELS};

pub const STREAM_HEADER: &str = "seq,delta_ms,type_code,price_ticks,qty,bid_px,bid_qty,ask_px,ask_qty,bucket";
pub const ORDERS_HEADER: &str = "delta_ms,type_code,price_ticks,qty";

#[derive(Debug, Error)]
pub enum StreamIoError {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: invalid config sidecar")]
    Sidecar {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: invalid stream")]
    Invalid {
        path: PathBuf,
        #[source]
        source: StreamError,
    },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StreamIoError + '_ {
    move |source| StreamIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Location of the config sidecar for a stream file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_config(cfg: &StreamConfig, path: &Path) -> Result<(), StreamIoError> {
    let json = serde_json::to_string_pretty(cfg).expect("config serializes");
    std::fs::write(path, json + "\n").map_err(io_err(path))
}

pub fn read_config(path: &Path) -> Result<StreamConfig, StreamIoError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| StreamIoError::Sidecar {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the stream table to any sink.
pub fn write_observations<W: Write>(observations: &[MarketObservation], mut out: W) -> io::Result<()> {
    writeln!(out, "{STREAM_HEADER}")?;
    for (seq, obs) in observations.iter().enumerate() {
        let o = &obs.order;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            seq,
            o.interarrival_ms,
            o.otype.code(),
            o.price_ticks,
            o.quantity,
            obs.best_bid.price_ticks,
            obs.best_bid.quantity,
            obs.best_ask.price_ticks,
            obs.best_ask.quantity,
            obs.bucket
        )?;
    }
    out.flush()
}

pub fn write_stream(stream: &Stream, path: &Path) -> Result<(), StreamIoError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_observations(&stream.observations, BufWriter::new(file)).map_err(io_err(path))?;
    write_config(&stream.config, &sidecar_path(path))
}

pub(crate) fn parse_field<T: std::str::FromStr>(field: Option<&str>, name: &str) -> Result<T, String> {
    let raw = field.ok_or_else(|| format!("missing column {name}"))?;
    raw.parse()
        .map_err(|_| format!("column {name}: expected an integer, found {raw:?}"))
}

pub(crate) fn parse_type(code: u8) -> Result<OrderType, String> {
    OrderType::from_code(code).ok_or_else(|| format!("column type_code: {code} is not in 0..=3"))
}

fn parse_stream_row(line: &str, expected_seq: usize) -> Result<MarketObservation, String> {
    let mut f = line.split(',');
    let seq: usize = parse_field(f.next(), "seq")?;
    if seq != expected_seq {
        return Err(format!("seq {seq} out of order, expected {expected_seq}"));
    }
    let interarrival_ms = parse_field(f.next(), "delta_ms")?;
    let otype = parse_type(parse_field(f.next(), "type_code")?)?;
    let price_ticks = parse_field(f.next(), "price_ticks")?;
    let quantity = parse_field(f.next(), "qty")?;
    let best_bid = Quote::new(parse_field(f.next(), "bid_px")?, parse_field(f.next(), "bid_qty")?);
    let best_ask = Quote::new(parse_field(f.next(), "ask_px")?, parse_field(f.next(), "ask_qty")?);
    let bucket = parse_field(f.next(), "bucket")?;
    if f.next().is_some() {
        return Err("too many columns".into());
    }
    Ok(MarketObservation {
        order: LimitOrder {
            interarrival_ms,
            otype,
            price_ticks,
            quantity,
        },
        best_bid,
        best_ask,
        bucket,
    })
}

fn parse_order_row(line: &str) -> Result<LimitOrder, String> {
    let mut f = line.split(',');
    let interarrival_ms = parse_field(f.next(), "delta_ms")?;
    let otype = parse_type(parse_field(f.next(), "type_code")?)?;
    let price_ticks = parse_field(f.next(), "price_ticks")?;
    let quantity = parse_field(f.next(), "qty")?;
    if f.next().is_some() {
        return Err("too many columns".into());
    }
    Ok(LimitOrder {
        interarrival_ms,
        otype,
        price_ticks,
        quantity,
    })
}

pub(crate) fn read_table<T>(
    path: &Path,
    header: &str,
    mut parse: impl FnMut(&str, usize) -> Result<T, String>,
) -> Result<Vec<T>, StreamIoError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut rows = Vec::new();
    let mut saw_header = false;
    let parse_err = |line, message| StreamIoError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let lineno = i + 1;
        if i == 0 {
            if line != header {
                return Err(parse_err(lineno, format!("expected header {header:?}")));
            }
            saw_header = true;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        rows.push(parse(&line, rows.len()).map_err(|m| parse_err(lineno, m))?);
    }
    if !saw_header {
        return Err(parse_err(1, "missing header".into()));
    }
    Ok(rows)
}

/// Reads a stream table and its sidecar, then checks every stream invariant.
pub fn read_stream(path: &Path) -> Result<Stream, StreamIoError> {
    let config = read_config(&sidecar_path(path))?;
    let observations = read_table(path, STREAM_HEADER, parse_stream_row)?;
    let stream = Stream::new(config, observations);
    stream.validate().map_err(|source| StreamIoError::Invalid {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(stream)
}

/// Reads a bare order list. Accepts either the order-only table
/// (`delta_ms,type_code,price_ticks,qty`) or a full stream table, whose
/// quote columns are ignored.
pub fn read_orders(path: &Path) -> Result<Vec<LimitOrder>, StreamIoError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut first = String::new();
    BufReader::new(file)
        .read_line(&mut first)
        .map_err(io_err(path))?;
    if first.trim_end() == STREAM_HEADER {
        let rows = read_table(path, STREAM_HEADER, parse_stream_row)?;
        Ok(rows.into_iter().map(|o| o.order).collect())
    } else {
        read_table(path, ORDERS_HEADER, |line, _| parse_order_row(line))
    }
}

pub fn write_orders(orders: &[LimitOrder], path: &Path) -> Result<(), StreamIoError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> io::Result<()> {
        writeln!(out, "{ORDERS_HEADER}")?;
        for o in orders {
            writeln!(out, "{},{},{},{}", o.interarrival_ms, o.otype.code(), o.price_ticks, o.quantity)?;
        }
        out.flush()
    };
    write(&mut out).map_err(io_err(path))
}
