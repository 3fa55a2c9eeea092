//! Plot-ready CSV panels.
//!
//! Every file is long-format with a leading `stream` column so several
//! streams share one file:
//!
//! | file | columns |
//! |------|---------|
//! | `price_hist.csv`, `quantity_hist.csv`, `interarrival_hist.csv` | `stream,order_type,bin_lo,bin_hi,mass` |
//! | `intensity.csv` | `stream,chunk,start_s,value` |
//! | `quotes.csv` | `stream,event,best_bid,best_ask` |
//! | `spectral.csv` | `stream,series,bin,frequency,magnitude` |
//!
//! `order_type` is `all` for the pooled histogram. A comparison adds
//! `ks_summary.csv` (`statistic,order_type,ks`, empty `ks` when a type is
//! missing from one stream) and `summary.json`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::{EvalError, EvalReport, Histograms, KsEntry, ReferenceValue, StreamStats};

fn create(dir: &Path, name: &str) -> Result<(BufWriter<File>, std::path::PathBuf), EvalError> {
    let path = dir.join(name);
    let f = File::create(&path).map_err(|source| EvalError::Io {
        path: path.clone(),
        source,
    })?;
    Ok((BufWriter::new(f), path))
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn type_label(h: &super::Histogram) -> &'static str {
    h.otype.map_or("all", |t| t.name())
}

fn write_histograms(dir: &Path, name: &str, panels: &[(&str, &Histograms)]) -> Result<(), EvalError> {
    let (mut w, path) = create(dir, name)?;
    let err = io_at(&path);
    writeln!(w, "stream,order_type,bin_lo,bin_hi,mass").map_err(&err)?;
    for (label, hs) in panels {
        for h in hs.all() {
            for (i, m) in h.mass.iter().enumerate() {
                writeln!(w, "{label},{},{},{},{m}", type_label(h), h.edges[i], h.edges[i + 1]).map_err(&err)?;
            }
        }
    }
    w.flush().map_err(&err)
}

/// Writes the per-panel CSV files for one or more labelled streams.
pub fn write_panels(dir: &Path, streams: &[(&str, &StreamStats)]) -> Result<(), EvalError> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    for (name, pick) in [
        ("price_hist.csv", 0usize),
        ("quantity_hist.csv", 1),
        ("interarrival_hist.csv", 2),
    ] {
        let panels: Vec<(&str, &Histograms)> = streams
            .iter()
            .map(|(l, s)| {
                let h = &s.histograms;
                (*l, [&h.price, &h.quantity, &h.interarrival][pick])
            })
            .collect();
        write_histograms(dir, name, &panels)?;
    }

    let (mut w, path) = create(dir, "intensity.csv")?;
    let err = io_at(&path);
    writeln!(w, "stream,chunk,start_s,value").map_err(&err)?;
    for (label, s) in streams {
        for (i, v) in s.intensity.values.iter().enumerate() {
            writeln!(w, "{label},{i},{},{v}", i as f64 * s.intensity.chunk_s).map_err(&err)?;
        }
    }
    w.flush().map_err(&err)?;

    let (mut w, path) = create(dir, "quotes.csv")?;
    let err = io_at(&path);
    writeln!(w, "stream,event,best_bid,best_ask").map_err(&err)?;
    for (label, s) in streams {
        for (i, (b, a)) in s.quotes.bid.iter().zip(&s.quotes.ask).enumerate() {
            writeln!(w, "{label},{i},{b},{a}").map_err(&err)?;
        }
    }
    w.flush().map_err(&err)?;

    let (mut w, path) = create(dir, "spectral.csv")?;
    let err = io_at(&path);
    writeln!(w, "stream,series,bin,frequency,magnitude").map_err(&err)?;
    for (label, s) in streams {
        for (series, sd) in [("best_bid", &s.bid_spectrum), ("best_ask", &s.ask_spectrum)] {
            for (k, m) in sd.magnitudes.iter().enumerate() {
                writeln!(w, "{label},{series},{k},{},{m}", sd.frequency(k)).map_err(&err)?;
            }
        }
    }
    w.flush().map_err(&err)
}

#[derive(Serialize)]
struct Summary<'a> {
    reference_orders: usize,
    candidate_orders: usize,
    chunk_s: f64,
    ks: &'a [KsEntry],
    reference_values: &'a [ReferenceValue],
}

/// Writes all panels for both streams plus `ks_summary.csv` and
/// `summary.json`.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<(), EvalError> {
    write_panels(dir, &[("reference", &report.reference), ("candidate", &report.candidate)])?;

    let (mut w, path) = create(dir, "ks_summary.csv")?;
    let err = io_at(&path);
    writeln!(w, "statistic,order_type,ks").map_err(&err)?;
    for e in &report.ks {
        let t = e.otype.map_or("all", |t| t.name());
        let v = e.ks.map(|v| v.to_string()).unwrap_or_default();
        writeln!(w, "{},{t},{v}", e.statistic.name()).map_err(&err)?;
    }
    w.flush().map_err(&err)?;

    let summary = Summary {
        reference_orders: report.reference.orders,
        candidate_orders: report.candidate.orders,
        chunk_s: report.config.chunk_s,
        ks: &report.ks,
        reference_values: &report.reference_values,
    };
    let path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, json + "\n").map_err(io_at(&path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::replay;
    use crate::eval::{compare, EvalConfig};
    use crate::order::{LimitOrder, OrderType, StreamConfig};

    #[test]
    fn report_files_are_written() {
        let cfg = StreamConfig {
            symbol: "T".into(),
            tick_size: 0.01,
            price_min: 0,
            price_max: 100,
            qty_max: 10,
            day_start_ms: 0,
            day_end_ms: 1000,
            normalization: None,
        };
        let s = replay(
            &[
                LimitOrder::new(1, OrderType::Buy, 10, 1),
                LimitOrder::new(1, OrderType::Sell, 12, 1),
            ],
            &cfg,
        )
        .unwrap();
        let r = compare(&s, &s, &EvalConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_report(&r, dir.path()).unwrap();
        for f in [
            "price_hist.csv",
            "quantity_hist.csv",
            "interarrival_hist.csv",
            "intensity.csv",
            "quotes.csv",
            "spectral.csv",
            "ks_summary.csv",
            "summary.json",
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let quotes = fs::read_to_string(dir.path().join("quotes.csv")).unwrap();
        assert_eq!(
            quotes,
            "stream,event,best_bid,best_ask\nreference,0,10,100\nreference,1,10,12\ncandidate,0,10,100\ncandidate,1,10,12\n"
        );
        let ks = fs::read_to_string(dir.path().join("ks_summary.csv")).unwrap();
        assert!(ks.contains("price,all,0\n"));
        assert!(ks.contains("price,cancel_buy,\n"));
    }
}
