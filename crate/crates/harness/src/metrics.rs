//! Metric records and their CSV files.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back yields the exact values that were written.

use std::io::{Read, Write};

use stam::dataset::ClassId;

use crate::error::{HarnessError, Result};

/// Evaluation of one stream at one phase boundary with one labeled/test draw.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMetrics {
    pub stream_id: usize,
    pub eval_id: usize,
    /// 1-based phase index.
    pub phase: usize,
    /// Sorted classes shown so far; the expanding task covers all of them.
    pub classes_seen: Vec<ClassId>,
    /// Fraction of test images classified correctly; abstentions count as errors.
    pub acc_mean: f64,
    /// Accuracy per class, aligned with `classes_seen`.
    pub acc_per_class: Vec<f64>,
    pub cluster_acc: Option<f64>,
    /// `(layer, count)` for every active layer (1-based layer numbers).
    pub ltm: Vec<(usize, usize)>,
    /// CIN fraction per active layer, aligned with `ltm`.
    pub cin: Vec<f64>,
    pub abstain_rate: f64,
    pub footprint_px: u64,
    pub seconds: Option<f64>,
}

/// The PCA + KNN reference on the same draws.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineMetrics {
    pub stream_id: usize,
    pub eval_id: usize,
    pub phase: usize,
    pub classes_seen: Vec<ClassId>,
    pub components: usize,
    /// Variance fraction explained by the kept components.
    pub explained: f64,
    pub acc_mean: f64,
    pub cluster_acc: Option<f64>,
}

/// LTM size of every active layer after each stream image.
#[derive(Debug, Clone, PartialEq)]
pub struct LtmTrace {
    pub stream_id: usize,
    /// 1-based layer numbers.
    pub layers: Vec<usize>,
    /// `counts[i][j]`: LTM size of `layers[j]` after `i + 1` images.
    pub counts: Vec<Vec<usize>>,
    /// Images processed at the end of each phase.
    pub phase_ends: Vec<usize>,
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

fn split<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|t| {
            t.parse()
                .map_err(|_| HarnessError::Data(format!("bad {what} entry {t:?}")))
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Output(e.to_string())
}

fn layers_of(rows: &[PhaseMetrics]) -> Result<Vec<usize>> {
    let layers: Vec<usize> = rows
        .first()
        .map(|r| r.ltm.iter().map(|&(l, _)| l).collect())
        .unwrap_or_default();
    if rows.iter().any(|r| {
        r.ltm.iter().map(|&(l, _)| l).ne(layers.iter().copied()) || r.cin.len() != layers.len()
    }) {
        return Err(HarnessError::Evaluation(
            "metric rows disagree on the layer set".into(),
        ));
    }
    Ok(layers)
}

pub fn metrics_header(layers: &[usize]) -> Vec<String> {
    let mut h: Vec<String> = [
        "stream_id",
        "eval_id",
        "phase",
        "classes_seen",
        "acc_mean",
        "acc_per_class",
        "cluster_acc",
    ]
    .map(String::from)
    .to_vec();
    h.extend(layers.iter().map(|l| format!("ltm_l{l}")));
    h.extend(layers.iter().map(|l| format!("cin_l{l}")));
    h.extend(["abstain_rate", "footprint_px", "seconds"].map(String::from));
    h
}

pub fn write_metrics_csv<W: Write>(out: W, rows: &[PhaseMetrics]) -> Result<()> {
    let layers = layers_of(rows)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(metrics_header(&layers)).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.stream_id.to_string(),
            r.eval_id.to_string(),
            r.phase.to_string(),
            join(&r.classes_seen),
            r.acc_mean.to_string(),
            join(&r.acc_per_class),
            opt(r.cluster_acc),
        ];
        rec.extend(r.ltm.iter().map(|(_, n)| n.to_string()));
        rec.extend(r.cin.iter().map(f64::to_string));
        rec.push(r.abstain_rate.to_string());
        rec.push(r.footprint_px.to_string());
        rec.push(opt(r.seconds));
        w.write_record(rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::Output(e.to_string()))
}

struct Row<'a> {
    header: &'a csv::StringRecord,
    rec: csv::StringRecord,
}

impl Row<'_> {
    fn str(&self, name: &str) -> Result<&str> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::Data(format!("missing column {name}")))?;
        self.rec
            .get(i)
            .ok_or_else(|| HarnessError::Data(format!("short row, no {name}")))
    }

    fn get<T: std::str::FromStr>(&self, name: &str) -> Result<T> {
        let s = self.str(name)?;
        s.parse()
            .map_err(|_| HarnessError::Data(format!("bad value {s:?} in column {name}")))
    }

    fn opt(&self, name: &str) -> Result<Option<f64>> {
        match self.str(name)? {
            "" => Ok(None),
            _ => self.get(name).map(Some),
        }
    }
}

fn read_rows<R: Read>(input: R) -> Result<(csv::StringRecord, Vec<csv::StringRecord>)> {
    let mut r = csv::Reader::from_reader(input);
    let header = r
        .headers()
        .map_err(|e| HarnessError::Data(e.to_string()))?
        .clone();
    let recs = r
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| HarnessError::Data(e.to_string()))?;
    Ok((header, recs))
}

pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<PhaseMetrics>> {
    let (header, recs) = read_rows(input)?;
    let layers: Vec<usize> = header
        .iter()
        .filter_map(|h| h.strip_prefix("ltm_l").and_then(|l| l.parse().ok()))
        .collect();
    recs.into_iter()
        .map(|rec| {
            let row = Row {
                header: &header,
                rec,
            };
            Ok(PhaseMetrics {
                stream_id: row.get("stream_id")?,
                eval_id: row.get("eval_id")?,
                phase: row.get("phase")?,
                classes_seen: split(row.str("classes_seen")?, "class")?,
                acc_mean: row.get("acc_mean")?,
                acc_per_class: split(row.str("acc_per_class")?, "accuracy")?,
                cluster_acc: row.opt("cluster_acc")?,
                ltm: layers
                    .iter()
                    .map(|&l| Ok((l, row.get(&format!("ltm_l{l}"))?)))
                    .collect::<Result<_>>()?,
                cin: layers
                    .iter()
                    .map(|&l| row.get(&format!("cin_l{l}")))
                    .collect::<Result<_>>()?,
                abstain_rate: row.get("abstain_rate")?,
                footprint_px: row.get("footprint_px")?,
                seconds: row.opt("seconds")?,
            })
        })
        .collect()
}

const BASELINE_HEADER: [&str; 8] = [
    "stream_id",
    "eval_id",
    "phase",
    "classes_seen",
    "components",
    "explained",
    "acc_mean",
    "cluster_acc",
];

pub fn write_baseline_csv<W: Write>(out: W, rows: &[BaselineMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BASELINE_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.stream_id.to_string(),
            r.eval_id.to_string(),
            r.phase.to_string(),
            join(&r.classes_seen),
            r.components.to_string(),
            r.explained.to_string(),
            r.acc_mean.to_string(),
            opt(r.cluster_acc),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::Output(e.to_string()))
}

pub fn read_baseline_csv<R: Read>(input: R) -> Result<Vec<BaselineMetrics>> {
    let (header, recs) = read_rows(input)?;
    recs.into_iter()
        .map(|rec| {
            let row = Row {
                header: &header,
                rec,
            };
            Ok(BaselineMetrics {
                stream_id: row.get("stream_id")?,
                eval_id: row.get("eval_id")?,
                phase: row.get("phase")?,
                classes_seen: split(row.str("classes_seen")?, "class")?,
                components: row.get("components")?,
                explained: row.get("explained")?,
                acc_mean: row.get("acc_mean")?,
                cluster_acc: row.opt("cluster_acc")?,
            })
        })
        .collect()
}

/// One row per `every` images (and at every phase end) per stream.
pub fn write_trace_csv<W: Write>(out: W, traces: &[LtmTrace], every: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let layers = traces.first().map(|t| t.layers.clone()).unwrap_or_default();
    let mut header = vec![
        "stream_id".to_string(),
        "images_seen".to_string(),
        "phase".to_string(),
    ];
    header.extend(layers.iter().map(|l| format!("ltm_l{l}")));
    w.write_record(&header).map_err(csv_err)?;
    for t in traces {
        for (i, counts) in t.counts.iter().enumerate() {
            let seen = i + 1;
            if seen % every != 0 && !t.phase_ends.contains(&seen) {
                continue;
            }
            let phase = t.phase_ends.iter().position(|&e| seen <= e).unwrap_or(0) + 1;
            let mut rec = vec![t.stream_id.to_string(), seen.to_string(), phase.to_string()];
            rec.extend(counts.iter().map(usize::to_string));
            w.write_record(rec).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| HarnessError::Output(e.to_string()))
}

/// Traces as written by [`write_trace_csv`], holding only the sampled rows
/// (`counts[k]` pairs with `images[k]`).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrace {
    pub stream_id: usize,
    pub layers: Vec<usize>,
    pub images: Vec<usize>,
    pub counts: Vec<Vec<usize>>,
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<SampledTrace>> {
    let (header, recs) = read_rows(input)?;
    let layers: Vec<usize> = header
        .iter()
        .filter_map(|h| h.strip_prefix("ltm_l").and_then(|l| l.parse().ok()))
        .collect();
    let mut out: Vec<SampledTrace> = Vec::new();
    for rec in recs {
        let row = Row {
            header: &header,
            rec,
        };
        let s: usize = row.get("stream_id")?;
        if out.last().is_none_or(|t| t.stream_id != s) {
            out.push(SampledTrace {
                stream_id: s,
                layers: layers.clone(),
                images: Vec::new(),
                counts: Vec::new(),
            });
        }
        let t = out.last_mut().expect("just pushed");
        t.images.push(row.get("images_seen")?);
        t.counts.push(
            layers
                .iter()
                .map(|l| row.get(&format!("ltm_l{l}")))
                .collect::<Result<_>>()?,
        );
    }
    Ok(out)
}
