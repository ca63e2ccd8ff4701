//! Writing experiment results to disk.
//!
//! `emit_report` produces, inside the output directory:
//!
//! * `metrics.csv`: one row per (stream, evaluation, phase);
//! * `summary.csv`: mean and standard deviation per phase;
//! * `baseline_metrics.csv`: the PCA + KNN reference, when it was run;
//! * `ltm_trace.csv`: LTM size per layer against images seen;
//! * `accuracy.svg` and `ltm.svg` when plots are requested;
//! * `snapshots/` when the run kept its final models.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use plotters::prelude::*;
use stam::snapshot::{save_hierarchy, save_pca};

use crate::error::{HarnessError, Result};
use crate::experiment::{ExperimentResult, SweepBlock};
use crate::metrics::{
    write_baseline_csv, write_metrics_csv, write_trace_csv, BaselineMetrics, PhaseMetrics,
    SampledTrace,
};

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregate of all rows of one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSummary {
    pub phase: usize,
    pub classes_seen: usize,
    pub rows: usize,
    pub acc: (f64, f64),
    pub cluster_acc: Option<(f64, f64)>,
    pub abstain_rate: (f64, f64),
    /// `(layer, (mean, std))`.
    pub ltm: Vec<(usize, (f64, f64))>,
    pub cin: Vec<(usize, (f64, f64))>,
    pub footprint_px: (f64, f64),
}

pub fn summarize(rows: &[PhaseMetrics]) -> Vec<PhaseSummary> {
    let mut phases: Vec<usize> = rows.iter().map(|r| r.phase).collect();
    phases.sort_unstable();
    phases.dedup();
    phases
        .into_iter()
        .map(|p| {
            let sel: Vec<&PhaseMetrics> = rows.iter().filter(|r| r.phase == p).collect();
            let col = |f: &dyn Fn(&PhaseMetrics) -> f64| {
                mean_std(&sel.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            let clusters: Vec<f64> = sel.iter().filter_map(|r| r.cluster_acc).collect();
            let layers: Vec<usize> = sel[0].ltm.iter().map(|&(l, _)| l).collect();
            PhaseSummary {
                phase: p,
                classes_seen: sel[0].classes_seen.len(),
                rows: sel.len(),
                acc: col(&|r| r.acc_mean),
                cluster_acc: (!clusters.is_empty()).then(|| mean_std(&clusters)),
                abstain_rate: col(&|r| r.abstain_rate),
                ltm: layers
                    .iter()
                    .enumerate()
                    .map(|(j, &l)| (l, col(&|r| r.ltm[j].1 as f64)))
                    .collect(),
                cin: layers
                    .iter()
                    .enumerate()
                    .map(|(j, &l)| (l, col(&|r| r.cin[j])))
                    .collect(),
                footprint_px: col(&|r| r.footprint_px as f64),
            }
        })
        .collect()
}

fn out_err(path: &Path) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::Output(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(out_err(path))
}

pub fn write_summary_csv(path: &Path, summary: &[PhaseSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let layers: Vec<usize> = summary
        .first()
        .map(|s| s.ltm.iter().map(|&(l, _)| l).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = [
        "phase",
        "classes_seen",
        "rows",
        "acc_mean",
        "acc_std",
        "cluster_acc_mean",
        "cluster_acc_std",
        "abstain_rate_mean",
        "abstain_rate_std",
    ]
    .map(String::from)
    .to_vec();
    for l in &layers {
        header.push(format!("ltm_l{l}_mean"));
        header.push(format!("ltm_l{l}_std"));
    }
    for l in &layers {
        header.push(format!("cin_l{l}_mean"));
        header.push(format!("cin_l{l}_std"));
    }
    header.push("footprint_px_mean".into());
    let csv_err = |e: csv::Error| HarnessError::Output(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for s in summary {
        let mut rec = vec![
            s.phase.to_string(),
            s.classes_seen.to_string(),
            s.rows.to_string(),
            s.acc.0.to_string(),
            s.acc.1.to_string(),
        ];
        match s.cluster_acc {
            Some((m, sd)) => rec.extend([m.to_string(), sd.to_string()]),
            None => rec.extend([String::new(), String::new()]),
        }
        rec.extend([s.abstain_rate.0.to_string(), s.abstain_rate.1.to_string()]);
        for (_, (m, sd)) in s.ltm.iter().chain(&s.cin) {
            rec.extend([m.to_string(), sd.to_string()]);
        }
        rec.push(s.footprint_px.0.to_string());
        w.write_record(rec).map_err(csv_err)?;
    }
    w.flush().map_err(out_err(path))
}

fn baseline_curve(rows: &[BaselineMetrics]) -> Vec<(usize, f64)> {
    let mut phases: Vec<usize> = rows.iter().map(|r| r.phase).collect();
    phases.sort_unstable();
    phases.dedup();
    phases
        .into_iter()
        .map(|p| {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r.phase == p)
                .map(|r| r.acc_mean)
                .collect();
            (p, mean_std(&v).0)
        })
        .collect()
}

fn plot_err<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Output(format!("plot: {e}"))
}

const PALETTE: [RGBColor; 6] = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];

/// Mean accuracy per phase, with the PCA reference when available.
pub fn plot_accuracy(
    path: &Path,
    summary: &[PhaseSummary],
    baseline: &[BaselineMetrics],
) -> Result<()> {
    let root = SVGBackend::new(path, (640, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let last = summary.iter().map(|s| s.phase).max().unwrap_or(1) as f64;
    let mut chart = ChartBuilder::on(&root)
        .caption("Expanding classification accuracy", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(48)
        .build_cartesian_2d(0.5..last + 0.5, 0.0..1.0)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("phase")
        .y_desc("accuracy")
        .draw()
        .map_err(plot_err)?;
    let stam: Vec<(f64, f64)> = summary.iter().map(|s| (s.phase as f64, s.acc.0)).collect();
    chart
        .draw_series(LineSeries::new(stam.clone(), BLUE.stroke_width(2)))
        .map_err(plot_err)?
        .label("STAM")
        .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], BLUE));
    chart
        .draw_series(stam.iter().map(|&p| Circle::new(p, 3, BLUE.filled())))
        .map_err(plot_err)?;
    if !baseline.is_empty() {
        let pts: Vec<(f64, f64)> = baseline_curve(baseline)
            .into_iter()
            .map(|(p, a)| (p as f64, a))
            .collect();
        chart
            .draw_series(LineSeries::new(pts, RED.stroke_width(2)))
            .map_err(plot_err)?
            .label("PCA + KNN")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], RED));
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.8))
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)
}

/// LTM size per layer against images seen, averaged over streams.
pub fn plot_ltm(path: &Path, traces: &[SampledTrace]) -> Result<()> {
    let root = SVGBackend::new(path, (640, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let Some(first) = traces.first() else {
        return root.present().map_err(plot_err);
    };
    let n = traces.iter().map(|t| t.images.len()).min().unwrap_or(0);
    let curve = |j: usize| -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let mean =
                    traces.iter().map(|t| t.counts[k][j] as f64).sum::<f64>() / traces.len() as f64;
                (first.images[k] as f64, mean)
            })
            .collect()
    };
    let curves: Vec<Vec<(f64, f64)>> = (0..first.layers.len()).map(curve).collect();
    let xmax = first.images.get(n.saturating_sub(1)).copied().unwrap_or(1) as f64;
    let ymax = curves.iter().flatten().map(|p| p.1).fold(1.0, f64::max);
    let mut chart = ChartBuilder::on(&root)
        .caption("LTM centroids", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(56)
        .build_cartesian_2d(0.0..xmax, 0.0..ymax * 1.05)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("images seen")
        .y_desc("centroids")
        .draw()
        .map_err(plot_err)?;
    for (j, c) in curves.into_iter().enumerate() {
        let color = PALETTE[j % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(c, color.stroke_width(2)))
            .map_err(plot_err)?
            .label(format!("layer {}", first.layers[j]))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.8))
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)
}

fn sampled(result: &ExperimentResult, every: usize) -> Vec<SampledTrace> {
    result
        .traces
        .iter()
        .map(|t| {
            let keep: Vec<usize> = (1..=t.counts.len())
                .filter(|i| i % every == 0 || t.phase_ends.contains(i))
                .collect();
            SampledTrace {
                stream_id: t.stream_id,
                layers: t.layers.clone(),
                counts: keep.iter().map(|&i| t.counts[i - 1].clone()).collect(),
                images: keep,
            }
        })
        .collect()
}

/// Write every report file for `result` into `out_dir`.
pub fn emit_report(
    result: &ExperimentResult,
    out_dir: &Path,
    trace_every: usize,
    plots: bool,
) -> Result<()> {
    if result.metrics.is_empty() {
        return Err(HarnessError::Evaluation("no metrics to report".into()));
    }
    fs::create_dir_all(out_dir).map_err(out_err(out_dir))?;
    write_metrics_csv(create(&out_dir.join("metrics.csv"))?, &result.metrics)?;
    let summary = summarize(&result.metrics);
    write_summary_csv(&out_dir.join("summary.csv"), &summary)?;
    if !result.baseline.is_empty() {
        write_baseline_csv(
            create(&out_dir.join("baseline_metrics.csv"))?,
            &result.baseline,
        )?;
    }
    if !result.traces.is_empty() {
        write_trace_csv(
            create(&out_dir.join("ltm_trace.csv"))?,
            &result.traces,
            trace_every,
        )?;
    }
    if plots {
        plot_accuracy(&out_dir.join("accuracy.svg"), &summary, &result.baseline)?;
        plot_ltm(&out_dir.join("ltm.svg"), &sampled(result, trace_every))?;
    }
    if !result.snapshots.is_empty() {
        let dir = out_dir.join("snapshots");
        fs::create_dir_all(&dir).map_err(out_err(&dir))?;
        for s in &result.snapshots {
            let path = dir.join(format!("stream{}.stam", s.stream_id));
            save_hierarchy(&s.hierarchy, &path)
                .map_err(|e| HarnessError::Output(format!("{}: {e}", path.display())))?;
            if let Some(m) = &s.pca {
                let path = dir.join(format!("stream{}-pca.stam", s.stream_id));
                save_pca(m, &path)
                    .map_err(|e| HarnessError::Output(format!("{}: {e}", path.display())))?;
            }
        }
    }
    Ok(())
}

/// Per-value reports in `out_dir/<axis>-<value>/` plus `sweep.csv` with the
/// final-phase LTM counts and accuracy of every value.
pub fn emit_sweep_report(
    blocks: &[SweepBlock],
    out_dir: &Path,
    trace_every: usize,
    plots: bool,
) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(out_err(out_dir))?;
    let path = out_dir.join("sweep.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    let csv_err = |e: csv::Error| HarnessError::Output(e.to_string());
    let layers: Vec<usize> = blocks
        .first()
        .and_then(|b| b.result.metrics.first())
        .map(|m| m.ltm.iter().map(|&(l, _)| l).collect())
        .unwrap_or_default();
    let mut header: Vec<String> = ["axis", "value", "final_phase", "ltm_total_mean"]
        .map(String::from)
        .to_vec();
    header.extend(layers.iter().map(|l| format!("ltm_l{l}_mean")));
    header.extend(["acc_mean", "acc_std"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    for b in blocks {
        let dir = out_dir.join(format!("{}-{}", b.axis.name(), b.value));
        emit_report(&b.result, &dir, trace_every, plots)?;
        let summary = summarize(&b.result.metrics);
        let last = summary.last().expect("nonempty metrics");
        let total: f64 = last.ltm.iter().map(|(_, (m, _))| m).sum();
        let mut rec = vec![
            b.axis.name().to_string(),
            b.value.to_string(),
            last.phase.to_string(),
            total.to_string(),
        ];
        rec.extend(last.ltm.iter().map(|(_, (m, _))| m.to_string()));
        rec.extend([last.acc.0.to_string(), last.acc.1.to_string()]);
        w.write_record(rec).map_err(csv_err)?;
    }
    w.flush().map_err(out_err(&path))
}
