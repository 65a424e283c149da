//! Result serialization and reporting: the per-epoch results CSV, the
//! summary text, and the overlaid F1 histogram SVG.

use std::path::Path;

use crate::nn::ModelVariant;

use super::stats::{welch_one_sided_greater, WelchTest};
use super::trial::{
    ExperimentSummary, TrialOutcome, TrialRun, F1_HISTOGRAM_BINS, f1_bin,
};
use super::ExperimentError;

/// `trial,seed,model,epoch,train_loss,test_loss,test_acc,test_f1,selected`
pub const RESULTS_CSV_HEADER: &str =
    "trial,seed,model,epoch,train_loss,test_loss,test_acc,test_f1,selected";

/// Render the per-epoch results CSV. Diverged variants contribute no rows.
pub fn results_csv_string(runs: &[TrialRun]) -> String {
    let mut out = String::from(RESULTS_CSV_HEADER);
    out.push('\n');
    for run in runs {
        for outcome in &run.outcomes {
            let TrialOutcome::Completed(result) = outcome else {
                continue;
            };
            for (epoch, rec) in result.per_epoch.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{}\n",
                    run.trial,
                    run.trial_seed,
                    result.variant.id(),
                    epoch,
                    rec.train_loss,
                    rec.test_loss,
                    rec.test_accuracy,
                    rec.test_macro_f1,
                    if epoch == result.selected_epoch { 1 } else { 0 },
                ));
            }
        }
    }
    out
}

pub fn write_results_csv(runs: &[TrialRun], path: impl AsRef<Path>) -> Result<(), ExperimentError> {
    std::fs::write(path, results_csv_string(runs))?;
    Ok(())
}

/// One parsed results row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub trial: usize,
    pub seed: u64,
    pub model: String,
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_acc: f64,
    pub test_f1: f64,
    pub selected: bool,
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<CsvRow>, ExperimentError> {
    let mut reader = csv::Reader::from_path(path.as_ref())
        .map_err(|e| ExperimentError::Results(format!("cannot read CSV: {e}")))?;
    let headers = reader.headers().map_err(|e| ExperimentError::Results(e.to_string()))?;
    let expected: Vec<&str> = RESULTS_CSV_HEADER.split(',').collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(ExperimentError::Results(format!(
            "header {:?}, expected {expected:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record.map_err(|e| ExperimentError::Results(e.to_string()))?;
        if r.len() != 9 {
            return Err(ExperimentError::Results(format!("row with {} fields", r.len())));
        }
        let parse_f = |i: usize| -> Result<f64, ExperimentError> {
            r[i].parse().map_err(|_| ExperimentError::Results(format!("bad float '{}'", &r[i])))
        };
        rows.push(CsvRow {
            trial: r[0].parse().map_err(|_| ExperimentError::Results("bad trial".into()))?,
            seed: r[1].parse().map_err(|_| ExperimentError::Results("bad seed".into()))?,
            model: r[2].to_string(),
            epoch: r[3].parse().map_err(|_| ExperimentError::Results("bad epoch".into()))?,
            train_loss: parse_f(4)?,
            test_loss: parse_f(5)?,
            test_acc: parse_f(6)?,
            test_f1: parse_f(7)?,
            selected: &r[8] == "1",
        });
    }
    if rows.is_empty() {
        return Err(ExperimentError::Results("no data rows".into()));
    }
    Ok(rows)
}

/// Selected-epoch F1 samples of one model, rebuilt from CSV rows.
#[derive(Debug, Clone, PartialEq)]
pub struct F1Samples {
    pub model_id: String,
    pub label: String,
    pub samples: Vec<f64>,
    pub mean: f64,
}

/// Everything `report` renders: per-model F1 samples plus Welch tests
/// against the baseline when it is present.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportData {
    pub models: Vec<F1Samples>,
    pub p_values: Vec<(String, WelchTest)>,
}

pub fn report_from_rows(rows: &[CsvRow]) -> Result<ReportData, ExperimentError> {
    let mut order: Vec<String> = Vec::new();
    for row in rows {
        if !order.contains(&row.model) {
            order.push(row.model.clone());
        }
    }
    // keep the canonical variant ordering where the ids are known
    order.sort_by_key(|id| {
        ModelVariant::from_id(id).map(|v| ModelVariant::ALL.iter().position(|&x| x == v).unwrap())
            .unwrap_or(usize::MAX)
    });

    let mut models = Vec::new();
    for id in &order {
        let mut picked: Vec<(usize, f64)> = rows
            .iter()
            .filter(|r| &r.model == id && r.selected)
            .map(|r| (r.trial, r.test_f1))
            .collect();
        picked.sort_by_key(|&(trial, _)| trial);
        let samples: Vec<f64> = picked.iter().map(|&(_, f1)| f1).collect();
        if samples.is_empty() {
            return Err(ExperimentError::Results(format!("model {id} has no selected rows")));
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let label = ModelVariant::from_id(id).map(|v| v.table_label().to_string()).unwrap_or_else(|| id.clone());
        models.push(F1Samples { model_id: id.clone(), label, samples, mean });
    }

    let mut p_values = Vec::new();
    let baseline = models.iter().find(|m| m.model_id == "conv2d_novox").cloned();
    if let Some(baseline) = baseline {
        for id in ["conv2d_stems3", "dwconv_stems3"] {
            if let Some(model) = models.iter().find(|m| m.model_id == id) {
                if model.samples.len() >= 2 && baseline.samples.len() >= 2 {
                    p_values
                        .push((id.to_string(), welch_one_sided_greater(&model.samples, &baseline.samples)?));
                }
            }
        }
    }
    Ok(ReportData { models, p_values })
}

fn model_color(id: &str) -> &'static str {
    // 3-spectrogram models in oranges, 1-spectrogram models in blues
    match id {
        "conv2d_stems3" => "#ff7f0e",
        "dwconv_stems3" => "#ffb74d",
        "conv2d_full" => "#1f77b4",
        "conv2d_novox" => "#64b5f6",
        _ => "#7f7f7f",
    }
}

const SVG_WIDTH: f64 = 900.0;
const SVG_HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

/// Map an F1 value to its x pixel.
pub fn f1_to_x(f1: f64) -> f64 {
    MARGIN_LEFT + f1 * (SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
}

/// Overlaid per-model F1 histograms (20 bins over [0, 1]) with one dashed
/// mean line per model. The mean line carries `data-model` and `data-mean`
/// attributes and sits at `x = f1_to_x(mean)`.
pub fn render_f1_histogram_svg(data: &ReportData) -> String {
    let plot_w = SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let bottom = MARGIN_TOP + plot_h;

    let mut histograms: Vec<(usize, [u32; F1_HISTOGRAM_BINS])> = Vec::new();
    let mut max_count = 1u32;
    for (i, model) in data.models.iter().enumerate() {
        let mut bins = [0u32; F1_HISTOGRAM_BINS];
        for &f1 in &model.samples {
            bins[f1_bin(f1)] += 1;
        }
        max_count = max_count.max(*bins.iter().max().unwrap());
        histograms.push((i, bins));
    }

    let mut svg = String::new();
    svg.push_str(&format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">"#
    ));
    svg.push('\n');
    svg.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
    svg.push('\n');
    svg.push_str(&format!(
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">Selected-epoch F1 distributions (dashed line: mean)</text>"#,
        SVG_WIDTH / 2.0
    ));
    svg.push('\n');

    // axes
    svg.push_str(&format!(
        r#"<line x1="{MARGIN_LEFT}" y1="{bottom}" x2="{}" y2="{bottom}" stroke="black"/>"#,
        MARGIN_LEFT + plot_w
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r#"<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{bottom}" stroke="black"/>"#
    ));
    svg.push('\n');
    for tick in 0..=10 {
        let f1 = tick as f64 / 10.0;
        let x = f1_to_x(f1);
        svg.push_str(&format!(
            r#"<line x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            bottom + 5.0
        ));
        svg.push('\n');
        svg.push_str(&format!(
            r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{f1:.1}</text>"#,
            bottom + 18.0
        ));
        svg.push('\n');
    }
    svg.push_str(&format!(
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">macro F1</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        SVG_HEIGHT - 12.0
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">trials</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    ));
    svg.push('\n');

    // histogram bars
    let bin_w = plot_w / F1_HISTOGRAM_BINS as f64;
    for &(model_idx, bins) in &histograms {
        let model = &data.models[model_idx];
        let color = model_color(&model.model_id);
        for (b, &count) in bins.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let h = plot_h * count as f64 / max_count as f64;
            let x = MARGIN_LEFT + b as f64 * bin_w;
            svg.push_str(&format!(
                r#"<rect class="hist" data-model="{}" x="{x:.2}" y="{:.2}" width="{bin_w:.2}" height="{h:.2}" fill="{color}" fill-opacity="0.35"/>"#,
                model.model_id,
                bottom - h
            ));
            svg.push('\n');
        }
    }

    // dashed mean lines (machine-checkable position)
    for model in &data.models {
        let x = f1_to_x(model.mean);
        svg.push_str(&format!(
            r#"<line class="mean-line" data-model="{}" data-mean="{:.6}" x1="{x:.2}" y1="{MARGIN_TOP}" x2="{x:.2}" y2="{bottom}" stroke="{}" stroke-width="1.5" stroke-dasharray="6,4"/>"#,
            model.model_id,
            model.mean,
            model_color(&model.model_id)
        ));
        svg.push('\n');
    }

    // legend
    for (i, model) in data.models.iter().enumerate() {
        let y = MARGIN_TOP + 14.0 + i as f64 * 18.0;
        let x = MARGIN_LEFT + 12.0;
        svg.push_str(&format!(
            r#"<rect x="{x:.2}" y="{:.2}" width="12" height="12" fill="{}" fill-opacity="0.6"/>"#,
            y - 10.0,
            model_color(&model.model_id)
        ));
        svg.push('\n');
        svg.push_str(&format!(
            r#"<text x="{:.2}" y="{y:.2}" font-family="sans-serif" font-size="12">{} (mean {:.3})</text>"#,
            x + 18.0,
            xml_escape(&model.label),
            model.mean
        ));
        svg.push('\n');
    }

    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Means and significance lines for the stats file.
pub fn stats_text(data: &ReportData) -> String {
    let mut out = String::new();
    out.push_str("model,label,trials,mean_f1\n");
    for model in &data.models {
        out.push_str(&format!(
            "{},{},{},{:.6}\n",
            model.model_id,
            model.label,
            model.samples.len(),
            model.mean
        ));
    }
    if data.p_values.is_empty() {
        out.push_str("\nno p-values (baseline conv2d_novox absent or too few models)\n");
    } else {
        out.push_str("\none-sided Welch two-sample t-test (greater) vs conv2d_novox:\n");
        for (id, test) in &data.p_values {
            out.push_str(&format!(
                "{id}: t = {:.4}, df = {:.2}, p = {:.6}\n",
                test.t, test.df, test.p
            ));
        }
    }
    out
}

/// The Table-1-shaped mean metrics table.
pub fn table_text(summary: &ExperimentSummary) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<24} {:>9} {:>8}\n", "Model", "Accuracy", "F1"));
    for model in &summary.models {
        out.push_str(&format!(
            "{:<24} {:>9.3} {:>8.3}\n",
            model.variant.table_label(),
            model.mean_accuracy,
            model.mean_f1
        ));
    }
    out
}

/// Full experiment summary: the table plus weighted F1, failures, and the
/// significance tests.
pub fn summary_text(summary: &ExperimentSummary) -> String {
    let mut out = table_text(summary);
    out.push('\n');
    for model in &summary.models {
        out.push_str(&format!(
            "{}: completed {} trial(s), {} failed, mean weighted F1 {:.3}\n",
            model.variant.id(),
            model.completed,
            model.failed,
            model.mean_weighted_f1
        ));
    }
    out.push('\n');
    out.push_str(&format!("significance: {}\n", summary.test_name));
    for p in &summary.p_values {
        let marker = if summary.low_power { " [low-power]" } else { "" };
        out.push_str(&format!(
            "{} vs {}: t = {:.4}, df = {:.2}, p = {:.6}{marker}\n",
            p.variant.id(),
            p.baseline.id(),
            p.test.t,
            p.test.df,
            p.test.p
        ));
    }
    out
}
