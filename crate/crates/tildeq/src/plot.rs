//! Forecast-vs-truth plots for a finished run: a CSV and an SVG per
//! sampled test item, under `<run>/plots/`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::checkpoint;
use crate::config::{ExperimentConfig, Settings};
use crate::error::{io_err, Error, Result};
use crate::runner::{checkpoint_path, forecast, DataSource, RepeatSeeds, ResultRecord};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 40.0;

/// `count` test indices spread evenly over `len` items.
pub fn sample_indices(len: usize, count: usize) -> Vec<usize> {
    let count = count.min(len);
    (0..count).map(|i| i * len / count).collect()
}

/// Writes plots for `samples` test items of one repeat of the run stored
/// in `run_dir`. Returns the written paths.
pub fn emit_plots(run_dir: &Path, samples: usize, repeat: usize) -> Result<Vec<PathBuf>> {
    if samples == 0 {
        return Ok(Vec::new());
    }
    let record = ResultRecord::read(run_dir)?;
    let result = record
        .repeats
        .get(repeat)
        .ok_or_else(|| Error::Config(format!("run has no repeat {repeat}")))?;
    let ckpt = checkpoint_path(run_dir, repeat);
    if result.checkpoint.is_none() || !ckpt.exists() {
        return Err(Error::Config(format!("no trained checkpoint at {}", ckpt.display())));
    }
    let model = checkpoint::load(&ckpt)?;
    let cfg = ExperimentConfig::from_settings(Settings::from_map(&record.config)?)?;
    let dataset = DataSource::new(&cfg.dataset)?.for_seed(RepeatSeeds::derive(result.seed).data)?;
    let test = dataset.test();
    let picked: Vec<_> = sample_indices(test.len(), samples).into_iter().map(|i| (i, test[i].clone())).collect();
    let items: Vec<_> = picked.iter().map(|(_, it)| it.clone()).collect();
    let preds = forecast(&model, &items)?;

    let dir = run_dir.join("plots");
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut written = Vec::new();
    for ((index, item), pred) in picked.iter().zip(&preds) {
        let stem = format!("repeat{repeat:02}_test{index:05}");
        let csv_path = dir.join(format!("{stem}.csv"));
        fs::write(&csv_path, series_csv(&item.target, pred)).map_err(io_err(&csv_path))?;
        let svg_path = dir.join(format!("{stem}.svg"));
        let title = format!("{} · {} · test item {index}", record.name, record.loss);
        fs::write(&svg_path, line_chart(&title, &item.target, pred)).map_err(io_err(&svg_path))?;
        written.push(csv_path);
        written.push(svg_path);
    }
    Ok(written)
}

pub fn series_csv(truth: &[f64], pred: &[f64]) -> String {
    let mut out = String::from("t,truth,prediction\n");
    for (t, (y, p)) in truth.iter().zip(pred).enumerate() {
        let _ = writeln!(out, "{t},{y},{p}");
    }
    out
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Two-line SVG chart: truth in black, prediction in red.
pub fn line_chart(title: &str, truth: &[f64], pred: &[f64]) -> String {
    let all = truth.iter().chain(pred);
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let steps = truth.len().max(2) - 1;
    let x = |t: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * t as f64 / steps as f64;
    let y = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / (hi - lo);
    let path = |values: &[f64]| {
        let mut d = String::new();
        for (t, &v) in values.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if t == 0 { "M" } else { "L" }, x(t), y(v));
        }
        d.trim_end().to_string()
    };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"  <rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"  <text x="{MARGIN}" y="24" font-family="sans-serif" font-size="14">{}</text>"#, escape(title));
    let (x0, x1, yb) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(svg, r##"  <line x1="{x0}" y1="{yb}" x2="{x1}" y2="{yb}" stroke="#999"/>"##);
    let _ = writeln!(svg, r##"  <line x1="{x0}" y1="{MARGIN}" x2="{x0}" y2="{yb}" stroke="#999"/>"##);
    let _ = writeln!(svg, r#"  <text x="4" y="{:.2}" font-family="sans-serif" font-size="10">{hi:.3}</text>"#, y(hi) + 4.0);
    let _ = writeln!(svg, r#"  <text x="4" y="{:.2}" font-family="sans-serif" font-size="10">{lo:.3}</text>"#, y(lo) + 4.0);
    let _ = writeln!(
        svg,
        r#"  <path id="truth" d="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
        path(truth)
    );
    let _ = writeln!(
        svg,
        r#"  <path id="prediction" d="{}" fill="none" stroke="crimson" stroke-width="1.5"/>"#,
        path(pred)
    );
    let _ = writeln!(svg, "</svg>");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_are_spread_and_clamped() {
        assert_eq!(sample_indices(10, 3), vec![0, 3, 6]);
        assert_eq!(sample_indices(2, 5), vec![0, 1]);
        assert!(sample_indices(10, 0).is_empty());
    }

    #[test]
    fn chart_has_one_path_per_series() {
        let svg = line_chart("a < b", &[0.0, 1.0, 0.5], &[0.2, 0.8, 0.4]);
        assert_eq!(svg.matches("<path").count(), 2);
        assert!(svg.contains("a &lt; b"));
        let flat = line_chart("flat", &[1.0; 4], &[1.0; 4]);
        assert!(!flat.contains("NaN"));
    }

    #[test]
    fn csv_lists_each_step() {
        assert_eq!(series_csv(&[1.0, 2.0], &[1.5, 2.5]), "t,truth,prediction\n0,1,1.5\n1,2,2.5\n");
    }
}
