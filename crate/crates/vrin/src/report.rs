//! Plain-text run reports: `key = value` sections followed by tables.

use std::fmt::Write as _;

use vrin_core::trainer::{CrossValidation, MetricSummary, RunReport};

use crate::config_file;

/// Renders a training or evaluation report. Wall time is only written when
/// `with_timing` is set, so that reruns compare byte for byte.
pub fn render_run(report: &RunReport, with_timing: bool) -> String {
    let mut out = String::from("[run]\n");
    let _ = writeln!(out, "seed = {}", report.seed);
    let _ = writeln!(out, "epochs_run = {}", report.epochs.len());
    let _ = writeln!(out, "early_stopped = {}", report.early_stopped);
    if let (true, Some(secs)) = (with_timing, report.wall_time_secs) {
        let _ = writeln!(out, "wall_time_secs = {secs:.3}");
    }
    out.push_str("\n[config]\n");
    out.push_str(&config_file::render(&report.config));
    if !report.epochs.is_empty() {
        out.push_str("\n[losses]\n");
        let _ = writeln!(
            out,
            "{:>6} {:>16} {:>16} {:>12} {:>12} {:>12}",
            "epoch", "l_total", "l_vae", "l_reg", "l_pred", "l_cons"
        );
        for (i, e) in report.epochs.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:>6} {:>16.6} {:>16.6} {:>12.6} {:>12.6} {:>12.6}",
                i + 1,
                e.l_total,
                e.l_vae,
                e.l_reg,
                e.l_pred,
                e.l_cons
            );
        }
    }
    if let Some(m) = &report.metrics {
        out.push_str("\n[metrics]\n");
        out.push_str(&metrics_table(&m.named()));
    }
    out
}

pub fn metrics_table(named: &[(&str, f64)]) -> String {
    let mut out = format!("{:<16} {:>12}\n", "metric", "value");
    for (name, v) in named {
        let _ = writeln!(out, "{name:<16} {v:>12.6}");
    }
    out
}

pub fn summary_table(summary: &[MetricSummary]) -> String {
    let mut out = format!("{:<16} {:>18}\n", "metric", "mean ± std");
    for s in summary {
        let _ = writeln!(out, "{:<16} {:>18}", s.name, s.formatted());
    }
    out
}

pub fn render_crossvalidation(cv: &CrossValidation) -> String {
    let mut out = String::from("[crossvalidation]\n");
    let _ = writeln!(out, "folds = {}", cv.folds.len());
    if let Some(first) = cv.folds.first() {
        let _ = writeln!(out, "seed = {}", first.seed);
        out.push_str("\n[config]\n");
        out.push_str(&config_file::render(&first.config));
    }
    for (i, fold) in cv.folds.iter().enumerate() {
        if let Some(m) = &fold.metrics {
            let _ = writeln!(out, "\n[fold {}]", i + 1);
            out.push_str(&metrics_table(&m.named()));
        }
    }
    out.push_str("\n[summary]\n");
    out.push_str(&summary_table(&cv.summary));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use vrin_core::metrics::ClassificationMetrics;
    use vrin_core::objectives::LossBreakdown;
    use vrin_core::trainer::{summarize, Metrics};
    use vrin_core::TrainConfig;

    fn report() -> RunReport {
        RunReport {
            seed: 7,
            config: TrainConfig::classification(4, 2),
            epochs: vec![LossBreakdown::default(); 2],
            early_stopped: false,
            metrics: Some(Metrics::Classification(ClassificationMetrics { auc: 0.9, auprc: 0.7 })),
            wall_time_secs: Some(1.25),
        }
    }

    #[test]
    fn timing_is_opt_in() {
        let r = report();
        assert!(!render_run(&r, false).contains("wall_time"));
        assert!(render_run(&r, true).contains("wall_time_secs = 1.250"));
    }

    #[test]
    fn sections_present() {
        let text = render_run(&report(), false);
        for s in ["[run]", "[config]", "[losses]", "[metrics]", "auprc"] {
            assert!(text.contains(s), "{s}");
        }
    }

    #[test]
    fn summary_uses_plus_minus() {
        let m = Metrics::Classification(ClassificationMetrics { auc: 0.8, auprc: 0.6 });
        let t = summary_table(&summarize(&[m, m]));
        assert!(t.contains("0.8000 ± 0.0000"), "{t}");
    }
}
