//! JSON metric reports and JSONL refinement traces.

use std::path::Path;

use bundle3d_core::metrics::MetricsReport;
use bundle3d_core::recon::RefineTrace;

use crate::error::Result;
use crate::fsutil;

pub fn report_json(report: &MetricsReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn write_report(report: &MetricsReport, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, report_json(report).as_bytes())
}

/// One JSON object per checkpoint, one per line.
pub fn trace_jsonl(trace: &RefineTrace) -> String {
    let mut s = String::new();
    for c in &trace.checkpoints {
        s.push_str(&serde_json::to_string(c).expect("checkpoint serializes"));
        s.push('\n');
    }
    s
}

pub fn write_trace(trace: &RefineTrace, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, trace_jsonl(trace).as_bytes())
}

/// One-line human summary.
pub fn summary_line(report: &MetricsReport) -> String {
    let opt = |v: &Option<bundle3d_core::metrics::ViewScores>, digits: usize| match v {
        Some(s) => format!("{:.*}", digits, s.mean),
        None => "n/a".into(),
    };
    format!(
        "cd={:.6} fs={:.4} psnr={} ssim={}",
        report.cd,
        report.fs,
        opt(&report.psnr, 2),
        opt(&report.ssim, 4)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use bundle3d_core::metrics::{MetricsConfig, CHAMFER_VARIANT};
    use bundle3d_core::recon::Checkpoint;

    #[test]
    fn report_fields() {
        let r = MetricsReport {
            cd: 0.0,
            fs: 1.0,
            psnr: None,
            ssim: None,
            config: MetricsConfig::default(),
            variant: CHAMFER_VARIANT.into(),
            generated: "a.glb".into(),
            ground_truth: "b.obj".into(),
        };
        let v: serde_json::Value = serde_json::from_str(&report_json(&r)).unwrap();
        assert_eq!(v["variant"], "sum-of-means-L2");
        assert_eq!(v["config"]["sample_count"], 16384);
        assert_eq!(summary_line(&r), "cd=0.000000 fs=1.0000 psnr=n/a ssim=n/a");
    }

    #[test]
    fn trace_is_one_object_per_line() {
        let t = RefineTrace {
            checkpoints: vec![
                Checkpoint { step: 0, mean_residual_deg: 30.0, silhouette_iou: vec![0.5; 4], vertex_count: 10 },
                Checkpoint { step: 10, mean_residual_deg: 10.0, silhouette_iou: vec![0.9; 4], vertex_count: 12 },
            ],
        };
        let text = trace_jsonl(&t);
        let lines: Vec<Checkpoint> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines, t.checkpoints);
    }
}
