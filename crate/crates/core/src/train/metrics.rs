use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_ins: f64,
    pub loss_aug: f64,
    pub loss_cen: f64,
    pub loss_cc: f64,
    pub pseudo_clusters: usize,
    pub pseudo_noise: usize,
    /// `None` when single-camera training is off.
    pub purity: Option<f64>,
    pub lr: f64,
}

impl EpochMetrics {
    pub fn write_line<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

pub fn write_metrics<W: Write>(mut out: W, log: &[EpochMetrics]) -> Result<()> {
    for m in log {
        m.write_line(&mut out)?;
    }
    out.flush()?;
    Ok(())
}

/// Trailing moving average with window `w`; entry `i` averages `xs[i+1-w..=i]`
/// (fewer at the start).
pub fn moving_average(xs: &[f64], w: usize) -> Vec<f64> {
    let w = w.max(1);
    (0..xs.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(w);
            xs[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}
