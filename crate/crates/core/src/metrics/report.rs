//! Plot-ready CSV output.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::log::MetricsLog;
use super::regret::RegretReport;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("writing {what}: {source}")]
    Csv { what: &'static str, source: csv::Error },
}

pub const ROUND_HEADER: [&str; 9] = [
    "round",
    "leader_id",
    "txs_screened",
    "txs_verified",
    "wasted_verifications",
    "blocks",
    "messages_pc",
    "messages_cg",
    "messages_gg",
];

fn epoch_header(max_slots: usize) -> Vec<String> {
    let mut header: Vec<String> = ["provider_id", "epoch_index", "T_i", "eta", "L_T", "S_T_min", "regret", "bound"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=max_slots).map(|k| format!("revenue_share_{k}")));
    header
}

/// Writes the per-round and per-epoch tables. Row order is deterministic:
/// rounds ascending; epochs by provider, then epoch index.
pub fn emit_csv<R: Write, E: Write>(
    log: &MetricsLog,
    reports: &[RegretReport],
    rounds_sink: R,
    epochs_sink: E,
) -> Result<(), ReportError> {
    let csv_err = |what| move |source| ReportError::Csv { what, source };

    let mut rounds = csv::Writer::from_writer(rounds_sink);
    rounds.write_record(ROUND_HEADER).map_err(csv_err("rounds"))?;
    for row in &log.rounds {
        rounds
            .write_record([
                row.round.to_string(),
                row.leader_id.map(|g| g.0.to_string()).unwrap_or_default(),
                row.txs_screened.to_string(),
                row.txs_verified.to_string(),
                row.wasted_verifications.to_string(),
                row.blocks.to_string(),
                row.messages_pc.to_string(),
                row.messages_cg.to_string(),
                row.messages_gg.to_string(),
            ])
            .map_err(csv_err("rounds"))?;
    }
    rounds.flush().map_err(|e| csv_err("rounds")(e.into()))?;

    let max_slots = log.slots.iter().copied().max().unwrap_or(0);
    let mut epochs = csv::Writer::from_writer(epochs_sink);
    epochs.write_record(epoch_header(max_slots)).map_err(csv_err("epochs"))?;
    for report in reports {
        for e in &report.epochs {
            let mut row = vec![
                report.provider.0.to_string(),
                e.epoch_index.to_string(),
                e.threshold.to_string(),
                e.eta.to_string(),
                e.loss.to_string(),
                e.s_min.to_string(),
                e.regret.to_string(),
                e.bound.to_string(),
            ];
            let shares = e.revenue_shares.as_deref().unwrap_or(&[]);
            row.extend((0..max_slots).map(|k| shares.get(k).map(f64::to_string).unwrap_or_default()));
            epochs.write_record(&row).map_err(csv_err("epochs"))?;
        }
    }
    epochs.flush().map_err(|e| csv_err("epochs")(e.into()))?;
    Ok(())
}

/// Creates `rounds.csv` and `epochs.csv` inside `dir`.
pub fn write_csv_files(dir: &Path, log: &MetricsLog, reports: &[RegretReport]) -> Result<(), ReportError> {
    let open = |name: &str| {
        let path = dir.join(name);
        File::create(&path).map_err(|source| ReportError::Io { path, source })
    };
    emit_csv(log, reports, open("rounds.csv")?, open("epochs.csv")?)
}
