use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::{Scenario, Snr};

pub const CSV_HEADER: &str =
    "scenario,s,sigma,M,N,m,snr_db,mode,trial,seed,mse,success,detection_rate,iterations,wall_millis";

/// One Monte Carlo outcome; one CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scenario: Scenario,
    pub s: usize,
    pub sigma: usize,
    #[serde(rename = "M")]
    pub antennas: usize,
    #[serde(rename = "N")]
    pub blocks: usize,
    #[serde(rename = "m")]
    pub per_antenna: usize,
    pub snr_db: Snr,
    /// `uniform` or `mixed` block lengths.
    pub mode: String,
    pub trial: usize,
    pub seed: u64,
    pub mse: f64,
    pub success: bool,
    pub detection_rate: f64,
    pub iterations: usize,
    pub wall_millis: u64,
}

impl TrialRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{:e},{},{},{},{}",
            self.scenario.as_str(),
            self.s,
            self.sigma,
            self.antennas,
            self.blocks,
            self.per_antenna,
            self.snr_db,
            self.mode,
            self.trial,
            self.seed,
            self.mse,
            self.success,
            self.detection_rate,
            self.iterations,
            self.wall_millis
        )
    }
}

pub fn write_trials_csv(mut w: impl Write, records: &[TrialRecord]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}
