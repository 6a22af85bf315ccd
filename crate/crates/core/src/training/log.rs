//! Per-iteration training records.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "epoch,step,loss_d,loss_g,loss_pixel,loss_feat,lr,seconds";

#[derive(Clone, Debug, PartialEq)]
pub struct TrainRecord {
    pub epoch: usize,
    pub step: u64,
    pub loss_d: f64,
    pub loss_g: f64,
    pub loss_pixel: f64,
    pub loss_feat: f64,
    pub lr: f64,
    /// Wall time since the run started; always 0 in deterministic mode.
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
    /// First step at which the discriminator-collapse detector fired.
    pub collapse_step: Option<u64>,
}

impl TrainLog {
    pub fn push(&mut self, r: TrainRecord) {
        debug_assert!(self.records.last().is_none_or(|p| (p.epoch, p.step) < (r.epoch, r.step)));
        self.records.push(r);
    }

    pub fn last(&self) -> Option<&TrainRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.epoch, r.step, r.loss_d, r.loss_g, r.loss_pixel, r.loss_feat, r.lr, r.seconds
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(CSV_HEADER) {
            return Err(Error::Format(format!("training log must start with `{CSV_HEADER}`")));
        }
        let mut log = TrainLog::default();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Format(format!("training log line {}: {line:?}", n + 2));
            if f.len() != 8 {
                return Err(bad());
            }
            let num = |i: usize| f[i].trim().parse::<f64>().map_err(|_| bad());
            log.records.push(TrainRecord {
                epoch: f[0].trim().parse().map_err(|_| bad())?,
                step: f[1].trim().parse().map_err(|_| bad())?,
                loss_d: num(2)?,
                loss_g: num(3)?,
                loss_pixel: num(4)?,
                loss_feat: num(5)?,
                lr: num(6)?,
                seconds: num(7)?,
            });
        }
        Ok(log)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut log = TrainLog::default();
        for s in 0..3u64 {
            log.push(TrainRecord {
                epoch: 0,
                step: s,
                loss_d: 1.25,
                loss_g: 0.1 / (s + 1) as f64,
                loss_pixel: 3.0,
                loss_feat: 0.0,
                lr: 1e-4,
                seconds: 0.0,
            });
        }
        let csv = log.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        let back = TrainLog::from_csv(&csv).unwrap();
        assert_eq!(back.records, log.records);
        assert!(TrainLog::from_csv("a,b\n").is_err());
    }
}
