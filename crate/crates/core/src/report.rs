//! Tables derived from a bundle on disk: losses, clearance and the speed
//! sequences before and after time reallocation.

use serde::{Deserialize, Serialize};

use crate::optimizer::LossTerms;
use crate::pipeline::{LoadedBundle, SpeedRow};

pub const LOSS_HEADER: &str = "stage,phase,col,len,acc,curv,total";
pub const CLEARANCE_HEADER: &str = "stage,min_before_m,mean_before_m,min_after_m,mean_after_m,d_safe_m";
pub const SPEED_HEADER: &str = "step,stage,speed_before_m,speed_after_m,speed_after_normalized";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    /// Stage name, or `total` for the sum over stages.
    pub stage: String,
    /// `before` or `after` optimization.
    pub phase: String,
    pub col: f64,
    pub len: f64,
    pub acc: f64,
    pub curv: f64,
    pub total: f64,
}

impl LossRow {
    fn new(stage: &str, phase: &str, t: &LossTerms) -> Self {
        LossRow {
            stage: stage.into(),
            phase: phase.into(),
            col: t.col,
            len: t.len,
            acc: t.acc,
            curv: t.curv,
            total: t.total,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClearanceRow {
    pub stage: String,
    pub min_before_m: f64,
    pub mean_before_m: f64,
    pub min_after_m: f64,
    pub mean_after_m: f64,
    pub d_safe_m: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub losses: Vec<LossRow>,
    pub clearance: Vec<ClearanceRow>,
    pub speeds: Vec<SpeedRow>,
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn from_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}

impl Report {
    pub fn from_bundle(b: &LoadedBundle) -> Self {
        let m = &b.metrics;
        let mut losses = Vec::new();
        for s in &m.losses.stages {
            losses.push(LossRow::new(s.stage.as_str(), "before", &s.before));
            losses.push(LossRow::new(s.stage.as_str(), "after", &s.after));
        }
        losses.push(LossRow::new("total", "before", &m.losses.before));
        losses.push(LossRow::new("total", "after", &m.losses.after));
        let clearance = m
            .clearance
            .iter()
            .map(|c| ClearanceRow {
                stage: c.stage.as_str().into(),
                min_before_m: c.before.min_m,
                mean_before_m: c.before.mean_m,
                min_after_m: c.after.min_m,
                mean_after_m: c.after.mean_m,
                d_safe_m: m.d_safe_m,
            })
            .collect();
        Report {
            losses,
            clearance,
            speeds: b.speeds.clone(),
        }
    }

    pub fn losses_csv(&self) -> Result<String, csv::Error> {
        to_csv(&self.losses)
    }

    pub fn clearance_csv(&self) -> Result<String, csv::Error> {
        to_csv(&self.clearance)
    }

    pub fn speeds_csv(&self) -> Result<String, csv::Error> {
        to_csv(&self.speeds)
    }

    pub fn from_csv(losses: &str, clearance: &str, speeds: &str) -> Result<Self, csv::Error> {
        Ok(Report {
            losses: from_csv(losses)?,
            clearance: from_csv(clearance)?,
            speeds: from_csv(speeds)?,
        })
    }

    /// Fixed-width tables for the terminal.
    pub fn to_text(&self) -> String {
        let mut out = String::from("losses (voxel units)\n");
        out += &format!(
            "{:<11} {:<6} {:>12} {:>12} {:>12} {:>12} {:>12}\n",
            "stage", "phase", "col", "len", "acc", "curv", "total"
        );
        for r in &self.losses {
            out += &format!(
                "{:<11} {:<6} {:>12.5} {:>12.5} {:>12.5} {:>12.5} {:>12.5}\n",
                r.stage, r.phase, r.col, r.len, r.acc, r.curv, r.total
            );
        }
        out += "\nclearance (m)\n";
        out += &format!(
            "{:<11} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
            "stage", "min_before", "mean_before", "min_after", "mean_after", "d_safe"
        );
        for r in &self.clearance {
            out += &format!(
                "{:<11} {:>10.5} {:>10.5} {:>10.5} {:>10.5} {:>10.5}\n",
                r.stage, r.min_before_m, r.mean_before_m, r.min_after_m, r.mean_after_m, r.d_safe_m
            );
        }
        out += "\nspeed per step (m)\n";
        out += &format!("{:>4} {:<11} {:>10} {:>10} {:>10}\n", "step", "stage", "before", "after", "after_norm");
        for r in &self.speeds {
            out += &format!(
                "{:>4} {:<11} {:>10.5} {:>10.5} {:>10.4}\n",
                r.step,
                r.stage.as_str(),
                r.speed_before_m,
                r.speed_after_m,
                r.speed_after_normalized
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{load_bundle, run};
    use crate::scenario;

    fn report() -> Report {
        let dir = tempfile::tempdir().unwrap();
        run(&scenario::sink()).unwrap().write(dir.path()).unwrap();
        Report::from_bundle(&load_bundle(dir.path()).unwrap())
    }

    #[test]
    fn headers_are_fixed() {
        let r = report();
        assert_eq!(r.losses_csv().unwrap().lines().next(), Some(LOSS_HEADER));
        assert_eq!(r.clearance_csv().unwrap().lines().next(), Some(CLEARANCE_HEADER));
        assert_eq!(r.speeds_csv().unwrap().lines().next(), Some(SPEED_HEADER));
        assert_eq!(r.losses.len(), 8);
        assert_eq!(r.clearance.len(), 3);
        assert_eq!(r.speeds.len(), 48);
    }

    #[test]
    fn csv_round_trip() {
        let r = report();
        let back = Report::from_csv(
            &r.losses_csv().unwrap(),
            &r.clearance_csv().unwrap(),
            &r.speeds_csv().unwrap(),
        )
        .unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn text_lists_every_stage() {
        let text = report().to_text();
        for s in ["approach", "manipulate", "back_idle", "total"] {
            assert!(text.contains(s));
        }
    }
}
