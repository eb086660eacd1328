use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::plan::{SamplingPlan, StopReason};
use crate::error::{Error, Result};
use crate::gp::{Dataset, MaternHyperparams};
use crate::space::SearchSpace;

/// One objective evaluation, in native coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub point: usize,
    pub repeat: usize,
    pub x: Vec<f64>,
    pub y: f64,
}

/// Record of one loop iteration. Iteration 0 is the seed design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Distinct locations proposed this iteration (native coordinates).
    pub proposed: Vec<Vec<f64>>,
    pub evaluations: Vec<Evaluation>,
    /// Log-parameter vector after this iteration's refit.
    pub theta: Vec<f64>,
    pub incumbent_x: Vec<f64>,
    pub incumbent_y: f64,
    pub evaluations_total: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Completed { reason: StopReason },
    Failed { message: String },
}

impl RunStatus {
    pub fn is_failed(&self) -> bool {
        matches!(self, RunStatus::Failed { .. })
    }
}

/// Run-level facts that are not per-iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub objective: String,
    pub space: SearchSpace,
    pub plan: SamplingPlan,
    pub seed: u64,
    pub ard: bool,
    pub param_names: Vec<String>,
    pub status: RunStatus,
    pub final_hyper: Option<MaternHyperparams>,
    /// Minimizer of the final posterior mean (native coordinates) and the
    /// mean there.
    pub model_minimizer: Option<(Vec<f64>, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub meta: RunMeta,
    pub records: Vec<IterationRecord>,
}

impl RunHistory {
    pub fn evaluations(&self) -> usize {
        self.records.last().map_or(0, |r| r.evaluations_total)
    }

    /// Loop iterations completed, not counting the seed design.
    pub fn iterations(&self) -> usize {
        self.records.iter().filter(|r| r.iteration > 0).count()
    }

    /// Best observed location and value.
    pub fn incumbent(&self) -> Option<(&[f64], f64)> {
        self.records.last().map(|r| (r.incumbent_x.as_slice(), r.incumbent_y))
    }

    /// All evaluations as a unit-coordinate dataset, one row per evaluation.
    pub fn dataset(&self) -> Result<Dataset> {
        let space = &self.meta.space;
        let mut d = Dataset::new(space.dims());
        for e in self.records.iter().flat_map(|r| &r.evaluations) {
            d.push(space.to_unit(&e.x)?, e.y)?;
        }
        Ok(d)
    }

    /// One JSON object per iteration.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(meta: RunMeta, r: R) -> Result<Self> {
        let mut records = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line)?);
        }
        Ok(RunHistory { meta, records })
    }

    /// Flat per-evaluation table: `iteration, eval_index, point, repeat,
    /// x.., y, y_best, θ..`. Wall-clock time is left out so that reruns
    /// produce identical bytes; it lives in the line-delimited records.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["iteration".to_string(), "eval_index".into(), "point".into(), "repeat".into()];
        header.extend(self.meta.space.names().iter().cloned());
        header.extend(["y".to_string(), "y_best".into()]);
        header.extend(self.meta.param_names.iter().cloned());
        out.write_record(&header)?;
        let mut idx = 0usize;
        let mut best = f64::INFINITY;
        for r in &self.records {
            for e in &r.evaluations {
                best = best.min(e.y);
                let mut row = vec![
                    r.iteration.to_string(),
                    idx.to_string(),
                    e.point.to_string(),
                    e.repeat.to_string(),
                ];
                row.extend(e.x.iter().map(|v| v.to_string()));
                row.push(e.y.to_string());
                row.push(best.to_string());
                row.extend(r.theta.iter().map(|v| v.to_string()));
                out.write_record(&row)?;
                idx += 1;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads back the evaluation rows of [`write_csv`](Self::write_csv) as
    /// `(x, y)` pairs in native coordinates.
    pub fn read_csv_rows<R: std::io::Read>(dims: usize, r: R) -> Result<Vec<(Vec<f64>, f64)>> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::arg(format!("history row missing column {i}")))?
                    .parse::<f64>()
                    .map_err(|e| Error::arg(format!("history column {i}: {e}")))
            };
            let x = (0..dims).map(|j| num(4 + j)).collect::<Result<Vec<_>>>()?;
            rows.push((x, num(4 + dims)?));
        }
        Ok(rows)
    }
}
