use std::io::Write;

use crate::control::Phase;
use crate::geometry::Point;
use crate::gp::Hyperparams;

use super::audit::AuditLog;

/// State at the start of a round plus what happened during it.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    /// Ground-truth cost of the positions the round started from.
    pub true_cost: f64,
    /// Posterior-mean RMSE against the true field, averaged over agents,
    /// after the round's model updates.
    pub rmse: f64,
    pub messages: usize,
    pub positions: Vec<Point>,
    pub inducing_counts: Vec<usize>,
    pub buffer_after_sampling: Vec<usize>,
    pub buffer_after_round: Vec<usize>,
    pub sigma: Vec<f64>,
    pub phases: Vec<Phase>,
    /// Wall time spent in inducing refreshes this round, in seconds.
    pub refresh_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub n_agents: usize,
    pub records: Vec<TraceRecord>,
    /// Positions after the last round.
    pub final_positions: Vec<Point>,
    /// Ground-truth cost of `final_positions`.
    pub final_cost: f64,
    pub final_hypers: Vec<Hyperparams>,
    pub audit: AuditLog,
    /// Rounds whose consensus update was skipped because `α ≥ 1/d_max`.
    pub consensus_skipped: usize,
}

impl SimTrace {
    /// Ground-truth cost after `round` rounds of motion.
    pub fn cost_after(&self, round: usize) -> Option<f64> {
        match round.cmp(&self.records.len()) {
            std::cmp::Ordering::Less => Some(self.records[round].true_cost),
            std::cmp::Ordering::Equal => Some(self.final_cost),
            std::cmp::Ordering::Greater => None,
        }
    }

    pub fn total_messages(&self) -> usize {
        self.records.iter().map(|r| r.messages).sum()
    }

    pub fn header(&self) -> Vec<String> {
        let mut cols: Vec<String> = ["step", "true_cost", "rmse", "messages"].iter().map(|s| s.to_string()).collect();
        for i in 0..self.n_agents {
            cols.push(format!("agent{i}_x"));
            cols.push(format!("agent{i}_y"));
        }
        cols
    }

    /// `step,true_cost,rmse,messages,agent0_x,agent0_y,...`, one row per round.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(self.header())?;
        for r in &self.records {
            let mut row = vec![r.step.to_string(), r.true_cost.to_string(), r.rmse.to_string(), r.messages.to_string()];
            for p in &r.positions {
                row.push(p.x.to_string());
                row.push(p.y.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}
