//! Stage-by-stage comparison of incremental lifting against recomputation.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::CellId;
use crate::session::{SessionError, SynthesisSession};
use crate::sim::{Scenario, SimError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("stage {stage}: incremental region {incremental:?} differs from recomputed {fresh:?}")]
    RegionMismatch { stage: String, incremental: Vec<CellId>, fresh: Vec<CellId> },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl From<crate::grid::GridError> for BenchError {
    fn from(e: crate::grid::GridError) -> Self {
        BenchError::Sim(SimError::Grid(e))
    }
}

/// One batch of samples: `per_pair` draws for every input of every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub cells: Vec<CellId>,
    pub per_pair: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub stage: String,
    pub states: usize,
    pub vertices: usize,
    pub deltas: usize,
    pub lifts: u64,
    pub incremental_s: f64,
    pub recompute_s: f64,
    pub regions_equal: bool,
    pub win0: usize,
}

/// One stage per low-data region, each delivering `stage_budget` samples per pair.
pub fn room_stages(scn: &Scenario) -> Result<Vec<Stage>, BenchError> {
    Ok(scn
        .low_data_cells()?
        .into_iter()
        .enumerate()
        .map(|(i, cells)| Stage { name: format!("room{}", i + 1), cells, per_pair: scn.stage_budget })
        .collect())
}

/// `rounds` stages that all revisit the first low-data region.
pub fn repeated_stages(scn: &Scenario, rounds: usize) -> Result<Vec<Stage>, BenchError> {
    let cells = scn.low_data_cells()?.into_iter().next().unwrap_or_default();
    Ok((0..rounds)
        .map(|i| Stage { name: format!("batch{}", i + 1), cells: cells.clone(), per_pair: scn.stage_budget })
        .collect())
}

/// Initialises on the scenario's dataset, then for each stage times a
/// session step against a fresh initialisation on the cumulative data.
pub fn bench_protocol(scn: &Scenario, stages: &[Stage]) -> Result<(SynthesisSession, Vec<BenchRow>), BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(scn.seed);
    let data = scn.generate_dataset(&mut rng)?;
    let cfg = scn.learner_config().map_err(SimError::from)?;
    let grid = scn.grid()?;
    let goals = scn.goal_cells()?;
    let opts = scn.session_options()?;
    let mut session = SynthesisSession::initialise(data, cfg.clone(), grid.clone(), goals.clone(), opts.clone())?;
    let mut rows = Vec::with_capacity(stages.len());
    for st in stages {
        let batch = scn.samples_for(&st.cells, st.per_pair, &mut rng)?;
        let t0 = Instant::now();
        let report = session.step(&batch)?;
        let incremental_s = t0.elapsed().as_secs_f64();
        let cumulative = session.dataset().clone();
        let t1 = Instant::now();
        let fresh = SynthesisSession::initialise(cumulative, cfg.clone(), grid.clone(), goals.clone(), opts.clone())?;
        let recompute_s = t1.elapsed().as_secs_f64();
        let regions_equal = fresh.win0() == session.win0();
        if !regions_equal {
            return Err(BenchError::RegionMismatch {
                stage: st.name.clone(),
                incremental: session.win0().to_vec(),
                fresh: fresh.win0().to_vec(),
            });
        }
        rows.push(BenchRow {
            stage: st.name.clone(),
            states: session.game().states(),
            vertices: session.game().game.vertex_count(),
            deltas: report.deltas.len(),
            lifts: report.lifts,
            incremental_s,
            recompute_s,
            regions_equal,
            win0: session.win0().len(),
        });
    }
    Ok((session, rows))
}

/// Writes `stage,states,deltas,lifts,incremental_s,recompute_s,regions_equal`.
pub fn write_rows<W: Write>(rows: &[BenchRow], w: W) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["stage", "states", "deltas", "lifts", "incremental_s", "recompute_s", "regions_equal"])?;
    for r in rows {
        out.write_record([
            r.stage.clone(),
            r.states.to_string(),
            r.deltas.to_string(),
            r.lifts.to_string(),
            format!("{:.6}", r.incremental_s),
            format!("{:.6}", r.recompute_s),
            r.regions_equal.to_string(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::tiny;

    #[test]
    fn tiny_scenario_runs_quickly() {
        let t0 = Instant::now();
        let scn = tiny();
        let stages = vec![Stage { name: "again".into(), cells: vec![CellId(0)], per_pair: 3 }];
        let (s, rows) = bench_protocol(&scn, &stages).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].regions_equal);
        assert_eq!(s.win0().len(), 4);
        let mut buf = Vec::new();
        write_rows(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("stage,states,deltas,lifts,incremental_s,recompute_s,regions_equal\n"));
        assert!(t0.elapsed().as_secs_f64() < 1.0);
    }

    #[test]
    fn no_low_data_means_no_stages() {
        assert!(room_stages(&tiny()).unwrap().is_empty());
    }
}
