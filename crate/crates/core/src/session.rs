//! End-to-end synthesis session: batch initialisation by fixpoint evaluation,
//! then warm-started lifting after every batch of new samples.
//!
//! The measure kept here uses the ownership-swapped fair Büchi rules on the
//! primal game, so its `⊤`-set is Player 0's winning region.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{
    apply_delta, build_abstract_game, diff_pair, AbstractGame, AbstractGameDump, AbstractionError, ApproxTable,
    DeltaEffect, GraphDelta,
};
use crate::fixpoint::{solve_psi, synth_controller, FixpointError, Policy};
use crate::game::VertexId;
use crate::grid::{CellId, GridPartition};
use crate::learning::{Dataset, DomainPolicy, InputId, LearnError, LearnerConfig, ReachLearner, Sample};
use crate::pm::{pm_range, solve_by_lifting, PmDump, PmError, PmFlavor, ProgressMeasure, RangeHint, Rank, WorklistOrder};
use crate::set::VertexSet;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
    #[error(transparent)]
    Fixpoint(#[from] FixpointError),
    #[error(transparent)]
    Pm(#[from] PmError),
    #[error("cell {0:?} is outside the winning region")]
    NotWinning(CellId),
    #[error("no controller has been emitted yet")]
    NoPolicy,
    #[error("checkpoint is inconsistent: {0}")]
    BadCheckpoint(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOptions {
    /// Cells made absorbing, typically obstacles.
    pub absorbing: Vec<CellId>,
    /// Start cells; a controller is emitted once one of them is winning.
    /// Empty means any winning cell will do.
    pub initial: Vec<CellId>,
    pub domain: DomainPolicy,
    /// Recompute only the cells whose sample extrema moved.
    pub influence_filter: bool,
    #[serde(skip)]
    pub order: WorklistOrder,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions {
            absorbing: Vec::new(),
            initial: Vec::new(),
            domain: DomainPolicy::Sink,
            influence_filter: false,
            order: WorklistOrder::Fifo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub win0_before: Vec<CellId>,
    pub win0_after: Vec<CellId>,
    pub deltas: Vec<GraphDelta>,
    pub lifts: u64,
    pub evaluations: u64,
    pub recomputed_pairs: usize,
    pub wall_time_s: f64,
    pub policy_emitted: bool,
}

impl StepReport {
    pub fn deltas_applied(&self) -> usize {
        self.deltas.len()
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisSession {
    cfg: LearnerConfig,
    grid: GridPartition,
    goals: Vec<CellId>,
    opts: SessionOptions,
    dataset: Dataset,
    learner: ReachLearner,
    tab: ApproxTable,
    abs: AbstractGame,
    rho: ProgressMeasure,
    win0: Vec<CellId>,
    policy: Option<Policy>,
    init_time: Duration,
}

fn winning_cells(abs: &AbstractGame, rho: &ProgressMeasure) -> Vec<CellId> {
    abs.cells().filter(|s| rho.get(abs.state_vertex(*s)).is_top()).collect()
}

impl SynthesisSession {
    /// Learns the full table, builds the game and solves it by fixpoint evaluation.
    pub fn initialise(
        dataset: Dataset,
        cfg: LearnerConfig,
        grid: GridPartition,
        goals: Vec<CellId>,
        opts: SessionOptions,
    ) -> Result<Self, SessionError> {
        let t0 = Instant::now();
        let learner = ReachLearner::from_dataset(cfg.clone(), &grid, &dataset)?;
        let tab = ApproxTable::learn(&learner, &grid, &opts.absorbing, opts.domain)?;
        let abs = build_abstract_game(&tab, &goals)?;
        let sol = solve_psi(&abs.game, &abs.spec)?;
        let range = pm_range(&abs.game, &abs.spec, RangeHint::AbstractDual { states: abs.states() });
        let rho = sol.rho(&abs.game, range)?;
        let win0 = winning_cells(&abs, &rho);
        let mut s = SynthesisSession {
            cfg,
            grid,
            goals,
            opts,
            dataset,
            learner,
            tab,
            abs,
            rho,
            win0,
            policy: None,
            init_time: Duration::ZERO,
        };
        s.refresh_policy()?;
        s.init_time = t0.elapsed();
        Ok(s)
    }

    fn wants_policy(&self) -> bool {
        let ok = |s: &CellId| self.win0.binary_search(s).is_ok() && !self.tab.is_absorbing(*s);
        if self.opts.initial.is_empty() {
            self.win0.iter().any(ok)
        } else {
            self.opts.initial.iter().any(ok)
        }
    }

    fn refresh_policy(&mut self) -> Result<bool, SessionError> {
        if !self.wants_policy() {
            return Ok(false);
        }
        let top = self.rho.top_set(&self.abs.game);
        self.policy = Some(synth_controller(&self.abs, &top)?);
        Ok(true)
    }

    /// Absorbs a batch of samples and brings the measure back to the least fixpoint.
    ///
    /// On error the session is left as it was before the call.
    pub fn step(&mut self, samples: &[Sample]) -> Result<StepReport, SessionError> {
        let t0 = Instant::now();
        let win0_before = self.win0.clone();
        for s in samples {
            self.dataset.check(s)?;
        }
        let mut learner = self.learner.clone();
        let mut dirty: BTreeSet<(InputId, CellId)> = BTreeSet::new();
        let mut inputs: BTreeSet<InputId> = BTreeSet::new();
        for s in samples {
            let moved = learner.absorb(s);
            inputs.insert(s.u);
            if self.opts.influence_filter {
                dirty.extend(moved.into_iter().map(|c| (s.u, c)));
            }
        }
        if !self.opts.influence_filter {
            for u in &inputs {
                dirty.extend(self.grid.cells().map(|c| (*u, c)));
            }
        }
        let mut tab = self.tab.clone();
        let mut deltas = Vec::new();
        let mut recomputed = 0;
        for (u, s) in &dirty {
            if tab.is_absorbing(*s) {
                continue;
            }
            recomputed += 1;
            let fresh = tab.learned_entry(&learner, &self.grid, *s, *u, self.opts.domain);
            let old = tab.get(*s, *u).expect("non-absorbing pair has an entry");
            if *old != fresh {
                diff_pair(*s, *u, old, &fresh, &mut deltas)?;
                tab.set(*s, *u, fresh)?;
            }
        }
        deltas.sort_by_key(|d| d.pair());
        let mut abs = self.abs.clone();
        let mut effect = DeltaEffect::default();
        for d in &deltas {
            effect.merge(apply_delta(&mut abs, d)?);
        }
        let mut rho = self.rho.clone();
        for v in &effect.lowered {
            rho.set(*v, Rank::ZERO);
        }
        let seed: Vec<VertexId> = effect.touched.iter().chain(&effect.lowered).copied().collect();
        let out = solve_by_lifting(&abs.game, &abs.spec, PmFlavor::FairBuchiDirect, rho, seed, self.opts.order)?;
        for s in samples {
            self.dataset.push(s.clone())?;
        }
        self.learner = learner;
        self.tab = tab;
        self.abs = abs;
        self.rho = out.rho;
        self.win0 = winning_cells(&self.abs, &self.rho);
        let policy_emitted = if deltas.is_empty() && self.policy.is_some() { true } else { self.refresh_policy()? };
        Ok(StepReport {
            win0_before,
            win0_after: self.win0.clone(),
            deltas,
            lifts: out.lifts,
            evaluations: out.evaluations,
            recomputed_pairs: recomputed,
            wall_time_s: t0.elapsed().as_secs_f64(),
            policy_emitted,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &GridPartition {
        &self.grid
    }

    pub fn goals(&self) -> &[CellId] {
        &self.goals
    }

    pub fn options(&self) -> &SessionOptions {
        &self.opts
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn table(&self) -> &ApproxTable {
        &self.tab
    }

    pub fn game(&self) -> &AbstractGame {
        &self.abs
    }

    /// Raw measure; `⊤` marks Player 0's region.
    pub fn rho(&self) -> &ProgressMeasure {
        &self.rho
    }

    /// Winning abstract states, ascending, possibly including absorbing goals.
    pub fn win0(&self) -> &[CellId] {
        &self.win0
    }

    /// Player 0's region over all game vertices.
    pub fn win0_vertices(&self) -> VertexSet {
        self.rho.top_set(&self.abs.game)
    }

    pub fn policy(&self) -> Option<&Policy> {
        self.policy.as_ref()
    }

    pub fn init_time(&self) -> Duration {
        self.init_time
    }

    /// Input prescribed at concrete state `x`.
    pub fn controller_lookup(&self, x: &[f64]) -> Result<InputId, SessionError> {
        let s = self.grid.translate(x);
        let policy = self.policy.as_ref().ok_or(SessionError::NoPolicy)?;
        policy.get(s).map_err(|_| SessionError::NotWinning(s))
    }

    pub fn checkpoint(&self) -> SessionCheckpoint {
        SessionCheckpoint {
            config: self.cfg.clone(),
            grid: self.grid.clone(),
            goals: self.goals.clone(),
            options: self.opts.clone(),
            dataset: self.dataset.clone(),
            table: self.tab.clone(),
            game: self.abs.to_dump(),
            pm: PmDump::new(&self.rho, &self.abs.game, PmFlavor::FairBuchiDirect),
            win0: self.win0.clone(),
            policy: self.policy.clone(),
        }
    }

    /// Resumes from a checkpoint; the learner is rebuilt from the dataset.
    pub fn restore(cp: SessionCheckpoint) -> Result<Self, SessionError> {
        let mut dataset = cp.dataset;
        dataset.reindex();
        let learner = ReachLearner::from_dataset(cp.config.clone(), &cp.grid, &dataset)?;
        let abs = cp.game.to_game()?;
        let rho = cp.pm.to_measure(abs.game.capacity())?;
        let win0 = winning_cells(&abs, &rho);
        if win0 != cp.win0 {
            return Err(SessionError::BadCheckpoint("stored region disagrees with the measure".into()));
        }
        Ok(SynthesisSession {
            cfg: cp.config,
            grid: cp.grid,
            goals: cp.goals,
            opts: cp.options,
            dataset,
            learner,
            tab: cp.table,
            abs,
            rho,
            win0,
            policy: cp.policy,
            init_time: Duration::ZERO,
        })
    }
}

/// JSON-serializable session state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCheckpoint {
    pub config: LearnerConfig,
    pub grid: GridPartition,
    pub goals: Vec<CellId>,
    pub options: SessionOptions,
    pub dataset: Dataset,
    pub table: ApproxTable,
    pub game: AbstractGameDump,
    pub pm: PmDump,
    pub win0: Vec<CellId>,
    pub policy: Option<Policy>,
}
