//! Approximation tables, the abstract fair Büchi game, and its atomic patches.
//!
//! For every cell `s` and input `u` the game has a choice vertex `s^u` owned
//! by Player 1 and branch vertices `s^u_i`. The base branch `s^u_0` has fair
//! edges to every cell of `F_under(s,u)`; branch `s^u_i` adds the i-th cell of
//! `F_over \ F_under` in ascending cell order. Branches are keyed by that extra
//! cell, so removals do not renumber the survivors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Flavor, GameDump, GameError, GameGraph, Owner, Spec, VertexId};
use crate::grid::{CellId, GridError, GridPartition};
use crate::learning::{abstract_reach_sets, BoxStatus, DomainPolicy, InputId, ReachLearner};
use crate::set::VertexSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbstractionError {
    #[error("approximation sets for ({s:?}, {u:?}) shrank under or grew over")]
    MonotonicityViolation { s: CellId, u: InputId },
    #[error("missing approximation entry for ({s:?}, {u:?})")]
    MissingEntry { s: CellId, u: InputId },
    #[error("under-approximation is not contained in over-approximation at ({s:?}, {u:?})")]
    UnderNotInOver { s: CellId, u: InputId },
    #[error("cell {0:?} is not a state of the table")]
    UnknownCell(CellId),
    #[error("tables differ in shape")]
    ShapeMismatch,
    #[error("delta {0:?} does not apply")]
    InvalidDelta(GraphDelta),
    #[error("removing the branch would leave the choice vertex of ({s:?}, {u:?}) without successors")]
    DanglingBranch { s: CellId, u: InputId },
    #[error("goal cell {0:?} is the sink")]
    GoalIsSink(CellId),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// `F_under ⊆ F_over` for one (cell, input) pair, both sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSets {
    pub under: Vec<CellId>,
    pub over: Vec<CellId>,
}

impl PairSets {
    pub fn new(mut under: Vec<CellId>, mut over: Vec<CellId>) -> Option<Self> {
        under.sort();
        under.dedup();
        over.sort();
        over.dedup();
        under.iter().all(|c| over.binary_search(c).is_ok()).then_some(PairSets { under, over })
    }

    /// `F_over \ F_under` in its fixed (ascending) order.
    pub fn extras(&self) -> Vec<CellId> {
        self.over.iter().filter(|c| self.under.binary_search(c).is_err()).copied().collect()
    }

    /// `m = |F_over| − |F_under|`.
    pub fn branch_count(&self) -> usize {
        self.over.len() - self.under.len()
    }
}

/// Approximation sets for every (cell, input) pair. The sink cell and any
/// other absorbing cell carry no entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxTable {
    cells: usize,
    inputs: usize,
    absorbing: Vec<bool>,
    entries: Vec<Option<PairSets>>,
}

impl ApproxTable {
    /// Empty table over `cells` grid cells plus the sink.
    pub fn new(cells: usize, inputs: usize) -> Self {
        let mut absorbing = vec![false; cells + 1];
        absorbing[cells] = true;
        ApproxTable { cells, inputs, absorbing, entries: vec![None; (cells + 1) * inputs] }
    }

    /// Grid cells, excluding the sink.
    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Abstract states, including the sink.
    pub fn states(&self) -> usize {
        self.cells + 1
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn sink(&self) -> CellId {
        CellId(self.cells as u32)
    }

    #[inline]
    fn slot(&self, s: CellId, u: InputId) -> usize {
        s.index() * self.inputs + u.index()
    }

    pub fn is_absorbing(&self, s: CellId) -> bool {
        self.absorbing.get(s.index()).copied().unwrap_or(false)
    }

    pub fn set_absorbing(&mut self, s: CellId) -> Result<(), AbstractionError> {
        if s.index() > self.cells {
            return Err(AbstractionError::UnknownCell(s));
        }
        self.absorbing[s.index()] = true;
        for u in 0..self.inputs {
            let k = self.slot(s, InputId(u as u32));
            self.entries[k] = None;
        }
        Ok(())
    }

    pub fn set(&mut self, s: CellId, u: InputId, sets: PairSets) -> Result<(), AbstractionError> {
        if s.index() >= self.cells || u.index() >= self.inputs {
            return Err(AbstractionError::UnknownCell(s));
        }
        let bad = sets.over.iter().chain(&sets.under).any(|c| c.index() > self.cells)
            || sets.under.contains(&self.sink());
        if bad {
            return Err(AbstractionError::UnknownCell(s));
        }
        let k = self.slot(s, u);
        self.entries[k] = Some(sets);
        Ok(())
    }

    pub fn get(&self, s: CellId, u: InputId) -> Option<&PairSets> {
        self.entries.get(self.slot(s, u)).and_then(Option::as_ref)
    }

    /// Entry for a pair with no usable data: everything possible, nothing sure.
    pub fn unknown_entry(&self) -> PairSets {
        PairSets { under: Vec::new(), over: (0..=self.cells as u32).map(CellId).collect() }
    }

    /// Entries computed from a learner for every non-absorbing pair.
    pub fn learn(
        learner: &ReachLearner,
        grid: &GridPartition,
        absorbing: &[CellId],
        policy: DomainPolicy,
    ) -> Result<Self, AbstractionError> {
        let mut tab = ApproxTable::new(grid.cell_count(), learner.inputs());
        for s in absorbing {
            tab.set_absorbing(*s)?;
        }
        for s in grid.cells() {
            if tab.is_absorbing(s) {
                continue;
            }
            for u in 0..tab.inputs {
                let u = InputId(u as u32);
                let sets = tab.learned_entry(learner, grid, s, u, policy);
                tab.set(s, u, sets)?;
            }
        }
        Ok(tab)
    }

    /// The entry the learner currently implies for `(s, u)`.
    pub fn learned_entry(
        &self,
        learner: &ReachLearner,
        grid: &GridPartition,
        s: CellId,
        u: InputId,
        policy: DomainPolicy,
    ) -> PairSets {
        let boxes = learner.boxes(s, u);
        if boxes.status != BoxStatus::Ok {
            return self.unknown_entry();
        }
        match abstract_reach_sets(&boxes.under, &boxes.over, grid, policy) {
            Ok(r) => PairSets { under: r.under, over: r.over },
            Err(_) => PairSets { under: Vec::new(), over: vec![self.sink()] },
        }
    }

    /// Applies the table-level effect of a delta.
    pub fn apply(&mut self, d: &GraphDelta) -> Result<(), AbstractionError> {
        let (s, u) = d.pair();
        let k = self.slot(s, u);
        let Some(e) = self.entries.get_mut(k).and_then(Option::as_mut) else {
            return Err(AbstractionError::InvalidDelta(d.clone()));
        };
        match *d {
            GraphDelta::AddFairEdges { target, .. } => {
                let ok = e.over.binary_search(&target).is_ok() && e.under.binary_search(&target).is_err();
                if !ok || target.index() >= self.cells {
                    return Err(AbstractionError::InvalidDelta(d.clone()));
                }
                let pos = e.under.binary_search(&target).unwrap_err();
                e.under.insert(pos, target);
            }
            GraphDelta::RemoveBranch { index, target, .. } => {
                let extras = e.extras();
                if extras.iter().position(|c| *c == target) != Some(index.wrapping_sub(1)) {
                    return Err(AbstractionError::InvalidDelta(d.clone()));
                }
                let pos = e.over.binary_search(&target).expect("extra is in over");
                e.over.remove(pos);
            }
        }
        Ok(())
    }
}

/// Atomic refinement of one (cell, input) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphDelta {
    /// `target` joined `F_under(s, u)`.
    AddFairEdges { s: CellId, u: InputId, target: CellId },
    /// `target`, the `index`-th (1-based) element of `F_over \ F_under`, left `F_over(s, u)`.
    RemoveBranch { s: CellId, u: InputId, index: usize, target: CellId },
}

impl GraphDelta {
    pub fn pair(&self) -> (CellId, InputId) {
        match *self {
            GraphDelta::AddFairEdges { s, u, .. } | GraphDelta::RemoveBranch { s, u, .. } => (s, u),
        }
    }
}

/// Deltas for one pair; additions first, then removals indexed against the
/// table as updated by everything emitted before them.
pub fn diff_pair(
    s: CellId,
    u: InputId,
    old: &PairSets,
    new: &PairSets,
    out: &mut Vec<GraphDelta>,
) -> Result<(), AbstractionError> {
    let monotone = old.under.iter().all(|c| new.under.binary_search(c).is_ok())
        && new.over.iter().all(|c| old.over.binary_search(c).is_ok());
    if !monotone {
        return Err(AbstractionError::MonotonicityViolation { s, u });
    }
    let added: Vec<CellId> =
        new.under.iter().filter(|c| old.under.binary_search(c).is_err()).copied().collect();
    for t in &added {
        out.push(GraphDelta::AddFairEdges { s, u, target: *t });
    }
    let mut extras: Vec<CellId> =
        old.extras().into_iter().filter(|c| added.binary_search(c).is_err()).collect();
    for t in old.over.iter().filter(|c| new.over.binary_search(c).is_err()) {
        let j = extras.iter().position(|c| c == t).expect("removed cell was an extra");
        extras.remove(j);
        out.push(GraphDelta::RemoveBranch { s, u, index: j + 1, target: *t });
    }
    Ok(())
}

/// All deltas turning `old` into `new`, pair by pair.
pub fn diff_approx(old: &ApproxTable, new: &ApproxTable) -> Result<Vec<GraphDelta>, AbstractionError> {
    if old.cells != new.cells || old.inputs != new.inputs || old.absorbing != new.absorbing {
        return Err(AbstractionError::ShapeMismatch);
    }
    let mut out = Vec::new();
    for s in 0..old.cells {
        let s = CellId(s as u32);
        for u in 0..old.inputs {
            let u = InputId(u as u32);
            match (old.get(s, u), new.get(s, u)) {
                (Some(a), Some(b)) => diff_pair(s, u, a, b, &mut out)?,
                (None, None) => {}
                _ => return Err(AbstractionError::MissingEntry { s, u }),
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VertexRole {
    State(CellId),
    Choice(CellId, InputId),
    /// Branch of `(s, u)`; `None` is the base branch, `Some(t)` adds extra cell `t`.
    Branch(CellId, InputId, Option<CellId>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairNodes {
    pub choice: VertexId,
    pub base: VertexId,
    pub branches: BTreeMap<CellId, VertexId>,
    /// Current `F_under`, kept to index removals.
    pub under: Vec<CellId>,
    /// The base branch points at the sink because `F_under` is empty.
    pub sink_placeholder: bool,
}

impl PairNodes {
    pub fn branch_vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        std::iter::once(self.base).chain(self.branches.values().copied())
    }

    /// Branch keys not (yet) promoted into `F_under`, ascending.
    pub fn live_extras(&self) -> Vec<CellId> {
        self.branches.keys().filter(|c| self.under.binary_search(c).is_err()).copied().collect()
    }
}

/// Abstract fair Büchi game with its vertex layout.
#[derive(Debug, Clone)]
pub struct AbstractGame {
    pub game: GameGraph,
    pub spec: Spec,
    states: usize,
    inputs: usize,
    absorbing: Vec<bool>,
    pairs: Vec<Option<PairNodes>>,
    roles: Vec<VertexRole>,
}

impl AbstractGame {
    /// Abstract states including the sink.
    pub fn states(&self) -> usize {
        self.states
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn sink(&self) -> CellId {
        CellId(self.states as u32 - 1)
    }

    pub fn cells(&self) -> impl Iterator<Item = CellId> {
        (0..self.states as u32).map(CellId)
    }

    #[inline]
    pub fn state_vertex(&self, s: CellId) -> VertexId {
        VertexId(s.0)
    }

    pub fn is_absorbing(&self, s: CellId) -> bool {
        self.absorbing[s.index()]
    }

    pub fn pair(&self, s: CellId, u: InputId) -> Option<&PairNodes> {
        self.pairs.get(s.index() * self.inputs + u.index()).and_then(Option::as_ref)
    }

    fn pair_mut(&mut self, s: CellId, u: InputId) -> Option<&mut PairNodes> {
        let k = s.index() * self.inputs + u.index();
        self.pairs.get_mut(k).and_then(Option::as_mut)
    }

    pub fn choice_vertex(&self, s: CellId, u: InputId) -> Option<VertexId> {
        self.pair(s, u).map(|p| p.choice)
    }

    pub fn role(&self, v: VertexId) -> VertexRole {
        self.roles[v.index()]
    }

    pub fn roles(&self) -> &[VertexRole] {
        &self.roles
    }

    /// Vertices by role, live ones only.
    pub fn role_index(&self) -> BTreeMap<VertexRole, VertexId> {
        self.game.vertices().map(|v| (self.roles[v.index()], v)).collect()
    }

    /// Cells whose state vertex lies in `set`.
    pub fn cells_in(&self, set: &VertexSet) -> Vec<CellId> {
        self.cells().filter(|s| set.contains(self.state_vertex(*s))).collect()
    }

    pub fn to_dump(&self) -> AbstractGameDump {
        AbstractGameDump {
            game: GameDump::from_game(&self.game, &self.spec),
            states: self.states,
            inputs: self.inputs,
            absorbing: self.absorbing.clone(),
            pairs: self.pairs.clone(),
            roles: self.roles.clone(),
        }
    }
}

/// Serializable form of an [`AbstractGame`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractGameDump {
    pub game: GameDump,
    pub states: usize,
    pub inputs: usize,
    pub absorbing: Vec<bool>,
    pub pairs: Vec<Option<PairNodes>>,
    pub roles: Vec<VertexRole>,
}

impl AbstractGameDump {
    pub fn to_game(&self) -> Result<AbstractGame, AbstractionError> {
        let (game, spec) = self.game.to_game()?;
        if self.roles.len() != game.capacity() || self.pairs.len() != self.states * self.inputs {
            return Err(AbstractionError::ShapeMismatch);
        }
        Ok(AbstractGame {
            game,
            spec,
            states: self.states,
            inputs: self.inputs,
            absorbing: self.absorbing.clone(),
            pairs: self.pairs.clone(),
            roles: self.roles.clone(),
        })
    }
}

/// Builds the abstract fair Büchi game of a table with goal cells `goals`.
pub fn build_abstract_game(tab: &ApproxTable, goals: &[CellId]) -> Result<AbstractGame, AbstractionError> {
    let states = tab.states();
    let sink = tab.sink();
    let mut g = GameGraph::new(Flavor::Fair);
    let mut roles = Vec::new();
    for s in 0..states {
        g.add_vertex(Owner::P0);
        roles.push(VertexRole::State(CellId(s as u32)));
    }
    let mut pairs = vec![None; states * tab.inputs()];
    for s in (0..states as u32).map(CellId) {
        let sv = VertexId(s.0);
        if tab.is_absorbing(s) {
            g.add_edge(sv, sv)?;
            continue;
        }
        for u in (0..tab.inputs() as u32).map(InputId) {
            let e = tab.get(s, u).ok_or(AbstractionError::MissingEntry { s, u })?;
            let c = g.add_vertex(Owner::P1);
            roles.push(VertexRole::Choice(s, u));
            g.add_edge(sv, c)?;
            let base = g.add_vertex(Owner::P1);
            roles.push(VertexRole::Branch(s, u, None));
            g.add_edge(c, base)?;
            let placeholder = e.under.is_empty();
            if placeholder {
                g.add_fair_edge(base, VertexId(sink.0))?;
            }
            for t in &e.under {
                g.add_fair_edge(base, VertexId(t.0))?;
            }
            let mut branches = BTreeMap::new();
            for t in e.extras() {
                let b = g.add_vertex(Owner::P1);
                roles.push(VertexRole::Branch(s, u, Some(t)));
                g.add_edge(c, b)?;
                for w in &e.under {
                    g.add_fair_edge(b, VertexId(w.0))?;
                }
                g.add_fair_edge(b, VertexId(t.0))?;
                branches.insert(t, b);
            }
            pairs[s.index() * tab.inputs() + u.index()] = Some(PairNodes {
                choice: c,
                base,
                branches,
                under: e.under.clone(),
                sink_placeholder: placeholder,
            });
        }
    }
    let mut b = VertexSet::empty(g.capacity());
    for t in goals {
        if *t == sink {
            return Err(AbstractionError::GoalIsSink(*t));
        }
        if t.index() >= states {
            return Err(AbstractionError::UnknownCell(*t));
        }
        b.insert(VertexId(t.0));
    }
    Ok(AbstractGame {
        game: g,
        spec: Spec::buchi(b),
        states,
        inputs: tab.inputs(),
        absorbing: (0..states).map(|s| tab.is_absorbing(CellId(s as u32))).collect(),
        pairs,
        roles,
    })
}

/// Vertices affected by a patch.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeltaEffect {
    /// Vertices whose successors changed, plus their predecessors.
    pub touched: Vec<VertexId>,
    /// Branches that gained fair edges; their rule value may drop.
    pub lowered: Vec<VertexId>,
    /// Retired vertices.
    pub removed: Vec<VertexId>,
}

impl DeltaEffect {
    pub fn merge(&mut self, other: DeltaEffect) {
        self.touched.extend(other.touched);
        self.lowered.extend(other.lowered);
        self.removed.extend(other.removed);
    }
}

fn with_preds(g: &GameGraph, changed: &[VertexId]) -> Vec<VertexId> {
    let mut out: Vec<VertexId> = changed.to_vec();
    for v in changed {
        out.extend_from_slice(g.pred(*v));
    }
    out.sort();
    out.dedup();
    out
}

/// Patches the game in place.
pub fn apply_delta(abs: &mut AbstractGame, d: &GraphDelta) -> Result<DeltaEffect, AbstractionError> {
    let invalid = || AbstractionError::InvalidDelta(d.clone());
    let sink = VertexId(abs.sink().0);
    let (s, u) = d.pair();
    let pair = abs.pair(s, u).ok_or_else(invalid)?.clone();
    match *d {
        GraphDelta::AddFairEdges { target, .. } => {
            let promotable = pair.branches.contains_key(&target) && pair.under.binary_search(&target).is_err();
            if !promotable || VertexId(target.0) == sink {
                return Err(invalid());
            }
            let tv = VertexId(target.0);
            let mut changed = Vec::new();
            for b in pair.branch_vertices() {
                if abs.game.add_fair_edge(b, tv)? {
                    changed.push(b);
                }
            }
            let lowered = changed.clone();
            if pair.sink_placeholder && abs.game.remove_edge(pair.base, sink)? && !changed.contains(&pair.base) {
                changed.push(pair.base);
            }
            let p = abs.pair_mut(s, u).expect("pair exists");
            let pos = p.under.binary_search(&target).unwrap_err();
            p.under.insert(pos, target);
            p.sink_placeholder = false;
            Ok(DeltaEffect { touched: with_preds(&abs.game, &changed), lowered, removed: Vec::new() })
        }
        GraphDelta::RemoveBranch { index, target, .. } => {
            let extras = pair.live_extras();
            if extras.iter().position(|c| *c == target) != Some(index.wrapping_sub(1)) {
                return Err(invalid());
            }
            let b = pair.branches[&target];
            if abs.game.succ(pair.choice).len() <= 1 {
                return Err(AbstractionError::DanglingBranch { s, u });
            }
            abs.game.retire_vertex(b)?;
            abs.pair_mut(s, u).expect("pair exists").branches.remove(&target);
            Ok(DeltaEffect {
                touched: with_preds(&abs.game, &[pair.choice]),
                lowered: Vec::new(),
                removed: vec![b],
            })
        }
    }
}
