//! Explicit-set evaluation of the two nested fixpoints of fair Büchi games.
//!
//! ψ = μY. νX. (¬B ∪ Cpre¹(Y)) ∩ Cpre¹(X) ∩ (Lpre∀(X) ∪ Pre₁∃(Y) ∪ ¬V^f) is
//! Player 1's region, and Ψ = νY. μX. (B ∩ Cpre⁰(Y)) ∪ Cpre⁰(X) ∪
//! (Lpre∃(X) ∩ Pre₁∀(Y)) is Player 0's. The inner iteration restarts each
//! outer round (from V for ν, from ∅ for μ) and is evaluated synchronously;
//! after the first pass only predecessors of vertices that changed are
//! re-examined, which yields the same iterates as a full re-evaluation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::AbstractGame;
use crate::game::{Flavor, GameGraph, Owner, Spec, SpecKind, VertexId};
use crate::grid::CellId;
use crate::learning::InputId;
use crate::pm::{PmError, ProgressMeasure, Rank};
use crate::set::VertexSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FixpointError {
    #[error("fixpoint solver expects a fair (or normal) Büchi game, found {flavor:?}/{kind:?}")]
    NotFairBuchi { flavor: Flavor, kind: SpecKind },
    #[error("cell {0} is not in the winning region")]
    NotWinning(u32),
    #[error(transparent)]
    Pm(#[from] PmError),
}

fn check_game(g: &GameGraph, spec: &Spec) -> Result<(), FixpointError> {
    if spec.kind == SpecKind::Buchi && matches!(g.flavor(), Flavor::Fair | Flavor::Normal) {
        Ok(())
    } else {
        Err(FixpointError::NotFairBuchi { flavor: g.flavor(), kind: spec.kind })
    }
}

/// The controllable/uncontrollable predecessor operators over a fixed graph.
pub struct Transformers<'a> {
    g: &'a GameGraph,
}

impl<'a> Transformers<'a> {
    pub fn new(g: &'a GameGraph) -> Self {
        Transformers { g }
    }

    #[inline]
    fn all_in(succ: &[VertexId], h: &VertexSet) -> bool {
        succ.iter().all(|w| h.contains(*w))
    }

    #[inline]
    fn any_in(succ: &[VertexId], h: &VertexSet) -> bool {
        succ.iter().any(|w| h.contains(*w))
    }

    #[inline]
    fn is(&self, v: VertexId, o: Owner) -> bool {
        self.g.owner(v) == o
    }

    #[inline]
    pub fn pre1_forall_at(&self, v: VertexId, h: &VertexSet) -> bool {
        self.is(v, Owner::P1) && Self::all_in(self.g.succ(v), h)
    }

    #[inline]
    pub fn pre0_exists_at(&self, v: VertexId, h: &VertexSet) -> bool {
        self.is(v, Owner::P0) && Self::any_in(self.g.succ(v), h)
    }

    #[inline]
    pub fn pre0_forall_at(&self, v: VertexId, h: &VertexSet) -> bool {
        self.is(v, Owner::P0) && Self::all_in(self.g.succ(v), h)
    }

    #[inline]
    pub fn pre1_exists_at(&self, v: VertexId, h: &VertexSet) -> bool {
        self.is(v, Owner::P1) && Self::any_in(self.g.succ(v), h)
    }

    #[inline]
    pub fn cpre0_at(&self, v: VertexId, h: &VertexSet) -> bool {
        self.pre1_forall_at(v, h) || self.pre0_exists_at(v, h)
    }

    #[inline]
    pub fn cpre1_at(&self, v: VertexId, h: &VertexSet) -> bool {
        self.pre0_forall_at(v, h) || self.pre1_exists_at(v, h)
    }

    #[inline]
    pub fn lpre_exists_at(&self, v: VertexId, h: &VertexSet) -> bool {
        self.g.is_fair(v) && Self::any_in(self.g.fair_succ(v), h)
    }

    #[inline]
    pub fn lpre_forall_at(&self, v: VertexId, h: &VertexSet) -> bool {
        self.g.is_fair(v) && Self::all_in(self.g.fair_succ(v), h)
    }

    fn collect(&self, pred: impl Fn(VertexId) -> bool) -> VertexSet {
        VertexSet::from_ids(self.g.capacity(), self.g.vertices().filter(|v| pred(*v)))
    }

    pub fn pre1_forall(&self, h: &VertexSet) -> VertexSet {
        self.collect(|v| self.pre1_forall_at(v, h))
    }

    pub fn pre0_exists(&self, h: &VertexSet) -> VertexSet {
        self.collect(|v| self.pre0_exists_at(v, h))
    }

    pub fn pre0_forall(&self, h: &VertexSet) -> VertexSet {
        self.collect(|v| self.pre0_forall_at(v, h))
    }

    pub fn pre1_exists(&self, h: &VertexSet) -> VertexSet {
        self.collect(|v| self.pre1_exists_at(v, h))
    }

    pub fn cpre0(&self, h: &VertexSet) -> VertexSet {
        self.collect(|v| self.cpre0_at(v, h))
    }

    pub fn cpre1(&self, h: &VertexSet) -> VertexSet {
        self.collect(|v| self.cpre1_at(v, h))
    }

    pub fn lpre_exists(&self, h: &VertexSet) -> VertexSet {
        self.collect(|v| self.lpre_exists_at(v, h))
    }

    pub fn lpre_forall(&self, h: &VertexSet) -> VertexSet {
        self.collect(|v| self.lpre_forall_at(v, h))
    }
}

/// Outer iterates `Y⁰ = ∅ ⊆ Y¹ ⊆ …` of ψ, as sorted vertex lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixpointTrace {
    pub outer: Vec<Vec<u32>>,
}

#[derive(Debug, Clone)]
pub struct PsiSolution {
    /// `Y^∞`, Player 1's winning region.
    pub win1: VertexSet,
    /// `level[v] = i` iff `v ∈ Y^{i+1} \ Y^i`; `None` outside `Y^∞`.
    pub levels: Vec<Option<u32>>,
    /// Number of outer rounds that changed `Y`.
    pub rounds: u32,
}

impl PsiSolution {
    /// The iteration-rank measure: level inside `Y^∞`, `⊤` outside.
    pub fn rho(&self, g: &GameGraph, range: u32) -> Result<ProgressMeasure, PmError> {
        let mut values = vec![Rank::ZERO; g.capacity()];
        for v in g.vertices() {
            values[v.index()] = match self.levels[v.index()] {
                Some(l) => Rank::finite(l),
                None => Rank::TOP,
            };
        }
        ProgressMeasure::from_values(values, range)
    }

    pub fn trace(&self) -> FixpointTrace {
        let mut outer = vec![Vec::new()];
        for i in 0..self.rounds {
            let layer: Vec<u32> = self
                .levels
                .iter()
                .enumerate()
                .filter(|(_, l)| l.is_some_and(|l| l <= i))
                .map(|(v, _)| v as u32)
                .collect();
            outer.push(layer);
        }
        FixpointTrace { outer }
    }
}

/// Evaluates ψ; its complement is Player 0's region.
pub fn solve_psi(g: &GameGraph, spec: &Spec) -> Result<PsiSolution, FixpointError> {
    check_game(g, spec)?;
    let t = Transformers::new(g);
    let cap = g.capacity();
    let all = g.alive_set();
    let mut y = VertexSet::empty(cap);
    let mut levels = vec![None; cap];
    let mut rounds = 0u32;
    let mut mark = vec![false; cap];
    loop {
        let outer_ok: Vec<bool> = (0..cap)
            .map(|i| {
                let v = VertexId(i as u32);
                g.is_alive(v) && (!spec.contains(v) || t.cpre1_at(v, &y))
            })
            .collect();
        let escape: Vec<bool> = (0..cap)
            .map(|i| {
                let v = VertexId(i as u32);
                g.is_alive(v) && (!g.is_fair(v) || t.pre1_exists_at(v, &y))
            })
            .collect();
        let phi = |v: VertexId, x: &VertexSet| {
            outer_ok[v.index()]
                && t.cpre1_at(v, x)
                && (escape[v.index()] || t.lpre_forall_at(v, x))
        };
        let mut x = all.clone();
        let mut removed: Vec<VertexId> = g.vertices().filter(|v| !phi(*v, &x)).collect();
        while !removed.is_empty() {
            for r in &removed {
                x.remove(*r);
            }
            let mut cand = Vec::new();
            for r in &removed {
                for p in g.pred(*r) {
                    if x.contains(*p) && !mark[p.index()] {
                        mark[p.index()] = true;
                        cand.push(*p);
                    }
                }
            }
            for c in &cand {
                mark[c.index()] = false;
            }
            removed = cand.into_iter().filter(|v| !phi(*v, &x)).collect();
        }
        if x == y {
            break;
        }
        for v in x.iter() {
            if levels[v.index()].is_none() {
                levels[v.index()] = Some(rounds);
            }
        }
        debug_assert!(y.is_subset(&x));
        y = x;
        rounds += 1;
    }
    Ok(PsiSolution { win1: y, levels, rounds })
}

/// One inner μ-iteration of Ψ with `Y` held fixed, recording entry ranks.
fn inner_mu(g: &GameGraph, spec: &Spec, y: &VertexSet) -> (VertexSet, Vec<Option<u32>>) {
    let t = Transformers::new(g);
    let cap = g.capacity();
    let base: Vec<bool> = (0..cap)
        .map(|i| {
            let v = VertexId(i as u32);
            g.is_alive(v) && spec.contains(v) && t.cpre0_at(v, y)
        })
        .collect();
    let guard: Vec<bool> = (0..cap)
        .map(|i| {
            let v = VertexId(i as u32);
            g.is_alive(v) && t.pre1_forall_at(v, y)
        })
        .collect();
    let phi = |v: VertexId, x: &VertexSet| {
        base[v.index()] || t.cpre0_at(v, x) || (guard[v.index()] && t.lpre_exists_at(v, x))
    };
    let mut x = VertexSet::empty(cap);
    let mut rank = vec![None; cap];
    let mut mark = vec![false; cap];
    let mut added: Vec<VertexId> = g.vertices().filter(|v| phi(*v, &x)).collect();
    let mut k = 0u32;
    while !added.is_empty() {
        for a in &added {
            x.insert(*a);
            rank[a.index()] = Some(k);
        }
        let mut cand = Vec::new();
        for a in &added {
            for p in g.pred(*a) {
                if !x.contains(*p) && !mark[p.index()] {
                    mark[p.index()] = true;
                    cand.push(*p);
                }
            }
        }
        for c in &cand {
            mark[c.index()] = false;
        }
        added = cand.into_iter().filter(|v| phi(*v, &x)).collect();
        k += 1;
    }
    (x, rank)
}

/// Evaluates Ψ, Player 0's region.
pub fn solve_big_psi(g: &GameGraph, spec: &Spec) -> Result<VertexSet, FixpointError> {
    check_game(g, spec)?;
    let mut y = g.alive_set();
    loop {
        let (x, _) = inner_mu(g, spec, &y);
        if x == y {
            return Ok(y);
        }
        y = x;
    }
}

/// Entry ranks of the final μ-iteration of Ψ with `Y = win0`.
pub fn controller_ranks(
    g: &GameGraph,
    spec: &Spec,
    win0: &VertexSet,
) -> Result<Vec<Option<u32>>, FixpointError> {
    check_game(g, spec)?;
    Ok(inner_mu(g, spec, win0).1)
}

/// State-feedback policy on abstract states.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Policy {
    pub choice: BTreeMap<CellId, InputId>,
}

impl Policy {
    pub fn get(&self, s: CellId) -> Result<InputId, FixpointError> {
        self.choice.get(&s).copied().ok_or(FixpointError::NotWinning(s.0))
    }

    pub fn len(&self) -> usize {
        self.choice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choice.is_empty()
    }

    /// The policy as a vertex-level choice on state vertices.
    pub fn vertex_choices(&self, abs: &AbstractGame) -> BTreeMap<VertexId, VertexId> {
        self.choice
            .iter()
            .filter_map(|(s, u)| abs.choice_vertex(*s, *u).map(|c| (abs.state_vertex(*s), c)))
            .collect()
    }
}

/// Picks, for each non-absorbing winning state, the input whose choice
/// vertex has the smallest entry rank (ties: lowest vertex index).
pub fn synth_controller(abs: &AbstractGame, win0: &VertexSet) -> Result<Policy, FixpointError> {
    let ranks = controller_ranks(&abs.game, &abs.spec, win0)?;
    let mut choice = BTreeMap::new();
    for s in abs.cells() {
        let sv = abs.state_vertex(s);
        if !win0.contains(sv) || abs.is_absorbing(s) {
            continue;
        }
        let best = (0..abs.inputs())
            .map(|u| InputId(u as u32))
            .filter_map(|u| {
                let c = abs.choice_vertex(s, u)?;
                ranks[c.index()].map(|r| (r, c, u))
            })
            .min();
        if let Some((_, _, u)) = best {
            choice.insert(s, u);
        }
    }
    Ok(Policy { choice })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: u32) -> VertexId {
        VertexId(i)
    }

    #[test]
    fn transformer_boundaries() {
        let mut g = GameGraph::new(Flavor::Fair);
        let a = g.add_vertex(Owner::P0);
        let b = g.add_vertex(Owner::P1);
        g.add_edge(a, b).unwrap();
        g.add_fair_edge(b, a).unwrap();
        let t = Transformers::new(&g);
        let all = g.alive_set();
        assert_eq!(t.cpre1(&all), all);
        assert_eq!(t.cpre0(&all), all);
        assert!(t.lpre_forall(&VertexSet::empty(2)).is_empty());
        assert_eq!(t.lpre_forall(&all), VertexSet::from_ids(2, [b]));
    }

    #[test]
    fn all_buchi_gives_empty_first_iterate() {
        let mut g = GameGraph::new(Flavor::Normal);
        let a = g.add_vertex(Owner::P0);
        let b = g.add_vertex(Owner::P1);
        g.add_edge(a, b).unwrap();
        g.add_edge(b, a).unwrap();
        let spec = Spec::buchi(g.alive_set());
        let sol = solve_psi(&g, &spec).unwrap();
        assert!(sol.win1.is_empty());
        assert_eq!(sol.trace().outer, vec![Vec::<u32>::new()]);
        assert_eq!(solve_big_psi(&g, &spec).unwrap(), g.alive_set());
    }

    #[test]
    fn empty_b_loses_everywhere() {
        let mut g = GameGraph::new(Flavor::Normal);
        let a = g.add_vertex(Owner::P0);
        g.add_edge(a, a).unwrap();
        let spec = Spec::buchi(VertexSet::empty(1));
        assert!(solve_big_psi(&g, &spec).unwrap().is_empty());
        let sol = solve_psi(&g, &spec).unwrap();
        assert_eq!(sol.levels, vec![Some(0)]);
    }

    #[test]
    fn fairness_forces_visit() {
        // P1 fair vertex f loops to itself or goes to the B vertex; fairness forces B.
        let mut g = GameGraph::new(Flavor::Fair);
        let f = g.add_vertex(Owner::P1);
        let b = g.add_vertex(Owner::P0);
        g.add_fair_edge(f, f).unwrap();
        g.add_fair_edge(f, b).unwrap();
        g.add_edge(b, f).unwrap();
        let spec = Spec::buchi(VertexSet::from_ids(2, [b]));
        assert_eq!(solve_big_psi(&g, &spec).unwrap(), g.alive_set());
        assert!(solve_psi(&g, &spec).unwrap().win1.is_empty());
        let ranks = controller_ranks(&g, &spec, &g.alive_set()).unwrap();
        assert_eq!(ranks, vec![Some(1), Some(0)]);
    }

    #[test]
    fn trace_is_monotone_chain() {
        // chain a -> b -> c -> c, only c is B-free trap for P1 when P0 must move.
        let mut g = GameGraph::new(Flavor::Normal);
        let a = g.add_vertex(Owner::P0);
        let b = g.add_vertex(Owner::P1);
        let c = g.add_vertex(Owner::P0);
        let d = g.add_vertex(Owner::P0);
        g.add_edge(a, b).unwrap();
        g.add_edge(b, c).unwrap();
        g.add_edge(b, d).unwrap();
        g.add_edge(c, c).unwrap();
        g.add_edge(d, d).unwrap();
        let spec = Spec::buchi(VertexSet::from_ids(4, [v(3)]));
        let sol = solve_psi(&g, &spec).unwrap();
        assert_eq!(sol.win1, VertexSet::from_ids(4, [a, b, c]));
        let tr = sol.trace();
        for w in tr.outer.windows(2) {
            assert!(w[0].iter().all(|x| w[1].contains(x)));
        }
    }
}
