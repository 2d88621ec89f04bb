//! Progress measures and worklist lifting.
//!
//! Three local update rules share one engine:
//!
//! * `CofairCoBuchi`: fair vertices belong to Player 0. A fair vertex outside
//!   `B` takes `min(max over fair successors, min over all successors + 1)`,
//!   other Player 0 vertices take the minimum, Player 1 vertices the maximum.
//! * `PlainCoBuchi`: Player 0 minimum, Player 1 maximum, no fairness.
//! * `FairBuchiDirect`: the same rules with ownership swapped, evaluated
//!   directly on a fair Büchi game. Its `⊤`-set is Player 0's winning region
//!   of that game, which is the `⊤`-set of the cofair measure on the dual.
//!
//! Lifting sets `ρ(v)` to the rule value, plus one on `B`, saturating at `⊤`
//! above the range `L`. Values never decrease during a solve.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::game::{Flavor, GameGraph, Owner, Spec, SpecKind, VertexId};
use crate::set::VertexSet;

/// A value in `{0, …, L} ∪ {⊤}`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rank(u32);

impl Rank {
    pub const ZERO: Rank = Rank(0);
    pub const TOP: Rank = Rank(u32::MAX);

    pub fn finite(v: u32) -> Rank {
        assert!(v < u32::MAX, "finite rank out of representable range");
        Rank(v)
    }

    #[inline]
    pub fn is_top(self) -> bool {
        self.0 == u32::MAX
    }

    pub fn value(self) -> Option<u32> {
        (!self.is_top()).then_some(self.0)
    }

    /// Successor in `{0..L} ∪ {⊤}`: `L + 1 = ⊤`, `⊤ + 1 = ⊤`.
    #[inline]
    pub fn bump(self, range: u32) -> Rank {
        if self.is_top() || self.0 >= range {
            Rank::TOP
        } else {
            Rank(self.0 + 1)
        }
    }
}

impl fmt::Debug for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            Some(v) => write!(f, "{v}"),
            None => write!(f, "⊤"),
        }
    }
}

impl Serialize for Rank {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.value() {
            Some(v) => s.serialize_u32(v),
            None => s.serialize_str("top"),
        }
    }
}

impl<'de> Deserialize<'de> for Rank {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Rank, D::Error> {
        struct RankVisitor;
        impl Visitor<'_> for RankVisitor {
            type Value = Rank;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a nonnegative integer or \"top\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rank, E> {
                u32::try_from(v)
                    .ok()
                    .filter(|v| *v < u32::MAX)
                    .map(Rank)
                    .ok_or_else(|| E::custom("rank too large"))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Rank, E> {
                if v == "top" {
                    Ok(Rank::TOP)
                } else {
                    Err(E::custom(format!("unexpected rank {v:?}")))
                }
            }
        }
        d.deserialize_any(RankVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PmFlavor {
    CofairCoBuchi,
    PlainCoBuchi,
    FairBuchiDirect,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PmError {
    #[error("{pm:?} lifting does not fit a {flavor:?} game with a {kind:?} objective")]
    FlavorMismatch { pm: PmFlavor, flavor: Flavor, kind: SpecKind },
    #[error("vertex {0} has value top; no winning move")]
    VertexIsTop(u32),
    #[error("vertex {0} is not owned by the extracting player")]
    NotOwned(u32),
    #[error("extracting player owns fair vertex {0}")]
    FairVertexOwned(u32),
    #[error("rank {value} exceeds range {range}")]
    RangeTooSmall { value: u32, range: u32 },
    #[error("expected a cofair game, found {0:?}")]
    NotCofair(Flavor),
}

/// Total map from vertex indices to ranks, with range `L`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgressMeasure {
    values: Vec<Rank>,
    range: u32,
}

impl ProgressMeasure {
    pub fn zeros(capacity: usize, range: u32) -> Self {
        ProgressMeasure { values: vec![Rank::ZERO; capacity], range }
    }

    pub fn from_values(values: Vec<Rank>, range: u32) -> Result<Self, PmError> {
        for r in &values {
            if let Some(v) = r.value() {
                if v > range {
                    return Err(PmError::RangeTooSmall { value: v, range });
                }
            }
        }
        Ok(ProgressMeasure { values, range })
    }

    pub fn range(&self) -> u32 {
        self.range
    }

    pub fn capacity(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn get(&self, v: VertexId) -> Rank {
        self.values.get(v.index()).copied().unwrap_or(Rank::ZERO)
    }

    pub fn set(&mut self, v: VertexId, r: Rank) {
        if v.index() >= self.values.len() {
            self.values.resize(v.index() + 1, Rank::ZERO);
        }
        self.values[v.index()] = r;
    }

    pub fn grow(&mut self, capacity: usize) {
        if capacity > self.values.len() {
            self.values.resize(capacity, Rank::ZERO);
        }
    }

    pub fn values(&self) -> &[Rank] {
        &self.values
    }

    /// Live vertices mapped to `⊤`.
    pub fn top_set(&self, g: &GameGraph) -> VertexSet {
        VertexSet::from_ids(g.capacity(), g.vertices().filter(|v| self.get(*v).is_top()))
    }

    /// Pointwise `self ≼ other` over the live vertices of `g`.
    pub fn leq_on(&self, other: &ProgressMeasure, g: &GameGraph) -> bool {
        g.vertices().all(|v| self.get(v) <= other.get(v))
    }

    /// Equality over the live vertices of `g`.
    pub fn eq_on(&self, other: &ProgressMeasure, g: &GameGraph) -> bool {
        g.vertices().all(|v| self.get(v) == other.get(v))
    }
}

/// Checks the game/objective pattern required by a lifting flavor.
pub fn check_flavor(g: &GameGraph, spec: &Spec, pm: PmFlavor) -> Result<(), PmError> {
    let ok = match pm {
        PmFlavor::CofairCoBuchi => {
            spec.kind == SpecKind::CoBuchi && matches!(g.flavor(), Flavor::Cofair | Flavor::Normal)
        }
        PmFlavor::PlainCoBuchi => {
            spec.kind == SpecKind::CoBuchi && g.vertices().all(|v| !g.is_fair(v))
        }
        PmFlavor::FairBuchiDirect => {
            spec.kind == SpecKind::Buchi && matches!(g.flavor(), Flavor::Fair | Flavor::Normal)
        }
    };
    if ok {
        Ok(())
    } else {
        Err(PmError::FlavorMismatch { pm, flavor: g.flavor(), kind: spec.kind })
    }
}

/// The rule value `pr(v)` before the `B` increment.
pub fn pr(g: &GameGraph, spec: &Spec, rho: &ProgressMeasure, pm: PmFlavor, v: VertexId) -> Rank {
    let range = rho.range;
    let fair_branch = pm != PmFlavor::PlainCoBuchi && g.is_fair(v) && !spec.contains(v);
    if fair_branch {
        let max_fair = g.fair_succ(v).iter().map(|w| rho.get(*w)).max().unwrap_or(Rank::ZERO);
        let min_all = min_succ(g, rho, v);
        return max_fair.min(min_all.bump(range));
    }
    let minimizer = match pm {
        PmFlavor::CofairCoBuchi | PmFlavor::PlainCoBuchi => Owner::P0,
        PmFlavor::FairBuchiDirect => Owner::P1,
    };
    if g.owner(v) == minimizer {
        min_succ(g, rho, v)
    } else {
        g.succ(v).iter().map(|w| rho.get(*w)).max().unwrap_or(Rank::ZERO)
    }
}

#[inline]
fn min_succ(g: &GameGraph, rho: &ProgressMeasure, v: VertexId) -> Rank {
    g.succ(v).iter().map(|w| rho.get(*w)).min().unwrap_or(Rank::ZERO)
}

/// The lifted value at `v`: `pr(v) + [v ∈ B]`, never below the current value.
pub fn lift_value(g: &GameGraph, spec: &Spec, rho: &ProgressMeasure, pm: PmFlavor, v: VertexId) -> Rank {
    let p = pr(g, spec, rho, pm, v);
    let next = if spec.contains(v) { p.bump(rho.range) } else { p };
    next.max(rho.get(v))
}

/// Applies one lift at `v`, returning the new measure.
pub fn lift(g: &GameGraph, spec: &Spec, rho: &ProgressMeasure, pm: PmFlavor, v: VertexId) -> ProgressMeasure {
    let mut out = rho.clone();
    out.set(v, lift_value(g, spec, rho, pm, v));
    out
}

/// Order in which pending vertices leave the worklist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WorklistOrder {
    #[default]
    Fifo,
    Lifo,
    Shuffled(u64),
}

#[derive(Debug, Clone)]
pub struct LiftOutcome {
    pub rho: ProgressMeasure,
    /// Lifts that raised a value.
    pub lifts: u64,
    /// Rule evaluations, including those that changed nothing.
    pub evaluations: u64,
}

struct Worklist {
    order: WorklistOrder,
    queue: VecDeque<VertexId>,
    queued: Vec<bool>,
    rng: Option<ChaCha8Rng>,
}

impl Worklist {
    fn new(order: WorklistOrder, capacity: usize) -> Self {
        let rng = match order {
            WorklistOrder::Shuffled(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        Worklist { order, queue: VecDeque::new(), queued: vec![false; capacity], rng }
    }

    fn push(&mut self, v: VertexId) {
        if !self.queued[v.index()] {
            self.queued[v.index()] = true;
            self.queue.push_back(v);
        }
    }

    fn pop(&mut self) -> Option<VertexId> {
        let v = match self.order {
            WorklistOrder::Fifo => self.queue.pop_front(),
            WorklistOrder::Lifo => self.queue.pop_back(),
            WorklistOrder::Shuffled(_) => {
                if self.queue.is_empty() {
                    None
                } else {
                    let rng = self.rng.as_mut().expect("seeded");
                    let i = rng.gen_range(0..self.queue.len());
                    self.queue.swap_remove_back(i)
                }
            }
        }?;
        self.queued[v.index()] = false;
        Some(v)
    }
}

/// Lifts from `init` until every vertex satisfies its rule.
///
/// `init` must lie below the least fixpoint and `seed` must contain every
/// vertex whose rule may be violated under `init`.
pub fn solve_by_lifting<I>(
    g: &GameGraph,
    spec: &Spec,
    pm: PmFlavor,
    init: ProgressMeasure,
    seed: I,
    order: WorklistOrder,
) -> Result<LiftOutcome, PmError>
where
    I: IntoIterator<Item = VertexId>,
{
    check_flavor(g, spec, pm)?;
    let mut rho = init;
    rho.grow(g.capacity());
    let mut work = Worklist::new(order, g.capacity());
    for v in seed {
        if g.is_alive(v) {
            work.push(v);
        }
    }
    let (mut lifts, mut evaluations) = (0u64, 0u64);
    while let Some(v) = work.pop() {
        let cur = rho.get(v);
        if cur.is_top() {
            continue;
        }
        evaluations += 1;
        let next = lift_value(g, spec, &rho, pm, v);
        if next > cur {
            debug_assert!(next.value().map_or(true, |x| x <= rho.range));
            rho.values[v.index()] = next;
            lifts += 1;
            for p in g.pred(v) {
                if !rho.get(*p).is_top() {
                    work.push(*p);
                }
            }
        }
    }
    Ok(LiftOutcome { rho, lifts, evaluations })
}

/// Solves from the all-zero measure with every vertex seeded.
pub fn solve_from_scratch(
    g: &GameGraph,
    spec: &Spec,
    pm: PmFlavor,
    range: u32,
) -> Result<LiftOutcome, PmError> {
    solve_by_lifting(
        g,
        spec,
        pm,
        ProgressMeasure::zeros(g.capacity(), range),
        g.vertices(),
        WorklistOrder::Fifo,
    )
}

/// True iff `ρ(v) ≥ pr(v) + [v ∈ B]` at every live vertex.
pub fn satisfies_rules(g: &GameGraph, spec: &Spec, pm: PmFlavor, rho: &ProgressMeasure) -> bool {
    g.vertices().all(|v| {
        let p = pr(g, spec, rho, pm, v);
        let need = if spec.contains(v) { p.bump(rho.range) } else { p };
        rho.get(v) >= need
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeHint {
    /// `|B| + |V^f|`.
    General,
    /// `|S| + |B|` for games built from an approximation table; `states` is `|S|`.
    AbstractDual { states: usize },
}

pub fn pm_range(g: &GameGraph, spec: &Spec, hint: RangeHint) -> u32 {
    let b = g.vertices().filter(|v| spec.contains(*v)).count();
    let n = match hint {
        RangeHint::General => b + g.vertices().filter(|v| g.is_fair(*v)).count(),
        RangeHint::AbstractDual { states } => states + b,
    };
    n as u32
}

/// Normal coBüchi game replacing each fair vertex outside `B` by a two-way gadget.
#[derive(Debug, Clone)]
pub struct Gadget {
    pub graph: GameGraph,
    pub spec: Spec,
    /// For each original fair vertex outside `B`, its `(v_l, v_r)` pair.
    pub parts: BTreeMap<VertexId, (VertexId, VertexId)>,
    /// Indices below this bound are the original vertices.
    pub original_capacity: usize,
}

/// Replaces every `v ∈ V^f \ B` by `v → {v_l, v_r}` with `v_l ∈ V1` choosing
/// among fair successors and `v_r ∈ V0 ∩ B'` choosing among all successors.
/// Fair vertices inside `B` keep their edges as plain edges.
pub fn gadgetize(g: &GameGraph, spec: &Spec) -> Result<Gadget, PmError> {
    if g.flavor() != Flavor::Cofair {
        return Err(PmError::NotCofair(g.flavor()));
    }
    let cap = g.capacity();
    let mut out = GameGraph::with_capacity(Flavor::Normal, cap);
    for i in 0..cap {
        out.add_vertex(g.owner(VertexId(i as u32)));
    }
    for i in 0..cap {
        let v = VertexId(i as u32);
        if !g.is_alive(v) {
            out.retire_vertex(v).expect("fresh vertex");
        }
    }
    let mut set = spec.set.clone();
    let mut parts = BTreeMap::new();
    for v in g.vertices() {
        if g.is_fair(v) && !spec.contains(v) {
            let l = out.add_vertex(Owner::P1);
            let r = out.add_vertex(Owner::P0);
            set.insert(r);
            out.add_edge(v, l).expect("live");
            out.add_edge(v, r).expect("live");
            for w in g.fair_succ(v) {
                out.add_edge(l, *w).expect("live");
            }
            for w in g.succ(v) {
                out.add_edge(r, *w).expect("live");
            }
            parts.insert(v, (l, r));
        } else {
            for w in g.succ(v) {
                out.add_edge(v, *w).expect("live");
            }
        }
    }
    Ok(Gadget { graph: out, spec: Spec { kind: spec.kind, set }, parts, original_capacity: cap })
}

/// Positional choice for the minimizing player.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinStrategy {
    owner: Owner,
    choice: Vec<Option<VertexId>>,
}

impl MinStrategy {
    pub fn get(&self, g: &GameGraph, v: VertexId) -> Result<VertexId, PmError> {
        if !g.is_alive(v) || g.owner(v) != self.owner {
            return Err(PmError::NotOwned(v.0));
        }
        self.choice
            .get(v.index())
            .copied()
            .flatten()
            .ok_or(PmError::VertexIsTop(v.0))
    }

    pub fn owner(&self) -> Owner {
        self.owner
    }

    pub fn choices(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.choice
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|w| (VertexId(i as u32), w)))
    }
}

/// Sends each non-`⊤` vertex of `owner` to a successor of minimal rank,
/// breaking ties by lowest index.
pub fn extract_min_strategy(
    rho: &ProgressMeasure,
    g: &GameGraph,
    owner: Owner,
) -> Result<MinStrategy, PmError> {
    let mut choice = vec![None; g.capacity()];
    for v in g.vertices().filter(|v| g.owner(*v) == owner) {
        if g.is_fair(v) {
            return Err(PmError::FairVertexOwned(v.0));
        }
        if rho.get(v).is_top() {
            continue;
        }
        choice[v.index()] = g.succ(v).iter().copied().min_by_key(|w| (rho.get(*w), *w));
    }
    Ok(MinStrategy { owner, choice })
}

/// Serialized measure: vertex id → value or `"top"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmDump {
    pub flavor: PmFlavor,
    pub range: u32,
    pub values: BTreeMap<u32, Rank>,
}

impl PmDump {
    pub fn new(rho: &ProgressMeasure, g: &GameGraph, flavor: PmFlavor) -> Self {
        let values = g.vertices().map(|v| (v.0, rho.get(v))).collect();
        PmDump { flavor, range: rho.range, values }
    }

    pub fn to_measure(&self, capacity: usize) -> Result<ProgressMeasure, PmError> {
        let cap = self
            .values
            .keys()
            .map(|k| *k as usize + 1)
            .max()
            .unwrap_or(0)
            .max(capacity);
        let mut values = vec![Rank::ZERO; cap];
        for (k, r) in &self.values {
            values[*k as usize] = *r;
        }
        ProgressMeasure::from_values(values, self.range)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: u32) -> VertexId {
        VertexId(i)
    }

    fn pm_with(vals: &[Rank], range: u32) -> ProgressMeasure {
        ProgressMeasure::from_values(vals.to_vec(), range).unwrap()
    }

    #[test]
    fn rank_arithmetic() {
        assert_eq!(Rank::finite(3).bump(4), Rank::finite(4));
        assert_eq!(Rank::finite(4).bump(4), Rank::TOP);
        assert_eq!(Rank::TOP.bump(4), Rank::TOP);
        assert!(Rank::finite(1_000_000) < Rank::TOP);
        let json = serde_json::to_string(&vec![Rank::finite(2), Rank::TOP]).unwrap();
        assert_eq!(json, "[2,\"top\"]");
        let back: Vec<Rank> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vec![Rank::finite(2), Rank::TOP]);
    }

    #[test]
    fn pr_fair_branch() {
        // v0 fair (P0, cofair), fair successors v1, v2 and plain successor v3.
        let mut g = GameGraph::new(Flavor::Cofair);
        for _ in 0..4 {
            g.add_vertex(Owner::P0);
        }
        g.add_fair_edge(v(0), v(1)).unwrap();
        g.add_fair_edge(v(0), v(2)).unwrap();
        g.add_edge(v(0), v(3)).unwrap();
        let spec = Spec::co_buchi(VertexSet::empty(4));
        let rho = pm_with(&[Rank::ZERO, Rank::finite(1), Rank::finite(2), Rank::finite(0)], 5);
        assert_eq!(pr(&g, &spec, &rho, PmFlavor::CofairCoBuchi, v(0)), Rank::finite(1));
    }

    #[test]
    fn pr_max_and_min_rules() {
        let mut g = GameGraph::new(Flavor::Cofair);
        let a = g.add_vertex(Owner::P1);
        let b = g.add_vertex(Owner::P0);
        let c = g.add_vertex(Owner::P0);
        let d = g.add_vertex(Owner::P0);
        g.add_edge(a, c).unwrap();
        g.add_edge(a, d).unwrap();
        g.add_edge(b, c).unwrap();
        g.add_edge(b, d).unwrap();
        let spec = Spec::co_buchi(VertexSet::empty(4));
        let rho = pm_with(&[Rank::ZERO, Rank::ZERO, Rank::finite(3), Rank::TOP], 5);
        assert_eq!(pr(&g, &spec, &rho, PmFlavor::CofairCoBuchi, a), Rank::TOP);
        let rho = pm_with(&[Rank::ZERO, Rank::ZERO, Rank::TOP, Rank::finite(2)], 5);
        assert_eq!(pr(&g, &spec, &rho, PmFlavor::CofairCoBuchi, b), Rank::finite(2));
    }

    #[test]
    fn lift_saturates_at_range() {
        let mut g = GameGraph::new(Flavor::Normal);
        let a = g.add_vertex(Owner::P0);
        let b = g.add_vertex(Owner::P0);
        g.add_edge(a, b).unwrap();
        g.add_edge(b, b).unwrap();
        let spec = Spec::co_buchi(VertexSet::from_ids(2, [a]));
        let rho = pm_with(&[Rank::ZERO, Rank::finite(3)], 3);
        assert_eq!(lift(&g, &spec, &rho, PmFlavor::PlainCoBuchi, a).get(a), Rank::TOP);
        let fixed = pm_with(&[Rank::finite(1), Rank::ZERO], 3);
        assert_eq!(lift(&g, &spec, &fixed, PmFlavor::PlainCoBuchi, a), fixed);
    }

    #[test]
    fn empty_b_keeps_zero() {
        let mut g = GameGraph::new(Flavor::Normal);
        let a = g.add_vertex(Owner::P0);
        let b = g.add_vertex(Owner::P1);
        g.add_edge(a, b).unwrap();
        g.add_edge(b, a).unwrap();
        let spec = Spec::co_buchi(VertexSet::empty(2));
        let out = solve_from_scratch(&g, &spec, PmFlavor::PlainCoBuchi, 0).unwrap();
        assert_eq!(out.rho, ProgressMeasure::zeros(2, 0));
        assert_eq!(out.lifts, 0);
    }

    #[test]
    fn forced_self_loop_reaches_top() {
        let mut g = GameGraph::new(Flavor::Cofair);
        let a = g.add_vertex(Owner::P0);
        g.add_edge(a, a).unwrap();
        let spec = Spec::co_buchi(VertexSet::from_ids(1, [a]));
        let range = pm_range(&g, &spec, RangeHint::General);
        assert_eq!(range, 1);
        let out = solve_from_scratch(&g, &spec, PmFlavor::CofairCoBuchi, range).unwrap();
        assert!(out.rho.get(a).is_top());
        assert_eq!(out.lifts, 2);
    }

    #[test]
    fn range_formulas() {
        let mut g = GameGraph::new(Flavor::Cofair);
        for _ in 0..6 {
            g.add_vertex(Owner::P0);
        }
        for i in 0..5 {
            g.add_fair_edge(v(i), v(5)).unwrap();
        }
        g.add_edge(v(5), v(5)).unwrap();
        let spec = Spec::co_buchi(VertexSet::from_ids(6, [v(5)]));
        assert_eq!(pm_range(&g, &spec, RangeHint::General), 6);
        assert_eq!(pm_range(&g, &spec, RangeHint::AbstractDual { states: 9 }), 10);
    }

    #[test]
    fn gadget_sizes() {
        // 5 vertices, two fair outside B, one B vertex.
        let mut g = GameGraph::new(Flavor::Cofair);
        for _ in 0..5 {
            g.add_vertex(Owner::P0);
        }
        g.add_fair_edge(v(0), v(1)).unwrap();
        g.add_edge(v(0), v(2)).unwrap();
        g.add_fair_edge(v(1), v(2)).unwrap();
        g.add_edge(v(2), v(3)).unwrap();
        g.add_edge(v(3), v(4)).unwrap();
        g.add_edge(v(4), v(0)).unwrap();
        let spec = Spec::co_buchi(VertexSet::from_ids(5, [v(4)]));
        let gd = gadgetize(&g, &spec).unwrap();
        assert_eq!(gd.graph.vertex_count(), 9);
        assert_eq!(gd.spec.set.len(), 3);
        assert_eq!(gd.graph.flavor(), Flavor::Normal);
        gd.graph.validate().unwrap();
    }

    #[test]
    fn gadget_without_fairness_is_identity() {
        let mut g = GameGraph::new(Flavor::Cofair);
        let a = g.add_vertex(Owner::P0);
        let b = g.add_vertex(Owner::P1);
        g.add_edge(a, b).unwrap();
        g.add_edge(b, a).unwrap();
        let spec = Spec::co_buchi(VertexSet::from_ids(2, [a]));
        let gd = gadgetize(&g, &spec).unwrap();
        let mut expect = g.clone();
        expect.set_flavor(Flavor::Normal);
        assert_eq!(gd.graph, expect);
        assert_eq!(gd.spec, spec);
    }

    #[test]
    fn min_strategy_ties_and_top() {
        let mut g = GameGraph::new(Flavor::Normal);
        let a = g.add_vertex(Owner::P0);
        let b = g.add_vertex(Owner::P1);
        let c = g.add_vertex(Owner::P1);
        let d = g.add_vertex(Owner::P1);
        let e = g.add_vertex(Owner::P0);
        g.add_edge(a, b).unwrap();
        g.add_edge(a, c).unwrap();
        g.add_edge(a, d).unwrap();
        g.add_edge(e, d).unwrap();
        g.add_edge(e, c).unwrap();
        for x in [b, c, d] {
            g.add_edge(x, x).unwrap();
        }
        let rho = pm_with(&[Rank::ZERO, Rank::finite(2), Rank::ZERO, Rank::TOP, Rank::ZERO], 4);
        let s = extract_min_strategy(&rho, &g, Owner::P0).unwrap();
        assert_eq!(s.get(&g, a).unwrap(), c);
        let tie = pm_with(&[Rank::ZERO, Rank::finite(1), Rank::finite(1), Rank::finite(1), Rank::ZERO], 4);
        let s = extract_min_strategy(&tie, &g, Owner::P0).unwrap();
        assert_eq!(s.get(&g, a).unwrap(), b);
        assert_eq!(s.get(&g, e).unwrap(), c);
        let top = pm_with(&[Rank::TOP, Rank::ZERO, Rank::ZERO, Rank::ZERO, Rank::ZERO], 4);
        let s = extract_min_strategy(&top, &g, Owner::P0).unwrap();
        assert_eq!(s.get(&g, a), Err(PmError::VertexIsTop(0)));
    }

    #[test]
    fn dump_round_trip() {
        let mut g = GameGraph::new(Flavor::Normal);
        let a = g.add_vertex(Owner::P0);
        let b = g.add_vertex(Owner::P0);
        g.add_edge(a, b).unwrap();
        g.add_edge(b, b).unwrap();
        let rho = pm_with(&[Rank::finite(1), Rank::TOP], 3);
        let dump = PmDump::new(&rho, &g, PmFlavor::PlainCoBuchi);
        let json = serde_json::to_string(&dump).unwrap();
        assert!(json.contains("\"top\""));
        let back: PmDump = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_measure(2).unwrap(), rho);
    }
}
