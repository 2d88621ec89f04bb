//! Two-player game graphs with an optional fair-edge subset.
//!
//! Vertices carry dense indices that stay stable under edits: removing a
//! vertex retires its index instead of compacting the arrays, so per-vertex
//! solver state (progress measures, bitsets) survives graph patches.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::set::VertexSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub u32);

impl VertexId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Owner {
    P0,
    P1,
}

impl Owner {
    pub fn opponent(self) -> Owner {
        match self {
            Owner::P0 => Owner::P1,
            Owner::P1 => Owner::P0,
        }
    }
}

/// Which player, if any, owns the fair edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Normal,
    Fair,
    Cofair,
}

impl Flavor {
    /// Owner of fair vertices under this flavor.
    pub fn fair_owner(self) -> Option<Owner> {
        match self {
            Flavor::Normal => None,
            Flavor::Fair => Some(Owner::P1),
            Flavor::Cofair => Some(Owner::P0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecKind {
    Buchi,
    CoBuchi,
}

/// Büchi or coBüchi objective of Player 0 over the vertex set `set`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spec {
    pub kind: SpecKind,
    pub set: VertexSet,
}

impl Spec {
    pub fn buchi(set: VertexSet) -> Self {
        Spec { kind: SpecKind::Buchi, set }
    }

    pub fn co_buchi(set: VertexSet) -> Self {
        Spec { kind: SpecKind::CoBuchi, set }
    }

    #[inline]
    pub fn contains(&self, v: VertexId) -> bool {
        self.set.contains(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WinningPartition {
    pub win0: VertexSet,
    pub win1: VertexSet,
}

impl WinningPartition {
    /// Builds the partition from Player 0's region; Player 1 gets the rest.
    pub fn from_win0(g: &GameGraph, win0: VertexSet) -> Self {
        let mut win1 = g.alive_set();
        win1.difference_with(&win0);
        WinningPartition { win0, win1 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("vertex {0} is not part of the graph")]
    UnknownVertex(u32),
    #[error("vertex {0} has no successors")]
    DeadEnd(u32),
    #[error("fair edge at vertex {vertex} violates the {flavor:?} ownership pattern")]
    FlavorMismatch { vertex: u32, flavor: Flavor },
    #[error("fair successor {to} of vertex {from} is not an edge")]
    FairNotEdge { from: u32, to: u32 },
    #[error("lasso uses missing edge {from} -> {to}")]
    BrokenLasso { from: u32, to: u32 },
    #[error("lasso cycle is empty")]
    EmptyCycle,
    #[error("spec kind {kind:?} does not fit a {flavor:?} game")]
    SpecMismatch { kind: SpecKind, flavor: Flavor },
    #[error("malformed game dump: {0}")]
    BadDump(String),
}

/// Game graph with stable vertex indices, plain edges `E` and fair edges `E^f ⊆ E`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameGraph {
    flavor: Flavor,
    owner: Vec<Owner>,
    alive: Vec<bool>,
    succ: Vec<Vec<VertexId>>,
    fair: Vec<Vec<VertexId>>,
    pred: Vec<Vec<VertexId>>,
    live_count: usize,
}

impl GameGraph {
    pub fn new(flavor: Flavor) -> Self {
        GameGraph {
            flavor,
            owner: Vec::new(),
            alive: Vec::new(),
            succ: Vec::new(),
            fair: Vec::new(),
            pred: Vec::new(),
            live_count: 0,
        }
    }

    pub fn with_capacity(flavor: Flavor, n: usize) -> Self {
        GameGraph {
            flavor,
            owner: Vec::with_capacity(n),
            alive: Vec::with_capacity(n),
            succ: Vec::with_capacity(n),
            fair: Vec::with_capacity(n),
            pred: Vec::with_capacity(n),
            live_count: 0,
        }
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    #[cfg(test)]
    pub(crate) fn set_flavor(&mut self, flavor: Flavor) {
        self.flavor = flavor;
    }

    pub fn add_vertex(&mut self, owner: Owner) -> VertexId {
        let id = VertexId(self.owner.len() as u32);
        self.owner.push(owner);
        self.alive.push(true);
        self.succ.push(Vec::new());
        self.fair.push(Vec::new());
        self.pred.push(Vec::new());
        self.live_count += 1;
        id
    }

    /// Number of allocated indices, including retired ones.
    pub fn capacity(&self) -> usize {
        self.owner.len()
    }

    /// Number of live vertices.
    pub fn vertex_count(&self) -> usize {
        self.live_count
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.alive
            .iter()
            .enumerate()
            .filter(|(_, a)| **a)
            .map(|(i, _)| VertexId(i as u32))
    }

    #[inline]
    pub fn is_alive(&self, v: VertexId) -> bool {
        self.alive.get(v.index()).copied().unwrap_or(false)
    }

    #[inline]
    pub fn owner(&self, v: VertexId) -> Owner {
        self.owner[v.index()]
    }

    #[inline]
    pub fn succ(&self, v: VertexId) -> &[VertexId] {
        &self.succ[v.index()]
    }

    #[inline]
    pub fn fair_succ(&self, v: VertexId) -> &[VertexId] {
        &self.fair[v.index()]
    }

    #[inline]
    pub fn pred(&self, v: VertexId) -> &[VertexId] {
        &self.pred[v.index()]
    }

    /// A vertex is fair when it owns at least one fair edge.
    #[inline]
    pub fn is_fair(&self, v: VertexId) -> bool {
        !self.fair[v.index()].is_empty()
    }

    pub fn has_edge(&self, from: VertexId, to: VertexId) -> bool {
        self.succ[from.index()].contains(&to)
    }

    pub fn is_fair_edge(&self, from: VertexId, to: VertexId) -> bool {
        self.fair[from.index()].contains(&to)
    }

    fn check(&self, v: VertexId) -> Result<(), GameError> {
        if self.is_alive(v) {
            Ok(())
        } else {
            Err(GameError::UnknownVertex(v.0))
        }
    }

    /// Adds a plain edge; returns false if it already existed.
    pub fn add_edge(&mut self, from: VertexId, to: VertexId) -> Result<bool, GameError> {
        self.check(from)?;
        self.check(to)?;
        if self.has_edge(from, to) {
            return Ok(false);
        }
        self.succ[from.index()].push(to);
        self.pred[to.index()].push(from);
        Ok(true)
    }

    /// Adds a fair edge (and the underlying edge if missing); returns false if it was already fair.
    pub fn add_fair_edge(&mut self, from: VertexId, to: VertexId) -> Result<bool, GameError> {
        if let Some(owner) = self.flavor.fair_owner() {
            if self.owner(from) != owner {
                return Err(GameError::FlavorMismatch { vertex: from.0, flavor: self.flavor });
            }
        } else {
            return Err(GameError::FlavorMismatch { vertex: from.0, flavor: self.flavor });
        }
        self.add_edge(from, to)?;
        if self.is_fair_edge(from, to) {
            return Ok(false);
        }
        self.fair[from.index()].push(to);
        Ok(true)
    }

    pub fn remove_edge(&mut self, from: VertexId, to: VertexId) -> Result<bool, GameError> {
        self.check(from)?;
        let s = &mut self.succ[from.index()];
        let Some(pos) = s.iter().position(|w| *w == to) else {
            return Ok(false);
        };
        s.remove(pos);
        self.fair[from.index()].retain(|w| *w != to);
        self.pred[to.index()].retain(|w| *w != from);
        Ok(true)
    }

    /// Removes a vertex and all incident edges. Its index is never reused.
    pub fn retire_vertex(&mut self, v: VertexId) -> Result<(), GameError> {
        self.check(v)?;
        let out = std::mem::take(&mut self.succ[v.index()]);
        for w in out {
            self.pred[w.index()].retain(|p| *p != v);
        }
        self.fair[v.index()].clear();
        let inc = std::mem::take(&mut self.pred[v.index()]);
        for p in inc {
            self.succ[p.index()].retain(|w| *w != v);
            self.fair[p.index()].retain(|w| *w != v);
        }
        self.alive[v.index()] = false;
        self.live_count -= 1;
        Ok(())
    }

    pub fn alive_set(&self) -> VertexSet {
        VertexSet::from_ids(self.capacity(), self.vertices())
    }

    pub fn fair_set(&self) -> VertexSet {
        VertexSet::from_ids(self.capacity(), self.vertices().filter(|v| self.is_fair(*v)))
    }

    pub fn owned_set(&self, owner: Owner) -> VertexSet {
        VertexSet::from_ids(
            self.capacity(),
            self.vertices().filter(|v| self.owner(*v) == owner),
        )
    }

    /// Checks totality, `E^f ⊆ E`, and the flavor/ownership pattern.
    pub fn validate(&self) -> Result<(), GameError> {
        for v in self.vertices() {
            if self.succ(v).is_empty() {
                return Err(GameError::DeadEnd(v.0));
            }
            for w in self.fair_succ(v) {
                if !self.has_edge(v, *w) {
                    return Err(GameError::FairNotEdge { from: v.0, to: w.0 });
                }
            }
            if self.is_fair(v) && self.flavor.fair_owner() != Some(self.owner(v)) {
                return Err(GameError::FlavorMismatch { vertex: v.0, flavor: self.flavor });
            }
        }
        Ok(())
    }

    /// Live vertices with no successor.
    pub fn dead_ends(&self) -> Vec<VertexId> {
        self.vertices().filter(|v| self.succ(*v).is_empty()).collect()
    }
}

/// Swaps owners, fair ↔ cofair, and Büchi ↔ coBüchi on the same vertex set.
pub fn dualize(g: &GameGraph, spec: &Spec) -> (GameGraph, Spec) {
    let mut d = g.clone();
    for o in d.owner.iter_mut() {
        *o = o.opponent();
    }
    d.flavor = match g.flavor {
        Flavor::Normal => Flavor::Normal,
        Flavor::Fair => Flavor::Cofair,
        Flavor::Cofair => Flavor::Fair,
    };
    let kind = match spec.kind {
        SpecKind::Buchi => SpecKind::CoBuchi,
        SpecKind::CoBuchi => SpecKind::Buchi,
    };
    (d, Spec { kind, set: spec.set.clone() })
}

/// Induced subgraph on `keep`; indices are preserved and dropped vertices retired.
#[derive(Debug, Clone)]
pub struct Restriction {
    pub graph: GameGraph,
    /// Kept vertices that lost all successors.
    pub edgeless: Vec<VertexId>,
}

pub fn restrict(g: &GameGraph, keep: &VertexSet) -> Restriction {
    let mut r = g.clone();
    for v in g.vertices() {
        if !keep.contains(v) {
            r.retire_vertex(v).expect("live vertex");
        }
    }
    let edgeless = r.dead_ends();
    Restriction { graph: r, edgeless }
}

/// True iff every fair vertex on the cycle has all its fair successors on the cycle.
pub fn is_fair_play_witness(
    g: &GameGraph,
    stem: &[VertexId],
    cycle: &[VertexId],
) -> Result<bool, GameError> {
    if cycle.is_empty() {
        return Err(GameError::EmptyCycle);
    }
    let mut path: Vec<VertexId> = stem.to_vec();
    path.extend_from_slice(cycle);
    path.push(cycle[0]);
    for w in path.windows(2) {
        if !g.is_alive(w[0]) || !g.has_edge(w[0], w[1]) {
            return Err(GameError::BrokenLasso { from: w[0].0, to: w[1].0 });
        }
    }
    let on_cycle = VertexSet::from_ids(g.capacity(), cycle.iter().copied());
    Ok(cycle
        .iter()
        .all(|v| g.fair_succ(*v).iter().all(|w| on_cycle.contains(*w))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexDump {
    pub id: u32,
    pub owner: u8,
    pub fair: Vec<u32>,
    pub plain: Vec<u32>,
    pub buchi: bool,
}

/// Adjacency dump; retired indices are simply absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameDump {
    pub flavor: Flavor,
    pub spec: SpecKind,
    pub capacity: usize,
    pub vertices: Vec<VertexDump>,
}

impl GameDump {
    pub fn from_game(g: &GameGraph, spec: &Spec) -> Self {
        let vertices = g
            .vertices()
            .map(|v| {
                let fair: Vec<u32> = g.fair_succ(v).iter().map(|w| w.0).collect();
                let plain = g
                    .succ(v)
                    .iter()
                    .filter(|w| !g.is_fair_edge(v, **w))
                    .map(|w| w.0)
                    .collect();
                VertexDump {
                    id: v.0,
                    owner: match g.owner(v) {
                        Owner::P0 => 0,
                        Owner::P1 => 1,
                    },
                    fair,
                    plain,
                    buchi: spec.contains(v),
                }
            })
            .collect();
        GameDump { flavor: g.flavor(), spec: spec.kind, capacity: g.capacity(), vertices }
    }

    pub fn to_game(&self) -> Result<(GameGraph, Spec), GameError> {
        let cap = self
            .vertices
            .iter()
            .map(|v| v.id as usize + 1)
            .max()
            .unwrap_or(0)
            .max(self.capacity);
        let mut owners = vec![None; cap];
        for v in &self.vertices {
            let o = match v.owner {
                0 => Owner::P0,
                1 => Owner::P1,
                x => return Err(GameError::BadDump(format!("owner {x} at vertex {}", v.id))),
            };
            if owners[v.id as usize].replace(o).is_some() {
                return Err(GameError::BadDump(format!("duplicate vertex {}", v.id)));
            }
        }
        let mut g = GameGraph::with_capacity(self.flavor, cap);
        for o in &owners {
            g.add_vertex(o.unwrap_or(Owner::P0));
        }
        for (i, o) in owners.iter().enumerate() {
            if o.is_none() {
                g.retire_vertex(VertexId(i as u32))?;
            }
        }
        let mut b = VertexSet::empty(cap);
        for v in &self.vertices {
            let id = VertexId(v.id);
            for w in &v.plain {
                g.add_edge(id, VertexId(*w))?;
            }
            for w in &v.fair {
                g.add_fair_edge(id, VertexId(*w))?;
            }
            if v.buchi {
                b.insert(id);
            }
        }
        Ok((g, Spec { kind: self.spec, set: b }))
    }
}
