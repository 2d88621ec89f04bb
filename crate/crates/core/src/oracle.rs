//! Brute-force reference solvers for small games.
//!
//! Normal games use the classical attractor recurrence. Fair Büchi games
//! enumerate every positional Player 0 strategy and search the vertex subsets
//! Player 1 could cycle through: strongly connected under the strategy,
//! `B`-free, and closed under fair successors. Nothing here touches the
//! progress-measure or fixpoint code.

use std::collections::BTreeMap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use thiserror::Error;

use crate::game::{dualize, Flavor, GameGraph, Owner, Spec, SpecKind, VertexId};
use crate::set::VertexSet;

/// Vertex bound for subset enumeration.
pub const MAX_VERTICES: usize = 16;
/// Bound on the number of positional strategies tried.
pub const MAX_STRATEGIES: u64 = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("game too large for enumeration: {vertices} vertices, {strategies} strategies")]
    TooLarge { vertices: usize, strategies: u64 },
    #[error("oracle does not handle {kind:?} objectives on {flavor:?} games")]
    Unsupported { flavor: Flavor, kind: SpecKind },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub win0: VertexSet,
    pub win1: VertexSet,
    /// A positional Player 0 strategy winning from every vertex of `win0`
    /// (fair Büchi only; empty otherwise).
    pub strategy0: BTreeMap<VertexId, VertexId>,
}

impl OracleResult {
    fn from_win0(g: &GameGraph, win0: VertexSet, strategy0: BTreeMap<VertexId, VertexId>) -> Self {
        let win1 = g.alive_set().difference(&win0);
        OracleResult { win0, win1, strategy0 }
    }

    fn swapped(self, g: &GameGraph) -> Self {
        OracleResult::from_win0(g, self.win1, BTreeMap::new())
    }
}

fn attractor(g: &GameGraph, alive: &VertexSet, player: Owner, target: &VertexSet) -> VertexSet {
    let mut a = target.intersection(alive);
    loop {
        let mut grew = false;
        for v in alive.iter() {
            if a.contains(v) {
                continue;
            }
            let mut inside = g.succ(v).iter().filter(|w| alive.contains(**w));
            let pulled = if g.owner(v) == player {
                inside.any(|w| a.contains(*w))
            } else {
                inside.all(|w| a.contains(*w))
            };
            if pulled {
                a.insert(v);
                grew = true;
            }
        }
        if !grew {
            return a;
        }
    }
}

/// Region where `player` can visit `target` infinitely often, ignoring fairness.
fn buchi_region(g: &GameGraph, player: Owner, target: &VertexSet) -> VertexSet {
    let mut alive = g.alive_set();
    loop {
        let reach = attractor(g, &alive, player, target);
        let trap = alive.difference(&reach);
        if trap.is_empty() {
            return alive;
        }
        let lost = attractor(g, &alive, player.opponent(), &trap);
        alive.difference_with(&lost);
    }
}

/// Exact regions of a game without fair vertices.
pub fn solve_normal(g: &GameGraph, spec: &Spec) -> Result<OracleResult, OracleError> {
    if g.vertices().any(|v| g.is_fair(v)) {
        return Err(OracleError::Unsupported { flavor: g.flavor(), kind: spec.kind });
    }
    let win0 = match spec.kind {
        SpecKind::Buchi => buchi_region(g, Owner::P0, &spec.set),
        SpecKind::CoBuchi => g.alive_set().difference(&buchi_region(g, Owner::P1, &spec.set)),
    };
    Ok(OracleResult::from_win0(g, win0, BTreeMap::new()))
}

/// Live vertices renumbered densely, adjacency as bitmasks.
struct Compact {
    ids: Vec<VertexId>,
    succ: Vec<u32>,
    fair: Vec<u32>,
    p0: Vec<usize>,
    b: u32,
}

impl Compact {
    fn new(g: &GameGraph, spec: &Spec) -> Self {
        let ids: Vec<VertexId> = g.vertices().collect();
        let mut local = vec![usize::MAX; g.capacity()];
        for (i, v) in ids.iter().enumerate() {
            local[v.index()] = i;
        }
        let mask = |ws: &[VertexId]| ws.iter().fold(0u32, |m, w| m | 1 << local[w.index()]);
        let succ = ids.iter().map(|v| mask(g.succ(*v))).collect();
        let fair = ids.iter().map(|v| mask(g.fair_succ(*v))).collect();
        let p0 = (0..ids.len()).filter(|i| g.owner(ids[*i]) == Owner::P0).collect();
        let b = ids
            .iter()
            .enumerate()
            .filter(|(_, v)| spec.contains(**v))
            .fold(0u32, |m, (i, _)| m | 1 << i);
        Compact { ids, succ, fair, p0, b }
    }

    fn strategy_count(&self) -> u64 {
        self.p0
            .iter()
            .map(|i| self.succ[*i].count_ones().max(1) as u64)
            .try_fold(1u64, |acc, d| acc.checked_mul(d))
            .unwrap_or(u64::MAX)
    }
}

fn bits(m: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |i| m >> i & 1 == 1)
}

fn strongly_connected(h: u32, next: &[u32]) -> bool {
    let root = 1u32 << h.trailing_zeros();
    let mut fwd = root;
    loop {
        let step = bits(fwd).fold(fwd, |m, i| m | (next[i] & h));
        if step == fwd {
            break;
        }
        fwd = step;
    }
    if fwd != h {
        return false;
    }
    let mut bwd = root;
    loop {
        let step = bits(h & !bwd).fold(bwd, |m, i| if next[i] & bwd != 0 { m | 1 << i } else { m });
        if step == bwd {
            break;
        }
        bwd = step;
    }
    bwd == h
}

/// Player 0's region of a fair Büchi game by strategy and subset enumeration.
pub fn solve_fair_buchi_bruteforce(g: &GameGraph, spec: &Spec) -> Result<OracleResult, OracleError> {
    if spec.kind != SpecKind::Buchi || g.flavor() == Flavor::Cofair {
        return Err(OracleError::Unsupported { flavor: g.flavor(), kind: spec.kind });
    }
    let c = Compact::new(g, spec);
    let n = c.ids.len();
    let strategies = c.strategy_count();
    if n > MAX_VERTICES || strategies > MAX_STRATEGIES {
        return Err(OracleError::TooLarge { vertices: n, strategies });
    }
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    // Subsets P1 might cycle in, before fixing Player 0's choices.
    let cands: Vec<u32> = (1..=full)
        .filter(|h| h & c.b == 0)
        .filter(|h| bits(*h).all(|i| c.succ[i] & h != 0 && c.fair[i] & !h == 0))
        .collect();
    let choices: Vec<Vec<usize>> = c.p0.iter().map(|i| bits(c.succ[*i]).collect()).collect();
    let mut digits = vec![0usize; c.p0.len()];
    let mut win0 = 0u32;
    let mut strategy = vec![None; n];
    loop {
        let mut next = c.succ.clone();
        for (k, i) in c.p0.iter().enumerate() {
            if let Some(t) = choices[k].get(digits[k]) {
                next[*i] = 1 << t;
            }
        }
        let mut bad = 0u32;
        for h in &cands {
            if bad & h == *h {
                continue;
            }
            if bits(*h).all(|i| next[i] & h != 0) && strongly_connected(*h, &next) {
                bad |= h;
            }
        }
        let mut reach = bad;
        loop {
            let step = bits(full & !reach).fold(reach, |m, i| if next[i] & reach != 0 { m | 1 << i } else { m });
            if step == reach {
                break;
            }
            reach = step;
        }
        let good = full & !reach;
        for i in bits(good & !win0) {
            if c.p0.contains(&i) {
                strategy[i] = Some(next[i].trailing_zeros() as usize);
            }
        }
        win0 |= good;
        // advance the mixed-radix counter
        let mut k = 0;
        loop {
            if k == digits.len() {
                let ids = &c.ids;
                let set = VertexSet::from_ids(g.capacity(), bits(win0).map(|i| ids[i]));
                let strat = strategy
                    .iter()
                    .enumerate()
                    .filter_map(|(i, t)| t.map(|t| (ids[i], ids[t])))
                    .collect();
                return Ok(OracleResult::from_win0(g, set, strat));
            }
            digits[k] += 1;
            if digits[k] < choices[k].len() {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}

/// Cofair coBüchi games are solved through their fair Büchi dual.
pub fn solve_cofair_cobuchi_bruteforce(g: &GameGraph, spec: &Spec) -> Result<OracleResult, OracleError> {
    if spec.kind != SpecKind::CoBuchi || g.flavor() == Flavor::Fair {
        return Err(OracleError::Unsupported { flavor: g.flavor(), kind: spec.kind });
    }
    let (d, ds) = dualize(g, spec);
    Ok(solve_fair_buchi_bruteforce(&d, &ds)?.swapped(g))
}

/// Dispatches on flavor and objective.
pub fn solve(g: &GameGraph, spec: &Spec) -> Result<OracleResult, OracleError> {
    match (g.flavor(), spec.kind) {
        (Flavor::Fair, SpecKind::Buchi) => solve_fair_buchi_bruteforce(g, spec),
        (Flavor::Cofair, SpecKind::CoBuchi) => solve_cofair_cobuchi_bruteforce(g, spec),
        (Flavor::Normal, _) => solve_normal(g, spec),
        (flavor, kind) => Err(OracleError::Unsupported { flavor, kind }),
    }
}

/// True iff no fair, `B`-avoiding lasso is reachable from `from` when Player 0
/// follows `policy` in a fair Büchi game. Player 0 vertices without an entry
/// may move anywhere.
pub fn check_policy(
    g: &GameGraph,
    spec: &Spec,
    policy: &BTreeMap<VertexId, VertexId>,
    from: VertexId,
) -> bool {
    let next = |v: VertexId| -> Vec<VertexId> {
        match policy.get(&v) {
            Some(w) if g.owner(v) == Owner::P0 && g.has_edge(v, *w) => vec![*w],
            _ => g.succ(v).to_vec(),
        }
    };
    let mut reach = VertexSet::empty(g.capacity());
    let mut stack = vec![from];
    reach.insert(from);
    while let Some(v) = stack.pop() {
        for w in next(v) {
            if reach.insert(w) {
                stack.push(w);
            }
        }
    }
    let mut cand = reach.difference(&spec.set);
    loop {
        let mut graph = DiGraph::<VertexId, ()>::new();
        let mut node = vec![NodeIndex::end(); g.capacity()];
        for v in cand.iter() {
            node[v.index()] = graph.add_node(v);
        }
        for v in cand.iter() {
            for w in next(v) {
                if cand.contains(w) {
                    graph.add_edge(node[v.index()], node[w.index()], ());
                }
            }
        }
        let mut comp = vec![usize::MAX; g.capacity()];
        let sccs = tarjan_scc(&graph);
        for (k, scc) in sccs.iter().enumerate() {
            for n in scc {
                comp[graph[*n].index()] = k;
            }
        }
        let mut drop = Vec::new();
        for scc in &sccs {
            let trivial = scc.len() == 1 && {
                let v = graph[scc[0]];
                !next(v).contains(&v)
            };
            for n in scc {
                let v = graph[*n];
                let leaks = g.fair_succ(v).iter().any(|w| !cand.contains(*w) || comp[w.index()] != comp[v.index()]);
                if trivial || leaks {
                    drop.push(v);
                }
            }
        }
        if drop.is_empty() {
            return cand.is_empty();
        }
        for v in drop {
            cand.remove(v);
        }
    }
}
