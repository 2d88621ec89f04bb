//! Small reference games and random instance generators shared by tests,
//! benches and the CLI.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::abstraction::{ApproxTable, PairSets};
use crate::game::{dualize, Flavor, GameGraph, Owner, Spec, VertexId};
use crate::grid::CellId;
use crate::learning::InputId;
use crate::set::VertexSet;

/// Cells of the four-state running example; the sink is cell 4.
pub const V0: CellId = CellId(0);
pub const V1: CellId = CellId(1);
pub const SMILE: CellId = CellId(2);
pub const FROWN: CellId = CellId(3);
/// The single input, "forward".
pub const FW: InputId = InputId(0);

fn pair(under: &[CellId], over: &[CellId]) -> PairSets {
    PairSets::new(under.to_vec(), over.to_vec()).expect("under within over")
}

/// Running example before refinement: from `v1` the car may drift into the frowny cell.
pub fn running_table() -> ApproxTable {
    let mut t = ApproxTable::new(4, 1);
    t.set(V0, FW, pair(&[V1], &[V0, V1])).unwrap();
    t.set(V1, FW, pair(&[SMILE], &[V1, SMILE, FROWN])).unwrap();
    t.set(SMILE, FW, pair(&[SMILE], &[SMILE])).unwrap();
    t.set(FROWN, FW, pair(&[FROWN], &[FROWN])).unwrap();
    t
}

/// Running example after new data rules out the frowny cell from `v1`.
pub fn running_refined_table() -> ApproxTable {
    let mut t = running_table();
    t.set(V1, FW, pair(&[SMILE], &[V1, SMILE])).unwrap();
    t
}

pub fn running_goals() -> Vec<CellId> {
    vec![SMILE]
}

/// Parameters for [`random_fair_game`].
#[derive(Debug, Clone, Copy)]
pub struct GameShape {
    pub vertices: usize,
    pub edge_prob: f64,
    pub fair_prob: f64,
    pub buchi_prob: f64,
}

impl GameShape {
    pub fn small(vertices: usize) -> Self {
        GameShape { vertices, edge_prob: 0.3, fair_prob: 0.4, buchi_prob: 0.3 }
    }
}

/// Random fair Büchi game: fair edges leave Player 1 vertices only, and every
/// vertex has at least one successor.
pub fn random_fair_game<R: Rng>(rng: &mut R, shape: GameShape) -> (GameGraph, Spec) {
    let n = shape.vertices;
    let mut g = GameGraph::with_capacity(Flavor::Fair, n);
    for _ in 0..n {
        g.add_vertex(if rng.gen_bool(0.5) { Owner::P0 } else { Owner::P1 });
    }
    for i in 0..n {
        let v = VertexId(i as u32);
        let fair_src = g.owner(v) == Owner::P1 && rng.gen_bool(shape.fair_prob);
        let mut any = false;
        for j in 0..n {
            if rng.gen_bool(shape.edge_prob) {
                let w = VertexId(j as u32);
                if fair_src && rng.gen_bool(0.6) {
                    g.add_fair_edge(v, w).unwrap();
                } else {
                    g.add_edge(v, w).unwrap();
                }
                any = true;
            }
        }
        if !any {
            let w = VertexId(rng.gen_range(0..n) as u32);
            if fair_src {
                g.add_fair_edge(v, w).unwrap();
            } else {
                g.add_edge(v, w).unwrap();
            }
        }
    }
    let b = VertexSet::from_ids(n, (0..n as u32).map(VertexId).filter(|_| rng.gen_bool(shape.buchi_prob)));
    (g, Spec::buchi(b))
}

/// Random cofair coBüchi game, the dual of a random fair Büchi game.
pub fn random_cofair_game<R: Rng>(rng: &mut R, shape: GameShape) -> (GameGraph, Spec) {
    let (g, s) = random_fair_game(rng, shape);
    dualize(&g, &s)
}

fn random_subset<R: Rng>(rng: &mut R, from: &[CellId], p: f64) -> Vec<CellId> {
    from.iter().copied().filter(|_| rng.gen_bool(p)).collect()
}

/// Random approximation table over `cells` grid cells; some cells are made
/// absorbing with probability `absorbing_prob`.
pub fn random_table<R: Rng>(rng: &mut R, cells: usize, inputs: usize, absorbing_prob: f64) -> ApproxTable {
    let mut t = ApproxTable::new(cells, inputs);
    let all: Vec<CellId> = (0..=cells as u32).map(CellId).collect();
    for s in 0..cells as u32 {
        let s = CellId(s);
        if rng.gen_bool(absorbing_prob) {
            t.set_absorbing(s).unwrap();
            continue;
        }
        for u in 0..inputs as u32 {
            let mut over = random_subset(rng, &all, 0.4);
            if over.is_empty() {
                over.push(*all.choose(rng).unwrap());
            }
            let grid_over: Vec<CellId> = over.iter().copied().filter(|c| c.index() < cells).collect();
            let under = random_subset(rng, &grid_over, 0.4);
            t.set(s, InputId(u), PairSets::new(under, over).unwrap()).unwrap();
        }
    }
    t
}

/// A monotone refinement of `t`: each pair may promote extras into the under
/// set and drop extras from the over set.
pub fn refine_table<R: Rng>(rng: &mut R, t: &ApproxTable, p: f64) -> ApproxTable {
    let mut out = t.clone();
    for s in 0..t.cells() as u32 {
        for u in 0..t.inputs() as u32 {
            let (s, u) = (CellId(s), InputId(u));
            let Some(e) = t.get(s, u) else { continue };
            let mut under = e.under.clone();
            let mut over = e.over.clone();
            for x in e.extras() {
                if !rng.gen_bool(p) {
                    continue;
                }
                if x != t.sink() && rng.gen_bool(0.5) {
                    under.push(x);
                } else if over.len() > 1 {
                    over.retain(|c| *c != x);
                }
            }
            out.set(s, u, PairSets::new(under, over).unwrap()).unwrap();
        }
    }
    out
}

/// Random goal cells, never the sink.
pub fn random_goals<R: Rng>(rng: &mut R, t: &ApproxTable, p: f64) -> Vec<CellId> {
    (0..t.cells() as u32).map(CellId).filter(|_| rng.gen_bool(p)).collect()
}
