//! Checks shared by the acceptance harness and the differential tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use fairlift::abstraction::VertexRole;
use fairlift::fixtures::{random_goals, random_table, refine_table};
use fairlift::game::dualize;
use fairlift::learning::{bounds_at_point, cell_reach_boxes, BoxStatus, ReachBoxes};
use fairlift::oracle;
use fairlift::pm::{gadgetize, pm_range, solve_from_scratch, RangeHint};
use fairlift::sim::{Model, Noise, Region, Scenario, ShiftModel};
use fairlift::*;
use rand::seq::SliceRandom;
use rand::Rng;

pub type Check = Result<(), String>;

fn ids(s: &VertexSet) -> Vec<u32> {
    s.iter().map(|v| v.0).collect()
}

fn same(what: &str, a: &VertexSet, b: &VertexSet) -> Check {
    if a == b {
        Ok(())
    } else {
        Err(format!("{what}: {:?} vs {:?}", ids(a), ids(b)))
    }
}

/// Oracle, ψ, Ψ and both lifting flavors agree on a fair Büchi game, and the
/// ψ iteration ranks equal the least fixpoint vertex for vertex.
pub fn check_fair_game(g: &GameGraph, spec: &Spec) -> Check {
    let truth = oracle::solve(g, spec).map_err(|e| e.to_string())?.win0;
    let psi = solve_psi(g, spec).map_err(|e| e.to_string())?;
    same("psi", &truth, &g.alive_set().difference(&psi.win1))?;
    same("big psi", &truth, &solve_big_psi(g, spec).map_err(|e| e.to_string())?)?;

    let range = pm_range(g, spec, RangeHint::General);
    let direct = solve_from_scratch(g, spec, PmFlavor::FairBuchiDirect, range).map_err(|e| e.to_string())?;
    same("direct lifting", &truth, &direct.rho.top_set(g))?;
    let from_psi = psi.rho(g, range).map_err(|e| e.to_string())?;
    if !from_psi.eq_on(&direct.rho, g) {
        return Err(format!("rank measure {:?} vs lifting {:?}", from_psi.values(), direct.rho.values()));
    }

    let (d, ds) = dualize(g, spec);
    let cofair = solve_from_scratch(&d, &ds, PmFlavor::CofairCoBuchi, range).map_err(|e| e.to_string())?;
    same("cofair lifting on dual", &truth, &cofair.rho.top_set(&d))?;
    if !cofair.rho.eq_on(&direct.rho, g) {
        return Err("cofair measure on the dual differs from the direct one".into());
    }
    let dual_truth = oracle::solve(&d, &ds).map_err(|e| e.to_string())?.win1;
    same("dual oracle", &truth, &dual_truth)?;
    check_gadget(&d, &ds)
}

/// Gadget sizes and regions for a cofair coBüchi game.
pub fn check_gadget(g: &GameGraph, spec: &Spec) -> Check {
    let k = g.vertices().filter(|v| g.is_fair(*v) && !spec.contains(*v)).count();
    let b = g.vertices().filter(|v| spec.contains(*v)).count();
    let gd = gadgetize(g, spec).map_err(|e| e.to_string())?;
    let (gv, gb) = (gd.graph.vertex_count(), gd.graph.vertices().filter(|v| gd.spec.contains(*v)).count());
    if gv != g.vertex_count() + 2 * k || gb != b + k {
        return Err(format!("gadget has {gv} vertices and {gb} in B', expected {} and {}", g.vertex_count() + 2 * k, b + k));
    }
    let direct_range = pm_range(g, spec, RangeHint::General);
    let direct = solve_from_scratch(g, spec, PmFlavor::CofairCoBuchi, direct_range).map_err(|e| e.to_string())?;
    let top = direct.rho.top_set(g);
    let plain_range = pm_range(&gd.graph, &gd.spec, RangeHint::General);
    let plain = solve_from_scratch(&gd.graph, &gd.spec, PmFlavor::PlainCoBuchi, plain_range).map_err(|e| e.to_string())?;
    let plain_top = plain.rho.top_set(&gd.graph).intersection(&g.alive_set());
    let mut plain_top_small = VertexSet::empty(g.capacity());
    for v in plain_top.iter() {
        plain_top_small.insert(v);
    }
    same("gadget lifting", &top, &plain_top_small)?;
    let normal = oracle::solve_normal(&gd.graph, &gd.spec).map_err(|e| e.to_string())?;
    let mut normal_win1 = VertexSet::empty(g.capacity());
    for v in normal.win1.iter().filter(|v| v.index() < g.capacity()) {
        normal_win1.insert(v);
    }
    same("gadget oracle", &top, &normal_win1)?;
    let brute = oracle::solve(g, spec).map_err(|e| e.to_string())?;
    same("cofair oracle", &top, &brute.win1)
}

/// A random contraction-like map with componentwise L∞ Lipschitz constant at most `l`.
pub struct RandomDynamics {
    pub offset: Vec<f64>,
    pub gain: Vec<f64>,
    pub source: Vec<usize>,
}

impl RandomDynamics {
    pub fn new<R: Rng>(rng: &mut R, n: usize, l: f64) -> Self {
        RandomDynamics {
            offset: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            gain: (0..n).map(|_| rng.gen_range(-l..=l)).collect(),
            source: (0..n).map(|_| rng.gen_range(0..n)).collect(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len()).map(|i| self.offset[i] + self.gain[i] * x[self.source[i]]).collect()
    }
}

fn covers(outer: &HyperBox, inner: &HyperBox) -> bool {
    inner.is_empty() || outer.contains_box(inner)
}

fn boxes_refine(before: &ReachBoxes, after: &ReachBoxes) -> bool {
    match (before.status, after.status) {
        (BoxStatus::Ok, BoxStatus::Ok) => covers(&before.over, &after.over) && covers(&after.under, &before.under),
        (BoxStatus::Ok, _) => false,
        _ => true,
    }
}

/// Appending samples never loosens the point bounds, the reach boxes, or the
/// abstract sets. Returns the number of comparisons made.
pub fn check_learning_monotone<R: Rng>(rng: &mut R) -> Result<usize, String> {
    let n = rng.gen_range(1..=3usize);
    let per_dim: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=4)).collect();
    let hi: Vec<f64> = per_dim.iter().map(|k| *k as f64).collect();
    let domain = HyperBox::new(vec![0.0; n], hi.clone());
    let grid = GridPartition::new(domain.clone(), per_dim).map_err(|e| e.to_string())?;
    let inputs = rng.gen_range(1..=2usize);
    let l = rng.gen_range(0.2..1.5);
    let w = rng.gen_range(0.05..0.6);
    let cfg = LearnerConfig::new(l, NoiseSupport::uniform(n, -w, w).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let dyns: Vec<RandomDynamics> = (0..inputs).map(|_| RandomDynamics::new(rng, n, l)).collect();
    let total = rng.gen_range(2..40usize);
    let mut samples = Vec::with_capacity(total);
    for _ in 0..total {
        let u = rng.gen_range(0..inputs);
        let x: Vec<f64> = hi.iter().map(|h| rng.gen_range(0.0..=*h)).collect();
        let y: Vec<f64> = dyns[u].apply(&x).into_iter().map(|v| v + rng.gen_range(-w..=w)).collect();
        samples.push(Sample::new(x, InputId(u as u32), y));
    }
    let cut = rng.gen_range(1..total);
    let mut early = Dataset::new(n, inputs);
    early.extend(samples[..cut].iter().cloned()).map_err(|e| e.to_string())?;
    let mut late = early.clone();
    late.extend(samples[cut..].iter().cloned()).map_err(|e| e.to_string())?;
    let policy = if rng.gen_bool(0.5) { DomainPolicy::Sink } else { DomainPolicy::Clip };
    let tol = 1e-9;
    let mut checks = 0;
    for u in 0..inputs as u32 {
        let u = InputId(u);
        for _ in 0..4 {
            let x: Vec<f64> = hi.iter().map(|h| rng.gen_range(-0.5..=*h + 0.5)).collect();
            let (Ok(a), Ok(b)) = (bounds_at_point(&x, u, &early, &cfg), bounds_at_point(&x, u, &late, &cfg)) else {
                continue;
            };
            for i in 0..n {
                if b.check_f[i] + tol < a.check_f[i] || b.hat_f[i] > a.hat_f[i] + tol {
                    return Err(format!("point bounds loosened at {x:?}, input {}", u.0));
                }
            }
            checks += 1;
        }
        let before = ReachLearner::from_dataset(cfg.clone(), &grid, &early).map_err(|e| e.to_string())?;
        let after = ReachLearner::from_dataset(cfg.clone(), &grid, &late).map_err(|e| e.to_string())?;
        let shell = ApproxTable::new(grid.cell_count(), inputs);
        for s in grid.cells() {
            let cell = grid.cell_box(s);
            let (rb, ra) = (cell_reach_boxes(u, &early, &cfg, &cell, &domain), cell_reach_boxes(u, &late, &cfg, &cell, &domain));
            if !boxes_refine(&rb, &ra) {
                return Err(format!("reach boxes loosened for cell {} input {}", s.0, u.0));
            }
            let tb = shell.learned_entry(&before, &grid, s, u, policy);
            let ta = shell.learned_entry(&after, &grid, s, u, policy);
            let under_grows = tb.under.iter().all(|c| ta.under.contains(c));
            let over_shrinks = ta.over.iter().all(|c| tb.over.contains(c));
            if !under_grows || !over_shrinks {
                return Err(format!("abstract sets loosened for cell {} input {}: {tb:?} -> {ta:?}", s.0, u.0));
            }
            checks += 1;
        }
    }
    Ok(checks)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct DeltaTally {
    pub deltas: usize,
    /// Branch vertices that gained fair edges and left Player 0's region.
    pub lowered_exits: usize,
}

/// Applies each atomic delta of a random refinement one at a time and checks
/// with the oracle that Player 0's region never shrinks on surviving vertices,
/// except at branch vertices the delta gave new fair edges.
pub fn check_delta_monotone<R: Rng>(rng: &mut R) -> Result<DeltaTally, String> {
    let cells = rng.gen_range(1..=3usize);
    let inputs = rng.gen_range(1..=2usize);
    let table = random_table(rng, cells, inputs, 0.2);
    let goals = random_goals(rng, &table, 0.4);
    let mut abs = build_abstract_game(&table, &goals).map_err(|e| e.to_string())?;
    let mut tally = DeltaTally::default();
    if abs.game.vertex_count() > oracle::MAX_VERTICES {
        return Ok(tally);
    }
    let refined = refine_table(rng, &table, 0.6);
    let deltas = diff_approx(&table, &refined).map_err(|e| e.to_string())?;
    let mut before = oracle::solve(&abs.game, &abs.spec).map_err(|e| e.to_string())?.win0;
    for d in &deltas {
        let effect = apply_delta(&mut abs, d).map_err(|e| e.to_string())?;
        let after = oracle::solve(&abs.game, &abs.spec).map_err(|e| e.to_string())?.win0;
        let mut kept = before.intersection(&abs.game.alive_set());
        for v in &effect.lowered {
            if kept.remove(*v) && !after.contains(*v) {
                tally.lowered_exits += 1;
            }
        }
        if !kept.is_subset(&after) {
            return Err(format!("{d:?} shrank Win0 from {:?} to {:?}", ids(&before), ids(&after)));
        }
        tally.deltas += 1;
        before = after;
    }
    let fresh = build_abstract_game(&refined, &goals).map_err(|e| e.to_string())?;
    let fresh_win = oracle::solve(&fresh.game, &fresh.spec).map_err(|e| e.to_string())?.win0;
    let (a, b) = (abs.cells_in(&before), fresh.cells_in(&fresh_win));
    if a != b {
        return Err(format!("patched game wins {a:?}, rebuilt game wins {b:?}"));
    }
    Ok(tally)
}

/// Small translation-dynamics scenario on at most 6×6 unit cells.
pub fn random_small_scenario<R: Rng>(rng: &mut R) -> Scenario {
    let two_d = rng.gen_bool(0.6);
    let per_dim: Vec<usize> = if two_d {
        vec![rng.gen_range(2..=6), rng.gen_range(2..=6)]
    } else {
        vec![rng.gen_range(2..=6)]
    };
    let n = per_dim.len();
    let hi: Vec<f64> = per_dim.iter().map(|k| *k as f64).collect();
    let k = rng.gen_range(1..=3usize);
    let moves: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..n).map(|_| rng.gen_range(-1i32..=1) as f64 * rng.gen_range(0.5..1.2)).collect())
        .collect();
    let w = rng.gen_range(0.1..0.6);
    let unit = |c: &[usize]| Region::new(c.iter().map(|x| *x as f64 + 0.2).collect(), c.iter().map(|x| *x as f64 + 0.8).collect());
    let pick = |rng: &mut R| -> Vec<usize> { per_dim.iter().map(|k| rng.gen_range(0..*k)).collect() };
    let goal = pick(rng);
    let mut obstacles = Vec::new();
    if rng.gen_bool(0.5) {
        let o = pick(rng);
        if o != goal {
            obstacles.push(unit(&o));
        }
    }
    Scenario {
        name: "small".into(),
        domain: Region::new(vec![0.0; n], hi),
        cells_per_dim: per_dim.clone(),
        model: Model::Shift(ShiftModel { moves }),
        noise: Noise::Uniform { lo: vec![-w; n], hi: vec![w; n] },
        lipschitz: if rng.gen_bool(0.5) { 1.0 } else { 1.25 },
        obstacles,
        goals: vec![unit(&goal)],
        initial: Vec::new(),
        low_data: Vec::new(),
        budget: 0,
        low_budget: 0,
        stage_budget: 0,
        walls: rng.gen_bool(0.5),
        seed: rng.gen(),
    }
}

fn random_batch<R: Rng>(rng: &mut R, scn: &Scenario, grid: &GridPartition, obstacles: &[CellId]) -> Vec<Sample> {
    let cells: Vec<CellId> = grid.cells().filter(|c| !obstacles.contains(c)).collect();
    let count = rng.gen_range(1..=12usize);
    (0..count)
        .map(|_| {
            let c = *cells.choose(rng).expect("a free cell");
            let u = InputId(rng.gen_range(0..scn.model.inputs()) as u32);
            scn.sample_in(&grid.cell_box(c), u, rng)
        })
        .collect()
}

/// Streams random batches into a session and compares it after every step to
/// a fresh solve on the cumulative data and to lifting from zero on the
/// patched game. Returns the number of steps checked.
pub fn check_streaming_schedule<R: Rng>(rng: &mut R, influence_filter: bool) -> Result<usize, String> {
    let scn = random_small_scenario(rng);
    let grid = scn.grid().map_err(|e| e.to_string())?;
    let obstacles = scn.obstacle_cells().map_err(|e| e.to_string())?;
    let goals = scn.goal_cells().map_err(|e| e.to_string())?;
    let cfg = scn.learner_config().map_err(|e| e.to_string())?;
    let mut opts = scn.session_options().map_err(|e| e.to_string())?;
    opts.influence_filter = influence_filter;
    let mut data = Dataset::new(grid.dim(), scn.model.inputs());
    let first = rng.gen_range(0..3);
    for _ in 0..first {
        data.extend(random_batch(rng, &scn, &grid, &obstacles)).map_err(|e| e.to_string())?;
    }
    let mut session = SynthesisSession::initialise(data, cfg.clone(), grid.clone(), goals.clone(), opts.clone())
        .map_err(|e| e.to_string())?;
    let steps = rng.gen_range(2..=6);
    for k in 0..steps {
        let batch = random_batch(rng, &scn, &grid, &obstacles);
        session.step(&batch).map_err(|e| e.to_string())?;
        let fresh = SynthesisSession::initialise(session.dataset().clone(), cfg.clone(), grid.clone(), goals.clone(), opts.clone())
            .map_err(|e| e.to_string())?;
        if fresh.win0() != session.win0() {
            return Err(format!("step {k}: warm region {:?} vs fresh {:?}", session.win0(), fresh.win0()));
        }
        let warm = session.game();
        let index: BTreeMap<VertexRole, VertexId> = fresh.game().role_index();
        for v in warm.game.vertices() {
            let role = warm.role(v);
            let Some(w) = index.get(&role) else {
                let redundant = matches!(role, VertexRole::Branch(s, u, Some(t))
                    if warm.pair(s, u).is_some_and(|p| p.under.contains(&t)));
                if redundant {
                    continue;
                }
                return Err(format!("step {k}: warm vertex {role:?} missing from the fresh game"));
            };
            if session.rho().get(v) != fresh.rho().get(*w) {
                return Err(format!(
                    "step {k}: {role:?} has warm value {:?}, fresh {:?}",
                    session.rho().get(v),
                    fresh.rho().get(*w)
                ));
            }
        }
        let range = session.rho().range();
        let scratch = solve_from_scratch(&warm.game, &warm.spec, PmFlavor::FairBuchiDirect, range).map_err(|e| e.to_string())?;
        if !scratch.rho.eq_on(session.rho(), &warm.game) {
            return Err(format!("step {k}: warm measure differs from lifting from zero on the patched game"));
        }
    }
    Ok(steps)
}

/// Both range choices give the same ⊤-set on the dual of an abstract game.
pub fn check_range_choice<R: Rng>(rng: &mut R) -> Check {
    let cells = rng.gen_range(1..=6usize);
    let inputs = rng.gen_range(1..=3usize);
    let table = random_table(rng, cells, inputs, 0.15);
    let goals = random_goals(rng, &table, 0.3);
    let abs = build_abstract_game(&table, &goals).map_err(|e| e.to_string())?;
    let (d, ds) = dualize(&abs.game, &abs.spec);
    let general = pm_range(&d, &ds, RangeHint::General);
    let compact = pm_range(&d, &ds, RangeHint::AbstractDual { states: abs.states() });
    let a = solve_from_scratch(&d, &ds, PmFlavor::CofairCoBuchi, general).map_err(|e| e.to_string())?;
    let b = solve_from_scratch(&d, &ds, PmFlavor::CofairCoBuchi, compact).map_err(|e| e.to_string())?;
    same("range choice", &a.rho.top_set(&d), &b.rho.top_set(&d))?;
    let psi = solve_psi(&abs.game, &abs.spec).map_err(|e| e.to_string())?;
    same("range choice vs psi", &a.rho.top_set(&d), &abs.game.alive_set().difference(&psi.win1))
}
