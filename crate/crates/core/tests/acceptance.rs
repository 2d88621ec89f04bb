//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use fairlift::abstraction::VertexRole;
use fairlift::bench::{bench_protocol, repeated_stages, BenchRow};
use fairlift::fixtures::{self, random_cofair_game, random_fair_game, GameShape};
use fairlift::pm::{solve_by_lifting, WorklistOrder};
use fairlift::sim::arena;
use fairlift::oracle;
use fairlift::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed_0000 + tag)
}

fn shape(rng: &mut ChaCha8Rng, max: usize) -> GameShape {
    GameShape {
        vertices: rng.gen_range(1..=max),
        edge_prob: rng.gen_range(0.15..0.5),
        fair_prob: rng.gen_range(0.2..0.8),
        buchi_prob: rng.gen_range(0.1..0.5),
    }
}

fn solvers_agree() -> Outcome {
    let mut r = rng(1);
    let (mut checked, mut skipped) = (0, 0);
    while checked < 10_000 {
        let sh = shape(&mut r, 10);
        let (g, spec) = random_fair_game(&mut r, sh);
        if oracle::solve(&g, &spec).is_err() {
            skipped += 1;
            continue;
        }
        common::check_fair_game(&g, &spec).map_err(|e| format!("game {checked}: {e}"))?;
        checked += 1;
    }
    Ok(format!("{checked} fair games and their duals ({skipped} too large for enumeration skipped)"))
}

fn gadget_agrees() -> Outcome {
    let mut r = rng(2);
    let games = 5_000;
    for i in 0..games {
        let sh = shape(&mut r, 8);
        let (g, spec) = random_cofair_game(&mut r, sh);
        common::check_gadget(&g, &spec).map_err(|e| format!("game {i}: {e}"))?;
    }
    Ok(format!("{games} cofair coBüchi games"))
}

fn learning_monotone() -> Outcome {
    let mut r = rng(3);
    let mut checks = 0;
    let datasets = 1_000;
    for i in 0..datasets {
        checks += common::check_learning_monotone(&mut r).map_err(|e| format!("dataset {i}: {e}"))?;
    }
    Ok(format!("{datasets} datasets, {checks} comparisons"))
}

fn deltas_monotone() -> Outcome {
    let mut r = rng(4);
    let (mut deltas, mut exits, mut tables) = (0, 0, 0);
    while deltas < 1_000 {
        let t = common::check_delta_monotone(&mut r).map_err(|e| format!("table {tables}: {e}"))?;
        deltas += t.deltas;
        exits += t.lowered_exits;
        tables += 1;
    }
    Ok(format!(
        "{deltas} deltas from {tables} refinements; states and choices never leave Win0, \
         {exits} branch vertices that gained fair edges did"
    ))
}

fn warm_equals_scratch() -> Outcome {
    let mut r = rng(5);
    let schedules = 200;
    let mut steps = 0;
    for i in 0..schedules {
        steps += common::check_streaming_schedule(&mut r, i % 4 == 3).map_err(|e| format!("schedule {i}: {e}"))?;
    }
    Ok(format!("{schedules} schedules, {steps} steps"))
}

fn running_example() -> Outcome {
    let goals = fixtures::running_goals();
    let mut abs = build_abstract_game(&fixtures::running_table(), &goals).map_err(|e| e.to_string())?;
    let v0 = abs.state_vertex(fixtures::V0);
    let sol = solve_psi(&abs.game, &abs.spec).map_err(|e| e.to_string())?;
    if !sol.win1.contains(v0) {
        return Err("v0 wins before refinement".into());
    }
    let range = fairlift::pm::pm_range(&abs.game, &abs.spec, fairlift::pm::RangeHint::AbstractDual { states: abs.states() });
    let rho = sol.rho(&abs.game, range).map_err(|e| e.to_string())?;
    let deltas = diff_approx(&fixtures::running_table(), &fixtures::running_refined_table()).map_err(|e| e.to_string())?;
    let removals = deltas.iter().filter(|d| matches!(d, GraphDelta::RemoveBranch { .. })).count();
    if deltas.len() != 1 || removals != 1 {
        return Err(format!("expected one removal, got {deltas:?}"));
    }
    let mut seed = Vec::new();
    for d in &deltas {
        seed.extend(apply_delta(&mut abs, d).map_err(|e| e.to_string())?.touched);
    }
    let out = solve_by_lifting(&abs.game, &abs.spec, PmFlavor::FairBuchiDirect, rho, seed, WorklistOrder::Fifo)
        .map_err(|e| e.to_string())?;
    if !out.rho.get(v0).is_top() {
        return Err("v0 still loses after refinement".into());
    }
    let policy = synth_controller(&abs, &out.rho.top_set(&abs.game)).map_err(|e| e.to_string())?;
    for s in [fixtures::V0, fixtures::V1] {
        if policy.get(s).map_err(|e| e.to_string())? != fixtures::FW {
            return Err(format!("cell {} does not move forward", s.0));
        }
    }
    if !matches!(abs.role(v0), VertexRole::State(_)) {
        return Err("state vertex has the wrong role".into());
    }
    Ok("v0 loses, one branch removal, v0 wins with π(v0) = π(v1) = fw".into())
}

fn bench_rows() -> Result<(SynthesisSession, Vec<BenchRow>), String> {
    let scn = arena();
    let stages = repeated_stages(&scn, 5).map_err(|e| e.to_string())?;
    bench_protocol(&scn, &stages).map_err(|e| e.to_string())
}

fn incremental_speedup(rows: &[BenchRow]) -> Outcome {
    let table: Vec<String> = rows
        .iter()
        .map(|r| format!("{} {}d {:.3}s/{:.3}s", r.stage, r.deltas, r.incremental_s, r.recompute_s))
        .collect();
    if rows.len() != 5 || !rows.iter().all(|r| r.regions_equal) {
        return Err(format!("regions differ: {table:?}"));
    }
    let fast = rows.iter().filter(|r| r.incremental_s <= r.recompute_s / 2.0).count();
    if fast < 4 {
        return Err(format!("only {fast}/5 rows at half the recompute time: {table:?}"));
    }
    Ok(format!("{fast}/5 rows fast; {}", table.join(", ")))
}

fn closed_loop(session: &SynthesisSession) -> Outcome {
    let scn = arena();
    let grid = scn.grid().map_err(|e| e.to_string())?;
    let goals = scn.goal_cells().map_err(|e| e.to_string())?;
    let obstacles = scn.obstacle_cells().map_err(|e| e.to_string())?;
    let candidates: Vec<CellId> = session
        .win0()
        .iter()
        .copied()
        .filter(|c| goals.binary_search(c).is_err() && obstacles.binary_search(c).is_err())
        .collect();
    if candidates.len() < 20 {
        return Err(format!("only {} winning start cells", candidates.len()));
    }
    let step = candidates.len() / 20;
    let starts: Vec<CellId> = (0..20).map(|i| candidates[i * step]).collect();
    let mut r = rng(8);
    let (mut runs, mut good, mut hits) = (0, 0, 0);
    for s in &starts {
        let b = grid.cell_box(*s);
        for _ in 0..50 {
            let x0: Vec<f64> = (0..b.dim()).map(|d| r.gen_range(b.lo[d]..b.hi[d])).collect();
            let t = scn
                .rollout(|x| session.controller_lookup(x), &x0, 500, &mut r)
                .map_err(|e| e.to_string())?;
            runs += 1;
            hits += t.obstacle_hits;
            if t.goal_visits >= 5 {
                good += 1;
            }
        }
    }
    if hits > 0 || good * 100 < runs * 99 {
        return Err(format!("{good}/{runs} runs with 5 goal visits, {hits} obstacle hits"));
    }
    Ok(format!("{good}/{runs} runs from 20 cells reach the goal 5 times, 0 obstacle hits"))
}

fn range_choice() -> Outcome {
    let mut r = rng(9);
    let games = 500;
    for i in 0..games {
        common::check_range_choice(&mut r).map_err(|e| format!("game {i}: {e}"))?;
    }
    Ok(format!("{games} abstract-game duals"))
}

fn main() -> ExitCode {
    let t0 = Instant::now();
    let mut failed = 0;
    let mut report = |n: u32, name: &str, out: Outcome| {
        match out {
            Ok(detail) => println!("PASS {n} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {n} {name}: {why}");
            }
        }
    };
    report(1, "oracle, fixpoints and lifting agree", solvers_agree());
    report(2, "gadget reduction", gadget_agrees());
    report(3, "learning monotone in data", learning_monotone());
    report(4, "atomic deltas never shrink Win0", deltas_monotone());
    report(5, "warm start equals scratch", warm_equals_scratch());
    report(6, "running example", running_example());
    match bench_rows() {
        Ok((session, rows)) => {
            report(7, "incremental speedup", incremental_speedup(&rows));
            report(8, "closed-loop rollouts", closed_loop(&session));
        }
        Err(e) => {
            report(7, "incremental speedup", Err(e.clone()));
            report(8, "closed-loop rollouts", Err(e));
        }
    }
    report(9, "range choice", range_choice());
    println!("acceptance finished in {:.1}s", t0.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
