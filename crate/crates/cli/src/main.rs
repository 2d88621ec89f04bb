use std::fmt::Display;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairlift::abstraction::AbstractGameDump;
use fairlift::bench::{bench_protocol, repeated_stages, room_stages, write_rows};
use fairlift::pm::{pm_range, PmDump, RangeHint};
use fairlift::session::SessionCheckpoint;
use fairlift::sim::{self, Noise, Region, Scenario};
use fairlift::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "fairlift", version, about = "Learn, abstract and solve fair Büchi games from samples")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Global {
    /// RNG seed; overrides a scenario's own seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid as `lo:hi:n` per dimension, comma separated.
    #[arg(long, global = true)]
    grid: Option<String>,
    #[arg(long, global = true)]
    lipschitz: Option<f64>,
    /// Noise support `lo,hi`, applied to every dimension.
    #[arg(long, global = true, allow_hyphen_values = true)]
    noise: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Dataset → approximation table (JSON).
    Learn {
        #[arg(long)]
        data: PathBuf,
        /// Absorbing cells, comma separated.
        #[arg(long, default_value = "")]
        absorbing: String,
        /// Treat the domain as walled: clip reach boxes instead of adding the sink.
        #[arg(long)]
        clip: bool,
    },
    /// Approximation table → abstract game (JSON).
    Abstract {
        #[arg(long)]
        table: PathBuf,
        /// Goal cells, comma separated.
        #[arg(long)]
        goals: String,
    },
    /// Game dump or session → winning cells (JSON list).
    Solve {
        #[arg(long, conflicts_with = "session", required_unless_present = "session")]
        game: Option<PathBuf>,
        #[arg(long)]
        session: Option<PathBuf>,
        /// Re-initialise the session from its cumulative data instead of reading its measure.
        #[arg(long, requires = "session")]
        fresh: bool,
        /// Also write the progress measure here.
        #[arg(long)]
        pm: Option<PathBuf>,
    },
    /// Session checkpoint + new samples → step report; the checkpoint is updated.
    Increment {
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Write the updated checkpoint here instead of over `--session`.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Scenario-driven data generation, session set-up and rollouts.
    Simulate {
        /// Preset name (arena, apartment, tiny) or a scenario JSON file.
        #[arg(long)]
        scenario: String,
        #[command(subcommand)]
        what: SimCommand,
    },
    /// Incremental-vs-fresh timing rows (CSV).
    Bench {
        #[arg(long)]
        scenario: String,
        /// Revisit the first low-data region this many times instead of one stage per region.
        #[arg(long)]
        rounds: Option<usize>,
    },
}

#[derive(Subcommand)]
enum SimCommand {
    /// Write the scenario's initial dataset.
    Dataset,
    /// Initialise a session on the scenario's dataset and write its checkpoint.
    Session,
    /// Closed-loop runs under a session's controller; writes a JSON summary.
    Rollouts {
        #[arg(long)]
        session: PathBuf,
        #[arg(long, default_value_t = 20)]
        starts: usize,
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long, default_value_t = 500)]
        horizon: usize,
        /// CSV of the first run.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
}

#[derive(Debug)]
struct CliError {
    kind: &'static str,
    message: String,
}

fn fail<E: Display>(kind: &'static str) -> impl FnOnce(E) -> CliError {
    move |e| CliError { kind, message: e.to_string() }
}

type Res<T> = Result<T, CliError>;

fn open(path: &Path) -> Res<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError { kind: "io", message: format!("{}: {e}", path.display()) })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Res<T> {
    serde_json::from_reader(open(path)?).map_err(|e| CliError { kind: "parse", message: format!("{}: {e}", path.display()) })
}

fn sink(out: &Option<PathBuf>) -> Res<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(io::BufWriter::new(File::create(p).map_err(fail("io"))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json(out: &Option<PathBuf>, v: &impl serde::Serialize) -> Res<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, v).map_err(fail("io"))?;
    writeln!(w).map_err(fail("io"))?;
    w.flush().map_err(fail("io"))
}

fn write_json_file(path: &Path, v: &impl serde::Serialize) -> Res<()> {
    emit_json(&Some(path.to_path_buf()), v)
}

fn cell_list(text: &str) -> Res<Vec<CellId>> {
    let mut out: Vec<CellId> = text
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<u32>().map(CellId))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError { kind: "usage", message: format!("cell list `{text}`: {e}") })?;
    out.sort();
    out.dedup();
    Ok(out)
}

fn noise_bounds(text: &str) -> Res<(f64, f64)> {
    let bad = || CliError { kind: "usage", message: format!("noise must be `lo,hi`, got `{text}`") };
    let parts: Vec<f64> = text.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    match parts[..] {
        [lo, hi] if lo <= hi => Ok((lo, hi)),
        _ => Err(bad()),
    }
}

fn scenario(name: &str, g: &Global) -> Res<Scenario> {
    let mut scn = match name {
        "arena" => sim::arena(),
        "apartment" => sim::apartment(),
        "tiny" => sim::tiny(),
        path => read_json(Path::new(path))?,
    };
    if let Some(s) = g.seed {
        scn.seed = s;
    }
    if let Some(l) = g.lipschitz {
        scn.lipschitz = l;
    }
    if let Some(grid) = &g.grid {
        let grid = GridPartition::parse(grid).map_err(fail("grid"))?;
        let d = grid.domain();
        scn.domain = Region::new(d.lo.clone(), d.hi.clone());
        scn.cells_per_dim = grid.cells_per_dim().to_vec();
    }
    if let Some(n) = &g.noise {
        let (lo, hi) = noise_bounds(n)?;
        let k = scn.domain.lo.len();
        scn.noise = Noise::Uniform { lo: vec![lo; k], hi: vec![hi; k] };
    }
    scn.validate().map_err(fail("scenario"))?;
    Ok(scn)
}

fn learn(g: &Global, data: &Path, absorbing: &str, clip: bool) -> Res<()> {
    let (d, file_noise) = Dataset::read_text(open(data)?).map_err(fail("learn"))?;
    let grid_text = g.grid.as_deref().ok_or(CliError { kind: "usage", message: "learn needs --grid".into() })?;
    let grid = GridPartition::parse(grid_text).map_err(fail("grid"))?;
    let noise = match &g.noise {
        Some(t) => {
            let (lo, hi) = noise_bounds(t)?;
            NoiseSupport::uniform(d.dim(), lo, hi).map_err(fail("learn"))?
        }
        None => file_noise,
    };
    let l = g.lipschitz.ok_or(CliError { kind: "usage", message: "learn needs --lipschitz".into() })?;
    let cfg = LearnerConfig::new(l, noise).map_err(fail("learn"))?;
    let learner = ReachLearner::from_dataset(cfg, &grid, &d).map_err(fail("learn"))?;
    let policy = if clip { DomainPolicy::Clip } else { DomainPolicy::Sink };
    let tab = ApproxTable::learn(&learner, &grid, &cell_list(absorbing)?, policy).map_err(fail("abstraction"))?;
    emit_json(&g.out, &tab)
}

fn abstract_game(g: &Global, table: &Path, goals: &str) -> Res<()> {
    let tab: ApproxTable = read_json(table)?;
    let abs = build_abstract_game(&tab, &cell_list(goals)?).map_err(fail("abstraction"))?;
    emit_json(&g.out, &abs.to_dump())
}

fn restore(path: &Path) -> Res<SynthesisSession> {
    let cp: SessionCheckpoint = read_json(path)?;
    SynthesisSession::restore(cp).map_err(fail("session"))
}

fn solve(g: &Global, game: Option<&Path>, session: Option<&Path>, fresh: bool, pm: Option<&Path>) -> Res<()> {
    let (region, dump) = match (game, session) {
        (Some(path), _) => {
            let dump: AbstractGameDump = read_json(path)?;
            let abs = dump.to_game().map_err(fail("abstraction"))?;
            let sol = solve_psi(&abs.game, &abs.spec).map_err(fail("fixpoint"))?;
            let range = pm_range(&abs.game, &abs.spec, RangeHint::AbstractDual { states: abs.states() });
            let rho = sol.rho(&abs.game, range).map_err(fail("pm"))?;
            let top = rho.top_set(&abs.game);
            (abs.cells_in(&top), PmDump::new(&rho, &abs.game, PmFlavor::FairBuchiDirect))
        }
        (None, Some(path)) => {
            let mut s = restore(path)?;
            if fresh {
                s = SynthesisSession::initialise(
                    s.dataset().clone(),
                    s.config().clone(),
                    s.grid().clone(),
                    s.goals().to_vec(),
                    s.options().clone(),
                )
                .map_err(fail("session"))?;
            }
            (s.win0().to_vec(), PmDump::new(s.rho(), &s.game().game, PmFlavor::FairBuchiDirect))
        }
        (None, None) => return Err(CliError { kind: "usage", message: "solve needs --game or --session".into() }),
    };
    if let Some(p) = pm {
        write_json_file(p, &dump)?;
    }
    let cells: Vec<u32> = region.iter().map(|c| c.0).collect();
    emit_json(&g.out, &cells)
}

fn increment(g: &Global, session: &Path, data: &Path, save: Option<&Path>) -> Res<()> {
    let mut s = restore(session)?;
    let (d, _) = Dataset::read_text(open(data)?).map_err(fail("learn"))?;
    let report = s.step(d.samples()).map_err(fail("session"))?;
    write_json_file(save.unwrap_or(session), &s.checkpoint())?;
    emit_json(&g.out, &report)
}

fn rollout_starts(s: &SynthesisSession, scn: &Scenario, count: usize) -> Res<Vec<CellId>> {
    let goals = scn.goal_cells().map_err(fail("scenario"))?;
    let obstacles = scn.obstacle_cells().map_err(fail("scenario"))?;
    let cands: Vec<CellId> = s
        .win0()
        .iter()
        .copied()
        .filter(|c| goals.binary_search(c).is_err() && obstacles.binary_search(c).is_err())
        .collect();
    if cands.is_empty() || count == 0 {
        return Ok(Vec::new());
    }
    let count = count.min(cands.len());
    let step = cands.len() / count;
    Ok((0..count).map(|i| cands[i * step]).collect())
}

fn simulate(g: &Global, name: &str, what: &SimCommand) -> Res<()> {
    let scn = scenario(name, g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scn.seed);
    match what {
        SimCommand::Dataset => {
            let d = scn.generate_dataset(&mut rng).map_err(fail("simulate"))?;
            let noise = scn.noise.support().map_err(fail("simulate"))?;
            let mut w = sink(&g.out)?;
            d.write_text(&noise, &mut w).map_err(fail("io"))?;
            w.flush().map_err(fail("io"))
        }
        SimCommand::Session => {
            let d = scn.generate_dataset(&mut rng).map_err(fail("simulate"))?;
            let s = SynthesisSession::initialise(
                d,
                scn.learner_config().map_err(fail("learn"))?,
                scn.grid().map_err(fail("grid"))?,
                scn.goal_cells().map_err(fail("grid"))?,
                scn.session_options().map_err(fail("grid"))?,
            )
            .map_err(fail("session"))?;
            emit_json(&g.out, &s.checkpoint())
        }
        SimCommand::Rollouts { session, starts, runs, horizon, trajectory } => {
            let s = restore(session)?;
            let grid = scn.grid().map_err(fail("grid"))?;
            // sessions emit a policy only once a start cell wins; rollouts use the current region either way
            let policy = match s.policy() {
                Some(p) => p.clone(),
                None => synth_controller(s.game(), &s.win0_vertices()).map_err(fail("fixpoint"))?,
            };
            let lookup = |x: &[f64]| policy.get(grid.translate(x));
            let cells = rollout_starts(&s, &scn, *starts)?;
            let (mut total, mut five, mut hits, mut visits) = (0usize, 0usize, 0usize, 0usize);
            for (i, c) in cells.iter().enumerate() {
                let b = grid.cell_box(*c);
                for k in 0..*runs {
                    let x0: Vec<f64> = (0..b.dim()).map(|d| rng.gen_range(b.lo[d]..b.hi[d])).collect();
                    let t = scn.rollout(lookup, &x0, *horizon, &mut rng).map_err(fail("simulate"))?;
                    if i == 0 && k == 0 {
                        if let Some(p) = trajectory {
                            t.write_csv(File::create(p).map_err(fail("io"))?).map_err(fail("io"))?;
                        }
                    }
                    total += 1;
                    hits += t.obstacle_hits;
                    visits += t.goal_visits;
                    five += usize::from(t.goal_visits >= 5);
                }
            }
            let summary: Value = json!({
                "starts": cells.iter().map(|c| c.0).collect::<Vec<_>>(),
                "runs": total,
                "horizon": horizon,
                "obstacle_hits": hits,
                "runs_with_5_goal_visits": five,
                "mean_goal_visits": if total == 0 { 0.0 } else { visits as f64 / total as f64 },
            });
            emit_json(&g.out, &summary)
        }
    }
}

fn bench(g: &Global, name: &str, rounds: Option<usize>) -> Res<()> {
    let scn = scenario(name, g)?;
    let stages = match rounds {
        Some(n) => repeated_stages(&scn, n),
        None => room_stages(&scn),
    }
    .map_err(fail("bench"))?;
    let (_, rows) = bench_protocol(&scn, &stages).map_err(fail("bench"))?;
    let w = sink(&g.out)?;
    write_rows(&rows, w).map_err(fail("bench"))
}

fn run(cli: Cli) -> Res<()> {
    let g = &cli.global;
    match &cli.cmd {
        Command::Learn { data, absorbing, clip } => learn(g, data, absorbing, *clip),
        Command::Abstract { table, goals } => abstract_game(g, table, goals),
        Command::Solve { game, session, fresh, pm } => solve(g, game.as_deref(), session.as_deref(), *fresh, pm.as_deref()),
        Command::Increment { session, data, save } => increment(g, session, data, save.as_deref()),
        Command::Simulate { scenario, what } => simulate(g, scenario, what),
        Command::Bench { scenario, rounds } => bench(g, scenario, *rounds),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind, "message": e.message }));
            ExitCode::FAILURE
        }
    }
}
