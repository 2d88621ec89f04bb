//! Ground-truth systems for dataset generation and closed-loop rollouts.

use std::f64::consts::PI;
use std::io::Write;

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{CellId, GridError, GridPartition};
use crate::learning::{Dataset, DomainPolicy, HyperBox, InputId, LearnError, LearnerConfig, NoiseSupport, Sample};
use crate::session::SessionOptions;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario is invalid: {0}")]
    BadScenario(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("controller has no input for cell {cell:?} at step {step}")]
    NotWinning { cell: CellId, step: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Planar car: `x' = x + 10·δ·v·cos θ + w₁`, `y' = y + 10·δ·v·sin θ + w₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarModel {
    pub delta: f64,
    pub velocities: Vec<f64>,
    pub angles: Vec<f64>,
}

impl Default for CarModel {
    fn default() -> Self {
        CarModel {
            delta: 1.0,
            velocities: vec![-0.2, -0.1, 0.1, 0.2],
            angles: (0..9).map(|k| k as f64 * PI / 8.0).collect(),
        }
    }
}

impl CarModel {
    /// Input `u` is velocity `u / |angles|` and angle `u % |angles|`.
    pub fn decode(&self, u: InputId) -> (f64, f64) {
        let a = self.angles.len();
        (self.velocities[u.index() / a], self.angles[u.index() % a])
    }
}

/// Gridworld-style dynamics: each input shifts the state by a fixed vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftModel {
    pub moves: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Car(CarModel),
    Shift(ShiftModel),
}

impl Model {
    pub fn inputs(&self) -> usize {
        match self {
            Model::Car(c) => c.velocities.len() * c.angles.len(),
            Model::Shift(s) => s.moves.len(),
        }
    }

    /// Noise-free successor.
    pub fn nominal(&self, x: &[f64], u: InputId) -> Vec<f64> {
        match self {
            Model::Car(c) => {
                let (v, th) = c.decode(u);
                let r = 10.0 * c.delta * v;
                vec![x[0] + r * th.cos(), x[1] + r * th.sin()]
            }
            Model::Shift(s) => x.iter().zip(&s.moves[u.index()]).map(|(a, b)| a + b).collect(),
        }
    }
}

/// Axis-aligned region in state coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Region { lo, hi }
    }

    pub fn to_box(&self) -> HyperBox {
        HyperBox::new(self.lo.clone(), self.hi.clone())
    }
}

/// Noise distribution; the learner only ever sees its support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Noise {
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
}

impl Noise {
    pub fn support(&self) -> Result<NoiseSupport, LearnError> {
        match self {
            Noise::Uniform { lo, hi } => NoiseSupport::new(lo.clone(), hi.clone()),
        }
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Noise::Uniform { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(a, b)| if a < b { Uniform::new_inclusive(*a, *b).sample(rng) } else { *a })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub domain: Region,
    pub cells_per_dim: Vec<usize>,
    pub model: Model,
    pub noise: Noise,
    pub lipschitz: f64,
    pub obstacles: Vec<Region>,
    pub goals: Vec<Region>,
    #[serde(default)]
    pub initial: Vec<Region>,
    /// Regions with `low_budget` samples per (cell, input) instead of `budget`.
    #[serde(default)]
    pub low_data: Vec<Region>,
    pub budget: usize,
    #[serde(default)]
    pub low_budget: usize,
    /// Samples per (cell, input) delivered when a low-data region is revisited.
    pub stage_budget: usize,
    /// Walled arena: the domain is invariant and rollouts are clamped to it.
    #[serde(default)]
    pub walls: bool,
    pub seed: u64,
}

impl Scenario {
    pub fn grid(&self) -> Result<GridPartition, GridError> {
        GridPartition::new(self.domain.to_box(), self.cells_per_dim.clone())
    }

    /// Grid cells lying inside any of the regions, ascending.
    pub fn cells_of(&self, regions: &[Region]) -> Result<Vec<CellId>, GridError> {
        let grid = self.grid()?;
        let mut out: Vec<CellId> = regions.iter().flat_map(|r| grid.cells_within(&r.to_box())).collect();
        out.sort();
        out.dedup();
        Ok(out)
    }

    pub fn obstacle_cells(&self) -> Result<Vec<CellId>, GridError> {
        self.cells_of(&self.obstacles)
    }

    pub fn goal_cells(&self) -> Result<Vec<CellId>, GridError> {
        self.cells_of(&self.goals)
    }

    pub fn initial_cells(&self) -> Result<Vec<CellId>, GridError> {
        self.cells_of(&self.initial)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let grid = self.grid()?;
        let bad = |m: &str| Err(SimError::BadScenario(m.to_string()));
        if self.model.inputs() == 0 {
            return bad("model has no inputs");
        }
        if let Model::Car(_) = self.model {
            if grid.dim() != 2 {
                return bad("the car lives in two dimensions");
            }
        }
        let support = self.noise.support()?;
        if support.l.len() != grid.dim() {
            return bad("noise dimension differs from the domain");
        }
        let obstacles = self.obstacle_cells()?;
        if self.goal_cells()?.iter().any(|g| obstacles.binary_search(g).is_ok()) {
            return bad("a goal cell is an obstacle");
        }
        if self.goal_cells()?.is_empty() {
            return bad("no goal cells");
        }
        Ok(())
    }

    pub fn learner_config(&self) -> Result<LearnerConfig, LearnError> {
        LearnerConfig::new(self.lipschitz, self.noise.support()?)
    }

    pub fn domain_policy(&self) -> DomainPolicy {
        if self.walls {
            DomainPolicy::Clip
        } else {
            DomainPolicy::Sink
        }
    }

    pub fn session_options(&self) -> Result<SessionOptions, GridError> {
        Ok(SessionOptions {
            absorbing: self.obstacle_cells()?,
            initial: self.initial_cells()?,
            domain: self.domain_policy(),
            ..SessionOptions::default()
        })
    }

    /// Raw successor of `x` under `u` with a fresh noise draw.
    pub fn successor<R: Rng>(&self, x: &[f64], u: InputId, rng: &mut R) -> Vec<f64> {
        let w = self.noise.draw(rng);
        self.model.nominal(x, u).iter().zip(&w).map(|(a, b)| a + b).collect()
    }

    fn clamp(&self, x: &mut [f64]) {
        if self.walls {
            for (d, v) in x.iter_mut().enumerate() {
                *v = v.clamp(self.domain.lo[d], self.domain.hi[d]);
            }
        }
    }

    /// One sample per draw: a uniform point of the cell, the given input, and
    /// the raw (unclamped) successor.
    pub fn sample_in<R: Rng>(&self, cell: &HyperBox, u: InputId, rng: &mut R) -> Sample {
        let x: Vec<f64> = (0..cell.dim())
            .map(|d| Uniform::new_inclusive(cell.lo[d], cell.hi[d]).sample(rng))
            .collect();
        let y = self.successor(&x, u, rng);
        Sample::new(x, u, y)
    }

    /// `per_pair` samples for every input of every listed cell.
    pub fn samples_for<R: Rng>(&self, cells: &[CellId], per_pair: usize, rng: &mut R) -> Result<Vec<Sample>, GridError> {
        let grid = self.grid()?;
        let mut out = Vec::with_capacity(cells.len() * per_pair * self.model.inputs());
        for s in cells {
            let b = grid.cell_box(*s);
            for u in 0..self.model.inputs() as u32 {
                for _ in 0..per_pair {
                    out.push(self.sample_in(&b, InputId(u), rng));
                }
            }
        }
        Ok(out)
    }

    /// Cells of each low-data region, excluding obstacles.
    pub fn low_data_cells(&self) -> Result<Vec<Vec<CellId>>, GridError> {
        let obstacles = self.obstacle_cells()?;
        self.low_data
            .iter()
            .map(|r| {
                let cs = self.cells_of(std::slice::from_ref(r))?;
                Ok(cs.into_iter().filter(|c| obstacles.binary_search(c).is_err()).collect())
            })
            .collect()
    }

    /// Initial dataset: `budget` samples per pair outside low-data regions,
    /// `low_budget` inside, none in obstacles.
    pub fn generate_dataset<R: Rng>(&self, rng: &mut R) -> Result<Dataset, SimError> {
        self.validate()?;
        let grid = self.grid()?;
        let obstacles = self.obstacle_cells()?;
        let low: Vec<CellId> = self.low_data_cells()?.concat();
        let mut d = Dataset::new(grid.dim(), self.model.inputs());
        for s in grid.cells() {
            if obstacles.binary_search(&s).is_ok() {
                continue;
            }
            let n = if low.contains(&s) { self.low_budget } else { self.budget };
            d.extend(self.samples_for(&[s], n, rng)?)?;
        }
        Ok(d)
    }

    /// Closed-loop run from `x0` under `lookup` for `horizon` steps.
    ///
    /// Stops early on entering an obstacle.
    pub fn rollout<R, F, E>(&self, lookup: F, x0: &[f64], horizon: usize, rng: &mut R) -> Result<Trajectory, SimError>
    where
        R: Rng,
        F: Fn(&[f64]) -> Result<InputId, E>,
    {
        let grid = self.grid()?;
        let obstacles = self.obstacle_cells()?;
        let goals = self.goal_cells()?;
        let mut t = Trajectory::default();
        let mut x = x0.to_vec();
        for k in 0..horizon {
            let cell = grid.translate(&x);
            let u = lookup(&x).map_err(|_| SimError::NotWinning { cell, step: k })?;
            let mut y = self.successor(&x, u, rng);
            self.clamp(&mut y);
            let next = grid.translate(&y);
            t.steps.push(Step { x: x.clone(), u: u.0, y: y.clone(), cell: next.0 });
            if goals.binary_search(&next).is_ok() {
                t.goal_visits += 1;
            }
            if obstacles.binary_search(&next).is_ok() {
                t.obstacle_hits += 1;
                break;
            }
            x = y;
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub x: Vec<f64>,
    pub u: u32,
    pub y: Vec<f64>,
    /// Cell of `y`.
    pub cell: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub goal_visits: usize,
    pub obstacle_hits: usize,
}

impl Trajectory {
    /// Columns `k,x…,u,y…,cell`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SimError> {
        let mut out = csv::Writer::from_writer(w);
        let n = self.steps.first().map_or(0, |s| s.x.len());
        let mut header = vec!["k".to_string()];
        header.extend((0..n).map(|d| format!("x{d}")));
        header.push("u".into());
        header.extend((0..n).map(|d| format!("y{d}")));
        header.push("cell".into());
        out.write_record(&header)?;
        for (k, s) in self.steps.iter().enumerate() {
            let mut row = vec![k.to_string()];
            row.extend(s.x.iter().map(|v| v.to_string()));
            row.push(s.u.to_string());
            row.extend(s.y.iter().map(|v| v.to_string()));
            row.push(s.cell.to_string());
            out.write_record(&row)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Car on a walled 20×20 arena with a central obstacle, a goal in one corner
/// and a single low-data region.
pub fn arena() -> Scenario {
    Scenario {
        name: "arena".into(),
        domain: Region::new(vec![0.0, 0.0], vec![20.0, 20.0]),
        cells_per_dim: vec![20, 20],
        model: Model::Car(CarModel::default()),
        noise: Noise::Uniform { lo: vec![-1.5, -1.5], hi: vec![1.5, 1.5] },
        lipschitz: 1.25,
        obstacles: vec![Region::new(vec![8.0, 8.0], vec![12.0, 12.0])],
        goals: vec![Region::new(vec![2.0, 2.0], vec![5.0, 5.0])],
        initial: vec![Region::new(vec![14.0, 14.0], vec![18.0, 18.0])],
        low_data: vec![Region::new(vec![13.0, 13.0], vec![17.0, 17.0])],
        budget: 30,
        low_budget: 0,
        stage_budget: 6,
        walls: true,
        seed: 7,
    }
}

/// Five rooms along a corridor; every room starts without data.
pub fn apartment() -> Scenario {
    let room = |i: usize| {
        let x = 1.0 + 4.0 * i as f64;
        Region::new(vec![x, 11.0], vec![x + 3.0, 14.0])
    };
    Scenario {
        name: "apartment".into(),
        domain: Region::new(vec![0.0, 0.0], vec![21.0, 16.0]),
        cells_per_dim: vec![21, 16],
        model: Model::Car(CarModel::default()),
        noise: Noise::Uniform { lo: vec![-1.5, -1.5], hi: vec![1.5, 1.5] },
        lipschitz: 1.0,
        obstacles: vec![Region::new(vec![0.0, 8.0], vec![21.0, 9.0])],
        goals: vec![Region::new(vec![9.0, 2.0], vec![12.0, 5.0])],
        initial: Vec::new(),
        low_data: (0..5).map(room).collect(),
        budget: 20,
        low_budget: 0,
        stage_budget: 20,
        walls: true,
        seed: 11,
    }
}

/// Four goal cells and one input that only adds noise; solvable immediately.
pub fn tiny() -> Scenario {
    Scenario {
        name: "tiny".into(),
        domain: Region::new(vec![0.0, 0.0], vec![2.0, 2.0]),
        cells_per_dim: vec![2, 2],
        model: Model::Shift(ShiftModel { moves: vec![vec![0.0, 0.0]] }),
        noise: Noise::Uniform { lo: vec![-1.5, -1.5], hi: vec![1.5, 1.5] },
        lipschitz: 1.0,
        obstacles: Vec::new(),
        goals: vec![Region::new(vec![0.0, 0.0], vec![2.0, 2.0])],
        initial: Vec::new(),
        low_data: Vec::new(),
        budget: 40,
        low_budget: 0,
        stage_budget: 5,
        walls: true,
        seed: 1,
    }
}
