//! Lipschitz bounds on unknown dynamics learned from noisy samples.
//!
//! For `x⁺ = f(x, u) + w` with `w ∈ [l, h]` and `f` Lipschitz (sup norm) with
//! constant `L`, every sample `(x_i, u, x_i⁺)` yields, componentwise,
//! `x_i⁺ − L‖x_i − x‖ − h ≤ f(x, u) ≤ x_i⁺ + L‖x_i − x‖ − l`.
//! Over a cell the distance is replaced by the farthest-corner distance,
//! which keeps every bound a plain max/min over samples and therefore
//! monotone in the dataset.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{CellId, GridError, GridPartition};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputId(pub u32);

impl InputId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for InputId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("no samples for input {0}")]
    NoDataForInput(u32),
    #[error("sample dimension {got} does not match dataset dimension {want}")]
    Dimension { want: usize, got: usize },
    #[error("input {input} outside the input set of size {inputs}")]
    UnknownInput { input: u32, inputs: usize },
    #[error("noise support needs l <= h componentwise")]
    BadNoise,
    #[error("lipschitz constant must be finite and nonnegative")]
    BadLipschitz,
    #[error("dataset parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Closed axis-aligned box; `empty` boxes contain no point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub empty: bool,
}

impl HyperBox {
    /// Box `[lo, hi]`, marked empty if `lo > hi` in any dimension.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len(), "box bounds differ in dimension");
        let empty = lo.iter().zip(&hi).any(|(a, b)| !(a <= b));
        HyperBox { lo, hi, empty }
    }

    pub fn empty(n: usize) -> Self {
        HyperBox { lo: vec![0.0; n], hi: vec![0.0; n], empty: true }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        !self.empty && x.iter().enumerate().all(|(d, v)| self.lo[d] <= *v && *v <= self.hi[d])
    }

    pub fn contains_box(&self, other: &HyperBox) -> bool {
        other.empty
            || (!self.empty
                && (0..self.dim()).all(|d| self.lo[d] <= other.lo[d] && other.hi[d] <= self.hi[d]))
    }

    /// Largest sup-norm distance from `x` to a corner of the box.
    pub fn corner_distance(&self, x: &[f64]) -> f64 {
        let mut m = 0.0f64;
        for d in 0..self.dim() {
            let a = (x[d] - self.lo[d]).abs();
            let b = (x[d] - self.hi[d]).abs();
            m = m.max(a.max(b));
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub u: InputId,
    pub x_plus: Vec<f64>,
}

impl Sample {
    pub fn new(x: Vec<f64>, u: InputId, x_plus: Vec<f64>) -> Self {
        Sample { x, u, x_plus }
    }
}

/// Append-only sample store with a per-input index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    inputs: usize,
    samples: Vec<Sample>,
    #[serde(skip)]
    by_input: Vec<Vec<u32>>,
}

impl Dataset {
    pub fn new(n: usize, inputs: usize) -> Self {
        Dataset { n, inputs, samples: Vec::new(), by_input: vec![Vec::new(); inputs] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn check(&self, s: &Sample) -> Result<(), LearnError> {
        for len in [s.x.len(), s.x_plus.len()] {
            if len != self.n {
                return Err(LearnError::Dimension { want: self.n, got: len });
            }
        }
        if s.u.index() >= self.inputs {
            return Err(LearnError::UnknownInput { input: s.u.0, inputs: self.inputs });
        }
        Ok(())
    }

    pub fn push(&mut self, s: Sample) -> Result<(), LearnError> {
        self.check(&s)?;
        self.by_input[s.u.index()].push(self.samples.len() as u32);
        self.samples.push(s);
        Ok(())
    }

    pub fn extend<I: IntoIterator<Item = Sample>>(&mut self, it: I) -> Result<(), LearnError> {
        for s in it {
            self.push(s)?;
        }
        Ok(())
    }

    /// Samples with input `u`, in insertion order.
    pub fn for_input(&self, u: InputId) -> impl Iterator<Item = &Sample> + '_ {
        self.by_input
            .get(u.index())
            .into_iter()
            .flatten()
            .map(move |i| &self.samples[*i as usize])
    }

    pub fn count_for(&self, u: InputId) -> usize {
        self.by_input.get(u.index()).map_or(0, Vec::len)
    }

    /// Rebuilds the per-input index (after deserialization).
    pub fn reindex(&mut self) {
        self.by_input = vec![Vec::new(); self.inputs];
        for (i, s) in self.samples.iter().enumerate() {
            self.by_input[s.u.index()].push(i as u32);
        }
    }

    /// Writes the text format: a header `n m ; l… ; h…`, then `x… ; u ; y…` per line.
    pub fn write_text<W: Write>(&self, noise: &NoiseSupport, mut w: W) -> Result<(), LearnError> {
        let io = |e: std::io::Error| LearnError::Io(e.to_string());
        writeln!(w, "{} {} ; {} ; {}", self.n, self.inputs, join(&noise.l), join(&noise.h)).map_err(io)?;
        for s in &self.samples {
            writeln!(w, "{} ; {} ; {}", join(&s.x), s.u.0, join(&s.x_plus)).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<(Dataset, NoiseSupport), LearnError> {
        let mut lines = r.lines().enumerate().filter(|(_, l)| {
            l.as_ref().map_or(true, |t| !t.trim().is_empty() && !t.trim_start().starts_with('#'))
        });
        let (hl, header) = lines
            .next()
            .ok_or(LearnError::Parse { line: 1, msg: "missing header".into() })?;
        let header = header.map_err(|e| LearnError::Io(e.to_string()))?;
        let err = |line: usize, msg: &str| LearnError::Parse { line: line + 1, msg: msg.to_string() };
        let groups: Vec<&str> = header.split(';').collect();
        if groups.len() != 3 {
            return Err(err(hl, "header needs `n m ; l… ; h…`"));
        }
        let head: Vec<usize> = groups[0]
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| err(hl, "bad integer")))
            .collect::<Result<_, _>>()?;
        if head.len() != 2 {
            return Err(err(hl, "header needs n and the input count"));
        }
        let l = parse_floats(groups[1]).ok_or_else(|| err(hl, "bad noise bound"))?;
        let h = parse_floats(groups[2]).ok_or_else(|| err(hl, "bad noise bound"))?;
        let noise = NoiseSupport::new(l, h)?;
        let mut d = Dataset::new(head[0], head[1]);
        for (ln, line) in lines {
            let line = line.map_err(|e| LearnError::Io(e.to_string()))?;
            let g: Vec<&str> = line.split(';').collect();
            if g.len() != 3 {
                return Err(err(ln, "record needs `x… ; u ; y…`"));
            }
            let x = parse_floats(g[0]).ok_or_else(|| err(ln, "bad state"))?;
            let u: u32 = g[1].trim().parse().map_err(|_| err(ln, "bad input id"))?;
            let y = parse_floats(g[2]).ok_or_else(|| err(ln, "bad successor"))?;
            d.push(Sample::new(x, InputId(u), y)).map_err(|e| err(ln, &e.to_string()))?;
        }
        Ok((d, noise))
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_floats(s: &str) -> Option<Vec<f64>> {
    s.split_whitespace().map(|t| t.parse::<f64>().ok()).collect()
}

/// Noise support `[l, h]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSupport {
    pub l: Vec<f64>,
    pub h: Vec<f64>,
}

impl NoiseSupport {
    pub fn new(l: Vec<f64>, h: Vec<f64>) -> Result<Self, LearnError> {
        if l.len() != h.len() || l.iter().zip(&h).any(|(a, b)| !(a <= b)) {
            return Err(LearnError::BadNoise);
        }
        Ok(NoiseSupport { l, h })
    }

    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self, LearnError> {
        NoiseSupport::new(vec![lo; n], vec![hi; n])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub lipschitz: f64,
    pub noise: NoiseSupport,
}

impl LearnerConfig {
    pub fn new(lipschitz: f64, noise: NoiseSupport) -> Result<Self, LearnError> {
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(LearnError::BadLipschitz);
        }
        Ok(LearnerConfig { lipschitz, noise })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointBounds {
    pub check_f: Vec<f64>,
    pub hat_f: Vec<f64>,
    /// Set when `check_f > hat_f` in some component: `L` or the noise support was too small.
    pub inconsistent: bool,
}

/// Componentwise bounds `[f̌(x*, u), f̂(x*, u)]` at a single point.
pub fn bounds_at_point(
    x_star: &[f64],
    u: InputId,
    d: &Dataset,
    cfg: &LearnerConfig,
) -> Result<PointBounds, LearnError> {
    let n = x_star.len();
    let mut lb = vec![f64::NEG_INFINITY; n];
    let mut ub = vec![f64::INFINITY; n];
    let mut any = false;
    for s in d.for_input(u) {
        any = true;
        let dist = s
            .x
            .iter()
            .zip(x_star)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let slack = cfg.lipschitz * dist;
        for i in 0..n {
            lb[i] = lb[i].max(s.x_plus[i] - slack);
            ub[i] = ub[i].min(s.x_plus[i] + slack);
        }
    }
    if !any {
        return Err(LearnError::NoDataForInput(u.0));
    }
    let check_f: Vec<f64> = (0..n).map(|i| lb[i] - cfg.noise.h[i]).collect();
    let hat_f: Vec<f64> = (0..n).map(|i| ub[i] - cfg.noise.l[i]).collect();
    let inconsistent = check_f.iter().zip(&hat_f).any(|(a, b)| a > b);
    Ok(PointBounds { check_f, hat_f, inconsistent })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoxStatus {
    Ok,
    /// No sample for the input: under is empty and over is the whole domain.
    NoData,
    /// The learned bounds cross; treated like missing data.
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachBoxes {
    pub under: HyperBox,
    pub over: HyperBox,
    pub status: BoxStatus,
}

/// Running extrema `max_i(x_i⁺ − L·D)` and `min_i(x_i⁺ + L·D)` for one cell and input.
#[derive(Debug, Clone, PartialEq)]
struct Extrema {
    lb: Vec<f64>,
    ub: Vec<f64>,
}

impl Extrema {
    fn new(n: usize) -> Self {
        Extrema { lb: vec![f64::NEG_INFINITY; n], ub: vec![f64::INFINITY; n] }
    }
}

/// Absorbs one sample into the extrema of `cell`; returns whether anything moved.
#[inline]
fn absorb_into(lb: &mut [f64], ub: &mut [f64], cell: &HyperBox, s: &Sample, lipschitz: f64) -> bool {
    let slack = lipschitz * cell.corner_distance(&s.x);
    let mut changed = false;
    for i in 0..lb.len() {
        let a = s.x_plus[i] - slack;
        if a > lb[i] {
            lb[i] = a;
            changed = true;
        }
        let b = s.x_plus[i] + slack;
        if b < ub[i] {
            ub[i] = b;
            changed = true;
        }
    }
    changed
}

fn derive_boxes(lb: &[f64], ub: &[f64], cfg: &LearnerConfig, domain: &HyperBox) -> ReachBoxes {
    let n = lb.len();
    let (l, h) = (&cfg.noise.l, &cfg.noise.h);
    let check_lb: Vec<f64> = (0..n).map(|i| lb[i] - h[i]).collect();
    let hat_ub: Vec<f64> = (0..n).map(|i| ub[i] - l[i]).collect();
    let over = HyperBox::new(
        (0..n).map(|i| check_lb[i] + l[i]).collect(),
        (0..n).map(|i| hat_ub[i] + h[i]).collect(),
    );
    if over.is_empty() {
        return ReachBoxes { under: HyperBox::empty(n), over: domain.clone(), status: BoxStatus::Inconsistent };
    }
    let under = HyperBox::new(
        (0..n).map(|i| hat_ub[i] + l[i]).collect(),
        (0..n).map(|i| check_lb[i] + h[i]).collect(),
    );
    ReachBoxes { under, over, status: BoxStatus::Ok }
}

/// Under/over boxes of the one-step reachable set of `cell` under input `u`.
pub fn cell_reach_boxes(
    u: InputId,
    d: &Dataset,
    cfg: &LearnerConfig,
    cell: &HyperBox,
    domain: &HyperBox,
) -> ReachBoxes {
    let n = d.dim();
    let mut ex = Extrema::new(n);
    let mut any = false;
    for s in d.for_input(u) {
        any = true;
        absorb_into(&mut ex.lb, &mut ex.ub, cell, s, cfg.lipschitz);
    }
    if !any {
        return ReachBoxes { under: HyperBox::empty(n), over: domain.clone(), status: BoxStatus::NoData };
    }
    derive_boxes(&ex.lb, &ex.ub, cfg, domain)
}

/// How over-approximation mass outside the domain is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainPolicy {
    /// Mass outside the domain reaches the absorbing sink cell.
    #[default]
    Sink,
    /// The domain is invariant (a walled arena): boxes are clipped to it.
    Clip,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReachSets {
    /// Sorted; never contains the sink.
    pub under: Vec<CellId>,
    /// Sorted; may end with the sink.
    pub over: Vec<CellId>,
}

/// Cells surely hit (`under`) and possibly hit (`over`) by the boxes.
pub fn abstract_reach_sets(
    under: &HyperBox,
    over: &HyperBox,
    grid: &GridPartition,
    policy: DomainPolicy,
) -> Result<ReachSets, GridError> {
    let clipped;
    let over = match policy {
        DomainPolicy::Clip if !over.is_empty() => {
            let d = grid.domain();
            let lo = (0..d.dim()).map(|i| over.lo[i].clamp(d.lo[i], d.hi[i])).collect();
            let hi = (0..d.dim()).map(|i| over.hi[i].clamp(d.lo[i], d.hi[i])).collect();
            clipped = HyperBox::new(lo, hi);
            &clipped
        }
        _ => over,
    };
    let mut over_cells = grid.cells_meeting(over);
    if over_cells.is_empty() && !over.is_empty() {
        return Err(GridError::OutOfDomain);
    }
    if policy == DomainPolicy::Sink && grid.leaves_domain(over) {
        over_cells.push(grid.sink());
    }
    Ok(ReachSets { under: grid.cells_within(under), over: over_cells })
}

/// Incrementally maintained extrema for every (cell, input) pair of a grid.
#[derive(Debug, Clone)]
pub struct ReachLearner {
    cfg: LearnerConfig,
    cells: Vec<HyperBox>,
    domain: HyperBox,
    inputs: usize,
    n: usize,
    lb: Vec<f64>,
    ub: Vec<f64>,
    counts: Vec<usize>,
}

impl ReachLearner {
    pub fn new(cfg: LearnerConfig, grid: &GridPartition, inputs: usize) -> Result<Self, LearnError> {
        let n = grid.dim();
        if cfg.noise.l.len() != n {
            return Err(LearnError::Dimension { want: n, got: cfg.noise.l.len() });
        }
        let cells: Vec<HyperBox> = grid.cells().map(|s| grid.cell_box(s)).collect();
        let slots = cells.len() * inputs * n;
        Ok(ReachLearner {
            cfg,
            domain: grid.domain().clone(),
            inputs,
            n,
            lb: vec![f64::NEG_INFINITY; slots],
            ub: vec![f64::INFINITY; slots],
            counts: vec![0; inputs],
            cells,
        })
    }

    /// Learner over a whole dataset.
    pub fn from_dataset(cfg: LearnerConfig, grid: &GridPartition, d: &Dataset) -> Result<Self, LearnError> {
        if d.dim() != grid.dim() {
            return Err(LearnError::Dimension { want: grid.dim(), got: d.dim() });
        }
        let mut l = ReachLearner::new(cfg, grid, d.inputs())?;
        for s in d.samples() {
            l.absorb(s);
        }
        Ok(l)
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    #[inline]
    fn slot(&self, s: CellId, u: InputId) -> usize {
        (s.index() * self.inputs + u.index()) * self.n
    }

    /// Folds a sample into every cell; returns the cells whose extrema moved.
    pub fn absorb(&mut self, s: &Sample) -> Vec<CellId> {
        self.counts[s.u.index()] += 1;
        let first = self.counts[s.u.index()] == 1;
        let mut moved = Vec::new();
        for (c, cell) in self.cells.iter().enumerate() {
            let k = (c * self.inputs + s.u.index()) * self.n;
            let n = self.n;
            let (lb, ub) = (&mut self.lb[k..k + n], &mut self.ub[k..k + n]);
            if absorb_into(lb, ub, cell, s, self.cfg.lipschitz) || first {
                moved.push(CellId(c as u32));
            }
        }
        moved
    }

    pub fn has_data(&self, u: InputId) -> bool {
        self.counts[u.index()] > 0
    }

    pub fn boxes(&self, s: CellId, u: InputId) -> ReachBoxes {
        if !self.has_data(u) {
            return ReachBoxes {
                under: HyperBox::empty(self.n),
                over: self.domain.clone(),
                status: BoxStatus::NoData,
            };
        }
        let k = self.slot(s, u);
        derive_boxes(&self.lb[k..k + self.n], &self.ub[k..k + self.n], &self.cfg, &self.domain)
    }
}
