//! Sum-structured convex objectives `f(x) = (1/n) sum_i f_i(x)` with
//! per-agent subgradient oracles, plus the distributed least-squares family
//! and an optimum oracle for it.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-agent evaluation and subgradient access.
///
/// Implementations must be pure: the same `(i, x)` always yields the same
/// value and subgradient.
pub trait Objective: Sync {
    fn agents(&self) -> usize;

    fn dim(&self) -> usize;

    fn local_value(&self, i: usize, x: &DVector<f64>) -> f64;

    fn local_subgradient(&self, i: usize, x: &DVector<f64>) -> DVector<f64>;

    /// Uniform bound `D` on `||grad f_i(x)||`, if one exists.
    fn subgradient_bound(&self) -> Option<f64>;

    /// `(1/n) sum_i f_i(x)`.
    fn value(&self, x: &DVector<f64>) -> f64 {
        let n = self.agents();
        (0..n).map(|i| self.local_value(i, x)).sum::<f64>() / n as f64
    }

    /// `(1/n) sum_i grad f_i(x)`.
    fn subgradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.agents();
        let mut g = DVector::zeros(self.dim());
        for i in 0..n {
            g += self.local_subgradient(i, x);
        }
        g / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `f_i(x) = ||R_i x - s_i||`; nonsmooth with bounded subgradients.
    Norm,
    /// `f_i(x) = ||R_i x - s_i||^2`; smooth, closed-form optimum, gradient
    /// unbounded globally.
    Squared,
}

impl Loss {
    fn as_str(self) -> &'static str {
        match self {
            Loss::Norm => "norm",
            Loss::Squared => "squared",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentData {
    pub r: DMatrix<f64>,
    pub s: DVector<f64>,
}

/// Agent `i` holds `(R_i, s_i)` with `s_i = R_i x + n_i`; its local cost is
/// `scale_i * loss(R_i x - s_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresProblem {
    data: Vec<AgentData>,
    scales: Vec<f64>,
    loss: Loss,
    dim: usize,
    bound: Option<f64>,
}

/// Parameters of the seeded instance generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default = "default_rows")]
    pub rows_per_agent: usize,
    #[serde(default = "default_rows")]
    pub dim: usize,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    #[serde(default = "default_loss")]
    pub loss: Loss,
    /// Standard deviation of a per-agent perturbation of the ground-truth
    /// state; nonzero values make agents disagree on their local minimizers.
    #[serde(default)]
    pub heterogeneity: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_rows() -> usize {
    3
}

fn default_noise() -> f64 {
    0.1
}

fn default_loss() -> Loss {
    Loss::Norm
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            rows_per_agent: default_rows(),
            dim: default_rows(),
            noise_std: default_noise(),
            loss: default_loss(),
            heterogeneity: 0.0,
            seed: 0,
        }
    }
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows_per_agent == 0 {
            return Err(Error::config(
                "problem.rows_per_agent",
                "must be at least 1",
            ));
        }
        if self.dim == 0 {
            return Err(Error::config("problem.dim", "must be at least 1"));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::config(
                "problem.noise_std",
                "must be finite and >= 0",
            ));
        }
        if !(self.heterogeneity.is_finite() && self.heterogeneity >= 0.0) {
            return Err(Error::config(
                "problem.heterogeneity",
                "must be finite and >= 0",
            ));
        }
        Ok(())
    }
}

/// Minimizer and minimum value of `(1/n) sum_i f_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub x: DVector<f64>,
    pub value: f64,
}

/// Result of plain centralized subgradient descent with best-iterate tracking.
#[derive(Debug, Clone)]
pub struct SubgradientRun {
    pub best: Optimum,
    /// Best objective value seen after each iteration.
    pub best_history: Vec<f64>,
}

impl LeastSquaresProblem {
    pub fn new(data: Vec<AgentData>, loss: Loss) -> Result<Self> {
        let n = data.len();
        Self::with_scales(data, vec![1.0; n], loss)
    }

    pub fn with_scales(data: Vec<AgentData>, scales: Vec<f64>, loss: Loss) -> Result<Self> {
        let Some(first) = data.first() else {
            return Err(Error::input("a problem needs at least one agent"));
        };
        let dim = first.r.ncols();
        if dim == 0 {
            return Err(Error::input("decision dimension must be positive"));
        }
        if scales.len() != data.len() {
            return Err(Error::input(format!(
                "{} scales for {} agents",
                scales.len(),
                data.len()
            )));
        }
        for (i, (d, c)) in data.iter().zip(&scales).enumerate() {
            if d.r.ncols() != dim || d.r.nrows() != d.s.len() {
                return Err(Error::input(format!(
                    "agent {i}: R is {}x{}, s has {} entries, expected {dim} columns",
                    d.r.nrows(),
                    d.r.ncols(),
                    d.s.len()
                )));
            }
            if !(c.is_finite() && *c >= 0.0) {
                return Err(Error::input(format!(
                    "agent {i}: scale {c} must be finite and >= 0"
                )));
            }
        }
        let bound = match loss {
            Loss::Norm => Some(
                data.iter()
                    .zip(&scales)
                    .map(|(d, c)| c * spectral_norm(&d.r))
                    .fold(0.0, f64::max),
            ),
            Loss::Squared => None,
        };
        Ok(Self {
            data,
            scales,
            loss,
            dim,
            bound,
        })
    }

    /// Seeded instance: entries of `R_i` and the ground truth are standard
    /// normal, noise is normal with the configured deviation.
    pub fn generate(n: usize, spec: &ProblemSpec) -> Result<Self> {
        spec.validate()?;
        if n == 0 {
            return Err(Error::input("a problem needs at least one agent"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let truth = DVector::from_fn(spec.dim, |_, _| normal());
        let data = (0..n)
            .map(|_| {
                let r = DMatrix::from_fn(spec.rows_per_agent, spec.dim, |_, _| normal());
                let local =
                    &truth + DVector::from_fn(spec.dim, |_, _| spec.heterogeneity * normal());
                let noise = DVector::from_fn(spec.rows_per_agent, |_, _| spec.noise_std * normal());
                let s = &r * local + noise;
                AgentData { r, s }
            })
            .collect();
        Self::new(data, spec.loss)
    }

    /// Every agent has `R_i = 0`, `s_i = 0`: constant objective, zero
    /// subgradients everywhere.
    pub fn constant(n: usize, dim: usize) -> Result<Self> {
        let data = (0..n)
            .map(|_| AgentData {
                r: DMatrix::zeros(1, dim),
                s: DVector::zeros(1),
            })
            .collect();
        Self::new(data, Loss::Norm)
    }

    pub fn data(&self) -> &[AgentData] {
        &self.data
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    /// Same data with a different loss.
    pub fn with_loss(&self, loss: Loss) -> Self {
        Self::with_scales(self.data.clone(), self.scales.clone(), loss).expect("already validated")
    }

    /// Per-agent subgradient bound `scale_i * sigma_max(R_i)` for the norm loss.
    pub fn local_bound(&self, i: usize) -> Option<f64> {
        match self.loss {
            Loss::Norm => Some(self.scales[i] * spectral_norm(&self.data[i].r)),
            Loss::Squared => None,
        }
    }

    fn residual(&self, i: usize, x: &DVector<f64>) -> DVector<f64> {
        let d = &self.data[i];
        &d.r * x - &d.s
    }

    /// Closed-form minimizer of the weighted normal equations
    /// `sum_i w_i R_i^T R_i x = sum_i w_i R_i^T s_i`.
    fn weighted_normal_solution(&self, weights: &[f64]) -> Result<DVector<f64>> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        let mut rhs = DVector::zeros(self.dim);
        for (d, w) in self.data.iter().zip(weights) {
            if *w == 0.0 {
                continue;
            }
            h += d.r.transpose() * &d.r * *w;
            rhs += d.r.transpose() * &d.s * *w;
        }
        if let Some(chol) = h.clone().cholesky() {
            return Ok(chol.solve(&rhs));
        }
        h.svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::numeric(format!("normal equations: {e}")))
    }

    /// Iteratively reweighted least squares for a sum of Euclidean norms,
    /// weights clamped away from the kinks.
    fn reweighted_polish(&self, start: &DVector<f64>, max_iter: usize) -> Result<Optimum> {
        let mut x = start.clone();
        let mut best = Optimum {
            value: self.value(&x),
            x: x.clone(),
        };
        for _ in 0..max_iter {
            let weights: Vec<f64> = (0..self.data.len())
                .map(|i| self.scales[i] / self.residual(i, &x).norm().max(1e-13))
                .collect();
            let next = self.weighted_normal_solution(&weights)?;
            let step = (&next - &x).norm();
            x = next;
            let value = self.value(&x);
            if value < best.value {
                best = Optimum {
                    value,
                    x: x.clone(),
                };
            }
            if step <= 1e-15 * (1.0 + x.norm()) {
                break;
            }
        }
        Ok(best)
    }

    /// Serializes to the line-oriented problem format.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# ddgd least-squares problem\n");
        let _ = writeln!(out, "loss {}", self.loss.as_str());
        let _ = writeln!(out, "agents {}", self.data.len());
        let _ = writeln!(out, "dim {}", self.dim);
        for (i, (d, c)) in self.data.iter().zip(&self.scales).enumerate() {
            let _ = writeln!(out, "agent {} rows {} scale {:?}", i + 1, d.r.nrows(), c);
            for row in d.r.row_iter() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                let _ = writeln!(out, "r {}", cells.join(" "));
            }
            let cells: Vec<String> = d.s.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "s {}", cells.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(no, l)| (no + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::input(format!("problem text ended; expected {what}")))
        };
        let header = |line: (usize, &str), key: &str| -> Result<String> {
            let (no, l) = line;
            l.strip_prefix(key)
                .map(|v| v.trim().to_string())
                .ok_or_else(|| Error::input(format!("line {no}: expected `{key} ...`")))
        };
        let loss = match header(next("loss")?, "loss")?.as_str() {
            "norm" => Loss::Norm,
            "squared" => Loss::Squared,
            other => return Err(Error::input(format!("unknown loss `{other}`"))),
        };
        let parse_usize = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::input(format!("bad count `{s}`")))
        };
        let parse_row = |(no, l): (usize, &str), key: &str, len: usize| -> Result<Vec<f64>> {
            let body = l
                .strip_prefix(key)
                .ok_or_else(|| Error::input(format!("line {no}: expected `{key} ...`")))?;
            let vals: Vec<f64> = body
                .split_whitespace()
                .map(|v| {
                    v.parse()
                        .map_err(|_| Error::input(format!("line {no}: bad number `{v}`")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != len {
                return Err(Error::input(format!(
                    "line {no}: expected {len} values, got {}",
                    vals.len()
                )));
            }
            Ok(vals)
        };
        let n = parse_usize(&header(next("agents")?, "agents")?)?;
        let dim = parse_usize(&header(next("dim")?, "dim")?)?;
        let mut data = Vec::with_capacity(n);
        let mut scales = Vec::with_capacity(n);
        for _ in 0..n {
            let (no, l) = next("agent header")?;
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() != 6 || parts[0] != "agent" || parts[2] != "rows" || parts[4] != "scale"
            {
                return Err(Error::input(format!(
                    "line {no}: expected `agent <i> rows <m> scale <c>`"
                )));
            }
            let rows = parse_usize(parts[3])?;
            let scale: f64 = parts[5]
                .parse()
                .map_err(|_| Error::input(format!("line {no}: bad scale `{}`", parts[5])))?;
            let mut entries = Vec::with_capacity(rows * dim);
            for _ in 0..rows {
                entries.extend(parse_row(next("r row")?, "r", dim)?);
            }
            let s = parse_row(next("s row")?, "s", rows)?;
            data.push(AgentData {
                r: DMatrix::from_row_slice(rows, dim, &entries),
                s: DVector::from_vec(s),
            });
            scales.push(scale);
        }
        Self::with_scales(data, scales, loss)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

impl Objective for LeastSquaresProblem {
    fn agents(&self) -> usize {
        self.data.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn local_value(&self, i: usize, x: &DVector<f64>) -> f64 {
        let r = self.residual(i, x).norm();
        self.scales[i]
            * match self.loss {
                Loss::Norm => r,
                Loss::Squared => r * r,
            }
    }

    /// Norm loss: `R^T r / ||r||`, or zero at the kink `r = 0`.
    /// Squared loss: `2 R^T r`.
    fn local_subgradient(&self, i: usize, x: &DVector<f64>) -> DVector<f64> {
        let r = self.residual(i, x);
        let rt = self.data[i].r.transpose();
        match self.loss {
            Loss::Norm => {
                let norm = r.norm();
                if norm == 0.0 {
                    DVector::zeros(self.dim)
                } else {
                    rt * r * (self.scales[i] / norm)
                }
            }
            Loss::Squared => rt * r * (2.0 * self.scales[i]),
        }
    }

    fn subgradient_bound(&self) -> Option<f64> {
        self.bound
    }
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Centralized subgradient descent with `alpha_k = scale / sqrt(k + 1)`,
/// tracking the best iterate.
pub fn subgradient_descent<O: Objective + ?Sized>(
    obj: &O,
    start: &DVector<f64>,
    iters: usize,
    scale: f64,
) -> SubgradientRun {
    let mut x = start.clone();
    let mut best = Optimum {
        value: obj.value(&x),
        x: x.clone(),
    };
    let mut best_history = Vec::with_capacity(iters);
    for k in 0..iters {
        let g = obj.subgradient(&x);
        x -= g * (scale / ((k + 1) as f64).sqrt());
        let value = obj.value(&x);
        if value < best.value {
            best = Optimum {
                value,
                x: x.clone(),
            };
        }
        best_history.push(best.value);
    }
    SubgradientRun { best, best_history }
}

/// Optimum oracle for the least-squares family.
///
/// The squared loss uses the normal equations. The norm loss runs `iters`
/// steps of best-iterate subgradient descent from the squared-loss solution,
/// then refines the best point (and every agent's exact local fit, where the
/// sum of norms may have its kink minimizer) with reweighted least squares.
pub fn solve_centralized(prob: &LeastSquaresProblem, iters: usize) -> Result<Optimum> {
    let exact = prob.weighted_normal_solution(prob.scales())?;
    if prob.loss() == Loss::Squared {
        return Ok(Optimum {
            value: prob.value(&exact),
            x: exact,
        });
    }
    let step = 1.0 / prob.subgradient_bound().unwrap_or(1.0).max(1e-12);
    let run = subgradient_descent(prob, &exact, iters, step);
    let mut best = run.best;
    let mut starts = vec![best.x.clone(), exact];
    for (i, d) in prob.data().iter().enumerate() {
        if prob.scales()[i] > 0.0 && d.r.nrows() >= prob.dim() {
            if let Ok(x) = d.r.clone().svd(true, true).solve(&d.s, 1e-12) {
                starts.push(x);
            }
        }
    }
    for start in starts {
        let polished = prob.reweighted_polish(&start, 2000)?;
        if polished.value < best.value {
            best = polished;
        }
    }
    Ok(best)
}

/// Replaces `f_i` by `pi_i * n * f_i`, so that `(1/n) sum_i` of the new
/// local costs equals `sum_i pi_i f_i`.
pub fn weighted_objective(prob: &LeastSquaresProblem, pi: &[f64]) -> Result<LeastSquaresProblem> {
    let n = prob.agents();
    if pi.len() != n {
        return Err(Error::input(format!("{} weights for {n} agents", pi.len())));
    }
    if let Some((i, w)) = pi
        .iter()
        .enumerate()
        .find(|(_, w)| !(w.is_finite() && **w >= -1e-12))
    {
        return Err(Error::input(format!(
            "weight {i} is {w}; weights must be nonnegative"
        )));
    }
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::input(format!("weights sum to {total}, expected 1")));
    }
    let scales = prob
        .scales()
        .iter()
        .zip(pi)
        .map(|(c, w)| c * w.max(0.0) * n as f64)
        .collect();
    LeastSquaresProblem::with_scales(prob.data().to_vec(), scales, prob.loss())
}
