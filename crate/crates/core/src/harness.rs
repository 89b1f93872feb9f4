//! Experiment configuration, seeded runs with per-iteration metrics, the
//! `O(ln K / sqrt K)` rate report, algorithm comparisons and density sweeps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algorithms::{self, AgentStates, PushSumState};
use crate::digraph::Digraph;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::objective::{self, LeastSquaresProblem, Objective, Optimum, ProblemSpec};
use crate::schedule::{ScheduleKind, StepSchedule};
use crate::spectral::{self, RateFit, SpectralVerdict};
use crate::weights::{self, WeightScheme, WeightSystem};

/// Subgradient iterations spent by the optimum oracle before refinement.
pub const ORACLE_ITERS: usize = 5000;

/// Slack allowed when checking that `gap / (ln K / sqrt K)` does not grow.
pub const ENVELOPE_SLACK: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Directed distributed gradient descent on the augmented matrix `M`.
    Ddgd,
    /// DGD with Metropolis weights on the undirected version of the graph.
    DgdDoubly,
    /// DGD with the row-stochastic `A` only.
    DgdRow,
    /// DGD with the column-stochastic `B` only.
    DgdCol,
    /// Gradient-push over `B`.
    GradientPush,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Ddgd,
        Algorithm::DgdDoubly,
        Algorithm::DgdRow,
        Algorithm::DgdCol,
        Algorithm::GradientPush,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ddgd => "ddgd",
            Algorithm::DgdDoubly => "dgd_doubly",
            Algorithm::DgdRow => "dgd_row",
            Algorithm::DgdCol => "dgd_col",
            Algorithm::GradientPush => "gradient_push",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Random {
        n: usize,
        extra_edge_prob: f64,
        #[serde(default)]
        seed: u64,
    },
    Cycle {
        n: usize,
    },
    Complete {
        n: usize,
    },
    EdgeList {
        path: PathBuf,
    },
}

impl GraphSpec {
    pub fn build(&self) -> Result<Digraph> {
        match self {
            GraphSpec::Random {
                n,
                extra_edge_prob,
                seed,
            } => {
                if *n == 0 {
                    return Err(Error::config("graph.n", "must be at least 1"));
                }
                if !(0.0..=1.0).contains(extra_edge_prob) {
                    return Err(Error::config("graph.extra_edge_prob", "must lie in [0, 1]"));
                }
                Digraph::random_strongly_connected(*n, *extra_edge_prob, *seed)
            }
            GraphSpec::Cycle { n } | GraphSpec::Complete { n } if *n == 0 => {
                Err(Error::config("graph.n", "must be at least 1"))
            }
            GraphSpec::Cycle { n } => Digraph::cycle(*n),
            GraphSpec::Complete { n } => Digraph::complete(*n),
            GraphSpec::EdgeList { path } => Digraph::read_edge_list(path),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Init {
    Zero,
    /// i.i.d. normal entries with the given standard deviation, seeded by the
    /// run seed.
    Random {
        scale: f64,
    },
}

impl Default for Init {
    fn default() -> Self {
        Init::Random { scale: 1.0 }
    }
}

fn default_radius() -> f64 {
    1e8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub graph: GraphSpec,
    pub algorithm: Algorithm,
    /// D-DGD perturbation; chosen by spectral certification when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Weights used for `A` and `B`; the doubly stochastic baseline always
    /// uses Metropolis weights.
    #[serde(default)]
    pub weights: WeightScheme,
    pub schedule: StepSchedule,
    pub iterations: usize,
    #[serde(default)]
    pub problem: ProblemSpec,
    /// Replay a serialized problem instead of generating one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem_file: Option<PathBuf>,
    #[serde(default)]
    pub init: Init,
    #[serde(default)]
    pub seed: u64,
    /// Run D-DGD even when `M` fails certification.
    #[serde(default)]
    pub allow_uncertified: bool,
    /// Verify the sum/average recursions every step (always on in debug
    /// builds).
    #[serde(default)]
    pub check_recursions: bool,
    /// Abort when any agent state leaves this ball (guards the squared loss).
    #[serde(default = "default_radius")]
    pub radius_guard: f64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(eps) = self.epsilon {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(Error::config("epsilon", format!("must be > 0, got {eps}")));
            }
        }
        self.schedule.validate()?;
        self.problem.validate()?;
        if let Init::Random { scale } = self.init {
            if !(scale.is_finite() && scale >= 0.0) {
                return Err(Error::config("init.scale", "must be finite and >= 0"));
            }
        }
        if let WeightScheme::Lazy { self_weight } = self.weights {
            if !(0.0..1.0).contains(&self_weight) {
                return Err(Error::config("weights.self_weight", "must lie in [0, 1)"));
            }
        }
        if !(self.radius_guard > 0.0) {
            return Err(Error::config("radius_guard", "must be > 0"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .fold(String::new(), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }

    pub fn run_id(&self) -> String {
        format!("{}-{}", self.algorithm.name(), &self.hash()[..12])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Graph, weights and problem resolved from a config.
#[derive(Debug, Clone)]
pub struct Setup {
    pub graph: Digraph,
    pub problem: LeastSquaresProblem,
    pub optimum: Optimum,
    pub x0: DMatrix<f64>,
}

impl Setup {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let graph = cfg.graph.build()?;
        let n = graph.node_count();
        let problem = match &cfg.problem_file {
            Some(path) => LeastSquaresProblem::read(path)?,
            None => LeastSquaresProblem::generate(n, &cfg.problem)?,
        };
        if problem.agents() != n {
            return Err(Error::config(
                "problem_file",
                format!("problem has {} agents, graph has {n}", problem.agents()),
            ));
        }
        let optimum = objective::solve_centralized(&problem, ORACLE_ITERS)?;
        let p = problem.dim();
        let x0 = match cfg.init {
            Init::Zero => DMatrix::zeros(n, p),
            Init::Random { scale } => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                DMatrix::from_fn(n, p, |_, _| {
                    scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                })
            }
        };
        Ok(Self {
            graph,
            problem,
            optimum,
            x0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub k: usize,
    pub alpha: f64,
    pub residual: f64,
    pub consensus_error: f64,
    pub y_norm: f64,
    pub objective_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub config_hash: String,
    pub algorithm: Algorithm,
    pub agents: usize,
    pub edges: usize,
    pub epsilon: Option<f64>,
    pub certificate: Option<SpectralVerdict>,
    pub f_star: f64,
    pub x_star: Vec<f64>,
    /// `min_k f(center_k)`.
    pub f_m: f64,
    pub best_k: usize,
    /// Worst violation of the per-step sum (D-DGD) or average
    /// (column-stochastic DGD) recursion, when checked.
    pub max_recursion_error: Option<f64>,
    /// `X_0 = 1 x*^T`; residuals are then absolute distances.
    pub converged_at_start: bool,
    pub wall_time_secs: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub summary: RunSummary,
    pub final_x: DMatrix<f64>,
    pub final_y: Option<DMatrix<f64>>,
    /// The point each metric is centered on after the last step: the
    /// accumulation point for D-DGD, the agents' mean otherwise.
    pub final_center: DVector<f64>,
}

pub const TRACE_HEADER: &str = "k,alpha,residual,consensus_error,y_norm,objective_gap";

impl RunTrace {
    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("trace holds the initial record")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * self.records.len());
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:?},{:?},{:?},{:?},{:?}",
                r.k, r.alpha, r.residual, r.consensus_error, r.y_norm, r.objective_gap
            );
        }
        out
    }

    /// `k,log10_residual` for plotting.
    pub fn plot_csv(&self) -> String {
        let mut out = String::from("k,log10_residual\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{:?}", r.k, r.residual.log10());
        }
        out
    }

    /// First iteration whose residual is at or below `threshold`.
    pub fn iterations_to(&self, threshold: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.residual <= threshold)
            .map(|r| r.k)
    }

    /// `min_{k <= last_k} f(center_k) - f*`.
    pub fn best_gap_until(&self, last_k: usize) -> f64 {
        self.records[..=last_k.min(self.iterations())]
            .iter()
            .map(|r| r.objective_gap)
            .fold(f64::INFINITY, f64::min)
    }
}

enum Engine {
    Ddgd {
        ws: WeightSystem,
        st: AgentStates,
    },
    Dgd {
        w: DMatrix<f64>,
        x: DMatrix<f64>,
        column: bool,
    },
    Push {
        b: DMatrix<f64>,
        st: PushSumState,
    },
}

impl Engine {
    fn estimates(&self) -> &DMatrix<f64> {
        match self {
            Engine::Ddgd { st, .. } => &st.x,
            Engine::Dgd { x, .. } => x,
            Engine::Push { st, .. } => &st.x,
        }
    }

    fn center(&self) -> DVector<f64> {
        match self {
            Engine::Ddgd { st, .. } => st.accumulation_point(),
            _ => algorithms::column_stochastic_average_track(self.estimates()),
        }
    }

    fn y_norm(&self) -> f64 {
        match self {
            Engine::Ddgd { st, .. } => st.y_norm(),
            _ => 0.0,
        }
    }

    /// Advances one round and returns the recursion violation when `check`.
    fn step(&mut self, obj: &LeastSquaresProblem, alpha: f64, check: bool) -> Result<Option<f64>> {
        match self {
            Engine::Ddgd { ws, st } => {
                let next = algorithms::ddgd_step(st, ws, obj, alpha)?;
                let err = if check {
                    let g = algorithms::local_gradients(obj, &st.x)?;
                    let before = algorithms::row_sum(&st.x) + algorithms::row_sum(&st.y);
                    let after = algorithms::row_sum(&next.x) + algorithms::row_sum(&next.y);
                    let expected = &before - algorithms::row_sum(&g) * alpha;
                    Some((after - &expected).amax() / (1.0 + expected.amax()))
                } else {
                    None
                };
                *st = next;
                Ok(err)
            }
            Engine::Dgd { w, x, column } => {
                let next = algorithms::dgd_step(x, w, obj, alpha)?;
                let err = if check && *column {
                    let g = algorithms::local_gradients(obj, x)?;
                    let n = x.nrows() as f64;
                    let expected = algorithms::column_stochastic_average_track(x)
                        - algorithms::row_sum(&g) * (alpha / n);
                    let got = algorithms::column_stochastic_average_track(&next);
                    Some((got - &expected).amax() / (1.0 + expected.amax()))
                } else {
                    None
                };
                *x = next;
                Ok(err)
            }
            Engine::Push { b, st } => {
                *st = algorithms::gradient_push_step(st, b, obj, alpha)?;
                Ok(None)
            }
        }
    }
}

/// Executes one configured run.
pub fn run(cfg: &RunConfig) -> Result<RunTrace> {
    let setup = Setup::from_config(cfg)?;
    run_with(cfg, &setup)
}

/// Executes a run on an already resolved setup.
pub fn run_with(cfg: &RunConfig, setup: &Setup) -> Result<RunTrace> {
    let started = Instant::now();
    let g = &setup.graph;
    let prob = &setup.problem;
    let opt = &setup.optimum;
    let n = g.node_count();
    let mut warnings = Vec::new();
    let mut epsilon = None;
    let mut certificate = None;

    let mut engine = match cfg.algorithm {
        Algorithm::Ddgd => {
            let (a, b) = cfg.weights.build(g)?;
            let (eps, verdict) = match cfg.epsilon {
                Some(eps) => {
                    let verdict = spectral::certify(&weights::assemble_m(&a, &b, eps)?)?;
                    (eps, verdict)
                }
                None => weights::select_epsilon(&a, &b, &weights::DEFAULT_EPSILON_CANDIDATES)?,
            };
            if !verdict.unit_eigenvalue_simple {
                let msg = format!(
                    "epsilon = {eps}: M does not have a simple unit eigenvalue (|lambda_2| = {})",
                    verdict.second_magnitude
                );
                if !cfg.allow_uncertified {
                    return Err(Error::Certification(msg));
                }
                warnings.push(msg);
            }
            epsilon = Some(eps);
            certificate = Some(verdict);
            Engine::Ddgd {
                ws: WeightSystem::new(a, b, eps)?,
                st: AgentStates::new(setup.x0.clone()),
            }
        }
        Algorithm::DgdRow | Algorithm::DgdCol => {
            let (a, b) = cfg.weights.build(g)?;
            let column = cfg.algorithm == Algorithm::DgdCol;
            Engine::Dgd {
                w: if column { b } else { a },
                x: setup.x0.clone(),
                column,
            }
        }
        Algorithm::DgdDoubly => {
            if !g.is_symmetric() {
                warnings.push(
                    "doubly stochastic DGD runs on the undirected version of the graph".into(),
                );
            }
            Engine::Dgd {
                w: weights::metropolis_weights(&g.symmetrized())?,
                x: setup.x0.clone(),
                column: false,
            }
        }
        Algorithm::GradientPush => {
            let (_, b) = cfg.weights.build(g)?;
            Engine::Push {
                b,
                st: PushSumState::new(setup.x0.clone()),
            }
        }
    };

    let optimum_rows = DMatrix::from_fn(n, prob.dim(), |_, j| opt.x[j]);
    let initial_distance = (&setup.x0 - &optimum_rows).norm();
    let converged_at_start = initial_distance == 0.0;
    let norm_by = if converged_at_start {
        1.0
    } else {
        initial_distance
    };
    let check = cfg.check_recursions || cfg!(debug_assertions);

    let mut records = Vec::with_capacity(cfg.iterations + 1);
    let mut max_recursion_error: Option<f64> = None;
    let mut f_m = f64::INFINITY;
    let mut best_k = 0;
    for k in 0..=cfg.iterations {
        let x = engine.estimates();
        let radius = x.amax();
        if !(radius <= cfg.radius_guard) {
            return Err(Error::numeric(format!(
                "iteration {k}: agent state magnitude {radius} left the radius guard {}",
                cfg.radius_guard
            )));
        }
        let center = engine.center();
        let value = prob.value(&center);
        if value < f_m {
            f_m = value;
            best_k = k;
        }
        let alpha = cfg.schedule.alpha(k);
        records.push(TraceRecord {
            k,
            alpha,
            residual: (x - &optimum_rows).norm() / norm_by,
            consensus_error: algorithms::max_row_distance(x, &center),
            y_norm: engine.y_norm(),
            objective_gap: value - opt.value,
        });
        if k == cfg.iterations {
            break;
        }
        if let Some(err) = engine.step(prob, alpha, check)? {
            if err > 1e-9 {
                return Err(Error::numeric(format!(
                    "iteration {k}: sum recursion violated by {err}"
                )));
            }
            max_recursion_error = Some(max_recursion_error.map_or(err, |m| m.max(err)));
        }
    }

    let final_center = engine.center();
    let (final_x, final_y) = match engine {
        Engine::Ddgd { st, .. } => (st.x, Some(st.y)),
        Engine::Dgd { x, .. } => (x, None),
        Engine::Push { st, .. } => (st.x, None),
    };
    Ok(RunTrace {
        records,
        summary: RunSummary {
            run_id: cfg.run_id(),
            config_hash: cfg.hash(),
            algorithm: cfg.algorithm,
            agents: n,
            edges: g.edge_count(),
            epsilon,
            certificate,
            f_star: opt.value,
            x_star: opt.x.iter().copied().collect(),
            f_m,
            best_k,
            max_recursion_error,
            converged_at_start,
            wall_time_secs: started.elapsed().as_secs_f64(),
            warnings,
        },
        final_x,
        final_y,
        final_center,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    /// False when the schedule is not `inverse_sqrt`; the remaining fields
    /// are then unset.
    pub applicable: bool,
    pub k_grid: Vec<usize>,
    /// `f_m(K') - f*` on the grid.
    pub gaps: Vec<f64>,
    /// `gap / (ln K' / sqrt K')`.
    pub ratios: Vec<f64>,
    /// Least-squares fit of `gap * sum(alpha) = C1 + C2 * sum(alpha^2)`.
    pub c1_emp: Option<f64>,
    pub c2_emp: Option<f64>,
    pub envelope_ok: Option<bool>,
}

impl RateReport {
    pub fn not_applicable() -> Self {
        Self {
            applicable: false,
            k_grid: Vec::new(),
            gaps: Vec::new(),
            ratios: Vec::new(),
            c1_emp: None,
            c2_emp: None,
            envelope_ok: None,
        }
    }
}

/// Checks the best objective gap against `ln K / sqrt K` on the grid
/// `{K/8, K/4, K/2, K}`.
pub fn rate_envelope(trace: &RunTrace, sched: &StepSchedule) -> Result<RateReport> {
    if sched.kind != ScheduleKind::InverseSqrt
        && !(sched.kind == ScheduleKind::InversePow && sched.exponent == Some(0.5))
    {
        return Err(Error::config(
            "schedule.kind",
            "rate envelope needs inverse_sqrt steps",
        ));
    }
    if !trace.summary.f_star.is_finite() {
        return Err(Error::numeric("optimum value unavailable"));
    }
    let k = trace.iterations();
    if k < 16 {
        return Err(Error::config(
            "iterations",
            "rate envelope needs at least 16 iterations",
        ));
    }
    let k_grid = vec![k / 8, k / 4, k / 2, k];
    let gaps: Vec<f64> = k_grid
        .iter()
        .map(|&kk| trace.best_gap_until(kk).max(0.0))
        .collect();
    let ratios: Vec<f64> = k_grid
        .iter()
        .zip(&gaps)
        .map(|(&kk, gap)| {
            let kk = kk as f64;
            gap / (kk.ln() / kk.sqrt())
        })
        .collect();
    let envelope_ok = ratios
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + ENVELOPE_SLACK));
    let (c1, c2) = fit_rate_constants(&k_grid, &gaps, sched);
    Ok(RateReport {
        applicable: true,
        k_grid,
        gaps,
        ratios,
        c1_emp: Some(c1),
        c2_emp: Some(c2),
        envelope_ok: Some(envelope_ok),
    })
}

/// Least squares for `(C1, C2)` in `gap_j * S1_j = C1 + C2 * S2_j`, with
/// `S1`, `S2` the partial sums of `alpha` and `alpha^2` up to `K_j`.
fn fit_rate_constants(k_grid: &[usize], gaps: &[f64], sched: &StepSchedule) -> (f64, f64) {
    let points: Vec<(f64, f64)> = k_grid
        .iter()
        .zip(gaps)
        .map(|(&kk, gap)| {
            let (s1, s2) = sched.partial_sums(kk);
            (s2, gap * s1)
        })
        .collect();
    let (c2, c1) = spectral::least_squares_line(&points);
    (c1, c2)
}

/// Upper bounds on `max_i ||x_i^k - zbar^k||` and `max_i ||y_i^k||` built
/// from a measured geometric fit of `M^k` and a subgradient bound `d`:
///
/// `G g^k sum_j ||z_j^0|| + n G d sum_{r=1}^{k-1} g^{k-r} alpha_{r-1} (+ 2 d alpha_{k-1})`
pub fn consensus_envelope(
    fit: &RateFit,
    n: usize,
    d: f64,
    z0_norm_sum: f64,
    sched: &StepSchedule,
    k: usize,
) -> (f64, f64) {
    if k == 0 {
        return (f64::INFINITY, f64::INFINITY);
    }
    let (g, gamma) = (fit.gamma_const, fit.gamma_hat);
    let mut tail = 0.0;
    for r in 1..k {
        tail += gamma.powi((k - r) as i32) * sched.alpha(r - 1);
    }
    let y_bound = g * gamma.powi(k as i32) * z0_norm_sum + n as f64 * g * d * tail;
    (y_bound + 2.0 * d * sched.alpha(k - 1), y_bound)
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub run_id: String,
    pub algorithm: Algorithm,
    pub final_residual: f64,
    pub final_consensus_error: f64,
    pub final_objective_gap: f64,
    /// Distance of the final center to the minimizer of the objective
    /// reweighted by the stationary distribution of `A` (row-stochastic runs
    /// only).
    pub weighted_optimum_distance: Option<f64>,
    /// Distance of the final center to the true minimizer.
    pub optimum_distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Named qualitative checks and whether they held.
    pub checks: Vec<(String, bool)>,
    #[serde(skip)]
    pub traces: Vec<RunTrace>,
}

impl Comparison {
    /// Residual series aligned on `k`, one column per run.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k");
        for r in &self.rows {
            let _ = write!(out, ",{}", r.run_id);
        }
        out.push('\n');
        let len = self
            .traces
            .iter()
            .map(|t| t.records.len())
            .max()
            .unwrap_or(0);
        for k in 0..len {
            let _ = write!(out, "{k}");
            for t in &self.traces {
                match t.records.get(k) {
                    Some(rec) => {
                        let _ = write!(out, ",{:?}", rec.residual);
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn row(&self, algorithm: Algorithm) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm)
    }
}

/// Runs every config on the shared graph and problem.
pub fn compare(cfgs: &[RunConfig], exec: Execution) -> Result<Comparison> {
    let first = cfgs
        .first()
        .ok_or_else(|| Error::config("runs", "need at least one run"))?;
    for (i, c) in cfgs.iter().enumerate() {
        if c.graph != first.graph {
            return Err(Error::config(
                format!("runs[{i}].graph"),
                "differs from runs[0]",
            ));
        }
        if c.weights != first.weights {
            return Err(Error::config(
                format!("runs[{i}].weights"),
                "differs from runs[0]",
            ));
        }
        if c.problem != first.problem || c.problem_file != first.problem_file {
            return Err(Error::config(
                format!("runs[{i}].problem"),
                "differs from runs[0]",
            ));
        }
    }
    let setup = Setup::from_config(first)?;
    let traces = exec
        .map(cfgs, |c| run_with(c, &setup))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut weighted_opt = None;
    if cfgs.iter().any(|c| c.algorithm == Algorithm::DgdRow) {
        let (a, _) = first.weights.build(&setup.graph)?;
        let pi = spectral::stationary_distribution(&a)?;
        let weighted = objective::weighted_objective(&setup.problem, &pi)?;
        weighted_opt = Some(objective::solve_centralized(&weighted, ORACLE_ITERS)?);
    }

    let rows: Vec<ComparisonRow> = traces
        .iter()
        .map(|t| {
            let last = t.last();
            ComparisonRow {
                run_id: t.summary.run_id.clone(),
                algorithm: t.summary.algorithm,
                final_residual: last.residual,
                final_consensus_error: last.consensus_error,
                final_objective_gap: last.objective_gap,
                weighted_optimum_distance: match (t.summary.algorithm, &weighted_opt) {
                    (Algorithm::DgdRow, Some(w)) => Some((&t.final_center - &w.x).norm()),
                    _ => None,
                },
                optimum_distance: (&t.final_center - &setup.optimum.x).norm(),
            }
        })
        .collect();

    let mut checks = Vec::new();
    let ddgd = rows.iter().find(|r| r.algorithm == Algorithm::Ddgd);
    if let (Some(row), Some(d)) = (rows.iter().find(|r| r.algorithm == Algorithm::DgdRow), ddgd) {
        checks.push((
            "dgd_row stalls at the weighted optimum".to_string(),
            row.weighted_optimum_distance
                .is_some_and(|w| w < row.optimum_distance),
        ));
        checks.push((
            "dgd_row terminal residual >= 5x ddgd".to_string(),
            row.final_residual >= 5.0 * d.final_residual,
        ));
    }
    for alg in [Algorithm::Ddgd, Algorithm::GradientPush] {
        if let Some(r) = rows.iter().find(|r| r.algorithm == alg) {
            checks.push((
                format!("{} residual decays", alg.name()),
                r.final_residual < 0.5,
            ));
        }
    }
    if let (Some(d), Some(p)) = (
        ddgd,
        rows.iter().find(|r| r.algorithm == Algorithm::GradientPush),
    ) {
        let ratio = d.final_residual.max(p.final_residual) / d.final_residual.min(p.final_residual);
        checks.push((
            "ddgd and gradient_push within 10x".to_string(),
            ratio <= 10.0,
        ));
    }
    Ok(Comparison {
        rows,
        checks,
        traces,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub extra_edge_prob: f64,
    pub edges: usize,
    pub iterations_to_threshold: Option<usize>,
    pub final_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub threshold: f64,
    pub rows: Vec<SweepRow>,
    /// Adjacent pairs where a denser graph needed more iterations.
    pub inversions: usize,
    pub trend_ok: bool,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("extra_edge_prob,edges,iterations_to_threshold,final_residual\n");
        for r in &self.rows {
            let iters = r
                .iterations_to_threshold
                .map_or(String::new(), |k| k.to_string());
            let _ = writeln!(
                out,
                "{:?},{},{},{:?}",
                r.extra_edge_prob, r.edges, iters, r.final_residual
            );
        }
        out
    }
}

/// Reruns `base` on random graphs of increasing density (same seed) and
/// records the iterations needed to reach `threshold`.
pub fn density_sweep(
    base: &RunConfig,
    extra_edge_probs: &[f64],
    threshold: f64,
    exec: Execution,
) -> Result<SweepTable> {
    let GraphSpec::Random { n, seed, .. } = base.graph else {
        return Err(Error::config(
            "base.graph.kind",
            "density sweep needs a random graph",
        ));
    };
    if extra_edge_probs.is_empty() {
        return Err(Error::config("extra_edge_probs", "must not be empty"));
    }
    if extra_edge_probs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config(
            "extra_edge_probs",
            "must be sorted ascending",
        ));
    }
    let cfgs: Vec<RunConfig> = extra_edge_probs
        .iter()
        .map(|&p| RunConfig {
            graph: GraphSpec::Random {
                n,
                extra_edge_prob: p,
                seed,
            },
            ..base.clone()
        })
        .collect();
    let traces = exec
        .map(&cfgs, run)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<SweepRow> = traces
        .iter()
        .zip(extra_edge_probs)
        .map(|(t, &p)| SweepRow {
            extra_edge_prob: p,
            edges: t.summary.edges,
            iterations_to_threshold: t.iterations_to(threshold),
            final_residual: t.last().residual,
        })
        .collect();
    let inversions = rows
        .windows(2)
        .filter(|w| {
            let a = w[0].iterations_to_threshold.unwrap_or(usize::MAX);
            let b = w[1].iterations_to_threshold.unwrap_or(usize::MAX);
            b > a
        })
        .count();
    Ok(SweepTable {
        threshold,
        rows,
        inversions,
        trend_ok: inversions <= 1,
    })
}

/// Paths of the three per-run artifacts.
pub struct RunArtifacts {
    pub trace: PathBuf,
    pub plot: PathBuf,
    pub config: PathBuf,
    pub rate: PathBuf,
}

/// Writes `<runid>.trace.csv`, `<runid>.plot.csv`, `<runid>.config.json`
/// and `<runid>.rate.json` into `dir`.
pub fn write_artifacts(
    dir: &Path,
    cfg: &RunConfig,
    trace: &RunTrace,
    rate: &RateReport,
) -> Result<RunArtifacts> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let id = &trace.summary.run_id;
    let paths = RunArtifacts {
        trace: dir.join(format!("{id}.trace.csv")),
        plot: dir.join(format!("{id}.plot.csv")),
        config: dir.join(format!("{id}.config.json")),
        rate: dir.join(format!("{id}.rate.json")),
    };
    let write =
        |path: &Path, body: String| std::fs::write(path, body).map_err(|e| Error::io(path, e));
    write(&paths.trace, trace.to_csv())?;
    write(&paths.plot, trace.plot_csv())?;
    write(&paths.config, serde_json::to_string_pretty(cfg)?)?;
    let rate_json = serde_json::json!({
        "config_hash": trace.summary.config_hash,
        "summary": trace.summary,
        "rate": rate,
    });
    write(&paths.rate, serde_json::to_string_pretty(&rate_json)?)?;
    Ok(paths)
}
