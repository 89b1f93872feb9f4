//! End-to-end acceptance checks. Each check prints one PASS/FAIL line.
//!
//! Reference values are computed here from first principles (closed-form
//! spectra, normal equations, hand-rolled power iteration and regression)
//! rather than taken from the library under test.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ddgd::algorithms::{self, AgentStates};
use ddgd::exec::Execution;
use ddgd::harness::{self, Algorithm, GraphSpec, Init, RunConfig, RunTrace};
use ddgd::objective::{LeastSquaresProblem, Loss, Objective, ProblemSpec};
use ddgd::schedule::StepSchedule;
use ddgd::spectral;
use ddgd::weights::{self, WeightScheme, WeightSystem};
use ddgd::Digraph;

/// Checks whose failure is analysed in the project notes. They still print
/// FAIL; the target only errors if one of them unexpectedly passes or any
/// other check fails.
const KNOWN_UNATTAINABLE: &[&str] = &["column-stochastic average"];

type Outcome = Result<String, String>;
type Check<'a> = (&'static str, Box<dyn Fn() -> Outcome + Sync + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn base_config(alg: Algorithm, sched: StepSchedule, iterations: usize) -> RunConfig {
    RunConfig {
        graph: GraphSpec::Random {
            n: 6,
            extra_edge_prob: 0.3,
            seed: 7,
        },
        algorithm: alg,
        epsilon: None,
        weights: WeightScheme::Uniform,
        schedule: sched,
        iterations,
        problem: ProblemSpec {
            seed: 11,
            ..ProblemSpec::default()
        },
        problem_file: None,
        init: Init::Random { scale: 1.0 },
        seed: 5,
        allow_uncertified: false,
        check_recursions: true,
        radius_guard: 1e8,
    }
}

fn converging_schedule() -> StepSchedule {
    StepSchedule::inverse_pow(0.05, 0.75)
}

fn run(cfg: &RunConfig) -> Result<RunTrace, String> {
    harness::run(cfg).map_err(|e| format!("{} run failed: {e}", cfg.algorithm.name()))
}

// ---- reference computations ----

fn stacked_m(a: &DMatrix<f64>, b: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, bj) = (i / n, j / n);
        let (r, c) = (i % n, j % n);
        let id = if r == c { 1.0 } else { 0.0 };
        match (bi, bj) {
            (0, 0) => a[(r, c)],
            (0, 1) => eps * id,
            (1, 0) => id - a[(r, c)],
            _ => b[(r, c)] - eps * id,
        }
    })
}

/// Spectral radius of `M - L` by repeated squaring with rescaling:
/// `||P^(2^j)||^(2^-j)`.
fn second_magnitude_by_squaring(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows() / 2;
    let mut limit = DMatrix::zeros(2 * n, 2 * n);
    limit.view_mut((0, 0), (n, 2 * n)).fill(1.0 / n as f64);
    let mut p = m - limit;
    let mut log_scale = 0.0;
    let mut exponent = 1.0;
    for _ in 0..14 {
        let s = p.norm();
        if s == 0.0 {
            return 0.0;
        }
        p /= s;
        log_scale += s.ln() / exponent;
        p = &p * &p;
        exponent *= 2.0;
    }
    (log_scale + p.norm().ln() / exponent).exp()
}

/// `pi' A = pi'` by power iteration on the lazy chain `(I + A)/2`.
fn stationary_by_power(a: &DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows();
    let lazy = (DMatrix::identity(n, n) + a) * 0.5;
    let mut pi = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..200_000 {
        let next = lazy.transpose() * &pi;
        let diff = (&next - &pi).amax();
        pi = next;
        if diff < 1e-16 {
            break;
        }
    }
    let total = pi.sum();
    pi / total
}

/// Minimizer of `sum_i w_i ||R_i x - s_i||^2`.
fn weighted_normal_equations(prob: &LeastSquaresProblem, w: &[f64]) -> DVector<f64> {
    let p = prob.dim();
    let mut lhs = DMatrix::zeros(p, p);
    let mut rhs = DVector::zeros(p);
    for (d, wi) in prob.data().iter().zip(w) {
        lhs += d.r.transpose() * &d.r * *wi;
        rhs += d.r.transpose() * &d.s * *wi;
    }
    lhs.lu().solve(&rhs).expect("nonsingular normal equations")
}

fn norm_loss_value(prob: &LeastSquaresProblem, x: &DVector<f64>) -> f64 {
    prob.data()
        .iter()
        .map(|d| (&d.r * x - &d.s).norm())
        .sum::<f64>()
        / prob.agents() as f64
}

// ---- checks ----

fn weight_structure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for g_idx in 0..50 {
        let n = rng.random_range(2..=20);
        let p = rng.random_range(0.0..0.6);
        let g = Digraph::random_strongly_connected(n, p, g_idx).map_err(|e| e.to_string())?;
        let eps = rng.random_range(0.01..0.9);
        let ws = WeightSystem::uniform(&g, eps).map_err(|e| e.to_string())?;
        let m = ws.m();
        ensure(m == &stacked_m(ws.a(), ws.b(), eps), || {
            format!("graph {g_idx}: block layout differs")
        })?;
        let ones = DVector::from_element(2 * n, 1.0);
        let top = DVector::from_fn(2 * n, |i, _| if i < n { 1.0 } else { 0.0 });
        let col_sums = m.transpose() * &ones;
        let e1 = (col_sums - &ones).amax();
        let e2 = (m * &top - &top).amax();
        worst = worst.max(e1).max(e2);
        ensure(e1 <= 1e-12 && e2 <= 1e-12, || {
            format!("graph {g_idx} (n={n}): column/left error {e1:e}, right error {e2:e}")
        })?;
    }
    Ok(format!("50 graphs, worst deviation {worst:.1e}"))
}

fn power_limit() -> Outcome {
    let mut graphs = vec![
        Digraph::cycle(2).unwrap(),
        Digraph::cycle(3).unwrap(),
        Digraph::complete(4).unwrap(),
    ];
    for seed in 0..9 {
        graphs.push(Digraph::random_strongly_connected(2 + seed as usize, 0.3, seed).unwrap());
    }
    let mut worst_gap: f64 = 0.0;
    let mut slowest = 0;
    for (idx, g) in graphs.iter().enumerate() {
        let (a, b) = weights::uniform_weights(g).map_err(|e| e.to_string())?;
        let (eps, verdict) = weights::select_epsilon(&a, &b, &weights::DEFAULT_EPSILON_CANDIDATES)
            .map_err(|e| format!("graph {idx}: {e}"))?;
        let m = weights::assemble_m(&a, &b, eps).unwrap();
        let fit = spectral::power_convergence(&m, 10_000, 1e-8)
            .map_err(|e| format!("graph {idx}: {e}"))?;
        let k = fit
            .first_k_below_tol
            .ok_or_else(|| format!("graph {idx}: ||M^k - L|| stayed above 1e-8 up to k = 10000"))?;
        slowest = slowest.max(k);
        let lambda2 = second_magnitude_by_squaring(&m);
        ensure((lambda2 - verdict.second_magnitude).abs() < 1e-3, || {
            format!(
                "graph {idx}: eigensolver |l2| {} vs reference {lambda2}",
                verdict.second_magnitude
            )
        })?;
        let gap = (fit.gamma_hat - lambda2).abs();
        worst_gap = worst_gap.max(gap);
        ensure(gap <= 0.05, || {
            format!(
                "graph {idx}: fitted ratio {} vs |l2| {lambda2}",
                fit.gamma_hat
            )
        })?;
    }
    Ok(format!(
        "{} graphs, all below 1e-8 by k = {slowest}, worst |ratio - |l2|| = {worst_gap:.3}",
        graphs.len()
    ))
}

fn small_epsilon_sufficiency() -> Outcome {
    // M(0) is block lower triangular, so its spectrum is spec(A) u spec(B).
    // 2-cycle: {1, 1, 0, 0}, lambda_3 = 0.
    // 3-cycle: A = B = (I + P)/2 has eigenvalues (1 + w^k)/2, magnitudes
    //   {1, 1/2, 1/2}, so lambda_3 = 1/2.
    // complete 3-node: A = B = J/3, lambda_3 = 0.
    let cases: [(Digraph, f64); 3] = [
        (Digraph::cycle(2).unwrap(), 36f64.powi(-2)),
        (Digraph::cycle(3).unwrap(), (0.5f64 / 44.0).powi(3)),
        (Digraph::complete(3).unwrap(), 44f64.powi(-3)),
    ];
    let mut checked = 0;
    for (g, bound_ref) in &cases {
        let n = g.node_count();
        let (a, b) = weights::uniform_weights(g).unwrap();
        let bound = weights::epsilon_bound(&weights::assemble_m(&a, &b, 0.0).unwrap())
            .map_err(|e| e.to_string())?;
        // the zero eigenvalues are defective, so the solver only resolves
        // them to about sqrt(machine epsilon)
        ensure((bound - bound_ref).abs() <= 1e-6 * bound_ref, || {
            format!("n={n}: bound {bound:e} vs closed form {bound_ref:e}")
        })?;
        for frac in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let eps = frac * bound_ref.min(bound);
            let m = weights::assemble_m(&a, &b, eps).unwrap();
            let v = spectral::certify(&m).map_err(|e| e.to_string())?;
            ensure(v.unit_eigenvalue_simple, || {
                format!(
                    "n={n}, eps={eps:e}: not certified (|l2| = {})",
                    v.second_magnitude
                )
            })?;
            // independent: M - I has a one-dimensional kernel
            let sv = (&m - DMatrix::identity(2 * n, 2 * n)).singular_values();
            let mut sv: Vec<f64> = sv.iter().copied().collect();
            sv.sort_by(f64::total_cmp);
            ensure(sv[0] < 1e-12 && sv[1] > 1e-12, || {
                format!("n={n}, eps={eps:e}: singular values {sv:?}")
            })?;
            checked += 1;
        }
    }
    // With uniform weights B - 0.7 I has diagonal entries 1/d - 0.7 < 0 and
    // an eigenvalue escapes the unit circle, so the search uses lazy weights
    // with self weight 1/2.
    let mut uniform_hits = 0;
    let mut found = None;
    for seed in 0..200 {
        let g = Digraph::random_strongly_connected(6, 0.3, seed).unwrap();
        if WeightSystem::uniform(&g, 0.7)
            .unwrap()
            .validate_epsilon()
            .map_err(|e| e.to_string())?
            .unit_eigenvalue_simple
        {
            uniform_hits += 1;
        }
        let (a, b) = weights::lazy_weights(&g, 0.5).unwrap();
        let m = WeightSystem::for_graph(&g, a, b, 0.7)
            .map_err(|e| e.to_string())?
            .m()
            .clone();
        if found.is_none()
            && spectral::certify(&m)
                .map_err(|e| e.to_string())?
                .unit_eigenvalue_simple
            && second_magnitude_by_squaring(&m) < 1.0
        {
            found = Some(seed);
        }
    }
    let seed = found.ok_or("eps = 0.7 certified on none of 200 generated 6-node digraphs")?;
    Ok(format!(
        "{checked} small-eps instances certified; eps = 0.7 certifies on 6-node seed {seed} (lazy weights; uniform: {uniform_hits}/200)"
    ))
}

fn consensus_and_vanishing_y(ddgd: &RunTrace) -> Outcome {
    let last = ddgd.last();
    // recompute from the final state rather than trusting the trace columns
    let y = ddgd.final_y.as_ref().ok_or("no auxiliary state")?;
    let n = ddgd.final_x.nrows() as f64;
    let zbar = (ddgd.final_x.row_sum().transpose() + y.row_sum().transpose()) / n;
    let cons = ddgd
        .final_x
        .row_iter()
        .map(|r| (r.transpose() - &zbar).norm())
        .fold(0.0, f64::max);
    let y_max = y.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
    ensure((cons - last.consensus_error).abs() < 1e-12, || {
        "trace consensus column disagrees".into()
    })?;
    ensure(cons < 1e-3 && y_max < 1e-3, || {
        format!("consensus {cons:e}, max |y_i| {y_max:e}")
    })?;
    Ok(format!("consensus {cons:.2e}, max |y_i| {y_max:.2e}"))
}

fn optimality(ddgd: &RunTrace, cfg: &RunConfig) -> Outcome {
    let prob = LeastSquaresProblem::generate(6, &cfg.problem).unwrap();
    // reference optimum: the summary's x* must beat every probe around it
    let x_star = DVector::from_vec(ddgd.summary.x_star.clone());
    let f_star = norm_loss_value(&prob, &x_star);
    ensure((f_star - ddgd.summary.f_star).abs() < 1e-12, || {
        "f* inconsistent".into()
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..2000 {
        let r: f64 = 10f64.powf(rng.random_range(-6.0..0.0));
        let dir = DVector::from_fn(prob.dim(), |_, _| rng.random_range(-1.0..1.0));
        let probe = &x_star + dir * r;
        ensure(norm_loss_value(&prob, &probe) >= f_star - 1e-10, || {
            format!("x* is not a minimizer: probe at radius {r:e} is lower")
        })?;
    }
    let center = &ddgd.final_center;
    let gap = norm_loss_value(&prob, center) - f_star;
    // z-bar at k = 0 is the mean of x_i^0 because y^0 = 0
    let f_scale = ddgd.records[0].objective_gap;
    ensure(gap < 1e-2 * f_scale, || {
        format!("gap {gap:e} vs 1e-2 * f-scale {f_scale:e}")
    })?;
    Ok(format!(
        "f(zbar) - f* = {gap:.2e}, f-scale (initial gap) {f_scale:.3}"
    ))
}

fn rate_envelope() -> Outcome {
    let cfg = base_config(Algorithm::Ddgd, StepSchedule::inverse_sqrt(0.1), 4000);
    let t = run(&cfg)?;
    let rep = harness::rate_envelope(&t, &cfg.schedule).map_err(|e| e.to_string())?;
    let mut ratios = Vec::new();
    for k in [500usize, 1000, 2000, 4000] {
        let best = t.records[..=k]
            .iter()
            .map(|r| r.objective_gap)
            .fold(f64::INFINITY, f64::min);
        let kf = k as f64;
        ratios.push(best / (kf.ln() / kf.sqrt()));
    }
    ensure(rep.k_grid == [500, 1000, 2000, 4000], || {
        format!("grid {:?}", rep.k_grid)
    })?;
    for (r, lib) in ratios.iter().zip(&rep.ratios) {
        ensure((r - lib).abs() <= 1e-12 * r.abs().max(1e-300), || {
            "ratio mismatch".into()
        })?;
    }
    let ok = ratios.windows(2).all(|w| w[1] <= 1.2 * w[0]);
    ensure(ok && rep.envelope_ok == Some(true), || {
        format!("ratios {ratios:?}")
    })?;
    Ok(format!(
        "ratios {}",
        ratios
            .iter()
            .map(|r| format!("{r:.2e}"))
            .collect::<Vec<_>>()
            .join(" > ")
    ))
}

fn heterogeneous_squared(alg: Algorithm) -> RunConfig {
    let mut cfg = base_config(alg, converging_schedule(), 20_000);
    cfg.problem.loss = Loss::Squared;
    cfg.problem.heterogeneity = 1.0;
    cfg
}

fn row_stochastic_wrong_limit() -> Outcome {
    let runs = [
        heterogeneous_squared(Algorithm::Ddgd),
        heterogeneous_squared(Algorithm::DgdRow),
    ];
    let cmp = harness::compare(&runs, Execution::default()).map_err(|e| e.to_string())?;
    let (ddgd, row) = (&cmp.traces[0], &cmp.traces[1]);
    let g = runs[0].graph.build().unwrap();
    let prob = LeastSquaresProblem::generate(6, &runs[0].problem).unwrap();
    let (a, _) = weights::uniform_weights(&g).unwrap();
    let pi = stationary_by_power(&a);
    let x_hat = weighted_normal_equations(&prob, pi.as_slice());
    let x_star = weighted_normal_equations(&prob, &[1.0; 6]);

    let cons = row.last().consensus_error;
    let to_hat = (&row.final_center - &x_hat).norm();
    let row_dist = (&row.final_center - &x_star).norm();
    let ddgd_dist = (&ddgd.final_center - &x_star).norm();
    ensure(cons < 1e-3, || format!("row-stochastic consensus {cons:e}"))?;
    ensure(to_hat < 1e-2, || {
        format!("distance to weighted minimizer {to_hat:e}")
    })?;
    ensure(row_dist >= 5.0 * ddgd_dist, || {
        format!("distance to x*: row {row_dist:e} vs ddgd {ddgd_dist:e}")
    })?;
    ensure(row.last().residual >= 5.0 * ddgd.last().residual, || {
        format!(
            "residual: row {:e} vs ddgd {:e}",
            row.last().residual,
            ddgd.last().residual
        )
    })?;
    Ok(format!(
        "|x - x_hat| = {to_hat:.1e}, |x - x*| = {row_dist:.2e} vs ddgd {ddgd_dist:.1e}"
    ))
}

fn column_stochastic_average() -> Outcome {
    let cfg = base_config(Algorithm::DgdCol, converging_schedule(), 20_000);
    let setup = harness::Setup::from_config(&cfg).map_err(|e| e.to_string())?;
    let (_, b) = weights::uniform_weights(&setup.graph).unwrap();
    let prob = &setup.problem;
    let n = prob.agents() as f64;
    let mut x = setup.x0.clone();
    let mut worst: f64 = 0.0;
    for k in 0..cfg.iterations {
        let alpha = cfg.schedule.alpha(k);
        let mean = x.row_sum().transpose() / n;
        let mut grad_sum = DVector::zeros(prob.dim());
        for i in 0..prob.agents() {
            grad_sum += prob.local_subgradient(i, &x.row(i).transpose());
        }
        let predicted = &mean - grad_sum * (alpha / n);
        x = algorithms::dgd_step(&x, &b, prob, alpha).map_err(|e| e.to_string())?;
        let got = algorithms::column_stochastic_average_track(&x);
        worst = worst.max((got - predicted).amax());
    }
    let mean = x.row_sum().transpose() / n;
    let spread = algorithms::max_row_distance(&x, &mean);
    let scale = setup.optimum.x.norm().max(1.0);
    let dist = (&mean - &setup.optimum.x).norm();
    ensure(worst <= 1e-12, || {
        format!("average recursion off by {worst:e}")
    })?;
    ensure(spread > 1e-2, || format!("agents agree to {spread:e}"))?;
    ensure(dist < 5e-2 * scale, || {
        format!(
            "|xbar - x*| = {dist:.3} exceeds {:.3} (recursion holds to {worst:.0e}, spread {spread:.2})",
            5e-2 * scale
        )
    })?;
    Ok(format!(
        "recursion {worst:.0e}, |xbar - x*| = {dist:.2e}, spread {spread:.2}"
    ))
}

fn stacked_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for gi in 0..10u64 {
        let n = rng.random_range(2..=12);
        let g = Digraph::random_strongly_connected(n, 0.4, gi).unwrap();
        let ws = WeightSystem::uniform(&g, rng.random_range(0.05..0.9)).unwrap();
        let prob = LeastSquaresProblem::generate(
            n,
            &ProblemSpec {
                seed: gi,
                ..ProblemSpec::default()
            },
        )
        .unwrap();
        let m_ref = stacked_m(ws.a(), ws.b(), ws.eps());
        for _ in 0..100 {
            let x = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-3.0..3.0));
            let y = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-3.0..3.0));
            let alpha = rng.random_range(0.0..1.0);
            let st = AgentStates { x, y, k: 0 };
            let blockwise = algorithms::ddgd_step(&st, &ws, &prob, alpha).unwrap();
            let stacked = algorithms::ddgd_step_stacked(&st, &ws, &prob, alpha).unwrap();
            let mut gz = DMatrix::zeros(2 * n, 3);
            for i in 0..n {
                let gi = prob.local_subgradient(i, &st.x.row(i).transpose());
                gz.row_mut(i).copy_from(&gi.transpose());
            }
            let reference = &m_ref * st.stacked() - gz * alpha;
            let d1 = (blockwise.stacked() - stacked.stacked()).amax();
            let d2 = (blockwise.stacked() - &reference).amax();
            worst = worst.max(d1).max(d2);
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!(
        "1000 states on 10 graphs, max deviation {worst:.1e}"
    ))
}

fn density_trend() -> Outcome {
    let mut cfg = base_config(Algorithm::Ddgd, converging_schedule(), 20_000);
    cfg.graph = GraphSpec::Random {
        n: 8,
        extra_edge_prob: 0.0,
        seed: 7,
    };
    let table = harness::density_sweep(&cfg, &[0.0, 0.3, 0.8], 1e-2, Execution::default())
        .map_err(|e| e.to_string())?;
    let iters: Vec<Option<usize>> = table
        .rows
        .iter()
        .map(|r| r.iterations_to_threshold)
        .collect();
    let edges: Vec<usize> = table.rows.iter().map(|r| r.edges).collect();
    ensure(iters.iter().all(Option::is_some), || {
        format!("threshold not reached: {iters:?}")
    })?;
    let inversions = iters.windows(2).filter(|w| w[1] > w[0]).count();
    ensure(inversions <= 1 && table.trend_ok, || {
        format!("{inversions} inversions: {iters:?}")
    })?;
    ensure(edges.windows(2).all(|w| w[1] >= w[0]), || {
        format!("edges not nested {edges:?}")
    })?;
    Ok(format!(
        "edges {edges:?} -> iterations {:?}",
        iters.iter().map(|k| k.unwrap()).collect::<Vec<_>>()
    ))
}

fn push_parity(ddgd: &RunTrace) -> Outcome {
    let push = run(&base_config(
        Algorithm::GradientPush,
        converging_schedule(),
        20_000,
    ))?;
    let (a, b) = (ddgd.last().residual, push.last().residual);
    let ratio = a.max(b) / a.min(b);
    ensure(ratio <= 10.0, || {
        format!("ddgd {a:e} vs gradient-push {b:e}")
    })?;
    Ok(format!(
        "ddgd {a:.2e}, gradient-push {b:.2e}, ratio {ratio:.2}"
    ))
}

fn determinism() -> Outcome {
    let cfg = base_config(Algorithm::Ddgd, StepSchedule::inverse_sqrt(0.1), 2000);
    let first = run(&cfg)?.to_csv();
    let json = serde_json::to_string(&cfg).unwrap();
    let again = run(&RunConfig::from_json(&json).map_err(|e| e.to_string())?)?.to_csv();
    ensure(first == again, || "traces differ".into())?;
    Ok(format!("{} bytes identical across two runs", first.len()))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let ddgd_cfg = base_config(Algorithm::Ddgd, converging_schedule(), 20_000);
    let shared = harness::run(&ddgd_cfg);

    let checks: Vec<Check> = vec![
        ("weight matrix structure", Box::new(weight_structure)),
        ("powers of M converge to the limit", Box::new(power_limit)),
        (
            "small epsilon certifies",
            Box::new(small_epsilon_sufficiency),
        ),
        (
            "consensus and vanishing y",
            Box::new(|| consensus_and_vanishing_y(shared.as_ref().map_err(|e| e.to_string())?)),
        ),
        (
            "optimality of the accumulation point",
            Box::new(|| optimality(shared.as_ref().map_err(|e| e.to_string())?, &ddgd_cfg)),
        ),
        ("ln K / sqrt K envelope", Box::new(rate_envelope)),
        (
            "row-stochastic DGD wrong limit",
            Box::new(row_stochastic_wrong_limit),
        ),
        (
            "column-stochastic average",
            Box::new(column_stochastic_average),
        ),
        (
            "blockwise and stacked steps agree",
            Box::new(stacked_equivalence),
        ),
        ("denser graphs converge no slower", Box::new(density_trend)),
        (
            "gradient-push parity",
            Box::new(|| push_parity(shared.as_ref().map_err(|e| e.to_string())?)),
        ),
        ("deterministic traces", Box::new(determinism)),
    ];

    let results: Vec<(Outcome, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = checks
            .iter()
            .map(|(_, f)| {
                s.spawn(move || {
                    let t = Instant::now();
                    (f(), t.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| (Err("panicked".into()), 0.0)))
            .collect()
    });

    let mut unexpected = 0;
    for (i, ((name, _), (outcome, secs))) in checks.iter().zip(&results).enumerate() {
        let known = KNOWN_UNATTAINABLE.contains(name);
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        let note = if known { " [known, see notes]" } else { "" };
        println!("{tag} {:>2} {name}: {detail} ({secs:.1}s){note}", i + 1);
        if outcome.is_ok() == known {
            unexpected += 1;
        }
    }
    let passed = results.iter().filter(|(o, _)| o.is_ok()).count();
    println!(
        "{passed}/{} passed in {:.1}s",
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} unexpected outcome(s)");
        ExitCode::FAILURE
    }
}
