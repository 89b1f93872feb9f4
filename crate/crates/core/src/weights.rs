//! Row-stochastic `A`, column-stochastic `B`, and the augmented mixing
//! matrix `M = [[A, eps*I], [I - A, B - eps*I]]`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::digraph::Digraph;
use crate::error::{Error, Result};
use crate::spectral::{self, SpectralVerdict};

/// Tolerance on row/column sums when validating stochastic matrices.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Candidate values tried by [`select_epsilon`] when none is given.
pub const DEFAULT_EPSILON_CANDIDATES: [f64; 9] = [0.7, 0.5, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.001];

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    eps: f64,
    m: DMatrix<f64>,
}

impl WeightSystem {
    /// Validates `a` and `b` and assembles `M`.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, eps: f64) -> Result<Self> {
        let m = assemble_m(&a, &b, eps)?;
        Ok(Self { a, b, eps, m })
    }

    /// Uniform weights on a strongly connected graph.
    pub fn uniform(g: &Digraph, eps: f64) -> Result<Self> {
        let (a, b) = uniform_weights(g)?;
        Self::new(a, b, eps)
    }

    /// Like [`WeightSystem::new`] but also checks that the sparsity pattern of
    /// `a` and `b` follows the neighborhoods of `g`.
    pub fn for_graph(g: &Digraph, a: DMatrix<f64>, b: DMatrix<f64>, eps: f64) -> Result<Self> {
        check_pattern(g, &a, &b)?;
        Self::new(a, b, eps)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn agents(&self) -> usize {
        self.a.nrows()
    }

    /// Same `A` and `B` with a different `eps`.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), eps)
    }

    /// Spectral certificate of `M`: simple unit eigenvalue, everything else
    /// strictly inside the unit circle.
    pub fn validate_epsilon(&self) -> Result<SpectralVerdict> {
        spectral::certify(&self.m)
    }

    /// Conservative sufficient bound on `eps` computed from `M` at `eps = 0`.
    pub fn epsilon_bound(&self) -> Result<f64> {
        epsilon_bound(&assemble_m(&self.a, &self.b, 0.0)?)
    }
}

/// `a_ij = 1/|N_i^in|` on in-neighbors and `b_ij = 1/|N_j^out|` on
/// out-neighbors; the latter only needs each sender's out-degree.
pub fn uniform_weights(g: &Digraph) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !g.is_strongly_connected() {
        return Err(Error::input("weights require a strongly connected digraph"));
    }
    let n = g.node_count();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        let senders = g.in_neighbors(i)?;
        let w = 1.0 / senders.len() as f64;
        for &j in senders {
            a[(i, j)] = w;
        }
        let receivers = g.out_neighbors(i)?;
        let w = 1.0 / receivers.len() as f64;
        for &r in receivers {
            b[(r, i)] = w;
        }
    }
    Ok((a, b))
}

/// `theta I + (1 - theta)` times the uniform weights. Raising the self
/// weight keeps the diagonal of `B - eps I` from going strongly negative,
/// which is what lets large `eps` certify.
pub fn lazy_weights(g: &Digraph, self_weight: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(0.0..1.0).contains(&self_weight) {
        return Err(Error::config(
            "weights.self_weight",
            format!("must lie in [0, 1), got {self_weight}"),
        ));
    }
    let (a, b) = uniform_weights(g)?;
    let eye = DMatrix::identity(g.node_count(), g.node_count());
    let mix = |m: DMatrix<f64>| &eye * self_weight + m * (1.0 - self_weight);
    Ok((mix(a), mix(b)))
}

/// How `A` and `B` are derived from the graph.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightScheme {
    #[default]
    Uniform,
    Lazy {
        self_weight: f64,
    },
}

impl WeightScheme {
    pub fn build(&self, g: &Digraph) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        match *self {
            WeightScheme::Uniform => uniform_weights(g),
            WeightScheme::Lazy { self_weight } => lazy_weights(g, self_weight),
        }
    }
}

/// Metropolis-Hastings weights on a symmetric graph; doubly stochastic.
pub fn metropolis_weights(g: &Digraph) -> Result<DMatrix<f64>> {
    if !g.is_symmetric() {
        return Err(Error::input(
            "doubly stochastic weights need an undirected (symmetric) graph",
        ));
    }
    let n = g.node_count();
    let mut w = DMatrix::zeros(n, n);
    for (i, j) in g.edges() {
        let di = g.in_degree(i)?;
        let dj = g.in_degree(j)?;
        w[(i, j)] = 1.0 / di.max(dj) as f64;
    }
    for i in 0..n {
        let off: f64 = w.row(i).sum();
        w[(i, i)] = 1.0 - off;
    }
    Ok(w)
}

pub fn check_row_stochastic(a: &DMatrix<f64>, name: &'static str) -> Result<()> {
    check_square(a, name)?;
    for (i, row) in a.row_iter().enumerate() {
        if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Matrix {
                matrix: name,
                axis: "row",
                index: i,
                message: format!("entry {v} is negative or not finite"),
            });
        }
        let s: f64 = row.sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::Matrix {
                matrix: name,
                axis: "row",
                index: i,
                message: format!("sums to {s}, expected 1"),
            });
        }
    }
    Ok(())
}

pub fn check_column_stochastic(b: &DMatrix<f64>, name: &'static str) -> Result<()> {
    check_square(b, name)?;
    for (j, col) in b.column_iter().enumerate() {
        if let Some(v) = col.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Matrix {
                matrix: name,
                axis: "column",
                index: j,
                message: format!("entry {v} is negative or not finite"),
            });
        }
        let s: f64 = col.sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::Matrix {
                matrix: name,
                axis: "column",
                index: j,
                message: format!("sums to {s}, expected 1"),
            });
        }
    }
    Ok(())
}

fn check_square(m: &DMatrix<f64>, name: &'static str) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::Matrix {
            matrix: name,
            axis: "row",
            index: 0,
            message: format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            ),
        });
    }
    Ok(())
}

/// `a_ij > 0` exactly on in-neighbors of `i`, `b_ij > 0` exactly when `i` is
/// an out-neighbor of `j`.
pub fn check_pattern(g: &Digraph, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    let n = g.node_count();
    if a.shape() != (n, n) || b.shape() != (n, n) {
        return Err(Error::input(format!(
            "weights are {:?} and {:?}, graph has {n} nodes",
            a.shape(),
            b.shape()
        )));
    }
    for i in 0..n {
        for j in 0..n {
            let linked = g.has_edge(i, j) || i == j;
            if (a[(i, j)] > 0.0) != linked {
                return Err(Error::Matrix {
                    matrix: "A",
                    axis: "row",
                    index: i,
                    message: format!("entry at column {j} does not match the in-neighborhood"),
                });
            }
            if (b[(i, j)] > 0.0) != linked {
                return Err(Error::Matrix {
                    matrix: "B",
                    axis: "column",
                    index: j,
                    message: format!("entry at row {i} does not match the out-neighborhood"),
                });
            }
        }
    }
    Ok(())
}

/// Block assembly of `M`. `eps = 0` is accepted so the unperturbed matrix
/// used by [`epsilon_bound`] can be built.
pub fn assemble_m(a: &DMatrix<f64>, b: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::config(
            "epsilon",
            format!("must be a finite value >= 0, got {eps}"),
        ));
    }
    check_row_stochastic(a, "A")?;
    check_column_stochastic(b, "B")?;
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::input(format!(
            "A is {n}x{n} but B is {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, n)).copy_from(&(&eye * eps));
    m.view_mut((n, 0), (n, n)).copy_from(&(&eye - a));
    m.view_mut((n, n), (n, n)).copy_from(&(b - &eye * eps));
    Ok(m)
}

/// `(1/(20+8n)^n) * (1 - |lambda_3|)^n` where `lambda_3` is the third
/// eigenvalue of the unperturbed `M` in the magnitude ordering of
/// [`spectral::sorted_eigenvalues`].
pub fn epsilon_bound(m0: &DMatrix<f64>) -> Result<f64> {
    let eig = spectral::sorted_eigenvalues(m0)?;
    if eig.len() < 3 {
        return Err(Error::input(format!(
            "a {}x{} matrix has no third eigenvalue",
            m0.nrows(),
            m0.ncols()
        )));
    }
    let n = (m0.nrows() / 2) as f64;
    let gap = 1.0 - eig[2].norm();
    if gap <= 0.0 {
        return Err(Error::numeric(format!(
            "third eigenvalue has magnitude {} >= 1",
            eig[2].norm()
        )));
    }
    // log space: (20+8n)^n overflows long before the product underflows
    Ok((n * (gap.ln() - (20.0 + 8.0 * n).ln())).exp())
}

/// Picks the certified candidate with the widest spectral margin.
pub fn select_epsilon(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    candidates: &[f64],
) -> Result<(f64, SpectralVerdict)> {
    let mut best: Option<(f64, SpectralVerdict)> = None;
    for &eps in candidates {
        if eps <= 0.0 {
            continue;
        }
        let verdict = spectral::certify(&assemble_m(a, b, eps)?)?;
        if !verdict.unit_eigenvalue_simple {
            continue;
        }
        if best.as_ref().is_none_or(|(_, v)| verdict.margin > v.margin) {
            best = Some((eps, verdict));
        }
    }
    best.ok_or_else(|| Error::Certification("no candidate epsilon certifies M".into()))
}

/// Row-major CSV with shortest round-trip decimal formatting.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::input(format!("row {}: bad number `{c}`", i + 1)))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::input("ragged matrix csv"));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}
