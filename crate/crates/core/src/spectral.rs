//! Eigenstructure certificates for mixing matrices and empirical fits of the
//! geometric decay of `M^k` toward its limit.

use nalgebra::{Complex, DMatrix, DVector, Schur};
use serde::Serialize;

use crate::error::{Error, Result};

/// Distance to 1 below which an eigenvalue counts as a unit eigenvalue, and
/// the margin every other eigenvalue must keep from the unit circle.
pub const UNIT_TOL: f64 = 1e-8;

/// `d_k` values at or below this are treated as roundoff and excluded from
/// the geometric fit.
pub const DECAY_FLOOR: f64 = 1e-12;

/// Fitted `ln gamma` must be below `-MIN_LOG_DECAY` for the decay to count.
pub const MIN_LOG_DECAY: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralVerdict {
    pub unit_eigenvalue_simple: bool,
    /// Largest magnitude among the eigenvalues other than the unit one.
    pub second_magnitude: f64,
    pub margin: f64,
    /// Left eigenvector for eigenvalue 1 normalized to sum 1; only present
    /// when the unit eigenvalue is simple.
    pub left_pi: Option<Vec<f64>>,
    /// Eigenvalues in the order of [`sorted_eigenvalues`], as `(re, im)`.
    pub eigenvalues: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    /// Fitted per-step contraction factor; 0 when `M^k` hits its limit
    /// immediately.
    pub gamma_hat: f64,
    /// Smallest constant with `d_k <= gamma_const * gamma_hat^k` over the fit
    /// window.
    pub gamma_const: f64,
    /// Worst absolute deviation of `ln d_k` from the least-squares line.
    pub max_residual: f64,
    /// First `k` with `d_k <= tol`.
    pub first_k_below_tol: Option<usize>,
    /// Inclusive `k` range used by the fit.
    pub window: (usize, usize),
    /// `d_k = ||M^k - limit||_inf` for `k = 1..=distances.len()`.
    pub distances: Vec<f64>,
}

impl RateFit {
    pub fn envelope(&self, k: usize) -> f64 {
        self.gamma_const * self.gamma_hat.powi(k as i32)
    }

    /// CSV with columns `k,d_k`.
    pub fn distances_csv(&self) -> String {
        let mut out = String::from("k,d_k\n");
        for (i, d) in self.distances.iter().enumerate() {
            out.push_str(&format!("{},{:?}\n", i + 1, d));
        }
        out
    }
}

/// Eigenvalues sorted by magnitude descending, ties broken by real part
/// descending and then imaginary part descending.
pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::input(format!(
            "eigenvalues need a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    // Highly symmetric inputs (complete graphs) can stall the shifted QR
    // sweep at machine precision; the transpose has the same spectrum and a
    // looser deflation threshold still resolves eigenvalues far below the
    // certification tolerance.
    let max_iter = 1000 * m.nrows();
    let schur = [f64::EPSILON, 64.0 * f64::EPSILON]
        .iter()
        .flat_map(|&tol| [(tol, m.clone()), (tol, m.transpose())])
        .find_map(|(tol, mat)| Schur::try_new(mat, tol, max_iter))
        .ok_or_else(|| Error::numeric("Schur iteration did not converge"))?;
    let mut eig: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|x, y| {
        y.norm()
            .total_cmp(&x.norm())
            .then(y.re.total_cmp(&x.re))
            .then(y.im.total_cmp(&x.im))
    });
    Ok(eig)
}

/// Checks for a simple eigenvalue at 1 with every other eigenvalue strictly
/// inside the unit circle.
pub fn certify(m: &DMatrix<f64>) -> Result<SpectralVerdict> {
    let eig = sorted_eigenvalues(m)?;
    let one = Complex::new(1.0, 0.0);
    let unit_count = eig
        .iter()
        .filter(|l| (**l - one).norm() <= UNIT_TOL)
        .count();
    let closest = eig
        .iter()
        .enumerate()
        .min_by(|(_, x), (_, y)| (**x - one).norm().total_cmp(&(**y - one).norm()))
        .map(|(i, _)| i)
        .expect("non-empty spectrum");
    let second_magnitude = eig
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != closest)
        .map(|(_, l)| l.norm())
        .fold(0.0, f64::max);
    let simple = unit_count == 1 && second_magnitude <= 1.0 - UNIT_TOL;
    let left_pi = if simple {
        Some(left_unit_eigenvector(m)?)
    } else {
        None
    };
    Ok(SpectralVerdict {
        unit_eigenvalue_simple: simple,
        second_magnitude,
        margin: 1.0 - second_magnitude,
        left_pi,
        eigenvalues: eig.iter().map(|l| (l.re, l.im)).collect(),
    })
}

/// Solves `pi M = pi`, `sum(pi) = 1` as the stacked least-squares system
/// `[M^T - I; 1^T] pi = [0; 1]`.
pub fn left_unit_eigenvector(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    let mut sys = DMatrix::zeros(n + 1, n);
    sys.view_mut((0, 0), (n, n))
        .copy_from(&(m.transpose() - DMatrix::<f64>::identity(n, n)));
    sys.row_mut(n).fill(1.0);
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = 1.0;
    let svd = sys.svd(true, true);
    let smallest = svd.singular_values.min();
    if smallest < 1e-10 {
        return Err(Error::numeric(
            "unit eigenvalue is not simple; left eigenvector not unique",
        ));
    }
    let pi = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::numeric(format!("left eigenvector: {e}")))?;
    Ok(pi.iter().copied().collect())
}

/// Stationary distribution of a row-stochastic matrix.
pub fn stationary_distribution(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    crate::weights::check_row_stochastic(a, "A")?;
    left_unit_eigenvector(a)
}

/// `[[11'/n, 11'/n], [0, 0]]`, the limit of `M^k`.
pub fn limit_matrix(n: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(2 * n, 2 * n);
    if n > 0 {
        l.view_mut((0, 0), (n, 2 * n)).fill(1.0 / n as f64);
    }
    l
}

/// Max absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Tracks `d_k = ||M^k - limit||_inf` for `k = 1..=k_max` (stopping early
/// once `d_k` reaches roundoff) and fits `ln d_k ~ ln G + k ln g` by least
/// squares over the iterates after the first 10%.
pub fn power_convergence(m: &DMatrix<f64>, k_max: usize, tol: f64) -> Result<RateFit> {
    if !m.nrows().is_multiple_of(2) || m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::input(format!(
            "expected a 2n x 2n matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let limit = limit_matrix(m.nrows() / 2);
    let mut power = m.clone();
    let mut distances = Vec::with_capacity(k_max.min(4096));
    let mut first_k_below_tol = None;
    for k in 1..=k_max {
        let d = inf_norm(&(&power - &limit));
        if !d.is_finite() {
            return Err(Error::numeric(format!("M^{k} overflowed")));
        }
        distances.push(d);
        if first_k_below_tol.is_none() && d <= tol {
            first_k_below_tol = Some(k);
        }
        if d <= DECAY_FLOOR && first_k_below_tol.is_some() {
            break;
        }
        power = &power * m;
    }
    fit_geometric(distances, first_k_below_tol)
}

fn fit_geometric(distances: Vec<f64>, first_k_below_tol: Option<usize>) -> Result<RateFit> {
    let usable = distances.iter().take_while(|d| **d > DECAY_FLOOR).count();
    if usable == 0 {
        return Ok(RateFit {
            gamma_hat: 0.0,
            gamma_const: 0.0,
            max_residual: 0.0,
            first_k_below_tol,
            window: (1, 1),
            distances,
        });
    }
    let skip = if usable >= 10 { usable / 10 } else { 0 };
    let points: Vec<(f64, f64)> = (skip..usable)
        .map(|i| ((i + 1) as f64, distances[i].ln()))
        .collect();
    let window = (skip + 1, usable);

    let (slope, intercept) = if points.len() == 1 {
        let (k, ld) = points[0];
        (ld / k, 0.0)
    } else {
        least_squares_line(&points)
    };
    // a plateau away from zero fits a ratio indistinguishable from 1
    if points.len() > 1 && slope >= -MIN_LOG_DECAY {
        return Err(Error::numeric(format!(
            "||M^k - limit|| does not decay over k in {}..={} (fitted ratio {})",
            window.0,
            window.1,
            slope.exp()
        )));
    }
    let max_residual = points
        .iter()
        .map(|(k, ld)| (ld - (intercept + slope * k)).abs())
        .fold(0.0, f64::max);
    let lift = points
        .iter()
        .map(|(k, ld)| ld - slope * k)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(RateFit {
        gamma_hat: slope.exp(),
        gamma_const: lift.exp(),
        max_residual,
        first_k_below_tol,
        window,
        distances,
    })
}

/// Ordinary least squares `y = intercept + slope * x`.
pub(crate) fn least_squares_line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}
