//! Synchronous iteration engines: D-DGD on the augmented state `(x, y)`,
//! plain DGD under a caller-chosen mixing matrix, and gradient-push.
//!
//! Agent states are `n x p` matrices whose row `i` belongs to agent `i`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::weights::WeightSystem;

/// Push-sum weights at or below this are treated as a broken mixing matrix.
pub const PUSH_SUM_FLOOR: f64 = 1e-300;

/// D-DGD state: estimates `x` and auxiliary variables `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentStates {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub k: usize,
}

impl AgentStates {
    /// Starts from `x0` with `y = 0`.
    pub fn new(x0: DMatrix<f64>) -> Self {
        let y = DMatrix::zeros(x0.nrows(), x0.ncols());
        Self { x: x0, y, k: 0 }
    }

    pub fn agents(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// `z = [x; y]`, a `2n x p` matrix.
    pub fn stacked(&self) -> DMatrix<f64> {
        let (n, p) = self.x.shape();
        let mut z = DMatrix::zeros(2 * n, p);
        z.view_mut((0, 0), (n, p)).copy_from(&self.x);
        z.view_mut((n, 0), (n, p)).copy_from(&self.y);
        z
    }

    pub fn from_stacked(z: &DMatrix<f64>, k: usize) -> Result<Self> {
        if !z.nrows().is_multiple_of(2) {
            return Err(Error::input(format!(
                "stacked state has odd row count {}",
                z.nrows()
            )));
        }
        let n = z.nrows() / 2;
        Ok(Self {
            x: z.rows(0, n).into_owned(),
            y: z.rows(n, n).into_owned(),
            k,
        })
    }

    /// `(1/n)(sum_i x_i + sum_i y_i)`.
    pub fn accumulation_point(&self) -> DVector<f64> {
        let n = self.agents() as f64;
        (row_sum(&self.x) + row_sum(&self.y)) / n
    }

    /// `max_i ||x_i - zbar||`.
    pub fn consensus_error(&self) -> f64 {
        max_row_distance(&self.x, &self.accumulation_point())
    }

    /// `max_i ||y_i||`.
    pub fn y_norm(&self) -> f64 {
        max_row_distance(&self.y, &DVector::zeros(self.dim()))
    }
}

/// Push-sum numerators `w`, weights `v`, and de-biased estimates `x = w / v`.
#[derive(Debug, Clone, PartialEq)]
pub struct PushSumState {
    pub w: DMatrix<f64>,
    pub v: DVector<f64>,
    pub x: DMatrix<f64>,
    pub k: usize,
}

impl PushSumState {
    pub fn new(x0: DMatrix<f64>) -> Self {
        let v = DVector::from_element(x0.nrows(), 1.0);
        Self {
            w: x0.clone(),
            v,
            x: x0,
            k: 0,
        }
    }
}

/// Column sums of an `n x p` state as a length-`p` vector.
pub fn row_sum(x: &DMatrix<f64>) -> DVector<f64> {
    x.row_sum().transpose()
}

/// Mean of the agents' rows.
pub fn column_stochastic_average_track(x: &DMatrix<f64>) -> DVector<f64> {
    row_sum(x) / x.nrows() as f64
}

pub fn max_row_distance(x: &DMatrix<f64>, center: &DVector<f64>) -> f64 {
    x.row_iter()
        .map(|r| (r.transpose() - center).norm())
        .fold(0.0, f64::max)
}

/// Row `i` holds `grad f_i(x_i)`. Fails if a subgradient exceeds the
/// objective's declared bound.
pub fn local_gradients<O: Objective + ?Sized>(obj: &O, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dims(obj, x)?;
    let bound = obj.subgradient_bound();
    let mut g = DMatrix::zeros(x.nrows(), x.ncols());
    for i in 0..x.nrows() {
        let gi = obj.local_subgradient(i, &x.row(i).transpose());
        if let Some(d) = bound {
            let norm = gi.norm();
            if norm > d * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::numeric(format!(
                    "agent {i}: subgradient norm {norm} exceeds bound {d}"
                )));
            }
        }
        g.set_row(i, &gi.transpose());
    }
    Ok(g)
}

fn check_dims<O: Objective + ?Sized>(obj: &O, x: &DMatrix<f64>) -> Result<()> {
    if x.shape() != (obj.agents(), obj.dim()) {
        return Err(Error::input(format!(
            "state is {}x{}, objective expects {}x{}",
            x.nrows(),
            x.ncols(),
            obj.agents(),
            obj.dim()
        )));
    }
    Ok(())
}

/// One D-DGD round in per-agent form:
///
/// `x_i <- sum_j a_ij x_j + eps y_i - alpha grad f_i(x_i)`
/// `y_i <- x_i - sum_j a_ij x_j + sum_j b_ij y_j - eps y_i`
pub fn ddgd_step<O: Objective + ?Sized>(
    st: &AgentStates,
    ws: &WeightSystem,
    obj: &O,
    alpha: f64,
) -> Result<AgentStates> {
    if ws.agents() != st.agents() {
        return Err(Error::input(format!(
            "weights are for {} agents, state has {}",
            ws.agents(),
            st.agents()
        )));
    }
    let g = local_gradients(obj, &st.x)?;
    let eps = ws.eps();
    let mixed_x = ws.a() * &st.x;
    let x = &mixed_x + &st.y * eps - g * alpha;
    let y = &st.x - &mixed_x + ws.b() * &st.y - &st.y * eps;
    Ok(AgentStates { x, y, k: st.k + 1 })
}

/// One D-DGD round in stacked form `z <- M z - alpha g` with the lower half
/// of `g` zero.
pub fn ddgd_step_stacked<O: Objective + ?Sized>(
    st: &AgentStates,
    ws: &WeightSystem,
    obj: &O,
    alpha: f64,
) -> Result<AgentStates> {
    if ws.agents() != st.agents() {
        return Err(Error::input(format!(
            "weights are for {} agents, state has {}",
            ws.agents(),
            st.agents()
        )));
    }
    let n = st.agents();
    let mut g = DMatrix::zeros(2 * n, st.dim());
    g.view_mut((0, 0), (n, st.dim()))
        .copy_from(&local_gradients(obj, &st.x)?);
    let z = ws.m() * st.stacked() - g * alpha;
    AgentStates::from_stacked(&z, st.k + 1)
}

/// One DGD round `x_i <- sum_j w_ij x_j - alpha grad f_i(x_i)`. The caller
/// decides which stochasticity `w` has.
pub fn dgd_step<O: Objective + ?Sized>(
    x: &DMatrix<f64>,
    w: &DMatrix<f64>,
    obj: &O,
    alpha: f64,
) -> Result<DMatrix<f64>> {
    if w.shape() != (x.nrows(), x.nrows()) {
        return Err(Error::input(format!(
            "mixing matrix is {}x{} for {} agents",
            w.nrows(),
            w.ncols(),
            x.nrows()
        )));
    }
    let g = local_gradients(obj, x)?;
    Ok(w * x - g * alpha)
}

/// One gradient-push round with a column-stochastic `b`:
/// `w <- B (w - alpha g(x))`, `v <- B v`, `x_i = w_i / v_i`.
pub fn gradient_push_step<O: Objective + ?Sized>(
    st: &PushSumState,
    b: &DMatrix<f64>,
    obj: &O,
    alpha: f64,
) -> Result<PushSumState> {
    let n = st.v.len();
    if b.shape() != (n, n) {
        return Err(Error::input(format!(
            "mixing matrix is {}x{} for {n} agents",
            b.nrows(),
            b.ncols()
        )));
    }
    let g = local_gradients(obj, &st.x)?;
    let w = b * (&st.w - g * alpha);
    let v = b * &st.v;
    let mut x = w.clone();
    for (i, vi) in v.iter().enumerate() {
        if !(*vi > PUSH_SUM_FLOOR) {
            return Err(Error::numeric(format!(
                "push-sum weight of agent {i} collapsed to {vi}; mixing matrix is not column stochastic over a strongly connected graph"
            )));
        }
        x.row_mut(i).scale_mut(1.0 / vi);
    }
    Ok(PushSumState {
        w,
        v,
        x,
        k: st.k + 1,
    })
}
