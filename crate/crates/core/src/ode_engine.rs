//! Fixed-step RK4 for linear matrix ODEs whose coefficients are known at grid
//! nodes. Midpoint stages use the average of the two neighbouring nodes.

use num_complex::Complex64;

use crate::error::{VkError, VkResult};
use crate::grid::{OperatorFamily, TimeGrid};
use crate::matrix_kernel::{identity, inverse, is_finite, ComplexMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Where a right-hand side is evaluated: at node `i`, or halfway between
/// nodes `i` and `i + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum At {
    Node(usize),
    Mid(usize),
}

/// Integrates Y' = rhs(t, Y) from `start` to the end of the grid in
/// `direction`. Element k of the result is Y at node start ± k.
pub fn rk4<F>(
    grid: &TimeGrid,
    rhs: F,
    initial: ComplexMatrix,
    start: usize,
    direction: Direction,
) -> VkResult<Vec<ComplexMatrix>>
where
    F: Fn(At, &ComplexMatrix) -> ComplexMatrix,
{
    if start >= grid.len() {
        return Err(VkError::InvalidInput(format!("start node {start} is off the grid")));
    }
    let h = grid.step();
    let mut out = Vec::with_capacity(grid.len());
    let mut y = initial;
    let steps = match direction {
        Direction::Forward => grid.n_steps - start,
        Direction::Backward => start,
    };
    out.push(y.clone());
    for k in 0..steps {
        let (from, to, mid, dt) = match direction {
            Direction::Forward => (start + k, start + k + 1, start + k, h),
            Direction::Backward => (start - k, start - k - 1, start - k - 1, -h),
        };
        let k1 = rhs(At::Node(from), &y);
        let k2 = rhs(At::Mid(mid), &(&y + k1.scale(dt / 2.0)));
        let k3 = rhs(At::Mid(mid), &(&y + k2.scale(dt / 2.0)));
        let k4 = rhs(At::Node(to), &(&y + k3.scale(dt)));
        y += (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0);
        if !is_finite(&y) {
            return Err(VkError::Diverged { node: to });
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Integrates forward and backward from `start`; the result is indexed by node.
pub fn rk4_two_sided<F>(
    grid: &TimeGrid,
    rhs: F,
    initial: ComplexMatrix,
    start: usize,
) -> VkResult<Vec<ComplexMatrix>>
where
    F: Fn(At, &ComplexMatrix) -> ComplexMatrix,
{
    let fwd = rk4(grid, &rhs, initial.clone(), start, Direction::Forward)?;
    let bwd = rk4(grid, &rhs, initial, start, Direction::Backward)?;
    let mut nodes: Vec<ComplexMatrix> = bwd.into_iter().rev().collect();
    nodes.extend(fwd.into_iter().skip(1));
    Ok(nodes)
}

/// Node coefficients with linear interpolation at midpoints.
#[derive(Debug, Clone)]
pub struct NodeCoefficients {
    nodes: Vec<ComplexMatrix>,
}

impl NodeCoefficients {
    pub fn new(nodes: Vec<ComplexMatrix>) -> Self {
        NodeCoefficients { nodes }
    }

    pub fn from_fn(grid: &TimeGrid, coeff: impl Fn(usize) -> ComplexMatrix) -> Self {
        NodeCoefficients { nodes: (0..grid.len()).map(coeff).collect() }
    }

    pub fn at(&self, at: At) -> ComplexMatrix {
        match at {
            At::Node(i) => self.nodes[i].clone(),
            At::Mid(i) => self.midpoint(i),
        }
    }

    /// Cubic interpolation at the midpoint of [i, i+1], linear on two-node grids.
    fn midpoint(&self, i: usize) -> ComplexMatrix {
        let n = self.nodes.len();
        let g = |j: usize| &self.nodes[j];
        if n < 4 {
            return (g(i) + g(i + 1)).scale(0.5);
        }
        let (w, base) = if i == 0 {
            ([5.0, 15.0, -5.0, 1.0], 0)
        } else if i + 2 >= n {
            ([1.0, -5.0, 15.0, 5.0], n - 4)
        } else {
            ([-1.0, 9.0, 9.0, -1.0], i - 1)
        };
        let mut out = g(base).scale(w[0] / 16.0);
        for (k, wk) in w.iter().enumerate().skip(1) {
            out += g(base + k).scale(wk / 16.0);
        }
        out
    }

    pub fn nodes(&self) -> &[ComplexMatrix] {
        &self.nodes
    }
}

/// Y' = G(t)·Y with G given at nodes.
pub fn integrate_linear(
    grid: &TimeGrid,
    coeff: impl Fn(usize) -> ComplexMatrix,
    initial: ComplexMatrix,
    start: usize,
    direction: Direction,
) -> VkResult<Vec<ComplexMatrix>> {
    let g = NodeCoefficients::from_fn(grid, coeff);
    rk4(grid, |at, y| g.at(at) * y, initial, start, direction)
}

pub fn integrate_linear_two_sided(
    grid: &TimeGrid,
    coeff: &NodeCoefficients,
    initial: ComplexMatrix,
    start: usize,
) -> VkResult<Vec<ComplexMatrix>> {
    rk4_two_sided(grid, |at, y| coeff.at(at) * y, initial, start)
}

/// G = σ₁⁻¹(λσ₂ + γ) at every node.
pub fn spectral_coefficients(
    sigma1: &OperatorFamily,
    sigma2: &OperatorFamily,
    gamma: &OperatorFamily,
    lambda: Complex64,
) -> VkResult<NodeCoefficients> {
    let nodes = (0..sigma1.grid().len())
        .map(|i| Ok(inverse(sigma1.at(i))? * (sigma2.at(i) * lambda + gamma.at(i))))
        .collect::<VkResult<Vec<_>>>()?;
    Ok(NodeCoefficients::new(nodes))
}

/// Φ(λ, t, τ) at every node t: σ₁Φ' = (λσ₂ + γ)Φ, Φ(τ) = I.
pub fn fundamental_matrix(
    sigma1: &OperatorFamily,
    sigma2: &OperatorFamily,
    gamma: &OperatorFamily,
    lambda: Complex64,
    tau: usize,
) -> VkResult<OperatorFamily> {
    let grid = *sigma1.grid();
    let g = spectral_coefficients(sigma1, sigma2, gamma, lambda)?;
    let m = sigma1.shape().0;
    let nodes = integrate_linear_two_sided(&grid, &g, identity(m), tau)?;
    OperatorFamily::new(grid, nodes)
}

/// ‖Φ(t,s)Φ(s,r) − Φ(t,r)‖ for Y' = G·Y.
pub fn cocycle_defect(
    grid: &TimeGrid,
    coeff: &NodeCoefficients,
    r: usize,
    s: usize,
    t: usize,
) -> VkResult<f64> {
    let m = coeff.nodes()[0].nrows();
    let phi_r = integrate_linear_two_sided(grid, coeff, identity(m), r)?;
    let phi_s = integrate_linear_two_sided(grid, coeff, identity(m), s)?;
    Ok((&phi_s[t] * &phi_r[s] - &phi_r[t]).norm())
}

/// log₂ of the error ratio between a run and one with half the step.
pub fn observed_order(err_coarse: f64, err_fine: f64) -> f64 {
    (err_coarse / err_fine).log2()
}
