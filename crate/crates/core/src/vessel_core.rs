//! Differential vessels: the operator families, their conditions, transfer
//! functions, trajectories, coupling and gauge equivalence.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{VkError, VkResult};
use crate::grid::{difference, difference_scalar, OperatorFamily, TimeGrid};
use crate::matrix_kernel::{
    eigenvalues, hermitian_defect, hermitian_part, identity, inverse, min_pairwise_gap,
    min_singular_value, resolvent, zeros, ComplexMatrix, HermitianMatrix,
};
use crate::ode_engine::fundamental_matrix;
use crate::par::{map_indices, max_f64, try_map_indices, Execution};
use crate::probes::{probe_lambdas, probe_nodes};

/// Family tolerance used when checking that two families agree node by node.
const MATCH_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialVessel {
    grid: TimeGrid,
    n: usize,
    m: usize,
    a1: OperatorFamily,
    a2: OperatorFamily,
    b: OperatorFamily,
    sigma1: OperatorFamily,
    sigma2: OperatorFamily,
    gamma: OperatorFamily,
    gamma_star: OperatorFamily,
}

impl DifferentialVessel {
    /// Validates shapes, hermitian σ₁ and σ₂, and invertible σ₁ at every node.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a1: OperatorFamily,
        a2: OperatorFamily,
        b: OperatorFamily,
        sigma1: OperatorFamily,
        sigma2: OperatorFamily,
        gamma: OperatorFamily,
        gamma_star: OperatorFamily,
    ) -> VkResult<Self> {
        let grid = *a1.grid();
        let (n, m) = b.shape();
        let expect = [
            ("A1", &a1, (n, n)),
            ("A2", &a2, (n, n)),
            ("B", &b, (n, m)),
            ("sigma1", &sigma1, (m, m)),
            ("sigma2", &sigma2, (m, m)),
            ("gamma", &gamma, (m, m)),
            ("gamma_star", &gamma_star, (m, m)),
        ];
        for (name, fam, shape) in expect {
            if fam.grid() != &grid {
                return Err(VkError::DimensionMismatch(format!("{name} lives on a different grid")));
            }
            if fam.shape() != shape {
                return Err(VkError::DimensionMismatch(format!(
                    "{name} is {:?}, expected {:?}",
                    fam.shape(),
                    shape
                )));
            }
        }
        let project = |fam: &OperatorFamily| -> VkResult<OperatorFamily> {
            let nodes = fam
                .nodes()
                .iter()
                .map(|s| HermitianMatrix::new(s.clone()).map(HermitianMatrix::into_matrix))
                .collect::<VkResult<Vec<_>>>()?;
            OperatorFamily::new(grid, nodes)
        };
        let sigma1 = project(&sigma1)?;
        let sigma2 = project(&sigma2)?;
        for (i, s) in sigma1.nodes().iter().enumerate() {
            if min_singular_value(s) <= 1e-12 * s.norm() {
                return Err(VkError::Singular(format!("sigma1 at node {i}")));
            }
        }
        Ok(DifferentialVessel { grid, n, m, a1, a2, b, sigma1, sigma2, gamma, gamma_star })
    }

    /// Builds γ* from the linkage condition.
    pub fn with_linkage(
        a1: OperatorFamily,
        a2: OperatorFamily,
        b: OperatorFamily,
        sigma1: OperatorFamily,
        sigma2: OperatorFamily,
        gamma: OperatorFamily,
    ) -> VkResult<Self> {
        let nodes = (0..b.grid().len())
            .map(|i| linkage_gamma_star(b.at(i), sigma1.at(i), sigma2.at(i), gamma.at(i)))
            .collect();
        let gamma_star = OperatorFamily::new(*b.grid(), nodes)?;
        Self::new(a1, a2, b, sigma1, sigma2, gamma, gamma_star)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn a1(&self) -> &OperatorFamily {
        &self.a1
    }
    pub fn a2(&self) -> &OperatorFamily {
        &self.a2
    }
    pub fn b(&self) -> &OperatorFamily {
        &self.b
    }
    pub fn sigma1(&self) -> &OperatorFamily {
        &self.sigma1
    }
    pub fn sigma2(&self) -> &OperatorFamily {
        &self.sigma2
    }
    pub fn gamma(&self) -> &OperatorFamily {
        &self.gamma
    }
    pub fn gamma_star(&self) -> &OperatorFamily {
        &self.gamma_star
    }

    /// S(λ, t) = I − Bᴴ(λI − A₁)⁻¹Bσ₁ at a node.
    pub fn transfer(&self, lambda: Complex64, node: usize) -> VkResult<ComplexMatrix> {
        self.check_node(node)?;
        let b = self.b.at(node);
        let r = resolvent(self.a1.at(node), lambda)?;
        Ok(identity(self.m) - b.adjoint() * r * b * self.sigma1.at(node))
    }

    /// S⁻¹ through its own realization I + Bᴴ(λI − A₁ − Bσ₁Bᴴ)⁻¹Bσ₁.
    pub fn transfer_inverse(&self, lambda: Complex64, node: usize) -> VkResult<ComplexMatrix> {
        self.check_node(node)?;
        let b = self.b.at(node);
        let bs = b * self.sigma1.at(node);
        let r = resolvent(&(self.a1.at(node) + &bs * b.adjoint()), lambda)?;
        Ok(identity(self.m) + b.adjoint() * r * bs)
    }

    /// S at every node for one λ.
    pub fn transfer_along(&self, lambda: Complex64, exec: Execution) -> VkResult<Vec<ComplexMatrix>> {
        try_map_indices(exec, self.grid.len(), |i| self.transfer(lambda, i))
    }

    /// S for every (λ, node) pair.
    pub fn transfer_sweep(
        &self,
        points: &[(Complex64, usize)],
        exec: Execution,
    ) -> VkResult<Vec<ComplexMatrix>> {
        try_map_indices(exec, points.len(), |k| self.transfer(points[k].0, points[k].1))
    }

    pub fn spectrum(&self, node: usize) -> VkResult<SpectrumReport> {
        self.check_node(node)?;
        let eigenvalues = eigenvalues(self.a1.at(node));
        let min_gap = min_pairwise_gap(&eigenvalues);
        Ok(SpectrumReport { eigenvalues, min_gap })
    }

    /// Eigenvalues of A₁ at every node, flattened.
    pub fn all_eigenvalues(&self) -> Vec<Complex64> {
        self.a1.nodes().iter().flat_map(eigenvalues).collect()
    }

    pub fn input_fundamental(&self, lambda: Complex64, tau: usize) -> VkResult<OperatorFamily> {
        fundamental_matrix(&self.sigma1, &self.sigma2, &self.gamma, lambda, tau)
    }

    pub fn output_fundamental(&self, lambda: Complex64, tau: usize) -> VkResult<OperatorFamily> {
        fundamental_matrix(&self.sigma1, &self.sigma2, &self.gamma_star, lambda, tau)
    }

    fn check_node(&self, node: usize) -> VkResult<()> {
        if node >= self.grid.len() {
            return Err(VkError::InvalidInput(format!("node {node} is off the grid")));
        }
        Ok(())
    }
}

/// γ* = γ + σ₂BᴴBσ₁ − σ₁BᴴBσ₂.
pub fn linkage_gamma_star(
    b: &ComplexMatrix,
    sigma1: &ComplexMatrix,
    sigma2: &ComplexMatrix,
    gamma: &ComplexMatrix,
) -> ComplexMatrix {
    let bb = b.adjoint() * b;
    gamma + sigma2 * &bb * sigma1 - sigma1 * &bb * sigma2
}

pub fn eval_transfer(v: &DifferentialVessel, lambda: Complex64, node: usize) -> VkResult<ComplexMatrix> {
    v.transfer(lambda, node)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    pub min_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    Lax,
    Colligation1,
    Colligation2,
    InputVessel,
    OutputVessel,
    Linkage,
}

impl Condition {
    pub const ALL: [Condition; 6] = [
        Condition::Lax,
        Condition::Colligation1,
        Condition::Colligation2,
        Condition::InputVessel,
        Condition::OutputVessel,
        Condition::Linkage,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Condition::Lax => "lax",
            Condition::Colligation1 => "colligation1",
            Condition::Colligation2 => "colligation2",
            Condition::InputVessel => "input_vessel",
            Condition::OutputVessel => "output_vessel",
            Condition::Linkage => "linkage",
        }
    }

    pub fn is_differential(&self) -> bool {
        matches!(self, Condition::Lax | Condition::InputVessel | Condition::OutputVessel)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionResidual {
    pub condition: Condition,
    /// Max over nodes of the Frobenius residual.
    pub value: f64,
    /// Worst node.
    pub node: usize,
    /// Estimated O(h²) truncation error of the differences.
    pub allowance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub tol: f64,
    pub step: f64,
    pub residuals: Vec<ConditionResidual>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.residuals.iter().all(|r| r.passed)
    }

    pub fn get(&self, c: Condition) -> &ConditionResidual {
        self.residuals.iter().find(|r| r.condition == c).expect("all conditions present")
    }

    pub fn value(&self, c: Condition) -> f64 {
        self.get(c).value
    }
}

struct Derivatives {
    a1: Vec<ComplexMatrix>,
    b_sigma1: Vec<ComplexMatrix>,
    b_adj: Vec<ComplexMatrix>,
}

fn derivatives(v: &DifferentialVessel, stride: usize) -> VkResult<Derivatives> {
    let h = v.grid.step();
    let bs: Vec<ComplexMatrix> = (0..v.grid.len()).map(|i| v.b.at(i) * v.sigma1.at(i)).collect();
    let badj: Vec<ComplexMatrix> = v.b.nodes().iter().map(|b| b.adjoint()).collect();
    Ok(Derivatives {
        a1: v.a1.derivative(stride)?,
        b_sigma1: difference(&bs, h, stride)?,
        b_adj: difference(&badj, h, stride)?,
    })
}

fn residual_at(v: &DifferentialVessel, d: &Derivatives, c: Condition, i: usize) -> f64 {
    let a1 = v.a1.at(i);
    let a2 = v.a2.at(i);
    let b = v.b.at(i);
    let s1 = v.sigma1.at(i);
    let s2 = v.sigma2.at(i);
    let g = v.gamma.at(i);
    let gs = v.gamma_star.at(i);
    match c {
        Condition::Lax => (&d.a1[i] - (a2 * a1 - a1 * a2)).norm(),
        Condition::Colligation1 => (a1 + a1.adjoint() + b * s1 * b.adjoint()).norm(),
        Condition::Colligation2 => (a2 + a2.adjoint() + b * s2 * b.adjoint()).norm(),
        Condition::InputVessel => (&d.b_sigma1[i] - a2 * b * s1 + a1 * b * s2 + b * g).norm(),
        Condition::OutputVessel => {
            let bh = b.adjoint();
            (s1 * (&d.b_adj[i] + &bh * a2) - s2 * &bh * a1 - gs * &bh).norm()
        }
        Condition::Linkage => (gs - linkage_gamma_star(b, s1, s2, g)).norm(),
    }
}

fn max_residual(v: &DifferentialVessel, d: &Derivatives, c: Condition, exec: Execution) -> (f64, usize) {
    let per_node = map_indices(exec, v.grid.len(), |i| residual_at(v, d, c, i));
    per_node
        .iter()
        .enumerate()
        .fold((0.0, 0), |acc, (i, &r)| if r > acc.0 { (r, i) } else { acc })
}

/// Checks all six vessel conditions. Difference-based residuals are allowed
/// their estimated truncation error |R(2h) − R(h)|.
pub fn verify_vessel(v: &DifferentialVessel, tol: f64, exec: Execution) -> VkResult<ConditionReport> {
    if v.grid.n_steps < 2 {
        return Err(VkError::InvalidInput("verification needs at least two steps".into()));
    }
    let fine = derivatives(v, 1)?;
    let coarse = if v.grid.len() >= 6 { Some(derivatives(v, 2)?) } else { None };
    let residuals = Condition::ALL
        .iter()
        .map(|&c| {
            let (value, node) = max_residual(v, &fine, c, exec);
            let allowance = match (&coarse, c.is_differential()) {
                (Some(d2), true) => (max_residual(v, d2, c, exec).0 - value).abs(),
                _ => 0.0,
            };
            ConditionResidual { condition: c, value, node, allowance, passed: value <= tol + allowance }
        })
        .collect();
    Ok(ConditionReport { tol, step: v.grid.step(), residuals })
}

/// ‖S(−λ̄)ᴴσ₁S(λ) − σ₁‖.
pub fn adjoint_symmetry_residual(v: &DifferentialVessel, lambda: Complex64, node: usize) -> VkResult<f64> {
    let s = v.transfer(lambda, node)?;
    let s_mirror = v.transfer(-lambda.conj(), node)?;
    let s1 = v.sigma1.at(node);
    Ok((s_mirror.adjoint() * s1 * s - s1).norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansivityReport {
    /// D = Sᴴσ₁S − σ₁.
    pub defect: ComplexMatrix,
    pub min_eigenvalue: f64,
    /// −2Re(λ)·σ₁BᴴRᴴRBσ₁ with R = (λ − A₁)⁻¹, the value D takes under
    /// the first colligation condition.
    pub closed_form: ComplexMatrix,
    pub closed_form_mismatch: f64,
}

pub fn expansivity_check(v: &DifferentialVessel, lambda: Complex64, node: usize) -> VkResult<ExpansivityReport> {
    let s = v.transfer(lambda, node)?;
    let s1 = v.sigma1.at(node);
    let defect = hermitian_part(&(s.adjoint() * s1 * &s - s1));
    let r = resolvent(v.a1.at(node), lambda)?;
    let rb = r * v.b.at(node) * s1;
    let closed_form = (rb.adjoint() * &rb).scale(-2.0 * lambda.re);
    let closed_form_mismatch = (&defect - &closed_form).norm();
    let min_eigenvalue = HermitianMatrix::new(defect.clone())?
        .eigenvalues()
        .first()
        .copied()
        .unwrap_or(0.0);
    Ok(ExpansivityReport { defect, min_eigenvalue, closed_form, closed_form_mismatch })
}

/// Max over interior nodes of ‖D_tS − σ₁⁻¹(σ₂λ+γ*)S + Sσ₁⁻¹(σ₂λ+γ)‖ for
/// transfer values sampled at every node.
pub fn transfer_pde_residual_from(
    values: &[ComplexMatrix],
    sigma1: &OperatorFamily,
    sigma2: &OperatorFamily,
    gamma: &OperatorFamily,
    gamma_star: &OperatorFamily,
    lambda: Complex64,
) -> VkResult<f64> {
    let grid = sigma1.grid();
    let ds = difference(values, grid.step(), 1)?;
    let mut worst: f64 = 0.0;
    for i in 1..grid.n_steps {
        let inv = inverse(sigma1.at(i))?;
        let out = &inv * (sigma2.at(i) * lambda + gamma_star.at(i));
        let inp = &inv * (sigma2.at(i) * lambda + gamma.at(i));
        let r = &ds[i] - out * &values[i] + &values[i] * inp;
        worst = worst.max(r.norm());
    }
    Ok(worst)
}

pub fn transfer_pde_residual(v: &DifferentialVessel, lambda: Complex64, exec: Execution) -> VkResult<f64> {
    let values = v.transfer_along(lambda, exec)?;
    transfer_pde_residual_from(&values, &v.sigma1, &v.sigma2, &v.gamma, &v.gamma_star, lambda)
}

/// max_t ‖S(λ,t)Φ(λ,t,τ) − Φ*(λ,t,τ)S(λ,τ)‖.
pub fn intertwining_residual_from(
    values: &[ComplexMatrix],
    sigma1: &OperatorFamily,
    sigma2: &OperatorFamily,
    gamma: &OperatorFamily,
    gamma_star: &OperatorFamily,
    lambda: Complex64,
    tau: usize,
) -> VkResult<f64> {
    let phi = fundamental_matrix(sigma1, sigma2, gamma, lambda, tau)?;
    let phi_star = fundamental_matrix(sigma1, sigma2, gamma_star, lambda, tau)?;
    Ok(max_f64(
        (0..values.len()).map(|i| (&values[i] * phi.at(i) - phi_star.at(i) * &values[tau]).norm()),
    ))
}

pub fn intertwining_residual(
    v: &DifferentialVessel,
    lambda: Complex64,
    tau: usize,
    exec: Execution,
) -> VkResult<f64> {
    let values = v.transfer_along(lambda, exec)?;
    intertwining_residual_from(&values, &v.sigma1, &v.sigma2, &v.gamma, &v.gamma_star, lambda, tau)
}

/// max_t ‖σ₁(t)Φ(λ,t,τ) − Φ(−λ̄,t,τ)⁻ᴴσ₁(τ)‖.
pub fn phi_symmetry_residual(
    sigma1: &OperatorFamily,
    sigma2: &OperatorFamily,
    gamma: &OperatorFamily,
    lambda: Complex64,
    tau: usize,
) -> VkResult<f64> {
    let phi = fundamental_matrix(sigma1, sigma2, gamma, lambda, tau)?;
    let mirror = fundamental_matrix(sigma1, sigma2, gamma, -lambda.conj(), tau)?;
    let mut worst: f64 = 0.0;
    for i in 0..phi.nodes().len() {
        let lhs = sigma1.at(i) * phi.at(i);
        let rhs = inverse(&mirror.at(i).adjoint())? * sigma1.at(tau);
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

/// Max over interior nodes of ‖D_t[Φ(μ)ᴴσ₁Φ(λ)] − (λ+μ̄)Φ(μ)ᴴσ₂Φ(λ)‖.
pub fn phi_bilinear_residual(
    sigma1: &OperatorFamily,
    sigma2: &OperatorFamily,
    gamma: &OperatorFamily,
    lambda: Complex64,
    mu: Complex64,
    tau: usize,
) -> VkResult<f64> {
    let grid = *sigma1.grid();
    let pl = fundamental_matrix(sigma1, sigma2, gamma, lambda, tau)?;
    let pm = fundamental_matrix(sigma1, sigma2, gamma, mu, tau)?;
    let form: Vec<ComplexMatrix> =
        (0..grid.len()).map(|i| pm.at(i).adjoint() * sigma1.at(i) * pl.at(i)).collect();
    let d = difference(&form, grid.step(), 1)?;
    let k = lambda + mu.conj();
    Ok(max_f64((1..grid.n_steps).map(|i| {
        (&d[i] - pm.at(i).adjoint() * sigma2.at(i) * pl.at(i) * k).norm()
    })))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub lambda: Complex64,
    pub u: Vec<DVector<Complex64>>,
    pub x: Vec<DVector<Complex64>>,
    pub y: Vec<DVector<Complex64>>,
    pub energy_defect_t1: Vec<f64>,
    pub energy_defect_t2: Vec<f64>,
}

impl Trajectory {
    pub fn max_defect_t1(&self) -> f64 {
        max_f64(self.energy_defect_t1.iter().map(|d| d.abs()))
    }
    pub fn max_defect_t2(&self) -> f64 {
        max_f64(self.energy_defect_t2.iter().copied())
    }
}

fn inner(a: &DVector<Complex64>, m: &ComplexMatrix, b: &DVector<Complex64>) -> Complex64 {
    (b.adjoint() * m * a)[(0, 0)]
}

/// Separated-variables trajectory u = u_λ(t₂)e^{λt₁} at t₁ = 0, started
/// from `u0` at the first node.
pub fn simulate(v: &DifferentialVessel, lambda: Complex64, u0: &DVector<Complex64>) -> VkResult<Trajectory> {
    if u0.len() != v.m {
        return Err(VkError::DimensionMismatch(format!("u0 has length {}, expected {}", u0.len(), v.m)));
    }
    let phi = v.input_fundamental(lambda, 0)?;
    let len = v.grid.len();
    let mut u = Vec::with_capacity(len);
    let mut x = Vec::with_capacity(len);
    let mut y = Vec::with_capacity(len);
    let mut e1 = Vec::with_capacity(len);
    for i in 0..len {
        let ui = phi.at(i) * u0;
        let r = resolvent(v.a1.at(i), lambda)?;
        let b = v.b.at(i);
        let s1 = v.sigma1.at(i);
        let bsu = b * s1 * &ui;
        let xi = r * &bsu;
        let yi = &ui - b.adjoint() * &xi;
        let ax = v.a1.at(i) * &xi + &bsu;
        let d = 2.0 * xi.dotc(&ax).re + inner(&yi, s1, &yi).re - inner(&ui, s1, &ui).re;
        e1.push(d);
        u.push(ui);
        x.push(xi);
        y.push(yi);
    }
    let norms: Vec<f64> = x.iter().map(|xi| xi.norm_squared()).collect();
    let dn = difference_scalar(&norms, v.grid.step())?;
    let e2 = (0..len)
        .map(|i| {
            let s2 = v.sigma2.at(i);
            (dn[i] - inner(&u[i], s2, &u[i]).re + inner(&y[i], s2, &y[i]).re).abs()
        })
        .collect();
    Ok(Trajectory { lambda, u, x, y, energy_defect_t1: e1, energy_defect_t2: e2 })
}

fn families_match(a: &OperatorFamily, b: &OperatorFamily) -> f64 {
    a.max_distance(b)
}

/// Couples `first` (input side) with `second`: S = S_second·S_first.
pub fn couple(first: &DifferentialVessel, second: &DifferentialVessel) -> VkResult<DifferentialVessel> {
    if first.grid != second.grid {
        return Err(VkError::DimensionMismatch("vessels live on different grids".into()));
    }
    if first.m != second.m {
        return Err(VkError::DimensionMismatch(format!("m = {} vs {}", first.m, second.m)));
    }
    let scale = |f: &OperatorFamily| max_f64(f.nodes().iter().map(|m| m.norm())).max(1.0);
    for (name, a, b) in [("sigma1", &first.sigma1, &second.sigma1), ("sigma2", &first.sigma2, &second.sigma2)] {
        if families_match(a, b) > MATCH_TOL * scale(a) {
            return Err(VkError::DimensionMismatch(format!("{name} differs between the vessels")));
        }
    }
    let defect = families_match(&first.gamma_star, &second.gamma);
    if defect > MATCH_TOL * scale(&first.gamma_star) {
        return Err(VkError::InconsistentChain { defect });
    }
    let (n1, n2) = (first.n, second.n);
    let n = n1 + n2;
    let grid = first.grid;
    let block = |top: &ComplexMatrix, bottom: &ComplexMatrix, coupling: ComplexMatrix| {
        let mut a = zeros(n, n);
        a.view_mut((0, 0), (n1, n1)).copy_from(top);
        a.view_mut((n1, n1), (n2, n2)).copy_from(bottom);
        a.view_mut((n1, 0), (n2, n1)).copy_from(&coupling);
        a
    };
    let mut a1 = Vec::with_capacity(grid.len());
    let mut a2 = Vec::with_capacity(grid.len());
    let mut b = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let b1 = first.b.at(i);
        let b2 = second.b.at(i);
        let s1 = first.sigma1.at(i);
        let s2 = first.sigma2.at(i);
        a1.push(block(first.a1.at(i), second.a1.at(i), -(b2 * s1 * b1.adjoint())));
        a2.push(block(first.a2.at(i), second.a2.at(i), -(b2 * s2 * b1.adjoint())));
        let mut bi = zeros(n, first.m);
        bi.view_mut((0, 0), (n1, first.m)).copy_from(b1);
        bi.view_mut((n1, 0), (n2, first.m)).copy_from(b2);
        b.push(bi);
    }
    DifferentialVessel::new(
        OperatorFamily::new(grid, a1)?,
        OperatorFamily::new(grid, a2)?,
        OperatorFamily::new(grid, b)?,
        first.sigma1.clone(),
        first.sigma2.clone(),
        first.gamma.clone(),
        second.gamma_star.clone(),
    )
}

fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    (u.adjoint() * u - identity(u.ncols())).norm()
}

/// Ã₁ = UA₁Uᴴ, B̃ = UB, Ã₂ = UA₂Uᴴ + U'Uᴴ with U' supplied.
pub fn gauge_transform_with_derivative(
    v: &DifferentialVessel,
    u: &OperatorFamily,
    du: &[ComplexMatrix],
) -> VkResult<DifferentialVessel> {
    if u.grid() != &v.grid || u.shape() != (v.n, v.n) || du.len() != v.grid.len() {
        return Err(VkError::DimensionMismatch("gauge map does not match the vessel".into()));
    }
    for (i, ui) in u.nodes().iter().enumerate() {
        let d = unitarity_defect(ui);
        if d > 1e-8 {
            return Err(VkError::InvalidInput(format!("gauge map is not unitary at node {i} ({d:.3e})")));
        }
    }
    let a1 = v.a1.map(|i, a| u.at(i) * a * u.at(i).adjoint())?;
    let a2 = v.a2.map(|i, a| u.at(i) * a * u.at(i).adjoint() + &du[i] * u.at(i).adjoint())?;
    let b = v.b.map(|i, b| u.at(i) * b)?;
    DifferentialVessel::new(
        a1,
        a2,
        b,
        v.sigma1.clone(),
        v.sigma2.clone(),
        v.gamma.clone(),
        v.gamma_star.clone(),
    )
}

/// Gauge transform with U' from second-order differences.
pub fn gauge_transform(v: &DifferentialVessel, u: &OperatorFamily) -> VkResult<DifferentialVessel> {
    let du = if v.grid.len() >= 3 {
        u.derivative(1)?
    } else {
        vec![zeros(v.n, v.n); v.grid.len()]
    };
    gauge_transform_with_derivative(v, u, &du)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeMap {
    pub u: OperatorFamily,
    pub unitarity_defect: f64,
    pub transfer_mismatch: f64,
    /// ‖Ã₂ − (UA₂Uᴴ + U'Uᴴ)‖ with U' by differences.
    pub a2_mismatch: f64,
}

/// Krylov matrix [B, ÂB, …, Â^{n−1}B] with Â = A/scale.
fn krylov(a: &ComplexMatrix, b: &ComplexMatrix, scale: f64) -> ComplexMatrix {
    let n = a.nrows();
    let m = b.ncols();
    let a_hat = a.unscale(scale);
    let mut k = zeros(n, n * m);
    let mut block = b.clone();
    for j in 0..n {
        k.view_mut((0, j * m), (n, m)).copy_from(&block);
        block = &a_hat * block;
    }
    k
}

/// First n linearly independent columns, scanned left to right.
fn independent_columns(k: &ComplexMatrix, n: usize) -> Option<Vec<usize>> {
    let threshold = 1e-8 * k.norm().max(f64::MIN_POSITIVE);
    let mut basis: Vec<DVector<Complex64>> = Vec::with_capacity(n);
    let mut picked = Vec::with_capacity(n);
    for j in 0..k.ncols() {
        let mut col = k.column(j).into_owned();
        for q in &basis {
            let p = q.dotc(&col);
            col -= q * p;
        }
        let nrm = col.norm();
        if nrm > threshold {
            basis.push(col / Complex64::from(nrm));
            picked.push(j);
            if picked.len() == n {
                return Some(picked);
            }
        }
    }
    None
}

fn select_columns(k: &ComplexMatrix, cols: &[usize]) -> ComplexMatrix {
    DMatrix::from_fn(k.nrows(), cols.len(), |i, j| k[(i, cols[j])])
}

/// Finds the unitary family U with UA₁Uᴴ = Ã₁ and UB = B̃, confirming
/// equal transfer functions at seeded probes.
pub fn gauge_equivalence(
    v1: &DifferentialVessel,
    v2: &DifferentialVessel,
    probes: usize,
    seed: u64,
    exec: Execution,
) -> VkResult<GaugeMap> {
    if v1.grid != v2.grid || v1.n != v2.n || v1.m != v2.m {
        return Err(VkError::DimensionMismatch("vessels have different shapes or grids".into()));
    }
    let n = v1.n;
    let nodes = try_map_indices(exec, v1.grid.len(), |i| {
        let scale = v1.a1.at(i).norm().max(1.0);
        let k1 = krylov(v1.a1.at(i), v1.b.at(i), scale);
        let k2 = krylov(v2.a1.at(i), v2.b.at(i), scale);
        let cols = independent_columns(&k1, n).ok_or(VkError::NotMinimal { node: i })?;
        let inv = inverse(&select_columns(&k1, &cols))?;
        Ok(select_columns(&k2, &cols) * inv)
    })?;
    let unitarity = max_f64(nodes.iter().map(unitarity_defect));
    if unitarity > 1e-8 {
        return Err(VkError::NotEquivalent(format!("state map is not unitary (defect {unitarity:.3e})")));
    }
    let u = OperatorFamily::new(v1.grid, nodes)?;
    let mut avoid = v1.all_eigenvalues();
    avoid.extend(v2.all_eigenvalues());
    let radius = max_f64(avoid.iter().map(|z| z.norm())).max(1.0) * 1.5;
    let lambdas = probe_lambdas(seed, probes, radius, &avoid, 0.05 * radius);
    let at = probe_nodes(seed, probes, v1.grid.len());
    let mismatches = try_map_indices(exec, probes, |k| {
        Ok((v1.transfer(lambdas[k], at[k])? - v2.transfer(lambdas[k], at[k])?).norm())
    })?;
    let transfer_mismatch = max_f64(mismatches);
    if transfer_mismatch > 1e-8 {
        return Err(VkError::NotEquivalent(format!(
            "transfer functions differ by {transfer_mismatch:.3e}"
        )));
    }
    let a2_mismatch = if v1.grid.len() >= 3 {
        let du = u.derivative(1)?;
        max_f64((0..v1.grid.len()).map(|i| {
            let ui = u.at(i);
            (v2.a2.at(i) - (ui * v1.a2.at(i) * ui.adjoint() + &du[i] * ui.adjoint())).norm()
        }))
    } else {
        0.0
    };
    Ok(GaugeMap { u, unitarity_defect: unitarity, transfer_mismatch, a2_mismatch })
}

/// ‖σ − σᴴ‖ over all nodes, for diagnostics.
pub fn max_hermitian_defect(f: &OperatorFamily) -> f64 {
    max_f64(f.nodes().iter().map(hermitian_defect))
}
