//! Vessels from spectral data: one-dimensional (elementary) vessels, their
//! couplings, extraction of an elementary factor, and the continuous model
//! built from multiplicative integrals.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{VkError, VkResult};
use crate::grid::{difference, difference_scalar, OperatorFamily, TimeGrid};
use crate::matrix_kernel::{
    eigenvalues, hermitian_inv_sqrt, identity, inverse, left_null_vector, matrix_exp, scalar, zeros,
    ComplexMatrix,
};
use crate::ode_engine::{rk4, Direction, NodeCoefficients};
use crate::par::{max_f64, try_map_indices, Execution};
use crate::vessel_core::{couple, DifferentialVessel};

#[derive(Debug, Clone, PartialEq)]
pub struct ElementaryData {
    pub z: Complex64,
    /// Input vector at the first node.
    pub b0: DVector<Complex64>,
    /// Optional phase θ(t₂) at every node.
    pub theta: Option<Vec<f64>>,
}

impl ElementaryData {
    pub fn new(z: Complex64, b0: DVector<Complex64>) -> Self {
        ElementaryData { z, b0, theta: None }
    }

    /// Data whose zero is at −z̄ with Re z = −b₀ᴴσ₁b₀/2.
    pub fn normalized(im_z: f64, b0: DVector<Complex64>, sigma1: &ComplexMatrix) -> Self {
        let c0 = b0.dotc(&(sigma1 * &b0)).re;
        ElementaryData::new(Complex64::new(-c0 / 2.0, im_z), b0)
    }
}

/// One-dimensional vessel with A₁ = z. The input vector is transported by
/// σ₁w' = (−z̄σ₂ + γ)w and rescaled so that bᴴσ₁b stays at b₀ᴴσ₁b₀.
pub fn build_elementary(
    data: &ElementaryData,
    sigma1: &OperatorFamily,
    sigma2: &OperatorFamily,
    gamma: &OperatorFamily,
) -> VkResult<DifferentialVessel> {
    let grid = *sigma1.grid();
    let m = sigma1.shape().0;
    if data.b0.len() != m {
        return Err(VkError::DimensionMismatch(format!("b0 has length {}, expected {m}", data.b0.len())));
    }
    if let Some(theta) = &data.theta {
        if theta.len() != grid.len() {
            return Err(VkError::DimensionMismatch("theta must have one value per node".into()));
        }
    }
    let zbar = data.z.conj();
    let coeff = NodeCoefficients::new(
        (0..grid.len())
            .map(|i| Ok(inverse(sigma1.at(i))? * (gamma.at(i) - sigma2.at(i) * zbar)))
            .collect::<VkResult<Vec<_>>>()?,
    );
    let w0 = DMatrix::from_column_slice(m, 1, data.b0.as_slice());
    let ws = rk4(&grid, |at, y| coeff.at(at) * y, w0, 0, Direction::Forward)?;
    let c0 = quad(&data.b0, sigma1.at(0));
    if c0.abs() <= 1e-12 * data.b0.norm_squared() * sigma1.at(0).norm() {
        return Err(VkError::DegenerateB { node: 0 });
    }
    let mut b_rows = Vec::with_capacity(grid.len());
    for (i, w) in ws.iter().enumerate() {
        let wv = w.column(0).into_owned();
        let q = quad(&wv, sigma1.at(i));
        if q.abs() <= 1e-12 * wv.norm_squared() * sigma1.at(i).norm() || q.signum() != c0.signum() {
            return Err(VkError::DegenerateB { node: i });
        }
        let theta = data.theta.as_ref().map_or(0.0, |t| t[i]);
        let scale = Complex64::from((c0 / q).sqrt()) * Complex64::from_polar(1.0, -theta);
        b_rows.push(ComplexMatrix::from_row_slice(1, m, (wv * scale).conjugate().as_slice()));
    }
    let dtheta = match &data.theta {
        Some(t) if grid.len() >= 3 => difference_scalar(t, grid.step())?,
        _ => vec![0.0; grid.len()],
    };
    let a2: Vec<ComplexMatrix> = b_rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let bs2b = (row * sigma2.at(i) * row.adjoint())[(0, 0)].re;
            scalar(Complex64::new(-bs2b / 2.0, dtheta[i]))
        })
        .collect();
    DifferentialVessel::with_linkage(
        OperatorFamily::constant(grid, scalar(data.z))?,
        OperatorFamily::new(grid, a2)?,
        OperatorFamily::new(grid, b_rows)?,
        sigma1.clone(),
        sigma2.clone(),
        gamma.clone(),
    )
}

fn quad(v: &DVector<Complex64>, m: &ComplexMatrix) -> f64 {
    v.dotc(&(m * v)).re
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSynthesis {
    pub vessel: DifferentialVessel,
    /// Elementary factors in coupling order, first one on the input side.
    pub factors: Vec<DifferentialVessel>,
}

/// Couples elementary vessels with the γ-chain γ₁ = γ₀, γ_{h+1} = γ*_h.
/// A₁ is lower triangular with diagonal z_h and (i, j) entry −b⁽ⁱ⁾ᴴσ₁b⁽ʲ⁾.
pub fn build_discrete(
    data: &[ElementaryData],
    sigma1: &OperatorFamily,
    sigma2: &OperatorFamily,
    gamma0: &OperatorFamily,
) -> VkResult<DiscreteSynthesis> {
    if data.is_empty() {
        return Err(VkError::InvalidInput("no spectral data".into()));
    }
    let grid = *sigma1.grid();
    let m = sigma1.shape().0;
    let mut factors = Vec::with_capacity(data.len());
    let mut gamma = gamma0.clone();
    for d in data {
        let e = build_elementary(d, sigma1, sigma2, &gamma)?;
        gamma = e.gamma_star().clone();
        factors.push(e);
    }
    let n = data.len();
    let mut a1 = Vec::with_capacity(grid.len());
    let mut a2 = Vec::with_capacity(grid.len());
    let mut b = Vec::with_capacity(grid.len());
    for t in 0..grid.len() {
        let s1 = sigma1.at(t);
        let s2 = sigma2.at(t);
        let mut a1t = zeros(n, n);
        let mut a2t = zeros(n, n);
        let mut bt = zeros(n, m);
        for i in 0..n {
            let bi = factors[i].b().at(t);
            bt.row_mut(i).copy_from(&bi.row(0));
            a1t[(i, i)] = factors[i].a1().at(t)[(0, 0)];
            a2t[(i, i)] = factors[i].a2().at(t)[(0, 0)];
            for j in 0..i {
                let bj = factors[j].b().at(t);
                a1t[(i, j)] = -(bi * s1 * bj.adjoint())[(0, 0)];
                a2t[(i, j)] = -(bi * s2 * bj.adjoint())[(0, 0)];
            }
        }
        a1.push(a1t);
        a2.push(a2t);
        b.push(bt);
    }
    let vessel = DifferentialVessel::new(
        OperatorFamily::new(grid, a1)?,
        OperatorFamily::new(grid, a2)?,
        OperatorFamily::new(grid, b)?,
        sigma1.clone(),
        sigma2.clone(),
        gamma0.clone(),
        gamma,
    )?;
    Ok(DiscreteSynthesis { vessel, factors })
}

/// Left fold of [`couple`] over the elementary factors.
pub fn couple_all(factors: &[DifferentialVessel]) -> VkResult<DifferentialVessel> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| VkError::InvalidInput("nothing to couple".into()))?;
    rest.iter().try_fold(first.clone(), |acc, f| couple(&acc, f))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    /// The eigenvalue actually extracted.
    pub z: Complex64,
    /// Input-side factor: S = S_quotient·S_factor.
    pub factor: DifferentialVessel,
    pub quotient: Option<DifferentialVessel>,
    /// Unit left eigenvectors vᴴA₁ = zvᴴ at every node.
    pub eigenvectors: Vec<DVector<Complex64>>,
}

fn simple_eigenvalue(a: &ComplexMatrix, z: Complex64) -> VkResult<(Complex64, f64)> {
    let ev = eigenvalues(a);
    let (idx, _) = ev
        .iter()
        .enumerate()
        .map(|(i, e)| (i, (e - z).norm()))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let scale = a.norm().max(1.0);
    let ze = ev[idx];
    if (ze - z).norm() > 1e-6 * scale {
        return Err(VkError::InvalidInput(format!("{z} is not an eigenvalue of A1")));
    }
    let gap = ev
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .map(|(_, e)| (e - ze).norm())
        .fold(f64::INFINITY, f64::min);
    if gap <= 1e-8 * scale {
        return Err(VkError::NonSimpleEigenvalue { z: ze, gap });
    }
    Ok((ze, gap))
}

/// Orthonormal basis of the complement of unit `v`.
fn complement(v: &DVector<Complex64>) -> ComplexMatrix {
    let n = v.len();
    let p = identity(n) - v * v.adjoint();
    let eig = SymmetricEigen::new(p);
    let cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    DMatrix::from_fn(n, cols.len(), |i, j| eig.eigenvectors[(i, cols[j])])
}

/// Splits off the elementary factor for the simple eigenvalue `z` of A₁.
pub fn extract_elementary(v: &DifferentialVessel, z: Complex64, node_ref: usize) -> VkResult<Extraction> {
    let grid = *v.grid();
    if node_ref >= grid.len() {
        return Err(VkError::InvalidInput(format!("node {node_ref} is off the grid")));
    }
    let n = v.n();
    let (ze, _) = simple_eigenvalue(v.a1().at(node_ref), z)?;
    let left = |i: usize| left_null_vector(&(v.a1().at(i) - identity(n) * ze)).0;
    let mut vecs: Vec<Option<DVector<Complex64>>> = vec![None; grid.len()];
    vecs[node_ref] = Some(left(node_ref));
    let order: Vec<(usize, usize)> = ((node_ref + 1)..grid.len())
        .map(|i| (i, i - 1))
        .chain((0..node_ref).rev().map(|i| (i, i + 1)))
        .collect();
    for &(i, prev) in &order {
        let mut vi = left(i);
        let p = vecs[prev].as_ref().expect("filled in order");
        let overlap = vi.dotc(p);
        if overlap.norm() < 0.5 {
            return Err(VkError::TransportBreakdown { node: i, overlap: overlap.norm() });
        }
        vi *= overlap / Complex64::from(overlap.norm());
        vecs[i] = Some(vi);
    }
    let vecs: Vec<DVector<Complex64>> = vecs.into_iter().map(|x| x.expect("all nodes")).collect();
    let as_mats: Vec<ComplexMatrix> = vecs.iter().map(|x| DMatrix::from_column_slice(n, 1, x.as_slice())).collect();
    let dv = if grid.len() >= 3 {
        difference(&as_mats, grid.step(), 1)?
    } else {
        vec![zeros(n, 1); grid.len()]
    };
    let fb: Vec<ComplexMatrix> = (0..grid.len()).map(|i| as_mats[i].adjoint() * v.b().at(i)).collect();
    let fa2: Vec<ComplexMatrix> = (0..grid.len())
        .map(|i| as_mats[i].adjoint() * v.a2().at(i) * &as_mats[i] + dv[i].adjoint() * &as_mats[i])
        .collect();
    let factor = DifferentialVessel::with_linkage(
        OperatorFamily::constant(grid, scalar(ze))?,
        OperatorFamily::new(grid, fa2)?,
        OperatorFamily::new(grid, fb)?,
        v.sigma1().clone(),
        v.sigma2().clone(),
        v.gamma().clone(),
    )?;
    let quotient = if n == 1 {
        None
    } else {
        let mut bases: Vec<Option<ComplexMatrix>> = vec![None; grid.len()];
        bases[node_ref] = Some(complement(&vecs[node_ref]));
        for &(i, prev) in &order {
            let p = identity(n) - &vecs[i] * vecs[i].adjoint();
            let mproj = p * bases[prev].as_ref().expect("filled in order");
            let gram = mproj.adjoint() * &mproj;
            bases[i] = Some(&mproj * hermitian_inv_sqrt(&gram)?);
        }
        let bases: Vec<ComplexMatrix> = bases.into_iter().map(|x| x.expect("all nodes")).collect();
        let dbases = if grid.len() >= 3 {
            difference(&bases, grid.step(), 1)?
        } else {
            vec![zeros(n, n - 1); grid.len()]
        };
        let qa1 = (0..grid.len()).map(|i| bases[i].adjoint() * v.a1().at(i) * &bases[i]).collect();
        let qa2 = (0..grid.len())
            .map(|i| bases[i].adjoint() * v.a2().at(i) * &bases[i] + dbases[i].adjoint() * &bases[i])
            .collect();
        let qb = (0..grid.len()).map(|i| bases[i].adjoint() * v.b().at(i)).collect();
        Some(DifferentialVessel::new(
            OperatorFamily::new(grid, qa1)?,
            OperatorFamily::new(grid, qa2)?,
            OperatorFamily::new(grid, qb)?,
            v.sigma1().clone(),
            v.sigma2().clone(),
            factor.gamma_star().clone(),
            v.gamma_star().clone(),
        )?)
    };
    Ok(Extraction { z: ze, factor, quotient, eigenvectors: vecs })
}

/// S·S_f⁻¹ with S_f⁻¹ = I + B_fᴴ(λ − z − B_fσ₁B_fᴴ)⁻¹B_fσ₁.
pub fn quotient_transfer(
    v: &DifferentialVessel,
    factor: &DifferentialVessel,
    lambda: Complex64,
    node: usize,
) -> VkResult<ComplexMatrix> {
    Ok(v.transfer(lambda, node)? * factor.transfer_inverse(lambda, node)?)
}

/// Spectral data of the continuous model at the reference time.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSpectrumModel {
    pub s_grid: TimeGrid,
    /// Real spectral parameter c(s) at every s node.
    pub c: Vec<f64>,
    /// β(t₂⁰, s), m×p at every s node.
    pub beta: Vec<ComplexMatrix>,
    /// γ(t₂⁰, s) at every s node.
    pub gamma: Vec<ComplexMatrix>,
}

fn gamma_rate(k: &ComplexMatrix, s1: &ComplexMatrix, s1_inv: &ComplexMatrix, s2: &ComplexMatrix) -> ComplexMatrix {
    s1 * k * s1_inv * s2 - s2 * k
}

fn k_of(beta: &ComplexMatrix, s1: &ComplexMatrix) -> ComplexMatrix {
    beta * beta.adjoint() * s1
}

impl ContinuousSpectrumModel {
    /// Fills γ(t₂⁰, ·) by the trapezoidal march dγ/ds = σ₁Kσ₁⁻¹σ₂ − σ₂K
    /// from γ(t₂⁰, 0) = `gamma0`.
    pub fn with_consistent_gamma(
        s_grid: TimeGrid,
        c: Vec<f64>,
        beta: Vec<ComplexMatrix>,
        gamma0: ComplexMatrix,
        sigma1: &ComplexMatrix,
        sigma2: &ComplexMatrix,
    ) -> VkResult<Self> {
        if c.len() != s_grid.len() || beta.len() != s_grid.len() {
            return Err(VkError::DimensionMismatch("c and beta need one entry per s node".into()));
        }
        let inv = inverse(sigma1)?;
        let ds = s_grid.step();
        let rates: Vec<ComplexMatrix> =
            beta.iter().map(|b| gamma_rate(&k_of(b, sigma1), sigma1, &inv, sigma2)).collect();
        let mut gamma = Vec::with_capacity(s_grid.len());
        gamma.push(gamma0);
        for j in 0..s_grid.n_steps {
            let next = &gamma[j] + (&rates[j] + &rates[j + 1]).scale(ds / 2.0);
            gamma.push(next);
        }
        Ok(ContinuousSpectrumModel { s_grid, c, beta, gamma })
    }
}

/// The continuous model propagated over t₂. Outer index: s node, inner: t node.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousEvolution {
    pub t_grid: TimeGrid,
    pub s_grid: TimeGrid,
    pub c: Vec<f64>,
    pub beta: Vec<Vec<ComplexMatrix>>,
    pub k: Vec<Vec<ComplexMatrix>>,
    pub gamma: Vec<Vec<ComplexMatrix>>,
    sigma1: OperatorFamily,
    sigma2: OperatorFamily,
}

fn beta_along_t(
    t_grid: &TimeGrid,
    beta0: &ComplexMatrix,
    c: f64,
    gamma: &[ComplexMatrix],
    s1_inv: &[ComplexMatrix],
    sigma2: &OperatorFamily,
) -> VkResult<Vec<ComplexMatrix>> {
    let coeff = NodeCoefficients::new(
        (0..t_grid.len()).map(|i| &s1_inv[i] * (&gamma[i] - sigma2.at(i).scale(c))).collect(),
    );
    rk4(t_grid, |at, y| coeff.at(at) * y, beta0.clone(), 0, Direction::Forward)
}

/// Propagates β(·, s) by σ₁β' = (−c(s)σ₂ + γ(·, s))β and marches γ in s
/// (predictor-corrector). `gamma_t` is γ(t₂, 0), the vessel input γ.
pub fn continuous_model_evolve(
    model: &ContinuousSpectrumModel,
    gamma_t: &OperatorFamily,
    sigma1: &OperatorFamily,
    sigma2: &OperatorFamily,
    exec: Execution,
) -> VkResult<ContinuousEvolution> {
    let t_grid = *sigma1.grid();
    let s_grid = model.s_grid;
    let ns = s_grid.len();
    if model.c.len() != ns || model.beta.len() != ns || model.gamma.len() != ns {
        return Err(VkError::DimensionMismatch("model arrays need one entry per s node".into()));
    }
    let scale = model.gamma[0].norm().max(1.0);
    if (gamma_t.at(0) - &model.gamma[0]).norm() > 1e-10 * scale {
        return Err(VkError::InvalidInput("gamma_t does not start at the model gamma".into()));
    }
    let s1_0 = sigma1.at(0);
    let reference = ContinuousSpectrumModel::with_consistent_gamma(
        s_grid,
        model.c.clone(),
        model.beta.clone(),
        model.gamma[0].clone(),
        s1_0,
        sigma2.at(0),
    )?;
    let defect = max_f64(reference.gamma.iter().zip(&model.gamma).map(|(a, b)| (a - b).norm()));
    if defect > 1e-8 * scale {
        return Err(VkError::InvalidInput(format!("model gamma is inconsistent with beta ({defect:.3e})")));
    }
    let s1_inv: Vec<ComplexMatrix> =
        sigma1.nodes().iter().map(inverse).collect::<VkResult<Vec<_>>>()?;
    let k_along = |beta: &[ComplexMatrix]| -> Vec<ComplexMatrix> {
        beta.iter().enumerate().map(|(i, b)| k_of(b, sigma1.at(i))).collect()
    };
    let rate_along = |k: &[ComplexMatrix]| -> Vec<ComplexMatrix> {
        k.iter()
            .enumerate()
            .map(|(i, k)| gamma_rate(k, sigma1.at(i), &s1_inv[i], sigma2.at(i)))
            .collect()
    };
    let decoupled = sigma2.nodes().iter().all(|s| s.norm() == 0.0);
    let gamma0: Vec<ComplexMatrix> = gamma_t.nodes().to_vec();
    let (beta, gamma) = if decoupled {
        let beta = try_map_indices(exec, ns, |j| {
            beta_along_t(&t_grid, &model.beta[j], model.c[j], &gamma0, &s1_inv, sigma2)
        })?;
        (beta, vec![gamma0; ns])
    } else {
        let ds = s_grid.step();
        let mut beta = Vec::with_capacity(ns);
        let mut gamma = Vec::with_capacity(ns);
        beta.push(beta_along_t(&t_grid, &model.beta[0], model.c[0], &gamma0, &s1_inv, sigma2)?);
        gamma.push(gamma0);
        for j in 0..s_grid.n_steps {
            let rate = rate_along(&k_along(&beta[j]));
            let predicted: Vec<ComplexMatrix> =
                gamma[j].iter().zip(&rate).map(|(g, r)| g + r.scale(ds)).collect();
            let beta_p =
                beta_along_t(&t_grid, &model.beta[j + 1], model.c[j + 1], &predicted, &s1_inv, sigma2)?;
            let rate_p = rate_along(&k_along(&beta_p));
            let corrected: Vec<ComplexMatrix> = gamma[j]
                .iter()
                .zip(rate.iter().zip(&rate_p))
                .map(|(g, (r0, r1))| g + (r0 + r1).scale(ds / 2.0))
                .collect();
            beta.push(beta_along_t(&t_grid, &model.beta[j + 1], model.c[j + 1], &corrected, &s1_inv, sigma2)?);
            gamma.push(corrected);
        }
        (beta, gamma)
    };
    let k = beta.iter().map(|b| k_along(b)).collect();
    Ok(ContinuousEvolution {
        t_grid,
        s_grid,
        c: model.c.clone(),
        beta,
        k,
        gamma,
        sigma1: sigma1.clone(),
        sigma2: sigma2.clone(),
    })
}

/// W(λ) = ∏_{j < upper} exp(K_jΔs/(λ + c_j)), later factors on the left.
pub fn mult_integral(
    k: &[ComplexMatrix],
    c: &[f64],
    s_grid: &TimeGrid,
    lambda: Complex64,
    upper: usize,
) -> VkResult<ComplexMatrix> {
    Ok(mult_integral_prefixes(k, c, s_grid, lambda, upper)?.pop().expect("at least identity"))
}

/// W at s nodes 0..=upper.
pub fn mult_integral_prefixes(
    k: &[ComplexMatrix],
    c: &[f64],
    s_grid: &TimeGrid,
    lambda: Complex64,
    upper: usize,
) -> VkResult<Vec<ComplexMatrix>> {
    if k.len() != s_grid.len() || c.len() != s_grid.len() {
        return Err(VkError::DimensionMismatch("K and c need one entry per s node".into()));
    }
    if upper > s_grid.n_steps {
        return Err(VkError::InvalidInput(format!("upper index {upper} is past the last s node")));
    }
    let m = k[0].nrows();
    let ds = s_grid.step();
    let mut out = Vec::with_capacity(upper + 1);
    let mut w = identity(m);
    out.push(w.clone());
    for j in 0..upper {
        let denom = lambda + c[j];
        let scale = k[j].norm().max(1.0);
        if denom.norm() <= 1e-9 * scale {
            return Err(VkError::SpectrumCollision { lambda, distance: denom.norm() });
        }
        w = matrix_exp(&(&k[j] * (Complex64::from(ds) / denom))) * w;
        out.push(w.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousResiduals {
    pub dgamma: f64,
    pub dk: f64,
    pub w_s_law: f64,
    pub w_t_law: f64,
    pub mixed_partial: f64,
}

impl ContinuousEvolution {
    pub fn sigma1(&self) -> &OperatorFamily {
        &self.sigma1
    }

    /// Central-difference residual of dγ/ds + σ₂K − σ₁Kσ₁⁻¹σ₂ at interior s nodes.
    pub fn dgamma_residual(&self) -> VkResult<f64> {
        let ds = self.s_grid.step();
        let mut worst: f64 = 0.0;
        for i in 0..self.t_grid.len() {
            let s1 = self.sigma1.at(i);
            let inv = inverse(s1)?;
            let s2 = self.sigma2.at(i);
            for j in 1..self.s_grid.n_steps {
                let d = (&self.gamma[j + 1][i] - &self.gamma[j - 1][i]).unscale(2.0 * ds);
                let r = d - gamma_rate(&self.k[j][i], s1, &inv, s2);
                worst = worst.max(r.norm());
            }
        }
        Ok(worst)
    }

    /// Residual of ∂K/∂t₂ = [G_c, K], G_c = σ₁⁻¹(−cσ₂ + γ), at interior t nodes.
    pub fn dk_residual(&self) -> VkResult<f64> {
        let h = self.t_grid.step();
        let mut worst: f64 = 0.0;
        for j in 0..self.s_grid.len() {
            let dk = difference(&self.k[j], h, 1)?;
            for i in 1..self.t_grid.n_steps {
                let g = inverse(self.sigma1.at(i))? * (&self.gamma[j][i] - self.sigma2.at(i).scale(self.c[j]));
                let kk = &self.k[j][i];
                worst = worst.max((&dk[i] - (&g * kk - kk * &g)).norm());
            }
        }
        Ok(worst)
    }

    fn k_tilde(&self, j: usize, i: usize, lambda: Complex64) -> ComplexMatrix {
        &self.k[j][i] / (lambda + self.c[j])
    }

    /// W(λ; t, s_j) for every t node (outer) and s node (inner).
    pub fn products(&self, lambda: Complex64, exec: Execution) -> VkResult<Vec<Vec<ComplexMatrix>>> {
        try_map_indices(exec, self.t_grid.len(), |i| {
            let ks: Vec<ComplexMatrix> = (0..self.s_grid.len()).map(|j| self.k[j][i].clone()).collect();
            mult_integral_prefixes(&ks, &self.c, &self.s_grid, lambda, self.s_grid.n_steps)
        })
    }

    pub fn residuals(&self, lambda: Complex64, exec: Execution) -> VkResult<ContinuousResiduals> {
        let w = self.products(lambda, exec)?;
        let nt = self.t_grid.len();
        let ns = self.s_grid.len();
        let ds = self.s_grid.step();
        let h = self.t_grid.step();
        let mut w_s: f64 = 0.0;
        for (i, wi) in w.iter().enumerate() {
            for j in 0..self.s_grid.n_steps {
                let r = (&wi[j + 1] - &wi[j]).unscale(ds) - self.k_tilde(j, i, lambda) * &wi[j];
                w_s = w_s.max(r.norm());
            }
        }
        // t-derivative of W at each s node.
        let mut dtw: Vec<Vec<ComplexMatrix>> = Vec::with_capacity(ns);
        for j in 0..ns {
            let col: Vec<ComplexMatrix> = (0..nt).map(|i| w[i][j].clone()).collect();
            dtw.push(difference(&col, h, 1)?);
        }
        let g = |i: usize, j: usize| -> VkResult<ComplexMatrix> {
            Ok(inverse(self.sigma1.at(i))? * (self.sigma2.at(i) * lambda + &self.gamma[j][i]))
        };
        let mut w_t: f64 = 0.0;
        for i in 1..self.t_grid.n_steps {
            let g0 = g(i, 0)?;
            for (j, dj) in dtw.iter().enumerate() {
                let r = &dj[i] - (g(i, j)? * &w[i][j] - &w[i][j] * &g0);
                w_t = w_t.max(r.norm());
            }
        }
        // D_t[K̃_j W(s_j + Δs/2)] against (D_tW_{j+1} − D_tW_j)/Δs.
        let mut mixed: f64 = 0.0;
        for j in 0..self.s_grid.n_steps {
            let half: Vec<ComplexMatrix> = (0..nt)
                .map(|i| {
                    let kt = self.k_tilde(j, i, lambda);
                    &kt * matrix_exp(&kt.scale(ds / 2.0)) * &w[i][j]
                })
                .collect();
            let dhalf = difference(&half, h, 1)?;
            for i in 1..self.t_grid.n_steps {
                let r = &dhalf[i] - (&dtw[j + 1][i] - &dtw[j][i]).unscale(ds);
                mixed = mixed.max(r.norm());
            }
        }
        Ok(ContinuousResiduals {
            dgamma: self.dgamma_residual()?,
            dk: self.dk_residual()?,
            w_s_law: w_s,
            w_t_law: w_t,
            mixed_partial: mixed,
        })
    }
}
