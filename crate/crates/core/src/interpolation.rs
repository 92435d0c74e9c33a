//! Zero-pole interpolation data for vessel transfer functions and the
//! vessels realizing them.
//!
//! A null-pole triple carries a right pole pair (C, A_π), a left null pair
//! (A_ξ, Bn) and a coupling X with X·A_π − A_ξ·X = Bn·σ₁·C. The realized
//! transfer function is S(λ) = I + C(λ − A_π)⁻¹X⁻¹Bnσ₁.

use num_complex::Complex64;

use crate::error::{VkError, VkResult};
use crate::grid::{OperatorFamily, TimeGrid};
use crate::matrix_kernel::{
    hermitian_part, hermitian_sqrt, identity, inverse, min_singular_value, resolvent, solve_sylvester,
    sylvester_residual, zeros, ComplexMatrix, EPS_DET,
};
use crate::ode_engine::{integrate_linear_two_sided, rk4, At, Direction, NodeCoefficients};
use crate::par::{max_f64, try_map_indices, Execution};
use crate::vessel_core::DifferentialVessel;

#[derive(Debug, Clone, PartialEq)]
pub struct NullPoleTriple {
    /// m×n at every node.
    pub c: OperatorFamily,
    /// n×n, constant.
    pub a_pi: ComplexMatrix,
    /// k×k, constant.
    pub a_xi: ComplexMatrix,
    /// k×m at every node.
    pub bn: OperatorFamily,
    /// k×n at every node.
    pub x: OperatorFamily,
    pub sigma1: OperatorFamily,
    pub sigma2: OperatorFamily,
    pub gamma_star: OperatorFamily,
}

impl NullPoleTriple {
    pub fn grid(&self) -> &TimeGrid {
        self.c.grid()
    }

    /// ‖XA_π − A_ξX − Bnσ₁C‖ at every node.
    pub fn sylvester_defects(&self) -> Vec<f64> {
        (0..self.grid().len())
            .map(|i| {
                let q = self.bn.at(i) * self.sigma1.at(i) * self.c.at(i);
                sylvester_residual(self.x.at(i), &self.a_pi, &self.a_xi, &q)
            })
            .collect()
    }

    /// Scale used for conservation bounds: ‖X‖·(‖A_π‖ + ‖A_ξ‖) + ‖Bn‖‖σ₁‖‖C‖, maximized over nodes.
    pub fn sylvester_scale(&self) -> f64 {
        max_f64((0..self.grid().len()).map(|i| {
            self.x.at(i).norm() * (self.a_pi.norm() + self.a_xi.norm())
                + self.bn.at(i).norm() * self.sigma1.at(i).norm() * self.c.at(i).norm()
        }))
    }

    /// S(λ) = I + C(λ − A_π)⁻¹X⁻¹Bnσ₁ at a node.
    pub fn transfer(&self, lambda: Complex64, node: usize) -> VkResult<ComplexMatrix> {
        let m = self.sigma1.shape().0;
        let r = resolvent(&self.a_pi, lambda)?;
        let xb = checked_solve_x(self.x.at(node), self.bn.at(node), node)?;
        Ok(identity(m) + self.c.at(node) * r * xb * self.sigma1.at(node))
    }

    /// γ = σ₂CB̃σ₁ − σ₁CB̃σ₂ + γ*, B̃ = X⁻¹Bn.
    pub fn gamma(&self) -> VkResult<OperatorFamily> {
        let nodes = (0..self.grid().len())
            .map(|i| {
                let cb = self.c.at(i) * checked_solve_x(self.x.at(i), self.bn.at(i), i)?;
                let s1 = self.sigma1.at(i);
                let s2 = self.sigma2.at(i);
                Ok(s2 * &cb * s1 - s1 * &cb * s2 + self.gamma_star.at(i))
            })
            .collect::<VkResult<Vec<_>>>()?;
        OperatorFamily::new(*self.grid(), nodes)
    }
}

fn checked_solve_x(x: &ComplexMatrix, rhs: &ComplexMatrix, node: usize) -> VkResult<ComplexMatrix> {
    if !x.is_square() {
        return Err(VkError::DimensionMismatch("X must be square".into()));
    }
    if min_singular_value(x) <= EPS_DET * x.norm().max(1.0) {
        return Err(VkError::Singular(format!("X at node {node}")));
    }
    crate::matrix_kernel::solve(x, rhs)
}

/// Integrates the coupled system
/// σ₁C' = σ₂CA_π + γ*C, (Bnσ₁)' = −A_ξBnσ₂ + Bnγ*ᴴ, X' = Bnσ₂C
/// from initial values at the first node.
#[allow(clippy::too_many_arguments)]
pub fn evolve_coupling(
    a_pi: &ComplexMatrix,
    a_xi: &ComplexMatrix,
    x0: &ComplexMatrix,
    c0: &ComplexMatrix,
    bn0: &ComplexMatrix,
    sigma1: &OperatorFamily,
    sigma2: &OperatorFamily,
    gamma_star: &OperatorFamily,
) -> VkResult<NullPoleTriple> {
    let grid = *sigma1.grid();
    let n = a_pi.nrows();
    let k = a_xi.nrows();
    let m = sigma1.shape().0;
    if c0.shape() != (m, n) || bn0.shape() != (k, m) || x0.shape() != (k, n) {
        return Err(VkError::DimensionMismatch("initial C, Bn or X has the wrong shape".into()));
    }
    let inv = NodeCoefficients::new(sigma1.nodes().iter().map(inverse).collect::<VkResult<Vec<_>>>()?);
    let s2 = NodeCoefficients::new(sigma2.nodes().to_vec());
    let gs = NodeCoefficients::new(gamma_star.nodes().to_vec());
    // State packed as [[X, Bn], [C, 0]], (k+m)×(n+m).
    let mut y0 = zeros(k + m, n + m);
    y0.view_mut((0, 0), (k, n)).copy_from(x0);
    y0.view_mut((0, n), (k, m)).copy_from(bn0);
    y0.view_mut((k, 0), (m, n)).copy_from(c0);
    let rhs = |at: At, y: &ComplexMatrix| -> ComplexMatrix {
        let (si, s2i, gi) = (inv.at(at), s2.at(at), gs.at(at));
        let bn = y.view((0, n), (k, m)).into_owned();
        let c = y.view((k, 0), (m, n)).into_owned();
        let dc = &si * (&s2i * &c * a_pi + &gi * &c);
        let dbn = (-(a_xi * &bn * &s2i) + &bn * gi.adjoint()) * &si;
        let dx = &bn * &s2i * &c;
        let mut d = zeros(k + m, n + m);
        d.view_mut((0, 0), (k, n)).copy_from(&dx);
        d.view_mut((0, n), (k, m)).copy_from(&dbn);
        d.view_mut((k, 0), (m, n)).copy_from(&dc);
        d
    };
    let ys = rk4(&grid, rhs, y0, 0, Direction::Forward)?;
    let pick = |r: usize, c: usize, rows: usize, cols: usize| -> VkResult<OperatorFamily> {
        OperatorFamily::new(grid, ys.iter().map(|y| y.view((r, c), (rows, cols)).into_owned()).collect())
    };
    Ok(NullPoleTriple {
        c: pick(k, 0, m, n)?,
        a_pi: a_pi.clone(),
        a_xi: a_xi.clone(),
        bn: pick(0, n, k, m)?,
        x: pick(0, 0, k, n)?,
        sigma1: sigma1.clone(),
        sigma2: sigma2.clone(),
        gamma_star: gamma_star.clone(),
    })
}

/// Null-pole data of a vessel, frozen at `node_ref`: A_π = A₁(t_ref),
/// C = −BᴴF, A_ξ = −A_πᴴ, Bn = −Cᴴ, X = FᴴF, where F' = A₂F, F(t_ref) = I.
pub fn extract_null_pole(v: &DifferentialVessel, node_ref: usize) -> VkResult<NullPoleTriple> {
    let grid = *v.grid();
    if node_ref >= grid.len() {
        return Err(VkError::InvalidInput(format!("node {node_ref} is off the grid")));
    }
    let n = v.n();
    let coeff = NodeCoefficients::new(v.a2().nodes().to_vec());
    let f = integrate_linear_two_sided(&grid, &coeff, identity(n), node_ref)?;
    let a_pi = v.a1().at(node_ref).clone();
    let c: Vec<ComplexMatrix> = (0..grid.len()).map(|i| -(v.b().at(i).adjoint() * &f[i])).collect();
    let bn: Vec<ComplexMatrix> = c.iter().map(|ci| -ci.adjoint()).collect();
    let x: Vec<ComplexMatrix> = f.iter().map(|fi| hermitian_part(&(fi.adjoint() * fi))).collect();
    Ok(NullPoleTriple {
        c: OperatorFamily::new(grid, c)?,
        a_xi: -a_pi.adjoint(),
        a_pi,
        bn: OperatorFamily::new(grid, bn)?,
        x: OperatorFamily::new(grid, x)?,
        sigma1: v.sigma1().clone(),
        sigma2: v.sigma2().clone(),
        gamma_star: v.gamma_star().clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroPoleRealization {
    pub triple: NullPoleTriple,
    pub gamma: OperatorFamily,
    /// Conservative vessel with the same transfer function, when the pole
    /// pair admits a positive definite Lyapunov solution.
    pub vessel: Result<DifferentialVessel, VkError>,
    /// max ‖X⁻¹Bn + P⁻¹Cᴴ‖: zero exactly when the data are conservative.
    pub conservative_defect: f64,
    /// Smallest singular value of X over the grid.
    pub min_sigma_x: f64,
}

impl ZeroPoleRealization {
    pub fn transfer(&self, lambda: Complex64, node: usize) -> VkResult<ComplexMatrix> {
        self.triple.transfer(lambda, node)
    }

    pub fn transfer_along(&self, lambda: Complex64, exec: Execution) -> VkResult<Vec<ComplexMatrix>> {
        try_map_indices(exec, self.triple.grid().len(), |i| self.transfer(lambda, i))
    }

    pub fn transfer_pde_residual(&self, lambda: Complex64, exec: Execution) -> VkResult<f64> {
        let values = self.transfer_along(lambda, exec)?;
        crate::vessel_core::transfer_pde_residual_from(
            &values,
            &self.triple.sigma1,
            &self.triple.sigma2,
            &self.gamma,
            &self.triple.gamma_star,
            lambda,
        )
    }

    pub fn intertwining_residual(&self, lambda: Complex64, tau: usize, exec: Execution) -> VkResult<f64> {
        let values = self.transfer_along(lambda, exec)?;
        crate::vessel_core::intertwining_residual_from(
            &values,
            &self.triple.sigma1,
            &self.triple.sigma2,
            &self.gamma,
            &self.triple.gamma_star,
            lambda,
            tau,
        )
    }
}

struct VesselFrame {
    a1: ComplexMatrix,
    a2: ComplexMatrix,
    b: ComplexMatrix,
    defect: f64,
}

fn frame_at(t: &NullPoleTriple, i: usize) -> VkResult<VesselFrame> {
    let c = t.c.at(i);
    let ch = c.adjoint();
    let p = hermitian_part(&solve_sylvester(&t.a_pi, &(-t.a_pi.adjoint()), &(-(&ch * t.sigma1.at(i) * c)))?);
    let y = hermitian_sqrt(&p)?;
    let y_inv = inverse(&y)?;
    let dy = solve_sylvester(&y, &(-&y), &(-(&ch * t.sigma2.at(i) * c)))?;
    let b_tilde = checked_solve_x(t.x.at(i), t.bn.at(i), i)?;
    let defect = (b_tilde + crate::matrix_kernel::solve(&p, &ch)?).norm();
    Ok(VesselFrame {
        a1: &y * &t.a_pi * &y_inv,
        a2: dy * &y_inv,
        b: -(&y_inv * ch),
        defect,
    })
}

/// Transfer function and γ of a null-pole triple, and the conservative
/// vessel realizing it: P solves PA_π + A_πᴴP = −Cᴴσ₁C, Y = √P,
/// A₁ = YA_πY⁻¹, B = −Y⁻¹Cᴴ, A₂ = Y'Y⁻¹ with Y'Y + YY' = −Cᴴσ₂C.
pub fn zero_pole_realize(triple: &NullPoleTriple, exec: Execution) -> VkResult<ZeroPoleRealization> {
    let grid = *triple.grid();
    if triple.a_pi.nrows() != triple.a_xi.nrows() {
        return Err(VkError::DimensionMismatch("realization needs k = n".into()));
    }
    let min_sigma_x = triple
        .x
        .nodes()
        .iter()
        .map(min_singular_value)
        .fold(f64::INFINITY, f64::min);
    let gamma = triple.gamma()?;
    let frames = try_map_indices(exec, grid.len(), |i| frame_at(triple, i));
    let (vessel, conservative_defect) = match frames {
        Ok(frames) => {
            let defect = max_f64(frames.iter().map(|f| f.defect));
            let fam = |sel: fn(&VesselFrame) -> &ComplexMatrix| {
                OperatorFamily::new(grid, frames.iter().map(|f| sel(f).clone()).collect())
            };
            let vessel = (|| {
                DifferentialVessel::new(
                    fam(|f| &f.a1)?,
                    fam(|f| &f.a2)?,
                    fam(|f| &f.b)?,
                    triple.sigma1.clone(),
                    triple.sigma2.clone(),
                    gamma.clone(),
                    triple.gamma_star.clone(),
                )
            })();
            (vessel, defect)
        }
        Err(e) => (Err(e), f64::NAN),
    };
    Ok(ZeroPoleRealization { triple: triple.clone(), gamma, vessel, conservative_defect, min_sigma_x })
}

/// Hermitian form of a pole pair (A₁, C): X solves XA₁ + A₁ᴴX = −Cᴴσ₁C,
/// Y = √X, Ã₁ = YA₁Y⁻¹, C̃ = CY⁻¹.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianRealization {
    pub a1: ComplexMatrix,
    pub c: ComplexMatrix,
    pub sigma1: ComplexMatrix,
    pub x: ComplexMatrix,
    pub y: ComplexMatrix,
    pub a1_tilde: ComplexMatrix,
    pub c_tilde: ComplexMatrix,
    pub min_eigenvalue_x: f64,
}

pub fn hermitian_realize(
    a1: &ComplexMatrix,
    c: &ComplexMatrix,
    sigma1: &ComplexMatrix,
) -> VkResult<HermitianRealization> {
    let n = a1.nrows();
    if !a1.is_square() || c.ncols() != n || sigma1.shape() != (c.nrows(), c.nrows()) {
        return Err(VkError::DimensionMismatch("A1, C and sigma1 do not fit".into()));
    }
    let ch = c.adjoint();
    let x = hermitian_part(&solve_sylvester(a1, &(-a1.adjoint()), &(-(&ch * sigma1 * c)))?);
    let min_eigenvalue_x = crate::matrix_kernel::HermitianMatrix::new(x.clone())?
        .eigenvalues()
        .first()
        .copied()
        .unwrap_or(0.0);
    let y = hermitian_sqrt(&x)?;
    let y_inv = inverse(&y)?;
    Ok(HermitianRealization {
        a1: a1.clone(),
        c: c.clone(),
        sigma1: sigma1.clone(),
        a1_tilde: &y * a1 * &y_inv,
        c_tilde: c * &y_inv,
        x,
        y,
        min_eigenvalue_x,
    })
}

impl HermitianRealization {
    /// I + C(λI + A₁)⁻¹X⁻¹Cᴴσ₁.
    pub fn transfer(&self, lambda: Complex64) -> VkResult<ComplexMatrix> {
        let r = resolvent(&(-&self.a1), lambda)?;
        let xc = crate::matrix_kernel::solve(&self.x, &self.c.adjoint())?;
        Ok(identity(self.c.nrows()) + &self.c * r * xc * &self.sigma1)
    }

    /// I + C̃(λI + Ã₁)⁻¹C̃ᴴσ₁.
    pub fn reduced_transfer(&self, lambda: Complex64) -> VkResult<ComplexMatrix> {
        let r = resolvent(&(-&self.a1_tilde), lambda)?;
        Ok(identity(self.c.nrows()) + &self.c_tilde * r * self.c_tilde.adjoint() * &self.sigma1)
    }

    /// ‖Ã₁ + Ã₁ᴴ + C̃ᴴσ₁C̃‖.
    pub fn colligation_residual(&self) -> f64 {
        (&self.a1_tilde + self.a1_tilde.adjoint() + self.c_tilde.adjoint() * &self.sigma1 * &self.c_tilde).norm()
    }

    /// ‖S(λ)σ₁⁻¹S(−λ̄)ᴴ − σ₁⁻¹‖.
    pub fn symmetry_residual(&self, lambda: Complex64) -> VkResult<f64> {
        let inv = inverse(&self.sigma1)?;
        let s = self.transfer(lambda)?;
        let mirror = self.transfer(-lambda.conj())?;
        Ok((s * &inv * mirror.adjoint() - inv).norm())
    }

    pub fn lyapunov_residual(&self) -> f64 {
        (&self.x * &self.a1 + self.a1.adjoint() * &self.x + self.c.adjoint() * &self.sigma1 * &self.c).norm()
    }
}
