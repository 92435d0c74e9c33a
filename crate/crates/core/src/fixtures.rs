//! Seeded test data: random matrices, sample vessels, continuous-model inputs.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{OperatorFamily, TimeGrid};
use crate::interpolation::{evolve_coupling, NullPoleTriple};
use crate::matrix_kernel::{hermitian_part, identity, scalar, solve_sylvester, zeros, ComplexMatrix};
use crate::spectral_synthesis::{build_discrete, ContinuousSpectrumModel, ElementaryData};
use crate::vessel_core::DifferentialVessel;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn entry(r: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    DMatrix::from_fn(rows, cols, |_, _| entry(r))
}

pub fn random_vector(r: &mut ChaCha8Rng, n: usize) -> DVector<Complex64> {
    DVector::from_fn(n, |_, _| entry(r))
}

pub fn random_hermitian(r: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    hermitian_part(&random_matrix(r, n, n))
}

pub fn random_unitary(r: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    random_matrix(r, n, n).qr().q()
}

/// (σ₁ positive definite, σ₂ Hermitian, γ skew-Hermitian), all m×m.
pub fn random_sigmas(r: &mut ChaCha8Rng, m: usize) -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let g = random_matrix(r, m, m).scale(0.5);
    let s1 = hermitian_part(&(&g * g.adjoint() + identity(m)));
    let s2 = random_hermitian(r, m).scale(0.5);
    let k = random_matrix(r, m, m).scale(0.5);
    let gamma = (&k - k.adjoint()).scale(0.5);
    (s1, s2, gamma)
}

fn constant(grid: TimeGrid, m: ComplexMatrix) -> OperatorFamily {
    OperatorFamily::constant(grid, m).expect("finite constant family")
}

/// Scalar vessel with A₁ = z, σ₁ = 1, σ₂ = 0 and S(λ) = (λ + z̄)/(λ − z).
pub fn blaschke_vessel(grid: TimeGrid, z: Complex64) -> DifferentialVessel {
    let b = Complex64::from((-2.0 * z.re).sqrt());
    let zero = constant(grid, scalar(Complex64::from(0.0)));
    DifferentialVessel::new(
        constant(grid, scalar(z)),
        zero.clone(),
        constant(grid, scalar(b)),
        constant(grid, identity(1)),
        zero.clone(),
        zero.clone(),
        zero,
    )
    .expect("valid scalar vessel")
}

/// Constant vessel with A₂ = 0, σ₂ = 0, γ = γ* = 0 and A₁ = K − Bσ₁Bᴴ/2, K skew.
pub fn random_constant_vessel(r: &mut ChaCha8Rng, grid: TimeGrid, n: usize, m: usize) -> DifferentialVessel {
    let (s1, _, _) = random_sigmas(r, m);
    let b = random_matrix(r, n, m);
    let k = random_matrix(r, n, n);
    let a1 = (&k - k.adjoint()).scale(0.5) - (&b * &s1 * b.adjoint()).scale(0.5);
    DifferentialVessel::new(
        constant(grid, a1),
        constant(grid, zeros(n, n)),
        constant(grid, b),
        constant(grid, s1),
        constant(grid, zeros(m, m)),
        constant(grid, zeros(m, m)),
        constant(grid, zeros(m, m)),
    )
    .expect("valid constant vessel")
}

fn spectral_data(r: &mut ChaCha8Rng, n: usize, m: usize, sigma1: &ComplexMatrix) -> Vec<ElementaryData> {
    (0..n)
        .map(|h| {
            let im = h as f64 - (n as f64 - 1.0) / 2.0 + r.gen_range(-0.2..0.2);
            ElementaryData::normalized(im, random_vector(r, m), sigma1)
        })
        .collect()
}

/// Vessel with n simple eigenvalues, synthesized from random spectral data
/// over constant σ₁ > 0, σ₂ and skew γ.
pub fn synthesized_vessel(seed: u64, n: usize, m: usize, grid: TimeGrid) -> DifferentialVessel {
    let mut r = rng(seed);
    let (s1, s2, g) = random_sigmas(&mut r, m);
    let data = spectral_data(&mut r, n, m, &s1);
    build_discrete(&data, &constant(grid, s1), &constant(grid, s2), &constant(grid, g))
        .expect("synthesis succeeds")
        .vessel
}

/// Two vessels over the same σ₁, σ₂ with γ of the second equal to γ* of the first.
pub fn random_chained_pair(
    r: &mut ChaCha8Rng,
    grid: TimeGrid,
    n1: usize,
    n2: usize,
    m: usize,
) -> (DifferentialVessel, DifferentialVessel) {
    let (s1, s2, g) = random_sigmas(r, m);
    let (s1f, s2f) = (constant(grid, s1.clone()), constant(grid, s2));
    let first = build_discrete(&spectral_data(r, n1, m, &s1), &s1f, &s2f, &constant(grid, g))
        .expect("synthesis succeeds")
        .vessel;
    let second = build_discrete(&spectral_data(r, n2, m, &s1), &s1f, &s2f, first.gamma_star())
        .expect("synthesis succeeds")
        .vessel;
    (first, second)
}

/// One-dimensional vessel with B = 0 that can follow `v` in a coupling.
pub fn trivial_vessel(v: &DifferentialVessel) -> DifferentialVessel {
    let grid = *v.grid();
    DifferentialVessel::new(
        constant(grid, scalar(Complex64::i())),
        constant(grid, zeros(1, 1)),
        constant(grid, zeros(1, v.m())),
        v.sigma1().clone(),
        v.sigma2().clone(),
        v.gamma_star().clone(),
        v.gamma_star().clone(),
    )
    .expect("valid trivial vessel")
}

/// (A₁ stable n×n, C m×n, σ₁ positive definite m×m).
pub fn random_stable_pair(r: &mut ChaCha8Rng, n: usize, m: usize) -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let (s1, _, _) = random_sigmas(r, m);
    let a1 = random_matrix(r, n, n) - identity(n).scale(2.5);
    let c = random_matrix(r, m, n);
    (a1, c, s1)
}

/// Conservative null-pole data evolved over `grid`: A_π stable, A_ξ = −A_πᴴ,
/// X(0) the Lyapunov solution and Bn(0) = −C(0)ᴴ. Returns the triple and
/// its Sylvester scale.
pub fn coupling_dataset(seed: u64, n: usize, m: usize, grid: TimeGrid) -> (NullPoleTriple, f64) {
    slow_coupling_dataset(seed, n, m, grid, 1.0)
}

/// `coupling_dataset` with σ₂ and γ multiplied by `rate`, which slows the
/// t₂-evolution by that factor.
pub fn slow_coupling_dataset(seed: u64, n: usize, m: usize, grid: TimeGrid, rate: f64) -> (NullPoleTriple, f64) {
    let mut r = rng(seed);
    let (a_pi, c0, s1) = random_stable_pair(&mut r, n, m);
    let (_, s2, g) = random_sigmas(&mut r, m);
    let (s2, g) = (s2.scale(rate), g.scale(rate));
    let ch = c0.adjoint();
    let x0 = hermitian_part(
        &solve_sylvester(&a_pi, &(-a_pi.adjoint()), &(-(&ch * &s1 * &c0))).expect("disjoint spectra"),
    );
    let triple = evolve_coupling(
        &a_pi,
        &(-a_pi.adjoint()),
        &x0,
        &c0,
        &(-ch),
        &constant(grid, s1),
        &constant(grid, s2),
        &constant(grid, g),
    )
    .expect("coupling evolves");
    let scale = triple.sylvester_scale();
    (triple, scale)
}

fn continuous_fixture(
    nt: usize,
    ns: usize,
    coupled: bool,
) -> (ContinuousSpectrumModel, OperatorFamily, OperatorFamily, OperatorFamily) {
    let mut r = rng(if coupled { 72 } else { 71 });
    let (s1, s2, g) = random_sigmas(&mut r, 2);
    let s2 = if coupled { s2 } else { zeros(2, 2) };
    let t_grid = TimeGrid::new(0.0, 1.0, nt).expect("valid grid");
    let s_grid = TimeGrid::new(0.0, 1.0, ns).expect("valid grid");
    let c: Vec<f64> = s_grid.nodes().iter().map(|s| 0.5 + s).collect();
    let beta: Vec<ComplexMatrix> = s_grid
        .nodes()
        .iter()
        .map(|s| DMatrix::from_column_slice(2, 1, &[Complex64::new(s.cos(), 0.0), Complex64::new(0.0, 0.5 * s.sin())]).scale(0.6))
        .collect();
    let model = ContinuousSpectrumModel::with_consistent_gamma(s_grid, c, beta, g.clone(), &s1, &s2)
        .expect("valid model");
    (model, constant(t_grid, g), constant(t_grid, s1), constant(t_grid, s2))
}

/// Continuous model with σ₂ = 0: (model, γ(t₂, 0), σ₁, σ₂).
pub fn decoupled_continuous_fixture(
    nt: usize,
    ns: usize,
) -> (ContinuousSpectrumModel, OperatorFamily, OperatorFamily, OperatorFamily) {
    continuous_fixture(nt, ns, false)
}

/// Continuous model with σ₂ ≠ 0, so γ varies in s.
pub fn coupled_continuous_fixture(
    nt: usize,
    ns: usize,
) -> (ContinuousSpectrumModel, OperatorFamily, OperatorFamily, OperatorFamily) {
    continuous_fixture(nt, ns, true)
}
