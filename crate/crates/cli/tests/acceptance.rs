//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//! Run with `--nocapture` to see the lines, `--include-ignored` to include
//! the criterion that is known to fail (see README).

mod common;

use common::{fixture, path_str, vesselkit};
use vesselkit::fixtures::{
    blaschke_vessel, coupling_dataset, decoupled_continuous_fixture, random_chained_pair, random_constant_vessel,
    random_matrix, random_sigmas, random_stable_pair, random_unitary, random_vector, rng, slow_coupling_dataset,
    synthesized_vessel,
};
use vesselkit::interpolation::{hermitian_realize, zero_pole_realize};
use vesselkit::matrix_kernel::{identity, matrix_exp, scalar, singular_values, HermitianMatrix};
use vesselkit::par::max_f64;
use vesselkit::probes::{probe_lambdas, probe_lambdas_right, probe_nodes};
use vesselkit::spectral_synthesis::{
    build_discrete, continuous_model_evolve, couple_all, extract_elementary, mult_integral, ElementaryData,
};
use vesselkit::vessel_core::{
    adjoint_symmetry_residual, couple, expansivity_check, gauge_equivalence, gauge_transform,
    gauge_transform_with_derivative, phi_bilinear_residual, phi_symmetry_residual, simulate, verify_vessel,
};
use vesselkit::{c64, Complex64, ComplexMatrix, DifferentialVessel, Execution, OperatorFamily, TimeGrid, VkError};
use vesselkit_cli::schema::{parse, to_json, VesselDocument};

const SEQ: Execution = Execution::Sequential;

fn report(id: u32, title: &str, ok: bool, detail: String) {
    println!("[{}] criterion {id:02} {title}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id:02} {title}: {detail}");
}

fn probes_for(v: &DifferentialVessel, seed: u64, count: usize) -> Vec<(Complex64, usize)> {
    let eig = v.all_eigenvalues();
    let radius = 1.0 + eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let lambdas = probe_lambdas(seed, count, radius, &eig, 0.2 * radius);
    let nodes = probe_nodes(seed, count, v.grid().len());
    lambdas.into_iter().zip(nodes).collect()
}

/// Vessels whose first colligation condition holds to roundoff.
fn colligation_exact_fixtures() -> Vec<(&'static str, DifferentialVessel)> {
    let grid = TimeGrid::new(0.0, 1.0, 40).unwrap();
    vec![
        ("blaschke", blaschke_vessel(grid, c64(-0.7, 0.4))),
        ("constant", random_constant_vessel(&mut rng(101), grid, 4, 2)),
        ("constant_m3", random_constant_vessel(&mut rng(102), grid, 3, 3)),
        ("synthesized", synthesized_vessel(103, 3, 2, grid)),
        ("synthesized_n5", synthesized_vessel(104, 5, 3, grid)),
    ]
}

#[test]
fn criterion_01_coupling_multiplicativity() {
    let mut worst = 0.0f64;
    for pair in 0..50u64 {
        let mut r = rng(1000 + pair);
        let (n1, n2, m) = (1 + pair as usize % 3, 1 + (pair as usize / 3) % 3, 1 + pair as usize % 4);
        let (v1, v2) = random_chained_pair(&mut r, TimeGrid::new(0.0, 1.0, 20).unwrap(), n1, n2, m);
        let c = couple(&v1, &v2).unwrap();
        for (lam, node) in probes_for(&c, pair, 20) {
            let d = c.transfer(lam, node).unwrap() - v2.transfer(lam, node).unwrap() * v1.transfer(lam, node).unwrap();
            worst = worst.max(d.norm());
        }
    }
    report(1, "coupling multiplicativity", worst < 1e-11, format!("max ‖S_c − S₂S₁‖ = {worst:.2e} (< 1e-11, 50 pairs × 20 probes)"));
}

#[test]
fn criterion_02_j_symmetry() {
    let mut worst = 0.0f64;
    for (_, v) in colligation_exact_fixtures() {
        for (lam, node) in probes_for(&v, 2, 20) {
            worst = worst.max(adjoint_symmetry_residual(&v, lam, node).unwrap());
        }
    }
    report(2, "J-symmetry", worst < 1e-11, format!("max ‖S(−λ̄)ᴴσ₁S(λ) − σ₁‖ = {worst:.2e} (< 1e-11)"));
}

#[test]
#[ignore = "fails as stated: for Re λ > 0, Sᴴσ₁S − σ₁ = −2Re λ·σ₁BᴴRᴴRBσ₁ is negative semidefinite"]
fn criterion_02_expansivity_in_right_half_plane() {
    let mut worst = f64::INFINITY;
    let mut worst_case = String::new();
    for (name, v) in colligation_exact_fixtures() {
        let lambdas = probe_lambdas_right(2, 20, 0.05, 3.0);
        let nodes = probe_nodes(2, 20, v.grid().len());
        for (lam, node) in lambdas.into_iter().zip(nodes) {
            let e = expansivity_check(&v, lam, node).unwrap();
            if e.min_eigenvalue < worst {
                worst = e.min_eigenvalue;
                worst_case = format!("{name} at λ = {lam:.3}");
            }
        }
    }
    report(
        2,
        "expansivity Sᴴσ₁S ⪰ σ₁ for Re λ > 0",
        worst >= -1e-10,
        format!("min eig(Sᴴσ₁S − σ₁) = {worst:.3e} ({worst_case}), required ≥ −1e-10"),
    );
}

#[test]
fn criterion_03_energy_balance() {
    let mut t1 = 0.0f64;
    for (k, (_, v)) in colligation_exact_fixtures().into_iter().enumerate() {
        let mut r = rng(300 + k as u64);
        for (lam, _) in probes_for(&v, 3, 5) {
            let tr = simulate(&v, lam, &random_vector(&mut r, v.m())).unwrap();
            t1 = t1.max(tr.max_defect_t1());
        }
    }
    let tol = 1e-8;
    let mut constants = Vec::new();
    let mut within = true;
    for n_steps in [50, 100, 200] {
        let v = synthesized_vessel(303, 3, 2, TimeGrid::new(0.0, 1.0, n_steps).unwrap());
        assert!(verify_vessel(&v, tol, SEQ).unwrap().passed());
        let u0 = random_vector(&mut rng(304), 2);
        let h = v.grid().step();
        let t2 = simulate(&v, c64(0.6, -0.4), &u0).unwrap().max_defect_t2();
        constants.push(t2 / (h * h));
        within &= t2 <= tol + constants.last().unwrap() * h * h;
    }
    let ratios: Vec<f64> = constants.windows(2).map(|w| w[1] / w[0]).collect();
    let stable = ratios.iter().all(|q| (0.7..1.3).contains(q));
    report(
        3,
        "energy balance",
        t1 < 1e-11 && stable && within,
        format!("max t1 defect = {t1:.2e} (< 1e-11); C = t2/h² = {constants:.3?}, halving ratios {ratios:.3?}"),
    );
}

#[test]
fn criterion_04_realization_pde() {
    let residuals = |n_steps: usize| {
        // The residual is absolute and its h² constant grows like the cube of
        // the t₂-rate ‖σ₁⁻¹(λσ₂ + γ)‖, so σ₂ and γ are halved.
        let (triple, _) = slow_coupling_dataset(404, 2, 2, TimeGrid::new(0.0, 1.0, n_steps).unwrap(), 0.5);
        let rz = zero_pole_realize(&triple, SEQ).unwrap();
        let eig = vesselkit::matrix_kernel::eigenvalues(&triple.a_pi);
        let lambdas = probe_lambdas(4, 10, 4.0, &eig, 0.5);
        let pde = max_f64(lambdas.iter().map(|l| rz.transfer_pde_residual(*l, SEQ).unwrap()));
        let tw = max_f64(lambdas.iter().map(|l| rz.intertwining_residual(*l, n_steps / 3, SEQ).unwrap()));
        (pde, tw)
    };
    let (pde_c, tw_c) = residuals(200);
    let (pde, tw) = residuals(400);
    let (q_pde, q_tw) = (pde_c / pde, tw_c / tw);
    report(
        4,
        "realization PDE",
        pde < 1e-5 && tw < 1e-5 && q_pde >= 3.5 && q_tw >= 3.5,
        format!("n=400: PDE {pde:.2e}, ‖SΦ − Φ*S₀‖ {tw:.2e} (< 1e-5); halving ratios {q_pde:.2}, {q_tw:.2} (≥ 3.5)"),
    );
}

#[test]
fn criterion_05_sylvester_conservation() {
    let mut ok = true;
    let mut worst_margin = f64::INFINITY;
    for k in 0..20u64 {
        let n = 1 + k as usize % 4;
        let m = 1 + k as usize % 3;
        let (triple, scale) = coupling_dataset(500 + k, n, m, TimeGrid::new(0.0, 1.0, 100).unwrap());
        let d = triple.sylvester_defects();
        let h = triple.grid().step();
        let bound = d[0] + 100.0 * h.powi(4) * scale;
        let worst = max_f64(d.iter().copied());
        ok &= worst <= bound;
        worst_margin = worst_margin.min(bound - worst);
    }
    report(5, "Sylvester conservation", ok, format!("20 datasets, smallest margin to d₀ + 100h⁴·scale = {worst_margin:.2e}"));
}

#[test]
fn criterion_06_blaschke_round_trip() {
    let grid = TimeGrid::new(0.0, 1.0, 40).unwrap();
    let mut r = rng(606);
    let (s1, s2, g) = random_sigmas(&mut r, 2);
    let (s1, s2, g) = (
        OperatorFamily::constant(grid, s1).unwrap(),
        OperatorFamily::constant(grid, s2).unwrap(),
        OperatorFamily::constant(grid, g).unwrap(),
    );
    let data: Vec<ElementaryData> =
        (0..3).map(|h| ElementaryData::normalized(h as f64 - 1.0, random_vector(&mut r, 2), s1.at(0))).collect();
    let v = build_discrete(&data, &s1, &s2, &g).unwrap().vessel;
    let mut factors = Vec::new();
    let mut rest = Some(v.clone());
    for d in &data {
        let cur = rest.take().unwrap();
        let ex = extract_elementary(&cur, d.z, 10).unwrap();
        factors.push(ex.factor);
        rest = ex.quotient;
    }
    let leftover = rest.is_none();
    let recoupled = couple_all(&factors).unwrap();
    let (mut quotient_dev, mut recouple_dev) = (0.0f64, 0.0f64);
    // The inverse factors have poles at the mirror points −z̄.
    let mut avoid = v.all_eigenvalues();
    avoid.extend(data.iter().map(|d| -d.z.conj()));
    let radius = 1.0 + avoid.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let lambdas = probe_lambdas(6, 20, radius, &avoid, 0.2 * radius);
    for (lam, node) in lambdas.into_iter().zip(probe_nodes(6, 20, v.grid().len())) {
        let mut q = v.transfer(lam, node).unwrap();
        for f in &factors {
            q *= f.transfer_inverse(lam, node).unwrap();
        }
        quotient_dev = quotient_dev.max((q - identity(2)).norm());
        recouple_dev = recouple_dev.max((recoupled.transfer(lam, node).unwrap() - v.transfer(lam, node).unwrap()).norm());
    }
    report(
        6,
        "Blaschke round trip",
        leftover && quotient_dev < 1e-8 && recouple_dev < 1e-8,
        format!("‖S·S₁⁻¹S₂⁻¹S₃⁻¹ − I‖ = {quotient_dev:.2e}, ‖S_recoupled − S‖ = {recouple_dev:.2e} (< 1e-8)"),
    );
}

#[test]
fn criterion_07_classical_factors() {
    let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
    let mut blaschke = 0.0f64;
    for z in [c64(-0.5, 1.3), c64(-2.0, -0.7), c64(-0.05, 0.0)] {
        let v = blaschke_vessel(grid, z);
        for lam in [c64(1.0, 0.0), c64(0.3, -2.0), c64(-4.0, 1.0), c64(0.0, 0.9)] {
            let s = v.transfer(lam, 5).unwrap()[(0, 0)];
            blaschke = blaschke.max((s - (lam + z.conj()) / (lam - z)).norm());
        }
    }
    let lam = c64(1.5, 0.5);
    let k = scalar(Complex64::i());
    let s_grid = TimeGrid::new(0.0, 1.0, 1000).unwrap();
    let ks = vec![k.clone(); s_grid.len()];
    let w = mult_integral(&ks, &vec![0.0; s_grid.len()], &s_grid, lam, s_grid.n_steps).unwrap();
    let constant = (w[(0, 0)] - (Complex64::i() / lam).exp()).norm();
    // Varying c(s) = s: exact value exp(i·log((λ + 1)/λ)).
    let exact = (Complex64::i() * ((lam + 1.0) / lam).ln()).exp();
    let errs: Vec<f64> = [1000usize, 2000]
        .iter()
        .map(|&n| {
            let g = TimeGrid::new(0.0, 1.0, n).unwrap();
            let c: Vec<f64> = g.nodes();
            let w = mult_integral(&vec![k.clone(); g.len()], &c, &g, lam, n).unwrap();
            (w[(0, 0)] - exact).norm()
        })
        .collect();
    let ratio = errs[0] / errs[1];
    report(
        7,
        "classical factors",
        blaschke < 1e-12 && constant < 1e-3 && errs[0] < 1e-3 && (1.8..2.2).contains(&ratio),
        format!(
            "Blaschke {blaschke:.2e} (< 1e-12); exp(iL/λ) at Δs=1e-3: {constant:.2e}; varying c: {:.2e} → {:.2e}, ratio {ratio:.3}",
            errs[0], errs[1]
        ),
    );
}

/// σ_min/σ_max of the Krylov observability matrix [C; CA; …; CAⁿ⁻¹].
fn observability_conditioning(a: &ComplexMatrix, c: &ComplexMatrix) -> f64 {
    let (n, m) = (a.nrows(), c.nrows());
    let mut blocks = vec![c.clone()];
    for k in 1..n {
        blocks.push(&blocks[k - 1] * a);
    }
    let o = ComplexMatrix::from_fn(n * m, n, |i, j| blocks[i / m][(i % m, j)]);
    let sv = singular_values(&o);
    sv[sv.len() - 1] / sv[0]
}

#[test]
fn criterion_08_hermitian_realization() {
    let mut r = rng(808);
    let (mut min_x, mut colligation, mut symmetry) = (f64::INFINITY, 0.0f64, 0.0f64);
    let mut accepted = 0;
    while accepted < 20 {
        let n = 2 + accepted % 3;
        let m = 1 + accepted % 2;
        let (a1, c, s1) = random_stable_pair(&mut r, n, m);
        let dissipative = HermitianMatrix::new(&a1 + a1.adjoint()).unwrap().eigenvalues().last().copied().unwrap() < 0.0;
        // The symmetry defect is roundoff times cond(X), so nearly
        // unobservable pairs are skipped.
        if !dissipative || observability_conditioning(&a1, &c) < 1e-3 {
            continue;
        }
        accepted += 1;
        let h = hermitian_realize(&a1, &c, &s1).unwrap();
        min_x = min_x.min(h.min_eigenvalue_x);
        colligation = colligation.max(h.colligation_residual());
        for lam in probe_lambdas(accepted as u64, 10, 4.0, &vesselkit::matrix_kernel::eigenvalues(&a1), 0.3) {
            let mirror = vesselkit::matrix_kernel::eigenvalues(&(-&a1));
            if mirror.iter().all(|z| (z - lam).norm() > 0.3) {
                symmetry = symmetry.max(h.symmetry_residual(lam).unwrap());
            }
        }
    }
    report(
        8,
        "Hermitian realization",
        min_x > 0.0 && colligation < 1e-9 && symmetry < 1e-10,
        format!("min eig X = {min_x:.3e} (> 0), colligation {colligation:.2e} (< 1e-9), ‖Sσ₁⁻¹S(−λ̄)ᴴ − σ₁⁻¹‖ = {symmetry:.2e} (< 1e-10)"),
    );
}

#[test]
fn criterion_09_gauge_equivalence() {
    let v = synthesized_vessel(909, 3, 2, TimeGrid::new(0.0, 1.0, 40).unwrap());
    let mut r = rng(910);
    let u0 = random_unitary(&mut r, 3);
    let constant = OperatorFamily::constant(*v.grid(), u0.clone()).unwrap();
    let k = random_matrix(&mut r, 3, 3);
    let skew = (&k - k.adjoint()).scale(0.5);
    let moving = OperatorFamily::from_fn(*v.grid(), |t| matrix_exp(&(&skew * c64(t, 0.0))) * &u0).unwrap();
    let du: Vec<_> = moving.nodes().iter().map(|u| &skew * u).collect();
    let mut worst_u = 0.0f64;
    let mut worst_transfer = 0.0f64;
    for (u, w) in [
        (&constant, gauge_transform(&v, &constant).unwrap()),
        (&moving, gauge_transform_with_derivative(&v, &moving, &du).unwrap()),
    ] {
        let map = gauge_equivalence(&v, &w, 20, 9, SEQ).unwrap();
        worst_u = worst_u.max(map.u.max_distance(u)).max(map.unitarity_defect);
        worst_transfer = worst_transfer.max(map.transfer_mismatch);
    }
    let b = v.b().map(|_, b| b.scale(1.001)).unwrap();
    let perturbed = DifferentialVessel::new(
        v.a1().clone(),
        v.a2().clone(),
        b,
        v.sigma1().clone(),
        v.sigma2().clone(),
        v.gamma().clone(),
        v.gamma_star().clone(),
    )
    .unwrap();
    let rejected = matches!(gauge_equivalence(&v, &perturbed, 20, 9, SEQ), Err(VkError::NotEquivalent(_)));
    report(
        9,
        "gauge equivalence",
        worst_u < 1e-8 && worst_transfer < 1e-8 && rejected,
        format!("‖U − U_true‖, unitarity ≤ {worst_u:.2e}; transfer {worst_transfer:.2e} (< 1e-8); perturbed B rejected: {rejected}"),
    );
}

#[test]
fn criterion_10_fundamental_matrix_identities() {
    let mut r = rng(1010);
    let (s1, s2a, ga) = random_sigmas(&mut r, 2);
    let (_, s2b, gb) = random_sigmas(&mut r, 2);
    let residuals = |n_steps: usize| {
        let grid = TimeGrid::new(0.0, 1.0, n_steps).unwrap();
        let sigma1 = OperatorFamily::constant(grid, s1.clone()).unwrap();
        let sigma2 = OperatorFamily::from_fn(grid, |t| &s2a + s2b.scale(0.5 * t.sin())).unwrap();
        let gamma = OperatorFamily::from_fn(grid, |t| &ga + gb.scale(0.5 * t * t)).unwrap();
        let lam = c64(0.7, 0.3);
        let mu = c64(-0.2, 1.0);
        (
            phi_symmetry_residual(&sigma1, &sigma2, &gamma, lam, n_steps / 4).unwrap(),
            phi_bilinear_residual(&sigma1, &sigma2, &gamma, lam, mu, n_steps / 4).unwrap(),
        )
    };
    let (sym, bil) = residuals(400);
    let (_, bil_c) = residuals(200);
    // At n = 200 the symmetry defect already sits at roundoff; its order is
    // read off coarse grids where the integrator error dominates.
    let (sym_25, _) = residuals(24);
    let (sym_50, _) = residuals(48);
    let (q_sym, q_bil) = (sym_25 / sym_50, bil_c / bil);
    report(
        10,
        "fundamental-matrix identities",
        sym < 1e-6 && bil < 1e-6 && q_sym >= 12.0 && q_bil >= 3.5,
        format!("n=400: symmetry {sym:.2e}, bilinear {bil:.2e} (< 1e-6); halving ratios {q_sym:.1} (symmetry, n 24→48, order ≥ 4), {q_bil:.2} (bilinear, order 2)"),
    );
}

#[test]
fn criterion_11_continuous_model() {
    let run = |n: usize| {
        let (model, gamma_t, s1, s2) = decoupled_continuous_fixture(n, n);
        let ev = continuous_model_evolve(&model, &gamma_t, &s1, &s2, Execution::default()).unwrap();
        ev.residuals(c64(1.0, 0.5), Execution::default()).unwrap()
    };
    let coarse = run(200);
    let fine = run(400);
    let q = coarse.mixed_partial / fine.mixed_partial;
    report(
        11,
        "continuous model",
        fine.dgamma < 1e-4 && fine.dk < 1e-4 && q >= 3.5,
        format!(
            "Δ=1/400: dγ {:.2e}, dK {:.2e} (< 1e-4); mixed partial {:.2e} → {:.2e}, ratio {q:.2} (O(Δ²))",
            fine.dgamma, fine.dk, coarse.mixed_partial, fine.mixed_partial
        ),
    );
}

#[test]
fn criterion_12_cli_contract() {
    let f = |name: &str| fixture(name);
    let runs = [
        (vesselkit(&["verify", path_str(&f("constant.json"))]).code, 0),
        (vesselkit(&["verify", path_str(&f("malformed.json"))]).code, 1),
        (vesselkit(&["verify", path_str(&f("singular_sigma1.json"))]).code, 2),
        (vesselkit(&["verify", path_str(&f("perturbed_b.json"))]).code, 3),
        (vesselkit(&["synthesize", path_str(&f("spectral_empty.json"))]).code, 1),
        (vesselkit(&["synthesize", path_str(&f("spectral_degenerate.json"))]).code, 2),
        (vesselkit(&["gauge", path_str(&f("synthesized.json")), path_str(&f("perturbed_b.json"))]).code, 3),
    ];
    let codes_ok = runs.iter().all(|(got, want)| got == want);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.json");
    let synth = vesselkit(&["synthesize", path_str(&f("spectral_three.json")), "-o", path_str(&out)]);
    let written = std::fs::read_to_string(&out).unwrap_or_default();
    let mut round_trip = synth.code == 0;
    for text in [written.clone()]
        .into_iter()
        .chain(["constant.json", "blaschke.json", "synthesized.json"].iter().map(|n| std::fs::read_to_string(f(n)).unwrap()))
    {
        let doc: VesselDocument = parse("vessel", &text).unwrap();
        let v = doc.to_vessel().unwrap();
        round_trip &= to_json(&VesselDocument::from_vessel(&v)).unwrap() == text;
    }

    let verify = |seed: &str| vesselkit(&["verify", path_str(&f("synthesized.json")), "--seed", seed]).stdout;
    let (a, b, c) = (verify("5"), verify("5"), verify("6"));
    let reproducible = a == b && a != c;
    report(
        12,
        "CLI contract",
        codes_ok && round_trip && reproducible,
        format!("exit codes {:?}; bit-exact round trip: {round_trip}; seeded reports identical: {reproducible}", runs.map(|r| r.0)),
    );
}
