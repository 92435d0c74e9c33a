//! Subcommand bodies. Each takes parsed inputs and fills a [`Report`]; the
//! vessel-producing commands also return the emitted document.

use std::path::Path;

use nalgebra::DVector;
use serde_json::{json, Value};
use vesselkit::interpolation::{evolve_coupling, zero_pole_realize, NullPoleTriple};
use vesselkit::par::max_f64;
use vesselkit::probes::{probe_lambdas, probe_lambdas_right, probe_nodes};
use vesselkit::spectral_synthesis::{build_discrete, extract_elementary, mult_integral, ElementaryData};
use vesselkit::vessel_core::{
    adjoint_symmetry_residual, couple, expansivity_check, gauge_equivalence, simulate, transfer_pde_residual,
    verify_vessel, ConditionReport,
};
use vesselkit::{Complex64, Config, DifferentialVessel, Execution, OperatorFamily, TimeGrid};

use crate::error::CliError;
use crate::report::{Probes, Report, Residual};
use crate::schema::{
    check_optional_version, entry, family_rows, matrix, parse, rows, vector, vector_entries, MatrixOrFamily,
    MultIntDocument, NullPoleDocument, ScalarOrList, SpectralDocument, VesselDocument,
};

pub struct Request<'a> {
    pub config: &'a Config,
    pub lambdas: &'a [Complex64],
    pub node: Option<usize>,
    pub exec: Execution,
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn read_vessel(path: &Path) -> Result<DifferentialVessel, CliError> {
    parse::<VesselDocument>(&path.display().to_string(), &read_text(path)?)?.to_vessel()
}

fn check_node(node: usize, grid: &TimeGrid) -> Result<usize, CliError> {
    if node < grid.len() {
        Ok(node)
    } else {
        Err(CliError::Input(format!("node {node} is off the grid (0..={})", grid.n_steps)))
    }
}

fn probe_radius(eig: &[Complex64]) -> f64 {
    1.0 + eig.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Explicit --lambda values, or seeded probes away from the spectrum.
fn lambdas_for(req: &Request, v: &DifferentialVessel) -> Vec<Complex64> {
    if !req.lambdas.is_empty() {
        return req.lambdas.to_vec();
    }
    let eig = v.all_eigenvalues();
    let radius = probe_radius(&eig);
    probe_lambdas(req.config.seed, req.config.probes, radius, &eig, 0.1 * radius)
}

fn condition_rows(rep: &ConditionReport) -> Vec<Residual> {
    rep.residuals
        .iter()
        .map(|r| Residual {
            name: r.condition.name().into(),
            value: r.value.is_finite().then_some(r.value),
            node: Some(r.node),
            allowance: Some(r.allowance),
            passed: Some(r.passed),
        })
        .collect()
}

pub fn verify(req: &Request, v: &DifferentialVessel, report: &mut Report) -> Result<(), CliError> {
    let rep = verify_vessel(v, req.config.tol, req.exec)?;
    report.residuals = condition_rows(&rep);
    let lambdas = lambdas_for(req, v);
    let nodes = probe_nodes(req.config.seed, lambdas.len(), v.grid().len());
    let mut sym = 0.0f64;
    for (lam, node) in lambdas.iter().zip(&nodes) {
        sym = sym.max(adjoint_symmetry_residual(v, *lam, *node)?);
    }
    report.residuals.push(Residual::checked("j_symmetry", sym, req.config.tol));
    let pde = max_f64(
        lambdas.iter().map(|lam| transfer_pde_residual(v, *lam, req.exec)).collect::<Result<Vec<_>, _>>()?,
    );
    report.residuals.push(Residual::info("transfer_pde", pde));
    let right = probe_lambdas_right(req.config.seed, lambdas.len(), 0.1, probe_radius(&v.all_eigenvalues()));
    let mut min_eig = f64::INFINITY;
    let mut mismatch = 0.0f64;
    for (lam, node) in right.iter().zip(&nodes) {
        let e = expansivity_check(v, *lam, *node)?;
        min_eig = min_eig.min(e.min_eigenvalue);
        mismatch = mismatch.max(e.closed_form_mismatch);
    }
    report.residuals.push(Residual::info("expansivity_min_eigenvalue", min_eig));
    report.residuals.push(Residual::info("expansivity_closed_form", mismatch));
    report.probes = Probes::new(&lambdas, &nodes);
    report.result = json!({ "n": v.n(), "m": v.m(), "step": rep.step, "right_half_plane": right.iter().map(|z| entry(*z)).collect::<Vec<_>>() });
    Ok(())
}

pub fn synthesize(req: &Request, path: &Path, report: &mut Report) -> Result<VesselDocument, CliError> {
    let doc: SpectralDocument = parse(&path.display().to_string(), &read_text(path)?)?;
    check_optional_version(&doc.schema_version)?;
    if doc.data.is_empty() {
        return Err(CliError::Input("data list is empty".into()));
    }
    let g = &doc.grid;
    let n_steps = g.n_steps.unwrap_or_else(|| req.config.steps_for(g.t_end - g.t_start));
    let grid = crate::schema::GridDoc { t_start: g.t_start, t_end: g.t_end, n_steps }.to_grid()?;
    let s1 = doc.sigma1.to_family("sigma1", grid)?;
    let s2 = doc.sigma2.to_family("sigma2", grid)?;
    let g0 = doc.gamma0.to_family("gamma0", grid)?;
    let data = doc
        .data
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let z = crate::schema::complex(&d.z);
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(CliError::Input(format!("data[{i}].z is not finite")));
            }
            let mut e = ElementaryData::new(z, vector(&format!("data[{i}].b0"), &d.b0)?);
            e.theta = d.theta.clone();
            Ok(e)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let syn = build_discrete(&data, &s1, &s2, &g0)?;
    let rep = verify_vessel(&syn.vessel, req.config.tol, req.exec)?;
    report.residuals = condition_rows(&rep);
    Ok(VesselDocument::from_vessel(&syn.vessel))
}

fn triple_from(doc: &NullPoleDocument) -> Result<NullPoleTriple, CliError> {
    check_optional_version(&doc.schema_version)?;
    let grid = doc.grid.to_grid()?;
    let a_pi = matrix("a_pi", &doc.a_pi)?;
    let a_xi = matrix("a_xi", &doc.a_xi)?;
    let s1 = doc.sigma1.to_family("sigma1", grid)?;
    let s2 = doc.sigma2.to_family("sigma2", grid)?;
    let gs = doc.gamma_star.to_family("gamma_star", grid)?;
    match (&doc.c, &doc.bn, &doc.x) {
        (MatrixOrFamily::Matrix(c), MatrixOrFamily::Matrix(bn), MatrixOrFamily::Matrix(x)) => Ok(evolve_coupling(
            &a_pi,
            &a_xi,
            &matrix("x", x)?,
            &matrix("c", c)?,
            &matrix("bn", bn)?,
            &s1,
            &s2,
            &gs,
        )?),
        (MatrixOrFamily::Family(_), MatrixOrFamily::Family(_), MatrixOrFamily::Family(_)) => Ok(NullPoleTriple {
            c: doc.c.to_family("c", grid)?,
            a_pi,
            a_xi,
            bn: doc.bn.to_family("bn", grid)?,
            x: doc.x.to_family("x", grid)?,
            sigma1: s1,
            sigma2: s2,
            gamma_star: gs,
        }),
        _ => Err(CliError::Input("c, bn and x must all be initial matrices or all be node lists".into())),
    }
}

pub fn realize(req: &Request, path: &Path, report: &mut Report) -> Result<(), CliError> {
    let doc: NullPoleDocument = parse(&path.display().to_string(), &read_text(path)?)?;
    let triple = triple_from(&doc)?;
    let grid = *triple.grid();
    let rz = zero_pole_realize(&triple, req.exec)?;
    let lambdas = if req.lambdas.is_empty() {
        let eig = vesselkit::matrix_kernel::eigenvalues(&triple.a_pi);
        let radius = probe_radius(&eig);
        probe_lambdas(req.config.seed, req.config.probes, radius, &eig, 0.1 * radius)
    } else {
        req.lambdas.to_vec()
    };
    let tau = check_node(req.node.unwrap_or(0), &grid)?;
    let mut pde = 0.0f64;
    let mut intertwining = 0.0f64;
    for lam in &lambdas {
        pde = pde.max(rz.transfer_pde_residual(*lam, req.exec)?);
        intertwining = intertwining.max(rz.intertwining_residual(*lam, tau, req.exec)?);
    }
    report.residuals.push(Residual::info("sylvester", max_f64(triple.sylvester_defects())));
    report.residuals.push(Residual::info("transfer_pde", pde));
    report.residuals.push(Residual::info("intertwining", intertwining).at_node(tau));
    report.residuals.push(Residual::info("conservative_defect", rz.conservative_defect));
    let vessel = match &rz.vessel {
        Ok(v) => {
            let rep = verify_vessel(v, req.config.tol, req.exec)?;
            report.residuals.extend(condition_rows(&rep));
            serde_json::to_value(VesselDocument::from_vessel(v)).map_err(|e| CliError::Input(e.to_string()))?
        }
        Err(e) => {
            eprintln!("no conservative vessel: {e}");
            Value::Null
        }
    };
    report.probes = Probes::new(&lambdas, &[tau]);
    report.result = json!({
        "min_singular_value_x": rz.min_sigma_x,
        "gamma": family_rows(&rz.gamma),
        "vessel": vessel,
        "vessel_error": rz.vessel.as_ref().err().map(|e| e.to_string()),
        "triple": serde_json::to_value(NullPoleDocument::from_triple(&triple)).map_err(|e| CliError::Input(e.to_string()))?,
    });
    Ok(())
}

pub fn factor(req: &Request, v: &DifferentialVessel, z: Complex64, report: &mut Report) -> Result<(), CliError> {
    let node = check_node(req.node.unwrap_or(0), v.grid())?;
    let ex = extract_elementary(v, z, node)?;
    let lambdas = lambdas_for(req, v);
    let nodes = probe_nodes(req.config.seed, lambdas.len(), v.grid().len());
    let mut mismatch = 0.0f64;
    for (lam, k) in lambdas.iter().zip(&nodes) {
        let fact = ex.factor.transfer(*lam, *k)?;
        let product = match &ex.quotient {
            Some(q) => q.transfer(*lam, *k)? * fact,
            None => fact,
        };
        mismatch = mismatch.max((product - v.transfer(*lam, *k)?).norm());
    }
    report.residuals.push(Residual::checked("factorization", mismatch, req.config.tol));
    report.probes = Probes::new(&lambdas, &nodes);
    let to_value = |d: &DifferentialVessel| {
        serde_json::to_value(VesselDocument::from_vessel(d)).map_err(|e| CliError::Input(e.to_string()))
    };
    report.result = json!({
        "z": entry(ex.z),
        "factor": to_value(&ex.factor)?,
        "quotient": ex.quotient.as_ref().map(to_value).transpose()?,
    });
    Ok(())
}

pub fn simulate_cmd(
    req: &Request,
    v: &DifferentialVessel,
    u0: &[Complex64],
    report: &mut Report,
) -> Result<(), CliError> {
    let lambda = req.lambdas.first().copied().unwrap_or(Complex64::new(1.0, 0.0));
    let u0 = if u0.is_empty() {
        let mut e = DVector::zeros(v.m());
        e[0] = Complex64::new(1.0, 0.0);
        e
    } else if u0.len() == v.m() {
        DVector::from_column_slice(u0)
    } else {
        return Err(CliError::Input(format!("--u0 has {} components, m = {}", u0.len(), v.m())));
    };
    let tr = simulate(v, lambda, &u0)?;
    let scale = 1.0 + max_f64(tr.u.iter().chain(&tr.y).map(|w| w.norm_squared()));
    report.residuals.push(Residual::checked("energy_t1", tr.max_defect_t1(), req.config.tol * scale));
    report.residuals.push(Residual::info("energy_t2", tr.max_defect_t2()));
    report.probes = Probes::new(&[lambda], &[]);
    let vecs = |w: &[DVector<Complex64>]| w.iter().map(vector_entries).collect::<Vec<_>>();
    report.result = json!({
        "lambda": entry(lambda),
        "t": v.grid().nodes(),
        "u": vecs(&tr.u),
        "x": vecs(&tr.x),
        "y": vecs(&tr.y),
        "energy_defect_t1": tr.energy_defect_t1,
        "energy_defect_t2": tr.energy_defect_t2,
    });
    Ok(())
}

pub fn transfer(req: &Request, v: &DifferentialVessel, report: &mut Report) -> Result<(), CliError> {
    let lambdas = lambdas_for(req, v);
    let nodes: Vec<usize> = match req.node {
        Some(k) => vec![check_node(k, v.grid())?; lambdas.len()],
        None => vec![0; lambdas.len()],
    };
    let points: Vec<(Complex64, usize)> = lambdas.iter().copied().zip(nodes.iter().copied()).collect();
    let values = v.transfer_sweep(&points, req.exec)?;
    report.probes = Probes::new(&lambdas, &nodes);
    report.result = Value::Array(
        points
            .iter()
            .zip(&values)
            .map(|((lam, k), s)| json!({ "lambda": entry(*lam), "node": k, "S": rows(s) }))
            .collect(),
    );
    Ok(())
}

pub fn fundamental(
    req: &Request,
    v: &DifferentialVessel,
    output_side: bool,
    report: &mut Report,
) -> Result<(), CliError> {
    let tau = check_node(req.node.unwrap_or(0), v.grid())?;
    let lambdas = if req.lambdas.is_empty() { vec![Complex64::new(1.0, 0.0)] } else { req.lambdas.to_vec() };
    let mut out = Vec::with_capacity(lambdas.len());
    for lam in &lambdas {
        let phi = if output_side { v.output_fundamental(*lam, tau)? } else { v.input_fundamental(*lam, tau)? };
        out.push(json!({ "lambda": entry(*lam), "values": family_rows(&phi) }));
    }
    report.probes = Probes::new(&lambdas, &[tau]);
    report.result = json!({ "side": if output_side { "output" } else { "input" }, "tau": tau, "fundamental": out });
    Ok(())
}

pub fn multint(req: &Request, path: &Path, report: &mut Report) -> Result<(), CliError> {
    let doc: MultIntDocument = parse(&path.display().to_string(), &read_text(path)?)?;
    check_optional_version(&doc.schema_version)?;
    let s_grid = doc.s_grid.to_grid()?;
    let k: OperatorFamily = doc.k.to_family("k", s_grid)?;
    let c = match &doc.c {
        ScalarOrList::Scalar(c) => vec![*c; s_grid.len()],
        ScalarOrList::List(c) => c.clone(),
    };
    if c.iter().any(|x| !x.is_finite()) {
        return Err(CliError::Input("c contains a non-finite number".into()));
    }
    let upper = doc.upper.unwrap_or(s_grid.n_steps);
    let lambdas = if req.lambdas.is_empty() { vec![Complex64::new(1.0, 0.0)] } else { req.lambdas.to_vec() };
    let mut out = Vec::with_capacity(lambdas.len());
    for lam in &lambdas {
        let w = mult_integral(k.nodes(), &c, &s_grid, *lam, upper)?;
        out.push(json!({ "lambda": entry(*lam), "W": rows(&w) }));
    }
    report.probes = Probes::new(&lambdas, &[]);
    report.result = json!({ "upper": upper, "products": out });
    Ok(())
}

pub fn couple_cmd(
    req: &Request,
    first: &DifferentialVessel,
    second: &DifferentialVessel,
    report: &mut Report,
) -> Result<VesselDocument, CliError> {
    let c = couple(first, second)?;
    let lambdas = lambdas_for(req, &c);
    let nodes = probe_nodes(req.config.seed, lambdas.len(), c.grid().len());
    let mut mismatch = 0.0f64;
    for (lam, k) in lambdas.iter().zip(&nodes) {
        let d = c.transfer(*lam, *k)? - second.transfer(*lam, *k)? * first.transfer(*lam, *k)?;
        mismatch = mismatch.max(d.norm());
    }
    report.residuals.push(Residual::checked("multiplicativity", mismatch, req.config.tol));
    report.probes = Probes::new(&lambdas, &nodes);
    Ok(VesselDocument::from_vessel(&c))
}

pub fn gauge(
    req: &Request,
    first: &DifferentialVessel,
    second: &DifferentialVessel,
    report: &mut Report,
) -> Result<(), CliError> {
    let map = gauge_equivalence(first, second, req.config.probes, req.config.seed, req.exec)?;
    report.residuals.push(Residual::checked("unitarity", map.unitarity_defect, req.config.tol));
    report.residuals.push(Residual::checked("transfer_agreement", map.transfer_mismatch, req.config.tol));
    report.residuals.push(Residual::info("a2_mismatch", map.a2_mismatch));
    report.result = json!({ "U": family_rows(&map.u) });
    Ok(())
}
