#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::json;
use vesselkit::fixtures::{
    blaschke_vessel, coupling_dataset, random_constant_vessel, random_unitary, rng, synthesized_vessel,
    trivial_vessel,
};
use vesselkit::matrix_kernel::zeros;
use vesselkit::vessel_core::gauge_transform;
use vesselkit::{c64, OperatorFamily, TimeGrid};
use vesselkit_cli::schema::{rows, to_json, GridDoc, VesselDocument};

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    corpus_dir().join(name)
}

fn vessel_text(v: &vesselkit::DifferentialVessel) -> String {
    to_json(&VesselDocument::from_vessel(v)).unwrap()
}

pub const BLASCHKE_Z: (f64, f64) = (-0.5, 1.3);

/// File name and contents of every corpus fixture.
pub fn corpus() -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    let grid = TimeGrid::new(0.0, 1.0, 20).unwrap();
    let constant = random_constant_vessel(&mut rng(1), grid, 2, 2);
    out.push(("constant.json", vessel_text(&constant)));

    let blaschke = blaschke_vessel(TimeGrid::new(0.0, 1.0, 10).unwrap(), c64(BLASCHKE_Z.0, BLASCHKE_Z.1));
    out.push(("blaschke.json", vessel_text(&blaschke)));

    let synth = synthesized_vessel(7, 3, 2, TimeGrid::new(0.0, 1.0, 60).unwrap());
    out.push(("synthesized.json", vessel_text(&synth)));
    out.push(("trivial_after_synthesized.json", vessel_text(&trivial_vessel(&synth))));

    let mut doc = VesselDocument::from_vessel(&synth);
    doc.b[7][0][0][0] += 1e-3;
    out.push(("perturbed_b.json", vessel_text(&doc.to_vessel().unwrap())));

    let u = OperatorFamily::constant(*synth.grid(), random_unitary(&mut rng(2), 3)).unwrap();
    out.push(("synthesized_gauged.json", vessel_text(&gauge_transform(&synth, &u).unwrap())));

    let mut doc = VesselDocument::from_vessel(&constant);
    for s in doc.sigma1.iter_mut() {
        *s = rows(&zeros(2, 2));
    }
    out.push(("singular_sigma1.json", to_json(&doc).unwrap()));

    let text = vessel_text(&constant);
    out.push(("malformed.json", text[..text.len() / 2].to_string()));

    let spectral = |data: serde_json::Value, s1: serde_json::Value| {
        let mut s = serde_json::to_string_pretty(&json!({
            "schema_version": "vesselkit/1",
            "grid": { "t_start": 0.0, "t_end": 1.0, "n_steps": 40 },
            "sigma1": s1,
            "sigma2": [[[0.5, 0.0], [0.1, 0.2]], [[0.1, -0.2], [-0.3, 0.0]]],
            "gamma0": [[[0.0, 0.3], [0.2, 0.1]], [[-0.2, 0.1], [0.0, -0.4]]],
            "data": data,
        }))
        .unwrap();
        s.push('\n');
        s
    };
    let pd = json!([[[2.0, 0.0], [0.5, 0.5]], [[0.5, -0.5], [1.0, 0.0]]]);
    // Re z = −b₀ᴴσ₁b₀/2 keeps the first colligation condition exact.
    let data = json!([
        { "z": [-1.0, -1.0], "b0": [[1.0, 0.0], [0.0, 0.0]] },
        { "z": [-0.5, 0.0], "b0": [[0.0, 0.0], [1.0, 0.0]] },
        { "z": [-2.0, 1.0], "b0": [[1.0, 0.0], [1.0, 0.0]] }
    ]);
    out.push(("spectral_three.json", spectral(data, pd.clone())));
    out.push(("spectral_empty.json", spectral(json!([]), pd)));
    let indefinite = json!([[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-1.0, 0.0]]]);
    let null = json!([{ "z": [-1.0, 0.0], "b0": [[1.0, 0.0], [1.0, 0.0]] }]);
    out.push(("spectral_degenerate.json", spectral(null, indefinite)));

    let (triple, _) = coupling_dataset(61, 2, 2, TimeGrid::new(0.0, 1.0, 200).unwrap());
    let mut s = serde_json::to_string_pretty(&json!({
        "schema_version": "vesselkit/1",
        "grid": GridDoc::from_grid(triple.grid()),
        "a_pi": rows(&triple.a_pi),
        "a_xi": rows(&triple.a_xi),
        "c": rows(triple.c.at(0)),
        "bn": rows(triple.bn.at(0)),
        "x": rows(triple.x.at(0)),
        "sigma1": rows(triple.sigma1.at(0)),
        "sigma2": rows(triple.sigma2.at(0)),
        "gamma_star": rows(triple.gamma_star.at(0)),
    }))
    .unwrap();
    s.push('\n');
    out.push(("null_pole.json", s));

    let mut s = serde_json::to_string_pretty(&json!({
        "schema_version": "vesselkit/1",
        "s_grid": { "t_start": 0.0, "t_end": 1.0, "n_steps": 1000 },
        "k": [[[0.0, 1.0]]],
        "c": 0.0,
    }))
    .unwrap();
    s.push('\n');
    out.push(("multint_constant.json", s));
    out
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn vesselkit(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_vesselkit"))
        .args(args)
        .env_remove("VESSELKIT_CONFIG")
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().expect("exited normally"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
