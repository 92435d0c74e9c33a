//! JSON documents. Matrices are row-major lists of rows, complex entries
//! are `[re, im]`. Floats are written in shortest round-trip form, so
//! `parse(write(x)) == x` bit for bit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use vesselkit::interpolation::NullPoleTriple;
use vesselkit::{Complex64, ComplexMatrix, DifferentialVessel, OperatorFamily, TimeGrid};

use crate::error::CliError;

pub const SCHEMA_VERSION: &str = "vesselkit/1";

pub type Entry = [f64; 2];
pub type Rows = Vec<Vec<Entry>>;

pub fn entry(z: Complex64) -> Entry {
    [z.re, z.im]
}

pub fn complex(e: &Entry) -> Complex64 {
    Complex64::new(e[0], e[1])
}

pub fn rows(m: &ComplexMatrix) -> Rows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| entry(m[(i, j)])).collect()).collect()
}

pub fn vector_entries(v: &DVector<Complex64>) -> Vec<Entry> {
    v.iter().map(|z| entry(*z)).collect()
}

fn check_finite(what: &str, values: impl IntoIterator<Item = f64>) -> Result<(), CliError> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(CliError::Input(format!("{what} contains a non-finite number")))
    }
}

pub fn matrix(what: &str, r: &Rows) -> Result<ComplexMatrix, CliError> {
    let nrows = r.len();
    let ncols = r.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(CliError::Input(format!("{what} is empty")));
    }
    if r.iter().any(|row| row.len() != ncols) {
        return Err(CliError::Input(format!("{what} has ragged rows")));
    }
    check_finite(what, r.iter().flatten().flat_map(|e| e.iter().copied()))?;
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| complex(&r[i][j])))
}

pub fn vector(what: &str, v: &[Entry]) -> Result<DVector<Complex64>, CliError> {
    check_finite(what, v.iter().flat_map(|e| e.iter().copied()))?;
    Ok(DVector::from_iterator(v.len(), v.iter().map(complex)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

impl GridDoc {
    pub fn from_grid(g: &TimeGrid) -> Self {
        GridDoc { t_start: g.t_start, t_end: g.t_end, n_steps: g.n_steps }
    }

    pub fn to_grid(self) -> Result<TimeGrid, CliError> {
        check_finite("grid", [self.t_start, self.t_end])?;
        Ok(TimeGrid::new(self.t_start, self.t_end, self.n_steps)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VesselDocument {
    pub schema_version: String,
    pub dims: Dims,
    pub grid: GridDoc,
    #[serde(rename = "A1")]
    pub a1: Vec<Rows>,
    #[serde(rename = "A2")]
    pub a2: Vec<Rows>,
    #[serde(rename = "B")]
    pub b: Vec<Rows>,
    pub sigma1: Vec<Rows>,
    pub sigma2: Vec<Rows>,
    pub gamma: Vec<Rows>,
    pub gamma_star: Vec<Rows>,
}

pub fn family_rows(f: &OperatorFamily) -> Vec<Rows> {
    f.nodes().iter().map(rows).collect()
}

pub fn family(what: &str, grid: TimeGrid, nodes: &[Rows], shape: (usize, usize)) -> Result<OperatorFamily, CliError> {
    if nodes.len() != grid.len() {
        return Err(CliError::Input(format!(
            "{what} has {} nodes, the grid has {}",
            nodes.len(),
            grid.len()
        )));
    }
    let mats = nodes
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let m = matrix(&format!("{what}[{i}]"), r)?;
            if m.shape() != shape {
                return Err(CliError::Input(format!("{what}[{i}] is {:?}, expected {:?}", m.shape(), shape)));
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OperatorFamily::new(grid, mats)?)
}

fn check_version(v: &str) -> Result<(), CliError> {
    if v == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(CliError::Input(format!("unsupported schema_version {v:?}")))
    }
}

impl VesselDocument {
    pub fn from_vessel(v: &DifferentialVessel) -> Self {
        VesselDocument {
            schema_version: SCHEMA_VERSION.into(),
            dims: Dims { n: v.n(), m: v.m() },
            grid: GridDoc::from_grid(v.grid()),
            a1: family_rows(v.a1()),
            a2: family_rows(v.a2()),
            b: family_rows(v.b()),
            sigma1: family_rows(v.sigma1()),
            sigma2: family_rows(v.sigma2()),
            gamma: family_rows(v.gamma()),
            gamma_star: family_rows(v.gamma_star()),
        }
    }

    pub fn to_vessel(&self) -> Result<DifferentialVessel, CliError> {
        check_version(&self.schema_version)?;
        let grid = self.grid.to_grid()?;
        let Dims { n, m } = self.dims;
        if n == 0 || m == 0 {
            return Err(CliError::Input("dims must be positive".into()));
        }
        Ok(DifferentialVessel::new(
            family("A1", grid, &self.a1, (n, n))?,
            family("A2", grid, &self.a2, (n, n))?,
            family("B", grid, &self.b, (n, m))?,
            family("sigma1", grid, &self.sigma1, (m, m))?,
            family("sigma2", grid, &self.sigma2, (m, m))?,
            family("gamma", grid, &self.gamma, (m, m))?,
            family("gamma_star", grid, &self.gamma_star, (m, m))?,
        )?)
    }
}

/// A constant matrix or one matrix per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixOrFamily {
    Matrix(Rows),
    Family(Vec<Rows>),
}

impl MatrixOrFamily {
    pub fn to_family(&self, what: &str, grid: TimeGrid) -> Result<OperatorFamily, CliError> {
        match self {
            MatrixOrFamily::Matrix(r) => Ok(OperatorFamily::constant(grid, matrix(what, r)?)?),
            MatrixOrFamily::Family(nodes) => {
                let first = nodes.first().ok_or_else(|| CliError::Input(format!("{what} is empty")))?;
                let shape = matrix(what, first)?.shape();
                family(what, grid, nodes, shape)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecGrid {
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default)]
    pub n_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumDoc {
    pub z: Entry,
    pub b0: Vec<Entry>,
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
}

/// Input of `synthesize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralDocument {
    #[serde(default)]
    pub schema_version: Option<String>,
    pub grid: SpecGrid,
    pub sigma1: MatrixOrFamily,
    pub sigma2: MatrixOrFamily,
    pub gamma0: MatrixOrFamily,
    pub data: Vec<DatumDoc>,
}

/// Input of `realize`. When `c`, `bn` and `x` are single matrices they are
/// initial values and the data are evolved along the grid first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullPoleDocument {
    #[serde(default)]
    pub schema_version: Option<String>,
    pub grid: GridDoc,
    pub a_pi: Rows,
    pub a_xi: Rows,
    pub c: MatrixOrFamily,
    pub bn: MatrixOrFamily,
    pub x: MatrixOrFamily,
    pub sigma1: MatrixOrFamily,
    pub sigma2: MatrixOrFamily,
    pub gamma_star: MatrixOrFamily,
}

impl NullPoleDocument {
    pub fn from_triple(t: &NullPoleTriple) -> Self {
        NullPoleDocument {
            schema_version: Some(SCHEMA_VERSION.into()),
            grid: GridDoc::from_grid(t.grid()),
            a_pi: rows(&t.a_pi),
            a_xi: rows(&t.a_xi),
            c: MatrixOrFamily::Family(family_rows(&t.c)),
            bn: MatrixOrFamily::Family(family_rows(&t.bn)),
            x: MatrixOrFamily::Family(family_rows(&t.x)),
            sigma1: MatrixOrFamily::Family(family_rows(&t.sigma1)),
            sigma2: MatrixOrFamily::Family(family_rows(&t.sigma2)),
            gamma_star: MatrixOrFamily::Family(family_rows(&t.gamma_star)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrList {
    Scalar(f64),
    List(Vec<f64>),
}

/// Input of `multint`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultIntDocument {
    #[serde(default)]
    pub schema_version: Option<String>,
    pub s_grid: GridDoc,
    pub k: MatrixOrFamily,
    pub c: ScalarOrList,
    #[serde(default)]
    pub upper: Option<usize>,
}

pub fn check_optional_version(v: &Option<String>) -> Result<(), CliError> {
    v.as_deref().map_or(Ok(()), check_version)
}

pub fn parse<T: serde::de::DeserializeOwned>(what: &str, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Input(format!("{what}: {e}")))
}

pub fn to_json<T: Serialize>(doc: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(doc).map_err(|e| CliError::Input(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
