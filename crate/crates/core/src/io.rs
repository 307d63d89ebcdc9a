//! JSON formats for instances and certificates.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::apps::{UncertainLinearSystem, WeightedGraph};
use crate::cube::{Certificate, FullPath, MatrixCubeInstance, VerifyReport};
use crate::error::{Error, Result};
use crate::mpoly::{GramForm, MatrixPoly, MultiExponent};
use crate::numerics::SymMatrix;

pub const CERT_FORMAT_VERSION: u32 = 1;
/// Input matrices may be asymmetric by at most this much relative to their scale.
pub const ASYMMETRY_TOL: f64 = 1e-9;

/// A matrix given as nested rows or as a flat row-major array.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum MatrixInput {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl MatrixInput {
    fn to_dense(&self, n: usize, what: &str) -> Result<DMatrix<f64>> {
        match self {
            MatrixInput::Rows(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Dimension(format!("{what} must be {n}x{n}")));
                }
                Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
            MatrixInput::Flat(v) => {
                if v.len() != n * n {
                    return Err(Error::Dimension(format!("{what} needs {} entries, got {}", n * n, v.len())));
                }
                Ok(DMatrix::from_row_slice(n, n, v))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Cube,
    System,
    Graph,
    Bqp,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    kind: Kind,
    #[serde(alias = "nodes")]
    n: Option<usize>,
    m: Option<usize>,
    radius: Option<f64>,
    #[serde(default)]
    matrices: Vec<MatrixInput>,
    /// Graph edges `[i, j, w]` with 1-based endpoints.
    edges: Option<Vec<(usize, usize, f64)>>,
}

#[derive(Debug, Clone)]
pub enum Instance {
    Cube(MatrixCubeInstance),
    System(UncertainLinearSystem),
    Graph(WeightedGraph),
    Bqp(SymMatrix),
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self {
            Instance::Cube(_) => "cube",
            Instance::System(_) => "system",
            Instance::Graph(_) => "graph",
            Instance::Bqp(_) => "bqp",
        }
    }
}

fn symmetric(a: DMatrix<f64>, what: &str) -> Result<SymMatrix> {
    SymMatrix::try_from_matrix(a, ASYMMETRY_TOL).map_err(|e| Error::InvalidInput(format!("{what}: {e}")))
}

fn need(v: Option<usize>, what: &str) -> Result<usize> {
    v.ok_or_else(|| Error::InvalidInput(format!("missing field `{what}`")))
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let f: InstanceFile = serde_json::from_str(text)?;
    if f.radius.is_some() && f.kind != Kind::Cube {
        return Err(Error::InvalidInput("`radius` only applies to cube instances".into()));
    }
    match f.kind {
        Kind::Cube | Kind::System => {
            let n = need(f.n, "n")?;
            let m = need(f.m, "m")?;
            if f.matrices.len() != m + 1 {
                return Err(Error::InvalidInput(format!("expected m + 1 = {} matrices, got {}", m + 1, f.matrices.len())));
            }
            if n == 0 {
                return Err(Error::InvalidInput("n must be positive".into()));
            }
            let dense = f
                .matrices
                .iter()
                .enumerate()
                .map(|(i, a)| a.to_dense(n, &format!("matrix {i}")))
                .collect::<Result<Vec<_>>>()?;
            if f.kind == Kind::System {
                return Ok(Instance::System(UncertainLinearSystem::new(dense)?));
            }
            let h = dense
                .into_iter()
                .enumerate()
                .map(|(i, a)| symmetric(a, &format!("H_{i}")))
                .collect::<Result<Vec<_>>>()?;
            Ok(Instance::Cube(MatrixCubeInstance::new(h, f.radius.unwrap_or(1.0))?))
        }
        Kind::Graph => {
            let n = need(f.n, "n")?;
            let edges = f.edges.ok_or_else(|| Error::InvalidInput("missing field `edges`".into()))?;
            let mut e = Vec::with_capacity(edges.len());
            for (i, j, w) in edges {
                if i == 0 || j == 0 {
                    return Err(Error::InvalidInput(format!("edge ({i}, {j}): endpoints are 1-based")));
                }
                e.push((i - 1, j - 1, w));
            }
            Ok(Instance::Graph(WeightedGraph::new(n, e)?))
        }
        Kind::Bqp => {
            let n = need(f.n, "n")?;
            let [a] = f.matrices.as_slice() else {
                return Err(Error::InvalidInput("bqp instances take exactly one matrix".into()));
            };
            Ok(Instance::Bqp(symmetric(a.to_dense(n, "A")?, "A")?))
        }
    }
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn from_sym(a: &SymMatrix) -> Self {
        Self { rows: a.dim(), cols: a.dim(), data: a.to_row_major() }
    }

    pub fn to_sym(&self, what: &str) -> Result<SymMatrix> {
        if self.rows != self.cols || self.data.len() != self.rows * self.cols {
            return Err(Error::Dimension(format!("{what}: {}x{} with {} entries", self.rows, self.cols, self.data.len())));
        }
        symmetric(DMatrix::from_row_slice(self.rows, self.cols, &self.data), what)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub exponent: Vec<u32>,
    pub coeff: MatrixJson,
}

/// On-disk certificate. The summary fields are informational; a reader
/// re-verifies from the matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub format_version: u32,
    pub variant: String,
    pub n: usize,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<FullPath>,
    /// Exponents indexing the blocks of the Gram matrix `L` or `N`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub basis: Vec<Vec<u32>>,
    pub matrices: BTreeMap<String, MatrixJson>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub polynomials: BTreeMap<String, Vec<TermJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub psd_margins: Vec<f64>,
}

fn poly_json(p: &MatrixPoly) -> Vec<TermJson> {
    p.terms()
        .map(|(a, c)| TermJson { exponent: a.as_slice().to_vec(), coeff: MatrixJson::from_sym(c) })
        .collect()
}

fn poly_from_json(terms: &[TermJson], n: usize, m: usize, what: &str) -> Result<MatrixPoly> {
    let mut p = MatrixPoly::zero(n, m);
    for t in terms {
        if t.exponent.len() != m {
            return Err(Error::Dimension(format!("{what}: exponent {:?} has length != {m}", t.exponent)));
        }
        let c = t.coeff.to_sym(what)?;
        if c.dim() != n {
            return Err(Error::Dimension(format!("{what}: coefficient of dimension {}, expected {n}", c.dim())));
        }
        p.add_term(MultiExponent::new(t.exponent.clone()), &c);
    }
    Ok(p)
}

pub fn certificate_to_file(cert: &Certificate, n: usize, m: usize, report: Option<&VerifyReport>) -> CertificateFile {
    let mut matrices = BTreeMap::new();
    let mut polynomials = BTreeMap::new();
    let mut basis = Vec::new();
    let mut path = None;
    let named = |prefix: &str, k: usize| format!("{prefix}{k}");
    match cert {
        Certificate::BenTal { x } => {
            for (i, xi) in x.iter().enumerate() {
                matrices.insert(named("X", i + 1), MatrixJson::from_sym(xi));
            }
        }
        Certificate::Quadratic { x, gram } => {
            for (i, xi) in x.iter().enumerate() {
                matrices.insert(named("X", i + 1), MatrixJson::from_sym(xi));
            }
            matrices.insert("L".into(), MatrixJson::from_sym(gram));
            basis = crate::cube::quad_basis(m).iter().map(|a| a.as_slice().to_vec()).collect();
        }
        Certificate::Full { s0, s, path: p } => {
            matrices.insert("N".into(), MatrixJson::from_sym(&s0.gram));
            basis = s0.basis.iter().map(|a| a.as_slice().to_vec()).collect();
            for (i, si) in s.iter().enumerate() {
                polynomials.insert(named("S", i + 1), poly_json(si));
            }
            path = Some(*p);
        }
        Certificate::Simplex { s } => {
            for (i, si) in s.iter().enumerate() {
                matrices.insert(named("S", i), MatrixJson::from_sym(si));
            }
        }
    }
    CertificateFile {
        format_version: CERT_FORMAT_VERSION,
        variant: cert.variant_name().into(),
        n,
        m,
        path,
        basis,
        matrices,
        polynomials,
        residual: report.map(|r| r.residual),
        psd_margins: report.map_or_else(Vec::new, |r| r.psd_margins.clone()),
    }
}

pub fn certificate_from_file(f: &CertificateFile) -> Result<Certificate> {
    if f.format_version != CERT_FORMAT_VERSION {
        return Err(Error::InvalidInput(format!("unsupported certificate format_version {}", f.format_version)));
    }
    let (n, m) = (f.n, f.m);
    let get = |name: String| -> Result<SymMatrix> {
        let a = f.matrices.get(&name).ok_or_else(|| Error::InvalidInput(format!("certificate lacks matrix {name}")))?;
        a.to_sym(&name)
    };
    let series = |prefix: &str, from: usize, to: usize| -> Result<Vec<SymMatrix>> {
        (from..=to).map(|k| get(format!("{prefix}{k}"))).collect()
    };
    let cert = match f.variant.as_str() {
        "bental" => Certificate::BenTal { x: series("X", 1, m)? },
        "quadratic" => Certificate::Quadratic { x: series("X", 1, m)?, gram: get("L".into())? },
        "full" => {
            let basis = f.basis.iter().map(|a| MultiExponent::new(a.clone())).collect();
            let s0 = GramForm::new(basis, get("N".into())?)?;
            let s = (1..=m)
                .map(|k| {
                    let name = format!("S{k}");
                    let terms = f.polynomials.get(&name).ok_or_else(|| Error::InvalidInput(format!("certificate lacks polynomial {name}")))?;
                    poly_from_json(terms, n, m, &name)
                })
                .collect::<Result<Vec<_>>>()?;
            let path = f.path.ok_or_else(|| Error::InvalidInput("full certificate lacks `path`".into()))?;
            Certificate::Full { s0, s, path }
        }
        "simplex" => Certificate::Simplex { s: series("S", 0, m + 1)? },
        other => return Err(Error::InvalidInput(format!("unknown certificate variant `{other}`"))),
    };
    Ok(cert)
}

pub fn certificate_json(f: &CertificateFile) -> Result<String> {
    Ok(serde_json::to_string_pretty(f)?)
}

pub fn parse_certificate_file(text: &str) -> Result<CertificateFile> {
    Ok(serde_json::from_str(text)?)
}

pub fn write_certificate(path: &Path, cert: &Certificate, n: usize, m: usize, report: Option<&VerifyReport>) -> Result<()> {
    let text = certificate_json(&certificate_to_file(cert, n, m, report))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_certificate(path: &Path) -> Result<Certificate> {
    certificate_from_file(&parse_certificate_file(&std::fs::read_to_string(path)?)?)
}
