//! Machine-readable output of a run.
//!
//! JSON layout (stable keys):
//!
//! ```text
//! meta          { n, effective_rank, basis, domain[2], total_measure, integral_f,
//!                 integral_g, epsilon, samples, source, seed, rho, residuals{} }
//! quadrature_f  { nodes[], weights[], amplitudes[], alpha[][] }
//! quadrature_g  { ... }                       (absent without a g column)
//! joint         [ { kind, normalization, total, residual, marginal_residual,
//!                   negative_entries, matrix[][], row_nodes[], col_nodes[],
//!                   row_sums[], col_sums[] } ]
//! ```
//!
//! `alpha[i]` holds the basis coefficients of eigenvector `i`. Every float is printed
//! with 17 significant digits, so re-reading a report reproduces the exact values.

use std::collections::BTreeMap;
use std::io;

use nalgebra::DMatrix;
use serde::ser::Serialize;
use serde::{Deserialize, Serialize as SerializeDerive};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::basis::{BasisSpec, DomainMap, Family};
use crate::error::{Error, Result};
use crate::joint::JointDistributionMatrix;
use crate::moments::{GramSet, Process};
use crate::spectral::{EigenSolution, LebesgueQuadrature};

#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
pub struct Meta {
    pub n: usize,
    pub effective_rank: usize,
    pub basis: Family,
    pub domain: [f64; 2],
    pub total_measure: f64,
    pub integral_f: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integral_g: Option<f64>,
    pub epsilon: f64,
    pub samples: usize,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<String>,
    pub residuals: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
pub struct QuadratureReport {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
}

impl QuadratureReport {
    pub fn from_quadrature(q: &LebesgueQuadrature) -> Self {
        let c = &q.solution.coefficients;
        Self {
            nodes: q.nodes.clone(),
            weights: q.weights.clone(),
            amplitudes: q.amplitudes.clone(),
            alpha: c.column_iter().map(|col| col.iter().copied().collect()).collect(),
        }
    }

    /// Rebuilds a quadrature from stored coefficients against the Grams of the same data.
    pub fn to_quadrature(&self, grams: &GramSet, which: Process) -> Result<LebesgueQuadrature> {
        let r = self.alpha.len();
        if r != self.nodes.len() || self.alpha.iter().any(|a| a.len() != grams.order) {
            return Err(Error::Dimension(format!(
                "stored coefficients do not form an {}x{} matrix",
                grams.order,
                self.nodes.len()
            )));
        }
        let coefficients = DMatrix::from_fn(grams.order, r, |k, i| self.alpha[i][k]);
        let solution = EigenSolution {
            eigenvalues: self.nodes.clone(),
            coefficients,
            effective_rank: r,
        };
        LebesgueQuadrature::from_solution(solution, grams, which)
    }
}

#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
pub struct JointReport {
    pub kind: String,
    pub normalization: f64,
    pub total: f64,
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal_residual: Option<f64>,
    pub negative_entries: usize,
    pub matrix: Vec<Vec<f64>>,
    pub row_nodes: Vec<f64>,
    pub col_nodes: Vec<f64>,
    pub row_sums: Vec<f64>,
    pub col_sums: Vec<f64>,
}

impl JointReport {
    pub fn from_joint(j: &JointDistributionMatrix) -> Self {
        Self {
            kind: j.kind.name().to_string(),
            normalization: j.normalization,
            total: j.total(),
            residual: j.residual(),
            marginal_residual: j.marginal_residual(),
            negative_entries: j.negative_entries(),
            matrix: matrix_rows(&j.matrix),
            row_nodes: j.row_nodes.clone(),
            col_nodes: j.col_nodes.clone(),
            row_sums: j.row_sums(),
            col_sums: j.col_sums(),
        }
    }
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
pub struct Report {
    pub meta: Meta,
    pub quadrature_f: QuadratureReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_g: Option<QuadratureReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub joint: Vec<JointReport>,
}

impl Report {
    pub fn basis(&self) -> Result<BasisSpec> {
        BasisSpec::new(
            self.meta.basis,
            self.meta.n,
            DomainMap::new(self.meta.domain[0], self.meta.domain[1])?,
        )
    }

    pub fn to_json(&self) -> String {
        let mut buf = Vec::new();
        let mut ser =
            serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::with_indent(b"  ")));
        self.serialize(&mut ser)
            .expect("report serialization is infallible");
        buf.push(b'\n');
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("malformed report JSON: {e}")))
    }

    /// Long-form CSV: `record,name,row,col,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("record,name,row,col,value\n");
        let mut push = |record: &str, name: &str, row: Option<usize>, col: Option<usize>, value: f64| {
            let r = row.map_or(String::new(), |v| v.to_string());
            let c = col.map_or(String::new(), |v| v.to_string());
            out.push_str(&format!("{record},{name},{r},{c},{value:.16e}\n"));
        };
        let m = &self.meta;
        push("meta", "n", None, None, m.n as f64);
        push("meta", "effective_rank", None, None, m.effective_rank as f64);
        push("meta", "domain_min", None, None, m.domain[0]);
        push("meta", "domain_max", None, None, m.domain[1]);
        push("meta", "total_measure", None, None, m.total_measure);
        push("meta", "integral_f", None, None, m.integral_f);
        if let Some(v) = m.integral_g {
            push("meta", "integral_g", None, None, v);
        }
        push("meta", "epsilon", None, None, m.epsilon);
        for (k, v) in &m.residuals {
            push("residual", k, None, None, *v);
        }
        let quads = [("f", Some(&self.quadrature_f)), ("g", self.quadrature_g.as_ref())];
        for (name, q) in quads {
            let Some(q) = q else { continue };
            for i in 0..q.nodes.len() {
                push("node", name, Some(i), None, q.nodes[i]);
                push("weight", name, Some(i), None, q.weights[i]);
                push("amplitude", name, Some(i), None, q.amplitudes[i]);
                for (k, &a) in q.alpha[i].iter().enumerate() {
                    push("alpha", name, Some(i), Some(k), a);
                }
            }
        }
        for j in &self.joint {
            push("normalization", &j.kind, None, None, j.normalization);
            push("residual", &j.kind, None, None, j.residual);
            for (r, row) in j.matrix.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    push("joint", &j.kind, Some(r), Some(c), v);
                }
            }
        }
        out
    }
}

/// Pretty JSON with every `f64` written as `d.dddddddddddddddde±x`.
struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}
