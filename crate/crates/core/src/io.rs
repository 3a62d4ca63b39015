//! Input files: sampled data as CSV and spectral density matrices.

use std::io::Read;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::joint::DensityMatrix;
use crate::moments::SampleSet;

/// Reads `x,w,f,g` CSV. `w` (default 1) and `g` are optional, columns may come in any
/// order, `#` lines are comments. Every error names the offending line.
pub fn read_samples<R: Read>(reader: R) -> Result<SampleSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Input(format!("cannot read CSV header: {e}")))?
        .clone();
    let mut cols = [None; 4];
    for (i, h) in headers.iter().enumerate() {
        let slot = match h {
            "x" => 0,
            "w" => 1,
            "f" => 2,
            "g" => 3,
            other => {
                return Err(Error::Input(format!(
                    "unknown CSV column `{other}` (expected x,w,f,g)"
                )))
            }
        };
        if cols[slot].replace(i).is_some() {
            return Err(Error::Input(format!("duplicate CSV column `{h}`")));
        }
    }
    let (Some(xi), Some(fi)) = (cols[0], cols[2]) else {
        return Err(Error::Input(
            "CSV header must name at least the `x` and `f` columns".into(),
        ));
    };
    let (wi, gi) = (cols[1], cols[3]);

    let mut x = Vec::new();
    let mut w = Vec::new();
    let mut f = Vec::new();
    let mut g = gi.map(|_| Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Input(format!("line {line}: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |idx: usize, name: &str| -> Result<f64> {
            let raw = rec.get(idx).unwrap_or("");
            if raw.is_empty() {
                return Err(Error::Input(format!("line {line}: missing value for `{name}`")));
            }
            let v: f64 = raw.parse().map_err(|_| {
                Error::Input(format!("line {line}: `{raw}` is not a number in column `{name}`"))
            })?;
            if !v.is_finite() {
                return Err(Error::Input(format!(
                    "line {line}: non-finite value in column `{name}`"
                )));
            }
            Ok(v)
        };
        let wv = match wi {
            Some(i) => field(i, "w")?,
            None => 1.0,
        };
        if wv < 0.0 {
            return Err(Error::Input(format!(
                "line {line}: negative measure weight w = {wv}"
            )));
        }
        x.push(field(xi, "x")?);
        w.push(wv);
        f.push(field(fi, "f")?);
        if let (Some(gv), Some(i)) = (g.as_mut(), gi) {
            gv.push(field(i, "g")?);
        }
    }
    SampleSet::new(x, w, f, g)
}

/// Writes samples in the CSV layout accepted by [`read_samples`].
pub fn write_samples(samples: &SampleSet) -> String {
    let mut out = String::from(if samples.has_g() { "x,w,f,g\n" } else { "x,w,f\n" });
    for l in 0..samples.len() {
        let mut line = format!(
            "{:.16e},{:.16e},{:.16e}",
            samples.x()[l],
            samples.weights()[l],
            samples.f()[l]
        );
        if let Some(g) = samples.g() {
            line.push_str(&format!(",{:.16e}", g[l]));
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Parses a spectral density file: the order `n`, a line of `n` eigenvalues, then `n`
/// lines each holding one eigenvector's coefficients in the f-eigenbasis. Numbers are
/// separated by whitespace or commas; `#` starts a comment.
pub fn parse_spectral_density(text: &str) -> Result<DensityMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let numbers = |line_no: usize, l: &str| -> Result<Vec<f64>> {
        l.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Input(format!("density file line {line_no}: `{t}` is not a number")))
            })
            .collect()
    };
    let (ln, first) = lines
        .next()
        .ok_or_else(|| Error::Input("density file is empty".into()))?;
    let n: usize = first.parse().map_err(|_| {
        Error::Input(format!(
            "density file line {ln}: expected the order n, got `{first}`"
        ))
    })?;
    if n == 0 {
        return Err(Error::Input("density file order must be at least 1".into()));
    }
    let (ln, lam_line) = lines
        .next()
        .ok_or_else(|| Error::Dimension("density file has no eigenvalue line".into()))?;
    let eigenvalues = numbers(ln, lam_line)?;
    if eigenvalues.len() != n {
        return Err(Error::Dimension(format!(
            "density file line {ln}: expected {n} eigenvalues, found {}",
            eigenvalues.len()
        )));
    }
    let mut vectors = DMatrix::zeros(n, n);
    for col in 0..n {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| Error::Dimension(format!("density file has {col} eigenvectors, expected {n}")))?;
        let v = numbers(ln, l)?;
        if v.len() != n {
            return Err(Error::Dimension(format!(
                "density file line {ln}: expected {n} coefficients, found {}",
                v.len()
            )));
        }
        for (row, val) in v.into_iter().enumerate() {
            vectors[(row, col)] = val;
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::Dimension(format!(
            "density file line {ln}: unexpected trailing data"
        )));
    }
    DensityMatrix::from_spectral(&eigenvalues, &vectors)
}
