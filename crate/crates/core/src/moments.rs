//! Sample ingestion and the Gram/moment matrices that define the eigenproblems.
//!
//! Two routes produce a [`GramSet`]: direct sample sums ([`accumulate_grams`]) and the
//! moment route ([`moments_from_samples`] followed by [`grams_from_moments`]), which
//! expands each product `Q_j Q_k` through the basis multiplication operator.

use nalgebra::{DMatrix, DVector};

use crate::basis::BasisSpec;
use crate::error::{Error, Result};

/// Weighted observations `(x_l, w_l, f_l, g_l)` defining the measure and two processes.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    x: Vec<f64>,
    w: Vec<f64>,
    f: Vec<f64>,
    g: Option<Vec<f64>>,
}

impl SampleSet {
    /// Validates and stores the columns. Errors name the offending record (1-based).
    pub fn new(x: Vec<f64>, w: Vec<f64>, f: Vec<f64>, g: Option<Vec<f64>>) -> Result<Self> {
        let m = x.len();
        if m == 0 {
            return Err(Error::Input("sample set is empty".into()));
        }
        if w.len() != m || f.len() != m || g.as_ref().is_some_and(|g| g.len() != m) {
            return Err(Error::Input(format!(
                "column lengths disagree: x={}, w={}, f={}, g={}",
                m,
                w.len(),
                f.len(),
                g.as_ref().map_or(m, Vec::len)
            )));
        }
        for l in 0..m {
            let record = l + 1;
            let g_l = g.as_ref().map(|g| g[l]);
            let fields = [
                ("x", Some(x[l])),
                ("w", Some(w[l])),
                ("f", Some(f[l])),
                ("g", g_l),
            ];
            for (name, value) in fields {
                if let Some(v) = value {
                    if !v.is_finite() {
                        return Err(Error::Input(format!(
                            "record {record}: {name} = {v} is not finite"
                        )));
                    }
                }
            }
            if w[l] < 0.0 {
                return Err(Error::Input(format!(
                    "record {record}: negative measure weight w = {}",
                    w[l]
                )));
            }
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::Input(format!(
                "total measure must be positive and finite, got {total}"
            )));
        }
        Ok(Self { x, w, f, g })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn g(&self) -> Option<&[f64]> {
        self.g.as_deref()
    }

    pub fn has_g(&self) -> bool {
        self.g.is_some()
    }

    pub fn total_measure(&self) -> f64 {
        self.w.iter().sum()
    }
}

/// Selects one of the two processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Process {
    F,
    G,
}

impl Process {
    pub fn name(&self) -> &'static str {
        match self {
            Process::F => "f",
            Process::G => "g",
        }
    }
}

/// `<Q_j|Q_k>`, `<Q_j|f|Q_k>`, `<Q_j|g|Q_k>`, `<Q_k>` and `<1>` for one order.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSet {
    pub basis: BasisSpec,
    pub order: usize,
    pub gram: DMatrix<f64>,
    pub a_f: DMatrix<f64>,
    pub a_g: Option<DMatrix<f64>>,
    /// `<Q_k>`, k < order.
    pub moments: DVector<f64>,
    pub total_measure: f64,
    /// `<f>` and `<g>` against the measure.
    pub integral_f: f64,
    pub integral_g: Option<f64>,
}

impl GramSet {
    pub fn operator(&self, which: Process) -> Result<&DMatrix<f64>> {
        match which {
            Process::F => Ok(&self.a_f),
            Process::G => self.a_g.as_ref().ok_or(Error::MissingProcess("g")),
        }
    }

    pub fn integral(&self, which: Process) -> Result<f64> {
        match which {
            Process::F => Ok(self.integral_f),
            Process::G => self.integral_g.ok_or(Error::MissingProcess("g")),
        }
    }
}

/// `<Q_m>`, `<f Q_m>`, `<g Q_m>` for `m = 0 .. 2n-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub basis: BasisSpec,
    pub mu: Vec<f64>,
    pub mu_f: Vec<f64>,
    pub mu_g: Option<Vec<f64>>,
}

impl MomentSet {
    /// Number of moments per vector (`2n`).
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

fn check_order(basis: &BasisSpec, order: usize, needed: usize) -> Result<()> {
    if order < 1 {
        return Err(Error::Config("quadrature order must be at least 1".into()));
    }
    if basis.size() < needed {
        return Err(Error::Config(format!(
            "basis of {} functions is too small: order {order} needs {needed}",
            basis.size()
        )));
    }
    Ok(())
}

fn mirror_upper(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for k in 0..j {
            m[(j, k)] = m[(k, j)];
        }
    }
}

/// Gram matrices by direct weighted sums over the samples, in sample order.
pub fn accumulate_grams(samples: &SampleSet, basis: &BasisSpec, order: usize) -> Result<GramSet> {
    check_order(basis, order, order)?;
    let n = order;
    let g_col = samples.g();
    let mut gram = DMatrix::zeros(n, n);
    let mut a_f = DMatrix::zeros(n, n);
    let mut a_g = g_col.map(|_| DMatrix::zeros(n, n));
    let mut moments = DVector::zeros(n);
    let mut q = vec![0.0; n];
    let (mut total, mut int_f, mut int_g) = (0.0, 0.0, 0.0);

    for l in 0..samples.len() {
        let w = samples.w[l];
        let fw = samples.f[l] * w;
        let gw = g_col.map(|g| g[l] * w);
        basis.evaluate_into(samples.x[l], &mut q)?;
        total += w;
        int_f += fw;
        if let Some(gw) = gw {
            int_g += gw;
        }
        for j in 0..n {
            moments[j] += q[j] * w;
            for k in j..n {
                let qq = q[j] * q[k];
                gram[(j, k)] += qq * w;
                a_f[(j, k)] += qq * fw;
                if let (Some(a), Some(gw)) = (a_g.as_mut(), gw) {
                    a[(j, k)] += qq * gw;
                }
            }
        }
    }
    mirror_upper(&mut gram);
    mirror_upper(&mut a_f);
    if let Some(a) = a_g.as_mut() {
        mirror_upper(a);
    }

    Ok(GramSet {
        basis: *basis,
        order,
        gram,
        a_f,
        a_g,
        moments,
        total_measure: total,
        integral_f: int_f,
        integral_g: g_col.map(|_| int_g),
    })
}

/// Moments of degree `0 .. 2n-1` by direct weighted sums.
pub fn moments_from_samples(samples: &SampleSet, basis: &BasisSpec, order: usize) -> Result<MomentSet> {
    check_order(basis, order, 2 * order)?;
    let len = 2 * order;
    let g_col = samples.g();
    let mut mu = vec![0.0; len];
    let mut mu_f = vec![0.0; len];
    let mut mu_g = g_col.map(|_| vec![0.0; len]);
    let mut q = vec![0.0; len];
    for l in 0..samples.len() {
        let w = samples.w[l];
        let fw = samples.f[l] * w;
        basis.evaluate_into(samples.x[l], &mut q)?;
        for m in 0..len {
            mu[m] += q[m] * w;
            mu_f[m] += q[m] * fw;
        }
        if let (Some(mg), Some(g)) = (mu_g.as_mut(), g_col) {
            let gw = g[l] * w;
            for m in 0..len {
                mg[m] += q[m] * gw;
            }
        }
    }
    Ok(MomentSet {
        basis: basis.with_size(len)?,
        mu,
        mu_f,
        mu_g,
    })
}

/// Gram matrices assembled from moments via the product expansion `Q_j Q_k = sum c_m Q_m`.
pub fn grams_from_moments(moments: &MomentSet, order: usize) -> Result<GramSet> {
    if order < 1 {
        return Err(Error::Config("quadrature order must be at least 1".into()));
    }
    let needed = 2 * order - 1;
    if moments.len() < needed {
        return Err(Error::Range(format!(
            "order {order} needs moments up to degree {}, only {} available",
            needed - 1,
            moments.len()
        )));
    }
    let n = order;
    let basis = moments.basis.with_size(n)?;
    let contract = |mu: &[f64], j: usize, k: usize| -> Result<f64> {
        Ok(basis
            .product_expansion(j, k)?
            .iter()
            .map(|&(m, c)| c * mu[m])
            .sum())
    };
    let build = |mu: &[f64]| -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            for k in j..n {
                out[(j, k)] = contract(mu, j, k)?;
            }
        }
        mirror_upper(&mut out);
        Ok(out)
    };

    Ok(GramSet {
        basis,
        order,
        gram: build(&moments.mu)?,
        a_f: build(&moments.mu_f)?,
        a_g: moments.mu_g.as_deref().map(build).transpose()?,
        moments: DVector::from_column_slice(&moments.mu[..n]),
        total_measure: moments.mu[0],
        integral_f: moments.mu_f[0],
        integral_g: moments.mu_g.as_ref().map(|g| g[0]),
    })
}
