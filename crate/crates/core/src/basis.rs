//! Polynomial basis families on an affinely mapped domain.
//!
//! Every family is evaluated on `t = (2x - x_min - x_max) / (x_max - x_min)`, so the
//! recurrence argument stays in `[-1, 1]` for samples inside the domain. `Q_0` is the
//! constant function `1` for all families.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine map `x -> t` sending `[x_min, x_max]` onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainMap {
    x_min: f64,
    x_max: f64,
}

impl DomainMap {
    pub fn new(x_min: f64, x_max: f64) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::Config(format!(
                "domain bounds must be finite, got [{x_min}, {x_max}]"
            )));
        }
        if x_min >= x_max {
            return Err(Error::Config(format!(
                "domain requires x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        Ok(Self { x_min, x_max })
    }

    /// The identity map on `[-1, 1]`.
    pub fn unit() -> Self {
        Self {
            x_min: -1.0,
            x_max: 1.0,
        }
    }

    /// Domain spanning the sample range.
    ///
    /// All samples at one point is only acceptable for order 1, in which case the
    /// identity map is returned: the quadrature is then a single atom.
    pub fn fit(xs: &[f64], order: usize) -> Result<Self> {
        let (lo, hi) = xs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Input(
                "cannot derive a domain from empty or non-finite abscissas".into(),
            ));
        }
        if lo < hi {
            return Self::new(lo, hi);
        }
        if order <= 1 {
            Ok(Self::unit())
        } else {
            Err(Error::Config(format!(
                "all samples lie at x = {lo}; a degenerate domain supports only order 1, requested {order}"
            )))
        }
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    #[inline]
    pub fn map(&self, x: f64) -> f64 {
        (2.0 * x - self.x_min - self.x_max) / (self.x_max - self.x_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Chebyshev,
    Legendre,
    Monomial,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Chebyshev => "chebyshev",
            Family::Legendre => "legendre",
            Family::Monomial => "monomial",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "chebyshev" => Ok(Family::Chebyshev),
            "legendre" => Ok(Family::Legendre),
            "monomial" => Ok(Family::Monomial),
            other => Err(Error::Config(format!("unknown basis family `{other}`"))),
        }
    }
}

/// A family of `size` basis functions on a mapped domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    family: Family,
    size: usize,
    domain: DomainMap,
}

impl BasisSpec {
    pub fn new(family: Family, size: usize, domain: DomainMap) -> Result<Self> {
        if size == 0 {
            return Err(Error::Config("basis needs at least one function".into()));
        }
        Ok(Self { family, size, domain })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn domain(&self) -> &DomainMap {
        &self.domain
    }

    /// Same family and domain with a different number of functions.
    pub fn with_size(&self, size: usize) -> Result<Self> {
        Self::new(self.family, size, self.domain)
    }

    /// `[Q_0(x), ..., Q_{size-1}(x)]`.
    pub fn evaluate_all(&self, x: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.size];
        self.evaluate_into(x, &mut out)?;
        Ok(out)
    }

    /// Writes `Q_k(x)` for `k < out.len()` into `out`.
    pub fn evaluate_into(&self, x: f64, out: &mut [f64]) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::Input(format!(
                "cannot evaluate basis at non-finite x = {x}"
            )));
        }
        fill_family(self.family, self.domain.map(x), out);
        Ok(())
    }

    /// Coefficients `c_m` with `Q_j Q_k = sum_m c_m Q_m`, ordered by `m`.
    pub fn product_expansion(&self, j: usize, k: usize) -> Result<Vec<(usize, f64)>> {
        if j >= self.size || k >= self.size {
            return Err(Error::Range(format!(
                "product Q_{j}·Q_{k} requested from a basis of {} functions",
                self.size
            )));
        }
        Ok(linearize(self.family, j, k))
    }
}

fn fill_family(family: Family, t: f64, out: &mut [f64]) {
    let n = out.len();
    if n == 0 {
        return;
    }
    out[0] = 1.0;
    if n == 1 {
        return;
    }
    out[1] = t;
    match family {
        Family::Monomial => {
            for k in 2..n {
                out[k] = out[k - 1] * t;
            }
        }
        Family::Chebyshev => {
            for k in 2..n {
                out[k] = 2.0 * t * out[k - 1] - out[k - 2];
            }
        }
        Family::Legendre => {
            for k in 1..n - 1 {
                let kf = k as f64;
                out[k + 1] = ((2.0 * kf + 1.0) * t * out[k] - kf * out[k - 1]) / (kf + 1.0);
            }
        }
    }
}

/// Linearization of the product of two basis functions of the same family.
pub(crate) fn linearize(family: Family, j: usize, k: usize) -> Vec<(usize, f64)> {
    if j == 0 || k == 0 {
        return vec![(j + k, 1.0)];
    }
    match family {
        Family::Monomial => vec![(j + k, 1.0)],
        Family::Chebyshev => {
            let lo = j.abs_diff(k);
            vec![(lo, 0.5), (j + k, 0.5)]
        }
        Family::Legendre => legendre_linearization(j, k),
    }
}

// Adams–Neumann coefficients:
// P_m P_n = sum_{r=0}^{min(m,n)} A_{m-r} A_r A_{n-r} / A_{m+n-r}
//           * (2m + 2n - 4r + 1) / (2m + 2n - 2r + 1) * P_{m+n-2r},
// with A_r = (2r - 1)!! / r!.
fn legendre_linearization(m: usize, n: usize) -> Vec<(usize, f64)> {
    let a = adams_table(m + n);
    let mut terms: Vec<(usize, f64)> = (0..=m.min(n))
        .map(|r| {
            let s = (m + n) as f64;
            let rf = r as f64;
            let c = a[m - r] * a[r] * a[n - r] / a[m + n - r] * (2.0 * s - 4.0 * rf + 1.0)
                / (2.0 * s - 2.0 * rf + 1.0);
            (m + n - 2 * r, c)
        })
        .collect();
    terms.sort_by_key(|&(deg, _)| deg);
    terms
}

fn adams_table(max: usize) -> Vec<f64> {
    let mut a = Vec::with_capacity(max + 1);
    a.push(1.0);
    for r in 1..=max {
        let rf = r as f64;
        a.push(a[r - 1] * (2.0 * rf - 1.0) / rf);
    }
    a
}
