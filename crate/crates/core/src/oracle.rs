//! Reference implementation for verification.
//!
//! Deliberately shares no code with the main pipeline: plain nested `Vec`s, the raw
//! monomial basis `x^k` without a domain map, a hand-written Cholesky reduction and a
//! cyclic Jacobi eigensolver. Only suitable for small orders on a handful of atoms.

#![allow(clippy::needless_range_loop)]

type Mat = Vec<Vec<f64>>;

fn zeros(r: usize, c: usize) -> Mat {
    vec![vec![0.0; c]; r]
}

fn transpose(a: &Mat) -> Mat {
    let (r, c) = (a.len(), a.first().map_or(0, Vec::len));
    let mut t = zeros(c, r);
    for i in 0..r {
        for j in 0..c {
            t[j][i] = a[i][j];
        }
    }
    t
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (r, k, c) = (a.len(), b.len(), b.first().map_or(0, Vec::len));
    let mut out = zeros(r, c);
    for i in 0..r {
        for j in 0..c {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

/// Lower-triangular `L` with `L Lᵀ = A`; `None` if `A` is not positive definite.
fn cholesky(a: &Mat) -> Option<Mat> {
    let n = a.len();
    let mut l = zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

/// Inverse of a lower-triangular matrix by forward substitution.
fn lower_inverse(l: &Mat) -> Mat {
    let n = l.len();
    let mut inv = zeros(n, n);
    for col in 0..n {
        for i in 0..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i][k] * inv[k][col];
            }
            inv[i][col] = s / l[i][i];
        }
    }
    inv
}

/// Cyclic Jacobi rotations; returns eigenvalues and eigenvector columns, unsorted.
fn jacobi_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.len();
    let mut m = a.clone();
    let mut v = zeros(n, n);
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        let norm: f64 = m.iter().flatten().map(|x| x * x).sum();
        if off <= 1e-32 * norm || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| m[i][i]).collect(), v)
}

/// Quadrature computed the naive way.
#[derive(Debug, Clone)]
pub struct NaiveQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// `coefficients[k][i]`: monomial coefficient `k` of eigenvector `i`.
    pub coefficients: Vec<Vec<f64>>,
}

/// Joint matrices computed the naive way. The density matrix is `|1><1| + I`, written in
/// the f-eigenbasis; it exercises the general `(R S)` path.
#[derive(Debug, Clone)]
pub struct NaiveJoint {
    pub f: NaiveQuadrature,
    pub g: NaiveQuadrature,
    pub projection: Vec<Vec<f64>>,
    pub value: Vec<Vec<f64>>,
    pub probability: Vec<Vec<f64>>,
    pub density_mixed: Vec<Vec<f64>>,
    pub pure_squared_unit: Vec<Vec<f64>>,
    pub pure_squared_mixed: Vec<Vec<f64>>,
}

fn monomial_gram(x: &[f64], w: &[f64], h: &[f64], n: usize) -> Mat {
    let mut out = zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            out[j][k] = x
                .iter()
                .zip(w)
                .zip(h)
                .map(|((&xl, &wl), &hl)| xl.powi((j + k) as i32) * hl * wl)
                .sum();
        }
    }
    out
}

fn naive_quadrature(x: &[f64], w: &[f64], f: &[f64], n: usize) -> Option<NaiveQuadrature> {
    let ones = vec![1.0; x.len()];
    let g = monomial_gram(x, w, &ones, n);
    let a = monomial_gram(x, w, f, n);
    let l = cholesky(&g)?;
    let linv = lower_inverse(&l);
    let c = matmul(&matmul(&linv, &a), &transpose(&linv));
    let (vals, y) = jacobi_eigen(&c);
    let alpha = matmul(&transpose(&linv), &y);
    let moments: Vec<f64> = (0..n)
        .map(|k| x.iter().zip(w).map(|(&xl, &wl)| xl.powi(k as i32) * wl).sum())
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    let mut coefficients = zeros(n, n);
    let mut amplitudes = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let amp: f64 = (0..n).map(|k| alpha[k][src] * moments[k]).sum();
        let sign = if amp < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            coefficients[k][dst] = sign * alpha[k][src];
        }
        amplitudes.push(sign * amp);
    }
    Some(NaiveQuadrature {
        nodes: order.iter().map(|&i| vals[i]).collect(),
        weights: amplitudes.iter().map(|a| a * a).collect(),
        amplitudes,
        coefficients,
    })
}

/// Naive Lebesgue quadrature of `f` against the discrete measure `(x, w)`.
pub fn quadrature(x: &[f64], w: &[f64], f: &[f64], n: usize) -> Option<NaiveQuadrature> {
    naive_quadrature(x, w, f, n)
}

/// Naive quadratures for `f` and `g` and every joint matrix built from them.
pub fn joint(x: &[f64], w: &[f64], f: &[f64], g: &[f64], n: usize) -> Option<NaiveJoint> {
    let qf = naive_quadrature(x, w, f, n)?;
    let qg = naive_quadrature(x, w, g, n)?;
    let ones = vec![1.0; x.len()];
    let gram = monomial_gram(x, w, &ones, n);
    let s = matmul(&matmul(&transpose(&qf.coefficients), &gram), &qg.coefficients);
    let mut r = zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            r[i][j] = qf.amplitudes[i] * qf.amplitudes[j] + if i == j { 1.0 } else { 0.0 };
        }
    }
    let rs = matmul(&r, &s);
    let mut value = zeros(n, n);
    let mut probability = zeros(n, n);
    let mut density_mixed = zeros(n, n);
    let mut pure_squared_unit = zeros(n, n);
    let mut pure_squared_mixed = zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            value[i][j] = qf.amplitudes[i] * s[i][j] * qg.amplitudes[j];
            probability[i][j] = s[i][j] * s[i][j];
            density_mixed[i][j] = s[i][j] * rs[i][j];
            let unit = qf.amplitudes[i] * qg.amplitudes[j];
            pure_squared_unit[i][j] = unit * unit;
            pure_squared_mixed[i][j] = rs[i][j] * rs[i][j];
        }
    }
    Some(NaiveJoint {
        f: qf,
        g: qg,
        projection: s,
        value,
        probability,
        density_mixed,
        pure_squared_unit,
        pure_squared_mixed,
    })
}

/// Roots of the degree-`n` monic orthogonal polynomial of the measure `(x, w)`, found by
/// Gram–Schmidt on monomials followed by a sign-change scan and bisection over the
/// support hull. These are the Gauss nodes of the measure.
pub fn gauss_nodes(x: &[f64], w: &[f64], n: usize) -> Vec<f64> {
    let inner = |p: &[f64], q: &[f64]| -> f64 {
        x.iter()
            .zip(w)
            .map(|(&xl, &wl)| eval_poly(p, xl) * eval_poly(q, xl) * wl)
            .sum()
    };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    for deg in 0..=n {
        let mut p = vec![0.0; deg + 1];
        p[deg] = 1.0;
        for q in &basis {
            let c = inner(&p, q) / inner(q, q);
            for (k, &qk) in q.iter().enumerate() {
                p[k] -= c * qk;
            }
        }
        basis.push(p);
    }
    let poly = &basis[n];
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let steps = 20_000;
    let mut roots = Vec::with_capacity(n);
    let mut prev_t = lo;
    let mut prev_v = eval_poly(poly, lo);
    for s in 1..=steps {
        let t = lo + (hi - lo) * s as f64 / steps as f64;
        let v = eval_poly(poly, t);
        if prev_v == 0.0 {
            roots.push(prev_t);
        } else if prev_v * v < 0.0 {
            let (mut a, mut b, mut fa) = (prev_t, t, prev_v);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                let fm = eval_poly(poly, mid);
                if fm == 0.0 || (b - a) < 1e-15 * (1.0 + mid.abs()) {
                    a = mid;
                    b = mid;
                    break;
                }
                if fa * fm < 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev_t = t;
        prev_v = v;
    }
    roots
}

fn eval_poly(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}
