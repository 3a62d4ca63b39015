//! Joint distribution estimators built from the overlap of the f- and g-eigenbases.
//!
//! All estimators share the projection `S_ij = <ψ^f_i|ψ^g_j>` and differ in the operator
//! placed between the two eigenvectors:
//!
//! | kind           | entry                                  | total            |
//! |----------------|----------------------------------------|------------------|
//! | `value`        | `<ψ^f_i> S_ij <ψ^g_j>`                 | `<1>`            |
//! | `probability`  | `S_ij²`                                | `n`              |
//! | `density`      | `S_ij <ψ^f_i|ρ|ψ^g_j>`                 | `Spur ρ`         |
//! | `pure_squared` | `<ψ^f_i|ρ|ψ^g_j>²`                     | computed         |
//!
//! A density matrix is stored in the f-eigenbasis, so `<ψ^f_i|ρ|ψ^g_j> = (R S)_ij`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::moments::GramSet;
use crate::spectral::LebesgueQuadrature;

const ORTHONORMAL_TOL: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-12;

/// `S = α_fᵀ G α_g` together with the labels of both eigenbases.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    pub matrix: DMatrix<f64>,
    pub row_nodes: Vec<f64>,
    pub col_nodes: Vec<f64>,
    pub row_amplitudes: Vec<f64>,
    pub col_amplitudes: Vec<f64>,
}

impl ProjectionMatrix {
    pub fn order(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |(S Sᵀ − I)_jk|`.
    pub fn orthogonality_residual(&self) -> f64 {
        let n = self.order();
        (&self.matrix * self.matrix.transpose() - DMatrix::identity(n, n)).amax()
    }
}

pub fn projection(
    quad_f: &LebesgueQuadrature,
    quad_g: &LebesgueQuadrature,
    grams: &GramSet,
) -> Result<ProjectionMatrix> {
    if quad_f.basis != grams.basis || quad_g.basis != grams.basis {
        return Err(Error::Dimension(
            "quadratures were built on a different basis than the Gram set".into(),
        ));
    }
    let alpha_f = &quad_f.solution.coefficients;
    let alpha_g = &quad_g.solution.coefficients;
    if alpha_f.nrows() != grams.order || alpha_g.nrows() != grams.order {
        return Err(Error::Dimension(format!(
            "eigenvector lengths ({}, {}) differ from Gram order {}",
            alpha_f.nrows(),
            alpha_g.nrows(),
            grams.order
        )));
    }
    if quad_f.order() != quad_g.order() {
        return Err(Error::Dimension(format!(
            "quadrature orders differ: f has {}, g has {}",
            quad_f.order(),
            quad_g.order()
        )));
    }
    Ok(ProjectionMatrix {
        matrix: alpha_f.transpose() * &grams.gram * alpha_g,
        row_nodes: quad_f.nodes.clone(),
        col_nodes: quad_g.nodes.clone(),
        row_amplitudes: quad_f.amplitudes.clone(),
        col_amplitudes: quad_g.amplitudes.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JointKind {
    Value,
    Probability,
    Density,
    PureSquared,
}

impl JointKind {
    pub const ALL: [JointKind; 4] = [
        JointKind::Value,
        JointKind::Probability,
        JointKind::Density,
        JointKind::PureSquared,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            JointKind::Value => "value",
            JointKind::Probability => "probability",
            JointKind::Density => "density",
            JointKind::PureSquared => "pure_squared",
        }
    }
}

impl fmt::Display for JointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for JointKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "value" => Ok(JointKind::Value),
            "probability" => Ok(JointKind::Probability),
            "density" => Ok(JointKind::Density),
            "pure_squared" | "pure-squared" => Ok(JointKind::PureSquared),
            other => Err(Error::Config(format!("unknown correlation kind `{other}`"))),
        }
    }
}

/// An `n×n` joint weight matrix with f-nodes labelling rows and g-nodes labelling columns.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistributionMatrix {
    pub kind: JointKind,
    pub matrix: DMatrix<f64>,
    /// Expected value of the total sum.
    pub normalization: f64,
    pub row_nodes: Vec<f64>,
    pub col_nodes: Vec<f64>,
    /// Marginals the row and column sums must reproduce, when the kind has them.
    pub expected_row_sums: Option<Vec<f64>>,
    pub expected_col_sums: Option<Vec<f64>>,
}

impl JointDistributionMatrix {
    pub fn total(&self) -> f64 {
        self.matrix.sum()
    }

    /// `|Σ_ij W_ij − normalization|`.
    pub fn residual(&self) -> f64 {
        (self.total() - self.normalization).abs()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.matrix.row_iter().map(|r| r.sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        self.matrix.column_iter().map(|c| c.sum()).collect()
    }

    /// Largest deviation of row and column sums from their expected marginals.
    pub fn marginal_residual(&self) -> Option<f64> {
        let dev = |got: Vec<f64>, want: &[f64]| {
            got.iter()
                .zip(want)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        };
        match (&self.expected_row_sums, &self.expected_col_sums) {
            (Some(r), Some(c)) => Some(dev(self.row_sums(), r).max(dev(self.col_sums(), c))),
            _ => None,
        }
    }

    /// Entries below zero. Value and density kinds may legitimately carry them.
    pub fn negative_entries(&self) -> usize {
        self.matrix.iter().filter(|&&v| v < 0.0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DensityForm {
    /// `|1><1|`, holding the f-amplitudes it was built from.
    PureUnit(Vec<f64>),
    Identity,
    General,
}

/// Density operator in the f-eigenbasis: `R_ij = <ψ^f_i|ρ|ψ^f_j>`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub matrix: DMatrix<f64>,
    pub spur: f64,
    pub form: DensityForm,
}

impl DensityMatrix {
    fn with_form(matrix: DMatrix<f64>, form: DensityForm) -> Self {
        let spur = matrix.trace();
        Self { matrix, spur, form }
    }

    pub fn order(&self) -> usize {
        self.matrix.nrows()
    }

    /// `ρ = |1><1|`: `R = a aᵀ` with the signed f-amplitudes.
    pub fn pure_unit(quad_f: &LebesgueQuadrature) -> Self {
        let a = DVector::from_column_slice(&quad_f.amplitudes);
        Self::with_form(
            &a * a.transpose(),
            DensityForm::PureUnit(quad_f.amplitudes.clone()),
        )
    }

    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("density matrix order must be at least 1".into()));
        }
        Ok(Self::with_form(DMatrix::identity(n, n), DensityForm::Identity))
    }

    /// `R = Ψ diag(λ) Ψᵀ` from eigenvalues and orthonormal eigenvector columns.
    pub fn from_spectral(eigenvalues: &[f64], vectors: &DMatrix<f64>) -> Result<Self> {
        let n = eigenvalues.len();
        if vectors.nrows() != n || vectors.ncols() != n {
            return Err(Error::Dimension(format!(
                "{} eigenvalues but a {}x{} eigenvector matrix",
                n,
                vectors.nrows(),
                vectors.ncols()
            )));
        }
        if n == 0 {
            return Err(Error::Config("density matrix order must be at least 1".into()));
        }
        if eigenvalues.iter().chain(vectors.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Input("spectral density has non-finite entries".into()));
        }
        let dev = (vectors.transpose() * vectors - DMatrix::identity(n, n)).amax();
        if dev > ORTHONORMAL_TOL {
            return Err(Error::Input(format!(
                "density eigenvectors are not orthonormal (max deviation {dev:e})"
            )));
        }
        let lam = DMatrix::from_diagonal(&DVector::from_column_slice(eigenvalues));
        let r = vectors * lam * vectors.transpose();
        Ok(Self::with_form((&r + r.transpose()) * 0.5, DensityForm::General))
    }

    /// An explicit symmetric matrix in the f-eigenbasis.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "density matrix must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("density matrix has non-finite entries".into()));
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > SYMMETRY_TOL * matrix.amax() {
            return Err(Error::Input(format!(
                "density matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        Ok(Self::with_form(sym, DensityForm::General))
    }
}

fn check_density(s: &ProjectionMatrix, rho: &DensityMatrix) -> Result<()> {
    if rho.order() != s.order() {
        return Err(Error::Dimension(format!(
            "density matrix is {}x{}, projection is {}x{}",
            rho.order(),
            rho.order(),
            s.order(),
            s.order()
        )));
    }
    Ok(())
}

/// `E_ij = <ψ^f_i|ρ|ψ^g_j>`.
fn density_elements(s: &ProjectionMatrix, rho: &DensityMatrix) -> DMatrix<f64> {
    match &rho.form {
        DensityForm::PureUnit(a) if *a == s.row_amplitudes => {
            let b = &s.col_amplitudes;
            DMatrix::from_fn(s.order(), s.order(), |i, j| a[i] * b[j])
        }
        DensityForm::Identity => s.matrix.clone(),
        _ => &rho.matrix * &s.matrix,
    }
}

fn check_quadratures(
    quad_f: &LebesgueQuadrature,
    quad_g: &LebesgueQuadrature,
    s: &ProjectionMatrix,
) -> Result<()> {
    if quad_f.order() != s.order() || quad_g.order() != s.order() {
        return Err(Error::Dimension(format!(
            "quadrature orders ({}, {}) do not match projection order {}",
            quad_f.order(),
            quad_g.order(),
            s.order()
        )));
    }
    Ok(())
}

/// `V_ij = <ψ^f_i> S_ij <ψ^g_j>`; sums to `<1>` with marginals `w_f` and `w_g`.
pub fn value_correlation(
    quad_f: &LebesgueQuadrature,
    quad_g: &LebesgueQuadrature,
    s: &ProjectionMatrix,
) -> Result<JointDistributionMatrix> {
    check_quadratures(quad_f, quad_g, s)?;
    let a = &quad_f.amplitudes;
    let b = &quad_g.amplitudes;
    let matrix = DMatrix::from_fn(s.order(), s.order(), |i, j| s.matrix[(i, j)] * (a[i] * b[j]));
    Ok(JointDistributionMatrix {
        kind: JointKind::Value,
        matrix,
        normalization: quad_f.total_measure,
        row_nodes: quad_f.nodes.clone(),
        col_nodes: quad_g.nodes.clone(),
        expected_row_sums: Some(quad_f.weights.clone()),
        expected_col_sums: Some(quad_g.weights.clone()),
    })
}

/// `P_ij = S_ij²`; non-negative, doubly stochastic, sums to `n`.
pub fn probability_correlation(s: &ProjectionMatrix) -> JointDistributionMatrix {
    let n = s.order();
    let matrix = s.matrix.map(|v| v * v);
    JointDistributionMatrix {
        kind: JointKind::Probability,
        matrix,
        normalization: n as f64,
        row_nodes: s.row_nodes.clone(),
        col_nodes: s.col_nodes.clone(),
        expected_row_sums: Some(vec![1.0; n]),
        expected_col_sums: Some(vec![1.0; n]),
    }
}

/// `W_ij = S_ij (R S)_ij`; sums to `Spur ρ`.
pub fn density_matrix_correlation(
    s: &ProjectionMatrix,
    rho: &DensityMatrix,
) -> Result<JointDistributionMatrix> {
    check_density(s, rho)?;
    let e = density_elements(s, rho);
    Ok(JointDistributionMatrix {
        kind: JointKind::Density,
        matrix: s.matrix.zip_map(&e, |sv, ev| sv * ev),
        normalization: rho.spur,
        row_nodes: s.row_nodes.clone(),
        col_nodes: s.col_nodes.clone(),
        expected_row_sums: None,
        expected_col_sums: None,
    })
}

/// `W_ij = (R S)_ij²`. No closed-form total in general, so the normalization is the
/// computed sum; for `ρ = |1><1|` it equals `<1>²`.
pub fn pure_squared_correlation(
    s: &ProjectionMatrix,
    rho: &DensityMatrix,
) -> Result<JointDistributionMatrix> {
    check_density(s, rho)?;
    let matrix = density_elements(s, rho).map(|v| v * v);
    let normalization = matrix.sum();
    Ok(JointDistributionMatrix {
        kind: JointKind::PureSquared,
        matrix,
        normalization,
        row_nodes: s.row_nodes.clone(),
        col_nodes: s.col_nodes.clone(),
        expected_row_sums: None,
        expected_col_sums: None,
    })
}

/// Frobenius distance between the unit-sum squared correlation and the outer product of
/// its own marginals. Zero when the joint weights factorize, as they do for pure states.
pub fn pureness_estimate(s: &ProjectionMatrix, rho: &DensityMatrix) -> Result<f64> {
    let w = pure_squared_correlation(s, rho)?.matrix;
    let total = w.sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Degenerate(
            "squared correlation has zero total weight".into(),
        ));
    }
    let p = w / total;
    let rows = DVector::from_iterator(p.nrows(), p.row_iter().map(|r| r.sum()));
    let cols = DVector::from_iterator(p.ncols(), p.column_iter().map(|c| c.sum()));
    Ok((p - rows * cols.transpose()).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisSpec, DomainMap, Family};
    use crate::moments::{accumulate_grams, SampleSet};
    use crate::spectral::{quadrature_pair, SolverOptions};
    use proptest::prelude::*;

    struct Fixture {
        grams: GramSet,
        f: LebesgueQuadrature,
        g: LebesgueQuadrature,
        s: ProjectionMatrix,
    }

    fn fixture(x: &[f64], w: &[f64], f: &[f64], g: &[f64], n: usize) -> Fixture {
        let samples = SampleSet::new(x.to_vec(), w.to_vec(), f.to_vec(), Some(g.to_vec())).unwrap();
        let basis = BasisSpec::new(Family::Chebyshev, n, DomainMap::fit(x, n).unwrap()).unwrap();
        let grams = accumulate_grams(&samples, &basis, n).unwrap();
        let (qf, qg) = quadrature_pair(&grams, &SolverOptions::default()).unwrap();
        let s = projection(&qf, &qg, &grams).unwrap();
        Fixture {
            grams,
            f: qf,
            g: qg,
            s,
        }
    }

    fn two_atom_mirror() -> Fixture {
        fixture(&[-1.0, 1.0], &[1.0, 1.0], &[-1.0, 1.0], &[1.0, -1.0], 2)
    }

    fn six_points(g: &[f64]) -> Fixture {
        let x = [-0.9, -0.4, 0.1, 0.5, 0.8, 1.3];
        let w = [1.0, 0.7, 1.2, 0.9, 1.1, 0.4];
        let f = [0.3, -1.2, 2.2, 0.9, -0.1, 1.7];
        fixture(&x, &w, &f, g, 4)
    }

    fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax()
    }

    #[test]
    fn same_process_gives_identity_projection() {
        let f = [0.3, -1.2, 2.2, 0.9, -0.1, 1.7];
        let fx = six_points(&f);
        assert!(max_diff(&fx.s.matrix, &DMatrix::identity(4, 4)) < 1e-10);
        let v = value_correlation(&fx.f, &fx.g, &fx.s).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { fx.f.weights[i] } else { 0.0 };
                assert!((v.matrix[(i, j)] - want).abs() < 1e-10);
            }
        }
        let p = probability_correlation(&fx.s);
        assert!(max_diff(&p.matrix, &DMatrix::identity(4, 4)) < 1e-10);
    }

    #[test]
    fn positive_affine_image_gives_identity_projection() {
        let g: Vec<f64> = [0.3, -1.2, 2.2, 0.9, -0.1, 1.7]
            .iter()
            .map(|v| 2.0 * v + 1.0)
            .collect();
        let fx = six_points(&g);
        assert!(max_diff(&fx.s.matrix, &DMatrix::identity(4, 4)) < 1e-10);
    }

    #[test]
    fn mirrored_two_atom_set() {
        let fx = two_atom_mirror();
        let anti = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(max_diff(&fx.s.matrix.abs(), &anti) < 1e-14);
        let v = value_correlation(&fx.f, &fx.g, &fx.s).unwrap();
        assert!(max_diff(&v.matrix, &anti) < 1e-14);
        let p = probability_correlation(&fx.s);
        assert!(max_diff(&p.matrix, &anti) < 1e-14);
        assert_eq!(p.normalization, 2.0);
    }

    #[test]
    fn pure_unit_density_two_atom() {
        let fx = fixture(&[-1.0, 1.0], &[1.0, 1.0], &[-1.0, 1.0], &[-1.0, 1.0], 2);
        let rho = DensityMatrix::pure_unit(&fx.f);
        let ones = DMatrix::from_element(2, 2, 1.0);
        assert!(max_diff(&rho.matrix, &ones) < 1e-14);
        assert!((rho.spur - 2.0).abs() < 1e-14);
        assert!((rho.spur - fx.grams.total_measure).abs() < 1e-8 * fx.grams.total_measure);
    }

    #[test]
    fn order_one_density() {
        let fx = fixture(
            &[0.0, 1.0, 2.0],
            &[1.0, 2.0, 3.0],
            &[1.0, 2.0, 0.0],
            &[0.0, 1.0, 1.0],
            1,
        );
        let rho = DensityMatrix::pure_unit(&fx.f);
        assert!((rho.matrix[(0, 0)] - 6.0).abs() < 1e-12);
        assert_eq!(rho.spur, rho.matrix[(0, 0)]);
    }

    #[test]
    fn identity_density() {
        let rho = DensityMatrix::identity(3).unwrap();
        assert_eq!(rho.matrix, DMatrix::identity(3, 3));
        assert_eq!(rho.spur, 3.0);
        assert_eq!(
            DensityMatrix::identity(1).unwrap().matrix,
            DMatrix::identity(1, 1)
        );
        assert!(DensityMatrix::identity(0).is_err());
    }

    #[test]
    fn spectral_density_forms() {
        let theta: f64 = 0.7;
        let rot = DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        let rho = DensityMatrix::from_spectral(&[1.0, 1.0], &rot).unwrap();
        assert!(max_diff(&rho.matrix, &DMatrix::identity(2, 2)) < 1e-15);
        let e0 = DensityMatrix::from_spectral(&[1.0, 0.0, 0.0], &DMatrix::identity(3, 3)).unwrap();
        let mut want = DMatrix::zeros(3, 3);
        want[(0, 0)] = 1.0;
        assert_eq!(e0.matrix, want);
        assert_eq!(e0.spur, e0.matrix.trace());

        let fx = six_points(&[1.0, 0.2, -0.5, 0.4, 2.0, -1.0]);
        let total = fx.f.total_measure;
        let a = DVector::from_column_slice(&fx.f.amplitudes) / total.sqrt();
        let mut vecs = DMatrix::identity(4, 4);
        vecs.set_column(0, &a);
        // Complete `a` to an orthonormal basis with Gram–Schmidt.
        for c in 1..4 {
            let mut v = DVector::from_fn(4, |r, _| if r == c { 1.0 } else { 0.0 });
            for k in 0..c {
                let proj = vecs.column(k).dot(&v);
                v -= vecs.column(k) * proj;
            }
            vecs.set_column(c, &v.normalize());
        }
        let spectral = DensityMatrix::from_spectral(&[total, 0.0, 0.0, 0.0], &vecs).unwrap();
        let pure = DensityMatrix::pure_unit(&fx.f);
        assert!(max_diff(&spectral.matrix, &pure.matrix) < 1e-12 * total);
    }

    #[test]
    fn spectral_density_rejects_non_orthonormal() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            DensityMatrix::from_spectral(&[1.0, 1.0], &bad),
            Err(Error::Input(_))
        ));
        assert!(matches!(
            DensityMatrix::from_spectral(&[1.0], &DMatrix::identity(2, 2)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn density_specializations() {
        let fx = six_points(&[1.0, 0.2, -0.5, 0.4, 2.0, -1.0]);
        let v = value_correlation(&fx.f, &fx.g, &fx.s).unwrap();
        let p = probability_correlation(&fx.s);

        let tagged = density_matrix_correlation(&fx.s, &DensityMatrix::pure_unit(&fx.f)).unwrap();
        assert_eq!(tagged.matrix, v.matrix);
        let explicit = DensityMatrix::from_matrix(DensityMatrix::pure_unit(&fx.f).matrix).unwrap();
        let general = density_matrix_correlation(&fx.s, &explicit).unwrap();
        assert!(max_diff(&general.matrix, &v.matrix) < 1e-10);
        assert!((general.normalization - v.normalization).abs() < 1e-10);

        let ident = density_matrix_correlation(&fx.s, &DensityMatrix::identity(4).unwrap()).unwrap();
        assert_eq!(ident.matrix, p.matrix);
        let explicit = DensityMatrix::from_matrix(DMatrix::identity(4, 4) * 1.0).unwrap();
        let general = density_matrix_correlation(&fx.s, &explicit).unwrap();
        assert!(max_diff(&general.matrix, &p.matrix) < 1e-10);
    }

    #[test]
    fn pure_unit_squared_factorizes() {
        let fx = six_points(&[1.0, 0.2, -0.5, 0.4, 2.0, -1.0]);
        let total = fx.f.total_measure;
        for rho in [
            DensityMatrix::pure_unit(&fx.f),
            DensityMatrix::from_matrix(DensityMatrix::pure_unit(&fx.f).matrix).unwrap(),
        ] {
            let w = pure_squared_correlation(&fx.s, &rho).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    let want = fx.f.weights[i] * fx.g.weights[j];
                    assert!((w.matrix[(i, j)] - want).abs() < 1e-10 * total * total);
                }
            }
            assert!((w.total() - total * total).abs() < 1e-8 * total * total);
            assert!(pureness_estimate(&fx.s, &rho).unwrap() < 1e-8);
        }
    }

    #[test]
    fn same_process_identity_squared_is_identity() {
        let fx = six_points(&[0.3, -1.2, 2.2, 0.9, -0.1, 1.7]);
        let w = pure_squared_correlation(&fx.s, &DensityMatrix::identity(4).unwrap()).unwrap();
        assert!(max_diff(&w.matrix, &DMatrix::identity(4, 4)) < 1e-10);
    }

    #[test]
    fn mixed_state_is_not_pure() {
        // Three atoms, n = 2, g not an affine function of f.
        let fx = fixture(
            &[-1.0, 0.0, 1.0],
            &[1.0, 1.0, 1.0],
            &[0.0, 1.0, 3.0],
            &[2.0, -1.0, 0.5],
            2,
        );
        let rho = DensityMatrix::identity(2).unwrap();
        assert!(pureness_estimate(&fx.s, &rho).unwrap() > 1e-3);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let fx = six_points(&[1.0, 0.2, -0.5, 0.4, 2.0, -1.0]);
        let rho = DensityMatrix::identity(3).unwrap();
        assert!(matches!(
            density_matrix_correlation(&fx.s, &rho),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            pure_squared_correlation(&fx.s, &rho),
            Err(Error::Dimension(_))
        ));
        let other = two_atom_mirror();
        assert!(projection(&fx.f, &other.g, &fx.grams).is_err());
        assert!(value_correlation(&fx.f, &other.g, &fx.s).is_err());
    }

    #[test]
    fn zero_density_is_degenerate() {
        let fx = six_points(&[1.0, 0.2, -0.5, 0.4, 2.0, -1.0]);
        let zero = DensityMatrix::from_matrix(DMatrix::zeros(4, 4)).unwrap();
        assert!(matches!(
            pureness_estimate(&fx.s, &zero),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in JointKind::ALL {
            assert_eq!(k.name().parse::<JointKind>().unwrap(), k);
        }
        assert!("covariance".parse::<JointKind>().is_err());
    }

    fn flip_columns(m: &DMatrix<f64>, signs: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] * signs[c])
    }

    fn arb_points() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
        (8usize..24).prop_flat_map(|m| {
            (
                proptest::collection::vec(-1.0f64..1.0, m),
                proptest::collection::vec(0.1f64..2.0, m),
                proptest::collection::vec(-3.0f64..3.0, m),
                proptest::collection::vec(-3.0f64..3.0, m),
            )
        })
    }

    proptest! {
        #[test]
        fn sum_rules_hold((x, w, f, g) in arb_points(), n in 1usize..6) {
            let fx = fixture(&x, &w, &f, &g, n);
            prop_assume!(fx.f.order() == n);
            let total = fx.grams.total_measure;
            prop_assert!(fx.s.orthogonality_residual() < 1e-8);
            let v = value_correlation(&fx.f, &fx.g, &fx.s).unwrap();
            prop_assert!(v.residual() <= 1e-8 * total);
            prop_assert!(v.marginal_residual().unwrap() <= 1e-8 * total);
            let p = probability_correlation(&fx.s);
            prop_assert!(p.residual() <= 1e-8 * n as f64);
            prop_assert!(p.marginal_residual().unwrap() <= 1e-8);
            prop_assert!(p.matrix.iter().all(|&e| e >= 0.0));
        }

        #[test]
        fn sign_flips_leave_estimators_unchanged(
            (x, w, f, g) in arb_points(),
            flips in proptest::collection::vec(any::<bool>(), 8),
        ) {
            let n = 4;
            let fx = fixture(&x, &w, &f, &g, n);
            prop_assume!(fx.f.order() == n);
            let sf: Vec<f64> = flips[..n].iter().map(|&b| if b { -1.0 } else { 1.0 }).collect();
            let sg: Vec<f64> = flips[n..].iter().map(|&b| if b { -1.0 } else { 1.0 }).collect();
            let mut qf = fx.f.clone();
            let mut qg = fx.g.clone();
            qf.solution.coefficients = flip_columns(&qf.solution.coefficients, &sf);
            qg.solution.coefficients = flip_columns(&qg.solution.coefficients, &sg);
            qf.amplitudes = qf.amplitudes.iter().zip(&sf).map(|(a, s)| a * s).collect();
            qg.amplitudes = qg.amplitudes.iter().zip(&sg).map(|(a, s)| a * s).collect();
            let s2 = projection(&qf, &qg, &fx.grams).unwrap();

            let tol = 1e-10 * fx.grams.total_measure.max(1.0).powi(2);
            let v1 = value_correlation(&fx.f, &fx.g, &fx.s).unwrap().matrix;
            let v2 = value_correlation(&qf, &qg, &s2).unwrap().matrix;
            prop_assert!(max_diff(&v1, &v2) < tol);
            prop_assert!(max_diff(&probability_correlation(&fx.s).matrix, &probability_correlation(&s2).matrix) < tol);

            // ρ transforms with the f-basis: R' = D R D.
            let rho1 = DensityMatrix::from_matrix(DensityMatrix::pure_unit(&fx.f).matrix + DMatrix::identity(n, n)).unwrap();
            let d = DMatrix::from_diagonal(&DVector::from_column_slice(&sf));
            let rho2 = DensityMatrix::from_matrix(&d * &rho1.matrix * &d).unwrap();
            let w1 = density_matrix_correlation(&fx.s, &rho1).unwrap().matrix;
            let w2 = density_matrix_correlation(&s2, &rho2).unwrap().matrix;
            prop_assert!(max_diff(&w1, &w2) < tol);
            let p1 = pure_squared_correlation(&fx.s, &rho1).unwrap().matrix;
            let p2 = pure_squared_correlation(&s2, &rho2).unwrap().matrix;
            prop_assert!(max_diff(&p1, &p2) < tol * fx.grams.total_measure.max(1.0));
        }

        #[test]
        fn spectral_density_sum_rule((x, w, f, g) in arb_points(), lam in proptest::collection::vec(0.0f64..3.0, 3), seed in 0u64..1000) {
            let n = 3;
            let fx = fixture(&x, &w, &f, &g, n);
            prop_assume!(fx.f.order() == n);
            // Orthonormal basis from a seeded symmetric matrix.
            let m = DMatrix::from_fn(n, n, |r, c| ((seed as f64 + 1.0) * (r * 7 + c * 3 + r * c) as f64).sin());
            let vecs = nalgebra::SymmetricEigen::new(&m + m.transpose()).eigenvectors;
            let rho = DensityMatrix::from_spectral(&lam, &vecs).unwrap();
            let wm = density_matrix_correlation(&fx.s, &rho).unwrap();
            prop_assert!((wm.total() - rho.spur).abs() <= 1e-8 * rho.spur.max(1.0));
            prop_assert!((rho.spur - lam.iter().sum::<f64>()).abs() < 1e-12 * 9.0);
        }
    }
}
