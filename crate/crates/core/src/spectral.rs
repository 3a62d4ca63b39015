//! Generalized symmetric eigenproblem `A α = λ G α` and the Lebesgue quadrature built
//! from it.
//!
//! The pencil is reduced by whitening: `G = U D Uᵀ`, directions with
//! `d ≤ ε·d_max` are dropped, and `W = U_r D_r^{-1/2}` turns the pencil into the
//! ordinary symmetric problem `Wᵀ A W y = λ y` with `α = W y`. Columns of `α` come out
//! G-orthonormal, sorted by ascending eigenvalue, with sign chosen so the amplitude
//! `<ψ> = Σ α_k <Q_k>` is non-negative.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::moments::{GramSet, Process};

pub const DEFAULT_EPSILON: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative eigenvalue floor for the Gram matrix. Directions below
    /// `epsilon · λ_max(G)` are dropped and the order is reduced to the effective rank.
    /// Zero disables truncation: any numerical rank deficiency is then an error.
    pub epsilon: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Eigenpairs of a symmetric pencil, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    pub eigenvalues: Vec<f64>,
    /// Column `i` holds the basis coefficients of eigenvector `i`.
    pub coefficients: DMatrix<f64>,
    /// Number of Gram directions kept; equals the number of eigenpairs.
    pub effective_rank: usize,
}

impl EigenSolution {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `max |(αᵀ G α − I)_jk|`.
    pub fn orthonormality_residual(&self, gram: &DMatrix<f64>) -> f64 {
        let c = &self.coefficients;
        let m = c.transpose() * gram * c;
        (m - DMatrix::identity(self.len(), self.len())).amax()
    }

    /// `max |A α − G α Λ|`, relative to `max|A| + max|λ|·max|G|` times `max|α|`.
    pub fn eigen_residual(&self, op: &DMatrix<f64>, gram: &DMatrix<f64>) -> f64 {
        let c = &self.coefficients;
        let lam = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        let r = op * c - gram * c * lam;
        let lam_max = self.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = (op.amax() + lam_max * gram.amax()) * c.amax();
        if scale > 0.0 {
            r.amax() / scale
        } else {
            r.amax()
        }
    }
}

fn check_square_symmetric(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{name} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input(format!("{name} has non-finite entries")));
    }
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * m.amax() {
        return Err(Error::Input(format!(
            "{name} is not symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok(())
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted ascending.
pub(crate) fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Flips columns so `<ψ_i> = colᵢ · moments ≥ 0`; columns with a vanishing amplitude get
/// their first significant coefficient positive. `companions` are flipped alongside.
fn fix_signs(
    coefficients: &mut DMatrix<f64>,
    moments: &DVector<f64>,
    total_measure: f64,
    mut companion: Option<&mut DMatrix<f64>>,
) {
    let zero_amp = 1e-12 * total_measure.abs().sqrt();
    for i in 0..coefficients.ncols() {
        let amp = coefficients.column(i).dot(moments);
        let flip = if amp.abs() < zero_amp {
            let col = coefficients.column(i);
            let cutoff = 1e-12 * col.amax();
            col.iter().find(|v| v.abs() > cutoff).is_some_and(|&v| v < 0.0)
        } else {
            amp < 0.0
        };
        if flip {
            coefficients.column_mut(i).neg_mut();
            if let Some(c) = companion.as_deref_mut() {
                c.column_mut(i).neg_mut();
            }
        }
    }
}

/// Solves `A α = λ G α` for symmetric `A` and positive semidefinite `G`.
///
/// `moments` is `<Q_k>` and fixes the eigenvector signs; `G_00` is taken as `<1>`.
pub fn solve_generalized(
    op: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    moments: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<EigenSolution> {
    check_square_symmetric(op, "operator matrix")?;
    check_square_symmetric(gram, "Gram matrix")?;
    let n = gram.nrows();
    if op.nrows() != n || moments.len() != n {
        return Err(Error::Dimension(format!(
            "pencil shapes disagree: A is {}x{}, G is {n}x{n}, moments has {}",
            op.nrows(),
            op.ncols(),
            moments.len()
        )));
    }
    if opts.epsilon < 0.0 || !opts.epsilon.is_finite() {
        return Err(Error::Config(format!(
            "regularization epsilon must be finite and non-negative, got {}",
            opts.epsilon
        )));
    }

    let (d, u) = sorted_symmetric_eigen(gram.clone());
    let d_max = d.last().copied().unwrap_or(0.0);
    let floor = opts.epsilon.max(n as f64 * f64::EPSILON) * d_max;
    let kept: Vec<usize> = (0..n).filter(|&i| d_max > 0.0 && d[i] > floor).collect();
    let rank = kept.len();
    if rank == 0 || (rank < n && opts.epsilon == 0.0) {
        return Err(Error::Conditioning {
            effective_rank: rank,
            order: n,
            epsilon: opts.epsilon,
        });
    }

    let whiten = DMatrix::from_fn(n, rank, |r, c| u[(r, kept[c])] / d[kept[c]].sqrt());
    let reduced = whiten.transpose() * op * &whiten;
    let (eigenvalues, y) = sorted_symmetric_eigen(reduced);
    let mut coefficients = whiten * y;
    fix_signs(&mut coefficients, moments, gram[(0, 0)], None);

    Ok(EigenSolution {
        eigenvalues,
        coefficients,
        effective_rank: rank,
    })
}

/// Value-nodes, weights and signed amplitudes of a Lebesgue integral quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct LebesgueQuadrature {
    pub process: Process,
    pub basis: BasisSpec,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub solution: EigenSolution,
    pub total_measure: f64,
    /// `<f>` (or `<g>`) of the data the quadrature was built from.
    pub integral: f64,
}

impl LebesgueQuadrature {
    /// Packages an eigen-solution of the `which` pencil of `grams`.
    pub fn from_solution(solution: EigenSolution, grams: &GramSet, which: Process) -> Result<Self> {
        if solution.coefficients.nrows() != grams.order {
            return Err(Error::Dimension(format!(
                "eigenvectors have {} coefficients, Gram order is {}",
                solution.coefficients.nrows(),
                grams.order
            )));
        }
        let amplitudes: Vec<f64> = (solution.coefficients.transpose() * &grams.moments)
            .iter()
            .copied()
            .collect();
        Ok(Self {
            process: which,
            basis: grams.basis,
            nodes: solution.eigenvalues.clone(),
            weights: amplitudes.iter().map(|a| a * a).collect(),
            amplitudes,
            solution,
            total_measure: grams.total_measure,
            integral: grams.integral(which)?,
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `|Σ w_i − <1>|` and `|Σ w_i f_i − <f>|`.
    pub fn sum_rule_residuals(&self) -> (f64, f64) {
        let total: f64 = self.weights.iter().sum();
        let first: f64 = self.weights.iter().zip(&self.nodes).map(|(w, f)| w * f).sum();
        ((total - self.total_measure).abs(), (first - self.integral).abs())
    }
}

/// Quadrature for one process by solving its generalized pencil directly.
pub fn lebesgue_quadrature(
    grams: &GramSet,
    which: Process,
    opts: &SolverOptions,
) -> Result<LebesgueQuadrature> {
    let op = grams.operator(which)?;
    let solution = solve_generalized(op, &grams.gram, &grams.moments, opts)?;
    LebesgueQuadrature::from_solution(solution, grams, which)
}

/// Solution of the g-pencil expressed in the f-eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct FBasisSolution {
    pub solution: EigenSolution,
    /// `β` with `α_g = α_f β`; orthogonal.
    pub rotation: DMatrix<f64>,
}

/// Solves the g-problem in the f-eigenbasis, where the right-hand side is the identity:
/// `B = α_fᵀ A_g α_f`, `B β = β Λ`, `α_g = α_f β`.
pub fn solve_in_f_basis(grams: &GramSet, quad_f: &LebesgueQuadrature) -> Result<FBasisSolution> {
    let a_g = grams.operator(Process::G)?;
    let alpha_f = &quad_f.solution.coefficients;
    if alpha_f.nrows() != grams.order || quad_f.basis != grams.basis {
        return Err(Error::Dimension(format!(
            "f-quadrature ({} coefficients, {} basis) does not match Gram set (order {}, {} basis)",
            alpha_f.nrows(),
            quad_f.basis.family(),
            grams.order,
            grams.basis.family()
        )));
    }
    let projected = alpha_f.transpose() * a_g * alpha_f;
    let (eigenvalues, mut rotation) = sorted_symmetric_eigen(projected);
    let mut coefficients = alpha_f * &rotation;
    fix_signs(
        &mut coefficients,
        &grams.moments,
        grams.total_measure,
        Some(&mut rotation),
    );
    Ok(FBasisSolution {
        solution: EigenSolution {
            eigenvalues,
            coefficients,
            effective_rank: quad_f.solution.effective_rank,
        },
        rotation,
    })
}

/// Both quadratures, with g obtained through the f-eigenbasis.
pub fn quadrature_pair(
    grams: &GramSet,
    opts: &SolverOptions,
) -> Result<(LebesgueQuadrature, LebesgueQuadrature)> {
    let quad_f = lebesgue_quadrature(grams, Process::F, opts)?;
    let g = solve_in_f_basis(grams, &quad_f)?;
    let quad_g = LebesgueQuadrature::from_solution(g.solution, grams, Process::G)?;
    Ok((quad_f, quad_g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{DomainMap, Family};
    use crate::moments::{accumulate_grams, SampleSet};
    use proptest::prelude::*;

    fn mat(n: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(n, n, v)
    }

    fn grams_for(x: &[f64], w: &[f64], f: &[f64], g: Option<Vec<f64>>, n: usize, family: Family) -> GramSet {
        let s = SampleSet::new(x.to_vec(), w.to_vec(), f.to_vec(), g).unwrap();
        let b = BasisSpec::new(family, n, DomainMap::fit(x, n).unwrap()).unwrap();
        accumulate_grams(&s, &b, n).unwrap()
    }

    #[test]
    fn two_by_two_by_hand() {
        let a = mat(2, &[0.0, 2.0, 2.0, 0.0]);
        let g = mat(2, &[2.0, 0.0, 0.0, 2.0]);
        let m = DVector::from_column_slice(&[2.0, 0.0]);
        let sol = solve_generalized(&a, &g, &m, &SolverOptions::default()).unwrap();
        assert!((sol.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((sol.eigenvalues[1] - 1.0).abs() < 1e-14);
        let expected = mat(2, &[0.5, 0.5, -0.5, 0.5]);
        assert!((&sol.coefficients - expected).amax() < 1e-14);
    }

    #[test]
    fn identity_and_scaled_pencils() {
        let g = mat(3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let m = DVector::from_column_slice(&[4.0, 1.0, 0.5]);
        let sol = solve_generalized(&g, &g, &m, &SolverOptions::default()).unwrap();
        assert!(sol.eigenvalues.iter().all(|l| (l - 1.0).abs() < 1e-13));
        let sol = solve_generalized(&(&g * -2.5), &g, &m, &SolverOptions::default()).unwrap();
        assert!(sol.eigenvalues.iter().all(|l| (l + 2.5).abs() < 1e-13));
        assert!(sol.orthonormality_residual(&g) < 1e-12);
    }

    #[test]
    fn rejects_asymmetric_and_mismatched_input() {
        let g = DMatrix::identity(2, 2);
        let m = DVector::from_column_slice(&[1.0, 0.0]);
        let asym = mat(2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(
            solve_generalized(&asym, &g, &m, &SolverOptions::default()),
            Err(Error::Input(_))
        ));
        let big = DMatrix::identity(3, 3);
        assert!(matches!(
            solve_generalized(&big, &g, &m, &SolverOptions::default()),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            solve_generalized(&g, &g, &m, &SolverOptions { epsilon: -1.0 }),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn rank_deficient_gram_truncates_or_fails() {
        // Three atoms cannot support four independent polynomials.
        let x = [-1.0, 0.2, 1.0];
        let gs = grams_for(
            &x,
            &[1.0, 2.0, 1.0],
            &[0.5, -1.0, 3.0],
            None,
            4,
            Family::Chebyshev,
        );
        let strict = lebesgue_quadrature(&gs, Process::F, &SolverOptions { epsilon: 0.0 });
        assert!(matches!(
            strict,
            Err(Error::Conditioning {
                effective_rank: 3,
                order: 4,
                ..
            })
        ));
        let q = lebesgue_quadrature(&gs, Process::F, &SolverOptions::default()).unwrap();
        assert_eq!(q.order(), 3);
        assert_eq!(q.solution.effective_rank, 3);
        // An r-atom measure is reproduced exactly by its r-point quadrature.
        let mut nodes = q.nodes.clone();
        nodes.sort_by(f64::total_cmp);
        for (got, want) in nodes.iter().zip([-1.0, 0.5, 3.0]) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
    }

    #[test]
    fn two_atom_quadrature() {
        let gs = grams_for(
            &[-1.0, 1.0],
            &[1.0, 1.0],
            &[-1.0, 1.0],
            Some(vec![1.0, -1.0]),
            2,
            Family::Monomial,
        );
        let q = lebesgue_quadrature(&gs, Process::F, &SolverOptions::default()).unwrap();
        for (got, want) in q.nodes.iter().zip([-1.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        for w in &q.weights {
            assert!((w - 1.0).abs() < 1e-14);
        }
        let fb = solve_in_f_basis(&gs, &q).unwrap();
        for (got, want) in fb.solution.eigenvalues.iter().zip([-1.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        let anti = mat(2, &[0.0, 1.0, 1.0, 0.0]);
        assert!((&fb.rotation - anti).amax() < 1e-14);
    }

    #[test]
    fn order_one_is_the_mean() {
        let x = [0.0, 0.3, 0.9, 2.0];
        let w = [1.0, 0.5, 2.0, 0.25];
        let f = [1.0, -2.0, 4.0, 8.0];
        let gs = grams_for(&x, &w, &f, None, 1, Family::Legendre);
        let q = lebesgue_quadrature(&gs, Process::F, &SolverOptions::default()).unwrap();
        let total: f64 = w.iter().sum();
        let mean: f64 = w.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>() / total;
        assert!((q.nodes[0] - mean).abs() < 1e-14);
        assert!((q.weights[0] - total).abs() < 1e-13);
    }

    #[test]
    fn gauss_legendre_from_dense_uniform_sampling() {
        let m = 20_000;
        let x: Vec<f64> = (0..m).map(|l| -1.0 + 2.0 * (l as f64 + 0.5) / m as f64).collect();
        let w = vec![2.0 / m as f64; m];
        let gs = grams_for(&x, &w, &x, None, 2, Family::Chebyshev);
        let q = lebesgue_quadrature(&gs, Process::F, &SolverOptions::default()).unwrap();
        let node = 1.0 / 3f64.sqrt();
        assert!((q.nodes[0] + node).abs() < 1e-6 && (q.nodes[1] - node).abs() < 1e-6);
        assert!(q.weights.iter().all(|w| (w - 1.0).abs() < 1e-6));
    }

    #[test]
    fn f_basis_special_cases() {
        let x = [-0.9, -0.4, 0.1, 0.5, 0.8, 1.3];
        let w = [1.0, 0.7, 1.2, 0.9, 1.1, 0.4];
        let f = [0.3, -1.2, 2.2, 0.9, -0.1, 1.7];
        let same = grams_for(&x, &w, &f, Some(f.to_vec()), 4, Family::Chebyshev);
        let q = lebesgue_quadrature(&same, Process::F, &SolverOptions::default()).unwrap();
        let fb = solve_in_f_basis(&same, &q).unwrap();
        assert!((&fb.rotation - DMatrix::identity(4, 4)).amax() < 1e-10);

        let affine: Vec<f64> = f.iter().map(|v| 2.0 * v + 1.0).collect();
        let gs = grams_for(&x, &w, &f, Some(affine), 4, Family::Chebyshev);
        let q = lebesgue_quadrature(&gs, Process::F, &SolverOptions::default()).unwrap();
        let fb = solve_in_f_basis(&gs, &q).unwrap();
        for (lg, lf) in fb.solution.eigenvalues.iter().zip(&q.nodes) {
            assert!((lg - (2.0 * lf + 1.0)).abs() < 1e-10);
        }
        assert!((&fb.rotation - DMatrix::identity(4, 4)).amax() < 1e-10);
    }

    #[test]
    fn missing_g_is_reported() {
        let gs = grams_for(&[-1.0, 1.0], &[1.0, 1.0], &[0.0, 1.0], None, 2, Family::Chebyshev);
        assert!(matches!(
            lebesgue_quadrature(&gs, Process::G, &SolverOptions::default()),
            Err(Error::MissingProcess("g"))
        ));
    }

    fn arb_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, usize)> {
        (8usize..30, 1usize..7).prop_flat_map(|(m, n)| {
            (
                proptest::collection::vec(-1.0f64..1.0, m),
                proptest::collection::vec(0.1f64..2.0, m),
                proptest::collection::vec(-3.0f64..3.0, m),
                proptest::collection::vec(-3.0f64..3.0, m),
                Just(n),
            )
        })
    }

    proptest! {
        #[test]
        fn pencil_invariants((x, w, f, g, n) in arb_case()) {
            let gs = grams_for(&x, &w, &f, Some(g), n, Family::Chebyshev);
            let q = lebesgue_quadrature(&gs, Process::F, &SolverOptions::default()).unwrap();
            prop_assume!(q.order() == n);
            let sol = &q.solution;
            prop_assert!(sol.orthonormality_residual(&gs.gram) < 1e-8);
            prop_assert!(sol.eigen_residual(&gs.a_f, &gs.gram) < 1e-8);
            prop_assert!(sol.eigenvalues.windows(2).all(|p| p[0] <= p[1]));
            prop_assert!(q.amplitudes.iter().all(|&a| a >= 0.0));
            for (w, a) in q.weights.iter().zip(&q.amplitudes) {
                prop_assert_eq!(*w, a * a);
            }
            let (r0, r1) = q.sum_rule_residuals();
            prop_assert!(r0 <= 1e-8 * q.total_measure);
            let fscale = f.iter().fold(0.0f64, |m, v| m.max(v.abs())) * q.total_measure;
            prop_assert!(r1 <= 1e-8 * fscale);

            let direct = lebesgue_quadrature(&gs, Process::G, &SolverOptions::default()).unwrap();
            let routed = solve_in_f_basis(&gs, &q).unwrap();
            let scale = direct.nodes.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in direct.nodes.iter().zip(&routed.solution.eigenvalues) {
                prop_assert!((a - b).abs() <= 1e-8 * scale);
            }
        }

        #[test]
        fn affine_covariance((x, w, f, _g, n) in arb_case(), c in 0.2f64..4.0, d in -3.0f64..3.0, neg in any::<bool>()) {
            let c = if neg { -c } else { c };
            let mapped: Vec<f64> = f.iter().map(|v| c * v + d).collect();
            let base = grams_for(&x, &w, &f, None, n, Family::Legendre);
            let moved = grams_for(&x, &w, &mapped, None, n, Family::Legendre);
            let q0 = lebesgue_quadrature(&base, Process::F, &SolverOptions::default()).unwrap();
            let q1 = lebesgue_quadrature(&moved, Process::F, &SolverOptions::default()).unwrap();
            prop_assume!(q0.order() == n && q1.order() == n);
            let mut expected: Vec<(f64, f64)> = q0.nodes.iter().map(|v| c * v + d).zip(q0.weights.iter().copied()).collect();
            expected.sort_by(|a, b| a.0.total_cmp(&b.0));
            let scale = q1.nodes.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for ((en, ew), (gn, gw)) in expected.iter().zip(q1.nodes.iter().zip(&q1.weights)) {
                prop_assert!((en - gn).abs() <= 1e-8 * scale);
                prop_assert!((ew - gw).abs() <= 1e-8 * q1.total_measure);
            }
        }
    }
}
