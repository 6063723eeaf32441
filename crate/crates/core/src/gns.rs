//! GNS representation of one bath piece in the state `ρ_β`.
//!
//! The Hilbert space is the matrix algebra `B(C^{n+1})` with inner product
//! `⟨A, B⟩ = Tr(ρ_β A†B)` and cyclic vector `I`. The orthonormal basis
//! `{X^i_j}` is
//!
//! * `X^0_0 = I`,
//! * `X^i_j = a^i_j / √β_i` for `i ≠ j`,
//! * `X^k_k = diag(λ_k^0, ..., λ_k^n)` for `k >= 1`, with
//!   `λ_k^j = 0` for `1 <= j < k`, `λ_k^k = √ν_k / (√ν_{k-1} √β_k)` and
//!   `λ_k^j = −√β_k / (√ν_{k-1} √ν_k)` for `j = 0` or `j > k`,
//!
//! where `ν_0 = 1` and `ν_k = 1 − β_1 − ... − β_k`. Pairs `(i, j)` are ordered
//! lexicographically, `index = i * (n+1) + j`.
//!
//! All `λ`'s are assembled from logarithms of the weights, so the basis stays
//! accurate when `β_n ~ h^{2n}` is far below machine epsilon.

use rayon::prelude::*;

use crate::bath::{bath_density_matrix, gibbs_weights, BathSpec, CouplingPoint, GibbsWeights};
use crate::error::{Error, Result};
use crate::fit::{fit_log_values, HGrid, RateFit};
use crate::interaction::StepUnitary;
use crate::matrix::{spectral_norm, ComplexMatrix, C64};

/// `ν_1..ν_n`.
pub fn nu_values(w: &GibbsWeights) -> Result<Vec<f64>> {
    let nu = nu_with_origin(w);
    if let Some(k) = nu.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::invalid(
            format!("nu[{k}]"),
            "must be positive; weights are corrupted",
        ));
    }
    Ok(nu[1..].to_vec())
}

// ν_0 = 1 followed by ν_k = β_0 + Σ_{m>k} β_m, summed over positive terms
// so that ν_k keeps full relative accuracy.
fn nu_with_origin(w: &GibbsWeights) -> Vec<f64> {
    let n = w.n();
    std::iter::once(1.0)
        .chain((1..=n).map(|k| w.sum_except(|m| m >= 1 && m <= k)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct GnsBasis {
    n: usize,
    weights: GibbsWeights,
    nu: Vec<f64>,
    log_nu: Vec<f64>,
    // lambda[k-1][j] = λ_k^j
    lambda: Vec<Vec<f64>>,
    elements: Vec<ComplexMatrix>,
}

pub fn gns_basis(w: &GibbsWeights) -> Result<GnsBasis> {
    if let Some(j) = w.as_slice().iter().position(|b| *b <= 0.0) {
        return Err(Error::invalid(
            format!("beta_{j}"),
            "GNS basis needs strictly positive weights (X^i_j divides by sqrt(beta_i))",
        ));
    }
    let n = w.n();
    let levels = n + 1;
    let nu = nu_with_origin(w);
    nu_values(w)?;
    let log_nu: Vec<f64> = nu.iter().map(|v| v.ln()).collect();

    let mut lambda = vec![vec![0.0; levels]; n];
    for k in 1..=n {
        let ln_b = w.ln(k);
        let diag = (0.5 * (log_nu[k] - log_nu[k - 1] - ln_b)).exp();
        let tail = -(0.5 * (ln_b - log_nu[k - 1] - log_nu[k])).exp();
        for j in 0..levels {
            lambda[k - 1][j] = match j {
                j if j == k => diag,
                j if j == 0 || j > k => tail,
                _ => 0.0,
            };
        }
    }

    let mut elements = Vec::with_capacity(levels * levels);
    for i in 0..levels {
        for j in 0..levels {
            let x = if i == 0 && j == 0 {
                ComplexMatrix::identity(levels)
            } else if i != j {
                let mut m = ComplexMatrix::zeros(levels, levels);
                m[(j, i)] = C64::new((-0.5 * w.ln(i)).exp(), 0.0);
                m
            } else {
                ComplexMatrix::real_diag(&lambda[i - 1])
            };
            elements.push(x);
        }
    }

    Ok(GnsBasis {
        n,
        weights: w.clone(),
        nu,
        log_nu,
        lambda,
        elements,
    })
}

impl GnsBasis {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn levels(&self) -> usize {
        self.n + 1
    }

    /// Number of basis elements, `(n+1)²`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn weights(&self) -> &GibbsWeights {
        &self.weights
    }

    pub fn density(&self) -> ComplexMatrix {
        bath_density_matrix(&self.weights)
    }

    /// `ν_k` for `k = 0..=n` (with `ν_0 = 1`).
    pub fn nu(&self, k: usize) -> f64 {
        self.nu[k]
    }

    /// `λ_k^j`, `k >= 1`.
    pub fn lambda(&self, k: usize, j: usize) -> f64 {
        self.lambda[k - 1][j]
    }

    /// `ln |λ_k^j|` from the log weights; `-inf` for the structural zeros.
    pub fn ln_abs_lambda(&self, k: usize, j: usize) -> f64 {
        let ln_b = self.weights.ln(k);
        if j == k {
            0.5 * (self.log_nu[k] - self.log_nu[k - 1] - ln_b)
        } else if j == 0 || j > k {
            0.5 * (ln_b - self.log_nu[k - 1] - self.log_nu[k])
        } else {
            f64::NEG_INFINITY
        }
    }

    /// `1 − β_k (λ_k^k)² = β_k / ν_{k-1}`, evaluated without cancellation.
    pub fn diag_deviation(&self, k: usize) -> f64 {
        self.weights.get(k) / self.nu[k - 1]
    }

    pub fn ln_diag_deviation(&self, k: usize) -> f64 {
        self.weights.ln(k) - self.log_nu[k - 1]
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.levels() + j
    }

    pub fn pair(&self, index: usize) -> (usize, usize) {
        (index / self.levels(), index % self.levels())
    }

    /// `X^i_j`.
    pub fn element(&self, i: usize, j: usize) -> &ComplexMatrix {
        &self.elements[self.index(i, j)]
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }
}

/// `Tr(ρ a† b)`.
pub fn gns_inner(a: &ComplexMatrix, b: &ComplexMatrix, rho: &ComplexMatrix) -> Result<C64> {
    let n = rho.dim()?;
    for (name, m) in [("a", a), ("b", b)] {
        if m.rows() != n || m.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{name} is {}x{}, density matrix is {n}x{n}",
                m.rows(),
                m.cols()
            )));
        }
    }
    Ok((&(rho * &a.adjoint()) * b).trace())
}

/// Gram matrix `G[p][q] = ⟨X_p, X_q⟩` under the GNS inner product.
pub fn gram_matrix(basis: &GnsBasis) -> ComplexMatrix {
    let rho = basis.density();
    let m = basis.len();
    ComplexMatrix::from_fn(m, m, |p, q| {
        gns_inner(&basis.elements[p], &basis.elements[q], &rho).expect("same dimensions")
    })
}

/// `max |G − I|` entrywise.
pub fn max_gram_deviation(basis: &GnsBasis) -> f64 {
    let g = gram_matrix(basis);
    (&g - &ComplexMatrix::identity(g.rows())).max_abs()
}

/// Asymptotic class of a quantity as `h → 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// Fitted slope within 0.05 of 1.
    BigO,
    /// Fitted slope at least 1.1, or identically zero.
    LittleO,
    /// Value tends to 1.
    LimitOne,
    Unclassified,
}

impl Classification {
    pub fn label(&self) -> &'static str {
        match self {
            Classification::BigO => "O(h)",
            Classification::LittleO => "o(h)",
            Classification::LimitOne => "limit-1",
            Classification::Unclassified => "unclassified",
        }
    }
}

/// The weighted λ products whose small-`h` behaviour drives the
/// coefficient asymptotics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemmaQuantity {
    /// `β_0 λ_1^0`
    GroundFirst,
    /// `β_0 λ_i^0`, `i >= 2`
    GroundHigher { i: usize },
    /// `β_1 λ_1^1`
    FirstDiagonal,
    /// `β_k λ_i^k`, `i, k >= 1`, `(i, k) ≠ (1, 1)`
    Weighted { i: usize, k: usize },
    /// `β_k λ_i^k λ_j^k`, `1 <= i < j`, `0 <= k <= n`
    Cross { i: usize, j: usize, k: usize },
    /// `β_k (λ_i^k)²`, `i, k >= 1`, `i ≠ k`
    SquareOff { i: usize, k: usize },
    /// `β_k (λ_k^k)²`
    SquareDiag { k: usize },
}

impl LemmaQuantity {
    /// Every quantity for a bath with `n` excited levels.
    pub fn all(n: usize) -> Vec<LemmaQuantity> {
        let mut out = vec![LemmaQuantity::GroundFirst];
        out.extend((2..=n).map(|i| LemmaQuantity::GroundHigher { i }));
        out.push(LemmaQuantity::FirstDiagonal);
        for i in 1..=n {
            for k in 1..=n {
                if (i, k) != (1, 1) {
                    out.push(LemmaQuantity::Weighted { i, k });
                }
            }
        }
        for i in 1..=n {
            for j in (i + 1)..=n {
                for k in 0..=n {
                    out.push(LemmaQuantity::Cross { i, j, k });
                }
            }
        }
        for i in 1..=n {
            for k in 1..=n {
                if i != k {
                    out.push(LemmaQuantity::SquareOff { i, k });
                }
            }
        }
        out.extend((1..=n).map(|k| LemmaQuantity::SquareDiag { k }));
        out
    }

    pub fn name(&self) -> &'static str {
        match self {
            LemmaQuantity::GroundFirst => "beta0_lambda1^0",
            LemmaQuantity::GroundHigher { .. } => "beta0_lambdai^0",
            LemmaQuantity::FirstDiagonal => "beta1_lambda1^1",
            LemmaQuantity::Weighted { .. } => "betak_lambdai^k",
            LemmaQuantity::Cross { .. } => "betak_lambdai^k_lambdaj^k",
            LemmaQuantity::SquareOff { .. } => "betak_(lambdai^k)^2",
            LemmaQuantity::SquareDiag { .. } => "betak_(lambdak^k)^2",
        }
    }

    /// `(i, k, j2)` for tabulation; `j2` is the second λ index of a cross
    /// product.
    pub fn indices(&self) -> (usize, usize, Option<usize>) {
        match *self {
            LemmaQuantity::GroundFirst => (1, 0, None),
            LemmaQuantity::GroundHigher { i } => (i, 0, None),
            LemmaQuantity::FirstDiagonal => (1, 1, None),
            LemmaQuantity::Weighted { i, k } | LemmaQuantity::SquareOff { i, k } => (i, k, None),
            LemmaQuantity::Cross { i, j, k } => (i, k, Some(j)),
            LemmaQuantity::SquareDiag { k } => (k, k, None),
        }
    }

    /// The classification the asymptotic lemma asserts.
    pub fn claimed(&self) -> Classification {
        match self {
            LemmaQuantity::GroundFirst | LemmaQuantity::FirstDiagonal => Classification::BigO,
            LemmaQuantity::SquareDiag { .. } => Classification::LimitOne,
            _ => Classification::LittleO,
        }
    }

    /// Signed value at one coupling point.
    pub fn value(&self, b: &GnsBasis) -> f64 {
        let w = b.weights();
        match *self {
            LemmaQuantity::GroundFirst => w.get(0) * b.lambda(1, 0),
            LemmaQuantity::GroundHigher { i } => w.get(0) * b.lambda(i, 0),
            LemmaQuantity::FirstDiagonal => w.get(1) * b.lambda(1, 1),
            LemmaQuantity::Weighted { i, k } => w.get(k) * b.lambda(i, k),
            LemmaQuantity::Cross { i, j, k } => w.get(k) * b.lambda(i, k) * b.lambda(j, k),
            LemmaQuantity::SquareOff { i, k } => w.get(k) * b.lambda(i, k).powi(2),
            LemmaQuantity::SquareDiag { k } => w.get(k) * b.lambda(k, k).powi(2),
        }
    }

    /// `ln` of the quantity whose decay is fitted: `|value|`, or for the
    /// limit-1 quantity its distance from 1.
    pub fn ln_decaying_part(&self, b: &GnsBasis) -> f64 {
        let w = b.weights();
        match *self {
            LemmaQuantity::GroundFirst => w.ln(0) + b.ln_abs_lambda(1, 0),
            LemmaQuantity::GroundHigher { i } => w.ln(0) + b.ln_abs_lambda(i, 0),
            LemmaQuantity::FirstDiagonal => w.ln(1) + b.ln_abs_lambda(1, 1),
            LemmaQuantity::Weighted { i, k } => w.ln(k) + b.ln_abs_lambda(i, k),
            LemmaQuantity::Cross { i, j, k } => {
                w.ln(k) + b.ln_abs_lambda(i, k) + b.ln_abs_lambda(j, k)
            }
            LemmaQuantity::SquareOff { i, k } => w.ln(k) + 2.0 * b.ln_abs_lambda(i, k),
            LemmaQuantity::SquareDiag { k } => b.ln_diag_deviation(k),
        }
    }
}

/// One quantity across the grid.
#[derive(Debug, Clone)]
pub struct LemmaRow {
    pub quantity: LemmaQuantity,
    pub hs: Vec<f64>,
    pub values: Vec<f64>,
    /// `ln` of `|value|` (or of `|value − 1|` for the limit-1 quantity).
    pub ln_decay: Vec<f64>,
    pub fit: Option<RateFit>,
    pub exact_zero: bool,
    pub observed: Classification,
}

impl LemmaRow {
    pub fn matches_claim(&self) -> bool {
        self.observed == self.quantity.claimed()
    }
}

fn classify(quantity: &LemmaQuantity, exact_zero: bool, fit: Option<&RateFit>) -> Classification {
    if exact_zero {
        return Classification::LittleO;
    }
    let Some(fit) = fit else {
        return Classification::Unclassified;
    };
    if matches!(quantity, LemmaQuantity::SquareDiag { .. }) {
        // the deviation from 1 has to vanish for the limit to hold
        return if fit.slope >= 0.9 {
            Classification::LimitOne
        } else {
            Classification::Unclassified
        };
    }
    if (fit.slope - 1.0).abs() <= 0.05 {
        Classification::BigO
    } else if fit.slope >= 1.1 {
        Classification::LittleO
    } else {
        Classification::Unclassified
    }
}

/// Evaluates every lemma quantity on the grid and fits its decay exponent.
pub fn lambda_scaling_table(bath: &BathSpec, grid: &HGrid) -> Result<Vec<LemmaRow>> {
    grid.require_fit_size()?;
    let hs = grid.points();
    if let Some(h) = hs.iter().find(|h| **h >= 0.5) {
        return Err(Error::invalid("grid", format!("lemma sweep needs h < 0.5, got {h}")));
    }
    let bases: Vec<GnsBasis> = hs
        .iter()
        .map(|&h| {
            let cp = CouplingPoint::new(h, bath.beta())?;
            gns_basis(&gibbs_weights(bath, &cp)?)
        })
        .collect::<Result<_>>()?;
    let ln_h: Vec<f64> = hs.iter().map(|h| h.ln()).collect();

    Ok(LemmaQuantity::all(bath.n())
        .into_iter()
        .map(|quantity| {
            let values: Vec<f64> = bases.iter().map(|b| quantity.value(b)).collect();
            let ln_decay: Vec<f64> = bases.iter().map(|b| quantity.ln_decaying_part(b)).collect();
            let exact_zero = ln_decay.iter().all(|l| *l == f64::NEG_INFINITY);
            let fit = fit_log_values(&ln_h, &ln_decay).ok();
            let observed = classify(&quantity, exact_zero, fit.as_ref());
            LemmaRow {
                quantity,
                hs: hs.clone(),
                values,
                ln_decay,
                fit,
                exact_zero,
                observed,
            }
        })
        .collect())
}

/// The matrix elements `Ũ^{i,j}_{k,l} = Tr(ρ_β (X^k_l)† U X^i_j)` of the
/// GNS-represented step, each a `d x d` system operator. `(i, j)` is the
/// source pair and `(k, l)` the target pair.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    n: usize,
    d: usize,
    h: f64,
    entries: Vec<ComplexMatrix>,
}

impl CoefficientTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn levels(&self) -> usize {
        self.n + 1
    }

    fn offset(&self, (i, j): (usize, usize), (k, l): (usize, usize)) -> usize {
        let m = self.levels();
        ((i * m + j) * m + k) * m + l
    }

    /// `Ũ^{source}_{target}`.
    pub fn get(&self, source: (usize, usize), target: (usize, usize)) -> &ComplexMatrix {
        &self.entries[self.offset(source, target)]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every pair `(i, j)` in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let m = self.levels();
        (0..m * m).map(move |p| (p / m, p % m))
    }

    /// `‖Σ_target (Ũ^{source}_{target})† Ũ^{source}_{target} − I‖`; zero
    /// when the step acts isometrically on `H_S ⊗ X^{source}`.
    pub fn column_isometry_residual(&self, source: (usize, usize)) -> f64 {
        let mut acc = ComplexMatrix::zeros(self.d, self.d);
        for target in self.pairs() {
            let c = self.get(source, target);
            acc += &(&c.adjoint() * c);
        }
        spectral_norm(&(&acc - &ComplexMatrix::identity(self.d)))
    }
}

/// Builds the full `(n+1)^4` table. Each entry is `Σ_{a,b} W[a,b] U^a_b`
/// with `W = X^i_j ρ (X^k_l)†`, because
/// `Tr(ρ Y† |e_b⟩⟨e_a| X) = (X ρ Y†)[a, b]`.
pub fn coefficient_table(
    step: &StepUnitary,
    basis: &GnsBasis,
    rho: &ComplexMatrix,
) -> Result<CoefficientTable> {
    let levels = basis.levels();
    if step.levels() != levels {
        return Err(Error::DimensionMismatch(format!(
            "step unitary has {} bath levels, basis has {levels}",
            step.levels()
        )));
    }
    if rho.rows() != levels || rho.cols() != levels {
        return Err(Error::DimensionMismatch(format!(
            "density matrix is {}x{}, expected {levels}x{levels}",
            rho.rows(),
            rho.cols()
        )));
    }
    let d = step.d();
    let m = levels * levels;
    let adjoints: Vec<ComplexMatrix> = basis.elements().iter().map(|x| x.adjoint()).collect();

    let per_source: Vec<Vec<ComplexMatrix>> = (0..m)
        .into_par_iter()
        .map(|p| {
            let x_rho = &basis.elements()[p] * rho;
            (0..m)
                .map(|q| {
                    let w = &x_rho * &adjoints[q];
                    let mut acc = ComplexMatrix::zeros(d, d);
                    for a in 0..levels {
                        for b in 0..levels {
                            let c = w[(a, b)];
                            if c != C64::new(0.0, 0.0) {
                                acc += &step.block(a, b).scale(c);
                            }
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();

    Ok(CoefficientTable {
        n: basis.n(),
        d,
        h: step.h(),
        entries: per_source.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::CouplingPoint;
    use crate::interaction::{step_unitary_for, SystemSpec};
    use crate::matrix::{mat_exp, ONE};
    use approx::assert_abs_diff_eq;

    fn weights(p: &[f64]) -> GibbsWeights {
        GibbsWeights::from_probabilities(p.to_vec()).unwrap()
    }

    #[test]
    fn nu_cases() {
        assert_eq!(nu_values(&weights(&[1.0, 0.0, 0.0])).unwrap(), vec![1.0, 1.0]);
        let nu = nu_values(&weights(&[0.7, 0.2, 0.1])).unwrap();
        assert_abs_diff_eq!(nu[0], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(nu[1], 0.7, epsilon = 1e-15);
        let w = weights(&[0.55, 0.25, 0.15, 0.05]);
        assert_abs_diff_eq!(*nu_values(&w).unwrap().last().unwrap(), 0.55, epsilon = 1e-15);
        assert!(nu_values(&weights(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn two_level_basis_closed_form() {
        let (b0, b1) = (0.8, 0.2);
        let basis = gns_basis(&weights(&[b0, b1])).unwrap();
        let nu1 = b0;
        let x11 = basis.element(1, 1);
        assert_abs_diff_eq!(x11[(0, 0)].re, -(b1 / nu1).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(x11[(1, 1)].re, (nu1 / b1).sqrt(), epsilon = 1e-15);
        let rho = basis.density();
        let norm = gns_inner(x11, x11, &rho).unwrap();
        assert_abs_diff_eq!(norm.re, b0 * b1 / nu1 + nu1, epsilon = 1e-15);
        assert_abs_diff_eq!(norm.re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn three_level_gram_identity() {
        let basis = gns_basis(&weights(&[0.5, 0.3, 0.2])).unwrap();
        assert_eq!(basis.len(), 9);
        assert!(max_gram_deviation(&basis) < 1e-12);
    }

    #[test]
    fn diagonal_elements_have_mean_zero() {
        let basis = gns_basis(&weights(&[0.4, 0.3, 0.2, 0.1])).unwrap();
        for k in 1..=3 {
            let mean: f64 = (0..=3).map(|j| basis.weights().get(j) * basis.lambda(k, j)).sum();
            assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-15);
        }
        assert_eq!(basis.element(0, 0), &ComplexMatrix::identity(4));
    }

    #[test]
    fn zero_weight_is_rejected() {
        let err = gns_basis(&weights(&[0.9, 0.1, 0.0])).unwrap_err();
        assert!(err.to_string().contains("beta_2"), "{err}");
    }

    #[test]
    fn inner_product_cases() {
        let w = weights(&[0.6, 0.3, 0.1]);
        let rho = bath_density_matrix(&w);
        assert_abs_diff_eq!(
            gns_inner(&ComplexMatrix::identity(3), &ComplexMatrix::identity(3), &rho).unwrap().re,
            1.0,
            epsilon = 1e-15
        );
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let a = crate::bath::discrete_noise(2, i, j).unwrap();
                    assert_abs_diff_eq!(gns_inner(&a, &a, &rho).unwrap().re, w.get(i), epsilon = 1e-15);
                }
            }
        }
        assert!(gns_inner(&ComplexMatrix::identity(2), &ComplexMatrix::identity(3), &rho).is_err());
    }

    #[test]
    fn extreme_weights_keep_gram_identity() {
        for n in 1..=4 {
            let spec = BathSpec::new((0..=n).map(|j| j as f64).collect(), 1.0).unwrap();
            let cp = CouplingPoint::new(1e-12, 1.0).unwrap();
            let w = gibbs_weights(&spec, &cp).unwrap();
            assert!(w.get(n) >= 1e-100);
            let basis = gns_basis(&w).unwrap();
            assert!(max_gram_deviation(&basis) < 1e-10, "n = {n}");
        }
    }

    #[test]
    fn lemma_table_small_cases() {
        let bath = BathSpec::new(vec![0.0, 1.0, 2.0], 1.0).unwrap();
        let rows = lambda_scaling_table(&bath, &HGrid::default_sweep()).unwrap();
        let find = |q: LemmaQuantity| rows.iter().find(|r| r.quantity == q).unwrap();

        let g = find(LemmaQuantity::GroundFirst);
        assert_abs_diff_eq!(g.fit.unwrap().slope, 1.0, epsilon = 0.05);
        let limit = -(-0.5f64).exp();
        assert_abs_diff_eq!(g.values.last().unwrap() / g.hs.last().unwrap(), limit, epsilon = 1e-3);

        let zero = find(LemmaQuantity::Weighted { i: 2, k: 1 });
        assert!(zero.exact_zero);
        assert!(zero.values.iter().all(|v| *v == 0.0));

        let diag = find(LemmaQuantity::SquareDiag { k: 2 });
        assert_abs_diff_eq!(diag.fit.unwrap().slope, 4.0, epsilon = 0.05);
        assert_abs_diff_eq!(*diag.values.last().unwrap(), 1.0, epsilon = 1e-10);
        assert!(rows.iter().all(LemmaRow::matches_claim));
    }

    #[test]
    fn lemma_table_rejects_short_or_coarse_grids() {
        let bath = BathSpec::new(vec![0.0, 1.0], 1.0).unwrap();
        assert!(lambda_scaling_table(&bath, &HGrid::new(0.1, 0.5, 3).unwrap()).is_err());
        assert!(lambda_scaling_table(&bath, &HGrid::new(0.6, 0.5, 8).unwrap()).is_err());
    }

    fn qubit_system() -> SystemSpec {
        let sx = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        SystemSpec::new(
            ComplexMatrix::real_diag(&[1.0, -1.0]),
            vec![vec![sx.scale_real(std::f64::consts::PI / 3.0)]],
        )
        .unwrap()
    }

    fn table_for(sys: &SystemSpec, bath: &BathSpec, h: f64) -> CoefficientTable {
        let cp = CouplingPoint::new(h, bath.beta()).unwrap();
        let step = step_unitary_for(sys, bath, &cp).unwrap();
        let basis = gns_basis(&gibbs_weights(bath, &cp).unwrap()).unwrap();
        coefficient_table(&step, &basis, &basis.density()).unwrap()
    }

    #[test]
    fn decoupled_vacuum_coefficient() {
        let h_s = ComplexMatrix::from_real_rows(&[&[0.2, 0.4], &[0.4, -0.6]]).unwrap();
        let sys = SystemSpec::decoupled(h_s.clone(), 2).unwrap();
        let bath = BathSpec::new(vec![0.3, 1.0, 1.7], 1.0).unwrap();
        let h = 0.2;
        let table = table_for(&sys, &bath, h);
        let w = gibbs_weights(&bath, &CouplingPoint::new(h, 1.0).unwrap()).unwrap();
        let phase: C64 = bath
            .gamma()
            .iter()
            .enumerate()
            .map(|(m, g)| w.get(m) * C64::from_polar(1.0, -h * g))
            .sum();
        let expected = mat_exp(&h_s.scale(C64::new(0.0, -h))).unwrap().scale(phase);
        assert!(spectral_norm(&(table.get((0, 0), (0, 0)) - &expected)) < 1e-13);
    }

    #[test]
    fn vacuum_coefficient_tends_to_identity() {
        let bath = BathSpec::new(vec![0.0, 1.0], 1.0).unwrap();
        let sys = qubit_system();
        let far = spectral_norm(&(table_for(&sys, &bath, 0.1).get((0, 0), (0, 0)) - &ComplexMatrix::identity(2)));
        let near = spectral_norm(&(table_for(&sys, &bath, 0.001).get((0, 0), (0, 0)) - &ComplexMatrix::identity(2)));
        assert!(near < far / 50.0);
        assert!(near < 2e-3);
    }

    #[test]
    fn vacuum_row_zeros_are_exact() {
        let bath = BathSpec::new(vec![0.0, 1.0], 1.0).unwrap();
        let table = table_for(&qubit_system(), &bath, 0.05);
        for i in 1..=1 {
            assert_eq!(table.get((i, 0), (0, 0)).max_abs(), 0.0);
            assert_eq!(table.get((0, i), (0, 0)).max_abs(), 0.0);
        }
    }

    #[test]
    fn every_column_is_isometric() {
        let bath = BathSpec::new(vec![0.0, 1.0], 1.0).unwrap();
        let table = table_for(&qubit_system(), &bath, 0.01);
        assert_eq!(table.len(), 16);
        for source in table.pairs().collect::<Vec<_>>() {
            assert!(table.column_isometry_residual(source) < 1e-9, "{source:?}");
        }
    }

    #[test]
    fn ground_copy_scatters_like_excited_copies() {
        // Ũ^{0,1}_{0,1} = ⟨e_1, U e_1⟩ exactly
        let bath = BathSpec::new(vec![0.0, 1.0], 1.0).unwrap();
        let sys = qubit_system();
        let cp = CouplingPoint::new(0.01, 1.0).unwrap();
        let step = step_unitary_for(&sys, &bath, &cp).unwrap();
        let table = table_for(&sys, &bath, 0.01);
        assert!(spectral_norm(&(table.get((0, 1), (0, 1)) - step.block(1, 1))) < 1e-14);
        let _ = ONE;
    }
}
