//! One piece of the heat bath: an `(n+1)`-level system with energies
//! `γ_0..γ_n`, its grand-canonical Gibbs state at fugacity `e^{βμ} = h²`, and
//! the matrix units ("discrete noises") acting on it.

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, C64, ONE};

/// Bath level energies and inverse temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct BathSpec {
    gamma: Vec<f64>,
    beta: f64,
}

impl BathSpec {
    /// `gamma` holds `γ_0..γ_n`, so it needs at least two entries.
    pub fn new(gamma: Vec<f64>, beta: f64) -> Result<Self> {
        if gamma.len() < 2 {
            return Err(Error::invalid(
                "gamma",
                format!("need at least 2 levels (n >= 1), got {}", gamma.len()),
            ));
        }
        if let Some(i) = gamma.iter().position(|g| !g.is_finite()) {
            return Err(Error::invalid(format!("gamma[{i}]"), "must be finite"));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid("beta", format!("must be positive, got {beta}")));
        }
        Ok(Self { gamma, beta })
    }

    /// Number of excited levels.
    pub fn n(&self) -> usize {
        self.gamma.len() - 1
    }

    /// Dimension of one bath piece, `n + 1`.
    pub fn levels(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// The interaction time `h` together with the chemical potential it fixes
/// through `h² = e^{βμ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingPoint {
    h: f64,
    mu: f64,
}

impl CouplingPoint {
    /// A point in the low-density regime, `0 < h < 1` (so `μ < 0`).
    pub fn new(h: f64, beta: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::invalid("h", format!("must lie in (0, 1), got {h}")));
        }
        Self::diagnostic(h, beta)
    }

    /// Allows `h >= 1` (`μ >= 0`). Only for diagnostics; none of the
    /// asymptotic routines accept such points.
    pub fn diagnostic(h: f64, beta: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::invalid("h", format!("must be positive, got {h}")));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid("beta", format!("must be positive, got {beta}")));
        }
        Ok(Self {
            h,
            mu: 2.0 * h.ln() / beta,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn is_low_density(&self) -> bool {
        self.h < 1.0
    }
}

/// Occupation probabilities `β_0..β_n` of one bath piece, kept alongside
/// their logarithms so that tiny weights (`β_j ~ h^{2j}`) stay usable.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsWeights {
    weights: Vec<f64>,
    log_weights: Vec<f64>,
}

impl GibbsWeights {
    /// Wraps externally supplied probabilities. Zero entries are allowed
    /// here (e.g. the pure vacuum), but the GNS construction rejects them.
    pub fn from_probabilities(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::invalid("weights", "need at least 2 levels"));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid(
                format!("weights[{i}]"),
                format!("must be a finite probability, got {}", weights[i]),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("weights", format!("sum to {total}, expected 1")));
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self {
            weights,
            log_weights,
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn n(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn get(&self, j: usize) -> f64 {
        self.weights[j]
    }

    pub fn ln(&self, j: usize) -> f64 {
        self.log_weights[j]
    }

    /// `Σ_{m ∉ excluded}` computed as a sum of positive terms.
    pub(crate) fn sum_except(&self, excluded: impl Fn(usize) -> bool) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(m, _)| !excluded(*m))
            .map(|(_, w)| w)
            .sum()
    }
}

/// `β_j = h^{2j} e^{−βγ_j} / Σ_k h^{2k} e^{−βγ_k}`.
///
/// Exponents are shifted by their maximum before exponentiation, which is
/// the same as dividing out the common factor `e^{−βγ_0}` up to a constant.
pub fn gibbs_weights(spec: &BathSpec, cp: &CouplingPoint) -> Result<GibbsWeights> {
    let ln_h = cp.h().ln();
    let exponents: Vec<f64> = spec
        .gamma()
        .iter()
        .enumerate()
        .map(|(j, g)| 2.0 * j as f64 * ln_h - spec.beta() * (g - spec.gamma()[0]))
        .collect();
    let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_z = max + exponents.iter().map(|e| (e - max).exp()).sum::<f64>().ln();
    let log_weights: Vec<f64> = exponents.iter().map(|e| e - ln_z).collect();
    let weights = log_weights.iter().map(|l| l.exp()).collect();
    Ok(GibbsWeights {
        weights,
        log_weights,
    })
}

/// `ρ_β = diag(β_0, ..., β_n)`.
pub fn bath_density_matrix(w: &GibbsWeights) -> ComplexMatrix {
    ComplexMatrix::real_diag(w.as_slice())
}

/// The matrix unit `a^i_j = |e_j⟩⟨e_i|`, i.e. `a^i_j e_k = δ_{ik} e_j`.
pub fn discrete_noise(n: usize, i: usize, j: usize) -> Result<ComplexMatrix> {
    if i > n || j > n {
        return Err(Error::IndexOutOfRange(format!(
            "a^{i}_{j} needs indices in 0..={n}"
        )));
    }
    let mut m = ComplexMatrix::zeros(n + 1, n + 1);
    m[(j, i)] = ONE;
    Ok(m)
}

/// `H_R = diag(γ_0, ..., γ_n)`.
pub fn bath_hamiltonian(spec: &BathSpec) -> ComplexMatrix {
    ComplexMatrix::real_diag(spec.gamma())
}

/// `N = Σ_j j |e_j⟩⟨e_j|`.
pub fn number_operator(n: usize) -> ComplexMatrix {
    let diag: Vec<C64> = (0..=n).map(|j| C64::new(j as f64, 0.0)).collect();
    ComplexMatrix::diag(&diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{frobenius_norm, mat_exp, min_hermitian_eigenvalue, ZERO};
    use approx::assert_relative_eq;

    #[test]
    fn two_level_weights_by_hand() {
        let spec = BathSpec::new(vec![0.0, 1.0], 1.0).unwrap();
        let cp = CouplingPoint::new(0.1, 1.0).unwrap();
        let w = gibbs_weights(&spec, &cp).unwrap();
        let x = 0.01 * (-1.0f64).exp();
        assert_relative_eq!(w.get(1), x / (1.0 + x), max_relative = 1e-14);
        assert_relative_eq!(w.get(0), 1.0 - x / (1.0 + x), max_relative = 1e-14);
        assert_relative_eq!(cp.mu(), 2.0 * 0.1f64.ln(), max_relative = 1e-15);
    }

    #[test]
    fn unit_fugacity_gives_plain_gibbs_weights() {
        let spec = BathSpec::new(vec![0.2, -0.4, 1.3], 0.7).unwrap();
        let cp = CouplingPoint::diagnostic(1.0, 0.7).unwrap();
        assert!(!cp.is_low_density());
        let w = gibbs_weights(&spec, &cp).unwrap();
        let boltz: Vec<f64> = spec.gamma().iter().map(|g| (-0.7 * g).exp()).collect();
        let z: f64 = boltz.iter().sum();
        for j in 0..3 {
            assert_relative_eq!(w.get(j), boltz[j] / z, max_relative = 1e-14);
        }
    }

    #[test]
    fn equal_levels_follow_geometric_sum() {
        let n = 4;
        let spec = BathSpec::new(vec![0.5; n + 1], 2.0).unwrap();
        let h: f64 = 0.3;
        let w = gibbs_weights(&spec, &CouplingPoint::new(h, 2.0).unwrap()).unwrap();
        let q = h * h;
        for j in 0..=n {
            let expected = q.powi(j as i32) * (1.0 - q) / (1.0 - q.powi(n as i32 + 1));
            assert_relative_eq!(w.get(j), expected, max_relative = 1e-13);
        }
    }

    #[test]
    fn rejects_out_of_regime_inputs() {
        assert!(CouplingPoint::new(1.0, 1.0).is_err());
        assert!(CouplingPoint::new(0.0, 1.0).is_err());
        assert!(CouplingPoint::new(0.5, -1.0).is_err());
        assert!(BathSpec::new(vec![0.0], 1.0).is_err());
        assert!(BathSpec::new(vec![0.0, 1.0], 0.0).is_err());
        assert!(BathSpec::new(vec![0.0, f64::NAN], 1.0).is_err());
    }

    #[test]
    fn weights_survive_extreme_beta_gamma() {
        let spec = BathSpec::new(vec![0.0, -400.0, 800.0], 5.0).unwrap();
        let w = gibbs_weights(&spec, &CouplingPoint::new(1e-3, 5.0).unwrap()).unwrap();
        assert!(w.as_slice().iter().all(|x| x.is_finite()));
        assert_relative_eq!(w.as_slice().iter().sum::<f64>(), 1.0, max_relative = 1e-14);
        assert!(w.ln(2) < -1000.0);
    }

    #[test]
    fn density_matrix_cases() {
        let vac = GibbsWeights::from_probabilities(vec![1.0, 0.0, 0.0]).unwrap();
        let rho = bath_density_matrix(&vac);
        assert_eq!(rho, discrete_noise(2, 0, 0).unwrap());

        let w = GibbsWeights::from_probabilities(vec![0.9, 0.1]).unwrap();
        assert_eq!(bath_density_matrix(&w), ComplexMatrix::real_diag(&[0.9, 0.1]));

        let w = GibbsWeights::from_probabilities(vec![0.5, 0.2, 0.3]).unwrap();
        let rho = bath_density_matrix(&w);
        assert_relative_eq!(rho.trace().re, 1.0, max_relative = 1e-15);
        assert_relative_eq!(min_hermitian_eigenvalue(&rho).unwrap(), 0.2, max_relative = 1e-12);
        assert!(GibbsWeights::from_probabilities(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn noise_action_on_basis() {
        assert_eq!(discrete_noise(1, 0, 0).unwrap(), ComplexMatrix::real_diag(&[1.0, 0.0]));
        let a12 = discrete_noise(2, 1, 2).unwrap();
        let e = |k: usize| ComplexMatrix::from_fn(3, 1, |r, _| if r == k { ONE } else { ZERO });
        assert_eq!(&a12 * &e(1), e(2));
        assert_eq!(&a12 * &e(0), ComplexMatrix::zeros(3, 1));
        assert_eq!(&a12 * &e(2), ComplexMatrix::zeros(3, 1));
        assert!(discrete_noise(2, 3, 0).is_err());
    }

    #[test]
    fn noise_products_are_matrix_units() {
        for n in 1..=3 {
            let mut completeness = ComplexMatrix::zeros(n + 1, n + 1);
            for i in 0..=n {
                completeness += &discrete_noise(n, i, i).unwrap();
                for j in 0..=n {
                    for k in 0..=n {
                        for l in 0..=n {
                            let prod = &discrete_noise(n, i, j).unwrap()
                                * &discrete_noise(n, k, l).unwrap();
                            let expected = if i == l {
                                discrete_noise(n, k, j).unwrap()
                            } else {
                                ComplexMatrix::zeros(n + 1, n + 1)
                            };
                            assert_eq!(prod, expected, "a^{i}_{j} a^{k}_{l}");
                        }
                    }
                }
            }
            assert_eq!(completeness, ComplexMatrix::identity(n + 1));
        }
    }

    #[test]
    fn hamiltonian_and_number_operator() {
        let zero = BathSpec::new(vec![0.0; 3], 1.0).unwrap();
        assert_eq!(bath_hamiltonian(&zero), ComplexMatrix::zeros(3, 3));
        let spec = BathSpec::new(vec![0.0, 1.0, 2.0], 1.0).unwrap();
        assert_eq!(bath_hamiltonian(&spec), ComplexMatrix::real_diag(&[0.0, 1.0, 2.0]));
        assert_eq!(number_operator(1), ComplexMatrix::real_diag(&[0.0, 1.0]));
        assert_eq!(number_operator(3), ComplexMatrix::real_diag(&[0.0, 1.0, 2.0, 3.0]));

        let w = GibbsWeights::from_probabilities(vec![0.6, 0.3, 0.1]).unwrap();
        let hr = bath_hamiltonian(&spec);
        let rho = bath_density_matrix(&w);
        assert_eq!(&hr * &rho, &rho * &hr);
    }

    #[test]
    fn weights_match_exponential_form() {
        for (gamma, beta, h) in [
            (vec![0.0, 1.0], 1.0, 0.2),
            (vec![-0.3, 0.8, 1.9, 0.4], 0.5, 0.05),
            (vec![1.0, -1.0, 2.0], 2.0, 0.7),
        ] {
            let spec = BathSpec::new(gamma, beta).unwrap();
            let cp = CouplingPoint::new(h, beta).unwrap();
            let n = spec.n();
            let gen = (&bath_hamiltonian(&spec) - &number_operator(n).scale_real(cp.mu()))
                .scale_real(-beta);
            let e = mat_exp(&gen).unwrap();
            let rho = e.scale_real(1.0 / e.trace().re);
            let w = gibbs_weights(&spec, &cp).unwrap();
            assert!(frobenius_norm(&(&rho - &bath_density_matrix(&w))) < 1e-12);
            assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }
}
