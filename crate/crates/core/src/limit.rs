//! Limit coefficients of the GNS-represented step and the rescaled-residual
//! sweeps that check convergence to them.
//!
//! A quadruple is written `(source, target) = ((i, j), (k, l))` and refers to
//! the coefficient `Ũ^{i,j}_{k,l}`. Its rescaling exponent is
//! `ε = 1` for the vacuum pair on both sides, `1/2` when exactly one side is
//! `(0, 0)` and `0` otherwise.

use rayon::prelude::*;

use crate::bath::{gibbs_weights, BathSpec, CouplingPoint};
use crate::error::{Error, Result};
use crate::fit::{decreasing_tail, fit_loglog, HGrid, RateFit};
use crate::gns::{coefficient_table, gns_basis, CoefficientTable};
use crate::interaction::{
    block_residuals_from, effective_hamiltonian, scattering_matrix, step_unitary_for, BlockResiduals,
    Scattering, SystemSpec,
};
use crate::matrix::{spectral_norm, unitary_residual, ComplexMatrix, Norm, C64};

pub type Pair = (usize, usize);

/// Below this every residual counts as an exact zero.
pub const EXACT_ZERO: f64 = 1e-12;

/// Smallest grid accepted by [`sweep_and_fit`].
pub const MIN_SWEEP_POINTS: usize = 6;

fn check_pair(n: usize, (a, b): Pair) -> Result<()> {
    if a > n || b > n {
        return Err(Error::IndexOutOfRange(format!("pair ({a}, {b}) with n = {n}")));
    }
    Ok(())
}

pub fn epsilon_exponent(n: usize, source: Pair, target: Pair) -> Result<f64> {
    check_pair(n, source)?;
    check_pair(n, target)?;
    Ok(match (source == (0, 0), target == (0, 0)) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.5,
        _ => 0.0,
    })
}

/// Structural class of a quadruple, with the decay order the weight
/// asymptotics predict for the unrescaled coefficient where one exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoeffClass {
    /// `((0,0),(0,0))`: `(Ũ − I)/h → −i(H_S + γ_0 I)`.
    Drift,
    /// One side `(0,0)`, the other containing a ground index: exactly zero.
    VacuumZero,
    /// One side `(0,0)`, the other an off-diagonal excited pair `(a, b)`;
    /// the coefficient is `√β_a` times a block of `U`.
    VacuumJump { order: usize },
    /// One side `(0,0)`, the other a diagonal pair `(a, a)`, `a >= 1`.
    VacuumDiagonal { order: usize },
    /// `((i,j),(i,l))` with `j, l >= 1`: converges to `S^j_l`.
    Gauge,
    /// `((i,0),(i,0))`, `i >= 1`: equals `U^0_0`, which tends to `I`.
    GroundReturn,
    /// Nonzero couplings between different copies, `o(h)` of order `i + k`.
    Cross { order: usize },
    /// Everything else vanishes identically.
    StructuralZero,
}

impl CoeffClass {
    pub fn of(source: Pair, target: Pair) -> CoeffClass {
        let ((i, j), (k, l)) = (source, target);
        let vac_s = source == (0, 0);
        let vac_t = target == (0, 0);
        if vac_s && vac_t {
            return CoeffClass::Drift;
        }
        if vac_s || vac_t {
            let (a, b) = if vac_s { target } else { source };
            return if a == 0 || b == 0 {
                CoeffClass::VacuumZero
            } else if a == b {
                CoeffClass::VacuumDiagonal { order: a }
            } else {
                CoeffClass::VacuumJump { order: a }
            };
        }
        if i == k && j >= 1 && l >= 1 {
            return CoeffClass::Gauge;
        }
        if i == k && j == 0 && l == 0 {
            return CoeffClass::GroundReturn;
        }
        let off_s = i != j;
        let off_t = k != l;
        let cross = match (off_s, off_t) {
            // Ũ^{i,j}_{k,k} = √β_i λ_k^i U^j_i
            (true, false) => i >= 1 && j >= 1 && k >= 1 && k < i,
            // Ũ^{i,i}_{k,l} = √β_k λ_i^k U^k_l
            (false, true) => i >= 1 && k >= 1 && l >= 1 && k > i,
            (false, false) => i != k,
            (true, true) => false,
        };
        if cross {
            CoeffClass::Cross { order: i + k }
        } else {
            CoeffClass::StructuralZero
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CoeffClass::Drift => "drift",
            CoeffClass::VacuumZero => "vacuum-zero",
            CoeffClass::VacuumJump { .. } => "vacuum-jump",
            CoeffClass::VacuumDiagonal { .. } => "vacuum-diagonal",
            CoeffClass::Gauge => "gauge",
            CoeffClass::GroundReturn => "ground-return",
            CoeffClass::Cross { .. } => "cross",
            CoeffClass::StructuralZero => "structural-zero",
        }
    }

    /// Predicted log-log slope of the unrescaled coefficient, if sharp.
    pub fn predicted_order(&self) -> Option<usize> {
        match *self {
            CoeffClass::VacuumJump { order }
            | CoeffClass::VacuumDiagonal { order }
            | CoeffClass::Cross { order } => Some(order),
            _ => None,
        }
    }
}

/// Limit data of the quantum stochastic differential equation.
#[derive(Debug, Clone)]
pub struct LimitGenerator {
    h_eff: ComplexMatrix,
    scattering: Scattering,
    n: usize,
    d: usize,
}

pub fn assemble_limit_generator(sys: &SystemSpec, bath: &BathSpec) -> Result<LimitGenerator> {
    sys.check_bath(bath)?;
    Ok(LimitGenerator {
        h_eff: effective_hamiltonian(sys, bath),
        scattering: scattering_matrix(sys)?,
        n: sys.n(),
        d: sys.d(),
    })
}

impl LimitGenerator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `H_S + γ_0 I`.
    pub fn h_eff(&self) -> &ComplexMatrix {
        &self.h_eff
    }

    pub fn scattering(&self) -> &Scattering {
        &self.scattering
    }

    /// `S^j_l`, 1-based.
    pub fn s_block(&self, j: usize, l: usize) -> ComplexMatrix {
        self.scattering.block(j, l)
    }

    /// `δ_{ik}(S^j_l − δ_{jl} I)` for `j, l >= 1`, zero for every other
    /// multiplicity pair.
    pub fn gauge_coeff(&self, source: Pair, target: Pair) -> ComplexMatrix {
        let ((i, j), (k, l)) = (source, target);
        if i != k || j == 0 || l == 0 {
            return ComplexMatrix::zeros(self.d, self.d);
        }
        let s = self.s_block(j, l);
        if j == l {
            &s - &ComplexMatrix::identity(self.d)
        } else {
            s
        }
    }

    /// The limit of `(Ũ^{source}_{target} − δ I) / h^ε`.
    pub fn limit_operator(&self, source: Pair, target: Pair) -> Result<ComplexMatrix> {
        check_pair(self.n, source)?;
        check_pair(self.n, target)?;
        Ok(match CoeffClass::of(source, target) {
            CoeffClass::Drift => self.h_eff.scale(C64::new(0.0, -1.0)),
            CoeffClass::Gauge => self.gauge_coeff(source, target),
            _ => ComplexMatrix::zeros(self.d, self.d),
        })
    }

    /// Non-vacuum pairs in lexicographic order; the multiplicity basis.
    pub fn multiplicity_pairs(&self) -> Vec<Pair> {
        let m = self.n + 1;
        (1..m * m).map(|p| (p / m, p % m)).collect()
    }

    /// `𝕊 = I + Σ gauge coefficients` on `system ⊗ multiplicity`, with the
    /// block in row `(k, l)`, column `(i, j)` acting on the system.
    pub fn scattering_operator(&self) -> ComplexMatrix {
        let pairs = self.multiplicity_pairs();
        let d = self.d;
        let mut out = ComplexMatrix::identity(d * pairs.len());
        for (c, &src) in pairs.iter().enumerate() {
            for (r, &tgt) in pairs.iter().enumerate() {
                let g = self.gauge_coeff(src, tgt);
                for a in 0..d {
                    for b in 0..d {
                        out[(r * d + a, c * d + b)] += g[(a, b)];
                    }
                }
            }
        }
        out
    }
}

/// Builds the generator and evaluates one limit operator.
pub fn limit_operator(
    source: Pair,
    target: Pair,
    sys: &SystemSpec,
    bath: &BathSpec,
) -> Result<ComplexMatrix> {
    assemble_limit_generator(sys, bath)?.limit_operator(source, target)
}

/// `‖(Ũ − δ I)/h^ε − L‖` in spectral norm, at the table's `h`.
pub fn rescaled_residual(
    table: &CoefficientTable,
    source: Pair,
    target: Pair,
    gen: &LimitGenerator,
) -> Result<f64> {
    let eps = epsilon_exponent(table.n(), source, target)?;
    let mut x = table.get(source, target).clone();
    if source == target {
        x = &x - &ComplexMatrix::identity(table.d());
    }
    let x = x.scale_real(table.h().powf(-eps));
    Ok(spectral_norm(&(&x - &gen.limit_operator(source, target)?)))
}

/// One quadruple across the grid.
#[derive(Debug, Clone)]
pub struct QuadrupleRow {
    pub source: Pair,
    pub target: Pair,
    pub epsilon: f64,
    pub class: CoeffClass,
    pub residuals: Vec<f64>,
    pub limit_norm: f64,
    pub fit: Option<RateFit>,
    pub passed: bool,
    pub note: String,
}

impl QuadrupleRow {
    pub fn is_identically_zero(&self) -> bool {
        self.residuals.iter().all(|r| *r < EXACT_ZERO)
    }

    /// Fitted slope of the unrescaled coefficient, `slope + ε`.
    pub fn coefficient_slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope + self.epsilon)
    }
}

#[derive(Debug, Clone)]
pub struct CoefficientSweep {
    pub hs: Vec<f64>,
    pub h_eff_norm: f64,
    pub rows: Vec<QuadrupleRow>,
}

/// Per-class aggregate of a sweep.
#[derive(Debug, Clone)]
pub struct ClassSummary {
    pub label: &'static str,
    pub count: usize,
    pub failed: usize,
    pub worst_last_residual: f64,
    pub min_slope: Option<f64>,
}

impl CoefficientSweep {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &QuadrupleRow> {
        self.rows.iter().filter(|r| !r.passed)
    }

    pub fn row(&self, source: Pair, target: Pair) -> Option<&QuadrupleRow> {
        self.rows
            .iter()
            .find(|r| r.source == source && r.target == target)
    }

    pub fn class_summaries(&self) -> Vec<ClassSummary> {
        let mut out: Vec<ClassSummary> = Vec::new();
        for row in &self.rows {
            let label = row.class.label();
            let idx = match out.iter().position(|s| s.label == label) {
                Some(p) => p,
                None => {
                    out.push(ClassSummary {
                        label,
                        count: 0,
                        failed: 0,
                        worst_last_residual: 0.0,
                        min_slope: None,
                    });
                    out.len() - 1
                }
            };
            let s = &mut out[idx];
            s.count += 1;
            s.failed += usize::from(!row.passed);
            s.worst_last_residual = s.worst_last_residual.max(*row.residuals.last().unwrap());
            if let Some(f) = row.fit {
                s.min_slope = Some(s.min_slope.map_or(f.slope, |m| m.min(f.slope)));
            }
        }
        out
    }
}

fn judge(row: &QuadrupleRow, h_eff_norm: f64) -> (bool, String) {
    if row.is_identically_zero() {
        return (true, "identically zero".into());
    }
    let last = *row.residuals.last().unwrap();
    let tail_ok = decreasing_tail(&row.residuals, 4);
    let slope = row.fit.map(|f| f.slope);
    let need_tail = |ok: bool, msg: String| {
        if !tail_ok {
            (false, format!("residual not decreasing on the last 4 points; {msg}"))
        } else {
            (ok, msg)
        }
    };
    match row.class {
        CoeffClass::VacuumZero | CoeffClass::StructuralZero => {
            (false, format!("expected exact zero, max residual {:e}", row.residuals.iter().cloned().fold(0.0, f64::max)))
        }
        CoeffClass::Drift => {
            let bound = 1e-2 * h_eff_norm;
            need_tail(last < bound, format!("last residual {last:e}, bound {bound:e}"))
        }
        CoeffClass::VacuumJump { order } | CoeffClass::VacuumDiagonal { order } => {
            let Some(s) = row.coefficient_slope() else {
                return (false, "no usable fit".into());
            };
            need_tail(
                last < 1e-2 && (s - order as f64).abs() <= 0.1,
                format!("last sqrt-rescaled value {last:e}, coefficient slope {s:.4}, predicted {order}"),
            )
        }
        CoeffClass::Cross { order } => match slope {
            Some(s) => need_tail(
                s >= 1.1 && (s - order as f64).abs() <= 0.1,
                format!("slope {s:.4}, predicted {order}"),
            ),
            // decays below the fit floor before four points are usable
            None => (last < EXACT_ZERO, format!("no usable fit, last {last:e}")),
        },
        CoeffClass::Gauge | CoeffClass::GroundReturn => match slope {
            Some(s) => need_tail(s >= 0.9, format!("slope {s:.4}")),
            None => (false, "no usable fit".into()),
        },
    }
}

/// Evaluates every quadruple on the grid, fits decay rates and judges each
/// against its class.
pub fn sweep_and_fit(sys: &SystemSpec, bath: &BathSpec, grid: &HGrid) -> Result<CoefficientSweep> {
    if grid.count < MIN_SWEEP_POINTS {
        return Err(Error::TooFewPoints {
            used: grid.count,
            needed: MIN_SWEEP_POINTS,
        });
    }
    let gen = assemble_limit_generator(sys, bath)?;
    let hs = grid.points();
    let tables: Vec<CoefficientTable> = hs
        .par_iter()
        .map(|&h| coefficient_table_at(sys, bath, h))
        .collect::<Result<_>>()?;

    let m = bath.levels();
    let pairs: Vec<Pair> = (0..m * m).map(|p| (p / m, p % m)).collect();
    let h_eff_norm = spectral_norm(gen.h_eff());
    let mut rows = Vec::with_capacity(pairs.len() * pairs.len());
    for &source in &pairs {
        for &target in &pairs {
            let residuals = tables
                .iter()
                .map(|t| rescaled_residual(t, source, target, &gen))
                .collect::<Result<Vec<f64>>>()?;
            let mut row = QuadrupleRow {
                source,
                target,
                epsilon: epsilon_exponent(bath.n(), source, target)?,
                class: CoeffClass::of(source, target),
                fit: fit_loglog(&hs, &residuals).ok(),
                limit_norm: spectral_norm(&gen.limit_operator(source, target)?),
                residuals,
                passed: false,
                note: String::new(),
            };
            (row.passed, row.note) = judge(&row, h_eff_norm);
            rows.push(row);
        }
    }
    Ok(CoefficientSweep {
        hs,
        h_eff_norm,
        rows,
    })
}

/// The coefficient table of the step at one `h`.
pub fn coefficient_table_at(sys: &SystemSpec, bath: &BathSpec, h: f64) -> Result<CoefficientTable> {
    let cp = CouplingPoint::new(h, bath.beta())?;
    let step = step_unitary_for(sys, bath, &cp)?;
    let basis = gns_basis(&gibbs_weights(bath, &cp)?)?;
    coefficient_table(&step, &basis, &basis.density())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpReport {
    pub drift_skew: f64,
    pub annihilation_zero: bool,
    pub creation_zero: bool,
    pub gauge_unitary: f64,
}

impl HpReport {
    pub fn passes(&self, drift_tol: f64, unitary_tol: f64) -> bool {
        self.drift_skew < drift_tol
            && self.gauge_unitary < unitary_tol
            && self.annihilation_zero
            && self.creation_zero
    }
}

/// Unitarity conditions of the limit equation: skew-Hermitian drift,
/// vanishing creation/annihilation coefficients, unitary `𝕊`.
pub fn hp_structure_check(gen: &LimitGenerator) -> HpReport {
    let drift = gen
        .limit_operator((0, 0), (0, 0))
        .expect("vacuum pair is in range");
    let drift_skew = spectral_norm(&(&drift + &drift.adjoint()));
    let pairs = gen.multiplicity_pairs();
    let vanishes = |src: Pair, tgt: Pair| {
        gen.limit_operator(src, tgt)
            .expect("pairs are in range")
            .max_abs()
            == 0.0
    };
    HpReport {
        drift_skew,
        annihilation_zero: pairs.iter().all(|&p| vanishes(p, (0, 0))),
        creation_zero: pairs.iter().all(|&p| vanishes((0, 0), p)),
        gauge_unitary: unitary_residual(&gen.scattering_operator(), Norm::Spectral)
            .expect("scattering operator is square"),
    }
}

/// Block residuals of `U` across a grid, with the two rate fits.
#[derive(Debug, Clone)]
pub struct BlockSweep {
    pub hs: Vec<f64>,
    pub residuals: Vec<BlockResiduals>,
    pub topleft_fit: Option<RateFit>,
    pub bottomright_fit: Option<RateFit>,
}

pub fn block_expansion_sweep(sys: &SystemSpec, bath: &BathSpec, grid: &HGrid) -> Result<BlockSweep> {
    grid.require_fit_size()?;
    let scatter = scattering_matrix(sys)?;
    let hs = grid.points();
    let residuals: Vec<BlockResiduals> = hs
        .par_iter()
        .map(|&h| {
            let cp = CouplingPoint::new(h, bath.beta())?;
            let step = step_unitary_for(sys, bath, &cp)?;
            Ok(block_residuals_from(&step, sys, bath, &scatter))
        })
        .collect::<Result<_>>()?;
    let top: Vec<f64> = residuals.iter().map(|r| r.topleft).collect();
    let bottom: Vec<f64> = residuals.iter().map(|r| r.bottomright).collect();
    Ok(BlockSweep {
        topleft_fit: fit_loglog(&hs, &top).ok(),
        bottomright_fit: fit_loglog(&hs, &bottom).ok(),
        hs,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::mat_exp;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    fn q1() -> (SystemSpec, BathSpec) {
        let sys = SystemSpec::new(
            ComplexMatrix::real_diag(&[1.0, -1.0]),
            vec![vec![sigma_x().scale_real(PI / 3.0)]],
        )
        .unwrap();
        (sys, BathSpec::new(vec![0.0, 1.0], 1.0).unwrap())
    }

    #[test]
    fn epsilon_cases() {
        assert_eq!(epsilon_exponent(3, (0, 0), (0, 0)).unwrap(), 1.0);
        assert_eq!(epsilon_exponent(3, (1, 2), (0, 0)).unwrap(), 0.5);
        assert_eq!(epsilon_exponent(3, (0, 0), (2, 2)).unwrap(), 0.5);
        assert_eq!(epsilon_exponent(3, (1, 2), (1, 3)).unwrap(), 0.0);
        assert!(epsilon_exponent(2, (1, 3), (0, 0)).is_err());
    }

    #[test]
    fn class_cases() {
        assert_eq!(CoeffClass::of((0, 0), (0, 0)), CoeffClass::Drift);
        assert_eq!(CoeffClass::of((0, 0), (0, 2)), CoeffClass::VacuumZero);
        assert_eq!(CoeffClass::of((2, 0), (0, 0)), CoeffClass::VacuumZero);
        assert_eq!(CoeffClass::of((2, 1), (0, 0)), CoeffClass::VacuumJump { order: 2 });
        assert_eq!(CoeffClass::of((0, 0), (2, 2)), CoeffClass::VacuumDiagonal { order: 2 });
        assert_eq!(CoeffClass::of((1, 2), (1, 1)), CoeffClass::Gauge);
        assert_eq!(CoeffClass::of((0, 2), (0, 1)), CoeffClass::Gauge);
        assert_eq!(CoeffClass::of((1, 0), (1, 0)), CoeffClass::GroundReturn);
        assert_eq!(CoeffClass::of((1, 0), (1, 2)), CoeffClass::StructuralZero);
        assert_eq!(CoeffClass::of((1, 2), (2, 1)), CoeffClass::StructuralZero);
        assert_eq!(CoeffClass::of((2, 1), (1, 1)), CoeffClass::Cross { order: 3 });
        assert_eq!(CoeffClass::of((1, 2), (2, 2)), CoeffClass::StructuralZero);
        assert_eq!(CoeffClass::of((1, 1), (2, 1)), CoeffClass::Cross { order: 3 });
        assert_eq!(CoeffClass::of((2, 2), (1, 2)), CoeffClass::StructuralZero);
        assert_eq!(CoeffClass::of((1, 1), (2, 2)), CoeffClass::Cross { order: 3 });
    }

    #[test]
    fn structural_zeros_are_exact_in_the_table() {
        let sys = SystemSpec::new(
            ComplexMatrix::from_real_rows(&[&[0.3, 0.2], &[0.2, -0.5]]).unwrap(),
            vec![
                vec![sigma_x().scale_real(0.4), ComplexMatrix::real_diag(&[0.2, 0.1])],
                vec![ComplexMatrix::real_diag(&[0.2, 0.1]), ComplexMatrix::real_diag(&[0.5, -0.3])],
            ],
        )
        .unwrap();
        let bath = BathSpec::new(vec![0.0, 0.8, 1.5], 1.0).unwrap();
        let table = coefficient_table_at(&sys, &bath, 0.05).unwrap();
        for s in table.pairs() {
            for t in table.pairs() {
                let c = CoeffClass::of(s, t);
                let v = table.get(s, t).max_abs();
                if matches!(c, CoeffClass::StructuralZero | CoeffClass::VacuumZero) {
                    assert!(v < 1e-15, "{s:?} -> {t:?}: {v:e}");
                } else if c != CoeffClass::GroundReturn && c != CoeffClass::Drift {
                    assert!(v > 1e-12, "{s:?} -> {t:?} unexpectedly zero");
                }
            }
        }
    }

    #[test]
    fn limit_operator_cases() {
        let (sys, bath) = q1();
        let gen = assemble_limit_generator(&sys, &bath).unwrap();
        let drift = gen.limit_operator((0, 0), (0, 0)).unwrap();
        assert_eq!(drift, sys.h_s().scale(C64::new(0.0, -1.0)));
        let s = mat_exp(&sigma_x().scale(C64::new(0.0, -PI / 3.0))).unwrap();
        let g = gen.limit_operator((1, 1), (1, 1)).unwrap();
        assert!(spectral_norm(&(&g - &(&s - &ComplexMatrix::identity(2)))) < 1e-14);
        assert_eq!(gen.limit_operator((1, 1), (0, 0)).unwrap().max_abs(), 0.0);
        assert!(gen.limit_operator((2, 0), (0, 0)).is_err());

        let zero_d = SystemSpec::decoupled(ComplexMatrix::real_diag(&[0.5, 0.1]), 2).unwrap();
        let bath2 = BathSpec::new(vec![0.0, 1.0, 2.0], 1.0).unwrap();
        let gen = assemble_limit_generator(&zero_d, &bath2).unwrap();
        for s in gen.multiplicity_pairs() {
            for t in gen.multiplicity_pairs() {
                assert_eq!(gen.gauge_coeff(s, t).max_abs(), 0.0);
            }
        }
        assert_eq!(gen.scattering_operator(), ComplexMatrix::identity(16));
    }

    #[test]
    fn scalar_scattering_operator() {
        let theta = 0.7;
        let sys = SystemSpec::new(
            ComplexMatrix::real_diag(&[0.0]),
            vec![vec![ComplexMatrix::real_diag(&[theta])]],
        )
        .unwrap();
        let bath = BathSpec::new(vec![0.0, 1.0], 1.0).unwrap();
        let big_s = assemble_limit_generator(&sys, &bath).unwrap().scattering_operator();
        let phase = C64::from_polar(1.0, -theta);
        let expected = ComplexMatrix::diag(&[phase, C64::new(1.0, 0.0), phase]);
        assert!((&big_s - &expected).max_abs() < 1e-15);
    }

    #[test]
    fn two_copies_carry_the_same_scattering() {
        let d12 = ComplexMatrix::from_rows(&[
            vec![C64::new(0.1, 0.2), C64::new(0.0, 0.0)],
            vec![C64::new(0.3, 0.0), C64::new(0.0, -0.4)],
        ])
        .unwrap();
        let sys = SystemSpec::new(
            ComplexMatrix::real_diag(&[1.0, -1.0]),
            vec![
                vec![sigma_x().scale_real(0.5), d12.clone()],
                vec![d12.adjoint(), ComplexMatrix::real_diag(&[0.2, 0.7])],
            ],
        )
        .unwrap();
        let bath = BathSpec::new(vec![0.0, 1.0, 2.0], 1.0).unwrap();
        let gen = assemble_limit_generator(&sys, &bath).unwrap();
        let big_s = gen.scattering_operator();
        let pairs = gen.multiplicity_pairs();
        let e = gen.scattering().matrix();
        for copy in 1..=2 {
            let idx: Vec<usize> = (1..=2)
                .map(|j| pairs.iter().position(|p| *p == (copy, j)).unwrap())
                .collect();
            // S rows are ordered system-major, the multiplicity blocks pair-major
            for (r, &pr) in idx.iter().enumerate() {
                for (c, &pc) in idx.iter().enumerate() {
                    for a in 0..2 {
                        for b in 0..2 {
                            let lhs = big_s[(pr * 2 + a, pc * 2 + b)];
                            let rhs = e[(a * 2 + r, b * 2 + c)];
                            assert!((lhs - rhs).norm() < 1e-15);
                        }
                    }
                }
            }
        }
        let report = hp_structure_check(&gen);
        assert!(report.passes(1e-12, 1e-10), "{report:?}");
    }

    #[test]
    fn hp_check_on_decoupled_is_exact() {
        let sys = SystemSpec::decoupled(ComplexMatrix::real_diag(&[2.0, -0.5]), 1).unwrap();
        let bath = BathSpec::new(vec![0.4, 1.0], 1.0).unwrap();
        let r = hp_structure_check(&assemble_limit_generator(&sys, &bath).unwrap());
        assert_eq!(r.gauge_unitary, 0.0);
        assert_eq!(r.drift_skew, 0.0);
        assert!(r.annihilation_zero && r.creation_zero);
    }

    #[test]
    fn drift_residual_matches_expansion() {
        let (sys, bath) = q1();
        let gen = assemble_limit_generator(&sys, &bath).unwrap();
        let coarse = rescaled_residual(&coefficient_table_at(&sys, &bath, 0.01).unwrap(), (0, 0), (0, 0), &gen).unwrap();
        let fine = rescaled_residual(&coefficient_table_at(&sys, &bath, 0.001).unwrap(), (0, 0), (0, 0), &gen).unwrap();
        assert_abs_diff_eq!(coarse / fine, 10.0, epsilon = 0.5);
    }

    #[test]
    fn q1_sweep_passes_on_fine_grid() {
        let (sys, bath) = q1();
        let sweep = sweep_and_fit(&sys, &bath, &HGrid::dyadic(6, 13)).unwrap();
        assert_eq!(sweep.rows.len(), 16);
        for r in &sweep.rows {
            assert!(r.passed, "{:?} -> {:?} {}: {}", r.source, r.target, r.class.label(), r.note);
        }
        let jump = sweep.row((1, 1), (0, 0)).unwrap();
        assert_abs_diff_eq!(jump.coefficient_slope().unwrap(), 1.0, epsilon = 0.05);
    }

    #[test]
    fn sweep_needs_six_points() {
        let (sys, bath) = q1();
        assert!(matches!(
            sweep_and_fit(&sys, &bath, &HGrid::dyadic(3, 7)),
            Err(Error::TooFewPoints { used: 5, needed: 6 })
        ));
    }

    #[test]
    fn block_sweep_slopes_on_q1() {
        let (sys, bath) = q1();
        let sweep = block_expansion_sweep(&sys, &bath, &HGrid::default_sweep()).unwrap();
        assert_abs_diff_eq!(sweep.topleft_fit.unwrap().slope, 2.0, epsilon = 0.1);
        assert_abs_diff_eq!(sweep.bottomright_fit.unwrap().slope, 1.0, epsilon = 0.1);
        assert!(sweep.residuals.iter().all(|r| r.offdiag < 1e-12));
    }
}
