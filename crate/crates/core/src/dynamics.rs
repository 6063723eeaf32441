//! Reduced dynamics of the repeated interactions: the one-step channel,
//! its iteration, comparison with the limit conjugation, and a truncated
//! simulation of the GNS chain.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::bath::{gibbs_weights, BathSpec, CouplingPoint};
use crate::error::{Error, Result};
use crate::fit::{fit_loglog, HGrid, RateFit};
use crate::gns::CoefficientTable;
use crate::interaction::{scattering_matrix, step_unitary_for, SystemSpec};
use crate::limit::{coefficient_table_at, Pair};
use crate::matrix::{
    hermitian_residual, mat_exp, min_hermitian_eigenvalue, spectral_norm, trace_norm, ComplexMatrix,
    Norm, C64, ZERO,
};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

/// A validated density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let herm = hermitian_residual(&m, Norm::Spectral)?;
        if herm > HERMITIAN_TOL {
            return Err(Error::invalid("density matrix", format!("not Hermitian (residual {herm:e})")));
        }
        let tr = m.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::invalid("density matrix", format!("trace is {tr}, expected 1")));
        }
        let min = min_hermitian_eigenvalue(&m)?;
        if min < -PSD_TOL {
            return Err(Error::invalid("density matrix", format!("negative eigenvalue {min:e}")));
        }
        Ok(Self(m))
    }

    /// `|ψ⟩⟨ψ|` for a unit vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > TRACE_TOL {
            return Err(Error::invalid("state vector", format!("squared norm is {norm}, expected 1")));
        }
        let d = psi.len();
        Self::new(ComplexMatrix::from_fn(d, d, |r, c| psi[r] * psi[c].conj()))
    }

    /// `|+⟩⟨+|` on a qubit.
    pub fn plus() -> Self {
        let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::pure(&[a, a]).expect("unit vector")
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(ComplexMatrix::identity(d).scale_real(1.0 / d as f64))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn d(&self) -> usize {
        self.0.rows()
    }
}

/// A map `ρ ↦ Σ K ρ K†`.
#[derive(Debug, Clone)]
pub struct QuantumChannel {
    d: usize,
    kraus: Vec<ComplexMatrix>,
}

impl QuantumChannel {
    pub fn new(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::invalid("kraus", "at least one operator is required"))?;
        let d = first.dim()?;
        for (idx, k) in kraus.iter().enumerate() {
            if k.rows() != d || k.cols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operator {idx} is {}x{}, expected {d}x{d}",
                    k.rows(),
                    k.cols()
                )));
            }
        }
        Ok(Self { d, kraus })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            d,
            kraus: vec![ComplexMatrix::identity(d)],
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn kraus_operators(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.d, self.d);
        for k in &self.kraus {
            out += &(&(k * rho) * &k.adjoint());
        }
        out
    }

    /// `‖Σ K†K − I‖`.
    pub fn trace_preservation_residual(&self) -> f64 {
        let mut acc = ComplexMatrix::zeros(self.d, self.d);
        for k in &self.kraus {
            acc += &(&k.adjoint() * k);
        }
        spectral_norm(&(&acc - &ComplexMatrix::identity(self.d)))
    }

    /// `Σ_{a,b} |a⟩⟨b| ⊗ Φ(|a⟩⟨b|)`, built by applying the map to matrix
    /// units.
    pub fn choi_matrix(&self) -> ComplexMatrix {
        let d = self.d;
        let mut choi = ComplexMatrix::zeros(d * d, d * d);
        for a in 0..d {
            for b in 0..d {
                let mut unit = ComplexMatrix::zeros(d, d);
                unit[(a, b)] = C64::new(1.0, 0.0);
                let img = self.apply(&unit);
                for r in 0..d {
                    for c in 0..d {
                        choi[(a * d + r, b * d + c)] = img[(r, c)];
                    }
                }
            }
        }
        choi
    }

    pub fn choi_min_eigenvalue(&self) -> f64 {
        min_hermitian_eigenvalue(&self.choi_matrix()).expect("Choi matrix is square")
    }
}

/// The one-step reduced map with a fresh bath piece in `ρ_β`. Kraus
/// operators are `√β_m U^m_l`, stored at index `m * (n+1) + l`.
pub fn step_channel(sys: &SystemSpec, bath: &BathSpec, cp: &CouplingPoint) -> Result<QuantumChannel> {
    let step = step_unitary_for(sys, bath, cp)?;
    let w = gibbs_weights(bath, cp)?;
    let levels = bath.levels();
    let mut kraus = Vec::with_capacity(levels * levels);
    for m in 0..levels {
        let s = w.get(m).sqrt();
        for l in 0..levels {
            kraus.push(step.block(m, l).scale_real(s));
        }
    }
    QuantumChannel::new(kraus)
}

/// `k`-fold application.
pub fn iterate(ch: &QuantumChannel, rho0: &DensityMatrix, k: usize) -> Result<DensityMatrix> {
    check_dim(ch, rho0)?;
    let mut rho = rho0.matrix().clone();
    for _ in 0..k {
        rho = ch.apply(&rho);
    }
    DensityMatrix::new(rho)
}

fn check_dim(ch: &QuantumChannel, rho: &DensityMatrix) -> Result<()> {
    if ch.d() != rho.d() {
        return Err(Error::DimensionMismatch(format!(
            "channel acts on dimension {}, state has {}",
            ch.d(),
            rho.d()
        )));
    }
    Ok(())
}

/// `e^{−iH_S t} ρ_0 e^{iH_S t}`.
pub fn limit_conjugation(rho0: &DensityMatrix, t: f64, h_s: &ComplexMatrix) -> Result<DensityMatrix> {
    if !(t >= 0.0) {
        return Err(Error::invalid("t", format!("must be nonnegative, got {t}")));
    }
    if h_s.rows() != rho0.d() || h_s.cols() != rho0.d() {
        return Err(Error::DimensionMismatch("H_S and rho0 differ in dimension".into()));
    }
    let u = mat_exp(&h_s.scale(C64::new(0.0, -t)))?;
    DensityMatrix::new(&(&u * rho0.matrix()) * &u.adjoint())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub h: f64,
    pub steps: usize,
    pub sup_error: f64,
}

#[derive(Debug, Clone)]
pub struct ErrorSweep {
    pub rows: Vec<ErrorRow>,
    pub fit: Option<RateFit>,
}

/// `⌊t/h⌋`, robust to `t/h` landing a rounding error below an integer.
pub fn step_count(t: f64, h: f64) -> usize {
    let q = t / h;
    let r = q.round();
    if (q - r).abs() <= 1e-9 * q.max(1.0) {
        r as usize
    } else {
        q.floor() as usize
    }
}

/// For each `h`, the largest trace-norm distance between the iterated
/// channel and the limit conjugation over steps `k <= ⌊t/h⌋`.
pub fn reduced_error_sweep(
    sys: &SystemSpec,
    bath: &BathSpec,
    rho0: &DensityMatrix,
    t: f64,
    grid: &HGrid,
) -> Result<ErrorSweep> {
    if !(t > 0.0) {
        return Err(Error::invalid("t", format!("must be positive, got {t}")));
    }
    if rho0.d() != sys.d() {
        return Err(Error::DimensionMismatch("rho0 and H_S differ in dimension".into()));
    }
    let rows: Vec<ErrorRow> = grid
        .points()
        .par_iter()
        .map(|&h| {
            let cp = CouplingPoint::new(h, bath.beta())?;
            let ch = step_channel(sys, bath, &cp)?;
            let v = mat_exp(&sys.h_s().scale(C64::new(0.0, -h)))?;
            let v_adj = v.adjoint();
            let steps = step_count(t, h);
            let mut rho = rho0.matrix().clone();
            let mut reference = rho.clone();
            let mut sup = 0.0f64;
            for _ in 0..steps {
                rho = ch.apply(&rho);
                reference = &(&v * &reference) * &v_adj;
                sup = sup.max(trace_norm(&(&rho - &reference))?);
            }
            Ok(ErrorRow {
                h,
                steps,
                sup_error: sup,
            })
        })
        .collect::<Result<_>>()?;
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.sup_error).collect();
    Ok(ErrorSweep {
        fit: fit_loglog(&hs, &errs).ok(),
        rows,
    })
}

#[derive(Debug, Clone)]
pub struct ScatterSweep {
    pub hs: Vec<f64>,
    pub residuals: Vec<f64>,
    pub fit: Option<RateFit>,
}

/// `‖B(h) − e^{−iD}‖` for the excited block `B(h)` of `U`.
pub fn collision_scattering_check(sys: &SystemSpec, bath: &BathSpec, grid: &HGrid) -> Result<ScatterSweep> {
    let s = scattering_matrix(sys)?;
    let hs = grid.points();
    let residuals: Vec<f64> = hs
        .par_iter()
        .map(|&h| {
            let cp = CouplingPoint::new(h, bath.beta())?;
            let step = step_unitary_for(sys, bath, &cp)?;
            Ok(spectral_norm(&(&step.excited_block() - s.matrix())))
        })
        .collect::<Result<_>>()?;
    Ok(ScatterSweep {
        fit: fit_loglog(&hs, &residuals).ok(),
        hs,
        residuals,
    })
}

/// Excitations on the chain: `(site, pair)` with 1-based sites in
/// increasing order and non-vacuum pairs.
pub type ChainConfig = Vec<(usize, Pair)>;

/// Amplitudes of the system–chain state restricted to a sector.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorState {
    d: usize,
    amplitudes: BTreeMap<ChainConfig, Vec<C64>>,
}

impl SectorState {
    /// `ψ ⊗ e_config`.
    pub fn product(config: ChainConfig, psi: Vec<C64>) -> Self {
        let d = psi.len();
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(config, psi);
        Self { d, amplitudes }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes
            .values()
            .flat_map(|v| v.iter())
            .map(|z| z.norm_sqr())
            .sum()
    }

    pub fn amplitude(&self, config: &[(usize, Pair)]) -> Option<&[C64]> {
        self.amplitudes.get(config).map(|v| v.as_slice())
    }

    pub fn configs(&self) -> impl Iterator<Item = (&ChainConfig, &Vec<C64>)> {
        self.amplitudes.iter()
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SectorRun {
    pub state: SectorState,
    /// Squared norm pushed out of the sector at each site.
    pub discarded: Vec<f64>,
}

impl SectorRun {
    pub fn total_discarded(&self) -> f64 {
        self.discarded.iter().sum()
    }

    /// `‖state‖² + Σ discarded − 1`.
    pub fn accounting_residual(&self) -> f64 {
        self.state.norm_sqr() + self.total_discarded() - 1.0
    }
}

/// Default cap on stored amplitudes, about 800 MB of `C64`.
pub const DEFAULT_AMPLITUDE_BUDGET: usize = 50_000_000;

fn binomial(m: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, t| acc * (m - t) as f64 / (t + 1) as f64)
}

/// Upper bound on the stored amplitudes of a run.
pub fn sector_amplitude_bound(sites: usize, multiplicity: usize, k_max: usize, d: usize) -> f64 {
    (0..=k_max.min(sites))
        .map(|j| binomial(sites, j) * (multiplicity as f64).powi(j as i32))
        .sum::<f64>()
        * d as f64
}

/// Runs the system past sites `1..=sites`, applying the one-site GNS step
/// at each and keeping only configurations with at most `k_max`
/// excitations.
pub fn sector_simulate(
    sys: &SystemSpec,
    bath: &BathSpec,
    cp: &CouplingPoint,
    sites: usize,
    k_max: usize,
    initial: &SectorState,
    budget: usize,
) -> Result<SectorRun> {
    if !(1..=2).contains(&k_max) {
        return Err(Error::invalid("K", format!("must be 1 or 2, got {k_max}")));
    }
    let levels = bath.levels();
    let multiplicity = levels * levels - 1;
    let bound = sector_amplitude_bound(sites, multiplicity, k_max, sys.d());
    if bound > budget as f64 {
        return Err(Error::BudgetExceeded {
            needed: bound.min(usize::MAX as f64) as usize,
            budget,
        });
    }
    if initial.d != sys.d() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has system dimension {}, expected {}",
            initial.d,
            sys.d()
        )));
    }
    let norm = initial.norm_sqr();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("initial state", format!("squared norm is {norm}, expected 1")));
    }
    for config in initial.amplitudes.keys() {
        validate_config(config, sites, k_max, bath.n())?;
    }

    let table = coefficient_table_at(sys, bath, cp.h())?;
    let mut state = initial.clone();
    let mut discarded = Vec::with_capacity(sites);
    for site in 1..=sites {
        let (next, lost) = apply_site(&state, &table, site, k_max);
        state = next;
        discarded.push(lost);
    }
    Ok(SectorRun { state, discarded })
}

fn validate_config(config: &[(usize, Pair)], sites: usize, k_max: usize, n: usize) -> Result<()> {
    if config.len() > k_max {
        return Err(Error::invalid(
            "initial configuration",
            format!("{} excitations exceed K = {k_max}", config.len()),
        ));
    }
    for w in config.windows(2) {
        if w[0].0 >= w[1].0 {
            return Err(Error::invalid("initial configuration", "sites must be strictly increasing"));
        }
    }
    for &(site, (i, j)) in config {
        if site == 0 || site > sites {
            return Err(Error::IndexOutOfRange(format!("site {site} of {sites}")));
        }
        if (i, j) == (0, 0) || i > n || j > n {
            return Err(Error::invalid(
                "initial configuration",
                format!("({i}, {j}) is not a multiplicity index"),
            ));
        }
    }
    Ok(())
}

fn apply_site(
    state: &SectorState,
    table: &CoefficientTable,
    site: usize,
    k_max: usize,
) -> (SectorState, f64) {
    let d = state.d;
    // Configurations that agree away from `site` are the only ones whose
    // images can interfere, so group them first.
    let mut groups: BTreeMap<ChainConfig, Vec<(Pair, &Vec<C64>)>> = BTreeMap::new();
    for (config, psi) in &state.amplitudes {
        let pos = config.iter().position(|(s, _)| *s == site);
        let source = pos.map_or((0, 0), |p| config[p].1);
        let mut rest = config.clone();
        if let Some(p) = pos {
            rest.remove(p);
        }
        groups.entry(rest).or_default().push((source, psi));
    }

    let mut kept: BTreeMap<ChainConfig, Vec<C64>> = BTreeMap::new();
    let mut lost = 0.0;
    for (rest, sources) in groups {
        for target in table.pairs() {
            let mut out = vec![ZERO; d];
            let mut touched = false;
            for &(source, psi) in &sources {
                let c = table.get(source, target);
                if c.max_abs() == 0.0 {
                    continue;
                }
                touched = true;
                for (r, a) in out.iter_mut().enumerate() {
                    for (col, z) in psi.iter().enumerate() {
                        *a += c[(r, col)] * z;
                    }
                }
            }
            if !touched {
                continue;
            }
            let excitations = rest.len() + usize::from(target != (0, 0));
            if excitations > k_max {
                lost += out.iter().map(|z| z.norm_sqr()).sum::<f64>();
                continue;
            }
            let mut config = rest.clone();
            if target != (0, 0) {
                let at = config.partition_point(|(s, _)| *s < site);
                config.insert(at, (site, target));
            }
            kept.insert(config, out);
        }
    }
    (SectorState { d, amplitudes: kept }, lost)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorRow {
    pub h: f64,
    pub sites: usize,
    pub total_discarded: f64,
    pub accounting_residual: f64,
}

/// Total discarded weight over `⌊t/h⌋` sites for each grid point, starting
/// from `ψ ⊗ vacuum`.
pub fn sector_discard_sweep(
    sys: &SystemSpec,
    bath: &BathSpec,
    psi: &[C64],
    t: f64,
    k_max: usize,
    grid: &HGrid,
    budget: usize,
) -> Result<Vec<SectorRow>> {
    grid.points()
        .par_iter()
        .map(|&h| {
            let cp = CouplingPoint::new(h, bath.beta())?;
            let sites = step_count(t, h);
            let init = SectorState::product(Vec::new(), psi.to_vec());
            let run = sector_simulate(sys, bath, &cp, sites, k_max, &init, budget)?;
            Ok(SectorRow {
                h,
                sites,
                total_discarded: run.total_discarded(),
                accounting_residual: run.accounting_residual(),
            })
        })
        .collect()
}
