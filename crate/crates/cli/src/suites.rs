//! The verification suites. Each one produces a CSV body and a verdict.

use std::fmt::Write as _;

use anyhow::{bail, Result};

use repint::dynamics::{collision_scattering_check, reduced_error_sweep, step_channel};
use repint::fit::decreasing_tail;
use repint::gns::{gns_basis, lambda_scaling_table, max_gram_deviation};
use repint::limit::{assemble_limit_generator, block_expansion_sweep, hp_structure_check, sweep_and_fit};
use repint::noisealg::{aggregated_ito_check, verify_chain_actions, verify_homomorphism, AggregationRange};
use repint::tolerances as tol;
use repint::{gibbs_weights, CoeffClass, CouplingPoint, SystemSpec};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    GnsCheck,
    LemmaSweep,
    BlockCheck,
    CoeffSweep,
    HpCheck,
    DynamicsCompare,
    ScatterCheck,
    NoiseAlgebra,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::GnsCheck,
        Suite::LemmaSweep,
        Suite::BlockCheck,
        Suite::CoeffSweep,
        Suite::HpCheck,
        Suite::DynamicsCompare,
        Suite::ScatterCheck,
        Suite::NoiseAlgebra,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::GnsCheck => "gns-check",
            Suite::LemmaSweep => "lemma-sweep",
            Suite::BlockCheck => "block-check",
            Suite::CoeffSweep => "coeff-sweep",
            Suite::HpCheck => "hp-check",
            Suite::DynamicsCompare => "dynamics-compare",
            Suite::ScatterCheck => "scatter-check",
            Suite::NoiseAlgebra => "noise-algebra",
        }
    }

    pub fn parse(s: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|x| x.name() == s)
    }

    pub fn names() -> Vec<&'static str> {
        Suite::ALL.iter().map(|s| s.name()).collect()
    }

    pub fn header(self) -> &'static str {
        match self {
            Suite::LemmaSweep => "quantity,i,k,j2,h,value,slope_fit,classification",
            Suite::CoeffSweep => "i,j,k,l,epsilon,h,residual,limit_norm,slope_fit,class_label",
            Suite::DynamicsCompare => "h,steps,sup_trace_error,slope_fit",
            Suite::BlockCheck => "h,offdiag,topleft,bottomright",
            Suite::GnsCheck => "n,beta,h,max_gram_deviation",
            Suite::HpCheck => "drift_skew,gauge_unitary,annihilation_zero,creation_zero",
            Suite::NoiseAlgebra => "j,k,l,m,expected,actual,match",
            Suite::ScatterCheck => "h,residual,slope_fit",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.name())
    }

    /// Whether the suite fits a rate and so needs a minimum grid size.
    pub fn fits_rates(self) -> bool {
        !matches!(self, Suite::GnsCheck | Suite::HpCheck | Suite::NoiseAlgebra)
    }

    pub fn min_points(self) -> usize {
        match self {
            Suite::CoeffSweep => repint::limit::MIN_SWEEP_POINTS,
            _ => 4,
        }
    }
}

/// Thresholds used by the suites, overridable by name.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    values: Vec<(&'static str, f64)>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            values: vec![
                ("gram", tol::GRAM),
                ("lemma_zero", tol::LEMMA_ZERO),
                ("block_offdiag", tol::BLOCK_OFFDIAG),
                ("block_slope", tol::BLOCK_SLOPE),
                ("coeff_zero", tol::COEFF_ZERO),
                ("half_class_last", tol::HALF_CLASS_LAST),
                ("drift_last_relative", tol::DRIFT_LAST_RELATIVE),
                ("gauge_min_slope", tol::GAUGE_MIN_SLOPE),
                ("trace_preservation", tol::TRACE_PRESERVATION),
                ("choi_min_eigenvalue", tol::CHOI_MIN_EIGENVALUE),
                ("dynamics_slope", tol::DYNAMICS_SLOPE),
                ("dynamics_last", tol::DYNAMICS_LAST),
                ("dynamics_control", tol::DYNAMICS_CONTROL),
                ("drift_skew", tol::DRIFT_SKEW),
                ("gauge_unitary", tol::GAUGE_UNITARY),
            ],
        }
    }
}

impl Tolerances {
    pub fn get(&self, name: &str) -> f64 {
        self.values
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| panic!("unknown tolerance {name}"))
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            bail!("tolerance {name} must be finite, got {value}");
        }
        let known: Vec<&str> = self.values.iter().map(|(n, _)| *n).collect();
        match self.values.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => {
                slot.1 = value;
                Ok(())
            }
            None => bail!("unknown tolerance `{name}` (known: {})", known.join(", ")),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        self.values.iter().copied()
    }
}

/// 17 significant digits, enough to round-trip any double.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug)]
pub struct SuiteResult {
    pub suite: Suite,
    pub passed: bool,
    /// Lines for report.txt; the first is the summary.
    pub details: Vec<String>,
    pub csv: String,
}

impl SuiteResult {
    fn new(suite: Suite) -> Self {
        Self {
            suite,
            passed: true,
            details: Vec::new(),
            csv: format!("{}\n", suite.header()),
        }
    }

    fn row(&mut self, fields: &[String]) {
        self.csv.push_str(&fields.join(","));
        self.csv.push('\n');
    }

    fn check(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.details.push(format!("[{}] {line}", if ok { "ok" } else { "FAIL" }));
    }
}

pub fn run_suite(suite: Suite, cfg: &RunConfig) -> Result<SuiteResult> {
    match suite {
        Suite::GnsCheck => gns_check(cfg),
        Suite::LemmaSweep => lemma_sweep(cfg),
        Suite::BlockCheck => block_check(cfg),
        Suite::CoeffSweep => coeff_sweep(cfg),
        Suite::HpCheck => hp_check(cfg),
        Suite::DynamicsCompare => dynamics_compare(cfg),
        Suite::ScatterCheck => scatter_check(cfg),
        Suite::NoiseAlgebra => noise_algebra(cfg),
    }
}

fn gns_check(cfg: &RunConfig) -> Result<SuiteResult> {
    let mut r = SuiteResult::new(Suite::GnsCheck);
    let bath = &cfg.bath;
    let mut worst = 0.0f64;
    for h in cfg.grid.points() {
        let cp = CouplingPoint::new(h, bath.beta())?;
        let basis = gns_basis(&gibbs_weights(bath, &cp)?)?;
        let dev = max_gram_deviation(&basis);
        worst = worst.max(dev);
        r.row(&[bath.n().to_string(), num(bath.beta()), num(h), num(dev)]);
    }
    let limit = cfg.tolerances.get("gram");
    r.check(worst < limit, format!("max |Gram - I| = {worst:.3e} (< {limit:e})"));
    Ok(r)
}

fn lemma_sweep(cfg: &RunConfig) -> Result<SuiteResult> {
    let mut r = SuiteResult::new(Suite::LemmaSweep);
    let rows = lambda_scaling_table(&cfg.bath, &cfg.grid)?;
    let zero = cfg.tolerances.get("lemma_zero");
    let mut mismatched = Vec::new();
    for row in &rows {
        let (i, k, j2) = row.quantity.indices();
        let slope = opt_num(row.fit.map(|f| f.slope));
        for (h, v) in row.hs.iter().zip(&row.values) {
            r.row(&[
                row.quantity.name().to_string(),
                i.to_string(),
                k.to_string(),
                j2.map(|j| j.to_string()).unwrap_or_default(),
                num(*h),
                num(*v),
                slope.clone(),
                row.observed.label().to_string(),
            ]);
        }
        let zero_ok = !row.exact_zero || row.values.iter().all(|v| v.abs() < zero);
        if !row.matches_claim() || !zero_ok {
            mismatched.push(format!(
                "{}{:?}: observed {}, expected {}",
                row.quantity.name(),
                row.quantity.indices(),
                row.observed.label(),
                row.quantity.claimed().label()
            ));
        }
    }
    r.check(
        mismatched.is_empty(),
        format!("{} quantities classified, {} mismatched", rows.len(), mismatched.len()),
    );
    r.details.extend(mismatched.into_iter().map(|m| format!("  {m}")));
    Ok(r)
}

fn block_check(cfg: &RunConfig) -> Result<SuiteResult> {
    let mut r = SuiteResult::new(Suite::BlockCheck);
    let s = block_expansion_sweep(&cfg.system, &cfg.bath, &cfg.grid)?;
    for (h, b) in s.hs.iter().zip(&s.residuals) {
        r.row(&[num(*h), num(b.offdiag), num(b.topleft), num(b.bottomright)]);
    }
    let off = s.residuals.iter().map(|b| b.offdiag).fold(0.0, f64::max);
    let off_tol = cfg.tolerances.get("block_offdiag");
    let slope_tol = cfg.tolerances.get("block_slope");
    let top = s.topleft_fit.map_or(f64::NAN, |f| f.slope);
    let bottom = s.bottomright_fit.map_or(f64::NAN, |f| f.slope);
    r.check(off < off_tol, format!("max off-diagonal block {off:.3e} (< {off_tol:e})"));
    r.check((top - 2.0).abs() <= slope_tol, format!("topleft slope {top:.4} (2 +- {slope_tol})"));
    r.check(
        (bottom - 1.0).abs() <= slope_tol,
        format!("bottomright slope {bottom:.4} (1 +- {slope_tol})"),
    );
    Ok(r)
}

fn coeff_sweep(cfg: &RunConfig) -> Result<SuiteResult> {
    let mut r = SuiteResult::new(Suite::CoeffSweep);
    let sweep = sweep_and_fit(&cfg.system, &cfg.bath, &cfg.coefficient_grid)?;
    let t = &cfg.tolerances;
    let mut failed = Vec::new();
    for row in &sweep.rows {
        let ((i, j), (k, l)) = (row.source, row.target);
        let slope = opt_num(row.fit.map(|f| f.slope));
        for (h, res) in sweep.hs.iter().zip(&row.residuals) {
            r.row(&[
                i.to_string(),
                j.to_string(),
                k.to_string(),
                l.to_string(),
                num(row.epsilon),
                num(*h),
                num(*res),
                num(row.limit_norm),
                slope.clone(),
                row.class.label().to_string(),
            ]);
        }
        let last = *row.residuals.last().expect("grid is non-empty");
        let max = row.residuals.iter().copied().fold(0.0, f64::max);
        let threshold_ok = match row.class {
            CoeffClass::VacuumZero | CoeffClass::StructuralZero => max < t.get("coeff_zero"),
            CoeffClass::VacuumJump { .. } | CoeffClass::VacuumDiagonal { .. } => {
                last < t.get("half_class_last") && decreasing_tail(&row.residuals, 4)
            }
            CoeffClass::Drift => {
                decreasing_tail(&row.residuals, 4) && last < t.get("drift_last_relative") * sweep.h_eff_norm
            }
            CoeffClass::Gauge => {
                max < t.get("coeff_zero") || row.fit.is_some_and(|f| f.slope >= t.get("gauge_min_slope"))
            }
            CoeffClass::GroundReturn | CoeffClass::Cross { .. } => true,
        };
        if !(threshold_ok && row.passed) {
            failed.push(format!(
                "({i},{j})->({k},{l}) class {}: last residual {last:.3e}, slope {}, {}",
                row.class.label(),
                row.fit.map_or("none".to_string(), |f| format!("{:.4}", f.slope)),
                row.note
            ));
        }
    }
    r.check(
        failed.is_empty(),
        format!("{} quadruples on {} grid points, {} failed", sweep.rows.len(), sweep.hs.len(), failed.len()),
    );
    for c in sweep.class_summaries() {
        r.details.push(format!(
            "  class {}: {} quadruples, {} failed, worst last residual {:.3e}, min slope {}",
            c.label,
            c.count,
            c.failed,
            c.worst_last_residual,
            c.min_slope.map_or("n/a".to_string(), |s| format!("{s:.4}"))
        ));
    }
    r.details.extend(failed.into_iter().map(|f| format!("  {f}")));
    Ok(r)
}

fn hp_check(cfg: &RunConfig) -> Result<SuiteResult> {
    let mut r = SuiteResult::new(Suite::HpCheck);
    let hp = hp_structure_check(&assemble_limit_generator(&cfg.system, &cfg.bath)?);
    r.row(&[
        num(hp.drift_skew),
        num(hp.gauge_unitary),
        hp.annihilation_zero.to_string(),
        hp.creation_zero.to_string(),
    ]);
    let skew = cfg.tolerances.get("drift_skew");
    let unitary = cfg.tolerances.get("gauge_unitary");
    r.check(hp.drift_skew < skew, format!("drift skew {:.3e} (< {skew:e})", hp.drift_skew));
    r.check(
        hp.gauge_unitary < unitary,
        format!("gauge unitarity residual {:.3e} (< {unitary:e})", hp.gauge_unitary),
    );
    r.check(
        hp.annihilation_zero && hp.creation_zero,
        format!(
            "creation/annihilation coefficients vanish: {}/{}",
            hp.creation_zero, hp.annihilation_zero
        ),
    );
    Ok(r)
}

fn dynamics_compare(cfg: &RunConfig) -> Result<SuiteResult> {
    let mut r = SuiteResult::new(Suite::DynamicsCompare);
    let t = &cfg.tolerances;
    let sweep = reduced_error_sweep(&cfg.system, &cfg.bath, &cfg.rho0, cfg.t, &cfg.grid)?;
    let slope = sweep.fit.map(|f| f.slope);
    for row in &sweep.rows {
        r.row(&[num(row.h), row.steps.to_string(), num(row.sup_error), opt_num(slope)]);
    }
    let s = slope.unwrap_or(f64::NAN);
    let band = t.get("dynamics_slope");
    r.check((s - 1.0).abs() <= band, format!("error slope {s:.4} (1 +- {band})"));
    let last = sweep.rows.last().expect("grid is non-empty");
    let last_tol = t.get("dynamics_last");
    r.check(
        last.sup_error < last_tol,
        format!("error at h = {:e}: {:.3e} (< {last_tol:e})", last.h, last.sup_error),
    );

    let free = SystemSpec::decoupled(cfg.system.h_s().clone(), cfg.bath.n())?;
    let control = reduced_error_sweep(&free, &cfg.bath, &cfg.rho0, cfg.t, &cfg.grid)?;
    let control_max = control.rows.iter().map(|r| r.sup_error).fold(0.0, f64::max);
    let control_tol = t.get("dynamics_control");
    r.check(
        control_max < control_tol,
        format!("D = 0 control max error {control_max:.3e} (< {control_tol:e})"),
    );

    let mut worst_tp = 0.0f64;
    let mut worst_choi = f64::INFINITY;
    for h in cfg.grid.points() {
        let ch = step_channel(&cfg.system, &cfg.bath, &CouplingPoint::new(h, cfg.bath.beta())?)?;
        worst_tp = worst_tp.max(ch.trace_preservation_residual());
        worst_choi = worst_choi.min(ch.choi_min_eigenvalue());
    }
    let tp_tol = t.get("trace_preservation");
    let choi_tol = t.get("choi_min_eigenvalue");
    r.check(worst_tp < tp_tol, format!("channel trace preservation {worst_tp:.3e} (< {tp_tol:e})"));
    r.check(
        worst_choi >= choi_tol,
        format!("Choi minimum eigenvalue {worst_choi:.3e} (>= {choi_tol:e})"),
    );
    Ok(r)
}

fn scatter_check(cfg: &RunConfig) -> Result<SuiteResult> {
    let mut r = SuiteResult::new(Suite::ScatterCheck);
    let s = collision_scattering_check(&cfg.system, &cfg.bath, &cfg.grid)?;
    let slope = s.fit.map(|f| f.slope);
    for (h, res) in s.hs.iter().zip(&s.residuals) {
        r.row(&[num(*h), num(*res), opt_num(slope)]);
    }
    let band = cfg.tolerances.get("block_slope");
    let sl = slope.unwrap_or(f64::NAN);
    r.check(
        (sl - 1.0).abs() <= band,
        format!("excited block vs exp(-iD) slope {sl:.4} (1 +- {band})"),
    );
    Ok(r)
}

fn noise_algebra(cfg: &RunConfig) -> Result<SuiteResult> {
    let mut r = SuiteResult::new(Suite::NoiseAlgebra);
    let n = cfg.bath.n();
    let report = aggregated_ito_check(n, AggregationRange::WithGround)?;
    for row in &report.rows {
        r.row(&[
            row.j.to_string(),
            row.k.to_string(),
            row.l.to_string(),
            row.m.to_string(),
            row.expected.to_string(),
            row.actual.to_string(),
            row.matches().to_string(),
        ]);
    }
    let bad = report.rows.iter().filter(|x| !x.matches()).count();
    r.check(
        report.passed(),
        format!("{} aggregated products, {bad} mismatched", report.rows.len()),
    );
    let excited = aggregated_ito_check(n, AggregationRange::Excited)?;
    r.check(
        excited.passed(),
        format!("excited-only aggregation: {} products", excited.rows.len()),
    );
    let (checked, failures) = verify_homomorphism(n);
    r.check(
        failures.is_empty(),
        format!("{checked} gauge-noise products, {} mismatched", failures.len()),
    );
    let mut text = String::new();
    let mut chain_ok = true;
    for levels in 1..=n.min(2) {
        for m in 1..=3 {
            let c = verify_chain_actions(levels, m)?;
            chain_ok &= c.passed();
            let _ = write!(text, " levels={levels},m={m}:{}", if c.passed() { "ok" } else { "FAIL" });
        }
    }
    r.check(chain_ok, format!("chain noise actions{text}"));
    Ok(r)
}
