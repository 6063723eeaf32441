//! JSON run configuration and its validation into core types.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use repint::instances::random_instance;
use repint::{BathSpec, ComplexMatrix, DensityMatrix, HGrid, SystemSpec, C64};

use crate::suites::{Suite, Tolerances};

/// A complex number written as `[re, im]`.
type Entry = [f64; 2];
/// A row-major matrix of complex entries.
type RawMatrix = Vec<Vec<Entry>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSystem {
    pub h_s: RawMatrix,
    /// `d_blocks[i-1][j-1]` is `D_ij`.
    pub d_blocks: Vec<Vec<RawMatrix>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBath {
    pub gamma: Vec<f64>,
    pub beta: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRandom {
    pub n: usize,
    pub d: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    pub start: f64,
    pub ratio: f64,
    pub count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub system: Option<RawSystem>,
    pub bath: Option<RawBath>,
    /// Draws the instance from the seeded generator instead of `system`/`bath`.
    pub random: Option<RawRandom>,
    pub seed: Option<u64>,
    pub grid: RawGrid,
    /// Grid for coeff-sweep; defaults to `grid`.
    pub coefficient_grid: Option<RawGrid>,
    pub t: f64,
    pub rho0: RawMatrix,
    #[serde(default)]
    pub suites: Vec<String>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

/// Overrides coming from the command line.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub suites: Vec<String>,
    pub out: Option<PathBuf>,
    pub grid_count: Option<usize>,
    pub tolerances: Vec<(String, f64)>,
}

#[derive(Debug)]
pub struct RunConfig {
    pub system: SystemSpec,
    pub bath: BathSpec,
    pub seed: Option<u64>,
    pub grid: HGrid,
    pub grid_spec: RawGrid,
    pub coefficient_grid: HGrid,
    pub coefficient_grid_spec: RawGrid,
    pub t: f64,
    pub rho0: DensityMatrix,
    pub suites: Vec<Suite>,
    pub out: PathBuf,
    pub tolerances: Tolerances,
}

fn field_err(field: &str, e: impl std::fmt::Display) -> anyhow::Error {
    anyhow!("config field `{field}`: {e}")
}

fn matrix(field: &str, raw: &RawMatrix) -> Result<ComplexMatrix> {
    let rows: Vec<Vec<C64>> = raw
        .iter()
        .map(|r| r.iter().map(|&[re, im]| C64::new(re, im)).collect())
        .collect();
    ComplexMatrix::from_rows(&rows).map_err(|e| field_err(field, e))
}

fn grid(field: &str, g: RawGrid, count_override: Option<usize>) -> Result<(HGrid, RawGrid)> {
    let g = RawGrid {
        count: count_override.unwrap_or(g.count),
        ..g
    };
    let hg = HGrid::new(g.start, g.ratio, g.count).map_err(|e| field_err(field, e))?;
    Ok((hg, g))
}

pub fn load(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

impl RunConfig {
    pub fn from_raw(raw: RawConfig, ov: &Overrides, config_dir: &Path) -> Result<Self> {
        let (system, bath) = match (&raw.random, &raw.system, &raw.bath) {
            (Some(r), None, None) => {
                let seed = raw.seed.ok_or_else(|| field_err("seed", "required with `random`"))?;
                random_instance(seed, r.n, r.d).map_err(|e| field_err("random", e))?
            }
            (None, Some(s), Some(b)) => {
                let h_s = matrix("system.h_s", &s.h_s)?;
                let mut blocks = Vec::with_capacity(s.d_blocks.len());
                for (i, row) in s.d_blocks.iter().enumerate() {
                    let mut out = Vec::with_capacity(row.len());
                    for (j, m) in row.iter().enumerate() {
                        out.push(matrix(&format!("system.d_blocks[{i}][{j}]"), m)?);
                    }
                    blocks.push(out);
                }
                let system = SystemSpec::new(h_s, blocks).map_err(|e| field_err("system.d_blocks", e))?;
                let bath = BathSpec::new(b.gamma.clone(), b.beta).map_err(|e| field_err("bath", e))?;
                system.check_bath(&bath).map_err(|e| field_err("bath.gamma", e))?;
                (system, bath)
            }
            _ => bail!("config must give either `system` and `bath`, or `random` with `seed`"),
        };

        let (grid_h, grid_spec) = grid("grid", raw.grid, ov.grid_count)?;
        let (coeff_h, coeff_spec) = grid("coefficient_grid", raw.coefficient_grid.unwrap_or(raw.grid), ov.grid_count)?;

        if !(raw.t.is_finite() && raw.t > 0.0) {
            return Err(field_err("t", format!("must be positive, got {}", raw.t)));
        }
        let rho = matrix("rho0", &raw.rho0)?;
        if rho.rows() != system.d() {
            return Err(field_err(
                "rho0",
                format!("dimension {} does not match H_S dimension {}", rho.rows(), system.d()),
            ));
        }
        let rho0 = DensityMatrix::new(rho).map_err(|e| field_err("rho0", e))?;

        let names = if ov.suites.is_empty() { &raw.suites } else { &ov.suites };
        let suites = if names.is_empty() {
            Suite::ALL.to_vec()
        } else {
            let mut v = Vec::new();
            for name in names {
                let s = Suite::parse(name).ok_or_else(|| {
                    field_err("suites", format!("unknown suite `{name}` (known: {})", Suite::names().join(", ")))
                })?;
                if !v.contains(&s) {
                    v.push(s);
                }
            }
            v.sort();
            v
        };
        for s in &suites {
            let count = if *s == Suite::CoeffSweep { coeff_spec.count } else { grid_spec.count };
            if s.fits_rates() && count < s.min_points() {
                return Err(field_err(
                    if *s == Suite::CoeffSweep { "coefficient_grid.count" } else { "grid.count" },
                    format!("suite {} needs at least {} grid points, got {count}", s.name(), s.min_points()),
                ));
            }
        }

        let mut tolerances = Tolerances::default();
        for (name, value) in raw.tolerances.iter().map(|(k, v)| (k.as_str(), *v)) {
            tolerances.set(name, value).map_err(|e| field_err("tolerances", e))?;
        }
        for (name, value) in &ov.tolerances {
            tolerances.set(name, *value).map_err(|e| field_err("--tol", e))?;
        }

        let out = match (&ov.out, &raw.out) {
            (Some(o), _) => o.clone(),
            (None, Some(o)) if o.is_relative() => config_dir.join(o),
            (None, Some(o)) => o.clone(),
            (None, None) => PathBuf::from("repint-out"),
        };

        Ok(Self {
            system,
            bath,
            seed: raw.seed,
            grid: grid_h,
            grid_spec,
            coefficient_grid: coeff_h,
            coefficient_grid_spec: coeff_spec,
            t: raw.t,
            rho0,
            suites,
            out,
            tolerances,
        })
    }
}

/// Parses `name=value`.
pub fn parse_tol(s: &str) -> std::result::Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = value.trim().parse().map_err(|e| format!("bad value in `{s}`: {e}"))?;
    Ok((name.trim().to_string(), v))
}
