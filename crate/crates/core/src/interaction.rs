//! The repeated-interaction Hamiltonian on `system ⊗ bath`, the step unitary
//! `U = e^{−ihH}` with its block decomposition `U = Σ U^i_j ⊗ a^i_j`, and the
//! scattering matrix `S = e^{−iD}` that the excited sector tends to.
//!
//! Block convention: `U^i_j` multiplies `a^i_j = |e_j⟩⟨e_i|`, so it sits in
//! bath row `j` and bath column `i` (column = source level).

use crate::bath::{bath_hamiltonian, discrete_noise, BathSpec, CouplingPoint};
use crate::error::{Error, Result};
use crate::matrix::{
    hermitian_residual, kron, mat_exp, spectral_norm, ComplexMatrix, Norm, C64, I,
};

const SPEC_HERMITIAN_TOL: f64 = 1e-13;
const VACUUM_DECOUPLING_TOL: f64 = 1e-12;

/// System Hamiltonian and interaction blocks `D_ij`, `1 <= i, j <= n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    h_s: ComplexMatrix,
    d_blocks: Vec<Vec<ComplexMatrix>>,
}

impl SystemSpec {
    /// `d_blocks[i-1][j-1]` is `D_ij`. Requires `H_S = H_S†` and
    /// `D_ij = D_ji†`, both within `1e-13`.
    pub fn new(h_s: ComplexMatrix, d_blocks: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        let d = h_s.dim()?;
        if d == 0 {
            return Err(Error::invalid("H_S", "system dimension must be positive"));
        }
        let res = hermitian_residual(&h_s, Norm::Spectral)?;
        if res > SPEC_HERMITIAN_TOL {
            return Err(Error::invalid("H_S", format!("not Hermitian (residual {res:.3e})")));
        }
        let n = d_blocks.len();
        if n == 0 {
            return Err(Error::invalid("D", "need an n x n array of blocks with n >= 1"));
        }
        for (i, row) in d_blocks.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(
                    format!("D[{}]", i + 1),
                    format!("row has {} blocks, expected {n}", row.len()),
                ));
            }
            for (j, block) in row.iter().enumerate() {
                if block.rows() != d || block.cols() != d {
                    return Err(Error::invalid(
                        format!("D[{}][{}]", i + 1, j + 1),
                        format!("block is {}x{}, expected {d}x{d}", block.rows(), block.cols()),
                    ));
                }
            }
        }
        for i in 0..n {
            for j in i..n {
                let res = spectral_norm(&(&d_blocks[i][j] - &d_blocks[j][i].adjoint()));
                if res > SPEC_HERMITIAN_TOL {
                    return Err(Error::invalid(
                        format!("D[{}][{}]", i + 1, j + 1),
                        format!(
                            "D blocks must satisfy D_ij = D_ji^* (residual {res:.3e} against D[{}][{}])",
                            j + 1,
                            i + 1
                        ),
                    ));
                }
            }
        }
        Ok(Self { h_s, d_blocks })
    }

    /// No coupling: every `D_ij = 0`.
    pub fn decoupled(h_s: ComplexMatrix, n: usize) -> Result<Self> {
        let d = h_s.dim()?;
        Self::new(h_s, vec![vec![ComplexMatrix::zeros(d, d); n]; n])
    }

    pub fn d(&self) -> usize {
        self.h_s.rows()
    }

    pub fn n(&self) -> usize {
        self.d_blocks.len()
    }

    pub fn h_s(&self) -> &ComplexMatrix {
        &self.h_s
    }

    /// `D_ij` with 1-based indices.
    pub fn d_block(&self, i: usize, j: usize) -> &ComplexMatrix {
        &self.d_blocks[i - 1][j - 1]
    }

    pub fn d_blocks(&self) -> &[Vec<ComplexMatrix>] {
        &self.d_blocks
    }

    /// The `nd x nd` operator `D = Σ_{i,j} D_ij ⊗ a^i_j` on
    /// `system ⊗ span{e_1..e_n}`, excited index running fastest.
    pub fn interaction_matrix(&self) -> ComplexMatrix {
        let (n, d) = (self.n(), self.d());
        ComplexMatrix::from_fn(n * d, n * d, |r, c| {
            let (s_row, target) = (r / n, r % n);
            let (s_col, source) = (c / n, c % n);
            self.d_blocks[source][target][(s_row, s_col)]
        })
    }

    pub fn check_bath(&self, bath: &BathSpec) -> Result<()> {
        if bath.n() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "D has {} x {} blocks but the bath has n = {}",
                self.n(),
                self.n(),
                bath.n()
            )));
        }
        Ok(())
    }
}

/// `H = H_S⊗I + I⊗H_R + (1/h) Σ D_ij⊗a^i_j`, stored as the free part and the
/// unscaled coupling so that `hH` can be formed without dividing by `h`.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    free: ComplexMatrix,
    coupling: ComplexMatrix,
    h: f64,
    d: usize,
    levels: usize,
}

impl Hamiltonian {
    /// The full Hamiltonian matrix, coupling scaled by `1/h`.
    pub fn matrix(&self) -> ComplexMatrix {
        &self.free + &self.coupling.scale_real(1.0 / self.h)
    }

    /// `hH = h(H_S⊗I + I⊗H_R) + Σ D_ij⊗a^i_j`.
    pub fn step_generator(&self) -> ComplexMatrix {
        &self.free.scale_real(self.h) + &self.coupling
    }

    pub fn free_part(&self) -> &ComplexMatrix {
        &self.free
    }

    pub fn coupling(&self) -> &ComplexMatrix {
        &self.coupling
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn levels(&self) -> usize {
        self.levels
    }
}

pub fn assemble_hamiltonian(
    sys: &SystemSpec,
    bath: &BathSpec,
    cp: &CouplingPoint,
) -> Result<Hamiltonian> {
    sys.check_bath(bath)?;
    let (n, d) = (bath.n(), sys.d());
    let levels = n + 1;
    let free = &kron(sys.h_s(), &ComplexMatrix::identity(levels))
        + &kron(&ComplexMatrix::identity(d), &bath_hamiltonian(bath));
    let mut coupling = ComplexMatrix::zeros(d * levels, d * levels);
    for i in 1..=n {
        for j in 1..=n {
            coupling += &kron(sys.d_block(i, j), &discrete_noise(n, i, j)?);
        }
    }
    Ok(Hamiltonian {
        free,
        coupling,
        h: cp.h(),
        d,
        levels,
    })
}

/// `U = e^{−ihH}` and its `(n+1) x (n+1)` array of `d x d` blocks.
#[derive(Debug, Clone)]
pub struct StepUnitary {
    u: ComplexMatrix,
    blocks: Vec<ComplexMatrix>,
    d: usize,
    levels: usize,
    h: f64,
}

impl StepUnitary {
    pub fn from_matrix(u: ComplexMatrix, d: usize, levels: usize, h: f64) -> Result<Self> {
        if u.dim()? != d * levels {
            return Err(Error::DimensionMismatch(format!(
                "unitary is {}-dimensional, expected {d}*{levels}",
                u.rows()
            )));
        }
        let mut blocks = Vec::with_capacity(levels * levels);
        for i in 0..levels {
            for j in 0..levels {
                let rows: Vec<usize> = (0..d).map(|s| s * levels + j).collect();
                let cols: Vec<usize> = (0..d).map(|s| s * levels + i).collect();
                blocks.push(u.select(&rows, &cols));
            }
        }
        Ok(Self {
            u,
            blocks,
            d,
            levels,
            h,
        })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.u
    }

    /// `U^i_j`, the coefficient of `a^i_j`.
    pub fn block(&self, i: usize, j: usize) -> &ComplexMatrix {
        &self.blocks[i * self.levels + j]
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn n(&self) -> usize {
        self.levels - 1
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `Σ_{i,j} U^i_j ⊗ a^i_j`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.n();
        let mut acc = ComplexMatrix::zeros(self.u.rows(), self.u.cols());
        for i in 0..self.levels {
            for j in 0..self.levels {
                acc += &kron(self.block(i, j), &discrete_noise(n, i, j).expect("in range"));
            }
        }
        acc
    }

    /// The `nd x nd` excited-sector block, ordered like
    /// [`SystemSpec::interaction_matrix`].
    pub fn excited_block(&self) -> ComplexMatrix {
        let idx = self.excited_indices();
        self.u.select(&idx, &idx)
    }

    fn excited_indices(&self) -> Vec<usize> {
        (0..self.d)
            .flat_map(|s| (1..self.levels).map(move |b| s * self.levels + b))
            .collect()
    }

    fn vacuum_indices(&self) -> Vec<usize> {
        (0..self.d).map(|s| s * self.levels).collect()
    }

    /// Largest spectral norm of the two blocks coupling the vacuum level to
    /// the excited sector.
    pub fn vacuum_coupling_norm(&self) -> f64 {
        let (vac, exc) = (self.vacuum_indices(), self.excited_indices());
        spectral_norm(&self.u.select(&vac, &exc)).max(spectral_norm(&self.u.select(&exc, &vac)))
    }
}

/// Exponentiates `−i hH`. Fails if the vacuum and excited sectors are not
/// decoupled to `1e-12`, which the structure of `H` guarantees.
pub fn unitary_step(ham: &Hamiltonian) -> Result<StepUnitary> {
    let u = mat_exp(&ham.step_generator().scale(-I))?;
    let step = StepUnitary::from_matrix(u, ham.d(), ham.levels(), ham.h())?;
    let leak = step.vacuum_coupling_norm();
    if leak > VACUUM_DECOUPLING_TOL {
        return Err(Error::invalid(
            "step unitary",
            format!("vacuum sector couples to excited levels (norm {leak:.3e})"),
        ));
    }
    Ok(step)
}

/// Convenience: assemble and exponentiate in one call.
pub fn step_unitary_for(sys: &SystemSpec, bath: &BathSpec, cp: &CouplingPoint) -> Result<StepUnitary> {
    unitary_step(&assemble_hamiltonian(sys, bath, cp)?)
}

/// `e^{−iD}` on `system ⊗ span{e_1..e_n}`.
#[derive(Debug, Clone)]
pub struct Scattering {
    matrix: ComplexMatrix,
    n: usize,
    d: usize,
}

impl Scattering {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// `S^k_l` (1-based), the coefficient of `a^k_l`: the amplitude for an
    /// incoming excitation `k` to leave as `l`.
    pub fn block(&self, k: usize, l: usize) -> ComplexMatrix {
        let rows: Vec<usize> = (0..self.d).map(|s| s * self.n + (l - 1)).collect();
        let cols: Vec<usize> = (0..self.d).map(|s| s * self.n + (k - 1)).collect();
        self.matrix.select(&rows, &cols)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }
}

pub fn scattering_matrix(sys: &SystemSpec) -> Result<Scattering> {
    let matrix = mat_exp(&sys.interaction_matrix().scale(-I))?;
    Ok(Scattering {
        matrix,
        n: sys.n(),
        d: sys.d(),
    })
}

/// Residuals of the two-block expansion of `U`, spectral norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockResiduals {
    /// Coupling between vacuum and excited sectors.
    pub offdiag: f64,
    /// `‖U^0_0 − (I − ih(H_S + γ_0 I))‖`, expected `O(h²)`.
    pub topleft: f64,
    /// `‖B(h) − e^{−iD}‖` for the excited block `B(h)`, expected `O(h)`.
    pub bottomright: f64,
}

pub fn block_expansion_residuals(
    sys: &SystemSpec,
    bath: &BathSpec,
    cp: &CouplingPoint,
) -> Result<BlockResiduals> {
    let step = step_unitary_for(sys, bath, cp)?;
    let scatter = scattering_matrix(sys)?;
    Ok(block_residuals_from(&step, sys, bath, &scatter))
}

pub(crate) fn block_residuals_from(
    step: &StepUnitary,
    sys: &SystemSpec,
    bath: &BathSpec,
    scatter: &Scattering,
) -> BlockResiduals {
    let d = sys.d();
    let h = step.h();
    let h_eff = effective_hamiltonian(sys, bath);
    let first_order = &ComplexMatrix::identity(d) - &h_eff.scale(C64::new(0.0, h));
    BlockResiduals {
        offdiag: step.vacuum_coupling_norm(),
        topleft: spectral_norm(&(step.block(0, 0) - &first_order)),
        bottomright: spectral_norm(&(&step.excited_block() - scatter.matrix())),
    }
}

/// `H_S + γ_0 I`.
pub fn effective_hamiltonian(sys: &SystemSpec, bath: &BathSpec) -> ComplexMatrix {
    sys.h_s() + &ComplexMatrix::identity(sys.d()).scale_real(bath.gamma()[0])
}
