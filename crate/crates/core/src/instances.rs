//! Named and seeded model instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bath::BathSpec;
use crate::error::Result;
use crate::interaction::SystemSpec;
use crate::matrix::{spectral_norm, ComplexMatrix, C64};

/// Qubit with `H_S = diag(1, −1)`, one excited level at `γ = (0, 1)`,
/// `β = 1` and `D_11 = (π/3) σ_x`.
pub fn q1() -> (SystemSpec, BathSpec) {
    let sx = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).expect("2x2");
    let sys = SystemSpec::new(
        ComplexMatrix::real_diag(&[1.0, -1.0]),
        vec![vec![sx.scale_real(std::f64::consts::PI / 3.0)]],
    )
    .expect("Q1 is a valid system");
    let bath = BathSpec::new(vec![0.0, 1.0], 1.0).expect("Q1 is a valid bath");
    (sys, bath)
}

/// Q1 with the interaction switched off.
pub fn q1_decoupled() -> (SystemSpec, BathSpec) {
    let (sys, bath) = q1();
    (
        SystemSpec::decoupled(sys.h_s().clone(), 1).expect("Q1 is a valid system"),
        bath,
    )
}

fn random_matrix(rng: &mut ChaCha8Rng, d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
    })
}

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> ComplexMatrix {
    let a = random_matrix(rng, d);
    (&a + &a.adjoint()).scale_real(0.5)
}

/// Seeded instance: `β = 1`, `γ_0 = 0`, `γ_j ~ U[0.5, 2]`, Hermitian `H_S`
/// with entries in `[−1, 1]`, and a Hermitian interaction with spectral
/// norm 1.
pub fn random_instance(seed: u64, n: usize, d: usize) -> Result<(SystemSpec, BathSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gamma = vec![0.0];
    gamma.extend((0..n).map(|_| rng.random_range(0.5..=2.0)));
    let h_s = random_hermitian(&mut rng, d);

    let mut blocks = vec![vec![ComplexMatrix::zeros(d, d); n]; n];
    for i in 0..n {
        blocks[i][i] = random_hermitian(&mut rng, d);
        for j in (i + 1)..n {
            let b = random_matrix(&mut rng, d);
            blocks[j][i] = b.adjoint();
            blocks[i][j] = b;
        }
    }
    let norm = spectral_norm(&SystemSpec::new(h_s.clone(), blocks.clone())?.interaction_matrix());
    let scaled = blocks
        .iter()
        .map(|row| row.iter().map(|b| b.scale_real(1.0 / norm)).collect())
        .collect();
    Ok((SystemSpec::new(h_s, scaled)?, BathSpec::new(gamma, 1.0)?))
}

/// `n + 1` energies drawn uniformly from `[lo, hi]`.
pub fn random_gamma(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..=n).map(|_| rng.random_range(lo..=hi)).collect()
}
