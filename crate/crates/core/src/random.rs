//! Seeded sampling of the random objects the test suites and the optimizer
//! consume: Ginibre matrices, Haar unitaries, density operators, simplex
//! points.
//!
//! Everything is driven by ChaCha12 seeded from a caller-supplied 64-bit
//! seed, so any run is reproducible from its report. Independent worker
//! streams (optimizer restarts, retry rounds) use ChaCha's stream counter
//! rather than ad-hoc seed arithmetic.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMat, CVec};

/// The crate-wide seeded generator.
pub type SeededRng = ChaCha12Rng;

/// Generator name recorded in run manifests.
pub const GENERATOR: &str = "chacha12";

pub fn seeded(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn seeded_stream(seed: u64, stream: u64) -> SeededRng {
    let mut rng = SeededRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard complex Gaussian (variance 1 per complex entry).
pub fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre(rows: usize, cols: usize, rng: &mut impl Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of the
/// R diagonal absorbed into Q.
pub fn random_unitary(n: usize, rng: &mut impl Rng) -> CMat {
    let qr = ginibre(n, n, rng).qr();
    let r_diag: Vec<Complex64> = qr.r().diagonal().iter().copied().collect();
    let mut q = qr.q();
    for (j, d) in r_diag.iter().enumerate() {
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let col = q.column(j) * phase;
        q.set_column(j, &col);
    }
    q
}

/// Normalized Gaussian amplitude vector.
pub fn random_pure_amplitudes(n: usize, rng: &mut impl Rng) -> CVec {
    let v = DVector::from_fn(n, |_, _| complex_gaussian(rng));
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

/// Unit-trace PSD matrix of the given rank, `G G* / tr(G G*)` with `G`
/// Ginibre of shape `n x rank`.
pub fn random_density_mat(n: usize, rank: usize, rng: &mut impl Rng) -> CMat {
    let g = ginibre(n, rank.clamp(1, n), rng);
    let m = &g * g.adjoint();
    let tr: f64 = m.diagonal().iter().map(|z| z.re).sum();
    m / Complex64::new(tr, 0.0)
}

/// Uniform point of the probability simplex (Dirichlet(1,...,1)) via
/// normalized exponentials.
pub fn random_simplex(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>();
            -(1.0 - u).ln()
        })
        .collect();
    let s: f64 = p.iter().sum();
    for x in &mut p {
        *x /= s;
    }
    p
}
