//! Isotypic projectors on `(C^d)^{tensor l}` via the character formula, and
//! the spectrum-estimation probability with its exponential tail bound.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::perm::Permutation;
use crate::qcore::{relative_entropy, DensityMatrix, HilbertLayout};
use crate::tol;

use super::frames::{character, enumerate_frames, irrep_dimension, YoungFrame};

/// The projector onto the isotypic component of `(C^d)^{tensor l}` labeled
/// by a Young frame.
#[derive(Clone, Debug)]
pub struct IsotypicProjector {
    frame: YoungFrame,
    matrix: CMat,
}

impl IsotypicProjector {
    pub fn frame(&self) -> &YoungFrame {
        &self.frame
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    /// Rank of the projector (its trace, rounded).
    pub fn rank(&self) -> usize {
        linalg::trace_re(&self.matrix).round() as usize
    }
}

struct ClassSum {
    cycle_type: Vec<usize>,
    sum: CMat,
}

type ClassSumCache = Mutex<HashMap<(usize, usize), Arc<Vec<ClassSum>>>>;

fn class_sum_cache() -> &'static ClassSumCache {
    static CACHE: OnceLock<ClassSumCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Sum of the factor-permutation unitaries over each conjugacy class of
/// S_l, acting on `(C^d)^{tensor l}`. Characters are class functions, so
/// every projector for this `(d, l)` is a short linear combination of these
/// sums; they are cached process-wide.
fn class_sums(d: usize, l: usize) -> Result<Arc<Vec<ClassSum>>> {
    if let Some(hit) = class_sum_cache().lock().unwrap().get(&(d, l)) {
        return Ok(hit.clone());
    }
    let layout = HilbertLayout::new(
        vec![d; l],
        (1..=l).map(|t| format!("q{t}")).collect::<Vec<_>>(),
    )?;
    let dim = layout.ambient_dim();
    let mut sums: Vec<ClassSum> = Vec::new();
    for sigma in Permutation::enumerate(l) {
        let ct = sigma.cycle_type();
        let idx = crate::qcore::permutation_index_map(&layout, sigma.map())?;
        let entry = match sums.iter_mut().find(|c| c.cycle_type == ct) {
            Some(e) => e,
            None => {
                sums.push(ClassSum {
                    cycle_type: ct,
                    sum: CMat::zeros(dim, dim),
                });
                sums.last_mut().unwrap()
            }
        };
        for (r, &c) in idx.iter().enumerate() {
            entry.sum[(r, c)] += Complex64::ONE;
        }
    }
    let arc = Arc::new(sums);
    class_sum_cache()
        .lock()
        .unwrap()
        .entry((d, l))
        .or_insert_with(|| arc.clone());
    Ok(arc)
}

/// Build `P = (dim_lambda / l!) sum_sigma chi_lambda(sigma) U_sigma` on
/// `(C^d)^{tensor l}` and verify it is a Hermitian idempotent.
pub fn isotypic_projector(frame: &YoungFrame, d: usize) -> Result<IsotypicProjector> {
    if frame.rows() > d {
        return Err(Error::domain(format!(
            "frame {frame} has more than {d} rows; no isotypic component in dimension {d}"
        )));
    }
    let l = frame.boxes();
    let sums = class_sums(d, l)?;
    let dim = d.pow(l as u32);
    let mut p = CMat::zeros(dim, dim);
    for class in sums.iter() {
        let chi = character(frame, &class.cycle_type)? as f64;
        if chi != 0.0 {
            p += &class.sum * Complex64::new(chi, 0.0);
        }
    }
    let fact: f64 = (1..=l as u64).product::<u64>() as f64;
    p *= Complex64::new(irrep_dimension(frame)? as f64 / fact, 0.0);

    let herm_dev = linalg::hermiticity_deviation(&p);
    let idem_dev = linalg::max_abs(&(&p * &p - &p));
    if herm_dev > tol::HERMITICITY || idem_dev > 1e-9 {
        return Err(Error::NumericalAssertion(format!(
            "isotypic projector for {frame} failed checks: hermiticity {herm_dev:.2e}, idempotency {idem_dev:.2e}"
        )));
    }
    Ok(IsotypicProjector {
        frame: frame.padded(d)?,
        matrix: p,
    })
}

/// All isotypic projectors for `(C^d)^{tensor l}`, in frame enumeration
/// order. Together they resolve the identity.
pub fn all_projectors(d: usize, l: usize) -> Result<Vec<IsotypicProjector>> {
    enumerate_frames(d, l)?
        .iter()
        .map(|f| isotypic_projector(f, d))
        .collect()
}

fn kron_power(m: &CMat, l: usize) -> CMat {
    let mut out = m.clone();
    for _ in 1..l {
        out = linalg::kron(&out, m);
    }
    out
}

/// `tr(P_lambda rho^{tensor l})`: the probability that spectrum estimation
/// on `l` copies of a single-system state reports the frame `lambda`.
pub fn spectrum_probability(frame: &YoungFrame, rho: &DensityMatrix, l: usize) -> Result<f64> {
    if rho.layout().factors() != 1 {
        return Err(Error::LayoutMismatch(
            "spectrum estimation takes a single-system state".into(),
        ));
    }
    if frame.boxes() != l {
        return Err(Error::domain(format!(
            "frame {frame} has {} boxes, expected {l}",
            frame.boxes()
        )));
    }
    let d = rho.layout().ambient_dim();
    let p = isotypic_projector(frame, d)?;
    let power = kron_power(rho.mat(), l);
    Ok(linalg::trace_re(&(p.matrix() * power)))
}

/// Exponential tail bound on `spectrum_probability`:
/// `(l+1)^{d(d-1)/2} * 2^{-l D(lambda_bar || spec rho)}` with the spectrum
/// sorted decreasingly. Returns 0 when the divergence is infinite (the
/// bound then holds vacuously).
pub fn keyl_werner_bound(frame: &YoungFrame, rho: &DensityMatrix, l: usize) -> Result<f64> {
    if rho.layout().factors() != 1 {
        return Err(Error::LayoutMismatch(
            "spectrum estimation takes a single-system state".into(),
        ));
    }
    let d = rho.layout().ambient_dim();
    let lam_bar = frame.padded(d)?.normalized();
    let spectrum = rho.eigenvalues()?;
    let div = relative_entropy(&lam_bar, &spectrum)?;
    if div.is_infinite() {
        return Ok(0.0);
    }
    let prefactor = ((l + 1) as f64).powi((d * (d - 1) / 2) as i32);
    Ok(prefactor * (-(l as f64) * div).exp2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::HilbertLayout;
    use crate::random;

    fn single(d: usize) -> HilbertLayout {
        HilbertLayout::single(d, "A").unwrap()
    }

    fn frame(parts: &[usize]) -> YoungFrame {
        YoungFrame::new(parts.to_vec()).unwrap()
    }

    #[test]
    fn qubit_pair_splits_into_triplet_and_singlet() {
        let sym = isotypic_projector(&frame(&[2, 0]), 2).unwrap();
        let anti = isotypic_projector(&frame(&[1, 1]), 2).unwrap();
        assert_eq!(sym.rank(), 3);
        assert_eq!(anti.rank(), 1);
        assert!(linalg::max_abs(&(sym.matrix() * anti.matrix())) < 1e-12);
        let total = sym.matrix() + anti.matrix();
        assert!(linalg::max_abs(&(total - linalg::identity(4))) < 1e-12);
    }

    #[test]
    fn four_qubit_ranks_sum_to_full_dimension() {
        let projs = all_projectors(2, 4).unwrap();
        assert_eq!(projs.len(), 3);
        let rank_sum: usize = projs.iter().map(|p| p.rank()).sum();
        assert_eq!(rank_sum, 16);
    }

    #[test]
    fn completeness_and_orthogonality_for_qutrits() {
        let projs = all_projectors(3, 3).unwrap();
        let dim = 27;
        let mut total = CMat::zeros(dim, dim);
        for (i, a) in projs.iter().enumerate() {
            total += a.matrix();
            for b in projs.iter().skip(i + 1) {
                assert!(linalg::max_abs(&(a.matrix() * b.matrix())) < 1e-9);
            }
        }
        assert!(linalg::max_abs(&(total - linalg::identity(dim))) < 1e-9);
    }

    #[test]
    fn spectrum_probabilities_match_closed_forms() {
        let mixed = DensityMatrix::maximally_mixed(single(2));
        // rank 3 times 1/4 per symmetric basis state
        let p_sym = spectrum_probability(&frame(&[2, 0]), &mixed, 2).unwrap();
        assert!((p_sym - 0.75).abs() < 1e-12);

        let skewed = DensityMatrix::from_diagonal(single(2), &[2.0 / 3.0, 1.0 / 3.0]).unwrap();
        // tr(P_sym rho^{x2}) = ((tr rho)^2 + tr rho^2) / 2 = 7/9
        let p = spectrum_probability(&frame(&[2, 0]), &skewed, 2).unwrap();
        assert!((p - 7.0 / 9.0).abs() < 1e-12);
        let q = spectrum_probability(&frame(&[1, 1]), &skewed, 2).unwrap();
        assert!((q - 2.0 / 9.0).abs() < 1e-12);

        // Tail bound for the antisymmetric frame:
        // 3 * 2^{-2 D((1/2,1/2)||(2/3,1/3))} = 3 * 2^{3 - 2 log2 3} = 8/3.
        let bound = keyl_werner_bound(&frame(&[1, 1]), &skewed, 2).unwrap();
        assert!((bound - 8.0 / 3.0).abs() < 1e-12);
        assert!(q <= bound);
    }

    #[test]
    fn probabilities_sum_to_one_and_respect_tail_bound() {
        let mut rng = random::seeded(11);
        for (d, l) in [(2usize, 4usize), (3, 3)] {
            let frames = enumerate_frames(d, l).unwrap();
            for _ in 0..5 {
                let rho =
                    DensityMatrix::new(single(d), random::random_density_mat(d, d, &mut rng))
                        .unwrap();
                let mut total = 0.0;
                for f in &frames {
                    let p = spectrum_probability(f, &rho, l).unwrap();
                    let bound = keyl_werner_bound(f, &rho, l).unwrap();
                    assert!(p <= bound + 1e-12, "frame {f}: {p} > {bound}");
                    total += p;
                }
                assert!((total - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn spectrum_probability_depends_only_on_the_spectrum() {
        let mut rng = random::seeded(23);
        let rho = DensityMatrix::from_diagonal(single(2), &[0.7, 0.3]).unwrap();
        let f = frame(&[2, 1]);
        let reference = spectrum_probability(&f, &rho, 3).unwrap();
        for _ in 0..20 {
            let u = random::random_unitary(2, &mut rng);
            let conjugated =
                DensityMatrix::new(single(2), &u * rho.mat() * u.adjoint()).unwrap();
            let p = spectrum_probability(&f, &conjugated, 3).unwrap();
            assert!((p - reference).abs() < 1e-9);
        }
    }

    #[test]
    fn vacuous_bound_for_unsupported_frames() {
        let pure = DensityMatrix::from_diagonal(single(2), &[1.0, 0.0]).unwrap();
        // Antisymmetric frame needs two nonzero spectrum entries.
        let bound = keyl_werner_bound(&frame(&[1, 1]), &pure, 2).unwrap();
        assert_eq!(bound, 0.0);
        let p = spectrum_probability(&frame(&[1, 1]), &pure, 2).unwrap();
        assert!(p.abs() < 1e-12);
    }
}
