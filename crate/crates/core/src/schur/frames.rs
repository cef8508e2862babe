//! Young frames, their enumeration, hook-length dimensions, and symmetric
//! group characters via the Murnaghan–Nakayama recursion.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::shannon_entropy;

/// A partition of `l` boxes into a fixed number of non-increasing rows
/// (trailing zero rows allowed, so a frame carries the ambient row count).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct YoungFrame {
    parts: Vec<usize>,
}

impl YoungFrame {
    pub fn new(parts: Vec<usize>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::domain("a Young frame needs at least one row slot"));
        }
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::domain("Young frame rows must be non-increasing"));
        }
        if parts.iter().sum::<usize>() == 0 {
            return Err(Error::domain("a Young frame needs at least one box"));
        }
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    /// Total number of boxes `l`.
    pub fn boxes(&self) -> usize {
        self.parts.iter().sum()
    }

    /// Number of nonzero rows.
    pub fn rows(&self) -> usize {
        self.parts.iter().filter(|&&p| p > 0).count()
    }

    /// Zero-pad to `d` row slots.
    pub fn padded(&self, d: usize) -> Result<Self> {
        if self.rows() > d {
            return Err(Error::domain(format!(
                "frame has {} nonzero rows, cannot fit {d} slots",
                self.rows()
            )));
        }
        let mut parts: Vec<usize> = self.parts.iter().copied().filter(|&p| p > 0).collect();
        parts.resize(d, 0);
        Ok(Self { parts })
    }

    /// The normalized box-length distribution: row lengths divided by `l`.
    pub fn normalized(&self) -> Vec<f64> {
        let l = self.boxes() as f64;
        self.parts.iter().map(|&p| p as f64 / l).collect()
    }

    /// Shannon entropy (bits) of the normalized box-length distribution.
    pub fn entropy(&self) -> f64 {
        shannon_entropy(&self.normalized()).expect("normalized box lengths form a distribution")
    }
}

impl std::fmt::Display for YoungFrame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({})",
            self.parts
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(",")
        )
    }
}

/// All partitions of `l` into at most `d` parts, as `d`-slot frames in
/// decreasing lexicographic order; there are at most `(l+1)^d` of them.
pub fn enumerate_frames(d: usize, l: usize) -> Result<Vec<YoungFrame>> {
    if d == 0 || l == 0 {
        return Err(Error::domain("frame enumeration needs d >= 1 and l >= 1"));
    }
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(d);
    fill(l, l, d, &mut current, &mut out);
    Ok(out)
}

fn fill(remaining: usize, max_part: usize, slots: usize, current: &mut Vec<usize>, out: &mut Vec<YoungFrame>) {
    if slots == 0 {
        if remaining == 0 {
            out.push(YoungFrame {
                parts: current.clone(),
            });
        }
        return;
    }
    // Largest first part first gives decreasing lexicographic output order.
    let hi = remaining.min(max_part);
    let lo = remaining.div_ceil(slots);
    for p in (lo..=hi).rev() {
        current.push(p);
        fill(remaining - p, p, slots - 1, current, out);
        current.pop();
    }
}

/// All cycle types of the symmetric group S_l: partitions of `l` with zero
/// rows trimmed, in decreasing lexicographic order.
pub fn cycle_types(l: usize) -> Result<Vec<Vec<usize>>> {
    Ok(enumerate_frames(l, l)?
        .into_iter()
        .map(|f| f.parts.into_iter().filter(|&p| p > 0).collect())
        .collect())
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// Number of permutations in S_l with the given cycle type:
/// `l! / prod_k k^{m_k} m_k!` with `m_k` the multiplicity of part `k`.
pub fn cycle_class_size(cycle_type: &[usize]) -> Result<u64> {
    let l: usize = cycle_type.iter().sum();
    if l == 0 {
        return Err(Error::domain("empty cycle type"));
    }
    let mut mult: HashMap<usize, u128> = HashMap::new();
    for &k in cycle_type {
        if k == 0 {
            continue;
        }
        *mult.entry(k).or_insert(0) += 1;
    }
    let mut denom: u128 = 1;
    for (k, m) in mult {
        denom *= (k as u128).pow(m as u32) * factorial(m as usize);
    }
    Ok((factorial(l) / denom) as u64)
}

/// Dimension of the S_l irreducible representation labeled by the frame,
/// by the hook-length formula.
pub fn irrep_dimension(frame: &YoungFrame) -> Result<u64> {
    let lam: Vec<usize> = frame.parts.iter().copied().filter(|&p| p > 0).collect();
    let l = frame.boxes();
    let cols = lam[0];
    let conj: Vec<usize> = (0..cols)
        .map(|j| lam.iter().filter(|&&p| p > j).count())
        .collect();
    let mut hooks: u128 = 1;
    for (i, &row) in lam.iter().enumerate() {
        for (j, &col) in conj.iter().enumerate().take(row) {
            hooks *= ((row - j) + (col - i) - 1) as u128;
        }
    }
    Ok((factorial(l) / hooks) as u64)
}

type ChiKey = (Vec<usize>, Vec<usize>);

fn chi_cache() -> &'static Mutex<HashMap<ChiKey, i64>> {
    static CACHE: OnceLock<Mutex<HashMap<ChiKey, i64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Irreducible character of S_l: frame labels the representation,
/// `cycle_type` the conjugacy class. Murnaghan–Nakayama recursion with a
/// process-wide memo table.
pub fn character(frame: &YoungFrame, cycle_type: &[usize]) -> Result<i64> {
    let lam: Vec<usize> = frame.parts.iter().copied().filter(|&p| p > 0).collect();
    let mut alpha: Vec<usize> = cycle_type.iter().copied().filter(|&p| p > 0).collect();
    alpha.sort_unstable_by(|a, b| b.cmp(a));
    if lam.iter().sum::<usize>() != alpha.iter().sum::<usize>() {
        return Err(Error::domain(
            "frame and cycle type must partition the same number of boxes",
        ));
    }
    Ok(mn(&lam, &alpha))
}

/// Border-strip recursion in beta-number form: removing a strip of length
/// `t` moves one beta number down by `t` into an unoccupied slot, with sign
/// given by the number of beta numbers jumped over.
fn mn(lam: &[usize], alpha: &[usize]) -> i64 {
    if alpha.is_empty() {
        return 1;
    }
    let key = (lam.to_vec(), alpha.to_vec());
    if let Some(&v) = chi_cache().lock().unwrap().get(&key) {
        return v;
    }
    let t = alpha[0];
    let rest = &alpha[1..];
    let k = lam.len();
    let beta: Vec<isize> = lam
        .iter()
        .enumerate()
        .map(|(i, &p)| (p + (k - 1 - i)) as isize)
        .collect();
    let mut total = 0i64;
    for i in 0..k {
        let target = beta[i] - t as isize;
        if target < 0 || beta.contains(&target) {
            continue;
        }
        let height = beta
            .iter()
            .filter(|&&b| target < b && b < beta[i])
            .count();
        let sign = if height % 2 == 0 { 1 } else { -1 };
        let mut new_beta = beta.clone();
        new_beta[i] = target;
        new_beta.sort_unstable_by(|a, b| b.cmp(a));
        let m = new_beta.len();
        let new_lam: Vec<usize> = new_beta
            .iter()
            .enumerate()
            .map(|(j, &b)| (b - (m - 1 - j) as isize) as usize)
            .filter(|&p| p > 0)
            .collect();
        total += sign * mn(&new_lam, rest);
    }
    chi_cache().lock().unwrap().insert(key, total);
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(parts: &[usize]) -> YoungFrame {
        YoungFrame::new(parts.to_vec()).unwrap()
    }

    #[test]
    fn enumeration_matches_hand_lists() {
        let f22: Vec<Vec<usize>> = enumerate_frames(2, 2)
            .unwrap()
            .iter()
            .map(|f| f.parts().to_vec())
            .collect();
        assert_eq!(f22, vec![vec![2, 0], vec![1, 1]]);

        let f23: Vec<Vec<usize>> = enumerate_frames(2, 3)
            .unwrap()
            .iter()
            .map(|f| f.parts().to_vec())
            .collect();
        assert_eq!(f23, vec![vec![3, 0], vec![2, 1]]);

        let f34: Vec<Vec<usize>> = enumerate_frames(3, 4)
            .unwrap()
            .iter()
            .map(|f| f.parts().to_vec())
            .collect();
        assert_eq!(
            f34,
            vec![vec![4, 0, 0], vec![3, 1, 0], vec![2, 2, 0], vec![2, 1, 1]]
        );
    }

    #[test]
    fn frame_count_stays_under_polynomial_bound() {
        for d in 2..=3 {
            for l in 1..=6 {
                let count = enumerate_frames(d, l).unwrap().len();
                assert!(count <= (l + 1).pow(d as u32));
            }
        }
    }

    #[test]
    fn small_character_tables() {
        // Trivial representation: 1 on every class.
        for l in 1..=4 {
            let triv = frame(&[l]);
            for ct in cycle_types(l).unwrap() {
                assert_eq!(character(&triv, &ct).unwrap(), 1);
            }
        }
        // Sign representation of S2.
        let sign2 = frame(&[1, 1]);
        assert_eq!(character(&sign2, &[1, 1]).unwrap(), 1);
        assert_eq!(character(&sign2, &[2]).unwrap(), -1);
        // Full S3 table.
        let std3 = frame(&[2, 1]);
        assert_eq!(character(&std3, &[1, 1, 1]).unwrap(), 2);
        assert_eq!(character(&std3, &[2, 1]).unwrap(), 0);
        assert_eq!(character(&std3, &[3]).unwrap(), -1);
        let sign3 = frame(&[1, 1, 1]);
        assert_eq!(character(&sign3, &[1, 1, 1]).unwrap(), 1);
        assert_eq!(character(&sign3, &[2, 1]).unwrap(), -1);
        assert_eq!(character(&sign3, &[3]).unwrap(), 1);
    }

    #[test]
    fn character_orthogonality_up_to_l_six() {
        for l in 2..=6 {
            let frames = enumerate_frames(l, l).unwrap();
            let classes = cycle_types(l).unwrap();
            let fact: i64 = (1..=l as i64).product();
            for a in &frames {
                for b in &frames {
                    let mut inner = 0i64;
                    for ct in &classes {
                        inner += cycle_class_size(ct).unwrap() as i64
                            * character(a, ct).unwrap()
                            * character(b, ct).unwrap();
                    }
                    let expected = if a == b { fact } else { 0 };
                    assert_eq!(inner, expected, "l={l} frames {a} {b}");
                }
            }
        }
    }

    #[test]
    fn hook_dimensions() {
        assert_eq!(irrep_dimension(&frame(&[3])).unwrap(), 1);
        assert_eq!(irrep_dimension(&frame(&[1, 1, 1])).unwrap(), 1);
        assert_eq!(irrep_dimension(&frame(&[2, 1])).unwrap(), 2);
        // Dimension equals the character at the identity class, and the
        // squared dimensions sum to the group order.
        for l in 1..=6 {
            let identity = vec![1usize; l];
            let mut sum_sq = 0u64;
            for f in enumerate_frames(l, l).unwrap() {
                let dim = irrep_dimension(&f).unwrap();
                assert_eq!(dim as i64, character(&f, &identity).unwrap());
                sum_sq += dim * dim;
            }
            assert_eq!(sum_sq as u128, factorial(l));
        }
    }

    #[test]
    fn class_sizes_sum_to_group_order() {
        for l in 1..=7 {
            let total: u64 = cycle_types(l)
                .unwrap()
                .iter()
                .map(|ct| cycle_class_size(ct).unwrap())
                .sum();
            assert_eq!(total as u128, factorial(l));
        }
        // S4: identity 1, transpositions 6, double transpositions 3,
        // 3-cycles 8, 4-cycles 6.
        assert_eq!(cycle_class_size(&[1, 1, 1, 1]).unwrap(), 1);
        assert_eq!(cycle_class_size(&[2, 1, 1]).unwrap(), 6);
        assert_eq!(cycle_class_size(&[2, 2]).unwrap(), 3);
        assert_eq!(cycle_class_size(&[3, 1]).unwrap(), 8);
        assert_eq!(cycle_class_size(&[4]).unwrap(), 6);
    }

    #[test]
    fn frame_entropy_and_padding() {
        let f = frame(&[3, 1]);
        assert_eq!(f.boxes(), 4);
        assert_eq!(f.rows(), 2);
        let padded = f.padded(3).unwrap();
        assert_eq!(padded.parts(), &[3, 1, 0]);
        let h = f.entropy();
        // H(3/4, 1/4) = 2 - (3/4) log2 3
        assert!((h - (2.0 - 0.75 * 3.0f64.log2())).abs() < 1e-12);
        assert!(frame(&[2, 1, 1]).padded(2).is_err());
    }
}
