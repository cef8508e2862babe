//! Permutations of `{0, ..., l-1}` acting on tensor factors and index
//! sequences.
//!
//! The action convention everywhere in the crate: applying `sigma` to a
//! sequence (or factor list) puts old entry `sigma(t)` at new position `t`,
//! i.e. `sigma(s)_t = s_{sigma(t)}`. Two applications compose as
//! `apply(apply(s, tau), sigma) = apply(s, tau.compose(sigma))` where
//! `compose` is plain function composition `(tau . sigma)(t) = tau(sigma(t))`.

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &p in &map {
            if p >= n || seen[p] {
                return Err(Error::domain(format!("{map:?} is not a permutation")));
            }
            seen[p] = true;
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
        }
    }

    /// Uniformly random permutation (Fisher-Yates via the supplied seeded
    /// generator).
    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(rng);
        Self { map }
    }

    /// All `n!` permutations, in lexicographic order of their maps.
    pub fn enumerate(n: usize) -> Vec<Self> {
        (0..n)
            .permutations(n)
            .map(|map| Self { map })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn at(&self, t: usize) -> usize {
        self.map[t]
    }

    /// Function composition: `(self . other)(t) = self(other(t))`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::ShapeMismatch(format!(
                "composing permutations of lengths {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(Self {
            map: (0..self.len()).map(|t| self.map[other.map[t]]).collect(),
        })
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0usize; self.len()];
        for (t, &p) in self.map.iter().enumerate() {
            inv[p] = t;
        }
        Self { map: inv }
    }

    /// Apply to a sequence: entry `t` of the result is `s[sigma(t)]`.
    pub fn apply<T: Clone>(&self, s: &[T]) -> Result<Vec<T>> {
        if s.len() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "permutation of length {} on sequence of length {}",
                self.len(),
                s.len()
            )));
        }
        Ok(self.map.iter().map(|&p| s[p].clone()).collect())
    }

    /// Cycle type as a partition of `n` (descending), e.g. a transposition
    /// in S_4 has cycle type [2, 1, 1].
    pub fn cycle_type(&self) -> Vec<usize> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut cycles = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut t = start;
            while !seen[t] {
                seen[t] = true;
                t = self.map[t];
                len += 1;
            }
            cycles.push(len);
        }
        cycles.sort_unstable_by(|a, b| b.cmp(a));
        cycles
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_matches_sequential_application() {
        let sigma = Permutation::new(vec![2, 0, 1]).unwrap();
        let tau = Permutation::new(vec![1, 2, 0]).unwrap();
        let s = ["a", "b", "c"];
        let step = sigma.apply(&tau.apply(&s).unwrap()).unwrap();
        let combo = tau.compose(&sigma).unwrap().apply(&s).unwrap();
        assert_eq!(step, combo);
    }

    #[test]
    fn inverse_undoes() {
        let mut rng = crate::random::seeded(9);
        for _ in 0..20 {
            let p = Permutation::random(6, &mut rng);
            let id = p.compose(&p.inverse()).unwrap();
            assert_eq!(id, Permutation::identity(6));
        }
    }

    #[test]
    fn enumerate_has_full_count_and_cycle_types() {
        let all = Permutation::enumerate(4);
        assert_eq!(all.len(), 24);
        // Class sizes in S_4: [1^4]=1, [2,1,1]=6, [2,2]=3, [3,1]=8, [4]=6.
        let count = |ct: &[usize]| all.iter().filter(|p| p.cycle_type() == ct).count();
        assert_eq!(count(&[1, 1, 1, 1]), 1);
        assert_eq!(count(&[2, 1, 1]), 6);
        assert_eq!(count(&[2, 2]), 3);
        assert_eq!(count(&[3, 1]), 8);
        assert_eq!(count(&[4]), 6);
    }
}
