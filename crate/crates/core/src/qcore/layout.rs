use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;

/// Ordered factorization of a composite Hilbert space.
///
/// Subsystems are addressed by unique string labels ("A", "B1", "B'", "E",
/// ...). Joint indices are row-major: the first factor owns the most
/// significant digit, matching the Kronecker-product convention of
/// [`crate::linalg::kron`]. Dimension-1 factors are legal (they model trivial
/// resource registers).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertLayout {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl HilbertLayout {
    pub fn new(
        dims: impl Into<Vec<usize>>,
        labels: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Self> {
        let dims: Vec<usize> = dims.into();
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if dims.len() != labels.len() {
            return Err(Error::LayoutMismatch(format!(
                "{} dims but {} labels",
                dims.len(),
                labels.len()
            )));
        }
        if dims.is_empty() {
            return Err(Error::LayoutMismatch("layout needs at least one factor".into()));
        }
        if dims.contains(&0) {
            return Err(Error::LayoutMismatch("zero-dimensional factor".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(Error::LayoutMismatch("empty label".into()));
            }
            if labels[..i].contains(l) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        let mut ambient: usize = 1;
        for &d in &dims {
            ambient = ambient
                .checked_mul(d)
                .ok_or(Error::DimensionCap {
                    dim: usize::MAX,
                    cap: tol::dim_cap(),
                })?;
        }
        if ambient > tol::dim_cap() {
            return Err(Error::DimensionCap {
                dim: ambient,
                cap: tol::dim_cap(),
            });
        }
        Ok(Self { dims, labels })
    }

    pub fn single(dim: usize, label: impl Into<String>) -> Result<Self> {
        Self::new(vec![dim], [label.into()])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> Vec<&str> {
        self.labels.iter().map(String::as_str).collect()
    }

    pub fn factors(&self) -> usize {
        self.dims.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Positions of the given labels, in the order given by the caller.
    pub fn positions(&self, labels: &[impl AsRef<str>]) -> Result<Vec<usize>> {
        let mut seen = vec![false; self.factors()];
        let mut out = Vec::with_capacity(labels.len());
        for l in labels {
            let p = self.position(l.as_ref())?;
            if seen[p] {
                return Err(Error::DuplicateLabel(l.as_ref().to_string()));
            }
            seen[p] = true;
            out.push(p);
        }
        Ok(out)
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.dims[self.position(label)?])
    }

    /// Positions not listed in `positions`, in layout order.
    pub fn complement(&self, positions: &[usize]) -> Vec<usize> {
        (0..self.factors()).filter(|p| !positions.contains(p)).collect()
    }

    /// Sub-layout assembled from the given positions, in the order given.
    pub fn subset(&self, positions: &[usize]) -> Self {
        Self {
            dims: positions.iter().map(|&p| self.dims[p]).collect(),
            labels: positions.iter().map(|&p| self.labels[p].clone()).collect(),
        }
    }

    /// Concatenation; fails on label collision or cap overflow.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let dims: Vec<usize> = self.dims.iter().chain(&other.dims).copied().collect();
        let labels: Vec<String> = self.labels.iter().chain(&other.labels).cloned().collect();
        Self::new(dims, labels)
    }

    /// Same dims with every label suffixed by a copy index, for tensor
    /// powers: suffix 2 turns "A" into "A2".
    pub fn suffixed(&self, copy: usize) -> Self {
        Self {
            dims: self.dims.clone(),
            labels: self.labels.iter().map(|l| format!("{l}{copy}")).collect(),
        }
    }

    /// Row-major strides: `stride[i]` is the index weight of factor `i`.
    pub fn strides(&self) -> Vec<usize> {
        let n = self.factors();
        let mut s = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.dims[i + 1];
        }
        s
    }

    /// Offsets of every joint index of the sub-collection `positions` inside
    /// the full index, i.e. the table `off[k]` such that full indices
    /// decompose as `off[k] + r` with `r` ranging over the complementary
    /// table. The sub-collection is enumerated row-major in the order given.
    pub fn offset_table(&self, positions: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let dims: Vec<usize> = positions.iter().map(|&p| self.dims[p]).collect();
        let total: usize = dims.iter().product();
        let mut out = Vec::with_capacity(total);
        for mut k in 0..total {
            let mut off = 0;
            for i in (0..positions.len()).rev() {
                off += (k % dims[i]) * strides[positions[i]];
                k /= dims[i];
            }
            out.push(off);
        }
        out
    }

    /// Whether both layouts have identical dims and labels.
    pub fn same_as(&self, other: &Self) -> bool {
        self == other
    }

    /// Require identical layout, with a readable error otherwise.
    pub fn expect_same(&self, other: &Self, context: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::LayoutMismatch(format!(
                "{context}: {:?}x{:?} vs {:?}x{:?}",
                self.dims, self.labels, other.dims, other.labels
            )))
        }
    }
}
