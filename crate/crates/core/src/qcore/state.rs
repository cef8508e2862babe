use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::qcore::layout::HilbertLayout;
use crate::tol;

/// Read-only view shared by density matrices and sub-normalized PSD
/// operators, so metrics and channels can accept either.
pub trait Operator {
    fn layout(&self) -> &HilbertLayout;
    fn matrix(&self) -> &CMat;
}

/// A quantum state: Hermitian, positive semidefinite, unit trace, living on
/// an explicitly factored space.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    layout: HilbertLayout,
    mat: CMat,
}

/// A pure state vector on an explicitly factored space.
#[derive(Clone, Debug)]
pub struct PureState {
    layout: HilbertLayout,
    amp: CVec,
}

/// A positive semidefinite operator with trace at most 1. Sub-normalized
/// operators appear as unnormalized instrument outcomes and as the general
/// arguments of the fidelity.
#[derive(Clone, Debug)]
pub struct PsdOperator {
    layout: HilbertLayout,
    mat: CMat,
}

fn check_shape(layout: &HilbertLayout, mat: &CMat) -> Result<()> {
    let d = layout.ambient_dim();
    if mat.nrows() != d || mat.ncols() != d {
        return Err(Error::ShapeMismatch(format!(
            "matrix is {}x{} but layout has ambient dimension {d}",
            mat.nrows(),
            mat.ncols()
        )));
    }
    Ok(())
}

/// Partial trace on a raw matrix; `keep` are factor positions in layout
/// order. Returns the reduced matrix and its layout.
pub(crate) fn partial_trace_raw(
    mat: &CMat,
    layout: &HilbertLayout,
    keep: &[usize],
) -> (CMat, HilbertLayout) {
    let traced = layout.complement(keep);
    let keep_off = layout.offset_table(keep);
    let tr_off = layout.offset_table(&traced);
    let dk = keep_off.len();
    let mut out = CMat::zeros(dk, dk);
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = Complex64::ZERO;
            for &t in &tr_off {
                acc += mat[(keep_off[i] + t, keep_off[j] + t)];
            }
            out[(i, j)] = acc;
        }
    }
    (out, layout.subset(keep))
}

/// Index remap for a factor permutation: entry `r` of the result is the flat
/// index into the original operator, where new factor `t` holds old factor
/// `map[t]`.
pub(crate) fn permutation_index_map(layout: &HilbertLayout, map: &[usize]) -> Result<Vec<usize>> {
    let n = layout.factors();
    if map.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "permutation of length {} on {n} factors",
            map.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in map {
        if p >= n || seen[p] {
            return Err(Error::Domain(format!("invalid factor permutation {map:?}")));
        }
        seen[p] = true;
    }
    let old_strides = layout.strides();
    let new_dims: Vec<usize> = map.iter().map(|&p| layout.dims()[p]).collect();
    let total: usize = new_dims.iter().product();
    let mut out = Vec::with_capacity(total);
    for mut r in 0..total {
        let mut old = 0;
        for t in (0..n).rev() {
            old += (r % new_dims[t]) * old_strides[map[t]];
            r /= new_dims[t];
        }
        out.push(old);
    }
    Ok(out)
}

fn permuted_layout(layout: &HilbertLayout, map: &[usize]) -> HilbertLayout {
    layout.subset(map)
}

impl DensityMatrix {
    /// Validating constructor: checks shape, Hermitian symmetry, positivity
    /// (eigenvalues above the clipping band), and unit trace.
    pub fn new(layout: HilbertLayout, mat: CMat) -> Result<Self> {
        check_shape(&layout, &mat)?;
        let tr = linalg::trace_re(&mat);
        if (tr - 1.0).abs() > tol::TRACE_ONE {
            return Err(Error::BadTrace {
                trace: tr,
                expected: 1.0,
                tol: tol::TRACE_ONE,
            });
        }
        let eig = linalg::herm_eigen(&mat)?;
        linalg::clipped_psd_spectrum(&eig.values)?;
        Ok(Self { layout, mat })
    }

    /// Construction path for operation outputs that preserve physicality
    /// by construction (partial traces, factor permutations, convex
    /// combinations of valid states). Only the shape is asserted.
    pub(crate) fn trusted(layout: HilbertLayout, mat: CMat) -> Self {
        debug_assert_eq!(layout.ambient_dim(), mat.nrows());
        Self { layout, mat }
    }

    pub fn from_diagonal(layout: HilbertLayout, probs: &[f64]) -> Result<Self> {
        if probs.len() != layout.ambient_dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} diagonal entries on ambient dimension {}",
                probs.len(),
                layout.ambient_dim()
            )));
        }
        let mat = CMat::from_diagonal(&CVec::from_iterator(
            probs.len(),
            probs.iter().map(|&p| Complex64::new(p, 0.0)),
        ));
        Self::new(layout, mat)
    }

    pub fn maximally_mixed(layout: HilbertLayout) -> Self {
        let d = layout.ambient_dim();
        let mat = linalg::identity(d) / Complex64::new(d as f64, 0.0);
        Self::trusted(layout, mat)
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn to_psd(&self) -> PsdOperator {
        PsdOperator {
            layout: self.layout.clone(),
            mat: self.mat.clone(),
        }
    }

    /// Kronecker product; layouts concatenate, labels must stay unique.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let layout = self.layout.tensor(&other.layout)?;
        Ok(Self::trusted(layout, linalg::kron(&self.mat, &other.mat)))
    }

    /// `l`-fold tensor power with labels suffixed per copy: a state on
    /// (A, B) becomes one on (A1, B1, ..., Al, Bl).
    pub fn tensor_power(&self, l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::domain("tensor power needs l >= 1"));
        }
        let mut layout = self.layout.suffixed(1);
        let mut mat = self.mat.clone();
        for copy in 2..=l {
            layout = layout.tensor(&self.layout.suffixed(copy))?;
            mat = linalg::kron(&mat, &self.mat);
        }
        Ok(Self::trusted(layout, mat))
    }

    /// Marginal on the listed subsystems; the result keeps layout order
    /// regardless of the order labels are passed in.
    pub fn partial_trace(&self, keep: &[impl AsRef<str>]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::domain("partial_trace: keep-set must be nonempty"));
        }
        let mut pos = self.layout.positions(keep)?;
        pos.sort_unstable();
        let (mat, layout) = partial_trace_raw(&self.mat, &self.layout, &pos);
        Ok(Self::trusted(layout, mat))
    }

    /// Reorder factors so that new position `t` carries old position
    /// `map[t]`.
    pub fn permute(&self, map: &[usize]) -> Result<Self> {
        let idx = permutation_index_map(&self.layout, map)?;
        let d = idx.len();
        let mat = CMat::from_fn(d, d, |r, c| self.mat[(idx[r], idx[c])]);
        Ok(Self::trusted(permuted_layout(&self.layout, map), mat))
    }

    /// Reorder factors into the given label order (a permutation of all
    /// labels).
    pub fn reorder_labels(&self, order: &[impl AsRef<str>]) -> Result<Self> {
        if order.len() != self.layout.factors() {
            return Err(Error::LayoutMismatch(format!(
                "reorder needs all {} labels, got {}",
                self.layout.factors(),
                order.len()
            )));
        }
        let map = self.layout.positions(order)?;
        self.permute(&map)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::clipped_psd_spectrum(&linalg::herm_eigenvalues(&self.mat)?)
    }

    /// Standard purification: eigendecompose, keep the numerical rank, and
    /// attach an environment of exactly that dimension under a fresh label
    /// ("E", or "E2", "E3", ... if taken). Tracing the environment out
    /// recovers the state.
    pub fn purify(&self) -> Result<PureState> {
        let eig = linalg::herm_eigen(&self.mat)?;
        let spectrum = linalg::clipped_psd_spectrum(&eig.values)?;
        let rank = spectrum.iter().filter(|&&w| w > tol::RANK_CUTOFF).count();
        if rank == 0 {
            return Err(Error::domain("cannot purify an operator of numerical rank 0"));
        }
        let d = self.layout.ambient_dim();
        let mut amp = CVec::zeros(d * rank);
        for e in 0..rank {
            let w = spectrum[e].sqrt();
            for a in 0..d {
                amp[a * rank + e] = eig.vectors[(a, e)] * w;
            }
        }
        let taken = self.layout.labels();
        let mut env = String::from("E");
        let mut k = 2usize;
        while taken.contains(&env.as_str()) {
            env = format!("E{k}");
            k += 1;
        }
        let layout = self.layout.tensor(&HilbertLayout::single(rank, env)?)?;
        Ok(PureState::trusted(layout, amp))
    }

    /// Local depolarizing smoothing on a bipartite state:
    /// `(1-g)^2 t + g(1-g)(t_A x pi_B + pi_A x t_B) + g^2 pi_A x pi_B`.
    pub fn depolarize_local(&self, gamma: f64) -> Result<Self> {
        if self.layout.factors() != 2 {
            return Err(Error::LayoutMismatch(format!(
                "local depolarizing needs a bipartite layout, got {} factors",
                self.layout.factors()
            )));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::domain(format!("gamma = {gamma} outside [0, 1]")));
        }
        let labels = self.layout.labels();
        let (da, db) = (self.layout.dims()[0], self.layout.dims()[1]);
        let ta = self.partial_trace(&[labels[0]])?;
        let tb = self.partial_trace(&[labels[1]])?;
        let pia = linalg::identity(da) / Complex64::new(da as f64, 0.0);
        let pib = linalg::identity(db) / Complex64::new(db as f64, 0.0);
        let keep = 1.0 - gamma;
        let mat = self.mat.scale(keep * keep)
            + linalg::kron(ta.mat(), &pib).scale(gamma * keep)
            + linalg::kron(&pia, tb.mat()).scale(gamma * keep)
            + linalg::kron(&pia, &pib).scale(gamma * gamma);
        Ok(Self::trusted(self.layout.clone(), mat))
    }
}

impl PureState {
    pub fn new(layout: HilbertLayout, amp: CVec) -> Result<Self> {
        if amp.len() != layout.ambient_dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} amplitudes on ambient dimension {}",
                amp.len(),
                layout.ambient_dim()
            )));
        }
        let norm = amp.norm();
        if (norm - 1.0).abs() > tol::TRACE_ONE {
            return Err(Error::BadTrace {
                trace: norm * norm,
                expected: 1.0,
                tol: tol::TRACE_ONE,
            });
        }
        Ok(Self { layout, amp })
    }

    pub(crate) fn trusted(layout: HilbertLayout, amp: CVec) -> Self {
        debug_assert_eq!(layout.ambient_dim(), amp.len());
        Self { layout, amp }
    }

    /// Computational basis vector |digits⟩.
    pub fn basis(layout: HilbertLayout, digits: &[usize]) -> Result<Self> {
        Self::superposition(layout, &[(digits.to_vec(), Complex64::ONE)])
    }

    /// Normalized linear combination of computational basis vectors.
    pub fn superposition(
        layout: HilbertLayout,
        terms: &[(Vec<usize>, Complex64)],
    ) -> Result<Self> {
        let strides = layout.strides();
        let mut amp = CVec::zeros(layout.ambient_dim());
        for (digits, coeff) in terms {
            if digits.len() != layout.factors() {
                return Err(Error::ShapeMismatch(format!(
                    "basis term has {} digits on {} factors",
                    digits.len(),
                    layout.factors()
                )));
            }
            let mut idx = 0usize;
            for (p, &d) in digits.iter().enumerate() {
                if d >= layout.dims()[p] {
                    return Err(Error::domain(format!(
                        "digit {d} out of range for factor {p} of dimension {}",
                        layout.dims()[p]
                    )));
                }
                idx += d * strides[p];
            }
            amp[idx] += coeff;
        }
        let norm = amp.norm();
        if norm <= tol::RANK_CUTOFF {
            return Err(Error::domain("superposition collapsed to the zero vector"));
        }
        Self::new(layout, amp / Complex64::new(norm, 0.0))
    }

    /// Maximally entangled rank-`d` vector between two fresh labels.
    pub fn maximally_entangled(
        d: usize,
        label_a: impl Into<String>,
        label_b: impl Into<String>,
    ) -> Result<Self> {
        let layout = HilbertLayout::new(vec![d, d], [label_a.into(), label_b.into()])?;
        let terms: Vec<(Vec<usize>, Complex64)> =
            (0..d).map(|i| (vec![i, i], Complex64::ONE)).collect();
        Self::superposition(layout, &terms)
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn amp(&self) -> &CVec {
        &self.amp
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let layout = self.layout.tensor(&other.layout)?;
        Ok(Self::trusted(layout, self.amp.kronecker(&other.amp)))
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::trusted(self.layout.clone(), &self.amp * self.amp.adjoint())
    }

    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.layout.expect_same(&other.layout, "inner product")?;
        Ok(self.amp.dotc(&other.amp))
    }

    /// Reorder factors so that new position `t` carries old position
    /// `map[t]`.
    pub fn permute(&self, map: &[usize]) -> Result<Self> {
        let idx = permutation_index_map(&self.layout, map)?;
        let amp = CVec::from_iterator(idx.len(), idx.iter().map(|&i| self.amp[i]));
        Ok(Self::trusted(permuted_layout(&self.layout, map), amp))
    }

    pub fn reorder_labels(&self, order: &[impl AsRef<str>]) -> Result<Self> {
        if order.len() != self.layout.factors() {
            return Err(Error::LayoutMismatch(format!(
                "reorder needs all {} labels, got {}",
                self.layout.factors(),
                order.len()
            )));
        }
        let map = self.layout.positions(order)?;
        self.permute(&map)
    }

    /// Rename factors in place (amplitudes untouched); `pairs` maps old to
    /// new names. Dimensions follow the labels, so a renamed state is the
    /// same vector on a relabeled space.
    pub fn relabel(&self, pairs: &[(&str, &str)]) -> Result<Self> {
        let mut labels: Vec<String> = self.layout.labels().iter().map(|s| s.to_string()).collect();
        for (from, to) in pairs {
            let p = self.layout.position(from)?;
            labels[p] = (*to).to_string();
        }
        let layout = HilbertLayout::new(self.layout.dims().to_vec(), labels)?;
        Ok(Self::trusted(layout, self.amp.clone()))
    }

    /// Schmidt rank across the cut (`cut` | complement): the number of
    /// singular values of the reshaped amplitude matrix above 1e-10.
    pub fn schmidt_rank(&self, cut: &[impl AsRef<str>]) -> Result<usize> {
        Ok(self
            .schmidt_coefficients(cut)?
            .iter()
            .filter(|&&s| s > tol::RANK_CUTOFF)
            .count())
    }

    /// Schmidt coefficients (descending singular values of the reshaped
    /// amplitude matrix; their squares sum to 1).
    pub fn schmidt_coefficients(&self, cut: &[impl AsRef<str>]) -> Result<Vec<f64>> {
        let mut pos = self.layout.positions(cut)?;
        pos.sort_unstable();
        if pos.is_empty() || pos.len() == self.layout.factors() {
            return Err(Error::domain(
                "schmidt cut must be a proper nonempty subset of the factors",
            ));
        }
        let rest = self.layout.complement(&pos);
        let cut_off = self.layout.offset_table(&pos);
        let rest_off = self.layout.offset_table(&rest);
        let m = CMat::from_fn(cut_off.len(), rest_off.len(), |i, j| {
            self.amp[cut_off[i] + rest_off[j]]
        });
        Ok(linalg::singular_values(&m))
    }
}

impl PsdOperator {
    pub fn new(layout: HilbertLayout, mat: CMat) -> Result<Self> {
        check_shape(&layout, &mat)?;
        let eig = linalg::herm_eigen(&mat)?;
        linalg::clipped_psd_spectrum(&eig.values)?;
        let tr = linalg::trace_re(&mat);
        if tr > 1.0 + tol::TRACE_ONE {
            return Err(Error::BadTrace {
                trace: tr,
                expected: 1.0,
                tol: tol::TRACE_ONE,
            });
        }
        Ok(Self { layout, mat })
    }

    pub(crate) fn trusted(layout: HilbertLayout, mat: CMat) -> Self {
        debug_assert_eq!(layout.ambient_dim(), mat.nrows());
        Self { layout, mat }
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        linalg::trace_re(&self.mat)
    }

    pub fn partial_trace(&self, keep: &[impl AsRef<str>]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::domain("partial_trace: keep-set must be nonempty"));
        }
        let mut pos = self.layout.positions(keep)?;
        pos.sort_unstable();
        let (mat, layout) = partial_trace_raw(&self.mat, &self.layout, &pos);
        Ok(Self::trusted(layout, mat))
    }

    /// Normalize to a density matrix; fails when the trace is numerically
    /// zero.
    pub fn normalized(&self) -> Result<(f64, DensityMatrix)> {
        let tr = self.trace();
        if tr <= tol::BRANCH_PRUNE {
            return Err(Error::domain(format!(
                "cannot normalize an operator of trace {tr:.3e}"
            )));
        }
        Ok((
            tr,
            DensityMatrix::trusted(self.layout.clone(), self.mat.scale(1.0 / tr)),
        ))
    }
}

impl Operator for DensityMatrix {
    fn layout(&self) -> &HilbertLayout {
        &self.layout
    }
    fn matrix(&self) -> &CMat {
        &self.mat
    }
}

impl Operator for PsdOperator {
    fn layout(&self) -> &HilbertLayout {
        &self.layout
    }
    fn matrix(&self) -> &CMat {
        &self.mat
    }
}

impl From<&DensityMatrix> for PsdOperator {
    fn from(d: &DensityMatrix) -> Self {
        d.to_psd()
    }
}
