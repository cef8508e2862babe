//! Kraus-operator maps, quantum instruments, one-way LOCC channels, and the
//! one-shot distillation functional.
//!
//! Maps address the factors they act on *by label*: applying a map to a
//! larger state replaces the addressed factors with the map's output factors
//! (which come first in the result layout), while idle factors keep their
//! order behind them.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::perm::Permutation;
use crate::qcore::{
    coherent_information, DensityMatrix, HilbertLayout, Operator, PsdOperator,
};
use crate::tol;

/// A completely positive trace-nonincreasing map in Kraus form, between two
/// explicitly factored spaces.
#[derive(Clone, Debug)]
pub struct KrausMap {
    in_layout: HilbertLayout,
    out_layout: HilbertLayout,
    kraus: Vec<CMat>,
    channel: bool,
}

impl KrausMap {
    /// Validating constructor: every operator must map the input space to
    /// the output space, and `sum K* K <= 1` within tolerance. Equality
    /// within tolerance marks the map as a channel.
    pub fn new(in_layout: HilbertLayout, out_layout: HilbertLayout, kraus: Vec<CMat>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::domain("a Kraus map needs at least one operator"));
        }
        let din = in_layout.ambient_dim();
        let dout = out_layout.ambient_dim();
        for k in &kraus {
            if k.nrows() != dout || k.ncols() != din {
                return Err(Error::ShapeMismatch(format!(
                    "Kraus operator is {}x{}, expected {dout}x{din}",
                    k.nrows(),
                    k.ncols()
                )));
            }
        }
        let mut gram = CMat::zeros(din, din);
        for k in &kraus {
            gram += k.adjoint() * k;
        }
        let defect = linalg::identity(din) - &gram;
        let defect_eigs = linalg::herm_eigenvalues(&defect)?;
        let min_defect = defect_eigs.last().copied().unwrap_or(0.0);
        if min_defect < -tol::KRAUS_COMPLETENESS {
            return Err(Error::Completeness {
                dev: -min_defect,
                tol: tol::KRAUS_COMPLETENESS,
            });
        }
        let channel = linalg::max_abs(&defect) <= tol::KRAUS_COMPLETENESS;
        Ok(Self {
            in_layout,
            out_layout,
            kraus,
            channel,
        })
    }

    pub fn identity(layout: HilbertLayout) -> Self {
        let d = layout.ambient_dim();
        Self {
            in_layout: layout.clone(),
            out_layout: layout,
            kraus: vec![linalg::identity(d)],
            channel: true,
        }
    }

    /// Single-system depolarizing channel `t -> (1-g) t + g pi tr(t)` in
    /// Kraus form: `sqrt(1-g) 1` plus the replacement family
    /// `sqrt(g/d) |i><j|`.
    pub fn depolarizing(layout: HilbertLayout, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::domain(format!("gamma = {gamma} outside [0, 1]")));
        }
        let d = layout.ambient_dim();
        let mut kraus = vec![linalg::identity(d) * Complex64::new((1.0 - gamma).sqrt(), 0.0)];
        let w = Complex64::new((gamma / d as f64).sqrt(), 0.0);
        for i in 0..d {
            for j in 0..d {
                let mut k = CMat::zeros(d, d);
                k[(i, j)] = w;
                kraus.push(k);
            }
        }
        Self::new(layout.clone(), layout, kraus)
    }

    pub fn in_layout(&self) -> &HilbertLayout {
        &self.in_layout
    }

    pub fn out_layout(&self) -> &HilbertLayout {
        &self.out_layout
    }

    pub fn kraus(&self) -> &[CMat] {
        &self.kraus
    }

    /// Whether the map is trace preserving (within tolerance).
    pub fn is_channel(&self) -> bool {
        self.channel
    }

    /// Composition `self . other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Result<Self> {
        other
            .out_layout
            .expect_same(&self.in_layout, "Kraus composition")?;
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for a in &self.kraus {
            for b in &other.kraus {
                kraus.push(a * b);
            }
        }
        Self::new(other.in_layout.clone(), self.out_layout.clone(), kraus)
    }

    /// Apply to the factors of `rho` named by `acting_on` (one label per
    /// input factor, in the input layout's factor order). The result lives
    /// on `[output factors..., idle factors...]` and is sub-normalized when
    /// the map is not a channel.
    pub fn apply(&self, rho: &impl Operator, acting_on: &[impl AsRef<str>]) -> Result<PsdOperator> {
        let (mat, layout) = self.apply_raw(rho.matrix(), rho.layout(), acting_on)?;
        Ok(PsdOperator::trusted(layout, mat))
    }

    /// Apply a channel to a state; the result is again a state.
    pub fn apply_channel(
        &self,
        rho: &DensityMatrix,
        acting_on: &[impl AsRef<str>],
    ) -> Result<DensityMatrix> {
        if !self.channel {
            return Err(Error::domain(
                "apply_channel requires a trace-preserving map; use apply for branches",
            ));
        }
        let (mat, layout) = self.apply_raw(rho.matrix(), rho.layout(), acting_on)?;
        Ok(DensityMatrix::trusted(layout, mat))
    }

    fn apply_raw(
        &self,
        mat: &CMat,
        layout: &HilbertLayout,
        acting_on: &[impl AsRef<str>],
    ) -> Result<(CMat, HilbertLayout)> {
        let pos = layout.positions(acting_on)?;
        if pos.len() != self.in_layout.factors() {
            return Err(Error::LayoutMismatch(format!(
                "map has {} input factors, {} labels given",
                self.in_layout.factors(),
                pos.len()
            )));
        }
        for (i, &p) in pos.iter().enumerate() {
            if layout.dims()[p] != self.in_layout.dims()[i] {
                return Err(Error::LayoutMismatch(format!(
                    "factor {:?} has dimension {}, map expects {}",
                    acting_on[i].as_ref(),
                    layout.dims()[p],
                    self.in_layout.dims()[i]
                )));
            }
        }
        let idle = layout.complement(&pos);
        let mut perm: Vec<usize> = pos.clone();
        perm.extend(idle.iter().copied());
        let idx = crate::qcore::permutation_index_map(layout, &perm)?;
        let d = idx.len();
        let permuted = CMat::from_fn(d, d, |r, c| mat[(idx[r], idx[c])]);

        let idle_dim: usize = idle.iter().map(|&p| layout.dims()[p]).product();
        let id_idle = linalg::identity(idle_dim);
        let dout = self.out_layout.ambient_dim() * idle_dim;
        let mut out = CMat::zeros(dout, dout);
        for k in &self.kraus {
            let lifted = linalg::kron(k, &id_idle);
            out += &lifted * &permuted * lifted.adjoint();
        }
        let out_layout = self.out_layout.tensor(&layout.subset(&idle))?;
        Ok((out, out_layout))
    }
}

/// A finite-valued quantum instrument: trace-nonincreasing branches on a
/// common pair of layouts that sum to a channel.
#[derive(Clone, Debug)]
pub struct Instrument {
    branches: Vec<KrausMap>,
}

impl Instrument {
    pub fn new(branches: Vec<KrausMap>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::domain("an instrument needs at least one branch"));
        }
        let (in_layout, out_layout) = (branches[0].in_layout.clone(), branches[0].out_layout.clone());
        let din = in_layout.ambient_dim();
        let mut gram = CMat::zeros(din, din);
        for b in &branches {
            b.in_layout.expect_same(&in_layout, "instrument branch input")?;
            b.out_layout.expect_same(&out_layout, "instrument branch output")?;
            for k in &b.kraus {
                gram += k.adjoint() * k;
            }
        }
        let dev = linalg::max_abs(&(gram - linalg::identity(din)));
        if dev > tol::KRAUS_COMPLETENESS {
            return Err(Error::Completeness {
                dev,
                tol: tol::KRAUS_COMPLETENESS,
            });
        }
        Ok(Self { branches })
    }

    /// The trivial single-branch identity instrument.
    pub fn trivial(layout: HilbertLayout) -> Self {
        Self {
            branches: vec![KrausMap::identity(layout)],
        }
    }

    /// Instrument whose branches are single Kraus operators each; the family
    /// as a whole must satisfy completeness.
    pub fn rank_one(
        in_layout: HilbertLayout,
        out_layout: HilbertLayout,
        ops: Vec<CMat>,
    ) -> Result<Self> {
        let branches = ops
            .into_iter()
            .map(|k| KrausMap::new(in_layout.clone(), out_layout.clone(), vec![k]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(branches)
    }

    /// Renormalize an arbitrary family of raw matrices into a rank-one
    /// instrument: with `G = sum M* M`, the branches `M G^{-1/2}` satisfy
    /// completeness exactly on the support of `G`. Fails when `G` is
    /// singular (the family does not span the input space).
    pub fn rank_one_normalized(
        in_layout: HilbertLayout,
        out_layout: HilbertLayout,
        raw: Vec<CMat>,
    ) -> Result<Self> {
        let din = in_layout.ambient_dim();
        let mut gram = CMat::zeros(din, din);
        for m in &raw {
            if m.nrows() != out_layout.ambient_dim() || m.ncols() != din {
                return Err(Error::ShapeMismatch(format!(
                    "raw operator is {}x{}, expected {}x{din}",
                    m.nrows(),
                    m.ncols(),
                    out_layout.ambient_dim()
                )));
            }
            gram += m.adjoint() * m;
        }
        let eigs = linalg::herm_eigenvalues(&gram)?;
        if eigs.last().copied().unwrap_or(0.0) <= tol::RANK_CUTOFF {
            return Err(Error::domain(
                "raw Kraus family is rank deficient; cannot renormalize to an instrument",
            ));
        }
        let whiten = linalg::psd_inv_sqrt(&gram)?;
        let ops: Vec<CMat> = raw.iter().map(|m| m * &whiten).collect();
        Self::rank_one(in_layout, out_layout, ops)
    }

    /// Projective measurement instrument from a complete family of
    /// orthogonal projectors.
    pub fn projective(layout: HilbertLayout, projectors: Vec<CMat>) -> Result<Self> {
        Self::rank_one(layout.clone(), layout, projectors)
    }

    pub fn branches(&self) -> &[KrausMap] {
        &self.branches
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn in_layout(&self) -> &HilbertLayout {
        &self.branches[0].in_layout
    }

    pub fn out_layout(&self) -> &HilbertLayout {
        &self.branches[0].out_layout
    }
}

/// Instrument outcomes on a state whose factors include the instrument's
/// input labels: probability weights and normalized post-states, with
/// branches of weight at most 1e-12 pruned.
pub fn instrument_outcomes(
    t: &Instrument,
    sigma: &DensityMatrix,
) -> Result<Vec<(f64, DensityMatrix)>> {
    let acting: Vec<&str> = t.in_layout().labels();
    let mut out = Vec::with_capacity(t.branch_count());
    let mut total = 0.0;
    for branch in t.branches() {
        let raw = branch.apply(sigma, &acting)?;
        let lambda = raw.trace();
        total += lambda;
        if lambda > tol::BRANCH_PRUNE {
            let (_, post) = raw.normalized()?;
            out.push((lambda, post));
        }
    }
    if (total - 1.0).abs() > tol::KRAUS_COMPLETENESS {
        return Err(Error::NumericalAssertion(format!(
            "instrument outcome weights sum to {total:.12}, expected 1"
        )));
    }
    Ok(out)
}

/// The one-shot distillation functional: `sum_j lambda_j I_c(A > B, post_j)`
/// where A is the instrument's output register and B is everything the
/// instrument left untouched. May be negative.
pub fn one_shot_rate(t: &Instrument, sigma: &DensityMatrix) -> Result<f64> {
    let a_labels: Vec<String> = t.out_layout().labels().iter().map(|s| s.to_string()).collect();
    let in_labels: Vec<&str> = t.in_layout().labels();
    let b_labels: Vec<String> = sigma
        .layout()
        .labels()
        .iter()
        .filter(|l| !in_labels.contains(l))
        .map(|s| s.to_string())
        .collect();
    if b_labels.is_empty() {
        return Err(Error::LayoutMismatch(
            "one_shot_rate needs at least one untouched (B-side) factor".into(),
        ));
    }
    let mut rate = 0.0;
    for (lambda, post) in instrument_outcomes(t, sigma)? {
        rate += lambda * coherent_information(&post, &a_labels, &b_labels)?;
    }
    Ok(rate)
}

/// A one-way LOCC channel: Alice's instrument, and one Bob channel per
/// branch, applied conditionally on the (classically communicated) outcome.
#[derive(Clone, Debug)]
pub struct OneWayLocc {
    a_instrument: Instrument,
    b_channels: Vec<KrausMap>,
}

impl OneWayLocc {
    pub fn new(a_instrument: Instrument, b_channels: Vec<KrausMap>) -> Result<Self> {
        if b_channels.len() != a_instrument.branch_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} instrument branches but {} B-side channels",
                a_instrument.branch_count(),
                b_channels.len()
            )));
        }
        let b0 = &b_channels[0];
        for b in &b_channels {
            if !b.is_channel() {
                return Err(Error::domain(
                    "every B-side map of a one-way LOCC must be a channel",
                ));
            }
            b.in_layout.expect_same(&b0.in_layout, "B-side channel input")?;
            b.out_layout.expect_same(&b0.out_layout, "B-side channel output")?;
        }
        Ok(Self {
            a_instrument,
            b_channels,
        })
    }

    pub fn a_instrument(&self) -> &Instrument {
        &self.a_instrument
    }

    pub fn b_channels(&self) -> &[KrausMap] {
        &self.b_channels
    }

    pub fn b_in_layout(&self) -> &HilbertLayout {
        self.b_channels[0].in_layout()
    }

    pub fn b_out_layout(&self) -> &HilbertLayout {
        self.b_channels[0].out_layout()
    }

    /// The message-set cardinality: number of branches.
    pub fn branch_count(&self) -> usize {
        self.b_channels.len()
    }

    /// Apply to `rho`: `acting_on` lists first the labels fed to the
    /// instrument's input factors, then the labels fed to the B-side
    /// channels' input factors. The result lives on
    /// `[B-side output, A-side output, idle factors]`.
    pub fn apply(&self, rho: &DensityMatrix, acting_on: &[impl AsRef<str>]) -> Result<DensityMatrix> {
        let na = self.a_instrument.in_layout().factors();
        let nb = self.b_channels[0].in_layout.factors();
        if acting_on.len() != na + nb {
            return Err(Error::LayoutMismatch(format!(
                "one-way LOCC needs {na} A-side and {nb} B-side labels, got {}",
                acting_on.len()
            )));
        }
        let a_labels: Vec<&str> = acting_on[..na].iter().map(AsRef::as_ref).collect();
        let b_labels: Vec<&str> = acting_on[na..].iter().map(AsRef::as_ref).collect();
        let mut acc: Option<(CMat, HilbertLayout)> = None;
        for (a_branch, b_chan) in self.a_instrument.branches().iter().zip(&self.b_channels) {
            let after_a = a_branch.apply(rho, &a_labels)?;
            let after_b = b_chan.apply(&after_a, &b_labels)?;
            match &mut acc {
                None => acc = Some((after_b.matrix().clone(), after_b.layout().clone())),
                Some((m, layout)) => {
                    after_b.layout().expect_same(layout, "LOCC branch output")?;
                    *m += after_b.matrix();
                }
            }
        }
        let (mat, layout) = acc.expect("instruments have at least one branch");
        Ok(DensityMatrix::trusted(layout, mat))
    }

    /// Compose every B-side channel with a further channel (applied after).
    pub fn with_post_channel(&self, extra: &KrausMap) -> Result<Self> {
        let b_channels = self
            .b_channels
            .iter()
            .map(|b| extra.compose(b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.a_instrument.clone(), b_channels)
    }
}

/// The classical-flag form of an instrument: Alice applies the branch, Bob
/// records which branch fired in a fresh diagonal register of dimension J
/// appended to his side. The identity
/// `one_shot_rate(T, sigma) = I_c(A > B B', hat(T)(sigma))` is what makes
/// this channel useful.
pub fn hat_channel(t: &Instrument, b_layout: &HilbertLayout) -> Result<OneWayLocc> {
    let j = t.branch_count();
    let taken: Vec<String> = b_layout
        .labels()
        .iter()
        .chain(t.out_layout().labels().iter())
        .map(|s| s.to_string())
        .collect();
    let mut flag = String::from("B'");
    let mut n = 2usize;
    while taken.contains(&flag) {
        flag = format!("B'{n}");
        n += 1;
    }
    let flag_layout = HilbertLayout::single(j, flag)?;
    let out_layout = b_layout.tensor(&flag_layout)?;
    let db = b_layout.ambient_dim();
    let b_channels: Vec<KrausMap> = (0..j)
        .map(|branch| {
            // Single Kraus operator 1_B (x) |e_branch>.
            let mut k = CMat::zeros(db * j, db);
            for b in 0..db {
                k[(b * j + branch, b)] = Complex64::ONE;
            }
            KrausMap::new(b_layout.clone(), out_layout.clone(), vec![k])
        })
        .collect::<Result<Vec<_>>>()?;
    OneWayLocc::new(t.clone(), b_channels)
}

/// Jointly permute the AB blocks of a state on an l-fold bipartite product:
/// block `t` of the result is block `sigma(t)` of the input, and the layout
/// (labels included) stays fixed, so the operation is the block-permutation
/// unitary conjugation.
pub fn permute_factors(rho: &DensityMatrix, sigma: &Permutation) -> Result<DensityMatrix> {
    let n = rho.layout().factors();
    let l = sigma.len();
    if l == 0 || n != 2 * l {
        return Err(Error::LayoutMismatch(format!(
            "state has {n} factors; an l-fold AB product with l = {l} needs {}",
            2 * l
        )));
    }
    let dims = rho.layout().dims();
    let (da, db) = (dims[0], dims[1]);
    for t in 0..l {
        if dims[2 * t] != da || dims[2 * t + 1] != db {
            return Err(Error::LayoutMismatch(
                "factor dimensions are not a homogeneous l-fold AB pattern".into(),
            ));
        }
    }
    let mut factor_map = Vec::with_capacity(n);
    for t in 0..l {
        factor_map.push(2 * sigma.at(t));
        factor_map.push(2 * sigma.at(t) + 1);
    }
    let idx = crate::qcore::permutation_index_map(rho.layout(), &factor_map)?;
    let d = idx.len();
    let mat = CMat::from_fn(d, d, |r, c| rho.matrix()[(idx[r], idx[c])]);
    Ok(DensityMatrix::trusted(rho.layout().clone(), mat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{fidelity, trace_distance, von_neumann_entropy, PureState};
    use crate::random;

    fn qubit(label: &str) -> HilbertLayout {
        HilbertLayout::single(2, label).unwrap()
    }

    fn projectors_z() -> Vec<CMat> {
        let mut p0 = CMat::zeros(2, 2);
        p0[(0, 0)] = Complex64::ONE;
        let mut p1 = CMat::zeros(2, 2);
        p1[(1, 1)] = Complex64::ONE;
        vec![p0, p1]
    }

    #[test]
    fn identity_channel_leaves_input_unchanged() {
        let bell = PureState::maximally_entangled(2, "A", "B").unwrap().to_density();
        let id = KrausMap::identity(qubit("A"));
        let out = id.apply_channel(&bell, &["A"]).unwrap();
        assert!(trace_distance(&out, &bell).unwrap() < 1e-14);
        assert_eq!(out.layout().labels(), vec!["A", "B"]);
    }

    #[test]
    fn projective_branch_weight_and_poststate() {
        let mixed = DensityMatrix::maximally_mixed(qubit("A"));
        let p0 = KrausMap::new(qubit("A"), qubit("A"), vec![projectors_z().remove(0)]).unwrap();
        let out = p0.apply(&mixed, &["A"]).unwrap();
        assert!((out.trace() - 0.5).abs() < 1e-12);
        let (_, post) = out.normalized().unwrap();
        let zero = DensityMatrix::from_diagonal(qubit("A"), &[1.0, 0.0]).unwrap();
        assert!(trace_distance(&post, &zero).unwrap() < 1e-12);
    }

    #[test]
    fn depolarizing_kraus_map_matches_direct_formula() {
        let mut rng = random::seeded(21);
        let layout = HilbertLayout::new(vec![2, 2], ["A", "B"]).unwrap();
        let gamma = 0.3;
        let na = KrausMap::depolarizing(qubit("A"), gamma).unwrap();
        let nb = KrausMap::depolarizing(qubit("B"), gamma).unwrap();
        for _ in 0..10 {
            let rho =
                DensityMatrix::new(layout.clone(), random::random_density_mat(4, 4, &mut rng))
                    .unwrap();
            let via_kraus = nb
                .apply_channel(&na.apply_channel(&rho, &["A"]).unwrap(), &["B"])
                .unwrap()
                .reorder_labels(&["A", "B"])
                .unwrap();
            let direct = rho.depolarize_local(gamma).unwrap();
            assert!(trace_distance(&via_kraus, &direct).unwrap() < 1e-10);
        }
    }

    #[test]
    fn outcomes_of_measurement_on_classical_mixture() {
        let layout = HilbertLayout::new(vec![2, 2], ["A", "B"]).unwrap();
        let rho = DensityMatrix::from_diagonal(layout, &[0.5, 0.0, 0.0, 0.5]).unwrap();
        let t = Instrument::projective(qubit("A"), projectors_z()).unwrap();
        let outcomes = instrument_outcomes(&t, &rho).unwrap();
        assert_eq!(outcomes.len(), 2);
        for (which, (lambda, post)) in outcomes.iter().enumerate() {
            assert!((lambda - 0.5).abs() < 1e-12);
            // Post-state is |ii><ii|.
            let expected = {
                let l = HilbertLayout::new(vec![2, 2], ["A", "B"]).unwrap();
                let mut diag = [0.0; 4];
                diag[which * 3] = 1.0;
                DensityMatrix::from_diagonal(l, &diag).unwrap()
            };
            assert!(trace_distance(post, &expected).unwrap() < 1e-12);
        }
    }

    #[test]
    fn hadamard_basis_measurement_on_bell_gives_pure_poststates() {
        let bell = PureState::maximally_entangled(2, "A", "B").unwrap().to_density();
        let h = Complex64::new(0.5, 0.0);
        let plus = CMat::from_row_slice(2, 2, &[h, h, h, h]);
        let minus = CMat::from_row_slice(2, 2, &[h, -h, -h, h]);
        let t = Instrument::projective(qubit("A"), vec![plus, minus]).unwrap();
        let outcomes = instrument_outcomes(&t, &bell).unwrap();
        assert_eq!(outcomes.len(), 2);
        for (lambda, post) in &outcomes {
            assert!((lambda - 0.5).abs() < 1e-12);
            assert!(von_neumann_entropy(post).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn one_shot_rate_examples() {
        let bell = PureState::maximally_entangled(2, "A", "B").unwrap().to_density();
        let t = Instrument::trivial(qubit("A"));
        assert!((one_shot_rate(&t, &bell).unwrap() - 1.0).abs() < 1e-12);

        let layout = HilbertLayout::new(vec![2, 2], ["A", "B"]).unwrap();
        let product = DensityMatrix::from_diagonal(layout.clone(), &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(one_shot_rate(&t, &product).unwrap().abs() < 1e-12);

        let classical = DensityMatrix::from_diagonal(layout, &[0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!(one_shot_rate(&t, &classical).unwrap().abs() < 1e-12);
    }

    #[test]
    fn hat_channel_identity_on_measurement_instrument() {
        let layout = HilbertLayout::new(vec![2, 2], ["A", "B"]).unwrap();
        let rho = DensityMatrix::from_diagonal(layout, &[0.4, 0.0, 0.0, 0.6]).unwrap();
        let t = Instrument::projective(qubit("A"), projectors_z()).unwrap();
        let locc = hat_channel(&t, &qubit("B")).unwrap();
        let out = locc.apply(&rho, &["A", "B"]).unwrap();
        let lhs = one_shot_rate(&t, &rho).unwrap();
        let rhs = coherent_information(&out, &["A"], &["B", "B'"]).unwrap();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn permute_factors_matches_reconstruction_and_group_action() {
        let mut rng = random::seeded(17);
        let layout = HilbertLayout::new(vec![2, 2], ["A", "B"]).unwrap();
        let states: Vec<DensityMatrix> = (0..3)
            .map(|_| {
                DensityMatrix::new(layout.clone(), random::random_density_mat(4, 2, &mut rng))
                    .unwrap()
            })
            .collect();
        let build = |seq: &[usize]| {
            let mut acc = states[seq[0]].clone().tensor_power(1).unwrap();
            // tensor_power(1) only relabels to A1,B1; extend by hand.
            for (i, &s) in seq.iter().enumerate().skip(1) {
                let factor = {
                    let l = HilbertLayout::new(
                        vec![2, 2],
                        [format!("A{}", i + 1), format!("B{}", i + 1)],
                    )
                    .unwrap();
                    DensityMatrix::new(l, states[s].mat().clone()).unwrap()
                };
                acc = acc.tensor(&factor).unwrap();
            }
            acc
        };
        let seq = [0usize, 1, 2];
        let sigma = Permutation::new(vec![2, 0, 1]).unwrap();
        let permuted_seq: Vec<usize> = sigma.apply(&seq).unwrap();
        let lhs = permute_factors(&build(&seq), &sigma).unwrap();
        let rhs = build(&permuted_seq);
        assert!(trace_distance(&lhs, &rhs).unwrap() < 1e-12);

        // Group action: permuting by tau then sigma equals tau.compose(sigma).
        let tau = Permutation::new(vec![1, 2, 0]).unwrap();
        let two_step = permute_factors(&permute_factors(&build(&seq), &tau).unwrap(), &sigma).unwrap();
        let one_step = permute_factors(&build(&seq), &tau.compose(&sigma).unwrap()).unwrap();
        assert!(trace_distance(&two_step, &one_step).unwrap() < 1e-12);
    }

    #[test]
    fn locc_apply_preserves_trace_and_fidelity_bounds() {
        let mut rng = random::seeded(5);
        let layout = HilbertLayout::new(vec![2, 2], ["A", "B"]).unwrap();
        let t = Instrument::projective(qubit("A"), projectors_z()).unwrap();
        let locc = hat_channel(&t, &qubit("B")).unwrap();
        for _ in 0..10 {
            let rho =
                DensityMatrix::new(layout.clone(), random::random_density_mat(4, 3, &mut rng))
                    .unwrap();
            let out = locc.apply(&rho, &["A", "B"]).unwrap();
            assert!((linalg::trace_re(out.mat()) - 1.0).abs() < 1e-10);
            let f = fidelity(&out, &out).unwrap();
            assert!((f - 1.0).abs() < 1e-9);
        }
    }
}
