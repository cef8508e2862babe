//! Finite generating sets of bipartite states and the adversarial-source
//! machinery built on them: mixtures and product states indexed by
//! sequences, Hausdorff distance, type classes, permutation-orbit
//! robustification, and seeded derandomization of the orbit average.

use crate::channels::OneWayLocc;
use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::qcore::{fidelity, trace_distance, DensityMatrix, HilbertLayout, PureState};
use crate::random::{seeded_stream, SeededRng};
use crate::tol;

/// Exhaustive permutation-orbit cap: orbits are enumerated exactly, and
/// 8! = 40320 terms is the largest orbit evaluated at desk scale.
pub const PERM_CAP: usize = 8;

/// Cap on exhaustively enumerated sequence families `S^l`.
pub const SEQ_CAP: usize = 1 << 20;

/// A finite family of states on a common layout, addressed by label or by
/// index; the index order is the sequence alphabet.
#[derive(Clone, Debug)]
pub struct StateSet {
    labels: Vec<String>,
    states: Vec<DensityMatrix>,
}

impl StateSet {
    pub fn new(entries: Vec<(String, DensityMatrix)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::domain("a state set needs at least one state"));
        }
        let mut labels: Vec<String> = Vec::with_capacity(entries.len());
        let mut states: Vec<DensityMatrix> = Vec::with_capacity(entries.len());
        for (label, state) in entries {
            if labels.contains(&label) {
                return Err(Error::DuplicateLabel(label));
            }
            if !states.is_empty() {
                state
                    .layout()
                    .expect_same(states[0].layout(), "state set member")?;
            }
            labels.push(label);
            states.push(state);
        }
        Ok(Self { labels, states })
    }

    /// Convenience constructor labeling states "0", "1", ... by position.
    pub fn indexed(states: Vec<DensityMatrix>) -> Result<Self> {
        let entries = states
            .into_iter()
            .enumerate()
            .map(|(i, s)| (i.to_string(), s))
            .collect();
        Self::new(entries)
    }

    pub fn size(&self) -> usize {
        self.states.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn layout(&self) -> &HilbertLayout {
        self.states[0].layout()
    }

    pub fn state(&self, idx: usize) -> Result<&DensityMatrix> {
        self.states.get(idx).ok_or(Error::UnknownLabel(idx.to_string()))
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }
}

/// A probability distribution over the set's alphabet.
#[derive(Clone, Debug)]
pub struct MixtureWeights {
    p: Vec<f64>,
}

impl MixtureWeights {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::domain("empty weight vector"));
        }
        if p.iter().any(|&w| w < -tol::PROB_SUM || !w.is_finite()) {
            return Err(Error::domain("negative or non-finite mixture weight"));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > tol::PROB_SUM {
            return Err(Error::ProbabilitySum(total));
        }
        Ok(Self { p })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("empty weight vector"));
        }
        Ok(Self {
            p: vec![1.0 / n as f64; n],
        })
    }

    pub fn point_mass(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return Err(Error::domain("point mass index out of range"));
        }
        let mut p = vec![0.0; n];
        p[at] = 1.0;
        Ok(Self { p })
    }

    pub fn weights(&self) -> &[f64] {
        &self.p
    }
}

/// The convex mixture `sum_s p(s) rho_s`.
pub fn mixture(set: &StateSet, w: &MixtureWeights) -> Result<DensityMatrix> {
    if w.p.len() != set.size() {
        return Err(Error::ShapeMismatch(format!(
            "{} weights for {} states",
            w.p.len(),
            set.size()
        )));
    }
    let mut mat = set.states[0].mat() * num_complex::Complex64::new(w.p[0], 0.0);
    for (state, &weight) in set.states.iter().zip(&w.p).skip(1) {
        mat += state.mat() * num_complex::Complex64::new(weight, 0.0);
    }
    Ok(DensityMatrix::trusted(set.layout().clone(), mat))
}

/// The product state `rho_{s_1} (x) ... (x) rho_{s_l}` indexed by a
/// sequence over the set's alphabet, with per-copy suffixed labels: a set
/// on `(A, B)` yields `(A1, B1, ..., Al, Bl)`.
pub fn avqs_state(set: &StateSet, seq: &[usize]) -> Result<DensityMatrix> {
    if seq.is_empty() {
        return Err(Error::domain("sequence must have at least one symbol"));
    }
    let mut acc: Option<DensityMatrix> = None;
    for (t, &s) in seq.iter().enumerate() {
        let base = set.state(s)?;
        let copy = DensityMatrix::trusted(base.layout().suffixed(t + 1), base.mat().clone());
        acc = Some(match acc {
            None => copy,
            Some(a) => a.tensor(&copy)?,
        });
    }
    Ok(acc.expect("nonempty sequence"))
}

/// Hausdorff distance between two finite state families in trace norm:
/// the larger of the two directed sup-inf distances.
pub fn hausdorff_distance(x: &StateSet, y: &StateSet) -> Result<f64> {
    x.layout().expect_same(y.layout(), "Hausdorff distance")?;
    let directed = |from: &StateSet, to: &StateSet| -> Result<f64> {
        let mut worst = 0.0f64;
        for a in &from.states {
            let mut best = f64::INFINITY;
            for b in &to.states {
                best = best.min(trace_distance(a, b)?);
            }
            worst = worst.max(best);
        }
        Ok(worst)
    };
    Ok(directed(x, y)?.max(directed(y, x)?))
}

/// The empirical distribution of some length-`l` sequence, stored as
/// symbol counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeClass {
    counts: Vec<usize>,
}

impl TypeClass {
    pub fn of_sequence(set_size: usize, seq: &[usize]) -> Result<Self> {
        let mut counts = vec![0usize; set_size];
        for &s in seq {
            *counts
                .get_mut(s)
                .ok_or(Error::UnknownLabel(s.to_string()))? += 1;
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn blocklength(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn distribution(&self) -> Vec<f64> {
        let l = self.blocklength() as f64;
        self.counts.iter().map(|&c| c as f64 / l).collect()
    }
}

/// All types of length-`l` sequences over an alphabet of the given size;
/// there are exactly C(l + size − 1, size − 1) of them.
pub fn enumerate_types(set_size: usize, l: usize) -> Result<Vec<TypeClass>> {
    if set_size == 0 || l == 0 {
        return Err(Error::domain("types need a nonempty alphabet and l >= 1"));
    }
    let mut out = Vec::new();
    let mut counts = vec![0usize; set_size];
    fn rec(slot: usize, remaining: usize, counts: &mut Vec<usize>, out: &mut Vec<TypeClass>) {
        if slot + 1 == counts.len() {
            counts[slot] = remaining;
            out.push(TypeClass {
                counts: counts.clone(),
            });
            return;
        }
        for c in (0..=remaining).rev() {
            counts[slot] = c;
            rec(slot + 1, remaining - c, counts, out);
        }
    }
    rec(0, l, &mut counts, &mut out);
    Ok(out)
}

/// All sequences in `S^l` in lexicographic order.
pub fn enumerate_sequences(set_size: usize, l: usize) -> Result<Vec<Vec<usize>>> {
    if set_size == 0 || l == 0 {
        return Err(Error::domain("sequences need a nonempty alphabet and l >= 1"));
    }
    let total = set_size
        .checked_pow(l as u32)
        .filter(|&t| t <= SEQ_CAP)
        .ok_or_else(|| Error::domain(format!("sequence family larger than cap {SEQ_CAP}")))?;
    let mut out = Vec::with_capacity(total);
    let mut seq = vec![0usize; l];
    loop {
        out.push(seq.clone());
        // Odometer increment.
        let mut t = l;
        loop {
            if t == 0 {
                return Ok(out);
            }
            t -= 1;
            seq[t] += 1;
            if seq[t] < set_size {
                break;
            }
            seq[t] = 0;
        }
    }
}

fn seq_index(set_size: usize, seq: &[usize]) -> Result<usize> {
    let mut idx = 0usize;
    for &s in seq {
        if s >= set_size {
            return Err(Error::UnknownLabel(s.to_string()));
        }
        idx = idx * set_size + s;
    }
    Ok(idx)
}

/// A total map from sequences `S^l` to fidelity values in `[0, 1]`, stored
/// densely in lexicographic sequence order.
#[derive(Clone, Debug)]
pub struct FidelityFunction {
    set_size: usize,
    l: usize,
    values: Vec<f64>,
}

impl FidelityFunction {
    pub fn from_fn(set_size: usize, l: usize, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let values = enumerate_sequences(set_size, l)?
            .iter()
            .map(|seq| clip_fidelity(f(seq)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            set_size,
            l,
            values,
        })
    }

    pub fn from_values(set_size: usize, l: usize, values: Vec<f64>) -> Result<Self> {
        let expected = set_size
            .checked_pow(l as u32)
            .filter(|&t| t <= SEQ_CAP)
            .ok_or_else(|| Error::domain(format!("sequence family larger than cap {SEQ_CAP}")))?;
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {expected} sequences",
                values.len()
            )));
        }
        let values = values.into_iter().map(clip_fidelity).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            set_size,
            l,
            values,
        })
    }

    pub fn constant(set_size: usize, l: usize, value: f64) -> Result<Self> {
        Self::from_fn(set_size, l, |_| value)
    }

    /// The reference family used by the derandomization examples: full
    /// fidelity when the two leading symbols agree, `mismatch` otherwise.
    pub fn leading_pair_indicator(set_size: usize, l: usize, mismatch: f64) -> Result<Self> {
        if l < 2 {
            return Err(Error::domain("leading-pair family needs l >= 2"));
        }
        if !(0.0..=1.0).contains(&mismatch) {
            return Err(Error::domain("mismatch fidelity outside [0, 1]"));
        }
        Self::from_fn(set_size, l, |seq| if seq[0] == seq[1] { 1.0 } else { mismatch })
    }

    pub fn set_size(&self) -> usize {
        self.set_size
    }

    pub fn blocklength(&self) -> usize {
        self.l
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, seq: &[usize]) -> Result<f64> {
        if seq.len() != self.l {
            return Err(Error::ShapeMismatch(format!(
                "sequence length {} vs table blocklength {}",
                seq.len(),
                self.l
            )));
        }
        Ok(self.values[seq_index(self.set_size, seq)?])
    }

    /// The failure functional of the permuted table: `1 - f(sigma(s^l))`.
    pub fn failure(&self, sigma: &Permutation, seq: &[usize]) -> Result<f64> {
        Ok(1.0 - self.get(&sigma.apply(seq)?)?)
    }
}

fn clip_fidelity(v: f64) -> Result<f64> {
    if !v.is_finite() || !(-1e-6..=1.0 + 1e-6).contains(&v) {
        return Err(Error::domain(format!("fidelity value {v} outside [0, 1]")));
    }
    Ok(v.clamp(0.0, 1.0))
}

/// Per-type i.i.d. averages and the worst slack `max_q (1 - E_q[f])`.
#[derive(Clone, Debug)]
pub struct IidCheck {
    pub per_type: Vec<(TypeClass, f64)>,
    pub worst_slack: f64,
    pub all_hold: bool,
}

/// Evaluate `E_q[f] = sum_{s^l} f(s^l) prod_t q(s_t)` exactly for every
/// type `q`, and report whether each clears `1 - gamma`.
pub fn check_iid_condition(f: &FidelityFunction, gamma: f64) -> Result<IidCheck> {
    let sequences = enumerate_sequences(f.set_size, f.l)?;
    let mut per_type = Vec::new();
    let mut worst_slack = 0.0f64;
    for ty in enumerate_types(f.set_size, f.l)? {
        let q = ty.distribution();
        let mut avg = 0.0;
        for seq in &sequences {
            let weight: f64 = seq.iter().map(|&s| q[s]).product();
            if weight > 0.0 {
                avg += weight * f.get(seq)?;
            }
        }
        worst_slack = worst_slack.max(1.0 - avg);
        per_type.push((ty, avg));
    }
    let all_hold = per_type.iter().all(|(_, avg)| *avg >= 1.0 - gamma - 1e-12);
    Ok(IidCheck {
        per_type,
        worst_slack,
        all_hold,
    })
}

/// The exact orbit average `(1/l!) sum_sigma f(sigma(s^l))`.
pub fn permutation_average(f: &FidelityFunction, seq: &[usize]) -> Result<f64> {
    if f.l > PERM_CAP {
        return Err(Error::domain(format!(
            "blocklength {} above exhaustive permutation cap {PERM_CAP}",
            f.l
        )));
    }
    let perms = Permutation::enumerate(f.l);
    let mut total = 0.0;
    for sigma in &perms {
        total += f.get(&sigma.apply(seq)?)?;
    }
    Ok(total / perms.len() as f64)
}

/// Robustification guarantee for the orbit average: with `gamma` the worst
/// i.i.d. slack, every orbit average is at least `1 - (l+1)^{|S|} gamma`.
pub fn robustification_floor(set_size: usize, l: usize, gamma: f64) -> f64 {
    1.0 - ((l + 1) as f64).powi(set_size as i32) * gamma
}

/// Apply a protocol to the permuted input `U_sigma rho U_sigma^*` and
/// measure fidelity against a pure target, reordering the output to the
/// target's factor order.
fn protocol_fidelity(
    protocol: &OneWayLocc,
    rho: &DensityMatrix,
    acting: &[String],
    target: &DensityMatrix,
) -> Result<f64> {
    let out = protocol.apply(rho, acting)?;
    let aligned = out.reorder_labels(&target.layout().labels())?;
    fidelity(&aligned, target)
}

/// The permutation-averaged fidelity table of a block protocol on an
/// `l`-fold product of the set's (A, B) layout:
/// `f_avg(s^l) = (1/l!) sum_sigma F(protocol(U_sigma rho_{s^l} U_sigma^*), target)`.
/// By linearity of fidelity against a pure target, this equals the
/// fidelity of the permutation-averaged protocol itself.
pub fn robustify(
    protocol: &OneWayLocc,
    set: &StateSet,
    target: &PureState,
) -> Result<FidelityFunction> {
    if set.layout().factors() != 2 {
        return Err(Error::LayoutMismatch(
            "robustification expects a two-factor (A, B) state set".into(),
        ));
    }
    let l = protocol.a_instrument().in_layout().factors();
    if l > PERM_CAP {
        return Err(Error::domain(format!(
            "blocklength {l} above exhaustive permutation cap {PERM_CAP}"
        )));
    }
    let set_labels = set.layout().labels();
    let mut acting: Vec<String> = (1..=l).map(|t| format!("{}{t}", set_labels[0])).collect();
    acting.extend((1..=l).map(|t| format!("{}{t}", set_labels[1])));

    let target_density = target.to_density();
    let perms = Permutation::enumerate(l);
    let sequences = enumerate_sequences(set.size(), l)?;
    let values = map_sequences(&sequences, |seq| {
        let rho = avqs_state(set, seq)?;
        let mut total = 0.0;
        for sigma in &perms {
            let permuted = crate::channels::permute_factors(&rho, sigma)?;
            total += protocol_fidelity(protocol, &permuted, &acting, &target_density)?;
        }
        Ok(total / perms.len() as f64)
    })?;
    FidelityFunction::from_values(set.size(), l, values)
}

#[cfg(feature = "parallel")]
fn map_sequences<F>(sequences: &[Vec<usize>], f: F) -> Result<Vec<f64>>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    use rayon::prelude::*;
    // Collect in sequence order so results are independent of scheduling.
    sequences.par_iter().map(|seq| f(seq)).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_sequences<F>(sequences: &[Vec<usize>], f: F) -> Result<Vec<f64>>
where
    F: Fn(&[usize]) -> Result<f64>,
{
    sequences.iter().map(|seq| f(seq)).collect()
}

/// Sampling plan for derandomizing a permutation average.
#[derive(Clone, Debug)]
pub struct DerandomizationPlan {
    pub samples: usize,
    pub nu: f64,
    pub seed: u64,
    pub max_retries: usize,
}

impl DerandomizationPlan {
    pub fn new(samples: usize, nu: f64, seed: u64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::domain("derandomization needs at least one sample"));
        }
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::domain(format!("failure level nu = {nu} outside (0, 1)")));
        }
        Ok(Self {
            samples,
            nu,
            seed,
            max_retries: 4,
        })
    }
}

/// Outcome of a derandomization run.
#[derive(Clone, Debug)]
pub struct DerandomizationReport {
    /// The drawn permutations of the final attempt.
    pub permutations: Vec<Permutation>,
    /// `max_{s^l} (1/K) sum_k g(sigma_k, s^l)`.
    pub worst_empirical: f64,
    /// Exact worst expected failure `max_{s^l} E_sigma[g]`.
    pub epsilon: f64,
    /// `1 - |S|^l 2^{-K (nu - 2 epsilon)}`: probability floor for a uniform
    /// draw to succeed. Non-positive values are reported, not fatal.
    pub analytic_bound: f64,
    /// Per-sample classical communication overhead, `log2(K) / l`.
    pub rate_overhead: f64,
    /// Number of seeds tried (first attempt counts as 1).
    pub attempts: usize,
    /// Whether the final attempt's worst empirical mean is at most `nu`.
    pub succeeded: bool,
}

/// Draw `K` seeded permutations and certify the worst empirical failure of
/// `g` over all sequences, retrying on fresh seed streams when the draw
/// misses the target level.
pub fn derandomize<G>(
    g: G,
    set_size: usize,
    l: usize,
    plan: &DerandomizationPlan,
) -> Result<DerandomizationReport>
where
    G: Fn(&Permutation, &[usize]) -> Result<f64>,
{
    if l > PERM_CAP {
        return Err(Error::domain(format!(
            "blocklength {l} above exhaustive permutation cap {PERM_CAP}"
        )));
    }
    let sequences = enumerate_sequences(set_size, l)?;
    let all_perms = Permutation::enumerate(l);

    // Exact worst expected failure over the full orbit.
    let mut epsilon = 0.0f64;
    for seq in &sequences {
        let mut mean = 0.0;
        for sigma in &all_perms {
            mean += g(sigma, seq)?;
        }
        epsilon = epsilon.max(mean / all_perms.len() as f64);
    }

    let k = plan.samples as f64;
    let analytic_bound =
        1.0 - (set_size as f64).powi(l as i32) * (-k * (plan.nu - 2.0 * epsilon)).exp2();

    let mut attempts = 0usize;
    let mut permutations = Vec::new();
    let mut worst_empirical = f64::INFINITY;
    while attempts <= plan.max_retries {
        let mut rng: SeededRng = seeded_stream(plan.seed, attempts as u64);
        permutations = (0..plan.samples)
            .map(|_| Permutation::random(l, &mut rng))
            .collect();
        worst_empirical = 0.0;
        for seq in &sequences {
            let mut mean = 0.0;
            for sigma in &permutations {
                mean += g(sigma, seq)?;
            }
            worst_empirical = worst_empirical.max(mean / k);
        }
        attempts += 1;
        if worst_empirical <= plan.nu {
            break;
        }
    }

    Ok(DerandomizationReport {
        permutations,
        worst_empirical,
        epsilon,
        analytic_bound,
        rate_overhead: (plan.samples as f64).log2() / l as f64,
        attempts,
        succeeded: worst_empirical <= plan.nu,
    })
}
