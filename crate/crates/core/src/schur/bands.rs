//! The entropy-estimating instrument: a projection-valued measure on
//! `(C^d)^{tensor l}` whose outcomes are bands of normalized box-length
//! entropy.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::qcore::{von_neumann_entropy, DensityMatrix};
use crate::tol;

use super::frames::{enumerate_frames, YoungFrame};
use super::projectors::all_projectors;

/// Entropy bands of width `eta` covering `[0, log d]`, with one projector
/// per band: the sum of all isotypic projectors whose frame entropy falls
/// in the band. The first band is closed, the rest are half-open `(lo, hi]`,
/// and the last band's upper edge is forced to `log d` even when that is
/// not a multiple of `eta`.
#[derive(Clone, Debug)]
pub struct EntropyBandInstrument {
    d: usize,
    l: usize,
    eta: f64,
    bands: Vec<(f64, f64)>,
    projectors: Vec<CMat>,
    band_frames: Vec<Vec<YoungFrame>>,
}

pub fn entropy_band_instrument(d: usize, l: usize, eta: f64) -> Result<EntropyBandInstrument> {
    if d < 2 || l == 0 {
        return Err(Error::domain("entropy bands need d >= 2 and l >= 1"));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!("band width eta = {eta} outside (0, 1]")));
    }
    let log_d = (d as f64).log2();
    let mut bands = Vec::new();
    let mut lo = 0.0;
    loop {
        let hi = lo + eta;
        if hi >= log_d - 1e-12 {
            bands.push((lo, log_d));
            break;
        }
        bands.push((lo, hi));
        lo = hi;
    }

    let frames = enumerate_frames(d, l)?;
    let projs = all_projectors(d, l)?;
    let dim = d.pow(l as u32);
    let mut band_frames: Vec<Vec<YoungFrame>> = vec![Vec::new(); bands.len()];
    let mut projectors = vec![CMat::zeros(dim, dim); bands.len()];
    for (frame, proj) in frames.iter().zip(&projs) {
        let i = band_of(&bands, frame.entropy());
        band_frames[i].push(frame.clone());
        projectors[i] += proj.matrix();
    }

    let mut total = CMat::zeros(dim, dim);
    for p in &projectors {
        total += p;
    }
    let dev = linalg::max_abs(&(total - linalg::identity(dim)));
    if dev > tol::HERMITICITY {
        return Err(Error::NumericalAssertion(format!(
            "entropy band projectors sum to identity only within {dev:.2e}"
        )));
    }

    Ok(EntropyBandInstrument {
        d,
        l,
        eta,
        bands,
        projectors,
        band_frames,
    })
}

fn band_of(bands: &[(f64, f64)], s: f64) -> usize {
    for (i, &(_, hi)) in bands.iter().enumerate() {
        if s <= hi {
            return i;
        }
    }
    bands.len() - 1
}

impl EntropyBandInstrument {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn copies(&self) -> usize {
        self.l
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn bands(&self) -> &[(f64, f64)] {
        &self.bands
    }

    pub fn projectors(&self) -> &[CMat] {
        &self.projectors
    }

    pub fn band_frames(&self) -> &[Vec<YoungFrame>] {
        &self.band_frames
    }

    /// Index of the band holding an entropy value.
    pub fn band_index(&self, s: f64) -> usize {
        band_of(&self.bands, s)
    }

    /// Band indices within distance one of band `i`.
    pub fn neighborhood(&self, i: usize) -> Vec<usize> {
        (0..self.bands.len()).filter(|&j| i.abs_diff(j) <= 1).collect()
    }

    /// Outcome distribution `tr(p_i rho^{tensor l})` for `l` copies of a
    /// single-system state.
    pub fn band_masses(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        if rho.layout().factors() != 1 || rho.layout().ambient_dim() != self.d {
            return Err(Error::LayoutMismatch(format!(
                "entropy bands expect a single system of dimension {}",
                self.d
            )));
        }
        let mut power = rho.mat().clone();
        for _ in 1..self.l {
            power = linalg::kron(&power, rho.mat());
        }
        Ok(self
            .projectors
            .iter()
            .map(|p| linalg::trace_re(&(p * &power)).max(0.0))
            .collect())
    }

    /// Probability that the estimate lands more than one band away from the
    /// band holding the state's own entropy.
    pub fn off_band_mass(&self, rho: &DensityMatrix) -> Result<f64> {
        let i = self.band_index(von_neumann_entropy(rho)?);
        let near = self.neighborhood(i);
        let masses = self.band_masses(rho)?;
        Ok(masses
            .iter()
            .enumerate()
            .filter(|(j, _)| !near.contains(j))
            .map(|(_, m)| m)
            .sum())
    }

    /// The band projectors as single-Kraus instrument branches on an
    /// `l`-fold product layout with labels `q1..ql`.
    pub fn as_instrument(&self) -> Result<crate::channels::Instrument> {
        let layout = crate::qcore::HilbertLayout::new(
            vec![self.d; self.l],
            (1..=self.l).map(|t| format!("q{t}")).collect::<Vec<_>>(),
        )?;
        crate::channels::Instrument::rank_one(
            layout.clone(),
            layout,
            self.projectors.clone(),
        )
    }
}

/// Convenience wrapper: masses of a diagonal qubit state, used by the CLI
/// band table.
pub fn band_mass_table(
    d: usize,
    eta: f64,
    spectrum: &[f64],
    copies: &[usize],
) -> Result<Vec<(usize, Vec<f64>)>> {
    let layout = crate::qcore::HilbertLayout::single(d, "A")?;
    let rho = DensityMatrix::from_diagonal(layout, spectrum)?;
    copies
        .iter()
        .map(|&l| {
            let inst = entropy_band_instrument(d, l, eta)?;
            Ok((l, inst.band_masses(&rho)?))
        })
        .collect()
}
