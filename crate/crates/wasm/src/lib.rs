//! Browser surface for the workbench. Three operations, each returning JSON
//! strings; the two scenario-backed ones return the exact report format the
//! CLI emits, so a browser run is reproducible from the command line by
//! copying the embedded config.

use avqslab_core::qcore::{von_neumann_entropy, DensityMatrix, HilbertLayout};
use avqslab_core::scenario;
use avqslab_core::schur::entropy_band_instrument;
use avqslab_core::{Error, Result};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Band-mass profile of `l` copies of diag(p, 1-p) at band width `eta`:
/// how much outcome weight the entropy-band measurement puts on each band,
/// which bands count as the neighborhood of the state's entropy, and the
/// total mass outside it.
pub fn band_masses_json(l: usize, eta: f64, p: f64) -> Result<String> {
    let layout = HilbertLayout::single(2, "A")?;
    let rho = DensityMatrix::from_diagonal(layout, &[p, 1.0 - p])?;
    let inst = entropy_band_instrument(2, l, eta)?;
    let masses = inst.band_masses(&rho)?;
    let s = von_neumann_entropy(&rho)?;
    let band = inst.band_index(s);
    let keep = inst.neighborhood(band);
    let bands: Vec<_> = inst
        .bands()
        .iter()
        .zip(&masses)
        .enumerate()
        .map(|(i, (&(lo, hi), mass))| {
            json!({
                "lo": lo,
                "hi": hi,
                "mass": mass,
                "in_neighborhood": keep.contains(&i),
            })
        })
        .collect();
    Ok(json!({
        "l": l,
        "eta": eta,
        "p": p,
        "state_entropy": s,
        "band_index": band,
        "off_band_mass": inst.off_band_mass(&rho)?,
        "bands": bands,
    })
    .to_string())
}

/// Merging-cost comparison for the N-state family over a Bell base, as a
/// full scenario report.
pub fn merging_gap_json(n: usize) -> Result<String> {
    run_scenario(json!({
        "command": "counterexample",
        "params": { "n": n },
    }))
}

/// Seeded permutation sample for the two-source leading-pair family, as a
/// full scenario report.
pub fn orbit_sample_json(
    l: usize,
    samples: usize,
    nu: f64,
    mismatch: f64,
    seed: u64,
) -> Result<String> {
    run_scenario(json!({
        "command": "derandomize",
        "params": {
            "set_size": 2,
            "l": l,
            "samples": samples,
            "nu": nu,
            "mismatch": mismatch,
        },
        "seed": seed,
    }))
}

fn run_scenario(config: serde_json::Value) -> Result<String> {
    let report = scenario::run_json(&config.to_string())?;
    serde_json::to_string(&report).map_err(|e| Error::Serialization(e.to_string()))
}

#[wasm_bindgen]
pub fn band_masses(l: u32, eta: f64, p: f64) -> std::result::Result<String, JsError> {
    band_masses_json(l as usize, eta, p).map_err(into_js)
}

#[wasm_bindgen]
pub fn merging_gap(n: u32) -> std::result::Result<String, JsError> {
    merging_gap_json(n as usize).map_err(into_js)
}

#[wasm_bindgen]
pub fn orbit_sample(
    l: u32,
    samples: u32,
    nu: f64,
    mismatch: f64,
    seed: u64,
) -> std::result::Result<String, JsError> {
    orbit_sample_json(l as usize, samples as usize, nu, mismatch, seed).map_err(into_js)
}

fn into_js(err: Error) -> JsError {
    JsError::new(&err.to_string())
}
