//! JSON mirror types for everything that crosses a file boundary.
//!
//! Parsing is two-phase on purpose: serde gets the shape (missing fields,
//! wrong types -> schema errors), then the conversion into the real domain
//! type runs the physicality checks (Hermiticity, positivity, traces ->
//! numerical errors). The CLI maps the two phases to different exit codes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::qcore::{DensityMatrix, HilbertLayout};

/// Dense complex matrix as separate real/imaginary row-major grids.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComplexMatJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl ComplexMatJson {
    pub fn from_mat(m: &CMat) -> Self {
        let rows = m.nrows();
        let cols = m.ncols();
        let mut re = vec![vec![0.0; cols]; rows];
        let mut im = vec![vec![0.0; cols]; rows];
        for i in 0..rows {
            for j in 0..cols {
                re[i][j] = m[(i, j)].re;
                im[i][j] = m[(i, j)].im;
            }
        }
        Self { re, im }
    }

    pub fn to_mat(&self) -> Result<CMat> {
        let rows = self.re.len();
        if rows == 0 {
            return Err(Error::Serialization("empty matrix".into()));
        }
        let cols = self.re[0].len();
        let shape_ok = self.im.len() == rows
            && self.re.iter().all(|r| r.len() == cols)
            && self.im.iter().all(|r| r.len() == cols);
        if !shape_ok {
            return Err(Error::Serialization(
                "re/im grids are ragged or of different shapes".into(),
            ));
        }
        Ok(CMat::from_fn(rows, cols, |i, j| {
            Complex64::new(self.re[i][j], self.im[i][j])
        }))
    }
}

/// Density matrix on disk: `{"dims": [...], "labels": [...], "re": [[...]],
/// "im": [[...]]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateJson {
    pub dims: Vec<usize>,
    pub labels: Vec<String>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl StateJson {
    pub fn from_state(rho: &DensityMatrix) -> Self {
        let m = ComplexMatJson::from_mat(rho.mat());
        Self {
            dims: rho.layout().dims().to_vec(),
            labels: rho.layout().labels().iter().map(|s| s.to_string()).collect(),
            re: m.re,
            im: m.im,
        }
    }

    pub fn to_state(&self) -> Result<DensityMatrix> {
        let layout = HilbertLayout::new(self.dims.clone(), self.labels.clone())?;
        let mat = ComplexMatJson {
            re: self.re.clone(),
            im: self.im.clone(),
        }
        .to_mat()?;
        DensityMatrix::new(layout, mat)
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        StateJson::from_state(self).serialize(serializer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::PureState;

    #[test]
    fn state_round_trips_through_json() {
        let bell = PureState::maximally_entangled(2, "A", "B").unwrap().to_density();
        let json = serde_json::to_string(&bell).unwrap();
        let parsed: StateJson = serde_json::from_str(&json).unwrap();
        let back = parsed.to_state().unwrap();
        assert!(crate::qcore::trace_distance(&bell, &back).unwrap() < 1e-14);
        assert_eq!(back.layout().labels(), vec!["A", "B"]);
    }

    #[test]
    fn unphysical_matrix_is_rejected_after_parse() {
        let json = r#"{"dims":[2],"labels":["A"],"re":[[2.0,0.0],[0.0,-1.0]],"im":[[0.0,0.0],[0.0,0.0]]}"#;
        let parsed: StateJson = serde_json::from_str(json).unwrap();
        assert!(parsed.to_state().is_err());
    }
}
