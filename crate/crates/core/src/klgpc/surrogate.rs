//! KL/gPC surrogate of the coarse trajectory as a function of the parameters.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::gpc::{gpc_eval_basis, gpc_fit, ParameterMap, PolyFamily};
use super::kl::{kl_build, kl_coefficients, KLBasis, SnapshotSet};
use crate::domain::{CoarseTrajectory, ParameterSample, TimeGrid};
use crate::error::{Result, SolverError};
use crate::models::ModelSpec;

/// Where a surrogate came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: ModelSpec,
    pub grid: TimeGrid,
    pub seed: u64,
    pub training_size: usize,
    pub eps_kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KLGpcSurrogate {
    pub provenance: Provenance,
    /// Flattened `U_1..U_N` mean over the training set.
    pub mean_field: Vec<f64>,
    /// Retained eigenvalues `lambda_1..lambda_{M_Q}`.
    pub eigenvalues: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
    pub discarded_energy_ratio: f64,
    pub degree: usize,
    pub basis_count: usize,
    pub family: PolyFamily,
    pub parameter_maps: Vec<ParameterMap>,
    /// Per mode, `h` of length `basis_count`.
    pub coefficients: Vec<Vec<f64>>,
    pub fit_residuals: Vec<f64>,
}

impl KLGpcSurrogate {
    /// KL truncation at `eps_kl`, then a gPC fit of degree `degree` (lowered if
    /// the training set is too small).
    pub fn fit(
        snap: &SnapshotSet,
        eps_kl: f64,
        degree: usize,
        family: PolyFamily,
        parameter_maps: Vec<ParameterMap>,
        provenance: Provenance,
    ) -> Result<Self> {
        let basis = kl_build(snap, eps_kl)?;
        Self::from_basis(snap, &basis, degree, family, parameter_maps, provenance)
    }

    pub fn from_basis(
        snap: &SnapshotSet,
        basis: &KLBasis,
        degree: usize,
        family: PolyFamily,
        parameter_maps: Vec<ParameterMap>,
        provenance: Provenance,
    ) -> Result<Self> {
        if let Some(s) = snap.samples.iter().find(|s| s.dim() != parameter_maps.len()) {
            return Err(SolverError::DimensionMismatch {
                expected: parameter_maps.len(),
                got: s.dim(),
            });
        }
        let points: Vec<Vec<f64>> = snap.samples.iter().map(|s| map_point(&parameter_maps, s)).collect();
        let zeta = kl_coefficients(snap, basis);
        let fit = gpc_fit(&points, &zeta, degree, family)?;
        let basis_count = super::gpc::gpc_basis_count(fit.degree, parameter_maps.len());
        Ok(Self {
            provenance,
            mean_field: snap.mean_field.as_slice().to_vec(),
            eigenvalues: basis.retained_eigenvalues().to_vec(),
            modes: basis.modes.iter().map(|g| g.as_slice().to_vec()).collect(),
            discarded_energy_ratio: basis.discarded_energy_ratio(),
            degree: fit.degree,
            basis_count,
            family,
            parameter_maps,
            coefficients: fit.coefficients.iter().map(|h| h.as_slice().to_vec()).collect(),
            fit_residuals: fit.residuals,
        })
    }

    /// `M_Q`.
    pub fn retained(&self) -> usize {
        self.modes.len()
    }

    /// Flattened prediction `u_bar + sum_i sqrt(lambda_i) (sum_j h_ij psi_j(xi)) g_i`.
    pub fn predict_field(&self, xi: &ParameterSample) -> Result<DVector<f64>> {
        let supports: Vec<(f64, f64)> = self.parameter_maps.iter().map(|m| (m.lo, m.hi)).collect();
        xi.validate(&supports)?;
        let psi = gpc_eval_basis(&map_point(&self.parameter_maps, xi), self.degree, self.family);
        let mut out = DVector::from_column_slice(&self.mean_field);
        for ((g, &lam), h) in self.modes.iter().zip(&self.eigenvalues).zip(&self.coefficients) {
            let zeta: f64 = h.iter().zip(&psi).map(|(a, b)| a * b).sum();
            let c = lam.sqrt() * zeta;
            for (o, gv) in out.iter_mut().zip(g) {
                *o += c * gv;
            }
        }
        Ok(out)
    }

    /// Predicted coarse trajectory, with the model's own initial state at `T_0`.
    pub fn predict(&self, xi: &ParameterSample) -> Result<CoarseTrajectory> {
        let initial = self.provenance.model.initial_condition(xi);
        CoarseTrajectory::from_flat(initial, &self.predict_field(xi)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn map_point(maps: &[ParameterMap], xi: &ParameterSample) -> Vec<f64> {
    maps.iter().zip(&xi.values).map(|(m, &x)| m.apply(x)).collect()
}

/// Predictions for many samples, concurrently.
pub fn surrogate_predict_all(s: &KLGpcSurrogate, samples: &[ParameterSample]) -> Result<Vec<CoarseTrajectory>> {
    use rayon::prelude::*;
    samples.par_iter().map(|xi| s.predict(xi)).collect()
}

/// Convenience wrapper for [`KLGpcSurrogate::predict`].
pub fn surrogate_predict(s: &KLGpcSurrogate, xi: &ParameterSample) -> Result<CoarseTrajectory> {
    s.predict(xi)
}
