use serde::Serialize;

use crate::{Error, Result};

/// Per-element CFL numbers of one step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CflStats {
    pub chi: Vec<f64>,
    pub chi_inf: f64,
}

/// `chi = Q dt / (Omega phi)` with `Q` the total outflow of the element.
pub fn cfl(fluxes: &[[f64; 6]], volumes: &[f64], porosity: &[f64], dt: f64) -> Result<CflStats> {
    if fluxes.len() != volumes.len() || volumes.len() != porosity.len() {
        return Err(Error::DimensionMismatch(format!(
            "cfl: {} flux rows, {} volumes, {} porosities",
            fluxes.len(),
            volumes.len(),
            porosity.len()
        )));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("cfl needs a finite positive dt, got {dt}")));
    }
    let chi: Vec<f64> =
        fluxes.iter().zip(volumes.iter().zip(porosity)).map(|(q, (&v, &phi))| outflow(q) * dt / (v * phi)).collect();
    let chi_inf = chi.iter().copied().fold(0.0, f64::max);
    Ok(CflStats { chi, chi_inf })
}

/// Sum of the positive outward fluxes.
pub fn outflow(q: &[f64; 6]) -> f64 {
    q.iter().filter(|&&v| v > 0.0).sum()
}

/// Running arithmetic mean of per-step maxima.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CflMean {
    sum: f64,
    count: usize,
}

impl CflMean {
    pub fn push(&mut self, chi_inf: f64) {
        self.sum += chi_inf;
        self.count += 1;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }
}
