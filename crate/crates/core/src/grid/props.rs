use crate::{Error, Result};

/// Fluid and rock properties. Units: `gamma` bar/m, compressibilities 1/bar.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidRockProps {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    porosity: Vec<f64>,
    /// Volumetric source per unit volume and day, per element.
    source: Vec<f64>,
}

impl FluidRockProps {
    pub fn new(gamma: f64, alpha: f64, beta: f64, porosity: Vec<f64>) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
        }
        if !(alpha >= 0.0) || !(beta >= 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::invalid(format!("compressibilities must be >= 0, got alpha={alpha}, beta={beta}")));
        }
        for (e, &phi) in porosity.iter().enumerate() {
            if !(phi > 0.0 && phi <= 1.0) {
                return Err(Error::invalid(format!("element {e}: porosity {phi} outside (0, 1]")));
            }
            let c = gamma * (alpha + phi * beta);
            if !(c > 0.0) {
                return Err(Error::invalid(format!("element {e}: specific storage {c} is not positive")));
            }
        }
        let n = porosity.len();
        Ok(Self { gamma, alpha, beta, porosity, source: vec![0.0; n] })
    }

    pub fn uniform(n_elems: usize, gamma: f64, alpha: f64, beta: f64, phi: f64) -> Result<Self> {
        Self::new(gamma, alpha, beta, vec![phi; n_elems])
    }

    pub fn with_source(mut self, source: Vec<f64>) -> Result<Self> {
        if source.len() != self.porosity.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} source values for {} elements",
                source.len(),
                self.porosity.len()
            )));
        }
        if source.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("non-finite source term"));
        }
        self.source = source;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.porosity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.porosity.is_empty()
    }

    pub fn porosity(&self, e: usize) -> f64 {
        self.porosity[e]
    }

    pub fn porosities(&self) -> &[f64] {
        &self.porosity
    }

    pub fn source(&self, e: usize) -> f64 {
        self.source[e]
    }

    /// Specific storage `c = gamma (alpha + phi beta)`.
    pub fn storage(&self, e: usize) -> f64 {
        self.gamma * (self.alpha + self.porosity[e] * self.beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn storage_formula() {
        let p = FluidRockProps::new(0.0981, 1e-5, 4.5e-5, vec![0.2, 1.0]).unwrap();
        assert_eq!(p.storage(0), 0.0981 * (1e-5 + 0.2 * 4.5e-5));
        assert_eq!(p.storage(1), 0.0981 * (1e-5 + 4.5e-5));
    }

    #[test]
    fn rejects_invalid() {
        assert!(FluidRockProps::new(1.0, 1e-5, 1e-5, vec![0.0]).is_err());
        assert!(FluidRockProps::new(1.0, 1e-5, 1e-5, vec![1.1]).is_err());
        assert!(FluidRockProps::new(1.0, 0.0, 0.0, vec![0.5]).is_err());
        assert!(FluidRockProps::new(-1.0, 1e-5, 0.0, vec![0.5]).is_err());
        let p = FluidRockProps::uniform(2, 1.0, 1e-5, 0.0, 0.3).unwrap();
        assert!(p.with_source(vec![0.0]).is_err());
    }
}
