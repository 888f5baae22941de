use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::timestep::TimestepController;
use crate::assembly::{assemble, BlockSystem, TimeStep};
use crate::edfa::EdfaConfig;
use crate::grid::{
    load_raster_field, rotate_tensor_field, synth_heterogeneous_field, BoundarySpec, ConductivityField, FluidRockProps,
    HexGrid, Side, SynthMode, Well,
};
use crate::krylov::BicgstabOptions;
use crate::{Error, Result};

/// Full run configuration, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub grid: GridConfig,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub props: PropsConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub preconditioner: EdfaConfig,
    #[serde(default)]
    pub solver: BicgstabOptions,
    #[serde(default)]
    pub timestep: TimestepController,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dome: Option<DomeConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomeConfig {
    pub amplitude: f64,
    /// Defaults to half the footprint diagonal.
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldSource {
    Homogeneous {
        k: f64,
    },
    Synthetic {
        seed: u64,
        kmin: f64,
        kmax: f64,
        #[serde(default)]
        mode: SynthMode,
        #[serde(default = "one")]
        kz_ratio: f64,
    },
    /// Component-blocked whitespace-separated values; relative paths are
    /// taken from the config file's directory.
    Raster {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    #[serde(flatten)]
    pub source: FieldSource,
    /// Align principal directions with the top surface.
    #[serde(default)]
    pub rotate: bool,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self { source: FieldSource::Homogeneous { k: 1.73e-5 }, rotate: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropsConfig {
    /// Specific weight in bar/m.
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub porosity: f64,
    /// Uniform random porosity in this range, overriding `porosity`.
    pub porosity_range: Option<[f64; 2]>,
    pub porosity_seed: u64,
    /// Volumetric source per unit volume.
    pub source: f64,
}

impl Default for PropsConfig {
    fn default() -> Self {
        Self {
            gamma: 0.101,
            alpha: 4.67e-5,
            beta: 4.84e-5,
            porosity: 0.2,
            porosity_range: None,
            porosity_seed: 0,
            source: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub pressure: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { pressure: 140.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiveSpot {
    pub producer: f64,
    pub injector: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideCondition {
    pub side: Side,
    pub pressure: Option<f64>,
    /// Outward flux per unit area.
    pub flux: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryConfig {
    pub five_spot: Option<FiveSpot>,
    pub wells: Vec<Well>,
    pub sides: Vec<SideCondition>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Write a VTK file of the final pressure field.
    pub vtk: bool,
    /// Keep a pressure snapshot every this many steps; 0 disables.
    pub snapshot_every: usize,
    /// Write the residual history of every solve.
    pub history: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Dynamic growth grid; both lists non-empty switches the pattern to dynamic.
    pub n_add: Vec<usize>,
    pub n_ent: Vec<usize>,
    pub tau_filt: Vec<f64>,
    /// Solve the steady system instead of the first timestep.
    pub steady: bool,
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file, resolving relative raster paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg: SimConfig = toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        if let FieldSource::Raster { path: rp } = &mut cfg.field.source {
            if rp.is_relative() {
                if let Some(dir) = path.parent() {
                    *rp = dir.join(&*rp);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.nx == 0 || g.ny == 0 || g.nz == 0 {
            return Err(Error::Config(format!("grid dimensions must be positive, got {}x{}x{}", g.nx, g.ny, g.nz)));
        }
        self.preconditioner.validate()?;
        self.timestep.validate()?;
        if !(self.solver.tol > 0.0) || self.solver.max_it == 0 {
            return Err(Error::Config(format!("solver needs tol > 0 and max_it >= 1: {:?}", self.solver)));
        }
        for s in &self.boundary.sides {
            if s.pressure.is_some() == s.flux.is_some() {
                return Err(Error::Config(format!("side {:?} needs exactly one of pressure or flux", s.side)));
            }
        }
        Ok(())
    }
}

/// A configured problem: geometry, coefficients, boundary conditions and initial state.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: HexGrid,
    pub field: ConductivityField,
    pub props: FluidRockProps,
    pub bc: BoundarySpec,
    pub p_init: Vec<f64>,
}

impl Problem {
    pub fn from_config(cfg: &SimConfig) -> Result<Self> {
        let g = &cfg.grid;
        let mut grid = HexGrid::build_structured(g.nx, g.ny, g.nz, g.dx, g.dy, g.dz)?;
        if let Some(d) = g.dome {
            let r = d.radius.unwrap_or_else(|| grid.default_dome_radius());
            grid = grid.deform_dome(d.amplitude, r)?;
        }
        let n = grid.n_elems();
        let mut field = match &cfg.field.source {
            FieldSource::Homogeneous { k } => ConductivityField::homogeneous(n, *k)?,
            FieldSource::Synthetic { seed, kmin, kmax, mode, kz_ratio } => {
                synth_heterogeneous_field(&grid, *seed, (*kmin, *kmax), *mode, *kz_ratio)?
            }
            FieldSource::Raster { path } => load_raster_field(path, &grid)?,
        };
        if cfg.field.rotate {
            field = rotate_tensor_field(&field, &grid)?;
        }
        let pc = &cfg.props;
        let porosity = match pc.porosity_range {
            Some([lo, hi]) => {
                if !(lo > 0.0 && lo <= hi) {
                    return Err(Error::Config(format!("invalid porosity range [{lo}, {hi}]")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(pc.porosity_seed);
                (0..n).map(|_| rng.random_range(lo..=hi)).collect()
            }
            None => vec![pc.porosity; n],
        };
        let props = FluidRockProps::new(pc.gamma, pc.alpha, pc.beta, porosity)?.with_source(vec![pc.source; n])?;
        let bc = boundary_spec(&grid, &cfg.boundary);
        Ok(Self { p_init: vec![cfg.initial.pressure; n], grid, field, props, bc })
    }

    pub fn assemble(&self, dt: TimeStep, p_prev: &[f64]) -> Result<BlockSystem> {
        assemble(&self.grid, &self.field, &self.props, &self.bc, dt, p_prev)
    }
}

fn boundary_spec(grid: &HexGrid, b: &BoundaryConfig) -> BoundarySpec {
    let mut bc = match b.five_spot {
        Some(f) => BoundarySpec::five_spot(grid, f.producer, f.injector),
        None => BoundarySpec::new(),
    };
    for w in &b.wells {
        bc = bc.with_well(w.i, w.j, w.pressure);
    }
    for s in &b.sides {
        bc = match (s.pressure, s.flux) {
            (Some(p), _) => bc.with_side_pressure(grid, s.side, p),
            (None, Some(q)) => bc.with_side_flux(grid, s.side, q),
            (None, None) => bc,
        };
    }
    bc
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[grid]
nx = 4
ny = 3
nz = 2
dx = 10.0
dy = 10.0
dz = 2.0
dome = { amplitude = 3.0 }

[field]
kind = "synthetic"
seed = 7
kmin = 1e-6
kmax = 1e-3
rotate = true

[boundary]
five_spot = { producer = 100.0, injector = 200.0 }

[preconditioner]
pattern = { kind = "static", prototype = "B" }
filtration = "post-s"

[timestep]
dt0 = 0.5
n_steps = 3
"#;

    #[test]
    fn parses_sample() {
        let cfg = SimConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.grid.dome.unwrap().amplitude, 3.0);
        assert!(cfg.field.rotate);
        assert_eq!(cfg.timestep.n_steps, 3);
        assert_eq!(cfg.solver.tol, 1e-8);
        let p = Problem::from_config(&cfg).unwrap();
        assert_eq!(p.grid.n_elems(), 24);
        assert!(p.field.angles().is_some());
        let sys = p.assemble(TimeStep::Dt(cfg.timestep.dt0), &p.p_init).unwrap();
        assert!(sys.dim() > 0);
    }

    #[test]
    fn round_trip() {
        let cfg = SimConfig::from_toml_str(SAMPLE).unwrap();
        let back = SimConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(SimConfig::from_toml_str("[grid]\nnx = 1"), Err(Error::Config(_))));
        let bad_side = format!("{SAMPLE}\n[[boundary.sides]]\nside = \"x-min\"\n");
        assert!(SimConfig::from_toml_str(&bad_side).is_err());
        let unknown = SAMPLE.replace("n_steps = 3", "n_steps = 3\nbogus = 1");
        assert!(SimConfig::from_toml_str(&unknown).is_err());
    }

    #[test]
    fn raster_path_is_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        let vals: Vec<String> = (0..3).map(|_| "1.0".to_string()).collect();
        std::fs::write(dir.path().join("k.txt"), vals.join(" ")).unwrap();
        let text = "[grid]\nnx = 1\nny = 1\nnz = 1\ndx = 1.0\ndy = 1.0\ndz = 1.0\n[field]\nkind = \"raster\"\npath = \"k.txt\"\n";
        std::fs::write(dir.path().join("c.toml"), text).unwrap();
        let cfg = SimConfig::load(dir.path().join("c.toml")).unwrap();
        let p = Problem::from_config(&cfg).unwrap();
        assert_eq!(p.field.len(), 1);
    }
}
