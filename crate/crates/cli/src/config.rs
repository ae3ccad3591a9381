//! JSON run configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use diffid_core::discretize::{build_grid, Domain, Grid};
use diffid_core::mms::ScenarioKind;
use diffid_core::problem::{Settings, PSI_FLOOR};
use diffid_core::spectral::SpectralParams;
use diffid_core::Strategy;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub domain: DomainCfg,
    pub grid: GridCfg,
    pub spectral: SpectralCfg,
    #[serde(default)]
    pub scheme: SchemeCfg,
    #[serde(default)]
    pub certify: CertifyCfg,
    #[serde(default)]
    pub picard: PicardCfg,
    pub scenario: Option<ScenarioCfg>,
    pub data: Option<DataCfg>,
    #[serde(default)]
    pub output: OutputCfg,
    #[serde(default)]
    pub mms: MmsCfg,
    /// Directory of the config file; data paths are resolved against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainCfg {
    pub dim: usize,
    #[serde(rename = "Lx")]
    pub lx: f64,
    #[serde(rename = "Ly")]
    pub ly: Option<f64>,
    #[serde(rename = "T")]
    pub t: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCfg {
    /// Interior nodes along x.
    #[serde(rename = "Nx")]
    pub nx: usize,
    /// Interior nodes along the second space axis (dim = 2).
    #[serde(rename = "Ny")]
    pub ny: Option<usize>,
    /// Intervals of the depth quadrature on [0, π].
    #[serde(rename = "Ny_quad")]
    pub ny_quad: usize,
    #[serde(rename = "Nt")]
    pub nt: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralCfg {
    #[serde(rename = "K")]
    pub k: usize,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeCfg {
    pub theta: f64,
}

impl Default for SchemeCfg {
    fn default() -> Self {
        SchemeCfg { theta: 0.5 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyCfg {
    #[serde(rename = "C_S")]
    pub c_s: f64,
    pub boundary_margin: usize,
    pub psi_floor: f64,
}

impl Default for CertifyCfg {
    fn default() -> Self {
        CertifyCfg {
            c_s: 1.0,
            boundary_margin: 2,
            psi_floor: PSI_FLOOR,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardCfg {
    #[serde(rename = "tol_F")]
    pub tol_f: f64,
    pub max_iters: usize,
    pub force_on_failed_certificate: bool,
}

impl Default for PicardCfg {
    fn default() -> Self {
        PicardCfg {
            tol_f: 1e-10,
            max_iters: 50,
            force_on_failed_certificate: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioCfg {
    pub name: String,
    /// Multiplies f and φ (not ψ).
    #[serde(default = "one")]
    pub data_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataCfg {
    pub psi_file: PathBuf,
    pub f_file: PathBuf,
    pub phi_file: PathBuf,
    pub omega_file: PathBuf,
    /// Known potential, needed by `forward` in data mode.
    pub a_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputCfg {
    pub dir: PathBuf,
    pub formats: Vec<String>,
    /// Depth intervals of the synthesized u(t,x,y) table.
    pub synth_ny: usize,
}

impl Default for OutputCfg {
    fn default() -> Self {
        OutputCfg {
            dir: PathBuf::from("out"),
            formats: vec!["csv".into(), "json".into()],
            synth_ny: 16,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MmsCfg {
    /// Nx = Nt values of the convergence study; defaults to Nx/4, Nx/2, Nx.
    pub resolutions: Option<Vec<usize>>,
}

pub enum Source<'a> {
    Scenario(ScenarioKind, f64),
    Data(&'a DataCfg),
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: Config = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.scenario, &self.data) {
            (Some(_), Some(_)) => bail!("config: give either 'scenario' or 'data', not both"),
            (None, None) => bail!("config: one of 'scenario' or 'data' is required"),
            _ => {}
        }
        if let Some(s) = &self.scenario {
            s.name.parse::<ScenarioKind>()?;
        }
        match self.domain.dim {
            1 if self.domain.ly.is_some() || self.grid.ny.is_some() => {
                bail!("config: 'Ly' and 'grid.Ny' apply to dim = 2 only")
            }
            2 if self.domain.ly.is_none() || self.grid.ny.is_none() => {
                bail!("config: dim = 2 needs 'domain.Ly' and 'grid.Ny'")
            }
            1 | 2 => {}
            d => bail!("config: dim must be 1 or 2, got {d}"),
        }
        if let Some(f) = self.output.formats.iter().find(|f| !["csv", "json"].contains(&f.to_ascii_lowercase().as_str())) {
            bail!("config: unknown output format '{f}' (csv, json)");
        }
        if self.output.synth_ny < 2 {
            bail!("config: output.synth_ny must be at least 2");
        }
        self.grid()?;
        self.params()?;
        self.settings(false).validate()?;
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain> {
        let d = &self.domain;
        Ok(Domain::new(d.dim, [d.lx, d.ly.unwrap_or(0.0)], d.t)?)
    }

    pub fn grid(&self) -> Result<Grid> {
        let mut counts = vec![self.grid.nx];
        if let Some(ny) = self.grid.ny {
            counts.push(ny);
        }
        Ok(build_grid(self.domain()?, &counts, self.grid.nt)?)
    }

    pub fn params(&self) -> Result<SpectralParams> {
        Ok(SpectralParams::new(self.spectral.k, self.spectral.epsilon, self.grid.ny_quad)?)
    }

    pub fn settings(&self, force_flag: bool) -> Settings {
        Settings {
            theta: self.scheme.theta,
            boundary_margin: self.certify.boundary_margin,
            psi_floor: self.certify.psi_floor,
            c_s: self.certify.c_s,
            tol_f: self.picard.tol_f,
            max_iters: self.picard.max_iters,
            force: force_flag || self.picard.force_on_failed_certificate,
            strategy: Strategy::default(),
        }
    }

    pub fn source(&self) -> Source<'_> {
        match (&self.scenario, &self.data) {
            (Some(s), _) => Source::Scenario(
                s.name.parse().expect("validated scenario name"),
                s.data_scale,
            ),
            (None, Some(d)) => Source::Data(d),
            (None, None) => unreachable!("validated config has a data source"),
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    pub fn wants(&self, format: &str) -> bool {
        self.output.formats.iter().any(|f| f.eq_ignore_ascii_case(format))
    }

    pub fn resolutions(&self) -> Vec<usize> {
        self.mms.resolutions.clone().unwrap_or_else(|| {
            let n = self.grid.nx;
            vec![(n / 4).max(2), (n / 2).max(3), n]
        })
    }
}
