//! Run configuration.
//!
//! The TOML file is read into a loose [`RawConfig`] and then resolved into a
//! [`RunConfig`] where every default has been filled in. The resolved form
//! is what gets echoed into `bundle.json`.

use std::path::{Path, PathBuf};

use levlab_core::geometry::{both_ep_circle, single_ep_circle, Orientation};
use levlab_core::io::hamiltonian_from_json;
use levlab_core::models::{ChainEnd, SshParams, TwoLevelParams};
use levlab_core::response::{default_grid, linspace};
use levlab_core::retrieval::MethodChoice;
use levlab_core::Hamiltonian64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    TwoLevelBerry,
    SshTzm,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Enclose {
    Both,
    Ep1,
    Ep2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Eigenvectors {
    Exact,
    Retrieved,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Experiment,
    model: Option<toml::Table>,
    grid: Option<RawGrid>,
    campaign: Option<RawCampaign>,
    #[serde(rename = "loop")]
    loop_: Option<RawLoop>,
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    omega_min_rad_s: Option<f64>,
    omega_max_rad_s: Option<f64>,
    points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCampaign {
    lev_fixed_site: Option<usize>,
    rev_fixed_site: Option<usize>,
    noise_sigma_rel: Option<f64>,
    seed: Option<u64>,
    a0: Option<[f64; 2]>,
    target_rad_s: Option<f64>,
    method: Option<MethodChoice>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLoop {
    enclose: Option<Enclose>,
    margin: Option<f64>,
    fraction: Option<f64>,
    center_rad_s: Option<[f64; 2]>,
    radii_rad_s: Option<[f64; 2]>,
    steps: Option<usize>,
    cycles: Option<usize>,
    orientation: Option<Orientation>,
    eigenvectors: Option<Eigenvectors>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<PathBuf>,
    formats: Option<Vec<Format>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoLevelModel {
    pub omega0_rad_s: f64,
    pub gamma0_rad_s: f64,
    pub gamma1_rad_s: f64,
    pub gamma2_rad_s: f64,
    pub phi_x_rad_s: f64,
    pub phi_y_rad_s: f64,
}

impl Default for TwoLevelModel {
    fn default() -> Self {
        let p = TwoLevelParams::<f64>::acoustic();
        Self {
            omega0_rad_s: p.omega0,
            gamma0_rad_s: p.gamma0,
            gamma1_rad_s: p.gamma1,
            gamma2_rad_s: p.gamma2,
            phi_x_rad_s: p.phi_x,
            phi_y_rad_s: p.phi_y,
        }
    }
}

impl TwoLevelModel {
    pub fn params(&self) -> TwoLevelParams<f64> {
        TwoLevelParams {
            omega0: self.omega0_rad_s,
            gamma0: self.gamma0_rad_s,
            gamma1: self.gamma1_rad_s,
            gamma2: self.gamma2_rad_s,
            phi_x: self.phi_x_rad_s,
            phi_y: self.phi_y_rad_s,
        }
    }
}

/// SSH preset; the dissipation defaults to the cavity loss of the
/// two-level experiment so the zero mode is not a pole on the real axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SshModel {
    pub v_rad_s: f64,
    pub w_rad_s: f64,
    pub delta_rad_s: f64,
    pub m_cells: usize,
    pub onsite_rad_s: f64,
    pub loss_rad_s: f64,
    pub chain_end: ChainEnd,
}

impl Default for SshModel {
    fn default() -> Self {
        let p = SshParams::<f64>::acoustic();
        Self {
            v_rad_s: p.v,
            w_rad_s: p.w,
            delta_rad_s: p.delta,
            m_cells: p.m_cells,
            onsite_rad_s: p.onsite,
            loss_rad_s: -41.2,
            chain_end: p.chain_end,
        }
    }
}

impl SshModel {
    pub fn params(&self) -> SshParams<f64> {
        SshParams {
            v: self.v_rad_s,
            w: self.w_rad_s,
            delta: self.delta_rad_s,
            m_cells: self.m_cells,
            onsite: self.onsite_rad_s,
            loss: self.loss_rad_s,
            chain_end: self.chain_end,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCustomModel {
    hamiltonian_file: Option<PathBuf>,
    dim: Option<usize>,
    entries: Option<Vec<[f64; 2]>>,
    label: Option<String>,
}

/// A user-supplied Hamiltonian, always stored inline once resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModel {
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
    pub label: String,
}

impl CustomModel {
    pub fn hamiltonian(&self) -> Result<Hamiltonian64> {
        let doc = serde_json::json!({ "dim": self.dim, "entries": self.entries, "label": self.label });
        Ok(hamiltonian_from_json(&doc.to_string())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Model {
    TwoLevel(TwoLevelModel),
    Ssh(SshModel),
    Custom(CustomModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub omega_min_rad_s: f64,
    pub omega_max_rad_s: f64,
    pub points: usize,
}

impl GridConfig {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.omega_min_rad_s, self.omega_max_rad_s, self.points)
    }

    fn around(center: f64) -> Self {
        let g = default_grid(center);
        Self {
            omega_min_rad_s: g[0],
            omega_max_rad_s: g[g.len() - 1],
            points: g.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub lev_fixed_site: usize,
    pub rev_fixed_site: usize,
    pub noise_sigma_rel: f64,
    pub seed: u64,
    pub a0: [f64; 2],
    /// Frequency of the mode to retrieve; `None` retrieves every mode.
    pub target_rad_s: Option<f64>,
    pub method: MethodChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub enclose: Enclose,
    pub margin: f64,
    pub fraction: f64,
    pub center_rad_s: [f64; 2],
    pub radii_rad_s: [f64; 2],
    pub steps: usize,
    pub cycles: usize,
    pub orientation: Orientation,
    pub eigenvectors: Eigenvectors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub model: Model,
    pub grid: GridConfig,
    pub campaign: CampaignConfig,
    #[serde(rename = "loop")]
    pub loop_: Option<LoopConfig>,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// `base` resolves relative paths inside the model block.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::config(format!("config: {}", e.message())))?;
        resolve(raw, base)
    }

    /// Number of sites of the configured model.
    pub fn dim(&self) -> usize {
        match &self.model {
            Model::TwoLevel(_) => 2,
            Model::Ssh(m) => m.params().n_sites(),
            Model::Custom(m) => m.dim,
        }
    }

    pub fn a0(&self) -> levlab_core::Complex64 {
        levlab_core::Complex64::new(self.campaign.a0[0], self.campaign.a0[1])
    }
}

fn model_block<M: for<'de> Deserialize<'de> + Serialize>(table: Option<toml::Table>, defaults: M) -> Result<M> {
    let Some(overrides) = table else {
        return Ok(defaults);
    };
    // start from the defaults and let the file override field by field
    let mut merged = toml::Value::try_from(&defaults).map_err(|e| CliError::config(e.to_string()))?;
    if let Some(t) = merged.as_table_mut() {
        t.extend(overrides);
    }
    merged
        .try_into()
        .map_err(|e: toml::de::Error| CliError::config(format!("model: {}", e.message())))
}

fn resolve(raw: RawConfig, base: &Path) -> Result<RunConfig> {
    let model = match raw.experiment {
        Experiment::TwoLevelBerry => Model::TwoLevel(model_block(raw.model, TwoLevelModel::default())?),
        Experiment::SshTzm => Model::Ssh(model_block(raw.model, SshModel::default())?),
        Experiment::Custom => Model::Custom(custom_model(raw.model, base)?),
    };

    let grid = match raw.grid {
        Some(g) => {
            let need = |v: Option<f64>, key: &str| v.ok_or_else(|| CliError::config(format!("grid.{key} is missing")));
            let grid = GridConfig {
                omega_min_rad_s: need(g.omega_min_rad_s, "omega_min_rad_s")?,
                omega_max_rad_s: need(g.omega_max_rad_s, "omega_max_rad_s")?,
                points: g.points.ok_or_else(|| CliError::config("grid.points is missing"))?,
            };
            if !(grid.omega_min_rad_s < grid.omega_max_rad_s) || grid.points < 3 {
                return Err(CliError::config(
                    "grid needs omega_min_rad_s < omega_max_rad_s and at least 3 points",
                ));
            }
            grid
        }
        None => match &model {
            Model::TwoLevel(m) => GridConfig::around(m.omega0_rad_s),
            Model::Ssh(m) => GridConfig::around(m.onsite_rad_s),
            Model::Custom(_) => return Err(CliError::config("grid block is required for custom experiments")),
        },
    };

    let c = raw.campaign.unwrap_or_default();
    let target = match (&model, c.target_rad_s) {
        (_, Some(t)) => Some(t),
        (Model::Ssh(m), None) => Some(m.onsite_rad_s),
        _ => None,
    };
    let campaign = CampaignConfig {
        lev_fixed_site: c.lev_fixed_site.unwrap_or(1),
        rev_fixed_site: c.rev_fixed_site.unwrap_or(1),
        noise_sigma_rel: c.noise_sigma_rel.unwrap_or(0.0),
        seed: c.seed.unwrap_or(0),
        a0: c.a0.unwrap_or([1.0, 0.0]),
        target_rad_s: target,
        method: c.method.unwrap_or_default(),
    };
    if !(campaign.noise_sigma_rel >= 0.0) {
        return Err(CliError::config("campaign.noise_sigma_rel must be non-negative"));
    }

    let loop_ = match (&model, raw.loop_) {
        (Model::TwoLevel(m), l) => Some(resolve_loop(m, l.unwrap_or_default())?),
        (_, Some(_)) => return Err(CliError::config("loop block is only used by two-level-berry")),
        (_, None) => None,
    };

    let o = raw.output.unwrap_or_default();
    let output = OutputConfig {
        directory: o.directory.unwrap_or_else(|| PathBuf::from("levlab-out")),
        formats: o.formats.unwrap_or_else(|| vec![Format::Json, Format::Csv, Format::Svg]),
    };

    let cfg = RunConfig {
        experiment: raw.experiment,
        model,
        grid,
        campaign,
        loop_,
        output,
    };
    let dim = cfg.dim();
    for (key, site) in [
        ("campaign.lev_fixed_site", cfg.campaign.lev_fixed_site),
        ("campaign.rev_fixed_site", cfg.campaign.rev_fixed_site),
    ] {
        if site == 0 || site > dim {
            return Err(CliError::config(format!("{key} = {site} is outside 1..={dim}")));
        }
    }
    Ok(cfg)
}

fn custom_model(table: Option<toml::Table>, base: &Path) -> Result<CustomModel> {
    let table = table.ok_or_else(|| CliError::config("model block is required for custom experiments"))?;
    let raw: RawCustomModel = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::config(format!("model: {}", e.message())))?;
    let h = match (raw.hamiltonian_file, raw.dim, raw.entries) {
        (Some(file), None, None) => {
            let path = base.join(file);
            let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            hamiltonian_from_json::<f64>(&text)?
        }
        (None, Some(dim), Some(entries)) => {
            let label = raw.label.clone().unwrap_or_else(|| "custom".into());
            CustomModel { dim, entries, label }.hamiltonian()?
        }
        (None, None, _) => return Err(CliError::config("model.dim is missing")),
        (None, _, None) => return Err(CliError::config("model.entries is missing")),
        _ => {
            return Err(CliError::config(
                "model takes either hamiltonian_file or dim + entries, not both",
            ))
        }
    };
    let m = h.entries();
    Ok(CustomModel {
        dim: h.dim(),
        entries: m.as_slice().iter().map(|z| [z.re, z.im]).collect(),
        label: raw.label.unwrap_or_else(|| h.label().to_string()),
    })
}

fn resolve_loop(m: &TwoLevelModel, l: RawLoop) -> Result<LoopConfig> {
    let enclose = l.enclose.unwrap_or(Enclose::Both);
    let margin = l.margin.unwrap_or(0.3);
    let fraction = l.fraction.unwrap_or(0.3);
    let default_circle = || -> Result<((f64, f64), (f64, f64))> {
        let (g1, g2) = (m.gamma1_rad_s, m.gamma2_rad_s);
        Ok(match enclose {
            Enclose::Both => both_ep_circle(g1, g2, margin)?,
            Enclose::Ep1 => single_ep_circle(g1, g2, 0, fraction)?,
            Enclose::Ep2 => single_ep_circle(g1, g2, 1, fraction)?,
        })
    };
    let (center, radii) = match (l.center_rad_s, l.radii_rad_s) {
        (Some(c), Some(r)) => (c, r),
        (c, r) => {
            let (dc, dr) = default_circle()?;
            (c.unwrap_or([dc.0, dc.1]), r.unwrap_or([dr.0, dr.1]))
        }
    };
    let cycles = l.cycles.unwrap_or(match enclose {
        Enclose::Both => 1,
        _ => 2,
    });
    Ok(LoopConfig {
        enclose,
        margin,
        fraction,
        center_rad_s: center,
        radii_rad_s: radii,
        steps: l.steps.unwrap_or(200),
        cycles,
        orientation: l.orientation.unwrap_or_default(),
        eigenvectors: l.eigenvectors.unwrap_or(Eigenvectors::Retrieved),
    })
}
