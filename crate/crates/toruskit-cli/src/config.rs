//! Run configuration: a structured plain-text file of `key = value` lines
//! under `[section]` headers. Every field has a default; unknown sections or
//! keys are rejected with their line number so configs stay trustworthy as
//! archival run manifests.

use anyhow::{anyhow, bail, Context, Result};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::PathBuf;
use toruskit::continuation::ContinuationPolicy;
use toruskit::fourier::DiophantineFrequency;
use toruskit::greene::GreeneConfig;
use toruskit::io::{parse_sections, section_kv};
use toruskit::models::{
    MapModel, NonTwistMapParams, Potential, SpinOrbitMap, SpinOrbitParams, StandardMapParams,
};
use toruskit::newton::SolverConfig;

#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub family: String,
    pub lambda: f64,
    pub mu: f64,
    pub epsilon: f64,
    pub potential: String,
    pub eps1: f64,
    pub eps2: f64,
    pub a: f64,
    pub eccentricity: f64,
    pub k_d: f64,
    pub n_substeps: usize,
    pub averaged: bool,
    pub mu_is_set: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            family: "dissipative_standard".into(),
            lambda: 0.9,
            mu: 0.0,
            epsilon: 0.1,
            potential: "single_harmonic".into(),
            eps1: 1.0,
            eps2: 0.0,
            a: 0.0,
            eccentricity: 0.0549,
            k_d: 1e-8,
            n_substeps: 512,
            averaged: true,
            mu_is_set: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OmegaConfig {
    pub preset: String,
    pub value: Option<f64>,
    pub rotation: Option<f64>,
    pub noble_near: Option<f64>,
    pub noble_qmin: u64,
}

impl Default for OmegaConfig {
    fn default() -> Self {
        Self { preset: "golden".into(), value: None, rotation: None, noble_near: None, noble_qmin: 1000 }
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationConfig {
    pub eps_start: f64,
    pub eps_end: f64,
    pub step_init: f64,
    pub step_grow: f64,
    pub step_shrink: f64,
    pub step_floor: f64,
    pub step_cap: f64,
    pub step_cap_refined: f64,
    pub refine_threshold: usize,
    pub easy_iterations: usize,
    pub track_bundles: bool,
    pub m_set: Vec<f64>,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        let d = ContinuationPolicy::default();
        Self {
            eps_start: 0.0,
            eps_end: 0.5,
            step_init: d.step_init,
            step_grow: d.step_grow,
            step_shrink: d.step_shrink,
            step_floor: d.step_floor,
            step_cap: d.step_cap,
            step_cap_refined: d.step_cap_refined,
            refine_threshold: d.refine_threshold,
            easy_iterations: d.easy_iterations,
            track_bundles: false,
            m_set: vec![1.0, 2.0, 3.0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct GreeneSection {
    pub eps_grid: Vec<f64>,
    pub residue_threshold: f64,
    pub defect_threshold: f64,
    pub bisection_tol: f64,
    pub sweep_samples: usize,
    pub q_max: u64,
}

impl Default for GreeneSection {
    fn default() -> Self {
        let d = GreeneConfig::default();
        Self {
            eps_grid: (0..11).map(|i| 0.5 + 0.05 * i as f64).collect(),
            residue_threshold: d.residue_threshold,
            defect_threshold: d.defect_threshold,
            bisection_tol: d.bisection_tol,
            sweep_samples: d.sweep_samples,
            q_max: d.q_max,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BasinsConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
    pub transient: usize,
    pub kept: usize,
    pub mode: String,
}

impl Default for BasinsConfig {
    fn default() -> Self {
        Self {
            x_min: 0.0,
            x_max: TAU,
            y_min: 2.8,
            y_max: 4.8,
            nx: 200,
            ny: 200,
            transient: 2000,
            kept: 2000,
            mode: "deterministic".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub a_min: f64,
    pub a_max: f64,
    pub n_samples: usize,
    pub y0: f64,
    pub x0: f64,
    pub transient: usize,
    pub kept: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { a_min: -1.2, a_max: 1.2, n_samples: 121, y0: 0.3, x0: 1.0, transient: 3000, kept: 3000 }
    }
}

#[derive(Debug, Clone)]
pub struct RegionConfig {
    pub resolution: usize,
    pub extent: f64,
    pub n_rays: usize,
    pub full_plane: bool,
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self { resolution: 32, extent: 1.2, n_rays: 48, full_plane: false }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub omega: OmegaConfig,
    pub solver: SolverConfig,
    pub with_bundle: bool,
    pub continuation: ContinuationConfig,
    pub breakdown_m: f64,
    pub greene: GreeneSection,
    pub basins: BasinsConfig,
    pub scan: ScanConfig,
    pub region: RegionConfig,
    pub bundle_n_iter: usize,
    pub bundle_torus: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub jobs: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            omega: OmegaConfig::default(),
            solver: SolverConfig::default(),
            with_bundle: false,
            continuation: ContinuationConfig::default(),
            breakdown_m: 2.0,
            greene: GreeneSection::default(),
            basins: BasinsConfig::default(),
            scan: ScanConfig::default(),
            region: RegionConfig::default(),
            bundle_n_iter: 100_000,
            bundle_torus: None,
            out_dir: PathBuf::from("toruskit-out"),
            jobs: 0,
            seed: 20260808,
        }
    }
}

fn parse_bool(line: usize, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("line {line}: expected a boolean, got `{v}`"),
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>> {
    if v.contains(':') {
        let parts: Vec<&str> = v.split(':').collect();
        if parts.len() == 3 {
            let lo: f64 = parts[0].trim().parse()?;
            let hi: f64 = parts[1].trim().parse()?;
            let n: usize = parts[2].trim().parse()?;
            if n < 2 {
                bail!("range `{v}` needs at least 2 points");
            }
            return Ok((0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect());
        }
    }
    v.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| anyhow!("bad list entry `{s}`: {e}")))
        .collect()
}

impl RunConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let sections = parse_sections(text).map_err(|e| anyhow!("{e}"))?;
        for section in &sections {
            let kv = section_kv(section).map_err(|e| anyhow!("{e}"))?;
            for (line, key, value) in &kv {
                cfg.apply(&section.name, key, value)
                    .with_context(|| format!("line {line}: [{}] {key}", section.name))?;
            }
        }
        Ok(cfg)
    }

    /// Apply one `section.key = value`; unknown keys are errors.
    pub fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let fv = || -> Result<f64> { value.parse::<f64>().map_err(|e| anyhow!("bad float: {e}")) };
        let uv = || -> Result<usize> { value.parse::<usize>().map_err(|e| anyhow!("bad integer: {e}")) };
        match (section, key) {
            ("model", "family") => self.model.family = value.into(),
            ("model", "lambda") => self.model.lambda = fv()?,
            ("model", "mu") => {
                self.model.mu = fv()?;
                self.model.mu_is_set = true;
            }
            ("model", "epsilon") => self.model.epsilon = fv()?,
            ("model", "potential") => self.model.potential = value.into(),
            ("model", "eps1") => self.model.eps1 = fv()?,
            ("model", "eps2") => self.model.eps2 = fv()?,
            ("model", "a") => self.model.a = fv()?,
            ("model", "eccentricity") => self.model.eccentricity = fv()?,
            ("model", "k_d") => self.model.k_d = fv()?,
            ("model", "n_substeps") => self.model.n_substeps = uv()?,
            ("model", "averaged") => self.model.averaged = parse_bool(0, value)?,
            ("omega", "preset") => self.omega.preset = value.into(),
            ("omega", "omega") => self.omega.value = Some(fv()?),
            ("omega", "rotation") => self.omega.rotation = Some(fv()?),
            ("omega", "noble_near") => self.omega.noble_near = Some(fv()?),
            ("omega", "noble_qmin") => self.omega.noble_qmin = uv()? as u64,
            ("solver", "tol") => self.solver.tol = fv()?,
            ("solver", "max_iter") => self.solver.max_iter = uv()?,
            ("solver", "n_modes") => self.solver.n_modes_init = uv()?,
            ("solver", "tail_threshold") => self.solver.tail_threshold = fv()?,
            ("solver", "mode_cap") => self.solver.mode_cap = uv()?,
            ("solver", "nondegeneracy_tol") => self.solver.nondegeneracy_tol = fv()?,
            ("solver", "m_sobolev") => self.solver.m_sobolev = fv()?,
            ("solver", "cold_eps_threshold") => self.solver.cold_eps_threshold = fv()?,
            ("solver", "with_bundle") => self.with_bundle = parse_bool(0, value)?,
            ("continuation", "eps_start") => self.continuation.eps_start = fv()?,
            ("continuation", "eps_end") => self.continuation.eps_end = fv()?,
            ("continuation", "step_init") => self.continuation.step_init = fv()?,
            ("continuation", "step_grow") => self.continuation.step_grow = fv()?,
            ("continuation", "step_shrink") => self.continuation.step_shrink = fv()?,
            ("continuation", "step_floor") => self.continuation.step_floor = fv()?,
            ("continuation", "step_cap") => self.continuation.step_cap = fv()?,
            ("continuation", "step_cap_refined") => self.continuation.step_cap_refined = fv()?,
            ("continuation", "refine_threshold") => self.continuation.refine_threshold = uv()?,
            ("continuation", "easy_iterations") => self.continuation.easy_iterations = uv()?,
            ("continuation", "track_bundles") => {
                self.continuation.track_bundles = parse_bool(0, value)?
            }
            ("continuation", "m_set") => self.continuation.m_set = parse_list(value)?,
            ("breakdown", "m") => self.breakdown_m = fv()?,
            ("greene", "eps_grid") => self.greene.eps_grid = parse_list(value)?,
            ("greene", "residue_threshold") => self.greene.residue_threshold = fv()?,
            ("greene", "defect_threshold") => self.greene.defect_threshold = fv()?,
            ("greene", "bisection_tol") => self.greene.bisection_tol = fv()?,
            ("greene", "sweep_samples") => self.greene.sweep_samples = uv()?,
            ("greene", "q_max") => self.greene.q_max = uv()? as u64,
            ("basins", "x_min") => self.basins.x_min = fv()?,
            ("basins", "x_max") => self.basins.x_max = fv()?,
            ("basins", "y_min") => self.basins.y_min = fv()?,
            ("basins", "y_max") => self.basins.y_max = fv()?,
            ("basins", "nx") => self.basins.nx = uv()?,
            ("basins", "ny") => self.basins.ny = uv()?,
            ("basins", "transient") => self.basins.transient = uv()?,
            ("basins", "kept") => self.basins.kept = uv()?,
            ("basins", "mode") => self.basins.mode = value.into(),
            ("rotation_scan", "a_min") => self.scan.a_min = fv()?,
            ("rotation_scan", "a_max") => self.scan.a_max = fv()?,
            ("rotation_scan", "n_samples") => self.scan.n_samples = uv()?,
            ("rotation_scan", "y0") => self.scan.y0 = fv()?,
            ("rotation_scan", "x0") => self.scan.x0 = fv()?,
            ("rotation_scan", "transient") => self.scan.transient = uv()?,
            ("rotation_scan", "kept") => self.scan.kept = uv()?,
            ("region", "resolution") => self.region.resolution = uv()?,
            ("region", "extent") => self.region.extent = fv()?,
            ("region", "n_rays") => self.region.n_rays = uv()?,
            ("region", "full_plane") => self.region.full_plane = parse_bool(0, value)?,
            ("bundle", "n_iter") => self.bundle_n_iter = uv()?,
            ("bundle", "torus") => self.bundle_torus = Some(PathBuf::from(value)),
            ("output", "dir") => self.out_dir = PathBuf::from(value),
            ("run", "jobs") => self.jobs = uv()?,
            ("run", "seed") => self.seed = uv()? as u64,
            _ => bail!("unknown key `{key}` in section [{section}]"),
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<MapModel> {
        let potential = match self.model.potential.as_str() {
            "single_harmonic" | "single" => Potential::SingleHarmonic,
            "two_harmonic" => Potential::TwoHarmonic { eps1: self.model.eps1, eps2: self.model.eps2 },
            other => bail!("unknown potential `{other}`"),
        };
        let omega = self.build_omega()?;
        Ok(match self.model.family.as_str() {
            "conservative_standard" => {
                MapModel::Standard(StandardMapParams::conservative(self.model.epsilon, potential))
            }
            "dissipative_standard" => {
                let mu = if self.model.mu_is_set {
                    self.model.mu
                } else {
                    (1.0 - self.model.lambda) * omega.omega()
                };
                MapModel::Standard(StandardMapParams::dissipative(
                    self.model.lambda,
                    mu,
                    self.model.epsilon,
                    potential,
                ))
            }
            "nontwist_standard" => MapModel::NonTwist(NonTwistMapParams {
                lambda: self.model.lambda,
                mu: self.model.mu,
                epsilon: self.model.epsilon,
                a: self.model.a,
                potential,
            }),
            name @ ("spin_orbit_conservative" | "spin_orbit_dissipative") => {
                let k_d = if name == "spin_orbit_conservative" { 0.0 } else { self.model.k_d };
                let params = SpinOrbitParams {
                    eccentricity: self.model.eccentricity,
                    epsilon: self.model.epsilon,
                    k_d,
                    mu_override: if self.model.mu_is_set { Some(self.model.mu) } else { None },
                    n_substeps: self.model.n_substeps,
                    averaged: self.model.averaged,
                };
                MapModel::SpinOrbit(SpinOrbitMap::new(params).map_err(|e| anyhow!("{e}"))?)
            }
            other => bail!("unknown family `{other}`"),
        })
    }

    pub fn build_omega(&self) -> Result<DiophantineFrequency> {
        if let Some(v) = self.omega.value {
            return Ok(DiophantineFrequency::from_omega(v));
        }
        if let Some(r) = self.omega.rotation {
            return Ok(DiophantineFrequency::from_rotation(r));
        }
        if let Some(near) = self.omega.noble_near {
            return Ok(DiophantineFrequency::noble_near(near, self.omega.noble_qmin));
        }
        match self.omega.preset.as_str() {
            "golden" => Ok(DiophantineFrequency::golden()),
            other => bail!("unknown omega preset `{other}` (use golden, or give omega/rotation)"),
        }
    }

    pub fn continuation_policy(&self) -> ContinuationPolicy {
        ContinuationPolicy {
            step_init: self.continuation.step_init,
            step_grow: self.continuation.step_grow,
            step_shrink: self.continuation.step_shrink,
            step_floor: self.continuation.step_floor,
            step_cap: self.continuation.step_cap,
            step_cap_refined: self.continuation.step_cap_refined,
            refine_threshold: self.continuation.refine_threshold,
            easy_iterations: self.continuation.easy_iterations,
            solver: self.solver.clone(),
            m_set: self.continuation.m_set.clone(),
            track_bundles: self.continuation.track_bundles,
        }
    }

    pub fn greene_config(&self) -> GreeneConfig {
        GreeneConfig {
            residue_threshold: self.greene.residue_threshold,
            defect_threshold: self.greene.defect_threshold,
            bisection_tol: self.greene.bisection_tol,
            sweep_samples: self.greene.sweep_samples,
            q_max: self.greene.q_max,
            ..GreeneConfig::default()
        }
    }

    /// Effective configuration echo, written into run manifests.
    pub fn manifest(&self) -> String {
        let mut sections: BTreeMap<&str, Vec<(String, String)>> = BTreeMap::new();
        let m = &self.model;
        sections.insert(
            "model",
            vec![
                ("family".into(), m.family.clone()),
                ("lambda".into(), format!("{}", m.lambda)),
                ("mu".into(), format!("{}", m.mu)),
                ("epsilon".into(), format!("{}", m.epsilon)),
                ("potential".into(), m.potential.clone()),
                ("eps1".into(), format!("{}", m.eps1)),
                ("eps2".into(), format!("{}", m.eps2)),
                ("a".into(), format!("{}", m.a)),
                ("eccentricity".into(), format!("{}", m.eccentricity)),
                ("k_d".into(), format!("{}", m.k_d)),
                ("n_substeps".into(), format!("{}", m.n_substeps)),
            ],
        );
        sections.insert(
            "omega",
            vec![
                ("preset".into(), self.omega.preset.clone()),
                (
                    "resolved_omega".into(),
                    self.build_omega().map(|w| format!("{:.17e}", w.omega())).unwrap_or_default(),
                ),
            ],
        );
        sections.insert(
            "solver",
            vec![
                ("tol".into(), format!("{:e}", self.solver.tol)),
                ("max_iter".into(), format!("{}", self.solver.max_iter)),
                ("n_modes".into(), format!("{}", self.solver.n_modes_init)),
                ("mode_cap".into(), format!("{}", self.solver.mode_cap)),
                ("tail_threshold".into(), format!("{:e}", self.solver.tail_threshold)),
                ("nondegeneracy_tol".into(), format!("{:e}", self.solver.nondegeneracy_tol)),
            ],
        );
        sections.insert(
            "run",
            vec![("jobs".into(), format!("{}", self.jobs)), ("seed".into(), format!("{}", self.seed))],
        );
        let mut buf = String::new();
        for (name, kv) in sections {
            let _ = writeln!(buf, "[{name}]");
            for (k, v) in kv {
                let _ = writeln!(buf, "{k} = {v}");
            }
        }
        buf
    }
}
