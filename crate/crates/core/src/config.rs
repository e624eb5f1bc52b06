//! Run configuration: a single TOML file with sample, beam, target, solver
//! and output sections. Each paper-style scenario is a checked-in fixture.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::KConvention;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sample: SampleConfig,
    pub beam: BeamSection,
    #[serde(default)]
    pub target: Option<TargetSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SampleConfig {
    Triangle {
        side_nm: f64,
        thickness_nm: f64,
        #[serde(default = "default_rounding")]
        corner_rounding_nm: f64,
        elements: usize,
        n_modes: usize,
        #[serde(default)]
        drude: DrudeSection,
    },
    Sphere {
        radius_nm: f64,
        elements: usize,
        n_modes: usize,
        #[serde(default)]
        drude: DrudeSection,
    },
    Mesh {
        path: PathBuf,
        n_modes: usize,
        #[serde(default)]
        drude: DrudeSection,
    },
    Vibrational {
        path: PathBuf,
    },
}

fn default_rounding() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DrudeSection {
    pub eps_b: f64,
    pub homega_p_ev: f64,
    pub hgamma_ev: f64,
}

impl Default for DrudeSection {
    fn default() -> Self {
        // silver
        Self {
            eps_b: 4.0,
            homega_p_ev: 9.17,
            hgamma_ev: 0.021,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BeamSection {
    pub kinetic_energy_ev: f64,
    pub phi_i_mrad: f64,
    pub phi_f_mrad: f64,
    pub pixels_i: usize,
    pub pixels_f: usize,
    #[serde(default)]
    pub k_convention: KConvention,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSection {
    /// Excite a single mode (1-based index) over the whole collection disk.
    Select { mode: usize },
    /// Correlate modes with detector directions; q_frac is in units of the
    /// collection radius q_f,max.
    Entangle { pairs: Vec<EntanglePair> },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EntanglePair {
    /// 1-based mode index.
    pub mode: usize,
    pub q_frac: [f64; 2],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub svd_cutoff: f64,
    pub tikhonov: f64,
    /// Selection-disk radius in units of the detector pixel pitch.
    pub region_radius_pixels: f64,
    /// Detector oversampling factor for rendered maps and fractions.
    pub render_oversample: usize,
    /// Real-space window for the energy-loss integrals, in decay lengths
    /// v/ω of the softest mode.
    pub eels_window_decay: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            svd_cutoff: 1e-8,
            tikhonov: 0.0,
            region_radius_pixels: 1.0,
            render_oversample: 3,
            eels_window_decay: 12.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    /// Energy-loss scan window in eV; zeros mean "derive from the basis".
    pub omega_min_ev: f64,
    pub omega_max_ev: f64,
    pub points: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            omega_min_ev: 0.0,
            omega_max_ev: 0.0,
            points: 400,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_formats() -> Vec<String> {
    vec!["text".to_string()]
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            Error::configuration(format!("{origin}: {}", e.message().trim()))
        })?;
        cfg.validate(origin)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        // paths inside the config are relative to the config file
        if let Some(dir) = path.parent() {
            match &mut cfg.sample {
                SampleConfig::Mesh { path, .. } | SampleConfig::Vibrational { path } => {
                    if path.is_relative() {
                        *path = dir.join(&path);
                    }
                }
                _ => {}
            }
        }
        Ok(cfg)
    }

    fn validate(&self, origin: &str) -> Result<()> {
        let fail = |msg: String| Error::configuration(format!("{origin}: {msg}"));
        match &self.sample {
            SampleConfig::Triangle {
                side_nm,
                thickness_nm,
                corner_rounding_nm,
                elements,
                n_modes,
                drude,
            } => {
                if !(*side_nm > 0.0) || !(*thickness_nm > 0.0) {
                    return Err(fail("triangle side and thickness must be positive".into()));
                }
                if !(*corner_rounding_nm > 0.0) || *corner_rounding_nm >= side_nm / 4.0 {
                    return Err(fail(format!(
                        "corner rounding must lie in (0, side/4), got {corner_rounding_nm}"
                    )));
                }
                if *elements < 40 || *n_modes == 0 {
                    return Err(fail("need elements ≥ 40 and n_modes ≥ 1".into()));
                }
                validate_drude(drude).map_err(|m| fail(m))?;
            }
            SampleConfig::Sphere {
                radius_nm,
                elements,
                n_modes,
                drude,
            } => {
                if !(*radius_nm > 0.0) {
                    return Err(fail("sphere radius must be positive".into()));
                }
                if *elements < 20 || *n_modes == 0 {
                    return Err(fail("need elements ≥ 20 and n_modes ≥ 1".into()));
                }
                validate_drude(drude).map_err(|m| fail(m))?;
            }
            SampleConfig::Mesh { n_modes, drude, .. } => {
                if *n_modes == 0 {
                    return Err(fail("need n_modes ≥ 1".into()));
                }
                validate_drude(drude).map_err(|m| fail(m))?;
            }
            SampleConfig::Vibrational { .. } => {}
        }
        if !(self.beam.kinetic_energy_ev > 0.0) {
            return Err(fail("beam kinetic energy must be positive".into()));
        }
        if !(self.beam.phi_i_mrad > 0.0) || !(self.beam.phi_f_mrad > 0.0) {
            return Err(fail("beam half-angles must be positive".into()));
        }
        if self.beam.pixels_i == 0 || self.beam.pixels_f == 0 {
            return Err(fail("pixel counts must be positive".into()));
        }
        if let Some(TargetSection::Entangle { pairs }) = &self.target {
            if pairs.is_empty() {
                return Err(fail("entangle target needs at least one pair".into()));
            }
            for p in pairs {
                if p.mode == 0 {
                    return Err(fail("mode indices are 1-based".into()));
                }
                let r = (p.q_frac[0] * p.q_frac[0] + p.q_frac[1] * p.q_frac[1]).sqrt();
                if r > 1.0 {
                    return Err(fail(format!(
                        "entangle point ({}, {}) lies outside the collection disk",
                        p.q_frac[0], p.q_frac[1]
                    )));
                }
            }
        }
        if let Some(TargetSection::Select { mode }) = &self.target {
            if *mode == 0 {
                return Err(fail("mode indices are 1-based".into()));
            }
        }
        if !(self.solver.svd_cutoff > 0.0) || self.solver.tikhonov < 0.0 {
            return Err(fail("svd_cutoff must be positive, tikhonov non-negative".into()));
        }
        if self.solver.render_oversample == 0 || !(self.solver.region_radius_pixels > 0.0) {
            return Err(fail("render_oversample and region radius must be positive".into()));
        }
        for f in &self.output.formats {
            if f != "text" {
                return Err(fail(format!("unsupported output format `{f}`")));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

fn validate_drude(d: &DrudeSection) -> std::result::Result<(), String> {
    if !(d.eps_b >= 1.0) || !(d.homega_p_ev > 0.0) || !(d.hgamma_ev > 0.0) {
        return Err("Drude parameters must be physical (ε_b ≥ 1, ω_p > 0, γ > 0)".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = r#"
[sample]
kind = "triangle"
side_nm = 10.0
thickness_nm = 2.0
elements = 700
n_modes = 5

[beam]
kinetic_energy_ev = 100000.0
phi_i_mrad = 1.5
phi_f_mrad = 0.75
pixels_i = 1257
pixels_f = 49

[target]
kind = "select"
mode = 3

[output]
dir = "runs/fig2"
"#;

    #[test]
    fn parses_fig2_style_config() {
        let cfg = RunConfig::parse(FIG2, "fig2.toml").unwrap();
        match &cfg.sample {
            SampleConfig::Triangle {
                corner_rounding_nm, drude, ..
            } => {
                assert_eq!(*corner_rounding_nm, 0.5);
                assert_eq!(drude.homega_p_ev, 9.17);
            }
            _ => panic!("wrong sample kind"),
        }
        assert_eq!(cfg.solver.svd_cutoff, 1e-8);
        assert!(matches!(cfg.target, Some(TargetSection::Select { mode: 3 })));
    }

    #[test]
    fn roundtrips_through_toml() {
        let cfg = RunConfig::parse(FIG2, "fig2.toml").unwrap();
        let text = cfg.to_toml();
        let back = RunConfig::parse(&text, "roundtrip").unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::parse("", "empty").is_err());
        let bad = FIG2.replace("mode = 3", "mode = 0");
        assert!(RunConfig::parse(&bad, "bad").is_err());
        let bad = FIG2.replace("phi_i_mrad = 1.5", "phi_i_mrad = -1.5");
        assert!(RunConfig::parse(&bad, "bad").is_err());
        let bad = FIG2.replace("kind = \"select\"", "kind = \"snack\"");
        assert!(RunConfig::parse(&bad, "bad").is_err());
    }

    #[test]
    fn entangle_pairs_validated() {
        let cfg = FIG2.replace(
            "kind = \"select\"\nmode = 3",
            "kind = \"entangle\"\npairs = [{ mode = 1, q_frac = [0.5, 0.0] }, { mode = 2, q_frac = [-0.5, 0.0] }]",
        );
        assert!(RunConfig::parse(&cfg, "ok").is_ok());
        let bad = cfg.replace("[0.5, 0.0]", "[1.5, 0.0]");
        assert!(RunConfig::parse(&bad, "bad").is_err());
    }
}
