//! Run output bundles: delimited-text maps, fraction tables, diagnostics and
//! the reproducibility manifest. Output directories are staged and renamed
//! into place so failed runs never leave partial results.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::{ComplexField, PixelGrid, RealSpaceMap};
use crate::shaper::{FractionMatrix, FractionNormalization};

pub const TOOL_NAME: &str = "eshaper";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: ToolInfo,
    /// Subcommand that produced the run.
    pub command: String,
    /// Fully resolved configuration; `output.dir` is normalized to "." so a
    /// re-run into any directory reproduces the bundle bit for bit.
    pub config: RunConfig,
    #[serde(default)]
    pub inputs: Vec<InputDigest>,
    #[serde(default)]
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Staged run directory: files accumulate in `<dir>.staging` and move into
/// place atomically on `finish`.
pub struct RunWriter {
    final_dir: PathBuf,
    staging_dir: PathBuf,
    files: Vec<String>,
}

impl RunWriter {
    pub fn create(final_dir: &Path) -> Result<Self> {
        let name = final_dir
            .file_name()
            .ok_or_else(|| Error::parameter("output directory needs a name"))?
            .to_string_lossy()
            .to_string();
        let staging_dir = final_dir.with_file_name(format!(".{name}.staging"));
        if staging_dir.exists() {
            std::fs::remove_dir_all(&staging_dir)
                .map_err(|e| Error::io(staging_dir.display().to_string(), e))?;
        }
        std::fs::create_dir_all(&staging_dir)
            .map_err(|e| Error::io(staging_dir.display().to_string(), e))?;
        Ok(Self {
            final_dir: final_dir.to_path_buf(),
            staging_dir,
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, rel: &str, content: &str) -> Result<()> {
        let path = self.staging_dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
        std::fs::write(&path, content).map_err(|e| Error::io(path.display().to_string(), e))?;
        self.files.push(rel.to_string());
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Writes the manifest and swaps the staged directory into place.
    pub fn finish(mut self, mut manifest: Manifest) -> Result<PathBuf> {
        manifest.files = self.files.clone();
        manifest.files.push("manifest.toml".to_string());
        manifest.files.sort();
        let text = toml::to_string_pretty(&manifest)
            .map_err(|e| Error::configuration(format!("manifest serialization: {e}")))?;
        let path = self.staging_dir.join("manifest.toml");
        std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
        self.files.push("manifest.toml".to_string());
        if self.final_dir.exists() {
            std::fs::remove_dir_all(&self.final_dir)
                .map_err(|e| Error::io(self.final_dir.display().to_string(), e))?;
        }
        if let Some(parent) = self.final_dir.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)
                    .map_err(|e| Error::io(parent.display().to_string(), e))?;
            }
        }
        std::fs::rename(&self.staging_dir, &self.final_dir)
            .map_err(|e| Error::io(self.final_dir.display().to_string(), e))?;
        Ok(self.final_dir)
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    toml::from_str(&text).map_err(|e| {
        let place = e
            .span()
            .map(|s| {
                let line = text[..s.start].lines().count();
                format!(" at line {line}")
            })
            .unwrap_or_default();
        Error::ingestion(format!(
            "{}: manifest parse error{place}: {}",
            path.display(),
            e.message().trim()
        ))
    })
}

/// Momentum-space field: `Qx Qy re im` rows under `#` metadata headers.
pub fn field_to_text(field: &ComplexField, label: &str) -> String {
    let g = field.grid();
    let mut out = String::new();
    let _ = writeln!(out, "# {TOOL_NAME} {label}");
    let _ = writeln!(out, "# units: Q in 1/nm, amplitudes in nm");
    let _ = writeln!(
        out,
        "# grid: q_max {:.17e} pitch {:.17e} pixels {}",
        g.q_max(),
        g.pitch(),
        g.len()
    );
    let _ = writeln!(out, "# columns: Qx Qy re im");
    for (p, v) in g.pixels().iter().zip(field.values()) {
        let _ = writeln!(out, "{:.17e} {:.17e} {:.17e} {:.17e}", p.q[0], p.q[1], v.re, v.im);
    }
    out
}

/// Parses a momentum-space field against an expected grid; mismatches name
/// both grids.
pub fn field_from_text(text: &str, origin: &str, grid: std::sync::Arc<PixelGrid>) -> Result<ComplexField> {
    let mut header_grid: Option<(f64, f64, usize)> = None;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let toks: Vec<&str> = rest.split_whitespace().collect();
            if toks.first() == Some(&"grid:") {
                // grid: q_max <v> pitch <v> pixels <n>
                if toks.len() == 7 {
                    header_grid = Some((
                        toks[2].parse().map_err(|_| {
                            Error::ingestion(format!("{origin}:{}: bad q_max", lineno + 1))
                        })?,
                        toks[4].parse().map_err(|_| {
                            Error::ingestion(format!("{origin}:{}: bad pitch", lineno + 1))
                        })?,
                        toks[6].parse().map_err(|_| {
                            Error::ingestion(format!("{origin}:{}: bad pixel count", lineno + 1))
                        })?,
                    ));
                }
            }
            continue;
        }
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::ingestion(format!("{origin}:{}: malformed row", lineno + 1)))?;
        if nums.len() != 4 {
            return Err(Error::ingestion(format!(
                "{origin}:{}: expected `Qx Qy re im`",
                lineno + 1
            )));
        }
        values.push(num_complex::Complex64::new(nums[2], nums[3]));
    }
    if let Some((q_max, pitch, pixels)) = header_grid {
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        if pixels != grid.len() || rel(q_max, grid.q_max()) > 1e-9 || rel(pitch, grid.pitch()) > 1e-9
        {
            return Err(Error::dimension(format!(
                "field grid (q_max {q_max:.6}, pitch {pitch:.6}, {pixels} pixels) does not match \
                 the configured incident grid (q_max {:.6}, pitch {:.6}, {} pixels)",
                grid.q_max(),
                grid.pitch(),
                grid.len()
            )));
        }
    }
    ComplexField::new(grid, values)
}

/// Real-space map: `x y re im abs` rows.
pub fn realspace_to_text(map: &RealSpaceMap, label: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {TOOL_NAME} {label}");
    let _ = writeln!(out, "# units: x, y in nm");
    let _ = writeln!(
        out,
        "# grid: extent {:.17e} samples {}",
        map.spec.extent, map.spec.n
    );
    let _ = writeln!(out, "# columns: x y re im abs");
    for iy in 0..map.spec.n {
        let y = map.spec.coord(iy);
        for ix in 0..map.spec.n {
            let x = map.spec.coord(ix);
            let v = map.value(ix, iy);
            let _ = writeln!(
                out,
                "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
                x,
                y,
                v.re,
                v.im,
                v.norm()
            );
        }
    }
    out
}

/// Scalar detector map: `Qx Qy value` rows.
pub fn scalar_map_to_text(grid: &PixelGrid, values: &[f64], label: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {TOOL_NAME} {label}");
    let _ = writeln!(out, "# units: Q in 1/nm");
    let _ = writeln!(
        out,
        "# grid: q_max {:.17e} pitch {:.17e} pixels {}",
        grid.q_max(),
        grid.pitch(),
        grid.len()
    );
    let _ = writeln!(out, "# columns: Qx Qy value");
    for (p, v) in grid.pixels().iter().zip(values) {
        let _ = writeln!(out, "{:.17e} {:.17e} {:.17e}", p.q[0], p.q[1], v);
    }
    out
}

pub fn fractions_to_text(fm: &FractionMatrix, label: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {TOOL_NAME} fractions {label}");
    let norm = match fm.normalization {
        FractionNormalization::PerRegion => "per-region",
        FractionNormalization::Global => "global",
    };
    let _ = writeln!(out, "# normalization: {norm}");
    let _ = writeln!(out, "# columns: region center_qx center_qy radius, then one column per mode");
    for (j, region) in fm.regions.iter().enumerate() {
        let mut line = format!(
            "{} {:.17e} {:.17e} {:.17e}",
            j + 1,
            region.center[0],
            region.center[1],
            region.radius
        );
        for n in 0..fm.entries.ncols() {
            let _ = write!(line, " {:.17e}", fm.entries[(j, n)]);
        }
        let _ = writeln!(out, "{line}");
    }
    out
}

pub fn spectrum_to_text(omegas: &[f64], columns: &[(&str, &[f64])], label: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {TOOL_NAME} spectrum {label}");
    let names: Vec<&str> = columns.iter().map(|(n, _)| *n).collect();
    let _ = writeln!(out, "# columns: omega_eV {}", names.join(" "));
    for (k, w) in omegas.iter().enumerate() {
        let mut line = format!("{:.17e}", w);
        for (_, col) in columns {
            let _ = write!(line, " {:.17e}", col[k]);
        }
        let _ = writeln!(out, "{line}");
    }
    out
}
