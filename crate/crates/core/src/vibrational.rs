//! Vibrational samples: atoms, mode frequencies and displacement patterns,
//! plus the charge-response model coupling them to the probing electron.
//!
//! Mode data is ingested from files (or built by the surrogate constructors);
//! it is never computed from first principles here.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::units::HBAR_C;

/// amu expressed in natural units (eV per squared internal velocity unit).
pub fn amu_natural() -> f64 {
    // m c² = 931.494 MeV per amu; velocities carry units of ħc/nm·(1/ħ)
    931.494_102e6 / (HBAR_C * HBAR_C)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VibAtom {
    pub element: String,
    pub mass_amu: f64,
    /// Position in nm; the beam axis is z.
    pub position: [f64; 3],
    /// Effective charge in units of e (point-charge model).
    pub charge_e: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VibMode {
    /// ħω_n in eV.
    pub omega_ev: f64,
    /// Mass-weighted displacement 3-vectors, one per atom, Σ_l e·e = 1.
    pub displacements: Vec<[f64; 3]>,
}

/// Charge-distribution gradient ρ_l sampled on a regular grid (one vector per
/// node), in units of e/nm⁴.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeGrid {
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub dims: [usize; 3],
    /// Row-major over (x, y, z), vector components innermost.
    pub values: Vec<[f64; 3]>,
}

impl ChargeGrid {
    pub fn node(&self, ix: usize, iy: usize, iz: usize) -> ([f64; 3], [f64; 3]) {
        let idx = (ix * self.dims[1] + iy) * self.dims[2] + iz;
        let p = [
            self.origin[0] + ix as f64 * self.spacing[0],
            self.origin[1] + iy as f64 * self.spacing[1],
            self.origin[2] + iz as f64 * self.spacing[2],
        ];
        (p, self.values[idx])
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing[0] * self.spacing[1] * self.spacing[2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChargeModel {
    /// Displacing atom l carries a point charge q_l: ρ_l(r) = −q_l ∇δ(r−r_l).
    PointCharges,
    /// Gridded ρ_l(r) per atom.
    Gridded(Vec<ChargeGrid>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VibrationalModeSet {
    pub atoms: Vec<VibAtom>,
    pub modes: Vec<VibMode>,
    /// Phenomenological damping ħγ in eV (default 1 meV).
    pub gamma_ev: f64,
    /// Close-encounter regularization Δ in nm (default 0.02).
    pub delta_nm: f64,
    pub charge_model: ChargeModel,
}

pub const DEFAULT_GAMMA_EV: f64 = 1e-3;
pub const DEFAULT_DELTA_NM: f64 = 0.02;

impl VibrationalModeSet {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Spectral weight G_n = π ω_n / 2.
    pub fn weight(&self, mode: usize) -> f64 {
        0.5 * PI * self.modes[mode].omega_ev
    }

    /// g_n(ω) = Im{ω_n² / [ω_n² − ω(ω + iγ)]}.
    pub fn g_exact(&self, mode: usize, omega: f64) -> f64 {
        let wn2 = self.modes[mode].omega_ev * self.modes[mode].omega_ev;
        let den = num_complex::Complex64::new(wn2 - omega * omega, -omega * self.gamma_ev);
        (num_complex::Complex64::new(wn2, 0.0) / den).im
    }

    /// Checks orthonormality Σ_l e_nl·e_n'l = δ_nn' and positivity rules.
    pub fn validate(&self, tol: f64) -> Result<()> {
        for atom in &self.atoms {
            if !(atom.mass_amu > 0.0) {
                return Err(Error::ingestion(format!(
                    "atom {} has non-positive mass",
                    atom.element
                )));
            }
        }
        for (n, mode) in self.modes.iter().enumerate() {
            if !(mode.omega_ev > 0.0) {
                return Err(Error::ingestion(format!(
                    "mode {} has non-positive energy",
                    n + 1
                )));
            }
            if mode.displacements.len() != self.atoms.len() {
                return Err(Error::ingestion(format!(
                    "mode {} has {} displacement vectors for {} atoms",
                    n + 1,
                    mode.displacements.len(),
                    self.atoms.len()
                )));
            }
        }
        for i in 0..self.modes.len() {
            for j in i..self.modes.len() {
                let mut dot = 0.0;
                for l in 0..self.atoms.len() {
                    let a = self.modes[i].displacements[l];
                    let b = self.modes[j].displacements[l];
                    dot += a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > tol {
                    return Err(Error::ingestion(format!(
                        "modes {} and {} are not orthonormal: Σ e·e = {dot:.6}",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        if let ChargeModel::Gridded(grids) = &self.charge_model {
            if grids.len() != self.atoms.len() {
                return Err(Error::ingestion(format!(
                    "{} charge grids for {} atoms",
                    grids.len(),
                    self.atoms.len()
                )));
            }
        }
        Ok(())
    }
}

/// Parses the line-based vibrational format:
/// a `NATOMS n NMODES m HGAMMA_meV g DELTA_nm d` header, `element mass x y z
/// q` atom lines, then `MODE k homega_meV` blocks each followed by one
/// `ex ey ez` line per atom. Optional `GRIDFILE atom path nx ny nz x0 y0 z0
/// dx dy dz` lines attach gridded charge data (little-endian f64 triplets).
pub fn parse_vibrational_text(
    text: &str,
    origin: &str,
    base_dir: Option<&Path>,
) -> Result<VibrationalModeSet> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    });
    let fail =
        |lineno: usize, msg: &str| -> Error { Error::ingestion(format!("{origin}:{}: {msg}", lineno + 1)) };

    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::ingestion(format!("{origin}: empty file")))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 8
        || tokens[0] != "NATOMS"
        || tokens[2] != "NMODES"
        || tokens[4] != "HGAMMA_meV"
        || tokens[6] != "DELTA_nm"
    {
        return Err(fail(
            hline,
            "expected `NATOMS n NMODES m HGAMMA_meV g DELTA_nm d` header",
        ));
    }
    let n_atoms: usize = tokens[1].parse().map_err(|_| fail(hline, "bad NATOMS"))?;
    let n_modes: usize = tokens[3].parse().map_err(|_| fail(hline, "bad NMODES"))?;
    let gamma_mev: f64 = tokens[5].parse().map_err(|_| fail(hline, "bad HGAMMA"))?;
    let delta_nm: f64 = tokens[7].parse().map_err(|_| fail(hline, "bad DELTA"))?;

    let mut atoms = Vec::with_capacity(n_atoms);
    for _ in 0..n_atoms {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| Error::ingestion(format!("{origin}: truncated atom list")))?;
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 6 {
            return Err(fail(lineno, "expected `element mass_amu x y z q_eff`"));
        }
        let nums: Vec<f64> = t[1..]
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| fail(lineno, "malformed atom numbers"))?;
        atoms.push(VibAtom {
            element: t[0].to_string(),
            mass_amu: nums[0],
            position: [nums[1], nums[2], nums[3]],
            charge_e: nums[4],
        });
    }

    let mut modes = Vec::with_capacity(n_modes);
    let mut grids: Vec<Option<ChargeGrid>> = vec![None; n_atoms];
    let mut any_grid = false;
    while let Some((lineno, line)) = lines.next() {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t[0] {
            "MODE" => {
                if t.len() < 3 {
                    return Err(fail(lineno, "expected `MODE index homega_meV`"));
                }
                let idx: usize = t[1].parse().map_err(|_| fail(lineno, "bad mode index"))?;
                if idx != modes.len() + 1 {
                    return Err(fail(
                        lineno,
                        &format!("mode index {idx} out of order (expected {})", modes.len() + 1),
                    ));
                }
                let omega_mev: f64 =
                    t[2].parse().map_err(|_| fail(lineno, "bad mode energy"))?;
                let mut displacements = Vec::with_capacity(n_atoms);
                for _ in 0..n_atoms {
                    let (dl, dline) = lines.next().ok_or_else(|| {
                        Error::ingestion(format!("{origin}: truncated mode block"))
                    })?;
                    let comps: Vec<f64> = dline
                        .split_whitespace()
                        .map(|s| s.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| fail(dl, "malformed displacement line"))?;
                    if comps.len() != 3 {
                        return Err(fail(dl, "expected `ex ey ez`"));
                    }
                    displacements.push([comps[0], comps[1], comps[2]]);
                }
                modes.push(VibMode {
                    omega_ev: omega_mev * 1e-3,
                    displacements,
                });
            }
            "GRIDFILE" => {
                if t.len() != 12 {
                    return Err(fail(
                        lineno,
                        "expected `GRIDFILE atom path nx ny nz x0 y0 z0 dx dy dz`",
                    ));
                }
                let atom: usize = t[1].parse().map_err(|_| fail(lineno, "bad atom index"))?;
                if atom == 0 || atom > n_atoms {
                    return Err(fail(lineno, "grid atom index out of range"));
                }
                let path_str = t[2];
                let dims: [usize; 3] = [
                    t[3].parse().map_err(|_| fail(lineno, "bad nx"))?,
                    t[4].parse().map_err(|_| fail(lineno, "bad ny"))?,
                    t[5].parse().map_err(|_| fail(lineno, "bad nz"))?,
                ];
                let nums: Vec<f64> = t[6..12]
                    .iter()
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| fail(lineno, "bad grid geometry"))?;
                let full = match base_dir {
                    Some(dir) => dir.join(path_str),
                    None => Path::new(path_str).to_path_buf(),
                };
                let grid = read_charge_grid(
                    &full,
                    dims,
                    [nums[0], nums[1], nums[2]],
                    [nums[3], nums[4], nums[5]],
                )?;
                grids[atom - 1] = Some(grid);
                any_grid = true;
            }
            other => {
                return Err(fail(lineno, &format!("unexpected directive `{other}`")));
            }
        }
    }
    if modes.len() != n_modes {
        return Err(Error::ingestion(format!(
            "{origin}: header promises {n_modes} modes, found {}",
            modes.len()
        )));
    }

    let charge_model = if any_grid {
        let all: Option<Vec<ChargeGrid>> = grids.into_iter().collect();
        match all {
            Some(gs) => ChargeModel::Gridded(gs),
            None => {
                return Err(Error::ingestion(format!(
                    "{origin}: gridded charge model requires one GRIDFILE per atom"
                )))
            }
        }
    } else {
        ChargeModel::PointCharges
    };

    let set = VibrationalModeSet {
        atoms,
        modes,
        gamma_ev: gamma_mev * 1e-3,
        delta_nm,
        charge_model,
    };
    set.validate(1e-4)?;
    Ok(set)
}

pub fn load_vibrational(path: &Path) -> Result<VibrationalModeSet> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_vibrational_text(&text, &path.display().to_string(), path.parent())
}

/// Binary grid file: nx·ny·nz little-endian f64 triplets, x-major with the
/// vector components innermost.
fn read_charge_grid(
    path: &Path,
    dims: [usize; 3],
    origin: [f64; 3],
    spacing: [f64; 3],
) -> Result<ChargeGrid> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let n = dims[0] * dims[1] * dims[2];
    if bytes.len() != n * 3 * 8 {
        return Err(Error::ingestion(format!(
            "{}: expected {} bytes for a {}x{}x{} vector grid, found {}",
            path.display(),
            n * 24,
            dims[0],
            dims[1],
            dims[2],
            bytes.len()
        )));
    }
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        let mut v = [0.0f64; 3];
        for (c, slot) in v.iter_mut().enumerate() {
            let off = (k * 3 + c) * 8;
            *slot = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        }
        values.push(v);
    }
    Ok(ChargeGrid {
        origin,
        spacing,
        dims,
        values,
    })
}

/// Serializes a mode set back to the text format (fixtures, round trips).
pub fn write_vibrational_text(set: &VibrationalModeSet) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "NATOMS {} NMODES {} HGAMMA_meV {} DELTA_nm {}",
        set.atoms.len(),
        set.modes.len(),
        set.gamma_ev * 1e3,
        set.delta_nm
    );
    for a in &set.atoms {
        let _ = writeln!(
            out,
            "{} {} {:.12} {:.12} {:.12} {}",
            a.element, a.mass_amu, a.position[0], a.position[1], a.position[2], a.charge_e
        );
    }
    for (k, m) in set.modes.iter().enumerate() {
        let _ = writeln!(out, "MODE {} {}", k + 1, m.omega_ev * 1e3);
        for d in &m.displacements {
            let _ = writeln!(out, "{:.15} {:.15} {:.15}", d[0], d[1], d[2]);
        }
    }
    out
}

/// Builds the symmetric surrogate molecule: three identical heavy–light
/// bond-stretch units placed with threefold symmetry in the transverse plane,
/// giving an exactly triply-degenerate stretch multiplet.
pub fn triatomic_ring_surrogate(
    ring_radius_nm: f64,
    bond_nm: f64,
    homega_mev: f64,
    heavy_mass_amu: f64,
    light_mass_amu: f64,
    charge_e: f64,
) -> VibrationalModeSet {
    let angles = [PI / 2.0, PI / 2.0 + 2.0 * PI / 3.0, PI / 2.0 + 4.0 * PI / 3.0];
    let mut atoms = Vec::new();
    for a in angles {
        let radial = [a.cos(), a.sin()];
        atoms.push(VibAtom {
            element: "X".into(),
            mass_amu: heavy_mass_amu,
            position: [ring_radius_nm * radial[0], ring_radius_nm * radial[1], 0.0],
            charge_e: -charge_e,
        });
        atoms.push(VibAtom {
            element: "H".into(),
            mass_amu: light_mass_amu,
            position: [
                (ring_radius_nm + bond_nm) * radial[0],
                (ring_radius_nm + bond_nm) * radial[1],
                0.0,
            ],
            charge_e,
        });
    }
    // per-unit mass-weighted stretch eigenvector
    let m_sum = heavy_mass_amu + light_mass_amu;
    let e_heavy = (light_mass_amu / m_sum).sqrt();
    let e_light = -(heavy_mass_amu / m_sum).sqrt();
    let mut modes = Vec::new();
    for (unit, a) in angles.iter().enumerate() {
        let radial = [a.cos(), a.sin()];
        let mut displacements = vec![[0.0; 3]; 6];
        displacements[2 * unit] = [e_heavy * radial[0], e_heavy * radial[1], 0.0];
        displacements[2 * unit + 1] = [e_light * radial[0], e_light * radial[1], 0.0];
        modes.push(VibMode {
            omega_ev: homega_mev * 1e-3,
            displacements,
        });
    }
    VibrationalModeSet {
        atoms,
        modes,
        gamma_ev: DEFAULT_GAMMA_EV,
        delta_nm: DEFAULT_DELTA_NM,
        charge_model: ChargeModel::PointCharges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "NATOMS 2 NMODES 1 HGAMMA_meV 1.0 DELTA_nm 0.02\n\
        H 1.008 0.0 0.0 0.0 0.35\n\
        N 14.007 0.1 0.0 0.0 -0.35\n\
        MODE 1 440.0\n\
        0.70710678118654752 0 0\n\
        0.70710678118654752 0 0\n";

    #[test]
    fn toy_file_accepted() {
        let set = parse_vibrational_text(TOY, "toy", None).unwrap();
        assert_eq!(set.atoms.len(), 2);
        assert_eq!(set.modes.len(), 1);
        assert!((set.modes[0].omega_ev - 0.44).abs() < 1e-12);
        assert!((set.gamma_ev - 1e-3).abs() < 1e-15);
        assert_eq!(set.charge_model, ChargeModel::PointCharges);
    }

    #[test]
    fn non_orthonormal_rejected() {
        let bad = TOY.replace("0.70710678118654752 0 0", "0.67 0 0");
        let err = parse_vibrational_text(&bad, "bad", None).unwrap_err();
        assert!(err.to_string().contains("orthonormal"), "{err}");
    }

    #[test]
    fn malformed_line_reports_position() {
        let bad = TOY.replace("MODE 1 440.0", "MODE 1 oops");
        let err = parse_vibrational_text(&bad, "vib.txt", None)
            .unwrap_err()
            .to_string();
        assert!(err.contains("vib.txt:4"), "{err}");
    }

    #[test]
    fn g_peak_value_is_omega_over_gamma() {
        let set = parse_vibrational_text(TOY, "toy", None).unwrap();
        let peak = set.g_exact(0, 0.44);
        assert!((peak - 0.44 / 1e-3).abs() < 1.0, "peak {peak}");
        // decays far above resonance and stays non-negative
        assert!(set.g_exact(0, 5.0) < 1e-2);
        let mut w = 0.05;
        while w < 2.0 {
            assert!(set.g_exact(0, w) >= 0.0);
            w += 0.013;
        }
    }

    #[test]
    fn weight_rule() {
        let set = parse_vibrational_text(TOY, "toy", None).unwrap();
        assert!((set.weight(0) - 0.5 * PI * 0.44).abs() < 1e-15);
    }

    #[test]
    fn surrogate_ring_is_orthonormal_and_degenerate() {
        let set = triatomic_ring_surrogate(0.25, 0.10, 440.0, 14.007, 1.008, 0.3);
        set.validate(1e-12).unwrap();
        assert_eq!(set.modes.len(), 3);
        for m in &set.modes {
            assert!((m.omega_ev - 0.44).abs() < 1e-15);
        }
    }

    #[test]
    fn text_roundtrip() {
        let set = triatomic_ring_surrogate(0.25, 0.10, 440.0, 14.007, 1.008, 0.3);
        let text = write_vibrational_text(&set);
        let back = parse_vibrational_text(&text, "rt", None).unwrap();
        assert_eq!(set.atoms.len(), back.atoms.len());
        for (a, b) in set.modes.iter().zip(&back.modes) {
            assert!((a.omega_ev - b.omega_ev).abs() < 1e-12);
            for (da, db) in a.displacements.iter().zip(&b.displacements) {
                for c in 0..3 {
                    assert!((da[c] - db[c]).abs() < 1e-12);
                }
            }
        }
    }
}
