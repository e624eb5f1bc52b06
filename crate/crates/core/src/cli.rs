//! Batch front-end: builds the sample basis from a run configuration and
//! drives the modes/shape/forward/report subcommands.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::bem::{drude_dress, eigensolve, DrudeParams};
use crate::config::{RunConfig, SampleConfig, TargetSection};
use crate::eels::EelsEvaluator;
use crate::error::{Error, Result};
use crate::grid::{wavefunction_to_realspace, ComplexField, PixelGrid, RealGridSpec};
use crate::mesh::{build_sphere_mesh, build_triangle_mesh, load_mesh};
use crate::modes::{ModeBasis, ModeKind};
use crate::report::{
    field_from_text, field_to_text, fractions_to_text, load_manifest, realspace_to_text,
    scalar_map_to_text, sha256_file, spectrum_to_text, InputDigest, Manifest, RunWriter, ToolInfo,
    TOOL_NAME, TOOL_VERSION,
};
use crate::shaper::{
    build_inversion_system, forward_scatter, fraction_matrix, solve_incident, FractionNormalization,
    SelectionRegion, TargetState, TransferMatrixSampled,
};
use crate::units::BeamConfig;
use crate::vibrational::load_vibrational;

/// Sample basis plus everything needed for manifests and diagnostics.
pub struct BuiltSample {
    pub basis: ModeBasis,
    pub beam: BeamConfig,
    pub inputs: Vec<InputDigest>,
    pub warnings: Vec<String>,
    pub eigen_residual: Option<f64>,
}

pub fn beam_from_config(cfg: &RunConfig) -> Result<BeamConfig> {
    BeamConfig::from_energy(
        cfg.beam.kinetic_energy_ev,
        cfg.beam.phi_i_mrad * 1e-3,
        cfg.beam.phi_f_mrad * 1e-3,
        cfg.beam.pixels_i,
        cfg.beam.pixels_f,
        cfg.beam.k_convention,
    )
}

/// Builds the mode basis for the configured sample (the expensive step).
pub fn build_sample(cfg: &RunConfig) -> Result<BuiltSample> {
    let beam = beam_from_config(cfg)?;
    let mut inputs = Vec::new();
    let mut warnings = Vec::new();
    let mut eigen_residual = None;
    let basis = match &cfg.sample {
        SampleConfig::Triangle {
            side_nm,
            thickness_nm,
            corner_rounding_nm,
            elements,
            n_modes,
            drude,
        } => {
            let mesh = Arc::new(build_triangle_mesh(
                *side_nm,
                *thickness_nm,
                *elements,
                *corner_rounding_nm,
            )?);
            let raw = eigensolve(&mesh, *n_modes)?;
            eigen_residual = Some(raw.max_residual);
            let set = drude_dress(
                &raw,
                DrudeParams {
                    eps_b: drude.eps_b,
                    omega_p: drude.homega_p_ev,
                    gamma: drude.hgamma_ev,
                },
            );
            warnings.extend(set.warnings.clone());
            ModeBasis::plasmon(Arc::new(set), &beam)
        }
        SampleConfig::Sphere {
            radius_nm,
            elements,
            n_modes,
            drude,
        } => {
            let mesh = Arc::new(build_sphere_mesh(*radius_nm, *elements)?);
            let raw = eigensolve(&mesh, *n_modes)?;
            eigen_residual = Some(raw.max_residual);
            let set = drude_dress(
                &raw,
                DrudeParams {
                    eps_b: drude.eps_b,
                    omega_p: drude.homega_p_ev,
                    gamma: drude.hgamma_ev,
                },
            );
            warnings.extend(set.warnings.clone());
            ModeBasis::plasmon(Arc::new(set), &beam)
        }
        SampleConfig::Mesh { path, n_modes, drude } => {
            inputs.push(InputDigest {
                path: path.display().to_string(),
                sha256: sha256_file(path)?,
            });
            let mesh = Arc::new(load_mesh(path)?);
            let raw = eigensolve(&mesh, *n_modes)?;
            eigen_residual = Some(raw.max_residual);
            let set = drude_dress(
                &raw,
                DrudeParams {
                    eps_b: drude.eps_b,
                    omega_p: drude.homega_p_ev,
                    gamma: drude.hgamma_ev,
                },
            );
            warnings.extend(set.warnings.clone());
            ModeBasis::plasmon(Arc::new(set), &beam)
        }
        SampleConfig::Vibrational { path } => {
            inputs.push(InputDigest {
                path: path.display().to_string(),
                sha256: sha256_file(path)?,
            });
            let set = load_vibrational(path)?;
            ModeBasis::vibrational(Arc::new(set), &beam)
        }
    };
    Ok(BuiltSample {
        basis,
        beam,
        inputs,
        warnings,
        eigen_residual,
    })
}

pub fn incident_grid(beam: &BeamConfig) -> Result<Arc<PixelGrid>> {
    PixelGrid::disk(beam.q_max_i(), beam.n_pixels_i)
}

pub fn detector_grid(beam: &BeamConfig) -> Result<Arc<PixelGrid>> {
    PixelGrid::disk(beam.q_max_f(), beam.n_pixels_f)
}

/// Finer detector lattice used for rendered maps and fraction metrics.
pub fn render_grid(beam: &BeamConfig, oversample: usize) -> Result<Arc<PixelGrid>> {
    let coarse = detector_grid(beam)?;
    PixelGrid::with_pitch(beam.q_max_f(), coarse.pitch() / oversample as f64)
}

/// Translates the 1-based config target into shaper terms.
pub fn target_state(cfg: &RunConfig, basis: &ModeBasis, beam: &BeamConfig) -> Result<TargetState> {
    let section = cfg
        .target
        .as_ref()
        .ok_or_else(|| Error::configuration("this command needs a [target] section"))?;
    let n = basis.len();
    match section {
        TargetSection::Select { mode } => {
            if *mode > n {
                return Err(Error::configuration(format!(
                    "target references mode {mode} but the basis holds {n} modes"
                )));
            }
            Ok(TargetState::SelectMode { mode: mode - 1 })
        }
        TargetSection::Entangle { pairs } => {
            let q_f = beam.q_max_f();
            let mut out = Vec::with_capacity(pairs.len());
            for p in pairs {
                if p.mode > n {
                    return Err(Error::configuration(format!(
                        "target references mode {} but the basis holds {n} modes",
                        p.mode
                    )));
                }
                out.push((p.mode - 1, [p.q_frac[0] * q_f, p.q_frac[1] * q_f]));
            }
            Ok(TargetState::Entangle { pairs: out })
        }
    }
}

/// Selection regions for the fraction metrics: one disk per entangle pair
/// (radius in coarse-pixel pitches), or the whole aperture for mode-selective
/// runs.
pub fn selection_regions(
    cfg: &RunConfig,
    target: &TargetState,
    beam: &BeamConfig,
) -> Result<Vec<SelectionRegion>> {
    let coarse = detector_grid(beam)?;
    let radius = cfg.solver.region_radius_pixels * coarse.pitch();
    match target {
        TargetState::Entangle { pairs } => Ok(pairs
            .iter()
            .map(|(_, q)| SelectionRegion {
                center: *q,
                radius,
            })
            .collect()),
        TargetState::SelectMode { .. } => Ok(vec![SelectionRegion {
            center: [0.0, 0.0],
            radius: beam.q_max_f(),
        }]),
    }
}

fn default_out(cfg: &RunConfig, suffix: &str) -> PathBuf {
    let dir = &cfg.output.dir;
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().to_string())
        .unwrap_or_else(|| "run".to_string());
    dir.with_file_name(format!("{name}-{suffix}"))
}

fn manifest_for(cfg: &RunConfig, command: &str, inputs: Vec<InputDigest>) -> Manifest {
    let mut config = cfg.clone();
    config.output.dir = PathBuf::from(".");
    Manifest {
        tool: ToolInfo {
            name: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
        },
        command: command.into(),
        config,
        inputs,
        files: Vec::new(),
    }
}

fn mode_table(basis: &ModeBasis, eigen_residual: Option<f64>, warnings: &[String]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "# {TOOL_NAME} mode table");
    let kind = match basis.kind() {
        ModeKind::Plasmon => "plasmon",
        ModeKind::Vibrational => "vibrational",
    };
    let _ = writeln!(out, "# kind: {kind}");
    let _ = writeln!(out, "# columns: index lambda omega_eV gamma_eV weight_eV");
    for n in 0..basis.len() {
        let lambda = basis
            .plasmon_set()
            .map(|s| s.lambdas[n])
            .unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{} {:.17e} {:.17e} {:.17e} {:.17e}",
            n + 1,
            lambda,
            basis.omega(n),
            basis.gamma(n),
            basis.weight(n)
        );
    }
    let groups: Vec<String> = basis
        .degenerate_groups()
        .iter()
        .map(|g| {
            let labels: Vec<String> = g.iter().map(|i| (i + 1).to_string()).collect();
            format!("({})", labels.join(","))
        })
        .collect();
    let _ = writeln!(out, "# degenerate groups: {}", groups.join(" "));
    if let Some(r) = eigen_residual {
        let _ = writeln!(out, "# max eigen-residual: {r:.3e}");
    }
    for w in warnings {
        let _ = writeln!(out, "# warning: {w}");
    }
    out
}

/// Real-space window enclosing the sample structure.
fn structure_window(basis: &ModeBasis) -> RealGridSpec {
    let mut radius = 1.0f64;
    if let Some(set) = basis.plasmon_set() {
        for e in &set.mesh.elements {
            radius = radius.max((e.centroid[0].powi(2) + e.centroid[1].powi(2)).sqrt());
        }
    }
    if let Some(set) = basis.vibrational_set() {
        for a in &set.atoms {
            radius = radius.max((a.position[0].powi(2) + a.position[1].powi(2)).sqrt() + 0.2);
        }
    }
    RealGridSpec {
        extent: 3.0 * radius,
        n: 96,
    }
}

/// Wide window for energy-loss integrals: covers the beam period and the
/// slowest mode decay.
fn eels_window(basis: &ModeBasis, beam: &BeamConfig, grid_in: &PixelGrid, decay: f64) -> RealGridSpec {
    let omega_min = (0..basis.len())
        .map(|n| basis.omega(n))
        .fold(f64::MAX, f64::min);
    let fov = 2.0 * PI / grid_in.pitch();
    let extent = (decay * basis.velocity() / omega_min).max(fov);
    let dr = PI / (beam.q_max_i() + beam.q_max_f()) / 1.25;
    RealGridSpec {
        extent,
        n: (extent / dr).ceil() as usize,
    }
}

/// Writes the mode report: dispersion table plus real-space profile maps.
pub fn cmd_modes(cfg: &RunConfig, out: Option<&Path>) -> Result<PathBuf> {
    let sample = build_sample(cfg)?;
    let out_dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_out(cfg, "modes"));
    let mut writer = RunWriter::create(&out_dir)?;
    writer.write(
        "modes.txt",
        &mode_table(&sample.basis, sample.eigen_residual, &sample.warnings),
    )?;
    let window = structure_window(&sample.basis);
    for n in 0..sample.basis.len() {
        let map = sample.basis.w_map(n, window);
        writer.write(
            &format!("mode_profiles/w_{}.txt", n + 1),
            &realspace_to_text(&map, &format!("mode {} profile w_n(R)", n + 1)),
        )?;
    }
    writer.finish(manifest_for(cfg, "modes", sample.inputs))
}

/// Runs the inversion: builds the transfer system for the configured target
/// and solves for the incident wave function.
pub fn cmd_shape(cfg: &RunConfig, out: Option<&Path>) -> Result<PathBuf> {
    let sample = build_sample(cfg)?;
    let beam = &sample.beam;
    let grid_in = incident_grid(beam)?;
    let grid_det = detector_grid(beam)?;
    let target = target_state(cfg, &sample.basis, beam)?;
    let transfer =
        TransferMatrixSampled::sample_analytic(&sample.basis, grid_in.clone(), grid_det.clone());
    let system = build_inversion_system(&transfer, &target)?;
    let shaped = solve_incident(&system, cfg.solver.svd_cutoff, cfg.solver.tikhonov).map_err(
        |e| match e {
            Error::Numeric(msg) if msg.contains("degenerate") => Error::numeric(format!(
                "{msg}; consider a larger incidence half-angle or fewer targets"
            )),
            other => other,
        },
    )?;

    let out_dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_out(cfg, "shape"));
    let mut writer = RunWriter::create(&out_dir)?;
    writer.write(
        "incident_alpha.txt",
        &field_to_text(&shaped.field, "incident wave-function coefficients"),
    )?;
    let psi = wavefunction_to_realspace(&shaped.field, RealGridSpec::for_grid(&grid_in))?;
    writer.write(
        "psi_real.txt",
        &realspace_to_text(&psi, "optimized incident wave function"),
    )?;
    writer.write(
        "modes.txt",
        &mode_table(&sample.basis, sample.eigen_residual, &sample.warnings),
    )?;
    let mut diag = String::new();
    {
        use std::fmt::Write as _;
        let _ = writeln!(diag, "# {TOOL_NAME} inversion diagnostics");
        let _ = writeln!(diag, "rows {}", system.matrix.nrows());
        let _ = writeln!(diag, "columns {}", system.matrix.ncols());
        let _ = writeln!(diag, "residual_norm {:.17e}", shaped.solution.residual_norm);
        let _ = writeln!(
            diag,
            "relative_residual {:.17e}",
            shaped.solution.relative_residual
        );
        let _ = writeln!(diag, "rank {}", shaped.solution.rank);
        let _ = writeln!(diag, "condition {:.17e}", shaped.solution.condition);
        let _ = writeln!(diag, "svd_cutoff {:.17e}", cfg.solver.svd_cutoff);
        let _ = writeln!(diag, "tikhonov {:.17e}", cfg.solver.tikhonov);
        let head: Vec<String> = shaped
            .solution
            .singular_values
            .iter()
            .take(12)
            .map(|s| format!("{s:.6e}"))
            .collect();
        let _ = writeln!(diag, "singular_values_head {}", head.join(" "));
    }
    writer.write("diagnostics.txt", &diag)?;
    writer.finish(manifest_for(cfg, "shape", sample.inputs))
}

/// Propagates a stored incident field through the sample and writes maps,
/// spectra and fraction metrics.
pub fn cmd_forward(cfg: &RunConfig, alpha_path: &Path, out: Option<&Path>) -> Result<PathBuf> {
    let sample = build_sample(cfg)?;
    let beam = &sample.beam;
    let grid_in = incident_grid(beam)?;
    let alpha_text = std::fs::read_to_string(alpha_path)
        .map_err(|e| Error::io(alpha_path.display().to_string(), e))?;
    let alpha = field_from_text(&alpha_text, &alpha_path.display().to_string(), grid_in.clone())?;
    let mut inputs = sample.inputs.clone();
    inputs.push(InputDigest {
        path: alpha_path.display().to_string(),
        sha256: sha256_file(alpha_path)?,
    });

    let grid_render = render_grid(beam, cfg.solver.render_oversample)?;
    let transfer =
        TransferMatrixSampled::sample_analytic(&sample.basis, grid_in.clone(), grid_render.clone());
    let state = forward_scatter(&alpha, &transfer)?;
    let total = state.total_probability();

    let out_dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_out(cfg, "forward"));
    let mut writer = RunWriter::create(&out_dir)?;

    for n in 0..sample.basis.len() {
        let field = ComplexField::new(grid_render.clone(), state.amplitudes[n].clone())?;
        writer.write(
            &format!("final_maps/mode_{}.txt", n + 1),
            &field_to_text(&field, &format!("scattered amplitudes, mode {}", n + 1)),
        )?;
    }

    let no_signal = total <= 0.0;
    let mut diag = String::new();
    {
        use std::fmt::Write as _;
        let _ = writeln!(diag, "# {TOOL_NAME} forward diagnostics");
        let _ = writeln!(diag, "total_probability {total:.17e}");
        for n in 0..sample.basis.len() {
            let _ = writeln!(
                diag,
                "mode_probability_{} {:.17e}",
                n + 1,
                state.mode_probability(n)
            );
        }
        if state.perturbative_warning() {
            let _ = writeln!(
                diag,
                "warning first-order scattering probability exceeds 0.1; perturbative \
                 bookkeeping is strained"
            );
        }
        if no_signal {
            let _ = writeln!(diag, "status no-signal");
        } else {
            let _ = writeln!(diag, "status ok");
        }
    }
    writer.write("diagnostics.txt", &diag)?;

    if no_signal {
        writer.write(
            "fractions.txt",
            "# no inelastic signal: fraction matrix undefined\n",
        )?;
        return writer.finish(manifest_for(cfg, "forward", inputs));
    }

    // fraction metrics around the configured selection regions
    if let Ok(target) = target_state(cfg, &sample.basis, beam) {
        let regions = selection_regions(cfg, &target, beam)?;
        let per_region = fraction_matrix(&state, &regions, FractionNormalization::PerRegion)?;
        let global = fraction_matrix(&state, &regions, FractionNormalization::Global)?;
        let mut text = fractions_to_text(&per_region, "per-region");
        text.push_str(&fractions_to_text(&global, "global"));
        writer.write("fractions.txt", &text)?;
    }

    // energy-loss maps at every mode energy plus the in-aperture spectrum
    let window = eels_window(&sample.basis, beam, &grid_in, cfg.solver.eels_window_decay);
    let psi = wavefunction_to_realspace(&alpha, window)?;
    let q_points: Vec<[f64; 2]> = grid_render.pixels().iter().map(|p| p.q).collect();
    let evaluator = EelsEvaluator::new(&psi, &sample.basis, q_points)?;
    for n in 0..sample.basis.len() {
        let map = evaluator.map_at(sample.basis.omega(n));
        writer.write(
            &format!("eels_maps/omega_{}.txt", n + 1),
            &scalar_map_to_text(
                &grid_render,
                &map,
                &format!("EELS map at mode {} energy", n + 1),
            ),
        )?;
    }
    let (w_lo, w_hi) = if cfg.spectrum.omega_max_ev > 0.0 {
        (cfg.spectrum.omega_min_ev, cfg.spectrum.omega_max_ev)
    } else {
        let lo = (0..sample.basis.len())
            .map(|n| sample.basis.omega(n))
            .fold(f64::MAX, f64::min);
        let hi = (0..sample.basis.len())
            .map(|n| sample.basis.omega(n))
            .fold(0.0f64, f64::max);
        (0.8 * lo, 1.1 * hi)
    };
    let n_w = cfg.spectrum.points.max(2);
    let omegas: Vec<f64> = (0..n_w)
        .map(|k| w_lo + (w_hi - w_lo) * k as f64 / (n_w - 1) as f64)
        .collect();
    let selected: Vec<usize> = (0..grid_render.len()).collect();
    let aperture = evaluator.region_spectrum(&omegas, &selected, grid_render.pixel_area());
    let closed: Vec<f64> = omegas
        .iter()
        .map(|&w| evaluator.total_closed_form(w))
        .collect();
    writer.write(
        "spectrum.txt",
        &spectrum_to_text(
            &omegas,
            &[("aperture", &aperture), ("total_closed_form", &closed)],
            "in-aperture energy-filtered spectrum",
        ),
    )?;

    writer.finish(manifest_for(cfg, "forward", inputs))
}

/// Consolidated human-readable summary of a finished run directory.
pub fn cmd_report(run_dir: &Path) -> Result<String> {
    use std::fmt::Write as _;
    let manifest_path = run_dir.join("manifest.toml");
    if !manifest_path.exists() {
        return Err(Error::ingestion(format!(
            "{}: no manifest.toml (not a run directory)",
            run_dir.display()
        )));
    }
    let manifest = load_manifest(&manifest_path)?;
    let mut out = String::new();
    let _ = writeln!(out, "run summary");
    let _ = writeln!(
        out,
        "tool: {} {}",
        manifest.tool.name, manifest.tool.version
    );
    let _ = writeln!(out, "command: {}", manifest.command);
    for input in &manifest.inputs {
        let _ = writeln!(out, "input: {} sha256={}", input.path, input.sha256);
    }
    for name in ["modes.txt", "diagnostics.txt", "fractions.txt"] {
        let path = run_dir.join(name);
        if path.exists() {
            let text =
                std::fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
            let _ = writeln!(out, "--- {name} ---");
            out.push_str(&text);
        }
    }
    let _ = writeln!(out, "--- files ---");
    for f in &manifest.files {
        let _ = writeln!(out, "{f}");
    }
    Ok(out)
}

/// Loads a config either from a plain config file or from a run manifest
/// (re-execution path).
pub fn load_config_or_manifest(path: &Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    if text.contains("[tool]") {
        let manifest = load_manifest(path)?;
        Ok(manifest.config)
    } else {
        RunConfig::load(path)
    }
}
