//! Python bindings: the main shaping types and operations behind a thin
//! pyo3 layer. Build with `--features extension-module` and rename the
//! resulting cdylib to `eshaper_py.so` (see python/smoke_test.py).

use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use eshaper_core::bem::{drude_dress, eigensolve, DrudeParams, PlasmonModeSet};
use eshaper_core::grid::{wavefunction_to_realspace, ComplexField, PixelGrid, RealGridSpec};
use eshaper_core::mesh::{build_sphere_mesh, build_triangle_mesh, load_mesh, SurfaceMesh};
use eshaper_core::modes::ModeBasis;
use eshaper_core::shaper::{
    build_inversion_system, forward_scatter, fraction_matrix, solve_incident,
    FractionNormalization, SelectionRegion, TargetState, TransferMatrixSampled,
};
use eshaper_core::special;
use eshaper_core::units::{BeamConfig, KConvention};
use eshaper_core::vibrational::{load_vibrational, triatomic_ring_surrogate, VibrationalModeSet};
use eshaper_core::Error;

fn err(e: Error) -> PyErr {
    match e {
        Error::Parameter(_) | Error::Configuration(_) | Error::Domain(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Modified Bessel function K0.
#[pyfunction]
fn bessel_k0(x: f64) -> PyResult<f64> {
    special::bessel_k0(x).map_err(err)
}

/// Modified Bessel function K1.
#[pyfunction]
fn bessel_k1(x: f64) -> PyResult<f64> {
    special::bessel_k1(x).map_err(err)
}

/// Electron beam kinematics and aperture geometry.
#[pyclass]
#[derive(Clone)]
struct Beam {
    inner: BeamConfig,
}

#[pymethods]
impl Beam {
    #[new]
    #[pyo3(signature = (kinetic_energy_ev, phi_i_rad, phi_f_rad, pixels_i, pixels_f, relativistic=true))]
    fn new(
        kinetic_energy_ev: f64,
        phi_i_rad: f64,
        phi_f_rad: f64,
        pixels_i: usize,
        pixels_f: usize,
        relativistic: bool,
    ) -> PyResult<Self> {
        let convention = if relativistic {
            KConvention::Relativistic
        } else {
            KConvention::RestMass
        };
        BeamConfig::from_energy(
            kinetic_energy_ev,
            phi_i_rad,
            phi_f_rad,
            pixels_i,
            pixels_f,
            convention,
        )
        .map(|inner| Self { inner })
        .map_err(err)
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn wavenumber(&self) -> f64 {
        self.inner.wavenumber
    }

    #[getter]
    fn q_max_i(&self) -> f64 {
        self.inner.q_max_i()
    }

    #[getter]
    fn q_max_f(&self) -> f64 {
        self.inner.q_max_f()
    }
}

/// Cartesian lattice masked to a disk in transverse wave-vector space.
#[pyclass]
#[derive(Clone)]
struct DiskGrid {
    inner: Arc<PixelGrid>,
}

#[pymethods]
impl DiskGrid {
    #[new]
    fn new(q_max: f64, target_pixels: usize) -> PyResult<Self> {
        PixelGrid::disk(q_max, target_pixels)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn pitch(&self) -> f64 {
        self.inner.pitch()
    }

    #[getter]
    fn q_max(&self) -> f64 {
        self.inner.q_max()
    }

    /// Pixel centers as a list of (Qx, Qy).
    fn pixels(&self) -> Vec<(f64, f64)> {
        self.inner.pixels().iter().map(|p| (p.q[0], p.q[1])).collect()
    }
}

/// Triangulated particle boundary.
#[pyclass]
struct Mesh {
    inner: Arc<SurfaceMesh>,
}

#[pymethods]
impl Mesh {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn total_area(&self) -> f64 {
        self.inner.total_area()
    }

    #[getter]
    fn closure_defect(&self) -> f64 {
        self.inner.closure_defect()
    }
}

/// Corner- and rim-rounded equilateral prism surface.
#[pyfunction]
fn triangle_mesh(side: f64, thickness: f64, elements: usize, rounding: f64) -> PyResult<Mesh> {
    build_triangle_mesh(side, thickness, elements, rounding)
        .map(|m| Mesh { inner: Arc::new(m) })
        .map_err(err)
}

/// Quasi-uniform icosphere surface.
#[pyfunction]
fn sphere_mesh(radius: f64, elements: usize) -> PyResult<Mesh> {
    build_sphere_mesh(radius, elements)
        .map(|m| Mesh { inner: Arc::new(m) })
        .map_err(err)
}

/// Reads the line-based mesh text format.
#[pyfunction]
fn mesh_from_file(path: PathBuf) -> PyResult<Mesh> {
    load_mesh(&path)
        .map(|m| Mesh { inner: Arc::new(m) })
        .map_err(err)
}

/// Plasmon eigenmode set dressed with a Drude dielectric.
#[pyclass]
struct PlasmonModes {
    inner: Arc<PlasmonModeSet>,
}

#[pymethods]
impl PlasmonModes {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn lambdas(&self) -> Vec<f64> {
        self.inner.lambdas.clone()
    }

    #[getter]
    fn omegas_ev(&self) -> Vec<f64> {
        self.inner.omegas.clone()
    }

    #[getter]
    fn weights_ev(&self) -> Vec<f64> {
        self.inner.weights.clone()
    }

    #[getter]
    fn degenerate_groups(&self) -> Vec<Vec<usize>> {
        self.inner.degenerate_groups.clone()
    }
}

/// Solves the boundary-element eigenproblem and applies a Drude model
/// (default parameters describe silver).
#[pyfunction]
#[pyo3(signature = (mesh, n_modes, eps_b=4.0, homega_p_ev=9.17, hgamma_ev=0.021))]
fn solve_plasmon_modes(
    mesh: &Mesh,
    n_modes: usize,
    eps_b: f64,
    homega_p_ev: f64,
    hgamma_ev: f64,
) -> PyResult<PlasmonModes> {
    let raw = eigensolve(&mesh.inner, n_modes).map_err(err)?;
    let set = drude_dress(
        &raw,
        DrudeParams {
            eps_b,
            omega_p: homega_p_ev,
            gamma: hgamma_ev,
        },
    );
    Ok(PlasmonModes {
        inner: Arc::new(set),
    })
}

/// Vibrational mode set (file-ingested or surrogate-built).
#[pyclass]
struct VibrationalModes {
    inner: Arc<VibrationalModeSet>,
}

#[pymethods]
impl VibrationalModes {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn omegas_ev(&self) -> Vec<f64> {
        self.inner.modes.iter().map(|m| m.omega_ev).collect()
    }
}

#[pyfunction]
fn vibrational_from_file(path: PathBuf) -> PyResult<VibrationalModes> {
    load_vibrational(&path)
        .map(|s| VibrationalModes { inner: Arc::new(s) })
        .map_err(err)
}

/// Threefold-symmetric surrogate molecule with a triply-degenerate stretch
/// multiplet.
#[pyfunction]
#[pyo3(signature = (ring_radius_nm=0.25, bond_nm=0.10, homega_mev=440.0, heavy_mass_amu=14.007, light_mass_amu=1.008, charge_e=0.3))]
fn ring_surrogate(
    ring_radius_nm: f64,
    bond_nm: f64,
    homega_mev: f64,
    heavy_mass_amu: f64,
    light_mass_amu: f64,
    charge_e: f64,
) -> VibrationalModes {
    VibrationalModes {
        inner: Arc::new(triatomic_ring_surrogate(
            ring_radius_nm,
            bond_nm,
            homega_mev,
            heavy_mass_amu,
            light_mass_amu,
            charge_e,
        )),
    }
}

/// Mode basis bound to a beam velocity: profiles, spectral functions and
/// transfer amplitudes.
#[pyclass]
struct Basis {
    inner: ModeBasis,
}

#[pymethods]
impl Basis {
    #[staticmethod]
    fn plasmon(modes: &PlasmonModes, beam: &Beam) -> Basis {
        Basis {
            inner: ModeBasis::plasmon(modes.inner.clone(), &beam.inner),
        }
    }

    #[staticmethod]
    fn vibrational(modes: &VibrationalModes, beam: &Beam) -> Basis {
        Basis {
            inner: ModeBasis::vibrational(modes.inner.clone(), &beam.inner),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn omega_ev(&self, mode: usize) -> f64 {
        self.inner.omega(mode)
    }

    fn g(&self, mode: usize, omega_ev: f64) -> f64 {
        self.inner.g_exact(mode, omega_ev)
    }

    /// Spatial profile w_n(R) at a transverse position (nm).
    fn w(&self, mode: usize, x: f64, y: f64) -> Complex64 {
        self.inner.w(mode, [x, y])
    }

    /// Transfer amplitude M_n(Q) at a wave-vector difference (1/nm).
    fn m(&self, mode: usize, qx: f64, qy: f64) -> Complex64 {
        self.inner.m(mode, [qx, qy])
    }

    /// Renders ψ(R) for momentum coefficients on a grid; returns a row-major
    /// complex list of n×n samples over [-extent/2, extent/2].
    fn render_realspace(
        &self,
        grid: &DiskGrid,
        values: Vec<Complex64>,
        extent: f64,
        n: usize,
    ) -> PyResult<Vec<Complex64>> {
        let field = ComplexField::new(grid.inner.clone(), values).map_err(err)?;
        let map = wavefunction_to_realspace(&field, RealGridSpec { extent, n }).map_err(err)?;
        Ok(map.values)
    }
}

/// Sampled transfer amplitudes linking an incident grid to a detector grid.
#[pyclass]
struct Transfer {
    inner: TransferMatrixSampled,
}

#[pymethods]
impl Transfer {
    #[staticmethod]
    fn sample(basis: &Basis, grid_in: &DiskGrid, grid_out: &DiskGrid) -> Transfer {
        Transfer {
            inner: TransferMatrixSampled::sample_analytic(
                &basis.inner,
                grid_in.inner.clone(),
                grid_out.inner.clone(),
            ),
        }
    }

    /// Forward scattering: returns per-mode amplitude lists on the detector
    /// grid.
    fn forward(&self, alpha: Vec<Complex64>) -> PyResult<Vec<Vec<Complex64>>> {
        let field = ComplexField::new(self.inner.grid_in.clone(), alpha).map_err(err)?;
        let state = forward_scatter(&field, &self.inner).map_err(err)?;
        Ok(state.amplitudes)
    }

    /// Inverts for the incident field that excites `mode` uniformly over the
    /// collection disk; returns (alpha, relative_residual).
    #[pyo3(signature = (mode, svd_cutoff=1e-8, tikhonov=0.0))]
    fn shape_select(
        &self,
        mode: usize,
        svd_cutoff: f64,
        tikhonov: f64,
    ) -> PyResult<(Vec<Complex64>, f64)> {
        let system =
            build_inversion_system(&self.inner, &TargetState::SelectMode { mode }).map_err(err)?;
        let shaped = solve_incident(&system, svd_cutoff, tikhonov).map_err(err)?;
        Ok((
            shaped.field.values().to_vec(),
            shaped.solution.relative_residual,
        ))
    }

    /// Inverts for an entangled target: `pairs` maps mode index -> (Qx, Qy).
    #[pyo3(signature = (pairs, svd_cutoff=1e-8, tikhonov=0.0))]
    fn shape_entangle(
        &self,
        pairs: Vec<(usize, f64, f64)>,
        svd_cutoff: f64,
        tikhonov: f64,
    ) -> PyResult<(Vec<Complex64>, f64)> {
        let target = TargetState::Entangle {
            pairs: pairs.iter().map(|(m, qx, qy)| (*m, [*qx, *qy])).collect(),
        };
        let system = build_inversion_system(&self.inner, &target).map_err(err)?;
        let shaped = solve_incident(&system, svd_cutoff, tikhonov).map_err(err)?;
        Ok((
            shaped.field.values().to_vec(),
            shaped.solution.relative_residual,
        ))
    }

    /// Mode fractions inside disk regions [(cx, cy, radius), ...]; rows are
    /// regions, columns modes. `global` switches the normalization.
    #[pyo3(signature = (alpha, regions, global=false))]
    fn fractions(
        &self,
        alpha: Vec<Complex64>,
        regions: Vec<(f64, f64, f64)>,
        global: bool,
    ) -> PyResult<Vec<Vec<f64>>> {
        let field = ComplexField::new(self.inner.grid_in.clone(), alpha).map_err(err)?;
        let state = forward_scatter(&field, &self.inner).map_err(err)?;
        let regions: Vec<SelectionRegion> = regions
            .iter()
            .map(|(cx, cy, r)| SelectionRegion {
                center: [*cx, *cy],
                radius: *r,
            })
            .collect();
        let norm = if global {
            FractionNormalization::Global
        } else {
            FractionNormalization::PerRegion
        };
        let fm = fraction_matrix(&state, &regions, norm).map_err(err)?;
        Ok((0..fm.entries.nrows())
            .map(|j| (0..fm.entries.ncols()).map(|n| fm.entries[(j, n)]).collect())
            .collect())
    }
}

#[pymodule]
fn eshaper_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(bessel_k0, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_k1, m)?)?;
    m.add_function(wrap_pyfunction!(triangle_mesh, m)?)?;
    m.add_function(wrap_pyfunction!(sphere_mesh, m)?)?;
    m.add_function(wrap_pyfunction!(mesh_from_file, m)?)?;
    m.add_function(wrap_pyfunction!(solve_plasmon_modes, m)?)?;
    m.add_function(wrap_pyfunction!(vibrational_from_file, m)?)?;
    m.add_function(wrap_pyfunction!(ring_surrogate, m)?)?;
    m.add_class::<Beam>()?;
    m.add_class::<DiskGrid>()?;
    m.add_class::<Mesh>()?;
    m.add_class::<PlasmonModes>()?;
    m.add_class::<VibrationalModes>()?;
    m.add_class::<Basis>()?;
    m.add_class::<Transfer>()?;
    Ok(())
}
