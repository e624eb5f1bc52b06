//! Momentum-resolved energy-loss maps and spectra.
//!
//! The real-space route evaluates
//! Γ(Q_f, ω) = e²/(4π³v²) Σ_n g_n(ω) |∫d²R ψ_i(R) e^{−iQ_f·R} w_n(R)|²,
//! caching the ω-independent mode transforms; the momentum route squares the
//! forward-scattered amplitudes. Both agree by construction of the transfer
//! amplitudes, which the consistency suite verifies numerically.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::grid::RealSpaceMap;
use crate::modes::{transfer_from_profile, ModeBasis};
use crate::shaper::FinalState;
use crate::units::E_SQUARED;

/// Γ evaluator for one incident profile on a fixed set of Q_f points; the
/// expensive mode transforms are computed once and reused across ω.
pub struct EelsEvaluator {
    basis: ModeBasis,
    q_points: Vec<[f64; 2]>,
    /// F_n(Q_f) = ∫ ψ(R) e^{−iQ_f·R} w_n(R) d²R, per mode.
    mode_transforms: Vec<Vec<Complex64>>,
    /// ∫ |ψ|² |w_n|² d²R, per mode.
    overlaps: Vec<f64>,
}

impl EelsEvaluator {
    /// Builds the evaluator from a rendered incident profile. The rendering
    /// must Nyquist-cover the largest |Q_f| requested.
    pub fn new(psi: &RealSpaceMap, basis: &ModeBasis, q_points: Vec<[f64; 2]>) -> Result<Self> {
        let n = psi.spec.n;
        let da = psi.spec.spacing() * psi.spec.spacing();
        let mut mode_transforms = Vec::with_capacity(basis.len());
        let mut overlaps = Vec::with_capacity(basis.len());
        for mode in 0..basis.len() {
            let w_map = basis.w_map(mode, psi.spec);
            let mut product = RealSpaceMap {
                spec: psi.spec,
                values: vec![Complex64::ZERO; n * n],
            };
            let mut overlap = 0.0;
            for (k, slot) in product.values.iter_mut().enumerate() {
                *slot = psi.values[k] * w_map.values[k];
                overlap += slot.norm_sqr();
            }
            overlaps.push(overlap * da);
            // unit prefactor: this is the bare transform F_n
            mode_transforms.push(transfer_from_profile(&product, 1.0, &q_points)?);
        }
        Ok(Self {
            basis: basis.clone(),
            q_points,
            mode_transforms,
            overlaps,
        })
    }

    pub fn q_points(&self) -> &[[f64; 2]] {
        &self.q_points
    }

    /// Γ(Q_f, ω) over the stored Q points with the exact spectral functions.
    pub fn map_at(&self, omega: f64) -> Vec<f64> {
        self.map_with(|n| self.basis.g_exact(n, omega))
    }

    /// Γ(Q_f, ω) with Lorentzian spectral functions.
    pub fn map_at_lorentzian(&self, omega: f64) -> Vec<f64> {
        self.map_with(|n| self.basis.g_lorentzian(n, omega))
    }

    fn map_with(&self, g: impl Fn(usize) -> f64) -> Vec<f64> {
        let v = self.basis.velocity();
        let prefactor = E_SQUARED / (4.0 * PI * PI * PI * v * v);
        let mut out = vec![0.0; self.q_points.len()];
        for mode in 0..self.basis.len() {
            let gn = g(mode);
            for (slot, f) in out.iter_mut().zip(&self.mode_transforms[mode]) {
                *slot += prefactor * gn * f.norm_sqr();
            }
        }
        out
    }

    /// Per-mode map contributions at ω (exact g), for mode-filtered views.
    pub fn mode_map_at(&self, mode: usize, omega: f64) -> Vec<f64> {
        let v = self.basis.velocity();
        let prefactor = E_SQUARED / (4.0 * PI * PI * PI * v * v);
        let gn = self.basis.g_exact(mode, omega);
        self.mode_transforms[mode]
            .iter()
            .map(|f| prefactor * gn * f.norm_sqr())
            .collect()
    }

    /// Spectrum Γ(ω) integrated over a subset of the stored Q points with
    /// quadrature weight `dq` per point.
    pub fn region_spectrum(&self, omegas: &[f64], selected: &[usize], dq: f64) -> Vec<f64> {
        omegas
            .par_iter()
            .map(|&w| {
                let map = self.map_at(w);
                selected.iter().map(|&k| map[k]).sum::<f64>() * dq
            })
            .collect()
    }

    /// Angle-integrated closed form
    /// Γ(ω) = (e²/πv²) Σ_n g_n(ω) ∫|ψ|²|w_n|² d²R.
    pub fn total_closed_form(&self, omega: f64) -> f64 {
        let v = self.basis.velocity();
        let prefactor = E_SQUARED / (PI * v * v);
        (0..self.basis.len())
            .map(|n| prefactor * self.basis.g_exact(n, omega) * self.overlaps[n])
            .sum()
    }
}

/// Momentum-route map: Γ(Q_f, ω) = Σ_n |α_f(Q_f, n)|² g_n(ω) / G_n, the
/// scattered amplitudes Lorentzian-broadened into a spectral density.
pub fn map_from_final_state(state: &FinalState, basis: &ModeBasis, omega: f64) -> Vec<f64> {
    let n_pix = state.grid.len();
    let mut out = vec![0.0; n_pix];
    for mode in 0..basis.len() {
        let factor = basis.g_exact(mode, omega) / basis.weight(mode);
        for (slot, a) in out.iter_mut().zip(&state.amplitudes[mode]) {
            *slot += a.norm_sqr() * factor;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bem::{drude_dress, eigensolve, DrudeParams};
    use crate::grid::{wavefunction_to_realspace, ComplexField, PixelGrid, RealGridSpec};
    use crate::mesh::build_triangle_mesh;
    use crate::shaper::{forward_scatter, TransferMatrixSampled};
    use crate::units::BeamConfig;
    use std::sync::Arc;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((*seed >> 33) as f64) / (u32::MAX as f64) - 0.5
    }

    struct Setup {
        basis: ModeBasis,
        alpha: ComplexField,
        psi: RealSpaceMap,
        grid_out: Arc<PixelGrid>,
    }

    fn plasmon_setup(wide_window: bool) -> Setup {
        let mesh = Arc::new(build_triangle_mesh(10.0, 2.0, 120, 0.5).unwrap());
        let raw = eigensolve(&mesh, 5).unwrap();
        let set = Arc::new(drude_dress(&raw, DrudeParams::silver()));
        let beam =
            BeamConfig::from_energy(1.0e5, 1.5e-3, 0.75e-3, 317, 13, Default::default()).unwrap();
        let basis = ModeBasis::plasmon(set, &beam);
        let grid_in = PixelGrid::disk(beam.q_max_i(), 317).unwrap();
        let grid_out = PixelGrid::disk(beam.q_max_f(), 13).unwrap();
        let mut seed = 77u64;
        let vals: Vec<Complex64> = (0..grid_in.len())
            .map(|_| Complex64::new(lcg(&mut seed), lcg(&mut seed)))
            .collect();
        let mut alpha = ComplexField::new(grid_in.clone(), vals).unwrap();
        alpha.normalize().unwrap();
        // The pixelated beam is periodic with period 2π/pitch. Comparisons
        // against the momentum route need a window spanning several w decay
        // lengths (v/ω) to account for the same periodic images that route
        // sums; window-local identities work on a single period.
        let extent = if wide_window {
            12.0 * basis.velocity() / basis.omega(0)
        } else {
            2.0 * PI / grid_in.pitch()
        };
        let dr = PI / (beam.q_max_i() + beam.q_max_f()) / 1.25;
        let spec = RealGridSpec {
            extent,
            n: (extent / dr).ceil() as usize,
        };
        let psi = wavefunction_to_realspace(&alpha, spec).unwrap();
        Setup {
            basis,
            alpha,
            psi,
            grid_out,
        }
    }

    #[test]
    fn map_is_non_negative() {
        let s = plasmon_setup(false);
        let qs: Vec<[f64; 2]> = s.grid_out.pixels().iter().map(|p| p.q).collect();
        let ev = EelsEvaluator::new(&s.psi, &s.basis, qs).unwrap();
        for &w in &[2.4, 2.9, 3.4, 3.8] {
            assert!(ev.map_at(w).iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn two_path_agreement_at_mode_energy() {
        let s = plasmon_setup(true);
        let qs: Vec<[f64; 2]> = s.grid_out.pixels().iter().map(|p| p.q).collect();
        let ev = EelsEvaluator::new(&s.psi, &s.basis, qs).unwrap();
        let transfer = TransferMatrixSampled::sample_analytic(
            &s.basis,
            s.alpha.grid().clone(),
            s.grid_out.clone(),
        );
        let state = forward_scatter(&s.alpha, &transfer).unwrap();
        let omega = s.basis.omega(0);
        let real_path = ev.map_at(omega);
        let momentum_path = map_from_final_state(&state, &s.basis, omega);
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in real_path.iter().zip(&momentum_path) {
            num += (a - b) * (a - b);
            den += a * a;
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.01, "two-path RMS deviation {rel}");
    }

    #[test]
    fn angle_integrated_matches_closed_form() {
        // compact setup: coarse incident grid (small beam period) so the
        // full-plane Q integral is affordable without aliasing
        let mesh = Arc::new(build_triangle_mesh(10.0, 2.0, 120, 0.5).unwrap());
        let raw = eigensolve(&mesh, 5).unwrap();
        let set = Arc::new(drude_dress(&raw, DrudeParams::silver()));
        let beam =
            BeamConfig::from_energy(1.0e5, 1.5e-3, 0.75e-3, 49, 13, Default::default()).unwrap();
        let basis = ModeBasis::plasmon(set, &beam);
        let grid_in = PixelGrid::disk(beam.q_max_i(), 49).unwrap();
        let mut seed = 5u64;
        let vals: Vec<Complex64> = (0..grid_in.len())
            .map(|_| Complex64::new(lcg(&mut seed), lcg(&mut seed)))
            .collect();
        let mut alpha = ComplexField::new(grid_in.clone(), vals).unwrap();
        alpha.normalize().unwrap();
        let extent = 2.0 * PI / grid_in.pitch();
        let spec = RealGridSpec {
            extent,
            n: (extent / 0.27).ceil() as usize,
        };
        let psi = wavefunction_to_realspace(&alpha, spec).unwrap();

        // Q quadrature: alias-free sampling needs dq ≤ π/extent
        let q_ext = 8.0f64;
        let dq_target = PI / extent;
        let nq = (2.0 * q_ext / dq_target).ceil() as usize;
        let dq = 2.0 * q_ext / nq as f64;
        let mut qs = Vec::with_capacity(nq * nq);
        for iy in 0..nq {
            for ix in 0..nq {
                qs.push([
                    -q_ext + (ix as f64 + 0.5) * dq,
                    -q_ext + (iy as f64 + 0.5) * dq,
                ]);
            }
        }
        let ev = EelsEvaluator::new(&psi, &basis, qs).unwrap();
        let omega = basis.omega(2);
        let map = ev.map_at(omega);
        let integral: f64 = map.iter().sum::<f64>() * dq * dq;
        let closed = ev.total_closed_form(omega);
        assert!(
            ((integral - closed) / closed).abs() < 0.01,
            "integral {integral} vs closed form {closed}"
        );
    }

    #[test]
    fn zero_field_zero_spectrum() {
        let s = plasmon_setup(false);
        let zero = RealSpaceMap {
            spec: s.psi.spec,
            values: vec![Complex64::ZERO; s.psi.values.len()],
        };
        let qs: Vec<[f64; 2]> = s.grid_out.pixels().iter().map(|p| p.q).collect();
        let ev = EelsEvaluator::new(&zero, &s.basis, qs).unwrap();
        let selected: Vec<usize> = (0..s.grid_out.len()).collect();
        let spec = ev.region_spectrum(&[2.5, 3.0, 3.5], &selected, s.grid_out.pixel_area());
        assert!(spec.iter().all(|v| *v == 0.0));
    }
}
