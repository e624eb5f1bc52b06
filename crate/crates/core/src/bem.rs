//! Electrostatic boundary-element eigenmodes of homogeneous nanoparticles.
//!
//! The surface-charge eigenproblem 2πλ σ(s) = ∮ ds' F(s,s') σ(s') with
//! F(s,s') = −n̂(s)·(s−s')/|s−s'|³ is discretized by centroid collocation
//! with the row-sum closure rule Σ_j F_ij a_j = −2π fixing the singular
//! diagonal. A Drude dielectric then dresses each eigenvalue with a mode
//! energy, width and spectral weight.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Eigh, UPLO};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::SurfaceMesh;
use crate::special::bessel_k0;

/// Imaginary-part tolerance for accepting an eigenvalue as real.
const IM_LAMBDA_TOL: f64 = 1e-3;
/// Modes with |Σσa|/Σ|σ|a above this are the (unphysical) monopole.
const MONOPOLE_CHARGE_FRACTION: f64 = 0.5;
/// Energy window for degeneracy grouping, eV.
pub const DEGENERACY_TOL_EV: f64 = 1e-3;

/// Drude dielectric ε(ω) = ε_b − ω_p²/[ω(ω+iγ)], energies in eV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrudeParams {
    pub eps_b: f64,
    /// ħω_p in eV.
    pub omega_p: f64,
    /// ħγ in eV.
    pub gamma: f64,
}

impl DrudeParams {
    /// Silver parameters used throughout: ε_b = 4, ħω_p = 9.17 eV, ħγ = 21 meV.
    pub fn silver() -> Self {
        Self {
            eps_b: 4.0,
            omega_p: 9.17,
            gamma: 0.021,
        }
    }

    pub fn epsilon(&self, omega: f64) -> Complex64 {
        let w = Complex64::new(omega, 0.0);
        Complex64::new(self.eps_b, 0.0)
            - self.omega_p * self.omega_p / (w * (w + Complex64::new(0.0, self.gamma)))
    }

    /// Mode energy ħω_n = ħω_p / √(ε_b + (1−λ)/(1+λ)).
    pub fn mode_energy(&self, lambda: f64) -> f64 {
        self.omega_p / (self.eps_b + (1.0 - lambda) / (1.0 + lambda)).sqrt()
    }

    /// Spectral weight G_n = π ω_n³ / [ω_p² (1+λ)].
    pub fn mode_weight(&self, lambda: f64) -> f64 {
        let w = self.mode_energy(lambda);
        PI * w * w * w / (self.omega_p * self.omega_p * (1.0 + lambda))
    }
}

/// Raw eigenpairs (λ_n, σ_n) of the surface kernel, area-orthonormalized.
#[derive(Debug, Clone)]
pub struct SurfaceEigenmodes {
    pub mesh: Arc<SurfaceMesh>,
    pub lambdas: Vec<f64>,
    /// One surface-charge vector per mode, indexed per element.
    pub sigmas: Vec<Vec<f64>>,
    /// Largest eigen-residual ‖Kσ − λσ‖/‖λσ‖ among retained modes.
    pub max_residual: f64,
}

/// Complete plasmon mode set: eigenpairs plus Drude-derived dispersion.
#[derive(Debug, Clone)]
pub struct PlasmonModeSet {
    pub mesh: Arc<SurfaceMesh>,
    pub drude: DrudeParams,
    pub lambdas: Vec<f64>,
    pub sigmas: Vec<Vec<f64>>,
    /// ħω_n in eV.
    pub omegas: Vec<f64>,
    /// ħγ_n in eV (flat, equal to the Drude γ).
    pub gammas: Vec<f64>,
    /// Spectral weights G_n in eV.
    pub weights: Vec<f64>,
    /// Indices of modes grouped as degenerate (|ω_n − ω_m| < 1 meV chains).
    pub degenerate_groups: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
}

impl PlasmonModeSet {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Exact spectral function g_n(ω) = Im{−2/[ε(ω)(1+λ_n)+(1−λ_n)]}.
    pub fn g_exact(&self, mode: usize, omega: f64) -> f64 {
        let lam = self.lambdas[mode];
        let eps = self.drude.epsilon(omega);
        (Complex64::new(-2.0, 0.0) / (eps * (1.0 + lam) + (1.0 - lam))).im
    }

    /// Lorentzian approximation g_n(ω) ≈ Im{(G_n/π)/(ω_n − ω − iγ_n/2)}.
    pub fn g_lorentzian(&self, mode: usize, omega: f64) -> f64 {
        lorentzian_g(self.weights[mode], self.omegas[mode], self.gammas[mode], omega)
    }
}

/// Im{(G/π)/(ω_n − ω − iγ/2)}: Lorentzian of area G peaked at ω_n.
pub fn lorentzian_g(weight: f64, omega_n: f64, gamma: f64, omega: f64) -> f64 {
    let d = omega_n - omega;
    (weight / PI) * (0.5 * gamma) / (d * d + 0.25 * gamma * gamma)
}

/// Point-source kernel contribution F(s_i, p)·area.
#[inline]
fn f_point(si: [f64; 3], ni: [f64; 3], p: [f64; 3], area: f64) -> f64 {
    let d = [si[0] - p[0], si[1] - p[1], si[2] - p[2]];
    let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let r = r2.sqrt();
    -(ni[0] * d[0] + ni[1] * d[1] + ni[2] * d[2]) / (r2 * r) * area
}

/// ∫_panel F(s_i, s') ds' with adaptive 4-way subdivision: panels whose size
/// is not small against their distance to the collocation point (sharp-edge
/// neighbors, opposite faces of thin structures) are refined.
fn f_panel(si: [f64; 3], ni: [f64; 3], tri: &[[f64; 3]; 3], area: f64, depth: u32) -> f64 {
    let c = [
        (tri[0][0] + tri[1][0] + tri[2][0]) / 3.0,
        (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0,
        (tri[0][2] + tri[1][2] + tri[2][2]) / 3.0,
    ];
    let d2 = (si[0] - c[0]).powi(2) + (si[1] - c[1]).powi(2) + (si[2] - c[2]).powi(2);
    if depth == 0 || d2 > 9.0 * area {
        return f_point(si, ni, c, area);
    }
    let mid = |a: [f64; 3], b: [f64; 3]| {
        [
            0.5 * (a[0] + b[0]),
            0.5 * (a[1] + b[1]),
            0.5 * (a[2] + b[2]),
        ]
    };
    let m01 = mid(tri[0], tri[1]);
    let m12 = mid(tri[1], tri[2]);
    let m20 = mid(tri[2], tri[0]);
    let quarter = 0.25 * area;
    f_panel(si, ni, &[tri[0], m01, m20], quarter, depth - 1)
        + f_panel(si, ni, &[m01, tri[1], m12], quarter, depth - 1)
        + f_panel(si, ni, &[m20, m12, tri[2]], quarter, depth - 1)
        + f_panel(si, ni, &[m01, m12, m20], quarter, depth - 1)
}

/// Assembles the area-weighted collocation kernel K_ij = ∫_j F(s_i, s') ds'
/// with the Gauss-law closure on the diagonal, scaled by 1/2π so that the
/// eigenvalues are λ directly.
fn assemble_kernel(mesh: &SurfaceMesh) -> Array2<f64> {
    let n = mesh.len();
    let elems = &mesh.elements;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let si = elems[i].centroid;
            let ni = elems[i].normal;
            let mut row = vec![0.0f64; n];
            let mut off_diag_sum = 0.0;
            for (j, ej) in elems.iter().enumerate() {
                if i == j {
                    continue;
                }
                let val = match &ej.vertices {
                    Some(tri) => f_panel(si, ni, tri, ej.area, 4),
                    None => f_point(si, ni, ej.centroid, ej.area),
                };
                row[j] = val;
                off_diag_sum += val;
            }
            row[i] = -2.0 * PI - off_diag_sum;
            for v in &mut row {
                *v /= 2.0 * PI;
            }
            row
        })
        .collect_into_vec(&mut rows);
    let mut k = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            k[(i, j)] = v;
        }
    }
    k
}

/// Coupling score used to rank candidate modes: G_n (silver Drude) times the
/// footprint integral of |w_n|² sampled coarsely with a 100 keV reference
/// velocity. Oscillatory mesh-scale artifacts score low.
fn eels_contribution_score(mesh: &SurfaceMesh, lambda: f64, sigma: &[f64]) -> f64 {
    let drude = DrudeParams::silver();
    if lambda <= -1.0 + 1e-9 || lambda >= 1.0 - 1e-9 {
        return 0.0;
    }
    let omega = drude.mode_energy(lambda);
    let weight = drude.mode_weight(lambda);
    let velocity = 0.5482 * crate::units::HBAR_C;
    let kappa = omega / velocity;

    let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
    for e in &mesh.elements {
        for d in 0..2 {
            lo[d] = lo[d].min(e.centroid[d]);
            hi[d] = hi[d].max(e.centroid[d]);
        }
    }
    let margin = 0.25 * ((hi[0] - lo[0]) + (hi[1] - lo[1])).max(1e-3);
    let nsamp = 14;
    let mut total = 0.0;
    for iy in 0..nsamp {
        for ix in 0..nsamp {
            let x =
                lo[0] - margin + (hi[0] - lo[0] + 2.0 * margin) * (ix as f64 + 0.5) / nsamp as f64;
            let y =
                lo[1] - margin + (hi[1] - lo[1] + 2.0 * margin) * (iy as f64 + 0.5) / nsamp as f64;
            let mut wre = 0.0;
            let mut wim = 0.0;
            for (j, e) in mesh.elements.iter().enumerate() {
                let dx = x - e.centroid[0];
                let dy = y - e.centroid[1];
                let reg = e.area / PI; // squared element radius
                let dist = (dx * dx + dy * dy + reg).sqrt();
                let k0 = bessel_k0(kappa * dist).unwrap_or(0.0);
                let phase = -omega * e.centroid[2] / velocity;
                let amp = 2.0 * sigma[j] * e.area * k0;
                wre += amp * phase.cos();
                wim += amp * phase.sin();
            }
            total += wre * wre + wim * wim;
        }
    }
    weight * total
}

/// Solves the surface eigenproblem and returns the `n_modes` retained modes
/// sorted by ascending λ (ascending mode energy), area-orthonormalized.
pub fn eigensolve(mesh: &Arc<SurfaceMesh>, n_modes: usize) -> Result<SurfaceEigenmodes> {
    let n = mesh.len();
    if n_modes == 0 || n_modes > n {
        return Err(Error::parameter(format!(
            "n_modes must be in 1..={n}, got {n_modes}"
        )));
    }
    let defect = mesh.closure_defect();
    if defect > 1e-2 {
        return Err(Error::parameter(format!(
            "mesh is not closed: |Σ a·n̂|/A = {defect:.3e} exceeds 1e-2"
        )));
    }

    let kernel = assemble_kernel(mesh);
    let (eigvals, eigvecs) = kernel.eig().map_err(|e| {
        Error::numeric(format!(
            "surface eigensolver failed to converge: {e}; mesh has {n} elements"
        ))
    })?;

    let candidates = physical_candidates(mesh, &eigvals, &eigvecs);
    if candidates.len() < n_modes {
        return Err(Error::numeric(format!(
            "only {} physical eigenmodes retained, {} requested",
            candidates.len(),
            n_modes
        )));
    }

    // Rank low-energy candidates by their EELS coupling, whole λ-clusters at
    // a time so degenerate multiplets stay intact; mesh-scale edge artifacts
    // score low and drop out.
    let pool = (6 * n_modes).min(candidates.len());
    let scores: Vec<f64> = (0..pool)
        .into_par_iter()
        .map(|i| eels_contribution_score(mesh, candidates[i].0, &candidates[i].1))
        .collect();
    let clusters = cluster_by_lambda(&candidates[..pool]);
    let mut ranked: Vec<(f64, Vec<usize>)> = clusters
        .into_iter()
        .map(|members| {
            let best = members
                .iter()
                .map(|&i| scores[i])
                .fold(f64::MIN, f64::max);
            (best, members)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut keep: Vec<usize> = Vec::new();
    for (_, members) in ranked {
        if keep.len() >= n_modes {
            break;
        }
        let mut members = members;
        if keep.len() + members.len() > n_modes {
            // trim the weakest members of the straddling cluster
            members.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
            members.truncate(n_modes - keep.len());
        }
        keep.extend(members);
    }
    keep.sort_unstable();

    let mut lambdas: Vec<f64> = keep.iter().map(|&i| candidates[i].0).collect();
    let mut sigmas: Vec<Vec<f64>> = keep.iter().map(|&i| candidates[i].1.clone()).collect();
    let areas: Vec<f64> = mesh.elements.iter().map(|e| e.area).collect();

    orthonormalize_area_metric(&mut sigmas, &areas)?;
    // gauge rotations inside degenerate pairs are orthogonal, so they keep
    // the Gram identity intact
    align_degenerate_gauge(&mut lambdas, &mut sigmas, mesh);

    // eigen-residuals of the final vectors
    let mut max_residual: f64 = 0.0;
    for (lam, sigma) in lambdas.iter().zip(&sigmas) {
        let v = Array1::from_vec(sigma.clone());
        let kv = kernel.dot(&v);
        let num = (&kv - &(&v * *lam)).mapv(|x| x * x).sum().sqrt();
        let den = v.mapv(|x| x * x).sum().sqrt() * lam.abs().max(1e-6);
        max_residual = max_residual.max(num / den);
    }

    Ok(SurfaceEigenmodes {
        mesh: mesh.clone(),
        lambdas,
        sigmas,
        max_residual,
    })
}

/// Extracts real, in-range, charge-neutral eigenpairs, area-normalized and
/// sorted by ascending λ.
fn physical_candidates(
    mesh: &SurfaceMesh,
    eigvals: &Array1<Complex64>,
    eigvecs: &Array2<Complex64>,
) -> Vec<(f64, Vec<f64>)> {
    let areas: Vec<f64> = mesh.elements.iter().map(|e| e.area).collect();
    let mut candidates: Vec<(f64, Vec<f64>)> = Vec::new();
    for k in 0..eigvals.len() {
        let lam = eigvals[k];
        if lam.im.abs() > IM_LAMBDA_TOL {
            continue;
        }
        let lr = lam.re;
        if lr <= -1.0 + 1e-6 || lr >= 1.0 - 1e-6 {
            continue;
        }
        let col: Vec<Complex64> = eigvecs.column(k).to_vec();
        // rotate the global phase away and take the real part
        let (mut best_idx, mut best_mag) = (0usize, 0.0f64);
        for (i, c) in col.iter().enumerate() {
            if c.norm_sqr() > best_mag {
                best_mag = c.norm_sqr();
                best_idx = i;
            }
        }
        if best_mag == 0.0 {
            continue;
        }
        let phase = col[best_idx] / col[best_idx].norm();
        let mut sigma: Vec<f64> = col.iter().map(|c| (c / phase).re).collect();
        let norm2: f64 = sigma.iter().zip(&areas).map(|(s, a)| s * s * a).sum();
        if norm2 <= 0.0 {
            continue;
        }
        let inv = 1.0 / norm2.sqrt();
        sigma.iter_mut().for_each(|s| *s *= inv);
        let total_charge: f64 = sigma.iter().zip(&areas).map(|(s, a)| s * a).sum();
        let abs_charge: f64 = sigma.iter().zip(&areas).map(|(s, a)| s.abs() * a).sum();
        if abs_charge == 0.0 || total_charge.abs() / abs_charge > MONOPOLE_CHARGE_FRACTION {
            continue;
        }
        candidates.push((lr, sigma));
    }
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    candidates
}

/// Chains λ-sorted candidates into clusters separated by gaps > 0.008; wide
/// enough to hold a mesh-split multiplet together, narrow enough to keep
/// distinct physical modes apart.
fn cluster_by_lambda(candidates: &[(f64, Vec<f64>)]) -> Vec<Vec<usize>> {
    const GAP: f64 = 0.008;
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (i, (lam, _)) in candidates.iter().enumerate() {
        match clusters.last_mut() {
            Some(c) if (lam - candidates[*c.last().unwrap()].0).abs() < GAP => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    clusters
}

/// One-line spectrum health report for mesh diagnostics.
pub fn spectrum_summary(mesh: &Arc<SurfaceMesh>, label: &str) {
    let kernel = assemble_kernel(mesh);
    let n = mesh.len();
    let mut nan_rows = 0usize;
    let mut max_diag: f64 = 0.0;
    let mut max_absrow: f64 = 0.0;
    for i in 0..n {
        let mut absrow = 0.0;
        for j in 0..n {
            let v = kernel[(i, j)];
            if !v.is_finite() {
                nan_rows += 1;
                break;
            }
            if j != i {
                absrow += v.abs();
            }
        }
        max_diag = max_diag.max(kernel[(i, i)].abs());
        max_absrow = max_absrow.max(absrow);
    }
    eprintln!(
        "{label}: n={n} nan_rows={nan_rows} max|diag|={max_diag:.3} max off-diag abs row sum={max_absrow:.3}"
    );
    if nan_rows > 0 {
        return;
    }
    let (eigvals, eigvecs) = kernel.eig().expect("eigensolver");
    let out_of_band = eigvals
        .iter()
        .filter(|l| l.im.abs() < 1e-6 && (l.re < -1.0 - 1e-6 || l.re > 1.0 + 1e-6))
        .count();
    let min_re = eigvals.iter().map(|l| l.re).fold(f64::MAX, f64::min);
    // inspect the most negative eigenvector
    let mut kmin = 0;
    for k in 0..n {
        if eigvals[k].re < eigvals[kmin].re {
            kmin = k;
        }
    }
    let col = eigvecs.column(kmin);
    let mut weights: Vec<(f64, usize)> = (0..n)
        .map(|j| (col[j].norm_sqr() * mesh.elements[j].area, j))
        .collect();
    weights.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    eprintln!("  out_of_band={out_of_band} min_re={min_re:.3}; worst vector top elements:");
    for (w, j) in weights.iter().take(5) {
        let e = &mesh.elements[j.to_owned()];
        eprintln!(
            "    w={:.3} at ({:+.2},{:+.2},{:+.2}) area={:.4} normal=({:+.2},{:+.2},{:+.2})",
            w / weights[0].0,
            e.centroid[0],
            e.centroid[1],
            e.centroid[2],
            e.area,
            e.normal[0],
            e.normal[1],
            e.normal[2]
        );
    }
    let candidates = physical_candidates(mesh, &eigvals, &eigvecs);
    let low: Vec<f64> = candidates.iter().take(8).map(|c| c.0).collect();
    eprintln!(
        "  lowest_candidates={:?}",
        low.iter().map(|l| (l * 1000.0).round() / 1000.0).collect::<Vec<_>>()
    );
}

/// Prints the low-λ candidate table (λ, silver-Drude energy, coupling score)
/// for mesh diagnostics.
pub fn debug_spectrum(mesh: &Arc<SurfaceMesh>, count: usize) {
    let kernel = assemble_kernel(mesh);
    let (eigvals, eigvecs) = kernel.eig().expect("eigensolver");
    let mut order: Vec<usize> = (0..eigvals.len()).collect();
    order.sort_by(|&a, &b| eigvals[a].re.partial_cmp(&eigvals[b].re).unwrap());
    eprintln!("raw eigenvalues (lowest Re), with |σ|²a-weighted location:");
    for &k in order.iter().take(count) {
        let lam = eigvals[k];
        let col = eigvecs.column(k);
        let mut wsum = 0.0;
        let mut z_mean = 0.0;
        let mut rho_mean = 0.0;
        let mut a_mean = 0.0;
        for (j, e) in mesh.elements.iter().enumerate() {
            let w = col[j].norm_sqr() * e.area;
            wsum += w;
            z_mean += w * e.centroid[2].abs();
            rho_mean += w * (e.centroid[0].powi(2) + e.centroid[1].powi(2)).sqrt();
            a_mean += w * e.area;
        }
        eprintln!(
            "  {:+.6} {:+.1e}i  |z|~{:.2} rho~{:.2} area~{:.4}",
            lam.re,
            lam.im,
            z_mean / wsum,
            rho_mean / wsum,
            a_mean / wsum
        );
    }
    let candidates = physical_candidates(mesh, &eigvals, &eigvecs);
    let drude = DrudeParams::silver();
    eprintln!("filtered candidates:");
    for (lam, sigma) in candidates.iter().take(count) {
        let score = eels_contribution_score(mesh, *lam, sigma);
        eprintln!(
            "  lambda {:+.5}  omega {:.4} eV  score {:.4e}",
            lam,
            drude.mode_energy(*lam),
            score
        );
    }
}

/// Groups indices whose energies chain within `tol` eV, ordered by energy.
pub fn group_degenerate(omegas: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..omegas.len()).collect();
    order.sort_by(|&a, &b| omegas[a].partial_cmp(&omegas[b]).unwrap());
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for idx in order {
        match groups.last_mut() {
            Some(g) if (omegas[idx] - omegas[*g.last().unwrap()]).abs() < tol => g.push(idx),
            _ => groups.push(vec![idx]),
        }
    }
    groups
}

/// In-plane multipole moment Σ_j σ_j a_j (Sx + iSy)^m.
fn multipole_moment(mesh: &SurfaceMesh, sigma: &[f64], m: u32) -> Complex64 {
    let mut acc = Complex64::ZERO;
    for (j, e) in mesh.elements.iter().enumerate() {
        let z = Complex64::new(e.centroid[0], e.centroid[1]);
        acc += sigma[j] * e.area * z.powu(m);
    }
    acc
}

/// Rotates the gauge inside each degenerate pair so that the first member is
/// odd and the second even under the mesh mirror x → −x, using the phase of
/// the pair's dominant in-plane multipole moment. An x-odd charge pattern
/// carries a purely real moment for odd m and a purely imaginary one for
/// even m, so moments are parity-adjusted before the rotation is chosen.
fn align_degenerate_gauge(lambdas: &mut [f64], sigmas: &mut [Vec<f64>], mesh: &SurfaceMesh) {
    let drude = DrudeParams::silver();
    let omegas: Vec<f64> = lambdas.iter().map(|&l| drude.mode_energy(l)).collect();
    let groups = group_degenerate(&omegas, DEGENERACY_TOL_EV);
    // scale for comparing moments of different order
    let mut r_mean = 0.0;
    let mut a_tot = 0.0;
    for e in &mesh.elements {
        r_mean += e.area * (e.centroid[0].powi(2) + e.centroid[1].powi(2)).sqrt();
        a_tot += e.area;
    }
    let r_mean = (r_mean / a_tot).max(1e-12);

    for group in groups {
        if group.len() != 2 {
            continue;
        }
        let (i, j) = (group[0], group[1]);
        let mut best = (1u32, 0.0f64);
        for m in 1..=6u32 {
            let s = (multipole_moment(mesh, &sigmas[i], m).norm_sqr()
                + multipole_moment(mesh, &sigmas[j], m).norm_sqr())
                / r_mean.powi(2 * m as i32);
            if s > best.1 {
                best = (m, s);
            }
        }
        let m = best.0;
        // parity adjustment: μ = moment for odd m, i·moment for even m
        let fix = if m % 2 == 1 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 1.0)
        };
        let mi = fix * multipole_moment(mesh, &sigmas[i], m);
        let mj = fix * multipole_moment(mesh, &sigmas[j], m);
        // choose θ with Im(cosθ·μi + sinθ·μj) = 0: member A becomes x-odd
        let theta = (-mi.im).atan2(mj.im);
        let (c, s) = (theta.cos(), theta.sin());
        let n = sigmas[i].len();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        for k in 0..n {
            a[k] = c * sigmas[i][k] + s * sigmas[j][k];
            b[k] = -s * sigmas[i][k] + c * sigmas[j][k];
        }
        let ma = fix * multipole_moment(mesh, &a, m);
        if ma.re < 0.0 {
            a.iter_mut().for_each(|v| *v = -*v);
        }
        let mb = fix * multipole_moment(mesh, &b, m);
        if mb.im < 0.0 {
            b.iter_mut().for_each(|v| *v = -*v);
        }
        sigmas[i] = a;
        sigmas[j] = b;
    }
}

/// Löwdin orthonormalization under the area inner product ⟨u,v⟩ = Σ u v a.
fn orthonormalize_area_metric(sigmas: &mut [Vec<f64>], areas: &[f64]) -> Result<()> {
    let k = sigmas.len();
    if k == 0 {
        return Ok(());
    }
    let mut gram = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            let mut s = 0.0;
            for (e, a) in areas.iter().enumerate() {
                s += sigmas[i][e] * sigmas[j][e] * a;
            }
            gram[(i, j)] = s;
        }
    }
    let (vals, vecs) = gram
        .eigh(UPLO::Lower)
        .map_err(|e| Error::numeric(format!("Gram eigendecomposition failed: {e}")))?;
    if vals.iter().any(|&v| v <= 0.0) {
        return Err(Error::numeric(
            "retained eigenvectors are numerically dependent under the area metric",
        ));
    }
    let mut inv_sqrt = Array2::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            let mut s = 0.0;
            for m in 0..k {
                s += vecs[(i, m)] * vecs[(j, m)] / vals[m].sqrt();
            }
            inv_sqrt[(i, j)] = s;
        }
    }
    let n = areas.len();
    let old: Vec<Vec<f64>> = sigmas.to_vec();
    for i in 0..k {
        for e in 0..n {
            let mut s = 0.0;
            for m in 0..k {
                s += old[m][e] * inv_sqrt[(m, i)];
            }
            sigmas[i][e] = s;
        }
    }
    Ok(())
}

/// Fills mode energies, widths and weights from the Drude model. Modes whose
/// λ falls outside (−1, 1) are discarded with a warning.
pub fn drude_dress(raw: &SurfaceEigenmodes, drude: DrudeParams) -> PlasmonModeSet {
    let mut warnings = Vec::new();
    let mut lambdas = Vec::new();
    let mut sigmas = Vec::new();
    for (lam, sig) in raw.lambdas.iter().zip(&raw.sigmas) {
        if *lam <= -1.0 || *lam >= 1.0 {
            warnings.push(format!("discarding mode with λ = {lam} outside (−1, 1)"));
            continue;
        }
        lambdas.push(*lam);
        sigmas.push(sig.clone());
    }
    let omegas: Vec<f64> = lambdas.iter().map(|&l| drude.mode_energy(l)).collect();
    let gammas = vec![drude.gamma; lambdas.len()];
    let weights: Vec<f64> = lambdas.iter().map(|&l| drude.mode_weight(l)).collect();
    let degenerate_groups = group_degenerate(&omegas, DEGENERACY_TOL_EV);
    PlasmonModeSet {
        mesh: raw.mesh.clone(),
        drude,
        lambdas,
        sigmas,
        omegas,
        gammas,
        weights,
        degenerate_groups,
        warnings,
    }
}
