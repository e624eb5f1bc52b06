//! Transverse wave-vector pixel grids and Fourier rendering of wave functions.
//!
//! A `PixelGrid` is a square Cartesian lattice masked to the disk |Q| ≤ q_max.
//! The disk membership test runs on integer lattice coordinates, so pixel
//! lists are bit-identical for identical inputs.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One pixel of a disk grid: lattice indices and physical center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pixel {
    pub ix: i32,
    pub iy: i32,
    /// Center Q = (Qx, Qy) in nm⁻¹.
    pub q: [f64; 2],
}

/// Cartesian lattice masked to a disk in transverse wave-vector space.
#[derive(Debug, Clone)]
pub struct PixelGrid {
    q_max: f64,
    pitch: f64,
    /// Squared lattice radius of the mask (integer arithmetic).
    r2_max: i64,
    /// Lattice half-span per axis.
    half_span: i32,
    pixels: Vec<Pixel>,
    /// (ix, iy) -> pixel index over the bounding square, row-major.
    lookup: Vec<Option<u32>>,
}

impl PartialEq for PixelGrid {
    fn eq(&self, other: &Self) -> bool {
        self.q_max == other.q_max && self.pitch == other.pitch && self.r2_max == other.r2_max
    }
}

impl PixelGrid {
    /// Builds the disk grid whose masked pixel count is closest to
    /// `target_pixels`, given the disk radius `q_max` (nm⁻¹).
    pub fn disk(q_max: f64, target_pixels: usize) -> Result<Arc<Self>> {
        if !(q_max > 0.0) {
            return Err(Error::parameter(format!(
                "q_max must be positive, got {q_max}"
            )));
        }
        if target_pixels < 1 {
            return Err(Error::parameter("target_pixels must be at least 1"));
        }
        if target_pixels == 1 {
            return Ok(Arc::new(Self::from_lattice(q_max, 2.0 * q_max, 0)));
        }

        // Candidate lattice radii are the attainable i² + j² values. Scan the
        // cumulative count and keep the breakpoint closest to the target.
        let u_hi = ((target_pixels as f64) / PI).sqrt() + 3.0;
        let span = u_hi.ceil() as i64;
        let mut r2s: Vec<i64> = Vec::with_capacity(((2 * span + 1) * (2 * span + 1)) as usize);
        for iy in -span..=span {
            for ix in -span..=span {
                r2s.push(ix * ix + iy * iy);
            }
        }
        r2s.sort_unstable();
        let mut best_r2 = 0i64;
        let mut best_count = 1usize;
        let mut idx = 0usize;
        while idx < r2s.len() {
            let r2 = r2s[idx];
            while idx < r2s.len() && r2s[idx] == r2 {
                idx += 1;
            }
            let count = idx; // points with i²+j² ≤ r2
            if (count as i64 - target_pixels as i64).abs()
                < (best_count as i64 - target_pixels as i64).abs()
            {
                best_r2 = r2;
                best_count = count;
            }
            if count > 4 * target_pixels {
                break;
            }
        }
        let _ = best_count;
        let pitch = q_max / (best_r2 as f64).sqrt();
        Ok(Arc::new(Self::from_lattice(q_max, pitch, best_r2)))
    }

    /// Builds a disk grid from an explicit pitch; the mask keeps lattice
    /// points with |Q| ≤ q_max (integer radius test).
    pub fn with_pitch(q_max: f64, pitch: f64) -> Result<Arc<Self>> {
        if !(q_max > 0.0) || !(pitch > 0.0) {
            return Err(Error::parameter(format!(
                "q_max and pitch must be positive, got q_max={q_max}, pitch={pitch}"
            )));
        }
        let u = q_max / pitch;
        let r2_max = (u * u * (1.0 + 1e-12)).floor() as i64;
        Ok(Arc::new(Self::from_lattice(q_max, pitch, r2_max)))
    }

    fn from_lattice(q_max: f64, pitch: f64, r2_max: i64) -> Self {
        let half_span = (r2_max as f64).sqrt().floor() as i32;
        let side = (2 * half_span + 1) as usize;
        let mut pixels = Vec::new();
        let mut lookup = vec![None; side * side];
        for iy in -half_span..=half_span {
            for ix in -half_span..=half_span {
                if (ix as i64) * (ix as i64) + (iy as i64) * (iy as i64) <= r2_max {
                    let flat = ((iy + half_span) as usize) * side + (ix + half_span) as usize;
                    lookup[flat] = Some(pixels.len() as u32);
                    pixels.push(Pixel {
                        ix,
                        iy,
                        q: [ix as f64 * pitch, iy as f64 * pitch],
                    });
                }
            }
        }
        Self {
            q_max,
            pitch,
            r2_max,
            half_span,
            pixels,
            lookup,
        }
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    /// Pixel area ΔQ in nm⁻².
    pub fn pixel_area(&self) -> f64 {
        self.pitch * self.pitch
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[Pixel] {
        &self.pixels
    }

    pub fn half_span(&self) -> i32 {
        self.half_span
    }

    /// Pixel index at lattice coordinates, if inside the disk.
    pub fn index_of(&self, ix: i32, iy: i32) -> Option<usize> {
        if ix.abs() > self.half_span || iy.abs() > self.half_span {
            return None;
        }
        let side = (2 * self.half_span + 1) as usize;
        let flat = ((iy + self.half_span) as usize) * side + (ix + self.half_span) as usize;
        self.lookup[flat].map(|v| v as usize)
    }

    /// Pixel containing the point `q`, if any (nearest lattice site).
    pub fn pixel_containing(&self, q: [f64; 2]) -> Option<usize> {
        let ix = (q[0] / self.pitch).round() as i32;
        let iy = (q[1] / self.pitch).round() as i32;
        self.index_of(ix, iy)
    }
}

/// Complex amplitudes attached to the pixels of one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Arc<PixelGrid>,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: Arc<PixelGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![Complex64::ZERO; n],
        }
    }

    pub fn new(grid: Arc<PixelGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::dimension(format!(
                "field has {} amplitudes but grid has {} pixels",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Arc<PixelGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Σ |α|² ΔQ.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.pixel_area()
    }

    /// Rescales so that Σ |α|² ΔQ = 1. Errors on an all-zero field.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sq();
        if n <= 0.0 {
            return Err(Error::numeric("cannot normalize a zero field"));
        }
        let scale = 1.0 / n.sqrt();
        for v in &mut self.values {
            *v *= scale;
        }
        Ok(())
    }
}

/// Sampling specification for real-space renderings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealGridSpec {
    /// Full extent L (nm); samples cover [-L/2, L/2] per axis.
    pub extent: f64,
    /// Samples per axis.
    pub n: usize,
}

impl RealGridSpec {
    /// Default rendering window for a grid: one Fourier period 2π/pitch at
    /// four samples per Nyquist interval of q_max.
    pub fn for_grid(grid: &PixelGrid) -> Self {
        let extent = 2.0 * PI / grid.pitch();
        let dr = PI / grid.q_max() / 4.0;
        let n = (extent / dr).ceil() as usize;
        Self { extent, n }
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.n as f64
    }

    /// Midpoint sample coordinate along one axis.
    pub fn coord(&self, m: usize) -> f64 {
        -0.5 * self.extent + (m as f64 + 0.5) * self.spacing()
    }
}

/// ψ(R) sampled on a square real-space grid.
#[derive(Debug, Clone)]
pub struct RealSpaceMap {
    pub spec: RealGridSpec,
    /// Row-major: values[iy * n + ix].
    pub values: Vec<Complex64>,
}

impl RealSpaceMap {
    pub fn value(&self, ix: usize, iy: usize) -> Complex64 {
        self.values[iy * self.spec.n + ix]
    }

    /// ∫ |ψ|² d²R by the midpoint rule.
    pub fn norm_sq(&self) -> f64 {
        let da = self.spec.spacing() * self.spec.spacing();
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * da
    }
}

/// Renders ψ(R) = (1/2π) Σ α(Q) e^{iQ·R} ΔQ on the requested grid.
pub fn wavefunction_to_realspace(field: &ComplexField, spec: RealGridSpec) -> Result<RealSpaceMap> {
    let q_max = field.grid().q_max();
    if spec.spacing() > PI / q_max {
        return Err(Error::resolution(format!(
            "real-space spacing {} nm exceeds the Nyquist bound {} nm for q_max = {} nm⁻¹",
            spec.spacing(),
            PI / q_max,
            q_max
        )));
    }
    let da = field.grid().pixel_area();
    let pixels = field.grid().pixels();
    let vals = field.values();
    let n = spec.n;
    let mut out = vec![Complex64::ZERO; n * n];
    use rayon::prelude::*;
    out.par_chunks_mut(n).enumerate().for_each(|(iy, row)| {
        let y = spec.coord(iy);
        for (ix, slot) in row.iter_mut().enumerate() {
            let x = spec.coord(ix);
            let mut acc = Complex64::ZERO;
            for (p, a) in pixels.iter().zip(vals) {
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let phase = p.q[0] * x + p.q[1] * y;
                acc += a * Complex64::new(phase.cos(), phase.sin());
            }
            *slot = acc * (da / (2.0 * PI));
        }
    });
    Ok(RealSpaceMap { spec, values: out })
}

/// Recovers momentum coefficients α(Q) = (1/2π) ∫ ψ(R) e^{-iQ·R} d²R from a
/// rendering. Exact (up to rounding) when the map spans one full period
/// 2π/pitch and satisfies the Nyquist bound.
pub fn realspace_to_wavefunction(map: &RealSpaceMap, grid: Arc<PixelGrid>) -> ComplexField {
    let n = map.spec.n;
    let da = map.spec.spacing() * map.spec.spacing();
    let mut values = vec![Complex64::ZERO; grid.len()];
    for (k, p) in grid.pixels().iter().enumerate() {
        let mut acc = Complex64::ZERO;
        for iy in 0..n {
            let y = map.spec.coord(iy);
            for ix in 0..n {
                let x = map.spec.coord(ix);
                let phase = -(p.q[0] * x + p.q[1] * y);
                acc += map.value(ix, iy) * Complex64::new(phase.cos(), phase.sin());
            }
        }
        values[k] = acc * (da / (2.0 * PI));
    }
    ComplexField { grid, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn degenerate_single_pixel() {
        let g = PixelGrid::disk(3.0, 1).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.pixels()[0].q, [0.0, 0.0]);
    }

    #[test]
    fn paper_pixel_counts_are_exact_lattice_disks() {
        // 49, 13, 29 and 1257 all match integer lattice disks exactly.
        for (target, expect) in [(49usize, 49usize), (13, 13), (29, 29), (1257, 1257)] {
            let g = PixelGrid::disk(1.0, target).unwrap();
            assert_eq!(g.len(), expect, "target {target}");
        }
    }

    #[test]
    fn target_49_within_15_percent_and_inside_disk() {
        let g = PixelGrid::disk(2.546, 49).unwrap();
        let n = g.len() as f64;
        assert!((n - 49.0).abs() / 49.0 <= 0.15);
        for p in g.pixels() {
            let r = (p.q[0] * p.q[0] + p.q[1] * p.q[1]).sqrt();
            assert!(r <= g.q_max() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn area_bound() {
        for target in [13usize, 49, 200, 1257] {
            let g = PixelGrid::disk(1.7, target).unwrap();
            let total = g.len() as f64 * g.pixel_area();
            let bound = PI * g.q_max().powi(2) * (1.0 + 2.0 * g.pitch() / g.q_max());
            assert!(total <= bound, "target {target}: {total} > {bound}");
        }
    }

    #[test]
    fn deterministic_pixel_lists() {
        let a = PixelGrid::disk(2.546, 1257).unwrap();
        let b = PixelGrid::disk(2.546, 1257).unwrap();
        assert_eq!(a.pixels().len(), b.pixels().len());
        for (pa, pb) in a.pixels().iter().zip(b.pixels()) {
            assert_eq!(pa.q[0].to_bits(), pb.q[0].to_bits());
            assert_eq!(pa.q[1].to_bits(), pb.q[1].to_bits());
        }
    }

    #[test]
    fn delta_input_gives_constant_plane_wave() {
        let g = PixelGrid::disk(1.0, 1).unwrap();
        let mut f = ComplexField::zeros(g.clone());
        f.values_mut()[0] = Complex64::new(1.0 / g.pixel_area(), 0.0);
        let map = wavefunction_to_realspace(
            &f,
            RealGridSpec {
                extent: 3.0,
                n: 8,
            },
        )
        .unwrap();
        for v in &map.values {
            assert_relative_eq!(v.re, 1.0 / (2.0 * PI), epsilon = 1e-12);
            assert_relative_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_disk_peaks_at_origin() {
        let g = PixelGrid::disk(2.0, 49).unwrap();
        let f = ComplexField::new(g.clone(), vec![Complex64::new(1.0, 0.0); g.len()]).unwrap();
        let spec = RealGridSpec {
            extent: 6.0,
            n: 61,
        };
        let map = wavefunction_to_realspace(&f, spec).unwrap();
        let max = map
            .values
            .iter()
            .map(|v| v.norm())
            .fold(0.0f64, f64::max);
        // the grid has no sample exactly at R = 0 (even n would); locate peak
        let mut best = (0usize, 0usize, 0.0f64);
        for iy in 0..spec.n {
            for ix in 0..spec.n {
                let v = map.value(ix, iy).norm();
                if v > best.2 {
                    best = (ix, iy, v);
                }
            }
        }
        let (ix, iy, peak) = best;
        assert_relative_eq!(peak, max);
        assert!(spec.coord(ix).abs() < 2.0 * spec.spacing());
        assert!(spec.coord(iy).abs() < 2.0 * spec.spacing());
    }

    #[test]
    fn parseval_small_grid() {
        let g = PixelGrid::disk(1.5, 9).unwrap();
        let vals: Vec<Complex64> = (0..g.len())
            .map(|k| Complex64::new(0.3 + 0.11 * k as f64, -0.2 + 0.07 * (k * k % 5) as f64))
            .collect();
        let f = ComplexField::new(g.clone(), vals).unwrap();
        let spec = RealGridSpec {
            extent: 2.0 * PI / g.pitch(),
            n: 64,
        };
        let map = wavefunction_to_realspace(&f, spec).unwrap();
        assert_relative_eq!(map.norm_sq(), f.norm_sq(), max_relative = 1e-6);
    }

    #[test]
    fn forward_then_inverse_roundtrip() {
        let g = PixelGrid::disk(1.1, 13).unwrap();
        let vals: Vec<Complex64> = (0..g.len())
            .map(|k| Complex64::new((k as f64 * 0.7).sin(), (k as f64 * 1.3).cos()))
            .collect();
        let f = ComplexField::new(g.clone(), vals).unwrap();
        let spec = RealGridSpec {
            extent: 2.0 * PI / g.pitch(),
            n: 48,
        };
        let map = wavefunction_to_realspace(&f, spec).unwrap();
        let back = realspace_to_wavefunction(&map, g);
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).norm() < 1e-6 * f.norm_sq().sqrt());
        }
    }

    #[test]
    fn under_resolved_rendering_rejected() {
        let g = PixelGrid::disk(5.0, 49).unwrap();
        let f = ComplexField::zeros(g);
        let bad = RealGridSpec {
            extent: 50.0,
            n: 8,
        };
        assert!(matches!(
            wavefunction_to_realspace(&f, bad),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PixelGrid::disk(-1.0, 5).is_err());
        assert!(PixelGrid::disk(1.0, 0).is_err());
    }
}
