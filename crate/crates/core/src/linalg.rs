//! Truncated-SVD pseudoinverse with optional Tikhonov filtering for the
//! complex least-squares systems produced by the shaping stage.

use ndarray::{Array1, Array2};
use ndarray_linalg::{JobSvd, SVDDC};
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LeastSquaresSolution {
    pub x: Vec<Complex64>,
    /// ‖Ax − b‖.
    pub residual_norm: f64,
    /// ‖Ax − b‖ / ‖b‖.
    pub relative_residual: f64,
    /// Number of singular values kept by the cutoff.
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// σ_max / σ_min over the retained spectrum.
    pub condition: f64,
}

/// Minimizes ‖Ax − b‖² by the truncated-SVD pseudoinverse: singular values
/// below `rel_cutoff`·σ_max are discarded, and a Tikhonov weight μ turns the
/// inverse factors 1/σ into σ/(σ²+μ).
pub fn tsvd_solve(
    a: &Array2<Complex64>,
    b: &[Complex64],
    rel_cutoff: f64,
    tikhonov_mu: f64,
) -> Result<LeastSquaresSolution> {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return Err(Error::parameter("empty system matrix"));
    }
    if b.len() != m {
        return Err(Error::dimension(format!(
            "rhs has {} entries for {} rows",
            b.len(),
            m
        )));
    }
    let (u, s, vh) = a
        .svddc(JobSvd::Some)
        .map_err(|e| Error::numeric(format!("SVD failed: {e}")))?;
    let u = u.expect("left singular vectors requested");
    let vh = vh.expect("right singular vectors requested");

    let sigma_max = s.iter().cloned().fold(0.0f64, f64::max);
    if sigma_max <= 0.0 {
        return Err(Error::numeric("system matrix is identically zero"));
    }
    let cutoff = rel_cutoff * sigma_max;
    let b_vec = Array1::from_vec(b.to_vec());

    let mut rank = 0usize;
    let mut sigma_min_kept = f64::MAX;
    let mut x = Array1::<Complex64>::zeros(n);
    for (k, &sigma) in s.iter().enumerate() {
        if sigma < cutoff {
            continue;
        }
        rank += 1;
        sigma_min_kept = sigma_min_kept.min(sigma);
        // ⟨u_k, b⟩ with the conjugated left vector
        let mut proj = Complex64::ZERO;
        for i in 0..m {
            proj += u[(i, k)].conj() * b_vec[i];
        }
        let factor = sigma / (sigma * sigma + tikhonov_mu);
        for j in 0..n {
            x[j] += vh[(k, j)].conj() * (proj * factor);
        }
    }
    if rank == 0 {
        return Err(Error::numeric(format!(
            "degenerate system: all singular values fall below {cutoff:.3e}"
        )));
    }

    let ax = a.dot(&x);
    let residual_norm = (&ax - &b_vec)
        .iter()
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let b_norm = b_vec.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();

    Ok(LeastSquaresSolution {
        x: x.to_vec(),
        residual_norm,
        relative_residual: if b_norm > 0.0 {
            residual_norm / b_norm
        } else {
            0.0
        },
        rank,
        singular_values: s.to_vec(),
        condition: sigma_max / sigma_min_kept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray_linalg::Solve;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Deterministic pseudo-random complex numbers for test fixtures.
    fn lcg_complex(seed: &mut u64) -> Complex64 {
        let mut next = || {
            *seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((*seed >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        c(next(), next())
    }

    #[test]
    fn identity_system_returns_rhs() {
        let mut a = Array2::zeros((4, 4));
        for i in 0..4 {
            a[(i, i)] = c(1.0, 0.0);
        }
        let b: Vec<Complex64> = (0..4).map(|k| c(k as f64, -1.0)).collect();
        let sol = tsvd_solve(&a, &b, 1e-8, 0.0).unwrap();
        for (x, want) in sol.x.iter().zip(&b) {
            assert!((x - want).norm() < 1e-12);
        }
        assert_eq!(sol.rank, 4);
        assert!(sol.relative_residual < 1e-12);
    }

    #[test]
    fn rhs_in_range_gives_tiny_residual() {
        let mut seed = 7u64;
        let mut a = Array2::zeros((24, 10));
        for i in 0..24 {
            for j in 0..10 {
                a[(i, j)] = lcg_complex(&mut seed);
            }
        }
        // b = A·y lies in the range of A
        let y: Vec<Complex64> = (0..10).map(|_| lcg_complex(&mut seed)).collect();
        let b: Vec<Complex64> = (0..24)
            .map(|i| (0..10).map(|j| a[(i, j)] * y[j]).sum())
            .collect();
        let sol = tsvd_solve(&a, &b, 1e-10, 0.0).unwrap();
        assert!(
            sol.relative_residual < 1e-8,
            "residual {}",
            sol.relative_residual
        );
    }

    #[test]
    fn matches_normal_equations_oracle() {
        let mut seed = 42u64;
        let (m, n) = (20, 10);
        let mut a = Array2::zeros((m, n));
        for i in 0..m {
            for j in 0..n {
                a[(i, j)] = lcg_complex(&mut seed);
            }
        }
        let b: Vec<Complex64> = (0..m).map(|_| lcg_complex(&mut seed)).collect();
        let sol = tsvd_solve(&a, &b, 1e-12, 0.0).unwrap();

        // independent route: solve (AᴴA) x = Aᴴ b densely
        let ah = a.t().mapv(|v| v.conj());
        let aha = ah.dot(&a);
        let ahb = ah.dot(&Array1::from_vec(b.clone()));
        let x_ne = aha.solve(&ahb).unwrap();
        for (x, want) in sol.x.iter().zip(x_ne.iter()) {
            assert!((x - want).norm() < 1e-8, "{x} vs {want}");
        }
    }

    #[test]
    fn underdetermined_solution_solves_exactly() {
        let mut seed = 3u64;
        let (m, n) = (6, 15);
        let mut a = Array2::zeros((m, n));
        for i in 0..m {
            for j in 0..n {
                a[(i, j)] = lcg_complex(&mut seed);
            }
        }
        let b: Vec<Complex64> = (0..m).map(|_| lcg_complex(&mut seed)).collect();
        let sol = tsvd_solve(&a, &b, 1e-10, 0.0).unwrap();
        assert!(sol.relative_residual < 1e-10);
        assert_eq!(sol.rank, m);
    }

    #[test]
    fn all_below_cutoff_is_degenerate() {
        let mut a = Array2::zeros((3, 3));
        a[(0, 0)] = c(1e-30, 0.0);
        let b = vec![c(1.0, 0.0); 3];
        // make the only σ fall under the (relative) cutoff
        let err = tsvd_solve(&a, &b, 2.0, 0.0).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn tikhonov_damps_small_directions() {
        let mut a = Array2::zeros((2, 2));
        a[(0, 0)] = c(1.0, 0.0);
        a[(1, 1)] = c(1e-4, 0.0);
        let b = vec![c(1.0, 0.0), c(1.0, 0.0)];
        let plain = tsvd_solve(&a, &b, 1e-8, 0.0).unwrap();
        let damped = tsvd_solve(&a, &b, 1e-8, 1e-4).unwrap();
        assert!((plain.x[1].norm() - 1e4).abs() / 1e4 < 1e-6);
        assert!(damped.x[1].norm() < plain.x[1].norm() * 0.6);
    }
}
