//! Dense-matrix oracle for R²_α on small grids.
//!
//! Builds the operator column by column from first principles: three-point
//! stencils for the discrete directions, dense spectral differentiation
//! matrices for the torus directions, and the inverse Laplacian realized as
//! the exact pseudo-inverse on the mean-zero subspace (kernel-shifted LU
//! solve with an explicit projection, not a regularized inverse).
//!
//! With torus_res = 2K+1 the grid space and the band coincide and the result
//! agrees entrywise with the multiplier route; that equivalence is the
//! regression oracle for the spectral module.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::group::{GridLayout, GroupSpec};
use crate::spectral::{riesz2_multiplier, CoefficientMatrix, SpectralError};

const GRID_GUARD: usize = 4096;

fn grid_layout(spec: &GroupSpec, torus_res: usize) -> Result<GridLayout, SpectralError> {
    if spec.torus_dim > 0 && torus_res % 2 == 0 {
        return Err(SpectralError::EvenResolution(torus_res));
    }
    let layout = GridLayout::new(spec, torus_res)?;
    if layout.len() > GRID_GUARD {
        return Err(SpectralError::GridGuard { size: layout.len(), limit: GRID_GUARD });
    }
    Ok(layout)
}

/// Lift a per-axis dense matrix to the full product grid.
fn lift_axis(dims: &[usize], axis: usize, local: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let size: usize = dims.iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let d = dims[axis];
    let mut out = DMatrix::zeros(size, size);
    for o in 0..outer {
        for r in 0..d {
            for c in 0..d {
                let v = local[(r, c)];
                if v == Complex64::ZERO {
                    continue;
                }
                for k in 0..inner {
                    let row = (o * d + r) * inner + k;
                    let col = (o * d + c) * inner + k;
                    out[(row, col)] += v;
                }
            }
        }
    }
    out
}

/// Three-point stencil f(x+1) − 2f(x) + f(x−1) on Z/N.
fn cyclic_stencil(n: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(n, n);
    for x in 0..n {
        m[(x, (x + 1) % n)] += Complex64::ONE;
        m[(x, (x + n - 1) % n)] += Complex64::ONE;
        m[(x, x)] -= Complex64::new(2.0, 0.0);
    }
    m
}

/// Spectral first-derivative matrix on q uniformly spaced torus points
/// (q odd): D = Fᴴ·diag(ik)·F with the balanced frequency range.
fn spectral_derivative(q: usize) -> DMatrix<Complex64> {
    let k_max = (q as i64 - 1) / 2;
    let mut m = DMatrix::zeros(q, q);
    for a in 0..q {
        for b in 0..q {
            let mut acc = Complex64::ZERO;
            for k in -k_max..=k_max {
                let phase = 2.0 * PI * k as f64 * (a as f64 - b as f64) / q as f64;
                acc += Complex64::new(0.0, k as f64) * Complex64::from_polar(1.0, phase);
            }
            m[(a, b)] = acc / q as f64;
        }
    }
    m
}

/// Dense matrix of R²_α acting on grid samples, built by finite differences
/// and spectral differentiation composed with the pseudo-inverse Laplacian
/// restricted to mean-zero. Guarded to grids of at most 4096 points.
pub fn brute_force_matrix(
    spec: &GroupSpec,
    alpha: &CoefficientMatrix,
    torus_res: usize,
) -> Result<DMatrix<Complex64>, SpectralError> {
    alpha.matches(spec)?;
    let layout = grid_layout(spec, torus_res)?;
    let dims = layout.dims.clone();
    let size = layout.len();
    let m = spec.discrete_dims();
    let n = spec.torus_dim;

    // Δ_z = Σ X_i² + Σ Y_j² on the grid.
    let mut lap = DMatrix::<Complex64>::zeros(size, size);
    let mut stencils = Vec::with_capacity(m);
    for i in 0..m {
        let s = lift_axis(&dims, i, &cyclic_stencil(spec.cyclic_orders[i] as usize));
        lap += &s;
        stencils.push(s);
    }
    let mut derivs = Vec::with_capacity(n);
    for j in 0..n {
        let d = lift_axis(&dims, m + j, &spectral_derivative(torus_res));
        lap += &d * &d;
        derivs.push(d);
    }

    // Numerator Σ α_i^x X_i² + Σ α_{jk}^y Y_j Y_k.
    let mut num = DMatrix::<Complex64>::zeros(size, size);
    for i in 0..m {
        num += &stencils[i] * alpha.alpha_x[i];
    }
    for j in 0..n {
        for k in 0..n {
            let a = alpha.alpha_y_entry(j, k);
            if a != Complex64::ZERO {
                num += (&derivs[j] * &derivs[k]) * a;
            }
        }
    }

    // Pseudo-inverse of −Δ_z on mean-zero: the kernel is the constants, so
    // (−Δ)⁺ = (−Δ + P₀)⁻¹(I − P₀) with P₀ = J/size.
    let p0 = DMatrix::from_element(size, size, Complex64::new(1.0 / size as f64, 0.0));
    let shifted = -&lap + &p0;
    let projector = DMatrix::<Complex64>::identity(size, size) - &p0;
    let pinv = shifted
        .lu()
        .solve(&projector)
        .expect("kernel-shifted Laplacian is invertible");

    Ok(num * pinv)
}

/// The same operator through the multiplier route: synthesis · diag(m_α) ·
/// analysis on the grid. With torus_res = 2K+1 this is the exact matrix of
/// the band-limited operator on grid space.
pub fn multiplier_matrix(
    spec: &GroupSpec,
    alpha: &CoefficientMatrix,
    torus_res: usize,
) -> Result<DMatrix<Complex64>, SpectralError> {
    alpha.matches(spec)?;
    let layout = grid_layout(spec, torus_res)?;
    let size = layout.len();
    let nf = spec.frequency_count();
    let mut synth = DMatrix::<Complex64>::zeros(size, nf);
    for g in 0..size {
        let z = layout.point(g);
        for idx in 0..nf {
            let xi = spec.frequency_at(idx);
            synth[(g, idx)] = Complex64::from_polar(1.0, xi.phase(spec, &z));
        }
    }
    let mults: Vec<Complex64> = (0..nf)
        .map(|idx| riesz2_multiplier(spec, alpha, &spec.frequency_at(idx)))
        .collect();
    let mut weighted = synth.clone();
    for idx in 0..nf {
        let mut col = weighted.column_mut(idx);
        col *= mults[idx];
    }
    Ok(weighted * synth.adjoint() / Complex64::new(size as f64, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn z2_matrix_is_negative_identity_on_mean_zero() {
        let spec = GroupSpec::new(vec![2], 0, 0).unwrap();
        let alpha = CoefficientMatrix::identity(1, 0);
        let got = brute_force_matrix(&spec, &alpha, 1).unwrap();
        // −(I − J/2)
        let expect = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(-0.5, 0.0),
                Complex64::new(0.5, 0.0),
                Complex64::new(0.5, 0.0),
                Complex64::new(-0.5, 0.0),
            ],
        );
        assert!(max_abs_diff(&got, &expect) < 1e-12);
    }

    #[test]
    fn zero_alpha_gives_zero_matrix() {
        let spec = GroupSpec::new(vec![3], 1, 1).unwrap();
        let alpha = CoefficientMatrix::zero(1, 1);
        let got = brute_force_matrix(&spec, &alpha, 3).unwrap();
        assert!(got.iter().all(|v| v.norm() < 1e-13));
    }

    #[test]
    fn oracle_matches_multiplier_on_z3_squared() {
        let spec = GroupSpec::new(vec![3, 3], 0, 0).unwrap();
        let alpha = CoefficientMatrix::discrete_unit(2, 0, 0);
        let a = brute_force_matrix(&spec, &alpha, 1).unwrap();
        let b = multiplier_matrix(&spec, &alpha, 1).unwrap();
        assert!(max_abs_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn oracle_matches_multiplier_on_mixed_group() {
        let spec = GroupSpec::new(vec![4], 1, 2).unwrap();
        let mut rng = crate::rng::test_rng(2);
        let alpha = CoefficientMatrix::random(1, 1, &mut rng);
        let res = spec.torus_band();
        let a = brute_force_matrix(&spec, &alpha, res).unwrap();
        let b = multiplier_matrix(&spec, &alpha, res).unwrap();
        assert!(max_abs_diff(&a, &b) < 1e-10);
    }

    #[test]
    fn grid_guard_enforced() {
        let spec = GroupSpec::new(vec![], 2, 40).unwrap();
        let alpha = CoefficientMatrix::zero(0, 2);
        assert!(matches!(
            brute_force_matrix(&spec, &alpha, 81),
            Err(SpectralError::GridGuard { .. })
        ));
        let spec = GroupSpec::new(vec![2], 1, 2).unwrap();
        assert!(matches!(
            brute_force_matrix(&spec, &CoefficientMatrix::zero(1, 1), 6),
            Err(SpectralError::EvenResolution(6))
        ));
    }
}
