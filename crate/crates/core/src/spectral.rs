//! Differential and Riesz operators as Fourier multipliers.
//!
//! With θ_i = 2π k_i / N_i, the discrete derivatives act on characters as
//!
//!   X_i⁺ ↦ e^{iθ_i} − 1        X_i⁻ ↦ 1 − e^{−iθ_i}
//!   X_i⁰ = X_i⁺ + X_i⁻ ↦ 2i sin θ_i
//!   X_i² = X_i⁺ − X_i⁻ ↦ 2 cos θ_i − 2
//!
//! and Y_j ↦ i k_j. The Laplacian symbol is λ(ξ) = Σ_i 4 sin²(θ_i/2) + Σ_j k_j²
//! (as the symbol of −Δ_z, so λ ≥ 0 with equality only at ξ = 0). The
//! combination of second-order Riesz transforms R²_α = Σ α_i^x R_i² +
//! Σ α^y_{jk} R_j R_k is diagonal with multiplier
//!
//!   m_α(ξ) = [Σ_i α_i^x (2 cos θ_i − 2) − Σ_{jk} α^y_{jk} k_j k_k] / λ(ξ),
//!
//! set to 0 at ξ = 0: all Riesz operators implicitly act on mean-zero
//! functions.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;
use std::io::Write;
use thiserror::Error;

use crate::group::{
    evaluate, GroupError, GroupPoint, GroupSpec, Frequency, SpectralFunction,
};

pub mod oracle;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("negative heat time t = {0}")]
    NegativeTime(f64),
    #[error("coefficient matrix has ({ax}, {ay}×{ay}) blocks, spec needs ({m}, {n}×{n})")]
    AlphaShape { ax: usize, ay: usize, m: usize, n: usize },
    #[error("symbol and function live on different specs")]
    SpecMismatch,
    #[error("grid of {size} points exceeds the oracle guard of {limit}")]
    GridGuard { size: usize, limit: usize },
    #[error("the grid oracle needs an odd torus resolution, got {0}")]
    EvenResolution(usize),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// θ_i = 2π k_i / N_i for a frequency component.
#[inline]
pub fn theta(spec: &GroupSpec, xi: &Frequency, axis: usize) -> f64 {
    2.0 * PI * xi.kx[axis] as f64 / spec.cyclic_orders[axis] as f64
}

/// Symbol of −Δ_z: λ(ξ) = Σ_i 4 sin²(θ_i/2) + Σ_j k_j² ≥ 0.
pub fn laplacian_symbol(spec: &GroupSpec, xi: &Frequency) -> f64 {
    let mut lam = 0.0;
    for i in 0..spec.discrete_dims() {
        let s = (0.5 * theta(spec, xi, i)).sin();
        lam += 4.0 * s * s;
    }
    for &k in &xi.ky {
        lam += (k as f64) * (k as f64);
    }
    lam
}

/// The coefficients α = (α^x ∈ ℂ^m, α^y ∈ ℂ^{n×n}) of a combination of
/// second-order Riesz transforms, together with the block matrix
/// A_α = diag(α^x, α^x, α^y) of size (2m+n)×(2m+n).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    pub alpha_x: Vec<Complex64>,
    /// Row-major n×n block.
    pub alpha_y: Vec<Complex64>,
    n: usize,
}

impl CoefficientMatrix {
    pub fn new(alpha_x: Vec<Complex64>, alpha_y: Vec<Complex64>, n: usize) -> Result<Self, SpectralError> {
        if alpha_y.len() != n * n {
            return Err(SpectralError::AlphaShape { ax: alpha_x.len(), ay: n, m: alpha_x.len(), n });
        }
        Ok(CoefficientMatrix { alpha_x, alpha_y, n })
    }

    pub fn zero(m: usize, n: usize) -> Self {
        CoefficientMatrix { alpha_x: vec![Complex64::ZERO; m], alpha_y: vec![Complex64::ZERO; n * n], n }
    }

    /// Identity blocks: α_i^x = 1, α^y = I_n, so R²_α = Σ R_i² + Σ R_j² = −I
    /// on mean-zero functions.
    pub fn identity(m: usize, n: usize) -> Self {
        let mut a = CoefficientMatrix::zero(m, n);
        for v in a.alpha_x.iter_mut() {
            *v = Complex64::ONE;
        }
        for j in 0..n {
            a.alpha_y[j * n + j] = Complex64::ONE;
        }
        a
    }

    /// Single discrete direction e_i (the operator R_i²).
    pub fn discrete_unit(m: usize, n: usize, i: usize) -> Self {
        let mut a = CoefficientMatrix::zero(m, n);
        a.alpha_x[i] = Complex64::ONE;
        a
    }

    /// Single continuous pair e_{jk} (the operator R_j R_k).
    pub fn torus_unit(m: usize, n: usize, j: usize, k: usize) -> Self {
        let mut a = CoefficientMatrix::zero(m, n);
        a.alpha_y[j * n + k] = Complex64::ONE;
        a
    }

    /// Random complex coefficients with entries in the unit square.
    pub fn random<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Self {
        let mut a = CoefficientMatrix::zero(m, n);
        for v in a.alpha_x.iter_mut().chain(a.alpha_y.iter_mut()) {
            *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        a
    }

    /// Random real symmetric coefficients with entries in [lo, hi]; the
    /// resulting A_α is Hermitian so quadratic-form bounds a·I ≤ A_α ≤ b·I
    /// make sense.
    pub fn random_real_symmetric<R: Rng + ?Sized>(m: usize, n: usize, lo: f64, hi: f64, rng: &mut R) -> Self {
        let mut a = CoefficientMatrix::zero(m, n);
        for v in a.alpha_x.iter_mut() {
            *v = Complex64::new(rng.gen_range(lo..hi), 0.0);
        }
        for j in 0..n {
            for k in j..n {
                let v = Complex64::new(rng.gen_range(lo..hi), 0.0);
                a.alpha_y[j * n + k] = v;
                a.alpha_y[k * n + j] = v;
            }
        }
        a
    }

    pub fn torus_dim(&self) -> usize {
        self.n
    }

    pub fn discrete_dims(&self) -> usize {
        self.alpha_x.len()
    }

    pub fn alpha_y_entry(&self, j: usize, k: usize) -> Complex64 {
        self.alpha_y[j * self.n + k]
    }

    pub fn matches(&self, spec: &GroupSpec) -> Result<(), SpectralError> {
        if self.alpha_x.len() != spec.discrete_dims() || self.n != spec.torus_dim {
            return Err(SpectralError::AlphaShape {
                ax: self.alpha_x.len(),
                ay: self.n,
                m: spec.discrete_dims(),
                n: spec.torus_dim,
            });
        }
        Ok(())
    }

    /// ‖A_α‖₂ = max(|α_1^x|,…,|α_m^x|, ‖α^y‖₂) with ‖·‖₂ the spectral norm.
    pub fn norm2(&self) -> f64 {
        let mut best = self.alpha_x.iter().map(|a| a.norm()).fold(0.0, f64::max);
        if self.n > 0 {
            best = best.max(spectral_norm(&self.alpha_y, self.n));
        }
        best
    }

    /// The dense (2m+n)×(2m+n) block matrix diag(α^x, α^x, α^y).
    pub fn block_matrix(&self) -> DMatrix<Complex64> {
        let m = self.alpha_x.len();
        let size = 2 * m + self.n;
        let mut blk = DMatrix::zeros(size, size);
        for (i, &a) in self.alpha_x.iter().enumerate() {
            blk[(i, i)] = a;
            blk[(m + i, m + i)] = a;
        }
        for j in 0..self.n {
            for k in 0..self.n {
                blk[(2 * m + j, 2 * m + k)] = self.alpha_y_entry(j, k);
            }
        }
        blk
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.alpha_x.iter().chain(self.alpha_y.iter()).all(|v| v.im.abs() <= tol)
    }

    /// For real coefficients with symmetric α^y: the tightest [a, b] with
    /// a·I ≤ A_α ≤ b·I, i.e. the range of the duplicated diagonal entries
    /// joined with the spectrum of α^y.
    pub fn real_spectrum_bounds(&self, tol: f64) -> Option<(f64, f64)> {
        if !self.is_real(tol) {
            return None;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in &self.alpha_x {
            lo = lo.min(a.re);
            hi = hi.max(a.re);
        }
        if self.n > 0 {
            let mat = DMatrix::from_fn(self.n, self.n, |j, k| self.alpha_y_entry(j, k).re);
            if (&mat - mat.transpose()).abs().max() > tol {
                return None;
            }
            let eig = SymmetricEigen::new(mat);
            for &e in eig.eigenvalues.iter() {
                lo = lo.min(e);
                hi = hi.max(e);
            }
        }
        if lo.is_finite() && hi.is_finite() {
            Some((lo, hi))
        } else {
            None
        }
    }
}

/// Spectral norm of a row-major n×n complex matrix via the Hermitian
/// eigendecomposition of AᴴA.
pub fn spectral_norm(mat: &[Complex64], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let a = DMatrix::from_fn(n, n, |r, c| mat[r * n + c]);
    let gram = a.adjoint() * &a;
    let eig = SymmetricEigen::new(gram);
    eig.eigenvalues.iter().fold(0.0f64, |acc, &e| acc.max(e.max(0.0))).sqrt()
}

/// Multiplier m_α(ξ) of the combination R²_α; 0 at the zero frequency.
pub fn riesz2_multiplier(spec: &GroupSpec, alpha: &CoefficientMatrix, xi: &Frequency) -> Complex64 {
    if xi.is_zero() {
        return Complex64::ZERO;
    }
    let lam = laplacian_symbol(spec, xi);
    let mut num = Complex64::ZERO;
    for i in 0..spec.discrete_dims() {
        num += alpha.alpha_x[i] * (2.0 * theta(spec, xi, i).cos() - 2.0);
    }
    for j in 0..spec.torus_dim {
        for k in 0..spec.torus_dim {
            num -= alpha.alpha_y_entry(j, k) * (xi.ky[j] as f64) * (xi.ky[k] as f64);
        }
    }
    num / lam
}

/// The named operators realizable as Fourier multipliers here.
#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    /// Right derivative X_i⁺.
    XPlus(usize),
    /// Left derivative X_i⁻.
    XMinus(usize),
    /// X_i⁰ = X_i⁺ + X_i⁻.
    XZero(usize),
    /// X_i² = X_i⁺ − X_i⁻ = X_i⁺X_i⁻ (as an operator composition).
    XTwo(usize),
    /// Torus derivative Y_j.
    Y(usize),
    /// Δ_x.
    LaplacianX,
    /// Δ_y.
    LaplacianY,
    /// Δ_z = Δ_x + Δ_y.
    LaplacianZ,
    /// R_i⁺ = X_i⁺(−Δ_z)^{-1/2}.
    RieszPlus(usize),
    /// R_i⁻ = X_i⁻(−Δ_z)^{-1/2}.
    RieszMinus(usize),
    /// R_j = Y_j(−Δ_z)^{-1/2}.
    RieszY(usize),
    /// R_i² = R_i⁺R_i⁻.
    RieszTwo(usize),
    /// R_j R_k.
    RieszPair(usize, usize),
    /// R²_α.
    RieszAlpha(CoefficientMatrix),
    /// Heat flow P_t = e^{tΔ_z}.
    Heat(f64),
}

impl Operator {
    fn value(&self, spec: &GroupSpec, xi: &Frequency) -> Complex64 {
        let i_unit = Complex64::I;
        match self {
            Operator::XPlus(i) => Complex64::from_polar(1.0, theta(spec, xi, *i)) - 1.0,
            Operator::XMinus(i) => Complex64::ONE - Complex64::from_polar(1.0, -theta(spec, xi, *i)),
            Operator::XZero(i) => i_unit * 2.0 * theta(spec, xi, *i).sin(),
            Operator::XTwo(i) => Complex64::new(2.0 * theta(spec, xi, *i).cos() - 2.0, 0.0),
            Operator::Y(j) => i_unit * xi.ky[*j] as f64,
            Operator::LaplacianX => {
                let mut s = 0.0;
                for i in 0..spec.discrete_dims() {
                    s += 2.0 * theta(spec, xi, i).cos() - 2.0;
                }
                Complex64::new(s, 0.0)
            }
            Operator::LaplacianY => {
                let s: f64 = xi.ky.iter().map(|&k| -((k * k) as f64)).sum();
                Complex64::new(s, 0.0)
            }
            Operator::LaplacianZ => Complex64::new(-laplacian_symbol(spec, xi), 0.0),
            Operator::RieszPlus(i) => riesz_first_order(spec, xi, Operator::XPlus(*i)),
            Operator::RieszMinus(i) => riesz_first_order(spec, xi, Operator::XMinus(*i)),
            Operator::RieszY(j) => riesz_first_order(spec, xi, Operator::Y(*j)),
            Operator::RieszTwo(i) => {
                if xi.is_zero() {
                    Complex64::ZERO
                } else {
                    Complex64::new((2.0 * theta(spec, xi, *i).cos() - 2.0) / laplacian_symbol(spec, xi), 0.0)
                }
            }
            Operator::RieszPair(j, k) => {
                if xi.is_zero() {
                    Complex64::ZERO
                } else {
                    Complex64::new(
                        -(xi.ky[*j] as f64) * (xi.ky[*k] as f64) / laplacian_symbol(spec, xi),
                        0.0,
                    )
                }
            }
            Operator::RieszAlpha(alpha) => riesz2_multiplier(spec, alpha, xi),
            Operator::Heat(t) => Complex64::new((-t * laplacian_symbol(spec, xi)).exp(), 0.0),
        }
    }
}

fn riesz_first_order(spec: &GroupSpec, xi: &Frequency, derivative: Operator) -> Complex64 {
    if xi.is_zero() {
        Complex64::ZERO
    } else {
        derivative.value(spec, xi) / laplacian_symbol(spec, xi).sqrt()
    }
}

/// A per-frequency multiplier table for a named operator.
#[derive(Debug, Clone)]
pub struct Symbol {
    spec: GroupSpec,
    pub values: Vec<Complex64>,
}

impl Symbol {
    pub fn new(spec: &GroupSpec, op: &Operator) -> Self {
        let values = (0..spec.frequency_count())
            .map(|idx| op.value(spec, &spec.frequency_at(idx)))
            .collect();
        Symbol { spec: spec.clone(), values }
    }

    pub fn identity(spec: &GroupSpec) -> Self {
        Symbol { spec: spec.clone(), values: vec![Complex64::ONE; spec.frequency_count()] }
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn at(&self, xi: &Frequency) -> Result<Complex64, GroupError> {
        Ok(self.values[self.spec.frequency_index(xi)?])
    }

    /// Product symbol (operator composition; multipliers commute).
    pub fn compose(&self, other: &Symbol) -> Result<Symbol, SpectralError> {
        if self.spec != other.spec {
            return Err(SpectralError::SpecMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(Symbol { spec: self.spec.clone(), values })
    }

    /// CSV export: one row per frequency, "kx…,ky…,re,im" with the frequency
    /// tuple flattened into leading columns.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let m = self.spec.discrete_dims();
        let n = self.spec.torus_dim;
        let mut header: Vec<String> = (0..m).map(|i| format!("kx{}", i + 1)).collect();
        header.extend((0..n).map(|j| format!("ky{}", j + 1)));
        header.push("re".into());
        header.push("im".into());
        writeln!(w, "{}", header.join(","))?;
        for (idx, v) in self.values.iter().enumerate() {
            let xi = self.spec.frequency_at(idx);
            let mut row: Vec<String> = xi.kx.iter().map(|k| k.to_string()).collect();
            row.extend(xi.ky.iter().map(|k| k.to_string()));
            row.push(v.re.to_string());
            row.push(v.im.to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// coeff_out(ξ) = sym(ξ)·coeff_in(ξ).
pub fn apply_multiplier(sym: &Symbol, f: &SpectralFunction) -> Result<SpectralFunction, SpectralError> {
    if &sym.spec != f.spec() {
        return Err(SpectralError::SpecMismatch);
    }
    let coeffs = sym.values.iter().zip(f.coeffs()).map(|(s, c)| s * c).collect();
    Ok(SpectralFunction::from_coeffs(sym.spec.clone(), coeffs)?)
}

/// R²_α f via the multiplier table.
pub fn riesz2_apply(
    alpha: &CoefficientMatrix,
    f: &SpectralFunction,
) -> Result<SpectralFunction, SpectralError> {
    alpha.matches(f.spec())?;
    let sym = Symbol::new(f.spec(), &Operator::RieszAlpha(alpha.clone()));
    apply_multiplier(&sym, f)
}

/// Heat extension P_t f = e^{tΔ_z} f: coeff(ξ) ↦ e^{−tλ(ξ)}·coeff(ξ).
pub fn heat_extension(f: &SpectralFunction, t: f64) -> Result<SpectralFunction, SpectralError> {
    if t < 0.0 {
        return Err(SpectralError::NegativeTime(t));
    }
    let spec = f.spec();
    let coeffs = f
        .coeffs()
        .iter()
        .enumerate()
        .map(|(idx, c)| c * (-t * laplacian_symbol(spec, &spec.frequency_at(idx))).exp())
        .collect();
    Ok(SpectralFunction::from_coeffs(spec.clone(), coeffs)?)
}

/// The augmented gradient of P_t f at a point: the (2m+n)-vector
/// (X_1⁺P_tf, …, X_m⁺P_tf, X_1⁻P_tf, …, X_m⁻P_tf, Y_1P_tf, …, Y_nP_tf),
/// plus accessors for the rotated discrete frame (X_i², X_i⁰).
#[derive(Debug, Clone)]
pub struct AugmentedGradient {
    pub plus: Vec<Complex64>,
    pub minus: Vec<Complex64>,
    pub y: Vec<Complex64>,
}

impl AugmentedGradient {
    /// X_i² P_t f = (X_i⁺ − X_i⁻) P_t f.
    pub fn frame_x2(&self, i: usize) -> Complex64 {
        self.plus[i] - self.minus[i]
    }

    /// X_i⁰ P_t f = (X_i⁺ + X_i⁻) P_t f.
    pub fn frame_x0(&self, i: usize) -> Complex64 {
        self.plus[i] + self.minus[i]
    }

    /// Tangent-plane scalar product with the ½ weight on the 2m discrete
    /// coordinates and weight 1 on the continuous ones (conjugate-linear in
    /// `other`).
    pub fn scalar_product(&self, other: &AugmentedGradient) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for i in 0..self.plus.len() {
            acc += 0.5 * (self.plus[i] * other.plus[i].conj() + self.minus[i] * other.minus[i].conj());
        }
        for j in 0..self.y.len() {
            acc += self.y[j] * other.y[j].conj();
        }
        acc
    }
}

/// Augmented gradient of the heat extension, each component computed
/// spectrally and evaluated at z.
pub fn gradient_at(
    f: &SpectralFunction,
    t: f64,
    z: &GroupPoint,
) -> Result<AugmentedGradient, SpectralError> {
    let heated = heat_extension(f, t)?;
    let spec = heated.spec().clone();
    let m = spec.discrete_dims();
    let n = spec.torus_dim;
    let mut grad = AugmentedGradient {
        plus: Vec::with_capacity(m),
        minus: Vec::with_capacity(m),
        y: Vec::with_capacity(n),
    };
    for i in 0..m {
        let sym = Symbol::new(&spec, &Operator::XPlus(i));
        grad.plus.push(evaluate(&apply_multiplier(&sym, &heated)?, z)?);
        let sym = Symbol::new(&spec, &Operator::XMinus(i));
        grad.minus.push(evaluate(&apply_multiplier(&sym, &heated)?, z)?);
    }
    for j in 0..n {
        let sym = Symbol::new(&spec, &Operator::Y(j));
        grad.y.push(evaluate(&apply_multiplier(&sym, &heated)?, z)?);
    }
    Ok(grad)
}
