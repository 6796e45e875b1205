//! The semi-discrete group G = G_x × G_y and functions on it.
//!
//! G_x = ∏ Z/N_i is a finite abelian product of cyclic groups with unit-step
//! generators, G_y = Tⁿ is the flat torus with total length 2π per axis.
//! Functions are band-limited by construction and stored as Fourier
//! coefficients over the character set
//!
//!   χ_ξ(x, y) = exp(i(Σ_i 2π k_i x_i / N_i + Σ_j k_j y_j)),
//!
//! indexed by ξ = (kx, ky) with k_i ∈ {0..N_i−1} and |k_j| ≤ K.
//!
//! Measure convention used everywhere: counting measure on G_x, normalized
//! Haar measure on G_y. Sums over x, averages over y.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("invalid group spec: {0}")]
    InvalidSpec(String),
    #[error("dimension mismatch: point has ({px},{py}) components, spec has ({sx},{sy})")]
    DimensionMismatch { px: usize, py: usize, sx: usize, sy: usize },
    #[error("functions live on different group specs")]
    SpecMismatch,
    #[error("torus resolution {res} below the aliasing bound {min} (need ≥ 2K+1)")]
    ResolutionTooLow { res: usize, min: usize },
    #[error("frequency out of range for the spec")]
    FrequencyOutOfRange,
    #[error("coefficient table line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// The group G = ∏ Z/N_i × Tⁿ together with the band limit K of the
/// spectral representation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    /// Cyclic orders N_1..N_m, each ≥ 2.
    pub cyclic_orders: Vec<u32>,
    /// Torus dimension n.
    pub torus_dim: usize,
    /// Maximal absolute torus frequency per axis.
    pub band_limit: i32,
}

impl GroupSpec {
    pub fn new(cyclic_orders: Vec<u32>, torus_dim: usize, band_limit: i32) -> Result<Self, GroupError> {
        let spec = GroupSpec { cyclic_orders, torus_dim, band_limit };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GroupError> {
        if self.cyclic_orders.is_empty() && self.torus_dim == 0 {
            return Err(GroupError::InvalidSpec("need m + n ≥ 1".into()));
        }
        if let Some(&bad) = self.cyclic_orders.iter().find(|&&n| n < 2) {
            return Err(GroupError::InvalidSpec(format!("cyclic order {bad} < 2")));
        }
        if self.torus_dim >= 1 && self.band_limit < 1 {
            return Err(GroupError::InvalidSpec("band limit must be ≥ 1 when n ≥ 1".into()));
        }
        if self.band_limit < 0 {
            return Err(GroupError::InvalidSpec("band limit must be ≥ 0".into()));
        }
        Ok(())
    }

    /// Number of discrete generator directions m.
    pub fn discrete_dims(&self) -> usize {
        self.cyclic_orders.len()
    }

    /// |G_x| = ∏ N_i.
    pub fn discrete_size(&self) -> usize {
        self.cyclic_orders.iter().map(|&n| n as usize).product()
    }

    /// Number of frequencies per torus axis, 2K+1.
    pub fn torus_band(&self) -> usize {
        2 * self.band_limit as usize + 1
    }

    /// Total number of frequencies ∏N_i · (2K+1)ⁿ.
    pub fn frequency_count(&self) -> usize {
        self.discrete_size() * self.torus_band().pow(self.torus_dim as u32)
    }

    /// Canonical enumeration of all frequencies, row-major over
    /// (kx_1..kx_m, ky_1..ky_n) with kx ascending from 0 and ky ascending
    /// from −K. This order is lexicographic in the (kx, ky) tuples.
    pub fn frequencies(&self) -> Vec<Frequency> {
        let mut out = Vec::with_capacity(self.frequency_count());
        for idx in 0..self.frequency_count() {
            out.push(self.frequency_at(idx));
        }
        out
    }

    /// Index of a frequency in the canonical enumeration.
    pub fn frequency_index(&self, xi: &Frequency) -> Result<usize, GroupError> {
        if xi.kx.len() != self.discrete_dims() || xi.ky.len() != self.torus_dim {
            return Err(GroupError::FrequencyOutOfRange);
        }
        let mut idx = 0usize;
        for (i, &n) in self.cyclic_orders.iter().enumerate() {
            if xi.kx[i] >= n {
                return Err(GroupError::FrequencyOutOfRange);
            }
            idx = idx * n as usize + xi.kx[i] as usize;
        }
        let q = self.torus_band();
        for j in 0..self.torus_dim {
            if xi.ky[j].abs() > self.band_limit {
                return Err(GroupError::FrequencyOutOfRange);
            }
            idx = idx * q + (xi.ky[j] + self.band_limit) as usize;
        }
        Ok(idx)
    }

    /// Canonical index of the zero frequency (kx = 0, ky = 0). Not 0 in
    /// general: ky components enumerate from −K.
    pub fn zero_frequency_index(&self) -> usize {
        self.frequency_index(&Frequency::zero(self)).expect("zero frequency is always in range")
    }

    /// Inverse of [`frequency_index`](Self::frequency_index).
    pub fn frequency_at(&self, mut idx: usize) -> Frequency {
        let q = self.torus_band();
        let mut ky = vec![0i32; self.torus_dim];
        for j in (0..self.torus_dim).rev() {
            ky[j] = (idx % q) as i32 - self.band_limit;
            idx /= q;
        }
        let mut kx = vec![0u32; self.discrete_dims()];
        for i in (0..self.discrete_dims()).rev() {
            let n = self.cyclic_orders[i] as usize;
            kx[i] = (idx % n) as u32;
            idx /= n;
        }
        Frequency { kx, ky }
    }

    /// Uniformly random group point (counting measure on G_x, normalized
    /// Haar on the torus): the invariant law of the random walk.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupPoint {
        let x = self.cyclic_orders.iter().map(|&n| rng.gen_range(0..n)).collect();
        let y = (0..self.torus_dim).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
        GroupPoint { x, y }
    }
}

/// A point z = (x, y) ∈ G with x_i ∈ {0..N_i−1} and y_j ∈ [0, 2π).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPoint {
    pub x: Vec<u32>,
    pub y: Vec<f64>,
}

impl GroupPoint {
    pub fn new(spec: &GroupSpec, x: Vec<u32>, y: Vec<f64>) -> Result<Self, GroupError> {
        if x.len() != spec.discrete_dims() || y.len() != spec.torus_dim {
            return Err(GroupError::DimensionMismatch {
                px: x.len(),
                py: y.len(),
                sx: spec.discrete_dims(),
                sy: spec.torus_dim,
            });
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi >= spec.cyclic_orders[i] {
                return Err(GroupError::InvalidSpec(format!(
                    "x[{i}] = {xi} outside Z/{}",
                    spec.cyclic_orders[i]
                )));
            }
        }
        let y = y.into_iter().map(wrap_angle).collect();
        Ok(GroupPoint { x, y })
    }

    /// Origin (0, …, 0).
    pub fn origin(spec: &GroupSpec) -> Self {
        GroupPoint { x: vec![0; spec.discrete_dims()], y: vec![0.0; spec.torus_dim] }
    }

    /// Step by `sign` along the discrete generator `axis`, wrapping mod N.
    pub fn shift_x(&mut self, spec: &GroupSpec, axis: usize, sign: i8) {
        let n = spec.cyclic_orders[axis];
        let x = &mut self.x[axis];
        *x = if sign >= 0 { (*x + 1) % n } else { (*x + n - 1) % n };
    }

    /// Translate the torus component, wrapping into [0, 2π).
    pub fn shift_y(&mut self, axis: usize, dy: f64) {
        self.y[axis] = wrap_angle(self.y[axis] + dy);
    }
}

pub(crate) fn wrap_angle(y: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let r = y.rem_euclid(two_pi);
    if r == two_pi { 0.0 } else { r }
}

/// A character index ξ = (kx, ky).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Frequency {
    pub kx: Vec<u32>,
    pub ky: Vec<i32>,
}

impl Frequency {
    pub fn zero(spec: &GroupSpec) -> Self {
        Frequency { kx: vec![0; spec.discrete_dims()], ky: vec![0; spec.torus_dim] }
    }

    pub fn is_zero(&self) -> bool {
        self.kx.iter().all(|&k| k == 0) && self.ky.iter().all(|&k| k == 0)
    }

    /// −ξ: componentwise negation mod N_i on kx, sign flip on ky.
    pub fn negate(&self, spec: &GroupSpec) -> Self {
        let kx = self
            .kx
            .iter()
            .zip(&spec.cyclic_orders)
            .map(|(&k, &n)| if k == 0 { 0 } else { n - k })
            .collect();
        let ky = self.ky.iter().map(|&k| -k).collect();
        Frequency { kx, ky }
    }

    /// Phase of χ_ξ at z, i.e. Σ_i 2π k_i x_i / N_i + Σ_j k_j y_j.
    pub fn phase(&self, spec: &GroupSpec, z: &GroupPoint) -> f64 {
        let mut phase = 0.0;
        for i in 0..self.kx.len() {
            phase += 2.0 * PI * (self.kx[i] as f64) * (z.x[i] as f64) / (spec.cyclic_orders[i] as f64);
        }
        for j in 0..self.ky.len() {
            phase += self.ky[j] as f64 * z.y[j];
        }
        phase
    }
}

/// A band-limited function on G stored by its Fourier coefficients in the
/// canonical frequency order of the spec.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFunction {
    spec: GroupSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralFunction {
    pub fn zero(spec: GroupSpec) -> Self {
        let len = spec.frequency_count();
        SpectralFunction { spec, coeffs: vec![Complex64::ZERO; len] }
    }

    /// The single character amp·χ_ξ.
    pub fn character(spec: GroupSpec, xi: &Frequency, amp: Complex64) -> Result<Self, GroupError> {
        let mut f = SpectralFunction::zero(spec);
        f.set(xi, amp)?;
        Ok(f)
    }

    pub fn from_coeffs(spec: GroupSpec, coeffs: Vec<Complex64>) -> Result<Self, GroupError> {
        if coeffs.len() != spec.frequency_count() {
            return Err(GroupError::InvalidSpec(format!(
                "coefficient vector has {} entries, spec has {} frequencies",
                coeffs.len(),
                spec.frequency_count()
            )));
        }
        Ok(SpectralFunction { spec, coeffs })
    }

    /// Random mean-zero function with independent coefficients uniform in the
    /// complex unit square; used as generic test input.
    pub fn random_mean_zero<R: Rng + ?Sized>(spec: GroupSpec, rng: &mut R) -> Self {
        let mut f = SpectralFunction::zero(spec);
        for c in f.coeffs.iter_mut() {
            *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let zero = f.spec.zero_frequency_index();
        f.coeffs[zero] = Complex64::ZERO;
        f
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn get(&self, xi: &Frequency) -> Result<Complex64, GroupError> {
        Ok(self.coeffs[self.spec.frequency_index(xi)?])
    }

    pub fn set(&mut self, xi: &Frequency, amp: Complex64) -> Result<(), GroupError> {
        let idx = self.spec.frequency_index(xi)?;
        self.coeffs[idx] = amp;
        Ok(())
    }

    /// Iterator over (frequency, coefficient) pairs with nonzero coefficient.
    pub fn iter_nonzero(&self) -> impl Iterator<Item = (Frequency, Complex64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != Complex64::ZERO)
            .map(|(i, c)| (self.spec.frequency_at(i), *c))
    }

    /// True when the coefficients are Hermitian-symmetric,
    /// coeff(−ξ) = conj(coeff(ξ)), i.e. the function is real-valued.
    pub fn is_real_valued(&self, tol: f64) -> bool {
        (0..self.coeffs.len()).all(|idx| {
            let neg = self
                .spec
                .frequency_index(&self.spec.frequency_at(idx).negate(&self.spec))
                .expect("negated frequency stays in range");
            (self.coeffs[idx] - self.coeffs[neg].conj()).norm() <= tol
        })
    }

    /// Mean-zero test: coefficient at the zero frequency vanishes.
    pub fn is_mean_zero(&self) -> bool {
        self.coeffs[self.spec.zero_frequency_index()] == Complex64::ZERO
    }

    pub fn scale(&mut self, s: Complex64) {
        for c in self.coeffs.iter_mut() {
            *c *= s;
        }
    }
}

/// Zero out the coefficient at the zero frequency; all others unchanged.
pub fn project_mean_zero(f: &SpectralFunction) -> SpectralFunction {
    let mut out = f.clone();
    let zero = out.spec.zero_frequency_index();
    out.coeffs[zero] = Complex64::ZERO;
    out
}

/// Linear combination a·f + b·g.
pub fn linear_combination(
    a: Complex64,
    f: &SpectralFunction,
    b: Complex64,
    g: &SpectralFunction,
) -> Result<SpectralFunction, GroupError> {
    if f.spec != g.spec {
        return Err(GroupError::SpecMismatch);
    }
    let coeffs = f
        .coeffs
        .iter()
        .zip(&g.coeffs)
        .map(|(cf, cg)| a * cf + b * cg)
        .collect();
    Ok(SpectralFunction { spec: f.spec.clone(), coeffs })
}

/// Point evaluation Σ_ξ coeff(ξ)·χ_ξ(z). Exact: the representation is
/// band-limited, no interpolation is involved.
pub fn evaluate(f: &SpectralFunction, z: &GroupPoint) -> Result<Complex64, GroupError> {
    let spec = &f.spec;
    if z.x.len() != spec.discrete_dims() || z.y.len() != spec.torus_dim {
        return Err(GroupError::DimensionMismatch {
            px: z.x.len(),
            py: z.y.len(),
            sx: spec.discrete_dims(),
            sy: spec.torus_dim,
        });
    }
    let mut acc = Complex64::ZERO;
    for (idx, c) in f.coeffs.iter().enumerate() {
        if *c == Complex64::ZERO {
            continue;
        }
        let xi = spec.frequency_at(idx);
        acc += c * Complex64::from_polar(1.0, xi.phase(spec, z));
    }
    Ok(acc)
}

/// Hermitian spectral inner product ⟨f,g⟩ = ∫ f·conj(g) dμ with counting
/// measure on G_x and normalized Haar on the torus:
/// ⟨f,g⟩ = ∏N_i · Σ_ξ coeff_f(ξ)·conj(coeff_g(ξ)).
///
/// Every pairing in the crate goes through this routine or
/// [`pairing_bilinear`]; the measure factor lives in exactly one place.
pub fn inner_product(f: &SpectralFunction, g: &SpectralFunction) -> Result<Complex64, GroupError> {
    if f.spec != g.spec {
        return Err(GroupError::SpecMismatch);
    }
    let sum: Complex64 = f.coeffs.iter().zip(&g.coeffs).map(|(a, b)| a * b.conj()).sum();
    Ok(sum * f.spec.discrete_size() as f64)
}

/// Bilinear pairing (f,g) = ∫ f·g dμ (no conjugation), the form the
/// stochastic representation estimates:
/// (f,g) = ∏N_i · Σ_ξ coeff_f(ξ)·coeff_g(−ξ).
pub fn pairing_bilinear(f: &SpectralFunction, g: &SpectralFunction) -> Result<Complex64, GroupError> {
    if f.spec != g.spec {
        return Err(GroupError::SpecMismatch);
    }
    let spec = &f.spec;
    let mut sum = Complex64::ZERO;
    for (idx, cf) in f.coeffs.iter().enumerate() {
        if *cf == Complex64::ZERO {
            continue;
        }
        let neg = spec
            .frequency_index(&spec.frequency_at(idx).negate(spec))
            .expect("negated frequency stays in range");
        sum += cf * g.coeffs[neg];
    }
    Ok(sum * spec.discrete_size() as f64)
}

/// L² norm √⟨f,f⟩.
pub fn l2_norm(f: &SpectralFunction) -> f64 {
    let sum: f64 = f.coeffs.iter().map(|c| c.norm_sqr()).sum();
    (sum * f.spec.discrete_size() as f64).sqrt()
}

// ---------------------------------------------------------------------------
// Product grid
// ---------------------------------------------------------------------------

/// Shape of the evaluation grid: all of G_x crossed with a uniform torus grid
/// of `torus_res` points per axis (y_g = 2π g / torus_res).
#[derive(Debug, Clone)]
pub struct GridLayout {
    pub dims: Vec<usize>,
    pub torus_res: usize,
    m: usize,
}

impl GridLayout {
    pub fn new(spec: &GroupSpec, torus_res: usize) -> Result<Self, GroupError> {
        let min = spec.torus_band();
        if spec.torus_dim > 0 && torus_res < min {
            return Err(GroupError::ResolutionTooLow { res: torus_res, min });
        }
        let mut dims: Vec<usize> = spec.cyclic_orders.iter().map(|&n| n as usize).collect();
        dims.extend(std::iter::repeat(torus_res).take(spec.torus_dim));
        Ok(GridLayout { dims, torus_res, m: spec.discrete_dims() })
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid point for a row-major index over (x_1..x_m, y_1..y_n).
    pub fn point(&self, mut idx: usize) -> GroupPoint {
        let mut coords = vec![0usize; self.dims.len()];
        for a in (0..self.dims.len()).rev() {
            coords[a] = idx % self.dims[a];
            idx /= self.dims[a];
        }
        let x = coords[..self.m].iter().map(|&c| c as u32).collect();
        let y = coords[self.m..]
            .iter()
            .map(|&c| 2.0 * PI * c as f64 / self.torus_res as f64)
            .collect();
        GroupPoint { x, y }
    }
}

/// Apply `mat` (rows × cols) along `axis` of a row-major tensor with the
/// given dims; the axis length changes from cols to mat.nrows().
fn apply_along_axis(
    data: &[Complex64],
    dims: &[usize],
    axis: usize,
    mat_rows: usize,
    mat: &[Complex64],
) -> (Vec<Complex64>, Vec<usize>) {
    let cols = dims[axis];
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let mut new_dims = dims.to_vec();
    new_dims[axis] = mat_rows;
    let mut out = vec![Complex64::ZERO; outer * mat_rows * inner];
    for o in 0..outer {
        let in_base = o * cols * inner;
        let out_base = o * mat_rows * inner;
        for r in 0..mat_rows {
            let row = &mat[r * cols..(r + 1) * cols];
            let dst = out_base + r * inner;
            for (c, w) in row.iter().enumerate() {
                if *w == Complex64::ZERO {
                    continue;
                }
                let src = in_base + c * inner;
                for k in 0..inner {
                    out[dst + k] += w * data[src + k];
                }
            }
        }
    }
    (out, new_dims)
}

fn synthesis_matrices(spec: &GroupSpec, torus_res: usize) -> Vec<(usize, usize, Vec<Complex64>)> {
    // One factor per axis: entry [point, frequency] = character value.
    let mut mats = Vec::new();
    for &n in &spec.cyclic_orders {
        let n = n as usize;
        let mut m = vec![Complex64::ZERO; n * n];
        for x in 0..n {
            for k in 0..n {
                m[x * n + k] = Complex64::from_polar(1.0, 2.0 * PI * (k * x % n) as f64 / n as f64);
            }
        }
        mats.push((n, n, m));
    }
    let q = spec.torus_band();
    for _ in 0..spec.torus_dim {
        let mut m = vec![Complex64::ZERO; torus_res * q];
        for g in 0..torus_res {
            let y = 2.0 * PI * g as f64 / torus_res as f64;
            for (col, k) in (-spec.band_limit..=spec.band_limit).enumerate() {
                m[g * q + col] = Complex64::from_polar(1.0, k as f64 * y);
            }
        }
        mats.push((torus_res, q, m));
    }
    mats
}

/// Values of f on the full product grid (all x ∈ G_x) × (uniform torus grid),
/// row-major over (x_1..x_m, y_1..y_n). Requires torus_res ≥ 2K+1.
pub fn grid_samples(f: &SpectralFunction, torus_res: usize) -> Result<Vec<Complex64>, GroupError> {
    let spec = &f.spec;
    let layout = GridLayout::new(spec, torus_res)?;
    let mut data = f.coeffs.clone();
    let mut dims: Vec<usize> = spec.cyclic_orders.iter().map(|&n| n as usize).collect();
    dims.extend(std::iter::repeat(spec.torus_band()).take(spec.torus_dim));
    if dims.is_empty() {
        return Ok(data);
    }
    for (axis, (rows, _cols, mat)) in synthesis_matrices(spec, torus_res).into_iter().enumerate() {
        let (next, next_dims) = apply_along_axis(&data, &dims, axis, rows, &mat);
        data = next;
        dims = next_dims;
    }
    debug_assert_eq!(data.len(), layout.len());
    Ok(data)
}

/// Band coefficients of a grid function (the L²-orthogonal projection of its
/// trigonometric interpolant onto the band). Exact inverse of
/// [`grid_samples`] for band-limited data when torus_res ≥ 2K+1.
pub fn grid_to_coeffs(
    spec: &GroupSpec,
    torus_res: usize,
    values: &[Complex64],
) -> Result<SpectralFunction, GroupError> {
    let layout = GridLayout::new(spec, torus_res)?;
    if values.len() != layout.len() {
        return Err(GroupError::InvalidSpec(format!(
            "grid data has {} entries, layout has {}",
            values.len(),
            layout.len()
        )));
    }
    let mut data = values.to_vec();
    let mut dims = layout.dims.clone();
    for (axis, (rows, cols, mat)) in synthesis_matrices(spec, torus_res).into_iter().enumerate() {
        // Analysis matrix = (1/rows)·matᴴ, shape cols × rows.
        let mut inv = vec![Complex64::ZERO; cols * rows];
        for r in 0..rows {
            for c in 0..cols {
                inv[c * rows + r] = mat[r * cols + c].conj() / rows as f64;
            }
        }
        let (next, next_dims) = apply_along_axis(&data, &dims, axis, cols, &inv);
        data = next;
        dims = next_dims;
    }
    SpectralFunction::from_coeffs(spec.clone(), data)
}

// ---------------------------------------------------------------------------
// Coefficient table import/export: one line per frequency "kx…;ky…;re;im"
// with comma-separated integer lists (empty when m = 0 or n = 0).
// ---------------------------------------------------------------------------

pub fn write_coeff_table<W: Write>(f: &SpectralFunction, w: &mut W) -> Result<(), GroupError> {
    let mut lines = BTreeMap::new();
    for (xi, c) in f.iter_nonzero() {
        let mut line = String::new();
        let kx: Vec<String> = xi.kx.iter().map(|k| k.to_string()).collect();
        let ky: Vec<String> = xi.ky.iter().map(|k| k.to_string()).collect();
        let _ = write!(line, "{};{};{};{}", kx.join(","), ky.join(","), c.re, c.im);
        lines.insert(f.spec.frequency_index(&xi)?, line);
    }
    for line in lines.values() {
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_coeff_table<R: BufRead>(spec: GroupSpec, r: R) -> Result<SpectralFunction, GroupError> {
    let mut f = SpectralFunction::zero(spec);
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line_idx = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split(';').collect();
        if parts.len() != 4 {
            return Err(GroupError::Parse {
                line: line_idx,
                msg: format!("expected 4 ';'-separated fields, got {}", parts.len()),
            });
        }
        let parse_list = |s: &str, what: &str| -> Result<Vec<i64>, GroupError> {
            if s.trim().is_empty() {
                return Ok(Vec::new());
            }
            s.split(',')
                .map(|t| {
                    t.trim().parse::<i64>().map_err(|e| GroupError::Parse {
                        line: line_idx,
                        msg: format!("bad {what} entry {t:?}: {e}"),
                    })
                })
                .collect()
        };
        let kx_raw = parse_list(parts[0], "kx")?;
        let ky_raw = parse_list(parts[1], "ky")?;
        let re: f64 = parts[2].trim().parse().map_err(|e| GroupError::Parse {
            line: line_idx,
            msg: format!("bad re field: {e}"),
        })?;
        let im: f64 = parts[3].trim().parse().map_err(|e| GroupError::Parse {
            line: line_idx,
            msg: format!("bad im field: {e}"),
        })?;
        if kx_raw.len() != f.spec.discrete_dims() || ky_raw.len() != f.spec.torus_dim {
            return Err(GroupError::Parse {
                line: line_idx,
                msg: format!(
                    "frequency has ({}, {}) components, spec needs ({}, {})",
                    kx_raw.len(),
                    ky_raw.len(),
                    f.spec.discrete_dims(),
                    f.spec.torus_dim
                ),
            });
        }
        let kx = kx_raw
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let n = f.spec.cyclic_orders[i] as i64;
                if k < 0 || k >= n {
                    Err(GroupError::Parse { line: line_idx, msg: format!("kx[{i}] = {k} outside 0..{n}") })
                } else {
                    Ok(k as u32)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let ky = ky_raw
            .iter()
            .enumerate()
            .map(|(j, &k)| {
                if k.unsigned_abs() > f.spec.band_limit as u64 {
                    Err(GroupError::Parse {
                        line: line_idx,
                        msg: format!("ky[{j}] = {k} outside band ±{}", f.spec.band_limit),
                    })
                } else {
                    Ok(k as i32)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        f.set(&Frequency { kx, ky }, Complex64::new(re, im))?;
    }
    Ok(f)
}
