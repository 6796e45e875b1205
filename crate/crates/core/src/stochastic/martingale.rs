//! Martingales M_t^f = P_{T−t}f(Z_t), their transforms A_α ∗ M^f, and
//! quadratic (co)variations along a sampled trajectory.
//!
//! M^f itself is evaluated exactly (spectral heat extension at every grid
//! time). Its increments are recorded in decomposed form so that transforms
//! are linear reweightings of the records:
//!
//!   jumps        ΔM = τ·(X_i^τ f)(T−t, Z_{t−}) = ½(X_i²f + τ·X_i⁰f),
//!                recorded as the frame pair (X_i²f, X_i⁰f);
//!   compensator  −(λ/2)·(X_i²P_{T−s}f)(Z) integrated exactly in time over
//!                each grid step with the position frozen at the left
//!                endpoint (exact pathwise when n = 0);
//!   continuous   (Y_j P_{T−t}f)(Z_t)·ΔY_j, Euler on the refined grid.
//!
//! Quadratic variations use the Hilbert-space (modulus-squared) convention:
//! jump increments contribute |ΔM|², the continuous part contributes
//! |∇_y f|²·2h per step (the Brownian axes have increment variance 2h).
//! The covariation of two paths is conjugate-linear in the second argument
//! and coincides with the product form for real-valued functions.
//!
//! One stepping engine drives everything through a sink: the recording sink
//! materializes the full [`MartingalePath`]; the fused sinks accumulate only
//! final values and gap minima for the Monte Carlo ensembles.

use num_complex::Complex64;

use crate::group::{GroupSpec, SpectralFunction};
use crate::spectral::{laplacian_symbol, theta, CoefficientMatrix};
use crate::stochastic::{SimConfig, StochasticError, Trajectory};

/// Frame values recorded at one jump, evaluated at (T−t, Z_{t−}).
#[derive(Debug, Clone, Copy)]
pub struct JumpRecord {
    pub grid_index: usize,
    pub axis: usize,
    pub sign: i8,
    /// (X_i² P_{T−t}f)(Z_{t−}).
    pub x2: Complex64,
    /// (X_i⁰ P_{T−t}f)(Z_{t−}).
    pub x0: Complex64,
}

impl JumpRecord {
    /// The martingale jump increment ½(X_i²f + τ·X_i⁰f) = τ·(X_i^τ f).
    #[inline]
    pub fn increment(&self) -> Complex64 {
        0.5 * (self.x2 + self.sign as f64 * self.x0)
    }
}

/// Decomposed increments of M^f along one trajectory.
#[derive(Debug, Clone)]
pub struct IncrementRecords {
    /// Step lengths h_ℓ.
    pub step_h: Vec<f64>,
    /// Brownian increments, row-major (step, axis).
    pub dy: Vec<f64>,
    /// (Y_j P_{T−t}f)(Z_t) at left endpoints, row-major (step, axis).
    pub grad_y: Vec<Complex64>,
    /// Exact-in-time compensator pieces per (step, discrete axis):
    /// −(λ/2)∫ (X_i²P_{T−s}f)(Z_left) ds over the step.
    pub comp: Vec<Complex64>,
    pub jumps: Vec<JumpRecord>,
}

/// The transformed track M^{α,f} attached to a path.
#[derive(Debug, Clone)]
pub struct TransformTrack {
    pub alpha: CoefficientMatrix,
    pub values: Vec<Complex64>,
    /// Running [M^{α,f}, M^{α,f}].
    pub qv: Vec<f64>,
}

/// Time series of M^f (and optionally M^{α,f}) over one trajectory.
#[derive(Debug, Clone)]
pub struct MartingalePath {
    pub spec: GroupSpec,
    pub times: Vec<f64>,
    /// M^f(t_ℓ), exact spectral evaluation.
    pub values: Vec<Complex64>,
    /// Running [M^f, M^f].
    pub qv: Vec<f64>,
    pub records: IncrementRecords,
    pub horizon_t: f64,
    pub lambda: f64,
    pub transform: Option<TransformTrack>,
}

impl MartingalePath {
    pub fn final_value(&self) -> Complex64 {
        *self.values.last().expect("non-empty path")
    }

    pub fn transformed_final_value(&self) -> Option<Complex64> {
        self.transform.as_ref().map(|t| *t.values.last().expect("non-empty path"))
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    fn torus_dim(&self) -> usize {
        self.spec.torus_dim
    }

    fn same_trajectory(&self, other: &MartingalePath) -> bool {
        self.times == other.times
            && self.records.jumps.len() == other.records.jumps.len()
            && self
                .records
                .jumps
                .iter()
                .zip(&other.records.jumps)
                .all(|(a, b)| a.grid_index == b.grid_index && a.axis == b.axis && a.sign == b.sign)
    }
}

// ---------------------------------------------------------------------------
// Stepping engine
// ---------------------------------------------------------------------------

/// Per-step quantities delivered to a sink; all at the step's left endpoint
/// except the jump frames, which arrive via `on_jump`.
pub(crate) struct StepContext<'a> {
    pub step: usize,
    pub h: f64,
    /// M^f(t_step); meaningful only when the sink requests values.
    pub m_value: Complex64,
    /// (Y_j P f)(Z_left) per torus axis.
    pub grad: &'a [Complex64],
    /// Compensator increments per discrete axis (already −λ/2-scaled).
    pub comp: &'a [Complex64],
    /// Brownian increments of this step.
    pub dy: &'a [f64],
}

pub(crate) trait WalkSink {
    /// Request per-step martingale values (adds one accumulation per
    /// frequency per step).
    const NEEDS_VALUES: bool;
    fn on_start(&mut self, m0: Complex64);
    fn on_step(&mut self, ctx: &StepContext<'_>);
    fn on_jump(&mut self, rec: &JumpRecord);
    fn on_final(&mut self, m_final: Complex64);
}

/// Immutable per-(f, cfg) tables over the support of f: symbols, decay
/// factors, and jump rotations. Shared read-only across workers.
pub(crate) struct WalkerTables {
    s_len: usize,
    m: usize,
    n: usize,
    band: usize,
    horizon: f64,
    dt: f64,
    half_lambda: f64,
    coeff_re: Vec<f64>,
    coeff_im: Vec<f64>,
    /// m rows x s_len: theta_i = 2*pi*k_i/N_i, for start phases.
    theta_x: Vec<f64>,
    lam: Vec<f64>,
    inv_lam: Vec<f64>,
    growth: Vec<f64>,
    decay_init: Vec<f64>,
    cy_idx: Vec<usize>,
    /// n rows x s_len: k_j as f64.
    kyf: Vec<f64>,
    /// m rows x s_len: 2cos(theta)-2.
    x2s: Vec<f64>,
    /// m rows x s_len: 2sin(theta).
    s0: Vec<f64>,
    rot_re: Vec<f64>,
    rot_im: Vec<f64>,
    init_underflow: bool,
}

/// Mutable per-path walker state; reusable across paths to keep the hot
/// loops free of allocation. The arrays are split re/im so the per-step
/// passes are branch-free f64 loops.
pub(crate) struct WalkerState {
    u_re: Vec<f64>,
    u_im: Vec<f64>,
    decay: Vec<f64>,
    r_re: Vec<f64>,
    r_im: Vec<f64>,
    qdw_re: Vec<f64>,
    qdw_im: Vec<f64>,
    dnew: Vec<f64>,
    grad: Vec<Complex64>,
    comp: Vec<Complex64>,
    watch_underflow: bool,
}

/// The torus position and its character tables, kept separate from the
/// per-function state so that batched walks over a shared trajectory
/// refresh them once per step.
pub(crate) struct YState {
    y: Vec<f64>,
    pow_re: Vec<f64>,
    pow_im: Vec<f64>,
    cy_re: Vec<f64>,
    cy_im: Vec<f64>,
    n: usize,
    band: usize,
}

impl YState {
    pub(crate) fn new(t: &WalkerTables) -> Self {
        let cy_table_len = t.band.pow(t.n as u32).max(1);
        YState {
            y: Vec::with_capacity(t.n),
            pow_re: vec![1.0; t.n * t.band],
            pow_im: vec![0.0; t.n * t.band],
            cy_re: vec![1.0; cy_table_len],
            cy_im: vec![0.0; cy_table_len],
            n: t.n,
            band: t.band,
        }
    }

    fn reset(&mut self, y0: &[f64]) {
        self.y.clear();
        self.y.extend_from_slice(y0);
    }

    /// e^{iky_j} tables and the cy product table at the current y.
    fn refresh(&mut self) {
        let band = self.band;
        let k_max = (band.max(1) - 1) / 2;
        match self.n {
            0 => {}
            1 => {
                // Write the single power row straight into the cy table.
                let (c, s) = crate::trig::cis(self.y[0]);
                self.cy_re[k_max] = 1.0;
                self.cy_im[k_max] = 0.0;
                let mut cur_re = 1.0;
                let mut cur_im = 0.0;
                for k in 1..=k_max {
                    let nr = cur_re * c - cur_im * s;
                    let ni = cur_re * s + cur_im * c;
                    cur_re = nr;
                    cur_im = ni;
                    self.cy_re[k_max + k] = cur_re;
                    self.cy_im[k_max + k] = cur_im;
                    self.cy_re[k_max - k] = cur_re;
                    self.cy_im[k_max - k] = -cur_im;
                }
            }
            _ => {
                for j in 0..self.n {
                    let (c, s) = crate::trig::cis(self.y[j]);
                    let row_re = &mut self.pow_re[j * band..(j + 1) * band];
                    let row_im = &mut self.pow_im[j * band..(j + 1) * band];
                    row_re[k_max] = 1.0;
                    row_im[k_max] = 0.0;
                    let mut cur = Complex64::ONE;
                    let base = Complex64::new(c, s);
                    for k in 1..=k_max {
                        cur *= base;
                        row_re[k_max + k] = cur.re;
                        row_im[k_max + k] = cur.im;
                        row_re[k_max - k] = cur.re;
                        row_im[k_max - k] = -cur.im;
                    }
                }
                // Product over axes for every ky tuple, row-major.
                let mut len = band;
                self.cy_re[..band].copy_from_slice(&self.pow_re[..band]);
                self.cy_im[..band].copy_from_slice(&self.pow_im[..band]);
                for j in 1..self.n {
                    let row_re = &self.pow_re[j * band..(j + 1) * band];
                    let row_im = &self.pow_im[j * band..(j + 1) * band];
                    for prefix in (0..len).rev() {
                        let pr = self.cy_re[prefix];
                        let pi = self.cy_im[prefix];
                        for k in 0..band {
                            self.cy_re[prefix * band + k] = pr * row_re[k] - pi * row_im[k];
                            self.cy_im[prefix * band + k] = pr * row_im[k] + pi * row_re[k];
                        }
                    }
                    len *= band;
                }
            }
        }
    }
}

impl WalkerTables {
    pub(crate) fn new(f: &SpectralFunction, cfg: &SimConfig) -> Result<Self, StochasticError> {
        cfg.validate()?;
        let spec = f.spec();
        let m = spec.discrete_dims();
        let n = spec.torus_dim;
        let band = spec.torus_band();
        let support: Vec<usize> = f
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != Complex64::ZERO)
            .map(|(i, _)| i)
            .collect();
        let s_len = support.len();
        let mut t = WalkerTables {
            s_len,
            m,
            n,
            band,
            horizon: cfg.horizon_t,
            dt: cfg.dt,
            half_lambda: 0.5 * cfg.lambda,
            coeff_re: Vec::with_capacity(s_len),
            coeff_im: Vec::with_capacity(s_len),
            theta_x: vec![0.0; m * s_len],
            lam: Vec::with_capacity(s_len),
            inv_lam: Vec::with_capacity(s_len),
            growth: Vec::with_capacity(s_len),
            decay_init: Vec::with_capacity(s_len),
            cy_idx: Vec::with_capacity(s_len),
            kyf: vec![0.0; n * s_len],
            x2s: vec![0.0; m * s_len],
            s0: vec![0.0; m * s_len],
            rot_re: vec![1.0; m * s_len],
            rot_im: vec![0.0; m * s_len],
            init_underflow: false,
        };
        for (s, &idx) in support.iter().enumerate() {
            let xi = spec.frequency_at(idx);
            let lam = laplacian_symbol(spec, &xi);
            let e = -cfg.horizon_t * lam;
            let d0 = if e < -700.0 { 0.0 } else { e.exp() };
            if d0 == 0.0 {
                t.init_underflow = true;
            }
            t.decay_init.push(d0);
            t.lam.push(lam);
            t.inv_lam.push(if lam > 0.0 { 1.0 / lam } else { 0.0 });
            t.growth.push((cfg.dt * lam).exp());
            let c = f.coeffs()[idx];
            t.coeff_re.push(c.re);
            t.coeff_im.push(c.im);
            let mut cyi = 0usize;
            for j in 0..n {
                cyi = cyi * band + (xi.ky[j] + spec.band_limit) as usize;
            }
            t.cy_idx.push(cyi);
            for i in 0..m {
                let th = theta(spec, &xi, i);
                t.theta_x[i * s_len + s] = th;
                t.x2s[i * s_len + s] = 2.0 * th.cos() - 2.0;
                t.s0[i * s_len + s] = 2.0 * th.sin();
                let (rc, rs) = crate::trig::cis(th);
                t.rot_re[i * s_len + s] = rc;
                t.rot_im[i * s_len + s] = rs;
            }
            for j in 0..n {
                t.kyf[j * s_len + s] = xi.ky[j] as f64;
            }
        }
        Ok(t)
    }
}

impl WalkerState {
    pub(crate) fn new(t: &WalkerTables) -> Self {
        WalkerState {
            u_re: vec![0.0; t.s_len],
            u_im: vec![0.0; t.s_len],
            decay: vec![0.0; t.s_len],
            r_re: vec![0.0; t.s_len],
            r_im: vec![0.0; t.s_len],
            qdw_re: vec![0.0; t.s_len],
            qdw_im: vec![0.0; t.s_len],
            dnew: vec![0.0; t.s_len],
            grad: vec![Complex64::ZERO; t.n],
            comp: vec![Complex64::ZERO; t.m],
            watch_underflow: false,
        }
    }

    /// Arm the state for a path starting at x0.
    fn reset(&mut self, t: &WalkerTables, x0: &[u32]) {
        for s in 0..t.s_len {
            let mut phase = 0.0;
            for i in 0..t.m {
                phase += t.theta_x[i * t.s_len + s] * x0[i] as f64;
            }
            let (c, si) = crate::trig::cis(phase);
            self.u_re[s] = t.coeff_re[s] * c - t.coeff_im[s] * si;
            self.u_im[s] = t.coeff_re[s] * si + t.coeff_im[s] * c;
        }
        self.decay.copy_from_slice(&t.decay_init);
        self.watch_underflow = t.init_underflow;
    }

    /// Decay factors at the step's right endpoint (general path).
    fn compute_dnew(&mut self, t: &WalkerTables, regular: bool, u_right: f64) {
        let s_len = t.s_len;
        if regular {
            for s in 0..s_len {
                self.dnew[s] = self.decay[s] * t.growth[s];
            }
        } else {
            for s in 0..s_len {
                self.dnew[s] = (-u_right * t.lam[s]).exp();
            }
        }
        if self.watch_underflow {
            let mut still = false;
            for s in 0..s_len {
                if self.dnew[s] == 0.0 {
                    let e = u_right * t.lam[s];
                    if e < 700.0 {
                        self.dnew[s] = (-e).exp();
                    } else {
                        still = true;
                    }
                }
            }
            self.watch_underflow = still;
        }
    }

    /// One fused pass: q = u*cy, r = q*decay, qdw = q*(dnew-decay)/lam, then
    /// commit decay <- dnew. Returns the value sum when NEED_M.
    fn main_pass<const NEED_M: bool>(&mut self, t: &WalkerTables, ys: &YState) -> Complex64 {
        let s_len = t.s_len;
        let u_re = &self.u_re[..s_len];
        let u_im = &self.u_im[..s_len];
        let cy_re = &ys.cy_re[..];
        let cy_im = &ys.cy_im[..];
        let cy_idx = &t.cy_idx[..s_len];
        let dnew = &self.dnew[..s_len];
        let inv_lam = &t.inv_lam[..s_len];
        let decay = &mut self.decay[..s_len];
        let r_re = &mut self.r_re[..s_len];
        let r_im = &mut self.r_im[..s_len];
        let qdw_re = &mut self.qdw_re[..s_len];
        let qdw_im = &mut self.qdw_im[..s_len];
        let mut m_re = 0.0;
        let mut m_im = 0.0;
        for s in 0..s_len {
            let k = cy_idx[s];
            let cr = cy_re[k];
            let ci = cy_im[k];
            let qr = u_re[s] * cr - u_im[s] * ci;
            let qi = u_re[s] * ci + u_im[s] * cr;
            let d = decay[s];
            let rr = qr * d;
            let ri = qi * d;
            if NEED_M {
                m_re += rr;
                m_im += ri;
            }
            let dw = (dnew[s] - d) * inv_lam[s];
            r_re[s] = rr;
            r_im[s] = ri;
            qdw_re[s] = qr * dw;
            qdw_im[s] = qi * dw;
            decay[s] = dnew[s];
        }
        Complex64::new(m_re, m_im)
    }

    /// Fully fused step for groups with at most one discrete and one torus
    /// axis (the hot desk-scale configurations): one loop, no scratch
    /// traffic, gradient and compensator accumulated inline.
    #[inline]
    fn step_small<
        const HAS_X: bool,
        const HAS_Y: bool,
        const NEED_M: bool,
        const REGULAR: bool,
    >(
        &mut self,
        t: &WalkerTables,
        ys: &YState,
        u_right: f64,
    ) -> Complex64 {
        let s_len = t.s_len;
        let u_re = &self.u_re[..s_len];
        let u_im = &self.u_im[..s_len];
        let cy_re = &ys.cy_re[..];
        let cy_im = &ys.cy_im[..];
        let cy_idx = &t.cy_idx[..s_len];
        let growth = &t.growth[..s_len];
        let lam = &t.lam[..s_len];
        let inv_lam = &t.inv_lam[..s_len];
        let kyf = &t.kyf[..];
        let x2s = &t.x2s[..];
        let decay = &mut self.decay[..s_len];
        let mut m_re = 0.0;
        let mut m_im = 0.0;
        let mut g_re = 0.0;
        let mut g_im = 0.0;
        let mut c_re = 0.0;
        let mut c_im = 0.0;
        for s in 0..s_len {
            let (cr, ci) = if HAS_Y {
                let k = cy_idx[s];
                (cy_re[k], cy_im[k])
            } else {
                (1.0, 0.0)
            };
            let qr = u_re[s] * cr - u_im[s] * ci;
            let qi = u_re[s] * ci + u_im[s] * cr;
            let d = decay[s];
            let rr = qr * d;
            let ri = qi * d;
            if NEED_M {
                m_re += rr;
                m_im += ri;
            }
            if HAS_Y {
                let k = kyf[s];
                g_re += rr * k;
                g_im += ri * k;
            }
            let dn = if REGULAR { d * growth[s] } else { (-u_right * lam[s]).exp() };
            if HAS_X {
                let w = x2s[s] * ((dn - d) * inv_lam[s]);
                c_re += qr * w;
                c_im += qi * w;
            }
            decay[s] = dn;
        }
        if HAS_Y {
            self.grad[0] = Complex64::new(-g_im, g_re);
        }
        if HAS_X {
            self.comp[0] = Complex64::new(-t.half_lambda * c_re, -t.half_lambda * c_im);
        }
        Complex64::new(m_re, m_im)
    }

    /// Gradient and compensator accumulations from the pass buffers.
    fn finish_axes(&mut self, t: &WalkerTables) {
        let s_len = t.s_len;
        for j in 0..t.n {
            let w = &t.kyf[j * s_len..(j + 1) * s_len];
            let mut gr = 0.0;
            let mut gi = 0.0;
            for s in 0..s_len {
                gr += self.r_re[s] * w[s];
                gi += self.r_im[s] * w[s];
            }
            // (Y_j f) = i*(gr + i*gi)
            self.grad[j] = Complex64::new(-gi, gr);
        }
        for i in 0..t.m {
            let w = &t.x2s[i * s_len..(i + 1) * s_len];
            let mut cr = 0.0;
            let mut ci = 0.0;
            for s in 0..s_len {
                cr += self.qdw_re[s] * w[s];
                ci += self.qdw_im[s] * w[s];
            }
            self.comp[i] = Complex64::new(-t.half_lambda * cr, -t.half_lambda * ci);
        }
    }

    /// M at the current state (u, decay, cy table all refreshed).
    fn current_value(&self, t: &WalkerTables, ys: &YState) -> Complex64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for s in 0..t.s_len {
            let k = t.cy_idx[s];
            let qr = self.u_re[s] * ys.cy_re[k] - self.u_im[s] * ys.cy_im[k];
            let qi = self.u_re[s] * ys.cy_im[k] + self.u_im[s] * ys.cy_re[k];
            re += qr * self.decay[s];
            im += qi * self.decay[s];
        }
        Complex64::new(re, im)
    }

    /// Frame values (X_axis^2 f, X_axis^0 f) at the current (pre-jump) state.
    fn jump_frame(&self, t: &WalkerTables, ys: &YState, axis: usize) -> (Complex64, Complex64) {
        let s_len = t.s_len;
        let x2w = &t.x2s[axis * s_len..(axis + 1) * s_len];
        let s0w = &t.s0[axis * s_len..(axis + 1) * s_len];
        let mut x2r = 0.0;
        let mut x2i = 0.0;
        let mut s0r = 0.0;
        let mut s0i = 0.0;
        for s in 0..s_len {
            let k = t.cy_idx[s];
            let qr = self.u_re[s] * ys.cy_re[k] - self.u_im[s] * ys.cy_im[k];
            let qi = self.u_re[s] * ys.cy_im[k] + self.u_im[s] * ys.cy_re[k];
            let er = qr * self.decay[s];
            let ei = qi * self.decay[s];
            x2r += er * x2w[s];
            x2i += ei * x2w[s];
            s0r += er * s0w[s];
            s0i += ei * s0w[s];
        }
        (Complex64::new(x2r, x2i), Complex64::new(-s0i, s0r))
    }

    /// Multiply the running character phases by e^{+-i*theta_axis}.
    fn apply_jump(&mut self, t: &WalkerTables, axis: usize, sign: i8) {
        let s_len = t.s_len;
        let rot_re = &t.rot_re[axis * s_len..(axis + 1) * s_len];
        let rot_im = &t.rot_im[axis * s_len..(axis + 1) * s_len];
        let u_re = &mut self.u_re[..s_len];
        let u_im = &mut self.u_im[..s_len];
        if sign >= 0 {
            for s in 0..s_len {
                let nr = u_re[s] * rot_re[s] - u_im[s] * rot_im[s];
                let ni = u_re[s] * rot_im[s] + u_im[s] * rot_re[s];
                u_re[s] = nr;
                u_im[s] = ni;
            }
        } else {
            for s in 0..s_len {
                let nr = u_re[s] * rot_re[s] + u_im[s] * rot_im[s];
                let ni = u_im[s] * rot_re[s] - u_re[s] * rot_im[s];
                u_re[s] = nr;
                u_im[s] = ni;
            }
        }
    }
}

/// Drive one trajectory through a sink using prebuilt tables and reusable
/// state. This is the single stepping routine behind every martingale
/// construction in the crate; the group-shape dispatch happens once per
/// walk, not per step.
pub(crate) fn walk_with<S: WalkSink>(
    tables: &WalkerTables,
    st: &mut WalkerState,
    ys: &mut YState,
    traj: &Trajectory,
    sink: &mut S,
) -> Result<(), StochasticError> {
    if traj.horizon_t != tables.horizon || traj.spec.torus_dim != tables.n {
        return Err(StochasticError::ConfigMismatch);
    }
    let tl = std::slice::from_ref(tables);
    let stl = std::slice::from_mut(st);
    match (tables.m <= 1 && tables.n <= 1, tables.m == 1, tables.n == 1) {
        (true, true, true) => walk_inner::<S, true, true, true>(tl, stl, ys, traj, &mut [sink]),
        (true, true, false) => walk_inner::<S, true, true, false>(tl, stl, ys, traj, &mut [sink]),
        (true, false, true) => walk_inner::<S, true, false, true>(tl, stl, ys, traj, &mut [sink]),
        (true, false, false) => walk_inner::<S, true, false, false>(tl, stl, ys, traj, &mut [sink]),
        (false, _, _) => walk_inner::<S, false, false, false>(tl, stl, ys, traj, &mut [sink]),
    }
}

/// Drive one trajectory through several (function, sink) lanes at once:
/// the trajectory, the torus character tables and the grid bookkeeping are
/// shared across lanes, so batched ensembles pay the per-step fixed cost
/// once. All tables must come from the same group spec and sim config.
pub(crate) fn walk_batch<S: WalkSink>(
    tables: &[WalkerTables],
    states: &mut [WalkerState],
    ys: &mut YState,
    traj: &Trajectory,
    sinks: &mut [&mut S],
) -> Result<(), StochasticError> {
    let t0 = &tables[0];
    if traj.horizon_t != t0.horizon || traj.spec.torus_dim != t0.n {
        return Err(StochasticError::ConfigMismatch);
    }
    for t in tables {
        if t.n != t0.n || t.m != t0.m || t.horizon != t0.horizon || t.dt != t0.dt {
            return Err(StochasticError::ConfigMismatch);
        }
    }
    match (t0.m <= 1 && t0.n <= 1, t0.m == 1, t0.n == 1) {
        (true, true, true) => walk_inner::<S, true, true, true>(tables, states, ys, traj, sinks),
        (true, true, false) => walk_inner::<S, true, true, false>(tables, states, ys, traj, sinks),
        (true, false, true) => walk_inner::<S, true, false, true>(tables, states, ys, traj, sinks),
        (true, false, false) => {
            walk_inner::<S, true, false, false>(tables, states, ys, traj, sinks)
        }
        (false, _, _) => walk_inner::<S, false, false, false>(tables, states, ys, traj, sinks),
    }
}

fn walk_inner<S: WalkSink, const SMALL: bool, const HX: bool, const HY: bool>(
    tables: &[WalkerTables],
    states: &mut [WalkerState],
    ys: &mut YState,
    traj: &Trajectory,
    sinks: &mut [&mut S],
) -> Result<(), StochasticError> {
    let lanes = tables.len();
    let n = tables[0].n;
    let dt = tables[0].dt;
    let horizon = tables[0].horizon;
    ys.reset(&traj.z0.y);
    ys.refresh();
    for l in 0..lanes {
        states[l].reset(&tables[l], &traj.z0.x);
        sinks[l].on_start(states[l].current_value(&tables[l], ys));
    }

    let steps = traj.steps();
    let mut next_event = 0usize;
    let mut y_fresh = true;
    for step in 0..steps {
        let t_b = traj.times[step + 1];
        let h = t_b - traj.times[step];
        let regular = (h - dt).abs() <= 1e-9 * dt;
        if !y_fresh {
            ys.refresh();
        }
        let u_right = horizon - t_b;
        let dy = &traj.gauss[step * n..step * n + n];
        for l in 0..lanes {
            let t = &tables[l];
            let st = &mut states[l];
            let m_value = if SMALL && !st.watch_underflow {
                // The NEEDS_VALUES branch folds away: both arms are const.
                match (S::NEEDS_VALUES, regular) {
                    (true, true) => st.step_small::<HX, HY, true, true>(t, ys, u_right),
                    (true, false) => st.step_small::<HX, HY, true, false>(t, ys, u_right),
                    (false, true) => st.step_small::<HX, HY, false, true>(t, ys, u_right),
                    (false, false) => st.step_small::<HX, HY, false, false>(t, ys, u_right),
                }
            } else {
                st.compute_dnew(t, regular, u_right);
                let m = if S::NEEDS_VALUES {
                    st.main_pass::<true>(t, ys)
                } else {
                    st.main_pass::<false>(t, ys)
                };
                st.finish_axes(t);
                m
            };
            let ctx = StepContext { step, h, m_value, grad: &st.grad, comp: &st.comp, dy };
            sinks[l].on_step(&ctx);
        }
        // Unwrapped accumulation: the trig reduction handles the range, and
        // y drifts only O(sqrt(T)) over a path.
        for j in 0..n {
            ys.y[j] += traj.gauss[step * n + j];
        }
        y_fresh = false;
        if next_event < traj.events.len() && traj.events[next_event].grid_index == step + 1 {
            ys.refresh();
            y_fresh = true;
            while next_event < traj.events.len() && traj.events[next_event].grid_index == step + 1
            {
                let ev = traj.events[next_event];
                for l in 0..lanes {
                    let (x2, x0) = states[l].jump_frame(&tables[l], ys, ev.axis);
                    let rec =
                        JumpRecord { grid_index: step + 1, axis: ev.axis, sign: ev.sign, x2, x0 };
                    sinks[l].on_jump(&rec);
                    states[l].apply_jump(&tables[l], ev.axis, ev.sign);
                }
                next_event += 1;
            }
        }
    }
    if !y_fresh {
        ys.refresh();
    }
    for l in 0..lanes {
        sinks[l].on_final(states[l].current_value(&tables[l], ys));
    }
    Ok(())
}

pub(crate) fn walk_martingale<S: WalkSink>(
    f: &SpectralFunction,
    traj: &Trajectory,
    cfg: &SimConfig,
    sink: &mut S,
) -> Result<(), StochasticError> {
    if f.spec() != &traj.spec || traj.horizon_t != cfg.horizon_t {
        return Err(StochasticError::ConfigMismatch);
    }
    let tables = WalkerTables::new(f, cfg)?;
    let mut state = WalkerState::new(&tables);
    let mut ys = YState::new(&tables);
    walk_with(&tables, &mut state, &mut ys, traj, sink)
}

// ---------------------------------------------------------------------------
// Sinks
// ---------------------------------------------------------------------------

struct RecordingSink {
    n: usize,
    m: usize,
    values: Vec<Complex64>,
    qv: Vec<f64>,
    step_h: Vec<f64>,
    dy: Vec<f64>,
    grad_y: Vec<Complex64>,
    comp: Vec<Complex64>,
    jumps: Vec<JumpRecord>,
}

impl RecordingSink {
    fn new(steps: usize, n: usize, m: usize, n_jumps: usize) -> Self {
        RecordingSink {
            n,
            m,
            values: vec![Complex64::ZERO; steps + 1],
            qv: vec![0.0; steps + 1],
            step_h: vec![0.0; steps],
            dy: vec![0.0; steps * n],
            grad_y: vec![Complex64::ZERO; steps * n],
            comp: vec![Complex64::ZERO; steps * m],
            jumps: Vec::with_capacity(n_jumps),
        }
    }
}

impl WalkSink for RecordingSink {
    const NEEDS_VALUES: bool = true;

    fn on_start(&mut self, m0: Complex64) {
        self.values[0] = m0;
    }

    fn on_step(&mut self, ctx: &StepContext<'_>) {
        let step = ctx.step;
        self.values[step] = ctx.m_value;
        self.step_h[step] = ctx.h;
        let mut cont = 0.0;
        for j in 0..self.n {
            self.grad_y[step * self.n + j] = ctx.grad[j];
            self.dy[step * self.n + j] = ctx.dy[j];
            cont += ctx.grad[j].norm_sqr();
        }
        for i in 0..self.m {
            self.comp[step * self.m + i] = ctx.comp[i];
        }
        self.qv[step + 1] = self.qv[step] + cont * 2.0 * ctx.h;
    }

    fn on_jump(&mut self, rec: &JumpRecord) {
        self.qv[rec.grid_index] += rec.increment().norm_sqr();
        self.jumps.push(*rec);
    }

    fn on_final(&mut self, m_final: Complex64) {
        *self.values.last_mut().expect("non-empty") = m_final;
    }
}

/// Fused transform accumulation: tracks M^{α,f} without materializing the
/// path. Term order mirrors [`transform_martingale`]; the coefficient
/// entries are copied in so the hot loop avoids indirection.
pub(crate) struct FusedTransform {
    ax: Vec<Complex64>,
    ay: Vec<Complex64>,
    n: usize,
    running: Complex64,
    initial: Complex64,
    final_f: Complex64,
}

impl FusedTransform {
    pub(crate) fn new(alpha: &CoefficientMatrix) -> Self {
        FusedTransform {
            ax: alpha.alpha_x.clone(),
            ay: alpha.alpha_y.clone(),
            n: alpha.torus_dim(),
            running: Complex64::ZERO,
            initial: Complex64::ZERO,
            final_f: Complex64::ZERO,
        }
    }

    #[inline]
    fn step(&mut self, ctx: &StepContext<'_>) {
        let n = self.n;
        for j in 0..n {
            let mut aj = Complex64::ZERO;
            for k in 0..n {
                aj += self.ay[j * n + k] * ctx.grad[k];
            }
            self.running += aj * ctx.dy[j];
        }
        for (i, c) in ctx.comp.iter().enumerate() {
            self.running += self.ax[i] * c;
        }
    }

    #[inline]
    fn jump(&mut self, rec: &JumpRecord) {
        self.running += self.ax[rec.axis] * rec.increment();
    }

    pub(crate) fn result(&self) -> TransformedFinal {
        TransformedFinal {
            initial: self.initial,
            final_f: self.final_f,
            final_transformed: self.running,
        }
    }
}

impl WalkSink for FusedTransform {
    const NEEDS_VALUES: bool = false;

    fn on_start(&mut self, m0: Complex64) {
        self.initial = m0;
        self.running = m0;
    }

    fn on_step(&mut self, ctx: &StepContext<'_>) {
        self.step(ctx);
    }

    fn on_jump(&mut self, rec: &JumpRecord) {
        self.jump(rec);
    }

    fn on_final(&mut self, m_final: Complex64) {
        self.final_f = m_final;
    }
}

/// Fused transform plus per-increment subordination gap scan.
struct GapScan {
    inner: FusedTransform,
    bound_sq: f64,
    min_increment: f64,
}

impl WalkSink for GapScan {
    const NEEDS_VALUES: bool = false;

    fn on_start(&mut self, m0: Complex64) {
        self.inner.on_start(m0);
    }

    fn on_step(&mut self, ctx: &StepContext<'_>) {
        let n = ctx.grad.len();
        let mut grad_sq = 0.0;
        let mut tgrad_sq = 0.0;
        for j in 0..n {
            grad_sq += ctx.grad[j].norm_sqr();
            let mut aj = Complex64::ZERO;
            for k in 0..n {
                aj += self.inner.ay[j * n + k] * ctx.grad[k];
            }
            tgrad_sq += aj.norm_sqr();
        }
        if n > 0 {
            let inc = (self.bound_sq * grad_sq - tgrad_sq) * 2.0 * ctx.h;
            self.min_increment = self.min_increment.min(inc);
        }
        self.inner.step(ctx);
    }

    fn on_jump(&mut self, rec: &JumpRecord) {
        let base = rec.increment().norm_sqr();
        let scaled = self.inner.ax[rec.axis].norm_sqr() * base;
        self.min_increment = self.min_increment.min(self.bound_sq * base - scaled);
        self.inner.jump(rec);
    }

    fn on_final(&mut self, m_final: Complex64) {
        self.inner.on_final(m_final);
    }
}

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

/// Build M^f along a trajectory: exact values at every grid time plus the
/// decomposed increment records.
pub fn build_martingale(
    f: &SpectralFunction,
    traj: &Trajectory,
    cfg: &SimConfig,
) -> Result<MartingalePath, StochasticError> {
    let mut sink = RecordingSink::new(
        traj.steps(),
        traj.spec.torus_dim,
        traj.spec.discrete_dims(),
        traj.events.len(),
    );
    walk_martingale(f, traj, cfg, &mut sink)?;
    Ok(MartingalePath {
        spec: traj.spec.clone(),
        times: traj.times.clone(),
        values: sink.values,
        qv: sink.qv,
        records: IncrementRecords {
            step_h: sink.step_h,
            dy: sink.dy,
            grad_y: sink.grad_y,
            comp: sink.comp,
            jumps: sink.jumps,
        },
        horizon_t: cfg.horizon_t,
        lambda: cfg.lambda,
        transform: None,
    })
}

/// Initial and final values of M^f and M^{α,f} along one trajectory,
/// accumulated in one pass without materializing the series.
#[derive(Debug, Clone, Copy)]
pub struct TransformedFinal {
    pub initial: Complex64,
    pub final_f: Complex64,
    pub final_transformed: Complex64,
}

pub fn transformed_final(
    f: &SpectralFunction,
    alpha: &CoefficientMatrix,
    traj: &Trajectory,
    cfg: &SimConfig,
) -> Result<TransformedFinal, StochasticError> {
    alpha.matches(&traj.spec)?;
    let mut sink = FusedTransform::new(alpha);
    walk_martingale(f, traj, cfg, &mut sink)?;
    Ok(TransformedFinal {
        initial: sink.initial,
        final_f: sink.final_f,
        final_transformed: sink.running,
    })
}

/// [`transformed_final`] with prebuilt tables and reusable state, for
/// ensemble loops.
pub(crate) fn transformed_final_with(
    tables: &WalkerTables,
    state: &mut WalkerState,
    ys: &mut YState,
    alpha: &CoefficientMatrix,
    traj: &Trajectory,
) -> Result<TransformedFinal, StochasticError> {
    let mut sink = FusedTransform::new(alpha);
    walk_with(tables, state, ys, traj, &mut sink)?;
    Ok(TransformedFinal {
        initial: sink.initial,
        final_f: sink.final_f,
        final_transformed: sink.running,
    })
}

/// One-pass subordination scan: the smallest per-increment value of
/// norm2(α)²·Δ[M^f] − Δ[M^{α,f}] along with the final values.
#[derive(Debug, Clone, Copy)]
pub struct SubordinationScan {
    pub min_increment: f64,
    pub final_f: Complex64,
    pub final_transformed: Complex64,
}

pub fn subordination_scan(
    f: &SpectralFunction,
    alpha: &CoefficientMatrix,
    traj: &Trajectory,
    cfg: &SimConfig,
) -> Result<SubordinationScan, StochasticError> {
    alpha.matches(&traj.spec)?;
    let mut sink = GapScan {
        inner: FusedTransform::new(alpha),
        bound_sq: alpha.norm2().powi(2),
        min_increment: f64::INFINITY,
    };
    walk_martingale(f, traj, cfg, &mut sink)?;
    Ok(SubordinationScan {
        min_increment: if sink.min_increment.is_finite() { sink.min_increment } else { 0.0 },
        final_f: sink.inner.final_f,
        final_transformed: sink.inner.running,
    })
}

/// [`subordination_scan`] with prebuilt tables and reusable state. The
/// norm2 bound is passed in so the ensemble computes it once.
pub(crate) fn subordination_scan_with(
    tables: &WalkerTables,
    state: &mut WalkerState,
    ys: &mut YState,
    alpha: &CoefficientMatrix,
    bound_sq: f64,
    traj: &Trajectory,
) -> Result<SubordinationScan, StochasticError> {
    let mut sink = GapScan { inner: FusedTransform::new(alpha), bound_sq, min_increment: f64::INFINITY };
    walk_with(tables, state, ys, traj, &mut sink)?;
    Ok(SubordinationScan {
        min_increment: if sink.min_increment.is_finite() { sink.min_increment } else { 0.0 },
        final_f: sink.inner.final_f,
        final_transformed: sink.inner.running,
    })
}

/// The martingale transform A_α ∗ M^f, assembled from the recorded
/// increments: jump pairs are reweighted by α_i^x, the continuous integrand
/// becomes (α^y ∇_y f)·dY, and M^{α,f}(0) = M^f(0).
pub fn transform_martingale(
    path: &MartingalePath,
    alpha: &CoefficientMatrix,
) -> Result<MartingalePath, StochasticError> {
    alpha.matches(&path.spec)?;
    let n = path.torus_dim();
    let m = path.spec.discrete_dims();
    let steps = path.steps();
    let rec = &path.records;

    let mut values = vec![Complex64::ZERO; steps + 1];
    let mut qv = vec![0.0f64; steps + 1];
    values[0] = path.values[0];
    let mut running = values[0];
    let mut jump_iter = rec.jumps.iter().peekable();
    for step in 0..steps {
        let h = rec.step_h[step];
        let mut cont_qv = 0.0;
        for j in 0..n {
            let mut aj = Complex64::ZERO;
            for k in 0..n {
                aj += alpha.alpha_y_entry(j, k) * rec.grad_y[step * n + k];
            }
            running += aj * rec.dy[step * n + j];
            cont_qv += aj.norm_sqr();
        }
        for i in 0..m {
            running += alpha.alpha_x[i] * rec.comp[step * m + i];
        }
        qv[step + 1] = qv[step] + cont_qv * 2.0 * h;
        while let Some(j) = jump_iter.peek() {
            if j.grid_index != step + 1 {
                break;
            }
            let j = jump_iter.next().unwrap();
            let inc = alpha.alpha_x[j.axis] * j.increment();
            running += inc;
            qv[step + 1] += inc.norm_sqr();
        }
        values[step + 1] = running;
    }

    let mut out = path.clone();
    out.transform = Some(TransformTrack { alpha: alpha.clone(), values, qv });
    Ok(out)
}

/// Quadratic covariation [M^f, M^g]_t along a shared trajectory, accumulated
/// per the jump/continuous decomposition (conjugate-linear in `path_g`):
/// jumps contribute (X_i^τ f)(conj X_i^τ g) at (T−t, Z_{t−}), each step
/// contributes ⟨∇_y f, ∇_y g⟩·2h.
pub fn covariation(
    path_f: &MartingalePath,
    path_g: &MartingalePath,
) -> Result<Vec<Complex64>, StochasticError> {
    if !path_f.same_trajectory(path_g) {
        return Err(StochasticError::MismatchedTrajectories);
    }
    let n = path_f.torus_dim();
    let steps = path_f.steps();
    let mut out = vec![Complex64::ZERO; steps + 1];
    let mut jf = path_f.records.jumps.iter().peekable();
    let mut jg = path_g.records.jumps.iter().peekable();
    for step in 0..steps {
        let h = path_f.records.step_h[step];
        let mut inc = Complex64::ZERO;
        for j in 0..n {
            inc += path_f.records.grad_y[step * n + j] * path_g.records.grad_y[step * n + j].conj();
        }
        out[step + 1] = out[step] + inc * 2.0 * h;
        while let (Some(a), Some(b)) = (jf.peek(), jg.peek()) {
            if a.grid_index != step + 1 {
                break;
            }
            debug_assert_eq!(b.grid_index, step + 1);
            out[step + 1] += a.increment() * b.increment().conj();
            jf.next();
            jg.next();
        }
    }
    Ok(out)
}

/// Per-increment values of norm2(α)²·Δ[M^f] − Δ[M^{α,f}], ordered in time
/// (continuous step increments interleaved with jump increments). All values
/// are nonnegative up to rounding; the running sum is the subordination gap.
pub fn subordination_gap_increments(
    path: &MartingalePath,
    alpha: &CoefficientMatrix,
) -> Result<Vec<f64>, StochasticError> {
    alpha.matches(&path.spec)?;
    let n = path.torus_dim();
    let bound_sq = alpha.norm2().powi(2);
    let rec = &path.records;
    let mut out = Vec::with_capacity(path.steps() + rec.jumps.len());
    let mut jumps = rec.jumps.iter().peekable();
    for step in 0..path.steps() {
        let h = rec.step_h[step];
        let mut grad_sq = 0.0;
        let mut tgrad_sq = 0.0;
        for j in 0..n {
            grad_sq += rec.grad_y[step * n + j].norm_sqr();
            let mut aj = Complex64::ZERO;
            for k in 0..n {
                aj += alpha.alpha_y_entry(j, k) * rec.grad_y[step * n + k];
            }
            tgrad_sq += aj.norm_sqr();
        }
        if n > 0 {
            out.push((bound_sq * grad_sq - tgrad_sq) * 2.0 * h);
        }
        while let Some(j) = jumps.peek() {
            if j.grid_index != step + 1 {
                break;
            }
            let j = jumps.next().unwrap();
            let base = j.increment().norm_sqr();
            let scaled = alpha.alpha_x[j.axis].norm_sqr() * base;
            out.push(bound_sq * base - scaled);
        }
    }
    Ok(out)
}

/// Running subordination gap g(t) = norm2(α)²·[M^f,M^f]_t − [M^{α,f},M^{α,f}]_t
/// aligned to the path's grid times. g(0) = 0 and g is nondecreasing.
pub fn subordination_gap(
    path: &MartingalePath,
    alpha: &CoefficientMatrix,
) -> Result<Vec<f64>, StochasticError> {
    let with_transform;
    let p = match &path.transform {
        Some(tr) if tr.alpha == *alpha => path,
        _ => {
            with_transform = transform_martingale(path, alpha)?;
            &with_transform
        }
    };
    let bound_sq = alpha.norm2().powi(2);
    let tr = p.transform.as_ref().expect("transform just ensured");
    Ok(p.qv.iter().zip(&tr.qv).map(|(a, b)| bound_sq * a - b).collect())
}

/// Largest per-increment value of
/// Δ[Y − ((a+b)/2)X] − Δ[((b−a)/2)X]  with X = M^f, Y = M^{α,f},
/// which splits into jump terms (α_i^x−a)(α_i^x−b)|X_i^τf|² and continuous
/// terms ⟨(α^y−aI)(α^y−bI)∇_yf, ∇_yf⟩·2h; all are ≤ 0 when a·I ≤ A_α ≤ b·I.
/// Requires real coefficients.
pub fn choi_gap_max_increment(
    path: &MartingalePath,
    alpha: &CoefficientMatrix,
    a: f64,
    b: f64,
) -> Result<f64, StochasticError> {
    if !alpha.is_real(1e-12) {
        return Err(StochasticError::ComplexCoefficients);
    }
    alpha.matches(&path.spec)?;
    let n = path.torus_dim();
    let c = 0.5 * (a + b);
    let d = 0.5 * (b - a);
    let rec = &path.records;
    let mut max_inc = f64::NEG_INFINITY;
    let mut jumps = rec.jumps.iter().peekable();
    for step in 0..path.steps() {
        let h = rec.step_h[step];
        let mut shifted_sq = 0.0;
        let mut grad_sq = 0.0;
        for j in 0..n {
            let mut aj = Complex64::ZERO;
            for k in 0..n {
                aj += alpha.alpha_y_entry(j, k) * rec.grad_y[step * n + k];
            }
            aj -= c * rec.grad_y[step * n + j];
            shifted_sq += aj.norm_sqr();
            grad_sq += rec.grad_y[step * n + j].norm_sqr();
        }
        if n > 0 {
            max_inc = max_inc.max((shifted_sq - d * d * grad_sq) * 2.0 * h);
        }
        while let Some(j) = jumps.peek() {
            if j.grid_index != step + 1 {
                break;
            }
            let j = jumps.next().unwrap();
            let base = j.increment().norm_sqr();
            let ai = alpha.alpha_x[j.axis].re;
            max_inc = max_inc.max((ai - a) * (ai - b) * base);
        }
    }
    Ok(if max_inc.is_finite() { max_inc } else { 0.0 })
}
