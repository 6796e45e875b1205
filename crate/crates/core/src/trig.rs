//! Fast paired sin/cos for the walker's character updates.
//!
//! Cody–Waite reduction modulo π/2 followed by Taylor kernels on |r| ≤ π/4.
//! The single-word reduction loses accuracy like ½ulp(y), so the domain is
//! capped at |y| ≤ 2e3 where the absolute error stays below 2e−13 (measured
//! ≤ 3e−14 at |y| ≤ 350). The walker's arguments are torus angles that
//! drift by a Brownian path (a few dozen at most) and start phases bounded
//! by 2π·Σ N_i, all far inside the cap; the Monte Carlo hot loop calls this
//! once per torus axis per time step.

/// The f64 nearest π/2; PIO2_LO carries the truncated tail.
const PIO2_HI: f64 = std::f64::consts::FRAC_PI_2;
const PIO2_LO: f64 = 6.123_233_995_736_766e-17;
const INV_PIO2: f64 = std::f64::consts::FRAC_2_PI;

#[inline]
fn sin_kernel(r: f64) -> f64 {
    // sin(r) = r + r³(S1 + r²(S2 + …)), |r| ≤ π/4 (Taylor through r¹⁵).
    const S1: f64 = -1.666_666_666_666_666_6e-1;
    const S2: f64 = 8.333_333_333_333_333e-3;
    const S3: f64 = -1.984_126_984_126_984e-4;
    const S4: f64 = 2.755_731_922_398_589e-6;
    const S5: f64 = -2.505_210_838_544_172e-8;
    const S6: f64 = 1.605_904_383_682_161_4e-10;
    const S7: f64 = -7.647_163_731_819_816e-13;
    let z = r * r;
    r + r * z * (S1 + z * (S2 + z * (S3 + z * (S4 + z * (S5 + z * (S6 + z * S7))))))
}

#[inline]
fn cos_kernel(r: f64) -> f64 {
    // cos(r) = 1 + r²(C1 + r²(C2 + …)), |r| ≤ π/4 (Taylor through r¹⁶).
    const C1: f64 = -5e-1;
    const C2: f64 = 4.166_666_666_666_666_4e-2;
    const C3: f64 = -1.388_888_888_888_889e-3;
    const C4: f64 = 2.480_158_730_158_73e-5;
    const C5: f64 = -2.755_731_922_398_589e-7;
    const C6: f64 = 2.087_675_698_786_81e-9;
    const C7: f64 = -1.147_074_559_772_972_5e-11;
    const C8: f64 = 4.779_477_332_387_385e-14;
    let z = r * r;
    1.0 + z * (C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * (C6 + z * (C7 + z * C8)))))))
}

/// (cos y, sin y) for |y| ≤ 2e3.
#[inline]
pub fn cis(y: f64) -> (f64, f64) {
    debug_assert!(y.abs() <= 2e3, "angle {y} outside the reduction domain");
    let k = (y * INV_PIO2).round();
    let r = (y - k * PIO2_HI) - k * PIO2_LO;
    let s = sin_kernel(r);
    let c = cos_kernel(r);
    match (k as i64).rem_euclid(4) {
        0 => (c, s),
        1 => (-s, c),
        2 => (-c, -s),
        _ => (s, -c),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_std_sincos() {
        let mut worst = 0.0f64;
        for i in 0..400_001 {
            let y = -2000.0 + i as f64 * 0.01;
            let (c, s) = cis(y);
            worst = worst.max((c - y.cos()).abs()).max((s - y.sin()).abs());
        }
        // Points near reduction boundaries.
        for y in [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI, -std::f64::consts::PI] {
            let (c, s) = cis(y);
            worst = worst.max((c - y.cos()).abs()).max((s - y.sin()).abs());
        }
        assert!(worst < 2e-13, "max deviation {worst:.3e}");

        // The walker's actual operating range is much tighter.
        let mut worst_small = 0.0f64;
        for i in 0..100_001 {
            let y = -50.0 + i as f64 * 0.001;
            let (c, s) = cis(y);
            worst_small = worst_small.max((c - y.cos()).abs()).max((s - y.sin()).abs());
        }
        assert!(worst_small < 1e-14, "max deviation {worst_small:.3e} on |y| ≤ 50");
    }
}
