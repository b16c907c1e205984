//! Υ(α), the complete elliptic integral K, and the quadrature behind them.

use std::f64::consts::PI;

use crate::error::{Error, Result};

// Gauss–Kronrod 7/15 nodes on [-1, 1] (positive half; index 0 is the largest).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];
// Gauss 7-point weights, at the odd Kronrod nodes (1, 3, 5, 7).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod quadrature to an absolute tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        recurse(f, a, m, 0.5 * tol, depth - 1) + recurse(f, m, b, 0.5 * tol, depth - 1)
    }
    recurse(&f, a, b, abs_tol, 40)
}

/// `Υ(α) = (1/2π) ∫₀^{2π} (α − cos x)/√(1 − 2α cos x + α²) dx`.
///
/// The integrand is bounded by 1 in magnitude, including at α = 1.
pub fn upsilon(alpha: f64) -> f64 {
    assert!(alpha >= 0.0 && alpha.is_finite(), "upsilon needs alpha >= 0, got {alpha}");
    if alpha == 0.0 {
        return 0.0;
    }
    let f = |x: f64| {
        let d = (1.0 - 2.0 * alpha * x.cos() + alpha * alpha).max(0.0).sqrt();
        if d == 0.0 {
            0.0
        } else {
            (alpha - x.cos()) / d
        }
    };
    // The integrand is symmetric about π; only near x = 0 is it steep.
    integrate(f, 0.0, PI, 1e-12) / PI
}

/// Complete elliptic integral of the first kind, modulus convention:
/// `K(k) = ∫₀^{π/2} dθ/√(1 − k² sin²θ)`.
pub fn elliptic_k(k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::InvalidArgument(format!("elliptic K diverges or is undefined for k = {k}")));
    }
    let mut a = 1.0;
    let mut b = (1.0 - k * k).sqrt();
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    Ok(PI / (2.0 * a))
}

/// Complete elliptic integral of the second kind, modulus convention:
/// `E(k) = ∫₀^{π/2} √(1 − k² sin²θ) dθ`, by the AGM with the `c_n` series.
pub fn elliptic_e(k: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&k) {
        return Err(Error::InvalidArgument(format!("elliptic E is undefined for k = {k}")));
    }
    if k == 1.0 {
        return Ok(1.0);
    }
    let mut a = 1.0;
    let mut b = (1.0 - k * k).sqrt();
    let mut c = k;
    let mut pow = 0.5;
    let mut sum = pow * c * c;
    for _ in 0..64 {
        if c.abs() <= 1e-17 * a {
            break;
        }
        c = 0.5 * (a - b);
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        pow *= 2.0;
        sum += pow * c * c;
    }
    Ok(PI / (2.0 * a) * (1.0 - sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Trapezoid over one period converges geometrically for smooth periodic integrands.
    fn periodic_trapezoid<F: Fn(f64) -> f64>(f: F, n: usize) -> f64 {
        let h = 2.0 * PI / n as f64;
        (0..n).map(|i| f(i as f64 * h)).sum::<f64>() * h
    }

    #[test]
    fn integrate_polynomial_and_trig() {
        assert_relative_eq!(integrate(|x| x * x, 0.0, 3.0, 1e-12), 9.0, max_relative = 1e-13);
        assert_relative_eq!(integrate(f64::sin, 0.0, PI, 1e-12), 2.0, max_relative = 1e-12);
        assert_relative_eq!(integrate(|x: f64| x.abs().sqrt(), -1.0, 1.0, 1e-12), 4.0 / 3.0, max_relative = 1e-10);
    }

    #[test]
    fn upsilon_anchor_values() {
        assert_eq!(upsilon(0.0), 0.0);
        assert_relative_eq!(upsilon(1.0), 2.0 / PI, epsilon = 1e-10);
        assert!((upsilon(100.0) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn upsilon_matches_trapezoid_oracle() {
        for &a in &[0.1, 0.3, 0.5, 0.8, 0.95, 1.05, 1.5, 2.0, 4.0, 10.0] {
            let f = |x: f64| (a - x.cos()) / (1.0 - 2.0 * a * x.cos() + a * a).sqrt() / (2.0 * PI);
            let oracle = periodic_trapezoid(f, 200_000);
            assert!((upsilon(a) - oracle).abs() < 1e-10, "alpha = {a}");
        }
    }

    #[test]
    fn upsilon_frozen_values() {
        // Independent scipy.integrate.quad evaluations.
        assert_relative_eq!(upsilon(0.5), 0.258_657_904_611_341_7, epsilon = 1e-10);
        assert_relative_eq!(upsilon(2.0), 0.934_215_457_667_694_2, epsilon = 1e-10);
    }

    #[test]
    fn upsilon_monotone() {
        let mut prev = upsilon(0.0);
        for i in 1..=100 {
            let v = upsilon(i as f64 * 0.05);
            assert!(v >= prev - 1e-12, "at {}", i as f64 * 0.05);
            prev = v;
        }
    }

    #[test]
    fn elliptic_k_values() {
        assert_relative_eq!(elliptic_k(0.0).unwrap(), PI / 2.0, max_relative = 1e-15);
        assert_relative_eq!(elliptic_k(0.5f64.sqrt()).unwrap(), 1.854_074_677_301_371_9, max_relative = 1e-13);
        assert!(elliptic_k(1.0).is_err());
        assert!(elliptic_k(-0.1).is_err());
    }

    #[test]
    fn elliptic_k_matches_quadrature() {
        for i in 0..50 {
            let k = 0.98 * i as f64 / 49.0;
            let quad = periodic_trapezoid(|t: f64| 1.0 / (1.0 - k * k * t.sin().powi(2)).sqrt(), 4000) / 4.0;
            assert_relative_eq!(elliptic_k(k).unwrap(), quad, max_relative = 1e-10);
        }
    }

    #[test]
    fn elliptic_e_values() {
        assert_relative_eq!(elliptic_e(0.0).unwrap(), PI / 2.0, max_relative = 1e-15);
        assert_relative_eq!(elliptic_e(1.0).unwrap(), 1.0);
        // scipy.special.ellipe(0.5)
        assert_relative_eq!(elliptic_e(0.5f64.sqrt()).unwrap(), 1.350_643_881_047_675_5, max_relative = 1e-13);
        for i in 0..50 {
            let k = 0.99 * i as f64 / 49.0;
            let quad = periodic_trapezoid(|t: f64| (1.0 - k * k * t.sin().powi(2)).sqrt(), 4000) / 4.0;
            assert_relative_eq!(elliptic_e(k).unwrap(), quad, max_relative = 1e-10);
        }
    }

    #[test]
    fn elliptic_k_monotone() {
        let mut prev = elliptic_k(0.0).unwrap();
        for i in 1..=99 {
            let v = elliptic_k(i as f64 * 0.01).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }
}
