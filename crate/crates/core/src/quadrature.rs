//! Adaptive Gauss–Kronrod quadrature, used as an independent check on the
//! closed-form position update.

#![allow(clippy::excessive_precision)]

use crate::{Error, Result, Scalar};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (the 7-point rule).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_DEPTH: u32 = 24;

/// 15-point Kronrod estimate and the difference to the embedded Gauss rule.
fn gk15<T: Scalar>(f: &mut impl FnMut(T) -> T, lo: T, hi: T) -> (T, T) {
    let half = (hi - lo) * T::lit(0.5);
    let center = lo + half;
    let fc = f(center);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for (j, (&x, &w)) in XGK.iter().zip(&WGK).take(7).enumerate() {
        let dx = half * T::lit(x);
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + pair * T::lit(w);
        if j % 2 == 1 {
            gauss = gauss + pair * T::lit(WG[j / 2]);
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

fn adapt<T: Scalar>(f: &mut impl FnMut(T) -> T, lo: T, hi: T, tol: T, depth: u32) -> (T, T) {
    let (value, err) = gk15(f, lo, hi);
    let noise = T::lit(50.0) * T::epsilon() * value.abs();
    if err <= tol || err <= noise || depth >= MAX_DEPTH {
        return (value, err);
    }
    let mid = lo + (hi - lo) * T::lit(0.5);
    let half_tol = tol * T::lit(0.5);
    let (a, ea) = adapt(f, lo, mid, half_tol, depth + 1);
    let (b, eb) = adapt(f, mid, hi, half_tol, depth + 1);
    (a + b, ea + eb)
}

/// Integrates `f` over `[lo, hi]` to absolute tolerance `tol`.
pub fn integrate<T: Scalar>(mut f: impl FnMut(T) -> T, lo: T, hi: T, tol: T) -> Result<T> {
    let (value, err) = adapt(&mut f, lo, hi, tol, 0);
    if err <= tol && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::QuadratureTolerance { tolerance: tol.as_f64(), achieved: err.as_f64() })
    }
}

/// Default absolute tolerance of the displacement oracle.
pub const ORACLE_TOL: f64 = 1e-12;

/// Numerical displacement `∫₀^τ (a + b s)(cos, sin)(c + d s) ds`.
pub fn integrate_position_oracle<T: Scalar>(a: T, b: T, c: T, d: T, tau: T) -> Result<(T, T)> {
    integrate_position_oracle_tol(a, b, c, d, tau, T::lit(ORACLE_TOL))
}

pub fn integrate_position_oracle_tol<T: Scalar>(a: T, b: T, c: T, d: T, tau: T, tol: T) -> Result<(T, T)> {
    let dx = integrate(|s| (a + b * s) * (c + d * s).cos(), T::zero(), tau, tol)?;
    let dy = integrate(|s| (a + b * s) * (c + d * s).sin(), T::zero(), tau, tol)?;
    Ok((dx, dy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x: f64| 3.0 * x * x - x + 2.0, -1.0, 2.0, 1e-13).unwrap();
        assert!((v - 13.5).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_integrand() {
        let v = integrate(|x: f64| (40.0 * x).cos(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 40f64.sin() / 40.0).abs() < 1e-12);
    }

    #[test]
    fn unit_turn_over_pi_has_zero_x_displacement() {
        let (dx, dy) = integrate_position_oracle(1.0, 0.0, 0.0, 1.0, std::f64::consts::PI).unwrap();
        assert!(dx.abs() < 1e-12);
        assert!((dy - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unreachable_tolerance_is_reported() {
        let err = integrate(|x: f64| if x < 0.3 { 0.0 } else { 1.0 }, 0.0, 1.0, 1e-30).unwrap_err();
        assert!(matches!(err, Error::QuadratureTolerance { .. }));
    }
}
