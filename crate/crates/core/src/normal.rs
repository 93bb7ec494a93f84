//! Standard normal distribution functions.
//!
//! The CDF is built on rational Chebyshev approximations to erf/erfc
//! (Cody's coefficients, absolute error well below 1e-15 in double
//! precision). The quantile starts from a rational approximation and applies
//! two Halley refinement steps against the erfc-based tail probability, so
//! the round trip `cdf(quantile(u))` reproduces `u` to near machine
//! precision. Everything routes through `libm`, keeping results bit-identical
//! across platforms and usable without `std`.

use crate::error::Error;
use crate::Result;

use core::f64::consts::FRAC_1_SQRT_2;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

// Cody's rational approximation, erf branch, |x| <= 0.46875.
const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_56e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_47e3,
    1.857_777_061_846_031_53e-1,
];
const ERF_B: [f64; 4] = [
    2.360_129_095_234_412_09e1,
    2.440_246_379_344_441_73e2,
    1.282_616_526_077_372_28e3,
    2.844_236_833_439_170_62e3,
];

// Cody erfc branch, 0.46875 < x <= 4.
const ERFC_C: [f64; 9] = [
    5.641_884_969_886_700_89e-1,
    8.883_149_794_388_375_94e0,
    6.611_919_063_714_162_95e1,
    2.986_351_381_974_001_31e2,
    8.819_522_212_417_690_9e2,
    1.712_047_612_634_070_58e3,
    2.051_078_377_826_071_47e3,
    1.230_339_354_797_997_25e3,
    2.153_115_354_744_038_46e-8,
];
const ERFC_D: [f64; 8] = [
    1.574_492_611_070_983_47e1,
    1.176_939_508_913_124_99e2,
    5.371_811_018_620_098_58e2,
    1.621_389_574_566_690_19e3,
    3.290_799_235_733_459_63e3,
    4.362_619_090_143_247_16e3,
    3.439_367_674_143_721_64e3,
    1.230_339_354_803_749_42e3,
];

// Cody erfc branch, x > 4.
const ERFC_P: [f64; 6] = [
    3.053_266_349_612_323_44e-1,
    3.603_448_999_498_044_39e-1,
    1.257_817_261_112_292_46e-1,
    1.608_378_514_874_227_66e-2,
    6.587_491_615_298_378_03e-4,
    1.631_538_713_730_209_78e-2,
];
const ERFC_Q: [f64; 5] = [
    2.568_520_192_289_822_42e0,
    1.872_952_849_923_460_47e0,
    5.279_051_029_514_284_12e-1,
    6.051_834_131_244_131_91e-2,
    2.335_204_976_268_691_85e-3,
];

const ONE_OVER_SQRT_PI: f64 = 5.641_895_835_477_562_9e-1;

/// erf(x), absolute error below 1e-15.
pub fn erf(x: f64) -> f64 {
    let y = libm::fabs(x);
    if y <= 0.46875 {
        let z = if y > 1e-300 { y * y } else { 0.0 };
        let mut num = ERF_A[4] * z;
        let mut den = z;
        for i in 0..3 {
            num = (num + ERF_A[i]) * z;
            den = (den + ERF_B[i]) * z;
        }
        x * (num + ERF_A[3]) / (den + ERF_B[3])
    } else {
        let e = erfc_large(y);
        if x >= 0.0 {
            1.0 - e
        } else {
            e - 1.0
        }
    }
}

/// erfc(x) with full relative accuracy in the right tail.
pub fn erfc(x: f64) -> f64 {
    if x < -0.46875 {
        2.0 - erfc_large(-x)
    } else if x <= 0.46875 {
        1.0 - erf(x)
    } else {
        erfc_large(x)
    }
}

// erfc for y > 0.46875; underflows to 0 near y = 26.6.
fn erfc_large(y: f64) -> f64 {
    let r = if y <= 4.0 {
        let mut num = ERFC_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERFC_C[i]) * y;
            den = (den + ERFC_D[i]) * y;
        }
        (num + ERFC_C[7]) / (den + ERFC_D[7])
    } else {
        if y >= 26.7 {
            return 0.0;
        }
        let z = 1.0 / (y * y);
        let mut num = ERFC_P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + ERFC_P[i]) * z;
            den = (den + ERFC_Q[i]) * z;
        }
        let r = z * (num + ERFC_P[4]) / (den + ERFC_Q[4]);
        (ONE_OVER_SQRT_PI - r) / y
    };
    // Split exp(-y^2) into an exactly representable square and a remainder
    // so the argument rounding does not cost relative accuracy in the tail.
    let ysq = libm::trunc(y * 16.0) / 16.0;
    let del = (y - ysq) * (y + ysq);
    libm::exp(-ysq * ysq) * libm::exp(-del) * r
}

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / SQRT_2PI
}

/// Standard normal CDF, absolute error below 1e-14.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x < 0.0 {
        0.5 * erfc(-x * FRAC_1_SQRT_2)
    } else {
        1.0 - 0.5 * erfc(x * FRAC_1_SQRT_2)
    }
}

/// Upper tail probability P(Z > x) with full relative accuracy for x >= 0.
pub fn std_normal_sf(x: f64) -> f64 {
    if x >= 0.0 {
        0.5 * erfc(x * FRAC_1_SQRT_2)
    } else {
        1.0 - 0.5 * erfc(-x * FRAC_1_SQRT_2)
    }
}

// Rational initial guess for the upper-tail quantile: returns z > 0 with
// P(Z > z) ~ q for q in (0, 0.5]. Relative error about 1e-9 (Acklam).
fn upper_quantile_guess(q: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_690e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239e0,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838e0,
        -2.549_732_539_343_734e0,
        4.374_664_141_464_968e0,
        2.938_163_982_698_783e0,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996e0,
        3.754_408_661_907_416e0,
    ];
    const P_LOW: f64 = 0.02425;

    if q < P_LOW {
        let r = libm::sqrt(-2.0 * libm::log(q));
        -(((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    } else {
        // Central branch evaluated at p = 1 - q, i.e. signed offset 0.5 - q.
        let s = 0.5 - q;
        let r = s * s;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * s
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Standard normal quantile. Accepts u strictly inside (0, 1); satisfies
/// |cdf(result) - u| <= 1e-12 everywhere in that range.
pub fn std_normal_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::DomainError {
            value: u,
            domain: "(0, 1)",
        });
    }
    if u == 0.5 {
        return Ok(0.0);
    }
    // Reduce to the upper tail; 1 - u is exact for u >= 0.5 (Sterbenz).
    let (q, sign) = if u > 0.5 { (1.0 - u, 1.0) } else { (u, -1.0) };
    let mut z = upper_quantile_guess(q);
    // Halley refinement of sf(z) = q. The residual is formed from the
    // cancellation-free tail probability, so each step has full accuracy.
    for _ in 0..2 {
        let e = std_normal_sf(z) - q;
        let pdf = std_normal_pdf(z);
        if pdf == 0.0 {
            break;
        }
        let t = e / pdf;
        z += t / (1.0 - 0.5 * t * z);
    }
    Ok(sign * z)
}

/// Standard normal draw via inverse transform of one uniform.
#[inline]
pub fn draw_std_normal(rng: &mut crate::rng::Xoshiro256pp) -> f64 {
    // Uniform is strictly inside (0, 1), so the quantile cannot fail.
    match std_normal_quantile(rng.next_f64_open()) {
        Ok(z) => z,
        Err(_) => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erf_known_values() {
        // Reference values to 16 digits.
        assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-14);
        assert!((erf(0.5) - 0.520_499_877_813_046_5).abs() < 1e-14);
        assert!((erf(-1.0) + 0.842_700_792_949_714_9).abs() < 1e-14);
        assert!((erf(2.0) - 0.995_322_265_018_952_7).abs() < 1e-14);
        assert!(erf(0.0) == 0.0);
    }

    #[test]
    fn erfc_tail_relative_accuracy() {
        // erfc(3) = 2.209049699858544e-5, erfc(5) = 1.5374597944280349e-12,
        // erfc(10) = 2.0884875837625446e-45.
        assert!((erfc(3.0) / 2.209_049_699_858_544e-5 - 1.0).abs() < 1e-12);
        assert!((erfc(5.0) / 1.537_459_794_428_034_9e-12 - 1.0).abs() < 1e-12);
        assert!((erfc(10.0) / 2.088_487_583_762_544_6e-45 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cdf_matches_reference_points() {
        // Phi(1.959964) = 0.975 to 7 digits; Phi(-0.841621) = 0.2.
        assert!((std_normal_cdf(1.959_963_985) - 0.975).abs() < 1e-9);
        assert!((std_normal_cdf(-0.841_621_234) - 0.2).abs() < 1e-9);
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((std_normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-13);
        assert!((std_normal_cdf(-6.0) - 9.865_876_450_376_981e-10).abs() < 1e-19);
    }

    #[test]
    fn quantile_known_values() {
        assert!((std_normal_quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((std_normal_quantile(0.2).unwrap() + 0.841_621_233_572_914_3).abs() < 1e-9);
        assert!(std_normal_quantile(0.5).unwrap() == 0.0);
        assert!((std_normal_quantile(0.001).unwrap() + 3.090_232_306_167_814).abs() < 1e-9);
    }

    #[test]
    fn quantile_rejects_out_of_domain() {
        assert!(std_normal_quantile(0.0).is_err());
        assert!(std_normal_quantile(1.0).is_err());
        assert!(std_normal_quantile(-0.3).is_err());
        assert!(std_normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn quantile_cdf_round_trip() {
        // |cdf(quantile(u)) - u| <= 1e-12 across the whole range, including
        // deep tails on both sides.
        let mut u = 1e-12;
        while u <= 0.5 {
            for cand in [u, 1.0 - u] {
                let z = std_normal_quantile(cand).unwrap();
                assert!(
                    (std_normal_cdf(z) - cand).abs() <= 1e-12,
                    "u={cand} z={z} cdf={}",
                    std_normal_cdf(z)
                );
            }
            u *= 1.37;
        }
    }

    #[test]
    fn cdf_quantile_identity_on_plain_scale() {
        // quantile(cdf(x)) recovers x to 1e-9 wherever the f64 representation
        // of cdf(x) retains that much information; near +6 the spacing of
        // doubles around 1.0 caps what any implementation can recover.
        let mut x = -6.0;
        while x <= 6.0 {
            let u = std_normal_cdf(x);
            let back = std_normal_quantile(u).unwrap();
            let quantization = f64::EPSILON * u.max(1.0 - u).max(0.5) / std_normal_pdf(x);
            let tol = 1e-9f64.max(2.0 * quantization);
            assert!((back - x).abs() <= tol, "x={x} back={back} tol={tol}");
            x += 0.0625;
        }
    }

    #[test]
    fn sf_is_symmetric_complement() {
        for &x in &[-4.0, -1.3, -0.2, 0.0, 0.7, 2.4, 5.5] {
            let lhs = std_normal_sf(x);
            let rhs = std_normal_cdf(-x);
            assert!((lhs - rhs).abs() <= 1e-15 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn draws_have_standard_moments() {
        let mut rng = crate::rng::SeededStream::new(11, 0).rng();
        let n = 200_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let z = draw_std_normal(&mut rng);
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        // SE(mean) = 1/sqrt(n) ~ 2.24e-3; SE(var) ~ sqrt(2/n) ~ 3.2e-3.
        assert!(mean.abs() < 5.0 * 2.24e-3, "mean {mean}");
        assert!((var - 1.0).abs() < 5.0 * 3.2e-3, "var {var}");
    }
}
