//! Scalar special functions: the error function pair and the standard
//! normal density/CDF.
//!
//! `erf`/`erfc` follow W. J. Cody's rational Chebyshev approximations
//! (SPECFUN's CALERF), which are accurate to a few ulps in double precision.
//! The normal CDF is then `Phi(x) = erfc(-x / sqrt(2)) / 2`, good to well
//! below 1e-12 absolute everywhere the library needs it.

#![allow(clippy::excessive_precision)] // coefficient tables keep their published digits

const THRESH: f64 = 0.46875;
const XSMALL: f64 = 1.11e-16;
const XBIG: f64 = 26.543;
const ONE_OVER_SQRT_PI: f64 = 5.641_895_835_477_562_9e-1;

const A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_56e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_47e3,
    1.857_777_061_846_031_53e-1,
];
const B: [f64; 4] = [
    2.360_129_095_234_412_09e1,
    2.440_246_379_344_441_73e2,
    1.282_616_526_077_372_28e3,
    2.844_236_833_439_170_62e3,
];
const C: [f64; 9] = [
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
const D: [f64; 8] = [
    1.574_492_611_070_983_47e1,
    1.176_939_508_913_124_99e2,
    5.371_811_018_620_098_58e2,
    1.621_389_574_566_690_19e3,
    3.290_799_235_733_459_63e3,
    4.362_619_090_143_247_16e3,
    3.439_367_674_143_721_64e3,
    1.230_339_354_803_749_42e3,
];
const P: [f64; 6] = [
    3.053_266_349_612_323_44e-1,
    3.603_448_999_498_044_39e-1,
    1.257_817_261_112_292_46e-1,
    1.608_378_514_874_227_66e-2,
    6.587_491_615_298_378_03e-4,
    1.631_538_713_730_209_78e-2,
];
const Q: [f64; 5] = [
    2.568_520_192_289_822_42e0,
    1.872_952_849_923_460_47e0,
    5.279_051_029_514_284_12e-1,
    6.051_834_131_244_131_91e-2,
    2.335_204_976_268_691_85e-3,
];

/// `erf` on the central interval, |x| <= 0.46875.
fn erf_small(x: f64) -> f64 {
    let ysq = if x.abs() > XSMALL { x * x } else { 0.0 };
    let mut xnum = A[4] * ysq;
    let mut xden = ysq;
    for i in 0..3 {
        xnum = (xnum + A[i]) * ysq;
        xden = (xden + B[i]) * ysq;
    }
    x * (xnum + A[3]) / (xden + B[3])
}

/// `erfc(y)` for y in (0.46875, 4].
fn erfc_mid(y: f64) -> f64 {
    let mut xnum = C[8] * y;
    let mut xden = y;
    for i in 0..7 {
        xnum = (xnum + C[i]) * y;
        xden = (xden + D[i]) * y;
    }
    let result = (xnum + C[7]) / (xden + D[7]);
    // split exp(-y^2) to keep the argument exactly representable
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp() * result
}

/// `erfc(y)` for y > 4.
fn erfc_tail(y: f64) -> f64 {
    if y >= XBIG {
        return 0.0;
    }
    let ysq = 1.0 / (y * y);
    let mut xnum = P[5] * ysq;
    let mut xden = ysq;
    for i in 0..4 {
        xnum = (xnum + P[i]) * ysq;
        xden = (xden + Q[i]) * ysq;
    }
    let mut result = ysq * (xnum + P[4]) / (xden + Q[4]);
    result = (ONE_OVER_SQRT_PI - result) / y;
    let yq = (y * 16.0).trunc() / 16.0;
    let del = (y - yq) * (y + yq);
    (-yq * yq).exp() * (-del).exp() * result
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    let result = if y <= THRESH {
        return 1.0 - erf_small(x);
    } else if y <= 4.0 {
        erfc_mid(y)
    } else {
        erfc_tail(y)
    };
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    if x.abs() <= THRESH {
        erf_small(x)
    } else if x > 0.0 {
        1.0 - erfc(x)
    } else {
        erfc(-x) - 1.0
    }
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with 40-digit arithmetic (mpmath).
    const PHI_TABLE: [(f64, f64); 20] = [
        (-8.0, 6.220960574271784123516e-16),
        (-6.0, 9.865876450376981407009e-10),
        (-5.0, 2.866515718791939116738e-7),
        (-4.0, 3.167124183311992125377e-5),
        (-3.0, 1.349898031630094526652e-3),
        (-2.0, 2.275013194817920720028e-2),
        (-1.1906, 0.1169053258155364949036),
        (-1.0, 0.1586552539314570514148),
        (-0.5, 0.3085375387259868963623),
        (-0.25, 0.4012936743170762757591),
        (0.25, 0.5987063256829237242409),
        (0.5, 0.6914624612740131036377),
        (1.0, 0.8413447460685429485852),
        (1.1906, 0.8830946741844635050964),
        (2.0, 0.9772498680518207927997),
        (3.0, 0.9986501019683699054733),
        (4.0, 0.9999683287581668800787),
        (5.0, 0.9999997133484281208061),
        (6.0, 0.9999999990134123549623),
        (8.0, 0.9999999999999993779039),
    ];

    #[test]
    fn phi_at_zero_is_half() {
        assert_eq!(normal_cdf(0.0), 0.5);
    }

    #[test]
    fn phi_matches_high_precision_table() {
        for &(x, want) in &PHI_TABLE {
            let got = normal_cdf(x);
            assert!(
                (got - want).abs() <= 1e-13,
                "Phi({x}) = {got:.18e}, want {want:.18e}"
            );
        }
    }

    #[test]
    fn phi_deep_tail_relative_accuracy() {
        // Phi(-8) = 1 - Phi(8); the tail must stay accurate in relative terms
        let want = 6.220960574271784123516e-16;
        let got = normal_cdf(-8.0);
        assert!(((got - want) / want).abs() < 1e-12, "got {got:e}");
    }

    #[test]
    fn phi_symmetry_on_grid() {
        for i in 0..10_000 {
            let x = -8.0 + 16.0 * (i as f64) / 9_999.0;
            let s = normal_cdf(x) + normal_cdf(-x);
            assert!((s - 1.0).abs() <= 1e-15, "symmetry fails at {x}: {s:.18}");
        }
    }

    #[test]
    fn phi_monotone_on_grid() {
        let mut prev = normal_cdf(-8.0);
        for i in 1..10_000 {
            let x = -8.0 + 16.0 * (i as f64) / 9_999.0;
            let cur = normal_cdf(x);
            assert!(cur >= prev, "non-monotone at {x}");
            prev = cur;
        }
    }

    #[test]
    fn erf_erfc_complement() {
        for i in 0..1_000 {
            let x = -6.0 + 12.0 * (i as f64) / 999.0;
            assert!((erf(x) + erfc(x) - 1.0).abs() < 1e-14);
        }
    }
}
