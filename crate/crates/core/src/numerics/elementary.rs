//! Scalar exponential, logistic and hyperbolic tangent.
//!
//! The platform `exp` and `tanh` dominate the cost of a recurrent graph model
//! whose every convolution ends in `tanh`. These versions avoid library calls,
//! stay within a few ulps of the platform results and depend on nothing but
//! IEEE arithmetic, so they are also identical on every platform.

use std::f64::consts::LN_2;

/// `2^(j/64)` for `j = 0..64`, correctly rounded.
const POW2_64THS: [f64; 64] = [
    1.0, 1.0108892860517005, 1.0218971486541166, 1.0330248790212284,
    1.0442737824274138, 1.0556451783605572, 1.0671404006768237, 1.0787607977571199,
    1.0905077326652577, 1.102382583307841, 1.1143867425958924, 1.1265216186082418,
    1.1387886347566916, 1.1511892299529827, 1.1637248587775775, 1.1763969916502812,
    1.189207115002721, 1.202156731452703, 1.215247359980469, 1.22848053610687,
    1.241857812073484, 1.255380757024691, 1.2690509571917332, 1.2828700160787783,
    1.2968395546510096, 1.3109612115247644, 1.3252366431597413, 1.339667524053303,
    1.3542555469368927, 1.3690024229745905, 1.383909881963832, 1.3989796725383112,
    1.4142135623730951, 1.42961333839197, 1.4451808069770467, 1.460917794180647,
    1.4768261459394993, 1.4929077282912648, 1.5091644275934228, 1.5255981507445384,
    1.5422108254079407, 1.559004400237837, 1.5759808451078865, 1.593142151342267,
    1.6104903319492543, 1.6280274218573478, 1.645755478153965, 1.6636765803267364,
    1.681792830507429, 1.7001063537185235, 1.718619298122478, 1.7373338352737062,
    1.7562521603732995, 1.7753764925265212, 1.7947090750031072, 1.8142521755003989,
    1.8340080864093424, 1.8539791250833855, 1.8741676341103, 1.8945759815869656,
    1.9152065613971474, 1.9360617934922943, 1.9571441241754002, 1.978456026387951,
];

// ln 2 / 64 split so that `n · HI` is exact for every reachable `n`
const LN2_64_HI: f64 = 6.931_471_803_691_238_2e-1 / 64.0;
const LN2_64_LO: f64 = 1.908_214_929_270_587_7e-10 / 64.0;
// adding 1.5 · 2⁵² rounds to an integer held in the low mantissa bits
const ROUND: f64 = 6_755_399_441_055_744.0;

/// `eˣ`. Reduces `x = (64k + j) · ln 2 / 64 + r` with `|r| ≤ ln 2 / 128` and
/// evaluates `2ᵏ · 2^(j/64) · eʳ` with a degree-5 polynomial for `eʳ − 1`.
#[inline]
pub fn exp(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    if x > 709.0 {
        return f64::INFINITY;
    }
    if x < -708.0 {
        return 0.0;
    }
    exp_in_range(x)
}

/// [`exp`] for `x ∈ [−708, 709]`.
#[inline(always)]
fn exp_in_range(x: f64) -> f64 {
    let y = x * (64.0 / LN_2) + ROUND;
    let n = y - ROUND;
    let r = (x - n * LN2_64_HI) - n * LN2_64_LO;
    let bits = y.to_bits().wrapping_sub(ROUND.to_bits()) as i64;
    let (k, j) = (bits >> 6, (bits & 63) as usize);
    let p = r * (1.0 + r * (0.5 + r * (1.0 / 6.0 + r * (1.0 / 24.0 + r * (1.0 / 120.0)))));
    let t = POW2_64THS[j];
    (t + t * p) * f64::from_bits(((k + 1023) as u64) << 52)
}

/// Odd Taylor coefficients of `tanh` through `x²¹`.
const TANH_SERIES: [f64; 11] = [
    1.0,
    -1.0 / 3.0,
    2.0 / 15.0,
    -17.0 / 315.0,
    62.0 / 2835.0,
    -1382.0 / 155_925.0,
    21_844.0 / 6_081_075.0,
    -929_569.0 / 638_512_875.0,
    6_404_582.0 / 10_854_718_875.0,
    -443_861_162.0 / 1_856_156_927_625.0,
    18_888_466_084.0 / 194_896_477_400_625.0,
];

/// Hyperbolic tangent: the Taylor series below `|x| = 1/4`, where it has
/// converged to below half an ulp, and `1 − 2/(e^{2|x|} + 1)` above.
#[inline]
pub fn tanh(x: f64) -> f64 {
    let a = x.abs();
    if a < 0.25 {
        let s = x * x;
        let mut p = TANH_SERIES[10];
        for &c in TANH_SERIES[..10].iter().rev() {
            p = p * s + c;
        }
        return x * p;
    }
    if a < 20.0 {
        let t = 1.0 - 2.0 / (exp_in_range(2.0 * a) + 1.0);
        return t.copysign(x);
    }
    if x.is_nan() {
        x
    } else {
        1.0f64.copysign(x)
    }
}

/// Logistic function `1 / (1 + e⁻ˣ)`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + exp(-x))
}
