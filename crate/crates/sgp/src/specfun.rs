//! Special-function primitives: `ln_gamma`, `polygamma` (orders 0..3) and the
//! log-scaled modified Bessel function `log_bessel_i`.
//!
//! Everything downstream works in the log domain, so these return logs (or the
//! function itself for polygamma) and are written to stay finite far past the
//! point where the linear-domain values overflow. The transition density needs
//! `I_q(x)` with orders up to a few hundred (q = 2λ/σ² − 1) and arguments up to
//! a few thousand; the Fisher-information sweep pushes orders to 1e5.
//!
//! Algorithm notes:
//! - `ln_gamma`: Stirling's series with Bernoulli coefficients for x ≥ 12,
//!   upward recurrence below. log Γ has zeros at x = 1 and x = 2 where a shifted
//!   Stirling evaluation only achieves absolute accuracy, so intervals around
//!   those zeros are covered by Taylor expansions of log Γ(1+ε) and log Γ(2+ε)
//!   (coefficients ζ(k)/k, cf. DLMF 5.7.3), keeping the relative error ≤ 1e−13
//!   everywhere on [1e−3, 1e6].
//! - `polygamma`: recurrence shift to x ≥ 10, then the standard asymptotic
//!   series with Bernoulli numbers (Abramowitz & Stegun 6.4.11).
//! - `log_bessel_i`: three regimes. Orders ≥ 30 use Olver's uniform asymptotic
//!   expansion in the order (DLMF 10.41.3) with the polynomials U_0..U_10, which
//!   is uniformly accurate in the argument. Small orders use the power series,
//!   summed outward from its largest term in scaled form so that arguments up to
//!   ~1e4 neither overflow nor lose the head of the sum; for x ≥ max(100, 3q²)
//!   the classical large-argument expansion (DLMF 10.40.1) is cheaper and the
//!   series is long, so that takes over.

/// B_{2k} / (2k(2k−1)) for k = 1..9: coefficients of Stirling's series for log Γ.
const STIRLING: [f64; 9] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
    43_867.0 / 244_188.0,
];

// Taylor coefficients of log Γ(1+ε) = −γε + Σ_{k≥2} (−1)^k ζ(k)/k · ε^k and of
// log Γ(2+ε) = (1−γ)ε + Σ_{k≥2} (−1)^k (ζ(k)−1)/k · ε^k, ascending from the
// linear term. 40 terms hold 1e−13 relative accuracy out to |ε| = 0.75.
const LNGAMMA_TAYLOR_1: [f64; 40] = [
    -0.5772156649015329,
    0.8224670334241132,
    -0.40068563438653143,
    0.27058080842778454,
    -0.20738555102867398,
    0.1695571769974082,
    -0.1440498967688461,
    0.12550966952474304,
    -0.11133426586956469,
    0.1000994575127818,
    -0.09095401714582904,
    0.083353840546109,
    -0.0769325164113522,
    0.07143294629536133,
    -0.06666870588242046,
    0.06250095514121304,
    -0.058823978658684585,
    0.055555767627403614,
    -0.05263167937961666,
    0.05000004769810169,
    -0.047619070330142226,
    0.04545455629320467,
    -0.04347826605304026,
    0.04166666915034121,
    -0.04000000119214014,
    0.03846153903467518,
    -0.037037037312989324,
    0.035714285847333355,
    -0.034482758684919304,
    0.03333333336437758,
    -0.03225806453115042,
    0.03125000000727597,
    -0.030303030306558044,
    0.029411764707594344,
    -0.02857142857226011,
    0.027777777778181998,
    -0.027027027027223673,
    0.02631578947377995,
    -0.025641025641072283,
    0.025000000000022737,
];
const LNGAMMA_TAYLOR_2: [f64; 40] = [
    0.42278433509846713,
    0.3224670334241132,
    -0.0673523010531981,
    0.020580808427784546,
    -0.007385551028673986,
    0.0028905103307415234,
    -0.001192753911703261,
    0.0005096695247430425,
    -0.00022315475845357939,
    9.945751278180853e-05,
    -4.492623673813314e-05,
    2.050721277567069e-05,
    -9.439488275268397e-06,
    4.374866789907488e-06,
    -2.039215753801366e-06,
    9.55141213040742e-07,
    -4.492469198764566e-07,
    2.1207184805554665e-07,
    -1.0043224823968099e-07,
    4.7698101693639804e-08,
    -2.2711094608943164e-08,
    1.0838659214896955e-08,
    -5.183475041970047e-09,
    2.4836745438024785e-09,
    -1.1921401405860912e-09,
    5.731367241678862e-10,
    -2.7595228851242334e-10,
    1.330476437424449e-10,
    -6.4229645638381e-11,
    3.1044247747322276e-11,
    -1.5021384080754142e-11,
    7.275974480239079e-12,
    -3.527742476575915e-12,
    1.711991790559618e-12,
    -8.315385841420285e-13,
    4.04220052528944e-13,
    -1.9664756310966165e-13,
    9.573630387838556e-14,
    -4.6640760264283744e-14,
    2.2737369600659724e-14,
];

/// Natural log of the gamma function for x > 0.
///
/// Relative error ≤ 1e−13 on [1e−3, 1e6], including near the zeros of
/// log Γ at x = 1 and x = 2.
///
/// Panics on x ≤ 0 or non-finite x.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x.is_finite() && x > 0.0, "ln_gamma: domain error, x = {x}");
    if (0.75..=1.25).contains(&x) {
        return taylor_ascending(&LNGAMMA_TAYLOR_1, x - 1.0);
    }
    if (1.25..=2.75).contains(&x) {
        return taylor_ascending(&LNGAMMA_TAYLOR_2, x - 2.0);
    }
    if x >= 12.0 {
        return stirling(x);
    }
    // Shift up to the Stirling range: log Γ(x) = log Γ(x+m) − Σ log(x+j).
    let mut shift = 0.0;
    let mut y = x;
    while y < 12.0 {
        shift += y.ln();
        y += 1.0;
    }
    stirling(y) - shift
}

fn stirling(x: f64) -> f64 {
    const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
    let inv2 = 1.0 / (x * x);
    let mut series = 0.0;
    let mut pw = 1.0 / x;
    for c in STIRLING {
        series += c * pw;
        pw *= inv2;
    }
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + series
}

/// Σ c_k ε^{k+1}: Horner evaluation of a Taylor tail that starts at the linear term.
fn taylor_ascending(coeffs: &[f64], eps: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * eps + c;
    }
    acc * eps
}

/// Bernoulli numbers B_2, B_4, ..., B_14.
const B2K: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

/// ψ^{(order)}(x) for order 0..3 and x > 0.
///
/// Relative error ≤ 1e−10 on x ∈ [1e−2, 1e5] (measured ≤ 2e−13).
///
/// Panics on order > 3, x ≤ 0 or non-finite x.
pub fn polygamma(order: u32, x: f64) -> f64 {
    assert!(order <= 3, "polygamma: order {order} not supported");
    assert!(x.is_finite() && x > 0.0, "polygamma: domain error, x = {x}");
    // ψ^{(m)}(x) = ψ^{(m)}(x+1) − (−1)^m m! / x^{m+1}
    let m = order as i32;
    let fact_m = [1.0, 1.0, 2.0, 6.0][order as usize];
    let sign_m = if m % 2 == 0 { 1.0 } else { -1.0 };
    let mut shift = 0.0;
    let mut y = x;
    while y < 10.0 {
        shift -= sign_m * fact_m / y.powi(m + 1);
        y += 1.0;
    }
    shift + polygamma_asymptotic(order, y)
}

fn polygamma_asymptotic(order: u32, x: f64) -> f64 {
    let inv2 = 1.0 / (x * x);
    match order {
        // ψ(x) = ln x − 1/(2x) − Σ B_{2k}/(2k x^{2k})
        0 => {
            let mut series = 0.0;
            let mut pw = inv2;
            for (k, b) in B2K.iter().enumerate() {
                series += b / (2 * (k + 1)) as f64 * pw;
                pw *= inv2;
            }
            x.ln() - 0.5 / x - series
        }
        // ψ^{(m)}(x) = (−1)^{m−1} [ (m−1)!/x^m + m!/(2x^{m+1})
        //              + Σ B_{2k} (2k+m−1)!/(2k)! / x^{2k+m} ]
        m => {
            let m = m as usize;
            let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
            let lead = fact(m - 1) / x.powi(m as i32) + fact(m) / (2.0 * x.powi(m as i32 + 1));
            let mut series = 0.0;
            let mut pw = x.powi(-(m as i32 + 2));
            for (i, b) in B2K.iter().enumerate() {
                let two_k = 2 * (i + 1);
                series += b * fact(two_k + m - 1) / fact(two_k) * pw;
                pw *= inv2;
            }
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            sign * (lead + series)
        }
    }
}

// Olver's polynomials U_0..U_10 as dense coefficient arrays, ascending powers of
// p = 1/√(1+z²). U_k has parity k and degree 3k; generated exactly from the
// recurrence U_{k+1} = ½t²(1−t²)U_k′ + ⅛∫₀ᵗ(1−5s²)U_k ds (DLMF 10.41.4).
const U0: [f64; 1] = [1.0];
const U1: [f64; 4] = [0.0, 0.125, 0.0, -0.20833333333333334];
const U2: [f64; 7] = [0.0, 0.0, 0.0703125, 0.0, -0.4010416666666667, 0.0, 0.3342013888888889];
const U3: [f64; 10] = [
    0.0,
    0.0,
    0.0,
    0.0732421875,
    0.0,
    -0.8912109375,
    0.0,
    1.8464626736111112,
    0.0,
    -1.0258125964506173,
];
const U4: [f64; 13] = [
    0.0,
    0.0,
    0.0,
    0.0,
    0.112152099609375,
    0.0,
    -2.3640869140625,
    0.0,
    8.78912353515625,
    0.0,
    -11.207002616222994,
    0.0,
    4.669584423426247,
];
const U5: [f64; 16] = [
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.22710800170898438,
    0.0,
    -7.368794359479632,
    0.0,
    42.53499874538846,
    0.0,
    -91.81824154324002,
    0.0,
    84.63621767460073,
    0.0,
    -28.212072558200244,
];
const U6: [f64; 19] = [
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.5725014209747314,
    0.0,
    -26.491430486951554,
    0.0,
    218.1905117442116,
    0.0,
    -699.5796273761325,
    0.0,
    1059.9904525279999,
    0.0,
    -765.2524681411817,
    0.0,
    212.57013003921713,
];
const U7: [f64; 22] = [
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    1.7277275025844574,
    0.0,
    -108.09091978839466,
    0.0,
    1200.9029132163525,
    0.0,
    -5305.646978613403,
    0.0,
    11655.393336864534,
    0.0,
    -13586.550006434138,
    0.0,
    8061.722181737309,
    0.0,
    -1919.457662318407,
];
const U8: [f64; 25] = [
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    6.074042001273483,
    0.0,
    -493.915304773088,
    0.0,
    7109.514302489364,
    0.0,
    -41192.65496889755,
    0.0,
    122200.46498301746,
    0.0,
    -203400.17728041555,
    0.0,
    192547.00123253153,
    0.0,
    -96980.59838863752,
    0.0,
    20204.29133096615,
];
const U9: [f64; 28] = [
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    24.380529699556064,
    0.0,
    -2499.8304818112097,
    0.0,
    45218.76898136273,
    0.0,
    -331645.1724845636,
    0.0,
    1268365.2733216248,
    0.0,
    -2813563.226586534,
    0.0,
    3763271.297656404,
    0.0,
    -2998015.9185381066,
    0.0,
    1311763.6146629772,
    0.0,
    -242919.18790055133,
];
const U10: [f64; 31] = [
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    0.0,
    110.01714026924674,
    0.0,
    -13886.08975371704,
    0.0,
    308186.4046126624,
    0.0,
    -2785618.1280864547,
    0.0,
    13288767.166421818,
    0.0,
    -37567176.66076335,
    0.0,
    66344512.27472903,
    0.0,
    -74105148.21153265,
    0.0,
    50952602.49266464,
    0.0,
    -19706819.118432228,
    0.0,
    3284469.853072038,
];

const U_POLYS: [&[f64]; 11] = [
    &U0, &U1, &U2, &U3, &U4, &U5, &U6, &U7, &U8, &U9, &U10,
];

fn horner(coeffs: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * t + c;
    }
    acc
}

/// log I_order(x) for order ≥ 0, x ≥ 0, finite for x up to 1e6 and orders up
/// to 1e5. Relative error of the log ≤ 1e−9 (measured ≤ 3e−13 against a
/// 40-digit reference away from the zero at (0, 0)).
///
/// Returns −∞ for x = 0 with order > 0. Panics on negative or non-finite input.
pub fn log_bessel_i(order: f64, x: f64) -> f64 {
    assert!(
        order.is_finite() && order >= 0.0 && x.is_finite() && x >= 0.0,
        "log_bessel_i: domain error, order = {order}, x = {x}"
    );
    if x == 0.0 {
        return if order == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if order >= 30.0 {
        return log_bessel_i_uniform(order, x);
    }
    if x >= (3.0 * order * order).max(100.0) {
        return log_bessel_i_large_x(order, x);
    }
    log_bessel_i_series(order, x)
}

/// Olver's uniform expansion: I_ν(νz) ~ e^{νη} / (√(2πν) (1+z²)^{1/4}) Σ U_k(p)/ν^k
/// with η = √(1+z²) + log(z / (1 + √(1+z²))), p = 1/√(1+z²).
fn log_bessel_i_uniform(v: f64, x: f64) -> f64 {
    const LN_2PI: f64 = 1.837_877_066_409_345_6;
    let z = x / v;
    let r = 1.0f64.hypot(z);
    let eta = r + (z / (1.0 + r)).ln();
    let p = 1.0 / r;
    let mut s = 0.0;
    let mut vk = 1.0;
    for u in U_POLYS {
        s += horner(u, p) / vk;
        vk *= v;
    }
    v * eta - 0.5 * (LN_2PI + v.ln()) - 0.25 * (z * z).ln_1p() + s.ln()
}

/// Power series Σ_k (x/2)^{2k+q} / (k! Γ(k+q+1)), summed outward from its peak
/// term in units of that term so the accumulator stays O(1).
fn log_bessel_i_series(q: f64, x: f64) -> f64 {
    let h = 0.5 * x;
    let peak = (((q * q + x * x).sqrt() - q) * 0.5 - 1.0).max(0.0) as usize;
    let log_t_peak =
        (2 * peak) as f64 * h.ln() + q * h.ln() - ln_gamma(peak as f64 + 1.0) - ln_gamma(peak as f64 + q + 1.0);
    let mut s = 1.0;
    let mut t = 1.0;
    let mut k = peak as f64;
    loop {
        k += 1.0;
        t *= h * h / (k * (k + q));
        s += t;
        if t < 1e-18 * s {
            break;
        }
    }
    t = 1.0;
    k = peak as f64;
    while k > 0.0 {
        t *= k * (k + q) / (h * h);
        k -= 1.0;
        s += t;
        if t < 1e-18 * s {
            break;
        }
    }
    log_t_peak + s.ln()
}

/// Large-argument expansion I_q(x) ~ e^x/√(2πx) · Σ_k (−1)^k a_k(q)/x^k,
/// a_k(q) = (4q²−1)(4q²−9)⋯(4q²−(2k−1)²)/(8^k k!). Used only where q² ≤ x/3,
/// so the alternating tail stays decreasing long past machine precision.
fn log_bessel_i_large_x(q: f64, x: f64) -> f64 {
    const LN_2PI: f64 = 1.837_877_066_409_345_6;
    let mu = 4.0 * q * q;
    let mut s = 1.0;
    let mut t = 1.0;
    let mut k = 1.0;
    loop {
        t *= -(mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k * x);
        s += t;
        if t.abs() < 1e-18 * s.abs() || k > 200.0 {
            break;
        }
        k += 1.0;
    }
    x - 0.5 * (LN_2PI + x.ln()) + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Reference values computed with 40-digit arithmetic (mpmath).

    #[test]
    fn ln_gamma_spot_values() {
        assert_eq!(ln_gamma(1.0), 0.0);
        assert_eq!(ln_gamma(2.0), 0.0);
        assert_relative_eq!(ln_gamma(0.5), 0.572364942924700087072, max_relative = 1e-13);
        assert_relative_eq!(ln_gamma(10.0), 362880.0f64.ln(), max_relative = 1e-13);
        assert_relative_eq!(ln_gamma(1e-3), 6.907178885383853661684, max_relative = 1e-13);
        assert_relative_eq!(ln_gamma(12.3), 18.23898340709224369583, max_relative = 1e-13);
        assert_relative_eq!(ln_gamma(1e6), 12815504.56914761165998, max_relative = 1e-13);
    }

    #[test]
    fn ln_gamma_near_zeros_keeps_relative_accuracy() {
        // log Γ crosses zero at 1 and 2; these magnitudes are ~1e-2 and the
        // Taylor patches must hold them to relative, not absolute, accuracy.
        assert_relative_eq!(ln_gamma(1.02), -0.011218489329770086, max_relative = 1e-13);
        assert_relative_eq!(ln_gamma(1.98), -0.008326157753441627, max_relative = 1e-13);
        assert_relative_eq!(ln_gamma(2.10), 0.045437738544485136, max_relative = 1e-13);
        // patch edges against the recurrence branch
        assert_relative_eq!(ln_gamma(0.75), 0.20328095143129538, max_relative = 1e-13);
        assert_relative_eq!(ln_gamma(2.75), 0.47521466691493713, max_relative = 1e-13);
    }

    #[test]
    fn ln_gamma_functional_equation() {
        for i in 0..200 {
            let x = 1e-2 + (i as f64) * 0.37;
            let lhs = ln_gamma(x + 1.0);
            let rhs = ln_gamma(x) + x.ln();
            assert!(
                (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0),
                "recurrence failed at x = {x}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    #[should_panic(expected = "domain error")]
    fn ln_gamma_rejects_nonpositive() {
        ln_gamma(0.0);
    }

    #[test]
    fn polygamma_spot_values() {
        assert_relative_eq!(polygamma(0, 1.0), -0.5772156649015328606065, max_relative = 1e-12);
        assert_relative_eq!(polygamma(1, 1.0), 1.644934066848226436472, max_relative = 1e-12);
        assert_relative_eq!(polygamma(2, 1.0), -2.404113806319188570799, max_relative = 1e-12);
        assert_relative_eq!(polygamma(3, 1.0), 6.493939402266829149096, max_relative = 1e-12);
        assert_relative_eq!(polygamma(0, 0.5), -1.963510026021423479441, max_relative = 1e-12);
        assert_relative_eq!(polygamma(0, 2.5), 0.7031566406452431872257, max_relative = 1e-12);
        assert_relative_eq!(polygamma(1, 100.0), 0.01005016666333357139525, max_relative = 1e-12);
        assert_relative_eq!(polygamma(1, 0.02), 2501.598118191867962527, max_relative = 1e-12);
        assert_relative_eq!(polygamma(2, 7.7), -0.01919812143532195986659, max_relative = 1e-12);
        assert_relative_eq!(polygamma(3, 0.3), 743.1417646550497770878, max_relative = 1e-12);
    }

    #[test]
    fn trigamma_is_positive() {
        for i in 0..60 {
            let x = 1e-2 * 1.3f64.powi(i);
            assert!(polygamma(1, x) > 0.0, "trigamma({x}) nonpositive");
        }
    }

    #[test]
    fn digamma_recurrence() {
        for i in 0..50 {
            let x = 0.1 + (i as f64) * 199.9;
            let lhs = polygamma(0, x + 1.0) - polygamma(0, x);
            assert_relative_eq!(lhs, 1.0 / x, max_relative = 1e-10);
        }
    }

    #[test]
    fn log_bessel_i_spot_values() {
        assert_eq!(log_bessel_i(0.0, 0.0), 0.0);
        assert_eq!(log_bessel_i(3.0, 0.0), f64::NEG_INFINITY);
        assert_relative_eq!(log_bessel_i(1.0, 2.0), 0.4641344735461597442559, max_relative = 1e-12);
        assert_relative_eq!(log_bessel_i(0.0, 0.5), 0.06154971918548130394128, max_relative = 1e-12);
        // half-order closed form I_{1/2}(x) = √(2/(πx)) sinh x
        let closed = (2.0 / (std::f64::consts::PI * 2.0)).sqrt() * 2.0f64.sinh();
        assert_relative_eq!(log_bessel_i(0.5, 2.0), closed.ln(), max_relative = 1e-12);
        assert_relative_eq!(log_bessel_i(0.5, 0.2), -1.023852508576550600391, max_relative = 1e-12);
        assert_relative_eq!(log_bessel_i(7.3, 55.0), 51.59148850818795423885, max_relative = 1e-12);
        assert_relative_eq!(log_bessel_i(23.0, 78.8), 72.34513823733032067473, max_relative = 1e-12);
        assert_relative_eq!(log_bessel_i(3.5, 1e-3), -29.05689512368417513782, max_relative = 1e-12);
        // the orders and arguments the transition density actually hits
        assert_relative_eq!(log_bessel_i(99.0, 2000.0), 1992.830310551461724957, max_relative = 1e-12);
        assert_relative_eq!(log_bessel_i(599.0, 1971.0), 1875.927736818620530915, max_relative = 1e-12);
        // deep-underflow order/argument corner
        assert_relative_eq!(
            log_bessel_i(100000.0, 10000.0),
            -199330.2167082451474675,
            max_relative = 1e-12
        );
    }

    #[test]
    fn log_bessel_i_regions_agree() {
        // Uniform expansion vs direct series on both sides of the order cutoff,
        // and large-x expansion vs series around its cutoff.
        for &(q, x) in &[
            (29.0, 40.0),
            (31.0, 40.0),
            (30.0, 900.0),
            (45.0, 10.0),
            (60.0, 3600.0),
            (5.0, 99.0),
            (5.0, 101.0),
            (0.0, 150.0),
            (12.0, 500.0),
        ] {
            let series = log_bessel_i_series(q, x);
            let other = if q >= 30.0 {
                log_bessel_i_uniform(q, x)
            } else {
                log_bessel_i_large_x(q, x)
            };
            assert_relative_eq!(series, other, max_relative = 1e-9);
        }
    }

    #[test]
    fn bessel_recurrence_in_linear_domain() {
        // I_{q−1}(x) − I_{q+1}(x) = (2q/x) I_q(x)
        let mut cases = Vec::new();
        for i in 1..=50 {
            let q = 0.5 + (i as f64) * 0.93;
            let x = 0.3 + (i as f64) * 3.7;
            cases.push((q, x));
        }
        for (q, x) in cases {
            let lo = log_bessel_i(q - 1.0, x);
            let hi = log_bessel_i(q + 1.0, x);
            let mid = log_bessel_i(q, x);
            if lo.max(hi).max(mid) < -500.0 {
                continue;
            }
            // scale by the largest term to stay in range
            let m = lo.max(hi).max(mid);
            let lhs = (lo - m).exp() - (hi - m).exp();
            let rhs = (2.0 * q / x) * (mid - m).exp();
            assert!(
                (lhs - rhs).abs() <= 1e-7 * rhs.abs(),
                "recurrence failed at q = {q}, x = {x}"
            );
        }
    }
}
