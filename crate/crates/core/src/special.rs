//! Log-gamma via the Lanczos approximation.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;

// Lanczos coefficients for g = 7, n = 9.
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln(2π)/2`
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Natural log of the gamma function for `z > 0`.
///
/// Uses the reflection formula below `z = 0.5`. Returns `+∞` at `z = 0` and
/// NaN for negative or NaN input.
pub fn ln_gamma(z: f64) -> f64 {
    if z.is_nan() || z < 0.0 {
        return f64::NAN;
    }
    if z == 0.0 {
        return f64::INFINITY;
    }
    // Exact at the two zeros of ln Γ, where the series would leave ~1e-16 noise.
    if z == 1.0 || z == 2.0 {
        return 0.0;
    }
    if z < 0.5 {
        return (PI / (PI * z).sin()).ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut series = LANCZOS_COEF[0];
    for (k, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        series += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    HALF_LN_2PI + (z + 0.5) * t.ln() - t + series.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_close(got: f64, want: f64) {
        let err = (got - want).abs();
        let tol = 1e-12 * want.abs().max(1.0);
        assert!(err <= tol, "got {got}, want {want}, err {err}");
    }

    #[test]
    fn known_values() {
        check_close(ln_gamma(0.5), 0.5 * PI.ln());
        check_close(ln_gamma(3.0), 2f64.ln());
        check_close(ln_gamma(9.0), 40320f64.ln());
        check_close(ln_gamma(1.5), (0.5 * PI.sqrt()).ln());
        assert_eq!(ln_gamma(1.0), 0.0);
        assert_eq!(ln_gamma(2.0), 0.0);
    }

    #[test]
    fn factorials_up_to_170() {
        let mut ln_fact = 0.0f64;
        for n in 1..=170u32 {
            // Γ(n + 1) = n!
            ln_fact += (n as f64).ln();
            check_close(ln_gamma(n as f64 + 1.0), ln_fact);
        }
    }

    #[test]
    fn recurrence_holds_across_range() {
        let mut z = 1e-3;
        while z < 1e6 {
            let lhs = ln_gamma(z + 1.0);
            let rhs = z.ln() + ln_gamma(z);
            let tol = 1e-12 * lhs.abs().max(1.0);
            assert!((lhs - rhs).abs() <= tol, "z = {z}: {lhs} vs {rhs}");
            z *= 1.37;
        }
    }

    #[test]
    fn matches_statrs_reference() {
        let mut z = 1e-3;
        while z < 1e6 {
            check_close(ln_gamma(z), statrs::function::gamma::ln_gamma(z));
            z *= 1.21;
        }
    }

    #[test]
    fn domain_edges() {
        assert!(ln_gamma(-1.0).is_nan());
        assert!(ln_gamma(f64::NAN).is_nan());
        assert_eq!(ln_gamma(0.0), f64::INFINITY);
    }
}
