use std::f64::consts::PI;

use super::diff::{richardson_central, shape_step};
use super::{FnEvalResult, EPS, FPMIN};
use crate::error::{Error, Result};

const MAX_ITER: usize = 100_000;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
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

fn check_positive(context: &'static str, name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(context, format!("{name} = {v}, expected > 0")))
    }
}

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    check_positive("log_gamma", "x", x)?;
    Ok(ln_gamma_unchecked(x))
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // ln Γ(x) = ln Γ(x + 1) − ln x keeps the Lanczos sum away from its pole.
        return ln_gamma_unchecked(x + 1.0) - x.ln();
    }
    if x >= 10.0 {
        // Stirling series; the first omitted term is below 1e-15 at x = 10.
        let r = 1.0 / x;
        let r2 = r * r;
        let series = r
            * (1.0 / 12.0
                - r2 * (1.0 / 360.0
                    - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 * (1.0 / 1188.0)))));
        return (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + series;
    }
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Digamma ψ(x) = d/dx ln Γ(x) for `x > 0`.
///
/// Shifts the argument above 6 with ψ(x) = ψ(x+1) − 1/x, then sums the
/// asymptotic expansion.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive("digamma", "x", x)?;
    Ok(digamma_unchecked(x))
}

pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 6.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let r = 1.0 / x;
    let r2 = r * r;
    let tail = r2
        * (1.0 / 12.0
            - r2 * (1.0 / 120.0
                - r2 * (1.0 / 252.0
                    - r2 * (1.0 / 240.0 - r2 * (1.0 / 132.0 - r2 * (691.0 / 32760.0))))));
    shift + x.ln() - 0.5 * r - tail
}

fn check_gamma_args(context: &'static str, a: f64, x: f64) -> Result<()> {
    check_positive(context, "a", a)?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::domain(context, format!("x = {x}, expected >= 0")));
    }
    Ok(())
}

/// ln of x^a e^{-x} / Γ(a), the common prefactor of both incomplete-gamma expansions.
fn ln_prefactor(a: f64, x: f64) -> f64 {
    a * x.ln() - x - ln_gamma_unchecked(a)
}

/// Power series Σ_n x^n / (a (a+1) ⋯ (a+n)) together with its a-derivative.
fn lower_series(a: f64, x: f64) -> Result<(f64, f64)> {
    let mut term = 1.0 / a;
    let mut harmonic = 1.0 / a;
    let mut sum = term;
    let mut dsum = -term * harmonic;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        harmonic += 1.0 / ap;
        sum += term;
        let dterm = -term * harmonic;
        dsum += dterm;
        if ap > x && term < sum * EPS && dterm.abs() <= dsum.abs() * EPS + f64::MIN_POSITIVE {
            return Ok((sum, dsum));
        }
    }
    Err(Error::Convergence("incomplete gamma series"))
}

/// Modified Lentz evaluation of the continued fraction h with Q(a, x) = prefactor · h.
fn upper_fraction(a: f64, x: f64) -> Result<f64> {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::Convergence("incomplete gamma continued fraction"))
}

fn uses_series(a: f64, x: f64) -> bool {
    x < a + 1.0
}

/// Regularized lower incomplete gamma P(a, x).
pub fn reg_gamma_p(a: f64, x: f64) -> Result<f64> {
    check_gamma_args("reg_gamma_p", a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if uses_series(a, x) {
        let (s, _) = lower_series(a, x)?;
        Ok((ln_prefactor(a, x).exp() * s).min(1.0))
    } else {
        let h = upper_fraction(a, x)?;
        Ok((1.0 - ln_prefactor(a, x).exp() * h).max(0.0))
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 − P(a, x).
pub fn reg_gamma_q(a: f64, x: f64) -> Result<f64> {
    check_gamma_args("reg_gamma_q", a, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if uses_series(a, x) {
        let (s, _) = lower_series(a, x)?;
        Ok((1.0 - ln_prefactor(a, x).exp() * s).max(0.0))
    } else {
        let h = upper_fraction(a, x)?;
        Ok((ln_prefactor(a, x).exp() * h).min(1.0))
    }
}

/// ∂P(a, x)/∂a from the term-by-term differentiated power series.
///
/// Valid for every `x >= 0` but only cheap and well conditioned for `x < a + 1`.
pub fn grad_reg_gamma_p_wrt_a_series(a: f64, x: f64) -> Result<f64> {
    check_gamma_args("grad_reg_gamma_p_wrt_a", a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    let (s, ds) = lower_series(a, x)?;
    Ok(ln_prefactor(a, x).exp() * ((x.ln() - digamma_unchecked(a)) * s + ds))
}

/// ∂P(a, x)/∂a by Richardson-extrapolated central differences.
///
/// Differences P itself below the mode and −Q above it, so the differenced
/// quantity is always the tail that is computed without cancellation.
pub fn grad_reg_gamma_p_wrt_a_fd(a: f64, x: f64) -> Result<FnEvalResult> {
    check_gamma_args("grad_reg_gamma_p_wrt_a", a, x)?;
    if x == 0.0 {
        return Ok(FnEvalResult {
            value: 0.0,
            est_abs_error: 0.0,
        });
    }
    let h = shape_step(a);
    // Evaluate once at the extreme steps so convergence failures surface as errors.
    reg_gamma_p(a + h, x)?;
    reg_gamma_p(a - h, x)?;
    let r = if uses_series(a, x) {
        richardson_central(|s| reg_gamma_p(s, x).unwrap_or(f64::NAN), a, h)
    } else {
        let r = richardson_central(|s| reg_gamma_q(s, x).unwrap_or(f64::NAN), a, h);
        FnEvalResult {
            value: -r.value,
            ..r
        }
    };
    if r.value.is_finite() {
        Ok(r)
    } else {
        Err(Error::Convergence("incomplete gamma shape derivative"))
    }
}

/// ∂P(a, x)/∂a: differentiated series for `x < a + 1`, Richardson differences otherwise.
pub fn grad_reg_gamma_p_wrt_a(a: f64, x: f64) -> Result<f64> {
    check_gamma_args("grad_reg_gamma_p_wrt_a", a, x)?;
    if uses_series(a, x) {
        grad_reg_gamma_p_wrt_a_series(a, x)
    } else {
        Ok(grad_reg_gamma_p_wrt_a_fd(a, x)?.value)
    }
}

/// (∂P(a, x)/∂a) divided by the Gamma(a, 1) density at x.
///
/// Evaluated in scaled form so that it stays finite where both numerator and
/// density under- or overflow (x → 0 with tiny a, or far in the upper tail).
pub(crate) fn gamma_shape_cdf_ratio(a: f64, x: f64) -> Result<f64> {
    check_gamma_args("gamma shape nabla", a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if uses_series(a, x) {
        let (s, ds) = lower_series(a, x)?;
        Ok(x * ((x.ln() - digamma_unchecked(a)) * s + ds))
    } else {
        let frac = upper_fraction(a, x)?;
        let h = shape_step(a);
        upper_fraction(a + h, x)?;
        upper_fraction(a - h, x)?;
        let ln_q = |s: f64| ln_prefactor(s, x) + upper_fraction(s, x).map_or(f64::NAN, f64::ln);
        let dln_q = richardson_central(ln_q, a, h).value;
        // ∂P/∂a = −Q ∂ln Q/∂a and Q / density = x · frac.
        Ok(-x * frac * dln_q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER: f64 = 0.577_215_664_901_532_9;

    #[test]
    fn log_gamma_known_values() {
        assert!(log_gamma(1.0).unwrap().abs() < 1e-14);
        assert!((log_gamma(0.5).unwrap() - 0.5 * PI.ln()).abs() < 1e-14);
        // ln 9!
        assert!((log_gamma(10.0).unwrap() - 362_880f64.ln()).abs() < 1e-12);
        assert!((log_gamma(2.0).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn log_gamma_recurrence_across_branches() {
        for &x in &[1e-3, 0.2, 0.7, 3.3, 9.5, 9.999, 10.0, 57.1, 1e4, 1e6] {
            let lhs = log_gamma(x + 1.0).unwrap();
            let rhs = log_gamma(x).unwrap() + x.ln();
            assert!(
                (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0),
                "x={x}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn log_gamma_rejects_nonpositive() {
        assert!(matches!(log_gamma(0.0), Err(Error::Domain { .. })));
        assert!(log_gamma(-1.5).is_err());
        assert!(log_gamma(f64::NAN).is_err());
    }

    #[test]
    fn digamma_known_values() {
        assert!((digamma(1.0).unwrap() + EULER).abs() < 1e-12);
        assert!((digamma(2.0).unwrap() - (1.0 - EULER)).abs() < 1e-12);
        // -γ − 2 ln 2, confirmed against a high-precision quadrature of the
        // integral representation.
        assert!((digamma(0.5).unwrap() - (-1.963_510_026_021_423_5)).abs() < 1e-10);
        assert!(digamma(0.0).is_err());
    }

    #[test]
    fn digamma_recurrence() {
        for &x in &[0.1, 1.0, 7.3, 100.0, 1e-3, 1e6] {
            let d = digamma(x + 1.0).unwrap() - digamma(x).unwrap();
            assert!((d - 1.0 / x).abs() < 1e-10, "x={x}: {d}");
        }
    }

    #[test]
    fn digamma_matches_log_gamma_derivative() {
        for &x in &[0.3, 1.7, 4.2, 12.5, 80.0] {
            let fd = richardson_central(|s| log_gamma(s).unwrap(), x, 1e-3 * x).value;
            assert!((fd - digamma(x).unwrap()).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn reg_gamma_p_values() {
        assert_eq!(reg_gamma_p(1.0, 0.0).unwrap(), 0.0);
        assert!((reg_gamma_p(1.0, 1.0).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
        // Reference from high-precision quadrature of t^{1.5} e^{-t}/Γ(2.5) on [0, 3].
        assert!((reg_gamma_p(2.5, 3.0).unwrap() - 0.693_781_081_586_721_6).abs() < 1e-12);
        for &x in &[0.5, 2.0, 7.0, 40.0] {
            let sum = reg_gamma_p(3.2, x).unwrap() + reg_gamma_q(3.2, x).unwrap();
            assert!((sum - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn reg_gamma_p_exponential_case() {
        for &x in &[0.01, 0.5, 1.99, 2.0, 2.01, 5.0, 30.0] {
            let p = reg_gamma_p(1.0, x).unwrap();
            assert!((p - (-(-x as f64).exp_m1())).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn reg_gamma_domain() {
        assert!(reg_gamma_p(0.0, 1.0).is_err());
        assert!(reg_gamma_p(1.0, -1e-3).is_err());
        assert!(grad_reg_gamma_p_wrt_a(-1.0, 1.0).is_err());
    }

    #[test]
    fn shape_gradient_zero_at_origin() {
        for &a in &[0.01, 0.5, 3.0, 40.0] {
            assert_eq!(grad_reg_gamma_p_wrt_a(a, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn shape_gradient_at_one_one() {
        // Independent oracle: Richardson on P with the h-sequence 1e-3, 5e-4, 2.5e-4.
        let oracle = richardson_central(|s| reg_gamma_p(s, 1.0).unwrap(), 1.0, 1e-3).value;
        let series = grad_reg_gamma_p_wrt_a_series(1.0, 1.0).unwrap();
        let fd = grad_reg_gamma_p_wrt_a_fd(1.0, 1.0).unwrap().value;
        assert!((series - oracle).abs() < 1e-6);
        assert!((fd - oracle).abs() < 1e-6);
        // High-precision reference value.
        assert!((series - (-0.431_729_710_634_898_7)).abs() < 1e-12);
    }

    #[test]
    fn shape_gradient_vanishes_in_far_tail() {
        assert!(grad_reg_gamma_p_wrt_a(3.0, 30.0).unwrap().abs() < 1e-8);
    }

    #[test]
    fn shape_gradient_reference_grid() {
        // d/da P(a, x) from 40-digit arithmetic.
        let grid: [(f64, f64, f64); 6] = [
            (0.1, 0.01, -2.776_160_812_425_422_5),
            (0.5, 1.0, -0.389_837_264_328_510_57),
            (2.0, 5.0, -0.055_859_896_052_536_78),
            (5.0, 20.0, -2.621_770_792_216_713_5e-5),
            (10.0, 1.0, -2.630_331_275_915_804e-7),
            (1.0, 20.0, -7.462_749_839_038_48e-9),
        ];
        for (a, x, want) in grid {
            let got = grad_reg_gamma_p_wrt_a(a, x).unwrap();
            assert!((got - want).abs() < 1e-9, "({a},{x}): {got} vs {want}");
        }
    }

    #[test]
    fn scaled_ratio_agrees_with_plain_quotient() {
        for &(a, x) in &[(0.3, 0.05), (2.0, 1.5), (2.0, 6.0), (7.0, 3.0), (0.8, 12.0)] {
            let dens = (ln_prefactor(a, x) - x.ln()).exp();
            let plain = grad_reg_gamma_p_wrt_a(a, x).unwrap() / dens;
            let scaled = gamma_shape_cdf_ratio(a, x).unwrap();
            assert!(
                (plain - scaled).abs() < 1e-7 * plain.abs().max(1.0),
                "({a},{x}): {plain} vs {scaled}"
            );
        }
    }

    #[test]
    fn scaled_ratio_survives_extreme_arguments() {
        // Tiny shape with x near underflow, and x deep in the upper tail.
        let r = gamma_shape_cdf_ratio(0.01, 1e-300).unwrap();
        assert!(r.is_finite() && r <= 0.0);
        let r = gamma_shape_cdf_ratio(1.5, 900.0).unwrap();
        assert!(r.is_finite());
    }
}
