use serde::{Deserialize, Serialize};

use super::diff::{richardson_central, shape_step};
use super::gamma::ln_gamma_unchecked;
use super::{EPS, FPMIN};
use crate::error::{Error, Result};

const MAX_ITER: usize = 100_000;

/// Which shape parameter of I_x(a, b) to differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    A,
    B,
}

/// ln B(a, b).
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    check_shapes("log_beta", a, b)?;
    Ok(ln_beta_unchecked(a, b))
}

fn ln_beta_unchecked(a: f64, b: f64) -> f64 {
    ln_gamma_unchecked(a) + ln_gamma_unchecked(b) - ln_gamma_unchecked(a + b)
}

fn check_shapes(context: &'static str, a: f64, b: f64) -> Result<()> {
    for (name, v) in [("a", a), ("b", b)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::domain(context, format!("{name} = {v}, expected > 0")));
        }
    }
    Ok(())
}

fn check_args(context: &'static str, x: f64, a: f64, b: f64) -> Result<()> {
    check_shapes(context, a, b)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(context, format!("x = {x}, expected in [0, 1]")));
    }
    Ok(())
}

/// Lentz evaluation of the continued fraction in I_x(a,b) = x^a (1-x)^b / (a B(a,b)) · cf.
fn beta_fraction(x: f64, a: f64, b: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
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
    Err(Error::Convergence("incomplete beta continued fraction"))
}

/// The fraction converges quickly only below the mean-ish cutoff; above it the
/// complementary tail I_{1-x}(b, a) is the one evaluated directly.
fn direct_side(x: f64, a: f64, b: f64) -> bool {
    x < (a + 1.0) / (a + b + 2.0)
}

/// ln I_x(a, b) evaluated with the continued fraction on the given side,
/// with `xc = 1 - x` supplied separately to avoid cancellation.
fn ln_direct(x: f64, xc: f64, a: f64, b: f64) -> Result<f64> {
    let cf = beta_fraction(x, a, b)?;
    Ok(a * x.ln() + b * xc.ln() - ln_beta_unchecked(a, b) + cf.ln() - a.ln())
}

/// Regularized incomplete beta I_x(a, b).
pub fn reg_beta_i(x: f64, a: f64, b: f64) -> Result<f64> {
    check_args("reg_beta_i", x, a, b)?;
    reg_beta_split(x, 1.0 - x, a, b)
}

fn reg_beta_split(x: f64, xc: f64, a: f64, b: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    if xc == 0.0 {
        return Ok(1.0);
    }
    if direct_side(x, a, b) {
        Ok(ln_direct(x, xc, a, b)?.exp().min(1.0))
    } else {
        Ok((1.0 - ln_direct(xc, x, b, a)?.exp()).max(0.0))
    }
}

/// ∂I_x(a, b)/∂(shape) by Richardson-extrapolated central differences.
///
/// The step follows [`shape_step`]. Differences whichever tail the continued
/// fraction evaluates directly, so small tail probabilities keep their
/// relative accuracy.
pub fn grad_reg_beta_wrt_shape(x: f64, a: f64, b: f64, which: Shape) -> Result<f64> {
    check_args("grad_reg_beta_wrt_shape", x, a, b)?;
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    grad_split(x, 1.0 - x, a, b, which)
}

fn grad_split(x: f64, xc: f64, a: f64, b: f64, which: Shape) -> Result<f64> {
    let shape = match which {
        Shape::A => a,
        Shape::B => b,
    };
    let h = shape_step(shape);
    let at = |s: f64| match which {
        Shape::A => (s, b),
        Shape::B => (a, s),
    };
    let (direct, tail): (bool, Box<dyn Fn(f64, f64) -> Result<f64>>) = if direct_side(x, a, b) {
        (true, Box::new(move |sa, sb| Ok(ln_direct(x, xc, sa, sb)?.exp())))
    } else {
        (false, Box::new(move |sa, sb| Ok(ln_direct(xc, x, sb, sa)?.exp())))
    };
    for s in [shape - h, shape + h] {
        let (sa, sb) = at(s);
        tail(sa, sb)?;
    }
    let d = richardson_central(
        |s| {
            let (sa, sb) = at(s);
            tail(sa, sb).unwrap_or(f64::NAN)
        },
        shape,
        h,
    )
    .value;
    if !d.is_finite() {
        return Err(Error::Convergence("incomplete beta shape derivative"));
    }
    Ok(if direct { d } else { -d })
}

/// (∂I_x(a, b)/∂shape) divided by the Beta(a, b) density at x.
///
/// Differentiates ln of the directly evaluated tail, so the quotient stays
/// finite when both the tail and the density are below the floating-point range.
pub(crate) fn beta_shape_cdf_ratio(x: f64, xc: f64, a: f64, b: f64, which: Shape) -> Result<f64> {
    check_shapes("beta shape nabla", a, b)?;
    if !(x > 0.0 && xc > 0.0) {
        return Err(Error::domain(
            "beta shape nabla",
            format!("x = {x} has zero density"),
        ));
    }
    let shape = match which {
        Shape::A => a,
        Shape::B => b,
    };
    let h = shape_step(shape);
    let at = |s: f64| match which {
        Shape::A => (s, b),
        Shape::B => (a, s),
    };
    let direct = direct_side(x, a, b);
    // ln of the tail that the fraction evaluates directly, as a function of the
    // shapes of I_x(a, b).
    let ln_tail = |sa: f64, sb: f64| {
        if direct {
            ln_direct(x, xc, sa, sb)
        } else {
            ln_direct(xc, x, sb, sa)
        }
    };
    for s in [shape - h, shape + h] {
        let (sa, sb) = at(s);
        ln_tail(sa, sb)?;
    }
    let dln = richardson_central(
        |s| {
            let (sa, sb) = at(s);
            ln_tail(sa, sb).unwrap_or(f64::NAN)
        },
        shape,
        h,
    )
    .value;
    if !dln.is_finite() {
        return Err(Error::Convergence("incomplete beta shape derivative"));
    }
    // tail / density = x (1-x) · cf / (leading shape of the tail).
    Ok(if direct {
        x * xc * beta_fraction(x, a, b)? / a * dln
    } else {
        -x * xc * beta_fraction(xc, b, a)? / b * dln
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_symmetry() {
        for &(a, b) in &[(0.3, 0.7), (2.0, 2.0), (10.0, 11.0)] {
            assert_eq!(reg_beta_i(0.0, a, b).unwrap(), 0.0);
            assert_eq!(reg_beta_i(1.0, a, b).unwrap(), 1.0);
            for &x in &[0.1, 0.45, 0.9] {
                let l = reg_beta_i(x, a, b).unwrap();
                let r = 1.0 - reg_beta_i(1.0 - x, b, a).unwrap();
                assert!((l - r).abs() < 1e-13);
            }
        }
        assert!((reg_beta_i(0.5, 2.0, 2.0).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn uniform_and_power_cases() {
        for &x in &[0.01, 0.3, 0.77] {
            assert!((reg_beta_i(x, 1.0, 1.0).unwrap() - x).abs() < 1e-14);
            // I_x(a, 1) = x^a
            assert!((reg_beta_i(x, 3.5, 1.0).unwrap() - x.powf(3.5)).abs() < 1e-14);
        }
    }

    fn nb_pmf(y: u64, r: f64, p: f64) -> f64 {
        (ln_gamma_unchecked(y as f64 + r) - ln_gamma_unchecked(y as f64 + 1.0) - ln_gamma_unchecked(r)
            + y as f64 * p.ln()
            + r * (1.0 - p).ln())
        .exp()
    }

    #[test]
    fn negative_binomial_cdf_by_pmf_summation() {
        // NB(r = 10, p = 0.2) CDF at y = 10 equals I_{0.8}(10, 11).
        let summed: f64 = (0..=10).map(|y| nb_pmf(y, 10.0, 0.2)).sum();
        let got = reg_beta_i(0.8, 10.0, 11.0).unwrap();
        assert!((got - summed).abs() < 1e-12);
        assert!((got - 0.999_436_586_302_339_8).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert!(reg_beta_i(-0.1, 1.0, 1.0).is_err());
        assert!(reg_beta_i(0.5, 0.0, 1.0).is_err());
        assert!(grad_reg_beta_wrt_shape(1.1, 1.0, 1.0, Shape::A).is_err());
    }

    #[test]
    fn shape_gradient_endpoints() {
        for which in [Shape::A, Shape::B] {
            assert_eq!(grad_reg_beta_wrt_shape(0.0, 2.0, 3.0, which).unwrap(), 0.0);
            assert_eq!(grad_reg_beta_wrt_shape(1.0, 2.0, 3.0, which).unwrap(), 0.0);
        }
    }

    #[test]
    fn shape_gradient_sign_and_value() {
        let g = grad_reg_beta_wrt_shape(0.5, 2.0, 2.0, Shape::A).unwrap();
        assert!(g < 0.0);
        // 40-digit reference.
        assert!((g - (-0.221_573_590_279_972_65)).abs() < 1e-9);
        let gb = grad_reg_beta_wrt_shape(0.5, 2.0, 2.0, Shape::B).unwrap();
        assert!((gb + g).abs() < 1e-9);
    }

    #[test]
    fn shape_gradient_matches_pmf_differentiation() {
        // d/dr Σ_{y≤10} NB(y; r, 0.2) with each pmf differentiated through its
        // log by central differences.
        let (r, p) = (10.0, 0.2);
        let h = 1e-5;
        let oracle: f64 = (0..=10u64)
            .map(|y| {
                let dlog = (nb_pmf(y, r + h, p).ln() - nb_pmf(y, r - h, p).ln()) / (2.0 * h);
                nb_pmf(y, r, p) * dlog
            })
            .sum();
        let got = grad_reg_beta_wrt_shape(0.8, r, 11.0, Shape::A).unwrap();
        assert!((got - oracle).abs() < 1e-7, "{got} vs {oracle}");
        assert!((got - (-3.209_093_465_220_198e-4)).abs() < 1e-9);
    }

    #[test]
    fn scaled_ratio_agrees_with_plain_quotient() {
        for &(x, a, b) in &[(0.2, 2.0, 3.0), (0.9, 2.0, 3.0), (0.5, 0.7, 1.4), (0.03, 5.0, 1.2)] {
            let dens = ((a - 1.0) * f64::ln(x) + (b - 1.0) * (1.0 - x).ln() - ln_beta_unchecked(a, b)).exp();
            for which in [Shape::A, Shape::B] {
                let plain = grad_reg_beta_wrt_shape(x, a, b, which).unwrap() / dens;
                let scaled = beta_shape_cdf_ratio(x, 1.0 - x, a, b, which).unwrap();
                assert!(
                    (plain - scaled).abs() < 1e-6 * plain.abs().max(1.0),
                    "({x},{a},{b},{which:?}): {plain} vs {scaled}"
                );
            }
        }
    }
}
