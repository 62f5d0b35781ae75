//! Reference values for gradient checks, computed without any estimator:
//! adaptive quadrature, tail-bounded summation, closed-form moments and
//! Richardson differences of the resulting expectations.

use crate::distributions::{Distribution, Family, Support};
use crate::error::{Error, Result};
use crate::integrand::TestFunction;
use crate::special::{digamma, log_gamma};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
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
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_INTERVALS: usize = 4000;

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature of `f` over `[a, b]`;
/// either endpoint may be infinite. Converges when the summed error estimate
/// falls below `tol · max(1, |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => integrate_finite(&f, a, b, tol),
        (true, false) => integrate_finite(
            &|t: f64| {
                let s = 1.0 - t;
                f(a + t / s) / (s * s)
            },
            0.0,
            1.0,
            tol,
        ),
        (false, true) => integrate_finite(
            &|t: f64| {
                let s = 1.0 - t;
                f(b - t / s) / (s * s)
            },
            0.0,
            1.0,
            tol,
        ),
        (false, false) => integrate_finite(
            &|t: f64| {
                let s = 1.0 - t * t;
                f(t / s) * (1.0 + t * t) / (s * s)
            },
            -1.0,
            1.0,
            tol,
        ),
    }
}

fn integrate_finite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let guard = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let (v, e) = kronrod(&guard, a, b);
    let mut intervals = vec![(a, b, v, e)];
    loop {
        let total: f64 = intervals.iter().map(|i| i.2).sum();
        let err: f64 = intervals.iter().map(|i| i.3).sum();
        if err <= tol * total.abs().max(1.0) {
            return Ok(total);
        }
        if intervals.len() >= MAX_INTERVALS {
            return Err(Error::Convergence("adaptive quadrature"));
        }
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = kronrod(&guard, lo, mid);
        let (v2, e2) = kronrod(&guard, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// E[f(y)] by quadrature (continuous), tail-bounded summation (countable
/// support), or exact enumeration (finite support).
pub fn expectation<F: Fn(f64) -> f64>(dist: &Distribution, f: F) -> Result<f64> {
    if let Distribution::Delta { loc } = *dist {
        return Ok(f(loc));
    }
    match dist.support() {
        Support::ContinuousInterval { lower, upper } => {
            // Split at the bulk of the mass so the adaptive rule sees its shape.
            let pivot = match dist {
                Distribution::Normal { mean, .. } | Distribution::Laplace { loc: mean, .. } => {
                    Some(*mean)
                }
                Distribution::Beta { .. } => None,
                d => Some(d.mean()),
            };
            let g = |y: f64| dist.density(y).map_or(0.0, |q| q * f(y));
            match pivot {
                Some(c) if c > lower && c < upper => {
                    Ok(integrate(g, lower, c, 1e-13)? + integrate(g, c, upper, 1e-13)?)
                }
                _ => integrate(g, lower, upper, 1e-13),
            }
        }
        Support::FiniteAlphabet { size } => (0..size)
            .map(|y| Ok(dist.density(y as f64)? * f(y as f64)))
            .sum(),
        Support::NonnegIntegers => {
            let mut total = 0.0;
            let mut y = 0.0;
            loop {
                let q = dist.density(y)?;
                total += q * f(y);
                // Stop once the remaining mass is negligible even after weighting
                // by the integrand at the current point.
                let tail = dist.sf(y)?;
                if y > dist.mean() && tail * f(y).abs().max(1.0) * (y + 1.0) < 1e-16 {
                    return Ok(total);
                }
                y += 1.0;
                if y > 1e7 {
                    return Err(Error::Convergence("tail-bounded summation"));
                }
            }
        }
    }
}

/// Closed-form E[y^order] for order ∈ {1, 2}.
pub fn moment(dist: &Distribution, order: u32) -> f64 {
    let m1 = dist.mean();
    if order == 1 {
        return m1;
    }
    assert_eq!(order, 2, "only first and second moments are tabulated");
    let gamma_fn = |x: f64| log_gamma(x).map_or(f64::NAN, f64::exp);
    match *dist {
        Distribution::Delta { loc } => loc * loc,
        Distribution::Bernoulli { p } => p,
        Distribution::Normal { mean, std } => mean * mean + std * std,
        Distribution::LogNormal { mu, sigma } => (2.0 * mu + 2.0 * sigma * sigma).exp(),
        Distribution::Gamma { shape, rate } => shape * (shape + 1.0) / (rate * rate),
        Distribution::Beta { a, b } => a * (a + 1.0) / ((a + b) * (a + b + 1.0)),
        Distribution::Exponential { rate } => 2.0 / (rate * rate),
        Distribution::Weibull { scale, shape } => scale * scale * gamma_fn(1.0 + 2.0 / shape),
        Distribution::Laplace { loc, scale } => loc * loc + 2.0 * scale * scale,
        Distribution::Poisson { rate } => rate + rate * rate,
        Distribution::Geometric { p } => (1.0 - p) * (2.0 - p) / (p * p),
        Distribution::NegativeBinomial { r, p } => r * p / ((1.0 - p) * (1.0 - p)) + m1 * m1,
        Distribution::Categorical { ref probs } => probs
            .iter()
            .enumerate()
            .map(|(i, p)| (i * i) as f64 * p)
            .sum(),
    }
}

/// E[f] for one of the test integrands, closed form when f is polynomial.
pub fn test_function_expectation(dist: &Distribution, f: TestFunction) -> Result<f64> {
    match f {
        TestFunction::Identity => Ok(moment(dist, 1)),
        TestFunction::Square => Ok(moment(dist, 2)),
        TestFunction::ShiftedSquare(c) => Ok(moment(dist, 2) - 2.0 * c * moment(dist, 1) + c * c),
        TestFunction::GaussianBump => expectation(dist, |y| f.value(y)),
    }
}

/// ∇_γ E[f] by Richardson central differences on the parameters, where
/// `expect` maps a distribution to E[f].
pub fn expectation_gradient<E>(dist: &Distribution, expect: E) -> Result<Vec<f64>>
where
    E: Fn(&Distribution) -> Result<f64>,
{
    dist.param_fd_gradient(expect)
}

/// KL(q ‖ p) between two Gamma(shape, rate) distributions, in closed form.
pub fn kl_gamma(q: &Distribution, p: &Distribution) -> Result<f64> {
    match (q, p) {
        (
            &Distribution::Gamma { shape: a, rate: b },
            &Distribution::Gamma { shape: a0, rate: b0 },
        ) => Ok((a - a0) * digamma(a)? - log_gamma(a)? + log_gamma(a0)?
            + a0 * (b.ln() - b0.ln())
            + a * (b0 - b) / b),
        _ => Err(Error::WrongFamily {
            expected: "two gamma distributions",
            got: if q.family() == Family::Gamma { p.family() } else { q.family() },
        }),
    }
}

/// KL(q ‖ p) between two negative binomials by summation, truncated once the
/// remaining mass of q is below 1e-12 and the terms have stopped contributing.
pub fn kl_negative_binomial(q: &Distribution, p: &Distribution) -> Result<f64> {
    for d in [q, p] {
        if d.family() != Family::NegativeBinomial {
            return Err(Error::WrongFamily {
                expected: "two negative binomial distributions",
                got: d.family(),
            });
        }
    }
    let mut total = 0.0;
    let mut y = 0.0;
    loop {
        let lq = q.log_density(y)?;
        let term = lq.exp() * (lq - p.log_density(y)?);
        total += term;
        if y > q.mean() && q.sf(y)? < 1e-12 && term.abs() < 1e-15 {
            return Ok(total);
        }
        y += 1.0;
        if y > 1e7 {
            return Err(Error::Convergence("truncated KL summation"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_on_known_integrals() {
        let v = integrate(|x| (-x * x).exp(), f64::NEG_INFINITY, f64::INFINITY, 1e-13).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let v = integrate(|x| (-x).exp(), 0.0, f64::INFINITY, 1e-13).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        // Integrable endpoint singularity.
        let v = integrate(|x| x.powf(-0.5), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn densities_normalize() {
        let ds = [
            Distribution::normal(1.0, 2.0).unwrap(),
            Distribution::gamma(0.7, 1.5).unwrap(),
            Distribution::new(Family::Beta, &[0.8, 1.5]).unwrap(),
            Distribution::new(Family::LogNormal, &[0.0, 0.5]).unwrap(),
            Distribution::new(Family::Weibull, &[1.5, 0.8]).unwrap(),
            Distribution::new(Family::Laplace, &[-1.0, 0.5]).unwrap(),
            Distribution::new(Family::Exponential, &[2.0]).unwrap(),
            Distribution::negative_binomial(10.0, 0.2).unwrap(),
            Distribution::poisson(7.5).unwrap(),
            Distribution::new(Family::Geometric, &[0.3]).unwrap(),
        ];
        for d in ds {
            let total = expectation(&d, |_| 1.0).unwrap();
            assert!((total - 1.0).abs() < 1e-6, "{d:?}: {total}");
            let m = expectation(&d, |y| y).unwrap();
            assert!((m - moment(&d, 1)).abs() < 1e-6 * m.abs().max(1.0), "{d:?}");
            let m2 = expectation(&d, |y| y * y).unwrap();
            assert!((m2 - moment(&d, 2)).abs() < 1e-6 * m2.abs().max(1.0), "{d:?}");
        }
    }

    #[test]
    fn moment_gradients_match_analytic() {
        // d/dβ E[y] for Gamma(α, β) is −α/β².
        let g = Distribution::gamma(2.0, 3.0).unwrap();
        let grad = expectation_gradient(&g, |d| Ok(moment(d, 1))).unwrap();
        assert!((grad[0] - 1.0 / 3.0).abs() < 1e-10);
        assert!((grad[1] + 2.0 / 9.0).abs() < 1e-10);
        // NB mean derivatives: p/(1-p) and r/(1-p)^2.
        let nb = Distribution::negative_binomial(10.0, 0.2).unwrap();
        let grad = expectation_gradient(&nb, |d| Ok(moment(d, 1))).unwrap();
        assert!((grad[0] - 0.25).abs() < 1e-9);
        assert!((grad[1] - 15.625).abs() < 1e-8);
        // Categorical: f(k) − f(N).
        let c = Distribution::new(Family::Categorical, &[0.2, 0.3, 0.5]).unwrap();
        let grad = expectation_gradient(&c, |d| Ok(moment(d, 1))).unwrap();
        assert!((grad[0] + 2.0).abs() < 1e-9 && (grad[1] + 1.0).abs() < 1e-9);
        assert_eq!(grad[2], 0.0);
    }

    #[test]
    fn kl_references() {
        let q = Distribution::gamma(2.0, 3.0).unwrap();
        assert!(kl_gamma(&q, &q).unwrap().abs() < 1e-14);
        let p = Distribution::gamma(1.0, 0.5).unwrap();
        // Direct quadrature of q ln(q/p).
        let direct = expectation(&q, |y| q.log_density(y).unwrap() - p.log_density(y).unwrap())
            .unwrap();
        assert!((kl_gamma(&q, &p).unwrap() - direct).abs() < 1e-10);
        let nb = Distribution::negative_binomial(10.0, 0.2).unwrap();
        assert!(kl_negative_binomial(&nb, &nb).unwrap().abs() < 1e-14);
        let other = Distribution::negative_binomial(3.0, 0.5).unwrap();
        assert!(kl_negative_binomial(&other, &nb).unwrap() > 0.0);
        assert!(kl_gamma(&q, &nb).is_err());
    }
}
