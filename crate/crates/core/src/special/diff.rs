use super::FnEvalResult;

/// Central difference at `x0` with step `h`, refined by two rounds of
/// Richardson extrapolation over the steps `h`, `h/2`, `h/4`.
pub fn richardson_central<F: FnMut(f64) -> f64>(mut f: F, x0: f64, h: f64) -> FnEvalResult {
    let mut central = |h: f64| (f(x0 + h) - f(x0 - h)) / (2.0 * h);
    let d1 = central(h);
    let d2 = central(h / 2.0);
    let d4 = central(h / 4.0);
    let r1 = (4.0 * d4 - d2) / 3.0;
    let value = (64.0 * d4 - 20.0 * d2 + d1) / 45.0;
    FnEvalResult {
        value,
        est_abs_error: (value - r1).abs(),
    }
}

/// Step used when differentiating with respect to a positive shape parameter:
/// relative 1e-4 with a 1e-5 floor, clamped so that `shape - h` stays positive.
pub fn shape_step(shape: f64) -> f64 {
    (1e-4 * shape.abs()).max(1e-5).min(shape / 2.0)
}
