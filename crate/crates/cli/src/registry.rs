//! Integrands addressable by name from `graph-run` configs.

use gograd::FnIntegrand;

pub const NAMES: [&str; 3] = ["sum", "sum_squares", "gaussian_bump"];

/// f over the concatenated leaf vector.
pub fn lookup(name: &str) -> Option<FnIntegrand> {
    Some(match name {
        "sum" => FnIntegrand::new(|y| y.iter().sum()).with_gradient(|y| vec![1.0; y.len()]),
        "sum_squares" => FnIntegrand::new(|y| y.iter().map(|v| v * v).sum())
            .with_gradient(|y| y.iter().map(|v| 2.0 * v).collect()),
        "gaussian_bump" => FnIntegrand::new(|y| y.iter().map(|v| (-v * v / 10.0).exp()).sum())
            .with_gradient(|y| y.iter().map(|v| -v / 5.0 * (-v * v / 10.0).exp()).collect()),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use gograd::Integrand;

    #[test]
    fn gradients_match_differences() {
        let y = [0.3, -1.2, 2.0];
        for name in NAMES {
            let f = lookup(name).unwrap();
            let g = f.gradient(&y).unwrap();
            for i in 0..3 {
                let (mut up, mut dn) = (y, y);
                up[i] += 1e-6;
                dn[i] -= 1e-6;
                let fd = (f.eval(&up) - f.eval(&dn)) / 2e-6;
                assert!((fd - g[i]).abs() < 1e-8, "{name}[{i}]");
            }
        }
        assert!(lookup("cube").is_none());
    }
}
