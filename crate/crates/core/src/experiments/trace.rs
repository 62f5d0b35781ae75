use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One iteration of an experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Variational parameters at which the iteration's gradients were drawn.
    pub param_values: Vec<f64>,
    pub elbo_estimate: f64,
    /// Unbiased variance of each gradient entry across the probes.
    pub grad_variance: Vec<f64>,
    pub wall_clock_ms: f64,
}

impl TraceRecord {
    /// First non-finite field, if any.
    pub(crate) fn non_finite(&self) -> Option<String> {
        if let Some(i) = self.param_values.iter().position(|v| !v.is_finite()) {
            return Some(format!("param_{i} = {}", self.param_values[i]));
        }
        if !self.elbo_estimate.is_finite() {
            return Some(format!("elbo = {}", self.elbo_estimate));
        }
        self.grad_variance
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| format!("gradvar_{i} = {}", self.grad_variance[i]))
    }
}

/// CSV with header `iteration,param_0..,elbo,gradvar_0..,wall_ms`.
pub fn write_trace_csv<W: Write>(mut out: W, records: &[TraceRecord]) -> Result<()> {
    let k = records.first().map_or(0, |r| r.param_values.len());
    let g = records.first().map_or(0, |r| r.grad_variance.len());
    let mut header = vec!["iteration".to_string()];
    header.extend((0..k).map(|i| format!("param_{i}")));
    header.push("elbo".into());
    header.extend((0..g).map(|i| format!("gradvar_{i}")));
    header.push("wall_ms".into());
    writeln!(out, "{}", header.join(","))?;
    for r in records {
        let mut row = vec![r.iteration.to_string()];
        row.extend(r.param_values.iter().map(f64::to_string));
        row.push(r.elbo_estimate.to_string());
        row.extend(r.grad_variance.iter().map(f64::to_string));
        row.push(r.wall_clock_ms.to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let r = TraceRecord {
            iteration: 3,
            param_values: vec![1.5, 0.25],
            elbo_estimate: -0.125,
            grad_variance: vec![0.0, 2.0],
            wall_clock_ms: 0.0,
        };
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &[r.clone()]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "iteration,param_0,param_1,elbo,gradvar_0,gradvar_1,wall_ms\n3,1.5,0.25,-0.125,0,2,0\n"
        );
        assert!(r.non_finite().is_none());
        let bad = TraceRecord { elbo_estimate: f64::NAN, ..r };
        assert_eq!(bad.non_finite().unwrap(), "elbo = NaN");
    }
}
