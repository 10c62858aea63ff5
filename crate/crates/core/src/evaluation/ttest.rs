use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: usize,
    /// Two-tailed.
    pub p: f64,
    pub n: usize,
    /// Zero variance with a nonzero mean difference: `t` is infinite and `p`
    /// is reported as 0.
    pub degenerate: bool,
}

/// Paired two-tailed Student t-test on `a[i] - b[i]`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::invalid(format!("paired t-test needs n >= 2, got {n}")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    let df = n - 1;
    let res = |t: f64, p: f64, degenerate: bool| TTestResult { t, df, p, n, degenerate };
    if d.iter().all(|&x| x == 0.0) {
        return Ok(res(0.0, 1.0, false));
    }
    if sd == 0.0 {
        return Ok(res(mean.signum() * f64::INFINITY, 0.0, true));
    }
    let t = mean * nf.sqrt() / sd;
    let dff = df as f64;
    let p = beta_reg(dff / 2.0, 0.5, dff / (dff + t * t)).clamp(0.0, 1.0);
    Ok(res(t, p, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_example() {
        let r = paired_t_test(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!((r.t - 12f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.df, 2);
        // df = 2 has the closed form p = 1 - t / sqrt(t^2 + 2).
        let closed = 1.0 - r.t / (r.t * r.t + 2.0).sqrt();
        assert!((r.p - closed).abs() < 1e-12);
        assert!((r.p - 0.0742).abs() < 1e-3);
    }

    #[test]
    fn edge_cases() {
        let same = paired_t_test(&[0.3, 0.5], &[0.3, 0.5]).unwrap();
        assert_eq!((same.t, same.p), (0.0, 1.0));
        assert!(paired_t_test(&[1.0], &[0.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[0.0]).is_err());
        let shift = paired_t_test(&[1.0, 2.0], &[0.0, 1.0]).unwrap();
        assert!(shift.degenerate);
        assert_eq!(shift.p, 0.0);
    }

    proptest! {
        #[test]
        fn antisymmetric(pairs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..30)) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let ab = paired_t_test(&a, &b).unwrap();
            let ba = paired_t_test(&b, &a).unwrap();
            prop_assert!(ab.t == -ba.t || (ab.t == 0.0 && ba.t == 0.0));
            prop_assert!((ab.p - ba.p).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab.p));
        }
    }
}
