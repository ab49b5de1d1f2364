use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Multiplier of the sample standard deviation in plotted bands.
pub const BAND_Z: f64 = 1.96;

/// Infinite values are drawn at this height in charts.
pub const PLOT_CAP: f64 = 1e6;

/// Pointwise summary of one metric across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub trials: usize,
    pub mean: Vec<f64>,
    /// `1.96` times the sample standard deviation (`n - 1` denominator);
    /// zero for a single trial.
    pub band: Vec<f64>,
}

impl CoverageCurve {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn lo(&self) -> Vec<f64> {
        self.mean.iter().zip(&self.band).map(|(m, b)| m - b).collect()
    }

    pub fn hi(&self) -> Vec<f64> {
        self.mean.iter().zip(&self.band).map(|(m, b)| m + b).collect()
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Pointwise mean and `1.96 sigma` band over equal-length trial curves.
///
/// A point where any trial is infinite has mean `inf` and band 0.
pub fn aggregate_trials(curves: &[Vec<f64>]) -> Result<CoverageCurve> {
    let first = curves
        .first()
        .ok_or_else(|| Error::InvalidParams("cannot aggregate zero trials".into()))?;
    if let Some(bad) = curves.iter().find(|c| c.len() != first.len()) {
        return Err(Error::LengthMismatch {
            expected: first.len(),
            found: bad.len(),
        });
    }
    let mut mean = Vec::with_capacity(first.len());
    let mut band = Vec::with_capacity(first.len());
    let mut column = vec![0.0; curves.len()];
    for t in 0..first.len() {
        curves.iter().zip(&mut column).for_each(|(c, x)| *x = c[t]);
        if column.iter().any(|x| !x.is_finite()) {
            mean.push(f64::INFINITY);
            band.push(0.0);
            continue;
        }
        let (m, s) = mean_std(&column);
        mean.push(m);
        band.push(BAND_Z * s);
    }
    Ok(CoverageCurve {
        trials: curves.len(),
        mean,
        band,
    })
}

/// Two-sided Student-t interval for a mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanInterval {
    pub n: usize,
    pub mean: f64,
    pub half_width: f64,
}

impl MeanInterval {
    pub fn lo(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.mean + self.half_width
    }

    /// Whether the interval lies strictly above zero.
    pub fn excludes_zero_above(&self) -> bool {
        self.lo() > 0.0
    }
}

fn t_quantile(level: f64, dof: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.5 + level / 2.0)
}

/// Confidence interval for the mean of `xs` at `level` (e.g. 0.95).
pub fn mean_interval(xs: &[f64], level: f64) -> Result<MeanInterval> {
    if xs.len() < 2 {
        return Err(Error::InvalidParams("a confidence interval needs at least two samples".into()));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParams("confidence interval over non-finite samples".into()));
    }
    let (mean, sd) = mean_std(xs);
    let n = xs.len();
    Ok(MeanInterval {
        n,
        mean,
        half_width: t_quantile(level, (n - 1) as f64) * sd / (n as f64).sqrt(),
    })
}

/// Interval for the mean of the paired differences `a_i - b_i`.
pub fn paired_difference(a: &[f64], b: &[f64], level: f64) -> Result<MeanInterval> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    mean_interval(&d, level)
}

/// Least-squares slope of `ys` against `xs` with a Student-t interval.
pub fn slope_interval(xs: &[f64], ys: &[f64], level: f64) -> Result<MeanInterval> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::InvalidParams("a slope interval needs at least three points".into()));
    }
    let (mx, _) = mean_std(xs);
    let (my, _) = mean_std(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParams("x values are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let se = (sse / (n - 2) as f64 / sxx).sqrt();
    Ok(MeanInterval {
        n,
        mean: slope,
        half_width: t_quantile(level, (n - 2) as f64) * se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_curves_have_zero_band() {
        let c = aggregate_trials(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(c.mean, vec![1.0, 2.0]);
        assert_eq!(c.band, vec![0.0, 0.0]);
    }

    #[test]
    fn two_sample_band() {
        let c = aggregate_trials(&[vec![0.0; 4], vec![2.0; 4]]).unwrap();
        for t in 0..4 {
            assert_eq!(c.mean[t], 1.0);
            assert!((c.band[t] - 1.96 * 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn single_trial_and_mismatch() {
        let c = aggregate_trials(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(c.band, vec![0.0, 0.0]);
        assert!(matches!(
            aggregate_trials(&[vec![1.0], vec![1.0, 2.0]]),
            Err(Error::LengthMismatch { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn infinite_points() {
        let c = aggregate_trials(&[vec![1.0, f64::INFINITY], vec![2.0, 3.0]]).unwrap();
        assert_eq!(c.mean[1], f64::INFINITY);
        assert_eq!(c.band[1], 0.0);
    }

    #[test]
    fn t_interval_matches_table() {
        // t_{0.975, 29} = 2.04523 from standard tables.
        assert!((t_quantile(0.95, 29.0) - 2.045_229_6).abs() < 1e-6);
        let xs: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let ci = mean_interval(&xs, 0.95).unwrap();
        assert!((ci.mean - 14.5).abs() < 1e-12);
    }

    #[test]
    fn exact_line_has_zero_width_slope() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let s = slope_interval(&xs, &ys, 0.95).unwrap();
        assert!((s.mean + 0.5).abs() < 1e-12);
        assert!(s.half_width < 1e-9);
    }
}
