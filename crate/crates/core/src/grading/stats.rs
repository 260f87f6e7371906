use serde::{Deserialize, Serialize};

use super::special::{t_quantile, t_two_tailed};
use super::GradingError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub stdev: f64,
    /// Unknown when the stats were entered as a summary.
    pub median: Option<f64>,
}

impl SampleStats {
    pub fn from_summary(n: usize, mean: f64, stdev: f64) -> Result<Self, GradingError> {
        if n < 2 {
            return Err(GradingError::TooFewSamples { count: n });
        }
        if !mean.is_finite() || !stdev.is_finite() || stdev < 0.0 {
            return Err(GradingError::NonFinite);
        }
        Ok(SampleStats {
            n,
            mean,
            stdev,
            median: None,
        })
    }

    fn variance(&self) -> f64 {
        self.stdev * self.stdev
    }
}

pub fn describe(samples: &[f64]) -> Result<SampleStats, GradingError> {
    let n = samples.len();
    if n < 2 {
        return Err(GradingError::TooFewSamples { count: n });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(GradingError::NonFinite);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(SampleStats {
        n,
        mean,
        stdev: (ss / (n - 1) as f64).sqrt(),
        median: Some(median),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestVariant {
    EqualVariances,
    WelchUnequal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub variant: TTestVariant,
    pub t: f64,
    pub df: f64,
    pub p_two_tailed: f64,
    pub mean_difference: f64,
    pub std_error_difference: f64,
    pub ci95: ConfidenceInterval,
}

/// Independent samples t-test of `a.mean - b.mean`.
pub fn t_test_independent(
    a: &SampleStats,
    b: &SampleStats,
    variant: TTestVariant,
) -> Result<TTestResult, GradingError> {
    for s in [a, b] {
        if s.n < 2 {
            return Err(GradingError::TooFewSamples { count: s.n });
        }
    }
    let (na, nb) = (a.n as f64, b.n as f64);
    let (se, df) = match variant {
        TTestVariant::EqualVariances => {
            let pooled = ((na - 1.0) * a.variance() + (nb - 1.0) * b.variance()) / (na + nb - 2.0);
            (pooled.sqrt() * (1.0 / na + 1.0 / nb).sqrt(), na + nb - 2.0)
        }
        TTestVariant::WelchUnequal => {
            let (va, vb) = (a.variance() / na, b.variance() / nb);
            let df = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
            ((va + vb).sqrt(), df)
        }
    };
    if !(se > 0.0) || !se.is_finite() {
        return Err(GradingError::DegenerateVariance);
    }
    let diff = a.mean - b.mean;
    let t = diff / se;
    let margin = t_quantile(0.975, df) * se;
    Ok(TTestResult {
        variant,
        t,
        df,
        p_two_tailed: t_two_tailed(t, df),
        mean_difference: diff,
        std_error_difference: se,
        ci95: ConfidenceInterval {
            lower: diff - margin,
            upper: diff + margin,
        },
    })
}
