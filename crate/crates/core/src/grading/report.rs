use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::stats::{describe, t_test_independent, SampleStats, TTestResult, TTestVariant};
use super::{GradingError, GradingPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub name: String,
    pub passed: usize,
    pub pass_rate_percent: f64,
    pub stats: SampleStats,
}

/// One grade range. The last bin includes its upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub groups: Vec<GroupSummary>,
    pub equal_variances: TTestResult,
    pub unequal_variances: TTestResult,
    pub histogram: Vec<HistogramBin>,
}

/// Ten-point grade ranges, one count per group.
pub fn grade_histogram(groups: &[&[f64]]) -> Vec<HistogramBin> {
    (0..10)
        .map(|i| {
            let lower = f64::from(i) * 10.0;
            let upper = lower + 10.0;
            let counts = groups
                .iter()
                .map(|g| {
                    g.iter()
                        .filter(|&&x| x >= lower && (x < upper || (i == 9 && x <= upper)))
                        .count()
                })
                .collect();
            HistogramBin { lower, upper, counts }
        })
        .collect()
}

/// Compares two groups of term grades; `a` is subtracted from.
pub fn cohort_report(
    (a_name, a): (&str, &[f64]),
    (b_name, b): (&str, &[f64]),
    policy: &GradingPolicy,
) -> Result<CohortReport, GradingError> {
    let summary = |name: &str, grades: &[f64]| -> Result<GroupSummary, GradingError> {
        let stats = describe(grades)?;
        let passed = grades.iter().filter(|&&g| g >= policy.pass_threshold).count();
        Ok(GroupSummary {
            name: name.to_string(),
            passed,
            pass_rate_percent: 100.0 * passed as f64 / grades.len() as f64,
            stats,
        })
    };
    let ga = summary(a_name, a)?;
    let gb = summary(b_name, b)?;
    Ok(CohortReport {
        equal_variances: t_test_independent(&ga.stats, &gb.stats, TTestVariant::EqualVariances)?,
        unequal_variances: t_test_independent(&ga.stats, &gb.stats, TTestVariant::WelchUnequal)?,
        histogram: grade_histogram(&[a, b]),
        groups: vec![ga, gb],
    })
}

impl CohortReport {
    /// Tab-separated export: group summary, t-test table, grade ranges.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("group\tn\tpassed (%)\tmean\tstdev\tmedian\n");
        for g in &self.groups {
            let median = g.stats.median.map(|m| format!("{m:.2}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "{}\t{}\t{:.0}\t{:.2}\t{:.2}\t{}",
                g.name, g.stats.n, g.pass_rate_percent, g.stats.mean, g.stats.stdev, median
            );
        }
        s.push('\n');
        s.push_str("\tt\tdf\tsig. (2-tailed)\tmean difference\tstd. error difference\t95% ci lower\t95% ci upper\n");
        for (label, r) in [
            ("equal variances assumed", &self.equal_variances),
            ("equal variances not assumed", &self.unequal_variances),
        ] {
            let df = if r.df.fract() == 0.0 {
                format!("{}", r.df)
            } else {
                format!("{:.3}", r.df)
            };
            let _ = writeln!(
                s,
                "{label}\t{:.3}\t{df}\t{:.3}\t{:.5}\t{:.5}\t{:.5}\t{:.5}",
                r.t, r.p_two_tailed, r.mean_difference, r.std_error_difference, r.ci95.lower, r.ci95.upper
            );
        }
        s.push('\n');
        s.push_str("range");
        for g in &self.groups {
            let _ = write!(s, "\t{}", g.name);
        }
        s.push('\n');
        for bin in &self.histogram {
            let _ = write!(s, "{}-{}", bin.lower, bin.upper);
            for c in &bin.counts {
                let _ = write!(s, "\t{c}");
            }
            s.push('\n');
        }
        s
    }
}
