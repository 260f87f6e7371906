//! Term grades and cohort statistics.

mod report;
pub mod special;
mod stats;

use serde::{Deserialize, Serialize};

use crate::performance::Activity;

pub use report::{cohort_report, grade_histogram, CohortReport, GroupSummary, HistogramBin};
pub use stats::{describe, t_test_independent, SampleStats, TTestResult, TTestVariant};

#[derive(Debug, Clone, PartialEq, thiserror::Error, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum GradingError {
    #[error("{activity:?} average {value} exceeds its cap of {cap}")]
    ActivityOverCap { activity: Activity, value: f64, cap: f64 },
    #[error("{what} {value} is outside 0..100")]
    OutOfRange { what: String, value: f64 },
    #[error("need at least 2 samples, got {count}")]
    TooFewSamples { count: usize },
    #[error("samples must be finite numbers")]
    NonFinite,
    #[error("standard error of the difference is zero")]
    DegenerateVariance,
    #[error("invalid grading policy: {message}")]
    InvalidPolicy { message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityCaps {
    pub homework: f64,
    pub forum: f64,
    pub chat: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActivityAverages {
    pub homework: f64,
    pub forum: f64,
    pub chat: f64,
}

impl ActivityAverages {
    pub fn get(&self, a: Activity) -> f64 {
        match a {
            Activity::Homework => self.homework,
            Activity::Forum => self.forum,
            Activity::Chat => self.chat,
        }
    }

    /// From per-activity means; missing activities count as zero.
    pub fn from_means(means: &std::collections::BTreeMap<Activity, f64>) -> Self {
        let m = |a| means.get(&a).copied().unwrap_or(0.0);
        ActivityAverages {
            homework: m(Activity::Homework),
            forum: m(Activity::Forum),
            chat: m(Activity::Chat),
        }
    }
}

impl ActivityCaps {
    pub fn get(&self, a: Activity) -> f64 {
        match a {
            Activity::Homework => self.homework,
            Activity::Forum => self.forum,
            Activity::Chat => self.chat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradingPolicy {
    pub visa_weight: f64,
    pub final_weight: f64,
    pub pass_threshold: f64,
    pub activity_caps: ActivityCaps,
    pub adjusted_final_cap: f64,
}

impl Default for GradingPolicy {
    fn default() -> Self {
        GradingPolicy {
            visa_weight: 0.20,
            final_weight: 0.80,
            pass_threshold: 60.0,
            activity_caps: ActivityCaps {
                homework: 25.0,
                forum: 10.0,
                chat: 5.0,
            },
            adjusted_final_cap: 100.0,
        }
    }
}

impl GradingPolicy {
    pub fn validate(&self) -> Result<(), GradingError> {
        let bad = |s: &str| Err(GradingError::InvalidPolicy { message: s.into() });
        if self.visa_weight < 0.0 || self.final_weight < 0.0 {
            return bad("weights must be non-negative");
        }
        if (self.visa_weight + self.final_weight - 1.0).abs() > 1e-9 {
            return bad("visa_weight + final_weight must be 1");
        }
        if Activity::ALL.iter().any(|a| !(self.activity_caps.get(*a) >= 0.0)) {
            return bad("activity caps must be non-negative");
        }
        if !(0.0..=100.0).contains(&self.pass_threshold) || !(0.0..=100.0).contains(&self.adjusted_final_cap) {
            return bad("threshold and cap must be in 0..100");
        }
        Ok(())
    }
}

fn check_score(what: &str, value: f64) -> Result<(), GradingError> {
    if value.is_finite() && (0.0..=100.0).contains(&value) {
        Ok(())
    } else {
        Err(GradingError::OutOfRange {
            what: what.into(),
            value,
        })
    }
}

/// Final exam plus activity averages, capped.
pub fn adjusted_final(
    final_exam: f64,
    activities: &ActivityAverages,
    policy: &GradingPolicy,
) -> Result<f64, GradingError> {
    check_score("final exam", final_exam)?;
    for a in Activity::ALL {
        let (value, cap) = (activities.get(a), policy.activity_caps.get(a));
        if !value.is_finite() || value < 0.0 || value > cap {
            return Err(GradingError::ActivityOverCap { activity: a, value, cap });
        }
    }
    let sum = final_exam + activities.homework + activities.forum + activities.chat;
    Ok(sum.min(policy.adjusted_final_cap))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermGrade {
    pub grade: f64,
    pub passed: bool,
}

/// Weighted visa and final. The sum is rounded to 10 decimals so values
/// that should be exactly 60 are not lost to binary representation.
pub fn term_grade(visa: f64, adjusted_final: f64, policy: &GradingPolicy) -> Result<TermGrade, GradingError> {
    check_score("visa", visa)?;
    check_score("adjusted final", adjusted_final)?;
    let raw = policy.visa_weight * visa + policy.final_weight * adjusted_final;
    let grade = ((raw * 1e10).round() / 1e10).clamp(0.0, 100.0);
    Ok(TermGrade {
        grade,
        passed: grade >= policy.pass_threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeRecord {
    pub student_id: String,
    pub visa: f64,
    pub final_exam: f64,
    pub activity_averages: ActivityAverages,
    pub adjusted_final: f64,
    pub term_grade: f64,
    pub passed: bool,
}

impl GradeRecord {
    pub fn compute(
        student_id: impl Into<String>,
        visa: f64,
        final_exam: f64,
        activity_averages: ActivityAverages,
        policy: &GradingPolicy,
    ) -> Result<Self, GradingError> {
        let adjusted = adjusted_final(final_exam, &activity_averages, policy)?;
        let t = term_grade(visa, adjusted, policy)?;
        Ok(GradeRecord {
            student_id: student_id.into(),
            visa,
            final_exam,
            activity_averages,
            adjusted_final: adjusted,
            term_grade: t.grade,
            passed: t.passed,
        })
    }
}
