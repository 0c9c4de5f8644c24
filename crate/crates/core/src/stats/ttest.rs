use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::special::inc_beta_xy;

/// Reporting threshold for significance markers.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (divisor `n - 1`); absent for `n = 1`.
    pub std: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Paired,
    Welch,
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub t: f64,
    pub df: f64,
    /// Two-tailed.
    pub p: f64,
    pub kind: TestKind,
}

impl TestResult {
    pub fn significant(&self) -> bool {
        self.p < ALPHA
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn summarize(xs: &[f64]) -> Result<SampleSummary> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("cannot summarize an empty sample".into()));
    }
    let m = mean(xs);
    Ok(SampleSummary {
        n: xs.len(),
        mean: m,
        std: (xs.len() >= 2).then(|| variance(xs, m).sqrt()),
    })
}

/// Two-tailed survival probability `P(|T| ≥ |t|)` for Student's t with `df`
/// degrees of freedom, via `I_{df/(df+t²)}(df/2, 1/2)`.
pub fn t_sf(t: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::InvalidArgument(format!("degrees of freedom {df} must be positive")));
    }
    if t.is_nan() {
        return Err(Error::InvalidArgument("t statistic is NaN".into()));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    let t2 = t * t;
    let x = df / (df + t2);
    let y = t2 / (df + t2);
    Ok(inc_beta_xy(x, y, 0.5 * df, 0.5)?.clamp(0.0, 1.0))
}

// Treats a spread below this many ulps of the data scale as zero.
fn negligible(sd: f64, scale: f64) -> bool {
    sd <= 64.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE)
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Paired two-tailed test on `d = b - a`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "paired samples of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument("paired test needs at least 2 pairs".into()));
    }
    let d: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let m = mean(&d);
    let sd = variance(&d, m).sqrt();
    if negligible(sd, max_abs(a).max(max_abs(b))) {
        return Err(Error::DegenerateTest("paired differences have zero variance".into()));
    }
    let t = m / (sd / n.sqrt());
    let df = n - 1.0;
    Ok(TestResult {
        t,
        df,
        p: t_sf(t, df)?,
        kind: TestKind::Paired,
    })
}

fn two_sample_inputs(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64, f64, f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "two-sample test needs at least 2 values per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (variance(a, ma), variance(b, mb));
    let scale = max_abs(a).max(max_abs(b));
    if negligible(va.sqrt(), scale) && negligible(vb.sqrt(), scale) {
        return Err(Error::DegenerateTest("both samples have zero variance".into()));
    }
    Ok((ma, mb, va, vb, a.len() as f64, b.len() as f64))
}

/// Welch's unequal-variance test with Welch–Satterthwaite degrees of freedom.
/// The statistic is signed as `mean(b) - mean(a)`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    let (ma, mb, va, vb, na, nb) = two_sample_inputs(a, b)?;
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    let t = (mb - ma) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TestResult {
        t,
        df,
        p: t_sf(t, df)?,
        kind: TestKind::Welch,
    })
}

/// Student's equal-variance two-sample test.
pub fn pooled_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    let (ma, mb, va, vb, na, nb) = two_sample_inputs(a, b)?;
    let df = na + nb - 2.0;
    let sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
    let t = (mb - ma) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
    Ok(TestResult {
        t,
        df,
        p: t_sf(t, df)?,
        kind: TestKind::Pooled,
    })
}
