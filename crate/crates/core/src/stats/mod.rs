//! Descriptive statistics and two-tailed t-tests.

pub mod special;
pub mod ttest;

pub use special::{inc_beta, ln_gamma};
pub use ttest::{
    paired_t_test, pooled_t_test, summarize, t_sf, welch_t_test, SampleSummary, TestKind,
    TestResult, ALPHA,
};
