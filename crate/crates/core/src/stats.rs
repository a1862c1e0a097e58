//! Summary statistics for step counts: mean ± standard error, two-sample
//! t-tests and Holm–Bonferroni correction.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n − 1 denominator). Zero for fewer than two samples.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the mean: sample standard deviation over √n.
pub fn standard_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// `"m.mm ± s.ss"`.
pub fn format_mean_se(xs: &[f64]) -> String {
    format!("{:.2} ± {:.2}", mean(xs), standard_error(xs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestKind {
    /// Student's test with pooled variance.
    #[default]
    Pooled,
    /// Welch's unequal-variance test.
    Welch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// Both samples had zero variance; `p` is 1 if the means agree, else 0.
    pub degenerate: bool,
}

pub fn t_test(a: &[f64], b: &[f64], kind: TTestKind) -> TTest {
    assert!(a.len() >= 2 && b.len() >= 2, "t-test needs at least two samples per group");
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a), variance(b));
    let diff = mean(a) - mean(b);
    let (se, df) = match kind {
        TTestKind::Pooled => {
            let df = na + nb - 2.0;
            let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
            ((pooled * (1.0 / na + 1.0 / nb)).sqrt(), df)
        }
        TTestKind::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let df = (qa + qb).powi(2) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
            ((qa + qb).sqrt(), df)
        }
    };
    if se == 0.0 {
        let p = if diff == 0.0 { 1.0 } else { 0.0 };
        return TTest { t: if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY }, df, p, degenerate: true };
    }
    let t = diff / se;
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    TTest { t, df, p, degenerate: false }
}

/// Holm–Bonferroni step-down adjustment, returned in input order.
pub fn holm(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p[i].total_cmp(&p[j]));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        running = running.max(((m - rank) as f64 * p[i]).min(1.0));
        adjusted[i] = running;
    }
    adjusted
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub test: TTest,
    pub adjusted_p: f64,
}

/// One t-test per `(a, b)` pair, Holm-adjusted across all pairs.
pub fn t_test_holm(pairs: &[(&[f64], &[f64])], kind: TTestKind) -> Vec<PairResult> {
    let tests: Vec<TTest> = pairs.iter().map(|(a, b)| t_test(a, b, kind)).collect();
    let adjusted = holm(&tests.iter().map(|t| t.p).collect::<Vec<_>>());
    tests.into_iter().zip(adjusted).map(|(test, adjusted_p)| PairResult { test, adjusted_p }).collect()
}
