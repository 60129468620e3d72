//! Cochran's Q, McNemar and Holm for matched binary outcomes.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("entry ({row}, {col}) is {value}, expected 0 or 1")]
    NonBinary { row: usize, col: usize, value: u8 },
    #[error("malformed input: {0}")]
    Shape(String),
    #[error("p-value {0} outside [0, 1]")]
    OutOfRange(f64),
}

/// Upper tail of the chi-square distribution.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df).expect("degrees of freedom are positive");
    dist.sf(x).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CochranResult {
    pub q: f64,
    pub df: usize,
    pub p: f64,
}

/// Cochran's Q over an n x k matrix of 0/1 outcomes (rows are subjects,
/// columns treatments). All-constant rows make the denominator zero; the
/// test then reports Q = 0, p = 1.
pub fn cochran_q(outcomes: &[Vec<u8>]) -> Result<CochranResult, StatsError> {
    let k = outcomes.first().map_or(0, Vec::len);
    if outcomes.is_empty() || k < 2 {
        return Err(StatsError::Shape("need at least one row and two columns".into()));
    }
    let mut cols = vec![0u64; k];
    let mut sum_r2 = 0u64;
    let mut total = 0u64;
    for (i, row) in outcomes.iter().enumerate() {
        if row.len() != k {
            return Err(StatsError::Shape(format!("row {i} has {} columns, expected {k}", row.len())));
        }
        let mut r = 0u64;
        for (j, &v) in row.iter().enumerate() {
            if v > 1 {
                return Err(StatsError::NonBinary { row: i, col: j, value: v });
            }
            cols[j] += v as u64;
            r += v as u64;
        }
        sum_r2 += r * r;
        total += r;
    }
    let df = k - 1;
    let kf = k as f64;
    let denominator = kf * total as f64 - sum_r2 as f64;
    if denominator == 0.0 {
        return Ok(CochranResult { q: 0.0, df, p: 1.0 });
    }
    let sum_c2: f64 = cols.iter().map(|&c| (c * c) as f64).sum();
    let t = total as f64;
    let q = (df as f64) * (kf * sum_c2 - t * t) / denominator;
    Ok(CochranResult {
        q,
        df,
        p: chi2_sf(q, df as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McNemarMethod {
    /// Two-sided binomial test on the discordant pairs.
    Exact,
    /// Continuity-corrected chi-square with one degree of freedom.
    ChiSquare,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McNemarResult {
    /// Pairs with the first method 1 and the second 0.
    pub b: u64,
    /// Pairs with the first method 0 and the second 1.
    pub c: u64,
    /// min(b, c) for the exact test, the corrected chi-square otherwise.
    pub statistic: f64,
    pub p: f64,
    pub method: McNemarMethod,
}

/// Discordant-pair count below which the exact test is used.
pub const EXACT_BELOW: u64 = 25;

/// min(1, 2 * P(X <= min(b, c))) for X ~ Binomial(b + c, 1/2).
pub fn exact_binomial_p(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let k = b.min(c);
    let mut coef = 1.0f64;
    let mut tail = 0.0;
    for i in 0..=k {
        if i > 0 {
            coef = coef * (n - i + 1) as f64 / i as f64;
        }
        tail += coef;
    }
    (2.0 * tail * 0.5f64.powi(n as i32)).min(1.0)
}

/// Paired comparison of two methods from (first, second) outcomes.
pub fn mcnemar(pairs: &[(u8, u8)]) -> Result<McNemarResult, StatsError> {
    let (mut b, mut c) = (0u64, 0u64);
    for (i, &(x, y)) in pairs.iter().enumerate() {
        for (col, v) in [(0, x), (1, y)] {
            if v > 1 {
                return Err(StatsError::NonBinary { row: i, col, value: v });
            }
        }
        match (x, y) {
            (1, 0) => b += 1,
            (0, 1) => c += 1,
            _ => {}
        }
    }
    let n = b + c;
    if n == 0 {
        return Ok(McNemarResult {
            b,
            c,
            statistic: 0.0,
            p: 1.0,
            method: McNemarMethod::Exact,
        });
    }
    if n < EXACT_BELOW {
        return Ok(McNemarResult {
            b,
            c,
            statistic: b.min(c) as f64,
            p: exact_binomial_p(b, c),
            method: McNemarMethod::Exact,
        });
    }
    let diff = (b as f64 - c as f64).abs() - 1.0;
    let statistic = diff.max(0.0).powi(2) / n as f64;
    Ok(McNemarResult {
        b,
        c,
        statistic,
        p: chi2_sf(statistic, 1.0),
        method: McNemarMethod::ChiSquare,
    })
}

/// Holm step-down adjustment; results are in input order.
pub fn holm_adjust(pvalues: &[f64]) -> Result<Vec<f64>, StatsError> {
    if let Some(&bad) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(StatsError::OutOfRange(bad));
    }
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        let scaled = ((m - rank) as f64 * pvalues[i]).min(1.0);
        running = running.max(scaled);
        adjusted[i] = running;
    }
    Ok(adjusted)
}

/// Sample variance (n - 1 denominator); 0 for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}
