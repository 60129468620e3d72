//! Independent oracles shared by the statistics tests and the acceptance run.
#![allow(dead_code)]

/// Cochran's Q in its deviation form, k(k-1) sum (C_j - mean C)^2 over
/// sum R_i (k - R_i). Algebraically equal to the computational formula.
pub fn cochran_direct(m: &[Vec<u8>]) -> f64 {
    let k = m[0].len();
    let cols: Vec<f64> = (0..k).map(|j| m.iter().map(|r| r[j] as f64).sum()).collect();
    let mean = cols.iter().sum::<f64>() / k as f64;
    let num = (k * (k - 1)) as f64 * cols.iter().map(|c| (c - mean).powi(2)).sum::<f64>();
    let den: f64 = m
        .iter()
        .map(|r| {
            let s: f64 = r.iter().map(|&v| v as f64).sum();
            s * (k as f64 - s)
        })
        .sum();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Upper tail of chi-square with 2 degrees of freedom, by composite Simpson
/// integration of the density over [0, x].
pub fn chi2_sf_df2_simpson(x: f64) -> f64 {
    let pdf = |t: f64| 0.5 * (-t / 2.0).exp();
    let n = 20_000;
    let h = x / n as f64;
    let mut s = pdf(0.0) + pdf(x);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * pdf(i as f64 * h);
    }
    1.0 - s * h / 3.0
}

/// Binomial coefficients from Pascal's triangle in exact integers.
pub fn pascal_row(n: usize) -> Vec<u64> {
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = vec![1u64; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    row
}

/// Two-sided exact McNemar p by summing exact binomial counts.
pub fn mcnemar_exact_oracle(b: u64, c: u64) -> f64 {
    let n = (b + c) as usize;
    if n == 0 {
        return 1.0;
    }
    let k = b.min(c) as usize;
    let tail: u64 = pascal_row(n)[..=k].iter().sum();
    (2.0 * tail as f64 / (1u64 << n) as f64).min(1.0)
}

/// Holm by explicit scan: each adjusted value is the largest scaled p among
/// all values ranked at or before it.
pub fn holm_max_scan(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let before = |j: usize, i: usize| p[j] < p[i] || (p[j] == p[i] && j <= i);
    (0..m)
        .map(|i| {
            (0..m)
                .filter(|&j| before(j, i))
                .map(|j| {
                    let rank = (0..m).filter(|&l| l != j && before(l, j)).count();
                    ((m - rank) as f64 * p[j]).min(1.0)
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Fixed matrices for the Cochran oracle.
pub fn cochran_cases() -> Vec<Vec<Vec<u8>>> {
    vec![
        vec![vec![1, 1, 0], vec![1, 0, 0], vec![1, 1, 1], vec![0, 1, 0]],
        vec![vec![1, 0], vec![1, 0], vec![0, 1], vec![1, 1], vec![1, 0]],
        vec![vec![1, 0, 0, 1], vec![1, 1, 0, 0], vec![1, 1, 1, 0], vec![0, 0, 0, 1], vec![1, 0, 1, 1]],
        vec![vec![1, 0, 0], vec![1, 0, 0], vec![1, 0, 0], vec![1, 1, 0], vec![1, 0, 1], vec![0, 0, 0]],
        vec![vec![0, 1, 1], vec![1, 1, 1], vec![0, 0, 1], vec![0, 1, 1], vec![0, 0, 1], vec![1, 0, 1], vec![0, 1, 0]],
        (0..60).map(|i| vec![u8::from(i % 10 != 0), u8::from(i % 3 == 0), u8::from(i % 4 == 0)]).collect(),
    ]
}
