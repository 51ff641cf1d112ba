//! Shared numeric helpers for the integration suites: quadrature,
//! quantiles and categorical statistics.
#![allow(dead_code)]

/// Composite Simpson on [a, b] with n subintervals (n made even).
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Simpson over geometric panels from `a` to `b` (ratio 4 per panel), for
/// integrands with a sharp head and a slow tail.
pub fn simpson_geometric(f: impl Fn(f64) -> f64, a: f64, first_width: f64, b: f64, per_panel: usize) -> f64 {
    let mut total = 0.0;
    let mut lo = a;
    let mut width = first_width;
    while lo < b {
        let hi = (lo + width).min(b);
        total += simpson(&f, lo, hi, per_panel);
        lo = hi;
        width *= 4.0;
    }
    total
}

/// Empirical quantile by linear interpolation on the sorted copy.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64
}

/// log(sum(exp(values))) with max subtraction.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Upper critical values of the chi-square distribution at the 5% level.
pub fn chi2_crit_5pct(df: usize) -> f64 {
    // standard table values
    const TABLE: [f64; 12] = [
        3.841, 5.991, 7.815, 9.488, 11.070, 12.592, 14.067, 15.507, 16.919, 18.307, 19.675,
        21.026,
    ];
    assert!(df >= 1 && df <= TABLE.len());
    TABLE[df - 1]
}
