use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::EvalError;

pub const DEFAULT_MIN_BIN_COUNT: usize = 100;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(EvalError::Correlation(format!(
            "need equal-length vectors of at least 3 values, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(EvalError::Correlation("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StorageBin {
    pub dlt: f64,
    pub count: usize,
    pub mean_info: f64,
    /// Normal-approximation half-width; `None` for a single observation.
    pub ci95: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub n: usize,
    pub pearson: f64,
    pub spearman: f64,
    /// Bins with at least the minimum count, in increasing DLT value.
    pub bins: Vec<StorageBin>,
    pub dropped_bins: usize,
    /// Information storage regressed on DLT storage over the displayed bins.
    pub fit: Option<LinearFit>,
}

/// Correlation of information storage `x` with DLT storage `y`, plus the
/// per-DLT-value summary used for binned plots.
pub fn correlate(
    x: &[f64],
    y: &[f64],
    min_bin_count: usize,
) -> Result<CorrelationResult, EvalError> {
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EvalError::Correlation("non-finite value".into()));
    }
    let r = pearson(x, y)?;
    let rho = spearman(x, y)?;

    let mut groups: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    for (&info, &dlt) in x.iter().zip(y) {
        // order-preserving key for a finite float
        let bits = dlt.to_bits();
        let key = if dlt.is_sign_negative() {
            !bits
        } else {
            bits | (1 << 63)
        };
        groups
            .entry(key)
            .or_insert_with(|| (dlt, Vec::new()))
            .1
            .push(info);
    }
    let mut bins = Vec::new();
    let mut dropped_bins = 0;
    for (dlt, values) in groups.values() {
        if values.len() < min_bin_count {
            dropped_bins += 1;
            continue;
        }
        let m = mean(values);
        let ci95 = (values.len() > 1).then(|| {
            let var =
                values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
            1.96 * var.sqrt() / (values.len() as f64).sqrt()
        });
        bins.push(StorageBin {
            dlt: *dlt,
            count: values.len(),
            mean_info: m,
            ci95,
        });
    }
    let shown: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, d)| bins.iter().any(|b| b.dlt == **d))
        .map(|(i, d)| (*d, *i))
        .collect();
    let fit = simple_regression(&shown);
    Ok(CorrelationResult {
        n: x.len(),
        pearson: r,
        spearman: rho,
        bins,
        dropped_bins,
        fit,
    })
}

fn simple_regression(points: &[(f64, f64)]) -> Option<LinearFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx.is_nan() || sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(LinearFit {
        intercept: my - slope * mx,
        slope,
        n: points.len(),
    })
}

/// `dlt, count, mean_info, ci95` rows for plotting.
pub fn bins_csv(result: &CorrelationResult) -> String {
    let mut out = String::from("dlt,count,mean_info,ci95\n");
    for b in &result.bins {
        let ci = b.ci95.map_or_else(|| "NA".to_string(), |c| format!("{c}"));
        let _ = writeln!(out, "{},{},{},{}", b.dlt, b.count, b.mean_info, ci);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_correlations() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(pearson(&x, &x).unwrap(), 1.0));
        assert!(close(spearman(&x, &x).unwrap(), 1.0));
        assert!(close(pearson(&x, &neg).unwrap(), -1.0));
        assert!(close(spearman(&x, &neg).unwrap(), -1.0));
    }

    #[test]
    fn hand_ranked_pairs() {
        // ranks equal the values; every |d| is 1, so rho = 1 - 6*4/(4*15) = 0.6
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [2.0, 1.0, 4.0, 3.0];
        assert!((spearman(&x, &y).unwrap() - 0.6).abs() < 1e-12);
        // sxy = 3, sxx = syy = 5
        assert!((pearson(&x, &y).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn ties_share_ranks() {
        assert_eq!(
            average_ranks(&[3.0, 1.0, 3.0, 2.0]),
            vec![3.5, 1.0, 3.5, 2.0]
        );
    }

    #[test]
    fn zero_variance_errors() {
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn small_bins_are_dropped_from_display_and_fit() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..10 {
            x.push(1.0 + 0.01 * i as f64);
            y.push(0.0);
            x.push(3.0 + 0.01 * i as f64);
            y.push(1.0);
        }
        x.push(100.0);
        y.push(2.0);
        let r = correlate(&x, &y, 5).unwrap();
        assert_eq!(r.bins.len(), 2);
        assert_eq!(r.dropped_bins, 1);
        let fit = r.fit.clone().unwrap();
        assert_eq!(fit.n, 20);
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!(bins_csv(&r).starts_with("dlt,count,mean_info,ci95\n0,10,"));
    }
}
