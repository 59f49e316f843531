//! Correlation and regression primitives.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn check_pair(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < min {
        return Err(Error::InsufficientData(format!(
            "need at least {min} observations, got {}",
            x.len()
        )));
    }
    Ok(())
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|x| *x == v[0])
}

/// Two-sided p-value of a correlation coefficient via the t distribution
/// with `n - 2` degrees of freedom.
fn correlation_p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Pearson's r with its two-sided p-value.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    check_pair(x, y, 3)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || is_constant(x) {
        return Err(Error::ZeroVariance("x".into()));
    }
    if syy == 0.0 || is_constant(y) {
        return Err(Error::ZeroVariance("y".into()));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok((r, correlation_p_value(r, x.len())))
}

/// Squared Pearson correlation and the two-sided p-value of r.
pub fn pearson_r2(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let (r, p) = pearson(x, y)?;
    Ok((r * r, p))
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho (Pearson on average ranks) and its t-approximation p-value.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    check_pair(x, y, 3)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Kendall's tau-b with the tie-corrected normal approximation for the
/// two-sided p-value.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    check_pair(x, y, 2)?;
    let n = x.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut ties_x, mut ties_y) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].total_cmp(&x[j]) as i64;
            let dy = y[i].total_cmp(&y[j]) as i64;
            match (dx, dy) {
                (0, 0) => {}
                (0, _) => ties_x += 1,
                (_, 0) => ties_y += 1,
                _ if dx == dy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n0 = concordant + discordant;
    let denom = (((n0 + ties_x) as f64) * ((n0 + ties_y) as f64)).sqrt();
    if denom == 0.0 {
        return Err(Error::ZeroVariance("ranking with all elements tied".into()));
    }
    let tau = ((concordant - discordant) as f64 / denom).clamp(-1.0, 1.0);

    let groups = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        let mut sizes = Vec::new();
        let mut i = 0;
        while i < s.len() {
            let mut j = i;
            while j + 1 < s.len() && s[j + 1] == s[i] {
                j += 1;
            }
            if j > i {
                sizes.push((j - i + 1) as f64);
            }
            i = j + 1;
        }
        sizes
    };
    let (tx, ty) = (groups(x), groups(y));
    let nf = n as f64;
    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let vt: f64 = tx.iter().map(|t| t * (t - 1.0) * (2.0 * t + 5.0)).sum();
    let vu: f64 = ty.iter().map(|u| u * (u - 1.0) * (2.0 * u + 5.0)).sum();
    let v1 = tx.iter().map(|t| t * (t - 1.0)).sum::<f64>()
        * ty.iter().map(|u| u * (u - 1.0)).sum::<f64>()
        / (2.0 * nf * (nf - 1.0));
    let v2 = if n > 2 {
        tx.iter().map(|t| t * (t - 1.0) * (t - 2.0)).sum::<f64>()
            * ty.iter().map(|u| u * (u - 1.0) * (u - 2.0)).sum::<f64>()
            / (9.0 * nf * (nf - 1.0) * (nf - 2.0))
    } else {
        0.0
    };
    let var = (v0 - vt - vu) / 18.0 + v1 + v2;
    let p = if var > 0.0 {
        let z = (concordant - discordant) as f64 / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * (1.0 - normal.cdf(z.abs()))).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok((tau, p))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionSummary {
    pub coefficients: Vec<Coefficient>,
    pub r2: f64,
    pub adj_r2: f64,
    pub residual_std_error: f64,
    pub df_residual: usize,
    pub n: usize,
    /// Residuals on the standardized scale, in observation order.
    pub residuals: Vec<f64>,
}

impl RegressionSummary {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

fn standardize(v: &[f64], what: &str) -> Result<Vec<f64>> {
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    if var == 0.0 {
        return Err(Error::ZeroVariance(what.to_string()));
    }
    let sd = var.sqrt();
    Ok(v.iter().map(|x| (x - m) / sd).collect())
}

/// Symmetric-pivoted Cholesky `P^T A P = L L^T`. Returns the pivot order
/// and `L` (row-major, `k x k`) over the accepted columns, plus the indices
/// of columns whose remaining diagonal fell below `tol` relative to the
/// largest initial diagonal.
fn pivoted_cholesky(a: &[Vec<f64>], tol: f64) -> (Vec<usize>, Vec<Vec<f64>>, Vec<usize>) {
    let p = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut perm: Vec<usize> = (0..p).collect();
    let scale = (0..p).map(|i| a[i][i]).fold(0.0, f64::max);
    let mut l = vec![vec![0.0; p]; p];
    let mut rank = p;
    for k in 0..p {
        let (piv, &best) = (k..p)
            .map(|i| (i, &m[perm[i]][perm[i]]))
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        if best <= tol * scale.max(1.0) {
            rank = k;
            break;
        }
        perm.swap(k, piv);
        l.swap(k, piv);
        let pk = perm[k];
        let d = m[pk][pk].sqrt();
        l[k][k] = d;
        for i in k + 1..p {
            let pi = perm[i];
            l[i][k] = m[pi][pk] / d;
        }
        for i in k + 1..p {
            for j in k + 1..=i {
                let (pi, pj) = (perm[i], perm[j]);
                let v = m[pi][pj] - l[i][k] * l[j][k];
                m[pi][pj] = v;
                m[pj][pi] = v;
            }
        }
    }
    let dependent = perm[rank..].to_vec();
    let l = l
        .into_iter()
        .take(rank)
        .map(|row| row[..rank].to_vec())
        .collect();
    (perm[..rank].to_vec(), l, dependent)
}

fn forward(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; b.len()];
    for i in 0..b.len() {
        let s: f64 = (0..i).map(|j| l[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / l[i][i];
    }
    x
}

fn backward_t(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| l[j][i] * x[j]).sum();
        x[i] = (b[i] - s) / l[i][i];
    }
    x
}

/// Least squares on standardized variables (every predictor and `y` scaled
/// to mean 0, sd 1). With `intercept` a constant column is added; on
/// standardized data its estimate is 0. Solved through the normal
/// equations with a symmetric-pivoted Cholesky factorization.
pub fn ols_standardized(
    columns: &[(String, Vec<f64>)],
    y: &[f64],
    intercept: bool,
) -> Result<RegressionSummary> {
    let n = y.len();
    let p = columns.len() + usize::from(intercept);
    for (name, c) in columns {
        if c.len() != n {
            return Err(Error::Parameter(format!(
                "column {name} has {} rows, expected {n}",
                c.len()
            )));
        }
    }
    if n <= p || n < 3 {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {p} parameters"
        )));
    }
    let ys = standardize(y, "dependent variable")?;
    let mut names = Vec::with_capacity(p);
    let mut design: Vec<Vec<f64>> = Vec::with_capacity(p);
    if intercept {
        names.push("const".to_string());
        design.push(vec![1.0; n]);
    }
    for (name, c) in columns {
        names.push(name.clone());
        design.push(standardize(c, name)?);
    }
    let xtx: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| design[i].iter().zip(&design[j]).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    let (order, l, dependent) = pivoted_cholesky(&xtx, 1e-10);
    if !dependent.is_empty() {
        let mut cols: Vec<String> = dependent.iter().map(|&i| names[i].clone()).collect();
        cols.sort();
        return Err(Error::RankDeficient { columns: cols });
    }
    let xty: Vec<f64> = order
        .iter()
        .map(|&i| design[i].iter().zip(&ys).map(|(a, b)| a * b).sum())
        .collect();
    let beta_perm = backward_t(&l, &forward(&l, &xty));
    let mut beta = vec![0.0; p];
    for (k, &i) in order.iter().enumerate() {
        beta[i] = beta_perm[k];
    }

    let fitted: Vec<f64> = (0..n)
        .map(|r| (0..p).map(|i| design[i][r] * beta[i]).sum())
        .collect();
    let residuals: Vec<f64> = ys.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let tss: f64 = ys.iter().map(|v| v * v).sum();
    let df = n - p;
    let sigma2 = rss / df as f64;
    let r2 = (1.0 - rss / tss).clamp(0.0, 1.0);
    let adj_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / df as f64;

    // diag((X^T X)^{-1}) through unit solves in pivoted coordinates
    let mut inv_diag = vec![0.0; p];
    for (k_pos, &i) in order.iter().enumerate() {
        let mut e = vec![0.0; p];
        e[k_pos] = 1.0;
        inv_diag[i] = backward_t(&l, &forward(&l, &e))[k_pos];
    }
    let tdist = StudentsT::new(0.0, 1.0, df as f64).expect("df > 0");
    let coefficients = names
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let se = (sigma2 * inv_diag[i]).sqrt();
            let t = if se > 0.0 { beta[i] / se } else { 0.0 };
            let p_value = if se > 0.0 {
                (2.0 * (1.0 - tdist.cdf(t.abs()))).clamp(0.0, 1.0)
            } else {
                0.0
            };
            Coefficient {
                name,
                estimate: beta[i],
                std_error: se,
                t,
                p_value,
            }
        })
        .collect();
    Ok(RegressionSummary {
        coefficients,
        r2,
        adj_r2,
        residual_std_error: sigma2.sqrt(),
        df_residual: df,
        n,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_perfect_lines() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson_r2(&x, &y).unwrap().0 - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_r2(&x, &neg).unwrap().0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_ten_point_fixture() {
        // Hand-computed: x = 1..10, y = [2,1,4,3,7,5,6,9,8,10]
        // sxx = 82.5, syy = 82.5, sxy = 76.5 -> r = 76.5/82.5
        // p-value frozen from scipy.stats.pearsonr on the same data.
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y = [2.0, 1.0, 4.0, 3.0, 7.0, 5.0, 6.0, 9.0, 8.0, 10.0];
        let (r, p) = pearson(&x, &y).unwrap();
        assert!((r - 76.5 / 82.5).abs() < 1e-14);
        assert!((p - 0.000_112_034_506_393_977_29).abs() < 1e-10, "p = {p}");
    }

    #[test]
    fn pearson_zero_variance() {
        assert!(matches!(
            pearson_r2(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::ZeroVariance(_))
        ));
    }

    #[test]
    fn tau_identical_and_reversed() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert_eq!(kendall_tau(&a, &a).unwrap().0, 1.0);
        assert_eq!(kendall_tau(&a, &b).unwrap().0, -1.0);
    }

    #[test]
    fn tau_one_adjacent_swap() {
        let (tau, _) = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 3.0, 4.0]).unwrap();
        assert!((tau - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn tau_with_ties_matches_hand_count() {
        // x = [1,2,2,3], y = [1,3,2,4]: pairs (i<j):
        // (0,1) C, (0,2) C, (0,3) C, (1,2) tie in x only, (1,3) C, (2,3) C
        // P=5, Q=0, T=1, U=0 -> 5 / sqrt(6*5)
        // p from scipy.stats.kendalltau (asymptotic with ties)
        let (tau, p) = kendall_tau(&[1.0, 2.0, 2.0, 3.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((tau - 5.0 / 30f64.sqrt()).abs() < 1e-15);
        assert!((p - 0.070_951_492_427_305_63).abs() < 1e-10, "p = {p}");
    }

    #[test]
    fn tau_too_short() {
        assert!(kendall_tau(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn spearman_monotone() {
        let x: Vec<f64> = (1..=8).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        assert!((spearman(&x, &y).unwrap().0 - 1.0).abs() < 1e-15);
        assert!(spearman(&[2.0; 5], &[2.0; 5]).is_err());
    }

    #[test]
    fn spearman_eight_point_fixture() {
        // y = [10, 30, 20, 40, 40, 60, 80, 70] ranks to
        // [1, 3, 2, 4.5, 4.5, 6, 8, 7]; against x ranks 1..8 with mean 4.5:
        // sxy = 39.5, sxx = 42, syy = 41.5. p from scipy.stats.spearmanr.
        let x: Vec<f64> = (1..=8).map(f64::from).collect();
        let y = [10.0, 30.0, 20.0, 40.0, 40.0, 60.0, 80.0, 70.0];
        let (rho, _) = spearman(&x, &y).unwrap();
        let (rho, p) = (rho, spearman(&x, &y).unwrap().1);
        assert!((rho - 39.5 / (42.0f64 * 41.5).sqrt()).abs() < 1e-14);
        assert!((p - 0.000_375_311_873_790_438).abs() < 1e-10);
    }

    #[test]
    fn average_ranks_ties() {
        assert_eq!(
            average_ranks(&[3.0, 1.0, 3.0, 2.0]),
            vec![3.5, 1.0, 3.5, 2.0]
        );
    }

    #[test]
    fn ols_identity() {
        let x: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let s = ols_standardized(&[("x".into(), x.clone())], &x, true).unwrap();
        assert!((s.coefficient("x").unwrap().estimate - 1.0).abs() < 1e-12);
        assert!((s.r2 - 1.0).abs() < 1e-12);
        assert!(s.coefficient("const").unwrap().estimate.abs() < 1e-12);
    }

    #[test]
    fn ols_orthogonal() {
        let x = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let y = [1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0];
        let s = ols_standardized(&[("x".into(), x.to_vec())], &y, true).unwrap();
        assert!(s.coefficient("x").unwrap().estimate.abs() < 1e-12);
        assert!(s.r2.abs() < 1e-12);
    }

    #[test]
    fn ols_two_predictors_match_normal_equations() {
        // Oracle: for standardized variables the coefficients solve
        // [1 r12; r12 1] b = [r1y; r2y].
        let x1 = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let x2 = [2.0, 1.0, 4.0, 3.0, 6.0, 5.0, 9.0];
        let y = [1.5, 2.0, 3.9, 3.7, 6.1, 5.0, 8.2];
        let (r12, _) = pearson(&x1, &x2).unwrap();
        let (r1y, _) = pearson(&x1, &y).unwrap();
        let (r2y, _) = pearson(&x2, &y).unwrap();
        let det = 1.0 - r12 * r12;
        let b1 = (r1y - r12 * r2y) / det;
        let b2 = (r2y - r12 * r1y) / det;
        let s = ols_standardized(
            &[("x1".into(), x1.to_vec()), ("x2".into(), x2.to_vec())],
            &y,
            true,
        )
        .unwrap();
        assert!((s.coefficient("x1").unwrap().estimate - b1).abs() < 1e-12);
        assert!((s.coefficient("x2").unwrap().estimate - b2).abs() < 1e-12);
        assert!(s.adj_r2 <= s.r2);
        assert_eq!(s.df_residual, 4);
    }

    #[test]
    fn ols_rank_deficient_names_columns() {
        let x1 = [1.0, 2.0, 3.0, 4.0, 5.0];
        let x2: Vec<f64> = x1.iter().map(|v| 2.0 * v).collect();
        let y = [1.0, 3.0, 2.0, 5.0, 4.0];
        let err =
            ols_standardized(&[("a".into(), x1.to_vec()), ("b".into(), x2)], &y, true).unwrap_err();
        match err {
            Error::RankDeficient { columns } => assert_eq!(columns.len(), 1),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn ols_residuals_orthogonal_to_predictors() {
        let x1: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).sin()).collect();
        let x2: Vec<f64> = (0..30).map(|i| (i as f64 * 0.3).cos()).collect();
        let y: Vec<f64> = (0..30)
            .map(|i| (i as f64 * 1.3).sin() + 0.2 * i as f64)
            .collect();
        let s = ols_standardized(
            &[("x1".into(), x1.clone()), ("x2".into(), x2.clone())],
            &y,
            true,
        )
        .unwrap();
        for c in [&x1, &x2] {
            let z = standardize(c, "c").unwrap();
            let dot: f64 = z.iter().zip(&s.residuals).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-8);
        }
    }
}
