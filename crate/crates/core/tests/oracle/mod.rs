//! Brute-force reference implementations, written without the library's
//! linear algebra so they can check it.
#![allow(dead_code, clippy::needless_range_loop)]

use std::path::Path;

pub fn read_matrix(path: impl AsRef<Path>) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split('\t').map(String::from).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split('\t').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

pub fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

pub fn mean(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in x {
        s += v;
    }
    s / x.len() as f64
}

pub fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    let mut s = 0.0;
    for v in x {
        s += (v - m) * (v - m);
    }
    s / (x.len() - 1) as f64
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut num = 0.0;
    let mut dx2 = 0.0;
    let mut dy2 = 0.0;
    for i in 0..x.len() {
        num += (x[i] - mx) * (y[i] - my);
        dx2 += (x[i] - mx).powi(2);
        dy2 += (y[i] - my).powi(2);
    }
    num / (dx2 * dy2).sqrt()
}

/// Rank by counting: 1 + number below + half the other ties.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|a| {
            let below = x.iter().filter(|b| *b < a).count() as f64;
            let equal = x.iter().filter(|b| *b == a).count() as f64;
            1.0 + below + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

pub fn alpha(rows: &[Vec<f64>]) -> f64 {
    let k = rows[0].len();
    let item_var: f64 = (0..k).map(|j| var(&column(rows, j))).sum();
    let totals: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    k as f64 / (k as f64 - 1.0) * (1.0 - item_var / var(&totals))
}

pub fn corr(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = rows[0].len();
    let cols: Vec<Vec<f64>> = (0..k).map(|j| column(rows, j)).collect();
    (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { pearson(&cols[i], &cols[j]) }).collect()).collect()
}

/// Gaussian elimination with partial pivoting.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, v)| r.iter().copied().chain([*v]).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..=n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

pub fn inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| solve(a, &(0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect::<Vec<_>>()))
        .collect();
    (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
}

pub fn log_det(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m = a.to_vec();
    let mut ld = 0.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        ld += m[c][c].abs().ln();
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    ld
}

/// R² of item i regressed on the others, from the correlation matrix.
pub fn smc_by_regression(r: &[Vec<f64>], i: usize) -> f64 {
    let others: Vec<usize> = (0..r.len()).filter(|&j| j != i).collect();
    let a: Vec<Vec<f64>> = others.iter().map(|&p| others.iter().map(|&q| r[p][q]).collect()).collect();
    let b: Vec<f64> = others.iter().map(|&p| r[p][i]).collect();
    let beta = solve(&a, &b);
    beta.iter().zip(&b).map(|(x, y)| x * y).sum()
}

pub fn lambda6(rows: &[Vec<f64>]) -> f64 {
    let k = rows[0].len();
    let r = corr(rows);
    let totals: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    let err: f64 = (0..k).map(|j| var(&column(rows, j)) * (1.0 - smc_by_regression(&r, j))).sum();
    1.0 - err / var(&totals)
}

pub fn bartlett_chi2(r: &[Vec<f64>], n: usize) -> f64 {
    let p = r.len() as f64;
    -((n as f64 - 1.0) - (2.0 * p + 5.0) / 6.0) * log_det(r)
}

pub fn kmo(r: &[Vec<f64>]) -> f64 {
    let inv = inverse(r);
    let k = r.len();
    let (mut a, mut b) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            if i != j {
                a += r[i][j] * r[i][j];
                let q = inv[i][j] / (inv[i][i] * inv[j][j]).sqrt();
                b += q * q;
            }
        }
    }
    a / (a + b)
}

/// ω of an exact one-factor structure with standardized items.
pub fn omega_closed(loadings: &[f64]) -> f64 {
    let s: f64 = loadings.iter().sum();
    let u: f64 = loadings.iter().map(|l| 1.0 - l * l).sum();
    s * s / (s * s + u)
}

pub fn one_factor_corr(loadings: &[f64]) -> Vec<Vec<f64>> {
    let k = loadings.len();
    (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { loadings[i] * loadings[j] }).collect()).collect()
}

/// Mean over all equal splits of a 4-item scale of `2(1 - (σ²_A + σ²_B)/σ²_X)`.
pub fn mean_split_half_4(rows: &[Vec<f64>]) -> f64 {
    let splits = [([0, 1], [2, 3]), ([0, 2], [1, 3]), ([0, 3], [1, 2])];
    let totals: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    let vx = var(&totals);
    let mut s = 0.0;
    for (a, b) in splits {
        let ha: Vec<f64> = rows.iter().map(|r| r[a[0]] + r[a[1]]).collect();
        let hb: Vec<f64> = rows.iter().map(|r| r[b[0]] + r[b[1]]).collect();
        s += 2.0 * (1.0 - (var(&ha) + var(&hb)) / vx);
    }
    s / 3.0
}
