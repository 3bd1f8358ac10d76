use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Two-sided Mann-Whitney U test result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MannWhitney {
    /// `min(U1, U2)`.
    pub u: f64,
    pub p_value: f64,
    pub exact: bool,
}

/// Largest group size for which the exact null distribution is enumerated.
pub const EXACT_LIMIT: usize = 10;

fn ranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

/// `counts[u]` = number of rank arrangements giving `U = u` for sizes `n1`, `n2`.
fn exact_u_counts(n1: usize, n2: usize) -> Vec<f64> {
    // f[i][j][u]: arrangements of i x-items and j y-items with statistic u
    let max_u = n1 * n2;
    let mut f = vec![vec![vec![0.0f64; max_u + 1]; n2 + 1]; n1 + 1];
    for i in 0..=n1 {
        f[i][0][0] = 1.0;
    }
    for j in 0..=n2 {
        f[0][j][0] = 1.0;
    }
    for i in 1..=n1 {
        for j in 1..=n2 {
            for u in 0..=i * j {
                // largest item is an x (beats all j y-items) or a y
                let from_x = if u >= j { f[i - 1][j][u - j] } else { 0.0 };
                f[i][j][u] = from_x + f[i][j - 1][u];
            }
        }
    }
    f[n1][n2].clone()
}

pub fn mann_whitney(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    let (n1, n2) = (x.len(), y.len());
    if n1 < 2 || n2 < 2 {
        return Err(Error::Invalid(format!("need ≥ 2 samples per group, got {n1} and {n2}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite sample".into()));
    }
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (r, ties) = ranks(&pooled);
    let r1: f64 = r[..n1].iter().sum();
    let u1 = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let u2 = (n1 * n2) as f64 - u1;
    let u = u1.min(u2);

    if n1 <= EXACT_LIMIT && n2 <= EXACT_LIMIT && ties.is_empty() {
        let counts = exact_u_counts(n1, n2);
        let total: f64 = counts.iter().sum();
        let tail: f64 = counts[..=u as usize].iter().sum::<f64>() / total;
        return Ok(MannWhitney {
            u,
            p_value: (2.0 * tail).min(1.0),
            exact: true,
        });
    }

    let n = (n1 + n2) as f64;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let sigma = ((n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_term)).sqrt();
    if !(sigma > 0.0) {
        return Ok(MannWhitney {
            u,
            p_value: 1.0,
            exact: false,
        });
    }
    let mean = (n1 * n2) as f64 / 2.0;
    let z = ((mean - u).abs() - 0.5).max(0.0) / sigma;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(MannWhitney {
        u,
        p_value: (2.0 * normal.sf(z)).min(1.0),
        exact: false,
    })
}

/// Holm step-down: sort ascending, reject while `p_(i) ≤ α / (m − i)`.
pub fn holm(p_values: &[f64], alpha: f64) -> Vec<bool> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut reject = vec![false; m];
    for (rank, &i) in order.iter().enumerate() {
        if p_values[i] <= alpha / (m - rank) as f64 {
            reject[i] = true;
        } else {
            break;
        }
    }
    reject
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub group: String,
    pub median: f64,
    pub u: f64,
    pub p_value: f64,
    pub exact: bool,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupComparison {
    pub best: String,
    pub best_median: f64,
    pub alpha: f64,
    /// One row per non-best group, in input order.
    pub rows: Vec<Comparison>,
}

/// Compares the highest-median group against every other one with Holm correction.
/// Median ties go to the earlier group.
pub fn compare_groups(groups: &[(String, Vec<f64>)], alpha: f64) -> Result<GroupComparison> {
    if groups.len() < 2 {
        return Err(Error::Invalid(format!("need ≥2 groups, got {}", groups.len())));
    }
    let medians: Vec<f64> = groups.iter().map(|(_, v)| median(v)).collect();
    let mut best = 0;
    for (i, &m) in medians.iter().enumerate() {
        if m > medians[best] {
            best = i;
        }
    }
    let mut rows = Vec::new();
    for (i, (name, samples)) in groups.iter().enumerate() {
        if i == best {
            continue;
        }
        let mw = mann_whitney(&groups[best].1, samples)?;
        rows.push(Comparison {
            group: name.clone(),
            median: medians[i],
            u: mw.u,
            p_value: mw.p_value,
            exact: mw.exact,
            significant: false,
        });
    }
    let p: Vec<f64> = rows.iter().map(|r| r.p_value).collect();
    for (row, rej) in rows.iter_mut().zip(holm(&p, alpha)) {
        row.significant = rej;
    }
    Ok(GroupComparison {
        best: groups[best].0.clone(),
        best_median: medians[best],
        alpha,
        rows,
    })
}
