//! Brute-force reference implementations over raw `(score, label)` pairs.
//!
//! Deliberately naive and independent of the library: quadratic pair loops, explicit
//! threshold sweeps, and a literal transcription of the curve definitions.

#![allow(dead_code, clippy::needless_range_loop)]

/// Kendall tau-b by enumerating every pair.
pub fn tau_b(s: &[f64], u: &[f64]) -> Option<f64> {
    let n = s.len();
    let (mut c, mut d, mut tie_s, mut tie_u) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let a = (s[i] - s[j]).signum();
            let b = (u[i] - u[j]).signum();
            if s[i] == s[j] {
                tie_s += 1;
            }
            if u[i] == u[j] {
                tie_u += 1;
            }
            if s[i] != s[j] && u[i] != u[j] {
                if a == b {
                    c += 1;
                } else {
                    d += 1;
                }
            }
        }
    }
    let pairs = (n * n.saturating_sub(1) / 2) as i64;
    let denom = (((pairs - tie_s) * (pairs - tie_u)) as f64).sqrt();
    (denom > 0.0).then(|| (c - d) as f64 / denom)
}

/// Average rank of each value (1-based), by counting.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

pub fn spearman(s: &[f64], u: &[f64]) -> Option<f64> {
    pearson(&midranks(s), &midranks(u))
}

/// Probability that a random positive outscores a random negative, ties counting half.
pub fn auroc(s: &[f64], u: &[f64]) -> Option<f64> {
    let (mut wins, mut total) = (0.0, 0.0);
    for (i, &a) in s.iter().enumerate() {
        if u[i] != 1.0 {
            continue;
        }
        for (j, &b) in s.iter().enumerate() {
            if u[j] != 0.0 {
                continue;
            }
            total += 1.0;
            if a > b {
                wins += 1.0;
            } else if a == b {
                wins += 0.5;
            }
        }
    }
    (total > 0.0).then(|| wins / total)
}

/// Average precision: sweep every distinct score as a `score >= t` threshold from the top.
pub fn aucpr(s: &[f64], u: &[f64]) -> Option<f64> {
    let positives = u.iter().filter(|&&v| v == 1.0).count() as f64;
    if positives == 0.0 {
        return None;
    }
    let mut thresholds: Vec<f64> = s.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let (mut ap, mut prev_recall) = (0.0, 0.0);
    for t in thresholds {
        let predicted = s.iter().filter(|&&v| v >= t).count() as f64;
        let hits = s.iter().zip(u).filter(|(&v, &l)| v >= t && l == 1.0).count() as f64;
        let recall = hits / positives;
        ap += (recall - prev_recall) * (hits / predicted);
        prev_recall = recall;
    }
    Some(ap)
}

/// Counts `(n1_s, n_s)` for `s = 0..=k`.
fn tally(s: &[u8], u: &[u8], k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut ones = vec![0.0; k + 1];
    let mut all = vec![0.0; k + 1];
    for (&a, &b) in s.iter().zip(u) {
        all[a as usize] += 1.0;
        if b == 1 {
            ones[a as usize] += 1.0;
        }
    }
    (ones, all)
}

fn trapezoid_unit(y: &[f64]) -> f64 {
    y.windows(2).map(|w| (w[0] + w[1]) / 2.0).sum()
}

/// Y_so curve (with its terminal zero) and the capped normalized area.
pub fn mpa(s: &[u8], u: &[u8], k: usize) -> (Vec<f64>, f64) {
    let (ones, all) = tally(s, u, k);
    let precision: Vec<Option<f64>> = (0..=k).map(|i| (all[i] > 0.0).then(|| ones[i] / all[i])).collect();
    let mut y = Vec::new();
    for i in 0..=k {
        let mut v = 0.0;
        if let Some(p) = precision[i] {
            let mut best = f64::NEG_INFINITY;
            for j in 0..i {
                if let Some(q) = precision[j] {
                    if q > best {
                        best = q;
                    }
                    v += p - best;
                }
            }
        }
        y.push(v);
    }
    y.push(0.0);
    let points = (k + 1) as f64;
    let norm = (points / 2.0).ceil() * (points / 2.0).floor();
    let area = trapezoid_unit(&y) / norm;
    (y, if area < 0.0 { 0.0 } else { area })
}

/// Y_d curve (with its terminal zero) and its area.
pub fn wra(s: &[u8], u: &[u8], k: usize) -> (Vec<f64>, f64) {
    let (ones, all) = tally(s, u, k);
    let u1: f64 = ones.iter().sum();
    let u0: f64 = all.iter().sum::<f64>() - u1;
    let mut y = Vec::new();
    for i in 0..=k {
        if u0 == 0.0 || u1 == 0.0 {
            y.push(0.0);
            continue;
        }
        let below: f64 = (0..i).map(|j| all[j] - ones[j]).sum();
        y.push(below / u0 * ones[i] / u1);
    }
    y.push(0.0);
    let area = trapezoid_unit(&y);
    (y, area)
}

pub fn harmonic(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

/// The 20-pair worked fixture: four pairs at each score 0..=4 with 1, 1, 2, 3, 4 positives.
pub fn worked_fixture() -> (Vec<u8>, Vec<u8>) {
    let positives = [1, 1, 2, 3, 4];
    let (mut s, mut u) = (Vec::new(), Vec::new());
    for (score, &p) in positives.iter().enumerate() {
        for i in 0..4 {
            s.push(score as u8);
            u.push(u8::from(i < p));
        }
    }
    (s, u)
}
