//! Independent reference implementations. Deliberately naive: explicit index loops,
//! no shared helpers with the library.

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Mat = Vec<Vec<f64>>;

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

/// `exp(A)` by scaling and squaring with a 30-term Taylor series.
pub fn expm(a: &Mat) -> Mat {
    let n = a.len();
    let norm = a.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.5 {
        s += 1;
    }
    let scale = 2f64.powi(s);
    let scaled: Mat = a.iter().map(|r| r.iter().map(|v| v / scale).collect()).collect();
    let mut result: Mat = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut term = result.clone();
    for k in 1..=30 {
        term = matmul(&term, &scaled);
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v /= k as f64;
            }
        }
        for i in 0..n {
            for j in 0..n {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        result = matmul(&result, &result);
    }
    result
}

pub fn matvec(a: &Mat, x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn scale(a: &Mat, t: f64) -> Mat {
    a.iter().map(|r| r.iter().map(|v| v * t).collect()).collect()
}

/// Rate matrix of the linear `simple_reaction` network, written out independently.
pub fn simple_reaction_matrix() -> Mat {
    vec![
        vec![-0.1, 0.1, 0.0, 0.0, 0.0, 0.0],
        vec![0.1, -0.15, 0.05, 0.0, 0.0, 0.0],
        vec![0.0, 0.15, -0.1, 0.03, 0.0, 0.0],
        vec![0.0, 0.0, 0.1, -0.07, 0.01, 0.0],
        vec![0.0, 0.0, 0.0, 0.07, -0.05, 0.0],
        vec![0.0, 0.0, 0.0, 0.0, 0.05, 0.0],
    ]
}

pub fn random_tensor(rng: &mut ChaCha8Rng, dim: (usize, usize, usize), lo: f64, hi: f64) -> Array3<f64> {
    Array3::from_shape_fn(dim, |_| rng.random_range(lo..hi))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// `(mse, mae, mre)` with `eps` in the relative-error denominator.
pub fn brute_errors(p: &Array3<f64>, y: &Array3<f64>, eps: f64) -> (f64, f64, f64) {
    let (s, t, q) = p.dim();
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for i in 0..s {
        for j in 0..t {
            for k in 0..q {
                let d = p[[i, j, k]] - y[[i, j, k]];
                a += d * d;
                b += d.abs();
                c += d.abs() / (y[[i, j, k]].abs() + eps);
            }
        }
    }
    let n = (s * t * q) as f64;
    (a / n, b / n, c / n)
}

/// Per-timestep `(mean relative error, median relative error, mae)`.
pub fn brute_over_time(p: &Array3<f64>, y: &Array3<f64>, eps: f64) -> Vec<(f64, f64, f64)> {
    let (s, t, q) = p.dim();
    (0..t)
        .map(|j| {
            let mut rel = Vec::new();
            let mut abs = 0.0;
            for i in 0..s {
                for k in 0..q {
                    let d = (p[[i, j, k]] - y[[i, j, k]]).abs();
                    rel.push(d / (y[[i, j, k]].abs() + eps));
                    abs += d;
                }
            }
            let mean = rel.iter().sum::<f64>() / rel.len() as f64;
            rel.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = rel.len();
            let median = if n % 2 == 1 { rel[n / 2] } else { (rel[n / 2 - 1] + rel[n / 2]) / 2.0 };
            (mean, median, abs / (s * q) as f64)
        })
        .collect()
}

/// Population standard deviation across members, element by element.
pub fn brute_sigma(members: &[Array3<f64>]) -> Array3<f64> {
    let dim = members[0].dim();
    let m = members.len() as f64;
    Array3::from_shape_fn(dim, |idx| {
        let mean = members.iter().map(|x| x[idx]).sum::<f64>() / m;
        (members.iter().map(|x| (x[idx] - mean).powi(2)).sum::<f64>() / m).sqrt()
    })
}

/// Textbook single-pass Pearson formula; `None` for zero variance.
pub fn brute_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let syy: f64 = y.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx <= 0.0 || vy <= 0.0 {
        return None;
    }
    Some((n * sxy - sx * sy) / (vx.sqrt() * vy.sqrt()))
}

/// `|dy/dt|` by finite differences, normalized by its maximum within each quantity.
pub fn brute_gradients(y: &Array3<f64>, t: &[f64]) -> Array3<f64> {
    let (s, n, q) = y.dim();
    let mut g = Array3::zeros((s, n, q));
    for i in 0..s {
        for j in 0..n {
            for k in 0..q {
                let d = if j == 0 {
                    (y[[i, 1, k]] - y[[i, 0, k]]) / (t[1] - t[0])
                } else if j == n - 1 {
                    (y[[i, n - 1, k]] - y[[i, n - 2, k]]) / (t[n - 1] - t[n - 2])
                } else {
                    (y[[i, j + 1, k]] - y[[i, j - 1, k]]) / (t[j + 1] - t[j - 1])
                };
                g[[i, j, k]] = d.abs();
            }
        }
    }
    for k in 0..q {
        let mut max = 0.0f64;
        for i in 0..s {
            for j in 0..n {
                max = max.max(g[[i, j, k]]);
            }
        }
        if max > 0.0 {
            for i in 0..s {
                for j in 0..n {
                    g[[i, j, k]] /= max;
                }
            }
        }
    }
    g
}

/// Counts by scanning the bin edges linearly; values equal to the top edge go in the last bin.
pub fn brute_histogram(x: &[f64], y: &[f64], bins: usize) -> Vec<Vec<u64>> {
    let edges = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let w = (hi - lo) / bins as f64;
        (lo, w)
    };
    let locate = |v: f64, (lo, w): (f64, f64)| {
        let mut b = bins - 1;
        for i in 0..bins {
            if v < lo + w * (i + 1) as f64 {
                b = i;
                break;
            }
        }
        b
    };
    let (ex, ey) = (edges(x), edges(y));
    let mut counts = vec![vec![0u64; bins]; bins];
    for (&a, &b) in x.iter().zip(y) {
        counts[locate(a, ex)][locate(b, ey)] += 1;
    }
    counts
}
