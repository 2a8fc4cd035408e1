#![allow(dead_code, clippy::needless_range_loop, clippy::too_many_arguments)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use selinf::DesignMatrix;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn gaussian_vector(rng: &mut ChaCha20Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_design(rng: &mut ChaCha20Rng, n: usize, p: usize) -> DesignMatrix {
    let data: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    DesignMatrix::from_row_slice(n, p, &data).unwrap()
}

pub fn column(x: &DesignMatrix, j: usize) -> Vec<f64> {
    x.values().column(j).iter().copied().collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Gaussian elimination with partial pivoting on a dense copy.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-13 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut out = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * out[k]).sum();
        out[row] = (b[row] - s) / a[row][row];
    }
    Some(out)
}

/// Least-squares coefficients of `y` on the columns `cols`, via the normal
/// equations built with explicit loops.
pub fn normal_equations(x: &DesignMatrix, cols: &[usize], rhs_shift: &[f64], y: &[f64]) -> Option<Vec<f64>> {
    let xs: Vec<Vec<f64>> = cols.iter().map(|&j| column(x, j)).collect();
    let gram: Vec<Vec<f64>> = xs.iter().map(|a| xs.iter().map(|b| dot(a, b)).collect()).collect();
    let rhs: Vec<f64> = xs.iter().zip(rhs_shift).map(|(a, s)| dot(a, y) - s).collect();
    gauss_solve(gram, rhs)
}

/// Outcome of the exhaustive LASSO search.
#[derive(Debug, Clone, PartialEq)]
pub enum BruteLasso {
    /// Exactly one sign pattern satisfies the optimality conditions with margin.
    State(Vec<usize>, Vec<i8>),
    /// Some pattern sits within the margin of a boundary; skip this instance.
    Ambiguous,
}

/// Enumerates all `3^p` sign patterns and keeps those satisfying the LASSO
/// optimality conditions strictly by `margin`.
pub fn brute_force_lasso(x: &DesignMatrix, y: &DVector<f64>, lambda: f64, margin: f64) -> BruteLasso {
    let p = x.p();
    let yv: Vec<f64> = y.iter().copied().collect();
    let cols: Vec<Vec<f64>> = (0..p).map(|j| column(x, j)).collect();
    let mut found = Vec::new();
    let mut close = false;
    for code in 0..3usize.pow(p as u32) {
        let mut c = code;
        let mut pattern = vec![0i8; p];
        for s in pattern.iter_mut() {
            *s = [0, 1, -1][c % 3];
            c /= 3;
        }
        let active: Vec<usize> = (0..p).filter(|&j| pattern[j] != 0).collect();
        let signs: Vec<i8> = active.iter().map(|&j| pattern[j]).collect();
        let shift: Vec<f64> = signs.iter().map(|&s| lambda * f64::from(s)).collect();
        let beta_e = if active.is_empty() {
            Vec::new()
        } else {
            match normal_equations(x, &active, &shift, &yv) {
                Some(b) => b,
                None => continue,
            }
        };
        let mut resid = yv.clone();
        for (k, &j) in active.iter().enumerate() {
            for i in 0..resid.len() {
                resid[i] -= cols[j][i] * beta_e[k];
            }
        }
        // slack of each optimality inequality; positive means satisfied
        let mut slacks = Vec::new();
        for (k, &s) in signs.iter().enumerate() {
            slacks.push(f64::from(s) * beta_e[k]);
        }
        for j in (0..p).filter(|j| pattern[*j] == 0) {
            slacks.push(lambda - dot(&cols[j], &resid).abs());
        }
        let worst = slacks.iter().copied().fold(f64::INFINITY, f64::min);
        if worst > margin {
            found.push((active, signs));
        } else if worst > -margin {
            close = true;
        }
    }
    if close || found.len() != 1 {
        return BruteLasso::Ambiguous;
    }
    let (a, s) = found.pop().unwrap();
    BruteLasso::State(a, s)
}

/// Adaptive Simpson quadrature.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Truncated normal CDF by direct quadrature of the density. The density is
/// rescaled by its value at the point of `[a, b]` nearest the mean so that
/// far-tail intervals integrate without underflow.
pub fn quadrature_truncated_cdf(x: f64, variance: f64, mean: f64, a: f64, b: f64) -> f64 {
    let sd = variance.sqrt();
    let za = (a - mean) / sd;
    let zb = (b - mean) / sd;
    let zx = ((x - mean) / sd).clamp(za, zb);
    let anchor = if za > 0.0 {
        za
    } else if zb < 0.0 {
        zb
    } else {
        0.0
    };
    // beyond 40 units past the anchor the rescaled density is below e^-800
    let lo = za.max(anchor - 40.0);
    let hi = zb.min(anchor + 40.0);
    let zx = zx.clamp(lo, hi);
    let total = scaled_mass(lo, hi, anchor);
    scaled_mass(lo, zx, anchor) / total
}

/// Survival `1 − F` by quadrature of the upper piece, without subtraction.
pub fn quadrature_truncated_sf(x: f64, variance: f64, mean: f64, a: f64, b: f64) -> f64 {
    let (lo, x, hi) = (-b, -x, -a);
    quadrature_truncated_cdf(x, variance, -mean, lo, hi)
}

/// `∫ exp(−(t² − anchor²)/2) dt` over `[lo, hi]`, integrated relative to the
/// density's own peak on the interval so tiny masses keep relative accuracy.
fn scaled_mass(lo: f64, hi: f64, anchor: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let peak = if lo > 0.0 {
        lo
    } else if hi < 0.0 {
        hi
    } else {
        0.0
    };
    let density = |t: f64| (-0.5 * (t - peak) * (t + peak)).exp();
    simpson(&density, lo, hi, 1e-15) * (-0.5 * (peak - anchor) * (peak + anchor)).exp()
}

/// The point `y + (t − ηᵀy)·c`, with `c = Ση/ηᵀΣη` for the contrast in use.
pub fn along(y: &DVector<f64>, c: &DVector<f64>, observed: f64, t: f64) -> DVector<f64> {
    y + c * (t - observed)
}

/// Finds the edge of `{t : inside(t)}` starting at `start` (inside) and
/// moving in direction `dir`. Returns ±∞ when still inside at `limit`.
pub fn line_search_edge<F: Fn(f64) -> bool>(inside: F, start: f64, dir: f64, limit: f64, tol: f64) -> f64 {
    let mut step = 1e-3;
    let mut good = start;
    let mut bad;
    loop {
        let t = start + dir * step;
        if !inside(t) {
            bad = t;
            break;
        }
        good = t;
        if step > limit {
            return dir * f64::INFINITY;
        }
        step *= 2.0;
    }
    while (bad - good).abs() > tol {
        let mid = 0.5 * (good + bad);
        if inside(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    0.5 * (good + bad)
}

pub fn to_dmatrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let p = rows[0].len();
    DMatrix::from_fn(n, p, |i, j| rows[i][j])
}
