#![allow(dead_code, clippy::needless_range_loop)]

use std::f64::consts::SQRT_2;

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Black-Scholes call, written out independently of the engines.
pub fn bs_call(s: f64, k: f64, vol: f64, r: f64, tau: f64) -> f64 {
    let sd = vol * tau.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * vol * vol) * tau) / sd;
    s * norm_cdf(d1) - k * (-r * tau).exp() * norm_cdf(d1 - sd)
}

pub fn bs_call_delta(s: f64, k: f64, vol: f64, r: f64, tau: f64) -> f64 {
    let sd = vol * tau.sqrt();
    norm_cdf(((s / k).ln() + (r + 0.5 * vol * vol) * tau) / sd)
}

/// Gaussian elimination with partial pivoting.
pub fn solve<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> [f64; N] {
    for col in 0..N {
        let piv = (col..N)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            for c in col..N {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let s: f64 = (row + 1..N).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}
