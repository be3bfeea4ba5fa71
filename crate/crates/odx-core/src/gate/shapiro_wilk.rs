//! Shapiro-Wilk normality test, Royston's AS R94 evaluation.
//!
//! W is the squared correlation between the ordered sample and the expected
//! normal order-statistic coefficients; the p-value comes from Royston's
//! normalizing transformation of 1 - W. Valid for 3 <= n <= 5000, the same
//! domain R's implementation supports.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::normal::{phi, phi_inv};
use super::{TestKind, TestReport};

const MIN_N: usize = 3;
const MAX_N: usize = 5000;

pub fn shapiro_wilk(z: &Tensor) -> Result<TestReport> {
    let n = z.len();
    if !(MIN_N..=MAX_N).contains(&n) {
        return Err(Error::SampleSize {
            n,
            requirement: format!("shapiro_wilk supports {MIN_N} <= n <= {MAX_N}"),
        });
    }

    let mut x: Vec<f64> = z.data().to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).expect("tensor data is finite"));

    let range = x[n - 1] - x[0];
    if range <= 0.0 {
        return Err(Error::parameter(
            "shapiro_wilk is undefined for a zero-variance sample".to_string(),
        ));
    }

    let w = w_statistic(&x);
    let p_value = royston_p_value(w, n).clamp(0.0, 1.0);

    Ok(TestReport {
        test: TestKind::ShapiroWilk,
        statistic: w,
        p_value,
        n,
        accepted_at: None,
    })
}

/// W via the AS R94 coefficients, computed as a squared correlation so the
/// value stays in [0, 1] under rounding.
fn w_statistic(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    let coef = coefficients(n);

    // coefficient at ascending position i: -coef[i] in the lower half,
    // +coef[n-1-i] in the upper half, 0 dead center.
    let coef_at = |i: usize| -> f64 {
        let j = n - 1 - i;
        if i < j {
            -coef[i]
        } else if i > j {
            coef[j]
        } else {
            0.0
        }
    };

    let nf = n as f64;
    let mean_x: f64 = sorted.iter().sum::<f64>() / nf;
    let mean_a: f64 = (0..n).map(coef_at).sum::<f64>() / nf;

    let mut ssx = 0.0;
    let mut ssa = 0.0;
    let mut sax = 0.0;
    for (i, &xi) in sorted.iter().enumerate() {
        let dx = xi - mean_x;
        let da = coef_at(i) - mean_a;
        ssx += dx * dx;
        ssa += da * da;
        sax += da * dx;
    }

    let ssassx = (ssa * ssx).sqrt();
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    (1.0 - w1).clamp(0.0, 1.0)
}

/// First-half coefficient magnitudes a_1..a_{n/2} per Royston (1995).
fn coefficients(n: usize) -> Vec<f64> {
    let nn2 = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }

    let an25 = n as f64 + 0.25;
    // Expected normal order statistics via Blom scores; lower half, negative.
    let mut m: Vec<f64> = (1..=nn2)
        .map(|i| phi_inv((i as f64 - 0.375) / an25))
        .collect();
    let summ2: f64 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / (n as f64).sqrt();

    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];

    let a1 = poly(&C1, rsn) - m[0] / ssumm2;
    let (start, fac) = if n > 5 {
        let a2 = poly(&C2, rsn) - m[1] / ssumm2;
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
            / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
            .sqrt();
        m[1] = a2;
        (2usize, fac)
    } else {
        let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1usize, fac)
    };
    m[0] = a1;
    for v in m.iter_mut().skip(start) {
        // raw scores are negative; dividing by -fac leaves positive magnitudes
        *v /= -fac;
    }
    m
}

/// Royston's p-value for the upper tail of 1 - W.
fn royston_p_value(w: f64, n: usize) -> f64 {
    if w >= 1.0 {
        return 1.0;
    }

    if n == 3 {
        let pi6 = 6.0 / std::f64::consts::PI;
        let stqr = std::f64::consts::FRAC_PI_3;
        return (pi6 * (w.sqrt().asin() - stqr)).clamp(0.0, 1.0);
    }

    const G: [f64; 2] = [-2.273, 0.459];
    const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
    const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -2.0322e-3];
    const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 3.8915e-3];
    const C6: [f64; 3] = [-0.4803, -0.082676, 3.0302e-3];

    let nf = n as f64;
    let y = (1.0 - w).ln();

    let (value, mu, sigma) = if n <= 11 {
        let gamma = poly(&G, nf);
        if y >= gamma {
            return 1e-99;
        }
        let shifted = -(gamma - y).ln();
        (shifted, poly(&C3, nf), poly(&C4, nf).exp())
    } else {
        let ln_n = nf.ln();
        (y, poly(&C5, ln_n), poly(&C6, ln_n).exp())
    };

    // Upper-tail probability of the normalized statistic.
    1.0 - phi((value - mu) / sigma)
}

fn poly(coef: &[f64], x: f64) -> f64 {
    let mut acc = coef[coef.len() - 1];
    for c in coef.iter().rev().skip(1) {
        acc = acc * x + c;
    }
    acc
}
