//! Paired t-test, Student-t distribution and quantile summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lanczos approximation (g = 7, n = 9) of `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

/// CDF of Student's t with `dof` degrees of freedom.
pub fn student_t_cdf(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let x = dof / (dof + t * t);
    let tail = 0.5 * regularized_incomplete_beta(dof / 2.0, 0.5, x);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    /// One-sided p-value for the alternative `mean(a - b) > 0`.
    pub p: f64,
    pub n: usize,
    pub mean_diff: f64,
}

/// Paired one-sided t-test of `a > b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::domain(format!("paired samples differ in size ({} vs {})", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::domain("a paired t-test needs at least two pairs"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let (t, p) = if var == 0.0 {
        if mean == 0.0 {
            (0.0, 0.5)
        } else if mean > 0.0 {
            (f64::INFINITY, 0.0)
        } else {
            (f64::NEG_INFINITY, 1.0)
        }
    } else {
        let t = mean / (var.sqrt() / nf.sqrt());
        (t, 1.0 - student_t_cdf(t, nf - 1.0))
    };
    Ok(TTest {
        t,
        p,
        n,
        mean_diff: mean,
    })
}

/// How per-baseline p-values combine into one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PAggregation {
    /// Largest p: significant only if every comparison is.
    Max,
    /// Smallest p times the number of comparisons, capped at 1.
    Bonferroni,
}

pub fn aggregate_p(ps: &[f64], rule: PAggregation) -> Option<f64> {
    if ps.is_empty() {
        return None;
    }
    Some(match rule {
        PAggregation::Max => ps.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        PAggregation::Bonferroni => (ps.iter().cloned().fold(f64::INFINITY, f64::min) * ps.len() as f64).min(1.0),
    })
}

/// Quantile of sorted data with linear interpolation between order
/// statistics at position `q (n - 1)`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn five_number_summary(values: &[f64]) -> Result<FiveNumber> {
    if values.is_empty() {
        return Err(Error::domain("cannot summarise an empty sample"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("sample contains NaN"));
    }
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(FiveNumber {
        min: s[0],
        q1: quantile_sorted(&s, 0.25),
        median: quantile_sorted(&s, 0.5),
        q3: quantile_sorted(&s, 0.75),
        max: s[s.len() - 1],
    })
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let r = paired_t_test(&[1.0, 2.0, 3.0, 4.0], &[0.0; 4]).unwrap();
        assert!((r.t - 3.872_983_346).abs() < 1e-6);
        assert!((r.p - 0.0152).abs() < 1e-3, "{}", r.p);
    }

    #[test]
    fn identical_samples() {
        let a = [3.0, -1.0, 2.5];
        let r = paired_t_test(&a, &a).unwrap();
        assert_eq!((r.t, r.p), (0.0, 0.5));
    }

    #[test]
    fn constant_shift_gives_extreme_p() {
        assert_eq!(paired_t_test(&[2.0, 3.0], &[1.0, 2.0]).unwrap().p, 0.0);
        assert_eq!(paired_t_test(&[1.0, 2.0], &[2.0, 3.0]).unwrap().p, 1.0);
    }

    #[test]
    fn swapping_complements_p() {
        let a = [1.0, 4.0, 2.0, 8.0, 5.0];
        let b = [0.5, 4.5, 1.0, 6.0, 5.5];
        let ab = paired_t_test(&a, &b).unwrap();
        let ba = paired_t_test(&b, &a).unwrap();
        assert!((ab.p + ba.p - 1.0).abs() < 1e-12);
        assert_eq!(ab.t, -ba.t);
    }

    #[test]
    fn too_few_pairs() {
        assert!(paired_t_test(&[1.0], &[0.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn t_cdf_known_values() {
        assert!((student_t_cdf(0.0, 5.0) - 0.5).abs() < 1e-15);
        // One dof is Cauchy.
        for t in [-3.0, -0.5, 0.7, 2.0, 10.0] {
            let cauchy = 0.5 + (t as f64).atan() / std::f64::consts::PI;
            assert!((student_t_cdf(t, 1.0) - cauchy).abs() < 1e-12);
        }
        // Two dof has a closed form.
        for t in [-2.5, 0.3, 4.0] {
            let two = 0.5 + t / (2.0 * (2.0 + t * t as f64).sqrt());
            assert!((student_t_cdf(t, 2.0) - two).abs() < 1e-12);
        }
    }

    #[test]
    fn ln_gamma_factorials() {
        let mut f = 1.0f64;
        for n in 1..20 {
            assert!((ln_gamma(n as f64) - f.ln()).abs() < 1e-10);
            f *= n as f64;
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn five_numbers() {
        let s = five_number_summary(&[5.0, 3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        let s = five_number_summary(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (1.75, 2.5, 3.25));
        let s = five_number_summary(&[7.0; 6]).unwrap();
        assert!([s.min, s.q1, s.median, s.q3, s.max].iter().all(|&v| v == 7.0));
        assert!(five_number_summary(&[]).is_err());
    }

    #[test]
    fn aggregation_rules() {
        assert_eq!(aggregate_p(&[0.01, 0.04, 0.02], PAggregation::Max), Some(0.04));
        assert_eq!(aggregate_p(&[0.01, 0.04, 0.02], PAggregation::Bonferroni), Some(0.03));
        assert_eq!(aggregate_p(&[0.5, 0.9], PAggregation::Bonferroni), Some(1.0));
        assert_eq!(aggregate_p(&[], PAggregation::Max), None);
    }
}
