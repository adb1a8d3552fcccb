//! Special functions and quadrature used by the sphere-coordinate law.

use crate::error::{Error, Result};

const CF_MAX_ITER: usize = 20_000;
const CF_EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;

/// Regularized incomplete beta `I_t(a, b)` together with its complement
/// `1 - I_t(a, b)`.
///
/// `ln_inv_beta` is `-ln B(a, b)`, supplied by the caller so that families
/// with a cheaply known normalizer avoid a log-gamma evaluation. Whichever of
/// the pair lies in the continued fraction's fast-converging tail is computed
/// directly; the other is obtained by subtraction, so the smaller member of the
/// pair keeps full relative accuracy.
pub fn beta_reg_pair(a: f64, b: f64, t: f64, ln_inv_beta: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("incomplete beta argument {t} outside [0,1]")));
    }
    if t == 0.0 {
        return Ok((0.0, 1.0));
    }
    if t == 1.0 {
        return Ok((1.0, 0.0));
    }
    let ln_front = ln_inv_beta + a * t.ln() + b * (-t).ln_1p();
    if t < (a + 1.0) / (a + b + 2.0) {
        let lower = ln_front.exp() * beta_cf(a, b, t)? / a;
        Ok((lower, 1.0 - lower))
    } else {
        let upper = ln_front.exp() * beta_cf(b, a, 1.0 - t)? / b;
        Ok((1.0 - upper, upper))
    }
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            return Ok(h);
        }
    }
    Err(Error::Numerical(format!("incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")))
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Returns `(estimate, error, roundoff floor)` on `[lo, hi]`.
fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = fc.abs() * WGK[7];
    for k in 0..7 {
        let dx = half * XGK[k];
        let (fl, fr) = (f(center - dx), f(center + dx));
        kronrod += WGK[k] * (fl + fr);
        abs_sum += WGK[k] * (fl.abs() + fr.abs());
        if k % 2 == 1 {
            gauss += WG[k / 2] * (fl + fr);
        }
    }
    let half = half.abs();
    (kronrod * half, (kronrod - gauss).abs() * half, 50.0 * f64::EPSILON * abs_sum * half)
}

/// Adaptive Gauss-Kronrod quadrature of `f` over `[lo, hi]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if hi == lo {
        return Ok(0.0);
    }
    let mut stack = vec![(lo, hi, abs_tol, 0usize)];
    let mut total = 0.0;
    while let Some((a, b, tol, depth)) = stack.pop() {
        let (value, err, floor) = gk15(&f, a, b);
        if err <= tol.max(rel_tol * value.abs()).max(floor) || (b - a).abs() < 1e-15 {
            total += value;
            continue;
        }
        if depth > 60 {
            return Err(Error::Numerical(format!("quadrature failed to converge on [{a}, {b}]")));
        }
        let mid = 0.5 * (a + b);
        stack.push((a, mid, 0.5 * tol, depth + 1));
        stack.push((mid, b, 0.5 * tol, depth + 1));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_uniform_case() {
        // I_t(1, 1) = t, B(1,1) = 1
        let (lo, hi) = beta_reg_pair(1.0, 1.0, 0.3, 0.0).unwrap();
        assert!((lo - 0.3).abs() < 1e-15);
        assert!((hi - 0.7).abs() < 1e-15);
    }

    #[test]
    fn beta_half_half_is_arcsine() {
        // I_t(1/2, 1/2) = (2/pi) asin(sqrt t), B(1/2,1/2) = pi
        let ln_inv = -std::f64::consts::PI.ln();
        for &t in &[0.01, 0.2, 0.5, 0.9, 0.999] {
            let (lo, _) = beta_reg_pair(0.5, 0.5, t, ln_inv).unwrap();
            let expected = 2.0 / std::f64::consts::PI * t.sqrt().asin();
            assert!((lo - expected).abs() < 1e-13, "t={t}: {lo} vs {expected}");
        }
    }

    #[test]
    fn beta_rejects_out_of_range() {
        assert!(beta_reg_pair(1.0, 1.0, 1.5, 0.0).is_err());
    }

    #[test]
    fn quadrature_polynomial_and_gaussian() {
        let v = integrate(|x| x * x * x + 1.0, 0.0, 2.0, 1e-14, 1e-14).unwrap();
        assert!((v - 6.0).abs() < 1e-12);
        let g = integrate(|x| (-x * x / 2.0).exp(), -10.0, 10.0, 1e-13, 1e-13).unwrap();
        assert!((g - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-11);
    }
}
