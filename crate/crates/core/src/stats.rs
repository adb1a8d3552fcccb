//! Small statistics toolkit used by the verification harness: Kolmogorov–Smirnov
//! tests, isotonic regression, least squares and summary moments.

/// Asymptotic Kolmogorov survival function `P[K > x]`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Small-x form converges faster here.
        let c = (2.0 * std::f64::consts::PI).sqrt() / x;
        let q = (-std::f64::consts::PI.powi(2) / (8.0 * x * x)).exp();
        let mut s = 0.0;
        let mut k = 1;
        loop {
            let term = q.powi(k * k);
            s += term;
            if term < 1e-17 || k > 50 {
                break;
            }
            k += 2;
        }
        return (1.0 - c * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test of `samples` against `cdf`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut dmax: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        dmax = dmax.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let en = n.sqrt();
    // Stephens' small-sample correction.
    let p = kolmogorov_sf((en + 0.12 + 0.11 / en) * dmax);
    KsResult { statistic: dmax, p_value: p }
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(|u, v| u.total_cmp(v));
    xb.sort_by(|u, v| u.total_cmp(v));
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut dmax: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        dmax = dmax.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    let p = kolmogorov_sf((en + 0.12 + 0.11 / en) * dmax);
    KsResult { statistic: dmax, p_value: p }
}

/// Nondecreasing least-squares fit (pool adjacent violators) with weights.
pub fn isotonic_increasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // blocks of (mean, weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let k = blocks.len();
            if blocks[k - 2].0 <= blocks[k - 1].0 {
                break;
            }
            let (m2, w2, c2) = blocks.pop().unwrap();
            let (m1, w1, c1) = blocks.pop().unwrap();
            let w = w1 + w2;
            let m = if w > 0.0 { (m1 * w1 + m2 * w2) / w } else { 0.5 * (m1 + m2) };
            blocks.push((m, w, c1 + c2));
        }
    }
    blocks.into_iter().flat_map(|(m, _, c)| std::iter::repeat_n(m, c)).collect()
}

/// First `x` where the piecewise-linear curve through `(xs, ys)` reaches
/// `level`, for nondecreasing `ys`.
pub fn inverse_interpolate(xs: &[f64], ys: &[f64], level: f64) -> Option<f64> {
    if xs.is_empty() || ys[0] > level || ys[ys.len() - 1] < level {
        return None;
    }
    if ys[0] == level {
        return Some(xs[0]);
    }
    for k in 1..xs.len() {
        if ys[k] >= level {
            let (y0, y1) = (ys[k - 1], ys[k]);
            if y1 == y0 {
                return Some(xs[k - 1]);
            }
            return Some(xs[k - 1] + (level - y0) / (y1 - y0) * (xs[k] - xs[k - 1]));
        }
    }
    None
}

/// Ordinary least squares `y = intercept + slope x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the mean.
pub fn std_err(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_known_values() {
        // Classical critical values: P[K > 1.358] = 0.05, P[K > 1.628] = 0.01.
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 5e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 2e-4);
        assert!((kolmogorov_sf(0.8276) - 0.5).abs() < 1e-3);
        // both series agree near the switch point
        let below = {
            let x: f64 = 1.18;
            let mut s = 0.0;
            for k in 1..=100 {
                let kf = k as f64;
                s += if k % 2 == 1 { 1.0 } else { -1.0 } * (-2.0 * kf * kf * x * x).exp();
            }
            2.0 * s
        };
        assert!((kolmogorov_sf(1.18 - 1e-12) - below).abs() < 1e-10);
    }

    #[test]
    fn ks_detects_shift() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_one_sample(&xs, |x| x.clamp(0.0, 1.0)).p_value > 0.99);
        assert!(ks_one_sample(&xs, |x| (x - 0.1).clamp(0.0, 1.0)).p_value < 1e-6);
        let ys: Vec<f64> = xs.iter().map(|x| x + 0.2).collect();
        assert!(ks_two_sample(&xs, &ys).p_value < 1e-6);
        assert!(ks_two_sample(&xs, &xs).p_value > 0.99);
    }

    #[test]
    fn isotonic_pools_violators() {
        let fit = isotonic_increasing(&[1.0, 3.0, 2.0, 4.0], &[1.0; 4]);
        assert_eq!(fit, vec![1.0, 2.5, 2.5, 4.0]);
        let fit = isotonic_increasing(&[3.0, 2.0, 1.0], &[1.0, 1.0, 2.0]);
        assert!(fit.iter().all(|v| (v - 1.75).abs() < 1e-15));
    }

    #[test]
    fn interpolation_and_fit() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 0.4, 1.0];
        assert!((inverse_interpolate(&xs, &ys, 0.7).unwrap() - 1.5).abs() < 1e-15);
        assert!(inverse_interpolate(&xs, &ys, 1.5).is_none());
        let (a, b) = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]);
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
        assert!((quantile(&[3.0, 1.0, 2.0], 0.5) - 2.0).abs() < 1e-15);
    }
}
