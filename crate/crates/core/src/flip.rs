//! Flip-orientation maps: move a unit vector `z` along a direction `a` so that
//! the edge indicator `1[<a, z> >= tau]` equals a requested bit, through the
//! involution on the coordinate law, keeping the orthogonal direction.
//!
//! Written out, a flip is `z' = z + s * (psi(x) z + kappa(x) a)` with
//! `x = <a, z>`, `s` the flip indicator, `1 + psi(x) = sqrt((1 - phi(x)^2) / (1 - x^2))`
//! and `kappa(x) = -x - psi(x) x + phi(x)`.

use crate::error::{Error, Result};
use crate::sphere_law::{Interval, SphericalLaw};

const UNIT_TOL: f64 = 1e-9;
const CLAMP: f64 = 1.0 - 1e-12;
const SINGULAR: f64 = 1.0 - 1e-9;

/// What one application of a flip map did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipRecord {
    /// `<a, z>` before the map.
    pub pre_inner: f64,
    /// `<a, z'>` after the map, recomputed from the output vector.
    pub post_inner: f64,
    pub flipped: bool,
    /// `s * psi(x)`: zero when the map acted as the identity.
    pub psi_val: f64,
    /// `s * kappa(x)`: zero when the map acted as the identity.
    pub kappa_val: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize the reduction.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn check_inputs(a: &[f64], z: &[f64]) -> Result<()> {
    if a.len() != z.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: z.len() });
    }
    for v in [a, z] {
        let norm = dot(v, v).sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NonUnit { norm });
        }
    }
    Ok(())
}

fn clamp_inner(x: f64) -> f64 {
    x.clamp(-CLAMP, CLAMP)
}

/// `psi(x) = sqrt((1 - phi(x)^2) / (1 - x^2)) - 1`.
pub fn psi(law: &SphericalLaw, x: f64) -> Result<f64> {
    if x.abs() > SINGULAR {
        return Err(Error::Singularity(x));
    }
    let y = law.phi(x)?;
    Ok(((1.0 - y * y) / (1.0 - x * x)).sqrt() - 1.0)
}

/// `kappa(x) = -x - psi(x) x + phi(x)`.
pub fn kappa(law: &SphericalLaw, x: f64) -> Result<f64> {
    let s = psi(law, x)?;
    Ok(-x - s * x + law.phi(x)?)
}

pub fn psi_interval(law: &SphericalLaw, x: f64, iv: &Interval) -> Result<f64> {
    if x.abs() > SINGULAR {
        return Err(Error::Singularity(x));
    }
    if !iv.contains(x) {
        return Ok(0.0);
    }
    let y = law.phi_interval(x, iv)?;
    Ok(((1.0 - y * y) / (1.0 - x * x)).sqrt() - 1.0)
}

pub fn kappa_interval(law: &SphericalLaw, x: f64, iv: &Interval) -> Result<f64> {
    if !iv.contains(x) {
        return Ok(0.0);
    }
    let s = psi_interval(law, x, iv)?;
    Ok(-x - s * x + law.phi_interval(x, iv)?)
}

/// Replaces the `a`-component of `z` (currently `x`) with `target`, rescaling
/// the orthogonal part so that the result stays on the sphere.
fn reorient(a: &[f64], z: &mut [f64], x: f64, target: f64) {
    let scale = ((1.0 - target * target) / (1.0 - x * x)).sqrt();
    let mut orth_sq = 0.0;
    for (zi, ai) in z.iter_mut().zip(a) {
        *zi -= x * ai;
        orth_sq += *zi * *zi;
    }
    if orth_sq < 1e-24 {
        // z was (numerically) parallel to a: any orthogonal direction works, so
        // take the coordinate axis least aligned with a.
        let k = a.iter().enumerate().min_by(|p, q| p.1.abs().total_cmp(&q.1.abs())).map(|(k, _)| k).unwrap_or(0);
        z.iter_mut().for_each(|v| *v = 0.0);
        z[k] = 1.0;
        let proj = a[k];
        for (zi, ai) in z.iter_mut().zip(a) {
            *zi -= proj * ai;
        }
        let n = dot(z, z).sqrt();
        z.iter_mut().for_each(|v| *v *= (1.0 - target * target).sqrt() / n);
    } else {
        z.iter_mut().for_each(|v| *v *= scale);
    }
    for (zi, ai) in z.iter_mut().zip(a) {
        *zi += target * ai;
    }
    let inv = 1.0 / dot(z, z).sqrt();
    z.iter_mut().for_each(|v| *v *= inv);
}

/// Nudges `z` along `a` until `1[<a, z> >= tau] == bit`. Only triggers when the
/// involution lands within rounding distance of `tau`.
fn enforce_side(law: &SphericalLaw, a: &[f64], z: &mut [f64], bit: bool) -> f64 {
    let tau = law.tau();
    let mut post = dot(a, z);
    let mut target = tau;
    let mut tries = 0;
    while (post >= tau) != bit && tries < 8 {
        target = if bit { target.next_up() } else { target.next_down() };
        let x = clamp_inner(post);
        reorient(a, z, x, target);
        post = dot(a, z);
        tries += 1;
    }
    post
}

fn apply_flip(
    law: &SphericalLaw,
    a: &[f64],
    z: &mut [f64],
    bit: bool,
    target_of: impl Fn(f64) -> Result<f64>,
) -> Result<FlipRecord> {
    let pre = dot(a, z);
    let x = clamp_inner(pre);
    let mut y = target_of(x)?;
    let tau = law.tau();
    // Keep the image on the requested side of tau despite rounding.
    if bit && y < tau {
        y = tau;
    } else if !bit && y >= tau {
        y = tau.next_down();
    }
    let psi_val = ((1.0 - y * y) / (1.0 - x * x)).sqrt() - 1.0;
    let kappa_val = -x - psi_val * x + y;
    reorient(a, z, x, y);
    let post = enforce_side(law, a, z, bit);
    Ok(FlipRecord { pre_inner: pre, post_inner: post, flipped: true, psi_val, kappa_val })
}

fn identity_record(pre: f64) -> FlipRecord {
    FlipRecord { pre_inner: pre, post_inner: pre, flipped: false, psi_val: 0.0, kappa_val: 0.0 }
}

/// Applies `rho^bit_a` to `z` in place.
pub fn flip_in_place(law: &SphericalLaw, a: &[f64], z: &mut [f64], bit: bool) -> Result<FlipRecord> {
    let pre = dot(a, z);
    if (pre >= law.tau()) == bit {
        return Ok(identity_record(pre));
    }
    apply_flip(law, a, z, bit, |x| law.phi(x))
}

/// Applies the interval-restricted map `rho^bit_a(. | iv)` to `z` in place.
pub fn flip_interval_in_place(
    law: &SphericalLaw,
    a: &[f64],
    z: &mut [f64],
    bit: bool,
    iv: &Interval,
) -> Result<FlipRecord> {
    let pre = dot(a, z);
    if !iv.contains(pre) || (pre >= law.tau()) == bit {
        return Ok(identity_record(pre));
    }
    apply_flip(law, a, z, bit, |x| law.phi_interval(x.clamp(iv.lo, iv.hi), iv))
}

/// Checked flip returning a new vector.
pub fn flip(law: &SphericalLaw, a: &[f64], z: &[f64], bit: bool) -> Result<(Vec<f64>, FlipRecord)> {
    check_inputs(a, z)?;
    let mut out = z.to_vec();
    let rec = flip_in_place(law, a, &mut out, bit)?;
    Ok((out, rec))
}

/// Checked interval flip returning a new vector.
pub fn flip_interval(
    law: &SphericalLaw,
    a: &[f64],
    z: &[f64],
    bit: bool,
    iv: &Interval,
) -> Result<(Vec<f64>, FlipRecord)> {
    check_inputs(a, z)?;
    let mut out = z.to_vec();
    let rec = flip_interval_in_place(law, a, &mut out, bit, iv)?;
    Ok((out, rec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere_law::sample_sphere;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(d: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        v
    }

    #[test]
    fn identity_when_bit_already_matches() {
        let law = SphericalLaw::new(20, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let a = sample_sphere(&mut rng, 20);
            let z = sample_sphere(&mut rng, 20);
            let b = dot(&a, &z) >= law.tau();
            let (out, rec) = flip(&law, &a, &z, b).unwrap();
            assert_eq!(out, z);
            assert!(!rec.flipped);
        }
    }

    #[test]
    fn uniform_marginal_flip_value() {
        let law = SphericalLaw::new(3, 0.25).unwrap();
        let a = e(3, 0);
        let z = e(3, 1);
        let (out, rec) = flip(&law, &a, &z, true).unwrap();
        assert!((dot(&a, &out) - 2.0 / 3.0).abs() < 1e-12);
        assert!(rec.flipped);
        // orthogonal direction preserved with a nonnegative factor
        assert!(out[1] > 0.0 && out[2].abs() < 1e-15);
    }

    #[test]
    fn flip_then_flip_back_restores() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(d, p) in &[(3, 0.25), (16, 0.1), (500, 0.05)] {
            let law = SphericalLaw::new(d, p).unwrap();
            for _ in 0..100 {
                let a = sample_sphere(&mut rng, d);
                let z = sample_sphere(&mut rng, d);
                let b0 = dot(&a, &z) >= law.tau();
                let (mid, rec) = flip(&law, &a, &z, !b0).unwrap();
                assert!(rec.flipped);
                assert_eq!(dot(&a, &mid) >= law.tau(), !b0);
                let (back, _) = flip(&law, &a, &mid, b0).unwrap();
                let err = z.iter().zip(&back).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
                assert!(err < 1e-8, "d={d}: {err}");
            }
        }
    }

    #[test]
    fn flip_postconditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = 64;
        let law = SphericalLaw::new(d, 0.2).unwrap();
        for k in 0..200 {
            let a = sample_sphere(&mut rng, d);
            let z = sample_sphere(&mut rng, d);
            let b = k % 2 == 0;
            let (out, rec) = flip(&law, &a, &z, b).unwrap();
            assert!((dot(&out, &out).sqrt() - 1.0).abs() < 1e-9);
            assert_eq!(dot(&a, &out) >= law.tau(), b);
            // orthogonal components parallel with a nonnegative factor
            let xo = dot(&a, &out);
            let orth_out: Vec<f64> = out.iter().zip(&a).map(|(v, w)| v - xo * w).collect();
            let orth_in: Vec<f64> = z.iter().zip(&a).map(|(v, w)| v - rec.pre_inner * w).collect();
            let c = dot(&orth_out, &orth_in);
            let cos = c / (dot(&orth_out, &orth_out).sqrt() * dot(&orth_in, &orth_in).sqrt());
            assert!(cos > 1.0 - 1e-9);
            if rec.flipped {
                assert!((rec.post_inner - law.phi(rec.pre_inner).unwrap()).abs() < 10.0 * law.cdf_tol());
                // decomposition z' = z + psi z + kappa a
                let recon: Vec<f64> = z.iter().zip(&a).map(|(v, w)| v + rec.psi_val * v + rec.kappa_val * w).collect();
                let err = recon.iter().zip(&out).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
                assert!(err < 1e-9);
            }
        }
    }

    #[test]
    fn flip_rejects_bad_inputs() {
        let law = SphericalLaw::new(5, 0.1).unwrap();
        let a = e(5, 0);
        assert!(matches!(flip(&law, &a, &[0.5, 0.0, 0.0, 0.0, 0.0], true), Err(Error::NonUnit { .. })));
        assert!(matches!(flip(&law, &a, &e(4, 0), true), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn psi_kappa_examples() {
        let law = SphericalLaw::new(3, 0.25).unwrap();
        let t = law.tau();
        assert!(psi(&law, t).unwrap().abs() < 1e-12);
        assert!(kappa(&law, t).unwrap().abs() < 1e-12);
        let expected_psi = (1.0f64 - 4.0 / 9.0).sqrt() - 1.0;
        assert!((psi(&law, 0.0).unwrap() - expected_psi).abs() < 1e-12);
        assert!((kappa(&law, 0.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let half = SphericalLaw::new(40, 0.5).unwrap();
        for &x in &[-0.7, -0.1, 0.3, 0.9] {
            assert!(psi(&half, x).unwrap().abs() < 1e-12);
        }
        assert!(matches!(psi(&law, 1.0), Err(Error::Singularity(_))));
    }

    #[test]
    fn interval_flip_cases() {
        let law = SphericalLaw::new(3, 0.25).unwrap();
        let iv = Interval::new(&law, 0.3, 0.8).unwrap();
        let a = e(3, 0);
        // outside the interval: identity
        let z = vec![0.1, (1.0f64 - 0.01).sqrt(), 0.0];
        let (out, rec) = flip_interval(&law, &a, &z, true, &iv).unwrap();
        assert_eq!(out, z);
        assert!(!rec.flipped);
        // inner product exactly tau: identity for the matching bit
        let z = vec![0.5, (0.75f64).sqrt(), 0.0];
        let (out, _) = flip_interval(&law, &a, &z, true, &iv).unwrap();
        assert_eq!(out, z);
        // inside: matches the interval involution
        let z = vec![0.4, (1.0f64 - 0.16).sqrt(), 0.0];
        let (out, rec) = flip_interval(&law, &a, &z, true, &iv).unwrap();
        assert!(rec.flipped);
        let expected = 0.8 - (0.4 - 0.3) * (0.8 - 0.5) / (0.5 - 0.3);
        assert!((dot(&a, &out) - expected).abs() < 1e-8);
        assert!(iv.contains(dot(&a, &out)));
    }
}
