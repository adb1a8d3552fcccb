//! The coordinate marginal `D_d` of the uniform law on the unit sphere
//! `S^{d-1}`, its edge threshold, and the measure-preserving involutions that
//! swap the mass below the threshold with the mass above it.
//!
//! A coordinate `X` of a uniform unit vector has density
//! `c_d (1 - x^2)^{(d-3)/2}` on `[-1, 1]`, and `X^2 ~ Beta(1/2, (d-1)/2)`.
//! The CDF is evaluated through that relation with a continued-fraction
//! incomplete beta, keeping both tails at full relative accuracy.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::special::{beta_reg_pair, integrate};

/// Default absolute tolerance for CDF and quantile evaluation.
pub const DEFAULT_CDF_TOL: f64 = 1e-12;

/// Coordinate law of the uniform distribution on `S^{d-1}` together with the
/// threshold `tau` giving edge density `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalLaw {
    d: usize,
    p: f64,
    tau: f64,
    cdf_tol: f64,
    /// Normalizing constant `Gamma(d/2) / (Gamma((d-1)/2) sqrt(pi))`.
    norm: f64,
    /// Numerically realized masses below / above `tau`.
    mass_below: f64,
    mass_above: f64,
}

/// A closed interval `[lo, hi]` strictly containing the law's threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(law: &SphericalLaw, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < law.tau && law.tau < hi) || lo < -1.0 || hi > 1.0 {
            return Err(Error::Domain(format!(
                "interval [{lo}, {hi}] must satisfy -1 <= lo < tau = {} < hi <= 1",
                law.tau
            )));
        }
        Ok(Self { lo, hi })
    }

    /// `[tau - below, tau + above]`, clipped to `[-1, 1]`.
    pub fn around_tau(law: &SphericalLaw, below: f64, above: f64) -> Result<Self> {
        Self::new(law, (law.tau - below).max(-1.0), (law.tau + above).min(1.0))
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// `Gamma(d/2) / (Gamma((d-1)/2) sqrt(pi))` by the two-step recursion
/// `c_{d+2} = c_d * d / (d - 1)` from `c_3 = 1/2`, `c_4 = 2/pi`.
fn normalizer(d: usize) -> f64 {
    let (mut c, mut k) = if d % 2 == 1 { (0.5, 3usize) } else { (2.0 / std::f64::consts::PI, 4usize) };
    while k < d {
        c *= k as f64 / (k as f64 - 1.0);
        k += 2;
    }
    c
}

impl SphericalLaw {
    pub fn new(d: usize, p: f64) -> Result<Self> {
        Self::with_tolerance(d, p, DEFAULT_CDF_TOL)
    }

    pub fn with_tolerance(d: usize, p: f64, cdf_tol: f64) -> Result<Self> {
        if d < 3 {
            return Err(Error::Domain(format!("dimension d = {d} must be at least 3")));
        }
        if !(p > 0.0 && p <= 0.5) {
            return Err(Error::Domain(format!("density p = {p} must lie in (0, 1/2]")));
        }
        if !(cdf_tol > 0.0) {
            return Err(Error::Domain(format!("cdf tolerance {cdf_tol} must be positive")));
        }
        let mut law = Self { d, p, tau: 0.0, cdf_tol, norm: normalizer(d), mass_below: 0.5, mass_above: 0.5 };
        if p < 0.5 {
            law.tau = law.upper_quantile(p)?;
        }
        let (below, above) = law.tails(law.tau)?;
        law.mass_below = below;
        law.mass_above = above;
        Ok(law)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn cdf_tol(&self) -> f64 {
        self.cdf_tol
    }

    fn check_unit_range(x: f64) -> Result<()> {
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("x = {x} outside [-1, 1]")));
        }
        Ok(())
    }

    fn density(&self, x: f64) -> f64 {
        if self.d == 3 {
            return self.norm;
        }
        if x.abs() >= 1.0 {
            return 0.0;
        }
        // ln_1p keeps the large exponent from amplifying the rounding of 1 - x^2.
        let k = (self.d as f64 - 3.0) / 2.0;
        (self.norm.ln() + k * (-x * x).ln_1p()).exp()
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        Self::check_unit_range(x)?;
        Ok(self.density(x))
    }

    /// `(P[X <= x], P[X >= x])`, each with full relative accuracy in its tail.
    fn tails(&self, x: f64) -> Result<(f64, f64)> {
        Self::check_unit_range(x)?;
        let b = (self.d as f64 - 1.0) / 2.0;
        let (inner, outer) = beta_reg_pair(0.5, b, x * x, self.norm.ln())?;
        if x >= 0.0 {
            Ok((0.5 + 0.5 * inner, 0.5 * outer))
        } else {
            Ok((0.5 * outer, 0.5 + 0.5 * inner))
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(self.tails(x)?.0)
    }

    /// Survival function `P[X >= x]`.
    pub fn sf(&self, x: f64) -> Result<f64> {
        Ok(self.tails(x)?.1)
    }

    /// Solves `cdf(x) = q` for `q <= 1/2` (so `x <= 0`) by Newton's method on
    /// `ln cdf`, which is concave because the density is log-concave. Iterates
    /// approach the root monotonically from the left after the first step.
    fn lower_inverse(&self, q: f64) -> Result<f64> {
        debug_assert!(q <= 0.5);
        if q == 0.5 {
            return Ok(0.0);
        }
        if q <= 0.0 {
            return Ok(-1.0);
        }
        let ln_q = q.ln();
        let (mut lo, mut hi) = (-1.0_f64, 0.0_f64);
        let mut x = 0.0_f64;
        for _ in 0..200 {
            let c = self.tails(x)?.0;
            if c > q {
                hi = hi.min(x);
            } else {
                lo = lo.max(x);
            }
            let f = self.density(x);
            let mut next = if c > 0.0 && f > 0.0 { x - (c.ln() - ln_q) * c / f } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) || hi - lo <= 4.0 * f64::EPSILON {
                return Ok(next);
            }
            x = next;
        }
        Err(Error::Numerical(format!("quantile iteration did not converge for q = {q}")))
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("quantile level {q} outside (0, 1)")));
        }
        if q <= 0.5 {
            self.lower_inverse(q)
        } else {
            Ok(-self.lower_inverse(1.0 - q)?)
        }
    }

    /// The point `y` with `P[X >= y] = s`, accurate for tiny `s`.
    pub fn upper_quantile(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!("tail mass {s} outside [0, 1]")));
        }
        if s <= 0.5 {
            Ok(-self.lower_inverse(s)?)
        } else {
            self.lower_inverse(1.0 - s)
        }
    }

    /// `P[lo <= X <= hi]`.
    pub fn mass(&self, lo: f64, hi: f64) -> Result<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        // Take the difference on the side where both values are small.
        if lo >= 0.0 {
            Ok(self.sf(lo)? - self.sf(hi)?)
        } else if hi <= 0.0 {
            Ok(self.cdf(hi)? - self.cdf(lo)?)
        } else {
            Ok(1.0 - self.cdf(lo)? - self.sf(hi)?)
        }
    }

    /// The monotone decreasing involution exchanging `D_d` restricted to
    /// `[-1, tau]` with `D_d` restricted to `[tau, 1]`.
    pub fn phi(&self, x: f64) -> Result<f64> {
        Self::check_unit_range(x)?;
        if x == self.tau {
            return Ok(self.tau);
        }
        if x < self.tau {
            let below = self.tails(x)?.0;
            let y = self.upper_quantile(self.mass_above * below / self.mass_below)?;
            Ok(y.max(self.tau))
        } else {
            let above = self.tails(x)?.1;
            let target = self.mass_below * above / self.mass_above;
            let y = if target <= 0.5 { self.lower_inverse(target)? } else { -self.lower_inverse(1.0 - target)? };
            Ok(y.min(self.tau))
        }
    }

    /// Finds `y` in `[lo, hi]` with `mass(lo, y) = target` by safeguarded
    /// Newton iteration.
    fn solve_mass_from(&self, lo: f64, hi: f64, target: f64) -> Result<f64> {
        let total = self.mass(lo, hi)?;
        if target <= 0.0 {
            return Ok(lo);
        }
        if target >= total {
            return Ok(hi);
        }
        let (mut a, mut b) = (lo, hi);
        let mut y = lo + (hi - lo) * (target / total);
        for _ in 0..200 {
            let g = self.mass(lo, y)? - target;
            if g > 0.0 {
                b = y;
            } else {
                a = y;
            }
            let f = self.density(y);
            let mut next = if f > 0.0 { y - g / f } else { f64::NAN };
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - y).abs() <= 4.0 * f64::EPSILON * y.abs().max(1e-300) || b - a <= 4.0 * f64::EPSILON {
                return Ok(next);
            }
            y = next;
        }
        Err(Error::Numerical(format!("interval inversion failed on [{lo}, {hi}]")))
    }

    /// The involution on `iv` fixing `tau` and exchanging the endpoints,
    /// measure-preserving between the conditional laws on `[lo, tau]` and
    /// `[tau, hi]`.
    pub fn phi_interval(&self, x: f64, iv: &Interval) -> Result<f64> {
        if !iv.contains(x) {
            return Err(Error::Domain(format!("x = {x} outside interval [{}, {}]", iv.lo, iv.hi)));
        }
        let tau = self.tau;
        if x == tau {
            return Ok(tau);
        }
        let below = self.mass(iv.lo, tau)?;
        let above = self.mass(tau, iv.hi)?;
        if x < tau {
            let frac = self.mass(iv.lo, x)? / below;
            // mass(y, hi) = frac * above  <=>  mass(tau, y) = (1 - frac) * above
            let y = self.solve_mass_from(tau, iv.hi, (1.0 - frac) * above)?;
            Ok(y.clamp(tau, iv.hi))
        } else {
            let frac = self.mass(x, iv.hi)? / above;
            let y = self.solve_mass_from(iv.lo, tau, frac * below)?;
            Ok(y.clamp(iv.lo, tau))
        }
    }

    /// `P[X in [tau, hi]] / P[X in [lo, hi]]`.
    pub fn q_interval(&self, iv: &Interval) -> Result<f64> {
        let total = self.mass(iv.lo, iv.hi)?;
        if total < self.cdf_tol {
            return Err(Error::DegenerateInterval { lo: iv.lo, hi: iv.hi, mass: total });
        }
        Ok(self.mass(self.tau, iv.hi)? / total)
    }

    /// Integrates `g(x) * pdf(x)` over `[lo, hi]`, splitting into panels on
    /// the law's `1/sqrt(d)` length scale so the peak is always resolved.
    pub fn integrate_against(&self, g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
        let lo = lo.max(-1.0);
        let hi = hi.min(1.0);
        if hi <= lo {
            return Ok(0.0);
        }
        let width = 0.5 / (self.d as f64).sqrt();
        let panels = ((hi - lo) / width).ceil().max(1.0) as usize;
        let step = (hi - lo) / panels as f64;
        let tol = self.cdf_tol * 1e-2 / panels as f64;
        let mut total = 0.0;
        for k in 0..panels {
            let a = lo + k as f64 * step;
            let b = if k + 1 == panels { hi } else { a + step };
            total += integrate(|x| g(x) * self.density(x), a, b, tol, 1e-14)?;
        }
        Ok(total)
    }

    /// `E[X^k | X >= tau]` by adaptive quadrature.
    pub fn conditional_moment(&self, k: u32) -> Result<f64> {
        if k == 0 || k > 8 {
            return Err(Error::Domain(format!("moment order {k} outside 1..=8")));
        }
        let num = self.integrate_against(|x| x.powi(k as i32), self.tau, 1.0)?;
        Ok(num / self.mass_above)
    }

    /// `P[tau - delta <= X <= tau + delta]`.
    pub fn interval_mass(&self, delta: f64) -> Result<f64> {
        if !(delta >= 0.0) {
            return Err(Error::Domain(format!("half-width {delta} must be nonnegative")));
        }
        self.mass((self.tau - delta).max(-1.0), (self.tau + delta).min(1.0))
    }

    /// One coordinate draw by inverse CDF.
    pub fn sample_coordinate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                return self.quantile(u);
            }
        }
    }
}

/// Fills `out` with a uniform unit vector (normalized standard Gaussians).
pub fn fill_sphere<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut sq = 0.0;
        for v in out.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *v = g;
            sq += g * g;
        }
        if sq > 0.0 {
            let inv = 1.0 / sq.sqrt();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

pub fn sample_sphere<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    fill_sphere(rng, &mut v);
    v
}

/// Tau threshold for dimension `d` and density `p`.
pub fn tau_threshold(d: usize, p: f64) -> Result<f64> {
    Ok(SphericalLaw::new(d, p)?.tau())
}
