use rand::Rng;

use rgg_coupling::flip::{flip_interval, kappa, kappa_interval, psi, psi_interval};
use rgg_coupling::rng::stream;
use rgg_coupling::stats::ks_one_sample;
use rgg_coupling::{sample_sphere, Interval, SphericalLaw};

#[test]
fn interval_flip_keeps_uniform_marginal() {
    let (d, p) = (12, 0.1);
    let law = SphericalLaw::new(d, p).unwrap();
    let iv = Interval::around_tau(&law, 0.08, 0.05).unwrap();
    let q = law.q_interval(&iv).unwrap();
    let mut rng = stream(5, "interval.uniform", 0);
    let a = sample_sphere(&mut rng, d);
    let w = sample_sphere(&mut rng, d);
    let (mut along, mut across) = (Vec::new(), Vec::new());
    let (mut inside, mut inside_edges) = (0usize, 0usize);
    for _ in 0..50_000 {
        let z = sample_sphere(&mut rng, d);
        let bit = rng.random::<f64>() < q;
        let (out, rec) = flip_interval(&law, &a, &z, bit, &iv).unwrap();
        along.push(rec.post_inner);
        across.push(w.iter().zip(&out).map(|(x, y)| x * y).sum());
        if iv.contains(rec.pre_inner) {
            inside += 1;
            inside_edges += (rec.post_inner >= law.tau()) as usize;
        }
    }
    let cdf = |x: f64| law.cdf(x.clamp(-1.0, 1.0)).unwrap();
    assert!(ks_one_sample(&along, cdf).p_value >= 1e-3);
    assert!(ks_one_sample(&across, cdf).p_value >= 1e-3);
    let sigma = (q * (1.0 - q) / inside as f64).sqrt();
    assert!((inside_edges as f64 / inside as f64 - q).abs() <= 4.0 * sigma);
}

/// `max |psi| d / ln n` and `max |kappa| sqrt(d / ln n)` over draws of
/// `<a, z>`.
fn magnitude_constants(d: usize, p: f64, n: usize, draws: usize) -> (f64, f64) {
    let law = SphericalLaw::new(d, p).unwrap();
    let ln_n = (n as f64).ln();
    let mut rng = stream(5, "magnitudes", d as u64);
    let (mut cp, mut ck): (f64, f64) = (0.0, 0.0);
    for _ in 0..draws {
        let x = law.sample_coordinate(&mut rng).unwrap();
        cp = cp.max(psi(&law, x).unwrap().abs() * d as f64 / ln_n);
        ck = ck.max(kappa(&law, x).unwrap().abs() * (d as f64 / ln_n).sqrt());
    }
    (cp, ck)
}

#[test]
fn psi_kappa_scale_with_dimension() {
    let consts: Vec<(f64, f64)> = [64, 256, 1024].iter().map(|&d| magnitude_constants(d, 0.1, 1000, 4000)).collect();
    for pick in [|c: &(f64, f64)| c.0, |c: &(f64, f64)| c.1] {
        let vals: Vec<f64> = consts.iter().map(pick).collect();
        let centre = vals.iter().sum::<f64>() / vals.len() as f64;
        for v in &vals {
            assert!((v / centre - 1.0).abs() <= 0.5, "{vals:?}");
        }
    }
}

#[test]
fn interval_map_moves_at_most_the_width() {
    let law = SphericalLaw::new(256, 0.05).unwrap();
    let mut ratios = Vec::new();
    for w in [0.04, 0.02, 0.01, 0.005] {
        let iv = Interval::around_tau(&law, w / 2.0, w / 2.0).unwrap();
        let mut worst_kappa: f64 = 0.0;
        for k in 0..=200 {
            let x = iv.lo + (iv.hi - iv.lo) * k as f64 / 200.0;
            let y = law.phi_interval(x, &iv).unwrap();
            assert!((y - x).abs() <= iv.width() + 1e-15);
            assert!(psi_interval(&law, x, &iv).unwrap().abs() <= iv.width());
            worst_kappa = worst_kappa.max(kappa_interval(&law, x, &iv).unwrap().abs());
        }
        ratios.push(worst_kappa / w);
    }
    let centre = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(ratios.iter().all(|r| (r / centre - 1.0).abs() <= 0.5), "{ratios:?}");
}
