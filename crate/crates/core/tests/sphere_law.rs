use rgg_coupling::rng::stream;
use rgg_coupling::stats::ks_one_sample;
use rgg_coupling::{tau_threshold, SphericalLaw};

#[test]
fn phi_carries_lower_part_onto_upper_part() {
    for (k, &(d, p)) in [(5, 0.1), (50, 0.25), (400, 0.05)].iter().enumerate() {
        let law = SphericalLaw::new(d, p).unwrap();
        let mut rng = stream(11, "phi.transport", k as u64);
        let mut images = Vec::new();
        while images.len() < 20_000 {
            let x = law.sample_coordinate(&mut rng).unwrap();
            if x <= law.tau() {
                images.push(law.phi(x).unwrap());
            }
        }
        let upper = law.sf(law.tau()).unwrap();
        let cond = |y: f64| 1.0 - law.sf(y.clamp(law.tau(), 1.0)).unwrap() / upper;
        let ks = ks_one_sample(&images, cond);
        assert!(ks.p_value >= 1e-3, "d={d} p={p}: KS p {}", ks.p_value);
    }
}

#[test]
fn involution_within_ten_cdf_tolerances() {
    let law = SphericalLaw::new(20, 0.1).unwrap();
    let mut rng = stream(11, "phi.involution", 0);
    for _ in 0..10_000 {
        let x = law.sample_coordinate(&mut rng).unwrap();
        let back = law.phi(law.phi(x).unwrap()).unwrap();
        assert!((back - x).abs() <= 10.0 * law.cdf_tol(), "x={x} back={back}");
    }
}

#[test]
fn quantile_round_trip_grid() {
    for &(d, p) in &[(3, 0.5), (17, 0.1), (1000, 0.05), (65536, 0.01)] {
        let law = SphericalLaw::new(d, p).unwrap();
        let mut q = 1e-4;
        while q < 1.0 - 1e-4 {
            let x = law.quantile(q).unwrap();
            assert!((law.cdf(x).unwrap() - q).abs() <= law.cdf_tol().max(1e-12), "d={d} q={q}");
            q += 0.0123;
        }
    }
}

#[test]
fn d3_closed_forms() {
    let law = SphericalLaw::new(3, 0.2).unwrap();
    for k in 0..=40 {
        let x = -1.0 + k as f64 * 0.05;
        let x = x.clamp(-1.0, 1.0);
        assert!((law.cdf(x).unwrap() - (x + 1.0) / 2.0).abs() < 1e-9);
        let q = k as f64 / 40.0;
        if q > 0.0 && q < 1.0 {
            assert!((law.quantile(q).unwrap() - (2.0 * q - 1.0)).abs() < 1e-9);
        }
    }
}

#[test]
fn tau_scale_stays_in_band() {
    for p in [0.05, 0.1, 0.25] {
        let scaled: Vec<f64> = [8usize, 32, 128, 512, 1024]
            .iter()
            .map(|&d| tau_threshold(d, p).unwrap() * (d as f64).sqrt() / (1.0 / p).ln().sqrt())
            .collect();
        let centre = scaled.iter().sum::<f64>() / scaled.len() as f64;
        for s in &scaled {
            assert!((s / centre - 1.0).abs() <= 0.2, "p={p}: {scaled:?}");
        }
    }
}
