use rgg_coupling::experiments::{
    linspace, run_fkg, run_roc, run_threshold, Decider, Model, Property, RocAdversary, RocSetting,
};
use rgg_coupling::robust::{rgg_triangle_mean, Adversary};

#[test]
fn er_connectivity_threshold_near_log_n_over_n() {
    let n = 500;
    let grid = linspace(0.004, 0.03, 27);
    let curve = run_threshold(Property::Connectivity, Model::Er, n, &grid, 40, 1).unwrap();
    let target = (n as f64).ln() / n as f64;
    let p_c = curve.p_c.expect("curve crosses 1/2");
    assert!((p_c / target - 1.0).abs() <= 0.25, "p_c {p_c} vs {target}");
    assert!(curve.fitted.windows(2).all(|w| w[0] <= w[1]));
    let mut csv = Vec::new();
    curve.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), grid.len() + 1);
}

#[test]
fn low_dimension_rgg_window_is_reported() {
    let n = 300;
    let grid = linspace(0.005, 0.3, 30);
    let er = run_threshold(Property::MinDegree, Model::Er, n, &grid, 20, 2).unwrap();
    let rgg = run_threshold(Property::MinDegree, Model::Rgg { d: 4 }, n, &grid, 20, 2).unwrap();
    println!("min-degree window: er {:?} rgg(d=4) {:?}", er.window, rgg.window);
    println!("min-degree p_c: er {:?} rgg(d=4) {:?}", er.p_c, rgg.p_c);
    assert!(er.p_c.is_some() && rgg.p_c.is_some());
}

#[test]
fn fkg_pair_identity_holds() {
    let est = run_fkg(3, 8, 200_000).unwrap();
    assert!(est.pair_identity.z().abs() <= 4.0, "{:?}", est.pair_identity);
    assert_eq!(est.counts.iter().sum::<u64>(), 200_000);
}

fn setting(n: usize, d: usize, epsilon: f64) -> RocSetting {
    RocSetting { n, p: 0.1, d, epsilon, trials: 20, seed: 4 }
}

#[test]
fn triangle_decider_separates_clean_instances() {
    let s = setting(300, 8, 0.0);
    let rgg_mean = rgg_triangle_mean(s.n, s.p, s.d, 20, 5).unwrap();
    let c = run_roc(&Decider::Triangle { rgg_mean }, RocAdversary::Budgeted(Adversary::None), &s).unwrap();
    assert_eq!(c.total(), 20);
    assert!(c.accuracy() >= 0.9, "{c:?}");
}

#[test]
fn spectral_decider_separates_low_dimension() {
    let s = setting(200, 4, 0.0);
    let c = run_roc(&Decider::Spectral, RocAdversary::Budgeted(Adversary::None), &s).unwrap();
    assert!(c.accuracy() >= 0.9, "{c:?}");
}

#[test]
fn coupling_adversary_defeats_deciders_in_high_dimension() {
    // accuracy of a coin flip has sd 0.05 over 100 trials
    let s = RocSetting { trials: 100, ..setting(150, 16384, 0.05) };
    let rgg_mean = rgg_triangle_mean(s.n, s.p, s.d, 20, 5).unwrap();
    for decider in [Decider::Triangle { rgg_mean }, Decider::Spectral] {
        let c = run_roc(&decider, RocAdversary::Coupling { d: s.d }, &s).unwrap();
        println!("{} under coupling adversary: {c:?}", decider.name());
        assert!(c.accuracy() <= 0.6, "{}: {c:?}", decider.name());
        let mut csv = Vec::new();
        c.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("truth,decided_rgg,decided_null"));
    }
}
