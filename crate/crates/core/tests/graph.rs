use rgg_coupling::graph::{sample_er, sample_rgg, Graph, LatentEmbedding};
use rgg_coupling::rng::stream;

#[test]
fn er_edge_count_concentrates() {
    let n = 200;
    let p = 0.1;
    let g = sample_er(&mut stream(1, "er", 0), n, p).unwrap();
    let pairs = (n * (n - 1) / 2) as f64;
    let sigma = (pairs * p * (1.0 - p)).sqrt();
    assert!((g.edge_count() as f64 - pairs * p).abs() <= 4.0 * sigma);
}

#[test]
fn rgg_marginal_edge_probability() {
    let p = 0.15;
    let mut hits = 0usize;
    let mut total = 0usize;
    for k in 0..250 {
        let (g, _) = sample_rgg(&mut stream(2, "rgg", k), 10, 20, p).unwrap();
        hits += g.edge_count();
        total += 45;
    }
    let sigma = (p * (1.0 - p) / total as f64).sqrt();
    assert!((hits as f64 / total as f64 - p).abs() <= 4.0 * sigma);
}

#[test]
fn two_vertices_in_three_dimensions() {
    let p = 0.25;
    let draws = 20_000;
    let hits = (0..draws).filter(|&k| sample_rgg(&mut stream(3, "pair", k), 2, 3, p).unwrap().0.has_edge(0, 1)).count();
    let sigma = (p * (1.0 - p) / draws as f64).sqrt();
    assert!((hits as f64 / draws as f64 - p).abs() <= 4.0 * sigma);
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (g, emb) = sample_rgg(&mut stream(4, "files", 0), 30, 8, 0.2).unwrap();
    let gp = dir.path().join("g.txt");
    let ep = dir.path().join("v.bin");
    g.write_text(std::fs::File::create(&gp).unwrap()).unwrap();
    emb.write_binary(std::fs::File::create(&ep).unwrap()).unwrap();
    let g2 = Graph::read_text(std::io::BufReader::new(std::fs::File::open(&gp).unwrap())).unwrap();
    let e2 = LatentEmbedding::read_binary(std::fs::File::open(&ep).unwrap()).unwrap();
    assert_eq!(g, g2);
    assert_eq!(emb, e2);
}
