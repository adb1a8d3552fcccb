use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use rgg_coupling::config::{parse_list, Config};
use rgg_coupling::coupling::{couple, run_coupling, CouplingConfig, MarginRule};
use rgg_coupling::experiments::{
    linspace, run_fkg, run_roc, run_scaling, run_threshold, Decider, Model, Property, RocAdversary, RocSetting,
};
use rgg_coupling::graph::{sample_er, sample_rgg, Graph};
use rgg_coupling::recursive::{build_schedule_until, continue_rounds, write_reports_csv, RoundBits};
use rgg_coupling::rng::stream;
use rgg_coupling::robust::{
    calibrate, decide_witness, read_calibration_csv, rgg_triangle_mean, write_calibration_csv, Adversary,
    AscentOptions, Calibration, CalibrationSetup,
};
use rgg_coupling::{Error, Result};

#[derive(Parser)]
#[command(name = "rggc", version, about = "Erdős–Rényi / geometric graph couplings and experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    d: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output path; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat key=value file; command-line flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample G(n, p).
    ErSample,
    /// Sample a spherical geometric graph.
    RggSample {
        /// Also write the latent vectors (binary).
        #[arg(long)]
        embedding: Option<PathBuf>,
    },
    /// Couple an Erdős–Rényi graph onto latent vectors.
    Couple {
        /// Input graph; sampled from G(n, p) when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        margin: Option<f64>,
        /// Constant of the formula margin.
        #[arg(long)]
        margin_c: Option<f64>,
        #[arg(long)]
        embedding: Option<PathBuf>,
    },
    /// First pass plus extra rounds; writes the per-round report CSV.
    Recursive {
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        c: Option<f64>,
        /// Reuse the first-pass input as every round's bits.
        #[arg(long)]
        reuse_initial: bool,
        /// Also write the final graph here.
        #[arg(long)]
        graph_out: Option<PathBuf>,
    },
    /// Fit witness-test constants and write the calibration CSV.
    Calibrate {
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        adversary: Option<String>,
    },
    /// Decide whether a graph is a corrupted geometric graph.
    Test {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        adversary: Option<String>,
    },
    #[command(subcommand)]
    Exp(Exp),
}

#[derive(Subcommand)]
enum Exp {
    Threshold {
        #[arg(long)]
        property: Option<String>,
        /// `er` or `rgg`.
        #[arg(long)]
        model: Option<String>,
        /// `lo,hi,points`.
        #[arg(long)]
        grid: Option<String>,
    },
    Fkg,
    Scaling {
        #[arg(long)]
        d_list: Option<String>,
    },
    Roc {
        #[arg(long)]
        decider: Option<String>,
        #[arg(long)]
        adversary: Option<String>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
}

struct Settings {
    common: Common,
    file: Config,
}

impl Settings {
    fn pick<T: FromStr + Clone>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.file.get(key),
        }
    }

    fn or<T: FromStr + Clone>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    fn need<T: FromStr + Clone>(&self, flag: Option<T>, key: &str) -> Result<T> {
        self.pick(flag, key)?.ok_or_else(|| Error::InvalidConfig(format!("missing --{}", key.replace('_', "-"))))
    }

    fn n(&self) -> Result<usize> {
        self.need(self.common.n, "n")
    }

    fn p(&self) -> Result<f64> {
        self.need(self.common.p, "p")
    }

    fn d(&self) -> Result<usize> {
        self.need(self.common.d, "d")
    }

    fn seed(&self) -> Result<u64> {
        self.or(self.common.seed, "seed", 0)
    }

    fn trials(&self, default: usize) -> Result<usize> {
        self.or(self.common.trials, "trials", default)
    }

    fn path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| self.file.raw(key).map(PathBuf::from))
    }

    fn out(&self) -> Result<Box<dyn Write>> {
        match self.path(self.common.out.clone(), "out") {
            Some(p) => Ok(Box::new(BufWriter::new(File::create(p)?))),
            None => Ok(Box::new(BufWriter::new(io::stdout()))),
        }
    }

    fn ascent(&self) -> Result<AscentOptions> {
        Ok(AscentOptions { iters: self.or(None, "iters", AscentOptions::default().iters)?, ..Default::default() })
    }
}

fn read_graph(path: &Path) -> Result<Graph> {
    Graph::read_text(BufReader::new(File::open(path)?))
}

fn load_calibration(path: &Path, n: usize, p: f64, d: usize) -> Result<Calibration> {
    read_calibration_csv(BufReader::new(File::open(path)?))?
        .into_iter()
        .find(|c| c.n == n && c.d == d && (c.p - p).abs() < 1e-12)
        .ok_or_else(|| Error::InvalidConfig(format!("no calibration row for n={n}, p={p}, d={d}")))
}

fn calibration_for(s: &Settings, file: Option<PathBuf>, eps: Option<f64>, adv: Option<String>) -> Result<Calibration> {
    let (n, p, d) = (s.n()?, s.p()?, s.d()?);
    if let Some(path) = s.path(file, "calibration") {
        return load_calibration(&path, n, p, d);
    }
    let setup = CalibrationSetup {
        n,
        p,
        d,
        epsilon: s.or(eps, "epsilon", 0.05)?,
        adversary: Adversary::parse(&s.or(adv, "adversary", "clique".to_string())?)?,
        null_samples: s.or(None, "null_samples", 50)?,
        alt_samples: s.or(None, "alt_samples", 50)?,
        seed: s.seed()?,
    };
    log::info!("calibrating witness test at n={n}, p={p}, d={d}");
    calibrate(&setup, &s.ascent()?)
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let s = Settings { common: cli.common, file };
    match cli.cmd {
        Cmd::ErSample => {
            let g = sample_er(&mut stream(s.seed()?, "cli.er", 0), s.n()?, s.p()?)?;
            g.write_text(s.out()?)?;
        }
        Cmd::RggSample { embedding } => {
            let (g, emb) = sample_rgg(&mut stream(s.seed()?, "cli.rgg", 0), s.n()?, s.d()?, s.p()?)?;
            g.write_text(s.out()?)?;
            if let Some(path) = s.path(embedding, "embedding") {
                emb.write_binary(BufWriter::new(File::create(path)?))?;
            }
        }
        Cmd::Couple { input, margin, margin_c, embedding } => {
            let seed = s.seed()?;
            let rule = match (s.pick(margin, "margin")?, s.pick(margin_c, "margin_c")?) {
                (Some(m), _) => MarginRule::Explicit(m),
                (None, Some(c)) => MarginRule::Formula { c },
                (None, None) => MarginRule::MaxDrift,
            };
            let out = match s.path(input, "input") {
                Some(path) => {
                    let h = read_graph(&path)?;
                    let cfg = CouplingConfig::new(h.n(), s.d()?, s.p()?).with_seed(seed).with_margin(rule);
                    couple(&mut stream(seed, "coupling.latent", 0), &h, &cfg)?
                }
                None => {
                    run_coupling(&CouplingConfig::new(s.n()?, s.d()?, s.p()?).with_seed(seed).with_margin(rule), 0)?
                }
            };
            out.realized.write_text(s.out()?)?;
            if let Some(path) = s.path(embedding, "embedding") {
                out.embedding.write_binary(BufWriter::new(File::create(path)?))?;
            }
            eprintln!(
                "margin={} fragile={} disagreements={} contained={}",
                out.margin,
                out.fragile.len(),
                out.disagreements.len(),
                out.disagreements_within_fragile()
            );
        }
        Cmd::Recursive { rounds, c, reuse_initial, graph_out } => {
            let (n, p, d, seed) = (s.n()?, s.p()?, s.d()?, s.seed()?);
            let cfg = CouplingConfig::new(n, d, p).with_seed(seed);
            let law = cfg.law()?;
            let first = run_coupling(&cfg, 0)?;
            let schedule = build_schedule_until(&law, n, s.or(c, "c", 1.0)?, s.or(rounds, "rounds", 3)?, first.margin)?;
            let bits = if reuse_initial { RoundBits::ReuseInitial } else { RoundBits::Fresh };
            let out = continue_rounds(&law, first, seed, 0, &schedule, bits)?;
            write_reports_csv(&out.reports, s.out()?)?;
            if let Some(path) = s.path(graph_out, "graph_out") {
                out.graph.write_text(BufWriter::new(File::create(path)?))?;
            }
        }
        Cmd::Calibrate { epsilon, adversary } => {
            let cal = calibration_for(&s, None, epsilon, adversary)?;
            write_calibration_csv(&[cal], s.out()?)?;
        }
        Cmd::Test { input, calibration, epsilon, adversary } => {
            let path = s.path(input, "input").ok_or_else(|| Error::InvalidConfig("missing --input".into()))?;
            let g = read_graph(&path)?;
            let s = Settings { common: Common { n: Some(g.n()), ..s.common }, file: s.file };
            let cal = calibration_for(&s, calibration, epsilon, adversary)?;
            let r = decide_witness(&mut stream(s.seed()?, "cli.test", 0), &g, &cal, &s.ascent()?)?;
            let mut w = s.out()?;
            writeln!(w, "DECISION={} margin={}", r.decision.label(), r.margin)?;
        }
        Cmd::Exp(exp) => run_exp(&s, exp)?,
    }
    Ok(())
}

fn run_exp(s: &Settings, exp: Exp) -> Result<()> {
    let seed = s.seed()?;
    match exp {
        Exp::Threshold { property, model, grid } => {
            let n = s.n()?;
            let property = Property::parse(&s.or(property, "property", "connectivity".to_string())?)?;
            let model = match s.or(model, "model", "er".to_string())?.as_str() {
                "er" => Model::Er,
                "rgg" => Model::Rgg { d: s.d()? },
                other => return Err(Error::InvalidConfig(format!("unknown model '{other}'"))),
            };
            let grid = match s.pick(grid, "grid")? {
                Some(g) => {
                    let parts: Vec<f64> =
                        parse_list(&g).map_err(|_| Error::InvalidConfig(format!("bad grid '{g}'")))?;
                    if parts.len() != 3 || parts[2] < 1.0 || parts[2].fract() != 0.0 {
                        return Err(Error::InvalidConfig("grid must be lo,hi,points".into()));
                    }
                    linspace(parts[0], parts[1], parts[2] as usize)
                }
                None => {
                    let centre = (n as f64).ln() / n as f64;
                    linspace(0.3 * centre, (2.0 * centre).min(0.5), 30)
                }
            };
            let curve = run_threshold(property, model, n, &grid, s.trials(30)?, seed)?;
            curve.write_csv(s.out()?)?;
            eprintln!("p_c={:?} window={:?}", curve.p_c, curve.window);
        }
        Exp::Fkg => {
            let e = run_fkg(seed, s.or(s.common.d, "d", 3)?, s.trials(1_000_000)?)?;
            let mut w = s.out()?;
            writeln!(w, "quantity,estimate,std_err")?;
            for k in 0..4 {
                writeln!(w, "mu{k},{},{}", e.mu[k].value, e.mu[k].se)?;
            }
            writeln!(w, "a,{},{}", e.a.value, e.a.se)?;
            writeln!(w, "mu3_plus_mu2_minus_quarter,{},{}", e.pair_identity.value, e.pair_identity.se)?;
            writeln!(w, "lattice_gap,{},{}", e.lattice_gap.value, e.lattice_gap.se)?;
        }
        Exp::Scaling { d_list } => {
            let d_list: Vec<usize> = match s.pick(d_list, "d_list")? {
                Some(l) => parse_list(&l).map_err(|_| Error::InvalidConfig(format!("bad d list '{l}'")))?,
                None => vec![1024, 4096, 16384],
            };
            let table = run_scaling(seed, s.n()?, s.p()?, &d_list, s.trials(20)?)?;
            table.write_csv(s.out()?)?;
            eprintln!("slope={}", table.slope);
        }
        Exp::Roc { decider, adversary, epsilon, calibration } => {
            let (n, p, d) = (s.n()?, s.p()?, s.d()?);
            let eps = s.or(epsilon, "epsilon", 0.05)?;
            let adv_name = s.or(adversary, "adversary", "clique".to_string())?;
            let adversary = RocAdversary::parse(&adv_name, d)?;
            let decider = match s.or(decider, "decider", "witness".to_string())?.as_str() {
                "witness" => {
                    let adv = match adversary {
                        RocAdversary::Budgeted(a) => a,
                        RocAdversary::Coupling { .. } => Adversary::None,
                    };
                    let cal = calibration_for(s, calibration, Some(eps), Some(adv.name().into()))?;
                    Decider::Witness { calibration: cal, options: s.ascent()? }
                }
                "triangle" => Decider::Triangle { rgg_mean: rgg_triangle_mean(n, p, d, 50, seed)? },
                "spectral" => Decider::Spectral,
                other => return Err(Error::InvalidConfig(format!("unknown decider '{other}'"))),
            };
            let setting = RocSetting { n, p, d, epsilon: eps, trials: s.trials(40)?, seed };
            let c = run_roc(&decider, adversary, &setting)?;
            c.write_csv(s.out()?)?;
            eprintln!("accuracy={}", c.accuracy());
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_)
        | Error::Singularity(_)
        | Error::DegenerateInterval { .. }
        | Error::ScheduleDegenerate(_)
        | Error::MissingDrift => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
