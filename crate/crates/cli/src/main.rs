use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use dnngpc::emulation::{cutoff_schedule, hermite_net};
use dnngpc::gpc::{finite_dim_study, infinite_dim_study, ConvergenceReport};
use dnngpc::hermite::{gauss_hermite_rule, gauss_legendre_rule};
use dnngpc::index_sets::DownwardClosedSet;
use dnngpc::pde::pde_surrogate_study;
use dnngpc::relu_net::serialize;
use dnngpc::rng::DEFAULT_SEED;
use dnngpc::tensor::{build_tensor_hermite, TensorL2Method};
use dnngpc::verify::{run_suite, Suite, VerifyOptions};
use dnngpc::Exec;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

mod config;

#[derive(Parser)]
#[command(name = "dnngpc", version, about = "ReLU emulation of Hermite polynomials and gpc surrogates")]
struct Cli {
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the univariate emulator of H_n and measure its L2 error.
    HermiteNet {
        #[arg(short = 'n', long)]
        degree: usize,
        #[arg(short = 'e', long)]
        eps: f64,
        /// Network file; metadata goes to `<out>.meta.json`.
        #[arg(short = 'o', long, default_value = "hermite_net.json")]
        out: PathBuf,
    },
    /// Build the network {H~_nu : nu in Lambda} and estimate its errors.
    TensorNet {
        /// `box:k1,k2,...` or `total:d,m`.
        #[arg(long, conflicts_with = "set_file")]
        set: Option<String>,
        /// JSON index set.
        #[arg(long)]
        set_file: Option<PathBuf>,
        #[arg(short = 'e', long)]
        eps: f64,
        #[arg(long, default_value_t = 20_000)]
        mc_samples: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(short = 'o', long, default_value = "tensor_net.json")]
        out: PathBuf,
    },
    /// Run a convergence study and write `<kind>.csv` and `<kind>.json`.
    Study {
        kind: StudyKind,
        #[arg(short = 'c', long)]
        config: PathBuf,
        #[arg(short = 'o', long, default_value = ".")]
        out: PathBuf,
        /// Overrides the seed of the config (infinite and pde studies).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check the invariant suites; prints a JSON verdict.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Write a quadrature rule as `node,weight` CSV.
    ExportQuadrature {
        #[arg(long, value_enum, default_value_t = Rule::GaussHermite)]
        rule: Rule,
        #[arg(short = 'n', long)]
        nodes: usize,
        /// Defaults to stdout.
        #[arg(short = 'o', long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyKind {
    Finite,
    Infinite,
    Pde,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    GaussHermite,
    GaussLegendre,
}

/// Exit 2 for bad input, 1 for everything else.
enum Failure {
    Usage(anyhow::Error),
    Internal(anyhow::Error),
    Violation,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<dnngpc::Error>() {
            Some(dnngpc::Error::InvalidArgument(_)) | Some(dnngpc::Error::Parse { .. }) => Failure::Usage(e),
            _ => Failure::Internal(e),
        }
    }
}

impl From<dnngpc::Error> for Failure {
    fn from(e: dnngpc::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn usage(e: anyhow::Error) -> Failure {
    Failure::Usage(e)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    match run(cli.cmd, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Violation) => ExitCode::from(1),
    }
}

fn run(cmd: Cmd, exec: Exec) -> Result<(), Failure> {
    match cmd {
        Cmd::HermiteNet { degree, eps, out } => {
            let m = cutoff_schedule(degree, eps)?;
            let h = hermite_net(degree, m, eps)?;
            let err = h.l2_error(exec)?;
            write(&out, &serialize(&h.net))?;
            write(&sidecar(&out), serde_json::to_string_pretty(&h.meta).map_err(anyhow::Error::from)?.as_bytes())?;
            println!(
                "n={degree} eps={eps:e} M={m} size={} depth={} l2err={:e}",
                h.net.size(),
                h.net.depth(),
                err.estimate
            );
        }
        Cmd::TensorNet { set, set_file, eps, mc_samples, seed, out } => {
            let lambda = match (set, set_file) {
                (Some(s), None) => parse_set(&s).map_err(usage)?,
                (None, Some(p)) => {
                    let text = fs::read_to_string(&p).with_context(|| format!("cannot read {}", p.display())).map_err(usage)?;
                    DownwardClosedSet::from_json(&text)?
                }
                _ => return Err(usage(anyhow!("give one of --set or --set-file"))),
            };
            let t = build_tensor_hermite(&lambda, eps, exec)?;
            let errs = t.l2_errors(&TensorL2Method::MonteCarlo { samples: mc_samples, seed }, exec)?;
            write(&out, &serialize(&t.net))?;
            write(&sidecar(&out), t.sidecar_json().as_bytes())?;
            let (k, worst) = errs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.estimate.total_cmp(&b.1.estimate))
                .expect("nonempty set");
            println!(
                "card={} m={} d={} eps={eps:e} size={} depth={} max_l2err={:e} bar={:e} at nu={:?}",
                lambda.len(),
                lambda.max_order(),
                lambda.max_support(),
                t.meta.size,
                t.meta.depth,
                worst.estimate,
                worst.error_bar,
                lambda.indices()[k].entries()
            );
        }
        Cmd::Study { kind, config, out, seed } => {
            let (name, report) = study(kind, &config, seed, exec)?;
            fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
            write(&out.join(format!("{name}.csv")), report.to_csv().as_bytes())?;
            write(&out.join(format!("{name}.json")), report.to_json().as_bytes())?;
            for f in &report.fits {
                println!("{}: slope={:.4} r2={:.4} predicted={:.4}", f.model, f.slope, f.r_squared, f.predicted_slope);
            }
            if let Some(s) = &report.size_shape {
                println!("size shape: c={:.4e} max_ratio={:.4e} ok={}", s.fitted_c, s.max_ratio, s.ok);
            }
            for n in &report.notes {
                println!("note: {n}");
            }
        }
        Cmd::Verify { suite, inject_fault } => {
            let suite: Suite = suite.parse()?;
            let v = run_suite(suite, &VerifyOptions { inject_fault }, exec)?;
            println!("{}", v.to_json());
            if !v.pass {
                return Err(Failure::Violation);
            }
        }
        Cmd::ExportQuadrature { rule, nodes, out } => {
            if nodes == 0 {
                return Err(usage(anyhow!("need at least one node")));
            }
            let r = match rule {
                Rule::GaussHermite => gauss_hermite_rule(nodes),
                Rule::GaussLegendre => gauss_legendre_rule(nodes),
            };
            let mut csv = String::from("node,weight\n");
            for (x, w) in r.nodes.iter().zip(&r.weights) {
                csv.push_str(&format!("{x:.17e},{w:.17e}\n"));
            }
            match out {
                Some(p) => write(&p, csv.as_bytes())?,
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

fn study(kind: StudyKind, path: &Path, seed: Option<u64>, exec: Exec) -> Result<(&'static str, ConvergenceReport), Failure> {
    Ok(match kind {
        StudyKind::Finite => {
            let c: config::FiniteFile = config::load(path).map_err(usage)?;
            let f = c.target().map_err(usage)?;
            ("finite", finite_dim_study(&f, &c.beta, &c.study, exec)?)
        }
        StudyKind::Infinite => {
            let mut c: config::InfiniteFile = config::load(path).map_err(usage)?;
            if let Some(s) = seed {
                c.study.seed = s;
            }
            let w = c.weights.sequence()?;
            ("infinite", infinite_dim_study(&c.target(), &w, &c.study, exec)?)
        }
        StudyKind::Pde => {
            let mut c: config::PdeFile = config::load(path).map_err(usage)?;
            if let Some(s) = seed {
                c.study.seed = s;
            }
            let (cfg, kl, w) = c.problem()?;
            ("pde", pde_surrogate_study(&cfg, &kl, &w, &c.study, exec)?)
        }
    })
}

fn parse_set(s: &str) -> anyhow::Result<DownwardClosedSet> {
    let (kind, args) = s.split_once(':').ok_or_else(|| anyhow!("set must look like box:2,2 or total:3,4"))?;
    let nums: Vec<u32> = args
        .split(',')
        .map(|a| a.trim().parse().with_context(|| format!("bad number {a:?} in --set")))
        .collect::<anyhow::Result<_>>()?;
    match (kind, nums.as_slice()) {
        ("box", b) if !b.is_empty() => Ok(DownwardClosedSet::tensor_box(b)),
        ("total", &[d, m]) if d >= 1 => Ok(DownwardClosedSet::total_degree(d as usize, m)),
        _ => Err(anyhow!("unknown set {s:?}")),
    }
}

fn sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}
