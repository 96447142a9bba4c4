use std::fs::{self, File};
use std::io::{stdout, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gfss::adaptive::{adaptive_test_verbose, Witness};
use gfss::detectors::{aggregate_stat, energy_stat, gfss as gfss_stat, max_stat};
use gfss::graph::{balanced_binary_tree, knn_graph, kronecker_graph, torus};
use gfss::inference::{
    aggregate_threshold, energy_threshold, max_threshold, null_threshold, permutation_pvalue,
    permutation_pvalue_with, zscore, zscore_pvalue,
};
use gfss::io;
use gfss::sim::{ExperimentConfig, ExperimentOutput};
use gfss::{DetectionResult, Graph, Spectrum};

#[derive(Parser)]
#[command(name = "gfss", version, about = "Graph Fourier scan statistics")]
struct Cli {
    /// Seed for permutation tests; overrides the seed of a simulation config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated graph (JSON, or a u,v,w edge list for .csv paths).
    Generate(GenerateArgs),
    /// Build a symmetric k-nearest-neighbor graph from a point cloud.
    Knn {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Export the Laplacian spectrum as JSON.
    Spectrum {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the eigenvectors to this binary sidecar.
        #[arg(long)]
        eigenvectors: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Run a detector on a signal and print the result as JSON.
    Detect(DetectArgs),
    /// Run a ROC or sweep experiment described by a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[command(subcommand)]
    family: FamilyArgs,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand)]
enum FamilyArgs {
    /// Balanced binary tree with 2^(depth+1) - 1 vertices.
    Bbt {
        #[arg(long)]
        depth: usize,
    },
    /// side x side torus.
    Torus {
        #[arg(long)]
        side: usize,
    },
    /// Kronecker power of a base graph.
    Kron {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        levels: usize,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Gfss,
    Energy,
    Max,
    Aggregate,
    Adaptive,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    signal: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    /// Cut-sparsity level; required for gfss, rejected for adaptive.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Noise level; the signal is divided by it before testing.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Number of permutations for a permutation p-value.
    #[arg(long)]
    n_perm: Option<usize>,
    /// Include every adaptive candidate row.
    #[arg(long)]
    verbose: bool,
}

#[derive(Serialize)]
struct DetectOutput {
    #[serde(flatten)]
    result: DetectionResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    z_pvalue: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<Witness>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    rows: Vec<Witness>,
}

fn create(path: &Path, force: bool) -> Result<BufWriter<File>> {
    if path.exists() && !force {
        bail!(
            "{} already exists (use --force to overwrite)",
            path.display()
        );
    }
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn write_graph(g: &Graph, out: &Path, force: bool) -> Result<()> {
    let mut w = create(out, force)?;
    if is_csv(out) {
        io::write_edge_list(g, &mut w)?;
    } else {
        io::write_graph_json(g, &mut w)?;
    }
    w.flush()?;
    Ok(())
}

fn load_graph(path: &Path) -> Result<Graph> {
    io::load_graph(path).with_context(|| format!("reading graph {}", path.display()))
}

fn generate(args: GenerateArgs) -> Result<()> {
    let out = args.out.context("--out is required")?;
    let g = match args.family {
        FamilyArgs::Bbt { depth } => balanced_binary_tree(depth)?,
        FamilyArgs::Torus { side } => torus(side)?,
        FamilyArgs::Kron { base, levels } => kronecker_graph(&load_graph(&base)?, levels)?,
    };
    write_graph(&g, &out, args.force)?;
    eprintln!(
        "wrote {} vertices, {} edges to {}",
        g.p(),
        g.edges().len(),
        out.display()
    );
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        bail!("--{name} must be positive (got {v})");
    }
    Ok(())
}

fn detect(args: DetectArgs, seed: Option<u64>) -> Result<DetectOutput> {
    check_positive("sigma", args.sigma)?;
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        bail!("--alpha must lie in (0, 1) (got {})", args.alpha);
    }
    match (args.method, args.rho) {
        (Method::Gfss, None) => bail!("--rho is required for method gfss"),
        (Method::Adaptive, Some(_)) => bail!("--rho is not allowed for method adaptive"),
        (Method::Gfss, Some(rho)) => check_positive("rho", rho)?,
        _ => {}
    }
    if args.n_perm == Some(0) {
        bail!("--n-perm must be at least 1");
    }
    let g = load_graph(&args.graph)?;
    let y = io::read_signal(
        File::open(&args.signal)
            .with_context(|| format!("cannot open {}", args.signal.display()))?,
        g.p(),
    )
    .with_context(|| format!("reading signal {}", args.signal.display()))?;
    let y: Vec<f64> = y.iter().map(|v| v / args.sigma).collect();
    let p = g.p();
    let seed = seed.unwrap_or(0);
    let needs_spectrum = matches!(args.method, Method::Gfss | Method::Adaptive);
    let spec = if needs_spectrum {
        let s = Spectrum::of_graph(&g)?;
        s.require_connected()?;
        Some(s)
    } else {
        None
    };

    let mut witness = None;
    let mut rows = Vec::new();
    let mut z_pvalue = None;
    let mut result = match args.method {
        Method::Gfss => {
            let (spec, rho) = (spec.as_ref().expect("spectrum"), args.rho.expect("rho"));
            let mut r = DetectionResult::new("gfss", gfss_stat(spec, &y, rho)?)
                .with_threshold(null_threshold(spec, rho, args.alpha)?);
            let z = zscore(spec, &y, rho)?;
            r.zscore = Some(z);
            r.rho = Some(rho);
            z_pvalue = Some(zscore_pvalue(z));
            if let Some(n) = args.n_perm {
                r.p_value = Some(permutation_pvalue(spec, &y, rho, n, seed)?);
            }
            r
        }
        Method::Adaptive => {
            let spec = spec.as_ref().expect("spectrum");
            let a = adaptive_test_verbose(spec, &y, args.alpha, args.verbose)?;
            witness = a.witness;
            rows = a.rows;
            let mut r = DetectionResult::new("adaptive", a.score).with_threshold(0.0);
            if let Some(n) = args.n_perm {
                let stat = |v: &[f64]| {
                    adaptive_test_verbose(spec, v, args.alpha, false).map_or(f64::NAN, |a| a.score)
                };
                r.p_value = Some(permutation_pvalue_with(&y, n, seed, stat)?);
            }
            r
        }
        Method::Energy => baseline(
            "energy",
            &y,
            energy_stat,
            energy_threshold(p, args.alpha)?,
            args.n_perm,
            seed,
        )?,
        Method::Max => baseline(
            "max",
            &y,
            max_stat,
            max_threshold(p, args.alpha)?,
            args.n_perm,
            seed,
        )?,
        Method::Aggregate => baseline(
            "aggregate",
            &y,
            aggregate_stat,
            aggregate_threshold(p, args.alpha)?,
            args.n_perm,
            seed,
        )?,
    };
    result.alpha = Some(args.alpha);
    result.sigma = Some(args.sigma);
    if let Some(n) = args.n_perm {
        result.n_perm = Some(n);
        result.seed = Some(seed);
    }
    Ok(DetectOutput {
        result,
        z_pvalue,
        witness,
        rows,
    })
}

fn baseline(
    name: &str,
    y: &[f64],
    stat: fn(&[f64]) -> f64,
    threshold: f64,
    n_perm: Option<usize>,
    seed: u64,
) -> Result<DetectionResult> {
    let mut r = DetectionResult::new(name, stat(y)).with_threshold(threshold);
    if let Some(n) = n_perm {
        r.p_value = Some(permutation_pvalue_with(y, n, seed, stat)?);
    }
    Ok(r)
}

fn simulate(config: &Path, out: Option<PathBuf>, force: bool, seed: Option<u64>) -> Result<()> {
    let text =
        fs::read_to_string(config).with_context(|| format!("cannot read {}", config.display()))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)
        .with_context(|| format!("malformed config {}", config.display()))?;
    if let Some(s) = seed {
        match &mut cfg {
            ExperimentConfig::Roc { seed, .. } | ExperimentConfig::Sweep { seed, .. } => *seed = s,
        }
    }
    let result = cfg.run()?;
    let mut sink: Box<dyn Write> = match &out {
        Some(path) => Box::new(create(path, force)?),
        None => Box::new(BufWriter::new(stdout().lock())),
    };
    match &result {
        ExperimentOutput::Roc(curves) => {
            for c in curves {
                eprintln!(
                    "{}: auc = {:.4}, detection at fa 0.05 = {:.4}",
                    c.detector,
                    c.auc(),
                    c.detection_at(0.05)
                );
            }
            io::write_roc_csv(curves, &mut sink)?;
        }
        ExperimentOutput::Sweep(rows) => io::write_sweep_csv(rows, &mut sink)?,
    }
    sink.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Knn {
            points,
            k,
            out,
            force,
        } => {
            let f =
                File::open(&points).with_context(|| format!("cannot open {}", points.display()))?;
            let pts = io::read_points(f)
                .with_context(|| format!("reading points {}", points.display()))?;
            let g = knn_graph(&pts, k)?;
            write_graph(&g, &out, force)?;
            eprintln!(
                "wrote {} vertices, {} edges to {}",
                g.p(),
                g.edges().len(),
                out.display()
            );
            Ok(())
        }
        Command::Spectrum {
            graph,
            out,
            eigenvectors,
            force,
        } => {
            let g = load_graph(&graph)?;
            let s = Spectrum::of_graph(&g)?;
            let mut w = create(&out, force)?;
            s.write_json(&mut w)?;
            w.flush()?;
            if let Some(path) = eigenvectors {
                let mut w = create(&path, force)?;
                s.write_eigenvectors(&mut w)?;
                w.flush()?;
            }
            if !s.is_connected() {
                eprintln!(
                    "warning: graph is disconnected (lambda_2 = {:e})",
                    s.lambda2()
                );
            }
            Ok(())
        }
        Command::Detect(args) => {
            let out = detect(args, cli.seed)?;
            let mut stdout = stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, &out)?;
            writeln!(stdout)?;
            Ok(())
        }
        Command::Simulate { config, out, force } => simulate(&config, out, force, cli.seed),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
