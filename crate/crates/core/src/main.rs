use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use typmatch::conditions::{cer_achievable, cer_condition_grid, CerConditionConfig};
use typmatch::experiment::{run_experiment, verify_counting, ExperimentConfig};
use typmatch::generators::{erasure_joint, gen_collection, gen_cpcs, gen_cper, gen_seeded, write_instance, TruthFile};
use typmatch::graph::{AttributedGraph, CommunityStructure};
use typmatch::matchers::{
    stm_match_graphs, tm_match_collection_graphs, tm_match_graphs, tm_match_sbm_blind_graphs, tm_match_sbm_graphs,
    MatchReport, StmConfig, TmConfig,
};
use typmatch::perm::Permutation;
use typmatch::typicality::JointDistribution;

/// Exit code for verification failures; configuration errors use 2.
const VERIFY_FAILED: u8 = 3;
const CONFIG_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "typmatch", version, about = "Typicality matching of correlated random graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenModel {
    Cer,
    Erasure,
    Sbm,
    Seeded,
    Collection,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatchKind {
    Cer,
    Sbm,
    SbmBlind,
    Collection,
    Seeded,
}

#[derive(clap::Args)]
struct JointArgs {
    /// Joint distribution file (`{"alphabets": [..], "pmf": [..]}`).
    #[arg(long)]
    joint: Option<PathBuf>,
    /// Erasure law as `p,s` instead of a file.
    #[arg(long, value_delimiter = ',')]
    erasure: Option<Vec<f64>>,
}

impl JointArgs {
    fn load(&self) -> anyhow::Result<JointDistribution> {
        match (&self.joint, &self.erasure) {
            (Some(path), None) => {
                Ok(JointDistribution::read(path).with_context(|| format!("reading {}", path.display()))?)
            }
            (None, Some(ps)) => match ps.as_slice() {
                &[p, s] => Ok(erasure_joint(p, s)?),
                _ => bail!("--erasure takes exactly two values p,s"),
            },
            _ => bail!("give exactly one of --joint and --erasure"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw an instance and write g*.json and truth.json into a directory.
    Generate {
        #[arg(long, value_enum)]
        model: GenModel,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        joint: JointArgs,
        /// Block joints for `sbm`, in block-index order.
        #[arg(long, value_delimiter = ',')]
        joints: Vec<PathBuf>,
        /// Community sizes for `sbm`.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Seed count for `seeded`.
        #[arg(long, default_value_t = 0)]
        lambda: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Match graph files and print a JSON report.
    Match {
        #[arg(long, value_enum)]
        model: MatchKind,
        /// Graph files; the first carries the revealed identity labeling.
        #[arg(long, value_delimiter = ',', required = true)]
        graphs: Vec<PathBuf>,
        #[command(flatten)]
        joint: JointArgs,
        #[arg(long, value_delimiter = ',')]
        joints: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        /// truth.json; supplies accuracy, seeds and community memberships.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Guard on the number of candidate labelings.
        #[arg(long)]
        limit: Option<f64>,
        #[arg(long, default_value_t = 2)]
        passes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-α CSV of the pair achievability condition.
    Bounds {
        #[command(flatten)]
        joint: JointArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.99)]
        alpha_max: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment config; relative paths resolve against its directory.
    Experiment { config: PathBuf },
    /// Exhaustive check of the counting formulas and bounds.
    VerifyCounting {
        #[arg(long, default_value_t = 5)]
        n_max: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(CONFIG_ERROR);
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(VERIFY_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(CONFIG_ERROR)
        }
    }
}

/// `TYPMATCH_THREADS` caps the worker pool.
fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("TYPMATCH_THREADS") {
        let k: usize = v.parse().with_context(|| format!("TYPMATCH_THREADS={v:?} is not a count"))?;
        if k == 0 {
            bail!("TYPMATCH_THREADS must be >= 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global()?;
    }
    Ok(())
}

/// Returns whether every verification passed.
fn run(cmd: Command) -> anyhow::Result<bool> {
    match cmd {
        Command::Generate { model, n, joint, joints, sizes, lambda, seed, out } => {
            generate(model, n, &joint, &joints, &sizes, lambda, seed, &out)?;
            Ok(true)
        }
        Command::Match { model, graphs, joint, joints, sizes, truth, eps, seed, limit, passes, out } => {
            let report =
                match_files(model, &graphs, &joint, &joints, &sizes, truth.as_deref(), eps, seed, limit, passes)?;
            emit(out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
            Ok(true)
        }
        Command::Bounds { joint, n, alpha_max, step, eps, out } => {
            let p = joint.load()?;
            let cfg = CerConditionConfig { alpha_step: step, eps, ..CerConditionConfig::default() };
            let points = cer_condition_grid(&p, n, alpha_max, &cfg)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["alpha", "E_alpha", "Eprime_alpha", "Ehat", "lhs", "margin"])?;
            for pt in &points {
                w.write_record(
                    [pt.alpha, pt.e_alpha, pt.eprime_alpha, pt.ehat, pt.lhs, pt.margin].map(|v| v.to_string()),
                )?;
            }
            emit(out.as_deref(), &String::from_utf8(w.into_inner()?)?)?;
            let report = cer_achievable(&p, n, alpha_max, &cfg)?;
            eprintln!(
                "satisfied={} margin={} worst_alpha={:?} side_ratio={}",
                report.satisfied, report.margin, report.worst, report.terms["side_ratio"]
            );
            Ok(true)
        }
        Command::Experiment { config } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg = ExperimentConfig::from_json(&text).context("invalid experiment config")?;
            let base = config.parent().unwrap_or(Path::new(".")).to_path_buf();
            let out = run_experiment(&cfg, &base)?;
            eprintln!(
                "{} rows -> {} (manifest {}), {} failures",
                out.rows.len(),
                out.csv_path.display(),
                out.manifest_path.display(),
                out.failures
            );
            Ok(out.failures == 0)
        }
        Command::VerifyCounting { n_max } => {
            let rep = verify_counting(n_max)?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
            Ok(rep.ok())
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn load_joints(paths: &[PathBuf]) -> anyhow::Result<Vec<JointDistribution>> {
    paths.iter().map(|p| JointDistribution::read(p).with_context(|| format!("reading {}", p.display()))).collect()
}

#[allow(clippy::too_many_arguments)]
fn generate(
    model: GenModel,
    n: usize,
    joint: &JointArgs,
    joints: &[PathBuf],
    sizes: &[usize],
    lambda: usize,
    seed: u64,
    out: &Path,
) -> anyhow::Result<()> {
    match model {
        GenModel::Cer | GenModel::Erasure => write_instance(out, &gen_cper(n, &joint.load()?, seed)?, &[])?,
        GenModel::Seeded => {
            let sp = gen_seeded(n, &joint.load()?, lambda, seed)?;
            write_instance(out, &sp.pair, &sp.seeds)?;
        }
        GenModel::Sbm => {
            let comm = CommunityStructure::contiguous(sizes)?;
            write_instance(out, &gen_cpcs(n, &comm, &load_joints(joints)?, seed)?, &[])?;
        }
        GenModel::Collection => {
            let p = joint.load()?;
            let coll = gen_collection(n, p.arity(), &p, seed)?;
            std::fs::create_dir_all(out)?;
            for (k, g) in coll.graphs.iter().enumerate() {
                g.write(&out.join(format!("g{}.json", k + 1)))?;
            }
            let hidden: Vec<Vec<usize>> = coll.labelings[1..].iter().map(|l| l.images().to_vec()).collect();
            let truth = TruthFile { sigma2: hidden[0].clone(), seeds: Vec::new(), hidden, communities: None };
            std::fs::write(out.join("truth.json"), serde_json::to_string(&truth)?)?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn match_files(
    model: MatchKind,
    graphs: &[PathBuf],
    joint: &JointArgs,
    joints: &[PathBuf],
    sizes: &[usize],
    truth: Option<&Path>,
    eps: Option<f64>,
    seed: u64,
    limit: Option<f64>,
    passes: usize,
) -> anyhow::Result<MatchReport> {
    let gs: Vec<AttributedGraph> = graphs
        .iter()
        .map(|p| AttributedGraph::read(p).with_context(|| format!("reading {}", p.display())))
        .collect::<anyhow::Result<_>>()?;
    let n = gs[0].n();
    let truth: Option<TruthFile> = match truth {
        Some(p) => Some(serde_json::from_str(&std::fs::read_to_string(p)?).context("invalid truth file")?),
        None => None,
    };
    let sigma2 = truth.as_ref().map(|t| Permutation::from_images(t.sigma2.clone())).transpose()?;
    let sigma1 = Permutation::identity(n);
    let mut tm = TmConfig { eps, seed, ..TmConfig::default() };
    if let Some(l) = limit {
        tm.limit = l;
    }
    let pair_graphs = || -> anyhow::Result<(&AttributedGraph, &AttributedGraph)> {
        match gs.as_slice() {
            [a, b] => Ok((a, b)),
            _ => bail!("this model needs exactly two graphs"),
        }
    };
    Ok(match model {
        MatchKind::Cer => {
            let (g1, g2) = pair_graphs()?;
            tm_match_graphs(g1, &sigma1, g2, &joint.load()?, sigma2.as_ref(), &tm)?
        }
        MatchKind::Sbm => {
            let (g1, g2) = pair_graphs()?;
            let Some([c1, c2]) = truth.as_ref().and_then(|t| t.communities.clone()) else {
                bail!("sbm matching needs community memberships in the truth file");
            };
            let (c1, c2) = (CommunityStructure::new(c1)?, CommunityStructure::new(c2)?);
            tm_match_sbm_graphs(g1, &sigma1, &c1, g2, &c2, &load_joints(joints)?, sigma2.as_ref(), &tm)?
        }
        MatchKind::SbmBlind => {
            let (g1, g2) = pair_graphs()?;
            tm_match_sbm_blind_graphs(g1, &sigma1, g2, sizes, &load_joints(joints)?, sigma2.as_ref(), &tm)?
        }
        MatchKind::Collection => {
            let hidden: Option<Vec<Permutation>> = truth
                .as_ref()
                .map(|t| t.hidden.iter().map(|h| Permutation::from_images(h.clone())).collect())
                .transpose()?;
            tm_match_collection_graphs(&gs, &sigma1, &joint.load()?, hidden.as_deref(), &tm)?
        }
        MatchKind::Seeded => {
            let (g1, g2) = pair_graphs()?;
            let (Some(t), Some(s2)) = (truth.as_ref(), sigma2.as_ref()) else {
                bail!("seeded matching needs the truth file for its seeds");
            };
            // the g1 vertex sharing each seed's label; g1 carries the identity
            let reverse: Vec<usize> = t.seeds.iter().map(|&v| s2.apply(v)).collect();
            let cfg = StmConfig { eps, passes, seed };
            stm_match_graphs(g1, &sigma1, g2, &joint.load()?, &t.seeds, &reverse, Some(s2), &cfg)?
        }
    })
}
