//! `curvalign` command-line driver.
//!
//! Stage subcommands read and write the same JSON/CSV layouts the pipeline
//! emits, so a pipeline output directory can be fed back into any stage.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;
use serde_json::{json, Value};

use curvalign::community::{community_metrics, detect_communities, ThresholdStrategy};
use curvalign::curvature::DEFAULT_ALPHA;
use curvalign::distances::{
    curvature_kld, curvature_w1, default_t_grid, heat_distance, HeatOperand, WeightChannel,
};
use curvalign::flow::{DEFAULT_ITERATIONS, DEFAULT_WEIGHT_FLOOR};
use curvalign::gmm::{select_gmm, DEFAULT_MAX_COMPONENTS};
use curvalign::graph::{DensityKernel, GraphDocument};
use curvalign::io::{load_pointset, save_pointset, to_distance, write_square};
use curvalign::pipeline::{InputSpec, STANDARD_SWEEP};
use curvalign::report::{save_json, stamped, Provenance};
use curvalign::rsa::{build_rdm, profile_analysis, rsa_score, RdmSource};
use curvalign::synth::{family_distance_matrix, generate, standard_families, Family, HeatConfig, SynthSpec, Synthetic, Transform};
use curvalign::{
    build_graph, orc_all, run_flow, run_pipeline, AdaptiveKnnParams, CurvatureMap, FlowConfig, FlowState, Metric,
    PointSetKind, Rdm, RunConfig, WeightedGraph,
};

#[derive(Parser)]
#[command(name = "curvalign", version, about = "Compare representational geometries with Ricci curvature and flow")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a point set and write its distance matrix.
    Ingest {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the adaptive kNN graph of a point set.
    Graph {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        knn: KnnArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ollivier-Ricci curvature of every edge.
    Curvature {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run discrete Ricci flow from unit weights.
    Flow {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        flow: FlowArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cut flowed edges into communities and score the partition.
    Communities {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        flow: PathBuf,
        /// `modularity` or a fixed weight threshold.
        #[arg(long, default_value = "modularity")]
        threshold: ThresholdStrategy,
        #[arg(long)]
        out: PathBuf,
    },
    /// Representational dissimilarity matrix from points, a graph or a flow.
    Rdm {
        #[arg(long, required_unless_present = "graph", conflicts_with = "graph")]
        input: Option<PathBuf>,
        #[arg(long, default_value = "embeddings")]
        kind: PointSetKind,
        #[arg(long, conflicts_with = "input")]
        graph: Option<PathBuf>,
        #[arg(long, requires = "graph")]
        flow: Option<PathBuf>,
        #[arg(long)]
        metric: Metric,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two representations stage by stage.
    Compare(CompareArgs),
    /// Fit Gaussian mixtures to a curvature distribution and select by BIC.
    Gmm {
        #[arg(long)]
        curvature: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_COMPONENTS)]
        max_components: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthetic manifolds and graphs.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Run every stage for every input and every pair.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "embeddings")]
    kind: PointSetKind,
    /// Defaults to euclidean for embeddings and from_similarity otherwise.
    #[arg(long)]
    metric: Option<Metric>,
}

impl InputArgs {
    fn metric(&self) -> Metric {
        self.metric.unwrap_or(match self.kind {
            PointSetKind::Embeddings => Metric::Euclidean,
            PointSetKind::Similarity => Metric::FromSimilarity,
        })
    }
}

#[derive(Args)]
struct KnnArgs {
    #[arg(long, default_value_t = 5)]
    k_min: usize,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    #[arg(long, default_value = "mean")]
    density_kernel: DensityKernel,
}

impl KnnArgs {
    fn params(&self) -> AdaptiveKnnParams {
        AdaptiveKnnParams {
            k_min: self.k_min,
            k_max: self.k_max,
            kernel: self.density_kernel,
        }
    }
}

#[derive(Args)]
struct FlowArgs {
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iterations: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Rescale weights to sum to the edge count after each step.
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value_t = DEFAULT_WEIGHT_FLOOR)]
    weight_floor: f64,
}

impl FlowArgs {
    fn config(&self) -> FlowConfig {
        FlowConfig {
            iterations: self.iterations,
            alpha: self.alpha,
            normalize: self.normalize,
            weight_floor: self.weight_floor,
        }
    }
}

#[derive(Args)]
struct CompareArgs {
    /// Two RDM CSVs: RSA score and per-item profile correlations.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    rdm: Option<Vec<PathBuf>>,
    /// Two curvature JSONs: W1 and histogram KL divergence.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    curvature: Option<Vec<PathBuf>>,
    /// Two graph JSONs over the same nodes: heat-kernel distance.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    graph: Option<Vec<PathBuf>>,
    /// Flow JSONs matching `--graph`, needed for the flow channel.
    #[arg(long, num_args = 2, value_names = ["A", "B"], requires = "graph")]
    flow: Option<Vec<PathBuf>>,
    /// Laplacian weights; defaults to flow when `--flow` is given, else unit.
    #[arg(long)]
    channel: Option<WeightChannel>,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Torus,
    SwissRoll,
    Sbm,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Sample one dataset: points as CSV, SBM graphs as JSON.
    Generate {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long)]
        sigmoid: bool,
        #[arg(long, default_value_t = 2.0)]
        major: f64,
        #[arg(long, default_value_t = 1.0)]
        minor: f64,
        #[arg(long, default_value_t = 1.5 * std::f64::consts::PI)]
        t_min: f64,
        #[arg(long, default_value_t = 4.5 * std::f64::consts::PI)]
        t_max: f64,
        #[arg(long, default_value_t = 0.05)]
        jitter: f64,
        /// SBM block sizes, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [50usize, 50])]
        blocks: Vec<usize>,
        #[arg(long, default_value_t = 0.3)]
        p_in: f64,
        #[arg(long, default_value_t = 0.02)]
        p_out: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Heat distances among torus and swiss roll, plain and sigmoid.
    /// Exits nonzero unless within-family distances stay below cross-family ones.
    FamilyCheck {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[command(flatten)]
        knn: KnnArgs,
        #[arg(long, default_value = "flow")]
        channel: WeightChannel,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct PipelineArgs {
    /// TOML run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Embedding input as `ID=PATH`.
    #[arg(long = "input", value_name = "ID=PATH")]
    inputs: Vec<String>,
    /// Similarity-matrix input as `ID=PATH`.
    #[arg(long = "similarity", value_name = "ID=PATH")]
    similarities: Vec<String>,
    /// Required unless the config file sets it.
    #[arg(long)]
    seed: Option<u64>,
    /// Ambient RDM metrics (repeatable), e.g. `minkowski:3`.
    #[arg(long = "metric")]
    metrics: Vec<Metric>,
    #[arg(long)]
    graph_metric: Option<Metric>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    density_kernel: Option<DensityKernel>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    flow_iterations: Option<usize>,
    #[arg(long)]
    normalize_flow: bool,
    #[arg(long)]
    weight_floor: Option<f64>,
    #[arg(long)]
    threshold: Option<ThresholdStrategy>,
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    #[arg(long)]
    heat_channel: Option<WeightChannel>,
    #[arg(long)]
    gmm_max_components: Option<usize>,
    #[arg(long)]
    kld_bins: Option<usize>,
    #[arg(long)]
    subsample_size: Option<usize>,
    #[arg(long)]
    subsample_iterations: Option<usize>,
    /// Extra `(k_min, k_max)` settings as `KMIN,KMAX` (repeatable).
    #[arg(long = "sweep-k", value_name = "KMIN,KMAX", value_parser = parse_k_pair)]
    sweep_k: Vec<(usize, usize)>,
    /// Add the standard sweep (5,15), (10,15), (10,20).
    #[arg(long)]
    sweep: bool,
    #[arg(long)]
    out: PathBuf,
}

fn parse_k_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected KMIN,KMAX, got `{s}`"))?;
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn parse_input(spec: &str, kind: PointSetKind) -> Result<InputSpec> {
    let (id, path) = spec
        .split_once('=')
        .with_context(|| format!("input `{spec}` is not of the form ID=PATH"))?;
    Ok(InputSpec {
        id: id.to_string(),
        path: PathBuf::from(path),
        kind,
    })
}

/// Merges the config file (if any) with command-line overrides.
fn pipeline_config(args: &PipelineArgs) -> Result<RunConfig> {
    let (mut cfg, file_seed) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let raw: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
            let has_seed = raw.contains_key("seed");
            let mut cfg: RunConfig = raw.try_into().with_context(|| format!("invalid config {}", path.display()))?;
            // input paths are relative to the config file
            let base = path.parent().unwrap_or(Path::new(""));
            for input in &mut cfg.inputs {
                if input.path.is_relative() {
                    input.path = base.join(&input.path);
                }
            }
            (cfg, has_seed)
        }
        None => (RunConfig::default(), false),
    };
    for s in &args.inputs {
        cfg.inputs.push(parse_input(s, PointSetKind::Embeddings)?);
    }
    for s in &args.similarities {
        cfg.inputs.push(parse_input(s, PointSetKind::Similarity)?);
    }
    match args.seed {
        Some(seed) => cfg.seed = seed,
        None if file_seed => {}
        None => bail!("a seed is required: pass --seed or set `seed` in the config"),
    }
    if !args.metrics.is_empty() {
        cfg.metrics = args.metrics.clone();
    }
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = args.$field.clone() {
                cfg.$field = v;
            }
        )*};
    }
    set!(graph_metric, k_min, k_max, density_kernel, alpha, flow_iterations, weight_floor, threshold, t_grid, gmm_max_components, kld_bins, subsample_size, subsample_iterations);
    if args.heat_channel.is_some() {
        cfg.heat_channel = args.heat_channel;
    }
    if args.normalize_flow {
        cfg.normalize_flow = true;
    }
    if args.sweep {
        cfg.sweep.extend(STANDARD_SWEEP);
    }
    cfg.sweep.extend(args.sweep_k.iter().copied());
    cfg.sweep.dedup();
    cfg.validate()?;
    Ok(cfg)
}

/// Provenance for a single-stage invocation.
fn provenance(inputs: &[(&str, &Path)], parameters: Value, seed: u64) -> Provenance {
    let inputs = inputs
        .iter()
        .map(|(k, p)| (k.to_string(), p.display().to_string()))
        .collect::<BTreeMap<_, _>>();
    Provenance::new(inputs, parameters, seed)
}

fn csv_comment(prov: &Provenance) -> String {
    format!("config_hash={} seed={}", prov.config_hash, prov.seed)
}

/// Writes `value` with its provenance folded in at top level.
fn write_json<T: Serialize>(path: &Path, value: &T, prov: &Provenance) -> Result<()> {
    let mut v = stamped(value, &prov.config_hash, prov.seed)?;
    v.as_object_mut()
        .expect("stamped values are objects")
        .insert("run_provenance".into(), serde_json::to_value(prov)?);
    create_parent(path)?;
    save_json(&v, path).with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_graph(path: &Path) -> Result<WeightedGraph> {
    let doc: GraphDocument = read_json(path)?;
    Ok(WeightedGraph::try_from(doc)?)
}

fn load_rdm(path: &Path) -> Result<Rdm> {
    // the tag only matters for reporting; RDM files do not record it
    Rdm::load_csv(path, Metric::Euclidean).with_context(|| format!("reading {}", path.display()))
}

fn write_square_csv(path: &Path, ids: &[String], values: &[f64], prov: &Provenance) -> Result<()> {
    create_parent(path)?;
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_square(std::io::BufWriter::new(file), ids, values, Some(&csv_comment(prov)))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Ingest { input, out } => {
            let metric = input.metric();
            let ps = load_pointset(&input.input, input.kind)?;
            let d = to_distance(&ps, metric)?;
            let prov = provenance(&[("input", &input.input)], json!({"kind": input.kind, "metric": metric}), 0);
            write_square_csv(&out, ps.ids(), d.values(), &prov)?;
        }
        Command::Graph { input, knn, out } => {
            let metric = input.metric();
            let ps = load_pointset(&input.input, input.kind)?;
            let params = knn.params();
            let g = build_graph(ps.ids(), &to_distance(&ps, metric)?, &params)?;
            let prov = provenance(
                &[("input", &input.input)],
                json!({"kind": input.kind, "metric": metric, "knn": params}),
                0,
            );
            write_json(&out, &GraphDocument::from(&g), &prov)?;
        }
        Command::Curvature { graph, alpha, out } => {
            let g = load_graph(&graph)?;
            let map = orc_all(&g, alpha)?;
            let prov = provenance(&[("graph", &graph)], json!({"alpha": alpha, "neighbor_measure": "uniform"}), 0);
            write_json(&out, &map, &prov)?;
        }
        Command::Flow { graph, flow, out } => {
            let g = load_graph(&graph)?;
            let cfg = flow.config();
            let state = run_flow(&g, &cfg)?;
            let prov = provenance(&[("graph", &graph)], serde_json::to_value(cfg)?, 0);
            write_json(&out, &state, &prov)?;
        }
        Command::Communities {
            graph,
            flow,
            threshold,
            out,
        } => {
            let g = load_graph(&graph)?;
            let state: FlowState = read_json(&flow)?;
            let assignment = detect_communities(&g, &state, threshold)?;
            let metrics = community_metrics(&g, &assignment.labels)?;
            let prov = provenance(
                &[("graph", &graph), ("flow", &flow)],
                json!({"threshold": threshold.to_string(), "modularity": "newman_unweighted"}),
                0,
            );
            write_json(&out, &json!({"assignment": assignment, "metrics": metrics}), &prov)?;
        }
        Command::Rdm {
            input,
            kind,
            graph,
            flow,
            metric,
            out,
        } => {
            let (rdm, prov) = match (input, graph) {
                (Some(path), _) => {
                    let ps = load_pointset(&path, kind)?;
                    let rdm = build_rdm(RdmSource::Points(&ps), metric)?;
                    (rdm, provenance(&[("input", &path)], json!({"kind": kind, "metric": metric}), 0))
                }
                (None, Some(gpath)) => {
                    let g = load_graph(&gpath)?;
                    match flow {
                        Some(fpath) => {
                            let state: FlowState = read_json(&fpath)?;
                            let rdm = build_rdm(RdmSource::Flow { graph: &g, state: &state }, metric)?;
                            (rdm, provenance(&[("graph", &gpath), ("flow", &fpath)], json!({"metric": metric}), 0))
                        }
                        None => {
                            let rdm = build_rdm(RdmSource::Graph(&g), metric)?;
                            (rdm, provenance(&[("graph", &gpath)], json!({"metric": metric}), 0))
                        }
                    }
                }
                (None, None) => bail!("either --input or --graph is required"),
            };
            write_square_csv(&out, rdm.ids(), rdm.matrix().values(), &prov)?;
        }
        Command::Compare(args) => compare(args)?,
        Command::Gmm {
            curvature,
            max_components,
            seed,
            out,
        } => {
            let map: CurvatureMap = read_json(&curvature)?;
            let selection = select_gmm(&map.values(), max_components, seed)?;
            let prov = provenance(
                &[("curvature", &curvature)],
                json!({"max_components": max_components, "bic": "-2 logL + (3k - 1) ln n"}),
                seed,
            );
            write_json(&out, &selection, &prov)?;
        }
        Command::Synth(cmd) => return synth(cmd),
        Command::Pipeline(args) => {
            let cfg = pipeline_config(&args)?;
            let outcome = run_pipeline(&cfg, &args.out)?;
            info!("manifest written to {}", outcome.manifest_path.display());
            if !outcome.succeeded() {
                for e in &outcome.manifest.errors {
                    eprintln!("error: {} [{}]: {}", e.stage, e.input, e.message);
                }
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn compare(args: CompareArgs) -> Result<()> {
    let mut results = serde_json::Map::new();
    let mut inputs: Vec<(String, PathBuf)> = Vec::new();
    let mut params = serde_json::Map::new();

    if let Some(paths) = &args.rdm {
        let (a, b) = (load_rdm(&paths[0])?, load_rdm(&paths[1])?);
        let score = rsa_score(&a, &b)?;
        let profile = profile_analysis(&a, &b)?;
        results.insert(
            "rsa".into(),
            json!({
                "r": score.r,
                "n_pairs": score.n_pairs,
                "profile": a.ids().iter().zip(profile).map(|(id, r)| json!({"id": id, "r": r})).collect::<Vec<_>>(),
            }),
        );
        inputs.extend([("rdm_a".into(), paths[0].clone()), ("rdm_b".into(), paths[1].clone())]);
    }
    if let Some(paths) = &args.curvature {
        let a: CurvatureMap = read_json(&paths[0])?;
        let b: CurvatureMap = read_json(&paths[1])?;
        results.insert("ws1".into(), json!(curvature_w1(&a, &b)?));
        results.insert("kld".into(), json!(curvature_kld(&a, &b, args.bins)?));
        params.insert("kld_bins".into(), json!(args.bins));
        inputs.extend([("curvature_a".into(), paths[0].clone()), ("curvature_b".into(), paths[1].clone())]);
    }
    if let Some(paths) = &args.graph {
        let (ga, gb) = (load_graph(&paths[0])?, load_graph(&paths[1])?);
        let flows: Option<(FlowState, FlowState)> = match &args.flow {
            Some(f) => {
                inputs.extend([("flow_a".into(), f[0].clone()), ("flow_b".into(), f[1].clone())]);
                Some((read_json(&f[0])?, read_json(&f[1])?))
            }
            None => None,
        };
        let (oa, ob) = match &flows {
            Some((fa, fb)) => (HeatOperand::with_flow(&ga, &fa.weights), HeatOperand::with_flow(&gb, &fb.weights)),
            None => (HeatOperand::new(&ga), HeatOperand::new(&gb)),
        };
        let channel = args
            .channel
            .unwrap_or(if flows.is_some() { WeightChannel::Flow } else { WeightChannel::Unit });
        let grid = default_t_grid();
        results.insert("heat".into(), serde_json::to_value(heat_distance(&oa, &ob, channel, &grid)?)?);
        params.insert("heat_channel".into(), json!(channel));
        params.insert("t_grid".into(), json!(grid));
        inputs.extend([("graph_a".into(), paths[0].clone()), ("graph_b".into(), paths[1].clone())]);
    }
    if results.is_empty() {
        bail!("nothing to compare: give --rdm, --curvature and/or --graph");
    }
    let refs: Vec<(&str, &Path)> = inputs.iter().map(|(k, p)| (k.as_str(), p.as_path())).collect();
    let prov = provenance(&refs, Value::Object(params), 0);
    write_json(&args.out, &Value::Object(results), &prov)
}

fn synth(cmd: SynthCommand) -> Result<ExitCode> {
    match cmd {
        SynthCommand::Generate {
            family,
            n,
            sigmoid,
            major,
            minor,
            t_min,
            t_max,
            jitter,
            blocks,
            p_in,
            p_out,
            seed,
            out,
        } => {
            let family = match family {
                FamilyArg::Torus => Family::Torus { major, minor },
                FamilyArg::SwissRoll => Family::SwissRoll { t_min, t_max, jitter },
                FamilyArg::Sbm => Family::Sbm {
                    block_sizes: blocks,
                    p_in,
                    p_out,
                },
            };
            let transform = if sigmoid { Transform::Sigmoid } else { Transform::None };
            let spec = SynthSpec::new(family, n, transform, seed);
            let prov = Provenance::new(BTreeMap::new(), serde_json::to_value(&spec)?, seed);
            match generate(&spec)? {
                Synthetic::Points(ps) => {
                    create_parent(&out)?;
                    save_pointset(&out, &ps, Some(&csv_comment(&prov)))?;
                    info!("wrote {}", out.display());
                }
                Synthetic::Graph { graph, labels } => {
                    write_json(&out, &json!({"graph": GraphDocument::from(&graph), "labels": labels}), &prov)?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        SynthCommand::FamilyCheck {
            n,
            knn,
            channel,
            seed,
            out,
        } => {
            let specs = standard_families(n, seed);
            let params = knn.params();
            let heat = HeatConfig {
                channel,
                ..HeatConfig::default()
            };
            let report = family_distance_matrix(&specs, &params, &heat)?;
            let prov = Provenance::new(
                BTreeMap::new(),
                json!({"specs": specs, "knn": params, "heat": heat}),
                seed,
            );
            write_json(&out, &report, &prov)?;
            if let Err(e) = report.check() {
                warn!("{e}");
                eprintln!("family check failed: {e}");
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
