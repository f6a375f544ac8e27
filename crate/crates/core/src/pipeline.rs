//! End-to-end analysis of one or more representations.
//!
//! Per representation: distances, adaptive graph, curvature, Ricci flow,
//! RDMs, curvature GMM and communities. Per pair: RSA, profile analysis,
//! W1 and KLD between curvature distributions, heat distance and their
//! subsampled statistics. Everything lands under one output directory
//! together with a manifest of file digests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::community::{community_metrics, detect_communities, CommunityAssignment, CommunityMetrics, ThresholdStrategy};
use crate::curvature::{orc_all, CurvatureMap, DEFAULT_ALPHA};
use crate::distances::{
    curvature_kld, curvature_w1, default_t_grid, heat_distance, subsample_protocol, HeatDistance, HeatOperand,
    SubsampleStats, WeightChannel, DEFAULT_SUBSAMPLE_ITERATIONS, DEFAULT_SUBSET,
};
use crate::flow::{run_flow, FlowConfig, FlowState, DEFAULT_ITERATIONS, DEFAULT_WEIGHT_FLOOR};
use crate::gmm::{select_gmm, GmmSelection, DEFAULT_MAX_COMPONENTS};
use crate::graph::{build_graph, AdaptiveKnnParams, DensityKernel, GraphDocument, WeightedGraph};
use crate::io::{load_pointset, to_distance, write_square, Metric, PointSet, PointSetKind, DEFAULT_MINKOWSKI_P};
use crate::report::{save_json, sha256_hex, stamped, to_canonical_json, AnalysisReport, Provenance};
use crate::rng::derive_seed;
use crate::rsa::{alignment_matrix, build_rdm, profile_analysis, rsa_score, Rdm, RdmSource};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub id: String,
    pub path: PathBuf,
    pub kind: PointSetKind,
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::Euclidean, Metric::Cosine, Metric::Minkowski(DEFAULT_MINKOWSKI_P)]
}

/// Every tunable of a pipeline run. Serialized verbatim into provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub inputs: Vec<InputSpec>,
    /// Ambient-space RDM metrics computed for embedding inputs.
    pub metrics: Vec<Metric>,
    /// Metric used to build graphs from embeddings.
    pub graph_metric: Metric,
    pub k_min: usize,
    pub k_max: usize,
    pub density_kernel: DensityKernel,
    pub alpha: f64,
    pub flow_iterations: usize,
    pub normalize_flow: bool,
    pub weight_floor: f64,
    pub threshold: ThresholdStrategy,
    pub t_grid: Vec<f64>,
    /// `None` selects flow weights whenever a flow exists.
    pub heat_channel: Option<WeightChannel>,
    pub gmm_max_components: usize,
    pub kld_bins: usize,
    pub subsample_size: usize,
    pub subsample_iterations: usize,
    /// Extra `(k_min, k_max)` settings for distance heatmaps.
    pub sweep: Vec<(usize, usize)>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            metrics: default_metrics(),
            graph_metric: Metric::Euclidean,
            k_min: 5,
            k_max: 10,
            density_kernel: DensityKernel::Mean,
            alpha: DEFAULT_ALPHA,
            flow_iterations: DEFAULT_ITERATIONS,
            normalize_flow: false,
            weight_floor: DEFAULT_WEIGHT_FLOOR,
            threshold: ThresholdStrategy::ModularityScan,
            t_grid: default_t_grid(),
            heat_channel: None,
            gmm_max_components: DEFAULT_MAX_COMPONENTS,
            kld_bins: 20,
            subsample_size: DEFAULT_SUBSET,
            subsample_iterations: DEFAULT_SUBSAMPLE_ITERATIONS,
            sweep: Vec::new(),
            seed: 0,
        }
    }
}

/// The `(k_min, k_max)` grid shown alongside the default setting.
pub const STANDARD_SWEEP: [(usize, usize); 3] = [(5, 15), (10, 15), (10, 20)];

impl RunConfig {
    pub fn knn(&self) -> AdaptiveKnnParams {
        AdaptiveKnnParams {
            k_min: self.k_min,
            k_max: self.k_max,
            kernel: self.density_kernel,
        }
    }

    pub fn flow(&self) -> FlowConfig {
        FlowConfig {
            iterations: self.flow_iterations,
            alpha: self.alpha,
            normalize: self.normalize_flow,
            weight_floor: self.weight_floor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::InvalidParameter("at least one input representation is required".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for input in &self.inputs {
            if input.id.is_empty() || input.id.contains(['/', '\\']) || !seen.insert(&input.id) {
                return Err(Error::InvalidParameter(format!("bad or duplicate input id `{}`", input.id)));
            }
        }
        if self.k_min == 0 || self.k_min > self.k_max {
            return Err(Error::InvalidParameter("need 1 <= k_min <= k_max".into()));
        }
        for &(lo, hi) in &self.sweep {
            if lo == 0 || lo > hi {
                return Err(Error::InvalidParameter(format!("bad sweep setting ({lo}, {hi})")));
            }
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter("alpha must lie in [0, 1)".into()));
        }
        if self.t_grid.is_empty() || self.t_grid.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidParameter("t grid must be nonempty and positive".into()));
        }
        if self.kld_bins < 2 || self.gmm_max_components == 0 {
            return Err(Error::InvalidParameter("need kld_bins >= 2 and gmm_max_components >= 1".into()));
        }
        if self.subsample_iterations == 0 || self.subsample_size < 3 {
            return Err(Error::InvalidParameter("subsampling needs iterations >= 1 and size >= 3".into()));
        }
        Ok(())
    }

    fn channel(&self) -> WeightChannel {
        self.heat_channel.unwrap_or(WeightChannel::Flow)
    }

    fn provenance(&self) -> Result<Provenance> {
        let inputs = self
            .inputs
            .iter()
            .map(|i| (i.id.clone(), format!("{}:{}", i.kind, i.path.display())))
            .collect();
        let mut params = serde_json::to_value(self)?;
        if let Some(obj) = params.as_object_mut() {
            obj.remove("inputs");
            obj.remove("seed");
            obj.insert("similarity_to_distance".into(), json!("max(0, 1 - s)"));
            obj.insert("neighbor_measure".into(), json!("uniform"));
            obj.insert("bic".into(), json!("-2 logL + (3k - 1) ln n"));
            obj.insert("modularity".into(), json!("newman_unweighted"));
        }
        Ok(Provenance::new(inputs, params, self.seed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub input: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub files: Vec<ManifestEntry>,
    pub errors: Vec<StageError>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
}

impl PipelineOutcome {
    pub fn succeeded(&self) -> bool {
        self.manifest.errors.is_empty()
    }
}

/// Everything computed for one representation.
pub struct Representation {
    pub id: String,
    pub points: PointSet,
    pub graph: WeightedGraph,
    pub curvature: CurvatureMap,
    pub flow: FlowState,
    pub rdms: Vec<Rdm>,
    pub gmm: GmmSelection,
    pub communities: CommunityAssignment,
    pub community_metrics: CommunityMetrics,
}

fn stage<T>(name: &str, input: &str, r: Result<T>) -> std::result::Result<T, StageError> {
    r.map_err(|e| StageError {
        stage: name.to_string(),
        input: input.to_string(),
        message: e.to_string(),
    })
}

fn base_distance_metric(ps: &PointSet, cfg: &RunConfig) -> Metric {
    match ps.kind() {
        PointSetKind::Similarity => Metric::FromSimilarity,
        PointSetKind::Embeddings => cfg.graph_metric,
    }
}

fn build_rep_graph(ps: &PointSet, cfg: &RunConfig, knn: &AdaptiveKnnParams) -> Result<WeightedGraph> {
    let d = to_distance(ps, base_distance_metric(ps, cfg))?;
    build_graph(ps.ids(), &d, knn)
}

/// Stable small label for seed derivation.
fn label_of(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

pub fn analyze_representation(id: &str, points: PointSet, cfg: &RunConfig) -> std::result::Result<Representation, StageError> {
    let graph = stage("graph", id, build_rep_graph(&points, cfg, &cfg.knn()))?;
    let curvature = stage("curvature", id, orc_all(&graph, cfg.alpha))?;
    let flow = stage("flow", id, run_flow(&graph, &cfg.flow()))?;

    let mut rdms = Vec::new();
    if points.kind() == PointSetKind::Embeddings {
        for &m in &cfg.metrics {
            rdms.push(stage("rdm", id, build_rdm(RdmSource::Points(&points), m))?);
        }
    }
    rdms.push(stage("rdm", id, build_rdm(RdmSource::Graph(&graph), Metric::ShortestPath))?);
    rdms.push(stage(
        "rdm",
        id,
        build_rdm(
            RdmSource::Flow {
                graph: &graph,
                state: &flow,
            },
            Metric::FlowMetric,
        ),
    )?);

    let gmm = stage(
        "gmm",
        id,
        select_gmm(&curvature.values(), cfg.gmm_max_components, derive_seed(cfg.seed, label_of(id))),
    )?;
    let communities = stage("communities", id, detect_communities(&graph, &flow, cfg.threshold))?;
    let metrics = stage("communities", id, community_metrics(&graph, &communities.labels))?;
    Ok(Representation {
        id: id.to_string(),
        points,
        graph,
        curvature,
        flow,
        rdms,
        gmm,
        communities,
        community_metrics: metrics,
    })
}

/// Result block of a pairwise comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub pair: (String, String),
    pub ws1: f64,
    pub kld: f64,
    pub heat: HeatDistance,
    /// Alignment per metric shared by both representations.
    pub rsa: BTreeMap<String, f64>,
    pub subsample: SubsampleStats,
    pub subsample_heat: SubsampleStats,
}

fn heat_between(a: &WeightedGraph, fa: Option<&[f64]>, b: &WeightedGraph, fb: Option<&[f64]>, cfg: &RunConfig) -> Result<HeatDistance> {
    let oa = HeatOperand { graph: a, flow_weights: fa };
    let ob = HeatOperand { graph: b, flow_weights: fb };
    heat_distance(&oa, &ob, cfg.channel(), &cfg.t_grid)
}

fn subset_graphs(
    a: &PointSet,
    b: &PointSet,
    subset: &[usize],
    cfg: &RunConfig,
) -> Result<(WeightedGraph, WeightedGraph)> {
    let knn = cfg.knn();
    Ok((
        build_rep_graph(&a.subset(subset)?, cfg, &knn)?,
        build_rep_graph(&b.subset(subset)?, cfg, &knn)?,
    ))
}

fn flow_weights_if_needed(g: &WeightedGraph, cfg: &RunConfig) -> Result<Option<Vec<f64>>> {
    if cfg.channel() == WeightChannel::Flow {
        Ok(Some(run_flow(g, &cfg.flow())?.weights))
    } else {
        Ok(None)
    }
}

pub fn compare_pair(a: &Representation, b: &Representation, cfg: &RunConfig) -> Result<PairReport> {
    if a.points.ids() != b.points.ids() {
        return Err(Error::NodeSetMismatch(format!("{} and {} cover different items", a.id, b.id)));
    }
    let ws1 = curvature_w1(&a.curvature, &b.curvature)?;
    let kld = curvature_kld(&a.curvature, &b.curvature, cfg.kld_bins)?;
    let heat = heat_between(
        &a.graph,
        Some(&a.flow.weights),
        &b.graph,
        Some(&b.flow.weights),
        cfg,
    )?;
    let mut rsa = BTreeMap::new();
    for ra in &a.rdms {
        if let Some(rb) = b.rdms.iter().find(|r| r.metric() == ra.metric()) {
            rsa.insert(ra.metric().to_string(), rsa_score(ra, rb)?.r);
        }
    }

    let n = a.points.len();
    let n_subset = cfg.subsample_size.min(n);
    let pair_seed = derive_seed(cfg.seed, label_of(&format!("{}\u{0}{}", a.id, b.id)));
    let subsample = subsample_protocol(n, n_subset, cfg.subsample_iterations, pair_seed, |s| {
        let (ga, gb) = subset_graphs(&a.points, &b.points, s, cfg)?;
        curvature_w1(&orc_all(&ga, cfg.alpha)?, &orc_all(&gb, cfg.alpha)?)
    })?;
    let subsample_heat = subsample_protocol(n, n_subset, cfg.subsample_iterations, pair_seed, |s| {
        let (ga, gb) = subset_graphs(&a.points, &b.points, s, cfg)?;
        let (fa, fb) = (flow_weights_if_needed(&ga, cfg)?, flow_weights_if_needed(&gb, cfg)?);
        Ok(heat_between(&ga, fa.as_deref(), &gb, fb.as_deref(), cfg)?.value)
    })?;
    Ok(PairReport {
        pair: (a.id.clone(), b.id.clone()),
        ws1,
        kld,
        heat,
        rsa,
        subsample,
        subsample_heat,
    })
}

struct Writer {
    root: PathBuf,
    header: String,
    config_hash: String,
    seed: u64,
    files: Vec<ManifestEntry>,
}

impl Writer {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.files.push(ManifestEntry {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let s = to_canonical_json(value)?;
        self.write(rel, s.as_bytes())
    }

    /// JSON document carrying the config hash and seed at top level.
    fn stamped<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let v = stamped(value, &self.config_hash, self.seed)?;
        self.json(rel, &v)
    }

    /// CSV with a leading provenance comment.
    fn csv(&mut self, rel: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut buf = format!("# {}\n", self.header).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header)?;
            for r in rows {
                w.write_record(&r)?;
            }
            w.flush()?;
        }
        self.write(rel, &buf)
    }

    fn square(&mut self, rel: &str, ids: &[String], values: &[f64]) -> Result<()> {
        let mut buf = Vec::new();
        write_square(&mut buf, ids, values, Some(&self.header))?;
        self.write(rel, &buf)
    }
}

fn fmt(v: f64) -> String {
    format!("{}", crate::report::round_significant(v))
}

fn rdm_file_tag(m: Metric) -> String {
    m.to_string().replace(':', "_p")
}

fn write_representation(w: &mut Writer, rep: &Representation, cfg: &RunConfig, prov: &Provenance) -> Result<()> {
    let dir = &rep.id;
    w.stamped(&format!("{dir}/graph.json"), &GraphDocument::from(&rep.graph))?;
    w.stamped(&format!("{dir}/curvature.json"), &rep.curvature)?;
    w.stamped(
        &format!("{dir}/flow.json"),
        &json!({
            "iteration": rep.flow.iteration,
            "weights": rep.flow.weights,
            "curvatures": rep.flow.curvatures,
            "history": rep.flow.history,
            "final_weights": rep.graph.edges().iter().zip(&rep.flow.weights)
                .map(|(e, w)| json!({"u": e.u, "v": e.v, "weight": w})).collect::<Vec<_>>(),
            "communities": rep.communities.labels,
            "cut_threshold": rep.communities.cut_threshold,
        }),
    )?;
    for rdm in &rep.rdms {
        w.square(
            &format!("{dir}/rdm_{}.csv", rdm_file_tag(rdm.metric())),
            rdm.ids(),
            &rdm.matrix().values().iter().map(|&v| crate::report::round_significant(v)).collect::<Vec<_>>(),
        )?;
    }

    // curvature histogram with the selected mixture's density per bin
    let kappas = rep.curvature.values();
    let lo = kappas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = kappas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = cfg.kld_bins;
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &k in &kappas {
        counts[(((k - lo) / width) as usize).min(bins - 1)] += 1;
    }
    let fit = &rep.gmm.best;
    let density = |x: f64| -> f64 {
        (0..fit.n_components)
            .map(|c| {
                let var = fit.variances[c];
                fit.weights[c] * (-(x - fit.means[c]).powi(2) / (2.0 * var)).exp()
                    / (2.0 * std::f64::consts::PI * var).sqrt()
            })
            .sum()
    };
    w.csv(
        &format!("{dir}/curvature_hist.csv"),
        &["bin_lo", "bin_hi", "count", "density", "gmm_density"],
        counts.iter().enumerate().map(|(b, &c)| {
            let (a, z) = (lo + b as f64 * width, lo + (b + 1) as f64 * width);
            vec![
                fmt(a),
                fmt(z),
                c.to_string(),
                fmt(c as f64 / (kappas.len() as f64 * width)),
                fmt(density(0.5 * (a + z))),
            ]
        }),
    )?;

    let mut report = AnalysisReport::new(prov.clone());
    report.insert(
        "graph",
        json!({
            "n_nodes": rep.graph.n_nodes(),
            "n_edges": rep.graph.n_edges(),
            "provenance": rep.graph.provenance(),
        }),
    )?;
    report.insert(
        "curvature",
        json!({
            "alpha": rep.curvature.alpha,
            "backend": rep.curvature.backend,
            "summary": crate::flow::Summary::of(&kappas),
        }),
    )?;
    report.insert(
        "gmm",
        json!({
            "k": fit.n_components,
            "bic": fit.bic,
            "weights": fit.weights,
            "means": fit.means,
            "variances": fit.variances,
            "converged": fit.converged,
            "candidates": rep.gmm.candidates.iter().map(|c| json!({"k": c.n_components, "bic": c.bic})).collect::<Vec<_>>(),
        }),
    )?;
    report.insert(
        "flow",
        json!({
            "iterations": rep.flow.iteration,
            "final": rep.flow.history.last(),
        }),
    )?;
    report.insert(
        "communities",
        json!({
            "n_communities": rep.communities.n_communities,
            "cut_threshold": rep.communities.cut_threshold,
            "strategy": cfg.threshold.to_string(),
            "labels": rep.communities.labels,
            "metrics": rep.community_metrics,
        }),
    )?;
    w.json(&format!("{dir}/report.json"), &report)
}

fn write_pair(w: &mut Writer, a: &Representation, b: &Representation, pair: &PairReport, prov: &Provenance) -> Result<()> {
    let stem = format!("pairs/{}__{}", a.id, b.id);
    let mut report = AnalysisReport::new(prov.clone());
    report.insert("comparison", pair)?;
    w.json(&format!("{stem}.json"), &report)?;

    let mut rows = Vec::new();
    for ra in &a.rdms {
        if let Some(rb) = b.rdms.iter().find(|r| r.metric() == ra.metric()) {
            let tag = format!("{}~{}", ra.metric(), rb.metric());
            for (id, r) in ra.ids().iter().zip(profile_analysis(ra, rb)?) {
                rows.push(vec![id.clone(), tag.clone(), r.map_or_else(|| "NaN".to_string(), fmt)]);
            }
        }
    }
    w.csv(&format!("{stem}_profile.csv"), &["id", "metric_pair", "r"], rows)
}

/// Runs the whole analysis and writes results under `out_dir`.
///
/// Stage failures are collected in the manifest; analysis of independent
/// representations continues, dependent pairwise stages are skipped.
pub fn run_pipeline(cfg: &RunConfig, out_dir: &Path) -> Result<PipelineOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let prov = cfg.provenance()?;
    let mut w = Writer {
        root: out_dir.to_path_buf(),
        header: format!("config_hash={} seed={}", prov.config_hash, prov.seed),
        config_hash: prov.config_hash.clone(),
        seed: prov.seed,
        files: Vec::new(),
    };
    let mut errors = Vec::new();

    let mut reps: Vec<Representation> = Vec::new();
    for input in &cfg.inputs {
        info!("analyzing {}", input.id);
        let loaded = stage("ingest", &input.id, load_pointset(&input.path, input.kind));
        match loaded.and_then(|ps| analyze_representation(&input.id, ps, cfg)) {
            Ok(rep) => {
                if let Err(e) = write_representation(&mut w, &rep, cfg, &prov) {
                    errors.push(StageError {
                        stage: "write".into(),
                        input: input.id.clone(),
                        message: e.to_string(),
                    });
                }
                reps.push(rep);
            }
            Err(e) => {
                warn!("{}: {} failed: {}", e.input, e.stage, e.message);
                errors.push(e);
            }
        }
    }

    // alignment across every RDM of every representation over the same items
    if let Some(first) = reps.first() {
        let aligned: Vec<&Representation> = reps.iter().filter(|r| r.points.ids() == first.points.ids()).collect();
        let rdms: Vec<Rdm> = aligned.iter().flat_map(|r| r.rdms.iter().cloned()).collect();
        let labels: Vec<String> = aligned
            .iter()
            .flat_map(|r| r.rdms.iter().map(move |m| format!("{}:{}", r.id, m.metric())))
            .collect();
        match alignment_matrix(&rdms) {
            Ok(m) => {
                let flat: Vec<f64> = m.into_iter().flatten().collect();
                if let Err(e) = w.square("alignment_matrix.csv", &labels, &flat) {
                    errors.push(StageError {
                        stage: "write".into(),
                        input: "*".into(),
                        message: e.to_string(),
                    });
                }
            }
            Err(e) => errors.push(StageError {
                stage: "alignment".into(),
                input: "*".into(),
                message: e.to_string(),
            }),
        }
    }

    let mut sweep_rows: Vec<Vec<String>> = Vec::new();
    for i in 0..reps.len() {
        for j in (i + 1)..reps.len() {
            let (a, b) = (&reps[i], &reps[j]);
            let pair_id = format!("{}__{}", a.id, b.id);
            info!("comparing {pair_id}");
            match compare_pair(a, b, cfg).and_then(|p| write_pair(&mut w, a, b, &p, &prov)) {
                Ok(()) => {}
                Err(e) => errors.push(StageError {
                    stage: "compare".into(),
                    input: pair_id.clone(),
                    message: e.to_string(),
                }),
            }
            for &(k_min, k_max) in &cfg.sweep {
                match sweep_pair(a, b, cfg, k_min, k_max) {
                    Ok((ws1, heat)) => sweep_rows.push(vec![
                        pair_id.clone(),
                        k_min.to_string(),
                        k_max.to_string(),
                        fmt(ws1),
                        fmt(heat),
                    ]),
                    Err(e) => errors.push(StageError {
                        stage: format!("sweep({k_min},{k_max})"),
                        input: pair_id.clone(),
                        message: e.to_string(),
                    }),
                }
            }
        }
    }
    if !cfg.sweep.is_empty() {
        w.csv("sweep.csv", &["pair", "k_min", "k_max", "ws1", "heat"], sweep_rows)?;
    }

    w.files.sort_by(|x, y| x.path.cmp(&y.path));
    let manifest = Manifest {
        config_hash: prov.config_hash.clone(),
        seed: prov.seed,
        tool_version: prov.tool_version.clone(),
        files: w.files,
        errors,
    };
    let manifest_path = out_dir.join("manifest.json");
    save_json(&manifest, &manifest_path)?;
    Ok(PipelineOutcome {
        manifest,
        manifest_path,
    })
}

/// W1 and heat distance of a pair rebuilt at another `(k_min, k_max)`.
fn sweep_pair(a: &Representation, b: &Representation, cfg: &RunConfig, k_min: usize, k_max: usize) -> Result<(f64, f64)> {
    let knn = AdaptiveKnnParams {
        k_min,
        k_max,
        kernel: cfg.density_kernel,
    };
    let ga = build_rep_graph(&a.points, cfg, &knn)?;
    let gb = build_rep_graph(&b.points, cfg, &knn)?;
    let ws1 = curvature_w1(&orc_all(&ga, cfg.alpha)?, &orc_all(&gb, cfg.alpha)?)?;
    let (fa, fb) = (flow_weights_if_needed(&ga, cfg)?, flow_weights_if_needed(&gb, cfg)?);
    let heat = heat_between(&ga, fa.as_deref(), &gb, fb.as_deref(), cfg)?.value;
    Ok((ws1, heat))
}
