//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data
//! error.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use storyseg::agreement::{brute_force_agreement, max_agreement, AgreementResult};
use storyseg::embedding::{feature_importance, train, Checkpoint, EmbeddingModel, TrainConfig, TrainingVideo};
use storyseg::features::{
    assemble_video_features, check_corpus_layout, spectral_cluster_terms, ConceptGroups, SemanticConfig,
    TranscriptTerm,
};
use storyseg::pipeline::{
    generate_synthetic_corpus, read_embeddings, read_json, read_manifest, read_pairs_csv, run_evaluation,
    write_embeddings, write_json, write_loss_csv, write_manifest, write_pairs_csv, write_text, write_trace_csv,
    CorpusManifest, EvalConfig, EvalMode, EvalVideo, ManifestVideo, PairRecord, SynthConfig,
};
use storyseg::retrieval::{
    aesthetic_score, match_query, rank_stories, swapped_pairs, term_presence, thumbnail_features, train_rank_model,
    HypercolumnConfig, PreferencePair, RankConfig, RankModel, ScoredKeyframe, ShotEvidence, ThumbnailActivations,
    DEFAULT_ALPHA,
};
use storyseg::segment::{auto_segment, segment_video, SweepPoint};
use storyseg::{AnnotationSet, Segmentation, Timeline, Video, VideoFeatures};

const SCHEMAS: &str = "\
File formats (JSON unless noted):
  video          {fps, shots: [{start_frame, end_frame (exclusive), word_count, visual?, audio?, keyframes?}]}
  segmentation   {n_shots, boundaries: [first shot of each story, starting at 0]}
  terms          [{unigram, t_u (frame), svm_probs?: [probability per shot]}]
  embeddings     text: one term per line followed by whitespace-separated floats
  groups         {k, assignment: {term: group}}
  features       {block_map: {blocks: [{block, start, end}]}, shots: [[f64]]}
  manifest       {videos: [{id, video?, features?, terms?, thumbnails?, annotations: [path]}], split?: {train, test}}
                 paths relative to the manifest's directory
  model          {version, model: {layer_dims, weights, biases, final_relu}, config?}
  thumbnails     [{id, shot, groups: [[{shape: [h, w, c], data}]] (5 groups)}]
  pairs          CSV: story_id,better_keyframe,worse_keyframe
  loss           CSV: iteration,loss
  trace          CSV: C,m,objective
Exit codes: 0 success, 1 usage error, 2 data error.";

#[derive(Parser)]
#[command(name = "storyseg", version, about = "Story detection in edited videos", after_help = SCHEMAS)]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with ground-truth stories.
    Synth(SynthArgs),
    /// Compute the feature vectors of one video.
    AssembleFeatures(AssembleArgs),
    /// Train the shot embedding on a corpus.
    TrainEmbedding(TrainArgs),
    /// Split one video into stories.
    Segment(SegmentArgs),
    /// Score segmentations against annotations.
    Evaluate(EvaluateArgs),
    /// Find the segmentation that best agrees with several annotations.
    Agree(AgreeArgs),
    /// Learn an aesthetic ranking of keyframes from preference pairs.
    TrainRank(TrainRankArgs),
    /// Score keyframes with a ranking model.
    RankThumbnails(RankThumbnailsArgs),
    /// Rank the stories of a corpus for a text query.
    Retrieve(RetrieveArgs),
    /// Relative influence of each feature family on an embedding.
    FeatureImportance(ImportanceArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Generator configuration (JSON); missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    videos: Option<usize>,
    /// Also write keyframe activations and preference pairs.
    #[arg(long)]
    thumbnails: bool,
}

#[derive(Args)]
struct AssembleArgs {
    #[arg(long)]
    video: PathBuf,
    #[arg(long)]
    terms: PathBuf,
    /// Precomputed concept groups.
    #[arg(long, conflicts_with = "embeddings")]
    groups: Option<PathBuf>,
    /// Word vectors to cluster into concept groups.
    #[arg(long, required_unless_present = "groups")]
    embeddings: Option<PathBuf>,
    /// Number of concept groups when clustering.
    #[arg(long, default_value_t = 50)]
    k: usize,
    /// Where to write the concept groups computed from --embeddings.
    #[arg(long)]
    groups_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainOverrides {
    /// Training configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Retain probability of hidden units.
    #[arg(long)]
    dropout_keep: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    train: TrainOverrides,
    #[arg(long)]
    out: PathBuf,
    /// Loss per iteration (CSV).
    #[arg(long)]
    loss: Option<PathBuf>,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    features: PathBuf,
    /// Embedding model; the raw features are segmented without one.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Fixed penalty weight; otherwise the weight is swept.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 0.001)]
    step: f64,
    #[arg(long)]
    out: PathBuf,
    /// Penalty sweep (CSV).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Loo,
    Split,
    Raw,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "loo")]
    mode: ModeArg,
    /// Model used for split mode instead of training.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    train: TrainOverrides,
    #[arg(long, default_value_t = 0.001)]
    step: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct AgreeArgs {
    #[arg(long, num_args = 1.., required = true)]
    annotations: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Video whose shot lengths weight the overlaps; shots count equally
    /// without it.
    #[arg(long)]
    video: Option<PathBuf>,
    /// Also run exhaustive search and compare.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = 14)]
    max_n: usize,
    /// Bound the story count of the exhaustive search.
    #[arg(long)]
    max_stories: Option<usize>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct HypercolumnArgs {
    /// Hypercolumn configuration (JSON).
    #[arg(long)]
    hypercolumns: Option<PathBuf>,
}

#[derive(Args)]
struct TrainRankArgs {
    #[arg(long, num_args = 1.., required = true)]
    thumbnails: Vec<PathBuf>,
    #[arg(long)]
    pairs: PathBuf,
    #[command(flatten)]
    hc: HypercolumnArgs,
    #[arg(long, default_value_t = 100.0)]
    c_r: f64,
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RankThumbnailsArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    thumbnails: Vec<PathBuf>,
    /// Held-out preferences to count swapped pairs on.
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RetrieveArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    query: String,
    /// Embedding model used to segment; raw features without one.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Keyframe ranking model; keyframes are ignored without one.
    #[arg(long)]
    rank_model: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 0.001)]
    step: f64,
    #[arg(long)]
    top: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ImportanceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    features: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// Arguments that parse but do not make sense together.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Ranking model together with the descriptor settings it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RankCheckpoint {
    model: RankModel,
    hypercolumns: HypercolumnConfig,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Synth(a) => synth(a, seed),
        Command::AssembleFeatures(a) => assemble(a, seed),
        Command::TrainEmbedding(a) => train_embedding(a, seed),
        Command::Segment(a) => segment(a),
        Command::Evaluate(a) => evaluate(a, seed),
        Command::Agree(a) => agree(a),
        Command::TrainRank(a) => train_rank(a),
        Command::RankThumbnails(a) => rank_thumbnails(a),
        Command::Retrieve(a) => retrieve(a),
        Command::FeatureImportance(a) => importance(a),
    }
}

fn synth(a: SynthArgs, seed: u64) -> anyhow::Result<()> {
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SynthConfig::default(),
    };
    cfg.seed = seed;
    if let Some(n) = a.videos {
        cfg.n_videos = n;
    }
    cfg.thumbnails |= a.thumbnails;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let corpus = generate_synthetic_corpus(&cfg)?;
    let out = &a.out;
    let mut entries = Vec::with_capacity(corpus.videos.len());
    let mut pairs = Vec::new();
    for v in &corpus.videos {
        let rel = |kind: &str| PathBuf::from("videos").join(format!("{}.{kind}.json", v.id));
        let entry = ManifestVideo {
            id: v.id.clone(),
            video: Some(rel("video")),
            features: Some(rel("features")),
            terms: Some(rel("terms")),
            thumbnails: cfg.thumbnails.then(|| rel("thumbnails")),
            annotations: vec![rel("truth")],
        };
        write_json(&out.join(rel("video")), &v.video)?;
        write_json(&out.join(rel("features")), &v.features)?;
        write_json(&out.join(rel("terms")), &v.terms)?;
        write_json(&out.join(rel("truth")), &v.truth)?;
        if cfg.thumbnails {
            write_json(&out.join(rel("thumbnails")), &v.thumbnails)?;
        }
        for (story, better, worse) in &v.preferences {
            pairs.push(PairRecord {
                story_id: format!("{}:{story}", v.id),
                better_keyframe: better.clone(),
                worse_keyframe: worse.clone(),
            });
        }
        entries.push(entry);
    }
    write_embeddings(&out.join("embeddings.txt"), &corpus.embeddings)?;
    write_json(&out.join("groups.json"), &corpus.groups)?;
    write_json(&out.join("synth_config.json"), &cfg)?;
    if cfg.thumbnails {
        write_pairs_csv(&out.join("pairs.csv"), &pairs)?;
        write_json(&out.join("hypercolumns.json"), &corpus.hypercolumns)?;
    }
    let manifest = CorpusManifest {
        videos: entries,
        split: None,
        base: PathBuf::new(),
    };
    write_manifest(&out.join("manifest.json"), &manifest)?;
    println!("wrote {} videos to {}", corpus.videos.len(), out.display());
    Ok(())
}

fn assemble(a: AssembleArgs, seed: u64) -> anyhow::Result<()> {
    let video: Video = read_json(&a.video)?;
    let terms: Vec<TranscriptTerm> = read_json(&a.terms)?;
    let groups: ConceptGroups = match (&a.groups, &a.embeddings) {
        (Some(g), _) => read_json(g)?,
        (None, Some(e)) => {
            let emb = read_embeddings(e)?;
            let groups = spectral_cluster_terms(&emb, a.k, seed).with_context(|| e.display().to_string())?;
            if let Some(p) = &a.groups_out {
                write_json(p, &groups)?;
            }
            groups
        }
        (None, None) => return Err(usage("one of --groups or --embeddings is required")),
    };
    let cfg = SemanticConfig {
        k: groups.k,
        ..SemanticConfig::for_fps(video.fps)
    };
    let features = assemble_video_features(&video, &terms, &groups, &cfg)
        .with_context(|| format!("{} with {}", a.video.display(), a.terms.display()))?;
    write_json(&a.out, &features)?;
    println!("{} shots, {} features per shot", features.n_shots(), features.dim());
    Ok(())
}

fn train_config(o: &TrainOverrides, seed: u64) -> anyhow::Result<TrainConfig> {
    let mut cfg: TrainConfig = match &o.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    cfg.seed = seed;
    if let Some(n) = o.iterations {
        cfg.iterations = n;
    }
    if let Some(b) = o.batch_size {
        cfg.batch_size = b;
    }
    if let Some(k) = o.dropout_keep {
        cfg.dropout_keep = k;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn load_model(path: &Path) -> anyhow::Result<EmbeddingModel> {
    let ck: Checkpoint = read_json(path)?;
    ck.validate().with_context(|| path.display().to_string())?;
    Ok(ck.model)
}

fn load_features(path: &Path) -> anyhow::Result<VideoFeatures> {
    let f: VideoFeatures = read_json(path)?;
    f.validate().with_context(|| path.display().to_string())?;
    Ok(f)
}

/// Features, frame layout and annotations of a manifest video.
fn load_eval_video(m: &CorpusManifest, v: &ManifestVideo) -> anyhow::Result<EvalVideo> {
    let fpath = v
        .features
        .as_ref()
        .ok_or_else(|| anyhow!("video '{}' has no features file", v.id))?;
    let features = load_features(&m.resolve(fpath))?;
    let timeline = match &v.video {
        Some(p) => {
            let path = m.resolve(p);
            let video: Video = read_json(&path)?;
            video.validate().with_context(|| path.display().to_string())?;
            video.timeline()
        }
        None => Timeline::unit(features.n_shots()),
    };
    if v.annotations.is_empty() {
        return Err(anyhow!("video '{}' has no annotations", v.id));
    }
    let annotations = v
        .annotations
        .iter()
        .map(|p| read_json::<Segmentation>(&m.resolve(p)))
        .collect::<Result<Vec<_>, _>>()?;
    let annotations = AnnotationSet::new(annotations).with_context(|| format!("annotations of '{}'", v.id))?;
    Ok(EvalVideo {
        id: v.id.clone(),
        features: features.shots,
        timeline,
        annotations,
    })
}

fn train_embedding(a: TrainArgs, seed: u64) -> anyhow::Result<()> {
    let cfg = train_config(&a.train, seed)?;
    let m = read_manifest(&a.manifest)?;
    let ids: Vec<&str> = match &m.split {
        Some(s) => s.train.iter().map(String::as_str).collect(),
        None => m.videos.iter().map(|v| v.id.as_str()).collect(),
    };
    let videos = ids
        .iter()
        .map(|id| load_eval_video(&m, m.video(id).expect("checked manifest")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let corpus: Vec<TrainingVideo<'_>> = videos
        .iter()
        .map(|v| TrainingVideo {
            features: &v.features,
            truth: &v.annotations.annotations()[0],
        })
        .collect();
    let outcome = train(&corpus, &cfg)?;
    write_json(&a.out, &Checkpoint::new(outcome.model, Some(cfg)))?;
    if let Some(p) = &a.loss {
        write_loss_csv(p, &outcome.loss_history)?;
    }
    if let Some(last) = outcome.loss_history.last() {
        println!("final loss {last:.6}");
    }
    Ok(())
}

fn segment(a: SegmentArgs) -> anyhow::Result<()> {
    let features = load_features(&a.features)?;
    let embedded = match &a.model {
        Some(p) => load_model(p)?.embed_all(&features.shots)?,
        None => features.shots,
    };
    let (seg, trace) = match a.c {
        Some(c) => {
            let r = segment_video(&embedded, c).map_err(|e| usage(e.to_string()))?;
            let point = SweepPoint {
                c,
                change_points: r.change_points,
                objective: r.objective,
            };
            (r.segmentation, vec![point])
        }
        None => {
            let r = auto_segment(&embedded, a.step).map_err(|e| usage(e.to_string()))?;
            if r.capped {
                eprintln!("warning: penalty sweep hit its step cap at C = {}", r.c);
            }
            println!("C = {}", r.c);
            (r.segmentation, r.trace)
        }
    };
    write_json(&a.out, &seg)?;
    if let Some(p) = &a.trace {
        write_trace_csv(p, &trace)?;
    }
    println!("{} stories over {} shots", seg.n_stories(), seg.n_shots());
    Ok(())
}

fn evaluate(a: EvaluateArgs, seed: u64) -> anyhow::Result<()> {
    let m = read_manifest(&a.manifest)?;
    let cfg = EvalConfig {
        train: train_config(&a.train, seed)?,
        step: a.step,
    };
    let (mode, ids): (EvalMode, Vec<&str>) = match a.mode {
        ModeArg::Loo => (EvalMode::LeaveOneOut, m.videos.iter().map(|v| v.id.as_str()).collect()),
        ModeArg::Raw => (EvalMode::Raw, m.videos.iter().map(|v| v.id.as_str()).collect()),
        ModeArg::Split => {
            let s = m
                .split
                .as_ref()
                .ok_or_else(|| usage("split mode needs a manifest with a split"))?;
            let ids = s.train.iter().chain(&s.test).map(String::as_str).collect();
            (
                EvalMode::Split {
                    train: s.train.clone(),
                    test: s.test.clone(),
                },
                ids,
            )
        }
    };
    let videos = ids
        .iter()
        .map(|id| load_eval_video(&m, m.video(id).expect("checked manifest")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let model = a.model.as_deref().map(load_model).transpose()?;
    let report = run_evaluation(&videos, &mode, &cfg, model.as_ref())?;
    write_json(&a.out, &report)?;
    let table = report.table();
    if let Some(p) = &a.table {
        write_text(p, &table)?;
    }
    print!("{table}");
    Ok(())
}

#[derive(Serialize)]
struct AgreeReport<'a> {
    consensus: &'a AgreementResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<&'a AgreementResult>,
}

fn agree(a: AgreeArgs) -> anyhow::Result<()> {
    let anns = a
        .annotations
        .iter()
        .map(|p| read_json::<Segmentation>(p))
        .collect::<Result<Vec<_>, _>>()?;
    let set = AnnotationSet::new(anns)?;
    let timeline = match &a.video {
        Some(p) => {
            let v: Video = read_json(p)?;
            v.validate().with_context(|| p.display().to_string())?;
            v.timeline()
        }
        None => Timeline::unit(set.n_shots()),
    };
    let result = max_agreement(&set, &timeline)?;
    write_json(&a.out, &result.segmentation)?;
    println!("mean IoU {:.6}, {} stories", result.mean_iou, result.segmentation.n_stories());
    let oracle = if a.oracle {
        let o = brute_force_agreement(&set, &timeline, a.max_n, a.max_stories)?;
        let same = o.segmentation == result.segmentation;
        println!(
            "oracle mean IoU {:.6}, {}",
            o.mean_iou,
            if same { "same segmentation" } else { "different segmentation" }
        );
        Some(o)
    } else {
        None
    };
    if let Some(p) = &a.report {
        write_json(
            p,
            &AgreeReport {
                consensus: &result,
                oracle: oracle.as_ref(),
            },
        )?;
    }
    Ok(())
}

fn read_thumbnails(paths: &[PathBuf]) -> anyhow::Result<BTreeMap<String, ThumbnailActivations>> {
    let mut out = BTreeMap::new();
    for p in paths {
        let list: Vec<ThumbnailActivations> = read_json(p)?;
        for t in list {
            let id = t.id.clone();
            if out.insert(id.clone(), t).is_some() {
                return Err(anyhow!("{}: duplicate keyframe id '{id}'", p.display()));
            }
        }
    }
    Ok(out)
}

fn descriptors(
    thumbs: &BTreeMap<String, ThumbnailActivations>,
    cfg: &HypercolumnConfig,
) -> anyhow::Result<BTreeMap<String, Vec<f64>>> {
    thumbs
        .iter()
        .map(|(id, t)| Ok((id.clone(), thumbnail_features(t, cfg).with_context(|| format!("keyframe '{id}'"))?.tau)))
        .collect()
}

fn preference_pairs(path: &Path, tau: &BTreeMap<String, Vec<f64>>) -> anyhow::Result<Vec<PreferencePair>> {
    read_pairs_csv(path)?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let get = |id: &str| {
                tau.get(id)
                    .cloned()
                    .ok_or_else(|| anyhow!("{}: row {}: unknown keyframe '{id}'", path.display(), i + 1))
            };
            Ok(PreferencePair {
                better: get(&r.better_keyframe)?,
                worse: get(&r.worse_keyframe)?,
            })
        })
        .collect()
}

fn train_rank(a: TrainRankArgs) -> anyhow::Result<()> {
    let hc: HypercolumnConfig = match &a.hc.hypercolumns {
        Some(p) => read_json(p)?,
        None => HypercolumnConfig::default(),
    };
    let tau = descriptors(&read_thumbnails(&a.thumbnails)?, &hc)?;
    let pairs = preference_pairs(&a.pairs, &tau)?;
    let cfg = RankConfig {
        c_r: a.c_r,
        iterations: a.iterations,
    };
    let model = train_rank_model(&pairs, &cfg).map_err(|e| usage(e.to_string()))?;
    println!("training swapped pairs {:.2}%", swapped_pairs(&model, &pairs)?);
    write_json(&a.out, &RankCheckpoint { model, hypercolumns: hc })?;
    Ok(())
}

#[derive(Serialize)]
struct KeyframeScore {
    id: String,
    shot: usize,
    score: f64,
}

#[derive(Serialize)]
struct ThumbnailReport {
    scores: Vec<KeyframeScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    swapped_pairs: Option<f64>,
}

fn rank_thumbnails(a: RankThumbnailsArgs) -> anyhow::Result<()> {
    let ck: RankCheckpoint = read_json(&a.model)?;
    let thumbs = read_thumbnails(&a.thumbnails)?;
    let tau = descriptors(&thumbs, &ck.hypercolumns)?;
    let mut scores = tau
        .iter()
        .map(|(id, t)| {
            Ok(KeyframeScore {
                id: id.clone(),
                shot: thumbs[id].shot,
                score: aesthetic_score(&ck.model, t)?,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    scores.sort_by(|x, y| y.score.total_cmp(&x.score).then_with(|| x.id.cmp(&y.id)));
    let swapped = match &a.pairs {
        Some(p) => {
            let s = swapped_pairs(&ck.model, &preference_pairs(p, &tau)?)?;
            println!("swapped pairs {s:.2}%");
            Some(s)
        }
        None => None,
    };
    write_json(
        &a.out,
        &ThumbnailReport {
            scores,
            swapped_pairs: swapped,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct RetrievalHit {
    video: String,
    first_shot: usize,
    last_shot: usize,
    start_frame: u64,
    end_frame: u64,
    keyframe: Option<String>,
    score: f64,
}

#[derive(Serialize)]
struct RetrievalReport {
    query: String,
    resolved_term: String,
    similarity: f64,
    results: Vec<RetrievalHit>,
}

fn retrieve(a: RetrieveArgs) -> anyhow::Result<()> {
    let m = read_manifest(&a.manifest)?;
    let embeddings = read_embeddings(&a.embeddings)?;
    let model = a.model.as_deref().map(load_model).transpose()?;
    let rank: Option<RankCheckpoint> = a.rank_model.as_deref().map(read_json).transpose()?;

    struct Loaded {
        id: String,
        video: Video,
        terms: Vec<TranscriptTerm>,
        features: VideoFeatures,
        thumbs: Vec<ThumbnailActivations>,
    }
    let mut loaded = Vec::with_capacity(m.videos.len());
    for v in &m.videos {
        let need = |p: &Option<PathBuf>, what: &str| {
            p.as_ref()
                .map(|p| m.resolve(p))
                .ok_or_else(|| anyhow!("video '{}' has no {what} file", v.id))
        };
        let video: Video = read_json(&need(&v.video, "video")?)?;
        let terms: Vec<TranscriptTerm> = read_json(&need(&v.terms, "terms")?)?;
        let features = load_features(&need(&v.features, "features")?)?;
        let thumbs = match (&v.thumbnails, &rank) {
            (Some(p), Some(_)) => read_json(&m.resolve(p))?,
            _ => Vec::new(),
        };
        loaded.push(Loaded {
            id: v.id.clone(),
            video,
            terms,
            features,
            thumbs,
        });
    }
    let vocabulary: Vec<String> = loaded
        .iter()
        .flat_map(|l| l.terms.iter().map(|t| t.unigram.clone()))
        .collect();
    let query = match_query(&a.query, &embeddings, &vocabulary).map_err(|e| usage(e.to_string()))?;

    let mut hits = Vec::new();
    for l in &loaded {
        l.video.validate().with_context(|| format!("video '{}'", l.id))?;
        let embedded = match &model {
            Some(mdl) => mdl.embed_all(&l.features.shots)?,
            None => l.features.shots.clone(),
        };
        let seg = auto_segment(&embedded, a.step)?.segmentation;
        if seg.n_shots() != l.video.n_shots() {
            return Err(anyhow!(
                "video '{}': {} feature rows for {} shots",
                l.id,
                seg.n_shots(),
                l.video.n_shots()
            ));
        }
        let sem = SemanticConfig::for_fps(l.video.fps);
        let mut evidence: Vec<ShotEvidence> = l
            .video
            .shots
            .iter()
            .map(|s| ShotEvidence {
                p: term_presence(s, &l.terms, &query.resolved_term, &sem).p,
                keyframes: Vec::new(),
            })
            .collect();
        if let Some(ck) = &rank {
            for t in &l.thumbs {
                let tau = thumbnail_features(t, &ck.hypercolumns).with_context(|| format!("keyframe '{}'", t.id))?.tau;
                let ev = evidence
                    .get_mut(t.shot)
                    .ok_or_else(|| anyhow!("keyframe '{}' names shot {} of {}", t.id, t.shot, l.video.n_shots()))?;
                ev.keyframes.push(ScoredKeyframe {
                    id: t.id.clone(),
                    score: aesthetic_score(&ck.model, &tau)?,
                });
            }
        }
        let timeline = l.video.timeline();
        for r in rank_stories(&seg, &evidence, a.alpha).map_err(|e| usage(e.to_string()))? {
            let span = timeline.story_span(r.story);
            hits.push(RetrievalHit {
                video: l.id.clone(),
                first_shot: r.story.first_shot,
                last_shot: r.story.last_shot,
                start_frame: span.start,
                end_frame: span.end,
                keyframe: r.best_keyframe,
                score: r.score,
            });
        }
    }
    hits.sort_by(|x, y| {
        y.score
            .total_cmp(&x.score)
            .then_with(|| x.video.cmp(&y.video))
            .then(x.first_shot.cmp(&y.first_shot))
    });
    if let Some(n) = a.top {
        hits.truncate(n);
    }
    for h in hits.iter().take(10) {
        println!(
            "{:.4}  {}  shots {}-{}  {}",
            h.score,
            h.video,
            h.first_shot,
            h.last_shot,
            h.keyframe.as_deref().unwrap_or("-")
        );
    }
    write_json(
        &a.out,
        &RetrievalReport {
            query: query.text,
            resolved_term: query.resolved_term,
            similarity: query.similarity,
            results: hits,
        },
    )?;
    Ok(())
}

fn importance(a: ImportanceArgs) -> anyhow::Result<()> {
    let model = load_model(&a.model)?;
    let files = a
        .features
        .iter()
        .map(|p| load_features(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    check_corpus_layout(&files)?;
    let samples: Vec<Vec<f64>> = files.iter().flat_map(|f| f.shots.iter().cloned()).collect();
    let result = feature_importance(&model, &samples, &files[0].block_map)?;
    for b in &result {
        println!("{:<18} {:.4}", b.block.name(), b.importance);
    }
    write_json(&a.out, &result)?;
    Ok(())
}
