//! The `narrarc` command-line tool.
//!
//! Exit codes: 0 on success, 1 for usage errors and unusable input sets,
//! 2 when a named resource (lexicon, input file, model) is missing.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arcshape::{self, classify_arc, ArcLabel, NormalizedArc, ShapeConfig, MIN_CLASSIFY_LEN};
use crate::cluster::{self, cluster_means, cut, distance_matrix, ward_linkage};
use crate::corpus::{self, CorpusError, WordList};
use crate::io::{self, ArcMeta, FormatError};
use crate::lexicon::{self, ColumnMap, Dimension, LexiconError};
use crate::plot::{PlotError, PlotSpec};
use crate::sentiment::{self, SentimentArc, DEFAULT_CONTEXT};
use crate::structure::{self, StructureError, DEFAULT_CATEGORIES};

pub const CONFIG_ENV: &str = "NARRARC_CONFIG";
pub const DEFAULT_WINDOW: usize = 500;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SPLIT: f64 = 0.8;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    pub fn missing(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<LexiconError> for CliError {
    fn from(e: LexiconError) -> Self {
        match e {
            LexiconError::NotFound(_) => CliError::missing(e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::NotFound(_) => CliError::missing(e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::NotFound(_) => CliError::missing(e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<StructureError> for CliError {
    fn from(e: StructureError) -> Self {
        match e {
            StructureError::NotFound(_) => CliError::missing(e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<PlotError> for CliError {
    fn from(e: PlotError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<cluster::ClusterError> for CliError {
    fn from(e: cluster::ClusterError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<arcshape::ShapeError> for CliError {
    fn from(e: arcshape::ShapeError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<sentiment::SentimentError> for CliError {
    fn from(e: sentiment::SentimentError) -> Self {
        CliError::usage(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Contents of a TOML config file. Every key is optional; unset keys fall
/// back to the defaults of the module that consumes them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub lexicon_path: Option<PathBuf>,
    pub lexicon_columns: Option<ColumnMap>,
    pub dimension: Option<Dimension>,
    pub window_size: Option<usize>,
    pub context: Option<usize>,
    pub stop_list_path: Option<PathBuf>,
    pub band_delta: Option<f64>,
    pub smooth_w: Option<usize>,
    pub lowpass_m: Option<usize>,
    pub resample_len: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub manifest_path: Option<PathBuf>,
    pub workers: Option<usize>,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub lexicon_path: Option<PathBuf>,
    pub lexicon_columns: ColumnMap,
    pub dimension: Dimension,
    pub window_size: usize,
    pub context: usize,
    pub stop_list_path: Option<PathBuf>,
    pub band_delta: f64,
    pub smooth_w: usize,
    pub lowpass_m: usize,
    pub resample_len: usize,
    pub output_dir: PathBuf,
    pub manifest_path: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let shape = ShapeConfig::default();
        RunConfig {
            lexicon_path: None,
            lexicon_columns: ColumnMap::table(),
            dimension: Dimension::Arousal,
            window_size: DEFAULT_WINDOW,
            context: DEFAULT_CONTEXT,
            stop_list_path: None,
            band_delta: 0.0,
            smooth_w: shape.smooth_w,
            lowpass_m: shape.lowpass_m,
            resample_len: shape.resample_len,
            output_dir: PathBuf::from("narrarc-out"),
            manifest_path: None,
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn shape(&self) -> ShapeConfig {
        ShapeConfig {
            smooth_w: self.smooth_w,
            lowpass_m: self.lowpass_m,
            resample_len: self.resample_len,
        }
    }

    fn apply_file(&mut self, f: ConfigFile, base: &Path) {
        let rel = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
        if let Some(v) = f.lexicon_path {
            self.lexicon_path = Some(rel(v));
        }
        if let Some(v) = f.lexicon_columns {
            self.lexicon_columns = v;
        }
        if let Some(v) = f.dimension {
            self.dimension = v;
        }
        if let Some(v) = f.window_size {
            self.window_size = v;
        }
        if let Some(v) = f.context {
            self.context = v;
        }
        if let Some(v) = f.stop_list_path {
            self.stop_list_path = Some(rel(v));
        }
        if let Some(v) = f.band_delta {
            self.band_delta = v;
        }
        if let Some(v) = f.smooth_w {
            self.smooth_w = v;
        }
        if let Some(v) = f.lowpass_m {
            self.lowpass_m = v;
        }
        if let Some(v) = f.resample_len {
            self.resample_len = v;
        }
        if let Some(v) = f.output_dir {
            self.output_dir = rel(v);
        }
        if let Some(v) = f.manifest_path {
            self.manifest_path = Some(rel(v));
        }
        if let Some(v) = f.workers {
            self.workers = Some(v);
        }
    }

    fn apply_flags(&mut self, o: &Overrides) {
        if let Some(v) = &o.lexicon {
            self.lexicon_path = Some(v.clone());
        }
        if o.nrc_vad_columns {
            self.lexicon_columns = ColumnMap::nrc_vad();
        }
        if let Some(v) = o.dimension {
            self.dimension = v;
        }
        if let Some(v) = o.window {
            self.window_size = v;
        }
        if let Some(v) = o.context {
            self.context = v;
        }
        if let Some(v) = &o.stop_list {
            self.stop_list_path = Some(v.clone());
        }
        if let Some(v) = o.band_delta {
            self.band_delta = v;
        }
        if let Some(v) = o.smooth_w {
            self.smooth_w = v;
        }
        if let Some(v) = o.lowpass_m {
            self.lowpass_m = v;
        }
        if let Some(v) = o.resample {
            self.resample_len = v;
        }
        if let Some(v) = &o.out {
            self.output_dir = v.clone();
        }
        if let Some(v) = &o.manifest {
            self.manifest_path = Some(v.clone());
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.window_size == 0 {
            return Err(CliError::usage("window_size must be at least 1"));
        }
        if self.context == 0 {
            return Err(CliError::usage("context must be at least 1"));
        }
        if !(self.band_delta.is_finite() && self.band_delta >= 0.0) {
            return Err(CliError::usage("band_delta must be >= 0"));
        }
        self.shape().validate()?;
        Ok(())
    }
}

pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::missing(format!("cannot read config {}: {e}", path.display()))
        })?;
        let file: ConfigFile = toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        cfg.apply_file(file, path.parent().unwrap_or(Path::new(".")));
    }
    cfg.apply_flags(overrides);
    if let Some(j) = overrides.jobs {
        cfg.workers = Some(j);
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Parser)]
#[command(
    name = "narrarc",
    version,
    about = "Sentiment arcs, story shapes and Ward clustering for narrative text"
)]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by the commands; each overrides the matching config key.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Read the lexicon as `word, valence, arousal, dominance` without ranks.
    #[arg(long)]
    pub nrc_vad_columns: bool,
    #[arg(long)]
    pub dimension: Option<Dimension>,
    /// Words per segment.
    #[arg(long)]
    pub window: Option<usize>,
    /// Segments accumulated per arc point.
    #[arg(long)]
    pub context: Option<usize>,
    #[arg(long)]
    pub stop_list: Option<PathBuf>,
    #[arg(long)]
    pub band_delta: Option<f64>,
    #[arg(long)]
    pub smooth_w: Option<usize>,
    #[arg(long)]
    pub lowpass_m: Option<usize>,
    #[arg(long)]
    pub resample: Option<usize>,
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Worker threads for per-document work.
    #[arg(long, short = 'j')]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score documents into sentiment arcs.
    Score {
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        opts: Overrides,
        /// Also write an SVG plot per arc.
        #[arg(long)]
        plot: bool,
    },
    /// Ward-cluster a directory of arcs and cut into k clusters.
    Cluster {
        /// Directory holding `*.arc.csv` files.
        #[arg(long)]
        arcs: PathBuf,
        #[arg(short, long)]
        k: usize,
        /// Average the unnormalized arcs for cluster means.
        #[arg(long)]
        raw_means: bool,
        /// Collapse dendrogram subtrees below this many levels in the SVG.
        #[arg(long)]
        max_depth: Option<usize>,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Label each arc with its nearest story shape.
    ClassifyArc {
        #[arg(long)]
        arcs: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Train or apply the narrative-structure classifier.
    Structure {
        #[command(subcommand)]
        action: StructureCommand,
    },
    /// Render a chart from an arc table, cluster means or dendrogram JSON.
    Plot {
        #[command(subcommand)]
        what: PlotCommand,
    },
    /// score, classify-arc and cluster in one go.
    Pipeline {
        inputs: Vec<PathBuf>,
        #[arg(short, long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        raw_means: bool,
        #[arg(long)]
        max_depth: Option<usize>,
        #[command(flatten)]
        opts: Overrides,
    },
}

#[derive(Debug, Subcommand)]
pub enum StructureCommand {
    Train {
        /// `label, text` table.
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated category list, in score order.
        #[arg(long, value_delimiter = ',')]
        categories: Option<Vec<String>>,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Share of each category used for training; the rest is held out.
        #[arg(long, default_value_t = DEFAULT_SPLIT)]
        split: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "structure_model.json")]
        model: PathBuf,
        #[arg(long, default_value = "structure_report.json")]
        report: PathBuf,
    },
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Plain text (cut into windows) or a `segment_id, text` table
        /// (`.csv` / `.tsv`).
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, short = 'o', default_value = "structure_predictions.csv")]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum PlotCommand {
    Arc {
        input: PathBuf,
        /// Document to plot when the table holds several.
        #[arg(long)]
        doc: Option<String>,
        #[arg(long, short = 'o')]
        out: PathBuf,
    },
    ClusterMean {
        /// `cluster_means.csv` written by `cluster`.
        input: PathBuf,
        #[arg(long)]
        cluster: usize,
        #[arg(long, short = 'o')]
        out: PathBuf,
    },
    Dendrogram {
        input: PathBuf,
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long, short = 'o')]
        out: PathBuf,
    },
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(CliError::usage("--jobs must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::usage(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Score { inputs, opts, plot } => {
            let cfg = load_config(config, &opts)?;
            cmd_score(&cfg, &inputs, plot).map(|_| ())
        }
        Command::Cluster {
            arcs,
            k,
            raw_means,
            max_depth,
            opts,
        } => {
            let cfg = load_config(config, &opts)?;
            cmd_cluster(&cfg, &arcs, k, raw_means, max_depth).map(|_| ())
        }
        Command::ClassifyArc { arcs, opts } => {
            let cfg = load_config(config, &opts)?;
            cmd_classify_arc(&cfg, &arcs).map(|_| ())
        }
        Command::Structure { action } => cmd_structure(action),
        Command::Plot { what } => cmd_plot(what),
        Command::Pipeline {
            inputs,
            k,
            raw_means,
            max_depth,
            opts,
        } => {
            let cfg = load_config(config, &opts)?;
            cmd_pipeline(&cfg, &inputs, k, raw_means, max_depth)
        }
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    io::write_atomic(path, contents.as_bytes())
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocInput {
    pub doc_id: String,
    pub path: PathBuf,
}

fn collect_inputs(cfg: &RunConfig, inputs: &[PathBuf]) -> CliResult<Vec<DocInput>> {
    let mut docs = Vec::new();
    if let Some(m) = &cfg.manifest_path {
        for e in corpus::load_manifest(m)? {
            docs.push(DocInput {
                doc_id: e.doc_id,
                path: e.path,
            });
        }
    }
    for p in inputs {
        let stem = p
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("doc")
            .to_string();
        docs.push(DocInput {
            doc_id: stem,
            path: p.clone(),
        });
    }
    if docs.is_empty() {
        return Err(CliError::usage("no documents"));
    }
    let mut seen = std::collections::HashSet::new();
    for d in &docs {
        if !seen.insert(io::file_stem_for(&d.doc_id)) {
            return Err(CliError::usage(format!(
                "duplicate document id `{}`",
                d.doc_id
            )));
        }
    }
    Ok(docs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreOutcome {
    pub arcs: Vec<(SentimentArc, ArcMeta)>,
    pub files: Vec<PathBuf>,
    pub skipped: Vec<String>,
}

/// Scores every document and writes `<doc>.arc.csv` / `<doc>.arc.json`
/// into the output directory.
pub fn cmd_score(cfg: &RunConfig, inputs: &[PathBuf], plot: bool) -> CliResult<ScoreOutcome> {
    let docs = collect_inputs(cfg, inputs)?;
    let lex_path = cfg
        .lexicon_path
        .as_ref()
        .ok_or_else(|| CliError::missing("no lexicon given (use --lexicon or lexicon_path)"))?;
    let lex = lexicon::load_lexicon(lex_path, &cfg.lexicon_columns)?;
    let stops = match &cfg.stop_list_path {
        Some(p) => lexicon::load_stop_list(p)?,
        None => Vec::new(),
    };
    let scores = lexicon::score_vector(&lex, cfg.dimension);
    let mask = lexicon::stop_mask(&lex, cfg.dimension, cfg.band_delta, &stops)?;
    info!(
        "lexicon: {} words, {} masked; window {} context {}",
        lex.len(),
        mask.excluded_count(),
        cfg.window_size,
        cfg.context
    );

    let results: Vec<CliResult<Option<(SentimentArc, ArcMeta)>>> = with_pool(cfg.workers, || {
        docs.par_iter()
            .map(|d| {
                let words = WordList::from_file(d.doc_id.clone(), &d.path)?;
                if words.len() < cfg.window_size {
                    warn!(
                        "{}: {} words is shorter than one window of {}; skipped",
                        d.path.display(),
                        words.len(),
                        cfg.window_size
                    );
                    return Ok(None);
                }
                let (matrix, discarded) = corpus::build_matrix(&words, &lex, cfg.window_size)?;
                let arc = sentiment::arc(&matrix, &scores, &mask, cfg.context)?;
                let meta = ArcMeta {
                    dimension: cfg.dimension.to_string(),
                    window_size: cfg.window_size,
                    context: cfg.context,
                    discarded_words: discarded,
                };
                Ok(Some((arc, meta)))
            })
            .collect()
    })?;

    let mut outcome = ScoreOutcome {
        arcs: Vec::new(),
        files: Vec::new(),
        skipped: Vec::new(),
    };
    for (d, r) in docs.iter().zip(results) {
        match r? {
            Some(a) => outcome.arcs.push(a),
            None => outcome.skipped.push(d.doc_id.clone()),
        }
    }
    if outcome.arcs.is_empty() {
        return Err(CliError::usage(
            "no document was long enough to produce an arc",
        ));
    }
    for (arc, meta) in &outcome.arcs {
        let stem = io::file_stem_for(&arc.doc);
        let csv_path = cfg.output_dir.join(format!("{stem}{}", io::ARC_CSV_SUFFIX));
        write_file(&csv_path, &io::arc_to_csv(arc))?;
        let json_path = cfg
            .output_dir
            .join(format!("{stem}{}", io::ARC_JSON_SUFFIX));
        write_file(&json_path, &io::arc_to_json(arc, meta))?;
        outcome.files.push(csv_path);
        outcome.files.push(json_path);
        if plot {
            let svg = PlotSpec::arc(arc.doc.clone(), &arc.scores()).render_svg()?;
            let svg_path = cfg.output_dir.join(format!("{stem}.arc.svg"));
            write_file(&svg_path, &svg)?;
            outcome.files.push(svg_path);
        }
        info!("{}: {} segments", arc.doc, arc.len());
    }
    Ok(outcome)
}

/// Arcs with enough defined points for shape work; the rest are reported
/// and dropped.
fn usable_arcs(arcs: Vec<SentimentArc>) -> Vec<SentimentArc> {
    arcs.into_iter()
        .filter(|a| {
            let ok = a.defined_count() >= MIN_CLASSIFY_LEN;
            if !ok {
                warn!(
                    "{}: only {} defined points (need {}); skipped",
                    a.doc,
                    a.defined_count(),
                    MIN_CLASSIFY_LEN
                );
            }
            ok
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutcome {
    pub docs: Vec<String>,
    pub labels: Vec<usize>,
    pub linkage: cluster::Linkage,
}

pub fn cmd_cluster(
    cfg: &RunConfig,
    arcs_dir: &Path,
    k: usize,
    raw_means: bool,
    max_depth: Option<usize>,
) -> CliResult<ClusterOutcome> {
    let arcs = usable_arcs(io::read_arc_dir(arcs_dir)?);
    if arcs.len() < 2 {
        return Err(CliError::usage(format!(
            "need at least 2 usable arcs to cluster, found {}",
            arcs.len()
        )));
    }
    if k == 0 || k > arcs.len() {
        return Err(CliError::usage(format!(
            "k = {k} out of range 1..={}",
            arcs.len()
        )));
    }
    let shape = cfg.shape();
    let normalized: Vec<NormalizedArc> = with_pool(cfg.workers, || {
        arcs.par_iter()
            .map(|a| arcshape::prepare_arc(a, &shape))
            .collect::<Result<_, _>>()
    })??;
    let docs: Vec<String> = arcs.iter().map(|a| a.doc.clone()).collect();
    let d = with_pool(cfg.workers, || distance_matrix(&normalized))??;
    let linkage = ward_linkage(&d)?;
    let assignment = cut(&linkage, k)?;

    let out = &cfg.output_dir;
    write_file(
        &out.join("assignments.csv"),
        &io::assignments_to_csv(&docs, &assignment.labels),
    )?;
    write_file(
        &out.join("dendrogram.json"),
        &cluster::dendrogram_json(&linkage, &docs)?,
    )?;
    let svg = PlotSpec::dendrogram("Ward dendrogram", linkage.clone(), docs.clone(), max_depth)
        .render_svg()?;
    write_file(&out.join("dendrogram.svg"), &svg)?;

    let series: Vec<Vec<f64>> = if raw_means {
        arcs.iter()
            .map(|a| arcshape::aligned_raw(a, &shape))
            .collect::<Result<_, _>>()?
    } else {
        normalized.iter().map(|a| a.values.clone()).collect()
    };
    let means = cluster_means(&series, &assignment)?;
    let mut table = String::from("cluster_id,size");
    for i in 0..shape.resample_len {
        table.push_str(&format!(",p{i}"));
    }
    table.push('\n');
    for (id, mean) in &means {
        let members: Vec<Vec<f64>> = assignment
            .members(*id)
            .into_iter()
            .map(|i| series[i].clone())
            .collect();
        table.push_str(&format!("{id},{}", members.len()));
        for v in mean {
            table.push_str(&format!(",{v}"));
        }
        table.push('\n');
        let title = format!("Cluster {id} ({} documents)", members.len());
        let svg = PlotSpec::cluster_mean(title, &members, mean).render_svg()?;
        write_file(
            &out.join("cluster_means").join(format!("cluster_{id}.svg")),
            &svg,
        )?;
    }
    write_file(&out.join("cluster_means.csv"), &table)?;
    Ok(ClusterOutcome {
        docs,
        labels: assignment.labels,
        linkage,
    })
}

pub fn cmd_classify_arc(cfg: &RunConfig, arcs_dir: &Path) -> CliResult<Vec<(String, ArcLabel)>> {
    let arcs = usable_arcs(io::read_arc_dir(arcs_dir)?);
    let shape = cfg.shape();
    let rows: Vec<(String, ArcLabel)> = arcs
        .iter()
        .map(|a| {
            let n = arcshape::prepare_arc(a, &shape)?;
            Ok((a.doc.clone(), classify_arc(&n)?))
        })
        .collect::<CliResult<_>>()?;
    write_file(
        &cfg.output_dir.join("labels.csv"),
        &io::labels_to_csv(&rows),
    )?;
    Ok(rows)
}

fn cmd_structure(action: StructureCommand) -> CliResult<()> {
    match action {
        StructureCommand::Train {
            data,
            categories,
            alpha,
            split,
            seed,
            model,
            report,
        } => {
            let categories = categories
                .unwrap_or_else(|| DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect());
            let r = structure_train(&data, &categories, alpha, split, seed, &model, &report)?;
            match r.accuracy {
                Some(acc) => println!("held-out accuracy {acc:.4} on {} segments", r.n_test),
                None => println!("no held-out segments; accuracy not computed"),
            }
            Ok(())
        }
        StructureCommand::Predict {
            model,
            input,
            window,
            out,
        } => structure_predict(&model, &input, window, &out).map(|_| ()),
    }
}

pub fn structure_train(
    data: &Path,
    categories: &[String],
    alpha: f64,
    split: f64,
    seed: u64,
    model_path: &Path,
    report_path: &Path,
) -> CliResult<structure::EvalReport> {
    if !(split > 0.0 && split <= 1.0) {
        return Err(CliError::usage("--split must be in (0, 1]"));
    }
    let rows = structure::load_labeled(data)?;
    let (train, test) = structure::split_train_test(&rows, split, seed);
    let model = structure::train(&train, categories, alpha)?;
    let report = structure::evaluate(&model, &test, train.len());
    model.save(model_path)?;
    write_file(
        report_path,
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    Ok(report)
}

pub fn structure_predict(
    model_path: &Path,
    input: &Path,
    window: usize,
    out: &Path,
) -> CliResult<Vec<(String, structure::StructurePrediction)>> {
    if window == 0 {
        return Err(CliError::usage("--window must be at least 1"));
    }
    let model = structure::load_model(model_path)?;
    let text = corpus::read_text_lossy(input)?;
    let tabular = input
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv") || e.eq_ignore_ascii_case("tsv"));
    let segments: Vec<(String, String)> = if tabular {
        structure::parse_labeled(&text)
            .map_err(|m| CliError::usage(format!("{}: {m}", input.display())))?
            .into_iter()
            .map(|s| (s.label, s.text))
            .collect()
    } else {
        let doc = input.file_stem().and_then(|s| s.to_str()).unwrap_or("doc");
        // Trailing words form a final shorter segment so no text goes untagged.
        corpus::tokenize(&text)
            .chunks(window)
            .enumerate()
            .map(|(i, w)| (format!("{doc}:{i}"), w.join(" ")))
            .collect()
    };
    let preds: Vec<(String, structure::StructurePrediction)> = segments
        .par_iter()
        .map(|(id, t)| (id.clone(), model.predict(t)))
        .collect();
    let mut table = String::from("segment_id,label");
    for c in model.categories() {
        table.push_str(&format!(",log_score_{c}"));
    }
    table.push('\n');
    for (id, p) in &preds {
        table.push_str(&format!("{id},{}", p.label));
        for s in &p.log_scores {
            table.push_str(&format!(",{s}"));
        }
        table.push('\n');
    }
    write_file(out, &table)?;
    Ok(preds)
}

fn cmd_plot(what: PlotCommand) -> CliResult<()> {
    let (spec, out) = match what {
        PlotCommand::Arc { input, doc, out } => {
            let arcs = io::read_arc_file(&input)?;
            let arc = match doc {
                Some(d) => arcs.into_iter().find(|a| a.doc == d).ok_or_else(|| {
                    CliError::usage(format!("document `{d}` not in {}", input.display()))
                })?,
                None => arcs
                    .into_iter()
                    .next()
                    .ok_or_else(|| CliError::usage(format!("{} holds no arc", input.display())))?,
            };
            (PlotSpec::arc(arc.doc.clone(), &arc.scores()), out)
        }
        PlotCommand::ClusterMean {
            input,
            cluster,
            out,
        } => {
            let means = read_cluster_means(&input)?;
            let mean = means.get(&cluster).ok_or_else(|| {
                CliError::usage(format!("cluster {cluster} not in {}", input.display()))
            })?;
            (
                PlotSpec::cluster_mean(format!("Cluster {cluster}"), &[], mean),
                out,
            )
        }
        PlotCommand::Dendrogram {
            input,
            max_depth,
            out,
        } => {
            let text = std::fs::read_to_string(&input).map_err(|e| {
                if e.kind() == std::io::ErrorKind::NotFound {
                    CliError::missing(format!("not found: {}", input.display()))
                } else {
                    CliError::usage(format!("{}: {e}", input.display()))
                }
            })?;
            let (linkage, labels) = cluster::parse_dendrogram_str(&text)?;
            (
                PlotSpec::dendrogram("Ward dendrogram", linkage, labels, max_depth),
                out,
            )
        }
    };
    let svg = spec.render_svg()?;
    write_file(&out, &svg)
}

fn read_cluster_means(path: &Path) -> CliResult<BTreeMap<usize, Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::missing(format!("not found: {}", path.display()))
        } else {
            CliError::usage(format!("{}: {e}", path.display()))
        }
    })?;
    let bad = |m: &str| CliError::usage(format!("{}: {m}", path.display()));
    let mut out = BTreeMap::new();
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let mut fields = line.split(',');
        let id = fields
            .next()
            .and_then(|f| f.trim().parse::<usize>().ok())
            .ok_or_else(|| bad("bad cluster id"))?;
        fields.next();
        let values = fields
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad("bad value"))?;
        out.insert(id, values);
    }
    Ok(out)
}

fn cmd_pipeline(
    cfg: &RunConfig,
    inputs: &[PathBuf],
    k: usize,
    raw_means: bool,
    max_depth: Option<usize>,
) -> CliResult<()> {
    let root = cfg.output_dir.clone();
    let mut stage = cfg.clone();
    stage.output_dir = root.join("arcs");
    let scored = cmd_score(&stage, inputs, true)?;
    let arcs_dir = stage.output_dir.clone();
    stage.output_dir = root.clone();
    let labels = cmd_classify_arc(&stage, &arcs_dir)?;
    println!(
        "scored {} documents ({} skipped), classified {}",
        scored.arcs.len(),
        scored.skipped.len(),
        labels.len()
    );
    let usable = labels.len();
    if usable < 2 {
        warn!("fewer than 2 usable arcs; clustering skipped");
        return Ok(());
    }
    stage.output_dir = root.join("cluster");
    let k = k.min(usable);
    cmd_cluster(&stage, &arcs_dir, k, raw_means, max_depth)?;
    println!("clustered into {k} groups");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_and_flags_merge() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("narrarc.toml");
        std::fs::write(
            &p,
            "lexicon_path = \"lex.csv\"\nwindow_size = 200\ndimension = \"valence\"\nsmooth_w = 3\n",
        )
        .unwrap();
        let flags = Overrides {
            window: Some(300),
            ..Default::default()
        };
        let cfg = load_config(Some(&p), &flags).unwrap();
        assert_eq!(cfg.window_size, 300);
        assert_eq!(cfg.dimension, Dimension::Valence);
        assert_eq!(cfg.smooth_w, 3);
        assert_eq!(cfg.context, DEFAULT_CONTEXT);
        assert_eq!(cfg.lexicon_path, Some(dir.path().join("lex.csv")));
    }

    #[test]
    fn config_rejects_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "smooth_w = 4\n").unwrap();
        assert_eq!(
            load_config(Some(&p), &Overrides::default())
                .unwrap_err()
                .code,
            1
        );
        std::fs::write(&p, "unknown_key = 1\n").unwrap();
        assert_eq!(
            load_config(Some(&p), &Overrides::default())
                .unwrap_err()
                .code,
            1
        );
        let missing = dir.path().join("none.toml");
        assert_eq!(
            load_config(Some(&missing), &Overrides::default())
                .unwrap_err()
                .code,
            2
        );
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["narrarc", "no-such-command"]), 1);
        assert_eq!(run(["narrarc", "--help"]), 0);
    }
}
