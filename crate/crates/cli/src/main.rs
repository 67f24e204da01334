//! `mesotext`: build, measure, shuffle and study commands over a corpus of
//! plain-text books.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use mesotext::corpus::{shuffle_paragraphs, ChapterPattern, Tokenizer, DEFAULT_CHAPTER_PATTERN};
use mesotext::experiment::{run_study, seed_stream, StudyBook, StudyConfig};
use mesotext::mesonet::{build_network, window_vectors, write_similarity_csv};
use mesotext::pipeline::{characterize, measures_csv, StageTimings, TOOL_VERSION};
use mesotext::{AnnotationSidecar, MesoNetwork, NetworkParams, OrganizedText, Preprocessor, RawBook};

const ORGANIZED_EXT: &str = ".organized.json";
const NETWORK_EXT: &str = ".mesonet.tsv";

#[derive(Parser)]
#[command(name = "mesotext", version, about = "Mesoscopic text networks from plain-text books")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Organize each book and write its network (`.organized.json`, `.mesonet.tsv`).
    Build {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        text: TextArgs,
        /// Also write the window similarity matrix as `<book>.similarity.csv`.
        #[arg(long)]
        dump_similarity: bool,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Measure `.mesonet.tsv` files (`.measures.csv`, `.rs.csv`, `.summary.json`).
    Measure {
        #[command(flatten)]
        run: RunArgs,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Write a paragraph-shuffled `.shuffled.organized.json` per book.
    Shuffle {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        text: TextArgs,
        /// Use this seed for every book instead of drawing from `--seed`.
        #[arg(long)]
        shuffle_seed: Option<u64>,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Real-vs-shuffled, genre and correlation experiments over a corpus.
    Study {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        text: TextArgs,
        /// Depth used for the correlation with signature statistics.
        #[arg(long, default_value_t = mesotext::concentric::DEFAULT_CORRELATION_DEPTH)]
        correlation_h: usize,
        /// JSON object mapping book id to its list of genres.
        #[arg(long)]
        genres: Option<PathBuf>,
        /// Comma-separated community ids to treat as fiction (default: the two largest).
        #[arg(long, value_delimiter = ',')]
        fiction_communities: Option<Vec<usize>>,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Window half-width.
    #[arg(long, default_value_t = mesotext::mesonet::DEFAULT_DELTA)]
    delta: usize,
    /// Target average similarity degree.
    #[arg(long, default_value_t = mesotext::mesonet::DEFAULT_AVG_DEGREE)]
    avg_degree: f64,
    /// Measure depths (comma-separated or repeated). `study` uses the first as its feature depth.
    #[arg(long = "h", value_delimiter = ',', default_values_t = [2usize, 3])]
    h: Vec<usize>,
    /// Root seed for shuffles and community detection.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Clone)]
struct TextArgs {
    /// Lines matching this pattern (after trimming) are dropped as chapter markers.
    #[arg(long, default_value = DEFAULT_CHAPTER_PATTERN)]
    chapter_regex: String,
    /// Stopword list, one word per line, replacing the built-in English list.
    #[arg(long)]
    stopwords: Option<PathBuf>,
}

impl RunArgs {
    fn validate(&self) -> anyhow::Result<NetworkParams> {
        let params = NetworkParams { delta: self.delta, avg_degree: self.avg_degree };
        params.validate()?;
        if self.h.is_empty() || self.h.contains(&0) {
            bail!("--h values must be at least 1");
        }
        Ok(params)
    }

    fn h_list(&self) -> String {
        self.h.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(",")
    }

    fn meta_comment(&self) -> String {
        format!("tool={TOOL_VERSION} delta={} t={} h={} seed={}", self.delta, self.avg_degree, self.h_list(), self.seed)
    }

    fn meta_json(&self) -> serde_json::Value {
        json!({
            "tool": TOOL_VERSION,
            "delta": self.delta,
            "t": self.avg_degree,
            "h": self.h,
            "seed": self.seed,
        })
    }
}

impl TextArgs {
    fn preprocessor(&self) -> anyhow::Result<Preprocessor> {
        let chapters = ChapterPattern::new(&self.chapter_regex).context("--chapter-regex")?;
        let tokenizer = match &self.stopwords {
            Some(path) => {
                Tokenizer::with_stopwords(&fs::read_to_string(path).with_context(|| format!("{}", path.display()))?)
            }
            None => Tokenizer::default(),
        };
        Ok(Preprocessor::new(chapters, tokenizer))
    }
}

/// A per-book input: the name stem used for output files plus its path.
struct Input {
    stem: String,
    path: PathBuf,
}

fn file_name(path: &Path) -> anyhow::Result<&str> {
    path.file_name().and_then(|s| s.to_str()).with_context(|| format!("{}: unusable file name", path.display()))
}

/// Book stems, with the known suffix stripped. Duplicate stems would
/// overwrite each other's outputs and are rejected.
fn inputs(paths: &[PathBuf], suffixes: &[&str]) -> anyhow::Result<Vec<Input>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for path in paths {
        let name = file_name(path)?;
        let stem = suffixes
            .iter()
            .find_map(|s| name.strip_suffix(s))
            .map(str::to_string)
            .unwrap_or_else(|| Path::new(name).file_stem().and_then(|s| s.to_str()).unwrap_or(name).to_string());
        if stem.is_empty() || !seen.insert(stem.clone()) {
            bail!("{}: duplicate or empty book name {stem:?}", path.display());
        }
        out.push(Input { stem, path: path.clone() });
    }
    Ok(out)
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("{}", path.display()))
}

/// Writes `dir/name`, terminating the contents with a newline.
fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    let path = dir.join(name);
    let mut contents = contents.to_string();
    if !contents.ends_with('\n') {
        contents.push('\n');
    }
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// `<path-without-ext>.annotations.jsonl`, if present.
fn sidecar_for(path: &Path) -> anyhow::Result<Option<AnnotationSidecar>> {
    let sidecar = path.with_extension("annotations.jsonl");
    if !sidecar.exists() {
        return Ok(None);
    }
    let text = read(&sidecar)?;
    Ok(Some(AnnotationSidecar::parse_jsonl(&text).with_context(|| format!("{}", sidecar.display()))?))
}

/// Organized text from either a plain-text book or an `.organized.json` dump.
/// The flag is true when the text was organized here.
fn organize(input: &Input, pre: &Preprocessor) -> anyhow::Result<(OrganizedText, bool)> {
    let text = read(&input.path)?;
    if file_name(&input.path)?.ends_with(ORGANIZED_EXT) {
        let o = OrganizedText::from_json(&text).with_context(|| format!("{}", input.path.display()))?;
        return Ok((o, false));
    }
    let raw = RawBook::new(input.stem.clone(), text);
    let sidecar = sidecar_for(&input.path)?;
    let o = pre.organize(&raw, sidecar.as_ref()).with_context(|| format!("{}", input.path.display()))?;
    Ok((o, true))
}

/// Runs `job` over all inputs in parallel and reports failures in input order.
fn for_each_book(inputs: &[Input], job: impl Fn(&Input) -> anyhow::Result<()> + Sync) -> Outcome {
    let results: Vec<anyhow::Result<()>> = inputs.par_iter().map(&job).collect();
    let mut failed = 0;
    for (input, r) in inputs.iter().zip(results) {
        if let Err(e) = r {
            log::error!("{}: {e:#}", input.stem);
            failed += 1;
        }
    }
    Outcome { total: inputs.len(), failed }
}

struct Outcome {
    total: usize,
    failed: usize,
}

impl Outcome {
    fn exit_code(&self) -> ExitCode {
        match self.failed {
            0 => ExitCode::SUCCESS,
            f if f == self.total => ExitCode::from(1),
            _ => ExitCode::from(2),
        }
    }
}

fn cmd_build(run: &RunArgs, text: &TextArgs, dump_similarity: bool, paths: &[PathBuf]) -> anyhow::Result<Outcome> {
    let params = run.validate()?;
    let pre = text.preprocessor()?;
    let books = inputs(paths, &[ORGANIZED_EXT])?;
    let meta = run.meta_comment();
    Ok(for_each_book(&books, |input| {
        let start = Instant::now();
        let (organized, fresh) = organize(input, &pre)?;
        let text_processing = start.elapsed();
        if fresh {
            write(&run.out, &format!("{}{ORGANIZED_EXT}", input.stem), &organized.to_json(Some(run.meta_json()))?)?;
        }
        organized.check_min_len(params.delta)?;
        let start = Instant::now();
        let network = build_network(&organized, params.delta, params.avg_degree)?;
        let network_modelling = start.elapsed();
        write(&run.out, &format!("{}{NETWORK_EXT}", input.stem), &network.to_tsv(std::slice::from_ref(&meta)))?;
        if dump_similarity {
            let mut csv = format!("# {meta}\n").into_bytes();
            write_similarity_csv(&window_vectors(&organized, params.delta)?, &mut csv)?;
            write(&run.out, &format!("{}.similarity.csv", input.stem), &String::from_utf8(csv)?)?;
        }
        StageTimings { text_processing, network_modelling, ..Default::default() }.log(&input.stem);
        Ok(())
    }))
}

fn cmd_measure(run: &RunArgs, paths: &[PathBuf]) -> anyhow::Result<Outcome> {
    run.validate()?;
    let books = inputs(paths, &[NETWORK_EXT])?;
    Ok(for_each_book(&books, |input| {
        let network =
            MesoNetwork::from_tsv(&read(&input.path)?).with_context(|| format!("{}", input.path.display()))?;
        // The network's own parameters are what the measures describe.
        let meta = RunArgs { delta: network.delta, avg_degree: network.threshold, ..run.clone() };
        let start = Instant::now();
        let (measures, signature, summary) = characterize(&input.stem, &network, &run.h)?;
        StageTimings { characterization: start.elapsed(), ..Default::default() }.log(&input.stem);
        let comment = meta.meta_comment();
        write(&run.out, &format!("{}.measures.csv", input.stem), &measures_csv(&measures, &comment))?;
        write(&run.out, &format!("{}.rs.csv", input.stem), &format!("# {comment}\n{}", signature.to_csv()))?;
        write(&run.out, &format!("{}.summary.json", input.stem), &summary.to_json(meta.meta_json())?)?;
        Ok(())
    }))
}

/// Per-book seeds drawn in input order from the root seed, unless one seed is forced.
fn shuffle_seeds(root: u64, count: usize, forced: Option<u64>) -> Vec<u64> {
    match forced {
        Some(s) => vec![s; count],
        None => seed_stream(root).take(count).collect(),
    }
}

fn cmd_shuffle(run: &RunArgs, text: &TextArgs, forced: Option<u64>, paths: &[PathBuf]) -> anyhow::Result<Outcome> {
    run.validate()?;
    let pre = text.preprocessor()?;
    let books = inputs(paths, &[ORGANIZED_EXT])?;
    let seeds = shuffle_seeds(run.seed, books.len(), forced);
    let seed_of: HashMap<&str, u64> = books.iter().map(|b| b.stem.as_str()).zip(seeds).collect();
    Ok(for_each_book(&books, |input| {
        let (organized, _) = organize(input, &pre)?;
        let shuffled = shuffle_paragraphs(&organized, seed_of[input.stem.as_str()])?;
        write(&run.out, &format!("{}.shuffled{ORGANIZED_EXT}", input.stem), &shuffled.to_json(Some(run.meta_json()))?)
    }))
}

#[allow(clippy::too_many_arguments)]
fn cmd_study(
    run: &RunArgs,
    text: &TextArgs,
    correlation_h: usize,
    genres: Option<&Path>,
    fiction: Option<&[usize]>,
    paths: &[PathBuf],
) -> anyhow::Result<Outcome> {
    let params = run.validate()?;
    if correlation_h == 0 {
        bail!("--correlation-h must be at least 1");
    }
    let pre = text.preprocessor()?;
    let books = inputs(paths, &[ORGANIZED_EXT])?;
    let genre_map: HashMap<String, Vec<String>> = match genres {
        Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("{}", p.display()))?,
        None => HashMap::new(),
    };

    let mut study_books = Vec::new();
    let mut unreadable = 0;
    for input in &books {
        let genres = genre_map.get(&input.stem).cloned().unwrap_or_default();
        let loaded = if file_name(&input.path)?.ends_with(ORGANIZED_EXT) {
            organize(input, &pre)
                .map(|(o, _)| StudyBook::organized(OrganizedText { book_id: input.stem.clone(), ..o }, genres))
        } else {
            read(&input.path).and_then(|text| {
                let raw = RawBook::new(input.stem.clone(), text).with_genres(genres);
                Ok(StudyBook::raw(raw, sidecar_for(&input.path)?))
            })
        };
        match loaded {
            Ok(b) => study_books.push(b),
            Err(e) => {
                log::error!("{}: {e:#}", input.stem);
                unreadable += 1;
            }
        }
    }

    let cfg = StudyConfig {
        network: params,
        feature_depth: run.h[0],
        correlation_depth: correlation_h,
        seed: run.seed,
        fiction_communities: fiction.map(|f| f.iter().copied().collect::<BTreeSet<usize>>()),
    };
    let report = run_study(&study_books, &pre, &cfg)?;
    let meta = RunArgs { h: vec![cfg.feature_depth, correlation_h], ..run.clone() };
    let comment = meta.meta_comment();

    write(&run.out, "study.csv", &report.study_csv(&cfg, &comment))?;
    for s in &report.scatters {
        write(&run.out, &format!("scatter_{}.csv", s.name), &s.to_csv(&comment))?;
    }
    let correlation =
        json!({ "meta": meta.meta_json(), "books": report.books.len(), "correlations": report.correlations });
    write(&run.out, "correlation.json", &serde_json::to_string_pretty(&correlation)?)?;
    let rmse = json!({
        "meta": meta.meta_json(),
        "std": "population",
        "looNearestCentroidAccuracy": report.loo_accuracy,
        "rmse": report.rmse,
    });
    write(&run.out, "rmse.json", &serde_json::to_string_pretty(&rmse)?)?;
    if let Some(mut g) = report.genres_json() {
        g["meta"] = meta.meta_json();
        write(&run.out, "genres.json", &serde_json::to_string_pretty(&g)?)?;
    }
    if let Some(labels) = report.labels_csv() {
        write(&run.out, "labels.csv", &format!("# {comment}\n{labels}"))?;
    }
    for (id, e) in &report.failures {
        log::error!("{id}: {e}");
    }
    Ok(Outcome { total: books.len(), failed: unreadable + report.failures.len() })
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let run_args = match &cli.command {
        Command::Build { run, .. }
        | Command::Measure { run, .. }
        | Command::Shuffle { run, .. }
        | Command::Study { run, .. } => run,
    };
    if let Some(jobs) = run_args.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global()?;
    }
    fs::create_dir_all(&run_args.out).with_context(|| format!("creating {}", run_args.out.display()))?;
    match &cli.command {
        Command::Build { run, text, dump_similarity, inputs } => cmd_build(run, text, *dump_similarity, inputs),
        Command::Measure { run, inputs } => cmd_measure(run, inputs),
        Command::Shuffle { run, text, shuffle_seed, inputs } => cmd_shuffle(run, text, *shuffle_seed, inputs),
        Command::Study { run, text, correlation_h, genres, fiction_communities, inputs } => {
            cmd_study(run, text, *correlation_h, genres.as_deref(), fiction_communities.as_deref(), inputs)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
