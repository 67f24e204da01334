//! The corpus-level experiments: real vs shuffled discrimination, genre
//! labeling and discrimination, signature/accessibility correlation and the
//! tf-idf PCA baseline.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::concentric::{DEFAULT_CORRELATION_DEPTH, DEFAULT_FEATURE_DEPTH};
use crate::corpus::{shuffle_paragraphs, AnnotationSidecar, OrganizedText, Preprocessor, RawBook};
use crate::error::{Error, Result};
use crate::pipeline::{analyze_book, analyze_organized, MeasureSummary, NetworkParams, StageTimings};
use crate::study::{
    bipartite_project, detect_communities, label_book, largest_communities, loo_nearest_centroid, pca2, pearson,
    rmse_separation, spearman, FeatureRecord, GenreGraph, Label, Partition, Separation, MEAN_K, MEAN_S,
    NETWORK_FEATURES, RS_MEAN, RS_STD, STD_K,
};
use crate::vectorize::{TfIdfModel, TokenCounts};

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub network: NetworkParams,
    /// Depth for the discrimination features.
    pub feature_depth: usize,
    /// Depth for the accessibility side of the correlation study.
    pub correlation_depth: usize,
    /// Root seed; per-book shuffle seeds and the community seed are drawn from it.
    pub seed: u64,
    /// Community ids treated as fiction. `None` picks the two largest.
    pub fiction_communities: Option<BTreeSet<usize>>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            network: NetworkParams::default(),
            feature_depth: DEFAULT_FEATURE_DEPTH,
            correlation_depth: DEFAULT_CORRELATION_DEPTH,
            seed: 0,
            fiction_communities: None,
        }
    }
}

/// A study input: raw text (optionally annotated) or an already organized text.
#[derive(Debug, Clone)]
pub enum StudyInput {
    Raw { raw: RawBook, sidecar: Option<AnnotationSidecar> },
    Organized(OrganizedText),
}

#[derive(Debug, Clone)]
pub struct StudyBook {
    pub id: String,
    pub genres: Vec<String>,
    pub input: StudyInput,
}

impl StudyBook {
    pub fn raw(raw: RawBook, sidecar: Option<AnnotationSidecar>) -> Self {
        StudyBook { id: raw.id.clone(), genres: raw.genres.clone(), input: StudyInput::Raw { raw, sidecar } }
    }

    pub fn organized(o: OrganizedText, genres: Vec<String>) -> Self {
        StudyBook { id: o.book_id.clone(), genres, input: StudyInput::Organized(o) }
    }
}

/// Per-book outcome for the real text and its shuffled variant.
#[derive(Debug, Clone)]
pub struct BookOutcome {
    pub book_id: String,
    pub shuffle_seed: u64,
    pub real: MeasureSummary,
    pub shuffled: MeasureSummary,
    pub real_timings: StageTimings,
    pub counts: TokenCounts,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationPair {
    pub x: String,
    pub y: String,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RmseEntry {
    pub experiment: String,
    pub features: Vec<String>,
    #[serde(flatten)]
    pub separation: Separation,
}

/// x, y and label columns for one scatter plot.
#[derive(Debug, Clone)]
pub struct Scatter {
    pub name: String,
    pub x_name: String,
    pub y_name: String,
    pub points: Vec<(String, f64, f64, String)>,
}

impl Scatter {
    pub fn to_csv(&self, meta_comment: &str) -> String {
        let mut out = format!("# {meta_comment}\n# x={} y={}\nbookId,x,y,label\n", self.x_name, self.y_name);
        for (id, x, y, label) in &self.points {
            out.push_str(&format!("{id},{x:.9},{y:.9},{label}\n"));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct GenreStudy {
    pub graph: GenreGraph,
    pub partition: Partition,
    pub community_seed: u64,
    pub fiction: BTreeSet<usize>,
    pub labels: Vec<(String, Label)>,
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub books: Vec<BookOutcome>,
    /// Real and shuffled records at the feature depth.
    pub records: Vec<FeatureRecord>,
    pub rmse: Vec<RmseEntry>,
    pub loo_accuracy: f64,
    pub correlations: Vec<CorrelationPair>,
    pub genre: Option<GenreStudy>,
    pub scatters: Vec<Scatter>,
    pub failures: Vec<(String, String)>,
}

fn scatter(name: &str, records: &[FeatureRecord], x: &str, y: &str) -> Scatter {
    Scatter {
        name: name.to_string(),
        x_name: x.to_string(),
        y_name: y.to_string(),
        points: records
            .iter()
            .map(|r| (r.book_id.clone(), r.features[x], r.features[y], r.label.to_string()))
            .collect(),
    }
}

fn split_by_label(records: &[FeatureRecord], a: Label, b: Label) -> (Vec<FeatureRecord>, Vec<FeatureRecord>) {
    let ga = records.iter().filter(|r| r.label == a).cloned().collect();
    let gb = records.iter().filter(|r| r.label == b).cloned().collect();
    (ga, gb)
}

fn rmse_entries(experiment: &str, a: &[FeatureRecord], b: &[FeatureRecord]) -> Result<Vec<RmseEntry>> {
    let sets: [&[&str]; 3] = [&[MEAN_K, STD_K], &[MEAN_K, MEAN_S], &NETWORK_FEATURES];
    sets.iter()
        .map(|names| {
            Ok(RmseEntry {
                experiment: experiment.to_string(),
                features: names.iter().map(|s| s.to_string()).collect(),
                separation: rmse_separation(a, b, names)?,
            })
        })
        .collect()
}

fn correlation(x_name: &str, xs: &[f64], y_name: &str, ys: &[f64]) -> CorrelationPair {
    CorrelationPair {
        x: x_name.to_string(),
        y: y_name.to_string(),
        pearson: pearson(xs, ys).ok(),
        spearman: spearman(xs, ys).ok(),
    }
}

fn whole_book_counts(o: &OrganizedText) -> TokenCounts {
    let mut counts = TokenCounts::new();
    for p in &o.paragraphs {
        for t in &p.tokens {
            *counts.entry(t.lemma.clone()).or_insert(0) += 1;
        }
    }
    counts
}

/// The stream every study seed is drawn from: per-book shuffle seeds in input
/// order, then the community-detection seed.
pub fn seed_stream(root: u64) -> impl Iterator<Item = u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    std::iter::repeat_with(move || rng.next_u64())
}

fn analyze_pair(
    book: &StudyBook,
    shuffle_seed: u64,
    pre: &Preprocessor,
    cfg: &StudyConfig,
    depths: &[usize],
) -> Result<BookOutcome> {
    let (organized, real) = match &book.input {
        StudyInput::Raw { raw, sidecar } => analyze_book(raw, sidecar.as_ref(), pre, &cfg.network, depths)?,
        StudyInput::Organized(o) => (o.clone(), analyze_organized(o, &cfg.network, depths)?),
    };
    real.timings.log(&book.id);
    let shuffled_text = shuffle_paragraphs(&organized, shuffle_seed)?;
    let shuffled = analyze_organized(&shuffled_text, &cfg.network, depths)?;
    Ok(BookOutcome {
        book_id: book.id.clone(),
        shuffle_seed,
        real: real.summary,
        shuffled: shuffled.summary,
        real_timings: real.timings,
        counts: whole_book_counts(&organized),
    })
}

/// Runs every experiment over `books`. Per-book failures are collected in
/// `failures`; fewer than two successful books is an error.
pub fn run_study(books: &[StudyBook], pre: &Preprocessor, cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.network.validate()?;
    let mut seeds = seed_stream(cfg.seed);
    let shuffle_seeds: Vec<u64> = seeds.by_ref().take(books.len()).collect();
    let community_seed = seeds.next().expect("endless stream");

    let depths: Vec<usize> = BTreeSet::from([cfg.feature_depth, cfg.correlation_depth]).into_iter().collect();
    let results: Vec<Result<BookOutcome>> = books
        .par_iter()
        .zip(shuffle_seeds.par_iter())
        .map(|(b, &seed)| analyze_pair(b, seed, pre, cfg, &depths))
        .collect();
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for (book, r) in books.iter().zip(results) {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => {
                log::warn!("{}: {e}", book.id);
                failures.push((book.id.clone(), e.to_string()));
            }
        }
    }
    if outcomes.len() < 2 {
        return Err(Error::DegenerateInput(format!("study needs at least 2 analyzable books, got {}", outcomes.len())));
    }

    let h = cfg.feature_depth;
    let mut records = Vec::new();
    for o in &outcomes {
        records.push(o.real.feature_record(h, Label::Real)?);
        records.push(o.shuffled.feature_record(h, Label::Shuffled)?);
    }
    let (real, shuffled) = split_by_label(&records, Label::Real, Label::Shuffled);
    let mut rmse = rmse_entries("real_vs_shuffled", &real, &shuffled)?;
    let loo_accuracy = loo_nearest_centroid(&records, &NETWORK_FEATURES)?;

    let mut scatters = vec![
        scatter("real_vs_shuffled_meank_stdk", &records, MEAN_K, STD_K),
        scatter("real_vs_shuffled_meank_meanS", &records, MEAN_K, MEAN_S),
    ];

    let hc = cfg.correlation_depth;
    let corr_records: Vec<FeatureRecord> =
        outcomes.iter().map(|o| o.real.feature_record(hc, Label::Real)).collect::<Result<_>>()?;
    let col = |name: &str| corr_records.iter().map(|r| r.features[name]).collect::<Vec<f64>>();
    let correlations = vec![
        correlation(RS_MEAN, &col(RS_MEAN), &format!("{MEAN_K}@h{hc}"), &col(MEAN_K)),
        correlation(RS_STD, &col(RS_STD), &format!("{STD_K}@h{hc}"), &col(STD_K)),
    ];
    scatters.push(scatter("rs_mean_vs_access_mean", &corr_records, RS_MEAN, MEAN_K));
    scatters.push(scatter("rs_std_vs_access_std", &corr_records, RS_STD, STD_K));

    let genre = genre_study(books, &outcomes, community_seed, cfg)?;
    let real_records: Vec<FeatureRecord> = records.iter().filter(|r| r.label == Label::Real).cloned().collect();
    let mut label_of: HashMap<String, Label> = HashMap::new();
    if let Some(g) = &genre {
        label_of.extend(g.labels.iter().cloned());
        let genre_records: Vec<FeatureRecord> =
            real_records.iter().map(|r| FeatureRecord { label: label_of[&r.book_id], ..r.clone() }).collect();
        let (fiction, others) = split_by_label(&genre_records, Label::Fiction, Label::Others);
        if !fiction.is_empty() && !others.is_empty() {
            rmse.extend(rmse_entries("fiction_vs_others", &fiction, &others)?);
        }
        scatters.push(scatter("genre_meank_stdk", &genre_records, MEAN_K, STD_K));
        scatters.push(scatter("genre_meank_meanS", &genre_records, MEAN_K, MEAN_S));
    }

    if outcomes.len() >= 3 {
        scatters.push(tfidf_pca_scatter(&outcomes, &label_of)?);
    }

    Ok(StudyReport { books: outcomes, records, rmse, loo_accuracy, correlations, genre, scatters, failures })
}

fn genre_study(
    books: &[StudyBook],
    outcomes: &[BookOutcome],
    community_seed: u64,
    cfg: &StudyConfig,
) -> Result<Option<GenreStudy>> {
    let analyzed: BTreeSet<&str> = outcomes.iter().map(|o| o.book_id.as_str()).collect();
    let listing: Vec<(String, Vec<String>)> =
        books.iter().filter(|b| analyzed.contains(b.id.as_str())).map(|b| (b.id.clone(), b.genres.clone())).collect();
    if listing.iter().all(|(_, g)| g.is_empty()) {
        return Ok(None);
    }
    let graph = bipartite_project(&listing);
    let partition = detect_communities(&graph, community_seed);
    let fiction = match &cfg.fiction_communities {
        Some(set) => set.clone(),
        None => largest_communities(&partition, 2),
    };
    let genre_community: HashMap<String, usize> =
        graph.nodes.iter().cloned().zip(partition.assignment.iter().copied()).collect();
    let labels = listing.iter().map(|(id, gs)| (id.clone(), label_book(gs, &genre_community, &fiction))).collect();
    Ok(Some(GenreStudy { graph, partition, community_seed, fiction, labels }))
}

/// PCA of whole-book tf-idf vectors (one document per real book).
fn tfidf_pca_scatter(outcomes: &[BookOutcome], label_of: &HashMap<String, Label>) -> Result<Scatter> {
    let model = TfIdfModel::fit(outcomes.iter().map(|o| &o.counts))?;
    let dim = model.vocabulary_len();
    let rows: Vec<Vec<f64>> = outcomes
        .iter()
        .map(|o| {
            let mut row = vec![0.0; dim];
            for &(c, w) in model.vectorize(&o.counts).entries() {
                row[c as usize] = w;
            }
            row
        })
        .collect();
    let pca = pca2(&rows)?;
    Ok(Scatter {
        name: "tfidf_pca".to_string(),
        x_name: "pc1".to_string(),
        y_name: "pc2".to_string(),
        points: outcomes
            .iter()
            .zip(&pca.points)
            .map(|(o, p)| {
                let label = label_of.get(&o.book_id).copied().unwrap_or(Label::Real);
                (o.book_id.clone(), p[0], p[1], label.to_string())
            })
            .collect(),
    })
}

impl StudyReport {
    /// `study.csv`: one record per row with the run parameters.
    pub fn study_csv(&self, cfg: &StudyConfig, meta_comment: &str) -> String {
        let mut out = format!("# {meta_comment}\nbookId,label,mean_k,std_k,mean_S,rsMean,rsStd,h,delta,t\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{:.9},{:.9},{:.9},{:.9},{:.9},{},{},{}\n",
                r.book_id,
                r.label,
                r.features[MEAN_K],
                r.features[STD_K],
                r.features[MEAN_S],
                r.features[RS_MEAN],
                r.features[RS_STD],
                cfg.feature_depth,
                cfg.network.delta,
                cfg.network.avg_degree
            ));
        }
        out
    }

    pub fn labels_csv(&self) -> Option<String> {
        let g = self.genre.as_ref()?;
        let mut out = String::from("bookId,label\n");
        for (id, l) in &g.labels {
            out.push_str(&format!("{id},{l}\n"));
        }
        Some(out)
    }

    /// Community partition with sizes and members, keyed for `genres.json`.
    pub fn genres_json(&self) -> Option<serde_json::Value> {
        let g = self.genre.as_ref()?;
        let sizes = g.partition.sizes();
        let communities: Vec<serde_json::Value> = (0..sizes.len())
            .map(|c| {
                serde_json::json!({
                    "id": c,
                    "size": sizes[c],
                    "fiction": g.fiction.contains(&c),
                    "genres": g.partition.members(c).iter().map(|&v| g.graph.nodes[v].clone()).collect::<Vec<_>>(),
                })
            })
            .collect();
        let assignment: BTreeMap<&str, usize> =
            g.graph.nodes.iter().map(String::as_str).zip(g.partition.assignment.iter().copied()).collect();
        Some(serde_json::json!({
            "communitySeed": g.community_seed,
            "communities": communities,
            "assignment": assignment,
        }))
    }
}
