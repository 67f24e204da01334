//! Per-book pipeline: text processing → network modelling → characterization,
//! with wall-clock timing for each stage.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::json;

use crate::concentric::{node_measures, LevelSummary, NodeMeasures};
use crate::corpus::{AnnotationSidecar, OrganizedText, Preprocessor, RawBook};
use crate::error::{Error, Result};
use crate::mesonet::{build_network, MesoNetwork, DEFAULT_AVG_DEGREE, DEFAULT_DELTA};
use crate::signature::{recurrence_signature, rs_stats, RecurrenceSignature, RsStats};
use crate::study::{FeatureRecord, Label, MEAN_K, MEAN_S, RS_MEAN, RS_STD, STD_K};

pub const TOOL_VERSION: &str = concat!("mesotext ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub delta: usize,
    pub avg_degree: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams { delta: DEFAULT_DELTA, avg_degree: DEFAULT_AVG_DEGREE }
    }
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        if self.delta < 1 {
            return Err(Error::InvalidParameter("delta must be at least 1".into()));
        }
        if !(self.avg_degree > 0.0 && self.avg_degree.is_finite()) {
            return Err(Error::InvalidParameter(format!("average degree must be positive, got {}", self.avg_degree)));
        }
        Ok(())
    }
}

/// Wall-clock time of the three pipeline stages.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub text_processing: Duration,
    pub network_modelling: Duration,
    pub characterization: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.text_processing + self.network_modelling + self.characterization
    }

    pub fn log(&self, book_id: &str) {
        log::info!(
            "{book_id}: text processing {:.3}s, network modelling {:.3}s, characterization {:.3}s, total {:.3}s",
            self.text_processing.as_secs_f64(),
            self.network_modelling.as_secs_f64(),
            self.characterization.as_secs_f64(),
            self.total().as_secs_f64()
        );
    }
}

/// Feature summary of one book: node-measure statistics per depth plus the
/// recurrence-signature statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSummary {
    pub book_id: String,
    pub levels: BTreeMap<usize, LevelSummary>,
    pub rs: RsStats,
}

#[derive(Serialize)]
struct LevelJson {
    mean_k: f64,
    std_k: f64,
    #[serde(rename = "mean_S")]
    mean_s: f64,
}

impl MeasureSummary {
    pub fn level(&self, h: usize) -> Result<&LevelSummary> {
        self.levels.get(&h).ok_or_else(|| Error::InvalidParameter(format!("{}: no measures at h={h}", self.book_id)))
    }

    /// Study features at depth `h`.
    pub fn feature_record(&self, h: usize, label: Label) -> Result<FeatureRecord> {
        let l = self.level(h)?;
        let features = BTreeMap::from([
            (MEAN_K.to_string(), l.mean_k),
            (STD_K.to_string(), l.std_k),
            (MEAN_S.to_string(), l.mean_s),
            (RS_MEAN.to_string(), self.rs.mean),
            (RS_STD.to_string(), self.rs.std),
        ]);
        Ok(FeatureRecord { book_id: self.book_id.clone(), label, features })
    }

    /// Summary JSON, measures keyed by depth.
    pub fn to_json(&self, meta: serde_json::Value) -> Result<String> {
        let measures: BTreeMap<String, LevelJson> = self
            .levels
            .iter()
            .map(|(h, l)| (h.to_string(), LevelJson { mean_k: l.mean_k, std_k: l.std_k, mean_s: l.mean_s }))
            .collect();
        let doc = json!({
            "bookId": self.book_id,
            "meta": meta,
            "std": "population",
            "measures": measures,
            "rs": self.rs,
        });
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Everything computed for one book.
#[derive(Debug, Clone)]
pub struct BookAnalysis {
    pub network: MesoNetwork,
    pub measures: Vec<NodeMeasures>,
    pub signature: RecurrenceSignature,
    pub summary: MeasureSummary,
    pub timings: StageTimings,
}

impl BookAnalysis {
    /// `<book>.measures.csv`: metadata comment, `node,k_<h>,S_<h>,...` rows, then
    /// `#`-prefixed summary footer lines.
    pub fn measures_csv(&self, meta_comment: &str) -> String {
        measures_csv(&self.measures, meta_comment)
    }
}

pub fn measures_csv(measures: &[NodeMeasures], meta_comment: &str) -> String {
    let mut out = format!("# {meta_comment}\nnode");
    for m in measures {
        let _ = write!(out, ",k_{h},S_{h}", h = m.h);
    }
    out.push('\n');
    let n = measures.first().map_or(0, |m| m.accessibility.len());
    for v in 0..n {
        out.push_str(&v.to_string());
        for m in measures {
            let _ = write!(out, ",{:.9},{:.9}", m.accessibility[v], m.symmetry[v]);
        }
        out.push('\n');
    }
    for m in measures {
        let s = m.summary();
        let _ = writeln!(out, "# summary h={} mean_k={:.9} std_k={:.9} mean_S={:.9}", s.h, s.mean_k, s.std_k, s.mean_s);
    }
    out
}

/// Characterizes an existing network at each depth in `depths`.
pub fn characterize(
    book_id: &str,
    network: &MesoNetwork,
    depths: &[usize],
) -> Result<(Vec<NodeMeasures>, RecurrenceSignature, MeasureSummary)> {
    if depths.is_empty() || depths.contains(&0) {
        return Err(Error::InvalidParameter("depths must be non-empty and ≥ 1".into()));
    }
    let graph = network.to_graph();
    let measures: Vec<NodeMeasures> = depths.iter().map(|&h| node_measures(&graph, h)).collect();
    let signature = recurrence_signature(network);
    let summary = MeasureSummary {
        book_id: book_id.to_string(),
        levels: measures.iter().map(|m| (m.h, m.summary())).collect(),
        rs: rs_stats(&signature),
    };
    Ok((measures, signature, summary))
}

/// Network modelling and characterization of an organized text.
pub fn analyze_organized(o: &OrganizedText, params: &NetworkParams, depths: &[usize]) -> Result<BookAnalysis> {
    params.validate()?;
    o.check_min_len(params.delta)?;
    let start = Instant::now();
    let network = build_network(o, params.delta, params.avg_degree)?;
    let network_modelling = start.elapsed();
    let start = Instant::now();
    let (measures, signature, summary) = characterize(&o.book_id, &network, depths)?;
    let characterization = start.elapsed();
    Ok(BookAnalysis {
        network,
        measures,
        signature,
        summary,
        timings: StageTimings { text_processing: Duration::ZERO, network_modelling, characterization },
    })
}

/// Full pipeline from raw text.
pub fn analyze_book(
    raw: &RawBook,
    sidecar: Option<&AnnotationSidecar>,
    pre: &Preprocessor,
    params: &NetworkParams,
    depths: &[usize],
) -> Result<(OrganizedText, BookAnalysis)> {
    let start = Instant::now();
    let organized = pre.organize(raw, sidecar)?;
    let text_processing = start.elapsed();
    let mut analysis = analyze_organized(&organized, params, depths)?;
    analysis.timings.text_processing = text_processing;
    Ok((organized, analysis))
}
