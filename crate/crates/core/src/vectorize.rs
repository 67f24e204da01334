//! Paragraph windows, tf-idf weighting and cosine similarity over sparse vectors.

use std::collections::{BTreeMap, HashMap};

use crate::corpus::OrganizedText;
use crate::error::{Error, Result};

/// Lemma → occurrence count.
pub type TokenCounts = BTreeMap<String, u32>;

/// Bag of lemmas from paragraphs `center-delta ..= center+delta`, clamped to the text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParagraphWindow {
    pub center: usize,
    pub delta: usize,
    pub counts: TokenCounts,
}

impl ParagraphWindow {
    /// Paragraph indices covered by the window.
    pub fn span(&self, n: usize) -> std::ops::RangeInclusive<usize> {
        self.center.saturating_sub(self.delta)..=(self.center + self.delta).min(n - 1)
    }
}

pub fn build_windows(o: &OrganizedText, delta: usize) -> Result<Vec<ParagraphWindow>> {
    if delta < 1 {
        return Err(Error::InvalidParameter("delta must be at least 1".into()));
    }
    let n = o.len();
    if n <= 2 * delta + 1 {
        return Err(Error::DegenerateInput(format!(
            "{}: {n} paragraphs, more than {} needed for delta={delta}",
            o.book_id,
            2 * delta + 1
        )));
    }
    let windows = (0..n)
        .map(|center| {
            let mut counts = TokenCounts::new();
            let lo = center.saturating_sub(delta);
            let hi = (center + delta).min(n - 1);
            for p in &o.paragraphs[lo..=hi] {
                for t in &p.tokens {
                    *counts.entry(t.lemma.clone()).or_insert(0) += 1;
                }
            }
            ParagraphWindow { center, delta, counts }
        })
        .collect();
    Ok(windows)
}

/// Sorted `(column, weight)` pairs with strictly increasing columns and no zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    /// Builds a vector from arbitrary pairs; sorts, sums duplicate columns and drops zeros.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|&(c, _)| c);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (c, w) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == c => last.1 += w,
                _ => entries.push((c, w)),
            }
        }
        entries.retain(|&(_, w)| w != 0.0);
        SparseVector { entries }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(u: &SparseVector, v: &SparseVector) -> f64 {
    let denom = u.norm() * v.norm();
    if denom == 0.0 {
        return 0.0;
    }
    (u.dot(v) / denom).clamp(0.0, 1.0)
}

/// Document frequencies over a fixed document set. Vocabulary columns follow
/// lexicographic lemma order.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    vocabulary: HashMap<String, u32>,
    doc_freq: Vec<u32>,
    n_docs: usize,
}

impl TfIdfModel {
    pub fn fit<'a, I>(docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a TokenCounts>,
    {
        let mut df: BTreeMap<&'a str, u32> = BTreeMap::new();
        let mut n_docs = 0;
        for doc in docs {
            n_docs += 1;
            for (lemma, &count) in doc {
                if count > 0 {
                    *df.entry(lemma.as_str()).or_insert(0) += 1;
                }
            }
        }
        if df.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let mut vocabulary = HashMap::with_capacity(df.len());
        let mut doc_freq = Vec::with_capacity(df.len());
        for (col, (lemma, f)) in df.into_iter().enumerate() {
            vocabulary.insert(lemma.to_string(), col as u32);
            doc_freq.push(f);
        }
        Ok(TfIdfModel { vocabulary, doc_freq, n_docs })
    }

    pub fn vocabulary_len(&self) -> usize {
        self.doc_freq.len()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn column(&self, lemma: &str) -> Option<u32> {
        self.vocabulary.get(lemma).copied()
    }

    pub fn doc_freq(&self, lemma: &str) -> Option<u32> {
        self.column(lemma).map(|c| self.doc_freq[c as usize])
    }

    /// Smoothed idf: `ln((1 + N) / (1 + df)) + 1`, always ≥ 1.
    pub fn idf(&self, lemma: &str) -> Option<f64> {
        self.doc_freq(lemma).map(|df| idf(self.n_docs, df))
    }

    /// Raw-count tf times smoothed idf. Lemmas outside the vocabulary are ignored.
    pub fn vectorize(&self, counts: &TokenCounts) -> SparseVector {
        let pairs = counts
            .iter()
            .filter_map(|(lemma, &count)| {
                let col = *self.vocabulary.get(lemma)?;
                Some((col, count as f64 * idf(self.n_docs, self.doc_freq[col as usize])))
            })
            .collect();
        SparseVector::from_pairs(pairs)
    }
}

fn idf(n_docs: usize, df: u32) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

pub fn fit_tfidf(windows: &[ParagraphWindow]) -> Result<TfIdfModel> {
    TfIdfModel::fit(windows.iter().map(|w| &w.counts))
}

pub fn vectorize_window(w: &ParagraphWindow, model: &TfIdfModel) -> SparseVector {
    model.vectorize(&w.counts)
}
