//! Text ingestion: cleaning, paragraph segmentation, token extraction and
//! seeded paragraph shuffling.
//!
//! Role-tagged lemmas come either from an annotation sidecar produced by an
//! external parser, or from the built-in fallback (stopword removal followed
//! by Snowball stemming, every token tagged [`Role::Fallback`]).

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stopword list compiled into the binary.
pub const EMBEDDED_STOPWORDS: &str = include_str!("stopwords_en.txt");

/// Lines whose trimmed content starts with `CHAPTER`/`Chapter`, or consists of a
/// bare Roman numeral (optionally followed by a period).
pub const DEFAULT_CHAPTER_PATTERN: &str = r"^(?:CHAPTER|Chapter)\b|^[IVXLCDM]+\.?$";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawBook {
    pub id: String,
    pub text: String,
    pub genres: Vec<String>,
}

impl RawBook {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        RawBook { id: id.into(), text: text.into(), genres: Vec::new() }
    }

    pub fn with_genres(mut self, genres: Vec<String>) -> Self {
        self.genres = genres;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Subject,
    Verb,
    DirectObject,
    Fallback,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Subject => "subject",
            Role::Verb => "verb",
            Role::DirectObject => "direct-object",
            Role::Fallback => "fallback",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "subject" => Ok(Role::Subject),
            "verb" => Ok(Role::Verb),
            "direct-object" => Ok(Role::DirectObject),
            "fallback" => Ok(Role::Fallback),
            other => Err(format!("unknown role {other:?}")),
        }
    }
}

/// A lemma with its syntactic role. Serialized as a `["lemma", "role"]` pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(String, Role)", into = "(String, Role)")]
pub struct Token {
    pub lemma: String,
    pub role: Role,
}

impl Token {
    pub fn new(lemma: impl Into<String>, role: Role) -> Self {
        Token { lemma: lemma.into(), role }
    }
}

impl From<(String, Role)> for Token {
    fn from((lemma, role): (String, Role)) -> Self {
        Token { lemma, role }
    }
}

impl From<Token> for (String, Role) {
    fn from(t: Token) -> Self {
        (t.lemma, t.role)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Paragraph {
    pub index: usize,
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Annotated,
    Fallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrganizedText {
    pub book_id: String,
    pub paragraphs: Vec<Paragraph>,
    pub provenance: Provenance,
    pub shuffle_seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct OrganizedTextFile {
    book_id: String,
    provenance: Provenance,
    shuffle_seed: Option<u64>,
    paragraphs: Vec<Vec<Token>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

impl OrganizedText {
    pub fn len(&self) -> usize {
        self.paragraphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paragraphs.is_empty()
    }

    /// Serializes to the `<book>.organized.json` layout. `meta`, when given, is
    /// written as an extra `"meta"` field after the paragraphs.
    pub fn to_json(&self, meta: Option<serde_json::Value>) -> Result<String> {
        let file = OrganizedTextFile {
            book_id: self.book_id.clone(),
            provenance: self.provenance,
            shuffle_seed: self.shuffle_seed,
            paragraphs: self.paragraphs.iter().map(|p| p.tokens.clone()).collect(),
            meta,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: OrganizedTextFile = serde_json::from_str(s)?;
        let paragraphs =
            file.paragraphs.into_iter().enumerate().map(|(index, tokens)| Paragraph { index, tokens }).collect();
        Ok(OrganizedText {
            book_id: file.book_id,
            paragraphs,
            provenance: file.provenance,
            shuffle_seed: file.shuffle_seed,
        })
    }

    /// Checks that the text is long enough for windows of radius `delta`.
    pub fn check_min_len(&self, delta: usize) -> Result<()> {
        let needed = 2 * delta + 2;
        if self.len() < needed {
            return Err(Error::DegenerateInput(format!(
                "{}: {} paragraphs, at least {needed} needed for delta={delta}",
                self.book_id,
                self.len()
            )));
        }
        Ok(())
    }
}

/// Per-paragraph role-tagged lemmas from an external parser.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnotationSidecar {
    pub records: Vec<Vec<Token>>,
}

#[derive(Deserialize)]
struct SidecarRecord {
    tokens: Vec<(String, String)>,
}

impl AnnotationSidecar {
    /// Parses `<book>.annotations.jsonl`: one `{"tokens": [["lemma","role"], ...]}`
    /// object per line. Blank lines are skipped.
    pub fn parse_jsonl(input: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SidecarRecord =
                serde_json::from_str(line).map_err(|e| Error::Sidecar { line: line_no, message: e.to_string() })?;
            let mut tokens = Vec::with_capacity(rec.tokens.len());
            for (lemma, role) in rec.tokens {
                let role = match role.as_str() {
                    "subject" => Role::Subject,
                    "verb" => Role::Verb,
                    "direct-object" => Role::DirectObject,
                    other => {
                        return Err(Error::Sidecar {
                            line: line_no,
                            message: format!("role must be subject, verb or direct-object, got {other:?}"),
                        })
                    }
                };
                tokens.push(Token { lemma, role });
            }
            records.push(tokens);
        }
        Ok(AnnotationSidecar { records })
    }
}

/// Compiled chapter-marker matcher, applied to trimmed lines.
#[derive(Debug, Clone)]
pub struct ChapterPattern(Regex);

impl ChapterPattern {
    pub fn new(pattern: &str) -> Result<Self> {
        Ok(ChapterPattern(Regex::new(pattern)?))
    }

    pub fn is_marker(&self, line: &str) -> bool {
        self.0.is_match(line.trim())
    }
}

impl Default for ChapterPattern {
    fn default() -> Self {
        ChapterPattern(Regex::new(DEFAULT_CHAPTER_PATTERN).expect("default chapter pattern"))
    }
}

/// Fallback tokenizer: lowercase, strip punctuation, drop stopwords, stem.
pub struct Tokenizer {
    stopwords: HashSet<String>,
    stemmer: Stemmer,
}

impl fmt::Debug for Tokenizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tokenizer").field("stopwords", &self.stopwords.len()).finish()
    }
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer::with_stopwords(EMBEDDED_STOPWORDS)
    }
}

impl Tokenizer {
    /// Builds a tokenizer from a newline-separated stopword list (`#` comments allowed).
    /// Entries are normalized the same way as text words, so `don't` matches `dont`.
    pub fn with_stopwords(list: &str) -> Self {
        let stopwords = list
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .flat_map(|l| words(l).collect::<Vec<_>>())
            .collect();
        Tokenizer { stopwords, stemmer: Stemmer::create(Algorithm::English) }
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(word)
    }

    pub fn tokenize(&self, text: &str) -> Vec<Token> {
        words(text)
            .filter(|w| !self.stopwords.contains(w))
            .map(|w| self.stemmer.stem(&w).into_owned())
            .filter(|s| !s.is_empty())
            .map(|lemma| Token { lemma, role: Role::Fallback })
            .collect()
    }
}

/// Lowercased alphanumeric words. Apostrophes are deleted rather than split on.
fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '\u{2019}'))
        .map(|w| w.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect::<String>())
        .filter(|w| !w.is_empty())
}

/// Removes underscores and chapter-marker lines. Blank lines are kept so that
/// paragraph boundaries survive.
pub fn clean_text(raw: &RawBook, chapters: &ChapterPattern) -> Result<String> {
    if raw.text.trim().is_empty() {
        return Err(Error::DegenerateInput(format!("{}: empty text", raw.id)));
    }
    let without_underscores = raw.text.replace('_', "");
    let cleaned = without_underscores.lines().filter(|line| !chapters.is_marker(line)).collect::<Vec<_>>().join("\n");
    if cleaned.trim().is_empty() {
        return Err(Error::DegenerateInput(format!("{}: nothing left after cleaning", raw.id)));
    }
    Ok(cleaned)
}

/// Splits on runs of blank lines; paragraphs are trimmed and empty ones dropped.
pub fn segment_paragraphs(cleaned: &str) -> Result<Vec<String>> {
    let mut paragraphs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in cleaned.lines() {
        if line.trim().is_empty() {
            flush(&mut current, &mut paragraphs);
        } else {
            current.push(line);
        }
    }
    flush(&mut current, &mut paragraphs);
    if paragraphs.is_empty() {
        return Err(Error::DegenerateInput("no paragraphs found".into()));
    }
    Ok(paragraphs)
}

fn flush(current: &mut Vec<&str>, out: &mut Vec<String>) {
    if current.is_empty() {
        return;
    }
    let p = current.join("\n");
    let p = p.trim();
    if !p.is_empty() {
        out.push(p.to_string());
    }
    current.clear();
}

/// Lowercases, trims and strips underscores from an annotated lemma.
fn normalize_lemma(lemma: &str) -> String {
    lemma.trim().replace('_', "").to_lowercase()
}

/// Produces the token list of one paragraph, preferring the annotation record.
pub fn extract_tokens(index: usize, text: &str, annotation: Option<&[Token]>, tokenizer: &Tokenizer) -> Paragraph {
    let tokens = match annotation {
        Some(record) => record
            .iter()
            .map(|t| Token { lemma: normalize_lemma(&t.lemma), role: t.role })
            .filter(|t| !t.lemma.is_empty())
            .collect(),
        None => tokenizer.tokenize(text),
    };
    Paragraph { index, tokens }
}

#[derive(Debug, Default)]
pub struct Preprocessor {
    pub chapters: ChapterPattern,
    pub tokenizer: Tokenizer,
}

impl Preprocessor {
    pub fn new(chapters: ChapterPattern, tokenizer: Tokenizer) -> Self {
        Preprocessor { chapters, tokenizer }
    }

    /// clean → segment → extract. A sidecar, when supplied, must have exactly
    /// one record per cleaned paragraph.
    pub fn organize(&self, raw: &RawBook, sidecar: Option<&AnnotationSidecar>) -> Result<OrganizedText> {
        let cleaned = clean_text(raw, &self.chapters)?;
        let texts = segment_paragraphs(&cleaned)?;
        if let Some(sc) = sidecar {
            if sc.records.len() != texts.len() {
                return Err(Error::SidecarLength { records: sc.records.len(), paragraphs: texts.len() });
            }
        }
        let paragraphs = texts
            .iter()
            .enumerate()
            .map(|(i, text)| {
                let record = sidecar.map(|sc| sc.records[i].as_slice());
                extract_tokens(i, text, record, &self.tokenizer)
            })
            .collect();
        Ok(OrganizedText {
            book_id: raw.id.clone(),
            paragraphs,
            provenance: if sidecar.is_some() { Provenance::Annotated } else { Provenance::Fallback },
            shuffle_seed: None,
        })
    }
}

/// Seeded Fisher-Yates permutation of the paragraphs. Token lists are untouched;
/// indices are reassigned in the new order.
pub fn shuffle_paragraphs(o: &OrganizedText, seed: u64) -> Result<OrganizedText> {
    if o.len() < 2 {
        return Err(Error::DegenerateInput(format!("{}: cannot shuffle fewer than 2 paragraphs", o.book_id)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut paragraphs = o.paragraphs.clone();
    paragraphs.shuffle(&mut rng);
    for (i, p) in paragraphs.iter_mut().enumerate() {
        p.index = i;
    }
    Ok(OrganizedText { book_id: o.book_id.clone(), paragraphs, provenance: o.provenance, shuffle_seed: Some(seed) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn book(text: &str) -> RawBook {
        RawBook::new("b", text)
    }

    #[test]
    fn underscores_removed() {
        let out = clean_text(&book("a_b_c"), &ChapterPattern::default()).unwrap();
        assert_eq!(out, "abc");
    }

    #[test]
    fn chapter_lines_removed() {
        let out = clean_text(&book("Para one.\n\nCHAPTER II\n\nPara two."), &ChapterPattern::default()).unwrap();
        assert_eq!(segment_paragraphs(&out).unwrap(), vec!["Para one.", "Para two."]);

        let out =
            clean_text(&book("One.\n\nChapter 3. The Storm\n\n  XIV.\n\nTwo."), &ChapterPattern::default()).unwrap();
        assert_eq!(segment_paragraphs(&out).unwrap(), vec!["One.", "Two."]);
    }

    #[test]
    fn roman_numeral_must_stand_alone() {
        let out = clean_text(&book("I went home.\n\nVIVID colours"), &ChapterPattern::default()).unwrap();
        assert_eq!(segment_paragraphs(&out).unwrap(), vec!["I went home.", "VIVID colours"]);
    }

    #[test]
    fn plain_text_unchanged() {
        let text = "Nothing to clean here.\n\nSecond paragraph.";
        assert_eq!(clean_text(&book(text), &ChapterPattern::default()).unwrap(), text);
    }

    #[test]
    fn empty_after_cleaning_is_degenerate() {
        let err = clean_text(&book("CHAPTER I\n\n___\n"), &ChapterPattern::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)));
        assert!(clean_text(&book("   \n"), &ChapterPattern::default()).is_err());
    }

    #[test]
    fn custom_chapter_pattern() {
        let pat = ChapterPattern::new(r"^ACT [IVX]+\.$").unwrap();
        let out = clean_text(&book("ACT I.\n\nWho's there?\n\nCHAPTER I"), &pat).unwrap();
        assert_eq!(segment_paragraphs(&out).unwrap(), vec!["Who's there?", "CHAPTER I"]);
        assert!(ChapterPattern::new("(").is_err());
    }

    #[test]
    fn segmentation() {
        assert_eq!(segment_paragraphs("A\n\nB\n\n\nC").unwrap(), vec!["A", "B", "C"]);
        assert_eq!(segment_paragraphs("single paragraph").unwrap(), vec!["single paragraph"]);
        assert_eq!(segment_paragraphs("  \n\nA\n\n  ").unwrap(), vec!["A"]);
        assert_eq!(segment_paragraphs("a\nb\n \t\nc").unwrap(), vec!["a\nb", "c"]);
        assert!(segment_paragraphs(" \n\n ").is_err());
    }

    #[test]
    fn annotation_tokens_lowercased() {
        let record = vec![Token::new("think", Role::Verb), Token::new("Alice", Role::Subject)];
        let p = extract_tokens(0, "Alice thought.", Some(&record), &Tokenizer::default());
        assert_eq!(p.tokens, vec![Token::new("think", Role::Verb), Token::new("alice", Role::Subject)]);
    }

    #[test]
    fn fallback_tokens() {
        // Snowball English output for these words, frozen as the fixture.
        let p = extract_tokens(3, "The cat sat", None, &Tokenizer::default());
        assert_eq!(p.index, 3);
        assert_eq!(p.tokens, vec![Token::new("cat", Role::Fallback), Token::new("sat", Role::Fallback)]);

        let p = extract_tokens(0, "Running horses, quickly jumped!", None, &Tokenizer::default());
        let lemmas: Vec<_> = p.tokens.iter().map(|t| t.lemma.as_str()).collect();
        assert_eq!(lemmas, vec!["run", "hors", "quick", "jump"]);
    }

    #[test]
    fn fallback_handles_apostrophes_and_stopwords() {
        let tk = Tokenizer::default();
        assert!(tk.is_stopword("dont"));
        let p = extract_tokens(0, "Don't you know who's there?", None, &tk);
        let lemmas: Vec<_> = p.tokens.iter().map(|t| t.lemma.as_str()).collect();
        assert_eq!(lemmas, vec!["know", "whos"]);
    }

    #[test]
    fn only_stopwords_gives_empty_paragraph() {
        let p = extract_tokens(0, "the and of to", None, &Tokenizer::default());
        assert!(p.tokens.is_empty());
    }

    #[test]
    fn custom_stopwords() {
        let tk = Tokenizer::with_stopwords("# mine\ncat\n");
        let p = extract_tokens(0, "the cat", None, &tk);
        assert_eq!(p.tokens, vec![Token::new("the", Role::Fallback)]);
    }

    #[test]
    fn sidecar_parsing() {
        let sc = AnnotationSidecar::parse_jsonl(
            "{\"tokens\": [[\"think\",\"verb\"],[\"Alice\",\"subject\"]]}\n\n{\"tokens\": []}\n",
        )
        .unwrap();
        assert_eq!(sc.records.len(), 2);
        assert_eq!(sc.records[0][1], Token::new("Alice", Role::Subject));

        let err = AnnotationSidecar::parse_jsonl("{\"tokens\": [[\"x\",\"fallback\"]]}").unwrap_err();
        assert!(matches!(err, Error::Sidecar { line: 1, .. }));
        let err = AnnotationSidecar::parse_jsonl("{}\n{\"tokens\": 3}").unwrap_err();
        assert!(matches!(err, Error::Sidecar { line: 1, .. }));
    }

    #[test]
    fn sidecar_length_mismatch() {
        let sc = AnnotationSidecar { records: vec![vec![Token::new("a", Role::Verb)]] };
        let err = Preprocessor::default().organize(&book("one\n\ntwo"), Some(&sc)).unwrap_err();
        assert!(matches!(err, Error::SidecarLength { records: 1, paragraphs: 2 }));
    }

    #[test]
    fn organize_with_sidecar() {
        let sc = AnnotationSidecar::parse_jsonl(
            "{\"tokens\": [[\"New_York\",\"subject\"]]}\n{\"tokens\": [[\"go\",\"verb\"]]}",
        )
        .unwrap();
        let o = Preprocessor::default().organize(&book("one\n\ntwo"), Some(&sc)).unwrap();
        assert_eq!(o.provenance, Provenance::Annotated);
        assert_eq!(o.paragraphs[0].tokens, vec![Token::new("newyork", Role::Subject)]);
    }

    #[test]
    fn organized_json_layout() {
        let o = Preprocessor::default().organize(&book("The cat sat.\n\nthe"), None).unwrap();
        let json = o.to_json(None).unwrap();
        assert_eq!(
            json,
            r#"{"bookId":"b","provenance":"fallback","shuffleSeed":null,"paragraphs":[[["cat","fallback"],["sat","fallback"]],[]]}"#
        );
        assert_eq!(OrganizedText::from_json(&json).unwrap(), o);
    }

    #[test]
    fn min_len_check() {
        let o = Preprocessor::default().organize(&book("a\n\nb\n\nc"), None).unwrap();
        assert!(o.check_min_len(1).is_err());
        let o = Preprocessor::default().organize(&book("a\n\nb\n\nc\n\nd"), None).unwrap();
        assert!(o.check_min_len(1).is_ok());
    }

    fn numbered(n: usize) -> OrganizedText {
        OrganizedText {
            book_id: "n".into(),
            paragraphs: (0..n)
                .map(|i| Paragraph { index: i, tokens: vec![Token::new(format!("w{i}"), Role::Fallback)] })
                .collect(),
            provenance: Provenance::Fallback,
            shuffle_seed: None,
        }
    }

    #[test]
    fn shuffle_is_deterministic() {
        let o = numbered(50);
        let a = shuffle_paragraphs(&o, 7).unwrap();
        let b = shuffle_paragraphs(&o, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shuffle_seed, Some(7));
        assert_ne!(a.paragraphs, o.paragraphs);
    }

    #[test]
    fn shuffle_two_paragraphs() {
        let o = numbered(2);
        let mut seen = HashSet::new();
        for seed in 0..64 {
            let s = shuffle_paragraphs(&o, seed).unwrap();
            seen.insert(s.paragraphs.iter().map(|p| p.tokens[0].lemma.clone()).collect::<Vec<_>>());
        }
        assert_eq!(seen.len(), 2);
        assert!(shuffle_paragraphs(&numbered(1), 0).is_err());
    }

    proptest! {
        #[test]
        fn shuffle_preserves_token_multiset(n in 2usize..40, seed in any::<u64>()) {
            let o = numbered(n);
            let s = shuffle_paragraphs(&o, seed).unwrap();
            prop_assert_eq!(s.len(), n);
            for (i, p) in s.paragraphs.iter().enumerate() {
                prop_assert_eq!(p.index, i);
            }
            let mut before: Vec<_> = o.paragraphs.iter().map(|p| p.tokens.clone()).collect();
            let mut after: Vec<_> = s.paragraphs.iter().map(|p| p.tokens.clone()).collect();
            before.sort();
            after.sort();
            prop_assert_eq!(before, after);
        }

        #[test]
        fn lemmas_are_normalized(text in "[A-Za-z_ ,.'!\n-]{0,200}") {
            let p = extract_tokens(0, &text, None, &Tokenizer::default());
            for t in &p.tokens {
                prop_assert!(!t.lemma.is_empty());
                prop_assert!(!t.lemma.contains('_'));
                prop_assert_eq!(t.lemma.trim(), t.lemma.as_str());
                prop_assert!(!t.lemma.chars().any(char::is_uppercase));
            }
        }

        #[test]
        fn preprocessing_is_deterministic(text in "[a-z ]{1,20}(\n\n[a-z _]{1,20}){0,6}") {
            let pp = Preprocessor::default();
            let raw = RawBook::new("x", text);
            if let Ok(a) = pp.organize(&raw, None) {
                let b = pp.organize(&raw, None).unwrap();
                prop_assert_eq!(a.to_json(None).unwrap(), b.to_json(None).unwrap());
            }
        }
    }
}
