//! Recurrence signature: gaps, along reading order, between nodes that carry
//! at least one similarity edge.

use serde::Serialize;

use crate::mesonet::MesoNetwork;
use crate::stats::{mean, population_std};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RecurrenceSignature {
    pub gaps: Vec<u32>,
}

/// Walks the nodes in order. At an incident node the counter is appended and
/// reset; the counter is then incremented before moving on. Whatever remains
/// after the last node is discarded. `on_append` sees the signature after each
/// append.
pub fn signature_with_trace(incident: &[bool], mut on_append: impl FnMut(&[u32])) -> RecurrenceSignature {
    let mut gaps = Vec::new();
    let mut counter = 0u32;
    for &hit in incident {
        if hit {
            gaps.push(counter);
            counter = 0;
            on_append(&gaps);
        }
        counter += 1;
    }
    RecurrenceSignature { gaps }
}

pub fn signature_from_incidence(incident: &[bool]) -> RecurrenceSignature {
    signature_with_trace(incident, |_| {})
}

pub fn recurrence_signature(g: &MesoNetwork) -> RecurrenceSignature {
    signature_from_incidence(&g.similarity_incidence())
}

/// The signature of the same network read back to front, derived from `rs`
/// alone: the first gap becomes the distance from the last incident node to the
/// end, followed by the remaining gaps in reverse.
pub fn reversed_signature(rs: &RecurrenceSignature, n: usize) -> RecurrenceSignature {
    if rs.gaps.is_empty() {
        return RecurrenceSignature::default();
    }
    let last = rs.gaps.iter().map(|&g| g as usize).sum::<usize>();
    let mut gaps = vec![(n - 1 - last) as u32];
    gaps.extend(rs.gaps[1..].iter().rev());
    RecurrenceSignature { gaps }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RsStats {
    pub mean: f64,
    pub std: f64,
    pub len: usize,
    pub empty: bool,
}

/// Mean and population standard deviation of the gaps; `(0, 0)` and `empty` for
/// an empty signature.
pub fn rs_stats(rs: &RecurrenceSignature) -> RsStats {
    let xs: Vec<f64> = rs.gaps.iter().map(|&g| g as f64).collect();
    RsStats { mean: mean(&xs), std: population_std(&xs), len: xs.len(), empty: xs.is_empty() }
}

impl RecurrenceSignature {
    /// `<book>.rs.csv` body: a `gap` header then one value per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gap\n");
        for g in &self.gaps {
            out.push_str(&g.to_string());
            out.push('\n');
        }
        out
    }
}
