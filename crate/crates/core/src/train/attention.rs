use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::Label;
use crate::model::AttentionReport;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ClassSample {
    /// Sampled node ids, grouped by class and ascending within a class.
    pub ids: Vec<usize>,
    /// Classes with fewer than the requested members: `(class, available)`.
    pub short: Vec<(usize, usize)>,
}

/// Draws up to `per_class` nodes of every class in `0..classes`. A class with
/// fewer members contributes all of them and is listed in `short`.
pub fn sample_per_class(labels: &[usize], classes: usize, per_class: usize, seed: u64) -> ClassSample {
    let mut by_class: BTreeMap<usize, Vec<usize>> = (0..classes).map(|c| (c, Vec::new())).collect();
    for (i, &l) in labels.iter().enumerate() {
        if let Some(v) = by_class.get_mut(&l) {
            v.push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = Vec::new();
    let mut short = Vec::new();
    for (c, mut members) in by_class {
        if members.len() < per_class {
            short.push((c, members.len()));
        }
        members.shuffle(&mut rng);
        members.truncate(per_class);
        members.sort_unstable();
        ids.extend(members);
    }
    ClassSample { ids, short }
}

/// One row per sampled node: `node_id,label,c_1..c_K`. `report` must cover
/// exactly the nodes of `ids`, in the same order.
pub fn attention_csv(report: &AttentionReport, ids: &[usize], labels: &[usize]) -> Result<String> {
    if report.num_nodes() != ids.len() && report.hops > 0 {
        return Err(Error::shape(format!("report has {} nodes, {} ids given", report.num_nodes(), ids.len())));
    }
    let mut s = String::from("node_id,label");
    for k in 1..=report.hops {
        s.push_str(&format!(",c_{k}"));
    }
    s.push('\n');
    for (row, &id) in ids.iter().enumerate() {
        let label = labels
            .get(id)
            .and_then(|&l| Label::from_index(l))
            .ok_or_else(|| Error::InvalidArgument(format!("node {id} has no valid label")))?;
        s.push_str(&format!("{id},{label}"));
        if report.hops > 0 {
            for c in report.node_scores(row) {
                s.push_str(&format!(",{c:e}"));
            }
        }
        s.push('\n');
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_seeded_and_capped() {
        let labels: Vec<usize> = (0..50).map(|i| if i < 5 { 1 } else { i % 4 }).collect();
        let a = sample_per_class(&labels, 4, 10, 7);
        assert_eq!(a, sample_per_class(&labels, 4, 10, 7));
        assert_eq!(a.ids.len(), 40);
        assert!(a.short.is_empty());
        let b = sample_per_class(&labels, 4, 100, 7);
        assert_eq!(b.ids.len(), 50);
        assert_eq!(b.short.len(), 4);
    }

    #[test]
    fn csv_layout() {
        let r = AttentionReport { hops: 2, scores: vec![0.25, 0.75], attention: vec![] };
        let csv = attention_csv(&r, &[3], &[0, 0, 0, 1]).unwrap();
        assert_eq!(csv, "node_id,label,c_1,c_2\n3,xor,2.5e-1,7.5e-1\n");
    }
}
