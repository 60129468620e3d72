//! Annotation rows, automatic annotation against ground truth, and the
//! majority vote that turns three annotators into one metric row.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use hexar::scenario::{false_claims, names_root_cause, scenario};

use crate::grid::EvalRecord;
use crate::EvalError;

pub const ANNOTATORS: [u8; 3] = [1, 2, 3];
pub const ANNOTATIONS_HEADER: [&str; 4] = ["sample_id", "annotator_id", "root_cause", "incorrect_facts"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRow {
    pub sample_id: String,
    pub annotator_id: u8,
    pub root_cause: u8,
    pub incorrect_facts: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricRow {
    pub sample_id: String,
    pub root_cause_identified: u8,
    pub incorrect_facts_present: u8,
    pub explanation_accuracy: u8,
}

/// Correct only if the root cause is named and nothing false is claimed.
pub fn explanation_accuracy(root_cause_identified: u8, incorrect_facts_present: u8) -> u8 {
    u8::from(root_cause_identified == 1 && incorrect_facts_present == 0)
}

pub fn majority(labels: [u8; 3]) -> u8 {
    u8::from(labels.iter().filter(|&&l| l == 1).count() >= 2)
}

/// Labels every record from the scenario ground truth: root cause found when
/// the key phrase appears, incorrect facts when a contradicted claim does.
/// The three annotators agree by construction. Failed samples score 0/0.
pub fn auto_annotate(records: &[EvalRecord]) -> Result<Vec<AnnotationRow>, EvalError> {
    let mut rows = Vec::with_capacity(records.len() * 3);
    for r in records {
        let spec = scenario(r.scenario_id as u32)?;
        let root_cause = u8::from(names_root_cause(&spec, &r.explanation_text));
        let incorrect = u8::from(!false_claims(r.scenario_id, &r.explanation_text).is_empty());
        for annotator_id in ANNOTATORS {
            rows.push(AnnotationRow {
                sample_id: r.sample_id.clone(),
                annotator_id,
                root_cause,
                incorrect_facts: incorrect,
            });
        }
    }
    Ok(rows)
}

/// Merged metrics plus the share of (sample, metric) cells on which the
/// annotators were not unanimous.
#[derive(Debug, Clone, PartialEq)]
pub struct Vote {
    pub metrics: Vec<MetricRow>,
    pub disagreement_rate: f64,
}

/// Majority of the three annotators per sample, in order of first
/// appearance. Every sample needs exactly annotators 1, 2 and 3.
pub fn majority_vote(rows: &[AnnotationRow]) -> Result<Vote, EvalError> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_sample: BTreeMap<&str, BTreeMap<u8, &AnnotationRow>> = BTreeMap::new();
    for row in rows {
        if !ANNOTATORS.contains(&row.annotator_id) {
            return Err(EvalError::Schema(format!(
                "annotator_id must be 1, 2 or 3 (got {} for `{}`)",
                row.annotator_id, row.sample_id
            )));
        }
        if row.root_cause > 1 || row.incorrect_facts > 1 {
            return Err(EvalError::Schema(format!("non-binary label for `{}`", row.sample_id)));
        }
        let slot = by_sample.entry(&row.sample_id).or_insert_with(|| {
            order.push(&row.sample_id);
            BTreeMap::new()
        });
        if slot.insert(row.annotator_id, row).is_some() {
            return Err(EvalError::Schema(format!(
                "annotator {} labelled `{}` twice",
                row.annotator_id, row.sample_id
            )));
        }
    }

    let mut metrics = Vec::with_capacity(order.len());
    let mut split = 0usize;
    for id in &order {
        let labels = &by_sample[id];
        let mut rc = [0u8; 3];
        let mut inc = [0u8; 3];
        for (i, a) in ANNOTATORS.iter().enumerate() {
            let row = labels.get(a).ok_or_else(|| EvalError::MissingAnnotator {
                sample_id: (*id).to_owned(),
                annotator: *a,
            })?;
            rc[i] = row.root_cause;
            inc[i] = row.incorrect_facts;
        }
        split += [rc, inc]
            .iter()
            .filter(|l| !(l[0] == l[1] && l[1] == l[2]))
            .count();
        let (root_cause_identified, incorrect_facts_present) = (majority(rc), majority(inc));
        metrics.push(MetricRow {
            sample_id: (*id).to_owned(),
            root_cause_identified,
            incorrect_facts_present,
            explanation_accuracy: explanation_accuracy(root_cause_identified, incorrect_facts_present),
        });
    }
    let cells = 2 * metrics.len();
    Ok(Vote {
        disagreement_rate: if cells == 0 { 0.0 } else { split as f64 / cells as f64 },
        metrics,
    })
}

pub fn write_annotations<W: Write>(rows: &[AnnotationRow], out: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(ANNOTATIONS_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_annotations<R: Read>(input: R) -> Result<Vec<AnnotationRow>, EvalError> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != ANNOTATIONS_HEADER {
        return Err(EvalError::Schema(format!(
            "annotations header must be `{}`",
            ANNOTATIONS_HEADER.join(",")
        )));
    }
    reader
        .deserialize()
        .map(|row| row.map_err(|e| EvalError::Schema(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, a: u8, rc: u8, inc: u8) -> AnnotationRow {
        AnnotationRow {
            sample_id: id.into(),
            annotator_id: a,
            root_cause: rc,
            incorrect_facts: inc,
        }
    }

    #[test]
    fn truth_table() {
        assert_eq!(explanation_accuracy(1, 0), 1);
        assert_eq!(explanation_accuracy(1, 1), 0);
        assert_eq!(explanation_accuracy(0, 0), 0);
        assert_eq!(explanation_accuracy(0, 1), 0);
    }

    #[test]
    fn vote_and_disagreement() {
        let rows = vec![
            row("a", 1, 1, 0),
            row("a", 2, 1, 1),
            row("a", 3, 0, 0),
            row("b", 3, 1, 0),
            row("b", 1, 1, 0),
            row("b", 2, 1, 0),
        ];
        let v = majority_vote(&rows).unwrap();
        assert_eq!(v.metrics[0].sample_id, "a");
        assert_eq!((v.metrics[0].root_cause_identified, v.metrics[0].incorrect_facts_present), (1, 0));
        assert_eq!(v.metrics[0].explanation_accuracy, 1);
        assert_eq!(v.metrics[1].explanation_accuracy, 1);
        assert!((v.disagreement_rate - 0.5).abs() < 1e-12);
    }

    #[test]
    fn missing_and_duplicate_annotators() {
        let rows = vec![row("a", 1, 1, 0), row("a", 2, 1, 0)];
        assert!(matches!(
            majority_vote(&rows),
            Err(EvalError::MissingAnnotator { annotator: 3, .. })
        ));
        let rows = vec![row("a", 1, 1, 0), row("a", 1, 1, 0), row("a", 2, 1, 0)];
        assert!(matches!(majority_vote(&rows), Err(EvalError::Schema(_))));
        assert!(matches!(majority_vote(&[row("a", 4, 1, 0)]), Err(EvalError::Schema(_))));
        assert!(matches!(majority_vote(&[row("a", 1, 2, 0)]), Err(EvalError::Schema(_))));
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row("a", 1, 1, 0), row("a", 2, 0, 1)];
        let mut buf = Vec::new();
        write_annotations(&rows, &mut buf).unwrap();
        assert!(buf.starts_with(b"sample_id,annotator_id,root_cause,incorrect_facts\n"));
        assert_eq!(read_annotations(buf.as_slice()).unwrap(), rows);
    }
}
