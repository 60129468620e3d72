use hexar_eval::annotate::{majority, ANNOTATORS};
use hexar_eval::{majority_vote, read_annotations, AnnotationRow, EvalError};

#[test]
fn majority_vote_over_all_eight_label_patterns() {
    for pattern in 0u8..8 {
        let labels: Vec<u8> = (0..3).map(|i| (pattern >> i) & 1).collect();
        let ones = labels.iter().filter(|&&l| l == 1).count();
        let rows: Vec<AnnotationRow> = ANNOTATORS
            .iter()
            .zip(&labels)
            .map(|(&a, &l)| AnnotationRow {
                sample_id: "x".into(),
                annotator_id: a,
                root_cause: l,
                incorrect_facts: 1 - l,
            })
            .collect();
        let vote = majority_vote(&rows).unwrap();
        let m = &vote.metrics[0];
        let expected = u8::from(ones >= 2);
        assert_eq!(m.root_cause_identified, expected, "{labels:?}");
        assert_eq!(m.incorrect_facts_present, 1 - expected);
        assert_eq!(m.explanation_accuracy, expected);
        assert_eq!(majority([labels[0], labels[1], labels[2]]), expected);
        let unanimous = ones == 0 || ones == 3;
        assert_eq!(vote.disagreement_rate, if unanimous { 0.0 } else { 1.0 });
    }
}

#[test]
fn malformed_annotation_files_are_rejected() {
    let bad_header = "sample,annotator,rc,inc\nx,1,1,0\n";
    assert!(matches!(read_annotations(bad_header.as_bytes()), Err(EvalError::Schema(_))));
    let bad_value = "sample_id,annotator_id,root_cause,incorrect_facts\nx,1,yes,0\n";
    assert!(matches!(read_annotations(bad_value.as_bytes()), Err(EvalError::Schema(_))));
    let gap = "sample_id,annotator_id,root_cause,incorrect_facts\nx,1,1,0\nx,3,1,0\n";
    let rows = read_annotations(gap.as_bytes()).unwrap();
    assert!(matches!(
        majority_vote(&rows),
        Err(EvalError::MissingAnnotator { annotator: 2, .. })
    ));
}
