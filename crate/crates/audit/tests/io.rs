use std::path::Path;

use essay_audit::io::{load_corpus, load_predictions, write_corpus, write_predictions, ColumnMapping};
use essay_audit::synth::{generate_corpus, SynthOptions};
use essay_audit::AuditError;
use essay_audit_core::{Attribute, PredictionRecord, ScoreScale};

fn scale() -> ScoreScale {
    ScoreScale::new(1, 6).unwrap()
}

const HEADER: &str = "essay_id,full_text,prompt_name,task_type,holistic_score,word_count,split,gender\n";

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn only_gender() -> ColumnMapping {
    ColumnMapping {
        grade_level: None,
        ell_status: None,
        race_ethnicity: None,
        economic_status: None,
        disability_status: None,
        ..ColumnMapping::default()
    }
}

#[test]
fn corpus_round_trips() {
    let d = tempfile::tempdir().unwrap();
    let mut records = generate_corpus(&SynthOptions { essays_per_prompt: 30, ..Default::default() });
    records[0].full_text = "Quoted \"text\", with a comma\nand a newline.".into();
    let p = d.path().join("c.csv");
    write_corpus(&p, &records, &ColumnMapping::default()).unwrap();
    let back = load_corpus(&p, &ColumnMapping::default(), scale()).unwrap();
    assert_eq!(back.records, records);
}

#[test]
fn bad_score_names_the_data_row() {
    let d = tempfile::tempdir().unwrap();
    let mut text = String::from(HEADER);
    for i in 1..=50 {
        let score = if i == 42 { "seven" } else { "3" };
        text.push_str(&format!("e{i},Some text.,p,independent,{score},2,train,F\n"));
    }
    let p = write(d.path(), "c.csv", &text);
    match load_corpus(&p, &only_gender(), scale()) {
        Err(AuditError::Row { row, message, .. }) => {
            assert_eq!(row, 42);
            assert!(message.contains("seven"), "{message}");
        }
        other => panic!("expected a row error, got {other:?}"),
    }
}

#[test]
fn out_of_scale_score_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let p = write(d.path(), "c.csv", &format!("{HEADER}e1,Text.,p,independent,9,1,train,F\n"));
    assert!(matches!(load_corpus(&p, &only_gender(), scale()), Err(AuditError::Row { row: 1, .. })));
}

#[test]
fn missing_column_is_named() {
    let d = tempfile::tempdir().unwrap();
    let p = write(d.path(), "c.csv", "essay_id,full_text\ne1,Text.\n");
    match load_corpus(&p, &ColumnMapping::default(), scale()) {
        Err(AuditError::MissingColumn { column, .. }) => assert_eq!(column, "prompt_name"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn duplicate_ids_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    let body = "e1,A.,p,independent,3,1,train,F\ne1,B.,p,independent,3,1,test,M\n";
    let p = write(d.path(), "c.csv", &format!("{HEADER}{body}"));
    assert!(matches!(
        load_corpus(&p, &only_gender(), scale()),
        Err(AuditError::DuplicateId { row: 2, .. })
    ));
}

#[test]
fn renamed_columns_and_blank_demographics() {
    let d = tempfile::tempdir().unwrap();
    let text = "id,essay,prompt,type,score,words,part,sex\ne1,Text here.,p,source_based,2,2,test,\n";
    let p = write(d.path(), "c.csv", text);
    let mapping = ColumnMapping {
        essay_id: "id".into(),
        full_text: "essay".into(),
        prompt_name: "prompt".into(),
        task_type: "type".into(),
        holistic_score: "score".into(),
        word_count: "words".into(),
        split: "part".into(),
        gender: Some("sex".into()),
        ..only_gender()
    };
    let c = load_corpus(&p, &mapping, scale()).unwrap();
    assert!(!c.records[0].demographics.is_known(Attribute::Gender));
}

#[test]
fn predictions_round_trip_and_header_only() {
    let d = tempfile::tempdir().unwrap();
    let mut a = PredictionRecord::new("e1", 3, 4);
    a.confidence = Some(0.75);
    a.rationale = Some("Predicted score = 4.\nClear thesis, \"weak\" evidence.".into());
    let preds = vec![a, PredictionRecord::new("e2", 1, 1)];
    let p = d.path().join("p.csv");
    write_predictions(&p, &preds).unwrap();
    assert_eq!(load_predictions(&p, scale()).unwrap(), preds);

    let empty = write(d.path(), "e.csv", "essay_id,true_score,predicted_score\n");
    assert!(load_predictions(&empty, scale()).unwrap().is_empty());
}
