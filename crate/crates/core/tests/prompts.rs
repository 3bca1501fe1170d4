use essay_audit_core::llm::{build_fewshot_cot_prompt, build_zero_shot_prompt, FewShotExample};
use essay_audit_core::ScoreScale;

const DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/prompts");

fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{DIR}/{name}")).unwrap()
}

fn examples() -> Vec<FewShotExample> {
    serde_json::from_str(&fixture("examples.json")).unwrap()
}

#[test]
fn zero_shot_matches_golden_bytes() {
    let prompt = build_zero_shot_prompt(&fixture("essay.txt"), &fixture("rubric.txt")).unwrap();
    assert_eq!(prompt.as_bytes(), fixture("zero_shot.golden").as_bytes());
}

#[test]
fn fewshot_matches_golden_bytes() {
    let scale = ScoreScale::new(1, 6).unwrap();
    let ex = examples();
    assert_eq!(ex.len(), 12);
    let prompt = build_fewshot_cot_prompt(&fixture("essay.txt"), &fixture("rubric.txt"), &ex, scale).unwrap();
    assert_eq!(prompt.as_bytes(), fixture("fewshot_cot.golden").as_bytes());
    let again = build_fewshot_cot_prompt(&fixture("essay.txt"), &fixture("rubric.txt"), &ex, scale).unwrap();
    assert_eq!(prompt, again);
}

#[test]
fn single_example_prompt() {
    let scale = ScoreScale::new(1, 6).unwrap();
    let ex = [FewShotExample { essay: "Short essay.".into(), score: 3 }];
    let prompt = build_fewshot_cot_prompt("Target.", "Rubric.", &ex, scale).unwrap();
    assert_eq!(prompt.matches("Based on the rubric, the student earned a score of: 3").count(), 1);
}
