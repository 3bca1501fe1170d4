//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always reach stdout.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use essay_audit::client::{EssayInput, LlmClient, UreqTransport};
use essay_audit::config::FairnessSplit;
use essay_audit::pipeline::{accuracy_section, fairness_section};
use essay_audit::report::without_timestamps;
use essay_audit::synth::{generate_corpus, noisy_predictions, SynthOptions};
use essay_audit_core::boosting::{fit_classifier, fit_regressor, ClassWeighting, GbmConfig};
use essay_audit_core::explain::{
    permutation_importance, shapley_sample, FnScorer, ImportanceMetric, ImportanceOptions, Scorer,
};
use essay_audit_core::fairness::{group_rates, odds_gap_table, osa, PermutationOptions};
use essay_audit_core::linalg::Matrix;
use essay_audit_core::llm::{parse_score, LlmConfig, ScoringStrategy};
use essay_audit_core::metrics::{qwk_scores, r_squared};
use essay_audit_core::probe::{run_probe, ProbeOptions};
use essay_audit_core::{
    interpret_kappa, partition_by, Attribute, DemographicProfile, EssayRecord, PredictionRecord, ScoreScale, Split,
    TaskType,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scale6() -> ScoreScale {
    ScoreScale::new(1, 6).unwrap()
}

fn record(id: String, score: i32, demo: &[(Attribute, &str)]) -> EssayRecord {
    let mut demographics = DemographicProfile::default();
    for (a, v) in demo {
        demographics.set(*a, v);
    }
    EssayRecord {
        essay_id: id,
        full_text: "Text.".into(),
        prompt_name: "p".into(),
        task_type: TaskType::Independent,
        holistic_score: score,
        word_count: 1,
        split: Split::Test,
        demographics,
    }
}

/// Weighted kappa straight from its definition: observed and chance
/// matrices normalised to proportions, quadratic weights.
fn kappa_oracle(truth: &[i32], pred: &[i32], k: usize) -> f64 {
    let n = truth.len() as f64;
    let mut o = vec![vec![0.0; k]; k];
    for (t, p) in truth.iter().zip(pred) {
        o[(*t - 1) as usize][(*p - 1) as usize] += 1.0 / n;
    }
    let row: Vec<f64> = o.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<f64> = (0..k).map(|j| o.iter().map(|r| r[j]).sum()).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            let w = ((i as f64 - j as f64) / (k as f64 - 1.0)).powi(2);
            num += w * o[i][j];
            den += w * row[i] * col[j];
        }
    }
    1.0 - num / den
}

fn c1_qwk_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let t: Vec<i32> = (0..50).map(|_| rng.random_range(1..=6)).collect();
        let p: Vec<i32> = (0..50).map(|_| rng.random_range(1..=6)).collect();
        let lib = qwk_scores(&t, &p, scale6()).map_err(|e| e.to_string())?.kappa;
        worst = worst.max((lib - kappa_oracle(&t, &p, 6)).abs());
    }
    let elapsed = start.elapsed();
    check(worst <= 1e-12 && elapsed < Duration::from_secs(5), format!("max |diff| {worst:.1e}, {elapsed:.2?}"))
}

fn c2_qwk_degenerate() -> Outcome {
    let v: Vec<i32> = (0..60).map(|i| 1 + i % 6).collect();
    let same = qwk_scores(&v, &v, scale6()).map_err(|e| e.to_string())?;
    let single = qwk_scores(&[3; 20], &[3; 20], scale6()).map_err(|e| e.to_string())?;
    check(
        same.kappa == 1.0 && !same.degenerate && single.kappa == 1.0 && single.degenerate,
        format!("identical {} (degenerate {}), single pair {} (degenerate {})", same.kappa, same.degenerate, single.kappa, single.degenerate),
    )
}

fn c3_interpretation() -> Outcome {
    let probes = [-0.1, 0.20, 0.40, 0.60, 0.80, 1.0];
    let expected = ["poor", "slight", "fair", "moderate", "substantial", "almost perfect"];
    let got: Vec<&str> = probes.iter().map(|&k| interpret_kappa(k).map(|c| c.label()).unwrap_or("error")).collect();
    check(got == expected, format!("{got:?}"))
}

fn c4_zero_disparity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pairs: Vec<(i32, i32)> = (0..120).map(|i| (1 + i % 6, rng.random_range(1..=6))).collect();
    let mut preds = Vec::new();
    let mut recs = Vec::new();
    for g in ["F", "M"] {
        for (i, &(t, p)) in pairs.iter().enumerate() {
            let id = format!("{g}{i}");
            preds.push(PredictionRecord::new(id.clone(), t, p));
            recs.push(record(id, t, &[(Attribute::Gender, g)]));
        }
    }
    let part = partition_by(&recs, Attribute::Gender).map_err(|e| e.to_string())?;
    let table = odds_gap_table(&group_rates(&preds, &part, scale6()).map_err(|e| e.to_string())?);
    let gaps: Vec<Option<f64>> = table.entries.iter().map(|e| e.eo_gap).collect();
    check(gaps.iter().all(|g| *g == Some(0.0)), format!("eo gaps {gaps:?}"))
}

fn c5_counting_oracle() -> Outcome {
    // 200 records, three groups, predictions off by a group-dependent pattern
    let groups = ["A", "B", "C"];
    let mut preds = Vec::new();
    let mut recs = Vec::new();
    for i in 0..200i32 {
        let g = groups[(i % 3) as usize];
        let t = 1 + (i / 3 + i / 17) % 6;
        let p = match g {
            "A" => t,
            "B" if i % 4 == 0 => (t % 6) + 1,
            "B" => t,
            _ if i % 5 < 2 => (t + 1).min(6),
            _ => t,
        };
        preds.push(PredictionRecord::new(format!("e{i}"), t, p));
        recs.push(record(format!("e{i}"), t, &[(Attribute::RaceEthnicity, g)]));
    }
    let part = partition_by(&recs, Attribute::RaceEthnicity).map_err(|e| e.to_string())?;
    let rates = group_rates(&preds, &part, scale6()).map_err(|e| e.to_string())?;
    let table = odds_gap_table(&rates);
    let mut mismatches = 0;
    for k in 1..=6 {
        let mut tprs = Vec::new();
        let mut fprs = Vec::new();
        for (gi, g) in groups.iter().enumerate() {
            let members: Vec<&PredictionRecord> =
                preds.iter().enumerate().filter(|(i, _)| i % 3 == gi).map(|(_, p)| p).collect();
            let pos = members.iter().filter(|p| p.true_score == k).count();
            let tp = members.iter().filter(|p| p.true_score == k && p.predicted_score == k).count();
            let neg = members.len() - pos;
            let fp = members.iter().filter(|p| p.true_score != k && p.predicted_score == k).count();
            let tpr = (pos > 0).then(|| tp as f64 / pos as f64);
            let fpr = (neg > 0).then(|| fp as f64 / neg as f64);
            let lib = rates.class(g, k).ok_or("missing class")?;
            if lib.tpr != tpr || lib.fpr != fpr {
                mismatches += 1;
            }
            tprs.extend(tpr);
            fprs.extend(fpr);
        }
        let spread = |v: &[f64]| {
            let mut best = None;
            for a in v {
                for b in v {
                    if !std::ptr::eq(a, b) {
                        best = Some(best.map_or(a - b, |m: f64| m.max(a - b)));
                    }
                }
            }
            best
        };
        let entry = table.entries[(k - 1) as usize];
        if entry.tpr_gap != spread(&tprs) || entry.fpr_gap != spread(&fprs) || entry.tpr_gap.is_none() {
            mismatches += 1;
        }
    }
    check(mismatches == 0, format!("{mismatches} mismatches over 18 group-class cells and 6 gaps"))
}

/// Kolmogorov distance between a sample and the uniform distribution.
fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max)
}

fn c6_osa_extremes() -> Outcome {
    let opts = PermutationOptions { permutations: 200, seed: 6 };
    let mut recs = Vec::new();
    let mut constant = Vec::new();
    let mut indicator = Vec::new();
    for i in 0..100 {
        let g = if i % 2 == 0 { "F" } else { "M" };
        recs.push(record(format!("e{i}"), 3, &[(Attribute::Gender, g)]));
        constant.push(PredictionRecord::new(format!("e{i}"), 3, 4));
        indicator.push(PredictionRecord::new(format!("e{i}"), 3, if g == "F" { 4 } else { 3 }));
    }
    let r_const = osa(&constant, &recs, &[Attribute::Gender], opts).map_err(|e| e.to_string())?.r_squared;
    let r_ind = osa(&indicator, &recs, &[Attribute::Gender], opts).map_err(|e| e.to_string())?.r_squared;

    // independent errors: 20 seeds, each attribute tested on its own
    let mut r2 = Vec::new();
    let mut p_all = Vec::new();
    let mut p_gender = Vec::new();
    for seed in 0..20u64 {
        let opts = SynthOptions {
            prompts: vec!["p".into()],
            essays_per_prompt: 500,
            unknown_rate: 0.0,
            seed: 1000 + seed,
            ..SynthOptions::default()
        };
        let corpus = generate_corpus(&opts);
        let preds = noisy_predictions(&corpus, 0.5, 2000 + seed);
        for a in Attribute::ALL {
            let res = osa(&preds, &corpus, &[a], PermutationOptions { permutations: 200, seed })
                .map_err(|e| e.to_string())?;
            r2.push(res.r_squared);
            p_all.push(res.permutation_p_value);
            if a == Attribute::Gender {
                p_gender.push(res.permutation_p_value);
            }
        }
    }
    let mean_r2 = r2.iter().sum::<f64>() / r2.len() as f64;
    let ks_all = ks_uniform(&p_all);
    let ks_gender = ks_uniform(&p_gender);
    check(
        r_const == 0.0 && (r_ind - 1.0).abs() <= 1e-10 && mean_r2 < 0.02 && ks_all < 0.15,
        format!(
            "constant R² {r_const}, indicator R² {r_ind:.12}, independent mean R² {mean_r2:.4}, KS {ks_all:.3} over {} p-values (gender only: {ks_gender:.3} over 20)",
            p_all.len()
        ),
    )
}

fn c7_gbm() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 2000;
    let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let x = Matrix { rows: n, cols: 1, data: xs.clone() };
    let y: Vec<i32> = xs.iter().map(|&v| if v < 0.5 { 1 } else { 2 }).collect();
    let cfg = GbmConfig::default();
    let clf = fit_classifier(&x, &y, &cfg).map_err(|e| e.to_string())?;
    let pred = clf.predict(&x, ScoreScale::new(1, 2).unwrap()).map_err(|e| e.to_string())?;
    let acc = y.iter().zip(&pred).filter(|(a, b)| a == b).count() as f64 / n as f64;

    let yr: Vec<f64> = xs.iter().map(|&v| 3.0 * v + (rng.random::<f64>() - 0.5) * 0.2).collect();
    let reg = fit_regressor(&x, &yr, &cfg).map_err(|e| e.to_string())?;
    let fitted: Vec<f64> = (0..n).map(|r| reg.predict_value(x.row(r)).unwrap()).collect();
    let r2 = r_squared(&yr, &fitted);
    let monotone = [&clf, &reg]
        .iter()
        .all(|m| m.training_loss.len() == 101 && m.training_loss.windows(2).all(|w| w[1] <= w[0]));
    let refit = fit_classifier(&x, &y, &cfg).map_err(|e| e.to_string())? == clf;

    let (rows, cols) = (5000, 200);
    let big = Matrix { rows, cols, data: (0..rows * cols).map(|_| rng.random()).collect() };
    let yb: Vec<i32> = (0..rows)
        .map(|r| {
            let s: f64 = big.row(r)[..10].iter().sum();
            (s - 2.0).clamp(1.0, 6.0) as i32
        })
        .collect();
    let start = Instant::now();
    let big_model = fit_classifier(&big, &yb, &cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(
        acc >= 0.99 && r2 >= 0.9 && monotone && refit && elapsed < Duration::from_secs(30),
        format!(
            "separable accuracy {acc:.4}, linear R² {r2:.4}, loss non-increasing {monotone}, identical refit {refit}, 5000x200 {}-class fit {elapsed:.2?}",
            big_model.classes.len()
        ),
    )
}

fn c8_class_weights() -> Outcome {
    // normal-like 6-class scores, one noisy feature that tracks the score
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let weights = [3.0, 12.0, 35.0, 32.0, 14.0, 4.0];
    let total: f64 = weights.iter().sum();
    let mut draw = |rng: &mut ChaCha8Rng| {
        let mut u = rng.random::<f64>() * total;
        for (k, w) in weights.iter().enumerate() {
            if u < *w {
                return k as i32 + 1;
            }
            u -= w;
        }
        6
    };
    let make = |rng: &mut ChaCha8Rng, n: usize, draw: &mut dyn FnMut(&mut ChaCha8Rng) -> i32| {
        let mut data = Vec::with_capacity(n * 2);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let s = draw(rng);
            data.push(s as f64 + (rng.random::<f64>() - 0.5) * 2.4);
            data.push(rng.random::<f64>());
            y.push(s);
        }
        (Matrix { rows: n, cols: 2, data }, y)
    };
    let (xtr, ytr) = make(&mut rng, 3000, &mut draw);
    let (xte, yte) = make(&mut rng, 3000, &mut draw);
    let eval = |w: ClassWeighting| -> Result<(f64, f64), String> {
        let m = fit_classifier(&xtr, &ytr, &GbmConfig { class_weighting: w, seed: 8, ..GbmConfig::default() })
            .map_err(|e| e.to_string())?;
        let p = m.predict(&xte, scale6()).map_err(|e| e.to_string())?;
        let min_recall = (1..=6)
            .map(|k| {
                let support = yte.iter().filter(|&&t| t == k).count() as f64;
                yte.iter().zip(&p).filter(|(t, q)| **t == k && **q == k).count() as f64 / support
            })
            .fold(f64::INFINITY, f64::min);
        Ok((min_recall, qwk_scores(&yte, &p, scale6()).map_err(|e| e.to_string())?.kappa))
    };
    let (r_plain, k_plain) = eval(ClassWeighting::None)?;
    let (r_bal, k_bal) = eval(ClassWeighting::Balanced)?;
    check(
        r_bal > r_plain && (k_bal - k_plain).abs() <= 0.05,
        format!("min-class recall {r_plain:.3} -> {r_bal:.3}, QWK {k_plain:.4} -> {k_bal:.4}"),
    )
}

fn c9_probe() -> Outcome {
    let biased: Vec<EssayRecord> = {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        (0..1000)
            .map(|i| {
                let g = if rng.random::<bool>() { "F" } else { "M" };
                let ell = if rng.random::<bool>() { "Yes" } else { "No" };
                let score = 2 + i32::from(g == "F") + 2 * i32::from(ell == "No");
                let mut r = record(format!("e{i}"), score, &[(Attribute::Gender, g), (Attribute::EllStatus, ell)]);
                r.split = if i % 5 == 0 { Split::Test } else { Split::Train };
                r
            })
            .collect()
    };
    let gbm = GbmConfig::default();
    let k_bias = run_probe(&biased, scale6(), &gbm, &ProbeOptions::default()).map_err(|e| e.to_string())?.kappa;
    let mut total = 0.0;
    for seed in 0..20u64 {
        let opts = SynthOptions { prompts: vec!["p".into()], essays_per_prompt: 1000, seed: 300 + seed, ..Default::default() };
        let corpus = generate_corpus(&opts);
        total += run_probe(&corpus, scale6(), &gbm, &ProbeOptions { seed, ..Default::default() })
            .map_err(|e| e.to_string())?
            .kappa;
    }
    let mean = total / 20.0;
    check(k_bias >= 0.95 && mean.abs() < 0.05, format!("biased kappa {k_bias:.4}, independent mean kappa {mean:.4}"))
}

fn prompt_fixture(name: &str) -> Result<String, String> {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/prompts").join(name);
    std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))
}

fn c10_prompts() -> Outcome {
    let essay = prompt_fixture("essay.txt")?;
    let rubric = prompt_fixture("rubric.txt")?;
    let examples = serde_json::from_str(&prompt_fixture("examples.json")?).map_err(|e| e.to_string())?;
    let zero = ScoringStrategy::ZeroShot { rubric: rubric.clone() }.build_prompt(&essay, scale6()).map_err(|e| e.to_string())?;
    let few = ScoringStrategy::FewshotCot { rubric, examples }.build_prompt(&essay, scale6()).map_err(|e| e.to_string())?;
    let zero_ok = zero == prompt_fixture("zero_shot.golden")?;
    let few_ok = few == prompt_fixture("fewshot_cot.golden")?;
    let phrases = [
        "You are an expert evaluator of student essays",
        "Learn how the grading is performed",
        "Based on the rubric, the student earned a score of:",
        "Let's think step by step.",
    ];
    let all = format!("{zero}{few}");
    let missing: Vec<&str> = phrases.iter().copied().filter(|p| !all.contains(p)).collect();
    check(zero_ok && few_ok && missing.is_empty(), format!("zero-shot golden {zero_ok}, few-shot golden {few_ok}, missing phrases {missing:?}"))
}

fn no_sleep(_: Duration) {}

fn c11_parse_and_retry() -> Outcome {
    let s = scale6();
    let a = parse_score("Predicted score = 3.", s).map(|p| p.score);
    let b = parse_score("score = {4}", s).map(|p| p.score);
    let rejects = parse_score("I cannot grade this essay.", s).is_err() && parse_score("Predicted score = 9.", s).is_err();
    let parsing = a == Ok(3) && b == Ok(4) && rejects;

    let config = |url: &str| LlmConfig { endpoint: url.to_string(), max_retries: 3, ..LlmConfig::default() };
    let essay = EssayInput { essay_id: "e1", text: "An essay.", true_score: 3 };
    let strategy = ScoringStrategy::ZeroShot { rubric: "rubric".into() };

    let server = common::MockServer::start(vec![
        (429, "{\"error\": \"rate limited\"}".into()),
        (200, common::chat_body("Predicted score = 3.")),
    ]);
    let client = LlmClient::with_transport(config(&server.url), Box::new(UreqTransport::new(Duration::from_secs(5))), Some("k".into()))
        .with_sleep(no_sleep);
    let ok = client.score_essay(&strategy, &essay, s);
    let retried = matches!(&ok, Ok(r) if r.retries == 1 && r.prediction.predicted_score == 3) && server.request_count() == 2;

    let down = common::MockServer::start(vec![(503, "{}".into())]);
    let client = LlmClient::with_transport(config(&down.url), Box::new(UreqTransport::new(Duration::from_secs(5))), None)
        .with_sleep(no_sleep);
    let failed = client.score_essay(&strategy, &essay, s);
    let exhausted = matches!(&failed, Err(f) if f.attempts == 4) && down.request_count() == 4;
    check(
        parsing && retried && exhausted,
        format!("parsing {parsing}, 429 then success after one retry {retried}, exhaustion after 4 attempts {exhausted}"),
    )
}

fn c12_explain() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 400;
    let mut data = Vec::with_capacity(n * 3);
    for _ in 0..n {
        data.push(rng.random::<f64>());
        data.push(rng.random::<f64>());
        data.push(0.25);
    }
    let x = Matrix { rows: n, cols: 3, data };
    let y: Vec<f64> = (0..n).map(|r| 1.0 + 5.0 * x.get(r, 0) + 0.5 * x.get(r, 1)).collect();
    let model = fit_regressor(&x, &y, &GbmConfig::default()).map_err(|e| e.to_string())?;
    let names: Vec<String> = ["a", "b", "constant"].iter().map(|s| s.to_string()).collect();
    let opts = ImportanceOptions { metric: ImportanceMetric::RSquared, scale: scale6(), repeats: 5, seed: 1 };
    let imp = permutation_importance(&model, &x, &y, &names, &opts).map_err(|e| e.to_string())?;
    let unused_zero = imp.features[2].mean_drop == 0.0 && imp.features[2].std_dev == 0.0;

    let background = Matrix { rows: 32, cols: 3, data: x.data[..96].to_vec() };
    let outputs: Vec<f64> = (0..n).map(|r| model.value(x.row(r)).unwrap()).collect();
    let range = outputs.iter().copied().fold(f64::MIN, f64::max) - outputs.iter().copied().fold(f64::MAX, f64::min);
    let mut worst_gap = 0.0f64;
    for r in 100..110 {
        let att = shapley_sample(&model, x.row(r), &background, 2048, r as u64).map_err(|e| e.to_string())?;
        worst_gap = worst_gap.max(att.efficiency_gap().abs() / range);
    }

    // additive 8-feature function against exact subset enumeration
    let w = [1.0, -2.0, 0.5, 3.0, -0.7, 1.5, 2.2, -1.1];
    let f = FnScorer(move |row: &[f64]| -> f64 { row.iter().zip(&w).map(|(a, b)| a * b).sum() });
    let bg_rows = 16;
    let bg = Matrix { rows: bg_rows, cols: 8, data: (0..bg_rows * 8).map(|_| rng.random()).collect() };
    let inst: Vec<f64> = (0..8).map(|_| rng.random()).collect();
    let value_of = |subset: u32| -> f64 {
        (0..bg_rows)
            .map(|b| {
                let z: Vec<f64> = (0..8).map(|j| if subset >> j & 1 == 1 { inst[j] } else { bg.get(b, j) }).collect();
                f.value(&z).unwrap()
            })
            .sum::<f64>()
            / bg_rows as f64
    };
    let fact = |m: u32| (1..=m).map(f64::from).product::<f64>();
    let mut exact = [0.0; 8];
    for (j, e) in exact.iter_mut().enumerate() {
        for s in 0..256u32 {
            if s >> j & 1 == 1 {
                continue;
            }
            let size = s.count_ones();
            let weight = fact(size) * fact(7 - size) / fact(8);
            *e += weight * (value_of(s | 1 << j) - value_of(s));
        }
    }
    let est = shapley_sample(&f, &inst, &bg, 2048, 3).map_err(|e| e.to_string())?;
    let diff: f64 = est.attributions.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rel = diff / norm;
    check(
        unused_zero && worst_gap <= 0.01 && rel <= 0.05,
        format!("unused importance exactly 0 {unused_zero}, worst efficiency gap {:.4}% of range, additive relative error {:.2e}", worst_gap * 100.0, rel),
    )
}

fn c13_throughput() -> Outcome {
    let opts = SynthOptions { prompts: vec!["p".into()], essays_per_prompt: 25_000, seed: 13, ..Default::default() };
    let corpus = generate_corpus(&opts);
    let preds = noisy_predictions(&corpus, 0.6, 13);
    let start = Instant::now();
    let acc = accuracy_section(&preds, scale6()).map_err(|e| e.to_string())?;
    let fair = fairness_section(&preds, &corpus, &Attribute::ALL, FairnessSplit::All, scale6(), PermutationOptions::default())
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let complete = fair.attributes.values().all(|a| a.present().is_some_and(|a| a.osa.present().is_some() && a.osd.present().is_some()));
    check(
        complete && elapsed < Duration::from_secs(10),
        format!(
            "{} records, QWK {:.3}, {} attributes x OSA/OSD x 1000 permutations, all sections present {complete}: {elapsed:.2?}",
            acc.n,
            acc.kappa.kappa,
            fair.attributes.len()
        ),
    )
}

fn c14_determinism() -> Outcome {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic/config.json");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    let mut predictions = Vec::new();
    for run in ["a", "b"] {
        let out: PathBuf = dir.path().join(run);
        let argv = ["essay-audit", "report", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = essay_audit::cli::run(argv, &mut o, &mut e);
        if code != 0 {
            return Err(format!("run {run} exited {code}: {}", String::from_utf8_lossy(&e)));
        }
        let json = std::fs::read_to_string(out.join("report.json")).map_err(|e| e.to_string())?;
        reports.push(without_timestamps(&json).map_err(|e| e.to_string())?);
        let mut files = BTreeMap::new();
        for entry in std::fs::read_dir(&out).map_err(|e| e.to_string())? {
            let p = entry.map_err(|e| e.to_string())?.path();
            if p.extension().is_some_and(|x| x == "csv") {
                files.insert(p.file_name().unwrap().to_owned(), std::fs::read(&p).map_err(|e| e.to_string())?);
            }
        }
        predictions.push(files);
    }
    let same_report = reports[0] == reports[1];
    let same_csv = predictions[0] == predictions[1] && !predictions[0].is_empty();
    check(
        same_report && same_csv,
        format!("report JSON identical {same_report}, {} CSV outputs identical {same_csv}", predictions[0].len()),
    )
}

fn main() {
    let criteria: [Criterion; 14] = [
        ("qwk oracle equivalence", c1_qwk_oracle),
        ("qwk trivial and degenerate", c2_qwk_degenerate),
        ("kappa interpretation bands", c3_interpretation),
        ("fairness zero disparity", c4_zero_disparity),
        ("fairness counting oracle", c5_counting_oracle),
        ("osa extremes and null calibration", c6_osa_extremes),
        ("gradient boosting", c7_gbm),
        ("class-weight mitigation", c8_class_weights),
        ("demographic probe", c9_probe),
        ("prompt byte-exactness", c10_prompts),
        ("score parsing and retry contract", c11_parse_and_retry),
        ("explainability", c12_explain),
        ("metrics throughput", c13_throughput),
        ("end-to-end determinism", c14_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
