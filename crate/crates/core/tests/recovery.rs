use hbni::filter::{filter_distribution, sliding_window_classify};
use hbni::sampler::{run_chain, ChainConfig, ChainDiagnostics, NoiseModel};
use hbni::synth::{generate_scenario, ObservationPlan, ScenarioSpec, Segment};
use hbni::{ClassPrior, ProbVec, RngSeed};

const TRUTH: [f64; 3] = [1.0, 6.0, 20.0];

fn replication(r: u64) -> (NoiseModel, ChainDiagnostics) {
    let (obs, _) = generate_scenario(&ScenarioSpec::recovery(RngSeed(r))).unwrap();
    let cfg = ChainConfig::default().with_seed(RngSeed(1000 + r));
    run_chain(&obs, 3, &ClassPrior::uniform(3), &cfg).unwrap()
}

#[test]
fn interval_coverage_and_acceptance_rates() {
    let mut covered = [0usize; 3];
    let mut rates = Vec::new();
    for r in 0..50 {
        let (model, diag) = replication(r);
        assert_eq!(model.samples.len(), 200);
        for m in 0..3 {
            let s = &diag.summaries[m];
            assert_eq!(s.name, format!("theta_{}", m + 1));
            covered[m] += (s.q05 <= TRUTH[m] && TRUTH[m] <= s.q95) as usize;
        }
        rates.push(diag.acceptance);
    }
    for (m, c) in covered.iter().enumerate() {
        assert!(*c >= 40, "theta_{} covered in {c}/50", m + 1);
    }
    for a in &rates {
        for (name, v) in [("theta", a.theta), ("kappa", a.kappa), ("gamma", a.gamma)] {
            assert!((0.1..=0.7).contains(&v), "{name} acceptance {v}");
        }
        assert!((0.0..=1.0).contains(&a.class));
    }
}

#[test]
fn label_frequencies_track_the_generating_classes() {
    let (_, diag) = replication(3);
    assert_eq!(diag.label_frequencies.len(), 15);
    for row in &diag.label_frequencies {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    // the θ=20 frames sit near their corner and are rarely given to class 1
    let class3: f64 = diag.label_frequencies[10..].iter().map(|r| r[2]).sum::<f64>() / 5.0;
    assert!(class3 > 0.5, "class-3 frames assigned to class 3 at rate {class3}");
}

#[test]
fn inferred_model_drives_filters() {
    let (model, _) = replication(7);
    let third = 1.0 / 3.0;
    let stream: Vec<ProbVec> = [[0.5, 0.3, 0.2], [0.2, 0.5, 0.3], [0.3, 0.2, 0.5], [third, third, third]]
        .iter()
        .map(|v| ProbVec::new(v).unwrap())
        .collect();
    let pp = filter_distribution(&stream, &model, &ClassPrior::uniform(3)).unwrap();
    assert_eq!(pp.len(), model.samples.len());
    assert!(pp.class_median(0) > 0.5);

    let spec = ScenarioSpec {
        version: 1,
        classes: 3,
        true_thetas: TRUTH.to_vec(),
        pi: None,
        plan: ObservationPlan::Segments {
            segments: vec![Segment { class: 3, frames: 30 }, Segment { class: 2, frames: 30 }],
        },
        seed: RngSeed(70),
    };
    let (obs, labels) = generate_scenario(&spec).unwrap();
    let out = sliding_window_classify(&obs, 12, &model, &ClassPrior::uniform(3)).unwrap();
    assert_eq!(out.len(), labels.len());
    assert_eq!(out[29].1, labels[29]);
    assert_eq!(out[59].1, labels[59]);
}
