mod common;

use common::*;
use kg2corpus::cycles::{extract_len3, extract_len4, render_reasoning, CycleConfig, EdgeRelations, ReasoningSample};
use kg2corpus::mask::{
    mask_knowledge, mask_reason_len3_forced, mask_reason_len4_forced, mask_reasoning, Flag, Len4Choice, MaskConfig,
    MaskedSample, Task,
};
use kg2corpus::sentence::{gen_corpus, GenConfig, Mode, Role};
use kg2corpus::Lang;
use proptest::prelude::*;

fn input_text(m: &MaskedSample) -> String {
    m.join(&m.tokens.iter().map(String::as_str).collect::<Vec<_>>())
}

fn targets(m: &MaskedSample) -> Vec<&str> {
    m.targets.iter().map(|t| t.token.as_str()).collect()
}

fn len3_sample(f: &Fixture) -> (kg2corpus::KnowledgeGraph, ReasoningSample) {
    let g = f.graph();
    let (cycles, _) = extract_len3(&g, &CycleConfig::default());
    assert_eq!(cycles.len(), 1);
    let s = render_reasoning(&g, &cycles[0], Lang::EN, M).unwrap();
    (g, s)
}

/// The family square rendered, then reordered to the printed sentence order.
fn kapoor_sample() -> ReasoningSample {
    let g = kapoor().graph();
    let (cycles, _) = extract_len4(&g, &CycleConfig::default());
    assert_eq!(cycles.len(), 1);
    let mut s = render_reasoning(&g, &cycles[0], Lang::EN, M).unwrap();
    let mut ordered = Vec::new();
    for want in KAPOOR_ORDER {
        let i = s.sentences.iter().position(|x| x.text == want).unwrap();
        ordered.push(s.sentences.remove(i));
    }
    s.sentences = ordered;
    s
}

#[test]
fn triangle_renders_in_ring_order() {
    let (_, s) = len3_sample(&obama());
    assert_eq!(
        s.text(),
        "President of the United States [mask] official residence [mask] White House. \
         Barack Obama [mask] residence [mask] White House. \
         Barack Obama [mask] position held [mask] President of the United States."
    );
}

#[test]
fn residence_relation_masked() {
    let (_, s) = len3_sample(&obama());
    let m = mask_reason_len3_forced(&s, M, 1, 7).unwrap();
    assert_eq!(
        input_text(&m),
        "President of the United States [mask] official residence [mask] White House. \
         Barack Obama [mask] [mask] [mask] White House. \
         Barack Obama [mask] position held [mask] President of the United States."
    );
    assert_eq!(targets(&m), ["residence"]);
    assert_eq!(m.task, Task::ReasonLen3);
    assert_eq!(m.reconstruct(), s.text());
}

#[test]
fn multi_token_relation_masks_every_token() {
    let (_, s) = len3_sample(&obama());
    let m = mask_reason_len3_forced(&s, M, 2, 7).unwrap();
    assert_eq!(targets(&m), ["position", "held"]);
    assert!(input_text(&m).ends_with("Barack Obama [mask] [mask] [mask] [mask] President of the United States."));
}

#[test]
fn square_relation_and_entity_masked() {
    let s = kapoor_sample();
    let choice = Len4Choice::Partial {
        relation: 3,
        entities: vec![3],
    };
    let m = mask_reason_len4_forced(&s, M, &choice, 0).unwrap();
    assert_eq!(
        input_text(&m),
        "Ritu Nanda [mask] father [mask] Raj Kapoor. \
         Ritu Nanda [mask] mother [mask] [mask] [mask]. \
         Rajiv Kapoor [mask] mother [mask] Krishna Kapoor. \
         Rajiv Kapoor [mask] [mask] [mask] Ritu Nanda. \
         Raj Kapoor [mask] spouse [mask] Krishna Kapoor."
    );
    assert_eq!(targets(&m), ["Krishna", "Kapoor", "sibling"]);
    assert_eq!(m.task, Task::ReasonLen4Partial);
    assert_eq!(m.reconstruct(), s.text());
}

#[test]
fn square_sentence_mode_keeps_relation() {
    let s = kapoor_sample();
    let m = mask_reason_len4_forced(&s, M, &Len4Choice::Sentence(4), 0).unwrap();
    let text = input_text(&m);
    assert!(text.ends_with("Ritu Nanda. [mask] [mask] [mask] spouse [mask] [mask] [mask]."), "{text}");
    assert_eq!(targets(&m), ["Raj", "Kapoor", "Krishna", "Kapoor"]);
    assert_eq!(m.task, Task::ReasonLen4Sentence);
}

#[test]
fn wrong_kind_is_rejected() {
    let (_, s) = len3_sample(&obama());
    assert!(mask_reason_len4_forced(&s, M, &Len4Choice::Sentence(0), 0).is_err());
    let s4 = kapoor_sample();
    assert!(mask_reason_len3_forced(&s4, M, 0, 0).is_err());
}

/// Checks the invariants every masked record must satisfy.
fn check_structure(m: &MaskedSample, source: &str) {
    m.check().unwrap();
    assert_eq!(m.reconstruct(), source, "{}", m.id);
    for (i, f) in m.flags.iter().enumerate() {
        match f {
            Flag::Structural => {
                assert_eq!(m.tokens[i], M);
                assert!(m.targets.iter().all(|t| t.pos != i));
            }
            Flag::Masked => assert_eq!(m.tokens[i], M),
            Flag::Visible => {}
        }
    }
    let masked: Vec<usize> = (0..m.flags.len()).filter(|&i| m.flags[i] == Flag::Masked).collect();
    let target_pos: Vec<usize> = m.targets.iter().map(|t| t.pos).collect();
    assert_eq!(masked, target_pos);
    let spans_with = |role: Role| m.spans.iter().filter(move |s| s.role == role);
    match m.task {
        Task::Knowledge => assert!(m.spans.iter().filter(|s| s.role == Role::Link).all(|s| m.span_untouched(s))),
        Task::ReasonLen3 => {
            assert_eq!(spans_with(Role::Relation).filter(|s| m.span_masked(s)).count(), 1);
            assert!(spans_with(Role::Relation).all(|s| m.span_masked(s) || m.span_untouched(s)));
            assert!(m.spans.iter().filter(|s| s.role != Role::Relation).all(|s| m.span_untouched(s)));
        }
        Task::ReasonLen4Partial => {
            assert_eq!(spans_with(Role::Relation).filter(|s| m.span_masked(s)).count(), 1);
            let ents = m.spans.iter().filter(|s| s.role != Role::Relation && m.span_masked(s)).count();
            assert!((1..=2).contains(&ents));
            assert!(m.spans.iter().all(|s| m.span_masked(s) || m.span_untouched(s)));
        }
        Task::ReasonLen4Sentence => {
            assert!(spans_with(Role::Relation).all(|s| m.span_untouched(s)));
            let masked: Vec<_> = m.spans.iter().filter(|s| m.span_masked(s)).collect();
            assert_eq!(masked.len(), 2);
            assert_eq!(masked[0].sentence, masked[1].sentence);
            assert_eq!(masked[0].role, Role::Head);
            assert_eq!(masked[1].role, Role::Tail);
        }
    }
}

fn synth_graph(seed: u64) -> kg2corpus::KnowledgeGraph {
    clustered(Synth {
        seed,
        clusters: 6,
        cluster_size: 6,
        ..Default::default()
    })
    .graph()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reasoning_records_keep_structure(gseed in 0u64..1000, mseed in any::<u64>()) {
        let g = synth_graph(gseed);
        let cfg = CycleConfig { edge_relations: EdgeRelations::All, ..Default::default() };
        let config = MaskConfig { seed: mseed, ..Default::default() };
        let (c3, _) = extract_len3(&g, &cfg);
        let (c4, _) = extract_len4(&g, &cfg);
        for c in c3.iter().chain(&c4) {
            for lang in ["en", "fr", "zh"] {
                if let Some(s) = render_reasoning(&g, c, l(lang), M) {
                    let m = mask_reasoning(&s, &config).unwrap();
                    check_structure(&m, &s.text());
                    prop_assert_eq!(mask_reasoning(&s, &config).unwrap(), m);
                }
            }
        }
    }

    #[test]
    fn knowledge_records_round_trip(gseed in 0u64..1000, mseed in any::<u64>(), p in 0.0f64..=1.0, floor in 0usize..4) {
        let g = synth_graph(gseed);
        let gen = GenConfig { languages: g.languages().to_vec(), seed: gseed, ..Default::default() };
        let config = MaskConfig { seed: mseed, mlm_probability: p, min_masked_tokens: floor, ..Default::default() };
        for mode in [Mode::CodeSwitched, Mode::Parallel] {
            gen_corpus(&g, &gen, mode, |s| {
                let m = mask_knowledge(s, &config, mseed ^ s.provenance.seed).unwrap();
                check_structure(&m, &s.text);
                assert!(m.masked_count() >= floor.min(m.content_count()));
                Ok(())
            })
            .unwrap();
        }
    }
}
