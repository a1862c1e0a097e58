mod common;

use std::collections::HashSet;

use agentic_control::llm::{ChatBackend, ScriptedBackend};
use agentic_control::memory::{
    curate, reference_curate, render_memory_text, EnvironmentMemory, DEFAULT_SIZE_BUDGET, MIN_SIZE_BUDGET,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fresh(budget: usize) -> EnvironmentMemory {
    EnvironmentMemory::new(budget).with_task("Find the fire extinguisher.", Some("fire extinguisher"))
}

#[test]
fn thousand_records_stay_within_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for budget in [MIN_SIZE_BUDGET, 600, 1500, DEFAULT_SIZE_BUDGET] {
        let mut memory = fresh(budget);
        for step in 1..=1000 {
            let rec = common::synthetic_record(&mut rng, step);
            memory = reference_curate(&memory, &rec);
            let text = render_memory_text(&memory);
            assert!(text.chars().count() <= budget, "step {step}: {} > {budget}", text.chars().count());
            assert!(common::has_four_sections(&text), "step {step}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn boundedness_for_any_budget(seed in any::<u64>(), budget in MIN_SIZE_BUDGET..3000usize, n in 1u32..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut memory = fresh(budget);
        for step in 1..=n {
            memory = reference_curate(&memory, &common::synthetic_record(&mut rng, step));
            let text = render_memory_text(&memory);
            prop_assert!(text.chars().count() <= budget);
            prop_assert!(common::has_four_sections(&text));
        }
    }

    // Object labels stay unique: re-sightings overwrite the entry.
    #[test]
    fn objects_are_rewritten_not_duplicated(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut memory = fresh(DEFAULT_SIZE_BUDGET);
        for step in 1..=60 {
            memory = reference_curate(&memory, &common::synthetic_record(&mut rng, step));
            let labels: HashSet<_> = memory.physical_environment.objects.iter().map(|o| &o.label).collect();
            prop_assert_eq!(labels.len(), memory.physical_environment.objects.len());
        }
    }

    // Repeating an (action, outcome) pair bumps a counter instead of appending.
    #[test]
    fn repeated_outcomes_do_not_grow_history(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let first = common::synthetic_record(&mut rng, 1);
        let memory = reference_curate(&fresh(DEFAULT_SIZE_BUDGET), &first);
        let mut again = first.clone();
        again.step = 2;
        let next = reference_curate(&memory, &again);
        prop_assert_eq!(next.curated_history.len(), memory.curated_history.len());
        prop_assert_eq!(next.curated_history.last().unwrap().repeats, 1);
    }
}

#[test]
fn model_curation_keeps_the_schema_or_falls_back() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    // A curator that always answers with a truncated memory: no headers.
    let broken = ScriptedBackend::from_pairs("broken", &[(".*", "objects: none")]).unwrap();
    // A curator that echoes a fixed, well-formed memory.
    let good_text = "[PHYSICAL ENVIRONMENT]\n- fire extinguisher | bearing front | distance far | last seen step 1\n\
                     [ROBOT STATE]\nstationary\n[CURATED HISTORY]\n- looked around\n[TASK STATE]\nsearching";
    let good = ScriptedBackend::from_pairs("good", &[(".*", good_text)]).unwrap();
    let mut memory = fresh(1200);
    for step in 1..=50 {
        let rec = common::synthetic_record(&mut rng, step);
        let backend: &dyn ChatBackend = if step % 2 == 0 { &broken } else { &good };
        let out = curate(&memory, &rec, backend);
        assert_eq!(out.fell_back, step % 2 == 0);
        let text = render_memory_text(&out.memory);
        assert!(common::has_four_sections(&text));
        assert!(text.chars().count() <= 1200);
        memory = out.memory;
    }
}
