mod common;


use agentic_control::config::{ActionHistory, ProprioState};
use agentic_control::controller::{compose_system_prompt, select_action, Controller, VisualQuery, SECTION_LABELS};
use agentic_control::llm::{BackendError, ChatBackend, ChatMessage};
use agentic_control::memory::{reference_curate, EnvironmentMemory};
use agentic_control::monitor::{
    oracle_describe, upscale, ApparentSize, CameraFrame, FrameBearing, MonitorObservation, Raster, SceneEntity,
};
use image::{Rgb, RgbImage};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Always answers with the same text.
struct Fixed(String);

impl ChatBackend for Fixed {
    fn id(&self) -> &str {
        "fixed"
    }

    fn complete(&self, _: &[ChatMessage]) -> Result<String, BackendError> {
        Ok(self.0.clone())
    }
}

fn prompt_for(seed: u64, steps: u32) -> agentic_control::controller::ComposedPrompt {
    let cfg = common::config("dingo");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut memory = EnvironmentMemory::new(2000).with_task(&cfg.task.objective, cfg.task.target_label.as_deref());
    let mut history = ActionHistory::new();
    for step in 1..=steps {
        let rec = common::synthetic_record(&mut rng, step);
        history.push(step, rec.decision.as_ref().unwrap().action.clone(), Default::default());
        memory = reference_curate(&memory, &rec);
    }
    compose_system_prompt(&cfg, &memory, &ProprioState::default(), &history)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn prompt_has_six_sections_in_order(seed in any::<u64>(), steps in 0u32..30) {
        let text = prompt_for(seed, steps).render();
        let mut last = 0;
        for label in SECTION_LABELS {
            prop_assert_eq!(text.matches(label).count(), 1, "{}", label);
            let at = text.find(label).unwrap();
            prop_assert!(at >= last);
            last = at;
        }
    }

    // Whatever the model says, an accepted decision names an admissible action.
    #[test]
    fn accepted_actions_are_admissible(
        noise in "[ -~\n]{0,80}",
        name in prop_oneof!["[a-z_]{1,14}", Just("forward".to_string()), Just("ROTATE_LEFT".to_string())],
        params in "[ -~]{0,30}",
    ) {
        let cfg = common::config("dingo");
        let reply = format!("{noise}\nACTION: {name}\nPARAMS: {params}");
        let prompt = prompt_for(1, 2);
        let q = VisualQuery::new("Is the fire extinguisher visible?").unwrap();
        if let Ok(d) = select_action(&prompt, &q, &[], &Fixed(reply), &cfg.interface) {
            prop_assert!(cfg.interface.names().contains(&d.action));
        }
    }

    #[test]
    fn upscaling_preserves_constants_and_monotone_gradients(
        w in 2u32..24, h in 2u32..24, sx in 1u32..5, sy in 1u32..5, c in any::<[u8; 3]>(),
    ) {
        let target = (w * sx + sx / 2, h * sy);
        let constant = Raster::encode(&RgbImage::from_pixel(w, h, Rgb(c))).unwrap();
        let up = upscale(&constant, target).unwrap();
        prop_assert_eq!((up.width, up.height), target);
        prop_assert!(up.decode().unwrap().pixels().all(|p| p.0 == c));

        let ramp = RgbImage::from_fn(w, h, |x, y| Rgb([(x * 255 / (w - 1)) as u8, (y * 255 / (h - 1)) as u8, 7]));
        let up = upscale(&Raster::encode(&ramp).unwrap(), target).unwrap().decode().unwrap();
        for y in 0..target.1 {
            for x in 1..target.0 {
                prop_assert!(up.get_pixel(x, y).0[0] >= up.get_pixel(x - 1, y).0[0]);
            }
        }
        for x in 0..target.0 {
            for y in 1..target.1 {
                prop_assert!(up.get_pixel(x, y).0[1] >= up.get_pixel(x, y - 1).0[1]);
            }
        }
    }
}

#[test]
fn controller_instances_are_interchangeable() {
    let cfg = common::config("dingo");
    let a = Controller::new(common::scripted("dingo"));
    let b = Controller::new(common::scripted("dingo"));
    let prompt = prompt_for(3, 5);
    let (qa, _) = a.query(&prompt, 6).unwrap();
    let (qb, _) = b.query(&prompt, 6).unwrap();
    assert_eq!(qa, qb);
    let obs = [MonitorObservation { camera_id: "left".into(), text: "Yes: fire extinguisher visible, center of frame, small.".into() }];
    let da = a.decide(&prompt, &qa, &obs, &cfg.interface).unwrap();
    let db = b.decide(&prompt, &qb, &obs, &cfg.interface).unwrap();
    assert_eq!(da, db);
    // Reusing an instance changes nothing either.
    assert_eq!(a.decide(&prompt, &qa, &obs, &cfg.interface).unwrap(), da);
}

#[test]
fn oracle_answers_the_question_that_was_asked() {
    let entity = |label: &str, bearing| SceneEntity {
        label: label.into(),
        bearing_in_frame: bearing,
        apparent_size: ApparentSize::Medium,
        occluded: false,
    };
    let frame = CameraFrame::symbolic(
        "front",
        vec![entity("ladder", FrameBearing::Left), entity("pallet stack", FrameBearing::Right)],
        0,
    );
    let ask = |q: &str| oracle_describe(&frame, &VisualQuery::new(q).unwrap()).text;
    let ladder = ask("Is the ladder visible?");
    let pallets = ask("Can you see a pallet stack?");
    assert_ne!(ladder, pallets);
    assert!(ladder.starts_with("Yes: ladder visible, left of frame"));
    assert!(pallets.starts_with("Yes: pallet stack visible, right of frame"));
    assert!(ask("Where is the fire extinguisher?").starts_with("No:"));
}
