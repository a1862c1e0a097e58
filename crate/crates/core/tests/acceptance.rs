//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use agentic_control::blackjack::{run_memory_experiment, ExperimentConfig, MemoryMode, TARGET_MAX, TARGET_MIN};
use agentic_control::llm::{record_session, ReplayBackend};
use agentic_control::memory::{
    reference_curate, render_memory_text, update_bearing, Bearing, EnvironmentMemory, MotionEvent, MotionKind,
};
use agentic_control::runner::{
    run_episode, Backends, EpisodeOptions, Policy, Termination, AGENT_STEP_CAP, RANDOM_STEP_CAP,
};
use agentic_control::sim::scenario_from_str;
use agentic_control::stats::{holm, mean, standard_error, t_test_holm, TTestKind};
use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn cross_embodiment() -> Outcome {
    let mut parts = Vec::new();
    for (name, k) in [("dingo", 4), ("limb", 9), ("rov", 6)] {
        let cfg = common::config(name);
        ensure(cfg.interface.len() == k, format!("{name}: K = {} (want {k})", cfg.interface.len()))?;
        let mut adapter = scenario_from_str(&common::scenario(name)).map_err(|e| e.to_string())?;
        let min = adapter.min_steps(&cfg.interface).map_err(|e| e.to_string())?;
        let run = run_episode(&cfg, adapter.as_mut(), &common::scripted_agent(name), &EpisodeOptions::new(AGENT_STEP_CAP, 0));
        ensure(run.result.success, format!("{name}: {:?}", run.result.termination))?;
        ensure(run.result.steps <= min + 3, format!("{name}: {} steps > min {min} + 3", run.result.steps))?;
        parts.push(format!("{name} K={k} {}/{min}", run.result.steps));
    }
    Ok(parts.join(", "))
}

fn random_baseline() -> Outcome {
    let cfg = common::config("dingo");
    let mut adapter = scenario_from_str(&common::scenario("dingo")).map_err(|e| e.to_string())?;
    let min = adapter.min_steps(&cfg.interface).map_err(|e| e.to_string())?;
    ensure(min >= 15, format!("oracle distance {min} < 15"))?;
    let mut steps = Vec::new();
    for seed in 0..30 {
        let run = run_episode(&cfg, adapter.as_mut(), &Policy::Random, &EpisodeOptions::new(RANDOM_STEP_CAP, seed));
        ensure(run.result.termination == Termination::StepCap, format!("seed {seed}: {:?}", run.result.termination))?;
        steps.push(run.result.steps as f64);
    }
    let entry = agentic_control::stats::format_mean_se(&steps);
    ensure(entry == "25.00 ± 0.00", format!("got {entry}"))?;
    Ok(format!("min {min}, 30 runs {entry}"))
}

fn bearing_oracle() -> Outcome {
    let sector_of = |deg: f64| (((deg + 22.5).rem_euclid(360.0)) / 45.0).floor() as u8 % 8;
    let mut checked = 0;
    for b in Bearing::all() {
        for kind in MotionKind::ALL {
            let ks: &[u8] = match kind {
                MotionKind::RotateLeft | MotionKind::RotateRight => &[1, 2],
                _ => &[0],
            };
            for &k in ks {
                let e = MotionEvent { kind, rotation_sectors: k };
                let delta = match kind {
                    MotionKind::RotateLeft => 45.0 * k as f64,
                    MotionKind::RotateRight => -45.0 * k as f64,
                    MotionKind::TranslateLeft => 45.0,
                    MotionKind::TranslateRight => -45.0,
                    _ => 0.0,
                };
                for jitter in [-22.0, -11.0, 0.0, 11.0, 22.0] {
                    let angle = b.sector() as f64 * 45.0 + jitter;
                    let want = sector_of(angle + delta);
                    let got = update_bearing(b, e).sector();
                    ensure(got == want, format!("{b} {kind:?}×{k}: got {got}, oracle {want}"))?;
                    checked += 1;
                }
            }
        }
    }
    // Planar anchor: object 10 m ahead, robot steps 5 m left.
    let moved_angle = (5.0f64).atan2(10.0).to_degrees();
    ensure(sector_of(moved_angle) == Bearing::FRONT_RIGHT.sector(), "planar anchor disagrees")?;
    let anchor = update_bearing(Bearing::FRONT, MotionEvent::translate(MotionKind::TranslateLeft));
    ensure(anchor == Bearing::FRONT_RIGHT, format!("front + translate_left -> {anchor}"))?;
    Ok(format!("{checked} cases exact; front + translate_left -> {anchor}"))
}

fn memory_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let budget = 1200;
    let mut memory = EnvironmentMemory::new(budget).with_task("Find the fire extinguisher.", Some("fire extinguisher"));
    let mut longest = 0;
    for step in 1..=1000 {
        memory = reference_curate(&memory, &common::synthetic_record(&mut rng, step));
        let text = render_memory_text(&memory);
        let len = text.chars().count();
        longest = longest.max(len);
        ensure(len <= budget, format!("step {step}: {len} > {budget}"))?;
        ensure(common::has_four_sections(&text), format!("step {step}: schema broken"))?;
    }
    Ok(format!("1000 records, max {longest}/{budget} chars, 4 sections every step"))
}

fn blackjack() -> Outcome {
    let cfg = ExperimentConfig { target: 42, episodes: 200, seed: 0, ..ExperimentConfig::default() };
    let run = |mode| run_memory_experiment(mode, &cfg).map_err(|e| e.to_string());
    let curated = run(MemoryMode::Curated)?;
    let no_memory = run(MemoryMode::NoMemory)?;
    let random = run(MemoryMode::Random)?;
    let avg = |s: &[agentic_control::blackjack::EpisodeScore]| s.last().map_or(f64::NAN, |e| e.cumulative_average);
    let (c, n, r) = (avg(&curated), avg(&no_memory), avg(&random));
    ensure(c > n && c > r, format!("curated {c:.3} vs no_memory {n:.3}, random {r:.3}"))?;

    let first = &curated[0];
    let start_width = first.belief_high.unwrap_or(0) - first.belief_low.unwrap_or(0);
    ensure(start_width == TARGET_MAX - TARGET_MIN, format!("initial width {start_width}"))?;
    let last = curated.last().unwrap();
    let width = last.belief_high.unwrap_or(i32::MAX) - last.belief_low.unwrap_or(0);
    ensure(width < 20, format!("final width {width}"))?;

    // Independent coin-flip Monte Carlo, 10^5 episodes.
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let n_mc = 100_000;
    let rewards: Vec<f64> = (0..n_mc)
        .map(|_| {
            let mut total = 0;
            loop {
                if rng.gen_bool(0.5) {
                    return if total > 42 { -1.0 } else if total > 32 { 1.0 } else { 0.0 };
                }
                total += rng.gen_range(1..=13).min(10);
                if total > 42 {
                    return -1.0;
                }
            }
        })
        .collect();
    let rand_scores: Vec<f64> = random.iter().map(|s| s.score as f64).collect();
    let (m, se) = (mean(&rand_scores), standard_error(&rand_scores));
    let (mc, mc_se) = (mean(&rewards), standard_error(&rewards));
    let sigma = (se * se + mc_se * mc_se).sqrt();
    ensure((m - mc).abs() <= 2.0 * sigma, format!("random {m:.4} vs MC {mc:.4}, 2σ = {:.4}", 2.0 * sigma))?;
    Ok(format!(
        "curated {c:.3} > no_memory {n:.3}, random {r:.3}; width 88 -> {width}; random {m:.3} vs MC {mc:.3} (2σ {:.3})",
        2.0 * sigma
    ))
}

fn replay_fidelity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = common::config("dingo");
    let transcript_path = dir.path().join("session.jsonl");
    let transcript = record_session(&transcript_path).map_err(|e| e.to_string())?;
    let opts = EpisodeOptions::new(AGENT_STEP_CAP, 21);

    let mut adapter = scenario_from_str(&common::scenario("dingo")).map_err(|e| e.to_string())?;
    let recorded = run_episode(
        &cfg,
        adapter.as_mut(),
        &Policy::Agent(Backends::controller_only(transcript.wrap(common::scripted("dingo")))),
        &opts,
    );
    let replay = ReplayBackend::from_path(&transcript_path).map_err(|e| e.to_string())?;
    let mut adapter = scenario_from_str(&common::scenario("dingo")).map_err(|e| e.to_string())?;
    let replayed = run_episode(&cfg, adapter.as_mut(), &Policy::Agent(Backends::controller_only(std::sync::Arc::new(replay))), &opts);

    let (a, b) = (dir.path().join("recorded.jsonl"), dir.path().join("replayed.jsonl"));
    recorded.write_jsonl(&a).map_err(|e| e.to_string())?;
    replayed.write_jsonl(&b).map_err(|e| e.to_string())?;
    let (a, b) = (std::fs::read(a).map_err(|e| e.to_string())?, std::fs::read(b).map_err(|e| e.to_string())?);
    ensure(recorded.result.success, "recorded episode did not succeed")?;
    ensure(a == b, "step logs differ")?;
    Ok(format!("{} steps, {} bytes identical", recorded.result.steps, a.len()))
}

fn statistics() -> Outcome {
    // scipy.stats.ttest_ind reference values.
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let r = t_test_holm(&[(&[10.0, 12.0, 14.0], &[20.0, 22.0, 24.0])], TTestKind::Pooled);
    ensure(rel(r[0].test.p, 0.0036022326091040033) < 1e-6, format!("p = {}", r[0].test.p))?;
    let a = [1.5, 2.25, 3.0, 4.75, 5.5, 7.0];
    let b = [3.0, 4.5, 6.25, 6.5, 8.0, 9.5, 10.25];
    let r2 = t_test_holm(&[(&a, &b)], TTestKind::Pooled);
    ensure(rel(r2[0].test.p, 0.05480449753527697) < 1e-6, format!("p = {}", r2[0].test.p))?;

    let adj = holm(&[0.001, 0.02, 0.04]);
    ensure(adj == vec![0.003, 0.04, 0.04], format!("holm {adj:?}"))?;

    let shaped = |m: f64, sd: f64| {
        let base: Vec<f64> = (0..30).map(f64::from).collect();
        let (bm, bsd) = (mean(&base), standard_error(&base) * 30f64.sqrt());
        base.iter().map(|x| m + sd * (x - bm) / bsd).collect::<Vec<_>>()
    };
    let random = shaped(22.07, 0.98 * 30f64.sqrt());
    let agent = shaped(9.56, 1.50 * 30f64.sqrt());
    let r3 = t_test_holm(&[(&random, &agent)], TTestKind::Pooled);
    ensure(rel(r3[0].test.p, 3.142808641698902e-09) < 1e-6, format!("limb p = {}", r3[0].test.p))?;
    ensure(r3[0].adjusted_p < 0.01, format!("limb adjusted p = {}", r3[0].adjusted_p))?;
    Ok(format!("p = {:.6e}; Holm {adj:?}; limb-shaped adjusted p = {:.3e}", r[0].test.p, r3[0].adjusted_p))
}

fn main() {
    let criteria: [(&str, Check, Duration); 7] = [
        ("config-only cross-embodiment run", cross_embodiment, Duration::from_secs(10)),
        ("random baseline stops at the cap", random_baseline, Duration::from_secs(5)),
        ("bearing algebra matches angle oracle", bearing_oracle, Duration::from_secs(1)),
        ("memory stays bounded with four sections", memory_bounds, Duration::from_secs(5)),
        ("blackjack curated memory", blackjack, Duration::from_secs(30)),
        ("replay fidelity", replay_fidelity, Duration::from_secs(2)),
        ("statistics oracle", statistics, Duration::from_secs(2)),
    ];
    let mut failed = 0;
    let mut first_passed = false;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let mut outcome = check();
        let elapsed = started.elapsed();
        if outcome.is_ok() && elapsed > *limit {
            outcome = Err(format!("took {elapsed:.2?}, limit {limit:?}"));
        }
        if i == 0 {
            first_passed = outcome.is_ok();
        }
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} [{elapsed:.2?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why} [{elapsed:.2?}]", i + 1);
            }
        }
    }
    // Absolute step counts from physical runs cannot be reproduced in
    // simulation; the oracle-relative bound of criterion 1 stands in, with
    // the invariant suites run by the other test targets.
    if first_passed {
        println!("PASS 8 oracle-relative substitute for absolute step counts: criterion 1 bound holds");
    } else {
        failed += 1;
        println!("FAIL 8 oracle-relative substitute for absolute step counts: criterion 1 failed");
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
