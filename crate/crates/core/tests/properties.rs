use coldstart::game_model::{self, GameParams};
use coldstart::oracle;
use coldstart::rng::StreamRng;
use coldstart::sim_engine::{
    select_in_mode, select_server, GateOutcome, SelectionMode, SimConfig, Simulation, TransactionOutcome,
};
use coldstart::trust_ledger::{replay, LedgerConfig, PeerId, TrustEventKind, TrustLedger};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn descending_bound_forms_agree(j in 1u32..=1000, p in 0.0f64..0.999) {
        let ours = game_model::k_min_descending(j, p).unwrap();
        let printed = (1.0 - f64::from(j) - p) / (p - 1.0);
        prop_assert!((ours - printed).abs() <= 1e-9 * printed.abs().max(1e-300));
    }

    #[test]
    fn descending_bound_zeroes_the_liar_payoff(j in 1u32..=1000, p in 0.0f64..0.999) {
        let k = game_model::k_min_descending(j, p).unwrap();
        let v = game_model::expected_liar_per_round(p, k, j).unwrap();
        prop_assert!(v.abs() <= 1e-12, "{v}");
    }

    #[test]
    fn z_strictly_decreases_in_k(j in 1u32..=500, k in 0.0f64..1e4, dk in 1e-3f64..100.0) {
        prop_assert!(game_model::liar_round_payoff_z(k + dk, j).unwrap() < game_model::liar_round_payoff_z(k, j).unwrap());
    }

    #[test]
    fn descending_bound_increases_in_j_and_p(j in 1u32..=500, p in 0.0f64..0.99, dp in 1e-4f64..0.009) {
        let base = game_model::k_min_descending(j, p).unwrap();
        prop_assert!(game_model::k_min_descending(j + 1, p).unwrap() > base);
        prop_assert!(game_model::k_min_descending(j, p + dp).unwrap() > base);
    }

    #[test]
    fn escape_decreases_in_t(j in 2u32..=500, p in 0.0f64..0.999, t in 0u32..2000) {
        let a = game_model::escape_probability(j, p, t).unwrap();
        let b = game_model::escape_probability(j, p, t + 1).unwrap();
        prop_assert!(b < a || a == 0.0);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn dominance_is_monotone_in_k(n in 1u32..=500, j in 1u32..=200, p in 0.0f64..0.999, k in 0.0f64..5e4, dk in 0.0f64..1e3) {
        let lower = GameParams::responder_side(n, j, p, k).unwrap();
        let higher = GameParams::responder_side(n, j, p, k + dk).unwrap();
        if game_model::is_lying_dominated(&lower) {
            prop_assert!(game_model::is_lying_dominated(&higher));
        }
    }

    #[test]
    fn above_descending_bound_implies_dominance(n in 1u32..=1000, j in 1u32..=1000, p in 0.0f64..0.999, margin in 1e-3f64..1.0) {
        let k = game_model::k_min_descending(j, p).unwrap() * (1.0 + margin) + 1e-6;
        let params = GameParams::responder_side(n, j, p, k).unwrap();
        prop_assert!(game_model::is_lying_dominated(&params));
        prop_assert!(game_model::k_min_dominance(n, j, p).unwrap() < game_model::k_min_descending(j, p).unwrap());
    }

    #[test]
    fn dominance_means_slower_liar_trajectory(n in 1u32..=500, j in 1u32..=200, p in 0.0f64..0.999, k in 0.0f64..5e4, rounds in 1u64..10_000) {
        let params = GameParams::responder_side(n, j, p, k).unwrap();
        if game_model::is_lying_dominated(&params) {
            let liar = game_model::liar_trajectory(rounds, p, k, j).unwrap();
            let truthful = game_model::truthful_trajectory(rounds, n).unwrap();
            prop_assert!(liar < truthful);
            prop_assert!(game_model::expected_liar_per_round(p, k, j).unwrap() < 1.0 / f64::from(n));
        }
    }

    #[test]
    fn ledger_floor_and_replay(ops in prop::collection::vec((0u32..5, any::<bool>()), 0..400), k in 0.5f64..50.0, floor in -5.0f64..5.0) {
        let mut ledger = TrustLedger::with_log(LedgerConfig::new(floor, floor, k).unwrap()).unwrap();
        for _ in 0..5 {
            ledger.register();
        }
        let mut penalized = [false; 5];
        let mut last = [floor; 5];
        for (peer, penalty) in ops {
            let id = PeerId(peer);
            let v = if penalty {
                penalized[peer as usize] = true;
                ledger.penalize(id).unwrap()
            } else {
                ledger.credit(id).unwrap()
            };
            prop_assert!(v >= floor);
            if !penalized[peer as usize] {
                prop_assert!(v >= last[peer as usize]);
            }
            last[peer as usize] = v;
        }
        let replayed = replay(ledger.events().unwrap(), floor, 5).unwrap();
        prop_assert_eq!(replayed.as_slice(), ledger.scores());
    }

    #[test]
    fn credits_commute(order in Just((0u32..40).collect::<Vec<_>>()).prop_shuffle()) {
        let config = LedgerConfig::new(0.0, 0.0, 3.0).unwrap();
        let mut a = TrustLedger::new(config).unwrap();
        let mut b = TrustLedger::new(config).unwrap();
        for _ in 0..4 {
            a.register();
            b.register();
        }
        for i in 0..40u32 {
            a.credit(PeerId(i % 4)).unwrap();
        }
        for i in order {
            b.credit(PeerId(i % 4)).unwrap();
        }
        prop_assert_eq!(a.scores(), b.scores());
    }

    #[test]
    fn argmax_ignores_monotone_rescaling(scores in prop::collection::vec(0u32..20, 1..30), seed in any::<u64>(), scale in 0.1f64..10.0, shift in -100.0f64..100.0) {
        let raw: Vec<f64> = scores.iter().map(|&s| f64::from(s)).collect();
        let transformed: Vec<f64> = raw.iter().map(|&x| (x * scale + shift).exp().min(f64::MAX)).map(|x| x.ln_1p()).collect();
        let vols: Vec<PeerId> = (0..raw.len() as u32).map(PeerId).collect();
        let a = select_in_mode(&vols, &raw, SelectionMode::ByTrust, &mut StreamRng::new(seed)).unwrap();
        let b = select_in_mode(&vols, &transformed, SelectionMode::ByTrust, &mut StreamRng::new(seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn escape_matches_enumeration_exhaustively() {
    for j in 1..=4 {
        for t in 0..=12 {
            for p in [0.0, 0.1, 0.5, 0.9, 1.0] {
                let closed = game_model::escape_probability(j, p, t).unwrap();
                let enumerated = oracle::enumerate_escape_probability(j, p, t).unwrap();
                assert!((closed - enumerated).abs() <= 1e-12, "j={j} p={p} t={t}");
            }
        }
    }
}

#[test]
fn random_selection_is_uniform() {
    let scores = [4.0, 100.0, 0.0];
    let vols = [PeerId(0), PeerId(1), PeerId(2)];
    let mut counts = [0u32; 3];
    let draws = 30_000;
    let mut rng = StreamRng::new(5);
    for _ in 0..draws {
        let (pick, mode) = select_server(&vols, &scores, 0.0, &mut rng).unwrap();
        assert_eq!(mode, SelectionMode::Random);
        counts[pick.index()] += 1;
    }
    let expected = f64::from(draws) / 3.0;
    let sigma = (f64::from(draws) * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
    for c in counts {
        assert!((f64::from(c) - expected).abs() <= 4.0 * sigma, "{counts:?}");
    }
}

fn small_world(seed: u64) -> SimConfig {
    SimConfig {
        good: 300,
        bad: 60,
        liar: 60,
        newcomers: vec![],
        catalog_size: 200,
        n: 20,
        p: 0.9,
        k: 40.0,
        threshold: 5.0,
        floor: 0.0,
        queries_per_cycle: 200,
        reach: 80,
        total_cycles: 60,
        seed,
        profit: 10.0,
        cost: 1.0,
        acquire_on_success: false,
    }
}

#[test]
fn round_protocol_invariants_hold_over_many_rounds() {
    let mut sim = Simulation::new(small_world(17)).unwrap();
    let mut ever_selected = vec![false; sim.peers().len()];
    let mut prev = sim.ledger().scores().to_vec();
    for _ in 0..12_000 {
        let mut rng = sim.round_rng();
        let requester = sim.draw_requester(&mut rng);
        let record = sim.run_round(requester, &mut rng).unwrap();

        // One penalty at most, every other volunteer credited.
        let penalties = usize::from(record.outcome == TransactionOutcome::Failure);
        assert_eq!(record.credits() + penalties, record.volunteers.len(), "{record:?}");
        if record.gate != GateOutcome::Served {
            assert_eq!(record.outcome, TransactionOutcome::None);
        }
        for v in &record.volunteers {
            let peer = &sim.peers()[v.index()];
            if peer.behavior.answers_truthfully() {
                assert!(peer.holds(record.file.unwrap()));
            }
        }

        if let Some(s) = record.selected {
            ever_selected[s.index()] = true;
        }
        let now = sim.ledger().scores();
        for (i, (&before, &after)) in prev.iter().zip(now).enumerate() {
            assert!(after >= 0.0);
            assert!(ever_selected[i] || after >= before, "peer {i} lost trust without being selected");
        }
        prev.copy_from_slice(now);
    }
}

#[test]
fn truthful_volunteer_rate_is_one_over_n() {
    // Reach equal to the whole population makes the sample deterministic, so
    // every truthful peer other than the requester is checked each query.
    let cfg = SimConfig {
        good: 200,
        bad: 0,
        liar: 20,
        reach: 219,
        queries_per_cycle: 100,
        total_cycles: 100,
        threshold: 0.0,
        ..small_world(3)
    };
    let n = f64::from(cfg.n);
    let mut sim = Simulation::new(cfg).unwrap();
    let (mut asked, mut answered, mut liar_misses) = (0u64, 0u64, 0u64);
    sim.run_observed(|record| {
        let truthful = record
            .volunteers
            .iter()
            .filter(|v| v.index() < 200)
            .count() as u64;
        let liars = record.volunteers.len() as u64 - truthful;
        let requester_is_liar = record.requester.index() >= 200;
        asked += 199 + u64::from(requester_is_liar);
        answered += truthful;
        liar_misses += 20 - u64::from(requester_is_liar) - liars;
    })
    .unwrap();
    assert!(asked >= 10_000 * 199);
    assert_eq!(liar_misses, 0, "every liar in the sample must volunteer");
    let rate = answered as f64 / asked as f64;
    let sigma = (rate * (1.0 - rate) / asked as f64).sqrt();
    // Holdings are fixed per peer, so allow for the per-peer sampling spread too.
    assert!((rate - 1.0 / n).abs() < 4.0 * sigma + 0.005, "rate {rate}");
}

#[test]
fn floor_invariant_with_negative_floor_and_gate() {
    let cfg = SimConfig {
        floor: -3.0,
        threshold: -3.0,
        ..small_world(9)
    };
    let mut sim = Simulation::new(cfg).unwrap();
    sim.run().unwrap();
    assert!(sim.ledger().scores().iter().all(|&v| v >= -3.0));
}

#[test]
fn traced_run_replays_exactly() {
    let mut sim = Simulation::with_trace(SimConfig {
        total_cycles: 10,
        ..small_world(4)
    })
    .unwrap();
    sim.run().unwrap();
    let scores = sim.ledger().scores().to_vec();
    let events = sim.take_events();
    assert!(events.iter().any(|e| e.kind == TrustEventKind::Penalty));
    assert_eq!(replay(&events, 0.0, scores.len()).unwrap(), scores);
}

#[test]
fn monte_carlo_error_shrinks_with_trials() {
    let small = oracle::mc_liar_payoff(0.5, 20.0, 6, 200_000, 1).unwrap();
    let large = oracle::mc_liar_payoff(0.5, 20.0, 6, 400_000, 2).unwrap();
    let ratio = large.std_error / small.std_error;
    assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() <= 0.2 * std::f64::consts::FRAC_1_SQRT_2, "{ratio}");

    let small = oracle::mc_escape_frequency(5, 0.3, 4, 50_000, 1).unwrap();
    let large = oracle::mc_escape_frequency(5, 0.3, 4, 100_000, 2).unwrap();
    let ratio = large.std_error / small.std_error;
    assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() <= 0.2 * std::f64::consts::FRAC_1_SQRT_2, "{ratio}");
}

#[test]
fn monte_carlo_agrees_with_closed_forms_on_random_parameters() {
    let mut rng = StreamRng::new(2024);
    for draw in 0..50u64 {
        let j = 1 + rng.below(40) as u32;
        let p = rng.next_f64() * 0.99;
        let k = rng.next_f64() * 3.0 * f64::from(j);
        let t = rng.below(60) as u32;

        let payoff = oracle::mc_liar_payoff(p, k, j, 20_000, draw).unwrap();
        let expected = game_model::expected_liar_per_round(p, k, j).unwrap();
        assert!(payoff.agrees_with(expected), "draw {draw}: {payoff:?} vs {expected}");

        let escape = oracle::mc_escape_frequency(j, p, t, 5_000, draw).unwrap();
        let expected = game_model::escape_probability(j, p, t).unwrap();
        assert!(escape.agrees_with(expected), "draw {draw}: {escape:?} vs {expected}");
    }
}

#[test]
fn oracle_examples() {
    let r = oracle::mc_escape_frequency(2, 0.0, 1, 100_000, 8).unwrap();
    assert!(r.agrees_with(0.5), "{r:?}");
    let r = oracle::mc_liar_payoff(0.0, 29.0, 30, 1_000_000, 8).unwrap();
    assert!(r.agrees_with(0.0), "{r:?}");
}
