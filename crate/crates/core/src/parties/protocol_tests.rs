use super::*;
use crate::mbqc::{brickwork_graph, output_distribution, Pattern};
use crate::parties::Location;
use crate::stats::tv_distance;

fn linear(phis: &[i64]) -> Computation {
    Computation::linear(&phis.iter().map(|&k| Angle::new(k)).collect::<Vec<_>>()).unwrap()
}

fn cfg(variant: Variant) -> RunConfig {
    let mut c = RunConfig::new(variant);
    c.p_forward = 1.0;
    c.delta = 0.01;
    c
}

fn assert_exact(c: &RunConfig, comp: &Computation, seeds: &[u64]) {
    let want = output_distribution(comp).unwrap();
    for &s in seeds {
        let got = exact_output_distribution(c, comp, SeedTree::new(s), 1 << 20).unwrap();
        assert!(got.aborted.is_empty(), "{:?}", got.aborted);
        let tv = tv_distance(&got.distribution, &want);
        assert!(
            tv < 1e-10,
            "{:?} seed {s}: {:?} vs {:?}",
            c.variant,
            got.distribution,
            want
        );
    }
}

#[test]
fn bfk_matches_direct_execution() {
    let c = cfg(Variant::Bfk);
    assert_exact(&c, &linear(&[1, 0]), &[0, 1, 2]);
    assert_exact(&c, &linear(&[3, 6, 0]), &[5, 6]);
    let g = brickwork_graph(2, 3).unwrap();
    let p = Pattern::new(
        [
            (0, Angle::new(1)),
            (1, Angle::new(2)),
            (3, Angle::new(7)),
            (4, Angle::new(4)),
        ]
        .into_iter()
        .collect(),
        [
            (1, [0].into()),
            (2, [1].into()),
            (4, [3].into()),
            (5, [4].into()),
        ]
        .into_iter()
        .collect(),
        [(2, [0].into()), (5, [3].into())].into_iter().collect(),
    );
    let comp = Computation::new(g, p).unwrap();
    assert_exact(&c, &comp, &[9]);
}

#[test]
fn double_server_matches_direct_execution() {
    assert_exact(&cfg(Variant::Double), &linear(&[1, 0]), &[0, 1, 2]);
    assert_exact(&cfg(Variant::Double), &linear(&[5, 2, 0]), &[3]);
}

#[test]
fn triple_server_matches_direct_execution() {
    assert_exact(&cfg(Variant::Triple), &linear(&[1, 0]), &[0, 4]);
}

#[test]
fn single_server_matches_direct_execution() {
    let mut c = cfg(Variant::Single);
    c.h = 2;
    c.l = 1;
    assert_exact(&c, &linear(&[1, 0]), &[0, 7]);
    c.classical_client = true;
    assert_exact(&c, &linear(&[3, 0]), &[2]);
}

#[test]
fn bookkeeping_matches_simulator() {
    for (variant, classical) in [
        (Variant::Bfk, false),
        (Variant::Double, false),
        (Variant::Triple, false),
        (Variant::Single, false),
        (Variant::Single, true),
    ] {
        for seed in 0..5 {
            let mut c = RunConfig::new(variant);
            c.classical_client = classical;
            c.inspect = true;
            if variant == Variant::Single {
                c.h = 3;
                c.l = 2;
            }
            let r = run_with_retries(
                &c,
                &linear(&[2, 5, 1, 0]),
                SeedTree::new(seed),
                MAX_ATTEMPTS,
            )
            .unwrap();
            assert!(r.outcome.output().is_some(), "{variant:?}: {:?}", r.outcome);
            let i = r.inspection.unwrap();
            assert_eq!(i.resource_states_match, Some(true), "{variant:?}");
            if matches!(variant, Variant::Triple | Variant::Single) {
                assert_eq!(i.frames_match, Some(true));
                assert_eq!(i.pair_states_match, Some(true));
            }
        }
    }
}

#[test]
fn guessed_labels_break_bookkeeping() {
    let mut c = cfg(Variant::Triple);
    c.inspect = true;
    c.adversary.strategy = Strategy::GuessBell;
    c.adversary.role = Some(Bob3);
    let mut mismatched = 0;
    for seed in 0..10 {
        let r = run_protocol(&c, &linear(&[1, 0]), SeedTree::new(seed)).unwrap();
        if r.inspection.unwrap().pair_states_match == Some(false) {
            mismatched += 1;
        }
    }
    assert_eq!(mismatched, 10);
}

#[test]
fn unblinded_runs_stay_correct() {
    for variant in [
        Variant::Bfk,
        Variant::Double,
        Variant::Triple,
        Variant::Single,
    ] {
        let mut c = cfg(variant);
        c.blinding = false;
        assert_exact(&c, &linear(&[1, 0]), &[0]);
    }
}

#[test]
fn unblinded_announcements_are_zero() {
    let mut c = cfg(Variant::Single);
    c.blinding = false;
    let comp = linear(&[0, 0]);
    let r = run_protocol(&c, &comp, SeedTree::new(1)).unwrap();
    let first = r
        .transcript
        .records()
        .iter()
        .find_map(|rec| match &rec.message {
            Message::AngleSeq(a) if a.len() > 1 => Some(a.clone()),
            _ => None,
        })
        .unwrap();
    assert!(first.iter().all(|a| *a == Angle::ZERO || *a == Angle::PI));
    assert!(first.iter().filter(|a| **a == Angle::ZERO).count() >= first.len() - 3);
}

#[test]
fn servers_never_see_target_angles() {
    for variant in [
        Variant::Bfk,
        Variant::Double,
        Variant::Triple,
        Variant::Single,
    ] {
        let r = run_with_retries(
            &RunConfig::new(variant),
            &linear(&[1, 2, 0]),
            SeedTree::new(3),
            MAX_ATTEMPTS,
        )
        .unwrap();
        let graph_msgs: Vec<_> = r
            .bob_view()
            .into_iter()
            .filter(|rec| matches!(rec.message, Message::Computation(_)))
            .collect();
        assert_eq!(graph_msgs.len(), 1);
        let json = serde_json::to_string(&graph_msgs[0]).unwrap();
        assert!(!json.contains("phi"), "{json}");
    }
}

#[test]
fn double_server_collusion_is_blocked() {
    let mut c = RunConfig::new(Variant::Double);
    c.adversary.strategy = Strategy::Collude;
    let r = run_protocol(&c, &linear(&[1, 0]), SeedTree::new(0)).unwrap();
    assert_eq!(
        r.outcome.abort_reason(),
        Some(&AbortReason::Policy {
            from: Bob1,
            to: Bob2
        })
    );
    assert!(r
        .transcript
        .records()
        .iter()
        .all(|rec| !(rec.from.is_server() && rec.to.is_server())));
}

#[test]
fn triple_server_collusion_is_allowed() {
    let mut c = cfg(Variant::Triple);
    c.adversary.strategy = Strategy::Collude;
    let r = run_protocol(&c, &linear(&[1, 0]), SeedTree::new(0)).unwrap();
    assert!(r.outcome.output().is_some());
    assert!(r
        .transcript
        .records()
        .iter()
        .any(|rec| rec.from == Bob1 && rec.to == Bob2));
    assert_exact(&c, &linear(&[1, 0]), &[1]);
}

#[test]
fn classical_client_exchanges_no_qubits() {
    let mut c = RunConfig::new(Variant::Single);
    c.classical_client = true;
    c.h = 2;
    c.l = 1;
    let r = run_with_retries(&c, &linear(&[1, 2]), SeedTree::new(4), MAX_ATTEMPTS).unwrap();
    assert!(r.outcome.output().is_some());
    for rec in r.transcript.records() {
        if rec.from == Alice || rec.to == Alice {
            assert!(!rec.message.is_quantum(), "{rec:?}");
        }
    }
}

#[test]
fn guessing_server_is_caught() {
    let mut c = cfg(Variant::Single);
    c.h = 5;
    c.l = 4;
    c.adversary.strategy = Strategy::GuessBell;
    let mut caught = 0;
    for seed in 0..50 {
        let r = run_protocol(&c, &linear(&[1, 0]), SeedTree::new(seed)).unwrap();
        match r.outcome.abort_reason() {
            Some(AbortReason::Cheating { .. }) => caught += 1,
            None => {}
            other => panic!("{other:?}"),
        }
    }
    // escape probability is 4^-4 per run
    assert!(caught >= 48, "{caught}");
}

#[test]
fn flipped_bits_corrupt_the_output() {
    let mut c = cfg(Variant::Bfk);
    c.adversary.strategy = Strategy::FlipBits;
    let comp = linear(&[1]);
    let got = exact_output_distribution(&c, &comp, SeedTree::new(0), 1 << 16).unwrap();
    let want = output_distribution(&comp).unwrap();
    assert!(tv_distance(&got.distribution, &want) > 0.4);
}

#[test]
fn shortfall_aborts_and_retries() {
    let mut c = RunConfig::new(Variant::Single);
    c.p_forward = 0.05;
    c.delta = 0.1;
    let comp = linear(&[1, 0]);
    let r = run_protocol(&c, &comp, SeedTree::new(0)).unwrap();
    assert!(matches!(
        r.outcome.abort_reason(),
        Some(AbortReason::Retry { .. })
    ));
    let last = r.transcript.records().last().unwrap();
    assert_eq!(last.message, Message::Abort("retry".into()));

    c.p_forward = 0.5;
    c.delta = 2.0;
    let r = run_with_retries(&c, &comp, SeedTree::new(0), MAX_ATTEMPTS).unwrap();
    assert!(r.outcome.output().is_some());
}

#[test]
fn wrong_sign_convention_is_rejected() {
    let mut c = RunConfig::new(Variant::Single);
    c.signs.frame = BasisSign::Plus;
    assert!(matches!(
        run_protocol(&c, &linear(&[1, 0]), SeedTree::new(0)),
        Err(ProtocolError::SignConvention { .. })
    ));
    let mut c = RunConfig::new(Variant::Bfk);
    c.signs.bfk = BasisSign::Minus;
    assert!(run_protocol(&c, &linear(&[1, 0]), SeedTree::new(0)).is_err());
}

#[test]
fn mismatched_m_is_rejected() {
    let mut c = RunConfig::new(Variant::Bfk);
    c.m = Some(5);
    assert!(matches!(
        run_protocol(&c, &linear(&[1, 0]), SeedTree::new(0)),
        Err(ProtocolError::Config(_))
    ));
    assert!(run_double_server(&c, &linear(&[1, 0]), SeedTree::new(0)).is_err());
}

#[test]
fn runs_are_reproducible() {
    let mut c = RunConfig::new(Variant::Single);
    c.h = 2;
    c.l = 1;
    let comp = linear(&[1, 3, 0]);
    let a = run_with_retries(&c, &comp, SeedTree::new(11), MAX_ATTEMPTS).unwrap();
    let b = run_with_retries(&c, &comp, SeedTree::new(11), MAX_ATTEMPTS).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.transcript.to_jsonl(), b.transcript.to_jsonl());
}

#[test]
fn decoy_trials() {
    let honest = decoy_trial(4, 3, Strategy::Honest, SeedTree::new(0)).unwrap();
    assert!(!honest.caught());
    let caught = (0..200)
        .filter(|&s| {
            decoy_trial(3, 2, Strategy::GuessBell, SeedTree::new(s))
                .unwrap()
                .caught()
        })
        .count();
    // expected 200·(1 − 1/16) = 187.5
    assert!((170..=200).contains(&caught), "{caught}");
    assert!(decoy_trial(1, 2, Strategy::Honest, SeedTree::new(0)).is_err());
}

#[test]
fn discarded_particles_end_discarded() {
    let c = RunConfig::new(Variant::Single);
    let comp = linear(&[1, 0]);
    let seeds = SeedTree::new(2);
    let cfg = c.clone();
    let mut sess = Session::new(&cfg, &comp, seeds, nature_for(seeds));
    let out = sess.single();
    assert!(out.is_ok() || matches!(out, Err(Halt::Abort(_))));
    // nothing is left with the client
    for id in 0..1000u64 {
        if let Some(loc) = sess.world.location(QubitId(id)) {
            assert_ne!(loc, Location::Held(Alice));
        }
    }
}

#[test]
fn unblinded_bfk_sends_plain_angles() {
    let mut c = RunConfig::new(Variant::Bfk);
    c.blinding = false;
    let comp = linear(&[3, 5]);
    let r = run_protocol(&c, &comp, SeedTree::new(8)).unwrap();
    let deltas: Vec<Angle> = r
        .transcript
        .records()
        .iter()
        .filter_map(|rec| match &rec.message {
            Message::AngleSeq(a) => Some(a[0]),
            _ => None,
        })
        .collect();
    assert_eq!(deltas[0], Angle::new(3));
}

#[test]
fn bob_bound_positions_stay_inside_the_stream() {
    let mut c = RunConfig::new(Variant::Single);
    c.h = 3;
    c.l = 2;
    let r = run_with_retries(&c, &linear(&[1, 2, 3]), SeedTree::new(6), MAX_ATTEMPTS).unwrap();
    let recs = r.transcript.records();
    let stream_len = recs
        .iter()
        .find_map(|rec| match &rec.message {
            Message::QubitTransfer(q) if rec.from == Alice && rec.to == Bob => Some(q.len()),
            _ => None,
        })
        .unwrap();
    let first = recs
        .iter()
        .find_map(|rec| match &rec.message {
            Message::PositionList(p) if rec.to == Bob => Some(p.clone()),
            _ => None,
        })
        .unwrap();
    assert_eq!(first.len(), 2 * (4 + 2));
    assert!(first.iter().all(|&p| p < stream_len));
    let announce_to_bob = recs
        .iter()
        .any(|rec| rec.to == Bob && matches!(rec.message, Message::DecoyAnnounce { .. }));
    assert!(!announce_to_bob);
}

#[test]
fn survivor_counts_follow_the_binomial() {
    use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};
    let items: Vec<usize> = (0..16).collect();
    let mut rng = RngSampler(SeedTree::new(21).rng());
    let trials = 10_000;
    let mut counts = [0u64; 17];
    for _ in 0..trials {
        counts[alice_forward(&items, 0.5, &mut rng).items.len()] += 1;
    }
    let bin = Binomial::new(0.5, 16).unwrap();
    // pool the thin tails so every cell expects at least five
    let cells: Vec<(std::ops::RangeInclusive<u64>, f64)> =
        std::iter::once((0..=3, (0..=3).map(|k| bin.pmf(k)).sum()))
            .chain((4..=12).map(|k| (k..=k, bin.pmf(k))))
            .chain(std::iter::once((
                13..=16,
                (13..=16).map(|k| bin.pmf(k)).sum(),
            )))
            .collect();
    let stat: f64 = cells
        .iter()
        .map(|(r, p)| {
            let obs: u64 = r.clone().map(|k| counts[k as usize]).sum();
            let exp = p * trials as f64;
            (obs as f64 - exp).powi(2) / exp
        })
        .sum();
    let pval = 1.0 - ChiSquared::new((cells.len() - 1) as f64).unwrap().cdf(stat);
    assert!(pval > 0.01, "chi-square p = {pval}");
}

#[test]
fn decoy_labels_are_uniform() {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let mut w = World::new(Box::new(crate::sampling::Forced(0)));
    let mut rng = RngSampler(SeedTree::new(5).rng());
    let d = make_decoys(&mut w, 10_000, &mut rng);
    let mut counts = [0f64; 4];
    for l in &d.labels {
        counts[l.index()] += 1.0;
    }
    let stat: f64 = counts.iter().map(|c| (c - 2500.0).powi(2) / 2500.0).sum();
    assert!(1.0 - ChiSquared::new(3.0).unwrap().cdf(stat) > 0.01);
}

#[test]
fn guessing_three_decoys_rarely_passes() {
    let trials = 20_000u64;
    let passed = (0..trials)
        .filter(|&s| {
            !decoy_trial(4, 3, Strategy::GuessBell, SeedTree::new(s))
                .unwrap()
                .caught()
        })
        .count();
    let p = 4f64.powi(-3);
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    let est = passed as f64 / trials as f64;
    assert!((est - p).abs() <= 3.0 * sigma, "{est} vs {p}");
}

#[test]
fn exact_retries_carry_forwarding_failures() {
    let comp = Computation::linear(&[Angle::new(1)]).unwrap();
    let mut cfg = RunConfig::new(Variant::Single);
    cfg.delta = 0.01;
    cfg.p_forward = 0.3;
    let oracle = output_distribution(&comp).unwrap();
    let mut retried = 0;
    for s in 0..20 {
        let seeds = SeedTree::new(s);
        let first =
            exact_output_distribution(&cfg, &comp, seeds.child("attempt").index(0), 1 << 16)
                .unwrap();
        if first.aborted.contains_key("retry") {
            retried += 1;
        }
        let e = exact_with_retries(&cfg, &comp, seeds, 1 << 16, MAX_ATTEMPTS).unwrap();
        let done: f64 = e.distribution.values().sum();
        let lost: f64 = e.aborted.values().sum();
        assert!((done + lost - 1.0).abs() < 1e-9);
        if lost == 0.0 {
            assert!(tv_distance(&e.distribution, &oracle) < 1e-9);
        }
    }
    assert!(retried > 0);
}
