use std::time::Duration;

use pgc_core::abort::{AbortCause, CheckKind, Role};
use pgc_core::channel::Channel;
use pgc_core::circuit::programs::{
    counter, counter_full, counter_init, keyed_db, lcs_full, lcs_step, map_get, map_set, map_start, millionaires,
};
use pgc_core::circuit::{simulate_plaintext, Circuit};
use pgc_core::frame::split_frames;
use pgc_core::protocol::{
    run_cloud, run_evaluator, run_generator, Hooks, LocalSession, PartyResults, Prepared, ProtocolConfig,
    SessionOptions, Tamper, TamperTarget,
};
use pgc_core::transport::MemTransport;
use pgc_core::util::{bits_of, value_of};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn config(s: usize) -> ProtocolConfig {
    let mut cfg = ProtocolConfig::malicious(s).with_dealer_ot();
    cfg.timeout = Duration::from_secs(20);
    cfg
}

fn session(s: usize, seed: u64) -> LocalSession {
    LocalSession::new(
        config(s),
        SessionOptions {
            seed: Some(seed),
            ..Default::default()
        },
    )
}

fn tampered(s: usize, seed: u64, tamper: Tamper) -> LocalSession {
    LocalSession::new(
        config(s),
        SessionOptions {
            seed: Some(seed),
            hooks: Hooks::with_tamper(tamper),
            ..Default::default()
        },
    )
}

fn ok_outputs(r: &PartyResults) -> (Vec<bool>, Vec<bool>) {
    r.outputs()
        .unwrap_or_else(|| panic!("execution aborted: {:?}", r.root_cause()))
}

fn cause(r: &PartyResults) -> AbortCause {
    r.root_cause().expect("execution should abort").cause.clone()
}

#[test]
fn millionaires_matches_plaintext_exhaustively() {
    let c = millionaires(3);
    let mut sess = session(5, 1);
    for x in 0..8 {
        for y in 0..8 {
            let (gx, ey) = (bits_of(x, 3), bits_of(y, 3));
            let r = sess.run(&c, &gx, &ey).unwrap();
            let expect = simulate_plaintext(&c, &gx, &ey, &[]).unwrap();
            let (g, e) = ok_outputs(&r);
            assert_eq!((g, e), (expect.gen, expect.evl), "x={x} y={y}");
        }
    }
}

#[test]
fn keyed_db_matches_plaintext_with_even_eval_count() {
    // S = 10 gives four evaluation circuits.
    let c = keyed_db(4, 3);
    let mut sess = session(10, 2);
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for _ in 0..6 {
        let db: Vec<bool> = (0..12).map(|_| rng.gen()).collect();
        let key = bits_of(rng.gen_range(0..4), 2);
        let r = sess.run(&c, &db, &key).unwrap();
        let expect = simulate_plaintext(&c, &db, &key, &[]).unwrap();
        assert_eq!(ok_outputs(&r).1, expect.evl);
    }
}

#[test]
fn group_based_ot_end_to_end() {
    let mut cfg = ProtocolConfig::malicious(5);
    cfg.timeout = Duration::from_secs(20);
    let mut sess = LocalSession::new(
        cfg,
        SessionOptions {
            seed: Some(3),
            ..Default::default()
        },
    );
    let c = millionaires(4);
    let r = sess.run(&c, &bits_of(11, 4), &bits_of(6, 4)).unwrap();
    assert_eq!(ok_outputs(&r).1, vec![true]);
    let r = sess.run(&c, &bits_of(2, 4), &bits_of(6, 4)).unwrap();
    assert_eq!(ok_outputs(&r).0, vec![false]);
}

#[test]
fn counter_chain_equals_monolithic() {
    let n = 3;
    for (i, steps) in [[1u64, 6, 7], [0, 0, 5], [7, 7, 7]].iter().enumerate() {
        let mut sess = session(5, 10 + i as u64);
        let r = sess.run(&counter_init(n), &[], &bits_of(steps[0], n)).unwrap();
        assert!(r.is_ok());
        let mut last = Vec::new();
        for &a in &steps[1..] {
            let r = sess.run(&counter(n), &[], &bits_of(a, n)).unwrap();
            last = ok_outputs(&r).1;
        }
        let all: Vec<bool> = steps.iter().flat_map(|&v| bits_of(v, n)).collect();
        let mono = simulate_plaintext(&counter_full(n, 2), &[], &all, &[]).unwrap();
        assert_eq!(last, mono.evl);
    }
}

#[test]
fn lcs_chain_equals_monolithic() {
    let (n, w) = (3, 2);
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    for trial in 0..4 {
        let a: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        let b: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        let mut sess = session(5, 20 + trial);
        let mut last = Vec::new();
        for k in 0..n {
            let r = sess.run(&lcs_step(k, w), &[a[k]], &[b[k]]).unwrap();
            last = ok_outputs(&r).1;
        }
        let mono = simulate_plaintext(&lcs_full(n, w), &a, &b, &[]).unwrap();
        assert_eq!(last, mono.evl, "a={a:?} b={b:?}");
    }
}

#[test]
fn map_chain_sets_and_gets() {
    let (cells, bits) = (4, 3);
    let mut sess = session(5, 5);
    assert!(sess.run(&map_start(cells, bits), &[], &[false]).unwrap().is_ok());
    let get = |sess: &mut LocalSession, cell: u64| {
        let r = sess.run(&map_get(cells, bits), &[], &bits_of(cell, 2)).unwrap();
        value_of(&ok_outputs(&r).1)
    };
    assert_eq!(get(&mut sess, 1), 0);
    let set = [bits_of(1, 2), bits_of(5, bits)].concat();
    assert!(sess.run(&map_set(cells, bits), &[], &set).unwrap().is_ok());
    assert_eq!(get(&mut sess, 1), 5);
    assert_eq!(get(&mut sess, 2), 0);
}

#[test]
fn semi_honest_counter_chain() {
    let mut cfg = ProtocolConfig::semi_honest().with_dealer_ot();
    cfg.timeout = Duration::from_secs(20);
    let mut sess = LocalSession::new(
        cfg,
        SessionOptions {
            seed: Some(6),
            ..Default::default()
        },
    );
    assert!(sess.run(&counter_init(4), &[], &bits_of(9, 4)).unwrap().is_ok());
    let r = sess.run(&counter(4), &[], &bits_of(4, 4)).unwrap();
    assert_eq!(value_of(&ok_outputs(&r).1), 13);
    let r = sess.run(&counter(4), &[], &bits_of(4, 4)).unwrap();
    assert_eq!(value_of(&ok_outputs(&r).1), 1);
}

#[test]
fn key_lifecycle_reuses_split_and_skips_ot() {
    let mut sess = session(5, 7);
    let r = sess.run(&counter_init(2), &[], &bits_of(1, 2)).unwrap();
    let split0 = r.evaluator.as_ref().unwrap().split.clone();
    let cloud_split0 = sess.cloud_state().unwrap().split.clone();
    assert_eq!(split0, cloud_split0);
    let ot = sess.config().ot.clone();
    let stats = ot.stats();
    assert_eq!(stats.get("cc.send"), 1);
    for _ in 0..3 {
        let r = sess.run(&counter(2), &[], &bits_of(1, 2)).unwrap();
        assert!(r.is_ok());
        assert_eq!(r.evaluator.as_ref().unwrap().split, split0);
        assert_eq!(sess.cloud_state().unwrap().split, split0);
    }
    assert_eq!(stats.get("cc.send"), 1);
    assert_eq!(stats.get("cc.recv"), 1);
    assert_eq!(stats.get("oot.send"), 4);
}

#[test]
fn honest_runs_verify_every_check_circuit() {
    let mut sess = session(16, 8);
    assert!(sess.run(&counter_init(3), &[], &bits_of(2, 3)).unwrap().is_ok());
    let r = sess.run(&counter(3), &[], &bits_of(3, 3)).unwrap();
    let report = &r.cloud.as_ref().unwrap().report;
    let checks = 16 - 6;
    let c = Prepared::new(counter(3), sess.config()).unwrap().circuit;
    assert_eq!(report.checked_gates, checks * c.and_count());
    assert_eq!(report.checked_partial_gates, checks * 3);
    assert!(report.invalid_eval.is_empty());
}

#[test]
fn corrupted_check_gate_is_caught_and_poisons_chain() {
    let mut sess = tampered(5, 9, Tamper::GateRow(TamperTarget::FirstCheck));
    sess.hooks_mut().tamper = None;
    assert!(sess.run(&counter_init(2), &[], &bits_of(1, 2)).unwrap().is_ok());
    sess.hooks_mut().tamper = Some(Tamper::GateRow(TamperTarget::FirstCheck));
    let r = sess.run(&counter(2), &[], &bits_of(1, 2)).unwrap();
    let a = r.root_cause().unwrap();
    assert_eq!(a.origin, Role::Cloud);
    assert_eq!(a.phase, 5);
    assert!(matches!(
        a.cause,
        AbortCause::CheckCircuitFailed {
            kind: CheckKind::Gates,
            item: 0,
            ..
        }
    ));
    // Every party learns the same reason.
    assert_eq!(r.generator.as_ref().unwrap_err(), a);
    assert_eq!(r.evaluator.as_ref().unwrap_err(), a);
    assert!(sess.cloud_state().unwrap().poisoned);

    sess.hooks_mut().tamper = None;
    let r = sess.run(&counter(2), &[], &bits_of(1, 2)).unwrap();
    assert_eq!(cause(&r), AbortCause::ChainPoisoned);
}

#[test]
fn corrupted_eval_gate_is_outvoted() {
    let c = millionaires(2);
    // S = 12 leaves four evaluation circuits.
    let mut sess = tampered(12, 10, Tamper::GateRow(TamperTarget::FirstEval));
    for x in 0..4 {
        for y in 0..4 {
            let r = sess.run(&c, &bits_of(x, 2), &bits_of(y, 2)).unwrap();
            match r.outputs() {
                Some((_, e)) => assert_eq!(e, vec![x > y]),
                None => assert!(matches!(cause(&r), AbortCause::UnreliableOutput(_))),
            }
        }
    }
}

#[test]
fn partial_gate_tampering_is_caught() {
    for (tamper, kind) in [
        (Tamper::PartialGate(TamperTarget::AllCheck), CheckKind::PartialGates),
        (Tamper::PartialR(TamperTarget::FirstCheck), CheckKind::PartialTransform),
    ] {
        let mut sess = session(5, 11);
        assert!(sess.run(&counter_init(2), &[], &bits_of(1, 2)).unwrap().is_ok());
        sess.hooks_mut().tamper = Some(tamper);
        let r = sess.run(&counter(2), &[], &bits_of(1, 2)).unwrap();
        assert!(
            matches!(cause(&r), AbortCause::CheckCircuitFailed { kind: k, .. } if k == kind),
            "{tamper}"
        );
    }
}

#[test]
fn generator_input_tampering_is_caught() {
    let c = millionaires(3);
    let r = tampered(5, 12, Tamper::GenInputFlip(TamperTarget::FirstEval))
        .run(&c, &bits_of(1, 3), &bits_of(2, 3))
        .unwrap();
    assert!(matches!(cause(&r), AbortCause::InconsistentGeneratorInput(_)));

    let r = tampered(5, 12, Tamper::SwapEvlLabels(TamperTarget::FirstEval))
        .run(&c, &bits_of(1, 3), &bits_of(2, 3))
        .unwrap();
    assert!(matches!(cause(&r), AbortCause::CommitmentMismatch { wire: 0, .. }));

    let r = tampered(5, 12, Tamper::SwapEvlLabels(TamperTarget::FirstCheck))
        .run(&c, &bits_of(1, 3), &bits_of(2, 3))
        .unwrap();
    assert!(matches!(
        cause(&r),
        AbortCause::CheckCircuitFailed {
            kind: CheckKind::InputGates,
            item: 0,
            ..
        }
    ));
}

#[test]
fn split_hash_lies_are_caught_by_evaluator() {
    let c = millionaires(2);
    for tamper in [Tamper::SplitHashSwap(1), Tamper::CloudLieSplit(3)] {
        let r = tampered(5, 13, tamper).run(&c, &bits_of(1, 2), &bits_of(2, 2)).unwrap();
        let a = r.root_cause().unwrap();
        assert_eq!(a.origin, Role::Evaluator);
        assert!(matches!(a.cause, AbortCause::SplitHashMismatch(_)), "{tamper}: {a}");
    }
}

#[test]
fn cloud_output_tampering_fails_mac() {
    let r = tampered(5, 14, Tamper::CloudFlipOutput(0))
        .run(&millionaires(2), &bits_of(3, 2), &bits_of(1, 2))
        .unwrap();
    let a = r.root_cause().unwrap();
    assert_eq!(a.origin, Role::Evaluator);
    assert_eq!(a.cause, AbortCause::OutputMac);
}

#[test]
fn missing_state_is_rejected() {
    let r = session(5, 15).run(&counter(2), &[], &bits_of(1, 2)).unwrap();
    assert_eq!(cause(&r), AbortCause::MissingState);
}

/// Runs the three parties with independently chosen configurations.
fn run_mixed(cfgs: [ProtocolConfig; 3], program: &Circuit) -> Vec<AbortCause> {
    let preps: Vec<Prepared> = cfgs
        .iter()
        .map(|c| Prepared::new(program.clone(), c).unwrap())
        .collect();
    let (ge, eg) = MemTransport::pair();
    let (gc, cg) = MemTransport::pair();
    let (ec, ce) = MemTransport::pair();
    let ch = |me, peer, t: MemTransport| Channel::new(me, peer, Box::new(t), 1).with_timeout(Duration::from_secs(5));
    let (mut g1, mut g2) = (
        ch(Role::Generator, Role::Evaluator, ge),
        ch(Role::Generator, Role::Cloud, gc),
    );
    let (mut e1, mut e2) = (
        ch(Role::Evaluator, Role::Generator, eg),
        ch(Role::Evaluator, Role::Cloud, ec),
    );
    let (mut c1, mut c2) = (
        ch(Role::Cloud, Role::Generator, cg),
        ch(Role::Cloud, Role::Evaluator, ce),
    );
    let hooks = Hooks::default();
    let gi = vec![false; program.gen_inputs];
    let ei = vec![false; program.evl_inputs];
    std::thread::scope(|s| {
        let g = s.spawn(|| {
            let mut rng = ChaCha20Rng::seed_from_u64(1);
            run_generator(&cfgs[0], &preps[0], &mut g1, &mut g2, &gi, None, &hooks, &mut rng).err()
        });
        let e = s.spawn(|| {
            let mut rng = ChaCha20Rng::seed_from_u64(2);
            run_evaluator(&cfgs[1], &preps[1], &mut e1, &mut e2, &ei, &hooks, &mut rng).err()
        });
        let c = s.spawn(|| {
            let mut rng = ChaCha20Rng::seed_from_u64(3);
            run_cloud(&cfgs[2], &preps[2], &mut c1, &mut c2, None, None, &hooks, &mut rng).err()
        });
        [g.join().unwrap(), e.join().unwrap(), c.join().unwrap()]
            .into_iter()
            .map(|a| a.expect("party should abort").cause)
            .collect()
    })
}

#[test]
fn mismatched_configuration_aborts_in_handshake() {
    let base = config(5);
    let mut other = base.clone();
    other.circuits = 6;
    let causes = run_mixed([base.clone(), base.clone(), other], &millionaires(2));
    assert!(
        causes.iter().any(|c| matches!(c, AbortCause::ConfigMismatch(_))),
        "{causes:?}"
    );
}

#[test]
fn honest_transcripts_keep_phase_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut sess = LocalSession::new(
        config(5),
        SessionOptions {
            seed: Some(16),
            record_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        },
    );
    assert!(sess.run(&counter_init(2), &[], &bits_of(2, 2)).unwrap().is_ok());
    let r = sess.run(&counter(2), &[], &bits_of(1, 2)).unwrap();
    assert!(r.is_ok());
    for (from, to) in [
        (Role::Generator, Role::Evaluator),
        (Role::Generator, Role::Cloud),
        (Role::Evaluator, Role::Generator),
        (Role::Evaluator, Role::Cloud),
        (Role::Cloud, Role::Generator),
        (Role::Cloud, Role::Evaluator),
    ] {
        let bytes = std::fs::read(dir.path().join(format!("{from}-{to}.pgct"))).unwrap();
        let frames: Vec<_> = split_frames(&bytes, usize::MAX)
            .into_iter()
            .map(Result::unwrap)
            .collect();
        let total: usize = frames.iter().map(|(_, n)| n).sum();
        assert_eq!(total as u64, r.bytes[&(from, to)], "{from}-{to}");
        assert!(frames.windows(2).all(|w| w[0].0.phase <= w[1].0.phase), "{from}-{to}");
    }
}

#[test]
fn saved_wires_cut_evaluator_bandwidth() {
    let (e, w) = (8, 4);
    let mut sess = session(5, 17);
    let store = pgc_core::circuit::programs::keyed_db_store(e, w);
    let lookup = pgc_core::circuit::programs::keyed_db_lookup(e, w);
    let evl_bytes = |r: &PartyResults| {
        [
            (Role::Evaluator, Role::Generator),
            (Role::Evaluator, Role::Cloud),
            (Role::Generator, Role::Evaluator),
            (Role::Cloud, Role::Evaluator),
        ]
        .iter()
        .map(|k| r.bytes[k])
        .sum::<u64>()
    };
    let db: Vec<bool> = (0..e * w).map(|i| i % 3 == 0).collect();
    let r0 = sess.run(&store, &[], &[db.clone(), bits_of(1, 3)].concat()).unwrap();
    assert!(r0.is_ok());
    let r1 = sess.run(&lookup, &[], &bits_of(5, 3)).unwrap();
    assert_eq!(ok_outputs(&r1).1, db[5 * w..6 * w].to_vec());
    assert!(evl_bytes(&r1) < evl_bytes(&r0));
}
