use std::collections::HashMap;
use std::path::Path;

use rand::{CryptoRng, RngCore};
use rayon::prelude::*;

use super::material::{consistency_matrix, digest_bits, majority, output_wires, Instance};
use super::tamper::{Hooks, Tamper};
use super::{broadcast, check_chain, fail, handshake, msg, ot_label, Hello, Prepared, ProtocolConfig, WireResult};
use crate::abort::{Abort, AbortCause, CheckKind, Role};
use crate::channel::Channel;
use crate::cut_choose::{key_hash, open, CircuitSplit, KeyRecords};
use crate::garble::{evaluate_circuit, GarbledGate};
use crate::label::{CircuitSeed, Label, Security};
use crate::ot::{commit_label, derive_eval_input_label, oot_cloud, opening_for, Commitment, OotSeed};
use crate::partial::{
    check_partial_gates, evaluate_partial_gate, semi_honest_remap, OneWireGate, PartialCheck, PartialError,
};
use crate::state::{Mode, SavedState, WireSave};
use crate::wire::{Reader, Writer};

const ME: Role = Role::Cloud;

/// What the cloud verified and which evaluation circuits it had to drop.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CloudReport {
    pub checked_gates: usize,
    pub checked_partial_gates: usize,
    pub checked_input_gates: usize,
    /// Evaluation circuits whose gates failed to decrypt or whose saved
    /// labels were missing.
    pub invalid_eval: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct CloudOutcome {
    pub state: SavedState,
    pub report: CloudReport,
}

/// Runs the cloud for one execution. When `persist` is given, the new state
/// is written there before the generator is told to save.
#[allow(clippy::too_many_arguments)]
pub fn run_cloud<R: RngCore + CryptoRng>(
    cfg: &ProtocolConfig,
    prep: &Prepared,
    gen: &mut Channel,
    evl: &mut Channel,
    state: Option<&SavedState>,
    persist: Option<&Path>,
    hooks: &Hooks,
    rng: &mut R,
) -> Result<CloudOutcome, Abort> {
    let r = Cloud { cfg, prep, hooks }.run(gen, evl, state, persist, rng);
    if let Err(a) = &r {
        broadcast(a, gen, evl);
    }
    r
}

struct Cloud<'a> {
    cfg: &'a ProtocolConfig,
    prep: &'a Prepared,
    hooks: &'a Hooks,
}

fn check_failed(phase: u8, circuit: usize, kind: CheckKind, item: usize) -> Abort {
    fail(phase, ME, AbortCause::CheckCircuitFailed { circuit, kind, item })
}

fn collision(phase: u8, circuit: usize, e: PartialError) -> Abort {
    let wire = match e {
        PartialError::HashCollision(w) => w,
        PartialError::Count { .. } => 0,
    };
    fail(phase, ME, AbortCause::HashCollision { circuit, wire })
}

/// Per-circuit view held by the cloud.
enum Slot {
    Check {
        inst: Instance,
        ts: Vec<(Label, Label)>,
        openings: Vec<([u8; 16], [u8; 16])>,
    },
    Eval {
        gen_labels: Vec<Label>,
        evl_labels: Vec<Label>,
        partial_labels: Option<Vec<Label>>,
    },
}

enum Verdict {
    Checked(usize),
    Evaluated(Option<Vec<Label>>),
}

impl Cloud<'_> {
    fn run<R: RngCore + CryptoRng>(
        &self,
        gen: &mut Channel,
        evl: &mut Channel,
        state: Option<&SavedState>,
        persist: Option<&Path>,
        rng: &mut R,
    ) -> Result<CloudOutcome, Abort> {
        let (cfg, prep) = (self.cfg, self.prep);
        let sec = cfg.sec;
        let s = cfg.circuits;
        let malicious = cfg.mode == Mode::Malicious;
        let layout = &prep.layout;
        let m = layout.evl_input_count();
        let n_gen = prep.circuit.gen_inputs;
        let mut report = CloudReport::default();

        // Phase 1: handshake, split, commitments and packages.
        let hello = Hello::for_state(prep, cfg, state);
        let (hg, _) = handshake(&hello, gen, evl)?;
        check_chain(ME, &hello, &hg, state, prep, cfg)?;

        let (split, keys) = if malicious {
            let keys: Vec<(bool, Label)> = match state.and_then(|st| st.keys.as_ref()) {
                Some(k @ KeyRecords::Cloud(_)) => match k.evolve(sec) {
                    KeyRecords::Cloud(k) => k,
                    _ => unreachable!(),
                },
                Some(_) => {
                    return Err(fail(
                        1,
                        ME,
                        AbortCause::StateMismatch("key records of another role".into()),
                    ))
                }
                None => {
                    let split =
                        CircuitSplit::select(s, rng).map_err(|e| fail(1, ME, AbortCause::Malformed(e.to_string())))?;
                    self.hooks.publish_split(split.bits());
                    let got = cfg.ot.receive(gen, 1, ot_label::CUT_AND_CHOOSE, split.bits(), rng)?;
                    let mut keys = Vec::with_capacity(s);
                    for (i, k) in got.iter().enumerate() {
                        let b: [u8; 16] = k
                            .as_slice()
                            .try_into()
                            .map_err(|_| fail(1, ME, AbortCause::Malformed("circuit key length".into())))?;
                        keys.push((split.is_check(i), Label(u128::from_le_bytes(b))));
                    }
                    keys
                }
            };
            let split = CircuitSplit::from_bits(keys.iter().map(|k| k.0).collect());
            self.hooks.publish_split(split.bits());

            let mut w = Writer::new();
            for (i, &(b, k)) in keys.iter().enumerate() {
                let claimed = match self.hooks.tamper {
                    Some(Tamper::CloudLieSplit(j)) if j % s == i => !b,
                    _ => b,
                };
                w.u8(claimed as u8).bytes(&key_hash(k));
            }
            evl.send(1, msg::SPLIT_HASHES_CLOUD, w.finish())?;
            (split, Some(keys))
        } else {
            (CircuitSplit::all_eval(s), None)
        };

        let mut commitments: Vec<Vec<[Commitment; 2]>> = Vec::new();
        let mut slots: Vec<Slot> = Vec::with_capacity(s);
        if let Some(keys) = &keys {
            let payload = gen.recv(1, msg::COMMITMENTS)?;
            let mut r = Reader::new(&payload);
            for _ in 0..s {
                let mut row = Vec::with_capacity(m);
                for _ in 0..m {
                    let c0: Commitment = r.take(32).or_malformed(1, gen)?.try_into().unwrap();
                    let c1: Commitment = r.take(32).or_malformed(1, gen)?.try_into().unwrap();
                    row.push([c0, c1]);
                }
                commitments.push(row);
            }
            r.finish().or_malformed(1, gen)?;

            let payload = gen.recv(1, msg::PACKAGES)?;
            let mut r = Reader::new(&payload);
            let mut raw = Vec::with_capacity(s);
            for &(check, key) in keys {
                let eval_part = r.blob().or_malformed(1, gen)?;
                let check_part = r.blob().or_malformed(1, gen)?;
                raw.push(if check {
                    open(key, "check package", check_part)
                } else {
                    open(key, "generator inputs", eval_part)
                });
            }
            r.finish().or_malformed(1, gen)?;

            for (i, buf) in raw.iter().enumerate() {
                let mut r = Reader::new(buf);
                if split.is_check(i) {
                    let seed = Label(u128::from_le_bytes(
                        r.take(16).or_malformed(1, gen)?.try_into().unwrap(),
                    ));
                    if seed.0 & !sec.label_mask() != 0 {
                        return Err(check_failed(1, i, CheckKind::Gates, 0));
                    }
                    let mut ts = Vec::with_capacity(m);
                    let mut openings = Vec::with_capacity(m);
                    for _ in 0..m {
                        let t0 = r.label(sec).or_malformed(1, gen)?;
                        let t1 = r.label(sec).or_malformed(1, gen)?;
                        let o0: [u8; 16] = r.take(16).or_malformed(1, gen)?.try_into().unwrap();
                        let o1: [u8; 16] = r.take(16).or_malformed(1, gen)?.try_into().unwrap();
                        ts.push((t0, t1));
                        openings.push((o0, o1));
                    }
                    r.finish().or_malformed(1, gen)?;
                    slots.push(Slot::Check {
                        inst: Instance::new(sec, CircuitSeed(seed), prep),
                        ts,
                        openings,
                    });
                } else {
                    let gen_labels = read_labels(&mut r, sec, n_gen, 1, gen)?;
                    r.finish().or_malformed(1, gen)?;
                    slots.push(Slot::Eval {
                        gen_labels,
                        evl_labels: Vec::new(),
                        partial_labels: None,
                    });
                }
            }
        } else {
            let payload = gen.recv(1, msg::GEN_LABELS)?;
            let mut r = Reader::new(&payload);
            let gen_labels = read_labels(&mut r, sec, n_gen, 1, gen)?;
            r.finish().or_malformed(1, gen)?;
            slots.push(Slot::Eval {
                gen_labels,
                evl_labels: Vec::new(),
                partial_labels: None,
            });
        }

        // Phase 2: evaluator inputs.
        let seeds: Vec<OotSeed> = oot_cloud(gen, evl, 2, m)?;
        let payload = evl.recv(2, msg::IKEYS_FWD)?;
        let mut r = Reader::new(&payload);
        let count = r.u32().or_malformed(2, evl)? as usize;
        let mut ikeys: HashMap<usize, Label> = HashMap::with_capacity(count);
        for _ in 0..count {
            let i = r.u32().or_malformed(2, evl)? as usize;
            let k = r.label(sec).or_malformed(2, evl)?;
            ikeys.insert(i, k);
        }
        r.finish().or_malformed(2, evl)?;
        let eval_idx = split.eval_indices();
        if ikeys.len() != eval_idx.len() || eval_idx.iter().any(|i| !ikeys.contains_key(i)) {
            return Err(fail(
                2,
                ME,
                AbortCause::Malformed("input keys do not match evaluation circuits".into()),
            ));
        }

        let payload = gen.recv(2, msg::INPUT_GATES)?;
        let mut r = Reader::new(&payload);
        for (i, slot) in slots.iter_mut().enumerate() {
            let gates: Vec<OneWireGate> = (0..m)
                .map(|_| OneWireGate::decode(sec, &mut r))
                .collect::<Result<_, _>>()
                .or_malformed(2, gen)?;
            match slot {
                Slot::Check { inst, ts, openings } => {
                    let expected = inst.translation_gates(prep, ts).map_err(|e| collision(2, i, e))?;
                    if let Some(j) = expected.iter().zip(&gates).position(|(a, b)| a != b) {
                        return Err(check_failed(2, i, CheckKind::InputGates, j));
                    }
                    report.checked_input_gates += gates.len();
                    for j in 0..m {
                        let o = &openings[j];
                        if inst.commitments(prep, j, (&o.0, &o.1)) != commitments[i][j] {
                            return Err(check_failed(2, i, CheckKind::Commitments, j));
                        }
                    }
                }
                Slot::Eval { evl_labels, .. } => {
                    let ikey = ikeys[&i];
                    for (j, g) in gates.iter().enumerate() {
                        let t = derive_eval_input_label(sec, ikey, &seeds[j], j as u32);
                        let gin = g.evaluate(t);
                        if malicious {
                            let c = commit_label(gin, &opening_for(ikey, &seeds[j], j as u32));
                            if !commitments[i][j].contains(&c) {
                                return Err(fail(2, ME, AbortCause::CommitmentMismatch { circuit: i, wire: j }));
                            }
                        }
                        evl_labels.push(gin);
                    }
                }
            }
        }
        r.finish().or_malformed(2, gen)?;

        // Phase 3: generator input consistency.
        if malicious {
            let mut h = [0u8; 32];
            rng.fill_bytes(&mut h);
            gen.send(3, msg::HASH_SEED, h.to_vec())?;
            let rows = layout.spec.consistency_bits;
            let matrix = consistency_matrix(&h, rows, n_gen - rows);
            let payload = gen.recv(3, msg::DIGEST_DECODING)?;
            let mut r = Reader::new(&payload);
            let mut reference: Option<Vec<bool>> = None;
            for (i, slot) in slots.iter().enumerate() {
                let dec = r.bits(rows).or_malformed(3, gen)?;
                match slot {
                    Slot::Check { inst, .. } => {
                        let expected = inst.consistency_decoding(prep, &matrix);
                        if let Some(k) = expected.iter().zip(&dec).position(|(a, b)| a != b) {
                            return Err(check_failed(3, i, CheckKind::ConsistencyDecoding, k));
                        }
                    }
                    Slot::Eval { gen_labels, .. } => {
                        let pp: Vec<bool> = gen_labels.iter().map(|l| l.pp()).collect();
                        let digest: Vec<bool> = digest_bits(prep, &matrix, &pp)
                            .iter()
                            .zip(&dec)
                            .map(|(a, b)| a ^ b)
                            .collect();
                        match &reference {
                            None => reference = Some(digest),
                            Some(d) if *d != digest => {
                                return Err(fail(3, ME, AbortCause::InconsistentGeneratorInput(i)));
                            }
                            Some(_) => {}
                        }
                    }
                }
            }
            r.finish().or_malformed(3, gen)?;
        }

        // Phase 4: partial inputs from the previous execution.
        let n_partial = prep.circuit.partial_inputs;
        if n_partial > 0 {
            let st = state.ok_or_else(|| fail(4, ME, AbortCause::MissingState))?;
            if malicious {
                let payload = gen.recv(4, msg::PARTIAL_GATES)?;
                let mut r = Reader::new(&payload);
                for (i, slot) in slots.iter_mut().enumerate() {
                    let rv = r.label(sec).or_malformed(4, gen)?;
                    let gates: Vec<OneWireGate> = (0..n_partial)
                        .map(|_| OneWireGate::decode(sec, &mut r))
                        .collect::<Result<_, _>>()
                        .or_malformed(4, gen)?;
                    match slot {
                        Slot::Check { inst, .. } => {
                            let pouts = both_labels(&st.wires[i], 4)?;
                            let gins = inst.partial_pairs(prep);
                            match check_partial_gates(sec, inst.seed, i, rv, &pouts, &gins, &gates)
                                .map_err(|e| collision(4, i, e))?
                            {
                                PartialCheck::Valid => report.checked_partial_gates += gates.len(),
                                PartialCheck::WrongTransform => {
                                    return Err(check_failed(4, i, CheckKind::PartialTransform, 0))
                                }
                                PartialCheck::WrongGate(j) => {
                                    return Err(check_failed(4, i, CheckKind::PartialGates, j))
                                }
                            }
                        }
                        Slot::Eval { partial_labels, .. } => {
                            *partial_labels = st.wires[i]
                                .iter()
                                .zip(&gates)
                                .enumerate()
                                .map(|(j, (w, g))| match *w {
                                    WireSave::Single(l) => Some(evaluate_partial_gate(sec, g, rv, l, i, j)),
                                    _ => None,
                                })
                                .collect();
                        }
                    }
                }
                r.finish().or_malformed(4, gen)?;
            } else {
                let payload = gen.recv(4, msg::REMAP)?;
                let mut r = Reader::new(&payload);
                let mut labels = Vec::with_capacity(n_partial);
                for j in 0..n_partial {
                    let msgs = [r.label(sec).or_malformed(4, gen)?, r.label(sec).or_malformed(4, gen)?];
                    labels.push(match st.wires[0][j] {
                        WireSave::Single(l) => Some(semi_honest_remap(l, &msgs)),
                        _ => None,
                    });
                }
                r.finish().or_malformed(4, gen)?;
                if let Slot::Eval { partial_labels, .. } = &mut slots[0] {
                    *partial_labels = labels.into_iter().collect();
                }
            }
        } else {
            for slot in &mut slots {
                if let Slot::Eval { partial_labels, .. } = slot {
                    *partial_labels = Some(Vec::new());
                }
            }
        }

        // Phase 5: garbled gates.
        let and_count = prep.circuit.and_count();
        let mut gates: Vec<Vec<GarbledGate>> = Vec::with_capacity(s);
        for i in 0..s {
            let mut got = Vec::with_capacity(and_count);
            loop {
                let payload = gen.recv(5, msg::GATES)?;
                let mut r = Reader::new(&payload);
                let ci = r.u32().or_malformed(5, gen)? as usize;
                let start = r.u32().or_malformed(5, gen)? as usize;
                let n = r.u32().or_malformed(5, gen)? as usize;
                if ci != i || start != got.len() || start + n > and_count {
                    return Err(fail(
                        5,
                        ME,
                        AbortCause::Malformed(format!("gate chunk ({ci}, {start}, {n}) out of order")),
                    ));
                }
                for _ in 0..n {
                    got.push(GarbledGate::decode(sec, &mut r).or_malformed(5, gen)?);
                }
                r.finish().or_malformed(5, gen)?;
                if got.len() == and_count {
                    break;
                }
            }
            gates.push(got);
        }
        let n_out = layout.spec.pad_evl_bits + layout.spec.pad_gen_bits;
        let payload = gen.recv(5, msg::OUTPUT_DECODING)?;
        let mut r = Reader::new(&payload);
        let decoding: Vec<Vec<bool>> = (0..s)
            .map(|_| r.bits(n_out))
            .collect::<Result<_, _>>()
            .or_malformed(5, gen)?;
        r.finish().or_malformed(5, gen)?;

        let verdicts: Vec<Result<Verdict, Abort>> = slots
            .par_iter()
            .zip(gates.par_iter())
            .enumerate()
            .map(|(i, (slot, received))| match slot {
                Slot::Check { inst, .. } => {
                    let expected = inst.garbled_gates(prep);
                    if let Some(g) = expected.iter().zip(received).position(|(a, b)| a != b) {
                        return Err(check_failed(5, i, CheckKind::Gates, g));
                    }
                    if let Some(k) = inst
                        .output_decoding(prep)
                        .iter()
                        .zip(&decoding[i])
                        .position(|(a, b)| a != b)
                    {
                        return Err(check_failed(5, i, CheckKind::OutputDecoding, k));
                    }
                    Ok(Verdict::Checked(received.len()))
                }
                Slot::Eval {
                    gen_labels,
                    evl_labels,
                    partial_labels,
                } => {
                    let Some(partial) = partial_labels else {
                        return Ok(Verdict::Evaluated(None));
                    };
                    let inputs = [gen_labels.as_slice(), evl_labels, partial].concat();
                    Ok(Verdict::Evaluated(
                        evaluate_circuit(sec, &prep.circuit, received, &inputs).ok(),
                    ))
                }
            })
            .collect();

        let mut outputs = Vec::new();
        let mut wires = Vec::with_capacity(s);
        for (i, v) in verdicts.into_iter().enumerate() {
            match (v?, &slots[i]) {
                (Verdict::Checked(n), Slot::Check { inst, .. }) => {
                    report.checked_gates += n;
                    wires.push(
                        inst.saved_pairs(prep)
                            .into_iter()
                            .map(|(a, b)| WireSave::Both(a, b))
                            .collect(),
                    );
                }
                (Verdict::Evaluated(Some(labels)), _) => {
                    outputs.push(
                        output_wires(prep)
                            .zip(&decoding[i])
                            .map(|(w, &d)| labels[w as usize].pp() ^ d)
                            .collect::<Vec<bool>>(),
                    );
                    wires.push(
                        prep.circuit
                            .saved_wires
                            .iter()
                            .map(|&w| WireSave::Single(labels[w as usize]))
                            .collect(),
                    );
                }
                _ => {
                    report.invalid_eval.push(i);
                    wires.push(vec![WireSave::Missing; prep.circuit.saved_wires.len()]);
                }
            }
        }

        // Phase 6: majority output, padded for each recipient.
        if outputs.is_empty() {
            return Err(fail(6, ME, AbortCause::NoValidCircuit));
        }
        let mut out = majority(&outputs).map_err(|b| fail(6, ME, AbortCause::UnreliableOutput(b)))?;
        let gen_part = out.split_off(layout.spec.pad_evl_bits);
        if let Some(Tamper::CloudFlipOutput(b)) = self.hooks.tamper {
            if !out.is_empty() {
                let k = b % out.len();
                out[k] = !out[k];
            }
        }
        let mut w = Writer::new();
        w.bits(&out);
        evl.send(6, msg::OUTPUT, w.finish())?;
        let mut w = Writer::new();
        w.bits(&gen_part);
        gen.send(6, msg::OUTPUT, w.finish())?;
        gen.recv(6, msg::OUTPUT_ACK)?;
        evl.recv(6, msg::OUTPUT_ACK)?;

        // Phase 7: persist, then let the generator save.
        let next_execution = state.map_or(0, |st| st.next_execution) + 1;
        let new_state = SavedState {
            role: ME,
            mode: cfg.mode,
            sec,
            next_execution,
            circuits: s,
            split,
            keys: keys.map(KeyRecords::Cloud),
            wires,
            poisoned: false,
        };
        if let Some(path) = persist {
            new_state
                .persist(path)
                .map_err(|e| fail(7, ME, AbortCause::StateMismatch(format!("could not save state: {e}"))))?;
        }
        let mut w = Writer::new();
        w.u64(next_execution);
        gen.send(7, msg::SAVED, w.finish())?;
        gen.flush_recorder();
        evl.flush_recorder();
        Ok(CloudOutcome {
            state: new_state,
            report,
        })
    }
}

fn read_labels(r: &mut Reader<'_>, sec: Security, n: usize, phase: u8, ch: &Channel) -> Result<Vec<Label>, Abort> {
    let count = r.u32().or_malformed(phase, ch)? as usize;
    if count != n {
        return Err(fail(
            phase,
            ME,
            AbortCause::Malformed(format!("{count} generator labels, expected {n}")),
        ));
    }
    let out = (0..n)
        .map(|_| r.label(sec))
        .collect::<Result<Vec<_>, _>>()
        .or_malformed(phase, ch)?;
    Ok(out)
}

fn both_labels(ws: &[WireSave], phase: u8) -> Result<Vec<(Label, Label)>, Abort> {
    ws.iter()
        .map(|w| match *w {
            WireSave::Both(a, b) => Ok((a, b)),
            _ => Err(fail(
                phase,
                ME,
                AbortCause::StateMismatch("check circuit lost a saved label".into()),
            )),
        })
        .collect()
}
