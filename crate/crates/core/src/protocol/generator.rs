use rand::{CryptoRng, Rng, RngCore};
use rayon::prelude::*;

use super::material::Instance;
use super::tamper::{Hooks, Tamper};
use super::{
    broadcast, check_chain, fail, handshake, msg, ot_label, Hello, Prepared, ProtocolConfig, WireResult, GATE_CHUNK,
};
use crate::abort::{Abort, AbortCause, Role};
use crate::channel::Channel;
use crate::circuit::toeplitz_tag;
use crate::crypto::label_bytes;
use crate::cut_choose::{seal, split_hash_pairs, CircuitKeyPair, CircuitSplit, KeyRecords};
use crate::label::{CircuitSeed, Label, Security};
use crate::ot::{derive_eval_input_label, oot_generator, opening_for, OotSeed};
use crate::partial::{generate_partial_gates, semi_honest_messages, transformation_value, PartialError};
use crate::state::{Mode, SavedState, WireSave};
use crate::wire::{Reader, Writer};

const ME: Role = Role::Generator;

#[derive(Clone, Debug)]
pub struct GeneratorOutcome {
    pub outputs: Vec<bool>,
    pub state: SavedState,
}

/// Runs the generator for one execution. `state` is the generator's record
/// of the previous execution of this chain, if any.
#[allow(clippy::too_many_arguments)]
pub fn run_generator<R: RngCore + CryptoRng>(
    cfg: &ProtocolConfig,
    prep: &Prepared,
    evl: &mut Channel,
    cloud: &mut Channel,
    input: &[bool],
    state: Option<&SavedState>,
    hooks: &Hooks,
    rng: &mut R,
) -> Result<GeneratorOutcome, Abort> {
    let r = Generator {
        cfg,
        prep,
        hooks,
        sec: cfg.sec,
    }
    .run(evl, cloud, input, state, rng);
    if let Err(a) = &r {
        broadcast(a, evl, cloud);
    }
    r
}

struct Generator<'a> {
    cfg: &'a ProtocolConfig,
    prep: &'a Prepared,
    hooks: &'a Hooks,
    sec: Security,
}

fn collision(phase: u8, circuit: usize, e: PartialError) -> Abort {
    let wire = match e {
        PartialError::HashCollision(w) => w,
        PartialError::Count { .. } => 0,
    };
    fail(phase, ME, AbortCause::HashCollision { circuit, wire })
}

fn random_bits<R: Rng>(n: usize, rng: &mut R) -> Vec<bool> {
    (0..n).map(|_| rng.gen()).collect()
}

impl Generator<'_> {
    fn targets<R: Rng>(&self, rng: &mut R, pick: impl Fn(Tamper) -> Option<super::TamperTarget>) -> Vec<usize> {
        self.hooks
            .tamper
            .and_then(pick)
            .map(|t| t.resolve(self.cfg.circuits, self.hooks, rng))
            .unwrap_or_default()
    }

    fn run<R: RngCore + CryptoRng>(
        &self,
        evl: &mut Channel,
        cloud: &mut Channel,
        input: &[bool],
        state: Option<&SavedState>,
        rng: &mut R,
    ) -> Result<GeneratorOutcome, Abort> {
        let (cfg, prep, sec) = (self.cfg, self.prep, self.sec);
        let s = cfg.circuits;
        let malicious = cfg.mode == Mode::Malicious;

        // Phase 1: handshake, keys, commitments and packages.
        let hello = Hello::for_state(prep, cfg, state);
        let (_, hc) = handshake(&hello, evl, cloud)?;
        check_chain(ME, &hello, &hc, state, prep, cfg)?;
        if input.len() != prep.program.gen_inputs {
            return Err(fail(
                1,
                ME,
                AbortCause::Malformed(format!(
                    "generator input has {} bits, program takes {}",
                    input.len(),
                    prep.program.gen_inputs
                )),
            ));
        }
        let layout = &prep.layout;
        let pad = random_bits(layout.spec.pad_gen_bits, rng);
        let mac_key = random_bits(layout.spec.mac_key_bits_gen, rng);
        let mask = random_bits(layout.spec.consistency_bits, rng);
        let gen_bits = layout.gen_inputs(input, &pad, &mac_key, &mask);

        let seeds: Vec<CircuitSeed> = (0..s).map(|_| CircuitSeed::random(sec, rng)).collect();
        let instances: Vec<Instance> = seeds.par_iter().map(|&seed| Instance::new(sec, seed, prep)).collect();

        let m = layout.evl_input_count();
        let oot_seeds: Vec<(OotSeed, OotSeed)> = (0..m).map(|_| (rng.gen(), rng.gen())).collect();
        let ikeys: Vec<Label> = (0..s).map(|_| sec.random_label(rng)).collect();
        let key_material = |i: usize, j: usize| {
            let (s0, s1) = &oot_seeds[j];
            let t = (
                derive_eval_input_label(sec, ikeys[i], s0, j as u32),
                derive_eval_input_label(sec, ikeys[i], s1, j as u32),
            );
            let o = (opening_for(ikeys[i], s0, j as u32), opening_for(ikeys[i], s1, j as u32));
            (t, o)
        };

        let mut gen_labels: Vec<Vec<Label>> = instances.iter().map(|inst| inst.gen_labels(prep, &gen_bits)).collect();
        let flip = self.targets(rng, |t| match t {
            Tamper::GenInputFlip(t) => Some(t),
            _ => None,
        });
        for i in flip {
            if let Some(l) = gen_labels[i].first_mut() {
                *l ^= instances[i].ctx.delta.label();
            }
        }

        let keys = if malicious {
            let keys = match state.and_then(|st| st.keys.as_ref()) {
                Some(KeyRecords::Generator(k)) => k.iter().map(|p| p.evolve(sec)).collect(),
                Some(_) => {
                    return Err(fail(
                        1,
                        ME,
                        AbortCause::StateMismatch("key records of another role".into()),
                    ))
                }
                None => {
                    let keys: Vec<CircuitKeyPair> = (0..s).map(|_| CircuitKeyPair::random(sec, rng)).collect();
                    let pairs: Vec<(Vec<u8>, Vec<u8>)> = keys
                        .iter()
                        .map(|k| (label_bytes(k.eval_key).to_vec(), label_bytes(k.check_key).to_vec()))
                        .collect();
                    cfg.ot.send(cloud, 1, ot_label::CUT_AND_CHOOSE, &pairs, rng)?;
                    keys
                }
            };

            let mut hashes = split_hash_pairs(&keys);
            if let Some(Tamper::SplitHashSwap(i)) = self.hooks.tamper {
                hashes[i % s].swap(0, 1);
            }
            let mut w = Writer::new();
            for pair in &hashes {
                w.bytes(&pair[0]).bytes(&pair[1]);
            }
            evl.send(1, msg::SPLIT_HASHES_GEN, w.finish())?;

            let mut w = Writer::new();
            for (i, inst) in instances.iter().enumerate() {
                for j in 0..m {
                    let (_, o) = key_material(i, j);
                    for c in inst.commitments(prep, j, (&o.0, &o.1)) {
                        w.bytes(&c);
                    }
                }
            }
            cloud.send(1, msg::COMMITMENTS, w.finish())?;

            let mut w = Writer::new();
            for (i, inst) in instances.iter().enumerate() {
                let mut g = Writer::new();
                g.u32(gen_labels[i].len() as u32);
                for &l in &gen_labels[i] {
                    g.label(sec, l);
                }
                let mut c = Writer::new();
                c.bytes(&label_bytes(inst.seed.0));
                for j in 0..m {
                    let (t, o) = key_material(i, j);
                    c.label(sec, t.0).label(sec, t.1).bytes(&o.0).bytes(&o.1);
                }
                w.blob(&seal(keys[i].eval_key, "generator inputs", &g.finish()));
                w.blob(&seal(keys[i].check_key, "check package", &c.finish()));
            }
            cloud.send(1, msg::PACKAGES, w.finish())?;
            Some(keys)
        } else {
            let mut w = Writer::new();
            w.u32(gen_labels[0].len() as u32);
            for &l in &gen_labels[0] {
                w.label(sec, l);
            }
            cloud.send(1, msg::GEN_LABELS, w.finish())?;
            None
        };

        // Phase 2: evaluator inputs.
        oot_generator(evl, cloud, 2, &cfg.ot, &oot_seeds, rng)?;
        let mut w = Writer::new();
        for &k in &ikeys {
            w.label(sec, k);
        }
        evl.send(2, msg::IKEYS, w.finish())?;

        let swap = self.targets(rng, |t| match t {
            Tamper::SwapEvlLabels(t) => Some(t),
            _ => None,
        });
        let mut w = Writer::new();
        for (i, inst) in instances.iter().enumerate() {
            let ts: Vec<(Label, Label)> = (0..m).map(|j| key_material(i, j).0).collect();
            let mut gates = inst.translation_gates(prep, &ts).map_err(|e| collision(2, i, e))?;
            if swap.contains(&i) {
                if let Some(g) = gates.first_mut() {
                    let d = inst.ctx.delta.label();
                    g.rows = [g.rows[0] ^ d, g.rows[1] ^ d];
                }
            }
            for g in &gates {
                g.encode(sec, &mut w);
            }
        }
        cloud.send(2, msg::INPUT_GATES, w.finish())?;

        // Phase 3: generator input consistency.
        if malicious {
            let h: [u8; 32] = cloud
                .recv(3, msg::HASH_SEED)?
                .try_into()
                .map_err(|_| fail(3, ME, AbortCause::Malformed("hash seed length".into())))?;
            let rows = layout.spec.consistency_bits;
            let matrix = super::consistency_matrix(&h, rows, prep.circuit.gen_inputs - rows);
            let mut w = Writer::new();
            for inst in &instances {
                w.bits(&inst.consistency_decoding(prep, &matrix));
            }
            cloud.send(3, msg::DIGEST_DECODING, w.finish())?;
        }

        // Phase 4: partial input gates.
        let n_partial = prep.circuit.partial_inputs;
        if n_partial > 0 {
            let st = state.ok_or_else(|| fail(4, ME, AbortCause::MissingState))?;
            let pouts = |i: usize| -> Result<Vec<(Label, Label)>, Abort> {
                st.wires[i]
                    .iter()
                    .map(|w| match *w {
                        WireSave::Both(a, b) => Ok((a, b)),
                        _ => Err(fail(
                            4,
                            ME,
                            AbortCause::StateMismatch("generator lost a saved label".into()),
                        )),
                    })
                    .collect()
            };
            if malicious {
                let bad_gate = self.targets(rng, |t| match t {
                    Tamper::PartialGate(t) => Some(t),
                    _ => None,
                });
                let bad_r = self.targets(rng, |t| match t {
                    Tamper::PartialR(t) => Some(t),
                    _ => None,
                });
                let mut w = Writer::new();
                for (i, inst) in instances.iter().enumerate() {
                    let r = transformation_value(sec, inst.seed);
                    let mut gates = generate_partial_gates(sec, inst.seed, i, r, &pouts(i)?, &inst.partial_pairs(prep))
                        .map_err(|e| collision(4, i, e))?;
                    if bad_gate.contains(&i) {
                        gates[0].rows[0].0 ^= 1;
                    }
                    let sent_r = if bad_r.contains(&i) { r ^ Label(1) } else { r };
                    w.label(sec, sent_r);
                    for g in &gates {
                        g.encode(sec, &mut w);
                    }
                }
                cloud.send(4, msg::PARTIAL_GATES, w.finish())?;
            } else {
                let prev = pouts(0)?;
                let next = instances[0].partial_pairs(prep);
                let mut w = Writer::new();
                for (p, n) in prev.iter().zip(&next) {
                    let [a, b] = semi_honest_messages(*p, *n);
                    w.label(sec, a).label(sec, b);
                }
                cloud.send(4, msg::REMAP, w.finish())?;
            }
        }

        // Phase 5: garbled gates, streamed circuit by circuit.
        let bad_rows = self.targets(rng, |t| match t {
            Tamper::GateRow(t) => Some(t),
            _ => None,
        });
        let garbled: Vec<_> = instances.par_iter().map(|inst| inst.garbled_gates(prep)).collect();
        for (i, mut gates) in garbled.into_iter().enumerate() {
            if bad_rows.contains(&i) {
                if let Some(g) = gates.first_mut() {
                    g.rows[0] ^= 1u128 << sec.bits();
                }
            }
            let mut start = 0;
            loop {
                let end = (start + GATE_CHUNK).min(gates.len());
                let mut w = Writer::new();
                w.u32(i as u32).u32(start as u32).u32((end - start) as u32);
                for g in &gates[start..end] {
                    g.encode(sec, &mut w);
                }
                cloud.send(5, msg::GATES, w.finish())?;
                start = end;
                if start >= gates.len() {
                    break;
                }
            }
        }
        let mut w = Writer::new();
        for inst in &instances {
            w.bits(&inst.output_decoding(prep));
        }
        cloud.send(5, msg::OUTPUT_DECODING, w.finish())?;

        // Phase 6: verified output.
        let payload = cloud.recv(6, msg::OUTPUT)?;
        let mut r = Reader::new(&payload);
        let padded = r.bits(layout.spec.pad_gen_bits).or_malformed(6, cloud)?;
        r.finish().or_malformed(6, cloud)?;
        let outputs = unpad_and_verify(6, ME, &padded, &pad, &mac_key, layout.data_gen, layout.tag_gen())?;
        cloud.send(6, msg::OUTPUT_ACK, Vec::new())?;

        // Phase 7: save once the cloud has saved.
        let next_execution = state.map_or(0, |st| st.next_execution) + 1;
        let payload = cloud.recv(7, msg::SAVED)?;
        let mut r = Reader::new(&payload);
        let cloud_next = r.u64().or_malformed(7, cloud)?;
        r.finish().or_malformed(7, cloud)?;
        if cloud_next != next_execution {
            return Err(fail(
                7,
                ME,
                AbortCause::StateMismatch(format!("cloud saved execution {cloud_next}, expected {next_execution}")),
            ));
        }
        cloud.flush_recorder();
        evl.flush_recorder();
        let wires = instances
            .iter()
            .map(|inst| {
                inst.saved_pairs(prep)
                    .into_iter()
                    .map(|(a, b)| WireSave::Both(a, b))
                    .collect()
            })
            .collect();
        Ok(GeneratorOutcome {
            outputs,
            state: SavedState {
                role: ME,
                mode: cfg.mode,
                sec,
                next_execution,
                circuits: s,
                split: CircuitSplit::all_eval(s),
                keys: keys.map(KeyRecords::Generator),
                wires,
                poisoned: false,
            },
        })
    }
}

/// Removes the one-time pad and checks the in-circuit MAC.
pub(crate) fn unpad_and_verify(
    phase: u8,
    me: Role,
    padded: &[bool],
    pad: &[bool],
    key: &[bool],
    data_bits: usize,
    tag_bits: usize,
) -> Result<Vec<bool>, Abort> {
    let plain: Vec<bool> = padded.iter().zip(pad).map(|(a, b)| a ^ b).collect();
    let (data, tag) = plain.split_at(data_bits);
    if toeplitz_tag(key, data, tag_bits) != tag {
        return Err(Abort::new(phase, me, AbortCause::OutputMac));
    }
    Ok(data.to_vec())
}
