use rand::{CryptoRng, Rng, RngCore};

use super::generator::unpad_and_verify;
use super::tamper::Hooks;
use super::{broadcast, fail, handshake, msg, Hello, Prepared, ProtocolConfig, WireResult};
use crate::abort::{Abort, AbortCause, Role};
use crate::channel::Channel;
use crate::cut_choose::{verify_split_hashes, CircuitSplit, CutChooseError, SplitHash};
use crate::label::Label;
use crate::ot::{encode_input, oot_evaluator};
use crate::state::Mode;
use crate::wire::{Reader, Writer};

const ME: Role = Role::Evaluator;

#[derive(Clone, Debug)]
pub struct EvaluatorOutcome {
    pub outputs: Vec<bool>,
    /// The split the cloud proved against the generator's hashes.
    pub split: CircuitSplit,
}

/// Runs the evaluator for one execution. The evaluator keeps no state
/// between executions.
pub fn run_evaluator<R: RngCore + CryptoRng>(
    cfg: &ProtocolConfig,
    prep: &Prepared,
    gen: &mut Channel,
    cloud: &mut Channel,
    input: &[bool],
    hooks: &Hooks,
    rng: &mut R,
) -> Result<EvaluatorOutcome, Abort> {
    let _ = hooks;
    let r = run(cfg, prep, gen, cloud, input, rng);
    if let Err(a) = &r {
        broadcast(a, gen, cloud);
    }
    r
}

fn read_split_hashes(
    buf: &[u8],
    s: usize,
    ch: &Channel,
    with_bit: bool,
) -> Result<Vec<(bool, SplitHash, SplitHash)>, Abort> {
    let mut r = Reader::new(buf);
    let mut out = Vec::with_capacity(s);
    for _ in 0..s {
        if with_bit {
            let b = r.u8().or_malformed(1, ch)?;
            if b > 1 {
                return Err(fail(1, ME, AbortCause::Malformed("split bit out of range".into())));
            }
            let h: SplitHash = r.take(32).or_malformed(1, ch)?.try_into().unwrap();
            out.push((b == 1, h, [0; 32]));
        } else {
            let h0: SplitHash = r.take(32).or_malformed(1, ch)?.try_into().unwrap();
            let h1: SplitHash = r.take(32).or_malformed(1, ch)?.try_into().unwrap();
            out.push((false, h0, h1));
        }
    }
    r.finish().or_malformed(1, ch)?;
    Ok(out)
}

fn run<R: RngCore + CryptoRng>(
    cfg: &ProtocolConfig,
    prep: &Prepared,
    gen: &mut Channel,
    cloud: &mut Channel,
    input: &[bool],
    rng: &mut R,
) -> Result<EvaluatorOutcome, Abort> {
    let s = cfg.circuits;
    let sec = cfg.sec;
    let layout = &prep.layout;

    // Phase 1: handshake and split verification.
    let hello = Hello::for_state(prep, cfg, None);
    handshake(&hello, gen, cloud)?;
    if input.len() != prep.program.evl_inputs {
        return Err(fail(
            1,
            ME,
            AbortCause::Malformed(format!(
                "evaluator input has {} bits, program takes {}",
                input.len(),
                prep.program.evl_inputs
            )),
        ));
    }
    let split = match cfg.mode {
        Mode::Malicious => {
            let g = read_split_hashes(&gen.recv(1, msg::SPLIT_HASHES_GEN)?, s, gen, false)?;
            let c = read_split_hashes(&cloud.recv(1, msg::SPLIT_HASHES_CLOUD)?, s, cloud, true)?;
            let gen_pairs: Vec<[SplitHash; 2]> = g.iter().map(|&(_, a, b)| [a, b]).collect();
            let claimed: Vec<(bool, SplitHash)> = c.iter().map(|&(b, h, _)| (b, h)).collect();
            let split = verify_split_hashes(&gen_pairs, &claimed).map_err(|e| match e {
                CutChooseError::SplitHashMismatch(i) => fail(1, ME, AbortCause::SplitHashMismatch(i)),
                e => fail(1, ME, AbortCause::Malformed(e.to_string())),
            })?;
            if split.eval_indices().is_empty() {
                return Err(fail(
                    1,
                    ME,
                    AbortCause::Malformed("cloud selected no evaluation circuit".into()),
                ));
            }
            split
        }
        Mode::SemiHonest => CircuitSplit::all_eval(s),
    };

    // Phase 2: outsourced OT of the encoded input, then the circuit keys
    // the cloud needs to decrypt its seeds.
    let encoded = encode_input(input, layout.spec.encoding_width, rng);
    let pad: Vec<bool> = (0..layout.spec.pad_evl_bits).map(|_| rng.gen()).collect();
    let mac_key: Vec<bool> = (0..layout.spec.mac_key_bits_evl).map(|_| rng.gen()).collect();
    let bits = layout.evl_inputs(&encoded.shares, &pad, &mac_key);
    oot_evaluator(gen, cloud, 2, &cfg.ot, &bits, rng)?;

    let payload = gen.recv(2, msg::IKEYS)?;
    let mut r = Reader::new(&payload);
    let ikeys: Vec<Label> = (0..s)
        .map(|_| r.label(sec))
        .collect::<Result<_, _>>()
        .or_malformed(2, gen)?;
    r.finish().or_malformed(2, gen)?;
    let eval = split.eval_indices();
    let mut w = Writer::new();
    w.u32(eval.len() as u32);
    for &i in &eval {
        w.u32(i as u32).label(sec, ikeys[i]);
    }
    cloud.send(2, msg::IKEYS_FWD, w.finish())?;

    // Phase 6: verified output.
    let payload = cloud.recv(6, msg::OUTPUT)?;
    let mut r = Reader::new(&payload);
    let padded = r.bits(layout.spec.pad_evl_bits).or_malformed(6, cloud)?;
    r.finish().or_malformed(6, cloud)?;
    let outputs = unpad_and_verify(6, ME, &padded, &pad, &mac_key, layout.data_evl, layout.tag_evl())?;
    cloud.send(6, msg::OUTPUT_ACK, Vec::new())?;
    gen.flush_recorder();
    cloud.flush_recorder();
    Ok(EvaluatorOutcome { outputs, split })
}
