//! `pgc run`: executes trials and writes one CSV row per trial.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use pgc_core::abort::{Abort, Role};
use pgc_core::channel::Channel;
use pgc_core::circuit::programs::build_program;
use pgc_core::circuit::Circuit;
use pgc_core::label::Security;
use pgc_core::ot::OtProvider;
use pgc_core::protocol::{
    run_cloud, run_evaluator, run_generator, Hooks, LocalSession, Prepared, ProtocolConfig, SessionOptions, Tamper,
};
use pgc_core::state::SavedState;
use pgc_core::transport::TcpTransport;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::inputs::{bit_string, input_or_random};
use crate::net::{connect_peers, parse_connect};
use crate::{parse_seed, usage, CliError, ModeArg, OtArg, RoleArg, RunArgs, EXIT_ABORT, EXIT_CHEAT};

pub const HEADER: [&str; 21] = [
    "trial",
    "program",
    "role",
    "mode",
    "circuits",
    "security",
    "encoding",
    "tag_bits",
    "exec_id",
    "status",
    "abort_phase",
    "abort_origin",
    "abort_detail",
    "wall_ms",
    "gen_sent",
    "evl_sent",
    "cloud_sent",
    "and_gates",
    "gates",
    "gen_output",
    "evl_output",
];

/// One trial as seen by one party (or by all three in-process).
#[derive(Default)]
struct Row {
    exec_id: u64,
    abort: Option<Abort>,
    wall: Duration,
    sent: HashMap<Role, u64>,
    gen_output: Option<Vec<bool>>,
    evl_output: Option<Vec<bool>>,
}

struct Emitter<'a> {
    out: csv::Writer<Box<dyn Write>>,
    args: &'a RunArgs,
    cfg: &'a ProtocolConfig,
    and_gates: usize,
    gates: usize,
    exit: u8,
}

impl Emitter<'_> {
    fn emit(&mut self, trial: usize, row: &Row) -> Result<(), CliError> {
        let role = match self.args.role {
            RoleArg::Gen => "gen",
            RoleArg::Evl => "evl",
            RoleArg::Cloud => "cloud",
            RoleArg::Local => "local",
        };
        let opt = |v: Option<String>| v.unwrap_or_default();
        let sent = |r: Role| opt(row.sent.get(&r).map(u64::to_string));
        let (status, phase, origin, detail) = match &row.abort {
            None => ("ok".to_string(), String::new(), String::new(), String::new()),
            Some(a) => {
                let code = if a.cause.caught_generator() {
                    EXIT_CHEAT
                } else {
                    EXIT_ABORT
                };
                self.exit = self.exit.max(code);
                (
                    a.cause.slug().to_string(),
                    a.phase.to_string(),
                    a.origin.to_string(),
                    a.cause.to_string(),
                )
            }
        };
        self.out.write_record([
            trial.to_string(),
            self.args.program.clone(),
            role.to_string(),
            self.cfg.mode.name().to_string(),
            self.cfg.circuits.to_string(),
            self.cfg.sec.bits().to_string(),
            self.cfg.encoding_width.to_string(),
            self.cfg.tag_bits.to_string(),
            row.exec_id.to_string(),
            status,
            phase,
            origin,
            detail,
            format!("{:.3}", row.wall.as_secs_f64() * 1e3),
            sent(Role::Generator),
            sent(Role::Evaluator),
            sent(Role::Cloud),
            self.and_gates.to_string(),
            self.gates.to_string(),
            opt(row.gen_output.as_deref().map(bit_string)),
            opt(row.evl_output.as_deref().map(bit_string)),
        ])?;
        self.out.flush()?;
        Ok(())
    }
}

fn config(a: &RunArgs) -> Result<ProtocolConfig, CliError> {
    let sec = Security::new(a.security).map_err(|e| usage(e.to_string()))?;
    let mut cfg = match a.mode {
        ModeArg::Malicious => ProtocolConfig::malicious(a.circuits),
        ModeArg::Semi => ProtocolConfig::semi_honest(),
    };
    cfg.sec = sec;
    cfg.encoding_width = a.encoding;
    cfg.tag_bits = a.tag_bits;
    cfg.exec_id = a.exec_id;
    cfg.timeout = Duration::from_secs(a.timeout_secs);
    cfg.ot = match a.ot {
        OtArg::Group => OtProvider::group_based(sec.bits()),
        OtArg::Dealer if a.role == RoleArg::Local => OtProvider::trusted_dealer(),
        OtArg::Dealer => return Err(usage("--ot dealer needs --role local")),
    };
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn hooks(a: &RunArgs) -> Result<Hooks, CliError> {
    match &a.tamper {
        None => Ok(Hooks::default()),
        Some(_) if !cfg!(debug_assertions) => Err(usage("--tamper is only available in debug builds")),
        Some(t) => Tamper::parse(t)
            .map(Hooks::with_tamper)
            .ok_or_else(|| usage(format!("bad tamper spec `{t}`"))),
    }
}

fn csv_writer(path: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>, CliError> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(HEADER)?;
    Ok(w)
}

pub fn cmd_run(a: &RunArgs) -> Result<u8, CliError> {
    if a.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let program = build_program(&a.program)?;
    let cfg = config(a)?;
    let hooks = hooks(a)?;
    let prep = Prepared::new(program.clone(), &cfg)?;
    let mut rng = match &a.seed {
        Some(s) => ChaCha20Rng::seed_from_u64(parse_seed(s)?),
        None => ChaCha20Rng::from_entropy(),
    };
    let mut em = Emitter {
        out: csv_writer(a.csv.as_deref())?,
        args: a,
        cfg: &cfg,
        and_gates: prep.circuit.and_count(),
        gates: prep.circuit.gates.len(),
        exit: 0,
    };
    match a.role {
        RoleArg::Local => run_local(a, &cfg, hooks, &program, &mut rng, &mut em)?,
        RoleArg::Gen => run_party(a, Role::Generator, &cfg, &hooks, &prep, &mut rng, &mut em)?,
        RoleArg::Evl => run_party(a, Role::Evaluator, &cfg, &hooks, &prep, &mut rng, &mut em)?,
        RoleArg::Cloud => run_party(a, Role::Cloud, &cfg, &hooks, &prep, &mut rng, &mut em)?,
    }
    Ok(em.exit)
}

fn load_state(path: &Path) -> Result<Option<SavedState>, CliError> {
    if path.exists() {
        Ok(Some(SavedState::load(path)?))
    } else {
        Ok(None)
    }
}

fn run_local(
    a: &RunArgs,
    cfg: &ProtocolConfig,
    hooks: Hooks,
    program: &Circuit,
    rng: &mut ChaCha20Rng,
    em: &mut Emitter,
) -> Result<(), CliError> {
    let seed = rand::Rng::gen(rng);
    if let Some(d) = &a.state_dir {
        std::fs::create_dir_all(d)?;
    }
    if let Some(d) = &a.record {
        std::fs::create_dir_all(d)?;
    }
    let states = match &a.state_dir {
        Some(d) => (load_state(&d.join("gen.pgcs"))?, load_state(&d.join("cloud.pgcs"))?),
        None => (None, None),
    };
    let mut sess = LocalSession::new(
        cfg.clone(),
        SessionOptions {
            hooks,
            seed: Some(seed),
            record_dir: a.record.clone(),
            state_dir: a.state_dir.clone(),
        },
    )
    .with_states(states.0, states.1);
    for trial in 0..a.trials {
        let g = input_or_random(a.gen_input.as_deref(), program.gen_inputs, rng)?;
        let e = input_or_random(a.evl_input.as_deref(), program.evl_inputs, rng)?;
        let r = sess.run(program, &g, &e)?;
        let mut sent = HashMap::new();
        for ((from, _), b) in &r.bytes {
            *sent.entry(*from).or_insert(0) += b;
        }
        let outputs = r.outputs();
        let row = Row {
            exec_id: cfg.exec_id + trial as u64,
            abort: r.root_cause().cloned(),
            wall: r.elapsed,
            sent,
            gen_output: outputs.as_ref().map(|o| o.0.clone()),
            evl_output: outputs.map(|o| o.1),
        };
        let stop = row.abort.is_some();
        em.emit(trial, &row)?;
        if stop {
            break;
        }
    }
    Ok(())
}

fn state_path(a: &RunArgs, me: Role) -> Option<PathBuf> {
    a.state
        .clone()
        .or_else(|| a.state_dir.as_ref().map(|d| d.join(format!("{}.pgcs", me.short()))))
}

fn run_party(
    a: &RunArgs,
    me: Role,
    cfg: &ProtocolConfig,
    hooks: &Hooks,
    prep: &Prepared,
    rng: &mut ChaCha20Rng,
    em: &mut Emitter,
) -> Result<(), CliError> {
    let connect = a
        .connect
        .iter()
        .map(|s| parse_connect(s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut links = connect_peers(me, a.listen.as_deref(), &connect, cfg.timeout)?;
    let mut channel = |peer: Role| -> Result<Channel, CliError> {
        let stream = links.remove(&peer).expect("all peers linked");
        let ch = Channel::new(me, peer, Box::new(TcpTransport::new(stream)), cfg.exec_id).with_timeout(cfg.timeout);
        Ok(match &a.record {
            Some(d) => {
                std::fs::create_dir_all(d)?;
                let f = File::create(d.join(format!("{me}-{peer}.pgct")))?;
                ch.with_recorder(Box::new(BufWriter::new(f)))
            }
            None => ch,
        })
    };
    let (peer_a, peer_b) = match me {
        Role::Generator => (Role::Evaluator, Role::Cloud),
        Role::Evaluator => (Role::Generator, Role::Cloud),
        Role::Cloud => (Role::Generator, Role::Evaluator),
    };
    let mut ca = channel(peer_a)?;
    let mut cb = channel(peer_b)?;

    let path = match me {
        Role::Evaluator => None,
        _ => state_path(a, me),
    };
    if let Some(d) = path.as_ref().and_then(|p| p.parent()) {
        if !d.as_os_str().is_empty() {
            std::fs::create_dir_all(d)?;
        }
    }
    let mut state = match &path {
        Some(p) => load_state(p)?,
        None => None,
    };

    for trial in 0..a.trials {
        let mut tcfg = cfg.clone();
        tcfg.exec_id = cfg.exec_id + trial as u64;
        ca.reset(tcfg.exec_id);
        cb.reset(tcfg.exec_id);
        let mut row = Row {
            exec_id: tcfg.exec_id,
            ..Row::default()
        };
        let start = Instant::now();
        let result: Result<(), Abort> = match me {
            Role::Generator => {
                let input = input_or_random(a.input.as_deref(), prep.program.gen_inputs, rng)?;
                run_generator(&tcfg, prep, &mut ca, &mut cb, &input, state.as_ref(), hooks, rng).map(|o| {
                    row.gen_output = Some(o.outputs);
                    state = Some(o.state);
                })
            }
            Role::Evaluator => {
                let input = input_or_random(a.input.as_deref(), prep.program.evl_inputs, rng)?;
                run_evaluator(&tcfg, prep, &mut ca, &mut cb, &input, hooks, rng)
                    .map(|o| row.evl_output = Some(o.outputs))
            }
            Role::Cloud => run_cloud(
                &tcfg,
                prep,
                &mut ca,
                &mut cb,
                state.as_ref(),
                path.as_deref(),
                hooks,
                rng,
            )
            .map(|o| state = Some(o.state)),
        };
        row.wall = start.elapsed();
        ca.flush_recorder();
        cb.flush_recorder();
        row.sent.insert(me, ca.stats().sent + cb.stats().sent);
        if let Err(abort) = result {
            if abort.cause.caught_generator() {
                if let (Some(st), Some(p)) = (state.as_mut(), &path) {
                    st.poisoned = true;
                    st.persist(p)?;
                }
            }
            row.abort = Some(abort);
            em.emit(trial, &row)?;
            break;
        }
        if let (Role::Generator, Some(st), Some(p)) = (me, &state, &path) {
            st.persist(p)?;
        }
        em.emit(trial, &row)?;
    }
    Ok(())
}
