//! Runs all three parties in one process over in-memory transports.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{
    run_cloud, run_evaluator, run_generator, CloudOutcome, EvaluatorOutcome, GeneratorOutcome, Hooks, Prepared,
    ProtocolConfig,
};
use crate::abort::{Abort, AbortCause, Role};
use crate::channel::Channel;
use crate::circuit::{AugmentError, Circuit};
use crate::state::SavedState;
use crate::transport::MemTransport;

#[derive(Clone, Debug, Default)]
pub struct SessionOptions {
    pub hooks: Hooks,
    /// Seeds every party's RNG; entropy when unset.
    pub seed: Option<u64>,
    /// Directory receiving `<from>-<to>.pgct` transcripts of each run.
    pub record_dir: Option<PathBuf>,
    /// Directory where `cloud.pgcs` and `gen.pgcs` are written.
    pub state_dir: Option<PathBuf>,
}

/// Everything one execution produced, per party.
#[derive(Debug)]
pub struct PartyResults {
    pub generator: Result<GeneratorOutcome, Abort>,
    pub evaluator: Result<EvaluatorOutcome, Abort>,
    pub cloud: Result<CloudOutcome, Abort>,
    /// Bytes sent on each directed link.
    pub bytes: HashMap<(Role, Role), u64>,
    pub elapsed: Duration,
}

impl PartyResults {
    pub fn is_ok(&self) -> bool {
        self.generator.is_ok() && self.evaluator.is_ok() && self.cloud.is_ok()
    }

    /// The most informative abort: the first one that is not a bare
    /// transport failure.
    pub fn root_cause(&self) -> Option<&Abort> {
        let all = [
            self.cloud.as_ref().err(),
            self.evaluator.as_ref().err(),
            self.generator.as_ref().err(),
        ];
        let all: Vec<&Abort> = all.into_iter().flatten().collect();
        all.iter()
            .find(|a| !matches!(a.cause, AbortCause::Transport(_)))
            .or(all.first())
            .copied()
    }

    /// `(generator outputs, evaluator outputs)` when everyone finished.
    pub fn outputs(&self) -> Option<(Vec<bool>, Vec<bool>)> {
        match (&self.generator, &self.evaluator) {
            (Ok(g), Ok(e)) if self.cloud.is_ok() => Some((g.outputs.clone(), e.outputs.clone())),
            _ => None,
        }
    }

    pub fn total_bytes(&self) -> u64 {
        self.bytes.values().sum()
    }
}

/// A chain of executions between three in-process parties.
pub struct LocalSession {
    cfg: ProtocolConfig,
    options: SessionOptions,
    gen_state: Option<SavedState>,
    cloud_state: Option<SavedState>,
    runs: u64,
    rng: ChaCha20Rng,
}

impl LocalSession {
    pub fn new(cfg: ProtocolConfig, options: SessionOptions) -> Self {
        let rng = match options.seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_entropy(),
        };
        Self {
            cfg,
            options,
            gen_state: None,
            cloud_state: None,
            runs: 0,
            rng,
        }
    }

    /// Resumes a chain from saved states.
    pub fn with_states(mut self, gen: Option<SavedState>, cloud: Option<SavedState>) -> Self {
        self.gen_state = gen;
        self.cloud_state = cloud;
        self
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn hooks_mut(&mut self) -> &mut Hooks {
        &mut self.options.hooks
    }

    pub fn gen_state(&self) -> Option<&SavedState> {
        self.gen_state.as_ref()
    }

    pub fn cloud_state(&self) -> Option<&SavedState> {
        self.cloud_state.as_ref()
    }

    /// Runs one execution. States advance only when all parties succeed;
    /// detected generator cheating poisons them.
    pub fn run(
        &mut self,
        program: &Circuit,
        gen_input: &[bool],
        evl_input: &[bool],
    ) -> Result<PartyResults, AugmentError> {
        let mut cfg = self.cfg.clone();
        cfg.exec_id = self.cfg.exec_id.wrapping_add(self.runs);
        self.runs += 1;
        let prep = Prepared::new(program.clone(), &cfg)?;
        let results = self.run_prepared(&cfg, &prep, gen_input, evl_input);
        if let (Ok(g), Ok(c)) = (&results.generator, &results.cloud) {
            if results.evaluator.is_ok() {
                self.gen_state = Some(g.state.clone());
                self.cloud_state = Some(c.state.clone());
                if let Some(dir) = &self.options.state_dir {
                    let _ = g.state.persist(&dir.join("gen.pgcs"));
                }
            }
        } else if results.root_cause().is_some_and(|a| a.cause.caught_generator()) {
            for st in [&mut self.gen_state, &mut self.cloud_state].into_iter().flatten() {
                st.poisoned = true;
            }
            if let (Some(dir), Some(c)) = (&self.options.state_dir, &self.cloud_state) {
                let _ = c.persist(&dir.join("cloud.pgcs"));
            }
        }
        Ok(results)
    }

    fn channel(&self, me: Role, peer: Role, t: MemTransport, exec_id: u64) -> Channel {
        let ch = Channel::new(me, peer, Box::new(t), exec_id).with_timeout(self.cfg.timeout);
        match &self.options.record_dir {
            Some(dir) => match File::create(dir.join(format!("{me}-{peer}.pgct"))) {
                Ok(f) => ch.with_recorder(Box::new(BufWriter::new(f))),
                Err(_) => ch,
            },
            None => ch,
        }
    }

    fn run_prepared(
        &mut self,
        cfg: &ProtocolConfig,
        prep: &Prepared,
        gen_input: &[bool],
        evl_input: &[bool],
    ) -> PartyResults {
        use Role::{Cloud, Evaluator, Generator};
        let exec = cfg.exec_id;
        let (ge, eg) = MemTransport::pair();
        let (gc, cg) = MemTransport::pair();
        let (ec, ce) = MemTransport::pair();
        let mut g_e = self.channel(Generator, Evaluator, ge, exec);
        let mut g_c = self.channel(Generator, Cloud, gc, exec);
        let mut e_g = self.channel(Evaluator, Generator, eg, exec);
        let mut e_c = self.channel(Evaluator, Cloud, ec, exec);
        let mut c_g = self.channel(Cloud, Generator, cg, exec);
        let mut c_e = self.channel(Cloud, Evaluator, ce, exec);

        let mut rg = ChaCha20Rng::from_rng(&mut self.rng).expect("chacha seeding");
        let mut re = ChaCha20Rng::from_rng(&mut self.rng).expect("chacha seeding");
        let mut rc = ChaCha20Rng::from_rng(&mut self.rng).expect("chacha seeding");
        let hooks = &self.options.hooks;
        let gen_state = self.gen_state.as_ref();
        let cloud_state = self.cloud_state.as_ref();
        let cloud_path = self.options.state_dir.as_ref().map(|d| d.join("cloud.pgcs"));

        let start = Instant::now();
        let (generator, evaluator, cloud) = std::thread::scope(|s| {
            let g = s.spawn(|| {
                let r = run_generator(cfg, prep, &mut g_e, &mut g_c, gen_input, gen_state, hooks, &mut rg);
                (r, g_e, g_c)
            });
            let e = s.spawn(|| {
                let r = run_evaluator(cfg, prep, &mut e_g, &mut e_c, evl_input, hooks, &mut re);
                (r, e_g, e_c)
            });
            let c = s.spawn(|| {
                let r = run_cloud(
                    cfg,
                    prep,
                    &mut c_g,
                    &mut c_e,
                    cloud_state,
                    cloud_path.as_deref(),
                    hooks,
                    &mut rc,
                );
                (r, c_g, c_e)
            });
            (
                g.join().expect("generator thread"),
                e.join().expect("evaluator thread"),
                c.join().expect("cloud thread"),
            )
        });
        let elapsed = start.elapsed();

        let mut bytes = HashMap::new();
        for ch in [
            &generator.1,
            &generator.2,
            &evaluator.1,
            &evaluator.2,
            &cloud.1,
            &cloud.2,
        ] {
            bytes.insert((ch.me(), ch.peer()), ch.stats().sent);
        }
        PartyResults {
            generator: generator.0,
            evaluator: evaluator.0,
            cloud: cloud.0,
            bytes,
            elapsed,
        }
    }
}
