//! Fault injection for detection experiments. Only the generator and the
//! cloud act on these; an honest configuration carries no tamper.

use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::Rng;

/// Which circuit(s) a generator-side tamper hits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TamperTarget {
    Index(usize),
    /// Uniform over all circuits, drawn by the generator.
    Random,
    /// Every check circuit. Requires the split oracle.
    AllCheck,
    FirstEval,
    FirstCheck,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tamper {
    /// Flips a validity-pad bit in row 0 of the first AND gate.
    GateRow(TamperTarget),
    /// Flips one bit of the first partial input gate.
    PartialGate(TamperTarget),
    /// Perturbs the transformation value.
    PartialR(TamperTarget),
    /// Sends the other label for generator input 0.
    GenInputFlip(TamperTarget),
    /// Swaps the two targets of the first evaluator input translation gate.
    SwapEvlLabels(TamperTarget),
    /// Generator swaps its split-hash pair for one circuit.
    SplitHashSwap(usize),
    /// Cloud claims the opposite role for one circuit.
    CloudLieSplit(usize),
    /// Cloud flips one bit of the evaluator's output.
    CloudFlipOutput(usize),
}

/// Test-only view of the cloud's split, published by the cloud so that
/// split-aware tamper targets can be resolved.
pub type SplitOracle = Arc<Mutex<Option<Vec<bool>>>>;

#[derive(Clone, Debug, Default)]
pub struct Hooks {
    pub tamper: Option<Tamper>,
    pub split_oracle: SplitOracle,
}

impl Hooks {
    pub fn with_tamper(tamper: Tamper) -> Self {
        Self {
            tamper: Some(tamper),
            ..Self::default()
        }
    }

    pub(crate) fn publish_split(&self, bits: &[bool]) {
        *self.split_oracle.lock().unwrap() = Some(bits.to_vec());
    }

    /// Waits briefly for the cloud to publish its split.
    fn split(&self) -> Option<Vec<bool>> {
        let deadline = Instant::now() + Duration::from_secs(10);
        loop {
            if let Some(s) = self.split_oracle.lock().unwrap().clone() {
                return Some(s);
            }
            if Instant::now() >= deadline {
                return None;
            }
            std::thread::sleep(Duration::from_millis(1));
        }
    }
}

impl TamperTarget {
    /// Circuits hit by this target among `s`.
    pub(crate) fn resolve<R: Rng>(self, s: usize, hooks: &Hooks, rng: &mut R) -> Vec<usize> {
        let split = || hooks.split().unwrap_or_else(|| vec![false; s]);
        match self {
            TamperTarget::Index(i) => vec![i % s],
            TamperTarget::Random => vec![rng.gen_range(0..s)],
            TamperTarget::AllCheck => (0..s).filter(|&i| split()[i]).collect(),
            TamperTarget::FirstEval => split().iter().position(|&b| !b).into_iter().collect(),
            TamperTarget::FirstCheck => split().iter().position(|&b| b).into_iter().collect(),
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "random" => TamperTarget::Random,
            "all-check" => TamperTarget::AllCheck,
            "first-eval" => TamperTarget::FirstEval,
            "first-check" => TamperTarget::FirstCheck,
            n => TamperTarget::Index(n.parse().ok()?),
        })
    }
}

impl fmt::Display for TamperTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TamperTarget::Index(i) => write!(f, "{i}"),
            TamperTarget::Random => f.write_str("random"),
            TamperTarget::AllCheck => f.write_str("all-check"),
            TamperTarget::FirstEval => f.write_str("first-eval"),
            TamperTarget::FirstCheck => f.write_str("first-check"),
        }
    }
}

impl Tamper {
    /// Parses `kind:target`, e.g. `gate-row:random` or `cloud-flip-output:0`.
    pub fn parse(s: &str) -> Option<Self> {
        let (kind, arg) = s.split_once(':')?;
        let target = || TamperTarget::parse(arg);
        let index = || arg.parse::<usize>().ok();
        Some(match kind {
            "gate-row" => Tamper::GateRow(target()?),
            "partial-gate" => Tamper::PartialGate(target()?),
            "partial-r" => Tamper::PartialR(target()?),
            "gen-input" => Tamper::GenInputFlip(target()?),
            "swap-evl" => Tamper::SwapEvlLabels(target()?),
            "split-hash" => Tamper::SplitHashSwap(index()?),
            "cloud-split" => Tamper::CloudLieSplit(index()?),
            "cloud-output" => Tamper::CloudFlipOutput(index()?),
            _ => return None,
        })
    }
}

impl fmt::Display for Tamper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tamper::GateRow(t) => write!(f, "gate-row:{t}"),
            Tamper::PartialGate(t) => write!(f, "partial-gate:{t}"),
            Tamper::PartialR(t) => write!(f, "partial-r:{t}"),
            Tamper::GenInputFlip(t) => write!(f, "gen-input:{t}"),
            Tamper::SwapEvlLabels(t) => write!(f, "swap-evl:{t}"),
            Tamper::SplitHashSwap(i) => write!(f, "split-hash:{i}"),
            Tamper::CloudLieSplit(i) => write!(f, "cloud-split:{i}"),
            Tamper::CloudFlipOutput(i) => write!(f, "cloud-output:{i}"),
        }
    }
}
