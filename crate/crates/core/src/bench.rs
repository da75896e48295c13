//! Save/load microbenchmark for garbled wire values.
//!
//! Saving gathers both labels of every saved wire from the garbling contexts
//! and persists them. Loading reads the file back and builds the partial
//! input gates of the next execution.

use std::collections::HashMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{CryptoRng, RngCore};
use rayon::prelude::*;

use crate::abort::Role;
use crate::circuit::programs::counter_init;
use crate::cut_choose::CircuitSplit;
use crate::garble::{derive_context, GarblingContext};
use crate::label::{CircuitSeed, Security};
use crate::partial::{generate_partial_gates, transformation_value};
use crate::state::{Mode, SavedState, StateError, WireSave};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaveLoadSample {
    pub wires: usize,
    pub circuits: usize,
    pub save: Duration,
    pub load: Duration,
}

impl SaveLoadSample {
    fn bits(&self) -> f64 {
        (self.wires * self.circuits).max(1) as f64
    }

    pub fn save_ns_per_bit(&self) -> f64 {
        self.save.as_nanos() as f64 / self.bits()
    }

    pub fn load_ns_per_bit(&self) -> f64 {
        self.load.as_nanos() as f64 / self.bits()
    }
}

fn contexts<R: RngCore + CryptoRng>(sec: Security, circuits: usize, wires: usize, rng: &mut R) -> Vec<GarblingContext> {
    let c = counter_init(wires);
    let seeds: Vec<CircuitSeed> = (0..circuits).map(|_| CircuitSeed::random(sec, rng)).collect();
    seeds
        .iter()
        .map(|&s| derive_context(sec, s, &c, &HashMap::new()).expect("no injected labels"))
        .collect()
}

/// Times one save and one load of `wires` saved wires across `circuits`
/// circuits, keeping the median of `reps` repetitions. The state file is
/// written under `dir`.
pub fn save_load<R: RngCore + CryptoRng>(
    sec: Security,
    circuits: usize,
    wires: usize,
    reps: usize,
    dir: &Path,
    rng: &mut R,
) -> Result<SaveLoadSample, StateError> {
    let path = dir.join(format!("bench-{circuits}-{wires}.pgcs"));
    if wires == 0 {
        return Ok(SaveLoadSample {
            wires,
            circuits,
            save: Duration::ZERO,
            load: Duration::ZERO,
        });
    }
    let prev = contexts(sec, circuits, wires, rng);
    let next = contexts(sec, circuits, wires, rng);
    let saved = counter_init(wires).saved_wires;
    let gins: Vec<Vec<_>> = next
        .iter()
        .map(|ctx| (0..wires).map(|j| ctx.pair(j as u32)).collect())
        .collect();

    let mut saves = Vec::with_capacity(reps);
    let mut loads = Vec::with_capacity(reps);
    for _ in 0..reps.max(1) {
        let t = Instant::now();
        let state = SavedState {
            role: Role::Generator,
            // Key records are not part of the measurement.
            mode: Mode::SemiHonest,
            sec,
            next_execution: 1,
            circuits,
            split: CircuitSplit::all_eval(circuits),
            keys: None,
            wires: prev
                .iter()
                .map(|ctx| {
                    saved
                        .iter()
                        .map(|&w| {
                            let (a, b) = ctx.pair(w);
                            WireSave::Both(a, b)
                        })
                        .collect()
                })
                .collect(),
            poisoned: false,
        };
        state.persist(&path)?;
        saves.push(t.elapsed());

        let t = Instant::now();
        let back = SavedState::load(&path)?;
        let gates: usize = next
            .par_iter()
            .enumerate()
            .map(|(i, ctx)| {
                let pouts: Vec<_> = back.wires[i]
                    .iter()
                    .map(|w| match *w {
                        WireSave::Both(a, b) => (a, b),
                        _ => unreachable!("generator state"),
                    })
                    .collect();
                let r = transformation_value(sec, ctx.seed);
                generate_partial_gates(sec, ctx.seed, i, r, &pouts, &gins[i]).map_or(0, |g| g.len())
            })
            .sum();
        loads.push(t.elapsed());
        debug_assert_eq!(gates, circuits * wires);
    }
    let _ = std::fs::remove_file(&path);
    saves.sort();
    loads.sort();
    Ok(SaveLoadSample {
        wires,
        circuits,
        save: saves[saves.len() / 2],
        load: loads[loads.len() / 2],
    })
}

/// Least-squares fit `y = a + b x`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom == 0.0 {
        return (sy / n, 0.0);
    }
    let b = (n * sxy - sx * sy) / denom;
    ((sy - b * sx) / n, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_line() {
        let (a, b) = linear_fit(&[(1.0, 3.0), (2.0, 5.0), (4.0, 9.0)]);
        assert!((a - 1.0).abs() < 1e-9 && (b - 2.0).abs() < 1e-9);
    }
}
