//! Map chains driven through the protocol engine.
//!
//! The gateway plays the evaluator for every user action; the generator
//! and cloud keep the map as saved wire values between executions. A set is
//! a get on the target cell, then a write, then a clear of the user's
//! previous cell when there is one.

use std::collections::HashMap;

use pgc_core::abort::Abort;
use pgc_core::circuit::programs::{map_get, map_set, map_start};
use pgc_core::circuit::{AugmentError, Circuit};
use pgc_core::protocol::{LocalSession, ProtocolConfig, SessionOptions};
use pgc_core::util::{bits_of, index_bits, value_of};
use thiserror::Error;

pub const CELL_BITS: usize = 8;
pub const MAX_USER: u8 = 255;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("cell {cell} is out of range for a map of {cells} cells")]
    BadCell { cell: usize, cells: usize },
    #[error("user id must be in 1..={MAX_USER}")]
    BadUser,
    #[error("map size must be in 1..={max}")]
    BadSize { max: usize },
    #[error("protocol aborted: {0}")]
    Aborted(Abort),
    #[error(transparent)]
    Program(#[from] AugmentError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetOutcome {
    Moved,
    Occupied(u8),
}

/// Hooks for progress reporting around each protocol execution.
pub trait Observer {
    fn started(&mut self, _op: &'static str) {}
    fn completed(&mut self, _op: &'static str) {}
    fn aborted(&mut self, _op: &'static str, _abort: &Abort) {}
}

impl Observer for () {}

pub struct MapChain {
    cells: usize,
    session: LocalSession,
    start: Circuit,
    set: Circuit,
    get: Circuit,
    /// Each user's current cell, as the user's own device would remember it.
    positions: HashMap<u8, usize>,
    executions: u64,
}

impl MapChain {
    pub fn new(cells: usize, cfg: ProtocolConfig, options: SessionOptions) -> Self {
        Self {
            cells,
            session: LocalSession::new(cfg, options),
            start: map_start(cells, CELL_BITS),
            set: map_set(cells, CELL_BITS),
            get: map_get(cells, CELL_BITS),
            positions: HashMap::new(),
            executions: 0,
        }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Protocol executions run so far, including the initial blank map.
    pub fn executions(&self) -> u64 {
        self.executions
    }

    pub fn position(&self, user: u8) -> Option<usize> {
        self.positions.get(&user).copied()
    }

    fn exec(
        &mut self,
        op: &'static str,
        which: Which,
        evl: &[bool],
        obs: &mut dyn Observer,
    ) -> Result<Vec<bool>, MapError> {
        obs.started(op);
        let program = match which {
            Which::Start => &self.start,
            Which::Set => &self.set,
            Which::Get => &self.get,
        }
        .clone();
        let r = self.session.run(&program, &[], evl)?;
        self.executions += 1;
        match r.outputs() {
            Some((_, out)) => {
                obs.completed(op);
                Ok(out)
            }
            None => {
                let abort = r.root_cause().cloned().expect("a failed run has an abort");
                obs.aborted(op, &abort);
                Err(MapError::Aborted(abort))
            }
        }
    }

    fn check_cell(&self, cell: usize) -> Result<(), MapError> {
        if cell >= self.cells {
            return Err(MapError::BadCell {
                cell,
                cells: self.cells,
            });
        }
        Ok(())
    }

    /// Creates the blank map.
    pub fn start(&mut self, obs: &mut dyn Observer) -> Result<(), MapError> {
        self.exec("start", Which::Start, &[false], obs).map(|_| ())
    }

    pub fn get(&mut self, cell: usize, obs: &mut dyn Observer) -> Result<u8, MapError> {
        self.check_cell(cell)?;
        let idx = bits_of(cell as u64, index_bits(self.cells));
        let out = self.exec("get", Which::Get, &idx, obs)?;
        Ok(value_of(&out) as u8)
    }

    fn write(&mut self, cell: usize, value: u8, obs: &mut dyn Observer) -> Result<(), MapError> {
        let mut evl = bits_of(cell as u64, index_bits(self.cells));
        evl.extend(bits_of(value as u64, CELL_BITS));
        self.exec("set", Which::Set, &evl, obs).map(|_| ())
    }

    /// Moves `user` to `cell` unless another user occupies it.
    pub fn set(&mut self, user: u8, cell: usize, obs: &mut dyn Observer) -> Result<SetOutcome, MapError> {
        if user == 0 {
            return Err(MapError::BadUser);
        }
        self.check_cell(cell)?;
        let current = self.get(cell, obs)?;
        if current != 0 && current != user {
            return Ok(SetOutcome::Occupied(current));
        }
        if current != user {
            self.write(cell, user, obs)?;
        }
        if let Some(prev) = self.positions.insert(user, cell) {
            if prev != cell {
                // A failed clear leaves the user registered at the new cell.
                self.write(prev, 0, obs)?;
            }
        }
        Ok(SetOutcome::Moved)
    }
}

#[derive(Clone, Copy)]
enum Which {
    Start,
    Set,
    Get,
}
