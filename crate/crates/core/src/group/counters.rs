//! Operation counters for conformance testing against the analytical cost model.
//!
//! Only full-length exponentiations and pairing evaluations are tallied;
//! plain group operations, scalar arithmetic and hash evaluations are not.
//! A k-term multi-scalar multiplication tallies k exponentiations and a
//! k-pair multi-pairing tallies k pairings: the counters track model-level
//! operations, not how the backend batches them.
//!
//! Tallies are thread-local. Code that fans work out to other threads is
//! responsible for collecting the workers' deltas (via [`tally_detached`])
//! and folding them back with [`merge`], so that a [`measure`] scope on the
//! calling thread sees the complete count.

use std::cell::Cell;
use std::ops::{Add, AddAssign, Sub};

/// Counts of the operations the cost model charges for.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCounters {
    pub g1_exp: u64,
    pub g2_exp: u64,
    pub gt_exp: u64,
    pub pairings: u64,
}

impl OpCounters {
    pub fn is_zero(&self) -> bool {
        *self == OpCounters::default()
    }
}

impl Add for OpCounters {
    type Output = OpCounters;
    fn add(self, rhs: OpCounters) -> OpCounters {
        OpCounters {
            g1_exp: self.g1_exp + rhs.g1_exp,
            g2_exp: self.g2_exp + rhs.g2_exp,
            gt_exp: self.gt_exp + rhs.gt_exp,
            pairings: self.pairings + rhs.pairings,
        }
    }
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, rhs: OpCounters) {
        *self = *self + rhs;
    }
}

impl Sub for OpCounters {
    type Output = OpCounters;
    fn sub(self, rhs: OpCounters) -> OpCounters {
        OpCounters {
            g1_exp: self.g1_exp - rhs.g1_exp,
            g2_exp: self.g2_exp - rhs.g2_exp,
            gt_exp: self.gt_exp - rhs.gt_exp,
            pairings: self.pairings - rhs.pairings,
        }
    }
}

thread_local! {
    static TALLY: Cell<OpCounters> = const { Cell::new(OpCounters {
        g1_exp: 0,
        g2_exp: 0,
        gt_exp: 0,
        pairings: 0,
    }) };
}

pub(crate) fn bump_g1(n: u64) {
    TALLY.with(|t| {
        let mut c = t.get();
        c.g1_exp += n;
        t.set(c);
    });
}

pub(crate) fn bump_g2(n: u64) {
    TALLY.with(|t| {
        let mut c = t.get();
        c.g2_exp += n;
        t.set(c);
    });
}

pub(crate) fn bump_gt(n: u64) {
    TALLY.with(|t| {
        let mut c = t.get();
        c.gt_exp += n;
        t.set(c);
    });
}

pub(crate) fn bump_pairing(n: u64) {
    TALLY.with(|t| {
        let mut c = t.get();
        c.pairings += n;
        t.set(c);
    });
}

/// Current cumulative tally of the calling thread.
pub fn snapshot() -> OpCounters {
    TALLY.with(|t| t.get())
}

/// Runs `f` and returns its result together with the operations it performed
/// on the calling thread.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, OpCounters) {
    let before = snapshot();
    let out = f();
    (out, snapshot() - before)
}

/// Like [`measure`], but resets the thread tally to its prior value so the
/// counted operations are *only* reported in the returned delta. Used by
/// parallel sections that hand their deltas back to the coordinating thread.
pub fn tally_detached<T>(f: impl FnOnce() -> T) -> (T, OpCounters) {
    let before = snapshot();
    let out = f();
    let delta = snapshot() - before;
    TALLY.with(|t| t.set(before));
    (out, delta)
}

/// Folds an externally collected delta into the calling thread's tally.
pub fn merge(delta: OpCounters) {
    TALLY.with(|t| t.set(t.get() + delta));
}
