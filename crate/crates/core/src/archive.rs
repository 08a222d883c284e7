//! Bounded store of the best `(value, position)` pairs observed during a run.
//!
//! The store is a binary heap keyed so that the *worst* retained entry sits at
//! the root. A new observation is inserted while there is room; once full it
//! replaces the root only when it is strictly better. Both operations cost
//! `O(log capacity)` value comparisons.
//!
//! Positions closer than [`DUPLICATE_TOLERANCE`] to a stored entry are
//! rejected: repeated rows would make the interpolation system singular.

use std::cmp::Ordering;

use thiserror::Error;

/// Euclidean distance below which two positions count as the same sample.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArchiveError {
    #[error("archive is empty")]
    Empty,
    #[error("archive capacity must be at least 1")]
    ZeroCapacity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sense {
    #[default]
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry {
    pub value: f64,
    pub position: Vec<f64>,
}

/// Result of offering an observation to the archive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    Inserted,
    ReplacedWorst,
    /// Not better than the current worst entry.
    NotImproving,
    /// Within [`DUPLICATE_TOLERANCE`] of a stored position.
    Duplicate,
    /// The value was NaN or infinite.
    NonFinite,
}

impl Observation {
    pub fn stored(self) -> bool {
        matches!(self, Observation::Inserted | Observation::ReplacedWorst)
    }
}

#[derive(Debug, Clone)]
struct Slot {
    // Lower is better regardless of sense.
    score: f64,
    // Insertion order; earlier observations win ties.
    seq: u64,
    entry: ArchiveEntry,
}

impl Slot {
    /// Total order on "badness": greater means worse.
    fn badness(&self, other: &Slot) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Debug, Clone)]
pub struct Archive {
    capacity: usize,
    sense: Sense,
    heap: Vec<Slot>,
    next_seq: u64,
    comparisons: u64,
}

impl Archive {
    pub fn new(capacity: usize) -> Result<Self, ArchiveError> {
        Self::with_sense(capacity, Sense::Minimize)
    }

    pub fn with_sense(capacity: usize, sense: Sense) -> Result<Self, ArchiveError> {
        if capacity == 0 {
            return Err(ArchiveError::ZeroCapacity);
        }
        Ok(Self {
            capacity,
            sense,
            heap: Vec::with_capacity(capacity),
            next_seq: 0,
            comparisons: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.heap.len() >= self.capacity
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    /// Number of heap value comparisons performed so far.
    pub fn comparisons(&self) -> u64 {
        self.comparisons
    }

    /// The currently worst retained entry.
    pub fn worst(&self) -> Option<&ArchiveEntry> {
        self.heap.first().map(|s| &s.entry)
    }

    fn score(&self, value: f64) -> f64 {
        match self.sense {
            Sense::Minimize => value,
            Sense::Maximize => -value,
        }
    }

    fn is_duplicate(&self, x: &[f64]) -> bool {
        let tol_sq = DUPLICATE_TOLERANCE * DUPLICATE_TOLERANCE;
        self.heap.iter().any(|s| {
            let d: f64 = s
                .entry
                .position
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d <= tol_sq
        })
    }

    /// Offer an evaluated point to the archive.
    pub fn observe(&mut self, x: &[f64], fx: f64) -> Observation {
        if !fx.is_finite() {
            return Observation::NonFinite;
        }
        let score = self.score(fx);
        if self.is_full() {
            self.comparisons += 1;
            // Ties with the worst leave the archive unchanged.
            if score >= self.heap[0].score {
                return Observation::NotImproving;
            }
        }
        if self.is_duplicate(x) {
            return Observation::Duplicate;
        }
        let slot = Slot {
            score,
            seq: self.next_seq,
            entry: ArchiveEntry {
                value: fx,
                position: x.to_vec(),
            },
        };
        self.next_seq += 1;
        if self.is_full() {
            self.heap[0] = slot;
            self.sift_down(0);
            Observation::ReplacedWorst
        } else {
            self.heap.push(slot);
            let last = self.heap.len() - 1;
            self.sift_up(last);
            Observation::Inserted
        }
    }

    fn worse(&mut self, a: usize, b: usize) -> bool {
        self.comparisons += 1;
        self.heap[a].badness(&self.heap[b]) == Ordering::Greater
    }

    fn sift_up(&mut self, mut i: usize) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if self.worse(i, parent) {
                self.heap.swap(i, parent);
                i = parent;
            } else {
                break;
            }
        }
    }

    fn sift_down(&mut self, mut i: usize) {
        let n = self.heap.len();
        loop {
            let left = 2 * i + 1;
            if left >= n {
                break;
            }
            let right = left + 1;
            let child = if right < n && self.worse(right, left) {
                right
            } else {
                left
            };
            if self.worse(child, i) {
                self.heap.swap(i, child);
                i = child;
            } else {
                break;
            }
        }
    }

    /// The best retained entry (earliest observation among equal values).
    pub fn best(&self) -> Result<&ArchiveEntry, ArchiveError> {
        self.heap
            .iter()
            .min_by(|a, b| a.badness(b))
            .map(|s| &s.entry)
            .ok_or(ArchiveError::Empty)
    }

    /// Entries ordered best-first.
    pub fn sorted_entries(&self) -> Result<Vec<&ArchiveEntry>, ArchiveError> {
        if self.heap.is_empty() {
            return Err(ArchiveError::Empty);
        }
        let mut slots: Vec<&Slot> = self.heap.iter().collect();
        slots.sort_by(|a, b| a.badness(b));
        Ok(slots.into_iter().map(|s| &s.entry).collect())
    }

    /// Positions and values ordered best-first, as parallel vectors.
    pub fn sorted_points(&self) -> Result<(Vec<Vec<f64>>, Vec<f64>), ArchiveError> {
        let entries = self.sorted_entries()?;
        Ok(entries
            .into_iter()
            .map(|e| (e.position.clone(), e.value))
            .unzip())
    }
}
