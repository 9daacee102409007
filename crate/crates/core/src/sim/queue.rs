//! Deterministic event heap.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::model::{JobId, NodeId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    /// Reclaim signal; `notice_s` is `None` for an emergency.
    Departure { node: NodeId, notice_s: Option<f64> },
    Withdrawal { node: NodeId },
    NodeReturn { node: NodeId },
    ControllerTick,
    CheckpointDue { job: JobId, generation: u64 },
    RestartDone { job: JobId, generation: u64 },
    /// A bandwidth trace segment boundary.
    RateChange,
    End,
}

impl Event {
    /// Tie-break rank at equal timestamps: reclaims first, then controller
    /// ticks, then job and flow bookkeeping.
    pub fn rank(&self) -> u8 {
        match self {
            Event::Departure { .. } => 0,
            Event::Withdrawal { .. } => 1,
            Event::NodeReturn { .. } => 2,
            Event::ControllerTick => 3,
            Event::CheckpointDue { .. } => 4,
            Event::RestartDone { .. } => 5,
            Event::RateChange => 6,
            Event::End => 9,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    time: f64,
    rank: u8,
    seq: u64,
    event: Event,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed so the max-heap pops the earliest entry.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.rank.cmp(&self.rank))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Min-heap on `(time, rank, insertion order)`.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Entry>,
    seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: f64, event: Event) {
        assert!(time.is_finite(), "event time must be finite");
        self.seq += 1;
        self.heap.push(Entry { time, rank: event.rank(), seq: self.seq, event });
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn pop(&mut self) -> Option<(f64, Event)> {
        self.heap.pop().map(|e| (e.time, e.event))
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_break_by_rank_then_insertion() {
        let mut q = EventQueue::new();
        q.push(5.0, Event::RateChange);
        q.push(5.0, Event::ControllerTick);
        q.push(5.0, Event::Departure { node: NodeId(1), notice_s: None });
        q.push(5.0, Event::Departure { node: NodeId(0), notice_s: None });
        q.push(1.0, Event::End);
        let order: Vec<Event> = std::iter::from_fn(|| q.pop().map(|e| e.1)).collect();
        assert_eq!(
            order,
            vec![
                Event::End,
                Event::Departure { node: NodeId(1), notice_s: None },
                Event::Departure { node: NodeId(0), notice_s: None },
                Event::ControllerTick,
                Event::RateChange,
            ]
        );
    }

    proptest! {
        #[test]
        fn pops_non_decreasing(times in prop::collection::vec(0.0f64..100.0, 1..60)) {
            let mut q = EventQueue::new();
            for t in &times {
                q.push(*t, Event::ControllerTick);
            }
            let mut last = f64::NEG_INFINITY;
            while let Some((t, _)) = q.pop() {
                prop_assert!(t >= last);
                last = t;
            }
        }
    }
}
