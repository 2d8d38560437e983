//! O(1) bitmap scheduler: two priority arrays with a swap bit, plus the
//! single-array tasklet queue used by softirq.
//!
//! Level 0 is the most urgent. Within a level entries are served FIFO, which
//! gives round-robin when the running thread is re-enqueued at the tail.

use arrayvec::ArrayVec;

use crate::check::{ensure, Check, Violation};
use crate::config::{Pid, MAX_PROCS, THREAD_LEVELS};

/// One bitmap priority array: 32 FIFO queues and the map of non-empty levels.
///
/// Entries are kept ordered by level, then by arrival, so the head of the
/// storage is always the head of the most urgent queue.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PriorityArray {
    bitmap: u32,
    entries: ArrayVec<(u8, Pid), MAX_PROCS>,
    capacity: u8,
}

impl PriorityArray {
    pub fn new(capacity: usize) -> PriorityArray {
        assert!(capacity <= MAX_PROCS);
        PriorityArray {
            bitmap: 0,
            entries: ArrayVec::new(),
            capacity: capacity as u8,
        }
    }

    pub fn bitmap(&self) -> u32 {
        self.bitmap
    }

    pub fn capacity(&self) -> usize {
        self.capacity as usize
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, pid: Pid) -> bool {
        self.entries.iter().any(|&(_, p)| p == pid)
    }

    /// `(level, pid)` pairs in service order.
    pub fn entries(&self) -> &[(u8, Pid)] {
        &self.entries
    }

    /// Queue contents at one level, head first.
    pub fn queue(&self, level: u8) -> impl Iterator<Item = Pid> + '_ {
        self.entries
            .iter()
            .filter(move |&&(l, _)| l == level)
            .map(|&(_, p)| p)
    }

    pub fn enqueue(&mut self, pid: Pid, level: u8) -> Result<(), Violation> {
        ensure(
            level < THREAD_LEVELS,
            Check::QueueBounds,
            "priority level out of range",
        )?;
        ensure(
            !self.contains(pid),
            Check::QueueBounds,
            "pid already enqueued",
        )?;
        ensure(
            self.entries.len() < self.capacity as usize,
            Check::QueueBounds,
            "runqueue overflow",
        )?;
        let at = self.entries.partition_point(|&(l, _)| l <= level);
        self.entries.insert(at, (level, pid));
        self.bitmap |= 1 << level;
        Ok(())
    }

    /// Removes the head of the most urgent non-empty level.
    pub fn dequeue_highest(&mut self) -> Result<Option<Pid>, Violation> {
        if self.bitmap == 0 {
            ensure(
                self.entries.is_empty(),
                Check::BitmapConsistency,
                "empty map, non-empty queue",
            )?;
            return Ok(None);
        }
        let level = self.bitmap.trailing_zeros() as u8;
        let head = self.entries.first().copied();
        let Some((head_level, pid)) = head.filter(|&(l, _)| l == level) else {
            return Err(Violation::new(
                Check::BitmapConsistency,
                "map bit set but queue at that level is empty",
            ));
        };
        debug_assert_eq!(head_level, level);
        self.entries.remove(0);
        if self.entries.first().map(|&(l, _)| l) != Some(level) {
            self.bitmap &= !(1 << level);
        }
        Ok(Some(pid))
    }

    /// Removes `pid` wherever it is queued; returns whether it was present.
    pub fn remove(&mut self, pid: Pid) -> bool {
        let Some(i) = self.entries.iter().position(|&(_, p)| p == pid) else {
            return false;
        };
        let (level, _) = self.entries.remove(i);
        if !self.entries.iter().any(|&(l, _)| l == level) {
            self.bitmap &= !(1 << level);
        }
        true
    }

    /// Bit `L` of the map is set exactly when the level-`L` queue is non-empty.
    pub fn check_consistency(&self) -> Result<(), Violation> {
        let derived = self.entries.iter().fold(0u32, |m, &(l, _)| m | 1 << l);
        ensure(
            derived == self.bitmap,
            Check::BitmapConsistency,
            "bitmap disagrees with queue contents",
        )
    }

    /// Rebuilds an array from raw parts; used by state decoding.
    pub(crate) fn from_parts(bitmap: u32, entries: &[(u8, Pid)], capacity: usize) -> PriorityArray {
        PriorityArray {
            bitmap,
            entries: entries.iter().copied().collect(),
            capacity: capacity as u8,
        }
    }
}

/// Logical runqueue selector, resolved to a physical array through the swap bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Which {
    Active,
    Expired,
}

impl Which {
    /// ACTIVE is `swap`, EXPIRED is `1 ^ swap`.
    pub fn physical(self, swap: u8) -> usize {
        match self {
            Which::Active => swap as usize,
            Which::Expired => (1 ^ swap) as usize,
        }
    }
}

/// Which branch of the election produced the next thread.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElectPath {
    /// Taken from a non-empty ACTIVE array.
    Active,
    /// ACTIVE was empty; arrays swapped and the former EXPIRED array served.
    AfterSwap,
    /// Both arrays empty.
    Idle,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RunQueueSet {
    arrays: [PriorityArray; 2],
    swap: u8,
}

impl RunQueueSet {
    pub fn new(capacity: usize) -> RunQueueSet {
        RunQueueSet {
            arrays: [PriorityArray::new(capacity), PriorityArray::new(capacity)],
            swap: 0,
        }
    }

    pub fn swap_bit(&self) -> u8 {
        self.swap
    }

    pub fn view(&self, which: Which) -> &PriorityArray {
        &self.arrays[which.physical(self.swap)]
    }

    pub fn physical(&self, index: usize) -> &PriorityArray {
        &self.arrays[index]
    }

    pub fn contains(&self, pid: Pid) -> bool {
        self.arrays.iter().any(|a| a.contains(pid))
    }

    pub fn enqueue(&mut self, which: Which, pid: Pid, level: u8) -> Result<(), Violation> {
        ensure(
            !self.contains(pid),
            Check::QueueBounds,
            "pid already enqueued",
        )?;
        self.arrays[which.physical(self.swap)].enqueue(pid, level)
    }

    pub fn dequeue_highest(&mut self, which: Which) -> Result<Option<Pid>, Violation> {
        self.arrays[which.physical(self.swap)].dequeue_highest()
    }

    /// Exchanges the roles of the two arrays without moving any entry.
    pub fn swap(&mut self) {
        self.swap ^= 1;
    }

    pub fn remove(&mut self, pid: Pid) -> bool {
        self.arrays.iter_mut().any(|a| a.remove(pid))
    }

    /// Dequeues from ACTIVE; when ACTIVE is empty swaps first. `None` means idle.
    pub fn sched_elect(&mut self) -> Result<(Option<Pid>, ElectPath), Violation> {
        if let Some(pid) = self.dequeue_highest(Which::Active)? {
            return Ok((Some(pid), ElectPath::Active));
        }
        self.swap();
        match self.dequeue_highest(Which::Active)? {
            Some(pid) => Ok((Some(pid), ElectPath::AfterSwap)),
            None => Ok((None, ElectPath::Idle)),
        }
    }

    pub fn check_consistency(&self) -> Result<(), Violation> {
        self.arrays
            .iter()
            .try_for_each(PriorityArray::check_consistency)
    }

    pub(crate) fn from_parts(arrays: [PriorityArray; 2], swap: u8) -> RunQueueSet {
        RunQueueSet { arrays, swap }
    }
}

/// Bottom-half run queue: a single priority array served by softirq.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TaskletQueue(pub PriorityArray);

impl TaskletQueue {
    pub fn new(capacity: usize) -> TaskletQueue {
        TaskletQueue(PriorityArray::new(capacity))
    }

    /// Queues a bottom half unless it is already queued.
    pub fn raise(&mut self, id: Pid, level: u8) -> Result<(), Violation> {
        if self.0.contains(id) {
            return Ok(());
        }
        self.0.enqueue(id, level)
    }

    pub fn pop(&mut self) -> Result<Option<Pid>, Violation> {
        self.0.dequeue_highest()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn enqueue_sets_level_bit() {
        let mut a = PriorityArray::new(3);
        a.enqueue(Pid(0), 16).unwrap();
        assert_eq!(a.bitmap(), 1 << 16);
        assert_eq!(a.queue(16).collect::<Vec<_>>(), vec![Pid(0)]);
    }

    #[test]
    fn duplicate_or_full_enqueue_trips_queue_bounds() {
        let mut a = PriorityArray::new(2);
        a.enqueue(Pid(0), 3).unwrap();
        assert_eq!(a.enqueue(Pid(0), 3).unwrap_err().check, Check::QueueBounds);
        a.enqueue(Pid(1), 4).unwrap();
        assert_eq!(a.enqueue(Pid(2), 4).unwrap_err().check, Check::QueueBounds);
    }

    #[test]
    fn dequeue_prefers_lower_level_number() {
        // Levels 5 and 9: 5 is more urgent under the lower-is-higher order.
        let mut a = PriorityArray::new(4);
        a.enqueue(Pid(1), 9).unwrap();
        a.enqueue(Pid(0), 5).unwrap();
        assert_eq!(a.dequeue_highest().unwrap(), Some(Pid(0)));
        assert_eq!(a.dequeue_highest().unwrap(), Some(Pid(1)));
        assert_eq!(a.dequeue_highest().unwrap(), None);
        assert_eq!(a.bitmap(), 0);
    }

    #[test]
    fn fifo_within_level() {
        let mut a = PriorityArray::new(4);
        a.enqueue(Pid(3), 7).unwrap();
        a.enqueue(Pid(1), 7).unwrap();
        assert_eq!(a.dequeue_highest().unwrap(), Some(Pid(3)));
        assert_eq!(a.bitmap(), 1 << 7);
        assert_eq!(a.dequeue_highest().unwrap(), Some(Pid(1)));
        assert_eq!(a.bitmap(), 0);
    }

    #[test]
    fn inconsistent_bitmap_is_reported() {
        let a = PriorityArray::from_parts(1 << 4, &[], 2);
        assert_eq!(
            a.check_consistency().unwrap_err().check,
            Check::BitmapConsistency
        );
        let mut a = a;
        assert_eq!(
            a.dequeue_highest().unwrap_err().check,
            Check::BitmapConsistency
        );
    }

    #[test]
    fn swap_bit_resolves_physical_array() {
        assert_eq!(Which::Active.physical(0), 0);
        assert_eq!(Which::Expired.physical(0), 1);
        assert_eq!(Which::Active.physical(1), 1);
        assert_eq!(Which::Expired.physical(1), 0);

        let mut rq = RunQueueSet::new(2);
        rq.enqueue(Which::Expired, Pid(0), 16).unwrap();
        assert!(rq.view(Which::Active).is_empty());
        rq.swap();
        assert_eq!(rq.view(Which::Active).entries(), &[(16, Pid(0))]);
        assert_eq!(rq.physical(1).entries(), &[(16, Pid(0))]);
    }

    #[test]
    fn swap_on_empty_only_toggles_bit() {
        let rq = RunQueueSet::new(2);
        let mut swapped = rq.clone();
        swapped.swap();
        assert_eq!(swapped.swap_bit(), 1);
        assert!(swapped.view(Which::Active).is_empty() && swapped.view(Which::Expired).is_empty());
        swapped.swap();
        assert_eq!(swapped, rq);
    }

    #[test]
    fn elect_paths() {
        let mut rq = RunQueueSet::new(2);
        rq.enqueue(Which::Active, Pid(1), 16).unwrap();
        assert_eq!(rq.sched_elect().unwrap(), (Some(Pid(1)), ElectPath::Active));
        assert_eq!(rq.swap_bit(), 0);

        rq.enqueue(Which::Expired, Pid(0), 16).unwrap();
        assert_eq!(
            rq.sched_elect().unwrap(),
            (Some(Pid(0)), ElectPath::AfterSwap)
        );
        assert_eq!(rq.swap_bit(), 1);

        assert_eq!(rq.sched_elect().unwrap(), (None, ElectPath::Idle));
    }

    #[test]
    fn tasklet_raise_is_idempotent() {
        let mut t = TaskletQueue::new(1);
        t.raise(Pid(3), 0).unwrap();
        t.raise(Pid(3), 0).unwrap();
        assert_eq!(t.0.len(), 1);
        assert_eq!(t.pop().unwrap(), Some(Pid(3)));
        assert!(t.is_empty());
    }

    #[derive(Clone, Debug)]
    enum Op {
        Enqueue(Which, u8, u8),
        Dequeue(Which),
        Swap,
        Remove(u8),
    }

    fn op() -> impl Strategy<Value = Op> {
        let which = prop_oneof![Just(Which::Active), Just(Which::Expired)];
        prop_oneof![
            (which.clone(), 0u8..6, 0u8..32).prop_map(|(w, p, l)| Op::Enqueue(w, p, l)),
            which.prop_map(Op::Dequeue),
            Just(Op::Swap),
            (0u8..6).prop_map(Op::Remove),
        ]
    }

    proptest! {
        #[test]
        fn random_op_sequences_keep_invariants(ops in proptest::collection::vec(op(), 0..60)) {
            let mut rq = RunQueueSet::new(6);
            // Reference model: per physical array, per level, a FIFO of pids.
            let mut reference: [Vec<Vec<Pid>>; 2] = [vec![Vec::new(); 32], vec![Vec::new(); 32]];
            for op in ops {
                match op {
                    Op::Enqueue(w, p, l) => {
                        let ok = rq.enqueue(w, Pid(p), l).is_ok();
                        let present = reference.iter().flatten().flatten().any(|&q| q == Pid(p));
                        prop_assert_eq!(ok, !present);
                        if ok {
                            reference[w.physical(rq.swap_bit())][l as usize].push(Pid(p));
                        }
                    }
                    Op::Dequeue(w) => {
                        let got = rq.dequeue_highest(w).unwrap();
                        let queues = &mut reference[w.physical(rq.swap_bit())];
                        let expected = queues.iter_mut().find(|q| !q.is_empty()).map(|q| q.remove(0));
                        prop_assert_eq!(got, expected);
                    }
                    Op::Swap => {
                        let before = rq.clone();
                        rq.swap();
                        let mut twice = rq.clone();
                        twice.swap();
                        prop_assert_eq!(twice, before);
                    }
                    Op::Remove(p) => {
                        let removed = rq.remove(Pid(p));
                        let mut found = false;
                        for q in reference.iter_mut().flatten() {
                            if let Some(i) = q.iter().position(|&x| x == Pid(p)) {
                                q.remove(i);
                                found = true;
                            }
                        }
                        prop_assert_eq!(removed, found);
                    }
                }
                prop_assert!(rq.check_consistency().is_ok());
                for (phys, expected) in reference.iter().enumerate() {
                    for level in 0..32u8 {
                        let got: Vec<Pid> = rq.physical(phys).queue(level).collect();
                        prop_assert_eq!(&got, &expected[level as usize]);
                        let bit = rq.physical(phys).bitmap() >> level & 1 == 1;
                        prop_assert_eq!(bit, !got.is_empty());
                    }
                }
            }
        }
    }
}
