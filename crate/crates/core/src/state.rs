//! The global state vector and its canonical byte encoding.
//!
//! # Encoding layout
//!
//! All multi-byte integers are little-endian; `pid` slots use `0xFF` for
//! "none" and `0xFE` for the idle pseudo-thread. For a fixed [`Shape`] the
//! encoding has constant length ([`Shape::encoded_len`]). Fields in order:
//!
//! | field | bytes |
//! |---|---|
//! | AT | 1 |
//! | ATStack length, then `stack_cap` pid slots (bottom first) | 1 + stack_cap |
//! | ghost_direct_AT | 1 |
//! | pending set, active set (bit per pid) | 2 + 2 |
//! | runqueue swap bit | 1 |
//! | physical array 0 then 1: bitmap, length, `rq_cap` × (level, pid) | 2 × (4 + 1 + 2·rq_cap) |
//! | tasklet array: bitmap, length, `tasklet_cap` × (level, pid) | 4 + 1 + 2·tasklet_cap |
//! | thread state per user-level pid (0/1 = physical array, 2 = blocked) | user_level |
//! | program counter per pid | procs |
//! | mutex value (i8), owner, wait length, `wait_cap` pid slots | 3 + wait_cap |
//! | condvar waiter length, `cond_cap` pid slots | 1 + cond_cap |
//! | exclusive monitor mark (address or 0xFF) | 1 |
//! | buffer occupancy | 1 |
//! | critical-section bits (bit 0 cs_c, bit 1 cs_p) | 1 |
//! | SVC channel caller, service code | 2 |
//! | tick credit per interrupt | interrupts |

use arrayvec::ArrayVec;

use crate::config::{Config, Layout, Pid, MAX_PROCS};
use crate::error::DecodeError;
use crate::exception::MonitorState;
use crate::sched::{PriorityArray, RunQueueSet, TaskletQueue, Which};

const NONE: u8 = 0xFF;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThreadTag {
    Active,
    Expired,
    Blocked,
}

/// Thread state stored as the physical runqueue index it belongs to, so that
/// toggling the swap bit flips ACTIVE and EXPIRED without touching any thread.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ThreadState(u8);

impl ThreadState {
    pub const BLOCKED: ThreadState = ThreadState(2);

    pub fn runnable(which: Which, swap: u8) -> ThreadState {
        ThreadState(which.physical(swap) as u8)
    }

    pub fn tag(self, swap: u8) -> ThreadTag {
        match self.0 {
            2 => ThreadTag::Blocked,
            raw if raw == swap => ThreadTag::Active,
            _ => ThreadTag::Expired,
        }
    }

    pub fn is_blocked(self) -> bool {
        self == ThreadState::BLOCKED
    }

    pub fn raw(self) -> u8 {
        self.0
    }
}

/// -1 unlocked, 0 locked without waiters, k > 0 locked with k waiters.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MutexState {
    pub value: i8,
    pub owner: Option<Pid>,
    pub wait_slot: ArrayVec<Pid, MAX_PROCS>,
    pub capacity: u8,
}

impl MutexState {
    pub fn new(capacity: usize) -> MutexState {
        MutexState {
            value: -1,
            owner: None,
            wait_slot: ArrayVec::new(),
            capacity: capacity as u8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CondVarState {
    pub waiters: ArrayVec<Pid, MAX_PROCS>,
    pub capacity: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Service {
    MutexLock,
    MutexUnlock,
    CondWait,
    CondSignal,
    PthreadYield,
}

impl Service {
    pub const ALL: [Service; 5] = [
        Service::MutexLock,
        Service::MutexUnlock,
        Service::CondWait,
        Service::CondSignal,
        Service::PthreadYield,
    ];

    fn code(self) -> u8 {
        Service::ALL.iter().position(|&s| s == self).unwrap() as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Service::MutexLock => "mutex_lock",
            Service::MutexUnlock => "mutex_unlock",
            Service::CondWait => "cond_wait",
            Service::CondSignal => "cond_signal",
            Service::PthreadYield => "pthread_yield",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Call {
    pub caller: Pid,
    pub service: Service,
}

/// The SVC rendezvous channel; holds at most one in-flight call.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct RendezvousState {
    pub call: Option<Call>,
}

/// Capacities that fix the encoded width of a state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub procs: usize,
    pub user_level: usize,
    pub interrupts: usize,
    pub stack_cap: usize,
    pub rq_cap: usize,
    pub tasklet_cap: usize,
    pub wait_cap: usize,
    pub cond_cap: usize,
}

impl Shape {
    pub fn new(cfg: &Config, layout: &Layout) -> Shape {
        Shape {
            procs: layout.process_count(),
            user_level: layout.user_level_count(),
            interrupts: layout.interrupt_count(),
            stack_cap: layout.at_stack_capacity(),
            rq_cap: layout.user_level_count(),
            // Only systick raises a bottom half.
            tasklet_cap: 1,
            wait_cap: cfg.mutex_wait_capacity,
            cond_cap: layout.user_tasks,
        }
    }

    pub fn encoded_len(&self) -> usize {
        1 + (1 + self.stack_cap)
            + 1
            + 4
            + 1
            + 2 * (5 + 2 * self.rq_cap)
            + (5 + 2 * self.tasklet_cap)
            + self.user_level
            + self.procs
            + (3 + self.wait_cap)
            + (1 + self.cond_cap)
            + 1
            + 1
            + 1
            + 2
            + self.interrupts
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GlobalState {
    /// The only process allowed to execute a guarded statement.
    pub at: Pid,
    /// Preempted processes, bottom (a user-level thread) first.
    pub at_stack: ArrayVec<Pid, MAX_PROCS>,
    pub ghost_direct_at: Option<Pid>,
    pub pending: u16,
    pub active: u16,
    pub runqueues: RunQueueSet,
    pub tasklet: TaskletQueue,
    /// Indexed by pid for user-level processes.
    pub thread_state: ArrayVec<ThreadState, MAX_PROCS>,
    /// Location index within each process's program.
    pub pc: ArrayVec<u8, MAX_PROCS>,
    pub mutex: MutexState,
    pub condvar: CondVarState,
    pub monitor: MonitorState,
    pub buffer: u8,
    pub cs_c: bool,
    pub cs_p: bool,
    pub svc_channel: RendezvousState,
    /// Per interrupt ordinal: thread-mode statements since the last arrival
    /// or context switch, saturating at the configured tick interval.
    pub tick_credit: ArrayVec<u8, MAX_PROCS>,
}

impl GlobalState {
    /// Empty kernel state with every process at its entry location 0.
    pub fn empty(shape: &Shape) -> GlobalState {
        GlobalState {
            at: Pid(0),
            at_stack: ArrayVec::new(),
            ghost_direct_at: None,
            pending: 0,
            active: 0,
            runqueues: RunQueueSet::new(shape.rq_cap),
            tasklet: TaskletQueue::new(shape.tasklet_cap),
            thread_state: (0..shape.user_level)
                .map(|_| ThreadState::runnable(Which::Active, 0))
                .collect(),
            pc: (0..shape.procs).map(|_| 0).collect(),
            mutex: MutexState::new(shape.wait_cap),
            condvar: CondVarState {
                waiters: ArrayVec::new(),
                capacity: shape.cond_cap as u8,
            },
            monitor: MonitorState::default(),
            buffer: 0,
            cs_c: false,
            cs_p: false,
            svc_channel: RendezvousState::default(),
            tick_credit: (0..shape.interrupts).map(|_| 0).collect(),
        }
    }

    pub fn is_pending(&self, pid: Pid) -> bool {
        self.pending & pid.bit() != 0
    }

    pub fn is_active(&self, pid: Pid) -> bool {
        self.active & pid.bit() != 0
    }

    pub fn pc_of(&self, pid: Pid) -> u8 {
        self.pc[pid.index()]
    }

    pub fn thread(&self, pid: Pid) -> ThreadState {
        self.thread_state[pid.index()]
    }

    pub fn encode(&self, shape: &Shape, out: &mut Vec<u8>) {
        let start = out.len();
        out.push(self.at.0);
        push_pids(out, &self.at_stack, shape.stack_cap);
        out.push(self.ghost_direct_at.map_or(NONE, |p| p.0));
        out.extend_from_slice(&self.pending.to_le_bytes());
        out.extend_from_slice(&self.active.to_le_bytes());
        out.push(self.runqueues.swap_bit());
        for phys in 0..2 {
            push_array(out, self.runqueues.physical(phys), shape.rq_cap);
        }
        push_array(out, &self.tasklet.0, shape.tasklet_cap);
        out.extend(self.thread_state.iter().map(|t| t.raw()));
        out.extend_from_slice(&self.pc);
        out.push(self.mutex.value as u8);
        out.push(self.mutex.owner.map_or(NONE, |p| p.0));
        push_pids(out, &self.mutex.wait_slot, shape.wait_cap);
        push_pids(out, &self.condvar.waiters, shape.cond_cap);
        out.push(self.monitor.marked.unwrap_or(NONE));
        out.push(self.buffer);
        out.push(self.cs_c as u8 | (self.cs_p as u8) << 1);
        match self.svc_channel.call {
            Some(call) => {
                out.push(call.caller.0);
                out.push(call.service.code());
            }
            None => out.extend_from_slice(&[NONE, NONE]),
        }
        out.extend_from_slice(&self.tick_credit);
        debug_assert_eq!(out.len() - start, shape.encoded_len());
    }

    pub fn decode(shape: &Shape, bytes: &[u8]) -> Result<GlobalState, DecodeError> {
        if bytes.len() != shape.encoded_len() {
            return Err(DecodeError::Length {
                expected: shape.encoded_len(),
                found: bytes.len(),
            });
        }
        let mut r = Reader { bytes, pos: 0 };
        let at = Pid(r.byte());
        let at_stack = r.pids(shape.stack_cap, "at_stack")?;
        let ghost_direct_at = r.opt_pid();
        let pending = r.u16();
        let active = r.u16();
        let swap = r.byte();
        if swap > 1 {
            return Err(DecodeError::Field("swap"));
        }
        let a0 = r.array(shape.rq_cap)?;
        let a1 = r.array(shape.rq_cap)?;
        let tasklet = TaskletQueue(r.array(shape.tasklet_cap)?);
        let mut thread_state = ArrayVec::new();
        for _ in 0..shape.user_level {
            let raw = r.byte();
            if raw > 2 {
                return Err(DecodeError::Field("thread_state"));
            }
            thread_state.push(ThreadState(raw));
        }
        let pc = r.take(shape.procs).iter().copied().collect();
        let value = r.byte() as i8;
        let owner = r.opt_pid();
        let wait_slot = r.pids(shape.wait_cap, "wait_slot")?;
        let waiters = r.pids(shape.cond_cap, "condvar")?;
        let marked = match r.byte() {
            NONE => None,
            a => Some(a),
        };
        let buffer = r.byte();
        let cs = r.byte();
        if cs > 3 {
            return Err(DecodeError::Field("cs"));
        }
        let caller = r.byte();
        let code = r.byte();
        let call = match (caller, code) {
            (NONE, NONE) => None,
            (c, s) if (s as usize) < Service::ALL.len() && c != NONE => Some(Call {
                caller: Pid(c),
                service: Service::ALL[s as usize],
            }),
            _ => return Err(DecodeError::Field("svc_channel")),
        };
        let tick_credit = r.take(shape.interrupts).iter().copied().collect();
        Ok(GlobalState {
            at,
            at_stack,
            ghost_direct_at,
            pending,
            active,
            runqueues: RunQueueSet::from_parts([a0, a1], swap),
            tasklet,
            thread_state,
            pc,
            mutex: MutexState {
                value,
                owner,
                wait_slot,
                capacity: shape.wait_cap as u8,
            },
            condvar: CondVarState {
                waiters,
                capacity: shape.cond_cap as u8,
            },
            monitor: MonitorState { marked },
            buffer,
            cs_c: cs & 1 != 0,
            cs_p: cs & 2 != 0,
            svc_channel: RendezvousState { call },
            tick_credit,
        })
    }
}

fn push_pids(out: &mut Vec<u8>, pids: &[Pid], cap: usize) {
    out.push(pids.len() as u8);
    out.extend(pids.iter().map(|p| p.0));
    out.extend(std::iter::repeat_n(NONE, cap - pids.len()));
}

fn push_array(out: &mut Vec<u8>, array: &PriorityArray, cap: usize) {
    out.extend_from_slice(&array.bitmap().to_le_bytes());
    out.push(array.len() as u8);
    for &(level, pid) in array.entries() {
        out.push(level);
        out.push(pid.0);
    }
    out.extend(std::iter::repeat_n(NONE, 2 * (cap - array.len())));
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> &'a [u8] {
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        s
    }

    fn byte(&mut self) -> u8 {
        self.take(1)[0]
    }

    fn u16(&mut self) -> u16 {
        let b = self.take(2);
        u16::from_le_bytes([b[0], b[1]])
    }

    fn opt_pid(&mut self) -> Option<Pid> {
        match self.byte() {
            NONE => None,
            p => Some(Pid(p)),
        }
    }

    fn pids(
        &mut self,
        cap: usize,
        field: &'static str,
    ) -> Result<ArrayVec<Pid, MAX_PROCS>, DecodeError> {
        let len = self.byte() as usize;
        let slots = self.take(cap);
        if len > cap || slots[len..].iter().any(|&b| b != NONE) {
            return Err(DecodeError::Field(field));
        }
        Ok(slots[..len].iter().map(|&b| Pid(b)).collect())
    }

    fn array(&mut self, cap: usize) -> Result<PriorityArray, DecodeError> {
        let b = self.take(4);
        let bitmap = u32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        let len = self.byte() as usize;
        let slots = self.take(2 * cap);
        if len > cap || slots[2 * len..].iter().any(|&b| b != NONE) {
            return Err(DecodeError::Field("priority_array"));
        }
        let entries: Vec<(u8, Pid)> = slots[..2 * len]
            .chunks(2)
            .map(|c| (c[0], Pid(c[1])))
            .collect();
        Ok(PriorityArray::from_parts(bitmap, &entries, cap))
    }
}
