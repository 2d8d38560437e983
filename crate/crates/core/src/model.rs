//! The kernel model: all statement tables wired to the state vector.

use arrayvec::ArrayVec;

use crate::check::{Check, Violation};
use crate::config::{Config, Layout, Pid, Role};
use crate::error::{ConfigError, ModelError};
use crate::exception;
use crate::explorer::{ActionInfo, Propositions, Step, TransitionSystem};
use crate::program::{Action, Guard, Label, Program, SpSite, SpStep};
use crate::services::{self, SvcEntries};
use crate::state::{GlobalState, Shape};
use crate::workload::{self, AtomicProp, Side};

/// One enabled statement: who executes it and which statement it is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition {
    pub owner: Pid,
    pub stmt: u16,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StmtKind {
    /// Single guarded statement.
    Awaits,
    /// Indivisible multi-statement block.
    AAwaits,
    ITake,
    PendSvTake,
    /// A branch inside a scheduling-point expansion (coverage only).
    SpBranch,
}

#[derive(Clone, Debug)]
pub struct StmtInfo {
    pub id: u16,
    pub owner: Pid,
    pub process: String,
    pub location: &'static str,
    pub text: String,
    pub label: Option<Label>,
    pub kind: StmtKind,
    /// Scheduling-point expansion this statement belongs to, if any.
    pub site: Option<SpSite>,
    pub step: Option<SpStep>,
}

#[derive(Clone, Debug)]
pub struct KernelModel {
    cfg: Config,
    layout: Layout,
    shape: Shape,
    programs: Vec<Program>,
    /// Statement id per (pid, location, edge).
    edge_stmt: Vec<Vec<Vec<u16>>>,
    /// (pid, location, edge) per edge statement id.
    edge_of: Vec<(Pid, u8, u8)>,
    sp_stmt: [[u16; 7]; 7],
    stmts: Vec<StmtInfo>,
    svc: SvcEntries,
    want: [u8; 2],
}

fn process_name(layout: &Layout, pid: Pid) -> String {
    match layout.role(pid) {
        Role::UserTask if layout.is_consumer(pid) => format!("consumer{}", pid.0),
        Role::UserTask => format!("producer{}", pid.0),
        Role::Softirq => "softirq".into(),
        Role::Systick => "systick".into(),
        Role::Interrupt => format!("irq{}", layout.interrupt_ordinal(pid)),
        Role::PendSv => "pendsv".into(),
        Role::Svc => "svc".into(),
    }
}

fn kind_of(action: Action) -> StmtKind {
    match action {
        Action::ITake => StmtKind::ITake,
        Action::PendSvTake => StmtKind::PendSvTake,
        Action::SchedPoint(_)
        | Action::SvcReturn
        | Action::Iret
        | Action::Syscall(_)
        | Action::SystickBottomHalf
        | Action::UnlockRelease
        | Action::SignalWake
        | Action::LockBlock
        | Action::CondEnqueueCaller => StmtKind::AAwaits,
        _ => StmtKind::Awaits,
    }
}

impl KernelModel {
    pub fn new(cfg: Config) -> Result<KernelModel, ConfigError> {
        cfg.validate()?;
        let layout = Layout::new(&cfg);
        let shape = Shape::new(&cfg, &layout);
        let (svc_prog, svc) = services::svc_program();
        let programs: Vec<Program> = layout
            .pids()
            .map(|pid| match layout.role(pid) {
                Role::UserTask => {
                    workload::user_program(workload::side_of(&layout, pid), cfg.mutation)
                }
                Role::Softirq => services::softirq_program(),
                Role::Systick => services::systick_program(),
                Role::Interrupt => services::irq_program(),
                Role::PendSv => services::pendsv_program(),
                Role::Svc => svc_prog.clone(),
            })
            .collect();

        let mut stmts = Vec::new();
        let mut edge_stmt = Vec::new();
        let mut edge_of = Vec::new();
        let mut sp_stmt = [[0u16; 7]; 7];
        let mut sp_edges = Vec::new();
        for (pid, prog) in layout.pids().zip(&programs) {
            let mut per_loc = Vec::new();
            for (li, loc) in prog.locations.iter().enumerate() {
                let mut ids = Vec::new();
                for (ei, edge) in loc.edges.iter().enumerate() {
                    let id = stmts.len() as u16;
                    let site = match edge.action {
                        Action::SchedPoint(site) => {
                            sp_edges.push(site);
                            Some(site)
                        }
                        _ => None,
                    };
                    let guard = match edge.guard {
                        Guard::Always => String::new(),
                        g => format!("{g:?} -> ").to_lowercase(),
                    };
                    stmts.push(StmtInfo {
                        id,
                        owner: pid,
                        process: process_name(&layout, pid),
                        location: loc.name,
                        text: format!("{guard}{}", edge.action.describe()),
                        label: loc.label,
                        kind: kind_of(edge.action),
                        site,
                        step: None,
                    });
                    edge_of.push((pid, li as u8, ei as u8));
                    ids.push(id);
                }
                per_loc.push(ids);
            }
            edge_stmt.push(per_loc);
        }
        // One copy of the macro's branches per expansion.
        for site in SpSite::ALL {
            let owner = if site.in_svc() {
                layout.svc()
            } else {
                layout.pendsv()
            };
            for step in SpStep::ALL {
                let id = stmts.len() as u16;
                sp_stmt[site.index()][step as usize] = id;
                stmts.push(StmtInfo {
                    id,
                    owner,
                    process: process_name(&layout, owner),
                    location: site.name(),
                    text: step.name().into(),
                    label: None,
                    kind: StmtKind::SpBranch,
                    site: Some(site),
                    step: Some(step),
                });
            }
        }
        debug_assert_eq!(sp_edges.len(), SpSite::ALL.len());

        let want_of = |i: usize| {
            if i < layout.user_tasks {
                programs[i].labeled(Label::Want).expect("want label")
            } else {
                u8::MAX
            }
        };
        let want = [want_of(0), want_of(1)];
        Ok(KernelModel {
            cfg,
            layout,
            shape,
            programs,
            edge_stmt,
            edge_of,
            sp_stmt,
            stmts,
            svc,
            want,
        })
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn statements(&self) -> &[StmtInfo] {
        &self.stmts
    }

    pub fn program(&self, pid: Pid) -> &Program {
        &self.programs[pid.index()]
    }

    pub fn sp_statement(&self, site: SpSite, step: SpStep) -> u16 {
        self.sp_stmt[site.index()][step as usize]
    }

    /// Location of the `want` label in task `i`'s program (`i` is 0 or 1).
    pub fn want_location(&self, i: usize) -> u8 {
        self.want[i]
    }

    /// AT is task 0; the other user-level processes are queued ACTIVE in
    /// pid order; interrupt credits start full.
    pub fn initial_state(&self) -> GlobalState {
        let mut s = GlobalState::empty(&self.shape);
        s.at = self.layout.task(0);
        for pid in self
            .layout
            .pids()
            .filter(|&p| self.layout.is_user_level(p))
            .skip(1)
        {
            s.runqueues
                .enqueue(crate::sched::Which::Active, pid, self.layout.priority(pid))
                .expect("initial runqueue fits");
        }
        for c in s.tick_credit.iter_mut() {
            *c = self.cfg.tick_interval;
        }
        s
    }

    fn guard_holds(&self, s: &GlobalState, guard: Guard) -> bool {
        let caller_blocked = || {
            s.svc_channel
                .call
                .is_some_and(|c| s.thread(c.caller).is_blocked())
        };
        match guard {
            Guard::Always => true,
            Guard::BufferEmpty => s.buffer == 0,
            Guard::BufferNotEmpty => s.buffer > 0,
            Guard::BufferFull => s.buffer >= self.cfg.buffer_capacity,
            Guard::BufferNotFull => s.buffer < self.cfg.buffer_capacity,
            Guard::TaskletEmpty => s.tasklet.is_empty(),
            Guard::TaskletNonEmpty => !s.tasklet.is_empty(),
            Guard::MutexFree => s.mutex.value == -1,
            Guard::MutexHeld => s.mutex.value != -1,
            Guard::CallerBlocked => caller_blocked(),
            Guard::CallerNotBlocked => !caller_blocked(),
            Guard::CondHasWaiter => !s.condvar.waiters.is_empty(),
            Guard::CondNoWaiter => s.condvar.waiters.is_empty(),
        }
    }

    fn arrival_allowed(&self, s: &GlobalState, e: Pid) -> bool {
        let k = self.cfg.tick_interval;
        !s.is_active(e)
            && !s.is_pending(e)
            && s.pc_of(e) == 0
            && (k == 0 || s.at == Pid::IDLE || s.tick_credit[self.layout.interrupt_ordinal(e)] >= k)
    }

    /// Enabled transitions ordered by (owner, statement).
    pub fn enabled_transitions(&self, s: &GlobalState, out: &mut Vec<Transition>) {
        out.clear();
        let pendsv = self.layout.pendsv();
        let at = s.at;
        let user_at = self.layout.is_user_level(at);
        if at != Pid::IDLE && !(user_at && s.is_pending(pendsv)) {
            let pc = s.pc_of(at) as usize;
            let loc = &self.programs[at.index()].locations[pc];
            for (ei, edge) in loc.edges.iter().enumerate() {
                if self.guard_holds(s, edge.guard) {
                    out.push(Transition {
                        owner: at,
                        stmt: self.edge_stmt[at.index()][pc][ei],
                    });
                }
            }
        }
        for e in self.layout.interrupts() {
            if self.arrival_allowed(s, e) {
                out.push(Transition {
                    owner: e,
                    stmt: self.edge_stmt[e.index()][0][0],
                });
            }
        }
        if s.is_pending(pendsv) && user_at && s.active == 0 {
            out.push(Transition {
                owner: pendsv,
                stmt: self.edge_stmt[pendsv.index()][0][0],
            });
        }
        out.sort_unstable();
    }

    /// Checked application: errors when `t` is not enabled in `s`.
    pub fn apply_transition(
        &self,
        s: &GlobalState,
        t: Transition,
    ) -> Result<Step<GlobalState>, ModelError> {
        if t.stmt as usize >= self.edge_of.len() {
            return Err(ModelError::UnknownStatement(t.stmt));
        }
        let mut enabled = Vec::new();
        self.enabled_transitions(s, &mut enabled);
        if !enabled.contains(&t) {
            return Err(ModelError::Disabled {
                owner: t.owner.0,
                stmt: t.stmt,
            });
        }
        Ok(self.fire(s, t))
    }

    fn fire(&self, s: &GlobalState, t: Transition) -> Step<GlobalState> {
        let mut next = s.clone();
        let mut covered = ArrayVec::new();
        covered.push(t.stmt);
        let violation = self
            .effect(&mut next, t, &mut covered)
            .err()
            .or_else(|| self.check_state(&next));
        Step {
            state: next,
            violation,
            covered,
        }
    }

    fn effect(
        &self,
        s: &mut GlobalState,
        t: Transition,
        covered: &mut ArrayVec<u16, 8>,
    ) -> Result<(), Violation> {
        let (owner, li, ei) = self.edge_of[t.stmt as usize];
        debug_assert_eq!(owner, t.owner);
        let edge = &self.programs[owner.index()].locations[li as usize].edges[ei as usize];
        let layout = &self.layout;
        let user = layout.is_user_level(owner);
        if user {
            let k = self.cfg.tick_interval;
            for c in s.tick_credit.iter_mut() {
                *c = (*c + 1).min(k);
            }
        }
        let mut target = Some(edge.target);
        let body = |_: Pid| services::HANDLER_BODY;
        let chained = |p: Option<Pid>, covered: &mut ArrayVec<u16, 8>| {
            if let Some(p) = p {
                covered.push(self.edge_stmt[p.index()][0][0]);
            }
        };
        match edge.action {
            Action::Skip => {}
            Action::LockLdrex { free, held } => {
                target = Some(if services::lock_ldrex(s) { free } else { held });
            }
            Action::LockStrex { ok, retry } => {
                target = Some(if services::lock_strex(s, owner) {
                    ok
                } else {
                    retry
                });
            }
            Action::UnlockLdrex {
                uncontended,
                contended,
            } => {
                target = Some(if services::unlock_ldrex(s) {
                    uncontended
                } else {
                    contended
                });
            }
            Action::UnlockStrex { ok, retry } => {
                target = Some(if services::unlock_strex(s) { ok } else { retry });
            }
            Action::Syscall(service) => {
                s.pc[owner.index()] = edge.target;
                target = None;
                services::svc_call(s, layout, owner, service, self.svc.entry(service))?;
            }
            Action::SetCs(v) => match workload::side_of(layout, owner) {
                Side::Consumer => s.cs_c = v,
                Side::Producer => s.cs_p = v,
            },
            Action::BufferDelta(d) => {
                let b = s.buffer as i16 + d as i16;
                if b < 0 || b > self.cfg.buffer_capacity as i16 {
                    return Err(Violation::new(Check::BufferBounds, "buffer out of bounds"));
                }
                s.buffer = b as u8;
            }
            Action::SoftirqRun => services::softirq_run(s)?,
            Action::LockGrant => services::lock_grant(s),
            Action::LockBlock => services::lock_block(s)?,
            Action::UnlockRelease => services::unlock_release(s, layout)?,
            Action::RequeueCaller(which) => services::requeue_caller(s, layout, which)?,
            Action::CondEnqueueCaller => services::cond_enqueue_caller(s)?,
            Action::SignalWake => services::signal_wake(s, layout)?,
            Action::YieldRequeue => {
                services::requeue_caller(s, layout, crate::sched::Which::Expired)?
            }
            Action::SchedPoint(site) => {
                let mut steps = ArrayVec::new();
                let r = services::sched_point(s, layout, &mut steps);
                for step in steps {
                    covered.push(self.sp_statement(site, step));
                }
                r?;
            }
            Action::SvcReturn => {
                target = None;
                let p = services::svc_return(s, layout)?;
                chained(p, covered);
            }
            Action::Iret => {
                target = None;
                let p = exception::iret(s, layout, body)?;
                chained(p, covered);
            }
            Action::ITake => {
                target = None;
                s.tick_credit[layout.interrupt_ordinal(owner)] = 0;
                exception::itake(s, layout, owner, edge.target)?;
            }
            Action::PendSvTake => {
                target = None;
                exception::pendsv_take(s, layout, edge.target)?;
            }
            Action::SystickBottomHalf => services::systick_bottom_half(s, layout)?,
        }
        if let Some(target) = target {
            s.pc[owner.index()] = target;
        }
        Ok(())
    }

    /// State predicates checked after every transition.
    pub fn check_state(&self, s: &GlobalState) -> Option<Violation> {
        if s.pending & s.active != 0 {
            return Some(Violation::new(
                Check::PendingWriter,
                "exception both pending and active",
            ));
        }
        if s.at_stack.contains(&s.at) && s.at != Pid::IDLE {
            return Some(Violation::new(
                Check::AtStackBounds,
                "AT is also on ATStack",
            ));
        }
        if s.ghost_direct_at.is_some() {
            return Some(Violation::new(
                Check::TailChain,
                "tail-chain handoff left over",
            ));
        }
        workload::check_state(s, &self.layout, self.cfg.buffer_capacity)
            .map(|(check, detail)| Violation::new(check, detail))
    }

    pub fn eval_ap(&self, s: &GlobalState, p: AtomicProp) -> bool {
        workload::eval_ap(s, &self.layout, self.want, p)
    }

    /// Threads that are neither running nor blocked are queued exactly once.
    pub fn runnable_threads_queued(&self, s: &GlobalState) -> bool {
        let running = s.at_stack.first().copied().unwrap_or(s.at);
        self.layout
            .pids()
            .filter(|&p| self.layout.is_user_level(p) && p != running)
            .all(|p| s.thread(p).is_blocked() != s.runqueues.contains(p))
    }

    /// Short description of a statement for traces and reports.
    pub fn statement_text(&self, stmt: u16) -> String {
        let info = &self.stmts[stmt as usize];
        format!("{}:{} {}", info.process, info.location, info.text)
    }
}

impl TransitionSystem for KernelModel {
    type State = GlobalState;
    type Action = Transition;

    fn initial_state(&self) -> GlobalState {
        KernelModel::initial_state(self)
    }

    fn actions(&self, s: &GlobalState, out: &mut Vec<Transition>) {
        self.enabled_transitions(s, out)
    }

    fn step(&self, s: &GlobalState, t: Transition) -> Step<GlobalState> {
        self.fire(s, t)
    }

    fn encode(&self, s: &GlobalState, out: &mut Vec<u8>) {
        s.encode(&self.shape, out)
    }

    fn describe(&self, t: Transition) -> ActionInfo {
        let info = &self.stmts[t.stmt as usize];
        ActionInfo {
            owner: t.owner.0,
            stmt: t.stmt,
            label: info.label.map_or(info.location, Label::name),
            text: self.statement_text(t.stmt),
        }
    }

    fn statement_count(&self) -> usize {
        self.stmts.len()
    }
}

impl Propositions for KernelModel {
    fn prop_index(&self, name: &str) -> Option<usize> {
        AtomicProp::ALL.iter().position(|p| p.name() == name)
    }

    fn eval_prop(&self, s: &GlobalState, index: usize) -> bool {
        self.eval_ap(s, AtomicProp::ALL[index])
    }
}

/// Running thread's view, for tests: the thread at the ATStack bottom, or AT.
pub fn current_thread(s: &GlobalState) -> Pid {
    s.at_stack.first().copied().unwrap_or(s.at)
}
