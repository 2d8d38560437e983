//! Model configuration and the fixed process layout derived from it.
//!
//! Configuration files are flat `key = value` text. Blank lines and lines
//! starting with `#` are ignored. See [`Config::parse`] for the key set.

use std::fmt;
use std::str::FromStr;

use crate::error::ConfigError;

/// Exception priority shared by SVCall and PendSV. Numerically lower levels
/// preempt higher ones, so this is the weakest exception level.
pub const LOWEST_EXCEPTION_PRIORITY: u8 = 15;

/// Number of thread priority levels in each bitmap priority array.
pub const THREAD_LEVELS: u8 = 32;

/// Upper bound on processes in one model (the state vector uses 16-bit sets).
pub const MAX_PROCS: usize = 16;

const MAX_USER_TASKS: usize = 8;
const MAX_EXTRA_IRQS: usize = 4;

/// Process identifier. Index assignment is fixed by [`Layout`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pid(pub u8);

impl Pid {
    /// Pseudo-thread elected when both runqueues are empty.
    pub const IDLE: Pid = Pid(0xFE);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn bit(self) -> u16 {
        1 << self.0
    }
}

impl fmt::Display for Pid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Pid::IDLE {
            f.write_str("idle")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    UserTask,
    Softirq,
    Interrupt,
    Systick,
    PendSv,
    Svc,
}

impl Role {
    /// Thread-mode processes that live in the runqueues.
    pub fn is_user_level(self) -> bool {
        matches!(self, Role::UserTask | Role::Softirq)
    }

    /// Asynchronous hardware interrupts (entered through ITake).
    pub fn is_interrupt(self) -> bool {
        matches!(self, Role::Interrupt | Role::Systick)
    }

    pub fn is_exception(self) -> bool {
        !self.is_user_level()
    }
}

/// Negative-test instruments that deliberately break the workload.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Mutation {
    #[default]
    None,
    /// Remove every mutex operation; the condition wait degenerates to a yield.
    DropLock,
    /// Remove every condition signal.
    DropSignal,
}

impl Mutation {
    pub fn name(self) -> &'static str {
        match self {
            Mutation::None => "none",
            Mutation::DropLock => "drop-lock",
            Mutation::DropSignal => "drop-signal",
        }
    }
}

impl FromStr for Mutation {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Mutation::None),
            "drop-lock" => Ok(Mutation::DropLock),
            "drop-signal" => Ok(Mutation::DropSignal),
            other => Err(ConfigError::UnknownMutation(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Config {
    /// User tasks alternate consumer (even index) and producer (odd index).
    pub user_tasks: usize,
    /// Interrupts in addition to systick.
    pub extra_irqs: usize,
    /// Thread priority per user task, `0..32`, lower is more urgent.
    pub thread_priority: Vec<u8>,
    pub softirq_priority: u8,
    /// Exception priority of systick, must beat PendSV/SVC.
    pub systick_priority: u8,
    /// Exception priority per extra interrupt.
    pub irq_priority: Vec<u8>,
    pub buffer_capacity: u8,
    pub mutex_wait_capacity: usize,
    /// Minimum number of thread-mode statements the running thread executes
    /// between two arrivals of the same interrupt (and after each context
    /// switch). Zero lets interrupts arrive at any interleaving point.
    pub tick_interval: u8,
    pub max_depth: usize,
    pub mutation: Mutation,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            user_tasks: 2,
            extra_irqs: 0,
            thread_priority: vec![16, 16],
            softirq_priority: 16,
            systick_priority: 1,
            irq_priority: Vec::new(),
            buffer_capacity: 1,
            mutex_wait_capacity: 1,
            tick_interval: 3,
            max_depth: 10_000_000,
            mutation: Mutation::None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn parse_list(key: &str, value: &str) -> Result<Vec<u8>, ConfigError> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_num(key, v)).collect()
}

fn join(values: &[u8]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl Config {
    /// Parses `key = value` text. Missing keys keep their defaults; a single
    /// `thread_priority` value is broadcast to every user task, likewise for
    /// `irq_priority` (which otherwise defaults to `2, 3, ...`).
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        let mut thread_priority = None;
        let mut irq_priority = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: lineno + 1,
                    text: raw.to_string(),
                });
            };
            let key = key.trim();
            let value = value.trim();
            match key {
                "user_tasks" => cfg.user_tasks = parse_num(key, value)?,
                "extra_irqs" => cfg.extra_irqs = parse_num(key, value)?,
                "thread_priority" => thread_priority = Some(parse_list(key, value)?),
                "softirq_priority" => cfg.softirq_priority = parse_num(key, value)?,
                "systick_priority" => cfg.systick_priority = parse_num(key, value)?,
                "irq_priority" => irq_priority = Some(parse_list(key, value)?),
                "buffer_capacity" => cfg.buffer_capacity = parse_num(key, value)?,
                "mutex_wait_capacity" => cfg.mutex_wait_capacity = parse_num(key, value)?,
                "tick_interval" => cfg.tick_interval = parse_num(key, value)?,
                "max_depth" => cfg.max_depth = parse_num(key, value)?,
                "mutate" => cfg.mutation = value.parse()?,
                _ => return Err(ConfigError::UnknownKey(key.to_string())),
            }
        }
        cfg.thread_priority = match thread_priority {
            Some(v) if v.len() == 1 => vec![v[0]; cfg.user_tasks],
            Some(v) => v,
            None => vec![16; cfg.user_tasks],
        };
        cfg.irq_priority = match irq_priority {
            Some(v) if v.len() == 1 => vec![v[0]; cfg.extra_irqs],
            Some(v) => v,
            None => (0..cfg.extra_irqs).map(|i| 2 + i as u8).collect(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        if self.user_tasks == 0 || self.user_tasks > MAX_USER_TASKS {
            return invalid(format!("user_tasks must be in 1..={MAX_USER_TASKS}"));
        }
        if self.extra_irqs > MAX_EXTRA_IRQS {
            return invalid(format!("extra_irqs must be at most {MAX_EXTRA_IRQS}"));
        }
        if self.thread_priority.len() != self.user_tasks {
            return invalid("thread_priority needs one level per user task".into());
        }
        if self.irq_priority.len() != self.extra_irqs {
            return invalid("irq_priority needs one level per extra interrupt".into());
        }
        let levels = self.thread_priority.iter().chain([&self.softirq_priority]);
        if levels.into_iter().any(|&l| l >= THREAD_LEVELS) {
            return invalid(format!("thread priorities must be below {THREAD_LEVELS}"));
        }
        if self.systick_priority >= LOWEST_EXCEPTION_PRIORITY {
            return invalid(format!(
                "systick priority {} must be strictly higher (numerically lower) than \
                 the PendSV/SVC level {LOWEST_EXCEPTION_PRIORITY}",
                self.systick_priority
            ));
        }
        if let Some(p) = self
            .irq_priority
            .iter()
            .find(|&&p| p >= LOWEST_EXCEPTION_PRIORITY)
        {
            return invalid(format!(
                "interrupt priority {p} must be strictly higher than the PendSV/SVC level"
            ));
        }
        if self.buffer_capacity == 0 {
            return invalid("buffer_capacity must be at least 1".into());
        }
        if self.mutex_wait_capacity == 0 || self.mutex_wait_capacity > MAX_USER_TASKS {
            return invalid(format!(
                "mutex_wait_capacity must be in 1..={MAX_USER_TASKS}"
            ));
        }
        if self.max_depth == 0 {
            return invalid("max_depth must be positive".into());
        }
        Ok(())
    }

    /// Canonical `key=value` rendering, parseable by [`Config::parse`].
    pub fn to_kv(&self) -> String {
        format!(
            "user_tasks={}\nextra_irqs={}\nthread_priority={}\nsoftirq_priority={}\n\
             systick_priority={}\nirq_priority={}\nbuffer_capacity={}\n\
             mutex_wait_capacity={}\ntick_interval={}\nmax_depth={}\nmutate={}\n",
            self.user_tasks,
            self.extra_irqs,
            join(&self.thread_priority),
            self.softirq_priority,
            self.systick_priority,
            join(&self.irq_priority),
            self.buffer_capacity,
            self.mutex_wait_capacity,
            self.tick_interval,
            self.max_depth,
            self.mutation.name(),
        )
    }
}

/// PID assignment: user tasks, softirq, systick, extra interrupts, PendSV, SVC.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub user_tasks: usize,
    pub extra_irqs: usize,
    roles: Vec<Role>,
    /// Thread level for user-level pids, exception level otherwise.
    priority: Vec<u8>,
}

impl Layout {
    pub fn new(cfg: &Config) -> Layout {
        let mut roles = Vec::new();
        let mut priority = Vec::new();
        for i in 0..cfg.user_tasks {
            roles.push(Role::UserTask);
            priority.push(cfg.thread_priority[i]);
        }
        roles.push(Role::Softirq);
        priority.push(cfg.softirq_priority);
        roles.push(Role::Systick);
        priority.push(cfg.systick_priority);
        for i in 0..cfg.extra_irqs {
            roles.push(Role::Interrupt);
            priority.push(cfg.irq_priority[i]);
        }
        roles.push(Role::PendSv);
        priority.push(LOWEST_EXCEPTION_PRIORITY);
        roles.push(Role::Svc);
        priority.push(LOWEST_EXCEPTION_PRIORITY);
        Layout {
            user_tasks: cfg.user_tasks,
            extra_irqs: cfg.extra_irqs,
            roles,
            priority,
        }
    }

    pub fn process_count(&self) -> usize {
        self.roles.len()
    }

    /// User tasks plus softirq.
    pub fn user_level_count(&self) -> usize {
        self.user_tasks + 1
    }

    /// Systick plus the extra interrupts.
    pub fn interrupt_count(&self) -> usize {
        self.extra_irqs + 1
    }

    pub fn role(&self, pid: Pid) -> Role {
        self.roles[pid.index()]
    }

    pub fn is_user_level(&self, pid: Pid) -> bool {
        pid == Pid::IDLE || (pid.index() < self.roles.len() && self.role(pid).is_user_level())
    }

    pub fn is_interrupt(&self, pid: Pid) -> bool {
        pid.index() < self.roles.len() && self.role(pid).is_interrupt()
    }

    /// Thread level for user-level pids, exception level otherwise.
    pub fn priority(&self, pid: Pid) -> u8 {
        self.priority[pid.index()]
    }

    pub fn task(&self, i: usize) -> Pid {
        assert!(i < self.user_tasks);
        Pid(i as u8)
    }

    pub fn softirq(&self) -> Pid {
        Pid(self.user_tasks as u8)
    }

    pub fn systick(&self) -> Pid {
        Pid(self.user_tasks as u8 + 1)
    }

    pub fn irq(&self, i: usize) -> Pid {
        assert!(i < self.extra_irqs);
        Pid((self.user_tasks + 2 + i) as u8)
    }

    pub fn pendsv(&self) -> Pid {
        Pid((self.user_tasks + 2 + self.extra_irqs) as u8)
    }

    pub fn svc(&self) -> Pid {
        Pid((self.user_tasks + 3 + self.extra_irqs) as u8)
    }

    /// Interrupt-role pids in ascending order (systick first).
    pub fn interrupts(&self) -> impl Iterator<Item = Pid> + '_ {
        (0..self.interrupt_count()).map(|i| self.interrupt_at(i))
    }

    pub fn interrupt_at(&self, ordinal: usize) -> Pid {
        Pid((self.user_tasks + 1 + ordinal) as u8)
    }

    /// Position of an interrupt within [`Layout::interrupts`].
    pub fn interrupt_ordinal(&self, pid: Pid) -> usize {
        debug_assert!(self.is_interrupt(pid));
        pid.index() - self.user_tasks - 1
    }

    pub fn pids(&self) -> impl Iterator<Item = Pid> {
        (0..self.roles.len() as u8).map(Pid)
    }

    /// Deepest possible ATStack: one thread plus every exception nested once
    /// (SVC and PendSV cannot both be stacked).
    pub fn at_stack_capacity(&self) -> usize {
        1 + self.interrupt_count() + 1
    }

    /// Consumer tasks have even indices, producers odd ones.
    pub fn is_consumer(&self, pid: Pid) -> bool {
        self.role(pid) == Role::UserTask && pid.0.is_multiple_of(2)
    }

    pub fn is_producer(&self, pid: Pid) -> bool {
        self.role(pid) == Role::UserTask && pid.0 % 2 == 1
    }
}
