//! Access tracking around agent state and the message bus.
//!
//! Agents live in an [`AgentTable`]; every borrow names who is asking and
//! which part of which agent it touches. Agent `i` may touch only agent `i`.
//! The geometry phase may read positions; the observer may read anything but
//! write nothing. Cross-agent data otherwise moves only through the [`Bus`],
//! which accepts hyperparameter messages along current Delaunay edges, and
//! inducing sets along those edges on refresh rounds.

use std::collections::BTreeSet;

use crate::gp::{Hyperparams, Sample};

use super::agent::AgentState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Accessor {
    Agent(usize),
    Geometry,
    Observer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Position,
    Gp,
    Buffer,
    Optimizer,
    Hyper,
    Rng,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Hyper,
    Inducing,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Hyper(Hyperparams),
    Inducing(Vec<Sample>),
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::Hyper(_) => MessageKind::Hyper,
            Payload::Inducing(_) => MessageKind::Inducing,
        }
    }
}

/// One delivered message, without its payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageRecord {
    pub round: usize,
    pub from: usize,
    pub to: usize,
    pub kind: MessageKind,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Access { round: usize, accessor: Accessor, target: usize, field: Field, mode: Mode },
    Message { round: usize, from: usize, to: usize, kind: MessageKind, reason: &'static str },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditLog {
    pub messages: Vec<MessageRecord>,
    pub violations: Vec<Violation>,
    pub accesses: usize,
}

impl AuditLog {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: MessageKind) -> usize {
        self.messages.iter().filter(|m| m.kind == kind).count()
    }
}

fn permitted(accessor: Accessor, target: usize, field: Field, mode: Mode) -> bool {
    match accessor {
        Accessor::Agent(i) => i == target,
        Accessor::Geometry => field == Field::Position && mode == Mode::Read,
        Accessor::Observer => mode == Mode::Read,
    }
}

/// Agent states behind an access check.
#[derive(Debug, Clone)]
pub struct AgentTable {
    agents: Vec<AgentState>,
    round: usize,
    log: AuditLog,
}

impl AgentTable {
    pub fn new(agents: Vec<AgentState>) -> Self {
        Self { agents, round: 0, log: AuditLog::default() }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn set_round(&mut self, round: usize) {
        self.round = round;
    }

    fn record(&mut self, accessor: Accessor, target: usize, field: Field, mode: Mode) {
        self.log.accesses += 1;
        if !permitted(accessor, target, field, mode) {
            self.log.violations.push(Violation::Access { round: self.round, accessor, target, field, mode });
        }
    }

    pub fn read(&mut self, accessor: Accessor, target: usize, field: Field) -> &AgentState {
        self.record(accessor, target, field, Mode::Read);
        &self.agents[target]
    }

    pub fn write(&mut self, accessor: Accessor, target: usize, field: Field) -> &mut AgentState {
        self.record(accessor, target, field, Mode::Write);
        &mut self.agents[target]
    }

    pub fn log(&self) -> &AuditLog {
        &self.log
    }

    pub fn into_parts(self) -> (Vec<AgentState>, AuditLog) {
        (self.agents, self.log)
    }

    pub(crate) fn log_mut(&mut self) -> &mut AuditLog {
        &mut self.log
    }
}

/// Point-to-point messages for one round over the current neighbor graph.
#[derive(Debug)]
pub struct Bus<'g> {
    round: usize,
    refresh: bool,
    graph: &'g [BTreeSet<usize>],
    inboxes: Vec<Vec<(usize, Payload)>>,
    sent: usize,
}

impl<'g> Bus<'g> {
    pub fn new(round: usize, refresh: bool, graph: &'g [BTreeSet<usize>]) -> Self {
        Self { round, refresh, graph, inboxes: vec![Vec::new(); graph.len()], sent: 0 }
    }

    /// Queues a copy of `payload` for `to`, or records why it was refused.
    pub fn send(&mut self, log: &mut AuditLog, from: usize, to: usize, payload: Payload) {
        let kind = payload.kind();
        let reason = if from >= self.graph.len() || !self.graph[from].contains(&to) {
            Some("not a Delaunay neighbor")
        } else if kind == MessageKind::Inducing && !self.refresh {
            Some("inducing exchange outside a refresh round")
        } else {
            None
        };
        if let Some(reason) = reason {
            log.violations.push(Violation::Message { round: self.round, from, to, kind, reason });
            return;
        }
        let len = match &payload {
            Payload::Hyper(_) => 4,
            Payload::Inducing(z) => z.len(),
        };
        log.messages.push(MessageRecord { round: self.round, from, to, kind, len });
        self.inboxes[to].push((from, payload));
        self.sent += 1;
    }

    /// Messages for `agent`, ordered by sender.
    pub fn take_inbox(&mut self, agent: usize) -> Vec<(usize, Payload)> {
        let mut inbox = std::mem::take(&mut self.inboxes[agent]);
        inbox.sort_by_key(|(from, _)| *from);
        inbox
    }

    pub fn sent(&self) -> usize {
        self.sent
    }
}
