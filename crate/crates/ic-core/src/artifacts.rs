//! Finite-state-machine artifacts: protocol ⇄ FSM conversion, DOT and
//! canonical JSON emission, gen_statem-style stub generation, and
//! extraction back from the tool's own FSM/stub formats.
//!
//! Encoding. Each prefix and each branching becomes a state; `end` maps
//! to the terminal marker `$STOP`. A transition carries as annotations
//! the assert/require/consume chain found at the head of its
//! continuation. Chains with no carrying transition get a synthetic one:
//! a chain directly before `end` becomes a `stop` transition to `$STOP`,
//! and every recursion gets a header state whose `enter` transition
//! carries the chain at the head of the loop body (back-edges target the
//! header, so the chain is re-run on every iteration, exactly like the
//! protocol). The labels `stop` and `enter` on plain transitions are
//! reserved for these synthetics.
//!
//! No state merging is performed, so extraction is a true inverse up to
//! bound-variable names.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::assertions::env_to_string;
use crate::proto::{Action, ChoiceOp, Polarity, Protocol};
use crate::semantics::{Config, LtsGraph};
use crate::syntax::print;

/// Terminal marker used as a transition target.
pub const STOP: &str = "$STOP";

/// Reserved synthetic labels (plain kind).
pub const STOP_LABEL: &str = "stop";
pub const ENTER_LABEL: &str = "enter";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransKind {
    Send,
    Receive,
    Select,
    Offer,
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnKind {
    Assert,
    Require,
    Consume,
}

impl AnnKind {
    fn word(self) -> &'static str {
        match self {
            AnnKind::Assert => "assert",
            AnnKind::Require => "require",
            AnnKind::Consume => "consume",
        }
    }
}

/// One assertion annotation attached to a transition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub kind: AnnKind,
    pub name: String,
}

/// A transition between states (or to [`STOP`]). Field order is the
/// canonical JSON key order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub annotations: Vec<Annotation>,
    pub from: String,
    pub kind: TransKind,
    pub label: String,
    pub to: String,
}

/// A directed-graph state machine with assertion annotations. States are
/// `s0, s1, ...` in depth-first preorder; transitions are grouped by
/// source state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fsm {
    pub initial: String,
    pub name: String,
    pub states: Vec<String>,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ArtifactError {
    #[error("invalid machine name {0:?}")]
    InvalidName(String),
    #[error("protocol is not convertible: {0}")]
    InvalidInput(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unguarded cycle: {0}")]
    UnguardedCycle(String),
    #[error("extracted machine is not a valid protocol: {0}")]
    InvalidExtracted(String),
    #[error("stub parse error at line {line}: {message}")]
    StubParse { line: usize, message: String },
}

fn ident_ok(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Fsm {
    /// Transitions leaving `state`, in stored order.
    pub fn outgoing(&self, state: &str) -> Vec<&Transition> {
        self.transitions.iter().filter(|t| t.from == state).collect()
    }
}

struct FsmBuilder {
    states: Vec<String>,
    per_state: Vec<Vec<Transition>>,
    rec_states: HashMap<String, usize>,
}

impl FsmBuilder {
    fn alloc(&mut self) -> usize {
        let id = self.states.len();
        self.states.push(format!("s{id}"));
        self.per_state.push(Vec::new());
        id
    }

    fn push(&mut self, from: usize, kind: TransKind, label: &str, anns: Vec<Annotation>, to: Target) {
        let to = match to {
            Target::State(i) => self.states[i].clone(),
            Target::Stop => STOP.to_string(),
        };
        let from = self.states[from].clone();
        let idx = self.states.iter().position(|s| *s == from).unwrap();
        self.per_state[idx].push(Transition {
            annotations: anns,
            from,
            kind,
            label: label.to_string(),
            to,
        });
    }

    /// Strip the leading assertion chain off a term.
    fn peel(mut s: &Protocol) -> (Vec<Annotation>, &Protocol) {
        let mut chain = Vec::new();
        loop {
            match s {
                Protocol::Assert(n, c) => {
                    chain.push(Annotation { kind: AnnKind::Assert, name: n.clone() });
                    s = c;
                }
                Protocol::Require(n, c) => {
                    chain.push(Annotation { kind: AnnKind::Require, name: n.clone() });
                    s = c;
                }
                Protocol::Consume(n, c) => {
                    chain.push(Annotation { kind: AnnKind::Consume, name: n.clone() });
                    s = c;
                }
                other => return (chain, other),
            }
        }
    }

    /// Resolve a continuation: its carrying chain plus its target.
    fn resolve(&mut self, cont: &Protocol) -> (Vec<Annotation>, Target) {
        let (chain, core) = Self::peel(cont);
        match core {
            Protocol::End => {
                if chain.is_empty() {
                    (Vec::new(), Target::Stop)
                } else {
                    // a chain directly before end gets a synthetic
                    // terminal transition so no annotation is lost
                    let t = self.alloc();
                    self.push(t, TransKind::Plain, STOP_LABEL, chain, Target::Stop);
                    (Vec::new(), Target::State(t))
                }
            }
            Protocol::Var(v) => {
                let target = *self.rec_states.get(v).expect("closed protocol: binder in scope");
                (chain, Target::State(target))
            }
            Protocol::Rec(..) => {
                let h = self.build_rec(core);
                (chain, Target::State(h))
            }
            _ => {
                let s = self.build_state(core);
                (chain, Target::State(s))
            }
        }
    }

    /// A recursion becomes a header state whose `enter` transition carries
    /// the chain at the head of the body; back-edges target the header.
    fn build_rec(&mut self, rec: &Protocol) -> usize {
        let Protocol::Rec(var, body) = rec else { unreachable!() };
        let h = self.alloc();
        self.rec_states.insert(var.clone(), h);
        let (chain, core) = Self::peel(body);
        let target = match core {
            Protocol::Rec(..) => Target::State(self.build_rec(core)),
            Protocol::End | Protocol::Var(_) => {
                // a validated recursion body cannot reduce to these
                unreachable!("validated recursion body has a guarded decision point")
            }
            _ => Target::State(self.build_state(core)),
        };
        self.push(h, TransKind::Plain, ENTER_LABEL, chain, target);
        self.rec_states.remove(var);
        h
    }

    fn build_state(&mut self, core: &Protocol) -> usize {
        match core {
            Protocol::Prefix(act, cont) => {
                let s = self.alloc();
                let kind = match act.polarity {
                    Polarity::Send => TransKind::Send,
                    Polarity::Receive => TransKind::Receive,
                    Polarity::Neutral => TransKind::Plain,
                };
                let (anns, target) = self.resolve(cont);
                self.push(s, kind, &act.payload, anns, target);
                s
            }
            Protocol::Choice(op, brs) => {
                let s = self.alloc();
                let kind = match op {
                    ChoiceOp::Select => TransKind::Select,
                    ChoiceOp::Offer => TransKind::Offer,
                    ChoiceOp::Plain => TransKind::Plain,
                };
                for (label, b) in brs {
                    let (anns, target) = self.resolve(b);
                    self.push(s, kind, label, anns, target);
                }
                s
            }
            other => unreachable!("not a decision point: {other:?}"),
        }
    }
}

enum Target {
    State(usize),
    Stop,
}

/// Convert a closed validated protocol into a state machine.
pub fn to_fsm(name: &str, s: &Protocol) -> Result<Fsm, ArtifactError> {
    if !ident_ok(name) {
        return Err(ArtifactError::InvalidName(name.to_string()));
    }
    let violations = s.validate();
    if !violations.is_empty() {
        return Err(ArtifactError::InvalidInput(
            violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "),
        ));
    }
    if !s.is_closed() {
        return Err(ArtifactError::InvalidInput("protocol has free recursion variables".into()));
    }

    let mut b = FsmBuilder { states: Vec::new(), per_state: Vec::new(), rec_states: HashMap::new() };
    let (chain, core) = FsmBuilder::peel(s);
    match core {
        Protocol::End => {
            let s0 = b.alloc();
            if !chain.is_empty() {
                b.push(s0, TransKind::Plain, STOP_LABEL, chain, Target::Stop);
            }
        }
        Protocol::Rec(..) => {
            if chain.is_empty() {
                b.build_rec(core);
            } else {
                let entry = b.alloc();
                let h = b.build_rec(core);
                b.push(entry, TransKind::Plain, ENTER_LABEL, chain, Target::State(h));
            }
        }
        _ => {
            if chain.is_empty() {
                b.build_state(core);
            } else {
                let entry = b.alloc();
                let t = b.build_state(core);
                b.push(entry, TransKind::Plain, ENTER_LABEL, chain, Target::State(t));
            }
        }
    }

    let initial = b.states[0].clone();
    let transitions = b.per_state.into_iter().flatten().collect();
    Ok(Fsm { initial, name: name.to_string(), states: b.states, transitions })
}

/// Render a machine as a Graphviz digraph. Edge labels are `kind:label`,
/// with annotations as bracketed prefixes.
pub fn emit_dot(f: &Fsm) -> Result<String, ArtifactError> {
    if !ident_ok(&f.name) {
        return Err(ArtifactError::InvalidName(f.name.clone()));
    }
    let mut out = String::new();
    out.push_str(&format!("digraph {} {{\n", f.name));
    out.push_str("  rankdir=LR;\n");
    out.push_str(&format!("  {} [shape=circle, style=bold];\n", f.initial));
    for s in &f.states {
        if *s != f.initial {
            out.push_str(&format!("  {s} [shape=circle];\n"));
        }
    }
    if f.transitions.iter().any(|t| t.to == STOP) {
        out.push_str("  STOP [shape=doublecircle, label=\"STOP\"];\n");
    }
    for t in &f.transitions {
        let mut label = String::new();
        for a in &t.annotations {
            label.push_str(&format!("[{} {}] ", a.kind.word(), a.name));
        }
        let kind = match t.kind {
            TransKind::Send => "send",
            TransKind::Receive => "receive",
            TransKind::Select => "select",
            TransKind::Offer => "offer",
            TransKind::Plain => "plain",
        };
        label.push_str(&format!("{kind}:{}", t.label));
        let to = if t.to == STOP { "STOP" } else { &t.to };
        out.push_str(&format!("  {} -> {} [label=\"{}\"];\n", t.from, to, label));
    }
    out.push_str("}\n");
    Ok(out)
}

/// Render an explored LTS fragment as a Graphviz digraph.
pub fn lts_dot(graph: &LtsGraph<Config>) -> String {
    let mut out = String::new();
    out.push_str("digraph lts {\n  rankdir=LR;\n");
    for (i, node) in graph.nodes.iter().enumerate() {
        let text = format!("{} ⊢ {}", env_to_string(&node.env), print(&node.proto));
        out.push_str(&format!("  n{i} [shape=box, label=\"{}\"];\n", text.replace('"', "\\\"")));
    }
    for (from, l, to) in &graph.edges {
        out.push_str(&format!("  n{from} -> n{to} [label=\"{l}\"];\n"));
    }
    out.push_str("}\n");
    out
}

/// Canonical JSON bytes: sorted keys, compact, newline-terminated;
/// byte-stable across runs.
pub fn emit_fsm_json(f: &Fsm) -> Vec<u8> {
    let mut bytes = serde_json::to_vec(f).expect("fsm serialization cannot fail");
    bytes.push(b'\n');
    bytes
}

fn event_token(t: &Transition) -> String {
    match t.kind {
        TransKind::Send => format!("s_{}", t.label),
        TransKind::Receive => format!("r_{}", t.label),
        TransKind::Select => format!("sel_{}", t.label),
        TransKind::Offer => format!("bra_{}", t.label),
        TransKind::Plain => {
            if t.label == STOP_LABEL || t.label == ENTER_LABEL {
                t.label.clone()
            } else {
                format!("n_{}", t.label)
            }
        }
    }
}

/// Generate a gen_statem-style skeleton: one handler clause per
/// transition, assertion annotations as `%assert n` / `%require n` /
/// `%consume n` comment lines immediately above the clause they precede,
/// terminal transitions as stop clauses.
pub fn emit_stub(f: &Fsm) -> String {
    let mut out = String::new();
    out.push_str(&format!("-module({}).\n", f.name));
    out.push_str("-behaviour(gen_statem).\n\n");
    out.push_str(&format!("init([]) -> {{ok, {}, #data{{}}}}.\n\n", f.initial));
    for state in &f.states {
        let ts = f.outgoing(state);
        if ts.is_empty() {
            continue;
        }
        let multi = ts.len() > 1;
        for (i, t) in ts.iter().enumerate() {
            for a in &t.annotations {
                out.push_str(&format!("%{} {}\n", a.kind.word(), a.name));
            }
            let event = if t.kind == TransKind::Plain
                && multi
                && t.label != STOP_LABEL
                && t.label != ENTER_LABEL
            {
                format!("br_{}", t.label)
            } else {
                event_token(t)
            };
            let action = if t.to == STOP {
                "{stop, normal, Data}".to_string()
            } else {
                format!("{{next_state, {}, Data}}", t.to)
            };
            let sep = if i + 1 == ts.len() { '.' } else { ';' };
            out.push_str(&format!("{state}(cast, {event}, Data) -> {action}{sep}\n"));
        }
        out.push('\n');
    }
    out.push_str("terminate(_Reason, _State, _Data) -> ok.\n");
    out
}

/// Parse a stub emitted by [`emit_stub`] back into a machine.
pub fn parse_stub(text: &str) -> Result<Fsm, ArtifactError> {
    let mut name: Option<String> = None;
    let mut initial: Option<String> = None;
    let mut pending: Vec<Annotation> = Vec::new();
    let mut transitions: Vec<Transition> = Vec::new();
    let mut states: Vec<String> = Vec::new();
    let note_state = |s: &str, states: &mut Vec<String>| {
        if !states.iter().any(|x| x == s) {
            states.push(s.to_string());
        }
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let err = |message: String| ArtifactError::StubParse { line: lineno + 1, message };
        if line.is_empty() || line.starts_with("-behaviour") || line.starts_with("terminate") {
            continue;
        }
        if let Some(rest) = line.strip_prefix("-module(") {
            let n = rest.strip_suffix(").").ok_or_else(|| err("malformed -module".into()))?;
            name = Some(n.to_string());
            continue;
        }
        if let Some(rest) = line.strip_prefix("init([]) -> {ok, ") {
            let n = rest
                .strip_suffix(", #data{}}.")
                .ok_or_else(|| err("malformed init clause".into()))?;
            initial = Some(n.to_string());
            continue;
        }
        if let Some(rest) = line.strip_prefix('%') {
            let (kind, n) = rest
                .split_once(' ')
                .ok_or_else(|| err("malformed annotation comment".into()))?;
            let kind = match kind {
                "assert" => AnnKind::Assert,
                "require" => AnnKind::Require,
                "consume" => AnnKind::Consume,
                other => return Err(err(format!("unknown annotation kind {other}"))),
            };
            pending.push(Annotation { kind, name: n.trim().to_string() });
            continue;
        }
        // a handler clause: STATE(cast, EVENT, Data) -> ACTION[;.]
        let (head, action) =
            line.split_once(" -> ").ok_or_else(|| err(format!("unrecognised line {line:?}")))?;
        let (state, args) =
            head.split_once('(').ok_or_else(|| err("malformed clause head".into()))?;
        let args = args.strip_suffix(')').ok_or_else(|| err("malformed clause head".into()))?;
        let parts: Vec<&str> = args.split(", ").collect();
        if parts.len() != 3 || parts[0] != "cast" || parts[2] != "Data" {
            return Err(err("malformed clause arguments".into()));
        }
        let event = parts[1];
        let action = action.trim_end_matches([';', '.']);
        let to = if action == "{stop, normal, Data}" {
            STOP.to_string()
        } else {
            let inner = action
                .strip_prefix("{next_state, ")
                .and_then(|a| a.strip_suffix(", Data}"))
                .ok_or_else(|| err(format!("unrecognised action {action:?}")))?;
            inner.to_string()
        };
        let (kind, label) = decode_event(event).ok_or_else(|| err(format!("bad event {event:?}")))?;
        note_state(state, &mut states);
        transitions.push(Transition {
            annotations: std::mem::take(&mut pending),
            from: state.to_string(),
            kind,
            label,
            to,
        });
    }

    let name = name.ok_or(ArtifactError::StubParse { line: 0, message: "missing -module".into() })?;
    let initial =
        initial.ok_or(ArtifactError::StubParse { line: 0, message: "missing init clause".into() })?;
    if !states.iter().any(|s| *s == initial) {
        states.insert(0, initial.clone());
    }
    Ok(Fsm { initial, name, states, transitions })
}

fn decode_event(event: &str) -> Option<(TransKind, String)> {
    if event == STOP_LABEL || event == ENTER_LABEL {
        return Some((TransKind::Plain, event.to_string()));
    }
    for (prefix, kind) in [
        ("sel_", TransKind::Select),
        ("bra_", TransKind::Offer),
        ("br_", TransKind::Plain),
        ("r_", TransKind::Receive),
        ("s_", TransKind::Send),
        ("n_", TransKind::Plain),
    ] {
        if let Some(rest) = event.strip_prefix(prefix) {
            return Some((kind, rest.to_string()));
        }
    }
    None
}

/// A successful extraction: the rebuilt protocol plus any warnings.
#[derive(Clone, Debug)]
pub struct Extraction {
    pub proto: Protocol,
    pub warnings: Vec<String>,
}

/// Parse machine JSON without extracting.
pub fn parse_fsm(fsm_json: &[u8]) -> Result<Fsm, ArtifactError> {
    serde_json::from_slice(fsm_json).map_err(|e| ArtifactError::Schema(e.to_string()))
}

/// Rebuild a protocol from canonical FSM JSON. Back-edges become
/// recursion binders with canonical names; annotations become
/// assert/require/consume chains ahead of their transition.
pub fn extract(fsm_json: &[u8]) -> Result<Extraction, ArtifactError> {
    extract_fsm(&parse_fsm(fsm_json)?)
}

/// [`extract`] on an already-parsed machine.
pub fn extract_fsm(fsm: &Fsm) -> Result<Extraction, ArtifactError> {
    let declared: BTreeSet<&str> = fsm.states.iter().map(String::as_str).collect();
    if !declared.contains(fsm.initial.as_str()) {
        return Err(ArtifactError::Schema(format!("initial state {} not declared", fsm.initial)));
    }
    for t in &fsm.transitions {
        if !declared.contains(t.from.as_str()) {
            return Err(ArtifactError::Schema(format!("transition from undeclared state {}", t.from)));
        }
        if t.to != STOP && !declared.contains(t.to.as_str()) {
            return Err(ArtifactError::Schema(format!("transition to undeclared state {}", t.to)));
        }
    }

    let mut warnings = Vec::new();
    let mut reachable: BTreeSet<&str> = BTreeSet::new();
    let mut stack = vec![fsm.initial.as_str()];
    while let Some(s) = stack.pop() {
        if !reachable.insert(s) {
            continue;
        }
        for t in fsm.outgoing(s) {
            if t.to != STOP {
                stack.push(t.to.as_str());
            }
        }
    }
    for s in &fsm.states {
        if !reachable.contains(s.as_str()) {
            warnings.push(format!("state {s} is unreachable and was dropped"));
        }
    }

    struct Frame {
        state: String,
        binder: String,
        used: bool,
    }

    fn rebuild(
        fsm: &Fsm,
        state: &str,
        stack: &mut Vec<Frame>,
        counter: &mut usize,
    ) -> Result<Protocol, ArtifactError> {
        if let Some(frame) = stack.iter_mut().rev().find(|f| f.state == state) {
            frame.used = true;
            return Ok(Protocol::Var(frame.binder.clone()));
        }
        let binder = format!("x{counter}");
        *counter += 1;
        stack.push(Frame { state: state.to_string(), binder: binder.clone(), used: false });

        let ts = fsm.outgoing(state);
        let body = if ts.is_empty() {
            Protocol::End
        } else if ts.len() == 1 {
            let t = ts[0];
            single_transition(fsm, t, stack, counter)?
        } else {
            let kind = ts[0].kind;
            if ts.iter().any(|t| t.kind != kind) {
                return Err(ArtifactError::Schema(format!(
                    "state {state} mixes transition kinds"
                )));
            }
            let op = match kind {
                TransKind::Select => ChoiceOp::Select,
                TransKind::Offer => ChoiceOp::Offer,
                TransKind::Plain => ChoiceOp::Plain,
                _ => {
                    return Err(ArtifactError::Schema(format!(
                        "state {state} has several send/receive transitions"
                    )))
                }
            };
            let mut branches = Vec::new();
            for t in ts {
                let cont = continue_to(fsm, t, stack, counter)?;
                branches.push((t.label.clone(), wrap_chain(&t.annotations, cont)));
            }
            Protocol::Choice(op, branches)
        };

        let frame = stack.pop().expect("frame pushed above");
        Ok(if frame.used { Protocol::Rec(frame.binder, Box::new(body)) } else { body })
    }

    fn continue_to(
        fsm: &Fsm,
        t: &Transition,
        stack: &mut Vec<Frame>,
        counter: &mut usize,
    ) -> Result<Protocol, ArtifactError> {
        if t.to == STOP {
            Ok(Protocol::End)
        } else {
            rebuild(fsm, &t.to, stack, counter)
        }
    }

    fn single_transition(
        fsm: &Fsm,
        t: &Transition,
        stack: &mut Vec<Frame>,
        counter: &mut usize,
    ) -> Result<Protocol, ArtifactError> {
        match t.kind {
            TransKind::Plain if t.label == STOP_LABEL && t.to == STOP => {
                Ok(wrap_chain(&t.annotations, Protocol::End))
            }
            TransKind::Plain if t.label == ENTER_LABEL => {
                let cont = continue_to(fsm, t, stack, counter)?;
                Ok(wrap_chain(&t.annotations, cont))
            }
            TransKind::Send | TransKind::Receive | TransKind::Plain => {
                let polarity = match t.kind {
                    TransKind::Send => Polarity::Send,
                    TransKind::Receive => Polarity::Receive,
                    TransKind::Plain => Polarity::Neutral,
                    _ => unreachable!(),
                };
                let cont = continue_to(fsm, t, stack, counter)?;
                Ok(Protocol::Prefix(
                    Action { polarity, payload: t.label.clone() },
                    Box::new(wrap_chain(&t.annotations, cont)),
                ))
            }
            TransKind::Select | TransKind::Offer => {
                let op =
                    if t.kind == TransKind::Select { ChoiceOp::Select } else { ChoiceOp::Offer };
                let cont = continue_to(fsm, t, stack, counter)?;
                Ok(Protocol::Choice(
                    op,
                    vec![(t.label.clone(), wrap_chain(&t.annotations, cont))],
                ))
            }
        }
    }

    let mut counter = 0usize;
    let mut stack = Vec::new();
    let raw = rebuild(fsm, &fsm.initial, &mut stack, &mut counter)?;
    let proto = raw.alpha_canonicalize();

    let violations = proto.validate();
    if !violations.is_empty() {
        let unguarded = violations
            .iter()
            .any(|v| matches!(v, crate::proto::Violation::UnguardedVariable { .. }));
        let detail = violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
        return Err(if unguarded {
            ArtifactError::UnguardedCycle(detail)
        } else {
            ArtifactError::InvalidExtracted(detail)
        });
    }
    Ok(Extraction { proto, warnings })
}

fn wrap_chain(anns: &[Annotation], cont: Protocol) -> Protocol {
    let mut out = cont;
    for a in anns.iter().rev() {
        out = match a.kind {
            AnnKind::Assert => Protocol::Assert(a.name.clone(), Box::new(out)),
            AnnKind::Require => Protocol::Require(a.name.clone(), Box::new(out)),
            AnnKind::Consume => Protocol::Consume(a.name.clone(), Box::new(out)),
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_str;

    fn fsm_of(text: &str) -> Fsm {
        to_fsm("machine", &parse_str(text).unwrap()).unwrap()
    }

    fn roundtrip(text: &str) {
        let proto = parse_str(text).unwrap();
        let fsm = to_fsm("machine", &proto).unwrap();
        let back = extract(&emit_fsm_json(&fsm)).unwrap();
        assert!(back.proto.alpha_eq(&proto), "round-trip failed for {text}: got {}", print(&back.proto));
        assert!(back.warnings.is_empty());
    }

    #[test]
    fn end_is_a_single_silent_state() {
        let f = fsm_of("end");
        assert_eq!(f.states, vec!["s0"]);
        assert_eq!(f.initial, "s0");
        assert!(f.transitions.is_empty());
    }

    #[test]
    fn branch_head_chains_ride_their_branch_transition() {
        let f = fsm_of("?pin.sel{ok: assert(pin).require(pin).!go.end, fail: end}");
        let s0 = f.outgoing("s0");
        assert_eq!(s0.len(), 1);
        assert_eq!(s0[0].kind, TransKind::Receive);
        assert_eq!(s0[0].label, "pin");
        let s1 = f.outgoing(&s0[0].to);
        assert_eq!(s1.len(), 2);
        let ok = s1.iter().find(|t| t.label == "ok").unwrap();
        assert_eq!(
            ok.annotations,
            vec![
                Annotation { kind: AnnKind::Assert, name: "pin".into() },
                Annotation { kind: AnnKind::Require, name: "pin".into() },
            ]
        );
        let fail = s1.iter().find(|t| t.label == "fail").unwrap();
        assert_eq!(fail.to, STOP);
        assert!(fail.annotations.is_empty());
    }

    #[test]
    fn recursion_becomes_header_with_back_edges() {
        let f = fsm_of("rec t.!p.t");
        // a header state plus the action state looping back to it
        assert_eq!(f.states.len(), 2);
        let enter = f.outgoing("s0");
        assert_eq!(enter[0].label, ENTER_LABEL);
        let action = f.outgoing("s1");
        assert_eq!(action[0].kind, TransKind::Send);
        assert_eq!(action[0].to, "s0");
        roundtrip("rec t.!p.t");
    }

    #[test]
    fn chain_before_end_gets_synthetic_stop() {
        let f = fsm_of("assert(n).end");
        assert_eq!(f.states.len(), 1);
        let ts = f.outgoing("s0");
        assert_eq!(ts[0].label, STOP_LABEL);
        assert_eq!(ts[0].kind, TransKind::Plain);
        assert_eq!(ts[0].to, STOP);
        assert_eq!(ts[0].annotations.len(), 1);
        roundtrip("assert(n).end");
    }

    #[test]
    fn loop_body_chain_stays_inside_the_loop() {
        // the chain belongs on every iteration, not just on entry
        roundtrip("rec y.require(keyp).bra{tan: assert(otp).y, keycard: y}");
        // and a chain before the loop stays outside it
        roundtrip("require(pin).rec t.bra{go: !p.t, logout: consume(pin).end}");
    }

    #[test]
    fn fsm_json_is_byte_stable() {
        let f = fsm_of("?a.sel{x: end, y: !b.end}");
        assert_eq!(emit_fsm_json(&f), emit_fsm_json(&f));
        let text = String::from_utf8(emit_fsm_json(&f)).unwrap();
        assert!(text.starts_with("{\"initial\":"));
    }

    #[test]
    fn extract_rejects_bad_machines() {
        // unguarded two-state cycle: only synthetic transitions
        let fsm = Fsm {
            initial: "a".into(),
            name: "m".into(),
            states: vec!["a".into(), "b".into()],
            transitions: vec![
                Transition {
                    annotations: vec![Annotation { kind: AnnKind::Assert, name: "n".into() }],
                    from: "a".into(),
                    kind: TransKind::Plain,
                    label: ENTER_LABEL.into(),
                    to: "b".into(),
                },
                Transition {
                    annotations: vec![],
                    from: "b".into(),
                    kind: TransKind::Plain,
                    label: ENTER_LABEL.into(),
                    to: "a".into(),
                },
            ],
        };
        match extract_fsm(&fsm) {
            Err(ArtifactError::UnguardedCycle(_)) => {}
            other => panic!("expected unguarded cycle, got {other:?}"),
        }

        assert!(extract(b"{\"nope\": 1}").is_err());
    }

    #[test]
    fn extract_warns_on_unreachable_states() {
        let mut f = fsm_of("!p.end");
        f.states.push("s99".into());
        let out = extract_fsm(&f).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("s99"));
    }

    #[test]
    fn single_state_no_transition_extracts_to_end() {
        let f = fsm_of("end");
        let out = extract(&emit_fsm_json(&f)).unwrap();
        assert_eq!(out.proto, Protocol::End);
    }

    #[test]
    fn dot_output_is_well_formed() {
        let f = fsm_of("end");
        let dot = emit_dot(&f).unwrap();
        assert!(dot.starts_with("digraph machine {"));
        assert!(dot.contains("s0"));

        let mut bad = f.clone();
        bad.name = String::new();
        assert!(matches!(emit_dot(&bad), Err(ArtifactError::InvalidName(_))));
    }

    #[test]
    fn stub_of_end_has_only_terminate() {
        let f = fsm_of("end");
        let stub = emit_stub(&f);
        assert!(stub.contains("terminate(_Reason, _State, _Data) -> ok."));
        assert!(!stub.contains("next_state"));
    }

    #[test]
    fn stub_roundtrips_to_the_same_machine() {
        for text in [
            "?pin.sel{ok: assert(pin).require(pin).!go.end, fail: end}",
            "rec t.bra{go: n_like.t, quit: end}",
            "rec y.require(keyp).bra{tan: assert(otp).y, keycard: y}",
            "+{a: end, b: !p.end}",
        ] {
            let f = fsm_of(text);
            let parsed = parse_stub(&emit_stub(&f)).unwrap();
            assert_eq!(parsed, f, "stub round-trip failed for {text}");
        }
    }

    #[test]
    fn neutral_actions_roundtrip() {
        roundtrip("ping.pong.end");
    }
}
