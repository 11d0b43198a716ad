//! Abstract syntax of asserted protocols and its structural operations.
//!
//! A protocol is a sequential process term: action prefixes, labelled
//! branching, guarded recursion, and three assertion constructs
//! (`assert`, `require`, `consume`) that thread logical atoms through an
//! environment. Branch lists keep their source order for printing but
//! compare as sets; recursion binders are kept pairwise distinct by the
//! renamer so downstream passes can treat names as globally unique.

use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};

/// Direction of a prefixing action. `Neutral` covers CCS-style bare names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Send,
    Receive,
    Neutral,
}

/// A prefixing action: a polarity plus an opaque payload token.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    pub polarity: Polarity,
    pub payload: String,
}

impl Action {
    pub fn send(payload: impl Into<String>) -> Self {
        Action { polarity: Polarity::Send, payload: payload.into() }
    }

    pub fn receive(payload: impl Into<String>) -> Self {
        Action { polarity: Polarity::Receive, payload: payload.into() }
    }

    pub fn neutral(payload: impl Into<String>) -> Self {
        Action { polarity: Polarity::Neutral, payload: payload.into() }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.polarity {
            Polarity::Send => write!(f, "!{}", self.payload),
            Polarity::Receive => write!(f, "?{}", self.payload),
            Polarity::Neutral => write!(f, "{}", self.payload),
        }
    }
}

/// Branching operator: plain choice `+`, internal selection `sel` (⊕) or
/// external offer `bra` (&).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChoiceOp {
    Plain,
    Select,
    Offer,
}

impl ChoiceOp {
    pub fn keyword(self) -> &'static str {
        match self {
            ChoiceOp::Plain => "+",
            ChoiceOp::Select => "sel",
            ChoiceOp::Offer => "bra",
        }
    }
}

impl fmt::Display for ChoiceOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// An asserted protocol term.
///
/// Invariants on validated terms (see [`Protocol::validate`]):
/// every `Choice` is non-empty with distinct labels, every `Rec` binds a
/// variable that occurs free and guarded in its body, the body of a `Rec`
/// is never itself a `Rec`, and binder names are pairwise distinct and
/// distinct from free variables.
#[derive(Clone, Debug)]
pub enum Protocol {
    End,
    Var(String),
    Rec(String, Box<Protocol>),
    Prefix(Action, Box<Protocol>),
    Choice(ChoiceOp, Vec<(String, Protocol)>),
    Assert(String, Box<Protocol>),
    Require(String, Box<Protocol>),
    Consume(String, Box<Protocol>),
}

/// Errors raised by structural operations on protocols.
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ProtoError {
    #[error("not a recursion: {0}")]
    NotARecursion(String),
    #[error("substitution of {var} risks capturing {captured}")]
    CaptureRisk { var: String, captured: String },
    #[error("protocol is not dualizable: {0}")]
    Undualizable(String),
}

/// One violation reported by the validator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnguardedVariable { var: String },
    UnusedBinder { var: String },
    NestedRecursion { outer: String, inner: String },
    DuplicateLabel { label: String },
    EmptyChoice,
    DuplicateBinder { var: String },
    BinderShadowsFree { var: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnguardedVariable { var } => {
                write!(f, "variable {var} occurs unguarded (not under an action or branching)")
            }
            Violation::UnusedBinder { var } => {
                write!(f, "rec {var} binds a variable that never occurs free in its body")
            }
            Violation::NestedRecursion { outer, inner } => {
                write!(f, "rec {outer} immediately encloses rec {inner} (unguarded nested recursion)")
            }
            Violation::DuplicateLabel { label } => write!(f, "duplicate branch label {label}"),
            Violation::EmptyChoice => write!(f, "branching with no branches"),
            Violation::DuplicateBinder { var } => write!(f, "binder {var} is bound more than once"),
            Violation::BinderShadowsFree { var } => {
                write!(f, "binder {var} collides with a free variable of the same name")
            }
        }
    }
}

impl Protocol {
    pub fn prefix(action: Action, cont: Protocol) -> Protocol {
        Protocol::Prefix(action, Box::new(cont))
    }

    pub fn rec(var: impl Into<String>, body: Protocol) -> Protocol {
        Protocol::Rec(var.into(), Box::new(body))
    }

    pub fn var(name: impl Into<String>) -> Protocol {
        Protocol::Var(name.into())
    }

    pub fn assert_(name: impl Into<String>, cont: Protocol) -> Protocol {
        Protocol::Assert(name.into(), Box::new(cont))
    }

    pub fn require(name: impl Into<String>, cont: Protocol) -> Protocol {
        Protocol::Require(name.into(), Box::new(cont))
    }

    pub fn consume(name: impl Into<String>, cont: Protocol) -> Protocol {
        Protocol::Consume(name.into(), Box::new(cont))
    }

    pub fn choice<L: Into<String>>(op: ChoiceOp, branches: Vec<(L, Protocol)>) -> Protocol {
        Protocol::Choice(op, branches.into_iter().map(|(l, s)| (l.into(), s)).collect())
    }

    /// Total node count, counting recursion binders. Strictly decreases
    /// across every composition rule, which is what makes the composition
    /// search terminate.
    pub fn size(&self) -> usize {
        match self {
            Protocol::End | Protocol::Var(_) => 1,
            Protocol::Rec(_, body) => 1 + body.size(),
            Protocol::Prefix(_, c)
            | Protocol::Assert(_, c)
            | Protocol::Require(_, c)
            | Protocol::Consume(_, c) => 1 + c.size(),
            Protocol::Choice(_, brs) => 1 + brs.iter().map(|(_, s)| s.size()).sum::<usize>(),
        }
    }

    /// Recursion variables occurring free in this term.
    pub fn free_vars(&self) -> BTreeSet<String> {
        fn go(s: &Protocol, bound: &mut Vec<String>, acc: &mut BTreeSet<String>) {
            match s {
                Protocol::End => {}
                Protocol::Var(v) => {
                    if !bound.iter().any(|b| b == v) {
                        acc.insert(v.clone());
                    }
                }
                Protocol::Rec(t, body) => {
                    bound.push(t.clone());
                    go(body, bound, acc);
                    bound.pop();
                }
                Protocol::Prefix(_, c)
                | Protocol::Assert(_, c)
                | Protocol::Require(_, c)
                | Protocol::Consume(_, c) => go(c, bound, acc),
                Protocol::Choice(_, brs) => {
                    for (_, b) in brs {
                        go(b, bound, acc);
                    }
                }
            }
        }
        let mut acc = BTreeSet::new();
        go(self, &mut Vec::new(), &mut acc);
        acc
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Recursion variables bound anywhere in this term.
    pub fn bound_vars(&self) -> BTreeSet<String> {
        let mut acc = BTreeSet::new();
        self.visit(&mut |s| {
            if let Protocol::Rec(t, _) = s {
                acc.insert(t.clone());
            }
        });
        acc
    }

    /// Assertion names mentioned anywhere in this term.
    pub fn assertion_names(&self) -> BTreeSet<String> {
        let mut acc = BTreeSet::new();
        self.visit(&mut |s| match s {
            Protocol::Assert(n, _) | Protocol::Require(n, _) | Protocol::Consume(n, _) => {
                acc.insert(n.clone());
            }
            _ => {}
        });
        acc
    }

    fn visit(&self, f: &mut impl FnMut(&Protocol)) {
        f(self);
        match self {
            Protocol::End | Protocol::Var(_) => {}
            Protocol::Rec(_, c)
            | Protocol::Prefix(_, c)
            | Protocol::Assert(_, c)
            | Protocol::Require(_, c)
            | Protocol::Consume(_, c) => c.visit(f),
            Protocol::Choice(_, brs) => {
                for (_, b) in brs {
                    b.visit(f);
                }
            }
        }
    }

    /// Capture-avoiding substitution of `replacement` for free occurrences
    /// of `var`. Binders of `self` must not capture free variables of
    /// `replacement`; the renamer guarantees this for terms it produced.
    pub fn substitute(&self, var: &str, replacement: &Protocol) -> Result<Protocol, ProtoError> {
        let free_r = replacement.free_vars();
        fn go(
            s: &Protocol,
            var: &str,
            replacement: &Protocol,
            free_r: &BTreeSet<String>,
        ) -> Result<Protocol, ProtoError> {
            Ok(match s {
                Protocol::End => Protocol::End,
                Protocol::Var(v) => {
                    if v == var {
                        replacement.clone()
                    } else {
                        Protocol::Var(v.clone())
                    }
                }
                Protocol::Rec(t, body) => {
                    if t == var {
                        // var is shadowed here; no free occurrences below
                        Protocol::Rec(t.clone(), body.clone())
                    } else {
                        if free_r.contains(t) && body.free_vars().contains(var) {
                            return Err(ProtoError::CaptureRisk {
                                var: var.to_string(),
                                captured: t.clone(),
                            });
                        }
                        Protocol::Rec(t.clone(), Box::new(go(body, var, replacement, free_r)?))
                    }
                }
                Protocol::Prefix(a, c) => {
                    Protocol::Prefix(a.clone(), Box::new(go(c, var, replacement, free_r)?))
                }
                Protocol::Assert(n, c) => {
                    Protocol::Assert(n.clone(), Box::new(go(c, var, replacement, free_r)?))
                }
                Protocol::Require(n, c) => {
                    Protocol::Require(n.clone(), Box::new(go(c, var, replacement, free_r)?))
                }
                Protocol::Consume(n, c) => {
                    Protocol::Consume(n.clone(), Box::new(go(c, var, replacement, free_r)?))
                }
                Protocol::Choice(op, brs) => Protocol::Choice(
                    *op,
                    brs.iter()
                        .map(|(l, b)| Ok((l.clone(), go(b, var, replacement, free_r)?)))
                        .collect::<Result<Vec<_>, ProtoError>>()?,
                ),
            })
        }
        go(self, var, replacement, &free_r)
    }

    /// One-time unfolding of a recursion: `rec t.S` becomes `S[rec t.S / t]`.
    pub fn unfold(&self) -> Result<Protocol, ProtoError> {
        match self {
            Protocol::Rec(t, body) => body.substitute(t, self),
            other => Err(ProtoError::NotARecursion(format!("{other:?}"))),
        }
    }

    /// The outermost recursion binder, if the term is a recursion.
    pub fn top(&self) -> Option<&str> {
        match self {
            Protocol::Rec(t, _) => Some(t),
            _ => None,
        }
    }

    /// Swap the direction of every action and branching operator: sends
    /// with receives, selections with offers. Assertions, recursion and
    /// `end` are left unchanged. Neutral actions and plain branchings have
    /// no dual.
    pub fn dual(&self) -> Result<Protocol, ProtoError> {
        Ok(match self {
            Protocol::End => Protocol::End,
            Protocol::Var(v) => Protocol::Var(v.clone()),
            Protocol::Rec(t, body) => Protocol::Rec(t.clone(), Box::new(body.dual()?)),
            Protocol::Prefix(a, c) => {
                let polarity = match a.polarity {
                    Polarity::Send => Polarity::Receive,
                    Polarity::Receive => Polarity::Send,
                    Polarity::Neutral => {
                        return Err(ProtoError::Undualizable(format!(
                            "neutral action {}",
                            a.payload
                        )))
                    }
                };
                Protocol::Prefix(
                    Action { polarity, payload: a.payload.clone() },
                    Box::new(c.dual()?),
                )
            }
            Protocol::Choice(op, brs) => {
                let op = match op {
                    ChoiceOp::Select => ChoiceOp::Offer,
                    ChoiceOp::Offer => ChoiceOp::Select,
                    ChoiceOp::Plain => {
                        return Err(ProtoError::Undualizable("plain branching".to_string()))
                    }
                };
                Protocol::Choice(
                    op,
                    brs.iter()
                        .map(|(l, b)| Ok((l.clone(), b.dual()?)))
                        .collect::<Result<Vec<_>, ProtoError>>()?,
                )
            }
            Protocol::Assert(n, c) => Protocol::Assert(n.clone(), Box::new(c.dual()?)),
            Protocol::Require(n, c) => Protocol::Require(n.clone(), Box::new(c.dual()?)),
            Protocol::Consume(n, c) => Protocol::Consume(n.clone(), Box::new(c.dual()?)),
        })
    }

    /// Check every structural invariant and return all violations found.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let free = self.free_vars();
        let mut seen_binders: BTreeSet<String> = BTreeSet::new();

        fn walk(
            s: &Protocol,
            out: &mut Vec<Violation>,
            free: &BTreeSet<String>,
            seen: &mut BTreeSet<String>,
        ) {
            match s {
                Protocol::End | Protocol::Var(_) => {}
                Protocol::Rec(t, body) => {
                    if !seen.insert(t.clone()) {
                        out.push(Violation::DuplicateBinder { var: t.clone() });
                    }
                    if free.contains(t) {
                        out.push(Violation::BinderShadowsFree { var: t.clone() });
                    }
                    if !body.free_vars().contains(t) {
                        out.push(Violation::UnusedBinder { var: t.clone() });
                    }
                    if let Protocol::Rec(inner, _) = body.as_ref() {
                        out.push(Violation::NestedRecursion {
                            outer: t.clone(),
                            inner: inner.clone(),
                        });
                    }
                    if !occurs_guarded(body, t, false) {
                        out.push(Violation::UnguardedVariable { var: t.clone() });
                    }
                    walk(body, out, free, seen);
                }
                Protocol::Prefix(_, c)
                | Protocol::Assert(_, c)
                | Protocol::Require(_, c)
                | Protocol::Consume(_, c) => walk(c, out, free, seen),
                Protocol::Choice(_, brs) => {
                    if brs.is_empty() {
                        out.push(Violation::EmptyChoice);
                    }
                    let mut labels = BTreeSet::new();
                    for (l, b) in brs {
                        if !labels.insert(l.clone()) {
                            out.push(Violation::DuplicateLabel { label: l.clone() });
                        }
                        walk(b, out, free, seen);
                    }
                }
            }
        }

        // true if every free occurrence of `var` sits under at least one
        // prefix or branching
        fn occurs_guarded(s: &Protocol, var: &str, guarded: bool) -> bool {
            match s {
                Protocol::End => true,
                Protocol::Var(v) => v != var || guarded,
                Protocol::Rec(t, body) => t == var || occurs_guarded(body, var, guarded),
                Protocol::Prefix(_, c) => occurs_guarded(c, var, true),
                Protocol::Choice(_, brs) => brs.iter().all(|(_, b)| occurs_guarded(b, var, true)),
                Protocol::Assert(_, c) | Protocol::Require(_, c) | Protocol::Consume(_, c) => {
                    occurs_guarded(c, var, guarded)
                }
            }
        }

        walk(self, &mut out, &free, &mut seen_binders);
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Rename binders so they are pairwise distinct and distinct from every
    /// name in `taken` (which should include the term's free variables).
    /// Names are kept when already fresh; conflicts get numeric suffixes.
    pub fn freshen_binders(&self, taken: &mut BTreeSet<String>) -> Protocol {
        fn fresh(base: &str, taken: &mut BTreeSet<String>) -> String {
            if taken.insert(base.to_string()) {
                return base.to_string();
            }
            let mut i = 1usize;
            loop {
                let candidate = format!("{base}_{i}");
                if taken.insert(candidate.clone()) {
                    return candidate;
                }
                i += 1;
            }
        }
        fn go(s: &Protocol, map: &mut Vec<(String, String)>, taken: &mut BTreeSet<String>) -> Protocol {
            match s {
                Protocol::End => Protocol::End,
                Protocol::Var(v) => {
                    let name = map
                        .iter()
                        .rev()
                        .find(|(old, _)| old == v)
                        .map(|(_, new)| new.clone())
                        .unwrap_or_else(|| v.clone());
                    Protocol::Var(name)
                }
                Protocol::Rec(t, body) => {
                    let new = fresh(t, taken);
                    map.push((t.clone(), new.clone()));
                    let body = go(body, map, taken);
                    map.pop();
                    Protocol::Rec(new, Box::new(body))
                }
                Protocol::Prefix(a, c) => Protocol::Prefix(a.clone(), Box::new(go(c, map, taken))),
                Protocol::Assert(n, c) => Protocol::Assert(n.clone(), Box::new(go(c, map, taken))),
                Protocol::Require(n, c) => Protocol::Require(n.clone(), Box::new(go(c, map, taken))),
                Protocol::Consume(n, c) => Protocol::Consume(n.clone(), Box::new(go(c, map, taken))),
                Protocol::Choice(op, brs) => Protocol::Choice(
                    *op,
                    brs.iter().map(|(l, b)| (l.clone(), go(b, map, taken))).collect(),
                ),
            }
        }
        for v in self.free_vars() {
            taken.insert(v);
        }
        go(self, &mut Vec::new(), taken)
    }

    /// Rename bound variables to the canonical scheme `r0, r1, ...`.
    ///
    /// Numbering follows a depth-first traversal that visits branches in
    /// label order, so the result is insensitive to stored branch order;
    /// the output itself keeps the stored order. Idempotent.
    pub fn alpha_canonicalize(&self) -> Protocol {
        fn go(s: &Protocol, map: &mut Vec<(String, String)>, counter: &mut usize) -> Protocol {
            match s {
                Protocol::End => Protocol::End,
                Protocol::Var(v) => {
                    let name = map
                        .iter()
                        .rev()
                        .find(|(old, _)| old == v)
                        .map(|(_, new)| new.clone())
                        .unwrap_or_else(|| v.clone());
                    Protocol::Var(name)
                }
                Protocol::Rec(t, body) => {
                    let new = format!("r{counter}");
                    *counter += 1;
                    map.push((t.clone(), new.clone()));
                    let body = go(body, map, counter);
                    map.pop();
                    Protocol::Rec(new, Box::new(body))
                }
                Protocol::Prefix(a, c) => Protocol::Prefix(a.clone(), Box::new(go(c, map, counter))),
                Protocol::Assert(n, c) => Protocol::Assert(n.clone(), Box::new(go(c, map, counter))),
                Protocol::Require(n, c) => {
                    Protocol::Require(n.clone(), Box::new(go(c, map, counter)))
                }
                Protocol::Consume(n, c) => {
                    Protocol::Consume(n.clone(), Box::new(go(c, map, counter)))
                }
                Protocol::Choice(op, brs) => {
                    // number binders in label order, emit in stored order
                    let mut order: Vec<usize> = (0..brs.len()).collect();
                    order.sort_by(|&a, &b| brs[a].0.cmp(&brs[b].0));
                    let mut renamed: Vec<Option<(String, Protocol)>> = vec![None; brs.len()];
                    for idx in order {
                        let (l, b) = &brs[idx];
                        renamed[idx] = Some((l.clone(), go(b, map, counter)));
                    }
                    Protocol::Choice(*op, renamed.into_iter().map(|x| x.unwrap()).collect())
                }
            }
        }
        go(self, &mut Vec::new(), &mut 0)
    }

    /// Alpha-equivalence: equality of canonical forms (branch order still
    /// compares as a set).
    pub fn alpha_eq(&self, other: &Protocol) -> bool {
        self.alpha_canonicalize() == other.alpha_canonicalize()
    }
}

fn sorted_branch_indices(brs: &[(String, Protocol)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..brs.len()).collect();
    order.sort_by(|&a, &b| brs[a].0.cmp(&brs[b].0));
    order
}

impl PartialEq for Protocol {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Protocol::End, Protocol::End) => true,
            (Protocol::Var(a), Protocol::Var(b)) => a == b,
            (Protocol::Rec(t1, b1), Protocol::Rec(t2, b2)) => t1 == t2 && b1 == b2,
            (Protocol::Prefix(a1, c1), Protocol::Prefix(a2, c2)) => a1 == a2 && c1 == c2,
            (Protocol::Assert(n1, c1), Protocol::Assert(n2, c2))
            | (Protocol::Require(n1, c1), Protocol::Require(n2, c2))
            | (Protocol::Consume(n1, c1), Protocol::Consume(n2, c2)) => n1 == n2 && c1 == c2,
            (Protocol::Choice(o1, b1), Protocol::Choice(o2, b2)) => {
                if o1 != o2 || b1.len() != b2.len() {
                    return false;
                }
                let i1 = sorted_branch_indices(b1);
                let i2 = sorted_branch_indices(b2);
                i1.iter().zip(i2.iter()).all(|(&x, &y)| b1[x] == b2[y])
            }
            _ => false,
        }
    }
}

impl Eq for Protocol {}

impl Hash for Protocol {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Protocol::End => 0u8.hash(state),
            Protocol::Var(v) => {
                1u8.hash(state);
                v.hash(state);
            }
            Protocol::Rec(t, b) => {
                2u8.hash(state);
                t.hash(state);
                b.hash(state);
            }
            Protocol::Prefix(a, c) => {
                3u8.hash(state);
                a.hash(state);
                c.hash(state);
            }
            Protocol::Choice(op, brs) => {
                4u8.hash(state);
                op.hash(state);
                for idx in sorted_branch_indices(brs) {
                    brs[idx].0.hash(state);
                    brs[idx].1.hash(state);
                }
            }
            Protocol::Assert(n, c) => {
                5u8.hash(state);
                n.hash(state);
                c.hash(state);
            }
            Protocol::Require(n, c) => {
                6u8.hash(state);
                n.hash(state);
                c.hash(state);
            }
            Protocol::Consume(n, c) => {
                7u8.hash(state);
                n.hash(state);
                c.hash(state);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(payload: &str) -> Action {
        Action::send(payload)
    }

    #[test]
    fn free_vars_basic() {
        assert!(Protocol::End.free_vars().is_empty());
        let rec = Protocol::rec("t", Protocol::prefix(p("p"), Protocol::var("t")));
        assert!(rec.free_vars().is_empty());
        let open = Protocol::prefix(p("p"), Protocol::var("t"));
        assert_eq!(open.free_vars().into_iter().collect::<Vec<_>>(), vec!["t".to_string()]);
    }

    #[test]
    fn substitute_basic() {
        let s = Protocol::prefix(p("p"), Protocol::var("t"));
        let out = s.substitute("t", &Protocol::End).unwrap();
        assert_eq!(out, Protocol::prefix(p("p"), Protocol::End));

        // t not free under its own binder
        let rec = Protocol::rec("t", Protocol::prefix(p("p"), Protocol::var("t")));
        assert_eq!(rec.substitute("t", &Protocol::End).unwrap(), rec);

        let s = Protocol::prefix(Action::send("q"), Protocol::var("t2"));
        let r = Protocol::rec("t2", Protocol::prefix(p("p"), Protocol::var("t2")));
        let out = s.substitute("t2", &r).unwrap();
        assert_eq!(out, Protocol::prefix(Action::send("q"), r));
    }

    #[test]
    fn substitute_capture_risk() {
        // rec u. p.t with replacement containing u free
        let s = Protocol::rec("u", Protocol::prefix(p("p"), Protocol::var("t")));
        let r = Protocol::prefix(p("q"), Protocol::var("u"));
        let err = s.substitute("t", &r).unwrap_err();
        assert!(matches!(err, ProtoError::CaptureRisk { .. }));
    }

    #[test]
    fn unfold_rec() {
        let rec = Protocol::rec("t", Protocol::prefix(p("p"), Protocol::var("t")));
        let unfolded = rec.unfold().unwrap();
        assert_eq!(unfolded, Protocol::prefix(p("p"), rec.clone()));
        assert!(Protocol::prefix(p("p"), Protocol::End).unfold().is_err());
    }

    #[test]
    fn top_of_term() {
        let rec = Protocol::rec("t", Protocol::prefix(p("p"), Protocol::var("t")));
        assert_eq!(rec.top(), Some("t"));
        assert_eq!(Protocol::End.top(), None);
        assert_eq!(Protocol::prefix(p("p"), rec).top(), None);
    }

    #[test]
    fn alpha_canonical_and_eq() {
        let a = Protocol::rec("x", Protocol::prefix(p("p"), Protocol::var("x")));
        let canon = a.alpha_canonicalize();
        assert_eq!(canon, Protocol::rec("r0", Protocol::prefix(p("p"), Protocol::var("r0"))));
        assert_eq!(canon.alpha_canonicalize(), canon);

        let b = Protocol::rec("y", Protocol::prefix(p("p"), Protocol::var("y")));
        assert!(a.alpha_eq(&b));
        assert!(Protocol::End.alpha_eq(&Protocol::End));
        assert!(!Protocol::prefix(Action::send("p"), Protocol::End)
            .alpha_eq(&Protocol::prefix(Action::receive("p"), Protocol::End)));
    }

    #[test]
    fn alpha_eq_ignores_branch_order() {
        let mk = |first: bool| {
            let ba = ("a", Protocol::rec("x", Protocol::prefix(p("p"), Protocol::var("x"))));
            let bb = ("b", Protocol::rec("y", Protocol::prefix(p("q"), Protocol::var("y"))));
            let brs = if first { vec![ba, bb] } else { vec![bb, ba] };
            Protocol::choice(ChoiceOp::Offer, brs)
        };
        assert!(mk(true).alpha_eq(&mk(false)));
    }

    #[test]
    fn dual_swaps_and_involutes() {
        let s = Protocol::prefix(Action::receive("pin"), Protocol::End);
        assert_eq!(s.dual().unwrap(), Protocol::prefix(Action::send("pin"), Protocol::End));

        let sel = Protocol::choice(
            ChoiceOp::Select,
            vec![("ok", Protocol::assert_("n", Protocol::End)), ("ko", Protocol::End)],
        );
        let dual = sel.dual().unwrap();
        assert!(matches!(dual, Protocol::Choice(ChoiceOp::Offer, _)));
        assert_eq!(dual.dual().unwrap(), sel);

        assert!(Protocol::prefix(Action::neutral("p"), Protocol::End).dual().is_err());
        assert!(Protocol::choice(ChoiceOp::Plain, vec![("l", Protocol::End)]).dual().is_err());
    }

    #[test]
    fn validate_rejects_bad_terms() {
        let unguarded = Protocol::rec("t", Protocol::var("t"));
        assert!(unguarded
            .validate()
            .iter()
            .any(|v| matches!(v, Violation::UnguardedVariable { .. })));

        let unused = Protocol::rec("t", Protocol::prefix(Action::receive("pay"), Protocol::End));
        assert!(unused.validate().iter().any(|v| matches!(v, Violation::UnusedBinder { .. })));

        let nested = Protocol::rec(
            "t",
            Protocol::rec(
                "u",
                Protocol::prefix(
                    p("p"),
                    Protocol::choice(
                        ChoiceOp::Plain,
                        vec![("l1", Protocol::var("t")), ("l2", Protocol::var("u"))],
                    ),
                ),
            ),
        );
        assert!(nested.validate().iter().any(|v| matches!(v, Violation::NestedRecursion { .. })));

        let dup = Protocol::choice(
            ChoiceOp::Plain,
            vec![("l", Protocol::End), ("l", Protocol::End)],
        );
        assert!(dup.validate().iter().any(|v| matches!(v, Violation::DuplicateLabel { .. })));
    }

    #[test]
    fn freshen_makes_binders_distinct() {
        // two binders with the same name in different subtrees
        let s = Protocol::choice(
            ChoiceOp::Plain,
            vec![
                ("a", Protocol::rec("t", Protocol::prefix(p("p"), Protocol::var("t")))),
                ("b", Protocol::rec("t", Protocol::prefix(p("q"), Protocol::var("t")))),
            ],
        );
        let mut taken = BTreeSet::new();
        let fresh = s.freshen_binders(&mut taken);
        let binders = fresh.bound_vars();
        assert_eq!(binders.len(), 2);
        assert!(fresh.is_valid());
    }

    #[test]
    fn size_counts_binders() {
        let rec = Protocol::rec("t", Protocol::prefix(p("p"), Protocol::var("t")));
        assert_eq!(rec.size(), 3);
    }
}
