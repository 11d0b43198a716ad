//! The well-assertedness judgement: a Hoare-style pre/post analysis over
//! assertion environments.
//!
//! `well_asserted(A, S)` computes the set of atoms guaranteed to hold after
//! running `S` from environment `A`, or reports where the analysis gets
//! stuck. The rules are syntax-directed: actions pass the environment
//! through, branching takes the intersection of the branch outcomes,
//! `assert(n)` adds `n`, `require(n)` demands `n` and leaves the
//! environment alone, `consume(n)` demands `n` and removes it.
//!
//! Recursion is checked as a loop invariant on back-edges: the body is
//! analysed once from the incoming environment, and every environment that
//! reaches an occurrence of the bound variable must be able to re-run the
//! body. Re-entry checks are memoised and coinductive (a loop already
//! being checked under the same environment counts as succeeding), which
//! terminates because environments over a protocol's finite atom set are
//! finite. This accepts loops that exit through a branch which gives up
//! atoms (a logout branch consuming a session atom) while still rejecting
//! loops that net-consume what they need to run again.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::proto::Protocol;

/// An assertion environment: the finite set of atoms currently known true.
pub type Env = BTreeSet<String>;

/// Build an [`Env`] from anything yielding name-like strings.
pub fn env<I, S>(names: I) -> Env
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    names.into_iter().map(Into::into).collect()
}

/// Render an environment as `{a, b}`.
pub fn env_to_string(a: &Env) -> String {
    let mut out = String::from("{");
    for (i, n) in a.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(n);
    }
    out.push('}');
    out
}

/// One step of the path from the protocol root to a failing subterm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PathStep {
    /// Descended through a prefix or assertion construct.
    Into(String),
    /// Descended into the branch with this label.
    Branch(String),
    /// Descended into the body of this recursion binder.
    RecBody(String),
}

impl fmt::Display for PathStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathStep::Into(s) => write!(f, "{s}"),
            PathStep::Branch(l) => write!(f, "branch {l}"),
            PathStep::RecBody(t) => write!(f, "rec {t}"),
        }
    }
}

/// The rule that could not be applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WaRule {
    Require,
    Consume,
    Rec,
}

impl fmt::Display for WaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WaRule::Require => write!(f, "require"),
            WaRule::Consume => write!(f, "consume"),
            WaRule::Rec => write!(f, "rec"),
        }
    }
}

/// Why and where a well-assertedness check failed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WaFailure {
    pub path: Vec<PathStep>,
    pub rule: WaRule,
    pub missing: Option<String>,
    pub detail: String,
}

impl fmt::Display for WaFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path: Vec<String> = self.path.iter().map(|p| p.to_string()).collect();
        if path.is_empty() {
            write!(f, "[{}] {}", self.rule, self.detail)
        } else {
            write!(f, "at {}: [{}] {}", path.join(" / "), self.rule, self.detail)
        }
    }
}

/// Outcome of the judgement: the post-environment on success.
pub type WaResult = Result<Env, WaFailure>;

#[derive(Clone, PartialEq, Eq, Hash)]
struct ReentryKey {
    env: Vec<String>,
    var: String,
}

struct Checker<'a> {
    /// binder name -> body of that binder (binders are pairwise distinct)
    binders: Vec<(String, &'a Protocol)>,
    proved: HashMap<ReentryKey, bool>,
    in_progress: HashSet<ReentryKey>,
}

impl<'a> Checker<'a> {
    fn body_of(&self, var: &str) -> Option<&'a Protocol> {
        self.binders.iter().rev().find(|(t, _)| t == var).map(|(_, b)| *b)
    }

    fn check(
        &mut self,
        a: &Env,
        s: &'a Protocol,
        path: &mut Vec<PathStep>,
    ) -> Result<Env, WaFailure> {
        match s {
            Protocol::End => Ok(a.clone()),
            Protocol::Var(t) => {
                if self.body_of(t).is_some() {
                    self.check_reentry(a, t, path)?;
                }
                Ok(a.clone())
            }
            Protocol::Prefix(act, c) => {
                path.push(PathStep::Into(act.to_string()));
                let r = self.check(a, c, path);
                path.pop();
                r
            }
            Protocol::Assert(n, c) => {
                let mut a2 = a.clone();
                a2.insert(n.clone());
                path.push(PathStep::Into(format!("assert({n})")));
                let r = self.check(&a2, c, path);
                path.pop();
                r
            }
            Protocol::Require(n, c) => {
                if !a.contains(n) {
                    return Err(WaFailure {
                        path: path.clone(),
                        rule: WaRule::Require,
                        missing: Some(n.clone()),
                        detail: format!("require({n}) with {} not providing {n}", env_to_string(a)),
                    });
                }
                path.push(PathStep::Into(format!("require({n})")));
                let r = self.check(a, c, path);
                path.pop();
                r
            }
            Protocol::Consume(n, c) => {
                if !a.contains(n) {
                    return Err(WaFailure {
                        path: path.clone(),
                        rule: WaRule::Consume,
                        missing: Some(n.clone()),
                        detail: format!("consume({n}) with {} not providing {n}", env_to_string(a)),
                    });
                }
                let mut a2 = a.clone();
                a2.remove(n);
                path.push(PathStep::Into(format!("consume({n})")));
                let r = self.check(&a2, c, path);
                path.pop();
                r
            }
            Protocol::Choice(_, brs) => {
                let mut post: Option<Env> = None;
                for (l, b) in brs {
                    path.push(PathStep::Branch(l.clone()));
                    let bp = self.check(a, b, path)?;
                    path.pop();
                    post = Some(match post {
                        None => bp,
                        Some(acc) => acc.intersection(&bp).cloned().collect(),
                    });
                }
                Ok(post.unwrap_or_else(|| a.clone()))
            }
            Protocol::Rec(t, body) => {
                self.binders.push((t.clone(), body));
                path.push(PathStep::RecBody(t.clone()));
                let r = self.check(a, body, path);
                path.pop();
                self.binders.pop();
                r
            }
        }
    }

    /// A loop variable was reached with environment `a`: the binder's body
    /// must be derivable again from `a`. Coinductive: a re-entry already
    /// under check (or already proved) for the same environment succeeds.
    fn check_reentry(
        &mut self,
        a: &Env,
        var: &str,
        path: &mut Vec<PathStep>,
    ) -> Result<(), WaFailure> {
        let key = ReentryKey { env: a.iter().cloned().collect(), var: var.to_string() };
        if let Some(ok) = self.proved.get(&key) {
            return if *ok {
                Ok(())
            } else {
                Err(self.reentry_failure(a, var, path, None))
            };
        }
        if self.in_progress.contains(&key) {
            return Ok(());
        }
        self.in_progress.insert(key.clone());
        let body = self.body_of(var).expect("checked by caller");
        let mut sub_path = Vec::new();
        let r = self.check(a, body, &mut sub_path);
        self.in_progress.remove(&key);
        self.proved.insert(key, r.is_ok());
        match r {
            Ok(_) => Ok(()),
            Err(inner) => Err(self.reentry_failure(a, var, path, Some(inner))),
        }
    }

    fn reentry_failure(
        &self,
        a: &Env,
        var: &str,
        path: &[PathStep],
        inner: Option<WaFailure>,
    ) -> WaFailure {
        let detail = match inner {
            Some(inner) => format!(
                "loop {var} cannot be re-entered from {}: {inner}",
                env_to_string(a)
            ),
            None => format!("loop {var} cannot be re-entered from {}", env_to_string(a)),
        };
        WaFailure { path: path.to_vec(), rule: WaRule::Rec, missing: None, detail }
    }
}

/// The judgement itself: the unique post-environment reached by running
/// `s` from `a`, or the deepest failure.
pub fn well_asserted(a: &Env, s: &Protocol) -> WaResult {
    let mut checker =
        Checker { binders: Vec::new(), proved: HashMap::new(), in_progress: HashSet::new() };
    let mut path = Vec::new();
    checker.check(a, s, &mut path)
}

/// Whether `s` is well-asserted with respect to the empty environment.
pub fn very_well_asserted(s: &Protocol) -> bool {
    well_asserted(&Env::new(), s).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_str;

    fn wa(names: &[&str], text: &str) -> WaResult {
        well_asserted(&env(names.iter().copied()), &parse_str(text).unwrap())
    }

    #[test]
    fn simple_post_environments() {
        // hand-applied rules: ?pay passes through, assert adds
        assert_eq!(wa(&[], "?pay.assert(paid).end").unwrap(), env(["paid"]));
        assert_eq!(wa(&[], "end").unwrap(), env::<[&str; 0], &str>([]));
        assert_eq!(wa(&["n"], "consume(n).end").unwrap(), env::<[&str; 0], &str>([]));
        assert_eq!(wa(&["n"], "require(n).end").unwrap(), env(["n"]));
    }

    #[test]
    fn require_and_consume_demand_their_atom() {
        let err = wa(&[], "require(n).end").unwrap_err();
        assert_eq!(err.rule, WaRule::Require);
        assert_eq!(err.missing.as_deref(), Some("n"));

        let err = wa(&[], "?p.consume(n).end").unwrap_err();
        assert_eq!(err.rule, WaRule::Consume);
        assert_eq!(err.path.len(), 1);
    }

    #[test]
    fn branch_post_is_intersection() {
        let post = wa(&[], "sel{a: assert(x).assert(y).end, b: assert(x).end}").unwrap();
        assert_eq!(post, env(["x"]));
    }

    #[test]
    fn assertion_free_protocols_are_very_well_asserted() {
        for text in ["end", "!p.end", "rec t.!p.t", "+{l1: end, l2: !q.end}"] {
            assert!(very_well_asserted(&parse_str(text).unwrap()), "{text}");
        }
    }

    #[test]
    fn buffet_is_well_asserted_with_paid() {
        let buffet = "rec t.bra{hungry: require(paid).!food.t, done: consume(paid).end}";
        assert!(wa(&["paid"], buffet).is_ok());
        assert!(wa(&[], buffet).is_err());
    }

    #[test]
    fn loop_that_maintains_its_invariant_is_accepted() {
        // the loop consumes pay but asserts it first on every path back
        let s = "rec t.assert(x).!p.consume(x).t";
        assert!(wa(&[], s).is_ok());
        assert!(wa(&["x"], s).is_ok());
    }

    #[test]
    fn loop_that_net_consumes_is_rejected() {
        // one pass succeeds but the back edge arrives without x
        let err = wa(&["x"], "rec t.consume(x).!p.t").unwrap_err();
        assert_eq!(err.rule, WaRule::Rec);

        // same thing with the consuming atom provided before the loop
        let err = wa(&[], "assert(x).rec t.consume(x).!p.t").unwrap_err();
        assert_eq!(err.rule, WaRule::Rec);
    }

    #[test]
    fn exit_branches_may_give_up_atoms() {
        // logout-style exit: consuming on the way out is fine because the
        // consuming branch never loops back
        let s = "require(pin).rec t.bra{go: !p.t, logout: consume(pin).end}";
        assert!(wa(&["pin"], s).is_ok());
    }

    #[test]
    fn reentry_failure_mentions_the_loop() {
        let err = wa(&["n"], "rec t.+{a: consume(n).!p.t, b: !q.t}").unwrap_err();
        assert_eq!(err.rule, WaRule::Rec);
        assert!(err.detail.contains("loop t"));
    }
}
