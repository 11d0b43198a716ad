//! Interleaving composition: an exhaustive, rule-driven search that weaves
//! two protocols into the set of all single protocols whose behaviour
//! respects both components and their assertions.
//!
//! The judgement is directed by the heads of the two operands. Sequential
//! constructs are consumed head-first from either side; branching
//! distributes the other operand into the branches; recursion is merged by
//! stripping binders into recursion environments and redirecting one
//! binder onto the other. Commutativity is realised as a symmetric rule
//! closure: every left-consuming rule also runs with the operands (and
//! recursion environments) swapped, which derives the same set as an
//! explicit exchange rule without its non-termination hazard.
//!
//! Four branching disciplines are supported. `Strong` only composes
//! branchings whose every branch can absorb the other operand. `Weak`
//! additionally lets branches that cannot absorb it pass through
//! unchanged, provided they are well-asserted and at least one branch
//! composes. `Correlating` pairs the branches of two branchings, nesting
//! the compatible branches of the second inside each branch of the first.
//! `All` enables both extensions.
//!
//! Negative premises ("this pair does not compose") are decided by running
//! the sub-search to completion, which is well-founded because every rule
//! strictly shrinks the combined operand size. All sub-results are
//! memoised per call.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::rc::Rc;

use crate::assertions::{env_to_string, well_asserted, very_well_asserted, Env};
use crate::proto::{Protocol, Violation};
use crate::syntax::print;

/// Which branching rules the search may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Strong,
    Weak,
    Correlating,
    All,
}

impl Mode {
    pub fn weak_branching(self) -> bool {
        matches!(self, Mode::Weak | Mode::All)
    }

    pub fn correlating_branching(self) -> bool {
        matches!(self, Mode::Correlating | Mode::All)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Strong => "strong",
            Mode::Weak => "weak",
            Mode::Correlating => "corr",
            Mode::All => "all",
        }
    }

    pub const ALL_MODES: [Mode; 4] = [Mode::Strong, Mode::Weak, Mode::Correlating, Mode::All];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strong" => Ok(Mode::Strong),
            "weak" => Ok(Mode::Weak),
            "corr" | "correlating" => Ok(Mode::Correlating),
            "all" => Ok(Mode::All),
            other => Err(format!("unknown mode {other:?} (expected strong|weak|corr|all)")),
        }
    }
}

/// An ordered list of recursion variables stripped from one operand, each
/// marked once it has been used to merge two recursions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct RecEnv {
    entries: Vec<(String, bool)>,
}

impl RecEnv {
    pub fn new() -> Self {
        RecEnv::default()
    }

    pub fn push_unused(&self, var: &str) -> RecEnv {
        debug_assert!(!self.entries.iter().any(|(v, _)| v == var));
        let mut entries = self.entries.clone();
        entries.push((var.to_string(), false));
        RecEnv { entries }
    }

    pub fn contains_used(&self, var: &str) -> bool {
        self.entries.iter().any(|(v, used)| v == var && *used)
    }

    /// Positions that may merge a binder: the entry is unused and every
    /// entry after it is unused as well.
    pub fn mergeable_positions(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (k, (_, used)) in self.entries.iter().enumerate() {
            if !used && self.entries[k + 1..].iter().all(|(_, u)| !u) {
                out.push(k);
            }
        }
        out
    }

    pub fn var_at(&self, k: usize) -> &str {
        &self.entries[k].0
    }

    pub fn mark_used(&self, k: usize) -> RecEnv {
        let mut entries = self.entries.clone();
        entries[k].1 = true;
        RecEnv { entries }
    }

    fn key(&self) -> String {
        let mut s = String::new();
        for (v, used) in &self.entries {
            s.push_str(v);
            if *used {
                s.push('*');
            }
            s.push(',');
        }
        s
    }
}

/// Outcome of a composition: the distinct results plus both counting
/// conventions (structural and up to bound-variable renaming).
#[derive(Clone, Debug)]
pub struct CompositionResult {
    /// One representative per alpha-equivalence class, ordered by
    /// canonical printed form.
    pub results: Vec<Protocol>,
    /// Every structurally distinct derivation result.
    pub raw_results: Vec<Protocol>,
    pub raw_count: usize,
    pub canonical_count: usize,
    /// Rule-level notes explaining an empty result, when there is one.
    pub diagnostics: Option<Vec<String>>,
}

impl CompositionResult {
    pub fn contains_alpha_eq(&self, p: &Protocol) -> bool {
        self.results.iter().any(|r| r.alpha_eq(p))
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ComposeError {
    #[error("invalid input ({operand}): {detail}")]
    InvalidInput { operand: &'static str, detail: String },
    #[error("search budget of {budget} nodes exceeded at {frontier}")]
    BudgetExceeded { budget: usize, frontier: String },
    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),
}

/// Default number of search nodes a composition may visit.
pub const DEFAULT_BUDGET: usize = 1_000_000;

struct Search {
    mode: Mode,
    budget: usize,
    visited: usize,
    memo: HashMap<String, Rc<Vec<Protocol>>>,
}

type SearchResult = Result<Rc<Vec<Protocol>>, ComposeError>;

impl Search {
    fn goal_key(tl: &RecEnv, tr: &RecEnv, a: &Env, s1: &Protocol, s2: &Protocol) -> String {
        let left = format!("{}#{}", tl.key(), print(s1));
        let right = format!("{}#{}", tr.key(), print(s2));
        // orientation-normalised: a goal and its mirror share one entry
        if right < left {
            format!("{right}|{left}|{}", env_to_string(a))
        } else {
            format!("{left}|{right}|{}", env_to_string(a))
        }
    }

    fn search(&mut self, tl: &RecEnv, tr: &RecEnv, a: &Env, s1: &Protocol, s2: &Protocol) -> SearchResult {
        let key = Self::goal_key(tl, tr, a, s1, s2);
        if let Some(hit) = self.memo.get(&key) {
            return Ok(hit.clone());
        }
        self.visited += 1;
        if self.visited > self.budget {
            return Err(ComposeError::BudgetExceeded {
                budget: self.budget,
                frontier: format!("{} ∘ {}", print(s1), print(s2)),
            });
        }
        let mut out: BTreeSet<String> = BTreeSet::new();
        let mut results: Vec<Protocol> = Vec::new();
        let add = |p: Protocol, out: &mut BTreeSet<String>, results: &mut Vec<Protocol>| {
            let k = print(&p);
            if out.insert(k) {
                results.push(p);
            }
        };
        for p in self.oriented(tl, tr, a, s1, s2)? {
            add(p, &mut out, &mut results);
        }
        for p in self.oriented(tr, tl, a, s2, s1)? {
            add(p, &mut out, &mut results);
        }
        results.sort_by_key(print);
        let rc = Rc::new(results);
        self.memo.insert(key, rc.clone());
        Ok(rc)
    }

    /// All rules that consume the head of the left operand, plus the
    /// left/right-symmetric axioms.
    fn oriented(
        &mut self,
        tl: &RecEnv,
        tr: &RecEnv,
        a: &Env,
        s1: &Protocol,
        s2: &Protocol,
    ) -> Result<Vec<Protocol>, ComposeError> {
        let mut out = Vec::new();
        match s1 {
            Protocol::End => {
                if matches!(s2, Protocol::End) {
                    out.push(Protocol::End);
                }
            }
            Protocol::Var(t) => {
                if let Protocol::Var(t2) = s2 {
                    if t == t2 && (tl.contains_used(t) || tr.contains_used(t)) {
                        out.push(Protocol::Var(t.clone()));
                    }
                }
            }
            Protocol::Prefix(act, c) => {
                for r in self.search(tl, tr, a, c, s2)?.iter() {
                    out.push(Protocol::Prefix(act.clone(), Box::new(r.clone())));
                }
            }
            Protocol::Assert(n, c) => {
                let mut a2 = a.clone();
                a2.insert(n.clone());
                for r in self.search(tl, tr, &a2, c, s2)?.iter() {
                    out.push(Protocol::Assert(n.clone(), Box::new(r.clone())));
                }
            }
            Protocol::Require(n, c) => {
                if a.contains(n) {
                    for r in self.search(tl, tr, a, c, s2)?.iter() {
                        out.push(Protocol::Require(n.clone(), Box::new(r.clone())));
                    }
                }
            }
            Protocol::Consume(n, c) => {
                if a.contains(n) {
                    let mut a2 = a.clone();
                    a2.remove(n);
                    for r in self.search(tl, tr, &a2, c, s2)?.iter() {
                        out.push(Protocol::Consume(n.clone(), Box::new(r.clone())));
                    }
                }
            }
            Protocol::Choice(op, brs) => {
                self.branching(tl, tr, a, *op, brs, s2, &mut out)?;
            }
            Protocol::Rec(t1, b1) => {
                if matches!(s2, Protocol::Rec(..)) {
                    // strip the left binder, compose the body against the
                    // intact right recursion, re-bind if the result loops
                    // soundly from here
                    let tl2 = tl.push_unused(t1);
                    for r in self.search(&tl2, tr, a, b1, s2)?.iter() {
                        let candidate = Protocol::Rec(t1.clone(), Box::new(r.clone()));
                        if well_asserted(a, &candidate).is_ok() {
                            out.push(candidate);
                        }
                    }
                }
                // merge this binder onto a previously stripped one
                for k in tr.mergeable_positions() {
                    let merged_var = tr.var_at(k).to_string();
                    let body = b1
                        .substitute(t1, &Protocol::Var(merged_var))
                        .map_err(|e| ComposeError::InternalInvariant(e.to_string()))?;
                    let tr2 = tr.mark_used(k);
                    for r in self.search(tl, &tr2, a, &body, s2)?.iter() {
                        out.push(r.clone());
                    }
                }
                if matches!(s2, Protocol::End)
                    && s1.is_closed()
                    && well_asserted(a, s1).is_ok()
                {
                    out.push(s1.clone());
                }
            }
        }
        Ok(out)
    }

    fn branching(
        &mut self,
        tl: &RecEnv,
        tr: &RecEnv,
        a: &Env,
        op: crate::proto::ChoiceOp,
        brs: &[(String, Protocol)],
        s2: &Protocol,
        out: &mut Vec<Protocol>,
    ) -> Result<(), ComposeError> {
        let mut per_branch: Vec<Rc<Vec<Protocol>>> = Vec::with_capacity(brs.len());
        for (_, b) in brs {
            per_branch.push(self.search(tl, tr, a, b, s2)?);
        }

        if per_branch.iter().all(|r| !r.is_empty()) {
            let lists: Vec<&[Protocol]> = per_branch.iter().map(|r| r.as_slice()).collect();
            for combo in cartesian(&lists) {
                let branches = brs
                    .iter()
                    .zip(combo)
                    .map(|((l, _), r)| (l.clone(), r.clone()))
                    .collect();
                out.push(Protocol::Choice(op, branches));
            }
        } else if self.mode.weak_branching() {
            // branches that cannot absorb the operand pass through
            // unchanged, provided they are well-asserted here and at
            // least one branch does absorb it
            let composable: Vec<bool> = per_branch.iter().map(|r| !r.is_empty()).collect();
            let any = composable.iter().any(|&c| c);
            let rest_ok = brs
                .iter()
                .zip(&composable)
                .filter(|(_, &c)| !c)
                .all(|((_, b), _)| well_asserted(a, b).is_ok());
            if any && rest_ok {
                let lists: Vec<&[Protocol]> = per_branch
                    .iter()
                    .zip(&composable)
                    .filter(|(_, &c)| c)
                    .map(|(r, _)| r.as_slice())
                    .collect();
                for combo in cartesian(&lists) {
                    let mut chosen = combo.into_iter();
                    let branches = brs
                        .iter()
                        .zip(&composable)
                        .map(|((l, b), &c)| {
                            if c {
                                (l.clone(), chosen.next().unwrap().clone())
                            } else {
                                (l.clone(), b.clone())
                            }
                        })
                        .collect();
                    out.push(Protocol::Choice(op, branches));
                }
            }
        }

        if self.mode.correlating_branching() {
            if let Protocol::Choice(op2, brs2) = s2 {
                self.correlate(tl, tr, a, op, brs, *op2, brs2, out)?;
            }
        }
        Ok(())
    }

    /// Pair each branch of the first branching with the compatible
    /// branches of the second, nesting the latter inside the former. Every
    /// branch on both sides must be paired at least once.
    #[allow(clippy::too_many_arguments)]
    fn correlate(
        &mut self,
        tl: &RecEnv,
        tr: &RecEnv,
        a: &Env,
        op: crate::proto::ChoiceOp,
        brs: &[(String, Protocol)],
        op2: crate::proto::ChoiceOp,
        brs2: &[(String, Protocol)],
        out: &mut Vec<Protocol>,
    ) -> Result<(), ComposeError> {
        let mut pairs: Vec<Vec<Rc<Vec<Protocol>>>> = Vec::with_capacity(brs.len());
        for (_, b) in brs {
            let mut row = Vec::with_capacity(brs2.len());
            for (_, b2) in brs2 {
                row.push(self.search(tl, tr, a, b, b2)?);
            }
            pairs.push(row);
        }
        let compatible: Vec<Vec<usize>> = pairs
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, r)| !r.is_empty())
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        if compatible.iter().any(|js| js.is_empty()) {
            return Ok(());
        }
        let covered: BTreeSet<usize> = compatible.iter().flatten().copied().collect();
        if covered.len() != brs2.len() {
            return Ok(());
        }
        // one slot per compatible (i, j); the product ranges over all slots
        let mut slot_lists: Vec<&[Protocol]> = Vec::new();
        for (i, js) in compatible.iter().enumerate() {
            for &j in js {
                slot_lists.push(pairs[i][j].as_slice());
            }
        }
        for combo in cartesian(&slot_lists) {
            let mut chosen = combo.into_iter();
            let branches = compatible
                .iter()
                .enumerate()
                .map(|(i, js)| {
                    let inner = js
                        .iter()
                        .map(|&j| (brs2[j].0.clone(), chosen.next().unwrap().clone()))
                        .collect();
                    (brs[i].0.clone(), Protocol::Choice(op2, inner))
                })
                .collect();
            out.push(Protocol::Choice(op, branches));
        }
        Ok(())
    }
}

fn cartesian<'a, T>(lists: &[&'a [T]]) -> Vec<Vec<&'a T>> {
    let mut acc: Vec<Vec<&T>> = vec![Vec::new()];
    for list in lists {
        let mut next = Vec::with_capacity(acc.len() * list.len());
        for prefix in &acc {
            for item in *list {
                let mut row = prefix.clone();
                row.push(item);
                next.push(row);
            }
        }
        acc = next;
    }
    acc
}

fn check_operand(s: &Protocol, operand: &'static str) -> Result<(), ComposeError> {
    let violations: Vec<Violation> = s.validate();
    if !violations.is_empty() {
        return Err(ComposeError::InvalidInput {
            operand,
            detail: violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "),
        });
    }
    if !s.is_closed() {
        return Err(ComposeError::InvalidInput {
            operand,
            detail: format!(
                "free recursion variables {:?}",
                s.free_vars().into_iter().collect::<Vec<_>>()
            ),
        });
    }
    Ok(())
}

fn empty_diagnostics(a: &Env, s1: &Protocol, s2: &Protocol, mode: Mode) -> Vec<String> {
    let mut notes = Vec::new();
    for (side, s) in [("left", s1), ("right", s2)] {
        match s {
            Protocol::Require(n, _) if !a.contains(n) => {
                notes.push(format!("[require] inapplicable on {side}: {n} ∉ {}", env_to_string(a)))
            }
            Protocol::Consume(n, _) if !a.contains(n) => {
                notes.push(format!("[consume] inapplicable on {side}: {n} ∉ {}", env_to_string(a)))
            }
            Protocol::Rec(..) if !matches!(s2, Protocol::Rec(..)) && side == "left" => notes.push(
                "[rec1] needs both operands recursive; [rec3] needs the other operand spent"
                    .to_string(),
            ),
            _ => {}
        }
    }
    notes.push(format!("no derivation under mode {mode}"));
    notes
}

/// Compose two closed validated protocols under `a`, visiting at most
/// `budget` search nodes.
pub fn compose_with_budget(
    s1: &Protocol,
    s2: &Protocol,
    a: &Env,
    mode: Mode,
    budget: usize,
) -> Result<CompositionResult, ComposeError> {
    check_operand(s1, "left operand")?;
    check_operand(s2, "right operand")?;

    // the rules assume the operands use disjoint bound variables
    let mut taken = s1.bound_vars();
    taken.extend(s1.free_vars());
    let s2 = s2.freshen_binders(&mut taken);

    let mut search = Search { mode, budget, visited: 0, memo: HashMap::new() };
    let raw = search.search(&RecEnv::new(), &RecEnv::new(), a, s1, &s2)?;

    let mut raw_results: Vec<Protocol> = raw.as_ref().clone();
    raw_results.sort_by_key(print);

    // one representative per alpha-class, ordered by canonical form
    let mut classes: Vec<(String, Protocol)> = Vec::new();
    for r in &raw_results {
        let canon = r.alpha_canonicalize();
        let key = print(&canon);
        if !classes.iter().any(|(k, _)| *k == key) {
            classes.push((key, r.clone()));
        }
    }
    classes.sort_by(|(k1, _), (k2, _)| k1.cmp(k2));
    let results: Vec<Protocol> = classes.into_iter().map(|(_, p)| p).collect();

    if a.is_empty() {
        for r in &raw_results {
            if !very_well_asserted(r) {
                return Err(ComposeError::InternalInvariant(format!(
                    "composition result is not very-well-asserted: {}",
                    print(r)
                )));
            }
        }
    }

    let diagnostics =
        if results.is_empty() { Some(empty_diagnostics(a, s1, &s2, mode)) } else { None };

    Ok(CompositionResult {
        raw_count: raw_results.len(),
        canonical_count: results.len(),
        results,
        raw_results,
        diagnostics,
    })
}

/// [`compose_with_budget`] with the default search budget.
pub fn compose(
    s1: &Protocol,
    s2: &Protocol,
    a: &Env,
    mode: Mode,
) -> Result<CompositionResult, ComposeError> {
    compose_with_budget(s1, s2, a, mode, DEFAULT_BUDGET)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assertions::env;
    use crate::syntax::parse_str;

    fn comp(s1: &str, s2: &str, a: &[&str], mode: Mode) -> CompositionResult {
        compose(
            &parse_str(s1).unwrap(),
            &parse_str(s2).unwrap(),
            &env(a.iter().copied()),
            mode,
        )
        .unwrap()
    }

    #[test]
    fn payment_before_dispatch() {
        // the assertions force the unique weave
        let r = comp("?pay.assert(p).end", "consume(p).!item.end", &[], Mode::Strong);
        assert_eq!(r.canonical_count, 1);
        assert_eq!(r.raw_count, 1);
        let expected = parse_str("?pay.assert(p).consume(p).!item.end").unwrap();
        assert_eq!(r.results[0], expected);
    }

    #[test]
    fn action_interleavings() {
        let r = comp("!Int.end", "!String.end", &[], Mode::Strong);
        assert_eq!(r.canonical_count, 2);
        assert!(r.contains_alpha_eq(&parse_str("!Int.!String.end").unwrap()));
        assert!(r.contains_alpha_eq(&parse_str("!String.!Int.end").unwrap()));
    }

    #[test]
    fn branching_distributes() {
        let r = comp("+{l1: end, l2: end}", "!Int.end", &[], Mode::Strong);
        assert_eq!(r.canonical_count, 2);
        assert!(r.contains_alpha_eq(&parse_str("+{l1: !Int.end, l2: !Int.end}").unwrap()));
        assert!(r.contains_alpha_eq(&parse_str("!Int.+{l1: end, l2: end}").unwrap()));
    }

    #[test]
    fn recursion_merges_one_binder() {
        let r = comp("rec t1.!p1.t1", "rec t2.!p2.t2", &[], Mode::Strong);
        assert!(r.raw_results.iter().any(|p| p.alpha_eq(&parse_str("rec t1.!p1.!p2.t1").unwrap())));
        assert!(r.raw_results.iter().any(|p| p.alpha_eq(&parse_str("rec t2.!p2.!p1.t2").unwrap())));
        assert_eq!(r.canonical_count, 2);
        assert_eq!(r.raw_count, 4);
    }

    #[test]
    fn terminating_component_goes_first() {
        let r = comp("rec t.!p1.t", "!p2.end", &[], Mode::Strong);
        assert_eq!(r.canonical_count, 1);
        assert!(r.contains_alpha_eq(&parse_str("!p2.rec t.!p1.t").unwrap()));
        assert!(!r.contains_alpha_eq(&parse_str("rec t.!p1.!p2.t").unwrap()));
        assert!(!r.contains_alpha_eq(&parse_str("rec t.!p1.t").unwrap()));
    }

    #[test]
    fn units() {
        let s = parse_str("rec t.bra{go: !p.t, quit: consume(n).end}").unwrap();
        let a = env(["n"]);
        for (l, r) in [(s.clone(), Protocol::End), (Protocol::End, s.clone())] {
            let out = compose(&l, &r, &a, Mode::Strong).unwrap();
            assert!(out.results.iter().any(|p| *p == s), "unit law failed");
        }
    }

    #[test]
    fn weak_branching_passes_incompatible_branches_through() {
        let r = comp(
            "sel{ok: assert(n).end, ko: end}",
            "require(n).!data.end",
            &[],
            Mode::Weak,
        );
        assert!(r.contains_alpha_eq(
            &parse_str("sel{ok: assert(n).require(n).!data.end, ko: end}").unwrap()
        ));
        // strong mode cannot compose this pair at all
        let strong = comp(
            "sel{ok: assert(n).end, ko: end}",
            "require(n).!data.end",
            &[],
            Mode::Strong,
        );
        assert_eq!(strong.canonical_count, 0);
        assert!(strong.diagnostics.is_some());
    }

    #[test]
    fn correlating_pairs_branches() {
        let s1 = "sel{s1: assert(one).end, s2: assert(two).end}";
        let s2 = "sel{p1: consume(one).end, p2: consume(two).end}";
        let r = comp(s1, s2, &[], Mode::Correlating);
        assert_eq!(r.canonical_count, 2);
        let s12 = parse_str(
            "sel{s1: sel{p1: assert(one).consume(one).end}, s2: sel{p2: assert(two).consume(two).end}}",
        )
        .unwrap();
        assert!(r.contains_alpha_eq(&s12));

        assert_eq!(comp(s1, s2, &[], Mode::Strong).canonical_count, 0);
        assert_eq!(comp(s1, s2, &[], Mode::Weak).canonical_count, 1);
        assert_eq!(comp(s1, s2, &[], Mode::All).canonical_count, 3);
    }

    #[test]
    fn nested_recursion_is_not_flattened() {
        let s1 = "rec t.!p.t";
        let s2 = "rec t1.!q.rec t2.+{l1: t1, l2: t2}";
        for mode in Mode::ALL_MODES {
            let r = comp(s1, s2, &[], mode);
            let flattened = parse_str("rec t.!p.!q.+{l1: t, l2: t}").unwrap();
            assert!(
                !r.results.iter().any(|p| p.alpha_eq(&flattened)),
                "flattening produced under {mode}"
            );
        }
    }

    #[test]
    fn open_or_invalid_inputs_are_rejected() {
        let open = Protocol::prefix(crate::proto::Action::send("p"), Protocol::var("t"));
        let err = compose(&open, &Protocol::End, &Env::new(), Mode::Strong).unwrap_err();
        assert!(matches!(err, ComposeError::InvalidInput { .. }));
    }

    #[test]
    fn budget_is_enforced() {
        let s1 = parse_str("!a.!b.!c.!d.end").unwrap();
        let s2 = parse_str("!e.!f.!g.!h.end").unwrap();
        let err = compose_with_budget(&s1, &s2, &Env::new(), Mode::Strong, 5).unwrap_err();
        assert!(matches!(err, ComposeError::BudgetExceeded { .. }));
    }

    #[test]
    fn mode_monotonicity_on_a_small_pair() {
        let s1 = "sel{a: assert(x).end, b: end}";
        let s2 = "consume(x).end";
        let canon = |m: Mode| {
            comp(s1, s2, &[], m)
                .results
                .iter()
                .map(|p| print(&p.alpha_canonicalize()))
                .collect::<BTreeSet<_>>()
        };
        let strong = canon(Mode::Strong);
        let weak = canon(Mode::Weak);
        let corr = canon(Mode::Correlating);
        let all = canon(Mode::All);
        assert!(strong.is_subset(&weak) && weak.is_subset(&all));
        assert!(strong.is_subset(&corr) && corr.is_subset(&all));
    }
}
