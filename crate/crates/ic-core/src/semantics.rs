//! Operational semantics: a labelled transition system over configurations
//! `(A, S)` pairing an assertion environment with a protocol, plus the
//! ensemble LTS for two protocols running side by side over a shared
//! environment (no synchronisation between the components).

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use crate::assertions::{env_to_string, Env};
use crate::proto::{Action, ChoiceOp, Protocol};
use crate::syntax::print;

/// ℓ ::= p | +l | assert(n) | require(n) | consume(n)
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransitionLabel {
    Act(Action),
    Choose(ChoiceOp, String),
    Asserted(String),
    Required(String),
    Consumed(String),
}

impl fmt::Display for TransitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransitionLabel::Act(a) => write!(f, "{a}"),
            TransitionLabel::Choose(op, l) => write!(f, "{}({l})", op.keyword()),
            TransitionLabel::Asserted(n) => write!(f, "assert({n})"),
            TransitionLabel::Required(n) => write!(f, "require({n})"),
            TransitionLabel::Consumed(n) => write!(f, "consume({n})"),
        }
    }
}

/// A configuration `(A, S)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Config {
    pub env: Env,
    pub proto: Protocol,
}

impl Config {
    pub fn new(env: Env, proto: Protocol) -> Self {
        Config { env, proto }
    }

    pub fn initial(proto: Protocol) -> Self {
        Config { env: Env::new(), proto }
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", env_to_string(&self.env), print(&self.proto))
    }
}

/// An ensemble configuration `(A, S)` or `(A, S1 ∥ S2)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EnsembleConfig {
    pub env: Env,
    pub left: Protocol,
    pub right: Option<Protocol>,
}

impl EnsembleConfig {
    pub fn single(env: Env, proto: Protocol) -> Self {
        EnsembleConfig { env, left: proto, right: None }
    }

    pub fn pair(env: Env, left: Protocol, right: Protocol) -> Self {
        EnsembleConfig { env, left, right: Some(right) }
    }
}

impl fmt::Display for EnsembleConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.right {
            None => write!(f, "({}, {})", env_to_string(&self.env), print(&self.left)),
            Some(r) => write!(
                f,
                "({}, {} ∥ {})",
                env_to_string(&self.env),
                print(&self.left),
                print(r)
            ),
        }
    }
}

/// All successors of a configuration. Pure; empty when no rule applies.
pub fn step(c: &Config) -> Vec<(TransitionLabel, Config)> {
    step_proto(&c.env, &c.proto)
}

fn step_proto(a: &Env, s: &Protocol) -> Vec<(TransitionLabel, Config)> {
    match s {
        Protocol::End | Protocol::Var(_) => Vec::new(),
        Protocol::Prefix(act, c) => vec![(
            TransitionLabel::Act(act.clone()),
            Config::new(a.clone(), c.as_ref().clone()),
        )],
        Protocol::Choice(op, brs) => brs
            .iter()
            .map(|(l, b)| {
                (TransitionLabel::Choose(*op, l.clone()), Config::new(a.clone(), b.clone()))
            })
            .collect(),
        Protocol::Assert(n, c) => {
            let mut a2 = a.clone();
            a2.insert(n.clone());
            vec![(TransitionLabel::Asserted(n.clone()), Config::new(a2, c.as_ref().clone()))]
        }
        Protocol::Require(n, c) => {
            if a.contains(n) {
                vec![(
                    TransitionLabel::Required(n.clone()),
                    Config::new(a.clone(), c.as_ref().clone()),
                )]
            } else {
                Vec::new()
            }
        }
        Protocol::Consume(n, c) => {
            if a.contains(n) {
                let mut a2 = a.clone();
                a2.remove(n);
                vec![(TransitionLabel::Consumed(n.clone()), Config::new(a2, c.as_ref().clone()))]
            } else {
                Vec::new()
            }
        }
        Protocol::Rec(t, body) => step_proto(a, body)
            .into_iter()
            .map(|(l, succ)| {
                let cont = succ
                    .proto
                    .substitute(t, s)
                    .expect("validated protocols cannot capture on unfolding");
                (l, Config::new(succ.env, cont))
            })
            .collect(),
    }
}

/// Term-level successors: the steps a protocol could take under some
/// sufficiently rich environment. `require` and `consume` always fire;
/// only the continuation term and the label are reported.
pub fn potential_steps(s: &Protocol) -> Vec<(TransitionLabel, Protocol)> {
    match s {
        Protocol::End | Protocol::Var(_) => Vec::new(),
        Protocol::Prefix(act, c) => {
            vec![(TransitionLabel::Act(act.clone()), c.as_ref().clone())]
        }
        Protocol::Choice(op, brs) => brs
            .iter()
            .map(|(l, b)| (TransitionLabel::Choose(*op, l.clone()), b.clone()))
            .collect(),
        Protocol::Assert(n, c) => {
            vec![(TransitionLabel::Asserted(n.clone()), c.as_ref().clone())]
        }
        Protocol::Require(n, c) => {
            vec![(TransitionLabel::Required(n.clone()), c.as_ref().clone())]
        }
        Protocol::Consume(n, c) => {
            vec![(TransitionLabel::Consumed(n.clone()), c.as_ref().clone())]
        }
        Protocol::Rec(t, body) => potential_steps(body)
            .into_iter()
            .map(|(l, cont)| {
                let cont = cont
                    .substitute(t, s)
                    .expect("validated protocols cannot capture on unfolding");
                (l, cont)
            })
            .collect(),
    }
}

/// Successors of an ensemble: the union of left-component and
/// right-component steps over the shared environment.
pub fn ensemble_step(c: &EnsembleConfig) -> Vec<(TransitionLabel, EnsembleConfig)> {
    match &c.right {
        None => step(&Config::new(c.env.clone(), c.left.clone()))
            .into_iter()
            .map(|(l, s)| (l, EnsembleConfig::single(s.env, s.proto)))
            .collect(),
        Some(right) => {
            let mut out: Vec<(TransitionLabel, EnsembleConfig)> = Vec::new();
            for (l, s) in step_proto(&c.env, &c.left) {
                out.push((l, EnsembleConfig::pair(s.env, s.proto, right.clone())));
            }
            for (l, s) in step_proto(&c.env, right) {
                out.push((l, EnsembleConfig::pair(s.env, c.left.clone(), s.proto)));
            }
            out
        }
    }
}

/// A finite fragment of an LTS: nodes keyed by structural identity, the
/// successor edges between explored nodes, and whether exploration hit the
/// node cap before finishing.
#[derive(Clone, Debug)]
pub struct LtsGraph<N> {
    pub nodes: Vec<N>,
    pub edges: Vec<(usize, TransitionLabel, usize)>,
    pub initial: usize,
    pub truncated: bool,
}

impl<N: Clone + Eq + Hash> LtsGraph<N> {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Outgoing edges per node.
    pub fn successors(&self) -> Vec<Vec<(TransitionLabel, usize)>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (from, l, to) in &self.edges {
            out[*from].push((l.clone(), *to));
        }
        out
    }
}

/// Breadth-first exploration with memoisation on structural identity,
/// stopping after `cap` distinct nodes.
pub fn explore<N, F>(init: N, cap: usize, mut succ: F) -> LtsGraph<N>
where
    N: Clone + Eq + Hash,
    F: FnMut(&N) -> Vec<(TransitionLabel, N)>,
{
    let mut nodes: Vec<N> = vec![init.clone()];
    let mut index: HashMap<N, usize> = HashMap::from([(init, 0)]);
    let mut edges = Vec::new();
    let mut truncated = false;
    let mut frontier = 0usize;
    while frontier < nodes.len() {
        let node = nodes[frontier].clone();
        for (label, next) in succ(&node) {
            let to = match index.get(&next) {
                Some(&i) => i,
                None => {
                    if nodes.len() >= cap {
                        truncated = true;
                        continue;
                    }
                    let i = nodes.len();
                    nodes.push(next.clone());
                    index.insert(next, i);
                    i
                }
            };
            edges.push((frontier, label, to));
        }
        frontier += 1;
    }
    LtsGraph { nodes, edges, initial: 0, truncated }
}

/// Explore the single-protocol LTS from a configuration.
pub fn explore_config(init: Config, cap: usize) -> LtsGraph<Config> {
    explore(init, cap, |c| step(c))
}

/// Explore the ensemble LTS from an ensemble configuration.
pub fn explore_ensemble(init: EnsembleConfig, cap: usize) -> LtsGraph<EnsembleConfig> {
    explore(init, cap, |c| ensemble_step(c))
}

/// A configuration is stuck if its protocol is not `end` and it has no
/// successor.
pub fn is_stuck(c: &Config) -> bool {
    c.proto != Protocol::End && step(c).is_empty()
}

/// Verdict of a bounded progress analysis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProgressResult {
    Holds,
    /// A stuck configuration is reachable; the witness is the label path
    /// leading to it.
    Fails { witness: Vec<TransitionLabel>, stuck: Config },
    /// The exploration cap was hit before the question was settled.
    Inconclusive,
}

impl ProgressResult {
    pub fn holds(&self) -> bool {
        matches!(self, ProgressResult::Holds)
    }
}

/// Progress from an arbitrary starting environment (tooling entry point).
pub fn has_progress_from(a: &Env, s: &Protocol, cap: usize) -> ProgressResult {
    let graph = explore_config(Config::new(a.clone(), s.clone()), cap);
    // parent pointers for witness reconstruction
    let mut parent: Vec<Option<(usize, TransitionLabel)>> = vec![None; graph.nodes.len()];
    for (from, l, to) in &graph.edges {
        if *to != graph.initial && parent[*to].is_none() {
            parent[*to] = Some((*from, l.clone()));
        }
    }
    for (i, node) in graph.nodes.iter().enumerate() {
        if is_stuck(node) {
            let mut witness = Vec::new();
            let mut cur = i;
            while let Some((prev, label)) = &parent[cur] {
                witness.push(label.clone());
                cur = *prev;
            }
            witness.reverse();
            return ProgressResult::Fails { witness, stuck: node.clone() };
        }
    }
    if graph.truncated {
        ProgressResult::Inconclusive
    } else {
        ProgressResult::Holds
    }
}

/// Progress per the definition: every configuration reachable from
/// `(∅, s)` is not stuck.
pub fn has_progress(s: &Protocol, cap: usize) -> ProgressResult {
    has_progress_from(&Env::new(), s, cap)
}

/// Default exploration cap used by the command-line tools.
pub const DEFAULT_CAP: usize = 10_000;

/// Line-oriented trace of an explored graph: one `label ⊢ env ⊢ protocol`
/// line per edge, target side.
pub fn trace_lines(graph: &LtsGraph<Config>) -> Vec<String> {
    graph
        .edges
        .iter()
        .map(|(_, l, to)| {
            let c = &graph.nodes[*to];
            format!("{l} ⊢ {} ⊢ {}", env_to_string(&c.env), print(&c.proto))
        })
        .collect()
}

/// Ensemble variant of [`trace_lines`].
pub fn ensemble_trace_lines(graph: &LtsGraph<EnsembleConfig>) -> Vec<String> {
    graph
        .edges
        .iter()
        .map(|(_, l, to)| {
            let c = &graph.nodes[*to];
            let proto = match &c.right {
                None => print(&c.left),
                Some(r) => format!("{} ∥ {}", print(&c.left), print(r)),
            };
            format!("{l} ⊢ {} ⊢ {}", env_to_string(&c.env), proto)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assertions::env;
    use crate::syntax::parse_str;

    fn cfg(names: &[&str], text: &str) -> Config {
        Config::new(env(names.iter().copied()), parse_str(text).unwrap())
    }

    #[test]
    fn assert_step_extends_env() {
        let succs = step(&cfg(&[], "assert(n).end"));
        assert_eq!(succs.len(), 1);
        let (l, c) = &succs[0];
        assert_eq!(*l, TransitionLabel::Asserted("n".into()));
        assert_eq!(c.env, env(["n"]));
        assert_eq!(c.proto, Protocol::End);
    }

    #[test]
    fn require_blocks_without_atom() {
        assert!(step(&cfg(&[], "require(n).end")).is_empty());
        let succs = step(&cfg(&["n"], "require(n).end"));
        assert_eq!(succs.len(), 1);
        assert_eq!(succs[0].1.env, env(["n"]));
    }

    #[test]
    fn consume_removes_atom() {
        let succs = step(&cfg(&["n"], "consume(n).end"));
        assert_eq!(succs.len(), 1);
        assert_eq!(succs[0].0, TransitionLabel::Consumed("n".into()));
        assert!(succs[0].1.env.is_empty());
    }

    #[test]
    fn rec_step_substitutes_binder_back() {
        // successors of (∅, rec t.!p.t) by hand: one !p step into the
        // one-time unfolding
        let c = cfg(&[], "rec t.!p.t");
        let succs = step(&c);
        assert_eq!(succs.len(), 1);
        // the continuation is t with the recursion substituted back in
        assert_eq!(succs[0].1.proto, c.proto);
        let unfolded = c.proto.unfold().unwrap();

        // structural equivalence: stepping the unfolding agrees
        let via_unfold = step(&Config::new(Env::new(), unfolded));
        assert_eq!(succs[0].0, via_unfold[0].0);
        assert_eq!(succs[0].1, via_unfold[0].1);
    }

    #[test]
    fn ensemble_interleaves_over_shared_env() {
        let e = EnsembleConfig::pair(
            Env::new(),
            parse_str("assert(n).end").unwrap(),
            parse_str("require(n).end").unwrap(),
        );
        let succs = ensemble_step(&e);
        // only the left assert fires from the empty environment
        assert_eq!(succs.len(), 1);
        let (_, next) = &succs[0];
        assert_eq!(next.env, env(["n"]));
        assert_eq!(next.left, Protocol::End);

        let succs2 = ensemble_step(next);
        assert_eq!(succs2.len(), 1);
        assert_eq!(succs2[0].0, TransitionLabel::Required("n".into()));

        let done = EnsembleConfig::pair(Env::new(), Protocol::End, Protocol::End);
        assert!(ensemble_step(&done).is_empty());
    }

    #[test]
    fn explore_loops_back() {
        // the recursion steps straight back to itself
        let graph = explore_config(cfg(&[], "rec t.!p.t"), 100);
        assert_eq!(graph.node_count(), 1);
        assert_eq!(graph.edge_count(), 1);
        assert!(!graph.truncated);

        let single = explore_config(cfg(&[], "end"), 100);
        assert_eq!(single.node_count(), 1);
        assert_eq!(single.edge_count(), 0);
    }

    #[test]
    fn explore_respects_cap() {
        // an infinite-state protocol cannot exist here, but a cap smaller
        // than the state space must flag truncation
        let graph = explore_config(cfg(&[], "!a.!b.!c.end"), 2);
        assert!(graph.truncated);
        assert_eq!(graph.node_count(), 2);
    }

    #[test]
    fn stuck_states() {
        assert!(is_stuck(&cfg(&[], "require(n).end")));
        assert!(!is_stuck(&cfg(&[], "end")));
        assert!(!is_stuck(&cfg(&["n"], "require(n).end")));
    }

    #[test]
    fn progress_verdicts() {
        assert!(has_progress(&parse_str("rec t.!p.t").unwrap(), 100).holds());
        match has_progress(&parse_str("!a.require(n).end").unwrap(), 100) {
            ProgressResult::Fails { witness, stuck } => {
                assert_eq!(witness.len(), 1);
                assert!(is_stuck(&stuck));
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn trace_format() {
        let graph = explore_config(cfg(&[], "assert(n).end"), 10);
        let lines = trace_lines(&graph);
        assert_eq!(lines, vec!["assert(n) ⊢ {n} ⊢ end".to_string()]);
    }
}
