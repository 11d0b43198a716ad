//! Executable correctness checks for compositions: behaviour preservation
//! against the ensemble semantics (simulation), and two fairness notions
//! relating a composition to its components.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use crate::assertions::Env;
use crate::proto::Protocol;
use crate::semantics::{
    explore_config, explore_ensemble, potential_steps, step, Config,
    EnsembleConfig, TransitionLabel,
};

/// Longest label sequence considered when searching for an enabling run.
pub const RVEC_CAP: usize = 64;

/// Default coinductive depth for the fairness checks.
pub const DEFAULT_DEPTH: usize = 8;

#[derive(Debug, Clone, thiserror::Error)]
pub enum VerifyError {
    #[error("state space of the {side} exceeded the cap of {cap} nodes (inconclusive)")]
    CapExceeded { side: &'static str, cap: usize },
}

/// A failed simulation: the label path driven so far and the label the
/// right-hand side could not answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimCounterexample {
    pub path: Vec<TransitionLabel>,
    pub blocked: TransitionLabel,
}

impl fmt::Display for SimCounterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path: Vec<String> = self.path.iter().map(|l| l.to_string()).collect();
        write!(f, "after [{}] label {} is unmatched", path.join(", "), self.blocked)
    }
}

/// Result of a simulation check. On success the relation witnessing the
/// simulation (restricted to explored states) is included.
#[derive(Clone, Debug)]
pub struct SimulationWitness {
    pub verdict: bool,
    pub relation: Option<Vec<(Config, EnsembleConfig)>>,
    pub counterexample: Option<SimCounterexample>,
}

/// Greatest-fixpoint simulation check: does every step of `lhs` have a
/// matching step of `rhs`, coinductively?
pub fn simulates(
    lhs: &Config,
    rhs: &EnsembleConfig,
    cap: usize,
) -> Result<SimulationWitness, VerifyError> {
    let lg = explore_config(lhs.clone(), cap);
    if lg.truncated {
        return Err(VerifyError::CapExceeded { side: "left-hand side", cap });
    }
    let rg = explore_ensemble(rhs.clone(), cap);
    if rg.truncated {
        return Err(VerifyError::CapExceeded { side: "right-hand side", cap });
    }
    let lsucc = lg.successors();
    let rsucc = rg.successors();
    let n = lg.nodes.len();
    let m = rg.nodes.len();

    // start from the full relation and delete pairs violating the
    // transfer condition until a fixpoint; each deletion gets a strictly
    // increasing sequence number so a counterexample can be replayed
    let mut alive = vec![vec![true; m]; n];
    let mut reason: Vec<Vec<Option<(TransitionLabel, usize, usize)>>> = vec![vec![None; m]; n];
    let mut seq = 0usize;
    loop {
        let mut changed = false;
        for p in 0..n {
            for q in 0..m {
                if !alive[p][q] {
                    continue;
                }
                let violation = lsucc[p].iter().find(|(l, p2)| {
                    !rsucc[q].iter().any(|(lr, q2)| lr == l && alive[*p2][*q2])
                });
                if let Some((l, p2)) = violation {
                    alive[p][q] = false;
                    seq += 1;
                    reason[p][q] = Some((l.clone(), *p2, seq));
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    if alive[lg.initial][rg.initial] {
        let mut relation = Vec::new();
        for (p, row) in alive.iter().enumerate() {
            for (q, ok) in row.iter().enumerate() {
                if *ok {
                    relation.push((lg.nodes[p].clone(), rg.nodes[q].clone()));
                }
            }
        }
        return Ok(SimulationWitness { verdict: true, relation: Some(relation), counterexample: None });
    }

    // replay the deletion chain from the initial pair; every defender
    // reply was already dead with a smaller sequence number, so this
    // terminates
    let mut path = Vec::new();
    let (mut p, mut q) = (lg.initial, rg.initial);
    let blocked = loop {
        let (l, p2, rank) = reason[p][q].clone().expect("dead pair has a reason");
        let next_q = rsucc[q]
            .iter()
            .filter(|(lr, _)| *lr == l)
            .map(|(_, q2)| *q2)
            .min_by_key(|q2| reason[p2][*q2].as_ref().map(|(_, _, r)| *r).unwrap_or(usize::MAX));
        match next_q {
            None => break l,
            Some(q2) => {
                debug_assert!(reason[p2][q2].as_ref().is_some_and(|(_, _, r)| *r < rank));
                path.push(l);
                p = p2;
                q = q2;
            }
        }
    };
    Ok(SimulationWitness {
        verdict: false,
        relation: None,
        counterexample: Some(SimCounterexample { path, blocked }),
    })
}

/// Witness of a fairness failure: component `component` has a step
/// `blocked` that the composition can never perform (for strong fairness,
/// not after the adversarial trace `trace`).
#[derive(Clone, Debug)]
pub struct FairnessWitness {
    pub component: usize,
    pub blocked: TransitionLabel,
    pub trace: Vec<TransitionLabel>,
    pub state: String,
}

impl fmt::Display for FairnessWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.trace.is_empty() {
            write!(f, "component {} blocked on {} at {}", self.component, self.blocked, self.state)
        } else {
            let tr: Vec<String> = self.trace.iter().map(|l| l.to_string()).collect();
            write!(
                f,
                "component {} blocked on {} after [{}] at {}",
                self.component,
                self.blocked,
                tr.join(", "),
                self.state
            )
        }
    }
}

#[derive(Clone, Debug)]
pub enum FairVerdict {
    HoldsToDepth(usize),
    Fails(FairnessWitness),
}

#[derive(Clone, Debug)]
pub struct FairnessReport {
    pub verdict: FairVerdict,
    pub depth: usize,
}

impl FairnessReport {
    pub fn holds(&self) -> bool {
        matches!(self.verdict, FairVerdict::HoldsToDepth(_))
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct FairKey {
    env: Vec<String>,
    s: Protocol,
    s0: Protocol,
    s1: Protocol,
}

impl FairKey {
    fn new(a: &Env, s: &Protocol, s0: &Protocol, s1: &Protocol) -> Self {
        FairKey {
            env: a.iter().cloned().collect(),
            s: s.clone(),
            s0: s0.clone(),
            s1: s1.clone(),
        }
    }
}

struct FairChecker {
    strong: bool,
    depth: usize,
    proved_false: HashMap<FairKey, FairnessWitness>,
    in_progress: HashSet<FairKey>,
    grounded_true: HashSet<FairKey>,
}

/// Outcome plus the set of in-progress assumptions the proof leaned on.
type FairOutcome = Result<HashSet<FairKey>, FairnessWitness>;

impl FairChecker {
    fn check(
        &mut self,
        a: &Env,
        s: &Protocol,
        s0: &Protocol,
        s1: &Protocol,
        depth: usize,
    ) -> FairOutcome {
        let key = FairKey::new(a, s, s0, s1);
        if self.grounded_true.contains(&key) {
            return Ok(HashSet::new());
        }
        if let Some(w) = self.proved_false.get(&key) {
            return Err(w.clone());
        }
        if self.in_progress.contains(&key) {
            // coinductive success: this state is already being justified
            return Ok(HashSet::from([key]));
        }
        if depth == 0 {
            // optimistic cut-off; the verdict reports the depth reached
            return Ok(HashSet::new());
        }
        self.in_progress.insert(key.clone());
        let result = self.check_components(a, s, s0, s1, depth);
        self.in_progress.remove(&key);
        match result {
            Ok(mut assumed) => {
                assumed.remove(&key);
                if assumed.is_empty() {
                    self.grounded_true.insert(key);
                }
                Ok(assumed)
            }
            Err(w) => {
                self.proved_false.insert(key, w.clone());
                Err(w)
            }
        }
    }

    fn check_components(
        &mut self,
        a: &Env,
        s: &Protocol,
        s0: &Protocol,
        s1: &Protocol,
        depth: usize,
    ) -> FairOutcome {
        let mut assumed = HashSet::new();
        for i in 0..2 {
            let (comp, other) = if i == 0 { (s0, s1) } else { (s1, s0) };
            // strong fairness quantifies over the steps a component could
            // take under some environment; plain fairness only over the
            // steps enabled under the current one
            let comp_steps: Vec<(TransitionLabel, Protocol)> = if self.strong {
                potential_steps(comp)
            } else {
                step(&Config::new(a.clone(), comp.clone()))
                    .into_iter()
                    .map(|(l, c)| (l, c.proto))
                    .collect()
            };
            for (label, comp_next) in comp_steps {
                let sub = if self.strong {
                    self.strong_step(a, s, i, &label, &comp_next, other, depth)
                } else {
                    self.fair_step(a, s, i, &label, &comp_next, other, depth)
                };
                assumed.extend(sub?);
            }
        }
        Ok(assumed)
    }

    /// There must be some run `r` of the other component such that the
    /// composition performs `r` then `label`, with the residue fair.
    #[allow(clippy::too_many_arguments)]
    fn fair_step(
        &mut self,
        a: &Env,
        s: &Protocol,
        i: usize,
        label: &TransitionLabel,
        comp_next: &Protocol,
        other: &Protocol,
        depth: usize,
    ) -> FairOutcome {
        let start = (Config::new(a.clone(), other.clone()), Config::new(a.clone(), s.clone()));
        let mut visited: HashSet<(Config, Config)> = HashSet::from([start.clone()]);
        let mut queue: VecDeque<(Config, Config, usize)> = VecDeque::from([(start.0, start.1, 0)]);
        while let Some((other_cfg, s_cfg, len)) = queue.pop_front() {
            if let Some((_, s_after)) = step(&s_cfg).into_iter().find(|(l, _)| l == label) {
                let (n0, n1) = if i == 0 {
                    (comp_next.clone(), other_cfg.proto.clone())
                } else {
                    (other_cfg.proto.clone(), comp_next.clone())
                };
                match self.check(&s_after.env, &s_after.proto, &n0, &n1, depth - 1) {
                    Ok(assumed) => return Ok(assumed),
                    Err(_) => {} // try a longer enabling run
                }
            }
            if len >= RVEC_CAP {
                continue;
            }
            for (l, other_next) in step(&other_cfg) {
                if let Some((_, s_next)) = step(&s_cfg).into_iter().find(|(sl, _)| *sl == l) {
                    let pair = (other_next.clone(), s_next.clone());
                    if visited.insert(pair) {
                        queue.push_back((other_next, s_next, len + 1));
                    }
                }
            }
        }
        Err(FairnessWitness {
            component: i,
            blocked: label.clone(),
            trace: Vec::new(),
            state: format!("({}, {})", crate::assertions::env_to_string(a), crate::syntax::print(s)),
        })
    }

    /// For every run `r` of the other component, some prefix or extension
    /// `r'` of `r` must enable `label` in the composition, with the
    /// residue strongly fair.
    #[allow(clippy::too_many_arguments)]
    fn strong_step(
        &mut self,
        a: &Env,
        s: &Protocol,
        i: usize,
        label: &TransitionLabel,
        comp_next: &Protocol,
        other: &Protocol,
        depth: usize,
    ) -> FairOutcome {
        let traces = enumerate_traces(&Config::new(a.clone(), other.clone()), self.depth);
        let mut assumed = HashSet::new();
        for (rvec, _) in &traces {
            // the adversarial run is a real run; the answering run r' may
            // still be empty (a prefix of any r)
            if rvec.is_empty() {
                continue;
            }
            match self.strong_one_trace(a, s, i, label, comp_next, other, rvec, depth) {
                Ok(sub) => assumed.extend(sub),
                Err(w) => return Err(w),
            }
        }
        Ok(assumed)
    }

    #[allow(clippy::too_many_arguments)]
    fn strong_one_trace(
        &mut self,
        a: &Env,
        s: &Protocol,
        i: usize,
        label: &TransitionLabel,
        comp_next: &Protocol,
        other: &Protocol,
        rvec: &[TransitionLabel],
        depth: usize,
    ) -> FairOutcome {
        // candidate r' runs: prefixes of r, then bounded extensions of r
        let mut candidates: Vec<Vec<TransitionLabel>> =
            (0..=rvec.len()).map(|k| rvec[..k].to_vec()).collect();
        if let Some(end_cfg) = run_labels(&Config::new(a.clone(), other.clone()), rvec) {
            for (ext, _) in enumerate_traces(&end_cfg, self.depth) {
                if !ext.is_empty() {
                    let mut full = rvec.to_vec();
                    full.extend(ext);
                    candidates.push(full);
                }
            }
        }
        for rprime in candidates {
            let Some(other_after) = run_labels(&Config::new(a.clone(), other.clone()), &rprime)
            else {
                continue;
            };
            let Some(s_mid) = run_labels(&Config::new(a.clone(), s.clone()), &rprime) else {
                continue;
            };
            let Some((_, s_after)) = step(&s_mid).into_iter().find(|(l, _)| l == label) else {
                continue;
            };
            let (n0, n1) = if i == 0 {
                (comp_next.clone(), other_after.proto.clone())
            } else {
                (other_after.proto.clone(), comp_next.clone())
            };
            if let Ok(sub) = self.check(&s_after.env, &s_after.proto, &n0, &n1, depth - 1) {
                return Ok(sub);
            }
        }
        Err(FairnessWitness {
            component: i,
            blocked: label.clone(),
            trace: rvec.to_vec(),
            state: format!("({}, {})", crate::assertions::env_to_string(a), crate::syntax::print(s)),
        })
    }
}

/// All label sequences of length at most `max_len` performable from `c`.
fn enumerate_traces(c: &Config, max_len: usize) -> Vec<(Vec<TransitionLabel>, Config)> {
    let mut out = vec![(Vec::new(), c.clone())];
    let mut frontier = vec![(Vec::new(), c.clone())];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for (trace, cfg) in &frontier {
            for (l, succ) in step(cfg) {
                let mut t = trace.clone();
                t.push(l);
                next.push((t, succ));
            }
        }
        if next.is_empty() {
            break;
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Run a label sequence from a configuration; the LTS is deterministic
/// per label, so the end configuration is unique when the run exists.
fn run_labels(c: &Config, labels: &[TransitionLabel]) -> Option<Config> {
    let mut cur = c.clone();
    for l in labels {
        let (_, next) = step(&cur).into_iter().find(|(sl, _)| sl == l)?;
        cur = next;
    }
    Some(cur)
}

fn run_fairness(
    strong: bool,
    s: &Protocol,
    s0: &Protocol,
    s1: &Protocol,
    a: &Env,
    depth: usize,
) -> FairnessReport {
    let mut checker = FairChecker {
        strong,
        depth,
        proved_false: HashMap::new(),
        in_progress: HashSet::new(),
        grounded_true: HashSet::new(),
    };
    match checker.check(a, s, s0, s1, depth) {
        Ok(_) => FairnessReport { verdict: FairVerdict::HoldsToDepth(depth), depth },
        Err(w) => FairnessReport { verdict: FairVerdict::Fails(w), depth },
    }
}

/// Bounded coinductive check that `s` is a fair composition of `s0` and
/// `s1` on `a`: every step either component could take is eventually
/// enabled along some run of the composition.
pub fn check_fair(
    s: &Protocol,
    s0: &Protocol,
    s1: &Protocol,
    a: &Env,
    depth: usize,
) -> FairnessReport {
    run_fairness(false, s, s0, s1, a, depth)
}

/// Bounded check of strong fairness: every step either component could
/// take stays enabled along every compatible run of the other component.
pub fn check_strong_fair(
    s: &Protocol,
    s0: &Protocol,
    s1: &Protocol,
    a: &Env,
    depth: usize,
) -> FairnessReport {
    run_fairness(true, s, s0, s1, a, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assertions::env;
    use crate::proto::ChoiceOp;
    use crate::syntax::parse_str;

    fn p(text: &str) -> Protocol {
        parse_str(text).unwrap()
    }

    #[test]
    fn simulation_by_idle_ensemble() {
        for text in ["end", "!p.end", "rec t.!p.t", "sel{a: assert(n).end, b: end}"] {
            let s = p(text);
            let lhs = Config::initial(s.clone());
            let rhs = EnsembleConfig::pair(Env::new(), s.clone(), Protocol::End);
            let w = simulates(&lhs, &rhs, 1000).unwrap();
            assert!(w.verdict, "{text} not simulated by itself ∥ end");
            assert!(w.relation.is_some());
        }
    }

    #[test]
    fn simulation_counterexample() {
        let lhs = Config::initial(p("!p.end"));
        let rhs = EnsembleConfig::pair(Env::new(), Protocol::End, Protocol::End);
        let w = simulates(&lhs, &rhs, 1000).unwrap();
        assert!(!w.verdict);
        let cex = w.counterexample.unwrap();
        assert_eq!(cex.blocked, TransitionLabel::Act(crate::proto::Action::send("p")));
        assert!(cex.path.is_empty());
    }

    #[test]
    fn simulation_sees_env_coupling() {
        // the composition requires n only after asserting it; the
        // ensemble matches because both share the environment
        let lhs = Config::initial(p("assert(n).require(n).end"));
        let rhs = EnsembleConfig::pair(Env::new(), p("assert(n).end"), p("require(n).end"));
        assert!(simulates(&lhs, &rhs, 1000).unwrap().verdict);
    }

    #[test]
    fn fair_holds_on_weak_branching_example() {
        let s_a = p("sel{ok: assert(n).end, ko: end}");
        let s_b = p("require(n).end");
        let s_ab = p("sel{ok: assert(n).require(n).end, ko: end}");
        let report = check_fair(&s_ab, &s_a, &s_b, &Env::new(), DEFAULT_DEPTH);
        assert!(report.holds(), "{:?}", report.verdict);
    }

    #[test]
    fn strong_fairness_fails_on_weak_branching_example() {
        let s_a = p("sel{ok: assert(n).end, ko: end}");
        let s_b = p("require(n).end");
        let s_ab = p("sel{ok: assert(n).require(n).end, ko: end}");
        let report = check_strong_fair(&s_ab, &s_a, &s_b, &Env::new(), DEFAULT_DEPTH);
        match report.verdict {
            FairVerdict::Fails(w) => {
                assert_eq!(w.blocked, TransitionLabel::Required("n".into()));
                assert_eq!(w.trace.first(), Some(&TransitionLabel::Choose(ChoiceOp::Select, "ko".into())));
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn unfair_merge_is_detected() {
        // the loop never performs the second component's action
        let s = p("rec t.!p1.t");
        let s0 = p("rec t.!p1.t");
        let s1 = p("!p2.end");
        let report = check_fair(&s, &s0, &s1, &Env::new(), DEFAULT_DEPTH);
        match report.verdict {
            FairVerdict::Fails(w) => {
                assert_eq!(w.component, 1);
                assert_eq!(w.blocked, TransitionLabel::Act(crate::proto::Action::send("p2")));
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn fair_and_strongly_fair_on_recursive_merge() {
        let s = p("rec t.!p1.!p2.t");
        let s0 = p("rec t.!p1.t");
        let s1 = p("rec u.!p2.u");
        assert!(check_fair(&s, &s0, &s1, &Env::new(), DEFAULT_DEPTH).holds());
        assert!(check_strong_fair(&s, &s0, &s1, &Env::new(), DEFAULT_DEPTH).holds());
    }

    #[test]
    fn trivially_fair_on_end() {
        assert!(check_strong_fair(&Protocol::End, &Protocol::End, &Protocol::End, &Env::new(), 4)
            .holds());
    }

    #[test]
    fn fairness_with_nonempty_env() {
        let s0 = p("consume(n).!p.end");
        let s1 = p("!q.end");
        let s = p("consume(n).!p.!q.end");
        let a = env(["n"]);
        assert!(check_fair(&s, &s0, &s1, &a, DEFAULT_DEPTH).holds());
    }
}
