//! Answer validation that shares no code with the solver: its own reduct
//! (choice rules read directly, no complements), a naive fixpoint for the
//! least model, and a reachability walk from the facts.

use std::collections::{BTreeSet, HashSet, VecDeque};

use serde::Serialize;

use crate::ground::{AtomId, GroundAtom, GroundProgram, GroundRule, Value};
use crate::solve::AnswerSet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub passed: bool,
    pub detail: Option<String>,
}

impl CheckResult {
    fn pass() -> Self {
        CheckResult {
            passed: true,
            detail: None,
        }
    }

    fn fail(detail: String) -> Self {
        CheckResult {
            passed: false,
            detail: Some(detail),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub model_id: usize,
    pub rule_satisfaction: CheckResult,
    pub stability: CheckResult,
    pub reachability: CheckResult,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.rule_satisfaction.passed && self.stability.passed && self.reachability.passed
    }
}

/// Validates candidate models of one ground program.
pub struct Validator<'g> {
    g: &'g GroundProgram,
}

struct Candidate {
    member: Vec<bool>,
    /// Atoms of the candidate that the program never mentions.
    foreign: Vec<GroundAtom>,
}

impl<'g> Validator<'g> {
    pub fn new(g: &'g GroundProgram) -> Self {
        Validator { g }
    }

    fn candidate<'a>(&self, atoms: impl IntoIterator<Item = &'a GroundAtom>) -> Candidate {
        let mut member = vec![false; self.g.atoms.len()];
        let mut foreign = Vec::new();
        for a in atoms {
            match self.g.lookup(a) {
                Some(id) => member[id.index()] = true,
                None => foreign.push(a.clone()),
            }
        }
        Candidate { member, foreign }
    }

    pub fn validate<'a>(
        &self,
        model_id: usize,
        atoms: impl IntoIterator<Item = &'a GroundAtom>,
    ) -> ValidationReport {
        let c = self.candidate(atoms);
        let reduct = self.reduct(&c.member);
        ValidationReport {
            model_id,
            rule_satisfaction: self.satisfaction(&c.member),
            stability: self.stability(&c, &reduct),
            reachability: self.reachability(&c, &reduct),
        }
    }

    fn holds(m: &[bool], a: &AtomId) -> bool {
        m[a.index()]
    }

    fn body(m: &[bool], pos: &[AtomId], neg: &[AtomId]) -> bool {
        pos.iter().all(|a| Self::holds(m, a)) && neg.iter().all(|a| !Self::holds(m, a))
    }

    /// Distinct tuples (by value, not key index) with a satisfied element.
    fn tally(m: &[bool], keys: &[Vec<Value>], elements: &[crate::ground::CountElement]) -> usize {
        let mut tuples: HashSet<&[Value]> = HashSet::new();
        for e in elements {
            if Self::body(m, &e.pos, &e.neg) {
                tuples.insert(&keys[e.key]);
            }
        }
        tuples.len()
    }

    fn satisfaction(&self, m: &[bool]) -> CheckResult {
        for r in &self.g.rules {
            let ok = match r {
                GroundRule::Normal { head, pos, neg } => {
                    !Self::body(m, pos, neg) || Self::holds(m, head)
                }
                GroundRule::Constraint { pos, neg } => !Self::body(m, pos, neg),
                GroundRule::Choice {
                    lower,
                    upper,
                    heads,
                    pos,
                    neg,
                } => {
                    let n = heads.iter().filter(|h| Self::holds(m, h)).count() as u64;
                    !Self::body(m, pos, neg) || (u64::from(*lower) <= n && n <= u64::from(*upper))
                }
                GroundRule::Count {
                    head,
                    keys,
                    elements,
                    count,
                    pos,
                    neg,
                } => {
                    !Self::body(m, pos, neg)
                        || Self::tally(m, keys, elements) != *count
                        || Self::holds(m, head)
                }
            };
            if !ok {
                return CheckResult::fail(format!("violated: {}", self.g.rule_text(r)));
            }
        }
        CheckResult::pass()
    }

    /// Definite rules `(head, positive body)` of the reduct.
    fn reduct(&self, m: &[bool]) -> Vec<(AtomId, Vec<AtomId>)> {
        let mut out = Vec::new();
        for r in &self.g.rules {
            let (pos, neg) = r.body();
            if neg.iter().any(|a| Self::holds(m, a)) {
                continue;
            }
            match r {
                GroundRule::Normal { head, .. } => out.push((*head, pos.to_vec())),
                GroundRule::Choice { heads, .. } => {
                    for h in heads.iter().filter(|h| Self::holds(m, h)) {
                        out.push((*h, pos.to_vec()));
                    }
                }
                GroundRule::Count {
                    head,
                    keys,
                    elements,
                    count,
                    ..
                } => {
                    if Self::tally(m, keys, elements) == *count {
                        out.push((*head, pos.to_vec()));
                    }
                }
                GroundRule::Constraint { .. } => {}
            }
        }
        out
    }

    fn stability(&self, c: &Candidate, reduct: &[(AtomId, Vec<AtomId>)]) -> CheckResult {
        if let Some(a) = c.foreign.first() {
            return CheckResult::fail(format!("{a} does not occur in the program"));
        }
        let mut derived = vec![false; c.member.len()];
        loop {
            let mut changed = false;
            for (head, body) in reduct {
                if !derived[head.index()] && body.iter().all(|b| derived[b.index()]) {
                    derived[head.index()] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for (i, (&d, &m)) in derived.iter().zip(&c.member).enumerate() {
            let atom = self.g.atom(AtomId(i as u32));
            if m && !d {
                return CheckResult::fail(format!("{atom} is not derivable from the reduct"));
            }
            if d && !m {
                return CheckResult::fail(format!("{atom} is derivable but missing"));
            }
        }
        CheckResult::pass()
    }

    /// Every atom must be reachable from a fact of the reduct along its
    /// positive dependencies.
    fn reachability(&self, c: &Candidate, reduct: &[(AtomId, Vec<AtomId>)]) -> CheckResult {
        if let Some(a) = c.foreign.first() {
            return CheckResult::fail(format!("{a} is unreachable"));
        }
        let n = c.member.len();
        let mut succ: Vec<Vec<AtomId>> = vec![Vec::new(); n];
        let mut reached = vec![false; n];
        let mut queue = VecDeque::new();
        for (head, body) in reduct {
            if !body.iter().all(|b| c.member[b.index()]) {
                continue;
            }
            if body.is_empty() {
                if !reached[head.index()] {
                    reached[head.index()] = true;
                    queue.push_back(*head);
                }
            } else {
                for b in body {
                    succ[b.index()].push(*head);
                }
            }
        }
        while let Some(a) = queue.pop_front() {
            for &h in &succ[a.index()] {
                if !reached[h.index()] {
                    reached[h.index()] = true;
                    queue.push_back(h);
                }
            }
        }
        match (0..n).find(|&i| c.member[i] && !reached[i]) {
            Some(i) => {
                CheckResult::fail(format!("{} is unreachable", self.g.atom(AtomId(i as u32))))
            }
            None => CheckResult::pass(),
        }
    }
}

/// Validates `m` against the ground program it was computed from.
pub fn validate_answer_set(g: &GroundProgram, m: &AnswerSet, model_id: usize) -> ValidationReport {
    Validator::new(g).validate(model_id, m.symbols(g))
}

/// Validates an arbitrary atom set, e.g. a mutated model.
pub fn validate_atoms(
    g: &GroundProgram,
    atoms: &BTreeSet<GroundAtom>,
    model_id: usize,
) -> ValidationReport {
    Validator::new(g).validate(model_id, atoms)
}
