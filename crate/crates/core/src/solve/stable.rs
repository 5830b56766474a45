//! Stability by definition: reduct, least model, and the checks the reduct
//! does not cover (constraints, choice bounds).
//!
//! Choice rules are read through the usual normalization: every head `h` of
//! a choice instance `k` gets a hidden complement `h*` with the rules
//! `h :- B, not h*` and `h* :- B, not h`. Complement ids follow the original
//! atoms, numbered by choice instance and head position.

use std::collections::BTreeSet;
use std::fmt;

use crate::ground::{count_keys, AtomId, CountElement, GroundProgram, GroundRule};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefiniteRule {
    pub head: AtomId,
    pub body: Vec<AtomId>,
}

/// A negation-free program over the original atoms plus choice complements.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DefiniteProgram {
    pub atoms: usize,
    pub rules: Vec<DefiniteRule>,
}

/// Why a candidate is not a stable model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnosis {
    /// Candidate mentions an id outside the atom table.
    UnknownAtom { atom: AtomId },
    /// The least model of the reduct does not contain this candidate atom.
    Unfounded { atom: AtomId },
    /// The least model of the reduct derives this atom outside the candidate.
    NotClosed { atom: AtomId },
    /// Body of constraint `rule` holds.
    ConstraintViolated { rule: usize },
    /// Choice `rule` fired with `chosen` heads outside its bounds.
    ChoiceBound { rule: usize, chosen: usize },
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnosis::UnknownAtom { atom } => write!(f, "atom #{} is not in the program", atom.0),
            Diagnosis::Unfounded { atom } => write!(f, "atom #{} is unfounded", atom.0),
            Diagnosis::NotClosed { atom } => write!(f, "atom #{} is derivable but missing", atom.0),
            Diagnosis::ConstraintViolated { rule } => {
                write!(f, "constraint (rule {rule}) is violated")
            }
            Diagnosis::ChoiceBound { rule, chosen } => {
                write!(
                    f,
                    "choice (rule {rule}) has {chosen} heads, outside its bounds"
                )
            }
        }
    }
}

/// Precomputed complement numbering for one ground program.
pub(crate) struct Checker<'g> {
    g: &'g GroundProgram,
    /// First complement id of each rule (meaningful for choice rules).
    comp_base: Vec<usize>,
    total: usize,
}

impl<'g> Checker<'g> {
    pub(crate) fn new(g: &'g GroundProgram) -> Self {
        let mut next = g.atoms.len();
        let comp_base = g
            .rules
            .iter()
            .map(|r| {
                let base = next;
                if let GroundRule::Choice { heads, .. } = r {
                    next += heads.len();
                }
                base
            })
            .collect();
        Checker {
            g,
            comp_base,
            total: next,
        }
    }

    pub(crate) fn total_atoms(&self) -> usize {
        self.total
    }

    pub(crate) fn complement(&self, rule: usize, head: usize) -> AtomId {
        AtomId((self.comp_base[rule] + head) as u32)
    }

    /// Candidate extended with the complements it implies.
    fn extend(&self, m: &[bool]) -> Vec<bool> {
        let mut ext = m.to_vec();
        ext.resize(self.total, false);
        for (ri, r) in self.g.rules.iter().enumerate() {
            if let GroundRule::Choice {
                heads, pos, neg, ..
            } = r
            {
                if body_holds(pos, neg, m) {
                    for (k, h) in heads.iter().enumerate() {
                        if !m[h.index()] {
                            ext[self.complement(ri, k).index()] = true;
                        }
                    }
                }
            }
        }
        ext
    }

    pub(crate) fn reduct(&self, m: &[bool]) -> DefiniteProgram {
        let ext = self.extend(m);
        let mut rules = Vec::new();
        for (ri, r) in self.g.rules.iter().enumerate() {
            let (pos, neg) = r.body();
            if neg.iter().any(|a| m[a.index()]) {
                continue;
            }
            match r {
                GroundRule::Normal { head, .. } => rules.push(DefiniteRule {
                    head: *head,
                    body: pos.to_vec(),
                }),
                GroundRule::Choice { heads, .. } => {
                    for (k, &h) in heads.iter().enumerate() {
                        let c = self.complement(ri, k);
                        if !ext[c.index()] {
                            rules.push(DefiniteRule {
                                head: h,
                                body: pos.to_vec(),
                            });
                        }
                        if !m[h.index()] {
                            rules.push(DefiniteRule {
                                head: c,
                                body: pos.to_vec(),
                            });
                        }
                    }
                }
                GroundRule::Count {
                    head,
                    keys,
                    elements,
                    count,
                    ..
                } => {
                    if count_keys(keys.len(), elements, |a| m[a.index()]) == *count {
                        rules.push(DefiniteRule {
                            head: *head,
                            body: pos.to_vec(),
                        });
                    }
                }
                GroundRule::Constraint { .. } => {}
            }
        }
        DefiniteProgram {
            atoms: self.total,
            rules,
        }
    }

    pub(crate) fn check(&self, m: &[bool]) -> Result<(), Diagnosis> {
        let ext = self.extend(m);
        let lm = least_model_mask(&self.reduct(m));
        for i in 0..self.total {
            if ext[i] && !lm[i] {
                return Err(Diagnosis::Unfounded {
                    atom: AtomId(i as u32),
                });
            }
            if lm[i] && !ext[i] {
                return Err(Diagnosis::NotClosed {
                    atom: AtomId(i as u32),
                });
            }
        }
        for (ri, r) in self.g.rules.iter().enumerate() {
            match r {
                GroundRule::Constraint { pos, neg } if body_holds(pos, neg, m) => {
                    return Err(Diagnosis::ConstraintViolated { rule: ri })
                }
                GroundRule::Choice {
                    lower,
                    upper,
                    heads,
                    pos,
                    neg,
                } if body_holds(pos, neg, m) => {
                    let chosen = heads.iter().filter(|h| m[h.index()]).count();
                    if chosen < *lower as usize || chosen > *upper as usize {
                        return Err(Diagnosis::ChoiceBound { rule: ri, chosen });
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn body_holds(pos: &[AtomId], neg: &[AtomId], m: &[bool]) -> bool {
    pos.iter().all(|a| m[a.index()]) && !neg.iter().any(|a| m[a.index()])
}

fn mask(g: &GroundProgram, candidate: &BTreeSet<AtomId>) -> Result<Vec<bool>, Diagnosis> {
    let mut m = vec![false; g.atoms.len()];
    for a in candidate {
        if a.index() >= m.len() {
            return Err(Diagnosis::UnknownAtom { atom: *a });
        }
        m[a.index()] = true;
    }
    Ok(m)
}

/// The reduct of `g` with respect to `candidate` (original atom ids).
/// Rules with an unknown candidate id are treated as if the id were absent.
pub fn gl_reduct(g: &GroundProgram, candidate: &BTreeSet<AtomId>) -> DefiniteProgram {
    let m: Vec<bool> = (0..g.atoms.len())
        .map(|i| candidate.contains(&AtomId(i as u32)))
        .collect();
    Checker::new(g).reduct(&m)
}

pub(crate) fn least_model_mask(p: &DefiniteProgram) -> Vec<bool> {
    let mut model = vec![false; p.atoms];
    let mut missing: Vec<usize> = p.rules.iter().map(|r| r.body.len()).collect();
    let mut watch: Vec<Vec<usize>> = vec![Vec::new(); p.atoms];
    let mut queue = Vec::new();
    for (ri, r) in p.rules.iter().enumerate() {
        for b in &r.body {
            watch[b.index()].push(ri);
        }
        if r.body.is_empty() && !model[r.head.index()] {
            model[r.head.index()] = true;
            queue.push(r.head);
        }
    }
    while let Some(a) = queue.pop() {
        for &ri in &watch[a.index()] {
            missing[ri] -= 1;
            if missing[ri] == 0 {
                let h = p.rules[ri].head;
                if !model[h.index()] {
                    model[h.index()] = true;
                    queue.push(h);
                }
            }
        }
    }
    model
}

/// Unique minimal model of a definite program.
pub fn least_model(p: &DefiniteProgram) -> BTreeSet<AtomId> {
    least_model_mask(p)
        .into_iter()
        .enumerate()
        .filter(|(_, t)| *t)
        .map(|(i, _)| AtomId(i as u32))
        .collect()
}

/// `Ok(())` iff `candidate` is a stable model of `g`; otherwise the first
/// problem found (reduct mismatch, then constraints, then choice bounds).
pub fn check_stability(g: &GroundProgram, candidate: &BTreeSet<AtomId>) -> Result<(), Diagnosis> {
    let m = mask(g, candidate)?;
    Checker::new(g).check(&m)
}

pub fn is_stable(g: &GroundProgram, candidate: &BTreeSet<AtomId>) -> bool {
    check_stability(g, candidate).is_ok()
}

/// Number of distinct tuple keys whose condition holds in `candidate`.
pub fn eval_aggregate(elements: &[CountElement], candidate: &BTreeSet<AtomId>) -> usize {
    let keys = elements.iter().map(|e| e.key + 1).max().unwrap_or(0);
    count_keys(keys, elements, |a| candidate.contains(&a))
}
