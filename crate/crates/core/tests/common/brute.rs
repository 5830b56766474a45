//! Random small ground programs and a brute-force stable-model oracle that
//! tries every subset of atoms against the definition.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use uatm_asp::ground::{
    AtomId, AtomTable, CountElement, GroundAtom, GroundProgram, GroundRule, Value,
};

/// Atoms `0..base` are "lower"; the rest are "upper". Count elements and
/// the bodies of rules with lower heads only mention lower atoms, so no
/// atom depends on itself through an aggregate.
pub fn random_program(rng: &mut impl Rng) -> GroundProgram {
    let n: u32 = rng.random_range(1..=12);
    let upper = if n >= 5 { rng.random_range(0..=2) } else { 0 };
    let base = n - upper;
    let mut atoms = AtomTable::default();
    for i in 0..n {
        atoms.intern(GroundAtom::ints("a", &[i as i64]));
    }
    let lower: Vec<AtomId> = (0..base).map(AtomId).collect();
    let all: Vec<AtomId> = (0..n).map(AtomId).collect();
    let pick = |rng: &mut dyn rand::RngCore, from: &[AtomId], max: usize| -> Vec<AtomId> {
        let k = rng.random_range(0..=max.min(from.len()));
        let mut v: Vec<AtomId> = from.choose_multiple(rng, k).copied().collect();
        v.sort();
        v
    };
    let mut rules = Vec::new();
    for _ in 0..rng.random_range(n as usize / 2 + 1..=n as usize + 6) {
        let kind = rng.random_range(0..10);
        let rule = match kind {
            0..=2 => {
                let head = AtomId(rng.random_range(0..n));
                let from = if head.0 < base { &lower } else { &all };
                GroundRule::Normal {
                    head,
                    pos: pick(rng, from, 2),
                    neg: pick(rng, from, 2),
                }
            }
            3..=5 => {
                let heads = pick(rng, &lower, 4);
                let lower_b = rng.random_range(0..=heads.len() as u32);
                let upper_b = rng.random_range(lower_b..=heads.len() as u32 + 1);
                GroundRule::Choice {
                    lower: lower_b,
                    upper: upper_b,
                    heads,
                    pos: pick(rng, &lower, 1),
                    neg: pick(rng, &lower, 1),
                }
            }
            6 => GroundRule::Constraint {
                pos: pick(rng, &all, 2),
                neg: pick(rng, &all, 2),
            },
            _ if upper > 0 => {
                let keys: usize = rng.random_range(1..=3);
                let elements = (0..rng.random_range(1..=4))
                    .map(|_| CountElement {
                        key: rng.random_range(0..keys),
                        pos: pick(rng, &lower, 2),
                        neg: pick(rng, &lower, 1),
                    })
                    .collect();
                GroundRule::Count {
                    head: AtomId(rng.random_range(base..n)),
                    keys: (0..keys).map(|k| vec![Value::Int(k as i64)]).collect(),
                    elements,
                    count: rng.random_range(0..=keys),
                    pos: pick(rng, &lower, 1),
                    neg: pick(rng, &lower, 1),
                }
            }
            _ => GroundRule::Normal {
                head: AtomId(rng.random_range(0..base)),
                pos: pick(rng, &lower, 1),
                neg: pick(rng, &lower, 2),
            },
        };
        rules.push(rule);
    }
    GroundProgram {
        atoms,
        rules,
        shows: Vec::new(),
    }
}

fn holds(m: u32, a: &AtomId) -> bool {
    m >> a.0 & 1 == 1
}

fn body(m: u32, pos: &[AtomId], neg: &[AtomId]) -> bool {
    pos.iter().all(|a| holds(m, a)) && !neg.iter().any(|a| holds(m, a))
}

fn tally(m: u32, keys: usize, elements: &[CountElement]) -> usize {
    (0..keys)
        .filter(|&k| {
            elements
                .iter()
                .any(|e| e.key == k && body(m, &e.pos, &e.neg))
        })
        .count()
}

/// `m` is a stable model: it satisfies every rule and equals the least
/// model of its reduct (choice heads in `m` become ordinary rules, count
/// rules survive when the count on `m` matches).
pub fn is_stable(g: &GroundProgram, m: u32) -> bool {
    let mut definite: Vec<(AtomId, &[AtomId])> = Vec::new();
    for r in &g.rules {
        match r {
            GroundRule::Normal { head, pos, neg } => {
                if body(m, pos, neg) && !holds(m, head) {
                    return false;
                }
                if !neg.iter().any(|a| holds(m, a)) {
                    definite.push((*head, pos));
                }
            }
            GroundRule::Constraint { pos, neg } => {
                if body(m, pos, neg) {
                    return false;
                }
            }
            GroundRule::Choice {
                lower,
                upper,
                heads,
                pos,
                neg,
            } => {
                if body(m, pos, neg) {
                    let k = heads.iter().filter(|a| holds(m, a)).count() as u32;
                    if k < *lower || k > *upper {
                        return false;
                    }
                }
                if !neg.iter().any(|a| holds(m, a)) {
                    definite.extend(
                        heads
                            .iter()
                            .filter(|a| holds(m, a))
                            .map(|h| (*h, pos.as_slice())),
                    );
                }
            }
            GroundRule::Count {
                head,
                keys,
                elements,
                count,
                pos,
                neg,
            } => {
                let matched = tally(m, keys.len(), elements) == *count;
                if matched && body(m, pos, neg) && !holds(m, head) {
                    return false;
                }
                if matched && !neg.iter().any(|a| holds(m, a)) {
                    definite.push((*head, pos));
                }
            }
        }
    }
    let mut lm = 0u32;
    loop {
        let before = lm;
        for (h, pos) in &definite {
            if pos.iter().all(|a| holds(lm, a)) {
                lm |= 1 << h.0;
            }
        }
        if lm == before {
            return lm == m;
        }
    }
}

pub fn brute_models(g: &GroundProgram) -> BTreeSet<Vec<AtomId>> {
    let n = g.atoms.len() as u32;
    (0..1u32 << n)
        .filter(|&m| is_stable(g, m))
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(AtomId).collect())
        .collect()
}
