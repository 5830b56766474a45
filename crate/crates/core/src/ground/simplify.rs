//! Fixpoint simplification of freshly instantiated rules.
//!
//! Facts are removed from bodies, rules blocked by facts or by atoms no rule
//! can derive are dropped, and counting rules whose value is already decided
//! become normal rules (or disappear).

use std::collections::HashSet;

use super::{AtomId, CountElement, GroundRule};

pub(super) fn simplify(mut rules: Vec<GroundRule>, n_atoms: usize) -> Vec<GroundRule> {
    loop {
        let mut fact = vec![false; n_atoms];
        let mut defined = vec![false; n_atoms];
        for r in &rules {
            match r {
                GroundRule::Normal { head, .. } | GroundRule::Count { head, .. } => {
                    defined[head.index()] = true
                }
                GroundRule::Choice { heads, .. } => {
                    heads.iter().for_each(|h| defined[h.index()] = true)
                }
                GroundRule::Constraint { .. } => {}
            }
            if let GroundRule::Normal { head, .. } = r {
                if r.is_fact() {
                    fact[head.index()] = true;
                }
            }
        }

        let mut changed = false;
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(rules.len());
        for rule in rules {
            let before = rule.clone();
            let Some(r) = step(rule, &fact, &defined) else {
                changed = true;
                continue;
            };
            if r != before {
                changed = true;
            }
            if seen.insert(r.clone()) {
                out.push(r);
            } else {
                changed = true;
            }
        }
        rules = out;
        if !changed {
            return rules;
        }
    }
}

/// Simplifies a body in place; `false` when it can never hold.
fn body(pos: &mut Vec<AtomId>, neg: &mut Vec<AtomId>, fact: &[bool], defined: &[bool]) -> bool {
    if pos.iter().any(|a| !defined[a.index()]) || neg.iter().any(|a| fact[a.index()]) {
        return false;
    }
    pos.retain(|a| !fact[a.index()]);
    neg.retain(|a| defined[a.index()]);
    true
}

fn step(rule: GroundRule, fact: &[bool], defined: &[bool]) -> Option<GroundRule> {
    match rule {
        GroundRule::Normal {
            head,
            mut pos,
            mut neg,
        } => {
            let was_fact = pos.is_empty() && neg.is_empty();
            if !was_fact && fact[head.index()] {
                return None;
            }
            body(&mut pos, &mut neg, fact, defined).then_some(GroundRule::Normal { head, pos, neg })
        }
        GroundRule::Choice {
            lower,
            upper,
            heads,
            mut pos,
            mut neg,
        } => {
            if !body(&mut pos, &mut neg, fact, defined) {
                return None;
            }
            if heads.is_empty() && lower == 0 {
                return None;
            }
            Some(GroundRule::Choice {
                lower,
                upper,
                heads,
                pos,
                neg,
            })
        }
        GroundRule::Constraint { mut pos, mut neg } => {
            body(&mut pos, &mut neg, fact, defined).then_some(GroundRule::Constraint { pos, neg })
        }
        GroundRule::Count {
            head,
            keys,
            elements,
            count,
            mut pos,
            mut neg,
        } => {
            if fact[head.index()] || !body(&mut pos, &mut neg, fact, defined) {
                return None;
            }
            let elements: Vec<CountElement> = elements
                .into_iter()
                .filter_map(|mut e| body(&mut e.pos, &mut e.neg, fact, defined).then_some(e))
                .collect();
            let mut possible = vec![false; keys.len()];
            let mut certain = vec![false; keys.len()];
            for e in &elements {
                possible[e.key] = true;
                if e.pos.is_empty() && e.neg.is_empty() {
                    certain[e.key] = true;
                }
            }
            let possible = possible.iter().filter(|&&p| p).count();
            let certain = certain.iter().filter(|&&c| c).count();
            if count < certain || count > possible {
                return None;
            }
            if certain == possible {
                return Some(GroundRule::Normal { head, pos, neg });
            }
            Some(GroundRule::Count {
                head,
                keys,
                elements,
                count,
                pos,
                neg,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(n: u32) -> AtomId {
        AtomId(n)
    }

    fn fact(h: u32) -> GroundRule {
        GroundRule::Normal {
            head: id(h),
            pos: vec![],
            neg: vec![],
        }
    }

    #[test]
    fn facts_propagate_through_bodies() {
        let rules = vec![
            fact(0),
            GroundRule::Normal {
                head: id(1),
                pos: vec![id(0)],
                neg: vec![id(2)],
            },
        ];
        // 2 has no rule, so `not 2` holds and 1 becomes a fact.
        assert_eq!(simplify(rules, 3), vec![fact(0), fact(1)]);
    }

    #[test]
    fn blocked_rules_disappear() {
        let rules = vec![
            fact(0),
            GroundRule::Normal {
                head: id(1),
                pos: vec![],
                neg: vec![id(0)],
            },
            GroundRule::Constraint {
                pos: vec![id(1)],
                neg: vec![],
            },
        ];
        assert_eq!(simplify(rules, 2), vec![fact(0)]);
    }

    #[test]
    fn decided_count_becomes_normal() {
        let rules = vec![
            fact(0),
            GroundRule::Count {
                head: id(1),
                keys: vec![vec![1.into()], vec![2.into()]],
                elements: vec![
                    CountElement {
                        key: 0,
                        pos: vec![id(0)],
                        neg: vec![],
                    },
                    CountElement {
                        key: 1,
                        pos: vec![id(5)],
                        neg: vec![],
                    },
                ],
                count: 1,
                pos: vec![],
                neg: vec![],
            },
        ];
        assert_eq!(simplify(rules, 6), vec![fact(0), fact(1)]);
    }
}
