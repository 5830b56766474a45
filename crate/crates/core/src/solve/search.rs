//! DPLL-style enumeration over the completion of the normalized program.
//!
//! Propagation is local to one rule or one atom's supports at a time; every
//! total assignment that survives propagation is checked for stability
//! before it is reported.

use std::time::Instant;

use super::stable::Checker;
use super::{AnswerSet, SolveError, SolveOptions, SolveResult, SolveStats, Status};
use crate::ground::{AtomId, CountElement, GroundProgram, GroundRule};

const UNDEF: i8 = 0;
const TRUE: i8 = 1;
const FALSE: i8 = -1;

#[derive(Debug)]
enum IRule {
    Normal {
        head: u32,
        pos: Vec<u32>,
        neg: Vec<u32>,
    },
    Count {
        head: u32,
        pos: Vec<u32>,
        neg: Vec<u32>,
        keys: usize,
        elements: Vec<CountElement>,
        count: usize,
    },
    Constraint {
        pos: Vec<u32>,
        neg: Vec<u32>,
    },
    Card {
        lower: usize,
        upper: usize,
        heads: Vec<u32>,
        pos: Vec<u32>,
        neg: Vec<u32>,
    },
}

impl IRule {
    fn body(&self) -> (&[u32], &[u32]) {
        match self {
            IRule::Normal { pos, neg, .. }
            | IRule::Count { pos, neg, .. }
            | IRule::Constraint { pos, neg }
            | IRule::Card { pos, neg, .. } => (pos, neg),
        }
    }
}

struct Conflict;

struct Decision {
    atom: u32,
    trail_len: usize,
    flipped: bool,
}

struct Search<'g> {
    g: &'g GroundProgram,
    checker: Checker<'g>,
    rules: Vec<IRule>,
    occurs: Vec<Vec<u32>>,
    supports: Vec<Vec<u32>>,
    val: Vec<i8>,
    trail: Vec<u32>,
    qhead: usize,
    decisions: Vec<Decision>,
    /// Lowest id that may still be unassigned.
    cursor: usize,
}

fn ids(v: &[AtomId]) -> Vec<u32> {
    v.iter().map(|a| a.0).collect()
}

impl<'g> Search<'g> {
    fn new(g: &'g GroundProgram) -> Self {
        let checker = Checker::new(g);
        let total = checker.total_atoms();
        let mut rules = Vec::new();
        for (ri, r) in g.rules.iter().enumerate() {
            match r {
                GroundRule::Normal { head, pos, neg } => rules.push(IRule::Normal {
                    head: head.0,
                    pos: ids(pos),
                    neg: ids(neg),
                }),
                GroundRule::Constraint { pos, neg } => rules.push(IRule::Constraint {
                    pos: ids(pos),
                    neg: ids(neg),
                }),
                GroundRule::Count {
                    head,
                    keys,
                    elements,
                    count,
                    pos,
                    neg,
                } => rules.push(IRule::Count {
                    head: head.0,
                    pos: ids(pos),
                    neg: ids(neg),
                    keys: keys.len(),
                    elements: elements.clone(),
                    count: *count,
                }),
                GroundRule::Choice {
                    lower,
                    upper,
                    heads,
                    pos,
                    neg,
                } => {
                    for (k, h) in heads.iter().enumerate() {
                        let c = checker.complement(ri, k).0;
                        let mut hn = ids(neg);
                        hn.push(c);
                        rules.push(IRule::Normal {
                            head: h.0,
                            pos: ids(pos),
                            neg: hn,
                        });
                        let mut cn = ids(neg);
                        cn.push(h.0);
                        rules.push(IRule::Normal {
                            head: c,
                            pos: ids(pos),
                            neg: cn,
                        });
                    }
                    rules.push(IRule::Card {
                        lower: *lower as usize,
                        upper: *upper as usize,
                        heads: ids(heads),
                        pos: ids(pos),
                        neg: ids(neg),
                    });
                }
            }
        }

        let mut occurs: Vec<Vec<u32>> = vec![Vec::new(); total];
        let mut supports: Vec<Vec<u32>> = vec![Vec::new(); total];
        for (ri, r) in rules.iter().enumerate() {
            let ri = ri as u32;
            let mut atoms: Vec<u32> = Vec::new();
            let (pos, neg) = r.body();
            atoms.extend(pos.iter().chain(neg));
            match r {
                IRule::Normal { head, .. } => {
                    atoms.push(*head);
                    supports[*head as usize].push(ri);
                }
                IRule::Count { head, elements, .. } => {
                    atoms.push(*head);
                    supports[*head as usize].push(ri);
                    for e in elements {
                        atoms.extend(e.pos.iter().chain(&e.neg).map(|a| a.0));
                    }
                }
                IRule::Card { heads, .. } => atoms.extend(heads),
                IRule::Constraint { .. } => {}
            }
            atoms.sort_unstable();
            atoms.dedup();
            for a in atoms {
                occurs[a as usize].push(ri);
            }
        }

        Search {
            g,
            checker,
            rules,
            occurs,
            supports,
            val: vec![UNDEF; total],
            trail: Vec::new(),
            qhead: 0,
            decisions: Vec::new(),
            cursor: 0,
        }
    }

    fn assign(&mut self, atom: u32, v: i8) -> Result<(), Conflict> {
        match self.val[atom as usize] {
            UNDEF => {
                self.val[atom as usize] = v;
                self.trail.push(atom);
                Ok(())
            }
            cur if cur == v => Ok(()),
            _ => Err(Conflict),
        }
    }

    fn lit(&self, atom: u32, positive: bool) -> i8 {
        let v = self.val[atom as usize];
        if positive {
            v
        } else {
            -v
        }
    }

    /// (false literals, undefined literals, last undefined literal).
    fn scan(&self, pos: &[u32], neg: &[u32]) -> (usize, usize, Option<(u32, bool)>) {
        let mut nfalse = 0;
        let mut nundef = 0;
        let mut last = None;
        for (&a, p) in pos
            .iter()
            .map(|a| (a, true))
            .chain(neg.iter().map(|a| (a, false)))
        {
            match self.lit(a, p) {
                FALSE => nfalse += 1,
                UNDEF => {
                    nundef += 1;
                    last = Some((a, p));
                }
                _ => {}
            }
        }
        (nfalse, nundef, last)
    }

    /// Status of `#count{..} = count`: TRUE, FALSE or UNDEF.
    fn aggregate(&self, keys: usize, elements: &[CountElement], count: usize) -> i8 {
        let mut sure = vec![false; keys];
        let mut maybe = vec![false; keys];
        for e in elements {
            let mut all_true = true;
            let mut any_false = false;
            for (a, p) in e
                .pos
                .iter()
                .map(|a| (a.0, true))
                .chain(e.neg.iter().map(|a| (a.0, false)))
            {
                match self.lit(a, p) {
                    FALSE => {
                        any_false = true;
                        break;
                    }
                    UNDEF => all_true = false,
                    _ => {}
                }
            }
            if !any_false {
                maybe[e.key] = true;
                if all_true {
                    sure[e.key] = true;
                }
            }
        }
        let lo = sure.iter().filter(|&&s| s).count();
        let hi = maybe.iter().filter(|&&s| s).count();
        if count < lo || count > hi {
            FALSE
        } else if lo == hi {
            TRUE
        } else {
            UNDEF
        }
    }

    /// Truth of a support's body, counting the aggregate as one literal.
    fn support_state(&self, ri: usize) -> (usize, usize, Option<(u32, bool)>, i8) {
        match &self.rules[ri] {
            IRule::Normal { pos, neg, .. } => {
                let (f, u, last) = self.scan(pos, neg);
                (f, u, last, TRUE)
            }
            IRule::Count {
                pos,
                neg,
                keys,
                elements,
                count,
                ..
            } => {
                let (f, u, last) = self.scan(pos, neg);
                (f, u, last, self.aggregate(*keys, elements, *count))
            }
            _ => unreachable!("only normal and count rules support atoms"),
        }
    }

    fn force_lit(&mut self, (a, p): (u32, bool), holds: bool) -> Result<(), Conflict> {
        self.assign(a, if p == holds { TRUE } else { FALSE })
    }

    fn prop_rule(&mut self, ri: usize) -> Result<(), Conflict> {
        match &self.rules[ri] {
            IRule::Normal { head, .. } | IRule::Count { head, .. } => {
                let head = *head;
                let (nfalse, nundef, last, agg) = self.support_state(ri);
                let body_false = nfalse > 0 || agg == FALSE;
                if !body_false && nundef == 0 && agg == TRUE {
                    self.assign(head, TRUE)?;
                }
                if self.val[head as usize] == FALSE && !body_false {
                    match (nundef, agg) {
                        (0, TRUE) => return Err(Conflict),
                        (1, TRUE) => self.force_lit(last.expect("undefined literal"), false)?,
                        _ => {}
                    }
                }
                if body_false || self.val[head as usize] == TRUE {
                    self.prop_support(head)?;
                }
                Ok(())
            }
            IRule::Constraint { pos, neg } => {
                let (nfalse, nundef, last) = self.scan(pos, neg);
                if nfalse == 0 {
                    match nundef {
                        0 => return Err(Conflict),
                        1 => self.force_lit(last.expect("undefined literal"), false)?,
                        _ => {}
                    }
                }
                Ok(())
            }
            IRule::Card {
                lower,
                upper,
                heads,
                pos,
                neg,
            } => {
                let (lower, upper) = (*lower, *upper);
                let (nfalse, nundef, last) = self.scan(pos, neg);
                if nfalse > 0 {
                    return Ok(());
                }
                let t = heads
                    .iter()
                    .filter(|&&h| self.val[h as usize] == TRUE)
                    .count();
                let u = heads
                    .iter()
                    .filter(|&&h| self.val[h as usize] == UNDEF)
                    .count();
                let violated = t > upper || t + u < lower;
                if violated {
                    return match nundef {
                        0 => Err(Conflict),
                        1 => self.force_lit(last.expect("undefined literal"), false),
                        _ => Ok(()),
                    };
                }
                if nundef == 0 && u > 0 && (t == upper || t + u == lower) {
                    let v = if t == upper { FALSE } else { TRUE };
                    let open: Vec<u32> = heads
                        .iter()
                        .copied()
                        .filter(|&h| self.val[h as usize] == UNDEF)
                        .collect();
                    for h in open {
                        self.assign(h, v)?;
                    }
                }
                Ok(())
            }
        }
    }

    fn prop_support(&mut self, atom: u32) -> Result<(), Conflict> {
        let mut live = None;
        let mut nlive = 0;
        for &ri in &self.supports[atom as usize] {
            let (nfalse, _, _, agg) = self.support_state(ri as usize);
            if nfalse == 0 && agg != FALSE {
                nlive += 1;
                live = Some(ri as usize);
                if nlive > 1 {
                    break;
                }
            }
        }
        match (nlive, self.val[atom as usize]) {
            (0, _) => self.assign(atom, FALSE),
            (1, TRUE) => {
                let (pos, neg) = self.rules[live.expect("live support")].body();
                let (pos, neg) = (pos.to_vec(), neg.to_vec());
                for a in pos {
                    self.assign(a, TRUE)?;
                }
                for a in neg {
                    self.assign(a, FALSE)?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn propagate(&mut self) -> Result<(), Conflict> {
        while self.qhead < self.trail.len() {
            let a = self.trail[self.qhead];
            self.qhead += 1;
            for i in 0..self.occurs[a as usize].len() {
                let ri = self.occurs[a as usize][i];
                self.prop_rule(ri as usize)?;
            }
            self.prop_support(a)?;
        }
        Ok(())
    }

    fn initial(&mut self) -> Result<(), Conflict> {
        for ri in 0..self.rules.len() {
            self.prop_rule(ri)?;
        }
        for a in 0..self.val.len() {
            self.prop_support(a as u32)?;
        }
        self.propagate()
    }

    fn undo(&mut self, len: usize) {
        for &a in &self.trail[len..] {
            self.val[a as usize] = UNDEF;
            self.cursor = self.cursor.min(a as usize);
        }
        self.trail.truncate(len);
        self.qhead = len;
    }

    /// Flips the most recent unflipped decision. `false` when none is left.
    fn backtrack(&mut self) -> bool {
        while let Some(d) = self.decisions.pop() {
            self.undo(d.trail_len);
            if !d.flipped {
                self.decisions.push(Decision {
                    atom: d.atom,
                    trail_len: d.trail_len,
                    flipped: true,
                });
                self.val[d.atom as usize] = FALSE;
                self.trail.push(d.atom);
                return true;
            }
        }
        false
    }

    fn next_unassigned(&mut self) -> Option<u32> {
        while self.cursor < self.val.len() {
            if self.val[self.cursor] == UNDEF {
                return Some(self.cursor as u32);
            }
            self.cursor += 1;
        }
        None
    }

    fn run(mut self, opts: &SolveOptions) -> Result<SolveResult, SolveError> {
        let start = Instant::now();
        let mut stats = SolveStats::default();
        let mut models = Vec::new();
        let n = self.g.atoms.len();

        let mut ok = self.initial().is_ok();
        if !ok {
            stats.exhausted = true;
        }
        while ok {
            if self.propagate().is_err() {
                stats.conflicts += 1;
                ok = self.backtrack();
                continue;
            }
            if let Some(a) = self.next_unassigned() {
                stats.decisions += 1;
                if opts.decision_budget.is_some_and(|b| stats.decisions > b) {
                    return Err(SolveError::ResourceLimit {
                        decisions: stats.decisions - 1,
                        models: models.len(),
                    });
                }
                self.decisions.push(Decision {
                    atom: a,
                    trail_len: self.trail.len(),
                    flipped: false,
                });
                self.val[a as usize] = TRUE;
                self.trail.push(a);
                continue;
            }
            let mask: Vec<bool> = self.val[..n].iter().map(|&v| v == TRUE).collect();
            if self.checker.check(&mask).is_ok() {
                let atoms: Vec<AtomId> = (0..n)
                    .filter(|&i| mask[i])
                    .map(|i| AtomId(i as u32))
                    .collect();
                let projected = self.g.project(&atoms);
                models.push(AnswerSet { atoms, projected });
                let now = start.elapsed();
                stats.first_model.get_or_insert(now);
                stats.last_model = Some(now);
                if opts.max_models != 0 && models.len() >= opts.max_models {
                    // Nothing left to flip: this was the last branch.
                    ok = self.decisions.iter().any(|d| !d.flipped);
                    break;
                }
            } else {
                stats.rejected += 1;
            }
            ok = self.backtrack();
        }
        if !ok {
            stats.exhausted = true;
        }
        stats.models = models.len();
        stats.elapsed = start.elapsed();
        let status = if models.is_empty() {
            Status::Unsatisfiable
        } else {
            Status::Satisfiable
        };
        Ok(SolveResult {
            status,
            models,
            stats,
        })
    }
}

pub(super) fn run(g: &GroundProgram, opts: &SolveOptions) -> Result<SolveResult, SolveError> {
    Search::new(g).run(opts)
}
