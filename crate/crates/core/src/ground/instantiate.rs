//! Bottom-up instantiation.
//!
//! Rules are grouped by the strongly connected components of the predicate
//! dependency graph and processed dependencies-first. Inside a component,
//! positive bodies are joined semi-naively: after the first round, every new
//! instance must use at least one atom derived in the previous round.
//! Negation never restricts instantiation; it is resolved afterwards by
//! [`simplify`](super::simplify).

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::eval::{apply, compare, EvalError};
use super::{
    check_safety, simplify, AtomId, AtomTable, CountElement, GroundAtom, GroundError,
    GroundProgram, GroundRule, Value,
};
use crate::syntax::{
    AggregateAssignment, ArithOp, Atom, BodyElement, ChoiceElement, CmpOp, FactArg, Literal,
    Program, Statement, Term,
};

/// Callback for each complete binding of a condition.
type CondLeaf<'a, G> = dyn FnMut(&G, &[Option<Value>]) -> Result<(), EvalError> + 'a;
/// Positive and negative atoms of a ground body.
type GroundBody = (Vec<AtomId>, Vec<AtomId>);

/// A ground program together with the set of atoms that were derivable when
/// negation is ignored (the instantiation domain).
#[derive(Debug, Clone)]
pub struct Grounding {
    pub program: GroundProgram,
    pub derivable: BTreeSet<GroundAtom>,
}

/// Instantiates `program`.
pub fn ground(program: &Program) -> Result<GroundProgram, GroundError> {
    ground_detailed(program).map(|g| g.program)
}

pub fn ground_detailed(program: &Program) -> Result<Grounding, GroundError> {
    let mut norm = Normalizer::default();
    let mut shows = Vec::new();
    for st in &program.statements {
        if let Statement::Show { predicate, arity } = st {
            if !shows.iter().any(|(p, a)| p == predicate && a == arity) {
                shows.push((predicate.clone(), *arity));
            }
            continue;
        }
        check_safety(st).map_err(|u| GroundError::Unsafe {
            statement: st.to_string(),
            variables: u.0,
        })?;
        norm.statement(st)?;
    }

    let mut g = Grounder::default();
    let rules: Vec<CRule> = norm
        .rules
        .iter()
        .map(|r| g.compile(r))
        .collect::<Result<_, _>>()?;
    g.run(&rules)?;

    let derivable = g
        .relations
        .iter()
        .flat_map(|rel| rel.members.iter())
        .map(|&id| g.atoms[id as usize].clone())
        .filter(|a| !a.is_hidden())
        .collect();

    let rules = simplify::simplify(std::mem::take(&mut g.out), g.atoms.len());
    let program = renumber(&g.atoms, rules, shows);
    Ok(Grounding { program, derivable })
}

/// Assigns dense ids in first-seen order over the final rule list.
fn renumber(
    pre: &[GroundAtom],
    rules: Vec<GroundRule>,
    shows: Vec<(String, usize)>,
) -> GroundProgram {
    let mut r = Renumber {
        pre,
        table: AtomTable::default(),
        map: HashMap::new(),
    };
    let rules = rules
        .into_iter()
        .map(|rule| match rule {
            GroundRule::Normal { head, pos, neg } => GroundRule::Normal {
                head: r.id(head),
                pos: r.ids(pos),
                neg: r.ids(neg),
            },
            GroundRule::Choice {
                lower,
                upper,
                heads,
                pos,
                neg,
            } => GroundRule::Choice {
                lower,
                upper,
                heads: r.ids(heads),
                pos: r.ids(pos),
                neg: r.ids(neg),
            },
            GroundRule::Constraint { pos, neg } => GroundRule::Constraint {
                pos: r.ids(pos),
                neg: r.ids(neg),
            },
            GroundRule::Count {
                head,
                keys,
                elements,
                count,
                pos,
                neg,
            } => {
                let head = r.id(head);
                let pos = r.ids(pos);
                let neg = r.ids(neg);
                let elements = elements
                    .into_iter()
                    .map(|e| CountElement {
                        key: e.key,
                        pos: r.ids(e.pos),
                        neg: r.ids(e.neg),
                    })
                    .collect();
                GroundRule::Count {
                    head,
                    keys,
                    elements,
                    count,
                    pos,
                    neg,
                }
            }
        })
        .collect();
    GroundProgram {
        atoms: r.table,
        rules,
        shows,
    }
}

struct Renumber<'a> {
    pre: &'a [GroundAtom],
    table: AtomTable,
    map: HashMap<AtomId, AtomId>,
}

impl Renumber<'_> {
    fn id(&mut self, a: AtomId) -> AtomId {
        if let Some(&n) = self.map.get(&a) {
            return n;
        }
        let n = self.table.intern(self.pre[a.index()].clone());
        self.map.insert(a, n);
        n
    }

    fn ids(&mut self, v: Vec<AtomId>) -> Vec<AtomId> {
        v.into_iter().map(|a| self.id(a)).collect()
    }
}

// ---------------------------------------------------------------------------
// Normalization: interval expansion and anonymous variables.

enum NHead {
    Atom(Atom),
    Choice {
        lower: u32,
        upper: u32,
        elements: Vec<ChoiceElement>,
    },
    Constraint,
}

struct NRule {
    text: String,
    head: NHead,
    body: Vec<Literal>,
    count: Option<AggregateAssignment>,
}

#[derive(Default)]
struct Normalizer {
    rules: Vec<NRule>,
    fresh: usize,
    projections: HashMap<(String, Vec<bool>), String>,
}

impl Normalizer {
    fn statement(&mut self, st: &Statement) -> Result<(), GroundError> {
        let text = st.to_string();
        match st {
            Statement::Show { .. } => {}
            Statement::Fact(a) => self.rules.push(NRule {
                text,
                head: NHead::Atom(a.clone()),
                body: Vec::new(),
                count: None,
            }),
            Statement::IntervalFact(ia) => {
                for args in expand_intervals(ia.args.as_slice(), &text)? {
                    self.rules.push(NRule {
                        text: text.clone(),
                        head: NHead::Atom(Atom::new(ia.predicate.clone(), args)),
                        body: Vec::new(),
                        count: None,
                    });
                }
            }
            Statement::Rule { head, body } => {
                let mut lits = Vec::new();
                let mut count = None;
                for el in body {
                    match el {
                        BodyElement::Literal(l) => lits.push(self.literal(l)),
                        BodyElement::Count(agg) => {
                            let elements = agg
                                .elements
                                .iter()
                                .map(|e| crate::syntax::CountElement {
                                    tuple: e.tuple.clone(),
                                    condition: e
                                        .condition
                                        .iter()
                                        .map(|l| self.literal(l))
                                        .collect(),
                                })
                                .collect();
                            count = Some(AggregateAssignment {
                                target: agg.target.clone(),
                                elements,
                            });
                        }
                    }
                }
                self.rules.push(NRule {
                    text,
                    head: NHead::Atom(head.clone()),
                    body: lits,
                    count,
                });
            }
            Statement::Choice(c) => {
                let elements = c
                    .elements
                    .iter()
                    .map(|e| ChoiceElement {
                        head: e.head.clone(),
                        condition: e.condition.iter().map(|l| self.literal(l)).collect(),
                    })
                    .collect();
                let body = c.body.iter().map(|l| self.literal(l)).collect();
                self.rules.push(NRule {
                    text,
                    head: NHead::Choice {
                        lower: c.lower,
                        upper: c.upper,
                        elements,
                    },
                    body,
                    count: None,
                });
            }
            Statement::Constraint(body) => {
                let body = body.iter().map(|l| self.literal(l)).collect();
                self.rules.push(NRule {
                    text,
                    head: NHead::Constraint,
                    body,
                    count: None,
                });
            }
        }
        Ok(())
    }

    fn fresh_var(&mut self) -> Term {
        self.fresh += 1;
        Term::Var(format!("#v{}", self.fresh))
    }

    fn literal(&mut self, lit: &Literal) -> Literal {
        match lit {
            Literal::Pos(a) => {
                let args = a
                    .args
                    .iter()
                    .map(|t| match t {
                        Term::Anon => self.fresh_var(),
                        other => other.clone(),
                    })
                    .collect();
                Literal::Pos(Atom::new(a.predicate.clone(), args))
            }
            Literal::Neg(a) if a.args.iter().any(|t| matches!(t, Term::Anon)) => {
                Literal::Neg(self.projection(a))
            }
            other => other.clone(),
        }
    }

    /// `not p(X, _)` becomes `not #projN(X)` with `#projN(Y) :- p(Y, Z).`
    fn projection(&mut self, atom: &Atom) -> Atom {
        let mask: Vec<bool> = atom.args.iter().map(|t| matches!(t, Term::Anon)).collect();
        let key = (atom.predicate.clone(), mask.clone());
        let kept: Vec<Term> = atom
            .args
            .iter()
            .filter(|t| !matches!(t, Term::Anon))
            .cloned()
            .collect();
        if let Some(name) = self.projections.get(&key) {
            return Atom::new(name.clone(), kept);
        }
        let name = format!("#proj{}", self.projections.len() + 1);
        self.projections.insert(key, name.clone());
        let body_args: Vec<Term> = mask.iter().map(|_| self.fresh_var()).collect();
        let head_args: Vec<Term> = body_args
            .iter()
            .zip(&mask)
            .filter(|(_, &anon)| !anon)
            .map(|(t, _)| t.clone())
            .collect();
        let head = Atom::new(name.clone(), head_args);
        let body = Atom::new(atom.predicate.clone(), body_args);
        self.rules.push(NRule {
            text: format!("{head} :- {body}."),
            head: NHead::Atom(head),
            body: vec![Literal::Pos(body)],
            count: None,
        });
        Atom::new(name, kept)
    }
}

fn expand_intervals(args: &[FactArg], text: &str) -> Result<Vec<Vec<Term>>, GroundError> {
    let mut out: Vec<Vec<Term>> = vec![Vec::new()];
    for arg in args {
        match arg {
            FactArg::Term(t) => out.iter_mut().for_each(|v| v.push(t.clone())),
            FactArg::Interval(lo, hi) => {
                if lo > hi {
                    return Err(GroundError::EmptyInterval {
                        statement: text.to_string(),
                        lo: *lo,
                        hi: *hi,
                    });
                }
                out = out
                    .into_iter()
                    .flat_map(|prefix| {
                        (*lo..=*hi).map(move |n| {
                            let mut v = prefix.clone();
                            v.push(Term::Int(n));
                            v
                        })
                    })
                    .collect();
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Compiled rules.

type PredId = usize;
type Slot = usize;

#[derive(Debug, Clone)]
enum CTerm {
    Const(Value),
    Var(Slot),
    Arith(ArithOp, Box<CTerm>, Box<CTerm>),
}

impl CTerm {
    fn slots(&self, out: &mut Vec<Slot>) {
        match self {
            CTerm::Const(_) => {}
            CTerm::Var(s) => out.push(*s),
            CTerm::Arith(_, l, r) => {
                l.slots(out);
                r.slots(out);
            }
        }
    }

    fn eval(&self, slots: &[Option<Value>]) -> Result<Value, EvalError> {
        match self {
            CTerm::Const(v) => Ok(v.clone()),
            CTerm::Var(s) => slots[*s]
                .clone()
                .ok_or_else(|| EvalError::Unbound(format!("#{s}"))),
            CTerm::Arith(op, l, r) => apply(*op, &l.eval(slots)?, &r.eval(slots)?),
        }
    }
}

#[derive(Debug, Clone)]
struct CAtom {
    pred: PredId,
    args: Vec<CTerm>,
}

impl CAtom {
    fn ready(&self, bound: &[bool]) -> bool {
        self.args.iter().all(|a| match a {
            CTerm::Var(_) | CTerm::Const(_) => true,
            other => {
                let mut v = Vec::new();
                other.slots(&mut v);
                v.iter().all(|&s| bound[s])
            }
        })
    }

    fn bind_all(&self, bound: &mut [bool]) {
        for a in &self.args {
            let mut v = Vec::new();
            a.slots(&mut v);
            for s in v {
                bound[s] = true;
            }
        }
    }
}

#[derive(Debug, Clone)]
struct CCmp(CTerm, CmpOp, CTerm);

impl CCmp {
    fn slots(&self) -> Vec<Slot> {
        let mut v = Vec::new();
        self.0.slots(&mut v);
        self.2.slots(&mut v);
        v
    }
}

/// A conjunction of positive atoms joined in `order`, with comparisons
/// checked as soon as their variables are bound, and negative atoms.
#[derive(Debug, Clone, Default)]
struct CCond {
    pos: Vec<CAtom>,
    order: Vec<usize>,
    cmps: Vec<CCmp>,
    /// `cmps_at[k]`: comparisons checkable after `k` joins.
    cmps_at: Vec<Vec<usize>>,
    neg: Vec<CAtom>,
}

#[derive(Debug, Clone)]
struct CElement {
    head: Option<CAtom>,
    tuple: Vec<CTerm>,
    cond: CCond,
}

#[derive(Debug, Clone)]
enum CHead {
    Atom(CAtom),
    Choice {
        lower: u32,
        upper: u32,
        elements: Vec<CElement>,
    },
    Constraint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Join(usize),
    Count,
}

#[derive(Debug, Clone)]
struct CAgg {
    target: CTerm,
    elements: Vec<CElement>,
}

#[derive(Debug, Clone)]
struct CRule {
    text: String,
    head: CHead,
    pos: Vec<CAtom>,
    steps: Vec<Step>,
    cmps: Vec<CCmp>,
    /// `cmps_at[k]`: comparisons checkable after `k` steps.
    cmps_at: Vec<Vec<usize>>,
    neg: Vec<CAtom>,
    agg: Option<CAgg>,
    nslots: usize,
}

impl CRule {
    fn head_preds(&self) -> Vec<PredId> {
        match &self.head {
            CHead::Atom(a) => vec![a.pred],
            CHead::Choice { elements, .. } => elements
                .iter()
                .filter_map(|e| e.head.as_ref().map(|h| h.pred))
                .collect(),
            CHead::Constraint => Vec::new(),
        }
    }

    fn condition_preds(&self) -> Vec<PredId> {
        let elements = match (&self.head, &self.agg) {
            (CHead::Choice { elements, .. }, _) => elements.as_slice(),
            (_, Some(agg)) => agg.elements.as_slice(),
            _ => &[],
        };
        elements
            .iter()
            .flat_map(|e| e.cond.pos.iter().chain(&e.cond.neg).map(|a| a.pred))
            .collect()
    }

    fn body_preds(&self) -> Vec<PredId> {
        self.pos
            .iter()
            .chain(&self.neg)
            .map(|a| a.pred)
            .chain(self.condition_preds())
            .collect()
    }
}

struct Compiler<'g> {
    g: &'g mut Grounder,
    vars: HashMap<String, Slot>,
}

impl Compiler<'_> {
    fn term(&mut self, t: &Term) -> CTerm {
        match t {
            Term::Int(n) => CTerm::Const(Value::Int(*n)),
            Term::Sym(s) => CTerm::Const(Value::Sym(s.as_str().into())),
            Term::Var(v) => {
                let next = self.vars.len();
                CTerm::Var(*self.vars.entry(v.clone()).or_insert(next))
            }
            Term::Anon => unreachable!("anonymous variables are normalized before compilation"),
            Term::Arith(op, l, r) => {
                CTerm::Arith(*op, Box::new(self.term(l)), Box::new(self.term(r)))
            }
        }
    }

    fn atom(&mut self, a: &Atom) -> CAtom {
        let pred = self.g.pred(&a.predicate, a.arity());
        CAtom {
            pred,
            args: a.args.iter().map(|t| self.term(t)).collect(),
        }
    }

    fn cond(&mut self, lits: &[Literal]) -> CCond {
        let mut c = CCond::default();
        for l in lits {
            match l {
                Literal::Pos(a) => c.pos.push(self.atom(a)),
                Literal::Neg(a) => c.neg.push(self.atom(a)),
                Literal::Cmp(l, op, r) => {
                    let cmp = CCmp(self.term(l), *op, self.term(r));
                    c.cmps.push(cmp);
                }
            }
        }
        c
    }
}

/// Orders joins so every arithmetic argument is evaluable when reached.
fn schedule_cond(cond: &mut CCond, bound: &mut Vec<bool>, text: &str) -> Result<(), GroundError> {
    let n = bound.len();
    bound.resize(n.max(bound.len()), false);
    let mut done = vec![false; cond.pos.len()];
    let mut placed = vec![false; cond.cmps.len()];
    cond.order.clear();
    cond.cmps_at = vec![Vec::new()];
    place_cmps(
        &cond.cmps,
        &mut placed,
        bound,
        cond.cmps_at.last_mut().unwrap(),
    );
    while cond.order.len() < cond.pos.len() {
        let next = (0..cond.pos.len())
            .find(|&i| !done[i] && cond.pos[i].ready(bound))
            .ok_or_else(|| GroundError::Unschedulable {
                statement: text.to_string(),
            })?;
        done[next] = true;
        cond.order.push(next);
        cond.pos[next].bind_all(bound);
        let mut here = Vec::new();
        place_cmps(&cond.cmps, &mut placed, bound, &mut here);
        cond.cmps_at.push(here);
    }
    if placed.iter().any(|p| !p) {
        return Err(GroundError::Unschedulable {
            statement: text.to_string(),
        });
    }
    Ok(())
}

fn place_cmps(cmps: &[CCmp], placed: &mut [bool], bound: &[bool], out: &mut Vec<usize>) {
    for (i, c) in cmps.iter().enumerate() {
        if !placed[i] && c.slots().iter().all(|&s| bound[s]) {
            placed[i] = true;
            out.push(i);
        }
    }
}

// ---------------------------------------------------------------------------
// The grounder proper.

#[derive(Default)]
struct Relation {
    tuples: Vec<Arc<[Value]>>,
    members: HashSet<u32>,
}

#[derive(Default)]
struct Grounder {
    preds: Vec<(Arc<str>, usize)>,
    pred_index: HashMap<(String, usize), PredId>,
    relations: Vec<Relation>,
    completed: Vec<bool>,
    atoms: Vec<GroundAtom>,
    atom_index: HashMap<GroundAtom, u32>,
    certain: Vec<bool>,
    out: Vec<GroundRule>,
    seen: HashSet<GroundRule>,
}

/// Tuple index range `[start, end)` of a relation visible to one join.
type Window = (usize, usize);

struct AggInstance {
    keys: Vec<Vec<Value>>,
    elements: Vec<CountElement>,
    count: usize,
}

impl Grounder {
    fn pred(&mut self, name: &str, arity: usize) -> PredId {
        if let Some(&id) = self.pred_index.get(&(name.to_string(), arity)) {
            return id;
        }
        let id = self.preds.len();
        self.preds.push((Arc::from(name), arity));
        self.pred_index.insert((name.to_string(), arity), id);
        self.relations.push(Relation::default());
        self.completed.push(false);
        id
    }

    fn compile(&mut self, rule: &NRule) -> Result<CRule, GroundError> {
        let mut c = Compiler {
            g: self,
            vars: HashMap::new(),
        };
        let body = c.cond(&rule.body);
        let agg = rule.count.as_ref().map(|agg| {
            let target = c.term(&agg.target);
            let elements = agg
                .elements
                .iter()
                .map(|e| CElement {
                    head: None,
                    tuple: e.tuple.iter().map(|t| c.term(t)).collect(),
                    cond: c.cond(&e.condition),
                })
                .collect::<Vec<_>>();
            (target, elements)
        });
        let head = match &rule.head {
            NHead::Atom(a) => CHead::Atom(c.atom(a)),
            NHead::Constraint => CHead::Constraint,
            NHead::Choice {
                lower,
                upper,
                elements,
            } => CHead::Choice {
                lower: *lower,
                upper: *upper,
                elements: elements
                    .iter()
                    .map(|e| CElement {
                        head: Some(c.atom(&e.head)),
                        tuple: Vec::new(),
                        cond: c.cond(&e.condition),
                    })
                    .collect(),
            },
        };
        let nslots = c.vars.len();

        let CCond { pos, cmps, neg, .. } = body;
        let mut rule_c = CRule {
            text: rule.text.clone(),
            head,
            pos,
            steps: Vec::new(),
            cmps,
            cmps_at: Vec::new(),
            neg,
            agg: agg.map(|(target, elements)| CAgg { target, elements }),
            nslots,
        };
        schedule_rule(&mut rule_c)?;
        Ok(rule_c)
    }

    fn intern(&mut self, pred: PredId, args: &[Value]) -> u32 {
        let atom = GroundAtom {
            predicate: self.preds[pred].0.clone(),
            args: args.to_vec(),
        };
        if let Some(&id) = self.atom_index.get(&atom) {
            return id;
        }
        let id = self.atoms.len() as u32;
        self.atoms.push(atom.clone());
        self.atom_index.insert(atom, id);
        self.certain.push(false);
        id
    }

    fn is_member(&self, pred: PredId, id: u32) -> bool {
        self.relations[pred].members.contains(&id)
    }

    /// Adds a derivable atom; returns its id.
    fn derive(&mut self, pred: PredId, args: Vec<Value>) -> u32 {
        let id = self.intern(pred, &args);
        let rel = &mut self.relations[pred];
        if rel.members.insert(id) {
            rel.tuples.push(args.into());
        }
        id
    }

    fn run(&mut self, rules: &[CRule]) -> Result<(), GroundError> {
        let components = self.components(rules)?;
        for (preds, rule_ids) in components {
            self.ground_component(rules, &preds, &rule_ids)?;
            for p in preds {
                self.completed[p] = true;
            }
        }
        for rule in rules.iter().filter(|r| matches!(r.head, CHead::Constraint)) {
            let windows = self.full_windows(rule);
            self.instantiate(rule, &windows)?;
        }
        Ok(())
    }

    /// Components in dependency order, each with its rules in source order.
    #[allow(clippy::type_complexity)]
    fn components(&self, rules: &[CRule]) -> Result<Vec<(Vec<PredId>, Vec<usize>)>, GroundError> {
        let mut graph: DiGraph<PredId, ()> = DiGraph::new();
        let nodes: Vec<NodeIndex> = (0..self.preds.len()).map(|p| graph.add_node(p)).collect();
        for rule in rules {
            let heads = rule.head_preds();
            for &h in &heads {
                for b in rule.body_preds() {
                    graph.add_edge(nodes[h], nodes[b], ());
                }
            }
            // All heads of one choice rule share a component.
            for w in heads.windows(2) {
                graph.add_edge(nodes[w[0]], nodes[w[1]], ());
                graph.add_edge(nodes[w[1]], nodes[w[0]], ());
            }
        }
        let sccs = tarjan_scc(&graph);
        let mut comp_of = vec![0usize; self.preds.len()];
        for (ci, scc) in sccs.iter().enumerate() {
            for &n in scc {
                comp_of[graph[n]] = ci;
            }
        }
        let mut rules_of: Vec<Vec<usize>> = vec![Vec::new(); sccs.len()];
        for (ri, rule) in rules.iter().enumerate() {
            if let Some(&h) = rule.head_preds().first() {
                let ci = comp_of[h];
                if let Some(p) = rule
                    .condition_preds()
                    .into_iter()
                    .find(|&p| comp_of[p] == ci)
                {
                    return Err(GroundError::RecursiveCondition {
                        predicate: self.preds[p].0.to_string(),
                    });
                }
                rules_of[ci].push(ri);
            }
        }
        Ok(sccs
            .into_iter()
            .zip(rules_of)
            .map(|(scc, rs)| {
                let mut preds: Vec<PredId> = scc.into_iter().map(|n| graph[n]).collect();
                preds.sort_unstable();
                (preds, rs)
            })
            .collect())
    }

    fn full_windows(&self, rule: &CRule) -> Vec<Window> {
        rule.pos
            .iter()
            .map(|a| (0, self.relations[a.pred].tuples.len()))
            .collect()
    }

    fn ground_component(
        &mut self,
        rules: &[CRule],
        preds: &[PredId],
        rule_ids: &[usize],
    ) -> Result<(), GroundError> {
        let in_comp = |p: PredId| preds.binary_search(&p).is_ok();
        let mut old_end: HashMap<PredId, usize> = preds.iter().map(|&p| (p, 0)).collect();

        // First round: everything visible as it is now.
        for &ri in rule_ids {
            let windows = self.full_windows(&rules[ri]);
            self.instantiate(&rules[ri], &windows)?;
        }

        loop {
            let ends: HashMap<PredId, usize> = preds
                .iter()
                .map(|&p| (p, self.relations[p].tuples.len()))
                .collect();
            if preds.iter().all(|p| ends[p] == old_end[p]) {
                break;
            }
            for &ri in rule_ids {
                let rule = &rules[ri];
                let recursive: Vec<usize> = (0..rule.pos.len())
                    .filter(|&i| in_comp(rule.pos[i].pred))
                    .collect();
                for &delta_at in &recursive {
                    let windows: Vec<Window> = rule
                        .pos
                        .iter()
                        .enumerate()
                        .map(|(i, a)| {
                            let p = a.pred;
                            if !in_comp(p) {
                                (0, self.relations[p].tuples.len())
                            } else if i < delta_at {
                                (0, old_end[&p])
                            } else if i == delta_at {
                                (old_end[&p], ends[&p])
                            } else {
                                (0, ends[&p])
                            }
                        })
                        .collect();
                    if windows[delta_at].0 < windows[delta_at].1 {
                        self.instantiate(rule, &windows)?;
                    }
                }
            }
            old_end = ends;
        }
        Ok(())
    }

    fn instantiate(&mut self, rule: &CRule, windows: &[Window]) -> Result<(), GroundError> {
        let mut slots = vec![None; rule.nslots];
        if !self.check_cmps(rule, &rule.cmps_at[0], &slots)? {
            return Ok(());
        }
        let mut agg = None;
        self.walk(rule, windows, 0, &mut slots, &mut agg)
    }

    fn eval_err(rule: &CRule, e: EvalError) -> GroundError {
        GroundError::Eval {
            statement: rule.text.clone(),
            source: e,
        }
    }

    fn check_cmps(
        &self,
        rule: &CRule,
        which: &[usize],
        slots: &[Option<Value>],
    ) -> Result<bool, GroundError> {
        check_all(&rule.cmps, which, slots).map_err(|e| Self::eval_err(rule, e))
    }

    fn walk(
        &mut self,
        rule: &CRule,
        windows: &[Window],
        step: usize,
        slots: &mut Vec<Option<Value>>,
        agg: &mut Option<AggInstance>,
    ) -> Result<(), GroundError> {
        if step == rule.steps.len() {
            return self.emit(rule, slots, agg.as_ref());
        }
        match rule.steps[step] {
            Step::Join(i) => {
                let atom = &rule.pos[i];
                let (start, end) = windows[i];
                for t in start..end {
                    let tuple = self.relations[atom.pred].tuples[t].clone();
                    let Some(bound) =
                        unify(atom, &tuple, slots).map_err(|e| Self::eval_err(rule, e))?
                    else {
                        continue;
                    };
                    if self.check_cmps(rule, &rule.cmps_at[step + 1], slots)? {
                        self.walk(rule, windows, step + 1, slots, agg)?;
                    }
                    for s in bound {
                        slots[s] = None;
                    }
                }
                Ok(())
            }
            Step::Count => {
                let spec = rule.agg.as_ref().expect("count step without aggregate");
                let inst = self.instantiate_count(rule, spec, slots)?;
                let max = inst.keys.len();
                let values: Vec<usize> = match &spec.target {
                    CTerm::Var(s) if slots[*s].is_none() => (0..=max).collect(),
                    t => match t.eval(slots).map_err(|e| Self::eval_err(rule, e))? {
                        Value::Int(n) if n >= 0 && (n as usize) <= max => vec![n as usize],
                        _ => Vec::new(),
                    },
                };
                let target_slot = match &spec.target {
                    CTerm::Var(s) if slots[*s].is_none() => Some(*s),
                    _ => None,
                };
                let mut current = Some(inst);
                for n in values {
                    if let Some(s) = target_slot {
                        slots[s] = Some(Value::Int(n as i64));
                    }
                    if self.check_cmps(rule, &rule.cmps_at[step + 1], slots)? {
                        let mut inst = current.take().expect("aggregate instance");
                        inst.count = n;
                        *agg = Some(inst);
                        self.walk(rule, windows, step + 1, slots, agg)?;
                        current = agg.take();
                    }
                }
                if let Some(s) = target_slot {
                    slots[s] = None;
                }
                Ok(())
            }
        }
    }

    /// Enumerates bindings of a condition over all derivable atoms, calling
    /// `leaf` for each complete binding.
    fn walk_cond(
        &self,
        cond: &CCond,
        k: usize,
        slots: &mut Vec<Option<Value>>,
        leaf: &mut CondLeaf<'_, Self>,
    ) -> Result<(), EvalError> {
        if k == cond.order.len() {
            return leaf(self, slots);
        }
        let atom = &cond.pos[cond.order[k]];
        let rel = &self.relations[atom.pred];
        for t in 0..rel.tuples.len() {
            let tuple = rel.tuples[t].clone();
            let Some(bound) = unify(atom, &tuple, slots)? else {
                continue;
            };
            if check_all(&cond.cmps, &cond.cmps_at[k + 1], slots)? {
                self.walk_cond(cond, k + 1, slots, leaf)?;
            }
            for s in bound {
                slots[s] = None;
            }
        }
        Ok(())
    }

    /// Ground condition of an element under a complete binding; `None` when
    /// the condition is certainly false.
    fn ground_condition(
        &self,
        cond: &CCond,
        slots: &[Option<Value>],
    ) -> Result<Option<GroundBody>, EvalError> {
        let mut pos = Vec::new();
        for a in &cond.pos {
            let args = eval_args(a, slots)?;
            let id = self.lookup(a.pred, &args).expect("joined atom is interned");
            if !self.certain[id as usize] {
                pos.push(AtomId(id));
            }
        }
        let mut neg = Vec::new();
        for a in &cond.neg {
            let args = eval_args(a, slots)?;
            match self.lookup(a.pred, &args) {
                Some(id) if self.is_member(a.pred, id) => {
                    if self.certain[id as usize] {
                        return Ok(None);
                    }
                    neg.push(AtomId(id));
                }
                _ => {}
            }
        }
        Ok(Some((pos, neg)))
    }

    fn lookup(&self, pred: PredId, args: &[Value]) -> Option<u32> {
        let atom = GroundAtom {
            predicate: self.preds[pred].0.clone(),
            args: args.to_vec(),
        };
        self.atom_index.get(&atom).copied()
    }

    fn instantiate_count(
        &mut self,
        rule: &CRule,
        spec: &CAgg,
        slots: &mut Vec<Option<Value>>,
    ) -> Result<AggInstance, GroundError> {
        let mut keys: Vec<Vec<Value>> = Vec::new();
        let mut key_index: HashMap<Vec<Value>, usize> = HashMap::new();
        let mut elements: Vec<CountElement> = Vec::new();
        let mut seen: HashSet<CountElement> = HashSet::new();
        for el in &spec.elements {
            let before: Vec<bool> = slots.iter().map(Option::is_some).collect();
            if check_all(&el.cond.cmps, &el.cond.cmps_at[0], slots)
                .map_err(|e| Self::eval_err(rule, e))?
            {
                let mut found: Vec<(Vec<Value>, Vec<AtomId>, Vec<AtomId>)> = Vec::new();
                self.walk_cond(&el.cond, 0, slots, &mut |g, s| {
                    let key = el
                        .tuple
                        .iter()
                        .map(|t| t.eval(s))
                        .collect::<Result<Vec<_>, _>>()?;
                    if let Some((pos, neg)) = g.ground_condition(&el.cond, s)? {
                        found.push((key, pos, neg));
                    }
                    Ok(())
                })
                .map_err(|e| Self::eval_err(rule, e))?;
                for (key, pos, neg) in found {
                    let next = keys.len();
                    let ki = *key_index.entry(key.clone()).or_insert_with(|| {
                        keys.push(key);
                        next
                    });
                    let e = CountElement { key: ki, pos, neg };
                    if seen.insert(e.clone()) {
                        elements.push(e);
                    }
                }
            }
            for (s, was) in slots.iter_mut().zip(before) {
                if !was {
                    *s = None;
                }
            }
        }
        Ok(AggInstance {
            keys,
            elements,
            count: 0,
        })
    }

    fn emit(
        &mut self,
        rule: &CRule,
        slots: &mut Vec<Option<Value>>,
        agg: Option<&AggInstance>,
    ) -> Result<(), GroundError> {
        let err = |e| Self::eval_err(rule, e);
        let mut pos = Vec::new();
        for a in &rule.pos {
            let args = eval_args(a, slots).map_err(err)?;
            let id = AtomId(self.intern(a.pred, &args));
            if !pos.contains(&id) {
                pos.push(id);
            }
        }
        let mut neg = Vec::new();
        for a in &rule.neg {
            let args = eval_args(a, slots).map_err(err)?;
            let id = self.intern(a.pred, &args);
            if self.completed[a.pred] && self.certain[id as usize] {
                return Ok(());
            }
            if !neg.contains(&AtomId(id)) {
                neg.push(AtomId(id));
            }
        }
        if pos.iter().any(|p| neg.contains(p)) {
            return Ok(());
        }
        let neg_settled = rule
            .neg
            .iter()
            .zip(&neg)
            .all(|(a, id)| self.completed[a.pred] && !self.is_member(a.pred, id.0));

        let ground = match &rule.head {
            CHead::Atom(h) => {
                let args = eval_args(h, slots).map_err(err)?;
                let head = AtomId(self.derive(h.pred, args));
                match agg {
                    Some(inst) => GroundRule::Count {
                        head,
                        keys: inst.keys.clone(),
                        elements: inst.elements.clone(),
                        count: inst.count,
                        pos,
                        neg,
                    },
                    None => {
                        if neg_settled && pos.iter().all(|p| self.certain[p.index()]) {
                            self.certain[head.index()] = true;
                        }
                        GroundRule::Normal { head, pos, neg }
                    }
                }
            }
            CHead::Constraint => GroundRule::Constraint { pos, neg },
            CHead::Choice {
                lower,
                upper,
                elements,
            } => {
                let mut heads: Vec<AtomId> = Vec::new();
                for el in elements {
                    let before: Vec<bool> = slots.iter().map(Option::is_some).collect();
                    if check_all(&el.cond.cmps, &el.cond.cmps_at[0], slots).map_err(err)? {
                        let mut found = Vec::new();
                        let mut undecided = false;
                        self.walk_cond(&el.cond, 0, slots, &mut |g, s| {
                            match g.ground_condition(&el.cond, s)? {
                                Some((p, n)) if p.is_empty() && n.is_empty() => {
                                    let h = el.head.as_ref().expect("choice element head");
                                    found.push((h.pred, eval_args(h, s)?));
                                }
                                Some(_) => undecided = true,
                                None => {}
                            }
                            Ok(())
                        })
                        .map_err(err)?;
                        if undecided {
                            return Err(GroundError::RecursiveCondition {
                                predicate: format!("condition of `{}`", rule.text),
                            });
                        }
                        for (pred, args) in found {
                            let id = AtomId(self.derive(pred, args));
                            if !heads.contains(&id) {
                                heads.push(id);
                            }
                        }
                    }
                    for (s, was) in slots.iter_mut().zip(before) {
                        if !was {
                            *s = None;
                        }
                    }
                }
                GroundRule::Choice {
                    lower: *lower,
                    upper: *upper,
                    heads,
                    pos,
                    neg,
                }
            }
        };
        if self.seen.insert(ground.clone()) {
            self.out.push(ground);
        }
        Ok(())
    }
}

fn schedule_rule(rule: &mut CRule) -> Result<(), GroundError> {
    let mut bound = vec![false; rule.nslots];
    let mut done = vec![false; rule.pos.len()];
    let mut placed = vec![false; rule.cmps.len()];
    let mut agg_pending = rule.agg.is_some();
    rule.steps.clear();
    rule.cmps_at = vec![Vec::new()];
    place_cmps(&rule.cmps, &mut placed, &bound, &mut rule.cmps_at[0]);

    // Variables the aggregate shares with the rest of the rule.
    let agg_globals: Vec<Slot> = match &rule.agg {
        Some(agg) => {
            let mut inside = Vec::new();
            for e in &agg.elements {
                for t in &e.tuple {
                    t.slots(&mut inside);
                }
                for a in e.cond.pos.iter().chain(&e.cond.neg) {
                    for t in &a.args {
                        t.slots(&mut inside);
                    }
                }
                for c in &e.cond.cmps {
                    inside.extend(c.slots());
                }
            }
            let mut outside = Vec::new();
            for a in rule.pos.iter().chain(&rule.neg) {
                for t in &a.args {
                    t.slots(&mut outside);
                }
            }
            for c in &rule.cmps {
                outside.extend(c.slots());
            }
            if let CHead::Atom(h) = &rule.head {
                for t in &h.args {
                    t.slots(&mut outside);
                }
            }
            inside.into_iter().filter(|s| outside.contains(s)).collect()
        }
        None => Vec::new(),
    };

    while done.iter().any(|d| !d) || agg_pending {
        let next = (0..rule.pos.len()).find(|&i| !done[i] && rule.pos[i].ready(&bound));
        match next {
            Some(i) => {
                done[i] = true;
                rule.steps.push(Step::Join(i));
                rule.pos[i].bind_all(&mut bound);
            }
            None if agg_pending && agg_globals.iter().all(|&s| bound[s] || is_target(rule, s)) => {
                agg_pending = false;
                rule.steps.push(Step::Count);
                if let Some(CTerm::Var(s)) = rule.agg.as_ref().map(|a| &a.target) {
                    bound[*s] = true;
                }
            }
            None => {
                return Err(GroundError::Unschedulable {
                    statement: rule.text.clone(),
                })
            }
        }
        let mut here = Vec::new();
        place_cmps(&rule.cmps, &mut placed, &bound, &mut here);
        rule.cmps_at.push(here);
    }
    if placed.iter().any(|p| !p) {
        return Err(GroundError::Unschedulable {
            statement: rule.text.clone(),
        });
    }

    // Element conditions see the variables bound before their step.
    let mut bound_at_agg = vec![false; rule.nslots];
    for step in &rule.steps {
        match step {
            Step::Join(i) => rule.pos[*i].bind_all(&mut bound_at_agg),
            Step::Count => break,
        }
    }
    let text = rule.text.clone();
    let mut bound_at_end = bound.clone();
    if let Some(agg) = &mut rule.agg {
        for e in &mut agg.elements {
            let mut b = bound_at_agg.clone();
            schedule_cond(&mut e.cond, &mut b, &text)?;
        }
    }
    if let CHead::Choice { elements, .. } = &mut rule.head {
        for e in elements {
            let mut b = bound_at_end.clone();
            schedule_cond(&mut e.cond, &mut b, &text)?;
        }
    }
    bound_at_end.clear();
    Ok(())
}

fn is_target(rule: &CRule, slot: Slot) -> bool {
    matches!(rule.agg.as_ref().map(|a| &a.target), Some(CTerm::Var(s)) if *s == slot)
}

fn check_all(cmps: &[CCmp], which: &[usize], slots: &[Option<Value>]) -> Result<bool, EvalError> {
    for &i in which {
        let CCmp(l, op, r) = &cmps[i];
        if !compare(&l.eval(slots)?, *op, &r.eval(slots)?) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn eval_args(atom: &CAtom, slots: &[Option<Value>]) -> Result<Vec<Value>, EvalError> {
    atom.args.iter().map(|t| t.eval(slots)).collect()
}

/// Matches `atom` against `tuple`, binding free variables. Returns the slots
/// bound here, or `None` on mismatch (with nothing left bound).
fn unify(
    atom: &CAtom,
    tuple: &[Value],
    slots: &mut [Option<Value>],
) -> Result<Option<Vec<Slot>>, EvalError> {
    let mut bound = Vec::new();
    for (arg, val) in atom.args.iter().zip(tuple.iter()) {
        let ok = match arg {
            CTerm::Const(c) => c == val,
            CTerm::Var(s) => match &slots[*s] {
                Some(v) => v == val,
                None => {
                    slots[*s] = Some(val.clone());
                    bound.push(*s);
                    true
                }
            },
            arith => match arith.eval(slots) {
                Ok(v) => v == *val,
                Err(e) => {
                    for s in bound {
                        slots[s] = None;
                    }
                    return Err(e);
                }
            },
        };
        if !ok {
            for s in bound {
                slots[s] = None;
            }
            return Ok(None);
        }
    }
    Ok(Some(bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_program;

    fn ground_src(src: &str) -> GroundProgram {
        ground(&parse_program(src).unwrap()).unwrap()
    }

    fn facts(g: &GroundProgram) -> BTreeSet<String> {
        g.rules
            .iter()
            .filter(|r| r.is_fact())
            .map(|r| match r {
                GroundRule::Normal { head, .. } => g.atom(*head).to_string(),
                _ => unreachable!(),
            })
            .collect()
    }

    #[test]
    fn interval_expansion() {
        let g = ground_src("uatm(1..3).");
        assert_eq!(
            facts(&g),
            ["uatm(1)", "uatm(2)", "uatm(3)"].map(String::from).into()
        );
        let g = ground_src("edge_range(1, 2, 1..20).");
        assert_eq!(facts(&g).len(), 20);
        let g = ground_src("grid(1..2, 1..3).");
        assert_eq!(facts(&g).len(), 6);
    }

    #[test]
    fn empty_interval_is_an_error() {
        let err = ground(&parse_program("p(3..1).").unwrap()).unwrap_err();
        assert!(matches!(
            err,
            GroundError::EmptyInterval { lo: 3, hi: 1, .. }
        ));
    }

    #[test]
    fn unsafe_rule_rejected() {
        let err = ground(&parse_program("p(X) :- not q(X).").unwrap()).unwrap_err();
        assert!(matches!(err, GroundError::Unsafe { ref variables, .. } if variables == &["X"]));
    }

    #[test]
    fn comparisons_filter_instances() {
        let g = ground_src("e(1..20). c(P) :- e(P), P < 16. d(P) :- e(P), 7 <= P.");
        let f = facts(&g);
        assert!(f.contains("c(15)") && !f.contains("c(16)"));
        assert!(f.contains("d(7)") && !f.contains("d(6)"));
    }

    #[test]
    fn out_of_domain_arithmetic() {
        // step(0) does not exist, so `not step(T-1)` holds only at T = 1.
        let g = ground_src(
            "step(1..3). first(T) :- step(T), not step(T-1). next(T) :- step(T), step(T+1).",
        );
        let f = facts(&g);
        assert!(f.contains("first(1)"));
        assert!(!f.contains("first(2)") && !f.contains("first(3)"));
        assert!(f.contains("next(2)") && !f.contains("next(3)"));
    }

    #[test]
    fn recursion_reaches_fixpoint() {
        let g = ground_src("e(1,2). e(2,3). e(3,4). r(X,Y) :- e(X,Y). r(X,Z) :- r(X,Y), e(Y,Z).");
        let f = facts(&g);
        assert_eq!(f.iter().filter(|a| a.starts_with("r(")).count(), 6);
        assert!(f.contains("r(1,4)"));
    }

    #[test]
    fn anonymous_negation_is_projected() {
        let g = ground_src(
            "plan(1,1,2). plan(1,2,3). target(A, V) :- plan(A, U, V), not plan(A, V, _).",
        );
        let f = facts(&g);
        assert!(f.contains("target(1,3)"));
        assert!(!f.contains("target(1,2)"));
    }

    #[test]
    fn choice_heads_follow_conditions() {
        let g = ground_src("a(1..2). r(1..3). 1{loc(A, W): r(W)}1 :- a(A), A <= 1.");
        let choices: Vec<_> = g
            .rules
            .iter()
            .filter_map(|r| match r {
                GroundRule::Choice { heads, .. } => Some(heads.len()),
                _ => None,
            })
            .collect();
        assert_eq!(choices, vec![3]);
    }

    #[test]
    fn count_rules_enumerate_feasible_values() {
        let g = ground_src("a(1..3). {p(X): a(X)}3. n(N) :- N = #count{X: p(X)}.");
        let counts: Vec<usize> = g
            .rules
            .iter()
            .filter_map(|r| match r {
                GroundRule::Count { count, keys, .. } => {
                    assert_eq!(keys.len(), 3);
                    Some(*count)
                }
                _ => None,
            })
            .collect();
        assert_eq!(counts, vec![0, 1, 2, 3]);
    }

    #[test]
    fn count_over_facts_is_evaluated() {
        let g = ground_src("a(1..4). b(2). n(N) :- N = #count{X: a(X), not b(X)}.");
        assert!(facts(&g).contains("n(3)"));
        assert!(!g
            .rules
            .iter()
            .any(|r| matches!(r, GroundRule::Count { .. })));
    }

    #[test]
    fn duplicate_tuples_count_once() {
        let g = ground_src("e(1,1). e(1,2). e(2,1). n(N) :- N = #count{A: e(A, B)}.");
        assert!(facts(&g).contains("n(2)"));
    }

    #[test]
    fn recursive_aggregate_rejected() {
        let err = ground(&parse_program("p(N) :- N = #count{X: p(X)}.").unwrap()).unwrap_err();
        assert!(matches!(err, GroundError::RecursiveCondition { .. }));
    }

    #[test]
    fn deterministic_ids() {
        let src = "a(1..5). {b(X)} :- a(X). c(X) :- b(X), not d(X). d(X) :- a(X), not c(X).";
        let src = src.replace("{b(X)}", "0{b(X)}1");
        let g1 = ground_src(&src);
        let g2 = ground_src(&src);
        assert_eq!(g1.dump(), g2.dump());
        let ids1: Vec<_> = g1.atoms.iter().map(|(_, a)| a.clone()).collect();
        let ids2: Vec<_> = g2.atoms.iter().map(|(_, a)| a.clone()).collect();
        assert_eq!(ids1, ids2);
    }

    #[test]
    fn division_by_zero_reported() {
        let err = ground(&parse_program("a(0). b(X) :- a(Y), X = 1, a(X/Y).").unwrap());
        assert!(err.is_err());
    }
}
