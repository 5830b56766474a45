//! Instantiation of programs into variable-free form.
//!
//! [`ground`] turns a [`Program`](crate::syntax::Program) into a
//! [`GroundProgram`]: a dense atom table plus normal, choice, constraint and
//! counting rules over atom ids.

mod eval;
mod instantiate;
mod safety;
mod simplify;

pub use eval::{evaluate_term, EvalError};
pub use instantiate::{ground, ground_detailed, Grounding};
pub use safety::{check_safety, UnsafeVariables};

use std::collections::HashMap;
use std::fmt::{self, Display, Formatter, Write as _};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

/// A ground constant. Integers order before symbols.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Sym(Arc<str>),
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            Value::Sym(_) => None,
        }
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Self {
        Value::Int(n)
    }
}

impl Display for Value {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Sym(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GroundAtom {
    pub predicate: Arc<str>,
    pub args: Vec<Value>,
}

impl GroundAtom {
    pub fn new(predicate: &str, args: Vec<Value>) -> Self {
        GroundAtom {
            predicate: Arc::from(predicate),
            args,
        }
    }

    /// Shorthand for all-integer atoms.
    pub fn ints(predicate: &str, args: &[i64]) -> Self {
        GroundAtom::new(predicate, args.iter().map(|&n| Value::Int(n)).collect())
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn int_args(&self) -> Option<Vec<i64>> {
        self.args.iter().map(Value::as_int).collect()
    }

    /// Internal auxiliary predicates start with `#` and can never be written
    /// in source programs.
    pub fn is_hidden(&self) -> bool {
        self.predicate.starts_with('#')
    }
}

impl Display for GroundAtom {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_char('(')?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_char(',')?;
                }
                write!(f, "{a}")?;
            }
            f.write_char(')')?;
        }
        Ok(())
    }
}

/// Dense index into an [`AtomTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct AtomId(pub u32);

impl AtomId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Default)]
pub struct AtomTable {
    atoms: Vec<GroundAtom>,
    index: HashMap<GroundAtom, AtomId>,
}

impl AtomTable {
    pub fn intern(&mut self, atom: GroundAtom) -> AtomId {
        if let Some(&id) = self.index.get(&atom) {
            return id;
        }
        let id = AtomId(self.atoms.len() as u32);
        self.atoms.push(atom.clone());
        self.index.insert(atom, id);
        id
    }

    pub fn get(&self, id: AtomId) -> &GroundAtom {
        &self.atoms[id.index()]
    }

    pub fn lookup(&self, atom: &GroundAtom) -> Option<AtomId> {
        self.index.get(atom).copied()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (AtomId, &GroundAtom)> {
        self.atoms
            .iter()
            .enumerate()
            .map(|(i, a)| (AtomId(i as u32), a))
    }
}

/// One alternative for a `#count` tuple: the tuple `key` is counted when all
/// of `pos` hold and none of `neg` do.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CountElement {
    pub key: usize,
    pub pos: Vec<AtomId>,
    pub neg: Vec<AtomId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GroundRule {
    Normal {
        head: AtomId,
        pos: Vec<AtomId>,
        neg: Vec<AtomId>,
    },
    Choice {
        lower: u32,
        upper: u32,
        heads: Vec<AtomId>,
        pos: Vec<AtomId>,
        neg: Vec<AtomId>,
    },
    Constraint {
        pos: Vec<AtomId>,
        neg: Vec<AtomId>,
    },
    /// `head :- pos, not neg, #count{keys : elements} = count.`
    Count {
        head: AtomId,
        keys: Vec<Vec<Value>>,
        elements: Vec<CountElement>,
        count: usize,
        pos: Vec<AtomId>,
        neg: Vec<AtomId>,
    },
}

impl GroundRule {
    pub fn body(&self) -> (&[AtomId], &[AtomId]) {
        match self {
            GroundRule::Normal { pos, neg, .. }
            | GroundRule::Choice { pos, neg, .. }
            | GroundRule::Constraint { pos, neg }
            | GroundRule::Count { pos, neg, .. } => (pos, neg),
        }
    }

    pub fn is_fact(&self) -> bool {
        matches!(self, GroundRule::Normal { pos, neg, .. } if pos.is_empty() && neg.is_empty())
    }
}

/// Number of distinct keys with at least one satisfied alternative.
pub fn count_keys(keys: usize, elements: &[CountElement], holds: impl Fn(AtomId) -> bool) -> usize {
    let mut seen = vec![false; keys];
    for el in elements {
        if !seen[el.key] && el.pos.iter().all(|&a| holds(a)) && el.neg.iter().all(|&a| !holds(a)) {
            seen[el.key] = true;
        }
    }
    seen.into_iter().filter(|&s| s).count()
}

#[derive(Debug, Clone, Default)]
pub struct GroundProgram {
    pub atoms: AtomTable,
    pub rules: Vec<GroundRule>,
    pub shows: Vec<(String, usize)>,
}

impl GroundProgram {
    pub fn atom(&self, id: AtomId) -> &GroundAtom {
        self.atoms.get(id)
    }

    pub fn lookup(&self, atom: &GroundAtom) -> Option<AtomId> {
        self.atoms.lookup(atom)
    }

    /// With no `#show` directives every visible atom is shown.
    pub fn is_shown(&self, id: AtomId) -> bool {
        let atom = self.atoms.get(id);
        if atom.is_hidden() {
            return false;
        }
        self.shows.is_empty()
            || self
                .shows
                .iter()
                .any(|(p, n)| **p == *atom.predicate && *n == atom.arity())
    }

    /// Shown atoms of `ids`, sorted by predicate then arguments.
    pub fn project<'a>(&self, ids: impl IntoIterator<Item = &'a AtomId>) -> Vec<GroundAtom> {
        let mut out: Vec<GroundAtom> = ids
            .into_iter()
            .filter(|&&id| self.is_shown(id))
            .map(|&id| self.atoms.get(id).clone())
            .collect();
        out.sort();
        out
    }

    /// Textual dump, one rule per line in source syntax.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            self.write_rule(&mut out, rule).expect("writing to String");
            out.push('\n');
        }
        out
    }

    /// One rule in the dump syntax.
    pub fn rule_text(&self, rule: &GroundRule) -> String {
        let mut out = String::new();
        self.write_rule(&mut out, rule).expect("writing to String");
        out
    }

    fn write_rule(&self, out: &mut String, rule: &GroundRule) -> fmt::Result {
        let (pos, neg) = rule.body();
        let mut body: Vec<String> = pos.iter().map(|&a| self.atom(a).to_string()).collect();
        body.extend(neg.iter().map(|&a| format!("not {}", self.atom(a))));
        match rule {
            GroundRule::Normal { head, .. } => write!(out, "{}", self.atom(*head))?,
            GroundRule::Choice {
                lower,
                upper,
                heads,
                ..
            } => {
                let hs: Vec<String> = heads.iter().map(|&h| self.atom(h).to_string()).collect();
                write!(out, "{lower}{{{}}}{upper}", hs.join("; "))?;
            }
            GroundRule::Constraint { .. } => {}
            GroundRule::Count {
                head,
                keys,
                elements,
                count,
                ..
            } => {
                write!(out, "{}", self.atom(*head))?;
                let els: Vec<String> = elements
                    .iter()
                    .map(|e| {
                        let key: Vec<String> = keys[e.key].iter().map(Value::to_string).collect();
                        let mut cond: Vec<String> =
                            e.pos.iter().map(|&a| self.atom(a).to_string()).collect();
                        cond.extend(e.neg.iter().map(|&a| format!("not {}", self.atom(a))));
                        if cond.is_empty() {
                            key.join(",")
                        } else {
                            format!("{}: {}", key.join(","), cond.join(", "))
                        }
                    })
                    .collect();
                body.push(format!("#count{{{}}} = {count}", els.join("; ")));
            }
        }
        if !body.is_empty() || matches!(rule, GroundRule::Constraint { .. }) {
            write!(out, ":- {}", body.join(", "))?;
        }
        out.push('.');
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroundError {
    #[error("unsafe variables {} in `{statement}`", .variables.join(", "))]
    Unsafe {
        statement: String,
        variables: Vec<String>,
    },
    #[error("empty interval {lo}..{hi} in `{statement}`")]
    EmptyInterval { statement: String, lo: i64, hi: i64 },
    #[error("{source} in `{statement}`")]
    Eval {
        statement: String,
        #[source]
        source: EvalError,
    },
    #[error("`{predicate}` is used in an aggregate or choice condition that depends on itself")]
    RecursiveCondition { predicate: String },
    #[error("cannot order the body of `{statement}` for instantiation")]
    Unschedulable { statement: String },
}
