//! Abstract syntax for the logic-program dialect.
//!
//! The dialect is a small subset of ASP-Core: facts (optionally with integer
//! intervals), normal rules, bounded choice rules, `#count` assignments,
//! integrity constraints, and `#show` directives.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            ArithOp::Add | ArithOp::Sub => 1,
            ArithOp::Mul | ArithOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Term {
    Int(i64),
    Sym(String),
    Var(String),
    /// `_`; every occurrence is a distinct variable.
    Anon,
    Arith(ArithOp, Box<Term>, Box<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn arith(op: ArithOp, left: Term, right: Term) -> Self {
        Term::Arith(op, Box::new(left), Box::new(right))
    }

    /// Pushes every named variable occurring in the term, in order.
    pub fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Term::Var(name) => out.push(name),
            Term::Arith(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Term::Int(_) | Term::Sym(_) | Term::Anon => {}
        }
    }

    pub fn has_anon(&self) -> bool {
        match self {
            Term::Anon => true,
            Term::Arith(_, l, r) => l.has_anon() || r.has_anon(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        for arg in &self.args {
            arg.collect_vars(out);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Literal {
    Pos(Atom),
    /// Negation as failure.
    Neg(Atom),
    Cmp(Term, CmpOp, Term),
}

impl Literal {
    pub fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Literal::Pos(a) | Literal::Neg(a) => a.collect_vars(out),
            Literal::Cmp(l, _, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum FactArg {
    Term(Term),
    Interval(i64, i64),
}

/// A fact with at least one `lo..hi` argument.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct IntervalAtom {
    pub predicate: String,
    pub args: Vec<FactArg>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ChoiceElement {
    pub head: Atom,
    pub condition: Vec<Literal>,
}

/// `lower{ head : condition; ... }upper :- body.`
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ChoiceRule {
    pub lower: u32,
    pub upper: u32,
    pub elements: Vec<ChoiceElement>,
    pub body: Vec<Literal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CountElement {
    pub tuple: Vec<Term>,
    pub condition: Vec<Literal>,
}

/// `Target = #count{ tuple : condition; ... }`
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct AggregateAssignment {
    pub target: Term,
    pub elements: Vec<CountElement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum BodyElement {
    Literal(Literal),
    Count(AggregateAssignment),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Statement {
    Fact(Atom),
    IntervalFact(IntervalAtom),
    Rule { head: Atom, body: Vec<BodyElement> },
    Choice(ChoiceRule),
    Constraint(Vec<Literal>),
    Show { predicate: String, arity: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Program {
    pub statements: Vec<Statement>,
}

impl Program {
    pub fn new(statements: Vec<Statement>) -> Self {
        Program { statements }
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    /// Concatenation in order, the way a solver reads several files.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Program>) -> Program {
        Program {
            statements: parts
                .into_iter()
                .flat_map(|p| p.statements.iter().cloned())
                .collect(),
        }
    }

    pub fn shows(&self) -> impl Iterator<Item = (&str, usize)> {
        self.statements.iter().filter_map(|s| match s {
            Statement::Show { predicate, arity } => Some((predicate.as_str(), *arity)),
            _ => None,
        })
    }
}
