use std::fmt::{self, Display, Formatter, Write as _};

use super::ast::*;

fn join<T: Display>(f: &mut Formatter<'_>, items: &[T], sep: &str) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

fn term_prec(t: &Term) -> u8 {
    match t {
        Term::Arith(op, ..) => op.precedence(),
        _ => u8::MAX,
    }
}

impl Display for Term {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Term::Int(n) => write!(f, "{n}"),
            Term::Sym(s) | Term::Var(s) => f.write_str(s),
            Term::Anon => f.write_str("_"),
            Term::Arith(op, l, r) => {
                // Left-associative: the right operand needs parentheses at
                // equal precedence too.
                let p = op.precedence();
                if term_prec(l) < p {
                    write!(f, "({l})")?;
                } else {
                    write!(f, "{l}")?;
                }
                f.write_str(op.symbol())?;
                if term_prec(r) <= p {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
        }
    }
}

impl Display for Atom {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_char('(')?;
            join(f, &self.args, ", ")?;
            f.write_char(')')?;
        }
        Ok(())
    }
}

impl Display for Literal {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Pos(a) => write!(f, "{a}"),
            Literal::Neg(a) => write!(f, "not {a}"),
            Literal::Cmp(l, op, r) => write!(f, "{l} {} {r}", op.symbol()),
        }
    }
}

impl Display for FactArg {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            FactArg::Term(t) => write!(f, "{t}"),
            FactArg::Interval(lo, hi) => write!(f, "{lo}..{hi}"),
        }
    }
}

impl Display for IntervalAtom {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        f.write_char('(')?;
        join(f, &self.args, ", ")?;
        f.write_char(')')
    }
}

impl Display for ChoiceElement {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.condition.is_empty() {
            f.write_str(": ")?;
            join(f, &self.condition, ", ")?;
        }
        Ok(())
    }
}

impl Display for CountElement {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        join(f, &self.tuple, ", ")?;
        if !self.condition.is_empty() {
            f.write_str(": ")?;
            join(f, &self.condition, ", ")?;
        }
        Ok(())
    }
}

impl Display for AggregateAssignment {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{} = #count{{", self.target)?;
        join(f, &self.elements, "; ")?;
        f.write_char('}')
    }
}

impl Display for BodyElement {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            BodyElement::Literal(l) => write!(f, "{l}"),
            BodyElement::Count(a) => write!(f, "{a}"),
        }
    }
}

impl Display for Statement {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Fact(a) => write!(f, "{a}."),
            Statement::IntervalFact(a) => write!(f, "{a}."),
            Statement::Rule { head, body } => {
                write!(f, "{head} :- ")?;
                join(f, body, ", ")?;
                f.write_char('.')
            }
            Statement::Choice(c) => {
                write!(f, "{}{{", c.lower)?;
                join(f, &c.elements, "; ")?;
                write!(f, "}}{}", c.upper)?;
                if !c.body.is_empty() {
                    f.write_str(" :- ")?;
                    join(f, &c.body, ", ")?;
                }
                f.write_char('.')
            }
            Statement::Constraint(body) => {
                f.write_str(":- ")?;
                join(f, body, ", ")?;
                f.write_char('.')
            }
            Statement::Show { predicate, arity } => write!(f, "#show {predicate}/{arity}."),
        }
    }
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        for st in &self.statements {
            writeln!(f, "{st}")?;
        }
        Ok(())
    }
}

/// Renders a program in concrete syntax, one statement per line.
///
/// Anonymous variables are printed as `_`, so reparsing yields an identical
/// tree.
pub fn print_program(program: &Program) -> String {
    program.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_program;

    #[test]
    fn empty_program_prints_nothing() {
        assert_eq!(print_program(&Program::default()), "");
    }

    #[test]
    fn statements_render_in_source_style() {
        let src = "1{loc(A, 1, 1, 2, WP): edge_range(1, 2, WP)}1 :- agent(A), A <= 6.\n\
                   u1_only(N) :- N = #count{A: uatm1_wps(WP), not uatm2_wps(WP)}.\n\
                   :- u1_only(N), N == 0.\n\
                   #show loc/5.\n";
        assert_eq!(print_program(&parse_program(src).unwrap()), src);
    }

    #[test]
    fn parenthesised_arithmetic_survives() {
        let p = parse_program("p(X - (Y - 1), (X + 1) * 2) :- q(X, Y).").unwrap();
        let printed = print_program(&p);
        assert_eq!(printed, "p(X-(Y-1), (X+1)*2) :- q(X, Y).\n");
        assert_eq!(parse_program(&printed).unwrap(), p);
    }

    #[test]
    fn anonymous_variables_round_trip() {
        let p =
            parse_program("t(A, V) :- agent(A), plan(A, 1, U, V), not plan(A, 1, V, _).").unwrap();
        assert_eq!(parse_program(&print_program(&p)).unwrap(), p);
    }
}
