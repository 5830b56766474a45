use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::ParseError;

/// Parses a complete program.
pub fn parse_program(source: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(source)?;
    let text = source.trim_end();
    let last = text.rsplit('\n').next().unwrap_or("");
    let end = (text.lines().count().max(1), last.chars().count() + 1);
    let mut parser = Parser {
        tokens,
        pos: 0,
        end,
    };
    let mut statements = Vec::new();
    while !parser.at_end() {
        statements.push(parser.statement()?);
    }
    let program = Program::new(statements);
    check_show_arities(&program)?;
    Ok(program)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    /// Line and column just past the last non-blank character.
    end: (usize, usize),
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, offset: usize) -> Option<&TokenKind> {
        self.tokens.get(self.pos + offset).map(|t| &t.kind)
    }

    fn advance(&mut self) -> Option<&Token> {
        let tok = self.tokens.get(self.pos);
        self.pos += 1;
        tok
    }

    fn error(&self, expected: &str) -> ParseError {
        match self.tokens.get(self.pos) {
            Some(tok) => ParseError::Syntax {
                expected: expected.to_string(),
                found: tok.kind.to_string(),
                line: tok.line,
                column: tok.column,
            },
            None => ParseError::UnexpectedEof {
                expected: expected.to_string(),
                line: self.end.0,
                column: self.end.1,
            },
        }
    }

    fn expect(&mut self, kind: TokenKind, expected: &str) -> PResult<()> {
        if self.peek() == Some(&kind) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(expected))
        }
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn statement(&mut self) -> PResult<Statement> {
        match self.peek() {
            Some(TokenKind::Show) => self.show(),
            Some(TokenKind::If) => {
                self.pos += 1;
                let body = self.literals()?;
                self.expect(TokenKind::Period, "`.` after constraint body")?;
                Ok(Statement::Constraint(body))
            }
            Some(TokenKind::LBrace) => self.choice(0),
            Some(TokenKind::Int(n)) if self.peek_at(1) == Some(&TokenKind::LBrace) => {
                let lower = bound(*n).ok_or_else(|| self.error("non-negative choice bound"))?;
                self.pos += 1;
                self.choice(lower)
            }
            Some(TokenKind::Ident(_)) => self.fact_or_rule(),
            _ => Err(self.error("statement")),
        }
    }

    fn show(&mut self) -> PResult<Statement> {
        self.pos += 1;
        let predicate = self.ident("predicate name after `#show`")?;
        self.expect(TokenKind::Slash, "`/` in `#show name/arity`")?;
        let arity = match self.peek() {
            Some(TokenKind::Int(n)) if *n >= 0 => *n as usize,
            _ => return Err(self.error("arity")),
        };
        self.pos += 1;
        self.expect(TokenKind::Period, "`.` after `#show`")?;
        Ok(Statement::Show { predicate, arity })
    }

    fn ident(&mut self, expected: &str) -> PResult<String> {
        match self.peek() {
            Some(TokenKind::Ident(name)) => {
                let name = name.clone();
                self.pos += 1;
                Ok(name)
            }
            _ => Err(self.error(expected)),
        }
    }

    fn choice(&mut self, lower: u32) -> PResult<Statement> {
        self.expect(TokenKind::LBrace, "`{`")?;
        let mut elements = Vec::new();
        if self.peek() != Some(&TokenKind::RBrace) {
            loop {
                let head = self.atom()?;
                let condition = if self.eat(&TokenKind::Colon) {
                    self.literals()?
                } else {
                    Vec::new()
                };
                elements.push(ChoiceElement { head, condition });
                if !self.eat(&TokenKind::Semicolon) {
                    break;
                }
            }
        }
        self.expect(TokenKind::RBrace, "`}` closing choice")?;
        let upper = match self.peek() {
            Some(TokenKind::Int(n)) => {
                let n = bound(*n).ok_or_else(|| self.error("non-negative choice bound"))?;
                self.pos += 1;
                n
            }
            _ => return Err(self.error("upper bound after `}`")),
        };
        if lower > upper {
            return Err(self.error_before("choice bounds with lower <= upper"));
        }
        let body = if self.eat(&TokenKind::If) {
            self.literals()?
        } else {
            Vec::new()
        };
        self.expect(TokenKind::Period, "`.` after choice rule")?;
        Ok(Statement::Choice(ChoiceRule {
            lower,
            upper,
            elements,
            body,
        }))
    }

    fn error_before(&self, expected: &str) -> ParseError {
        let tok = &self.tokens[self.pos.saturating_sub(1)];
        ParseError::Syntax {
            expected: expected.to_string(),
            found: tok.kind.to_string(),
            line: tok.line,
            column: tok.column,
        }
    }

    fn fact_or_rule(&mut self) -> PResult<Statement> {
        let predicate = self.ident("predicate name")?;
        let mut args = Vec::new();
        let mut has_interval = false;
        if self.eat(&TokenKind::LParen) {
            loop {
                let arg = self.fact_arg()?;
                has_interval |= matches!(arg, FactArg::Interval(..));
                args.push(arg);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
            self.expect(TokenKind::RParen, "`)` or `,` in argument list")?;
        }

        if self.eat(&TokenKind::Period) {
            if has_interval {
                return Ok(Statement::IntervalFact(IntervalAtom { predicate, args }));
            }
            return Ok(Statement::Fact(Atom::new(predicate, plain_args(args))));
        }
        if has_interval {
            return Err(self.error("`.` (intervals are only allowed in facts)"));
        }
        self.expect(TokenKind::If, "`.` or `:-`")?;
        let head = Atom::new(predicate, plain_args(args));
        let body = self.body()?;
        self.expect(TokenKind::Period, "`.` after rule body")?;
        Ok(Statement::Rule { head, body })
    }

    fn fact_arg(&mut self) -> PResult<FactArg> {
        if let (Some(TokenKind::Int(lo)), Some(TokenKind::DotDot)) = (self.peek(), self.peek_at(1))
        {
            let lo = *lo;
            self.pos += 2;
            return match self.peek() {
                Some(TokenKind::Int(hi)) => {
                    let hi = *hi;
                    self.pos += 1;
                    Ok(FactArg::Interval(lo, hi))
                }
                _ => Err(self.error("integer upper bound of interval")),
            };
        }
        Ok(FactArg::Term(self.term()?))
    }

    fn body(&mut self) -> PResult<Vec<BodyElement>> {
        let mut out = Vec::new();
        loop {
            out.push(self.body_element()?);
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        Ok(out)
    }

    fn body_element(&mut self) -> PResult<BodyElement> {
        let is_aggregate = matches!(
            (self.peek(), self.peek_at(1), self.peek_at(2)),
            (
                Some(TokenKind::Variable(_)),
                Some(TokenKind::Assign),
                Some(TokenKind::Count)
            )
        );
        if !is_aggregate {
            return Ok(BodyElement::Literal(self.literal()?));
        }
        let target = self.term()?;
        self.pos += 2;
        self.expect(TokenKind::LBrace, "`{` after `#count`")?;
        let mut elements = Vec::new();
        if self.peek() != Some(&TokenKind::RBrace) {
            loop {
                let mut tuple = vec![self.term()?];
                while self.eat(&TokenKind::Comma) {
                    tuple.push(self.term()?);
                }
                let condition = if self.eat(&TokenKind::Colon) {
                    self.literals()?
                } else {
                    Vec::new()
                };
                elements.push(CountElement { tuple, condition });
                if !self.eat(&TokenKind::Semicolon) {
                    break;
                }
            }
        }
        self.expect(TokenKind::RBrace, "`}` closing `#count`")?;
        Ok(BodyElement::Count(AggregateAssignment { target, elements }))
    }

    fn literals(&mut self) -> PResult<Vec<Literal>> {
        let mut out = vec![self.literal()?];
        while self.eat(&TokenKind::Comma) {
            out.push(self.literal()?);
        }
        Ok(out)
    }

    fn literal(&mut self) -> PResult<Literal> {
        if self.eat(&TokenKind::Not) {
            return Ok(Literal::Neg(self.atom()?));
        }
        if let Some(TokenKind::Ident(_)) = self.peek() {
            let next = self.peek_at(1);
            let is_comparison = next.is_some_and(|k| cmp_op(k).is_some())
                || matches!(
                    next,
                    Some(TokenKind::Plus | TokenKind::Minus | TokenKind::Star | TokenKind::Slash)
                );
            if !is_comparison {
                return Ok(Literal::Pos(self.atom()?));
            }
        }
        let left = self.term()?;
        let op = self
            .peek()
            .and_then(cmp_op)
            .ok_or_else(|| self.error("comparison operator"))?;
        self.pos += 1;
        let right = self.term()?;
        Ok(Literal::Cmp(left, op, right))
    }

    fn atom(&mut self) -> PResult<Atom> {
        let predicate = self.ident("atom")?;
        let mut args = Vec::new();
        if self.eat(&TokenKind::LParen) {
            loop {
                args.push(self.term()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
            self.expect(TokenKind::RParen, "`)` or `,` in argument list")?;
        }
        Ok(Atom::new(predicate, args))
    }

    fn term(&mut self) -> PResult<Term> {
        let mut left = self.product()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Plus) => ArithOp::Add,
                Some(TokenKind::Minus) => ArithOp::Sub,
                _ => return Ok(left),
            };
            self.pos += 1;
            let right = self.product()?;
            left = Term::arith(op, left, right);
        }
    }

    fn product(&mut self) -> PResult<Term> {
        let mut left = self.primary()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Star) => ArithOp::Mul,
                Some(TokenKind::Slash) => ArithOp::Div,
                _ => return Ok(left),
            };
            self.pos += 1;
            let right = self.primary()?;
            left = Term::arith(op, left, right);
        }
    }

    fn primary(&mut self) -> PResult<Term> {
        let term = match self.peek() {
            Some(TokenKind::Int(n)) => Term::Int(*n),
            Some(TokenKind::Variable(v)) => Term::Var(v.clone()),
            Some(TokenKind::Anon) => Term::Anon,
            Some(TokenKind::Ident(s)) => {
                if self.peek_at(1) == Some(&TokenKind::LParen) {
                    self.pos += 1;
                    return Err(self.error("term (function symbols are not supported)"));
                }
                Term::Sym(s.clone())
            }
            Some(TokenKind::LParen) => {
                self.pos += 1;
                let inner = self.term()?;
                self.expect(TokenKind::RParen, "`)` closing parenthesised term")?;
                return Ok(inner);
            }
            _ => return Err(self.error("term")),
        };
        self.advance();
        Ok(term)
    }
}

fn bound(n: i64) -> Option<u32> {
    u32::try_from(n).ok()
}

fn cmp_op(kind: &TokenKind) -> Option<CmpOp> {
    Some(match kind {
        TokenKind::Lt => CmpOp::Lt,
        TokenKind::Le => CmpOp::Le,
        TokenKind::Gt => CmpOp::Gt,
        TokenKind::Ge => CmpOp::Ge,
        TokenKind::EqEq | TokenKind::Assign => CmpOp::Eq,
        TokenKind::Ne => CmpOp::Ne,
        _ => return None,
    })
}

fn plain_args(args: Vec<FactArg>) -> Vec<Term> {
    args.into_iter()
        .map(|a| match a {
            FactArg::Term(t) => t,
            FactArg::Interval(..) => unreachable!("intervals handled by caller"),
        })
        .collect()
}

/// Every `#show p/n` must name an arity `p` is actually used with, when `p`
/// occurs in the same program at all.
fn check_show_arities(program: &Program) -> Result<(), ParseError> {
    let mut used: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    let mut note = |a: &Atom| {
        used.entry(a.predicate.clone())
            .or_default()
            .insert(a.arity());
    };
    for st in &program.statements {
        visit_atoms(st, &mut note);
    }
    for (predicate, arity) in program.shows() {
        if let Some(arities) = used.get(predicate) {
            if !arities.contains(&arity) {
                return Err(ParseError::ArityConflict {
                    predicate: predicate.to_string(),
                    shown: arity,
                    used: arities.iter().copied().collect(),
                });
            }
        }
    }
    Ok(())
}

fn visit_atoms<'a>(st: &'a Statement, f: &mut impl FnMut(&'a Atom)) {
    let lits = |lits: &'a [Literal], f: &mut dyn FnMut(&'a Atom)| {
        for l in lits {
            if let Literal::Pos(a) | Literal::Neg(a) = l {
                f(a);
            }
        }
    };
    match st {
        Statement::Fact(a) => f(a),
        Statement::IntervalFact(_) | Statement::Show { .. } => {}
        Statement::Rule { head, body } => {
            f(head);
            for el in body {
                match el {
                    BodyElement::Literal(l) => lits(std::slice::from_ref(l), f),
                    BodyElement::Count(agg) => {
                        for e in &agg.elements {
                            lits(&e.condition, f);
                        }
                    }
                }
            }
        }
        Statement::Choice(c) => {
            for e in &c.elements {
                f(&e.head);
                lits(&e.condition, f);
            }
            lits(&c.body, f);
        }
        Statement::Constraint(body) => lits(body, f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(name: &str) -> Term {
        Term::var(name)
    }

    #[test]
    fn covered_agent_rule() {
        let p =
            parse_program("covered_agent(A, TM) :- loc(A, T, U, V, WP), covered_wp(U, V, TM, WP).")
                .unwrap();
        let Statement::Rule { head, body } = &p.statements[0] else {
            panic!("expected rule");
        };
        assert_eq!(head.predicate, "covered_agent");
        assert_eq!(head.arity(), 2);
        assert_eq!(body.len(), 2);
        assert!(body
            .iter()
            .all(|b| matches!(b, BodyElement::Literal(Literal::Pos(_)))));
    }

    #[test]
    fn choice_rule_with_bounds() {
        let p = parse_program("1{loc(A, 1, 1, 2, WP): edge_range(1, 2, WP)}1 :- agent(A), A <= 6.")
            .unwrap();
        let Statement::Choice(c) = &p.statements[0] else {
            panic!("expected choice rule");
        };
        assert_eq!((c.lower, c.upper), (1, 1));
        assert_eq!(c.elements.len(), 1);
        assert_eq!(c.elements[0].head.predicate, "loc");
        assert_eq!(
            c.body,
            vec![
                Literal::Pos(Atom::new("agent", vec![v("A")])),
                Literal::Cmp(v("A"), CmpOp::Le, Term::Int(6)),
            ]
        );
    }

    #[test]
    fn truncated_rule_is_eof_error() {
        assert!(matches!(
            parse_program("p(X) :-"),
            Err(ParseError::UnexpectedEof { .. })
        ));
    }

    #[test]
    fn arithmetic_precedence() {
        let p = parse_program("p(X + Y * 2 - 1) :- q(X, Y).").unwrap();
        let Statement::Rule { head, .. } = &p.statements[0] else {
            panic!()
        };
        let expected = Term::arith(
            ArithOp::Sub,
            Term::arith(
                ArithOp::Add,
                v("X"),
                Term::arith(ArithOp::Mul, v("Y"), Term::Int(2)),
            ),
            Term::Int(1),
        );
        assert_eq!(head.args[0], expected);
    }

    #[test]
    fn aggregate_assignment() {
        let p = parse_program(
            "u1_only(N) :- N = #count{A:uatm1_wps(WP), not uatm2_wps(WP), loc(A, 1, 1, 2, WP), agent(A)}.",
        )
        .unwrap();
        let Statement::Rule { body, .. } = &p.statements[0] else {
            panic!()
        };
        let BodyElement::Count(agg) = &body[0] else {
            panic!("expected aggregate")
        };
        assert_eq!(agg.target, v("N"));
        assert_eq!(agg.elements.len(), 1);
        assert_eq!(agg.elements[0].tuple, vec![v("A")]);
        assert_eq!(agg.elements[0].condition.len(), 4);
        assert!(matches!(agg.elements[0].condition[1], Literal::Neg(_)));
    }

    #[test]
    fn single_equals_is_comparison_outside_aggregates() {
        let p = parse_program(":- u1_only(N), N = 0.\n:- u1_2_both(N), N == 0.").unwrap();
        let (Statement::Constraint(a), Statement::Constraint(b)) =
            (&p.statements[0], &p.statements[1])
        else {
            panic!()
        };
        assert_eq!(a[1], Literal::Cmp(v("N"), CmpOp::Eq, Term::Int(0)));
        assert_eq!(a[1], b[1]);
    }

    #[test]
    fn interval_facts() {
        let p = parse_program("edge_range(1, 2, 1..20). step(1..3).").unwrap();
        assert_eq!(
            p.statements[0],
            Statement::IntervalFact(IntervalAtom {
                predicate: "edge_range".into(),
                args: vec![
                    FactArg::Term(Term::Int(1)),
                    FactArg::Term(Term::Int(2)),
                    FactArg::Interval(1, 20)
                ],
            })
        );
    }

    #[test]
    fn interval_outside_fact_rejected() {
        assert!(parse_program("p(1..3) :- q.").is_err());
        assert!(parse_program("p(X) :- q(1..3).").is_err());
    }

    #[test]
    fn propositional_atoms_and_show() {
        let p = parse_program("p. q :- not p. #show p/0.").unwrap();
        assert_eq!(p.statements.len(), 3);
        assert_eq!(p.shows().collect::<Vec<_>>(), vec![("p", 0)]);
    }

    #[test]
    fn show_arity_conflict() {
        let err = parse_program("p(1, 2). #show p/3.").unwrap_err();
        assert!(matches!(err, ParseError::ArityConflict { shown: 3, .. }));
        // A predicate defined elsewhere is not a conflict.
        assert!(parse_program("#show loc/5.").is_ok());
    }

    #[test]
    fn syntax_error_reports_position() {
        match parse_program("p(X) :- q(X)\nr.") {
            Err(ParseError::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn function_symbols_rejected() {
        assert!(parse_program("p(f(1)).").is_err());
    }

    #[test]
    fn inverted_choice_bounds_rejected() {
        assert!(parse_program("2{a; b}1.").is_err());
    }
}
