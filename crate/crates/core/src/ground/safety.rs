use std::collections::HashSet;
use std::fmt;

use crate::syntax::{Atom, BodyElement, Literal, Statement, Term};

/// Variables of a statement that no positive literal binds. `_` outside a
/// positive or negated atom is reported as `"_"`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnsafeVariables(pub Vec<String>);

impl fmt::Display for UnsafeVariables {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(", "))
    }
}

#[derive(Default)]
struct Scope<'a> {
    bound: HashSet<&'a str>,
    unsafe_vars: Vec<String>,
}

impl<'a> Scope<'a> {
    fn bind_atom(&mut self, atom: &'a Atom) {
        for arg in &atom.args {
            if let Term::Var(v) = arg {
                self.bound.insert(v);
            }
        }
    }

    fn bind_positives(&mut self, lits: &'a [Literal]) {
        for lit in lits {
            if let Literal::Pos(a) = lit {
                self.bind_atom(a);
            }
        }
    }

    fn flag(&mut self, name: &str) {
        if !self.unsafe_vars.iter().any(|v| v == name) {
            self.unsafe_vars.push(name.to_string());
        }
    }

    fn require_term(&mut self, term: &Term, bound: &HashSet<&str>) {
        let mut vars = Vec::new();
        term.collect_vars(&mut vars);
        for v in vars {
            if !bound.contains(v) {
                self.flag(v);
            }
        }
        if term.has_anon() {
            self.flag("_");
        }
    }

    /// A positive atom may contain `_` directly; a negated one may too (it
    /// is projected away). Arithmetic operands may not.
    fn require_atom(&mut self, atom: &Atom, bound: &HashSet<&str>, anon_ok: bool) {
        for arg in &atom.args {
            match arg {
                Term::Anon if anon_ok => {}
                other => self.require_term(other, bound),
            }
        }
    }

    fn require_literals(&mut self, lits: &[Literal], bound: &HashSet<&str>) {
        for lit in lits {
            match lit {
                Literal::Pos(a) | Literal::Neg(a) => self.require_atom(a, bound, true),
                Literal::Cmp(l, _, r) => {
                    self.require_term(l, bound);
                    self.require_term(r, bound);
                }
            }
        }
    }

    fn finish(self) -> Result<(), UnsafeVariables> {
        if self.unsafe_vars.is_empty() {
            Ok(())
        } else {
            Err(UnsafeVariables(self.unsafe_vars))
        }
    }
}

/// A variable is bound when it is a direct argument of a positive body atom
/// (or of a positive condition atom, within that element), or the target of
/// a `#count` assignment. Every variable must be bound in its scope.
pub fn check_safety(statement: &Statement) -> Result<(), UnsafeVariables> {
    let mut scope = Scope::default();
    match statement {
        Statement::Show { .. } => {}
        Statement::Fact(atom) => {
            let empty = HashSet::new();
            scope.require_atom(atom, &empty, false);
        }
        Statement::IntervalFact(atom) => {
            let empty = HashSet::new();
            for arg in &atom.args {
                if let crate::syntax::FactArg::Term(t) = arg {
                    scope.require_term(t, &empty);
                }
            }
        }
        Statement::Constraint(body) => {
            scope.bind_positives(body);
            let bound = scope.bound.clone();
            scope.require_literals(body, &bound);
        }
        Statement::Rule { head, body } => {
            let mut aggregates = Vec::new();
            for el in body {
                match el {
                    BodyElement::Literal(Literal::Pos(a)) => scope.bind_atom(a),
                    BodyElement::Literal(_) => {}
                    BodyElement::Count(agg) => {
                        if let Term::Var(v) = &agg.target {
                            scope.bound.insert(v);
                        }
                        aggregates.push(agg);
                    }
                }
            }
            let bound = scope.bound.clone();
            scope.require_atom(head, &bound, false);
            for el in body {
                if let BodyElement::Literal(l) = el {
                    scope.require_literals(std::slice::from_ref(l), &bound);
                }
            }
            for agg in aggregates {
                scope.require_term(&agg.target, &bound);
                for element in &agg.elements {
                    let mut local = Scope {
                        bound: bound.clone(),
                        unsafe_vars: Vec::new(),
                    };
                    local.bind_positives(&element.condition);
                    let local_bound = local.bound.clone();
                    for t in &element.tuple {
                        local.require_term(t, &local_bound);
                    }
                    local.require_literals(&element.condition, &local_bound);
                    for v in local.unsafe_vars {
                        scope.flag(&v);
                    }
                }
            }
        }
        Statement::Choice(choice) => {
            scope.bind_positives(&choice.body);
            let bound = scope.bound.clone();
            scope.require_literals(&choice.body, &bound);
            for element in &choice.elements {
                let mut local = Scope {
                    bound: bound.clone(),
                    unsafe_vars: Vec::new(),
                };
                local.bind_positives(&element.condition);
                let local_bound = local.bound.clone();
                local.require_atom(&element.head, &local_bound, false);
                local.require_literals(&element.condition, &local_bound);
                for v in local.unsafe_vars {
                    scope.flag(&v);
                }
            }
        }
    }
    scope.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_program;

    fn check(src: &str) -> Result<(), Vec<String>> {
        let p = parse_program(src).unwrap();
        check_safety(&p.statements[0]).map_err(|u| u.0)
    }

    #[test]
    fn detour_request_rule_is_safe() {
        assert_eq!(
            check(
                "detour_request(A, T+1) :- covered_by_uatm1(A), plan(A, T, U, V), plan(A, T, 2, 3), \
                 target(A, 1, 3), edge_range(1, 2, P), loc(A, T, 1, 2, P), not step(T-1)."
            ),
            Ok(())
        );
    }

    #[test]
    fn negation_does_not_bind() {
        assert_eq!(check("p(X) :- not q(X)."), Err(vec!["X".to_string()]));
    }

    #[test]
    fn aggregate_target_binds() {
        assert_eq!(
            check("u1_only(N) :- N = #count{A:uatm1_wps(WP), not uatm2_wps(WP), loc(A, 1, 1, 2, WP), agent(A)}."),
            Ok(())
        );
        assert_eq!(
            check("c(N) :- N = #count{A: not q(A)}."),
            Err(vec!["A".to_string()])
        );
    }

    #[test]
    fn arithmetic_arguments_do_not_bind() {
        assert_eq!(check("p(X) :- q(X+1)."), Err(vec!["X".to_string()]));
        assert_eq!(check("p(X) :- q(X), r(X+1)."), Ok(()));
    }

    #[test]
    fn comparisons_need_bound_operands() {
        assert_eq!(check(":- p(X), X < Y."), Err(vec!["Y".to_string()]));
    }

    #[test]
    fn anonymous_variables() {
        // Projected inside negation, bound inside positive atoms.
        assert_eq!(
            check("source(A, 1, U) :- agent(A), plan(A, 1, U, V), not plan(A, 1, _, U)."),
            Ok(())
        );
        assert_eq!(check("p(_) :- q(1)."), Err(vec!["_".to_string()]));
    }

    #[test]
    fn choice_element_scope() {
        assert_eq!(
            check("1{loc(A, 1, 1, 2, WP): edge_range(1, 2, WP)}1 :- agent(A), A <= 6."),
            Ok(())
        );
        assert_eq!(
            check("1{loc(A, WP)}1 :- agent(A)."),
            Err(vec!["WP".to_string()])
        );
    }

    #[test]
    fn facts_must_be_ground() {
        assert_eq!(check("p(X)."), Err(vec!["X".to_string()]));
    }
}
