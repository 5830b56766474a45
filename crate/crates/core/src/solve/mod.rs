//! Stable-model enumeration.
//!
//! [`solve`] searches the completion of the program with a DPLL-style
//! procedure and checks every candidate against the definition of a stable
//! model (see [`check_stability`]) before reporting it.

mod search;
mod stable;

pub use stable::{
    check_stability, eval_aggregate, gl_reduct, is_stable, least_model, DefiniteProgram,
    DefiniteRule, Diagnosis,
};

use std::fmt;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::ground::{AtomId, GroundAtom, GroundProgram};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnswerSet {
    /// All true atoms, ascending.
    pub atoms: Vec<AtomId>,
    /// Shown atoms, sorted by predicate then arguments.
    pub projected: Vec<GroundAtom>,
}

impl AnswerSet {
    pub fn contains(&self, id: AtomId) -> bool {
        self.atoms.binary_search(&id).is_ok()
    }

    pub fn shows(&self, atom: &GroundAtom) -> bool {
        self.projected.binary_search(atom).is_ok()
    }

    /// Every true atom of the model, visible or not, in id order.
    pub fn symbols<'g>(
        &'g self,
        g: &'g GroundProgram,
    ) -> impl Iterator<Item = &'g GroundAtom> + 'g {
        self.atoms.iter().map(move |&id| g.atom(id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Satisfiable,
    Unsatisfiable,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Satisfiable => "SATISFIABLE",
            Status::Unsatisfiable => "UNSATISFIABLE",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub models: usize,
    pub decisions: u64,
    pub conflicts: u64,
    /// Total assignments that passed propagation but were not stable.
    pub rejected: u64,
    pub elapsed: Duration,
    pub first_model: Option<Duration>,
    pub last_model: Option<Duration>,
    /// The whole search space was explored, so `models` is the exact count.
    pub exhausted: bool,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: Status,
    pub models: Vec<AnswerSet>,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    /// Stop after this many models; 0 enumerates all of them.
    pub max_models: usize,
    /// Give up after this many decisions.
    pub decision_budget: Option<u64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_models: 1,
            decision_budget: None,
        }
    }
}

impl SolveOptions {
    pub fn all() -> Self {
        SolveOptions {
            max_models: 0,
            ..Self::default()
        }
    }

    pub fn models(n: usize) -> Self {
        SolveOptions {
            max_models: n,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("decision budget exhausted after {decisions} decisions ({models} models found)")]
    ResourceLimit { decisions: u64, models: usize },
}

/// Enumerates stable models of `g` in a fixed order: decisions are taken on
/// the lowest unassigned atom, true first, with chronological backtracking.
pub fn solve(g: &GroundProgram, opts: &SolveOptions) -> Result<SolveResult, SolveError> {
    search::run(g, opts)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::ground::ground;
    use crate::syntax::parse_program;

    fn gp(src: &str) -> GroundProgram {
        ground(&parse_program(src).unwrap()).unwrap()
    }

    fn model_strings(src: &str) -> Vec<Vec<String>> {
        let g = gp(src);
        let r = solve(&g, &SolveOptions::all()).unwrap();
        let mut out: Vec<Vec<String>> = r
            .models
            .iter()
            .map(|m| m.projected.iter().map(ToString::to_string).collect())
            .collect();
        out.sort();
        out
    }

    fn ids(g: &GroundProgram, names: &[&str]) -> BTreeSet<AtomId> {
        names
            .iter()
            .map(|n| {
                g.atoms
                    .iter()
                    .find(|(_, a)| a.to_string() == *n)
                    .map(|(id, _)| id)
                    .unwrap_or_else(|| panic!("no atom {n}"))
            })
            .collect()
    }

    #[test]
    fn unfounded_self_support() {
        assert_eq!(model_strings("a :- a."), vec![Vec::<String>::new()]);
    }

    #[test]
    fn constraint_on_underivable_atom() {
        let r = solve(&gp(":- not a."), &SolveOptions::all()).unwrap();
        assert_eq!(r.status, Status::Unsatisfiable);
        assert!(r.models.is_empty());
        assert!(r.stats.exhausted);
    }

    #[test]
    fn even_loop_has_two_models() {
        assert_eq!(
            model_strings("a :- not b. b :- not a."),
            vec![vec!["a".to_string()], vec!["b".to_string()]]
        );
    }

    #[test]
    fn odd_loop_has_none() {
        assert!(model_strings("a :- not a.").is_empty());
    }

    #[test]
    fn choice_enumeration() {
        let m = model_strings("x(1..3). 1{p(X): x(X)}2. #show p/1.");
        assert_eq!(m.len(), 6);
        let m = model_strings("x(1..3). 2{p(X): x(X)}2. :- p(1), p(2). #show p/1.");
        assert_eq!(m, vec![vec!["p(1)", "p(3)"], vec!["p(2)", "p(3)"]]);
    }

    #[test]
    fn count_values() {
        let m = model_strings("x(1..2). 0{p(X): x(X)}2. n(N) :- N = #count{X: p(X)}. #show n/1.");
        assert_eq!(
            m,
            vec![vec!["n(0)"], vec!["n(1)"], vec!["n(1)"], vec!["n(2)"]]
        );
    }

    #[test]
    fn reduct_examples() {
        let g = gp("p :- not q. q :- r. {r}1.");
        let q = ids(&g, &["q"]);
        let red = gl_reduct(&g, &q);
        let p = ids(&g, &["p"]).into_iter().next().unwrap();
        assert!(!red.rules.iter().any(|r| r.head == p));
        let red = gl_reduct(&g, &BTreeSet::new());
        assert!(red.rules.iter().any(|r| r.head == p && r.body.is_empty()));
    }

    #[test]
    fn least_model_chain() {
        let g = gp("a. b :- a. c :- b.");
        let lm = least_model(&gl_reduct(&g, &BTreeSet::new()));
        assert_eq!(lm, ids(&g, &["a", "b", "c"]));
    }

    #[test]
    fn stability_diagnosis() {
        let g = gp("{c}1. a :- c. a :- a. b.");
        let cand = ids(&g, &["a", "b"]);
        assert!(!is_stable(&g, &cand));
        assert!(matches!(
            check_stability(&g, &cand),
            Err(Diagnosis::Unfounded { .. })
        ));
        let g = gp("b. c :- b.");
        assert!(matches!(
            check_stability(&g, &ids(&g, &["b"])),
            Err(Diagnosis::NotClosed { .. })
        ));
        assert!(is_stable(&g, &ids(&g, &["b", "c"])));
    }

    #[test]
    fn aggregate_counts_distinct_keys() {
        assert_eq!(eval_aggregate(&[], &BTreeSet::new()), 0);
        let g = gp("x(1..3). {p(X): x(X)}3. n(N) :- N = #count{X: p(X)}.");
        let cand = ids(&g, &["p(1)", "p(3)"]);
        let elements = g
            .rules
            .iter()
            .find_map(|r| match r {
                crate::ground::GroundRule::Count { elements, .. } => Some(elements.clone()),
                _ => None,
            })
            .unwrap();
        assert_eq!(eval_aggregate(&elements, &cand), 2);
    }

    #[test]
    fn decision_budget() {
        let g = gp("x(1..8). {p(X): x(X)}8.");
        let err = solve(
            &g,
            &SolveOptions {
                max_models: 0,
                decision_budget: Some(3),
            },
        )
        .unwrap_err();
        assert!(matches!(
            err,
            SolveError::ResourceLimit { decisions: 3, .. }
        ));
    }

    #[test]
    fn bounded_enumeration_is_not_exhaustive() {
        let g = gp("x(1..3). {p(X): x(X)}3.");
        let r = solve(&g, &SolveOptions::models(1)).unwrap();
        assert_eq!(r.models.len(), 1);
        assert!(!r.stats.exhausted);
        let r = solve(&g, &SolveOptions::all()).unwrap();
        assert_eq!(r.models.len(), 8);
        assert!(r.stats.exhausted);
        let r = solve(&g, &SolveOptions::models(8)).unwrap();
        assert!(r.stats.exhausted);
    }

    #[test]
    fn bound_on_the_last_model_is_exhaustive() {
        let r = solve(&gp("a. b :- a."), &SolveOptions::models(1)).unwrap();
        assert!(r.stats.exhausted);
        let r = solve(
            &gp("x(1..2). 1{p(X): x(X)}1. :- p(1)."),
            &SolveOptions::models(1),
        )
        .unwrap();
        assert_eq!(r.models.len(), 1);
        assert!(r.stats.exhausted);
    }
}
