use std::collections::HashMap;

use thiserror::Error;

use super::Value;
use crate::syntax::{ArithOp, CmpOp, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("arithmetic overflow")]
    Overflow,
    #[error("arithmetic on symbolic constant `{0}`")]
    NotAnInteger(String),
    #[error("anonymous variable has no value")]
    Anonymous,
}

/// Integer arithmetic; division truncates toward zero.
pub(crate) fn apply(op: ArithOp, a: &Value, b: &Value) -> Result<Value, EvalError> {
    let (a, b) = match (a, b) {
        (Value::Int(a), Value::Int(b)) => (*a, *b),
        (Value::Sym(s), _) | (_, Value::Sym(s)) => {
            return Err(EvalError::NotAnInteger(s.to_string()))
        }
    };
    let r = match op {
        ArithOp::Add => a.checked_add(b),
        ArithOp::Sub => a.checked_sub(b),
        ArithOp::Mul => a.checked_mul(b),
        ArithOp::Div => {
            if b == 0 {
                return Err(EvalError::DivisionByZero);
            }
            a.checked_div(b)
        }
    };
    r.map(Value::Int).ok_or(EvalError::Overflow)
}

pub(crate) fn compare(l: &Value, op: CmpOp, r: &Value) -> bool {
    match op {
        CmpOp::Lt => l < r,
        CmpOp::Le => l <= r,
        CmpOp::Gt => l > r,
        CmpOp::Ge => l >= r,
        CmpOp::Eq => l == r,
        CmpOp::Ne => l != r,
    }
}

/// Evaluates a term under a variable binding.
pub fn evaluate_term(term: &Term, binding: &HashMap<String, Value>) -> Result<Value, EvalError> {
    match term {
        Term::Int(n) => Ok(Value::Int(*n)),
        Term::Sym(s) => Ok(Value::Sym(s.as_str().into())),
        Term::Var(v) => binding
            .get(v)
            .cloned()
            .ok_or_else(|| EvalError::Unbound(v.clone())),
        Term::Anon => Err(EvalError::Anonymous),
        Term::Arith(op, l, r) => apply(
            *op,
            &evaluate_term(l, binding)?,
            &evaluate_term(r, binding)?,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::ArithOp::*;

    fn bind(pairs: &[(&str, i64)]) -> HashMap<String, Value> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), Value::Int(*v)))
            .collect()
    }

    #[test]
    fn successor_and_predecessor() {
        let b = bind(&[("T", 1)]);
        let succ = Term::arith(Add, Term::var("T"), Term::Int(1));
        let pred = Term::arith(Sub, Term::var("T"), Term::Int(1));
        assert_eq!(evaluate_term(&succ, &b), Ok(Value::Int(2)));
        assert_eq!(evaluate_term(&pred, &b), Ok(Value::Int(0)));
    }

    #[test]
    fn identity_multiplication() {
        let t = Term::arith(Mul, Term::var("X"), Term::Int(1));
        assert_eq!(evaluate_term(&t, &bind(&[("X", 7)])), Ok(Value::Int(7)));
    }

    #[test]
    fn division_truncates_toward_zero() {
        let t = Term::arith(Div, Term::var("X"), Term::Int(2));
        assert_eq!(evaluate_term(&t, &bind(&[("X", -7)])), Ok(Value::Int(-3)));
        assert_eq!(evaluate_term(&t, &bind(&[("X", 7)])), Ok(Value::Int(3)));
    }

    #[test]
    fn errors() {
        let t = Term::arith(Div, Term::var("X"), Term::Int(0));
        assert_eq!(
            evaluate_term(&t, &bind(&[("X", 1)])),
            Err(EvalError::DivisionByZero)
        );
        assert_eq!(
            evaluate_term(&Term::var("Y"), &bind(&[])),
            Err(EvalError::Unbound("Y".into()))
        );
        let sym = Term::arith(Add, Term::Sym("a".into()), Term::Int(1));
        assert!(matches!(
            evaluate_term(&sym, &bind(&[])),
            Err(EvalError::NotAnInteger(_))
        ));
        let big = Term::arith(Add, Term::Int(i64::MAX), Term::Int(1));
        assert_eq!(evaluate_term(&big, &bind(&[])), Err(EvalError::Overflow));
    }
}
