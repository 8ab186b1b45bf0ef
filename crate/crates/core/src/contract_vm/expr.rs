//! Closed expression language for guarded-command contracts.
//!
//! Expressions are pure: they read transaction arguments, the sender, the
//! block height, and contract storage, and cannot loop or call out. An unset
//! storage key reads as the integer 0, mirroring zero-initialized storage.
//! Equality comparisons across differing scalar types are simply false;
//! arithmetic and ordering require integers, logic requires booleans, and
//! `concat` requires strings. Integer overflow is an evaluation error, which
//! the interpreter surfaces as a reverted execution.

use crate::identity::Address;
use crate::state::Storage;
use crate::value::Value;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Ge,
    And,
    Or,
    Concat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    /// Address of the transaction sender, as a hex string.
    Sender,
    /// Height of the block executing the transaction.
    BlockHeight,
    Lit(Value),
    /// Positional transaction argument.
    Arg(usize),
    /// Storage read; the inner expression must evaluate to a string key.
    State(Box<Expr>),
    Not(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn lit(v: impl Into<Value>) -> Expr {
        Expr::Lit(v.into())
    }

    pub fn arg(i: usize) -> Expr {
        Expr::Arg(i)
    }

    pub fn state(key: Expr) -> Expr {
        Expr::State(Box::new(key))
    }

    pub fn state_key(key: &str) -> Expr {
        Expr::state(Expr::lit(key))
    }

    pub fn bin(op: Op, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }

    pub fn add(l: Expr, r: Expr) -> Expr {
        Expr::bin(Op::Add, l, r)
    }

    pub fn eq(l: Expr, r: Expr) -> Expr {
        Expr::bin(Op::Eq, l, r)
    }

    pub fn ne(l: Expr, r: Expr) -> Expr {
        Expr::bin(Op::Ne, l, r)
    }

    pub fn lt(l: Expr, r: Expr) -> Expr {
        Expr::bin(Op::Lt, l, r)
    }

    pub fn ge(l: Expr, r: Expr) -> Expr {
        Expr::bin(Op::Ge, l, r)
    }

    pub fn and(l: Expr, r: Expr) -> Expr {
        Expr::bin(Op::And, l, r)
    }

    pub fn or(l: Expr, r: Expr) -> Expr {
        Expr::bin(Op::Or, l, r)
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn concat(l: Expr, r: Expr) -> Expr {
        Expr::bin(Op::Concat, l, r)
    }

    /// Concatenation chain, left-assocative.
    pub fn concat_all(parts: Vec<Expr>) -> Expr {
        let mut iter = parts.into_iter();
        let first = iter.next().expect("concat_all requires at least one part");
        iter.fold(first, Expr::concat)
    }

    /// Largest argument index referenced, if any. Used by definition
    /// validation to check references against declared arity.
    pub fn max_arg_index(&self) -> Option<usize> {
        match self {
            Expr::Sender | Expr::BlockHeight | Expr::Lit(_) => None,
            Expr::Arg(i) => Some(*i),
            Expr::State(k) => k.max_arg_index(),
            Expr::Not(e) => e.max_arg_index(),
            Expr::Bin(_, l, r) => l.max_arg_index().max(r.max_arg_index()),
        }
    }
}

pub struct EvalCtx<'a> {
    pub args: &'a [Value],
    pub storage: &'a Storage,
    pub sender: &'a Address,
    pub block_height: u64,
}

pub fn eval(expr: &Expr, ctx: &EvalCtx<'_>) -> Result<Value, String> {
    match expr {
        Expr::Sender => Ok(Value::Str(ctx.sender.as_str().to_string())),
        Expr::BlockHeight => Ok(Value::Int(ctx.block_height as i64)),
        Expr::Lit(v) => Ok(v.clone()),
        Expr::Arg(i) => ctx
            .args
            .get(*i)
            .cloned()
            .ok_or_else(|| format!("argument index {i} out of range")),
        Expr::State(key) => {
            let key = eval(key, ctx)?;
            let key = key
                .as_str()
                .ok_or_else(|| format!("storage key must be a string, got {}", key.type_name()))?;
            Ok(ctx.storage.get(key).cloned().unwrap_or(Value::Int(0)))
        }
        Expr::Not(e) => {
            let v = eval(e, ctx)?;
            let b = v
                .as_bool()
                .ok_or_else(|| format!("not requires a boolean, got {}", v.type_name()))?;
            Ok(Value::Bool(!b))
        }
        Expr::Bin(op, l, r) => {
            let l = eval(l, ctx)?;
            let r = eval(r, ctx)?;
            apply(*op, l, r)
        }
    }
}

fn apply(op: Op, l: Value, r: Value) -> Result<Value, String> {
    match op {
        Op::Eq => Ok(Value::Bool(l == r)),
        Op::Ne => Ok(Value::Bool(l != r)),
        Op::Add | Op::Sub | Op::Mul => {
            let (a, b) = both_ints(op, &l, &r)?;
            let out = match op {
                Op::Add => a.checked_add(b),
                Op::Sub => a.checked_sub(b),
                Op::Mul => a.checked_mul(b),
                _ => unreachable!(),
            };
            out.map(Value::Int).ok_or_else(|| "arithmetic overflow".to_string())
        }
        Op::Lt | Op::Ge => {
            let (a, b) = both_ints(op, &l, &r)?;
            Ok(Value::Bool(if op == Op::Lt { a < b } else { a >= b }))
        }
        Op::And | Op::Or => match (l.as_bool(), r.as_bool()) {
            (Some(a), Some(b)) => Ok(Value::Bool(if op == Op::And { a && b } else { a || b })),
            _ => Err(format!(
                "{op:?} requires booleans, got {} and {}",
                l.type_name(),
                r.type_name()
            )),
        },
        Op::Concat => match (l, r) {
            (Value::Str(a), Value::Str(b)) => Ok(Value::Str(a + &b)),
            (l, r) => Err(format!(
                "concat requires strings, got {} and {}",
                l.type_name(),
                r.type_name()
            )),
        },
    }
}

fn both_ints(op: Op, l: &Value, r: &Value) -> Result<(i64, i64), String> {
    match (l.as_int(), r.as_int()) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(format!(
            "{op:?} requires integers, got {} and {}",
            l.type_name(),
            r.type_name()
        )),
    }
}
