use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Right-hand side of a causal mechanism.
///
/// Values are nonnegative integers. `xor`, `and` and `or` are bitwise, `not`
/// is logical (`0 -> 1`, anything else `-> 0`). The owning mechanism reduces
/// the final value modulo the node's alphabet size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(usize),
    Var(String),
    Xor(Vec<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Not(Box<Expr>),
    /// Explicit lookup table keyed by the values of `args`, in that order.
    Table {
        args: Vec<String>,
        entries: BTreeMap<Vec<usize>, usize>,
    },
    /// Input left open by an intervention without a fixed value.
    Free,
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn xor<I: IntoIterator<Item = Expr>>(args: I) -> Self {
        Expr::Xor(args.into_iter().collect())
    }

    /// Every name the expression reads.
    pub fn names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) | Expr::Free => {}
            Expr::Var(n) => {
                out.insert(n.clone());
            }
            Expr::Xor(args) | Expr::And(args) | Expr::Or(args) => {
                args.iter().for_each(|a| a.collect_names(out));
            }
            Expr::Not(a) => a.collect_names(out),
            Expr::Table { args, .. } => out.extend(args.iter().cloned()),
        }
    }

    pub fn rename(&mut self, from: &str, to: &str) {
        match self {
            Expr::Const(_) | Expr::Free => {}
            Expr::Var(n) => {
                if n == from {
                    *n = to.to_string();
                }
            }
            Expr::Xor(args) | Expr::And(args) | Expr::Or(args) => {
                args.iter_mut().for_each(|a| a.rename(from, to));
            }
            Expr::Not(a) => a.rename(from, to),
            Expr::Table { args, .. } => {
                for a in args.iter_mut().filter(|a| *a == from) {
                    *a = to.to_string();
                }
            }
        }
    }

    /// Evaluates with `lookup` resolving names. Returns `None` for
    /// [`Expr::Free`] or a table miss.
    pub fn eval(&self, lookup: &impl Fn(&str) -> usize) -> Option<usize> {
        Some(match self {
            Expr::Const(k) => *k,
            Expr::Var(n) => lookup(n),
            Expr::Xor(args) => fold(args, lookup, 0, |a, b| a ^ b)?,
            Expr::And(args) => fold(args, lookup, usize::MAX, |a, b| a & b)?,
            Expr::Or(args) => fold(args, lookup, 0, |a, b| a | b)?,
            Expr::Not(a) => usize::from(a.eval(lookup)? == 0),
            Expr::Table { args, entries } => {
                let key: Vec<usize> = args.iter().map(|a| lookup(a)).collect();
                *entries.get(&key)?
            }
            Expr::Free => return None,
        })
    }
}

fn fold(
    args: &[Expr],
    lookup: &impl Fn(&str) -> usize,
    init: usize,
    op: impl Fn(usize, usize) -> usize,
) -> Option<usize> {
    args.iter().try_fold(init, |acc, a| Some(op(acc, a.eval(lookup)?)))
}

fn write_args(f: &mut fmt::Formatter<'_>, name: &str, args: &[Expr]) -> fmt::Result {
    write!(f, "{name}(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(k) => write!(f, "{k}"),
            Expr::Var(n) => f.write_str(n),
            Expr::Xor(args) => write_args(f, "xor", args),
            Expr::And(args) => write_args(f, "and", args),
            Expr::Or(args) => write_args(f, "or", args),
            Expr::Not(a) => write!(f, "not({a})"),
            Expr::Table { args, entries } => {
                f.write_str("table{")?;
                for (i, (key, value)) in entries.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    let lhs: Vec<String> = args.iter().zip(key).map(|(a, v)| format!("{a}={v}")).collect();
                    write!(f, "{}:{value}", lhs.join(" "))?;
                }
                f.write_str("}")
            }
            Expr::Free => f.write_str("free"),
        }
    }
}
