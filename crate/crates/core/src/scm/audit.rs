use std::collections::BTreeMap;
use std::fmt;

use super::ModelError;
use crate::graph::{Graph, Mask};
use crate::prob::JointDistribution;

/// Disjoint node sets `(X, Y, Z)`, each in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Triple {
    pub x: Vec<String>,
    pub y: Vec<String>,
    pub z: Vec<String>,
}

impl Triple {
    pub fn new<S: AsRef<str>>(x: &[S], y: &[S], z: &[S]) -> Self {
        let own = |v: &[S]| v.iter().map(|s| s.as_ref().to_string()).collect();
        Triple { x: own(x), y: own(y), z: own(z) }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({{{}}},{{{}}},{{{}}})", self.x.join(","), self.y.join(","), self.z.join(","))
    }
}

/// Every unordered pair of disjoint nonempty observed sets `X`, `Y` with
/// every conditioning set `Z` from the remaining observed nodes. `X` is the
/// member of the pair with the smaller bitmask over observed positions.
fn triples(g: &Graph) -> impl Iterator<Item = (Mask, Mask, Mask)> {
    let observed = g.observed();
    let k = observed.len();
    let full: Mask = if k == 64 { Mask::MAX } else { (1 << k) - 1 };
    let lift = move |local: Mask| {
        observed
            .iter()
            .enumerate()
            .filter(|(i, _)| local >> i & 1 == 1)
            .fold(0 as Mask, |acc, (_, &id)| acc | 1 << id)
    };
    (1..=full).flat_map(move |x| {
        let lift = lift.clone();
        (x + 1..=full).filter(move |y| x & y == 0).flat_map(move |y| {
            let rest = full & !(x | y);
            let lift = lift.clone();
            subsets(rest).map(move |z| (lift(x), lift(y), lift(z)))
        })
    })
}

/// All subsets of `mask`, the empty set first.
fn subsets(mask: Mask) -> impl Iterator<Item = Mask> {
    let mut next = Some(0 as Mask);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == mask { None } else { Some((cur.wrapping_sub(mask)) & mask) };
        Some(cur)
    })
}

fn check_variables(g: &Graph, p: &JointDistribution) -> Result<(), ModelError> {
    let want: BTreeMap<String, usize> = g
        .nodes()
        .iter()
        .filter(|n| n.is_observed())
        .map(|n| (n.name.clone(), n.alphabet))
        .collect();
    let have: BTreeMap<String, usize> = p.variables().iter().cloned().collect();
    if want != have || have.len() != p.variables().len() {
        return Err(ModelError::VariableMismatch);
    }
    Ok(())
}

/// Scans all observed triples and keeps those where d-separation and
/// independence disagree in the requested direction.
fn scan(g: &Graph, p: &JointDistribution, want_separated: bool) -> Result<Vec<Triple>, ModelError> {
    check_variables(g, p)?;
    let mut out = Vec::new();
    for (x, y, z) in triples(g) {
        let separated = g.d_separated_masks(x, y, z)?;
        if separated != want_separated {
            continue;
        }
        let (xs, ys, zs) = (g.names_of(x), g.names_of(y), g.names_of(z));
        let independent = p.is_independent(&xs, &ys, &zs)?;
        if independent != want_separated {
            out.push(Triple { x: xs, y: ys, z: zs });
        }
    }
    Ok(out)
}

/// Observed triples that are d-separated in `g` but dependent under `p`.
pub fn check_dsep_property(g: &Graph, p: &JointDistribution) -> Result<Vec<Triple>, ModelError> {
    scan(g, p, true)
}

/// Observed triples that are d-connected in `g` but independent under `p`.
/// Empty exactly when `p` is faithful to `g`.
pub fn detect_fine_tuning(g: &Graph, p: &JointDistribution) -> Result<Vec<Triple>, ModelError> {
    scan(g, p, false)
}
