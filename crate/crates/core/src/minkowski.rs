//! Causal order of (d+1)-Minkowski space-time with exact rational points,
//! and compatibility of embeddings with affects relations.
//!
//! Future cones are closed, so light-like separated points are ordered.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::certify::derived_relations;
use crate::intervention::AffectsSet;
use crate::prob::{product, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MinkowskiError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("spatial dimension must be at least 1")]
    ZeroDimension,
    #[error("point set must be nonempty")]
    EmptySet,
    #[error("no frame-independent earliest location exists in {0}+1 dimensions")]
    NoEarliestPoint(usize),
    #[error("no location for node `{0}`")]
    MissingLocation(String),
    #[error("nodes `{0}` and `{1}` share a location")]
    CoLocated(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpacetimePoint {
    pub t: Rational,
    pub x: Vec<Rational>,
}

impl SpacetimePoint {
    pub fn new(t: Rational, x: Vec<Rational>) -> Self {
        SpacetimePoint { t, x }
    }

    pub fn from_ints(t: i64, x: &[i64]) -> Self {
        let r = |v: i64| Rational::from_integer(v.into());
        SpacetimePoint { t: r(t), x: x.iter().map(|&v| r(v)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `t - x`, in 1+1 dimensions.
    fn u(&self) -> Rational {
        &self.t - &self.x[0]
    }

    /// `t + x`, in 1+1 dimensions.
    fn v(&self) -> Rational {
        &self.t + &self.x[0]
    }

    fn from_light_cone(u: Rational, v: Rational) -> Self {
        let two = Rational::from_integer(2.into());
        SpacetimePoint { t: (&u + &v) / &two, x: vec![(v - u) / two] }
    }
}

impl fmt::Display for SpacetimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let xs: Vec<String> = self.x.iter().map(|c| c.to_string()).collect();
        write!(f, "({},({}))", self.t, xs.join(","))
    }
}

fn same_dim<'a>(points: impl IntoIterator<Item = &'a SpacetimePoint>) -> Result<usize, MinkowskiError> {
    let mut dim = None;
    for p in points {
        match dim {
            None => dim = Some(p.dim()),
            Some(d) if d != p.dim() => return Err(MinkowskiError::DimensionMismatch { expected: d, got: p.dim() }),
            _ => {}
        }
    }
    match dim {
        None => Err(MinkowskiError::EmptySet),
        Some(0) => Err(MinkowskiError::ZeroDimension),
        Some(d) => Ok(d),
    }
}

fn sq_dist(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(p, q)| (q - p) * (q - p)).sum()
}

fn precedes(p: &SpacetimePoint, q: &SpacetimePoint) -> bool {
    let dt = &q.t - &p.t;
    !dt.is_negative() && &dt * &dt >= sq_dist(&p.x, &q.x)
}

/// Whether `q` lies in the closed future cone of `p`.
pub fn causally_precedes(p: &SpacetimePoint, q: &SpacetimePoint) -> Result<bool, MinkowskiError> {
    same_dim([p, q])?;
    Ok(precedes(p, q))
}

/// Whether `q` lies in the joint future of every point of `s`.
pub fn joint_future_membership(s: &[SpacetimePoint], q: &SpacetimePoint) -> Result<bool, MinkowskiError> {
    if s.is_empty() {
        return Err(MinkowskiError::EmptySet);
    }
    same_dim(s.iter().chain([q]))?;
    Ok(s.iter().all(|p| precedes(p, q)))
}

/// The point whose future cone is exactly the joint future of `s`. Only
/// exists in 1+1 dimensions: maximal light-cone coordinates.
pub fn earliest_joint_point(s: &[SpacetimePoint]) -> Result<SpacetimePoint, MinkowskiError> {
    let d = same_dim(s)?;
    if d != 1 {
        return Err(MinkowskiError::NoEarliestPoint(d));
    }
    let u = s.iter().map(SpacetimePoint::u).max().expect("nonempty");
    let v = s.iter().map(SpacetimePoint::v).max().expect("nonempty");
    Ok(SpacetimePoint::from_light_cone(u, v))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContainmentVerdict {
    Contained,
    /// A point of the joint future outside the tested future cone.
    NotContained(SpacetimePoint),
    /// No witness found within the search budget.
    Unknown,
}

/// Witness search budget for joint-future containment above 1+1
/// dimensions. Candidates are minimal points of the joint future above
/// `x_s + r n` for rational unit directions `n` and radii `r`; the best
/// `refine_starts` of them then seed a Nelder-Mead search for the spatial
/// position where the joint future starts furthest below the cone of `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchBudget {
    pub directions: usize,
    /// Radii as powers of two, `2^min_exp ..= 2^max_exp`, plus zero.
    pub min_exp: i32,
    pub max_exp: i32,
    pub refine_starts: usize,
    pub refine_iters: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { directions: 2048, min_exp: -8, max_exp: 24, refine_starts: 8, refine_iters: 600 }
    }
}

/// Whether the joint future of `t` is contained in the future of `s`.
/// Exact in 1+1 dimensions and for two points in any dimension, where
/// containment holds iff `s` precedes a point of their segment. Larger sets
/// above 1+1 dimensions fall back to a witness search and may end `Unknown`.
pub fn region_in_future(t: &[SpacetimePoint], s: &SpacetimePoint) -> Result<ContainmentVerdict, MinkowskiError> {
    region_in_future_with(t, s, &SearchBudget::default())
}

pub fn region_in_future_with(
    t: &[SpacetimePoint],
    s: &SpacetimePoint,
    budget: &SearchBudget,
) -> Result<ContainmentVerdict, MinkowskiError> {
    if t.is_empty() {
        return Err(MinkowskiError::EmptySet);
    }
    let d = same_dim(t.iter().chain([s]))?;
    if t.len() == 1 {
        return Ok(if precedes(s, &t[0]) {
            ContainmentVerdict::Contained
        } else {
            ContainmentVerdict::NotContained(t[0].clone())
        });
    }
    if d == 1 {
        let earliest = earliest_joint_point(t)?;
        return Ok(if precedes(s, &earliest) {
            ContainmentVerdict::Contained
        } else {
            ContainmentVerdict::NotContained(earliest)
        });
    }
    // The joint future lies inside the future of any point of a segment
    // between two members, so `s` preceding such a point suffices.
    if t.iter().any(|p| precedes(s, p)) {
        return Ok(ContainmentVerdict::Contained);
    }
    for (i, a) in t.iter().enumerate() {
        for b in &t[i + 1..] {
            if precedes_segment(s, a, b) {
                return Ok(ContainmentVerdict::Contained);
            }
        }
    }
    if let [a, b] = t {
        if let Some(q) = pair_witness(a, b, s) {
            return Ok(ContainmentVerdict::NotContained(q));
        }
    }
    Ok(search_witness(t, s, d, budget).map_or(ContainmentVerdict::Unknown, ContainmentVerdict::NotContained))
}

/// Rational point of the unit sphere near the unit vector `u`, by inverse
/// stereographic projection from whichever pole is further from `u`.
fn rational_unit(u: &[f64]) -> Option<Vec<Rational>> {
    let d = u.len();
    let last = u[d - 1];
    let sign = if last > 0.0 { 1.0 } else { -1.0 };
    let p: Option<Vec<Rational>> = u[..d - 1].iter().map(|c| Rational::from_float(c / (1.0 + sign * last))).collect();
    let p = p?;
    let norm: Rational = p.iter().map(|c| c * c).sum();
    let denom = &norm + Rational::one();
    let two = Rational::from_integer(2.into());
    let mut n: Vec<Rational> = p.iter().map(|c| &two * c / &denom).collect();
    let tail = (Rational::one() - norm) / denom;
    n.push(if sign > 0.0 { tail } else { -tail });
    Some(n)
}

/// Witness for two points when `s` precedes no point of their segment.
/// Along a ray `x_s + R u` the joint future falls below the cone of `s` by
/// an amount increasing in `R` towards `min_i (u . w_i - tau_i)`, with
/// `w_i = x_i - x_s` and `tau_i = t_i - t_s`; the best `u` is the direction
/// of `w` at the segment point minimizing `|w| - tau`.
fn pair_witness(a: &SpacetimePoint, b: &SpacetimePoint, s: &SpacetimePoint) -> Option<SpacetimePoint> {
    let rel = |p: &SpacetimePoint| -> (Vec<f64>, f64) {
        (p.x.iter().zip(&s.x).map(|(x, y)| to_f64(&(x - y))).collect(), to_f64(&(&p.t - &s.t)))
    };
    let ((wa, ta), (wb, tb)) = (rel(a), rel(b));
    let at = |l: f64| -> (Vec<f64>, f64) {
        (wa.iter().zip(&wb).map(|(x, y)| l * x + (1.0 - l) * y).collect(), l * ta + (1.0 - l) * tb)
    };
    let phi = |l: f64| {
        let (w, tau) = at(l);
        w.iter().map(|c| c * c).sum::<f64>().sqrt() - tau
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if phi(m1) < phi(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let (w, _) = at((lo + hi) / 2.0);
    let norm = w.iter().map(|c| c * c).sum::<f64>().sqrt();
    let mut candidates = Vec::new();
    if norm > 1e-12 {
        candidates.push(w.iter().map(|c| c / norm).collect::<Vec<f64>>());
    }
    for axis in 0..w.len() {
        for sign in [1.0, -1.0] {
            let mut u = vec![0.0; w.len()];
            u[axis] = sign;
            candidates.push(u);
        }
    }
    let pair = [a.clone(), b.clone()];
    let gap = Gap {
        t: &pair,
        s,
        tf: pair.iter().map(|p| (to_f64(&p.t), p.x.iter().map(to_f64).collect())).collect(),
        st: to_f64(&s.t),
        sx: s.x.iter().map(to_f64).collect(),
    };
    for u in candidates {
        let limit = [(&wa, ta), (&wb, tb)]
            .iter()
            .map(|(w, tau)| w.iter().zip(&u).map(|(p, q)| p * q).sum::<f64>() - tau)
            .fold(f64::INFINITY, f64::min);
        if limit <= 0.0 {
            continue;
        }
        let Some(n) = rational_unit(&u) else { continue };
        let nf: Vec<f64> = n.iter().map(to_f64).collect();
        let mut r = Rational::one();
        for _ in 0..48 {
            let rf = to_f64(&r);
            let y: Vec<f64> = gap.sx.iter().zip(&nf).map(|(p, q)| p + rf * q).collect();
            let (f, g) = gap.at(&y);
            if Gap::worth_verifying(f, g) {
                let exact: Vec<Rational> = s.x.iter().zip(&n).map(|(p, q)| p + &r * q).collect();
                if let Some(q) = gap.verify(&exact, f, g) {
                    return Some(q);
                }
            }
            r *= Rational::from_integer(2.into());
        }
    }
    None
}

/// Whether `s` precedes some point `l a + (1 - l) b` with `l` in `[0, 1]`.
fn precedes_segment(s: &SpacetimePoint, a: &SpacetimePoint, b: &SpacetimePoint) -> bool {
    let zero = Rational::zero();
    let one = Rational::one();
    let tau_b = &b.t - &s.t;
    let d_tau = &a.t - &b.t;
    let w_b: Vec<Rational> = b.x.iter().zip(&s.x).map(|(p, q)| p - q).collect();
    let d_w: Vec<Rational> = a.x.iter().zip(&b.x).map(|(p, q)| p - q).collect();
    let dot = |u: &[Rational], v: &[Rational]| -> Rational { u.iter().zip(v).map(|(p, q)| p * q).sum() };

    // Interval where the time offset is nonnegative.
    let (lo, hi) = if d_tau.is_zero() {
        if tau_b.is_negative() {
            return false;
        }
        (zero.clone(), one.clone())
    } else {
        let root = -&tau_b / &d_tau;
        if d_tau.is_positive() {
            (root.max(zero.clone()), one.clone())
        } else {
            (zero.clone(), root.min(one.clone()))
        }
    };
    if lo > hi {
        return false;
    }
    // |W(l)|^2 - L(l)^2 as a quadratic in l.
    let qa = dot(&d_w, &d_w) - &d_tau * &d_tau;
    let qb = (dot(&w_b, &d_w) - &tau_b * &d_tau) * Rational::from_integer(2.into());
    let qc = dot(&w_b, &w_b) - &tau_b * &tau_b;
    let value = |l: &Rational| &qa * l * l + &qb * l + &qc;
    let mut candidates = vec![lo.clone(), hi.clone()];
    if qa.is_positive() {
        let vertex = -&qb / (Rational::from_integer(2.into()) * &qa);
        if vertex >= lo && vertex <= hi {
            candidates.push(vertex);
        }
    }
    candidates.iter().any(|l| !value(l).is_positive())
}

/// Rational unit vectors in deterministic order: signed axes first, then
/// inverse stereographic images of grid points of growing resolution.
fn directions(d: usize, limit: usize) -> Vec<Vec<Rational>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut push = |n: Vec<Rational>, out: &mut Vec<Vec<Rational>>| {
        if out.len() < limit && seen.insert(n.clone()) {
            out.push(n);
        }
    };
    for axis in 0..d {
        for sign in [1, -1] {
            let mut n = vec![Rational::zero(); d];
            n[axis] = Rational::from_integer(sign.into());
            push(n, &mut out);
        }
    }
    let mut m: i64 = 1;
    while out.len() < limit && d > 1 {
        let span = 6 * m as usize + 1;
        for ks in product(&vec![span; d - 1]) {
            if out.len() >= limit {
                break;
            }
            let p: Vec<Rational> = ks.iter().map(|&k| Rational::new((k as i64 - 3 * m).into(), m.into())).collect();
            let norm: Rational = p.iter().map(|c| c * c).sum();
            let denom = &norm + Rational::one();
            let two = Rational::from_integer(2.into());
            let mut n: Vec<Rational> = p.iter().map(|c| &two * c / &denom).collect();
            n.push((norm - Rational::one()) / &denom);
            push(n, &mut out);
        }
        m += 1;
        if m > 64 {
            break;
        }
    }
    out
}

fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

struct Gap<'a> {
    t: &'a [SpacetimePoint],
    s: &'a SpacetimePoint,
    tf: Vec<(f64, Vec<f64>)>,
    st: f64,
    sx: Vec<f64>,
}

impl Gap<'_> {
    /// Earliest joint-future time above `y`, and how far it lies below the
    /// boundary of the future of `s` there.
    fn at(&self, y: &[f64]) -> (f64, f64) {
        let dist = |x: &[f64]| x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let f = self.tf.iter().map(|(ti, xi)| ti + dist(xi)).fold(f64::NEG_INFINITY, f64::max);
        (f, self.st + dist(&self.sx) - f)
    }

    fn worth_verifying(f: f64, gap: f64) -> bool {
        gap > 1e-12 * (1.0 + f.abs())
    }

    fn verify(&self, y: &[Rational], f: f64, gap: f64) -> Option<SpacetimePoint> {
        for frac in [0.5, 0.25, 0.75] {
            let Some(tq) = Rational::from_float(f + gap * frac) else { continue };
            let q = SpacetimePoint::new(tq, y.to_vec());
            if self.t.iter().all(|p| precedes(p, &q)) && !precedes(self.s, &q) {
                return Some(q);
            }
        }
        None
    }

    fn verify_float(&self, y: &[f64]) -> Option<SpacetimePoint> {
        let (f, gap) = self.at(y);
        if !Self::worth_verifying(f, gap) {
            return None;
        }
        let exact: Option<Vec<Rational>> = y.iter().map(|&c| Rational::from_float(c)).collect();
        self.verify(&exact?, f, gap)
    }

    /// Nelder-Mead maximization of the gap from `start`.
    fn refine(&self, start: Vec<f64>, scale: f64, iters: usize) -> Option<SpacetimePoint> {
        let d = start.len();
        let mut simplex: Vec<(f64, Vec<f64>)> = (0..=d)
            .map(|i| {
                let mut y = start.clone();
                if i > 0 {
                    y[i - 1] += scale;
                }
                (self.at(&y).1, y)
            })
            .collect();
        let blend = |a: &[f64], b: &[f64], w: f64| a.iter().zip(b).map(|(p, q)| p + w * (q - p)).collect::<Vec<f64>>();
        for _ in 0..iters {
            simplex.sort_by(|a, b| b.0.total_cmp(&a.0));
            if let Some(q) = self.verify_float(&simplex[0].1) {
                return Some(q);
            }
            let size = simplex[1..]
                .iter()
                .map(|(_, y)| y.iter().zip(&simplex[0].1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if size < 1e-13 * (1.0 + simplex[0].1.iter().map(|c| c.abs()).fold(0.0, f64::max)) {
                break;
            }
            let mut centroid = vec![0.0; d];
            for (_, y) in &simplex[..d] {
                for (c, v) in centroid.iter_mut().zip(y) {
                    *c += v / d as f64;
                }
            }
            let worst = simplex[d].clone();
            let reflected = blend(&centroid, &worst.1, -1.0);
            let fr = self.at(&reflected).1;
            if fr > simplex[0].0 {
                let expanded = blend(&centroid, &worst.1, -2.0);
                let fe = self.at(&expanded).1;
                simplex[d] = if fe > fr { (fe, expanded) } else { (fr, reflected) };
            } else if fr > simplex[d - 1].0 {
                simplex[d] = (fr, reflected);
            } else {
                let contracted = blend(&centroid, &worst.1, 0.5);
                let fc = self.at(&contracted).1;
                if fc > worst.0 {
                    simplex[d] = (fc, contracted);
                } else {
                    let best = simplex[0].1.clone();
                    for v in simplex.iter_mut().skip(1) {
                        v.1 = blend(&best, &v.1, 0.5);
                        v.0 = self.at(&v.1).1;
                    }
                }
            }
        }
        None
    }
}

/// Looks for `q` in the joint future of `t` but outside the future of `s`,
/// verifying every candidate exactly.
fn search_witness(t: &[SpacetimePoint], s: &SpacetimePoint, d: usize, budget: &SearchBudget) -> Option<SpacetimePoint> {
    let gap = Gap {
        t,
        s,
        tf: t.iter().map(|p| (to_f64(&p.t), p.x.iter().map(to_f64).collect())).collect(),
        st: to_f64(&s.t),
        sx: s.x.iter().map(to_f64).collect(),
    };
    let mut radii = vec![Rational::zero()];
    for e in budget.min_exp..=budget.max_exp {
        let two = Rational::from_integer(2.into());
        radii.push(if e >= 0 { num_traits::pow(two, e as usize) } else { Rational::one() / num_traits::pow(two, (-e) as usize) });
    }
    let all = directions(d, budget.directions);
    // A coarse pass with refinement usually suffices; the full grid is the
    // fallback.
    let coarse = all.len().min(64);
    for dirs in [&all[..coarse], &all[coarse..]] {
        // Best grid candidates as (gap, position, radius).
        let mut seeds: Vec<(f64, Vec<f64>, f64)> = Vec::new();
        for n in dirs {
            let nf: Vec<f64> = n.iter().map(to_f64).collect();
            for r in &radii {
                let rf = to_f64(r);
                let y: Vec<f64> = gap.sx.iter().zip(&nf).map(|(a, b)| a + rf * b).collect();
                let (f, g) = gap.at(&y);
                if Gap::worth_verifying(f, g) {
                    let y_exact: Vec<Rational> = s.x.iter().zip(n).map(|(a, b)| a + r * b).collect();
                    if let Some(q) = gap.verify(&y_exact, f, g) {
                        return Some(q);
                    }
                }
                if budget.refine_starts > 0 && g.is_finite() {
                    seeds.push((g, y, rf));
                    if seeds.len() > 4 * budget.refine_starts {
                        seeds.sort_by(|a, b| b.0.total_cmp(&a.0));
                        seeds.truncate(budget.refine_starts);
                    }
                }
            }
        }
        seeds.sort_by(|a, b| b.0.total_cmp(&a.0));
        seeds.truncate(budget.refine_starts);
        let found =
            seeds.into_iter().find_map(|(_, y, r)| gap.refine(y, (r / 4.0).max(1.0 / 16.0), budget.refine_iters));
        if found.is_some() {
            return found;
        }
    }
    None
}

/// Whether some point has as its future exactly the joint future of `a`
/// and `c`: always in 1+1 dimensions, otherwise only when they coincide.
pub fn cone_equality_feasible(a: &SpacetimePoint, c: &SpacetimePoint) -> Result<bool, MinkowskiError> {
    let d = same_dim([a, c])?;
    Ok(d == 1 || a == c)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Embedding {
    pub dim: usize,
    pub locations: BTreeMap<String, SpacetimePoint>,
}

impl Embedding {
    /// Requires pairwise distinct locations.
    pub fn new(dim: usize, locations: BTreeMap<String, SpacetimePoint>) -> Result<Self, MinkowskiError> {
        let e = Self::allow_colocated(dim, locations)?;
        let entries: Vec<(&String, &SpacetimePoint)> = e.locations.iter().collect();
        for (i, (a, p)) in entries.iter().enumerate() {
            if let Some((b, _)) = entries[i + 1..].iter().find(|(_, q)| q == p) {
                return Err(MinkowskiError::CoLocated((*a).clone(), (*b).clone()));
            }
        }
        Ok(e)
    }

    pub fn allow_colocated(dim: usize, locations: BTreeMap<String, SpacetimePoint>) -> Result<Self, MinkowskiError> {
        if dim == 0 {
            return Err(MinkowskiError::ZeroDimension);
        }
        for p in locations.values() {
            if p.dim() != dim {
                return Err(MinkowskiError::DimensionMismatch { expected: dim, got: p.dim() });
            }
        }
        Ok(Embedding { dim, locations })
    }

    fn points(&self, names: &[String]) -> Result<Vec<SpacetimePoint>, MinkowskiError> {
        names
            .iter()
            .map(|n| self.locations.get(n).cloned().ok_or_else(|| MinkowskiError::MissingLocation(n.clone())))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Every holding first-order relation constrains the embedding.
    Conservative,
    /// Skips `S -> T` when a proper subset of `S` already affects `T`, and
    /// adds derived higher-order relations with a single source.
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NotInJointFuture,
    JointFutureEscapes,
    Undecided,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::NotInJointFuture => "not-in-joint-future",
            ViolationKind::JointFutureEscapes => "joint-future-escapes",
            ViolationKind::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub relation: String,
    /// Source node whose future fails to contain the targets.
    pub source: String,
    pub kind: ViolationKind,
    pub witness: Option<SpacetimePoint>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let witness = self.witness.as_ref().map_or("-".to_string(), |w| w.to_string());
        write!(f, "relation={} source={} kind={} witness={witness}", self.relation, self.source, self.kind.as_str())
    }
}

/// Checks that every constrained relation `S -> T` keeps the joint future
/// of `T` inside the future of each point of `S`. An empty result means
/// compatible.
pub fn check_embedding(a: &AffectsSet, e: &Embedding, policy: Policy) -> Result<Vec<Violation>, MinkowskiError> {
    check_embedding_with(a, e, policy, &SearchBudget::default())
}

pub fn check_embedding_with(
    a: &AffectsSet,
    e: &Embedding,
    policy: Policy,
    budget: &SearchBudget,
) -> Result<Vec<Violation>, MinkowskiError> {
    e.points(&a.observed)?;
    let mut required: Vec<(String, Vec<String>, Vec<String>)> = Vec::new();
    for r in a.holding().filter(|r| r.conditioning.is_empty()) {
        let redundant = policy == Policy::Reduced
            && a.holding().any(|o| {
                o.conditioning.is_empty()
                    && o.target == r.target
                    && o.source.len() < r.source.len()
                    && o.source.iter().all(|s| r.source.contains(s))
            });
        if !redundant {
            required.push((r.key(), r.source.clone(), r.target.clone()));
        }
    }
    if policy == Policy::Reduced {
        for d in derived_relations(a) {
            required.push((d.key(), vec![d.source.clone()], d.target.clone()));
        }
    }

    let mut violations = Vec::new();
    for (relation, sources, targets) in required {
        let region = e.points(&targets)?;
        for (name, s) in sources.iter().zip(e.points(&sources)?) {
            let (kind, witness) = match region_in_future_with(&region, &s, budget)? {
                ContainmentVerdict::Contained => continue,
                ContainmentVerdict::NotContained(w) if targets.len() == 1 => (ViolationKind::NotInJointFuture, Some(w)),
                ContainmentVerdict::NotContained(w) => (ViolationKind::JointFutureEscapes, Some(w)),
                ContainmentVerdict::Unknown => (ViolationKind::Undecided, None),
            };
            violations.push(Violation { relation: relation.clone(), source: name.clone(), kind, witness });
        }
    }
    Ok(violations)
}
