//! Interventions, affects relations and the E1/E2 protocol simulation.

use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::Mask;
use crate::prob::{fmt_rational, product, Assignment, JointDistribution, Rational};
use crate::scm::{solve, CausalModel, Expr, Mechanism, ModelError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterventionTarget {
    pub nodes: Vec<String>,
    /// Fixed values for every target; `None` leaves targets as free inputs.
    pub values: Option<Assignment>,
}

impl InterventionTarget {
    pub fn free<S: AsRef<str>>(nodes: &[S]) -> Self {
        InterventionTarget { nodes: nodes.iter().map(|s| s.as_ref().to_string()).collect(), values: None }
    }

    pub fn fixed(values: Assignment) -> Self {
        InterventionTarget { nodes: values.names().map(str::to_string).collect(), values: Some(values) }
    }
}

/// Cuts the incoming edges of every target and replaces its mechanism by
/// the fixed value, or by a free input. Noise that fed a target is dropped.
pub fn apply_do(m: &CausalModel, t: &InterventionTarget) -> Result<CausalModel, ModelError> {
    let g = m.graph();
    let mut mask: Mask = 0;
    for n in &t.nodes {
        let id = g.id(n)?;
        if !g.node(id).is_observed() {
            return Err(ModelError::LatentTarget(n.clone()));
        }
        mask |= 1 << id;
    }
    let mut mechanisms: Vec<Mechanism> = m.mechanisms().to_vec();
    let mut dropped = Vec::new();
    for n in &t.nodes {
        let id = g.id(n)?;
        let expr = match &t.values {
            None => Expr::Free,
            Some(values) => {
                let v = values.get(n).ok_or(ModelError::VariableMismatch)?;
                if v >= g.node(id).alphabet {
                    return Err(ModelError::ValueOutOfRange { node: n.clone(), value: v });
                }
                Expr::Const(v)
            }
        };
        mechanisms[id].expr = expr;
        if let Some(noise) = m.noise_of(id) {
            dropped.push(noise.name.clone());
        }
    }
    if let Some(values) = &t.values {
        if values.len() != t.nodes.len() {
            return Err(ModelError::VariableMismatch);
        }
    }
    let noise = m.noise().iter().filter(|n| !dropped.contains(&n.name)).cloned().collect();
    CausalModel::new(g.without_incoming(mask), mechanisms, noise)
}

/// Distribution of the non-target observed nodes after a fixed
/// intervention, using the node-splitting solver when the post-intervention
/// model is still cyclic.
pub fn post_intervention_distribution(
    m: &CausalModel,
    t: &InterventionTarget,
) -> Result<JointDistribution, ModelError> {
    if t.values.is_none() {
        return Err(ModelError::UnboundInput(t.nodes.join(",")));
    }
    let model = apply_do(m, t)?;
    let keep: Vec<String> = model.observed_names().into_iter().filter(|n| !t.nodes.contains(n)).collect();
    Ok(solve(&model)?.distribution.marginal(&keep)?)
}

/// Observed distribution of the model.
pub fn observed_distribution(m: &CausalModel) -> Result<JointDistribution, ModelError> {
    Ok(solve(m)?.distribution.marginal(&m.observed_names())?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub source: Assignment,
    pub conditioning: Assignment,
    pub target: Assignment,
    /// Probability of the target value under `do(source, conditioning)`.
    pub lhs: Rational,
    /// Baseline: observational, or under `do(conditioning)`.
    pub rhs: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffectsRelation {
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub conditioning: Vec<String>,
    pub holds: bool,
    pub witness: Option<Witness>,
}

impl AffectsRelation {
    /// `A,C->B` or `A->B|do(C)`.
    pub fn key(&self) -> String {
        relation_key(&self.source, &self.target, &self.conditioning)
    }

    pub fn render(&self, order: &[String]) -> String {
        let witness = match &self.witness {
            None => "-".to_string(),
            Some(w) => format!(
                "x{{{}}};z{{{}}};y{{{}}};lhs={};rhs={}",
                w.source.render_in(order),
                w.conditioning.render_in(order),
                w.target.render_in(order),
                fmt_rational(&w.lhs),
                fmt_rational(&w.rhs)
            ),
        };
        format!("{} holds={} witness={witness}", self.key(), u8::from(self.holds))
    }
}

fn relation_key(source: &[String], target: &[String], conditioning: &[String]) -> String {
    let mut key = format!("{}->{}", source.join(","), target.join(","));
    if !conditioning.is_empty() {
        key.push_str(&format!("|do({})", conditioning.join(",")));
    }
    key
}

/// Resolves observed names to declaration order, checking disjointness.
fn observed_sets(m: &CausalModel, sets: &[&[String]]) -> Result<Vec<Vec<String>>, ModelError> {
    let g = m.graph();
    let mut seen: Mask = 0;
    let mut out = Vec::with_capacity(sets.len());
    for set in sets {
        let mut mask: Mask = 0;
        for n in *set {
            let id = g.id(n)?;
            if !g.node(id).is_observed() {
                return Err(ModelError::NotObserved(n.clone()));
            }
            if (seen | mask) >> id & 1 == 1 {
                return Err(ModelError::NotDisjoint);
            }
            mask |= 1 << id;
        }
        seen |= mask;
        out.push(g.names_of(mask));
    }
    Ok(out)
}

fn alphabets(m: &CausalModel, names: &[String]) -> Vec<usize> {
    names.iter().map(|n| m.alphabet_of(n)).collect()
}

fn assignment(names: &[String], values: &[usize]) -> Assignment {
    names.iter().cloned().zip(values.iter().copied()).collect()
}

/// Whether `X` affects `Y`: some intervention `x` and value `y` with
/// `P_do(X=x)(Y=y)` differing from the observational `P(Y=y)`.
pub fn affects<S: AsRef<str>>(m: &CausalModel, x: &[S], y: &[S]) -> Result<AffectsRelation, ModelError> {
    affects_given_do(m, x, y, &[] as &[S])
}

/// Whether `X` affects `Y` given `do(Z)`: some `(x, z, y)` with
/// `P_do(X=x,Z=z)(Y=y)` differing from `P_do(Z=z)(Y=y)`. With empty `Z` the
/// baseline is observational.
pub fn affects_given_do<S: AsRef<str>>(
    m: &CausalModel,
    x: &[S],
    y: &[S],
    z: &[S],
) -> Result<AffectsRelation, ModelError> {
    let own = |v: &[S]| v.iter().map(|s| s.as_ref().to_string()).collect::<Vec<_>>();
    let (x, y, z) = (own(x), own(y), own(z));
    if x.is_empty() || y.is_empty() {
        return Err(ModelError::EmptySet);
    }
    let sets = observed_sets(m, &[&x, &y, &z])?;
    let (x, y, z) = (&sets[0], &sets[1], &sets[2]);
    let observed = if z.is_empty() { Some(observed_distribution(m)?) } else { None };
    let (ax, ay, az) = (alphabets(m, x), alphabets(m, y), alphabets(m, z));

    let mut relation = AffectsRelation {
        source: x.clone(),
        target: y.clone(),
        conditioning: z.clone(),
        holds: false,
        witness: None,
    };
    for zv in product(&az) {
        let za = assignment(z, &zv);
        let baseline = match &observed {
            Some(p) => p.clone(),
            None => post_intervention_distribution(m, &InterventionTarget::fixed(za.clone()))?,
        };
        for xv in product(&ax) {
            let mut xz = assignment(x, &xv);
            xz.extend(&za);
            let after = post_intervention_distribution(m, &InterventionTarget::fixed(xz))?;
            for yv in product(&ay) {
                let ya = assignment(y, &yv);
                let lhs = after.prob_of(&ya)?;
                let rhs = baseline.prob_of(&ya)?;
                if lhs != rhs {
                    relation.holds = true;
                    relation.witness =
                        Some(Witness { source: assignment(x, &xv), conditioning: za, target: ya, lhs, rhs });
                    return Ok(relation);
                }
            }
        }
    }
    Ok(relation)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffectsSet {
    pub model: String,
    /// Observed nodes of the model in declaration order.
    pub observed: Vec<String>,
    pub max_size: usize,
    /// Sorted by [`AffectsRelation::key`].
    pub relations: Vec<AffectsRelation>,
}

impl AffectsSet {
    pub fn get<S: AsRef<str>>(&self, source: &[S], target: &[S], conditioning: &[S]) -> Option<&AffectsRelation> {
        let canon = |v: &[S]| {
            self.observed
                .iter()
                .filter(|o| v.iter().any(|s| s.as_ref() == o.as_str()))
                .cloned()
                .collect::<Vec<_>>()
        };
        let key = relation_key(&canon(source), &canon(target), &canon(conditioning));
        self.relations
            .binary_search_by(|r| r.key().cmp(&key))
            .ok()
            .map(|i| &self.relations[i])
    }

    /// Verdict for a relation, `None` when it was not evaluated.
    pub fn holds<S: AsRef<str>>(&self, source: &[S], target: &[S], conditioning: &[S]) -> Option<bool> {
        self.get(source, target, conditioning).map(|r| r.holds)
    }

    pub fn holding(&self) -> impl Iterator<Item = &AffectsRelation> {
        self.relations.iter().filter(|r| r.holds)
    }

    pub fn render(&self) -> String {
        self.relations.iter().map(|r| r.render(&self.observed) + "\n").collect()
    }
}

/// Evaluates every first-order relation between disjoint nonempty observed
/// sets of size at most `max_size`, and every higher-order relation whose
/// three sets are disjoint, with `Z` nonempty, all within the same bound.
pub fn enumerate_affects(m: &CausalModel, max_size: usize) -> Result<AffectsSet, ModelError> {
    let observed = m.observed_names();
    let subsets: Vec<Vec<String>> = (1..=max_size.min(observed.len()))
        .flat_map(|k| observed.iter().cloned().combinations(k))
        .collect();
    let disjoint = |a: &[String], b: &[String]| a.iter().all(|n| !b.contains(n));
    let mut relations = Vec::new();
    for x in &subsets {
        for y in subsets.iter().filter(|y| disjoint(x, y)) {
            relations.push(affects(m, x, y)?);
            for z in subsets.iter().filter(|z| disjoint(x, z) && disjoint(y, z)) {
                relations.push(affects_given_do(m, x, y, z)?);
            }
        }
    }
    relations.sort_by_key(AffectsRelation::key);
    Ok(AffectsSet { model: String::new(), observed, max_size, relations })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    /// Intervene on `A` and `C`, record `B`.
    E1,
    /// Intervene on `B`, record `A` and `C`.
    E2,
}

impl Experiment {
    /// Intervened and recorded nodes.
    pub fn parties(self) -> (Vec<String>, Vec<String>) {
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        match self {
            Experiment::E1 => (names(&["A", "C"]), names(&["B"])),
            Experiment::E2 => (names(&["B"]), names(&["A", "C"])),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::E1 => "E1",
            Experiment::E2 => "E2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SettingReport {
    pub setting: Assignment,
    pub exact: JointDistribution,
    pub empirical: JointDistribution,
    /// Samples per recorded value tuple, in lexicographic order.
    pub counts: BTreeMap<Vec<usize>, u64>,
    pub tv: Rational,
    /// Fraction of samples with `B = A xor C`.
    pub xor_fraction: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolReport {
    pub experiment: Experiment,
    pub samples: u64,
    pub seed: u64,
    pub settings: Vec<SettingReport>,
    pub xor_fraction: Rational,
}

/// Uniform draw in `[0, 1)` for sample `index` of setting `setting`. Each
/// draw is addressed directly in the ChaCha keystream, so any partition of
/// the samples reproduces the same values.
fn draw(seed: u64, setting: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(setting);
    rng.set_word_pos(u128::from(index) * 2);
    rng.gen()
}

/// Inverse-CDF sampling over the support in lexicographic order.
fn sample_index(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

/// Runs every intervention setting of the experiment with `samples` draws
/// each from the exact post-intervention distribution.
pub fn simulate_protocol(
    m: &CausalModel,
    experiment: Experiment,
    samples: u64,
    seed: u64,
) -> Result<ProtocolReport, ModelError> {
    let observed = m.observed_names();
    if samples == 0 || !["A", "B", "C"].iter().all(|n| observed.iter().any(|o| o == n)) {
        return Err(ModelError::ProtocolNodes);
    }
    let (set, record) = experiment.parties();
    let mut settings = Vec::new();
    let mut xor_hits = 0u64;
    for (index, values) in product(&alphabets(m, &set)).enumerate() {
        let setting = assignment(&set, &values);
        let exact = post_intervention_distribution(m, &InterventionTarget::fixed(setting.clone()))?
            .marginal(&record)?;
        let support: Vec<(Vec<usize>, Rational)> = exact.support().map(|(k, p)| (k.to_vec(), p.clone())).collect();
        let mut acc = 0.0;
        let cdf: Vec<f64> = support
            .iter()
            .map(|(_, p)| {
                acc += p.to_f64().unwrap_or(0.0);
                acc
            })
            .collect();

        let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        for i in 0..samples {
            let k = sample_index(&cdf, draw(seed, index as u64, i));
            *counts.entry(support[k].0.clone()).or_insert(0) += 1;
        }

        let mut hits = 0u64;
        for (key, &c) in &counts {
            let mut all = setting.clone();
            all.extend(&assignment(&record, key));
            let v = |n: &str| all.get(n).unwrap_or(0);
            if v("B") == v("A") ^ v("C") {
                hits += c;
            }
        }
        xor_hits += hits;

        let total = Rational::from_integer(BigInt::from(samples));
        let empirical = JointDistribution::new(
            exact.variables().to_vec(),
            counts.iter().map(|(k, &c)| (k.clone(), Rational::from_integer(BigInt::from(c)) / &total)),
        )?;
        let tv = empirical.tv_distance(&exact)?;
        settings.push(SettingReport {
            setting,
            exact,
            empirical,
            counts,
            tv,
            xor_fraction: Rational::from_integer(BigInt::from(hits)) / total,
        });
    }
    let all = Rational::from_integer(BigInt::from(samples * settings.len() as u64));
    let xor_fraction = if all.is_zero() {
        Rational::zero()
    } else {
        Rational::from_integer(BigInt::from(xor_hits)) / all
    };
    Ok(ProtocolReport { experiment, samples, seed, settings, xor_fraction })
}
