use std::collections::{BTreeMap, HashMap};

use itertools::Itertools;
use num_traits::{One, Zero};

use super::{CausalModel, Expr, Mechanism, ModelError, Noise};
use crate::graph::{Graph, Mask, Node};
use crate::prob::{fmt_rational, product, Assignment, JointDistribution, ProbError, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveMethod {
    Acyclic,
    /// Observed nodes that were split, in declaration order.
    SplitNode(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveReport {
    /// Distribution over every graph node (observed and latent).
    pub distribution: JointDistribution,
    pub method: SolveMethod,
    /// Probability of the post-selected event before renormalizing; one for
    /// acyclic models.
    pub postselection_weight: Rational,
}

impl SolveReport {
    pub fn header(&self) -> String {
        let method = match &self.method {
            SolveMethod::Acyclic => "acyclic".to_string(),
            SolveMethod::SplitNode(nodes) => format!("split:{}", nodes.join(",")),
        };
        format!("method={method} weight={}", fmt_rational(&self.postselection_weight))
    }
}

enum Ref {
    Node(usize),
    Noise(usize),
}

struct Evaluator<'a> {
    model: &'a CausalModel,
    refs: HashMap<&'a str, Ref>,
}

impl<'a> Evaluator<'a> {
    fn new(model: &'a CausalModel) -> Self {
        let nodes = model.graph().nodes().iter().enumerate().map(|(i, n)| (n.name.as_str(), Ref::Node(i)));
        let noise = model.noise().iter().enumerate().map(|(k, n)| (n.name.as_str(), Ref::Noise(k)));
        Evaluator { model, refs: nodes.chain(noise).collect() }
    }

    /// Value of node `id` under its mechanism, or `None` for a free input.
    fn eval(&self, id: usize, values: &[usize], noise: &[usize]) -> Option<usize> {
        let lookup = |name: &str| match self.refs[name] {
            Ref::Node(i) => values[i],
            Ref::Noise(k) => noise[k],
        };
        let alphabet = self.model.graph().node(id).alphabet;
        self.model.mechanism(id).expr.eval(&lookup).map(|v| v % alphabet)
    }
}

/// Every noise assignment with positive probability, with that probability.
fn noise_assignments(m: &CausalModel) -> impl Iterator<Item = (Vec<usize>, Rational)> + '_ {
    let alphabets: Vec<usize> = m.noise().iter().map(Noise::alphabet).collect();
    product(&alphabets)
        .collect::<Vec<_>>()
        .into_iter()
        .map(move |vals| {
            let p = m
                .noise()
                .iter()
                .zip(&vals)
                .fold(Rational::one(), |acc, (n, &v)| acc * n.dist.prob(&[v]));
            (vals, p)
        })
        .filter(|(_, p)| !p.is_zero())
}

/// Pushes the noise product through the mechanisms in topological order.
pub fn solve_acyclic(m: &CausalModel) -> Result<SolveReport, ModelError> {
    let g = m.graph();
    let order = g.topological_order().ok_or(ModelError::Cyclic)?;
    let ev = Evaluator::new(m);
    let mut weights: BTreeMap<Vec<usize>, Rational> = BTreeMap::new();
    for (noise, p) in noise_assignments(m) {
        let mut values = vec![0; g.len()];
        for &v in &order {
            values[v] = ev
                .eval(v, &values, &noise)
                .ok_or_else(|| ModelError::UnboundInput(g.name(v).to_string()))?;
        }
        *weights.entry(values).or_insert_with(Rational::zero) += p;
    }
    Ok(SolveReport {
        distribution: JointDistribution::new(m.node_variables(), weights)?,
        method: SolveMethod::Acyclic,
        postselection_weight: Rational::one(),
    })
}

/// Splits observed node `n` into `n` (keeping its incoming edges) and a
/// fresh exogenous copy `n'` (taking its outgoing edges) with a uniform
/// prior. Mechanisms that read `n` read `n'` afterwards.
pub fn split_node(m: &CausalModel, n: &str) -> Result<CausalModel, ModelError> {
    split_with_copy(m, n).map(|(model, _)| model)
}

fn split_with_copy(m: &CausalModel, n: &str) -> Result<(CausalModel, String), ModelError> {
    let g = m.graph();
    let id = g.id(n)?;
    let node = g.node(id);
    if !node.is_observed() {
        return Err(ModelError::NotObserved(n.to_string()));
    }
    if !g.is_on_cycle(id) {
        return Err(ModelError::NotOnCycle(n.to_string()));
    }
    let copy = m.fresh_name(format!("{n}'"));
    let noise_name = m.fresh_name(format!("E_{copy}"));

    let mut nodes = g.nodes().to_vec();
    nodes.push(Node::new(copy.clone(), node.alphabet, node.kind));
    let edges = g.edges().iter().map(|&(u, v)| {
        let from = if u == id { copy.as_str() } else { g.name(u) };
        (from.to_string(), g.name(v).to_string())
    });
    let graph = Graph::new(nodes, edges)?;

    let mut mechanisms: Vec<Mechanism> = m.mechanisms().to_vec();
    for &child in g.children(id) {
        mechanisms[child].expr.rename(n, &copy);
    }
    mechanisms.push(Mechanism::new(copy.clone(), Expr::Var(noise_name.clone())));
    let mut noise = m.noise().to_vec();
    noise.push(Noise::uniform(noise_name, node.alphabet)?);
    Ok((CausalModel::new(graph, mechanisms, noise)?, copy))
}

/// Smallest sets of observed nodes whose splitting leaves an acyclic graph,
/// each in declaration order, the sets in lexicographic order. An acyclic
/// model yields the single empty set.
pub fn minimum_split_sets(m: &CausalModel) -> Result<Vec<Vec<String>>, ModelError> {
    let g = m.graph();
    let observed = g.observed();
    let observed_mask: Mask = observed.iter().fold(0, |acc, &i| acc | 1 << i);
    if !g.is_acyclic_without(observed_mask) {
        return Err(ModelError::LatentCycle);
    }
    for k in 0..=observed.len() {
        let sets: Vec<Vec<String>> = observed
            .iter()
            .copied()
            .combinations(k)
            .filter(|set| g.is_acyclic_without(set.iter().fold(0, |acc, &i| acc | 1 << i)))
            .map(|set| set.into_iter().map(|i| g.name(i).to_string()).collect())
            .collect();
        if !sets.is_empty() {
            return Ok(sets);
        }
    }
    unreachable!("removing every observed node leaves an acyclic graph")
}

/// Solves a possibly cyclic model. Acyclic models are evaluated directly;
/// otherwise the first minimum cycle-breaking set of observed nodes is
/// split, the split model is solved with uniform priors on the copies,
/// post-selected on every node equalling its copy and renormalized.
pub fn solve_cyclic(m: &CausalModel) -> Result<SolveReport, ModelError> {
    let splits = minimum_split_sets(m)?.swap_remove(0);
    solve_with_splits(m, &splits)
}

/// Same as [`solve_cyclic`].
pub fn solve(m: &CausalModel) -> Result<SolveReport, ModelError> {
    solve_cyclic(m)
}

/// Node-splitting solve with an explicit choice of split nodes.
pub fn solve_with_splits<S: AsRef<str>>(m: &CausalModel, splits: &[S]) -> Result<SolveReport, ModelError> {
    if splits.is_empty() {
        return solve_acyclic(m);
    }
    let names: Vec<String> = splits.iter().map(|s| s.as_ref().to_string()).collect();
    let mut model = m.clone();
    let mut pairs = Vec::with_capacity(names.len());
    for name in &names {
        let (next, copy) = split_with_copy(&model, name)?;
        pairs.push((next.graph().id(name)?, next.graph().id(&copy)?));
        model = next;
    }
    if !model.graph().is_acyclic() {
        return Err(ModelError::SplitsLeaveCycle(names));
    }
    let split = solve_acyclic(&model)?;
    let n = m.graph().len();
    let kept = split
        .distribution
        .support()
        .filter(|(k, _)| pairs.iter().all(|&(a, b)| k[a] == k[b]))
        .map(|(k, p)| (k[..n].to_vec(), p.clone()));
    let (distribution, weight) = JointDistribution::normalized(m.node_variables(), kept).map_err(|e| match e {
        ProbError::ZeroProbabilityEvent => ModelError::NoConsistentSolution,
        other => other.into(),
    })?;
    Ok(SolveReport {
        distribution,
        method: SolveMethod::SplitNode(names),
        postselection_weight: weight,
    })
}

/// Whether every minimum cycle-breaking split set yields the same
/// distribution.
pub fn split_choice_invariant(m: &CausalModel) -> Result<bool, ModelError> {
    let sets = minimum_split_sets(m)?;
    let first = solve_with_splits(m, &sets[0])?.distribution;
    for set in &sets[1..] {
        if solve_with_splits(m, set)?.distribution != first {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Brute force: every assignment to the graph nodes satisfying all
/// mechanisms for the given noise values. Free inputs are unconstrained.
pub fn enumerate_consistent_assignments(m: &CausalModel, noise: &Assignment) -> Result<Vec<Assignment>, ModelError> {
    let mut noise_values = Vec::with_capacity(m.noise().len());
    for n in m.noise() {
        let v = noise.get(&n.name).ok_or_else(|| ModelError::MissingNoise(n.name.clone()))?;
        if v >= n.alphabet() {
            return Err(ModelError::ValueOutOfRange { node: n.name.clone(), value: v });
        }
        noise_values.push(v);
    }
    let g = m.graph();
    let ev = Evaluator::new(m);
    let alphabets: Vec<usize> = g.nodes().iter().map(|n| n.alphabet).collect();
    Ok(product(&alphabets)
        .filter(|vals| (0..g.len()).all(|v| ev.eval(v, vals, &noise_values).is_none_or(|x| x == vals[v])))
        .map(|vals| g.nodes().iter().zip(vals).map(|(n, v)| (n.name.clone(), v)).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::rational;

    fn two_cycle(y_expr: Expr) -> CausalModel {
        let nodes = vec![Node::observed("X", 2), Node::observed("Y", 2)];
        let g = Graph::new(nodes, [("X", "Y"), ("Y", "X")]).unwrap();
        let mech = vec![Mechanism::new("X", Expr::var("Y")), Mechanism::new("Y", y_expr)];
        CausalModel::new(g, mech, vec![]).unwrap()
    }

    #[test]
    fn constant_network_is_point_mass() {
        let nodes = vec![Node::observed("P", 3), Node::observed("Q", 2)];
        let g = Graph::new(nodes, [("P", "Q")]).unwrap();
        let mech = vec![
            Mechanism::new("P", Expr::Const(2)),
            Mechanism::new("Q", Expr::Not(Box::new(Expr::var("P")))),
        ];
        let r = solve_acyclic(&CausalModel::new(g, mech, vec![]).unwrap()).unwrap();
        assert_eq!(r.distribution.support_size(), 1);
        assert_eq!(r.distribution.prob(&[2, 0]), Rational::one());
        assert_eq!(r.header(), "method=acyclic weight=1/1");
    }

    #[test]
    fn acyclic_solver_rejects_cycles() {
        assert_eq!(solve_acyclic(&two_cycle(Expr::var("X"))).unwrap_err(), ModelError::Cyclic);
    }

    #[test]
    fn two_node_cycle_split() {
        let m = two_cycle(Expr::var("X"));
        let split = split_node(&m, "X").unwrap();
        assert_eq!(
            split.graph().edge_names(),
            [("X'".to_string(), "Y".to_string()), ("Y".to_string(), "X".to_string())].into()
        );
        assert!(split.graph().is_acyclic());

        let r = solve_cyclic(&m).unwrap();
        assert_eq!(r.method, SolveMethod::SplitNode(vec!["X".into()]));
        assert_eq!(r.postselection_weight, Rational::one());
        assert_eq!(r.distribution.prob(&[0, 0]), rational(1, 2));
        assert_eq!(r.distribution.prob(&[1, 1]), rational(1, 2));
        assert!(split_choice_invariant(&m).unwrap());
    }

    #[test]
    fn contradictory_cycle_has_no_solution() {
        let m = two_cycle(Expr::xor([Expr::var("X"), Expr::Const(1)]));
        assert_eq!(solve_cyclic(&m).unwrap_err(), ModelError::NoConsistentSolution);
        assert!(enumerate_consistent_assignments(&m, &Assignment::new()).unwrap().is_empty());
    }

    #[test]
    fn split_requires_cycle_and_observed() {
        let nodes = vec![Node::observed("X", 2), Node::latent("L", 2)];
        let g = Graph::new(nodes, [("X", "L")]).unwrap();
        let mech = vec![Mechanism::new("X", Expr::Const(0)), Mechanism::new("L", Expr::var("X"))];
        let m = CausalModel::new(g, mech, vec![]).unwrap();
        assert_eq!(split_node(&m, "X").unwrap_err(), ModelError::NotOnCycle("X".into()));
        assert_eq!(split_node(&m, "L").unwrap_err(), ModelError::NotObserved("L".into()));
    }

    #[test]
    fn latent_only_cycle_is_rejected() {
        let nodes = vec![Node::latent("P", 2), Node::latent("Q", 2)];
        let g = Graph::new(nodes, [("P", "Q"), ("Q", "P")]).unwrap();
        let mech = vec![Mechanism::new("P", Expr::var("Q")), Mechanism::new("Q", Expr::var("P"))];
        let m = CausalModel::new(g, mech, vec![]).unwrap();
        assert_eq!(solve_cyclic(&m).unwrap_err(), ModelError::LatentCycle);
    }

    #[test]
    fn consistent_assignments_need_all_noise() {
        let nodes = vec![Node::observed("X", 2)];
        let g = Graph::new(nodes, Vec::<(&str, &str)>::new()).unwrap();
        let m = CausalModel::new(
            g,
            vec![Mechanism::new("X", Expr::var("E"))],
            vec![Noise::uniform("E", 2).unwrap()],
        )
        .unwrap();
        assert_eq!(
            enumerate_consistent_assignments(&m, &Assignment::new()).unwrap_err(),
            ModelError::MissingNoise("E".into())
        );
        let sols = enumerate_consistent_assignments(&m, &Assignment::new().with("E", 1)).unwrap();
        assert_eq!(sols, vec![Assignment::new().with("X", 1)]);
    }
}
