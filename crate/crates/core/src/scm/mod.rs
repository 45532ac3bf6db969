//! Causal models: graph, deterministic mechanisms and exogenous noise.
//!
//! Exogenous noise variables are not graph nodes. Each one is parentless by
//! construction and feeds exactly one mechanism, so a stochastic node `N` is
//! written `N = f(parents, E_N)` with `E_N` declared as noise.

mod audit;
mod expr;
mod solve;

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::graph::{Graph, GraphError};
use crate::prob::{product, JointDistribution, ProbError};

pub use audit::{check_dsep_property, detect_fine_tuning, Triple};
pub use expr::Expr;
pub use solve::{
    enumerate_consistent_assignments, minimum_split_sets, solve, solve_acyclic, solve_cyclic,
    solve_with_splits, split_choice_invariant, split_node, SolveMethod, SolveReport,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error("node `{0}` has no mechanism")]
    MissingMechanism(String),
    #[error("node `{0}` has more than one mechanism")]
    DuplicateMechanism(String),
    #[error("mechanism for `{node}` reads unknown name `{name}`")]
    UnknownName { node: String, name: String },
    #[error("mechanism for `{node}` reads `{name}`, which is not one of its parents")]
    NotAParent { node: String, name: String },
    #[error("mechanism for `{node}` does not read its parent `{parent}`")]
    MissingParent { node: String, parent: String },
    #[error("mechanism for `{0}` reads more than one noise variable")]
    MultipleNoise(String),
    #[error("noise variable `{0}` feeds more than one mechanism")]
    NoiseReused(String),
    #[error("noise variable `{0}` feeds no mechanism")]
    UnusedNoise(String),
    #[error("noise variable `{0}` clashes with another name")]
    NoiseClash(String),
    #[error("noise variable `{0}` must be a distribution over itself alone")]
    BadNoise(String),
    #[error("table for `{node}`: {msg}")]
    BadTable { node: String, msg: String },
    #[error("graph is cyclic; solve it with the node-splitting method")]
    Cyclic,
    #[error("node `{0}` lies on no directed cycle")]
    NotOnCycle(String),
    #[error("node `{0}` is not observed")]
    NotObserved(String),
    #[error("a directed cycle contains no observed node")]
    LatentCycle,
    #[error("split nodes {0:?} leave a directed cycle")]
    SplitsLeaveCycle(Vec<String>),
    #[error("post-selection weight is zero: no consistent solution")]
    NoConsistentSolution,
    #[error("node `{0}` is a free input with no value")]
    UnboundInput(String),
    #[error("noise value for `{0}` missing")]
    MissingNoise(String),
    #[error("variables of the distribution do not match the observed nodes")]
    VariableMismatch,
    #[error("intervention target `{0}` is latent")]
    LatentTarget(String),
    #[error("value {value} out of range for `{node}`")]
    ValueOutOfRange { node: String, value: usize },
    #[error("node sets must be pairwise disjoint")]
    NotDisjoint,
    #[error("node set must be nonempty")]
    EmptySet,
    #[error("protocol needs observed nodes A, B and C")]
    ProtocolNodes,
    #[error("models differ in observed nodes or alphabets")]
    MismatchedObservables,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mechanism {
    pub node: String,
    pub expr: Expr,
}

impl Mechanism {
    pub fn new(node: impl Into<String>, expr: Expr) -> Self {
        Mechanism { node: node.into(), expr }
    }
}

/// A parentless exogenous variable with its distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Noise {
    pub name: String,
    pub dist: JointDistribution,
}

impl Noise {
    pub fn new(name: impl Into<String>, dist: JointDistribution) -> Self {
        Noise { name: name.into(), dist }
    }

    pub fn uniform(name: impl Into<String>, alphabet: usize) -> Result<Self, ProbError> {
        let name = name.into();
        let dist = JointDistribution::uniform(vec![(name.clone(), alphabet)])?;
        Ok(Noise { name, dist })
    }

    pub fn alphabet(&self) -> usize {
        self.dist.variables()[0].1
    }
}

/// A validated causal model. `mechanisms[i]` belongs to graph node `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalModel {
    graph: Graph,
    mechanisms: Vec<Mechanism>,
    noise: Vec<Noise>,
    /// Index into `noise` of the variable each mechanism reads, if any.
    noise_of: Vec<Option<usize>>,
}

impl CausalModel {
    pub fn new(graph: Graph, mechanisms: Vec<Mechanism>, noise: Vec<Noise>) -> Result<Self, ModelError> {
        let mut slots: Vec<Option<Mechanism>> = vec![None; graph.len()];
        for m in mechanisms {
            let id = graph.id(&m.node)?;
            if slots[id].is_some() {
                return Err(ModelError::DuplicateMechanism(m.node));
            }
            slots[id] = Some(m);
        }
        let mechanisms = slots
            .into_iter()
            .enumerate()
            .map(|(i, m)| m.ok_or_else(|| ModelError::MissingMechanism(graph.name(i).to_string())))
            .collect::<Result<Vec<_>, _>>()?;

        let mut noise_index = HashMap::new();
        for (i, n) in noise.iter().enumerate() {
            if graph.contains(&n.name) || noise_index.insert(n.name.clone(), i).is_some() {
                return Err(ModelError::NoiseClash(n.name.clone()));
            }
            if n.dist.variables().len() != 1 || n.dist.variables()[0].0 != n.name {
                return Err(ModelError::BadNoise(n.name.clone()));
            }
        }

        let mut noise_of = Vec::with_capacity(graph.len());
        let mut used = vec![false; noise.len()];
        for (id, m) in mechanisms.iter().enumerate() {
            let parents: BTreeSet<String> =
                graph.parents(id).iter().map(|&p| graph.name(p).to_string()).collect();
            let mut own_noise = None;
            for name in m.expr.names() {
                if parents.contains(&name) {
                    continue;
                }
                if let Some(&k) = noise_index.get(&name) {
                    if own_noise.replace(k).is_some() {
                        return Err(ModelError::MultipleNoise(m.node.clone()));
                    }
                    if std::mem::replace(&mut used[k], true) {
                        return Err(ModelError::NoiseReused(name));
                    }
                } else if graph.contains(&name) {
                    return Err(ModelError::NotAParent { node: m.node.clone(), name });
                } else {
                    return Err(ModelError::UnknownName { node: m.node.clone(), name });
                }
            }
            let read = m.expr.names();
            if let Some(parent) = parents.iter().find(|p| !read.contains(*p)) {
                return Err(ModelError::MissingParent { node: m.node.clone(), parent: parent.clone() });
            }
            noise_of.push(own_noise);
        }
        if let Some(k) = used.iter().position(|u| !u) {
            return Err(ModelError::UnusedNoise(noise[k].name.clone()));
        }

        let model = CausalModel { graph, mechanisms, noise, noise_of };
        for m in &model.mechanisms {
            model.check_tables(&m.node, &m.expr)?;
        }
        Ok(model)
    }

    fn check_tables(&self, node: &str, expr: &Expr) -> Result<(), ModelError> {
        let bad = |msg: String| ModelError::BadTable { node: node.to_string(), msg };
        match expr {
            Expr::Table { args, entries } => {
                let distinct: BTreeSet<&String> = args.iter().collect();
                if distinct.len() != args.len() {
                    return Err(bad("repeated argument".into()));
                }
                let alphabets: Vec<usize> = args.iter().map(|a| self.alphabet_of(a)).collect();
                for key in entries.keys() {
                    if key.len() != args.len() || key.iter().zip(&alphabets).any(|(v, a)| v >= a) {
                        return Err(bad(format!("entry {key:?} out of range")));
                    }
                }
                if let Some(missing) = product(&alphabets).find(|k| !entries.contains_key(k)) {
                    return Err(bad(format!("no entry for {missing:?}")));
                }
                Ok(())
            }
            Expr::Xor(args) | Expr::And(args) | Expr::Or(args) => {
                args.iter().try_for_each(|a| self.check_tables(node, a))
            }
            Expr::Not(a) => self.check_tables(node, a),
            Expr::Const(_) | Expr::Var(_) | Expr::Free => Ok(()),
        }
    }

    /// Alphabet size of a graph node or noise variable.
    pub fn alphabet_of(&self, name: &str) -> usize {
        match self.graph.id(name) {
            Ok(id) => self.graph.node(id).alphabet,
            Err(_) => self
                .noise
                .iter()
                .find(|n| n.name == name)
                .map(Noise::alphabet)
                .unwrap_or(0),
        }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn mechanisms(&self) -> &[Mechanism] {
        &self.mechanisms
    }

    pub fn mechanism(&self, id: usize) -> &Mechanism {
        &self.mechanisms[id]
    }

    pub fn noise(&self) -> &[Noise] {
        &self.noise
    }

    /// Noise variable read by node `id`, if any.
    pub fn noise_of(&self, id: usize) -> Option<&Noise> {
        self.noise_of[id].map(|k| &self.noise[k])
    }

    /// `(name, alphabet)` for every graph node, in declaration order.
    pub fn node_variables(&self) -> Vec<(String, usize)> {
        self.graph.nodes().iter().map(|n| (n.name.clone(), n.alphabet)).collect()
    }

    pub fn observed_variables(&self) -> Vec<(String, usize)> {
        self.graph
            .nodes()
            .iter()
            .filter(|n| n.is_observed())
            .map(|n| (n.name.clone(), n.alphabet))
            .collect()
    }

    pub fn observed_names(&self) -> Vec<String> {
        self.graph.observed_names()
    }

    /// `candidate`, with primes appended until it names no node or noise
    /// variable.
    pub(crate) fn fresh_name(&self, candidate: String) -> String {
        let mut name = candidate;
        while self.graph.contains(&name) || self.noise.iter().any(|n| n.name == name) {
            name.push('\'');
        }
        name
    }
}
