//! Brute-force oracles shared by the integration tests. None of them call
//! the library routine they check.

#![allow(dead_code)]

use std::collections::BTreeMap;

use lightloop_core::graph::{Graph, Node};
use lightloop_core::prob::{product, Rational};
use lightloop_core::scm::{CausalModel, Expr, Mechanism, Noise};
use lightloop_core::JointDistribution;
use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn node_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("N{i}")).collect()
}

/// Random directed graph without self-loops; each ordered pair is an edge
/// with probability `density`.
pub fn random_edges(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen_bool(density) {
                edges.push((u, v));
            }
        }
    }
    edges
}

pub fn build_graph(n: usize, edges: &[(usize, usize)]) -> Graph {
    let names = node_names(n);
    let nodes = names.iter().map(|s| Node::observed(s.clone(), 2)).collect();
    Graph::new(nodes, edges.iter().map(|&(u, v)| (names[u].as_str(), names[v].as_str()))).unwrap()
}

/// Nodes reachable from `start` along directed edges, including `start`.
pub fn reachable(n: usize, edges: &[(usize, usize)], start: usize) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(u) = stack.pop() {
        for &(a, b) in edges {
            if a == u && !seen[b] {
                seen[b] = true;
                stack.push(b);
            }
        }
    }
    seen
}

/// Every simple path between a node of `x` and a node of `y`, with every
/// choice of edge orientation, checked node by node for blocking. A path is
/// abandoned as soon as one of its interior nodes blocks it.
pub fn dsep_paths(n: usize, edges: &[(usize, usize)], x: &[usize], y: &[usize], z: &[usize]) -> bool {
    struct Search<'a> {
        n: usize,
        edges: &'a [(usize, usize)],
        y: &'a [usize],
        z: &'a [usize],
        desc: Vec<Vec<bool>>,
    }
    impl Search<'_> {
        // `into_last` is whether the step reaching the last node pointed at it.
        fn open_from(&self, path: &mut Vec<usize>, into_last: Option<bool>) -> bool {
            let last = *path.last().unwrap();
            if path.len() > 1 && self.y.contains(&last) {
                return true;
            }
            for next in 0..self.n {
                if path.contains(&next) {
                    continue;
                }
                for forward in [true, false] {
                    let present =
                        if forward { self.edges.contains(&(last, next)) } else { self.edges.contains(&(next, last)) };
                    if !present {
                        continue;
                    }
                    if let Some(into) = into_last {
                        let collider = into && !forward;
                        let passes = if collider {
                            (0..self.n).any(|w| self.desc[last][w] && self.z.contains(&w))
                        } else {
                            !self.z.contains(&last)
                        };
                        if !passes {
                            continue;
                        }
                    }
                    path.push(next);
                    let found = self.open_from(path, Some(forward));
                    path.pop();
                    if found {
                        return true;
                    }
                }
            }
            false
        }
    }
    let search = Search { n, edges, y, z, desc: (0..n).map(|v| reachable(n, edges, v)).collect() };
    !x.iter().any(|&s| search.open_from(&mut vec![s], None))
}

/// Moralization criterion for acyclic graphs: separation of `x` and `y` by
/// `z` in the moral graph of the ancestral set of `x u y u z`.
pub fn dsep_moral(n: usize, edges: &[(usize, usize)], x: &[usize], y: &[usize], z: &[usize]) -> bool {
    let mut keep = vec![false; n];
    for &s in x.iter().chain(y).chain(z) {
        for v in 0..n {
            if reachable(n, edges, v)[s] {
                keep[v] = true;
            }
        }
    }
    let mut adj = vec![vec![false; n]; n];
    for &(u, v) in edges {
        if keep[u] && keep[v] {
            adj[u][v] = true;
            adj[v][u] = true;
        }
    }
    for c in 0..n {
        let parents: Vec<usize> = edges.iter().filter(|e| e.1 == c && keep[e.0] && keep[c]).map(|e| e.0).collect();
        for &a in &parents {
            for &b in &parents {
                if a != b {
                    adj[a][b] = true;
                }
            }
        }
    }
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = x.to_vec();
    for &s in x {
        seen[s] = true;
    }
    while let Some(u) = stack.pop() {
        if y.contains(&u) {
            return false;
        }
        for v in 0..n {
            if adj[u][v] && keep[v] && !seen[v] && !z.contains(&v) {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    true
}

/// With nothing conditioned, `x` and `y` are d-connected exactly when they
/// share an ancestor (each node being its own ancestor).
pub fn dsep_no_common_ancestor(n: usize, edges: &[(usize, usize)], x: &[usize], y: &[usize]) -> bool {
    !(0..n).any(|w| {
        let r = reachable(n, edges, w);
        x.iter().any(|&a| r[a]) && y.iter().any(|&b| r[b])
    })
}

pub fn is_acyclic(n: usize, edges: &[(usize, usize)]) -> bool {
    edges.iter().all(|&(u, v)| !reachable(n, edges, v)[u])
}

/// Random acyclic model kept in plain data, with an independent solver.
#[derive(Debug, Clone)]
pub struct RandomModel {
    pub alphabets: Vec<usize>,
    pub parents: Vec<Vec<usize>>,
    /// Noise alphabet per node, when the node has noise.
    pub noise: Vec<Option<Vec<Rational>>>,
    /// Value of each node keyed by its parents' values then its noise value.
    pub tables: Vec<BTreeMap<Vec<usize>, usize>>,
}

pub fn random_rational_dist(rng: &mut ChaCha8Rng, k: usize) -> Vec<Rational> {
    let weights: Vec<i64> = (0..k).map(|_| rng.gen_range(0..4)).collect();
    let weights: Vec<i64> = if weights.iter().all(|&w| w == 0) { vec![1; k] } else { weights };
    let total: i64 = weights.iter().sum();
    weights.iter().map(|&w| Rational::new(w.into(), total.into())).collect()
}

impl RandomModel {
    /// Parents of each node come from earlier nodes only.
    pub fn generate(rng: &mut ChaCha8Rng, max_nodes: usize, max_alphabet: usize) -> Self {
        Self::generate_with(rng, max_nodes, max_alphabet, false)
    }

    /// Parents may be any other node, so cycles are common.
    pub fn generate_cyclic(rng: &mut ChaCha8Rng, max_nodes: usize, max_alphabet: usize) -> Self {
        Self::generate_with(rng, max_nodes, max_alphabet, true)
    }

    fn generate_with(rng: &mut ChaCha8Rng, max_nodes: usize, max_alphabet: usize, cyclic: bool) -> Self {
        let n = rng.gen_range(1..=max_nodes);
        let alphabets: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=max_alphabet)).collect();
        let density = rng.gen_range(0.1..0.7);
        let parents: Vec<Vec<usize>> = (0..n)
            .map(|v| (0..if cyclic { n } else { v }).filter(|&p| p != v && rng.gen_bool(density)).collect())
            .collect();
        let mut noise = Vec::with_capacity(n);
        let mut tables = Vec::with_capacity(n);
        for v in 0..n {
            let noisy = rng.gen_bool(0.6);
            let k = rng.gen_range(1..=3);
            let dist = noisy.then(|| random_rational_dist(rng, k));
            let mut arg_alphabets: Vec<usize> = parents[v].iter().map(|&p| alphabets[p]).collect();
            if let Some(d) = &dist {
                arg_alphabets.push(d.len());
            }
            let table = product(&arg_alphabets).map(|k| (k, rng.gen_range(0..alphabets[v]))).collect();
            noise.push(dist);
            tables.push(table);
        }
        RandomModel { alphabets, parents, noise, tables }
    }

    pub fn to_model(&self) -> CausalModel {
        let n = self.alphabets.len();
        let names = node_names(n);
        let nodes = (0..n).map(|v| Node::observed(names[v].clone(), self.alphabets[v])).collect();
        let edges: Vec<(&str, &str)> = (0..n)
            .flat_map(|v| self.parents[v].iter().map(move |&p| (p, v)))
            .map(|(p, v)| (names[p].as_str(), names[v].as_str()))
            .collect();
        let graph = Graph::new(nodes, edges).unwrap();
        let mut mechanisms = Vec::new();
        let mut noise = Vec::new();
        for v in 0..n {
            let mut args: Vec<String> = self.parents[v].iter().map(|&p| names[p].clone()).collect();
            if let Some(d) = &self.noise[v] {
                let e = format!("E{v}");
                let dist =
                    JointDistribution::new(vec![(e.clone(), d.len())], d.iter().cloned().enumerate().map(|(i, p)| (vec![i], p)))
                        .unwrap();
                noise.push(Noise::new(e.clone(), dist));
                args.push(e);
            }
            let expr = if args.is_empty() {
                Expr::Const(self.tables[v][&Vec::new()])
            } else {
                Expr::Table { args, entries: self.tables[v].clone() }
            };
            mechanisms.push(Mechanism::new(names[v].clone(), expr));
        }
        CausalModel::new(graph, mechanisms, noise).unwrap()
    }

    /// Scans every (noise, node) assignment pair and keeps those where each
    /// node's table agrees, weighted by the noise probability.
    pub fn oracle(&self) -> BTreeMap<Vec<usize>, Rational> {
        let n = self.alphabets.len();
        let noisy: Vec<usize> = (0..n).filter(|&v| self.noise[v].is_some()).collect();
        let noise_alphabets: Vec<usize> = noisy.iter().map(|&v| self.noise[v].as_ref().unwrap().len()).collect();
        let mut out: BTreeMap<Vec<usize>, Rational> = BTreeMap::new();
        for e in product(&noise_alphabets) {
            let weight = noisy
                .iter()
                .zip(&e)
                .fold(Rational::one(), |acc, (&v, &k)| acc * &self.noise[v].as_ref().unwrap()[k]);
            if weight.is_zero() {
                continue;
            }
            for values in product(&self.alphabets) {
                let ok = (0..n).all(|v| {
                    let mut key: Vec<usize> = self.parents[v].iter().map(|&p| values[p]).collect();
                    if let Some(i) = noisy.iter().position(|&w| w == v) {
                        key.push(e[i]);
                    }
                    self.tables[v][&key] == values[v]
                });
                if ok {
                    *out.entry(values).or_insert_with(Rational::zero) += &weight;
                }
            }
        }
        out
    }
}

/// Post-intervention distribution over every graph node, as the normalized
/// mixture over noise values of all assignments consistent with the
/// mechanisms, with the targets pinned instead of computed.
pub fn solution_set_oracle(m: &CausalModel, fixed: &[(&str, usize)]) -> Option<BTreeMap<Vec<usize>, Rational>> {
    let g = m.graph();
    let names: Vec<&str> = g.nodes().iter().map(|n| n.name.as_str()).collect();
    let alphabets: Vec<usize> = g.nodes().iter().map(|n| n.alphabet).collect();
    let noise_alphabets: Vec<usize> = m.noise().iter().map(|n| n.alphabet()).collect();
    let mut out: BTreeMap<Vec<usize>, Rational> = BTreeMap::new();
    for e in product(&noise_alphabets) {
        let weight = m.noise().iter().zip(&e).fold(Rational::one(), |acc, (n, &k)| acc * n.dist.prob(&[k]));
        if weight.is_zero() {
            continue;
        }
        for values in product(&alphabets) {
            let lookup = |name: &str| match names.iter().position(|n| *n == name) {
                Some(i) => values[i],
                None => e[m.noise().iter().position(|n| n.name == name).unwrap()],
            };
            let ok = (0..names.len()).all(|i| match fixed.iter().find(|f| f.0 == names[i]) {
                Some(&(_, v)) => values[i] == v,
                None => m.mechanism(i).expr.eval(&lookup).map(|v| v % alphabets[i]) == Some(values[i]),
            });
            if ok {
                *out.entry(values).or_insert_with(Rational::zero) += &weight;
            }
        }
    }
    let total: Rational = out.values().sum();
    if total.is_zero() {
        return None;
    }
    Some(out.into_iter().map(|(k, p)| (k, p / &total)).collect())
}

/// Marginal probability that the named nodes take the given values.
pub fn oracle_prob(m: &CausalModel, dist: &BTreeMap<Vec<usize>, Rational>, event: &[(&str, usize)]) -> Rational {
    let idx: Vec<(usize, usize)> = event.iter().map(|(n, v)| (m.graph().id(n).unwrap(), *v)).collect();
    dist.iter().filter(|(k, _)| idx.iter().all(|&(i, v)| k[i] == v)).map(|(_, p)| p).sum()
}

/// Affects check from the solution-set oracle: some `(z, x, y)`
/// where intervening on `x` and `z` changes `P(y)` relative to intervening
/// on `z` alone (observational when `z` is empty).
pub fn affects_oracle(m: &CausalModel, x: &[&str], y: &[&str], z: &[&str]) -> bool {
    let alph = |v: &[&str]| v.iter().map(|n| m.alphabet_of(n)).collect::<Vec<_>>();
    for zv in product(&alph(z)) {
        let zs: Vec<(&str, usize)> = z.iter().copied().zip(zv).collect();
        let base = solution_set_oracle(m, &zs).unwrap();
        for xv in product(&alph(x)) {
            let mut xz: Vec<(&str, usize)> = x.iter().copied().zip(xv).collect();
            xz.extend(zs.iter().copied());
            let after = solution_set_oracle(m, &xz).unwrap();
            for yv in product(&alph(y)) {
                let ys: Vec<(&str, usize)> = y.iter().copied().zip(yv).collect();
                if oracle_prob(m, &after, &ys) != oracle_prob(m, &base, &ys) {
                    return true;
                }
            }
        }
    }
    false
}

pub fn mask(ids: &[usize]) -> u64 {
    ids.iter().fold(0, |acc, &i| acc | 1 << i)
}
