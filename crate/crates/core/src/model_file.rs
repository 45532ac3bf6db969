//! Line-oriented model files.
//!
//! ```text
//! [nodes]
//! L latent alphabet=2
//! A observed alphabet=2
//! [edges]
//! L -> A
//! [mechanisms]
//! L = E_L
//! A = not(L)
//! [noise]
//! E_L ~ (1/3, 2/3)
//! [embedding dim=1]
//! A = (0, -1)
//! ```
//!
//! Mechanism expressions are integers, names, `xor(..)`, `and(..)`, `or(..)`,
//! `not(..)` and tables `table{P=0 Q=1:v, ...}` keyed by parent values.
//! Noise is `uniform` (alphabet of the node it feeds), `uniform(k)` or an
//! explicit list of rational probabilities. `#` starts a comment.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::graph::{Graph, Node, NodeKind};
use crate::minkowski::{Embedding, MinkowskiError, SpacetimePoint};
use crate::prob::{fmt_rational, parse_rational, JointDistribution, Rational};
use crate::scm::{CausalModel, Expr, Mechanism, ModelError, Noise};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelFileError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Model { line: usize, source: ModelError },
    #[error("{0}")]
    Invalid(ModelError),
    #[error("line {line}: {source}")]
    Embedding { line: usize, source: MinkowskiError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelFile {
    pub model: CausalModel,
    pub embedding: Option<Embedding>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Nodes,
    Edges,
    Mechanisms,
    Noise,
    Embedding,
}

enum NoiseSpec {
    Uniform,
    UniformOf(usize),
    Probs(Vec<Rational>),
}

fn syntax(line: usize, msg: impl Into<String>) -> ModelFileError {
    ModelFileError::Syntax { line, msg: msg.into() }
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

fn name(line: usize, s: &str) -> Result<String, ModelFileError> {
    let s = s.trim();
    if is_name(s) {
        Ok(s.to_string())
    } else {
        Err(syntax(line, format!("invalid name `{s}`")))
    }
}

pub fn parse_model(text: &str) -> Result<ModelFile, ModelFileError> {
    let mut section = None;
    let mut nodes: Vec<(usize, Node)> = Vec::new();
    let mut edges: Vec<(usize, String, String)> = Vec::new();
    let mut mechanisms: Vec<(usize, Mechanism)> = Vec::new();
    let mut noise: Vec<(usize, String, NoiseSpec)> = Vec::new();
    let mut dim = None;
    let mut locations: Vec<(usize, String, SpacetimePoint)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(header) = content.strip_prefix('[') {
            let header = header.strip_suffix(']').ok_or_else(|| syntax(line, "unterminated section header"))?;
            let mut words = header.split_whitespace();
            section = Some(match words.next() {
                Some("nodes") => Section::Nodes,
                Some("edges") => Section::Edges,
                Some("mechanisms") => Section::Mechanisms,
                Some("noise") => Section::Noise,
                Some("embedding") => {
                    let spec = words.collect::<Vec<_>>().join("");
                    let d = spec
                        .strip_prefix("dim=")
                        .and_then(|d| d.parse::<usize>().ok())
                        .ok_or_else(|| syntax(line, "expected `[embedding dim=<d>]`"))?;
                    if dim.replace(d).is_some() {
                        return Err(syntax(line, "duplicate embedding section"));
                    }
                    Section::Embedding
                }
                other => return Err(syntax(line, format!("unknown section `{}`", other.unwrap_or("")))),
            });
            continue;
        }
        match section.ok_or_else(|| syntax(line, "content before any section header"))? {
            Section::Nodes => nodes.push((line, parse_node(line, content)?)),
            Section::Edges => {
                let (from, to) = content.split_once("->").ok_or_else(|| syntax(line, "expected `P -> C`"))?;
                edges.push((line, name(line, from)?, name(line, to)?));
            }
            Section::Mechanisms => {
                let (lhs, rhs) = content.split_once('=').ok_or_else(|| syntax(line, "expected `N = expr`"))?;
                let expr = parse_expr(rhs).map_err(|msg| syntax(line, msg))?;
                mechanisms.push((line, Mechanism::new(name(line, lhs)?, expr)));
            }
            Section::Noise => {
                let (lhs, rhs) = content.split_once('~').ok_or_else(|| syntax(line, "expected `E ~ dist`"))?;
                noise.push((line, name(line, lhs)?, parse_noise(line, rhs)?));
            }
            Section::Embedding => {
                let (lhs, rhs) = content.split_once('=').ok_or_else(|| syntax(line, "expected `N = (t, x..)`"))?;
                locations.push((line, name(line, lhs)?, parse_point(line, rhs)?));
            }
        }
    }

    let graph = build_graph(&nodes, &edges)?;
    let model = build_model(graph, mechanisms, noise)?;
    let embedding = match dim {
        None => None,
        Some(d) => Some(build_embedding(&model, d, locations)?),
    };
    Ok(ModelFile { model, embedding })
}

fn parse_node(line: usize, content: &str) -> Result<Node, ModelFileError> {
    let spaced = content.replace(',', " ").replace('=', " = ");
    let words: Vec<&str> = spaced.split_whitespace().collect();
    let node_name = name(line, words.first().copied().unwrap_or(""))?;
    let (mut kind, mut alphabet) = (None, None);
    let mut rest = &words[1..];
    while let Some((&w, tail)) = rest.split_first() {
        match w {
            "observed" => kind = Some(NodeKind::Observed),
            "latent" => kind = Some(NodeKind::Latent),
            "alphabet" => match tail {
                ["=", k, ..] => {
                    let k = k.parse::<usize>().map_err(|_| syntax(line, format!("bad alphabet size `{k}`")))?;
                    alphabet = Some(k);
                    rest = &tail[2..];
                    continue;
                }
                _ => return Err(syntax(line, "expected `alphabet=<k>`")),
            },
            other => return Err(syntax(line, format!("unexpected `{other}`"))),
        }
        rest = tail;
    }
    let kind = kind.ok_or_else(|| syntax(line, "node kind must be `observed` or `latent`"))?;
    let alphabet = alphabet.ok_or_else(|| syntax(line, "missing `alphabet=<k>`"))?;
    if alphabet == 0 {
        return Err(syntax(line, "alphabet must be nonempty"));
    }
    Ok(Node::new(node_name, alphabet, kind))
}

fn parse_noise(line: usize, rhs: &str) -> Result<NoiseSpec, ModelFileError> {
    let rhs = rhs.trim();
    if rhs == "uniform" {
        return Ok(NoiseSpec::Uniform);
    }
    if let Some(k) = rhs.strip_prefix("uniform") {
        let k = k.trim().strip_prefix('(').and_then(|k| k.strip_suffix(')'));
        return match k.and_then(|k| k.trim().parse::<usize>().ok()) {
            Some(k) if k > 0 => Ok(NoiseSpec::UniformOf(k)),
            _ => Err(syntax(line, "expected `uniform(<k>)`")),
        };
    }
    let list = rhs
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| syntax(line, "expected `uniform` or `(p0, p1, ...)`"))?;
    let probs = list
        .split(',')
        .map(|p| parse_rational(p).map_err(|msg| syntax(line, msg)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NoiseSpec::Probs(probs))
}

fn parse_point(line: usize, rhs: &str) -> Result<SpacetimePoint, ModelFileError> {
    let inner = rhs
        .trim()
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| syntax(line, "expected `(t, x1, ..)`"))?;
    let coords = inner
        .split(',')
        .map(|c| parse_rational(c).map_err(|msg| syntax(line, msg)))
        .collect::<Result<Vec<_>, _>>()?;
    match coords.split_first() {
        Some((t, x)) if !x.is_empty() => Ok(SpacetimePoint::new(t.clone(), x.to_vec())),
        _ => Err(syntax(line, "a point needs a time and at least one spatial coordinate")),
    }
}

fn build_graph(nodes: &[(usize, Node)], edges: &[(usize, String, String)]) -> Result<Graph, ModelFileError> {
    let mut lines: HashMap<&str, usize> = HashMap::new();
    for (line, n) in nodes {
        if lines.insert(&n.name, *line).is_some() {
            return Err(syntax(*line, format!("duplicate node `{}`", n.name)));
        }
    }
    let mut seen = HashMap::new();
    for (line, from, to) in edges {
        for n in [from, to] {
            if !lines.contains_key(n.as_str()) {
                return Err(syntax(*line, format!("unknown node `{n}`")));
            }
        }
        if from == to {
            return Err(syntax(*line, format!("self-loop on `{from}`")));
        }
        if seen.insert((from, to), *line).is_some() {
            return Err(syntax(*line, format!("duplicate edge `{from} -> {to}`")));
        }
    }
    let list = nodes.iter().map(|(_, n)| n.clone()).collect();
    Graph::new(list, edges.iter().map(|(_, f, t)| (f.as_str(), t.as_str())))
        .map_err(|e| ModelFileError::Invalid(e.into()))
}

fn build_model(
    graph: Graph,
    mechanisms: Vec<(usize, Mechanism)>,
    noise: Vec<(usize, String, NoiseSpec)>,
) -> Result<CausalModel, ModelFileError> {
    let mut mech_line: HashMap<String, usize> = HashMap::new();
    for (line, m) in &mechanisms {
        if !graph.contains(&m.node) {
            return Err(syntax(*line, format!("mechanism for unknown node `{}`", m.node)));
        }
        if mech_line.insert(m.node.clone(), *line).is_some() {
            return Err(ModelFileError::Model { line: *line, source: ModelError::DuplicateMechanism(m.node.clone()) });
        }
    }
    let mut noise_line = HashMap::new();
    let mut built = Vec::with_capacity(noise.len());
    for (line, n, spec) in noise {
        let fed = mechanisms.iter().find(|(_, m)| m.expr.names().contains(&n));
        let probs = match spec {
            NoiseSpec::Uniform => {
                let (_, m) = fed.ok_or_else(|| syntax(line, format!("`{n}` feeds no mechanism, so its alphabet is unknown")))?;
                let k = graph.node(graph.id(&m.node).expect("checked above")).alphabet;
                vec![Rational::new(1.into(), k.into()); k]
            }
            NoiseSpec::UniformOf(k) => vec![Rational::new(1.into(), k.into()); k],
            NoiseSpec::Probs(p) => p,
        };
        let vars = vec![(n.clone(), probs.len())];
        let dist = JointDistribution::new(vars, probs.into_iter().enumerate().map(|(v, p)| (vec![v], p)))
            .map_err(|e| ModelFileError::Model { line, source: e.into() })?;
        noise_line.insert(n.clone(), line);
        built.push(Noise::new(n, dist));
    }

    let mechanisms = mechanisms.into_iter().map(|(_, m)| m).collect();
    CausalModel::new(graph, mechanisms, built).map_err(|e| {
        let line = match &e {
            ModelError::UnknownName { node, .. }
            | ModelError::NotAParent { node, .. }
            | ModelError::MissingParent { node, .. }
            | ModelError::BadTable { node, .. }
            | ModelError::MultipleNoise(node) => mech_line.get(node).copied(),
            ModelError::NoiseReused(n) | ModelError::UnusedNoise(n) | ModelError::NoiseClash(n) => {
                noise_line.get(n).copied()
            }
            _ => None,
        };
        match line {
            Some(line) => ModelFileError::Model { line, source: e },
            None => ModelFileError::Invalid(e),
        }
    })
}

fn build_embedding(
    model: &CausalModel,
    dim: usize,
    locations: Vec<(usize, String, SpacetimePoint)>,
) -> Result<Embedding, ModelFileError> {
    let mut map = BTreeMap::new();
    let mut last_line = 0;
    for (line, n, p) in locations {
        let id = model.graph().id(&n).map_err(|_| syntax(line, format!("unknown node `{n}`")))?;
        if !model.graph().node(id).is_observed() {
            return Err(syntax(line, format!("latent node `{n}` cannot be embedded")));
        }
        if p.dim() != dim {
            return Err(ModelFileError::Embedding {
                line,
                source: MinkowskiError::DimensionMismatch { expected: dim, got: p.dim() },
            });
        }
        if map.insert(n.clone(), p).is_some() {
            return Err(syntax(line, format!("duplicate location for `{n}`")));
        }
        last_line = line;
    }
    Embedding::new(dim, map).map_err(|source| ModelFileError::Embedding { line: last_line, source })
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(usize),
    Sym(char),
}

fn tokenize(s: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            out.push(Tok::Int(digits.parse().map_err(|_| format!("integer `{digits}` too large"))?));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "(){},=:".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(format!("unexpected character `{c}`"));
        }
    }
    Ok(out)
}

struct ExprParser {
    toks: Vec<Tok>,
    pos: usize,
}

impl ExprParser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Result<Tok, String> {
        let t = self.toks.get(self.pos).cloned().ok_or("unexpected end of expression")?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, c: char) -> Result<(), String> {
        match self.next()? {
            Tok::Sym(s) if s == c => Ok(()),
            other => Err(format!("expected `{c}`, found {other:?}")),
        }
    }

    fn int(&mut self) -> Result<usize, String> {
        match self.next()? {
            Tok::Int(k) => Ok(k),
            other => Err(format!("expected an integer, found {other:?}")),
        }
    }

    fn expr(&mut self) -> Result<Expr, String> {
        match self.next()? {
            Tok::Int(k) => Ok(Expr::Const(k)),
            Tok::Ident(id) => {
                let call = self.peek() == Some(&Tok::Sym('('));
                match id.as_str() {
                    "xor" | "and" | "or" | "not" if call => {
                        self.expect('(')?;
                        let args = self.args()?;
                        match id.as_str() {
                            "xor" => Ok(Expr::Xor(args)),
                            "and" => Ok(Expr::And(args)),
                            "or" => Ok(Expr::Or(args)),
                            _ => match <[Expr; 1]>::try_from(args) {
                                Ok([a]) => Ok(Expr::Not(Box::new(a))),
                                Err(_) => Err("`not` takes exactly one argument".into()),
                            },
                        }
                    }
                    "table" if self.peek() == Some(&Tok::Sym('{')) => self.table(),
                    "free" => Ok(Expr::Free),
                    _ => Ok(Expr::Var(id)),
                }
            }
            other => Err(format!("unexpected {other:?}")),
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>, String> {
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::Sym(')')) {
            self.pos += 1;
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            match self.next()? {
                Tok::Sym(',') => {}
                Tok::Sym(')') => return Ok(args),
                other => return Err(format!("expected `,` or `)`, found {other:?}")),
            }
        }
    }

    fn table(&mut self) -> Result<Expr, String> {
        self.expect('{')?;
        let mut args: Option<Vec<String>> = None;
        let mut entries = BTreeMap::new();
        if self.peek() == Some(&Tok::Sym('}')) {
            self.pos += 1;
            return Err("empty table".into());
        }
        loop {
            let mut names = Vec::new();
            let mut key = Vec::new();
            while let Some(Tok::Ident(_)) = self.peek() {
                let Tok::Ident(n) = self.next()? else { unreachable!() };
                self.expect('=')?;
                names.push(n);
                key.push(self.int()?);
            }
            self.expect(':')?;
            let value = self.int()?;
            match &args {
                None => args = Some(names),
                Some(a) if *a == names => {}
                Some(_) => return Err("table entries must list the same arguments in the same order".into()),
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(format!("duplicate table entry {key:?}"));
            }
            match self.next()? {
                Tok::Sym(',') => {}
                Tok::Sym('}') => break,
                other => return Err(format!("expected `,` or `}}`, found {other:?}")),
            }
        }
        Ok(Expr::Table { args: args.unwrap_or_default(), entries })
    }
}

pub fn parse_expr(s: &str) -> Result<Expr, String> {
    let mut p = ExprParser { toks: tokenize(s)?, pos: 0 };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(format!("trailing input after `{e}`"));
    }
    Ok(e)
}

/// Canonical text form; [`parse_model`] inverts it.
pub fn serialize_model(file: &ModelFile) -> String {
    let m = &file.model;
    let g = m.graph();
    let mut out = String::from("[nodes]\n");
    for n in g.nodes() {
        out.push_str(&format!("{} {} alphabet={}\n", n.name, n.kind.as_str(), n.alphabet));
    }
    out.push_str("\n[edges]\n");
    for &(u, v) in g.edges() {
        out.push_str(&format!("{} -> {}\n", g.name(u), g.name(v)));
    }
    out.push_str("\n[mechanisms]\n");
    for mech in m.mechanisms() {
        out.push_str(&format!("{} = {}\n", mech.node, mech.expr));
    }
    if !m.noise().is_empty() {
        out.push_str("\n[noise]\n");
        for (id, _) in g.nodes().iter().enumerate() {
            let Some(n) = m.noise_of(id) else { continue };
            let k = n.alphabet();
            let probs: Vec<Rational> = (0..k).map(|v| n.dist.prob(&[v])).collect();
            let uniform = probs.iter().all(|p| *p == Rational::new(1.into(), k.into()));
            let spec = if uniform && k == g.node(id).alphabet {
                "uniform".to_string()
            } else if uniform {
                format!("uniform({k})")
            } else {
                format!("({})", probs.iter().map(fmt_rational).collect::<Vec<_>>().join(", "))
            };
            out.push_str(&format!("{} ~ {spec}\n", n.name));
        }
    }
    if let Some(e) = &file.embedding {
        out.push_str(&format!("\n[embedding dim={}]\n", e.dim));
        for n in g.nodes() {
            if let Some(p) = e.locations.get(&n.name) {
                let coords: Vec<String> = std::iter::once(&p.t).chain(&p.x).map(|c| c.to_string()).collect();
                out.push_str(&format!("{} = ({})\n", n.name, coords.join(", ")));
            }
        }
    }
    out
}
