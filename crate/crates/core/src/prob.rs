//! Exact joint distributions over named finite variables.
//!
//! Probabilities are `BigRational` throughout; nothing here touches floating
//! point.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProbError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("variable `{0}` has an empty alphabet")]
    EmptyAlphabet(String),
    #[error("value {value} out of range for `{var}` (alphabet {alphabet})")]
    ValueOutOfRange { var: String, value: usize, alphabet: usize },
    #[error("assignment has {got} values, expected {expected}")]
    WrongArity { expected: usize, got: usize },
    #[error("duplicate table entry {0:?}")]
    DuplicateEntry(Vec<usize>),
    #[error("negative probability {0}")]
    Negative(String),
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(String),
    #[error("conditioning event has probability zero")]
    ZeroProbabilityEvent,
    #[error("variable sets must be pairwise disjoint")]
    NotDisjoint,
    #[error("variable set must be nonempty")]
    EmptySet,
    #[error("distributions are over different variables")]
    MismatchedVariables,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Values for a subset of named variables.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment(BTreeMap<String, usize>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: usize) -> Self {
        self.0.insert(name.into(), value);
        self
    }

    pub fn insert(&mut self, name: impl Into<String>, value: usize) {
        self.0.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.0.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn extend(&mut self, other: &Assignment) {
        for (k, v) in other.iter() {
            self.insert(k, v);
        }
    }

    /// `name=value` pairs in the given variable order, comma-joined.
    pub fn render_in(&self, order: &[String]) -> String {
        order
            .iter()
            .filter_map(|n| self.get(n).map(|v| format!("{n}={v}")))
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl<S: Into<String>> FromIterator<(S, usize)> for Assignment {
    fn from_iter<I: IntoIterator<Item = (S, usize)>>(iter: I) -> Self {
        Assignment(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(","))
    }
}

/// Exact joint distribution. Only support points are stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointDistribution {
    vars: Vec<(String, usize)>,
    table: BTreeMap<Vec<usize>, Rational>,
}

impl JointDistribution {
    /// Builds a distribution, checking ranges, nonnegativity and that the
    /// entries sum to exactly one.
    pub fn new(
        vars: Vec<(String, usize)>,
        entries: impl IntoIterator<Item = (Vec<usize>, Rational)>,
    ) -> Result<Self, ProbError> {
        let table = Self::collect_entries(&vars, entries)?;
        let total: Rational = table.values().sum();
        if !total.is_one() {
            return Err(ProbError::NotNormalized(fmt_rational(&total)));
        }
        Ok(JointDistribution { vars, table })
    }

    /// Normalizes nonnegative weights. Returns the distribution together
    /// with the total weight before normalization.
    pub fn normalized(
        vars: Vec<(String, usize)>,
        weights: impl IntoIterator<Item = (Vec<usize>, Rational)>,
    ) -> Result<(Self, Rational), ProbError> {
        let mut table = BTreeMap::new();
        for (k, w) in weights {
            *table.entry(k).or_insert_with(Rational::zero) += w;
        }
        let table = Self::collect_entries(&vars, table)?;
        let total: Rational = table.values().sum();
        if total.is_zero() {
            return Err(ProbError::ZeroProbabilityEvent);
        }
        let table = table.into_iter().map(|(k, w)| (k, w / &total)).collect();
        Ok((JointDistribution { vars, table }, total))
    }

    fn collect_entries(
        vars: &[(String, usize)],
        entries: impl IntoIterator<Item = (Vec<usize>, Rational)>,
    ) -> Result<BTreeMap<Vec<usize>, Rational>, ProbError> {
        let mut seen = BTreeSet::new();
        for (name, alphabet) in vars {
            if *alphabet == 0 {
                return Err(ProbError::EmptyAlphabet(name.clone()));
            }
            if !seen.insert(name) {
                return Err(ProbError::DuplicateVariable(name.clone()));
            }
        }
        let mut table = BTreeMap::new();
        for (key, p) in entries {
            check_key(vars, &key)?;
            if p.is_negative() {
                return Err(ProbError::Negative(fmt_rational(&p)));
            }
            if table.contains_key(&key) {
                return Err(ProbError::DuplicateEntry(key));
            }
            if !p.is_zero() {
                table.insert(key, p);
            }
        }
        Ok(table)
    }

    pub fn point_mass(vars: Vec<(String, usize)>, values: Vec<usize>) -> Result<Self, ProbError> {
        Self::new(vars, [(values, Rational::one())])
    }

    pub fn uniform(vars: Vec<(String, usize)>) -> Result<Self, ProbError> {
        let alphabets: Vec<usize> = vars.iter().map(|v| v.1).collect();
        let size: usize = alphabets.iter().product();
        let p = Rational::new(BigInt::one(), BigInt::from(size.max(1)));
        Self::new(vars, product(&alphabets).map(|k| (k, p.clone())))
    }

    pub fn variables(&self) -> &[(String, usize)] {
        &self.vars
    }

    pub fn names(&self) -> Vec<String> {
        self.vars.iter().map(|v| v.0.clone()).collect()
    }

    /// Support points and their probabilities in lexicographic order.
    pub fn support(&self) -> impl Iterator<Item = (&[usize], &Rational)> {
        self.table.iter().map(|(k, v)| (k.as_slice(), v))
    }

    pub fn support_size(&self) -> usize {
        self.table.len()
    }

    pub fn prob(&self, values: &[usize]) -> Rational {
        self.table.get(values).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn position(&self, name: &str) -> Result<usize, ProbError> {
        self.vars
            .iter()
            .position(|v| v.0 == name)
            .ok_or_else(|| ProbError::UnknownVariable(name.to_string()))
    }

    fn positions<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>, ProbError> {
        let mut idx = Vec::with_capacity(names.len());
        for n in names {
            let i = self.position(n.as_ref())?;
            if idx.contains(&i) {
                return Err(ProbError::DuplicateVariable(n.as_ref().to_string()));
            }
            idx.push(i);
        }
        Ok(idx)
    }

    /// Probability of a partial assignment.
    pub fn prob_of(&self, event: &Assignment) -> Result<Rational, ProbError> {
        let mut fixed = Vec::with_capacity(event.len());
        for (name, value) in event.iter() {
            let i = self.position(name)?;
            let alphabet = self.vars[i].1;
            if value >= alphabet {
                return Err(ProbError::ValueOutOfRange { var: name.to_string(), value, alphabet });
            }
            fixed.push((i, value));
        }
        Ok(self
            .table
            .iter()
            .filter(|(k, _)| fixed.iter().all(|&(i, v)| k[i] == v))
            .map(|(_, p)| p)
            .sum())
    }

    /// Sums out every variable not in `keep`. The result keeps this
    /// distribution's variable order.
    pub fn marginal<S: AsRef<str>>(&self, keep: &[S]) -> Result<JointDistribution, ProbError> {
        if keep.is_empty() {
            return Err(ProbError::EmptySet);
        }
        let mut idx = self.positions(keep)?;
        idx.sort_unstable();
        let vars = idx.iter().map(|&i| self.vars[i].clone()).collect();
        Ok(JointDistribution { vars, table: self.project(&idx) })
    }

    fn project(&self, idx: &[usize]) -> BTreeMap<Vec<usize>, Rational> {
        let mut out: BTreeMap<Vec<usize>, Rational> = BTreeMap::new();
        for (k, p) in &self.table {
            let key: Vec<usize> = idx.iter().map(|&i| k[i]).collect();
            *out.entry(key).or_insert_with(Rational::zero) += p;
        }
        out
    }

    /// Conditional distribution of the remaining variables given `on`.
    pub fn condition(&self, on: &Assignment) -> Result<JointDistribution, ProbError> {
        let mut fixed = Vec::new();
        for (name, value) in on.iter() {
            let i = self.position(name)?;
            let alphabet = self.vars[i].1;
            if value >= alphabet {
                return Err(ProbError::ValueOutOfRange { var: name.to_string(), value, alphabet });
            }
            fixed.push((i, value));
        }
        let rest: Vec<usize> = (0..self.vars.len())
            .filter(|i| !fixed.iter().any(|f| f.0 == *i))
            .collect();
        let vars = rest.iter().map(|&i| self.vars[i].clone()).collect();
        let weights = self
            .table
            .iter()
            .filter(|(k, _)| fixed.iter().all(|&(i, v)| k[i] == v))
            .map(|(k, p)| (rest.iter().map(|&i| k[i]).collect::<Vec<_>>(), p.clone()));
        Ok(Self::normalized(vars, weights)?.0)
    }

    /// Exact test of `P(XY|Z) = P(X|Z) P(Y|Z)` for every `z` with `P(z) > 0`.
    pub fn is_independent<S: AsRef<str>>(&self, x: &[S], y: &[S], z: &[S]) -> Result<bool, ProbError> {
        if x.is_empty() || y.is_empty() {
            return Err(ProbError::EmptySet);
        }
        let xi = self.positions(x)?;
        let yi = self.positions(y)?;
        let zi = self.positions(z)?;
        if xi.iter().any(|i| yi.contains(i) || zi.contains(i)) || yi.iter().any(|i| zi.contains(i)) {
            return Err(ProbError::NotDisjoint);
        }
        let cat = |a: &[usize], b: &[usize]| [a, b].concat();
        let p_xyz = self.project(&cat(&cat(&xi, &yi), &zi));
        let p_xz = self.project(&cat(&xi, &zi));
        let p_yz = self.project(&cat(&yi, &zi));
        let p_z = self.project(&zi);
        let alph = |idx: &[usize]| idx.iter().map(|&i| self.vars[i].1).collect::<Vec<_>>();
        let (ax, ay) = (alph(&xi), alph(&yi));
        let zero = Rational::zero();
        for (zv, pz) in &p_z {
            for xv in product(&ax) {
                let pxz = p_xz.get(&cat(&xv, zv)).unwrap_or(&zero);
                for yv in product(&ay) {
                    let pyz = p_yz.get(&cat(&yv, zv)).unwrap_or(&zero);
                    let pxyz = p_xyz.get(&cat(&cat(&xv, &yv), zv)).unwrap_or(&zero);
                    if pxyz * pz != pxz * pyz {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Total variation distance, half the L1 distance between tables.
    pub fn tv_distance(&self, other: &JointDistribution) -> Result<Rational, ProbError> {
        if self.vars != other.vars {
            return Err(ProbError::MismatchedVariables);
        }
        let keys: BTreeSet<&Vec<usize>> = self.table.keys().chain(other.table.keys()).collect();
        let l1: Rational = keys
            .into_iter()
            .map(|k| (self.prob(k) - other.prob(k)).abs())
            .sum();
        Ok(l1 / Rational::from_integer(BigInt::from(2)))
    }

    /// One line per support point: values in variable order, then `num/den`.
    pub fn to_table_string(&self) -> String {
        let mut out = String::new();
        for (k, p) in &self.table {
            for v in k {
                out.push_str(&v.to_string());
                out.push(' ');
            }
            out.push_str(&fmt_rational(p));
            out.push('\n');
        }
        out
    }

    /// Inverse of [`JointDistribution::to_table_string`].
    pub fn parse_table(vars: Vec<(String, usize)>, text: &str) -> Result<Self, ProbError> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| ProbError::Parse { line: n + 1, msg };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != vars.len() + 1 {
                return Err(parse_err(format!("expected {} values and a probability", vars.len())));
            }
            let key = tokens[..vars.len()]
                .iter()
                .map(|t| t.parse::<usize>().map_err(|e| parse_err(format!("bad value `{t}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let p = parse_rational(tokens[vars.len()]).map_err(parse_err)?;
            entries.push((key, p));
        }
        Self::new(vars, entries)
    }
}

fn check_key(vars: &[(String, usize)], key: &[usize]) -> Result<(), ProbError> {
    if key.len() != vars.len() {
        return Err(ProbError::WrongArity { expected: vars.len(), got: key.len() });
    }
    for ((name, alphabet), &value) in vars.iter().zip(key) {
        if value >= *alphabet {
            return Err(ProbError::ValueOutOfRange { var: name.clone(), value, alphabet: *alphabet });
        }
    }
    Ok(())
}

/// All value tuples over the given alphabets, first coordinate slowest.
/// An empty alphabet list yields the single empty tuple.
pub fn product(alphabets: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let mut next = if alphabets.iter().all(|&a| a > 0) {
        Some(vec![0; alphabets.len()])
    } else {
        None
    };
    std::iter::from_fn(move || {
        let cur = next.take()?;
        let mut succ = cur.clone();
        for i in (0..succ.len()).rev() {
            succ[i] += 1;
            if succ[i] < alphabets[i] {
                next = Some(succ);
                break;
            }
            succ[i] = 0;
        }
        Some(cur)
    })
}

pub fn fmt_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `num/den` or an integer, optionally signed.
pub fn parse_rational(s: &str) -> Result<Rational, String> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| format!("malformed rational `{s}`"))?;
    let den: BigInt = den.parse().map_err(|_| format!("malformed rational `{s}`"))?;
    if den.is_zero() {
        return Err(format!("zero denominator in `{s}`"));
    }
    Ok(Rational::new(num, den))
}

pub fn rational(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(names: &[&str]) -> Vec<(String, usize)> {
        names.iter().map(|n| (n.to_string(), 2)).collect()
    }

    /// Uniform over {(a, b, c) : b = a xor c}.
    fn xor_triple() -> JointDistribution {
        let q = rational(1, 4);
        let entries = product(&[2, 2]).map(|ac| (vec![ac[0], ac[0] ^ ac[1], ac[1]], q.clone()));
        JointDistribution::new(bits(&["A", "B", "C"]), entries).unwrap()
    }

    #[test]
    fn product_enumerates_lexicographically() {
        let all: Vec<_> = product(&[2, 3]).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 0]);
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(all[5], vec![1, 2]);
        assert_eq!(product(&[]).collect::<Vec<_>>(), vec![Vec::<usize>::new()]);
        assert_eq!(product(&[2, 0]).count(), 0);
    }

    #[test]
    fn rejects_bad_tables() {
        let half = rational(1, 2);
        assert!(matches!(
            JointDistribution::new(bits(&["A"]), [(vec![0], half.clone())]),
            Err(ProbError::NotNormalized(_))
        ));
        assert!(matches!(
            JointDistribution::new(bits(&["A"]), [(vec![2], Rational::one())]),
            Err(ProbError::ValueOutOfRange { .. })
        ));
        assert!(matches!(
            JointDistribution::new(bits(&["A"]), [(vec![0], rational(3, 2)), (vec![1], -half)]),
            Err(ProbError::Negative(_))
        ));
    }

    #[test]
    fn marginal_sums_out() {
        let u = JointDistribution::uniform(bits(&["A", "B", "C"])).unwrap();
        let m = u.marginal(&["B"]).unwrap();
        assert_eq!(m.prob(&[0]), rational(1, 2));
        assert_eq!(m.prob(&[1]), rational(1, 2));
        let p = xor_triple();
        assert_eq!(p.marginal(&["C", "A", "B"]).unwrap(), p);
        assert!(matches!(p.marginal(&["Q"]), Err(ProbError::UnknownVariable(_))));
        assert!(matches!(p.marginal::<&str>(&[]), Err(ProbError::EmptySet)));
    }

    #[test]
    fn conditioning() {
        let p = xor_triple();
        let given = p.condition(&Assignment::new().with("A", 0).with("C", 1)).unwrap();
        assert_eq!(given.names(), vec!["B"]);
        assert_eq!(given.prob(&[1]), Rational::one());
        let given_a = p.condition(&Assignment::new().with("A", 0)).unwrap().marginal(&["B"]).unwrap();
        assert_eq!(given_a.prob(&[0]), rational(1, 2));
        let point = JointDistribution::point_mass(bits(&["A", "B"]), vec![1, 0]).unwrap();
        let on = Assignment::new().with("A", 1);
        assert_eq!(point.condition(&on).unwrap().prob(&[0]), Rational::one());
        let impossible = Assignment::new().with("A", 0);
        assert_eq!(point.condition(&impossible).unwrap_err(), ProbError::ZeroProbabilityEvent);
    }

    #[test]
    fn independence() {
        let p = xor_triple();
        assert!(p.is_independent(&["A"], &["B"], &[]).unwrap());
        assert!(!p.is_independent(&["A", "C"], &["B"], &[]).unwrap());
        assert!(!p.is_independent(&["A"], &["B"], &["C"]).unwrap());
        let u = JointDistribution::uniform(bits(&["X", "Y"])).unwrap();
        assert!(u.is_independent(&["X"], &["Y"], &[]).unwrap());
        assert_eq!(p.is_independent(&["A"], &["A"], &[]).unwrap_err(), ProbError::NotDisjoint);
        assert_eq!(p.is_independent(&["A"], &["B"], &["A"]).unwrap_err(), ProbError::NotDisjoint);
    }

    #[test]
    fn total_variation() {
        let u = JointDistribution::uniform(bits(&["A"])).unwrap();
        assert!(u.tv_distance(&u).unwrap().is_zero());
        let p0 = JointDistribution::point_mass(bits(&["A"]), vec![0]).unwrap();
        let p1 = JointDistribution::point_mass(bits(&["A"]), vec![1]).unwrap();
        assert_eq!(p0.tv_distance(&p1).unwrap(), Rational::one());
        let skew = JointDistribution::new(bits(&["A"]), [(vec![0], rational(3, 4)), (vec![1], rational(1, 4))]).unwrap();
        assert_eq!(u.tv_distance(&skew).unwrap(), rational(1, 4));
        let other = JointDistribution::uniform(bits(&["B"])).unwrap();
        assert_eq!(u.tv_distance(&other).unwrap_err(), ProbError::MismatchedVariables);
    }

    #[test]
    fn table_text_round_trip() {
        let p = xor_triple();
        let text = p.to_table_string();
        assert_eq!(text.lines().next(), Some("0 0 0 1/4"));
        assert_eq!(JointDistribution::parse_table(bits(&["A", "B", "C"]), &text).unwrap(), p);
        assert!(matches!(
            JointDistribution::parse_table(bits(&["A"]), "0 1/0\n1 1"),
            Err(ProbError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("-3/6").unwrap(), rational(-1, 2));
        assert_eq!(parse_rational("7").unwrap(), rational(7, 1));
        assert!(parse_rational("1.5").is_err());
        assert!(parse_rational("1/0").is_err());
    }
}
