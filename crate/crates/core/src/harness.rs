//! Command dispatch and reports for the command-line tool.
//!
//! Exit status: 0 on success, 1 when the report carries a negative verdict
//! (cyclic certificate, incompatible embedding, d-separation property
//! failure), 2 on input errors. `expect` flips the polarity so either
//! outcome can be asserted.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_traits::ToPrimitive;
use thiserror::Error;

use crate::certify::{certify_cycle, CertifyError, CycleCertificate, Rule, Verdict};
use crate::intervention::{
    enumerate_affects, observed_distribution, post_intervention_distribution, simulate_protocol, AffectsSet,
    Experiment, InterventionTarget, ProtocolReport,
};
use crate::minkowski::{check_embedding, MinkowskiError, Policy, Violation};
use crate::model_file::{parse_model, ModelFile, ModelFileError};
use crate::prob::{fmt_rational, product, Assignment, JointDistribution, Rational};
use crate::scm::{check_dsep_property, detect_fine_tuning, solve, CausalModel, ModelError, SolveReport, Triple};

pub const DEFAULT_MAX_SIZE: usize = 2;
pub const DEFAULT_SAMPLES: u64 = 100_000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{path}: {source}")]
    File { path: String, source: ModelFileError },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Certify(#[from] CertifyError),
    #[error(transparent)]
    Minkowski(#[from] MinkowskiError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Solve,
    /// Is `x` d-separated from `y` given `z`?
    Dsep { x: Vec<String>, y: Vec<String>, z: Vec<String> },
    Affects,
    Certify,
    EmbedCheck,
    Simulate { experiment: Experiment },
    Finetuning,
    Compare { experiment: Experiment },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    /// One `key=value` record per line.
    Machine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    Cyclic,
    Dag,
    Compatible,
    Incompatible,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub command: Command,
    /// One model, or several for `compare`.
    pub models: Vec<PathBuf>,
    pub max_size: usize,
    pub policy: Policy,
    pub samples: u64,
    /// Required by `simulate`.
    pub seed: Option<u64>,
    pub format: Format,
    pub expect: Option<Expect>,
}

impl RunConfig {
    pub fn new(command: Command, models: Vec<PathBuf>) -> Self {
        RunConfig {
            command,
            models,
            max_size: DEFAULT_MAX_SIZE,
            policy: Policy::Conservative,
            samples: DEFAULT_SAMPLES,
            seed: None,
            format: Format::Text,
            expect: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub status: i32,
    pub stdout: String,
    pub stderr: String,
}

struct Report {
    stdout: String,
    stderr: String,
    /// Whether the report's verdict is the negative one.
    negative: bool,
}

pub fn run(config: &RunConfig) -> Outcome {
    match execute(config) {
        Ok(r) => {
            let status = match config.expect {
                None => i32::from(r.negative),
                Some(e) => {
                    let wants_negative = matches!(e, Expect::Cyclic | Expect::Incompatible);
                    i32::from(r.negative != wants_negative)
                }
            };
            Outcome { status, stdout: r.stdout, stderr: r.stderr }
        }
        Err(e) => Outcome { status: 2, stdout: String::new(), stderr: format!("error: {e}\n") },
    }
}

pub fn load_model(path: &Path) -> Result<ModelFile, HarnessError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io { path: shown.clone(), msg: e.to_string() })?;
    parse_model(&text).map_err(|source| HarnessError::File { path: shown, source })
}

fn model_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn single(config: &RunConfig) -> Result<(String, ModelFile), HarnessError> {
    match config.models.as_slice() {
        [path] => Ok((model_name(path), load_model(path)?)),
        _ => Err(HarnessError::Usage("this command takes exactly one model".into())),
    }
}

fn affects_set(name: String, m: &CausalModel, max_size: usize) -> Result<AffectsSet, HarnessError> {
    if max_size == 0 {
        return Err(HarnessError::Usage("--max-size must be at least 1".into()));
    }
    let mut set = enumerate_affects(m, max_size)?;
    set.model = name;
    Ok(set)
}

fn execute(config: &RunConfig) -> Result<Report, HarnessError> {
    let expect_ok = matches!(
        (config.expect, &config.command),
        (None, _)
            | (Some(Expect::Cyclic | Expect::Dag), Command::Certify)
            | (Some(Expect::Compatible | Expect::Incompatible), Command::EmbedCheck)
    );
    if !expect_ok {
        return Err(HarnessError::Usage("--expect does not apply to this command".into()));
    }
    let machine = config.format == Format::Machine;
    let mut stderr = String::new();
    let mut negative = false;
    let stdout = match &config.command {
        Command::Solve => {
            let (_, file) = single(config)?;
            let report = solve(&file.model)?;
            let observed = report.distribution.marginal(&file.model.observed_names()).map_err(ModelError::from)?;
            for t in check_dsep_property(file.model.graph(), &observed)? {
                let _ = writeln!(stderr, "warning: d-separation property fails for {t}");
            }
            render_solve(&report, machine)
        }
        Command::Dsep { x, y, z } => {
            let (_, file) = single(config)?;
            let g = file.model.graph();
            let path = g.d_connecting_path(x, y, z).map_err(ModelError::from)?;
            match (path, machine) {
                (None, _) => "d_separated=1\n".to_string(),
                (Some(p), false) => format!("d_separated=0 path={p}\n"),
                (Some(p), true) => format!("d_separated=0\npath={p}\n"),
            }
        }
        Command::Affects => {
            let (name, file) = single(config)?;
            let set = affects_set(name, &file.model, config.max_size)?;
            render_affects(&set, machine)
        }
        Command::Certify => {
            let (name, file) = single(config)?;
            let observed = observed_distribution(&file.model)?;
            if !check_dsep_property(file.model.graph(), &observed)?.is_empty() {
                stderr.push_str(
                    "warning: the model violates the d-separation property; the path rules may not apply\n",
                );
            }
            let set = affects_set(name, &file.model, config.max_size)?;
            let cert = certify_cycle(&set)?;
            negative = cert.verdict == Verdict::CyclicCertified;
            render_certificate(&cert, machine)
        }
        Command::EmbedCheck => {
            let (name, file) = single(config)?;
            let embedding = file
                .embedding
                .as_ref()
                .ok_or_else(|| HarnessError::Usage("model has no [embedding] section".into()))?;
            let set = affects_set(name, &file.model, config.max_size)?;
            let violations = check_embedding(&set, embedding, config.policy)?;
            negative = !violations.is_empty();
            render_violations(&violations, machine)
        }
        Command::Simulate { experiment } => {
            let (_, file) = single(config)?;
            let seed = config.seed.ok_or_else(|| HarnessError::Usage("simulate requires --seed".into()))?;
            if config.samples == 0 {
                return Err(HarnessError::Usage("--samples must be at least 1".into()));
            }
            render_protocol(&simulate_protocol(&file.model, *experiment, config.samples, seed)?, machine)
        }
        Command::Finetuning => {
            let (_, file) = single(config)?;
            let observed = observed_distribution(&file.model)?;
            let tuned = detect_fine_tuning(file.model.graph(), &observed)?;
            let violations = check_dsep_property(file.model.graph(), &observed)?;
            negative = !violations.is_empty();
            render_audit(&tuned, &violations, machine)
        }
        Command::Compare { experiment } => {
            if config.models.len() < 2 {
                return Err(HarnessError::Usage("compare takes at least two models".into()));
            }
            let models = config
                .models
                .iter()
                .map(|p| Ok((model_name(p), load_model(p)?.model)))
                .collect::<Result<Vec<_>, HarnessError>>()?;
            render_comparison(&compare_models(&models, *experiment)?, machine)
        }
    };
    Ok(Report { stdout, stderr, negative })
}

pub fn render_solve(r: &SolveReport, machine: bool) -> String {
    let vars = r.distribution.names().join(",");
    if !machine {
        return format!("{}\nvariables={vars}\n{}", r.header(), r.distribution.to_table_string());
    }
    let method = r.header();
    let mut out = method.replace(' ', "\n") + "\n";
    let _ = writeln!(out, "variables={vars}");
    for (k, p) in r.distribution.support() {
        let key: Vec<String> = k.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "p[{}]={}", key.join(","), fmt_rational(p));
    }
    out
}

pub fn render_affects(set: &AffectsSet, machine: bool) -> String {
    if !machine {
        return set.render();
    }
    let mut out = String::new();
    for r in &set.relations {
        let line = r.render(&set.observed);
        let witness = line.rsplit_once("witness=").map_or("-", |(_, w)| w);
        let _ = writeln!(out, "holds[{}]={}", r.key(), u8::from(r.holds));
        let _ = writeln!(out, "witness[{}]={witness}", r.key());
    }
    out
}

pub fn render_certificate(cert: &CycleCertificate, machine: bool) -> String {
    if !machine {
        return cert.render();
    }
    let mut out = String::new();
    for (i, c) in cert.constraints.iter().enumerate() {
        let _ = writeln!(out, "constraint[{i}]={}", c.constraint);
        match &c.rule {
            Rule::FirstOrder { relation } => {
                let _ = writeln!(out, "rule[{i}]=rule1");
                let _ = writeln!(out, "from[{i}]={relation}");
            }
            Rule::HigherOrder { relation, premise } => {
                let _ = writeln!(out, "rule[{i}]=rule2");
                let _ = writeln!(out, "from[{i}]={relation}");
                let _ = writeln!(out, "premise[{i}]={premise}");
            }
        }
    }
    for (i, (order, k)) in cert.refutation.iter().enumerate() {
        let _ = writeln!(out, "refuted[{i}]={}:{k}", order.join(","));
    }
    match cert.verdict {
        Verdict::CyclicCertified => out.push_str("verdict=cyclic\n"),
        Verdict::DagConsistent => {
            let order = cert.order.as_deref().unwrap_or_default().join(",");
            let _ = write!(out, "verdict=dag\norder={order}\n");
        }
    }
    out
}

pub fn render_violations(violations: &[Violation], machine: bool) -> String {
    let mut out = String::new();
    for (i, v) in violations.iter().enumerate() {
        if machine {
            let witness = v.witness.as_ref().map_or("-".to_string(), |w| w.to_string());
            let _ = writeln!(out, "violation[{i}].relation={}", v.relation);
            let _ = writeln!(out, "violation[{i}].source={}", v.source);
            let _ = writeln!(out, "violation[{i}].kind={}", v.kind.as_str());
            let _ = writeln!(out, "violation[{i}].witness={witness}");
        } else {
            let _ = writeln!(out, "{v}");
        }
    }
    let verdict = if violations.is_empty() { "compatible" } else { "incompatible" };
    if machine {
        let _ = writeln!(out, "verdict={verdict}");
    } else {
        let _ = writeln!(out, "{verdict}");
    }
    out
}

fn render_audit(tuned: &[Triple], violations: &[Triple], machine: bool) -> String {
    let mut out = String::new();
    for (i, t) in tuned.iter().enumerate() {
        if machine {
            let _ = writeln!(out, "fine_tuned[{i}]={t}");
        } else {
            let _ = writeln!(out, "fine-tuned {t}");
        }
    }
    for (i, t) in violations.iter().enumerate() {
        if machine {
            let _ = writeln!(out, "dsep_violation[{i}]={t}");
        } else {
            let _ = writeln!(out, "dsep-violation {t}");
        }
    }
    let _ = writeln!(out, "faithful={}", u8::from(tuned.is_empty()));
    let _ = writeln!(out, "dsep_property={}", u8::from(violations.is_empty()));
    out
}

/// `A=0,C=1:1/2 A=1,C=0:1/2` over the support.
fn inline(dist: &JointDistribution) -> String {
    let names = dist.names();
    let parts: Vec<String> = dist
        .support()
        .map(|(k, p)| {
            let a: Assignment = names.iter().cloned().zip(k.iter().copied()).collect();
            format!("{}:{}", a.render_in(&names), fmt_rational(p))
        })
        .collect();
    parts.join(" ")
}

fn decimal(r: &Rational) -> String {
    format!("{:.5}", r.to_f64().unwrap_or(f64::NAN))
}

pub fn render_protocol(r: &ProtocolReport, machine: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "experiment={} samples={} seed={}", r.experiment, r.samples, r.seed);
    for (i, s) in r.settings.iter().enumerate() {
        let names = s.exact.names();
        let setting = s.setting.render_in(&s.setting.names().map(str::to_string).collect::<Vec<_>>());
        if machine {
            let _ = writeln!(out, "setting[{i}]={setting}");
            let _ = writeln!(out, "tv[{i}]={}", fmt_rational(&s.tv));
            let _ = writeln!(out, "xor_fraction[{i}]={}", fmt_rational(&s.xor_fraction));
        } else {
            let _ = writeln!(
                out,
                "setting do({setting}) tv={} ({}) xor_fraction={}",
                fmt_rational(&s.tv),
                decimal(&s.tv),
                fmt_rational(&s.xor_fraction)
            );
        }
        let keys: BTreeSet<Vec<usize>> =
            s.exact.support().map(|(k, _)| k.to_vec()).chain(s.counts.keys().cloned()).collect();
        for k in keys {
            let a: Assignment = names.iter().cloned().zip(k.iter().copied()).collect();
            let value = a.render_in(&names);
            let count = s.counts.get(&k).copied().unwrap_or(0);
            let exact = fmt_rational(&s.exact.prob(&k));
            if machine {
                let _ = writeln!(out, "count[{i}][{value}]={count}");
                let _ = writeln!(out, "exact[{i}][{value}]={exact}");
            } else {
                let _ = writeln!(out, "  {value} count={count} exact={exact}");
            }
        }
    }
    let _ = writeln!(out, "xor_fraction={}", fmt_rational(&r.xor_fraction));
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompareSetting {
    pub setting: Assignment,
    /// Exact distribution of the recorded nodes, one per model.
    pub distributions: Vec<JointDistribution>,
    /// `(i, j, tv)` for every model pair `i < j`.
    pub tv: Vec<(usize, usize, Rational)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompareReport {
    pub names: Vec<String>,
    pub experiment: Experiment,
    pub settings: Vec<CompareSetting>,
}

impl CompareReport {
    /// Settings where models `i` and `j` differ by at least 1/4 in total
    /// variation.
    pub fn distinguishing(&self, i: usize, j: usize) -> Vec<&CompareSetting> {
        let quarter = Rational::new(1.into(), 4.into());
        self.settings
            .iter()
            .filter(|s| s.tv.iter().any(|(a, b, tv)| (*a, *b) == (i.min(j), i.max(j)) && *tv >= quarter))
            .collect()
    }
}

/// Exact post-intervention distributions of several models side by side,
/// for every setting of the experiment.
pub fn compare_models(models: &[(String, CausalModel)], experiment: Experiment) -> Result<CompareReport, ModelError> {
    let sorted = |m: &CausalModel| {
        let mut v = m.observed_variables();
        v.sort();
        v
    };
    let first = models.first().ok_or(ModelError::EmptySet)?;
    if models.iter().any(|(_, m)| sorted(m) != sorted(&first.1)) {
        return Err(ModelError::MismatchedObservables);
    }
    let (set, record) = experiment.parties();
    if !set.iter().chain(&record).all(|n| first.1.observed_names().contains(n)) {
        return Err(ModelError::ProtocolNodes);
    }
    let alphabets: Vec<usize> = set.iter().map(|n| first.1.alphabet_of(n)).collect();
    let mut settings = Vec::new();
    for values in product(&alphabets) {
        let setting: Assignment = set.iter().cloned().zip(values).collect();
        let distributions = models
            .iter()
            .map(|(_, m)| {
                Ok(post_intervention_distribution(m, &InterventionTarget::fixed(setting.clone()))?.marginal(&record)?)
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        let mut tv = Vec::new();
        for i in 0..models.len() {
            for j in i + 1..models.len() {
                tv.push((i, j, distributions[i].tv_distance(&distributions[j])?));
            }
        }
        settings.push(CompareSetting { setting, distributions, tv });
    }
    Ok(CompareReport { names: models.iter().map(|(n, _)| n.clone()).collect(), experiment, settings })
}

pub fn render_comparison(r: &CompareReport, machine: bool) -> String {
    let quarter = Rational::new(1.into(), 4.into());
    let mut out = String::new();
    let _ = writeln!(out, "experiment={} models={}", r.experiment, r.names.join(","));
    for (i, s) in r.settings.iter().enumerate() {
        let setting = s.setting.render_in(&s.setting.names().map(str::to_string).collect::<Vec<_>>());
        if machine {
            let _ = writeln!(out, "setting[{i}]={setting}");
        } else {
            let _ = writeln!(out, "setting do({setting})");
        }
        for (name, d) in r.names.iter().zip(&s.distributions) {
            if machine {
                let _ = writeln!(out, "dist[{i}][{name}]={}", inline(d));
            } else {
                let _ = writeln!(out, "  {name}: {}", inline(d));
            }
        }
        for (a, b, tv) in &s.tv {
            let flag = u8::from(*tv >= quarter);
            let pair = format!("{},{}", r.names[*a], r.names[*b]);
            if machine {
                let _ = writeln!(out, "tv[{i}][{pair}]={}", fmt_rational(tv));
                let _ = writeln!(out, "distinguishing[{i}][{pair}]={flag}");
            } else {
                let _ = writeln!(out, "  tv[{pair}]={} distinguishing={flag}", fmt_rational(tv));
            }
        }
    }
    out
}
