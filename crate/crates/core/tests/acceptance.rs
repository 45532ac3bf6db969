//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;

use lightloop_core::certify::{certify_cycle, Verdict};
use lightloop_core::fixtures;
use lightloop_core::graph::iter_mask;
use lightloop_core::harness::compare_models;
use lightloop_core::intervention::{
    affects_given_do, enumerate_affects, observed_distribution, simulate_protocol, AffectsSet, Experiment,
};
use lightloop_core::minkowski::{
    check_embedding, cone_equality_feasible, Embedding, Policy, SpacetimePoint, ViolationKind,
};
use lightloop_core::prob::{product, rational};
use lightloop_core::scm::{
    check_dsep_property, detect_fine_tuning, solve, solve_acyclic, solve_with_splits, Triple,
};
use lightloop_core::{Assignment, CausalModel, JointDistribution, Rational};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn models() -> Vec<(&'static str, CausalModel)> {
    vec![("otp", fixtures::otp().model), ("jam", fixtures::jam().model), ("loop", fixtures::looped().model)]
}

fn xor_table() -> JointDistribution {
    let vars = vec![("A".to_string(), 2), ("B".to_string(), 2), ("C".to_string(), 2)];
    let entries = product(&[2, 2]).map(|v| (vec![v[0], v[0] ^ v[1], v[1]], rational(1, 4)));
    JointDistribution::new(vars, entries).unwrap()
}

fn supp_b_table() -> Check {
    let m = fixtures::looped().model;
    let report = solve(&m).map_err(|e| e.to_string())?;
    let d = &report.distribution;
    let support = [[0, 0, 0, 0], [0, 0, 1, 1], [1, 1, 0, 1], [1, 1, 1, 0]];
    for v in product(&[2, 2, 2, 2]) {
        let event: Assignment = ["Lambda", "A", "B", "C"].iter().map(|s| s.to_string()).zip(v.iter().copied()).collect();
        let want = if support.iter().any(|s| s[..] == v[..]) { rational(1, 4) } else { Rational::zero() };
        let got = d.prob_of(&event).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("P{v:?} = {got}, expected {want}"))?;
    }
    let oracle = solution_set_oracle(&m, &[]).unwrap();
    ensure(oracle.len() == 4 && oracle.values().all(|p| *p == rational(1, 4)), || {
        "solution-set oracle disagrees".into()
    })
}

fn observational_equivalence() -> Check {
    let expected = xor_table();
    for (name, m) in models() {
        let observed = solve(&m).map_err(|e| e.to_string())?.distribution.marginal(&["A", "B", "C"]).unwrap();
        ensure(observed == expected, || format!("{name}: observed marginal differs"))?;
        let via_do = observed_distribution(&m).unwrap().marginal(&["A", "B", "C"]).unwrap();
        ensure(via_do == expected, || format!("{name}: observed_distribution differs"))?;
    }
    Ok(())
}

fn split(s: &str) -> Vec<&str> {
    s.split(',').filter(|p| !p.is_empty()).collect()
}

/// Checks `source -> target` against both the enumerated set and the
/// solution-set oracle.
fn verdict(name: &str, m: &CausalModel, set: &AffectsSet, source: &str, target: &str, want: bool) -> Check {
    let (x, y) = (split(source), split(target));
    let got = set.holds(&x, &y, &[]);
    ensure(got == Some(want), || format!("{name}: {source}->{target} enumerated {got:?}, expected {want}"))?;
    let oracle = affects_oracle(m, &x, &y, &[]);
    ensure(oracle == want, || format!("{name}: {source}->{target} oracle {oracle}, expected {want}"))
}

fn affects_ledger() -> Check {
    let pairwise = [("A", "B"), ("C", "B"), ("B", "A"), ("B", "C"), ("A", "C"), ("C", "A")];
    for (name, m) in models() {
        let set = enumerate_affects(&m, 2).map_err(|e| e.to_string())?;
        for (x, y) in pairwise {
            verdict(name, &m, &set, x, y, false)?;
        }
        let (joint_to_b, b_to_joint) = match name {
            "otp" => (true, false),
            "jam" => (false, true),
            _ => (true, true),
        };
        verdict(name, &m, &set, "A,C", "B", joint_to_b)?;
        verdict(name, &m, &set, "B", "A,C", b_to_joint)?;
    }
    Ok(())
}

fn higher_order() -> Check {
    for (name, m) in models() {
        let want = name != "jam";
        for (x, z) in [("A", "C"), ("C", "A")] {
            let r = affects_given_do(&m, &[x], &["B"], &[z]).map_err(|e| e.to_string())?;
            ensure(r.holds == want, || format!("{name}: {x}->B|do({z}) = {}", r.holds))?;
            let oracle = affects_oracle(&m, &[x], &["B"], &[z]);
            ensure(oracle == want, || format!("{name}: oracle {x}->B|do({z}) = {oracle}"))?;
        }
    }
    Ok(())
}

fn loop_certification() -> Check {
    for (name, m) in models() {
        let set = enumerate_affects(&m, 2).map_err(|e| e.to_string())?;
        let cert = certify_cycle(&set).map_err(|e| e.to_string())?;
        ensure(cert.verify(), || format!("{name}: certificate does not verify"))?;
        if name == "loop" {
            ensure(cert.verdict == Verdict::CyclicCertified, || "loop not certified cyclic".into())?;
            let mut got: Vec<String> = cert.constraints.iter().map(|c| c.constraint.to_string()).collect();
            got.sort();
            ensure(got == ["A->B", "B->A|B->C", "C->B"], || format!("loop constraints {got:?}"))?;
        } else {
            ensure(cert.verdict == Verdict::DagConsistent && cert.order.is_some(), || {
                format!("{name}: expected a DAG witness order")
            })?;
        }
    }
    Ok(())
}

fn embedding(dim: usize, points: [(&str, SpacetimePoint); 3]) -> Embedding {
    Embedding::new(dim, points.into_iter().map(|(n, p)| (n.to_string(), p)).collect()).unwrap()
}

fn embedding_checks() -> Check {
    let a = SpacetimePoint::from_ints(0, &[-1]);
    let c = SpacetimePoint::from_ints(0, &[1]);
    let at = |t: Rational| embedding(1, [("A", a.clone()), ("B", SpacetimePoint::new(t, vec![Rational::zero()])), ("C", c.clone())]);
    let sets: BTreeMap<&str, AffectsSet> =
        models().into_iter().map(|(n, m)| (n, enumerate_affects(&m, 2).unwrap())).collect();
    for policy in [Policy::Conservative, Policy::Reduced] {
        for (name, set) in &sets {
            let v = check_embedding(set, &at(rational(1, 1)), policy).map_err(|e| e.to_string())?;
            ensure(v.is_empty(), || format!("{name} {policy:?}: fixture embedding flagged {v:?}"))?;
        }
        for eps in [rational(1, 10), rational(1, 1000)] {
            for t in [rational(1, 1) + &eps, rational(1, 1) - &eps] {
                let v = check_embedding(&sets["loop"], &at(t.clone()), policy).unwrap();
                ensure(!v.is_empty() && v.iter().all(|x| x.kind != ViolationKind::Undecided), || {
                    format!("loop {policy:?}: B at t={t} not refuted")
                })?;
            }
            let v = check_embedding(&sets["otp"], &at(rational(1, 1) + &eps), policy).unwrap();
            ensure(v.is_empty(), || format!("otp {policy:?}: B at 1+{eps} flagged {v:?}"))?;
        }
    }
    Ok(())
}

fn grid_point(t: Rational, x: Vec<Rational>) -> SpacetimePoint {
    SpacetimePoint::new(t, x)
}

fn steps(lo: i64, hi: i64, den: i64) -> Vec<Rational> {
    (lo..=hi).map(|k| rational(k, den)).collect()
}

/// Every candidate must be refuted with a decided violation.
fn refutes(set: &AffectsSet, dim: usize, a: &SpacetimePoint, b: SpacetimePoint, c: &SpacetimePoint) -> Check {
    let e = embedding(dim, [("A", a.clone()), ("B", b.clone()), ("C", c.clone())]);
    let v = check_embedding(set, &e, Policy::Conservative).map_err(|e| e.to_string())?;
    ensure(!v.is_empty(), || format!("d={dim}: B={b} compatible"))?;
    ensure(v.iter().all(|x| x.kind != ViolationKind::Undecided), || format!("d={dim}: B={b} undecided"))
}

fn dimension_dependence() -> Check {
    let p1 = (SpacetimePoint::from_ints(0, &[-1]), SpacetimePoint::from_ints(0, &[1]));
    let p3 = (SpacetimePoint::from_ints(0, &[-1, 0, 0]), SpacetimePoint::from_ints(0, &[1, 0, 0]));
    ensure(cone_equality_feasible(&p1.0, &p1.1).unwrap(), || "d=1 infeasible".into())?;
    ensure(!cone_equality_feasible(&p3.0, &p3.1).unwrap(), || "d=3 feasible".into())?;

    let set = enumerate_affects(&fixtures::looped().model, 2).unwrap();
    let mut checked = [0usize; 2];

    let (a, c) = (SpacetimePoint::from_ints(0, &[-1, 0]), SpacetimePoint::from_ints(0, &[1, 0]));
    for t in steps(-8, 12, 4) {
        for x in steps(-10, 10, 5) {
            for y in steps(-12, 12, 6) {
                let b = grid_point(t.clone(), vec![x.clone(), y]);
                if b != a && b != c {
                    refutes(&set, 2, &a, b, &c)?;
                    checked[0] += 1;
                }
            }
        }
    }
    let (a, c) = (p3.0, p3.1);
    for t in steps(-4, 6, 2) {
        for x in steps(-9, 9, 4).into_iter().step_by(2) {
            for y in steps(-9, 9, 4).into_iter().step_by(2) {
                for z in steps(-9, 9, 4).into_iter().step_by(2) {
                    let b = grid_point(t.clone(), vec![x.clone(), y.clone(), z]);
                    if b != a && b != c {
                        refutes(&set, 3, &a, b, &c)?;
                        checked[1] += 1;
                    }
                }
            }
        }
    }

    // Distinct A and C in general position, B drawn from a box around them.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let coord = |rng: &mut ChaCha8Rng| rational(rng.gen_range(-16..=16), 8);
    for dim in [2usize, 3] {
        for _ in 0..500 {
            let pt = |rng: &mut ChaCha8Rng| grid_point(coord(rng), (0..dim).map(|_| coord(rng)).collect());
            let (a, b, c) = (pt(&mut rng), pt(&mut rng), pt(&mut rng));
            if a == c || b == a || b == c {
                continue;
            }
            refutes(&set, dim, &a, b, &c)?;
            checked[dim - 2] += 1;
        }
    }
    ensure(checked.iter().all(|&n| n >= 10_000), || format!("only {checked:?} candidates"))
}

fn oracle_equivalences() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..200 {
        let n = 2 + i % 5;
        let density = 0.05 + 0.9 * (i as f64) / 199.0;
        let edges = random_edges(&mut rng, n, density);
        let g = build_graph(n, &edges);
        let acyclic = is_acyclic(n, &edges);
        let mut queries: Vec<(Vec<usize>, Vec<usize>, Vec<usize>)> = Vec::new();
        for x in 0..n {
            for y in x + 1..n {
                let rest = ((1u64 << n) - 1) & !(1 << x) & !(1 << y);
                for z in 0..1u64 << n {
                    if z & !rest == 0 {
                        queries.push((vec![x], vec![y], iter_mask(z).collect()));
                    }
                }
            }
        }
        for _ in 0..20 {
            let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let pick = |k: u8| (0..n).filter(|&v| labels[v] == k).collect::<Vec<_>>();
            let (x, y, z) = (pick(0), pick(1), pick(2));
            if !x.is_empty() && !y.is_empty() {
                queries.push((x, y, z));
            }
        }
        for (x, y, z) in queries {
            let got = g.d_separated_masks(mask(&x), mask(&y), mask(&z)).map_err(|e| e.to_string())?;
            let want = dsep_paths(n, &edges, &x, &y, &z);
            ensure(got == want, || format!("graph {edges:?}: {x:?} _|_ {y:?} | {z:?} got {got}"))?;
            if acyclic {
                ensure(want == dsep_moral(n, &edges, &x, &y, &z), || format!("moral oracle disagrees on {edges:?}"))?;
            }
            if z.is_empty() {
                ensure(want == dsep_no_common_ancestor(n, &edges, &x, &y), || {
                    format!("ancestor oracle disagrees on {edges:?}")
                })?;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let rm = RandomModel::generate(&mut rng, 5, 3);
        let m = rm.to_model();
        let got = solve_acyclic(&m).map_err(|e| e.to_string())?.distribution;
        let want = rm.oracle();
        for v in product(&rm.alphabets) {
            let w = want.get(&v).cloned().unwrap_or_else(Rational::zero);
            ensure(got.prob(&v) == w, || format!("model {rm:?}: P{v:?} = {}, oracle {w}", got.prob(&v)))?;
        }
    }

    let m = fixtures::looped().model;
    let by_b = solve_with_splits(&m, &["B"]).map_err(|e| e.to_string())?;
    let by_c = solve_with_splits(&m, &["C"]).map_err(|e| e.to_string())?;
    ensure(by_b.distribution == by_c.distribution, || "splitting B and C disagree".into())
}

fn triple(x: &str, y: &str) -> Triple {
    Triple { x: vec![x.into()], y: vec![y.into()], z: vec![] }
}

fn fine_tuning_audit() -> Check {
    for (name, m) in models() {
        let p = observed_distribution(&m).unwrap();
        let dsep = check_dsep_property(m.graph(), &p).map_err(|e| e.to_string())?;
        ensure(dsep.is_empty(), || format!("{name}: d-separation violations {dsep:?}"))?;
        let flagged = detect_fine_tuning(m.graph(), &p).map_err(|e| e.to_string())?;
        let required: &[Triple] = match name {
            "jam" => &[triple("B", "C")],
            "loop" => &[triple("A", "B"), triple("B", "C")],
            _ => &[],
        };
        for t in required {
            ensure(flagged.contains(t), || format!("{name}: {t} not flagged"))?;
        }
        for t in &flagged {
            let ind = p.is_independent(&t.x, &t.y, &t.z).unwrap();
            let dsep = m.graph().d_separated(&t.x, &t.y, &t.z).unwrap();
            ensure(ind && !dsep, || format!("{name}: {t} is not a fine-tuned triple"))?;
        }
    }
    Ok(())
}

fn simulation() -> Check {
    let bound = rational(1, 50);
    for (name, m) in models() {
        for exp in [Experiment::E1, Experiment::E2] {
            let report = simulate_protocol(&m, exp, 100_000, 17).map_err(|e| e.to_string())?;
            for s in &report.settings {
                ensure(s.tv < bound, || format!("{name} {exp}: tv {} at {:?}", s.tv, s.setting))?;
            }
        }
    }
    let named: Vec<(String, CausalModel)> = models().into_iter().map(|(n, m)| (n.to_string(), m)).collect();
    let half = rational(1, 2);
    // (experiment, distinguished pair, indistinguishable pair) over otp=0, jam=1, loop=2.
    for (exp, (i, j), (k, l)) in [(Experiment::E1, (1, 2), (0, 2)), (Experiment::E2, (0, 2), (1, 2))] {
        let report = compare_models(&named, exp).map_err(|e| e.to_string())?;
        let flagged = report.distinguishing(i, j);
        ensure(flagged.len() == report.settings.len(), || format!("{exp}: not every setting distinguishes"))?;
        for s in flagged {
            let tv = s.distributions[i].tv_distance(&s.distributions[j]).unwrap();
            ensure(tv == half, || format!("{exp}: tv {tv} at {:?}", s.setting))?;
        }
        ensure(report.distinguishing(k, l).is_empty(), || format!("{exp}: unexpected distinction"))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("loop table reproduction", supp_b_table),
        ("observational equivalence", observational_equivalence),
        ("affects ledger", affects_ledger),
        ("higher-order relations", higher_order),
        ("loop certification", loop_certification),
        ("embedding checks in 1+1", embedding_checks),
        ("dimension dependence", dimension_dependence),
        ("oracle equivalences", oracle_equivalences),
        ("fine-tuning audit", fine_tuning_audit),
        ("simulation", simulation),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        match check() {
            Ok(()) => println!("criterion {:>2} {name}: PASS ({:.1?})", i + 1, start.elapsed()),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL {msg}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
