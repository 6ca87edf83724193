//! Property checks shared by the integration tests and the acceptance
//! target. Each returns a one-line summary or the first counterexample.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use ntscore_core::compile::CompiledScore;
use ntscore_core::constraint::{Assignment, Constraint, LinExpr, Rel, Store, VarDecl, VarTable};
use ntscore_core::engine::{entailed_signals, Event};
use ntscore_core::ntcc::{
    ChoicePolicy, Chooser, DefTable, Fired, FirstChoice, Machine, Process, RandomChoice, ScriptedChoice, StepResult,
};
use ntscore_core::verify::{check, explore_all, replay, CheckOptions, EnvSpec, Formula, Mode, Outcome, Property};
use ntscore_core::{compile, oracle_simulate, Engine};

use super::corpus::{corpus, Case};

pub type Check = Result<String, String>;

fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(
    name: &str,
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases).run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

// ---- compiler against oracle -----------------------------------------------

fn render_messages(units: &[Vec<String>]) -> String {
    units.iter().enumerate().map(|(t, ms)| format!("{t}: {}\n", ms.join(", "))).collect()
}

/// Message traces of compiled runs against the direct simulator, byte for
/// byte, and the first failing unit.
pub fn corpus_equivalence() -> Check {
    let (mut scores, mut compared) = (0, 0);
    for case in corpus() {
        let cs = Arc::new(compile(&case.score).map_err(|e| format!("{}: {e}", case.name))?);
        for script in &case.scripts {
            let oracle = oracle_simulate(&case.score, script).map_err(|e| format!("{}: {e}", case.name))?;
            let mut e = Engine::new(cs.clone(), ChoicePolicy::deterministic(), case.score.horizon).unwrap();
            let recs = e.run_script(script).map_err(|e| format!("{}: {e}", case.name))?;
            let n = oracle.units.len();
            let want = render_messages(
                &oracle.units.iter().map(|ms| ms.iter().map(|m| m.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
            );
            let got = render_messages(
                &recs[..n].iter().map(|r| r.messages.iter().map(|m| m.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
            );
            if got != want {
                return Err(format!("{} {script:?}:\n--- oracle\n{want}--- compiled\n{got}", case.name));
            }
            let first_failure = recs.iter().position(|r| r.failure).map(|t| t as u32);
            if first_failure != oracle.failure {
                return Err(format!("{} {script:?}: failure at {first_failure:?}, oracle {:?}", case.name, oracle.failure));
            }
            compared += 1;
        }
        scores += 1;
    }
    Ok(format!("{scores} scores, {compared} scripted runs identical"))
}

// ---- constraint store ------------------------------------------------------

const NAMES: [&str; 4] = ["a", "b", "c", "d"];

fn rel() -> impl Strategy<Value = Rel> {
    prop_oneof![Just(Rel::Eq), Just(Rel::Ne), Just(Rel::Lt), Just(Rel::Le)]
}

fn lin_atom(n: usize) -> impl Strategy<Value = Constraint> {
    (proptest::collection::vec((-3i64..=3, 0..n), 1..=3), -6i64..=6, rel()).prop_map(|(terms, k, rel)| {
        Constraint::atom(LinExpr::from_terms(terms.into_iter().map(|(c, i)| (c, NAMES[i])), k), rel)
    })
}

fn constraint(n: usize) -> impl Strategy<Value = Constraint> {
    let leaf = prop_oneof![8 => lin_atom(n), 1 => Just(Constraint::True), 1 => Just(Constraint::False)];
    leaf.prop_recursive(2, 8, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Constraint::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Constraint::or(a, b)),
            inner.prop_map(|c| c.negate()),
        ]
    })
}

#[derive(Clone, Debug)]
struct StoreCase {
    decls: Vec<VarDecl>,
    told: Vec<Constraint>,
    query: Constraint,
    extra: Constraint,
}

fn store_case() -> impl Strategy<Value = StoreCase> {
    (1usize..=4).prop_flat_map(|n| {
        (
            proptest::collection::vec((-3i64..=2, 1i64..=8), n),
            proptest::collection::vec(constraint(n), 0..4),
            constraint(n),
            constraint(n),
        )
            .prop_map(|(doms, told, query, extra)| StoreCase {
                decls: doms.into_iter().enumerate().map(|(i, (lo, size))| VarDecl::new(NAMES[i], lo, lo + size - 1)).collect(),
                told,
                query,
                extra,
            })
    })
}

fn build(decls: &[VarDecl], told: &[Constraint]) -> Store {
    let mut s = Store::new(decls.iter().cloned()).unwrap();
    for c in told {
        s.tell(c.clone()).unwrap();
    }
    s
}

fn holds(c: &Constraint, a: &Assignment) -> bool {
    c.eval(&|v| a.get(v).copied()).expect("ground under a full assignment")
}

fn oracle_entails(sols: &[Assignment], c: &Constraint) -> bool {
    sols.iter().all(|a| holds(c, a))
}

pub const STORE_CASES: u32 = 1000;

/// Entailment, satisfiability and bounds against brute-force enumeration,
/// plus monotonicity, negation coherence and idempotence.
pub fn store_oracle() -> Check {
    run("entailment oracle", STORE_CASES, store_case(), |sc| {
        let s = build(&sc.decls, &sc.told);
        let sols = s.solutions().unwrap();
        prop_assert_eq!(s.sat(), !sols.is_empty(), "sat");
        prop_assert_eq!(s.entails(&sc.query).unwrap(), oracle_entails(&sols, &sc.query), "entails {}", sc.query);
        for d in &sc.decls {
            let (lo, hi) = s.bounds(&d.name).unwrap();
            for a in &sols {
                prop_assert!(lo <= a[&d.name] && a[&d.name] <= hi, "bounds of {} cut a solution", d.name);
            }
        }
        Ok(())
    })?;
    run("monotonicity", STORE_CASES, store_case(), |sc| {
        let s = build(&sc.decls, &sc.told);
        if s.entails(&sc.query).unwrap() {
            let mut t = s.clone();
            t.tell(sc.extra.clone()).unwrap();
            prop_assert!(t.entails(&sc.query).unwrap(), "lost {} after {}", sc.query, sc.extra);
        }
        Ok(())
    })?;
    run("negation and idempotence", STORE_CASES, store_case(), |sc| {
        let s = build(&sc.decls, &sc.told);
        let pos = s.entails(&sc.query).unwrap();
        let neg = s.entails(&sc.query.negate()).unwrap();
        prop_assert!(!(pos && neg) || !s.sat(), "both {} and its negation", sc.query);
        prop_assert_eq!(pos, !s.clone().with(sc.query.negate()).unwrap().sat());

        let sols = s.solutions().unwrap();
        let mut t = s.clone();
        t.tell(Constraint::True).unwrap();
        prop_assert_eq!(&t.solutions().unwrap(), &sols, "tell(true)");

        let mut once = s.clone();
        once.tell(sc.query.clone()).unwrap();
        let mut twice = once.clone();
        twice.tell(sc.query.clone()).unwrap();
        prop_assert_eq!(once.solutions().unwrap(), twice.solutions().unwrap(), "idempotence");
        prop_assert!(once.entails(&sc.query).unwrap());
        Ok(())
    })?;
    Ok(format!("{} cases x 3 properties, up to 4 vars with domains up to 8", STORE_CASES))
}

// ---- process calculus ------------------------------------------------------

const XS: [&str; 4] = ["x0", "x1", "x2", "x3"];

fn ntcc_env() -> Arc<VarTable> {
    Arc::new(VarTable::new(XS.iter().map(|n| VarDecl::new(*n, 0, 3))).unwrap())
}

fn small_atom() -> impl Strategy<Value = Constraint> {
    (0..4usize, 0i64..=3, rel()).prop_map(|(i, v, rel)| Constraint::atom(LinExpr::var(XS[i]).add_constant(-v), rel))
}

fn guard() -> impl Strategy<Value = Constraint> {
    prop_oneof![
        3 => small_atom(),
        1 => (small_atom(), small_atom()).prop_map(|(a, b)| Constraint::and(a, b)),
        1 => (small_atom(), small_atom()).prop_map(|(a, b)| Constraint::or(a, b)),
    ]
}

fn tells() -> impl Strategy<Value = Process> {
    proptest::collection::vec(small_atom(), 0..3).prop_map(|cs| Process::par(cs.into_iter().map(Process::tell)))
}

fn process(with_sum: bool) -> BoxedStrategy<Process> {
    let leaf = prop_oneof![4 => small_atom().prop_map(Process::tell), 1 => Just(Process::Skip)];
    leaf.prop_recursive(3, 16, 3, move |inner| {
        let mut arms = vec![
            (guard(), inner.clone()).prop_map(|(g, p)| Process::when(g, p)).boxed(),
            inner.clone().prop_map(Process::next).boxed(),
            (guard(), inner.clone()).prop_map(|(g, p)| Process::unless(g, p)).boxed(),
            proptest::collection::vec(inner.clone(), 2..4).prop_map(Process::par).boxed(),
        ];
        if with_sum {
            arms.push(proptest::collection::vec((guard(), inner), 2..4).prop_map(Process::sum).boxed());
        }
        proptest::strategy::Union::new(arms)
    })
    .boxed()
}

fn inputs(n: usize) -> impl Strategy<Value = Vec<Constraint>> {
    proptest::collection::vec(prop_oneof![2 => Just(Constraint::True), 1 => small_atom()], n)
}

fn outputs(rs: &[StepResult]) -> Vec<Vec<Assignment>> {
    rs.iter().map(|r| r.output.solutions().unwrap()).collect()
}

fn machine(defs: &DefTable) -> Machine<'_> {
    Machine::new(defs, ntcc_env())
}

pub const NTCC_CASES: u32 = 250;

/// Algebraic laws of the interpreter on random processes.
pub fn ntcc_laws() -> Check {
    let defs = DefTable::new();
    let units = 4;

    run("replication unfolds", NTCC_CASES, (process(false), inputs(units)), |(p, ins)| {
        let m = machine(&defs);
        let bang = m.run(Process::bang(p.clone()), &ins, &mut FirstChoice).unwrap();
        let unfolded = m.run(Process::par([p.clone(), Process::next(Process::bang(p))]), &ins, &mut FirstChoice).unwrap();
        prop_assert_eq!(outputs(&bang), outputs(&unfolded));
        Ok(())
    })?;

    run("next delays by one unit each", NTCC_CASES, (process(true), 0u32..4), |(p, d)| {
        let m = machine(&defs);
        let n = d as usize + 2;
        let trivial = vec![Constraint::True; n];
        let delayed = m.run(Process::next_n(d, p.clone()), &trivial, &mut FirstChoice).unwrap();
        let direct = m.run(p, &trivial[..2], &mut FirstChoice).unwrap();
        let full = Store::with_table(ntcc_env()).solutions().unwrap();
        for r in &delayed[..d as usize] {
            prop_assert_eq!(&r.output.solutions().unwrap(), &full);
        }
        prop_assert_eq!(outputs(&delayed[d as usize..]), outputs(&direct));
        Ok(())
    })?;

    run("unless is exclusive", NTCC_CASES, (tells(), guard(), process(true), small_atom()), |(q, g, p, input)| {
        let m = machine(&defs);
        let r = m.step(Process::par([q, Process::unless(g.clone(), p.clone())]), &input, &mut FirstChoice).unwrap();
        let cancelled = r.output.entails(&g).unwrap();
        prop_assert_eq!(r.fired.contains(&Fired::Unless), cancelled);
        prop_assert_eq!(r.residual, if cancelled { Process::Skip } else { p });
        Ok(())
    })?;

    let arms = proptest::collection::vec((guard(), process(false)), 1..4);
    run("sums are sound and blocked sums are discarded", NTCC_CASES, (tells(), arms, small_atom()), |(q, arms, input)| {
        let m = machine(&defs);
        let guards: Vec<Constraint> = arms.iter().map(|(g, _)| g.clone()).collect();
        let r = m.step(Process::par([q.clone(), Process::sum(arms)]), &input, &mut FirstChoice).unwrap();
        let alone = m.step(q, &input, &mut FirstChoice).unwrap();
        match r.fired.iter().find_map(|f| match f { Fired::Sum { branch, .. } => Some(*branch), _ => None }) {
            Some(b) => {
                prop_assert!(alone.output.entails(&guards[b as usize]).unwrap(), "fired a branch whose guard was not entailed");
            }
            None => {
                for g in &guards {
                    prop_assert!(!alone.output.entails(g).unwrap(), "{} entailed but nothing fired", g);
                }
                prop_assert_eq!(&r.residual, &Process::Skip);
                prop_assert_eq!(r.output.solutions().unwrap(), alone.output.solutions().unwrap());
            }
        }
        Ok(())
    })?;

    run("star with a scripted delay is next^d", NTCC_CASES, (process(false), 0u32..3, 0u32..3), |(p, bound, d)| {
        let d = d.min(bound);
        let mut m = machine(&defs);
        m.star_bound = bound;
        let trivial = vec![Constraint::True; bound as usize + 2];
        let star = m.run(Process::star(p.clone()), &trivial, &mut ScriptedChoice::new(vec![d as usize])).unwrap();
        let next = m.run(Process::next_n(d, p), &trivial, &mut FirstChoice).unwrap();
        prop_assert_eq!(outputs(&star), outputs(&next));
        if bound > 0 {
            prop_assert_eq!(&star[0].fired[0], &Fired::Star { delay: d, of: bound + 1 });
        }
        Ok(())
    })?;

    run("runs are byte-identical", NTCC_CASES, (process(true), inputs(units), any::<u64>()), |(p, ins, seed)| {
        let m = machine(&defs);
        let canon = |chooser: &mut dyn Chooser| -> Vec<String> {
            m.run(p.clone(), &ins, chooser).unwrap().iter().map(StepResult::canonical).collect()
        };
        prop_assert_eq!(canon(&mut FirstChoice), canon(&mut FirstChoice));
        prop_assert_eq!(canon(&mut RandomChoice::new(seed)), canon(&mut RandomChoice::new(seed)));
        Ok(())
    })?;

    Ok(format!("{} cases x 6 laws", NTCC_CASES))
}

// ---- verifier --------------------------------------------------------------

/// Verifier inputs for a corpus case with a horizon small enough to
/// enumerate.
pub struct Small {
    pub name: &'static str,
    pub cs: Arc<CompiledScore>,
    pub env: EnvSpec,
    pub horizon: u32,
}

fn input_sets(free: &[String], ranges: &BTreeMap<String, Vec<i64>>) -> Vec<Vec<Event>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << free.len()) {
        let mut sets: Vec<Vec<Event>> =
            vec![free.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, s)| Event::Signal(s.clone())).collect()];
        for (var, values) in ranges {
            let mut next = Vec::new();
            for s in &sets {
                next.push(s.clone());
                for v in values {
                    let mut s = s.clone();
                    s.push(Event::Assign(var.clone(), *v));
                    next.push(s);
                }
            }
            sets = next;
        }
        out.extend(sets);
    }
    out
}

pub fn small_cases() -> Vec<Small> {
    let mut out = Vec::new();
    for case in corpus() {
        if case.score.objects.len() > 3 || case.free.len() > 2 {
            continue;
        }
        let width = input_sets(&case.free, &case.var_ranges).len() as u64;
        let mut horizon = case.score.horizon.min(8);
        if horizon < 4 {
            continue;
        }
        while horizon > 3 && width.pow(horizon) > 1024 {
            horizon -= 1;
        }
        out.push(small(&case, horizon));
    }
    out
}

fn small(case: &Case, horizon: u32) -> Small {
    Small {
        name: case.name,
        cs: Arc::new(compile(&case.score).unwrap()),
        env: EnvSpec { free_events: case.free.clone(), scripted: Vec::new(), var_ranges: case.var_ranges.clone() },
        horizon,
    }
}

/// Picks made after a store fails do not change what is observed, so they
/// are left out for failed units.
fn render_unit(t: u32, inputs: &[Event], choices: &[usize], signals: &[String], failure: bool) -> String {
    let mut ins: Vec<String> = inputs.iter().map(|e| e.to_string()).collect();
    ins.sort();
    if failure {
        format!("{t}[{}]!", ins.join(" "))
    } else {
        format!("{t}[{}]{choices:?}{{{}}}", ins.join(" "), signals.join(" "))
    }
}

/// Every run, found by re-running each unit from scratch with an odometer
/// over scripted choices.
fn brute_force(s: &Small) -> BTreeSet<String> {
    let machine = Machine::new(&s.cs.defs, s.cs.env.clone());
    let sets = input_sets(&s.env.free_events, &s.env.var_ranges);
    let mut out: Vec<String> = Vec::new();
    let mut stack = vec![(0u32, s.cs.entry.clone(), String::new())];
    while let Some((t, p, prefix)) = stack.pop() {
        if t == s.horizon {
            out.push(prefix);
            continue;
        }
        for ins in &sets {
            let input = Constraint::all(ins.iter().map(Event::constraint));
            let mut picks: Vec<usize> = Vec::new();
            loop {
                let r = machine.step(p.clone(), &input, &mut ScriptedChoice::new(picks.clone())).unwrap();
                let seq: Vec<(usize, usize)> = r
                    .fired
                    .iter()
                    .filter_map(|f| match *f {
                        Fired::Sum { pick, of, .. } if of > 1 => Some((pick as usize, of as usize)),
                        Fired::Star { delay, of } if of > 1 => Some((delay as usize, of as usize)),
                        _ => None,
                    })
                    .collect();
                let choices: Vec<usize> = seq.iter().map(|c| c.0).collect();
                let signals = entailed_signals(&s.cs, &r.output).unwrap();
                let failed = !r.output.is_consistent();
                let unit = render_unit(t, ins, &choices, &signals, failed);
                let next = if failed { Process::tell(Constraint::False) } else { r.residual };
                stack.push((t + 1, next, format!("{prefix}{unit};")));
                match seq.iter().rposition(|(pick, of)| pick + 1 < *of) {
                    Some(i) => {
                        picks = choices[..i].to_vec();
                        picks.push(choices[i] + 1);
                    }
                    None => break,
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Properties over the first start and end signals of a small case.
pub fn property_corpus(s: &Small) -> Vec<Formula> {
    let sigs: Vec<&str> = s.cs.signals().filter(|n| n.starts_with("start_") || n.starts_with("end_")).collect();
    let atom = |i: usize| {
        let name = sigs.get(i).or(sigs.first()).copied().unwrap_or("__none");
        if name == "__none" {
            Formula::atom(Constraint::True)
        } else {
            Formula::atom(Constraint::eq(name, 1))
        }
    };
    let (p, q) = (atom(0), atom(sigs.len().saturating_sub(1)));
    let h = s.horizon;
    vec![
        Formula::eventually(h, p.clone()),
        Formula::always(h, Formula::not(Formula::and(p.clone(), q.clone()))),
        Formula::always(h - 3, Formula::implies(p.clone(), Formula::eventually(3, q.clone()))),
        Formula::until(h, Formula::not(q.clone()), p.clone()),
        Formula::next(p.clone()),
        Formula::or(Formula::eventually(h / 2, q.clone()), Formula::always(h / 2, Formula::not(p))),
        Formula::next_n(2, Formula::eventually(h - 2, q)),
    ]
}

/// `explore_all` against the brute-force enumerator; for-all/exists
/// verdicts against direct evaluation on every explored run; duality,
/// memo transparency and evidence replay.
pub fn verifier() -> Check {
    let (mut cases, mut runs, mut props) = (0, 0, 0);
    for s in small_cases() {
        let explored = explore_all(&s.cs, &s.env, s.horizon, CheckOptions::default()).map_err(|e| format!("{}: {e}", s.name))?;
        let got: BTreeSet<String> = explored
            .iter()
            .map(|r| r.units.iter().map(|u| render_unit(u.tu, &u.inputs, &u.choices, &u.signals, u.failure) + ";").collect())
            .collect();
        let want = brute_force(&s);
        if got != want {
            return Err(format!("{}: explorer found {} runs, brute force {}", s.name, got.len(), want.len()));
        }
        cases += 1;
        runs += explored.len();

        for f in property_corpus(&s) {
            let truth: Vec<bool> = explored.iter().map(|r| f.holds_at(&r.stores, 0).unwrap()).collect();
            let for_all = Property { mode: Mode::ForAllRuns, formula: f.clone() };
            let exists = Property { mode: Mode::ExistsRun, formula: f.clone() };
            let exists_not = Property { mode: Mode::ExistsRun, formula: Formula::not(f.clone()) };
            let a = check(&s.cs, &for_all, &s.env, s.horizon, CheckOptions::default()).map_err(|e| e.to_string())?;
            let e = check(&s.cs, &exists, &s.env, s.horizon, CheckOptions::default()).map_err(|e| e.to_string())?;
            let en = check(&s.cs, &exists_not, &s.env, s.horizon, CheckOptions::default()).map_err(|e| e.to_string())?;
            let fail = |what: &str| Err(format!("{}: {what} for {f}", s.name));
            if (a.result == Outcome::Verified) != truth.iter().all(|t| *t) {
                return fail("for-all disagrees with enumeration");
            }
            if (e.result == Outcome::Verified) != truth.iter().any(|t| *t) {
                return fail("exists disagrees with enumeration");
            }
            if (a.result == Outcome::Verified) != (en.result == Outcome::Refuted) || a.evidence != en.evidence {
                return fail("duality");
            }
            let off = CheckOptions { memo: false, ..CheckOptions::default() };
            let a2 = check(&s.cs, &for_all, &s.env, s.horizon, off).map_err(|e| e.to_string())?;
            if a2.result != a.result || a2.evidence != a.evidence {
                return fail("memo changes the verdict");
            }
            for ev in [&a.evidence, &e.evidence].into_iter().flatten() {
                if !replay(&s.cs, ev).map_err(|e| e.to_string())? {
                    return fail("evidence does not replay");
                }
            }
            props += 1;
        }
    }
    Ok(format!("{cases} scores, {runs} runs enumerated, {props} properties cross-checked"))
}

// ---- runtime determinism ---------------------------------------------------

/// Same score and script give identical records; seeded choices repeat;
/// recorded picks replay through a fresh engine.
pub fn determinism() -> Check {
    let mut runs = 0;
    for case in corpus() {
        let cs = Arc::new(compile(&case.score).unwrap());
        for script in &case.scripts {
            for policy in [ChoicePolicy::deterministic(), ChoicePolicy::seeded(7), ChoicePolicy::seeded(8)] {
                let go = || Engine::new(cs.clone(), policy, case.score.horizon).unwrap().run_script(script).unwrap();
                let first = go();
                if first != go() {
                    return Err(format!("{}: two runs differ under {policy:?}", case.name));
                }
                let mut e = Engine::new(cs.clone(), ChoicePolicy::deterministic(), case.score.horizon).unwrap();
                for rec in &first {
                    let again = e.tick_with(rec.inputs.clone(), &mut ScriptedChoice::new(rec.choices.clone())).unwrap();
                    if &again != rec {
                        return Err(format!("{}: unit {} does not replay", case.name, rec.tu));
                    }
                }
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} runs repeated and replayed"))
}
