//! Synthetic chain-with-branches scores and per-unit compute statistics.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use ntscore_core::constraint::{parse_constraint, VarDecl};
use ntscore_core::score::{Arm, ConditionalBranch, Relation, Score, TemporalObject};
use ntscore_core::{compile, ChoicePolicy, CompileError, ControlMessage, Engine};

/// Objects per chain.
const CHAIN: usize = 25;
/// Every `BRANCH_EVERY`-th object of a chain ends in a conditional branch.
const BRANCH_EVERY: usize = 5;
pub const TARGET_MEAN_MS: f64 = 30.0;
/// Wall-clock cap for the whole bench, compile included.
pub const TARGET_TOTAL_MS: f64 = 60_000.0;

/// Deterministic score of `n` objects laid out as parallel chains. Inside a
/// chain, objects follow each other with fixed delays; every fifth object
/// branches on a per-chain variable, either to its successor or, by
/// default, past it.
pub fn synthetic_score(n: usize, seed: u64) -> Score {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Score::default();
    let chains = n.div_ceil(CHAIN);
    let mut horizon = 0u32;
    for c in 0..chains {
        let lo = c * CHAIN;
        let hi = (lo + CHAIN).min(n);
        let sel = format!("sel{c}");
        s.vars.push(VarDecl::new(sel.clone(), 0, 1));
        s.roots.push(format!("o{lo}"));
        let mut span = 0u32;
        for i in lo..hi {
            let id = format!("o{i}");
            let obj = if rng.gen_bool(0.3) {
                let dmin = rng.gen_range(1..=3);
                TemporalObject::flexible(id.clone(), dmin, dmin + rng.gen_range(1..=3))
            } else {
                TemporalObject::fixed(id.clone(), rng.gen_range(1..=4))
            };
            let obj = if rng.gen_bool(0.5) { obj.with_param(0, "level", rng.gen_range(0..128)) } else { obj };
            span += obj.duration.max() as u32 + 3;
            s.objects.push(obj);
            if i + 1 >= hi {
                continue;
            }
            let next = format!("o{}", i + 1);
            if (i - lo) % BRANCH_EVERY == BRANCH_EVERY - 1 && i + 2 < hi {
                s.branches.push(ConditionalBranch {
                    at: id,
                    arms: vec![Arm { condition: parse_constraint(&format!("{sel} = 1")).expect("literal"), successor: next.clone() }],
                    default: Some(format!("o{}", i + 2)),
                });
            } else {
                let d = rng.gen_range(1..=2);
                s.relations.push(Relation::Precedence { from: id, to: next, delay: (d, d) });
            }
        }
        horizon = horizon.max(span);
    }
    s.horizon = horizon;
    s
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchReport {
    pub objects: usize,
    pub units: u32,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub max_ms: f64,
    pub compile_ms: f64,
    pub total_ms: f64,
    pub target_mean_ms: f64,
    pub pass: bool,
    pub messages: usize,
    #[serde(skip)]
    pub trace: Vec<Vec<ControlMessage>>,
}

/// Compiles and runs the synthetic score back to back, timing each unit.
pub fn bench(n: usize, seed: u64) -> Result<BenchReport, CompileError> {
    let begin = Instant::now();
    let s = synthetic_score(n.max(1), seed);
    let cs = Arc::new(compile(&s)?);
    let compile_ms = begin.elapsed().as_secs_f64() * 1e3;
    let mut engine = Engine::new(cs, ChoicePolicy::deterministic(), s.horizon).expect("deterministic policy");
    let mut times = Vec::new();
    let mut trace = Vec::new();
    while !engine.is_complete() {
        let t0 = Instant::now();
        let rec = engine.tick(Vec::new()).expect("synthetic score runs");
        times.push(t0.elapsed().as_secs_f64() * 1e3);
        trace.push(rec.messages);
    }
    let units = times.len() as u32;
    let mean_ms = if times.is_empty() { 0.0 } else { times.iter().sum::<f64>() / times.len() as f64 };
    let mut sorted = times.clone();
    sorted.sort_by(f64::total_cmp);
    let median_ms = match sorted.len() {
        0 => 0.0,
        l if l % 2 == 1 => sorted[l / 2],
        l => (sorted[l / 2 - 1] + sorted[l / 2]) / 2.0,
    };
    let max_ms = sorted.last().copied().unwrap_or(0.0);
    let total_ms = begin.elapsed().as_secs_f64() * 1e3;
    Ok(BenchReport {
        objects: n,
        units,
        mean_ms,
        median_ms,
        max_ms,
        compile_ms,
        total_ms,
        target_mean_ms: TARGET_MEAN_MS,
        pass: mean_ms <= TARGET_MEAN_MS && total_ms <= TARGET_TOTAL_MS,
        messages: trace.iter().map(Vec::len).sum(),
        trace,
    })
}
