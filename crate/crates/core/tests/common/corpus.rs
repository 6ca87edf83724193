//! Scenario corpus shared by the integration and acceptance tests.

#![allow(dead_code, clippy::vec_init_then_push)]

use std::collections::BTreeMap;

use ntscore_core::constraint::{parse_constraint, VarDecl};
use ntscore_core::engine::Event;
use ntscore_core::score::{
    Arm, Binding, ConditionalBranch, ControlMessage, DurRel, InteractionPoint, Relation, Score, TemporalObject, Tu,
};

pub struct Case {
    pub name: &'static str,
    pub score: Score,
    pub scripts: Vec<Vec<(Tu, Event)>>,
    /// Point signals the verifier may toggle freely.
    pub free: Vec<String>,
    pub var_ranges: BTreeMap<String, Vec<i64>>,
}

fn sig(t: Tu, name: &str) -> (Tu, Event) {
    (t, Event::Signal(name.into()))
}

fn set(t: Tu, var: &str, v: i64) -> (Tu, Event) {
    (t, Event::Assign(var.into(), v))
}

fn prec(from: &str, to: &str, lo: Tu, hi: Tu) -> Relation {
    Relation::Precedence { from: from.into(), to: to.into(), delay: (lo, hi) }
}

fn point(id: &str, binds: Binding, window: (Tu, Tu)) -> InteractionPoint {
    InteractionPoint { id: id.into(), binds, window }
}

fn roots(ids: &[&str]) -> Vec<String> {
    ids.iter().map(|s| s.to_string()).collect()
}

fn case(name: &'static str, score: Score, scripts: Vec<Vec<(Tu, Event)>>) -> Case {
    let free = score.points.iter().map(|p| format!("ev_{}", p.id)).collect();
    Case { name, score, scripts, free, var_ranges: BTreeMap::new() }
}

pub fn corpus() -> Vec<Case> {
    let mut out = Vec::new();

    out.push(case("empty", Score::empty(4), vec![vec![]]));

    out.push(case(
        "single-fixed",
        Score { objects: vec![TemporalObject::fixed("A", 3)], roots: roots(&["A"]), horizon: 6, ..Score::default() },
        vec![vec![]],
    ));

    out.push(case(
        "single-flexible",
        Score { objects: vec![TemporalObject::flexible("A", 2, 4)], roots: roots(&["A"]), horizon: 6, ..Score::default() },
        vec![vec![]],
    ));

    out.push(case(
        "chain",
        Score {
            objects: vec![TemporalObject::fixed("A", 2), TemporalObject::fixed("B", 1), TemporalObject::fixed("C", 2)],
            relations: vec![prec("A", "B", 1, 1), prec("B", "C", 2, 2)],
            roots: roots(&["A"]),
            horizon: 8,
            ..Score::default()
        },
        vec![vec![]],
    ));

    out.push(case(
        "flexible-delay",
        Score {
            objects: vec![TemporalObject::fixed("A", 1), TemporalObject::fixed("B", 2)],
            relations: vec![prec("A", "B", 1, 3)],
            roots: roots(&["A"]),
            horizon: 7,
            ..Score::default()
        },
        vec![vec![]],
    ));

    out.push(case(
        "delay-point",
        Score {
            objects: vec![TemporalObject::fixed("A", 2), TemporalObject::fixed("B", 1)],
            relations: vec![prec("A", "B", 1, 3)],
            points: vec![point("p", Binding::DelayOf { from: "A".into(), to: "B".into() }, (0, 2))],
            roots: roots(&["A"]),
            horizon: 8,
            ..Score::default()
        },
        vec![vec![], vec![sig(1, "ev_p")], vec![sig(2, "ev_p")], vec![sig(0, "ev_p"), sig(3, "ev_p")], vec![sig(7, "ev_p")]],
    ));

    out.push(case(
        "simultaneous",
        Score {
            objects: vec![TemporalObject::fixed("A", 2), TemporalObject::fixed("B", 3), TemporalObject::fixed("C", 1)],
            relations: vec![Relation::SimultaneousStart { a: "B".into(), b: "C".into() }, prec("A", "B", 2, 2)],
            roots: roots(&["A"]),
            horizon: 8,
            ..Score::default()
        },
        vec![vec![]],
    ));

    out.push(case(
        "duration-eq",
        Score {
            objects: vec![TemporalObject::flexible("A", 2, 5), TemporalObject::fixed("B", 3)],
            relations: vec![Relation::DurationRel { a: "A".into(), rel: DurRel::Eq, b: "B".into(), offset: 0 }],
            roots: roots(&["A", "B"]),
            horizon: 6,
            ..Score::default()
        },
        vec![vec![]],
    ));

    out.push(case(
        "duration-le-offset",
        Score {
            objects: vec![TemporalObject::flexible("A", 1, 4), TemporalObject::flexible("B", 3, 5)],
            relations: vec![
                Relation::DurationRel { a: "B".into(), rel: DurRel::Le, b: "A".into(), offset: 1 },
                prec("A", "B", 1, 1),
            ],
            roots: roots(&["A"]),
            horizon: 10,
            ..Score::default()
        },
        vec![vec![]],
    ));

    out.push(case(
        "duration-point",
        Score {
            objects: vec![TemporalObject::flexible("A", 2, 6), TemporalObject::fixed("B", 1)],
            relations: vec![prec("A", "B", 1, 1)],
            points: vec![point("q", Binding::DurationOf("A".into()), (0, 4))],
            roots: roots(&["A"]),
            horizon: 10,
            ..Score::default()
        },
        vec![vec![], vec![sig(0, "ev_q")], vec![sig(1, "ev_q")], vec![sig(3, "ev_q")], vec![sig(5, "ev_q")]],
    ));

    out.push(case(
        "start-point",
        Score {
            objects: vec![TemporalObject::fixed("A", 2)],
            points: vec![point("s", Binding::StartOf("A".into()), (1, 4))],
            roots: roots(&["A"]),
            horizon: 8,
            ..Score::default()
        },
        vec![vec![], vec![sig(0, "ev_s")], vec![sig(1, "ev_s")], vec![sig(2, "ev_s"), sig(3, "ev_s")]],
    ));

    let mut a = TemporalObject::fixed("A", 3).with_param(0, "gain", 3).with_param(2, "gain", 9).with_param(1, "pan", -2);
    a.start_msg = Some(ControlMessage::param("A", "play", 1));
    a.end_msg = Some(ControlMessage::param("A", "play", 0));
    out.push(case(
        "params-and-messages",
        Score {
            objects: vec![a, TemporalObject::flexible("B", 2, 3).with_param(1, "gain", 5)],
            relations: vec![prec("A", "B", 1, 1)],
            roots: roots(&["A"]),
            horizon: 8,
            ..Score::default()
        },
        vec![vec![]],
    ));

    let mut c = case(
        "branch",
        Score {
            vars: vec![VarDecl::new("k", 0, 2)],
            objects: vec![TemporalObject::fixed("A", 2), TemporalObject::fixed("B", 1), TemporalObject::fixed("C", 1), TemporalObject::fixed("D", 1)],
            branches: vec![ConditionalBranch {
                at: "A".into(),
                arms: vec![
                    Arm { condition: parse_constraint("k = 0").unwrap(), successor: "B".into() },
                    Arm { condition: parse_constraint("k >= 1").unwrap(), successor: "C".into() },
                ],
                default: Some("D".into()),
            }],
            roots: roots(&["A"]),
            horizon: 6,
            ..Score::default()
        },
        vec![vec![], vec![set(1, "k", 0)], vec![set(1, "k", 2)], vec![set(0, "k", 1)]],
    );
    c.var_ranges.insert("k".into(), vec![0, 1]);
    out.push(c);

    let mut c = case(
        "loop",
        Score {
            vars: vec![VarDecl::new("k", 0, 3)],
            objects: vec![TemporalObject::fixed("A", 1)],
            branches: vec![ConditionalBranch {
                at: "A".into(),
                arms: vec![Arm { condition: parse_constraint("k < 2").unwrap(), successor: "A".into() }],
                default: None,
            }],
            roots: roots(&["A"]),
            horizon: 8,
            ..Score::default()
        },
        vec![vec![set(0, "k", 0), set(1, "k", 1), set(2, "k", 2)], vec![], vec![set(0, "k", 1), set(2, "k", 0)]],
    );
    c.var_ranges.insert("k".into(), vec![1, 2]);
    out.push(c);

    out.push(case(
        "loop-with-exit",
        Score {
            vars: vec![VarDecl::new("again", 0, 1)],
            objects: vec![TemporalObject::fixed("A", 2), TemporalObject::fixed("B", 1)],
            branches: vec![ConditionalBranch {
                at: "A".into(),
                arms: vec![Arm { condition: parse_constraint("again = 1").unwrap(), successor: "A".into() }],
                default: Some("B".into()),
            }],
            roots: roots(&["A"]),
            horizon: 10,
            ..Score::default()
        },
        vec![vec![], vec![set(1, "again", 1), set(3, "again", 1)], vec![set(3, "again", 1)]],
    ));

    out.push(case(
        "global-failure",
        Score {
            objects: vec![TemporalObject::flexible("A", 2, 4), TemporalObject::flexible("B", 2, 4)],
            points: vec![point("p", Binding::DurationOf("A".into()), (0, 2))],
            globals: vec![parse_constraint("dur_A + dur_B <= 5").unwrap()],
            roots: roots(&["A", "B"]),
            horizon: 8,
            ..Score::default()
        },
        vec![vec![], vec![sig(0, "ev_p")], vec![sig(1, "ev_p")]],
    ));

    out.push(case(
        "global-satisfied",
        Score {
            objects: vec![TemporalObject::flexible("A", 1, 3), TemporalObject::fixed("B", 2)],
            relations: vec![prec("A", "B", 1, 2)],
            globals: vec![parse_constraint("dur_A + dur_B <= 6").unwrap()],
            roots: roots(&["A"]),
            horizon: 8,
            ..Score::default()
        },
        vec![vec![]],
    ));

    out.push(case(
        "diamond",
        Score {
            objects: vec![
                TemporalObject::fixed("A", 1),
                TemporalObject::fixed("B", 2),
                TemporalObject::fixed("C", 1),
                TemporalObject::fixed("D", 2),
            ],
            relations: vec![prec("A", "B", 1, 1), prec("A", "C", 1, 1), prec("B", "D", 1, 1), prec("C", "D", 1, 1)],
            roots: roots(&["A"]),
            horizon: 10,
            ..Score::default()
        },
        vec![vec![]],
    ));

    out.push(case(
        "parallel-roots",
        Score {
            objects: vec![
                TemporalObject::fixed("A", 3),
                TemporalObject::flexible("B", 1, 2),
                TemporalObject::fixed("C", 2),
                TemporalObject::fixed("D", 1),
            ],
            relations: vec![prec("A", "C", 2, 2), prec("B", "D", 1, 1)],
            roots: roots(&["A", "B"]),
            horizon: 9,
            ..Score::default()
        },
        vec![vec![]],
    ));

    out.push(case(
        "two-points",
        Score {
            objects: vec![TemporalObject::fixed("A", 1), TemporalObject::flexible("B", 2, 4), TemporalObject::fixed("C", 1)],
            relations: vec![prec("A", "B", 1, 2), prec("B", "C", 1, 1)],
            points: vec![
                point("go", Binding::DelayOf { from: "A".into(), to: "B".into() }, (0, 1)),
                point("cut", Binding::DurationOf("B".into()), (0, 2)),
            ],
            roots: roots(&["A"]),
            horizon: 8,
            ..Score::default()
        },
        vec![vec![], vec![sig(0, "ev_go"), sig(1, "ev_cut")], vec![sig(1, "ev_go"), sig(3, "ev_cut")], vec![sig(2, "ev_cut")]],
    ));

    out.push(case(
        "start-point-group",
        Score {
            objects: vec![TemporalObject::fixed("A", 2), TemporalObject::fixed("B", 1), TemporalObject::fixed("C", 1)],
            relations: vec![Relation::SimultaneousStart { a: "A".into(), b: "B".into() }, prec("B", "C", 1, 1)],
            points: vec![point("s", Binding::StartOf("A".into()), (0, 3))],
            roots: roots(&["A", "B"]),
            horizon: 8,
            ..Score::default()
        },
        vec![vec![], vec![sig(1, "ev_s")]],
    ));

    let mut c = case(
        "branch-after-point",
        Score {
            vars: vec![VarDecl::new("mode", 0, 1)],
            objects: vec![TemporalObject::fixed("A", 1), TemporalObject::fixed("B", 1), TemporalObject::fixed("C", 2)],
            points: vec![point("s", Binding::StartOf("A".into()), (0, 2))],
            branches: vec![ConditionalBranch {
                at: "A".into(),
                arms: vec![Arm { condition: parse_constraint("mode = 1").unwrap(), successor: "B".into() }],
                default: Some("C".into()),
            }],
            roots: roots(&["A"]),
            horizon: 8,
            ..Score::default()
        },
        vec![vec![], vec![sig(0, "ev_s"), set(1, "mode", 1)], vec![sig(1, "ev_s"), set(2, "mode", 1)]],
    );
    c.var_ranges.insert("mode".into(), vec![1]);
    out.push(c);

    out.push(case(
        "duration-ne",
        Score {
            objects: vec![TemporalObject::flexible("A", 1, 3), TemporalObject::flexible("B", 1, 3)],
            relations: vec![Relation::DurationRel { a: "A".into(), rel: DurRel::Ne, b: "B".into(), offset: 0 }],
            roots: roots(&["A", "B"]),
            horizon: 5,
            ..Score::default()
        },
        vec![vec![]],
    ));

    out.push(case(
        "late-window",
        Score {
            objects: vec![TemporalObject::fixed("A", 1), TemporalObject::fixed("B", 2)],
            relations: vec![prec("A", "B", 3, 5)],
            points: vec![point("w", Binding::DelayOf { from: "A".into(), to: "B".into() }, (2, 4))],
            roots: roots(&["A"]),
            horizon: 10,
            ..Score::default()
        },
        vec![vec![], vec![sig(1, "ev_w")], vec![sig(2, "ev_w")], vec![sig(3, "ev_w")], vec![sig(4, "ev_w")]],
    ));

    out
}
