use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::Context;
use clap::{Parser, Subcommand};
use ntscore::formats::{self, TraceLine};
use ntscore::server::{self, ServeError, ServeOptions};
use ntscore::session::{OverrunPolicy, RuntimeConfig, Session};
use ntscore_core::score::{validate, Tu};
use ntscore_core::verify::{self, CheckOptions, EnvSpec, Outcome};
use ntscore_core::{compile, ChoicePolicy, CompiledScore};

#[derive(Parser)]
#[command(name = "ntscore", version, about = "Interactive scores on a timed concurrent-constraint calculus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a score document and print diagnostics.
    Validate { score: PathBuf },
    /// Compile a score; optionally write the process dump.
    Compile {
        score: PathBuf,
        /// Write the compiled definitions here (`-` for stdout).
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Perform a score, writing one JSON line per unit.
    Run {
        score: PathBuf,
        /// Milliseconds per time unit.
        #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
        tu_ms: u64,
        /// Scripted events, one `tu event` per line.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Trace output (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Serve the live WebSocket endpoint on this address.
        #[arg(long)]
        serve: Option<String>,
        /// With --serve, start ticking without waiting for a client.
        #[arg(long, requires = "serve")]
        autostart: bool,
        #[arg(long)]
        max_units: Option<Tu>,
        /// Resolve choices with a seeded generator instead of the first option.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "log")]
        overrun: OverrunPolicy,
        /// Run units back to back instead of on the wall clock.
        #[arg(long, conflicts_with = "serve")]
        no_clock: bool,
        /// Write computeMs as 0 so identical runs give identical bytes.
        #[arg(long)]
        no_timing: bool,
    },
    /// Model-check a property over every run the environment allows.
    Verify {
        score: PathBuf,
        property: PathBuf,
        /// Environment description (default: no inputs).
        #[arg(long)]
        env: Option<PathBuf>,
        /// Units to explore (default: the score horizon).
        #[arg(long)]
        horizon: Option<Tu>,
        /// Maximum number of explored states.
        #[arg(long, default_value_t = verify::DEFAULT_STATE_BUDGET)]
        budget: u64,
        /// Evidence output (default: next to the property, `.evidence.json`).
        #[arg(long)]
        evidence: Option<PathBuf>,
        #[arg(long)]
        no_memo: bool,
        /// Largest delay explored for `*P`.
        #[arg(long, default_value_t = 0)]
        star_bound: u32,
    },
    /// Re-run verifier evidence through the runtime.
    Replay { score: PathBuf, evidence: PathBuf },
    /// Time units of a synthetic score.
    Bench {
        #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
        objects: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// Exit 1: the input is fine but the answer is negative.
struct Negative;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Negative)) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn compiled(path: &Path) -> anyhow::Result<Result<Arc<CompiledScore>, Negative>> {
    let s = formats::load_score(path)?;
    let diags = validate(&s);
    if !diags.is_empty() {
        for d in &diags {
            eprintln!("{}: {d}", path.display());
        }
        return Ok(Err(Negative));
    }
    Ok(Ok(Arc::new(compile(&s)?)))
}

fn dispatch(cmd: Command) -> anyhow::Result<Result<(), Negative>> {
    match cmd {
        Command::Validate { score } => {
            let s = formats::load_score(&score)?;
            let diags = validate(&s);
            if diags.is_empty() {
                println!("ok: {}", s.summary());
                Ok(Ok(()))
            } else {
                for d in &diags {
                    println!("{}: {d}", score.display());
                }
                Ok(Err(Negative))
            }
        }
        Command::Compile { score, dump } => {
            let cs = match compiled(&score)? {
                Ok(cs) => cs,
                Err(n) => return Ok(Err(n)),
            };
            match dump.as_deref() {
                Some(p) if p == Path::new("-") => print!("{}", cs.dump()),
                Some(p) => formats::write_text(p, &cs.dump())?,
                None => println!("ok: {} definitions, {} variables", cs.defs.len(), cs.env.len()),
            }
            Ok(Ok(()))
        }
        Command::Run { score, tu_ms, events, out, serve, autostart, max_units, seed, overrun, no_clock, no_timing } => {
            let cs = match compiled(&score)? {
                Ok(cs) => cs,
                Err(n) => return Ok(Err(n)),
            };
            let script = match &events {
                Some(p) => formats::load_events(p)?,
                None => Vec::new(),
            };
            let cfg = RuntimeConfig {
                tu_period: Duration::from_millis(tu_ms),
                policy: seed.map_or_else(ChoicePolicy::deterministic, ChoicePolicy::seeded),
                max_units: max_units.unwrap_or(Tu::MAX),
                overrun,
            };
            let session = Session::new(cs, cfg)?;
            let mut sink: Box<dyn Write> = match &out {
                Some(p) => Box::new(std::io::BufWriter::new(
                    std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
                )),
                None => Box::new(std::io::stdout().lock()),
            };
            let mut io_err = None;
            let mut write = |rec: &ntscore::session::TraceRecord| {
                let mut line: TraceLine = rec.line();
                if no_timing {
                    line.compute_ms = 0.0;
                }
                if let Err(e) = writeln!(sink, "{}", line.to_json()) {
                    io_err.get_or_insert(e);
                }
            };
            let session = match serve {
                Some(addr) => {
                    let listener = match server::bind(addr.as_str()) {
                        Err(ServeError::AddressInUse) => anyhow::bail!("address in use"),
                        r => r?,
                    };
                    server::serve(listener, session, ServeOptions { autostart, script }, &mut write)?
                }
                None => {
                    let mut session = session;
                    session.run(&script, !no_clock, &mut write)?;
                    session
                }
            };
            if let Some(e) = io_err {
                return Err(e.into());
            }
            sink.flush()?;
            let failures = session.trace().iter().filter(|r| r.unit.failure).count();
            if failures > 0 {
                eprintln!("{failures} unit(s) with constraint failure");
                return Ok(Err(Negative));
            }
            Ok(Ok(()))
        }
        Command::Verify { score, property, env, horizon, budget, evidence, no_memo, star_bound } => {
            let cs = match compiled(&score)? {
                Ok(cs) => cs,
                Err(n) => return Ok(Err(n)),
            };
            let prop = formats::load_property(&property)?;
            let env = match &env {
                Some(p) => formats::load_env(p)?,
                None => EnvSpec::default(),
            };
            let horizon = horizon.unwrap_or(cs.score.horizon);
            let opts = CheckOptions { budget, memo: !no_memo, star_bound, ..CheckOptions::default() };
            let begin = Instant::now();
            let v = verify::check(&cs, &prop, &env, horizon, opts)?;
            let elapsed = begin.elapsed();
            println!("{}", v.result);
            println!(
                "states {} transitions {} memo-hits {} elapsed {:.3}s",
                v.stats.states,
                v.stats.transitions,
                v.stats.memo_hits,
                elapsed.as_secs_f64()
            );
            if let Some(ev) = &v.evidence {
                let path = evidence.unwrap_or_else(|| property.with_extension("evidence.json"));
                formats::write_text(&path, &formats::evidence_to_json(ev))?;
                let kind = if v.result == Outcome::Refuted { "counterexample" } else { "witness" };
                println!("{kind}: {} ({} units)", path.display(), ev.len());
            } else if prop.mode == verify::Mode::ExistsRun {
                println!("no witness within horizon");
            }
            Ok(if v.result == Outcome::Verified { Ok(()) } else { Err(Negative) })
        }
        Command::Replay { score, evidence } => {
            let cs = match compiled(&score)? {
                Ok(cs) => cs,
                Err(n) => return Ok(Err(n)),
            };
            let ev = formats::load_evidence(&evidence)?;
            if verify::replay(&cs, &ev)? {
                println!("replay ok: {} units", ev.len());
                Ok(Ok(()))
            } else {
                println!("replay mismatch");
                Ok(Err(Negative))
            }
        }
        Command::Bench { objects, out, seed } => {
            let r = ntscore::bench::bench(objects as usize, seed)?;
            println!(
                "objects {} units {} mean {:.3} ms median {:.3} ms max {:.3} ms (target mean <= {} ms) total {:.1} ms: {}",
                r.objects,
                r.units,
                r.mean_ms,
                r.median_ms,
                r.max_ms,
                r.target_mean_ms,
                r.total_ms,
                if r.pass { "PASS" } else { "FAIL" }
            );
            if let Some(p) = out {
                formats::write_text(&p, &(serde_json::to_string_pretty(&r)? + "\n"))?;
            }
            Ok(if r.pass { Ok(()) } else { Err(Negative) })
        }
    }
}
