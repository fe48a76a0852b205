//! Command dispatch: turn a validated spec into a results object plus a
//! certification verdict. Rationals render as "num/den" strings throughout.

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use filterlab_core::antichain::{
    greedy_rapid_witness, minimal_antichain, rapid_escape, upward_closure, upward_kernel,
};
use filterlab_core::covers::{
    decompose_null_cover, CoverSide, SmallCover, StageLedgerEntry,
};
use filterlab_core::filters::{baire_check, baire_search, fip_check, BaireSearch};
use filterlab_core::halving::{
    avoidance_bounds, select_halves, successor_step, ConstraintList, Halves, SelectionResult,
    TrialsReport,
};
use filterlab_core::interval::IntervalPartition;
use filterlab_core::measure::{
    conjugate_bias, family_measure, pushforward_mass, trace_measure, ConjugateKind, Verdict,
};
use filterlab_core::measure::tail_certificate;
use filterlab_core::trace::{CylinderFamily, FiniteTrace};
use filterlab_core::{Rational, Result};

use crate::schema::{
    bias_to_spec, BaireMode, Command, MapSpec, WitnessSpec, SPEC_VERSION,
};

/// What a command produced: the results object, whether the outcome is
/// certified, and human-readable notes explaining a shortfall.
pub struct Outcome {
    pub results: Value,
    pub certified: bool,
    pub diagnostics: Vec<String>,
}

impl Outcome {
    fn certified(results: Value) -> Self {
        Outcome {
            results,
            certified: true,
            diagnostics: Vec::new(),
        }
    }

    fn judged(results: Value, certified: bool, note: &str) -> Self {
        Outcome {
            results,
            certified,
            diagnostics: if certified {
                Vec::new()
            } else {
                vec![note.to_string()]
            },
        }
    }
}

fn rat(r: &Rational) -> Value {
    Value::String(r.to_string())
}

fn opt_rat(r: &Option<Rational>) -> Value {
    r.as_ref().map_or(Value::Null, rat)
}

fn family_value(f: &CylinderFamily) -> Value {
    json!({
        "domain": f.domain(),
        "traces": f.traces().map(|t| t.bit_string()).collect::<Vec<_>>(),
    })
}

fn trace_value(t: &FiniteTrace) -> Value {
    json!({ "window": t.window_size(), "ones": t.ones_vec() })
}

fn side_value(side: CoverSide) -> Value {
    match side {
        CoverSide::A => json!("a"),
        CoverSide::B => json!("b"),
    }
}

fn cover_value(cover: &SmallCover, ledger: &[StageLedgerEntry]) -> Value {
    let stages: Vec<Value> = cover
        .stages()
        .iter()
        .enumerate()
        .map(|(k, (iv, fam))| {
            let entry = ledger.iter().find(|e| e.stage == k);
            json!({
                "interval": [iv.start(), iv.end()],
                "size": fam.len(),
                "weight": rat(&cover.weights()[k]),
                "bound": entry.map_or(Value::Null, |e| opt_rat(&e.bound)),
            })
        })
        .collect();
    json!({ "stages": stages, "tail_bound": rat(cover.tail_bound()) })
}

fn trials_value(trials: &TrialsReport) -> Value {
    match trials {
        TrialsReport::Exhaustive { examined } => {
            json!({ "kind": "exhaustive", "examined": examined })
        }
        TrialsReport::MonteCarlo {
            seed,
            trials,
            successes,
            first_success,
        } => json!({
            "kind": "monte_carlo",
            "seed": seed,
            "trials": trials,
            "successes": successes,
            "first_success": first_success,
        }),
    }
}

fn halves_value(halves: &Option<Halves>) -> Value {
    match halves {
        None => Value::Null,
        Some(map) => Value::Array(
            map.iter()
                .map(|(&(k, l), half)| json!({ "level": k, "column": l, "half": half }))
                .collect(),
        ),
    }
}

fn selection_value(sel: &SelectionResult, cs: &ConstraintList) -> Value {
    let bounds = avoidance_bounds(cs);
    json!({
        "budget": rat(cs.budget()),
        "union_bound": rat(&bounds.union_bound),
        "product_bound": rat(&bounds.product_bound),
        "halves": halves_value(&sel.halves),
        "trials": trials_value(&sel.trials),
    })
}

pub fn execute(cmd: &Command, cap: usize) -> Result<Outcome> {
    match cmd {
        Command::Measure(spec) => {
            let p = spec.bias.build()?;
            let fam = spec.family.build()?;
            let measure = family_measure(&p, &fam, cap)?;
            Ok(Outcome::certified(json!({ "measure": rat(&measure) })))
        }
        Command::Conjugate(spec) => {
            let p = spec.bias.build()?;
            let q = match &spec.map {
                MapSpec::Max => conjugate_bias(&p, ConjugateKind::MaxMap)?,
                MapSpec::Union { dominating } => {
                    let dom = dominating.build()?;
                    conjugate_bias(&p, ConjugateKind::UnionMap { dominating: &dom })?
                }
            };
            let rendered = serde_json::to_value(bias_to_spec(&q)).expect("bias serializes");
            Ok(Outcome::certified(json!({ "bias": rendered })))
        }
        Command::Pushforward(spec) => {
            let p = spec.bias.build()?;
            let aux = spec.aux.build()?;
            let target = spec.target.build()?;
            let s = spec.trace.build()?;
            let mass = pushforward_mass(&p, &aux, &s, cap)?;
            let expected = trace_measure(&target, &s)?;
            let matches = mass == expected;
            Ok(Outcome::judged(
                json!({
                    "mass": rat(&mass),
                    "target_mass": rat(&expected),
                    "matches": matches,
                }),
                matches,
                "pushforward mass differs from the target measure",
            ))
        }
        Command::Decompose(spec) => {
            let p = spec.bias.build()?;
            let prefix = spec.build_cover(&p, cap)?;
            let eps = spec.schedule.build()?;
            let d = decompose_null_cover(&prefix, &eps, &p, spec.window, cap)?;
            let results = json!({
                "a_cuts": d.a_cuts,
                "b_cuts": d.b_cuts,
                "cover_a": cover_value(&d.cover_a, &d.ledger_a),
                "cover_b": cover_value(&d.cover_b, &d.ledger_b),
                "rejected": d.rejected.iter().map(|r| json!({
                    "side": side_value(r.side),
                    "stage": r.stage,
                    "level": r.level,
                })).collect::<Vec<_>>(),
                "exhausted": d.exhausted.map_or(Value::Null, |e| json!({
                    "stage": e.stage,
                    "side": side_value(e.side),
                })),
                "schedule_truncated": d.schedule_truncated,
            });
            Ok(Outcome::judged(
                results,
                d.certified,
                "the cut search exhausted the window or a stage broke its bound",
            ))
        }
        Command::Antichain(spec) => {
            let fam = spec.family.build()?;
            let kernel = upward_kernel(&fam, cap)?;
            let closure = upward_closure(&fam, cap)?;
            let antichain = minimal_antichain(&kernel);
            Ok(Outcome::certified(json!({
                "kernel": family_value(&kernel),
                "closure": family_value(&closure),
                "antichain": antichain,
            })))
        }
        Command::Rapid(spec) => {
            let fam = spec.build_family(cap)?;
            let z = match &spec.witness {
                WitnessSpec::Greedy { window } => greedy_rapid_witness(&fam, *window)?,
                WitnessSpec::Explicit { window, ones } => FiniteTrace::window(*window, ones)?,
            };
            let report = rapid_escape(&fam, &z, cap)?;
            let results = json!({
                "witness": trace_value(&z),
                "normalized": report.normalized,
                "violations": report.violations,
                "growth": report.growth,
                "rapid": report.rapid,
                "hits": report.hits,
                "escape_guaranteed": report.escape_guaranteed,
            });
            Ok(Outcome::judged(
                results,
                report.escape_guaranteed,
                "the witness is not guaranteed to escape every stage",
            ))
        }
        Command::Baire(spec) => {
            let base = spec.base.build()?;
            let fip = fip_check(&base);
            match &spec.mode {
                BaireMode::Search => match baire_search(&base) {
                    BaireSearch::Witness(part) => {
                        let report = baire_check(&base, &part)?;
                        debug_assert!(report.witnesses);
                        Ok(Outcome::certified(json!({
                            "mode": "search",
                            "fip": fip,
                            "witness": part.cuts(),
                            "open_block_start": Value::Null,
                        })))
                    }
                    BaireSearch::Exhausted { open_block_start } => Ok(Outcome::judged(
                        json!({
                            "mode": "search",
                            "fip": fip,
                            "witness": Value::Null,
                            "open_block_start": open_block_start,
                        }),
                        false,
                        "no partition closes every block inside the window",
                    )),
                },
                BaireMode::Check { cuts } => {
                    let part = IntervalPartition::new(cuts.clone())?;
                    let report = baire_check(&base, &part)?;
                    let results = json!({
                        "mode": "check",
                        "fip": fip,
                        "generator_misses": report.generator_misses,
                        "pair_misses": report.pair_misses.iter().map(|((i, j), m)| json!({
                            "pair": [i, j],
                            "misses": m,
                        })).collect::<Vec<_>>(),
                        "witnesses": report.witnesses,
                    });
                    Ok(Outcome::judged(
                        results,
                        report.witnesses,
                        "some generator misses more blocks than the margin allows",
                    ))
                }
            }
        }
        Command::Halves(spec) => {
            let grid = spec.grid.build()?;
            let cs = ConstraintList::new(spec.constraints.clone());
            let sel = select_halves(&grid, &cs, spec.strategy.build())?;
            let certified = sel.certified;
            Ok(Outcome::judged(
                selection_value(&sel, &cs),
                certified,
                "no selection was certified under a sub-unit budget",
            ))
        }
        Command::Successor(spec) => {
            let generators = spec
                .generators
                .iter()
                .map(|ones| FiniteTrace::window(spec.window, ones))
                .collect::<Result<Vec<_>>>()?;
            let grid = spec.grid.build()?;
            let cs = ConstraintList::new(spec.constraints.clone());
            let outcome =
                successor_step(&generators, &grid, &spec.schedule, &cs, spec.strategy.build())?;
            let results = json!({
                "selection": selection_value(&outcome.selection, &cs),
                "x_next": outcome.x_next.as_ref().map_or(Value::Null, trace_value),
                "meets": outcome.meets,
                "avoided": outcome.avoided,
            });
            Ok(Outcome::judged(
                results,
                outcome.certified,
                "the step is not certified: selection, positivity, or avoidance fell short",
            ))
        }
        Command::Certificate(spec) => {
            let p = spec.bias.build()?;
            let cert = tail_certificate(&p, spec.exponent, spec.start)?;
            let verdict = match cert.verdict {
                Verdict::Converges => "converges",
                Verdict::Diverges => "diverges",
                Verdict::Unknown => "unknown",
            };
            let results = json!({
                "verdict": verdict,
                "tail_bound": opt_rat(&cert.tail_bound),
            });
            Ok(Outcome::judged(
                results,
                cert.verdict != Verdict::Unknown,
                "the tail class admits no convergence or divergence certificate",
            ))
        }
    }
}

/// Stable digest of the effective spec: canonical JSON (sorted keys, compact)
/// of the version, command, and fully materialized payload.
pub fn inputs_digest(cmd: &Command) -> String {
    let effective = json!({
        "command": cmd.name(),
        "payload": cmd.payload_value(),
        "version": SPEC_VERSION,
    });
    let bytes = serde_json::to_string(&effective).expect("spec value serializes");
    let mut hasher = Sha256::new();
    hasher.update(bytes.as_bytes());
    hex::encode(hasher.finalize())
}

/// Assemble the full report object. Object keys end up sorted because the
/// underlying map is ordered, so serializing is already canonical.
pub fn report(cmd: &Command, outcome: &Outcome) -> Value {
    let mut map = Map::new();
    map.insert("certified".into(), json!(outcome.certified));
    map.insert("command".into(), json!(cmd.name()));
    map.insert("diagnostics".into(), json!(outcome.diagnostics));
    map.insert("inputs_digest".into(), json!(inputs_digest(cmd)));
    map.insert("results".into(), outcome.results.clone());
    map.insert("version".into(), json!(SPEC_VERSION));
    Value::Object(map)
}

/// One line per fact; nested results flatten to `key: compact-json`.
pub fn render_text(report: &Value) -> String {
    let mut out = String::new();
    let push = |out: &mut String, line: &str| {
        out.push_str(line);
        out.push('\n');
    };
    push(&mut out, &format!("command: {}", report["command"].as_str().unwrap_or("?")));
    push(
        &mut out,
        &format!("inputs_digest: {}", report["inputs_digest"].as_str().unwrap_or("?")),
    );
    push(&mut out, &format!("certified: {}", report["certified"]));
    push(&mut out, "results:");
    if let Some(results) = report["results"].as_object() {
        for (key, value) in results {
            push(&mut out, &format!("  {key}: {value}"));
        }
    }
    match report["diagnostics"].as_array() {
        Some(notes) if !notes.is_empty() => {
            push(&mut out, "diagnostics:");
            for note in notes {
                push(&mut out, &format!("  - {}", note.as_str().unwrap_or("?")));
            }
        }
        _ => push(&mut out, "diagnostics: none"),
    }
    out
}
