//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

mod common;

use std::time::{Duration, Instant};

use common::{di_crossings, di_state, random_linear_system, random_partition};
use desabs::event_engine::detect_events;
use desabs::partition::Functional;
use desabs::plant::{closed_form_double_integrator, flow};
use desabs::system::axis_partition;
use desabs::{
    adjacency, check_observability, extract, reconstruct, simulate_closed_loop, CellRegistry,
    DesAutomaton, EventTolerances, ExtractionConfig, PartitionSpec, PlantSymbol, PlantSystem,
    SignVector, VectorField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(), String>;
type Criterion = (&'static str, u64, fn() -> Outcome);

fn bundled_system() -> PlantSystem {
    let path = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/examples/double_integrator.json"
    );
    PlantSystem::from_path(path).expect("bundled system file loads")
}

fn bundled_automaton() -> DesAutomaton {
    let sys = bundled_system();
    extract(&sys, &sys.config(&Default::default())).expect("extraction succeeds")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn symbols(text: &str) -> Vec<PlantSymbol> {
    text.split_whitespace()
        .map(|s| s.parse().unwrap())
        .collect()
}

fn reference_cells() -> Outcome {
    let a = bundled_automaton();
    ensure(a.metadata().samples_per_cell == 64, || {
        format!(
            "ran with {} samples per cell",
            a.metadata().samples_per_cell
        )
    })?;
    let mut got: Vec<(String, String)> = a
        .states()
        .iter()
        .map(|s| (s.symbol.clone(), s.signs.to_string()))
        .collect();
    got.sort();
    let want: Vec<(String, String)> = [
        ("p1", "[1 1]"),
        ("p2", "[-1 1]"),
        ("p3", "[-1 -1]"),
        ("p4", "[1 -1]"),
    ]
    .iter()
    .map(|(p, b)| (p.to_string(), b.to_string()))
    .collect();
    ensure(got == want, || format!("states {got:?}"))
}

fn observability() -> Outcome {
    let a = bundled_automaton();
    let t = Instant::now();
    let report = check_observability(&a);
    let took = t.elapsed();
    ensure(report.observable && report.witnesses.is_empty(), || {
        format!("{} witnesses", report.witnesses.len())
    })?;
    ensure(took < Duration::from_secs(1), || {
        format!("check took {took:?}")
    })
}

fn cycle_reconstruction() -> Outcome {
    let a = bundled_automaton();
    let t = Instant::now();
    let one = reconstruct(&a, "p2", &symbols("z1+ z2- z1- z2+")).map_err(|e| e.to_string())?;
    ensure(one == ["p2", "p1", "p4", "p3", "p2"], || {
        format!("one block gave {one:?}")
    })?;
    let block = symbols("z1+ z2- z1- z2+");
    let three: Vec<PlantSymbol> = block.iter().cycle().take(12).copied().collect();
    let got = reconstruct(&a, "p2", &three).map_err(|e| e.to_string())?;
    let cycle = ["p2", "p1", "p4", "p3"];
    let want: Vec<&str> = (0..=12).map(|k| cycle[k % 4]).collect();
    ensure(got == want, || format!("three blocks gave {got:?}"))?;
    let took = t.elapsed();
    ensure(took < Duration::from_secs(1), || format!("took {took:?}"))
}

fn oracle_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let field = VectorField::double_integrator();
    let partition = axis_partition(2);
    let mut crossings = 0;
    for trial in 0..1000 {
        let x0 = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let u: f64 = match trial % 4 {
            0 => -1.0,
            1 => 0.0,
            2 => 1.0,
            _ => rng.gen_range(-1.0..1.0),
        };
        let t = rng.gen_range(1e-3..10.0);
        let seg = flow(&field, &x0, &[u], t, 1e-3).map_err(|e| e.to_string())?;
        for s in &seg.samples {
            let exact = closed_form_double_integrator(x0, u, s.time);
            let oracle = di_state(x0, u, s.time);
            for k in 0..2 {
                ensure((exact[k] - oracle[k]).abs() < 1e-12, || {
                    format!(
                        "closed form disagrees with oracle at {x0:?}, u={u}, t={}",
                        s.time
                    )
                })?;
                ensure((s.state[k] - exact[k]).abs() < 1e-9, || {
                    format!(
                        "flow off by {:e} at {x0:?}, u={u}, t={}",
                        (s.state[k] - exact[k]).abs(),
                        s.time
                    )
                })?;
            }
        }
        let expected = di_crossings(x0, u, seg.end_time());
        let scan = detect_events(&seg, &field, &partition, EventTolerances::default())
            .map_err(|e| e.to_string())?;
        ensure(scan.events.len() == expected.len(), || {
            format!(
                "{x0:?}, u={u}, t={t}: {} events, oracle {}",
                scan.events.len(),
                expected.len()
            )
        })?;
        for (e, (i, dir, te)) in scan.events.iter().zip(&expected) {
            ensure(
                e.surface == *i && e.direction.as_char() == *dir && (e.time - te).abs() < 1e-8,
                || {
                    format!(
                        "{x0:?}, u={u}: event {} at {} vs z{i}{dir} at {te}",
                        e.symbol(),
                        e.time
                    )
                },
            )?;
        }
        crossings += expected.len();
    }
    ensure(crossings > 500, || {
        format!("only {crossings} crossings exercised")
    })
}

fn cell_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let random_setup = |rng: &mut ChaCha8Rng| -> PartitionSpec {
        let n = rng.gen_range(1..=8);
        let dim = rng.gen_range(1..=4);
        random_partition(rng, n, dim)
    };
    let point = |rng: &mut ChaCha8Rng, dim: usize| -> Vec<f64> {
        (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect()
    };

    for trial in 0..10_000 {
        let p = random_setup(&mut rng);
        let dim = p.dimension().unwrap();
        let x1 = point(&mut rng, dim);
        // Half the pairs are close together so both outcomes are exercised.
        let x2: Vec<f64> = if trial % 2 == 0 {
            x1.iter().map(|v| v + rng.gen_range(-1e-2..1e-2)).collect()
        } else {
            point(&mut rng, dim)
        };
        let q1 = p.quality(&x1, 1e-9).map_err(|e| e.to_string())?;
        let q2 = p.quality(&x2, 1e-9).map_err(|e| e.to_string())?;
        if !(q1.is_consistent() && q2.is_consistent()) {
            continue;
        }
        let agree = p
            .functionals()
            .iter()
            .all(|f| f.evaluate(&x1).unwrap() * f.evaluate(&x2).unwrap() > 0.0);
        ensure((q1 == q2) == agree, || {
            format!("equivalence fails for {x1:?}, {x2:?}")
        })?;
    }

    for _ in 0..10_000 {
        let p = random_setup(&mut rng);
        let dim = p.dimension().unwrap();
        let mut reg = CellRegistry::new(p.len());
        let labels: Vec<_> = (0..8)
            .map(|_| {
                p.cell_of(&mut reg, &point(&mut rng, dim), 1e-9)
                    .map_err(|e| e.to_string())
            })
            .collect::<Result<_, _>>()?;
        for a in &labels {
            ensure(
                reg.by_symbol(a.symbol()).map(|c| c.signs()) == Some(a.signs()),
                || format!("label {} is not registered with its signs", a.symbol()),
            )?;
            for b in &labels {
                ensure(
                    (a.symbol() == b.symbol()) == (a.signs() == b.signs()),
                    || {
                        format!(
                            "{} {} vs {} {}",
                            a.symbol(),
                            a.signs(),
                            b.symbol(),
                            b.signs()
                        )
                    },
                )?;
            }
        }
    }

    let candidates: Vec<Vec<SignVector>> = (1..=8)
        .map(|n| {
            PartitionSpec::new(
                (1..=n)
                    .map(|i| Functional::affine(i, vec![1.0], 0.0).unwrap())
                    .collect(),
            )
            .unwrap()
            .enumerate_candidate_cells()
            .unwrap()
        })
        .collect();
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=8);
        let all = &candidates[n - 1];
        let a = &all[rng.gen_range(0..all.len())];
        for i in 1..=n {
            let hits = all
                .iter()
                .filter(|b| adjacency(a, b).is_some_and(|adj| adj.surface == i))
                .count();
            ensure(hits == 1, || {
                format!("{a} has {hits} neighbors across surface {i}")
            })?;
        }
    }
    Ok(())
}

fn random_systems() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = ExtractionConfig {
        samples_per_cell: 16,
        horizon: 20.0,
        dt: 1e-2,
        ..ExtractionConfig::default()
    };
    let mut transitions = 0;
    for k in 0..50 {
        let n = 2 + k % 2;
        let sys = random_linear_system(&mut rng, n);
        let a = extract(&sys, &cfg).map_err(|e| format!("system {k}: {e}"))?;
        let report = check_observability(&a);
        ensure(report.observable, || {
            format!("system {k}: {} witnesses", report.witnesses.len())
        })?;
        ensure(a.coherence_violations().is_empty(), || {
            format!("system {k}: incoherent transitions")
        })?;
        for t in a.transitions() {
            let adj = adjacency(
                &a.state(&t.from).unwrap().signs,
                &a.state(&t.to).unwrap().signs,
            );
            ensure(
                adj.is_some_and(|adj| PlantSymbol::new(adj.surface, adj.direction) == t.output),
                || format!("system {k}: {} -> {} outputs {}", t.from, t.to, t.output),
            )?;
        }
        transitions += a.transitions().len();
    }
    ensure(transitions > 100, || {
        format!("only {transitions} transitions exercised")
    })
}

fn closed_loop_round_trip() -> Outcome {
    let sys = bundled_system();
    let cfg = sys.config(&Default::default());
    let a = extract(&sys, &cfg).map_err(|e| e.to_string())?;
    let controls = ["r1", "r2", "r3"];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut steps = 0;
    for _ in 0..100 {
        let x0 = [rng.gen_range(-4.5..4.5), rng.gen_range(-4.5..4.5)];
        let len = rng.gen_range(1..=10);
        let seq: Vec<String> = (0..len)
            .map(|_| controls[rng.gen_range(0..3)].to_string())
            .collect();
        let mut reg = a.registry().map_err(|e| e.to_string())?;
        let trace =
            simulate_closed_loop(&sys, &mut reg, &x0, &seq, &cfg).map_err(|e| e.to_string())?;
        let got = reconstruct(&a, &trace.states[0], &trace.symbols)
            .map_err(|e| format!("{x0:?} {seq:?}: {e}"))?;
        ensure(got == trace.states, || {
            format!("{x0:?} {seq:?}: {got:?} vs {:?}", trace.states)
        })?;
        steps += trace.symbols.len();
    }
    ensure(steps > 100, || {
        format!("only {steps} discrete steps exercised")
    })
}

fn main() {
    let criteria: [Criterion; 7] = [
        (
            "reference cells p1..p4 with pinned sign vectors",
            10,
            reference_cells,
        ),
        ("reference automaton is observable", 10, observability),
        (
            "cycle p2 p1 p4 p3 reconstructed from z1+ z2- z1- z2+",
            10,
            cycle_reconstruction,
        ),
        (
            "RK4 and event times against the closed form",
            30,
            oracle_fidelity,
        ),
        (
            "cell equivalence, label bijection, unique neighbors",
            60,
            cell_properties,
        ),
        (
            "50 random plants extract observable, coherent automata",
            300,
            random_systems,
        ),
        (
            "100 closed-loop runs reconstruct exactly",
            60,
            closed_loop_round_trip,
        ),
    ];
    let mut failed = 0;
    for (k, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = outcome.and_then(|()| {
            ensure(took < Duration::from_secs(*budget), || {
                format!("exceeded {budget} s")
            })
        });
        match outcome {
            Ok(()) => println!(
                "criterion {}: PASS  {name} ({:.2} s)",
                k + 1,
                took.as_secs_f64()
            ),
            Err(why) => {
                failed += 1;
                println!(
                    "criterion {}: FAIL  {name} ({:.2} s): {why}",
                    k + 1,
                    took.as_secs_f64()
                );
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
