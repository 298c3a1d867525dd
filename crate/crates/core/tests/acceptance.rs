//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Expected values come from oracles written here, independent of the
//! library's own reference functions. Runtime limits and the enumeration cap
//! are pinned below. Run alone with `cargo test -p bimpc --test acceptance`.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bimpc::audit::{
    check_client_privacy, check_length_hiding, check_length_hiding_structural,
    check_master_privacy, render_report, standard_audit, AuditConfig, EnumerationOptions,
    LengthCase, Verdict,
};
use bimpc::doma::{and_via_modadd, brute_force_dot, dot_via_modadd};
use bimpc::harness::rng::Purpose;
use bimpc::harness::{Assignment, DumpMode, RandomnessSource, Scheduler, StreamKey};
use bimpc::protocol::{
    execute_session, run_session, Fault, PartyId, SessionConfig, SessionRun, StepTag,
};
use bimpc::triot::{run_triot_instance, ReceiverSharedState, SelectorInput, SenderInput};
use bimpc::{BitVector, Modulus};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

const LIMIT_DOMA_AND: Duration = Duration::from_secs(10);
const LIMIT_DOMA_DOT: Duration = Duration::from_secs(5);
const LIMIT_TRIOT: Duration = Duration::from_secs(1);
const LIMIT_END_TO_END: Duration = Duration::from_secs(60);
const LIMIT_MASTER_PRIVACY: Duration = Duration::from_secs(5 * 60);
const LIMIT_CLIENT_PRIVACY: Duration = Duration::from_secs(5 * 60);
const LIMIT_LENGTH_HIDING: Duration = Duration::from_secs(10 * 60);

const RANDOM_AND_CASES: u64 = 10_000;
const SEEDS_PER_PAIR: u64 = 20;
/// The (n=2, n'=0) enumeration at q=5 runs 5^13 * 2^4 = 156_250_000
/// sessions, above the library default.
const LENGTH_HIDING_CAP: u64 = 200_000_000;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
        }
    }
}

fn report(
    id: &str,
    name: &str,
    limit: Option<Duration>,
    elapsed: Duration,
    outcome: &Outcome,
) -> bool {
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let passed = outcome.passed && in_time;
    let limit = match limit {
        Some(l) => format!("limit {}s", l.as_secs()),
        None => "no limit".into(),
    };
    println!(
        "{} [{id}] {name}: {} ({:.2}s, {limit}{})",
        if passed { "PASS" } else { "FAIL" },
        outcome.detail,
        elapsed.as_secs_f64(),
        if in_time { "" } else { ", OVER TIME" }
    );
    passed
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn modulus(q: u64) -> Modulus {
    Modulus::new(q).expect("prime")
}

fn bits_of(mask: u64, n: usize) -> BitVector {
    BitVector::new((0..n).map(|i| mask >> i & 1 == 1).collect())
}

fn mask_of(v: &BitVector) -> u64 {
    v.iter()
        .enumerate()
        .fold(0, |acc, (i, b)| acc | (b as u64) << i)
}

fn is_prime(v: u64) -> bool {
    v >= 2
        && (2..v)
            .take_while(|d| d * d <= v)
            .all(|d| !v.is_multiple_of(d))
}

fn prime_above(v: u64) -> u64 {
    (v + 1..).find(|&p| is_prime(p)).unwrap()
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// `None` if the AND identity holds for these inputs.
fn and_mismatch(masks: &[u64], n: usize) -> Option<String> {
    let inputs: Vec<BitVector> = masks.iter().map(|&m| bits_of(m, n)).collect();
    let want = masks.iter().fold(u64::MAX, |acc, m| acc & m) & (u64::MAX >> (64 - n));
    let got = and_via_modadd(&inputs).map(|d| mask_of(&d.and));
    (got.as_ref().ok() != Some(&want))
        .then(|| format!("l={} n={n} masks={masks:?}: {got:?}", masks.len()))
}

/// AND identity against word-level `&`.
fn doma_and() -> Outcome {
    let mut exhaustive = 0u64;
    let mut failures = Vec::new();
    for l in 2..=16usize {
        for n in 1..=16 / l {
            for index in 0..1u64 << (l * n) {
                let masks: Vec<u64> = (0..l).map(|j| index >> (j * n) & ((1 << n) - 1)).collect();
                exhaustive += 1;
                failures.extend(and_mismatch(&masks, n));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xa11);
    for _ in 0..RANDOM_AND_CASES {
        let l = rng.gen_range(2..=8usize);
        let n = rng.gen_range(16 / l + 1..=64);
        // biased towards ones so the AND is not almost always zero
        let masks: Vec<u64> = (0..l)
            .map(|_| (0..n).fold(0u64, |acc, i| acc | (rng.gen_bool(0.8) as u64) << i))
            .collect();
        failures.extend(and_mismatch(&masks, n));
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "{exhaustive} exhaustive + {RANDOM_AND_CASES} random cases, {} failures{}",
            failures.len(),
            failures.first().map_or(String::new(), |f| format!(": {f}"))
        ),
    )
}

/// Dot product identity against popcount of `a & b`.
fn doma_dot() -> Outcome {
    let mut cases = 0u64;
    let mut failures = Vec::new();
    for n in 1..=6usize {
        for index in 0..1u64 << (2 * n) {
            let (ma, mb) = (index & ((1 << n) - 1), index >> n);
            let (a, b) = (bits_of(ma, n), bits_of(mb, n));
            let want = (ma & mb).count_ones() as u64;
            let got = (dot_via_modadd(&a, &b), brute_force_dot(&a, &b));
            cases += 1;
            if got != (Ok(want), Ok(want)) {
                failures.push(format!("a={a} b={b}: {got:?}, expected {want}"));
            }
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "{cases} pairs, {} failures {}",
            failures.len(),
            failures.first().map_or("", |s| s)
        ),
    )
}

/// Every labels, pads, choice and mask over F_5.
fn triot() -> Outcome {
    let q = modulus(5);
    let mut exact = 0u64;
    let mut cases = 0u64;
    let mut failures = Vec::new();
    for b0 in 0..5 {
        for b1 in 0..5 {
            for a0 in 0..5 {
                for a1 in 0..5 {
                    for choice in [false, true] {
                        for mask in [false, true] {
                            let labels = [q.element(b0), q.element(b1)];
                            let pads = [q.element(a0), q.element(a1)];
                            let got = run_triot_instance(
                                &SelectorInput {
                                    choice,
                                    shared_mask: mask,
                                },
                                &SenderInput { labels, pads },
                                &ReceiverSharedState {
                                    pads,
                                    shared_mask: mask,
                                },
                            )
                            .map(|(v, _)| v.value());
                            let want = if choice { b1 } else { b0 };
                            cases += 1;
                            if got == Ok(want) {
                                exact += 1;
                            } else if failures.len() < 3 {
                                failures.push(format!("beta=({b0},{b1}) alpha=({a0},{a1}) m'={choice} k^m={mask}: {got:?}"));
                            }
                        }
                    }
                }
            }
        }
    }
    Outcome::new(
        exact == 2500 && cases == 2500,
        format!("{exact}/{cases} exact {}", failures.join("; ")),
    )
}

fn trace_config() -> SessionConfig {
    let key = |purpose, index| StreamKey { purpose, index };
    let streams = BTreeMap::from([
        (key(Purpose::AdditiveMaskW1, 0), vec![3, 5]),
        (key(Purpose::PadW1, 0), vec![4]),
        (key(Purpose::AdditiveMaskW2, 0), vec![2, 6]),
        (key(Purpose::PadW2, 0), vec![1]),
        (key(Purpose::XorMask, 0), vec![1, 0]),
        (key(Purpose::LabelMask, 0), vec![2, 3]),
        (key(Purpose::SharedPad, 0), vec![5]),
        (key(Purpose::OtChoiceMask, 0), vec![1]),
        (key(Purpose::OtChoiceMask, 1), vec![0]),
        (key(Purpose::OtPads, 0), vec![4, 2]),
        (key(Purpose::OtPads, 1), vec![6, 1]),
    ]);
    let source = RandomnessSource::enumerated(Assignment::from_streams(streams));
    SessionConfig::new(2, 1, modulus(7), source).expect("valid trace config")
}

/// The hand-traced session, checked at every listed intermediate value.
fn check_trace() -> Vec<String> {
    let run = match execute_session(
        &bits_of(0b01, 2),
        &bits_of(0b11, 2),
        &trace_config(),
        Scheduler::Fifo,
    ) {
        Ok(r) => r,
        Err(e) => return vec![format!("trace session failed: {e}")],
    };
    let payload = |tag: StepTag, from: PartyId, ot: Option<u32>| -> Vec<u8> {
        run.transcript
            .messages()
            .find(|m| m.tag == tag && m.from == from && m.ot_index == ot)
            .map(|m| m.payload.clone())
            .unwrap_or_default()
    };
    let mut wrong = Vec::new();
    let mut expect = |what: &str, got: Vec<u64>, want: &[u64]| {
        if got != want {
            wrong.push(format!("{what}: got {got:?}, expected {want:?}"));
        }
    };
    let widen = |v: Vec<u8>| v.into_iter().map(u64::from).collect::<Vec<_>>();
    expect(
        "s''_1",
        widen(payload(StepTag::AdditiveShare, PartyId::W1, None)),
        &[4, 5, 4],
    );
    expect(
        "s''_2",
        widen(payload(StepTag::AdditiveShare, PartyId::W2, None)),
        &[3, 0, 1],
    );
    let m = &run.master;
    expect(
        "s''",
        m.summed_shares()
            .map(|v| v.values().to_vec())
            .unwrap_or_default(),
        &[0, 5, 5],
    );
    expect(
        "b xor k_2^m",
        widen(payload(StepTag::XorMaskedInput, PartyId::W2, None)),
        &[0, 1],
    );
    expect(
        "m'",
        run.w1
            .selector_bits()
            .map(|b| b.iter().map(u64::from).collect())
            .unwrap_or_default(),
        &[1, 1],
    );
    let labels: Vec<[u64; 2]> = (0..2)
        .map(|i| run.w2.sender_input(i).labels.map(|l| l.value()))
        .collect();
    expect("beta_0", labels.iter().map(|l| l[0]).collect(), &[3, 3]);
    expect("beta_1", labels.iter().map(|l| l[1]).collect(), &[2, 4]);
    expect(
        "gamma[1]",
        widen(payload(StepTag::OtMaskedLabels, PartyId::W2, Some(0))),
        &[0, 4],
    );
    expect(
        "gamma[2]",
        widen(payload(StepTag::OtMaskedLabels, PartyId::W2, Some(1))),
        &[4, 3],
    );
    expect(
        "delivery[1]",
        widen(payload(StepTag::OtDelivery, PartyId::W1, Some(0))),
        &[4],
    );
    expect(
        "delivery[2]",
        widen(payload(StepTag::OtDelivery, PartyId::W1, Some(1))),
        &[3],
    );
    expect("m + k", m.xor_values().values().to_vec(), &[2, 4]);
    expect(
        "p^m",
        widen(payload(StepTag::PadVector, PartyId::W1, None)),
        &[5],
    );
    expect("m''", m.padded_xor_vector().values().to_vec(), &[2, 4, 5]);
    expect(
        "k'_1",
        widen(payload(StepTag::KeySum, PartyId::W1, None)),
        &[0],
    );
    expect(
        "k'_2",
        widen(payload(StepTag::KeySum, PartyId::W2, None)),
        &[4],
    );
    let d: Vec<u64> = match m.summed_shares() {
        Some(s) => s
            .values()
            .iter()
            .zip(m.padded_xor_vector().values())
            .map(|(x, y)| (x + 7 - y) % 7)
            .collect(),
        None => Vec::new(),
    };
    expect("d''", d.clone(), &[5, 1, 0]);
    expect("sum d''", vec![d.iter().sum::<u64>() % 7], &[6]);
    expect(
        "sum d'' - k'_1 - k'_2",
        m.reconstruction_sum()
            .map(|v| vec![v.value()])
            .unwrap_or_default(),
        &[2],
    );
    expect(
        "y",
        run.outcome.as_ref().map(|&y| vec![y]).unwrap_or_default(),
        &[1],
    );
    wrong
}

/// `sum(s'' - m'') - k'_1 - k'_2 == 2y (mod q)` recomputed from the master's
/// holdings.
fn cancellation_holds(run: &SessionRun, y: u64, q: u64) -> bool {
    let m = &run.master;
    let (Some(s), (Some(k1), Some(k2))) = (m.summed_shares(), m.key_sums()) else {
        return false;
    };
    let padded = m.padded_xor_vector();
    if s.len() != padded.len() {
        return false;
    }
    let d: u64 = s
        .values()
        .iter()
        .zip(padded.values())
        .map(|(x, y)| (x + q - y) % q)
        .sum::<u64>()
        % q;
    (d + 2 * q - k1.value() - k2.value()) % q == 2 * y % q
}

struct EndToEnd {
    sessions: u64,
    wrong_output: Vec<String>,
    trace: Vec<String>,
    cancellation_checked: u64,
    cancellation_broken: Vec<String>,
}

fn end_to_end() -> EndToEnd {
    let mut r = EndToEnd {
        sessions: 1,
        wrong_output: Vec::new(),
        trace: check_trace(),
        cancellation_checked: 0,
        cancellation_broken: Vec::new(),
    };
    if let Ok(run) = execute_session(
        &bits_of(0b01, 2),
        &bits_of(0b11, 2),
        &trace_config(),
        Scheduler::Fifo,
    ) {
        r.cancellation_checked += 1;
        if !cancellation_holds(&run, 1, 7) {
            r.cancellation_broken.push("trace".into());
        }
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(0xe2e);
    for n in 1..=6usize {
        let q = prime_above(2 * n as u64);
        for index in 0..1u64 << (2 * n) {
            let (ma, mb) = (index & ((1 << n) - 1), index >> n);
            let (a, b) = (bits_of(ma, n), bits_of(mb, n));
            let want = (ma & mb).count_ones() as u64;
            for s in 0..SEEDS_PER_PAIR {
                let seed: u64 = seeds.gen();
                let pad = (s % 3) as usize;
                let label = || format!("n={n} a={a} b={b} pad={pad} seed={seed}");
                r.sessions += 1;
                let config = match SessionConfig::seeded(n, pad, modulus(q), seed) {
                    Ok(c) => c,
                    Err(e) => {
                        r.wrong_output.push(format!("{}: {e}", label()));
                        continue;
                    }
                };
                match run_session(&a, &b, &config) {
                    Ok((y, _)) if y == want => {}
                    other => r.wrong_output.push(format!(
                        "{}: {:?}, expected {want}",
                        label(),
                        other.map(|v| v.0)
                    )),
                }
                match execute_session(&a, &b, &config, Scheduler::Fifo) {
                    Ok(run) => {
                        r.cancellation_checked += 1;
                        if !cancellation_holds(&run, want, q) {
                            r.cancellation_broken.push(label());
                        }
                    }
                    Err(e) => r.cancellation_broken.push(format!("{}: {e}", label())),
                }
            }
        }
    }
    r
}

fn verdict_line(v: &Verdict) -> String {
    let mut s = format!("{} {}", if v.passed { "pass" } else { "FAIL" }, v.check);
    if let Some(w) = &v.witness {
        s.push_str(&format!(" (witness {w})"));
    }
    s
}

/// Honest checks must pass and sabotaged ones must fail.
fn privacy(
    check: fn(&AuditConfig, &EnumerationOptions) -> bimpc::Result<Verdict>,
    sabotage: Fault,
) -> Outcome {
    let options = EnumerationOptions::default();
    let mut passed = true;
    let mut lines = Vec::new();
    for pad in [0, 1] {
        let config = AuditConfig::new(1, pad, modulus(3));
        match (
            check(&config, &options),
            check(&config.with_fault(sabotage), &options),
        ) {
            (Ok(honest), Ok(sabotaged)) => {
                passed &= honest.passed && !sabotaged.passed;
                lines.push(verdict_line(&honest));
                lines.push(format!(
                    "sabotage {:?} {}",
                    sabotage,
                    if sabotaged.passed {
                        "NOT detected"
                    } else {
                        "detected"
                    }
                ));
            }
            (Err(e), _) | (_, Err(e)) => {
                passed = false;
                lines.push(format!("error: {e}"));
            }
        }
    }
    Outcome::new(passed, lines.join("; "))
}

fn length_hiding() -> Outcome {
    let mut passed = true;
    let mut lines = Vec::new();
    let q7 = modulus(7);
    let structural_pairs = [
        (
            LengthCase::zeros(AuditConfig::new(2, 3, q7)),
            LengthCase::zeros(AuditConfig::new(3, 2, q7)),
        ),
        (
            LengthCase {
                config: AuditConfig::new(2, 3, q7),
                a: bits_of(0b11, 2),
                b: bits_of(0b01, 2),
            },
            LengthCase {
                config: AuditConfig::new(3, 2, q7),
                a: bits_of(0b101, 3),
                b: bits_of(0b110, 3),
            },
        ),
    ];
    for (left, right) in &structural_pairs {
        match check_length_hiding_structural(left, right) {
            Ok(v) => {
                passed &= v.passed;
                lines.push(format!("{} [{}]", verdict_line(&v), v.notes.join(", ")));
            }
            Err(e) => {
                passed = false;
                lines.push(format!("error: {e}"));
            }
        }
    }
    let options = EnumerationOptions {
        cap: LENGTH_HIDING_CAP,
        jobs: Some(jobs()),
    };
    let q5 = modulus(5);
    let (left, right) = (
        LengthCase::zeros(AuditConfig::new(1, 1, q5)),
        LengthCase::zeros(AuditConfig::new(2, 0, q5)),
    );
    match check_length_hiding(&left, &right, &options) {
        Ok(v) => {
            passed &= v.passed;
            lines.push(format!("{} [{}]", verdict_line(&v), v.notes.join(", ")));
        }
        Err(e) => {
            passed = false;
            lines.push(format!("error: {e}"));
        }
    }
    Outcome::new(passed, lines.join("; "))
}

fn determinism() -> Outcome {
    let mut problems = Vec::new();
    let (a, b) = (bits_of(0b101101, 6), bits_of(0b100111, 6));
    for seed in [0u64, 1, 0xdead_beef] {
        let run = || {
            let config = SessionConfig::seeded(6, 3, modulus(13), seed)?;
            let (y, t) = run_session(&a, &b, &config)?;
            let bytes: Vec<Vec<u8>> = t.messages().map(|m| m.payload.clone()).collect();
            Ok::<_, bimpc::Error>((
                y,
                t.dump(DumpMode::Debug),
                t.dump(DumpMode::Redacted),
                bytes,
            ))
        };
        match (run(), run()) {
            (Ok(x), Ok(y)) if x == y => {}
            (x, y) => problems.push(format!(
                "seed {seed}: {:?} vs {:?}",
                x.map(|v| v.0),
                y.map(|v| v.0)
            )),
        }
    }
    let config = AuditConfig::new(1, 1, modulus(3));
    let reports: Vec<String> = [None, None, Some(jobs().max(2))]
        .into_iter()
        .map(|jobs| {
            let options = EnumerationOptions {
                jobs,
                ..EnumerationOptions::default()
            };
            standard_audit(&config, &options)
                .map_or_else(|e| format!("error: {e}"), |v| render_report(&v))
        })
        .collect();
    if reports.iter().any(|r| r != &reports[0]) {
        problems.push("audit reports differ between runs".into());
    }
    Outcome::new(
        problems.is_empty(),
        format!(
            "3 seeds x 2 runs, 3 audit reports ({} bytes) {}",
            reports[0].len(),
            if problems.is_empty() {
                "identical".into()
            } else {
                problems.join("; ")
            }
        ),
    )
}

fn main() -> ExitCode {
    let mut results = Vec::new();

    let (o, t) = timed(doma_and);
    results.push(report(
        "1",
        "DoMA AND identity",
        Some(LIMIT_DOMA_AND),
        t,
        &o,
    ));
    let (o, t) = timed(doma_dot);
    results.push(report("2", "DoMA dot product", Some(LIMIT_DOMA_DOT), t, &o));
    let (o, t) = timed(triot);
    results.push(report("3", "triOT correctness", Some(LIMIT_TRIOT), t, &o));

    let (e2e, t) = timed(end_to_end);
    let o = Outcome::new(
        e2e.trace.is_empty() && e2e.wrong_output.is_empty(),
        format!(
            "trace {}, {} sessions, {} wrong{}",
            if e2e.trace.is_empty() {
                "exact".into()
            } else {
                e2e.trace.join("; ")
            },
            e2e.sessions,
            e2e.wrong_output.len(),
            e2e.wrong_output
                .first()
                .map_or(String::new(), |s| format!(": {s}"))
        ),
    );
    results.push(report(
        "4",
        "end-to-end correctness",
        Some(LIMIT_END_TO_END),
        t,
        &o,
    ));
    let o = Outcome::new(
        e2e.cancellation_broken.is_empty() && e2e.cancellation_checked == e2e.sessions,
        format!(
            "{}/{} sessions checked, {} broken{}",
            e2e.cancellation_checked,
            e2e.sessions,
            e2e.cancellation_broken.len(),
            e2e.cancellation_broken
                .first()
                .map_or(String::new(), |s| format!(": {s}"))
        ),
    );
    results.push(report("5", "mask cancellation", None, Duration::ZERO, &o));

    let (o, t) = timed(|| privacy(check_master_privacy, Fault::KeySumOmitsLabelMask));
    results.push(report(
        "6",
        "master privacy",
        Some(LIMIT_MASTER_PRIVACY),
        t,
        &o,
    ));
    let (o, t) = timed(|| privacy(check_client_privacy, Fault::ZeroXorMask));
    results.push(report(
        "7",
        "client privacy",
        Some(LIMIT_CLIENT_PRIVACY),
        t,
        &o,
    ));
    let (o, t) = timed(length_hiding);
    results.push(report(
        "8",
        "length hiding",
        Some(LIMIT_LENGTH_HIDING),
        t,
        &o,
    ));
    let (o, t) = timed(determinism);
    results.push(report("9", "determinism", None, t, &o));

    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
