//! Oracle sweeps behind the `selftest` command.
//!
//! Each suite compares an implementation against a direct reference and
//! stops at the first counterexample. The subjects are swappable so that
//! deliberately broken variants can show the suites are not vacuous.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::doma::{
    and_via_modadd, and_with_divisor, brute_force_dot, dot_via_modadd, BitVector, DomaDecomposition,
};
use crate::error::Result;
use crate::field::{mod_add, smallest_prime_above, FieldElement, Modulus};
use crate::protocol::session::run_session;
use crate::protocol::SessionConfig;
use crate::triot::{
    run_triot_instance_with, sender_mask_labels, ReceiverSharedState, SelectorInput, SenderFn,
    SenderInput,
};

/// A broken variant to run the suites against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sabotage {
    /// Reduce modulo `l + 1` instead of `l`.
    Doma,
    /// `gamma_1` uses `alpha_{m''}` instead of `alpha_{1 - m''}`.
    TriOt,
}

impl std::str::FromStr for Sabotage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "doma" => Ok(Sabotage::Doma),
            "triot" => Ok(Sabotage::TriOt),
            other => Err(format!(
                "unknown sabotage {other:?} (expected doma or triot)"
            )),
        }
    }
}

type AndFn = fn(&[BitVector]) -> Result<DomaDecomposition>;
type DotFn = fn(&BitVector, &BitVector) -> Result<u64>;

fn and_off_by_one(inputs: &[BitVector]) -> Result<DomaDecomposition> {
    and_with_divisor(inputs, inputs.len() as u64 + 1)
}

fn dot_off_by_one(a: &BitVector, b: &BitVector) -> Result<u64> {
    let d = and_off_by_one(&[a.clone(), b.clone()])?;
    Ok(d.and.count_ones() as u64)
}

fn labels_same_pad(
    input: &SenderInput,
    masked_choice: bool,
) -> Result<(FieldElement, FieldElement)> {
    let m = masked_choice as usize;
    Ok((
        mod_add(input.labels[0], input.pads[m])?,
        mod_add(input.labels[1], input.pads[m])?,
    ))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: u64,
    pub counterexample: Option<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelftestReport {
    pub suites: Vec<SuiteResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }

    pub fn first_counterexample(&self) -> Option<(&'static str, &str)> {
        self.suites
            .iter()
            .find_map(|s| s.counterexample.as_deref().map(|c| (s.name, c)))
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.suites {
            match &s.counterexample {
                None => writeln!(f, "PASS {:<12} {} cases", s.name, s.cases)?,
                Some(c) => writeln!(f, "FAIL {:<12} after {} cases: {c}", s.name, s.cases)?,
            }
        }
        let passed = self.suites.iter().filter(|s| s.passed()).count();
        write!(f, "{passed}/{} suites passed", self.suites.len())
    }
}

fn bitwise_and(inputs: &[BitVector]) -> BitVector {
    (0..inputs[0].len())
        .map(|i| inputs.iter().all(|v| v.get(i)))
        .collect()
}

fn check_and(subject: AndFn, inputs: &[BitVector]) -> Result<Option<String>> {
    let got = subject(inputs)?.and;
    let want = bitwise_and(inputs);
    Ok((got != want).then(|| {
        let shown: Vec<String> = inputs.iter().map(|v| v.to_string()).collect();
        format!("AND of [{}] gave {got}, expected {want}", shown.join(", "))
    }))
}

/// AND identity: exhaustive for every `(l, n)` with `2^{l n} <= 2^16`, then
/// `random` seeded cases with larger `l * n`.
pub fn doma_and_suite(subject: AndFn, random: u64, seed: u64) -> Result<SuiteResult> {
    let mut result = SuiteResult {
        name: "doma-and",
        cases: 0,
        counterexample: None,
    };
    for l in 2..=16usize {
        for n in 1..=16 / l {
            for index in 0..1u64 << (l * n) {
                let inputs: Vec<BitVector> = (0..l)
                    .map(|j| BitVector::from_index(index >> (j * n), n))
                    .collect();
                result.cases += 1;
                if let Some(c) = check_and(subject, &inputs)? {
                    result.counterexample = Some(c);
                    return Ok(result);
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        let l = rng.gen_range(2..=8usize);
        let n = rng.gen_range(16 / l + 1..=40);
        let inputs: Vec<BitVector> = (0..l)
            .map(|_| (0..n).map(|_| rng.gen_bool(0.7)).collect())
            .collect();
        result.cases += 1;
        if let Some(c) = check_and(subject, &inputs)? {
            result.counterexample = Some(c);
            return Ok(result);
        }
    }
    Ok(result)
}

/// Dot product identity: every pair of vectors of length `1..=max_n`.
pub fn doma_dot_suite(subject: DotFn, max_n: usize) -> Result<SuiteResult> {
    let mut result = SuiteResult {
        name: "doma-dot",
        cases: 0,
        counterexample: None,
    };
    for n in 1..=max_n {
        for index in 0..1u64 << (2 * n) {
            let a = BitVector::from_index(index, n);
            let b = BitVector::from_index(index >> n, n);
            let (got, want) = (subject(&a, &b)?, brute_force_dot(&a, &b)?);
            result.cases += 1;
            if got != want {
                result.counterexample = Some(format!("a={a} b={b}: got {got}, expected {want}"));
                return Ok(result);
            }
        }
    }
    Ok(result)
}

/// Oblivious transfer: every labels, pads, choice and mask over `F_q`.
pub fn triot_suite(mask_labels: SenderFn, modulus: Modulus) -> Result<SuiteResult> {
    let mut result = SuiteResult {
        name: "triot",
        cases: 0,
        counterexample: None,
    };
    let q = modulus.value();
    for digits in 0..q.pow(4) {
        let d = |k: u32| modulus.element(digits / q.pow(k) % q);
        let (labels, pads) = ([d(0), d(1)], [d(2), d(3)]);
        for (choice, shared_mask) in [(false, false), (false, true), (true, false), (true, true)] {
            let selector = SelectorInput {
                choice,
                shared_mask,
            };
            let sender = SenderInput { labels, pads };
            let receiver = ReceiverSharedState { pads, shared_mask };
            let (got, _) = run_triot_instance_with(&selector, &sender, &receiver, mask_labels)?;
            result.cases += 1;
            let want = labels[choice as usize];
            if got != want {
                result.counterexample = Some(format!(
                    "labels ({}, {}) pads ({}, {}) choice {} mask {}: received {got}, expected {want}",
                    labels[0], labels[1], pads[0], pads[1], choice as u8, shared_mask as u8
                ));
                return Ok(result);
            }
        }
    }
    Ok(result)
}

/// Random end-to-end sessions against the brute-force dot product.
pub fn session_suite(sessions: u64, seed: u64) -> Result<SuiteResult> {
    let mut result = SuiteResult {
        name: "end-to-end",
        cases: 0,
        counterexample: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..sessions {
        let n = rng.gen_range(1..=8usize);
        let pad = rng.gen_range(0..=n);
        let a: BitVector = (0..n).map(|_| rng.gen()).collect();
        let b: BitVector = (0..n).map(|_| rng.gen()).collect();
        let q = Modulus::new(smallest_prime_above(2 * n as u64 + rng.gen_range(0..20))?)?;
        let session_seed = rng.gen();
        let config = SessionConfig::seeded(n, pad, q, session_seed)?;
        let (y, _) = run_session(&a, &b, &config)?;
        let want = brute_force_dot(&a, &b)?;
        result.cases += 1;
        if y != want {
            result.counterexample = Some(format!(
                "a={a} b={b} q={q} pad={pad} seed={session_seed}: got {y}, expected {want}"
            ));
            return Ok(result);
        }
    }
    Ok(result)
}

/// All suites; `sabotage` swaps in a broken subject.
pub fn run_selftest(sabotage: Option<Sabotage>, seed: u64) -> Result<SelftestReport> {
    let (and, dot): (AndFn, DotFn) = match sabotage {
        Some(Sabotage::Doma) => (and_off_by_one, dot_off_by_one),
        _ => (and_via_modadd, dot_via_modadd),
    };
    let mask_labels: SenderFn = match sabotage {
        Some(Sabotage::TriOt) => labels_same_pad,
        _ => sender_mask_labels,
    };
    Ok(SelftestReport {
        suites: vec![
            doma_and_suite(and, 10_000, seed)?,
            doma_dot_suite(dot, 6)?,
            triot_suite(mask_labels, Modulus::new(5)?)?,
            session_suite(100, seed)?,
        ],
    })
}
