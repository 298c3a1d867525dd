//! Exact privacy checks by exhaustive enumeration of session randomness.
//!
//! A dry run in recording mode discovers every random draw of a
//! configuration. Each draw is a digit (radix `q` for field elements, 2 for
//! bits); enumerating all digit strings replays every possible randomness
//! assignment through the real party state machines, and the resulting views
//! are counted exactly. Distributions are compared with integer arithmetic
//! only.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use rayon::prelude::*;

use crate::doma::{brute_force_dot, BitVector};
use crate::error::{Error, Result};
use crate::field::Modulus;
use crate::harness::network::Scheduler;
use crate::harness::rng::{Assignment, RandomnessSource, Recorder, StreamKey};
use crate::harness::transcript::project_view;
use crate::protocol::session::{execute_session, SessionRun};
use crate::protocol::{Fault, PartyId, SessionConfig};

pub const DEFAULT_COST_CAP: u64 = 100_000_000;

/// Parameters of an enumerable configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuditConfig {
    pub n: usize,
    pub pad_len: usize,
    pub modulus: Modulus,
    pub fault: Option<Fault>,
}

impl AuditConfig {
    pub fn new(n: usize, pad_len: usize, modulus: Modulus) -> Self {
        AuditConfig {
            n,
            pad_len,
            modulus,
            fault: None,
        }
    }

    pub fn with_fault(mut self, fault: Fault) -> Self {
        self.fault = Some(fault);
        self
    }

    fn session(&self, randomness: RandomnessSource) -> Result<SessionConfig> {
        let config = SessionConfig::new(self.n, self.pad_len, self.modulus, randomness)?;
        Ok(match self.fault {
            Some(f) => config.with_fault(f),
            None => config,
        })
    }
}

impl fmt::Display for AuditConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} pad={} q={}", self.n, self.pad_len, self.modulus)?;
        if let Some(fault) = self.fault {
            write!(f, " fault={fault:?}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EnumerationOptions {
    pub cap: u64,
    /// Worker threads; `None` runs on the calling thread.
    pub jobs: Option<usize>,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions {
            cap: DEFAULT_COST_CAP,
            jobs: None,
        }
    }
}

/// Every random draw of one configuration, in replay order.
#[derive(Debug, Clone)]
pub struct RandomnessLayout {
    template: Assignment,
    streams: BTreeMap<StreamKey, Vec<u32>>,
    radices: Vec<u64>,
}

impl RandomnessLayout {
    /// Discovers the layout with a dry run on all-zero inputs.
    pub fn discover(config: &AuditConfig) -> Result<Self> {
        let recorder = Arc::new(Recorder::default());
        let session = config.session(RandomnessSource::Recording(recorder.clone()))?;
        let zeros = BitVector::zeros(config.n);
        execute_session(&zeros, &zeros, &session, Scheduler::Fifo)?;
        let streams = recorder.draws();
        let radices: Vec<u64> = streams
            .values()
            .flatten()
            .map(|&bits| if bits == 1 { 2 } else { config.modulus.value() })
            .collect();
        let template = Assignment::from_streams(
            streams
                .iter()
                .map(|(k, widths)| (*k, vec![0; widths.len()]))
                .collect(),
        );
        Ok(RandomnessLayout {
            template,
            streams,
            radices,
        })
    }

    pub fn streams(&self) -> &BTreeMap<StreamKey, Vec<u32>> {
        &self.streams
    }

    /// Number of field-valued draws.
    pub fn field_count(&self) -> usize {
        self.radices.iter().filter(|&&r| r != 2).count()
    }

    pub fn bit_count(&self) -> usize {
        self.radices.iter().filter(|&&r| r == 2).count()
    }

    /// `q^{field draws} * 2^{bit draws}`, or `None` past `u128`.
    pub fn cost(&self) -> Option<u128> {
        self.radices
            .iter()
            .try_fold(1u128, |acc, &r| acc.checked_mul(r as u128))
    }

    fn cost_label(&self, modulus: Modulus) -> String {
        let exact = self
            .cost()
            .map_or_else(|| "overflow".to_string(), |c| c.to_string());
        format!(
            "{}^{} * 2^{} = {exact}",
            modulus,
            self.field_count(),
            self.bit_count()
        )
    }

    /// Fails with [`Error::CostExceeded`] if the enumeration is over `cap`.
    pub fn checked_cost(&self, modulus: Modulus, cap: u64) -> Result<u64> {
        match self.cost() {
            Some(c) if c <= cap as u128 => Ok(c as u64),
            _ => Err(Error::CostExceeded {
                cost: self.cost_label(modulus),
                cap,
            }),
        }
    }

    /// Digits of assignment number `index`, least significant first.
    fn digits(&self, mut index: u64) -> Vec<u64> {
        self.radices
            .iter()
            .map(|&r| {
                let d = index % r;
                index /= r;
                d
            })
            .collect()
    }

    fn increment(&self, digits: &mut [u64]) {
        for (d, &r) in digits.iter_mut().zip(&self.radices) {
            *d += 1;
            if *d < r {
                return;
            }
            *d = 0;
        }
    }

    pub fn assignment(&self, index: u64) -> Result<Assignment> {
        Assignment::with_values(&self.template, self.digits(index))
    }
}

/// Which part of a finished session is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewKind {
    /// Messages received plus pairwise randomness held.
    Party(PartyId),
    /// The values the master ends up holding, without message framing or
    /// OT randomness: both shares, the padded XOR vector, both key sums.
    MasterHoldings,
}

impl fmt::Display for ViewKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViewKind::Party(p) => write!(f, "view of {p}"),
            ViewKind::MasterHoldings => f.write_str("master holdings"),
        }
    }
}

fn view_bytes(run: &SessionRun, kind: ViewKind) -> Result<Vec<u8>> {
    match kind {
        ViewKind::Party(p) => Ok(project_view(&run.transcript, p)?.canonical_bytes()),
        ViewKind::MasterHoldings => {
            let m = &run.master;
            let (s1, s2) = m.shares();
            let (k1, k2) = m.key_sums();
            let missing = || Error::protocol("master is missing a share or key sum");
            let mut out = Vec::with_capacity(64);
            s1.ok_or_else(missing)?.write_le(&mut out);
            s2.ok_or_else(missing)?.write_le(&mut out);
            m.padded_xor_vector().write_le(&mut out);
            k1.ok_or_else(missing)?.write_le(&mut out);
            k2.ok_or_else(missing)?.write_le(&mut out);
            Ok(out)
        }
    }
}

/// Exact distribution: view bytes to the number of assignments producing it.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ViewDistribution {
    pub total: u64,
    pub counts: BTreeMap<Vec<u8>, u64>,
}

impl ViewDistribution {
    pub fn support(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, view: &[u8]) -> u64 {
        self.counts.get(view).copied().unwrap_or(0)
    }

    /// First view whose probability differs, compared by cross
    /// multiplication so that totals may differ.
    pub fn first_difference(&self, other: &ViewDistribution) -> Option<Vec<u8>> {
        let differs = |v: &Vec<u8>| {
            self.count(v) as u128 * other.total as u128
                != other.count(v) as u128 * self.total as u128
        };
        self.counts
            .keys()
            .chain(other.counts.keys())
            .find(|v| differs(v))
            .cloned()
    }

    pub fn same_as(&self, other: &ViewDistribution) -> bool {
        self.first_difference(other).is_none()
    }
}

const CHUNKS_PER_JOB: u64 = 64;

/// Exact view distribution of `kind` over every randomness assignment.
pub fn enumerate_views(
    a: &BitVector,
    b: &BitVector,
    config: &AuditConfig,
    kind: ViewKind,
    options: &EnumerationOptions,
) -> Result<ViewDistribution> {
    let layout = RandomnessLayout::discover(config)?;
    enumerate_with_layout(a, b, config, &layout, kind, options)
}

fn enumerate_with_layout(
    a: &BitVector,
    b: &BitVector,
    config: &AuditConfig,
    layout: &RandomnessLayout,
    kind: ViewKind,
    options: &EnumerationOptions,
) -> Result<ViewDistribution> {
    let total = layout.checked_cost(config.modulus, options.cap)?;
    let jobs = options.jobs.unwrap_or(1).max(1) as u64;
    let chunk = total.div_ceil(jobs * CHUNKS_PER_JOB).max(1);
    let chunks = total.div_ceil(chunk);

    let run_chunk = |c: u64| -> Result<HashMap<Vec<u8>, u64>> {
        let start = c * chunk;
        let end = (start + chunk).min(total);
        let mut digits = layout.digits(start);
        let mut counts: HashMap<Vec<u8>, u64> = HashMap::new();
        for _ in start..end {
            let assignment = Assignment::with_values(&layout.template, digits.clone())?;
            let session = config.session(RandomnessSource::enumerated(assignment))?;
            let run = execute_session(a, b, &session, Scheduler::Fifo)?;
            let key = view_bytes(&run, kind)?;
            match counts.get_mut(&key) {
                Some(c) => *c += 1,
                None => {
                    counts.insert(key, 1);
                }
            }
            layout.increment(&mut digits);
        }
        Ok(counts)
    };
    let merge = |mut x: HashMap<Vec<u8>, u64>, y: HashMap<Vec<u8>, u64>| {
        for (k, v) in y {
            *x.entry(k).or_default() += v;
        }
        x
    };

    let merged = match options.jobs {
        None | Some(1) => (0..chunks)
            .map(run_chunk)
            .try_fold(HashMap::new(), |acc, r| Ok::<_, Error>(merge(acc, r?)))?,
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config(format!("cannot start {n} workers: {e}")))?;
            pool.install(|| {
                (0..chunks)
                    .into_par_iter()
                    .map(run_chunk)
                    .try_reduce(HashMap::new, |x, y| Ok(merge(x, y)))
            })?
        }
    };
    let counts: BTreeMap<Vec<u8>, u64> = merged.into_iter().collect();
    debug_assert_eq!(counts.values().sum::<u64>(), total);
    Ok(ViewDistribution { total, counts })
}

/// Two inputs whose views are distinguishable, with the view that tells them
/// apart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub left: String,
    pub right: String,
    pub view: Vec<u8>,
    pub left_count: u64,
    pub left_total: u64,
    pub right_count: u64,
    pub right_total: u64,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} vs {}: view {} has probability {}/{} vs {}/{}",
            self.left,
            self.right,
            hex::encode(&self.view),
            self.left_count,
            self.left_total,
            self.right_count,
            self.right_total
        )
    }
}

fn witness(
    left: String,
    dl: &ViewDistribution,
    right: String,
    dr: &ViewDistribution,
    view: Vec<u8>,
) -> Witness {
    Witness {
        left,
        right,
        left_count: dl.count(&view),
        left_total: dl.total,
        right_count: dr.count(&view),
        right_total: dr.total,
        view,
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub check: String,
    pub passed: bool,
    /// Sessions executed.
    pub enumerations: u64,
    pub notes: Vec<String>,
    pub witness: Option<Witness>,
}

impl Verdict {
    fn new(check: impl Into<String>) -> Self {
        Verdict {
            check: check.into(),
            passed: true,
            enumerations: 0,
            notes: Vec::new(),
            witness: None,
        }
    }

    fn fail(&mut self, w: Witness) {
        self.passed = false;
        if self.witness.is_none() {
            self.witness = Some(w);
        }
    }
}

fn pair_label(a: &BitVector, b: &BitVector) -> String {
    format!("(a={a}, b={b})")
}

fn all_input_pairs(n: usize) -> Vec<(BitVector, BitVector)> {
    (0..1u64 << (2 * n))
        .map(|i| {
            (
                BitVector::from_index(i & ((1 << n) - 1), n),
                BitVector::from_index(i >> n, n),
            )
        })
        .collect()
}

/// Each client's view must have the same distribution for every input pair.
pub fn check_client_privacy(config: &AuditConfig, options: &EnumerationOptions) -> Result<Verdict> {
    let layout = RandomnessLayout::discover(config)?;
    layout.checked_cost(config.modulus, options.cap)?;
    let mut verdict = Verdict::new(format!("client privacy [{config}]"));
    let pairs = all_input_pairs(config.n);
    for client in [PartyId::W1, PartyId::W2] {
        let kind = ViewKind::Party(client);
        let mut reference: Option<(String, ViewDistribution)> = None;
        let mut consistent = true;
        for (a, b) in &pairs {
            let d = enumerate_with_layout(a, b, config, &layout, kind, options)?;
            verdict.enumerations += d.total;
            match &reference {
                None => reference = Some((pair_label(a, b), d)),
                Some((label, r)) => {
                    if let Some(view) = r.first_difference(&d) {
                        consistent = false;
                        verdict.fail(witness(
                            format!("{client} {label}"),
                            r,
                            pair_label(a, b),
                            &d,
                            view,
                        ));
                    }
                }
            }
        }
        verdict.notes.push(format!(
            "{client}: {} over {} input pairs",
            if consistent { "identical" } else { "differs" },
            pairs.len()
        ));
    }
    Ok(verdict)
}

/// Within every class of inputs with equal `y`, the master's view must have
/// the same distribution.
pub fn check_master_privacy(config: &AuditConfig, options: &EnumerationOptions) -> Result<Verdict> {
    let layout = RandomnessLayout::discover(config)?;
    layout.checked_cost(config.modulus, options.cap)?;
    let mut verdict = Verdict::new(format!("master privacy [{config}]"));
    let mut classes: BTreeMap<u64, Vec<(BitVector, BitVector)>> = BTreeMap::new();
    for (a, b) in all_input_pairs(config.n) {
        classes
            .entry(brute_force_dot(&a, &b)?)
            .or_default()
            .push((a, b));
    }
    for (y, members) in &classes {
        let mut reference: Option<(String, ViewDistribution)> = None;
        let mut consistent = true;
        for (a, b) in members {
            let d = enumerate_with_layout(
                a,
                b,
                config,
                &layout,
                ViewKind::Party(PartyId::Master),
                options,
            )?;
            verdict.enumerations += d.total;
            match &reference {
                None => reference = Some((pair_label(a, b), d)),
                Some((label, r)) => {
                    if let Some(view) = r.first_difference(&d) {
                        consistent = false;
                        verdict.fail(witness(label.clone(), r, pair_label(a, b), &d, view));
                    }
                }
            }
        }
        verdict.notes.push(format!(
            "y={y}: {} over {} input pairs",
            if consistent { "identical" } else { "differs" },
            members.len()
        ));
    }
    Ok(verdict)
}

/// Inputs and configuration for one side of a length-hiding comparison.
#[derive(Debug, Clone)]
pub struct LengthCase {
    pub config: AuditConfig,
    pub a: BitVector,
    pub b: BitVector,
}

impl LengthCase {
    /// All-zero inputs, so `y = 0`.
    pub fn zeros(config: AuditConfig) -> Self {
        LengthCase {
            a: BitVector::zeros(config.n),
            b: BitVector::zeros(config.n),
            config,
        }
    }

    fn label(&self) -> String {
        format!("[{}] {}", self.config, pair_label(&self.a, &self.b))
    }
}

/// Structural shape of the master's view: sender and wire length of every
/// message it receives.
fn master_shape(case: &LengthCase, seed: u64) -> Result<Vec<(PartyId, usize)>> {
    let session = case.config.session(RandomnessSource::seeded(seed))?;
    let run = execute_session(&case.a, &case.b, &session, Scheduler::Fifo)?;
    let view = project_view(&run.transcript, PartyId::Master)?;
    Ok(view
        .messages
        .iter()
        .map(|m| (m.from, m.wire_len()))
        .collect())
}

fn check_length_preconditions(left: &LengthCase, right: &LengthCase) -> Result<()> {
    let (l, r) = (&left.config, &right.config);
    if l.n + l.pad_len != r.n + r.pad_len {
        return Err(Error::config(format!(
            "padded lengths differ: {} vs {}",
            l.n + l.pad_len,
            r.n + r.pad_len
        )));
    }
    if l.modulus != r.modulus {
        return Err(Error::config(
            "length-hiding configurations use different moduli",
        ));
    }
    if l.modulus.value() <= 2 * l.n.max(r.n) as u64 {
        return Err(Error::config(format!(
            "modulus {} must exceed twice the larger input length",
            l.modulus
        )));
    }
    for case in [left, right] {
        if case.a.len() != case.config.n || case.b.len() != case.config.n {
            return Err(Error::input(format!(
                "inputs of {} do not have length n",
                case.label()
            )));
        }
    }
    Ok(())
}

/// Message count and byte lengths seen by the master must match.
pub fn check_length_hiding_structural(left: &LengthCase, right: &LengthCase) -> Result<Verdict> {
    check_length_preconditions(left, right)?;
    let mut verdict = Verdict::new(format!(
        "length hiding, structural [{}] vs [{}]",
        left.config, right.config
    ));
    let (sl, sr) = (master_shape(left, 0)?, master_shape(right, 1)?);
    verdict.enumerations = 2;
    verdict.notes.push(format!(
        "master receives {} vs {} messages",
        sl.len(),
        sr.len()
    ));
    if sl != sr {
        verdict.passed = false;
        let at = sl
            .iter()
            .zip(&sr)
            .position(|(x, y)| x != y)
            .unwrap_or(sl.len().min(sr.len()));
        verdict
            .notes
            .push(format!("first mismatch at master message {at}"));
    }
    Ok(verdict)
}

/// Structural check plus exact equality of the master-holdings
/// distributions. The two cases must have equal `y`.
pub fn check_length_hiding(
    left: &LengthCase,
    right: &LengthCase,
    options: &EnumerationOptions,
) -> Result<Verdict> {
    let mut verdict = check_length_hiding_structural(left, right)?;
    verdict.check = format!("length hiding [{}] vs [{}]", left.config, right.config);
    let (yl, yr) = (
        brute_force_dot(&left.a, &left.b)?,
        brute_force_dot(&right.a, &right.b)?,
    );
    if yl != yr {
        return Err(Error::input(format!(
            "length-hiding inputs have different outputs {yl} and {yr}"
        )));
    }
    let dl = enumerate_views(
        &left.a,
        &left.b,
        &left.config,
        ViewKind::MasterHoldings,
        options,
    )?;
    let dr = enumerate_views(
        &right.a,
        &right.b,
        &right.config,
        ViewKind::MasterHoldings,
        options,
    )?;
    verdict.enumerations += dl.total + dr.total;
    verdict.notes.push(format!(
        "master holdings: support {} of {} vs support {} of {}",
        dl.support(),
        dl.total,
        dr.support(),
        dr.total
    ));
    if let Some(view) = dl.first_difference(&dr) {
        verdict.fail(witness(left.label(), &dl, right.label(), &dr, view));
    }
    Ok(verdict)
}

/// Deterministic text report of several verdicts.
pub fn render_report(verdicts: &[Verdict]) -> String {
    let mut out = String::from("# bimpc audit report v1\n");
    for v in verdicts {
        let _ = writeln!(out, "check: {}", v.check);
        let _ = writeln!(out, "  result: {}", if v.passed { "PASS" } else { "FAIL" });
        let _ = writeln!(out, "  sessions: {}", v.enumerations);
        for note in &v.notes {
            let _ = writeln!(out, "  note: {note}");
        }
        if let Some(w) = &v.witness {
            let _ = writeln!(out, "  witness: {w}");
        }
    }
    let passed = verdicts.iter().filter(|v| v.passed).count();
    let _ = writeln!(out, "summary: {passed}/{} checks passed", verdicts.len());
    out
}

/// Marks a check run against a sabotaged configuration: it passes only if
/// the underlying check fails.
fn control(mut v: Verdict) -> Verdict {
    v.check = format!("control, must fail: {}", v.check);
    v.passed = !v.passed;
    v.notes.push(if v.passed {
        "sabotaged run detected".into()
    } else {
        "sabotaged run NOT detected".into()
    });
    v
}

/// Other `(n, n')` splits of the same padded length that `q` admits.
pub fn alternative_splits(config: &AuditConfig) -> Vec<AuditConfig> {
    let total = config.n + config.pad_len;
    (1..=total)
        .filter(|&n| n != config.n && config.modulus.value() > 2 * n as u64)
        .map(|n| AuditConfig {
            n,
            pad_len: total - n,
            ..*config
        })
        .collect()
}

/// Client privacy, master privacy and length hiding for `config`, each
/// followed by its negative control.
pub fn standard_audit(config: &AuditConfig, options: &EnumerationOptions) -> Result<Vec<Verdict>> {
    let honest = AuditConfig {
        fault: None,
        ..*config
    };
    let mut verdicts = vec![
        check_client_privacy(&honest, options)?,
        control(check_client_privacy(
            &honest.with_fault(Fault::ZeroXorMask),
            options,
        )?),
        check_master_privacy(&honest, options)?,
        control(check_master_privacy(
            &honest.with_fault(Fault::KeySumOmitsLabelMask),
            options,
        )?),
    ];
    let alternatives = alternative_splits(&honest);
    if alternatives.is_empty() {
        let mut v = Verdict::new(format!("length hiding [{honest}]"));
        v.notes.push(format!(
            "no other split of length {} admitted by q={}; nothing to compare",
            honest.n + honest.pad_len,
            honest.modulus
        ));
        verdicts.push(v);
    }
    for alt in alternatives {
        let (left, right) = (LengthCase::zeros(honest), LengthCase::zeros(alt));
        verdicts.push(check_length_hiding(&left, &right, options)?);
        let unpadded = |c: &LengthCase| LengthCase {
            config: c.config.with_fault(Fault::SkipPadding),
            ..c.clone()
        };
        verdicts.push(control(check_length_hiding_structural(
            &unpadded(&left),
            &unpadded(&right),
        )?));
    }
    Ok(verdicts)
}

/// `sum s''_1 - sum p^m - k'_1` from the master's holdings, which equals the
/// number of ones in W1's input.
pub fn master_recovers_w1_weight(run: &SessionRun) -> Option<u64> {
    let (s1, _) = run.master.shares();
    let (k1, _) = run.master.key_sums();
    let s1 = s1?;
    let n = run.master.xor_values().len();
    let pads: u64 = run.master.padded_xor_vector().values()[n..].iter().sum();
    let q = s1.modulus();
    Some((s1.sum() - q.element(pads % q.value()) - k1?).value())
}

/// Runs a seeded session and returns the master's estimate of `|a|`.
pub fn w1_weight_leak(a: &BitVector, b: &BitVector, config: &SessionConfig) -> Result<Option<u64>> {
    let run = execute_session(a, b, config, Scheduler::Fifo)?;
    Ok(master_recovers_w1_weight(&run))
}
