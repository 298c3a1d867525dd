use crate::error::{Error, Result};
use crate::field::{smallest_prime_above, Modulus};
use crate::harness::rng::RandomnessSource;

/// Deliberate deviations from the honest protocol, used as negative controls
/// for the privacy audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fault {
    /// W2 masks its input with an all-zero XOR mask, so W1 sees `b` in clear.
    ZeroXorMask,
    /// W2's key sum omits the `-sum(k)` term.
    KeySumOmitsLabelMask,
    /// Both clients drop their padding, so the master sees the true length.
    SkipPadding,
}

/// Parameters of one two-client session.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    n: usize,
    pad_len: usize,
    modulus: Modulus,
    session_id: u64,
    randomness: RandomnessSource,
    seed: Option<u64>,
    fault: Option<Fault>,
}

impl SessionConfig {
    /// Validates `n >= 1` and `q > 2n`.
    pub fn new(
        n: usize,
        pad_len: usize,
        modulus: Modulus,
        randomness: RandomnessSource,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("input length must be at least 1"));
        }
        if pad_len > u32::MAX as usize / 2 || n > u32::MAX as usize / 2 {
            return Err(Error::config("vector lengths exceed the wire format"));
        }
        if modulus.value() <= 2 * n as u64 {
            return Err(Error::config(format!(
                "modulus {modulus} must exceed 2n = {}",
                2 * n
            )));
        }
        Ok(SessionConfig {
            n,
            pad_len,
            modulus,
            session_id: 0,
            randomness,
            seed: None,
            fault: None,
        })
    }

    /// Defaults: `n' = n` and the smallest prime above `2n`.
    pub fn with_defaults(n: usize, randomness: RandomnessSource) -> Result<Self> {
        let q = smallest_prime_above(2 * n.max(1) as u64)?;
        SessionConfig::new(n, n, Modulus::new(q)?, randomness)
    }

    pub fn seeded(n: usize, pad_len: usize, modulus: Modulus, seed: u64) -> Result<Self> {
        let mut config = SessionConfig::new(n, pad_len, modulus, RandomnessSource::seeded(seed))?;
        config.seed = Some(seed);
        Ok(config)
    }

    pub fn with_session_id(mut self, id: u64) -> Self {
        self.session_id = id;
        self
    }

    pub fn with_fault(mut self, fault: Fault) -> Self {
        self.fault = Some(fault);
        self
    }

    pub fn with_randomness(mut self, randomness: RandomnessSource) -> Self {
        self.randomness = randomness;
        self.seed = None;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pad_len(&self) -> usize {
        self.pad_len
    }

    pub fn total_len(&self) -> usize {
        self.n + self.pad_len
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn session_id(&self) -> u64 {
        self.session_id
    }

    pub fn randomness(&self) -> &RandomnessSource {
        &self.randomness
    }

    /// The harness seed, when the randomness was expanded from one.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn fault(&self) -> Option<Fault> {
        self.fault
    }
}
