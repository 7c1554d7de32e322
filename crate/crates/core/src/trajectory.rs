//! Seeded trajectory simulation, skipped subsequences and the trajectory
//! text format.
//!
//! A trajectory of `t` steps stores `X_0, ..., X_t` (t transitions, t + 1
//! states). Simulation uses `Xoshiro256PlusPlus` seeded through
//! `SeedableRng::seed_from_u64`, which is portable across platforms, so a
//! `(chain, t, seed, start)` tuple always yields the same states.
//!
//! File format:
//!
//! ```text
//! gapestim-traj v1 n=<n> seed=<seed> len=<t+1> start=<stationary|index> chain=<id>
//! <X_0>
//! <X_1>
//! ...
//! ```
//!
//! `n`, `start` and `chain` are optional on load; `len` guards against
//! truncation. The chain id is percent-encoded for whitespace and `%`.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::chain::MarkovChain;
use crate::error::{Error, Result};

pub const FORMAT_MAGIC: &str = "gapestim-traj";
pub const FORMAT_VERSION: &str = "v1";

/// How `X_0` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Start {
    #[default]
    Stationary,
    State(usize),
}

impl fmt::Display for Start {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Start::Stationary => f.write_str("stationary"),
            Start::State(i) => write!(f, "{i}"),
        }
    }
}

impl FromStr for Start {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "stationary" {
            return Ok(Start::Stationary);
        }
        s.parse()
            .map(Start::State)
            .map_err(|_| Error::InvalidParameter(format!("start must be 'stationary' or a state index, got '{s}'")))
    }
}

/// An observed path `X_0, ..., X_t` together with how it was produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub states: Vec<u32>,
    /// State-space size, when known.
    pub n: Option<usize>,
    pub chain_id: String,
    pub seed: u64,
    pub start: Start,
}

impl Trajectory {
    /// Wraps raw states, checking them against `n` when given.
    pub fn new(states: Vec<u32>, n: Option<usize>, chain_id: impl Into<String>, seed: u64, start: Start) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidParameter("trajectory must contain at least one state".into()));
        }
        let tr = Self { states, n, chain_id: chain_id.into(), seed, start };
        if let Some(n) = n {
            tr.check_indices(n)?;
        }
        Ok(tr)
    }

    /// Number of stored states, `t + 1`.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Number of transitions `t`.
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn check_indices(&self, n: usize) -> Result<()> {
        match self.states.iter().position(|&s| s as usize >= n) {
            Some(pos) => Err(Error::Validation(format!(
                "state {} at position {pos} is out of range for n={n}",
                self.states[pos]
            ))),
            None => Ok(()),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        write!(w, "{FORMAT_MAGIC} {FORMAT_VERSION}")?;
        if let Some(n) = self.n {
            write!(w, " n={n}")?;
        }
        writeln!(
            w,
            " seed={} len={} start={} chain={}",
            self.seed,
            self.states.len(),
            self.start,
            encode_id(&self.chain_id)
        )?;
        for s in &self.states {
            writeln!(w, "{s}")?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::Format("empty trajectory file".into()))?;
        let mut tokens = header.split_whitespace();
        if tokens.next() != Some(FORMAT_MAGIC) {
            return Err(Error::Format(format!("missing '{FORMAT_MAGIC}' header")));
        }
        match tokens.next() {
            Some(FORMAT_VERSION) => {}
            Some(v) => return Err(Error::Format(format!("unsupported format version '{v}'"))),
            None => return Err(Error::Format("header has no version".into())),
        }

        let (mut n, mut seed, mut len, mut start, mut chain_id) = (None, None, None, Start::Stationary, String::new());
        for tok in tokens {
            let (key, value) = tok
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("malformed header field '{tok}'")))?;
            let bad = || Error::Format(format!("bad value for header field '{key}': '{value}'"));
            match key {
                "n" => n = Some(value.parse::<usize>().map_err(|_| bad())?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad())?),
                "len" => len = Some(value.parse::<usize>().map_err(|_| bad())?),
                "start" => start = value.parse().map_err(|_| bad())?,
                "chain" => chain_id = decode_id(value)?,
                _ => {}
            }
        }
        let seed = seed.ok_or_else(|| Error::Format("header lacks seed".into()))?;
        let len = len.ok_or_else(|| Error::Format("header lacks len".into()))?;

        let mut states = Vec::with_capacity(len.min(1 << 24));
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let s = line
                .parse::<u32>()
                .map_err(|_| Error::Format(format!("bad state index '{line}'")))?;
            states.push(s);
        }
        if states.len() != len {
            return Err(Error::Format(format!(
                "header declares {len} states but file holds {} (truncated?)",
                states.len()
            )));
        }
        if states.is_empty() {
            return Err(Error::Format("trajectory holds no states".into()));
        }
        Trajectory::new(states, n, chain_id, seed, start)
    }
}

fn encode_id(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for ch in id.chars() {
        match ch {
            '%' => out.push_str("%25"),
            c if c.is_whitespace() => {
                let mut buf = [0u8; 4];
                for b in c.encode_utf8(&mut buf).bytes() {
                    out.push_str(&format!("%{b:02X}"));
                }
            }
            c => out.push(c),
        }
    }
    match out.as_str() {
        "" => "-".into(),
        "-" => "%2D".into(),
        _ => out,
    }
}

fn decode_id(s: &str) -> Result<String> {
    if s == "-" {
        return Ok(String::new());
    }
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = s
                .get(i + 1..i + 3)
                .and_then(|h| u8::from_str_radix(h, 16).ok())
                .ok_or_else(|| Error::Format(format!("bad escape in chain id '{s}'")))?;
            out.push(hex);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).map_err(|_| Error::Format(format!("chain id '{s}' is not UTF-8")))
}

// Inverse-CDF sampling over cumulative rows. Rounding can leave the last
// cumulative value a hair below 1, so overflow falls back to the last state
// with positive probability.
struct RowSampler {
    cumulative: Vec<Vec<f64>>,
    last_positive: Vec<usize>,
}

impl RowSampler {
    fn new(rows: impl Iterator<Item = Vec<f64>>) -> Self {
        let mut cumulative = Vec::new();
        let mut last_positive = Vec::new();
        for row in rows {
            let mut acc = 0.0;
            let cum: Vec<f64> = row
                .iter()
                .map(|&p| {
                    acc += p;
                    acc
                })
                .collect();
            last_positive.push(row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1));
            cumulative.push(cum);
        }
        Self { cumulative, last_positive }
    }

    fn sample(&self, row: usize, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        let cum = &self.cumulative[row];
        let j = cum.partition_point(|&c| c <= u);
        if j < cum.len() {
            j
        } else {
            self.last_positive[row]
        }
    }
}

/// Simulates `t` transitions of `c`.
pub fn simulate(c: &MarkovChain, t: usize, seed: u64, start: Start) -> Result<Trajectory> {
    if t == 0 {
        return Err(Error::InvalidParameter("trajectory needs t >= 1 steps".into()));
    }
    let n = c.n();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let kernel = RowSampler::new(c.kernel().rows().map(<[f64]>::to_vec));
    let x0 = match start {
        Start::Stationary => RowSampler::new(std::iter::once(c.pi().to_vec())).sample(0, &mut rng),
        Start::State(i) if i < n => i,
        Start::State(i) => {
            return Err(Error::InvalidParameter(format!("start state {i} out of range for n={n}")));
        }
    };
    let mut states = Vec::with_capacity(t + 1);
    let mut x = x0;
    states.push(x as u32);
    for _ in 0..t {
        x = kernel.sample(x, &mut rng);
        states.push(x as u32);
    }
    Ok(Trajectory { states, n: Some(n), chain_id: c.label().to_string(), seed, start })
}

/// `(X_0, X_a, X_2a, ..., X_{a floor(t/a)})`.
pub fn skip(tr: &Trajectory, a: usize) -> Result<Trajectory> {
    if a == 0 {
        return Err(Error::InvalidParameter("skip factor must be >= 1".into()));
    }
    if tr.len() < a + 1 {
        return Err(Error::TooShort { len: tr.len(), needed: a + 1 });
    }
    Ok(Trajectory {
        states: tr.states.iter().step_by(a).copied().collect(),
        ..tr.clone()
    })
}
