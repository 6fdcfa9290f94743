use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sobol::Sobol;
use super::truncnorm::{truncnorm_inverse_cdf, TRUNCATION};
use crate::error::{invalid, Result, SaaError};

/// How a sample set was generated; enough to regenerate it bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Iid { seed: u64 },
    Qmc { scramble_seed: u64 },
    /// Single draw at the mean parameter `ξ = 0`.
    Nominal,
    /// Caller-supplied samples.
    Explicit,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Iid { seed } => write!(f, "iid:{seed}"),
            Provenance::Qmc { scramble_seed } => write!(f, "qmc:{scramble_seed}"),
            Provenance::Nominal => write!(f, "nominal"),
            Provenance::Explicit => write!(f, "explicit"),
        }
    }
}

impl FromStr for Provenance {
    type Err = SaaError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || SaaError::Parse(format!("unknown provenance '{s}'"));
        match s.split_once(':') {
            Some(("iid", v)) => Ok(Provenance::Iid {
                seed: v.parse().map_err(|_| bad())?,
            }),
            Some(("qmc", v)) => Ok(Provenance::Qmc {
                scramble_seed: v.parse().map_err(|_| bad())?,
            }),
            None if s == "nominal" => Ok(Provenance::Nominal),
            None if s == "explicit" => Ok(Provenance::Explicit),
            _ => Err(bad()),
        }
    }
}

/// Ordered list of parameter draws `ξ ∈ [-3, 3]^M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    samples: Vec<Vec<f64>>,
    provenance: Provenance,
}

impl SampleSet {
    pub fn new(dim: usize, samples: Vec<Vec<f64>>, provenance: Provenance) -> Result<Self> {
        if samples.is_empty() {
            return invalid("sample set must not be empty");
        }
        for (i, s) in samples.iter().enumerate() {
            if s.len() != dim {
                return invalid(format!("sample {i} has {} entries, expected {dim}", s.len()));
            }
            if s.iter().any(|x| !(x.abs() <= TRUNCATION)) {
                return invalid(format!("sample {i} leaves the box [-3, 3]"));
            }
        }
        Ok(Self {
            dim,
            samples,
            provenance,
        })
    }

    pub fn nominal(dim: usize) -> Self {
        Self {
            dim,
            samples: vec![vec![0.0; dim]],
            provenance: Provenance::Nominal,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Writes the CSV cache: a `M,count,provenance` header row, its values,
    /// then one row of `M` shortest-round-trip decimals per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "M,count,provenance")?;
        writeln!(w, "{},{},{}", self.dim, self.len(), self.provenance)?;
        let mut line = String::new();
        for s in &self.samples {
            line.clear();
            for (j, x) in s.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{x:?}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .ok_or_else(|| SaaError::Parse(format!("missing {what}")))?
                .map_err(SaaError::from)
        };
        if next("header")?.trim() != "M,count,provenance" {
            return Err(SaaError::Parse("bad sample cache header".into()));
        }
        let meta = next("metadata")?;
        let fields: Vec<&str> = meta.trim().split(',').collect();
        if fields.len() != 3 {
            return Err(SaaError::Parse("bad sample cache metadata".into()));
        }
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| SaaError::Parse(format!("{s}: {e}")))
        };
        let dim = parse_usize(fields[0])?;
        let count = parse_usize(fields[1])?;
        let provenance: Provenance = fields[2].parse()?;
        let mut samples = Vec::with_capacity(count);
        for i in 0..count {
            let row = next(&format!("row {i}"))?;
            let xs = row
                .trim()
                .split(',')
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| SaaError::Parse(format!("row {i}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            samples.push(xs);
        }
        Self::new(dim, samples, provenance)
    }
}

fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Independent truncated-normal draws by inverse transform of ChaCha8 uniforms.
pub fn iid_samples(dim: usize, count: usize, seed: u64) -> Result<SampleSet> {
    if count == 0 || dim == 0 {
        return invalid("sample count and dimension must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..count)
        .map(|_| {
            (0..dim)
                .map(|_| truncnorm_inverse_cdf(open_unit(&mut rng)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    SampleSet::new(dim, samples, Provenance::Iid { seed })
}

/// Digitally shifted Sobol' points mapped through the truncated-normal quantile.
pub fn qmc_samples(dim: usize, count: usize, scramble_seed: u64) -> Result<SampleSet> {
    if count == 0 {
        return invalid("sample count must be positive");
    }
    let mut sobol = Sobol::scrambled(dim, scramble_seed)?;
    let samples = (0..count)
        .map(|_| {
            sobol
                .next_point()
                .into_iter()
                .map(truncnorm_inverse_cdf)
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    SampleSet::new(dim, samples, Provenance::Qmc { scramble_seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_set() {
        assert_eq!(iid_samples(5, 20, 3).unwrap(), iid_samples(5, 20, 3).unwrap());
        assert_ne!(iid_samples(5, 20, 3).unwrap(), iid_samples(5, 20, 4).unwrap());
        assert_eq!(qmc_samples(5, 20, 3).unwrap(), qmc_samples(5, 20, 3).unwrap());
    }

    #[test]
    fn samples_respect_box() {
        let s = iid_samples(10, 2000, 1).unwrap();
        assert!(s.samples().iter().flatten().all(|x| x.abs() <= 3.0));
    }

    #[test]
    fn csv_round_trip() {
        let s = qmc_samples(7, 33, 11).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = SampleSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn provenance_parses() {
        for p in [
            Provenance::Iid { seed: 9 },
            Provenance::Qmc { scramble_seed: 1 },
            Provenance::Nominal,
            Provenance::Explicit,
        ] {
            assert_eq!(p.to_string().parse::<Provenance>().unwrap(), p);
        }
        assert!("sobol:3".parse::<Provenance>().is_err());
    }

    #[test]
    fn rejects_bad_sets() {
        assert!(SampleSet::new(2, vec![], Provenance::Explicit).is_err());
        assert!(SampleSet::new(2, vec![vec![0.0]], Provenance::Explicit).is_err());
        assert!(SampleSet::new(1, vec![vec![3.5]], Provenance::Explicit).is_err());
        assert!(qmc_samples(200, 4, 0).is_err());
    }
}
