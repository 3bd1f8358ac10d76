use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// One choice per switch; inner genes are binary, the last (output) gene is ternary.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Genotype(pub Vec<u8>);

/// Alphabet sizes for a genotype of length `len`.
pub fn alphabet(len: usize) -> Vec<u8> {
    let mut a = vec![2; len];
    if let Some(last) = a.last_mut() {
        *last = 3;
    }
    a
}

impl Genotype {
    pub fn zeros(len: usize) -> Self {
        Genotype(vec![0; len])
    }

    /// All switches at their original input, output switch at `output`.
    pub fn reference(len: usize, output: u8) -> Self {
        let mut g = Self::zeros(len);
        if let Some(last) = g.0.last_mut() {
            *last = output;
        }
        g
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn genes(&self) -> &[u8] {
        &self.0
    }

    pub fn output_gene(&self) -> u8 {
        *self.0.last().expect("non-empty genotype")
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        if self.0.len() != len {
            return Err(Error::Genotype(format!("length {} but the supernetwork has {len} switches", self.0.len())));
        }
        for (i, (&g, a)) in self.0.iter().zip(alphabet(len)).enumerate() {
            if g >= a {
                return Err(Error::Genotype(format!("gene {i} = {g} outside 0..{a}")));
            }
        }
        Ok(())
    }

    /// Indices where the two genotypes differ.
    pub fn diff(&self, other: &Genotype) -> Result<Vec<usize>> {
        if self.len() != other.len() {
            return Err(Error::Genotype(format!("lengths {} and {} differ", self.len(), other.len())));
        }
        Ok((0..self.len()).filter(|&i| self.0[i] != other.0[i]).collect())
    }

    pub fn hamming(&self, other: &Genotype) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    /// Number of inner switches selecting their stitched input.
    pub fn stitches_used(&self) -> usize {
        self.0[..self.len().saturating_sub(1)].iter().filter(|&&g| g != 0).count()
    }
}

impl fmt::Display for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.0 {
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

impl FromStr for Genotype {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| {
                c.to_digit(10)
                    .map(|d| d as u8)
                    .ok_or_else(|| Error::Genotype(format!("{c:?} is not a digit")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Genotype)
    }
}

impl Serialize for Genotype {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Genotype {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-gene probability of selecting a stitch in [`biased_sample`].
pub fn biased_probability(len: usize) -> f64 {
    (6.18 / len as f64).clamp(0.0, 1.0)
}

/// Inner genes are 1 with probability `6.18 / len`; the output gene is uniform.
pub fn biased_sample<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Genotype {
    assert!(len >= 1, "genotypes have at least the output gene");
    let p = biased_probability(len);
    let mut g: Vec<u8> = (0..len - 1).map(|_| rng.gen_bool(p) as u8).collect();
    g.push(rng.gen_range(0..3));
    Genotype(g)
}
