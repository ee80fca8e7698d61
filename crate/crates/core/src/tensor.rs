//! Complex channel tensors indexed by (block, subcarrier, antenna).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which vector a series index selects.
///
/// `Subcarrier`: series `l` at block `n` is the length-M vector over antennas.
/// `Antenna`: series `m` at block `n` is the length-L vector over subcarriers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Subcarrier,
    Antenna,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    True,
    Estimated,
    Predicted,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Subcarrier => "subcarrier",
            Domain::Antenna => "antenna",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "subcarrier" => Some(Domain::Subcarrier),
            "antenna" => Some(Domain::Antenna),
            _ => None,
        }
    }
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::True => "true",
            Provenance::Estimated => "estimated",
            Provenance::Predicted => "predicted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "true" => Some(Provenance::True),
            "estimated" => Some(Provenance::Estimated),
            "predicted" => Some(Provenance::Predicted),
            _ => None,
        }
    }
}

/// Channel values stored block-major, then subcarrier, then antenna
/// (`values[(n * L + l) * M + m]`). The storage order never changes with
/// the domain flag; only the meaning of a "series" does.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    pub(crate) blocks: usize,
    pub(crate) subcarriers: usize,
    pub(crate) antennas: usize,
    pub(crate) values: Vec<Complex64>,
    pub domain: Domain,
    pub provenance: Provenance,
}

impl ChannelTensor {
    pub fn new(
        blocks: usize,
        subcarriers: usize,
        antennas: usize,
        values: Vec<Complex64>,
        domain: Domain,
        provenance: Provenance,
    ) -> Result<Self> {
        if blocks == 0 || subcarriers == 0 || antennas == 0 {
            return Err(Error::Dimension(format!(
                "tensor dims must be positive, got N={blocks} L={subcarriers} M={antennas}"
            )));
        }
        let expected = blocks * subcarriers * antennas;
        if values.len() != expected {
            return Err(Error::Dimension(format!(
                "expected {expected} values for N={blocks} L={subcarriers} M={antennas}, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numeric(format!("non-finite channel value at flat index {i}")));
        }
        Ok(Self {
            blocks,
            subcarriers,
            antennas,
            values,
            domain,
            provenance,
        })
    }

    pub fn zeros(blocks: usize, subcarriers: usize, antennas: usize, domain: Domain, provenance: Provenance) -> Self {
        Self::new(
            blocks,
            subcarriers,
            antennas,
            vec![Complex64::new(0.0, 0.0); blocks * subcarriers * antennas],
            domain,
            provenance,
        )
        .expect("zero tensor with positive dims")
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    #[inline]
    pub fn index(&self, n: usize, l: usize, m: usize) -> usize {
        (n * self.subcarriers + l) * self.antennas + m
    }

    #[inline]
    pub fn get(&self, n: usize, l: usize, m: usize) -> Complex64 {
        self.values[self.index(n, l, m)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, l: usize, m: usize, v: Complex64) {
        let i = self.index(n, l, m);
        self.values[i] = v;
    }

    /// The L×M matrix of block `n`, row-major (rows = subcarriers).
    pub fn block(&self, n: usize) -> &[Complex64] {
        let stride = self.subcarriers * self.antennas;
        &self.values[n * stride..(n + 1) * stride]
    }

    pub fn block_mut(&mut self, n: usize) -> &mut [Complex64] {
        let stride = self.subcarriers * self.antennas;
        &mut self.values[n * stride..(n + 1) * stride]
    }

    /// Number of series in the current domain (L or M).
    pub fn series_count(&self) -> usize {
        match self.domain {
            Domain::Subcarrier => self.subcarriers,
            Domain::Antenna => self.antennas,
        }
    }

    /// Length of each series vector in the current domain (M or L).
    pub fn vector_len(&self) -> usize {
        match self.domain {
            Domain::Subcarrier => self.antennas,
            Domain::Antenna => self.subcarriers,
        }
    }

    /// Copy series `k` at block `n` into `out`.
    pub fn read_vector(&self, n: usize, k: usize, out: &mut [Complex64]) {
        debug_assert_eq!(out.len(), self.vector_len());
        match self.domain {
            Domain::Subcarrier => {
                let start = self.index(n, k, 0);
                out.copy_from_slice(&self.values[start..start + self.antennas]);
            }
            Domain::Antenna => {
                for (l, o) in out.iter_mut().enumerate() {
                    *o = self.get(n, l, k);
                }
            }
        }
    }

    pub fn vector(&self, n: usize, k: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.vector_len()];
        self.read_vector(n, k, &mut out);
        out
    }

    pub fn write_vector(&mut self, n: usize, k: usize, v: &[Complex64]) {
        debug_assert_eq!(v.len(), self.vector_len());
        match self.domain {
            Domain::Subcarrier => {
                let start = self.index(n, k, 0);
                self.values[start..start + self.antennas].copy_from_slice(v);
            }
            Domain::Antenna => {
                for (l, &x) in v.iter().enumerate() {
                    self.set(n, l, k, x);
                }
            }
        }
    }

    /// Series `k` for every block, concatenated block-major.
    pub fn series(&self, k: usize) -> Vec<Complex64> {
        let d = self.vector_len();
        let mut out = vec![Complex64::new(0.0, 0.0); self.blocks * d];
        for (n, chunk) in out.chunks_exact_mut(d).enumerate() {
            self.read_vector(n, k, chunk);
        }
        out
    }

    /// Scale every entry by a real factor.
    pub fn scaled(&self, c: f64) -> Self {
        let mut t = self.clone();
        t.values.iter_mut().for_each(|v| *v *= c);
        t
    }

    /// Keep blocks `0..blocks`.
    pub fn truncated(&self, blocks: usize) -> Result<Self> {
        if blocks == 0 || blocks > self.blocks {
            return Err(Error::Dimension(format!(
                "cannot truncate {} blocks to {blocks}",
                self.blocks
            )));
        }
        let stride = self.subcarriers * self.antennas;
        Ok(Self {
            blocks,
            values: self.values[..blocks * stride].to_vec(),
            ..self.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rejects_bad_shapes_and_nan() {
        assert!(ChannelTensor::new(1, 2, 2, vec![c(0.0, 0.0); 3], Domain::Subcarrier, Provenance::True).is_err());
        assert!(ChannelTensor::new(0, 2, 2, vec![], Domain::Subcarrier, Provenance::True).is_err());
        let mut v = vec![c(0.0, 0.0); 4];
        v[2] = c(f64::NAN, 0.0);
        assert!(matches!(
            ChannelTensor::new(1, 2, 2, v, Domain::Subcarrier, Provenance::True),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn vector_views_follow_domain() {
        // block 0 = [[a, b], [c, d]] with rows = subcarriers
        let vals = vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)];
        let mut t = ChannelTensor::new(1, 2, 2, vals, Domain::Subcarrier, Provenance::True).unwrap();
        assert_eq!(t.vector(0, 0), vec![c(1.0, 0.0), c(2.0, 0.0)]);
        t.domain = Domain::Antenna;
        assert_eq!(t.vector(0, 0), vec![c(1.0, 0.0), c(3.0, 0.0)]);
        assert_eq!(t.vector(0, 1), vec![c(2.0, 0.0), c(4.0, 0.0)]);
        t.write_vector(0, 1, &[c(9.0, 1.0), c(8.0, 1.0)]);
        assert_eq!(t.get(0, 0, 1), c(9.0, 1.0));
        assert_eq!(t.get(0, 1, 1), c(8.0, 1.0));
    }
}
