//! Temporal auto- and cross-correlation of channel vector sequences.

use num_complex::Complex64;
use rand::seq::index;

use crate::domain::to_antenna_domain;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{ChannelTensor, Domain, Provenance};

/// Cross-correlation pairs above this count are subsampled.
pub const MAX_PAIRS: usize = 2500;

/// A sequence of equal-length complex vectors stored back to back.
#[derive(Debug, Clone, Copy)]
pub struct VectorSeq<'a> {
    data: &'a [Complex64],
    dim: usize,
}

impl<'a> VectorSeq<'a> {
    pub fn new(data: &'a [Complex64], dim: usize) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::Dimension(format!(
                "{} values do not split into vectors of length {dim}",
                data.len()
            )));
        }
        Ok(Self { data, dim })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn at(&self, n: usize) -> &'a [Complex64] {
        &self.data[n * self.dim..(n + 1) * self.dim]
    }
}

/// `aᴴb`, accumulated in index order.
#[inline]
fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

/// `(1/N_avg) Σ_n ⟨a_n, b_{n+shift}⟩` with `n` starting at `max(0, -shift)`.
pub fn cross_correlation(a: VectorSeq<'_>, b: VectorSeq<'_>, shift: isize, n_avg: usize) -> Result<Complex64> {
    if a.dim != b.dim || a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "sequence shapes differ: {}x{} vs {}x{}",
            a.len(),
            a.dim,
            b.len(),
            b.dim
        )));
    }
    if n_avg == 0 {
        return Err(Error::InvalidConfig("N_avg must be >= 1".into()));
    }
    let lag = shift.unsigned_abs();
    if a.len() < n_avg + lag {
        return Err(Error::Dimension(format!(
            "sequence of {} blocks is shorter than N_avg + |shift| = {}",
            a.len(),
            n_avg + lag
        )));
    }
    let (start_a, start_b) = if shift >= 0 { (0, lag) } else { (lag, 0) };
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 0..n_avg {
        acc += inner(a.at(start_a + n), b.at(start_b + n));
    }
    Ok(acc / n_avg as f64)
}

pub fn auto_correlation(seq: VectorSeq<'_>, shift: isize, n_avg: usize) -> Result<Complex64> {
    cross_correlation(seq, seq, shift, n_avg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainCorrelation {
    pub domain: Domain,
    /// Mean over series of `|R_k(τ)| / R_k(0)`, indexed by shift.
    pub auto: Vec<f64>,
    /// Mean over series pairs of `|R_ab(τ)| / √(R_a(0) R_b(0))`, indexed by shift.
    pub cross: Vec<f64>,
    pub pairs_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub max_shift: usize,
    pub n_avg: usize,
    pub subcarrier: DomainCorrelation,
    pub antenna: DomainCorrelation,
}

impl CorrelationReport {
    /// CSV body: `shift,domain,auto_mag,cross_mag`, subcarrier rows first.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("shift,domain,auto_mag,cross_mag\n");
        for d in [&self.subcarrier, &self.antenna] {
            for shift in 0..=self.max_shift {
                s.push_str(&format!(
                    "{shift},{},{:.9},{:.9}\n",
                    d.domain.as_str(),
                    d.auto[shift],
                    d.cross[shift]
                ));
            }
        }
        s
    }
}

fn pair_list(series: usize, seed: u64) -> Vec<(usize, usize)> {
    let all = series * series.saturating_sub(1) / 2;
    let mut pairs = Vec::with_capacity(all.min(MAX_PAIRS));
    if all <= MAX_PAIRS {
        for a in 0..series {
            for b in a + 1..series {
                pairs.push((a, b));
            }
        }
        return pairs;
    }
    let mut r = rng::stream(seed, "correlation-pairs", &[series as u64]);
    let mut picked: Vec<usize> = index::sample(&mut r, all, MAX_PAIRS).into_vec();
    picked.sort_unstable();
    // unrank the flat pair index in row-major upper-triangle order
    let mut it = picked.into_iter().peekable();
    let mut base = 0;
    for a in 0..series {
        let row = series - a - 1;
        while let Some(&k) = it.peek() {
            if k >= base + row {
                break;
            }
            pairs.push((a, a + 1 + (k - base)));
            it.next();
        }
        base += row;
    }
    pairs
}

fn domain_correlation(tensor: &ChannelTensor, max_shift: usize, n_avg: usize, seed: u64) -> Result<DomainCorrelation> {
    let dim = tensor.vector_len();
    let blocks = n_avg + max_shift;
    let series: Vec<Vec<Complex64>> = (0..tensor.series_count())
        .map(|k| {
            let mut s = tensor.series(k);
            s.truncate(blocks * dim);
            s
        })
        .collect();
    let seqs: Vec<VectorSeq<'_>> = series.iter().map(|s| VectorSeq::new(s, dim)).collect::<Result<_>>()?;

    let power: Vec<f64> = seqs
        .iter()
        .map(|&s| auto_correlation(s, 0, n_avg).map(|r| r.re))
        .collect::<Result<_>>()?;
    if let Some(k) = power.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::Numeric(format!(
            "series {k} of the {} domain has zero power",
            tensor.domain.as_str()
        )));
    }

    let mut auto = vec![0.0; max_shift + 1];
    for (k, &s) in seqs.iter().enumerate() {
        for (shift, slot) in auto.iter_mut().enumerate() {
            *slot += auto_correlation(s, shift as isize, n_avg)?.norm() / power[k];
        }
    }
    auto.iter_mut().for_each(|v| *v /= seqs.len() as f64);

    let pairs = pair_list(seqs.len(), seed);
    let mut cross = vec![0.0; max_shift + 1];
    for &(a, b) in &pairs {
        let norm = (power[a] * power[b]).sqrt();
        for (shift, slot) in cross.iter_mut().enumerate() {
            *slot += cross_correlation(seqs[a], seqs[b], shift as isize, n_avg)?.norm() / norm;
        }
    }
    if pairs.is_empty() {
        cross.iter_mut().for_each(|v| *v = f64::NAN);
    } else {
        cross.iter_mut().for_each(|v| *v /= pairs.len() as f64);
    }

    Ok(DomainCorrelation {
        domain: tensor.domain,
        auto,
        cross,
        pairs_used: pairs.len(),
    })
}

/// Normalized correlation magnitudes of a true subcarrier-domain tensor in
/// both domains, for shifts `0..=max_shift`.
///
/// Cross-correlation averages all unordered series pairs, or a seeded random
/// subsample of [`MAX_PAIRS`] pairs when there are more. With a single
/// series the cross column is NaN.
pub fn correlation_report(tensor: &ChannelTensor, max_shift: usize, n_avg: usize, seed: u64) -> Result<CorrelationReport> {
    if tensor.domain != Domain::Subcarrier {
        return Err(Error::Contract("correlation_report expects a subcarrier-domain tensor".into()));
    }
    if tensor.provenance != Provenance::True {
        return Err(Error::Contract("correlation_report expects true channels".into()));
    }
    if n_avg == 0 {
        return Err(Error::InvalidConfig("N_avg must be >= 1".into()));
    }
    if tensor.blocks() < n_avg + max_shift {
        return Err(Error::Dimension(format!(
            "need at least N_avg + max_shift = {} blocks, tensor has {}",
            n_avg + max_shift,
            tensor.blocks()
        )));
    }
    let subcarrier = domain_correlation(tensor, max_shift, n_avg, seed)?;
    let ant = to_antenna_domain(tensor.clone())?;
    let antenna = domain_correlation(&ant, max_shift, n_avg, seed)?;
    Ok(CorrelationReport {
        max_shift,
        n_avg,
        subcarrier,
        antenna,
    })
}
