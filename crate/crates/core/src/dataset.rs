//! Sliding-window training and test sets for the SL, JL and JLDT predictors.
//!
//! Indices are zero-based: a row whose window ends at block `e` holds the
//! estimated vectors of blocks `e-n0+1..=e` as features and block `e+1` as
//! the label. Training row `i` ends at `e = n0-1+i`; test row `i` ends at
//! `e = n_gap+n0-1+i`.

use ndarray::{Array2, ArrayView1, ArrayViewMut1};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::to_antenna_domain;
use crate::error::{Error, Result};
use crate::tensor::{ChannelTensor, Domain, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    /// Input order: number of past estimates per window.
    pub n0: usize,
    /// Training rows per series.
    pub n_tr: usize,
    /// Test rows per series.
    pub n_te: usize,
    /// Offset of the first test window.
    pub n_gap: usize,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 || self.n_tr == 0 || self.n_te == 0 {
            return Err(Error::InvalidConfig(format!(
                "n0, n_tr and n_te must be >= 1 (got n0={}, n_tr={}, n_te={})",
                self.n0, self.n_tr, self.n_te
            )));
        }
        if self.n_gap <= self.n_tr {
            return Err(Error::InvalidConfig(format!(
                "n_gap must satisfy N_tr < N_gap (got n_tr={}, n_gap={})",
                self.n_tr, self.n_gap
            )));
        }
        if self.n_gap < self.n_tr + self.n0 {
            return Err(Error::InvalidConfig(format!(
                "n_gap={} lets training labels overlap test windows; need n_gap >= n_tr + n0 = {}",
                self.n_gap,
                self.n_tr + self.n0
            )));
        }
        Ok(())
    }

    /// Blocks a tensor must have for the test phase.
    pub fn required_blocks(&self) -> usize {
        self.n_gap + self.n0 + self.n_te
    }

    pub fn with_train_rows(self, n_tr: usize) -> Self {
        Self { n_tr, ..self }
    }

    fn first_window_end(&self, phase: Phase) -> usize {
        match phase {
            Phase::Train => self.n0 - 1,
            Phase::Test => self.n_gap + self.n0 - 1,
        }
    }

    fn rows(&self, phase: Phase) -> usize {
        match phase {
            Phase::Train => self.n_tr,
            Phase::Test => self.n_te,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Test,
}

/// Real-valued windows ready for the MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    /// `rows × 2·n0·dim`
    pub features: Array2<f64>,
    /// `rows × 2·dim`
    pub labels: Array2<f64>,
    /// Features and labels have been divided by this.
    pub scale: f64,
    pub dim: usize,
    pub n0: usize,
    pub domain: Domain,
    /// Series index (subcarrier or antenna) of each row.
    pub series: Vec<usize>,
    /// Block index of the newest window entry of each row.
    pub window_end: Vec<usize>,
    /// True channel at `window_end + 1`, `rows × dim`, when available.
    pub label_truth: Option<Vec<Complex64>>,
}

impl WindowedDataset {
    pub fn rows(&self) -> usize {
        self.features.nrows()
    }

    /// Smallest and largest block index read by any row (features or label).
    pub fn block_span(&self) -> Option<(usize, usize)> {
        let lo = self.window_end.iter().min()? + 1 - self.n0;
        let hi = self.window_end.iter().max()? + 1;
        Some((lo, hi))
    }

    fn empty(dim: usize, n0: usize, domain: Domain, with_truth: bool) -> Self {
        Self {
            features: Array2::zeros((0, 2 * n0 * dim)),
            labels: Array2::zeros((0, 2 * dim)),
            scale: 1.0,
            dim,
            n0,
            domain,
            series: Vec::new(),
            window_end: Vec::new(),
            label_truth: with_truth.then(Vec::new),
        }
    }

    /// Append rows of `other` (same shape and scale) in order.
    fn extend(&mut self, other: WindowedDataset) -> Result<()> {
        if other.dim != self.dim || other.n0 != self.n0 || other.scale != self.scale {
            return Err(Error::Dimension("cannot merge datasets of different shape or scale".into()));
        }
        let stack = |a: &Array2<f64>, b: &Array2<f64>| {
            ndarray::concatenate(ndarray::Axis(0), &[a.view(), b.view()])
                .map_err(|e| Error::Dimension(e.to_string()))
        };
        self.features = stack(&self.features, &other.features)?;
        self.labels = stack(&self.labels, &other.labels)?;
        self.series.extend(other.series);
        self.window_end.extend(other.window_end);
        match (&mut self.label_truth, other.label_truth) {
            (Some(a), Some(b)) => a.extend(b),
            (None, None) => {}
            _ => return Err(Error::Contract("cannot merge datasets with and without truth labels".into())),
        }
        Ok(())
    }
}

/// `(Re(v_1..v_D), Im(v_1..v_D))`
pub fn complex_to_real(v: &[Complex64]) -> Vec<f64> {
    let mut out = vec![0.0; 2 * v.len()];
    write_real(v, ArrayViewMut1::from(&mut out[..]));
    out
}

fn write_real(v: &[Complex64], mut out: ArrayViewMut1<'_, f64>) {
    let d = v.len();
    for (i, z) in v.iter().enumerate() {
        out[i] = z.re;
        out[d + i] = z.im;
    }
}

pub fn real_to_complex(x: &[f64]) -> Result<Vec<Complex64>> {
    if !x.len().is_multiple_of(2) {
        return Err(Error::Dimension(format!("real vector of odd length {}", x.len())));
    }
    let d = x.len() / 2;
    Ok((0..d).map(|i| Complex64::new(x[i], x[d + i])).collect())
}

/// Like [`real_to_complex`] for an ndarray row, multiplying by `scale`.
pub fn row_to_complex(row: ArrayView1<'_, f64>, scale: f64) -> Vec<Complex64> {
    let d = row.len() / 2;
    (0..d).map(|i| Complex64::new(row[i] * scale, row[d + i] * scale)).collect()
}

fn check_inputs(est: &ChannelTensor, truth: Option<&ChannelTensor>, spec: &DatasetSpec, phase: Phase) -> Result<()> {
    spec.validate()?;
    if est.provenance != Provenance::Estimated {
        return Err(Error::Contract(format!(
            "datasets are built from estimated channels, got {}",
            est.provenance.as_str()
        )));
    }
    let last_label = spec.first_window_end(phase) + spec.rows(phase);
    if est.blocks() <= last_label {
        return Err(Error::Dimension(format!(
            "{:?} phase reads block {last_label} but the tensor has only {} blocks",
            phase,
            est.blocks()
        )));
    }
    if let Some(t) = truth {
        if t.provenance != Provenance::True
            || t.domain != est.domain
            || (t.blocks(), t.subcarriers(), t.antennas()) != (est.blocks(), est.subcarriers(), est.antennas())
        {
            return Err(Error::Contract(
                "truth tensor must be a true-channel tensor matching the estimate's shape and domain".into(),
            ));
        }
    }
    Ok(())
}

/// Windows of series `series` (subcarrier or antenna index, per `est.domain`).
///
/// `truth`, when given, fills `label_truth` with the true vector at each
/// label block.
pub fn build_series_dataset(
    est: &ChannelTensor,
    truth: Option<&ChannelTensor>,
    series: usize,
    spec: &DatasetSpec,
    phase: Phase,
) -> Result<WindowedDataset> {
    check_inputs(est, truth, spec, phase)?;
    if series >= est.series_count() {
        return Err(Error::Dimension(format!(
            "series {series} out of range for {} {} series",
            est.series_count(),
            est.domain.as_str()
        )));
    }
    let d = est.vector_len();
    let n0 = spec.n0;
    let rows = spec.rows(phase);
    let first = spec.first_window_end(phase);

    let mut features = Array2::zeros((rows, 2 * n0 * d));
    let mut labels = Array2::zeros((rows, 2 * d));
    let mut window_end = Vec::with_capacity(rows);
    let mut label_truth = truth.map(|_| Vec::with_capacity(rows * d));
    let mut buf = vec![Complex64::new(0.0, 0.0); d];

    for r in 0..rows {
        let end = first + r;
        let mut feat = features.row_mut(r);
        for w in 0..n0 {
            est.read_vector(end + 1 - n0 + w, series, &mut buf);
            write_real(&buf, feat.slice_mut(ndarray::s![2 * d * w..2 * d * (w + 1)]));
        }
        est.read_vector(end + 1, series, &mut buf);
        write_real(&buf, labels.row_mut(r));
        if let (Some(lt), Some(t)) = (label_truth.as_mut(), truth) {
            t.read_vector(end + 1, series, &mut buf);
            lt.extend_from_slice(&buf);
        }
        window_end.push(end);
    }

    Ok(WindowedDataset {
        features,
        labels,
        scale: 1.0,
        dim: d,
        n0,
        domain: est.domain,
        series: vec![series; rows],
        window_end,
        label_truth,
    })
}

/// Union over every series of `est` in its current domain, series-major.
fn build_pooled(est: &ChannelTensor, truth: Option<&ChannelTensor>, spec: &DatasetSpec) -> Result<(WindowedDataset, WindowedDataset)> {
    let mut train = WindowedDataset::empty(est.vector_len(), spec.n0, est.domain, truth.is_some());
    let mut test = WindowedDataset::empty(est.vector_len(), spec.n0, est.domain, truth.is_some());
    for k in 0..est.series_count() {
        train.extend(build_series_dataset(est, truth, k, spec, Phase::Train)?)?;
        test.extend(build_series_dataset(est, truth, k, spec, Phase::Test)?)?;
    }
    Ok((train, test))
}

/// Joint-learning sets: every subcarrier contributes `spec.n_tr` training
/// rows and `spec.n_te` test rows.
pub fn build_jl(est: &ChannelTensor, truth: Option<&ChannelTensor>, spec: &DatasetSpec) -> Result<(WindowedDataset, WindowedDataset)> {
    if est.domain != Domain::Subcarrier {
        return Err(Error::Contract("build_jl expects a subcarrier-domain tensor".into()));
    }
    build_pooled(est, truth, spec)
}

/// Joint learning after regrouping into antenna-domain series: every antenna
/// contributes `spec.n_tr` training rows of length-L vectors.
pub fn build_jldt(est: &ChannelTensor, truth: Option<&ChannelTensor>, spec: &DatasetSpec) -> Result<(WindowedDataset, WindowedDataset)> {
    if est.domain != Domain::Subcarrier {
        return Err(Error::Contract("build_jldt expects a subcarrier-domain tensor".into()));
    }
    let est_ant = to_antenna_domain(est.clone())?;
    let truth_ant = truth.map(|t| to_antenna_domain(t.clone())).transpose()?;
    build_pooled(&est_ant, truth_ant.as_ref(), spec)
}

/// Root-mean-square of all training feature entries.
pub fn fit_scale(train: &WindowedDataset) -> Result<f64> {
    let n = train.features.len();
    if n == 0 {
        return Err(Error::Contract("cannot fit a scale on an empty training set".into()));
    }
    let rms = (train.features.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    if !(rms > 0.0) || !rms.is_finite() {
        return Err(Error::Numeric("training features are all zero".into()));
    }
    Ok(rms)
}

/// Divide features and labels by `scale` (relative to the current scale).
pub fn apply_scale(ds: &mut WindowedDataset, scale: f64) -> Result<()> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Numeric(format!("invalid scale {scale}")));
    }
    let factor = ds.scale / scale;
    ds.features.mapv_inplace(|x| x * factor);
    ds.labels.mapv_inplace(|x| x * factor);
    ds.scale = scale;
    Ok(())
}

/// Error unless every block read by `train` precedes every block read by `test`.
pub fn check_no_leakage(train: &WindowedDataset, test: &WindowedDataset) -> Result<()> {
    if let (Some((_, train_hi)), Some((test_lo, _))) = (train.block_span(), test.block_span()) {
        if train_hi >= test_lo {
            return Err(Error::Contract(format!(
                "training reads block {train_hi} but test windows start at block {test_lo}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Entry (n, l, m) encodes its own indices.
    fn tagged(blocks: usize, l: usize, m: usize) -> ChannelTensor {
        let mut vals = Vec::new();
        for n in 0..blocks {
            for li in 0..l {
                for mi in 0..m {
                    vals.push(c(n as f64 + 0.01 * li as f64, 1.0 + mi as f64));
                }
            }
        }
        ChannelTensor::new(blocks, l, m, vals, Domain::Subcarrier, Provenance::Estimated).unwrap()
    }

    fn spec(n0: usize, n_tr: usize, n_te: usize, n_gap: usize) -> DatasetSpec {
        DatasetSpec { n0, n_tr, n_te, n_gap }
    }

    #[test]
    fn complex_real_conversions() {
        assert_eq!(complex_to_real(&[c(1.0, 2.0), c(3.0, -1.0)]), vec![1.0, 3.0, 2.0, -1.0]);
        assert_eq!(complex_to_real(&[c(4.0, 0.0), c(5.0, 0.0)])[2..], [0.0, 0.0]);
        let v = vec![c(0.1, -0.2), c(7.5, 3.25), c(-1.0, 0.0)];
        assert_eq!(real_to_complex(&complex_to_real(&v)).unwrap(), v);
        assert!(real_to_complex(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn first_training_row() {
        let est = tagged(20, 2, 3);
        let ds = build_series_dataset(&est, None, 1, &spec(3, 5, 2, 8), Phase::Train).unwrap();
        assert_eq!(ds.rows(), 5);
        assert_eq!(ds.features.ncols(), 2 * 3 * 3);
        assert_eq!(ds.labels.ncols(), 6);
        // zero-based blocks 0, 1, 2 then label block 3
        let row = ds.features.row(0);
        for w in 0..3 {
            let win = row_to_complex(row.slice(ndarray::s![6 * w..6 * (w + 1)]), 1.0);
            assert_eq!(win, est.vector(w, 1));
        }
        assert_eq!(row_to_complex(ds.labels.row(0), 1.0), est.vector(3, 1));
        assert_eq!(ds.window_end, vec![2, 3, 4, 5, 6]);
    }

    #[test]
    fn test_window_indices() {
        // one-based: last window ends at 1702, label 1703
        let s = spec(3, 1000, 200, 1500);
        assert_eq!(s.required_blocks(), 1703);
        let est = tagged(1703, 1, 1);
        let ds = build_series_dataset(&est, None, 0, &s, Phase::Test).unwrap();
        assert_eq!(ds.rows(), 200);
        assert_eq!(*ds.window_end.last().unwrap() + 1, 1701 + 1);
        assert_eq!(ds.labels[[199, 0]], 1702.0);
        let short = tagged(1702, 1, 1);
        assert!(build_series_dataset(&short, None, 0, &s, Phase::Test).is_err());
    }

    #[test]
    fn paper_widths() {
        let est = tagged(10, 1, 64);
        let ds = build_series_dataset(&est, None, 0, &spec(3, 2, 1, 5), Phase::Train).unwrap();
        assert_eq!((ds.features.ncols(), ds.labels.ncols()), (384, 128));
    }

    #[test]
    fn errors() {
        let est = tagged(20, 2, 2);
        assert!(build_series_dataset(&est, None, 2, &spec(2, 3, 2, 6), Phase::Train).is_err());
        let mut truth = est.clone();
        truth.provenance = Provenance::True;
        assert!(matches!(
            build_series_dataset(&truth, None, 0, &spec(2, 3, 2, 6), Phase::Train),
            Err(Error::Contract(_))
        ));
        assert!(matches!(spec(2, 10, 1, 10).validate(), Err(Error::InvalidConfig(m)) if m.contains("N_tr < N_gap")));
        assert!(spec(3, 10, 1, 12).validate().is_err());
        assert!(spec(3, 10, 1, 13).validate().is_ok());
    }

    #[test]
    fn jl_and_jldt_row_counts() {
        let est = tagged(30, 4, 5);
        let s = spec(2, 3, 2, 10);
        let (tr, te) = build_jl(&est, None, &s).unwrap();
        assert_eq!((tr.rows(), te.rows()), (12, 8));
        assert_eq!(tr.series, vec![0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]);
        let (tr, te) = build_jldt(&est, None, &s).unwrap();
        assert_eq!((tr.rows(), te.rows()), (15, 10));
        assert_eq!(tr.domain, Domain::Antenna);
        assert_eq!((tr.features.ncols(), tr.labels.ncols()), (2 * 2 * 4, 8));
    }

    #[test]
    fn jl_single_subcarrier_matches_series() {
        let est = tagged(30, 1, 3);
        let s = spec(3, 4, 2, 10);
        let (tr, _) = build_jl(&est, None, &s).unwrap();
        let single = build_series_dataset(&est, None, 0, &s, Phase::Train).unwrap();
        assert_eq!(tr, single);
    }

    #[test]
    fn scale_fit_and_apply() {
        let est = ChannelTensor::new(
            12,
            1,
            1,
            (0..12).map(|i| if i % 2 == 0 { c(2.0, -2.0) } else { c(-2.0, 2.0) }).collect(),
            Domain::Subcarrier,
            Provenance::Estimated,
        )
        .unwrap();
        let mut ds = build_series_dataset(&est, None, 0, &spec(2, 4, 1, 6), Phase::Train).unwrap();
        let original = ds.clone();
        let s = fit_scale(&ds).unwrap();
        assert_eq!(s, 2.0);
        apply_scale(&mut ds, s).unwrap();
        assert!(ds.features.iter().all(|x| x.abs() == 1.0));
        apply_scale(&mut ds, 1.0).unwrap();
        for (a, b) in ds.features.iter().zip(original.features.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        let zero = ChannelTensor::zeros(12, 1, 1, Domain::Subcarrier, Provenance::Estimated);
        let zds = build_series_dataset(&zero, None, 0, &spec(2, 4, 1, 6), Phase::Train).unwrap();
        assert!(fit_scale(&zds).is_err());
    }

    #[test]
    fn leakage_check() {
        let est = tagged(40, 2, 2);
        let s = spec(3, 5, 4, 8);
        let (tr, te) = build_jl(&est, None, &s).unwrap();
        assert_eq!(tr.block_span(), Some((0, 7)));
        assert_eq!(te.block_span(), Some((8, 14)));
        check_no_leakage(&tr, &te).unwrap();
        assert!(check_no_leakage(&te, &tr).is_err());
    }
}
