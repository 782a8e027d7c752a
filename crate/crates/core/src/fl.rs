//! Desk-scale federated learning: class-skewed synthetic data, a softmax
//! classifier trained by mini-batch SGD, and two-tier weighted averaging.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent once std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::association::DataSplit;
use crate::{Error, Result};

/// Clamp for `log` arguments.
pub const LOG_FLOOR: f64 = 1e-12;
/// A mini-batch loss above this aborts training.
pub const DIVERGENCE_LOSS: f64 = 1e6;

/// Flat softmax-regression parameters: per class, `d` weights then a bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub w: Vec<f64>,
    pub n_classes: usize,
    pub n_features: usize,
}

impl ModelWeights {
    pub fn zeros(n_classes: usize, n_features: usize) -> Self {
        Self { w: vec![0.0; n_classes * (n_features + 1)], n_classes, n_features }
    }

    pub fn random<R: Rng + ?Sized>(n_classes: usize, n_features: usize, scale: f64, rng: &mut R) -> Self {
        let mut m = Self::zeros(n_classes, n_features);
        for v in &mut m.w {
            *v = scale * normal(rng);
        }
        m
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Payload size in bits at 32 bits per parameter.
    pub fn size_bits(&self) -> f64 {
        32.0 * self.w.len() as f64
    }

    fn stride(&self) -> usize {
        self.n_features + 1
    }

    /// Class scores for one sample.
    pub fn logits(&self, x: &[f64], out: &mut [f64]) {
        let s = self.stride();
        for (c, o) in out.iter_mut().enumerate() {
            let row = &self.w[c * s..(c + 1) * s];
            *o = row[..self.n_features].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + row[self.n_features];
        }
    }

    /// Class probabilities for one sample.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.n_classes];
        self.logits(x, &mut z);
        softmax_in_place(&mut z);
        z
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Samples of one device (or the test set), row-major features.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDataset {
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    pub n_features: usize,
}

impl LocalDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn class_counts(&self, n_classes: usize) -> Vec<u64> {
        let mut c = vec![0u64; n_classes];
        for &y in &self.labels {
            c[y] += 1;
        }
        c
    }
}

/// Class centres `sep * N(0, I_d)`.
pub fn class_means<R: Rng + ?Sized>(n_classes: usize, n_features: usize, sep: f64, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n_classes)
        .map(|_| (0..n_features).map(|_| sep * normal(rng)).collect())
        .collect()
}

/// Class-skewed split: every device draws `classes_per_device` distinct
/// classes and `min..=max` samples of each.
pub fn skewed_split<R: Rng + ?Sized>(
    n_classes: usize,
    n_devices: usize,
    classes_per_device: usize,
    min: u64,
    max: u64,
    rng: &mut R,
) -> Result<DataSplit> {
    if classes_per_device == 0 || classes_per_device > n_classes || min == 0 || min > max {
        return Err(Error::InvalidArgument("bad skewed split parameters".into()));
    }
    let mut s = vec![vec![0u64; n_devices]; n_classes];
    let mut classes: Vec<usize> = (0..n_classes).collect();
    for k in 0..n_devices {
        let (chosen, _) = classes.partial_shuffle(rng, classes_per_device);
        for &c in chosen.iter() {
            s[c][k] = rng.random_range(min..=max);
        }
    }
    DataSplit::new(s)
}

fn blob<R: Rng + ?Sized>(mean: &[f64], noise_std: f64, out: &mut Vec<f64>, rng: &mut R) {
    for &mu in mean {
        out.push(mu + noise_std * normal(rng));
    }
}

/// Gaussian blobs: device `k` gets exactly `S[c][k]` samples of class `c`
/// (class-sorted), plus a separate test set with `test_per_class` samples of
/// every class.
pub fn synth_datasets<R: Rng + ?Sized>(
    split: &DataSplit,
    means: &[Vec<f64>],
    noise_std: f64,
    test_per_class: usize,
    rng: &mut R,
) -> Result<(Vec<LocalDataset>, LocalDataset)> {
    if !(noise_std > 0.0) {
        return Err(Error::InvalidArgument("noise_std must be positive".into()));
    }
    if means.len() != split.n_classes() {
        return Err(Error::InvalidArgument("one mean per class required".into()));
    }
    let d = means.first().map_or(0, Vec::len);
    for i in 0..means.len() {
        for j in 0..i {
            if means[i] == means[j] {
                return Err(Error::InvalidArgument("class means must be distinct".into()));
            }
        }
    }
    let mut devices = Vec::with_capacity(split.n_devices());
    for k in 0..split.n_devices() {
        let n = split.device_total(k) as usize;
        let mut features = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for (c, mean) in means.iter().enumerate() {
            for _ in 0..split.count(c, k) {
                blob(mean, noise_std, &mut features, rng);
                labels.push(c);
            }
        }
        devices.push(LocalDataset { features, labels, n_features: d });
    }
    let mut features = Vec::with_capacity(test_per_class * means.len() * d);
    let mut labels = Vec::with_capacity(test_per_class * means.len());
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..test_per_class {
            blob(mean, noise_std, &mut features, rng);
            labels.push(c);
        }
    }
    Ok((devices, LocalDataset { features, labels, n_features: d }))
}

/// `sum_c -p(c) E[log prob of class c]`, the expectation taken over the
/// samples labelled `c`. Classes without samples contribute nothing.
pub fn cross_entropy(probs: &[Vec<f64>], labels: &[usize], p: &[f64]) -> f64 {
    let mut sum = vec![0.0; p.len()];
    let mut count = vec![0usize; p.len()];
    for (pr, &y) in probs.iter().zip(labels) {
        sum[y] -= pr[y].max(LOG_FLOOR).ln();
        count[y] += 1;
    }
    (0..p.len()).filter(|&c| count[c] > 0).map(|c| p[c] * sum[c] / count[c] as f64).sum()
}

/// Mean cross-entropy and its gradient over the samples `idx`.
pub fn loss_and_grad(w: &ModelWeights, data: &LocalDataset, idx: &[usize]) -> (f64, Vec<f64>) {
    let c = w.n_classes;
    let s = w.n_features + 1;
    let mut grad = vec![0.0; w.len()];
    let mut z = vec![0.0; c];
    let mut loss = 0.0;
    for &i in idx {
        let x = data.sample(i);
        let y = data.labels[i];
        w.logits(x, &mut z);
        // log-sum-exp form: exact, and unbounded when the model blows up
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - z[y];
        softmax_in_place(&mut z);
        for (cls, &pc) in z.iter().enumerate() {
            let e = pc - if cls == y { 1.0 } else { 0.0 };
            let row = &mut grad[cls * s..(cls + 1) * s];
            for (g, &xi) in row.iter_mut().zip(x) {
                *g += e * xi;
            }
            row[w.n_features] += e;
        }
    }
    let n = idx.len().max(1) as f64;
    for g in &mut grad {
        *g /= n;
    }
    (loss / n, grad)
}

/// Mini-batch SGD on the softmax cross-entropy.
pub fn local_train<R: Rng + ?Sized>(
    w: &ModelWeights,
    data: &LocalDataset,
    epochs: usize,
    lr: f64,
    batch: usize,
    rng: &mut R,
) -> Result<ModelWeights> {
    if !(lr > 0.0) || batch == 0 {
        return Err(Error::InvalidArgument("learning rate and batch size must be positive".into()));
    }
    let mut w = w.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch) {
            let (loss, grad) = loss_and_grad(&w, data, chunk);
            if !(loss <= DIVERGENCE_LOSS) {
                return Err(Error::Diverged(loss));
            }
            for (v, g) in w.w.iter_mut().zip(&grad) {
                *v -= lr * g;
            }
        }
    }
    Ok(w)
}

/// Dataset-size weighted average, summed in input order.
fn weighted_average(weights: &[&ModelWeights], sizes: &[u64]) -> Result<ModelWeights> {
    let first = weights.first().ok_or(Error::EmptyAggregation)?;
    if weights.len() != sizes.len() || weights.iter().any(|w| w.len() != first.len()) {
        return Err(Error::InvalidArgument("mismatched aggregation inputs".into()));
    }
    let total: u64 = sizes.iter().sum();
    if total == 0 {
        return Err(Error::EmptyAggregation);
    }
    let mut out = ModelWeights::zeros(first.n_classes, first.n_features);
    for (w, &n) in weights.iter().zip(sizes) {
        let a = n as f64 / total as f64;
        for (o, v) in out.w.iter_mut().zip(&w.w) {
            *o += a * v;
        }
    }
    Ok(out)
}

/// MEC tier: average of device models weighted by local dataset size.
pub fn mec_aggregate(weights: &[&ModelWeights], sizes: &[u64]) -> Result<ModelWeights> {
    weighted_average(weights, sizes)
}

/// CU tier: average of MEC models weighted by the data each MEC represents.
pub fn cu_aggregate(mec_weights: &[&ModelWeights], mec_sizes: &[u64]) -> Result<ModelWeights> {
    weighted_average(mec_weights, mec_sizes)
}

/// Argmax accuracy and mean cross-entropy.
pub fn evaluate(w: &ModelWeights, test: &LocalDataset) -> (f64, f64) {
    if test.is_empty() {
        return (0.0, 0.0);
    }
    let mut z = vec![0.0; w.n_classes];
    let mut correct = 0usize;
    let mut loss = 0.0;
    for i in 0..test.len() {
        w.logits(test.sample(i), &mut z);
        softmax_in_place(&mut z);
        let mut best = 0;
        for c in 1..z.len() {
            if z[c] > z[best] {
                best = c;
            }
        }
        if best == test.labels[i] {
            correct += 1;
        }
        loss -= z[test.labels[i]].max(LOG_FLOOR).ln();
    }
    let n = test.len() as f64;
    (correct as f64 / n, loss / n)
}
