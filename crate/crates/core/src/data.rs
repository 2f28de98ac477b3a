//! Labelled datasets, the synthetic blob generator, and retain/forget splits.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{bail, Result};
use crate::rng::{self, stream};
use crate::tensor::Tensor;

/// Feature matrix with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Tensor,
    labels: Vec<usize>,
    num_classes: usize,
    name: String,
}

impl Dataset {
    pub fn new(
        features: Tensor,
        labels: Vec<usize>,
        num_classes: usize,
        name: impl Into<String>,
    ) -> Result<Self> {
        let (rows, _) = features.matrix_dims()?;
        if rows == 0 {
            bail!(Parameter, "dataset is empty");
        }
        if labels.len() != rows {
            bail!(Shape, "{} labels for {} feature rows", labels.len(), rows);
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= num_classes) {
            bail!(Parameter, "label {} outside [0, {})", y, num_classes);
        }
        if !features.is_finite() {
            bail!(Parameter, "non-finite feature value");
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            name: name.into(),
        })
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Result<Self> {
        if let Some(&i) = indices.iter().find(|&&i| i >= self.len()) {
            bail!(Parameter, "index {} outside dataset of {}", i, self.len());
        }
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(
            self.features.select_rows(indices),
            labels,
            self.num_classes,
            name,
        )
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Concatenation of two datasets over the same label space.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        if self.dim() != other.dim() || self.num_classes != other.num_classes {
            bail!(Shape, "cannot concatenate datasets of different layout");
        }
        let mut data = self.features.data().to_vec();
        data.extend_from_slice(other.features.data());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let features = Tensor::new(vec![labels.len(), self.dim()], data)?;
        Self::new(features, labels, self.num_classes, self.name.clone())
    }
}

/// Blob generator parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub classes: usize,
    pub dim: usize,
    pub spread: f64,
    pub seed: u64,
}

impl BlobSpec {
    fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.dim < 2 {
            bail!(Parameter, "blobs need at least 2 classes and 2 dimensions");
        }
        if !(self.spread > 0.0) || !self.spread.is_finite() {
            bail!(Parameter, "spread must be positive, got {}", self.spread);
        }
        Ok(())
    }

    /// Class means on a scaled axis lattice: class `k` sits at distance
    /// `1 + k / dim` along a seeded permutation of the coordinate axes.
    fn means(&self) -> Vec<Vec<f64>> {
        let mut axes: Vec<usize> = (0..self.dim).collect();
        axes.shuffle(&mut rng::seeded(self.seed, stream::BLOB_MEANS));
        (0..self.classes)
            .map(|k| {
                let mut m = vec![0.0; self.dim];
                m[axes[k % self.dim]] = 1.0 + (k / self.dim) as f64;
                m
            })
            .collect()
    }
}

/// `n_per_class` isotropic Gaussian samples around each class mean, classes
/// interleaved, globally min-max scaled into `[0, 1]`.
pub fn gen_blobs(
    classes: usize,
    dim: usize,
    n_per_class: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    let spec = BlobSpec {
        classes,
        dim,
        spread,
        seed,
    };
    Ok(gen_blobs_split(&spec, n_per_class, 0)?.0)
}

/// Train and test sets drawn from the same blobs. Both share one min-max
/// scaling. When `n_test == 0` the returned test set equals the train set.
pub fn gen_blobs_split(spec: &BlobSpec, n_train: usize, n_test: usize) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    if n_train == 0 {
        bail!(Parameter, "n_per_class must be at least 1");
    }
    let means = spec.means();
    let mut rng = rng::seeded(spec.seed, stream::BLOB_SAMPLES);
    let per_class = n_train + n_test;
    let total = per_class * spec.classes;
    let mut data = Vec::with_capacity(total * spec.dim);
    let mut labels = Vec::with_capacity(total);
    for _ in 0..per_class {
        for (k, mean) in means.iter().enumerate() {
            for &m in mean {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(m + spec.spread * z);
            }
            labels.push(k);
        }
    }
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = (hi - lo).max(f64::MIN_POSITIVE);
    for v in &mut data {
        *v = (*v - lo) / range;
    }
    let all = Dataset::new(
        Tensor::new(vec![total, spec.dim], data)?,
        labels,
        spec.classes,
        "blobs",
    )?;
    let cut = n_train * spec.classes;
    let train_idx: Vec<usize> = (0..cut).collect();
    let train = all.subset(&train_idx, "blobs-train")?;
    let test = if n_test == 0 {
        train.clone()
    } else {
        let test_idx: Vec<usize> = (cut..total).collect();
        all.subset(&test_idx, "blobs-test")?
    };
    Ok((train, test))
}

/// Unlearning scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Every sample of one or more classes is forgotten.
    ClassRemoval,
    /// A uniform random fraction of the training set is forgotten.
    HomogeneousRemoval,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::ClassRemoval => "cr",
            Scenario::HomogeneousRemoval => "hr",
        }
    }
}

/// Retain/forget partitions of a train/test pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitBundle {
    pub scenario: Scenario,
    pub retain_train: Dataset,
    pub forget_train: Dataset,
    /// Class-removal only.
    pub retain_test: Option<Dataset>,
    /// Class-removal only.
    pub forget_test: Option<Dataset>,
    /// The full, undivided test set.
    pub test: Dataset,
    /// Class-removal only.
    pub forget_classes: Vec<usize>,
    /// Homogeneous-removal only.
    pub forget_fraction: Option<f64>,
    /// Row indices of the original train set.
    pub retain_indices: Vec<usize>,
    pub forget_indices: Vec<usize>,
}

/// Partitions by label membership in `forget_classes`.
pub fn split_cr(train: &Dataset, test: &Dataset, forget_classes: &[usize]) -> Result<SplitBundle> {
    let k = train.num_classes();
    if test.num_classes() != k {
        bail!(Parameter, "train and test disagree on the class count");
    }
    let forget: BTreeSet<usize> = forget_classes.iter().copied().collect();
    if forget.is_empty() {
        bail!(Parameter, "forget class set is empty");
    }
    if let Some(&c) = forget.iter().find(|&&c| c >= k) {
        bail!(Parameter, "forget class {} outside [0, {})", c, k);
    }
    if forget.len() >= k {
        bail!(Parameter, "forgetting all {} classes leaves nothing to retain", k);
    }
    let partition = |d: &Dataset| -> (Vec<usize>, Vec<usize>) {
        (0..d.len()).partition(|&i| !forget.contains(&d.labels()[i]))
    };
    let (retain_idx, forget_idx) = partition(train);
    let (retain_test_idx, forget_test_idx) = partition(test);
    let subset = |d: &Dataset, idx: &[usize], name: &str| {
        d.subset(idx, name).map_err(|_| {
            crate::Error::Data(alloc::format!("{} partition is empty for classes {:?}", name, forget))
        })
    };
    Ok(SplitBundle {
        scenario: Scenario::ClassRemoval,
        retain_train: subset(train, &retain_idx, "retain-train")?,
        forget_train: subset(train, &forget_idx, "forget-train")?,
        retain_test: Some(subset(test, &retain_test_idx, "retain-test")?),
        forget_test: Some(subset(test, &forget_test_idx, "forget-test")?),
        test: test.clone(),
        forget_classes: forget.into_iter().collect(),
        forget_fraction: None,
        retain_indices: retain_idx,
        forget_indices: forget_idx,
    })
}

/// Seeded uniform sample of `round(fraction · N)` training rows as the
/// forget-set; the test set is left whole.
pub fn split_hr(train: &Dataset, test: &Dataset, fraction: f64, seed: u64) -> Result<SplitBundle> {
    if !(fraction > 0.0 && fraction < 1.0) {
        bail!(Parameter, "forget fraction must lie in (0, 1), got {}", fraction);
    }
    let n = train.len();
    let m = libm::round(fraction * n as f64) as usize;
    if m == 0 || m >= n {
        bail!(Parameter, "fraction {} of {} samples leaves an empty partition", fraction, n);
    }
    let mut rng = rng::seeded(seed, stream::HR_SPLIT);
    let mut forget_idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
    forget_idx.sort_unstable();
    let mut is_forget = vec![false; n];
    for &i in &forget_idx {
        is_forget[i] = true;
    }
    let retain_idx: Vec<usize> = (0..n).filter(|&i| !is_forget[i]).collect();
    Ok(SplitBundle {
        scenario: Scenario::HomogeneousRemoval,
        retain_train: train.subset(&retain_idx, "retain-train")?,
        forget_train: train.subset(&forget_idx, "forget-train")?,
        retain_test: None,
        forget_test: None,
        test: test.clone(),
        forget_classes: Vec::new(),
        forget_fraction: Some(fraction),
        retain_indices: retain_idx,
        forget_indices: forget_idx,
    })
}

/// What a single protocol run forgets.
#[derive(Debug, Clone, PartialEq)]
pub enum ForgetSpec {
    Classes(Vec<usize>),
    Fraction(f64),
}

impl ForgetSpec {
    pub fn describe(&self) -> String {
        match self {
            ForgetSpec::Classes(c) => {
                let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                alloc::format!("classes:{}", parts.join("+"))
            }
            ForgetSpec::Fraction(f) => alloc::format!("fraction:{}", f),
        }
    }
}

/// Seed used for every class-removal run and for training original models.
pub const PROTOCOL_SEED: u64 = 42;
/// Seeds of the ten homogeneous-removal runs.
pub const HR_SEEDS: [u64; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 42];
pub const HR_FRACTION: f64 = 0.1;

/// The standard run list: class removal forgets one class per run, striding
/// over the label space so ten runs cover it (every class for 10 classes,
/// multiples of 10 for 100); homogeneous removal forgets a fresh 10% under
/// each of the ten seeds.
pub fn seed_protocol(scenario: Scenario, num_classes: usize) -> Vec<(u64, ForgetSpec)> {
    match scenario {
        Scenario::ClassRemoval => {
            let stride = (num_classes / 10).max(1);
            (0..num_classes.min(10))
                .map(|i| (PROTOCOL_SEED, ForgetSpec::Classes(vec![i * stride])))
                .collect()
        }
        Scenario::HomogeneousRemoval => HR_SEEDS
            .iter()
            .map(|&s| (s, ForgetSpec::Fraction(HR_FRACTION)))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_counts_and_labels() {
        let d = gen_blobs(2, 3, 10, 0.1, 5).unwrap();
        assert_eq!(d.len(), 20);
        assert_eq!(d.class_counts(), vec![10, 10]);
        assert!(d.features().data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn blobs_are_seeded() {
        assert_eq!(gen_blobs(3, 4, 5, 0.2, 1).unwrap(), gen_blobs(3, 4, 5, 0.2, 1).unwrap());
        assert_ne!(gen_blobs(3, 4, 5, 0.2, 1).unwrap(), gen_blobs(3, 4, 5, 0.2, 2).unwrap());
    }

    #[test]
    fn blob_parameters_validated() {
        assert!(gen_blobs(1, 3, 5, 0.1, 0).is_err());
        assert!(gen_blobs(2, 1, 5, 0.1, 0).is_err());
        assert!(gen_blobs(2, 3, 0, 0.1, 0).is_err());
        assert!(gen_blobs(2, 3, 5, 0.0, 0).is_err());
    }

    #[test]
    fn many_classes_wrap_the_lattice() {
        let spec = BlobSpec {
            classes: 7,
            dim: 3,
            spread: 0.1,
            seed: 0,
        };
        let means = spec.means();
        for a in 0..7 {
            for b in a + 1..7 {
                let d2: f64 = means[a].iter().zip(&means[b]).map(|(x, y)| (x - y) * (x - y)).sum();
                assert!(d2 >= 1.0, "means {} and {} too close", a, b);
            }
        }
    }

    #[test]
    fn cr_counts() {
        let d = gen_blobs(4, 3, 10, 0.1, 0).unwrap();
        let s = split_cr(&d, &d, &[0]).unwrap();
        assert_eq!(s.forget_train.len(), 10);
        assert_eq!(s.retain_train.len(), 30);
        let s2 = split_cr(&d, &d, &[0, 1]).unwrap();
        assert_eq!(s2.forget_train.len(), 20);
        assert_eq!(s2.forget_classes, vec![0, 1]);
    }

    #[test]
    fn cr_rejects_degenerate_sets() {
        let d = gen_blobs(3, 3, 4, 0.1, 0).unwrap();
        assert!(split_cr(&d, &d, &[]).is_err());
        assert!(split_cr(&d, &d, &[0, 1, 2]).is_err());
        assert!(split_cr(&d, &d, &[3]).is_err());
    }

    #[test]
    fn hr_rounding_and_bounds() {
        let d = gen_blobs(2, 2, 50, 0.1, 0).unwrap();
        let s = split_hr(&d, &d, 1.0 / 100.0, 0).unwrap();
        assert_eq!(s.forget_train.len(), 1);
        assert!(split_hr(&d, &d, 0.0, 0).is_err());
        assert!(split_hr(&d, &d, 1.0, 0).is_err());
        assert!(split_hr(&d, &d, 0.001, 0).is_err());
    }

    #[test]
    fn protocols() {
        let hr = seed_protocol(Scenario::HomogeneousRemoval, 10);
        let seeds: Vec<u64> = hr.iter().map(|(s, _)| *s).collect();
        assert_eq!(seeds, vec![0, 1, 2, 3, 4, 5, 6, 7, 8, 42]);
        assert!(hr.iter().all(|(_, f)| *f == ForgetSpec::Fraction(0.1)));

        let classes = |k| -> Vec<usize> {
            seed_protocol(Scenario::ClassRemoval, k)
                .into_iter()
                .map(|(s, f)| {
                    assert_eq!(s, 42);
                    match f {
                        ForgetSpec::Classes(c) => c[0],
                        _ => unreachable!(),
                    }
                })
                .collect()
        };
        assert_eq!(classes(10), (0..10).collect::<Vec<_>>());
        assert_eq!(classes(100), (0..10).map(|i| i * 10).collect::<Vec<_>>());
        assert_eq!(classes(200), (0..10).map(|i| i * 20).collect::<Vec<_>>());
        assert_eq!(classes(4), vec![0, 1, 2, 3]);
    }
}
