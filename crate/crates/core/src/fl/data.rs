//! Datasets: synthetic Gaussian blobs, CSV ingestion, and IID / Dirichlet
//! label-skew partitioning across clients.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::FlError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartitionKind {
    Iid,
    /// Label skew with per-client class proportions drawn from Dirichlet(alpha).
    Dirichlet { alpha: f64 },
}

impl fmt::Display for PartitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionKind::Iid => f.write_str("iid"),
            PartitionKind::Dirichlet { .. } => f.write_str("dirichlet"),
        }
    }
}

/// Dense row-major samples with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDataset {
    pub features: Vec<f64>,
    pub labels: Vec<u32>,
    pub n_features: usize,
    pub n_classes: usize,
    pub partition: PartitionKind,
}

impl LocalDataset {
    pub fn new(features: Vec<f64>, labels: Vec<u32>, n_features: usize, n_classes: usize) -> Result<Self, FlError> {
        if n_features == 0 || n_classes == 0 {
            return Err(FlError::Dataset("need at least one feature and one class".into()));
        }
        if features.len() != labels.len() * n_features {
            return Err(FlError::Dataset(format!(
                "{} feature values do not fill {} rows of {n_features}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= n_classes) {
            return Err(FlError::Dataset(format!("label {bad} outside [0, {n_classes})")));
        }
        if let Some(v) = features.iter().find(|v| !v.is_finite()) {
            return Err(FlError::Dataset(format!("non-finite feature value {v}")));
        }
        Ok(LocalDataset { features, labels, n_features, n_classes, partition: PartitionKind::Iid })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn subset(&self, indices: &[usize]) -> LocalDataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.sample(i));
            labels.push(self.labels[i]);
        }
        LocalDataset { features, labels, n_features: self.n_features, n_classes: self.n_classes, partition: self.partition }
    }

    /// Concatenation of several shards with the same shape.
    pub fn pooled(shards: &[LocalDataset]) -> Result<LocalDataset, FlError> {
        let first = shards.first().ok_or_else(|| FlError::Dataset("no shards to pool".into()))?;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for s in shards {
            if s.n_features != first.n_features || s.n_classes != first.n_classes {
                return Err(FlError::Dataset("shards disagree on shape".into()));
            }
            features.extend_from_slice(&s.features);
            labels.extend_from_slice(&s.labels);
        }
        LocalDataset::new(features, labels, first.n_features, first.n_classes)
    }

    /// Reads `f0,...,f{d-1},label` rows. `n_classes` is one past the largest label.
    pub fn from_csv(path: &Path) -> Result<LocalDataset, FlError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FlError::Dataset(format!("{}: {e}", path.display())))?;
        Self::parse_csv(&text).map_err(|e| match e {
            FlError::Dataset(m) => FlError::Dataset(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse_csv(text: &str) -> Result<LocalDataset, FlError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| FlError::Dataset("empty CSV".into()))?;
        let columns: Vec<&str> = header.split(',').map(str::trim).collect();
        let d = columns.len().saturating_sub(1);
        let expected: Vec<String> = (0..d).map(|j| format!("f{j}")).chain(["label".to_string()]).collect();
        if d == 0 || columns != expected {
            return Err(FlError::Dataset(format!(
                "line 1: header must be {}",
                expected.join(",")
            )));
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != d + 1 {
                return Err(FlError::Dataset(format!(
                    "line {line_no}: expected {} columns, found {}",
                    d + 1,
                    cells.len()
                )));
            }
            for cell in &cells[..d] {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| FlError::Dataset(format!("line {line_no}: bad feature value '{cell}'")))?;
                features.push(v);
            }
            let label: u32 = cells[d]
                .parse()
                .map_err(|_| FlError::Dataset(format!("line {line_no}: bad label '{}'", cells[d])))?;
            labels.push(label);
        }
        if labels.is_empty() {
            return Err(FlError::Dataset("CSV has no data rows".into()));
        }
        let n_classes = *labels.iter().max().expect("nonempty") as usize + 1;
        LocalDataset::new(features, labels, d, n_classes)
    }
}

/// Synthetic isotropic Gaussian clusters, one per class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub n_features: usize,
    pub n_classes: usize,
    /// Standard deviation of the class centers around the origin.
    pub center_scale: f64,
    /// Within-class standard deviation.
    pub noise_std: f64,
}

impl BlobSpec {
    pub fn centers<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        (0..self.n_classes)
            .map(|_| {
                (0..self.n_features)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(rng);
                        z * self.center_scale
                    })
                    .collect()
            })
            .collect()
    }
}

fn push_blob_sample<R: Rng + ?Sized>(spec: &BlobSpec, center: &[f64], features: &mut Vec<f64>, rng: &mut R) {
    for &c in center {
        let z: f64 = StandardNormal.sample(rng);
        features.push(c + z * spec.noise_std);
    }
}

/// `n` samples with labels drawn from `class_probs`.
pub fn gaussian_blobs<R: Rng + ?Sized>(
    spec: &BlobSpec,
    centers: &[Vec<f64>],
    class_probs: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<LocalDataset, FlError> {
    if class_probs.len() != spec.n_classes {
        return Err(FlError::InvalidArgument("class_probs length differs from n_classes".into()));
    }
    let total: f64 = class_probs.iter().sum();
    let mut features = Vec::with_capacity(n * spec.n_features);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut u = rng.random::<f64>() * total;
        let mut label = spec.n_classes - 1;
        for (k, p) in class_probs.iter().enumerate() {
            if u < *p {
                label = k;
                break;
            }
            u -= p;
        }
        push_blob_sample(spec, &centers[label], &mut features, rng);
        labels.push(label as u32);
    }
    LocalDataset::new(features, labels, spec.n_features, spec.n_classes)
}

/// `n` samples with labels cycling through the classes.
pub fn balanced_blobs<R: Rng + ?Sized>(
    spec: &BlobSpec,
    centers: &[Vec<f64>],
    n: usize,
    rng: &mut R,
) -> Result<LocalDataset, FlError> {
    let mut features = Vec::with_capacity(n * spec.n_features);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % spec.n_classes;
        push_blob_sample(spec, &centers[label], &mut features, rng);
        labels.push(label as u32);
    }
    LocalDataset::new(features, labels, spec.n_features, spec.n_classes)
}

/// One draw from a symmetric Dirichlet(alpha) over `k` categories.
pub fn dirichlet<R: Rng + ?Sized>(alpha: f64, k: usize, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated positive");
    let mut draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    if sum > 0.0 {
        draws.iter_mut().for_each(|v| *v /= sum);
    } else {
        // Every gamma draw underflowed (tiny alpha); fall back to one class.
        let pick = rng.random_range(0..k);
        draws = (0..k).map(|i| if i == pick { 1.0 } else { 0.0 }).collect();
    }
    draws
}

/// Shuffles `pooled` and splits it into a train and test part.
pub fn train_test_split<R: Rng + ?Sized>(
    pooled: &LocalDataset,
    train_fraction: f64,
    rng: &mut R,
) -> Result<(LocalDataset, LocalDataset), FlError> {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.shuffle(rng);
    let n_train = ((pooled.len() as f64) * train_fraction).round() as usize;
    if n_train == 0 || n_train >= pooled.len() {
        return Err(FlError::Dataset(format!(
            "train fraction {train_fraction} leaves an empty split of {} samples",
            pooled.len()
        )));
    }
    Ok((pooled.subset(&order[..n_train]), pooled.subset(&order[n_train..])))
}

/// Splits an existing pool among clients with relative `weights`.
///
/// IID deals shuffled samples in proportion to the weights. Dirichlet deals
/// each class's samples in proportion to `weight_i * p_i[class]` with
/// `p_i ~ Dirichlet(alpha)`. Every client receives at least one sample.
pub fn partition<R: Rng + ?Sized>(
    pool: &LocalDataset,
    weights: &[f64],
    kind: PartitionKind,
    rng: &mut R,
) -> Result<Vec<LocalDataset>, FlError> {
    let m = weights.len();
    if m == 0 || pool.len() < m {
        return Err(FlError::Dataset(format!("cannot split {} samples among {m} clients", pool.len())));
    }
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); m];
    match kind {
        PartitionKind::Iid => {
            let mut order: Vec<usize> = (0..pool.len()).collect();
            order.shuffle(rng);
            deal(&order, weights, &mut buckets);
        }
        PartitionKind::Dirichlet { alpha } => {
            let props: Vec<Vec<f64>> = (0..m).map(|_| dirichlet(alpha, pool.n_classes, rng)).collect();
            for class in 0..pool.n_classes {
                let mut members: Vec<usize> =
                    (0..pool.len()).filter(|&i| pool.labels[i] as usize == class).collect();
                members.shuffle(rng);
                let w: Vec<f64> = weights.iter().zip(&props).map(|(wt, p)| wt * p[class]).collect();
                if w.iter().sum::<f64>() > 0.0 {
                    deal(&members, &w, &mut buckets);
                } else {
                    deal(&members, weights, &mut buckets);
                }
            }
        }
    }
    // Top up empty clients from the largest bucket.
    for i in 0..m {
        if buckets[i].is_empty() {
            let donor = (0..m).max_by_key(|&j| (buckets[j].len(), std::cmp::Reverse(j))).expect("m > 0");
            let moved = buckets[donor].pop().expect("pool.len() >= m");
            buckets[i].push(moved);
        }
    }
    Ok(buckets
        .iter()
        .map(|b| {
            let mut shard = pool.subset(b);
            shard.partition = kind;
            shard
        })
        .collect())
}

/// Largest-remainder apportionment of `items` by `weights`.
fn deal(items: &[usize], weights: &[f64], buckets: &mut [Vec<usize>]) {
    let total: f64 = weights.iter().sum();
    let n = items.len();
    let quotas: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    let mut start = 0;
    for (bucket, c) in buckets.iter_mut().zip(counts) {
        bucket.extend_from_slice(&items[start..start + c]);
        start += c;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn spec() -> BlobSpec {
        BlobSpec { n_features: 3, n_classes: 4, center_scale: 2.0, noise_std: 1.0 }
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let d = LocalDataset::parse_csv("f0,f1,label\n0.5,1.0,2\n-1,2,0\n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.n_classes, 3);
        assert_eq!(d.sample(1), &[-1.0, 2.0]);

        let e = LocalDataset::parse_csv("a,b,label\n1,2,0\n").unwrap_err();
        assert!(e.to_string().contains("line 1"));
        let e = LocalDataset::parse_csv("f0,label\n1,0\n1,x\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = LocalDataset::parse_csv("f0,label\n1,0,4\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    #[test]
    fn labels_must_be_in_range() {
        assert!(LocalDataset::new(vec![0.0, 1.0], vec![0, 3], 1, 3).is_err());
        assert!(LocalDataset::new(vec![0.0], vec![0, 1], 1, 3).is_err());
    }

    #[test]
    fn balanced_blobs_cycle_labels() {
        let s = spec();
        let mut r = rng::seeded(1);
        let c = s.centers(&mut r);
        let d = balanced_blobs(&s, &c, 10, &mut r).unwrap();
        assert_eq!(d.labels, vec![0, 1, 2, 3, 0, 1, 2, 3, 0, 1]);
    }

    #[test]
    fn dirichlet_is_a_distribution() {
        let mut r = rng::seeded(4);
        for alpha in [0.05, 0.5, 5.0] {
            let p = dirichlet(alpha, 6, &mut r);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn partition_covers_pool_and_feeds_every_client() {
        let s = spec();
        let mut r = rng::seeded(2);
        let c = s.centers(&mut r);
        let pool = balanced_blobs(&s, &c, 103, &mut r).unwrap();
        for kind in [PartitionKind::Iid, PartitionKind::Dirichlet { alpha: 0.1 }] {
            let shards = partition(&pool, &[1.0, 2.0, 1.0, 1.0, 3.0], kind, &mut r).unwrap();
            assert_eq!(shards.iter().map(|s| s.len()).sum::<usize>(), 103);
            assert!(shards.iter().all(|s| !s.is_empty() && s.partition == kind));
        }
        let iid = partition(&pool, &[1.0, 1.0], PartitionKind::Iid, &mut r).unwrap();
        assert_eq!(iid[0].len(), 52);
        assert_eq!(iid[1].len(), 51);
    }

    #[test]
    fn split_is_exhaustive() {
        let s = spec();
        let mut r = rng::seeded(3);
        let c = s.centers(&mut r);
        let pool = balanced_blobs(&s, &c, 50, &mut r).unwrap();
        let (a, b) = train_test_split(&pool, 0.8, &mut r).unwrap();
        assert_eq!((a.len(), b.len()), (40, 10));
        assert!(train_test_split(&pool, 1.0, &mut r).is_err());
    }
}
