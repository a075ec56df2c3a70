//! k-means visual vocabularies and bag-of-words coding.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::{Descriptor, DescriptorKind};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    centroids: Vec<f64>,
    k: usize,
    dim: usize,
    kind: DescriptorKind,
}

impl Codebook {
    /// Wraps a row-major `k x dim` centroid matrix.
    pub fn new(centroids: Vec<f64>, k: usize, dim: usize, kind: DescriptorKind) -> Result<Self> {
        if k == 0 || dim == 0 {
            return Err(Error::Empty("codebook"));
        }
        if centroids.len() != k * dim {
            return Err(Error::DimensionMismatch { expected: k * dim, got: centroids.len() });
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("codebook"));
        }
        Ok(Self { centroids, k, dim, kind })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    pub fn centroid(&self, i: usize) -> &[f64] {
        &self.centroids[i * self.dim..(i + 1) * self.dim]
    }

    /// Index of the nearest centroid (lowest index on ties) and the squared distance to it.
    pub fn nearest(&self, v: &[f64]) -> (usize, f64) {
        nearest(&self.centroids, self.dim, v)
    }

    /// Smallest squared distance between two centroids.
    pub fn min_pairwise_distance2(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.k {
            for j in i + 1..self.k {
                best = best.min(dist2(self.centroid(i), self.centroid(j)));
            }
        }
        best
    }
}

/// L1-normalized visual-word histogram. All zeros and flagged `empty` when nothing was coded.
#[derive(Debug, Clone, PartialEq)]
pub struct BoWHistogram {
    pub values: Vec<f64>,
    pub kind: DescriptorKind,
    pub empty: bool,
}

impl BoWHistogram {
    pub fn empty(k: usize, kind: DescriptorKind) -> Self {
        Self { values: vec![0.0; k], kind, empty: true }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
}

/// A trained codebook plus the inertia after seeding and after every Lloyd iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansTrace {
    pub codebook: Codebook,
    pub inertia: Vec<f64>,
    pub iterations: usize,
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[f64], dim: usize, v: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.chunks_exact(dim).enumerate() {
        let d = dist2(c, v);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn usable(descriptors: &[Descriptor]) -> Result<(Vec<&[f64]>, usize)> {
    let rows: Vec<&[f64]> = descriptors.iter().filter(|d| !d.degenerate).map(|d| d.values.as_slice()).collect();
    let dim = rows.first().map_or(0, |r| r.len());
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
    }
    if rows.iter().any(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("descriptor"));
    }
    Ok((rows, dim))
}

fn distinct_count(rows: &[&[f64]]) -> usize {
    let mut keys: Vec<Vec<u64>> = rows.iter().map(|r| r.iter().map(|v| (v + 0.0).to_bits()).collect()).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

fn seed_plus_plus(rows: &[&[f64]], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rows.len();
    let mut centroids = Vec::with_capacity(k * dim);
    centroids.extend_from_slice(rows[rng.random_range(0..n)]);
    let mut d2: Vec<f64> = rows.iter().map(|r| dist2(r, &centroids[..dim])).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = n;
        for (i, &w) in d2.iter().enumerate() {
            if w > 0.0 {
                pick = i;
                if target < w {
                    break;
                }
                target -= w;
            }
        }
        let start = centroids.len();
        centroids.extend_from_slice(rows[pick]);
        for (d, r) in d2.iter_mut().zip(rows) {
            *d = d.min(dist2(r, &centroids[start..]));
        }
    }
    centroids
}

fn assign(rows: &[&[f64]], centroids: &[f64], dim: usize, labels: &mut [usize], dists: &mut [f64]) -> f64 {
    let mut inertia = 0.0;
    for ((r, l), d) in rows.iter().zip(labels.iter_mut()).zip(dists.iter_mut()) {
        let (i, dd) = nearest(centroids, dim, r);
        *l = i;
        *d = dd;
        inertia += dd;
    }
    inertia
}

/// Lloyd's k-means with k-means++ seeding. Degenerate descriptors are ignored. Empty
/// clusters are re-seeded from the point farthest from its assigned centroid.
pub fn train_codebook_traced(descriptors: &[Descriptor], kind: DescriptorKind, cfg: &KMeansConfig) -> Result<KMeansTrace> {
    if cfg.k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let (rows, dim) = usable(descriptors)?;
    let distinct = distinct_count(&rows);
    if distinct < cfg.k {
        return Err(Error::NotEnoughDescriptors { needed: cfg.k, found: distinct });
    }
    let k = cfg.k;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut centroids = seed_plus_plus(&rows, dim, k, &mut rng);
    let n = rows.len();
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut inertia = vec![assign(&rows, &centroids, dim, &mut labels, &mut dists)];
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (r, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            sums[l * dim..(l + 1) * dim].iter_mut().zip(r.iter()).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                    *dst = s * inv;
                }
            }
        }
        for c in (0..k).filter(|&c| counts[c] == 0) {
            let far = (0..n).fold(0, |best, i| if dists[i] > dists[best] { i } else { best });
            centroids[c * dim..(c + 1) * dim].copy_from_slice(rows[far]);
            for (d, r) in dists.iter_mut().zip(&rows) {
                *d = d.min(dist2(r, rows[far]));
            }
        }
        let before = labels.clone();
        inertia.push(assign(&rows, &centroids, dim, &mut labels, &mut dists));
        if labels == before {
            break;
        }
    }
    Ok(KMeansTrace { codebook: Codebook::new(centroids, k, dim, kind)?, inertia, iterations })
}

pub fn train_codebook(descriptors: &[Descriptor], kind: DescriptorKind, cfg: &KMeansConfig) -> Result<Codebook> {
    train_codebook_traced(descriptors, kind, cfg).map(|t| t.codebook)
}

/// Votes each non-degenerate descriptor into its nearest centroid and L1-normalizes.
pub fn quantize(descriptors: &[Descriptor], cb: &Codebook) -> Result<BoWHistogram> {
    if let Some(bad) = descriptors.iter().find(|d| d.len() != cb.dim) {
        return Err(Error::DimensionMismatch { expected: cb.dim, got: bad.len() });
    }
    let mut counts = vec![0usize; cb.k];
    for d in descriptors.iter().filter(|d| !d.degenerate) {
        counts[cb.nearest(&d.values).0] += 1;
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Ok(BoWHistogram::empty(cb.k, cb.kind));
    }
    let values = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(BoWHistogram { values, kind: cb.kind, empty: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn desc(v: &[f64]) -> Descriptor {
        Descriptor::new(v.to_vec())
    }

    fn book() -> Codebook {
        Codebook::new(vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0], 4, 2, DescriptorKind::Static).unwrap()
    }

    fn random_rows(n: usize, d: usize, seed: u64) -> Vec<Descriptor> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Descriptor::new((0..d).map(|_| rng.random::<f64>()).collect())).collect()
    }

    #[test]
    fn counts_votes_at_centroids() {
        let h = quantize(&[desc(&[0.0, 0.0]), desc(&[0.0, 0.0]), desc(&[1.0, 1.0])], &book()).unwrap();
        assert_eq!(h.values, vec![2.0 / 3.0, 0.0, 0.0, 1.0 / 3.0]);
        assert!(!h.empty);
    }

    #[test]
    fn empty_input_gives_flagged_zero_histogram() {
        let h = quantize(&[], &book()).unwrap();
        assert!(h.empty);
        assert_eq!(h.values, vec![0.0; 4]);
        let h = quantize(&[Descriptor::degenerate(2)], &book()).unwrap();
        assert!(h.empty);
    }

    #[test]
    fn ties_go_to_the_lowest_index() {
        let h = quantize(&[desc(&[0.5, 0.5])], &book()).unwrap();
        assert_eq!(h.values, vec![1.0, 0.0, 0.0, 0.0]);
        let h = quantize(&[desc(&[1.0, 0.5])], &book()).unwrap();
        assert_eq!(h.values, vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        assert_eq!(quantize(&[desc(&[1.0])], &book()), Err(Error::DimensionMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn k_distinct_points_become_the_centroids() {
        let rows = random_rows(6, 3, 5);
        let t = train_codebook_traced(&rows, DescriptorKind::Static, &KMeansConfig { k: 6, seed: 1, max_iter: 10 }).unwrap();
        assert_eq!(*t.inertia.last().unwrap(), 0.0);
        for r in &rows {
            assert_eq!(t.codebook.nearest(&r.values).1, 0.0);
        }
    }

    #[test]
    fn too_few_distinct_descriptors() {
        let mut rows = random_rows(3, 4, 2);
        rows.extend(rows.clone());
        rows.push(Descriptor::degenerate(4));
        assert_eq!(
            train_codebook(&rows, DescriptorKind::Static, &KMeansConfig { k: 4, seed: 0, max_iter: 5 }),
            Err(Error::NotEnoughDescriptors { needed: 4, found: 3 })
        );
    }

    #[test]
    fn training_is_deterministic_and_inertia_never_rises() {
        let rows = random_rows(500, 16, 9);
        let cfg = KMeansConfig { k: 12, seed: 77, max_iter: 50 };
        let a = train_codebook_traced(&rows, DescriptorKind::Spacetime, &cfg).unwrap();
        let b = train_codebook_traced(&rows, DescriptorKind::Spacetime, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.inertia.len() >= 2);
        for w in a.inertia.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", a.inertia);
        }
        assert!(a.codebook.min_pairwise_distance2() > 0.0);
    }

    #[test]
    fn empty_clusters_are_reseeded() {
        // Two tight groups and k = 3: k-means++ may put two seeds in one group.
        let mut rows = Vec::new();
        for i in 0..20 {
            let e = i as f64 * 1e-3;
            rows.push(desc(&[e, 0.0]));
            rows.push(desc(&[10.0 + e, 0.0]));
        }
        for seed in 0..20 {
            let cb = train_codebook(&rows, DescriptorKind::Static, &KMeansConfig { k: 3, seed, max_iter: 100 }).unwrap();
            assert!(cb.min_pairwise_distance2() > 0.0);
        }
    }

    proptest! {
        #[test]
        fn histogram_sums_to_one_and_ignores_order(
            pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..40),
            rot in 0usize..40,
        ) {
            let ds: Vec<Descriptor> = pts.iter().map(|&(a, b)| desc(&[a, b])).collect();
            let h = quantize(&ds, &book()).unwrap();
            prop_assert!((h.values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(h.values.iter().all(|&v| v >= 0.0));
            let mut shuffled = ds.clone();
            shuffled.rotate_left(rot % ds.len());
            shuffled.reverse();
            prop_assert_eq!(quantize(&shuffled, &book()).unwrap(), h);
        }
    }
}
