use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::FeatureDataset;
use crate::{par, Error, Result};

/// Stop when no centroid moves farther than this (feature units).
pub const CONVERGENCE_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 300;
const DEFAULT_BATCH: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub n_init: usize,
    /// Mini-batch size; `None` runs the standard Lloyd algorithm.
    pub mini_batch: Option<usize>,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self { n_init: 10, mini_batch: None }
    }
}

impl KMeansOptions {
    pub fn mini_batch() -> Self {
        Self { n_init: 10, mini_batch: Some(DEFAULT_BATCH) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// Labels in `0..k`, numbered by first occurrence.
    pub labels: Vec<usize>,
    /// Centroids, row-major `k × dim`.
    pub centroids: Vec<f64>,
    /// Within-cluster sum of squares.
    pub inertia: f64,
    pub iterations: usize,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check(data: &FeatureDataset, k: usize) -> Result<()> {
    if k == 0 || k > data.len() {
        return Err(Error::InvalidClustering(format!("cannot form {k} clusters from {} rows", data.len())));
    }
    Ok(())
}

/// K-Means++ seeding with D² weighting.
pub fn kmeans_seed_plusplus(data: &FeatureDataset, k: usize, seed: u64) -> Result<Vec<f64>> {
    check(data, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(seed_plusplus(data, k, &mut rng))
}

fn seed_plusplus(data: &FeatureDataset, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = data.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = data.row(first).to_vec();
    let mut d2: Vec<f64> = (0..n).map(|i| dist2(data.row(i), data.row(first))).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // round-off fallback: last row with positive weight
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("positive total"))
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centroids.extend_from_slice(data.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(dist2(data.row(i), data.row(pick)));
        }
    }
    centroids
}

/// Nearest centroid per row (ties to the lowest index) and its squared distance.
fn assign(data: &FeatureDataset, centroids: &[f64], k: usize) -> Vec<(usize, f64)> {
    let dim = data.dim();
    par::map_range(data.len(), |i| {
        let row = data.row(i);
        let mut best = (0, f64::INFINITY);
        for c in 0..k {
            let d = dist2(row, &centroids[c * dim..(c + 1) * dim]);
            if d < best.1 {
                best = (c, d);
            }
        }
        best
    })
}

/// Moves the centroid of every empty cluster onto the point farthest from
/// its own centroid (taken from clusters with more than one member).
fn repair_empty(data: &FeatureDataset, centroids: &mut [f64], assignment: &mut [(usize, f64)], k: usize) {
    let dim = data.dim();
    let mut counts = vec![0usize; k];
    for &(c, _) in assignment.iter() {
        counts[c] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let mut far: Option<usize> = None;
        for (i, &(l, d)) in assignment.iter().enumerate() {
            if counts[l] > 1 && far.is_none_or(|f| d > assignment[f].1) {
                far = Some(i);
            }
        }
        let i = far.expect("k does not exceed the row count");
        counts[assignment[i].0] -= 1;
        counts[c] = 1;
        assignment[i] = (c, 0.0);
        centroids[c * dim..(c + 1) * dim].copy_from_slice(data.row(i));
    }
}

fn means(data: &FeatureDataset, assignment: &[(usize, f64)], k: usize, previous: &[f64]) -> Vec<f64> {
    let dim = data.dim();
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];
    for (i, &(c, _)) in assignment.iter().enumerate() {
        counts[c] += 1;
        for (s, x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(data.row(i)) {
            *s += x;
        }
    }
    for c in 0..k {
        if counts[c] == 0 {
            sums[c * dim..(c + 1) * dim].copy_from_slice(&previous[c * dim..(c + 1) * dim]);
        } else {
            sums[c * dim..(c + 1) * dim].iter_mut().for_each(|s| *s /= counts[c] as f64);
        }
    }
    sums
}

fn max_move(a: &[f64], b: &[f64], dim: usize) -> f64 {
    a.chunks(dim).zip(b.chunks(dim)).map(|(x, y)| dist2(x, y).sqrt()).fold(0.0, f64::max)
}

fn inertia(assignment: &[(usize, f64)]) -> f64 {
    assignment.iter().map(|a| a.1).sum()
}

fn lloyd_run(data: &FeatureDataset, k: usize, rng: &mut ChaCha8Rng) -> KMeansResult {
    let dim = data.dim();
    let mut centroids = seed_plusplus(data, k, rng);
    let mut assignment = assign(data, &centroids, k);
    repair_empty(data, &mut centroids, &mut assignment, k);
    let mut current = inertia(&assignment);
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let updated = means(data, &assignment, k, &centroids);
        let moved = max_move(&updated, &centroids, dim);
        centroids = updated;
        assignment = assign(data, &centroids, k);
        repair_empty(data, &mut centroids, &mut assignment, k);
        let next = inertia(&assignment);
        debug_assert!(
            next <= current * (1.0 + 1e-12) + 1e-300,
            "inertia increased from {current} to {next}"
        );
        current = next;
        if moved < CONVERGENCE_TOL {
            break;
        }
    }
    KMeansResult { labels: assignment.iter().map(|a| a.0).collect(), centroids, inertia: current, iterations }
}

fn minibatch_run(data: &FeatureDataset, k: usize, batch: usize, rng: &mut ChaCha8Rng) -> KMeansResult {
    let dim = data.dim();
    let n = data.len();
    let batch = batch.clamp(1, n);
    let mut centroids = seed_plusplus(data, k, rng);
    let mut counts = vec![0usize; k];
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let previous = centroids.clone();
        let rows = sample(rng, n, batch).into_vec();
        for i in rows {
            let row = data.row(i);
            let mut best = (0, f64::INFINITY);
            for c in 0..k {
                let d = dist2(row, &centroids[c * dim..(c + 1) * dim]);
                if d < best.1 {
                    best = (c, d);
                }
            }
            let c = best.0;
            counts[c] += 1;
            let eta = 1.0 / counts[c] as f64;
            for (m, x) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(row) {
                *m += eta * (x - *m);
            }
        }
        if max_move(&centroids, &previous, dim) < CONVERGENCE_TOL {
            break;
        }
    }
    let mut assignment = assign(data, &centroids, k);
    repair_empty(data, &mut centroids, &mut assignment, k);
    KMeansResult {
        labels: assignment.iter().map(|a| a.0).collect(),
        centroids,
        inertia: inertia(&assignment),
        iterations,
    }
}

/// Renumbers labels by first occurrence, permuting centroids to match.
fn relabel(result: &mut KMeansResult, k: usize, dim: usize) {
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for l in &result.labels {
        if map[*l] == usize::MAX {
            map[*l] = next;
            next += 1;
        }
    }
    for m in map.iter_mut().filter(|m| **m == usize::MAX) {
        *m = next;
        next += 1;
    }
    let mut centroids = vec![0.0; result.centroids.len()];
    for c in 0..k {
        centroids[map[c] * dim..(map[c] + 1) * dim].copy_from_slice(&result.centroids[c * dim..(c + 1) * dim]);
    }
    result.centroids = centroids;
    result.labels.iter_mut().for_each(|l| *l = map[*l]);
}

/// Best of `n_init` K-Means runs by inertia (ties keep the earliest run).
pub fn kmeans_lloyd(data: &FeatureDataset, k: usize, options: KMeansOptions, seed: u64) -> Result<KMeansResult> {
    check(data, k)?;
    if options.n_init == 0 {
        return Err(Error::InvalidClustering("n_init must be at least 1".into()));
    }
    let dim = data.dim();
    if k == data.len() {
        let mut r = KMeansResult {
            labels: (0..k).collect(),
            centroids: data.data().to_vec(),
            inertia: 0.0,
            iterations: 0,
        };
        relabel(&mut r, k, dim);
        return Ok(r);
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..options.n_init).map(|_| master.random()).collect();
    let runs = par::map_slice(&seeds, |&s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        match options.mini_batch {
            None => lloyd_run(data, k, &mut rng),
            Some(b) => minibatch_run(data, k, b, &mut rng),
        }
    });
    let mut best = runs
        .into_iter()
        .reduce(|best, r| if r.inertia < best.inertia { r } else { best })
        .expect("n_init >= 1");
    relabel(&mut best, k, dim);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(centers: &[[f64; 2]], per: usize, spread: f64, seed: u64) -> FeatureDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for c in centers {
            for _ in 0..per {
                rows.push(vec![c[0] + spread * rng.random_range(-1.0..1.0), c[1] + spread * rng.random_range(-1.0..1.0)]);
            }
        }
        FeatureDataset::from_rows(&rows).unwrap()
    }

    #[test]
    fn seeding_exhausts_rows() {
        let d = blobs(&[[0.0, 0.0], [5.0, 5.0]], 3, 0.5, 1);
        let c = kmeans_seed_plusplus(&d, 6, 9).unwrap();
        let mut picked: Vec<usize> = c
            .chunks(2)
            .map(|r| (0..6).find(|&i| d.row(i) == r).unwrap())
            .collect();
        picked.sort();
        assert_eq!(picked, (0..6).collect::<Vec<_>>());
        assert!(kmeans_seed_plusplus(&d, 7, 9).is_err());
        assert_eq!(kmeans_seed_plusplus(&d, 1, 3).unwrap().len(), 2);
    }

    #[test]
    fn seeding_separates_blobs() {
        let d = blobs(&[[0.0, 0.0], [100.0, 0.0]], 10, 1.0, 2);
        let hits = (0..10)
            .filter(|&s| {
                let c = kmeans_seed_plusplus(&d, 2, s).unwrap();
                (c[0] < 50.0) != (c[2] < 50.0)
            })
            .count();
        assert_eq!(hits, 10);
    }

    #[test]
    fn single_cluster_and_duplicates() {
        let d = blobs(&[[0.0, 0.0]], 5, 1.0, 3);
        let r = kmeans_lloyd(&d, 1, KMeansOptions::default(), 0).unwrap();
        assert!(r.labels.iter().all(|&l| l == 0));
        let rows: Vec<Vec<f64>> = (0..8).map(|i| if i % 2 == 0 { vec![1.0, 1.0] } else { vec![-2.0, 3.0] }).collect();
        let d = FeatureDataset::from_rows(&rows).unwrap();
        let r = kmeans_lloyd(&d, 2, KMeansOptions::default(), 4).unwrap();
        assert_eq!(r.inertia, 0.0);
        assert!(r.labels.iter().enumerate().all(|(i, &l)| l == i % 2));
    }

    #[test]
    fn all_identical_rows_still_fill_every_cluster() {
        let d = FeatureDataset::from_rows(&vec![vec![2.0, 2.0]; 6]).unwrap();
        for opts in [KMeansOptions::default(), KMeansOptions::mini_batch()] {
            let r = kmeans_lloyd(&d, 3, opts, 1).unwrap();
            for c in 0..3 {
                assert!(r.labels.contains(&c));
            }
        }
    }

    /// Exhaustive minimum-inertia partition into 3 non-empty groups.
    fn brute_force(d: &FeatureDataset) -> (f64, Vec<usize>) {
        let n = d.len();
        let mut best = (f64::INFINITY, vec![]);
        let mut labels = vec![0usize; n];
        let total = 3usize.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            for l in labels.iter_mut() {
                *l = c % 3;
                c /= 3;
            }
            if !(0..3).all(|k| labels.contains(&k)) {
                continue;
            }
            let mut w = 0.0;
            for k in 0..3 {
                let members: Vec<usize> = (0..n).filter(|&i| labels[i] == k).collect();
                let mean: Vec<f64> = (0..d.dim())
                    .map(|j| members.iter().map(|&i| d.row(i)[j]).sum::<f64>() / members.len() as f64)
                    .collect();
                w += members.iter().map(|&i| dist2(d.row(i), &mean)).sum::<f64>();
            }
            if w < best.0 {
                best = (w, labels.clone());
            }
        }
        best
    }

    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
    }

    #[test]
    fn three_blobs_match_exhaustive_optimum() {
        let d = blobs(&[[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]], 4, 1.0, 5);
        let r = kmeans_lloyd(&d, 3, KMeansOptions::default(), 42).unwrap();
        let (w, labels) = brute_force(&d);
        assert!((r.inertia - w).abs() <= 1e-12 * w);
        assert!(same_partition(&r.labels, &labels));
        assert!(same_partition(&r.labels, &[0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2]));
    }

    #[test]
    fn deterministic_and_permutation_invariant() {
        let d = blobs(&[[0.0, 0.0], [8.0, 1.0], [3.0, 9.0], [9.0, 9.0]], 25, 1.5, 6);
        let a = kmeans_lloyd(&d, 4, KMeansOptions::default(), 8).unwrap();
        let b = kmeans_lloyd(&d, 4, KMeansOptions::default(), 8).unwrap();
        assert_eq!(a, b);
        let perm: Vec<usize> = (0..d.len()).rev().collect();
        let rows: Vec<Vec<f64>> = perm.iter().map(|&i| d.row(i).to_vec()).collect();
        let p = kmeans_lloyd(&FeatureDataset::from_rows(&rows).unwrap(), 4, KMeansOptions::default(), 8).unwrap();
        let unpermuted: Vec<usize> = (0..d.len()).map(|i| p.labels[d.len() - 1 - i]).collect();
        assert!(same_partition(&a.labels, &unpermuted));
    }

    #[test]
    fn mini_batch_recovers_blobs() {
        let d = blobs(&[[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]], 400, 1.0, 7);
        let r = kmeans_lloyd(&d, 3, KMeansOptions { n_init: 3, mini_batch: Some(64) }, 1).unwrap();
        let truth: Vec<usize> = (0..1200).map(|i| i / 400).collect();
        assert!(same_partition(&r.labels, &truth));
    }
}
