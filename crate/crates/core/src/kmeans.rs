//! Seeded K-means over shape-space points with empty-cluster repair.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{ClusterState, MeanAccumulator, ShapePoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    #[default]
    GreedyKmeansPlusPlus,
    FarthestPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_kmeans_iters: usize,
    pub seed: u64,
    pub init_strategy: InitStrategy,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            k: 7,
            max_kmeans_iters: 200,
            seed: 0,
            init_strategy: InitStrategy::GreedyKmeansPlusPlus,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.k > n {
            return Err(Error::Config(format!("k = {} exceeds point count {n}", self.k)));
        }
        if self.max_kmeans_iters < 1 {
            return Err(Error::Config("max_kmeans_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of a Lloyd solve.
#[derive(Debug, Clone)]
pub struct LloydRun<P> {
    pub state: ClusterState<P>,
    /// Energy after every centroid update.
    pub energy_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Nearest centroid per point; equal distances go to the lower index.
pub fn assign_labels<P: ShapePoint>(points: &[P], centroids: &[P]) -> Vec<usize> {
    points.par_iter().map(|p| nearest(p, centroids).0).collect()
}

#[inline]
pub fn nearest<P: ShapePoint>(p: &P, centroids: &[P]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = p.distance(c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    (best, best_d)
}

/// Deterministic initial centroids for `cfg`.
pub fn initialize<P: ShapePoint>(points: &[P], cfg: &KMeansConfig) -> Result<Vec<P>> {
    cfg.validate(points.len())?;
    Ok(match cfg.init_strategy {
        InitStrategy::GreedyKmeansPlusPlus => greedy_kmeans_pp(points, cfg.k, cfg.seed),
        InitStrategy::FarthestPoint => farthest_point(points, cfg.k),
    })
}

fn greedy_kmeans_pp<P: ShapePoint>(points: &[P], k: usize, seed: u64) -> Vec<P> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = points.len();
    let mut centroids = vec![points[rng.gen_range(0..n)]];
    let mut d2: Vec<f64> = points.iter().map(|p| p.distance(&centroids[0])).collect();
    let trials = 2 + (k as f64).ln().floor() as usize;
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            // every point coincides with a centroid; repair will sort it out
            centroids.push(points[0]);
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for _ in 0..trials {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            let potential: f64 = points
                .iter()
                .zip(&d2)
                .map(|(p, &d)| d.min(p.distance(&points[pick])))
                .sum();
            if best.is_none_or(|(bp, _)| potential < bp) {
                best = Some((potential, pick));
            }
        }
        let (_, pick) = best.expect("at least one trial");
        let c = points[pick];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(p.distance(&c));
        }
        centroids.push(c);
    }
    centroids
}

fn farthest_point<P: ShapePoint>(points: &[P], k: usize) -> Vec<P> {
    let n = points.len() as f64;
    let mut s = [0.0; 4];
    for p in points {
        for (acc, v) in s.iter_mut().zip(p.coords()) {
            *acc += v;
        }
    }
    let mean = P::from_mean(s.map(|v| v / n));
    let argmax = |d: &[f64]| {
        let mut best = 0;
        for i in 1..d.len() {
            if d[i] > d[best] {
                best = i;
            }
        }
        best
    };
    let first = argmax(&points.iter().map(|p| p.distance(&mean)).collect::<Vec<_>>());
    let mut centroids = vec![points[first]];
    let mut d2: Vec<f64> = points.iter().map(|p| p.distance(&points[first])).collect();
    while centroids.len() < k {
        let c = points[argmax(&d2)];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(p.distance(&c));
        }
        centroids.push(c);
    }
    centroids
}

/// Seeded K-means: initialization followed by Lloyd iterations.
pub fn cluster<P: ShapePoint>(points: &[P], cfg: &KMeansConfig) -> Result<ClusterState<P>> {
    Ok(cluster_traced(points, cfg)?.state)
}

pub fn cluster_traced<P: ShapePoint>(points: &[P], cfg: &KMeansConfig) -> Result<LloydRun<P>> {
    let init = initialize(points, cfg)?;
    Ok(lloyd(points, init, cfg.max_kmeans_iters))
}

/// Lloyd iterations from the given centroids until the labels stop changing
/// or `max_iters` centroid updates have run. Empty clusters are reseeded with
/// the point farthest from its centroid; when no point is off its centroid
/// the empty cluster is dropped.
pub fn lloyd<P: ShapePoint>(points: &[P], mut centroids: Vec<P>, max_iters: usize) -> LloydRun<P> {
    assert!(!centroids.is_empty(), "lloyd needs at least one centroid");
    let mut labels = assign_labels(points, &centroids);
    let mut energy_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters.max(1) {
        iterations += 1;
        update_centroids(points, &mut labels, &mut centroids);
        energy_trace.push(energy_of(points, &labels, &centroids));
        let next = assign_labels(points, &centroids);
        if next == labels {
            converged = true;
            break;
        }
        labels = next;
    }
    if !converged {
        update_centroids(points, &mut labels, &mut centroids);
        energy_trace.push(energy_of(points, &labels, &centroids));
    }
    LloydRun {
        state: ClusterState::new(points, centroids, labels),
        energy_trace,
        iterations,
        converged,
    }
}

fn energy_of<P: ShapePoint>(points: &[P], labels: &[usize], centroids: &[P]) -> f64 {
    points.iter().zip(labels).map(|(p, &l)| p.distance(&centroids[l])).sum()
}

/// Recomputes centroids as member means, repairing empty clusters.
fn update_centroids<P: ShapePoint>(points: &[P], labels: &mut [usize], centroids: &mut Vec<P>) {
    loop {
        let k = centroids.len();
        let mut acc = vec![MeanAccumulator::default(); k];
        for (p, &l) in points.iter().zip(labels.iter()) {
            acc[l].add(p);
        }
        let counts: Vec<usize> = acc.iter().map(|a| a.count()).collect();
        for c in 0..k {
            if let Some(m) = acc[c].mean() {
                centroids[c] = m;
            }
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        // farthest point among clusters that can spare a member
        let mut far: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            if counts[labels[i]] < 2 {
                continue;
            }
            let d = p.distance(&centroids[labels[i]]);
            if d > 0.0 && far.is_none_or(|(_, best)| d > best) {
                far = Some((i, d));
            }
        }
        match far {
            Some((i, _)) => {
                labels[i] = empty;
                centroids[empty] = points[i];
            }
            None => {
                warn!(
                    "cluster {empty} is empty and cannot be reseeded; reducing k to {}",
                    k - 1
                );
                centroids.remove(empty);
                for l in labels.iter_mut() {
                    if *l > empty {
                        *l -= 1;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{energy, TrianglePoint};

    fn tp(x: f64, y: f64, z: f64) -> TrianglePoint {
        TrianglePoint::from_lengths(x, y, z)
    }

    fn random_points(seed: u64, n: usize) -> Vec<TrianglePoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| TrianglePoint::from_lengths(rng.gen(), rng.gen(), rng.gen()))
            .collect()
    }

    fn cfg(k: usize, seed: u64) -> KMeansConfig {
        KMeansConfig {
            k,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn identical_points_collapse_to_one_cluster() {
        let pts = vec![tp(1.0, 2.0, 2.5); 8];
        let st = cluster(&pts, &cfg(3, 1)).unwrap();
        assert_eq!(st.k(), 1);
        assert!(st.labels.iter().all(|&l| l == 0));
        assert_eq!(st.energy, 0.0);
    }

    #[test]
    fn separated_groups_are_pure() {
        let mut pts = vec![tp(1.0, 1.0, 1.0); 5];
        pts.extend(vec![tp(9.0, 9.0, 9.0); 5]);
        for seed in 0..10 {
            let st = cluster(&pts, &cfg(2, seed)).unwrap();
            assert_eq!(st.energy, 0.0);
            assert_ne!(st.labels[0], st.labels[5]);
            assert!(st.labels[..5].iter().all(|&l| l == st.labels[0]));
            assert!(st.labels[5..].iter().all(|&l| l == st.labels[5]));
        }
    }

    #[test]
    fn config_errors() {
        let pts = random_points(1, 4);
        assert!(matches!(cluster(&pts, &cfg(0, 0)), Err(Error::Config(_))));
        assert!(matches!(cluster(&pts, &cfg(5, 0)), Err(Error::Config(_))));
    }

    #[test]
    fn assignment_tie_goes_to_lower_index() {
        let centroids = [tp(1.0, 1.0, 1.0), tp(1.0, 1.0, 3.0)];
        assert_eq!(assign_labels(&[tp(1.0, 1.0, 2.0)], &centroids), vec![0]);
        assert_eq!(assign_labels(&[tp(1.0, 1.0, 3.0)], &centroids), vec![1]);
        assert!(assign_labels::<TrianglePoint>(&[], &centroids).is_empty());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let pts = random_points(3, 200);
        let a = cluster(&pts, &cfg(7, 42)).unwrap();
        let b = cluster(&pts, &cfg(7, 42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_empty_cluster_on_return() {
        // duplicates make kmeans++ pick coincident seeds
        let mut pts = vec![tp(1.0, 1.0, 1.0); 20];
        pts.push(tp(2.0, 2.0, 2.0));
        pts.push(tp(2.1, 2.1, 2.1));
        let st = cluster(&pts, &cfg(3, 9)).unwrap();
        assert!(st.cluster_sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn farthest_point_init_is_spread() {
        let pts = vec![
            tp(1.0, 1.0, 1.0),
            tp(1.1, 1.1, 1.1),
            tp(5.0, 5.0, 5.0),
            tp(9.0, 9.0, 9.0),
        ];
        let c = initialize(
            &pts,
            &KMeansConfig {
                k: 3,
                init_strategy: InitStrategy::FarthestPoint,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(c, vec![pts[3], pts[0], pts[2]]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn lloyd_energy_never_increases(seed in 0u64..10_000, k in 1usize..8) {
                let pts = random_points(seed, 60);
                let run = cluster_traced(&pts, &cfg(k, seed)).unwrap();
                for w in run.energy_trace.windows(2) {
                    prop_assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-15);
                }
                let e = energy(&pts, &run.state);
                prop_assert!((e - run.state.energy).abs() <= 1e-9 * e.max(1e-12));
                prop_assert!(run.state.is_consistent(&pts, 1e-12));
            }

            #[test]
            fn assignment_agrees_with_exhaustive_search(seed in 0u64..10_000, k in 1usize..6) {
                let pts = random_points(seed, 40);
                let cs = random_points(seed + 1, k);
                let labels = assign_labels(&pts, &cs);
                for (p, &l) in pts.iter().zip(&labels) {
                    let d: Vec<f64> = cs.iter().map(|c| p.distance(c)).collect();
                    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
                    prop_assert_eq!(l, d.iter().position(|&x| x == min).unwrap());
                }
            }
        }
    }
}
