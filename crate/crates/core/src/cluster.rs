//! Agglomerative trajectory clustering and overlap augmentation.
//!
//! The trajectory is cut into exactly C clusters with configurable linkage
//! (Lance-Williams updates over a dense distance matrix; O(n^2) memory is
//! fine at desk scale). Ties merge the pair whose clusters carry the lowest
//! original frame indices, so dendrograms are reproducible. Each cluster is
//! then augmented with every frame within `delta` of one of its members.

use crate::config::{ClusteringConfig, Linkage};
use crate::error::{Error, Result};
use crate::math::Vec3;

/// Cut the trajectory into exactly `cfg.num_clusters` clusters.
///
/// Labels are renumbered so cluster 0 holds frame index 0, cluster 1 holds
/// the earliest frame not in cluster 0, and so on.
pub fn cluster_trajectory(positions: &[Vec3], cfg: &ClusteringConfig) -> Result<Vec<usize>> {
    let n = positions.len();
    let c = cfg.num_clusters;
    if n == 0 {
        return Err(Error::invalid("positions", "must be non-empty"));
    }
    if c > n {
        return Err(Error::invalid(
            "num_clusters",
            format!("{c} exceeds point count {n}"),
        ));
    }

    // Active clusters: member lists plus the lowest member index as the
    // deterministic identity for tie-breaking.
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut lowest: Vec<usize> = (0..n).collect();
    let mut active: Vec<bool> = vec![true; n];

    // Dense inter-cluster distance matrix, updated by Lance-Williams.
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = (positions[i] - positions[j]).norm();
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    let mut n_active = n;
    while n_active > c {
        // Find the closest active pair; ties pick the smallest
        // (lowest_i, lowest_j) pair.
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if !active[j] {
                    continue;
                }
                let d = dist[i * n + j];
                let (lo, hi) = if lowest[i] < lowest[j] {
                    (lowest[i], lowest[j])
                } else {
                    (lowest[j], lowest[i])
                };
                let better = match &best {
                    None => true,
                    Some((bd, blo, bhi, _, _)) => {
                        d < *bd || (d == *bd && (lo, hi) < (*blo, *bhi))
                    }
                };
                if better {
                    best = Some((d, lo, hi, i, j));
                }
            }
        }
        let (_, _, _, i, j) = best.expect("at least two active clusters");
        let (ni, nj) = (members[i].len() as f64, members[j].len() as f64);

        // Lance-Williams update of distances to the merged cluster (kept
        // in slot i); slot j goes inactive.
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let dik = dist[i * n + k];
            let djk = dist[j * n + k];
            let d = match cfg.linkage {
                Linkage::Average => (ni * dik + nj * djk) / (ni + nj),
                Linkage::Single => dik.min(djk),
                Linkage::Complete => dik.max(djk),
            };
            dist[i * n + k] = d;
            dist[k * n + i] = d;
        }
        let moved = std::mem::take(&mut members[j]);
        members[i].extend(moved);
        lowest[i] = lowest[i].min(lowest[j]);
        active[j] = false;
        n_active -= 1;
    }

    // Relabel clusters by their earliest member.
    let mut clusters: Vec<&Vec<usize>> = (0..n).filter(|&i| active[i]).map(|i| &members[i]).collect();
    clusters.sort_by_key(|m| *m.iter().min().unwrap());
    let mut labels = vec![0usize; n];
    for (label, cluster) in clusters.iter().enumerate() {
        for &idx in cluster.iter() {
            labels[idx] = label;
        }
    }
    Ok(labels)
}

/// Augment each cluster with foreign frames within `delta` of any member.
///
/// Returns one sorted frame-index set per cluster label; each is a superset
/// of the core cluster, and a frame near two clusters appears in both.
pub fn augment_overlap(positions: &[Vec3], labels: &[usize], delta: f64) -> Vec<Vec<usize>> {
    assert_eq!(positions.len(), labels.len());
    let n_clusters = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
    for cluster in 0..n_clusters {
        let core: Vec<usize> = (0..positions.len()).filter(|&i| labels[i] == cluster).collect();
        let mut set: Vec<usize> = Vec::new();
        for i in 0..positions.len() {
            let inside = labels[i] == cluster
                || core
                    .iter()
                    .any(|&m| (positions[i] - positions[m]).norm() <= delta);
            if inside {
                set.push(i);
            }
        }
        sets[cluster] = set;
    }
    sets
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn cfg(c: usize, linkage: Linkage) -> ClusteringConfig {
        ClusteringConfig {
            num_clusters: c,
            overlap_delta_m: 0.0,
            linkage,
        }
    }

    fn two_blobs() -> Vec<Vec3> {
        let mut rng = SplitMix64::new(77);
        let mut pts = Vec::new();
        for _ in 0..10 {
            pts.push(Vec3::new(
                rng.next_range(-0.1, 0.1),
                rng.next_range(-0.1, 0.1),
                0.0,
            ));
        }
        for _ in 0..10 {
            pts.push(Vec3::new(
                100.0 + rng.next_range(-0.1, 0.1),
                rng.next_range(-0.1, 0.1),
                0.0,
            ));
        }
        pts
    }

    #[test]
    fn two_blob_recovery_all_linkages() {
        let pts = two_blobs();
        for linkage in [Linkage::Average, Linkage::Single, Linkage::Complete] {
            let labels = cluster_trajectory(&pts, &cfg(2, linkage)).unwrap();
            assert!(labels[..10].iter().all(|&l| l == 0), "{linkage:?}");
            assert!(labels[10..].iter().all(|&l| l == 1), "{linkage:?}");
        }
    }

    #[test]
    fn c_equals_count_gives_singletons() {
        let pts: Vec<Vec3> = (0..6).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let labels = cluster_trajectory(&pts, &cfg(6, Linkage::Average)).unwrap();
        assert_eq!(labels, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn c_one_gives_single_cluster() {
        let pts = two_blobs();
        let labels = cluster_trajectory(&pts, &cfg(1, Linkage::Average)).unwrap();
        assert!(labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn c_above_count_errors() {
        let pts: Vec<Vec3> = vec![Vec3::zeros()];
        assert!(cluster_trajectory(&pts, &cfg(2, Linkage::Average)).is_err());
    }

    #[test]
    fn clusters_are_nonempty_and_partition() {
        let mut rng = SplitMix64::new(3);
        let pts: Vec<Vec3> = (0..40)
            .map(|_| {
                Vec3::new(
                    rng.next_range(-10.0, 10.0),
                    rng.next_range(-10.0, 10.0),
                    0.0,
                )
            })
            .collect();
        let labels = cluster_trajectory(&pts, &cfg(7, Linkage::Average)).unwrap();
        let mut counts = vec![0usize; 7];
        for &l in &labels {
            counts[l] += 1;
        }
        assert!(counts.iter().all(|&c| c > 0));
    }

    #[test]
    fn rigid_transform_invariance() {
        let pts = two_blobs();
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -0.8, 1.1);
        let shifted: Vec<Vec3> = pts
            .iter()
            .map(|p| rot * p + Vec3::new(5.0, -2.0, 7.0))
            .collect();
        let a = cluster_trajectory(&pts, &cfg(4, Linkage::Average)).unwrap();
        let b = cluster_trajectory(&shifted, &cfg(4, Linkage::Average)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn overlap_delta_zero_is_core() {
        let pts = two_blobs();
        let labels = cluster_trajectory(&pts, &cfg(2, Linkage::Average)).unwrap();
        let sets = augment_overlap(&pts, &labels, 0.0);
        assert_eq!(sets[0], (0..10).collect::<Vec<_>>());
        assert_eq!(sets[1], (10..20).collect::<Vec<_>>());
    }

    #[test]
    fn overlap_line_gains_one_neighbor() {
        // Ten points spaced 1 m; clusters {0..5} and {5..10}.
        let pts: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let labels: Vec<usize> = (0..10).map(|i| usize::from(i >= 5)).collect();
        let sets = augment_overlap(&pts, &labels, 1.5);
        // Brute-force check: cluster 0 gains exactly point 5, cluster 1 point 4.
        assert_eq!(sets[0], vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(sets[1], vec![4, 5, 6, 7, 8, 9]);
    }

    #[test]
    fn overlap_saturates_at_scene_diameter() {
        let pts = two_blobs();
        let labels = cluster_trajectory(&pts, &cfg(2, Linkage::Average)).unwrap();
        let sets = augment_overlap(&pts, &labels, 1000.0);
        for set in sets {
            assert_eq!(set, (0..20).collect::<Vec<_>>());
        }
    }

    #[test]
    fn overlap_monotone_in_delta() {
        let mut rng = SplitMix64::new(8);
        let pts: Vec<Vec3> = (0..30)
            .map(|_| {
                Vec3::new(
                    rng.next_range(-8.0, 8.0),
                    rng.next_range(-8.0, 8.0),
                    0.0,
                )
            })
            .collect();
        let labels = cluster_trajectory(&pts, &cfg(4, Linkage::Average)).unwrap();
        let mut prev: Option<Vec<Vec<usize>>> = None;
        for delta in [0.0, 1.0, 2.0, 5.0] {
            let sets = augment_overlap(&pts, &labels, delta);
            if let Some(p) = &prev {
                for (small, big) in p.iter().zip(&sets) {
                    for idx in small {
                        assert!(big.contains(idx), "delta {delta} dropped {idx}");
                    }
                }
            }
            prev = Some(sets);
        }
    }
}
