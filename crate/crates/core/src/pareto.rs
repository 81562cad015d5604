//! Nondominated sorting, the gamma split into good and poor observations,
//! and the exact two-objective hypervolume.
//!
//! All objectives are minimized.

use crate::archive::Archive;
use crate::space::DesignPoint;

/// `a` dominates `b`: no worse everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Indices grouped by nondomination rank; `fronts[0]` is the nondominated
/// set. Indices inside a front are ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrontPartition {
    pub fronts: Vec<Vec<usize>>,
}

impl FrontPartition {
    pub fn n_points(&self) -> usize {
        self.fronts.iter().map(Vec::len).sum()
    }

    /// Rank of every index.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.n_points()];
        for (k, front) in self.fronts.iter().enumerate() {
            for &i in front {
                ranks[i] = k;
            }
        }
        ranks
    }
}

/// Fast nondominated sort (domination counts plus dominated-by lists).
pub fn nondominated_sort(means: &[Vec<f64>]) -> FrontPartition {
    let n = means.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&means[i], &means[j]) {
                dominated_by[i].push(j);
                counts[j] += 1;
            } else if dominates(&means[j], &means[i]) {
                dominated_by[j].push(i);
                counts[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                counts[j] -= 1;
                if counts[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    FrontPartition { fronts }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitResult {
    pub good: Vec<usize>,
    pub poor: Vec<usize>,
    pub gamma: f64,
}

/// Size of the good subset, `ceil(gamma * n)`. The product is nudged down by
/// a relative 1e-9 so that e.g. `0.3 * 10` yields 3, not 4.
pub fn good_count(n: usize, gamma: f64) -> usize {
    let raw = gamma * n as f64;
    ((raw * (1.0 - 1e-9)).ceil() as usize).min(n)
}

/// Splits the observations into good and poor sets by consuming fronts in
/// rank order. A front that straddles the boundary is cut by greedy
/// hypervolume-subset selection with respect to `reference`: repeatedly add
/// the member that enlarges the hypervolume of the chosen subset the most
/// (ties go to the lowest index). For `m != 2` the boundary front is cut by
/// index order.
pub fn split_gamma(
    partition: &FrontPartition,
    means: &[Vec<f64>],
    gamma: f64,
    reference: &[f64],
) -> SplitResult {
    assert!(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
    let n = partition.n_points();
    let need = good_count(n, gamma);
    let mut good = Vec::with_capacity(need);
    let mut poor = Vec::with_capacity(n - need);
    for front in &partition.fronts {
        let room = need - good.len();
        if room >= front.len() {
            good.extend_from_slice(front);
        } else if room == 0 {
            poor.extend_from_slice(front);
        } else {
            let chosen = greedy_subset(front, means, reference, room);
            for &i in front {
                if chosen.contains(&i) {
                    good.push(i);
                } else {
                    poor.push(i);
                }
            }
        }
    }
    SplitResult { good, poor, gamma }
}

fn greedy_subset(front: &[usize], means: &[Vec<f64>], reference: &[f64], k: usize) -> Vec<usize> {
    let two_d = reference.len() == 2 && front.iter().all(|&i| means[i].len() == 2);
    if !two_d {
        return front[..k].to_vec();
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut chosen_pts: Vec<[f64; 2]> = Vec::with_capacity(k);
    let mut base = 0.0;
    while chosen.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for &i in front {
            if chosen.contains(&i) {
                continue;
            }
            chosen_pts.push([means[i][0], means[i][1]]);
            let gain = hypervolume_2d(&chosen_pts, [reference[0], reference[1]]) - base;
            chosen_pts.pop();
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let (i, gain) = best.expect("front has more members than k");
        chosen.push(i);
        chosen_pts.push([means[i][0], means[i][1]]);
        base += gain;
    }
    chosen
}

/// Area dominated by `points` and bounded by `reference`.
///
/// Points with any coordinate at or beyond the reference are ignored. The
/// remaining points are swept in ascending first objective, so only the
/// nondominated staircase contributes.
pub fn hypervolume_2d(points: &[[f64; 2]], reference: [f64; 2]) -> f64 {
    let mut pts: Vec<[f64; 2]> = points
        .iter()
        .copied()
        .filter(|p| p[0] < reference[0] && p[1] < reference[1])
        .collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut ceiling = reference[1];
    for p in pts {
        if p[1] < ceiling {
            area += (reference[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    area
}

/// Convenience wrapper over slices of 2-vectors.
pub fn hypervolume_2d_vecs(points: &[Vec<f64>], reference: &[f64]) -> f64 {
    let pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
    hypervolume_2d(&pts, [reference[0], reference[1]])
}

/// Hypervolume of the archive's sample means.
pub fn archive_hypervolume(archive: &Archive, reference: &[f64]) -> f64 {
    hypervolume_2d_vecs(&archive.means(), reference)
}

/// A nondominated archive member with its replication spread.
#[derive(Clone, Debug, PartialEq)]
pub struct FrontEntry {
    pub index: usize,
    pub point: DesignPoint,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Records on the first front of the archive's sample means, in archive
/// order.
pub fn pareto_front(archive: &Archive) -> Vec<FrontEntry> {
    let partition = nondominated_sort(&archive.means());
    let Some(front) = partition.fronts.first() else {
        return Vec::new();
    };
    front
        .iter()
        .map(|&i| {
            let rec = &archive.records()[i];
            FrontEntry {
                index: i,
                point: rec.point.clone(),
                mean: rec.sample_mean.clone(),
                std: rec.sample_std(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::space::SearchSpace;
    use proptest::prelude::*;
    use rand::Rng;

    /// Peels fronts by exhaustive pairwise checks.
    fn brute_force_fronts(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
        let mut remaining: Vec<usize> = (0..points.len()).collect();
        let mut fronts = Vec::new();
        while !remaining.is_empty() {
            let front: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&i| {
                    !remaining
                        .iter()
                        .any(|&j| j != i && dominates(&points[j], &points[i]))
                })
                .collect();
            remaining.retain(|i| !front.contains(i));
            fronts.push(front);
        }
        fronts
    }

    #[test]
    fn singleton_sort() {
        let p = nondominated_sort(&[vec![3.0, 4.0]]);
        assert_eq!(p.fronts, vec![vec![0]]);
    }

    #[test]
    fn three_point_sort() {
        let pts = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0]];
        assert_eq!(nondominated_sort(&pts).fronts, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn equal_points_share_a_front() {
        let pts = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        assert_eq!(nondominated_sort(&pts).fronts, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn random_sort_matches_brute_force() {
        let mut rng = RngStream::new(17, 0).rng();
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        assert_eq!(nondominated_sort(&pts).fronts, brute_force_fronts(&pts));
    }

    #[test]
    fn split_count_uses_ceiling() {
        assert_eq!(good_count(10, 0.3), 3);
        assert_eq!(good_count(11, 0.3), 4);
        assert_eq!(good_count(54, 0.3), 17);
        assert_eq!(good_count(1, 0.3), 1);
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (10 - i) as f64]).collect();
        let part = nondominated_sort(&pts);
        let split = split_gamma(&part, &pts, 0.3, &[20.0, 20.0]);
        assert_eq!(split.good.len(), 3);
        assert_eq!(split.good.len() + split.poor.len(), 10);
    }

    #[test]
    fn split_on_front_boundary_takes_whole_fronts() {
        // front 0 = {0, 1}, front 1 = {2, 3}, front 2 = {4}
        let pts = vec![
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 2.0],
            vec![2.0, 1.0],
            vec![3.0, 3.0],
        ];
        let part = nondominated_sort(&pts);
        let split = split_gamma(&part, &pts, 0.4, &[5.0, 5.0]);
        assert_eq!(split.good, vec![0, 1]);
        assert_eq!(split.poor, vec![2, 3, 4]);
    }

    #[test]
    fn boundary_front_cut_by_hypervolume_contribution() {
        // Alone: (0,3) -> 4, (1,1) -> 9, (3,0) -> 4 against ref (4,4).
        let pts = vec![vec![0.0, 3.0], vec![1.0, 1.0], vec![3.0, 0.0]];
        let part = nondominated_sort(&pts);
        let split = split_gamma(&part, &pts, 0.2, &[4.0, 4.0]);
        assert_eq!(split.good, vec![1]);
        assert_eq!(split.poor, vec![0, 2]);
    }

    #[test]
    fn hypervolume_basics() {
        assert_eq!(hypervolume_2d(&[], [2.0, 2.0]), 0.0);
        assert_eq!(hypervolume_2d(&[[0.0, 1.0], [1.0, 0.0]], [2.0, 2.0]), 3.0);
        assert_eq!(hypervolume_2d(&[[2.0, 0.0], [0.5, 3.0]], [2.0, 2.0]), 0.0);
        assert_eq!(hypervolume_2d(&[[0.5, 0.5], [0.5, 0.5]], [1.0, 1.0]), 0.25);
    }

    #[test]
    fn pareto_front_of_archive() {
        let mut a = Archive::new(SearchSpace::unit_cube(1).unwrap(), 2);
        a.merge_observation(DesignPoint::new(vec![0.1]), vec![vec![1.0, 3.0], vec![1.0, 5.0]])
            .unwrap();
        let front = pareto_front(&a);
        assert_eq!(front.len(), 1);
        assert_eq!(front[0].mean, vec![1.0, 4.0]);
        assert!((front[0].std[1] - 2f64.sqrt()).abs() < 1e-12);
        a.merge_observation(DesignPoint::new(vec![0.2]), vec![vec![0.0, 6.0]]).unwrap();
        a.merge_observation(DesignPoint::new(vec![0.3]), vec![vec![2.0, 5.0]]).unwrap();
        let idx: Vec<usize> = pareto_front(&a).iter().map(|e| e.index).collect();
        assert_eq!(idx, vec![0, 1]);
    }

    fn arb_points() -> impl Strategy<Value = Vec<[f64; 2]>> {
        prop::collection::vec((0.0f64..3.0, 0.0f64..3.0).prop_map(|(a, b)| [a, b]), 0..30)
    }

    proptest! {
        #[test]
        fn hypervolume_is_monotone(pts in arb_points(), extra in (0.0f64..3.0, 0.0f64..3.0)) {
            let r = [2.5, 2.5];
            let before = hypervolume_2d(&pts, r);
            let mut more = pts.clone();
            more.push([extra.0, extra.1]);
            prop_assert!(hypervolume_2d(&more, r) >= before);
        }

        #[test]
        fn hypervolume_ignores_dominated_points_and_order(pts in arb_points()) {
            let r = [2.5, 2.5];
            let vecs: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
            let part = nondominated_sort(&vecs);
            let front: Vec<[f64; 2]> = part.fronts.first().map_or(vec![], |f| f.iter().map(|&i| pts[i]).collect());
            let full = hypervolume_2d(&pts, r);
            prop_assert!((full - hypervolume_2d(&front, r)).abs() <= 1e-12);
            let mut rev = pts.clone();
            rev.reverse();
            prop_assert!((full - hypervolume_2d(&rev, r)).abs() <= 1e-12);
        }

        #[test]
        fn split_respects_ranks(pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..40), gamma in 0.05f64..0.95) {
            let vecs: Vec<Vec<f64>> = pts.iter().map(|&(a, b)| vec![a, b]).collect();
            let part = nondominated_sort(&vecs);
            let split = split_gamma(&part, &vecs, gamma, &[1.1, 1.1]);
            let ranks = part.ranks();
            prop_assert_eq!(split.good.len(), good_count(vecs.len(), gamma));
            let mut all: Vec<usize> = split.good.iter().chain(&split.poor).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..vecs.len()).collect::<Vec<_>>());
            let worst_good = split.good.iter().map(|&i| ranks[i]).max().unwrap();
            let best_poor = split.poor.iter().map(|&i| ranks[i]).min().unwrap_or(usize::MAX);
            prop_assert!(worst_good <= best_poor);
        }
    }
}
