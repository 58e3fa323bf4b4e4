//! Top-N separation, partial ranks from interval comparisons, inversion sets and
//! Kendall-Tau environment matching.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::ConfidenceBand;

/// N distinct arm ids, best first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TopNRanking(Vec<usize>);

impl TopNRanking {
    pub fn new(arms: Vec<usize>, n_arms: usize) -> Result<Self> {
        for (p, &a) in arms.iter().enumerate() {
            if a >= n_arms || arms[..p].contains(&a) {
                return Err(Error::InvalidScenario(format!(
                    "ranking {arms:?} is not a list of distinct arms below {n_arms}"
                )));
            }
        }
        Ok(Self(arms))
    }

    pub(crate) fn new_unchecked(arms: Vec<usize>) -> Self {
        Self(arms)
    }

    pub fn arms(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// 0-based pointer lookup.
    pub fn get(&self, pos: usize) -> Option<usize> {
        self.0.get(pos).copied()
    }

    /// Embeds the ranking as a partial order over `n_arms` items: the listed arms are
    /// strictly ordered and above every unlisted arm; unlisted arms are mutually tied.
    pub fn to_partial(&self, n_arms: usize) -> PartialRanking {
        let mut pr = PartialRanking::ties(n_arms);
        for (p, &a) in self.0.iter().enumerate() {
            for &b in &self.0[p + 1..] {
                pr.set(a, b, Verdict::Ahead);
            }
            for b in (0..n_arms).filter(|b| !self.0.contains(b)) {
                pr.set(a, b, Verdict::Ahead);
            }
        }
        pr
    }
}

/// Verdict on an ordered pair (a, b).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// a ≻ b
    Ahead,
    /// b ≻ a
    Behind,
    Tie,
}

impl Verdict {
    fn code(self) -> i8 {
        match self {
            Verdict::Ahead => 1,
            Verdict::Behind => -1,
            Verdict::Tie => 0,
        }
    }

    fn from_code(c: i8) -> Self {
        match c {
            1 => Verdict::Ahead,
            -1 => Verdict::Behind,
            _ => Verdict::Tie,
        }
    }
}

/// Pairwise verdicts over `len` items, stored densely and kept antisymmetric.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PartialRanking {
    n: usize,
    rel: Vec<i8>,
}

impl PartialRanking {
    pub fn ties(n: usize) -> Self {
        Self {
            n,
            rel: vec![0; n * n],
        }
    }

    /// Total order from a full list of items, best first.
    pub fn from_order(order: &[usize]) -> Self {
        let mut pr = Self::ties(order.len());
        for (p, &a) in order.iter().enumerate() {
            for &b in &order[p + 1..] {
                pr.set(a, b, Verdict::Ahead);
            }
        }
        pr
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn verdict(&self, a: usize, b: usize) -> Verdict {
        Verdict::from_code(self.rel[a * self.n + b])
    }

    pub fn set(&mut self, a: usize, b: usize, v: Verdict) {
        if a == b {
            return;
        }
        self.rel[a * self.n + b] = v.code();
        self.rel[b * self.n + a] = -v.code();
    }

    pub fn strict_pairs(&self) -> usize {
        self.rel.iter().filter(|&&c| c == 1).count()
    }
}

/// Pairs (a, b) with a < b ordered strictly and oppositely in two rankings.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InversionSet(Vec<(usize, usize)>);

impl InversionSet {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        let p = (a.min(b), a.max(b));
        self.0.contains(&p)
    }
}

pub fn inversion_set(a: &PartialRanking, b: &PartialRanking) -> Result<InversionSet> {
    if a.n != b.n {
        return Err(Error::DomainMismatch {
            left: a.n,
            right: b.n,
        });
    }
    let mut pairs = Vec::new();
    for x in 0..a.n {
        for y in x + 1..a.n {
            let (va, vb) = (a.rel[x * a.n + y], b.rel[x * a.n + y]);
            if va != 0 && vb != 0 && va != vb {
                pairs.push((x, y));
            }
        }
    }
    Ok(InversionSet(pairs))
}

pub fn kendall_tau(a: &PartialRanking, b: &PartialRanking) -> Result<usize> {
    Ok(inversion_set(a, b)?.len())
}

/// Arms sorted by estimated mean, best first, ties by arm id.
pub fn sort_by_estimate(bands: &[ConfidenceBand]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..bands.len()).collect();
    idx.sort_by(|&a, &b| bands[b].mean.total_cmp(&bands[a].mean).then(a.cmp(&b)));
    idx
}

/// Returns the top-n of the μ̂ sort iff every one of its arms has an LCB strictly
/// above the UCB of every arm sorted below it.
pub fn try_separate_top_n(bands: &[ConfidenceBand], n: usize) -> Option<TopNRanking> {
    let order = sort_by_estimate(bands);
    let k = order.len();
    if n > k {
        return None;
    }
    // suffix[p] = max UCB over order[p..].
    let mut suffix = vec![f64::NEG_INFINITY; k + 1];
    for p in (0..k).rev() {
        suffix[p] = suffix[p + 1].max(bands[order[p]].ucb);
    }
    for a in 0..n {
        if !(bands[order[a]].lcb > suffix[a + 1]) {
            return None;
        }
    }
    Some(TopNRanking(order[..n].to_vec()))
}

/// The `n` arms with the largest UCB (ties by arm id).
pub fn top_by_ucb(bands: &[ConfidenceBand], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..bands.len()).collect();
    idx.sort_by(|&a, &b| bands[b].ucb.total_cmp(&bands[a].ucb).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

/// Strict interval comparisons, kept only for pairs touching an arm in `restrict_to`.
pub fn build_partial_rank(bands: &[ConfidenceBand], restrict_to: &[usize]) -> PartialRanking {
    let k = bands.len();
    let mut pr = PartialRanking::ties(k);
    for a in 0..k {
        for b in a + 1..k {
            if !restrict_to.contains(&a) && !restrict_to.contains(&b) {
                continue;
            }
            if bands[a].lcb > bands[b].ucb {
                pr.set(a, b, Verdict::Ahead);
            } else if bands[b].lcb > bands[a].ucb {
                pr.set(a, b, Verdict::Behind);
            }
        }
    }
    pr
}

/// The unique stored key whose ranking has no inversion with `pr`, provided all
/// `n_envs` environments are stored.
pub fn match_environment<K: Copy>(
    pr: &PartialRanking,
    stored: &[(K, &TopNRanking)],
    n_envs: usize,
) -> Option<K> {
    if stored.len() != n_envs {
        return None;
    }
    let mut found = None;
    for (key, sigma) in stored {
        if kendall_tau(pr, &sigma.to_partial(pr.len())).ok()? == 0 {
            if found.is_some() {
                return None;
            }
            found = Some(*key);
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn band(lcb: f64, ucb: f64) -> ConfidenceBand {
        ConfidenceBand {
            mean: 0.5 * (lcb + ucb),
            width: 0.5 * (ucb - lcb),
            ucb,
            lcb,
        }
    }

    fn exact(means: &[f64]) -> Vec<ConfidenceBand> {
        means.iter().map(|&m| band(m, m)).collect()
    }

    #[test]
    fn separated_intervals() {
        let b = [band(0.1, 0.2), band(0.9, 1.0), band(0.5, 0.6)];
        assert_eq!(try_separate_top_n(&b, 2).unwrap().arms(), &[1, 2]);
    }

    #[test]
    fn overlap_at_boundary_fails() {
        let b = [band(0.9, 1.0), band(0.5, 0.6), band(0.55, 0.58)];
        assert!(try_separate_top_n(&b, 2).is_none());
        // Touching intervals do not separate.
        let b = [band(0.9, 1.0), band(0.6, 0.8), band(0.5, 0.6)];
        assert!(try_separate_top_n(&b, 2).is_none());
        assert!(try_separate_top_n(&b, 1).is_some());
    }

    #[test]
    fn partial_rank_examples() {
        let same = [band(0.0, 1.0), band(0.0, 1.0), band(0.0, 1.0)];
        assert_eq!(build_partial_rank(&same, &[0, 1, 2]).strict_pairs(), 0);
        let b = [band(0.0, 1.0), band(0.5, 1.5), band(2.0, 3.0)];
        let pr = build_partial_rank(&b, &[0, 1, 2]);
        assert_eq!(pr.verdict(2, 0), Verdict::Ahead);
        assert_eq!(pr.verdict(2, 1), Verdict::Ahead);
        assert_eq!(pr.verdict(0, 1), Verdict::Tie);
        assert_eq!(pr.verdict(0, 2), Verdict::Behind);
    }

    #[test]
    fn partial_rank_restriction() {
        let b = exact(&[3.0, 2.0, 1.0, 0.0]);
        let top = top_by_ucb(&b, 1);
        assert_eq!(top, vec![0]);
        let pr = build_partial_rank(&b, &top);
        assert_eq!(pr.verdict(0, 3), Verdict::Ahead);
        assert_eq!(pr.verdict(1, 2), Verdict::Tie);
    }

    #[test]
    fn kendall_tau_examples() {
        let a = PartialRanking::from_order(&[0, 1, 2]);
        assert_eq!(kendall_tau(&a, &a).unwrap(), 0);
        let r = PartialRanking::from_order(&[2, 1, 0]);
        assert_eq!(kendall_tau(&a, &r).unwrap(), 3);
        assert_eq!(kendall_tau(&PartialRanking::ties(3), &r).unwrap(), 0);
        assert!(matches!(
            kendall_tau(&a, &PartialRanking::ties(4)),
            Err(Error::DomainMismatch { left: 3, right: 4 })
        ));
    }

    #[test]
    fn top_n_embedding() {
        let pr = TopNRanking::new(vec![2, 0], 4).unwrap().to_partial(4);
        assert_eq!(pr.verdict(2, 0), Verdict::Ahead);
        assert_eq!(pr.verdict(0, 1), Verdict::Ahead);
        assert_eq!(pr.verdict(3, 2), Verdict::Behind);
        assert_eq!(pr.verdict(1, 3), Verdict::Tie);
        assert!(TopNRanking::new(vec![1, 1], 3).is_err());
        assert!(TopNRanking::new(vec![3], 3).is_err());
    }

    #[test]
    fn match_environment_cases() {
        let e1 = TopNRanking::new(vec![0, 1], 3).unwrap();
        let e2 = TopNRanking::new(vec![0, 2], 3).unwrap();
        let stored = [(10usize, &e1), (20usize, &e2)];
        // Wide separation on the distinguishing pair (1, 2).
        let b = [band(0.9, 1.1), band(0.85, 1.05), band(-0.1, 0.15)];
        let pr = build_partial_rank(&b, &top_by_ucb(&b, 2));
        assert_eq!(match_environment(&pr, &stored, 2), Some(10));
        assert_eq!(
            match_environment(&PartialRanking::ties(3), &stored, 2),
            None
        );
        assert_eq!(match_environment(&pr, &stored[..1], 2), None);
    }

    fn brute_kt(a: &[usize], b: &[usize]) -> usize {
        // Rankings given as position vectors.
        let n = a.len();
        let mut c = 0;
        for x in 0..n {
            for y in 0..n {
                if a[x] < a[y] && b[x] > b[y] {
                    c += 1;
                }
            }
        }
        c
    }

    proptest! {
        #[test]
        fn exact_bands_separate_true_top(means in proptest::collection::hash_set(-1000i32..1000, 3..7), n in 1usize..3) {
            let means: Vec<f64> = means.into_iter().map(|m| m as f64 / 100.0).collect();
            let b = exact(&means);
            let sigma = try_separate_top_n(&b, n).unwrap();
            let mut order: Vec<usize> = (0..means.len()).collect();
            order.sort_by(|&x, &y| means[y].partial_cmp(&means[x]).unwrap());
            prop_assert_eq!(sigma.arms(), &order[..n]);
        }

        #[test]
        fn sound_when_bands_cover(
            means in proptest::collection::hash_set(-1000i32..1000, 3..7),
            widths in proptest::collection::vec(0.0f64..3.0, 7),
            offs in proptest::collection::vec(-1.0f64..1.0, 7),
            n in 1usize..3,
        ) {
            // Any bands that contain the true means never produce a wrong order.
            let means: Vec<f64> = means.into_iter().map(|m| m as f64 / 100.0).collect();
            let b: Vec<ConfidenceBand> = means.iter().enumerate().map(|(j, &m)| {
                let w = widths[j];
                let c = m + offs[j] * w;
                ConfidenceBand { mean: c, width: w, ucb: c + w, lcb: c - w }
            }).collect();
            if let Some(sigma) = try_separate_top_n(&b, n) {
                let mut order: Vec<usize> = (0..means.len()).collect();
                order.sort_by(|&x, &y| means[y].partial_cmp(&means[x]).unwrap());
                prop_assert_eq!(sigma.arms(), &order[..n]);
            }
            let pr = build_partial_rank(&b, &(0..means.len()).collect::<Vec<_>>());
            for x in 0..means.len() {
                for y in 0..means.len() {
                    if pr.verdict(x, y) == Verdict::Ahead {
                        prop_assert!(means[x] > means[y]);
                    }
                }
            }
        }

        #[test]
        fn resolvable_below_quarter_gap(
            means in proptest::collection::hash_set(-1000i32..1000, 3..7),
            offs in proptest::collection::vec(-0.999f64..0.999, 7),
            n in 1usize..3,
        ) {
            let means: Vec<f64> = means.into_iter().map(|m| m as f64 / 100.0).collect();
            let mut sorted = means.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let delta = sorted[..(n + 1).min(sorted.len())].windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
            let w = delta / 4.0 * 0.999;
            let b: Vec<ConfidenceBand> = means.iter().enumerate().map(|(j, &m)| {
                let c = m + offs[j] * w;
                ConfidenceBand { mean: c, width: w, ucb: c + w, lcb: c - w }
            }).collect();
            prop_assert!(try_separate_top_n(&b, n).is_some());
        }

        #[test]
        fn kt_matches_brute_force(perm_a in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle(), perm_b in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle()) {
            let pos = |p: &[usize]| { let mut v = vec![0; p.len()]; for (i, &x) in p.iter().enumerate() { v[x] = i; } v };
            let a = PartialRanking::from_order(&perm_a);
            let b = PartialRanking::from_order(&perm_b);
            prop_assert_eq!(kendall_tau(&a, &b).unwrap(), brute_kt(&pos(&perm_a), &pos(&perm_b)));
            prop_assert_eq!(kendall_tau(&a, &b).unwrap(), kendall_tau(&b, &a).unwrap());
        }

        #[test]
        fn unique_match_with_tight_bands(means_e1 in proptest::collection::hash_set(0i32..100, 4), swap in 1usize..3) {
            // Agent knows both environments; the active one's means fall inside narrow bands.
            let m1: Vec<f64> = means_e1.into_iter().map(|m| m as f64).collect();
            let mut order: Vec<usize> = (0..4).collect();
            order.sort_by(|&x, &y| m1[y].partial_cmp(&m1[x]).unwrap());
            let mut order2 = order.clone();
            order2.swap(swap - 1, swap);
            let s1 = TopNRanking::new(order[..2].to_vec(), 4).unwrap();
            let s2 = TopNRanking::new(order2[..2].to_vec(), 4).unwrap();
            prop_assume!(s1 != s2);
            let b: Vec<ConfidenceBand> = m1.iter().map(|&m| band(m - 0.2, m + 0.2)).collect();
            let pr = build_partial_rank(&b, &top_by_ucb(&b, 2));
            prop_assert_eq!(match_environment(&pr, &[(0, &s1), (1, &s2)], 2), Some(0));
        }
    }
}
