//! Occupied/virtual eigenvalue gaps and the index sets `Omega_q`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mat_ops::{check_gap, check_occupation};

/// One occupied/virtual pair, 0-based, `occupied < p <= virtual_`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapPair {
    pub occupied: usize,
    #[serde(rename = "virtual")]
    pub virtual_: usize,
    pub gap: f64,
}

/// All `p (n - p)` cross gaps `delta_1 <= delta_2 <= ...`, ties broken by
/// the index pair `(i, j)` in lexicographic order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapStructure {
    n: usize,
    p: usize,
    pairs: Vec<GapPair>,
}

pub fn gap_structure(lambdas: &[f64], p: usize) -> Result<GapStructure> {
    let n = lambdas.len();
    check_occupation(n, p)?;
    check_gap(lambdas, p)?;
    let mut pairs = Vec::with_capacity(p * (n - p));
    for i in 0..p {
        for j in p..n {
            pairs.push(GapPair {
                occupied: i,
                virtual_: j,
                gap: (lambdas[j] - lambdas[i]).abs(),
            });
        }
    }
    pairs.sort_by(|a, b| {
        a.gap
            .total_cmp(&b.gap)
            .then(a.occupied.cmp(&b.occupied))
            .then(a.virtual_.cmp(&b.virtual_))
    });
    Ok(GapStructure { n, p, pairs })
}

impl GapStructure {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of cross pairs, `p (n - p)`.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[GapPair] {
        &self.pairs
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.pairs.iter().map(|g| g.gap).collect()
    }

    /// `delta_j` for `1 <= j <= len() + 1`; the last one is `+inf`.
    pub fn delta(&self, j: usize) -> Result<f64> {
        if j == 0 || j > self.len() + 1 {
            return Err(Error::OutOfRange {
                what: "gap index",
                value: j,
                max: self.len() + 1,
            });
        }
        Ok(self.pairs.get(j - 1).map_or(f64::INFINITY, |g| g.gap))
    }

    /// `Omega_q`: both orientations of the `q` smallest-gap pairs, 0-based,
    /// listed as `(virtual, occupied), (occupied, virtual)` per pair.
    pub fn omega(&self, q: usize) -> Result<Vec<(usize, usize)>> {
        if q > self.len() {
            return Err(Error::OutOfRange {
                what: "q",
                value: q,
                max: self.len(),
            });
        }
        Ok(self.pairs[..q]
            .iter()
            .flat_map(|g| [(g.virtual_, g.occupied), (g.occupied, g.virtual_)])
            .collect())
    }

    /// [`GapStructure::omega`] with 1-based indices.
    pub fn omega_one_based(&self, q: usize) -> Result<Vec<[usize; 2]>> {
        Ok(self.omega(q)?.into_iter().map(|(a, b)| [a + 1, b + 1]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn illustrative_gaps() {
        let gaps = gap_structure(&[1.0, 1.16, 10.0], 1).unwrap();
        assert!((gaps.delta(1).unwrap() - 0.16).abs() < 1e-15);
        assert_eq!(gaps.delta(2).unwrap(), 9.0);
        assert_eq!(gaps.delta(3).unwrap(), f64::INFINITY);
        assert_eq!(gaps.omega_one_based(1).unwrap(), vec![[2, 1], [1, 2]]);
        assert!(gaps.delta(4).is_err());
    }

    #[test]
    fn seven_by_three_omega() {
        let gaps = gap_structure(&[0.0, 2.0, 3.0, 4.0, 5.5, 8.0, 10.0], 3).unwrap();
        assert_eq!(gaps.len(), 12);
        assert_eq!(
            gaps.omega_one_based(3).unwrap(),
            vec![[4, 3], [3, 4], [4, 2], [2, 4], [5, 3], [3, 5]]
        );
    }

    #[test]
    fn omega_is_nested_and_sized() {
        let lambdas: Vec<f64> = (0..6).map(|k| (k * k) as f64 * 0.3).collect();
        let gaps = gap_structure(&lambdas, 2).unwrap();
        for q in 0..gaps.len() {
            let a = gaps.omega(q).unwrap();
            let b = gaps.omega(q + 1).unwrap();
            assert_eq!(a.len(), 2 * q);
            assert_eq!(&b[..2 * q], &a[..]);
        }
        assert!(gaps.omega(gaps.len() + 1).is_err());
    }

    #[test]
    fn equally_spaced_single_occupied() {
        let lambdas: Vec<f64> = (0..5).map(|k| 2.0 * k as f64).collect();
        let gaps = gap_structure(&lambdas, 1).unwrap();
        let deltas = gaps.deltas();
        for (j, d) in deltas.iter().enumerate() {
            assert_eq!(*d, lambdas[1 + j] - lambdas[0]);
        }
        assert!(deltas.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn ties_break_by_index() {
        let gaps = gap_structure(&[0.0, 1.0, 2.0], 2).unwrap();
        assert_eq!(gaps.omega_one_based(2).unwrap(), vec![[3, 2], [2, 3], [3, 1], [1, 3]]);
        let gaps = gap_structure(&[0.0, 1.0, 1.0 + 1e-3], 1).unwrap();
        assert_eq!(gaps.pairs()[0].virtual_, 1);
    }

    #[test]
    fn zero_gap_rejected() {
        assert!(matches!(gap_structure(&[0.0, 1.0, 1.0], 2), Err(Error::ZeroGap { .. })));
    }
}
