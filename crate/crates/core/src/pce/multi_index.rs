use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Default cap on the number of terms in a generated index set.
pub const DEFAULT_TERM_CAP: usize = 200_000;

/// Per-coordinate polynomial degrees of one product basis function.
///
/// Ordering is graded: lower total order first, then larger leading degrees
/// first, so `(0,0) < (1,0) < (0,1) < (2,0) < (1,1) < (0,2)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(degrees: Vec<u32>) -> Self {
        Self(degrees)
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    pub fn degrees(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total order `sum_j u_j`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&d| d == 0)
    }

    pub fn max_degree(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Number of multi-indices of dimension `s` with total order at most `p`,
/// i.e. `C(s + p, p)`, or `None` on overflow.
pub fn total_order_cardinality(s: usize, p: usize) -> Option<u128> {
    let mut c: u128 = 1;
    for i in 1..=p as u128 {
        c = c.checked_mul(s as u128 + i)? / i;
    }
    Some(c)
}

/// All indices with `|u| <= p` in graded order, capped at `cap` terms.
pub fn total_order_index_set_capped(s: usize, p: usize, cap: usize) -> Result<Vec<MultiIndex>> {
    if s == 0 {
        return Err(Error::invalid("index set dimension must be at least 1"));
    }
    let requested = total_order_cardinality(s, p).unwrap_or(u128::MAX);
    if requested > cap as u128 {
        return Err(Error::IndexSetTooLarge { requested, cap });
    }
    let mut out = Vec::with_capacity(requested as usize);
    let mut current = vec![0u32; s];
    for order in 0..=p as u32 {
        compositions(order, 0, &mut current, &mut out);
    }
    Ok(out)
}

pub fn total_order_index_set(s: usize, p: usize) -> Result<Vec<MultiIndex>> {
    total_order_index_set_capped(s, p, DEFAULT_TERM_CAP)
}

fn compositions(remaining: u32, pos: usize, current: &mut [u32], out: &mut Vec<MultiIndex>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(MultiIndex(current.to_vec()));
        current[pos] = 0;
        return;
    }
    for d in (0..=remaining).rev() {
        current[pos] = d;
        compositions(remaining - d, pos + 1, current, out);
    }
    current[pos] = 0;
}
