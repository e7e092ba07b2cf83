//! Exact Gaussian elimination over symbolic scalars.

use std::collections::{BTreeMap, BTreeSet};

use crate::expr::Frac;

/// Sparse vector keyed by `K`; absent keys are zero.
pub type Vector<K> = BTreeMap<K, Frac>;

fn size(f: &Frac) -> usize {
    f.num().len() + f.den_factors().count() * 4
}

struct Reduced {
    /// Rows in reduced echelon form: `(pivot column, row)`, augmented column
    /// last.
    rows: Vec<(usize, Vec<Frac>)>,
    inconsistent: bool,
}

fn reduce<K: Ord + Clone>(cols: &[&Vector<K>], rhs: Option<&Vector<K>>) -> Reduced {
    let keys: BTreeSet<&K> = cols.iter().flat_map(|c| c.keys()).chain(rhs.into_iter().flat_map(|b| b.keys())).collect();
    let n = cols.len();
    let mut m: Vec<Vec<Frac>> = keys
        .iter()
        .map(|k| {
            let mut row: Vec<Frac> = cols.iter().map(|c| c.get(*k).cloned().unwrap_or_default()).collect();
            row.push(rhs.and_then(|b| b.get(*k).cloned()).unwrap_or_default());
            row
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..n {
        let Some(p) = (r..m.len()).filter(|&i| !m[i][c].is_zero()).min_by_key(|&i| size(&m[i][c])) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].inv().expect("pivot is nonzero");
        let pivot_row: Vec<Frac> = m[r].iter().map(|v| v.mul(&inv)).collect();
        m[r] = pivot_row;
        for i in 0..m.len() {
            if i == r || m[i][c].is_zero() {
                continue;
            }
            let f = m[i][c].clone();
            for j in c..=n {
                if !m[r][j].is_zero() {
                    let t = m[i][j].sub(&f.mul(&m[r][j]));
                    m[i][j] = t;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let inconsistent = m[r..].iter().any(|row| !row[n].is_zero());
    Reduced { rows: pivots.into_iter().zip(m).collect(), inconsistent }
}

/// Some `c` with `sum c_i * cols_i = rhs`, free unknowns set to zero.
pub fn solve<K: Ord + Clone>(cols: &[&Vector<K>], rhs: &Vector<K>) -> Option<Vec<Frac>> {
    let red = reduce(cols, Some(rhs));
    if red.inconsistent {
        return None;
    }
    let n = cols.len();
    let mut out = vec![Frac::zero(); n];
    for (c, row) in red.rows {
        out[c] = row[n].clone();
    }
    Some(out)
}

pub fn rank<K: Ord + Clone>(cols: &[&Vector<K>]) -> usize {
    reduce(cols, None).rows.len()
}

/// Indices of a maximal independent subset, greedily from the left.
pub fn independent_subset<K: Ord + Clone>(cols: &[&Vector<K>]) -> Vec<usize> {
    reduce(cols, None).rows.into_iter().map(|(c, _)| c).collect()
}
