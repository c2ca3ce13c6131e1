use std::collections::HashSet;

use super::matrix::Matrix;
use crate::error::{MlsError, Result};
use crate::fields::Fq;

/// All elements of the group generated by `gens`, by breadth-first search.
pub fn closure(gens: &[Matrix], n: usize, budget: usize, f: &Fq) -> Result<HashSet<Matrix>> {
    let mut seen = HashSet::new();
    let id = Matrix::identity(n);
    seen.insert(id.clone());
    let mut frontier = vec![id];
    while let Some(g) = frontier.pop() {
        for s in gens {
            let h = g.mul(s, f);
            if !seen.contains(&h) {
                if seen.len() >= budget {
                    return Err(MlsError::BudgetExceeded { what: "group closure".into(), needed: seen.len() as u64 + 1, budget: budget as u64 });
                }
                seen.insert(h.clone());
                frontier.push(h);
            }
        }
    }
    Ok(seen)
}

/// Closure that only keeps generators not already in the group built so far.
pub fn closure_incremental<I>(gens: I, n: usize, budget: usize, f: &Fq) -> Result<(HashSet<Matrix>, Vec<Matrix>)>
where
    I: IntoIterator<Item = Matrix>,
{
    let mut useful: Vec<Matrix> = Vec::new();
    let mut group: HashSet<Matrix> = std::iter::once(Matrix::identity(n)).collect();
    for g in gens {
        if group.contains(&g) {
            continue;
        }
        useful.push(g);
        group = closure(&useful, n, budget, f)?;
    }
    Ok((group, useful))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_closure() {
        let f = Fq::new(3, 1).unwrap();
        let c = Matrix::from_rows(&[vec![0, 1], vec![1, 1]]).unwrap();
        let g = closure(&[c.clone()], 2, 100, &f).unwrap();
        assert_eq!(g.len(), 8);
        assert!(closure(&[c], 2, 4, &f).is_err());
    }
}
