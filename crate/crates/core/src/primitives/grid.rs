use num_bigint::BigUint;
use num_traits::ToPrimitive;

use super::{grid_cells, Placement};
use crate::error::{Error, Result};
use crate::hypergraph::iroot_ceil;
use crate::relcore::Value;

/// Layout of a deterministic cartesian product.
///
/// Relations are ranked by size, largest first. The first `t_prime` of them
/// span a grid with `dims[d]` machines along axis `d`; the rest are
/// broadcast to every grid machine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridPlan {
    /// Input indices in rank order.
    pub order: Vec<usize>,
    pub t_prime: usize,
    /// Axis lengths for the first `t_prime` ranked relations.
    pub dims: Vec<usize>,
    /// `L_i = max(1, ⌈(∏_{j≤i} |R_j| / p)^{1/i}⌉)` for every rank `i`.
    pub thresholds: Vec<u64>,
    /// `L_{t'}`.
    pub threshold: u64,
    /// Grid axis of each input, `None` if broadcast.
    axis_of: Vec<Option<usize>>,
}

/// Plans the grid for relations of the given sizes on `p` machines.
pub fn plan_grid(sizes: &[u64], p: usize) -> Result<GridPlan> {
    if sizes.is_empty() {
        return Err(Error::domain("cartesian product of no relations"));
    }
    if p == 0 {
        return Err(Error::domain("grid needs at least one machine"));
    }
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(sizes[i]));
    let mut thresholds = Vec::with_capacity(sizes.len());
    let mut prod = BigUint::from(1u32);
    for (k, &i) in order.iter().enumerate() {
        prod *= sizes[i];
        // L^k ≥ prod / p  ⟺  L^k ≥ ⌈prod / p⌉ for integer L.
        let ceil_div = (&prod + (p - 1)) / p;
        let l = iroot_ceil(&ceil_div, k as u32 + 1).to_u64().unwrap_or(u64::MAX).max(1);
        thresholds.push(l);
    }
    let t_prime = order
        .iter()
        .zip(&thresholds)
        .take_while(|(&i, &l)| sizes[i] >= l)
        .count()
        .max(1);
    let threshold = thresholds[t_prime - 1];
    let dims: Vec<usize> = order[..t_prime]
        .iter()
        .map(|&i| ((sizes[i] / threshold) as usize).max(1))
        .collect();
    let mut axis_of = vec![None; sizes.len()];
    for (d, &i) in order[..t_prime].iter().enumerate() {
        axis_of[i] = Some(d);
    }
    Ok(GridPlan {
        order,
        t_prime,
        dims,
        thresholds,
        threshold,
        axis_of,
    })
}

impl GridPlan {
    pub fn is_broadcast(&self, input: usize) -> bool {
        self.axis_of[input].is_none()
    }

    /// Axis of `input` in the grid, if any.
    pub fn axis(&self, input: usize) -> Option<usize> {
        self.axis_of[input]
    }
}

impl Placement for GridPlan {
    fn machines(&self) -> usize {
        self.dims.iter().product()
    }

    fn place(&self, input: usize, id: u64, _tuple: &[Value], out: &mut Vec<usize>) {
        let mut fixed = vec![None; self.dims.len()];
        if let Some(d) = self.axis_of[input] {
            fixed[d] = Some((id % self.dims[d] as u64) as usize);
        }
        grid_cells(&self.dims, &fixed, out);
    }
}
