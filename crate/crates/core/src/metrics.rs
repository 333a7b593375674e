//! Error grids and scalar summaries for comparing densities on a grid.

use crate::error::{Error, Result};
use crate::kde::DensityGrid;

/// Scalar summary of one proxy-vs-benchmark comparison.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub abs_error_grid: DensityGrid,
    /// cell-area-weighted sum of the absolute error grid
    pub l1: f64,
    /// how many raw series values were negative on the grid
    pub negative_raw_count: usize,
    /// median evaluation time per grid node, seconds
    pub wall_time_per_node: f64,
}

impl ErrorReport {
    pub fn new(
        abs_error_grid: DensityGrid,
        negative_raw_count: usize,
        wall_time_per_node: f64,
    ) -> Self {
        let l1 = l1_error(&abs_error_grid);
        ErrorReport {
            abs_error_grid,
            l1,
            negative_raw_count,
            wall_time_per_node,
        }
    }
}

/// Node-wise |a - b|; both grids must share node vectors exactly.
pub fn abs_error_grid(a: &DensityGrid, b: &DensityGrid) -> Result<DensityGrid> {
    if !a.same_nodes(b) {
        return Err(Error::input("abs_error_grid: node vectors differ"));
    }
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .collect();
    DensityGrid::new(a.x_nodes.clone(), a.y_nodes.clone(), values)
}

/// L1 metric: Σ grid values × cell area, exactly the Riemann mass of the
/// error grid.
pub fn l1_error(err: &DensityGrid) -> f64 {
    err.mass()
}

/// Riemann mass of a density grid.
pub fn normalization_check(grid: &DensityGrid) -> f64 {
    grid.mass()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid_from(values: Vec<f64>, n: usize) -> DensityGrid {
        let nodes: Vec<f64> = (0..n).map(|i| i as f64).collect();
        DensityGrid::new(nodes.clone(), nodes, values).unwrap()
    }

    #[test]
    fn identical_grids_give_zero() {
        let a = grid_from((0..9).map(|i| i as f64).collect(), 3);
        let err = abs_error_grid(&a, &a).unwrap();
        assert!(err.values.iter().all(|&v| v == 0.0));
        assert_eq!(l1_error(&err), 0.0);
    }

    #[test]
    fn error_against_zero_is_abs() {
        let a = grid_from(vec![1.0, -2.0, 3.0, -4.0], 2);
        let zero = grid_from(vec![0.0; 4], 2);
        let err = abs_error_grid(&a, &zero).unwrap();
        assert_eq!(err.values, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn constant_grid_l1() {
        let c = 0.7;
        let g = grid_from(vec![c; 16], 4);
        // cell_area = 1, 16 nodes
        assert_relative_eq!(l1_error(&g), c * 16.0, epsilon = 1e-12);
    }

    #[test]
    fn mismatched_nodes_rejected() {
        let a = grid_from(vec![0.0; 4], 2);
        let nodes_b: Vec<f64> = vec![0.0, 2.0];
        let b = DensityGrid::new(nodes_b.clone(), nodes_b, vec![0.0; 4]).unwrap();
        assert!(abs_error_grid(&a, &b).is_err());
    }

    #[test]
    fn gaussian_pair_l1_matches_total_variation() {
        // product grids N(0,1)⊗N(0,1) vs N(0.5,1)⊗N(0,1): the L1 distance
        // reduces to 2·TV of the shifted marginals = 2(2Φ(0.25) - 1) ≈ 0.3948
        let n = 401;
        let lo = -8.0;
        let hi = 8.5;
        let nodes: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let norm = |x: f64, mu: f64| {
            (-0.5 * (x - mu) * (x - mu)).exp() / (2.0 * std::f64::consts::PI).sqrt()
        };
        let mut va = Vec::with_capacity(n * n);
        let mut vb = Vec::with_capacity(n * n);
        for &x in &nodes {
            for &y in &nodes {
                va.push(norm(x, 0.0) * norm(y, 0.0));
                vb.push(norm(x, 0.5) * norm(y, 0.0));
            }
        }
        let a = DensityGrid::new(nodes.clone(), nodes.clone(), va).unwrap();
        let b = DensityGrid::new(nodes.clone(), nodes, vb).unwrap();
        let l1 = l1_error(&abs_error_grid(&a, &b).unwrap());
        assert_relative_eq!(l1, 0.39481, max_relative = 0.01);
    }

    #[test]
    fn normalization_of_uniform_grid() {
        let n = 5;
        let cell = 1.0;
        let g = grid_from(vec![1.0 / (cell * 25.0); 25], n);
        assert_relative_eq!(normalization_check(&g), 1.0, epsilon = 1e-12);
        assert_eq!(normalization_check(&grid_from(vec![0.0; 25], n)), 0.0);
    }

    #[test]
    fn report_l1_identity() {
        let err = grid_from(vec![0.25; 9], 3);
        let report = ErrorReport::new(err.clone(), 3, 1e-6);
        assert_eq!(report.l1, err.cell_area * err.values.iter().sum::<f64>());
        assert_eq!(report.negative_raw_count, 3);
    }
}
