use crate::error::{VkError, VkResult};
use crate::matrix_kernel::{check_finite, ComplexMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> VkResult<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) || t_end <= t_start {
            return Err(VkError::InvalidInput(format!("grid [{t_start}, {t_end}] is empty")));
        }
        if n_steps < 1 {
            return Err(VkError::InvalidInput("grid needs at least one step".into()));
        }
        Ok(TimeGrid { t_start, t_end, n_steps })
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.t_end
        } else {
            self.t_start + i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Same interval with the step halved.
    pub fn refined(&self) -> TimeGrid {
        TimeGrid { n_steps: 2 * self.n_steps, ..*self }
    }

    pub fn with_steps(&self, n_steps: usize) -> TimeGrid {
        TimeGrid { n_steps, ..*self }
    }
}

/// Operators sampled at every node of a grid, all of one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorFamily {
    grid: TimeGrid,
    nodes: Vec<ComplexMatrix>,
}

impl OperatorFamily {
    pub fn new(grid: TimeGrid, nodes: Vec<ComplexMatrix>) -> VkResult<Self> {
        if nodes.len() != grid.len() {
            return Err(VkError::DimensionMismatch(format!(
                "family has {} nodes, grid has {}",
                nodes.len(),
                grid.len()
            )));
        }
        let (r, c) = nodes[0].shape();
        for (i, m) in nodes.iter().enumerate() {
            check_finite(m, &format!("node {i}"))?;
            if m.shape() != (r, c) {
                return Err(VkError::DimensionMismatch(format!("node {i} has shape {:?}", m.shape())));
            }
        }
        Ok(OperatorFamily { grid, nodes })
    }

    pub fn constant(grid: TimeGrid, m: ComplexMatrix) -> VkResult<Self> {
        Self::new(grid, vec![m; grid.len()])
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> ComplexMatrix) -> VkResult<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn at(&self, i: usize) -> &ComplexMatrix {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[ComplexMatrix] {
        &self.nodes
    }

    pub fn into_nodes(self) -> Vec<ComplexMatrix> {
        self.nodes
    }

    pub fn shape(&self) -> (usize, usize) {
        self.nodes[0].shape()
    }

    pub fn map(&self, f: impl Fn(usize, &ComplexMatrix) -> ComplexMatrix) -> VkResult<Self> {
        Self::new(self.grid, self.nodes.iter().enumerate().map(|(i, m)| f(i, m)).collect())
    }

    pub fn adjoint(&self) -> Self {
        OperatorFamily { grid: self.grid, nodes: self.nodes.iter().map(|m| m.adjoint()).collect() }
    }

    pub fn derivative(&self, stride: usize) -> VkResult<Vec<ComplexMatrix>> {
        difference(&self.nodes, self.grid.step(), stride)
    }

    pub fn max_distance(&self, other: &OperatorFamily) -> f64 {
        self.nodes
            .iter()
            .zip(&other.nodes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Second-order differences of node samples spaced `h` apart, using nodes
/// `stride` apart: central inside, one-sided three-point at the ends.
pub fn difference(values: &[ComplexMatrix], h: f64, stride: usize) -> VkResult<Vec<ComplexMatrix>> {
    let n = values.len();
    let s = stride.max(1);
    if n < 3 * s {
        return Err(VkError::InvalidInput(format!(
            "{n} nodes are too few for differences with stride {s}"
        )));
    }
    let hs = h * s as f64;
    let out = (0..n)
        .map(|j| {
            if j >= s && j + s < n {
                (&values[j + s] - &values[j - s]).unscale(2.0 * hs)
            } else if j < s {
                (values[j + s].scale(4.0) - values[j].scale(3.0) - &values[j + 2 * s]).unscale(2.0 * hs)
            } else {
                (values[j].scale(3.0) - values[j - s].scale(4.0) + &values[j - 2 * s]).unscale(2.0 * hs)
            }
        })
        .collect();
    Ok(out)
}

/// Scalar version of [`difference`].
pub fn difference_scalar(values: &[f64], h: f64) -> VkResult<Vec<f64>> {
    let n = values.len();
    if n < 3 {
        return Err(VkError::InvalidInput("need at least three nodes".into()));
    }
    Ok((0..n)
        .map(|j| {
            if j >= 1 && j + 1 < n {
                (values[j + 1] - values[j - 1]) / (2.0 * h)
            } else if j == 0 {
                (4.0 * values[1] - 3.0 * values[0] - values[2]) / (2.0 * h)
            } else {
                (3.0 * values[j] - 4.0 * values[j - 1] + values[j - 2]) / (2.0 * h)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix_kernel::c64;

    #[test]
    fn grid_nodes_hit_endpoints() {
        let g = TimeGrid::new(0.1, 0.7, 3).unwrap();
        assert_eq!(g.node(0), 0.1);
        assert_eq!(g.node(3), 0.7);
        assert_eq!(g.len(), 4);
        assert!(TimeGrid::new(1.0, 1.0, 3).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn differences_are_second_order() {
        let errs: Vec<f64> = [20usize, 40]
            .iter()
            .map(|&n| {
                let g = TimeGrid::new(0.0, 1.0, n).unwrap();
                let f = OperatorFamily::from_fn(g, |t| ComplexMatrix::from_element(1, 1, c64(t.sin(), t * t * t))).unwrap();
                let d = f.derivative(1).unwrap();
                g.nodes()
                    .iter()
                    .zip(&d)
                    .map(|(t, m)| (m[(0, 0)] - c64(t.cos(), 3.0 * t * t)).norm())
                    .fold(0.0, f64::max)
            })
            .collect();
        let ratio = errs[0] / errs[1];
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn quadratics_differentiate_exactly() {
        let g = TimeGrid::new(0.0, 2.0, 8).unwrap();
        let f = OperatorFamily::from_fn(g, |t| ComplexMatrix::from_element(1, 1, c64(t * t, -t))).unwrap();
        for stride in [1, 2] {
            let d = f.derivative(stride).unwrap();
            for (t, m) in g.nodes().iter().zip(&d) {
                assert!((m[(0, 0)] - c64(2.0 * t, -1.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn family_rejects_shape_change() {
        let g = TimeGrid::new(0.0, 1.0, 1).unwrap();
        let r = OperatorFamily::new(g, vec![ComplexMatrix::zeros(1, 1), ComplexMatrix::zeros(2, 1)]);
        assert!(r.is_err());
    }
}
