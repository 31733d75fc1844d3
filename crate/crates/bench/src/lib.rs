//! Shared builders for the benchmark targets.

use nalgebra::{DMatrix, DVector};

use charflow_core::applications::LayeredMedium;
use charflow_core::QuadraticPDE;

/// |y|^2/2 - 1/2 in n variables.
pub fn eikonal(n: usize) -> QuadraticPDE {
    QuadraticPDE::new(
        DMatrix::zeros(n, n),
        DMatrix::zeros(n, n),
        DMatrix::identity(n, n) * 0.5,
        DVector::zeros(n),
        DVector::zeros(n),
        0.5,
    )
    .expect("valid blocks")
}

/// A five-layer slab stack with alternating speeds.
pub fn slab_stack(n: usize) -> LayeredMedium {
    LayeredMedium::stack(
        n,
        vec![0.0, 1.0, 2.0, 3.0],
        vec![0.5, 2.0, 0.8, 2.0, 0.5],
    )
    .expect("valid medium")
}
