//! Shared helpers for the benchmark targets.

use brokenpde::{BrokenProblem, CoefficientModel, Expr, GridSpec};

pub fn expr(text: &str) -> Expr {
    Expr::parse(text).expect("benchmark expression parses")
}

/// The constant-phase jump problem used across the solver benchmarks.
pub fn jump_problem(n: usize) -> BrokenProblem {
    let grid = GridSpec::square(-1.0, 1.0, n).expect("grid");
    let coeff = CoefficientModel::jump(
        expr("2"),
        expr("1"),
        [expr("0"), expr("0")],
        0.4,
        0.5,
        0.1,
    )
    .expect("model");
    BrokenProblem::new(grid, coeff, expr("x"))
}
