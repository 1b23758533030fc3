//! Dense closure-backed problem pieces for solver tests.

use super::{ConstraintSet, Objective, Sparsity};

pub struct FnObjective<F, G> {
    pub f: F,
    pub grad: G,
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (self.grad)(x, grad);
        (self.f)(x)
    }
}

/// Dense constraint family: closure for values, closure for the full dense
/// Jacobian (row-major m x n).
pub struct DenseConstraints<E, J> {
    pub m: usize,
    pub n: usize,
    pub eval: E,
    pub jac: J,
    sparsity: Sparsity,
}

impl<E, J> DenseConstraints<E, J>
where
    E: Fn(&[f64], &mut [f64]) + Send + Sync,
    J: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(m: usize, n: usize, eval: E, jac: J) -> Self {
        let mut sparsity = Sparsity::default();
        for r in 0..m {
            for c in 0..n {
                sparsity.push(r, c);
            }
        }
        Self {
            m,
            n,
            eval,
            jac,
            sparsity,
        }
    }
}

impl<E, J> ConstraintSet for DenseConstraints<E, J>
where
    E: Fn(&[f64], &mut [f64]) + Send + Sync,
    J: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.m
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.eval)(x, out)
    }
    fn jacobian_values(&self, x: &[f64], out: &mut [f64]) {
        (self.jac)(x, out)
    }
    fn sparsity(&self) -> &Sparsity {
        &self.sparsity
    }
}
