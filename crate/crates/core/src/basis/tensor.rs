use crate::error::Result;
use crate::scalar::Scalar;

use super::BasisSet;

/// Products `φ_{ℓ1}(t) ϕ_{ℓ2}(x)` with `ℓ1` as the outer (slow) index and
/// `ℓ2` running from `start` to `d`.
#[derive(Debug, Clone)]
pub struct TensorBasis<T> {
    time: BasisSet<T>,
    state: BasisSet<T>,
    start: usize,
}

impl<T: Scalar> TensorBasis<T> {
    /// Full product, `c·d` entries.
    pub fn new(time: BasisSet<T>, state: BasisSet<T>) -> Self {
        Self { time, state, start: 1 }
    }

    /// Product that drops a constant first state function.
    pub fn hierarchical(time: BasisSet<T>, state: BasisSet<T>) -> Self {
        let start = state.hierarchy_start();
        Self { time, state, start }
    }

    /// Product whose state index starts at `start` (1-based).
    pub fn with_start(time: BasisSet<T>, state: BasisSet<T>, start: usize) -> Self {
        let start = start.clamp(1, state.count());
        Self { time, state, start }
    }

    pub fn time(&self) -> &BasisSet<T> {
        &self.time
    }

    pub fn state(&self) -> &BasisSet<T> {
        &self.state
    }

    /// First state index used.
    pub fn start(&self) -> usize {
        self.start
    }

    /// Number of state functions used.
    pub fn state_dim(&self) -> usize {
        self.state.count() + 1 - self.start
    }

    pub fn dim(&self) -> usize {
        self.time.count() * self.state_dim()
    }

    /// Flat position of `(ℓ1, ℓ2)`, both 1-based.
    pub fn flat_index(&self, l1: usize, l2: usize) -> usize {
        (l1 - 1) * self.state_dim() + (l2 - self.start)
    }

    /// Combine precomputed one-dimensional evaluations.
    pub fn combine(&self, phi_t: &[T], phi_x: &[T], out: &mut [T]) {
        let used = &phi_x[self.start - 1..];
        for (row, &a) in out.chunks_exact_mut(used.len()).zip(phi_t) {
            for (o, &b) in row.iter_mut().zip(used) {
                *o = a * b;
            }
        }
    }

    pub fn eval(&self, t: T, x: T, out: &mut [T]) -> Result<()> {
        let phi_t = self.time.eval_vec(t)?;
        let phi_x = self.state.eval_vec(x)?;
        if out.len() != self.dim() {
            return Err(crate::error::Error::LengthMismatch {
                what: "tensor output buffer",
                expected: self.dim(),
                found: out.len(),
            });
        }
        self.combine(&phi_t, &phi_x, out);
        Ok(())
    }

    pub fn eval_vec(&self, t: T, x: T) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.dim()];
        self.eval(t, x, &mut out)?;
        Ok(out)
    }
}
