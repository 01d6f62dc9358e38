use std::sync::Arc;

use super::{RateMatrix, StateSpace};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The two-state chain `q(1,2) = q(1,0) = q(2,1) = 1`, `q(2,0) = 0`.
pub fn two_state_example<T: Scalar>() -> RateMatrix<T> {
    let space = Arc::new(StateSpace::numbered(2).expect("two labels"));
    RateMatrix::new(
        space,
        [(0, 1, T::one()), (1, 0, T::one())],
        vec![T::one(), T::zero()],
    )
    .expect("valid rates")
}

/// `q(1,2) = q(2,1) = 1` with absorption rate `c` from both states.
pub fn symmetric_two_state<T: Scalar>(c: T) -> Result<RateMatrix<T>> {
    let space = Arc::new(StateSpace::numbered(2)?);
    RateMatrix::new(
        space,
        [(0, 1, T::one()), (1, 0, T::one())],
        vec![c.clone(), c],
    )
}

/// One live state absorbed at rate `c`.
pub fn single_state<T: Scalar>(c: T) -> Result<RateMatrix<T>> {
    let space = Arc::new(StateSpace::numbered(1)?);
    RateMatrix::new(space, std::iter::empty(), vec![c])
}

/// Walk on `{1, ..., l}` with `q(i, i+1) = p` for `i < l`, `q(i, i-1) = 1 - p`
/// for `i ≥ 2`, and absorption `q(1, 0) = 1 - p`. The outward jump from `l`
/// is removed.
pub fn asymmetric_walk<T: Scalar>(p: T, l: usize) -> Result<RateMatrix<T>> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::InvalidArgument(format!(
            "walk bias p = {p} not in (0,1)"
        )));
    }
    if l < 2 {
        return Err(Error::InvalidArgument(format!(
            "walk truncation L = {l} < 2"
        )));
    }
    let space = Arc::new(StateSpace::numbered(l)?);
    let down = T::one() - p.clone();
    let up = (0..l - 1).map(|i| (i, i + 1, p.clone()));
    let dn = (1..l).map(|i| (i, i - 1, down.clone()));
    let mut absorb = vec![T::zero(); l];
    absorb[0] = down.clone();
    RateMatrix::new(space, up.chain(dn), absorb)
}
