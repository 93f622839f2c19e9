//! The two-band solution-free colouring: `+1` on `[N, N^2/3]` and `-1` on
//! `(N^2/3, N^4/27]` avoids every monochromatic solution to `x + y = z^2`.

use thiserror::Error;

use crate::colouring::{Colour, ColouringError, ColouringSource, Interval};
use crate::oracle::{self, OracleError};

/// Band layout of the avoidance colouring for a given `N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AvoidanceSpec {
    pub n: u64,
    /// `floor(N^2 / 3)`, the last `+1` element.
    pub split: u64,
    /// `floor(N^4 / 27)`, the last element of the domain.
    pub top: u64,
}

impl AvoidanceSpec {
    pub fn new(n: u64) -> Result<AvoidanceSpec, ExtremalError> {
        if n < 3 {
            return Err(ExtremalError::BelowMinimum { n });
        }
        let n2 = n.checked_mul(n).ok_or(ExtremalError::Overflow { n })?;
        let n4 = n2.checked_mul(n2).ok_or(ExtremalError::Overflow { n })?;
        Ok(AvoidanceSpec {
            n,
            split: n2 / 3,
            top: n4 / 27,
        })
    }
}

#[derive(Debug, Error)]
pub enum ExtremalError {
    #[error("N = {n} is below 3; the bands collapse below the domain")]
    BelowMinimum { n: u64 },
    #[error("N = {n} overflows 64-bit band arithmetic")]
    Overflow { n: u64 },
    #[error(transparent)]
    Colouring(#[from] ColouringError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// The two-band colouring on `[N, floor(N^4/27)]`. For `N = 3` the second
/// band is empty and the single point 3 is coloured `+1`.
pub fn avoidance_colouring(n: u64) -> Result<ColouringSource, ExtremalError> {
    let spec = AvoidanceSpec::new(n)?;
    let domain = Interval::new(spec.n, spec.top)?;
    let mut segments = vec![(Interval::new(spec.n, spec.split)?, Colour::Plus)];
    if spec.split < spec.top {
        segments.push((Interval::new(spec.split + 1, spec.top)?, Colour::Minus));
    }
    Ok(ColouringSource::piecewise(domain, segments)?)
}

/// True iff the oracle finds no monochromatic solution in the construction.
pub fn verify_avoidance(n: u64) -> Result<bool, ExtremalError> {
    let source = avoidance_colouring(n)?;
    Ok(oracle::enumerate_solutions(&source, true, 1)?.is_empty())
}

/// Integer certificates that the floored band endpoints preserve avoidance:
/// within the first band every square `z^2 >= N^2` exceeds the largest sum
/// `2*floor(N^2/3)`, and within the second every square exceeds
/// `2*floor(N^4/27)`.
pub fn band_certificates(n: u64) -> bool {
    let n = n as u128;
    let split = n * n / 3;
    let top = n * n * n * n / 27;
    2 * split < n * n && 2 * top < (split + 1) * (split + 1)
}
