//! Brute-force ground truth: enumerate and verify monochromatic solutions
//! to `x + y = z^2` on explicitly scannable domains.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colouring::{Colour, Colouring};

/// Enumeration refuses domains with more elements than this; use the finder
/// for the huge intervals the theorem is stated on.
pub const MAX_SCAN_ELEMENTS: u64 = 1 << 28;

/// A candidate triple `x + y = z^2` with a claimed common colour.
///
/// `x <= y` is normalized at construction; the remaining invariants (the sum
/// identity, domain membership, monochromaticity) are checked by
/// [`check_solution`], so an invalid claim can be represented and then
/// rejected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Solution {
    x: u64,
    y: u64,
    z: u64,
    colour: Colour,
}

impl Solution {
    pub fn new(x: u64, y: u64, z: u64, colour: Colour) -> Solution {
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        Solution { x, y, z, colour }
    }

    pub fn x(&self) -> u64 {
        self.x
    }

    pub fn y(&self) -> u64 {
        self.y
    }

    pub fn z(&self) -> u64 {
        self.z
    }

    pub fn colour(&self) -> Colour {
        self.colour
    }

    pub fn is_trivial(&self) -> bool {
        (self.x, self.y, self.z) == (2, 2, 2)
    }

    /// Same triple with the claimed colour negated.
    pub fn with_flipped_colour(&self) -> Solution {
        Solution {
            colour: self.colour.flip(),
            ..*self
        }
    }
}

impl fmt::Display for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} + {} = {}^2 ({})",
            self.x, self.y, self.z, self.colour
        )
    }
}

impl<'de> Deserialize<'de> for Solution {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Wire {
            x: u64,
            y: u64,
            z: u64,
            colour: Colour,
        }
        let w = Wire::deserialize(deserializer)?;
        Ok(Solution::new(w.x, w.y, w.z, w.colour))
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(
        "domain of {elements} elements exceeds the enumeration cap of {max}; \
         use the finder for intervals of this size"
    )]
    DomainTooLarge { elements: u64, max: u64 },
    #[error(transparent)]
    Colouring(#[from] crate::colouring::ColouringError),
}

/// Why a claimed solution was rejected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolutionDefect {
    SumMismatch,
    OutOfDomain(u64),
    NotMonochromatic,
    ColourMismatch { actual: Colour },
    Trivial,
}

impl fmt::Display for SolutionDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolutionDefect::SumMismatch => write!(f, "x + y differs from z^2"),
            SolutionDefect::OutOfDomain(n) => write!(f, "{n} lies outside the domain"),
            SolutionDefect::NotMonochromatic => write!(f, "x, y, z are not all one colour"),
            SolutionDefect::ColourMismatch { actual } => {
                write!(f, "triple is monochromatic in {actual}, not the claimed colour")
            }
            SolutionDefect::Trivial => write!(f, "the trivial triple 2 + 2 = 2^2 is excluded"),
        }
    }
}

/// All monochromatic solutions with `x <= y`, in `(z, x)` order, truncated
/// at `limit`. With `exclude_trivial`, the triple `(2, 2, 2)` is omitted.
pub fn enumerate_solutions<C: Colouring>(
    source: &C,
    exclude_trivial: bool,
    limit: usize,
) -> Result<Vec<Solution>, OracleError> {
    let domain = source.domain();
    if domain.len() > MAX_SCAN_ELEMENTS {
        return Err(OracleError::DomainTooLarge {
            elements: domain.len(),
            max: MAX_SCAN_ELEMENTS,
        });
    }
    let (lo, hi) = (domain.lo(), domain.hi());
    let mut out = Vec::new();
    'outer: for z in lo..=hi {
        // hi <= 2^62, so 2*hi cannot wrap; a square overflowing u64 is
        // certainly past every admissible sum.
        let s = match z.checked_mul(z) {
            Some(s) if s <= 2 * hi => s,
            _ => break,
        };
        if s < 2 * lo {
            continue;
        }
        let cz = source.colour_at(z)?;
        // x + y = s with x <= y and both in [lo, hi]
        let x_lo = lo.max(s.saturating_sub(hi));
        for x in x_lo..=s / 2 {
            if exclude_trivial && z == 2 && x == 2 {
                continue;
            }
            let y = s - x;
            if source.colour_at(x)? == cz && source.colour_at(y)? == cz {
                out.push(Solution::new(x, y, z, cz));
                if out.len() == limit {
                    break 'outer;
                }
            }
        }
    }
    Ok(out)
}

/// First solution in `(z, x)` order, if any.
pub fn find_any_solution<C: Colouring>(
    source: &C,
    exclude_trivial: bool,
) -> Result<Option<Solution>, OracleError> {
    Ok(enumerate_solutions(source, exclude_trivial, 1)?.into_iter().next())
}

/// Checks every invariant of a claimed solution against the source.
pub fn check_solution<C: Colouring>(
    source: &C,
    s: &Solution,
    exclude_trivial: bool,
) -> Result<(), SolutionDefect> {
    if exclude_trivial && s.is_trivial() {
        return Err(SolutionDefect::Trivial);
    }
    let square = s
        .z
        .checked_mul(s.z)
        .ok_or(SolutionDefect::SumMismatch)?;
    if s.x.checked_add(s.y) != Some(square) {
        return Err(SolutionDefect::SumMismatch);
    }
    let domain = source.domain();
    for n in [s.x, s.y, s.z] {
        if !domain.contains(n) {
            return Err(SolutionDefect::OutOfDomain(n));
        }
    }
    let cx = source.colour_at(s.x).map_err(|_| SolutionDefect::OutOfDomain(s.x))?;
    let cy = source.colour_at(s.y).map_err(|_| SolutionDefect::OutOfDomain(s.y))?;
    let cz = source.colour_at(s.z).map_err(|_| SolutionDefect::OutOfDomain(s.z))?;
    if cx != cy || cy != cz {
        return Err(SolutionDefect::NotMonochromatic);
    }
    if cx != s.colour {
        return Err(SolutionDefect::ColourMismatch { actual: cx });
    }
    Ok(())
}

/// True iff the solution passes every invariant check.
pub fn verify_solution<C: Colouring>(source: &C, s: &Solution, exclude_trivial: bool) -> bool {
    check_solution(source, s, exclude_trivial).is_ok()
}
