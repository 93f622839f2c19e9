//! Monochromatic solutions to `x + y = z^2` under 2-colourings of integer
//! intervals.
//!
//! Every 2-colouring of `[N, 10^4 N^4]` contains a monochromatic solution
//! once `N` is large enough, and the two-band colouring of `[N, N^4/27]`
//! shows the exponent 4 is tight. This crate makes both directions
//! executable:
//!
//! - [`colouring`]: lazy, immutable 2-colouring sources with a text format;
//! - [`oracle`]: brute-force enumeration and certificate checking on
//!   scannable domains;
//! - [`finder`]: the constructive case analysis extracting a verified
//!   solution (with a replayable proof trace) from any colouring of
//!   `[N, 10^4 N^4]`, `N >= 17`;
//! - [`extremal`]: the solution-free two-band construction and its
//!   verification;
//! - [`threshold`]: exact values of `S(N)`, the least `M` forcing a
//!   solution on `[N, M]`, by NAE backtracking search with a DIMACS bridge
//!   to external SAT solvers;
//! - [`report`]: the machine-readable report envelope used by the CLI.

pub mod colouring;
pub mod extremal;
pub mod finder;
pub mod oracle;
pub mod report;
pub mod threshold;

pub use colouring::{Colour, Colouring, ColouringSource, Interval};
pub use oracle::Solution;
