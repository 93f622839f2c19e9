//! Two-colourings of integer intervals.
//!
//! A [`ColouringSource`] assigns one of two colours to every integer of a
//! domain interval. Sources are immutable and evaluated lazily, so domains
//! far too large to materialize (the finder works on `[N, 10^4 N^4]`) cost
//! nothing to hold. The text format round-trips every rule exactly.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest admissible element value. Keeping `hi <= 2^62` guarantees that
/// every sum `x + y` and every square `z^2` the toolkit compares against a
/// sum fits in unsigned 64-bit arithmetic without wrapping.
pub const MAX_ELEMENT: u64 = 1 << 62;

/// Domains with more elements than this reject `Bitmap` construction;
/// larger domains must use a lazy rule.
pub const MAX_BITMAP_ELEMENTS: u64 = 1 << 26;

const MAX_FLIP_DEPTH: usize = 64;

/// One of the two colours, written `"+1"` and `"-1"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Colour {
    Minus,
    Plus,
}

impl Colour {
    pub fn flip(self) -> Colour {
        match self {
            Colour::Plus => Colour::Minus,
            Colour::Minus => Colour::Plus,
        }
    }

    /// Signed value, matching the written form.
    pub fn sign(self) -> i8 {
        match self {
            Colour::Plus => 1,
            Colour::Minus => -1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Colour::Plus => "+1",
            Colour::Minus => "-1",
        }
    }
}

impl fmt::Display for Colour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Colour {
    type Err = ColouringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "+1" | "+" => Ok(Colour::Plus),
            "-1" | "-" => Ok(Colour::Minus),
            other => Err(ColouringError::Schema {
                field: "colour",
                message: format!("expected \"+1\" or \"-1\", got {other:?}"),
            }),
        }
    }
}

impl Serialize for Colour {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Colour {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        match s.as_str() {
            "+1" => Ok(Colour::Plus),
            "-1" => Ok(Colour::Minus),
            other => Err(D::Error::custom(format!(
                "colour must be \"+1\" or \"-1\", got {other:?}"
            ))),
        }
    }
}

/// A nonempty integer interval `[lo, hi]` with `1 <= lo <= hi <= 2^62`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    lo: u64,
    hi: u64,
}

impl Interval {
    pub fn new(lo: u64, hi: u64) -> Result<Interval, ColouringError> {
        if lo < 1 {
            return Err(ColouringError::InvalidInterval {
                lo,
                hi,
                reason: "lower endpoint must be at least 1",
            });
        }
        if lo > hi {
            return Err(ColouringError::InvalidInterval {
                lo,
                hi,
                reason: "lower endpoint exceeds upper endpoint",
            });
        }
        if hi > MAX_ELEMENT {
            return Err(ColouringError::InvalidInterval {
                lo,
                hi,
                reason: "upper endpoint exceeds 2^62",
            });
        }
        Ok(Interval { lo, hi })
    }

    pub fn lo(&self) -> u64 {
        self.lo
    }

    pub fn hi(&self) -> u64 {
        self.hi
    }

    /// Number of integers in the interval.
    pub fn len(&self) -> u64 {
        self.hi - self.lo + 1
    }

    pub fn contains(&self, n: u64) -> bool {
        self.lo <= n && n <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// How a source assigns colours.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rule {
    /// Ordered segments tiling the domain exactly.
    Piecewise { segments: Vec<(Interval, Colour)> },
    /// `pattern[(n - anchor) mod period]`.
    Periodic {
        period: u64,
        pattern: Vec<Colour>,
        anchor: u64,
    },
    /// Packed bits, little-endian within bytes; bit `i` colours `offset + i`,
    /// a set bit meaning `+1`.
    Bitmap { offset: u64, bits: Vec<u8> },
    /// Counter-mode hash of `(seed, n)`: stateless, so random access at
    /// arbitrary points is reproducible and order-independent.
    SeededRandom { seed: u64 },
    /// Negates an inner source.
    Flip { inner: Box<ColouringSource> },
}

/// An immutable colouring rule over a domain interval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColouringSource {
    domain: Interval,
    rule: Rule,
}

/// Anything that can answer colour queries over a domain. Implemented by
/// [`ColouringSource`] and by test adapters that wrap one.
pub trait Colouring {
    fn domain(&self) -> Interval;
    fn colour_at(&self, n: u64) -> Result<Colour, ColouringError>;
}

impl<C: Colouring + ?Sized> Colouring for &C {
    fn domain(&self) -> Interval {
        (**self).domain()
    }

    fn colour_at(&self, n: u64) -> Result<Colour, ColouringError> {
        (**self).colour_at(n)
    }
}

impl ColouringSource {
    /// Validated piecewise source; segments must tile the domain in order.
    pub fn piecewise(
        domain: Interval,
        segments: Vec<(Interval, Colour)>,
    ) -> Result<ColouringSource, ColouringError> {
        let mut expected = domain.lo;
        for (iv, _) in &segments {
            if iv.lo < domain.lo || iv.hi > domain.hi {
                return Err(ColouringError::SegmentOutOfDomain {
                    seg_lo: iv.lo,
                    seg_hi: iv.hi,
                    domain,
                });
            }
            if iv.lo > expected {
                return Err(ColouringError::SegmentGap { at: expected });
            }
            if iv.lo < expected {
                return Err(ColouringError::SegmentOverlap { at: iv.lo });
            }
            expected = iv.hi + 1;
        }
        if expected != domain.hi + 1 {
            return Err(ColouringError::SegmentGap { at: expected });
        }
        Ok(ColouringSource {
            domain,
            rule: Rule::Piecewise { segments },
        })
    }

    /// Single-colour source over the whole domain.
    pub fn uniform(domain: Interval, colour: Colour) -> ColouringSource {
        ColouringSource {
            domain,
            rule: Rule::Piecewise {
                segments: vec![(domain, colour)],
            },
        }
    }

    pub fn periodic(
        domain: Interval,
        period: u64,
        pattern: Vec<Colour>,
        anchor: u64,
    ) -> Result<ColouringSource, ColouringError> {
        if period < 1 {
            return Err(ColouringError::Schema {
                field: "period",
                message: "period must be at least 1".into(),
            });
        }
        if period > MAX_BITMAP_ELEMENTS {
            return Err(ColouringError::PeriodTooLarge {
                period,
                max: MAX_BITMAP_ELEMENTS,
            });
        }
        if pattern.len() as u64 != period {
            return Err(ColouringError::PatternLength {
                period,
                got: pattern.len(),
            });
        }
        Ok(ColouringSource {
            domain,
            rule: Rule::Periodic {
                period,
                pattern,
                anchor,
            },
        })
    }

    /// Bitmap source; `bits` must hold exactly one bit per domain element,
    /// packed into `ceil(len / 8)` bytes, and the domain must not exceed
    /// [`MAX_BITMAP_ELEMENTS`].
    pub fn bitmap(domain: Interval, bits: Vec<u8>) -> Result<ColouringSource, ColouringError> {
        Self::bitmap_at(domain, domain.lo, bits)
    }

    fn bitmap_at(
        domain: Interval,
        offset: u64,
        bits: Vec<u8>,
    ) -> Result<ColouringSource, ColouringError> {
        let elements = domain.len();
        if elements > MAX_BITMAP_ELEMENTS {
            return Err(ColouringError::BitmapTooLarge {
                elements,
                max: MAX_BITMAP_ELEMENTS,
            });
        }
        if offset != domain.lo {
            return Err(ColouringError::Schema {
                field: "offset",
                message: format!(
                    "bitmap offset {offset} must equal the domain lower endpoint {}",
                    domain.lo
                ),
            });
        }
        let need = elements.div_ceil(8) as usize;
        if bits.len() != need {
            return Err(ColouringError::BitmapLength {
                need,
                got: bits.len(),
            });
        }
        Ok(ColouringSource {
            domain,
            rule: Rule::Bitmap { offset, bits },
        })
    }

    /// Bitmap built from explicit per-element colours covering the domain.
    pub fn from_colours(
        domain: Interval,
        colours: &[Colour],
    ) -> Result<ColouringSource, ColouringError> {
        if colours.len() as u64 != domain.len() {
            return Err(ColouringError::BitmapLength {
                need: domain.len() as usize,
                got: colours.len(),
            });
        }
        let mut bits = vec![0u8; colours.len().div_ceil(8)];
        for (i, c) in colours.iter().enumerate() {
            if *c == Colour::Plus {
                bits[i / 8] |= 1 << (i % 8);
            }
        }
        ColouringSource::bitmap(domain, bits)
    }

    pub fn seeded_random(domain: Interval, seed: u64) -> ColouringSource {
        ColouringSource {
            domain,
            rule: Rule::SeededRandom { seed },
        }
    }

    /// Negation of `inner`, over the same domain.
    pub fn flip(inner: ColouringSource) -> ColouringSource {
        ColouringSource {
            domain: inner.domain,
            rule: Rule::Flip {
                inner: Box::new(inner),
            },
        }
    }

    pub fn rule(&self) -> &Rule {
        &self.rule
    }
}

impl Colouring for ColouringSource {
    fn domain(&self) -> Interval {
        self.domain
    }

    fn colour_at(&self, n: u64) -> Result<Colour, ColouringError> {
        if !self.domain.contains(n) {
            return Err(ColouringError::OutOfDomain {
                n,
                domain: self.domain,
            });
        }
        Ok(match &self.rule {
            Rule::Piecewise { segments } => {
                // Segments tile the domain, so the last segment starting at
                // or before n contains it.
                let idx = segments.partition_point(|(iv, _)| iv.lo <= n) - 1;
                segments[idx].1
            }
            Rule::Periodic {
                period,
                pattern,
                anchor,
            } => {
                let idx = ((n % period) + period - (anchor % period)) % period;
                pattern[idx as usize]
            }
            Rule::Bitmap { offset, bits } => {
                let i = (n - offset) as usize;
                if bits[i / 8] >> (i % 8) & 1 == 1 {
                    Colour::Plus
                } else {
                    Colour::Minus
                }
            }
            Rule::SeededRandom { seed } => {
                if mix64(seed ^ mix64(n)) & 1 == 1 {
                    Colour::Plus
                } else {
                    Colour::Minus
                }
            }
            Rule::Flip { inner } => inner.colour_at(n)?.flip(),
        })
    }
}

/// SplitMix64 finalizer: a bijective 64-bit mixer with full avalanche.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Error)]
pub enum ColouringError {
    #[error("interval [{lo}, {hi}] is invalid: {reason}")]
    InvalidInterval {
        lo: u64,
        hi: u64,
        reason: &'static str,
    },
    #[error("{n} is outside the colouring domain {domain}")]
    OutOfDomain { n: u64, domain: Interval },
    #[error("piecewise segments leave a gap starting at {at}")]
    SegmentGap { at: u64 },
    #[error("piecewise segment overlaps previous coverage at {at}")]
    SegmentOverlap { at: u64 },
    #[error("piecewise segment [{seg_lo}, {seg_hi}] leaves the domain {domain}")]
    SegmentOutOfDomain {
        seg_lo: u64,
        seg_hi: u64,
        domain: Interval,
    },
    #[error("bitmap holds {got} bytes but the domain needs exactly {need}")]
    BitmapLength { need: usize, got: usize },
    #[error("domain of {elements} elements exceeds the bitmap cap of {max}; use a lazy rule")]
    BitmapTooLarge { elements: u64, max: u64 },
    #[error("period {period} exceeds the materialized-pattern cap of {max}")]
    PeriodTooLarge { period: u64, max: u64 },
    #[error("periodic pattern lists {got} colours but the period is {period}")]
    PatternLength { period: u64, got: usize },
    #[error("flip inner domain {inner} does not cover the outer domain {outer}")]
    FlipDomain { inner: Interval, outer: Interval },
    #[error("flip nesting deeper than {max} levels")]
    FlipTooDeep { max: usize },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid {field}: {message}")]
    Schema {
        field: &'static str,
        message: String,
    },
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------
//
// One JSON document per file:
//   {"domain": [lo, hi], "rule": {"type": "...", ...}}
// Rule variants: piecewise {segments: [{from, to, colour}]},
// periodic {period, anchor, pattern}, bitmap {offset, bits_base64},
// random {seed}, flip {inner: <document>}. Unknown keys are rejected.

mod wire {
    use serde::{Deserialize, Serialize};

    use super::Colour;

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Doc {
        pub domain: (u64, u64),
        pub rule: serde_json::Value,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Segment {
        pub from: u64,
        pub to: u64,
        pub colour: Colour,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Piecewise {
        pub segments: Vec<Segment>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Periodic {
        pub period: u64,
        pub anchor: u64,
        pub pattern: Vec<Colour>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Bitmap {
        pub offset: u64,
        pub bits_base64: String,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Random {
        pub seed: u64,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Flip {
        pub inner: serde_json::Value,
    }
}

impl ColouringSource {
    /// Serializes to the one-document text format.
    pub fn to_text(&self) -> String {
        let value = self.to_value();
        serde_json::to_string_pretty(&value).expect("colouring document serializes")
    }

    pub fn to_value(&self) -> serde_json::Value {
        use base64::Engine as _;
        let rule = match &self.rule {
            Rule::Piecewise { segments } => serde_json::json!({
                "type": "piecewise",
                "segments": segments.iter().map(|(iv, c)| {
                    serde_json::json!({"from": iv.lo, "to": iv.hi, "colour": c})
                }).collect::<Vec<_>>(),
            }),
            Rule::Periodic {
                period,
                pattern,
                anchor,
            } => serde_json::json!({
                "type": "periodic",
                "period": period,
                "anchor": anchor,
                "pattern": pattern,
            }),
            Rule::Bitmap { offset, bits } => serde_json::json!({
                "type": "bitmap",
                "offset": offset,
                "bits_base64": base64::engine::general_purpose::STANDARD.encode(bits),
            }),
            Rule::SeededRandom { seed } => serde_json::json!({
                "type": "random",
                "seed": seed,
            }),
            Rule::Flip { inner } => serde_json::json!({
                "type": "flip",
                "inner": inner.to_value(),
            }),
        };
        serde_json::json!({"domain": [self.domain.lo, self.domain.hi], "rule": rule})
    }

    /// Parses the one-document text format, validating every invariant.
    pub fn from_text(text: &str) -> Result<ColouringSource, ColouringError> {
        let doc: wire::Doc = serde_json::from_str(text).map_err(|e| ColouringError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_doc(doc, 0)
    }

    pub fn from_value(value: serde_json::Value) -> Result<ColouringSource, ColouringError> {
        let doc: wire::Doc = serde_json::from_value(value).map_err(schema_err("document"))?;
        Self::from_doc(doc, 0)
    }

    fn from_doc(doc: wire::Doc, depth: usize) -> Result<ColouringSource, ColouringError> {
        if depth > MAX_FLIP_DEPTH {
            return Err(ColouringError::FlipTooDeep {
                max: MAX_FLIP_DEPTH,
            });
        }
        let domain = Interval::new(doc.domain.0, doc.domain.1)?;
        let mut rule = match doc.rule {
            serde_json::Value::Object(map) => map,
            _ => {
                return Err(ColouringError::Schema {
                    field: "rule",
                    message: "rule must be an object".into(),
                })
            }
        };
        let ty = match rule.remove("type") {
            Some(serde_json::Value::String(s)) => s,
            _ => {
                return Err(ColouringError::Schema {
                    field: "rule.type",
                    message: "missing or non-string \"type\"".into(),
                })
            }
        };
        let rest = serde_json::Value::Object(rule);
        match ty.as_str() {
            "piecewise" => {
                let w: wire::Piecewise =
                    serde_json::from_value(rest).map_err(schema_err("piecewise rule"))?;
                let mut segments = Vec::with_capacity(w.segments.len());
                for s in w.segments {
                    segments.push((Interval::new(s.from, s.to)?, s.colour));
                }
                ColouringSource::piecewise(domain, segments)
            }
            "periodic" => {
                let w: wire::Periodic =
                    serde_json::from_value(rest).map_err(schema_err("periodic rule"))?;
                ColouringSource::periodic(domain, w.period, w.pattern, w.anchor)
            }
            "bitmap" => {
                use base64::Engine as _;
                let w: wire::Bitmap =
                    serde_json::from_value(rest).map_err(schema_err("bitmap rule"))?;
                let bits = base64::engine::general_purpose::STANDARD
                    .decode(&w.bits_base64)
                    .map_err(|e| ColouringError::Schema {
                        field: "bits_base64",
                        message: e.to_string(),
                    })?;
                ColouringSource::bitmap_at(domain, w.offset, bits)
            }
            "random" => {
                let w: wire::Random =
                    serde_json::from_value(rest).map_err(schema_err("random rule"))?;
                Ok(ColouringSource::seeded_random(domain, w.seed))
            }
            "flip" => {
                let w: wire::Flip = serde_json::from_value(rest).map_err(schema_err("flip rule"))?;
                let inner_doc: wire::Doc =
                    serde_json::from_value(w.inner).map_err(schema_err("flip inner"))?;
                let inner = Self::from_doc(inner_doc, depth + 1)?;
                if !inner.domain.contains_interval(&domain) {
                    return Err(ColouringError::FlipDomain {
                        inner: inner.domain,
                        outer: domain,
                    });
                }
                Ok(ColouringSource {
                    domain,
                    rule: Rule::Flip {
                        inner: Box::new(inner),
                    },
                })
            }
            other => Err(ColouringError::Schema {
                field: "rule.type",
                message: format!("unknown rule type {other:?}"),
            }),
        }
    }
}

fn schema_err(field: &'static str) -> impl Fn(serde_json::Error) -> ColouringError {
    move |e| ColouringError::Schema {
        field,
        message: e.to_string(),
    }
}
