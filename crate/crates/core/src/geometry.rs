//! Interval algebra over the cake `[0, 1]`.
//!
//! A [`Piece`] is a finite union of closed intervals kept in canonical form:
//! sorted, pairwise disjoint, non-adjacent and of positive length. Endpoint
//! ownership never matters because single points carry no value, so two pieces
//! sharing only an endpoint are treated as disjoint.
//!
//! A [`ResidueFrame`] straightens a multi-interval residue into one contiguous
//! coordinate range `[0, length]`. Protocol cuts and marks are expressed in
//! frame coordinates and mapped back onto the cake.

use std::cmp::{max, min};
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::rational::{self, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("interval [{lo}, {hi}] has lo > hi")]
    Inverted { lo: Rational, hi: Rational },
    #[error("point {0} lies outside the cake [0, 1]")]
    OutsideCake(Rational),
    #[error("frame coordinate {t} outside [0, {length}]")]
    OutsideFrame { t: Rational, length: Rational },
    #[error("cake point {0} is not a point of the residue")]
    NotInResidue(Rational),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Interval {
    lo: Rational,
    hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self, GeometryError> {
        for p in [&lo, &hi] {
            if p.is_negative_or_above_one() {
                return Err(GeometryError::OutsideCake(p.clone()));
            }
        }
        if lo > hi {
            return Err(GeometryError::Inverted { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn length(&self) -> Rational {
        &self.hi - &self.lo
    }
}

trait UnitRange {
    fn is_negative_or_above_one(&self) -> bool;
}

impl UnitRange for Rational {
    fn is_negative_or_above_one(&self) -> bool {
        *self < Rational::zero() || *self > Rational::one()
    }
}

/// Canonical finite union of intervals of the cake.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Piece {
    intervals: Vec<Interval>,
}

impl Piece {
    pub fn empty() -> Self {
        Piece::default()
    }

    /// The whole cake `[0, 1]`.
    pub fn full() -> Self {
        Piece {
            intervals: vec![Interval {
                lo: Rational::zero(),
                hi: Rational::one(),
            }],
        }
    }

    /// Normalizes an arbitrary list of intervals.
    pub fn normalize(intervals: Vec<Interval>) -> Piece {
        let mut ivs: Vec<Interval> = intervals.into_iter().filter(|i| i.lo < i.hi).collect();
        ivs.sort_by(|a, b| a.lo.cmp(&b.lo).then_with(|| a.hi.cmp(&b.hi)));
        let mut out: Vec<Interval> = Vec::with_capacity(ivs.len());
        for iv in ivs {
            match out.last_mut() {
                Some(last) if iv.lo <= last.hi => {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                    }
                }
                _ => out.push(iv),
            }
        }
        Piece { intervals: out }
    }

    /// Builds a piece from raw `(lo, hi)` pairs, validating each.
    pub fn from_pairs<I>(pairs: I) -> Result<Piece, GeometryError>
    where
        I: IntoIterator<Item = (Rational, Rational)>,
    {
        let ivs = pairs
            .into_iter()
            .map(|(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Piece::normalize(ivs))
    }

    pub fn interval(lo: Rational, hi: Rational) -> Result<Piece, GeometryError> {
        Piece::from_pairs([(lo, hi)])
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn length(&self) -> Rational {
        self.intervals
            .iter()
            .fold(Rational::zero(), |acc, iv| acc + iv.length())
    }

    /// Leftmost point, if any.
    pub fn min_point(&self) -> Option<&Rational> {
        self.intervals.first().map(|iv| &iv.lo)
    }

    pub fn union(&self, other: &Piece) -> Piece {
        let mut all = self.intervals.clone();
        all.extend(other.intervals.iter().cloned());
        Piece::normalize(all)
    }

    pub fn intersection(&self, other: &Piece) -> Piece {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.intervals, &other.intervals);
        while i < a.len() && j < b.len() {
            let lo = max(&a[i].lo, &b[j].lo);
            let hi = min(&a[i].hi, &b[j].hi);
            if lo < hi {
                out.push(Interval {
                    lo: lo.clone(),
                    hi: hi.clone(),
                });
            }
            if a[i].hi < b[j].hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        Piece::normalize(out)
    }

    /// Set difference `self \ other`.
    pub fn subtract(&self, other: &Piece) -> Piece {
        let mut out = Vec::new();
        for iv in &self.intervals {
            let mut cursor = iv.lo.clone();
            for cut in &other.intervals {
                if cut.hi <= cursor || cut.lo >= iv.hi {
                    continue;
                }
                if cut.lo > cursor {
                    out.push(Interval {
                        lo: cursor.clone(),
                        hi: cut.lo.clone(),
                    });
                }
                if cut.hi > cursor {
                    cursor = cut.hi.clone();
                }
                if cursor >= iv.hi {
                    break;
                }
            }
            if cursor < iv.hi {
                out.push(Interval {
                    lo: cursor,
                    hi: iv.hi.clone(),
                });
            }
        }
        Piece::normalize(out)
    }

    /// `other ⊆ self` up to measure zero.
    pub fn contains(&self, other: &Piece) -> bool {
        other.subtract(self).is_empty()
    }

    /// True when the two pieces overlap in positive length.
    pub fn overlaps(&self, other: &Piece) -> bool {
        !self.intersection(other).is_empty()
    }
}

impl fmt::Display for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "∅");
        }
        for (k, iv) in self.intervals.iter().enumerate() {
            if k > 0 {
                write!(f, " ∪ ")?;
            }
            write!(f, "[{}, {}]", iv.lo, iv.hi)?;
        }
        Ok(())
    }
}

impl Serialize for Piece {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[String; 2]> = self
            .intervals
            .iter()
            .map(|iv| {
                [
                    rational::to_compact_string(&iv.lo),
                    rational::to_compact_string(&iv.hi),
                ]
            })
            .collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Piece {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pairs = Vec::<[String; 2]>::deserialize(d)?;
        let parsed = pairs
            .iter()
            .map(|[lo, hi]| Ok((rational::parse(lo)?, rational::parse(hi)?)))
            .collect::<Result<Vec<_>, rational::ParseRationalError>>()
            .map_err(serde::de::Error::custom)?;
        Piece::from_pairs(parsed).map_err(serde::de::Error::custom)
    }
}

/// Contiguous view `[0, length]` of a residue that may consist of several
/// intervals of the cake.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidueFrame {
    residue: Piece,
    /// Frame coordinate at which each residue interval starts.
    offsets: Vec<Rational>,
    length: Rational,
}

impl ResidueFrame {
    pub fn new(residue: Piece) -> Self {
        let mut offsets = Vec::with_capacity(residue.intervals.len());
        let mut acc = Rational::zero();
        for iv in &residue.intervals {
            offsets.push(acc.clone());
            acc += iv.length();
        }
        ResidueFrame {
            residue,
            offsets,
            length: acc,
        }
    }

    pub fn residue(&self) -> &Piece {
        &self.residue
    }

    pub fn length(&self) -> &Rational {
        &self.length
    }

    fn check(&self, t: &Rational) -> Result<(), GeometryError> {
        if *t < Rational::zero() || *t > self.length {
            return Err(GeometryError::OutsideFrame {
                t: t.clone(),
                length: self.length.clone(),
            });
        }
        Ok(())
    }

    /// Maps a frame coordinate onto the cake. Coordinates on the seam between
    /// two residue intervals map to the right end of the left interval.
    pub fn to_cake(&self, t: &Rational) -> Result<Rational, GeometryError> {
        self.check(t)?;
        for (iv, off) in self.residue.intervals.iter().zip(&self.offsets) {
            let end = off + iv.length();
            if *t <= end {
                return Ok(&iv.lo + (t - off));
            }
        }
        // only reachable for an empty residue with t = 0
        Ok(Rational::zero())
    }

    /// Inverse of [`to_cake`](Self::to_cake) on points of the residue.
    pub fn to_frame(&self, x: &Rational) -> Result<Rational, GeometryError> {
        for (iv, off) in self.residue.intervals.iter().zip(&self.offsets) {
            if iv.lo <= *x && *x <= iv.hi {
                return Ok(off + (x - &iv.lo));
            }
        }
        Err(GeometryError::NotInResidue(x.clone()))
    }

    /// The part of the residue lying between frame coordinates `lo` and `hi`.
    pub fn slice(&self, lo: &Rational, hi: &Rational) -> Result<Piece, GeometryError> {
        self.check(lo)?;
        self.check(hi)?;
        if lo > hi {
            return Err(GeometryError::Inverted {
                lo: lo.clone(),
                hi: hi.clone(),
            });
        }
        let mut out = Vec::new();
        for (iv, off) in self.residue.intervals.iter().zip(&self.offsets) {
            let end = off + iv.length();
            let a = max(lo, off);
            let b = min(hi, &end);
            if a < b {
                out.push(Interval {
                    lo: &iv.lo + (a - off),
                    hi: &iv.lo + (b - off),
                });
            }
        }
        Ok(Piece::normalize(out))
    }

    /// Per-interval `(frame_start, cake_interval)` pairs.
    pub fn segments(&self) -> impl Iterator<Item = (&Rational, &Interval)> {
        self.offsets.iter().zip(self.residue.intervals.iter())
    }
}
