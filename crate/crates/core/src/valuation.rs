//! Piecewise-constant valuations and exact cut / evaluation queries.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Piece, ResidueFrame};
use crate::rational::{self, one, zero, Rational};

pub const AGENTS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValuationError {
    #[error("breakpoints must start at 0, end at 1 and strictly increase")]
    BadBreakpoints,
    #[error("expected {expected} densities, got {got}")]
    DensityCount { expected: usize, got: usize },
    #[error("density {0} is negative")]
    NegativeDensity(Rational),
    #[error("total mass is {0}, not 1")]
    NotNormalized(Rational),
    #[error("requested value {requested} exceeds the {available} available")]
    ValueExceeded {
        requested: Rational,
        available: Rational,
    },
    #[error("requested value {0} is negative")]
    NegativeValue(Rational),
    #[error("coordinate {0} outside the supported range")]
    OutOfRange(Rational),
    #[error("instance must have exactly {AGENTS} agents, got {0}")]
    AgentCount(usize),
    #[error(transparent)]
    Parse(#[from] rational::ParseRationalError),
}

/// Step function on `[0, length]`: `densities[k]` holds on `[knots[k], knots[k+1]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepDensity {
    knots: Vec<Rational>,
    densities: Vec<Rational>,
}

impl StepDensity {
    fn segments(&self) -> impl DoubleEndedIterator<Item = (&Rational, &Rational, &Rational)> {
        self.knots
            .windows(2)
            .zip(&self.densities)
            .map(|(w, d)| (&w[0], &w[1], d))
    }

    pub fn length(&self) -> Rational {
        self.knots.last().cloned().unwrap_or_else(zero)
    }

    /// Mass of `[a, b]`; `a ≤ b` assumed.
    pub fn mass(&self, a: &Rational, b: &Rational) -> Rational {
        let mut acc = zero();
        for (lo, hi, d) in self.segments() {
            let s = if a > lo { a } else { lo };
            let e = if b < hi { b } else { hi };
            if s < e && !d.is_zero() {
                acc += d * (e - s);
            }
        }
        acc
    }

    /// Smallest `y ≥ from` with `mass(from, y) = r`.
    pub fn reach_forward(&self, from: &Rational, r: &Rational) -> Result<Rational, ValuationError> {
        self.check_point(from)?;
        if r.is_negative() {
            return Err(ValuationError::NegativeValue(r.clone()));
        }
        let mut pos = from.clone();
        let mut rem = r.clone();
        for (lo, hi, d) in self.segments() {
            if rem.is_zero() {
                return Ok(pos);
            }
            if *hi <= pos {
                continue;
            }
            let start = if pos > *lo { pos.clone() } else { lo.clone() };
            let m = d * (hi - &start);
            if d.is_positive() && m >= rem {
                return Ok(start + &rem / d);
            }
            rem -= m;
            pos = hi.clone();
        }
        if rem.is_zero() {
            Ok(pos)
        } else {
            Err(ValuationError::ValueExceeded {
                requested: r.clone(),
                available: self.mass(from, &self.length()),
            })
        }
    }

    /// Largest `m` in `[lo, hi]` with `mass(m, hi) = r`.
    pub fn reach_backward(
        &self,
        lo: &Rational,
        hi: &Rational,
        r: &Rational,
    ) -> Result<Rational, ValuationError> {
        self.check_point(lo)?;
        self.check_point(hi)?;
        if r.is_negative() {
            return Err(ValuationError::NegativeValue(r.clone()));
        }
        let mut pos = hi.clone();
        let mut rem = r.clone();
        for (slo, shi, d) in self.segments().rev() {
            if rem.is_zero() {
                return Ok(pos);
            }
            if *slo >= pos {
                continue;
            }
            if *shi <= *lo {
                break;
            }
            let end = if *shi < pos { shi.clone() } else { pos.clone() };
            let floor = if slo > lo { slo } else { lo };
            let m = d * (&end - floor);
            if d.is_positive() && m >= rem {
                return Ok(end - &rem / d);
            }
            rem -= m;
            pos = floor.clone();
        }
        if rem.is_zero() {
            Ok(pos)
        } else {
            Err(ValuationError::ValueExceeded {
                requested: r.clone(),
                available: self.mass(lo, hi),
            })
        }
    }

    fn check_point(&self, x: &Rational) -> Result<(), ValuationError> {
        if x.is_negative() || *x > self.length() {
            return Err(ValuationError::OutOfRange(x.clone()));
        }
        Ok(())
    }
}

/// An agent's valuation: a normalized, nonnegative piecewise-constant density
/// on the cake.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Valuation {
    density: StepDensity,
}

impl Valuation {
    pub fn new(breakpoints: Vec<Rational>, densities: Vec<Rational>) -> Result<Self, ValuationError> {
        if breakpoints.len() < 2
            || !breakpoints[0].is_zero()
            || *breakpoints.last().unwrap() != one()
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(ValuationError::BadBreakpoints);
        }
        if densities.len() != breakpoints.len() - 1 {
            return Err(ValuationError::DensityCount {
                expected: breakpoints.len() - 1,
                got: densities.len(),
            });
        }
        if let Some(d) = densities.iter().find(|d| d.is_negative()) {
            return Err(ValuationError::NegativeDensity(d.clone()));
        }
        let density = StepDensity {
            knots: breakpoints,
            densities,
        };
        let total = density.mass(&zero(), &one());
        if total != one() {
            return Err(ValuationError::NotNormalized(total));
        }
        Ok(Valuation { density })
    }

    /// Density 1 everywhere.
    pub fn uniform() -> Self {
        Valuation::new(vec![zero(), one()], vec![one()]).expect("uniform is normalized")
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.density.knots
    }

    pub fn densities(&self) -> &[Rational] {
        &self.density.densities
    }

    pub fn eval_interval(&self, lo: &Rational, hi: &Rational) -> Rational {
        if lo >= hi {
            return zero();
        }
        self.density.mass(lo, hi)
    }

    pub fn eval_piece(&self, piece: &Piece) -> Rational {
        piece
            .intervals()
            .iter()
            .fold(zero(), |acc, iv| acc + self.eval_interval(iv.lo(), iv.hi()))
    }

    /// Robertson-Webb cut query: smallest `y` with `v([x, y]) = r`.
    pub fn cut_query(&self, x: &Rational, r: &Rational) -> Result<Rational, ValuationError> {
        self.density.reach_forward(x, r)
    }

    /// This valuation seen through a residue frame.
    pub fn framed(&self, frame: &ResidueFrame) -> StepDensity {
        let mut knots = vec![zero()];
        let mut densities = Vec::new();
        for (off, iv) in frame.segments() {
            for (lo, hi, d) in self.density.segments() {
                let a = if lo > iv.lo() { lo } else { iv.lo() };
                let b = if hi < iv.hi() { hi } else { iv.hi() };
                if a < b {
                    knots.push(off + (b - iv.lo()));
                    densities.push(d.clone());
                }
            }
        }
        StepDensity { knots, densities }
    }

    /// Places a mark inside the frame span `[lo, hi]` so that the partial piece
    /// from the mark to `hi` is worth exactly `r`. Among all such marks the
    /// rightmost one is returned.
    pub fn right_cut(
        &self,
        frame: &ResidueFrame,
        span: (&Rational, &Rational),
        r: &Rational,
    ) -> Result<Rational, ValuationError> {
        self.framed(frame).reach_backward(span.0, span.1, r)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct AgentSpec {
    #[serde(with = "rational::serde_compact_vec")]
    pub breakpoints: Vec<Rational>,
    #[serde(with = "rational::serde_compact_vec")]
    pub densities: Vec<Rational>,
}

impl From<&Valuation> for AgentSpec {
    fn from(v: &Valuation) -> Self {
        AgentSpec {
            breakpoints: v.breakpoints().to_vec(),
            densities: v.densities().to_vec(),
        }
    }
}

/// On-disk instance: `{ "agents": [ {breakpoints, densities} ×4 ] }`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct InstanceFile {
    pub agents: Vec<AgentSpec>,
}

/// Four validated valuations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub valuations: [Valuation; AGENTS],
}

impl Instance {
    pub fn new(valuations: [Valuation; AGENTS]) -> Self {
        Instance { valuations }
    }

    pub fn from_file(file: &InstanceFile) -> Result<Self, ValuationError> {
        if file.agents.len() != AGENTS {
            return Err(ValuationError::AgentCount(file.agents.len()));
        }
        let vals = file
            .agents
            .iter()
            .map(|a| Valuation::new(a.breakpoints.clone(), a.densities.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Instance {
            valuations: vals.try_into().expect("length checked"),
        })
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            agents: self.valuations.iter().map(AgentSpec::from).collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceLoadError> {
        let file: InstanceFile = serde_json::from_str(text)?;
        Ok(Instance::from_file(&file)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("instance serializes")
    }
}

#[derive(Debug, Error)]
pub enum InstanceLoadError {
    #[error("malformed instance JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid valuation: {0}")]
    Valuation(#[from] ValuationError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn step(bps: &[(i64, i64)], ds: &[(i64, i64)]) -> Valuation {
        Valuation::new(
            bps.iter().map(|&(n, d)| ratio(n, d)).collect(),
            ds.iter().map(|&(n, d)| ratio(n, d)).collect(),
        )
        .unwrap()
    }

    fn left_heavy() -> Valuation {
        step(&[(0, 1), (1, 2), (1, 1)], &[(2, 1), (0, 1)])
    }

    fn right_heavy() -> Valuation {
        step(&[(0, 1), (1, 2), (1, 1)], &[(0, 1), (2, 1)])
    }

    #[test]
    fn eval_examples() {
        let u = Valuation::uniform();
        assert_eq!(
            u.eval_piece(&Piece::interval(ratio(1, 4), ratio(1, 2)).unwrap()),
            ratio(1, 4)
        );
        assert_eq!(
            left_heavy().eval_piece(&Piece::interval(ratio(1, 4), ratio(3, 4)).unwrap()),
            ratio(1, 2)
        );
        assert_eq!(right_heavy().eval_piece(&Piece::empty()), int(0));
        assert_eq!(right_heavy().eval_piece(&Piece::full()), int(1));
    }

    #[test]
    fn cut_examples() {
        assert_eq!(
            Valuation::uniform().cut_query(&int(0), &ratio(1, 2)).unwrap(),
            ratio(1, 2)
        );
        assert_eq!(
            left_heavy().cut_query(&int(0), &ratio(1, 2)).unwrap(),
            ratio(1, 4)
        );
    }

    #[test]
    fn cut_skips_leading_zero_density() {
        // Oracle: v([0, 5/8]) = 2 * (5/8 - 1/2) = 1/4, and every breakpoint
        // left of 5/8 carries strictly less mass.
        let v = right_heavy();
        let y = v.cut_query(&int(0), &ratio(1, 4)).unwrap();
        assert_eq!(y, ratio(5, 8));
        assert_eq!(v.eval_interval(&int(0), &ratio(5, 8)), ratio(1, 4));
        for bp in v.breakpoints().iter().filter(|b| **b < y) {
            assert!(v.eval_interval(&int(0), bp) < ratio(1, 4));
        }
    }

    #[test]
    fn cut_of_zero_is_the_start() {
        assert_eq!(right_heavy().cut_query(&ratio(1, 8), &int(0)).unwrap(), ratio(1, 8));
    }

    #[test]
    fn cut_beyond_remaining_value_is_a_contract_error() {
        let err = left_heavy().cut_query(&ratio(1, 4), &ratio(3, 4)).unwrap_err();
        assert!(matches!(err, ValuationError::ValueExceeded { .. }));
        assert!(matches!(
            left_heavy().cut_query(&int(0), &int(-1)),
            Err(ValuationError::NegativeValue(_))
        ));
    }

    #[test]
    fn right_cut_examples() {
        let identity = ResidueFrame::new(Piece::full());
        let u = Valuation::uniform();
        assert_eq!(
            u.right_cut(&identity, (&int(0), &ratio(1, 4)), &ratio(1, 8)).unwrap(),
            ratio(1, 8)
        );
        assert_eq!(
            u.right_cut(&identity, (&int(0), &ratio(1, 4)), &ratio(1, 4)).unwrap(),
            int(0)
        );
        let spike = step(&[(0, 1), (1, 4), (1, 2), (1, 1)], &[(0, 1), (4, 1), (0, 1)]);
        let m = spike
            .right_cut(&identity, (&ratio(1, 4), &ratio(1, 2)), &ratio(1, 2))
            .unwrap();
        assert_eq!(m, ratio(3, 8));
        assert_eq!(spike.eval_interval(&ratio(3, 8), &ratio(1, 2)), ratio(1, 2));
    }

    #[test]
    fn right_cut_takes_the_rightmost_point_of_a_tie() {
        // zero density on [0, 1/2]: every mark there leaves the whole value on its right
        let identity = ResidueFrame::new(Piece::full());
        let right_heavy = Valuation::new(vec![int(0), ratio(1, 2), int(1)], vec![int(0), int(2)]).unwrap();
        let m = right_heavy
            .right_cut(&identity, (&int(0), &int(1)), &int(1))
            .unwrap();
        assert_eq!(m, ratio(1, 2));
        let m0 = left_heavy()
            .right_cut(&identity, (&int(0), &int(1)), &int(0))
            .unwrap();
        assert_eq!(m0, int(1));
    }

    #[test]
    fn right_cut_rejects_excess() {
        let identity = ResidueFrame::new(Piece::full());
        assert!(Valuation::uniform()
            .right_cut(&identity, (&int(0), &ratio(1, 4)), &ratio(1, 2))
            .is_err());
    }

    #[test]
    fn framed_density_follows_the_residue() {
        let residue = Piece::from_pairs([
            (int(0), ratio(1, 4)),
            (ratio(3, 4), int(1)),
        ])
        .unwrap();
        let frame = ResidueFrame::new(residue);
        let framed = right_heavy().framed(&frame);
        assert_eq!(framed.length(), ratio(1, 2));
        assert_eq!(framed.mass(&int(0), &ratio(1, 4)), int(0));
        assert_eq!(framed.mass(&ratio(1, 4), &ratio(1, 2)), ratio(1, 2));
    }

    #[test]
    fn loader_validates_normalization() {
        let ok = r#"{"agents":[
            {"breakpoints":["0","1"],"densities":["1"]},
            {"breakpoints":["0","1/2","1"],"densities":["2","0"]},
            {"breakpoints":["0","1/2","1"],"densities":["0","2"]},
            {"breakpoints":["0","1/4","1/2","1"],"densities":["0","4","0"]}]}"#;
        let inst = Instance::from_json(ok).unwrap();
        assert_eq!(inst.valuations[3].densities()[1], int(4));
        let bad = ok.replace(r#""densities":["2","0"]"#, r#""densities":["2","1"]"#);
        assert!(matches!(
            Instance::from_json(&bad),
            Err(InstanceLoadError::Valuation(ValuationError::NotNormalized(_)))
        ));
        let three = r#"{"agents":[{"breakpoints":["0","1"],"densities":["1"]}]}"#;
        assert!(Instance::from_json(three).is_err());
    }

    #[test]
    fn instance_json_round_trips() {
        let inst = Instance::new([
            Valuation::uniform(),
            left_heavy(),
            right_heavy(),
            Valuation::uniform(),
        ]);
        assert_eq!(Instance::from_json(&inst.to_json()).unwrap(), inst);
    }
}
