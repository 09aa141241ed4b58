//! Four-agent bounded envy-free cake cutting over an exact Robertson-Webb
//! query oracle, plus the audits and campaign harness that check every run.
//!
//! The cake is `[0, 1]`; coordinates and values are exact rationals. Protocol
//! code sees valuations only through [`oracle::Oracle`], which bills each cut
//! and each evaluation an agent could not infer. [`analysis`] reads the
//! valuations directly and re-derives every guarantee after the fact.

pub mod analysis;
pub mod geometry;
pub mod harness;
pub mod oracle;
pub mod protocols;
pub mod rational;
pub mod valuation;

pub use geometry::{Interval, Piece, ResidueFrame};
pub use oracle::{Agent, Oracle, QueryLedger};
pub use protocols::{main_protocol, RunOutcome};
pub use rational::Rational;
pub use valuation::{Instance, Valuation, AGENTS};
