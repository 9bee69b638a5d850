//! Analysis of planar vector fields `dz/dt = f(z)` where `f` is a complex
//! polynomial, the reciprocal of one, the conjugate of one, or a Moebius map.
//!
//! The crate classifies finite and infinite equilibria, computes conformal
//! normal forms and first integrals, traces trajectories and separatrices on
//! the Poincare disk, and matches the resulting topological signature against
//! the built-in portrait catalogs.

pub mod bivar;
pub mod cpoly;
pub mod error;
pub mod field;
pub mod flow;
pub mod infinity;
pub mod integrals;
pub mod local;
pub mod parse;
pub mod portrait;

pub use bivar::BivarPoly;
pub use cpoly::{CPoly, HarmonicPair, PfTerm, Root, RootSet};
pub use error::{
    FieldError, FlowError, InfinityError, IntegralError, LocalError, ParseError, PolyError,
    PortraitError,
};
pub use field::{Field, PlanarExpansion};
pub use flow::{
    LevelCurve, LevelEnd, LimitDescriptor, Separatrix, SeparatrixOrigin, Terminal, Trajectory,
};
pub use infinity::{ChartId, ChartSystem, InfKind, InfinityModel, InfinityPoint};
pub use integrals::{FirstIntegral, PotentialPair};
pub use local::{EqKind, Equilibrium, LyapunovReport, NormalForm};
pub use parse::parse_field;

pub use num_complex::Complex64;
