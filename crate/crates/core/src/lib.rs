//! Max-stable monetary risk measures on finite metric spaces.
//!
//! The crate evaluates risk measures, builds their concentration functions and
//! maxitive integrals, derives minimal rate functions, and checks large
//! deviation and Laplace principles exactly on finite spaces and through
//! horizon envelopes on asymptotic families.
//!
//! Parallel maps go through [`par`]; disable the default `parallel` feature to
//! run everything on the calling thread.

pub mod ext;
pub mod families;
pub mod io;
pub mod ldp;
pub mod maxitive;
pub mod numeric;
pub mod par;
pub mod risk;
pub mod shortfall;
pub mod space;

pub use ext::{ExtReal, NegInf, PosInf};
pub use maxitive::{ConcentrationTable, MaxStablePenalty, RSchedule};
pub use par::Mode;
pub use risk::{CheckConfig, RiskError, RiskKind, RiskMeasure};
pub use space::{BoundedFunction, FiniteMetricSpace, ProbabilityVector, Subset};
