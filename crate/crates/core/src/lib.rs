//! Countable direct sums `A = ⊕ A_n` of finite complex matrix blocks.
//!
//! The crate answers spectral, compactness, Schatten-class and
//! power/polynomial-boundedness questions about `A` from its blocks, and
//! cross-checks every answer against the dense block-diagonal assembly of
//! a finite truncation.

pub mod boundedness;
pub mod envelope;
pub mod family;
pub mod fixtures;
pub mod format;
pub mod interval;
pub mod kernel;
pub mod oracle;
pub mod polynomial;
pub mod schatten;
pub mod spectrum;

pub use boundedness::{
    poly_bound_block, poly_bound_family, power_bound_block, power_bound_family, BlockPolyBound,
    BlockPowerBound, BoundError, FamilyBound, PolyBoundReport, PolyOptions, PowerBoundReport,
    PowerOptions,
};
pub use envelope::{Envelope, EnvelopeError, Limit};
pub use family::{
    make_explicit, make_generator, BlockError, BlockFamily, BlockMatrix, EigenTrack, FamilyError,
    FamilyKind, MeasureSpec, TailCertificate, Truncation,
};
pub use fixtures::{make_fixture, AlphaSpec, FixtureError, FixtureName, FixtureParams, FixtureSpec};
pub use format::{parse_family, FamilyDescription, FormatError};
pub use interval::Interval;
pub use kernel::{EigenSet, KernelError, PowerNorms, ResolventNorm, SingularList};
pub use oracle::{assemble, oracle_check, OracleCheck, OracleError, OracleOptions, OracleReport};
pub use polynomial::{poly_sup_norm, Polynomial, PolynomialError};
pub use schatten::{
    compactness_verdict, merged_singular_values, schatten_decision, CompactnessVerdict,
    MergedSingular, SchattenDecision, SchattenError, SingularMerge,
};
pub use spectrum::{
    classify_point, minimal_support, point_spectrum, resolvent_sup, Completeness, PointClass,
    ResolventSup, SpectralPoint, SpectrumError, SpectrumOptions, SpectrumReport,
};
pub use num_complex::Complex64;
