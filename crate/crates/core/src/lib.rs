//! Finite element solver for quasilinear elliptic and parabolic problems of
//! p-Laplace type with Neumann, Robin and Wentzell boundary conditions.
//!
//! Everything is generic over the scalar type; the `*64` aliases fix it to
//! `f64`.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity, clippy::needless_range_loop)]

pub mod coeffs;
pub mod diag;
pub mod error;
pub mod evolve;
pub mod expr;
pub mod fem;
pub mod geomap;
pub mod io;
pub mod mesh;
pub mod reference;
pub mod scalar;
pub mod solver;
pub mod sparse;

pub use coeffs::{
    check_monotone_pairwise, check_monotone_radial, check_structure, make_p_laplace, BoundaryPoint, BoundaryReaction, CoefficientSet, Flux,
    PLaplace, PLaplaceVariant, RadialFluxModel, Reaction, SampleGrid, StructureParams,
};
pub use diag::{hoelder_seminorm, ladder_norm_monitor, lq_norm, moser_ladder, refinement_study, HoelderEstimate, MoserLadder, Region};
pub use error::{Error, Result};
pub use evolve::{crandall_liggett_probe, evolve, linf_decay_check, semigroup_property_check, EvolutionConfig, EvolutionError, Trajectory};
pub use fem::{assemble_residual, assemble_tangent, DiscreteField, MassMode};
pub use geomap::{transform_coefficients, BiLipschitzMap};
pub use mesh::{BoundaryEdge, BoundarySelection, Mesh};
pub use scalar::{Point, Real};
pub use solver::{contraction_ratio, solve_elliptic, solve_resolvent, NormKind, ResolventProblem, SolveReport, SolverOptions, Strategy};
pub use sparse::SparseMatrix;

pub type Mesh64 = Mesh<f64>;
pub type CoefficientSet64 = CoefficientSet<f64>;
pub type DiscreteField64 = DiscreteField<f64>;
pub type ResolventProblem64 = ResolventProblem<f64>;
pub type EvolutionConfig64 = EvolutionConfig<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type BiLipschitzMap64 = BiLipschitzMap<f64>;
pub type SparseMatrix64 = SparseMatrix<f64>;
