//! Narrow operators on finite dyadic models of `L_p`.
//!
//! Everything is generic over the scalar type ([`Scalar`], implemented for
//! `f32` and `f64`); the `*F64` aliases below are the usual entry points.

pub mod dyadic;
pub mod error;
pub mod factorization;
pub mod haar;
mod linalg;
pub mod narrowness;
pub mod operators;
pub mod scalar;
pub mod search;
pub mod signbuilder;
pub mod target;
pub mod uncond;

pub use dyadic::{is_sign, rademacher, AtomSet, DyadicSpace, Partition, SimpleFunction};
pub use error::{Error, Result};
pub use factorization::{
    check_lower_bound, corollary44_demo, factorize, haar_slices, haar_slicing, random_operator, random_rank_one_series, theorem33_experiment, theorem43_pipeline,
    FactorizationResult, HaarSlicing, LowerBoundReport, Theorem33Row, Theorem43Report,
};
pub use haar::{
    build_tree, classical_tree, expand, haar_norm, haar_system, natural_order, reconstruct, telescope, Coefficients,
    HaarLikeSystem, MultiIndex, SplitStrategy, SubsetTree,
};
pub use narrowness::{
    build_small_tree, epsilon_schedule, hpp_defect, sign_defect, sum_narrow_demo, EpsilonSchedule, PartitionSampler,
    SignMode, SignOptions, SignSearchResult, SmallTree,
};
pub use operators::{block_projection, counterexample_operator, op_norm, BlockProjection, FiniteOperator, Subspace};
pub use scalar::Scalar;
pub use search::SearchBudget;
pub use signbuilder::{bounded_sign, bounded_sign_with_m, complete_to_sign, lemma41_bound_check, BoundedSignResult, Completion};
pub use target::{Method, NormEstimate, NormedTarget};
pub use uncond::{
    burkholder_beta, make_y, rank1_series, uncond_constant, uncond_norm, BasicSequence, SeriesRep, TargetBasis,
};

pub type DyadicSpaceF64 = DyadicSpace<f64>;
pub type AtomSetF64 = AtomSet<f64>;
pub type SimpleFunctionF64 = SimpleFunction<f64>;
pub type PartitionF64 = Partition<f64>;
pub type SubsetTreeF64 = SubsetTree<f64>;
pub type HaarLikeSystemF64 = HaarLikeSystem<f64>;
pub type FiniteOperatorF64 = FiniteOperator<f64>;
pub type NormedTargetF64 = NormedTarget<f64>;
pub type NormEstimateF64 = NormEstimate<f64>;

pub type DyadicSpaceF32 = DyadicSpace<f32>;
pub type SimpleFunctionF32 = SimpleFunction<f32>;
pub type FiniteOperatorF32 = FiniteOperator<f32>;
