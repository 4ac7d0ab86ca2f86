//! Exact jet engine for conformal hypersurface invariants: curvature of metric jets,
//! the singular Yamabe expansion and its obstruction density, tractor calculus and
//! higher fundamental forms.

pub mod error;
pub mod forms;
pub mod geometry;
pub mod hypersurface;
pub mod jet;
pub mod samples;
pub mod scalar;
pub mod tensor;
pub mod tractor;
pub mod willmore;
pub mod yamabe;

pub use error::{EngineError, Result};
pub use forms::{fourth_form, fundamental_form, higher_form_leading, third_form, FundamentalForm};
pub use geometry::{christoffel, covariant_derivative, curvature_pack, riemann, CurvaturePack, MetricJet};
pub use hypersurface::{conormal_data, tracefree_ii, HypersurfaceFrame};
pub use jet::{divmod, exact_div, restrict, transverse_order, DivMod, Jet, Layout, ProductSum, TransverseOrder};
pub use scalar::{Dual, Float, ParseRationalError, Rational, Scalar};
pub use tensor::{Slot, Symmetry, TensorJet};
pub use tractor::{tractor_pair, TractorBundle};
pub use willmore::{willmore_invariant, NamedCheck, WillmoreReport};
pub use yamabe::{i_squared, solve_singular_yamabe, SolverOptions, UpdateBasis, YamabeSolution};
