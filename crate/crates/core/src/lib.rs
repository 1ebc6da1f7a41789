//! Function trees: additive-multiplicative models built from univariate
//! functions arranged in a tree, with fast partial dependence, partial
//! association and pure-interaction analysis of the fitted representation.

pub mod dataset;
pub mod error;
pub mod functree;
pub mod interactions;
pub mod pdengine;
pub mod smoothers;
pub mod stats;

pub use dataset::{Dataset, HuMode, LoadOptions, SplitSpec, VarKind, Variable};
pub use error::{Error, Result};
pub use functree::{fit, FitConfig, Fitter, FunctionTree, TreeNode};
pub use smoothers::{smooth, spline_fit, SmoothMethod, SmootherSpec, UnivariateFunction};
pub use interactions::{search_effects, EffectEntry, EffectReport, SearchOptions};
pub use pdengine::{EffectGrid, EffectKind, TreeDecomposition};
