//! Mass regressors: MLP (primary), ridge and CART baselines, and initial-mass
//! reconstruction.

pub mod bundle;
pub mod encode;
pub mod mlp;
pub mod ridge;
mod shaped;
pub mod tree;

pub use bundle::{median, predict_initial_mass, ModelBundle, Regressor, RegressorKind, BUNDLE_VERSION};
pub use encode::{encode_features, FeatureEncoder, Standardizer, Vocabulary, N_CONTINUOUS};
pub use mlp::{max_gradient_error, mlp_train, mlp_train_encoded, Adam, EpochRecord, MlpConfig, MlpModel, Network, TrainingHistory};
pub use ridge::{ridge_fit, RidgeModel, RidgeRegressor};
pub use tree::{tree_fit, TreeConfig, TreeModel, TreeRegressor};
