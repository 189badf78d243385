//! Regional gene expression against propagation maps: nonnegative LASSO with
//! bootstrap selection frequencies.

mod bootstrap;
mod expression;
mod lasso;
mod targets;

pub use bootstrap::{bootstrap_selection, default_lambda_grid, BootstrapOptions, SelectionProfile};
pub use expression::ExpressionMatrix;
pub use lasso::{nn_lasso, nn_lasso_path, LassoFit, Standardized};
pub use targets::{dominance_target, neglog10p_target};
