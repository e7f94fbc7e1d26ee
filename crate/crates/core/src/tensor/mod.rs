//! Dense tensor algebra over `R^d`: outer powers, symmetrisation, unfolding to
//! matrices and back, blockwise operator application, and the small symmetric
//! spectral kernels used by recovery.

mod dense;
mod matrix;

pub use dense::{
    blockwise_apply, fold, outer_power, outer_product, symmetrize, unfold, BlockMap, DenseTensor,
    SymTensor,
};
pub(crate) use dense::{canonical_map, index_counts, reshape_rows_first};
pub(crate) use matrix::right_singular_system;
pub use matrix::{
    numerical_rank, psd_sqrt_pinv, singular_values, sym_eig, EigenDecomposition, MatOperator,
};
