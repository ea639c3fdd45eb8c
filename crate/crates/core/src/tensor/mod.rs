//! Dense and block-sparse complex tensors, truncated SVD and Krylov methods.

pub mod block;
pub mod dense;
pub mod krylov;
pub mod linalg;

pub use block::{BlockMat, BlockTensor, Layout, Sectors};
pub use dense::{contract, truncated_svd, ComplexTensor, SvdResult};
pub use krylov::{expm_apply, krylov_expm_apply, lanczos_ground, EigenPair, KrylovOptions, LanczosOptions};
pub use linalg::Mat;
