mod attention;
mod conv;
mod dense;
mod elementwise;
mod loss;
mod norm;
mod pool;

pub use attention::{entropy_reduce, global_avg_pool, scale_channels, softmax_spatial, ENTROPY_CLAMP};
pub use conv::{conv1d, same_padding};
pub use dense::dense;
pub use elementwise::{add, mul_scalar, relu, reshape, sigmoid, sum, weighted_sum};
pub use loss::softmax_cross_entropy;
pub use norm::{batchnorm_infer, batchnorm_train, BatchNormOutput};
pub use pool::maxpool1d;
