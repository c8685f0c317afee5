//! Dense tensors and the reverse-mode tape the models are built on.

mod dense;
pub mod gradcheck;
mod sparse;
mod tape;

pub use dense::Tensor;
pub use gradcheck::{check_gradients, GradCheckReport};
pub use sparse::{EdgeIndex, SparseAdj};
pub use tape::{check_rate, softmax_segments, Mode, Tape, Var};
