//! Fast 3D transposed convolution.
//!
//! The crate is organized bottom-up:
//!
//! * [`tensor`]: dense 3D containers, mode products, pad/crop, element-wise ops
//! * [`io`]: the `F3DT` binary tensor format
//! * [`oracle`]: brute-force zero-insertion and scatter reference
//!   implementations, plus the deconvolution geometry
//! * [`transform`]: transform sets and the single-tile kernel
//! * [`engine`]: tiled, weight-stationary full-layer execution in floating
//!   point and in 16/8-bit integers
//! * [`perf`]: exact complexity figures and an accelerator throughput model

pub mod engine;
pub mod error;
pub mod io;
pub mod oracle;
pub mod perf;
pub mod tensor;
pub mod transform;

pub use engine::{
    count_multiplies, deconv3d_f3dc, deconv3d_f3dc_quant, plan_tiles, EngineStats, F3dcEngine, LayerSpec,
    MultiplyCount, QuantSpec, QuantStats, TilePlan,
};
pub use error::{F3dcError, Result};
pub use io::RawTensor;
pub use oracle::{conv_out_size, deconv3d_iom, deconv3d_zim, zim_plan, DeconvGeometry, WeightBank, ZimPlan};
pub use perf::{mu, speedup_vs_zim, table1, throughput_model, ComplexityRow, HardwareConfig, OpConvention, ThroughputReport};
pub use tensor::{add_assign, crop3, ewmul, mode_product, pad3, ChannelVolume, DType, Matrix2, Scalar, Tensor3};
pub use transform::{
    builtin_t3_k4_s2, f3dc_tile, inverse_transform, transform_input, transform_kernel, Domain, TransformSet,
    TransformedTile,
};
