//! Heavy-tailed renewal processes: increment laws, exact partial-sum
//! distributions, renewal-theorem diagnostics and Monte Carlo paths.

mod checks;
mod convolve;
mod law;
mod mc;
mod table;

pub use checks::{
    cesaro_deviation, nagaev_check, periodic_llt_profile, srt_profile, tied_down_functional, LltPoint, LltProfile,
    Reach, SrtPoint,
};
pub use convolve::{direct_truncated, truncated_power, ConvolutionMethod};
pub use law::{ContinuousLaw, LatticeLaw};
pub use mc::{mc_hit_frequencies, mc_tied_down_continuous};
pub use table::{
    convolution_power, convolution_power_with, ConvolutionTable, PowerRow, RowSweep, RowView, TiedSums,
    MAX_TABLE_ENTRIES, NEGLIGIBLE_ROW_MASS,
};
