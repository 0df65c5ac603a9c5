//! Interactive composition machines: concurrent composition, filters,
//! odometers, truncation, postprocessing and the universal mechanism.

mod composer;
mod postprocess;
mod truncation;
mod universal;

pub use composer::{
    concomp, decode_answer_list, encode_answer_list, filt_con_im, filt_nim,
    filter_as_truncated_odometer, odom_con_im, odom_nim, odometer_as_filter, ChildSlot, Composer,
    CompositionState, DEFAULT_COMPOSITION_COMM_BOUND,
};
pub use postprocess::{
    postprocess, Channel, ConstantPostprocessor, Direction, IdentityPostprocessor, Postprocessed,
    PostprocessedState, Postprocessor, QueryAction, TablePostprocessor, PIM_SCOPE,
};
pub use truncation::truncate_view;
pub use universal::{
    residual_budget, two_slot_filter_wrapper, universal_mechanism, TwoSlotFilterWrapper, Universal,
    UniversalState,
};
