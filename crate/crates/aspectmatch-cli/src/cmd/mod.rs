pub mod autoalign;
pub mod correlate;
pub mod evaluate;
pub mod pipeline;
