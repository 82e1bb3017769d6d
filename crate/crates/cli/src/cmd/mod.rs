pub mod compare;
pub mod correlate;
pub mod cv;
pub mod importance;
pub mod score;
pub mod serve;
pub mod synth;
pub mod train;
