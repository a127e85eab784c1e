//! Predictive two-level tree keyboard engine.
//!
//! The keyboard shows ten commands. At level 1, nine of them hold groups of
//! eight characters and command 6 is DELETE; choosing a group moves to level
//! 2, where the eight characters are split around GO BACK (5) and DELETE (6).
//! A fixed-order character context model ([`ppm::PredModel`]) reorders the
//! level-1 groups so the likeliest next characters come first.
//!
//! - [`charset`], [`corpus`]: the 72-symbol alphabet and text normalization
//! - [`ppm`]: the context model, its training and model files
//! - [`layout`]: level-1 and level-2 layouts
//! - [`session`]: the typing state machine and transcripts
//! - [`simulator`]: optimal-user simulation and benchmarks
//! - [`metrics`]: speed and information transfer rate
//! - [`gateway`]: HTTP session service

pub mod charset;
pub mod corpus;
pub mod gateway;
pub mod layout;
pub mod metrics;
pub mod ppm;
pub mod session;
pub mod simulator;

pub use charset::CharacterSet;
pub use corpus::{normalize, Corpus};
pub use layout::{level1_layout, level2_layout, next_layout, CommandId, CommandLabel, Layout, Level};
pub use metrics::{itr, report_from_log, MetricsReport};
pub use ppm::PredModel;
pub use session::{SessionEvent, TypingSession};
