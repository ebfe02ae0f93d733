//! Moderation analytics: community evolution measures, leakage-free
//! quarterly features, class-imbalance handling, interpretable classifiers
//! and the continuous-learning simulator.

pub mod corpus;
pub mod distance;
pub mod features;
pub mod impact;
pub mod models;
pub mod sampling;
pub mod synth;
pub mod time;
pub mod vectors;

pub use time::{MonthWindow, YearMonth};
