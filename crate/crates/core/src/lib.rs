//! Mood-conditioned mobile-biometric identification pipeline.
//!
//! The crate covers the full path from raw smartphone telemetry to
//! identification experiments: flat-file ingest, hourly featurization with
//! one-hot set tokens and gps clustering, EMA mood labeling with hourly/daily
//! propagation, from-scratch random-forest and extra-trees learners, and a
//! sliding-window experiment harness with mood-conditioned sample regimes.
//! A seeded synthetic generator stands in for real study data.

pub mod featurize;
pub mod ingest;
pub mod learn;
pub mod mood;
pub mod seeding;
pub mod telemetry;
