//! Recovery of missing terms in a modified Burgers equation.
//!
//! A stochastic generator samples candidate closure expressions from a small
//! expression language, a finite-difference solver evaluates each candidate a
//! posteriori, and a policy-gradient learner shifts probability toward
//! candidates with high accuracy-plus-simplicity reward.

pub mod dsl;
pub mod numerics;
pub mod environment;
pub mod policy;
pub mod trainer;
