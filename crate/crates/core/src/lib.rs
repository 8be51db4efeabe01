//! Simulation and analysis of LLM-generated replies in political discussion
//! threads: corpus reconstruction, prompt scenarios, a cached model gateway,
//! label aggregation, text statistics, embedding geometry and a detector.

pub mod classify;
pub mod cli;
pub mod corpus;
pub mod detector;
pub mod embedspace;
pub mod gateway;
pub mod io;
pub mod scenario;
pub mod seed;
pub mod textstats;
