//! Core of a planner-driven multi-agent desktop assistant.
//!
//! Six agent roles exchange keyed JSON messages under an emit/receive
//! policy. An orchestrator runs the plan, execute, review loop against an
//! [`env::Environment`], which is either the fixture-driven simulated
//! desktop in [`simenv`] or a headless code runner. Model access goes
//! through [`backend::CompletionBackend`]; scripted and replay backends make
//! every episode deterministic.
//!
//! The crate is `no_std` with `alloc`. Process execution, HTTP and file
//! formats live in the companion `mmac` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod action;
pub mod agents;
pub mod backend;
pub mod codex;
pub mod env;
pub mod orchestrator;
pub mod plan;
pub mod protocol;
pub mod scoring;
pub mod simenv;
