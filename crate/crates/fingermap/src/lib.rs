//! File formats, replay, reporting and the streaming session endpoint for
//! the `fingermap-core` retargeting engine.

pub mod cli;
pub mod commands;
pub mod service;
pub mod trace_io;
