//! Command-line pipeline and local fit service.

pub mod commands;
pub mod demo;
pub mod service;
