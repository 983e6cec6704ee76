//! Command-line front end: scene files in, deterministic JSON reports out.

pub mod commands;
pub mod report;
pub mod scene;

pub use commands::{run, Command, CommandArgs, Outcome};
pub use scene::{parse_scene, print_scene, Decl, Scene};
