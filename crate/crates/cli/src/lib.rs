//! Pieces of the `blindroom` command line that are worth testing on their
//! own: PSBT file loading, the session command language, and exit codes.

pub mod command;
pub mod exit;
pub mod input;
pub mod session;

pub use command::{parse_command, Command};
pub use exit::CliError;
pub use input::load_psbt;
