//! Front ends for the uatm-asp engine: result formatting, the dialogue
//! session behind the REPL, and the HTTP service.

pub mod api;
pub mod dialogue;
pub mod format;

pub use dialogue::{repl_dispatch, Actor, DialogueTurn, Dispatch, Session};
pub use format::{format_result, RunInfo};
