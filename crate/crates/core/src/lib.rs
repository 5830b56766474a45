//! Answer set programming engine for UAM detour management.

pub mod ground;
pub mod solve;
pub mod syntax;
pub mod uatm;
