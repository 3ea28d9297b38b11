pub mod artifacts;
pub mod event_log;
pub mod mining;
pub mod par;
pub mod script;
pub mod synthetic;
pub mod table;
