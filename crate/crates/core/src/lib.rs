pub mod agents;
pub mod experiments;
pub mod game_core;
pub mod gamelog;
pub mod orchestrator;
pub mod response_parser;
pub mod scripts;
