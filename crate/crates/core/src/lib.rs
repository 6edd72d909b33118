pub mod catalog;
pub mod clustering;
pub mod dialogue;
pub mod executor;
pub mod intent;
pub mod metrics;
pub mod planner;
pub mod profiler;
pub mod session;
pub mod session_store;
pub mod storyteller;
pub mod tabular;
