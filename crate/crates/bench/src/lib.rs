pub use coordsched_core as core;
