//! Scenario files, variant runs, benchmark tables and SVG export for the
//! bladecrawl planner.

pub mod harness;
pub mod scenario;
pub mod suite;
pub mod svg;
pub mod variant;
