//! Macro placement toolkit.
//!
//! The pipeline: load a netlist ([`netlist`]), derive macro groups and
//! standard-cell clusters ([`grouping`]), build a coarse grid over the canvas
//! with legality masks ([`canvas`]), score placements with proxy costs
//! ([`proxy`]), roll out sequential placement episodes ([`env`]), train a
//! policy with PPO ([`agent`]), and polish the result with simulated
//! annealing ([`refine`]).

pub mod agent;
pub mod canvas;
pub mod env;
pub mod geometry;
pub mod grouping;
pub mod netlist;
pub mod proxy;
pub mod refine;
