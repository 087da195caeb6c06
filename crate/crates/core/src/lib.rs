//! Human-robot joint planning.
//!
//! Two planning modes share this crate:
//!
//! * **Uncertainty mitigation** — ground an instruction's targets
//!   ([`grounding`]), search paths under traversability hypotheses
//!   ([`search`]), fold them into a decision tree ([`tree`]) and ask the
//!   human the cheapest sequence of questions that settles the path
//!   ([`policy`]).
//! * **Intent-aware collaboration** — track a belief over the task the human
//!   is heading to ([`intent`]) and pick complementary robot targets
//!   ([`coordination`]).
//!
//! [`sim`] replays both modes against scripted humans and reports metrics;
//! [`session`] hosts them live over newline-delimited JSON.

pub mod brute_force;
pub mod cli;
pub mod coordination;
pub mod grounding;
pub mod intent;
pub mod policy;
pub mod search;
pub mod session;
pub mod sim;
pub mod tree;
pub mod world;
