//! Continuous-space multi-agent pathfinding simulator.
//!
//! Agents, goals and obstacles are circles. Agents are driven either by 2D
//! forces (holonomic) or by linear/angular speed commands (differential
//! drive) and interact through a soft contact force. The crate also ships
//! map generators, RRT/RRT* baselines with a PD path follower, a batched
//! environment API and robust evaluation statistics.

pub mod bench;
pub mod bulk;
pub mod dynamics;
pub mod env;
pub mod eval;
pub mod geometry;
pub mod maps;
pub mod observation;
pub mod planners;
pub mod policies;
pub mod render;
pub mod reward;
pub mod rng;
pub mod stats;

pub use dynamics::{Action, AgentKinematics, DynamicsModel};
pub use geometry::{BoolGrid, Bounds, Circle, Vec2};
pub use rng::RngKey;
