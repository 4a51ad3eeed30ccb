//! Quadruped jump-and-land stack: kino-dynamic trajectory optimization over
//! centroidal dynamics, a rigid-body simulator with penalty contact and
//! procedural obstacle terrain, and a PPO motion-imitation trainer with a
//! landing-phase reward relaxation.

pub mod config;
pub mod eval;
pub mod io;
pub mod jump;
pub mod morphology;
pub mod nlp;
pub mod ppo;
pub mod reference;
pub mod rewards;
pub mod sim;

pub use morphology::RobotMorphology;

/// Gravitational acceleration, m/s^2, world frame.
pub const GRAVITY: [f64; 3] = [0.0, 0.0, -9.81];
