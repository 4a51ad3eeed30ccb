//! Self-contained quadruped simulator: heightfield terrain, penalty contact
//! and a floating-base rigid body with low-inertia legs.

mod contact;
mod engine;
mod terrain;

pub use contact::{contact_force, ContactParams, FootContact};
pub use engine::{
    base_box_collides, rollout_pd, step, PdParams, RolloutStep, SimError, SimParams, SimState,
    StepOutput, GRAVITY,
};
pub use terrain::{generate_terrain, Obstacle, Terrain, TerrainError, TerrainParams};
