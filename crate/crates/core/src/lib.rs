pub mod baselines;
pub mod discovery;
pub mod error;
pub mod gbdt;
pub mod geometry;
pub mod harness;
pub mod lazy;
pub mod ppo;
pub mod rc_mdp;
pub mod seeding;
pub mod sim;
pub mod skills;

pub use error::{Error, Result};
