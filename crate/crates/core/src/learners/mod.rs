//! Tabular Q-learning, the chain oracle, and a small DQN.

mod dqn;
mod mlp;
mod model_file;
mod oracle;
mod replay;
mod tabular;

pub use dqn::{dqn_loss, dqn_loss_and_gradient, dqn_train_step, DqnAgent, DqnSettings, TargetNetwork};
pub use mlp::{Activation, Dense, Gradients, Mlp, Optimizer, OptimizerKind, Workspace};
pub use model_file::{QModel, MODEL_MAGIC};
pub use oracle::{chain_bellman_residual, value_iteration_oracle};
pub use replay::{ReplayBuffer, VecTransition};
pub use tabular::{squared_error, QTable, Transition};
