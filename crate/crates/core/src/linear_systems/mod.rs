//! Linear control systems `x' = A(t) x + B(t) u`, `u in U_t`: transition
//! machinery, Kalman tests and the feedback/gauge transformations.

mod adjoint;
mod expm;
mod kalman;
mod record;
mod system;
mod taylor;
mod transform;

pub use adjoint::{adjoint_state, adjoint_transition, adjoint_transition_ode, state_transition, TransitionRequest};
pub use expm::{matrix_exponential, EXPM_NORM_BOUND};
pub use kalman::{controllability_matrix, kalman_check};
pub use record::{load_system, MatrixSpec, SystemRecord};
pub use system::{ControlSchedule, LinearSystem, LtiSystem, LtvSystem, MatrixFn};
pub use taylor::{finite_difference_taylor, TaylorData};
pub use transform::{apply_feedback, apply_gauge};
