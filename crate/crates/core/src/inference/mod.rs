//! Variational Bayesian EM for the supervised blockmodel.

mod config;
mod estep;
mod eta;
mod fit;
mod free_energy;
mod mstep;
mod state;

pub use config::{FitMode, InitMode, ModelConfig};
pub use estep::{compute_h, e_step};
pub use eta::{optimize_eta, EtaObjective, EtaUpdate};
pub use fit::{fit, fit_from_state, FitReport};
pub use free_energy::free_energy;
pub use mstep::m_step_counts;
pub use state::{h_direct, init_state, LogFactorCache, VariationalState};
