use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the position-pair posterior ω is seeded before the first E-step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// ω from one M-step over the random λ.
    Flat,
    /// ω favours assortative pairs: I/K + α on the diagonal, α elsewhere.
    Comm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    /// Training labels enter the E-step and η is optimised every iteration.
    Supervised,
    /// Positions are inferred from the links alone; η is fitted once afterwards.
    Unsupervised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Maximum number of positions K.
    pub positions: usize,
    /// Dirichlet concentration for the position-pair distribution.
    pub alpha: f64,
    /// Dirichlet concentration for each position's node distribution; `None` means 1/C.
    pub beta: Option<f64>,
    pub init_mode: InitMode,
    /// Symmetric Dirichlet concentration for the random λ draws. Values well
    /// above 1 start every interaction near uniform over position pairs, which
    /// leaves the labels to break the symmetry. `None` means 100 for
    /// supervised fits and 1 for unsupervised ones.
    pub init_lambda_concentration: Option<f64>,
    /// Initial η is uniform on ±this.
    pub init_eta_scale: f64,
    pub mode: FitMode,
    pub max_iterations: usize,
    pub free_energy_rel_tol: f64,
    pub cg_max_steps: usize,
    pub cg_grad_tol: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(positions: usize) -> Self {
        Self {
            positions,
            alpha: 2.0,
            beta: None,
            init_mode: InitMode::Flat,
            init_lambda_concentration: None,
            init_eta_scale: 5.0,
            mode: FitMode::Supervised,
            max_iterations: 200,
            free_energy_rel_tol: 1e-6,
            cg_max_steps: 50,
            cg_grad_tol: 1e-5,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_mode(mut self, mode: FitMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_init(mut self, init_mode: InitMode) -> Self {
        self.init_mode = init_mode;
        self
    }

    pub fn beta_for(&self, classes: usize) -> f64 {
        self.beta.unwrap_or(1.0 / classes as f64)
    }

    pub fn lambda_concentration(&self) -> f64 {
        self.init_lambda_concentration.unwrap_or(match self.mode {
            FitMode::Supervised => 100.0,
            FitMode::Unsupervised => 1.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        if self.positions == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        positive("alpha", self.alpha)?;
        if let Some(beta) = self.beta {
            positive("beta", beta)?;
        }
        if let Some(conc) = self.init_lambda_concentration {
            positive("initial λ concentration", conc)?;
        }
        positive("initial η scale", self.init_eta_scale)?;
        positive("free-energy tolerance", self.free_energy_rel_tol)?;
        positive("CG gradient tolerance", self.cg_grad_tol)?;
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be positive"));
        }
        if self.cg_max_steps == 0 {
            return Err(Error::invalid("cg_max_steps must be positive"));
        }
        Ok(())
    }
}
