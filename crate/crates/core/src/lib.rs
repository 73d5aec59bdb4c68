//! Combined algorithm selection and hyperparameter optimization.

pub mod baselines;
pub mod dataspace;
pub mod evaluator;
pub mod learners;
pub mod paramspace;
pub mod runner;
pub mod smac;
pub mod smbo;
pub mod synthetic;
pub mod tpe;
