pub mod baselines;
pub mod controller;
pub mod model;
pub mod netcore;
pub mod plant;
pub mod harness;
