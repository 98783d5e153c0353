//! Estimation toolkit for panel event-severity data: a standard multinomial
//! logit baseline fit by maximum likelihood, a two-state Markov-switching
//! multinomial logit fit by Bayesian MCMC, and the surrounding machinery for
//! model comparison (harmonic-mean marginal likelihoods, Bayes factors),
//! goodness of fit (Monte Carlo Pearson chi-square), convergence diagnostics
//! (PSRF / MPSRF) and synthetic-data validation.

pub mod corr;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod mcmc;
pub mod mle;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod posterior;
pub mod selection;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
