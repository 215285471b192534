//! Markov chain random field simulation.

pub mod cpd;
pub mod neighborhood;
pub mod simulate;

pub use cpd::{
    class_for_uniform, cpd_forms, draw_class, local_cpd, local_cpd_into, ConditionalDistribution, ConstantTransitions,
    TransitionSource,
};
pub use neighborhood::{find_neighbors, find_neighbors_exhaustive, quadrant, KnownGrid, Neighbor, Neighborhood};
pub use simulate::{
    conditioning_labels, config_digest, realization_seed, simulate_ensemble, simulate_realization, Ensemble,
    EnsembleOptions, RealizationLog, SimulationTarget, TransitionTable,
};
