//! Lane planning and semantic-graph ordering.

mod balance;
mod hamilton;

pub use balance::{balance_workloads, sync_partials, LanePlan, Partial, PlanRound, TaskRange};
pub use hamilton::{
    build_hypergraph, path_cost, random_order, shortest_hamilton_path, ExecutionOrder,
    SimilarityHypergraph, EXACT_LIMIT,
};
