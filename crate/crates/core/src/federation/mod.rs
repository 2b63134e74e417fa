//! The federated protocol, every algorithm arm and cost accounting.

mod algo;
mod ledger;
mod protocol;
mod setup;
mod training;

pub use algo::Algo;
pub use ledger::{compute_cost_ratio, CostLedger};
pub use protocol::{
    aggregate, client_update, selection_seed, sgd_seed, Broadcast, ClientPlan, ClientReport, ClientState, ServerState,
    Upload,
};
pub use setup::{load_dataset, prepare_data, FederatedData};
pub use training::{
    fine_tune_on_server, model_spec, run_round, run_training, sample_clients, Protocol, RefreshRecord, RoundOutcome,
    TrainingResult,
};
