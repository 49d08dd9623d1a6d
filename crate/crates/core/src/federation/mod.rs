//! Simulated federation: clients with replay buffers and local dynamics
//! models, the server-side ensemble and student, fictitious rollouts, policy
//! synchronization and the client-heterogeneity measure Γ.

mod buffer;
mod client;
mod config;
mod fictitious;
mod server;
mod sync;

pub use buffer::{BufferEntry, ReplayBuffer};
pub use client::{client_local_update, client_sample, ClientState, LocalUpdate};
pub use config::{Aggregation, FedConfig, SampleCadence};
pub use fictitious::{generate_fictitious_data, FictitiousData, OracleModel};
pub use server::{distill_loss, distill_student, fed_en_learning, fedavg_aggregate, RoundReport, ServerState};
pub use sync::{estimate_gamma, gamma_formula, sync_count, sync_policies, GammaEstimate};
