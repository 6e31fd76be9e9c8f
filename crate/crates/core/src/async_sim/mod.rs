//! Deterministic simulation of asynchronous coordinate descent.

pub mod checks;
pub mod lower_bound;
pub mod schedule;
pub mod scv;
pub mod sim;

pub use checks::{check_progress_lemmas, LemmaReport};
pub use lower_bound::{lower_bound_instance, stall_demo, StallReport};
pub use schedule::{
    commit_order_coord_counts, generate_schedule, interference_report, scc_order, InterferenceReport,
    Schedule, ScheduledUpdate, SpanModel,
};
pub use scv::{scv_error_bound_check, ScvReport};
pub use sim::{adversarial_policy, run_async_sim, AsyncTrace, DelayPolicy};
