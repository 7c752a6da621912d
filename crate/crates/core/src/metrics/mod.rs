//! Loss accounting, regret against the Hedge bound, the exact small-instance
//! oracle and CSV output.

pub mod agreement;
pub mod log;
pub mod oracle;
pub mod regret;
pub mod report;

pub use log::{MetricsLog, RoundRow, ScreeningOutcome, ScreeningRecord, TxStatus};
pub use oracle::{exact_expected_loss, OracleInstance, OracleResult};
pub use regret::{compute_regret, epoch_regret, scaling_fit, hedge_bound, RegretReport};
pub use report::{emit_csv, write_csv_files};
