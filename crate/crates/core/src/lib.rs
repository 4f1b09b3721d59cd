//! Exact arithmetic on truncated power series over p-adic integer rings.

pub mod error;
pub mod exec;
pub mod lift_checker;
pub mod lubin_log;
pub mod lubin_tate;
pub mod modint;
pub mod newton;
pub mod norm_op;
pub mod padic;
pub mod series;
pub mod weights;

pub use error::{Error, Result};
pub use exec::Execution;
pub use padic::{FieldDesc, PadicElem, PadicField, Valuation};
pub use series::{PowerTable, ResidueSeries, TruncSeries};
