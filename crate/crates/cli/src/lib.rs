//! Command-line driver: fitting staged trees from CSV, simulating from
//! random staged trees and summarizing fitted runs.
//!
//! Every run is reproducible from its `config.toml`: the data, the config
//! and the seed determine every output byte except the manifest timestamp.

pub mod config;
pub mod fit;
pub mod report;
pub mod simulate;

use sha2::{Digest, Sha256};

pub use config::{RunConfig, SimulateConfig};
pub use fit::cmd_fit;
pub use report::cmd_report;
pub use simulate::cmd_simulate;

pub const MANIFEST_SCHEMA: &str = "stagedtrees.manifest/v1";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Process exit code: 2 for invalid input, 3 for I/O, 4 for numerical
/// failure, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<stagedtrees::Error>() {
            use stagedtrees::Error as E;
            return match e {
                e if e.is_io() => 3,
                E::Numeric(_) | E::NoSamples => 4,
                E::Json(j) if j.is_io() => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    1
}
