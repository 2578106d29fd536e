//! Exact enumeration, Gibbs sampling, importance-sampled partition
//! functions, and brute-force MAP decoding.

mod exact;
mod gibbs;
mod importance;
mod map;

pub use exact::{enumerate_exact, ExactDistribution, DEFAULT_ENUMERATION_LIMIT};
pub use gibbs::{gibbs_chain, gibbs_step, replacement_probability, GibbsChain, GibbsConfig};
pub use importance::{estimate_log_partition, BernoulliProposal, PartitionEstimate};
pub use map::{map_inventory, DEFAULT_MAP_BUDGET};

use std::io::Write;

use crate::corpus::VowelTable;
use crate::error::Result;
use crate::vowelset::VowelSet;

/// Dump sampled sets as JSON-lines of symbol lists.
pub fn write_samples<W: Write>(table: &VowelTable, samples: &[VowelSet], mut w: W) -> Result<()> {
    for s in samples {
        serde_json::to_writer(&mut w, &table.symbols_of(*s))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
