use crate::error::{Error, Result};
use crate::sim::config::{Knobs, Policy};

/// How checkpoint intervals and write rates are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CkptMode {
    /// Per-tick cube-root split on hazard upper bounds and bandwidth lower bounds.
    Adaptive,
    /// Same allocator on long-window point estimates.
    TvFixed,
    /// Fixed period to the building store at full write speed.
    Fixed(f64),
    /// Fixed period to local disk; nothing survives a departure except on
    /// the departed node itself.
    Local(f64),
}

/// Protocol switches behind a policy name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strategy {
    pub ckpt: CkptMode,
    /// Destination by score (P2) rather than uniformly at random.
    pub topo_aware: bool,
    /// Deadline admission and rate enforcement (P3) rather than fair sharing.
    pub shaped: bool,
    /// Jobs move at all; without it they wait for their node to return.
    pub migrate: bool,
}

impl Strategy {
    pub fn for_policy(policy: Policy, k: &Knobs) -> Result<Self> {
        let s = |ckpt, topo_aware, shaped| Strategy { ckpt, topo_aware, shaped, migrate: true };
        let naive = CkptMode::Fixed(k.naive_interval_s);
        Ok(match policy {
            Policy::Reclaimnet => s(CkptMode::Adaptive, true, true),
            Policy::StaticCkpt => s(CkptMode::Fixed(k.static_interval_s), false, false),
            Policy::TvFixed => s(CkptMode::TvFixed, true, true),
            Policy::RandomDst | Policy::P1P3 => s(CkptMode::Adaptive, false, true),
            Policy::NoTcbpf | Policy::P1P2 => s(CkptMode::Adaptive, true, false),
            Policy::NoMigration => Strategy {
                ckpt: CkptMode::Local(k.no_migration_interval_s),
                topo_aware: false,
                shaped: false,
                migrate: false,
            },
            Policy::AllOff => s(naive, false, false),
            Policy::P1Only => s(CkptMode::Adaptive, false, false),
            Policy::P2Only => s(naive, true, false),
            Policy::P3Only => s(naive, false, true),
            Policy::P2P3 => s(naive, true, true),
            Policy::OracleTiny => {
                return Err(Error::config(
                    "policy",
                    "oracle_tiny is an offline bound; evaluate it with sim::oracle::oracle_tiny",
                ))
            }
        })
    }
}
