use serde::{Deserialize, Serialize};

/// Per-operation gas prices. Defaults follow EIP-2929 warm/cold pricing;
/// refunds are not modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GasSchedule {
    pub sload_cold: u64,
    pub sload_warm: u64,
    pub sstore_nonzero_to_nonzero: u64,
    pub sstore_zero_to_nonzero: u64,
    pub sstore_cold_surcharge: u64,
    pub account_access_cold: u64,
    pub account_access_warm: u64,
    pub value_transfer_surcharge: u64,
    pub log_base: u64,
    pub log_topic: u64,
    /// Gas handed to the static-context probe sub-call.
    pub probe_gas_cap: u64,
}

impl Default for GasSchedule {
    fn default() -> Self {
        GasSchedule {
            sload_cold: 2100,
            sload_warm: 100,
            sstore_nonzero_to_nonzero: 2900,
            sstore_zero_to_nonzero: 20000,
            sstore_cold_surcharge: 2100,
            account_access_cold: 2600,
            account_access_warm: 100,
            value_transfer_surcharge: 9000,
            log_base: 375,
            log_topic: 375,
            probe_gas_cap: 1000,
        }
    }
}

impl GasSchedule {
    pub fn sload(&self, warm: bool) -> u64 {
        if warm {
            self.sload_warm
        } else {
            self.sload_cold
        }
    }

    /// SSTORE price. A write of the value already present costs a warm read.
    pub fn sstore(&self, warm: bool, current: bool, new: bool, unchanged: bool) -> u64 {
        let base = if unchanged {
            self.sload_warm
        } else if !current && new {
            self.sstore_zero_to_nonzero
        } else {
            self.sstore_nonzero_to_nonzero
        };
        if warm {
            base
        } else {
            base + self.sstore_cold_surcharge
        }
    }

    pub fn account_access(&self, warm: bool) -> u64 {
        if warm {
            self.account_access_warm
        } else {
            self.account_access_cold
        }
    }

    pub fn log(&self, topics: u8) -> u64 {
        self.log_base + self.log_topic * u64::from(topics)
    }
}
