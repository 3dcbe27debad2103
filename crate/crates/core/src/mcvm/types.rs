use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use primitive_types::U256;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::behaviors::Behavior;

/// 256-bit machine word. Used for balances, slot keys and slot values.
pub type Word = U256;

pub const WEI_PER_ETHER: u128 = 1_000_000_000_000_000_000;

pub fn ether(n: u128) -> Word {
    Word::from(n * WEI_PER_ETHER)
}

pub fn word(n: u128) -> Word {
    Word::from(n)
}

/// Clamps a word into `u128`, saturating. Scenario amounts never exceed it.
pub fn word_to_u128(w: Word) -> u128 {
    if w > Word::from(u128::MAX) {
        u128::MAX
    } else {
        w.low_u128()
    }
}

/// 20-byte account identifier. The all-zero address means "none".
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub const ZERO: Address = Address([0u8; 20]);

    pub fn from_low_u64(n: u64) -> Self {
        let mut bytes = [0u8; 20];
        bytes[12..].copy_from_slice(&n.to_be_bytes());
        Address(bytes)
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }

    pub fn to_word(self) -> Word {
        let mut buf = [0u8; 32];
        buf[12..].copy_from_slice(&self.0);
        Word::from_big_endian(&buf)
    }

    /// Takes the low 20 bytes of a word.
    pub fn from_word(w: Word) -> Self {
        let buf = w.to_big_endian();
        let mut bytes = [0u8; 20];
        bytes.copy_from_slice(&buf[12..]);
        Address(bytes)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x")?;
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid address: {0}")]
pub struct AddressParseError(String);

impl FromStr for Address {
    type Err = AddressParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s.strip_prefix("0x").unwrap_or(s);
        if hex.len() != 40 {
            return Err(AddressParseError(s.to_string()));
        }
        let mut bytes = [0u8; 20];
        for (i, chunk) in hex.as_bytes().chunks(2).enumerate() {
            let pair = std::str::from_utf8(chunk).map_err(|_| AddressParseError(s.to_string()))?;
            bytes[i] = u8::from_str_radix(pair, 16).map_err(|_| AddressParseError(s.to_string()))?;
        }
        Ok(Address(bytes))
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Name of a contract function. The empty name is a plain value transfer and
/// is dispatched to `receive`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FunctionId(String);

impl FunctionId {
    pub fn new(name: impl Into<String>) -> Self {
        FunctionId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<&str> for FunctionId {
    fn from(s: &str) -> Self {
        FunctionId(s.to_string())
    }
}

impl From<String> for FunctionId {
    fn from(s: String) -> Self {
        FunctionId(s)
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Account {
    pub balance: Word,
    /// Absent key means zero; zero values are never stored.
    pub storage: BTreeMap<Word, Word>,
    pub behavior: Option<Behavior>,
    pub nonce: u64,
}

impl Account {
    pub fn with_balance(balance: Word) -> Self {
        Account { balance, ..Default::default() }
    }

    pub fn with_behavior(behavior: Behavior, balance: Word) -> Self {
        Account { balance, behavior: Some(behavior), ..Default::default() }
    }

    pub fn load(&self, slot: Word) -> Word {
        self.storage.get(&slot).copied().unwrap_or_default()
    }

    pub fn store(&mut self, slot: Word, value: Word) {
        if value.is_zero() {
            self.storage.remove(&slot);
        } else {
            self.storage.insert(slot, value);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorldState {
    pub accounts: BTreeMap<Address, Account>,
}

impl WorldState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Creates (or replaces) an account. This is the only way value enters the world.
    pub fn insert(&mut self, address: Address, account: Account) {
        self.accounts.insert(address, account);
    }

    pub fn exists(&self, address: Address) -> bool {
        self.accounts.contains_key(&address)
    }

    pub fn balance(&self, address: Address) -> Word {
        self.accounts.get(&address).map(|a| a.balance).unwrap_or_default()
    }

    pub fn load(&self, address: Address, slot: Word) -> Word {
        self.accounts.get(&address).map(|a| a.load(slot)).unwrap_or_default()
    }

    /// Direct storage write for deployment and test setup; no gas, no trace.
    pub fn store(&mut self, address: Address, slot: Word, value: Word) {
        self.accounts.entry(address).or_default().store(slot, value);
    }

    pub fn behavior(&self, address: Address) -> Option<&Behavior> {
        self.accounts.get(&address).and_then(|a| a.behavior.as_ref())
    }

    /// Sum of all balances, wrapping. Used for value-conservation checks.
    pub fn total_value(&self) -> Word {
        self.accounts
            .values()
            .fold(Word::zero(), |acc, a| acc.overflowing_add(a.balance).0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CallKind {
    RegularCall,
    DelegateCall,
    StaticCall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameStatus {
    Open,
    Success,
    Reverted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallFrame {
    pub frame_id: u32,
    pub parent: Option<u32>,
    pub kind: CallKind,
    pub caller: Address,
    pub code_address: Address,
    pub storage_context: Address,
    pub value: Word,
    pub function: FunctionId,
    pub static_flag: bool,
    pub gas_limit: u64,
    pub gas_used: u64,
    pub enter_time: u64,
    pub exit_time: Option<u64>,
    pub status: FrameStatus,
    pub args: Vec<Word>,
    pub return_data: Option<Result<Vec<Word>, String>>,
}

impl CallFrame {
    /// True iff the frame had already exited at logical time `t`.
    pub fn completed_at(&self, t: u64) -> bool {
        matches!(self.exit_time, Some(exit) if exit <= t)
    }
}

/// Outcome of a transaction or a sub-call.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecResult {
    pub success: bool,
    pub return_data: Result<Vec<Word>, String>,
    pub gas_used: u64,
}

impl ExecResult {
    pub fn revert_reason(&self) -> Option<&str> {
        self.return_data.as_ref().err().map(String::as_str)
    }
}
