//! Message-call VM with a proxy-level reentrancy guard, two baseline guards,
//! a trace oracle for reentrancy classes and a scenario harness.

pub mod baselines;
pub mod behaviors;
pub mod hash;
pub mod harness;
pub mod mcvm;
pub mod oracle;
pub mod sentinel;
