//! Named storage variables laid out like Solidity state variables.
//! Every access labels the slot so traces can be mapped back to variables.

use crate::hash::{array_slot, mapping_slot};
use crate::mcvm::{Address, Ctx, Halt, Word};

#[derive(Debug, Clone, Copy)]
pub struct Scalar {
    pub name: &'static str,
    pub slot: u64,
}

impl Scalar {
    pub const fn new(name: &'static str, slot: u64) -> Self {
        Scalar { name, slot }
    }

    pub fn slot(&self) -> Word {
        Word::from(self.slot)
    }

    pub fn read(&self, ctx: &mut Ctx) -> Result<Word, Halt> {
        ctx.label(self.slot(), self.name);
        ctx.sload(self.slot())
    }

    pub fn write(&self, ctx: &mut Ctx, value: Word) -> Result<(), Halt> {
        ctx.label(self.slot(), self.name);
        ctx.sstore(self.slot(), value)
    }

    pub fn add(&self, ctx: &mut Ctx, delta: Word) -> Result<Word, Halt> {
        let v = self.read(ctx)?.overflowing_add(delta).0;
        self.write(ctx, v)?;
        Ok(v)
    }

    pub fn sub(&self, ctx: &mut Ctx, delta: Word) -> Result<Word, Halt> {
        let v = self.read(ctx)?.overflowing_sub(delta).0;
        self.write(ctx, v)?;
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Mapping {
    pub name: &'static str,
    pub base: u64,
}

impl Mapping {
    pub const fn new(name: &'static str, base: u64) -> Self {
        Mapping { name, base }
    }

    pub fn slot(&self, key: Word) -> Word {
        mapping_slot(key, Word::from(self.base))
    }

    pub fn read(&self, ctx: &mut Ctx, key: Word) -> Result<Word, Halt> {
        let slot = self.slot(key);
        ctx.label(slot, self.name);
        ctx.sload(slot)
    }

    pub fn write(&self, ctx: &mut Ctx, key: Word, value: Word) -> Result<(), Halt> {
        let slot = self.slot(key);
        ctx.label(slot, self.name);
        ctx.sstore(slot, value)
    }
}

/// Dynamic array: length at `base`, elements at `keccak(base) + i`.
#[derive(Debug, Clone, Copy)]
pub struct Array {
    pub name: &'static str,
    pub base: u64,
}

impl Array {
    pub const fn new(name: &'static str, base: u64) -> Self {
        Array { name, base }
    }

    pub fn len_slot(&self) -> Word {
        Word::from(self.base)
    }

    pub fn element_slot(&self, index: u64) -> Word {
        array_slot(Word::from(self.base), index)
    }

    pub fn len(&self, ctx: &mut Ctx) -> Result<u64, Halt> {
        ctx.label(self.len_slot(), self.name);
        Ok(ctx.sload(self.len_slot())?.low_u64())
    }

    pub fn get(&self, ctx: &mut Ctx, index: u64) -> Result<Word, Halt> {
        let slot = self.element_slot(index);
        ctx.label(slot, self.name);
        ctx.sload(slot)
    }

    pub fn push(&self, ctx: &mut Ctx, value: Word) -> Result<(), Halt> {
        let len = self.len(ctx)?;
        let slot = self.element_slot(len);
        ctx.label(slot, self.name);
        ctx.sstore(slot, value)?;
        ctx.sstore(self.len_slot(), Word::from(len + 1))
    }
}

/// Per-holder balances plus a participant list so the total can be enumerated.
#[derive(Debug, Clone, Copy)]
pub struct Ledger {
    pub balances: Mapping,
    pub participants: Array,
    pub index: Mapping,
}

impl Ledger {
    pub const fn standard() -> Self {
        Ledger {
            balances: Mapping::new("balances", 0),
            participants: Array::new("participants", 2),
            index: Mapping::new("participantIndex", 3),
        }
    }

    pub fn get(&self, ctx: &mut Ctx, holder: Address) -> Result<Word, Halt> {
        self.balances.read(ctx, holder.to_word())
    }

    pub fn set(&self, ctx: &mut Ctx, holder: Address, value: Word) -> Result<(), Halt> {
        self.enroll(ctx, holder)?;
        self.balances.write(ctx, holder.to_word(), value)
    }

    /// Wrapping credit.
    pub fn credit(&self, ctx: &mut Ctx, holder: Address, amount: Word) -> Result<Word, Halt> {
        let v = self.get(ctx, holder)?.overflowing_add(amount).0;
        self.set(ctx, holder, v)?;
        Ok(v)
    }

    fn enroll(&self, ctx: &mut Ctx, holder: Address) -> Result<(), Halt> {
        if self.index.read(ctx, holder.to_word())?.is_zero() {
            self.participants.push(ctx, holder.to_word())?;
            let len = self.participants.len(ctx)?;
            self.index.write(ctx, holder.to_word(), Word::from(len))?;
        }
        Ok(())
    }

    /// Sum of all entries modulo 2^256.
    pub fn total(&self, ctx: &mut Ctx) -> Result<Word, Halt> {
        let len = self.participants.len(ctx)?;
        let mut sum = Word::zero();
        for i in 0..len {
            let holder = Address::from_word(self.participants.get(ctx, i)?);
            sum = sum.overflowing_add(self.get(ctx, holder)?).0;
        }
        Ok(sum)
    }

    /// Same enumeration against a world snapshot, outside any transaction.
    pub fn total_in(&self, world: &crate::mcvm::WorldState, at: Address) -> Word {
        let len = world.load(at, self.participants.len_slot()).low_u64();
        (0..len).fold(Word::zero(), |sum, i| {
            let holder = world.load(at, self.participants.element_slot(i));
            sum.overflowing_add(world.load(at, self.balances.slot(holder))).0
        })
    }
}

pub fn arg(args: &[Word], i: usize) -> Result<Word, Halt> {
    args.get(i).copied().ok_or_else(|| Halt::revert("missing argument"))
}

pub fn arg_address(args: &[Word], i: usize) -> Result<Address, Halt> {
    arg(args, i).map(Address::from_word)
}
