//! Abstract memory for the instrumented interpreter.
//!
//! Every allocation (heap, stack slot, global) is an `AllocationRecord` with
//! an abstract base address; addresses are never reused, so dangling pointers
//! stay detectable. Live records occupy disjoint `[base, base+byte_length)`
//! intervals and the bounds table answers address-containment queries over
//! them.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ctype::{CType, Prim};

pub type AllocId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Stack,
    Heap,
}

/// A runtime value held in one memory cell or local slot.
#[derive(Debug, Clone, PartialEq)]
pub enum RtVal {
    Int { v: i64, ty: Prim },
    Float { v: f64, ty: Prim },
    Ptr { alloc: AllocId, offset: u64, ty: CType },
    Null { ty: CType },
    Fn { name: String },
    StructV { tag: String, fields: Vec<RtVal> },
    Void,
}

impl RtVal {
    pub fn type_render(&self) -> String {
        match self {
            RtVal::Int { ty, .. } | RtVal::Float { ty, .. } => String::from(ty.name()),
            RtVal::Ptr { ty, .. } => CType::ptr(ty.clone()).render(),
            RtVal::Null { ty } => CType::ptr(ty.clone()).render(),
            RtVal::Fn { .. } => String::from("function"),
            RtVal::StructV { tag, .. } => tag.clone(),
            RtVal::Void => String::from("void"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AllocationRecord {
    pub alloc_id: AllocId,
    pub base: u64,
    pub byte_length: u64,
    pub element_type: CType,
    pub element_count: u64,
    pub region: Region,
    pub freed: bool,
    /// False until a cast fixes the element type of a raw `malloc` block.
    pub typed: bool,
    pub cells: Vec<RtVal>,
}

/// Interval index over live allocation records.
#[derive(Debug, Clone, Default)]
pub struct BoundsTable {
    records: BTreeMap<AllocId, AllocationRecord>,
    /// base address -> alloc id, live records only.
    live_by_base: BTreeMap<u64, AllocId>,
    next_id: AllocId,
    next_addr: u64,
}

/// Gap between consecutive allocations so off-by-one addresses never fall
/// into a neighbouring record.
const ADDR_GAP: u64 = 16;

impl BoundsTable {
    pub fn new() -> BoundsTable {
        BoundsTable {
            records: BTreeMap::new(),
            live_by_base: BTreeMap::new(),
            next_id: 1,
            next_addr: 0x1000,
        }
    }

    pub fn allocate(
        &mut self,
        element_type: CType,
        element_count: u64,
        elem_size: u64,
        region: Region,
        zero_cell: RtVal,
    ) -> AllocId {
        let id = self.next_id;
        self.next_id += 1;
        let byte_length = element_count * elem_size;
        let base = self.next_addr;
        self.next_addr += byte_length.max(1) + ADDR_GAP;
        let cells = alloc::vec![zero_cell; element_count as usize];
        self.records.insert(
            id,
            AllocationRecord {
                alloc_id: id,
                base,
                byte_length,
                element_type,
                element_count,
                region,
                freed: false,
                typed: true,
                cells,
            },
        );
        self.live_by_base.insert(base, id);
        id
    }

    /// Raw `malloc`: untyped bytes mapped to a base character type until the
    /// first cast retypes the block.
    pub fn allocate_raw(&mut self, nbytes: u64) -> AllocId {
        let id = self.allocate(
            CType::prim(Prim::UChar),
            nbytes,
            1,
            Region::Heap,
            RtVal::Int {
                v: 0,
                ty: Prim::UChar,
            },
        );
        self.records.get_mut(&id).expect("fresh record").typed = false;
        id
    }

    /// Retype an untyped block; element count derives from the byte length.
    /// Returns false when the block was already typed to something else.
    pub fn retype(&mut self, id: AllocId, element_type: CType, elem_size: u64, zero_cell: RtVal) -> bool {
        let rec = match self.records.get_mut(&id) {
            Some(r) => r,
            None => return false,
        };
        if rec.typed {
            return rec.element_type == element_type;
        }
        if elem_size == 0 || rec.byte_length % elem_size != 0 {
            return false;
        }
        rec.element_count = rec.byte_length / elem_size;
        rec.element_type = element_type;
        rec.typed = true;
        rec.cells = alloc::vec![zero_cell; rec.element_count as usize];
        true
    }

    pub fn record(&self, id: AllocId) -> Option<&AllocationRecord> {
        self.records.get(&id)
    }

    pub fn record_mut(&mut self, id: AllocId) -> Option<&mut AllocationRecord> {
        self.records.get_mut(&id)
    }

    /// The unique live record containing `addr`, if any.
    pub fn lookup(&self, addr: u64) -> Option<&AllocationRecord> {
        let (_, id) = self.live_by_base.range(..=addr).next_back()?;
        let rec = self.records.get(id)?;
        if addr < rec.base + rec.byte_length.max(1) {
            Some(rec)
        } else {
            None
        }
    }

    /// Marks a record freed. Returns false on double free.
    pub fn free(&mut self, id: AllocId) -> bool {
        match self.records.get_mut(&id) {
            Some(rec) if !rec.freed => {
                rec.freed = true;
                self.live_by_base.remove(&rec.base);
                true
            }
            _ => false,
        }
    }

    pub fn live_records(&self) -> impl Iterator<Item = &AllocationRecord> {
        self.live_by_base.values().filter_map(|id| self.records.get(id))
    }

    /// Checks that live intervals are pairwise disjoint.
    pub fn intervals_disjoint(&self) -> bool {
        let mut prev_end: Option<u64> = None;
        for rec in self.live_records() {
            if let Some(end) = prev_end {
                if rec.base < end {
                    return false;
                }
            }
            prev_end = Some(rec.base + rec.byte_length.max(1));
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_finds_containing_record() {
        let mut bt = BoundsTable::new();
        let a = bt.allocate(
            CType::prim(Prim::Int),
            10,
            4,
            Region::Heap,
            RtVal::Int { v: 0, ty: Prim::Int },
        );
        let rec = bt.record(a).unwrap();
        let base = rec.base;
        assert_eq!(bt.lookup(base).unwrap().alloc_id, a);
        assert_eq!(bt.lookup(base + 39).unwrap().alloc_id, a);
        assert!(bt.lookup(base + 40).is_none());
        assert!(bt.intervals_disjoint());
    }

    #[test]
    fn free_is_single_shot() {
        let mut bt = BoundsTable::new();
        let a = bt.allocate_raw(8);
        assert!(bt.free(a));
        assert!(!bt.free(a));
        let base = bt.record(a).unwrap().base;
        assert!(bt.lookup(base).is_none());
    }

    #[test]
    fn retype_fixes_count_once() {
        let mut bt = BoundsTable::new();
        let a = bt.allocate_raw(40);
        assert!(bt.retype(
            a,
            CType::prim(Prim::Float),
            4,
            RtVal::Float { v: 0.0, ty: Prim::Float }
        ));
        assert_eq!(bt.record(a).unwrap().element_count, 10);
        // Conflicting retype is refused.
        assert!(!bt.retype(
            a,
            CType::prim(Prim::Int),
            4,
            RtVal::Int { v: 0, ty: Prim::Int }
        ));
    }
}
