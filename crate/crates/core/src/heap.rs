//! Object store for one test-case execution, and immutable pre-state snapshots.

use std::collections::{BTreeMap, BTreeSet};

use crate::value::{ObjId, Value};

/// One live instance: its dynamic type and named fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeapObject {
    pub type_name: String,
    pub fields: BTreeMap<String, Value>,
}

impl HeapObject {
    pub fn field(&self, name: &str) -> Option<Value> {
        self.fields.get(name).copied()
    }
}

/// Read access shared by the live heap and snapshots, so predicates can
/// query `old` and current state with the same helpers.
pub trait State {
    fn object(&self, id: ObjId) -> Option<&HeapObject>;

    fn type_of(&self, id: ObjId) -> Option<&str> {
        self.object(id).map(|o| o.type_name.as_str())
    }

    /// Panics when the object or field is absent: a contract that reads a
    /// field its type does not have is a corpus bug, not a test verdict.
    fn field(&self, id: ObjId, name: &str) -> Value {
        let obj = self
            .object(id)
            .unwrap_or_else(|| panic!("object {id} not present in state"));
        obj.field(name)
            .unwrap_or_else(|| panic!("{} has no field `{name}`", obj.type_name))
    }

    fn int(&self, id: ObjId, name: &str) -> i32 {
        match self.field(id, name) {
            Value::Int(v) => v,
            other => panic!("field `{name}` is not an int: {other:?}"),
        }
    }

    fn boolean(&self, id: ObjId, name: &str) -> bool {
        match self.field(id, name) {
            Value::Bool(v) => v,
            other => panic!("field `{name}` is not a boolean: {other:?}"),
        }
    }

    /// `None` for a null reference.
    fn reference(&self, id: ObjId, name: &str) -> Option<ObjId> {
        match self.field(id, name) {
            Value::Ref(r) => Some(r),
            Value::Null => None,
            other => panic!("field `{name}` is not a reference: {other:?}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Heap {
    objects: Vec<HeapObject>,
}

impl Heap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn alloc<'a>(
        &mut self,
        type_name: &str,
        fields: impl IntoIterator<Item = (&'a str, Value)>,
    ) -> ObjId {
        let id = ObjId(self.objects.len() as u32);
        self.objects.push(HeapObject {
            type_name: type_name.to_string(),
            fields: fields
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        });
        id
    }

    pub fn get(&self, id: ObjId) -> Option<&HeapObject> {
        self.objects.get(id.0 as usize)
    }

    pub fn get_mut(&mut self, id: ObjId) -> Option<&mut HeapObject> {
        self.objects.get_mut(id.0 as usize)
    }

    /// Overwrite one field. Panics on a dangling id.
    pub fn set(&mut self, id: ObjId, name: &str, value: impl Into<Value>) {
        let obj = self
            .get_mut(id)
            .unwrap_or_else(|| panic!("object {id} not present in heap"));
        obj.fields.insert(name.to_string(), value.into());
    }

    /// Deep copy of everything reachable from `roots` through reference
    /// fields. The snapshot shares nothing with the heap.
    pub fn snapshot(&self, roots: &[ObjId]) -> StateSnapshot {
        let mut objects = BTreeMap::new();
        let mut stack: Vec<ObjId> = roots.to_vec();
        let mut seen = BTreeSet::new();
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            let Some(obj) = self.get(id) else { continue };
            for v in obj.fields.values() {
                if let Value::Ref(r) = v {
                    stack.push(*r);
                }
            }
            objects.insert(id, obj.clone());
        }
        StateSnapshot {
            roots: roots.to_vec(),
            objects,
            heap_len: self.objects.len(),
        }
    }
}

impl State for Heap {
    fn object(&self, id: ObjId) -> Option<&HeapObject> {
        self.get(id)
    }
}

/// Immutable copy of the state reachable from a call's receiver and
/// reference arguments, taken just before the call. Backs `old(..)`
/// expressions in postconditions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSnapshot {
    roots: Vec<ObjId>,
    objects: BTreeMap<ObjId, HeapObject>,
    heap_len: usize,
}

impl StateSnapshot {
    pub fn roots(&self) -> &[ObjId] {
        &self.roots
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// True when `id` was allocated after the snapshot was taken.
    pub fn is_fresh(&self, id: ObjId) -> bool {
        id.0 as usize >= self.heap_len
    }
}

impl State for StateSnapshot {
    fn object(&self, id: ObjId) -> Option<&HeapObject> {
        self.objects.get(&id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn account(heap: &mut Heap, balance: i32, min: i32, hist: Value) -> ObjId {
        heap.alloc(
            "Account",
            [
                ("balance", Value::Int(balance)),
                ("min", Value::Int(min)),
                ("hist", hist),
            ],
        )
    }

    #[test]
    fn snapshot_copies_fields() {
        let mut heap = Heap::new();
        let a = account(&mut heap, 100, 0, Value::Null);
        let snap = heap.snapshot(&[a]);
        assert_eq!(snap.int(a, "balance"), 100);
        assert_eq!(snap.int(a, "min"), 0);
        assert_eq!(snap.reference(a, "hist"), None);
    }

    #[test]
    fn snapshot_is_unaffected_by_later_mutation() {
        let mut heap = Heap::new();
        let a = account(&mut heap, 100, 0, Value::Null);
        let snap = heap.snapshot(&[a]);
        heap.set(a, "balance", 150);
        assert_eq!(snap.int(a, "balance"), 100);
        assert_eq!(heap.int(a, "balance"), 150);
    }

    #[test]
    fn snapshot_follows_history_chain() {
        let mut heap = Heap::new();
        let h1 = heap.alloc(
            "History",
            [("balance", Value::Int(10)), ("prec", Value::Null)],
        );
        let h2 = heap.alloc(
            "History",
            [("balance", Value::Int(20)), ("prec", Value::Ref(h1))],
        );
        let a = account(&mut heap, 30, 0, Value::Ref(h2));

        // Hand-built deep copy to compare against.
        let expected = [(h2, 20, Some(h1)), (h1, 10, None)];
        let snap = heap.snapshot(&[a]);
        heap.set(h1, "balance", -1);
        heap.set(h2, "prec", Value::Null);

        assert_eq!(snap.len(), 3);
        for (id, balance, prec) in expected {
            assert_eq!(snap.int(id, "balance"), balance);
            assert_eq!(snap.reference(id, "prec"), prec);
        }
    }

    #[test]
    fn freshness_is_relative_to_snapshot_time() {
        let mut heap = Heap::new();
        let a = account(&mut heap, 0, 0, Value::Null);
        let snap = heap.snapshot(&[a]);
        let h = heap.alloc(
            "History",
            [("balance", Value::Int(0)), ("prec", Value::Null)],
        );
        assert!(!snap.is_fresh(a));
        assert!(snap.is_fresh(h));
    }
}
