//! A counter with two interchangeable increment methods and no
//! preconditions. Useful for checking selection frequencies.

use crate::contract::{CreationProbability, OperationSpec, TypeUnderTest};
use crate::heap::State;
use crate::registry::Registry;
use crate::value::{Value, ValueKind};

fn increment(name: &str, weight: f64) -> OperationSpec {
    OperationSpec::method(name, [], |ctx, this, _| {
        let n = ctx.heap().int(this, "count");
        ctx.heap_mut().set(this, "count", n.wrapping_add(1));
        Ok(Value::Void)
    })
    .ensures(|v| v.now.int(v.this(), "count") == v.old.int(v.this(), "count").wrapping_add(1))
    .weight(weight)
}

/// `Counter` with `inc()` and `bump()` weighted as given. Every selected
/// constructor creates, so no attempt is ever rejected.
pub fn counter_type(inc_weight: f64, bump_weight: f64) -> TypeUnderTest {
    TypeUnderTest::new("Counter")
        .creation_probability(CreationProbability::constant(1.0).expect("valid probability"))
        .invariant(|heap, this| heap.int(this, "count") >= 0)
        .constructor(OperationSpec::constructor(
            Vec::<ValueKind>::new(),
            |ctx, _| Ok(ctx.heap_mut().alloc("Counter", [("count", Value::Int(0))])),
        ))
        .method(increment("inc", inc_weight))
        .method(increment("bump", bump_weight))
        .method(
            OperationSpec::method("get", [], |ctx, this, _| {
                Ok(ctx.heap().field(this, "count"))
            })
            .returns(ValueKind::Int32)
            .pure(),
        )
}

pub fn registry(inc_weight: f64, bump_weight: f64) -> Registry {
    let mut reg = Registry::new();
    reg.add_type(counter_type(inc_weight, bump_weight))
        .expect("fresh registry");
    reg
}
