//! Register a type of your own, with a deliberate contract bug.
//!
//! `Stack` tracks only its size. `popAll` forgets that `pop` on an empty
//! stack is forbidden and drives the size below zero once the stack is
//! empty, which breaks the invariant.

use seqgen::{
    generate, render_test_source, shrink, OperationSpec, Registry, ShrinkOptions, ShrinkTarget,
    State, TypeUnderTest, Value, ValueKind,
};

fn stack() -> TypeUnderTest {
    TypeUnderTest::new("Stack")
        .invariant(|heap, this| {
            let size = heap.int(this, "size");
            (0..=heap.int(this, "capacity")).contains(&size)
        })
        .constructor(OperationSpec::constructor(
            Vec::<ValueKind>::new(),
            |ctx, _| {
                Ok(ctx.heap_mut().alloc(
                    "Stack",
                    [("size", Value::Int(0)), ("capacity", Value::Int(4))],
                ))
            },
        ))
        .method(
            OperationSpec::method("push", [], |ctx, this, _| {
                let n = ctx.heap().int(this, "size");
                ctx.heap_mut().set(this, "size", n + 1);
                Ok(Value::Void)
            })
            .requires(|v| v.state.int(v.this(), "size") < v.state.int(v.this(), "capacity"))
            .ensures(|v| v.now.int(v.this(), "size") == v.old.int(v.this(), "size") + 1),
        )
        .method(
            OperationSpec::method("popAll", [ValueKind::Int32], |ctx, this, args| {
                let n = ctx.heap().int(this, "size");
                let k = args[0].as_int().unwrap_or(0);
                ctx.heap_mut().set(this, "size", n - k);
                Ok(Value::Void)
            })
            .requires(|v| v.int(0) >= 0 && v.state.int(v.this(), "size") > 0),
        )
        .method(
            OperationSpec::method("size", [], |ctx, this, _| {
                Ok(ctx.heap().field(this, "size"))
            })
            .returns(ValueKind::Int32)
            .pure(),
        )
}

fn main() {
    let mut registry = Registry::new();
    registry.add_type(stack()).unwrap();

    let (artifact, report) = generate(&registry, "TestStack", 50, 30, 0).unwrap();
    println!("{} of {} test cases fail", report.errors(), report.tests());

    let Some((test, failure)) = artifact
        .tests
        .iter()
        .zip(&report.verdicts)
        .find_map(|(t, v)| v.failure().map(|f| (t, f)))
    else {
        return;
    };
    println!(
        "{}: {} violation of {}",
        test.id,
        failure.kind.as_str(),
        failure.contract
    );
    let min = shrink(
        test,
        &ShrinkTarget::from(failure),
        &registry,
        ShrinkOptions::default(),
    )
    .unwrap();
    print!("{}", render_test_source(&min.to_test_case()));
}
