//! Runtime values and the kinds used in operation signatures.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Identity of an object allocated on a [`Heap`](crate::heap::Heap).
///
/// Ids are handed out in allocation order and never reused inside one test
/// case, so comparing an id against the heap length at some earlier point
/// tells whether the object is newer than that point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjId(pub u32);

impl fmt::Display for ObjId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{}", self.0)
    }
}

/// A value flowing through a call: argument, field, or result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Value {
    /// Signed 32-bit integer. Corpus arithmetic wraps.
    Int(i32),
    Bool(bool),
    Ref(ObjId),
    Null,
    /// Result of an operation declared without a return kind.
    Void,
}

impl Value {
    pub fn as_int(&self) -> Option<i32> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(v) => Some(*v),
            _ => None,
        }
    }

    /// `Some(id)` for a live reference, `None` for null or any non-reference.
    pub fn as_ref(&self) -> Option<ObjId> {
        match self {
            Value::Ref(id) => Some(*id),
            _ => None,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }
}

impl From<i32> for Value {
    fn from(v: i32) -> Self {
        Value::Int(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<Option<ObjId>> for Value {
    fn from(v: Option<ObjId>) -> Self {
        v.map_or(Value::Null, Value::Ref)
    }
}

/// Parameter and return kinds of an operation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ValueKind {
    Int32,
    Boolean,
    /// Reference to an instance of the named registered type, or null.
    Reference(String),
    /// The kind of the null literal. Never used as a declared parameter kind.
    Null,
}

impl ValueKind {
    pub fn reference(type_name: impl Into<String>) -> Self {
        ValueKind::Reference(type_name.into())
    }

    /// Name used in signatures, selectors and artifacts.
    pub fn name(&self) -> &str {
        match self {
            ValueKind::Int32 => "int",
            ValueKind::Boolean => "boolean",
            ValueKind::Reference(t) => t,
            ValueKind::Null => "null",
        }
    }

    pub fn parse(s: &str) -> Self {
        match s {
            "int" => ValueKind::Int32,
            "boolean" => ValueKind::Boolean,
            "null" => ValueKind::Null,
            other => ValueKind::Reference(other.to_string()),
        }
    }

    pub fn is_primitive(&self) -> bool {
        matches!(self, ValueKind::Int32 | ValueKind::Boolean)
    }

    /// Whether a value of this shape may be stored in a slot of this kind.
    /// Reference slots are checked against the dynamic type separately.
    pub fn admits_shape(&self, value: &Value) -> bool {
        matches!(
            (self, value),
            (ValueKind::Int32, Value::Int(_))
                | (ValueKind::Boolean, Value::Bool(_))
                | (ValueKind::Reference(_), Value::Ref(_) | Value::Null)
                | (ValueKind::Null, Value::Null)
        )
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for ValueKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ValueKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s.is_empty() {
            return Err(serde::de::Error::custom("empty kind name"));
        }
        Ok(ValueKind::parse(&s))
    }
}

/// Render a signature as `int, History`.
pub fn signature_string(signature: &[ValueKind]) -> String {
    signature
        .iter()
        .map(ValueKind::name)
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for kind in [
            ValueKind::Int32,
            ValueKind::Boolean,
            ValueKind::Null,
            ValueKind::reference("History"),
        ] {
            assert_eq!(ValueKind::parse(kind.name()), kind);
        }
    }

    #[test]
    fn shapes() {
        assert!(ValueKind::Int32.admits_shape(&Value::Int(-1)));
        assert!(!ValueKind::Int32.admits_shape(&Value::Bool(true)));
        assert!(ValueKind::reference("A").admits_shape(&Value::Null));
        assert!(!ValueKind::Boolean.admits_shape(&Value::Null));
    }
}
