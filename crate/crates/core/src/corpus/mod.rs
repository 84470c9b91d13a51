//! Built-in corpora, addressable by name from the command line.

pub mod bank;
pub mod counter;

use crate::registry::Registry;

/// Names accepted by [`by_name`].
pub const NAMES: &[&str] = &["bank", "bank-fixed", "counter"];

/// A fresh, unfrozen registry for the named corpus.
pub fn by_name(name: &str) -> Option<Registry> {
    match name {
        "bank" => Some(bank::registry()),
        "bank-fixed" => Some(bank::fixed_registry()),
        "counter" => Some(counter::registry(1.0, 1.0)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        for name in NAMES {
            assert!(by_name(name).is_some(), "{name}");
        }
        assert!(by_name("nosuch").is_none());
    }
}
