//! Process-wide string interner shared by Scheme symbols and grammar terminals.

use once_cell::sync::Lazy;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

/// An interned string. Ids are process-local: never persist them and never
/// rely on their numeric order for anything observable.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Atom(u32);

#[derive(Default)]
struct Table {
    names: Vec<Arc<str>>,
    ids: HashMap<Arc<str>, u32>,
}

static TABLE: Lazy<RwLock<Table>> = Lazy::new(|| RwLock::new(Table::default()));

impl Atom {
    pub fn new(name: &str) -> Atom {
        if let Some(&id) = TABLE.read().expect("interner poisoned").ids.get(name) {
            return Atom(id);
        }
        let mut table = TABLE.write().expect("interner poisoned");
        if let Some(&id) = table.ids.get(name) {
            return Atom(id);
        }
        let id = u32::try_from(table.names.len()).expect("interner overflow");
        let shared: Arc<str> = Arc::from(name);
        table.names.push(shared.clone());
        table.ids.insert(shared, id);
        Atom(id)
    }

    pub fn name(self) -> Arc<str> {
        TABLE.read().expect("interner poisoned").names[self.0 as usize].clone()
    }

    pub(crate) fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_is_idempotent() {
        let a = Atom::new("lambda");
        let b = Atom::new("lambda");
        assert_eq!(a, b);
        assert_ne!(a, Atom::new("define"));
        assert_eq!(&*a.name(), "lambda");
    }
}
