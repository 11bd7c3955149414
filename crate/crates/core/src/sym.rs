//! Global symbol interner. Constants, functors, variable names and type names
//! are interned once and compared as integers afterwards.

use once_cell::sync::Lazy;
use std::collections::HashMap;
use std::fmt;
use std::sync::RwLock;

struct Interner {
    map: HashMap<String, u32>,
    names: Vec<&'static str>,
}

static INTERNER: Lazy<RwLock<Interner>> = Lazy::new(|| {
    RwLock::new(Interner {
        map: HashMap::new(),
        names: Vec::new(),
    })
});

/// An interned string. Equality and hashing are integer operations; the
/// underlying text is available for display via `as_str`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(u32);

impl Sym {
    pub fn new(text: &str) -> Sym {
        {
            let int = INTERNER.read().unwrap();
            if let Some(&id) = int.map.get(text) {
                return Sym(id);
            }
        }
        let mut int = INTERNER.write().unwrap();
        if let Some(&id) = int.map.get(text) {
            return Sym(id);
        }
        let id = int.names.len() as u32;
        // Interned names live for the whole process; leaking keeps `as_str`
        // free of locks and lifetimes.
        let leaked: &'static str = Box::leak(text.to_owned().into_boxed_str());
        int.names.push(leaked);
        int.map.insert(text.to_owned(), id);
        Sym(id)
    }

    pub fn as_str(self) -> &'static str {
        INTERNER.read().unwrap().names[self.0 as usize]
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.as_str())
    }
}

impl From<&str> for Sym {
    fn from(s: &str) -> Sym {
        Sym::new(s)
    }
}
