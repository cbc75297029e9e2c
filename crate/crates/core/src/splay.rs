//! Arena-backed splay trees keyed by `u32`.
//!
//! One [`SplayForest`] owns the entries of many independent trees; each tree
//! is identified by a [`SplayRoot`] handle stored by its owner. Mutating
//! lookups splay the accessed key to the root (top-down splaying), plain
//! lookups through `&self` walk the tree without reorganizing it.

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Entry {
    key: u32,
    value: u32,
    left: u32,
    right: u32,
}

/// Handle to one tree inside a [`SplayForest`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplayRoot(u32);

impl SplayRoot {
    pub const EMPTY: SplayRoot = SplayRoot(NIL);

    pub fn is_empty(self) -> bool {
        self.0 == NIL
    }
}

impl Default for SplayRoot {
    fn default() -> Self {
        Self::EMPTY
    }
}

#[derive(Debug, Clone, Default)]
pub struct SplayForest {
    entries: Vec<Entry>,
    free: Vec<u32>,
}

impl SplayForest {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of live entries across all trees.
    pub fn live_entries(&self) -> usize {
        self.entries.len() - self.free.len()
    }

    fn alloc(&mut self, key: u32, value: u32) -> u32 {
        let e = Entry {
            key,
            value,
            left: NIL,
            right: NIL,
        };
        match self.free.pop() {
            Some(slot) => {
                self.entries[slot as usize] = e;
                slot
            }
            None => {
                self.entries.push(e);
                (self.entries.len() - 1) as u32
            }
        }
    }

    /// Top-down splay of `key` in the tree rooted at `t`; returns the new root.
    /// The new root holds `key` if present, otherwise a neighbour of it.
    fn splay(&mut self, mut t: u32, key: u32) -> u32 {
        if t == NIL {
            return NIL;
        }
        // Left and right assembly trees hang off a virtual header; NIL in
        // `l`/`r` stands for the header itself.
        let mut header_left = NIL;
        let mut header_right = NIL;
        let mut l = NIL;
        let mut r = NIL;
        let e = &mut self.entries;
        loop {
            let tk = e[t as usize].key;
            if key < tk {
                let mut y = e[t as usize].left;
                if y == NIL {
                    break;
                }
                if key < e[y as usize].key {
                    // rotate right
                    e[t as usize].left = e[y as usize].right;
                    e[y as usize].right = t;
                    t = y;
                    y = e[t as usize].left;
                    if y == NIL {
                        break;
                    }
                }
                // link right
                if r == NIL {
                    header_left = t;
                } else {
                    e[r as usize].left = t;
                }
                r = t;
                t = y;
            } else if key > tk {
                let mut y = e[t as usize].right;
                if y == NIL {
                    break;
                }
                if key > e[y as usize].key {
                    // rotate left
                    e[t as usize].right = e[y as usize].left;
                    e[y as usize].left = t;
                    t = y;
                    y = e[t as usize].right;
                    if y == NIL {
                        break;
                    }
                }
                // link left
                if l == NIL {
                    header_right = t;
                } else {
                    e[l as usize].right = t;
                }
                l = t;
                t = y;
            } else {
                break;
            }
        }
        // assemble
        let (tl, tr) = (e[t as usize].left, e[t as usize].right);
        if l == NIL {
            header_right = tl;
        } else {
            e[l as usize].right = tl;
        }
        if r == NIL {
            header_left = tr;
        } else {
            e[r as usize].left = tr;
        }
        e[t as usize].left = header_right;
        e[t as usize].right = header_left;
        t
    }

    /// Lookup without reorganization.
    pub fn get(&self, root: SplayRoot, key: u32) -> Option<u32> {
        let mut t = root.0;
        while t != NIL {
            let e = &self.entries[t as usize];
            if key < e.key {
                t = e.left;
            } else if key > e.key {
                t = e.right;
            } else {
                return Some(e.value);
            }
        }
        None
    }

    /// Lookup that splays the accessed key to the root.
    pub fn get_splay(&mut self, root: &mut SplayRoot, key: u32) -> Option<u32> {
        root.0 = self.splay(root.0, key);
        if root.0 != NIL && self.entries[root.0 as usize].key == key {
            Some(self.entries[root.0 as usize].value)
        } else {
            None
        }
    }

    /// Returns the value for `key`, inserting `make()` first if absent. The
    /// flag is true when an insertion happened.
    pub fn get_or_insert_with(
        &mut self,
        root: &mut SplayRoot,
        key: u32,
        make: impl FnOnce() -> u32,
    ) -> (u32, bool) {
        if root.0 == NIL {
            let value = make();
            root.0 = self.alloc(key, value);
            return (value, true);
        }
        let t = self.splay(root.0, key);
        let tk = self.entries[t as usize].key;
        if tk == key {
            root.0 = t;
            return (self.entries[t as usize].value, false);
        }
        let value = make();
        let n = self.alloc(key, value);
        if key < tk {
            self.entries[n as usize].left = self.entries[t as usize].left;
            self.entries[n as usize].right = t;
            self.entries[t as usize].left = NIL;
        } else {
            self.entries[n as usize].right = self.entries[t as usize].right;
            self.entries[n as usize].left = t;
            self.entries[t as usize].right = NIL;
        }
        root.0 = n;
        (value, true)
    }

    /// Inserts or overwrites; returns the previous value.
    pub fn insert(&mut self, root: &mut SplayRoot, key: u32, value: u32) -> Option<u32> {
        let (_, created) = self.get_or_insert_with(root, key, || value);
        if created {
            None
        } else {
            // the key now sits at the root
            let e = &mut self.entries[root.0 as usize];
            Some(std::mem::replace(&mut e.value, value))
        }
    }

    pub fn remove(&mut self, root: &mut SplayRoot, key: u32) -> Option<u32> {
        if root.0 == NIL {
            return None;
        }
        let t = self.splay(root.0, key);
        root.0 = t;
        if self.entries[t as usize].key != key {
            return None;
        }
        let Entry {
            value, left, right, ..
        } = self.entries[t as usize];
        root.0 = if left == NIL {
            right
        } else {
            // every key in `left` is smaller, so splaying for `key` lifts the
            // maximum, which has no right child
            let x = self.splay(left, key);
            self.entries[x as usize].right = right;
            x
        };
        self.free.push(t);
        Some(value)
    }

    /// Drops every entry of one tree.
    pub fn clear(&mut self, root: &mut SplayRoot) {
        let mut stack = vec![root.0];
        while let Some(t) = stack.pop() {
            if t == NIL {
                continue;
            }
            let e = self.entries[t as usize];
            stack.push(e.left);
            stack.push(e.right);
            self.free.push(t);
        }
        *root = SplayRoot::EMPTY;
    }

    pub fn len(&self, root: SplayRoot) -> usize {
        self.iter(root).count()
    }

    /// In-order (ascending key) iteration.
    pub fn iter(&self, root: SplayRoot) -> Iter<'_> {
        let mut it = Iter {
            forest: self,
            stack: Vec::new(),
        };
        it.push_left(root.0);
        it
    }
}

pub struct Iter<'a> {
    forest: &'a SplayForest,
    stack: Vec<u32>,
}

impl Iter<'_> {
    fn push_left(&mut self, mut t: u32) {
        while t != NIL {
            self.stack.push(t);
            t = self.forest.entries[t as usize].left;
        }
    }
}

impl Iterator for Iter<'_> {
    type Item = (u32, u32);

    fn next(&mut self) -> Option<(u32, u32)> {
        let t = self.stack.pop()?;
        let e = self.forest.entries[t as usize];
        self.push_left(e.right);
        Some((e.key, e.value))
    }
}
