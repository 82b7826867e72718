//! Computable sequences, their registry, and seeded randomness.

use std::fmt;
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::bits::BitString;

/// A total computable binary sequence with a per-bit step cost.
pub trait Sequence: Send + Sync + fmt::Debug {
    fn id(&self) -> String;
    fn bit(&self, n: usize) -> bool;

    /// Steps needed to compute bit `n` once bits `0..n` are known.
    fn cost(&self, _n: usize) -> u64 {
        1
    }

    fn prefix(&self, n: usize) -> BitString {
        BitString::from_bits((0..n).map(|i| self.bit(i)))
    }

    /// Total steps to compute the first `n` bits.
    fn prefix_cost(&self, n: usize) -> u64 {
        (0..n).map(|i| self.cost(i)).fold(0u64, u64::saturating_add)
    }
}

/// Shared handle to a sequence.
#[derive(Clone)]
pub struct SequenceProgram(Arc<dyn Sequence>);

impl SequenceProgram {
    pub fn new(seq: impl Sequence + 'static) -> Self {
        SequenceProgram(Arc::new(seq))
    }

    pub fn from_arc(seq: Arc<dyn Sequence>) -> Self {
        SequenceProgram(seq)
    }

    pub fn id(&self) -> String {
        self.0.id()
    }

    pub fn bit(&self, n: usize) -> bool {
        self.0.bit(n)
    }

    pub fn cost(&self, n: usize) -> u64 {
        self.0.cost(n)
    }

    pub fn prefix(&self, n: usize) -> BitString {
        self.0.prefix(n)
    }

    pub fn prefix_cost(&self, n: usize) -> u64 {
        self.0.prefix_cost(n)
    }
}

impl fmt::Debug for SequenceProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SequenceProgram({})", self.0.id())
    }
}

/// Sequence given by a plain function of the position.
pub struct FnSequence<F> {
    id: String,
    f: F,
}

impl<F> fmt::Debug for FnSequence<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnSequence({})", self.id)
    }
}

impl<F: Fn(usize) -> bool + Send + Sync> Sequence for FnSequence<F> {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn bit(&self, n: usize) -> bool {
        (self.f)(n)
    }
}

pub fn from_fn(id: impl Into<String>, f: impl Fn(usize) -> bool + Send + Sync + 'static) -> SequenceProgram {
    SequenceProgram::new(FnSequence { id: id.into(), f })
}

pub fn constant(bit: bool) -> SequenceProgram {
    from_fn(if bit { "ones" } else { "zeros" }, move |_| bit)
}

pub fn alternating() -> SequenceProgram {
    from_fn("alternating", |n| n % 2 == 1)
}

pub fn thue_morse() -> SequenceProgram {
    from_fn("thue-morse", |n| n.count_ones() % 2 == 1)
}

/// Concatenation of the binary numerals 1, 10, 11, 100, ….
pub fn counting() -> SequenceProgram {
    from_fn("counting", |n| {
        let mut pos = n;
        let mut width = 1usize;
        loop {
            let block = width << (width - 1);
            if pos < block {
                let value = (1usize << (width - 1)) + pos / width;
                let offset = pos % width;
                return (value >> (width - 1 - offset)) & 1 == 1;
            }
            pos -= block;
            width += 1;
        }
    })
}

/// `prefix` followed by `cycle` repeated forever.
pub fn periodic(id: impl Into<String>, prefix: BitString, cycle: BitString) -> SequenceProgram {
    assert!(!cycle.is_empty(), "periodic sequence needs a nonempty cycle");
    from_fn(id, move |n| {
        if n < prefix.len() {
            prefix.bit(n)
        } else {
            cycle.bit((n - prefix.len()) % cycle.len())
        }
    })
}

/// Replays stored bits, continuing with zeros past the end.
pub fn replay(id: impl Into<String>, bits: BitString) -> SequenceProgram {
    from_fn(id, move |n| bits.get(n).unwrap_or(false))
}

/// Append-only list of sequences; a sequence's code is its insertion index.
#[derive(Default)]
pub struct Registry {
    entries: Mutex<Vec<SequenceProgram>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `p` and returns its code. Identical programs get fresh codes.
    pub fn register(&self, p: SequenceProgram) -> usize {
        let mut entries = self.entries.lock().expect("registry lock");
        entries.push(p);
        entries.len() - 1
    }

    pub fn get(&self, e: usize) -> Option<SequenceProgram> {
        self.entries.lock().expect("registry lock").get(e).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("registry lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries
            .lock()
            .expect("registry lock")
            .iter()
            .map(SequenceProgram::id)
            .collect()
    }
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.ids()).finish()
    }
}

/// Seed for the `index`-th item under `label`, derived from a master seed.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bits;

    #[test]
    fn fixed_sequences() {
        assert_eq!(constant(false).prefix(4), bits("0000"));
        assert_eq!(alternating().prefix(4), bits("0101"));
        assert_eq!(thue_morse().prefix(8), bits("01101001"));
        assert_eq!(counting().prefix(12), bits("110111001011"));
        assert_eq!(periodic("p", bits("0"), bits("1")).prefix(4), bits("0111"));
        assert_eq!(replay("r", bits("11")).prefix(4), bits("1100"));
        assert_eq!(constant(true).prefix_cost(5), 5);
    }

    #[test]
    fn registry_codes() {
        let r = Registry::new();
        assert!(r.is_empty());
        let z = constant(false);
        assert_eq!(r.register(z.clone()), 0);
        assert_eq!(r.register(constant(true)), 1);
        assert_eq!(r.register(z), 2);
        assert_eq!(r.ids(), vec!["zeros", "ones", "zeros"]);
    }

    #[test]
    fn seeds_are_labelled() {
        assert_eq!(derive_seed(7, "eval", 3), derive_seed(7, "eval", 3));
        assert_ne!(derive_seed(7, "eval", 3), derive_seed(7, "estimate", 3));
        assert_ne!(derive_seed(7, "eval", 3), derive_seed(7, "eval", 4));
        assert_ne!(derive_seed(7, "eval", 3), derive_seed(8, "eval", 3));
    }
}
