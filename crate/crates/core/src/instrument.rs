//! Per-thread operation counters used to audit cost contracts.

use std::cell::Cell;

thread_local! {
    static FACTORIZATIONS: Cell<u64> = const { Cell::new(0) };
    static DISTANCE_QUERIES: Cell<u64> = const { Cell::new(0) };
}

/// Snapshot of the counters of the calling thread.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Counters {
    pub factorizations: u64,
    pub distance_queries: u64,
}

impl Counters {
    pub fn since(self, earlier: Counters) -> Counters {
        Counters {
            factorizations: self.factorizations - earlier.factorizations,
            distance_queries: self.distance_queries - earlier.distance_queries,
        }
    }
}

pub fn snapshot() -> Counters {
    Counters {
        factorizations: FACTORIZATIONS.with(Cell::get),
        distance_queries: DISTANCE_QUERIES.with(Cell::get),
    }
}

pub(crate) fn count_factorization() {
    FACTORIZATIONS.with(|c| c.set(c.get() + 1));
}

pub(crate) fn count_distance_queries(n: u64) {
    DISTANCE_QUERIES.with(|c| c.set(c.get() + n));
}
