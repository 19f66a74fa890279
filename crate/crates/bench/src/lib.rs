//! Shared fixtures for the benchmarks.

use compreg_core::mc::Replication;
use compreg_core::{generate_replication, ErrorLaw, McScenario};

/// One replication of the `alpha = (5, 7, 1)` design.
pub fn replication(law: ErrorLaw, n: usize) -> (McScenario, Replication) {
    let mut sc = McScenario::alpha_571(law, 1).expect("valid scenario");
    sc.n = n;
    let rep = generate_replication(&sc, 0).expect("replication");
    (sc, rep)
}
