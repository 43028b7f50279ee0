//! Shared fixtures for the benchmarks.

use ebk_core::{EnergyWindow, SymbolSpec};

/// The quartic oscillator on `[0.5, 2]`, the heaviest single-well workload.
pub fn quartic_fixture() -> (SymbolSpec, EnergyWindow) {
    (SymbolSpec::quartic(), EnergyWindow::new(0.5, 2.0, 0.05).expect("valid window"))
}

/// The symmetric double well below its barrier.
pub fn double_well_fixture() -> (SymbolSpec, EnergyWindow) {
    (
        SymbolSpec::double_well(1.0).expect("valid symbol"),
        EnergyWindow::new(0.1, 0.6, 0.02).expect("valid window"),
    )
}
