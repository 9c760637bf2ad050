//! Energies, negative Sobolev norms, coercivity and modulated-energy diagnostics.

pub mod coercivity;
pub mod energy;
pub mod hms;
pub mod modulated;
pub mod table;

pub use hms::{es_table, hminus_s_norm, hminus_s_norm_with_table, HmsGridInfo, HmsMethod, HmsNorm};
pub use table::KernelTable;
pub use modulated::{gronwall_check, gronwall_spread, r_eps, write_diagnostics_csv, GronwallReport, ModulatedEnergyReport, ModulationSetup};
pub use coercivity::{coercivity_check, translate_cells, CoercivityContext, CoercivityReport, COERCIVITY_SLACK};
pub use energy::{interaction_energy, project_profile, GridKernel, Measure};
