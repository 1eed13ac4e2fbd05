//! Retarded fields of quantum currents and the far-field flux test.
//!
//! A free packet whose momentum spectrum vanishes beyond `(1 − ε) m c` is
//! evolved, its charge and current are sampled over a window, and the
//! outward Poynting power through spheres of growing radius is compared with
//! that of a smeared oscillating dipole carrying a matched current.

mod flux;
mod multipole;
mod packet;
mod retarded;
mod source;
mod theorem;

pub use flux::{poynting_power, write_flux_csv, FarFieldProbe, FieldMethod, PowerEstimate, SphereRule, MIN_RADIUS_FACTOR};
pub use multipole::{log_dipole_check, LogDipoleConfig, LogDipoleReport};
pub use packet::{build_compact_packet, bump, rms_velocity, PacketSpec, NYQUIST_TOLERANCE};
pub use retarded::{fields_at, jefimenko, retarded_potentials};
pub use source::{DipoleSpec, FourCurrent, NodeState, SourceBuilder, CHARGE_TOLERANCE, SUPPORT_CUTOFF};
pub use theorem::{dipole_moment_trace, verify_theorem1, DipoleTrace, FluxReport, NonradConfig, CONFIDENCE_NOTE};
