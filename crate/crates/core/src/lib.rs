//! Simulation toolkit for a photonics-integrated surface-electrode Sr+ ion trap.
//!
//! The crate follows light from the fiber through the on-chip loss budget
//! ([`channels`]), waveguide and grating-coupler emission ([`photonics`]) and the
//! resulting beams above the chip ([`beams`]), and couples it to the trapped ion:
//! electrostatic confinement and shuttling ([`trap`]), optical response ([`ion`]),
//! photon-counting readout ([`detection`]) and Ramsey coherence under platform
//! vibration ([`coherence`]). [`scenario`] loads the JSON description of a chip and
//! [`reproduce`] runs the reference checks against the shipped fixture.

pub mod beams;
pub mod channels;
pub mod coherence;
pub mod consts;
pub mod detection;
pub mod fixture;
pub mod ion;
pub mod numerics;
pub mod output;
pub mod photonics;
pub mod reproduce;
pub mod scenario;
pub mod trap;

use thiserror::Error as ThisError;

/// Any failure surfaced by the toolkit.
#[derive(Debug, ThisError)]
pub enum Error {
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
    #[error("channels: {0}")]
    Channel(#[from] channels::ChannelError),
    #[error("photonics: {0}")]
    Photonics(#[from] photonics::PhotonicsError),
    #[error("beams: {0}")]
    Beam(#[from] beams::BeamError),
    #[error("trap: {0}")]
    Trap(#[from] trap::TrapError),
    #[error("ion: {0}")]
    Ion(#[from] ion::IonError),
    #[error("detection: {0}")]
    Detection(#[from] detection::DetectionError),
    #[error("coherence: {0}")]
    Coherence(#[from] coherence::CoherenceError),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for problems with the scenario file itself rather than the numerics.
    pub fn is_schema(&self) -> bool {
        matches!(self, Error::Scenario(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
