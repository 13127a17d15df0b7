//! Wavelength pathways and their decibel loss ledgers.
//!
//! A channel carries light from a fiber through the on-chip coupler, a routing
//! waveguide and a grating coupler. Losses are kept in dB as recorded and only
//! converted to a linear transmission when power is evaluated.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("channel {label}: {what}")]
    Invalid { label: String, what: String },
}

/// Stage of the delivery chain a loss is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossStage {
    OnChipCoupling,
    Propagation,
    Grating,
    FiberFeedthrough,
    Cooldown,
}

impl LossStage {
    pub fn as_str(self) -> &'static str {
        match self {
            LossStage::OnChipCoupling => "on_chip_coupling",
            LossStage::Propagation => "propagation",
            LossStage::Grating => "grating",
            LossStage::FiberFeedthrough => "fiber_feedthrough",
            LossStage::Cooldown => "cooldown",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossEntry {
    pub stage: LossStage,
    pub loss_db: f64,
    /// Entry was inferred from other paths rather than measured directly.
    pub inferred: bool,
}

impl LossEntry {
    pub fn measured(stage: LossStage, loss_db: f64) -> Self {
        Self { stage, loss_db, inferred: false }
    }

    pub fn inferred(stage: LossStage, loss_db: f64) -> Self {
        Self { stage, loss_db, inferred: true }
    }

    pub fn provenance(&self) -> &'static str {
        if self.inferred {
            "inferred"
        } else {
            "measured"
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossLedger {
    pub entries: Vec<LossEntry>,
    /// Routing length, cm, when known.
    pub propagation_length_cm: Option<f64>,
    /// Waveguide loss rate, dB/cm, when known.
    pub propagation_rate_db_per_cm: Option<f64>,
}

/// Tolerance between a recorded propagation entry and rate x length.
pub const PROPAGATION_CONSISTENCY_DB: f64 = 0.05;

// Entries are summed on an integer micro-dB grid so ledger totals come out exact.
const MICRO_DB: f64 = 1e6;

impl LossLedger {
    pub fn new(entries: Vec<LossEntry>) -> Self {
        Self { entries, ..Default::default() }
    }

    pub fn with_propagation(mut self, rate_db_per_cm: f64, length_cm: f64) -> Self {
        self.propagation_rate_db_per_cm = Some(rate_db_per_cm);
        self.propagation_length_cm = Some(length_cm);
        self
    }

    pub fn total_db(&self) -> f64 {
        let micro: i64 = self
            .entries
            .iter()
            .map(|e| (e.loss_db * MICRO_DB).round() as i64)
            .sum();
        micro as f64 / MICRO_DB
    }

    pub fn any_inferred(&self) -> bool {
        self.entries.iter().any(|e| e.inferred)
    }

    pub fn stage_total(&self, stage: LossStage) -> f64 {
        let micro: i64 = self
            .entries
            .iter()
            .filter(|e| e.stage == stage)
            .map(|e| (e.loss_db * MICRO_DB).round() as i64)
            .sum();
        micro as f64 / MICRO_DB
    }

    fn validate(&self) -> Result<(), String> {
        if self.entries.is_empty() {
            return Err("ledger has no entries".into());
        }
        for (i, e) in self.entries.iter().enumerate() {
            if !(e.loss_db >= 0.0) || !e.loss_db.is_finite() {
                return Err(format!("entry {i} ({}) has negative or non-finite loss", e.stage.as_str()));
            }
        }
        if let (Some(rate), Some(len)) = (self.propagation_rate_db_per_cm, self.propagation_length_cm) {
            if rate < 0.0 || len < 0.0 {
                return Err("propagation rate and length must be non-negative".into());
            }
            let expected = propagation_loss(rate, len);
            let recorded = self.stage_total(LossStage::Propagation);
            if (expected - recorded).abs() > PROPAGATION_CONSISTENCY_DB {
                return Err(format!(
                    "propagation entry {recorded} dB disagrees with {rate} dB/cm x {len} cm = {expected:.3} dB"
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpticalChannel {
    pub label: String,
    /// Vacuum wavelength, m.
    pub wavelength: f64,
    /// Power launched into the fiber, W.
    pub fiber_power: f64,
    /// Single-mode routing waveguide width, m.
    pub waveguide_width: f64,
    pub ledger: LossLedger,
    /// Name of the grating coupler this channel exits through.
    pub grating: String,
}

impl OpticalChannel {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let err = |what: String| ChannelError::Invalid { label: self.label.clone(), what };
        if !(self.wavelength > 0.0) {
            return Err(err("wavelength must be positive".into()));
        }
        if !(self.fiber_power >= 0.0) {
            return Err(err("fiber power must be non-negative".into()));
        }
        if !(self.waveguide_width > 0.0) {
            return Err(err("waveguide width must be positive".into()));
        }
        self.ledger.validate().map_err(err)
    }
}

/// Sum of the channel's ledger entries, dB.
pub fn total_loss(channel: &OpticalChannel) -> f64 {
    channel.ledger.total_db()
}

/// Power leaving the grating, W.
pub fn delivered_power(channel: &OpticalChannel) -> f64 {
    channel.fiber_power * db_to_transmission(total_loss(channel))
}

/// Waveguide routing loss for a given rate (dB/cm) and length (cm).
pub fn propagation_loss(rate_db_per_cm: f64, length_cm: f64) -> f64 {
    rate_db_per_cm * length_cm
}

pub fn db_to_transmission(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub fn transmission_to_db(transmission: f64) -> f64 {
    -10.0 * transmission.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ledger(values: &[f64]) -> LossLedger {
        use LossStage::*;
        let stages = [OnChipCoupling, Propagation, Grating, FiberFeedthrough, Cooldown];
        LossLedger::new(
            values
                .iter()
                .zip(stages.iter().cycle())
                .map(|(&v, &s)| LossEntry::measured(s, v))
                .collect(),
        )
    }

    fn channel(power_w: f64, values: &[f64]) -> OpticalChannel {
        OpticalChannel {
            label: "t".into(),
            wavelength: 674e-9,
            fiber_power: power_w,
            waveguide_width: 500e-9,
            ledger: ledger(values),
            grating: "g".into(),
        }
    }

    #[test]
    fn table_totals() {
        assert_eq!(total_loss(&channel(1e-3, &[10.0, 0.4, 11.0, 3.0, 7.0])), 31.4);
        assert_eq!(total_loss(&channel(1e-3, &[10.0, 3.0, 12.0, 3.0, 7.0])), 35.0);
        assert_eq!(total_loss(&channel(1e-3, &[0.0])), 0.0);
    }

    #[test]
    fn delivered_power_examples() {
        let p = delivered_power(&channel(10e-3, &[10.0, 0.4, 11.0, 3.0, 7.0]));
        // 10 mW * 10^-3.14 = 7.2444 uW
        assert!((p * 1e6 - 7.244_359_600_749_9).abs() < 1e-9);
        assert_eq!(delivered_power(&channel(0.0, &[10.0])), 0.0);
        let p = delivered_power(&channel(1e-3, &[10.0]));
        assert!((p - 100e-6).abs() < 1e-18);
    }

    #[test]
    fn propagation_examples() {
        assert!((propagation_loss(0.53, 0.75) - 0.4).abs() < 0.005);
        assert_eq!(propagation_loss(7.0, 0.0), 0.0);
        assert!((propagation_loss(10.0, 0.3) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_propagation_is_rejected() {
        let mut c = channel(1e-3, &[10.0, 0.4, 11.0]);
        c.ledger = c.ledger.with_propagation(0.53, 0.75);
        assert!(c.validate().is_ok());
        c.ledger.propagation_length_cm = Some(2.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn negative_loss_is_rejected() {
        assert!(channel(1e-3, &[10.0, -1.0]).validate().is_err());
        assert!(channel(-1.0, &[10.0]).validate().is_err());
    }

    proptest! {
        #[test]
        fn db_round_trip(t in 1e-9f64..1.0) {
            let back = db_to_transmission(transmission_to_db(t));
            prop_assert!(((back - t) / t).abs() < 1e-12);
        }

        #[test]
        fn power_linear_and_monotone(p in 0.0f64..1.0, a in 0.0f64..60.0, b in 0.0f64..60.0) {
            let pa = delivered_power(&channel(p, &[a]));
            let pb = delivered_power(&channel(p, &[b]));
            if a < b { prop_assert!(pa >= pb); }
            let p2 = delivered_power(&channel(2.0 * p, &[a]));
            prop_assert!((p2 - 2.0 * pa).abs() <= 1e-15 + 1e-12 * p2);
        }
    }
}
