//! JSON scenario files: a schema with unit-suffixed keys, conversion into the domain
//! types, cross-reference validation and a content hash.
//!
//! Every float in the file carries its unit in the key (`_nm`, `_um`, `_mhz`, `_db`, ...).
//! Inside the crate everything is SI.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::beams::{AxisLine, BeamField};
use crate::channels::{delivered_power, LossEntry, LossLedger, LossStage, OpticalChannel};
use crate::coherence::{Delivery, VibrationScenario};
use crate::consts::{AMU, E_CHARGE, KHZ, MHZ, MS, MW, NM, TAU, UM, US, UW};
use crate::detection::DetectionModel;
use crate::ion::{
    lamb_dicke, FluorescenceParams, IonSpecies, MotionalState, RabiCalibration, ShelveParams,
};
use crate::photonics::{GratingSpec, LayerStack};
use crate::trap::{ElectrodePatch, ElectrodeRole, TrapModel};

pub const SCHEMA_VERSION: u32 = 1;
pub const FIXTURE_NAME: &str = "paper-2020-srplus";
/// The shipped reference fixture.
pub const FIXTURE_JSON: &str = include_str!("../fixtures/paper-2020-srplus.json");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {message}")]
    Io { path: String, message: String },
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid value at `{path}`: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: impl Into<String>, message: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Invalid { path: path.into(), message: message.to_string() }
}

// ---------------------------------------------------------------- file schema

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    pub stack: StackDto,
    pub channels: Vec<ChannelDto>,
    pub gratings: Vec<GratingDto>,
    pub beams: Vec<BeamDto>,
    pub profiling: ProfilingDto,
    pub trap: TrapDto,
    pub species: SpeciesDto,
    pub rabi: RabiDto,
    pub fluorescence: FluorescenceDto,
    pub quench: QuenchDto,
    pub shelve: ShelveDto,
    pub motion: MotionDto,
    pub spectrum: SpectrumDto,
    pub detection: DetectionDto,
    pub vibration: VibrationDto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackDto {
    pub core_index: f64,
    pub clad_index: f64,
    pub core_thickness_nm: f64,
    pub etch_depth_nm: f64,
    #[serde(default)]
    pub core_dispersion_per_um: f64,
    #[serde(default)]
    pub clad_dispersion_per_um: f64,
    /// Core index assumed when the grating periods were chosen.
    pub design_core_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossDto {
    pub stage: LossStage,
    pub loss_db: f64,
    #[serde(default)]
    pub inferred: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDto {
    pub label: String,
    pub wavelength_nm: f64,
    pub fiber_power_mw: f64,
    pub waveguide_width_nm: f64,
    pub grating: String,
    pub losses: Vec<LossDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propagation_rate_db_per_cm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propagation_length_cm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GratingDto {
    pub name: String,
    pub design_wavelength_nm: f64,
    pub period_nm: f64,
    pub n_eff_tooth: f64,
    pub n_eff_gap: f64,
    pub duty_cycle: f64,
    pub emitter_width_um: f64,
    pub transverse_focal_length_um: f64,
    pub position_um: [f64; 3],
    pub propagation_azimuth: [f64; 2],
}

/// A beam above the chip. When `origin_um` and `direction` are both omitted the beam is
/// derived from its channel's grating (first-order emission at `wavelength_nm`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamDto {
    pub name: String,
    pub channel: String,
    pub wavelength_nm: f64,
    /// Defaults to the channel's delivered power.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_uw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_um: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<[f64; 3]>,
    pub waist_focused_um: f64,
    pub waist_unfocused_um: f64,
    pub focus_distance_focused_um: f64,
    pub focus_distance_unfocused_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineDto {
    pub x_um: f64,
    pub y_start_um: f64,
    pub y_stop_um: f64,
    pub step_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilingDto {
    /// Height of the microscope line cuts.
    pub cut_height_um: f64,
    pub cut_line: LineDto,
    /// Ion positions (via shuttling) for in-situ profiles.
    pub ion_scan: LineDto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectrodeDto {
    pub name: String,
    pub role: ElectrodeRole,
    pub x1_um: f64,
    pub x2_um: f64,
    pub y1_um: f64,
    pub y2_um: f64,
    pub voltage_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapDto {
    pub rf_frequency_mhz: f64,
    pub ion_mass_amu: f64,
    pub ion_charge_e: f64,
    #[serde(default)]
    pub stray_field_v_per_m: [f64; 3],
    pub electrodes: Vec<ElectrodeDto>,
    pub target_height_um: f64,
    pub axial_frequency_mhz: f64,
    pub alt_axial_frequency_mhz: f64,
    pub shuttle: LineDto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesDto {
    pub mass_amu: f64,
    pub qubit_wavelength_nm: f64,
    pub d52_lifetime_ms: f64,
    pub s_p_wavelength_nm: f64,
    pub repump_wavelengths_nm: [f64; 2],
    pub shelve_proxy_wavelength_nm: f64,
    pub quantizing_field_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiDto {
    pub beam: String,
    pub pi_time_us: f64,
    pub reference_intensity_w_per_m2: f64,
    /// Quadrupole geometry factor handed to the first-principles estimate.
    pub geometry_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluorescenceDto {
    pub beam_422: String,
    pub beam_1092: String,
    pub max_rate_per_s: f64,
    pub saturation_422_w_per_m2: f64,
    pub saturation_1092_w_per_m2: f64,
    /// Uniform free-space partner beams used while profiling the integrated ones.
    pub free_space_422_w_per_m2: f64,
    pub free_space_1092_w_per_m2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuenchDto {
    pub beam: String,
    pub k_quench_m2_per_j: f64,
    pub duration_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShelveDto {
    pub beam: String,
    pub p_peak: f64,
    pub i_peak_w_per_m2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionDto {
    pub nbar: f64,
    pub axial_frequency_mhz: f64,
    /// Cosine between the 674-nm k-vector and the axial mode.
    pub projection_cosine: f64,
    pub heating_rate_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumDto {
    /// Attenuated carrier drive used for the sideband spectrum.
    pub carrier_rabi_khz: f64,
    pub probe_time_us: f64,
    pub span_mhz: f64,
    pub step_khz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionDto {
    pub ion_rate_per_s: f64,
    pub background_rate_per_s: f64,
    pub window_ms: f64,
    pub d52_lifetime_ms: f64,
    pub bright_rate_includes_background: bool,
    pub monte_carlo_shots: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VibrationDto {
    pub frequency_hz: f64,
    pub qubit_wavelength_nm: f64,
    pub baseline_coherence_us: f64,
    /// Peak Doppler shift at the largest acceleration of the sweep.
    pub peak_doppler_khz: f64,
    pub acceleration_points: usize,
    pub shots_per_point: usize,
    pub analysis_phases: usize,
    pub delays_us: Vec<f64>,
}

// ---------------------------------------------------------------- domain view

#[derive(Debug, Clone, PartialEq)]
pub struct ProfilingSetup {
    pub cut_height: f64,
    pub cut_line: AxisLine,
    pub ion_scan: AxisLine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluorescenceSetup {
    pub beam_422: String,
    pub beam_1092: String,
    pub params: FluorescenceParams,
    pub free_space_422: f64,
    pub free_space_1092: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSetup {
    pub base: VibrationScenario,
    /// Largest peak acceleration of the sweep, m/s^2.
    pub a_max: f64,
    pub points: usize,
    pub shots: usize,
    pub phases: usize,
    pub delays: Vec<f64>,
}

/// A validated scenario in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    /// sha256 of the canonical JSON form, lowercase hex.
    pub hash: String,
    pub seed: u64,
    pub stack: LayerStack,
    pub design_stack: LayerStack,
    pub channels: Vec<OpticalChannel>,
    pub gratings: Vec<GratingSpec>,
    /// Design wavelength per grating, same order as `gratings`.
    pub grating_wavelengths: Vec<f64>,
    pub beams: Vec<BeamField>,
    pub profiling: ProfilingSetup,
    pub trap: TrapModel,
    pub target_height: f64,
    pub axial_frequency: f64,
    pub alt_axial_frequency: f64,
    pub shuttle: AxisLine,
    pub species: IonSpecies,
    pub rabi_beam: String,
    pub rabi: RabiCalibration,
    pub geometry_factor: f64,
    pub fluorescence: FluorescenceSetup,
    pub quench_beam: String,
    pub k_quench: f64,
    pub quench_duration: f64,
    pub shelve_beam: String,
    pub shelve: ShelveParams,
    pub motion: MotionalState,
    /// Angular carrier Rabi frequency of the spectroscopy probe.
    pub spectrum_rabi: f64,
    pub spectrum_probe_time: f64,
    pub spectrum_span: f64,
    pub spectrum_step: f64,
    pub detection: DetectionModel,
    pub monte_carlo_shots: u64,
    pub sweep: SweepSetup,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        Self::from_file(file)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }

    /// The shipped reference fixture.
    pub fn fixture() -> Self {
        Self::from_json(FIXTURE_JSON).expect("shipped fixture is valid")
    }

    pub fn beam(&self, name: &str) -> Option<&BeamField> {
        self.beams.iter().find(|b| b.name == name)
    }

    pub fn channel(&self, label: &str) -> Option<&OpticalChannel> {
        self.channels.iter().find(|c| c.label == label)
    }

    pub fn grating(&self, name: &str) -> Option<&GratingSpec> {
        self.gratings.iter().find(|g| g.name == name)
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        if file.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", file.schema_version),
            ));
        }
        let hash = scenario_hash(&file);

        let s = &file.stack;
        let stack = LayerStack {
            core_index: s.core_index,
            clad_index: s.clad_index,
            core_thickness: s.core_thickness_nm * NM,
            etch_depth: s.etch_depth_nm * NM,
            core_dispersion: s.core_dispersion_per_um / UM,
            clad_dispersion: s.clad_dispersion_per_um / UM,
        };
        stack.validate().map_err(|e| invalid("stack", e))?;
        let design_stack = LayerStack { core_index: s.design_core_index, ..stack };
        design_stack.validate().map_err(|e| invalid("stack.design_core_index", e))?;

        let mut gratings = Vec::new();
        let mut grating_wavelengths = Vec::new();
        unique_names(file.gratings.iter().map(|g| g.name.as_str()), "gratings")?;
        for (i, g) in file.gratings.iter().enumerate() {
            let az = Vector2::from(g.propagation_azimuth);
            let spec = GratingSpec {
                name: g.name.clone(),
                period: g.period_nm * NM,
                n_eff_tooth: g.n_eff_tooth,
                n_eff_gap: g.n_eff_gap,
                duty_cycle: g.duty_cycle,
                emitter_width: g.emitter_width_um * UM,
                transverse_focal_length: g.transverse_focal_length_um * UM,
                position: Vector3::from(g.position_um) * UM,
                propagation_azimuth: az,
            };
            spec.validate(&stack).map_err(|e| invalid(format!("gratings[{i}]"), e))?;
            positive(g.design_wavelength_nm, format!("gratings[{i}].design_wavelength_nm"))?;
            gratings.push(spec);
            grating_wavelengths.push(g.design_wavelength_nm * NM);
        }

        unique_names(file.channels.iter().map(|c| c.label.as_str()), "channels")?;
        let mut channels = Vec::new();
        for (i, c) in file.channels.iter().enumerate() {
            if !gratings.iter().any(|g| g.name == c.grating) {
                return Err(invalid(format!("channels[{i}].grating"), format!("unknown grating `{}`", c.grating)));
            }
            let mut ledger = LossLedger::new(
                c.losses
                    .iter()
                    .map(|l| if l.inferred { LossEntry::inferred(l.stage, l.loss_db) } else { LossEntry::measured(l.stage, l.loss_db) })
                    .collect(),
            );
            match (c.propagation_rate_db_per_cm, c.propagation_length_cm) {
                (Some(r), Some(l)) => ledger = ledger.with_propagation(r, l),
                (None, None) => {}
                _ => {
                    return Err(invalid(
                        format!("channels[{i}]"),
                        "propagation_rate_db_per_cm and propagation_length_cm go together",
                    ))
                }
            }
            let ch = OpticalChannel {
                label: c.label.clone(),
                wavelength: c.wavelength_nm * NM,
                fiber_power: c.fiber_power_mw * MW,
                waveguide_width: c.waveguide_width_nm * NM,
                ledger,
                grating: c.grating.clone(),
            };
            ch.validate().map_err(|e| invalid(format!("channels[{i}]"), e))?;
            channels.push(ch);
        }

        unique_names(file.beams.iter().map(|b| b.name.as_str()), "beams")?;
        let mut beams = Vec::new();
        for (i, b) in file.beams.iter().enumerate() {
            let path = format!("beams[{i}]");
            let ch = channels
                .iter()
                .find(|c| c.label == b.channel)
                .ok_or_else(|| invalid(format!("{path}.channel"), format!("unknown channel `{}`", b.channel)))?;
            let wavelength = b.wavelength_nm * NM;
            positive(b.wavelength_nm, format!("{path}.wavelength_nm"))?;
            let (origin, direction) = match (b.origin_um, b.direction) {
                (Some(o), Some(d)) => {
                    let d = Vector3::from(d);
                    if !(d.norm() > 0.0) {
                        return Err(invalid(format!("{path}.direction"), "zero vector"));
                    }
                    (Vector3::from(o) * UM, d.normalize())
                }
                (None, None) => {
                    let g = gratings.iter().find(|g| g.name == ch.grating).expect("checked above");
                    let d = g
                        .reindexed(&stack, wavelength)
                        .and_then(|g| g.beam_direction(wavelength, 1))
                        .map_err(|e| invalid(&path, e))?;
                    (g.position, d)
                }
                _ => return Err(invalid(&path, "origin_um and direction go together")),
            };
            let beam = BeamField {
                name: b.name.clone(),
                wavelength,
                power: b.power_uw.map(|p| p * UW).unwrap_or_else(|| delivered_power(ch)),
                origin,
                direction,
                waist_focused: b.waist_focused_um * UM,
                waist_unfocused: b.waist_unfocused_um * UM,
                focus_distance_focused: b.focus_distance_focused_um * UM,
                focus_distance_unfocused: b.focus_distance_unfocused_um * UM,
            };
            beam.validate().map_err(|e| invalid(&path, e))?;
            beams.push(beam);
        }
        let has_beam = |name: &str, path: &str| -> Result<(), ScenarioError> {
            if beams.iter().any(|b| b.name == name) {
                Ok(())
            } else {
                Err(invalid(path, format!("unknown beam `{name}`")))
            }
        };

        let p = &file.profiling;
        positive(p.cut_height_um, "profiling.cut_height_um")?;
        let profiling = ProfilingSetup {
            cut_height: p.cut_height_um * UM,
            cut_line: axis_line(&p.cut_line, "profiling.cut_line")?,
            ion_scan: axis_line(&p.ion_scan, "profiling.ion_scan")?,
        };

        let t = &file.trap;
        unique_names(t.electrodes.iter().map(|e| e.name.as_str()), "trap.electrodes")?;
        let patches: Vec<ElectrodePatch> = t
            .electrodes
            .iter()
            .map(|e| {
                ElectrodePatch::new(&e.name, (e.x1_um * UM, e.x2_um * UM), (e.y1_um * UM, e.y2_um * UM), e.role, e.voltage_v)
            })
            .collect();
        let trap = TrapModel {
            patches,
            rf_frequency: TAU * t.rf_frequency_mhz * MHZ,
            ion_mass: t.ion_mass_amu * AMU,
            ion_charge: t.ion_charge_e * E_CHARGE,
            stray_field: Vector3::from(t.stray_field_v_per_m),
        };
        trap.validate().map_err(|e| invalid("trap", e))?;
        positive(t.target_height_um, "trap.target_height_um")?;
        positive(t.axial_frequency_mhz, "trap.axial_frequency_mhz")?;
        positive(t.alt_axial_frequency_mhz, "trap.alt_axial_frequency_mhz")?;

        let sp = &file.species;
        let species = IonSpecies {
            mass: sp.mass_amu * AMU,
            qubit_wavelength: sp.qubit_wavelength_nm * NM,
            d52_lifetime: sp.d52_lifetime_ms * MS,
            s_p_wavelength: sp.s_p_wavelength_nm * NM,
            repump_wavelengths: sp.repump_wavelengths_nm.map(|l| l * NM),
            shelve_proxy_wavelength: sp.shelve_proxy_wavelength_nm * NM,
            quantizing_field: sp.quantizing_field_g * 1e-4,
        };
        species.validate().map_err(|e| invalid("species", e))?;

        has_beam(&file.rabi.beam, "rabi.beam")?;
        let rabi = RabiCalibration::from_pi_time(file.rabi.reference_intensity_w_per_m2, file.rabi.pi_time_us * US);
        rabi.validate().map_err(|e| invalid("rabi", e))?;
        if !(0.0..=1.0).contains(&file.rabi.geometry_factor) {
            return Err(invalid("rabi.geometry_factor", "must lie in [0, 1]"));
        }

        let f = &file.fluorescence;
        has_beam(&f.beam_422, "fluorescence.beam_422")?;
        has_beam(&f.beam_1092, "fluorescence.beam_1092")?;
        positive(f.max_rate_per_s, "fluorescence.max_rate_per_s")?;
        positive(f.saturation_422_w_per_m2, "fluorescence.saturation_422_w_per_m2")?;
        positive(f.saturation_1092_w_per_m2, "fluorescence.saturation_1092_w_per_m2")?;
        positive(f.free_space_422_w_per_m2, "fluorescence.free_space_422_w_per_m2")?;
        positive(f.free_space_1092_w_per_m2, "fluorescence.free_space_1092_w_per_m2")?;
        let fluorescence = FluorescenceSetup {
            beam_422: f.beam_422.clone(),
            beam_1092: f.beam_1092.clone(),
            params: FluorescenceParams {
                max_rate: f.max_rate_per_s,
                saturation_422: f.saturation_422_w_per_m2,
                saturation_1092: f.saturation_1092_w_per_m2,
            },
            free_space_422: f.free_space_422_w_per_m2,
            free_space_1092: f.free_space_1092_w_per_m2,
        };

        has_beam(&file.quench.beam, "quench.beam")?;
        positive(file.quench.k_quench_m2_per_j, "quench.k_quench_m2_per_j")?;
        positive(file.quench.duration_us, "quench.duration_us")?;
        has_beam(&file.shelve.beam, "shelve.beam")?;
        if !(file.shelve.p_peak > 0.0 && file.shelve.p_peak <= 1.0) {
            return Err(invalid("shelve.p_peak", "must lie in (0, 1]"));
        }
        positive(file.shelve.i_peak_w_per_m2, "shelve.i_peak_w_per_m2")?;

        let m = &file.motion;
        positive(m.axial_frequency_mhz, "motion.axial_frequency_mhz")?;
        if !(m.projection_cosine.abs() <= 1.0) {
            return Err(invalid("motion.projection_cosine", "must lie in [-1, 1]"));
        }
        let mode_frequency = TAU * m.axial_frequency_mhz * MHZ;
        let motion = MotionalState {
            nbar: m.nbar,
            mode_frequency,
            lamb_dicke: lamb_dicke(&species, mode_frequency, m.projection_cosine),
            heating_rate: m.heating_rate_per_s,
        };
        motion.validate().map_err(|e| invalid("motion", e))?;

        let sc = &file.spectrum;
        positive(sc.carrier_rabi_khz, "spectrum.carrier_rabi_khz")?;
        positive(sc.probe_time_us, "spectrum.probe_time_us")?;
        positive(sc.span_mhz, "spectrum.span_mhz")?;
        positive(sc.step_khz, "spectrum.step_khz")?;

        let d = &file.detection;
        let detection = DetectionModel {
            ion_rate: d.ion_rate_per_s,
            background_rate: d.background_rate_per_s,
            window: d.window_ms * MS,
            d_lifetime: d.d52_lifetime_ms * MS,
            bright_rate_includes_background: d.bright_rate_includes_background,
        };
        detection.validate().map_err(|e| invalid("detection", e))?;
        if d.monte_carlo_shots == 0 {
            return Err(invalid("detection.monte_carlo_shots", "must be positive"));
        }

        let v = &file.vibration;
        positive(v.frequency_hz, "vibration.frequency_hz")?;
        positive(v.qubit_wavelength_nm, "vibration.qubit_wavelength_nm")?;
        positive(v.baseline_coherence_us, "vibration.baseline_coherence_us")?;
        positive(v.peak_doppler_khz, "vibration.peak_doppler_khz")?;
        if v.acceleration_points < 2 {
            return Err(invalid("vibration.acceleration_points", "need at least 2"));
        }
        if v.shots_per_point < 100 {
            return Err(invalid("vibration.shots_per_point", "need at least 100"));
        }
        if v.analysis_phases < 6 {
            return Err(invalid("vibration.analysis_phases", "need at least 6"));
        }
        if v.delays_us.len() < 3 || v.delays_us.windows(2).any(|w| !(w[1] > w[0])) || v.delays_us[0] < 0.0 {
            return Err(invalid("vibration.delays_us", "need at least 3 increasing non-negative delays"));
        }
        let omega_v = TAU * v.frequency_hz;
        let lambda_q = v.qubit_wavelength_nm * NM;
        let amplitude = VibrationScenario::amplitude_for_doppler(v.peak_doppler_khz * KHZ, omega_v, lambda_q);
        let base = VibrationScenario {
            amplitude: 0.0,
            frequency: omega_v,
            delivery: Delivery::FreeSpace,
            qubit_wavelength: lambda_q,
            baseline_coherence: v.baseline_coherence_us * US,
        };
        let sweep = SweepSetup {
            base,
            a_max: amplitude * omega_v * omega_v,
            points: v.acceleration_points,
            shots: v.shots_per_point,
            phases: v.analysis_phases,
            delays: v.delays_us.iter().map(|d| d * US).collect(),
        };

        Ok(Scenario {
            hash,
            seed: file.seed,
            stack,
            design_stack,
            channels,
            gratings,
            grating_wavelengths,
            beams,
            profiling,
            trap,
            target_height: t.target_height_um * UM,
            axial_frequency: TAU * t.axial_frequency_mhz * MHZ,
            alt_axial_frequency: TAU * t.alt_axial_frequency_mhz * MHZ,
            shuttle: axis_line(&t.shuttle, "trap.shuttle")?,
            species,
            rabi_beam: file.rabi.beam.clone(),
            rabi,
            geometry_factor: file.rabi.geometry_factor,
            fluorescence,
            quench_beam: file.quench.beam.clone(),
            k_quench: file.quench.k_quench_m2_per_j,
            quench_duration: file.quench.duration_us * US,
            shelve_beam: file.shelve.beam.clone(),
            shelve: ShelveParams { p_peak: file.shelve.p_peak, i_peak: file.shelve.i_peak_w_per_m2 },
            motion,
            spectrum_rabi: TAU * sc.carrier_rabi_khz * KHZ,
            spectrum_probe_time: sc.probe_time_us * US,
            spectrum_span: sc.span_mhz * MHZ,
            spectrum_step: sc.step_khz * KHZ,
            detection,
            monte_carlo_shots: d.monte_carlo_shots,
            sweep,
            file,
        })
    }
}

fn positive(v: f64, path: impl Into<String>) -> Result<(), ScenarioError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(path, format!("must be positive and finite, got {v}")))
    }
}

fn unique_names<'a>(names: impl Iterator<Item = &'a str>, path: &str) -> Result<(), ScenarioError> {
    let mut seen = HashSet::new();
    for (i, n) in names.enumerate() {
        if !seen.insert(n) {
            return Err(invalid(format!("{path}[{i}]"), format!("duplicate name `{n}`")));
        }
    }
    Ok(())
}

fn axis_line(l: &LineDto, path: &str) -> Result<AxisLine, ScenarioError> {
    positive(l.step_um, format!("{path}.step_um"))?;
    if !(l.y_stop_um > l.y_start_um) {
        return Err(invalid(path, "y_stop_um must exceed y_start_um"));
    }
    Ok(AxisLine { x: l.x_um * UM, y_start: l.y_start_um * UM, y_stop: l.y_stop_um * UM, step: l.step_um * UM })
}

/// Canonical JSON text of a scenario (pretty, fields in schema order, trailing newline).
pub fn to_canonical_json(file: &ScenarioFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("scenario serializes");
    s.push('\n');
    s
}

/// sha256 of the canonical JSON form, lowercase hex.
pub fn scenario_hash(file: &ScenarioFile) -> String {
    let digest = Sha256::digest(to_canonical_json(file).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
