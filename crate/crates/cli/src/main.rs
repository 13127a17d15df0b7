//! `chiptrap`: run pipeline stages of a chip scenario from the command line.
//!
//! Exit status: 0 on success, 1 when the scenario file is unreadable or violates the
//! schema, 2 on a numerical failure, 3 when `reproduce-paper` completes with failing
//! checks.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use chiptrap::consts::{MHZ, TAU, UM, US};
use chiptrap::output::{json_document, num, svg_plot, write_atomic, Series, Table};
use chiptrap::reproduce::{self as rp, ProbeKind};
use chiptrap::scenario::{Scenario, FIXTURE_NAME};
use chiptrap::trap::to_hz;

#[derive(Parser)]
#[command(name = "chiptrap", version, about = "Photonics-integrated ion trap simulation")]
struct Cli {
    /// Scenario JSON file; the shipped fixture when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    scenario: Option<PathBuf>,
    /// Directory for result files; results go to stdout when omitted.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Random seed, overriding the scenario's.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }
}

/// Scenario given positionally, as an alternative to `--scenario`.
#[derive(Args, Clone, Default)]
struct Positional {
    #[arg(id = "scenario_file", value_name = "SCENARIO")]
    scenario: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Loss ledger and delivered power per channel.
    Loss(Positional),
    #[command(subcommand)]
    Grating(GratingCmd),
    #[command(subcommand)]
    Beam(BeamCmd),
    #[command(subcommand)]
    Trap(TrapCmd),
    #[command(subcommand)]
    Scan(ScanCmd),
    /// Carrier and sideband excitation spectrum.
    Spectrum(Positional),
    #[command(subcommand)]
    Detect(DetectCmd),
    #[command(subcommand)]
    Ramsey(RamseyCmd),
    /// Run every stage and compare with the published values.
    ReproducePaper(Positional),
}

#[derive(Subcommand)]
enum GratingCmd {
    /// Periods that aim each grating at the trap center.
    Design(Positional),
    /// Emission angle of every beam.
    Angle(Positional),
    /// Propagating diffraction orders.
    Orders(Positional),
    /// Crossing height of two beams, designed and fabricated.
    Intersect {
        #[arg(long, default_value = "674")]
        a: String,
        #[arg(long, default_value = "422")]
        b: String,
        #[command(flatten)]
        pos: Positional,
    },
}

#[derive(Subcommand)]
enum BeamCmd {
    /// Reconstruct a beam from a synthetic focal stack.
    Profile {
        #[arg(long)]
        beam: String,
        #[command(flatten)]
        pos: Positional,
    },
    /// Intensity along the trap axis at the profiling height.
    Cut {
        #[arg(long)]
        beam: String,
        #[command(flatten)]
        pos: Positional,
    },
}

#[derive(Subcommand)]
enum TrapCmd {
    /// RF null along the shuttle line.
    Null(Positional),
    /// Solve an axial well and report its secular frequencies.
    Freqs {
        /// Axial position, um.
        #[arg(long, default_value_t = 0.0)]
        y: f64,
        /// Axial frequency, MHz; the scenario's when omitted.
        #[arg(long)]
        axial_mhz: Option<f64>,
        #[command(flatten)]
        pos: Positional,
    },
    /// Wells along the shuttle line.
    Shuttle(Positional),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProbeArg {
    Rabi,
    Fluor,
    Quench,
    Shelve,
}

#[derive(Clone, Copy, ValueEnum)]
enum FluorBeam {
    #[value(name = "422")]
    B422,
    #[value(name = "1092")]
    B1092,
}

#[derive(Subcommand)]
enum ScanCmd {
    /// Profile a beam with the ion by shuttling it along the trap axis.
    ProfileIon {
        #[arg(long, value_enum)]
        probe: ProbeArg,
        /// Beam profiled by the fluorescence probe.
        #[arg(long, value_enum, default_value = "422")]
        fluor_beam: FluorBeam,
        #[command(flatten)]
        pos: Positional,
    },
}

#[derive(Subcommand)]
enum DetectCmd {
    /// Threshold discrimination fidelity.
    Fidelity(Positional),
}

#[derive(Subcommand)]
enum RamseyCmd {
    /// Coherence time against vibration amplitude, free space and integrated.
    Sweep(Positional),
}

/// One command's result in every supported form.
struct Output {
    stem: String,
    default: Format,
    table: Option<Table>,
    json: Value,
    plot: Option<Plot>,
    /// Also write the JSON summary next to a CSV table.
    with_summary: bool,
}

struct Plot {
    title: String,
    x: String,
    y: String,
    series: Vec<Series>,
}

impl Output {
    fn new(stem: &str, default: Format, table: Option<Table>, json: Value) -> Self {
        Self { stem: stem.into(), default, table, json, plot: None, with_summary: false }
    }

    fn plot(mut self, title: &str, x: &str, y: &str, series: Vec<Series>) -> Self {
        self.plot = Some(Plot { title: title.into(), x: x.into(), y: y.into(), series });
        self
    }
}

enum Failure {
    Chiptrap(chiptrap::Error),
    Usage(String),
}

impl From<chiptrap::Error> for Failure {
    fn from(e: chiptrap::Error) -> Self {
        Failure::Chiptrap(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => Cli::command().error(clap::error::ErrorKind::ArgumentConflict, msg).exit(),
        Err(Failure::Chiptrap(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_schema() { 1 } else { 2 })
        }
    }
}

fn positional(cmd: &Command) -> Option<&Path> {
    let p = match cmd {
        Command::Loss(p) | Command::Spectrum(p) | Command::ReproducePaper(p) => p,
        Command::Grating(GratingCmd::Design(p) | GratingCmd::Angle(p) | GratingCmd::Orders(p)) => p,
        Command::Grating(GratingCmd::Intersect { pos, .. }) => pos,
        Command::Beam(BeamCmd::Profile { pos, .. } | BeamCmd::Cut { pos, .. }) => pos,
        Command::Trap(TrapCmd::Null(p) | TrapCmd::Shuttle(p)) => p,
        Command::Trap(TrapCmd::Freqs { pos, .. }) => pos,
        Command::Scan(ScanCmd::ProfileIon { pos, .. }) => pos,
        Command::Detect(DetectCmd::Fidelity(p)) => p,
        Command::Ramsey(RamseyCmd::Sweep(p)) => p,
    };
    p.scenario.as_deref()
}

/// `--scenario`, else the positional argument, else the shipped fixture. A bare
/// fixture file name that does not exist on disk also selects the shipped fixture.
fn load_scenario(cli: &Cli) -> Result<Scenario, Failure> {
    let path = match (&cli.scenario, positional(&cli.command)) {
        (Some(a), Some(b)) if a != b => {
            return Err(Failure::Usage(format!("scenario given twice: {} and {}", a.display(), b.display())))
        }
        (Some(a), _) => Some(a.as_path()),
        (None, b) => b,
    };
    match path {
        None => Ok(Scenario::fixture()),
        Some(p) if !p.exists() && p.file_stem().is_some_and(|s| s == FIXTURE_NAME) => Ok(Scenario::fixture()),
        Some(p) => Ok(Scenario::load(p).map_err(chiptrap::Error::from)?),
    }
}

fn run(cli: &Cli) -> Result<ExitCode, Failure> {
    let scn = load_scenario(cli)?;
    let seed = cli.seed.unwrap_or(scn.seed);
    let out = match &cli.command {
        Command::ReproducePaper(_) => return reproduce(cli, &scn, seed),
        Command::Ramsey(RamseyCmd::Sweep(_)) => {
            let Some(seed) = cli.seed else {
                return Err(Failure::Usage("`ramsey sweep` requires --seed".into()));
            };
            ramsey(&scn, seed)?
        }
        Command::Loss(_) => loss(&scn),
        Command::Grating(g) => grating(&scn, g)?,
        Command::Beam(b) => beam(&scn, b)?,
        Command::Trap(t) => trap(&scn, t)?,
        Command::Scan(ScanCmd::ProfileIon { probe, fluor_beam, .. }) => scan(&scn, *probe, *fluor_beam)?,
        Command::Spectrum(_) => spectrum(&scn),
        Command::Detect(DetectCmd::Fidelity(_)) => detect(&scn),
    };
    emit(cli, &scn, out)?;
    Ok(ExitCode::SUCCESS)
}

fn emit(cli: &Cli, scn: &Scenario, out: Output) -> Result<(), Failure> {
    let fmt = cli.format.unwrap_or(out.default);
    let h = &scn.hash;
    let body = match fmt {
        Format::Csv => match &out.table {
            Some(t) => t.to_csv(h),
            None => return Err(Failure::Usage(format!("`{}` has no CSV form; use --format json", out.stem))),
        },
        Format::Json => json_document(h, out.json.clone()),
        Format::Svg => match &out.plot {
            Some(p) => svg_plot(h, &p.title, &p.x, &p.y, &p.series),
            None => return Err(Failure::Usage(format!("`{}` has no plot", out.stem))),
        },
    };
    let summary = (fmt == Format::Csv && out.with_summary).then(|| json_document(h, out.json.clone()));
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(chiptrap::Error::from)?;
            write_atomic(&dir.join(format!("{}.{}", out.stem, fmt.ext())), &body).map_err(chiptrap::Error::from)?;
            if let Some(s) = summary {
                write_atomic(&dir.join(format!("{}.json", out.stem)), &s).map_err(chiptrap::Error::from)?;
            }
        }
        None => {
            stdout(&body);
            if let Some(s) = summary {
                stdout(&s);
            }
        }
    }
    Ok(())
}

/// Print, tolerating a closed pipe.
fn stdout(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn reproduce(cli: &Cli, scn: &Scenario, seed: u64) -> Result<ExitCode, Failure> {
    let report = rp::reproduce(scn, seed)?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("reproduce-out"));
    report.write(&dir)?;
    let mut text: String = report.checks.iter().map(|c| c.line() + "\n").collect();
    let failed = report.checks.iter().filter(|c| !c.pass).count();
    text += &format!("{} checks, {} failed; results in {}\n", report.checks.len(), failed, dir.display());
    stdout(&text);
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn loss(scn: &Scenario) -> Output {
    let rows = rp::loss_rows(scn);
    Output::new("loss", Format::Csv, Some(rp::loss_table(&rows)), rp::loss_json(&rows))
}

fn grating(scn: &Scenario, cmd: &GratingCmd) -> chiptrap::Result<Output> {
    Ok(match cmd {
        GratingCmd::Design(_) => {
            let mut t = Table::new(&[
                "grating",
                "wavelength_nm",
                "target_angle_deg",
                "design_n_eff",
                "period_nm",
                "scenario_period_nm",
                "recovered_angle_deg",
            ]);
            for d in rp::grating_designs(scn)? {
                t.push(vec![
                    d.grating,
                    num(d.wavelength * 1e9),
                    num(d.target_angle.to_degrees()),
                    num(d.design_n_eff),
                    num(d.period * 1e9),
                    num(d.scenario_period * 1e9),
                    num(d.recovered_angle.to_degrees()),
                ]);
            }
            let j = t.to_json();
            Output::new("grating-design", Format::Csv, Some(t), j)
        }
        GratingCmd::Angle(_) => {
            let mut t = Table::new(&["beam", "grating", "wavelength_nm", "n_eff", "angle_deg", "design_angle_deg"]);
            for a in rp::grating_angles(scn)? {
                t.push(vec![
                    a.beam,
                    a.grating,
                    num(a.wavelength * 1e9),
                    num(a.n_eff),
                    num(a.angle.to_degrees()),
                    num(a.design_angle.to_degrees()),
                ]);
            }
            let j = t.to_json();
            Output::new("grating-angle", Format::Csv, Some(t), j)
        }
        GratingCmd::Orders(_) => {
            let mut t = Table::new(&["grating", "wavelength_nm", "order", "angle_deg"]);
            let mut records = Vec::new();
            for (g, l, orders) in rp::grating_orders(scn) {
                for &(m, a) in &orders {
                    t.push(vec![g.clone(), num(l * 1e9), m.to_string(), num(a.to_degrees())]);
                }
                records.push(json!({
                    "grating": g,
                    "wavelength_nm": l * 1e9,
                    "period_nm": rp::grating_of(scn, &g)?.period * 1e9,
                    "orders": orders.iter().map(|&(m, a)| json!({"order": m, "angle_deg": a.to_degrees()})).collect::<Vec<_>>(),
                }));
            }
            let j = serde_json::Value::Array(records);
            Output::new("grating-orders", Format::Csv, Some(t), j)
        }
        GratingCmd::Intersect { a, b, .. } => {
            let c = rp::grating_crossing(scn, a, b)?;
            let j = json!({
                "beams": [a, b],
                "gratings": [c.grating_a, c.grating_b],
                "design_height_um": c.design.height * 1e6,
                "height_um": c.fabricated.height * 1e6,
                "index_error": c.index_error,
                "dz_dn": c.design.dz_dn * 1e6,
                "shifted_height_um": c.shifted.height * 1e6,
                "miss_distance_um": c.fabricated.miss_distance * 1e6,
            });
            Output::new("grating-intersect", Format::Json, None, j)
        }
    })
}

fn beam(scn: &Scenario, cmd: &BeamCmd) -> chiptrap::Result<Output> {
    Ok(match cmd {
        BeamCmd::Profile { beam, .. } => {
            let field = rp::beam_of(scn, beam)?;
            let (_, r) = rp::beam_profile(scn, beam)?;
            let mut t = Table::new(&["quantity", "reconstructed", "scenario"]);
            let rows = [
                ("emission_angle_deg", r.emission_angle.to_degrees(), field.polar_angle().to_degrees()),
                ("waist_focused_um", r.waist_focused / UM, field.waist_focused / UM),
                ("waist_unfocused_um", r.waist_unfocused / UM, field.waist_unfocused / UM),
                ("focus_distance_focused_um", r.focus_distance_focused / UM, field.focus_distance_focused / UM),
                ("focus_distance_unfocused_um", r.focus_distance_unfocused / UM, field.focus_distance_unfocused / UM),
                ("origin_x_um", r.origin.x / UM, field.origin.x / UM),
                ("origin_y_um", r.origin.y / UM, field.origin.y / UM),
            ];
            for (q, a, b) in rows {
                t.push(vec![q.into(), num(a), num(b)]);
            }
            let mut j = t.to_json();
            j = json!({
                "beam": beam,
                "parameters": j,
                "centroid_residual_um": r.centroid_residual / UM,
                "width_residual": r.width_residual,
            });
            Output::new("beam-profile", Format::Json, Some(t), j)
        }
        BeamCmd::Cut { beam, .. } => {
            let cut = rp::beam_cut(scn, beam)?;
            let mut t = Table::new(&["y_um", "intensity_w_per_m2"]);
            for (y, i) in &cut.samples {
                t.push(vec![num(y / UM), num(*i)]);
            }
            let j = json!({
                "beam": beam,
                "height_um": cut.height / UM,
                "center_um": cut.fit.center / UM,
                "diameter_um": cut.fit.diameter() / UM,
                "peak_w_per_m2": cut.fit.amplitude,
            });
            let pts = cut.samples.iter().map(|(y, i)| (y / UM, *i)).collect();
            Output { with_summary: true, ..Output::new("beam-cut", Format::Csv, Some(t), j) }.plot(
                &format!("{beam} beam along the trap axis"),
                "y (um)",
                "intensity (W/m^2)",
                vec![Series { name: beam.clone(), points: pts, scatter: false }],
            )
        }
    })
}

fn trap(scn: &Scenario, cmd: &TrapCmd) -> chiptrap::Result<Output> {
    Ok(match cmd {
        TrapCmd::Null(_) => {
            let nulls = rp::trap_nulls(scn)?;
            let mut t = Table::new(&["y_um", "x_um", "z_um", "residual", "field_v_per_m"]);
            for n in &nulls {
                let p = n.position / UM;
                t.push(vec![num(p.y), num(p.x), num(p.z), num(n.residual), num(n.field)]);
            }
            let j = t.to_json();
            let pts = nulls.iter().map(|n| (n.position.y / UM, n.position.z / UM)).collect();
            Output::new("trap-null", Format::Csv, Some(t), j).plot(
                "RF null height",
                "y (um)",
                "z (um)",
                vec![Series { name: "null".into(), points: pts, scatter: true }],
            )
        }
        TrapCmd::Freqs { y, axial_mhz, .. } => {
            let axial = axial_mhz.map_or(scn.axial_frequency, |f| TAU * f * MHZ);
            let w = rp::trap_well(scn, y * UM, axial)?;
            let mut t = Table::new(&["mode", "frequency_mhz", "axis_x", "axis_y", "axis_z"]);
            for (k, name) in ["x", "y", "z"].iter().enumerate() {
                let a = w.principal_axes[k];
                t.push(vec![
                    name.to_string(),
                    num(to_hz(w.secular_frequencies[k]) / MHZ),
                    num(a.x),
                    num(a.y),
                    num(a.z),
                ]);
            }
            let p = w.position / UM;
            let j = json!({
                "position_um": [p.x, p.y, p.z],
                "modes": t.to_json(),
                "dc_voltages_v": w.dc_voltages.iter().map(|(n, v)| json!({"electrode": n, "voltage_v": v})).collect::<Vec<_>>(),
                "condition_number": w.condition_number,
            });
            Output::new("trap-freqs", Format::Json, Some(t), j)
        }
        TrapCmd::Shuttle(_) => {
            let wells = rp::trap_shuttle(scn)?;
            let mut t = Table::new(&["y_um", "x_um", "z_um", "fx_mhz", "fy_mhz", "fz_mhz", "condition_number"]);
            for w in &wells {
                let p = w.position / UM;
                let f = w.secular_frequencies.map(|f| to_hz(f) / MHZ);
                t.push(vec![num(p.y), num(p.x), num(p.z), num(f[0]), num(f[1]), num(f[2]), num(w.condition_number)]);
            }
            let j = t.to_json();
            let pts = wells.iter().map(|w| (w.position.y / UM, w.position.z / UM)).collect();
            Output::new("trap-shuttle", Format::Csv, Some(t), j).plot(
                "Ion height while shuttling",
                "y (um)",
                "z (um)",
                vec![Series { name: "well".into(), points: pts, scatter: true }],
            )
        }
    })
}

fn scan(scn: &Scenario, probe: ProbeArg, fluor: FluorBeam) -> chiptrap::Result<Output> {
    let kind = match (probe, fluor) {
        (ProbeArg::Rabi, _) => ProbeKind::Rabi,
        (ProbeArg::Fluor, FluorBeam::B422) => ProbeKind::Fluorescence422,
        (ProbeArg::Fluor, FluorBeam::B1092) => ProbeKind::Fluorescence1092,
        (ProbeArg::Quench, _) => ProbeKind::Quench,
        (ProbeArg::Shelve, _) => ProbeKind::Shelve,
    };
    let pos = rp::ion_positions(scn)?;
    let c = rp::profile_comparison(scn, kind, &pos)?;
    let mut t = Table::new(&["y_um", "signal", "intensity_w_per_m2"]);
    for (s, i) in c.profile.signal.iter().zip(&c.profile.intensity) {
        t.push(vec![num(s.0 / UM), num(s.1), num(i.1)]);
    }
    let j = json!({
        "probe": kind.label(),
        "beam": c.beam,
        "center_um": c.profile.fit.center / UM,
        "diameter_um": c.profile.fit.diameter() / UM,
        "cut_center_um": c.cut.fit.center / UM,
        "cut_diameter_um": c.cut.fit.diameter() / UM,
    });
    let pts = c.profile.signal.iter().map(|(y, s)| (y / UM, *s)).collect();
    Ok(Output { with_summary: true, ..Output::new("profile-ion", Format::Csv, Some(t), j) }.plot(
        &format!("{} probe of the {} beam", kind.label(), c.beam),
        "y (um)",
        "signal",
        vec![Series { name: kind.label().into(), points: pts, scatter: true }],
    ))
}

fn spectrum(scn: &Scenario) -> Output {
    let rep = rp::spectrum_scan(scn);
    let j = json!({
        "peaks": rep.peaks.iter().map(|(d, p)| json!({"detuning_hz": d, "p_dark": p})).collect::<Vec<_>>(),
        "nbar": scn.motion.nbar,
        "lamb_dicke": scn.motion.lamb_dicke,
    });
    let pts = rep.points.iter().map(|(d, p)| (d / MHZ, *p)).collect();
    Output::new("spectrum", Format::Csv, Some(rp::spectrum_table(&rep)), j).plot(
        "Qubit spectrum",
        "detuning (MHz)",
        "P(dark)",
        vec![Series { name: "p_dark".into(), points: pts, scatter: false }],
    )
}

fn detect(scn: &Scenario) -> Output {
    let rep = rp::detection_report(scn);
    let f = &rep.fidelity;
    let best = &rep.windows.points[rep.windows.best];
    let d = &scn.detection;
    let j = json!({
        "fidelity": f.mean_fidelity,
        "threshold": f.threshold,
        "eps_dark": f.eps_d,
        "eps_bright": f.eps_b,
        "window_ms": d.window * 1e3,
        "bright_mean": d.bright_mean(),
        "dark_mean": d.dark_mean(),
        "best_window_ms": best.0 * 1e3,
        "best_fidelity": best.1.mean_fidelity,
    });
    let pts = rep.windows.points.iter().map(|(w, f)| (w * 1e3, f.mean_fidelity)).collect();
    Output::new("detect-fidelity", Format::Json, Some(rp::detection_table(&rep)), j).plot(
        "Detection fidelity",
        "window (ms)",
        "mean fidelity",
        vec![Series { name: "fidelity".into(), points: pts, scatter: false }],
    )
}

fn ramsey(scn: &Scenario, seed: u64) -> chiptrap::Result<Output> {
    let rep = rp::ramsey_sweep(scn, seed)?;
    let taus = |pts: &[chiptrap::coherence::SweepPoint]| -> Vec<f64> {
        pts.iter().map(|p| p.result.fitted_tau / US).collect()
    };
    let j = json!({
        "seed": seed,
        "suppression_bound": rep.suppression,
        "doppler_peak_hz": rep.doppler_at_max,
        "tau_free_us": taus(&rep.free),
        "tau_integrated_us": taus(&rep.integrated),
    });
    let series = |pts: &[chiptrap::coherence::SweepPoint], name: &str| Series {
        name: name.into(),
        points: pts.iter().map(|p| (p.acceleration, p.result.fitted_tau / US)).collect(),
        scatter: true,
    };
    let plot = vec![series(&rep.free, "free space"), series(&rep.integrated, "integrated")];
    Ok(Output::new("ramsey-sweep", Format::Csv, Some(rp::ramsey_table(&rep)), j).plot(
        "Ramsey coherence under vibration",
        "peak acceleration (m/s^2)",
        "tau (us)",
        plot,
    ))
}
