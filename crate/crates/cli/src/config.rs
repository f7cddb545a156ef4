//! Run configuration: TOML file, command-line overrides and sweeps.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spatial_qkd::adversary::AttackParams;
use spatial_qkd::detection::{ChannelParams, DetectorArrayParams};
use spatial_qkd::factorized::FactorSettings;
use spatial_qkd::source::{degenerate_wavenumber, waist_from_fwhm, DEFAULT_REFRACTIVE_INDEX};
use spatial_qkd::SourceParams;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub pump_wavelength_nm: f64,
    /// Intensity FWHM of the pump; ignored when `pump_waist_mm` is set.
    pub pump_fwhm_mm: f64,
    pub pump_waist_mm: Option<f64>,
    pub crystal_length_mm: f64,
    pub refractive_index: f64,
    /// Overrides the wave number derived from wavelength and index.
    pub wavenumber_per_mm: Option<f64>,
    pub collinear_mismatch_per_mm: f64,
    pub pair_probability: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        Self {
            pump_wavelength_nm: 400.0,
            pump_fwhm_mm: 2.0,
            pump_waist_mm: None,
            crystal_length_mm: 2.0,
            refractive_index: DEFAULT_REFRACTIVE_INDEX,
            wavenumber_per_mm: None,
            collinear_mismatch_per_mm: 0.0,
            pair_probability: 0.01,
        }
    }
}

impl SourceSection {
    pub fn params(&self) -> SourceParams {
        SourceParams {
            pump_wavelength_nm: self.pump_wavelength_nm,
            pump_waist_mm: self.pump_waist_mm.unwrap_or_else(|| waist_from_fwhm(self.pump_fwhm_mm)),
            crystal_length_mm: self.crystal_length_mm,
            wavenumber_per_mm: self
                .wavenumber_per_mm
                .unwrap_or_else(|| degenerate_wavenumber(self.pump_wavelength_nm, self.refractive_index)),
            collinear_mismatch_per_mm: self.collinear_mismatch_per_mm,
            pair_probability: self.pair_probability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub pixels: usize,
    pub efficiency: f64,
    pub dark_count_probability: f64,
    pub coverage: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let d = DetectorArrayParams::default();
        Self {
            pixels: d.pixels,
            efficiency: d.efficiency,
            dark_count_probability: d.dark_count_probability,
            coverage: d.coverage,
        }
    }
}

impl DetectorSection {
    pub fn params(&self) -> DetectorArrayParams {
        DetectorArrayParams {
            pixels: self.pixels,
            efficiency: self.efficiency,
            dark_count_probability: self.dark_count_probability,
            coverage: self.coverage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub alice_throughput: f64,
    pub bob_throughput: f64,
    pub extinction_db_per_km: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let c = ChannelParams::default();
        Self {
            alice_throughput: c.alice_throughput,
            bob_throughput: c.bob_throughput,
            extinction_db_per_km: c.extinction_db_per_km,
        }
    }
}

impl ChannelSection {
    pub fn params(&self) -> ChannelParams {
        ChannelParams {
            alice_throughput: self.alice_throughput,
            bob_throughput: self.bob_throughput,
            extinction_db_per_km: self.extinction_db_per_km,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    pub lambda: f64,
    pub eve_pixels: Option<usize>,
}

impl AttackSection {
    pub fn params(&self) -> AttackParams {
        AttackParams {
            lambda: self.lambda,
            eve_pixels: self.eve_pixels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub pulses: u64,
    pub seed: u64,
    pub batch_size: u64,
    /// Pixel count of the extra mutual-information run; none to skip it.
    pub mi_pixels: Option<usize>,
    /// Channel loss of the hiding test; none to skip it.
    pub hiding_loss_db: Option<f64>,
    pub hiding_pulses: u64,
    /// Event log path; a `.gz` suffix compresses it.
    pub event_log: Option<PathBuf>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            pulses: 10_000_000,
            seed: 1,
            batch_size: 1 << 20,
            mi_pixels: Some(32),
            hiding_loss_db: None,
            hiding_pulses: 20_000_000_000,
            event_log: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsSection {
    /// Samples of the tabulated phase-matching factor (power of two).
    pub factor_count: usize,
    /// Table half-extent in units of the phase-matching width.
    pub factor_extent: f64,
    /// Samples per Gaussian width of the two-dimensional quadrature.
    pub transverse_resolution: usize,
    pub schmidt_modes: usize,
    pub negativity_dim: usize,
    /// Samples per axis of the dense Schmidt surrogate.
    pub surrogate_samples: usize,
}

impl Default for NumericsSection {
    fn default() -> Self {
        let f = FactorSettings::default();
        Self {
            factor_count: f.count,
            factor_extent: f.extent,
            transverse_resolution: 8,
            schmidt_modes: 24,
            negativity_dim: 16,
            surrogate_samples: 256,
        }
    }
}

impl NumericsSection {
    pub fn factors(&self) -> FactorSettings {
        FactorSettings {
            count: self.factor_count,
            extent: self.factor_extent,
        }
    }
}

/// Double-Gaussian amplitude `exp(-(x+y)²/(4a²) - (x-y)²/(4b²))` used by
/// `schmidt` instead of the source when present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Surrogate {
    pub sum_width: f64,
    pub difference_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub throughput: String,
    pub loss_db: String,
    pub lambda: String,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            throughput: "0.02:1:50".into(),
            loss_db: "0:50:51".into(),
            lambda: "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,0.95,0.99,1".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub csv: bool,
    pub json: bool,
    /// Adds the elapsed time to the metadata, which makes reruns differ.
    pub wall_time: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("sqkd-out"),
            csv: true,
            json: true,
            wall_time: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    #[value(name = "1d")]
    #[serde(rename = "1d")]
    OneD,
    #[value(name = "2d")]
    #[serde(rename = "2d")]
    TwoD,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    /// `VAR=lo:hi:steps` or `VAR=v1,v2,...`.
    pub sweep: Vec<String>,
    pub source: SourceSection,
    pub detector: DetectorSection,
    pub channel: ChannelSection,
    pub attack: AttackSection,
    pub simulation: SimulationSection,
    pub numerics: NumericsSection,
    pub scan: ScanSection,
    pub surrogate: Option<Surrogate>,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("configuration serializes")
    }
}

/// Variables that can be swept around any command.
pub const PARAMETER_VARIABLES: &[&str] = &[
    "waist_mm",
    "length_mm",
    "pixels",
    "dark_count_probability",
    "efficiency",
    "pair_probability",
    "coverage",
];

/// One swept variable and its values.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub variable: String,
    pub values: Vec<f64>,
}

/// Parses `VAR=lo:hi:steps` (inclusive, evenly spaced) or `VAR=v1,v2,...`.
pub fn parse_sweep(spec: &str) -> Result<Sweep, CliError> {
    let bad = |why: &str| CliError::Config(format!("sweep `{spec}`: {why}"));
    let (var, range) = spec.split_once('=').ok_or_else(|| bad("expected VAR=lo:hi:steps"))?;
    let variable = var.trim().to_string();
    if variable.is_empty() {
        return Err(bad("missing variable"));
    }
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| bad(&format!("`{s}` is not a number")))
    };
    let values = if range.contains(':') {
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected lo:hi:steps"));
        }
        let (lo, hi) = (number(parts[0])?, number(parts[1])?);
        let steps: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| bad("steps must be a positive integer"))?;
        if steps == 0 {
            return Err(bad("steps must be >= 1"));
        }
        if steps == 1 {
            if lo != hi {
                return Err(bad("one step needs lo = hi"));
            }
            vec![lo]
        } else {
            (0..steps)
                .map(|i| tidy((lo * (steps - 1 - i) as f64 + hi * i as f64) / (steps - 1) as f64))
                .collect()
        }
    } else {
        range.split(',').map(number).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad("empty or non-finite range"));
    }
    Ok(Sweep { variable, values })
}

/// Rounds to 12 significant digits so grid labels print cleanly.
fn tidy(v: f64) -> f64 {
    format!("{v:.11e}").parse().unwrap_or(v)
}

impl RunConfig {
    /// Sets one parameter variable.
    pub fn set(&mut self, variable: &str, value: f64) -> Result<(), CliError> {
        match variable {
            "waist_mm" => self.source.pump_waist_mm = Some(value),
            "length_mm" => self.source.crystal_length_mm = value,
            "pixels" => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(CliError::Config(format!(
                        "pixels must be a positive integer, got {value}"
                    )));
                }
                self.detector.pixels = value as usize;
            }
            "dark_count_probability" => self.detector.dark_count_probability = value,
            "efficiency" => self.detector.efficiency = value,
            "pair_probability" => self.source.pair_probability = value,
            "coverage" => self.detector.coverage = value,
            other => {
                return Err(CliError::Config(format!(
                    "unknown sweep variable `{other}`; expected the command's scan variable or one of {}",
                    PARAMETER_VARIABLES.join(", ")
                )))
            }
        }
        Ok(())
    }
}

/// Cartesian product of parameter sweeps, first sweep varying slowest.
pub fn parameter_points(sweeps: &[Sweep]) -> Vec<Vec<(String, f64)>> {
    let mut points = vec![Vec::new()];
    for s in sweeps {
        points = points
            .into_iter()
            .flat_map(|p| {
                s.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push((s.variable.clone(), v));
                    q
                })
            })
            .collect();
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ranges_and_lists() {
        let s = parse_sweep("waist_mm=0.5:2:4").unwrap();
        assert_eq!(s.variable, "waist_mm");
        assert_eq!(s.values, vec![0.5, 1.0, 1.5, 2.0]);
        let s = parse_sweep("length_mm=1,2,5,10").unwrap();
        assert_eq!(s.values, vec![1.0, 2.0, 5.0, 10.0]);
        assert_eq!(parse_sweep("x=3:3:1").unwrap().values, vec![3.0]);
    }

    #[test]
    fn rejects_malformed_sweeps() {
        for bad in ["waist_mm", "=1:2:3", "w=1:2", "w=1:2:0", "w=a,b", "w=1:2:1"] {
            assert!(parse_sweep(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn cartesian_product_order() {
        let pts = parameter_points(&[parse_sweep("a=1,2").unwrap(), parse_sweep("b=3,4,5").unwrap()]);
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1], vec![("a".to_string(), 1.0), ("b".to_string(), 4.0)]);
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let text = toml::to_string(&c).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.source.params(), SourceParams::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[source]\npump_waste_mm = 1.0\n").is_err());
    }
}
