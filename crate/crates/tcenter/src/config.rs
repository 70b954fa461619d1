//! Sectioned TOML run configuration and the embedded presets.
//!
//! A configuration is applied on top of a base: every key is optional and
//! overrides the inherited value. `[register] preset = "…"` and
//! `[noise] preset = "…"` swap in a named base for that section. Values
//! that fail validation are reported as `source:line:col`.

use serde::Deserialize;
use tcenter_core::noise::{DephasingNoise, NoiseProcess, SpinNoise};
use tcenter_core::presets;
use tcenter_core::readout::ReadoutModel;
use tcenter_core::register::{CouplingMode, HyperfineTensor, Nucleus, RegisterConfig, Species};
use toml::Spanned;

use crate::error::{AppError, AppResult};

/// Name of the base preset every configuration starts from.
pub const DEFAULT_PRESET: &str = "paper-T1";

/// Embedded read-only configurations.
pub const PRESETS: [(&str, &str); 4] = [
    ("paper-T1", include_str!("../presets/paper-T1.toml")),
    ("paper-noise-correlated", include_str!("../presets/paper-noise-correlated.toml")),
    ("paper-noise-uncorrelated", include_str!("../presets/paper-noise-uncorrelated.toml")),
    ("electron-ou", include_str!("../presets/electron-ou.toml")),
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.0 == name).map(|p| p.1)
}

/// Noise models selectable by name, independent of the register.
pub fn noise_preset(name: &str) -> Option<DephasingNoise> {
    match name {
        "off" | "none" => Some(DephasingNoise::quiet(3)),
        "paper-correlated" | "paper-noise-correlated" => Some(presets::paper_noise(1.0)),
        "paper-uncorrelated" | "paper-noise-uncorrelated" => Some(presets::paper_noise(0.0)),
        "electron-ou" | "ou-preset" | "ou" => Some(presets::electron_ou_noise()),
        _ => None,
    }
}

pub const NOISE_PRESET_NAMES: &str = "off, paper-correlated, paper-uncorrelated, electron-ou (alias ou-preset)";

/// Gate imperfections used by the Bell and initialisation protocols.
#[derive(Clone, Debug, PartialEq)]
pub struct Gates {
    /// Per-spin pulse fidelity, electron first.
    pub pulse_fidelity: Vec<f64>,
    pub init_target_population: f64,
}

impl Gates {
    pub fn ideal(n_spins: usize) -> Self {
        Self { pulse_fidelity: vec![1.0; n_spins], init_target_population: 1.0 }
    }

    /// Initial nuclear-configuration populations: the target share in
    /// `target`, the rest spread equally.
    pub fn init_populations(&self, n_nuclei: usize, target: usize) -> Vec<f64> {
        let n = 1usize << n_nuclei;
        if n == 1 {
            return vec![1.0];
        }
        let p = self.init_target_population;
        let rest = (1.0 - p) / (n - 1) as f64;
        (0..n).map(|k| if k == target { p } else { rest }).collect()
    }
}

/// Fully resolved run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub register: RegisterConfig,
    pub noise: DephasingNoise,
    pub readout: ReadoutModel,
    pub gates: Gates,
}

impl RunConfig {
    fn bare() -> Self {
        Self {
            register: RegisterConfig { b_field_t: 0.0, g_electron: 2.0, nuclei: vec![], j_coupling_khz: 0.0, mode: CouplingMode::Secular },
            noise: DephasingNoise::quiet(1),
            readout: ReadoutModel::ideal(),
            gates: Gates::ideal(1),
        }
    }

    /// Named embedded preset.
    pub fn preset(name: &str) -> AppResult<Self> {
        let text = preset_text(name).ok_or_else(|| AppError::Input(format!("unknown preset `{name}`; known: {}", preset_names())))?;
        let mut cfg = if name == DEFAULT_PRESET { Self::bare() } else { Self::preset(DEFAULT_PRESET)? };
        cfg.apply(text, &format!("preset {name}"))?;
        Ok(cfg)
    }

    /// Applies a TOML document on top of `self`.
    pub fn apply(&mut self, text: &str, source_name: &str) -> AppResult<()> {
        let doc: FileToml = toml::from_str(text).map_err(|e| {
            let (line, col) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            AppError::parse_at(source_name, line, col, e.message().trim_end())
        })?;
        let at = Locator { text, source_name };
        let nuclei_replaced = doc.register.as_ref().is_some_and(|r| r.nuclei.is_some() || r.preset.is_some());
        if let Some(reg) = &doc.register {
            reg.apply(&mut self.register, &at)?;
        }
        let n_spins = self.register.n_spins();
        if nuclei_replaced {
            if doc.noise.is_none() {
                self.noise = DephasingNoise::quiet(n_spins);
            }
            if !doc.gates.as_ref().is_some_and(|g| g.pulse_fidelity.is_some()) {
                self.gates.pulse_fidelity = vec![1.0; n_spins];
            }
        }
        if let Some(noise) = &doc.noise {
            noise.apply(&mut self.noise, n_spins, &at)?;
        }
        if let Some(readout) = &doc.readout {
            readout.apply(&mut self.readout, &at)?;
        }
        if let Some(gates) = &doc.gates {
            gates.apply(&mut self.gates, n_spins, &at)?;
        }
        self.register.validate().map_err(|e| at.section_error("register", e.to_string()))?;
        self.noise.validate(n_spins).map_err(|e| at.section_error("noise", e.to_string()))?;
        self.readout.validate().map_err(|e| at.section_error("readout", e.to_string()))?;
        Ok(())
    }

    /// Base preset, a named preset on top, then an optional file.
    pub fn resolve(preset: Option<&str>, file: Option<(&str, &str)>) -> AppResult<Self> {
        let mut cfg = Self::preset(preset.unwrap_or(DEFAULT_PRESET))?;
        if let Some((text, name)) = file {
            cfg.apply(text, name)?;
        }
        Ok(cfg)
    }
}

pub fn preset_names() -> String {
    PRESETS.iter().map(|p| p.0).collect::<Vec<_>>().join(", ")
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

struct Locator<'a> {
    text: &'a str,
    source_name: &'a str,
}

impl Locator<'_> {
    fn error<T>(&self, value: &Spanned<T>, message: impl Into<String>) -> AppError {
        let (line, col) = line_col(self.text, value.span().start);
        AppError::parse_at(self.source_name, line, col, message)
    }

    /// Error anchored at a section header, or line 0 when the section is inherited.
    fn section_error(&self, section: &str, message: String) -> AppError {
        let header = format!("[{section}");
        let line = self.text.lines().position(|l| l.trim_start().starts_with(&header)).map_or(0, |i| i + 1);
        AppError::parse(self.source_name, line, message)
    }

    fn finite(&self, v: &Spanned<f64>, what: &str) -> AppResult<f64> {
        let x = *v.get_ref();
        if x.is_finite() {
            Ok(x)
        } else {
            Err(self.error(v, format!("{what} must be finite, got {x}")))
        }
    }

    fn non_negative(&self, v: &Spanned<f64>, what: &str) -> AppResult<f64> {
        let x = self.finite(v, what)?;
        if x >= 0.0 {
            Ok(x)
        } else {
            Err(self.error(v, format!("{what} must be non-negative, got {x}")))
        }
    }

    fn positive(&self, v: &Spanned<f64>, what: &str) -> AppResult<f64> {
        let x = self.finite(v, what)?;
        if x > 0.0 {
            Ok(x)
        } else {
            Err(self.error(v, format!("{what} must be positive, got {x}")))
        }
    }

    fn probability(&self, v: &Spanned<f64>, what: &str) -> AppResult<f64> {
        let x = self.finite(v, what)?;
        if (0.0..=1.0).contains(&x) {
            Ok(x)
        } else {
            Err(self.error(v, format!("{what} must lie in [0, 1], got {x}")))
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileToml {
    register: Option<RegisterToml>,
    noise: Option<NoiseToml>,
    readout: Option<ReadoutToml>,
    gates: Option<GatesToml>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegisterToml {
    preset: Option<Spanned<String>>,
    b_field_t: Option<Spanned<f64>>,
    g_electron: Option<Spanned<f64>>,
    j_coupling_khz: Option<Spanned<f64>>,
    mode: Option<Spanned<String>>,
    nuclei: Option<Vec<NucleusToml>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NucleusToml {
    species: Spanned<String>,
    gyro_mhz_per_t: Option<Spanned<f64>>,
    a_zz_mhz: Option<Spanned<f64>>,
    a_xz_mhz: Option<Spanned<f64>>,
    a_yz_mhz: Option<Spanned<f64>>,
    isotropic_mhz: Option<Spanned<f64>>,
    /// Full tensor, rows = electron axis x, y, z.
    tensor_mhz: Option<Spanned<Vec<Vec<f64>>>>,
}

pub fn parse_mode(s: &str) -> Option<CouplingMode> {
    match s {
        "secular" => Some(CouplingMode::Secular),
        "full" => Some(CouplingMode::Full),
        _ => None,
    }
}

impl RegisterToml {
    fn apply(&self, reg: &mut RegisterConfig, at: &Locator) -> AppResult<()> {
        if let Some(p) = &self.preset {
            let base = RunConfig::preset(p.get_ref()).map_err(|_| at.error(p, format!("unknown register preset `{}`", p.get_ref())))?;
            let mode = reg.mode;
            *reg = base.register;
            reg.mode = mode;
        }
        if let Some(v) = &self.b_field_t {
            reg.b_field_t = at.non_negative(v, "b_field_t")?;
        }
        if let Some(v) = &self.g_electron {
            reg.g_electron = at.finite(v, "g_electron")?;
        }
        if let Some(m) = &self.mode {
            reg.mode = parse_mode(m.get_ref()).ok_or_else(|| at.error(m, format!("mode must be `secular` or `full`, got `{}`", m.get_ref())))?;
        }
        if let Some(list) = &self.nuclei {
            if list.len() > 6 {
                return Err(at.section_error("register", format!("at most 6 nuclei supported, got {}", list.len())));
            }
            reg.nuclei = list.iter().map(|n| n.build(at)).collect::<AppResult<_>>()?;
            if self.j_coupling_khz.is_none() && reg.nuclei.len() < 2 {
                reg.j_coupling_khz = 0.0;
            }
        }
        if let Some(v) = &self.j_coupling_khz {
            let j = at.finite(v, "j_coupling_khz")?;
            if j != 0.0 && reg.nuclei.len() < 2 {
                return Err(at.error(v, "j_coupling_khz needs at least two nuclei"));
            }
            reg.j_coupling_khz = j;
        }
        Ok(())
    }
}

impl NucleusToml {
    fn build(&self, at: &Locator) -> AppResult<Nucleus> {
        let species = Species::from_symbol(self.species.get_ref())
            .ok_or_else(|| at.error(&self.species, format!("unknown species `{}`; use `H` or `Si29`", self.species.get_ref())))?;
        let axial = self.a_zz_mhz.is_some() || self.a_xz_mhz.is_some() || self.a_yz_mhz.is_some();
        let forms = [axial, self.isotropic_mhz.is_some(), self.tensor_mhz.is_some()].iter().filter(|&&b| b).count();
        if forms > 1 {
            return Err(at.error(&self.species, "give the hyperfine coupling as one of a_zz/a_xz/a_yz, isotropic_mhz or tensor_mhz"));
        }
        let bounded = |v: &Spanned<f64>, what: &str| -> AppResult<f64> {
            let x = at.finite(v, what)?;
            if x.abs() > tcenter_core::register::MAX_HYPERFINE_MHZ {
                return Err(at.error(v, format!("{what} = {x} MHz exceeds ±{} MHz", tcenter_core::register::MAX_HYPERFINE_MHZ)));
            }
            Ok(x)
        };
        let opt = |v: &Option<Spanned<f64>>, what: &str| v.as_ref().map_or(Ok(0.0), |v| bounded(v, what));
        let hyperfine = if let Some(v) = &self.isotropic_mhz {
            HyperfineTensor::isotropic(bounded(v, "isotropic_mhz")?)
        } else if let Some(t) = &self.tensor_mhz {
            let rows = t.get_ref();
            if rows.len() != 3 || rows.iter().any(|r| r.len() != 3) {
                return Err(at.error(t, "tensor_mhz must be a 3×3 array"));
            }
            let mut m = [[0.0; 3]; 3];
            for (i, row) in rows.iter().enumerate() {
                for (j, &x) in row.iter().enumerate() {
                    if !x.is_finite() || x.abs() > tcenter_core::register::MAX_HYPERFINE_MHZ {
                        return Err(at.error(t, format!("tensor_mhz[{i}][{j}] = {x} is not a finite coupling within bounds")));
                    }
                    m[i][j] = x;
                }
            }
            HyperfineTensor(m)
        } else {
            HyperfineTensor::axial(opt(&self.a_zz_mhz, "a_zz_mhz")?, opt(&self.a_xz_mhz, "a_xz_mhz")?, opt(&self.a_yz_mhz, "a_yz_mhz")?)
        };
        let mut n = Nucleus::new(species, hyperfine);
        if let Some(g) = &self.gyro_mhz_per_t {
            n.gyro_mhz_per_t = at.finite(g, "gyro_mhz_per_t")?;
        }
        Ok(n)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseToml {
    preset: Option<Spanned<String>>,
    nuclear_correlation: Option<Spanned<f64>>,
    electron: Option<SpinNoiseToml>,
    nuclei: Option<Vec<SpinNoiseToml>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpinNoiseToml {
    /// `off`, `quasi-static` or `ou`.
    kind: Spanned<String>,
    sigma_khz: Option<Spanned<f64>>,
    t2_star_ms: Option<Spanned<f64>>,
    tau_c_ms: Option<Spanned<f64>>,
    t1_ms: Option<Spanned<f64>>,
}

impl SpinNoiseToml {
    fn build(&self, at: &Locator) -> AppResult<SpinNoise> {
        let sigma = || -> AppResult<f64> {
            match (&self.sigma_khz, &self.t2_star_ms) {
                (Some(_), Some(t)) => Err(at.error(t, "give either sigma_khz or t2_star_ms, not both")),
                (Some(s), None) => at.non_negative(s, "sigma_khz"),
                (None, Some(t)) => Ok(tcenter_core::noise::sigma_from_t2_star(at.positive(t, "t2_star_ms")?)),
                (None, None) => Err(at.error(&self.kind, "noise needs sigma_khz or t2_star_ms")),
            }
        };
        let process = match self.kind.get_ref().as_str() {
            "off" => NoiseProcess::Off,
            "quasi-static" => NoiseProcess::QuasiStatic { sigma_khz: sigma()? },
            "ou" => {
                let tau = self.tau_c_ms.as_ref().ok_or_else(|| at.error(&self.kind, "ou noise needs tau_c_ms"))?;
                NoiseProcess::OrnsteinUhlenbeck { sigma_khz: sigma()?, tau_c_ms: at.positive(tau, "tau_c_ms")? }
            }
            other => return Err(at.error(&self.kind, format!("noise kind must be `off`, `quasi-static` or `ou`, got `{other}`"))),
        };
        let t1_ms = self.t1_ms.as_ref().map(|t| at.positive(t, "t1_ms")).transpose()?;
        Ok(SpinNoise { process, t1_ms })
    }
}

impl NoiseToml {
    fn apply(&self, noise: &mut DephasingNoise, n_spins: usize, at: &Locator) -> AppResult<()> {
        if let Some(p) = &self.preset {
            *noise = noise_preset(p.get_ref()).ok_or_else(|| at.error(p, format!("unknown noise preset `{}`; known: {NOISE_PRESET_NAMES}", p.get_ref())))?;
        }
        if noise.spins.len() != n_spins {
            noise.spins.resize(n_spins, SpinNoise::default());
        }
        if let Some(e) = &self.electron {
            noise.spins[0] = e.build(at)?;
        }
        if let Some(list) = &self.nuclei {
            if list.len() != n_spins - 1 {
                return Err(at.section_error("noise", format!("{} nuclear noise entries for {} nuclei", list.len(), n_spins - 1)));
            }
            for (k, s) in list.iter().enumerate() {
                noise.spins[k + 1] = s.build(at)?;
            }
        }
        if let Some(c) = &self.nuclear_correlation {
            let x = at.finite(c, "nuclear_correlation")?;
            if !(-1.0..=1.0).contains(&x) {
                return Err(at.error(c, format!("nuclear_correlation must lie in [-1, 1], got {x}")));
            }
            noise.nuclear_correlation = x;
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReadoutToml {
    /// `default` or `ideal`.
    preset: Option<Spanned<String>>,
    photons_per_cycle: Option<Spanned<f64>>,
    p_e_flip_per_cycle: Option<Spanned<f64>>,
    p_n_flip_per_cycle: Option<Spanned<f64>>,
    background_per_cycle: Option<Spanned<f64>>,
    n_repetitions: Option<Spanned<i64>>,
}

impl ReadoutToml {
    fn apply(&self, m: &mut ReadoutModel, at: &Locator) -> AppResult<()> {
        if let Some(p) = &self.preset {
            *m = match p.get_ref().as_str() {
                "default" => presets::readout(),
                "ideal" => ReadoutModel::ideal(),
                other => return Err(at.error(p, format!("readout preset must be `default` or `ideal`, got `{other}`"))),
            };
        }
        if let Some(v) = &self.photons_per_cycle {
            m.photons_per_cycle = at.non_negative(v, "photons_per_cycle")?;
        }
        if let Some(v) = &self.p_e_flip_per_cycle {
            m.p_e_flip_per_cycle = at.probability(v, "p_e_flip_per_cycle")?;
        }
        if let Some(v) = &self.p_n_flip_per_cycle {
            m.p_n_flip_per_cycle = at.probability(v, "p_n_flip_per_cycle")?;
        }
        if let Some(v) = &self.background_per_cycle {
            m.background_per_cycle = at.non_negative(v, "background_per_cycle")?;
        }
        if let Some(v) = &self.n_repetitions {
            let n = *v.get_ref();
            if n < 1 {
                return Err(at.error(v, format!("n_repetitions must be at least 1, got {n}")));
            }
            m.n_repetitions = n as usize;
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GatesToml {
    pulse_fidelity: Option<Spanned<Vec<f64>>>,
    init_target_population: Option<Spanned<f64>>,
}

impl GatesToml {
    fn apply(&self, g: &mut Gates, n_spins: usize, at: &Locator) -> AppResult<()> {
        if let Some(v) = &self.pulse_fidelity {
            let f = v.get_ref();
            if f.len() != n_spins {
                return Err(at.error(v, format!("pulse_fidelity needs {n_spins} entries (electron first), got {}", f.len())));
            }
            if let Some(bad) = f.iter().find(|x| !(**x > 0.0 && **x <= 1.0)) {
                return Err(at.error(v, format!("pulse fidelities must lie in (0, 1], got {bad}")));
            }
            g.pulse_fidelity = f.clone();
        }
        if let Some(v) = &self.init_target_population {
            g.init_target_population = at.probability(v, "init_target_population")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * a.abs().max(1.0)
    }

    #[test]
    fn canonical_preset_matches_the_built_in_register() {
        let cfg = RunConfig::preset("paper-T1").unwrap();
        let reference = presets::register(CouplingMode::Secular);
        assert!(close(cfg.register.b_field_t, reference.b_field_t));
        assert_eq!(cfg.register.nuclei.len(), 2);
        for (a, b) in cfg.register.nuclei.iter().zip(&reference.nuclei) {
            assert_eq!(a.species, b.species);
            assert!(close(a.gyro_mhz_per_t, b.gyro_mhz_per_t));
            for i in 0..3 {
                for j in 0..3 {
                    assert!(close(a.hyperfine.0[i][j], b.hyperfine.0[i][j]), "{:?} vs {:?}", a.hyperfine, b.hyperfine);
                }
            }
        }
        assert_eq!(cfg.readout, presets::readout());
        assert_eq!(cfg.gates.pulse_fidelity, presets::pulse_fidelities());
        assert_eq!(cfg.gates.init_populations(2, 0), presets::init_populations(2, 0));
        assert_eq!(cfg.noise, DephasingNoise::quiet(3));
    }

    #[test]
    fn noise_presets_match_the_built_in_models() {
        assert_eq!(RunConfig::preset("paper-noise-correlated").unwrap().noise, presets::paper_noise(1.0));
        assert_eq!(RunConfig::preset("paper-noise-uncorrelated").unwrap().noise, presets::paper_noise(0.0));
        let ou = RunConfig::preset("electron-ou").unwrap().noise;
        let reference = presets::electron_ou_noise();
        assert!(close(ou.spins[0].process.sigma_khz(), reference.spins[0].process.sigma_khz()));
        assert!(matches!(ou.spins[0].process, NoiseProcess::OrnsteinUhlenbeck { tau_c_ms, .. } if tau_c_ms == 1590.0));
    }

    #[test]
    fn nucleus_free_override_clears_coupling_and_noise() {
        let mut cfg = RunConfig::preset("paper-noise-correlated").unwrap();
        cfg.apply("[register]\nnuclei = []\n", "bare.toml").unwrap();
        assert!(cfg.register.nuclei.is_empty());
        assert_eq!(cfg.register.j_coupling_khz, 0.0);
        assert_eq!(cfg.noise.spins.len(), 1);
        assert_eq!(cfg.gates.pulse_fidelity, vec![1.0]);
    }

    #[test]
    fn errors_point_at_the_offending_value() {
        let mut cfg = RunConfig::preset("paper-T1").unwrap();
        let err = cfg.apply("[register]\n\nb_field_t = -0.2\n", "a.toml").unwrap_err();
        assert!(err.to_string().starts_with("a.toml:3:13: "), "{err}");
        assert_eq!(err.exit_code(), 2);
        let err = cfg.apply("[register]\nmode = \"diagonal\"\n", "b.toml").unwrap_err();
        assert!(err.to_string().starts_with("b.toml:2:"), "{err}");
        let err = cfg.apply("[readout]\nphotons = 1.0\n", "c.toml").unwrap_err();
        assert!(err.to_string().starts_with("c.toml:2:"), "{err}");
        let err = cfg.apply("[register\n", "d.toml").unwrap_err();
        assert!(err.to_string().starts_with("d.toml:1:"), "{err}");
        let err = cfg.apply("[[register.nuclei]]\nspecies = \"C13\"\n", "e.toml").unwrap_err();
        assert!(err.to_string().starts_with("e.toml:2:"), "{err}");
        let err = cfg.apply("[noise.electron]\nkind = \"ou\"\nsigma_khz = 1.0\n", "f.toml").unwrap_err();
        assert!(err.to_string().contains("tau_c_ms"), "{err}");
    }

    #[test]
    fn line_and_column_of_offsets() {
        assert_eq!(line_col("ab\ncd", 0), (1, 1));
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
    }
}
