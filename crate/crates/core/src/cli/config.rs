//! Problem files: TOML, or JSON when the extension is `.json`.

use std::path::Path;

use serde::Deserialize;

use crate::classical::{HeineStieltjesSpec, HeunSpec, InceSpec, SexticSpec};
use crate::error::{JopError, Result};
use crate::forms::{InnerProductFamily, MAX_K};
use crate::measure::IntervalMeasure;
use crate::mep::NewtonOptions;
use crate::poly::Polynomial;

/// A finite number or one of the sentinels `"inf"`, `"-inf"`.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Bound {
    Number(f64),
    Text(String),
}

impl Bound {
    pub fn value(&self) -> Result<f64> {
        match self {
            Bound::Number(x) => Ok(*x),
            Bound::Text(s) => match s.trim() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => other
                    .parse()
                    .map_err(|_| JopError::InvalidConfig(format!("bound {other:?} is not a number or \"inf\""))),
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FactorConfig {
    pub location: f64,
    /// Contributes `|x - location|^(a - 1)`.
    pub a: f64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub lower: Bound,
    pub upper: Bound,
    #[serde(default)]
    pub factors: Vec<FactorConfig>,
    #[serde(default)]
    pub exp_linear: f64,
    #[serde(default)]
    pub exp_gauss: bool,
    /// Coefficients of a positive polynomial factor, lowest degree first.
    #[serde(default)]
    pub smooth: Option<Vec<f64>>,
}

impl MeasureConfig {
    pub fn to_measure(&self) -> Result<IntervalMeasure> {
        let mut m = IntervalMeasure::uniform(self.lower.value()?, self.upper.value()?).with_exp_linear(self.exp_linear);
        for f in &self.factors {
            m = m.with_factor(f.location, f.a - 1.0);
        }
        if self.exp_gauss {
            m = m.with_gauss();
        }
        if let Some(c) = &self.smooth {
            m = m.with_smooth(Polynomial::new(c.clone()));
        }
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub accept: Option<f64>,
    pub max_iter: Option<usize>,
    pub extra_rounds: Option<usize>,
}

/// Preset parameters; each preset reads the fields it needs and uses defaults
/// for the rest.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PresetConfig {
    pub name: String,
    pub e: Option<Vec<f64>>,
    pub a: Option<Vec<f64>>,
    pub m: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub eps: Option<Vec<u8>>,
    pub ell: Option<f64>,
    pub nu: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub format: Option<String>,
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub n_max: Option<usize>,
    #[serde(default)]
    pub measures: Vec<MeasureConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    pub preset: Option<PresetConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ProblemConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| JopError::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.extension().is_some_and(|x| x == "json"))
    }

    pub fn parse(text: &str, json: bool) -> Result<Self> {
        if json {
            serde_json::from_str(text).map_err(|e| JopError::InvalidConfig(format!("config: {e}")))
        } else {
            toml::from_str(text).map_err(|e| JopError::InvalidConfig(format!("config: {e}")))
        }
    }

    pub fn options(&self) -> NewtonOptions {
        let d = NewtonOptions::default();
        let s = &self.solver;
        NewtonOptions {
            seed: s.seed.unwrap_or(d.seed),
            tol: s.tol.unwrap_or(d.tol),
            accept: s.accept.unwrap_or(d.accept),
            max_iter: s.max_iter.unwrap_or(d.max_iter),
            extra_rounds: s.extra_rounds.unwrap_or(d.extra_rounds),
            ..d
        }
    }
}

/// A classical preset with its parameters resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Heun(HeunSpec),
    /// Lamé catalog of degree `nu`; solving uses the Heun family of pattern `eps`.
    Lame {
        e: [f64; 3],
        nu: usize,
        eps: [u8; 3],
        n: usize,
    },
    Ince(InceSpec),
    Sextic(SexticSpec),
    HeineStieltjes(HeineStieltjesSpec),
}

impl Preset {
    pub const NAMES: [&'static str; 5] = ["heun", "lame", "ince", "sextic", "heine-stieltjes"];

    pub fn resolve(cfg: &PresetConfig, n: usize, k: Option<usize>) -> Result<Self> {
        let three = |v: &Option<Vec<f64>>, default: [f64; 3], what: &str| -> Result<[f64; 3]> {
            match v {
                None => Ok(default),
                Some(x) => x
                    .as_slice()
                    .try_into()
                    .map_err(|_| JopError::InvalidConfig(format!("{what} needs 3 values, got {}", x.len()))),
            }
        };
        match cfg.name.as_str() {
            "heun" => {
                Ok(Preset::Heun(HeunSpec::new(three(&cfg.e, [0.0, 1.0, 2.0], "e")?, three(&cfg.a, [0.5; 3], "a")?, n)?))
            }
            "lame" => {
                let e = three(&cfg.e, [0.0, 1.0, 2.0], "e")?;
                let eps = match &cfg.eps {
                    None => [0, 0, 0],
                    Some(v) if v.len() == 3 && v.iter().all(|&x| x <= 1) => [v[0], v[1], v[2]],
                    Some(v) => return Err(JopError::InvalidConfig(format!("lame eps {v:?} must be 3 bits"))),
                };
                let weight = eps.iter().map(|&x| x as usize).sum::<usize>();
                let nu = cfg.nu.unwrap_or(2 * n + weight);
                HeunSpec::new(e, eps.map(|x| x as f64 + 0.5), n)?;
                Ok(Preset::Lame { e, nu, eps, n })
            }
            "ince" => {
                let eps = match &cfg.eps {
                    None => [0, 0],
                    Some(v) if v.len() == 2 => [v[0], v[1]],
                    Some(v) => return Err(JopError::InvalidConfig(format!("ince eps {v:?} must have 2 entries"))),
                };
                Ok(Preset::Ince(InceSpec::new(cfg.alpha.unwrap_or(-1.0), eps, n)?))
            }
            "sextic" => Ok(Preset::Sextic(SexticSpec::new(cfg.ell.unwrap_or(0.0), n)?)),
            "heine-stieltjes" => {
                let k = k.or(cfg.e.as_ref().map(|e| e.len().saturating_sub(1))).unwrap_or(3);
                if !(2..=MAX_K).contains(&k) {
                    return Err(JopError::InvalidConfig(format!("k = {k} is outside 2..={MAX_K}")));
                }
                let e = cfg.e.clone().unwrap_or_else(|| (0..=k).map(|i| i as f64).collect());
                let m = cfg.m.clone().unwrap_or_else(|| vec![1.0; e.len()]);
                if e.len() != k + 1 {
                    return Err(JopError::InvalidConfig(format!("k = {k} needs {} points, got {}", k + 1, e.len())));
                }
                Ok(Preset::HeineStieltjes(HeineStieltjesSpec::new(e, m, n)?))
            }
            other => Err(JopError::InvalidConfig(format!(
                "unknown preset {other:?}; expected one of {}",
                Preset::NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Heun(_) => "heun",
            Preset::Lame { .. } => "lame",
            Preset::Ince(_) => "ince",
            Preset::Sextic(_) => "sextic",
            Preset::HeineStieltjes(_) => "heine-stieltjes",
        }
    }

    pub fn family(&self, n_max: usize) -> Result<InnerProductFamily> {
        match self {
            Preset::Heun(s) => s.family(n_max),
            Preset::Lame { e, eps, n, .. } => HeunSpec::new(*e, eps.map(|x| x as f64 + 0.5), *n)?.family(n_max),
            Preset::Ince(s) => s.family(n_max),
            Preset::Sextic(s) => s.family(n_max),
            Preset::HeineStieltjes(s) => s.family(n_max),
        }
    }
}

/// Everything a command needs: the family, the degree and the preset, if any.
#[derive(Debug, Clone)]
pub struct Problem {
    pub family: InnerProductFamily,
    pub n: usize,
    pub preset: Option<Preset>,
    pub options: NewtonOptions,
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub preset: Option<String>,
}

impl Problem {
    pub fn resolve(cfg: &ProblemConfig, over: &Overrides) -> Result<Self> {
        let n = over.n.or(cfg.n).or(cfg.n_max).ok_or_else(|| JopError::InvalidConfig("degree n is not set".into()))?;
        let mut options = cfg.options();
        if let Some(seed) = over.seed {
            options.seed = seed;
        }
        let k = over.k.or(cfg.k);
        let preset_cfg = match (&over.preset, &cfg.preset) {
            (Some(name), Some(p)) if &p.name == name => Some(p.clone()),
            (Some(name), _) => Some(PresetConfig { name: name.clone(), ..Default::default() }),
            (None, p) => p.clone(),
        };
        if let Some(p) = preset_cfg {
            let preset = Preset::resolve(&p, n, k)?;
            let family = preset.family(n)?;
            if let Some(k) = k {
                if k != family.k() {
                    return Err(JopError::InvalidConfig(format!(
                        "preset {} has k = {}, config says {k}",
                        preset.name(),
                        family.k()
                    )));
                }
            }
            return Ok(Problem { family, n, preset: Some(preset), options });
        }
        if cfg.measures.is_empty() {
            return Err(JopError::InvalidConfig("no measures and no preset".into()));
        }
        if let Some(k) = k {
            if k != cfg.measures.len() {
                return Err(JopError::InvalidConfig(format!("k = {k} but {} measures given", cfg.measures.len())));
            }
        }
        let bounds =
            cfg.measures.iter().map(|m| Ok((m.lower.value()?, m.upper.value()?))).collect::<Result<Vec<_>>>()?;
        for pair in bounds.windows(2) {
            if pair[0].1 > pair[1].0 {
                return Err(JopError::OverlappingIntervals { left: pair[0], right: pair[1] });
            }
        }
        let measures = cfg.measures.iter().map(MeasureConfig::to_measure).collect::<Result<Vec<_>>>()?;
        let family = InnerProductFamily::new(measures, n)?;
        Ok(Problem { family, n, preset: None, options })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEUN: &str = r#"
k = 2
n = 1
[[measures]]
lower = 0.0
upper = 1.0
factors = [{ location = 0.0, a = 0.5 }, { location = 1.0, a = 0.5 }, { location = 2.0, a = 0.5 }]
[[measures]]
lower = 1.0
upper = 2.0
factors = [{ location = 0.0, a = 0.5 }, { location = 1.0, a = 0.5 }, { location = 2.0, a = 0.5 }]
"#;

    #[test]
    fn toml_measures_resolve() {
        let cfg = ProblemConfig::parse(HEUN, false).unwrap();
        let p = Problem::resolve(&cfg, &Overrides::default()).unwrap();
        assert_eq!((p.family.k(), p.n), (2, 1));
        assert!(p.preset.is_none());
    }

    #[test]
    fn json_with_sentinels() {
        let text = r#"{"n": 2, "measures": [
            {"lower": "-inf", "upper": 0, "factors": [{"location": 0, "a": 1.5}], "exp_gauss": true},
            {"lower": 0, "upper": "inf", "factors": [{"location": 0, "a": 1.5}], "exp_gauss": true}]}"#;
        let cfg = ProblemConfig::parse(text, true).unwrap();
        let p = Problem::resolve(&cfg, &Overrides::default()).unwrap();
        assert_eq!(p.family.intervals(), vec![(f64::NEG_INFINITY, 0.0), (0.0, f64::INFINITY)]);
    }

    #[test]
    fn overlap_is_named() {
        let text = HEUN.replace("lower = 1.0", "lower = 0.5");
        let cfg = ProblemConfig::parse(&text, false).unwrap();
        let err = Problem::resolve(&cfg, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("(0, 1) and (0.5, 2)"), "{err}");
    }

    #[test]
    fn presets_from_flags() {
        let over = Overrides { n: Some(1), k: Some(3), preset: Some("heine-stieltjes".into()), ..Default::default() };
        let p = Problem::resolve(&ProblemConfig::default(), &over).unwrap();
        assert_eq!(p.family.k(), 3);
        let bad = Overrides { n: Some(1), preset: Some("mathieu".into()), ..Default::default() };
        assert!(Problem::resolve(&ProblemConfig::default(), &bad).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ProblemConfig::parse("n = 1\nbogus = 3\n", false).is_err());
    }
}
