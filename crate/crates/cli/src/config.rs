//! TOML config files with `--set key=value` overrides.
//!
//! Overrides are merged into the parsed table before it is deserialized, so
//! they are checked against the same schema as the file and win over it.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use lazylab::nn::{Activation, BatchSize, InitScheme, LossKind, MlpConfig, TrainConfig};

use crate::CliError;

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string (`--set train.loss=mse`).
fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Applies one `a.b.c=value` override to `table`, creating sections as needed.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key {key:?} has an empty component")));
    }
    let (last, sections) = path.split_last().expect("split yields at least one part");
    let mut cur = table;
    for (i, part) in sections.iter().enumerate() {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => {
                return Err(CliError::Config(format!(
                    "override {key:?}: {} is not a section",
                    path[..=i].join(".")
                )))
            }
        };
    }
    cur.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

/// Recursively overlays `top` onto `base`; tables merge, everything else is replaced.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Starts from `T::default()`, overlays the file at `path` and then the
/// overrides in order, and deserializes. Defaults therefore come from the
/// enclosing config, not from each section's own `Default`. Unknown keys are
/// reported with their location.
pub fn load<T: DeserializeOwned + Serialize + Default>(
    path: Option<&Path>,
    overrides: &[String],
) -> Result<T, CliError> {
    match path {
        Some(p) => {
            let text =
                fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            parse(Some(&text), overrides).map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("{}: {m}", p.display())),
                other => other,
            })
        }
        None => parse(None, overrides),
    }
}

/// [`load`] on config text that is already in memory.
pub fn parse<T: DeserializeOwned + Serialize + Default>(
    text: Option<&str>,
    overrides: &[String],
) -> Result<T, CliError> {
    let mut table = Table::try_from(T::default()).map_err(|e| CliError::Config(format!("default config: {e}")))?;
    if let Some(text) = text {
        let file = text.parse::<Table>().map_err(|e| CliError::Config(e.to_string()))?;
        merge(&mut table, file);
    }
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    // round-trip through text so that errors carry the offending line
    let text = toml::to_string(&table).map_err(|e| CliError::Config(e.to_string()))?;
    toml::from_str(&text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Hidden-layer widths; input and output widths come from the task.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub init: InitScheme,
    pub init_gain: f64,
    pub bias: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            hidden: vec![64, 64, 64],
            activation: Activation::Relu,
            init: InitScheme::FanInGaussian,
            init_gain: std::f64::consts::SQRT_2,
            bias: true,
        }
    }
}

impl ModelSection {
    pub fn build(&self, input_dim: usize, output_dim: usize, seed: u64) -> MlpConfig {
        let mut widths = vec![input_dim];
        widths.extend(&self.hidden);
        widths.push(output_dim);
        MlpConfig {
            layer_widths: widths,
            activation: self.activation,
            init_scheme: self.init,
            init_gain: self.init_gain,
            seed,
            bias: self.bias,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub momentum: f64,
    pub steps: usize,
    pub batch_size: BatchSize,
    pub loss: LossKind,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            learning_rate: 0.1,
            momentum: 0.9,
            steps: 500,
            batch_size: BatchSize::Full,
            loss: LossKind::BinaryCrossEntropy,
        }
    }
}

impl TrainSection {
    pub fn build(&self, shuffle_seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            batch_size: self.batch_size,
            loss_kind: self.loss,
            steps: self.steps,
            shuffle_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct YinYangSection {
    pub n: usize,
    /// Boundary distance separating the easy group from the hard one.
    pub margin: f64,
}

impl Default for YinYangSection {
    fn default() -> Self {
        YinYangSection { n: 200, margin: 0.1 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    struct Demo {
        seed: u64,
        train: TrainSection,
    }

    impl Default for Demo {
        fn default() -> Self {
            Demo {
                seed: 0,
                train: TrainSection {
                    loss: LossKind::Mse,
                    ..TrainSection::default()
                },
            }
        }
    }

    #[test]
    fn override_types() {
        let mut t = Table::new();
        apply_override(&mut t, "a.b=3").unwrap();
        apply_override(&mut t, "a.c=[1, 2]").unwrap();
        apply_override(&mut t, "a.d=mse").unwrap();
        apply_override(&mut t, "e=\"quoted\"").unwrap();
        assert_eq!(t["a"]["b"], Value::Integer(3));
        assert_eq!(t["a"]["c"].as_array().unwrap().len(), 2);
        assert_eq!(t["a"]["d"], Value::String("mse".into()));
        assert_eq!(t["e"], Value::String("quoted".into()));
    }

    #[test]
    fn override_into_scalar_fails() {
        let mut t = Table::new();
        apply_override(&mut t, "a=1").unwrap();
        assert!(apply_override(&mut t, "a.b=1").is_err());
        assert!(apply_override(&mut t, "noequals").is_err());
        assert!(apply_override(&mut t, "a..b=1").is_err());
    }

    #[test]
    fn later_overrides_win() {
        let cfg: Demo = load(
            None,
            &[
                "seed=3".into(),
                "seed=5".into(),
                "train.loss=softmax_cross_entropy".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.train.loss, LossKind::SoftmaxCrossEntropy);
        assert_eq!(cfg.train.steps, 500);
    }

    #[test]
    fn partial_section_keeps_enclosing_defaults() {
        let cfg: Demo = load(None, &["train.steps=7".into()]).unwrap();
        assert_eq!(cfg.train.steps, 7);
        assert_eq!(cfg.train.loss, LossKind::Mse);
    }

    #[test]
    fn unknown_nested_key_is_named() {
        let err = load::<Demo>(None, &["train.learning_rat=0.1".into()]).unwrap_err();
        assert!(err.to_string().contains("learning_rat"), "{err}");
    }
}
