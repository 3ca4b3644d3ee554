//! Run configuration.

use lamina::graph_transform::TransformConfig;
use lamina::scenarios::{self, Pipeline, Scenario};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineName {
    Expanded,
    Contracted,
    Hyperbolic,
    Deform,
}

impl PipelineName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Expanded => "expanded",
            Self::Contracted => "contracted",
            Self::Hyperbolic => "hyperbolic",
            Self::Deform => "deform",
        }
    }

    fn natural(p: Pipeline) -> Self {
        match p {
            Pipeline::Expanded => Self::Expanded,
            Pipeline::Contracted => Self::Contracted,
            Pipeline::Hyperbolic => Self::Hyperbolic,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Invariance,
    Unperturbed,
    Planes,
    Hyperbolicity,
    Injectivity,
    Shadow,
    Containment,
    Holomorphy,
    Expansiveness,
    Commutation,
    Deformation,
}

impl Check {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Invariance => "invariance",
            Self::Unperturbed => "unperturbed",
            Self::Planes => "planes",
            Self::Hyperbolicity => "hyperbolicity",
            Self::Injectivity => "injectivity",
            Self::Shadow => "shadow",
            Self::Containment => "containment",
            Self::Holomorphy => "holomorphy",
            Self::Expansiveness => "expansiveness",
            Self::Commutation => "commutation",
            Self::Deformation => "deformation",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default)]
    pub nodes: Option<Vec<usize>>,
    #[serde(default)]
    pub depth: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub transform: Map<String, Value>,
    #[serde(default)]
    pub pipeline: Option<PipelineName>,
    #[serde(default)]
    pub checks: Vec<Check>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

/// Schema and semantic problems; the CLI exits with status 2.
#[derive(Debug)]
pub struct SchemaError(pub String);

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SchemaError {}

impl Config {
    pub fn from_str(text: &str, origin: &str) -> Result<Self, SchemaError> {
        serde_json::from_str(text)
            .map_err(|e| SchemaError(format!("{origin}: line {} column {}: {e}", e.line(), e.column())))
    }

    pub fn load(path: &Path) -> Result<Self, SchemaError> {
        let text = std::fs::read_to_string(path).map_err(|e| SchemaError(format!("{}: {e}", path.display())))?;
        Self::from_str(&text, &path.display().to_string())
    }
}

/// A validated configuration bound to its built scenario.
pub struct Resolved {
    pub config: Config,
    pub scenario: Scenario,
    pub pipeline: PipelineName,
    pub cfg: TransformConfig,
}

fn merge_transform(base: &TransformConfig, over: &Map<String, Value>) -> Result<TransformConfig, SchemaError> {
    let mut v = serde_json::to_value(base).map_err(|e| SchemaError(e.to_string()))?;
    let obj = v.as_object_mut().expect("transform config is an object");
    for (k, x) in over {
        obj.insert(k.clone(), x.clone());
    }
    let cfg: TransformConfig = serde_json::from_value(v).map_err(|e| SchemaError(format!("transform: {e}")))?;
    cfg.validate().map_err(|e| SchemaError(format!("transform: {e}")))?;
    Ok(cfg)
}

pub fn resolve(config: Config) -> Result<Resolved, SchemaError> {
    let scenario = scenarios::build(
        &config.scenario,
        &config.params,
        config.grid.nodes.as_deref(),
        config.grid.depth,
    )
    .map_err(|e| SchemaError(format!("scenario {:?}: {e}", config.scenario)))?;
    let cfg = merge_transform(&scenario.cfg, &config.transform)?;
    let pipeline = config.pipeline.unwrap_or(PipelineName::natural(scenario.pipeline));
    match pipeline {
        PipelineName::Hyperbolic if scenario.thick.is_none() => {
            return Err(SchemaError(format!(
                "pipeline: {:?} has no thickened laminations",
                config.scenario
            )))
        }
        PipelineName::Deform if scenario.family.is_none() => {
            return Err(SchemaError(format!(
                "pipeline: {:?} has no complex deformation family",
                config.scenario
            )))
        }
        _ => {}
    }
    for c in &config.checks {
        let ok = match c {
            Check::Containment => scenario.sampler.is_some(),
            Check::Holomorphy => scenario.complex_leaf.is_some(),
            Check::Commutation => pipeline == PipelineName::Hyperbolic,
            Check::Deformation => pipeline == PipelineName::Deform,
            Check::Planes => matches!(pipeline, PipelineName::Expanded | PipelineName::Contracted),
            _ => true,
        };
        if !ok {
            return Err(SchemaError(format!(
                "checks: {:?} does not apply to scenario {:?} with pipeline {}",
                c.as_str(),
                config.scenario,
                pipeline.as_str()
            )));
        }
    }
    Ok(Resolved {
        config,
        scenario,
        pipeline,
        cfg,
    })
}
