//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # vacancy on the two-vertex path
//! operation = vacancy
//! graph = path2
//! window = 0;1
//! samples = 100000
//! seed = 7
//! ```
//!
//! Graph sources: `single`, `path2`, `biased_z:R`, `tree:b:d`,
//! `lattice:d:R`, `file:PATH`. Windows list sites by model coordinates,
//! separated by `;` (coordinates of one site by `,`); a 1-D range may be
//! written `a..b`, and `all` selects every vertex.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{
    build_graph, make_biased_z, make_lattice_box, make_regular_tree, read_graph, Direction, KilledWeightedGraph,
    ModelKind, VertexId, VertexSet,
};

#[derive(Clone, Debug, PartialEq)]
pub enum GraphSource {
    SingleVertex,
    TwoVertexPath,
    BiasedZ { radius: usize },
    Tree { branching: usize, depth: usize },
    Lattice { dimension: usize, radius: usize },
    File(PathBuf),
}

impl FromStr for GraphSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<usize> {
            parts
                .get(i)
                .ok_or_else(|| Error::Config(format!("graph `{s}` is missing a parameter")))?
                .parse()
                .map_err(|_| Error::Config(format!("graph `{s}`: bad integer parameter")))
        };
        match parts[0] {
            "single" => Ok(GraphSource::SingleVertex),
            "path2" => Ok(GraphSource::TwoVertexPath),
            "biased_z" => Ok(GraphSource::BiasedZ { radius: num(1)? }),
            "tree" => Ok(GraphSource::Tree { branching: num(1)?, depth: num(2)? }),
            "lattice" => Ok(GraphSource::Lattice { dimension: num(1)?, radius: num(2)? }),
            "file" if parts.len() >= 2 => Ok(GraphSource::File(PathBuf::from(&s.trim()[5..]))),
            _ => Err(Error::Config(format!("unknown graph source `{s}`"))),
        }
    }
}

impl std::fmt::Display for GraphSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GraphSource::SingleVertex => write!(f, "single"),
            GraphSource::TwoVertexPath => write!(f, "path2"),
            GraphSource::BiasedZ { radius } => write!(f, "biased_z:{radius}"),
            GraphSource::Tree { branching, depth } => write!(f, "tree:{branching}:{depth}"),
            GraphSource::Lattice { dimension, radius } => write!(f, "lattice:{dimension}:{radius}"),
            GraphSource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl GraphSource {
    pub fn build(&self) -> Result<KilledWeightedGraph> {
        match self {
            GraphSource::SingleVertex => build_graph(1, &[], &[(0, 1.0)]),
            GraphSource::TwoVertexPath => build_graph(2, &[(0, 1, 1.0)], &[(0, 1.0), (1, 1.0)]),
            GraphSource::BiasedZ { radius } => Ok(make_biased_z(*radius)?.0),
            GraphSource::Tree { branching, depth } => make_regular_tree(*branching, *depth),
            GraphSource::Lattice { dimension, radius } => make_lattice_box(*dimension, *radius),
            GraphSource::File(path) => {
                let file = std::fs::File::open(path)
                    .map_err(|e| Error::Config(format!("cannot open graph file {}: {e}", path.display())))?;
                read_graph(std::io::BufReader::new(file))
            }
        }
    }
}

pub fn parse_site(s: &str) -> Result<Vec<i64>> {
    s.split(',')
        .map(|c| c.trim().parse::<i64>().map_err(|_| Error::Config(format!("bad site coordinate in `{s}`"))))
        .collect()
}

pub fn locate_site(graph: &KilledWeightedGraph, site: &[i64]) -> Result<VertexId> {
    graph
        .locate(site)
        .ok_or_else(|| Error::Config(format!("site {site:?} does not exist in the graph")))
}

/// Resolves a window specification against a graph.
pub fn resolve_window(graph: &KilledWeightedGraph, spec: &str) -> Result<VertexSet> {
    let spec = spec.trim();
    if spec == "all" {
        return Ok(graph.all_vertices());
    }
    if let Some((a, b)) = spec.split_once("..") {
        let a: i64 = a.trim().parse().map_err(|_| Error::Config(format!("bad range `{spec}`")))?;
        let b: i64 = b.trim().parse().map_err(|_| Error::Config(format!("bad range `{spec}`")))?;
        return (a..=b).map(|k| locate_site(graph, &[k])).collect();
    }
    let set: VertexSet = spec
        .split(';')
        .map(|s| locate_site(graph, &parse_site(s)?))
        .collect::<Result<_>>()?;
    if set.is_empty() {
        return Err(Error::Config("empty window".into()));
    }
    Ok(set)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub operation: String,
    pub graph: Option<GraphSource>,
    /// Model for exhaustion-based operations.
    pub family: Option<ModelKind>,
    pub window: Option<String>,
    pub outer: Option<String>,
    pub site: Option<Vec<i64>>,
    pub target: Option<Vec<i64>>,
    pub eps: Vec<f64>,
    pub levels: Vec<usize>,
    pub level: f64,
    pub u_levels: Vec<f64>,
    pub functional_f: Option<String>,
    pub functional_g: Option<String>,
    pub from: Option<Direction>,
    pub to: Option<Direction>,
    pub lambdas: Vec<f64>,
    pub samples: u64,
    pub seed: u64,
    pub sigma: f64,
    pub min_p_value: f64,
    pub tolerance: f64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            operation: String::new(),
            graph: None,
            family: None,
            window: None,
            outer: None,
            site: None,
            target: None,
            eps: Vec::new(),
            levels: Vec::new(),
            level: 1.0,
            u_levels: Vec::new(),
            functional_f: None,
            functional_g: None,
            from: None,
            to: None,
            lambdas: Vec::new(),
            samples: 100_000,
            seed: 1,
            sigma: 4.0,
            min_p_value: 1e-3,
            tolerance: 1e-10,
            out: None,
        }
    }
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{s}`"))))
        .collect()
}

fn scalar<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse::<T>().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected `key = value`, got `{content}`") })?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "operation" => self.operation = v.to_string(),
            "graph" => self.graph = Some(v.parse()?),
            "family" => self.family = Some(v.parse()?),
            "window" => self.window = Some(v.to_string()),
            "outer" => self.outer = Some(v.to_string()),
            "site" => self.site = Some(parse_site(v)?),
            "target" => self.target = Some(parse_site(v)?),
            "eps" => self.eps = list(key, v)?,
            "levels" => self.levels = list(key, v)?,
            "level" => self.level = scalar(key, v)?,
            "u_levels" => self.u_levels = list(key, v)?,
            "f" => self.functional_f = Some(v.to_string()),
            "g" => self.functional_g = Some(v.to_string()),
            "from" => self.from = Some(v.parse()?),
            "to" => self.to = Some(v.parse()?),
            "lambdas" => self.lambdas = list(key, v)?,
            "samples" => self.samples = scalar(key, v)?,
            "seed" => self.seed = scalar(key, v)?,
            "sigma" => self.sigma = scalar(key, v)?,
            "min_p_value" => self.min_p_value = scalar(key, v)?,
            "tolerance" => self.tolerance = scalar(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.operation.is_empty() {
            return Err(Error::Config("missing `operation`".into()));
        }
        if self.samples < 1 {
            return Err(Error::Config("`samples` must be at least 1".into()));
        }
        if !(self.sigma > 0.0 && self.tolerance > 0.0 && self.min_p_value > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn require_graph(&self) -> Result<KilledWeightedGraph> {
        self.graph
            .as_ref()
            .ok_or_else(|| Error::Config(format!("operation `{}` needs `graph`", self.operation)))?
            .build()
    }

    pub fn require_window(&self, graph: &KilledWeightedGraph) -> Result<VertexSet> {
        let spec = self
            .window
            .as_deref()
            .ok_or_else(|| Error::Config(format!("operation `{}` needs `window`", self.operation)))?;
        resolve_window(graph, spec)
    }

    pub fn require_outer(&self, graph: &KilledWeightedGraph) -> Result<VertexSet> {
        let spec = self
            .outer
            .as_deref()
            .ok_or_else(|| Error::Config(format!("operation `{}` needs `outer`", self.operation)))?;
        resolve_window(graph, spec)
    }

    pub fn require_site(&self) -> Result<Vec<i64>> {
        self.site
            .clone()
            .ok_or_else(|| Error::Config(format!("operation `{}` needs `site`", self.operation)))
    }

    pub fn require_family(&self) -> Result<ModelKind> {
        self.family
            .ok_or_else(|| Error::Config(format!("operation `{}` needs `family`", self.operation)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_config() {
        let cfg = ExperimentConfig::parse(
            "# comment\noperation = vacancy\ngraph = biased_z:3\nwindow = 0\nsamples = 10\nseed = 5\n",
        )
        .unwrap();
        assert_eq!(cfg.operation, "vacancy");
        assert_eq!(cfg.graph, Some(GraphSource::BiasedZ { radius: 3 }));
        assert_eq!(cfg.samples, 10);
        let g = cfg.require_graph().unwrap();
        let w = cfg.require_window(&g).unwrap();
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::parse("operation = x\ncolour = red\n").is_err());
        assert!(ExperimentConfig::parse("operation = x\nsamples = 0\n").is_err());
        assert!(ExperimentConfig::parse("graph = single\n").is_err());
        assert!(ExperimentConfig::parse("operation = x\ngraph = moon\n").is_err());
    }

    #[test]
    fn windows() {
        let g = GraphSource::BiasedZ { radius: 3 }.build().unwrap();
        assert_eq!(resolve_window(&g, "-2..2").unwrap().len(), 5);
        assert_eq!(resolve_window(&g, "0;1;1").unwrap().len(), 2);
        assert!(resolve_window(&g, "7").is_err());
        let l = GraphSource::Lattice { dimension: 3, radius: 1 }.build().unwrap();
        assert_eq!(resolve_window(&l, "0,0,0;1,0,0").unwrap().len(), 2);
        assert_eq!(resolve_window(&l, "all").unwrap().len(), 27);
    }
}
