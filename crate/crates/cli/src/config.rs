//! Experiment configuration: a JSON object, validated in full so that every
//! problem is reported at once.

use std::fmt;
use std::path::PathBuf;

use mixlab_core::ModelParams;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    TvCurve,
    Sweep,
    Coupling,
    Bounds,
    Hitting,
    OracleCheck,
}

impl Kind {
    pub const ALL: [Kind; 6] = [
        Kind::TvCurve,
        Kind::Sweep,
        Kind::Coupling,
        Kind::Bounds,
        Kind::Hitting,
        Kind::OracleCheck,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Kind::TvCurve => "tv-curve",
            Kind::Sweep => "sweep",
            Kind::Coupling => "coupling",
            Kind::Bounds => "bounds",
            Kind::Hitting => "hitting",
            Kind::OracleCheck => "oracle-check",
        }
    }

    pub fn from_name(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// How `k` follows `n` in a generated grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KRule {
    /// `k = ⌊f·n⌋`
    Fraction(f64),
    /// `k = ⌈n^a⌉`
    Power(f64),
    /// `k = ⌈l·√n⌉`
    Sqrt(f64),
}

impl KRule {
    pub fn k_for(&self, n: usize) -> usize {
        let nf = n as f64;
        match *self {
            KRule::Fraction(f) => (f * nf).floor() as usize,
            KRule::Power(a) => nf.powf(a).ceil() as usize,
            KRule::Sqrt(l) => (l * nf.sqrt()).ceil() as usize,
        }
    }
}

/// Test hooks that deliberately break an identity in `oracle-check`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    Kernel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub grid: Vec<ModelSpec>,
    /// Scale `n` for the walk experiment.
    pub walk_n: Option<usize>,
    pub t_min: usize,
    pub t_max: Option<usize>,
    pub stride: usize,
    pub t_values: Option<Vec<u64>>,
    pub eps: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub q: Option<f64>,
    pub residual: Option<usize>,
    pub gamma: Vec<f64>,
    pub n_max: usize,
    pub m_max: u64,
    pub steps_max: usize,
    pub inject_fault: Option<Fault>,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub format: Format,
    #[serde(skip)]
    pub threads: Option<usize>,
}

/// Serializable mirror of [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModelSpec {
    pub n: usize,
    pub k: usize,
}

impl ModelSpec {
    pub fn params(&self) -> ModelParams {
        ModelParams::new(self.n, self.k).expect("validated at parse time")
    }
}

/// Every violation found in a config document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration error(s):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const KNOWN_KEYS: &[&str] = &[
    "kind",
    "n",
    "k",
    "grid",
    "n_values",
    "k_rule",
    "t_min",
    "t_max",
    "stride",
    "t_values",
    "eps",
    "replicas",
    "seed",
    "output",
    "format",
    "alpha",
    "beta",
    "q",
    "residual",
    "gamma",
    "threads",
    "n_max",
    "m_max",
    "steps_max",
    "inject_fault",
];

struct Reader<'a> {
    obj: &'a Map<String, Value>,
    errors: Vec<String>,
}

impl<'a> Reader<'a> {
    fn uint(&mut self, key: &str) -> Option<u64> {
        let v = self.obj.get(key)?;
        match v.as_u64() {
            Some(x) => Some(x),
            None => {
                self.errors
                    .push(format!("`{key}` must be a nonnegative integer, got {v}"));
                None
            }
        }
    }

    fn usize(&mut self, key: &str) -> Option<usize> {
        self.uint(key).map(|x| x as usize)
    }

    fn real(&mut self, key: &str) -> Option<f64> {
        let v = self.obj.get(key)?;
        match v.as_f64() {
            Some(x) => Some(x),
            None => {
                self.errors
                    .push(format!("`{key}` must be a number, got {v}"));
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<&'a str> {
        let v = self.obj.get(key)?;
        match v.as_str() {
            Some(s) => Some(s),
            None => {
                self.errors
                    .push(format!("`{key}` must be a string, got {v}"));
                None
            }
        }
    }

    fn reals(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.obj.get(key)?;
        match v
            .as_array()
            .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
        {
            Some(xs) => Some(xs),
            None => {
                self.errors
                    .push(format!("`{key}` must be an array of numbers, got {v}"));
                None
            }
        }
    }

    fn uints(&mut self, key: &str) -> Option<Vec<u64>> {
        let v = self.obj.get(key)?;
        match v
            .as_array()
            .and_then(|a| a.iter().map(Value::as_u64).collect::<Option<Vec<_>>>())
        {
            Some(xs) => Some(xs),
            None => {
                self.errors.push(format!(
                    "`{key}` must be an array of nonnegative integers, got {v}"
                ));
                None
            }
        }
    }
}

fn model(n: u64, k: u64, errors: &mut Vec<String>) -> Option<ModelSpec> {
    match ModelParams::new(n as usize, k as usize) {
        Ok(_) => Some(ModelSpec {
            n: n as usize,
            k: k as usize,
        }),
        Err(e) => {
            errors.push(e.to_string());
            None
        }
    }
}

/// Parses and validates a JSON config. `kind_hint` is the CLI subcommand;
/// a `kind` key in the document must agree with it.
pub fn parse_config(text: &str, kind_hint: Option<Kind>) -> Result<ExperimentConfig, ConfigErrors> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| ConfigErrors(vec![format!("not valid JSON: {e}")]))?;
    let Some(obj) = doc.as_object() else {
        return Err(ConfigErrors(vec!["config must be a JSON object".into()]));
    };
    let mut r = Reader {
        obj,
        errors: Vec::new(),
    };
    for key in obj.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            r.errors.push(format!("unknown key `{key}`"));
        }
    }

    let kind = match (r.string("kind").map(|s| (s, Kind::from_name(s))), kind_hint) {
        (Some((s, None)), _) => {
            r.errors.push(format!("unknown kind `{s}`"));
            kind_hint
        }
        (Some((_, Some(k))), Some(h)) if k != h => {
            r.errors.push(format!(
                "config kind `{}` does not match subcommand `{}`",
                k.name(),
                h.name()
            ));
            Some(h)
        }
        (Some((_, Some(k))), _) => Some(k),
        (None, h) => h,
    };
    if kind.is_none() {
        r.errors.push("missing `kind`".into());
    }

    // model grid
    let mut grid = Vec::new();
    let single = (r.uint("n"), r.uint("k"));
    let explicit = obj.get("grid");
    let generated = (obj.get("n_values"), obj.get("k_rule"));
    let mut grid_given = false;
    let uses_models = !matches!(kind, Some(Kind::Hitting));
    match single {
        (Some(n), Some(k)) if uses_models => {
            grid_given = true;
            grid.extend(model(n, k, &mut r.errors));
        }
        (None, Some(_)) => r.errors.push("`k` given without `n`".into()),
        _ => {}
    }
    if let Some(v) = explicit {
        grid_given = true;
        match v.as_array() {
            Some(items) => {
                if items.is_empty() {
                    r.errors.push("`grid` must be nonempty".into());
                }
                for item in items {
                    let pair = item
                        .as_array()
                        .filter(|a| a.len() == 2)
                        .and_then(|a| Some((a[0].as_u64()?, a[1].as_u64()?)))
                        .or_else(|| Some((item.get("n")?.as_u64()?, item.get("k")?.as_u64()?)));
                    match pair {
                        Some((n, k)) => grid.extend(model(n, k, &mut r.errors)),
                        None => r.errors.push(format!(
                            "grid entry {item} must be [n, k] or {{\"n\":…,\"k\":…}}"
                        )),
                    }
                }
            }
            None => r.errors.push("`grid` must be an array".into()),
        }
    }
    match generated {
        (Some(_), Some(rule)) => {
            grid_given = true;
            let ns = r.uints("n_values").unwrap_or_default();
            if ns.is_empty() {
                r.errors.push("`n_values` must be nonempty".into());
            }
            let rule = rule.as_object().filter(|o| o.len() == 1).and_then(|o| {
                let (name, v) = o.iter().next()?;
                let v = v.as_f64()?;
                match name.as_str() {
                    "fraction" => Some(KRule::Fraction(v)),
                    "power" => Some(KRule::Power(v)),
                    "sqrt" => Some(KRule::Sqrt(v)),
                    _ => None,
                }
            });
            match rule {
                Some(rule) => {
                    for n in ns {
                        grid.extend(model(n, rule.k_for(n as usize) as u64, &mut r.errors));
                    }
                }
                None => r.errors.push(
                    "`k_rule` must be one of {\"fraction\": f}, {\"power\": a}, {\"sqrt\": l}"
                        .into(),
                ),
            }
        }
        (Some(_), None) => r.errors.push("`n_values` needs a `k_rule`".into()),
        (None, Some(_)) => r.errors.push("`k_rule` needs `n_values`".into()),
        (None, None) => {}
    }

    let walk_n = if uses_models { None } else { r.usize("n") };
    let t_min = r.usize("t_min").unwrap_or(0);
    let t_max = r.usize("t_max");
    let stride = r.usize("stride").unwrap_or(1);
    let t_values = r.uints("t_values");
    let eps = r.reals("eps").unwrap_or_else(|| vec![0.25]);
    let replicas = r.usize("replicas").unwrap_or(1000);
    let seed = r.uint("seed").unwrap_or(0);
    let output = r.string("output").map(PathBuf::from);
    let format = match r.string("format") {
        None | Some("csv") => Format::Csv,
        Some("json") => Format::Json,
        Some(other) => {
            r.errors
                .push(format!("`format` must be csv or json, got `{other}`"));
            Format::Csv
        }
    };
    let alpha = r.reals("alpha").unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
    let beta = r.reals("beta").unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
    let q = r.real("q");
    let residual = r.usize("residual");
    let gamma = r.reals("gamma").unwrap_or_default();
    let threads = r.usize("threads");
    let n_max = r.usize("n_max").unwrap_or(8);
    let m_max = r.uint("m_max").unwrap_or(5);
    let steps_max = r.usize("steps_max").unwrap_or(30);
    let inject_fault = match r.string("inject_fault") {
        None => None,
        Some("kernel") => Some(Fault::Kernel),
        Some(other) => {
            r.errors.push(format!("unknown fault hook `{other}`"));
            None
        }
    };

    if stride == 0 {
        r.errors.push("`stride` must be >= 1".into());
    }
    if replicas == 0 {
        r.errors.push("`replicas` must be >= 1".into());
    }
    if threads == Some(0) {
        r.errors.push("`threads` must be >= 1".into());
    }
    if eps.is_empty() {
        r.errors.push("`eps` must be nonempty".into());
    }
    for e in &eps {
        if !(*e > 0.0 && *e < 1.0) {
            r.errors.push(format!("eps value {e} must lie in (0, 1)"));
        }
    }
    if let Some(t_max) = t_max {
        if t_max < t_min {
            r.errors
                .push(format!("`t_max` = {t_max} is below `t_min` = {t_min}"));
        }
    }
    for (name, xs) in [("alpha", &alpha), ("beta", &beta)] {
        if xs.is_empty() || xs.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            r.errors
                .push(format!("`{name}` values must be positive and nonempty"));
        }
    }
    if let Some(q) = q {
        if !(q > 0.0 && q <= 1.0) {
            r.errors.push(format!("`q` = {q} must lie in (0, 1]"));
        }
    }
    if residual == Some(0) {
        r.errors.push("`residual` must be >= 1".into());
    }

    match kind {
        Some(Kind::Hitting) => {
            if walk_n.is_none() {
                r.errors.push("hitting needs the walk scale `n`".into());
            }
            if q.is_none() {
                r.errors
                    .push("hitting needs the move probability `q`".into());
            }
        }
        Some(Kind::OracleCheck) => {
            if !grid_given {
                for n in 2..=n_max {
                    for k in 1..=n / 2 {
                        grid.push(ModelSpec { n, k });
                    }
                }
                if grid.is_empty() {
                    r.errors
                        .push("oracle-check grid is empty (n_max < 2)".into());
                }
            }
        }
        Some(kind) => {
            if !grid_given {
                r.errors.push(format!(
                    "{} needs `n` and `k`, `grid`, or `n_values` with `k_rule`",
                    kind.name()
                ));
            }
            if kind == Kind::Sweep {
                let mut ns: Vec<usize> = grid.iter().map(|m| m.n).collect();
                ns.sort_unstable();
                ns.dedup();
                if grid_given && ns.len() < 3 {
                    r.errors.push(format!(
                        "sweep needs at least 3 distinct n, got {}",
                        ns.len()
                    ));
                }
            }
        }
        None => {}
    }

    if !r.errors.is_empty() {
        return Err(ConfigErrors(r.errors));
    }
    Ok(ExperimentConfig {
        kind: kind.expect("checked"),
        grid,
        walk_n,
        t_min,
        t_max,
        stride,
        t_values,
        eps,
        replicas,
        seed,
        alpha,
        beta,
        q,
        residual,
        gamma,
        n_max,
        m_max,
        steps_max,
        inject_fault,
        output,
        format,
        threads,
    })
}

impl ExperimentConfig {
    /// Canonical JSON of every field that can change the results.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
