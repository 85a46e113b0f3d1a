//! Flat `key = value` run configuration.
//!
//! Every key has a default; unknown keys, malformed lines and out-of-range
//! values are reported with their line number. The canonical serialization
//! lists keys in sorted order, so the config hash does not depend on how the
//! input file was ordered.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::galerkin::{project, EigenBasis, Integrator, ModalState};
use crate::kernel::{Field, FractionalOrder};
use crate::stochastic::{Intensity, NoiseModel};

pub const SEED_ENV: &str = "NLBURGERS_SEED";
pub const THREADS_ENV: &str = "NLBURGERS_THREADS";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    /// interpolant of `sin(π(x+1)/2)(1 − x²)`
    SinBump,
    /// `(1 − x²)^{α/2}`
    Getoor,
    /// `c_i = ξ_i / i` for `i ≤ k`, `ξ` standard normal from `seed`
    RandomModal { k: usize, seed: u64 },
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialCondition::SinBump => f.write_str("sin_bump"),
            InitialCondition::Getoor => f.write_str("getoor"),
            InitialCondition::RandomModal { k, seed } => write!(f, "random_modal({k}, {seed})"),
        }
    }
}

impl FromStr for InitialCondition {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sin_bump" => return Ok(InitialCondition::SinBump),
            "getoor" => return Ok(InitialCondition::Getoor),
            _ => {}
        }
        let inner = s
            .strip_prefix("random_modal(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| {
                format!("unknown initial condition `{s}` (sin_bump | getoor | random_modal(k, seed))")
            })?;
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(format!("random_modal takes two arguments, got `{inner}`"));
        }
        let k: usize = parts[0]
            .parse()
            .map_err(|_| format!("random_modal: bad mode count `{}`", parts[0]))?;
        let seed: u64 = parts[1]
            .parse()
            .map_err(|_| format!("random_modal: bad seed `{}`", parts[1]))?;
        if k == 0 {
            return Err("random_modal: k must be at least 1".into());
        }
        Ok(InitialCondition::RandomModal { k, seed })
    }
}

impl InitialCondition {
    /// Modal coefficients of the initial datum in `basis`.
    pub fn modal_state(&self, basis: &EigenBasis, alpha: FractionalOrder) -> Result<ModalState> {
        let mesh = basis.mesh();
        match *self {
            InitialCondition::SinBump => project(
                basis,
                &Field::interpolate(mesh, |x| {
                    (std::f64::consts::FRAC_PI_2 * (x + 1.0)).sin() * (1.0 - x * x)
                }),
            ),
            InitialCondition::Getoor => {
                let a = alpha.value();
                project(basis, &Field::interpolate(mesh, |x| (1.0 - x * x).max(0.0).powf(a / 2.0)))
            }
            InitialCondition::RandomModal { k, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut c = vec![0.0; basis.n_modes()];
                // draw all k so truncating the basis keeps the same leading coefficients
                for i in 0..k {
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    if i < c.len() {
                        c[i] = xi / (i + 1) as f64;
                    }
                }
                Ok(ModalState { c, t: 0.0 })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub epsilon: f64,
    /// number of forced modes; `None` means `n_modes`
    pub m: Option<usize>,
}

impl NoiseConfig {
    pub fn model(&self, n_modes: usize) -> Result<NoiseModel> {
        let intensity = match self.kind {
            NoiseKind::Additive => Intensity::Additive { sigma: self.sigma },
            NoiseKind::Multiplicative => Intensity::Multiplicative { sigma: self.sigma },
        };
        NoiseModel::power_law(self.m.unwrap_or(n_modes), self.epsilon, intensity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub n_cells: usize,
    pub n_modes: usize,
    pub dt: f64,
    pub t_final: f64,
    pub initial: InitialCondition,
    pub integrator: Integrator,
    /// record every `stride` steps
    pub stride: usize,
    pub noise: Option<NoiseConfig>,
    pub mc_paths: usize,
    pub seed: u64,
    /// number of moment checkpoints in (0, t_final]
    pub checkpoints: usize,
    /// Besov time exponent
    pub gamma: f64,
    /// Besov dual order; `None` means `2 + α + 0.5`
    pub delta: Option<f64>,
    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: 1.5,
            n_cells: 64,
            n_modes: 16,
            dt: 1e-3,
            t_final: 1.0,
            initial: InitialCondition::SinBump,
            integrator: Integrator::Etd2,
            stride: 10,
            noise: None,
            mc_paths: 1000,
            seed: 42,
            checkpoints: 10,
            gamma: 0.4,
            delta: None,
            output_dir: "out".to_string(),
        }
    }
}

const KEYS: &[&str] = &[
    "alpha",
    "checkpoints",
    "delta",
    "dt",
    "gamma",
    "initial",
    "integrator",
    "mc_paths",
    "n_cells",
    "n_modes",
    "noise",
    "noise_epsilon",
    "noise_m",
    "noise_sigma",
    "output_dir",
    "seed",
    "stride",
    "t_final",
];

fn parse_num<T: FromStr>(v: &str, line: usize, key: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config {
        line,
        reason: format!("`{key}`: cannot parse `{v}`"),
    })
}

/// Parses and validates a configuration file.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut seen: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| Error::Config {
            line,
            reason: format!("expected `key = value`, got `{body}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(Error::Config {
                line,
                reason: format!("unknown key `{k}`"),
            });
        }
        if v.is_empty() {
            return Err(Error::Config {
                line,
                reason: format!("`{k}` has no value"),
            });
        }
        if let Some((first, _)) = seen.get(k) {
            return Err(Error::Config {
                line,
                reason: format!("`{k}` already set on line {first}"),
            });
        }
        seen.insert(k.to_string(), (line, v.to_string()));
    }

    let mut cfg = RunConfig::default();
    let get = |k: &str| seen.get(k).map(|(l, v)| (*l, v.as_str()));
    let range = |line: usize, reason: String| Error::Config { line, reason };

    if let Some((l, v)) = get("alpha") {
        cfg.alpha = parse_num(v, l, "alpha")?;
        FractionalOrder::new(cfg.alpha).map_err(|e| range(l, e.to_string()))?;
    }
    if let Some((l, v)) = get("n_cells") {
        cfg.n_cells = parse_num(v, l, "n_cells")?;
        if cfg.n_cells < 4 {
            return Err(range(l, format!("n_cells = {} must be at least 4", cfg.n_cells)));
        }
    }
    let n_modes_line = get("n_modes").map(|(l, _)| l);
    if let Some((l, v)) = get("n_modes") {
        cfg.n_modes = parse_num(v, l, "n_modes")?;
    }
    if cfg.n_modes == 0 || cfg.n_modes > cfg.n_cells - 1 {
        return Err(range(
            n_modes_line.or(get("n_cells").map(|(l, _)| l)).unwrap_or(0),
            format!("n_modes = {} outside [1, n_cells - 1 = {}]", cfg.n_modes, cfg.n_cells - 1),
        ));
    }
    if let Some((l, v)) = get("dt") {
        cfg.dt = parse_num(v, l, "dt")?;
        if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
            return Err(range(l, format!("dt = {} must be positive", cfg.dt)));
        }
    }
    if let Some((l, v)) = get("t_final") {
        cfg.t_final = parse_num(v, l, "t_final")?;
        if !(cfg.t_final > 0.0 && cfg.t_final.is_finite()) {
            return Err(range(l, format!("t_final = {} must be positive", cfg.t_final)));
        }
    }
    if cfg.dt > cfg.t_final {
        return Err(range(
            get("dt").map_or(0, |(l, _)| l),
            format!("dt = {} exceeds t_final = {}", cfg.dt, cfg.t_final),
        ));
    }
    if let Some((l, v)) = get("initial") {
        cfg.initial = v.parse().map_err(|e: String| range(l, e))?;
    }
    if let Some((l, v)) = get("integrator") {
        cfg.integrator = v.parse().map_err(|e: String| range(l, e))?;
    }
    if let Some((l, v)) = get("stride") {
        cfg.stride = parse_num(v, l, "stride")?;
        if cfg.stride == 0 {
            return Err(range(l, "stride must be at least 1".into()));
        }
    }
    if let Some((l, v)) = get("mc_paths") {
        cfg.mc_paths = parse_num(v, l, "mc_paths")?;
        if cfg.mc_paths < 2 {
            return Err(range(l, "mc_paths must be at least 2".into()));
        }
    }
    if let Some((l, v)) = get("seed") {
        cfg.seed = parse_num(v, l, "seed")?;
    }
    if let Some((l, v)) = get("checkpoints") {
        cfg.checkpoints = parse_num(v, l, "checkpoints")?;
        if cfg.checkpoints == 0 {
            return Err(range(l, "checkpoints must be at least 1".into()));
        }
    }
    if let Some((l, v)) = get("gamma") {
        cfg.gamma = parse_num(v, l, "gamma")?;
        if !(cfg.gamma > 0.0 && cfg.gamma < 0.5) {
            return Err(range(l, format!("gamma = {} outside (0, 1/2)", cfg.gamma)));
        }
    }
    if let Some((l, v)) = get("delta") {
        let d: f64 = parse_num(v, l, "delta")?;
        if !(d > 0.0 && d.is_finite()) {
            return Err(range(l, format!("delta = {d} must be positive")));
        }
        cfg.delta = Some(d);
    }
    if let Some((_, v)) = get("output_dir") {
        cfg.output_dir = v.to_string();
    }

    let kind = match get("noise") {
        None | Some((_, "none")) => None,
        Some((_, "additive")) => Some(NoiseKind::Additive),
        Some((_, "multiplicative")) => Some(NoiseKind::Multiplicative),
        Some((l, other)) => {
            return Err(range(
                l,
                format!("unknown noise kind `{other}` (none | additive | multiplicative)"),
            ))
        }
    };
    match kind {
        None => {
            for k in ["noise_sigma", "noise_epsilon", "noise_m"] {
                if let Some((l, _)) = get(k) {
                    return Err(range(l, format!("`{k}` given but noise is none")));
                }
            }
        }
        Some(kind) => {
            let mut nc = NoiseConfig {
                kind,
                sigma: 0.1,
                epsilon: 0.1,
                m: None,
            };
            if let Some((l, v)) = get("noise_sigma") {
                nc.sigma = parse_num(v, l, "noise_sigma")?;
                if !(nc.sigma >= 0.0 && nc.sigma.is_finite()) {
                    return Err(range(l, format!("noise_sigma = {} must be non-negative", nc.sigma)));
                }
            }
            if let Some((l, v)) = get("noise_epsilon") {
                nc.epsilon = parse_num(v, l, "noise_epsilon")?;
                if !(nc.epsilon > 0.0 && nc.epsilon.is_finite()) {
                    return Err(range(l, format!("noise_epsilon = {} must be positive", nc.epsilon)));
                }
            }
            if let Some((l, v)) = get("noise_m") {
                let m: usize = parse_num(v, l, "noise_m")?;
                if m == 0 {
                    return Err(range(l, "noise_m must be at least 1".into()));
                }
                nc.m = Some(m);
            }
            cfg.noise = Some(nc);
        }
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn order(&self) -> FractionalOrder {
        FractionalOrder::new(self.alpha).expect("validated on parse")
    }

    pub fn besov_delta(&self) -> f64 {
        self.delta.unwrap_or(2.0 + self.alpha + 0.5)
    }

    pub fn steps(&self) -> usize {
        crate::galerkin::step_count(self.t_final, self.dt)
    }

    /// Canonical text: every key, sorted, one per line. Floats use the
    /// shortest representation that round-trips.
    pub fn to_text(&self) -> String {
        let mut m: BTreeMap<&str, String> = BTreeMap::new();
        m.insert("alpha", format!("{:?}", self.alpha));
        m.insert("checkpoints", self.checkpoints.to_string());
        if let Some(d) = self.delta {
            m.insert("delta", format!("{d:?}"));
        }
        m.insert("dt", format!("{:?}", self.dt));
        m.insert("gamma", format!("{:?}", self.gamma));
        m.insert("initial", self.initial.to_string());
        m.insert("integrator", self.integrator.to_string());
        m.insert("mc_paths", self.mc_paths.to_string());
        m.insert("n_cells", self.n_cells.to_string());
        m.insert("n_modes", self.n_modes.to_string());
        match &self.noise {
            None => {
                m.insert("noise", "none".into());
            }
            Some(nc) => {
                m.insert(
                    "noise",
                    match nc.kind {
                        NoiseKind::Additive => "additive",
                        NoiseKind::Multiplicative => "multiplicative",
                    }
                    .into(),
                );
                m.insert("noise_sigma", format!("{:?}", nc.sigma));
                m.insert("noise_epsilon", format!("{:?}", nc.epsilon));
                if let Some(k) = nc.m {
                    m.insert("noise_m", k.to_string());
                }
            }
        }
        m.insert("output_dir", self.output_dir.clone());
        m.insert("seed", self.seed.to_string());
        m.insert("stride", self.stride.to_string());
        m.insert("t_final", format!("{:?}", self.t_final));
        m.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_text().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Effective values of the environment overrides.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EnvOverrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// Reads the seed and thread-count overrides, applying the seed to `cfg`.
pub fn apply_env_overrides(cfg: &mut RunConfig) -> Result<EnvOverrides> {
    let read = |name: &str| std::env::var(name).ok().filter(|s| !s.trim().is_empty());
    let mut out = EnvOverrides::default();
    if let Some(s) = read(SEED_ENV) {
        let seed = s.trim().parse().map_err(|_| Error::Config {
            line: 0,
            reason: format!("{SEED_ENV} = `{s}` is not an unsigned integer"),
        })?;
        cfg.seed = seed;
        out.seed = Some(seed);
    }
    if let Some(s) = read(THREADS_ENV) {
        let t: usize = s.trim().parse().map_err(|_| Error::Config {
            line: 0,
            reason: format!("{THREADS_ENV} = `{s}` is not a positive integer"),
        })?;
        if t == 0 {
            return Err(Error::Config {
                line: 0,
                reason: format!("{THREADS_ENV} must be positive"),
            });
        }
        out.threads = Some(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse_config("# nothing\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn alpha_range_error_has_line() {
        match parse_config("n_cells = 32\nalpha = 2.5\n") {
            Err(Error::Config { line, reason }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("(0, 2)"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_and_malformed_lines() {
        assert!(matches!(parse_config("foo = 1"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse_config("\nalpha 1.5"), Err(Error::Config { line: 2, .. })));
        assert!(matches!(parse_config("alpha = 1\nalpha = 1.2"), Err(Error::Config { line: 2, .. })));
        assert!(matches!(parse_config("noise_sigma = 0.3"), Err(Error::Config { line: 1, .. })));
    }

    #[test]
    fn initial_condition_syntax() {
        assert_eq!(
            "random_modal(5, 9)".parse::<InitialCondition>().unwrap(),
            InitialCondition::RandomModal { k: 5, seed: 9 }
        );
        assert!("random_modal(0, 9)".parse::<InitialCondition>().is_err());
        assert!("bump".parse::<InitialCondition>().is_err());
    }

    #[test]
    fn round_trip_and_order_independent_hash() {
        let a = "alpha = 1.2\nnoise = multiplicative\nnoise_sigma = 0.3\nn_modes = 8\ninitial = random_modal(4, 7)\n";
        let b = "initial = random_modal(4, 7)\nn_modes = 8\nnoise_sigma = 0.3\nnoise = multiplicative\nalpha = 1.2\n";
        let ca = parse_config(a).unwrap();
        let cb = parse_config(b).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(ca.hash(), cb.hash());
        assert_eq!(parse_config(&ca.to_text()).unwrap(), ca);
    }
}
