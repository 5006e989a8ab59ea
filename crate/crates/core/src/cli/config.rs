//! Flat `key = value` configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::shooting::ShootingMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ProfileCheck,
    ModeStability,
    Equivalence,
    LinearDecay,
    NonlinearTrap,
    Shoot,
    Trichotomy,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::ProfileCheck,
        Experiment::ModeStability,
        Experiment::Equivalence,
        Experiment::LinearDecay,
        Experiment::NonlinearTrap,
        Experiment::Shoot,
        Experiment::Trichotomy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::ProfileCheck => "profile-check",
            Experiment::ModeStability => "mode-stability",
            Experiment::Equivalence => "equivalence",
            Experiment::LinearDecay => "linear-decay",
            Experiment::NonlinearTrap => "nonlinear-trap",
            Experiment::Shoot => "shoot",
            Experiment::Trichotomy => "trichotomy",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
            Error::Config(format!(
                "unknown experiment `{s}` (expected one of {})",
                names.join(", ")
            ))
        })
    }
}

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("n", "spatial dimension N ≥ 1"),
    ("p", "nonlinearity exponent p > 1"),
    ("k", "Sobolev index k > N/2"),
    ("r", "truncation radius R ≥ 1"),
    ("d0", "reference rapidity, comma separated, |d0| < 1"),
    ("omega0", "decay threshold ω0 inside the admissible window"),
    ("m", "polynomial degree M of the collocation grid, 8..=256"),
    ("ell_max", "largest spherical harmonic degree for N ≥ 2, ≤ 32"),
    ("tol_match", "eigenvalue matching tolerance between resolutions"),
    ("tol_eig", "distance to 0 or 1 counted as the exact eigenvalue"),
    ("tol_resid", "relative eigen-residual bound for resolution-stable pairs"),
    ("omega_cmp", "comparison threshold for the equivalence check"),
    (
        "d",
        "rapidities; `;` separates vectors, for N = 1 commas separate scalars",
    ),
    ("horizon", "evolution horizon S"),
    ("h", "Duhamel grid step"),
    ("checkpoint", "spacing of trace checkpoints"),
    ("samples", "number of random states or perturbations, 1..=1000"),
    ("seed", "base seed of the random generator"),
    ("f_norm", "norm of the random perturbations"),
    ("fit_from", "start of the decay fit window"),
    ("tol_fp", "Picard convergence tolerance in the weighted sup norm"),
    ("tol_shoot", "Newton tolerance on the correction amplitudes"),
    ("max_iter", "Newton iteration cap"),
    ("fd_step", "finite difference step of the Newton Jacobian"),
    ("delta", "smallness budget δ"),
    ("c_const", "constant C in ‖f‖ ≤ δ/C²"),
    ("epsilon", "rate margin ε in the decay certificate"),
    ("decay_factor", "constant of the decay certificate"),
    ("s_check", "end of the decay certificate window"),
    ("shoot_mode", "stabilized or direct"),
    ("direct_horizon", "evaluation time of the direct shooting map"),
    ("tol_b", "|b*| below this classifies as trapped"),
    ("perturbation", "size h of the ±h κ_{d0} trichotomy seeds"),
    ("out", "output directory"),
    ("plots", "write SVG plots (true/false)"),
];

/// Raw key/value pairs after merging file and flags.
#[derive(Debug, Clone, Default)]
pub struct RawConfig(pub BTreeMap<String, String>);

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
            let k = k.trim().to_string();
            check_key(&k)?;
            if map.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", no + 1)));
            }
        }
        Ok(RawConfig(map))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Apply `--key value` pairs; flags win over file entries.
    pub fn apply_flags(&mut self, flags: &[String]) -> Result<()> {
        let mut it = flags.iter();
        while let Some(flag) = it.next() {
            let (key, inline) = match flag.strip_prefix("--") {
                Some(rest) => match rest.split_once('=') {
                    Some((k, v)) => (k.to_string(), Some(v.to_string())),
                    None => (rest.to_string(), None),
                },
                None => return Err(Error::Config(format!("expected `--key value`, got `{flag}`"))),
            };
            let key = key.replace('-', "_");
            check_key(&key)?;
            let value = match inline {
                Some(v) => v,
                None => it
                    .next()
                    .cloned()
                    .ok_or_else(|| Error::Config(format!("flag --{key} needs a value")))?,
            };
            self.0.insert(key, value);
        }
        Ok(())
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{v}`"))),
        }
    }
}

fn check_key(k: &str) -> Result<()> {
    if KEYS.iter().any(|(name, _)| *name == k) {
        Ok(())
    } else {
        Err(Error::Config(format!("unknown key `{k}`")))
    }
}

fn parse_vec(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("cannot parse number `{x}`")))
        })
        .collect()
}

fn parse_d_list(s: &str, n: usize) -> Result<Vec<Vec<f64>>> {
    if s.contains(';') {
        s.split(';').filter(|x| !x.trim().is_empty()).map(parse_vec).collect()
    } else if n == 1 {
        Ok(parse_vec(s)?.into_iter().map(|x| vec![x]).collect())
    } else {
        Ok(vec![parse_vec(s)?])
    }
}

/// Validated settings of one run.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n: usize,
    pub p: f64,
    pub k: usize,
    pub r: f64,
    pub d0: Vec<f64>,
    pub omega0: f64,
    pub m: usize,
    pub ell_max: usize,
    pub tol_match: f64,
    pub tol_eig: f64,
    pub tol_resid: f64,
    pub omega_cmp: f64,
    pub d_list: Vec<Vec<f64>>,
    pub horizon: f64,
    pub h: f64,
    pub checkpoint: f64,
    pub samples: usize,
    pub seed: u64,
    pub f_norm: f64,
    pub fit_from: f64,
    pub tol_fp: f64,
    pub tol_shoot: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    pub delta: f64,
    pub c_const: f64,
    pub epsilon: f64,
    pub decay_factor: f64,
    pub s_check: f64,
    pub shoot_mode: ShootingMode,
    pub direct_horizon: f64,
    pub tol_b: f64,
    pub perturbation: f64,
    pub out: PathBuf,
    pub plots: bool,
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!(
            "key `{key}` must be positive and finite, got {v}"
        )))
    }
}

fn default_m(experiment: Experiment, n: usize) -> usize {
    match experiment {
        Experiment::Shoot | Experiment::Trichotomy | Experiment::NonlinearTrap => 32,
        // exact constant modes: only rounding remains, and it grows with M
        Experiment::ProfileCheck if n >= 2 => 32,
        _ => 48,
    }
}

fn default_omega0(n: usize, p: f64, k: usize) -> f64 {
    let s = 2.0 / (p - 1.0);
    let lo = (-1.0f64).max(n as f64 / 2.0 - s - k as f64).max(-s);
    if lo < -0.4 {
        -0.4
    } else {
        lo / 2.0
    }
}

impl ExperimentConfig {
    pub fn from_raw(experiment: Experiment, raw: &RawConfig) -> Result<Self> {
        let n: usize = raw.get("n")?.unwrap_or(1);
        let p: f64 = raw.get("p")?.unwrap_or(3.0);
        let k: usize = raw.get("k")?.unwrap_or(if n == 1 { 1 } else { n / 2 + 1 });
        let r: f64 = raw.get("r")?.unwrap_or(1.0);
        let d0 = match raw.0.get("d0") {
            Some(v) => parse_vec(v)?,
            None => {
                let mut v = vec![0.0; n.max(1)];
                if matches!(experiment, Experiment::Shoot | Experiment::NonlinearTrap) {
                    v[0] = 0.3;
                }
                v
            }
        };
        let omega0 = match raw.get::<f64>("omega0")? {
            Some(v) => v,
            None if p > 1.0 => default_omega0(n, p, k),
            None => -0.4,
        };
        let default_d = match experiment {
            Experiment::ModeStability => vec![vec![0.0; n.max(1)]],
            Experiment::Equivalence => [0.2, 0.4, 0.6]
                .iter()
                .map(|x| {
                    let mut v = vec![0.0; n.max(1)];
                    v[0] = *x;
                    v
                })
                .collect(),
            Experiment::ProfileCheck => [0.0, 0.3, 0.5, 0.6]
                .iter()
                .map(|x| {
                    let mut v = vec![0.0; n.max(1)];
                    v[0] = *x;
                    v
                })
                .collect(),
            _ => vec![d0.clone()],
        };
        let d_list = match raw.0.get("d") {
            Some(v) => parse_d_list(v, n)?,
            None => default_d,
        };
        let shoot_mode = match raw.0.get("shoot_mode").map(String::as_str) {
            None | Some("stabilized") => ShootingMode::Stabilized,
            Some("direct") => ShootingMode::Direct,
            Some(other) => {
                return Err(Error::Config(format!(
                    "shoot_mode must be stabilized or direct, got `{other}`"
                )))
            }
        };
        let horizon_default = match experiment {
            Experiment::LinearDecay => 12.0,
            Experiment::Trichotomy => 30.0,
            _ => 15.0,
        };
        let samples_default = match experiment {
            Experiment::LinearDecay => 20,
            Experiment::Shoot => 10,
            _ => 1,
        };
        let cfg = ExperimentConfig {
            experiment,
            n,
            p,
            k,
            r,
            d0,
            omega0,
            m: raw.get("m")?.unwrap_or(default_m(experiment, n)),
            ell_max: raw.get("ell_max")?.unwrap_or(8),
            tol_match: positive("tol_match", raw.get("tol_match")?.unwrap_or(1e-6))?,
            tol_eig: positive("tol_eig", raw.get("tol_eig")?.unwrap_or(1e-6))?,
            tol_resid: positive("tol_resid", raw.get("tol_resid")?.unwrap_or(1e-10))?,
            omega_cmp: raw.get("omega_cmp")?.unwrap_or(-0.5),
            d_list,
            horizon: positive("horizon", raw.get("horizon")?.unwrap_or(horizon_default))?,
            h: positive("h", raw.get("h")?.unwrap_or(0.02))?,
            checkpoint: positive("checkpoint", raw.get("checkpoint")?.unwrap_or(0.1))?,
            samples: raw.get("samples")?.unwrap_or(samples_default),
            seed: raw.get("seed")?.unwrap_or(2024),
            f_norm: positive("f_norm", raw.get("f_norm")?.unwrap_or(1e-4))?,
            fit_from: raw.get("fit_from")?.unwrap_or(2.0),
            tol_fp: positive("tol_fp", raw.get("tol_fp")?.unwrap_or(1e-13))?,
            tol_shoot: positive("tol_shoot", raw.get("tol_shoot")?.unwrap_or(1e-10))?,
            max_iter: raw.get("max_iter")?.unwrap_or(20),
            fd_step: positive("fd_step", raw.get("fd_step")?.unwrap_or(1e-6))?,
            delta: positive("delta", raw.get("delta")?.unwrap_or(1e-2))?,
            c_const: positive("c_const", raw.get("c_const")?.unwrap_or(1.0))?,
            epsilon: positive("epsilon", raw.get("epsilon")?.unwrap_or(0.1))?,
            decay_factor: positive("decay_factor", raw.get("decay_factor")?.unwrap_or(2.0))?,
            s_check: positive("s_check", raw.get("s_check")?.unwrap_or(10.0))?,
            shoot_mode,
            direct_horizon: positive("direct_horizon", raw.get("direct_horizon")?.unwrap_or(8.0))?,
            tol_b: positive("tol_b", raw.get("tol_b")?.unwrap_or(1e-6))?,
            perturbation: positive("perturbation", raw.get("perturbation")?.unwrap_or(1e-3))?,
            out: raw
                .get::<String>("out")?
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("blowlab-out")),
            plots: raw.get("plots")?.unwrap_or(true),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(8..=256).contains(&self.m) {
            return bad(format!("m must lie in 8..=256, got {}", self.m));
        }
        if self.ell_max > 32 {
            return bad(format!("ell_max must be ≤ 32, got {}", self.ell_max));
        }
        if !(1..=1000).contains(&self.samples) {
            return bad(format!("samples must lie in 1..=1000, got {}", self.samples));
        }
        if self.h > 0.5 || self.checkpoint > self.horizon {
            return bad("h ≤ 0.5 and checkpoint ≤ horizon required".into());
        }
        if self.horizon > 200.0 {
            return bad(format!("horizon must be ≤ 200, got {}", self.horizon));
        }
        if self.max_iter == 0 || self.max_iter > 200 {
            return bad(format!("max_iter must lie in 1..=200, got {}", self.max_iter));
        }
        if self.d0.len() != self.n || self.d_list.iter().any(|d| d.len() != self.n) {
            return bad(format!("rapidities must have {} components", self.n));
        }
        if self.fit_from < 0.0 || self.fit_from >= self.horizon {
            return bad("0 ≤ fit_from < horizon required".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_blank_lines_and_flags() {
        let mut raw = RawConfig::parse("# base point\np = 3\n\nm = 24  # coarse\n").unwrap();
        raw.apply_flags(&["--m".into(), "32".into(), "--tol-eig=1e-7".into()])
            .unwrap();
        let cfg = ExperimentConfig::from_raw(Experiment::ModeStability, &raw).unwrap();
        assert_eq!(cfg.m, 32);
        assert_eq!(cfg.tol_eig, 1e-7);
        assert_eq!(cfg.d_list, vec![vec![0.0]]);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(matches!(RawConfig::parse("q = 1"), Err(Error::Config(_))));
        assert!(matches!(RawConfig::parse("p 3"), Err(Error::Config(_))));
        assert!(matches!(RawConfig::parse("p = 3\np = 5"), Err(Error::Config(_))));
        let mut raw = RawConfig::default();
        assert!(raw.apply_flags(&["--nope".into(), "1".into()]).is_err());
        assert!(raw.apply_flags(&["--m".into()]).is_err());
        let raw = RawConfig::parse("m = 4").unwrap();
        assert!(ExperimentConfig::from_raw(Experiment::ModeStability, &raw).is_err());
    }

    #[test]
    fn rapidity_lists() {
        assert_eq!(parse_d_list("0.2,0.4", 1).unwrap(), vec![vec![0.2], vec![0.4]]);
        assert_eq!(parse_d_list("0.2,0,0", 3).unwrap(), vec![vec![0.2, 0.0, 0.0]]);
        assert_eq!(
            parse_d_list("0.2,0;0,0.1", 2).unwrap(),
            vec![vec![0.2, 0.0], vec![0.0, 0.1]]
        );
        assert_eq!("shoot".parse::<Experiment>().unwrap(), Experiment::Shoot);
        assert!("nope".parse::<Experiment>().is_err());
    }

    #[test]
    fn default_threshold_lies_in_window() {
        assert_eq!(default_omega0(1, 3.0, 1), -0.4);
        // N = 3, p = 5, k = 2: window (−1/2, 0)
        let w = default_omega0(3, 5.0, 2);
        assert!(w > -0.5 && w < 0.0);
        // p = 9: s = 1/4, window (−1/4, 0)
        assert_eq!(default_omega0(1, 9.0, 1), -0.125);
    }
}
