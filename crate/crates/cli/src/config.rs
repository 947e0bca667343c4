//! Run configuration: an optional TOML file with one section per command,
//! overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use warped_disk::geometry::BUILTIN_NAMES;
use warped_disk::grid::RadialGrid;
use warped_disk::io::ProfileDefinition;
use warped_disk::verify::{VerifyConfig, TOLERANCE_FLOOR};

/// Problems with the configuration itself (exit 64).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

type Usage<T> = Result<T, UsageError>;

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    pub file: Option<PathBuf>,
    pub name: Option<String>,
    pub family: Option<String>,
    pub eps: Option<f64>,
    pub eta: Option<f64>,
    pub r0: Option<f64>,
    pub r_max: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub horizon: Option<f64>,
    pub m_max: Option<i64>,
    pub grid: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BvpSection {
    pub radius: Option<f64>,
    pub order: Option<usize>,
    pub trace: Option<PathBuf>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub profile: ProfileSection,
    pub classify: RunSection,
    pub modes: RunSection,
    pub bvp: BvpSection,
    pub verify: Option<VerifyConfig>,
    pub output: OutputSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> Usage<Self> {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }
}

/// Flags shared by the subcommands; `None` leaves the file value in place.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub profile: Option<String>,
    pub eps: Option<f64>,
    pub eta: Option<f64>,
    pub r0: Option<f64>,
    pub rmax: Option<f64>,
    pub horizon: Option<f64>,
    pub mmax: Option<i64>,
    pub grid: Option<String>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
}

pub const DEFAULT_HORIZON: f64 = 1000.0;
pub const DEFAULT_M_MAX: i64 = 8;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub profile: ProfileDefinition,
    pub horizon: f64,
    pub m_max: i64,
    pub grid: Option<GridSpec>,
    pub out: Option<PathBuf>,
}

fn check_tol(name: &str, v: f64) -> Usage<f64> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(usage(format!("{name} must be positive, got {v}")));
    }
    if v < TOLERANCE_FLOOR {
        return Err(usage(format!("{name} = {v:e} is below what double precision can deliver ({TOLERANCE_FLOOR:e})")));
    }
    Ok(v)
}

fn resolve_profile(file: &FileConfig, flags: &Overrides, base_dir: &Path) -> Usage<ProfileDefinition> {
    let sec = &file.profile;
    let mut def = match (&flags.profile, &sec.file, &sec.family) {
        (Some(p), _, _) if BUILTIN_NAMES.contains(&p.as_str()) => ProfileDefinition::builtin(p),
        (Some(p), _, _) => {
            let path = Path::new(p);
            if !path.is_file() {
                return Err(usage(format!(
                    "`{p}` is neither a built-in profile ({}) nor a file",
                    BUILTIN_NAMES.join(", ")
                )));
            }
            read_definition(path)?
        }
        (None, Some(f), _) => read_definition(&base_dir.join(f))?,
        (None, None, Some(fam)) => ProfileDefinition::builtin(fam),
        (None, None, None) => return Err(usage("no profile given (use --profile or a [profile] section)")),
    };
    // section values refine the chosen family unless a different built-in was named on the command line
    let same_family = flags.profile.as_deref().is_none_or(|p| sec.family.as_deref().is_none_or(|f| f == p));
    if same_family {
        def.name = sec.name.clone().or(def.name);
        def.eps = sec.eps.or(def.eps);
        def.eta = sec.eta.or(def.eta);
        def.r0 = sec.r0.or(def.r0);
        if let Some(v) = sec.r_max {
            def.r_max = v;
        }
        if let Some(v) = sec.rtol {
            def.rtol = v;
        }
        if let Some(v) = sec.atol {
            def.atol = v;
        }
    }
    def.eps = flags.eps.or(def.eps);
    def.eta = flags.eta.or(def.eta);
    def.r0 = flags.r0.or(def.r0);
    if let Some(v) = flags.rmax {
        def.r_max = v;
    }
    if let Some(v) = flags.tol {
        def.rtol = v;
    }
    check_tol("rtol", def.rtol)?;
    check_tol("atol", def.atol)?;
    def.validate().map_err(|e| usage(e.to_string()))?;
    Ok(def)
}

fn read_definition(path: &Path) -> Usage<ProfileDefinition> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    ProfileDefinition::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Resolves the profile and the run section of one command.
pub fn resolve_run(
    file: &FileConfig,
    section: &RunSection,
    flags: &Overrides,
    base_dir: &Path,
    rmax_given: bool,
) -> Usage<RunConfig> {
    let mut profile = resolve_profile(file, flags, base_dir)?;
    let horizon = flags.horizon.or(section.horizon).unwrap_or(DEFAULT_HORIZON);
    if !(horizon >= 1.0) || !horizon.is_finite() {
        return Err(usage(format!("horizon must be at least 1, got {horizon}")));
    }
    let explicit_rmax = rmax_given || flags.rmax.is_some() || file.profile.r_max.is_some();
    if !explicit_rmax {
        profile.r_max = horizon;
    } else if horizon > profile.r_max * (1.0 + 1e-12) {
        return Err(usage(format!("horizon {horizon} exceeds R_max {}", profile.r_max)));
    }
    let m_max = flags.mmax.or(section.m_max).unwrap_or(DEFAULT_M_MAX);
    if !(0..=512).contains(&m_max) {
        return Err(usage(format!("m-max must lie in [0, 512], got {m_max}")));
    }
    let grid = match flags.grid.as_ref().or(section.grid.as_ref()) {
        Some(s) => Some(GridSpec::parse(s)?),
        None => None,
    };
    let out = flags.out.clone().or_else(|| file.output.dir.as_ref().map(|d| base_dir.join(d)));
    Ok(RunConfig { profile, horizon, m_max, grid, out })
}

/// `kind:start:end:count`, with kind one of uniform, geometric, doubling
/// (for doubling, count is the number of nodes per octave).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub kind: String,
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn parse(s: &str) -> Usage<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || usage(format!("grid `{s}` is not kind:start:end:count"));
        if parts.len() != 4 {
            return Err(bad());
        }
        let kind = parts[0].to_string();
        if !["uniform", "geometric", "doubling"].contains(&kind.as_str()) {
            return Err(usage(format!("unknown grid kind `{kind}` (uniform, geometric, doubling)")));
        }
        let start = parts[1].parse::<f64>().map_err(|_| bad())?;
        let end = parts[2].parse::<f64>().map_err(|_| bad())?;
        let count = parts[3].parse::<usize>().map_err(|_| bad())?;
        Ok(Self { kind, start, end, count })
    }

    pub fn build(&self) -> Usage<RadialGrid> {
        let g = match self.kind.as_str() {
            "uniform" => RadialGrid::uniform(self.start, self.end, self.count),
            "geometric" => RadialGrid::geometric(self.start, self.end, self.count),
            _ => RadialGrid::doubling(self.start, self.end, self.count),
        };
        g.map_err(|e| usage(e.to_string()))
    }
}

/// Verification settings: `[verify]` section, then flags.
pub fn resolve_verify(file: &FileConfig, flags: &Overrides) -> Usage<VerifyConfig> {
    let mut cfg = file.verify.clone().unwrap_or_default();
    if let Some(t) = flags.tol {
        if !(t > 0.0) || !t.is_finite() {
            return Err(usage(format!("tol must be positive, got {t}")));
        }
        cfg.tol = t;
    }
    if let Some(h) = flags.horizon {
        if !(h >= 1.0) || !h.is_finite() {
            return Err(usage(format!("horizon must be at least 1, got {h}")));
        }
        cfg.horizon = h;
    }
    if let Some(m) = flags.mmax {
        if !(1..=64).contains(&m) {
            return Err(usage(format!("m-max must lie in [1, 64] for verification, got {m}")));
        }
        cfg.order = m as usize;
    }
    if cfg.radii.iter().any(|r| !(*r > 0.0)) {
        return Err(usage("verify radii must be positive"));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_specs() {
        let g = GridSpec::parse("doubling:0.5:8:4").unwrap().build().unwrap();
        assert_eq!(g.len(), 17);
        assert!(GridSpec::parse("doubling:0.5:8").is_err());
        assert!(GridSpec::parse("chebyshev:0:1:4").is_err());
        assert!(GridSpec::parse("uniform:1:0:4").unwrap().build().is_err());
    }

    #[test]
    fn flags_override_file() {
        let file: FileConfig =
            toml::from_str("[profile]\nfamily = \"power-curvature\"\neps = 0.5\n[classify]\nhorizon = 200.0\n")
                .unwrap();
        let flags = Overrides { eps: Some(2.0), ..Default::default() };
        let run = resolve_run(&file, &file.classify, &flags, Path::new("."), false).unwrap();
        assert_eq!(run.profile.eps, Some(2.0));
        assert_eq!(run.horizon, 200.0);
        assert_eq!(run.profile.r_max, 200.0);
        let other = Overrides { profile: Some("hyperbolic".into()), ..Default::default() };
        let run = resolve_run(&file, &file.classify, &other, Path::new("."), false).unwrap();
        assert_eq!((run.profile.family.as_str(), run.profile.eps), ("hyperbolic", None));
    }

    #[test]
    fn bad_settings_are_usage_errors() {
        let file = FileConfig::default();
        let base = Path::new(".");
        assert!(resolve_run(&file, &file.classify, &Overrides::default(), base, false).is_err());
        let tiny = Overrides { profile: Some("euclidean".into()), tol: Some(1e-20), ..Default::default() };
        assert!(resolve_run(&file, &file.classify, &tiny, base, false).is_err());
        let short = Overrides { profile: Some("euclidean".into()), rmax: Some(10.0), ..Default::default() };
        assert!(resolve_run(&file, &file.classify, &short, base, false).is_err());
        assert!(toml::from_str::<FileConfig>("[classify]\nbogus = 1\n").is_err());
    }
}
