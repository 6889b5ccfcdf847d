//! Run configuration: a flat TOML file, `BABENKO_*` environment variables
//! and command-line flags, in increasing order of precedence.

use std::path::{Path, PathBuf};

use babenko_core::solver::AEnd;
use babenko_core::SolverOptions;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Parser, Debug)]
#[command(name = "babenko", version, about = "Steady periodic water waves over constant vorticity")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the zero-gravity explicit solution at parameter `a`.
    Exact(ExactArgs),
    /// Newton solve from an initial file or from the laminar flow.
    Solve(SolveArgs),
    /// Continue a branch in `a` at fixed gravity and depth.
    Continue(ContinueArgs),
    /// Refine an event on a stored branch.
    Events(EventsArgs),
    /// Critical-layer analysis of a stored solution.
    Critlayer(CritArgs),
    /// Run the validation suite.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
}

/// Options shared by every subcommand.
#[derive(Args, Debug, Default, Clone)]
pub struct Global {
    /// TOML configuration file.
    #[arg(long, global = true, env = "BABENKO_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "BABENKO_OUT")]
    pub out: Option<PathBuf>,
    /// Truncation order.
    #[arg(long, global = true, env = "BABENKO_N")]
    pub n: Option<usize>,
    /// Seed for randomized checks.
    #[arg(long, global = true, env = "BABENKO_SEED")]
    pub seed: Option<u64>,
    /// Format of summary tables.
    #[arg(long, global = true, env = "BABENKO_FORMAT")]
    pub format: Option<TableFormat>,
    #[arg(long, global = true, env = "BABENKO_NEWTON_TOL")]
    pub newton_tol: Option<f64>,
    #[arg(long, global = true, env = "BABENKO_MAX_NEWTON_ITERS")]
    pub max_newton_iters: Option<usize>,
    #[arg(long, global = true, env = "BABENKO_MAX_ORDER")]
    pub max_order: Option<usize>,
    #[arg(long, global = true, env = "BABENKO_INITIAL_STEP")]
    pub initial_step: Option<f64>,
    #[arg(long, global = true, env = "BABENKO_MIN_STEP")]
    pub min_step: Option<f64>,
    #[arg(long, global = true, env = "BABENKO_MAX_STEP")]
    pub max_step: Option<f64>,
    #[arg(long, global = true, env = "BABENKO_GAP_TOL")]
    pub gap_tol: Option<f64>,
    #[arg(long, global = true, env = "BABENKO_SLOPE_TOL")]
    pub slope_tol: Option<f64>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct ExactArgs {
    #[arg(long, env = "BABENKO_A", allow_hyphen_values = true)]
    pub a: Option<f64>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct SolveArgs {
    #[arg(long, env = "BABENKO_G", allow_hyphen_values = true)]
    pub g: Option<f64>,
    #[arg(long, env = "BABENKO_A", allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, env = "BABENKO_L")]
    pub l: Option<f64>,
    /// Initial guess (solution file); the laminar flow when absent.
    #[arg(long, env = "BABENKO_INIT")]
    pub init: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct ContinueArgs {
    #[arg(long, env = "BABENKO_G", allow_hyphen_values = true)]
    pub g: Option<f64>,
    #[arg(long, env = "BABENKO_L")]
    pub l: Option<f64>,
    /// Start at the laminar bifurcation instead of an initial file.
    #[arg(long, env = "BABENKO_FROM_BIFURCATION", num_args = 0..=1, default_missing_value = "true")]
    pub from_bifurcation: Option<bool>,
    /// Starting solution file.
    #[arg(long, env = "BABENKO_INIT")]
    pub init: Option<PathBuf>,
    /// Final `a`, or `touch` to stop at self-contact.
    #[arg(long, env = "BABENKO_A_END", allow_hyphen_values = true)]
    pub a_end: Option<String>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct EventsArgs {
    /// bifurcation, breaking, overhang_onset or touching.
    #[arg(long, env = "BABENKO_KIND")]
    pub kind: Option<String>,
    #[arg(long, env = "BABENKO_BRANCH")]
    pub branch: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct CritArgs {
    /// Solution file.
    #[arg(long, env = "BABENKO_INPUT")]
    pub input: Option<PathBuf>,
    /// Location of the vertical tangent, overriding the search.
    #[arg(long, env = "BABENKO_ALPHA", allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, env = "BABENKO_HALF_WIDTH")]
    pub half_width: Option<f64>,
    #[arg(long, env = "BABENKO_COLUMNS")]
    pub columns: Option<usize>,
    /// Lower edge of the field window in β.
    #[arg(long, env = "BABENKO_BETA_MIN", allow_hyphen_values = true)]
    pub beta_min: Option<f64>,
    /// Field resolution along each axis.
    #[arg(long, env = "BABENKO_FIELD_POINTS")]
    pub field_points: Option<usize>,
    #[arg(long, env = "BABENKO_EXPERIMENTAL_FINITE_DEPTH", num_args = 0..=1, default_missing_value = "true")]
    pub experimental_finite_depth: Option<bool>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct ValidateArgs {
    /// Comma-separated check names.
    #[arg(long, env = "BABENKO_ONLY", value_delimiter = ',')]
    pub only: Option<Vec<String>>,
    /// Test hook: perturb the named check so that it fails.
    #[arg(long, env = "BABENKO_INJECT")]
    pub inject: Option<String>,
}

/// Contents of a configuration file. Every key is optional.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub out: Option<PathBuf>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub format: Option<TableFormat>,
    pub newton_tol: Option<f64>,
    pub max_newton_iters: Option<usize>,
    pub max_order: Option<usize>,
    pub initial_step: Option<f64>,
    pub min_step: Option<f64>,
    pub max_step: Option<f64>,
    pub gap_tol: Option<f64>,
    pub slope_tol: Option<f64>,
    pub g: Option<f64>,
    pub a: Option<f64>,
    pub l: Option<f64>,
    pub init: Option<PathBuf>,
    pub from_bifurcation: Option<bool>,
    pub a_end: Option<toml::Value>,
    pub kind: Option<String>,
    pub branch: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub half_width: Option<f64>,
    pub columns: Option<usize>,
    pub beta_min: Option<f64>,
    pub field_points: Option<usize>,
    pub experimental_finite_depth: Option<bool>,
    pub only: Option<Vec<String>>,
    pub inject: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    fn a_end_string(&self) -> Result<Option<String>, CliError> {
        Ok(match &self.a_end {
            None => None,
            Some(toml::Value::String(s)) => Some(s.clone()),
            Some(toml::Value::Float(v)) => Some(v.to_string()),
            Some(toml::Value::Integer(v)) => Some(v.to_string()),
            Some(other) => return Err(CliError::Config(format!("a_end must be a number or \"touch\", got {other}"))),
        })
    }
}

/// Fully resolved settings of one run; embedded in every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub command: String,
    pub out: PathBuf,
    pub n: Option<usize>,
    pub seed: u64,
    pub format: TableFormat,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub max_order: usize,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub gap_tol: f64,
    pub slope_tol: f64,
    pub g: Option<f64>,
    pub a: Option<f64>,
    pub l: Option<f64>,
    pub init: Option<PathBuf>,
    pub from_bifurcation: Option<bool>,
    pub a_end: Option<String>,
    pub kind: Option<String>,
    pub branch: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub half_width: Option<f64>,
    pub columns: Option<usize>,
    pub beta_min: Option<f64>,
    pub field_points: Option<usize>,
    pub experimental_finite_depth: Option<bool>,
    pub only: Option<Vec<String>>,
    pub inject: Option<String>,
}

fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

/// Merges flags (environment already folded in by clap) over file values.
pub fn resolve(cli: &Cli) -> Result<Resolved, CliError> {
    let file = match &cli.global.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let g = &cli.global;
    let fg = &file;
    let defaults = SolverOptions::default();
    let mut r = Resolved {
        command: String::new(),
        out: pick(g.out.clone(), fg.out.clone()).unwrap_or_else(|| PathBuf::from(".")),
        n: pick(g.n, fg.n),
        seed: pick(g.seed, fg.seed).unwrap_or(0),
        format: pick(g.format, fg.format).unwrap_or(TableFormat::Csv),
        newton_tol: pick(g.newton_tol, fg.newton_tol).unwrap_or(defaults.newton_tol),
        max_newton_iters: pick(g.max_newton_iters, fg.max_newton_iters).unwrap_or(defaults.max_newton_iters),
        max_order: pick(g.max_order, fg.max_order).unwrap_or(defaults.max_order),
        initial_step: pick(g.initial_step, fg.initial_step).unwrap_or(defaults.initial_step),
        min_step: pick(g.min_step, fg.min_step).unwrap_or(defaults.min_step),
        max_step: pick(g.max_step, fg.max_step).unwrap_or(defaults.max_step),
        gap_tol: pick(g.gap_tol, fg.gap_tol).unwrap_or(defaults.geometry.gap_tol),
        slope_tol: pick(g.slope_tol, fg.slope_tol).unwrap_or(defaults.geometry.slope_tol),
        g: file.g,
        a: file.a,
        l: file.l,
        init: file.init.clone(),
        from_bifurcation: file.from_bifurcation,
        a_end: file.a_end_string()?,
        kind: file.kind.clone(),
        branch: file.branch.clone(),
        input: file.input.clone(),
        alpha: file.alpha,
        half_width: file.half_width,
        columns: file.columns,
        beta_min: file.beta_min,
        field_points: file.field_points,
        experimental_finite_depth: file.experimental_finite_depth,
        only: file.only.clone(),
        inject: file.inject.clone(),
    };
    match &cli.command {
        Command::Exact(x) => {
            r.command = "exact".into();
            r.a = pick(x.a, r.a);
        }
        Command::Solve(x) => {
            r.command = "solve".into();
            r.g = pick(x.g, r.g);
            r.a = pick(x.a, r.a);
            r.l = pick(x.l, r.l);
            r.init = pick(x.init.clone(), r.init.take());
        }
        Command::Continue(x) => {
            r.command = "continue".into();
            r.g = pick(x.g, r.g);
            r.l = pick(x.l, r.l);
            r.from_bifurcation = pick(x.from_bifurcation, r.from_bifurcation);
            r.init = pick(x.init.clone(), r.init.take());
            r.a_end = pick(x.a_end.clone(), r.a_end.take());
        }
        Command::Events(x) => {
            r.command = "events".into();
            r.kind = pick(x.kind.clone(), r.kind.take());
            r.branch = pick(x.branch.clone(), r.branch.take());
        }
        Command::Critlayer(x) => {
            r.command = "critlayer".into();
            r.input = pick(x.input.clone(), r.input.take());
            r.alpha = pick(x.alpha, r.alpha);
            r.half_width = pick(x.half_width, r.half_width);
            r.columns = pick(x.columns, r.columns);
            r.beta_min = pick(x.beta_min, r.beta_min);
            r.field_points = pick(x.field_points, r.field_points);
            r.experimental_finite_depth = pick(x.experimental_finite_depth, r.experimental_finite_depth);
        }
        Command::Validate(x) => {
            r.command = "validate".into();
            r.only = pick(x.only.clone(), r.only.take());
            r.inject = pick(x.inject.clone(), r.inject.take());
        }
    }
    Ok(r)
}

impl Resolved {
    pub fn solver_options(&self) -> Result<SolverOptions, CliError> {
        let d = SolverOptions::default();
        let mut o = SolverOptions {
            newton_tol: self.newton_tol,
            max_newton_iters: self.max_newton_iters,
            max_order: self.max_order,
            initial_step: self.initial_step,
            min_step: self.min_step,
            max_step: self.max_step,
            ..d
        };
        o.geometry.gap_tol = self.gap_tol;
        o.geometry.slope_tol = self.slope_tol;
        if let Some(n) = self.n {
            if n == 0 {
                return Err(CliError::Config("n must be positive".into()));
            }
            o.order = n;
            o.max_order = o.max_order.max(n);
        }
        o.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(o)
    }

    pub fn require<T: Clone>(&self, v: &Option<T>, name: &str) -> Result<T, CliError> {
        v.clone()
            .ok_or_else(|| CliError::Config(format!("missing required setting `{name}` for `{}`", self.command)))
    }

    pub fn a_end(&self) -> Result<AEnd, CliError> {
        match self.a_end.as_deref() {
            None | Some("touch") => Ok(AEnd::Touch),
            Some(s) => s
                .parse::<f64>()
                .map(AEnd::Value)
                .map_err(|_| CliError::Config(format!("a_end must be a number or `touch`, got `{s}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Resolved {
        let mut v = vec!["babenko"];
        v.extend_from_slice(args);
        resolve(&Cli::try_parse_from(v).unwrap()).unwrap()
    }

    #[test]
    fn a_end_accepts_numbers_and_touch() {
        let r = parse(&["continue", "--a-end", "0.2"]);
        assert_eq!(r.a_end().unwrap(), AEnd::Value(0.2));
        let r = parse(&["continue"]);
        assert_eq!(r.a_end().unwrap(), AEnd::Touch);
        let r = parse(&["continue", "--a-end", "soon"]);
        assert!(matches!(r.a_end(), Err(CliError::Config(_))));
    }

    #[test]
    fn file_values_fill_gaps_under_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "g = 0.01\nl = 0.2\na_end = 0.19\nmax_step = 0.002\nformat = \"json\"\n").unwrap();
        let r = parse(&["continue", "--config", p.to_str().unwrap(), "--l", "0"]);
        assert_eq!(r.g, Some(0.01));
        assert_eq!(r.l, Some(0.0));
        assert_eq!(r.a_end().unwrap(), AEnd::Value(0.19));
        assert_eq!(r.format, TableFormat::Json);
        assert_eq!(r.solver_options().unwrap().max_step, 0.002);
    }

    #[test]
    fn invalid_settings_are_config_errors() {
        let r = parse(&["exact", "--n", "0"]);
        assert!(matches!(r.solver_options(), Err(CliError::Config(_))));
        let r = parse(&["exact", "--min-step", "1", "--max-step", "0.1"]);
        assert!(matches!(r.solver_options(), Err(CliError::Config(_))));
        assert!(matches!(r.require(&r.g, "g"), Err(CliError::Config(_))));
    }
}
