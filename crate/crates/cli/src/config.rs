//! Flag grammar, `--config` files and resolution of every default into
//! validated inputs for the compute modules.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use eigendesign::{admissible_bound, generate, import_mesh, Mesh, Shape};

const LIMIT_HELP: &str = "\
Outputs:
  results.csv  dim,beta,mass,mu,rbar,gamma,gamma1,big_gamma,grad_half,mass_half,wall_value,max_identity_residual
  profile.csv  r,w,dw
  plot.gp      profile plot";

const IDENTITIES_HELP: &str = "\
Outputs:
  results.csv  name,residual";

const SOLVE_HELP: &str = "\
Outputs:
  results.csv  lambda,rayleigh,rho_residual,equation_residual,iterations,delta,beta,h,num_vertices,num_elements
  nodes.csv    x,y,u
  plot.gp      eigenfunction plot";

const OPTIMIZE_HELP: &str = "\
Outputs:
  results.csv  seed_id,status,lambda,iterations,converged,best,intervals
               (intervals: favourable set as [(a,b);...] in 1D, empty in 2D)
  history.csv  seed_id,iteration,lambda
  design.csv   element,cx,cy,fill  (best design)
  plot.gp      lambda history plot";

const SWEEP_HELP: &str = "\
Outputs (rows by delta, descending):
  results.csv  delta,status,h,od_value,rescaled,predicted,maximizer_x,maximizer_y,dist_boundary,
               annulus_0.25,annulus_0.5,boundary_contact,min_over_d,connected_components,
               seed_id,converged,iterations
  decay.csv    delta,j,radius,value
  plot.gp      log-log plot of od and the predicted bound against delta";

#[derive(Parser, Debug)]
#[command(
    name = "eigendesign",
    version,
    about = "Optimal favourable sets for the principal eigenvalue of -Δu = λ m u with Neumann data",
    after_help = "Flags may also be read from --config <path>, one flag per line ('#' comments); \
                  command-line flags take precedence.\nEIGENDESIGN_THREADS caps the worker count."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve the whole-space limit problem and report its constants.
    #[command(args_override_self = true, after_help = LIMIT_HELP)]
    Limit(LimitArgs),
    /// Residuals of the integral identities of the limit profile.
    #[command(args_override_self = true, after_help = IDENTITIES_HELP)]
    Identities(LimitArgs),
    /// Principal eigenvalue of one seed design.
    #[command(args_override_self = true, after_help = SOLVE_HELP)]
    Solve(SolveArgs),
    /// Minimise the principal eigenvalue over designs of measure delta.
    #[command(args_override_self = true, after_help = OPTIMIZE_HELP)]
    Optimize(OptimizeArgs),
    /// Optimise over a list of deltas and collect concentration diagnostics.
    #[command(args_override_self = true, after_help = SWEEP_HELP)]
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Read further flags from this file, one per line.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct LimitArgs {
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mass: f64,
    /// Samples of the profile on [0, 4 R].
    #[arg(long, default_value_t = 201)]
    pub profile_points: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Interval,
    Rectangle,
    Disk,
    Ellipse,
}

#[derive(Args, Debug, Clone)]
pub struct DomainArgs {
    #[arg(long, value_enum)]
    pub shape: Option<ShapeKind>,
    /// Interval length.
    #[arg(long)]
    pub len: Option<f64>,
    /// Disk radius.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Rectangle width or ellipse semi-axis along x.
    #[arg(long)]
    pub a: Option<f64>,
    /// Rectangle height or ellipse semi-axis along y.
    #[arg(long)]
    pub b: Option<f64>,
    /// Mesh size; default min(δ^{1/N}/12, largest size the generator accepts).
    #[arg(long)]
    pub h: Option<f64>,
    /// Import the mesh from a file in the mesh text format instead.
    #[arg(long, value_name = "PATH")]
    pub mesh_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedDesign {
    /// Ball at the first boundary point (the left end in 1D).
    Cap,
    /// Ball around the centroid.
    Centered,
}

#[derive(Args, Debug, Clone)]
pub struct SolveArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "cap")]
    pub design: SeedDesign,
    #[command(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPolicy {
    /// `--num-seeds` boundary caps plus the centred ball.
    Default,
    Caps,
    Random,
    Centered,
}

#[derive(Args, Debug, Clone)]
pub struct OptArgs {
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "default")]
    pub seeds: SeedPolicy,
    /// Number of caps (default, caps) or random balls (random).
    #[arg(long, default_value_t = 8)]
    pub num_seeds: usize,
    #[command(flatten)]
    pub opt: OptArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub domain: DomainArgs,
    /// Comma-separated favourable measures.
    #[arg(long, value_delimiter = ',', required = true)]
    pub deltas: Vec<f64>,
    /// Mesh size per delta is h_factor · δ^{1/N}.
    #[arg(long, default_value_t = 1.0 / 12.0)]
    pub h_factor: f64,
    /// Random ball seeds added to the default ones.
    #[arg(long, default_value_t = 0)]
    pub random_seeds: usize,
    #[command(flatten)]
    pub opt: OptArgs,
    #[command(flatten)]
    pub common: Common,
}

/// Usage-level failure (exit status 1).
#[derive(Debug)]
pub struct UsageError(pub String);

macro_rules! usage {
    ($($t:tt)*) => { Err(UsageError(format!($($t)*))) };
}

/// Splices the flags of a `--config` file in front of the command-line
/// flags, so that the command line wins under `args_override_self`.
pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>, UsageError> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else if a == "--config" {
            match argv.get(i + 1) {
                Some(p) => path = Some(p.clone()),
                None => return usage!("--config needs a path"),
            }
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(&path).map_err(|e| UsageError(format!("config {path}: {e}")))?;
    let mut extra = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let flag = parts.next().expect("non-empty line");
        let flag = if flag.starts_with("--") { flag.to_string() } else { format!("--{flag}") };
        if flag == "--config" {
            continue;
        }
        extra.push(flag);
        extra.extend(parts.map(str::to_string));
    }
    // argv[0] is the program, argv[1] the command
    let at = argv.len().min(2);
    let mut out = argv[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[at..]);
    Ok(out)
}

/// A resolved discretisation of Ω.
pub struct Domain {
    pub shape: Option<Shape>,
    pub mesh: Mesh,
    pub h: Option<f64>,
}

fn positive(name: &str, v: f64) -> Result<f64, UsageError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        usage!("--{name} must be a positive number, got {v}")
    }
}

fn resolve_shape(d: &DomainArgs) -> Result<Shape, UsageError> {
    let get = |name: &str, v: Option<f64>| positive(name, v.unwrap_or(1.0));
    let kind = match d.shape {
        Some(k) => k,
        None => return usage!("one of --shape or --mesh-file is required"),
    };
    let unused: &[(&str, bool)] = match kind {
        ShapeKind::Interval => &[("radius", d.radius.is_some()), ("a", d.a.is_some()), ("b", d.b.is_some())],
        ShapeKind::Disk => &[("len", d.len.is_some()), ("a", d.a.is_some()), ("b", d.b.is_some())],
        ShapeKind::Rectangle | ShapeKind::Ellipse => &[("len", d.len.is_some()), ("radius", d.radius.is_some())],
    };
    if let Some((name, _)) = unused.iter().find(|(_, set)| *set) {
        return usage!("--{name} does not apply to this shape");
    }
    Ok(match kind {
        ShapeKind::Interval => Shape::Interval { length: get("len", d.len)? },
        ShapeKind::Disk => Shape::Disk { radius: get("radius", d.radius)? },
        ShapeKind::Rectangle => Shape::Rectangle { a: get("a", d.a)?, b: get("b", d.b)? },
        ShapeKind::Ellipse => Shape::Ellipse { a: get("a", d.a)?, b: get("b", d.b)? },
    })
}

/// Builds the mesh for a single-δ command; `h` defaults to the sweep coupling.
pub fn resolve_domain(d: &DomainArgs, delta: f64) -> Result<Domain, UsageError> {
    positive("beta", d.beta)?;
    positive("delta", delta)?;
    let domain = if let Some(path) = &d.mesh_file {
        if d.shape.is_some() || d.h.is_some() {
            return usage!("--mesh-file cannot be combined with --shape or --h");
        }
        let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("mesh file {}: {e}", path.display())))?;
        let mesh = import_mesh(&text).map_err(|e| UsageError(format!("mesh: {e}")))?;
        Domain {
            shape: None,
            mesh,
            h: None,
        }
    } else {
        let shape = resolve_shape(d)?;
        let cap = shape.max_mesh_size();
        let h = match d.h {
            Some(h) => positive("h", h)?,
            None => (delta.powf(1.0 / shape.dim() as f64) / 12.0).min(cap),
        };
        if h > cap {
            return usage!("--h {h} exceeds the largest accepted mesh size {cap}");
        }
        let (mesh, _) = generate(shape, h).map_err(|e| UsageError(format!("mesh: {e}")))?;
        Domain {
            shape: Some(shape),
            mesh,
            h: Some(h),
        }
    };
    let bound = admissible_bound(&domain.mesh, d.beta);
    if delta >= bound {
        return usage!("--delta {delta} must be below beta|Ω|/(beta+1) = {bound}");
    }
    Ok(domain)
}

pub fn resolve_sweep_shape(a: &SweepArgs) -> Result<(Shape, Vec<f64>), UsageError> {
    if a.domain.mesh_file.is_some() || a.domain.h.is_some() {
        return usage!("sweep meshes each delta itself; --mesh-file and --h do not apply (use --h-factor)");
    }
    positive("beta", a.domain.beta)?;
    positive("h-factor", a.h_factor)?;
    let shape = resolve_shape(&a.domain)?;
    let bound = a.domain.beta * shape.measure() / (a.domain.beta + 1.0);
    let mut deltas = a.deltas.clone();
    for &d in &deltas {
        positive("deltas", d)?;
        if d >= bound {
            return usage!("delta {d} must be below beta|Ω|/(beta+1) = {bound}");
        }
    }
    deltas.sort_by(|x, y| y.total_cmp(x));
    if deltas.windows(2).any(|w| w[0] == w[1]) {
        return usage!("--deltas contains duplicates");
    }
    Ok((shape, deltas))
}

pub fn check_opt(o: &OptArgs) -> Result<(), UsageError> {
    positive("tol", o.tol)?;
    if o.max_iter == 0 {
        return usage!("--max-iter must be at least 1");
    }
    Ok(())
}

/// `--flag value` lines for `meta.txt`; the file is itself a valid
/// `--config` input reproducing the run.
#[derive(Default)]
pub struct Meta(String);

impl Meta {
    pub fn flag(&mut self, name: &str, value: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.0, "--{name} {value}");
        self
    }

    pub fn comment(&mut self, line: &str) -> &mut Self {
        let _ = writeln!(self.0, "# {line}");
        self
    }

    pub fn domain(&mut self, d: &DomainArgs, dom: Option<&Domain>) -> &mut Self {
        match dom.and_then(|x| x.shape).or_else(|| resolve_shape(d).ok()) {
            Some(Shape::Interval { length }) => self.flag("shape", "interval").flag("len", length),
            Some(Shape::Disk { radius }) => self.flag("shape", "disk").flag("radius", radius),
            Some(Shape::Rectangle { a, b }) => self.flag("shape", "rectangle").flag("a", a).flag("b", b),
            Some(Shape::Ellipse { a, b }) => self.flag("shape", "ellipse").flag("a", a).flag("b", b),
            None => self,
        };
        if let Some(p) = &d.mesh_file {
            self.flag("mesh-file", p.display());
        }
        if let Some(h) = dom.and_then(|x| x.h) {
            self.flag("h", h);
        }
        self.flag("beta", d.beta)
    }

    pub fn out(&mut self, c: &Common) -> &mut Self {
        self.flag("out", c.out.display())
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

pub fn out_dir(c: &Common) -> &Path {
    &c.out
}
