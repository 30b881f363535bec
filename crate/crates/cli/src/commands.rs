//! Execution of each command into in-memory artifacts; nothing touches
//! the disk until every computation has finished.

use std::fmt::Write as _;

use eigendesign::asymptotics::SweepSettings;
use eigendesign::{
    check_identities, eval_profile, limit_constants, optimize, principal_lambda, seed_designs,
    solve_limit, sweep, LimitConfig, OptSettings, SeedStrategy,
};

use crate::config::{
    check_opt, resolve_domain, resolve_sweep_shape, Common, LimitArgs, Meta, OptimizeArgs, SeedDesign, SeedPolicy,
    SolveArgs, SweepArgs, UsageError,
};

pub enum RunError {
    Usage(UsageError),
    /// Module-qualified solver failure (exit status 2).
    Solver(String),
}

impl From<UsageError> for RunError {
    fn from(e: UsageError) -> Self {
        RunError::Usage(e)
    }
}

fn solver(module: &str, e: impl std::fmt::Display) -> RunError {
    RunError::Solver(format!("{module}: {e}"))
}

pub struct Output {
    pub stdout: String,
    pub files: Vec<(&'static str, Vec<u8>)>,
    pub meta: Meta,
}

/// Floats with 17 significant digits.
fn f(x: f64) -> String {
    format!("{x:.16e}")
}

struct Table(csv::Writer<Vec<u8>>);

impl Table {
    fn new(header: &[&str]) -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        Table(w)
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) {
        self.0.write_record(fields.into_iter().collect::<Vec<_>>()).expect("in-memory write");
    }

    fn finish(self) -> Vec<u8> {
        self.0.into_inner().expect("in-memory flush")
    }
}

const GP_PREAMBLE: &str = "set datafile separator ','\nset key top right\n";

fn limit_config(a: &LimitArgs) -> Result<LimitConfig, RunError> {
    let cfg = LimitConfig::new(a.dim, a.beta).with_mass(a.mass);
    cfg.validate().map_err(|e| UsageError(format!("radial_limit: {e}")))?;
    if a.profile_points < 2 {
        return Err(UsageError("--profile-points must be at least 2".into()).into());
    }
    Ok(cfg)
}

fn limit_meta(a: &LimitArgs) -> Meta {
    let mut m = Meta::default();
    m.flag("dim", a.dim).flag("beta", a.beta).flag("mass", a.mass);
    m
}

pub fn limit(a: &LimitArgs) -> Result<Output, RunError> {
    let cfg = limit_config(a)?;
    let sol = solve_limit(&cfg).map_err(|e| solver("radial_limit", e))?;
    let c = limit_constants(&sol).map_err(|e| solver("radial_limit", e))?;
    let res = check_identities(&sol).map_err(|e| solver("radial_limit", e))?;

    let mut stdout = String::new();
    let _ = writeln!(stdout, "mu={}", f(sol.mu));
    let _ = writeln!(stdout, "Gamma={}", f(c.big_gamma));
    let _ = writeln!(stdout, "rbar={}", f(sol.rbar));
    for (name, v) in res.named() {
        let _ = writeln!(stdout, "residual_{name}={}", f(v));
    }

    let mut t = Table::new(&[
        "dim", "beta", "mass", "mu", "rbar", "gamma", "gamma1", "big_gamma", "grad_half", "mass_half", "wall_value",
        "max_identity_residual",
    ]);
    t.row([
        a.dim.to_string(),
        f(a.beta),
        f(a.mass),
        f(sol.mu),
        f(sol.rbar),
        f(c.gamma),
        f(c.gamma1),
        f(c.big_gamma),
        f(c.grad_half),
        f(c.mass_half),
        f(c.wall_value),
        f(res.max_abs()),
    ]);
    let mut p = Table::new(&["r", "w", "dw"]);
    let r_end = 4.0 * sol.rbar;
    for i in 0..a.profile_points {
        let r = r_end * i as f64 / (a.profile_points - 1) as f64;
        let (w, dw) = eval_profile(&sol, r);
        p.row([f(r), f(w), f(dw)]);
    }
    let plot = format!(
        "{GP_PREAMBLE}set xlabel 'r'\nset ylabel 'w'\nset arrow from {0},graph 0 to {0},graph 1 nohead dt 2\n\
         plot 'profile.csv' skip 1 using 1:2 with lines title 'w'\n",
        sol.rbar
    );
    let mut meta = limit_meta(a);
    meta.flag("profile-points", a.profile_points);
    Ok(Output {
        stdout,
        files: vec![("results.csv", t.finish()), ("profile.csv", p.finish()), ("plot.gp", plot.into_bytes())],
        meta,
    })
}

pub fn identities(a: &LimitArgs) -> Result<Output, RunError> {
    let cfg = limit_config(a)?;
    let sol = solve_limit(&cfg).map_err(|e| solver("radial_limit", e))?;
    let res = check_identities(&sol).map_err(|e| solver("radial_limit", e))?;
    let mut stdout = String::new();
    let mut t = Table::new(&["name", "residual"]);
    for (name, v) in res.named() {
        let _ = writeln!(stdout, "{name}={}", f(v));
        t.row([name.to_string(), f(v)]);
    }
    Ok(Output {
        stdout,
        files: vec![("results.csv", t.finish())],
        meta: limit_meta(a),
    })
}

pub fn solve(a: &SolveArgs) -> Result<Output, RunError> {
    let dom = resolve_domain(&a.domain, a.delta)?;
    let mesh = &dom.mesh;
    let beta = a.domain.beta;
    let strategy = match a.design {
        SeedDesign::Cap => SeedStrategy::BoundaryCaps(1),
        SeedDesign::Centered => SeedStrategy::Centered,
    };
    let design = seed_designs(mesh, beta, a.delta, strategy)
        .map_err(|e| solver("optimizer", e))?
        .remove(0);
    let eig = principal_lambda(mesh, &design).map_err(|e| solver("eigensolver", e))?;

    let stdout = format!("lambda={}\n", f(eig.lambda));
    let mut t = Table::new(&[
        "lambda",
        "rayleigh",
        "rho_residual",
        "equation_residual",
        "iterations",
        "delta",
        "beta",
        "h",
        "num_vertices",
        "num_elements",
    ]);
    t.row([
        f(eig.lambda),
        f(eig.rayleigh),
        f(eig.rho_residual),
        f(eig.equation_residual),
        eig.iterations.to_string(),
        f(a.delta),
        f(beta),
        dom.h.map_or(String::new(), f),
        mesh.num_vertices().to_string(),
        mesh.num_elements().to_string(),
    ]);
    let mut n = Table::new(&["x", "y", "u"]);
    for (v, u) in mesh.vertices.iter().zip(&eig.u) {
        n.row([f(v[0]), f(v[1]), f(*u)]);
    }
    let plot = if mesh.dim == 1 {
        format!("{GP_PREAMBLE}set xlabel 'x'\nset ylabel 'u'\nplot 'nodes.csv' skip 1 using 1:3 with linespoints title 'u'\n")
    } else {
        format!("{GP_PREAMBLE}set xlabel 'x'\nset ylabel 'y'\nsplot 'nodes.csv' skip 1 using 1:2:3 with points pt 7 ps 0.3 title 'u'\n")
    };
    let mut meta = Meta::default();
    meta.domain(&a.domain, Some(&dom))
        .flag("delta", a.delta)
        .flag("design", format!("{:?}", a.design).to_lowercase());
    Ok(Output {
        stdout,
        files: vec![("results.csv", t.finish()), ("nodes.csv", n.finish()), ("plot.gp", plot.into_bytes())],
        meta,
    })
}

fn intervals_field(iv: &[(f64, f64)]) -> String {
    let parts: Vec<String> = iv.iter().map(|(a, b)| format!("({},{})", f(*a), f(*b))).collect();
    format!("[{}]", parts.join(";"))
}

pub fn optimize_cmd(a: &OptimizeArgs) -> Result<Output, RunError> {
    check_opt(&a.opt)?;
    if a.num_seeds == 0 && a.seeds != SeedPolicy::Centered {
        return Err(UsageError("--num-seeds must be at least 1".into()).into());
    }
    let dom = resolve_domain(&a.domain, a.delta)?;
    let mesh = &dom.mesh;
    let (beta, delta) = (a.domain.beta, a.delta);
    let seeds = match a.seeds {
        SeedPolicy::Default => {
            let mut s = seed_designs(mesh, beta, delta, SeedStrategy::BoundaryCaps(a.num_seeds));
            if let Ok(v) = &mut s {
                match seed_designs(mesh, beta, delta, SeedStrategy::Centered) {
                    Ok(c) => v.extend(c),
                    Err(e) => s = Err(e),
                }
            }
            s
        }
        SeedPolicy::Caps => seed_designs(mesh, beta, delta, SeedStrategy::BoundaryCaps(a.num_seeds)),
        SeedPolicy::Centered => seed_designs(mesh, beta, delta, SeedStrategy::Centered),
        SeedPolicy::Random => seed_designs(
            mesh,
            beta,
            delta,
            SeedStrategy::Random {
                count: a.num_seeds,
                seed: a.opt.rng_seed,
            },
        ),
    }
    .map_err(|e| solver("optimizer", e))?;
    let settings = OptSettings {
        tol: a.opt.tol,
        max_iter: a.opt.max_iter,
    };
    let out = optimize(mesh, beta, delta, &seeds, &settings).map_err(|e| solver("optimizer", e))?;

    let best_iv = if mesh.dim == 1 { out.best.design.intervals(mesh) } else { Vec::new() };
    let mut stdout = format!("lambda={}\n", f(out.best.eigen.lambda));
    if mesh.dim == 1 {
        let _ = writeln!(stdout, "intervals={}", intervals_field(&best_iv));
    }

    let mut t = Table::new(&["seed_id", "status", "lambda", "iterations", "converged", "best", "intervals"]);
    let mut h = Table::new(&["seed_id", "iteration", "lambda"]);
    for id in 0..seeds.len() {
        if let Some(s) = out.states.iter().find(|s| s.seed_id == id) {
            let iv = if mesh.dim == 1 { intervals_field(&s.design.intervals(mesh)) } else { String::new() };
            t.row([
                id.to_string(),
                "ok".into(),
                f(s.eigen.lambda),
                s.iteration.to_string(),
                s.converged.to_string(),
                (id == out.best.seed_id).to_string(),
                iv,
            ]);
            for (k, l) in s.lambda_history.iter().enumerate() {
                h.row([id.to_string(), k.to_string(), f(*l)]);
            }
        } else if let Some(fl) = out.failures.iter().find(|x| x.seed_id == id) {
            t.row([id.to_string(), format!("optimizer: {}", fl.error), String::new(), String::new(), String::new(), "false".into(), String::new()]);
        }
    }
    let mut d = Table::new(&["element", "cx", "cy", "fill"]);
    for e in 0..mesh.num_elements() {
        let c = mesh.centroid(e);
        d.row([e.to_string(), f(c[0]), f(c[1]), f(out.best.design.fill[e])]);
    }
    let plot = format!(
        "{GP_PREAMBLE}set xlabel 'iteration'\nset ylabel 'lambda'\n\
         plot 'history.csv' skip 1 using 2:3 with linespoints title 'all seeds'\n"
    );
    let mut meta = Meta::default();
    meta.domain(&a.domain, Some(&dom))
        .flag("delta", delta)
        .flag("seeds", format!("{:?}", a.seeds).to_lowercase())
        .flag("num-seeds", a.num_seeds)
        .flag("tol", a.opt.tol)
        .flag("max-iter", a.opt.max_iter)
        .flag("rng-seed", a.opt.rng_seed);
    Ok(Output {
        stdout,
        files: vec![
            ("results.csv", t.finish()),
            ("history.csv", h.finish()),
            ("design.csv", d.finish()),
            ("plot.gp", plot.into_bytes()),
        ],
        meta,
    })
}

pub fn sweep_cmd(a: &SweepArgs) -> Result<Output, RunError> {
    check_opt(&a.opt)?;
    let (shape, deltas) = resolve_sweep_shape(a)?;
    let settings = SweepSettings {
        h_factor: a.h_factor,
        opt: OptSettings {
            tol: a.opt.tol,
            max_iter: a.opt.max_iter,
        },
        random_seeds: (a.random_seeds > 0).then_some((a.random_seeds, a.opt.rng_seed)),
        annulus_eps: vec![0.25, 0.5],
    };
    let records = sweep(shape, a.domain.beta, &deltas, &settings).map_err(|e| solver("asymptotics", e))?;
    if records.iter().all(|r| r.is_err()) {
        let first = records[0].as_ref().err().expect("all failed");
        return Err(solver("asymptotics", format!("every delta failed; first (delta {}): {}", first.delta, first.error)));
    }

    let mut stdout = String::new();
    let mut t = Table::new(&[
        "delta",
        "status",
        "h",
        "od_value",
        "rescaled",
        "predicted",
        "maximizer_x",
        "maximizer_y",
        "dist_boundary",
        "annulus_0.25",
        "annulus_0.5",
        "boundary_contact",
        "min_over_d",
        "connected_components",
        "seed_id",
        "converged",
        "iterations",
    ]);
    let mut d = Table::new(&["delta", "j", "radius", "value"]);
    for r in &records {
        match r {
            Ok(r) => {
                let ann = |eps: f64| {
                    r.annulus_ok
                        .iter()
                        .find(|(e, _)| *e == eps)
                        .map_or(String::new(), |(_, ok)| ok.to_string())
                };
                let _ = writeln!(stdout, "delta={} od={} rescaled={}", f(r.delta), f(r.od_value), f(r.rescaled));
                t.row([
                    f(r.delta),
                    "ok".into(),
                    f(r.h),
                    f(r.od_value),
                    f(r.rescaled),
                    f(r.predicted),
                    f(r.maximizer[0]),
                    f(r.maximizer[1]),
                    f(r.dist_boundary),
                    ann(0.25),
                    ann(0.5),
                    f(r.boundary_contact),
                    f(r.min_over_d),
                    r.connected_components.to_string(),
                    r.seed_id.to_string(),
                    r.converged.to_string(),
                    r.iterations.to_string(),
                ]);
                for row in &r.decay {
                    d.row([f(r.delta), row.j.to_string(), f(row.radius), f(row.value)]);
                }
            }
            Err(e) => {
                let _ = writeln!(stdout, "delta={} failed: {}", f(e.delta), e.error);
                let mut row = vec![f(e.delta), format!("asymptotics: {}", e.error)];
                row.resize(17, String::new());
                t.row(row);
            }
        }
    }
    let plot = format!(
        "{GP_PREAMBLE}set logscale xy\nset xlabel 'delta'\nset ylabel 'od'\n\
         plot 'results.csv' skip 1 using 1:4 with linespoints title 'computed', \\\n     \
         'results.csv' skip 1 using 1:6 with lines dt 2 title 'predicted bound'\n"
    );
    let mut meta = Meta::default();
    meta.domain(&a.domain, None)
        .flag("deltas", deltas.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","))
        .flag("h-factor", a.h_factor)
        .flag("random-seeds", a.random_seeds)
        .flag("tol", a.opt.tol)
        .flag("max-iter", a.opt.max_iter)
        .flag("rng-seed", a.opt.rng_seed);
    Ok(Output {
        stdout,
        files: vec![("results.csv", t.finish()), ("decay.csv", d.finish()), ("plot.gp", plot.into_bytes())],
        meta,
    })
}

pub fn common_of(cmd: &crate::config::Command) -> &Common {
    use crate::config::Command::*;
    match cmd {
        Limit(a) | Identities(a) => &a.common,
        Solve(a) => &a.common,
        Optimize(a) => &a.common,
        Sweep(a) => &a.common,
    }
}
