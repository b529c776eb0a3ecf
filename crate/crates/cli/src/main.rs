//! `nonlocal-cvp`: batch runner for nonlocal complement value problems.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error (nothing
//! written), 3 numerical failure (report carries the error), 4 a sweep
//! verdict failed.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nonlocal_core::{KernelFamily, KernelParams, Normalization, TailMode};
use serde::de::DeserializeOwned;

use commands::{Failure, Run};
use config::*;

#[derive(Parser, Debug)]
#[command(name = "nonlocal-cvp", version, about = "Nonlocal complement value problems on an interval")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: `output.dir` or the working directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel assembly and sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Fractional, stable and BBM constants.
    Constants {
        #[arg(long)]
        d: Option<u32>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        p: Option<f64>,
    },
    /// Pointwise `L u` or nonlocal normal derivative of a catalog function.
    Apply {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        domain: DomainArgs,
        /// `l` or `n`.
        #[arg(long, value_parser = enum_arg::<OperatorName>)]
        operator: Option<OperatorName>,
        /// Function as JSON, e.g. '{"name":"sin","freq":3}'.
        #[arg(long, value_parser = json_arg::<FunctionInput>)]
        u: Option<FunctionInput>,
        /// Comma-separated evaluation points.
        #[arg(long, value_delimiter = ',')]
        points: Option<Vec<f64>>,
    },
    /// Solve a complement value problem.
    Solve {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, value_parser = enum_arg::<ProblemKindName>)]
        kind: Option<ProblemKindName>,
        #[arg(long, value_parser = json_arg::<FunctionInput>)]
        f: Option<FunctionInput>,
        #[arg(long, value_parser = json_arg::<FunctionInput>)]
        g: Option<FunctionInput>,
        #[arg(long, value_parser = json_arg::<FunctionInput>)]
        beta: Option<FunctionInput>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Complement interval `lo,hi` carrying Dirichlet data (repeatable).
        #[arg(long, value_parser = pair_arg)]
        dirichlet_region: Vec<(f64, f64)>,
        #[arg(long)]
        compat_tol: Option<f64>,
    },
    /// Leading eigenpairs.
    Eigs {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, value_parser = enum_arg::<ConditionName>)]
        condition: Option<ConditionName>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_parser = json_arg::<FunctionInput>)]
        beta: Option<FunctionInput>,
    },
    /// Spectral heat, Schrodinger or wave evolution.
    Evolve {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, value_parser = enum_arg::<Equation>)]
        equation: Option<Equation>,
        #[arg(long, value_parser = enum_arg::<SpaceName>)]
        condition: Option<SpaceName>,
        #[arg(long, value_parser = json_arg::<FunctionInput>)]
        u0: Option<FunctionInput>,
        #[arg(long, value_parser = json_arg::<FunctionInput>)]
        u1: Option<FunctionInput>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Dirichlet-to-Neumann matrix and its Robin link.
    Dtn {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        robin_pairs: Option<usize>,
    },
    /// Parameter sweeps toward the local limit.
    Sweep {
        kind: Option<SweepKind>,
        #[command(flatten)]
        domain: DomainArgs,
        /// Comma-separated parameter grid.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        /// Kernel family as JSON, e.g. '{"family":"fractional","normalization":"exact_c"}'.
        #[arg(long, value_parser = json_arg::<KernelFamily>)]
        family: Option<KernelFamily>,
        #[arg(long, value_parser = json_arg::<FunctionInput>)]
        u: Option<FunctionInput>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_parser = enum_arg::<SpaceName>)]
        problem: Option<SpaceName>,
        #[arg(long, value_parser = enum_arg::<SpaceName>)]
        condition: Option<SpaceName>,
    },
}

#[derive(Args, Debug)]
struct KernelArgs {
    /// Kernel as JSON, e.g. '{"family":"window","beta":0,"eps":0.1}'.
    #[arg(long, value_parser = json_arg::<KernelParams>)]
    kernel: Option<KernelParams>,
    /// Shorthand for a fractional kernel of order alpha.
    #[arg(long, conflicts_with = "kernel")]
    alpha: Option<f64>,
    /// Normalization of the `--alpha` kernel (default exact_c).
    #[arg(long, value_parser = enum_arg::<Normalization>, requires = "alpha")]
    normalization: Option<Normalization>,
}

#[derive(Args, Debug)]
struct DomainArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    /// Cells in the domain.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    collar: Option<f64>,
    #[arg(long, value_parser = enum_arg::<TailMode>)]
    tail_mode: Option<TailMode>,
    #[arg(long)]
    quad_order: Option<usize>,
}

fn enum_arg<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn json_arg<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_str(s).map_err(|e| e.to_string())
}

fn pair_arg(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
    Ok((
        a.trim().parse().map_err(|e| format!("{e}"))?,
        b.trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

impl KernelArgs {
    fn merge(self, cfg: &mut RunConfig) {
        if let Some(k) = self.kernel {
            cfg.kernel = Some(k);
        } else if let Some(alpha) = self.alpha {
            cfg.kernel = Some(KernelParams::Fractional {
                alpha,
                normalization: self.normalization.unwrap_or(Normalization::ExactC),
                factor: 1.0,
            });
        }
    }
}

impl DomainArgs {
    fn merge(self, cfg: &mut RunConfig) {
        let d = &mut cfg.domain;
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { d.$f = v; } )* };
        }
        set!(a, b, n, collar, tail_mode, quad_order);
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Fold the subcommand flags into the config and name the command.
fn merge(cmd: Option<Cmd>, cfg: &mut RunConfig) -> Result<CommandName, Failure> {
    let Some(cmd) = cmd else {
        return cfg
            .command
            .ok_or_else(|| Failure::config("no command given on the command line or in the config"));
    };
    let name = match cmd {
        Cmd::Constants { d, alpha, p } => {
            let c = cfg.constants.get_or_insert(ConstantsConfig { d: 1, alpha: 1.0, p: 2.0 });
            set(&mut c.d, d);
            set(&mut c.alpha, alpha);
            set(&mut c.p, p);
            CommandName::Constants
        }
        Cmd::Apply { kernel, domain, operator, u, points } => {
            kernel.merge(cfg);
            domain.merge(cfg);
            match (&mut cfg.apply, u) {
                (Some(a), u) => {
                    set(&mut a.u, u);
                    set(&mut a.operator, operator);
                    set(&mut a.points, points);
                }
                (None, Some(u)) => {
                    cfg.apply = Some(ApplyConfig {
                        operator: operator.unwrap_or(OperatorName::L),
                        u,
                        points: points.unwrap_or_default(),
                        grid: None,
                    })
                }
                (None, None) => {}
            }
            CommandName::Apply
        }
        Cmd::Solve { kernel, domain, kind, f, g, beta, lambda, dirichlet_region, compat_tol } => {
            kernel.merge(cfg);
            domain.merge(cfg);
            if cfg.problem.is_none() {
                if let Some(kind) = kind {
                    cfg.problem = Some(serde_json::from_value(serde_json::json!({ "kind": kind })).expect("minimal problem block"));
                }
            }
            if let Some(p) = cfg.problem.as_mut() {
                set(&mut p.kind, kind);
                set(&mut p.f, f);
                set(&mut p.g, g);
                if beta.is_some() {
                    p.beta = beta;
                }
                set(&mut p.lambda, lambda);
                if !dirichlet_region.is_empty() {
                    p.dirichlet_region = dirichlet_region;
                }
            }
            if compat_tol.is_some() {
                cfg.tolerances.compat = compat_tol;
            }
            CommandName::Solve
        }
        Cmd::Eigs { kernel, domain, condition, k, beta } => {
            kernel.merge(cfg);
            domain.merge(cfg);
            let s = cfg.spectrum.get_or_insert_with(SpectrumConfig::default);
            set(&mut s.condition, condition);
            set(&mut s.k, k);
            if beta.is_some() {
                s.beta = beta;
            }
            CommandName::Eigs
        }
        Cmd::Evolve { kernel, domain, equation, condition, u0, u1, t_end, samples } => {
            kernel.merge(cfg);
            domain.merge(cfg);
            if cfg.evolve.is_none() {
                if let (Some(eq), Some(u0)) = (equation, u0.clone()) {
                    cfg.evolve = Some(
                        serde_json::from_value(serde_json::json!({ "equation": eq, "u0": u0 }))
                            .expect("minimal evolve block"),
                    );
                }
            }
            if let Some(e) = cfg.evolve.as_mut() {
                set(&mut e.equation, equation);
                set(&mut e.condition, condition);
                set(&mut e.u0, u0);
                if u1.is_some() {
                    e.u1 = u1;
                }
                set(&mut e.t_end, t_end);
                set(&mut e.samples, samples);
            }
            CommandName::Evolve
        }
        Cmd::Dtn { kernel, domain, lambda, robin_pairs } => {
            kernel.merge(cfg);
            domain.merge(cfg);
            let c = cfg.dtn.get_or_insert_with(DtnConfig::default);
            set(&mut c.lambda, lambda);
            set(&mut c.robin_pairs, robin_pairs);
            CommandName::Dtn
        }
        Cmd::Sweep { kind, domain, grid, family, u, p, k, problem, condition } => {
            domain.merge(cfg);
            let s = cfg.sweep.get_or_insert_with(SweepConfig::default);
            if kind.is_some() {
                s.kind = kind;
            }
            if grid.is_some() {
                s.grid = grid;
            }
            if family.is_some() {
                s.family = family;
            }
            if u.is_some() {
                s.u = u;
            }
            set(&mut s.p, p);
            set(&mut s.k, k);
            set(&mut s.problem, problem);
            set(&mut s.condition, condition);
            CommandName::Sweep
        }
    };
    if let Some(c) = cfg.command {
        if c != name {
            return Err(Failure::config(format!(
                "config command {c:?} does not match subcommand {name:?}"
            )));
        }
    }
    cfg.command = Some(name);
    Ok(name)
}

fn seed_from_env() -> Result<u64, Failure> {
    match std::env::var("NONLOCAL_CVP_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Failure::config(format!("NONLOCAL_CVP_SEED={s:?} is not an unsigned integer"))),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(Failure::config(format!("NONLOCAL_CVP_SEED: {e}"))),
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig, Failure> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let prepared = (|| {
        let mut cfg = load_config(cli.config.as_ref())?;
        let command = merge(cli.command, &mut cfg)?;
        let seed = seed_from_env()?;
        if cli.threads == Some(0) {
            return Err(Failure::config("--threads must be positive"));
        }
        let out_dir = cli
            .out
            .clone()
            .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        Ok((cfg, command, seed, out_dir))
    })();
    let (cfg, command, seed, out_dir) = match prepared {
        Ok(p) => p,
        Err(e) => return fail(&e),
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&Failure::config(format!("--threads: {e}")));
        }
    }
    let mut run = Run::new(cfg, command, seed, rayon::current_num_threads(), &out_dir);
    let outcome = run.execute();
    let (report, code) = match outcome {
        Ok(o) => {
            let failed = o.verdict_failed;
            match run.report_ok(o) {
                Ok(r) => (r, if failed { 4 } else { 0 }),
                Err(e) => return fail(&e),
            }
        }
        Err(Failure::Numerical { kind, message, detail }) => {
            eprintln!("error: {message}");
            match run.report_error(&kind, &message, &detail) {
                Ok(r) => (r, 3),
                Err(e) => return fail(&e),
            }
        }
        Err(e) => return fail(&e),
    };
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    ExitCode::from(code)
}

fn fail(e: &Failure) -> ExitCode {
    match e {
        Failure::Config(m) => eprintln!("config error: {m}"),
        Failure::Io(err) => eprintln!("i/o error: {err}"),
        Failure::Numerical { message, .. } => eprintln!("error: {message}"),
    }
    ExitCode::from(e.exit_code() as u8)
}
