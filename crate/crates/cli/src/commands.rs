//! Command execution. Every command validates and builds its inputs first,
//! so configuration errors surface before any artifact is written.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use nonlocal_core::assembly::{omega_load, write_matrix_market};
use nonlocal_core::constants::constants_report;
use nonlocal_core::convergence::{
    limit_coefficient, poincare_uniformly_bounded, SweepMesh, SweepProblem,
};
use nonlocal_core::operator::{apply_l, apply_n};
use nonlocal_core::spectral::{
    evolve_heat, evolve_schrodinger, evolve_wave, orthonormality_defect, wave_energy, Forcing,
};
use nonlocal_core::{
    assemble_forms, bbm_sweep, build_mesh, collapse_check, dtn_matrix, eig, eigen_convergence,
    make_kernel, rayleigh_residual, seminorm_e, sharp_constant_sweep, solution_convergence, solve,
    ComplementProblem, ComplementWeight, Condition, FunctionSpec, GalerkinForms, HelmholtzCondition,
    KernelParams, KernelSpec, LocalKind, Mesh1D, NodeTag, NonlocalError, ProblemKind, ScalarField,
    SweepReport, Verdict, WeightKind, WeightSpec,
};
use serde_json::{json, Value};

use crate::config::*;
use crate::output::{num, nums, Csv, OutDir};

/// Why a run stopped.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical { kind: String, message: String, detail: Value },
    Io(std::io::Error),
}

impl Failure {
    pub fn config(msg: impl Into<String>) -> Self {
        Failure::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical { .. } => 3,
            Failure::Io(_) => 1,
        }
    }
}

impl From<NonlocalError> for Failure {
    fn from(e: NonlocalError) -> Self {
        let (kind, detail) = match &e {
            NonlocalError::Incompatible { residual } => (
                "incompatible",
                json!({
                    "condition": "compatibility condition: int_Omega f + int_{complement} g = 0",
                    "residual": num(*residual),
                }),
            ),
            NonlocalError::Resonance {
                index,
                eigenvalue,
                projection,
            } => (
                "resonance",
                json!({"index": index, "eigenvalue": num(*eigenvalue), "projection": num(*projection)}),
            ),
            NonlocalError::RobinPrecondition => ("robin_precondition", Value::Null),
            NonlocalError::EmptyDirichletSet => ("empty_dirichlet_set", Value::Null),
            NonlocalError::SingularSystem(_) => ("singular_system", Value::Null),
            NonlocalError::Eigen(_) => ("eigensolver", Value::Null),
            NonlocalError::Extrapolation(_) => ("extrapolation", Value::Null),
            NonlocalError::QuadratureNonConvergence(_) => ("quadrature", Value::Null),
            NonlocalError::SingularEvaluation(_) => ("singular_evaluation", Value::Null),
            _ => ("domain", Value::Null),
        };
        Failure::Numerical {
            kind: kind.into(),
            message: e.to_string(),
            detail,
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

/// Map a construction error on user input to a configuration error.
fn input<T>(r: nonlocal_core::Result<T>, what: &str) -> Result<T, Failure> {
    r.map_err(|e| Failure::config(format!("{what}: {e}")))
}

/// Result of a successful command.
pub struct Outcome {
    pub results: Value,
    pub provenance: Value,
    pub verdict_failed: bool,
}

/// Run-wide context: effective config, output location, timings.
pub struct Run {
    pub cfg: RunConfig,
    pub command: CommandName,
    pub seed: u64,
    pub threads: usize,
    pub out_dir: std::path::PathBuf,
    out: Option<OutDir>,
    timings: Vec<(String, f64)>,
}

impl Run {
    pub fn new(cfg: RunConfig, command: CommandName, seed: u64, threads: usize, out_dir: &Path) -> Self {
        Self {
            cfg,
            command,
            seed,
            threads,
            out_dir: out_dir.to_path_buf(),
            out: None,
            timings: Vec::new(),
        }
    }

    fn out(&mut self) -> std::io::Result<&mut OutDir> {
        if self.out.is_none() {
            self.out = Some(OutDir::create(&self.out_dir)?);
        }
        Ok(self.out.as_mut().expect("created above"))
    }

    fn write(&mut self, name: &str, bytes: Vec<u8>) -> Result<(), Failure> {
        self.out()?.write(name, &bytes)?;
        Ok(())
    }

    fn timed<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let v = f();
        self.timings
            .push((label.to_string(), t0.elapsed().as_secs_f64() * 1e3));
        v
    }

    fn header(&self, status: &str) -> serde_json::Map<String, Value> {
        let mut m = serde_json::Map::new();
        m.insert("status".into(), json!(status));
        m.insert("command".into(), json!(self.command));
        m.insert(
            "versions".into(),
            json!({"nonlocal-cvp": env!("CARGO_PKG_VERSION"), "nonlocal-core": nonlocal_core::VERSION}),
        );
        m.insert("seed".into(), json!(self.seed));
        m.insert("threads".into(), json!(self.threads));
        m.insert("config".into(), serde_json::to_value(&self.cfg).expect("config serializes"));
        m
    }

    fn finish(&mut self, mut m: serde_json::Map<String, Value>) -> Result<Value, Failure> {
        let timings: serde_json::Map<String, Value> = self
            .timings
            .iter()
            .map(|(k, v)| (k.clone(), json!(v)))
            .collect();
        m.insert("timings_ms".into(), Value::Object(timings));
        let mut artifacts: Vec<String> =
            self.out.as_ref().map_or(Vec::new(), |o| o.written.clone());
        artifacts.push("report.json".into());
        m.insert("artifacts".into(), json!(artifacts));
        let report = Value::Object(m);
        self.out()?.write_json("report.json", &report)?;
        Ok(report)
    }

    /// Report for a completed command.
    pub fn report_ok(&mut self, outcome: Outcome) -> Result<Value, Failure> {
        let status = if outcome.verdict_failed { "verdict_failed" } else { "ok" };
        let mut m = self.header(status);
        m.insert("results".into(), outcome.results);
        m.insert("provenance".into(), outcome.provenance);
        self.finish(m)
    }

    /// Report for a numerical failure.
    pub fn report_error(&mut self, kind: &str, message: &str, detail: &Value) -> Result<Value, Failure> {
        let mut m = self.header("numerical_failure");
        m.insert(
            "error".into(),
            json!({"kind": kind, "message": message, "detail": detail}),
        );
        self.finish(m)
    }

    pub fn execute(&mut self) -> Result<Outcome, Failure> {
        match self.command {
            CommandName::Constants => self.constants(),
            CommandName::Apply => self.apply(),
            CommandName::Solve => self.solve(),
            CommandName::Eigs => self.eigs(),
            CommandName::Evolve => self.evolve(),
            CommandName::Dtn => self.dtn(),
            CommandName::Sweep => self.sweep(),
        }
    }

    fn kernel(&self) -> Result<KernelSpec, Failure> {
        let params: &KernelParams = self
            .cfg
            .kernel
            .as_ref()
            .ok_or_else(|| Failure::config("a kernel block (or --alpha/--kernel) is required"))?;
        input(make_kernel(params), "kernel")
    }

    fn mesh(&self) -> Result<Arc<Mesh1D>, Failure> {
        let d = &self.cfg.domain;
        Ok(Arc::new(input(build_mesh(d.a, d.b, d.n, d.collar), "domain")?))
    }

    fn forms(&mut self, kernel: &KernelSpec, mesh: Arc<Mesh1D>) -> Result<GalerkinForms, Failure> {
        let (q, tail) = (self.cfg.domain.quad_order, self.cfg.domain.tail_mode);
        let forms = self.timed("assembly", || assemble_forms(mesh, kernel, q, tail))?;
        if self.cfg.output.export_form {
            let mut buf = Vec::new();
            forms.export_e(&mut buf)?;
            self.write("form.mtx", buf)?;
        }
        Ok(forms)
    }

    fn constants(&mut self) -> Result<Outcome, Failure> {
        let c = self.cfg.constants.clone().unwrap_or(ConstantsConfig {
            d: 1,
            alpha: 1.0,
            p: 2.0,
        });
        let reports = self.timed("constants", || constants_report(c.d, c.alpha, c.p))?;
        let mut csv = Csv::new(&["name", "d", "parameter", "value", "quadrature_value", "abs_gap"]);
        let mut prov = serde_json::Map::new();
        for r in &reports {
            csv.row(
                &[&r.name],
                &[
                    r.d as f64,
                    r.parameter,
                    r.value,
                    r.quadrature_value.unwrap_or(f64::NAN),
                    r.abs_gap.unwrap_or(f64::NAN),
                ],
            );
            let mut p = "closed form in Gamma functions".to_string();
            if r.quadrature_value.is_some() {
                p.push_str("; cross-checked against 1 / adaptive quadrature of int (1 - cos t)|t|^{-1-alpha} dt");
            }
            prov.insert(r.name.clone(), json!(p));
        }
        self.write("constants.csv", csv.into_bytes())?;
        Ok(Outcome {
            results: json!({ "constants": reports }),
            provenance: Value::Object(prov),
            verdict_failed: false,
        })
    }

    fn apply(&mut self) -> Result<Outcome, Failure> {
        let a = self
            .cfg
            .apply
            .clone()
            .ok_or_else(|| Failure::config("an apply block (or --u) is required"))?;
        let kernel = self.kernel()?;
        let u = build_fn(&a.u, "apply.u")?;
        let mut points = a.points.clone();
        if let Some((lo, hi, count)) = a.grid {
            if count < 2 || !(hi > lo) {
                return Err(Failure::config("apply.grid needs lo < hi and count >= 2"));
            }
            points.extend((0..count).map(|j| lo + (hi - lo) * j as f64 / (count - 1) as f64));
        }
        if points.is_empty() {
            return Err(Failure::config("apply needs points or a grid"));
        }
        let omega = (self.cfg.domain.a, self.cfg.domain.b);
        let values = self.timed("apply", || {
            points
                .iter()
                .map(|&x| match a.operator {
                    OperatorName::L => apply_l(&kernel, &u, x),
                    OperatorName::N => apply_n(&kernel, omega, &u, x),
                })
                .collect::<nonlocal_core::Result<Vec<f64>>>()
        })?;
        let mut csv = Csv::new(&["x", "value"]);
        for (x, v) in points.iter().zip(&values) {
            csv.row(&[], &[*x, *v]);
        }
        self.write("apply.csv", csv.into_bytes())?;
        Ok(Outcome {
            results: json!({"operator": a.operator, "points": points.len(), "max_abs": num(max_abs(&values))}),
            provenance: json!({}),
            verdict_failed: false,
        })
    }

    fn solve(&mut self) -> Result<Outcome, Failure> {
        let p = self
            .cfg
            .problem
            .clone()
            .ok_or_else(|| Failure::config("a problem block (or --kind) is required"))?;
        let kernel = self.kernel()?;
        let mesh = self.mesh()?;
        let kind = match p.kind {
            ProblemKindName::Dirichlet => ProblemKind::Dirichlet,
            ProblemKindName::Neumann => ProblemKind::Neumann,
            ProblemKindName::Robin => ProblemKind::Robin,
            ProblemKindName::Mixed => ProblemKind::Mixed,
            ProblemKindName::Helmholtz => ProblemKind::Helmholtz,
        };
        let mut problem =
            ComplementProblem::new(kind, build_fn(&p.f, "problem.f")?, build_fn(&p.g, "problem.g")?);
        problem.g_flux = p.g_flux.as_ref().map(|f| build_fn(f, "problem.g_flux")).transpose()?;
        problem.beta = p.beta.as_ref().map(|f| build_fn(f, "problem.beta")).transpose()?;
        if kind == ProblemKind::Robin && problem.beta.is_none() {
            return Err(Failure::config("robin problems need problem.beta"));
        }
        problem.weight_k = p.weight_k;
        if p.g_weight == DataWeight::NuK {
            let k = p.weight_k.unwrap_or((mesh.a, mesh.b));
            problem.g_weight = ComplementWeight::Weight(input(
                WeightSpec::new(kernel.clone(), k, WeightKind::Essinf),
                "problem.weight_k",
            )?);
        }
        problem.lambda = p.lambda;
        problem.helmholtz_condition = match p.helmholtz_condition {
            SpaceName::Neumann => HelmholtzCondition::Neumann,
            SpaceName::Dirichlet => HelmholtzCondition::Dirichlet,
        };
        problem.d_set = mesh
            .complement()
            .into_iter()
            .filter(|&i| {
                let x = mesh.nodes[i];
                p.dirichlet_region.iter().any(|(lo, hi)| x >= *lo && x <= *hi)
            })
            .collect();
        problem.compat_tol = self.cfg.tolerances.compat;
        let forms = self.forms(&kernel, mesh.clone())?;
        let sol = self.timed("solve", || solve(&forms, &problem))?;
        check_residual(sol.residual, self.cfg.tolerances.residual, "solve")?;
        let mut csv = Csv::new(&["node", "tag", "x", "value"]);
        for (i, v) in sol.u.values.iter().enumerate() {
            csv.row(&[&i.to_string(), tag_name(mesh.tags[i])], &[mesh.nodes[i], *v]);
        }
        self.write("solution.csv", csv.into_bytes())?;
        let l2 = forms.m.quad_form(&sol.u.values, &sol.u.values).sqrt();
        Ok(Outcome {
            results: json!({
                "kind": p.kind,
                "nodes": mesh.len(),
                "residual": num(sol.residual),
                "compat_residual": sol.compat_residual.map(num),
                "l2_omega": num(l2),
                "energy": num(seminorm_e(&forms, &sol.u)?),
            }),
            provenance: json!({}),
            verdict_failed: false,
        })
    }

    fn condition(&self, spec: &SpectrumConfig) -> Result<Condition, Failure> {
        Ok(match spec.condition {
            ConditionName::Neumann => Condition::Neumann,
            ConditionName::Dirichlet => Condition::Dirichlet,
            ConditionName::Robin => Condition::Robin {
                beta: build_fn(
                    spec.beta
                        .as_ref()
                        .ok_or_else(|| Failure::config("robin spectra need spectrum.beta"))?,
                    "spectrum.beta",
                )?,
                k: spec.weight_k,
            },
        })
    }

    fn eigs(&mut self) -> Result<Outcome, Failure> {
        let spec = self.cfg.spectrum.clone().unwrap_or_default();
        if spec.k == 0 {
            return Err(Failure::config("spectrum.k must be positive"));
        }
        let kernel = self.kernel()?;
        let mesh = self.mesh()?;
        let cond = self.condition(&spec)?;
        let forms = self.forms(&kernel, mesh.clone())?;
        let s = self.timed("eigensolve", || eig(&forms, &cond, spec.k))?;
        let rr = rayleigh_residual(&forms, &s);
        check_residual(rr, self.cfg.tolerances.residual, "eigs")?;
        let mut csv = Csv::new(&["index", "value"]);
        for (k, v) in s.values.iter().enumerate() {
            csv.row(&[&k.to_string()], &[*v]);
        }
        self.write("eigenvalues.csv", csv.into_bytes())?;
        let names: Vec<String> = (0..s.len()).map(|k| format!("phi_{k}")).collect();
        let mut header = vec!["node", "x"];
        header.extend(names.iter().map(String::as_str));
        let mut csv = Csv::new(&header);
        for i in 0..mesh.len() {
            let mut row = vec![mesh.nodes[i]];
            row.extend(s.vectors.iter().map(|v| v.values[i]));
            csv.row(&[&i.to_string()], &row);
        }
        self.write("eigenvectors.csv", csv.into_bytes())?;
        Ok(Outcome {
            results: json!({
                "condition": s.condition,
                "values": nums(&s.values),
                "dimension": s.dimension,
                "truncated": s.is_truncated(),
                "rayleigh_residual": num(rr),
                "orthonormality_defect": num(orthonormality_defect(&forms, &s)),
            }),
            provenance: json!({}),
            verdict_failed: false,
        })
    }

    fn evolve(&mut self) -> Result<Outcome, Failure> {
        let e = self
            .cfg
            .evolve
            .clone()
            .ok_or_else(|| Failure::config("an evolve block (or --equation) is required"))?;
        let kernel = self.kernel()?;
        let mesh = self.mesh()?;
        let u0f = build_fn(&e.u0, "evolve.u0")?;
        let u1f = e.u1.as_ref().map(|f| build_fn(f, "evolve.u1")).transpose()?;
        let ff = e.forcing.as_ref().map(|f| build_fn(f, "evolve.forcing")).transpose()?;
        if e.samples < 2 || !(e.t_end > 0.0) {
            return Err(Failure::config("evolve needs t_end > 0 and samples >= 2"));
        }
        let cond = match e.condition {
            SpaceName::Neumann => Condition::Neumann,
            SpaceName::Dirichlet => Condition::Dirichlet,
        };
        let forms = self.forms(&kernel, mesh.clone())?;
        let s = self.timed("eigensolve", || eig(&forms, &cond, usize::MAX))?;
        let u0 = mesh.interpolate(|x| u0f.eval(x));
        let mass = |u: &[f64]| forms.m.mul_vec(u).iter().sum::<f64>();
        let l2 = |u: &[f64]| forms.m.quad_form(u, u).sqrt();
        let (csv, results) = match e.equation {
            Equation::Heat => {
                let forcing = ff
                    .as_ref()
                    .map(|f| omega_load(&mesh, f).map(Forcing::constant))
                    .transpose()?;
                let tr = self.timed("evolve", || {
                    evolve_heat(&forms, &s, &u0, forcing.as_ref(), e.t_end, e.samples)
                })?;
                let mut csv = Csv::new(&["time", "node", "x", "value"]);
                for (t, st) in tr.times.iter().zip(&tr.states) {
                    for (i, v) in st.values.iter().enumerate() {
                        csv.row(&[], &[*t, i as f64, mesh.nodes[i], *v]);
                    }
                }
                let masses: Vec<f64> = tr.states.iter().map(|u| mass(&u.values)).collect();
                let norms: Vec<f64> = tr.states.iter().map(|u| l2(&u.values)).collect();
                (csv, json!({"times": nums(&tr.times), "mass": nums(&masses), "l2": nums(&norms)}))
            }
            Equation::Schrodinger => {
                let tr = self.timed("evolve", || evolve_schrodinger(&forms, &s, &u0, e.t_end, e.samples))?;
                let mut csv = Csv::new(&["time", "node", "x", "re", "im"]);
                for (t, st) in tr.times.iter().zip(&tr.states) {
                    for (i, v) in st.iter().enumerate() {
                        csv.row(&[], &[*t, i as f64, mesh.nodes[i], v.re, v.im]);
                    }
                }
                let norms: Vec<f64> = tr
                    .states
                    .iter()
                    .map(|u| nonlocal_core::spectral::complex_l2(&forms, u))
                    .collect();
                (csv, json!({"times": nums(&tr.times), "l2": nums(&norms)}))
            }
            Equation::Wave => {
                let u1 = match &u1f {
                    Some(f) => mesh.interpolate(|x| f.eval(x)),
                    None => nonlocal_core::DiscreteField::zeros(mesh.clone()),
                };
                let tr = self.timed("evolve", || evolve_wave(&forms, &s, &u0, &u1, e.t_end, e.samples))?;
                let mut csv = Csv::new(&["time", "node", "x", "value", "velocity"]);
                for ((t, st), vel) in tr.times.iter().zip(&tr.states).zip(&tr.velocities) {
                    for i in 0..st.values.len() {
                        csv.row(&[], &[*t, i as f64, mesh.nodes[i], st.values[i], vel.values[i]]);
                    }
                }
                let energy: Vec<f64> = tr
                    .states
                    .iter()
                    .zip(&tr.velocities)
                    .map(|(u, v)| wave_energy(&forms, &s, &u.values, &v.values))
                    .collect();
                (csv, json!({"times": nums(&tr.times), "energy": nums(&energy)}))
            }
        };
        self.write("trajectory.csv", csv.into_bytes())?;
        let mut results = results;
        results["equation"] = json!(e.equation);
        results["modes"] = json!(s.len());
        Ok(Outcome {
            results,
            provenance: json!({}),
            verdict_failed: false,
        })
    }

    fn dtn(&mut self) -> Result<Outcome, Failure> {
        let c = self.cfg.dtn.clone().unwrap_or_default();
        let kernel = self.kernel()?;
        let mesh = self.mesh()?;
        let forms = self.forms(&kernel, mesh.clone())?;
        let map = self.timed("dtn", || dtn_matrix(&forms, c.lambda))?;
        let mut buf = Vec::new();
        write_matrix_market(&map.matrix, &mut buf)?;
        self.write("dtn.mtx", buf)?;
        let mut csv = Csv::new(&["row", "node", "x"]);
        for (r, &i) in map.nodes.iter().enumerate() {
            csv.row(&[&r.to_string(), &i.to_string()], &[mesh.nodes[i]]);
        }
        self.write("dtn_nodes.csv", csv.into_bytes())?;
        let ones = vec![1.0; map.nodes.len()];
        let row_sum = max_abs(&map.apply(&ones)?);
        let links = if c.robin_pairs > 0 {
            self.timed("robin_link", || map.robin_link(&forms, c.weight_k, c.robin_pairs))?
        } else {
            Vec::new()
        };
        let links: Vec<Value> = links
            .iter()
            .map(|l| json!({"beta": num(l.beta), "residual": num(l.residual), "scale": num(l.scale)}))
            .collect();
        Ok(Outcome {
            results: json!({
                "lambda": num(c.lambda),
                "trace_nodes": map.nodes.len(),
                "norm": num(map.matrix.norm()),
                "symmetry_defect": num(map.symmetry_defect()),
                "constant_image_max": num(row_sum),
                "robin_links": links,
            }),
            provenance: json!({}),
            verdict_failed: false,
        })
    }

    fn sweep(&mut self) -> Result<Outcome, Failure> {
        let sc = self.cfg.sweep.clone().unwrap_or_default();
        let kind = sc
            .kind
            .ok_or_else(|| Failure::config("sweep kind is required (bbm, collapse, poincare, solution, eigs, coefficient)"))?;
        let grid = sc.grid.clone().unwrap_or_else(|| SweepConfig::default_grid(kind));
        if grid.is_empty() {
            return Err(Failure::config("sweep grid is empty"));
        }
        let family = sc.family.clone().unwrap_or_else(|| SweepConfig::default_family(kind));
        let d = &self.cfg.domain;
        let omega = (d.a, d.b);
        let mesh = SweepMesh {
            a: d.a,
            b: d.b,
            n: d.n,
            collar: d.collar,
            quad_order: d.quad_order,
        };
        input(mesh.build(), "domain")?;
        let pi = std::f64::consts::PI;
        let opt_fn = |f: &Option<FunctionInput>, default: FunctionSpec, what: &str| match f {
            Some(f) => build_fn(f, what),
            None => input(default.build(), what),
        };
        let mut reports: Vec<SweepReport> = Vec::new();
        let mut extra = serde_json::Map::new();
        match kind {
            SweepKind::Bbm => {
                let u = opt_fn(&sc.u, FunctionSpec::Monomial { power: 1, coef: 1.0 }, "sweep.u")?;
                reports.push(self.timed("sweep", || bbm_sweep(omega, &u, sc.p, &grid))?);
            }
            SweepKind::Collapse => {
                let u = opt_fn(
                    &sc.u,
                    FunctionSpec::Gaussian { center: 0.5 * (d.a + d.b), width: 0.5 * (d.b - d.a), amp: 1.0 },
                    "sweep.u",
                )?;
                let collar = d.collar;
                reports.push(self.timed("sweep", || collapse_check(omega, &u, &family, &grid, collar))?);
            }
            SweepKind::Poincare => {
                let r = self.timed("sweep", || sharp_constant_sweep(&family, &grid, &mesh))?;
                extra.insert("uniformly_bounded".into(), json!(poincare_uniformly_bounded(&r)));
                reports.push(r);
            }
            SweepKind::Solution => {
                let problem = match sc.problem {
                    SpaceName::Dirichlet => SweepProblem::Dirichlet {
                        f: opt_fn(&sc.f, FunctionSpec::Sin { freq: pi, amp: pi * pi, phase: 0.0 }, "sweep.f")?,
                        g: opt_fn(&sc.g, FunctionSpec::Constant { value: 0.0 }, "sweep.g")?,
                    },
                    SpaceName::Neumann => SweepProblem::Neumann {
                        f: opt_fn(&sc.f, FunctionSpec::Cos { freq: pi, amp: pi * pi, phase: 0.0 }, "sweep.f")?,
                    },
                };
                reports.push(self.timed("sweep", || solution_convergence(&problem, &family, &grid, &mesh))?);
            }
            SweepKind::Eigs => {
                let cond = match sc.condition {
                    SpaceName::Dirichlet => LocalKind::Dirichlet,
                    SpaceName::Neumann => LocalKind::Neumann,
                };
                if sc.k == 0 {
                    return Err(Failure::config("sweep.k must be positive"));
                }
                reports = self.timed("sweep", || eigen_convergence(cond, &family, &grid, sc.k, &mesh))?;
            }
            SweepKind::Coefficient => {
                let delta = sc.delta;
                let c = self.timed("sweep", || limit_coefficient(&family, delta, &grid))?;
                let mut csv = Csv::new(&["parameter", "second_moment"]);
                for (t, m) in c.grid.iter().zip(&c.moments) {
                    csv.row(&[], &[*t, *m]);
                }
                self.write("sweep_coefficient.csv", csv.into_bytes())?;
                return Ok(Outcome {
                    results: json!({
                        "value": num(c.value),
                        "local_coefficient": num(c.local),
                        "grid": nums(&c.grid),
                        "second_moments": nums(&c.moments),
                    }),
                    provenance: json!({"value": "Neville extrapolation of 2 int_0^delta r^2 nu(r) dr to the local end of the family"}),
                    verdict_failed: false,
                });
            }
        }
        let name = match kind {
            SweepKind::Bbm => "bbm",
            SweepKind::Collapse => "collapse",
            SweepKind::Poincare => "poincare",
            SweepKind::Solution => "solution",
            SweepKind::Eigs => "eigs",
            SweepKind::Coefficient => unreachable!(),
        };
        if reports.len() == 1 {
            self.write(&format!("sweep_{name}.csv"), reports[0].to_csv().into_bytes())?;
        } else {
            for (k, r) in reports.iter().enumerate() {
                self.write(&format!("sweep_{name}_{k}.csv"), r.to_csv().into_bytes())?;
            }
        }
        let mut failed = reports.iter().any(|r| r.verdict == Verdict::Failed);
        if extra.get("uniformly_bounded") == Some(&json!(false)) {
            failed = true;
        }
        let prov: Vec<Value> = reports
            .iter()
            .map(|r| json!({"experiment": r.experiment, "reference": r.reference_provenance}))
            .collect();
        let mut results = serde_json::Map::new();
        results.insert("kind".into(), json!(kind));
        results.insert("reports".into(), serde_json::to_value(&reports).expect("reports serialize"));
        results.extend(extra);
        Ok(Outcome {
            results: Value::Object(results),
            provenance: json!(prov),
            verdict_failed: failed,
        })
    }
}

fn build_fn(f: &FunctionInput, what: &str) -> Result<ScalarField, Failure> {
    let spec = f.resolve().map_err(|e| Failure::config(format!("{what}: {e}")))?;
    input(spec.build(), what)
}

fn check_residual(residual: f64, tol: Option<f64>, what: &str) -> Result<(), Failure> {
    match tol {
        Some(t) if !(residual <= t) => Err(Failure::Numerical {
            kind: "residual".into(),
            message: format!("{what}: residual {residual:e} exceeds tolerance {t:e}"),
            detail: json!({"residual": num(residual), "tolerance": num(t)}),
        }),
        _ => Ok(()),
    }
}

fn tag_name(t: NodeTag) -> &'static str {
    match t {
        NodeTag::Interior => "interior",
        NodeTag::Boundary => "boundary",
        NodeTag::Complement => "complement",
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
