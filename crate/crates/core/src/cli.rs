//! The `matcube` command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::apps::{cut_claim_instance, bqp_to_cube, maxcut_bound, stability_radius, CutMethod};
use crate::cube::{
    bental_test, construct_full_certificate, dual_solve, quad_test, rank_one_extract, verify_certificate, vertex_oracle,
    Certificate, MatrixCubeInstance, Relaxation, VERTEX_LIMIT,
};
use crate::error::{Error, Result};
use crate::io::{read_certificate, read_instance, write_certificate, Instance};
use crate::numerics::min_eig;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Exit {
    Certified = 0,
    Refuted = 1,
    Inconclusive = 2,
    InputError = 3,
}

#[derive(Debug, Parser)]
#[command(name = "matcube", version, about = "Robust semidefinite feasibility over parameter cubes")]
pub struct Cli {
    /// Seed for every randomized internal choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Vertex,
    Bental,
    Quad,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StabilityMethod {
    Vertex,
    Bental,
    Quad,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CutColumn {
    Exact,
    Quad,
    Bental,
    Gw,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide whether G(δ) ⪰ 0 on the cube.
    Verify {
        /// Instance file (omit with --batch).
        file: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "quad")]
        method: Method,
        /// Write the certificate here (a directory with --batch).
        #[arg(long)]
        cert_out: Option<PathBuf>,
        /// Relative tolerance for vertex eigenvalue signs.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Claimed bound: `min xᵀAx ≥ t` for bqp files, `max cut ≤ t` for graph files.
        #[arg(long)]
        t: Option<f64>,
        /// Verify every `*.json` instance in a directory.
        #[arg(long, conflicts_with = "file")]
        batch: Option<PathBuf>,
    },
    /// Build the degree-2m certificate for an instance PSD at every vertex.
    CertifyFull {
        file: PathBuf,
        /// Certificate output path.
        #[arg(long)]
        out: PathBuf,
        /// Claimed bound for bqp and graph files, as in `verify`.
        #[arg(long)]
        t: Option<f64>,
    },
    /// Re-check an exported certificate without any solver.
    CheckCert {
        instance: PathBuf,
        certificate: PathBuf,
        /// The bound the certificate was issued for (bqp and graph files).
        #[arg(long)]
        t: Option<f64>,
    },
    /// Largest cube radius with a common quadratic Lyapunov function.
    Stability {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        method: StabilityMethod,
        /// Bisection stops once the bracket is this narrow.
        #[arg(long, default_value_t = 1e-3)]
        tol_r: f64,
        /// Emit CSV instead of a table.
        #[arg(long)]
        csv: bool,
    },
    /// Compare MAXCUT capacity bounds.
    Maxcut {
        file: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "exact,quad,bental,gw")]
        methods: Vec<CutColumn>,
    },
}

/// Six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        format!("{x:.prec$}", prec = (5 - mag).max(0) as usize)
    } else {
        format!("{x:.5e}")
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| sig6(*x)).collect();
    format!("({})", parts.join(", "))
}

fn init_logging() {
    let level = match std::env::var("MATCUBE_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Off,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Warn,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
}

/// Parses arguments, runs the command, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Exit::InputError as i32 } else { 0 };
        }
    };
    init_logging();
    let mut out = String::new();
    let code = dispatch(&cli, &mut out);
    print!("{out}");
    code as i32
}

fn dispatch(cli: &Cli, out: &mut String) -> Exit {
    match &cli.command {
        Command::Verify { file, method, cert_out, tol, t, batch } => match (file, batch) {
            (_, Some(dir)) => verify_batch(dir, *method, cert_out.as_deref(), *tol, *t, cli.seed, out),
            (Some(f), None) => verify_file(f, *method, cert_out.as_deref(), *tol, *t, cli.seed, out),
            (None, None) => input_error(out, "verify needs an instance file or --batch"),
        },
        Command::CertifyFull { file, out: path, t } => certify_full(file, path, *t, out),
        Command::CheckCert { instance, certificate, t } => check_cert(instance, certificate, *t, out),
        Command::Stability { file, method, tol_r, csv } => stability(file, *method, *tol_r, *csv, out),
        Command::Maxcut { file, methods } => maxcut(file, methods, cli.seed, out),
    }
}

fn input_error(out: &mut String, msg: impl std::fmt::Display) -> Exit {
    eprintln!("error: {msg}");
    let _ = writeln!(out, "input error: {msg}");
    Exit::InputError
}

/// Errors that stem from the input rather than the computation.
fn is_input(e: &Error) -> bool {
    matches!(e, Error::Dimension(_) | Error::InvalidInput(_) | Error::Json(_) | Error::Io(_))
}

fn cube_from_file(path: &Path, t: Option<f64>) -> Result<MatrixCubeInstance> {
    let need_t = |kind: &str| t.ok_or_else(|| Error::InvalidInput(format!("{kind} instances need --t")));
    match read_instance(path)? {
        Instance::Cube(c) => {
            if t.is_some() {
                return Err(Error::InvalidInput("--t only applies to bqp and graph instances".into()));
            }
            Ok(c)
        }
        Instance::Bqp(a) => Ok(bqp_to_cube(&a).map_err(|e| Error::InvalidInput(e.to_string()))?.claim_instance(need_t("bqp")?)),
        Instance::Graph(g) => cut_claim_instance(&g, need_t("graph")?),
        Instance::System(_) => Err(Error::InvalidInput("system instances are handled by `stability`".into())),
    }
}

/// Vertex minimum, reported with the witness in the caller's coordinates.
fn vertex_refutation(inst: &MatrixCubeInstance, tol: f64, out: &mut String) -> Result<Option<Vec<f64>>> {
    let v = vertex_oracle(inst)?;
    let thresh = tol * inst.coeff_scale().max(1.0);
    let _ = writeln!(out, "min vertex eigenvalue: {}", sig6(v.min_lambda));
    if v.min_lambda < -thresh {
        let witness: Vec<f64> = v.argmin.iter().map(|d| d * inst.radius()).collect();
        let _ = writeln!(out, "refuted: G(δ) has eigenvalue {} at δ = {}", sig6(v.min_lambda), fmt_vec(&witness));
        return Ok(Some(witness));
    }
    Ok(None)
}

/// Looks for a refuting vertex among the atoms of the dual solution.
fn dual_refutation(inst: &MatrixCubeInstance, tol: f64, seed: u64, out: &mut String) -> Option<Vec<f64>> {
    let d = dual_solve(inst).ok()?;
    let ex = rank_one_extract(&d, crate::cube::dual::DEFAULT_RANK_TOL, seed).ok()?;
    let thresh = tol * inst.coeff_scale().max(1.0);
    for a in &ex.atoms {
        let lam = min_eig(&inst.eval(&a.delta).ok()?).ok()?;
        if lam < -thresh {
            let witness: Vec<f64> = a.delta.iter().map(|d| d * inst.radius()).collect();
            let _ = writeln!(out, "refuted: G(δ) has eigenvalue {} at δ = {} (from the dual solution)", sig6(lam), fmt_vec(&witness));
            return Some(witness);
        }
    }
    None
}

fn save(path: Option<&Path>, inst: &MatrixCubeInstance, cert: &Certificate, out: &mut String) -> Result<()> {
    let Some(p) = path else { return Ok(()) };
    let report = verify_certificate(inst, cert)?;
    write_certificate(p, cert, inst.n(), inst.m(), Some(&report))?;
    let _ = writeln!(out, "certificate written to {}", p.display());
    Ok(())
}

fn verify_instance(
    inst: &MatrixCubeInstance,
    method: Method,
    cert_out: Option<&Path>,
    tol: f64,
    seed: u64,
    out: &mut String,
) -> Result<Exit> {
    let _ = writeln!(out, "instance: n = {}, m = {}, R = {}", inst.n(), inst.m(), sig6(inst.radius()));
    match method {
        Method::Vertex => {
            if inst.m() > VERTEX_LIMIT {
                let _ = writeln!(out, "inconclusive: vertex enumeration needs m <= {VERTEX_LIMIT}");
                return Ok(Exit::Inconclusive);
            }
            if vertex_refutation(inst, tol, out)?.is_some() {
                return Ok(Exit::Refuted);
            }
            let _ = writeln!(out, "certified: G(δ) ⪰ 0 at all {} vertices", 1u64 << inst.m());
            Ok(Exit::Certified)
        }
        Method::Full => {
            if inst.m() > VERTEX_LIMIT {
                let _ = writeln!(out, "inconclusive: the full certificate needs m <= {VERTEX_LIMIT}");
                return Ok(Exit::Inconclusive);
            }
            if vertex_refutation(inst, tol, out)?.is_some() {
                return Ok(Exit::Refuted);
            }
            match construct_full_certificate(inst) {
                Ok(cert) => {
                    let r = verify_certificate(inst, &cert)?;
                    if !r.valid {
                        let _ = writeln!(out, "inconclusive: numerical failure, full certificate did not verify ({:?})", r.message);
                        return Ok(Exit::Inconclusive);
                    }
                    if let Certificate::Full { path, .. } = &cert {
                        let _ = writeln!(out, "certified: full certificate ({path:?}), residual {}", sig6(r.residual));
                    }
                    save(cert_out, inst, &cert, out)?;
                    Ok(Exit::Certified)
                }
                Err(e) => {
                    let _ = writeln!(out, "inconclusive: numerical failure: {e}");
                    Ok(Exit::Inconclusive)
                }
            }
        }
        Method::Bental | Method::Quad => {
            let (name, res) = if method == Method::Quad { ("quadratic", quad_test(inst)) } else { ("Ben-Tal", bental_test(inst)) };
            match res {
                Ok(r) if r.certified() => {
                    let cert = r.certificate.as_ref().expect("certified");
                    let residual = r.report.as_ref().map_or(0.0, |x| x.residual);
                    let _ = writeln!(out, "certified: {name} certificate, margin {}, residual {}", sig6(r.margin), sig6(residual));
                    save(cert_out, inst, cert, out)?;
                    Ok(Exit::Certified)
                }
                Ok(r) => {
                    if dual_refutation(inst, tol, seed, out).is_some() {
                        return Ok(Exit::Refuted);
                    }
                    let _ = writeln!(out, "inconclusive: certificate not found ({name} margin {})", sig6(r.margin));
                    Ok(Exit::Inconclusive)
                }
                Err(e) if is_input(&e) => Err(e),
                Err(e) => {
                    let _ = writeln!(out, "inconclusive: numerical failure: {e}");
                    Ok(Exit::Inconclusive)
                }
            }
        }
    }
}

fn verify_file(path: &Path, method: Method, cert_out: Option<&Path>, tol: f64, t: Option<f64>, seed: u64, out: &mut String) -> Exit {
    if cert_out.is_some() && method == Method::Vertex {
        return input_error(out, "the vertex method produces no certificate; use --method full");
    }
    let inst = match cube_from_file(path, t) {
        Ok(i) => i,
        Err(e) => return input_error(out, format!("{}: {e}", path.display())),
    };
    match verify_instance(&inst, method, cert_out, tol, seed, out) {
        Ok(code) => code,
        Err(e) if is_input(&e) => input_error(out, e),
        Err(e) => {
            let _ = writeln!(out, "inconclusive: numerical failure: {e}");
            Exit::Inconclusive
        }
    }
}

fn verify_batch(dir: &Path, method: Method, cert_dir: Option<&Path>, tol: f64, t: Option<f64>, seed: u64, out: &mut String) -> Exit {
    let mut files: Vec<PathBuf> = match std::fs::read_dir(dir) {
        Ok(rd) => rd.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|x| x == "json")).collect(),
        Err(e) => return input_error(out, format!("{}: {e}", dir.display())),
    };
    files.sort();
    if let Some(d) = cert_dir {
        if let Err(e) = std::fs::create_dir_all(d) {
            return input_error(out, format!("{}: {e}", d.display()));
        }
    }
    let results: Vec<(Exit, String)> = std::thread::scope(|s| {
        let handles: Vec<_> = files
            .iter()
            .map(|f| {
                s.spawn(move || {
                    let mut local = String::new();
                    let cert = cert_dir.map(|d| d.join(format!("{}.cert.json", f.file_stem().unwrap_or_default().to_string_lossy())));
                    let code = verify_file(f, method, cert.as_deref(), tol, t, seed, &mut local);
                    (code, local)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or((Exit::Inconclusive, "worker panicked\n".into()))).collect()
    });
    let mut worst = Exit::Certified;
    for (f, (code, text)) in files.iter().zip(&results) {
        let _ = writeln!(out, "== {} (exit {})", f.display(), *code as i32);
        out.push_str(text);
        worst = worst.max(*code);
    }
    let _ = writeln!(out, "{} instances", files.len());
    worst
}

fn certify_full(path: &Path, cert_path: &Path, t: Option<f64>, out: &mut String) -> Exit {
    let inst = match cube_from_file(path, t) {
        Ok(i) => i,
        Err(e) => return input_error(out, format!("{}: {e}", path.display())),
    };
    if inst.m() > VERTEX_LIMIT {
        let _ = writeln!(out, "inconclusive: the full certificate needs m <= {VERTEX_LIMIT}");
        return Exit::Inconclusive;
    }
    match vertex_refutation(&inst, crate::cube::full::PRECONDITION_TOL, out) {
        Ok(Some(_)) => return Exit::Refuted,
        Ok(None) => {}
        Err(e) => return input_error(out, e),
    }
    let cert = match construct_full_certificate(&inst) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(out, "inconclusive: numerical failure: {e}");
            return Exit::Inconclusive;
        }
    };
    if let Certificate::Full { path, .. } = &cert {
        let _ = writeln!(out, "construction path: {}", if *path == crate::cube::FullPath::ClosedForm { "closed-form" } else { "sdp-fallback" });
    }
    match save(Some(cert_path), &inst, &cert, out) {
        Ok(()) => Exit::Certified,
        Err(e) => input_error(out, e),
    }
}

fn check_cert(inst_path: &Path, cert_path: &Path, t: Option<f64>, out: &mut String) -> Exit {
    let inst = match cube_from_file(inst_path, t) {
        Ok(i) => i,
        Err(e) => return input_error(out, format!("{}: {e}", inst_path.display())),
    };
    let cert = match read_certificate(cert_path) {
        Ok(c) => c,
        Err(e) => return input_error(out, format!("{}: {e}", cert_path.display())),
    };
    match verify_certificate(&inst, &cert) {
        Ok(r) => {
            let worst = r.psd_margins.iter().copied().fold(f64::INFINITY, f64::min);
            let _ = writeln!(
                out,
                "{} certificate: residual {} (tolerance {}), smallest PSD margin {}",
                cert.variant_name(),
                sig6(r.residual),
                sig6(r.tolerance),
                sig6(worst)
            );
            if r.valid {
                let _ = writeln!(out, "valid");
                Exit::Certified
            } else {
                let _ = writeln!(out, "invalid: {}", r.message.unwrap_or_default());
                Exit::Inconclusive
            }
        }
        Err(e) => input_error(out, e),
    }
}

fn stability(path: &Path, method: StabilityMethod, tol_r: f64, csv: bool, out: &mut String) -> Exit {
    let sys = match read_instance(path) {
        Ok(Instance::System(s)) => s,
        Ok(other) => return input_error(out, format!("stability needs a system instance, got {}", other.kind())),
        Err(e) => return input_error(out, format!("{}: {e}", path.display())),
    };
    let methods: Vec<(Relaxation, &str)> = match method {
        StabilityMethod::Vertex => vec![(Relaxation::Vertex, "R_e")],
        StabilityMethod::Quad => vec![(Relaxation::Quadratic, "R_s")],
        StabilityMethod::Bental => vec![(Relaxation::BenTal, "R_t")],
        StabilityMethod::All => vec![(Relaxation::Vertex, "R_e"), (Relaxation::Quadratic, "R_s"), (Relaxation::BenTal, "R_t")],
    };
    if csv {
        let _ = writeln!(out, "method,symbol,radius");
    } else {
        let _ = writeln!(out, "system: n = {}, m = {}, nominal Hurwitz: {}", sys.n(), sys.m(), sys.nominal_hurwitz());
    }
    let mut radii = Vec::new();
    for (rel, sym) in methods {
        match stability_radius(&sys, rel, tol_r) {
            Ok(rep) => {
                let label = format!("{rel:?}").to_lowercase();
                if csv {
                    let _ = writeln!(out, "{label},{sym},{}", sig6(rep.radius));
                } else {
                    let _ = writeln!(out, "{sym} ({label}) = {}", sig6(rep.radius));
                }
                radii.push((sym, rep.radius));
            }
            Err(e) if is_input(&e) => return input_error(out, e),
            Err(e) => {
                let _ = writeln!(out, "{sym}: numerical failure: {e}");
                return Exit::Inconclusive;
            }
        }
    }
    if radii.len() == 3 && !csv {
        let (re, rs, rt) = (radii[0].1, radii[1].1, radii[2].1);
        let rel = |a: f64, b: f64| if (a - b).abs() <= 2.0 * tol_r { "=" } else if a < b { "<" } else { ">" };
        let _ = writeln!(out, "R_t {} R_s {} R_e", rel(rt, rs), rel(rs, re));
    }
    Exit::Certified
}

fn maxcut(path: &Path, methods: &[CutColumn], seed: u64, out: &mut String) -> Exit {
    let g = match read_instance(path) {
        Ok(Instance::Graph(g)) => g,
        Ok(other) => return input_error(out, format!("maxcut needs a graph instance, got {}", other.kind())),
        Err(e) => return input_error(out, format!("{}: {e}", path.display())),
    };
    let mut header = Vec::new();
    let mut row = Vec::new();
    let mut notes = Vec::new();
    for col in methods {
        let m = match col {
            CutColumn::Exact => CutMethod::Exact,
            CutColumn::Quad => CutMethod::Quad,
            CutColumn::Bental => CutMethod::Bental,
            CutColumn::Gw => CutMethod::GwSdp,
        };
        header.push(m.label().to_string());
        match maxcut_bound(&g, m, seed) {
            Ok(b) => {
                row.push(sig6(b.capacity_bound));
                for (cut, v) in b.cuts.iter().zip(&b.cut_values) {
                    let side: Vec<String> = cut.iter().enumerate().filter(|(_, s)| **s > 0.0).map(|(i, _)| (i + 1).to_string()).collect();
                    notes.push(format!("{}: cut {{{}}} of weight {}", m.label(), side.join(", "), sig6(*v)));
                }
                if let Some(d) = b.diagnostic {
                    notes.push(format!("{}: {d}", m.label()));
                }
            }
            Err(e) => {
                row.push("n/a".into());
                notes.push(format!("{}: {e}", m.label()));
            }
        }
    }
    let widths: Vec<usize> = header.iter().zip(&row).map(|(h, r)| h.len().max(r.len())).collect();
    let line = |cells: &[String]| cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join(" | ");
    let _ = writeln!(out, "graph: {} nodes, {} edges, total weight {}", g.node_count(), g.edges().len(), sig6(g.total_weight()));
    let _ = writeln!(out, "{}", line(&header));
    let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    let _ = writeln!(out, "{}", line(&row));
    for n in notes {
        let _ = writeln!(out, "{n}");
    }
    if row.iter().any(|r| r == "n/a") {
        Exit::Inconclusive
    } else {
        Exit::Certified
    }
}
