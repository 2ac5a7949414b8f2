//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O / validation / usage, 2 infeasible, 3 verification failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{dense_closed_loop, hinf_norm, verify_certificate_with, CertificateReport, HinfReport, VerifyOptions};
use crate::error::{Error, Result};
use crate::fixtures::{load_fixture, FIXTURE_NAMES};
use crate::lmi::{
    assemble_decomposed, assemble_dual_efbsp, export_sdpa, Backend, ClarabelBackend, FallbackBackend, InteriorPointBackend,
    MultiplierMode, Performance, StructureMode,
};
use crate::model::io::{gains_from_json, system_from_json, system_to_json};
use crate::model::{subsystem_plant, ControllerGains, HomogeneousSystem, PatternGraph};
use crate::slalg::sym_eig;
use crate::synthesis::{synthesize, SynthesisMode, SynthesisOptions, SynthesisResult, FULL_SIZE_LIMIT};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

pub const CSV_HEADER: &str = "n,mode,gamma_certified,gamma_verified,seconds";

#[derive(Parser, Debug)]
#[command(name = "netsynth", version, about = "Distributed H-infinity state feedback for networks of identical subsystems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesise a controller and verify it.
    Synth(SynthArgs),
    /// Closed-loop H-infinity norm and certificate check for given gains.
    Analyze(AnalyzeArgs),
    /// Time synthesis over ring networks of growing size.
    Bench(BenchArgs),
    /// Write the assembled problems in sparse SDPA format.
    Export(ExportArgs),
    /// Print or save a bundled system.
    Fixture(FixtureArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Kron,
    Blockdiag,
    Full,
}

impl From<ModeArg> for SynthesisMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Kron => SynthesisMode::Kron,
            ModeArg::Blockdiag => SynthesisMode::Blockdiag,
            ModeArg::Full => SynthesisMode::Full,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MultiplierArg {
    All,
    Extremes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Human,
    Csv,
    Structured,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    /// In-house interior point, Clarabel when it stalls.
    Auto,
    Ipm,
    Clarabel,
}

#[derive(Args, Debug, Clone)]
pub struct SolveArgs {
    #[arg(long)]
    pub gamma_lo: Option<f64>,
    #[arg(long)]
    pub gamma_hi: Option<f64>,
    /// Relative bisection tolerance.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = MultiplierArg::All)]
    pub multiplier: MultiplierArg,
    /// Strictness margin ε (default 1e-7 × data scale).
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
    pub backend: BackendArg,
}

impl SolveArgs {
    pub fn options(&self) -> SynthesisOptions {
        let backend: Arc<dyn Backend> = match self.backend {
            BackendArg::Auto => Arc::new(FallbackBackend::default()),
            BackendArg::Ipm => Arc::new(InteriorPointBackend::default()),
            BackendArg::Clarabel => Arc::new(ClarabelBackend::default()),
        };
        SynthesisOptions {
            gamma_lo: self.gamma_lo,
            gamma_hi: self.gamma_hi,
            bisect_tol: self.tol,
            epsilon: self.epsilon,
            multiplier_mode: match self.multiplier {
                MultiplierArg::All => MultiplierMode::PerEigenvalue,
                MultiplierArg::Extremes => MultiplierMode::ConvexifiedExtremes,
            },
            backend,
            ..SynthesisOptions::default()
        }
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// System JSON file or bundled fixture name.
    pub system: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Kron)]
    pub mode: ModeArg,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Human)]
    pub format: FormatArg,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    pub system: String,
    /// Gains JSON (bare {k_d, k_i} or a structured synth report). Zero gains if omitted.
    #[arg(long)]
    pub gains: Option<PathBuf>,
    /// Check the certificate against this level.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Human)]
    pub format: FormatArg,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Subsystem source; its pattern is replaced by rings. Defaults to the ring-base fixture.
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![4usize, 8, 16])]
    pub sizes: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![ModeArg::Kron])]
    pub mode: Vec<ModeArg>,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    pub system: String,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Kron)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = MultiplierArg::All)]
    pub multiplier: MultiplierArg,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FixtureArgs {
    /// Fixture name; lists the available ones when omitted.
    pub name: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Loads a system from a file, or a bundled fixture if no such file exists.
pub fn load_system(spec: &str) -> Result<HomogeneousSystem> {
    let path = Path::new(spec);
    if !path.exists() && FIXTURE_NAMES.contains(&spec) {
        return load_fixture(spec);
    }
    system_from_json(&fs::read_to_string(path)?)
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InfeasibleAtGammaHi { .. } => EXIT_INFEASIBLE,
        Error::VerificationFailed { .. } | Error::SingularF { .. } => EXIT_VERIFICATION,
        _ => EXIT_INPUT,
    }
}

/// One bench or synth row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub mode: SynthesisMode,
    pub gamma_certified: Option<f64>,
    pub gamma_verified: Option<f64>,
    pub seconds: Option<f64>,
    /// `ok`, `skipped`, `infeasible` or `error`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl BenchRow {
    pub fn csv(&self) -> String {
        let num = |v: Option<f64>| match v {
            Some(v) => format!("{v:.10}"),
            None => self.status.clone(),
        };
        format!("{},{},{},{},{}", self.n, self.mode, num(self.gamma_certified), num(self.gamma_verified), num(self.seconds))
    }
}

/// Parses the CLI arguments and runs the command. Reports go to `out` (or `--out`), diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            if code == EXIT_OK {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "{e}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(&a, out, err),
        Command::Analyze(a) => cmd_analyze(&a, out),
        Command::Bench(a) => cmd_bench(&a, out, err),
        Command::Export(a) => cmd_export(&a, out),
        Command::Fixture(a) => cmd_fixture(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn structured<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn fmt_matrix(m: &nalgebra::DMatrix<f64>) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:>12.6}")).collect();
        let _ = writeln!(s, "    [{}]", row.join(" "));
    }
    s
}

fn human_synth(r: &SynthesisResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mode             {}", r.mode);
    let _ = writeln!(s, "subsystems       {}", r.n_subsystems);
    let _ = writeln!(s, "gamma_certified  {:.10}", r.gamma_certified);
    let _ = writeln!(s, "gamma_verified   {:.10}", r.gamma_verified);
    let _ = writeln!(s, "spectral abscissa {:.6e}", r.certificate.spectral_abscissa);
    let _ = writeln!(s, "probes           {}", r.iterations.probes.len());
    let _ = writeln!(s, "seconds          {:.3}", r.seconds);
    let _ = writeln!(s, "K^d =\n{}", fmt_matrix(&r.gains.k_d).trim_end());
    let _ = writeln!(s, "K^i =\n{}", fmt_matrix(&r.gains.k_i).trim_end());
    if !r.per_eigenvalue.is_empty() {
        let _ = writeln!(s, "eigenvalue margins:");
        for m in &r.per_eigenvalue {
            let mult = m.multiplier.map_or("-".to_string(), |v| format!("{v:.3e}"));
            let _ = writeln!(s, "  lambda {:>10.6} (x{})  nominal {:.3e}  multiplier {}", m.lambda, m.multiplicity, m.nominal, mult);
        }
    }
    for w in &r.iterations.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

pub fn cmd_synth(a: &SynthArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let sys = load_system(&a.system)?;
    let opts = a.solve.options();
    let r = synthesize(&sys, a.mode.into(), &opts)?;
    for w in &r.iterations.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    let text = match a.format {
        FormatArg::Human => human_synth(&r),
        FormatArg::Csv => {
            let row = BenchRow {
                n: r.n_subsystems,
                mode: r.mode,
                gamma_certified: Some(r.gamma_certified),
                gamma_verified: Some(r.gamma_verified),
                seconds: Some(r.seconds),
                status: "ok".into(),
                detail: None,
            };
            format!("{CSV_HEADER}\n{}\n", row.csv())
        }
        FormatArg::Structured => structured(&r),
    };
    emit(&text, a.out.as_deref(), out)?;
    Ok(EXIT_OK)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub n_subsystems: usize,
    pub hinf: HinfReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateReport>,
}

pub fn cmd_analyze(a: &AnalyzeArgs, out: &mut dyn Write) -> Result<i32> {
    let sys = load_system(&a.system)?;
    let k = match &a.gains {
        Some(p) => gains_from_json(&fs::read_to_string(p)?)?,
        None => ControllerGains::zeros(&sys.dims),
    };
    if k.k_d.shape() != (sys.dims.n_u, sys.dims.n) || k.k_i.shape() != (sys.dims.n_u, sys.dims.n) {
        return Err(Error::Shape(format!("gains must be {}x{}", sys.dims.n_u, sys.dims.n)));
    }
    if let Some(g) = a.gamma {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {g}")));
        }
    }
    let ss = dense_closed_loop(&sys, &k)?;
    let hinf = hinf_norm(&ss, 1e-7)?;
    let certificate = a.gamma.map(|g| verify_certificate_with(&sys, &k, g, &VerifyOptions::default()));
    let report = AnalysisReport { n_subsystems: sys.n_subsystems(), hinf, certificate };
    let text = match a.format {
        FormatArg::Structured => structured(&report),
        FormatArg::Csv => {
            let mut s = "n,hinf,lower_bound,peak_frequency,stable,gamma,passed\n".to_string();
            let (g, p) = match &report.certificate {
                Some(c) => (c.gamma.to_string(), c.passed.to_string()),
                None => (String::new(), String::new()),
            };
            let h = &report.hinf;
            let _ = writeln!(s, "{},{},{},{},{},{g},{p}", report.n_subsystems, h.norm, h.lower_bound, h.peak_frequency, h.stable);
            s
        }
        FormatArg::Human => {
            let h = &report.hinf;
            let mut s = String::new();
            let _ = writeln!(s, "subsystems      {}", report.n_subsystems);
            let _ = writeln!(s, "stable          {}", h.stable);
            let _ = writeln!(s, "hinf            {:.10}", h.norm);
            let _ = writeln!(s, "lower bound     {:.10}", h.lower_bound);
            let _ = writeln!(s, "peak frequency  {:.6}", h.peak_frequency);
            if let Some(c) = &report.certificate {
                let _ = writeln!(s, "gamma           {}", c.gamma);
                let _ = writeln!(s, "certificate     {}", if c.passed { "passed" } else { "FAILED" });
                for f in &c.failures {
                    let _ = writeln!(s, "  {f}");
                }
            }
            s
        }
    };
    emit(&text, a.out.as_deref(), out)?;
    Ok(match &report.certificate {
        Some(c) if !c.passed => EXIT_VERIFICATION,
        _ => EXIT_OK,
    })
}

/// The subsystem of `base` replicated over a ring of `n` nodes.
pub fn on_ring(base: &HomogeneousSystem, n: usize) -> HomogeneousSystem {
    let mut s = base.clone();
    s.pattern = PatternGraph::ring(n);
    s
}

pub fn bench_rows(base: &HomogeneousSystem, sizes: &[usize], modes: &[SynthesisMode], opts: &SynthesisOptions) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    for &mode in modes {
        for &n in sizes {
            let mut row =
                BenchRow { n, mode, gamma_certified: None, gamma_verified: None, seconds: None, status: "ok".into(), detail: None };
            if mode == SynthesisMode::Full && n > FULL_SIZE_LIMIT {
                row.status = "skipped".into();
                row.detail = Some(format!("full-size guard: N > {FULL_SIZE_LIMIT}"));
                rows.push(row);
                continue;
            }
            let sys = on_ring(base, n);
            let t = Instant::now();
            match synthesize(&sys, mode, opts) {
                Ok(r) => {
                    row.gamma_certified = Some(r.gamma_certified);
                    row.gamma_verified = Some(r.gamma_verified);
                    row.seconds = Some(t.elapsed().as_secs_f64());
                }
                Err(e) => {
                    row.status = match e {
                        Error::InfeasibleAtGammaHi { .. } => "infeasible",
                        _ => "error",
                    }
                    .into();
                    row.detail = Some(e.to_string());
                }
            }
            rows.push(row);
        }
    }
    rows
}

pub fn cmd_bench(a: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    if a.sizes.iter().any(|&n| n < 3) {
        return Err(Error::InvalidArgument("ring sizes must be at least 3".into()));
    }
    let base = match &a.system {
        Some(s) => load_system(s)?,
        None => load_fixture("ring-base")?,
    };
    base.ensure_supported()?;
    let modes: Vec<SynthesisMode> = a.mode.iter().map(|&m| m.into()).collect();
    let rows = bench_rows(&base, &a.sizes, &modes, &a.solve.options());
    for r in &rows {
        if let Some(d) = &r.detail {
            let _ = writeln!(err, "n={} {}: {d}", r.n, r.mode);
        }
    }
    let text = match a.format {
        FormatArg::Structured => structured(&rows),
        FormatArg::Csv => {
            let mut s = format!("{CSV_HEADER}\n");
            for r in &rows {
                let _ = writeln!(s, "{}", r.csv());
            }
            s
        }
        FormatArg::Human => {
            let mut s = format!("{:>5} {:>10} {:>16} {:>16} {:>10}  status\n", "n", "mode", "gamma_cert", "gamma_verified", "seconds");
            let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.8}"));
            for r in &rows {
                let secs = r.seconds.map_or("-".to_string(), |v| format!("{v:.3}"));
                let _ = writeln!(
                    s,
                    "{:>5} {:>10} {:>16} {:>16} {:>10}  {}",
                    r.n,
                    r.mode.to_string(),
                    f(r.gamma_certified),
                    f(r.gamma_verified),
                    secs,
                    r.status
                );
            }
            s
        }
    };
    emit(&text, a.out.as_deref(), out)?;
    Ok(EXIT_OK)
}

/// SDPA documents for the problems a synthesis at fixed γ would solve, with file names.
pub fn export_documents(sys: &HomogeneousSystem, gamma: f64, mode: SynthesisMode, multiplier: MultiplierMode) -> Result<Vec<(String, String)>> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma must be positive and finite, got {gamma}")));
    }
    let structure = match mode {
        SynthesisMode::Blockdiag => StructureMode::BlockDiag,
        _ => StructureMode::Kron,
    };
    let asm = crate::lmi::AssemblyOptions { structure, multiplier, ..Default::default() };
    let perf = Performance::Gamma(gamma);
    if mode == SynthesisMode::Full {
        let (p, _) = assemble_dual_efbsp(sys, perf, &asm)?;
        return Ok(vec![("full.dat-s".to_string(), export_sdpa(&p))]);
    }
    sys.ensure_supported()?;
    let plant = subsystem_plant(sys);
    let lambdas = sym_eig(&sys.pattern, None)?.distinct_values();
    let mut docs = Vec::new();
    for (k, &l) in lambdas.iter().enumerate() {
        let (p, _) = assemble_decomposed(&plant, &[l], perf, &asm)?;
        docs.push((format!("{mode}-lambda{k}.dat-s"), export_sdpa(&p)));
    }
    Ok(docs)
}

pub fn cmd_export(a: &ExportArgs, out: &mut dyn Write) -> Result<i32> {
    if !(a.gamma > 0.0 && a.gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma must be positive and finite, got {}", a.gamma)));
    }
    let sys = load_system(&a.system)?;
    let multiplier = match a.multiplier {
        MultiplierArg::All => MultiplierMode::PerEigenvalue,
        MultiplierArg::Extremes => MultiplierMode::ConvexifiedExtremes,
    };
    let docs = export_documents(&sys, a.gamma, a.mode.into(), multiplier)?;
    fs::create_dir_all(&a.out)?;
    for (name, text) in &docs {
        let path = a.out.join(name);
        fs::write(&path, text)?;
        writeln!(out, "{}", path.display())?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_fixture(a: &FixtureArgs, out: &mut dyn Write) -> Result<i32> {
    let Some(name) = &a.name else {
        for n in FIXTURE_NAMES {
            writeln!(out, "{n}")?;
        }
        return Ok(EXIT_OK);
    };
    let mut text = system_to_json(&load_fixture(name)?);
    text.push('\n');
    emit(&text, a.out.as_deref(), out)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let mut full = vec!["netsynth"];
        full.extend_from_slice(args);
        let code = run(full, &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn fixture_listing_and_round_trip() {
        let (code, out, _) = run_capture(&["fixture"]);
        assert_eq!(code, 0);
        assert!(out.lines().any(|l| l == "paper-sec7"));
        let (code, out, _) = run_capture(&["fixture", "paper-sec7"]);
        assert_eq!(code, 0);
        assert_eq!(system_from_json(&out).unwrap(), load_fixture("paper-sec7").unwrap());
        assert_eq!(run_capture(&["fixture", "nope"]).0, EXIT_INPUT);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_capture(&["synth"]).0, EXIT_INPUT);
        assert_eq!(run_capture(&["synth", "/no/such/file.json"]).0, EXIT_INPUT);
        assert_eq!(run_capture(&["export", "paper-sec7", "--gamma", "0"]).0, EXIT_INPUT);
        assert_eq!(run_capture(&["export", "paper-sec7", "--gamma=-2"]).0, EXIT_INPUT);
        assert_eq!(run_capture(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn export_counts_distinct_eigenvalues() {
        let sys = load_fixture("paper-sec7").unwrap();
        let docs = export_documents(&sys, 10.0, SynthesisMode::Kron, MultiplierMode::PerEigenvalue).unwrap();
        assert_eq!(docs.len(), 3);
        let again = export_documents(&sys, 10.0, SynthesisMode::Kron, MultiplierMode::PerEigenvalue).unwrap();
        assert_eq!(docs, again);
        let full = export_documents(&sys, 10.0, SynthesisMode::Full, MultiplierMode::PerEigenvalue).unwrap();
        assert_eq!(full.len(), 1);
    }

    #[test]
    fn bench_guard_marks_rows() {
        let base = load_fixture("ring-base").unwrap();
        let rows = bench_rows(&base, &[13], &[SynthesisMode::Full], &SynthesisOptions::default());
        assert_eq!(rows[0].status, "skipped");
        assert_eq!(rows[0].csv(), "13,full,skipped,skipped,skipped");
    }

    #[test]
    fn csv_row_format() {
        let row = BenchRow {
            n: 8,
            mode: SynthesisMode::Kron,
            gamma_certified: Some(0.5),
            gamma_verified: Some(0.25),
            seconds: Some(1.0),
            status: "ok".into(),
            detail: None,
        };
        assert_eq!(row.csv(), "8,kron,0.5000000000,0.2500000000,1.0000000000");
        assert_eq!(CSV_HEADER.split(',').count(), row.csv().split(',').count());
    }
}
