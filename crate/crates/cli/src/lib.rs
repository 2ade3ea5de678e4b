//! Command-line front end for `longrange`.
//!
//! Every output starts with `#` header lines recording the tool version, the
//! effective configuration, the seed and the canonical spec. Numbers are
//! printed as the shortest decimal that parses back to the same `f64`.

pub mod specfile;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use longrange::ensemble::{self, McOptions};
use longrange::floquet;
use longrange::operator;
use longrange::shnol::{self, CertifyOptions, GeneralizedEigenfunctionWindow};
use longrange::{CoefficientField, Complex64, OperatorKind, SpectrumSet};

use specfile::{fmt_f64, EnsembleSpec, OperatorSpec, SpecDocument, SpecError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_HYPOTHESIS: i32 = 4;
pub const EXIT_IO: i32 = 5;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Spec(#[from] SpecError),
    #[error("{0}")]
    Library(#[from] longrange::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    /// A structural check ran to completion and found a violation.
    #[error("{0}")]
    Structure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Spec(_) => EXIT_USAGE,
            CliError::Library(e) if e.is_hypothesis_violation() => EXIT_HYPOTHESIS,
            CliError::Library(longrange::Error::Eigensolver(_)) => EXIT_OTHER,
            CliError::Library(_) => EXIT_PRECONDITION,
            CliError::Structure(_) => EXIT_HYPOTHESIS,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Spec(SpecError::Syntax { .. }) => "syntax",
            CliError::Spec(SpecError::Semantic { .. }) => "semantic",
            CliError::Library(e) if e.is_hypothesis_violation() => "hypothesis",
            CliError::Library(longrange::Error::Eigensolver(_)) => "numerical",
            CliError::Library(_) => "precondition",
            CliError::Structure(_) => "hypothesis",
            CliError::Io { .. } => "io",
        }
    }

    /// One `key=value` line for the error stream.
    pub fn structured(&self) -> String {
        let mut line = format!("error kind={} exit={}", self.kind(), self.exit_code());
        match self {
            CliError::Spec(SpecError::Syntax { line: l, column, message }) => {
                let _ = write!(line, " line={l} column={column} message={message:?}");
            }
            CliError::Spec(SpecError::Semantic { key, message }) => {
                let _ = write!(line, " key={key:?} message={message:?}");
            }
            CliError::Io { path, source } => {
                let _ = write!(line, " path={:?} message={:?}", path.display().to_string(), source.to_string());
            }
            other => {
                let _ = write!(line, " message={:?}", other.to_string());
            }
        }
        line
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "longrange", version, about = "Long-range lattice operators: truncations, spectra and certificates")]
pub struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "LONGRANGE_JOBS", default_value_t = 0)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Source {
    /// Spec file.
    #[arg(long, value_name = "PATH", required_unless_present = "inline", conflicts_with = "inline")]
    pub spec: Option<PathBuf>,
    /// Spec text given inline; `;` separates lines.
    #[arg(long, value_name = "TEXT")]
    pub inline: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump the truncation to the ball of radius N as CSV.
    Truncate {
        #[command(flatten)]
        source: Source,
        #[arg(long, short = 'N', default_value_t = 5.0)]
        n: f64,
        /// Seed for ensemble specs.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Band spectrum of a periodic operator.
    SpectrumPeriodic {
        #[command(flatten)]
        source: Source,
        /// Period; defaults to the spec's period.
        #[arg(long)]
        p: Option<i64>,
        /// Quasimomentum grid step.
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        /// Symbol truncation radius; defaults to the hopping range, or to the
        /// smallest radius whose tail is below h times the unit-distance envelope.
        #[arg(long = "tail-radius", short = 'R')]
        tail_radius: Option<f64>,
    },
    /// Monte Carlo spectrum estimate of a random ensemble.
    SpectrumRandom {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, short = 'N', default_value_t = 50.0)]
        n: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Drop eigenpairs concentrated on the outer shell.
        #[arg(long)]
        filter: bool,
        #[arg(long = "merge-gap", default_value_t = 0.05)]
        merge_gap: f64,
        /// Also write every eigenvalue as CSV to this file.
        #[arg(long, value_name = "PATH")]
        eigenvalues: Option<PathBuf>,
    },
    /// Certify that z is within a computed distance of the spectrum.
    ShnolCertify {
        #[command(flatten)]
        source: Source,
        #[arg(long, allow_hyphen_values = true)]
        z: f64,
        #[arg(long = "z-im", allow_hyphen_values = true, default_value_t = 0.0)]
        z_im: f64,
        #[arg(long, default_value_t = 2)]
        q: u32,
        #[arg(long = "l-max", default_value_t = 10)]
        l_max: u32,
        /// Quasimomentum of the plane-wave trial function, comma separated; zero by default.
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<String>,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// Accept non-real z for self-adjoint operators.
        #[arg(long = "allow-complex")]
        allow_complex: bool,
    },
    /// Four-region residual decomposition with explicit bounds, as CSV.
    ShnolBounds {
        #[command(flatten)]
        source: Source,
        #[arg(long, allow_hyphen_values = true)]
        z: f64,
        #[arg(long, default_value_t = 2)]
        q: u32,
        /// Values of L, comma separated.
        #[arg(long = "l", value_delimiter = ',', default_value = "3,5")]
        l: Vec<u32>,
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<String>,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
    },
    /// Closed-form spectrum of the random Jacobi ensemble.
    JacobiFormula {
        /// Support of γ, e.g. `{1}`, `{0,1}` or `[0,1] u {3}`.
        #[arg(long, allow_hyphen_values = true)]
        support: String,
        #[arg(long, short, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Envelope, self-adjointness or normality checks on a ball.
    CheckStructure {
        #[command(flatten)]
        source: Source,
        #[arg(long, short = 'N', default_value_t = 5.0)]
        n: f64,
        /// Seed for ensemble specs.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Radius of the j-sums in the normality check.
        #[arg(long = "tail-radius", short = 'R', default_value_t = 0.0)]
        tail_radius: f64,
    },
}

/// Rewrites `spectrum periodic` style invocations to their hyphenated form.
pub fn normalize_args(args: Vec<OsString>) -> Vec<OsString> {
    const GROUPS: [(&str, &[&str]); 4] = [
        ("spectrum", &["periodic", "random"]),
        ("shnol", &["certify", "bounds"]),
        ("jacobi", &["formula"]),
        ("check", &["structure"]),
    ];
    let mut out = args;
    let Some(pos) = out.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|p| p + 1) else {
        return out;
    };
    if pos + 1 < out.len() {
        let (head, next) = (out[pos].to_string_lossy().into_owned(), out[pos + 1].to_string_lossy().into_owned());
        if GROUPS.iter().any(|(g, subs)| *g == head && subs.contains(&next.as_str())) {
            out[pos] = OsString::from(format!("{head}-{next}"));
            out.remove(pos + 1);
        }
    }
    out
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit status. Results go to `stdout` unless redirected;
/// errors are written to `stderr` as structured lines.
pub fn run(args: impl IntoIterator<Item = impl Into<OsString>>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let args = normalize_args(args.into_iter().map(Into::into).collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    let err = CliError::Usage(text.lines().next().unwrap_or("").trim_start_matches("error: ").to_string());
                    let _ = writeln!(stderr, "{}", err.structured());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli, stdout) {
        Ok(status) => status,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.structured());
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> CliResult<i32> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} worker threads: {e}", cli.jobs)))?;
    let report = pool.install(|| dispatch(&cli.command))?;
    for (path, body) in &report.extra {
        write_file(path, body)?;
    }
    match &report.output {
        Some(path) => write_file(path, &report.body)?,
        None => stdout
            .write_all(report.body.as_bytes())
            .map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source })?,
    }
    match report.failure {
        Some(err) => Err(err),
        None => Ok(EXIT_OK),
    }
}

fn write_file(path: &Path, body: &str) -> CliResult<()> {
    std::fs::write(path, body).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// A finished command: its main output, side files and, for checks that
/// found a violation, the error to report after writing everything.
struct Report {
    body: String,
    output: Option<PathBuf>,
    extra: Vec<(PathBuf, String)>,
    failure: Option<CliError>,
}

impl Report {
    fn new(body: String, output: &Option<PathBuf>) -> Self {
        Self { body, output: output.clone(), extra: Vec::new(), failure: None }
    }
}

struct Header {
    command: &'static str,
    config: Vec<(&'static str, String)>,
    seed: Option<u64>,
    spec: Option<SpecDocument>,
}

impl Header {
    fn new(command: &'static str) -> Self {
        Self { command, config: Vec::new(), seed: None, spec: None }
    }

    fn with(mut self, key: &'static str, value: impl ToString) -> Self {
        self.config.push((key, value.to_string()));
        self
    }

    fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn spec(mut self, source: &Source, doc: &SpecDocument) -> Self {
        let origin = match &source.spec {
            Some(path) => path.display().to_string(),
            None => "inline".into(),
        };
        self.config.insert(0, ("spec", origin));
        self.spec = Some(doc.clone());
        self
    }

    fn render(&self) -> String {
        let mut out = format!("# longrange {VERSION}\n# command: {}\n# config:", self.command);
        for (k, v) in &self.config {
            let _ = write!(out, " {k}={v}");
        }
        out.push('\n');
        match self.seed {
            Some(s) => {
                let _ = writeln!(out, "# seed: {s}");
            }
            None => out.push_str("# seed: none\n"),
        }
        if let Some(doc) = &self.spec {
            for line in doc.to_string().lines() {
                let _ = writeln!(out, "# spec: {line}");
            }
        }
        out
    }
}

fn load_spec(source: &Source) -> CliResult<SpecDocument> {
    let text = match (&source.spec, &source.inline) {
        (Some(path), _) => std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?,
        (None, Some(inline)) => inline.replace(';', "\n"),
        (None, None) => return Err(CliError::Usage("either --spec or --inline is required".into())),
    };
    Ok(specfile::parse_spec(&text)?)
}

fn expect_operator(doc: &SpecDocument, command: &str) -> CliResult<OperatorSpec> {
    match doc {
        SpecDocument::Operator(op) => Ok(op.clone()),
        SpecDocument::Ensemble(_) => Err(CliError::Usage(format!("{command} needs an operator spec, got an ensemble"))),
    }
}

fn expect_ensemble(doc: &SpecDocument, command: &str) -> CliResult<EnsembleSpec> {
    match doc {
        SpecDocument::Ensemble(e) => Ok(e.clone()),
        SpecDocument::Operator(_) => Err(CliError::Usage(format!("{command} needs an ensemble spec, got an operator"))),
    }
}

/// The field of an operator spec, or of the configuration `seed` of an
/// ensemble sampled on a window of radius `2n`.
fn field_of(doc: &SpecDocument, n: f64, seed: u64) -> CliResult<CoefficientField> {
    Ok(match doc {
        SpecDocument::Operator(op) => op.build()?,
        SpecDocument::Ensemble(e) => ensemble::sample_config(&e.build()?, 2.0 * n, seed)?.field(),
    })
}

fn parse_theta(theta: &Option<String>, d: usize) -> CliResult<Vec<f64>> {
    let Some(text) = theta else {
        return Ok(vec![0.0; d]);
    };
    let values: Result<Vec<f64>, _> = text.split(',').map(|t| t.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if v.len() == d && v.iter().all(|x| x.is_finite()) => Ok(v),
        _ => Err(CliError::Usage(format!("--theta must list {d} finite number(s), got `{text}`"))),
    }
}

/// Parses support descriptors such as `{1}`, `{0,1}` or `[0,1] u {3}`.
pub fn parse_support(text: &str) -> CliResult<SpectrumSet> {
    let bad = |msg: &str| CliError::Usage(format!("support `{text}`: {msg}"));
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let mut rest = compact.as_str();
    let mut pieces = Vec::new();
    while !rest.is_empty() {
        rest = rest.strip_prefix('u').or_else(|| rest.strip_prefix('∪')).unwrap_or(rest);
        let (close, is_set) = match rest.chars().next() {
            Some('{') => ('}', true),
            Some('[') => (']', false),
            _ => return Err(bad("expected `{` or `[`")),
        };
        let end = rest.find(close).ok_or_else(|| bad("unclosed bracket"))?;
        let values: Result<Vec<f64>, _> = rest[1..end].split(',').map(str::parse::<f64>).collect();
        let values = values.map_err(|_| bad("not a number"))?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad("values must be finite"));
        }
        if is_set {
            pieces.extend(values.iter().map(|&v| (v, v)));
        } else {
            match values[..] {
                [lo, hi] if lo <= hi => pieces.push((lo, hi)),
                _ => return Err(bad("intervals are written [lo,hi] with lo ≤ hi")),
            }
        }
        rest = &rest[end + close.len_utf8()..];
    }
    if pieces.is_empty() {
        return Err(bad("empty support"));
    }
    Ok(SpectrumSet::new(pieces, 0.0)?)
}

fn render_spectrum(out: &mut String, set: &SpectrumSet) {
    let _ = writeln!(out, "# eta\t{}", fmt_f64(set.eta()));
    for iv in set.intervals() {
        let _ = writeln!(out, "{}\t{}", fmt_f64(iv.lo), fmt_f64(iv.hi));
    }
}

fn dispatch(command: &Command) -> CliResult<Report> {
    match command {
        Command::Truncate { source, n, seed } => {
            let doc = load_spec(source)?;
            let field = field_of(&doc, *n, *seed)?;
            let matrix = operator::assemble_sparse(&field, *n)?;
            let ball = longrange::Ball::new(field.dim(), *n)?;
            let mut header = Header::new("truncate").with("N", fmt_f64(*n)).spec(source, &doc);
            if matches!(doc, SpecDocument::Ensemble(_)) {
                header = header.seed(*seed);
            }
            let mut body = header.render();
            let _ = writeln!(body, "# size\t{}", ball.len());
            body.push_str("row,col,n,m,re,im\n");
            let dense = matrix.to_dense();
            for (row, n_pt) in ball.points().iter().enumerate() {
                for (col, m_pt) in ball.points().iter().enumerate() {
                    let v = dense[(row, col)];
                    if v != Complex64::new(0.0, 0.0) {
                        let _ = writeln!(
                            body,
                            "{row},{col},{},{},{},{}",
                            point_cell(n_pt),
                            point_cell(m_pt),
                            fmt_f64(v.re),
                            fmt_f64(v.im)
                        );
                    }
                }
            }
            Ok(Report::new(body, &source.output))
        }
        Command::SpectrumPeriodic { source, p, h, tail_radius } => {
            let doc = load_spec(source)?;
            let op = expect_operator(&doc, "spectrum-periodic")?;
            let field = op.build()?;
            let period = p.unwrap_or(op.period());
            if period % op.period() != 0 {
                return Err(CliError::Usage(format!("period {period} is not a multiple of the spec's period {}", op.period())));
            }
            let radius = match tail_radius {
                Some(r) => *r,
                None => floquet::default_tail_radius(&field, *h)?,
            };
            let band = floquet::periodic_spectrum_of_field(&field, period, *h, radius)?;
            let mut body = Header::new("spectrum-periodic")
                .with("p", period)
                .with("h", fmt_f64(*h))
                .with("R", fmt_f64(radius))
                .spec(source, &doc)
                .render();
            let _ = writeln!(body, "# tau\t{}", fmt_f64(band.tau));
            let _ = writeln!(body, "# lipschitz\t{}", fmt_f64(band.lipschitz));
            let _ = writeln!(body, "# grid_per_axis\t{}", band.grid_per_axis);
            render_spectrum(&mut body, &band.spectrum);
            Ok(Report::new(body, &source.output))
        }
        Command::SpectrumRandom { source, trials, n, seed, filter, merge_gap, eigenvalues } => {
            let doc = load_spec(source)?;
            let spec = expect_ensemble(&doc, "spectrum-random")?.build()?;
            let options = McOptions { merge_gap: *merge_gap, boundary_filter: *filter };
            let mc = ensemble::mc_spectrum(&spec, *trials, *n, *seed, options)?;
            let header = Header::new("spectrum-random")
                .with("trials", trials)
                .with("N", fmt_f64(*n))
                .with("filter", filter)
                .with("merge_gap", fmt_f64(*merge_gap))
                .with("quantile", fmt_f64(spec.quantile()))
                .seed(*seed)
                .spec(source, &doc)
                .render();
            let mut body = header.clone();
            let _ = writeln!(body, "# filtered\t{}", mc.filtered);
            render_spectrum(&mut body, &mc.estimate);
            let mut report = Report::new(body, &source.output);
            if let Some(path) = eigenvalues {
                let mut dump = header;
                dump.push_str("trial,index,eigenvalue\n");
                for (trial, values) in mc.eigenvalues.iter().enumerate() {
                    for (index, v) in values.iter().enumerate() {
                        let _ = writeln!(dump, "{trial},{index},{}", fmt_f64(*v));
                    }
                }
                report.extra.push((path.clone(), dump));
            }
            Ok(report)
        }
        Command::ShnolCertify { source, z, z_im, q, l_max, theta, epsilon, allow_complex } => {
            let doc = load_spec(source)?;
            let op = expect_operator(&doc, "shnol-certify")?;
            let field = op.build()?;
            let theta = parse_theta(theta, field.dim())?;
            let energy = Complex64::new(*z, *z_im);
            let n_max = (*l_max as f64).powi(*q as i32);
            let phi = GeneralizedEigenfunctionWindow::bloch(&theta, n_max, energy, *epsilon)?;
            let options = CertifyOptions { allow_complex_energy: *allow_complex };
            let cert = shnol::certify_spectrum_point(&field, energy, &phi, *q, *l_max, options)?;
            let mut body = Header::new("shnol-certify")
                .with("z", fmt_f64(*z))
                .with("z_im", fmt_f64(*z_im))
                .with("q", q)
                .with("L_max", l_max)
                .with("theta", theta.iter().map(|t| fmt_f64(*t)).collect::<Vec<_>>().join(","))
                .with("epsilon", fmt_f64(*epsilon))
                .spec(source, &doc)
                .render();
            let slope = cert.trend_slope.map_or("none".to_string(), fmt_f64);
            for (k, v) in [
                ("z_re", fmt_f64(cert.z.re)),
                ("z_im", fmt_f64(cert.z.im)),
                ("N", fmt_f64(cert.n)),
                ("L", cert.l.to_string()),
                ("rho", fmt_f64(cert.rho)),
                ("delta", fmt_f64(cert.delta)),
                ("dist_bound", fmt_f64(cert.dist_bound)),
                ("trend_slope", slope),
            ] {
                let _ = writeln!(body, "{k}={v}");
            }
            Ok(Report::new(body, &source.output))
        }
        Command::ShnolBounds { source, z, q, l, theta, epsilon } => {
            let doc = load_spec(source)?;
            let op = expect_operator(&doc, "shnol-bounds")?;
            let field = op.build()?;
            let theta = parse_theta(theta, field.dim())?;
            let l_top = *l.iter().max().ok_or_else(|| CliError::Usage("--l needs at least one value".into()))?;
            let n_max = (l_top as f64 + 1.0).powi(*q as i32);
            let energy = Complex64::new(*z, 0.0);
            let phi = GeneralizedEigenfunctionWindow::bloch(&theta, n_max, energy, *epsilon)?;
            let mut body = Header::new("shnol-bounds")
                .with("z", fmt_f64(*z))
                .with("q", q)
                .with("L", l.iter().map(u32::to_string).collect::<Vec<_>>().join(","))
                .with("theta", theta.iter().map(|t| fmt_f64(*t)).collect::<Vec<_>>().join(","))
                .with("epsilon", fmt_f64(*epsilon))
                .spec(source, &doc)
                .render();
            body.push_str("k,actual,bound,L,q\n");
            for &l_value in l {
                let report = shnol::sigma_bounds(&field, energy, &phi, l_value, *q)?;
                for term in &report.terms {
                    let _ = writeln!(
                        body,
                        "{},{},{},{l_value},{q}",
                        term.region.index(),
                        fmt_f64(term.actual_upper),
                        fmt_f64(term.bound)
                    );
                }
            }
            Ok(Report::new(body, &source.output))
        }
        Command::JacobiFormula { support, output } => {
            let set = parse_support(support)?;
            let sigma = ensemble::jacobi_sigma(&set)?;
            let mut body = Header::new("jacobi-formula").with("support", support.replace(' ', "")).render();
            render_spectrum(&mut body, &sigma);
            Ok(Report::new(body, output))
        }
        Command::CheckStructure { source, n, seed, tail_radius } => {
            let doc = load_spec(source)?;
            let field = field_of(&doc, *n, *seed)?;
            let mut header = Header::new("check-structure").with("N", fmt_f64(*n)).with("R", fmt_f64(*tail_radius));
            if matches!(doc, SpecDocument::Ensemble(_)) {
                header = header.seed(*seed);
            }
            let mut body = header.spec(source, &doc).render();
            let _ = writeln!(body, "kind={}", kind_token(field.kind()));
            let mut failure = None;
            match operator::assemble_sparse(&field, *n) {
                Ok(_) => body.push_str("envelope=ok\n"),
                Err(e @ longrange::Error::EnvelopeViolation { .. }) => {
                    body.push_str("envelope=violated\n");
                    failure = Some(CliError::Library(e));
                }
                Err(e) => return Err(e.into()),
            }
            if failure.is_none() {
                match field.kind() {
                    OperatorKind::SelfAdjoint => {
                        let defect = operator::check_selfadjoint(&field, *n)?;
                        let _ = writeln!(body, "selfadjoint_defect={}", fmt_f64(defect));
                        if defect > 0.0 {
                            failure = Some(CliError::Structure(format!("self-adjointness fails with defect {defect:e}")));
                        }
                    }
                    OperatorKind::Normal => {
                        let report = operator::check_normality(&field, *n, *tail_radius)?;
                        let _ = writeln!(body, "normality_violation={}", fmt_f64(report.max_violation));
                        let _ = writeln!(body, "tail_slack={}", fmt_f64(report.tail_slack));
                        let _ = writeln!(body, "j_radius={}", fmt_f64(report.j_radius));
                        if !report.consistent_with_normal() {
                            failure = Some(CliError::Structure(format!(
                                "normality identity fails by {:e}, beyond the tail slack {:e}",
                                report.max_violation, report.tail_slack
                            )));
                        }
                    }
                }
            }
            let _ = writeln!(body, "status={}", if failure.is_none() { "ok" } else { "violated" });
            let mut report = Report::new(body, &source.output);
            report.failure = failure;
            Ok(report)
        }
    }
}

fn kind_token(kind: OperatorKind) -> &'static str {
    match kind {
        OperatorKind::SelfAdjoint => "self_adjoint",
        OperatorKind::Normal => "normal",
    }
}

fn point_cell(p: &longrange::LatticePoint) -> String {
    p.iter().map(i64::to_string).collect::<Vec<_>>().join(" ")
}
