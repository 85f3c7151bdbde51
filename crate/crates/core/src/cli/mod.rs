//! `hidrel` command-line front end.
//!
//! Every command writes one JSON report to stdout and exits with
//! 0 (success or positive verdict), 1 (negative verdict), 2 (bad input or an
//! invalid model) or 3 (a mathematical condition failed).

pub mod json;

use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::feedback::{self, FeedbackModel};
use crate::linalg::{self, numerical_rank, Tolerances};
use crate::lti::{log_grid, validate_ct_model, CtModel, StateSpace};
use crate::relation::{self, RelationReport, RowSelection};
use crate::sampling::{self, DesampleDiagnostics, SampledModel};
use crate::spectral::{self, default_grid};
use json::{cplx_list, mat, num, nums, obj, state_space_json};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_MATH: i32 = 3;

/// Relative mismatch allowed between `--h` and an `h` stored in a sampled file.
const H_MATCH_RTOL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "hidrel", version, about = "Hidden deterministic relations in rank-deficient stationary models")]
pub struct Cli {
    /// Relative singular-value cutoff for numerical rank
    #[arg(long, global = true)]
    pub tol_rank: Option<f64>,
    /// Relative tolerance for semidefiniteness tests
    #[arg(long, global = true)]
    pub tol_psd: Option<f64>,
    /// Poles must have real part below minus this margin
    #[arg(long, global = true)]
    pub tol_stability: Option<f64>,
    /// Bound on residuals and on identically-zero gains
    #[arg(long, global = true)]
    pub tol_residual: Option<f64>,
    /// Evaluate on a single thread
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model file against every structural assumption
    Validate { model: String },
    /// Numerical rank of the spectral density over a frequency grid
    Spectrum {
        model: String,
        /// `lo:hi:n`, n log-spaced frequencies in rad/s
        #[arg(long)]
        grid: Option<String>,
    },
    /// Deterministic relation for one row selection or all of them
    Relation {
        model: String,
        /// Rows of C used as u-channels, comma separated
        #[arg(long, value_delimiter = ',', conflicts_with = "all")]
        rows: Option<Vec<usize>>,
        /// Every admissible selection (the default)
        #[arg(long)]
        all: bool,
    },
    /// First selection with a strictly stable relation
    StableSelection { model: String },
    /// Closed loop of a feedback pair (F, H)
    Feedback {
        #[arg(long = "f")]
        f: String,
        #[arg(long = "h")]
        h: String,
    },
    /// Whether u Granger-causes y, i.e. F is not identically zero
    Granger {
        #[arg(long = "f")]
        f: String,
    },
    /// Exact discretization with period h
    Sample {
        model: String,
        #[arg(long = "h", allow_hyphen_values = true)]
        h: f64,
    },
    /// Recover a continuous-time model from a sampled one
    Desample {
        sampled: String,
        #[arg(long = "h", allow_hyphen_values = true)]
        h: f64,
    },
    /// Sample, desample and compare ranks
    HiddenRank {
        model: String,
        #[arg(long = "h", allow_hyphen_values = true)]
        h: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Spectrum { .. } => "spectrum",
            Command::Relation { .. } => "relation",
            Command::StableSelection { .. } => "stable-selection",
            Command::Feedback { .. } => "feedback",
            Command::Granger { .. } => "granger",
            Command::Sample { .. } => "sample",
            Command::Desample { .. } => "desample",
            Command::HiddenRank { .. } => "hidden-rank",
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonSquare(..)
        | Error::DimensionMismatch { .. }
        | Error::NonFinite(_)
        | Error::InvalidArgument(_)
        | Error::Parse(_)
        | Error::SchemaVersionUnsupported(_)
        | Error::NotStable(_)
        | Error::NotObservable { .. }
        | Error::NotReachable { .. }
        | Error::RankCBDeficient { .. }
        | Error::BColumnDeficient { .. }
        | Error::NonzeroFeedthrough
        | Error::InadmissibleSelection { .. }
        | Error::SelectionCapExceeded { .. }
        | Error::NonPositiveH(_)
        | Error::NotPsd(_) => EXIT_INPUT,
        _ => EXIT_MATH,
    }
}

struct Outcome {
    fields: Value,
    code: i32,
}

struct Failure {
    error: Error,
    fields: Option<Value>,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure { error, fields: None }
    }
}

type CmdResult = std::result::Result<Outcome, Failure>;

fn verdict(fields: Value, positive: bool) -> Outcome {
    Outcome {
        fields,
        code: if positive { EXIT_OK } else { EXIT_NEGATIVE },
    }
}

/// Parses `argv` (program name first), runs the command and writes the report.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    EXIT_INPUT
                }
            };
        }
    };
    let name = cli.command.name();
    let result = tolerances(&cli).map_err(Failure::from).and_then(|tol| {
        let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
        dispatch(&cli.command, &tol, exec)
    });

    let (mut report, code) = match result {
        Ok(o) => (o.fields, o.code),
        Err(f) => {
            let code = exit_code(&f.error);
            let _ = writeln!(err, "hidrel {name}: {}: {}", f.error.kind(), f.error);
            let mut fields = f.fields.unwrap_or_else(|| obj([]));
            fields["error"] = obj([("kind", f.error.kind().into()), ("message", f.error.to_string().into())]);
            (fields, code)
        }
    };
    report["command"] = name.into();
    report["exit_code"] = code.into();
    report["status"] = match code {
        EXIT_OK => "ok",
        EXIT_NEGATIVE => "negative",
        _ => "error",
    }
    .into();
    let _ = out.write_all(json::render(&report).as_bytes());
    code
}

fn tolerances(cli: &Cli) -> Result<Tolerances> {
    let d = Tolerances::default();
    Tolerances::new(
        cli.tol_rank.unwrap_or(d.rank_rtol),
        cli.tol_psd.unwrap_or(d.psd_tol),
        cli.tol_stability.unwrap_or(d.stability_margin),
        cli.tol_residual.unwrap_or(d.residual_tol),
    )
}

fn dispatch(cmd: &Command, tol: &Tolerances, exec: Exec) -> CmdResult {
    match cmd {
        Command::Validate { model } => cmd_validate(model, tol),
        Command::Spectrum { model, grid } => cmd_spectrum(model, grid.as_deref(), tol, exec),
        Command::Relation { model, rows, .. } => cmd_relation(model, rows.as_deref(), tol, exec),
        Command::StableSelection { model } => cmd_stable_selection(model, tol, exec),
        Command::Feedback { f, h } => cmd_feedback(f, h, tol, exec),
        Command::Granger { f } => cmd_granger(f, tol),
        Command::Sample { model, h } => cmd_sample(model, *h, tol),
        Command::Desample { sampled, h } => cmd_desample(sampled, *h, tol),
        Command::HiddenRank { model, h } => cmd_hidden_rank(model, *h, tol),
    }
}

pub fn load_model(path: &str, tol: &Tolerances) -> Result<CtModel> {
    let file = json::parse_model(&json::read_file(path)?)?;
    let model = validate_ct_model(&file.ss, tol)?;
    match file.labels {
        Some(l) => model.with_labels(l),
        None => Ok(model),
    }
}

fn load_system(path: &str) -> Result<StateSpace> {
    json::parse_system(&json::read_file(path)?)
}

/// `lo:hi:n` with `0 < lo <= hi` and `n >= 1`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("grid must be lo:hi:n with 0 < lo <= hi and n >= 1, got {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && lo.is_finite() && hi.is_finite() && hi >= lo && n >= 1) {
        return Err(bad());
    }
    Ok(log_grid(lo, hi, n))
}

fn model_summary(model: &CtModel) -> Result<Value> {
    Ok(obj([
        ("n", model.n().into()),
        ("m", model.m().into()),
        ("outputs", model.outputs().into()),
        ("labels", model.labels().map_or(Value::Null, |l| l.into())),
        ("poles", cplx_list(&linalg::eigenvalues(model.a())?)),
    ]))
}

fn cmd_validate(path: &str, tol: &Tolerances) -> CmdResult {
    let model = load_model(path, tol)?;
    Ok(verdict(obj([("valid", true.into()), ("model", model_summary(&model)?)]), true))
}

fn cmd_spectrum(path: &str, grid: Option<&str>, tol: &Tolerances, exec: Exec) -> CmdResult {
    let model = load_model(path, tol)?;
    let grid = match grid {
        Some(g) => parse_grid(g)?,
        None => default_grid(),
    };
    let profile = spectral::spectral_rank_profile_with(&model, &grid, tol, exec)?;
    Ok(verdict(
        obj([
            ("grid", nums(&grid)),
            ("ranks", profile.ranks.clone().into()),
            ("modal_rank", profile.mode.into()),
            ("deviating", profile.deviating.clone().into()),
            ("m", model.m().into()),
        ]),
        true,
    ))
}

fn relation_json(r: &RelationReport, model: &CtModel) -> Value {
    let mut v = obj([
        ("rows0", r.selection.rows0().to_vec().into()),
        ("rows1", r.selection.rows1().to_vec().into()),
        ("c0b_cond", num(r.c0b_cond)),
        ("gamma", mat(&r.gamma)),
        ("gamma_eigs", cplx_list(&r.gamma_eigs)),
        ("gamma_rank", r.gamma_rank.into()),
        ("projector_diagonalizable", r.projector_diagonalizable.into()),
        ("raw", state_space_json(&r.raw)),
        ("F", state_space_json(&r.f)),
        ("degree", r.degree.into()),
        ("poles", cplx_list(&r.poles)),
        ("stable", r.stable.into()),
        ("requires_feedback", r.requires_feedback().into()),
    ]);
    if let Some(labels) = model.labels() {
        let pick = |rows: &[usize]| -> Value { rows.iter().map(|&i| labels[i].clone()).collect::<Vec<_>>().into() };
        v["u_labels"] = pick(r.selection.rows0());
        v["y_labels"] = pick(r.selection.rows1());
    }
    v
}

fn cmd_relation(path: &str, rows: Option<&[usize]>, tol: &Tolerances, exec: Exec) -> CmdResult {
    let model = load_model(path, tol)?;
    let reports = match rows {
        Some(rows) => {
            let sel = RowSelection::new(rows.to_vec(), model.outputs())?;
            vec![relation::classify_selection(&model, &sel, tol)?]
        }
        None => relation::classify_all(&model, tol, exec)?,
    };
    let first_stable = reports.iter().find(|r| r.stable);
    let fields = obj([
        ("selections", reports.iter().map(|r| relation_json(r, &model)).collect::<Vec<_>>().into()),
        ("any_stable", first_stable.is_some().into()),
        ("n", model.n().into()),
        ("m", model.m().into()),
    ]);
    Ok(verdict(fields, first_stable.is_some()))
}

fn cmd_stable_selection(path: &str, tol: &Tolerances, exec: Exec) -> CmdResult {
    let model = load_model(path, tol)?;
    let reports = relation::classify_all(&model, tol, exec)?;
    let found = reports.iter().find(|r| r.stable);
    let fields = obj([
        ("found", found.is_some().into()),
        ("selection", found.map_or(Value::Null, |r| relation_json(r, &model))),
        ("admissible_selections", reports.len().into()),
        (
            "message",
            if found.is_some() {
                "stable selection found"
            } else {
                "no stable selection"
            }
            .into(),
        ),
    ]);
    Ok(verdict(fields, found.is_some()))
}

fn cmd_feedback(f_path: &str, h_path: &str, tol: &Tolerances, exec: Exec) -> CmdResult {
    let fm = FeedbackModel::new(load_system(f_path)?, load_system(h_path)?)?;
    let cl = feedback::closed_loop_t(&fm, tol)?;
    let state_matrix_stable = feedback::internal_stability(&fm, tol)?;
    let interchange = feedback::verify_interchange_identities(&fm, &cl, &default_grid(), exec);
    let ff = feedback::feedback_free(fm.h(), fm.f(), tol)?;
    let block = |ss: &StateSpace| -> Result<Value> {
        Ok(obj([
            ("realization", state_space_json(ss)),
            ("poles", cplx_list(&linalg::eigenvalues(&ss.a)?)),
            ("stable", crate::lti::is_strictly_stable(ss, tol)?.into()),
        ]))
    };
    let fields = obj([
        ("p", fm.p().into()),
        ("q", fm.q().into()),
        (
            "blocks",
            obj([
                ("P", block(&cl.p_block)?),
                ("PF", block(&cl.pf_block)?),
                ("QH", block(&cl.qh_block)?),
                ("Q", block(&cl.q_block)?),
            ]),
        ),
        ("closed_loop_poles", cplx_list(&linalg::eigenvalues(&cl.t.a)?)),
        ("internally_stable", cl.internally_stable.into()),
        ("state_matrix_stable", state_matrix_stable.into()),
        ("inverse_residual", num(cl.inverse_residual)),
        ("interchange_residual", num(interchange)),
        ("granger_u_to_y", feedback::granger_causes(fm.f(), tol).into()),
        (
            "feedback_free",
            obj([
                ("h_zero", ff.h_zero.into()),
                ("f_stable", ff.f_stable.into()),
                ("inconsistent_model", ff.inconsistent_model.into()),
            ]),
        ),
    ]);
    Ok(verdict(fields, cl.internally_stable))
}

fn cmd_granger(f_path: &str, tol: &Tolerances) -> CmdResult {
    let f = load_system(f_path)?;
    let sup = feedback::sup_norm_on_grid(&f);
    let causes = feedback::granger_causes(&f, tol);
    let fields = obj([
        ("granger_causes", causes.into()),
        ("sup_norm", num(sup)),
        ("threshold", num(tol.residual_tol)),
    ]);
    Ok(verdict(fields, causes))
}

fn cmd_sample(path: &str, h: f64, tol: &Tolerances) -> CmdResult {
    let model = load_model(path, tol)?;
    let sm = sampling::sample(&model, h, tol)?;
    let res = sampling::dual_lyapunov_check(&model, &sm)?;
    // the report doubles as a sampled-model file
    let fields = obj([
        ("v", json::SCHEMA_VERSION.into()),
        ("Ad", mat(&sm.ad)),
        ("Bd", mat(&sm.bd)),
        ("Qd", mat(&sm.qd)),
        ("Cd", mat(&sm.cd)),
        ("h", num(h)),
        ("bbt_rank", numerical_rank(&model.noise_intensity(), tol).into()),
        ("qd_rank", numerical_rank(&sm.qd, tol).into()),
        (
            "dual_lyapunov",
            obj([("continuous", num(res.continuous)), ("discrete", num(res.discrete))]),
        ),
    ]);
    Ok(verdict(fields, true))
}

fn diagnostics_json(d: &DesampleDiagnostics) -> Value {
    obj([
        ("logm_exists", d.logm_exists.into()),
        ("qd_nonsingular", d.qd_nonsingular.into()),
        ("neg_semidef_ok", d.neg_semidef_ok.into()),
        (
            "residuals",
            d.residuals.map_or(Value::Null, |r| {
                obj([("continuous", num(r.continuous)), ("discrete", num(r.discrete))])
            }),
        ),
        ("recovered_rank", d.recovered_rank.into()),
        ("max_eig_apq", d.max_eig_apq.map_or(Value::Null, num)),
        ("qd_eig_ratio", num(d.qd_eig_ratio)),
    ])
}

fn load_sampled(path: &str, h: f64, tol: &Tolerances) -> Result<SampledModel> {
    let file = json::parse_sampled(&json::read_file(path)?)?;
    if let Some(hf) = file.h {
        if (hf - h).abs() > H_MATCH_RTOL * h.abs().max(hf.abs()) {
            return Err(Error::InvalidArgument(format!("--h {h} disagrees with h = {hf} stored in {path}")));
        }
    }
    match (file.qd, file.bd) {
        (Some(qd), _) => SampledModel::new(file.ad, qd, file.cd, h, tol),
        (None, Some(bd)) => SampledModel::from_bd(file.ad, bd, file.cd, h, tol),
        (None, None) => Err(Error::Parse("one of \"Qd\" or \"Bd\" is required".into())),
    }
}

fn cmd_desample(path: &str, h: f64, tol: &Tolerances) -> CmdResult {
    let sm = load_sampled(path, h, tol)?;
    let d = sampling::desample_diagnose(&sm, tol)?;
    let diag = diagnostics_json(&d.diagnostics);
    if let Some(e) = d.diagnostics.failure() {
        return Err(Failure {
            error: e,
            fields: Some(obj([("diagnostics", diag), ("model", Value::Null)])),
        });
    }
    let (model, _) = sampling::desample(&sm, tol)?;
    let model_json = obj([
        ("v", json::SCHEMA_VERSION.into()),
        ("A", mat(model.a())),
        ("B", mat(model.b())),
        ("C", mat(model.c())),
    ]);
    Ok(verdict(obj([("diagnostics", diag), ("model", model_json), ("h", num(h))]), true))
}

fn cmd_hidden_rank(path: &str, h: f64, tol: &Tolerances) -> CmdResult {
    let model = load_model(path, tol)?;
    let r = sampling::hidden_rank_report(&model, h, tol)?;
    let fields = obj([
        ("n", r.n.into()),
        ("m", r.m.into()),
        ("qd_rank", r.qd_rank.into()),
        ("recovered_rank", r.recovered_rank.into()),
        ("a_error", num(r.a_error)),
        ("bbt_error", num(r.bbt_error)),
        ("restored", r.restored().into()),
        ("h", num(h)),
        ("diagnostics", diagnostics_json(&r.diagnostics)),
    ]);
    Ok(verdict(fields, r.restored()))
}
