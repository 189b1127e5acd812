//! Experiment execution: builds the objects a config describes, computes
//! result rows (independent rows in parallel, merged in input order), and
//! writes one CSV with a '#'-comment provenance header.
//!
//! Row failures that have a per-row meaning (ladder exhaustion, a window
//! past the size cap, a non-finite value) become reason codes in the `flag`
//! column and turn the run into exit code 2; the rest of the table is still
//! written. Failures that poison every row (an inadmissible factorization,
//! a refused compatibility guard) abort with an error instead.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fs::File;
use std::hash::Hasher;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use fnv::FnvHasher;
use num_complex::Complex64;
use rayon::prelude::*;

use apdet_core::apop::APOperator;
use apdet_core::fractal::FractalSeq;
use apdet_core::group::{compatibility_audit, FreqGroup};
use apdet_core::limits::{
    flow_row_with_cap, paired_windows, theta1, theta2, CompatGuard, ExpFactorization,
    LadderResult, LimitsError, Normalization, RatioRow, RowFlag, ThetaOptions,
};
use apdet_core::linalg::{lu_logdet, materialize_with_cap, LinalgError};
use apdet_core::models::{
    block_to_apop, build_mathieu, factorize_shifted_mathieu, symbol_log_growth, MatrixSymbol,
    DEFAULT_CIRCLE_SAMPLES,
};

use crate::config::{cx, ExperimentConfig, Kind, NormSpec, WindowPair};
use crate::CliError;

/// Box size for the compatibility audit that gates theta ladders. Small
/// enough to be instant, large enough to expose rational collisions.
const GUARD_AUDIT_CAP: i64 = 10_000;

const DEFAULT_AUDIT_CAP: i64 = 100_000;

pub struct RunSettings {
    pub config_path: PathBuf,
    pub config_bytes: Vec<u8>,
    pub out_override: Option<PathBuf>,
    pub size_cap: usize,
    pub force: bool,
}

pub struct RunSummary {
    pub out_path: PathBuf,
    pub rows: usize,
    /// Rows whose flag is an error code; any such row makes the run exit 2.
    pub failed_rows: usize,
}

/// One finished CSV: provenance comments, a header record, string rows.
struct Table {
    comments: Vec<String>,
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
    failed_rows: usize,
}

const DET_HEADER: &[&str] = &[
    "n1",
    "n2",
    "gap",
    "logdet_re",
    "logdet_im",
    "ratio_re",
    "ratio_im",
    "theta_prod_re",
    "theta_prod_im",
    "residual_abs",
    "flag",
];

pub fn run(config: &ExperimentConfig, settings: &RunSettings) -> Result<RunSummary, CliError> {
    let mut table = match config.kind {
        Kind::Trace => run_trace(config)?,
        Kind::Ratio => run_ratio(config, settings)?,
        Kind::Uniform => run_uniform(config, settings)?,
        Kind::Theta => run_theta(config, settings)?,
        Kind::SzegoBlock => run_szego_block(config, settings)?,
        Kind::Mathieu => run_mathieu(config, settings)?,
        Kind::AuditWeight => run_audit_weight(config)?,
    };

    let mut comments = provenance_comments(config, settings);
    comments.append(&mut table.comments);
    table.comments = comments;

    let out_path = settings
        .out_override
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", config.kind)));
    write_csv(&out_path, &table)?;

    Ok(RunSummary {
        out_path,
        rows: table.rows.len(),
        failed_rows: table.failed_rows,
    })
}

fn provenance_comments(config: &ExperimentConfig, settings: &RunSettings) -> Vec<String> {
    let mut hasher = FnvHasher::default();
    hasher.write(&settings.config_bytes);
    let mut out = vec![
        format!(
            "apdet {} (core {})",
            env!("CARGO_PKG_VERSION"),
            apdet_core::VERSION
        ),
        format!("kind: {}", config.kind),
        format!(
            "config: {} fnv1a64={:016x}",
            settings.config_path.display(),
            hasher.finish()
        ),
    ];
    let t = &config.tolerances;
    out.push(format!(
        "tolerances: series={} ladder={} ladder_start={} ladder_cap={}",
        t.series, t.ladder, t.ladder_start, t.ladder_cap
    ));
    out.push(format!("size_cap: {}", settings.size_cap));
    if !config.factors.is_empty() || config.kind == Kind::AuditWeight {
        let (a1, a2) = config.band_exponents();
        out.push(format!(
            "weight: power({}) band_exponents={},{}",
            config.weight_power, a1, a2
        ));
    }
    out
}

fn fractal_comment(role: &str, spec_desc: &str, seq: &FractalSeq) -> String {
    format!(
        "fractal {role}: {spec_desc} certificate_max={}",
        seq.certificate_max()
    )
}

fn factorization_comment(f: &ExpFactorization) -> String {
    let g = f.growth();
    format!(
        "factorization: factors={} defect={} budget_used={} growth={}{:+}i",
        f.factors().len(),
        f.defect(),
        f.budget_used(),
        g.re,
        g.im
    )
}

/// Shortest-roundtrip decimal form, '.' decimal point.
fn fmt_f(v: f64) -> String {
    format!("{v}")
}

fn write_csv(path: &Path, table: &Table) -> Result<(), CliError> {
    let mut file = File::create(path)?;
    for line in &table.comments {
        writeln!(file, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    w.write_record(table.header)
        .and_then(|_| table.rows.iter().try_for_each(|r| w.write_record(r)))
        .map_err(|e| CliError::Numerical(format!("csv write: {e}")))?;
    w.flush()?;
    Ok(())
}

fn row_has_non_finite(values: &[f64]) -> bool {
    values.iter().any(|v| !v.is_finite())
}

fn blank_cells(row: &mut [String]) {
    for cell in row {
        cell.clear();
    }
}

fn numerical<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

// ---------------------------------------------------------------------------
// trace

fn run_trace(config: &ExperimentConfig) -> Result<Table, CliError> {
    let group = config.build_group()?;
    let seq = config.build_sequence(&group)?;
    let pair = config
        .fractal
        .as_ref()
        .expect("validation requires a fractal pair");
    let lower = pair.lower.build(&group)?;
    let upper = pair.upper.build(&group)?;

    let mean = seq.mean();
    let f_lower = seq.boundary_functional(lower.tau()).map_err(numerical)?;
    let f_upper = seq.boundary_functional(upper.tau()).map_err(numerical)?;

    let mut rows = Vec::new();
    let mut failed = 0usize;
    for (n, (&h1, &h2)) in lower.values().iter().zip(upper.values()).enumerate() {
        let sum = seq.window_sum_closed(h1, h2).map_err(numerical)?;
        let predicted = mean * (h2 - h1) as f64 + f_lower - f_upper;
        let residual = (sum - predicted).norm();
        let mut row = vec![
            n.to_string(),
            h1.to_string(),
            h2.to_string(),
            fmt_f(sum.re),
            fmt_f(sum.im),
            fmt_f(predicted.re),
            fmt_f(predicted.im),
            fmt_f(residual),
        ];
        if row_has_non_finite(&[sum.re, sum.im, predicted.re, predicted.im, residual]) {
            blank_cells(&mut row[3..]);
            failed += 1;
        }
        rows.push(row);
    }

    Ok(Table {
        comments: vec![
            fractal_comment("lower", &pair.lower.describe(), &lower),
            fractal_comment("upper", &pair.upper.describe(), &upper),
        ],
        header: &[
            "n",
            "h1",
            "h2",
            "sum_re",
            "sum_im",
            "predicted_re",
            "predicted_im",
            "residual_abs",
        ],
        rows,
        failed_rows: failed,
    })
}

// ---------------------------------------------------------------------------
// shared determinant-row machinery

/// Expected theta product for a row, or the reason it is unavailable.
#[derive(Clone, Copy)]
enum Expect {
    Product(Complex64),
    /// No product exists by design (symbol-only runs).
    None,
    Failed(&'static str),
}

struct DetRow {
    h1: i64,
    h2: i64,
    row: Result<RatioRow, LimitsError>,
    expect: Expect,
}

fn det_row_to_csv(d: DetRow) -> (Vec<String>, bool) {
    let DetRow {
        h1,
        h2,
        row,
        expect,
    } = d;
    let mut cells = vec![h1.to_string(), h2.to_string(), (h2 - h1).to_string()];
    let r = match row {
        Ok(r) => r,
        Err(e) => {
            cells.extend(std::iter::repeat_with(String::new).take(7));
            cells.push(error_code(&e).to_string());
            return (cells, true);
        }
    };

    let ratio = r.ratio.unwrap_or_default();
    let product = match expect {
        Expect::Product(p) => Some(p),
        _ => None,
    };
    let residual = product.map(|p| (ratio - p).norm());
    let mut flag = match expect {
        Expect::Failed(code) => code,
        _ if r.flag == RowFlag::Singular => "singular",
        Expect::None => "symbol-only",
        Expect::Product(_) => "",
    };

    let mut numeric = vec![ratio.re, ratio.im];
    if let Some(ld) = r.log_det {
        numeric.extend([ld.re, ld.im]);
    }
    if let Some(p) = product {
        numeric.extend([p.re, p.im]);
    }
    numeric.extend(residual);
    let poisoned = row_has_non_finite(&numeric);
    if poisoned {
        flag = "non-finite";
    }

    let (ld_re, ld_im) = match r.log_det {
        Some(ld) => (fmt_f(ld.re), fmt_f(ld.im)),
        None => (String::new(), String::new()),
    };
    let (tp_re, tp_im) = match product {
        Some(p) => (fmt_f(p.re), fmt_f(p.im)),
        None => (String::new(), String::new()),
    };
    cells.extend([
        ld_re,
        ld_im,
        fmt_f(ratio.re),
        fmt_f(ratio.im),
        tp_re,
        tp_im,
        residual.map(fmt_f).unwrap_or_default(),
        flag.to_string(),
    ]);
    if poisoned {
        blank_cells(&mut cells[3..10]);
    }
    let failed = poisoned || matches!(expect, Expect::Failed(_));
    (cells, failed)
}

fn error_code(e: &LimitsError) -> &'static str {
    match e {
        LimitsError::Linalg(LinalgError::SizeCap { .. }) => "size-cap",
        LimitsError::LadderExhausted { .. } => "ladder-exhausted",
        LimitsError::WindowOrder { .. } => "window-order",
        _ => "error",
    }
}

fn det_table(det_rows: Vec<DetRow>, comments: Vec<String>) -> Table {
    let mut rows = Vec::with_capacity(det_rows.len());
    let mut failed = 0usize;
    for d in det_rows {
        let (cells, bad) = det_row_to_csv(d);
        rows.push(cells);
        failed += bad as usize;
    }
    Table {
        comments,
        header: DET_HEADER,
        rows,
        failed_rows: failed,
    }
}

fn theta_options(config: &ExperimentConfig, guard: CompatGuard) -> ThetaOptions {
    let t = &config.tolerances;
    ThetaOptions {
        tol: t.ladder,
        start: t.ladder_start,
        cap: t.ladder_cap,
        compat: guard,
    }
}

/// Audits the group/weight pair once and returns the guard every theta
/// ladder of this run will carry, plus the provenance line recording it.
/// Purely rational groups have nothing to audit and stay unchecked.
fn compat_guard(
    f: &ExpFactorization,
    force: bool,
) -> Result<(CompatGuard, String), CliError> {
    let group = f.group().as_ref();
    if group.generator_count() == 0 {
        return Ok((
            CompatGuard::Unchecked,
            "compat: rational group, nothing to audit".to_string(),
        ));
    }
    let weight = f.product().weight();
    let audit = compatibility_audit(group, weight, GUARD_AUDIT_CAP).map_err(numerical)?;
    let line = format!(
        "compat: c_est={} q_cap={GUARD_AUDIT_CAP}{}",
        fmt_f(audit.c_est),
        if force { " (forced)" } else { "" }
    );
    Ok((
        CompatGuard::Audited {
            c_est: audit.c_est,
            force,
        },
        line,
    ))
}

/// Evaluates Θ₁ at every left-edge shift character and Θ₂ at every
/// right-edge one, deduplicated by shift. A ladder that runs out of rungs
/// marks the shifts that needed it; a refused compatibility guard aborts.
struct ThetaCache {
    left: HashMap<i64, Expect>,
    right: HashMap<i64, Expect>,
}

impl ThetaCache {
    fn build(
        f: &ExpFactorization,
        opts: &ThetaOptions,
        windows: &[(i64, i64)],
    ) -> Result<Self, CliError> {
        let group = f.group().clone();
        let mut cache = ThetaCache {
            left: HashMap::new(),
            right: HashMap::new(),
        };
        for &(h1, h2) in windows {
            if let Entry::Vacant(slot) = cache.left.entry(h1) {
                slot.insert(theta_value(theta1(f, &group.char_of_shift(h1), opts))?);
            }
            if let Entry::Vacant(slot) = cache.right.entry(h2) {
                slot.insert(theta_value(theta2(f, &group.char_of_shift(h2), opts))?);
            }
        }
        Ok(cache)
    }

    fn product(&self, h1: i64, h2: i64) -> Expect {
        combine(self.left[&h1], self.right[&h2])
    }
}

fn combine(t1: Expect, t2: Expect) -> Expect {
    match (t1, t2) {
        (Expect::Product(a), Expect::Product(b)) => Expect::Product(a * b),
        (Expect::Failed(code), _) | (_, Expect::Failed(code)) => Expect::Failed(code),
        _ => Expect::None,
    }
}

/// Folds one theta ladder outcome into an expectation cell: exhaustion is
/// a per-row reason code, anything else is fatal to the whole run.
fn theta_value(r: Result<LadderResult, LimitsError>) -> Result<Expect, CliError> {
    match r {
        Ok(l) => Ok(Expect::Product(l.value)),
        Err(LimitsError::LadderExhausted { .. }) => Ok(Expect::Failed("ladder-exhausted")),
        Err(LimitsError::CompatibilityRefused { c_est }) => Err(CliError::Numerical(format!(
            "compatibility estimate {c_est:.3e} is zero to machine precision; \
             rerun with --force to proceed anyway"
        ))),
        Err(e) => Err(numerical(e)),
    }
}

fn norm_of(spec: NormSpec) -> Normalization {
    match spec {
        NormSpec::GrowthPower => Normalization::GrowthPower,
        NormSpec::ExpTrace => Normalization::ExpTrace,
    }
}

/// Built window-edge pair, kept so the limit characters and certificates
/// stay available for theta products and provenance comments.
type BuiltPair = Option<(FractalSeq, FractalSeq)>;

/// Windows for the flow kinds: explicit `windows` win, otherwise the
/// fractal pair is built and zipped.
fn resolve_windows(
    config: &ExperimentConfig,
    group: &Arc<FreqGroup>,
) -> Result<(Vec<(i64, i64)>, BuiltPair), CliError> {
    if !config.windows.is_empty() {
        return Ok((config.windows.clone(), None));
    }
    let pair = config
        .fractal
        .as_ref()
        .expect("validation requires windows or a fractal pair");
    let lower = pair.lower.build(group)?;
    let upper = pair.upper.build(group)?;
    let windows = paired_windows(&lower, &upper).map_err(numerical)?;
    Ok((windows, Some((lower, upper))))
}

fn pair_comments(pair: &WindowPair, lower: &FractalSeq, upper: &FractalSeq) -> Vec<String> {
    vec![
        fractal_comment("lower", &pair.lower.describe(), lower),
        fractal_comment("upper", &pair.upper.describe(), upper),
    ]
}

/// Flow rows for an exponentially factored operator over explicit or
/// fractal windows. Fractal windows share the pair's limit characters;
/// explicit windows get exact shift characters per edge.
fn factored_flow(
    f: &ExpFactorization,
    opts: &ThetaOptions,
    norm: Normalization,
    cap: usize,
    windows: Vec<(i64, i64)>,
    fractal: Option<&(FractalSeq, FractalSeq)>,
) -> Result<Vec<DetRow>, CliError> {
    let expects: Vec<Expect> = match fractal {
        Some((lower, upper)) => {
            let t1 = theta_value(theta1(f, lower.tau(), opts))?;
            let t2 = theta_value(theta2(f, upper.tau(), opts))?;
            vec![combine(t1, t2); windows.len()]
        }
        None => {
            let cache = ThetaCache::build(f, opts, &windows)?;
            windows
                .iter()
                .map(|&(h1, h2)| cache.product(h1, h2))
                .collect()
        }
    };

    Ok(windows
        .par_iter()
        .zip(expects)
        .map(|(&(h1, h2), expect)| {
            let expected = match expect {
                Expect::Product(p) => Some(p),
                _ => None,
            };
            DetRow {
                h1,
                h2,
                row: flow_row_with_cap(f, h1, h2, norm, expected, cap),
                expect,
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// ratio and uniform

fn run_ratio(config: &ExperimentConfig, settings: &RunSettings) -> Result<Table, CliError> {
    let group = config.build_group()?;
    let factors = config.build_factors(&group)?;
    let f = ExpFactorization::new(factors, config.tolerances.series, config.budget())
        .map_err(numerical)?;
    let (windows, fractal) = resolve_windows(config, &group)?;
    let (guard, guard_line) = compat_guard(&f, settings.force)?;
    let opts = theta_options(config, guard);

    let mut comments = vec![guard_line, factorization_comment(&f)];
    if let (Some(pair), Some((lower, upper))) = (config.fractal.as_ref(), fractal.as_ref()) {
        comments.extend(pair_comments(pair, lower, upper));
    }

    let rows = factored_flow(
        &f,
        &opts,
        norm_of(config.normalization),
        settings.size_cap,
        windows,
        fractal.as_ref(),
    )?;
    Ok(det_table(rows, comments))
}

fn run_uniform(config: &ExperimentConfig, settings: &RunSettings) -> Result<Table, CliError> {
    let group = config.build_group()?;
    let factors = config.build_factors(&group)?;
    let f = ExpFactorization::new(factors, config.tolerances.series, config.budget())
        .map_err(numerical)?;
    let (guard, guard_line) = compat_guard(&f, settings.force)?;
    let opts = theta_options(config, guard);

    let windows = sweep_windows(config);
    let comments = vec![guard_line, factorization_comment(&f)];
    let rows = factored_flow(
        &f,
        &opts,
        norm_of(config.normalization),
        settings.size_cap,
        windows,
        None,
    )?;
    Ok(det_table(rows, comments))
}

/// Gap-by-offset grid, gaps outermost, plus any explicit windows first.
fn sweep_windows(config: &ExperimentConfig) -> Vec<(i64, i64)> {
    let offsets: &[i64] = if config.offsets.is_empty() {
        &[0]
    } else {
        &config.offsets
    };
    let mut windows = config.windows.clone();
    for &gap in &config.gaps {
        for &n1 in offsets {
            windows.push((n1, n1 + gap));
        }
    }
    windows
}

// ---------------------------------------------------------------------------
// theta

fn run_theta(config: &ExperimentConfig, settings: &RunSettings) -> Result<Table, CliError> {
    let group = config.build_group()?;
    let factors = config.build_factors(&group)?;
    let f = ExpFactorization::new(factors, config.tolerances.series, config.budget())
        .map_err(numerical)?;
    let (guard, guard_line) = compat_guard(&f, settings.force)?;
    let opts = theta_options(config, guard);

    let mut rows = Vec::new();
    let mut failed = 0usize;
    for spec in &config.characters {
        let tau = spec.build(&group)?;
        let desc = spec.describe();
        for (name, result) in [
            ("theta1", theta1(&f, &tau, &opts)),
            ("theta2", theta2(&f, &tau, &opts)),
        ] {
            let (row, bad) = theta_row(name, &desc, result)?;
            rows.push(row);
            failed += bad as usize;
        }
    }

    Ok(Table {
        comments: vec![guard_line, factorization_comment(&f)],
        header: &["tau_desc", "M", "value_re", "value_im", "delta", "converged"],
        rows,
        failed_rows: failed,
    })
}

/// Final rung of one ladder as a CSV row; exhaustion keeps the last rung's
/// numbers with `converged=false` instead of erasing them.
fn theta_row(
    name: &str,
    desc: &str,
    result: Result<LadderResult, LimitsError>,
) -> Result<(Vec<String>, bool), CliError> {
    let (value, sizes, deltas, converged) = match result {
        Ok(l) => (l.value, l.truncation_sizes, l.deltas, l.converged),
        Err(LimitsError::LadderExhausted {
            sizes,
            deltas,
            last,
        }) => (last, sizes, deltas, false),
        Err(LimitsError::CompatibilityRefused { c_est }) => {
            return Err(CliError::Numerical(format!(
                "compatibility estimate {c_est:.3e} is zero to machine precision; \
                 rerun with --force to proceed anyway"
            )))
        }
        Err(e) => return Err(numerical(e)),
    };
    let m = sizes.last().copied().unwrap_or(0);
    let delta = deltas.last().copied();
    let row = vec![
        format!("{name} {desc}"),
        m.to_string(),
        fmt_f(value.re),
        fmt_f(value.im),
        delta.map(fmt_f).unwrap_or_default(),
        converged.to_string(),
    ];
    Ok((row, !converged))
}

// ---------------------------------------------------------------------------
// szego-block

fn run_szego_block(config: &ExperimentConfig, settings: &RunSettings) -> Result<Table, CliError> {
    let symbol = config
        .symbol
        .as_ref()
        .expect("validation requires a symbol")
        .build()?;
    let op = block_to_apop(&symbol).map_err(numerical)?;
    let windows = sweep_windows(config);

    if config.factors.is_empty() {
        return symbol_only_flow(config, settings, &symbol, &op, windows);
    }

    // Exponential form: the factor terms are exponents over the embedding
    // group, and the sections come from the factored product, which the
    // supplied symbol must reproduce.
    let group = op.group().clone();
    let factors = config.build_factors(&group)?;
    let f = ExpFactorization::new(factors, config.tolerances.series, config.budget())
        .map_err(numerical)?;
    let drift = {
        // The embedded symbol carries its own default weight; rebuild it in
        // the factors' algebra so the difference is well defined.
        let terms = op.terms().map(|(&(k, ref g), &c)| (k, g.clone(), c));
        let rebuilt = APOperator::from_terms(
            group.clone(),
            config.weight()?,
            config.band_exponents(),
            terms,
        )
        .map_err(numerical)?;
        f.product().minus(&rebuilt).map_err(numerical)?.norm()
    };
    let bound = 1e-6 * (1.0 + op.norm());
    if drift > bound {
        return Err(CliError::Config(format!(
            "factor product differs from the embedded symbol by {drift:.3e} \
             (allowed {bound:.3e}); factors must exponentiate to the symbol"
        )));
    }

    let (guard, guard_line) = compat_guard(&f, settings.force)?;
    let opts = theta_options(config, guard);
    let comments = vec![
        format!("symbol: block_size={}", symbol.block_size()),
        guard_line,
        factorization_comment(&f),
    ];
    let rows = factored_flow(
        &f,
        &opts,
        norm_of(config.normalization),
        settings.size_cap,
        windows,
        None,
    )?;
    Ok(det_table(rows, comments))
}

/// Section/growth ratios straight from the block symbol, no theta columns:
/// `ratio = det(section)/G^gap` with `G` from the circle average of
/// `log det a(t)`.
fn symbol_only_flow(
    config: &ExperimentConfig,
    settings: &RunSettings,
    symbol: &MatrixSymbol,
    op: &APOperator,
    windows: Vec<(i64, i64)>,
) -> Result<Table, CliError> {
    let log_growth = symbol_log_growth(symbol, DEFAULT_CIRCLE_SAMPLES).map_err(numerical)?;
    let norm = norm_of(config.normalization);
    let cap = settings.size_cap;

    let rows: Vec<DetRow> = windows
        .par_iter()
        .map(|&(h1, h2)| DetRow {
            h1,
            h2,
            row: symbol_row(op, h1, h2, log_growth, norm, cap),
            expect: Expect::None,
        })
        .collect();

    let g = log_growth.exp();
    let comments = vec![
        format!("symbol: block_size={}", symbol.block_size()),
        format!(
            "growth: circle average of log det, G={}{:+}i",
            fmt_f(g.re),
            g.im
        ),
    ];
    Ok(det_table(rows, comments))
}

fn symbol_row(
    op: &APOperator,
    h1: i64,
    h2: i64,
    log_growth: Complex64,
    norm: Normalization,
    cap: usize,
) -> Result<RatioRow, LimitsError> {
    if let Normalization::ExpTrace = norm {
        // The circle-average growth is the only normalization a bare
        // symbol supports; exp-trace needs a factorization's diagonal sum.
        return Err(LimitsError::EmptyFactorization);
    }
    let section = materialize_with_cap(op, h1, h2, cap)?;
    let log_norm = log_growth * (h2 - h1) as f64;
    let (log_det, ratio, flag) = match lu_logdet(&section) {
        Some(ld) => (Some(ld), (ld - log_norm).exp(), RowFlag::Ok),
        None => (None, Complex64::new(0.0, 0.0), RowFlag::Singular),
    };
    Ok(RatioRow {
        h1,
        h2,
        gap: h2 - h1,
        log_det,
        log_norm,
        ratio: Some(ratio),
        residual: None,
        flag,
    })
}

// ---------------------------------------------------------------------------
// mathieu

fn run_mathieu(config: &ExperimentConfig, settings: &RunSettings) -> Result<Table, CliError> {
    let m = config
        .mathieu
        .as_ref()
        .expect("validation requires a mathieu section");
    let mop = build_mathieu(m.beta, m.xi, m.delta).map_err(numerical)?;
    let f = factorize_shifted_mathieu(&mop, cx(m.lambda), config.tolerances.series, config.budget())
        .map_err(numerical)?;
    let group = f.group().clone();
    let (windows, fractal) = resolve_windows(config, &group)?;
    let (guard, guard_line) = compat_guard(&f, settings.force)?;
    let opts = theta_options(config, guard);

    let mut comments = vec![
        format!(
            "mathieu: beta={} xi={} delta={} lambda={}{:+}i",
            m.beta, m.xi, m.delta, m.lambda[0], m.lambda[1]
        ),
        guard_line,
        factorization_comment(&f),
    ];
    if let (Some(pair), Some((lower, upper))) = (config.fractal.as_ref(), fractal.as_ref()) {
        comments.extend(pair_comments(pair, lower, upper));
    }

    let rows = factored_flow(
        &f,
        &opts,
        norm_of(config.normalization),
        settings.size_cap,
        windows,
        fractal.as_ref(),
    )?;
    Ok(det_table(rows, comments))
}

// ---------------------------------------------------------------------------
// audit-weight

fn run_audit_weight(config: &ExperimentConfig) -> Result<Table, CliError> {
    let group = config.build_group()?;
    let weight = config.weight()?;
    let q = config.q_cap.unwrap_or(DEFAULT_AUDIT_CAP);
    let audit = compatibility_audit(&group, &weight, q)
        .map_err(|e| CliError::Config(format!("weight audit: {e}")))?;

    let alpha: Vec<String> = audit.argmin.alpha().iter().map(|a| a.to_string()).collect();
    let row = vec![
        q.to_string(),
        fmt_f(audit.c_est),
        alpha.join(";"),
        audit.argmin.rho().to_string(),
    ];
    Ok(Table {
        comments: Vec::new(),
        header: &["Q", "C_est", "argmin_alpha", "argmin_rho"],
        rows: vec![row],
        failed_rows: 0,
    })
}
