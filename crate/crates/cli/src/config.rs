//! Experiment configuration: JSON schema, defaults, and the validation
//! pass that turns a parsed config into findings before any numerics run.

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Deserialize;

use apdet_core::apop::{APOperator, ErrorBudget, DEFAULT_BAND_EXPONENTS};
use apdet_core::apseq::APSeq;
use apdet_core::fractal::{
    arithmetic_fractal, constant_fractal, extract_fractal, fractal_from_cf_skipping, FractalSeq,
};
use apdet_core::group::{Character, FreqGroup, WeightSpec};
use apdet_core::linalg::DenseMatrix;
use apdet_core::models::MatrixSymbol;

use crate::CliError;

/// One experiment kind per CSV layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Trace,
    Ratio,
    Uniform,
    Theta,
    SzegoBlock,
    Mathieu,
    AuditWeight,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Trace => "trace",
            Kind::Ratio => "ratio",
            Kind::Uniform => "uniform",
            Kind::Theta => "theta",
            Kind::SzegoBlock => "szego-block",
            Kind::Mathieu => "mathieu",
            Kind::AuditWeight => "audit-weight",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Complex number as a `[re, im]` pair in JSON.
pub type Cx = [f64; 2];

pub fn cx(v: Cx) -> Complex64 {
    Complex64::new(v[0], v[1])
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    #[serde(default)]
    pub generators: Vec<f64>,
    #[serde(default = "default_modulus")]
    pub modulus: u32,
}

fn default_modulus() -> u32 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    /// Exponential and logarithm series cutoff.
    #[serde(default = "default_series")]
    pub series: f64,
    /// Determinant ladder convergence threshold.
    #[serde(default = "default_ladder")]
    pub ladder: f64,
    #[serde(default = "default_ladder_start")]
    pub ladder_start: usize,
    #[serde(default = "default_ladder_cap")]
    pub ladder_cap: usize,
}

fn default_series() -> f64 {
    1e-10
}
fn default_ladder() -> f64 {
    1e-6
}
fn default_ladder_start() -> usize {
    64
}
fn default_ladder_cap() -> usize {
    1024
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        ToleranceSpec {
            series: default_series(),
            ladder: default_ladder(),
            ladder_start: default_ladder_start(),
            ladder_cap: default_ladder_cap(),
        }
    }
}

/// One band-operator term: coefficient of `e_{(alpha, rho)} U_offset`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub offset: i64,
    #[serde(default)]
    pub alpha: Vec<i64>,
    #[serde(default)]
    pub rho: u32,
    pub coeff: Cx,
}

/// One diagonal-sequence coefficient.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffSpec {
    #[serde(default)]
    pub alpha: Vec<i64>,
    #[serde(default)]
    pub rho: u32,
    pub coeff: Cx,
}

/// Window-edge sequence construction.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "kind")]
pub enum FractalSpec {
    /// h(j) = k0.
    Constant { k0: i64, len: usize },
    /// Continued-fraction denominators of the irrational generator,
    /// congruent to `residue` mod N, after discarding `skip` of them.
    Cf {
        #[serde(default)]
        residue: u32,
        #[serde(default)]
        k0: i64,
        #[serde(default)]
        skip: usize,
        len: usize,
    },
    /// h(j) = k0 + jN on a purely rational group.
    Arithmetic { k0: i64, len: usize },
    /// User-supplied candidate values, thinned to an arc of chord `delta`.
    Explicit { values: Vec<i64>, delta: f64 },
}

impl FractalSpec {
    pub fn build(&self, group: &Arc<FreqGroup>) -> Result<FractalSeq, CliError> {
        let seq = match self {
            FractalSpec::Constant { k0, len } => constant_fractal(group, *k0, *len),
            FractalSpec::Cf {
                residue,
                k0,
                skip,
                len,
            } => fractal_from_cf_skipping(group, *residue, *k0, *skip, *len),
            FractalSpec::Arithmetic { k0, len } => arithmetic_fractal(group, *k0, *len),
            FractalSpec::Explicit { values, delta } => extract_fractal(group, values, *delta),
        };
        seq.map_err(|e| CliError::Config(format!("fractal spec: {e}")))
    }

    pub fn describe(&self) -> String {
        match self {
            FractalSpec::Constant { k0, len } => format!("constant k0={k0} len={len}"),
            FractalSpec::Cf {
                residue,
                k0,
                skip,
                len,
            } => format!("cf residue={residue} k0={k0} skip={skip} len={len}"),
            FractalSpec::Arithmetic { k0, len } => format!("arithmetic k0={k0} len={len}"),
            FractalSpec::Explicit { values, delta } => {
                format!("explicit n={} delta={delta}", values.len())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowPair {
    pub lower: FractalSpec,
    pub upper: FractalSpec,
}

/// Character selection: a shift character or explicit unit values.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, untagged)]
pub enum CharSpec {
    Shift { shift: i64 },
    Explicit { units: Vec<Cx>, residue: u32 },
}

impl CharSpec {
    pub fn build(&self, group: &Arc<FreqGroup>) -> Result<Character, CliError> {
        match self {
            CharSpec::Shift { shift } => Ok(group.char_of_shift(*shift)),
            CharSpec::Explicit { units, residue } => group
                .character(units.iter().map(|&u| cx(u)).collect(), *residue)
                .map_err(|e| CliError::Config(format!("character spec: {e}"))),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            CharSpec::Shift { shift } => format!("shift={shift}"),
            CharSpec::Explicit { units, residue } => {
                let us: Vec<String> = units
                    .iter()
                    .map(|u| format!("{}{:+}i", u[0], u[1]))
                    .collect();
                format!("units={} residue={residue}", us.join(";"))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub offset: i64,
    /// Row-major N×N block of `[re, im]` entries.
    pub entries: Vec<Vec<Cx>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSpec {
    pub block_size: usize,
    pub blocks: Vec<BlockSpec>,
}

impl SymbolSpec {
    pub fn build(&self) -> Result<MatrixSymbol, CliError> {
        let n = self.block_size;
        let mut blocks = Vec::new();
        for b in &self.blocks {
            if b.entries.len() != n || b.entries.iter().any(|r| r.len() != n) {
                return Err(CliError::Config(format!(
                    "symbol block at offset {} is not {n}x{n}",
                    b.offset
                )));
            }
            let mut m = DenseMatrix::zero(n);
            for (i, row) in b.entries.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    m.set(i, j, cx(v));
                }
            }
            blocks.push((b.offset, m));
        }
        MatrixSymbol::new(n, blocks).map_err(|e| CliError::Config(format!("symbol spec: {e}")))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MathieuSpec {
    pub beta: f64,
    pub xi: f64,
    #[serde(default)]
    pub delta: f64,
    pub lambda: Cx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NormSpec {
    #[default]
    GrowthPower,
    ExpTrace,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub group: Option<GroupSpec>,
    #[serde(default = "default_power")]
    pub weight_power: f64,
    #[serde(default = "default_exponents")]
    pub band_exponents: [f64; 2],
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    /// Diagonal sequence coefficients (trace).
    #[serde(default)]
    pub sequence: Vec<CoeffSpec>,
    /// Exponent operators A_1 … A_r (ratio, uniform, theta, szego-block).
    #[serde(default)]
    pub factors: Vec<Vec<TermSpec>>,
    /// Window-edge pair (trace, ratio, mathieu).
    #[serde(default)]
    pub fractal: Option<WindowPair>,
    /// Explicit windows [h1, h2) (ratio, szego-block, mathieu).
    #[serde(default)]
    pub windows: Vec<(i64, i64)>,
    /// Sweep gaps (uniform, szego-block).
    #[serde(default)]
    pub gaps: Vec<i64>,
    /// Sweep left edges (uniform, szego-block).
    #[serde(default)]
    pub offsets: Vec<i64>,
    /// Characters to evaluate (theta).
    #[serde(default)]
    pub characters: Vec<CharSpec>,
    /// Matrix symbol (szego-block).
    #[serde(default)]
    pub symbol: Option<SymbolSpec>,
    /// Almost Mathieu parameters (mathieu).
    #[serde(default)]
    pub mathieu: Option<MathieuSpec>,
    /// Search box for the weight audit (audit-weight).
    #[serde(default)]
    pub q_cap: Option<i64>,
    #[serde(default)]
    pub normalization: NormSpec,
    /// Output path; overridden by --out, defaults to `<kind>.csv`.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_power() -> f64 {
    1.0
}

fn default_exponents() -> [f64; 2] {
    [DEFAULT_BAND_EXPONENTS.0, DEFAULT_BAND_EXPONENTS.1]
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config JSON: {e}")))
    }

    pub fn weight(&self) -> Result<WeightSpec, CliError> {
        WeightSpec::power(self.weight_power)
            .map_err(|e| CliError::Config(format!("weight: {e}")))
    }

    pub fn build_group(&self) -> Result<Arc<FreqGroup>, CliError> {
        match &self.group {
            Some(g) => FreqGroup::new(g.generators.clone(), g.modulus)
                .map(Arc::new)
                .map_err(|e| CliError::Config(format!("group: {e}"))),
            None => Err(CliError::Config(format!(
                "kind {} needs a group section",
                self.kind
            ))),
        }
    }

    pub fn band_exponents(&self) -> (f64, f64) {
        (self.band_exponents[0], self.band_exponents[1])
    }

    pub fn build_sequence(&self, group: &Arc<FreqGroup>) -> Result<APSeq, CliError> {
        let coeffs: Result<Vec<_>, CliError> = self
            .sequence
            .iter()
            .map(|c| {
                let g = group
                    .element(c.alpha.clone(), c.rho)
                    .map_err(|e| CliError::Config(format!("sequence coefficient: {e}")))?;
                Ok((g, cx(c.coeff)))
            })
            .collect();
        APSeq::from_coeffs(group.clone(), coeffs?)
            .map_err(|e| CliError::Config(format!("sequence: {e}")))
    }

    pub fn build_factors(&self, group: &Arc<FreqGroup>) -> Result<Vec<APOperator>, CliError> {
        let weight = self.weight()?;
        self.factors
            .iter()
            .map(|terms| {
                let built: Result<Vec<_>, CliError> = terms
                    .iter()
                    .map(|t| {
                        let g = group
                            .element(t.alpha.clone(), t.rho)
                            .map_err(|e| CliError::Config(format!("factor term: {e}")))?;
                        Ok((t.offset, g, cx(t.coeff)))
                    })
                    .collect();
                APOperator::from_terms(
                    group.clone(),
                    weight.clone(),
                    self.band_exponents(),
                    built?,
                )
                .map_err(|e| CliError::Config(format!("factor: {e}")))
            })
            .collect()
    }

    pub fn budget(&self) -> ErrorBudget {
        ErrorBudget::default()
    }
}

/// Severity of a validation finding; errors block the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

fn warn(findings: &mut Vec<Finding>, message: String) {
    findings.push(Finding {
        severity: Severity::Warning,
        message,
    });
}

fn fail(findings: &mut Vec<Finding>, message: String) {
    findings.push(Finding {
        severity: Severity::Error,
        message,
    });
}

/// Schema-level and cross-field checks; never runs a determinant.
///
/// `size_cap` is the current window cap (after any environment override),
/// so requested windows that could never materialize fail here rather
/// than midway through a run.
pub fn validate(config: &ExperimentConfig, size_cap: usize) -> Vec<Finding> {
    let mut findings = Vec::new();
    let t = &config.tolerances;
    for (name, v) in [("series", t.series), ("ladder", t.ladder)] {
        if v <= 0.0 || !v.is_finite() {
            fail(&mut findings, format!("{name} tolerance must be positive"));
        }
    }
    if t.ladder_start < 2 || t.ladder_cap < t.ladder_start {
        fail(
            &mut findings,
            format!(
                "ladder sizes {}..{} must satisfy 2 <= start <= cap",
                t.ladder_start, t.ladder_cap
            ),
        );
    }
    if WeightSpec::power(config.weight_power).is_err() {
        fail(
            &mut findings,
            format!("weight power {} is not admissible", config.weight_power),
        );
    }
    let [a1, a2] = config.band_exponents;
    if !(a1 >= 0.0 && a2 >= 0.0 && a1.is_finite() && a2.is_finite()) {
        fail(
            &mut findings,
            format!("band exponents ({a1}, {a2}) must be finite and non-negative"),
        );
    } else if (a1 + a2 - 1.0).abs() > 1e-12 {
        warn(
            &mut findings,
            format!(
                "band exponents sum to {}, not 1; splitting guarantees degrade",
                a1 + a2
            ),
        );
    }

    let group = match &config.group {
        Some(g) => match FreqGroup::new(g.generators.clone(), g.modulus) {
            Ok(g) => Some(Arc::new(g)),
            Err(e) => {
                fail(&mut findings, format!("group: {e}"));
                None
            }
        },
        None => None,
    };
    let needs_group = !matches!(config.kind, Kind::SzegoBlock | Kind::Mathieu);
    if needs_group && group.is_none() && config.group.is_none() {
        fail(
            &mut findings,
            format!("kind {} needs a group section", config.kind),
        );
    }

    let window_fits = |h1: i64, h2: i64, findings: &mut Vec<Finding>| {
        if h2 <= h1 {
            fail(findings, format!("window [{h1}, {h2}) is empty"));
        } else if (h2 - h1) as usize > size_cap {
            fail(
                findings,
                format!(
                    "window [{h1}, {h2}) of size {} exceeds the size cap {size_cap}",
                    h2 - h1
                ),
            );
        }
    };
    for &(h1, h2) in &config.windows {
        window_fits(h1, h2, &mut findings);
    }
    for &gap in &config.gaps {
        if gap <= 0 {
            fail(&mut findings, format!("gap {gap} must be positive"));
        } else if gap as usize > size_cap {
            fail(
                &mut findings,
                format!("gap {gap} exceeds the size cap {size_cap}"),
            );
        }
    }

    match config.kind {
        Kind::Trace => {
            if config.sequence.is_empty() {
                fail(&mut findings, "trace needs a sequence section".into());
            }
            if config.fractal.is_none() {
                fail(&mut findings, "trace needs a fractal window pair".into());
            }
        }
        Kind::Ratio => {
            if config.factors.is_empty() {
                fail(&mut findings, "ratio needs a factors section".into());
            }
            if config.windows.is_empty() && config.fractal.is_none() {
                fail(
                    &mut findings,
                    "ratio needs windows or a fractal window pair".into(),
                );
            }
        }
        Kind::Uniform => {
            if config.factors.is_empty() {
                fail(&mut findings, "uniform needs a factors section".into());
            }
            if config.gaps.is_empty() {
                fail(&mut findings, "uniform needs at least one gap".into());
            }
        }
        Kind::Theta => {
            if config.factors.is_empty() {
                fail(&mut findings, "theta needs a factors section".into());
            }
            if config.characters.is_empty() {
                fail(&mut findings, "theta needs at least one character".into());
            }
        }
        Kind::SzegoBlock => {
            match &config.symbol {
                None => fail(&mut findings, "szego-block needs a symbol section".into()),
                Some(sym) => {
                    if sym.block_size == 0 {
                        fail(&mut findings, "symbol block size must be at least 1".into());
                    }
                    for b in &sym.blocks {
                        if b.entries.len() != sym.block_size
                            || b.entries.iter().any(|r| r.len() != sym.block_size)
                        {
                            fail(
                                &mut findings,
                                format!("symbol block at offset {} has the wrong shape", b.offset),
                            );
                        }
                    }
                    // The embedding group is Z_N with no irrational part, so
                    // factor terms may only address the rational coordinate.
                    for term in config.factors.iter().flatten() {
                        if !term.alpha.is_empty() {
                            fail(
                                &mut findings,
                                "szego-block factor terms must have empty alpha".into(),
                            );
                        }
                        if sym.block_size > 0 && term.rho as usize >= sym.block_size {
                            fail(
                                &mut findings,
                                format!(
                                    "factor term rho {} is outside Z_{}",
                                    term.rho, sym.block_size
                                ),
                            );
                        }
                    }
                }
            }
            if config.factors.is_empty() && config.normalization == NormSpec::ExpTrace {
                fail(
                    &mut findings,
                    "exp-trace normalization needs factors; a bare symbol only \
                     supports growth-power"
                        .into(),
                );
            }
            if config.windows.is_empty() && config.gaps.is_empty() {
                fail(
                    &mut findings,
                    "szego-block needs windows or gaps to sweep".into(),
                );
            }
        }
        Kind::Mathieu => match &config.mathieu {
            None => fail(&mut findings, "mathieu needs a mathieu section".into()),
            Some(m) => {
                match apdet_core::models::build_mathieu(m.beta, m.xi, m.delta) {
                    Ok(op) => {
                        let norm = op.norm();
                        let modulus = cx(m.lambda).norm();
                        if modulus <= norm {
                            fail(
                                &mut findings,
                                format!(
                                    "shift modulus |lambda| = {modulus} does not exceed the \
                                     operator norm {norm}"
                                ),
                            );
                        }
                    }
                    Err(e) => fail(&mut findings, format!("mathieu: {e}")),
                }
                if config.windows.is_empty() && config.fractal.is_none() {
                    fail(
                        &mut findings,
                        "mathieu needs windows or a fractal window pair".into(),
                    );
                }
            }
        },
        Kind::AuditWeight => {
            if config.group.is_none() {
                fail(&mut findings, "audit-weight needs a group section".into());
            }
            if let Some(q) = config.q_cap {
                if q <= 0 {
                    fail(&mut findings, format!("q_cap {q} must be positive"));
                }
            }
        }
    }

    // Cheap compatibility probe for the kinds that will run theta ladders;
    // a collapsing infimum means the boundary series downstream is junk.
    if matches!(
        config.kind,
        Kind::Ratio | Kind::Uniform | Kind::Theta | Kind::Mathieu
    ) {
        if let Some(group) = &group {
            if let Ok(weight) = WeightSpec::power(config.weight_power) {
                if let Ok(audit) = apdet_core::group::compatibility_audit(group, &weight, 10_000) {
                    if audit.c_est < 1e-3 {
                        warn(
                            &mut findings,
                            format!(
                                "compatibility estimate {:.3e} over |q| <= 1e4 is small; \
                                 limit constants may be unreliable",
                                audit.c_est
                            ),
                        );
                    }
                }
            }
        }
    }

    findings
}
