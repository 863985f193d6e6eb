//! Closed-form operation counts of the UKF and the hybrid filter, in units
//! of one basic scalar operation, plus a wall-clock harness for the real
//! implementations.
//!
//! ```text
//! t_ukf = j + 8m + 18n + 2jn + 10mn + 8m²n + 10m² + 4m³ + 28n² + 12n³ + 4
//! t_nkf = j + 5n + 2jn + mn + m² + 13n² + 5n³
//! ```
//!
//! `j` is the cost of one evaluation of `f`.

use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{FilterKind, FilterOptions, FilterState};
use crate::gaussian::{sqrt_call_count, Vector};
use crate::models::{CountingModel, SystemModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CostModelInput {
    pub n: u64,
    pub m: u64,
    pub j: u64,
}

impl CostModelInput {
    pub fn new(n: u64, m: u64, j: u64) -> Result<Self> {
        if n == 0 || m == 0 || j == 0 {
            return Err(Error::InvalidParameter(format!(
                "n, m, j must be at least 1, got ({n}, {m}, {j})"
            )));
        }
        Ok(Self { n, m, j })
    }
}

pub fn ukf_flops(input: &CostModelInput) -> u64 {
    let CostModelInput { n, m, j } = *input;
    j + 8 * m
        + 18 * n
        + 2 * j * n
        + 10 * m * n
        + 8 * m * m * n
        + 10 * m * m
        + 4 * m * m * m
        + 28 * n * n
        + 12 * n * n * n
        + 4
}

pub fn newkf_flops(input: &CostModelInput) -> u64 {
    let CostModelInput { n, m, j } = *input;
    j + 5 * n + 2 * j * n + m * n + m * m + 13 * n * n + 5 * n * n * n
}

/// `(t_ukf − t_nkf) / t_ukf`.
pub fn reduction_ratio(input: &CostModelInput) -> f64 {
    let u = ukf_flops(input) as f64;
    (u - newkf_flops(input) as f64) / u
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub ukf_flops: u64,
    pub newkf_flops: u64,
    pub reduction: f64,
}

impl CostReport {
    pub fn evaluate(input: &CostModelInput) -> Self {
        Self {
            ukf_flops: ukf_flops(input),
            newkf_flops: newkf_flops(input),
            reduction: reduction_ratio(input),
        }
    }
}

/// Reductions quoted in prose for two worked cases; [`check_quoted`]
/// compares them with the formulas.
pub const QUOTED_REDUCTIONS: [(CostModelInput, f64); 2] = [
    (CostModelInput { n: 1, m: 1, j: 5 }, 0.65),
    (CostModelInput { n: 4, m: 1, j: 30 }, 0.61),
];

/// A quoted reduction is consistent when it is within one percentage point
/// of the formula value.
pub const QUOTE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuotedCheck {
    pub input: CostModelInput,
    pub quoted: f64,
    pub computed: f64,
    pub consistent: bool,
}

pub fn check_quoted(input: &CostModelInput, quoted: f64) -> QuotedCheck {
    let computed = reduction_ratio(input);
    QuotedCheck {
        input: *input,
        quoted,
        computed,
        consistent: (computed - quoted).abs() <= QUOTE_TOLERANCE,
    }
}

/// Human-readable line per quoted reduction, flagging inconsistent ones.
pub fn quoted_reduction_report() -> String {
    let mut out = String::new();
    for (input, quoted) in QUOTED_REDUCTIONS {
        let c = check_quoted(&input, quoted);
        let verdict = if c.consistent {
            "consistent"
        } else {
            "INCONSISTENT with the formulas"
        };
        let _ = writeln!(
            out,
            "(n={}, m={}, j={}): formulas give {:.3}, quoted {:.2} ({verdict})",
            input.n, input.m, input.j, c.computed, c.quoted
        );
    }
    out
}

/// Measurement dimension as a function of `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MRule {
    Fixed(u64),
    /// `⌈n/2⌉`.
    HalfCeil,
}

impl MRule {
    pub fn eval(self, n: u64) -> u64 {
        match self {
            MRule::Fixed(m) => m,
            MRule::HalfCeil => n.div_ceil(2),
        }
    }
}

impl FromStr for MRule {
    type Err = Error;

    /// `"3"` or `"half"` / `"ceil(n/2)"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "half" | "ceil(n/2)" | "n/2" => Ok(MRule::HalfCeil),
            _ => s
                .parse::<u64>()
                .ok()
                .filter(|m| *m >= 1)
                .map(MRule::Fixed)
                .ok_or_else(|| Error::InvalidParameter(format!("bad m rule {s:?}"))),
        }
    }
}

/// Function cost as a function of `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JRule {
    Fixed(u64),
    /// `k·n`.
    PerState(u64),
}

impl JRule {
    pub fn eval(self, n: u64) -> u64 {
        match self {
            JRule::Fixed(j) => j,
            JRule::PerState(k) => k * n,
        }
    }
}

impl FromStr for JRule {
    type Err = Error;

    /// `"5"` or `"10n"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidParameter(format!("bad j rule {s:?}"));
        if let Some(k) = s.strip_suffix('n') {
            let k = k.trim_end_matches('*');
            let k = if k.is_empty() {
                1
            } else {
                k.parse::<u64>().map_err(|_| bad())?
            };
            if k == 0 {
                return Err(bad());
            }
            return Ok(JRule::PerState(k));
        }
        s.parse::<u64>()
            .ok()
            .filter(|j| *j >= 1)
            .map(JRule::Fixed)
            .ok_or_else(bad)
    }
}

/// Parses `"a..=b"`, `"a..b"`, `"a-b"` or a single `"a"`.
pub fn parse_range(s: &str) -> Result<RangeInclusive<u64>> {
    let s = s.trim();
    let bad = || Error::InvalidParameter(format!("bad range {s:?}"));
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
    let range = if let Some((a, b)) = s.split_once("..=") {
        num(a)?..=num(b)?
    } else if let Some((a, b)) = s.split_once("..") {
        let end = num(b)?;
        if end == 0 {
            return Err(bad());
        }
        num(a)?..=end - 1
    } else if let Some((a, b)) = s.split_once('-') {
        num(a)?..=num(b)?
    } else {
        let v = num(s)?;
        v..=v
    };
    Ok(range)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u64,
    pub m: u64,
    pub j: u64,
    pub ukf_flops: u64,
    pub newkf_flops: u64,
    pub reduction: f64,
}

pub const SWEEP_CSV_HEADER: &str = "n,m,j,ukf_flops,newkf_flops,reduction";

pub fn sweep_grid(
    n_range: RangeInclusive<u64>,
    m_rule: MRule,
    j_rule: JRule,
) -> Result<Vec<SweepRow>> {
    if n_range.is_empty() || *n_range.start() == 0 {
        return Err(Error::InvalidParameter(format!(
            "n range must be non-empty and start at 1 or more, got {n_range:?}"
        )));
    }
    n_range
        .map(|n| {
            let input = CostModelInput::new(n, m_rule.eval(n), j_rule.eval(n))?;
            let r = CostReport::evaluate(&input);
            Ok(SweepRow {
                n,
                m: input.m,
                j: input.j,
                ukf_flops: r.ukf_flops,
                newkf_flops: r.newkf_flops,
                reduction: r.reduction,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(32 * (rows.len() + 1));
    out.push_str(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.6}",
            r.n, r.m, r.j, r.ukf_flops, r.newkf_flops, r.reduction
        );
    }
    out
}

pub const MIN_WARMUP_STEPS: usize = 100;
pub const MIN_TIMED_STEPS: usize = 1000;

/// Per-step timing and instrumented call counts of a real filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredCost {
    pub kind: FilterKind,
    pub timed_steps: usize,
    pub median_step_seconds: f64,
    pub iqr_step_seconds: f64,
    pub transition_calls_per_step: f64,
    pub measure_calls_per_step: f64,
    pub jacobian_calls_per_step: f64,
    pub cholesky_calls_per_step: f64,
}

/// Runs `kind` over `inputs` (pairs of control and measurement), discarding
/// the first `warmup` steps, and times every remaining step on the calling
/// thread.
pub fn measured_cost<M: SystemModel + ?Sized>(
    kind: FilterKind,
    model: &M,
    init: &FilterState,
    inputs: &[(Vector, Vector)],
    warmup: usize,
    opts: &FilterOptions,
) -> Result<MeasuredCost> {
    if warmup < MIN_WARMUP_STEPS || inputs.len() < warmup + MIN_TIMED_STEPS {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_WARMUP_STEPS} warmup and {MIN_TIMED_STEPS} timed steps, got {warmup} of {}",
            inputs.len()
        )));
    }
    let counting = CountingModel::new(model);
    let mut state = init.clone();
    for (u, y) in &inputs[..warmup] {
        state = kind.step(&state, &counting, u, y, opts)?;
    }
    counting.reset();
    let sqrt_before = sqrt_call_count();
    let timed = &inputs[warmup..];
    let mut times = Vec::with_capacity(timed.len());
    for (u, y) in timed {
        let start = Instant::now();
        state = kind.step(&state, &counting, u, y, opts)?;
        times.push(start.elapsed().as_secs_f64());
    }
    let sqrt_calls = sqrt_call_count() - sqrt_before;
    times.sort_by(f64::total_cmp);
    let q = |p: f64| times[((times.len() - 1) as f64 * p).round() as usize];
    let c = counting.counts();
    let k = timed.len() as f64;
    Ok(MeasuredCost {
        kind,
        timed_steps: timed.len(),
        median_step_seconds: q(0.5),
        iqr_step_seconds: q(0.75) - q(0.25),
        transition_calls_per_step: c.transition as f64 / k,
        measure_calls_per_step: c.measure as f64 / k,
        jacobian_calls_per_step: (c.transition_jacobian + c.measurement_jacobian) as f64 / k,
        cholesky_calls_per_step: sqrt_calls as f64 / k,
    })
}
