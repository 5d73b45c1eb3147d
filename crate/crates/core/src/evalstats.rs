//! Evaluation statistics for user-study data: descriptive statistics, one-way
//! ANOVA with an F-distribution p-value, and five binomial confidence
//! intervals.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::tsv::{self, TsvError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("ANOVA needs at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("group `{0}` is empty")]
    EmptyGroup(String),
    #[error("successes {x} must lie in [0, {n}] with n >= 1")]
    BadCounts { x: u64, n: u64 },
    #[error("confidence level must lie in (0, 1), got {0}")]
    BadLevel(f64),
    #[error("malformed responses: {0}")]
    Table(#[from] TsvError),
}

/// Scores for one group (one user, one condition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSample {
    pub label: String,
    pub scores: Vec<f64>,
}

impl GroupSample {
    pub fn new(label: impl Into<String>, scores: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            scores,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub n: usize,
    pub mean: f64,
    /// Divisor n - 1.
    pub sample_variance: f64,
    /// Divisor n.
    pub population_variance: f64,
}

impl Description {
    pub fn sample_std(&self) -> f64 {
        self.sample_variance.sqrt()
    }

    pub fn population_std(&self) -> f64 {
        self.population_variance.sqrt()
    }
}

/// Mean plus both variance conventions. The usability table prints the
/// sample variance next to the population standard deviation.
pub fn describe(group: &GroupSample) -> Result<Description, StatsError> {
    let xs = &group.scores;
    if xs.len() < 2 {
        return Err(StatsError::TooFew {
            needed: 2,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    Ok(Description {
        n: xs.len(),
        mean,
        sample_variance: ss / (n - 1.0),
        population_variance: ss / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub ss_model: f64,
    pub ss_residual: f64,
    pub df_model: usize,
    pub df_residual: usize,
    pub ms_model: f64,
    pub ms_residual: f64,
    pub f_value: f64,
    pub p_value: f64,
    /// Between-group spread with no within-group spread: F is infinite.
    pub f_infinite: bool,
}

/// One-way analysis of variance across `groups`.
pub fn anova_oneway(groups: &[GroupSample]) -> Result<AnovaResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if let Some(g) = groups.iter().find(|g| g.scores.is_empty()) {
        return Err(StatsError::EmptyGroup(g.label.clone()));
    }
    let total_n: usize = groups.iter().map(|g| g.scores.len()).sum();
    if total_n <= groups.len() {
        return Err(StatsError::TooFew {
            needed: groups.len() + 1,
            got: total_n,
        });
    }
    let grand = groups.iter().flat_map(|g| &g.scores).sum::<f64>() / total_n as f64;
    let mut ss_model = 0.0;
    let mut ss_residual = 0.0;
    for g in groups {
        let m = g.scores.iter().sum::<f64>() / g.scores.len() as f64;
        ss_model += g.scores.len() as f64 * (m - grand).powi(2);
        ss_residual += g.scores.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    let df_model = groups.len() - 1;
    let df_residual = total_n - groups.len();
    let ms_model = ss_model / df_model as f64;
    let ms_residual = ss_residual / df_residual as f64;

    // sums of squares below this are rounding residue
    let scale: f64 = groups
        .iter()
        .flat_map(|g| &g.scores)
        .map(|x| x * x)
        .sum::<f64>();
    let eps = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let (f_value, p_value, f_infinite) = if ss_model <= eps {
        (0.0, 1.0, false)
    } else if ss_residual <= eps {
        (f64::INFINITY, 0.0, true)
    } else {
        let f = ms_model / ms_residual;
        (f, f_survival(f, df_model as f64, df_residual as f64), false)
    };
    Ok(AnovaResult {
        ss_model,
        ss_residual,
        df_model,
        df_residual,
        ms_model,
        ms_residual,
        f_value,
        p_value,
        f_infinite,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CiMethod {
    /// Normal approximation.
    Wald,
    ClopperPearson,
    Wilson,
    Jeffreys,
    AgrestiCoull,
}

impl CiMethod {
    pub const ALL: [CiMethod; 5] = [
        CiMethod::Wald,
        CiMethod::ClopperPearson,
        CiMethod::Wilson,
        CiMethod::Jeffreys,
        CiMethod::AgrestiCoull,
    ];
}

impl fmt::Display for CiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CiMethod::Wald => "Normal approx.",
            CiMethod::ClopperPearson => "Clopper-Pearson exact",
            CiMethod::Wilson => "Wilson",
            CiMethod::Jeffreys => "Jeffreys",
            CiMethod::AgrestiCoull => "Agresti-Coull",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialCI {
    pub method: CiMethod,
    pub prevalence: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl BinomialCI {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Two-sided interval for a binomial proportion `x / n`.
///
/// Only the Wald interval may leave `[0, 1]`. With `x = 0` or `x = n` the
/// beta-based methods pin the corresponding bound to 0 or 1.
pub fn binom_ci(x: u64, n: u64, level: f64, method: CiMethod) -> Result<BinomialCI, StatsError> {
    if n == 0 || x > n {
        return Err(StatsError::BadCounts { x, n });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::BadLevel(level));
    }
    let alpha = 1.0 - level;
    let z = normal_quantile(1.0 - alpha / 2.0);
    let (xf, nf) = (x as f64, n as f64);
    let p = xf / nf;
    let q = 1.0 - p;
    let (lower, upper) = match method {
        CiMethod::Wald => {
            let half = z * (p * q / nf).sqrt();
            (p - half, p + half)
        }
        CiMethod::Wilson => {
            let z2 = z * z;
            let denom = 1.0 + z2 / nf;
            let center = (p + z2 / (2.0 * nf)) / denom;
            let half = z * (p * q / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
            let lo = if x == 0 {
                0.0
            } else {
                (center - half).max(0.0)
            };
            let hi = if x == n {
                1.0
            } else {
                (center + half).min(1.0)
            };
            (lo, hi)
        }
        CiMethod::AgrestiCoull => {
            let z2 = z * z;
            let n_adj = nf + z2;
            let p_adj = (xf + z2 / 2.0) / n_adj;
            let half = z * (p_adj * (1.0 - p_adj) / n_adj).sqrt();
            ((p_adj - half).max(0.0), (p_adj + half).min(1.0))
        }
        CiMethod::Jeffreys => {
            let (a, b) = (xf + 0.5, nf - xf + 0.5);
            let lo = if x == 0 {
                0.0
            } else {
                beta_quantile(alpha / 2.0, a, b)
            };
            let hi = if x == n {
                1.0
            } else {
                beta_quantile(1.0 - alpha / 2.0, a, b)
            };
            (lo, hi)
        }
        CiMethod::ClopperPearson => {
            let lo = if x == 0 {
                0.0
            } else {
                beta_quantile(alpha / 2.0, xf, nf - xf + 1.0)
            };
            let hi = if x == n {
                1.0
            } else {
                beta_quantile(1.0 - alpha / 2.0, xf + 1.0, nf - xf)
            };
            (lo, hi)
        }
    };
    Ok(BinomialCI {
        method,
        prevalence: p,
        lower,
        upper,
        level,
    })
}

/// Natural log of the gamma function (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b)).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(x, a, b) / a
    } else {
        1.0 - front * beta_cf(1.0 - x, b, a) / b
    }
}

/// Quantile of Beta(a, b) by bisection on [`inc_beta`].
pub fn beta_quantile(p: f64, a: f64, b: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if inc_beta(mid, a, b) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Upper tail `P(F > f)` of the F distribution with `(d1, d2)` degrees of
/// freedom.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    inc_beta(d2 / (d2 + d1 * f), d2 / 2.0, d1 / 2.0)
}

/// Standard normal quantile (Wichura's AS 241, about 1e-16 relative).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.0809287301227 * r + 33430.57558358813) * r + 67265.7709270087) * r
                + 45921.95393154987)
                * r
                + 13731.69376550946)
                * r
                + 1971.5909503065513)
                * r
                + 133.14166789178438)
                * r
                + 3.3871328727963665)
            / (((((((5226.495278852545 * r + 28729.085735721943) * r + 39307.89580009271) * r
                + 21213.794301586597)
                * r
                + 5394.196021424751)
                * r
                + 687.1870074920579)
                * r
                + 42.31333070160091)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        (((((((7.745450142783414e-4 * r + 0.022723844989269184) * r + 0.2417807251774506) * r
            + 1.2704582524523684)
            * r
            + 3.6478483247632045)
            * r
            + 5.769497221460691)
            * r
            + 4.630337846156546)
            * r
            + 1.4234371107496835)
            / (((((((1.0507500716444169e-9 * r + 5.475938084995345e-4) * r
                + 0.015198666563616457)
                * r
                + 0.14810397642748008)
                * r
                + 0.6897673349851)
                * r
                + 1.6763848301838038)
                * r
                + 2.053191626637759)
                * r
                + 1.0)
    } else {
        let r = r - 5.0;
        (((((((2.0103343992922881e-7 * r + 2.7115555687434876e-5) * r + 0.0012426609473880784)
            * r
            + 0.026532189526576124)
            * r
            + 0.2965605718285049)
            * r
            + 1.7848265399172913)
            * r
            + 5.463784911164114)
            * r
            + 6.657904643501103)
            / (((((((2.0442631033899397e-15 * r + 1.421511758316446e-7) * r
                + 1.8463183175100548e-5)
                * r
                + 7.868691311456133e-4)
                * r
                + 0.014875361290850615)
                * r
                + 0.1369298809227358)
                * r
                + 0.599832206555888)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Groups `responses.tsv` (`user`, `question`, `score`) by user, in order of
/// first appearance.
pub fn groups_from_responses(text: &str) -> Result<Vec<GroupSample>, StatsError> {
    let mut groups: Vec<GroupSample> = Vec::new();
    for row in tsv::rows(text, "user")? {
        let user = row.get(0, "user")?.trim();
        let score: f64 = row.parse(2, "score")?;
        match groups.iter_mut().find(|g| g.label == user) {
            Some(g) => g.scores.push(score),
            None => groups.push(GroupSample::new(user, vec![score])),
        }
    }
    Ok(groups)
}

/// Counts yes answers in `binary.tsv` (`user`, `question`, `0|1`); returns
/// `(successes, trials)`.
pub fn successes_from_binary(text: &str) -> Result<(u64, u64), StatsError> {
    let mut yes = 0;
    let mut total = 0;
    for row in tsv::rows(text, "user")? {
        let v: u8 = row.parse(2, "answer")?;
        if v > 1 {
            return Err(TsvError {
                line: row.line,
                message: format!("answer must be 0 or 1, got {v}"),
            }
            .into());
        }
        yes += v as u64;
        total += 1;
    }
    Ok((yes, total))
}
