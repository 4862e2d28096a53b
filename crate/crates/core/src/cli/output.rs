//! `system.json` (schema 1) and plain-text reports.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{JopError, Result};
use crate::forms::InnerProductFamily;
use crate::mep::{root_signature, Eigenpair, JointSystem};
use crate::poly::Polynomial;

pub const SCHEMA: u32 = 1;

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.16e}")
}

pub fn parse_f64(s: &str) -> Result<f64> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| JopError::InvalidConfig(format!("{s:?} is not a number"))),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PairRecord {
    /// Monic coefficients, lowest degree first.
    pub coefficients: Vec<String>,
    pub lambda: Vec<String>,
    pub residual: String,
    pub signature: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SystemFile {
    pub schema: u32,
    pub k: usize,
    pub n: usize,
    pub intervals: Vec<[String; 2]>,
    pub preset: Option<String>,
    pub seed: u64,
    pub min_angle: String,
    pub max_orthogonality: String,
    pub pairs: Vec<PairRecord>,
}

impl SystemFile {
    pub fn from_system(sys: &JointSystem, fam: &InnerProductFamily, preset: Option<&str>, seed: u64) -> Self {
        let intervals = fam.intervals();
        SystemFile {
            schema: SCHEMA,
            k: sys.k,
            n: sys.n,
            intervals: intervals.iter().map(|&(a, b)| [fmt_f64(a), fmt_f64(b)]).collect(),
            preset: preset.map(str::to_owned),
            seed,
            min_angle: fmt_f64(if sys.min_angle.is_finite() { sys.min_angle } else { 0.0 }),
            max_orthogonality: fmt_f64(sys.max_orthogonality()),
            pairs: sys
                .pairs
                .iter()
                .map(|p| PairRecord {
                    coefficients: p.vector.padded(sys.n + 1).into_iter().map(fmt_f64).collect(),
                    lambda: p.lambda.iter().copied().map(fmt_f64).collect(),
                    residual: fmt_f64(p.residual),
                    signature: root_signature(&p.vector, &intervals),
                })
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| JopError::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        let file: SystemFile =
            serde_json::from_str(&text).map_err(|e| JopError::InvalidConfig(format!("{}: {e}", path.display())))?;
        if file.schema != SCHEMA {
            return Err(JopError::InvalidConfig(format!("unsupported schema {}", file.schema)));
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("system file serializes");
        s.push('\n');
        s
    }

    /// The stored pairs.
    pub fn pairs(&self) -> Result<Vec<Eigenpair>> {
        self.pairs
            .iter()
            .map(|r| {
                let coeffs = r.coefficients.iter().map(|s| parse_f64(s)).collect::<Result<Vec<_>>>()?;
                let lambda = r.lambda.iter().map(|s| parse_f64(s)).collect::<Result<Vec<_>>>()?;
                Ok(Eigenpair { vector: Polynomial::new(coeffs), lambda, residual: parse_f64(&r.residual)? })
            })
            .collect()
    }

    /// One row per member: coefficients, then eigenvalue.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> =
            (0..=self.n).map(|s| format!("c{s}")).chain((1..=self.k).map(|j| format!("lambda{j}"))).collect();
        let _ = writeln!(out, "{}", header.join(","));
        for p in &self.pairs {
            let _ = writeln!(out, "{},{}", p.coefficients.join(","), p.lambda.join(","));
        }
        out
    }
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value < limit`.
    pub fn below(name: &str, value: f64, limit: f64) -> Self {
        Check { name: name.to_owned(), value, limit, pass: value < limit }
    }

    pub fn equal(name: &str, value: usize, want: usize) -> Self {
        Check { name: name.to_owned(), value: value as f64, limit: want as f64, pass: value == want }
    }
}

pub fn check_table(title: &str, checks: &[Check]) -> String {
    let mut out = format!("{title}\n");
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in checks {
        let _ = writeln!(
            out,
            "{:<width$}  {:>12.3e}  limit {:>10.3e}  {}",
            c.name,
            c.value,
            c.limit,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn decimal_strings_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(parse_f64(&fmt_f64(x)).unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn table_marks_failures() {
        let t = check_table("t", &[Check::below("a", 1.0, 2.0), Check::equal("b", 3, 4)]);
        assert!(t.contains("PASS") && t.contains("FAIL"));
    }
}
