use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "iteration,wall_ms,kind,value,nodes_expanded";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    #[serde(rename = "UB")]
    Upper,
    #[serde(rename = "LB")]
    Lower,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundKind::Upper => "UB",
            BoundKind::Lower => "LB",
        })
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "UB" => Ok(BoundKind::Upper),
            "LB" => Ok(BoundKind::Lower),
            other => Err(Error::Malformed { format: "trace", detail: format!("unknown kind {other:?}") }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: u64,
    pub wall_ms: u64,
    pub kind: BoundKind,
    pub value: f64,
    pub nodes_expanded: u64,
}

/// Time source for trace timestamps. The logical clock always reads zero, so
/// traces depend only on the search itself.
#[derive(Clone, Copy, Debug)]
pub enum Clock {
    Wall(Instant),
    Logical,
}

impl Clock {
    pub fn wall() -> Self {
        Clock::Wall(Instant::now())
    }

    pub fn elapsed_ms(&self) -> u64 {
        match self {
            Clock::Wall(start) => start.elapsed().as_millis() as u64,
            Clock::Logical => 0,
        }
    }
}

/// Limits for a search. `None` means unlimited; at least one must be set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub max_iterations: Option<u64>,
    pub max_nodes: Option<u64>,
    pub max_wall_ms: Option<u64>,
    pub seed: u64,
}

impl SearchBudget {
    pub fn new(max_iterations: Option<u64>, max_nodes: Option<u64>, max_wall_ms: Option<u64>, seed: u64) -> Result<Self> {
        let b = Self { max_iterations, max_nodes, max_wall_ms, seed };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations.is_none() && self.max_nodes.is_none() && self.max_wall_ms.is_none() {
            return Err(Error::InvalidConfig("search budget needs at least one finite limit".into()));
        }
        Ok(())
    }

    pub fn wall_exhausted(&self, clock: &Clock) -> bool {
        matches!(clock, Clock::Wall(_)) && self.max_wall_ms.is_some_and(|m| clock.elapsed_ms() >= m)
    }
}

/// Interleaved upper- and lower-bound history of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundsTrace {
    pub entries: Vec<TraceEntry>,
}

impl BoundsTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: TraceEntry) {
        self.entries.push(entry);
    }

    pub fn values(&self, kind: BoundKind) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().filter(move |e| e.kind == kind).map(|e| e.value)
    }

    pub fn last(&self, kind: BoundKind) -> Option<f64> {
        self.values(kind).last()
    }

    /// Upper bounds never rise, lower bounds never fall, and no lower bound
    /// exceeds an upper bound recorded after it.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let ub: Vec<f64> = self.values(BoundKind::Upper).collect();
        let lb: Vec<f64> = self.values(BoundKind::Lower).collect();
        if let Some(w) = ub.windows(2).find(|w| w[1] > w[0]) {
            return Err(format!("upper bound rose from {} to {}", w[0], w[1]));
        }
        if let Some(w) = lb.windows(2).find(|w| w[1] < w[0]) {
            return Err(format!("lower bound fell from {} to {}", w[0], w[1]));
        }
        let mut max_lb = f64::NEG_INFINITY;
        for e in &self.entries {
            match e.kind {
                BoundKind::Lower => max_lb = max_lb.max(e.value),
                BoundKind::Upper if e.value < max_lb => {
                    return Err(format!("upper bound {} below earlier lower bound {max_lb}", e.value));
                }
                BoundKind::Upper => {}
            }
        }
        Ok(())
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for e in &self.entries {
            writeln!(out, "{},{},{},{},{}", e.iteration, e.wall_ms, e.kind, fmt_g9(e.value), e.nodes_expanded)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("trace CSV is ASCII")
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        Self::read_csv(text.as_bytes())
    }

    pub fn read_csv(input: impl BufRead) -> Result<Self> {
        let bad = |line: usize, detail: String| Error::Malformed { format: "trace", detail: format!("line {line}: {detail}") };
        let mut lines = input.lines();
        let header = lines.next().transpose()?;
        if header.as_deref().map(str::trim_end) != Some(TRACE_HEADER) {
            return Err(bad(1, format!("expected header {TRACE_HEADER:?}")));
        }
        let mut trace = Self::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let n = i + 2;
            let f: Vec<&str> = line.trim_end().split(',').collect();
            if f.len() != 5 {
                return Err(bad(n, format!("expected 5 fields, found {}", f.len())));
            }
            let int = |s: &str, what: &str| s.parse::<u64>().map_err(|e| bad(n, format!("{what}: {e}")));
            let value: f64 = f[3].parse().map_err(|e| bad(n, format!("value: {e}")))?;
            if !value.is_finite() {
                return Err(bad(n, "value is not finite".into()));
            }
            trace.push(TraceEntry {
                iteration: int(f[0], "iteration")?,
                wall_ms: int(f[1], "wall_ms")?,
                kind: f[2].parse().map_err(|e: Error| bad(n, e.to_string()))?,
                value,
                nodes_expanded: int(f[4], "nodes_expanded")?,
            });
        }
        Ok(trace)
    }
}

/// `%.9g`: nine significant digits, trailing zeros dropped, scientific
/// notation when the exponent is below −4 or at least 9.
pub fn fmt_g9(x: f64) -> String {
    const P: i32 = 9;
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= P {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        trim(&format!("{:.*}", (P - 1 - exp) as usize, x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g9_matches_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-2.5, "-2.5"),
            (99999999.95, "100000000"),
            (999999999.5, "1e+09"),
            (5670.31, "5670.31"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g9(x), want, "{x}");
        }
    }

    fn sample() -> BoundsTrace {
        let mut t = BoundsTrace::new();
        for (i, (kind, v)) in [(BoundKind::Upper, 3.5), (BoundKind::Lower, 0.25), (BoundKind::Lower, 1.0 / 3.0), (BoundKind::Upper, 2.0)]
            .into_iter()
            .enumerate()
        {
            t.push(TraceEntry { iteration: i as u64, wall_ms: 0, kind, value: v, nodes_expanded: 10 * i as u64 });
        }
        t
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let text = sample().to_csv();
        assert!(text.starts_with("iteration,wall_ms,kind,value,nodes_expanded\n0,0,UB,3.5,0\n"));
        assert_eq!(BoundsTrace::parse_csv(&text).unwrap().to_csv(), text);
    }

    #[test]
    fn csv_errors() {
        assert!(BoundsTrace::parse_csv("nope\n").is_err());
        assert!(BoundsTrace::parse_csv(&format!("{TRACE_HEADER}\n1,2,XB,1,1\n")).is_err());
        assert!(BoundsTrace::parse_csv(&format!("{TRACE_HEADER}\n1,2,UB,1\n")).is_err());
        assert!(BoundsTrace::parse_csv(&format!("{TRACE_HEADER}\n1,2,UB,inf,3\n")).is_err());
    }

    #[test]
    fn invariants() {
        assert!(sample().check_invariants().is_ok());
        let mut t = sample();
        t.push(TraceEntry { iteration: 9, wall_ms: 0, kind: BoundKind::Upper, value: 0.3, nodes_expanded: 0 });
        assert!(t.check_invariants().unwrap_err().contains("below"));
        let mut t = sample();
        t.push(TraceEntry { iteration: 9, wall_ms: 0, kind: BoundKind::Lower, value: 0.1, nodes_expanded: 0 });
        assert!(t.check_invariants().is_err());
    }

    #[test]
    fn budget_needs_a_limit() {
        assert!(SearchBudget::new(None, None, None, 0).is_err());
        assert!(SearchBudget::new(None, Some(1), None, 0).is_ok());
    }

    proptest! {
        #[test]
        fn g9_reparses_to_nine_digits(x in -1e12f64..1e12) {
            let s = fmt_g9(x);
            let back: f64 = s.parse().unwrap();
            prop_assert_eq!(fmt_g9(back), s.clone());
            if x != 0.0 {
                prop_assert!(((back - x) / x).abs() < 1e-8, "{} -> {}", x, s);
            }
        }
    }
}
