//! Study files: flat `key = value` lines grouped into `[name]` sections, one
//! study per section. `#` starts a comment.
//!
//! ```text
//! output = collapse.csv
//!
//! [aligned]
//! scheme = shifted
//! delta = 1/4
//! h = 1/16, 1/64, 1/256
//! expect_rate = 4
//! ```

use std::fmt;

use nlcol::analysis::{HorizonRule, Problem, StudyConfig};
use nlcol::{PolynomialFn, Scheme};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone)]
pub struct StudySection {
    pub name: String,
    pub config: StudyConfig,
    /// Expected finest pairwise rate and its tolerance.
    pub expect_rate: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct StudyFile {
    pub output: Option<String>,
    pub studies: Vec<StudySection>,
}

#[derive(Default)]
struct Draft {
    name: String,
    line: usize,
    scheme: Option<Scheme>,
    dim: Option<u8>,
    rule: Option<HorizonRule>,
    hs: Option<Vec<f64>>,
    solution: Option<String>,
    limit: Option<String>,
    solver: Option<String>,
    expect_rate: Option<f64>,
    rate_tol: Option<f64>,
}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError { line, message: message.into() }
}

/// `a`, `a/b` or a decimal literal.
pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: f64 = p.trim().parse().ok()?;
        let q: f64 = q.trim().parse().ok()?;
        return (q != 0.0).then_some(p / q).filter(|v| v.is_finite());
    }
    s.parse().ok().filter(|v: &f64| v.is_finite())
}

/// Horizon expressions: a constant, `c*h^β`, `h^2`, `sqrt(h)` or a rational
/// multiple of `h` such as `10h/3`, `5h` or `10/3*h`.
pub fn parse_delta(s: &str) -> Option<HorizonRule> {
    let e: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if !e.contains('h') {
        return parse_number(&e).filter(|d| *d > 0.0).map(HorizonRule::Fixed);
    }
    let coefficient = |c: &str| -> Option<f64> {
        let c = c.strip_suffix('*').unwrap_or(c);
        if c.is_empty() {
            Some(1.0)
        } else {
            parse_number(c).filter(|v| *v > 0.0)
        }
    };
    if let Some(pre) = e.strip_suffix("sqrt(h)") {
        return Some(HorizonRule::Power { c: coefficient(pre)?, beta: 0.5 });
    }
    let (pre, post) = e.split_once('h')?;
    if post.contains('h') {
        return None;
    }
    if let Some(beta) = post.strip_prefix('^') {
        let beta = parse_number(beta.trim_start_matches('(').trim_end_matches(')'))?;
        return (beta > 0.0).then_some(HorizonRule::Power { c: coefficient(pre)?, beta });
    }
    // rational multiple: `ah/b`
    let c = coefficient(pre)?;
    let c = match post.strip_prefix('/') {
        Some(q) => {
            let q: u64 = q.parse().ok().filter(|q| *q > 0)?;
            match pre.strip_suffix('*').unwrap_or(pre).parse::<u64>() {
                Ok(p) => p as f64 / q as f64,
                Err(_) => c / q as f64,
            }
        }
        None if post.is_empty() => c,
        None => return None,
    };
    Some(HorizonRule::Power { c, beta: 1.0 })
}

fn finish(d: Draft) -> Result<StudySection, ConfigError> {
    let line = d.line;
    let rule = d.rule.ok_or_else(|| err(line, format!("section [{}] has no delta", d.name)))?;
    let hs = d.hs.ok_or_else(|| err(line, format!("section [{}] has no h list", d.name)))?;
    let dim = d.dim.unwrap_or(1);
    let scheme = d.scheme.unwrap_or(Scheme::ShiftedSymmetric);
    let local = match d.limit.as_deref().unwrap_or("nonlocal") {
        "nonlocal" => false,
        "local" => true,
        other => return Err(err(line, format!("limit must be nonlocal or local, got '{other}'"))),
    };
    let problem = match d.solution.as_deref().unwrap_or("bump") {
        "bump" if local => Problem::LocalLimit(PolynomialFn::quartic_bump()),
        "bump" => Problem::Manufactured(PolynomialFn::quartic_bump()),
        "self_convergence" if !local => Problem::SelfConvergence,
        "self_convergence" => return Err(err(line, "self_convergence has no local limit")),
        other => return Err(err(line, format!("unknown solution '{other}' (expected bump or self_convergence)"))),
    };
    let mut config = if dim == 2 {
        StudyConfig { problem, scheme, ..StudyConfig::two_d(rule, hs) }
    } else {
        StudyConfig { dim, ..StudyConfig::new(scheme, rule, hs, problem) }
    };
    match d.solver.as_deref() {
        None => {}
        Some("cg") => config.prefer_cg = true,
        Some("direct") if dim == 2 => return Err(err(line, "2D studies are solved by cg")),
        Some("direct") => config.prefer_cg = false,
        Some(other) => return Err(err(line, format!("solver must be direct or cg, got '{other}'"))),
    }
    config.validate().map_err(|e| err(line, format!("section [{}]: {e}", d.name)))?;
    let expect_rate = match (d.expect_rate, d.rate_tol) {
        (Some(r), tol) => Some((r, tol.unwrap_or(0.2))),
        (None, Some(_)) => return Err(err(line, "rate_tol without expect_rate")),
        (None, None) => None,
    };
    Ok(StudySection { name: d.name, config, expect_rate })
}

pub fn parse_study_file(text: &str) -> Result<StudyFile, ConfigError> {
    let mut file = StudyFile::default();
    let mut current: Option<Draft> = None;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| err(line, "unterminated section header"))?.trim();
            if name.is_empty() {
                return Err(err(line, "empty section name"));
            }
            if file.studies.iter().any(|s| s.name == name) || current.as_ref().is_some_and(|d| d.name == name) {
                return Err(err(line, format!("duplicate section [{name}]")));
            }
            if let Some(d) = current.take() {
                file.studies.push(finish(d)?);
            }
            current = Some(Draft { name: name.to_string(), line, ..Draft::default() });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(a, b)| (a.trim(), b.trim()))
            .ok_or_else(|| err(line, format!("expected key = value, got '{content}'")))?;
        if value.is_empty() {
            return Err(err(line, format!("empty value for '{key}'")));
        }
        let Some(d) = current.as_mut() else {
            match key {
                "output" => file.output = Some(value.to_string()),
                other => return Err(err(line, format!("key '{other}' outside a section (only output is global)"))),
            }
            continue;
        };
        let number = |v: &str| parse_number(v).ok_or_else(|| err(line, format!("'{v}' is not a number")));
        match key {
            "scheme" => d.scheme = Some(value.parse().map_err(|_| err(line, format!("unknown scheme '{value}' (expected shifted or standard)")))?),
            "dimension" | "dim" => {
                d.dim = Some(match value {
                    "1" => 1,
                    "2" => 2,
                    other => return Err(err(line, format!("dimension must be 1 or 2, got '{other}'"))),
                })
            }
            "delta" => d.rule = Some(parse_delta(value).ok_or_else(|| err(line, format!("cannot read horizon '{value}'")))?),
            "h" => d.hs = Some(value.split(',').map(|v| number(v).and_then(|h| if h > 0.0 { Ok(h) } else { Err(err(line, "h must be positive")) })).collect::<Result<_, _>>()?),
            "solution" => d.solution = Some(value.to_string()),
            "limit" => d.limit = Some(value.to_string()),
            "solver" => d.solver = Some(value.to_string()),
            "expect_rate" => d.expect_rate = Some(number(value)?),
            "rate_tol" => d.rate_tol = Some(number(value)?.abs()),
            other => return Err(err(line, format!("unknown key '{other}'"))),
        }
    }
    if let Some(d) = current.take() {
        file.studies.push(finish(d)?);
    }
    if file.studies.is_empty() {
        return Err(err(text.lines().count().max(1), "no [section] defines a study"));
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_grammar() {
        let p = |c: f64, beta: f64| Some(HorizonRule::Power { c, beta });
        assert_eq!(parse_delta("1/3"), Some(HorizonRule::Fixed(1.0 / 3.0)));
        assert_eq!(parse_delta("0.2499"), Some(HorizonRule::Fixed(0.2499)));
        assert_eq!(parse_delta("sqrt(h)"), p(1.0, 0.5));
        assert_eq!(parse_delta("h^2"), p(1.0, 2.0));
        assert_eq!(parse_delta("h^1/4"), p(1.0, 0.25));
        assert_eq!(parse_delta("2*h^0.5"), p(2.0, 0.5));
        assert_eq!(parse_delta("10h/3"), p(10.0 / 3.0, 1.0));
        assert_eq!(parse_delta("10/3*h"), p(10.0 / 3.0, 1.0));
        assert_eq!(parse_delta("5h"), p(5.0, 1.0));
        assert_eq!(parse_delta("h"), p(1.0, 1.0));
        for bad in ["", "-1", "0", "hh", "h^-1", "x", "5h2", "h/0"] {
            assert_eq!(parse_delta(bad), None, "{bad}");
        }
    }

    #[test]
    fn sections_become_studies() {
        let text = "output = out.csv\n[a]\ndelta = 1/4\nh = 1/16, 1/64\nexpect_rate = 4\n\n[b] # comment\nscheme = standard\ndelta=5h\nh=1/16,1/64\n";
        let f = parse_study_file(text).unwrap();
        assert_eq!(f.output.as_deref(), Some("out.csv"));
        assert_eq!(f.studies.len(), 2);
        assert_eq!(f.studies[0].expect_rate, Some((4.0, 0.2)));
        assert_eq!(f.studies[1].config.scheme, Scheme::Standard);
        assert_eq!(f.studies[1].config.hs, vec![1.0 / 16.0, 1.0 / 64.0]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("[a]\ndelta = 1/4\nh = 1/16, 1/32\n", 1),
            ("[a]\ndelta = 1/4\nfoo = 1\n", 3),
            ("scheme = shifted\n", 1),
            ("[a]\ndelta = q\n", 2),
            ("[a]\n[a]\n", 2),
            ("[a]\nh = 1/16\ndelta = 1/4\nsolver = cg\nscheme = standard\n", 1),
            ("[a\n", 1),
        ];
        for (text, line) in cases {
            let e = parse_study_file(text).unwrap_err();
            assert_eq!(e.line, line, "{text:?}: {e}");
        }
    }
}
