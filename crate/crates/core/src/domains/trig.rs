//! Finite trigonometric polynomials in `t = log r`, used as oscillating cone profiles.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Harmonic {
    Sin,
    Cos,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub frequency: f64,
    pub harmonic: Harmonic,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    pub constant: f64,
    pub terms: Vec<TrigTerm>,
}

impl TrigPoly {
    pub fn constant(c: f64) -> Self {
        TrigPoly {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn with_term(mut self, amplitude: f64, frequency: f64, harmonic: Harmonic) -> Self {
        self.terms.push(TrigTerm {
            amplitude,
            frequency,
            harmonic,
        });
        self
    }

    /// Value and first two derivatives at `t`.
    pub fn eval3(&self, t: f64) -> (f64, f64, f64) {
        let mut v = self.constant;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for term in &self.terms {
            let (a, k) = (term.amplitude, term.frequency);
            let (s, c) = (k * t).sin_cos();
            match term.harmonic {
                Harmonic::Sin => {
                    v += a * s;
                    d1 += a * k * c;
                    d2 -= a * k * k * s;
                }
                Harmonic::Cos => {
                    v += a * c;
                    d1 -= a * k * s;
                    d2 -= a * k * k * c;
                }
            }
        }
        (v, d1, d2)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval3(t).0
    }

    /// Upper bound on `|p'|` over the real line.
    pub fn lipschitz_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.amplitude.abs() * t.frequency.abs()).sum()
    }

    pub fn difference(&self, other: &TrigPoly) -> TrigPoly {
        let mut out = self.clone();
        out.constant -= other.constant;
        for t in &other.terms {
            out.terms.push(TrigTerm {
                amplitude: -t.amplitude,
                ..*t
            });
        }
        out
    }

    /// Certified lower bound for `min p(t)` on `[a, b]` from dense sampling plus the
    /// Lipschitz margin.
    pub fn min_lower_bound(&self, a: f64, b: f64) -> f64 {
        let n = 4096;
        let h = (b - a) / n as f64;
        let sampled = (0..=n)
            .map(|i| self.eval(a + h * i as f64))
            .fold(f64::INFINITY, f64::min);
        sampled - 0.5 * h * self.lipschitz_bound()
    }

    pub fn max_upper_bound(&self, a: f64, b: f64) -> f64 {
        let n = 4096;
        let h = (b - a) / n as f64;
        let sampled = (0..=n)
            .map(|i| self.eval(a + h * i as f64))
            .fold(f64::NEG_INFINITY, f64::max);
        sampled + 0.5 * h * self.lipschitz_bound()
    }

    /// Parses expressions such as `3*pi/4 + 0.2*sin(t) - 0.1*cos(2*t)`.
    pub fn parse(src: &str) -> Result<Self> {
        let mut poly = TrigPoly::default();
        for (sign, piece) in split_terms(src)? {
            let piece = piece.trim();
            let func = ["sin(", "cos("].iter().find_map(|f| piece.find(f).map(|pos| (pos, *f)));
            match func {
                None => poly.constant += sign * expr::eval(piece)?,
                Some((pos, f)) => {
                    let harmonic = if f == "sin(" { Harmonic::Sin } else { Harmonic::Cos };
                    let coef_src = piece[..pos].trim().trim_end_matches('*').trim();
                    let amplitude = if coef_src.is_empty() {
                        1.0
                    } else {
                        expr::eval(coef_src)?
                    };
                    let rest = &piece[pos + f.len()..];
                    let close = rest
                        .rfind(')')
                        .ok_or_else(|| Error::Parse(format!("missing ')' in '{piece}'")))?;
                    if !rest[close + 1..].trim().is_empty() {
                        return Err(Error::Parse(format!("trailing text in '{piece}'")));
                    }
                    let inner = rest[..close].trim();
                    let frequency = if inner == "t" {
                        1.0
                    } else if let Some(k) = inner.strip_suffix('t') {
                        expr::eval(k.trim().trim_end_matches('*'))?
                    } else {
                        return Err(Error::Parse(format!(
                            "harmonic argument must be 't' or 'k*t', got '{inner}'"
                        )));
                    };
                    poly.terms.push(TrigTerm {
                        amplitude: sign * amplitude,
                        frequency,
                        harmonic,
                    });
                }
            }
        }
        Ok(poly)
    }
}

fn split_terms(src: &str) -> Result<Vec<(f64, &str)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0usize;
    let mut sign = 1.0;
    let mut prev: Option<u8> = None;
    let mut prev2: Option<u8> = None;
    for (i, &c) in bytes.iter().enumerate() {
        if c.is_ascii_whitespace() {
            continue;
        }
        match c {
            b'(' => depth += 1,
            b')' => depth -= 1,
            b'+' | b'-' if depth == 0 => {
                let leading = src[start..i].trim().is_empty();
                let exponent = matches!(prev, Some(b'e') | Some(b'E'))
                    && matches!(prev2, Some(d) if d.is_ascii_digit() || d == b'.');
                let after_op = matches!(prev, Some(b'*') | Some(b'/'));
                if leading {
                    if c == b'-' {
                        sign = -sign;
                    }
                    start = i + 1;
                } else if !exponent && !after_op {
                    out.push((sign, &src[start..i]));
                    sign = if c == b'-' { -1.0 } else { 1.0 };
                    start = i + 1;
                }
            }
            _ => {}
        }
        prev2 = prev;
        prev = Some(c);
    }
    if depth != 0 {
        return Err(Error::Parse(format!("unbalanced parentheses in '{src}'")));
    }
    out.push((sign, &src[start..]));
    if out.iter().any(|(_, p)| p.trim().is_empty()) {
        return Err(Error::Parse(format!("empty term in '{src}'")));
    }
    Ok(out)
}

impl fmt::Display for TrigPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.constant)?;
        for t in &self.terms {
            let name = match t.harmonic {
                Harmonic::Sin => "sin",
                Harmonic::Cos => "cos",
            };
            write!(f, " + {}*{}({}*t)", t.amplitude, name, t.frequency)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn parses_profile_with_harmonics() {
        let p = TrigPoly::parse("3*pi/4 + 0.2*sin(t) - 0.1*cos(2*t)").unwrap();
        assert_eq!(p.constant, 0.75 * PI);
        assert_eq!(p.terms.len(), 2);
        assert_eq!(p.terms[1].amplitude, -0.1);
        assert_eq!(p.terms[1].frequency, 2.0);
        let t: f64 = 0.3;
        let expect = 0.75 * PI + 0.2 * t.sin() - 0.1 * (2.0 * t).cos();
        assert!((p.eval(t) - expect).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = TrigPoly::parse("1 + 0.3*sin(1.5*t) + cos(t)").unwrap();
        let (t, h) = (-0.7, 1e-5);
        let (_, d1, d2) = p.eval3(t);
        let fd1 = (p.eval(t + h) - p.eval(t - h)) / (2.0 * h);
        let fd2 = (p.eval3(t + h).1 - p.eval3(t - h).1) / (2.0 * h);
        assert!((d1 - fd1).abs() < 1e-8);
        assert!((d2 - fd2).abs() < 1e-8);
    }

    #[test]
    fn display_round_trips_through_parse() {
        let p = TrigPoly::constant(0.5).with_term(-0.25, 2.0, Harmonic::Cos);
        let q = TrigPoly::parse(&p.to_string()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn min_bound_is_conservative() {
        let p = TrigPoly::constant(0.0).with_term(1.0, 1.0, Harmonic::Sin);
        let lo = p.min_lower_bound(-5.0, 0.0);
        assert!(lo <= -1.0 && lo > -1.01);
    }
}
