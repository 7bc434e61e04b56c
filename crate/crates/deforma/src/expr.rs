//! Operands written as polynomials, e.g. `z*zb + 2/3*z^2 - i*nu*zb`.
//!
//! Variable names follow the chart: `z`, `zb`, `eta`, `etab` when `m = 1`,
//! `z1`, `zb2`, … otherwise. `i` is the imaginary unit and `nu` the formal
//! parameter.

use deforma_core::{Jet, Nu, NuJet, Scalar, VarSet, EXACT};

use crate::Failure;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(i64),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, Failure> {
    let mut out = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = src[start..i]
                .parse()
                .map_err(|_| Failure::Input(format!("operand {src:?}: integer too large at column {}", start + 1)))?;
            out.push((start, Tok::Int(n)));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(Failure::Input(format!("operand {src:?}: unexpected {c:?} at column {}", i + 1)));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<(usize, Tok)>,
    pos: usize,
    vars: VarSet,
}

impl Parser<'_> {
    fn err(&self, what: &str) -> Failure {
        let col = self.toks.get(self.pos).map_or(self.src.len(), |t| t.0) + 1;
        Failure::Input(format!("operand {:?}: {what} at column {col}", self.src))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn constant(&self, c: Scalar) -> NuJet {
        Nu::single(0, Jet::constant(self.vars, c), EXACT)
    }

    fn expr(&mut self) -> Result<NuJet, Failure> {
        let mut acc = if self.eat('-') { self.term()?.neg() } else { self.term()? };
        loop {
            if self.eat('+') {
                acc = acc.try_add(&self.term()?).map_err(Failure::Core)?;
            } else if self.eat('-') {
                acc = acc.try_sub(&self.term()?).map_err(Failure::Core)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<NuJet, Failure> {
        let mut acc = self.power()?;
        loop {
            if self.eat('*') {
                acc = acc.mul(&self.power()?).map_err(Failure::Core)?;
            } else if self.eat('/') {
                match self.peek() {
                    Some(&Tok::Int(q)) if q != 0 => {
                        self.pos += 1;
                        acc = acc.scale(&Scalar::from_ratio(1, q));
                    }
                    _ => return Err(self.err("expected a nonzero integer divisor")),
                }
            } else {
                return Ok(acc);
            }
        }
    }

    fn power(&mut self) -> Result<NuJet, Failure> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let e = match self.peek() {
            Some(&Tok::Int(e)) if e <= 64 => e,
            _ => return Err(self.err("expected an exponent in 0..=64")),
        };
        self.pos += 1;
        let mut out = self.constant(Scalar::one());
        for _ in 0..e {
            out = out.mul(&base).map_err(Failure::Core)?;
        }
        Ok(out)
    }

    fn atom(&mut self) -> Result<NuJet, Failure> {
        let tok = self.peek().cloned().ok_or_else(|| self.err("unexpected end"))?;
        self.pos += 1;
        match tok {
            Tok::Int(n) => Ok(self.constant(Scalar::from_int(n))),
            Tok::Op('(') => {
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Tok::Op('-') => Ok(self.power()?.neg()),
            Tok::Ident(name) => {
                if name == "i" {
                    return Ok(self.constant(Scalar::i()));
                }
                if name == "nu" {
                    return Ok(Nu::single(1, Jet::one(self.vars), EXACT));
                }
                match (0..self.vars.nvars()).find(|&k| self.vars.name(k) == name) {
                    Some(k) => Ok(Nu::single(0, Jet::var(self.vars, k), EXACT)),
                    None => {
                        self.pos -= 1;
                        Err(self.err(&format!("unknown variable {name:?}")))
                    }
                }
            }
            Tok::Op(_) => {
                self.pos -= 1;
                Err(self.err("unexpected operator"))
            }
        }
    }
}

/// Parses `src` as a polynomial in the variables of `vars` and `nu`.
pub fn parse(src: &str, vars: VarSet) -> Result<NuJet, Failure> {
    let toks = lex(src)?;
    let mut p = Parser { src, toks, pos: 0, vars };
    let out = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err("trailing input"));
    }
    Ok(out)
}

/// Parses an operand without `ν`.
pub fn parse_jet(src: &str, vars: VarSet) -> Result<Jet, Failure> {
    let x = parse(src, vars)?;
    if x.terms().keys().any(|&k| k != 0) {
        return Err(Failure::Input(format!("operand {src:?}: nu is not allowed here")));
    }
    Ok(x.at(0, &Jet::zero(vars)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial() {
        let v = VarSet::base(1);
        let got = parse("z*zb + 2/3*z^2 - i*nu", v).unwrap();
        let z = Jet::var(v, 0);
        let want0 = &(&z * &Jet::var(v, 1)) + &z.pow(2).scale(&Scalar::from_ratio(2, 3));
        assert_eq!(got.get(0), Some(&want0));
        assert_eq!(got.get(1), Some(&Jet::constant(v, -Scalar::i())));
    }

    #[test]
    fn names_follow_dimension() {
        let v = VarSet::tangent(2);
        let got = parse_jet("-(z1 + etab2)^2", v).unwrap();
        let s = &Jet::var(v, v.z(0)) + &Jet::var(v, v.fibbar(1));
        assert_eq!(got, -&s.pow(2));
        assert!(parse_jet("z", v).is_err());
    }

    #[test]
    fn errors_have_columns() {
        let v = VarSet::base(1);
        match parse("z + * zb", v) {
            Err(Failure::Input(msg)) => assert!(msg.contains("column 5"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(parse_jet("nu*z", v).is_err());
        assert!(parse("z/0", v).is_err());
    }
}
