//! Key-value search spec files, in the same style as method headers.

use std::collections::BTreeMap;

use super::{Budget, CoConstraints, ImexSearch, SearchSpec, Tolerances};
use crate::error::{Error, Result};
use crate::tableau::{KValue, Structure};

const KEYS: &[&str] = &[
    "s", "structure", "p", "p_lin", "p_e", "p_i", "implicit_linear", "k", "min_real",
    "min_imag", "multistarts", "max_iters", "seed", "equality_tol", "feasibility_tol", "outer_tol",
];

/// Parses a search spec such as
///
/// ```text
/// s=3
/// structure=dirk
/// p=2
/// p_lin=3
/// ```
///
/// Giving any of `p_e`, `p_i`, `k` or `implicit_linear` makes it an IMEX
/// search; then `p` defaults to `min(p_e, p_i)`.
pub fn parse_search_spec(text: &str) -> Result<SearchSpec> {
    let mut kv: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(i + 1, format!("expected key=value, got '{line}'")))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(Error::parse(i + 1, format!("unknown key '{k}'")));
        }
        if kv.insert(k, (i + 1, v.trim())).is_some() {
            return Err(Error::parse(i + 1, format!("duplicate key '{k}'")));
        }
    }
    fn get<T: std::str::FromStr>(kv: &BTreeMap<&str, (usize, &str)>, key: &str) -> Result<Option<T>> {
        match kv.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::parse(*line, format!("invalid value '{v}' for {key}"))),
        }
    }
    let s: usize = get(&kv, "s")?.ok_or_else(|| Error::Validation("missing s".into()))?;
    let structure = match kv.get("structure") {
        None => Structure::Dirk,
        Some((line, v)) => Structure::parse(v)
            .ok_or_else(|| Error::parse(*line, format!("unknown structure '{v}'")))?,
    };
    let p_e: Option<usize> = get(&kv, "p_e")?;
    let p_i: Option<usize> = get(&kv, "p_i")?;
    let implicit_linear: Option<bool> = get(&kv, "implicit_linear")?;
    let k = match kv.get("k") {
        None => None,
        Some((line, v)) => Some(KValue::parse(v).map_err(|e| Error::parse(*line, e.to_string()))?),
    };
    let imex = if p_e.is_some() || p_i.is_some() || k.is_some() || implicit_linear.is_some() {
        let p_e = p_e.ok_or_else(|| Error::Validation("IMEX spec needs p_e".into()))?;
        let p_i = p_i.ok_or_else(|| Error::Validation("IMEX spec needs p_i".into()))?;
        Some(ImexSearch {
            p_e,
            p_i,
            implicit_linear: implicit_linear.unwrap_or(false),
            k: k.unwrap_or(KValue::Infinite),
        })
    } else {
        None
    };
    let p: usize = match (get(&kv, "p")?, imex) {
        (Some(p), _) => p,
        (None, Some(im)) => im.p_e.min(im.p_i),
        (None, None) => return Err(Error::Validation("missing p".into())),
    };
    let p_lin: usize = get(&kv, "p_lin")?.unwrap_or(p);
    let min_real: Option<f64> = get(&kv, "min_real")?;
    let min_imag: Option<f64> = get(&kv, "min_imag")?;
    let co_constraints = (min_real.is_some() || min_imag.is_some()).then(|| CoConstraints {
        min_real: min_real.unwrap_or(0.0),
        min_imag: min_imag.unwrap_or(0.0),
    });
    let d = Budget::default();
    let t = Tolerances::default();
    Ok(SearchSpec {
        s,
        structure,
        p,
        p_lin,
        imex,
        co_constraints,
        budget: Budget {
            multistarts: get(&kv, "multistarts")?.unwrap_or(d.multistarts),
            max_iters: get(&kv, "max_iters")?.unwrap_or(d.max_iters),
            seed: get(&kv, "seed")?.unwrap_or(d.seed),
        },
        tolerances: Tolerances {
            equality: get(&kv, "equality_tol")?.unwrap_or(t.equality),
            feasibility: get(&kv, "feasibility_tol")?.unwrap_or(t.feasibility),
            outer: get(&kv, "outer_tol")?.unwrap_or(t.outer),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk_and_imex_specs() {
        let spec = parse_search_spec("s=3\nstructure=dirk\np=2\np_lin=3 # comment\nseed=4\n").unwrap();
        assert_eq!((spec.s, spec.p, spec.p_lin, spec.budget.seed), (3, 2, 3, 4));
        assert!(spec.imex.is_none());

        let spec = parse_search_spec("s=3\np_e=2\np_i=2\np_lin=3\nk=1/10\n").unwrap();
        let im = spec.imex.unwrap();
        assert_eq!(spec.p, 2);
        assert!((im.k.inverse() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_search_spec("s=3\np=2\nbogus=1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
        let e = parse_search_spec("s=3\np=x\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert!(parse_search_spec("s=3\ns=4\np=1").is_err());
        assert!(parse_search_spec("p=1\n").is_err());
    }
}
