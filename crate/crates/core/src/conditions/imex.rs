//! IMEX linear (Φ-recursion) and nonlinear/coupling conditions.

use super::{factorial, Condition, ConditionKind, ConditionSet, Expr, Part, Rational};
use crate::error::{Error, Result};

const PARTS: [Part; 2] = [Part::Explicit, Part::Implicit];

/// Φ-recursion conditions through order `p_lin`: `2^q` conditions at order `q`.
/// Coinciding functionals are kept.
pub fn imex_linear_conditions(p_lin: usize) -> Result<ConditionSet> {
    if p_lin == 0 {
        return Err(Error::Domain("linear order must be at least 1".into()));
    }
    if p_lin > 20 {
        return Err(Error::Domain(format!("linear order {p_lin} is beyond 20!")));
    }
    let mut words: Vec<(Part, Vec<Part>)> = PARTS.iter().map(|&w| (w, Vec::new())).collect();
    let mut out = Vec::new();
    for q in 1..=p_lin {
        if q > 1 {
            words = words
                .into_iter()
                .flat_map(|(w, ms)| {
                    PARTS.iter().map(move |&p| {
                        let mut ms = ms.clone();
                        ms.push(p);
                        (w, ms)
                    })
                })
                .collect();
        }
        for (w, ms) in &words {
            let expr = ms.iter().rev().fold(Expr::Ones, |x, &p| Expr::apply(p, x));
            out.push(Condition::new(
                ConditionKind::ImexLinear,
                *w,
                expr,
                Rational::recip(factorial(q)),
            ));
        }
    }
    Ok(ConditionSet::new(out))
}

fn product(mut fs: Vec<Expr>) -> Expr {
    fs.sort();
    Expr::Product(fs)
}

/// Unordered pairs and triples of abscissa vectors `c`, `c̃`.
fn abscissa_multisets(n: usize) -> Vec<Vec<Expr>> {
    (0..=n)
        .map(|implicit| {
            (0..n)
                .map(|i| Expr::abscissa(if i < n - implicit { Part::Explicit } else { Part::Implicit }))
                .collect()
        })
        .collect()
}

/// Non-tall bicolored trees of order 3 and 4 below the root weight, in
/// the order `c²`; `c³`, `c·Ac`, `A(c²)`.
fn bicolored(order: usize) -> Vec<Expr> {
    match order {
        3 => abscissa_multisets(2).into_iter().map(product).collect(),
        4 => {
            let mut v: Vec<Expr> = abscissa_multisets(3).into_iter().map(product).collect();
            for x in PARTS {
                for m in PARTS {
                    for y in PARTS {
                        v.push(product(vec![
                            Expr::abscissa(x),
                            Expr::apply(m, Expr::abscissa(y)),
                        ]));
                    }
                }
            }
            for m in PARTS {
                for pair in abscissa_multisets(2) {
                    v.push(Expr::apply(m, product(pair)));
                }
            }
            v
        }
        _ => unreachable!(),
    }
}

fn all_parts(e: &Expr, part: Part) -> bool {
    match e {
        Expr::Ones => true,
        Expr::Apply(p, x) => *p == part && all_parts(x, part),
        Expr::Product(fs) => fs.iter().all(|f| all_parts(f, part)),
    }
}

/// `Ã(x∘y)` under an explicit weight, which groups with the implicit-weight
/// coupling conditions.
fn implicit_outer_bush(e: &Expr) -> bool {
    matches!(e, Expr::Apply(Part::Implicit, x) if matches!(**x, Expr::Product(_)))
}

enum Family {
    PureExplicit,
    PureImplicit,
    /// Coupling conditions required by the explicit order.
    CoupledA,
    /// Coupling conditions required by the implicit order.
    CoupledB,
}

fn family(weight: Part, e: &Expr) -> Family {
    match (weight, all_parts(e, weight)) {
        (Part::Explicit, true) => Family::PureExplicit,
        (Part::Implicit, true) => Family::PureImplicit,
        (Part::Explicit, false) if !implicit_outer_bush(e) => Family::CoupledA,
        _ => Family::CoupledB,
    }
}

fn kind_for(weight: Part, e: &Expr) -> ConditionKind {
    if all_parts(e, weight) {
        ConditionKind::Nonlinear
    } else {
        match weight {
            Part::Explicit => ConditionKind::ImexCoupledExplicitWeight,
            Part::Implicit => ConditionKind::ImexCoupledImplicitWeight,
        }
    }
}

fn emit(out: &mut Vec<Condition>, weight: Part, order: usize, keep: impl Fn(&Expr) -> bool) {
    let target = |e: &Expr| -> Rational {
        match e {
            Expr::Product(fs) if fs.len() == order - 1 => Rational::recip(order as u64),
            Expr::Product(_) => Rational::recip(8),
            Expr::Apply(..) => Rational::recip(if order == 3 { 6 } else { 12 }),
            Expr::Ones => unreachable!(),
        }
    };
    for e in bicolored(order) {
        if keep(&e) {
            out.push(Condition::new(kind_for(weight, &e), weight, e.clone(), target(&e)));
        }
    }
}

/// Nonlinear and coupling conditions beyond the linear set for an IMEX pair
/// with explicit order `p_e` and implicit order `p_i`. Coupling conditions of
/// order `k` are only emitted when both parts reach `k`; a linear `G`
/// (`implicit_linear`, only with `p_i = 2`) keeps the explicit-side coupling.
pub fn imex_nonlinear_conditions(p_e: usize, p_i: usize, implicit_linear: bool) -> Result<ConditionSet> {
    for (name, p) in [("explicit", p_e), ("implicit", p_i)] {
        if p < 2 {
            return Err(Error::Unsupported(format!(
                "{name} order {p}: conditions below order 2 are covered by the linear set only"
            )));
        }
        if p > 4 {
            return Err(Error::Unsupported(format!(
                "{name} order {p}: no order-{p} nonlinear coupling conditions are available"
            )));
        }
    }
    if implicit_linear && p_i != 2 {
        return Err(Error::Validation(format!(
            "a linear implicit part requires p_i = 2, got {p_i}"
        )));
    }
    let mut out = Vec::new();
    for order in 3..=4 {
        let explicit_family = p_e >= order && (p_i >= order || implicit_linear);
        let implicit_family = p_i >= order && p_e >= order;
        for weight in PARTS {
            emit(&mut out, weight, order, |e| match family(weight, e) {
                Family::PureExplicit => p_e >= order,
                Family::PureImplicit => p_i >= order,
                Family::CoupledA => explicit_family,
                Family::CoupledB => implicit_family,
            });
        }
    }
    Ok(ConditionSet::new(out))
}

/// Linear conditions through `max(p_lin, p_e, p_i)` followed by the
/// nonlinear and coupling conditions.
pub fn imex_conditions(p_e: usize, p_i: usize, p_lin: usize, implicit_linear: bool) -> Result<ConditionSet> {
    let mut set = imex_linear_conditions(p_lin.max(p_e).max(p_i))?;
    set.extend(imex_nonlinear_conditions(p_e, p_i, implicit_linear)?);
    Ok(set)
}
