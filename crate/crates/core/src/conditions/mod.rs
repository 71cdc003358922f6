//! Order conditions as residual functionals `wᵀ x(A, Ã) − target`.
//!
//! A condition is a weight (`b` or `b̃`) applied to a vector expression built
//! from `e`, the stage matrices, and elementwise products. Nonlinear
//! conditions for a single method come from rooted trees; linear and IMEX
//! conditions are generated directly.

mod imex;
mod trees;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tableau::{ButcherTableau, ImexTableau};

pub use imex::{imex_conditions, imex_linear_conditions, imex_nonlinear_conditions};
pub use trees::{trees_of_order, Tree};

/// Default tolerance for order verification of methods with printed
/// 15-digit coefficients.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Which tableau a weight or matrix refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Part {
    Explicit,
    Implicit,
}

impl Part {
    fn suffix(self) -> &'static str {
        match self {
            Part::Explicit => "",
            Part::Implicit => "~",
        }
    }
}

/// A vector-valued expression in the stage matrices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    /// The vector of ones.
    Ones,
    /// Matrix-vector product with `A` or `Ã`.
    Apply(Part, Box<Expr>),
    /// Elementwise product.
    Product(Vec<Expr>),
}

impl Expr {
    pub fn apply(part: Part, inner: Expr) -> Expr {
        Expr::Apply(part, Box::new(inner))
    }

    /// `c` or `c̃`.
    pub fn abscissa(part: Part) -> Expr {
        Expr::apply(part, Expr::Ones)
    }

    /// `diag(c_part) · x`.
    pub fn scale(part: Part, x: Expr) -> Expr {
        match x {
            Expr::Product(mut fs) => {
                fs.insert(0, Expr::abscissa(part));
                Expr::Product(fs)
            }
            other => Expr::Product(vec![Expr::abscissa(part), other]),
        }
    }

    fn uses_implicit(&self) -> bool {
        match self {
            Expr::Ones => false,
            Expr::Apply(p, x) => *p == Part::Implicit || x.uses_implicit(),
            Expr::Product(fs) => fs.iter().any(Expr::uses_implicit),
        }
    }

    /// Number of matrix applications along the deepest-weighted count,
    /// i.e. the order contributed below the weight.
    fn order(&self) -> usize {
        match self {
            Expr::Ones => 0,
            Expr::Apply(_, x) => 1 + x.order(),
            Expr::Product(fs) => fs.iter().map(Expr::order).sum(),
        }
    }

    fn eval(&self, m: &Matrices<'_>) -> DVector<f64> {
        match self {
            Expr::Ones => DVector::from_element(m.s, 1.0),
            Expr::Apply(p, x) => m.matrix(*p) * x.eval(m),
            Expr::Product(fs) => {
                let mut acc = DVector::from_element(m.s, 1.0);
                for f in fs {
                    acc.component_mul_assign(&f.eval(m));
                }
                acc
            }
        }
    }

    fn render(&self, top: bool) -> String {
        match self {
            Expr::Ones => "e".into(),
            Expr::Apply(p, x) if **x == Expr::Ones => format!("c{}", p.suffix()),
            Expr::Apply(p, x) => format!("A{}{}", p.suffix(), x.render(false)),
            Expr::Product(fs) => {
                let mut groups: Vec<(String, usize)> = Vec::new();
                for f in fs {
                    let r = f.render(false);
                    match groups.iter_mut().find(|(g, _)| *g == r) {
                        Some(g) => g.1 += 1,
                        None => groups.push((r, 1)),
                    }
                }
                let body = groups
                    .iter()
                    .map(|(g, n)| if *n == 1 { g.clone() } else { format!("{g}^{n}") })
                    .collect::<Vec<_>>()
                    .join("*");
                if top {
                    body
                } else {
                    format!("({body})")
                }
            }
        }
    }
}

/// A nonnegative rational target value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Rational {
    pub num: u64,
    pub den: u64,
}

impl Rational {
    pub fn new(num: u64, den: u64) -> Self {
        fn gcd(a: u64, b: u64) -> u64 {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        let g = gcd(num, den).max(1);
        Rational {
            num: num / g,
            den: den / g,
        }
    }

    pub fn recip(den: u64) -> Self {
        Rational::new(1, den)
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionKind {
    Nonlinear,
    Linear,
    ImexLinear,
    ImexCoupledExplicitWeight,
    ImexCoupledImplicitWeight,
}

impl ConditionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConditionKind::Nonlinear => "nonlinear",
            ConditionKind::Linear => "linear",
            ConditionKind::ImexLinear => "imex-linear",
            ConditionKind::ImexCoupledExplicitWeight => "imex-coupled-explicit-weight",
            ConditionKind::ImexCoupledImplicitWeight => "imex-coupled-implicit-weight",
        }
    }

    pub fn is_linear(self) -> bool {
        matches!(self, ConditionKind::Linear | ConditionKind::ImexLinear)
    }
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One order condition `weightᵀ expr = target`.
#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub id: String,
    pub order: usize,
    pub kind: ConditionKind,
    pub target: Rational,
    pub weight: Part,
    pub expr: Expr,
}

impl Condition {
    pub fn new(kind: ConditionKind, weight: Part, expr: Expr, target: Rational) -> Self {
        let id = format!("b{}'{}", weight.suffix(), expr.render(true));
        Condition {
            id,
            order: expr.order() + 1,
            kind,
            target,
            weight,
            expr,
        }
    }

    pub fn uses_implicit(&self) -> bool {
        self.weight == Part::Implicit || self.expr.uses_implicit()
    }

    fn residual(&self, m: &Matrices<'_>) -> f64 {
        m.weight(self.weight).dot(&self.expr.eval(m)) - self.target.value()
    }
}

/// An ordered list of order conditions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConditionSet {
    conditions: Vec<Condition>,
}

struct Matrices<'a> {
    s: usize,
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    at: &'a DMatrix<f64>,
    bt: &'a DVector<f64>,
}

impl Matrices<'_> {
    fn matrix(&self, p: Part) -> &DMatrix<f64> {
        match p {
            Part::Explicit => self.a,
            Part::Implicit => self.at,
        }
    }

    fn weight(&self, p: Part) -> &DVector<f64> {
        match p {
            Part::Explicit => self.b,
            Part::Implicit => self.bt,
        }
    }
}

/// The method a condition set is evaluated on.
#[derive(Clone, Copy, Debug)]
pub enum Evaluand<'a> {
    Rk(&'a ButcherTableau),
    Imex(&'a ImexTableau),
}

impl<'a> From<&'a ButcherTableau> for Evaluand<'a> {
    fn from(t: &'a ButcherTableau) -> Self {
        Evaluand::Rk(t)
    }
}

impl<'a> From<&'a ImexTableau> for Evaluand<'a> {
    fn from(t: &'a ImexTableau) -> Self {
        Evaluand::Imex(t)
    }
}

impl ConditionSet {
    pub fn new(conditions: Vec<Condition>) -> Self {
        ConditionSet { conditions }
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    pub fn extend(&mut self, other: ConditionSet) {
        self.conditions.extend(other.conditions);
    }

    pub fn count_of_order(&self, order: usize) -> usize {
        self.conditions.iter().filter(|c| c.order == order).count()
    }

    pub fn max_order(&self) -> usize {
        self.conditions.iter().map(|c| c.order).max().unwrap_or(0)
    }

    pub fn needs_pair(&self) -> bool {
        self.conditions.iter().any(Condition::uses_implicit)
    }

    /// Residuals from raw coefficient arrays. Pass `tilde = None` for a
    /// single method; sets referring to `Ã` or `b̃` then fail with a mismatch.
    pub fn residuals_raw(
        &self,
        a: &DMatrix<f64>,
        b: &DVector<f64>,
        tilde: Option<(&DMatrix<f64>, &DVector<f64>)>,
    ) -> Result<Vec<f64>> {
        let s = b.len();
        let (at, bt) = match tilde {
            Some(pair) => pair,
            None if self.needs_pair() => {
                return Err(Error::Mismatch(
                    "IMEX conditions cannot be evaluated on a single tableau".into(),
                ))
            }
            None => (a, b),
        };
        if a.shape() != (s, s) || at.shape() != (s, s) || bt.len() != s {
            return Err(Error::Validation("coefficient arrays have inconsistent sizes".into()));
        }
        let m = Matrices { s, a, b, at, bt };
        Ok(self.conditions.iter().map(|c| c.residual(&m)).collect())
    }

    pub fn residuals<'a>(&self, method: impl Into<Evaluand<'a>>) -> Result<Vec<f64>> {
        match method.into() {
            Evaluand::Rk(t) => self.residuals_raw(t.a(), t.b(), None),
            Evaluand::Imex(p) => self.residuals_raw(
                p.explicit().a(),
                p.explicit().b(),
                Some((p.implicit().a(), p.implicit().b())),
            ),
        }
    }

    pub fn evaluate<'a>(&self, method: impl Into<Evaluand<'a>>, tol: f64) -> Result<ResidualReport> {
        let res = self.residuals(method)?;
        Ok(ResidualReport::new(self, res, tol))
    }
}

impl FromIterator<Condition> for ConditionSet {
    fn from_iter<I: IntoIterator<Item = Condition>>(iter: I) -> Self {
        ConditionSet::new(iter.into_iter().collect())
    }
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

fn tree_expr(t: &Tree) -> Expr {
    if t.children().is_empty() {
        return Expr::Ones;
    }
    let factors: Vec<Expr> = t
        .children()
        .iter()
        .map(|ch| Expr::apply(Part::Explicit, tree_expr(ch)))
        .collect();
    if factors.len() == 1 {
        factors.into_iter().next().unwrap()
    } else {
        Expr::Product(factors)
    }
}

/// All rooted-tree conditions of order at most `p` for a single method.
pub fn rk_nonlinear_conditions(p: usize) -> Result<ConditionSet> {
    if !(1..=6).contains(&p) {
        return Err(Error::Domain(format!(
            "nonlinear order must be between 1 and 6, got {p}"
        )));
    }
    Ok((1..=p)
        .flat_map(trees_of_order)
        .map(|t| {
            Condition::new(
                ConditionKind::Nonlinear,
                Part::Explicit,
                tree_expr(&t),
                Rational::recip(t.density()),
            )
        })
        .collect())
}

fn power_expr(part: Part, q: usize) -> Expr {
    (0..q).fold(Expr::Ones, |x, _| Expr::apply(part, x))
}

/// `bᵀA^{q−1}e = 1/q!` for `q = 1..=p_lin`.
pub fn rk_linear_conditions(p_lin: usize) -> Result<ConditionSet> {
    if p_lin == 0 {
        return Err(Error::Domain("linear order must be at least 1".into()));
    }
    if p_lin > 20 {
        return Err(Error::Domain(format!("linear order {p_lin} is beyond 20!")));
    }
    Ok((1..=p_lin)
        .map(|q| {
            Condition::new(
                ConditionKind::Linear,
                Part::Explicit,
                power_expr(Part::Explicit, q - 1),
                Rational::recip(factorial(q)),
            )
        })
        .collect())
}

/// Nonlinear conditions to order `p` together with linear conditions to `p_lin`,
/// without repeating the linear conditions already implied by the trees.
pub fn rk_conditions(p: usize, p_lin: usize) -> Result<ConditionSet> {
    let mut set = rk_nonlinear_conditions(p)?;
    if p_lin > p {
        let lin = rk_linear_conditions(p_lin)?;
        set.extend(lin.conditions.into_iter().filter(|c| c.order > p).collect());
    }
    Ok(set)
}

/// One evaluated condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualRow {
    pub id: String,
    pub order: usize,
    pub kind: ConditionKind,
    pub target: String,
    pub residual: f64,
}

/// Residuals of a condition set on one method, with attained-order verdicts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub rows: Vec<ResidualRow>,
    pub max_abs_by_order: BTreeMap<usize, f64>,
    pub tolerance: f64,
    /// Largest `p` such that every condition of order `≤ p` is satisfied,
    /// counting only orders covered by nonlinear conditions (or orders 1–2).
    pub p_attained: usize,
    /// Largest `q` such that every linear condition of order `≤ q` is satisfied.
    pub p_lin_attained: usize,
}

impl ResidualReport {
    fn new(set: &ConditionSet, residuals: Vec<f64>, tol: f64) -> Self {
        let rows: Vec<ResidualRow> = set
            .conditions
            .iter()
            .zip(&residuals)
            .map(|(c, r)| ResidualRow {
                id: c.id.clone(),
                order: c.order,
                kind: c.kind,
                target: c.target.to_string(),
                residual: *r,
            })
            .collect();
        let mut max_abs_by_order = BTreeMap::new();
        for row in &rows {
            let e = max_abs_by_order.entry(row.order).or_insert(0.0_f64);
            *e = e.max(row.residual.abs());
        }
        let lin_cap = rows.iter().filter(|r| r.kind.is_linear()).map(|r| r.order).max().unwrap_or(0);
        let nl_cap = rows
            .iter()
            .filter(|r| !r.kind.is_linear())
            .map(|r| r.order)
            .max()
            .unwrap_or(0)
            .max(lin_cap.min(2));
        let attained = |cap: usize, linear_only: bool| {
            let mut p = 0;
            while p < cap {
                let next = p + 1;
                let ok = rows
                    .iter()
                    .filter(|r| r.order == next && (!linear_only || r.kind.is_linear()))
                    .all(|r| r.residual.abs() <= tol);
                if !ok {
                    break;
                }
                p = next;
            }
            p
        };
        ResidualReport {
            p_attained: attained(nl_cap, false),
            p_lin_attained: attained(lin_cap, true),
            rows,
            max_abs_by_order,
            tolerance: tol,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.residual.abs()))
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.residual.abs() <= self.tolerance)
    }

    pub fn failing(&self) -> impl Iterator<Item = &ResidualRow> {
        self.rows.iter().filter(|r| r.residual.abs() > self.tolerance)
    }

    /// CSV with columns `id,order,kind,target,residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,order,kind,target,residual\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:e}\n",
                r.id, r.order, r.kind, r.target, r.residual
            ));
        }
        out
    }
}

/// Parses CSV written by [`ResidualReport::to_csv`] into `(id, order, kind, target, residual)` rows.
pub fn parse_report_csv(text: &str) -> Result<Vec<(String, usize, String, String, f64)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "id,order,kind,target,residual")) => {}
        _ => return Err(Error::parse(1, "missing residual CSV header")),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(Error::parse(i + 1, "expected 5 fields"));
            }
            let order = f[1].parse().map_err(|_| Error::parse(i + 1, "bad order"))?;
            let residual = f[4].parse().map_err(|_| Error::parse(i + 1, "bad residual"))?;
            Ok((f[0].to_string(), order, f[2].to_string(), f[3].to_string(), residual))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ssprk33() -> ButcherTableau {
        ButcherTableau::from_rows(
            &[&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.25, 0.25, 0.0]],
            &[1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
        )
        .unwrap()
    }

    #[test]
    fn cumulative_tree_counts() {
        let counts: Vec<usize> = (1..=6).map(|p| rk_nonlinear_conditions(p).unwrap().len()).collect();
        assert_eq!(counts, vec![1, 2, 4, 8, 17, 37]);
        assert!(rk_nonlinear_conditions(0).is_err());
        assert!(rk_nonlinear_conditions(7).is_err());
    }

    #[test]
    fn fourth_order_list_matches_classical_conditions() {
        let set = rk_nonlinear_conditions(4).unwrap();
        let got: Vec<(String, String)> = set
            .conditions()
            .iter()
            .map(|c| (c.id.clone(), c.target.to_string()))
            .collect();
        let want = [
            ("b'e", "1"),
            ("b'c", "1/2"),
            ("b'c^2", "1/3"),
            ("b'Ac", "1/6"),
            ("b'c^3", "1/4"),
            ("b'c*Ac", "1/8"),
            ("b'A(c^2)", "1/12"),
            ("b'AAc", "1/24"),
        ];
        let want: Vec<(String, String)> =
            want.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn ssprk33_residuals() {
        let t = ssprk33();
        let rep = rk_nonlinear_conditions(4).unwrap().evaluate(&t, 1e-13).unwrap();
        assert_eq!(rep.p_attained, 3);
        let r = rep.rows.iter().find(|r| r.id == "b'A(c^2)").unwrap();
        // Ac² = (0, 0, 1/4): b'Ac² = 1/6, target 1/12.
        assert!((r.residual - 1.0 / 12.0).abs() < 1e-15);

        let lin = rk_linear_conditions(4).unwrap().residuals(&t).unwrap();
        assert!(lin[2].abs() < 1e-15);
        assert!((lin[3] + 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn imex_sets_need_a_pair() {
        let set = imex_linear_conditions(2).unwrap();
        assert!(matches!(set.residuals(&ssprk33()), Err(Error::Mismatch(_))));
    }

    #[test]
    fn attained_orders_are_monotone_in_tolerance() {
        let t = ssprk33();
        let set = rk_conditions(4, 5).unwrap();
        let mut last = (0, 0);
        for tol in [1e-16, 1e-12, 1e-2, 5e-2, 1.0] {
            let rep = set.evaluate(&t, tol).unwrap();
            assert!(rep.p_attained >= last.0 && rep.p_lin_attained >= last.1);
            last = (rep.p_attained, rep.p_lin_attained);
        }
        assert_eq!(last, (4, 5));
    }

    #[test]
    fn csv_round_trip() {
        let rep = rk_conditions(3, 4).unwrap().evaluate(&ssprk33(), 1e-12).unwrap();
        let rows = parse_report_csv(&rep.to_csv()).unwrap();
        assert_eq!(rows.len(), rep.rows.len());
        for (parsed, row) in rows.iter().zip(&rep.rows) {
            assert_eq!(parsed.0, row.id);
            assert_eq!(parsed.1, row.order);
            assert_eq!(parsed.4, row.residual);
        }
    }
}
