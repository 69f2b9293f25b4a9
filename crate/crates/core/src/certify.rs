//! Grid certificates for the quasi-subadditivity condition (R2) and the
//! implication (A1), with explicit constants built from `phi(1)` and `phi(1/4)`.
//!
//! Both checks run over the dyadic grid `{j / 2^g}` restricted to
//! `{0} ∪ [2^-N, 1]`. Function values are first brought to a common
//! denominator so the inner loops compare integers only.

use std::ops::Add;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phi::{check_phi_hypothesis, eval_f, eval_phi, PhiFunction};
use crate::rational::Rational;

/// Largest supported grid exponent; the A1 sweep is cubic in `2^g`.
pub const MAX_GRID_DEPTH: usize = 14;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct R2Certificate {
    #[serde(rename = "C")]
    pub c: Rational,
    #[serde(rename = "gridDepth")]
    pub grid_depth: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct A1Certificate {
    pub epsilon: Rational,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "gridDepth")]
    pub grid_depth: usize,
    #[serde(rename = "nMax")]
    pub n_max: usize,
}

fn quarter_node(phi: &PhiFunction) -> Result<&Rational> {
    phi.node(2).ok_or(Error::DepthExceeded { n: 2, depth: phi.depth() })
}

/// `C = max{1, 4^alpha*phi(1)/phi(1/4), 4^alpha/(delta*phi(1/4))}`.
pub fn r2_constant(phi: &PhiFunction) -> Result<Rational> {
    let quarter = quarter_node(phi)?;
    let one_node = phi.node(0).expect("depth >= 2");
    let four_alpha = Rational::pow2(2 * i64::from(phi.params().alpha()));
    let a = &four_alpha * one_node / quarter;
    let b = &four_alpha / (phi.params().delta() * quarter);
    Ok([Rational::one(), a, b].into_iter().max().expect("nonempty"))
}

/// Half of `min{1/phi(1), delta*phi(1/4)/phi(1), delta^2*phi(1/4)}`.
pub fn a1_epsilon(phi: &PhiFunction) -> Result<Rational> {
    let quarter = quarter_node(phi)?;
    let one_node = phi.node(0).expect("depth >= 2");
    let delta = phi.params().delta();
    let bound =
        [one_node.recip(), delta * quarter / one_node, delta * delta * quarter].into_iter().min().expect("nonempty");
    Ok(bound * Rational::new(1, 2))
}

/// Grid indices `j` whose point `j/2^g` lies in `{0} ∪ [2^-N, 1]`.
struct Grid {
    depth: usize,
    valid: Vec<bool>,
}

impl Grid {
    fn new(phi: &PhiFunction, depth: usize) -> Result<Self> {
        if depth == 0 || depth > MAX_GRID_DEPTH {
            return Err(Error::InvalidGrid(format!("grid depth {depth} outside 1..={MAX_GRID_DEPTH}")));
        }
        let size = 1usize << depth;
        // j/2^g >= 2^-N  <=>  j * 2^N >= 2^g
        let min_j = if phi.depth() >= depth { 1 } else { 1usize << (depth - phi.depth()) };
        let valid = (0..=size).map(|j| j == 0 || j >= min_j).collect();
        Ok(Grid { depth, valid })
    }

    fn size(&self) -> usize {
        self.valid.len() - 1
    }

    fn point(&self, j: usize) -> Rational {
        Rational::new(j as i64, 1i64 << self.depth)
    }
}

/// Common-denominator integer image of a table of nonnegative rationals.
fn scale_to_integers(values: &[Rational]) -> (Vec<BigInt>, BigInt) {
    let denom = values.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    let ints = values.iter().map(|v| v.numer() * (&denom / v.denom())).collect();
    (ints, denom)
}

/// Use `i128` when every entry (and any pairwise sum) fits.
enum Table {
    Small(Vec<i128>),
    Big(Vec<BigInt>),
}

fn narrow(tables: Vec<Vec<BigInt>>) -> Vec<Table> {
    let limit = BigInt::from(i128::MAX / 4);
    let fits = tables.iter().flatten().all(|v| v.magnitude() <= limit.magnitude());
    tables
        .into_iter()
        .map(
            |t| {
                if fits {
                    Table::Small(t.iter().map(|v| v.to_i128().expect("checked")).collect())
                } else {
                    Table::Big(t)
                }
            },
        )
        .collect()
}

/// First `(j, k)` in lexicographic order where either (R2) inequality fails.
/// `lhs` holds `Cd*F` and `rhs` holds `Cn*F` for `C = Cn/Cd`.
fn r2_sweep<T>(grid: &Grid, lhs: &[T], rhs: &[T]) -> Option<(usize, usize)>
where
    T: Ord,
    for<'a> &'a T: Add<&'a T, Output = T>,
{
    let size = grid.size();
    for j in 0..=size {
        if !grid.valid[j] {
            continue;
        }
        for k in 0..=size - j {
            if !grid.valid[k] || !grid.valid[j + k] {
                continue;
            }
            // f(x+y) <= C(f(x)+f(y))
            if lhs[j + k] > &rhs[j] + &rhs[k] {
                return Some((j, k));
            }
            // f(x) <= C(f(x+y)+f(y))
            if lhs[j] > &rhs[j + k] + &rhs[k] {
                return Some((j, k));
            }
        }
    }
    None
}

/// Exhaustively checks both (R2) inequalities with the formula constant on
/// every admissible grid pair.
pub fn certify_r2(phi: &PhiFunction, grid_depth: usize) -> Result<R2Certificate> {
    if let Some(v) = check_phi_hypothesis(phi).violation {
        return Err(Error::SeqInvalid { index: v.index, detail: v.detail });
    }
    let c = r2_constant(phi)?;
    let grid = Grid::new(phi, grid_depth)?;
    let f_table = (0..=grid.size())
        .map(|j| if grid.valid[j] { eval_f(phi, &grid.point(j)) } else { Ok(Rational::zero()) })
        .collect::<Result<Vec<_>>>()?;
    let (ints, _) = scale_to_integers(&f_table);
    let lhs: Vec<BigInt> = ints.iter().map(|v| v * c.denom()).collect();
    let rhs: Vec<BigInt> = ints.iter().map(|v| v * c.numer()).collect();
    let hit = match &narrow(vec![lhs, rhs])[..] {
        [Table::Small(l), Table::Small(r)] => r2_sweep(&grid, l, r),
        [Table::Big(l), Table::Big(r)] => r2_sweep(&grid, l, r),
        _ => unreachable!("tables narrow together"),
    };
    if let Some((j, k)) = hit {
        return Err(Error::GridViolation { x: grid.point(j), y: grid.point(k), n: None });
    }
    Ok(R2Certificate { c, grid_depth })
}

/// First `(x, y, n)` in lexicographic order with `x > y/2^(n+1)` and the
/// premise `premise_lhs[x] <= premise_rhs[n-1][y]`.
fn a1_sweep<T: Ord>(grid: &Grid, premise_lhs: &[Vec<T>], premise_rhs: &[Vec<T>]) -> Option<(usize, usize, usize)> {
    let size = grid.size();
    // x = 0 always satisfies the conclusion
    for x in 1..=size {
        if !grid.valid[x] {
            continue;
        }
        for y in 0..=size {
            if !grid.valid[y] {
                continue;
            }
            for (idx, (lhs, rhs)) in premise_lhs.iter().zip(premise_rhs).enumerate() {
                let n = idx + 1;
                let concludes = (x << (n + 1)) <= y;
                if !concludes && lhs[x] <= rhs[y] {
                    return Some((x, y, n));
                }
            }
        }
    }
    None
}

/// Exhaustively checks `phi(x) <= eps*phi(y)*phi(1/2^n)  =>  x <= y/2^(n+1)`
/// for grid `x, y` and `1 <= n <= n_max`.
///
/// `phi(0)` is not determined at finite depth; for `y = 0` the premise is
/// evaluated with its upper bound `u_N`, so a premise that fails there fails
/// for every admissible value of `phi(0)`.
pub fn certify_a1(phi: &PhiFunction, grid_depth: usize, n_max: usize) -> Result<A1Certificate> {
    if let Some(v) = check_phi_hypothesis(phi).violation {
        return Err(Error::SeqInvalid { index: v.index, detail: v.detail });
    }
    if n_max == 0 || n_max > phi.depth() {
        return Err(Error::DepthExceeded { n: n_max, depth: phi.depth() });
    }
    let epsilon = a1_epsilon(phi)?;
    let grid = Grid::new(phi, grid_depth)?;
    let upper_at_zero = phi.node(phi.depth()).expect("depth node").clone();
    let phi_table = (0..=grid.size())
        .map(|j| match j {
            0 => Ok(upper_at_zero.clone()),
            _ if grid.valid[j] => eval_phi(phi, &grid.point(j)),
            _ => Ok(Rational::zero()),
        })
        .collect::<Result<Vec<_>>>()?;
    let (ints, _) = scale_to_integers(&phi_table);
    // phi(x) <= eps*phi(y)*u_n  <=>  P[x]*eps_d*un_d <= eps_n*un_n*P[y]
    let mut tables = Vec::with_capacity(2 * n_max);
    for n in 1..=n_max {
        let un = phi.node(n).expect("n <= depth");
        let l = epsilon.denom() * un.denom();
        tables.push(ints.iter().map(|p| p * &l).collect::<Vec<_>>());
    }
    for n in 1..=n_max {
        let un = phi.node(n).expect("n <= depth");
        let r = epsilon.numer() * un.numer();
        tables.push(ints.iter().map(|p| p * &r).collect::<Vec<_>>());
    }
    let mut narrowed = narrow(tables);
    let rhs = narrowed.split_off(n_max);
    let hit = match (&narrowed[0], &rhs[0]) {
        (Table::Small(_), Table::Small(_)) => {
            let unwrap = |ts: &[Table]| -> Vec<Vec<i128>> {
                ts.iter().map(|t| if let Table::Small(v) = t { v.clone() } else { unreachable!() }).collect()
            };
            a1_sweep(&grid, &unwrap(&narrowed), &unwrap(&rhs))
        }
        _ => {
            let unwrap = |ts: Vec<Table>| -> Vec<Vec<BigInt>> {
                ts.into_iter().map(|t| if let Table::Big(v) = t { v } else { unreachable!() }).collect()
            };
            a1_sweep(&grid, &unwrap(narrowed), &unwrap(rhs))
        }
    };
    if let Some((x, y, n)) = hit {
        return Err(Error::GridViolation { x: grid.point(x), y: grid.point(y), n: Some(n) });
    }
    Ok(A1Certificate { epsilon, m: 0, grid_depth, n_max })
}
