//! Exact rational helpers used for certificates and indifference systems.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

/// Exact conversion of a finite float. Panics on NaN or infinity; callers
/// validate finiteness first.
pub fn rat(x: f64) -> Rational {
    BigRational::from_float(x).expect("finite float")
}

pub fn rat_int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `p/q` (or `p` for integers), suitable for reports.
pub fn fmt_rat(x: &Rational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Solves the square system `a * x = b` by Gaussian elimination. Returns
/// `None` when `a` is singular.
pub fn solve_square(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    debug_assert!(a.iter().all(|row| row.len() == n));
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = &a[r][col] / &a[col][col];
            for c in col..n {
                let delta = &factor * &a[col][c];
                a[r][c] -= delta;
            }
            let delta = &factor * &b[col];
            b[r] -= delta;
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

/// Solves the (possibly non-square) system `a * x = b`. Returns `None` unless
/// the system is consistent with a unique solution, i.e. `a` has full column
/// rank.
pub fn solve_unique(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut pivot_row = 0;
    for col in 0..cols {
        let pivot = (pivot_row..rows).find(|&r| !a[r][col].is_zero())?;
        a.swap(pivot_row, pivot);
        b.swap(pivot_row, pivot);
        let inv = Rational::one() / &a[pivot_row][col];
        for c in col..cols {
            a[pivot_row][c] = &a[pivot_row][c] * &inv;
        }
        b[pivot_row] = &b[pivot_row] * &inv;
        for r in 0..rows {
            if r == pivot_row || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for c in col..cols {
                let delta = &factor * &a[pivot_row][c];
                a[r][c] -= delta;
            }
            let delta = &factor * &b[pivot_row];
            b[r] -= delta;
        }
        pivot_row += 1;
    }
    // leftover rows must read 0 = 0
    if b[pivot_row..].iter().any(|x| !x.is_zero()) {
        return None;
    }
    Some(b[..cols].to_vec())
}

pub fn is_positive(x: &Rational) -> bool {
    x.is_positive()
}
