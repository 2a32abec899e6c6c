//! Cooperative analysis of transferable-utility characteristic functions.
//!
//! Coalitions are bitmasks over players `0..n`. Core emptiness is decided
//! exactly for `n <= 4` by scanning every minimal balanced collection
//! (Bondareva-Shapley); non-empty verdicts carry an exact core imputation
//! found by vertex enumeration of `{x : x(S) >= v(S)}`. For `n` of 5 or 6 a
//! seeded sampler searches imputations and the verdict is labelled
//! approximate.

use std::fmt;
use std::sync::OnceLock;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{rat, rat_int, solve_square, solve_unique, to_f64, Rational};

pub const MIN_PLAYERS: usize = 2;
pub const MAX_PLAYERS: usize = 6;
pub const MAX_EXACT_PLAYERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Coalition(pub u32);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn grand(n: usize) -> Coalition {
        Coalition((1u32 << n) - 1)
    }

    pub fn singleton(i: usize) -> Coalition {
        Coalition(1 << i)
    }

    pub fn from_members(members: &[usize]) -> Coalition {
        Coalition(members.iter().fold(0, |m, &i| m | (1 << i)))
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_disjoint(self, other: Coalition) -> bool {
        self.0 & other.0 == 0
    }

    pub fn union(self, other: Coalition) -> Coalition {
        Coalition(self.0 | other.0)
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&i| self.contains(i))
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.members().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Coalition values indexed by bitmask, with `v(empty) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicFunction {
    n: usize,
    values: Vec<f64>,
}

impl CharacteristicFunction {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if !(MIN_PLAYERS..=MAX_PLAYERS).contains(&n) {
            return Err(Error::Domain(format!(
                "characteristic function needs {MIN_PLAYERS}..={MAX_PLAYERS} players, got {n}"
            )));
        }
        if values.len() != 1 << n {
            return Err(Error::LengthMismatch {
                what: "coalition values",
                expected: 1 << n,
                found: values.len(),
            });
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("coalition value {x} is not finite")));
        }
        if values[0] != 0.0 {
            return Err(Error::Domain(format!(
                "v(empty) must be 0, got {}",
                values[0]
            )));
        }
        Ok(CharacteristicFunction { n, values })
    }

    /// Builds `v` from a function of the coalition; the empty coalition is
    /// always assigned 0.
    pub fn from_fn<F: FnMut(Coalition) -> f64>(n: usize, mut f: F) -> Result<Self> {
        let size = 1usize.checked_shl(n as u32).unwrap_or(0);
        let values = (0..size)
            .map(|m| if m == 0 { 0.0 } else { f(Coalition(m as u32)) })
            .collect();
        Self::new(n, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self, s: Coalition) -> f64 {
        self.values[s.0 as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grand_value(&self) -> f64 {
        self.value(Coalition::grand(self.n))
    }

    /// Non-empty coalitions in increasing mask order.
    pub fn coalitions(&self) -> impl Iterator<Item = Coalition> {
        (1..(1u32 << self.n)).map(Coalition)
    }

    pub fn scaled(&self, c: f64) -> Self {
        CharacteristicFunction {
            n: self.n,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Adds `shift[i]` for every member `i` of each coalition (a strategically
    /// equivalent game).
    pub fn shifted(&self, shift: &[f64]) -> Self {
        let values = (0..self.values.len())
            .map(|m| {
                let s = Coalition(m as u32);
                self.values[m] + s.members().map(|i| shift[i]).sum::<f64>()
            })
            .collect();
        CharacteristicFunction { n: self.n, values }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperadditivityAudit {
    pub superadditive: bool,
    /// First `(S, T)` in mask order with `v(S u T) < v(S) + v(T)`.
    pub counterexample: Option<(Coalition, Coalition)>,
}

pub fn is_superadditive(cf: &CharacteristicFunction) -> SuperadditivityAudit {
    for s in cf.coalitions() {
        for t in cf.coalitions().filter(|t| t.0 > s.0 && s.is_disjoint(*t)) {
            if cf.value(s.union(t)) < cf.value(s) + cf.value(t) {
                return SuperadditivityAudit {
                    superadditive: false,
                    counterexample: Some((s, t)),
                };
            }
        }
    }
    SuperadditivityAudit {
        superadditive: true,
        counterexample: None,
    }
}

/// A minimal balanced collection over proper coalitions, with its unique
/// strictly positive balancing weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedCollection {
    pub coalitions: Vec<Coalition>,
    pub weights: Vec<Rational>,
}

impl BalancedCollection {
    /// Every player's memberships carry total weight exactly 1.
    pub fn is_balanced(&self, n: usize) -> bool {
        self.weights.iter().all(|w| w > &Rational::zero())
            && (0..n).all(|i| {
                let total: Rational = self
                    .coalitions
                    .iter()
                    .zip(&self.weights)
                    .filter(|(s, _)| s.contains(i))
                    .map(|(_, w)| w.clone())
                    .sum();
                total.is_one()
            })
    }

    pub fn weighted_value(&self, cf: &CharacteristicFunction) -> Rational {
        self.coalitions
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w * rat(cf.value(*s)))
            .sum()
    }
}

fn enumerate_minimal_balanced(n: usize) -> Vec<BalancedCollection> {
    let proper: Vec<Coalition> = (1..(1u32 << n) - 1).map(Coalition).collect();
    let mut out = Vec::new();
    let mut chosen = Vec::with_capacity(n);
    fn recurse(
        n: usize,
        proper: &[Coalition],
        start: usize,
        chosen: &mut Vec<Coalition>,
        out: &mut Vec<BalancedCollection>,
    ) {
        if !chosen.is_empty() {
            // incidence matrix: rows = players, columns = chosen coalitions
            let a: Vec<Vec<Rational>> = (0..n)
                .map(|i| {
                    chosen
                        .iter()
                        .map(|s| if s.contains(i) { Rational::one() } else { Rational::zero() })
                        .collect()
                })
                .collect();
            let b = vec![Rational::one(); n];
            if let Some(w) = solve_unique(a, b) {
                if w.iter().all(|x| x > &Rational::zero()) {
                    out.push(BalancedCollection {
                        coalitions: chosen.clone(),
                        weights: w,
                    });
                }
            }
        }
        if chosen.len() == n {
            return;
        }
        for k in start..proper.len() {
            chosen.push(proper[k]);
            recurse(n, proper, k + 1, chosen, out);
            chosen.pop();
        }
    }
    recurse(n, &proper, 0, &mut chosen, &mut out);
    out
}

/// All minimal balanced collections of proper coalitions for `2 <= n <= 4`,
/// computed once and cached.
pub fn minimal_balanced_collections(n: usize) -> Result<&'static [BalancedCollection]> {
    static CACHE: [OnceLock<Vec<BalancedCollection>>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    if !(MIN_PLAYERS..=MAX_EXACT_PLAYERS).contains(&n) {
        return Err(Error::Domain(format!(
            "minimal balanced collections are tabulated for n in 2..=4, got {n}"
        )));
    }
    Ok(CACHE[n - MIN_PLAYERS].get_or_init(|| enumerate_minimal_balanced(n)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoreMode {
    Exact,
    Approximate,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoreCertificate {
    /// A core allocation: efficient and unblocked by every coalition.
    Imputation(Vec<Rational>),
    /// A balanced collection whose weighted values exceed `v(N)`.
    Balanced {
        collection: BalancedCollection,
        weighted_value: Rational,
        grand_value: Rational,
    },
    /// Approximate mode found no core point among `samples` draws.
    NoPointFound { samples: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoreVerdict {
    pub empty: bool,
    pub mode: CoreMode,
    pub certificate: CoreCertificate,
}

impl CoreVerdict {
    /// Re-checks the certificate in exact arithmetic. Approximate empty
    /// verdicts have nothing to check and return `false`.
    pub fn verify(&self, cf: &CharacteristicFunction) -> bool {
        match (&self.certificate, self.empty) {
            (CoreCertificate::Imputation(x), false) => is_core_point(cf, x),
            (
                CoreCertificate::Balanced {
                    collection,
                    weighted_value,
                    grand_value,
                },
                true,
            ) => {
                collection.is_balanced(cf.n())
                    && *weighted_value == collection.weighted_value(cf)
                    && *grand_value == rat(cf.grand_value())
                    && weighted_value > grand_value
            }
            _ => false,
        }
    }
}

/// Exact membership test: `x(N) = v(N)` and `x(S) >= v(S)` for every `S`.
pub fn is_core_point(cf: &CharacteristicFunction, x: &[Rational]) -> bool {
    if x.len() != cf.n() {
        return false;
    }
    let grand = Coalition::grand(cf.n());
    cf.coalitions().all(|s| {
        let xs: Rational = s.members().map(|i| x[i].clone()).sum();
        let vs = rat(cf.value(s));
        if s == grand {
            xs == vs
        } else {
            xs >= vs
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            samples: 20_000,
            seed: 0x5eed,
        }
    }
}

pub fn core_is_empty(cf: &CharacteristicFunction) -> Result<CoreVerdict> {
    core_is_empty_with(cf, &SamplerConfig::default())
}

/// Exact verdict for `n <= 4`, sampled verdict for `n` of 5 or 6.
pub fn core_is_empty_with(cf: &CharacteristicFunction, sampler: &SamplerConfig) -> Result<CoreVerdict> {
    if cf.n() <= MAX_EXACT_PLAYERS {
        return exact_core(cf);
    }
    Ok(match sample_core_point(cf, sampler) {
        Some(x) => CoreVerdict {
            empty: false,
            mode: CoreMode::Approximate,
            certificate: CoreCertificate::Imputation(x),
        },
        None => CoreVerdict {
            empty: true,
            mode: CoreMode::Approximate,
            certificate: CoreCertificate::NoPointFound {
                samples: sampler.samples,
            },
        },
    })
}

fn exact_core(cf: &CharacteristicFunction) -> Result<CoreVerdict> {
    let grand_value = rat(cf.grand_value());
    let mut worst: Option<(Rational, &BalancedCollection)> = None;
    for bc in minimal_balanced_collections(cf.n())? {
        let w = bc.weighted_value(cf);
        if w > grand_value && worst.as_ref().is_none_or(|(best, _)| w > *best) {
            worst = Some((w, bc));
        }
    }
    if let Some((weighted_value, collection)) = worst {
        return Ok(CoreVerdict {
            empty: true,
            mode: CoreMode::Exact,
            certificate: CoreCertificate::Balanced {
                collection: collection.clone(),
                weighted_value,
                grand_value,
            },
        });
    }
    let x = least_core_vertex(cf).ok_or_else(|| {
        Error::Domain("no vertex of the coalition constraints could be found".into())
    })?;
    let total: Rational = x.iter().cloned().sum();
    if total > grand_value {
        // Duality says the balanced scan above would have caught this.
        return Err(Error::Domain(
            "balanced-collection scan and vertex search disagree".into(),
        ));
    }
    let mut x = x;
    x[0] += grand_value - total;
    Ok(CoreVerdict {
        empty: false,
        mode: CoreMode::Exact,
        certificate: CoreCertificate::Imputation(x),
    })
}

/// Vertex of `{x : x(S) >= v(S) for all proper S}` minimizing `x(N)`.
fn least_core_vertex(cf: &CharacteristicFunction) -> Option<Vec<Rational>> {
    let n = cf.n();
    let proper: Vec<Coalition> = (1..(1u32 << n) - 1).map(Coalition).collect();
    let rows: Vec<Vec<Rational>> = proper
        .iter()
        .map(|s| (0..n).map(|i| if s.contains(i) { Rational::one() } else { Rational::zero() }).collect())
        .collect();
    let rhs: Vec<Rational> = proper.iter().map(|s| rat(cf.value(*s))).collect();

    let feasible = |x: &[Rational]| {
        proper.iter().zip(&rhs).all(|(s, v)| {
            let xs: Rational = s.members().map(|i| x[i].clone()).sum();
            xs >= *v
        })
    };

    let mut best: Option<(Rational, Vec<Rational>)> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<Rational>> = idx.iter().map(|&k| rows[k].clone()).collect();
        let b: Vec<Rational> = idx.iter().map(|&k| rhs[k].clone()).collect();
        if let Some(x) = solve_square(a, b) {
            if feasible(&x) {
                let total: Rational = x.iter().cloned().sum();
                if best.as_ref().is_none_or(|(t, _)| total < *t) {
                    best = Some((total, x));
                }
            }
        }
        // next n-combination of proper.len()
        let m = proper.len();
        let mut k = n;
        while k > 0 && idx[k - 1] == m - n + k - 1 {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        idx[k - 1] += 1;
        for j in k..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
    best.map(|(_, x)| x)
}

/// Rejection sampler over imputations. A returned point is an exactly
/// verified core allocation.
pub fn sample_core_point(cf: &CharacteristicFunction, cfg: &SamplerConfig) -> Option<Vec<Rational>> {
    let n = cf.n();
    let singles: Vec<f64> = (0..n).map(|i| cf.value(Coalition::singleton(i))).collect();
    let surplus = cf.grand_value() - singles.iter().sum::<f64>();
    if surplus < 0.0 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = vec![0.0; n];
    for _ in 0..cfg.samples {
        // uniform point on the simplex via normalized exponentials
        let mut total = 0.0;
        for xi in x.iter_mut() {
            let u: f64 = rng.random::<f64>();
            *xi = -(1.0 - u).ln();
            total += *xi;
        }
        for (xi, s) in x.iter_mut().zip(&singles) {
            *xi = s + surplus * *xi / total;
        }
        let passes_float = cf.coalitions().all(|s| {
            let xs: f64 = s.members().map(|i| x[i]).sum();
            xs >= cf.value(s) - 1e-9 * (1.0 + cf.value(s).abs())
        });
        if !passes_float {
            continue;
        }
        if let Some(point) = exact_core_point_from(cf, &x) {
            return Some(point);
        }
    }
    None
}

/// Lifts a float candidate to an exact core point: every proper coalition
/// must be satisfied exactly and any slack up to `v(N)` goes to player 0.
fn exact_core_point_from(cf: &CharacteristicFunction, x: &[f64]) -> Option<Vec<Rational>> {
    let n = cf.n();
    let mut xr: Vec<Rational> = x.iter().map(|&v| rat(v)).collect();
    let grand = Coalition::grand(n);
    for s in cf.coalitions().filter(|s| *s != grand) {
        let xs: Rational = s.members().map(|i| xr[i].clone()).sum();
        if xs < rat(cf.value(s)) {
            return None;
        }
    }
    let total: Rational = xr.iter().cloned().sum();
    let gv = rat(cf.grand_value());
    if total > gv {
        return None;
    }
    xr[0] += gv - total;
    Some(xr)
}

/// Exact Shapley value: average marginal contribution over all orderings,
/// computed with the equivalent subset weights `|S|! (n-|S|-1)! / n!`.
pub fn shapley_value_exact(cf: &CharacteristicFunction) -> Vec<Rational> {
    let n = cf.n();
    let fact = |k: usize| -> i64 { (1..=k as i64).product() };
    let n_fact = rat_int(fact(n));
    (0..n)
        .map(|i| {
            let me = Coalition::singleton(i);
            (0..(1u32 << n))
                .map(Coalition)
                .filter(|s| !s.contains(i))
                .map(|s| {
                    let w = rat_int(fact(s.len()) * fact(n - s.len() - 1)) / &n_fact;
                    w * (rat(cf.value(s.union(me))) - rat(cf.value(s)))
                })
                .sum()
        })
        .collect()
}

pub fn shapley_value(cf: &CharacteristicFunction) -> Vec<f64> {
    shapley_value_exact(cf).iter().map(to_f64).collect()
}
