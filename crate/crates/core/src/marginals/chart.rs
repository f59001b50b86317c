//! Log-space inside and outside passes over the projective chart, generic
//! in the scalar type so that the same recursions run on dual numbers.

use std::ops::{Add, Mul, Sub};

use crate::decode::ArcScores;

pub(crate) trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self>
{
    fn constant(x: f64) -> Self;
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
}

impl Scalar for f64 {
    fn constant(x: f64) -> Self {
        x
    }
    fn value(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
}

/// Forward-mode dual number `v + d·ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            d: self.d + o.d,
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual {
            v: self.v - o.v,
            d: self.d - o.d,
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
        }
    }
}

impl Scalar for Dual {
    fn constant(x: f64) -> Self {
        Dual { v: x, d: 0.0 }
    }
    fn value(self) -> f64 {
        self.v
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        Dual {
            v: e,
            d: self.d * e,
        }
    }
    fn ln(self) -> Self {
        Dual {
            v: self.v.ln(),
            d: self.d / self.v,
        }
    }
}

fn log_sum_exp<T: Scalar>(terms: &[T]) -> T {
    let max = terms
        .iter()
        .copied()
        .fold(terms[0], |a, b| if b.value() > a.value() { b } else { a });
    let total = terms
        .iter()
        .fold(T::constant(0.0), |acc, &x| acc + (x - max).exp());
    max + total.ln()
}

#[derive(Clone, Copy)]
enum Item {
    CompleteRight,
    CompleteLeft,
    IncompleteRight,
    IncompleteLeft,
}

struct Table<T> {
    nodes: usize,
    cells: [Vec<T>; 4],
}

impl<T: Scalar> Table<T> {
    fn new(nodes: usize, fill: T) -> Self {
        Table {
            nodes,
            cells: std::array::from_fn(|_| vec![fill; nodes * nodes]),
        }
    }

    fn get(&self, item: Item, s: usize, t: usize) -> T {
        self.cells[item as usize][s * self.nodes + t]
    }

    fn set(&mut self, item: Item, s: usize, t: usize, x: T) {
        self.cells[item as usize][s * self.nodes + t] = x;
    }

    fn add(&mut self, item: Item, s: usize, t: usize, x: T) {
        let cell = &mut self.cells[item as usize][s * self.nodes + t];
        *cell = *cell + x;
    }
}

/// Result of both passes: arc marginals in indexer order and `log Z`.
pub(crate) struct Passes<T> {
    pub marginals: Vec<T>,
    pub log_partition: T,
}

/// Runs inside and outside on `arc(h, m)` scores for an `n`-word sentence
/// with root node `0`. Marginals are the adjoints of `log Z` with respect to
/// each incomplete item, which equal `exp(inside + outside − log Z)`.
pub(crate) fn run<T: Scalar>(scores: &ArcScores, lift: impl Fn(usize) -> T) -> Passes<T> {
    let indexer = scores.indexer();
    let n = indexer.n();
    let nodes = n + 1;
    let arc = |h: usize, m: usize| lift(indexer.index(h, m).expect("candidate arc"));

    let zero = T::constant(0.0);
    let mut inside = Table::new(nodes, zero);
    let mut terms = Vec::with_capacity(nodes);
    for width in 1..nodes {
        for s in 0..nodes - width {
            let t = s + width;
            terms.clear();
            terms.extend((s..t).map(|r| {
                inside.get(Item::CompleteRight, s, r) + inside.get(Item::CompleteLeft, r + 1, t)
            }));
            let joined = log_sum_exp(&terms);
            inside.set(Item::IncompleteRight, s, t, joined + arc(s, t));
            if s > 0 {
                inside.set(Item::IncompleteLeft, s, t, joined + arc(t, s));
            }

            terms.clear();
            terms.extend((s + 1..=t).map(|r| {
                inside.get(Item::IncompleteRight, s, r) + inside.get(Item::CompleteRight, r, t)
            }));
            inside.set(Item::CompleteRight, s, t, log_sum_exp(&terms));

            if s > 0 {
                terms.clear();
                terms.extend((s..t).map(|r| {
                    inside.get(Item::CompleteLeft, s, r) + inside.get(Item::IncompleteLeft, r, t)
                }));
                inside.set(Item::CompleteLeft, s, t, log_sum_exp(&terms));
            }
        }
    }
    let log_partition = inside.get(Item::CompleteRight, 0, n);

    // adjoints, widest spans first; complete items of a span feed its
    // incomplete items, so they are handled first
    let mut adj = Table::new(nodes, zero);
    adj.set(Item::CompleteRight, 0, n, T::constant(1.0));
    for width in (1..nodes).rev() {
        for s in 0..nodes - width {
            let t = s + width;

            let a = adj.get(Item::CompleteRight, s, t);
            let total = inside.get(Item::CompleteRight, s, t);
            for r in s + 1..=t {
                let w = (inside.get(Item::IncompleteRight, s, r)
                    + inside.get(Item::CompleteRight, r, t)
                    - total)
                    .exp();
                adj.add(Item::IncompleteRight, s, r, a * w);
                adj.add(Item::CompleteRight, r, t, a * w);
            }

            if s > 0 {
                let a = adj.get(Item::CompleteLeft, s, t);
                let total = inside.get(Item::CompleteLeft, s, t);
                for r in s..t {
                    let w = (inside.get(Item::CompleteLeft, s, r)
                        + inside.get(Item::IncompleteLeft, r, t)
                        - total)
                        .exp();
                    adj.add(Item::CompleteLeft, s, r, a * w);
                    adj.add(Item::IncompleteLeft, r, t, a * w);
                }
            }

            let joined = inside.get(Item::IncompleteRight, s, t) - arc(s, t);
            let mut a = adj.get(Item::IncompleteRight, s, t);
            if s > 0 {
                a = a + adj.get(Item::IncompleteLeft, s, t);
            }
            for r in s..t {
                let w = (inside.get(Item::CompleteRight, s, r)
                    + inside.get(Item::CompleteLeft, r + 1, t)
                    - joined)
                    .exp();
                adj.add(Item::CompleteRight, s, r, a * w);
                adj.add(Item::CompleteLeft, r + 1, t, a * w);
            }
        }
    }

    let marginals = indexer
        .arcs()
        .map(|(_, h, m)| {
            if h < m {
                adj.get(Item::IncompleteRight, h, m)
            } else {
                adj.get(Item::IncompleteLeft, m, h)
            }
        })
        .collect();
    Passes {
        marginals,
        log_partition,
    }
}
