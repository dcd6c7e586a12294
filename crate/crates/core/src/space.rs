//! Monomial bookkeeping shared by all jets over one variable list.
//!
//! Monomials of total degree `<= capacity` are enumerated in graded-lex order:
//! by degree first, then lexicographically with the first variable dominant
//! (`x^2 > xy > y^2`). Because the order is graded, the monomials of degree
//! `<= m` form a prefix of the list for every `m <= capacity`, so one space
//! serves jets of every lower order.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

/// Exponent vector, one entry per variable.
pub type MultiIndex = Vec<u32>;

/// Total degree of a multi-index.
pub fn degree(m: &[u32]) -> u32 {
    m.iter().sum()
}

/// Graded-lex comparison: lower degree first; within a degree the larger
/// exponent of the earliest variable comes first.
pub fn grlex_cmp(a: &[u32], b: &[u32]) -> Ordering {
    degree(a)
        .cmp(&degree(b))
        .then_with(|| b.iter().cmp(a.iter()))
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of monomials of degree `<= order` in `nvars` variables.
pub fn monomial_count(nvars: usize, order: u32) -> usize {
    binomial(nvars as u64 + order as u64, nvars as u64) as usize
}

const NONE: u32 = u32::MAX;

#[derive(Debug)]
pub struct VarSpace {
    names: Vec<String>,
    capacity: u32,
    monomials: Vec<MultiIndex>,
    index: HashMap<MultiIndex, u32>,
    /// `up[v][i]` = index of `monomials[i] + e_v`, or `NONE` past capacity.
    up: Vec<Vec<u32>>,
    /// `pairs[t]` = all `(i, j)` with `monomials[i] + monomials[j] == monomials[t]`.
    pairs: OnceLock<Vec<Vec<(u32, u32)>>>,
}

impl VarSpace {
    pub fn new<S: AsRef<str>>(names: &[S], capacity: u32) -> Arc<VarSpace> {
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        let n = names.len();
        let mut monomials = Vec::with_capacity(monomial_count(n, capacity));
        for d in 0..=capacity {
            push_degree(n, d, &mut monomials);
        }
        let index: HashMap<MultiIndex, u32> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i as u32))
            .collect();
        let up = (0..n)
            .map(|v| {
                monomials
                    .iter()
                    .map(|m| {
                        let mut s = m.clone();
                        s[v] += 1;
                        index.get(&s).copied().unwrap_or(NONE)
                    })
                    .collect()
            })
            .collect();
        Arc::new(VarSpace {
            names,
            capacity,
            monomials,
            index,
            up,
            pairs: OnceLock::new(),
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn nvars(&self) -> usize {
        self.names.len()
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Number of coefficients of a jet of the given order.
    pub fn len(&self, order: u32) -> usize {
        debug_assert!(order <= self.capacity);
        monomial_count(self.nvars(), order)
    }

    pub fn monomial(&self, i: usize) -> &[u32] {
        &self.monomials[i]
    }

    pub fn monomials(&self, order: u32) -> &[MultiIndex] {
        &self.monomials[..self.len(order)]
    }

    pub fn index_of(&self, m: &[u32]) -> Option<usize> {
        self.index.get(m).map(|&i| i as usize)
    }

    /// Index of `monomials[i] + e_var`, if within capacity.
    pub fn up(&self, var: usize, i: usize) -> Option<usize> {
        match self.up[var][i] {
            NONE => None,
            j => Some(j as usize),
        }
    }

    /// Convolution pairs for target index `t`.
    pub fn pairs(&self, t: usize) -> &[(u32, u32)] {
        &self.pairs.get_or_init(|| self.build_pairs())[t]
    }

    fn build_pairs(&self) -> Vec<Vec<(u32, u32)>> {
        let total = self.monomials.len();
        let mut pairs: Vec<Vec<(u32, u32)>> = vec![Vec::new(); total];
        let mut sum = vec![0u32; self.nvars()];
        for i in 0..total {
            let di = degree(&self.monomials[i]);
            let rest = self.capacity - di;
            // Partners of degree <= rest form a prefix.
            let limit = self.len(rest);
            for j in 0..limit {
                for (s, (a, b)) in sum
                    .iter_mut()
                    .zip(self.monomials[i].iter().zip(&self.monomials[j]))
                {
                    *s = a + b;
                }
                let t = self.index[&sum];
                pairs[t as usize].push((i as u32, j as u32));
            }
        }
        pairs
    }

    /// True when both spaces carry the same variable names.
    pub fn same_vars(&self, other: &VarSpace) -> bool {
        self.names == other.names
    }
}

/// Appends the degree-`d` monomials in `n` variables, in graded-lex order.
fn push_degree(n: usize, d: u32, out: &mut Vec<MultiIndex>) {
    fn rec(n: usize, pos: usize, left: u32, cur: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
        if pos + 1 == n {
            cur[pos] = left;
            out.push(cur.clone());
            return;
        }
        for e in (0..=left).rev() {
            cur[pos] = e;
            rec(n, pos + 1, left - e, cur, out);
        }
        cur[pos] = 0;
    }
    if n == 0 {
        if d == 0 {
            out.push(Vec::new());
        }
        return;
    }
    let mut cur = vec![0; n];
    rec(n, 0, d, &mut cur, out);
}

/// Joins exponents with commas, the key format of serialized jets.
pub fn format_key(m: &[u32]) -> String {
    m.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",")
}

pub fn parse_key(key: &str, nvars: usize) -> Option<MultiIndex> {
    if nvars == 0 {
        return key.trim().is_empty().then(Vec::new);
    }
    let m: Option<MultiIndex> = key.split(',').map(|p| p.trim().parse().ok()).collect();
    m.filter(|m| m.len() == nvars)
}
