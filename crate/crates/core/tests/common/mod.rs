//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use fwsparse::dictionary::{Dictionary, DictionaryMetrics};
use fwsparse::pursuit::Vertex;
use fwsparse::rng::derive_seed;
use fwsparse::synth::{gen_dictionary, gen_instance, SparseInstance, SynthConfig};
use nalgebra::{DMatrix, DVector};

/// One seeded Gaussian trial. `m = None` uses the dictionary's own `m_star`.
pub struct Trial {
    pub dict: Dictionary,
    pub metrics: DictionaryMetrics,
    pub inst: SparseInstance,
}

pub fn trial(d: usize, n: usize, m: Option<usize>, base: u64, index: u64) -> Trial {
    let mut cfg = SynthConfig {
        d,
        n,
        m: 0,
        dict_seed: derive_seed(base, 0, index),
        signal_seed: derive_seed(base, 1, index),
    };
    let dict = gen_dictionary(&cfg).unwrap();
    let metrics = DictionaryMetrics::new(&dict);
    cfg.m = m.unwrap_or(metrics.m_star());
    let inst = gen_instance(&dict, &cfg).unwrap();
    Trial {
        dict,
        metrics,
        inst,
    }
}

// ---- double-double arithmetic ----

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    Dd { hi: s, lo: err }
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd {
        hi: s,
        lo: b - (s - a),
    }
}

fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    Dd {
        hi: p,
        lo: a.mul_add(b, -p),
    }
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn from(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }

    pub fn add(self, o: Dd) -> Dd {
        let s = two_sum(self.hi, o.hi);
        let t = two_sum(self.lo, o.lo);
        let s = quick_two_sum(s.hi, s.lo + t.hi);
        quick_two_sum(s.hi, s.lo + t.lo)
    }

    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let p = two_prod(self.hi, o.hi);
        let lo = p.lo + (self.hi * o.lo + self.lo * o.hi);
        quick_two_sum(p.hi, lo)
    }

    pub fn lt(self, o: Dd) -> bool {
        self.hi < o.hi || (self.hi == o.hi && self.lo < o.lo)
    }
}

/// `||y - Phi (x + gamma (s - x))||^2` evaluated in double-double from
/// the raw dictionary entries.
pub fn objective_dd(
    dict: &Dictionary,
    y: &DVector<f64>,
    x: &DVector<f64>,
    s: Vertex,
    gamma: f64,
) -> Dd {
    let g = Dd::from(gamma);
    let one_minus = Dd::from(1.0).sub(g);
    // w = (1 - gamma) x + gamma s, only on nonzero coordinates
    let mut w: Vec<(usize, Dd)> = x
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, v)| (j, one_minus.mul(Dd::from(*v))))
        .collect();
    let gs = g.mul(Dd::from(s.value));
    match w.iter_mut().find(|(j, _)| *j == s.atom) {
        Some((_, v)) => *v = v.add(gs),
        None => w.push((s.atom, gs)),
    }
    let a = dict.atoms();
    let mut total = Dd::ZERO;
    for i in 0..dict.d() {
        let mut z = Dd::from(y[i]);
        for &(j, wj) in &w {
            z = z.sub(wj.mul(Dd::from(a[(i, j)])));
        }
        total = total.add(z.mul(z));
    }
    total
}

/// Golden-section minimization of [`objective_dd`] over `gamma` in [0, 1],
/// bracketing to width `1e-13`.
pub fn golden_gamma(dict: &Dictionary, y: &DVector<f64>, x: &DVector<f64>, s: Vertex) -> f64 {
    let f = |g: f64| objective_dd(dict, y, x, s, g);
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > 1e-13 {
        if fc.lt(fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    // the ends of [0, 1] are candidates too
    let mut best = (mid, f(mid));
    for g in [0.0, 1.0] {
        let v = f(g);
        if v.lt(best.1) {
            best = (g, v);
        }
    }
    best.0
}

// ---- l1-ball projected gradient ----

/// Euclidean projection onto `{x : ||x||_1 <= beta}` by sorting (Duchi et al.).
pub fn project_l1_ball(v: &DVector<f64>, beta: f64) -> DVector<f64> {
    if v.lp_norm(1) <= beta {
        return v.clone();
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - beta) / (j + 1) as f64;
        if uj > t {
            theta = t;
        }
    }
    v.map(|x| x.signum() * (x.abs() - theta).max(0.0))
}

pub fn half_sq_residual(dict: &Dictionary, y: &DVector<f64>, x: &DVector<f64>) -> f64 {
    0.5 * (y - dict.atoms() * x).norm_squared()
}

/// Frank-Wolfe duality gap `max_{s in ball} <grad, x - s>`, an upper bound
/// on the objective suboptimality of a feasible `x`.
pub fn fw_gap(dict: &Dictionary, y: &DVector<f64>, x: &DVector<f64>, beta: f64) -> f64 {
    let r = y - dict.atoms() * x;
    let c = dict.atoms().transpose() * r;
    beta * c.amax() - x.dot(&c)
}

/// Accelerated projected gradient with step `1/L` and adaptive restart,
/// run until the duality gap drops to `gap_tol`.
pub fn pgd_solve(
    dict: &Dictionary,
    y: &DVector<f64>,
    beta: f64,
    gap_tol: f64,
    max_iters: usize,
) -> (DVector<f64>, f64) {
    let a = dict.atoms();
    let lip = {
        let s = a.clone().svd(false, false).singular_values;
        s.max() * s.max()
    };
    let n = dict.n();
    let mut x = DVector::zeros(n);
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut f_prev = half_sq_residual(dict, y, &x);
    for _ in 0..max_iters {
        let grad = a.transpose() * (a * &z - y);
        let x_new = project_l1_ball(&(&z - grad / lip), beta);
        let f_new = half_sq_residual(dict, y, &x_new);
        if f_new > f_prev {
            // restart momentum
            t = 1.0;
            z = x.clone();
            continue;
        }
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &x_new + (&x_new - &x) * ((t - 1.0) / t_new);
        x = x_new;
        t = t_new;
        f_prev = f_new;
        if fw_gap(dict, y, &x, beta) <= gap_tol {
            break;
        }
    }
    let gap = fw_gap(dict, y, &x, beta);
    (x, gap)
}

// ---- exhaustive Babel ----

fn combos(
    pool: &[usize],
    m: usize,
    start: usize,
    cur: &mut Vec<usize>,
    f: &mut dyn FnMut(&[usize]),
) {
    if cur.len() == m {
        f(cur);
        return;
    }
    for k in start..pool.len() {
        cur.push(pool[k]);
        combos(pool, m, k + 1, cur, f);
        cur.pop();
    }
}

/// `mu1(m) = max_{|L| = m} max_{i not in L} sum_{j in L} |G_ij|` by
/// enumerating every `(i, L)` pair. Each subset sum is accumulated in
/// decreasing order of its terms.
pub fn babel_exhaustive(gram: &DMatrix<f64>, m: usize) -> f64 {
    let n = gram.ncols();
    let mut best = 0.0f64;
    for i in 0..n {
        let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        if m > others.len() {
            continue;
        }
        combos(&others, m, 0, &mut Vec::new(), &mut |set| {
            let mut vals: Vec<f64> = set.iter().map(|&j| gram[(i, j)].abs()).collect();
            vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let s = vals.iter().fold(0.0, |acc, v| acc + v);
            best = best.max(s);
        });
    }
    best
}

/// Coherence by a plain double loop over column dot products.
pub fn coherence_brute(dict: &Dictionary) -> f64 {
    let a = dict.atoms();
    let (d, n) = (dict.d(), dict.n());
    let cols: Vec<&[f64]> = (0..n).map(|j| &a.as_slice()[j * d..(j + 1) * d]).collect();
    let mut best = 0.0f64;
    for j in 0..n {
        for k in (j + 1)..n {
            let dot: f64 = cols[j].iter().zip(cols[k]).map(|(p, q)| p * q).sum();
            best = best.max(dot.abs());
        }
    }
    best
}

// ---- dense least squares ----

/// Solves `A z = b` for square `A` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut z = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = ((row + 1)..n).map(|k| a[row][k] * z[k]).sum();
        z[row] = (b[row] - s) / a[row][row];
    }
    z
}

/// Least-squares coefficients of `y` on the atoms `cols` via the normal equations.
pub fn lstsq_on(dict: &Dictionary, y: &DVector<f64>, cols: &[usize]) -> Vec<f64> {
    let g: Vec<Vec<f64>> = cols
        .iter()
        .map(|&i| {
            cols.iter()
                .map(|&j| dict.atom(i).dot(&dict.atom(j)))
                .collect()
        })
        .collect();
    let rhs: Vec<f64> = cols.iter().map(|&i| dict.atom(i).dot(y)).collect();
    gauss_solve(g, rhs)
}

/// Norm of the component of `r` orthogonal to the span of `cols`.
pub fn off_span_norm(dict: &Dictionary, r: &DVector<f64>, cols: &[usize]) -> f64 {
    if cols.is_empty() {
        return r.norm();
    }
    let z = lstsq_on(dict, r, cols);
    let mut p = r.clone();
    for (&j, &c) in cols.iter().zip(&z) {
        p -= dict.atom(j) * c;
    }
    p.norm()
}
