//! Reference computations for the integration suites. Everything here works
//! straight from the block returns and closed forms, without going through
//! the library's moment or objective code.

#![allow(dead_code)]

use rand::Rng;

/// Kelly fraction for a +/-1/2 coin with zero cost, one period: `2(2p - 1)`
/// capped at 1.
pub fn kelly_n1(p: f64) -> f64 {
    (2.0 * (2.0 * p - 1.0)).min(1.0)
}

/// Quadratic-approximation weight of the +/-1/2 coin with cost `c` on the
/// coin and none on cash, one period.
pub fn approx_toy_n1(p: f64, c: f64) -> f64 {
    -(4.0 * c - 4.0 * p + 2.0) / (4.0 * c * c + 4.0 * c - 8.0 * c * p + 1.0)
}

/// Same for two-period rebalancing at zero cost.
pub fn approx_toy_n2(p: f64) -> f64 {
    (16.0 * p * p + 16.0 * p - 12.0) / (32.0 * p * p - 16.0 * p + 9.0)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(1/n) mean log(1 + K'x)`; `-inf` off the domain.
pub fn direct_exact(blocks: &[Vec<f64>], k: &[f64], n: usize) -> f64 {
    let mut total = 0.0;
    for x in blocks {
        let g = 1.0 + dot(k, x);
        if g <= 0.0 {
            return f64::NEG_INFINITY;
        }
        total += g.ln();
    }
    total / (blocks.len() * n) as f64
}

/// `(1/n) mean (K'x - (K'x)^2 / 2)`, summed sample by sample.
pub fn direct_quad(blocks: &[Vec<f64>], k: &[f64], n: usize) -> f64 {
    let total: f64 = blocks
        .iter()
        .map(|x| {
            let r = dot(k, x);
            r - 0.5 * r * r
        })
        .sum();
    total / (blocks.len() * n) as f64
}

/// First-order residual of the quadratic problem, from per-sample sums.
pub fn direct_kkt(blocks: &[Vec<f64>], k: &[f64]) -> f64 {
    let m = k.len();
    let s = blocks.len() as f64;
    // gradient of mean(K'x - (K'x)^2/2) is mean(x (1 - K'x))
    let mut grad = vec![0.0; m];
    for x in blocks {
        let r = dot(k, x);
        for i in 0..m {
            grad[i] += x[i] * (1.0 - r) / s;
        }
    }
    let lambda = dot(k, &grad);
    (0..m)
        .map(|i| {
            let d = grad[i] - lambda;
            if k[i] > 1e-9 {
                d.abs()
            } else {
                d.max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Best value of `f` over the simplex lattice with `cells` steps per unit,
/// for two or three assets.
pub fn lattice_max(m: usize, cells: usize, f: impl Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let h = 1.0 / cells as f64;
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut consider = |k: Vec<f64>| {
        let v = f(&k);
        if v > best.0 {
            best = (v, k);
        }
    };
    match m {
        2 => {
            for a in 0..=cells {
                consider(vec![a as f64 * h, (cells - a) as f64 * h]);
            }
        }
        3 => {
            for a in 0..=cells {
                for b in 0..=cells - a {
                    consider(vec![a as f64 * h, b as f64 * h, (cells - a - b) as f64 * h]);
                }
            }
        }
        _ => panic!("lattice oracle handles two or three assets"),
    }
    best
}

/// Central differences of `f` along each coordinate.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, k: &[f64], h: f64) -> Vec<f64> {
    (0..k.len())
        .map(|i| {
            let mut up = k.to_vec();
            let mut down = k.to_vec();
            up[i] += h;
            down[i] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

/// Uniform draw from the open simplex interior, every coordinate at least
/// `floor`.
pub fn interior_point<R: Rng>(rng: &mut R, m: usize, floor: f64) -> Vec<f64> {
    let e: Vec<f64> = (0..m).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    let free = 1.0 - floor * m as f64;
    e.iter().map(|v| floor + free * v / s).collect()
}

/// Writes `timestamp,symbol,price` rows for the given per-period returns.
pub fn prices_csv(symbols: &[&str], returns: &[Vec<f64>]) -> String {
    let mut out = String::from("timestamp,symbol,price\n");
    for (j, sym) in symbols.iter().enumerate() {
        let mut p = 100.0;
        out.push_str(&format!("0,{sym},{p}\n"));
        for (t, r) in returns.iter().enumerate() {
            p *= 1.0 + r[j];
            out.push_str(&format!("{},{sym},{p}\n", t + 1));
        }
    }
    out
}
