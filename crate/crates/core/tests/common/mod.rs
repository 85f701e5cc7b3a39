#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rcp_core::lmi::{is_strictly_feasible, LmiProblem};

pub fn sdplib_dir() -> std::path::PathBuf {
    match std::env::var_os("SDPLIB_DIR") {
        Some(d) => d.into(),
        None => std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sdplib"),
    }
}

pub fn sdplib_file(name: &str) -> Option<String> {
    std::fs::read_to_string(sdplib_dir().join(format!("{name}.dat-s"))).ok()
}

/// Feasible along the line with an optional cut `c·x ≤ t`.
fn inside(p: &LmiProblem, cut: Option<(&DVector<f64>, f64)>, x: &DVector<f64>) -> bool {
    is_strictly_feasible(p, x) && cut.is_none_or(|(c, t)| c.dot(x) <= t)
}

/// Boundary parameter along `sign·v` found by doubling then bisection on
/// strict feasibility. `+∞` if still feasible at 1e12.
pub fn bisect_boundary(
    p: &LmiProblem,
    cut: Option<(&DVector<f64>, f64)>,
    y: &DVector<f64>,
    v: &DVector<f64>,
    sign: f64,
) -> f64 {
    let at = |l: f64| y + v * (sign * l);
    let mut hi = 1e-3;
    while inside(p, cut, &at(hi)) {
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if inside(p, cut, &at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    sign * 0.5 * (lo + hi)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// Polynomial with real coefficients, lowest degree first.
pub type Poly = Vec<f64>;

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &mut Poly, b: &Poly, sign: f64) {
    if a.len() < b.len() {
        a.resize(b.len(), 0.0);
    }
    for (i, y) in b.iter().enumerate() {
        a[i] += sign * y;
    }
}

fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<(Vec<usize>, f64)>) {
        let n = used.len();
        if prefix.len() == n {
            let mut inv = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if prefix[i] > prefix[j] {
                        inv += 1;
                    }
                }
            }
            out.push((prefix.clone(), if inv % 2 == 0 { 1.0 } else { -1.0 }));
            return;
        }
        for k in 0..n {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                rec(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// `det(Σ_k B_k λ^k)` by Leibniz expansion over permutations.
pub fn det_polynomial(coeffs: &[DMatrix<f64>]) -> Poly {
    let m = coeffs[0].nrows();
    let entry = |i: usize, j: usize| -> Poly { coeffs.iter().map(|b| b[(i, j)]).collect() };
    let mut det = vec![0.0];
    for (perm, sign) in permutations(m) {
        let mut term = vec![1.0];
        for (i, &j) in perm.iter().enumerate() {
            term = poly_mul(&term, &entry(i, j));
        }
        poly_add(&mut det, &term, sign);
    }
    det
}

fn horner(p: &[Complex64], z: Complex64) -> Complex64 {
    p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
}

/// All roots of `p` by Aberth iteration followed by Newton polishing.
pub fn poly_roots(p: &Poly) -> Vec<Complex64> {
    let mut p: Vec<f64> = p.clone();
    while p.len() > 1 && *p.last().unwrap() == 0.0 {
        p.pop();
    }
    let deg = p.len() - 1;
    if deg == 0 {
        return vec![];
    }
    let lead = p[deg];
    let monic: Vec<Complex64> = p.iter().map(|c| Complex64::new(c / lead, 0.0)).collect();
    let deriv: Vec<Complex64> = (1..=deg).map(|k| monic[k] * k as f64).collect();
    let radius = 1.0 + monic[..deg].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| Complex64::from_polar(radius * 0.5, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / deg as f64))
        .collect();
    for _ in 0..2000 {
        let mut moved = 0.0f64;
        for k in 0..deg {
            let ratio = horner(&monic, z[k]) / horner(&deriv, z[k]);
            let repulsion: Complex64 = (0..deg).filter(|&j| j != k).map(|j| 1.0 / (z[k] - z[j])).sum();
            let step = ratio / (1.0 - ratio * repulsion);
            if step.is_finite() {
                z[k] -= step;
                moved = moved.max(step.norm() / z[k].norm().max(1.0));
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    for r in &mut z {
        for _ in 0..3 {
            let d = horner(&deriv, *r);
            if d.norm() == 0.0 {
                break;
            }
            let step = horner(&monic, *r) / d;
            if step.is_finite() {
                *r -= step;
            }
        }
    }
    z
}

/// Greedy nearest matching of two multisets; largest relative mismatch.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (k, d) = b
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, y)| (k, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[k] = true;
        worst = worst.max(d / x.norm().max(1.0));
    }
    worst
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut a = m.clone();
    let mut d = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs())).unwrap();
        if a[(piv, col)] == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap_rows(piv, col);
            d = -d;
        }
        d *= a[(col, col)];
        for r in col + 1..n {
            let f = a[(r, col)] / a[(col, col)];
            for k in col..n {
                a[(r, k)] -= f * a[(col, k)];
            }
        }
    }
    d
}

/// Ascending eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _ in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut e: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Reference optimum of `min c·x s.t. F(x) ≺ 0` by a damped-Newton
/// log-barrier method. The gap bound is `dim / t` at exit.
pub fn barrier_optimum(p: &LmiProblem, x0: &DVector<f64>) -> (f64, DVector<f64>) {
    let n = p.n();
    let dim = p.dim() as f64;
    let mut x = x0.clone();
    let mut t = 1.0;
    let phi = |x: &DVector<f64>, t: f64| -> f64 {
        let s = -p.eval(x).unwrap();
        match s.clone().cholesky() {
            Some(ch) => {
                let logdet: f64 = 2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
                t * p.c().dot(x) - logdet
            }
            None => f64::INFINITY,
        }
    };
    while dim / t > 1e-11 {
        for _ in 0..200 {
            let s = -p.eval(&x).unwrap();
            let sinv = s.clone().cholesky().unwrap().inverse();
            let mut g = p.c() * t;
            let mut h = DMatrix::zeros(n, n);
            let sf: Vec<DMatrix<f64>> = (1..=n).map(|i| &sinv * p.coefficient(i)).collect();
            for i in 0..n {
                g[i] += sf[i].trace();
                for j in 0..=i {
                    let v = (&sf[i] * &sf[j]).trace();
                    h[(i, j)] = v;
                    h[(j, i)] = v;
                }
            }
            let dx = -h.clone().cholesky().unwrap().solve(&g);
            let dec = -g.dot(&dx);
            if dec / 2.0 < 1e-14 {
                break;
            }
            let f0 = phi(&x, t);
            let mut step = 1.0;
            loop {
                let cand = &x + &dx * step;
                if phi(&cand, t) <= f0 - 0.25 * step * dec {
                    x = cand;
                    break;
                }
                step *= 0.5;
                if step < 1e-20 {
                    break;
                }
            }
            if step < 1e-20 {
                break;
            }
        }
        t *= 8.0;
    }
    (p.c().dot(&x), x)
}

/// Area of a convex polygon (counter-clockwise vertices).
pub fn polygon_area(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len();
    let mut a = 0.0;
    for i in 0..n {
        let (x1, y1) = pts[i];
        let (x2, y2) = pts[(i + 1) % n];
        a += x1 * y2 - x2 * y1;
    }
    0.5 * a.abs()
}

/// Part of a convex polygon with `u·(x - p) ≤ 0`.
pub fn clip_polygon(pts: &[(f64, f64)], u: (f64, f64), p: (f64, f64)) -> Vec<(f64, f64)> {
    let side = |q: (f64, f64)| u.0 * (q.0 - p.0) + u.1 * (q.1 - p.1);
    let mut out = Vec::new();
    let n = pts.len();
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let (sa, sb) = (side(a), side(b));
        if sa <= 0.0 {
            out.push(a);
        }
        if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
            let t = sa / (sa - sb);
            out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
        }
    }
    out
}
