//! Dense BFGS with a strong-Wolfe line search.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when the gradient sup-norm falls below this.
    pub grad_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            grad_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `f`; `fg(x, g)` returns `f(x)` and writes `∇f(x)` into `g`.
pub fn bfgs<F>(mut fg: F, x0: &[f64], opts: &BfgsOptions) -> BfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = fg(&x, &mut g);
    // inverse Hessian approximation, row-major
    let mut h = vec![0.0; n * n];
    let reset = |h: &mut [f64], scale: f64| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            h[i * n + i] = scale;
        }
    };
    reset(&mut h, 1.0);
    let mut p = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut hy = vec![0.0; n];
    let mut fresh = true;

    for iter in 0..opts.max_iter {
        let gn = sup(&g);
        if gn <= opts.grad_tol || !f.is_finite() {
            return BfgsResult {
                x,
                f,
                grad_norm: gn,
                iterations: iter,
                converged: gn <= opts.grad_tol && f.is_finite(),
            };
        }
        for i in 0..n {
            p[i] = -dot(&h[i * n..(i + 1) * n], &g);
        }
        let mut slope = dot(&p, &g);
        if slope >= 0.0 {
            reset(&mut h, 1.0);
            p.iter_mut().zip(&g).for_each(|(pi, gi)| *pi = -gi);
            slope = dot(&p, &g);
            fresh = true;
        }
        let step0 = if fresh { (1.0 / sup(&p)).min(1.0) } else { 1.0 };
        let ls = line_search(&mut fg, &x, f, &g, &p, slope, step0, &mut x_new, &mut g_new);
        let Some(f_new) = ls else {
            if fresh {
                // steepest descent also failed: the iterate is as good as it gets
                return BfgsResult {
                    x,
                    f,
                    grad_norm: gn,
                    iterations: iter,
                    converged: false,
                };
            }
            reset(&mut h, 1.0);
            fresh = true;
            continue;
        };
        for i in 0..n {
            s[i] = x_new[i] - x[i];
            y[i] = g_new[i] - g[i];
        }
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if fresh {
                let scale = sy / dot(&y, &y);
                reset(&mut h, scale);
            }
            for i in 0..n {
                hy[i] = dot(&h[i * n..(i + 1) * n], &y);
            }
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            let c = (1.0 + rho * yhy) * rho;
            // H ← H − ρ(s yᵀH + H y sᵀ) + ρ²(yᵀHy) s sᵀ + ρ s sᵀ
            for i in 0..n {
                let row = &mut h[i * n..(i + 1) * n];
                for j in 0..n {
                    row[j] += c * s[i] * s[j] - rho * (s[i] * hy[j] + hy[i] * s[j]);
                }
            }
            fresh = false;
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
    }
    let gn = sup(&g);
    BfgsResult {
        x,
        f,
        grad_norm: gn,
        iterations: opts.max_iter,
        converged: gn <= opts.grad_tol,
    }
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
/// Relative band within which function values are treated as equal.
const F_NOISE: f64 = 1e-12;

#[derive(Clone, Copy)]
enum Trial {
    Accept,
    Short,
    Far,
}

/// Strong-Wolfe test; inside the rounding band of `f0` the decision uses the
/// directional derivative alone.
fn classify(f0: f64, slope0: f64, a: f64, fa: f64, da: f64) -> Trial {
    if !fa.is_finite() || !da.is_finite() {
        return Trial::Far;
    }
    let flat = fa - f0 <= F_NOISE * f0.abs();
    if fa > f0 + C1 * a * slope0 && !flat {
        return Trial::Far;
    }
    if da.abs() <= -C2 * slope0 {
        Trial::Accept
    } else if da > 0.0 {
        Trial::Far
    } else {
        Trial::Short
    }
}

/// Line search along `p`; on success leaves the accepted point in `x_out`/`g_out`.
#[allow(clippy::too_many_arguments)]
fn line_search<F>(
    fg: &mut F,
    x: &[f64],
    f0: f64,
    _g0: &[f64],
    p: &[f64],
    slope0: f64,
    step0: f64,
    x_out: &mut [f64],
    g_out: &mut [f64],
) -> Option<f64>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let mut eval = |a: f64, xo: &mut [f64], go: &mut [f64]| -> (f64, f64) {
        for i in 0..x.len() {
            xo[i] = x[i] + a * p[i];
        }
        let f = fg(xo, go);
        (f, dot(go, p))
    };
    let mut lo = (0.0, f0, slope0);
    let mut a = step0;
    for _ in 0..40 {
        let (fa, da) = eval(a, x_out, g_out);
        match classify(f0, slope0, a, fa, da) {
            Trial::Accept => return Some(fa),
            Trial::Short => {
                lo = (a, fa, da);
                a *= 2.0;
            }
            Trial::Far => return zoom(&mut eval, f0, slope0, lo, (a, fa, da), x_out, g_out),
        }
    }
    None
}

fn zoom<E>(
    eval: &mut E,
    f0: f64,
    slope0: f64,
    mut lo: (f64, f64, f64),
    mut hi: (f64, f64, f64),
    x_out: &mut [f64],
    g_out: &mut [f64],
) -> Option<f64>
where
    E: FnMut(f64, &mut [f64], &mut [f64]) -> (f64, f64),
{
    for _ in 0..60 {
        let (al, fl, dl) = lo;
        let (ah, fh, _) = hi;
        let width = ah - al;
        if width <= 1e-16 * ah {
            break;
        }
        // minimizer of the quadratic through (al, fl, dl) and (ah, fh), safeguarded
        let denom = 2.0 * (fh - fl - dl * width);
        let mut a = if denom.is_finite() && denom > 0.0 {
            al - dl * width * width / denom
        } else {
            al + 0.5 * width
        };
        if !(a > al + 0.1 * width && a < ah - 0.1 * width) {
            a = al + 0.5 * width;
        }
        let (fa, da) = eval(a, x_out, g_out);
        match classify(f0, slope0, a, fa, da) {
            Trial::Accept => return Some(fa),
            Trial::Short => lo = (a, fa, da),
            Trial::Far => hi = (a, fa, da),
        }
    }
    // fall back to the last point short of the bracket end, if it made progress
    let (al, fl, _) = lo;
    if al > 0.0 && fl <= f0 {
        let (fa, _) = eval(al, x_out, g_out);
        return Some(fa);
    }
    None
}
