use super::{GridConfig, MomentTable, PsiFunction};
use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const GOLDEN_ITERS: usize = 200;

/// Location and value of a grid extremum after refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FenchelValue {
    pub value: f64,
    /// The `p` at which the extremum was found.
    pub at: f64,
    /// The support was cut at `p_max`.
    pub truncated: bool,
}

/// Golden-section maximization of a unimodal `f` on `[a, b]`.
///
/// Returns the best point evaluated. Ties keep the left point.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> (f64, f64) {
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = if fd > fc { (d, fd) } else { (c, fc) };
    for _ in 0..GOLDEN_ITERS {
        if b - a <= 1e-14 * (a.abs() + b.abs()).max(1.0) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            if fd > best.1 {
                best = (d, fd);
            }
        }
    }
    best
}

/// Golden-section minimization; see [`golden_max`].
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> (f64, f64) {
    let (x, v) = golden_max(|x| -f(x), a, b);
    (x, -v)
}

/// Grid argmax (smallest index on ties) refined on the bracketing cell.
fn refined_max<F: Fn(f64) -> f64>(points: &[f64], f: F) -> (f64, f64) {
    let mut best = 0;
    let mut best_val = f(points[0]);
    for (i, &p) in points.iter().enumerate().skip(1) {
        let v = f(p);
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    if points.len() == 1 {
        return (points[0], best_val);
    }
    let lo = points[best.saturating_sub(1)];
    let hi = points[(best + 1).min(points.len() - 1)];
    let (x, v) = golden_max(&f, lo, hi);
    if v > best_val {
        (x, v)
    } else {
        (points[best], best_val)
    }
}

fn ln_psi(psi: &PsiFunction, p: f64) -> f64 {
    psi.ln_eval(p)
        .expect("grid points are generated inside the support")
}

/// Young-Fenchel transform of `ν(p) = p ln ψ(p)`:
/// `ν*(u) = sup_p (u p - p ln ψ(p))` over `[2, min(b, p_max)]`.
///
/// The raw supremum is returned; it may be negative when `u < ln ψ(2)`.
pub fn nu_star(psi: &PsiFunction, u: f64, cfg: &GridConfig) -> FenchelValue {
    let grid = psi.p_grid(cfg);
    let (at, value) = refined_max(&grid.points, |p| p * (u - ln_psi(psi, p)));
    FenchelValue {
        value,
        at,
        truncated: grid.truncated,
    }
}

/// Convenience wrapper returning only the value of [`nu_star`].
pub fn nu_star_at(psi: &PsiFunction, u: f64, cfg: &GridConfig) -> f64 {
    nu_star(psi, u, cfg).value
}

/// `v_ψ(x) = inf_p (x / p + ln ψ(p))`.
pub fn v_inf(psi: &PsiFunction, x: f64, cfg: &GridConfig) -> FenchelValue {
    let grid = psi.p_grid(cfg);
    let (at, neg) = refined_max(&grid.points, |p| -(x / p + ln_psi(psi, p)));
    FenchelValue {
        value: -neg,
        at,
        truncated: grid.truncated,
    }
}

/// `Gψ` norm: `sup_p |η|_p / ψ(p)` over the moment grid.
pub fn gls_norm(moments: &MomentTable, psi: &PsiFunction) -> Result<f64> {
    if moments.is_empty() {
        return Err(Error::InvalidValue("empty moment table".into()));
    }
    let mut norm = 0.0f64;
    for (&p, &v) in moments.p_grid.iter().zip(&moments.values) {
        let lp = psi.ln_eval(p)?;
        if v > 0.0 {
            norm = norm.max((v.ln() - lp).exp());
        }
    }
    Ok(norm)
}

/// `T(y) <= exp(-ν*(ln(y / ||ζ||)))` for `y > e ||ζ||`; the void bound 1 otherwise.
///
/// A zero norm describes the degenerate variable 0, whose tail vanishes.
pub fn tail_bound(psi: &PsiFunction, gnorm: f64, y: f64, cfg: &GridConfig) -> f64 {
    if gnorm <= 0.0 {
        return if y > 0.0 { 0.0 } else { 1.0 };
    }
    if y <= std::f64::consts::E * gnorm {
        return 1.0;
    }
    let exponent = nu_star(psi, (y / gnorm).ln(), cfg).value.max(0.0);
    (-exponent).exp().min(1.0)
}
