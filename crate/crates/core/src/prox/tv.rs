//! Exact 1-D total-variation denoising.
//!
//! Solves `min_y κ Σ|y_{i+1} − y_i| + ½‖x − y‖²` with Condat's direct
//! algorithm: a single forward sweep that keeps the tube bounds of the taut
//! string and backtracks only when a segment is closed. Cost is linear in
//! practice and the output is piecewise constant with bit-identical values
//! inside each segment.

/// `prox_{κ‖B·‖₁}(x)`
pub fn tv_denoise(x: &[f64], kappa: f64) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    if kappa <= 0.0 || n == 1 {
        out.copy_from_slice(x);
        return out;
    }
    let lam = kappa;
    let two_lam = 2.0 * lam;
    let (mut k, mut k0, mut kplus, mut kminus) = (0usize, 0usize, 0usize, 0usize);
    let mut umin = lam;
    let mut umax = -lam;
    let mut vmin = x[0] - lam;
    let mut vmax = x[0] + lam;
    loop {
        while k == n - 1 {
            if umin < 0.0 {
                // close a segment at the lower bound
                loop {
                    out[k0] = vmin;
                    k0 += 1;
                    if k0 > kminus {
                        break;
                    }
                }
                k = k0;
                kminus = k0;
                vmin = x[k0];
                umin = lam;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                loop {
                    out[k0] = vmax;
                    k0 += 1;
                    if k0 > kplus {
                        break;
                    }
                }
                k = k0;
                kplus = k0;
                vmax = x[k0];
                umax = -lam;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                for o in &mut out[k0..=k] {
                    *o = vmin;
                }
                return out;
            }
        }
        umin += x[k + 1] - vmin;
        if umin < -lam {
            loop {
                out[k0] = vmin;
                k0 += 1;
                if k0 > kminus {
                    break;
                }
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmin = x[k0];
            vmax = vmin + two_lam;
            umin = lam;
            umax = -lam;
            continue;
        }
        umax += x[k + 1] - vmax;
        if umax > lam {
            loop {
                out[k0] = vmax;
                k0 += 1;
                if k0 > kplus {
                    break;
                }
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmax = x[k0];
            vmin = vmax - two_lam;
            umin = lam;
            umax = -lam;
            continue;
        }
        k += 1;
        if umin >= lam {
            kminus = k;
            vmin += (umin - lam) / (k - k0 + 1) as f64;
            umin = lam;
        }
        if umax <= -lam {
            kplus = k;
            vmax += (umax + lam) / (k - k0 + 1) as f64;
            umax = -lam;
        }
    }
}
