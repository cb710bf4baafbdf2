//! Dormand–Prince 5(4) with step-size control and the classical order-4
//! continuous extension for sampling output times.

use crate::error::{Error, Result};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
// fifth-order weights, also the last stage row (FSAL)
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
pub struct DopriOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub safety: f64,
    pub fac_min: f64,
    pub fac_max: f64,
}

impl Default for DopriOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 1_000_000,
            safety: 0.9,
            fac_min: 0.2,
            fac_max: 10.0,
        }
    }
}

/// Integrates the autonomous system `dy/dt = f(y)` and samples the solution at `t_grid`.
///
/// Returns a row-major `[t_grid.len() * dim]` buffer. Row 0 is `y0` verbatim.
/// A step is accepted when every component of the embedded error estimate
/// satisfies `|err_i| <= atol + rtol * max(|y_i|, |y_new_i|)`.
pub fn integrate_dense<F>(f: F, y0: &[f64], t_grid: &[f64], opts: &DopriOptions) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = y0.len();
    if t_grid.is_empty() {
        return Ok(Vec::new());
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("t_grid must be strictly increasing".into()));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integrator {
            t: t_grid[0],
            reason: "non-finite initial state".into(),
        });
    }
    let mut out = Vec::with_capacity(t_grid.len() * n);
    out.extend_from_slice(y0);
    if t_grid.len() == 1 {
        return Ok(out);
    }

    let t_end = *t_grid.last().expect("non-empty");
    let mut t = t_grid[0];
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut cont = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];

    f(&y, &mut k1);
    let mut h = initial_step(&f, &y, &k1, t_end - t, opts);
    let mut next_out = 1;
    let mut steps = 0;
    let mut fac_old: f64 = 1e-4;

    while next_out < t_grid.len() {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Integrator {
                t,
                reason: format!("exceeded {} steps", opts.max_steps),
            });
        }
        let last = t + h >= t_end || (t_end - (t + h)).abs() <= 1e-12 * t_end.abs().max(1.0);
        if last {
            h = t_end - t;
        }
        if h.abs() <= 16.0 * f64::EPSILON * t.abs().max(1e-300) || h == 0.0 {
            return Err(Error::Integrator {
                t,
                reason: format!("step size underflow (h = {h:e})"),
            });
        }

        for i in 0..n {
            stage[i] = y[i] + h * A21 * k1[i];
        }
        f(&stage, &mut k2);
        for i in 0..n {
            stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(&stage, &mut k3);
        for i in 0..n {
            stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(&stage, &mut k4);
        for i in 0..n {
            stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(&stage, &mut k5);
        for i in 0..n {
            stage[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(&stage, &mut k6);
        for i in 0..n {
            y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(&y_new, &mut k7);

        let mut err: f64 = 0.0;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            // shrink hard and retry; a genuinely blown-up state ends in underflow
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Integrator {
                    t,
                    reason: "non-finite state".into(),
                });
            }
            h *= opts.fac_min;
            continue;
        }

        // Lund-stabilized controller as in Hairer's DOPRI5
        let beta = 0.04;
        let expo = 0.2 - beta * 0.75;
        let fac11 = err.powf(expo);
        let fac = (fac11 / fac_old.powf(beta)) / opts.safety;
        let fac = fac.clamp(1.0 / opts.fac_max, 1.0 / opts.fac_min);
        let h_proposed = h / fac;

        if err <= 1.0 {
            fac_old = err.max(1e-4);
            let t_new = if last { t_end } else { t + h };
            for i in 0..n {
                let dy = y_new[i] - y[i];
                let bspl = h * k1[i] - dy;
                cont[0][i] = y[i];
                cont[1][i] = dy;
                cont[2][i] = bspl;
                cont[3][i] = dy - h * k7[i] - bspl;
                cont[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            while next_out < t_grid.len() && t_grid[next_out] <= t_new {
                let t_out = t_grid[next_out];
                if t_out == t_new {
                    out.extend_from_slice(&y_new);
                } else {
                    let s = (t_out - t) / h;
                    let s1 = 1.0 - s;
                    for i in 0..n {
                        let v = cont[0][i]
                            + s * (cont[1][i] + s1 * (cont[2][i] + s * (cont[3][i] + s1 * cont[4][i])));
                        out.push(v);
                    }
                }
                next_out += 1;
            }
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;
            h = if err == 0.0 { h * opts.fac_max } else { h_proposed };
        } else {
            h /= (fac11 / opts.safety).min(1.0 / opts.fac_min);
        }
    }
    Ok(out)
}

fn initial_step<F>(f: &F, y: &[f64], f0: &[f64], span: f64, opts: &DopriOptions) -> f64
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = y.len();
    let sc: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let rms = |v: &[f64]| -> f64 {
        (v.iter().zip(&sc).map(|(a, s)| (a / s) * (a / s)).sum::<f64>() / n.max(1) as f64).sqrt()
    };
    let d0 = rms(y);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; n];
    f(&y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}
