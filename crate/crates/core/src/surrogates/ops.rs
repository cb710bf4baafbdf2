use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};
use crate::nn::Mlp;

/// Combines branch and trunk rows pairwise: `out[r, q] = sum_j branch[r, qP + j] * trunk[r, qP + j]`.
pub fn multionet_combine(branch: ArrayView2<'_, f64>, trunk: ArrayView2<'_, f64>, n_quantities: usize) -> Result<Array2<f64>> {
    if branch.dim() != trunk.dim() {
        return Err(Error::Shape(format!(
            "branch output {:?} and trunk output {:?} differ",
            branch.dim(),
            trunk.dim()
        )));
    }
    let width = branch.ncols();
    if n_quantities == 0 || width % n_quantities != 0 {
        return Err(Error::Shape(format!(
            "output width {width} is not divisible by {n_quantities} quantities"
        )));
    }
    let p = width / n_quantities;
    let mut out = Array2::zeros((branch.nrows(), n_quantities));
    for (r, mut row) in out.rows_mut().into_iter().enumerate() {
        for q in 0..n_quantities {
            let lo = q * p;
            row[q] = branch
                .slice(s![r, lo..lo + p])
                .dot(&trunk.slice(s![r, lo..lo + p]));
        }
    }
    Ok(out)
}

/// `z(t) = z0 + sum_{d=1..D} c[:, d-1] t^d`, evaluated with Horner's scheme.
pub fn latentpoly_evolve(z0: ArrayView1<'_, f64>, coeffs: ArrayView2<'_, f64>, t: f64) -> Result<Array1<f64>> {
    if coeffs.nrows() != z0.len() {
        return Err(Error::Shape(format!(
            "coefficient matrix has {} rows, latent state has {}",
            coeffs.nrows(),
            z0.len()
        )));
    }
    let degree = coeffs.ncols();
    let mut z = z0.to_owned();
    for (k, zk) in z.iter_mut().enumerate() {
        let mut acc = 0.0;
        for d in (0..degree).rev() {
            acc = (acc + coeffs[[k, d]]) * t;
        }
        *zk += acc;
    }
    Ok(z)
}

/// Latent states of a batch along `t_grid`, starting from `z0` at `t_grid[0]`.
/// Each interval is covered by `substeps` classical RK4 steps. Shape `[B, T, L]`.
pub fn latentode_evolve(ode: &Mlp, z0: ArrayView2<'_, f64>, t_grid: &[f64], substeps: usize) -> Result<Array3<f64>> {
    let states = rk4_states(ode, z0, t_grid, substeps)?;
    Ok(gather_outputs(&states, t_grid.len(), substeps))
}

pub(crate) fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("time grid is empty".into()));
    }
    if t_grid.iter().any(|t| !t.is_finite()) || t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("time grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Every RK4 substep state, starting with `z0`; `(T - 1) * substeps + 1` entries.
pub(crate) fn rk4_states(ode: &Mlp, z0: ArrayView2<'_, f64>, t_grid: &[f64], substeps: usize) -> Result<Vec<Array2<f64>>> {
    check_grid(t_grid)?;
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be >= 1".into()));
    }
    let mut states = Vec::with_capacity((t_grid.len() - 1) * substeps + 1);
    let mut z = z0.to_owned();
    states.push(z.clone());
    for w in t_grid.windows(2) {
        let h = (w[1] - w[0]) / substeps as f64;
        for _ in 0..substeps {
            z = rk4_step(ode, &z, h)?;
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("latent ODE state".into()));
            }
            states.push(z.clone());
        }
    }
    Ok(states)
}

pub(crate) fn gather_outputs(states: &[Array2<f64>], n_times: usize, substeps: usize) -> Array3<f64> {
    let (b, l) = states[0].dim();
    let mut out = Array3::zeros((b, n_times, l));
    for t in 0..n_times {
        out.index_axis_mut(Axis(1), t).assign(&states[t * substeps]);
    }
    out
}

fn rk4_step(ode: &Mlp, z: &Array2<f64>, h: f64) -> Result<Array2<f64>> {
    let k1 = ode.forward(z.view())?;
    let k2 = ode.forward((z + &(&k1 * (0.5 * h))).view())?;
    let k3 = ode.forward((z + &(&k2 * (0.5 * h))).view())?;
    let k4 = ode.forward((z + &(&k3 * h)).view())?;
    let mut next = z.clone();
    Zip::from(&mut next)
        .and(&k1)
        .and(&k2)
        .and(&k3)
        .and(&k4)
        .for_each(|n, &a, &b, &c, &d| *n += h / 6.0 * (a + 2.0 * b + 2.0 * c + d));
    Ok(next)
}

/// Reverse pass through one RK4 step taken from `z`. `adj` is dL/dz_next on entry
/// and dL/dz on return; ODE-net parameter gradients are added into `grads`.
pub(crate) fn rk4_step_backward(ode: &Mlp, z: &Array2<f64>, h: f64, adj: &mut Array2<f64>, grads: &mut [f64]) -> Result<()> {
    let (k1, c1) = ode.forward_cached(z.view())?;
    let u2 = z + &(&k1 * (0.5 * h));
    let (k2, c2) = ode.forward_cached(u2.view())?;
    let u3 = z + &(&k2 * (0.5 * h));
    let (k3, c3) = ode.forward_cached(u3.view())?;
    let u4 = z + &(&k3 * h);
    let (_, c4) = ode.forward_cached(u4.view())?;

    let a = adj.clone();
    let dk4 = &a * (h / 6.0);
    let mut dk3 = &a * (h / 3.0);
    let mut dk2 = &a * (h / 3.0);
    let mut dk1 = &a * (h / 6.0);

    let g4 = ode.backward(&c4, dk4.view(), grads)?;
    *adj += &g4;
    dk3.scaled_add(h, &g4);
    let g3 = ode.backward(&c3, dk3.view(), grads)?;
    *adj += &g3;
    dk2.scaled_add(0.5 * h, &g3);
    let g2 = ode.backward(&c2, dk2.view(), grads)?;
    *adj += &g2;
    dk1.scaled_add(0.5 * h, &g2);
    let g1 = ode.backward(&c1, dk1.view(), grads)?;
    *adj += &g1;
    Ok(())
}
