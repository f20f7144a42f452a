//! Covariance matrix assembly for kernel expressions.
//!
//! Functional forms:
//!   SE(x, x')  = s2 * exp(-(x - x')^2 / (2 l^2))
//!   PER(x, x') = s2 * exp(-2 sin^2(pi (x - x') / p) / l^2)
//!   LIN(x, x') = s2 * (x - c) (x' - c)
//!
//! Gradients are taken with respect to the optimization-space parameters
//! (log s2, log l, log p, c). Matrices are filled on the upper triangle and
//! mirrored, so symmetry is exact down to the bit pattern.

use crate::error::{Error, Result};
use crate::gp::HyperParams;
use crate::grammar::{BaseKernel, KernelExpr};
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Fills a symmetric matrix from an upper-triangle generator of
/// (value, per-parameter gradients).
fn fill_symmetric<const P: usize>(
    n: usize,
    x: &[f64],
    want_grads: bool,
    mut entry: impl FnMut(f64, f64) -> (f64, [f64; P]),
) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    let mut k = DMatrix::zeros(n, n);
    let mut grads = if want_grads {
        vec![DMatrix::zeros(n, n); P]
    } else {
        Vec::new()
    };
    for i in 0..n {
        for j in i..n {
            let (v, g) = entry(x[i], x[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
            if want_grads {
                for (p, gp) in g.iter().enumerate() {
                    grads[p][(i, j)] = *gp;
                    grads[p][(j, i)] = *gp;
                }
            }
        }
    }
    (k, grads)
}

fn build_leaf(
    base: BaseKernel,
    params: &[f64],
    x: &[f64],
    want_grads: bool,
) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    let n = x.len();
    match base {
        BaseKernel::Se => {
            let s2 = params[0].exp();
            let l = params[1].exp();
            let inv_2l2 = 1.0 / (2.0 * l * l);
            fill_symmetric::<2>(n, x, want_grads, |xi, xj| {
                let d2 = (xi - xj) * (xi - xj);
                let v = s2 * (-d2 * inv_2l2).exp();
                (v, [v, v * d2 / (l * l)])
            })
        }
        BaseKernel::Lin => {
            let s2 = params[0].exp();
            let c = params[1];
            fill_symmetric::<2>(n, x, want_grads, |xi, xj| {
                let v = s2 * (xi - c) * (xj - c);
                (v, [v, -s2 * ((xi - c) + (xj - c))])
            })
        }
        BaseKernel::Per => {
            let s2 = params[0].exp();
            let l = params[1].exp();
            let p = params[2].exp();
            let l2 = l * l;
            fill_symmetric::<3>(n, x, want_grads, |xi, xj| {
                let d = xi - xj;
                let s = (PI * d / p).sin();
                let v = s2 * (-2.0 * s * s / l2).exp();
                let d_log_l = v * 4.0 * s * s / l2;
                let d_log_p = v * (2.0 * PI * d / (p * l2)) * (2.0 * PI * d / p).sin();
                (v, [v, d_log_l, d_log_p])
            })
        }
    }
}

fn build_node(
    e: &KernelExpr,
    params: &[f64],
    cursor: &mut usize,
    x: &[f64],
    want_grads: bool,
) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    match e {
        KernelExpr::Base(b) => {
            let count = b.param_count();
            let slice = &params[*cursor..*cursor + count];
            *cursor += count;
            build_leaf(*b, slice, x, want_grads)
        }
        KernelExpr::Sum(l, r) => {
            let (kl, gl) = build_node(l, params, cursor, x, want_grads);
            let (kr, gr) = build_node(r, params, cursor, x, want_grads);
            let mut grads = gl;
            grads.extend(gr);
            (kl + kr, grads)
        }
        KernelExpr::Product(l, r) => {
            let (kl, gl) = build_node(l, params, cursor, x, want_grads);
            let (kr, gr) = build_node(r, params, cursor, x, want_grads);
            let mut grads = Vec::with_capacity(gl.len() + gr.len());
            for g in gl {
                grads.push(g.component_mul(&kr));
            }
            for g in gr {
                grads.push(kl.component_mul(&g));
            }
            (kl.component_mul(&kr), grads)
        }
    }
}

/// Builds the noisy covariance and, when requested, one gradient matrix per
/// parameter in layout order with the noise gradient last.
pub(super) fn build(
    e: &KernelExpr,
    params: &HyperParams,
    x: &[f64],
    want_grads: bool,
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    let n = x.len();
    let values = &params.0;
    let mut cursor = 0usize;
    let (mut k, mut grads) = build_node(e, values, &mut cursor, x, want_grads);
    debug_assert_eq!(cursor, values.len() - 1);

    let noise = values[values.len() - 1].exp();
    for i in 0..n {
        k[(i, i)] += noise;
    }
    if want_grads {
        let mut noise_grad = DMatrix::zeros(n, n);
        for i in 0..n {
            noise_grad[(i, i)] = noise;
        }
        grads.push(noise_grad);
    }

    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(
            e.canonical_string(),
            format!("non-finite covariance entry at parameters {values:?}"),
        ));
    }
    Ok((k, grads))
}
