//! Second-order finite differences and trapezoidal quadrature.
//!
//! Along each axis the derivative uses the central stencil
//! `(f[i+1] - f[i-1]) / 2h` at interior nodes and the three-point one-sided
//! stencils `(-3f[0] + 4f[1] - f[2]) / 2h`, `(3f[n-1] - 4f[n-2] + f[n-3]) / 2h`
//! on the faces. All three are exact on quadratics. The per-axis operators act
//! on one axis only, so they commute with each other exactly.

use crate::error::Result;
use crate::exec;

use super::field::ensure_same_domain;
use super::{GridDomain, ScalarField, VectorField};

/// `∂f/∂x^axis` on raw node values.
pub fn partial_values(domain: &GridDomain, values: &[f64], axis: usize) -> Vec<f64> {
    let n = domain.counts()[axis];
    let s = domain.stride(axis);
    let inv = 0.5 / domain.spacing()[axis];
    exec::map_nodes(domain.len(), |k| {
        let i = domain.axis_index(k, axis);
        if i == 0 {
            (-3.0 * values[k] + 4.0 * values[k + s] - values[k + 2 * s]) * inv
        } else if i + 1 == n {
            (3.0 * values[k] - 4.0 * values[k - s] + values[k - 2 * s]) * inv
        } else {
            (values[k + s] - values[k - s]) * inv
        }
    })
}

/// Transpose of [`partial_values`] as a linear map on node values.
///
/// Used to pull gradients of discrete objectives back onto node values.
pub fn partial_adjoint_values(domain: &GridDomain, g: &[f64], axis: usize) -> Vec<f64> {
    let n = domain.counts()[axis];
    let s = domain.stride(axis);
    let inv = 0.5 / domain.spacing()[axis];
    exec::map_nodes(domain.len(), |k| {
        let j = domain.axis_index(k, axis);
        // k - j*s is the first node of this line
        let line = k - j * s;
        let at = |i: usize| g[line + i * s];
        let mut acc = 0.0;
        // row 0: [-3, 4, -1]
        match j {
            0 => acc += -3.0 * at(0),
            1 => acc += 4.0 * at(0),
            2 => acc += -at(0),
            _ => {}
        }
        // interior rows i: -1 at column i-1, +1 at column i+1
        if j + 1 <= n - 2 {
            acc -= at(j + 1);
        }
        if j >= 2 && j - 1 <= n - 2 {
            acc += at(j - 1);
        }
        // row n-1: [1, -4, 3] on columns n-3, n-2, n-1
        if j == n - 3 {
            acc += at(n - 1);
        } else if j == n - 2 {
            acc -= 4.0 * at(n - 1);
        } else if j == n - 1 {
            acc += 3.0 * at(n - 1);
        }
        acc * inv
    })
}

/// Derivative with the first-order face closure `(f[1] - f[0]) / h`,
/// `(f[n-1] - f[n-2]) / h` and the central stencil inside. Against the
/// trapezoid weights it satisfies summation by parts,
/// `Σ_i w_i (∂f)_i = f[n-1] - f[0]` along every line.
pub fn sbp_partial_values(domain: &GridDomain, values: &[f64], axis: usize) -> Vec<f64> {
    let n = domain.counts()[axis];
    let s = domain.stride(axis);
    let h = domain.spacing()[axis];
    exec::map_nodes(domain.len(), |k| {
        let i = domain.axis_index(k, axis);
        if i == 0 {
            (values[k + s] - values[k]) / h
        } else if i + 1 == n {
            (values[k] - values[k - s]) / h
        } else {
            (values[k + s] - values[k - s]) * (0.5 / h)
        }
    })
}

/// Transpose of [`sbp_partial_values`].
pub fn sbp_partial_adjoint_values(domain: &GridDomain, g: &[f64], axis: usize) -> Vec<f64> {
    let n = domain.counts()[axis];
    let s = domain.stride(axis);
    let h = domain.spacing()[axis];
    let half = 0.5 / h;
    exec::map_nodes(domain.len(), |k| {
        let j = domain.axis_index(k, axis);
        let line = k - j * s;
        let at = |i: usize| g[line + i * s];
        // coefficient of column j in row r, summed over rows
        let coef = |r: usize| -> f64 {
            if r == 0 {
                match j {
                    0 => -1.0 / h,
                    1 => 1.0 / h,
                    _ => 0.0,
                }
            } else if r + 1 == n {
                if j == n - 1 {
                    1.0 / h
                } else if j + 2 == n {
                    -1.0 / h
                } else {
                    0.0
                }
            } else if j == r + 1 {
                half
            } else if j + 1 == r {
                -half
            } else {
                0.0
            }
        };
        let lo = j.saturating_sub(1);
        let hi = (j + 1).min(n - 1);
        (lo..=hi).map(|r| coef(r) * at(r)).sum()
    })
}

pub fn partial(f: &ScalarField, axis: usize) -> ScalarField {
    let values = partial_values(f.domain(), f.values(), axis);
    ScalarField::from_raw(f.domain_arc().clone(), values)
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let components = (0..f.domain().dim()).map(|a| partial(f, a)).collect();
    VectorField::from_components(components)
}

/// `Σ_a ∂_a V_a` with the same per-axis stencils as [`gradient`].
pub fn divergence(v: &VectorField) -> ScalarField {
    let domain = v.domain_arc().clone();
    let mut acc = vec![0.0; domain.len()];
    for (a, c) in v.components().iter().enumerate() {
        let d = partial_values(&domain, c.values(), a);
        acc.iter_mut().zip(d).for_each(|(x, y)| *x += y);
    }
    ScalarField::from_raw(domain, acc)
}

/// Tensor-product trapezoid rule.
pub fn integrate(f: &ScalarField) -> f64 {
    integrate_values(f.domain(), f.values())
}

pub fn integrate_values(domain: &GridDomain, values: &[f64]) -> f64 {
    exec::sum_nodes(domain.len(), |k| domain.quadrature_weight(k) * values[k])
}

/// Trapezoid weights of every node.
pub fn quadrature_weights(domain: &GridDomain) -> Vec<f64> {
    exec::map_nodes(domain.len(), |k| domain.quadrature_weight(k))
}

/// Gradient of `w` plus `F`, the vector inside the p-area integrand.
pub fn shifted_gradient(w: &ScalarField, f: &VectorField) -> Result<VectorField> {
    ensure_same_domain(w.domain(), f.domain())?;
    gradient(w).add(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn dom(lo: &[f64], hi: &[f64], n: &[usize]) -> Arc<GridDomain> {
        Arc::new(GridDomain::new(lo, hi, n).unwrap())
    }

    fn max_err(a: &ScalarField, f: impl Fn(&[f64]) -> f64) -> f64 {
        (0..a.domain().len())
            .map(|k| (a.get(k) - f(&a.domain().coords(k))).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn gradient_of_coordinate_is_exact() {
        let d = dom(&[0.0, 0.0, 0.0], &[1.0, 2.0, 1.0], &[5, 7, 6]);
        let f = ScalarField::sample(d, |x| x[0]).unwrap();
        let g = gradient(&f);
        assert_eq!(max_err(g.component(0), |_| 1.0), 0.0);
        assert_eq!(max_err(g.component(1), |_| 0.0), 0.0);
        assert_eq!(max_err(g.component(2), |_| 0.0), 0.0);
    }

    #[test]
    fn gradient_of_bilinear_is_exact() {
        let d = dom(&[0.0, 0.0], &[1.0, 1.0], &[9, 9]);
        let f = ScalarField::sample(d, |x| x[0] * x[1]).unwrap();
        let g = gradient(&f);
        assert!(max_err(g.component(0), |x| x[1]) < 1e-14);
        assert!(max_err(g.component(1), |x| x[0]) < 1e-14);
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let d = dom(&[-1.0, 0.0], &[1.0, 3.0], &[5, 8]);
        let g = gradient(&ScalarField::constant(d, 4.2));
        for c in g.components() {
            assert!(c.max_abs() < 1e-13);
        }
    }

    #[test]
    fn divergence_examples() {
        let d = dom(&[0.0, 0.0], &[1.0, 1.0], &[9, 9]);
        let v = VectorField::sample(d.clone(), |x, o| {
            o[0] = x[0];
            o[1] = x[1];
        })
        .unwrap();
        assert!(max_err(&divergence(&v), |_| 2.0) < 1e-13);

        let r = VectorField::sample(d.clone(), |x, o| {
            o[0] = -x[1];
            o[1] = x[0];
        })
        .unwrap();
        assert!(divergence(&r).max_abs() < 1e-13);

        let q = VectorField::sample(d, |x, o| {
            o[0] = x[0] * x[0];
            o[1] = 0.0;
        })
        .unwrap();
        assert!(max_err(&divergence(&q), |x| 2.0 * x[0]) < 1e-13);
    }

    #[test]
    fn integrate_examples() {
        let d = dom(&[0.0, 0.0], &[1.0, 1.0], &[9, 9]);
        let one = ScalarField::constant(d.clone(), 1.0);
        assert!((integrate(&one) - 1.0).abs() < 1e-15);
        let f = ScalarField::sample(d.clone(), |x| 2.0 * x[0]).unwrap();
        assert!((integrate(&f) - 1.0).abs() < 1e-15);
        let g = ScalarField::sample(d, |x| x[0] + x[1]).unwrap();
        assert!((integrate(&g) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn odd_function_integrates_to_zero() {
        let d = dom(&[-1.0, -2.0], &[1.0, 2.0], &[17, 33]);
        let f = ScalarField::sample(d, |x| x[0].powi(3) * (x[1]).cos() + x[1]).unwrap();
        assert!(integrate(&f).abs() <= 1e-12 * f.scale());
    }

    #[test]
    fn laplacian_of_quadratic_exact_in_interior() {
        let d = dom(&[0.0, -1.0, 0.5], &[1.0, 1.0, 2.0], &[7, 9, 8]);
        let f = ScalarField::sample(d.clone(), |x| {
            3.0 * x[0] * x[0] - x[1] * x[1] + 0.5 * x[2] * x[2] + x[0] * x[1] - 2.0 * x[2]
        })
        .unwrap();
        let lap = divergence(&gradient(&f));
        // analytic laplacian: 6 - 2 + 1 = 5. Mixed terms are per-axis linear.
        // Interior nodes at distance >= 2 from faces see only central stencils.
        for k in 0..d.len() {
            let idx = d.multi_index(k);
            let deep = idx.iter().zip(d.counts()).all(|(&i, &n)| i >= 2 && i + 3 <= n);
            if deep {
                assert!((lap.get(k) - 5.0).abs() < 1e-10, "node {idx:?}");
            }
        }
    }

    #[test]
    fn second_order_convergence_trig() {
        let err = |n: usize| {
            let d = dom(&[0.0, 0.0], &[1.0, 1.0], &[n, n]);
            let f = ScalarField::sample(d, |x| (PI * x[0]).sin() * (2.0 * x[1]).cos()).unwrap();
            let g = gradient(&f);
            max_err(g.component(0), |x| PI * (PI * x[0]).cos() * (2.0 * x[1]).cos())
                .max(max_err(g.component(1), |x| {
                    -2.0 * (PI * x[0]).sin() * (2.0 * x[1]).sin()
                }))
        };
        let (e1, e2, e3) = (err(33), err(65), err(129));
        for r in [e1 / e2, e2 / e3] {
            assert!((3.4..=4.6).contains(&r), "ratio {r}");
        }
    }

    type Op = fn(&GridDomain, &[f64], usize) -> Vec<f64>;

    fn check_transpose(op: Op, adj: Op) {
        let d = dom(&[0.0, 0.0], &[1.0, 2.0], &[5, 7]);
        let n = d.len();
        for axis in 0..2 {
            // <D e_i, e_j> == <e_i, D^T e_j>
            for i in 0..n {
                let mut ei = vec![0.0; n];
                ei[i] = 1.0;
                let col = op(&d, &ei, axis);
                for j in 0..n {
                    let mut ej = vec![0.0; n];
                    ej[j] = 1.0;
                    let row = adj(&d, &ej, axis);
                    assert!((col[j] - row[i]).abs() < 1e-12, "axis {axis} i {i} j {j}");
                }
            }
        }
    }

    #[test]
    fn adjoint_matches_transpose() {
        check_transpose(partial_values, partial_adjoint_values);
        check_transpose(sbp_partial_values, sbp_partial_adjoint_values);
    }

    #[test]
    fn sbp_closure_telescopes() {
        let d = dom(&[0.0, -1.0], &[1.0, 2.0], &[9, 13]);
        let f = ScalarField::sample(d.clone(), |x| (3.0 * x[0]).sin() * x[1].exp()).unwrap();
        let w = quadrature_weights(&d);
        for axis in 0..2 {
            let df = sbp_partial_values(&d, f.values(), axis);
            let lhs: f64 = df.iter().zip(&w).map(|(a, b)| a * b).sum();
            // Σ_lines (f_last - f_first) weighted by the other axis
            let other = 1 - axis;
            let rhs: f64 = (0..d.len())
                .filter(|&k| d.axis_index(k, axis) == 0)
                .map(|k| {
                    let last = k + (d.counts()[axis] - 1) * d.stride(axis);
                    let wo = if d.axis_index(k, other) == 0
                        || d.axis_index(k, other) + 1 == d.counts()[other]
                    {
                        0.5
                    } else {
                        1.0
                    } * d.spacing()[other];
                    wo * (f.get(last) - f.get(k))
                })
                .sum();
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} {rhs}");
        }
    }
}
