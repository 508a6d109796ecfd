//! Gauss-Legendre rules and the few closed cell/box integrals needed by the
//! gravity kernels and the field-energy tail estimate.

use crate::tensor::Vec3;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Tensor-product Gauss-Legendre integral of `f` over `[a0,b0] x [a1,b1]`.
pub fn integrate_rect(f: impl Fn(f64, f64) -> f64, a: [f64; 2], b: [f64; 2], n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let (h0, m0) = (0.5 * (b[0] - a[0]), 0.5 * (b[0] + a[0]));
    let (h1, m1) = (0.5 * (b[1] - a[1]), 0.5 * (b[1] + a[1]));
    let mut s = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += w[j] * f(m0 + h0 * x[i], m1 + h1 * x[j]);
        }
        s += w[i] * row;
    }
    s * h0 * h1
}

/// Integral of `|x|^-s` over the unit cube centred at the origin, `0 <= s < 3`.
///
/// Integrating radially from the origin to each face turns the singular
/// volume integral into a smooth face integral:
/// `3/(3-s) * ∫∫_{[-1/2,1/2]^2} (x² + y² + 1/4)^(-s/2) dx dy`.
pub fn cube_inverse_power(s: f64) -> f64 {
    assert!((0.0..3.0).contains(&s), "exponent must lie in [0, 3)");
    let face = integrate_rect(
        |x, y| (x * x + y * y + 0.25).powf(-0.5 * s),
        [0.0, 0.0],
        [0.5, 0.5],
        48,
    );
    3.0 / (3.0 - s) * 4.0 * face
}

/// `∫_{R³ \ box} |x - c|^-4 dx` for a point `c` inside the box `[lo, hi]`.
///
/// Each face contributes `d ∫∫ |p|^-4 dA`, where `d` is the distance from
/// `c` to the face plane and `p` runs over the face relative to `c`.
pub fn exterior_inverse_quartic(c: Vec3, lo: Vec3, hi: Vec3) -> f64 {
    let mut total = 0.0;
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for d in [c[axis] - lo[axis], hi[axis] - c[axis]] {
            assert!(d > 0.0, "centre must lie strictly inside the box");
            let f = |x: f64, y: f64| {
                let r2 = d * d + x * x + y * y;
                1.0 / (r2 * r2)
            };
            // Split the face at the foot of the perpendicular so each
            // quadrant has its peak at a corner.
            let xs = [lo[u] - c[u], 0.0, hi[u] - c[u]];
            let ys = [lo[v] - c[v], 0.0, hi[v] - c[v]];
            for i in 0..2 {
                for j in 0..2 {
                    if xs[i + 1] > xs[i] && ys[j + 1] > ys[j] {
                        total += d * integrate_rect(f, [xs[i], ys[j]], [xs[i + 1], ys[j + 1]], 40);
                    }
                }
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cube_average_of_inverse_distance_matches_closed_form() {
        let exact = 3.0 * (2.0 + 3f64.sqrt()).ln() - PI / 2.0;
        assert!((cube_inverse_power(1.0) - exact).abs() < 1e-13);
        assert!((cube_inverse_power(0.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exterior_quartic_of_sphere_like_box_is_bounded_by_ball_values() {
        // For the cube of half-width a around its centre the exterior
        // integral lies between the values for the inscribed and the
        // circumscribed balls, 4π/a and 4π/(√3 a).
        let a = 0.5;
        let val = exterior_inverse_quartic([0.0; 3], [-a; 3], [a; 3]);
        assert!(val < 4.0 * PI / a && val > 4.0 * PI / (3f64.sqrt() * a));
        // Scaling: the integral scales as 1/length.
        let val2 = exterior_inverse_quartic([0.0; 3], [-2.0 * a; 3], [2.0 * a; 3]);
        assert!((val / val2 - 2.0).abs() < 1e-10);
    }
}
