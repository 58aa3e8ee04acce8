//! Builtin vector fields with their declared constants.

use crate::dynamics::VectorField;

/// `x' = A x`. Growth and Lipschitz constants use the Frobenius norm of `A`;
/// the monotonicity constant is a Gershgorin bound on the symmetric part.
pub fn linear(matrix: Vec<Vec<f64>>) -> VectorField {
    let n = matrix.len();
    assert!(n > 0 && matrix.iter().all(|r| r.len() == n), "matrix must be square");
    let frob = matrix.iter().flatten().map(|a| a * a).sum::<f64>().sqrt();
    let mut gersh = f64::NEG_INFINITY;
    for i in 0..n {
        let mut row = matrix[i][i];
        for j in 0..n {
            if j != i {
                row += 0.5 * (matrix[i][j] + matrix[j][i]).abs();
            }
        }
        gersh = gersh.max(row);
    }
    VectorField::autonomous(n, move |x, out| {
        for (o, row) in out.iter_mut().zip(&matrix) {
            *o = row.iter().zip(x).map(|(a, v)| a * v).sum();
        }
    })
    .with_growth(frob)
    .with_lipschitz(frob)
    .with_monotone(-gersh)
}

/// `x' = λ x` on `R^dim`.
pub fn scaled_identity(dim: usize, lambda: f64) -> VectorField {
    VectorField::autonomous(dim, move |x, out| {
        for (o, v) in out.iter_mut().zip(x) {
            *o = lambda * v;
        }
    })
    .with_growth(lambda.abs())
    .with_lipschitz(lambda.abs())
    .with_monotone(-lambda)
}

/// Planar rotation `(x1, x2)' = ω (−x2, x1)`.
pub fn rotation(omega: f64) -> VectorField {
    VectorField::autonomous(2, move |x, out| {
        out[0] = -omega * x[1];
        out[1] = omega * x[0];
    })
    .with_growth(omega.abs())
    .with_lipschitz(omega.abs())
    .with_monotone(0.0)
}

/// Scalar logistic growth `y' = β (b − y) y`.
pub fn logistic(beta: f64, b: f64) -> VectorField {
    VectorField::autonomous(1, move |x, out| out[0] = beta * (b - x[0]) * x[0])
}

/// Constant velocity `x' = v`.
pub fn transport(velocity: Vec<f64>) -> VectorField {
    let speed = velocity.iter().map(|v| v * v).sum::<f64>().sqrt();
    VectorField::autonomous(velocity.len(), move |_x, out| out.copy_from_slice(&velocity))
        .with_growth(speed)
        .with_lipschitz(0.0)
        .with_monotone(0.0)
}

/// The four-dimensional age-structured field
/// `(1, −ρ x2, σ x3, β (b − x4) x4)`.
pub fn demographic4d(rho: f64, sigma: f64, beta: f64, b: f64) -> VectorField {
    VectorField::autonomous(4, move |x, out| {
        out[0] = 1.0;
        out[1] = -rho * x[1];
        out[2] = sigma * x[2];
        out[3] = beta * (b - x[3]) * x[3];
    })
}

/// One monomial `coeff · Π x_i^{powers_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

/// Polynomial field: component `i` is the sum of `components[i]`.
pub fn polynomial(components: Vec<Vec<Monomial>>) -> VectorField {
    let n = components.len();
    VectorField::autonomous(n, move |x, out| {
        for (o, terms) in out.iter_mut().zip(&components) {
            *o = terms
                .iter()
                .map(|m| {
                    m.coeff
                        * m.powers
                            .iter()
                            .zip(x)
                            .map(|(&p, v)| v.powi(p as i32))
                            .product::<f64>()
                })
                .sum();
        }
    })
}
