//! Builtin nonlinearities and the reference design example.

use crate::error::{Error, Result};
use crate::matlin::{Matrix, SymMatrix};
use crate::model::{Gains, Lipschitz, LureSystem, NonlinearFn, TimeDomain};

/// `0.1 · log(e^{5y₂} + e^{−5y₂}) + 7`, a smoothed absolute value in `y₂`.
pub fn example_log_cosh() -> NonlinearFn {
    NonlinearFn::new("paper1", 2, 1, |y| {
        let a = (5.0 * y[1]).abs();
        // log(e^a + e^-a) = a + log(1 + e^{-2a})
        vec![0.1 * (a + (-2.0 * a).exp().ln_1p()) + 7.0]
    })
    .with_jacobian(|y| Matrix::row(&[0.0, 0.5 * (5.0 * y[1]).tanh()]))
}

/// `0.5 / (1 + exp(0.5 y₁ − y₂)) − 5`.
pub fn example_logistic() -> NonlinearFn {
    NonlinearFn::new("paper2", 2, 1, |y| vec![0.5 * sigmoid(y[1] - 0.5 * y[0]) - 5.0]).with_jacobian(|y| {
        let s = sigmoid(y[1] - 0.5 * y[0]);
        let d = 0.5 * s * (1.0 - s);
        Matrix::row(&[-0.5 * d, d])
    })
}

/// `0.5 · cos(0.5 y₁) · sin(y₂)`.
pub fn example_cos_sin() -> NonlinearFn {
    NonlinearFn::new("paper3", 2, 1, |y| vec![0.5 * (0.5 * y[0]).cos() * y[1].sin()]).with_jacobian(|y| {
        Matrix::row(&[-0.25 * (0.5 * y[0]).sin() * y[1].sin(), 0.5 * (0.5 * y[0]).cos() * y[1].cos()])
    })
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Elementwise `tanh` on `ℝⁿ`.
pub fn tanh(n: usize) -> NonlinearFn {
    NonlinearFn::new("tanh", n, n, |y| y.iter().map(|v| v.tanh()).collect())
        .with_jacobian(|y| Matrix::diag(&y.iter().map(|v| 1.0 - v.tanh().powi(2)).collect::<Vec<_>>()))
}

pub fn zero(n_y: usize, n_psi: usize) -> NonlinearFn {
    NonlinearFn::new("zero", n_y, n_psi, move |_| vec![0.0; n_psi]).with_jacobian(move |_| Matrix::zeros(n_psi, n_y))
}

/// `Ψ(y) = Γ y`.
pub fn linear(gamma: Matrix) -> NonlinearFn {
    let (n_psi, n_y) = gamma.shape();
    let jac = gamma.clone();
    NonlinearFn::new("linear", n_y, n_psi, move |y| gamma.mul_vec(y)).with_jacobian(move |_| jac.clone())
}

pub fn identity(n: usize) -> NonlinearFn {
    let mut f = linear(Matrix::identity(n));
    f.rename("identity");
    f
}

/// `Ψ(y) = 2y`.
pub fn double(n: usize) -> NonlinearFn {
    let mut f = linear(Matrix::identity(n).scale(2.0));
    f.rename("double");
    f
}

/// `Ψ(y) = c` for every `y`.
pub fn constant(n_y: usize, c: Vec<f64>) -> NonlinearFn {
    let n_psi = c.len();
    NonlinearFn::new("constant", n_y, n_psi, move |_| c.clone()).with_jacobian(move |_| Matrix::zeros(n_psi, n_y))
}

/// Builtin selectors accepted by problem files and the command line.
pub const BUILTIN_NAMES: [&str; 7] = ["paper1", "paper2", "paper3", "tanh", "zero", "identity", "double"];

/// Resolves a builtin selector for the given dimensions.
pub fn by_name(name: &str, n_y: usize, n_psi: usize) -> Result<NonlinearFn> {
    let f = match name {
        "paper1" => example_log_cosh(),
        "paper2" => example_logistic(),
        "paper3" => example_cos_sin(),
        "zero" => zero(n_y, n_psi),
        "tanh" if n_y == n_psi => tanh(n_y),
        "identity" if n_y == n_psi => identity(n_y),
        "double" if n_y == n_psi => double(n_y),
        "tanh" | "identity" | "double" => {
            return Err(Error::Dimension(format!("{name} needs n_y = n_psi, got {n_y} and {n_psi}")))
        }
        other => return Err(Error::Structural(format!("unknown builtin nonlinearity {other:?}"))),
    };
    if (f.n_y(), f.n_psi()) != (n_y, n_psi) {
        return Err(Error::Dimension(format!(
            "{name} maps R^{} to R^{}, the system needs R^{n_y} to R^{n_psi}",
            f.n_y(),
            f.n_psi()
        )));
    }
    Ok(f)
}

/// The three-state discrete-time design example and its published solution.
pub mod reference {
    use super::*;

    pub const ETA: f64 = 0.9;
    pub const RHO: f64 = 0.5;
    pub const STEPS: usize = 10;
    /// Published observed contraction factor.
    pub const OBSERVED_RATE: f64 = 0.658;

    pub fn a() -> Matrix {
        Matrix::from_rows(&[[1.2, 0.0, 0.0], [0.1, 0.8, 0.0], [0.0, 0.1, 0.6]]).expect("finite")
    }
    pub fn b() -> Matrix {
        Matrix::column(&[0.2, 0.0, 0.0])
    }
    pub fn b_psi() -> Matrix {
        Matrix::column(&[0.0, 0.0, 0.2])
    }
    pub fn c() -> Matrix {
        Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).expect("finite")
    }

    pub fn system() -> LureSystem {
        LureSystem::new(a(), b(), b_psi(), c(), TimeDomain::Discrete).expect("reference system is well formed")
    }

    pub fn lipschitz() -> Lipschitz {
        Lipschitz::new(RHO, SymMatrix::diag(&[4.0, 1.0]), SymMatrix::identity(1)).expect("valid class")
    }

    pub fn witness_w() -> SymMatrix {
        SymMatrix::diag(&[0.1, 0.05, 0.2])
    }
    pub fn witness_z() -> Matrix {
        Matrix::row(&[-0.6, -0.03, 0.3])
    }
    pub fn witness_k_psi() -> Matrix {
        Matrix::diag(&[-1.0])
    }

    /// Gains `K = Z W⁻¹` and `K_Ψ` as published.
    pub fn gains() -> Gains {
        Gains::new(Matrix::row(&[-6.0, -0.6, 1.5]), witness_k_psi())
    }

    /// `P = W⁻¹`.
    pub fn certificate() -> SymMatrix {
        SymMatrix::diag(&[10.0, 20.0, 5.0])
    }

    pub fn initial_pair() -> (Vec<f64>, Vec<f64>) {
        (vec![1.0, 1.0, 1.0], vec![-1.0, -1.0, -1.0])
    }

    pub fn nonlinearities() -> Vec<NonlinearFn> {
        vec![example_log_cosh(), example_logistic(), example_cos_sin()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn log_cosh_is_stable_for_large_arguments() {
        let f = example_log_cosh();
        let v = f.eval(&[0.0, 400.0]).unwrap()[0];
        assert_abs_diff_eq!(v, 0.1 * 2000.0 + 7.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f.eval(&[3.0, 0.0]).unwrap()[0], 0.1 * 2f64.ln() + 7.0, epsilon = 1e-15);
    }

    #[test]
    fn logistic_values() {
        let f = example_logistic();
        assert_abs_diff_eq!(f.eval(&[0.0, 0.0]).unwrap()[0], -4.75, epsilon = 1e-15);
        assert!(f.eval(&[-1e4, 1e4]).unwrap()[0].is_finite());
    }

    #[test]
    fn cos_sin_gradient_at_origin() {
        let j = example_cos_sin().analytic_jacobian(&[0.0, 0.0]).unwrap().unwrap();
        assert_eq!(j, Matrix::row(&[0.0, 0.5]));
    }

    #[test]
    fn selectors() {
        assert!(by_name("paper1", 2, 1).is_ok());
        assert!(by_name("paper1", 3, 1).is_err());
        assert!(by_name("tanh", 2, 1).is_err());
        assert_eq!(by_name("zero", 2, 1).unwrap().eval(&[1.0, 2.0]).unwrap(), vec![0.0]);
        assert!(matches!(by_name("nope", 1, 1), Err(Error::Structural(_))));
    }
}
