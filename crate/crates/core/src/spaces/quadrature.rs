use crate::error::{Error, Result};

/// Gauss-Legendre rule on `[0, 1]`, points ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Tensor rule on `[0,1]²`; point `(a, b)` is stored at `a + b·n`.
    pub fn tensor(&self) -> TensorRule {
        let n = self.len();
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for b in 0..n {
            for a in 0..n {
                points.push([self.points[a], self.points[b]]);
                weights.push(self.weights[a] * self.weights[b]);
            }
        }
        TensorRule { points, weights }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

/// Legendre polynomial `P_n(x)` and its derivative.
pub(crate) fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        0.5 * n * (n + 1.0) * x.powi(n as i32 + 1)
    } else {
        n * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, dp)
}

/// `n`-point Gauss-Legendre rule mapped to `[0, 1]`.
pub fn gauss_rule(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "quadrature needs at least one point".into(),
        ));
    }
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        // cos guesses run from +1 down; map so points ascend on [0,1]
        points[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    Ok(QuadratureRule { points, weights })
}
