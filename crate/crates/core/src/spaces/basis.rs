use super::quadrature::legendre;

/// Gauss-Lobatto-Legendre nodes of `order` on `[0, 1]` (`order + 1` nodes,
/// endpoints included). Order 0 is the single midpoint.
pub fn gll_nodes(order: usize) -> Vec<f64> {
    match order {
        0 => return vec![0.5],
        1 => return vec![0.0, 1.0],
        _ => {}
    }
    let n = order;
    let nf = n as f64;
    let mut nodes = vec![0.0; n + 1];
    nodes[n] = 1.0;
    for k in 1..n {
        // interior nodes are the roots of P'_n
        let mut x = -(std::f64::consts::PI * k as f64 / nf).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let d2p = (2.0 * x * dp - nf * (nf + 1.0) * p) / (1.0 - x * x);
            let dx = dp / d2p;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[k] = 0.5 * (x + 1.0);
    }
    nodes
}

/// One-dimensional Lagrange basis at GLL nodes on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalBasis {
    order: usize,
    nodes: Vec<f64>,
    denominators: Vec<f64>,
}

impl NodalBasis {
    pub fn new(order: usize) -> Self {
        let nodes = gll_nodes(order);
        let denominators = (0..nodes.len())
            .map(|j| {
                nodes
                    .iter()
                    .enumerate()
                    .filter(|&(m, _)| m != j)
                    .map(|(_, &xm)| nodes[j] - xm)
                    .product()
            })
            .collect();
        Self {
            order,
            nodes,
            denominators,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Values and first derivatives of all shape functions at `x`.
    pub fn eval_into(&self, x: f64, values: &mut [f64], derivs: &mut [f64]) {
        let n = self.nodes.len();
        let diffs: Vec<f64> = self.nodes.iter().map(|&xm| x - xm).collect();
        for j in 0..n {
            let mut v = 1.0;
            let mut d = 0.0;
            for (m, &dm) in diffs.iter().enumerate().take(n) {
                if m == j {
                    continue;
                }
                // product rule: d(Π f) accumulated alongside Π f
                d = d * dm + v;
                v *= dm;
            }
            values[j] = v / self.denominators[j];
            derivs[j] = d / self.denominators[j];
        }
    }

    pub fn eval(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let mut v = vec![0.0; self.len()];
        let mut d = vec![0.0; self.len()];
        self.eval_into(x, &mut v, &mut d);
        (v, d)
    }

    /// Values only.
    pub fn values(&self, x: f64) -> Vec<f64> {
        self.eval(x).0
    }
}

/// Shape-function table: `values[point][function]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisTable {
    pub values: Vec<Vec<f64>>,
    pub derivatives: Vec<Vec<f64>>,
}

/// Evaluates the `order` nodal basis at every point.
pub fn eval_basis(order: usize, points: &[f64]) -> BasisTable {
    let basis = NodalBasis::new(order);
    let (values, derivatives) = points.iter().map(|&x| basis.eval(x)).unzip();
    BasisTable {
        values,
        derivatives,
    }
}
